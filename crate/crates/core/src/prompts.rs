//! Externalized prompt templates.
//!
//! One file per agent role, split into named sections by lines of the form
//! `[section]`. Every role has `system` and `user` sections; some carry
//! extra sections (style directives keyed by strength, feedback blocks).
//! Placeholders are written `{{name}}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template `{0}` not found")]
    MissingRole(String),
    #[error("template `{role}` has no section `[{section}]`")]
    MissingSection { role: String, section: String },
    #[error("template `{role}`: placeholder `{{{{{name}}}}}` has no value")]
    Unbound { role: String, name: String },
    #[error("template `{role}`: unclosed placeholder")]
    Unclosed { role: String },
    #[error("reading templates: {0}")]
    Io(String),
}

/// Roles every prompt set must provide.
pub const ROLES: [&str; 14] = [
    "detect_suppression",
    "estimate_attributes",
    "describe_bias",
    "compose_child_report",
    "compose_adult_report",
    "select_panel",
    "initial_draft",
    "peer_comment",
    "refine_draft",
    "final_integration",
    "parent_turn",
    "child_turn",
    "narrator_note",
    "repair",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    role: String,
    sections: BTreeMap<String, String>,
}

fn section_header(line: &str) -> Option<&str> {
    let name = line.strip_prefix('[')?.strip_suffix(']')?;
    (!name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_'))
    .then_some(name)
}

impl Template {
    pub fn parse(role: &str, text: &str) -> Self {
        let mut sections = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        for line in text.lines() {
            if let Some(name) = section_header(line.trim_end()) {
                if let Some((n, body)) = current.take() {
                    sections.insert(n, body.join("\n").trim().to_string());
                }
                current = Some((name.to_string(), Vec::new()));
            } else if let Some((_, body)) = current.as_mut() {
                body.push(line);
            }
        }
        if let Some((n, body)) = current {
            sections.insert(n, body.join("\n").trim().to_string());
        }
        Self {
            role: role.to_string(),
            sections,
        }
    }

    pub fn role(&self) -> &str {
        &self.role
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    /// Substitute `{{name}}` placeholders in `section`. Values are inserted
    /// verbatim and never re-scanned.
    pub fn render(
        &self,
        section: &str,
        vars: &BTreeMap<&str, String>,
    ) -> Result<String, TemplateError> {
        let body = self
            .sections
            .get(section)
            .ok_or_else(|| TemplateError::MissingSection {
                role: self.role.clone(),
                section: section.to_string(),
            })?;
        let mut out = String::with_capacity(body.len() * 2);
        let mut rest = body.as_str();
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").ok_or_else(|| TemplateError::Unclosed {
                role: self.role.clone(),
            })?;
            let name = after[..end].trim();
            let value = vars.get(name).ok_or_else(|| TemplateError::Unbound {
                role: self.role.clone(),
                name: name.to_string(),
            })?;
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// A complete set of role templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<String, Template>,
}

macro_rules! builtin_set {
    ($lang:literal) => {
        [
            (
                "detect_suppression",
                include_str!(concat!("../prompts/", $lang, "/detect_suppression.txt")),
            ),
            (
                "estimate_attributes",
                include_str!(concat!("../prompts/", $lang, "/estimate_attributes.txt")),
            ),
            (
                "describe_bias",
                include_str!(concat!("../prompts/", $lang, "/describe_bias.txt")),
            ),
            (
                "compose_child_report",
                include_str!(concat!("../prompts/", $lang, "/compose_child_report.txt")),
            ),
            (
                "compose_adult_report",
                include_str!(concat!("../prompts/", $lang, "/compose_adult_report.txt")),
            ),
            (
                "select_panel",
                include_str!(concat!("../prompts/", $lang, "/select_panel.txt")),
            ),
            (
                "initial_draft",
                include_str!(concat!("../prompts/", $lang, "/initial_draft.txt")),
            ),
            (
                "peer_comment",
                include_str!(concat!("../prompts/", $lang, "/peer_comment.txt")),
            ),
            (
                "refine_draft",
                include_str!(concat!("../prompts/", $lang, "/refine_draft.txt")),
            ),
            (
                "final_integration",
                include_str!(concat!("../prompts/", $lang, "/final_integration.txt")),
            ),
            (
                "parent_turn",
                include_str!(concat!("../prompts/", $lang, "/parent_turn.txt")),
            ),
            (
                "child_turn",
                include_str!(concat!("../prompts/", $lang, "/child_turn.txt")),
            ),
            (
                "narrator_note",
                include_str!(concat!("../prompts/", $lang, "/narrator_note.txt")),
            ),
            (
                "repair",
                include_str!(concat!("../prompts/", $lang, "/repair.txt")),
            ),
        ]
    };
}

impl PromptSet {
    /// Built-in templates for `language` (`ja` or `en`).
    pub fn builtin(language: &str) -> Result<Self, TemplateError> {
        let files: [(&str, &str); 14] = match language {
            "ja" => builtin_set!("ja"),
            "en" => builtin_set!("en"),
            other => {
                return Err(TemplateError::MissingRole(format!(
                    "builtin language `{other}`"
                )))
            }
        };
        Self::from_texts(files)
    }

    pub fn english() -> Self {
        Self::builtin("en").expect("builtin English templates")
    }

    pub fn japanese() -> Self {
        Self::builtin("ja").expect("builtin Japanese templates")
    }

    pub fn from_texts<'a>(
        files: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, TemplateError> {
        let templates: BTreeMap<String, Template> = files
            .into_iter()
            .map(|(role, text)| (role.to_string(), Template::parse(role, text)))
            .collect();
        let set = Self { templates };
        set.check()?;
        Ok(set)
    }

    /// Load `<role>.txt` for every role from `dir`.
    pub fn load(dir: &Path) -> Result<Self, TemplateError> {
        let mut texts = Vec::new();
        for role in ROLES {
            let path = dir.join(format!("{role}.txt"));
            let text = fs::read_to_string(&path)
                .map_err(|e| TemplateError::Io(format!("{}: {e}", path.display())))?;
            texts.push((role, text));
        }
        Self::from_texts(texts.iter().map(|(r, t)| (*r, t.as_str())))
    }

    fn check(&self) -> Result<(), TemplateError> {
        for role in ROLES {
            let t = self.get(role)?;
            for section in ["system", "user"] {
                if !t.has_section(section) {
                    return Err(TemplateError::MissingSection {
                        role: role.to_string(),
                        section: section.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, role: &str) -> Result<&Template, TemplateError> {
        self.templates
            .get(role)
            .ok_or_else(|| TemplateError::MissingRole(role.to_string()))
    }

    /// Render the `system` and `user` sections of `role`.
    pub fn render_pair(
        &self,
        role: &str,
        vars: &BTreeMap<&str, String>,
    ) -> Result<(String, String), TemplateError> {
        let t = self.get(role)?;
        Ok((t.render("system", vars)?, t.render("user", vars)?))
    }

    pub fn render_section(
        &self,
        role: &str,
        section: &str,
        vars: &BTreeMap<&str, String>,
    ) -> Result<String, TemplateError> {
        self.get(role)?.render(section, vars)
    }
}
