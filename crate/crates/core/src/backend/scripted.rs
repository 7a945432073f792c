use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{BackendError, ChatProvider, ChatRequest};

/// Fixture-driven provider.
///
/// Responses are looked up by `(tag, prompt hash)` first and fall back to a
/// per-tag response. On disk a fixture set is a directory holding
/// `<tag>/<hash>.txt` (strict) and `<tag>.txt` (coarse) files.
///
/// Response text may contain `{{key}}` placeholders, expanded from the
/// request context, plus three built-ins: `{{tag}}`, `{{hash}}` and
/// `{{choose:a|b|c}}`, which picks one alternative by prompt hash.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    strict: BTreeMap<(String, String), String>,
    coarse: BTreeMap<String, String>,
}

fn strip_final_newline(mut s: String) -> String {
    if s.ends_with('\n') {
        s.pop();
        if s.ends_with('\r') {
            s.pop();
        }
    }
    s
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_coarse(mut self, tag: impl Into<String>, response: impl Into<String>) -> Self {
        self.coarse.insert(tag.into(), response.into());
        self
    }

    pub fn with_strict(
        mut self,
        tag: impl Into<String>,
        hash: impl Into<String>,
        response: impl Into<String>,
    ) -> Self {
        self.strict
            .insert((tag.into(), hash.into()), response.into());
        self
    }

    pub fn from_dir(dir: &Path) -> Result<Self, BackendError> {
        let read_err =
            |p: &Path, e: std::io::Error| BackendError::Fixture(format!("{}: {e}", p.display()));
        let mut provider = Self::new();
        let entries = fs::read_dir(dir).map_err(|e| read_err(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| read_err(dir, e))?.path();
            let Some(name) = path
                .file_name()
                .and_then(|n| n.to_str())
                .map(str::to_string)
            else {
                continue;
            };
            if path.is_dir() {
                for inner in fs::read_dir(&path).map_err(|e| read_err(&path, e))? {
                    let file = inner.map_err(|e| read_err(&path, e))?.path();
                    if let Some(hash) = file
                        .file_name()
                        .and_then(|n| n.to_str())
                        .and_then(|n| n.strip_suffix(".txt"))
                    {
                        let text = fs::read_to_string(&file).map_err(|e| read_err(&file, e))?;
                        provider
                            .strict
                            .insert((name.clone(), hash.to_string()), strip_final_newline(text));
                    }
                }
            } else if let Some(tag) = name.strip_suffix(".txt") {
                let text = fs::read_to_string(&path).map_err(|e| read_err(&path, e))?;
                provider
                    .coarse
                    .insert(tag.to_string(), strip_final_newline(text));
            }
        }
        Ok(provider)
    }

    pub fn len(&self) -> usize {
        self.strict.len() + self.coarse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn expand(template: &str, request: &ChatRequest, hash: &str) -> Result<String, BackendError> {
        let mut out = String::with_capacity(template.len());
        let mut rest = template;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").ok_or_else(|| {
                BackendError::Fixture(format!("unclosed placeholder in `{}`", request.tag))
            })?;
            let key = after[..end].trim();
            let value = if let Some(options) = key.strip_prefix("choose:") {
                let options: Vec<&str> = options.split('|').collect();
                let seed = u64::from_str_radix(hash, 16).unwrap_or(0);
                options[(seed % options.len() as u64) as usize].to_string()
            } else {
                match key {
                    "tag" => request.tag.clone(),
                    "hash" => hash.to_string(),
                    other => request.context.get(other).cloned().ok_or_else(|| {
                        BackendError::Fixture(format!(
                            "fixture for `{}` references unknown placeholder `{other}`",
                            request.tag
                        ))
                    })?,
                }
            };
            out.push_str(&value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        let hash = request.prompt_hash();
        let template = self
            .strict
            .get(&(request.tag.clone(), hash.clone()))
            .or_else(|| self.coarse.get(&request.tag))
            .ok_or_else(|| BackendError::MissingFixture {
                tag: request.tag.clone(),
                hash: hash.clone(),
            })?;
        let text = Self::expand(template, request, &hash)?;
        if text.trim().is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(text)
    }

    fn id(&self) -> String {
        "scripted".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_fixture_wins_over_coarse() {
        let req = ChatRequest::new("detect_suppression", "sys", "dialogue");
        let strict = r#"{"s":4,"suppression_type":"anxiety","reason":"r","c":0.85}"#;
        let p = ScriptedProvider::new()
            .with_coarse("detect_suppression", "coarse")
            .with_strict("detect_suppression", req.prompt_hash(), strict);
        assert_eq!(p.complete(&req).unwrap(), strict);
        let other = ChatRequest::new("detect_suppression", "sys", "another dialogue");
        assert_eq!(p.complete(&other).unwrap(), "coarse");
    }

    #[test]
    fn unknown_tag_is_missing_fixture() {
        let p = ScriptedProvider::new().with_coarse("a", "x");
        let err = p.complete(&ChatRequest::new("b", "s", "u")).unwrap_err();
        assert!(matches!(err, BackendError::MissingFixture { tag, .. } if tag == "b"));
    }

    #[test]
    fn placeholders_expand_from_context() {
        let p = ScriptedProvider::new()
            .with_coarse("draft", "{{agent_id}} says hi [{{tag}}] {{choose:x|y}}")
            .with_coarse("bad", "{{nope}}");
        let req = ChatRequest::new("draft", "s", "u").with_context("agent_id", "psy-01");
        let text = p.complete(&req).unwrap();
        assert!(text.starts_with("psy-01 says hi [draft] "));
        assert!(text.ends_with('x') || text.ends_with('y'));
        assert_eq!(text, p.complete(&req).unwrap());
        assert!(matches!(
            p.complete(&ChatRequest::new("bad", "s", "u")),
            Err(BackendError::Fixture(_))
        ));
    }

    #[test]
    fn loads_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let req = ChatRequest::new("t", "s", "u");
        std::fs::write(dir.path().join("t.txt"), "coarse\n").unwrap();
        std::fs::create_dir(dir.path().join("t")).unwrap();
        std::fs::write(
            dir.path()
                .join("t")
                .join(format!("{}.txt", req.prompt_hash())),
            "strict\r\n",
        )
        .unwrap();
        let p = ScriptedProvider::from_dir(dir.path()).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.complete(&req).unwrap(), "strict");
        assert_eq!(
            p.complete(&ChatRequest::new("t", "s", "v")).unwrap(),
            "coarse"
        );
    }
}
