//! Expert pool, embedding-based ranking and five-member panel selection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde_json::Value;
use thiserror::Error;

use crate::backend::{
    cosine_similarity, short_hash, BackendError, EmbeddingProvider, EmbeddingVector,
    SimilarityError,
};
use crate::exec::fan_out;
use crate::model::{AgentId, ExpertAxis, ExpertProfile, SituationReport};
use crate::structured::{extract_json_object, get_str, AgentContext, AgentError, CallRecord};

pub const POOL_SIZE: usize = 50;
pub const DOMAIN_FIELDS: usize = 8;
pub const PER_FIELD: usize = 5;
pub const STANCE_AGENTS: usize = 10;
pub const PANEL_SIZE: usize = 5;
pub const PAIR_SEPARATOR: &str = "\n---\n";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("reading pool: {0}")]
    Io(String),
    #[error("{file}: {message}")]
    Parse { file: String, message: String },
    #[error("pool must hold {expected} profiles, found {found}")]
    Count { expected: usize, found: usize },
    #[error("duplicate agent id `{0}`")]
    DuplicateId(AgentId),
    #[error("pool distribution violated: {0}")]
    Distribution(String),
}

/// Directory of the 50-agent pool shipped with the crate.
pub fn shipped_pool_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("pool")
}

/// Immutable set of expert profiles, ordered by agent id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpertPool {
    profiles: Vec<ExpertProfile>,
}

impl ExpertPool {
    /// Load the standard 50-agent pool: 8 domain fields with 5 agents each
    /// plus 10 perspective/stance agents. One `<id>.toml` per profile.
    pub fn load(dir: &Path) -> Result<Self, PoolError> {
        let pool = Self::load_any(dir)?;
        pool.check_standard()?;
        Ok(pool)
    }

    /// Load a pool of any size of at least [`PANEL_SIZE`].
    pub fn load_any(dir: &Path) -> Result<Self, PoolError> {
        let mut files: Vec<_> = fs::read_dir(dir)
            .map_err(|e| PoolError::Io(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        let mut profiles = Vec::with_capacity(files.len());
        for path in files {
            let text = fs::read_to_string(&path)
                .map_err(|e| PoolError::Io(format!("{}: {e}", path.display())))?;
            let profile = ExpertProfile::from_toml(&text).map_err(|message| PoolError::Parse {
                file: path.display().to_string(),
                message,
            })?;
            profiles.push(profile);
        }
        Self::custom(profiles)
    }

    pub fn custom(mut profiles: Vec<ExpertProfile>) -> Result<Self, PoolError> {
        if profiles.len() < PANEL_SIZE {
            return Err(PoolError::Count {
                expected: PANEL_SIZE,
                found: profiles.len(),
            });
        }
        profiles.sort_by(|a, b| a.id.cmp(&b.id));
        for w in profiles.windows(2) {
            if w[0].id == w[1].id {
                return Err(PoolError::DuplicateId(w[0].id.clone()));
            }
        }
        for p in &profiles {
            p.validate().map_err(|e| PoolError::Parse {
                file: p.id.to_string(),
                message: e.to_string(),
            })?;
        }
        Ok(Self { profiles })
    }

    pub fn standard(profiles: Vec<ExpertProfile>) -> Result<Self, PoolError> {
        let pool = Self::custom(profiles)?;
        pool.check_standard()?;
        Ok(pool)
    }

    fn check_standard(&self) -> Result<(), PoolError> {
        if self.profiles.len() != POOL_SIZE {
            return Err(PoolError::Count {
                expected: POOL_SIZE,
                found: self.profiles.len(),
            });
        }
        let mut per_field: BTreeMap<&str, usize> = BTreeMap::new();
        let mut stance = 0;
        for p in &self.profiles {
            match p.axis {
                ExpertAxis::DomainExpertise => *per_field.entry(p.field.as_str()).or_default() += 1,
                ExpertAxis::PerspectiveStance => stance += 1,
            }
        }
        if stance != STANCE_AGENTS {
            return Err(PoolError::Distribution(format!(
                "expected {STANCE_AGENTS} perspective/stance agents, found {stance}"
            )));
        }
        if per_field.len() != DOMAIN_FIELDS || per_field.values().any(|&n| n != PER_FIELD) {
            return Err(PoolError::Distribution(format!(
                "expected {DOMAIN_FIELDS} domain fields with {PER_FIELD} agents each, found {per_field:?}"
            )));
        }
        Ok(())
    }

    pub fn profiles(&self) -> &[ExpertProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn get(&self, id: &AgentId) -> Option<&ExpertProfile> {
        self.profiles
            .binary_search_by(|p| p.id.cmp(id))
            .ok()
            .map(|i| &self.profiles[i])
    }
}

/// How the child/adult report pair becomes one embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairEmbedding {
    /// Embed `child + "\n---\n" + adult`.
    #[default]
    Concat,
    /// Average the two report embeddings.
    Mean,
}

/// Text embedded for the report pair in [`PairEmbedding::Concat`] mode.
pub fn pair_text(r_child: &SituationReport, r_adult: &SituationReport) -> String {
    format!("{}{PAIR_SEPARATOR}{}", r_child.render(), r_adult.render())
}

/// Background embeddings keyed by (provider id, profile hash). Shared across
/// scenarios of one run.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    entries: Mutex<HashMap<(String, String), EmbeddingVector>>,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_embed(
        &self,
        embedder: &dyn EmbeddingProvider,
        text: &str,
    ) -> Result<EmbeddingVector, BackendError> {
        let key = (embedder.id(), short_hash(text.as_bytes()));
        if let Some(v) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = embedder.embed(text)?;
        self.entries
            .lock()
            .expect("cache lock")
            .insert(key, v.clone());
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankingError {
    #[error("embedding failed: {0}")]
    Embedding(#[from] BackendError),
    #[error("similarity failed: {0}")]
    Similarity(#[from] SimilarityError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub agent_id: AgentId,
    pub similarity: f64,
}

/// Pool sorted by similarity, descending; exact ties by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPool {
    entries: Vec<RankedEntry>,
}

impl RankedPool {
    pub fn from_scores(mut entries: Vec<RankedEntry>) -> Self {
        entries.sort_by(|a, b| {
            b.similarity
                .total_cmp(&a.similarity)
                .then_with(|| a.agent_id.cmp(&b.agent_id))
        });
        Self { entries }
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of `id`.
    pub fn rank_of(&self, id: &AgentId) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| &e.agent_id == id)
            .map(|i| i + 1)
    }

    /// First rank of the lower half: `ceil(n/2) + 1` (26 for a 50-agent pool).
    pub fn lower_half_start(&self) -> usize {
        self.entries.len().div_ceil(2) + 1
    }

    pub fn in_lower_half(&self, rank: usize) -> bool {
        rank >= self.lower_half_start() && rank <= self.entries.len()
    }

    /// CSV dump `rank,agent_id,similarity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,agent_id,similarity\n");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, e.agent_id, e.similarity);
        }
        out
    }
}

/// Rank every pool member by cosine similarity between its background
/// embedding and the report-pair embedding.
pub fn rank_pool(
    pool: &ExpertPool,
    r_child: &SituationReport,
    r_adult: &SituationReport,
    embedder: &dyn EmbeddingProvider,
    mode: PairEmbedding,
    cache: &EmbeddingCache,
    concurrency: usize,
) -> Result<RankedPool, RankingError> {
    let query = match mode {
        PairEmbedding::Concat => embedder.embed(&pair_text(r_child, r_adult))?,
        PairEmbedding::Mean => {
            let c = embedder.embed(&r_child.render())?;
            let a = embedder.embed(&r_adult.render())?;
            EmbeddingVector::mean(&c, &a)?
        }
    };
    let backgrounds = fan_out(concurrency, pool.profiles(), |_, p| {
        cache.get_or_embed(embedder, &p.background)
    });
    let mut entries = Vec::with_capacity(pool.len());
    for (profile, vector) in pool.profiles().iter().zip(backgrounds) {
        entries.push(RankedEntry {
            agent_id: profile.id.clone(),
            similarity: cosine_similarity(&vector?, &query)?,
        });
    }
    Ok(RankedPool::from_scores(entries))
}

/// Selected panel: ranks 1–3 plus two diversity picks from the lower half.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExpertPanel {
    pub top_three: [AgentId; 3],
    pub diversity_picks: [AgentId; 2],
    /// 1-based ranks of the diversity picks, ascending.
    pub pick_ranks: [usize; 2],
    pub rationale: String,
    /// True when the picks came from the lowest-two fallback.
    pub fallback: bool,
}

impl ExpertPanel {
    /// Members in panel order: top three by rank, then picks by rank.
    pub fn members(&self) -> Vec<AgentId> {
        self.top_three
            .iter()
            .chain(self.diversity_picks.iter())
            .cloned()
            .collect()
    }
}

fn describe_profile(p: &ExpertProfile) -> String {
    format!(
        "{} [{}] {} ({}): {}",
        p.id,
        axis_label(p.axis),
        p.name,
        p.field,
        p.background
    )
}

fn axis_label(axis: ExpertAxis) -> &'static str {
    match axis {
        ExpertAxis::DomainExpertise => "domain",
        ExpertAxis::PerspectiveStance => "stance",
    }
}

fn parse_picks(raw: &str, ranked: &RankedPool) -> Result<([usize; 2], String), String> {
    let obj = extract_json_object(raw)?;
    let picks = match obj.get("picks") {
        Some(Value::Array(a)) => a,
        _ => return Err("field `picks` must be an array of two ranks or ids".into()),
    };
    if picks.len() != 2 {
        return Err(format!("exactly two picks required, got {}", picks.len()));
    }
    let mut ranks = [0usize; 2];
    for (slot, pick) in ranks.iter_mut().zip(picks) {
        let rank = match pick {
            Value::Number(n) => n
                .as_u64()
                .map(|r| r as usize)
                .ok_or_else(|| format!("pick `{n}` is not a rank"))?,
            Value::String(s) => match s.trim().trim_start_matches('#').parse::<usize>() {
                Ok(r) => r,
                Err(_) => ranked
                    .rank_of(&AgentId::new(s.trim()))
                    .ok_or_else(|| format!("pick `{s}` is not in the pool"))?,
            },
            other => return Err(format!("pick `{other}` is neither a rank nor an id")),
        };
        if !ranked.in_lower_half(rank) {
            return Err(format!(
                "pick rank {rank} is outside the lower half (ranks {}-{})",
                ranked.lower_half_start(),
                ranked.len()
            ));
        }
        *slot = rank;
    }
    if ranks[0] == ranks[1] {
        return Err("the two picks must be different agents".into());
    }
    ranks.sort_unstable();
    let rationale = get_str(&obj, "rationale").unwrap_or("").trim().to_string();
    Ok((ranks, rationale))
}

/// Fix ranks 1–3 and ask the model for two diversity picks from the lower
/// half of the ranking. Invalid picks get one repair re-ask, then fall back
/// to the two lowest-ranked agents. Transport failures propagate.
pub fn select_panel(
    ctx: &AgentContext<'_>,
    pool: &ExpertPool,
    ranked: &RankedPool,
    r_child: &SituationReport,
    r_adult: &SituationReport,
) -> Result<(ExpertPanel, Vec<CallRecord>), AgentError> {
    let n = ranked.len();
    assert!(n >= PANEL_SIZE, "ranked pool smaller than a panel");
    let entries = ranked.entries();
    let profile = |id: &AgentId| pool.get(id).expect("ranked ids come from the pool");

    let top_three: Vec<String> = entries[..3]
        .iter()
        .enumerate()
        .map(|(i, e)| format!("#{} {}", i + 1, describe_profile(profile(&e.agent_id))))
        .collect();
    let lower = ranked.lower_half_start();
    let candidates: Vec<String> = entries[lower - 1..]
        .iter()
        .enumerate()
        .map(|(i, e)| format!("#{} {}", lower + i, describe_profile(profile(&e.agent_id))))
        .collect();

    let mut vars = BTreeMap::new();
    vars.insert("report_pair", pair_text(r_child, r_adult));
    vars.insert("top_three", top_three.join("\n"));
    vars.insert("candidates", candidates.join("\n"));
    let req = ctx
        .request("select_panel", &vars)?
        .with_context("scenario_id", r_child.scenario_id())
        .with_context("lower_start", lower)
        .with_context("pool_size", n);

    let top: [AgentId; 3] = std::array::from_fn(|i| entries[i].agent_id.clone());
    let (pick_ranks, rationale, fallback, calls) =
        match ctx.ask_with_repairs(req, 1, |raw| parse_picks(raw, ranked)) {
            Ok(out) => (out.parsed.0, out.parsed.1, false, out.calls),
            Err(AgentError::Invalid {
                violation, calls, ..
            }) => {
                log::warn!(
                "{}: diversity picks invalid after repair ({violation}); using ranks {} and {n}",
                r_child.scenario_id(),
                n - 1
            );
                (
                    [n - 1, n],
                    format!("fallback to the two lowest-ranked agents: {violation}"),
                    true,
                    calls,
                )
            }
            Err(e) => return Err(e),
        };
    let picks: [AgentId; 2] = std::array::from_fn(|i| entries[pick_ranks[i] - 1].agent_id.clone());
    let panel = ExpertPanel {
        top_three: top,
        diversity_picks: picks,
        pick_ranks,
        rationale,
        fallback,
    };
    debug_assert_eq!(
        panel.members().iter().collect::<BTreeSet<_>>().len(),
        PANEL_SIZE
    );
    Ok((panel, calls))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{FnProvider, HashEmbedder};
    use crate::model::{
        AttributeReport, BiasReport, DetectionSource, SuppressionCategory, SuppressionReport,
    };
    use crate::model::{Audience, Gender};
    use crate::prompts::PromptSet;

    fn profile(id: &str, axis: ExpertAxis, field: &str, background: &str) -> ExpertProfile {
        ExpertProfile {
            id: AgentId::new(id),
            name: format!("Expert {id}"),
            axis,
            field: field.into(),
            background: background.into(),
        }
    }

    fn standard_profiles() -> Vec<ExpertProfile> {
        let mut v = Vec::new();
        for f in 0..8 {
            for k in 0..5 {
                v.push(profile(
                    &format!("d{f}{k}"),
                    ExpertAxis::DomainExpertise,
                    &format!("field{f}"),
                    &format!("domain background {f}-{k}"),
                ));
            }
        }
        for k in 0..10 {
            v.push(profile(
                &format!("s{k:02}"),
                ExpertAxis::PerspectiveStance,
                "stance",
                &format!("stance {k}"),
            ));
        }
        v
    }

    pub(crate) fn reports() -> (SituationReport, SituationReport) {
        let attrs = AttributeReport::new(Gender::Female, 11, "only child").unwrap();
        let sup = SuppressionReport::new(3, SuppressionCategory::Social, "r", 0.8).unwrap();
        let bias = BiasReport::new("comparison with a cousin", 0.7).unwrap();
        (
            SituationReport::new(
                Audience::Child,
                "s",
                "child summary",
                DetectionSource::Suppression(sup),
                attrs.clone(),
            )
            .unwrap(),
            SituationReport::new(
                Audience::Adult,
                "s",
                "adult summary",
                DetectionSource::Bias(bias),
                attrs,
            )
            .unwrap(),
        )
    }

    #[test]
    fn standard_structure_enforced() {
        assert_eq!(ExpertPool::standard(standard_profiles()).unwrap().len(), 50);
        let mut short = standard_profiles();
        short.pop();
        assert_eq!(
            ExpertPool::standard(short),
            Err(PoolError::Count {
                expected: 50,
                found: 49
            })
        );
        let mut dup = standard_profiles();
        dup[1].id = dup[0].id.clone();
        assert!(matches!(
            ExpertPool::standard(dup),
            Err(PoolError::DuplicateId(_))
        ));
        let mut skew = standard_profiles();
        skew[0].field = "field1".into();
        assert!(matches!(
            ExpertPool::standard(skew),
            Err(PoolError::Distribution(_))
        ));
    }

    #[test]
    fn shipped_pool_loads() {
        let pool = ExpertPool::load(&shipped_pool_dir()).unwrap();
        let stance = pool
            .profiles()
            .iter()
            .filter(|p| p.axis == ExpertAxis::PerspectiveStance)
            .count();
        assert_eq!((pool.len(), stance), (50, 10));
    }

    #[test]
    fn directory_with_49_profiles_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for entry in fs::read_dir(shipped_pool_dir()).unwrap().skip(1) {
            let path = entry.unwrap().path();
            fs::copy(&path, dir.path().join(path.file_name().unwrap())).unwrap();
        }
        assert!(matches!(
            ExpertPool::load(dir.path()),
            Err(PoolError::Count { found: 49, .. })
        ));
    }

    #[test]
    fn lower_half_boundaries() {
        let ranked = |n: usize| {
            RankedPool::from_scores(
                (0..n)
                    .map(|i| RankedEntry {
                        agent_id: AgentId::new(format!("a{i:02}")),
                        similarity: -(i as f64),
                    })
                    .collect(),
            )
        };
        assert_eq!(ranked(50).lower_half_start(), 26);
        assert!(!ranked(50).in_lower_half(25));
        assert!(ranked(50).in_lower_half(50));
        assert!(!ranked(50).in_lower_half(51));
        assert_eq!(ranked(5).lower_half_start(), 4);
        assert_eq!(ranked(7).lower_half_start(), 5);
    }

    #[test]
    fn identical_backgrounds_tie_break_by_id() {
        let mut profiles = standard_profiles();
        profiles[10].background = "same text".into();
        profiles[3].background = "same text".into();
        let pool = ExpertPool::standard(profiles).unwrap();
        let (c, a) = reports();
        let r = rank_pool(
            &pool,
            &c,
            &a,
            &HashEmbedder::default(),
            PairEmbedding::Concat,
            &EmbeddingCache::new(),
            4,
        )
        .unwrap();
        let r3 = r.rank_of(&AgentId::new("d03")).unwrap();
        let r10 = r.rank_of(&AgentId::new("d20")).unwrap();
        assert_eq!(r10, r3 + 1);
    }

    #[test]
    fn exact_pair_text_ranks_first() {
        let (c, a) = reports();
        let mut profiles = standard_profiles();
        profiles[42].background = pair_text(&c, &a);
        let target = profiles[42].id.clone();
        let pool = ExpertPool::standard(profiles).unwrap();
        let r = rank_pool(
            &pool,
            &c,
            &a,
            &HashEmbedder::default(),
            PairEmbedding::Concat,
            &EmbeddingCache::new(),
            1,
        )
        .unwrap();
        assert_eq!(r.entries()[0].agent_id, target);
        assert!((r.entries()[0].similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_mode_and_cache() {
        let pool = ExpertPool::standard(standard_profiles()).unwrap();
        let (c, a) = reports();
        let cache = EmbeddingCache::new();
        let r = rank_pool(
            &pool,
            &c,
            &a,
            &HashEmbedder::default(),
            PairEmbedding::Mean,
            &cache,
            2,
        )
        .unwrap();
        assert_eq!(r.len(), 50);
        assert_eq!(cache.len(), 50);
        let again = rank_pool(
            &pool,
            &c,
            &a,
            &HashEmbedder::default(),
            PairEmbedding::Mean,
            &cache,
            2,
        )
        .unwrap();
        assert_eq!(r, again);
        assert_eq!(cache.len(), 50);
        assert!(r.to_csv().starts_with("rank,agent_id,similarity\n1,"));
    }

    fn panel_with(reply: &'static str) -> ExpertPanel {
        let pool = ExpertPool::standard(standard_profiles()).unwrap();
        let (c, a) = reports();
        let ranked = rank_pool(
            &pool,
            &c,
            &a,
            &HashEmbedder::default(),
            PairEmbedding::Concat,
            &EmbeddingCache::new(),
            1,
        )
        .unwrap();
        let provider = FnProvider::new(move |_| Ok(reply.to_string()));
        let prompts = PromptSet::english();
        let ctx = AgentContext::new(&provider, &prompts);
        let (panel, _) = select_panel(&ctx, &pool, &ranked, &c, &a).unwrap();
        let members = panel.members();
        assert_eq!(members.len(), 5);
        assert_eq!(members.iter().collect::<BTreeSet<_>>().len(), 5);
        for (i, id) in panel.top_three.iter().enumerate() {
            assert_eq!(ranked.rank_of(id), Some(i + 1));
        }
        for (id, rank) in panel.diversity_picks.iter().zip(panel.pick_ranks) {
            assert_eq!(ranked.rank_of(id), Some(rank));
            assert!(ranked.in_lower_half(rank));
        }
        panel
    }

    #[test]
    fn picks_by_rank() {
        let p = panel_with(r#"{"picks": [47, 30], "rationale": "contrasting views"}"#);
        assert_eq!(p.pick_ranks, [30, 47]);
        assert!(!p.fallback);
        assert_eq!(p.rationale, "contrasting views");
    }

    #[test]
    fn invalid_picks_fall_back_to_lowest_two() {
        assert_eq!(
            panel_with(r#"{"picks": [10, 30], "rationale": "x"}"#).pick_ranks,
            [49, 50]
        );
        assert!(panel_with(r#"{"picks": [30, 30]}"#).fallback);
        assert!(panel_with("I like everyone").fallback);
        assert!(panel_with(r#"{"picks": [26, 27, 28]}"#).fallback);
    }

    #[test]
    fn transport_failure_propagates() {
        let pool = ExpertPool::standard(standard_profiles()).unwrap();
        let (c, a) = reports();
        let ranked = rank_pool(
            &pool,
            &c,
            &a,
            &HashEmbedder::default(),
            PairEmbedding::Concat,
            &EmbeddingCache::new(),
            1,
        )
        .unwrap();
        let provider = FnProvider::new(|_| {
            Err(BackendError::Transport {
                attempts: 4,
                message: "down".into(),
            })
        });
        let prompts = PromptSet::english();
        let ctx = AgentContext::new(&provider, &prompts);
        assert!(select_panel(&ctx, &pool, &ranked, &c, &a)
            .unwrap_err()
            .is_backend());
    }
}
