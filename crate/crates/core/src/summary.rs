//! State summaries: compact text distilled from dialogue + tool history,
//! embedded into unit vectors so live states can be matched against the
//! summaries stored on graph edges.
//!
//! The default pipeline is fully deterministic and offline: a template
//! summarizer over structured tool results plus a seeded hashed
//! bag-of-tokens embedder. Remote providers plug in behind the same two
//! traits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Edge;
use crate::trajectory::{Event, EventKind};

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("empty history")]
    EmptyHistory,
    #[error("empty text")]
    EmptyText,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("provider error: {0}")]
    Provider(String),
}

/// Summary text plus its unit-norm embedding. This is both the payload
/// stored on edges and the live descriptor computed at inference time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDescriptor {
    pub text: String,
    pub embedding: Vec<f64>,
}

impl StateDescriptor {
    pub fn from_text(text: &str, embedder: &dyn Embedder) -> Result<Self, SummaryError> {
        Ok(StateDescriptor { text: text.to_string(), embedding: embedder.embed(text)? })
    }
}

/// Produces summary text from an event history.
pub trait SummaryProvider: Send + Sync {
    fn summarize(&self, history: &[Event]) -> Result<String, SummaryError>;
}

/// Maps text to a unit-norm vector of a fixed dimension.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, SummaryError>;
}

/// Embedder selection, serialized as part of the graph config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    HashedBow { dim: usize, seed: u64 },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::HashedBow { dim: 256, seed: 42 }
    }
}

impl EmbedderConfig {
    pub fn dimension(&self) -> usize {
        match self {
            EmbedderConfig::HashedBow { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Box<dyn Embedder> {
        match self {
            EmbedderConfig::HashedBow { dim, seed } => {
                Box::new(HashedBowEmbedder { dim: *dim, seed: *seed })
            }
        }
    }
}

/// Seeded hashed bag-of-tokens: lowercase, split on non-alphanumerics,
/// hash each token to one of `dim` buckets, count, L2-normalize.
pub struct HashedBowEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashedBowEmbedder {
    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(self.seed, token.as_bytes()) % self.dim as u64) as usize
    }
}

// FNV-1a with the seed folded into the offset basis. DefaultHasher is
// not stable across compiler releases; this is.
fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    const PRIME: u64 = 0x100000001b3;
    let mut h = 0xcbf29ce484222325u64 ^ seed.wrapping_mul(PRIME);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h
}

impl Embedder for HashedBowEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, SummaryError> {
        if text.is_empty() {
            return Err(SummaryError::EmptyText);
        }
        let mut counts = vec![0.0f64; self.dim];
        for token in tokenize(text) {
            counts[self.bucket(&token)] += 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(SummaryError::EmptyText);
        }
        for c in &mut counts {
            *c /= norm;
        }
        Ok(counts)
    }
}

/// Lowercased alphanumeric runs; `_`, `=`, punctuation and whitespace
/// all separate tokens.
pub(crate) fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// `key=value` pairs found in structured tool output. A fact is a
/// maximal `[A-Za-z0-9_=]` run containing exactly one `=` with non-empty
/// sides, lowercased.
pub(crate) fn extract_facts(text: &str) -> Vec<String> {
    let mut facts = Vec::new();
    for chunk in text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '=')) {
        let eqs = chunk.matches('=').count();
        if eqs != 1 {
            continue;
        }
        let (k, v) = chunk.split_once('=').unwrap();
        if !k.is_empty() && !v.is_empty() {
            facts.push(chunk.to_lowercase());
        }
    }
    facts
}

/// Filler words stripped from the symptoms line of stub summaries so
/// paraphrases of the same complaint produce the same text.
const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "at", "can", "could", "did", "do", "does", "for", "go", "goes",
    "hello", "hey", "hi", "how", "i", "if", "in", "is", "it", "just", "me", "my", "need", "of",
    "on", "or", "please", "really", "should", "show", "shows", "so", "still", "thank", "thanks",
    "that", "the", "there", "this", "through", "to", "today", "until", "very", "want", "was",
    "we", "went", "were", "what", "when", "with", "would", "you", "your",
];

fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Deterministic template summarizer: the latest user message stripped
/// of filler words becomes the symptoms line, and every `key=value`
/// fact seen in tool results (first occurrence kept) becomes the facts
/// line.
pub struct TemplateSummarizer;

impl SummaryProvider for TemplateSummarizer {
    fn summarize(&self, history: &[Event]) -> Result<String, SummaryError> {
        if history.is_empty() {
            return Err(SummaryError::EmptyHistory);
        }
        let symptoms = history
            .iter()
            .rev()
            .find(|e| e.kind == EventKind::UserMsg)
            .map(|e| {
                tokenize(&e.content)
                    .into_iter()
                    .filter(|t| !is_stopword(t))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default();
        let mut facts: Vec<String> = Vec::new();
        for ev in history {
            if ev.kind == EventKind::ToolResult {
                for fact in extract_facts(&ev.content) {
                    if !facts.contains(&fact) {
                        facts.push(fact);
                    }
                }
            }
        }
        let symptoms = if symptoms.is_empty() { "none".to_string() } else { symptoms };
        let facts = if facts.is_empty() { "none".to_string() } else { facts.join(", ") };
        Ok(format!("symptoms: {symptoms}; facts: {facts}"))
    }
}

/// Runs the provider over the history and embeds the result. Appending
/// the summary_call/summary_result pair to the episode log is the
/// caller's job.
pub fn summarize_state(
    history: &[Event],
    provider: &dyn SummaryProvider,
    embedder: &dyn Embedder,
) -> Result<StateDescriptor, SummaryError> {
    if history.is_empty() {
        return Err(SummaryError::EmptyHistory);
    }
    let text = provider.summarize(history)?;
    StateDescriptor::from_text(&text, embedder)
}

/// Dot product of two unit vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, SummaryError> {
    if a.len() != b.len() {
        return Err(SummaryError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Best similarity between the live state and any summary stored on the
/// edge. Edges with no summaries score negative infinity so they rank
/// below every scored edge.
pub fn edge_state_score(edge: &Edge, live: &StateDescriptor) -> Result<f64, SummaryError> {
    let mut best = f64::NEG_INFINITY;
    for stored in &edge.summaries {
        let score = cosine(&stored.embedding, &live.embedding)?;
        if score > best {
            best = score;
        }
    }
    Ok(best)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::trajectory::Event;

    fn embedder() -> HashedBowEmbedder {
        HashedBowEmbedder { dim: 256, seed: 42 }
    }

    #[test]
    fn stopword_table_is_sorted() {
        let mut sorted = STOPWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, STOPWORDS);
    }

    #[test]
    fn stub_template_on_structured_history() {
        let history = vec![
            Event::user("my data is slow"),
            Event::tool_call("get_setting", serde_json::Map::new()),
            Event::tool_result("get_setting", "roaming=on"),
        ];
        let text = TemplateSummarizer.summarize(&history).unwrap();
        assert_eq!(text, "symptoms: data slow; facts: roaming=on");
    }

    #[test]
    fn stub_is_deterministic_and_rejects_empty() {
        let history = vec![Event::user("hello there")];
        let a = TemplateSummarizer.summarize(&history).unwrap();
        let b = TemplateSummarizer.summarize(&history).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            TemplateSummarizer.summarize(&[]),
            Err(SummaryError::EmptyHistory)
        ));
    }

    #[test]
    fn stub_dedupes_facts_and_placeholders() {
        let history = vec![
            Event::tool_call("t", serde_json::Map::new()),
            Event::tool_result("t", "x=1 x=1 y=2"),
        ];
        let text = TemplateSummarizer.summarize(&history).unwrap();
        assert_eq!(text, "symptoms: none; facts: x=1, y=2");
    }

    #[test]
    fn summarize_state_produces_unit_descriptor() {
        let history = vec![Event::user("my data is slow")];
        let d = summarize_state(&history, &TemplateSummarizer, &embedder()).unwrap();
        let norm: f64 = d.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        let again = summarize_state(&history, &TemplateSummarizer, &embedder()).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn count_scaling_is_normalized_away() {
        let e = embedder();
        assert_eq!(e.embed("a a").unwrap(), e.embed("a").unwrap());
    }

    #[test]
    fn distinct_buckets_give_orthogonal_vectors() {
        let e = embedder();
        assert_ne!(e.bucket("alpha"), e.bucket("beta"), "collision under the fixed seed");
        let a = e.embed("alpha").unwrap();
        let b = e.embed("beta").unwrap();
        assert_eq!(cosine(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn embeddings_are_unit_norm() {
        let e = embedder();
        for text in ["x", "a few words here", "k1=v1 k2=v2", "Mixed CASE tokens"] {
            let v = e.embed(text).unwrap();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9, "{text}: {norm}");
        }
        assert!(matches!(e.embed(""), Err(SummaryError::EmptyText)));
        assert!(matches!(e.embed("!!!"), Err(SummaryError::EmptyText)));
    }

    #[test]
    fn cosine_identity_symmetry_mismatch() {
        let e = embedder();
        let v = e.embed("one two three").unwrap();
        let w = e.embed("two four").unwrap();
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(cosine(&v, &w).unwrap(), cosine(&w, &v).unwrap());
        assert!(matches!(
            cosine(&v, &[0.0; 8]),
            Err(SummaryError::DimensionMismatch(256, 8))
        ));
    }

    /// Three words with pairwise distinct buckets under the fixed seed,
    /// found by scanning a candidate pool.
    pub(crate) fn distinct_words() -> (&'static str, &'static str, &'static str) {
        let pool = [
            "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
        ];
        let e = embedder();
        for (i, a) in pool.iter().enumerate() {
            for (j, b) in pool.iter().enumerate().skip(i + 1) {
                for c in pool.iter().skip(j + 1) {
                    let (ba, bb, bc) = (e.bucket(a), e.bucket(b), e.bucket(c));
                    if ba != bb && bb != bc && ba != bc {
                        return (a, b, c);
                    }
                }
            }
        }
        panic!("no collision-free word triple in pool");
    }

    #[test]
    fn edge_score_takes_the_max_summary() {
        // live = (2,1,0) over three distinct buckets; stored summaries at
        // (2,0,1) and (0,1,2) give cosines 4/5 and 1/5 exactly.
        let (p, q, r) = distinct_words();
        let e = embedder();
        let live = StateDescriptor::from_text(&format!("{p} {p} {q}"), &e).unwrap();
        let high = StateDescriptor::from_text(&format!("{p} {p} {r}"), &e).unwrap();
        let low = StateDescriptor::from_text(&format!("{q} {r} {r}"), &e).unwrap();
        assert!((cosine(&high.embedding, &live.embedding).unwrap() - 0.8).abs() < 1e-9);
        assert!((cosine(&low.embedding, &live.embedding).unwrap() - 0.2).abs() < 1e-9);

        let edge = Edge::with_summaries("a", "b", vec![low, high]);
        assert!((edge_state_score(&edge, &live).unwrap() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn edge_without_summaries_scores_sentinel() {
        let e = embedder();
        let live = StateDescriptor::from_text("anything", &e).unwrap();
        let edge = Edge::with_summaries("a", "b", vec![]);
        assert_eq!(edge_state_score(&edge, &live).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn edge_score_matches_self_exactly() {
        let e = embedder();
        let s = StateDescriptor::from_text("symptoms: none; facts: k=1", &e).unwrap();
        let edge = Edge::with_summaries("a", "b", vec![s.clone()]);
        assert!((edge_state_score(&edge, &s).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fact_extraction_edge_cases() {
        assert_eq!(extract_facts("ok: plan=premium."), vec!["plan=premium"]);
        assert_eq!(extract_facts("a=b=c no_equals = x"), Vec::<String>::new());
        assert_eq!(extract_facts("Key=Value"), vec!["key=value"]);
    }
}
