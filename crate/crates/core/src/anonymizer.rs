//! Identifier-handling regimes over snippet values.
//!
//! * OOV anonymization: each distinct out-of-vocabulary value of a snippet
//!   is renamed to its own placeholder `var<k>`, with the placeholder
//!   indices drawn as a random injection into `1..=M`.
//! * Full anonymization: the same with an empty vocabulary.
//! * UNK replacement: every out-of-vocabulary value becomes `UNK`.
//!
//! Values are escaped before vocabulary lookup (see [`crate::reserved`]),
//! and [`deanonymize`] restores the original snippet exactly.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::corpus::Snippet;
use crate::error::{Error, Result};
use crate::reserved::{self, escape, unescape, UNK};
use crate::rng::Prng;
use crate::vocab::Vocabulary;

pub const DEFAULT_BUDGET: u32 = 1000;
pub const COMPLETION_BUDGET: u32 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    OovAnon,
    FullAnon,
    Unk,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::OovAnon => "oov-anon",
            Regime::FullAnon => "full-anon",
            Regime::Unk => "unk",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "oov-anon" | "oov" => Ok(Regime::OovAnon),
            "full-anon" | "full" => Ok(Regime::FullAnon),
            "unk" => Ok(Regime::Unk),
            other => Err(format!("unknown regime `{other}`")),
        }
    }
}

/// How placeholder indices are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Global seed; each snippet draws from the stream keyed by its id.
    Seeded(u64),
    /// Placeholders `1, 2, ..` in first-occurrence order.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnonymizationMap {
    pairs: Vec<(String, u32)>,
    budget: u32,
}

impl AnonymizationMap {
    pub fn new(pairs: Vec<(String, u32)>, budget: u32) -> Result<Self> {
        let mut originals = HashSet::new();
        let mut indices = HashSet::new();
        for (original, index) in &pairs {
            if !(1..=budget).contains(index) {
                return Err(Error::Invalid(format!(
                    "placeholder index {index} outside 1..={budget}"
                )));
            }
            if !originals.insert(original.as_str()) || !indices.insert(*index) {
                return Err(Error::Invalid(format!(
                    "map is not injective at `{original}` -> {index}"
                )));
            }
        }
        Ok(AnonymizationMap { pairs, budget })
    }

    /// `(original value, placeholder index)` in first-occurrence order.
    pub fn pairs(&self) -> &[(String, u32)] {
        &self.pairs
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn placeholder_of(&self, original: &str) -> Option<u32> {
        self.pairs
            .iter()
            .find(|(o, _)| o == original)
            .map(|(_, k)| *k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnonymizedSnippet {
    pub snippet: Snippet,
    pub map: AnonymizationMap,
    pub regime: Regime,
}

/// Unique out-of-vocabulary values in first-occurrence order (unescaped).
pub fn collect_oov(snippet: &Snippet, vocab: &Vocabulary) -> Vec<String> {
    let mut seen = HashSet::new();
    snippet
        .values()
        .filter(|v| !vocab.contains(&escape(v)))
        .filter(|v| seen.insert(*v))
        .map(str::to_string)
        .collect()
}

/// `k` distinct placeholder indices from `1..=budget`.
///
/// Seeded mode returns the first `k` entries of a Fisher–Yates permutation
/// of `1..=budget` driven by `Prng::from_seed(seed)`. Only the touched
/// slots are materialized, so the cost is O(k) rather than O(budget).
pub fn sample_injection(k: usize, budget: u32, sampling: Sampling) -> Result<Vec<u32>> {
    if k > budget as usize {
        return Err(Error::Capacity { needed: k, budget });
    }
    match sampling {
        Sampling::Deterministic => Ok((1..=k as u32).collect()),
        Sampling::Seeded(seed) => {
            let mut rng = Prng::from_seed(seed);
            let mut swapped: HashMap<u32, u32> = HashMap::with_capacity(2 * k);
            let mut out = Vec::with_capacity(k);
            for i in 0..k as u32 {
                let j = i + rng.below(u64::from(budget - i)) as u32;
                let at_j = swapped.get(&j).copied().unwrap_or(j + 1);
                let at_i = swapped.get(&i).copied().unwrap_or(i + 1);
                swapped.insert(j, at_i);
                out.push(at_j);
            }
            Ok(out)
        }
    }
}

fn snippet_sampling(snippet: &Snippet, sampling: Sampling) -> Sampling {
    match sampling {
        Sampling::Seeded(global) => Sampling::Seeded(crate::rng::derive_seed(global, &snippet.id)),
        Sampling::Deterministic => Sampling::Deterministic,
    }
}

pub fn anonymize_oov(
    snippet: &Snippet,
    vocab: &Vocabulary,
    budget: u32,
    sampling: Sampling,
) -> Result<AnonymizedSnippet> {
    anonymize_with(snippet, vocab, budget, sampling, Regime::OovAnon)
}

pub fn anonymize_all(snippet: &Snippet, budget: u32, sampling: Sampling) -> Result<AnonymizedSnippet> {
    anonymize_with(snippet, &Vocabulary::empty(), budget, sampling, Regime::FullAnon)
}

fn anonymize_with(
    snippet: &Snippet,
    vocab: &Vocabulary,
    budget: u32,
    sampling: Sampling,
    regime: Regime,
) -> Result<AnonymizedSnippet> {
    let oov = collect_oov(snippet, vocab);
    let indices = sample_injection(oov.len(), budget, snippet_sampling(snippet, sampling))?;
    let rename: HashMap<&str, String> = oov
        .iter()
        .zip(&indices)
        .map(|(o, &k)| (o.as_str(), reserved::placeholder(k)))
        .collect();

    let mut out = snippet.clone();
    for node in &mut out.nodes {
        if let Some(value) = node.value.as_mut() {
            *value = match rename.get(value.as_str()) {
                Some(name) => name.clone(),
                None => escape(value).into_owned(),
            };
        }
    }
    let map = AnonymizationMap {
        pairs: oov.into_iter().zip(indices).collect(),
        budget,
    };
    Ok(AnonymizedSnippet {
        snippet: out,
        map,
        regime,
    })
}

pub fn replace_unk(snippet: &Snippet, vocab: &Vocabulary) -> AnonymizedSnippet {
    let mut out = snippet.clone();
    for node in &mut out.nodes {
        if let Some(value) = node.value.as_mut() {
            let escaped = escape(value);
            *value = if vocab.contains(&escaped) {
                escaped.into_owned()
            } else {
                UNK.to_string()
            };
        }
    }
    AnonymizedSnippet {
        snippet: out,
        map: AnonymizationMap::default(),
        regime: Regime::Unk,
    }
}

/// Applies a regime, or with `None` only escapes reserved-looking values.
pub fn apply_regime(
    snippet: &Snippet,
    regime: Option<Regime>,
    vocab: &Vocabulary,
    budget: u32,
    sampling: Sampling,
) -> Result<(Snippet, AnonymizationMap)> {
    let anon = match regime {
        Some(Regime::OovAnon) => anonymize_oov(snippet, vocab, budget, sampling)?,
        Some(Regime::FullAnon) => anonymize_all(snippet, budget, sampling)?,
        Some(Regime::Unk) => replace_unk(snippet, vocab),
        None => {
            let mut out = snippet.clone();
            for value in out.nodes.iter_mut().filter_map(|n| n.value.as_mut()) {
                if let std::borrow::Cow::Owned(escaped) = escape(value) {
                    *value = escaped;
                }
            }
            return Ok((out, AnonymizationMap::default()));
        }
    };
    Ok((anon.snippet, anon.map))
}

pub fn deanonymize(anon: &AnonymizedSnippet) -> Result<Snippet> {
    if anon.regime == Regime::Unk {
        return Err(Error::NotInvertible);
    }
    let inverse: HashMap<u32, &str> = anon
        .map
        .pairs
        .iter()
        .map(|(o, k)| (*k, o.as_str()))
        .collect();
    let mut out = anon.snippet.clone();
    for node in &mut out.nodes {
        if let Some(value) = node.value.as_mut() {
            *value = match reserved::parse_placeholder(value) {
                Some(k) => inverse
                    .get(&k)
                    .ok_or_else(|| Error::CorruptMap(value.clone()))?
                    .to_string(),
                None => unescape(value).into_owned(),
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Node;
    use crate::vocab::{build_vocabulary, FrequencyTable};

    fn vocab(values: &[&str]) -> Vocabulary {
        let freq: FrequencyTable = values.iter().map(|v| (v.to_string(), 10)).collect();
        build_vocabulary(&freq, values.len())
    }

    fn snippet(values: &[&str]) -> Snippet {
        let mut nodes = vec![Node::structural("Module")];
        nodes.extend(values.iter().map(|v| Node::valued("NameLoad", v)));
        Snippet::new("t:1", nodes)
    }

    fn vals(s: &Snippet) -> Vec<&str> {
        s.values().collect()
    }

    #[test]
    fn collect_oov_first_occurrence() {
        let s = snippet(&["my_y", "np", "sin", "my_x", "my_x"]);
        assert_eq!(collect_oov(&s, &vocab(&["np", "sin"])), vec!["my_y", "my_x"]);
        assert!(collect_oov(&s, &vocab(&["my_y", "np", "sin", "my_x"])).is_empty());
        assert_eq!(
            collect_oov(&s, &Vocabulary::empty()),
            vec!["my_y", "np", "sin", "my_x"]
        );
    }

    #[test]
    fn injection_edges() {
        assert!(sample_injection(0, 10, Sampling::Seeded(1)).unwrap().is_empty());
        assert_eq!(sample_injection(3, 10, Sampling::Deterministic).unwrap(), vec![1, 2, 3]);
        assert!(matches!(
            sample_injection(11, 10, Sampling::Seeded(1)),
            Err(Error::Capacity { needed: 11, budget: 10 })
        ));
        assert_eq!(
            sample_injection(5, 50, Sampling::Seeded(9)).unwrap(),
            sample_injection(5, 50, Sampling::Seeded(9)).unwrap()
        );
    }

    #[test]
    fn full_draw_is_permutation() {
        for seed in 0..20 {
            let mut draw = sample_injection(40, 40, Sampling::Seeded(seed)).unwrap();
            draw.sort_unstable();
            assert_eq!(draw, (1..=40).collect::<Vec<_>>());
        }
    }

    #[test]
    fn partial_draw_is_prefix_of_dense_fisher_yates() {
        // Dense oracle: materialize 1..=M and swap forward with the same stream.
        for seed in 0..50u64 {
            let budget = 30u32;
            let mut rng = Prng::from_seed(seed);
            let mut dense: Vec<u32> = (1..=budget).collect();
            for i in 0..budget as usize {
                let j = i + rng.below((budget as usize - i) as u64) as usize;
                dense.swap(i, j);
            }
            let sparse = sample_injection(budget as usize, budget, Sampling::Seeded(seed)).unwrap();
            assert_eq!(sparse, dense);
            let short = sample_injection(7, budget, Sampling::Seeded(seed)).unwrap();
            assert_eq!(short, dense[..7]);
        }
    }

    #[test]
    fn slot_frequencies_are_uniform() {
        let budget = 8u32;
        let draws = 100_000u64;
        let mut counts = vec![vec![0u64; budget as usize]; budget as usize];
        for seed in 0..draws {
            let perm = sample_injection(budget as usize, budget, Sampling::Seeded(seed)).unwrap();
            for (slot, &index) in perm.iter().enumerate() {
                counts[slot][index as usize - 1] += 1;
            }
        }
        let p = 1.0 / f64::from(budget);
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for row in &counts {
            for &c in row {
                assert!((c as f64 - mean).abs() <= 5.0 * sd, "count {c} vs {mean}±{sd}");
            }
        }
    }

    #[test]
    fn worked_example_deterministic() {
        let s = snippet(&["my_y", "np", "sin", "my_x", "my_x"]);
        let v = vocab(&["np", "sin"]);
        let oov = anonymize_oov(&s, &v, DEFAULT_BUDGET, Sampling::Deterministic).unwrap();
        assert_eq!(vals(&oov.snippet), vec!["var1", "np", "sin", "var2", "var2"]);
        assert_eq!(
            oov.map.pairs(),
            &[("my_y".to_string(), 1), ("my_x".to_string(), 2)]
        );
        let full = anonymize_all(&s, DEFAULT_BUDGET, Sampling::Deterministic).unwrap();
        assert_eq!(vals(&full.snippet), vec!["var1", "var2", "var3", "var4", "var4"]);
        let unk = replace_unk(&s, &v);
        assert_eq!(vals(&unk.snippet), vec!["UNK", "np", "sin", "UNK", "UNK"]);
        assert!(unk.map.is_empty());
    }

    #[test]
    fn worked_example_seeded_pattern() {
        let s = snippet(&["my_y", "np", "sin", "my_x", "my_x"]);
        let v = vocab(&["np", "sin"]);
        let a = anonymize_oov(&s, &v, DEFAULT_BUDGET, Sampling::Seeded(42)).unwrap();
        let got = vals(&a.snippet);
        assert_eq!(&got[1..3], &["np", "sin"]);
        assert_ne!(got[0], got[3]);
        assert_eq!(got[3], got[4]);
        assert!(got.iter().all(|v| reserved::parse_placeholder(v).is_some() || *v == "np" || *v == "sin"));
        assert_eq!(a, anonymize_oov(&s, &v, DEFAULT_BUDGET, Sampling::Seeded(42)).unwrap());
    }

    #[test]
    fn no_oov_is_identity() {
        let s = snippet(&["np", "sin"]);
        let a = anonymize_oov(&s, &vocab(&["np", "sin"]), 10, Sampling::Seeded(3)).unwrap();
        assert_eq!(a.snippet, s);
        assert!(a.map.is_empty());
        assert_eq!(replace_unk(&s, &vocab(&["np", "sin"])).snippet, s);
    }

    #[test]
    fn repeated_value_shares_placeholder() {
        let s = snippet(&["q", "q", "q"]);
        let a = anonymize_all(&s, 10, Sampling::Seeded(8)).unwrap();
        let got = vals(&a.snippet);
        assert!(got.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(a.map.pairs().len(), 1);
    }

    #[test]
    fn empty_vocab_unk_replaces_everything() {
        let s = snippet(&["a", "b"]);
        assert_eq!(vals(&replace_unk(&s, &Vocabulary::empty()).snippet), vec!["UNK", "UNK"]);
    }

    #[test]
    fn capacity_error_propagates() {
        let s = snippet(&["a", "b", "c"]);
        assert!(matches!(
            anonymize_all(&s, 2, Sampling::Deterministic),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn colliding_corpus_values_survive() {
        let s = snippet(&["var1", "x", "UNK", "var1", "np"]);
        let v = vocab(&["np", "var1\u{200B}_orig"]);
        let a = anonymize_oov(&s, &v, 10, Sampling::Deterministic).unwrap();
        assert_eq!(vals(&a.snippet), vec!["var1\u{200B}_orig", "var1", "var2", "var1\u{200B}_orig", "np"]);
        assert_eq!(deanonymize(&a).unwrap(), s);
        let unk = replace_unk(&s, &v);
        assert_eq!(vals(&unk.snippet), vec!["var1\u{200B}_orig", "UNK", "UNK", "var1\u{200B}_orig", "np"]);
    }

    #[test]
    fn deanonymize_errors() {
        let s = snippet(&["a"]);
        assert!(matches!(deanonymize(&replace_unk(&s, &Vocabulary::empty())), Err(Error::NotInvertible)));
        let mut a = anonymize_all(&s, 10, Sampling::Deterministic).unwrap();
        a.snippet.nodes[1].value = Some("var9".into());
        assert!(matches!(deanonymize(&a), Err(Error::CorruptMap(_))));
        let plain = anonymize_all(&Snippet::new("m", vec![Node::structural("Module")]), 10, Sampling::Seeded(0)).unwrap();
        assert_eq!(deanonymize(&plain).unwrap().nodes, vec![Node::structural("Module")]);
    }

    #[test]
    fn map_validation() {
        assert!(AnonymizationMap::new(vec![("a".into(), 1), ("b".into(), 1)], 5).is_err());
        assert!(AnonymizationMap::new(vec![("a".into(), 6)], 5).is_err());
        assert!(AnonymizationMap::new(vec![("a".into(), 5), ("b".into(), 1)], 5).is_ok());
    }
}
