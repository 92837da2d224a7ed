use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;

use crate::anonymizer::{apply_regime, Regime, Sampling};
use crate::corpus::{Corpus, Node, Snippet};
use crate::error::{Error, Result};
use crate::reserved::{escape, UNK};
use crate::rng::{derive_seed, Prng};
use crate::vocab::Vocabulary;

/// Bug pointer value for clean examples: slot 0 precedes the 1-based node
/// positions.
pub const NO_BUG: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractConfig {
    pub function_types: BTreeSet<String>,
    pub variable_types: BTreeSet<String>,
    pub max_nodes: usize,
    pub min_variable_positions: usize,
    pub min_distinct_variables: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect();
        ExtractConfig {
            function_types: set(&["FunctionDef", "AsyncFunctionDef"]),
            variable_types: set(&["NameLoad", "NameStore", "NameParam"]),
            max_nodes: 250,
            min_variable_positions: 3,
            min_distinct_variables: 3,
        }
    }
}

fn variable_positions<'a>(nodes: &'a [Node], variable_types: &'a BTreeSet<String>) -> impl Iterator<Item = usize> + 'a {
    nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.value.is_some() && variable_types.contains(&n.node_type))
        .map(|(i, _)| i)
}

/// Functions that are not nested in another function (methods included),
/// kept when they pass the length and variable-count filters.
///
/// Snippets parsed from trees are cut at their function subtrees. A snippet
/// without subtree sizes is taken whole when its root is a function node.
pub fn extract_functions(corpus: &Corpus, config: &ExtractConfig) -> Vec<Snippet> {
    let is_function = |n: &Node| config.function_types.contains(&n.node_type);
    let mut out = Vec::new();
    for snippet in &corpus.snippets {
        let mut candidates = Vec::new();
        match &snippet.subtree_sizes {
            Some(sizes) => {
                let mut i = 0;
                while i < snippet.nodes.len() {
                    if is_function(&snippet.nodes[i]) {
                        let end = i + sizes[i] as usize;
                        candidates.push((i, end));
                        i = end;
                    } else {
                        i += 1;
                    }
                }
            }
            None => {
                if snippet.nodes.first().is_some_and(is_function) {
                    candidates.push((0, snippet.nodes.len()));
                }
            }
        }
        for (start, end) in candidates {
            let nodes = &snippet.nodes[start..end];
            if nodes.len() > config.max_nodes {
                continue;
            }
            let positions: Vec<usize> = variable_positions(nodes, &config.variable_types).collect();
            let distinct: HashSet<&str> = positions.iter().filter_map(|&p| nodes[p].value()).collect();
            if positions.len() < config.min_variable_positions || distinct.len() < config.min_distinct_variables {
                continue;
            }
            out.push(Snippet {
                id: if start == 0 && end == snippet.nodes.len() && snippet.subtree_sizes.is_none() {
                    snippet.id.clone()
                } else {
                    format!("{}#{}", snippet.id, start + 1)
                },
                repository: snippet.repository.clone(),
                path: snippet.path.clone(),
                nodes: nodes.to_vec(),
                subtree_sizes: snippet.subtree_sizes.as_ref().map(|s| s[start..end].to_vec()),
            });
        }
    }
    out
}

/// One variable-misuse example. Positions are 1-based node positions;
/// `bug_location == NO_BUG` marks a clean example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarMisuseExample {
    pub example_id: String,
    pub function_id: String,
    pub nodes: Vec<Node>,
    pub is_buggy: bool,
    pub bug_location: u32,
    pub repair_positions: Vec<u32>,
    pub original_value: String,
}

impl VarMisuseExample {
    fn value_at(&self, position: u32) -> Option<&str> {
        position
            .checked_sub(1)
            .and_then(|i| self.nodes.get(i as usize))
            .and_then(Node::value)
    }

    /// Nodes with the original value written back at the bug location.
    pub fn restored_nodes(&self) -> Vec<Node> {
        let mut nodes = self.nodes.clone();
        if self.is_buggy {
            nodes[self.bug_location as usize - 1].value = Some(self.original_value.clone());
        }
        nodes
    }

    /// Checks the structural contract of an example as generated (before any
    /// identifier regime is applied).
    pub fn check(&self, variable_types: &BTreeSet<String>) -> std::result::Result<(), String> {
        if !self.is_buggy {
            if self.bug_location != NO_BUG || !self.repair_positions.is_empty() || !self.original_value.is_empty() {
                return Err("clean example carries bug fields".into());
            }
            return Ok(());
        }
        let bug = self.bug_location as usize;
        if bug == 0 || bug > self.nodes.len() {
            return Err(format!("bug location {bug} out of range"));
        }
        let node = &self.nodes[bug - 1];
        if !variable_types.contains(&node.node_type) || node.value.is_none() {
            return Err(format!("bug location {bug} is not a variable position"));
        }
        if node.value() == Some(self.original_value.as_str()) {
            return Err("bug location still holds the original value".into());
        }
        if self.repair_positions.is_empty() {
            return Err("buggy example without repair positions".into());
        }
        for &r in &self.repair_positions {
            if self.value_at(r) != Some(self.original_value.as_str()) {
                return Err(format!("repair position {r} does not hold the original value"));
            }
        }
        Ok(())
    }

    /// Rewrites values (and the original value, consistently) under a regime.
    /// `None` only escapes reserved-looking values.
    pub fn with_regime(
        &self,
        regime: Option<Regime>,
        vocab: &Vocabulary,
        budget: u32,
        sampling: Sampling,
    ) -> Result<Self> {
        let snippet = Snippet::new(self.example_id.clone(), self.nodes.clone());
        let (rewritten, map) = apply_regime(&snippet, regime, vocab, budget, sampling)?;
        let original_value = if self.original_value.is_empty() {
            String::new()
        } else if let Some(k) = map.placeholder_of(&self.original_value) {
            crate::reserved::placeholder(k)
        } else {
            let escaped = escape(&self.original_value).into_owned();
            match regime {
                Some(Regime::Unk) if !vocab.contains(&escaped) => UNK.to_string(),
                _ => escaped,
            }
        };
        Ok(VarMisuseExample {
            nodes: rewritten.nodes,
            original_value,
            ..self.clone()
        })
    }
}

/// Draws a bug position `p` and a donor position `q` uniformly over the
/// eligible pairs: both are variable positions, their values differ, and
/// the value at `p` also occurs at some other variable position (so the bug
/// stays repairable by copying).
pub fn inject_bug(function: &Snippet, variable_types: &BTreeSet<String>, seed: u64) -> Result<VarMisuseExample> {
    let nodes = &function.nodes;
    let positions: Vec<usize> = variable_positions(nodes, variable_types).collect();
    let value = |i: usize| nodes[i].value().expect("variable positions carry values");

    let mut pairs = Vec::new();
    for &p in &positions {
        let repairable = positions.iter().any(|&r| r != p && value(r) == value(p));
        if !repairable {
            continue;
        }
        for &q in &positions {
            if value(q) != value(p) {
                pairs.push((p, q));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoEligiblePair(function.id.clone()));
    }
    let (p, q) = pairs[Prng::from_seed(seed).below(pairs.len() as u64) as usize];

    let original_value = value(p).to_string();
    let repair_positions = positions
        .iter()
        .filter(|&&r| r != p && value(r) == original_value)
        .map(|&r| r as u32 + 1)
        .collect();
    let mut buggy = nodes.clone();
    buggy[p].value = Some(value(q).to_string());

    Ok(VarMisuseExample {
        example_id: format!("{}/bug", function.id),
        function_id: function.id.clone(),
        nodes: buggy,
        is_buggy: true,
        bug_location: p as u32 + 1,
        repair_positions,
        original_value,
    })
}

/// Up to `copies_buggy` distinct buggy examples and exactly `copies_clean`
/// clean examples per function, shuffled by the seed. Functions that admit
/// no repairable bug contribute clean examples only.
pub fn make_varmisuse_dataset(
    functions: &[Snippet],
    copies_buggy: usize,
    copies_clean: usize,
    variable_types: &BTreeSet<String>,
    seed: u64,
) -> Vec<VarMisuseExample> {
    let per_function: Vec<Vec<VarMisuseExample>> = functions
        .par_iter()
        .map(|f| {
            let mut examples = Vec::with_capacity(copies_buggy + copies_clean);
            let mut drawn = HashSet::new();
            for i in 0..copies_buggy {
                let example_id = format!("{}/bug{i}", f.id);
                match inject_bug(f, variable_types, derive_seed(seed, &example_id)) {
                    Ok(ex) => {
                        let key = (ex.bug_location, ex.nodes[ex.bug_location as usize - 1].value.clone());
                        if drawn.insert(key) {
                            examples.push(VarMisuseExample { example_id, ..ex });
                        }
                    }
                    Err(_) => break,
                }
            }
            for i in 0..copies_clean {
                examples.push(VarMisuseExample {
                    example_id: format!("{}/clean{i}", f.id),
                    function_id: f.id.clone(),
                    nodes: f.nodes.clone(),
                    is_buggy: false,
                    bug_location: NO_BUG,
                    repair_positions: Vec::new(),
                    original_value: String::new(),
                });
            }
            examples
        })
        .collect();
    let mut all: Vec<VarMisuseExample> = per_function.into_iter().flatten().collect();
    Prng::keyed(seed, "varmisuse-order").shuffle(&mut all);
    all
}
