//! In-memory and on-disk representation of code snippets as depth-first
//! (pre-order) AST traversals of `(node type, node value)` pairs.
//!
//! Two line-oriented input formats are understood:
//!
//! * `ast-json`: one serialized tree per line, as an array of node objects
//!   (`{"type": .., "value": .., "children": [..]}`) with children given by
//!   index and the root at index 0. A bare array is the py150 layout
//!   (including its trailing `0` sentinel); an object wrapper
//!   `{"id", "repo", "path", "ast": [..]}` carries provenance inline.
//! * `token-jsonl`: the already-linearized form written by [`write_corpus`].

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub node_type: String,
    pub value: Option<String>,
}

impl Node {
    pub fn new(node_type: impl Into<String>, value: Option<&str>) -> Self {
        Node {
            node_type: node_type.into(),
            value: value.map(str::to_string),
        }
    }

    pub fn structural(node_type: impl Into<String>) -> Self {
        Self::new(node_type, None)
    }

    pub fn valued(node_type: impl Into<String>, value: &str) -> Self {
        Self::new(node_type, Some(value))
    }

    pub fn value(&self) -> Option<&str> {
        self.value.as_deref()
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.node_type.is_empty() {
            return Err("node type is empty".into());
        }
        if self.value.as_deref() == Some("") {
            return Err("node value is present but empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snippet {
    pub id: String,
    pub repository: String,
    pub path: String,
    pub nodes: Vec<Node>,
    /// Size of the subtree rooted at each node (the node itself included).
    /// Present when the snippet was parsed from a tree; needed to cut
    /// function subtrees out of whole-file traversals.
    pub subtree_sizes: Option<Vec<u32>>,
}

impl Snippet {
    pub fn new(id: impl Into<String>, nodes: Vec<Node>) -> Self {
        Snippet {
            id: id.into(),
            repository: String::new(),
            path: String::new(),
            nodes,
            subtree_sizes: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Present node values in traversal order.
    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter_map(Node::value)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("snippet has no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            node.check().map_err(|e| format!("node {i}: {e}"))?;
        }
        if let Some(sizes) = &self.subtree_sizes {
            check_subtree_sizes(sizes)?;
        }
        Ok(())
    }
}

/// Subtree sizes must describe a single pre-order tree: every subtree nests
/// inside its parent's extent and the root spans the whole sequence.
fn check_subtree_sizes(sizes: &[u32]) -> std::result::Result<(), String> {
    let n = sizes.len();
    if n == 0 || sizes[0] as usize != n {
        return Err("root subtree size must equal the node count".into());
    }
    let mut open_ends: Vec<usize> = Vec::new();
    for (i, &size) in sizes.iter().enumerate() {
        while open_ends.last().is_some_and(|&end| end <= i) {
            open_ends.pop();
        }
        let end = i + size as usize;
        if size == 0 || end > n || open_ends.last().is_some_and(|&parent| end > parent) {
            return Err(format!("subtree size {size} at node {i} is inconsistent"));
        }
        open_ends.push(end);
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub snippets: Vec<Snippet>,
    pub provenance: String,
}

impl Corpus {
    pub fn new(snippets: Vec<Snippet>, provenance: impl Into<String>) -> Self {
        Corpus {
            snippets,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    AstJson,
    #[default]
    TokenJsonl,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ast-json" => Ok(Format::AstJson),
            "token-jsonl" => Ok(Format::TokenJsonl),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::AstJson => "ast-json",
            Format::TokenJsonl => "token-jsonl",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnError {
    #[default]
    FailFast,
    SkipAndLog,
}

#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    pub format: Format,
    pub on_error: OnError,
    /// Per-line source paths for bare py150 arrays, in the layout of the
    /// py150 file lists (`data/<owner>/<repo>/<file>`).
    pub source_paths: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub skipped: Vec<SkippedLine>,
}

/// Parses one `ast-json` line into its pre-order traversal.
///
/// Fields not carried by the record (id, repository, path) are left empty.
pub fn parse_ast_record(record: &str) -> Result<Snippet> {
    let parsed: Value = serde_json::from_str(record).map_err(|e| Error::Record(e.to_string()))?;
    let (header, array) = match parsed {
        Value::Array(items) => (None, items),
        Value::Object(mut obj) => match obj.remove("ast") {
            Some(Value::Array(items)) => (Some(obj), items),
            _ => return Err(Error::Record("object record lacks an `ast` array".into())),
        },
        _ => return Err(Error::Record("expected a node array".into())),
    };

    let mut raw = Vec::with_capacity(array.len());
    for (i, item) in array.into_iter().enumerate() {
        match item {
            Value::Object(obj) => raw.push(raw_node(i, obj)?),
            // py150 terminates every array with a literal 0.
            Value::Number(n) if n.as_u64() == Some(0) && !raw.is_empty() => break,
            _ => return Err(Error::Record(format!("element {i} is not a node object"))),
        }
    }
    if raw.is_empty() {
        return Err(Error::Structure("tree has no nodes".into()));
    }

    let (order, sizes) = preorder(&raw)?;
    let nodes = order
        .into_iter()
        .map(|i| {
            let (ty, value, _) = &raw[i];
            Node::new(ty.clone(), value.as_deref())
        })
        .collect();

    let field = |key: &str| -> String {
        header
            .as_ref()
            .and_then(|h| h.get(key))
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string()
    };
    Ok(Snippet {
        id: field("id"),
        repository: field("repo"),
        path: field("path"),
        nodes,
        subtree_sizes: Some(sizes),
    })
}

type RawNode = (String, Option<String>, Vec<usize>);

fn raw_node(i: usize, mut obj: serde_json::Map<String, Value>) -> Result<RawNode> {
    let ty = match obj.remove("type") {
        Some(Value::String(s)) if !s.is_empty() => s,
        _ => return Err(Error::Record(format!("node {i} has no type"))),
    };
    let value = match obj.remove("value") {
        None | Some(Value::Null) => None,
        // Empty strings carry no identifier; treat them as absent.
        Some(Value::String(s)) if s.is_empty() => None,
        Some(Value::String(s)) => Some(s),
        Some(v @ (Value::Number(_) | Value::Bool(_))) => Some(v.to_string()),
        Some(_) => return Err(Error::Record(format!("node {i} has a non-scalar value"))),
    };
    let children = match obj.remove("children") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|c| {
                c.as_u64()
                    .map(|c| c as usize)
                    .ok_or_else(|| Error::Record(format!("node {i} has a non-integer child")))
            })
            .collect::<Result<_>>()?,
        Some(_) => return Err(Error::Record(format!("node {i} children is not an array"))),
    };
    Ok((ty, value, children))
}

/// Iterative pre-order walk from node 0. Returns visiting order and the
/// subtree size of each visited node (aligned with the order).
fn preorder(raw: &[RawNode]) -> Result<(Vec<usize>, Vec<u32>)> {
    enum Step {
        Enter(usize),
        Exit(usize),
    }
    let n = raw.len();
    let mut seen = vec![false; n];
    let mut slot = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    let mut sizes = Vec::with_capacity(n);
    let mut stack = vec![Step::Enter(0)];

    while let Some(step) = stack.pop() {
        match step {
            Step::Enter(i) => {
                if seen[i] {
                    return Err(Error::Structure(format!(
                        "node {i} is reached twice (cycle or shared child)"
                    )));
                }
                seen[i] = true;
                slot[i] = order.len();
                order.push(i);
                sizes.push(0);
                stack.push(Step::Exit(i));
                for &child in raw[i].2.iter().rev() {
                    if child >= n {
                        return Err(Error::Structure(format!(
                            "node {i} lists child {child} but the tree has {n} nodes"
                        )));
                    }
                    stack.push(Step::Enter(child));
                }
            }
            Step::Exit(i) => {
                sizes[slot[i]] = (order.len() - slot[i]) as u32;
            }
        }
    }
    if order.len() != n {
        return Err(Error::Structure(format!(
            "{} of {n} nodes are unreachable from the root",
            n - order.len()
        )));
    }
    Ok((order, sizes))
}

#[derive(Serialize)]
struct TokenLineOut<'a> {
    id: &'a str,
    repo: &'a str,
    path: &'a str,
    nodes: Vec<(&'a str, Option<&'a str>)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sizes: Option<&'a [u32]>,
}

#[derive(Deserialize)]
struct TokenLineIn {
    #[serde(default)]
    id: String,
    #[serde(default)]
    repo: String,
    #[serde(default)]
    path: String,
    nodes: Vec<(String, Option<String>)>,
    #[serde(default)]
    sizes: Option<Vec<u32>>,
}

/// Serializes one snippet as a `token-jsonl` line (no trailing newline).
pub fn snippet_to_line(snippet: &Snippet) -> String {
    let line = TokenLineOut {
        id: &snippet.id,
        repo: &snippet.repository,
        path: &snippet.path,
        nodes: node_pairs(&snippet.nodes),
        sizes: snippet.subtree_sizes.as_deref(),
    };
    serde_json::to_string(&line).expect("token line serializes")
}

pub(crate) fn node_pairs(nodes: &[Node]) -> Vec<(&str, Option<&str>)> {
    nodes
        .iter()
        .map(|n| (n.node_type.as_str(), n.value.as_deref()))
        .collect()
}

pub(crate) fn nodes_from_pairs(pairs: Vec<(String, Option<String>)>) -> Vec<Node> {
    pairs
        .into_iter()
        .map(|(node_type, value)| Node { node_type, value })
        .collect()
}

/// Parses one `token-jsonl` line.
pub fn parse_token_line(record: &str) -> Result<Snippet> {
    let line: TokenLineIn =
        serde_json::from_str(record).map_err(|e| Error::Record(e.to_string()))?;
    Ok(Snippet {
        id: line.id,
        repository: line.repo,
        path: line.path,
        nodes: nodes_from_pairs(line.nodes),
        subtree_sizes: line.sizes,
    })
}

/// Splits a py150 file-list entry into (repository, path).
fn repo_from_source_path(source: &str) -> (String, String) {
    let trimmed = source.trim();
    let rel = trimmed.strip_prefix("data/").unwrap_or(trimmed);
    let parts: Vec<&str> = rel.splitn(3, '/').collect();
    let repo = if parts.len() >= 2 {
        format!("{}/{}", parts[0], parts[1])
    } else {
        String::new()
    };
    (repo, trimmed.to_string())
}

pub fn read_corpus(path: impl AsRef<Path>, options: &ReadOptions) -> Result<LoadedCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let display = path.display().to_string();

    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();

    let parsed: Vec<(usize, Result<Snippet>)> = lines
        .par_iter()
        .map(|&(line_no, line)| {
            let result = match options.format {
                Format::AstJson => parse_ast_record(line),
                Format::TokenJsonl => parse_token_line(line),
            }
            .and_then(|mut snippet| {
                if snippet.id.is_empty() {
                    snippet.id = format!("{display}:{line_no}");
                }
                if let Some(paths) = &options.source_paths {
                    if snippet.repository.is_empty() && snippet.path.is_empty() {
                        if let Some(source) = paths.get(line_no - 1) {
                            let (repo, p) = repo_from_source_path(source);
                            snippet.repository = repo;
                            snippet.path = p;
                        }
                    }
                }
                snippet.validate().map_err(Error::Record)?;
                Ok(snippet)
            });
            (line_no, result)
        })
        .collect();

    let mut snippets = Vec::with_capacity(parsed.len());
    let mut skipped = Vec::new();
    let mut ids = HashSet::new();
    for (line, result) in parsed {
        let outcome = result.and_then(|s| {
            if ids.insert(s.id.clone()) {
                Ok(s)
            } else {
                Err(Error::Record(format!("duplicate snippet id `{}`", s.id)))
            }
        });
        match outcome {
            Ok(s) => snippets.push(s),
            Err(e) => {
                let message = match e {
                    Error::Record(m) | Error::Structure(m) => m,
                    other => other.to_string(),
                };
                match options.on_error {
                    OnError::FailFast => {
                        return Err(Error::Parse {
                            path: display,
                            line,
                            message,
                        })
                    }
                    OnError::SkipAndLog => {
                        log::warn!("{display}:{line}: skipped: {message}");
                        skipped.push(SkippedLine { line, message });
                    }
                }
            }
        }
    }

    Ok(LoadedCorpus {
        corpus: Corpus::new(snippets, format!("{display} ({})", options.format)),
        skipped,
    })
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_lines(path, corpus.snippets.iter().map(snippet_to_line))
}

/// Writes newline-terminated lines atomically.
pub(crate) fn write_lines<I>(path: impl AsRef<Path>, lines: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    write_atomic(path.as_ref(), |file| {
        let mut out = BufWriter::new(file);
        for line in lines {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()
    })
}
