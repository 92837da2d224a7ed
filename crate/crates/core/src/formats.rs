//! Line-oriented JSON wire formats exchanged between pipeline stages and
//! with model code.
//!
//! Position conventions: `off` and `loss_start` are 0-based indices;
//! variable-misuse positions and pointer-target positions are 1-based, with
//! 0 reserved for the no-bug slot; completion predictions address absolute
//! 1-based positions of the source snippet.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::anonymizer::AnonymizationMap;
use crate::corpus::{node_pairs, nodes_from_pairs, write_lines, Snippet};
use crate::error::{Error, Result};
use crate::metrics::VarMisusePrediction;
use crate::prep::{CompletionChunk, PointerTarget, VarMisuseExample};

type WireNodes = Vec<(String, Option<String>)>;

fn wire_nodes(nodes: &[crate::corpus::Node]) -> WireNodes {
    node_pairs(nodes)
        .into_iter()
        .map(|(t, v)| (t.to_string(), v.map(str::to_string)))
        .collect()
}

/// Token line plus the anonymization map and regime name
/// (`oov-anon`, `full-anon`, `unk` or `none`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizedLine {
    pub id: String,
    pub repo: String,
    pub path: String,
    pub nodes: WireNodes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<u32>>,
    pub map: Vec<(String, u32)>,
    pub regime: String,
}

impl AnonymizedLine {
    pub fn new(snippet: &Snippet, map: &AnonymizationMap, regime: &str) -> Self {
        AnonymizedLine {
            id: snippet.id.clone(),
            repo: snippet.repository.clone(),
            path: snippet.path.clone(),
            nodes: wire_nodes(&snippet.nodes),
            sizes: snippet.subtree_sizes.clone(),
            map: map.pairs().to_vec(),
            regime: regime.to_string(),
        }
    }

    pub fn snippet(&self) -> Snippet {
        Snippet {
            id: self.id.clone(),
            repository: self.repo.clone(),
            path: self.path.clone(),
            nodes: nodes_from_pairs(self.nodes.clone()),
            subtree_sizes: self.sizes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkLine {
    pub sid: String,
    pub off: usize,
    pub loss_start: usize,
    pub nodes: WireNodes,
}

impl From<&CompletionChunk> for ChunkLine {
    fn from(c: &CompletionChunk) -> Self {
        ChunkLine {
            sid: c.snippet_id.clone(),
            off: c.start_offset,
            loss_start: c.loss_start,
            nodes: wire_nodes(&c.nodes),
        }
    }
}

impl ChunkLine {
    pub fn chunk(&self) -> Result<CompletionChunk> {
        if self.loss_start >= self.nodes.len() {
            return Err(Error::Record(format!(
                "loss_start {} outside chunk of {} nodes",
                self.loss_start,
                self.nodes.len()
            )));
        }
        Ok(CompletionChunk {
            snippet_id: self.sid.clone(),
            nodes: nodes_from_pairs(self.nodes.clone()),
            start_offset: self.off,
            loss_start: self.loss_start,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMisuseLine {
    pub fid: String,
    pub nodes: WireNodes,
    pub buggy: bool,
    pub bug_pos: u32,
    pub repair_pos: Vec<u32>,
    pub orig: String,
    pub eid: String,
}

impl From<&VarMisuseExample> for VarMisuseLine {
    fn from(e: &VarMisuseExample) -> Self {
        VarMisuseLine {
            fid: e.function_id.clone(),
            nodes: wire_nodes(&e.nodes),
            buggy: e.is_buggy,
            bug_pos: e.bug_location,
            repair_pos: e.repair_positions.clone(),
            orig: e.original_value.clone(),
            eid: e.example_id.clone(),
        }
    }
}

impl From<VarMisuseLine> for VarMisuseExample {
    fn from(l: VarMisuseLine) -> Self {
        VarMisuseExample {
            example_id: l.eid,
            function_id: l.fid,
            nodes: nodes_from_pairs(l.nodes),
            is_buggy: l.buggy,
            bug_location: l.bug_pos,
            repair_positions: l.repair_pos,
            original_value: l.orig,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub pos: u32,
    pub vid: Option<u32>,
    pub copy: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointerLine {
    pub sid: String,
    pub off: usize,
    pub targets: Vec<TargetEntry>,
}

impl PointerLine {
    pub fn new(chunk: &CompletionChunk, targets: &[PointerTarget]) -> Self {
        PointerLine {
            sid: chunk.snippet_id.clone(),
            off: chunk.start_offset,
            targets: targets
                .iter()
                .map(|t| TargetEntry {
                    pos: t.position,
                    vid: t.vocab_id,
                    copy: t.copy_positions.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionPredictionLine {
    pub sid: String,
    pub pos: u32,
    pub cands: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMisusePredictionLine {
    pub eid: String,
    pub bug: u32,
    pub fix: u32,
}

impl From<VarMisusePredictionLine> for VarMisusePrediction {
    fn from(l: VarMisusePredictionLine) -> Self {
        VarMisusePrediction {
            example_id: l.eid,
            predicted_bug_pos: l.bug,
            predicted_repair_pos: l.fix,
        }
    }
}

/// Parsed records with their 1-based line numbers; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<(usize, T)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

pub fn to_line<T: Serialize>(record: &T) -> String {
    serde_json::to_string(record).expect("wire records serialize")
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    write_lines(path, records.iter().map(to_line))
}
