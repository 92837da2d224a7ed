use crate::corpus::{Node, Snippet};

pub const DEFAULT_MAX_LEN: usize = 500;
pub const DEFAULT_STRIDE: usize = 250;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionChunk {
    pub snippet_id: String,
    pub nodes: Vec<Node>,
    pub start_offset: usize,
    /// Positions before this index are context only.
    pub loss_start: usize,
}

impl CompletionChunk {
    /// Source-snippet positions (0-based) scored by this chunk.
    pub fn scored_positions(&self) -> std::ops::Range<usize> {
        self.start_offset + self.loss_start..self.start_offset + self.nodes.len()
    }
}

/// Overlapping windows of at most `max_len` nodes starting every `stride`
/// positions. Each snippet position is scored by exactly one window.
///
/// Panics unless `0 < stride <= max_len`.
pub fn chunk(snippet: &Snippet, max_len: usize, stride: usize) -> Vec<CompletionChunk> {
    assert!(stride > 0 && stride <= max_len, "need 0 < stride <= max_len");
    let len = snippet.nodes.len();
    let mut chunks = Vec::new();
    let mut offset = 0;
    loop {
        let end = (offset + max_len).min(len);
        chunks.push(CompletionChunk {
            snippet_id: snippet.id.clone(),
            nodes: snippet.nodes[offset..end].to_vec(),
            start_offset: offset,
            loss_start: if offset == 0 { 0 } else { max_len - stride },
        });
        if end >= len {
            break;
        }
        offset += stride;
    }
    chunks
}
