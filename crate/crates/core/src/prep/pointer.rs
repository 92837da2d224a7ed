use std::collections::HashMap;

use super::chunk::CompletionChunk;
use crate::vocab::{IdLayout, Vocabulary};

/// Supervision for one scored position of a completion chunk. Positions are
/// 1-based within the chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointerTarget {
    pub position: u32,
    pub vocab_id: Option<u32>,
    pub copy_positions: Vec<u32>,
}

/// Targets for every scored, value-bearing position: the fixed-vocabulary
/// id (if any) and every earlier in-chunk position holding the same value,
/// context positions included. Values are taken as already passed through
/// an identifier regime.
pub fn pointer_targets(chunk: &CompletionChunk, vocab: &Vocabulary, layout: IdLayout) -> Vec<PointerTarget> {
    let mut earlier: HashMap<&str, Vec<u32>> = HashMap::new();
    let mut targets = Vec::new();
    for (i, node) in chunk.nodes.iter().enumerate() {
        let Some(value) = node.value() else { continue };
        let position = i as u32 + 1;
        let seen = earlier.entry(value).or_default();
        if i >= chunk.loss_start {
            targets.push(PointerTarget {
                position,
                vocab_id: layout.id_of(vocab, value),
                copy_positions: seen.clone(),
            });
        }
        seen.push(position);
    }
    targets
}
