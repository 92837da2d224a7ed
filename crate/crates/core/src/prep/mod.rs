//! Task dataset construction: deduplication, repository split, completion
//! chunks with pointer targets, and synthetic variable-misuse examples.

mod chunk;
mod dedup;
mod pointer;
mod split;
mod varmisuse;

pub use chunk::{chunk, CompletionChunk, DEFAULT_MAX_LEN, DEFAULT_STRIDE};
pub use dedup::{dedup, DedupReport};
pub use pointer::{pointer_targets, PointerTarget};
pub use split::split_by_repository;
pub use varmisuse::{
    extract_functions, inject_bug, make_varmisuse_dataset, ExtractConfig, VarMisuseExample,
    NO_BUG,
};
