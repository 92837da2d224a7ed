//! Out-of-vocabulary identifier anonymization for AST token corpora, with
//! the dataset construction and metrics used to compare it against UNK
//! replacement and full anonymization.

pub mod anonymizer;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod formats;
mod io;
pub mod metrics;
pub mod prep;
pub mod reserved;
pub mod rng;
pub mod vocab;

pub use error::{Error, Result};
