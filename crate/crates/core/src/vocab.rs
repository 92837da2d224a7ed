//! Frequency-cropped value vocabularies.
//!
//! Only node values are counted; node types pass through uncropped. Counted
//! values are escaped (see [`crate::reserved`]) so entries never collide with
//! placeholders or special tokens.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::corpus::write_lines;
use crate::error::{Error, Result};
use crate::reserved::{self, escape, EOS, PAD, UNK};

/// Occurrence counts keyed by (escaped) value.
pub type FrequencyTable = BTreeMap<String, u64>;

pub fn count_values(corpus: &Corpus) -> FrequencyTable {
    corpus
        .snippets
        .par_iter()
        .fold(HashMap::<String, u64>::new, |mut table, snippet| {
            for value in snippet.values() {
                *table.entry(escape(value).into_owned()).or_default() += 1;
            }
            table
        })
        .reduce(HashMap::new, merge_counts)
        .into_iter()
        .collect()
}

fn merge_counts(mut a: HashMap<String, u64>, b: HashMap<String, u64>) -> HashMap<String, u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (value, count) in b {
        *a.entry(value).or_default() += count;
    }
    a
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    size_limit: usize,
    rank: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn empty() -> Self {
        Self::from_entries(Vec::new(), 0).expect("empty vocabulary is valid")
    }

    /// Builds from entries already in vocabulary order.
    pub fn from_entries(entries: Vec<(String, u64)>, size_limit: usize) -> Result<Self> {
        if entries.len() > size_limit {
            return Err(Error::Invalid(format!(
                "{} entries exceed the size limit {size_limit}",
                entries.len()
            )));
        }
        for pair in entries.windows(2) {
            let ((a, fa), (b, fb)) = (&pair[0], &pair[1]);
            if fa < fb || (fa == fb && a >= b) {
                return Err(Error::Invalid(format!(
                    "entries out of order at `{a}` / `{b}`"
                )));
            }
        }
        let mut rank = HashMap::with_capacity(entries.len());
        for (i, (value, _)) in entries.iter().enumerate() {
            if value.is_empty() || reserved::is_reserved(value) {
                return Err(Error::Invalid(format!("`{value}` is a reserved name")));
            }
            rank.insert(value.clone(), i);
        }
        Ok(Vocabulary {
            entries,
            size_limit,
            rank,
        })
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn size_limit(&self) -> usize {
        self.size_limit
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Membership of an escaped value.
    pub fn contains(&self, value: &str) -> bool {
        self.rank.contains_key(value)
    }

    /// Zero-based position of an escaped value in the entry list.
    pub fn rank_of(&self, value: &str) -> Option<usize> {
        self.rank.get(value).copied()
    }

    /// One `value<TAB>frequency` line per entry. Backslash, tab, newline
    /// and carriage return inside values are written as `\\`, `\t`, `\n`
    /// and `\r`.
    pub fn to_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.entries
            .iter()
            .map(|(value, count)| format!("{}\t{count}", encode_field(value)))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_lines(path, self.to_lines())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|(line, message)| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (value, count) = line
                .rsplit_once('\t')
                .ok_or_else(|| (i + 1, "expected value<TAB>frequency".to_string()))?;
            let count = count
                .parse::<u64>()
                .map_err(|e| (i + 1, format!("bad frequency: {e}")))?;
            let value = decode_field(value).map_err(|e| (i + 1, e))?;
            entries.push((value, count));
        }
        let n = entries.len();
        Self::from_entries(entries, n).map_err(|e| (0, e.to_string()))
    }
}

fn encode_field(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn decode_field(field: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape `\\{}`", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

/// Top-`n` values by frequency; ties go to the lexicographically smaller
/// value. `n = 0` gives the empty vocabulary (full anonymization).
pub fn build_vocabulary(freq: &FrequencyTable, n: usize) -> Vocabulary {
    let mut entries: Vec<(String, u64)> = freq
        .iter()
        .filter(|(value, _)| !reserved::is_reserved(value))
        .map(|(v, c)| (v.clone(), *c))
        .collect();
    entries.sort_unstable_by(|(va, ca), (vb, cb)| cb.cmp(ca).then_with(|| va.cmp(vb)));
    entries.truncate(n);
    Vocabulary::from_entries(entries, n).expect("sorted entries form a valid vocabulary")
}

/// Fraction of the corpus's unique (escaped) values that the vocabulary
/// contains; 1.0 when the corpus has no values.
pub fn coverage(vocab: &Vocabulary, corpus: &Corpus) -> f64 {
    let unique: HashSet<String> = corpus
        .snippets
        .iter()
        .flat_map(|s| s.values())
        .map(|v| escape(v).into_owned())
        .collect();
    if unique.is_empty() {
        return 1.0;
    }
    let covered = unique.iter().filter(|v| vocab.contains(v)).count();
    covered as f64 / unique.len() as f64
}

/// Integer id layout shared with model code:
/// `0 = PAD, 1 = UNK, 2 = EOS, 3..3+M = var1..varM`, then vocabulary
/// entries in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdLayout {
    pub placeholder_budget: u32,
}

impl IdLayout {
    pub const PAD_ID: u32 = 0;
    pub const UNK_ID: u32 = 1;
    pub const EOS_ID: u32 = 2;

    pub fn new(placeholder_budget: u32) -> Self {
        IdLayout { placeholder_budget }
    }

    pub fn first_entry_id(&self) -> u32 {
        3 + self.placeholder_budget
    }

    pub fn size(&self, vocab: &Vocabulary) -> u32 {
        self.first_entry_id() + vocab.len() as u32
    }

    /// Id of a post-regime value, or `None` when it is out of vocabulary.
    pub fn id_of(&self, vocab: &Vocabulary, value: &str) -> Option<u32> {
        match value {
            PAD => return Some(Self::PAD_ID),
            UNK => return Some(Self::UNK_ID),
            EOS => return Some(Self::EOS_ID),
            _ => {}
        }
        if let Some(k) = reserved::parse_placeholder(value) {
            return (k <= self.placeholder_budget).then_some(2 + k);
        }
        vocab
            .rank_of(value)
            .map(|r| self.first_entry_id() + r as u32)
    }
}
