use std::collections::{BTreeMap, HashSet};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng::Prng;

/// Partitions whole repositories into train and test.
///
/// Repositories are sorted, shuffled with the seed, and moved to the test
/// side one at a time until the test side holds at least `test_fraction` of
/// the snippets. The last remaining repository always stays in train.
/// Snippets keep their input order on both sides.
pub fn split_by_repository(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!("test fraction {test_fraction} is not in (0, 1)")));
    }
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &corpus.snippets {
        *sizes.entry(s.repository.as_str()).or_default() += 1;
    }
    if sizes.len() < 2 {
        return Err(Error::Split(format!(
            "corpus has {} repositor{}; at least two are needed",
            sizes.len(),
            if sizes.len() == 1 { "y" } else { "ies" }
        )));
    }

    let mut repos: Vec<(&str, usize)> = sizes.into_iter().collect();
    Prng::keyed(seed, "split").shuffle(&mut repos);

    let total = corpus.len() as f64;
    let mut test_repos = HashSet::new();
    let mut test_count = 0usize;
    for &(repo, count) in &repos[..repos.len() - 1] {
        if test_count as f64 >= test_fraction * total {
            break;
        }
        test_repos.insert(repo);
        test_count += count;
    }

    let (test, train): (Vec<_>, Vec<_>) = corpus
        .snippets
        .iter()
        .cloned()
        .partition(|s| test_repos.contains(s.repository.as_str()));
    Ok((
        Corpus::new(train, format!("{} [train]", corpus.provenance)),
        Corpus::new(test, format!("{} [test]", corpus.provenance)),
    ))
}
