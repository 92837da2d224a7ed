use std::collections::HashSet;

use crate::corpus::{Corpus, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DedupReport {
    pub kept: usize,
    pub removed: usize,
}

/// Keeps the first snippet (in input order) of every class of snippets with
/// identical `(type, value)` sequences.
pub fn dedup(corpus: &Corpus) -> (Corpus, DedupReport) {
    let mut seen: HashSet<&[Node]> = HashSet::with_capacity(corpus.len());
    let snippets: Vec<_> = corpus
        .snippets
        .iter()
        .filter(|s| seen.insert(s.nodes.as_slice()))
        .cloned()
        .collect();
    let report = DedupReport {
        kept: snippets.len(),
        removed: corpus.len() - snippets.len(),
    };
    (Corpus::new(snippets, corpus.provenance.clone()), report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Snippet;
    use proptest::prelude::*;

    fn snip(id: &str, values: &[&str]) -> Snippet {
        Snippet::new(id, values.iter().map(|v| Node::valued("NameLoad", v)).collect())
    }

    #[test]
    fn identical_pair_keeps_first() {
        let c = Corpus::new(vec![snip("a", &["x", "y"]), snip("b", &["x", "y"])], "t");
        let (out, report) = dedup(&c);
        assert_eq!(out.snippets.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), vec!["a"]);
        assert_eq!(report, DedupReport { kept: 1, removed: 1 });
    }

    #[test]
    fn no_duplicates_is_identity() {
        let c = Corpus::new(vec![snip("a", &["x"]), snip("b", &["y"])], "t");
        assert_eq!(dedup(&c).0, c);
    }

    #[test]
    fn type_difference_is_not_duplicate() {
        let mut b = snip("b", &["x"]);
        b.nodes[0].node_type = "NameStore".into();
        let c = Corpus::new(vec![snip("a", &["x"]), b], "t");
        assert_eq!(dedup(&c).1.removed, 0);
    }

    proptest! {
        #[test]
        fn matches_pairwise_oracle(raw in prop::collection::vec(prop::collection::vec("[ab]", 1..4), 0..30)) {
            let c = Corpus::new(
                raw.iter().enumerate().map(|(i, vs)| {
                    let refs: Vec<&str> = vs.iter().map(String::as_str).collect();
                    snip(&format!("s{i}"), &refs)
                }).collect(),
                "t",
            );
            let (out, _) = dedup(&c);
            // O(n^2): keep i iff no earlier j has equal nodes.
            let expected: Vec<&str> = (0..c.len())
                .filter(|&i| (0..i).all(|j| c.snippets[j].nodes != c.snippets[i].nodes))
                .map(|i| c.snippets[i].id.as_str())
                .collect();
            let got: Vec<&str> = out.snippets.iter().map(|s| s.id.as_str()).collect();
            prop_assert_eq!(&got, &expected);
            prop_assert_eq!(dedup(&out).0, out);
        }
    }
}
