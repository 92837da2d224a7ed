//! Evaluation metrics: MRR@k for completion and localization / repair /
//! joint accuracy for variable misuse.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prep::{VarMisuseExample, NO_BUG};
use crate::reserved::UNK;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedPrediction {
    pub position: u32,
    /// Best first.
    pub candidates: Vec<String>,
}

impl RankedPrediction {
    pub fn new(position: u32, candidates: Vec<String>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Invalid(format!("position {position}: no candidates")));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = candidates.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::Invalid(format!("position {position}: candidate `{dup}` repeated")));
        }
        Ok(RankedPrediction { position, candidates })
    }

    /// 1-based rank of `truth`, if ranked at all.
    pub fn rank_of(&self, truth: &str) -> Option<usize> {
        self.candidates.iter().position(|c| c == truth).map(|i| i + 1)
    }
}

/// Mean over positions of `1/rank` when the truth is ranked within the top
/// `k`, else 0. With `unk_scores_zero`, a truth equal to `UNK` scores 0.
/// Pass `usize::MAX` for no cutoff.
pub fn mrr_at_k(
    predictions: &[RankedPrediction],
    truths: &[String],
    k: usize,
    unk_scores_zero: bool,
) -> Result<f64> {
    if predictions.len() != truths.len() || predictions.is_empty() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    let total: f64 = predictions
        .iter()
        .zip(truths)
        .map(|(p, truth)| {
            if unk_scores_zero && truth == UNK {
                return 0.0;
            }
            match p.rank_of(truth) {
                Some(rank) if rank <= k => 1.0 / rank as f64,
                _ => 0.0,
            }
        })
        .sum();
    Ok(total / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMisusePrediction {
    pub example_id: String,
    pub predicted_bug_pos: u32,
    pub predicted_repair_pos: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub scored_positions: usize,
    pub buggy: usize,
    pub clean: usize,
    pub localization_hits: usize,
    pub repair_hits: usize,
    pub joint_hits: usize,
    pub no_bug_hits: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mrr: Option<f64>,
    pub localization_accuracy: Option<f64>,
    pub repair_accuracy: Option<f64>,
    pub joint_accuracy: Option<f64>,
    /// Share of clean examples predicted as no-bug. Not a headline number.
    pub no_bug_accuracy: Option<f64>,
    pub counts: Counts,
}

impl MetricsReport {
    pub fn completion(mrr: f64, scored_positions: usize) -> Self {
        MetricsReport {
            mrr: Some(mrr),
            counts: Counts {
                scored_positions,
                ..Counts::default()
            },
            ..Self::default()
        }
    }
}

fn ratio(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Scores buggy examples for localization, repair (any position holding the
/// original value counts) and both jointly. Clean examples only feed the
/// auxiliary no-bug accuracy. Predictions and examples must pair up by id.
pub fn varmisuse_scores(
    predictions: &[VarMisusePrediction],
    examples: &[VarMisuseExample],
) -> Result<MetricsReport> {
    let mut by_id: HashMap<&str, &VarMisuseExample> = HashMap::with_capacity(examples.len());
    for e in examples {
        if by_id.insert(e.example_id.as_str(), e).is_some() {
            return Err(Error::Invalid(format!("duplicate example id `{}`", e.example_id)));
        }
    }
    let mut used = HashSet::with_capacity(predictions.len());
    let mut counts = Counts::default();
    for p in predictions {
        let example = by_id
            .get(p.example_id.as_str())
            .ok_or_else(|| Error::UnmatchedId(p.example_id.clone()))?;
        if !used.insert(p.example_id.as_str()) {
            return Err(Error::Invalid(format!("duplicate prediction for `{}`", p.example_id)));
        }
        if example.is_buggy {
            counts.buggy += 1;
            let located = p.predicted_bug_pos == example.bug_location;
            let repaired = example.repair_positions.contains(&p.predicted_repair_pos);
            counts.localization_hits += usize::from(located);
            counts.repair_hits += usize::from(repaired);
            counts.joint_hits += usize::from(located && repaired);
        } else {
            counts.clean += 1;
            counts.no_bug_hits += usize::from(p.predicted_bug_pos == NO_BUG);
        }
    }
    if let Some(missing) = examples.iter().find(|e| !used.contains(e.example_id.as_str())) {
        return Err(Error::UnmatchedId(missing.example_id.clone()));
    }
    Ok(MetricsReport {
        mrr: None,
        localization_accuracy: ratio(counts.localization_hits, counts.buggy),
        repair_accuracy: ratio(counts.repair_hits, counts.buggy),
        joint_accuracy: ratio(counts.joint_hits, counts.buggy),
        no_bug_accuracy: ratio(counts.no_bug_hits, counts.clean),
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub mrr: Option<MeanStd>,
    pub localization_accuracy: Option<MeanStd>,
    pub repair_accuracy: Option<MeanStd>,
    pub joint_accuracy: Option<MeanStd>,
}

fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(MeanStd { mean, std })
}

/// Mean and standard deviation across runs, per metric present in every run.
pub fn aggregate(reports: &[MetricsReport]) -> AggregateReport {
    let collect = |f: fn(&MetricsReport) -> Option<f64>| -> Option<MeanStd> {
        let values: Option<Vec<f64>> = reports.iter().map(f).collect();
        values.and_then(|v| mean_std(&v))
    };
    AggregateReport {
        runs: reports.len(),
        mrr: collect(|r| r.mrr),
        localization_accuracy: collect(|r| r.localization_accuracy),
        repair_accuracy: collect(|r| r.repair_accuracy),
        joint_accuracy: collect(|r| r.joint_accuracy),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.counts;
        writeln!(f, "{:<22} {:>10}", "metric", "value")?;
        writeln!(f, "{:<22} {:>10}", "mrr", cell(self.mrr))?;
        writeln!(f, "{:<22} {:>10}", "localization", cell(self.localization_accuracy))?;
        writeln!(f, "{:<22} {:>10}", "repair", cell(self.repair_accuracy))?;
        writeln!(f, "{:<22} {:>10}", "joint", cell(self.joint_accuracy))?;
        writeln!(f, "{:<22} {:>10}", "no-bug (aux)", cell(self.no_bug_accuracy))?;
        write!(
            f,
            "scored={} buggy={} clean={}",
            c.scored_positions, c.buggy, c.clean
        )
    }
}

impl fmt::Display for AggregateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<MeanStd>| {
            v.map(|m| format!("{:.4} ± {:.4}", m.mean, m.std))
                .unwrap_or_else(|| "-".into())
        };
        writeln!(f, "{:<22} {:>18}", format!("metric ({} runs)", self.runs), "mean ± std")?;
        writeln!(f, "{:<22} {:>18}", "mrr", cell(self.mrr))?;
        writeln!(f, "{:<22} {:>18}", "localization", cell(self.localization_accuracy))?;
        writeln!(f, "{:<22} {:>18}", "repair", cell(self.repair_accuracy))?;
        write!(f, "{:<22} {:>18}", "joint", cell(self.joint_accuracy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Node;
    use crate::rng::Prng;
    use proptest::prelude::*;

    fn ranked(position: u32, cands: &[&str]) -> RankedPrediction {
        RankedPrediction::new(position, cands.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    /// Ranking with `truth` placed at `rank` (1-based) among fillers.
    fn at_rank(truth: &str, rank: usize) -> RankedPrediction {
        let mut cands: Vec<String> = (1..rank).map(|i| format!("w{i}")).collect();
        cands.push(truth.to_string());
        RankedPrediction::new(0, cands).unwrap()
    }

    #[test]
    fn all_rank_one() {
        let preds = vec![ranked(1, &["a", "b"]), ranked(2, &["c"])];
        assert_eq!(mrr_at_k(&preds, &["a".into(), "c".into()], 10, false).unwrap(), 1.0);
    }

    #[test]
    fn ranks_one_two_eleven() {
        let preds = vec![at_rank("t", 1), at_rank("t", 2), at_rank("t", 11)];
        let truths = vec!["t".to_string(); 3];
        assert_eq!(mrr_at_k(&preds, &truths, 10, false).unwrap(), 0.5);
    }

    #[test]
    fn unk_truth_scores_zero_when_flagged() {
        let preds = vec![ranked(1, &["UNK", "x"])];
        let truths = vec!["UNK".to_string()];
        assert_eq!(mrr_at_k(&preds, &truths, 10, true).unwrap(), 0.0);
        assert_eq!(mrr_at_k(&preds, &truths, 10, false).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_lengths() {
        assert!(matches!(
            mrr_at_k(&[ranked(1, &["a"])], &[], 10, false),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(mrr_at_k(&[], &[], 10, false).is_err());
    }

    #[test]
    fn candidate_validation() {
        assert!(RankedPrediction::new(1, vec![]).is_err());
        assert!(RankedPrediction::new(1, vec!["a".into(), "a".into()]).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_classical(
            ranks in prop::collection::vec(1usize..15, 1..40),
            seed in any::<u64>(),
        ) {
            let preds: Vec<_> = ranks.iter().map(|&r| at_rank("t", r)).collect();
            let truths = vec!["t".to_string(); preds.len()];
            let base = mrr_at_k(&preds, &truths, 10, false).unwrap();
            let mut order: Vec<usize> = (0..preds.len()).collect();
            Prng::from_seed(seed).shuffle(&mut order);
            let shuffled: Vec<_> = order.iter().map(|&i| preds[i].clone()).collect();
            prop_assert!((mrr_at_k(&shuffled, &truths, 10, false).unwrap() - base).abs() < 1e-12);
            let classical = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64;
            prop_assert!((mrr_at_k(&preds, &truths, usize::MAX, false).unwrap() - classical).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&base));
        }
    }

    fn example(id: &str, bug: u32, repair: &[u32]) -> VarMisuseExample {
        VarMisuseExample {
            example_id: id.into(),
            function_id: "f".into(),
            nodes: vec![Node::valued("NameLoad", "a"); 5],
            is_buggy: bug != NO_BUG,
            bug_location: bug,
            repair_positions: repair.to_vec(),
            original_value: if bug == NO_BUG { String::new() } else { "a".into() },
        }
    }

    fn pred(id: &str, bug: u32, fix: u32) -> VarMisusePrediction {
        VarMisusePrediction {
            example_id: id.into(),
            predicted_bug_pos: bug,
            predicted_repair_pos: fix,
        }
    }

    #[test]
    fn exact_predictions_score_one() {
        let ex = vec![example("a", 2, &[3, 5]), example("b", 4, &[1]), example("c", 0, &[])];
        let p = vec![pred("a", 2, 5), pred("b", 4, 1), pred("c", 0, 0)];
        let r = varmisuse_scores(&p, &ex).unwrap();
        assert_eq!(r.joint_accuracy, Some(1.0));
        assert_eq!(r.no_bug_accuracy, Some(1.0));
        assert_eq!((r.counts.buggy, r.counts.clean), (2, 1));
    }

    #[test]
    fn localized_but_wrong_repair() {
        let r = varmisuse_scores(&[pred("a", 2, 4)], &[example("a", 2, &[3])]).unwrap();
        assert_eq!(r.localization_accuracy, Some(1.0));
        assert_eq!(r.repair_accuracy, Some(0.0));
        assert_eq!(r.joint_accuracy, Some(0.0));
    }

    #[test]
    fn unmatched_ids() {
        assert!(matches!(
            varmisuse_scores(&[pred("zz", 0, 0)], &[example("a", 2, &[3])]),
            Err(Error::UnmatchedId(_))
        ));
        assert!(matches!(
            varmisuse_scores(&[], &[example("a", 2, &[3])]),
            Err(Error::UnmatchedId(_))
        ));
    }

    #[test]
    fn aggregate_mean_std() {
        let a = MetricsReport::completion(0.5, 10);
        let b = MetricsReport::completion(0.7, 10);
        let agg = aggregate(&[a, b]);
        let m = agg.mrr.unwrap();
        assert!((m.mean - 0.6).abs() < 1e-12);
        assert!((m.std - (0.02f64).sqrt()).abs() < 1e-12);
        assert_eq!(agg.joint_accuracy, None);
    }
}
