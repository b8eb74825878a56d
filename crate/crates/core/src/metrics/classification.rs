use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Gold × predicted counts over the union of observed classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Sorted class labels; rows are gold, columns predicted.
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    /// Pairs dropped because either side was missing.
    pub dropped: usize,
}

impl ConfusionMatrix {
    /// Build directly from a square count table.
    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        assert_eq!(classes.len(), counts.len());
        assert!(counts.iter().all(|r| r.len() == classes.len()));
        ConfusionMatrix { classes, counts, dropped: 0 }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, gold: &str, pred: &str) -> u64 {
        match (self.index(gold), self.index(pred)) {
            (Some(g), Some(p)) => self.counts[g][p],
            _ => 0,
        }
    }

    fn index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }
}

pub fn confusion(
    gold: &[Option<String>],
    pred: &[Option<String>],
) -> Result<ConfusionMatrix, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch(gold.len(), pred.len()));
    }
    let pairs: Vec<(&str, &str)> = gold
        .iter()
        .zip(pred)
        .filter_map(|(g, p)| Some((g.as_deref()?, p.as_deref()?)))
        .collect();
    if pairs.is_empty() {
        return Err(MetricError::NoPairs);
    }
    let classes: Vec<String> = pairs
        .iter()
        .flat_map(|(g, p)| [*g, *p])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    let mut cm = ConfusionMatrix {
        counts: vec![vec![0; classes.len()]; classes.len()],
        classes,
        dropped: gold.len() - pairs.len(),
    };
    for (g, p) in pairs {
        let (gi, pi) = (cm.index(g).unwrap(), cm.index(p).unwrap());
        cm.counts[gi][pi] += 1;
    }
    Ok(cm)
}

/// Trace over total. Panics on an empty matrix.
pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    assert!(total > 0, "accuracy of an empty confusion matrix");
    let trace: u64 = (0..cm.classes.len()).map(|i| cm.counts[i][i]).sum();
    trace as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean over classes.
    Macro,
    /// From pooled TP/FP/FN counts.
    Micro,
    /// Mean over classes weighted by gold support.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrfTarget {
    Positive(String),
    Average(Averaging),
}

/// Per-class scores. A score with an empty denominator is 0 and flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Gold instances of the class.
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Some contributing score had an empty denominator and was set to 0.
    pub zero_support: bool,
    pub per_class: Vec<ClassStats>,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn class_stats(cm: &ConfusionMatrix, i: usize) -> ClassStats {
    let tp = cm.counts[i][i];
    let support: u64 = cm.counts[i].iter().sum();
    let predicted: u64 = cm.counts.iter().map(|r| r[i]).sum();
    let (precision, precision_undefined) = ratio(tp, predicted);
    let (recall, recall_undefined) = ratio(tp, support);
    ClassStats {
        class: cm.classes[i].clone(),
        tp,
        fp: predicted - tp,
        fn_: support - tp,
        support,
        precision,
        recall,
        f1: f1_of(precision, recall),
        precision_undefined,
        recall_undefined,
    }
}

/// Precision, recall and F1 for one class or averaged over classes.
///
/// The per-class table is always returned. Empty denominators score 0 and
/// set `zero_support`; a positive class absent from both sides scores 0.
pub fn precision_recall_f1(cm: &ConfusionMatrix, target: &PrfTarget) -> PrfResult {
    let per_class: Vec<ClassStats> = (0..cm.classes.len()).map(|i| class_stats(cm, i)).collect();
    let undefined = |s: &ClassStats| s.precision_undefined || s.recall_undefined;
    let (precision, recall, f1, zero_support) = match target {
        PrfTarget::Positive(class) => match per_class.iter().find(|s| &s.class == class) {
            Some(s) => (s.precision, s.recall, s.f1, undefined(s)),
            None => (0.0, 0.0, 0.0, true),
        },
        PrfTarget::Average(Averaging::Macro) => {
            let k = per_class.len() as f64;
            (
                per_class.iter().map(|s| s.precision).sum::<f64>() / k,
                per_class.iter().map(|s| s.recall).sum::<f64>() / k,
                per_class.iter().map(|s| s.f1).sum::<f64>() / k,
                per_class.iter().any(undefined),
            )
        }
        PrfTarget::Average(Averaging::Micro) => {
            let tp: u64 = per_class.iter().map(|s| s.tp).sum();
            let fp: u64 = per_class.iter().map(|s| s.fp).sum();
            let fn_: u64 = per_class.iter().map(|s| s.fn_).sum();
            let (p, pu) = ratio(tp, tp + fp);
            let (r, ru) = ratio(tp, tp + fn_);
            (p, r, f1_of(p, r), pu || ru)
        }
        PrfTarget::Average(Averaging::Weighted) => {
            let total: u64 = per_class.iter().map(|s| s.support).sum();
            let w = |f: fn(&ClassStats) -> f64| {
                per_class.iter().map(|s| f(s) * s.support as f64).sum::<f64>() / total as f64
            };
            (
                w(|s| s.precision),
                w(|s| s.recall),
                w(|s| s.f1),
                per_class.iter().filter(|s| s.support > 0).any(undefined),
            )
        }
    };
    PrfResult { precision, recall, f1, zero_support, per_class }
}

/// Mean absolute error over pairs where both sides are present.
pub fn mae(gold: &[Option<f64>], pred: &[Option<f64>]) -> Result<f64, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch(gold.len(), pred.len()));
    }
    let diffs: Vec<f64> = gold
        .iter()
        .zip(pred)
        .filter_map(|(g, p)| Some((g.as_ref()? - p.as_ref()?).abs()))
        .collect();
    if diffs.is_empty() {
        return Err(MetricError::NoPairs);
    }
    Ok(diffs.iter().sum::<f64>() / diffs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::complete_labels;

    #[test]
    fn confusion_counts() {
        let cm = confusion(&complete_labels(&["A", "B"]), &complete_labels(&["A", "B"])).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0], vec![0, 1]]);

        let cm = confusion(
            &complete_labels(&["A", "A", "B", "B"]),
            &complete_labels(&["A", "B", "B", "B"]),
        )
        .unwrap();
        assert_eq!((cm.get("A", "A"), cm.get("A", "B"), cm.get("B", "B"), cm.get("B", "A")), (1, 1, 2, 0));
        assert_eq!(cm.total(), 4);
        assert_eq!(accuracy(&cm), 0.75);

        let err = confusion(&complete_labels(&["A"]), &[None]).unwrap_err();
        assert_eq!(err, MetricError::NoPairs);
    }

    #[test]
    fn uniform_disagreement_scores_zero() {
        let cm = confusion(&complete_labels(&["A", "B"]), &complete_labels(&["B", "A"])).unwrap();
        assert_eq!(accuracy(&cm), 0.0);
    }

    #[test]
    fn binary_positive_class() {
        let cm = confusion(&complete_labels(&["1", "1", "0", "0"]), &complete_labels(&["1", "0", "1", "0"])).unwrap();
        let r = precision_recall_f1(&cm, &PrfTarget::Positive("1".into()));
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
        assert!(!r.zero_support);
    }

    #[test]
    fn perfect_predictions_every_averaging() {
        let l = complete_labels(&["a", "b", "c", "a"]);
        let cm = confusion(&l, &l).unwrap();
        for avg in [Averaging::Macro, Averaging::Micro, Averaging::Weighted] {
            let r = precision_recall_f1(&cm, &PrfTarget::Average(avg));
            assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn absent_positive_class_is_flagged() {
        let cm = confusion(&complete_labels(&["a", "b"]), &complete_labels(&["a", "a"])).unwrap();
        let r = precision_recall_f1(&cm, &PrfTarget::Positive("z".into()));
        assert_eq!((r.precision, r.recall, r.f1, r.zero_support), (0.0, 0.0, 0.0, true));
        // b is never predicted: precision undefined, reported 0 and flagged.
        let b = &precision_recall_f1(&cm, &PrfTarget::Average(Averaging::Macro)).per_class[1];
        assert!(b.precision_undefined && b.precision == 0.0);
    }

    #[test]
    fn mae_examples() {
        let s = |v: &[f64]| v.iter().map(|x| Some(*x)).collect::<Vec<_>>();
        assert_eq!(mae(&s(&[1.0, 2.0]), &s(&[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(mae(&s(&[1.0, 2.0, 3.0]), &s(&[2.0, 2.0, 5.0])).unwrap(), 1.0);
        assert_eq!(mae(&s(&[0.0]), &s(&[10.0])).unwrap(), 10.0);
        assert_eq!(mae(&[Some(1.0)], &[None]), Err(MetricError::NoPairs));
    }
}
