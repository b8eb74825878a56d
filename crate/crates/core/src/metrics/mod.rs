//! Validity and reliability statistics.
//!
//! Classification scores against a gold standard (accuracy, precision,
//! recall, F1, MAE) and chance-corrected agreement between raters (Cohen's
//! kappa, Krippendorff's alpha, ICC(2,1)), plus percentile bootstrap
//! intervals. Every function is pure.
//!
//! Missing data: kappa, confusion and MAE drop pairs with a missing side,
//! alpha handles missing cells natively, ICC rejects them.

mod agreement;
mod bootstrap;
mod classification;
mod icc;
mod ratings;
mod report;

pub use agreement::{cohens_kappa, krippendorff_alpha, AlphaResult, KappaResult};
pub use bootstrap::{bootstrap_ci, percentile, ConfidenceInterval, MIN_REPLICATES};
pub use classification::{
    accuracy, confusion, mae, precision_recall_f1, Averaging, ClassStats, ConfusionMatrix,
    PrfResult, PrfTarget,
};
pub use icc::{icc, IccResult};
pub use ratings::{RatingsMatrix, Scale};
pub use report::MetricReport;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no pairs left after dropping missing values")]
    NoPairs,
    #[error("need at least {needed} retained pairs, have {have}")]
    TooFewPairs { needed: usize, have: usize },
    #[error("degenerate marginals: expected agreement is 1 but observed agreement is {observed}")]
    DegenerateMarginals { observed: f64 },
    #[error("no unit has two or more ratings")]
    NoPairableUnits,
    #[error("all pairable values are identical but observed disagreement is {0}")]
    ZeroExpectedDisagreement(f64),
    #[error("ICC requires complete data; unit `{unit}` rater `{rater}` is missing")]
    MissingCell { unit: String, rater: String },
    #[error("value `{0}` is not numeric")]
    NonNumeric(String),
    #[error("need at least {needed} {what}, have {have}")]
    TooSmall { what: &'static str, needed: usize, have: usize },
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
    #[error("coefficient undefined: {0}")]
    Undefined(String),
    #[error("invalid bootstrap request: {0}")]
    BootstrapPrecondition(String),
    #[error("metric undefined on {failed} of {replicates} bootstrap replicates")]
    BootstrapUndefined { failed: usize, replicates: usize },
}

/// Convert borrowed labels into the owned optional form the metrics take.
pub fn labels<S: AsRef<str>>(values: &[Option<S>]) -> Vec<Option<String>> {
    values.iter().map(|v| v.as_ref().map(|s| s.as_ref().to_string())).collect()
}

/// Labels with no missing values.
pub fn complete_labels<S: AsRef<str>>(values: &[S]) -> Vec<Option<String>> {
    values.iter().map(|s| Some(s.as_ref().to_string())).collect()
}
