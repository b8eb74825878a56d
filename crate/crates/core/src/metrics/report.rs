use serde::{Deserialize, Serialize};

use super::{ClassStats, ConfidenceInterval};

/// One metric's result for one variable, as written to validation and
/// robustness reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    /// Point estimate; `None` when the metric is undefined on this data.
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<ConfidenceInterval>,
    /// Units or pairs the estimate rests on.
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_class: Vec<ClassStats>,
    /// Conventions applied or problems met (`degenerate`, `zero_support`,
    /// error text when undefined).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, value: f64, n: usize) -> Self {
        MetricReport {
            metric: metric.into(),
            value: Some(value),
            ci: None,
            n,
            per_class: Vec::new(),
            flags: Vec::new(),
        }
    }

    /// A metric that could not be computed, with the reason as a flag.
    pub fn undefined(metric: impl Into<String>, n: usize, reason: impl Into<String>) -> Self {
        MetricReport {
            metric: metric.into(),
            value: None,
            ci: None,
            n,
            per_class: Vec::new(),
            flags: vec![reason.into()],
        }
    }

    pub fn with_ci(mut self, ci: ConfidenceInterval) -> Self {
        self.ci = Some(ci);
        self
    }

    pub fn with_flag(mut self, flag: impl Into<String>) -> Self {
        self.flags.push(flag.into());
        self
    }

    pub fn with_per_class(mut self, per_class: Vec<ClassStats>) -> Self {
        self.per_class = per_class;
        self
    }

    /// `0.812 [0.700, 0.900] (n=40)` style rendering.
    pub fn summary(&self) -> String {
        let mut s = match self.value {
            Some(v) => format!("{v:.3}"),
            None => "undefined".to_string(),
        };
        if let Some(ci) = &self.ci {
            s.push_str(&format!(" [{:.3}, {:.3}]", ci.lo, ci.hi));
        }
        s.push_str(&format!(" (n={})", self.n));
        if !self.flags.is_empty() {
            s.push_str(&format!(" {{{}}}", self.flags.join("; ")));
        }
        s
    }
}
