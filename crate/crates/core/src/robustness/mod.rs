//! Stability of coded output across repeated runs, prompt paraphrases and
//! models.
//!
//! Every protocol reduces to the same move: treat each run as a rater,
//! assemble a documents × runs [`RatingsMatrix`] per variable, and hand it
//! to [`crate::metrics`]. Failed documents and missing answers become
//! missing cells. Runs are ordered by run id (models by model id) before
//! assembly, so results do not depend on the order runs were listed in.

mod runset;

pub use runset::{Axis, LoadedRun, RunSet, RunSetFile};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{cohens_kappa, icc, krippendorff_alpha, MetricReport, RatingsMatrix, Scale};
use crate::pipeline::PipelineError;
use crate::promptbook::VariableSpec;
use runset::is_numeric;

#[derive(Debug, thiserror::Error)]
pub enum RobustnessError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Spread of the values a document received across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dispersion {
    /// Mean over documents of the modal value's share of that document's answers.
    MajorityShare { value: Option<f64> },
    /// Mean over documents of the sample standard deviation across runs.
    StandardDeviation { value: Option<f64> },
}

/// Agreement of one variable across the runs of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableStability {
    pub variable: String,
    /// Krippendorff's alpha, runs as raters.
    pub alpha: MetricReport,
    /// ICC(2,1) on complete documents (numeric variables only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icc: Option<MetricReport>,
    /// Fraction of documents with at least two answers.
    pub coverage: f64,
    pub dispersion: Dispersion,
}

/// One paraphrase compared with the baseline prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantScore {
    pub run_id: String,
    pub promptbook_id: String,
    pub alpha: MetricReport,
    pub coverage: f64,
}

/// Prompt stability of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptStability {
    pub variable: String,
    pub variants: Vec<VariantScore>,
    /// Mean baseline-vs-variant alpha over variants where it is defined.
    pub pss: Option<f64>,
}

/// Pairwise and pooled agreement of one variable across models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAgreement {
    pub variable: String,
    pub models: Vec<String>,
    /// Cohen's kappa for each pair of models; diagonal is 1.
    pub kappa: Vec<Vec<Option<f64>>>,
    /// Krippendorff's alpha with every model as a rater.
    pub pooled_alpha: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub axis: Axis,
    /// Run ids in the order used as raters.
    pub runs: Vec<String>,
    pub units: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variables: Vec<VariableStability>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prompt_stability: Vec<PromptStability>,
    /// Unweighted mean of per-variable PSS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pss: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub model_agreement: Vec<ModelAgreement>,
}

fn scale_of(spec: &VariableSpec) -> Scale {
    if is_numeric(spec) {
        Scale::Interval
    } else {
        Scale::Nominal
    }
}

/// Documents × runs matrix of one variable.
pub fn assemble(runs: &[&LoadedRun], units: &[String], spec: &VariableSpec) -> RatingsMatrix {
    let cells = units
        .iter()
        .map(|u| runs.iter().map(|r| r.value(u, &spec.name)).collect())
        .collect();
    RatingsMatrix::new(
        units.to_vec(),
        runs.iter().map(|r| r.run_id().to_string()).collect(),
        cells,
        scale_of(spec),
    )
    .expect("matrix shape follows units and runs")
}

fn alpha_report(m: &RatingsMatrix) -> MetricReport {
    let n = (0..m.n_units())
        .filter(|&i| (0..m.n_raters()).filter(|&j| m.cell(i, j).is_some()).count() >= 2)
        .count();
    match krippendorff_alpha(m) {
        Ok(a) => {
            let r = MetricReport::new("krippendorff_alpha", a.alpha, n);
            if a.degenerate {
                r.with_flag("degenerate: all values identical")
            } else {
                r
            }
        }
        Err(e) => MetricReport::undefined("krippendorff_alpha", n, e.to_string()),
    }
}

fn icc_report(m: &RatingsMatrix) -> MetricReport {
    let complete: Vec<usize> = (0..m.n_units())
        .filter(|&i| (0..m.n_raters()).all(|j| m.cell(i, j).is_some()))
        .collect();
    let sub = m.select_units(&complete);
    if complete.is_empty() {
        return MetricReport::undefined("icc(2,1)", 0, "no document answered in every run");
    }
    match icc(&sub) {
        Ok(r) => {
            let rep = MetricReport::new("icc(2,1)", r.icc, complete.len());
            if r.degenerate {
                rep.with_flag("degenerate: zero total variance")
            } else {
                rep
            }
        }
        Err(e) => MetricReport::undefined("icc(2,1)", complete.len(), e.to_string()),
    }
}

fn majority_share(m: &RatingsMatrix) -> Option<f64> {
    let shares: Vec<f64> = m
        .rows()
        .iter()
        .filter_map(|row| {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for v in row.iter().flatten() {
                *counts.entry(v.as_str()).or_default() += 1;
            }
            let total: usize = counts.values().sum();
            let top = counts.values().max()?;
            Some(*top as f64 / total as f64)
        })
        .collect();
    (!shares.is_empty()).then(|| shares.iter().sum::<f64>() / shares.len() as f64)
}

fn mean_sd(m: &RatingsMatrix) -> Option<f64> {
    let sds: Vec<f64> = m
        .rows()
        .iter()
        .filter_map(|row| {
            let xs: Vec<f64> = row.iter().flatten().filter_map(|v| v.parse().ok()).collect();
            if xs.len() < 2 {
                return None;
            }
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            Some(var.sqrt())
        })
        .collect();
    (!sds.is_empty()).then(|| sds.iter().sum::<f64>() / sds.len() as f64)
}

fn sorted_by_id(rs: &RunSet) -> Vec<&LoadedRun> {
    let mut runs: Vec<&LoadedRun> = rs.runs.iter().collect();
    runs.sort_by(|a, b| a.run_id().cmp(b.run_id()));
    runs
}

/// Agreement of repeated runs of one prompt on one model.
///
/// Requires at least two runs with the same promptbook hash and sampling
/// configuration. Every variable gets alpha (interval for numeric, nominal
/// otherwise); numeric variables also get ICC(2,1) and the mean standard
/// deviation, the others the mean majority-vote share.
pub fn intra_prompt_stability(rs: &RunSet) -> Result<StabilityReport, RobustnessError> {
    if rs.runs.len() < 2 {
        return Err(RobustnessError::Precondition(format!(
            "intra-prompt stability needs at least 2 runs, got {}",
            rs.runs.len()
        )));
    }
    rs.check_same_corpus()?;
    let first = &rs.runs[0];
    for r in &rs.runs[1..] {
        if r.manifest.promptbook_hash != first.manifest.promptbook_hash {
            return Err(RobustnessError::ProtocolViolation(format!(
                "runs {} and {} used different promptbooks",
                first.run_id(),
                r.run_id()
            )));
        }
        if r.manifest.model.sampling_signature() != first.manifest.model.sampling_signature() {
            return Err(RobustnessError::ProtocolViolation(format!(
                "runs {} and {} used different model settings",
                first.run_id(),
                r.run_id()
            )));
        }
    }
    let runs = sorted_by_id(rs);
    let units = rs.units();
    let variables = first
        .manifest
        .variables
        .iter()
        .map(|spec| {
            let m = assemble(&runs, &units, spec);
            let numeric = is_numeric(spec);
            VariableStability {
                variable: spec.name.clone(),
                alpha: alpha_report(&m),
                icc: numeric.then(|| icc_report(&m)),
                coverage: m.pairable_fraction(),
                dispersion: if numeric {
                    Dispersion::StandardDeviation { value: mean_sd(&m) }
                } else {
                    Dispersion::MajorityShare { value: majority_share(&m) }
                },
            }
        })
        .collect();
    Ok(StabilityReport {
        axis: Axis::Repeat,
        runs: runs.iter().map(|r| r.run_id().to_string()).collect(),
        units: units.len(),
        variables,
        baseline: None,
        prompt_stability: Vec::new(),
        pss: None,
        model_agreement: Vec::new(),
    })
}

/// Prompt stability score (PSS): agreement between a baseline prompt and
/// each paraphrase, averaged over paraphrases.
///
/// For every baseline variable and every variant, alpha is computed on the
/// documents × {baseline, variant} matrix. A variable's PSS is the mean of
/// its defined alphas; the overall PSS is the unweighted mean over variables.
pub fn inter_prompt_stability(rs: &RunSet) -> Result<StabilityReport, RobustnessError> {
    let baseline_id = rs
        .baseline
        .as_deref()
        .ok_or_else(|| RobustnessError::Precondition("no baseline run given".into()))?;
    let baseline = rs
        .runs
        .iter()
        .find(|r| r.run_id() == baseline_id)
        .ok_or_else(|| RobustnessError::Precondition(format!("baseline run {baseline_id} not in the set")))?;
    let mut variants: Vec<&LoadedRun> = rs.runs.iter().filter(|r| r.run_id() != baseline_id).collect();
    if variants.is_empty() {
        return Err(RobustnessError::Precondition("no prompt variants besides the baseline".into()));
    }
    variants.sort_by(|a, b| a.run_id().cmp(b.run_id()));
    rs.check_same_corpus()?;
    for v in &variants {
        if v.manifest.model.sampling_signature() != baseline.manifest.model.sampling_signature() {
            return Err(RobustnessError::ProtocolViolation(format!(
                "variant {} used different model settings than the baseline",
                v.run_id()
            )));
        }
        if let Some(missing) = baseline.manifest.variables.iter().find(|b| v.variable(&b.name).is_none()) {
            return Err(RobustnessError::ProtocolViolation(format!(
                "variant {} lacks baseline variable {}",
                v.run_id(),
                missing.name
            )));
        }
    }

    let units = rs.units();
    let mut prompt_stability = Vec::new();
    for spec in &baseline.manifest.variables {
        let scores: Vec<VariantScore> = variants
            .iter()
            .map(|v| {
                let m = assemble(&[baseline, v], &units, spec);
                VariantScore {
                    run_id: v.run_id().to_string(),
                    promptbook_id: v.manifest.promptbook_id.clone(),
                    alpha: alpha_report(&m),
                    coverage: m.pairable_fraction(),
                }
            })
            .collect();
        let defined: Vec<f64> = scores.iter().filter_map(|s| s.alpha.value).collect();
        prompt_stability.push(PromptStability {
            variable: spec.name.clone(),
            pss: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            variants: scores,
        });
    }
    let per_var: Vec<f64> = prompt_stability.iter().filter_map(|p| p.pss).collect();
    let mut runs = vec![baseline.run_id().to_string()];
    runs.extend(variants.iter().map(|v| v.run_id().to_string()));
    Ok(StabilityReport {
        axis: Axis::PromptVariant,
        runs,
        units: units.len(),
        variables: Vec::new(),
        baseline: Some(baseline_id.to_string()),
        pss: (!per_var.is_empty()).then(|| per_var.iter().sum::<f64>() / per_var.len() as f64),
        prompt_stability,
        model_agreement: Vec::new(),
    })
}

/// Agreement between models given the same promptbook: Cohen's kappa for
/// every pair and alpha pooled over all models.
pub fn inter_model_agreement(rs: &RunSet) -> Result<StabilityReport, RobustnessError> {
    if rs.runs.len() < 2 {
        return Err(RobustnessError::Precondition(format!(
            "inter-model agreement needs at least 2 runs, got {}",
            rs.runs.len()
        )));
    }
    rs.check_same_corpus()?;
    let mut runs: Vec<&LoadedRun> = rs.runs.iter().collect();
    runs.sort_by(|a, b| a.manifest.model.model_id.cmp(&b.manifest.model.model_id));
    for pair in runs.windows(2) {
        if pair[0].manifest.model.model_id == pair[1].manifest.model.model_id {
            return Err(RobustnessError::ProtocolViolation(format!(
                "model {} appears in more than one run",
                pair[0].manifest.model.model_id
            )));
        }
        if pair[0].manifest.promptbook_hash != pair[1].manifest.promptbook_hash {
            return Err(RobustnessError::ProtocolViolation(format!(
                "runs {} and {} used different promptbooks",
                pair[0].run_id(),
                pair[1].run_id()
            )));
        }
    }
    let units = rs.units();
    let models: Vec<String> = runs.iter().map(|r| r.manifest.model.model_id.clone()).collect();
    let model_agreement = runs[0]
        .manifest
        .variables
        .iter()
        .map(|spec| {
            let m = assemble(&runs, &units, spec);
            let k = runs.len();
            let mut kappa = vec![vec![None; k]; k];
            #[allow(clippy::needless_range_loop)]
            for a in 0..k {
                kappa[a][a] = Some(1.0);
                for b in a + 1..k {
                    let v = cohens_kappa(&m.column(a), &m.column(b)).ok().map(|r| r.kappa);
                    kappa[a][b] = v;
                    kappa[b][a] = v;
                }
            }
            ModelAgreement {
                variable: spec.name.clone(),
                models: models.clone(),
                kappa,
                pooled_alpha: alpha_report(&m),
            }
        })
        .collect();
    Ok(StabilityReport {
        axis: Axis::Model,
        runs: runs.iter().map(|r| r.run_id().to_string()).collect(),
        units: units.len(),
        variables: Vec::new(),
        baseline: None,
        prompt_stability: Vec::new(),
        pss: None,
        model_agreement,
    })
}

/// Dispatch on the set's axis.
pub fn evaluate(rs: &RunSet) -> Result<StabilityReport, RobustnessError> {
    match rs.axis {
        Axis::Repeat => intra_prompt_stability(rs),
        Axis::PromptVariant => inter_prompt_stability(rs),
        Axis::Model => inter_model_agreement(rs),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".into(), |v| format!("{v:.3}"))
}

impl StabilityReport {
    /// Plain-text rendering.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Axis: {} ({} runs, {} documents)", self.axis.as_str(), self.runs.len(), self.units);
        for v in &self.variables {
            let disp = match &v.dispersion {
                Dispersion::MajorityShare { value } => format!("majority share {}", fmt_opt(*value)),
                Dispersion::StandardDeviation { value } => format!("mean SD {}", fmt_opt(*value)),
            };
            let icc = v.icc.as_ref().map(|r| format!(", ICC(2,1) {}", r.summary())).unwrap_or_default();
            let _ = writeln!(
                s,
                "{}: alpha {}{icc}, coverage {:.2}, {disp}",
                v.variable,
                v.alpha.summary(),
                v.coverage
            );
        }
        for p in &self.prompt_stability {
            let _ = writeln!(s, "{}: PSS {}", p.variable, fmt_opt(p.pss));
            for v in &p.variants {
                let _ = writeln!(s, "  vs {} ({}): alpha {}", v.run_id, v.promptbook_id, v.alpha.summary());
            }
        }
        if self.axis == Axis::PromptVariant {
            let _ = writeln!(s, "Overall PSS: {}", fmt_opt(self.pss));
        }
        for m in &self.model_agreement {
            let _ = writeln!(s, "{}: pooled alpha {}, pairwise kappa:", m.variable, m.pooled_alpha.summary());
            for (a, row) in m.kappa.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|k| format!("{:>7}", fmt_opt(*k))).collect();
                let _ = writeln!(s, "  {:<24}{}", m.models[a], cells.join(" "));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests;
