//! Scoring a run against a gold-standard table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::{
    accuracy, bootstrap_ci, cohens_kappa, confusion, icc, krippendorff_alpha, mae,
    precision_recall_f1, Averaging, MetricError, MetricReport, PrfTarget, RatingsMatrix, Scale,
};
use crate::pipeline::LoadedTable;
use crate::promptbook::{normalize_whitespace, AnswerType, TaskKind, VariableSpec};
use crate::robustness::LoadedRun;

/// `{variable -> {metric -> report}}` for one run against one gold file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub run_id: String,
    /// Documents present in both the gold file and the run.
    pub units: usize,
    pub bootstrap_replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub variables: BTreeMap<String, BTreeMap<String, MetricReport>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    /// Restrict scoring to these variables.
    pub variables: Option<Vec<String>>,
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { variables: None, replicates: 1000, level: 0.95, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("gold file has no column for variable `{0}`")]
    MissingGoldColumn(String),
    #[error("variable `{0}` is not in the run's promptbook")]
    UnknownVariable(String),
    #[error("gold file shares no documents with the run")]
    NoOverlap,
}

/// Variables compared with gold: annotation and extraction variables.
/// Summaries have no single correct answer and are left out.
pub fn scorable(spec: &VariableSpec) -> bool {
    spec.task != TaskKind::Summarization
}

fn ci_for<F>(n: usize, metric: F, opts: &ValidationOptions) -> Result<crate::metrics::ConfidenceInterval, MetricError>
where
    F: Fn(&[usize]) -> Result<f64, MetricError>,
{
    bootstrap_ci(n, metric, opts.replicates, opts.level, opts.seed)
}

fn with_ci(report: MetricReport, ci: Result<crate::metrics::ConfidenceInterval, MetricError>) -> MetricReport {
    match ci {
        Ok(ci) => report.with_ci(ci),
        Err(e) => report.with_flag(format!("no interval: {e}")),
    }
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn labels_metrics(gold: &[Option<String>], pred: &[Option<String>], opts: &ValidationOptions) -> BTreeMap<String, MetricReport> {
    let mut out = BTreeMap::new();
    let n = gold.len();
    match confusion(gold, pred) {
        Ok(cm) => {
            let pairs = cm.total() as usize;
            let acc = MetricReport::new("accuracy", accuracy(&cm), pairs);
            let ci = ci_for(n, |idx| Ok(accuracy(&confusion(&pick(gold, idx), &pick(pred, idx))?)), opts);
            out.insert("accuracy".into(), with_ci(acc, ci));

            let prf = precision_recall_f1(&cm, &PrfTarget::Average(Averaging::Macro));
            let flag = |r: MetricReport| if prf.zero_support { r.with_flag("zero_support") } else { r };
            out.insert("precision_macro".into(), flag(MetricReport::new("precision_macro", prf.precision, pairs)));
            out.insert("recall_macro".into(), flag(MetricReport::new("recall_macro", prf.recall, pairs)));
            let f1 = flag(MetricReport::new("f1_macro", prf.f1, pairs)).with_per_class(prf.per_class);
            let ci = ci_for(
                n,
                |idx| {
                    let cm = confusion(&pick(gold, idx), &pick(pred, idx))?;
                    Ok(precision_recall_f1(&cm, &PrfTarget::Average(Averaging::Macro)).f1)
                },
                opts,
            );
            out.insert("f1_macro".into(), with_ci(f1, ci));
        }
        Err(e) => {
            out.insert("accuracy".into(), MetricReport::undefined("accuracy", 0, e.to_string()));
        }
    }
    match cohens_kappa(gold, pred) {
        Ok(k) => {
            let mut r = MetricReport::new("cohens_kappa", k.kappa, k.n);
            if k.degenerate {
                r = r.with_flag("degenerate: one shared label");
            }
            let ci = ci_for(n, |idx| Ok(cohens_kappa(&pick(gold, idx), &pick(pred, idx))?.kappa), opts);
            out.insert("cohens_kappa".into(), with_ci(r, ci));
        }
        Err(e) => {
            out.insert("cohens_kappa".into(), MetricReport::undefined("cohens_kappa", 0, e.to_string()));
        }
    }
    out
}

fn two_rater(gold: &[Option<String>], pred: &[Option<String>], scale: Scale) -> RatingsMatrix {
    let cells = gold.iter().zip(pred).map(|(g, p)| vec![g.clone(), p.clone()]).collect();
    RatingsMatrix::new(
        (0..gold.len()).map(|i| format!("u{i}")).collect(),
        vec!["gold".into(), "model".into()],
        cells,
        scale,
    )
    .expect("two columns per unit")
}

fn alpha_metric(gold: &[Option<String>], pred: &[Option<String>], scale: Scale) -> MetricReport {
    let m = two_rater(gold, pred, scale);
    let n = gold.iter().zip(pred).filter(|(g, p)| g.is_some() && p.is_some()).count();
    match krippendorff_alpha(&m) {
        Ok(a) if a.degenerate => MetricReport::new("krippendorff_alpha", a.alpha, n).with_flag("degenerate"),
        Ok(a) => MetricReport::new("krippendorff_alpha", a.alpha, n),
        Err(e) => MetricReport::undefined("krippendorff_alpha", n, e.to_string()),
    }
}

fn numeric_metrics(gold: &[Option<String>], pred: &[Option<String>], opts: &ValidationOptions) -> BTreeMap<String, MetricReport> {
    let parse = |v: &[Option<String>]| -> Vec<Option<f64>> {
        v.iter().map(|x| x.as_deref().and_then(|s| s.trim().parse().ok())).collect()
    };
    let (g, p) = (parse(gold), parse(pred));
    let mut out = BTreeMap::new();
    match mae(&g, &p) {
        Ok(v) => {
            let n = g.iter().zip(&p).filter(|(a, b)| a.is_some() && b.is_some()).count();
            let ci = ci_for(gold.len(), |idx| mae(&pick(&g, idx), &pick(&p, idx)), opts);
            out.insert("mae".into(), with_ci(MetricReport::new("mae", v, n), ci));
        }
        Err(e) => {
            out.insert("mae".into(), MetricReport::undefined("mae", 0, e.to_string()));
        }
    }
    let complete: Vec<usize> = (0..gold.len()).filter(|&i| g[i].is_some() && p[i].is_some()).collect();
    let m = two_rater(&pick(gold, &complete), &pick(pred, &complete), Scale::Interval);
    let r = if complete.is_empty() {
        MetricReport::undefined("icc(2,1)", 0, "no complete pairs")
    } else {
        match icc(&m) {
            Ok(r) if r.degenerate => MetricReport::new("icc(2,1)", r.icc, r.n).with_flag("degenerate"),
            Ok(r) => MetricReport::new("icc(2,1)", r.icc, r.n),
            Err(e) => MetricReport::undefined("icc(2,1)", complete.len(), e.to_string()),
        }
    };
    out.insert("icc".into(), r);
    out
}

/// Compare a run's table with gold-standard codes.
///
/// Categorical and binary variables get accuracy, macro P/R/F1 (with the
/// per-class table), Cohen's kappa and alpha; integer and decimal
/// variables get MAE, ICC(2,1) and interval alpha; free-text variables get
/// exact-match accuracy after whitespace normalization. Accuracy, F1, kappa
/// and MAE carry percentile bootstrap intervals over documents.
pub fn validate_run(
    run: &LoadedRun,
    gold: &LoadedTable,
    opts: &ValidationOptions,
) -> Result<ValidationReport, ValidationError> {
    let specs: Vec<&VariableSpec> = match &opts.variables {
        Some(names) => names
            .iter()
            .map(|n| run.variable(n).ok_or_else(|| ValidationError::UnknownVariable(n.clone())))
            .collect::<Result<_, _>>()?,
        None => run.manifest.variables.iter().filter(|v| scorable(v)).collect(),
    };
    for s in &specs {
        if gold.column_index(&s.name).is_none() {
            return Err(ValidationError::MissingGoldColumn(s.name.clone()));
        }
    }
    let units: Vec<&str> = gold
        .rows
        .iter()
        .map(|r| r.doc_id.as_str())
        .filter(|d| run.table.row(d).is_some())
        .collect();
    if units.is_empty() {
        return Err(ValidationError::NoOverlap);
    }

    let mut variables = BTreeMap::new();
    for spec in specs {
        let gold_vals: Vec<Option<String>> = units
            .iter()
            .map(|d| gold.value(d, &spec.name, &spec.missing_sentinel).map(|v| v.trim().to_string()))
            .collect();
        let pred_vals: Vec<Option<String>> = units.iter().map(|d| run.value(d, &spec.name)).collect();
        let metrics = match spec.answer_type {
            AnswerType::Binary | AnswerType::Categorical => {
                let mut m = labels_metrics(&gold_vals, &pred_vals, opts);
                m.insert("krippendorff_alpha".into(), alpha_metric(&gold_vals, &pred_vals, Scale::Nominal));
                m
            }
            AnswerType::Integer | AnswerType::Decimal => {
                let mut m = numeric_metrics(&gold_vals, &pred_vals, opts);
                m.insert("krippendorff_alpha".into(), alpha_metric(&gold_vals, &pred_vals, Scale::Interval));
                m
            }
            AnswerType::String => {
                let norm = |v: &[Option<String>]| -> Vec<Option<String>> {
                    v.iter().map(|x| x.as_deref().map(normalize_whitespace)).collect()
                };
                let (g, p) = (norm(&gold_vals), norm(&pred_vals));
                let mut m = BTreeMap::new();
                let report = match confusion(&g, &p) {
                    Ok(cm) => {
                        let r = MetricReport::new("exact_match", accuracy(&cm), cm.total() as usize);
                        let ci = ci_for(g.len(), |idx| Ok(accuracy(&confusion(&pick(&g, idx), &pick(&p, idx))?)), opts);
                        with_ci(r, ci)
                    }
                    Err(e) => MetricReport::undefined("exact_match", 0, e.to_string()),
                };
                m.insert("exact_match".into(), report);
                m
            }
        };
        variables.insert(spec.name.clone(), metrics);
    }
    Ok(ValidationReport {
        run_id: run.run_id().to_string(),
        units: units.len(),
        bootstrap_replicates: opts.replicates,
        level: opts.level,
        seed: opts.seed,
        variables,
    })
}

impl ValidationReport {
    pub fn render_text(&self) -> String {
        let mut s = format!(
            "Validation of run {} on {} documents ({}% intervals, {} bootstrap replicates)\n",
            self.run_id,
            self.units,
            self.level * 100.0,
            self.bootstrap_replicates
        );
        for (var, metrics) in &self.variables {
            s.push_str(&format!("{var}\n"));
            for (name, r) in metrics {
                s.push_str(&format!("  {name:<20} {}\n", r.summary()));
            }
        }
        s
    }
}
