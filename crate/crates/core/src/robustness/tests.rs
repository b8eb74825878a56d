use super::*;
use crate::gateway::ModelConfig;
use crate::pipeline::{LoadedRow, LoadedTable, RowStatus, RunCounts, RunManifest};
use crate::promptbook::{AnswerType, TaskKind, DEFAULT_MISSING_SENTINEL};

fn spec(name: &str, answer_type: AnswerType) -> VariableSpec {
    VariableSpec {
        name: name.into(),
        task: TaskKind::Annotation,
        answer_type,
        categories: vec![],
        missing_sentinel: DEFAULT_MISSING_SENTINEL.into(),
    }
}

fn run(id: &str, model: &str, columns: &[(&str, AnswerType, &[&str])]) -> LoadedRun {
    let n = columns[0].2.len();
    let docs: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
    let manifest = RunManifest {
        run_id: id.into(),
        tool_version: String::new(),
        promptbook_id: "pb".into(),
        promptbook_version: "1".into(),
        promptbook_hash: "h".into(),
        variables: columns.iter().map(|(v, t, _)| spec(v, *t)).collect(),
        model: ModelConfig { model_id: model.into(), ..Default::default() },
        backend: "replay".into(),
        seed: 0,
        repeat_index: 1,
        pilot: false,
        corpus_digest: "c".into(),
        corpus_size: n,
        started: String::new(),
        finished: None,
        processed_ids: docs.clone(),
        counts: RunCounts::default(),
    };
    let table = LoadedTable {
        variables: columns.iter().map(|(v, _, _)| v.to_string()).collect(),
        rows: docs
            .iter()
            .enumerate()
            .map(|(i, d)| LoadedRow {
                doc_id: d.clone(),
                status: Some(RowStatus::Ok),
                cells: columns
                    .iter()
                    .map(|(_, _, vals)| Some(vals[i].to_string()).filter(|s| !s.is_empty()))
                    .collect(),
            })
            .collect(),
    };
    LoadedRun { manifest, table }
}

const BIN: &[&str] = &["1", "0", "1", "1", "0", "0", "1", "0"];
const NUM: &[&str] = &["1.5", "2", "7", "3", "3.5", "9", "4", "0"];
const CAT: &[&str] = &["a", "b", "c", "a", "a", "b", "c", "c"];

fn cols() -> Vec<(&'static str, AnswerType, &'static [&'static str])> {
    vec![
        ("AN_BIN", AnswerType::Binary, BIN),
        ("AN_NUM", AnswerType::Decimal, NUM),
        ("AN_CAT", AnswerType::Categorical, CAT),
    ]
}

#[test]
fn identical_repeats_are_perfectly_stable() {
    let rs = RunSet::new(Axis::Repeat, (0..3).map(|i| run(&format!("r{i}"), "m", &cols())).collect(), None);
    let rep = intra_prompt_stability(&rs).unwrap();
    for v in &rep.variables {
        assert_eq!(v.alpha.value, Some(1.0), "{}", v.variable);
        assert_eq!(v.coverage, 1.0);
    }
    let num = rep.variables.iter().find(|v| v.variable == "AN_NUM").unwrap();
    assert_eq!(num.icc.as_ref().unwrap().value.map(|x| (x * 1e12).round() / 1e12), Some(1.0));
    assert_eq!(num.dispersion, Dispersion::StandardDeviation { value: Some(0.0) });
    let cat = rep.variables.iter().find(|v| v.variable == "AN_CAT").unwrap();
    assert_eq!(cat.dispersion, Dispersion::MajorityShare { value: Some(1.0) });
    assert!(cat.icc.is_none());
}

#[test]
fn repeats_require_same_settings() {
    let mut b = run("r1", "m", &cols());
    b.manifest.model.temperature = 0.7;
    let rs = RunSet::new(Axis::Repeat, vec![run("r0", "m", &cols()), b], None);
    assert!(matches!(intra_prompt_stability(&rs), Err(RobustnessError::ProtocolViolation(_))));
    let rs = RunSet::new(Axis::Repeat, vec![run("r0", "m", &cols())], None);
    assert!(matches!(intra_prompt_stability(&rs), Err(RobustnessError::Precondition(_))));
}

#[test]
fn flipped_cell_matches_direct_alpha() {
    let flipped: Vec<&str> = BIN.iter().enumerate().map(|(i, v)| if i == 0 { "0" } else { v }).collect();
    let a = run("r0", "m", &[("AN_BIN", AnswerType::Binary, BIN)]);
    let b = run("r1", "m", &[("AN_BIN", AnswerType::Binary, &flipped)]);
    let rs = RunSet::new(Axis::Repeat, vec![a.clone(), b.clone()], None);
    let rep = intra_prompt_stability(&rs).unwrap();
    let m = assemble(&[&a, &b], &rs.units(), &a.manifest.variables[0]);
    let direct = krippendorff_alpha(&m).unwrap().alpha;
    assert_eq!(rep.variables[0].alpha.value, Some(direct));
    assert!(direct < 1.0);

    let swapped = RunSet::new(Axis::Repeat, vec![b, a], None);
    assert_eq!(intra_prompt_stability(&swapped).unwrap(), rep);
}

#[test]
fn pss_of_identical_variants_is_one() {
    let rs = RunSet::new(
        Axis::PromptVariant,
        vec![run("base", "m", &cols()), run("v1", "m", &cols()), run("v2", "m", &cols())],
        Some("base".into()),
    );
    let rep = inter_prompt_stability(&rs).unwrap();
    assert_eq!(rep.pss, Some(1.0));
    assert_eq!(rep.prompt_stability[0].variants.len(), 2);
}

#[test]
fn pss_preconditions() {
    let rs = RunSet::new(Axis::PromptVariant, vec![run("base", "m", &cols())], Some("base".into()));
    assert!(matches!(inter_prompt_stability(&rs), Err(RobustnessError::Precondition(_))));
    let rs = RunSet::new(
        Axis::PromptVariant,
        vec![run("base", "m", &cols()), run("v1", "m", &cols()[..1])],
        Some("base".into()),
    );
    let err = inter_prompt_stability(&rs).unwrap_err();
    assert!(err.to_string().contains("lacks baseline variable AN_NUM"), "{err}");
}

#[test]
fn model_matrix_and_errors() {
    let rs = RunSet::new(Axis::Model, vec![run("a", "m1", &cols()), run("b", "m2", &cols())], None);
    let rep = inter_model_agreement(&rs).unwrap();
    for m in &rep.model_agreement {
        assert!(m.kappa.iter().flatten().all(|k| *k == Some(1.0)));
        assert_eq!(m.pooled_alpha.value, Some(1.0));
    }
    let dup = RunSet::new(Axis::Model, vec![run("a", "m1", &cols()), run("b", "m1", &cols())], None);
    assert!(matches!(inter_model_agreement(&dup), Err(RobustnessError::ProtocolViolation(_))));
    let single = RunSet::new(Axis::Model, vec![run("a", "m1", &cols())], None);
    assert!(matches!(inter_model_agreement(&single), Err(RobustnessError::Precondition(_))));
}

#[test]
fn missing_answers_reduce_coverage() {
    let holes: Vec<&str> = BIN.iter().enumerate().map(|(i, v)| if i < 2 { "" } else { v }).collect();
    let rs = RunSet::new(
        Axis::Repeat,
        vec![run("r0", "m", &[("AN_BIN", AnswerType::Binary, BIN)]), run("r1", "m", &[("AN_BIN", AnswerType::Binary, &holes)])],
        None,
    );
    let rep = intra_prompt_stability(&rs).unwrap();
    assert_eq!(rep.variables[0].coverage, 0.75);
    assert_eq!(rep.variables[0].alpha.n, 6);
}
