//! The command-line workflow end to end: lint, estimate, pilot, run,
//! validate, stability and report, all on the mock backend.
//!
//! cargo run --example cli_workflow

use std::path::Path;

use llmcoder::cli::run_cli;

fn main() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/reviews");
    let book = data.join("promptbook.json");
    let docs = data.join("docs");
    let gold = data.join("gold.csv");
    let root = std::env::temp_dir().join(format!("llmcoder-example-cli-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&root);
    let p = |name: &str| root.join(name).display().to_string();
    let (book, docs, gold) = (book.display().to_string(), docs.display().to_string(), gold.display().to_string());
    let shared = ["--promptbook", &book, "--corpus", &docs, "--backend", "mock"];

    let mut steps: Vec<Vec<String>> = vec![
        vec!["lint".into(), book.clone()],
        vec!["estimate".into()],
        vec!["pilot".into(), "--n".into(), "4".into(), "--out".into(), p("pilot")],
    ];
    for k in 1..=3 {
        steps.push(vec!["run".into(), "--repeat-index".into(), k.to_string(), "--out".into(), p(&format!("run{k}"))]);
    }
    steps.push(vec!["validate".into(), "--run".into(), p("run1"), "--gold".into(), gold]);
    steps.push(vec![
        "stability".into(),
        "--runs".into(),
        p("run1"),
        p("run2"),
        p("run3"),
        "--out".into(),
        p("run1"),
    ]);
    steps.push(vec!["report".into(), "--dir".into(), p("run1")]);

    for step in steps {
        let mut argv = vec!["llmcoder".to_string()];
        argv.extend(step.iter().cloned());
        if step[0] != "lint" {
            argv.extend(shared.iter().map(|s| s.to_string()));
        }
        println!("$ {}", argv.join(" "));
        let code = run_cli(argv);
        println!("(exit {code})\n");
    }
    println!("outputs under {}", root.display());
}
