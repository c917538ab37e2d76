use std::path::Path;
use std::process::{Command, Output};

use confound_audit_core::report::conditional_histograms;
use confound_audit_core::simgen::{gen_walkthrough_regression, SimKind, SimSpec};

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confound-audit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CONFOUND_AUDIT_JOBS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = cli(&["simulate", "--kind", "swap", "--n", "100", "--seed", "1", "-o", "s.csv"], d);
    assert_eq!(o.status.code(), Some(0));

    let o = cli(&["audit", "--data", "s.csv", "--seed", "1"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[usage]: "), "{}", stderr(&o));

    let o = cli(&["audit", "--data", "s.csv", "--target", "y"], d);
    assert_eq!(o.status.code(), Some(1), "seed is mandatory");

    let o = cli(&["audit", "--bogus"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[usage]: "));

    let o = cli(&["simulate", "--kind", "swap", "--n", "102", "--seed", "1", "-o", "t.csv"], d);
    assert_eq!(o.status.code(), Some(1), "n must be divisible by 4");
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = cli(&["audit", "--data", "missing.csv", "--target", "y", "--seed", "1"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[data]: missing.csv"));

    std::fs::write(d.join("r.json"), r#"{"schema_version": 7}"#).unwrap();
    let o = cli(&["report", "--input", "r.json"], d);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(d.join("bad.csv"), "x,y\n1,0\nfoo,1\n2,0\n").unwrap();
    let o = cli(&["audit", "--data", "bad.csv", "--target", "y", "--taco", "--seed", "1"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_and_sidecar_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a.csv", "b.csv"] {
        let o = cli(&["simulate", "--kind", "swap", "--n", "1000", "--seed", "7", "-o", out], d);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(d.join("b.csv")).unwrap());
    assert_eq!(a.lines().count(), 1001);

    let sidecar = std::fs::read_to_string(d.join("a.json")).unwrap();
    let spec: SimSpec = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(spec, SimSpec::new(SimKind::BinaryBalanced, 1000, 7));
    assert_eq!(serde_json::to_string_pretty(&spec).unwrap() + "\n", sidecar);
}

#[test]
fn rounded_and_extreme_companions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = cli(&["simulate", "--kind", "rounded_feature", "--n", "50", "--seed", "1", "-o", "r.csv"], d);
    assert!(o.status.success());
    assert!(d.join("r_rounded.csv").exists());
    let o = cli(
        &["simulate", "--kind", "opposing_extremes", "--n", "100", "--seed", "1", "--exclude-extremes-test", "-o", "e.csv"],
        d,
    );
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(d.join("e_extreme.csv")).unwrap().lines().count(), 101);
    assert_eq!(std::fs::read_to_string(d.join("e_extreme_free_test.csv")).unwrap().lines().count(), 31);
}

#[test]
fn swap_audit_fails_on_leakage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cli(&["simulate", "--kind", "swap", "--n", "400", "--seed", "3", "-o", "s.csv"], d);
    let args = [
        "audit", "--data", "s.csv", "--target", "y", "--strata", "stratum", "--taco", "--models", "tree",
        "--swap", "train", "--repeats", "2", "--seed", "42", "--out-dir", "out",
    ];
    let o = cli(&args, d);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "verdict: leakage_strong");
    let mut strict = args.to_vec();
    strict.push("--fail-on-leakage");
    assert_eq!(cli(&strict, d).status.code(), Some(3));
    for f in ["report.json", "report.md", "fold_scores.csv"] {
        assert!(d.join("out").join(f).exists());
    }
    let csv = std::fs::read_to_string(d.join("out/fold_scores.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("repeat,fold,variant,model,score"));
    // Chance reference plus five variants, ten folds each.
    assert_eq!(csv.lines().count(), 1 + 6 * 10);
}

#[test]
fn markdown_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = cli(
        &[
            "audit", "--sim", "swap", "--sim-n", "200", "--taco", "--models", "tree,linear", "--repeats", "1",
            "--seed", "5", "--out-dir", "o",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = cli(&["report", "--input", "o/report.json", "--format", "md"], d);
    assert!(o.status.success());
    let md = String::from_utf8(o.stdout).unwrap();
    let section = md.split("## Scores").nth(1).unwrap().split("## Comparisons").next().unwrap();
    let rows = section.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| variant")).count();
    assert_eq!(rows, 10);
    assert_eq!(md, std::fs::read_to_string(d.join("o/report.md")).unwrap());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.json"),
        r#"{"sim": {"kind": "binary_balanced", "n": 200}, "taco": true, "models": ["tree", {"kind": "forest", "n_trees": 5}],
            "repeats": 2, "seed": 1, "jobs": 1, "out_dir": "cfg"}"#,
    )
    .unwrap();
    let o = cli(&["audit", "--config", "run.json", "--repeats", "1"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("cfg/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["scheme"]["repeats"], 1);
    assert_eq!(report["config"]["models"][1]["n_trees"], 5);
    assert_eq!(report["schema_version"], 1);

    std::fs::write(d.join("bad.json"), r#"{"seeed": 1}"#).unwrap();
    assert_eq!(cli(&["audit", "--config", "bad.json"], d).status.code(), Some(1));
}

#[test]
fn jobs_environment_variable_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let run = |jobs: &str| {
        Command::new(env!("CARGO_BIN_EXE_confound-audit"))
            .args(["audit", "--sim", "swap", "--sim-n", "100", "--taco", "--models", "tree", "--repeats", "1"])
            .args(["--seed", "2", "--out-dir", "j"])
            .current_dir(dir.path())
            .env("CONFOUND_AUDIT_JOBS", jobs)
            .output()
            .unwrap()
    };
    assert!(run("2").status.success());
    assert_eq!(run("many").status.code(), Some(1));
}

#[test]
fn histograms_cover_every_row_and_overlap_shrinks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = cli(&["simulate", "--kind", "walkthrough", "--n", "1000", "--seed", "4", "-o", "w.csv"], d);
    assert!(o.status.success());
    let o = cli(
        &["report", "--data", "w.csv", "--target", "y", "--histograms", "x,c", "-o", "h.csv"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(d.join("h.csv")).unwrap();
    let mut totals = std::collections::BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        *totals.entry(f[0].to_string()).or_insert(0usize) += f[5].parse::<usize>().unwrap();
    }
    assert_eq!(totals.values().copied().collect::<Vec<_>>(), vec![1000, 1000]);
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 30);

    for seed in 0..5 {
        let data = gen_walkthrough_regression(&SimSpec::new(SimKind::WalkthroughRegression, 1000, seed)).unwrap();
        let h = conditional_histograms(&data, "x", "c", 30).unwrap();
        assert!(h.after.overlap().unwrap() < h.before.overlap().unwrap());
    }
}
