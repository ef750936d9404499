use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use consensus_core::{certify, run, theorem_bounds, BoundInputs, GainSet, ScenarioConfig};

fn consensus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_consensus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value of a `key = value` line.
fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| {
            let (k, v) = l.split_once('=')?;
            (k.trim() == key).then(|| v.trim().to_string())
        })
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .map(|rd| {
            rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn gains_prints_binomial_matrices() {
    let o = consensus(&["gains", "--q", "3", "--m", "1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(
        s.contains("K_c =\n    1.000000   3.000000   3.000000"),
        "{s}"
    );
    assert!(field(&s, "residual_p").parse::<f64>().unwrap() < 1e-10);
    assert_eq!(
        field(&s, "binomial_deviation_k_o").parse::<f64>().unwrap(),
        0.0
    );

    let csv = stdout(&consensus(&["gains", "--q", "2", "--m", "2", "--csv"]));
    // 4 P + 4 Q, each 4x4, plus K_o 4x2 and K_c 2x4
    assert_eq!(csv.lines().count(), 1 + 16 + 16 + 8 + 8);
}

#[test]
fn strict_bounds_exit_four_when_conditions_fail() {
    let o = consensus(&["bounds"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "all_conditions"), "false");

    let o = consensus(&["bounds", "--strict"]);
    assert_eq!(o.status.code(), Some(4));

    let o = consensus(&["bounds", "--strict", "--scenario", "certified_small"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "all_conditions"), "true");
}

#[test]
fn bounds_match_core() {
    let cfg = ScenarioConfig::bundled("chua_noisy").unwrap();
    let inputs = BoundInputs::new(
        certify(&cfg.topology).unwrap(),
        GainSet::synthesize(cfg.bs).unwrap(),
        cfg.l_phi,
        cfg.tuning,
        &cfg.disturbances,
        cfg.initial_states().errors(&cfg.topology),
    );
    let r = theorem_bounds(&inputs).unwrap();
    let s = stdout(&consensus(&["bounds", "--scenario", "chua_noisy"]));
    for (key, want) in [
        ("c_star", r.c_star),
        ("xi_star", r.xi_star),
        ("tau_max_bound", r.tau_max_bound),
        ("chi1", r.chi1),
        ("envelope_steady", r.envelope.steady_state()),
    ] {
        let got: f64 = field(&s, key).parse().unwrap();
        assert!(
            (got - want).abs() <= 1e-5 * want.abs(),
            "{key}: {got} vs {want}"
        );
    }
}

#[test]
fn simulate_is_deterministic_and_matches_core() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = consensus(&[
            "simulate",
            "--scenario",
            "chua_noisy",
            "--horizon",
            "1.5",
            "--seed",
            "7",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let names = files(a.path());
    assert_eq!(names, files(b.path()));
    let svgs = names.iter().filter(|n| n.ends_with(".svg")).count();
    assert!(svgs >= 5, "{names:?}");
    for n in &names {
        assert_eq!(
            fs::read(a.path().join(n)).unwrap(),
            fs::read(b.path().join(n)).unwrap(),
            "{n} differs"
        );
    }
    let svg = fs::read_to_string(a.path().join("mean_error.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));

    let mut cfg = ScenarioConfig::bundled("chua_noisy").unwrap();
    cfg.horizon = 1.5;
    cfg.seed = 7;
    let tr = run(&cfg).unwrap();
    let summary = fs::read_to_string(a.path().join("summary.txt")).unwrap();
    let got: f64 = field(&summary, "final_mean_error").parse().unwrap();
    let want = *tr.metrics.mean_position_error.last().unwrap();
    assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
    assert_eq!(
        fs::read_to_string(a.path().join("trace.csv")).unwrap(),
        tr.trace_csv()
    );
}

#[test]
fn malformed_config_exits_two_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[system]\nq = 2\nm = \"three\"\n").unwrap();
    let out = dir.path().join("out");
    let o = consensus(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert!(files(&out).is_empty());

    let o = consensus(&[
        "simulate",
        "--scenario",
        "nope",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = consensus(&["simulate", "--dt", "-1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(files(&out).is_empty());
}

#[test]
fn blowup_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hot.toml");
    let text = consensus_core::sim::scenario::BUNDLED
        .iter()
        .find(|(n, _)| *n == "chua_clean")
        .unwrap()
        .1
        .replace("blowup_guard = 1e9", "blowup_guard = 2.0");
    assert!(text.contains("blowup_guard = 2.0"));
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let o = consensus(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(files(&out).is_empty());
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = consensus(&[
        "sweep",
        "--param",
        "lambda",
        "--values",
        "1.5,2,3",
        "--seeds",
        "2",
        "--horizon",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("lambda,1.5,2,"));
    for r in &rows[1..] {
        let mean: f64 = r.split(',').nth(3).unwrap().parse().unwrap();
        assert!(mean.is_finite() && mean > 0.0);
    }
}
