use std::path::Path;

use meta4diag::cli::run_cli;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["meta4diag"];
    argv.extend_from_slice(args);
    let code = run_cli(argv, &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

const TELOMERASE_PRIORS: [&str; 8] =
    ["--var-prior", "PC", "--var-par", "3,0.05", "--cor-prior", "normal", "--cor-par", "0,5"];

fn fit_to(path: &Path) -> Run {
    let mut args = vec!["fit", "--builtin", "Telomerase", "--no-timings", "--threads", "2", "-o"];
    let p = path.to_str().unwrap();
    args.push(p);
    args.extend(TELOMERASE_PRIORS);
    run(&args)
}

#[test]
fn help_and_usage_errors_have_distinct_exit_codes() {
    assert_eq!(run(&["--help"]).code, 0);
    assert_eq!(run(&["fit", "--help"]).code, 0);
    let bad = run(&["fit", "--no-such-flag"]);
    assert_eq!(bad.code, 2);
    assert!(bad.err.contains("--no-such-flag"));
    assert_eq!(run(&["fit", "--builtin", "Telomerase", "--model-type", "7"]).code, 2);
}

#[test]
fn invalid_inputs_exit_with_status_two() {
    let infeasible = run(&["fit", "--builtin", "Telomerase", "--cor-prior", "PC", "--cor-par", "1,-0.2,0.1,-0.8,0.3,_,_"]);
    assert_eq!(infeasible.code, 2);
    assert!(infeasible.err.contains("infeasible contrast"), "{}", infeasible.err);
    assert_eq!(run(&["fit", "--builtin", "Nope"]).code, 2);
    assert_eq!(run(&["fit", "--builtin", "Telomerase", "--var-par", "3,x"]).code, 2);
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "TP,FP,TN,FN\n1,2,3,-4\n").unwrap();
    assert_eq!(run(&["fit", "--data", csv.to_str().unwrap()]).code, 2);
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["fit", "--data", missing.to_str().unwrap()]).code, 1);
}

#[test]
fn fit_prints_the_summary_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let first = fit_to(&a);
    assert_eq!(first.code, 0, "{}", first.err);
    for needle in ["Fixed effects", "mu ", "var_phi", "mean(Se)", "Correlation between mu and nu", "Marginal log-likelihood"] {
        assert!(first.out.contains(needle), "missing {needle}:\n{}", first.out);
    }
    assert_eq!(fit_to(&b).code, 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let fit = a.to_str().unwrap();
    let summary = run(&["summary", "--fit", fit]);
    assert_eq!(summary.code, 0);
    assert!(summary.out.contains("Marginal log-likelihood"));

    let fitted = run(&["fitted", "--fit", fit, "--accuracy-type", "TPR"]);
    assert_eq!(fitted.code, 0, "{}", fitted.err);
    assert!(fitted.out.starts_with("Diagnostic accuracies true positive rate (sensitivity)"));
    let first_row = fitted.out.lines().nth(2).unwrap();
    assert!(first_row.starts_with("Ito_1998"), "{first_row}");
    let csv = run(&["fitted", "--fit", fit, "--accuracy-type", "DOR", "--format", "csv"]);
    assert_eq!(csv.out.lines().count(), 11);
}

#[test]
fn plots_are_written_and_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("fit.json");
    assert_eq!(fit_to(&json).code, 0);
    let fit = json.to_str().unwrap();
    let render = |sub: &str, out_dir: &Path, extra: &[&str]| {
        let mut args = vec![sub, "--fit", fit, "--out-dir", out_dir.to_str().unwrap(), "-o", "plot.svg"];
        args.extend_from_slice(extra);
        let r = run(&args);
        assert_eq!(r.code, 0, "{sub}: {}", r.err);
        std::fs::read_to_string(out_dir.join("plot.svg")).unwrap()
    };
    for (sub, extra) in [
        ("sroc", &["--sroc-type", "3"][..]),
        ("sroc", &["--walter"][..]),
        ("forest", &["--accuracy-type", "LDOR", "--intervals", "0.125,0.875"][..]),
        ("crosshair", &[][..]),
    ] {
        let a = render(sub, &dir.path().join("a"), extra);
        let b = render(sub, &dir.path().join("b"), extra);
        assert_eq!(a, b, "{sub}");
        assert!(a.contains("<svg"));
    }
    let geometry = run(&["sroc", "--fit", fit, "--out-dir", dir.path().to_str().unwrap(), "-o", "g.json", "--geometry"]);
    assert_eq!(geometry.code, 0);
    let text = std::fs::read_to_string(dir.path().join("g.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["type"], "roc");
}

#[test]
fn prior_preview_shows_the_interior_mode() {
    let r = run(&["prior-preview", "--cor-prior", "PC", "--cor-par", "1,-0.2,0.4,-0.8,0.1,_,_"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let mut lines = r.out.lines();
    assert_eq!(lines.next().unwrap(), "correlation,density");
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (x, d) = l.split_once(',').unwrap();
            (x.parse().unwrap(), d.parse().unwrap())
        })
        .collect();
    let (mode, _) = rows
        .iter()
        .filter(|(x, _)| x.abs() <= 0.9)
        .fold((0.0, f64::NEG_INFINITY), |best, &(x, d)| if d > best.1 { (x, d) } else { best });
    assert!((mode + 0.2).abs() < 0.02, "mode {mode}");

    let var = run(&["prior-preview", "--var-prior", "PC", "--var-par", "1,0.05", "--format", "json"]);
    assert_eq!(var.code, 0);
    let v: serde_json::Value = serde_json::from_str(&var.out).unwrap();
    assert_eq!(v["x"].as_array().unwrap().len(), 401);
}

#[test]
fn datasets_are_listed_and_exported() {
    let list = run(&["datasets"]);
    assert_eq!(list.code, 0);
    assert!(list.out.contains("Telomerase") && list.out.contains("Catheter"));
    let csv = run(&["datasets", "--name", "Telomerase"]);
    assert!(csv.out.starts_with("studynames,TP,FP,TN,FN"));
    assert!(csv.out.contains("Ito_1998,25,1,25,8"));
}
