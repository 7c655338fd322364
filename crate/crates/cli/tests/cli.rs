use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bcmlr::PosteriorDraws;

fn bcmlr() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bcmlr"));
    c.env_remove("BCMLR_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bcmlr().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = run(args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_shape(path: &Path) -> (usize, usize) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let cols = lines.next().unwrap().split(',').count();
    (lines.count(), cols)
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate_cim(dir: &Path) -> PathBuf {
    ok(&["simulate", "--scenario", "cim", "--variant", "low", "--seed", "7", "--out", p(dir)]);
    dir.join("data.csv")
}

#[test]
fn simulate_writes_scenario_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let low = tmp.path().join("a/b/low");
    let stdout = ok(&["simulate", "--scenario", "cim", "--variant", "low", "--seed", "7", "--out", p(&low)]);
    assert!(stdout.starts_with("600 x 14"));
    assert_eq!(csv_shape(&low.join("data.csv")), (600, 14));
    let truth = read_json(&low.join("truth.json"));
    assert_eq!(truth["changepoints"], serde_json::json!([100, 500]));

    let high = tmp.path().join("high");
    ok(&["simulate", "--scenario", "cic", "--variant", "high", "--out", p(&high)]);
    assert_eq!(csv_shape(&high.join("data.csv")), (600, 8));
}

#[test]
fn fit_recovers_simulated_changepoints() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_cim(tmp.path());
    let out = tmp.path().join("fit");
    ok(&[
        "fit", "--data", p(&data), "--num-changepoints", "2", "--prior", "horseshoe", "--seed", "1",
        "--iters", "1500", "--out", p(&out),
    ]);
    let summary = read_json(&out.join("summary.json"));
    let modes: Vec<i64> = summary["kappa"]["changepoints"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["mode"].as_i64().unwrap())
        .collect();
    assert!((modes[0] - 100).abs() <= 10 && (modes[1] - 500).abs() <= 10, "modes {modes:?}");

    // every output re-parses under its documented schema
    let text = std::fs::read(out.join("draws.csv")).unwrap();
    let draws = PosteriorDraws::read_csv_from(text.as_slice(), 600).unwrap();
    assert_eq!(draws.n_draws(), 750);
    assert_eq!(draws.p, 14);
    assert_eq!(summary["trajectories"].as_array().unwrap().len(), 2);
    assert_eq!(summary["beta_diffs"]["pairs"].as_array().unwrap().len(), 2);
    let long = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(long.starts_with("quantity,index,dimension,statistic,value\n"));
    for line in long.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        assert!(["kappa", "beta_diff", "trajectory"].contains(&fields[0]));
        fields[4].parse::<f64>().unwrap();
    }
}

#[test]
fn identical_invocations_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_cim(tmp.path());
    for (stem, extra) in [("plain", vec![]), ("temper", vec!["--temper", "3"])] {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{stem}{rep}"));
            let mut args = vec!["fit", "--data", p(&data), "--num-changepoints", "2", "--iters", "200", "--seed", "5"];
            args.extend(extra.iter().copied());
            let out_s = out.to_str().unwrap().to_string();
            args.extend(["--out", &out_s]);
            ok(&args);
            outputs.push(out);
        }
        for name in ["draws.csv", "summary.json", "summary.csv"] {
            assert_eq!(
                std::fs::read(outputs[0].join(name)).unwrap(),
                std::fs::read(outputs[1].join(name)).unwrap(),
                "{stem}/{name}"
            );
        }
        if stem == "temper" {
            let rej = std::fs::read_to_string(outputs[0].join("rejection.csv")).unwrap();
            assert!(rej.starts_with("pair,mean_rejection\n"));
            assert_eq!(rej.lines().count(), 3);
        }
    }
}

#[test]
fn validation_failures_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_cim(tmp.path());
    let d = p(&data);
    let (c, msg) = code(&["fit", "--data", d, "--num-changepoints", "2", "--iters", "100", "--burnin", "200"]);
    assert_eq!(c, 2);
    assert!(msg.contains("burn-in"), "{msg}");

    let (c, msg) = code(&["select", "--data", d, "--zeta", "10", "--min-seg", "5"]);
    assert_eq!(c, 2);
    assert!(msg.contains("zeta"), "{msg}");

    let (c, msg) = code(&["fit", "--data", d, "--num-changepoints", "30", "--min-seg", "30", "--iters", "10"]);
    assert_eq!(c, 2);
    assert!(msg.contains("minimum segment length"), "{msg}");

    let (c, _) = code(&["fit", "--data", d, "--iters", "10"]);
    assert_eq!(c, 2);
    let (c, _) = code(&["simulate", "--scenario", "nope", "--out", p(tmp.path())]);
    assert_eq!(c, 2);
    let (c, _) = code(&["fit", "--data", d, "--num-changepoints", "1", "--scale-order", "sideways"]);
    assert_eq!(c, 2);
}

#[test]
fn io_failures_exit_with_code_4() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.csv");
    let (c, msg) = code(&["fit", "--data", p(&missing), "--num-changepoints", "1", "--iters", "10"]);
    assert_eq!(c, 4);
    assert!(msg.contains("missing.csv"), "{msg}");

    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "x1,x2\n1,2\n3,oops\n").unwrap();
    let (c, _) = code(&["fit", "--data", p(&bad), "--num-changepoints", "1", "--iters", "10"]);
    assert_eq!(c, 4);
}

#[test]
fn config_file_sits_below_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_cim(tmp.path());
    let cfg = tmp.path().join("run.cfg");
    let out = tmp.path().join("from-config");
    std::fs::write(
        &cfg,
        format!("# test run\ndata = {}\nnum_changepoints = 2\niters = 60\nburnin = 20\nout = {}\n", p(&data), p(&out)),
    )
    .unwrap();
    ok(&["--config", p(&cfg), "fit"]);
    assert_eq!(csv_shape(&out.join("draws.csv")).0, 40);
    // flag wins over the file
    ok(&["--config", p(&cfg), "fit", "--iters", "80"]);
    assert_eq!(csv_shape(&out.join("draws.csv")).0, 60);
}

#[test]
fn output_dir_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("env-out");
    let out = bcmlr()
        .args(["simulate", "--scenario", "cimc", "--variant", "high"])
        .env("BCMLR_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(csv_shape(&env_dir.join("data.csv")), (600, 8));
}

#[test]
fn select_reports_pmf_and_refit() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate_cim(tmp.path());
    let out = tmp.path().join("sel");
    let stdout = ok(&[
        "select", "--data", p(&data), "--l-fitted", "4", "--alpha", "0.1", "--tau", "0.5", "--min-seg", "10",
        "--zeta", "5", "--iters", "600", "--seed", "2", "--refit", "--draws-format", "binary", "--out", p(&out),
    ]);
    assert!(stdout.contains("selected number of changepoints: 2"), "{stdout}");
    let report = read_json(&out.join("selection.json"));
    let pmf: Vec<f64> = report["pmf"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(pmf.len(), 5);
    assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(report["l_hat"], 2);
    assert_eq!(report["top"].as_array().unwrap().len(), 3);
    let refit = PosteriorDraws::load(&out.join("refit_draws.bin"), 600).unwrap();
    assert_eq!(refit.n_changepoints, 2);
    assert!(out.join("refit_summary.json").exists());

    // the saved draws summarize to the same changepoint summary
    let again = tmp.path().join("again");
    ok(&["summarize", "--draws", p(&out.join("refit_draws.bin")), "--data", p(&data), "--out", p(&again)]);
    assert_eq!(
        read_json(&again.join("summary.json"))["kappa"],
        read_json(&out.join("refit_summary.json"))["kappa"]
    );
}

#[test]
fn bench_all_produces_complete_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench");
    let stdout = ok(&["bench", "--all", "--replicates", "1", "--iters", "30", "--burnin", "15", "--out", p(&out)]);
    let text = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,variant,input-type,known_L,replicate,ARI,wall-time-seconds"
    );
    // cim: raw only; cic and cimc: raw and poly2; each with known and unknown L
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 2 * (2 + 4 + 4));
    for r in &rows {
        assert_eq!(r.len(), 7);
        let ari: f64 = r[5].parse().unwrap();
        assert!((-1.0..=1.0).contains(&ari));
        r[6].parse::<f64>().unwrap();
    }
    assert!(stdout.contains("cimc"));
    assert!(out.join("bench.txt").exists());
}

#[test]
fn pure_noise_usually_selects_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let mut zeros = 0;
    for seed in 0..3u64 {
        let x = bcmlr::sim::pure_noise(300, 3, &mut bcmlr::rng::stream(100 + seed, 0)).unwrap();
        let data = tmp.path().join(format!("noise{seed}.csv"));
        bcmlr::data::write_csv(&x, &data).unwrap();
        let out = tmp.path().join(format!("noise{seed}"));
        let s = seed.to_string();
        ok(&[
            "select", "--data", p(&data), "--l-fitted", "3", "--min-seg", "30", "--zeta", "5", "--iters", "1000",
            "--seed", &s, "--out", p(&out),
        ]);
        if read_json(&out.join("selection.json"))["l_hat"] == 0 {
            zeros += 1;
        }
    }
    assert!(zeros >= 2, "only {zeros} of 3 noise series selected zero changepoints");
}

#[test]
fn known_l_cim_bench_fits_the_runtime_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    ok(&["bench", "--scenario", "cim", "--replicates", "5", "--known-l", "--out", p(tmp.path())]);
    assert!(start.elapsed().as_secs() < 600);
    let text = std::fs::read_to_string(tmp.path().join("bench.csv")).unwrap();
    // low and high variants, five replicates each
    assert_eq!(text.lines().count(), 1 + 10);
}
