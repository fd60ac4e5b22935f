use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn abcrf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abcrf"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sir_config(dir: &Path, threshold: f64) -> PathBuf {
    let text = format!(
        r#"{{
  "model": {{"kind": "sir", "n": 1000, "i0": 1, "obs_times": [1, 5, 9, 13, 17], "horizon": 20,
            "observed": {{"truth": {{"beta": 1.5, "gamma": 0.5}}}}}},
  "priors": [{{"name": "beta", "lower": 0, "upper": 6}}, {{"name": "gamma", "lower": 0, "upper": 1}}],
  "summaries": [{{"kind": "below", "name": "ss", "threshold": {threshold}}}],
  "stages": {{"n_stage1": 3000, "n_stage2": 20000, "probability_threshold": 0.75,
             "forest": {{"n_trees": 60}}}},
  "baseline": {{"target_accepted": 5, "budget": 50000}},
  "seed": 5,
  "output_dir": "out"
}}"#
    );
    let path = dir.join("sir.json");
    fs::write(&path, text).unwrap();
    path
}

fn spatial_config(dir: &Path, landscape: &str, origin: &str) -> PathBuf {
    let text = format!(
        r#"{{
  "model": {{"kind": "spatial", "landscape": {{"file": {{"path": "{landscape}"}}}}, "origin": {origin},
            "horizon": 1, "growth_rate": 13.2, "initial_prevalence": 0.004,
            "observed": {{"data": {{"distances": [1.0], "intensity": 0.5}}}}}},
  "priors": [{{"name": "epsilon", "scale": "log10", "lower": -6, "upper": 0}},
             {{"name": "beta", "scale": "log10", "lower": -4, "upper": 2}},
             {{"name": "alpha", "lower": 0.01, "upper": 5}}],
  "summaries": [{{"kind": "below", "name": "ss1", "threshold": 25}},
                {{"kind": "around_observed", "name": "ss2", "tolerance": 0.1}}],
  "stages": {{"n_stage1": 10, "n_stage2": 10, "probability_threshold": 0.5}},
  "seed": 1,
  "output_dir": "out"
}}"#
    );
    let path = dir.join("spatial.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_sir_writes_observation_rows() {
    let dir = tempfile::tempdir().unwrap();
    sir_config(dir.path(), 2000.0);
    let o = abcrf(&["simulate", "--config", "sir.json", "--params", "gamma=0.5,beta=1.5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "t,s,i,r");
    let i1: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((i1 - 2.7098228333492123).abs() < 0.1);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/simulate.json")).unwrap()).unwrap();
    assert_eq!(manifest["summaries"][0]["value"], 0.0);

    let o = abcrf(&["simulate", "--config", "sir.json", "--params", "beta=1.5"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing gamma"));
}

#[test]
fn simulate_spatial_writes_outbreak() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("grid.csv"), "0.5,0.5,0.5\n0.5,0.5,0.5\n0.5,0.5,0.5\n").unwrap();
    spatial_config(dir.path(), "grid.csv", "[1, 1]");
    let o = abcrf(
        &["simulate", "--config", "spatial.json", "--params", "epsilon=0.01,beta=5,alpha=1", "--out", "sim"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("sim/outbreak.csv")).unwrap();
    assert!(text.starts_with("row,col,infection_time\n1,1,0\n"));
}

#[test]
fn zero_density_origin_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("grid.csv"), "0,0.5\n0.5,0.5\n").unwrap();
    spatial_config(dir.path(), "grid.csv", "[0, 0]");
    let o = abcrf(&["simulate", "--config", "spatial.json", "--params", "epsilon=0.1,beta=1,alpha=1"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("(0, 0)"), "{}", stderr(&o));
}

#[test]
fn missing_landscape_is_named() {
    let dir = tempfile::tempdir().unwrap();
    spatial_config(dir.path(), "nowhere.csv", "[0, 0]");
    let o = abcrf(&["stage1", "--config", "spatial.json"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nowhere.csv"), "{}", stderr(&o));
}

#[test]
fn phases_need_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    sir_config(dir.path(), 2000.0);
    let o = abcrf(&["train", "--config", "sir.json"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("abcrf stage1"), "{}", stderr(&o));
    let o = abcrf(&["stage2", "--config", "sir.json"], dir.path());
    assert!(stderr(&o).contains("abcrf train"), "{}", stderr(&o));
    let o = abcrf(&["report", "--config", "sir.json"], dir.path());
    assert!(stderr(&o).contains("abcrf stage2"), "{}", stderr(&o));
}

#[test]
fn report_on_empty_posterior_fails() {
    let dir = tempfile::tempdir().unwrap();
    sir_config(dir.path(), 2000.0);
    fs::create_dir(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/posterior.csv"), "index,seed,beta,gamma,ss\n").unwrap();
    let o = abcrf(&["report", "--config", "sir.json"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no accepted particles"));
}

#[test]
fn zero_acceptance_gives_a_hint() {
    let dir = tempfile::tempdir().unwrap();
    sir_config(dir.path(), 0.0);
    let o = abcrf(&["stage1", "--config", "sir.json"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Increase n_stage1"), "{}", stderr(&o));
    assert!(!dir.path().join("out/stage1.json").exists());
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = sir_config(dir.path(), 2000.0);
    let text = fs::read_to_string(&path).unwrap().replace("0.75", "1.5");
    fs::write(&path, text).unwrap();
    let o = abcrf(&["stage1", "--config", "sir.json"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stages.probability_threshold"), "{}", stderr(&o));
}

fn pipeline(dir: &Path, out: &str, workers: &str) -> Vec<u8> {
    for phase in ["stage1", "train", "stage2", "report"] {
        let o = abcrf(&[phase, "--config", "sir.json", "--out", out, "--workers", workers], dir);
        assert!(o.status.success(), "{phase}: {}", stderr(&o));
    }
    fs::read(dir.join(out).join("posterior.csv")).unwrap()
}

#[test]
fn pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    sir_config(dir.path(), 2000.0);
    let a = pipeline(dir.path(), "a", "1");
    let b = pipeline(dir.path(), "b", "3");
    assert_eq!(a, b);
    // Re-running into the same directory overwrites identically.
    assert_eq!(pipeline(dir.path(), "a", "2"), a);

    let marginals = fs::read_to_string(dir.path().join("a/marginals.csv")).unwrap();
    assert!(marginals.starts_with("parameter,count,mean,median,q025,q975,min,max\nbeta,"));
    let hist = fs::read_to_string(dir.path().join("a/histogram_gamma.csv")).unwrap();
    assert_eq!(hist.lines().count(), 31);

    let o = abcrf(&["baseline", "--config", "sir.json", "--out", "a"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/baseline.json")).unwrap()).unwrap();
    assert_eq!(manifest["accepted"], 5);
    assert!(manifest["comparison"]["rate_ratio"].as_f64().unwrap() > 1.0);
}

#[test]
fn fit_logistic_recovers_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("t,prevalence\n");
    for k in 1..=10 {
        let t = k as f64 / 10.0;
        let p = 1.0 / (1.0 + (1.0 / 0.004 - 1.0) * (-13.2 * t).exp());
        text.push_str(&format!("{t},{p}\n"));
    }
    fs::write(dir.path().join("prev.csv"), text).unwrap();
    let o = abcrf(&["fit-logistic", "--input", "prev.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((fit["r"].as_f64().unwrap() / 13.2 - 1.0).abs() < 0.01);
    assert!((fit["p0"].as_f64().unwrap() / 0.004 - 1.0).abs() < 0.01);
}
