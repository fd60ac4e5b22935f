use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use abcrf::forest::Forest;
use abcrf::inference::{
    histogram, load_particles, marginals, run_rejection_baseline, run_stage1_with_sink, run_stage2,
    train_classifier, Layout, ParticleWriter, Target,
};
use abcrf::sir::{SirParams, SirSolver};
use abcrf::spatial::simulate_outbreak;
use abcrf::stats::{fit_logistic, load_prevalence_csv};
use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::{Model, RunConfig};
use crate::Common;

const HISTOGRAM_BINS: usize = 30;

pub const STAGE1_CSV: &str = "stage1.csv";
pub const FOREST_FILE: &str = "forest.json";
pub const SURVIVORS_CSV: &str = "survivors.csv";
pub const POSTERIOR_CSV: &str = "posterior.csv";
pub const BASELINE_CSV: &str = "baseline.csv";

struct Run {
    config: RunConfig,
    out: PathBuf,
}

impl Run {
    fn new(common: &Common) -> Result<Self> {
        let mut config = RunConfig::load(&common.config)?;
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        if let Some(workers) = common.workers {
            config.workers = workers;
        }
        if let Some(out) = &common.out {
            config.output_dir = out.clone();
        }
        let out = config.output_dir.clone();
        fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
        Ok(Self { config, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn require(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let path = self.path(name);
        if !path.is_file() {
            bail!(
                "{} not found; run `abcrf {producer}` with this configuration first",
                path.display()
            );
        }
        Ok(path)
    }

    fn manifest(&self, name: &str, command: &str, started: Instant, body: serde_json::Value) -> Result<()> {
        let mut doc = json!({
            "command": command,
            "config": self.config,
            "seed": self.config.seed,
            "workers": self.config.workers,
        });
        if let (Some(doc), serde_json::Value::Object(body)) = (doc.as_object_mut(), body) {
            doc.extend(body);
            doc.insert("wall_time_seconds".into(), json!(started.elapsed().as_secs_f64()));
        }
        write_json(&self.path(name), &doc)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn parse_params(target: &dyn Target, raw: &[String]) -> Result<Vec<f64>> {
    let names = target.parameter_names();
    let mut values = vec![None; names.len()];
    for item in raw {
        let Some((name, value)) = item.split_once('=') else {
            bail!("--params: expected name=value, got {item:?}");
        };
        let Some(k) = names.iter().position(|n| *n == name.trim()) else {
            bail!("--params: unknown parameter {name:?}; the model takes {names:?}");
        };
        values[k] = Some(
            value
                .trim()
                .parse::<f64>()
                .with_context(|| format!("--params: {name} = {value:?} is not a number"))?,
        );
    }
    names
        .iter()
        .zip(values)
        .map(|(n, v)| v.with_context(|| format!("--params: missing {n}")))
        .collect()
}

pub fn simulate(common: &Common, raw: &[String]) -> Result<()> {
    let started = Instant::now();
    let run = Run::new(common)?;
    let model = run.config.build_model()?;
    let target = model.target();
    let values = parse_params(target, raw)?;
    let seed = run.config.seed;
    let output = match &model {
        Model::Sir(t) => {
            let traj = SirSolver::default().solve(
                SirParams { beta: values[0], gamma: values[1] },
                t.init(),
                t.obs_times(),
                t.horizon(),
            )?;
            let path = run.path("trajectory.csv");
            let mut w = csv_writer(&path)?;
            w.write_record(["t", "s", "i", "r"])?;
            for k in 0..traj.times.len() {
                w.write_record([traj.times[k], traj.s[k], traj.i[k], traj.r[k]].map(|v| v.to_string()))?;
            }
            w.flush()?;
            path
        }
        Model::Spatial(t) => {
            let params = t.params(&values)?;
            let state = simulate_outbreak(&params, t.landscape(), t.origin(), t.horizon(), seed)?;
            let path = run.path("outbreak.csv");
            let file = fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
            state.write_csv(std::io::BufWriter::new(file))?;
            path
        }
    };
    let summaries: Vec<_> = target
        .summaries()
        .iter()
        .zip(target.simulate(&values, seed, false)?)
        .map(|(s, v)| s.evaluate(v))
        .collect();
    run.manifest(
        "simulate.json",
        "simulate",
        started,
        json!({ "parameters": values, "summaries": summaries, "output": output }),
    )?;
    println!("wrote {}", output.display());
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))
}

pub fn stage1(common: &Common) -> Result<()> {
    let started = Instant::now();
    let run = Run::new(common)?;
    let model = run.config.build_model()?;
    let target = model.target();
    let config = run.config.stage_config();
    let path = run.path(STAGE1_CSV);
    let mut writer = ParticleWriter::create(&path, &config.priors, target.summaries(), Layout::Labelled)?;
    let result = run_stage1_with_sink(&config, target, |batch| writer.write_all(batch));
    writer.finish()?;
    let out = result?;
    run.manifest(
        "stage1.json",
        "stage1",
        started,
        json!({
            "simulated": out.particles.len(),
            "accepted": out.accepted,
            "acceptance_rate": out.acceptance_rate(),
            "particles": path,
        }),
    )?;
    println!(
        "stage 1: {} of {} particles accepted ({})",
        out.accepted,
        out.particles.len(),
        path.display()
    );
    Ok(())
}

pub fn train(common: &Common) -> Result<()> {
    let started = Instant::now();
    let run = Run::new(common)?;
    let model = run.config.build_model()?;
    let config = run.config.stage_config();
    let input = run.require(STAGE1_CSV, "stage1")?;
    let table = load_particles(&input, &config.priors, model.target().summaries())?;
    if table.layout != Layout::Labelled {
        bail!("{} is not a labelled stage-1 file", input.display());
    }
    let forest = train_classifier(&table.particles, &config.priors, &config.forest, config.seed, config.workers)
        .with_context(|| format!("cannot train on {}", input.display()))?;
    let path = run.path(FOREST_FILE);
    forest.save(&path)?;
    run.manifest(
        "train.json",
        "train",
        started,
        json!({
            "training": forest.training(),
            "hyperparams": forest.hyperparams(),
            "oob": forest.oob(),
            "forest": path,
        }),
    )?;
    match forest.oob() {
        Some(oob) => println!("forest: {} trees, OOB error {:.4} ({})", forest.trees().len(), oob.error, path.display()),
        None => println!("forest: {} trees ({})", forest.trees().len(), path.display()),
    }
    Ok(())
}

pub fn stage2(common: &Common) -> Result<()> {
    let started = Instant::now();
    let run = Run::new(common)?;
    let model = run.config.build_model()?;
    let target = model.target();
    let config = run.config.stage_config();
    let forest = Forest::load(run.require(FOREST_FILE, "train")?)?;
    let out = run_stage2(&config, target, &forest)?;

    let survivors = run.path(SURVIVORS_CSV);
    let mut w = ParticleWriter::create(&survivors, &config.priors, target.summaries(), Layout::Screened)?;
    w.write_all(&out.survivors)?;
    w.finish()?;
    let posterior = run.path(POSTERIOR_CSV);
    let mut w = ParticleWriter::create(&posterior, &config.priors, target.summaries(), Layout::Posterior)?;
    w.write_all(&out.posterior.particles)?;
    w.finish()?;

    run.manifest(
        "stage2.json",
        "stage2",
        started,
        json!({
            "screened": out.screened,
            "survivors": out.survivors.len(),
            "accepted": out.posterior.particles.len(),
            "survivor_acceptance_rate": out.survivor_acceptance_rate(),
            "efficiency": out.posterior.efficiency,
            "marginals": out.posterior.marginals,
            "posterior": posterior,
        }),
    )?;
    println!(
        "stage 2: {} of {} candidates passed the gate, {} accepted ({})",
        out.survivors.len(),
        out.screened,
        out.posterior.particles.len(),
        posterior.display()
    );
    Ok(())
}

pub fn baseline(common: &Common) -> Result<()> {
    let started = Instant::now();
    let run = Run::new(common)?;
    let Some(settings) = run.config.baseline else {
        bail!("config has no baseline section (target_accepted, budget)");
    };
    let model = run.config.build_model()?;
    let target = model.target();
    let config = run.config.stage_config();
    let out = run_rejection_baseline(&config, target, settings.target_accepted, settings.budget)?;

    let path = run.path(BASELINE_CSV);
    let mut w = ParticleWriter::create(&path, &config.priors, target.summaries(), Layout::Posterior)?;
    w.write_all(&out.accepted)?;
    w.finish()?;

    let names: Vec<String> = config.priors.iter().map(|p| p.name.clone()).collect();
    let rate = out.acceptance_rate();
    let mut body = json!({
        "accepted": out.accepted.len(),
        "simulations": out.simulations,
        "acceptance_rate": rate,
        "marginals": marginals(&names, &out.accepted)?,
        "particles": path,
    });
    // Compare against a stage-2 run in the same directory when there is one.
    let stage2 = run.path("stage2.json");
    if stage2.is_file() {
        let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&stage2)?)
            .with_context(|| format!("cannot parse {}", stage2.display()))?;
        if let Some(s2) = doc["survivor_acceptance_rate"].as_f64() {
            body["comparison"] = json!({
                "stage2_survivor_acceptance_rate": s2,
                "baseline_acceptance_rate": rate,
                "rate_ratio": s2 / rate,
                "stage2_efficiency": doc["efficiency"],
            });
        }
    }
    run.manifest("baseline.json", "baseline", started, body)?;
    println!(
        "baseline: {} accepted after {} simulations (rate {rate:.5})",
        out.accepted.len(),
        out.simulations
    );
    Ok(())
}

pub fn report(common: &Common) -> Result<()> {
    let run = Run::new(common)?;
    let model = run.config.build_model()?;
    let priors = &run.config.priors;
    let input = run.require(POSTERIOR_CSV, "stage2")?;
    let table = load_particles(&input, priors, model.target().summaries())?;
    if table.particles.is_empty() {
        bail!("{} holds no accepted particles; nothing to report", input.display());
    }
    let names: Vec<String> = priors.iter().map(|p| p.name.clone()).collect();
    let margs = marginals(&names, &table.particles)?;

    let path = run.path("marginals.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["parameter", "count", "mean", "median", "q025", "q975", "min", "max"])?;
    for m in &margs {
        w.write_record([
            m.parameter.clone(),
            m.count.to_string(),
            m.mean.to_string(),
            m.median.to_string(),
            m.q025.to_string(),
            m.q975.to_string(),
            m.min.to_string(),
            m.max.to_string(),
        ])?;
    }
    w.flush()?;

    for (k, prior) in priors.iter().enumerate() {
        let values: Vec<f64> = table.particles.iter().map(|p| p.sampling[k]).collect();
        let hist = run.path(&format!("histogram_{}.csv", prior.name));
        let mut w = csv_writer(&hist)?;
        w.write_record(["lower", "upper", "count"])?;
        for b in histogram(prior, &values, HISTOGRAM_BINS) {
            w.write_record([b.lower.to_string(), b.upper.to_string(), b.count.to_string()])?;
        }
        w.flush()?;
    }

    println!("{:<10} {:>7} {:>12} {:>12} {:>12} {:>12}", "parameter", "count", "mean", "median", "q2.5", "q97.5");
    for m in &margs {
        println!(
            "{:<10} {:>7} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}",
            m.parameter, m.count, m.mean, m.median, m.q025, m.q975
        );
    }
    Ok(())
}

pub fn fit(input: &Path) -> Result<()> {
    let samples = load_prevalence_csv(input)?;
    let fit = fit_logistic(&samples).with_context(|| format!("cannot fit {}", input.display()))?;
    println!("{}", serde_json::to_string_pretty(&fit)?);
    Ok(())
}
