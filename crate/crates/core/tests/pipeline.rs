//! Two-stage runs end to end on the SIR benchmark.

use abcrf::inference::cases::{case1_config, case1_target, case2_config, case2_target, CASE1_THRESHOLD};
use abcrf::inference::{
    run_rejection_baseline, run_stage1, run_stage2, sample_prior, train_classifier, Layout, ParticleWriter,
    Stage2Output, StageConfig, Target,
};

fn two_stage(config: &StageConfig, target: &dyn Target) -> (f64, Stage2Output) {
    let s1 = run_stage1(config, target).unwrap();
    let forest = train_classifier(&s1.particles, &config.priors, &config.forest, config.seed, config.workers).unwrap();
    let s2 = run_stage2(config, target, &forest).unwrap();
    for p in &s2.survivors {
        let prob = p.probability.unwrap();
        assert!(prob >= config.probability_threshold);
        assert_eq!(forest.predict_proba(&p.sampling).unwrap(), prob);
    }
    (s1.acceptance_rate(), s2)
}

fn csv(config: &StageConfig, target: &dyn Target, out: &Stage2Output) -> Vec<u8> {
    let mut w = ParticleWriter::new(Vec::new(), &config.priors, target.summaries(), Layout::Posterior).unwrap();
    w.write_all(&out.posterior.particles).unwrap();
    w.finish().unwrap()
}

#[test]
fn screening_enriches_acceptance() {
    let target = case1_target(CASE1_THRESHOLD).unwrap();
    for seed in [1, 2] {
        let mut config = case1_config(10_000, 50_000, seed);
        config.forest.n_trees = 200;
        let (stage1_rate, s2) = two_stage(&config, &target);
        assert_eq!(s2.screened, 50_000);
        let rate = s2.survivor_acceptance_rate();
        assert!(rate > 10.0 * stage1_rate, "seed {seed}: {rate} vs {stage1_rate}");
        for p in &s2.posterior.particles {
            assert!(p.summary("ss").unwrap() < CASE1_THRESHOLD);
        }
        let eff = s2.posterior.efficiency;
        assert_eq!(eff.stage1_simulations, 10_000);
        assert_eq!(eff.stage2_simulations, s2.survivors.len());
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let target = case1_target(CASE1_THRESHOLD).unwrap();
    let mut outputs = Vec::new();
    for workers in [1, 2, 3] {
        let mut config = case1_config(4_000, 20_000, 9);
        config.workers = workers;
        config.forest.n_trees = 50;
        let (_, s2) = two_stage(&config, &target);
        outputs.push(csv(&config, &target, &s2));
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn draws_stay_inside_the_prior() {
    for (priors, seed) in [(case1_config(1, 1, 0).priors, 3), (case2_config(1, 1, 0).priors, 4)] {
        for p in sample_prior(&priors, 5_000, seed).unwrap() {
            for ((v, s), prior) in p.params.iter().zip(&p.sampling).zip(&priors) {
                assert!(prior.contains(*v), "{} = {v}", prior.name);
                assert_eq!(prior.to_sampling(*v), *s);
            }
        }
    }
}

#[test]
fn baseline_rate_is_near_the_reference() {
    let target = case1_target(CASE1_THRESHOLD).unwrap();
    let config = case1_config(1, 1, 4);
    let out = run_rejection_baseline(&config, &target, 50, 1_000_000).unwrap();
    assert_eq!(out.accepted.len(), 50);
    let rate = out.acceptance_rate();
    assert!(rate > 0.0035 * 0.5 && rate < 0.0035 * 1.5, "{rate}");
}

#[test]
fn truncated_spatial_runs_never_flip_a_decision() {
    let target = case2_target(26).unwrap();
    let priors = case2_config(1, 1, 0).priors;
    let specs = target.summaries().to_vec();
    for p in sample_prior(&priors, 150, 8).unwrap() {
        let full = target.simulate(&p.params, p.seed, false).unwrap();
        let cut = target.simulate(&p.params, p.seed, true).unwrap();
        let accept = |v: &[f64]| specs.iter().zip(v).all(|(s, &x)| s.accepts(x));
        assert_eq!(accept(&full), accept(&cut), "{:?}", p.params);
        if full != cut {
            assert!(cut[0] <= full[0] && cut[1] <= full[1], "{cut:?} vs {full:?}");
        }
    }
}
