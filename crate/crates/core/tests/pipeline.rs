use std::cell::RefCell;
use std::rc::Rc;

use lwe_attack::harness::{
    read_sweep_csv, run_attack_with, run_sweep_with, run_task, write_sweep_csv, ExperimentConfig,
    Frozen, Instance, Learner, Outcome, StopReason, TaskKind,
};
use lwe_attack::model::{EpochStats, ExactOracle, UniformPredictor};
use lwe_attack::{run_attack, Modulus, Predictor, Residue, SampleSet};
use rand_chacha::ChaCha8Rng;

/// Predicts uniformly until `switch_after` epochs of training, then exactly.
/// Records the size of every training set it sees.
struct LateLearner {
    exact: ExactOracle,
    noise: UniformPredictor,
    epochs: usize,
    switch_after: usize,
    seen: Rc<RefCell<Vec<usize>>>,
}

impl Predictor for LateLearner {
    fn modulus(&self) -> Modulus {
        self.noise.modulus()
    }

    fn predict(&self, a: &[Residue]) -> Option<Residue> {
        if self.epochs >= self.switch_after {
            self.exact.predict(a)
        } else {
            self.noise.predict(a)
        }
    }
}

impl Learner for LateLearner {
    fn train_epoch(&mut self, train: &SampleSet, _: &mut ChaCha8Rng) -> lwe_attack::Result<Option<EpochStats>> {
        self.epochs += 1;
        self.seen.borrow_mut().push(train.len());
        Ok(Some(EpochStats {
            loss: 1.0,
            token_accuracy: 0.0,
            examples: train.len(),
            steps: 1,
        }))
    }
}

fn config(extra: &[&str]) -> ExperimentConfig {
    let mut sets = vec![
        "lwe.n=12",
        "lwe.hamming=2",
        "model.epoch_size=300",
        "recovery.acc_samples=500",
        "recovery.verify_samples=200",
        "budget.max_epochs=6",
    ];
    sets.extend_from_slice(extra);
    ExperimentConfig::default().with_overrides(&sets).unwrap()
}

fn late(switch_after: usize, seen: Rc<RefCell<Vec<usize>>>) -> impl FnOnce(&ExperimentConfig, &Instance, &mut ChaCha8Rng) -> lwe_attack::Result<LateLearner> {
    move |_, inst, _| {
        Ok(LateLearner {
            exact: ExactOracle::new(inst.secret.clone()),
            noise: UniformPredictor::new(inst.params.modulus, 1),
            epochs: 0,
            switch_after,
            seen,
        })
    }
}

#[test]
fn stops_in_the_epoch_that_verifies() {
    let seen = Rc::new(RefCell::new(Vec::new()));
    let r = run_attack_with(&config(&[]), late(3, seen.clone()), |_| {}).unwrap();
    assert_eq!(r.outcome, Outcome::FullRecovery);
    assert_eq!(r.recovered_epoch, Some(2));
    assert_eq!(r.epochs, 3);
    assert_eq!(seen.borrow().len(), 3);
    assert_eq!(r.curve.len(), 3);
    assert_eq!(r.distinct_samples, 900);
    assert!((r.log2_samples.unwrap() - 900f64.log2()).abs() < 1e-12);
}

#[test]
fn distinct_samples_ignore_reuse_and_combinations() {
    let mut counts = Vec::new();
    for extra in [
        vec![],
        vec!["data.reuse_limit=4"],
        vec!["data.combine_k=3", "data.combined_per_epoch=500"],
    ] {
        let seen = Rc::new(RefCell::new(Vec::new()));
        let r = run_attack_with(&config(&extra), late(usize::MAX, seen.clone()), |_| {}).unwrap();
        assert_eq!(r.stop_reason, StopReason::MaxEpochs);
        assert!(r.distinct_samples <= (r.epochs * 300) as u64);
        counts.push((r.distinct_samples, seen.borrow()[0]));
    }
    assert_eq!(counts[0], (1800, 300));
    assert_eq!(counts[1], (1800, 1200));
    assert_eq!(counts[2], (1800, 800));
}

#[test]
fn sample_budget_is_enforced() {
    let seen = Rc::new(RefCell::new(Vec::new()));
    let cfg = config(&["budget.max_samples=1000"]);
    let r = run_attack_with(&cfg, late(usize::MAX, seen), |_| {}).unwrap();
    assert_eq!(r.stop_reason, StopReason::MaxSamples);
    assert_eq!(r.distinct_samples, 900);
    assert_ne!(r.outcome, Outcome::FullRecovery);
}

#[test]
fn trained_runs_are_deterministic() {
    let cfg = config(&[
        "model.enc_layers=1",
        "model.dec_layers=1",
        "model.enc_dim=16",
        "model.dec_dim=16",
        "model.enc_loops=1",
        "model.dec_loops=1",
        "model.epoch_size=64",
        "recovery.acc_samples=100",
        "budget.max_epochs=2",
    ]);
    let a = run_attack(&cfg).unwrap();
    let b = run_attack(&cfg).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!((a.outcome, a.epochs, a.bits_recovered), (b.outcome, b.epochs, b.bits_recovered));
    assert_eq!(a.distinct_samples, 128);
}

#[test]
fn oracle_recovers_dense_and_large_secrets() {
    for (n, h) in [(128, 10), (64, 10), (40, 1)] {
        let cfg = ExperimentConfig::default()
            .with_overrides(&[format!("lwe.n={n}"), format!("lwe.hamming={h}")])
            .unwrap();
        let r = run_attack_with(&cfg, |_, inst: &Instance, _| Ok(Frozen(ExactOracle::new(inst.secret.clone()))), |_| {}).unwrap();
        assert_eq!(r.outcome, Outcome::FullRecovery, "n={n} h={h}");
    }
}

#[test]
fn noiseless_oracle_run_verifies_with_zero_spread() {
    let cfg = config(&["lwe.sigma=0"]);
    let r = run_attack_with(&cfg, |_, inst: &Instance, _| Ok(Frozen(ExactOracle::new(inst.secret.clone()))), |_| {}).unwrap();
    assert_eq!(r.verify_stddev, Some(0.0));
}

#[test]
fn sweep_table_round_trips() {
    let cfg = config(&["sweep.n=[10, 20]", "sweep.sigma=[0.0, 3.0]"]);
    let rows = run_sweep_with(&cfg, |_, inst: &Instance, _| Ok(Frozen(ExactOracle::new(inst.secret.clone()))), |_| {}).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.outcome == Outcome::FullRecovery && r.bits_recovered == 1.0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_sweep_csv(&rows, std::fs::File::create(&path).unwrap()).unwrap();
    assert_eq!(read_sweep_csv(std::fs::File::open(&path).unwrap()).unwrap(), rows);
}

#[test]
fn binary_task_at_tiny_dimension_learns() {
    // b = a.s mod 31 with four coordinates, no noise
    let cfg = ExperimentConfig::default()
        .with_overrides(&[
            "lwe.n=4",
            "lwe.q=31",
            "lwe.sigma=0",
            "lwe.hamming=1",
            "encoding.base_in=31",
            "encoding.base_out=31",
            "model.enc_layers=1",
            "model.dec_layers=1",
            "model.enc_dim=32",
            "model.dec_dim=32",
            "model.enc_loops=1",
            "model.dec_loops=1",
            "model.warmup_steps=100",
            "model.epoch_size=2048",
            "task.target_accuracy=0.99",
            "task.test_samples=500",
            "budget.max_epochs=40",
        ])
        .unwrap();
    let r = run_task(TaskKind::BinarySecret, &cfg).unwrap();
    assert!(r.success, "{r:?}");
}
