use std::collections::HashSet;
use std::fmt;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::seeds::{substream, Stream};
use crate::data::{combine_samples, gen_samples, gen_secret, LweParams, SampleSet, SecretKey};
use crate::error::{Error, Result};
use crate::model::{acc_tau, CurvePoint, EpochStats, Predictor, TrainedModel};
use crate::modq::Residue;
use crate::recovery::{
    binarize, direct_recover, distinguisher_recover, k_schedule, verify_secret, Method,
    SecretGuess,
};

/// Something the attack loop can train and query.
pub trait Learner: Predictor {
    /// One pass over `train`. Returns `None` for learners that do not train.
    fn train_epoch(&mut self, train: &SampleSet, rng: &mut ChaCha8Rng) -> Result<Option<EpochStats>>;

    /// Whether training rows should be drawn at all.
    fn trains(&self) -> bool {
        true
    }
}

impl Learner for TrainedModel {
    fn train_epoch(&mut self, train: &SampleSet, rng: &mut ChaCha8Rng) -> Result<Option<EpochStats>> {
        TrainedModel::train_epoch(self, train, rng).map(Some)
    }
}

/// A fixed predictor used in place of a model, e.g. an oracle in test mode.
#[derive(Debug, Clone)]
pub struct Frozen<P>(pub P);

impl<P: Predictor> Predictor for Frozen<P> {
    fn modulus(&self) -> crate::modq::Modulus {
        self.0.modulus()
    }

    fn predict(&self, a: &[Residue]) -> Option<Residue> {
        self.0.predict(a)
    }

    fn predict_batch(&self, rows: &[&[Residue]]) -> Vec<Option<Residue>> {
        self.0.predict_batch(rows)
    }
}

impl<P: Predictor> Learner for Frozen<P> {
    fn train_epoch(&mut self, _: &SampleSet, _: &mut ChaCha8Rng) -> Result<Option<EpochStats>> {
        Ok(None)
    }

    fn trains(&self) -> bool {
        false
    }
}

/// The secret under attack. Known to the harness for scoring only.
#[derive(Debug, Clone)]
pub struct Instance {
    pub params: LweParams,
    pub secret: SecretKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    FullRecovery,
    /// Some candidate set every 1 bit of the secret, with at most `h` extra
    /// ones, but was not the secret.
    OnesRecovered,
    Failed,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::FullRecovery => "full-recovery",
            Outcome::OnesRecovered => "ones-recovered",
            Outcome::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Verified,
    MaxEpochs,
    MaxSamples,
    WallClock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub outcome: Outcome,
    pub stop_reason: StopReason,
    /// Method and probe scale of the accepted candidate.
    pub method: Option<Method>,
    pub k: Option<u64>,
    /// Epoch in which a candidate was accepted.
    pub recovered_epoch: Option<usize>,
    pub epochs: usize,
    /// Distinct fresh training rows drawn. Reuse and combinations do not count.
    pub distinct_samples: u64,
    pub log2_samples: Option<f64>,
    pub wall_clock_secs: f64,
    /// Best fraction of correct bits over all candidates seen.
    pub bits_recovered: f64,
    pub verify_stddev: Option<f64>,
    pub seed: u64,
    pub n: usize,
    pub q: u64,
    pub hamming: usize,
    pub curve: Vec<CurvePoint>,
}

/// Progress after each epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub loss: Option<f64>,
    pub acc_tau: f64,
    pub candidates: usize,
    pub distinguisher_ran: bool,
    pub distinct_samples: u64,
    pub elapsed_secs: f64,
}

pub fn make_instance(cfg: &ExperimentConfig, data_rng: &mut ChaCha8Rng) -> Result<Instance> {
    let params = cfg.lwe.params()?;
    if params.hamming().is_none() {
        return Err(Error::Config("the attack needs a binary secret".into()));
    }
    let secret = gen_secret(&params, data_rng)?;
    Ok(Instance { params, secret })
}

/// Trains a fresh model and attacks with it.
pub fn run_attack(cfg: &ExperimentConfig) -> Result<AttackReport> {
    run_attack_with(cfg, model_factory, |_| {})
}

pub fn model_factory(cfg: &ExperimentConfig, inst: &Instance, rng: &mut ChaCha8Rng) -> Result<TrainedModel> {
    TrainedModel::new(
        cfg.model.clone(),
        cfg.encoding.vocab()?,
        inst.params.n,
        inst.params.modulus,
        rng,
    )
}

/// One epoch of training rows: the fresh rows `reuse_limit` times, then any
/// combined rows.
pub(crate) fn epoch_rows(
    cfg: &ExperimentConfig,
    inst: &Instance,
    rng: &mut ChaCha8Rng,
) -> Result<SampleSet> {
    let fresh = gen_samples(&inst.params, &inst.secret, cfg.model.epoch_size, rng)?;
    let mut train = fresh.clone();
    for _ in 1..cfg.data.reuse_limit {
        train.extend_from(&fresh)?;
    }
    if cfg.data.combine_k > 0 && cfg.data.combined_per_epoch > 0 {
        let combined = combine_samples(
            &fresh,
            cfg.data.combine_k,
            cfg.data.combine_reuse_limit,
            cfg.data.combined_per_epoch,
            rng,
        )?;
        train.extend_from(&combined)?;
    }
    Ok(train)
}

/// Every true 1 bit is set and at most `h` extra bits are.
fn ones_recovered(guess: &[u8], truth: &[u8]) -> bool {
    let h = truth.iter().filter(|&&t| t == 1).count();
    let ones = guess.iter().filter(|&&g| g == 1).count();
    guess.iter().zip(truth).all(|(&g, &t)| t == 0 || g == 1) && ones <= 2 * h
}

fn bit_fraction(guess: &[u8], truth: &[u8]) -> f64 {
    let same = guess.iter().zip(truth).filter(|(a, b)| a == b).count();
    same as f64 / truth.len() as f64
}

/// Runs the train, guess, verify loop with a learner built by `make`.
/// `on_epoch` sees a summary after every epoch.
pub fn run_attack_with<L, F, O>(cfg: &ExperimentConfig, make: F, mut on_epoch: O) -> Result<AttackReport>
where
    L: Learner,
    F: FnOnce(&ExperimentConfig, &Instance, &mut ChaCha8Rng) -> Result<L>,
    O: FnMut(&EpochSummary),
{
    cfg.validate()?;
    let start = Instant::now();
    let mut data_rng = substream(cfg.seed, Stream::Data);
    let mut model_rng = substream(cfg.seed, Stream::Model);
    let mut rec_rng = substream(cfg.seed, Stream::Recovery);
    let mut test_rng = substream(cfg.seed, Stream::Test);

    let inst = make_instance(cfg, &mut data_rng)?;
    let truth = inst.secret.bits().expect("binary secret");
    let params = &inst.params;
    let q = params.modulus;
    let rc = &cfg.recovery;
    let test = gen_samples(params, &inst.secret, rc.acc_samples, &mut test_rng)?;
    let verify = gen_samples(params, &inst.secret, rc.verify_samples, &mut test_rng)?;
    let ks = k_schedule(rc, q, &mut rec_rng)?;
    let mut learner = make(cfg, &inst, &mut model_rng)?;

    let mut report = AttackReport {
        outcome: Outcome::Failed,
        stop_reason: StopReason::MaxEpochs,
        method: None,
        k: None,
        recovered_epoch: None,
        epochs: 0,
        distinct_samples: 0,
        log2_samples: None,
        wall_clock_secs: 0.0,
        bits_recovered: 0.0,
        verify_stddev: None,
        seed: cfg.seed,
        n: params.n,
        q: q.q(),
        hamming: inst.secret.hamming(),
        curve: Vec::new(),
    };
    let mut ones = false;

    for epoch in 0..cfg.budget.max_epochs {
        let mut loss = None;
        if learner.trains() {
            let fresh = cfg.model.epoch_size as u64;
            if report.distinct_samples + fresh > cfg.budget.max_samples {
                report.stop_reason = StopReason::MaxSamples;
                break;
            }
            let train = epoch_rows(cfg, &inst, &mut data_rng)?;
            report.distinct_samples += fresh;
            loss = learner.train_epoch(&train, &mut model_rng)?.map(|s| s.loss);
        }
        report.epochs = epoch + 1;
        let acc = acc_tau(&learner, &test, rc.tau)?;
        report.curve.push(CurvePoint {
            epoch,
            loss: loss.unwrap_or(0.0),
            acc_tau: acc,
        });

        let mut guesses: Vec<SecretGuess> = Vec::with_capacity(ks.len() * 6 + 1);
        for &k in &ks {
            let scores = direct_recover(&learner, k, params.n)?;
            guesses.extend(binarize(&scores.values(), q, Some(scores.k)));
        }
        let mut distinguisher_ran = false;
        if acc > rc.trigger {
            match distinguisher_recover(
                &learner,
                params.n,
                acc,
                rc.tau,
                &test,
                rc.distinguisher_samples,
                &mut rec_rng,
            ) {
                Ok(g) => {
                    guesses.push(g);
                    distinguisher_ran = true;
                }
                Err(Error::NonPositiveAdvantage { .. }) => {}
                Err(e) => return Err(e),
            }
        }

        let mut seen = HashSet::new();
        let mut accepted = None;
        for g in guesses.iter().filter(|g| seen.insert(g.bits.clone())) {
            report.bits_recovered = report.bits_recovered.max(bit_fraction(&g.bits, &truth));
            ones |= g.bits != truth && ones_recovered(&g.bits, &truth);
            if accepted.is_none() {
                let v = verify_secret(&g.bits, &verify, params.sigma)?;
                if v.accepted {
                    accepted = Some((g.clone(), v.stddev));
                }
            }
        }
        on_epoch(&EpochSummary {
            epoch,
            loss,
            acc_tau: acc,
            candidates: seen.len(),
            distinguisher_ran,
            distinct_samples: report.distinct_samples,
            elapsed_secs: start.elapsed().as_secs_f64(),
        });

        if let Some((g, sd)) = accepted {
            report.stop_reason = StopReason::Verified;
            report.recovered_epoch = Some(epoch);
            report.method = Some(g.method);
            report.k = g.k;
            report.verify_stddev = Some(sd);
            if g.bits == truth {
                report.outcome = Outcome::FullRecovery;
            }
            break;
        }
        if start.elapsed().as_secs_f64() > cfg.budget.wall_clock_secs {
            report.stop_reason = StopReason::WallClock;
            break;
        }
    }

    if report.outcome != Outcome::FullRecovery && ones {
        report.outcome = Outcome::OnesRecovered;
    }
    report.log2_samples = (report.distinct_samples > 0).then(|| (report.distinct_samples as f64).log2());
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
