use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::attack::{epoch_rows, model_factory, Instance};
use super::config::{ExperimentConfig, SecretKind};
use super::seeds::{substream, Stream};
use crate::data::{gen_samples, gen_secret};
use crate::error::{Error, Result};
use crate::model::{acc_tau, exact_accuracy, CurvePoint, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    /// `b = a * s mod q` with scalar `a`.
    #[serde(rename = "1d-modmul")]
    OneDimModMul,
    #[serde(rename = "nd-uniform")]
    UniformSecret,
    #[serde(rename = "nd-binary")]
    BinarySecret,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::OneDimModMul => "1d-modmul",
            TaskKind::UniformSecret => "nd-uniform",
            TaskKind::BinarySecret => "nd-binary",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1d-modmul" | "1d" => Ok(TaskKind::OneDimModMul),
            "nd-uniform" => Ok(TaskKind::UniformSecret),
            "nd-binary" => Ok(TaskKind::BinarySecret),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

/// Exact match on noiseless data, `acc_tau` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Exact,
    AccTau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskStop {
    Target,
    Plateau,
    MaxEpochs,
    MaxSamples,
    WallClock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub kind: TaskKind,
    pub success: bool,
    pub stop: TaskStop,
    pub metric: Metric,
    /// Best test accuracy seen, including the untrained model.
    pub best_accuracy: f64,
    pub epochs: usize,
    pub examples: u64,
    /// `log2(examples)` at the epoch that reached the target.
    pub log2_examples: Option<f64>,
    pub wall_clock_secs: f64,
    pub curve: Vec<CurvePoint>,
}

fn check_kind(kind: TaskKind, cfg: &ExperimentConfig) -> Result<()> {
    let bad = |m: &str| Err(Error::Config(format!("{kind}: {m}")));
    match kind {
        TaskKind::OneDimModMul if cfg.lwe.n != 1 => bad("needs lwe.n = 1"),
        TaskKind::UniformSecret if cfg.lwe.secret != SecretKind::Uniform => {
            bad("needs lwe.secret = uniform")
        }
        TaskKind::BinarySecret if cfg.lwe.secret != SecretKind::Binary => {
            bad("needs lwe.secret = binary")
        }
        _ => Ok(()),
    }
}

/// Trains a model on one task until the test accuracy reaches
/// `task.target_accuracy`, the loss stops improving for `task.plateau_epochs`
/// epochs, or a budget runs out.
pub fn run_task(kind: TaskKind, cfg: &ExperimentConfig) -> Result<TaskReport> {
    run_task_observed(kind, cfg, |_| {})
}

pub fn run_task_observed<O: FnMut(&CurvePoint)>(
    kind: TaskKind,
    cfg: &ExperimentConfig,
    mut on_epoch: O,
) -> Result<TaskReport> {
    cfg.validate()?;
    check_kind(kind, cfg)?;
    let start = Instant::now();
    let mut data_rng = substream(cfg.seed, Stream::Data);
    let mut model_rng = substream(cfg.seed, Stream::Model);
    let mut test_rng = substream(cfg.seed, Stream::Test);

    let params = cfg.lwe.params()?;
    let mut secret = gen_secret(&params, &mut data_rng)?;
    if kind == TaskKind::OneDimModMul {
        // s = 0 would make the task trivial
        while secret.coords()[0] == 0 {
            secret = gen_secret(&params, &mut data_rng)?;
        }
    }
    let inst = Instance { params, secret };
    let test = gen_samples(&inst.params, &inst.secret, cfg.task.test_samples, &mut test_rng)?;
    let mut model: TrainedModel = model_factory(cfg, &inst, &mut model_rng)?;

    let metric = if inst.params.sigma == 0.0 {
        Metric::Exact
    } else {
        Metric::AccTau
    };
    let score = |m: &TrainedModel| match metric {
        Metric::Exact => exact_accuracy(m, &test),
        Metric::AccTau => acc_tau(m, &test, cfg.recovery.tau),
    };

    let mut report = TaskReport {
        kind,
        success: false,
        stop: TaskStop::MaxEpochs,
        metric,
        best_accuracy: score(&model)?,
        epochs: 0,
        examples: 0,
        log2_examples: None,
        wall_clock_secs: 0.0,
        curve: Vec::new(),
    };
    let mut best_loss = f64::INFINITY;
    let mut since_best = 0;
    for epoch in 0..cfg.budget.max_epochs {
        let fresh = cfg.model.epoch_size as u64;
        if report.examples + fresh > cfg.budget.max_samples {
            report.stop = TaskStop::MaxSamples;
            break;
        }
        let train = epoch_rows(cfg, &inst, &mut data_rng)?;
        report.examples += fresh;
        let stats = model.train_epoch(&train, &mut model_rng)?;
        let acc = score(&model)?;
        report.epochs = epoch + 1;
        report.best_accuracy = report.best_accuracy.max(acc);
        let point = CurvePoint {
            epoch,
            loss: stats.loss,
            acc_tau: acc,
        };
        on_epoch(&point);
        report.curve.push(point);
        if acc >= cfg.task.target_accuracy {
            report.success = true;
            report.stop = TaskStop::Target;
            report.log2_examples = Some((report.examples as f64).log2());
            break;
        }
        if stats.loss < best_loss {
            best_loss = stats.loss;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.task.plateau_epochs {
                report.stop = TaskStop::Plateau;
                break;
            }
        }
        if start.elapsed().as_secs_f64() > cfg.budget.wall_clock_secs {
            report.stop = TaskStop::WallClock;
            break;
        }
    }
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
