use std::io::{Read, Write};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attack::{model_factory, run_attack_with, Instance, Learner, Outcome};
use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::recovery::Method;

/// One cell of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub q: u64,
    pub hamming: Option<usize>,
    pub density: Option<f64>,
    pub base_in: u32,
    pub base_out: u32,
    pub a_max_fraction: f64,
    pub sigma: f64,
    pub seed: u64,
    pub outcome: Outcome,
    pub bits_recovered: f64,
    pub method: Option<Method>,
    pub epochs: usize,
    pub log2_samples: Option<f64>,
    pub wall_clock_secs: f64,
    /// Set when the cell errored instead of running to a verdict.
    pub error: Option<String>,
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

/// Every combination of the sweep axes as a standalone config.
pub fn sweep_cells(cfg: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    let s = &cfg.sweep;
    if s.is_empty() {
        return Err(Error::Config("sweep mode needs at least one sweep axis".into()));
    }
    if !s.density.is_empty() && !s.hamming.is_empty() {
        return Err(Error::Config(
            "sweep.density and sweep.hamming cannot both be set".into(),
        ));
    }
    let weights: Vec<(Option<usize>, Option<f64>)> = if !s.density.is_empty() {
        s.density.iter().map(|&d| (None, Some(d))).collect()
    } else if !s.hamming.is_empty() {
        s.hamming.iter().map(|&h| (Some(h), None)).collect()
    } else {
        vec![(cfg.lwe.hamming, cfg.lwe.density)]
    };
    let mut cells = Vec::new();
    for &n in &axis(&s.n, cfg.lwe.n) {
        for &q in &axis(&s.q, cfg.lwe.q) {
            for &(hamming, density) in &weights {
                for &base_in in &axis(&s.base_in, cfg.encoding.base_in) {
                    for &base_out in &axis(&s.base_out, cfg.encoding.base_out) {
                        for &alpha in &axis(&s.a_max_fraction, cfg.lwe.a_max_fraction) {
                            for &sigma in &axis(&s.sigma, cfg.lwe.sigma) {
                                for &seed in &axis(&s.seeds, cfg.seed) {
                                    let mut c = cfg.clone();
                                    c.sweep = Default::default();
                                    c.seed = seed;
                                    c.lwe.n = n;
                                    c.lwe.q = q;
                                    c.lwe.hamming = hamming;
                                    c.lwe.density = density;
                                    c.lwe.a_max_fraction = alpha;
                                    c.lwe.sigma = sigma;
                                    c.encoding.base_in = base_in;
                                    c.encoding.base_out = base_out;
                                    cells.push(c);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(cells)
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    run_sweep_with(cfg, model_factory, |_| {})
}

/// Runs one attack per cell. A cell that errors is recorded as failed and the
/// sweep moves on.
pub fn run_sweep_with<L, F, O>(cfg: &ExperimentConfig, mut make: F, mut on_cell: O) -> Result<Vec<SweepRow>>
where
    L: Learner,
    F: FnMut(&ExperimentConfig, &Instance, &mut ChaCha8Rng) -> Result<L>,
    O: FnMut(&SweepRow),
{
    let cells = sweep_cells(cfg)?;
    let mut rows = Vec::with_capacity(cells.len());
    for c in cells {
        let mut row = SweepRow {
            n: c.lwe.n,
            q: c.lwe.q,
            hamming: c.lwe.hamming,
            density: c.lwe.density,
            base_in: c.encoding.base_in,
            base_out: c.encoding.base_out,
            a_max_fraction: c.lwe.a_max_fraction,
            sigma: c.lwe.sigma,
            seed: c.seed,
            outcome: Outcome::Failed,
            bits_recovered: 0.0,
            method: None,
            epochs: 0,
            log2_samples: None,
            wall_clock_secs: 0.0,
            error: None,
        };
        match run_attack_with(&c, |a, b, r| make(a, b, r), |_| {}) {
            Ok(r) => {
                row.outcome = r.outcome;
                row.bits_recovered = r.bits_recovered;
                row.method = r.method;
                row.epochs = r.epochs;
                row.log2_samples = r.log2_samples;
                row.wall_clock_secs = r.wall_clock_secs;
                row.hamming = Some(r.hamming);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        on_cell(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
