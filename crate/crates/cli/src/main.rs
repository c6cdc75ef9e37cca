use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lwe_attack::data::{gen_samples, gen_secret, load_samples};
use lwe_attack::harness::{
    model_factory, run_attack_with, run_sweep_with, run_task_observed, substream, write_sweep_csv,
    Outcome, Stream,
};
use lwe_attack::model::write_curve_csv;
use lwe_attack::recovery::verify_secret;
use lwe_attack::{save_samples, Error, ExperimentConfig, Result, TaskKind};

#[derive(Parser)]
#[command(name = "lwe-attack", version, about = "Train a sequence model on LWE samples and recover the secret")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment config; defaults are used for anything missing.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set lwe.n=30`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let mut sets = self.overrides.clone();
        if let Some(s) = self.seed {
            sets.push(format!("seed={s}"));
        }
        let cfg = base.with_overrides(&sets)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a secret and a sample file.
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Number of rows.
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        /// Sample file; a `.gz` extension compresses it.
        #[arg(long)]
        out: PathBuf,
        /// Where to write the secret, one line of coordinates.
        #[arg(long)]
        secret_out: Option<PathBuf>,
    },
    /// Train a model on one task and report accuracy.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// 1d-modmul, nd-uniform or nd-binary.
        #[arg(long, default_value = "nd-binary")]
        task: TaskKind,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Run the full attack. Exits 0 on full recovery, 2 otherwise.
    Attack {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Run one attack per cell of the sweep axes and write a CSV table.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a candidate secret against a sample file. Exits 0 if accepted.
    Verify {
        #[arg(long)]
        samples: PathBuf,
        /// File holding the candidate bits.
        #[arg(long)]
        candidate: PathBuf,
        /// Error width; defaults to the value recorded in the sample file.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Print the effective config as TOML.
    Config {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(value: serde_json::Value, path: Option<&Path>) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, &value)?;
    writeln!(w)?;
    Ok(())
}

fn parse_bits(text: &str) -> Result<Vec<u8>> {
    let tokens: Vec<&str> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect();
    let digits: Vec<char> = if tokens.len() == 1 {
        tokens[0].chars().collect()
    } else {
        tokens.iter().flat_map(|t| t.chars()).collect()
    };
    if tokens.len() > 1 && tokens.iter().any(|t| t.len() != 1) {
        return Err(Error::InvalidParameter("candidate entries must be 0 or 1".into()));
    }
    digits
        .into_iter()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::InvalidParameter(format!(
                "candidate entries must be 0 or 1, got `{other}`"
            ))),
        })
        .collect()
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen {
            cfg,
            rows,
            out,
            secret_out,
        } => {
            let cfg = cfg.load()?;
            let mut rng = substream(cfg.seed, Stream::Data);
            let params = cfg.lwe.params()?;
            let secret = gen_secret(&params, &mut rng)?;
            let set = gen_samples(&params, &secret, rows, &mut rng)?;
            save_samples(&set, &out)?;
            let line = secret
                .coords()
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" ");
            match secret_out {
                Some(p) => std::fs::write(p, format!("{line}\n"))?,
                None => println!("{line}"),
            }
            eprintln!("wrote {rows} rows to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            cfg,
            task,
            report,
            curve,
        } => {
            let cfg = cfg.load()?;
            let r = run_task_observed(task, &cfg, |p| {
                eprintln!("epoch {} loss {:.4} acc {:.4}", p.epoch, p.loss, p.acc_tau);
            })?;
            if let Some(c) = curve {
                write_curve_csv(&r.curve, File::create(c)?)?;
            }
            write_json(serde_json::to_value(&r)?, report.as_deref())?;
            Ok(if r.success { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Attack {
            cfg,
            report,
            curve,
            quiet,
        } => {
            let cfg = cfg.load()?;
            let r = run_attack_with(&cfg, model_factory, |s| {
                if !quiet {
                    eprintln!(
                        "epoch {} loss {} acc_tau {:.4} candidates {}{} samples {} time {:.0}s",
                        s.epoch,
                        s.loss.map_or("-".into(), |l| format!("{l:.4}")),
                        s.acc_tau,
                        s.candidates,
                        if s.distinguisher_ran { " +distinguisher" } else { "" },
                        s.distinct_samples,
                        s.elapsed_secs
                    );
                }
            })?;
            if let Some(c) = curve {
                write_curve_csv(&r.curve, File::create(c)?)?;
            }
            write_json(serde_json::to_value(&r)?, report.as_deref())?;
            Ok(if r.outcome == Outcome::FullRecovery {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Sweep { cfg, out } => {
            let cfg = cfg.load()?;
            let rows = run_sweep_with(&cfg, model_factory, |r| {
                eprintln!(
                    "n={} q={} h={:?} seed={} -> {}{}",
                    r.n,
                    r.q,
                    r.hamming,
                    r.seed,
                    r.outcome,
                    r.error.as_deref().map_or(String::new(), |e| format!(" ({e})"))
                );
            })?;
            write_sweep_csv(&rows, output(out.as_deref())?)?;
            let any_full = rows.iter().any(|r| r.outcome == Outcome::FullRecovery);
            Ok(if any_full { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Verify {
            samples,
            candidate,
            sigma,
        } => {
            let set = load_samples(&samples)?;
            let bits = parse_bits(&std::fs::read_to_string(&candidate)?)?;
            let r = verify_secret(&bits, &set, sigma.unwrap_or(set.sigma()))?;
            write_json(serde_json::to_value(r)?, None)?;
            Ok(if r.accepted { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Config { cfg } => {
            print!("{}", cfg.load()?.to_toml()?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
