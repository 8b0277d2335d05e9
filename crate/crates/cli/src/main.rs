use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, ErrorKind, Write as _};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use distinction_core::engine::EngineConfig;
use distinction_core::harness::{
    self, export_rules, load_config_file, logistic_baseline, prepare_split, read_run_log,
    summarize, Ablation, Regime, RunConfig, SuiteConfig,
};

#[derive(Parser)]
#[command(
    name = "distinction",
    version,
    about = "Run and inspect distinction-engine experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one engine and report test accuracy and rules.
    Run {
        #[arg(long, default_value = "iris")]
        dataset: String,
        #[arg(long, default_value = "B")]
        regime: Regime,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        /// Directory for the run log, phase file and rules.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Run every dataset × regime × seed combination.
    Suite {
        #[arg(long, value_delimiter = ',', default_value = "iris,wine,bc")]
        datasets: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "A,B,C")]
        regimes: Vec<Regime>,
        /// Seeds 0..N.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Print the rules recorded in a run log.
    Rules {
        #[arg(long = "from")]
        from: PathBuf,
    },
    /// Logistic-regression reference accuracy.
    Baseline {
        #[arg(long, default_value = "iris")]
        dataset: String,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        #[arg(long, default_value_t = 0.5)]
        lr: f64,
    },
}

#[derive(Args)]
struct EngineArgs {
    /// key = value file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Plain gradient steps instead of natural-gradient ones.
    #[arg(long)]
    no_natgrad: bool,
    #[arg(long)]
    lambda_c: Option<f64>,
    #[arg(long)]
    lambda_e: Option<f64>,
    #[arg(long)]
    cooldown: Option<u64>,
}

impl EngineArgs {
    fn resolve(&self) -> Result<(EngineConfig, Ablation)> {
        let mut cfg = match &self.config {
            Some(path) => {
                load_config_file(path).with_context(|| format!("reading {}", path.display()))?
            }
            None => EngineConfig::default(),
        };
        if let Some(v) = self.lambda_c {
            cfg.lambda_complexity = v;
        }
        if let Some(v) = self.lambda_e {
            cfg.lambda_energy = v;
        }
        if let Some(v) = self.cooldown {
            cfg.cooldown = v;
        }
        cfg.validate()?;
        let ablation = Ablation {
            no_natural_gradient: self.no_natgrad,
            ..Ablation::default()
        };
        Ok((cfg, ablation))
    }
}

fn main() -> Result<()> {
    let text = execute(Cli::parse().command)?;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn execute(command: Command) -> Result<String> {
    let mut report = String::new();
    match command {
        Command::Run {
            dataset,
            regime,
            seed,
            epochs,
            out,
            engine,
        } => {
            let (engine, ablation) = engine.resolve()?;
            let cfg = RunConfig {
                dataset,
                regime,
                seed,
                epochs,
                engine,
                ablation,
            };
            let started = Instant::now();
            let record = harness::run(&cfg)?;
            let elapsed = started.elapsed();
            let s = &record.summary;
            writeln!(
                report,
                "{} regime {} seed {}: test {:.1}%  train {:.1}%  rules {}  n_struct {}  freeze {}  E {:.0}  C {:.1}  ({:.2}s)",
                record.meta.dataset,
                regime,
                seed,
                100.0 * s.test_accuracy,
                100.0 * s.train_accuracy,
                s.rules.len(),
                s.n_struct,
                s.freeze_step.map_or("-".to_string(), |t| t.to_string()),
                s.energy,
                s.complexity,
                elapsed.as_secs_f64(),
            )?;
            for note in &record.meta.notes {
                writeln!(report, "note: {note}")?;
            }
            let rules = export_rules(&record);
            report.push_str(&rules);
            if let Some(dir) = out {
                harness::write_run_files(&record, &dir)?;
                fs::write(
                    dir.join(format!("{}.rules.txt", harness::run_stem(&record))),
                    rules,
                )?;
                writeln!(report, "wrote {}", dir.display())?;
            }
        }
        Command::Suite {
            datasets,
            regimes,
            seeds,
            epochs,
            out,
            engine,
        } => {
            if seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let (engine, ablation) = engine.resolve()?;
            let cfg = SuiteConfig {
                datasets,
                regimes,
                seeds,
                epochs,
                engine,
                ablation,
                out: out.clone(),
            };
            let started = Instant::now();
            let rows = harness::suite(&cfg)?;
            for cell in summarize(&rows) {
                writeln!(
                    report,
                    "{:<8} {}  {:5.1} ± {:4.1}  (n={})",
                    cell.dataset,
                    cell.regime,
                    100.0 * cell.mean,
                    100.0 * cell.std,
                    cell.runs
                )?;
            }
            writeln!(
                report,
                "{} runs in {:.1}s",
                rows.len(),
                started.elapsed().as_secs_f64()
            )?;
            if let Some(dir) = out {
                writeln!(report, "wrote {}", dir.join("summary.csv").display())?;
            }
        }
        Command::Rules { from } => {
            let file = File::open(&from).with_context(|| format!("opening {}", from.display()))?;
            let record = read_run_log(BufReader::new(file))?;
            report.push_str(&export_rules(&record));
        }
        Command::Baseline {
            dataset,
            seeds,
            max_iter,
            lr,
        } => {
            let mut accs = Vec::new();
            for seed in 0..seeds {
                let split = prepare_split(&RunConfig::new(&dataset, Regime::B, seed))?;
                accs.push(logistic_baseline(&split, max_iter, lr));
            }
            let n = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / n;
            writeln!(
                report,
                "{dataset} logistic regression: {:.1}% over {seeds} seeds",
                100.0 * mean
            )?;
        }
    }
    Ok(report)
}
