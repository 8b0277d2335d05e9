use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{phase_trajectory, run, write_run_log, Ablation, Regime, RunConfig, RunRecord};
use crate::engine::EngineConfig;
use crate::Result;

/// Trailing window for the running accuracy in phase files.
const PHASE_WINDOW: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub datasets: Vec<String>,
    pub regimes: Vec<Regime>,
    /// Seeds `0..seeds` are run for every (dataset, regime) cell.
    pub seeds: u64,
    pub epochs: usize,
    pub engine: EngineConfig,
    pub ablation: Ablation,
    /// Where run logs, phase files and `summary.csv` go, if anywhere.
    pub out: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn new(datasets: &[&str], regimes: &[Regime], seeds: u64) -> Self {
        SuiteConfig {
            datasets: datasets.iter().map(|s| s.to_string()).collect(),
            regimes: regimes.to_vec(),
            seeds,
            epochs: 20,
            engine: EngineConfig::default(),
            ablation: Ablation::default(),
            out: None,
        }
    }

    /// The cross product in (dataset, regime, seed) order.
    pub fn runs(&self) -> Vec<RunConfig> {
        let mut out = Vec::new();
        for d in &self.datasets {
            for &regime in &self.regimes {
                for seed in 0..self.seeds {
                    out.push(RunConfig {
                        dataset: d.clone(),
                        regime,
                        seed,
                        epochs: self.epochs,
                        engine: self.engine.clone(),
                        ablation: self.ablation,
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub dataset: String,
    pub regime: Regime,
    pub seed: u64,
    pub test_accuracy: f64,
    pub train_accuracy: f64,
    pub n_struct: usize,
    pub freeze_step: Option<u64>,
    pub final_energy: f64,
    pub final_complexity: f64,
    pub n_rules: usize,
    pub deaths: usize,
}

impl SuiteRow {
    pub fn from_record(cfg: &RunConfig, record: &RunRecord) -> Self {
        let s = &record.summary;
        SuiteRow {
            dataset: record.meta.dataset.clone(),
            regime: cfg.regime,
            seed: cfg.seed,
            test_accuracy: s.test_accuracy,
            train_accuracy: s.train_accuracy,
            n_struct: s.n_struct,
            freeze_step: s.freeze_step,
            final_energy: s.energy,
            final_complexity: s.complexity,
            n_rules: s.rules.len(),
            deaths: s.deaths,
        }
    }
}

/// Run every configuration in parallel. Rows come back in
/// (dataset, regime, seed) order whatever the scheduling.
pub fn suite(cfg: &SuiteConfig) -> Result<Vec<SuiteRow>> {
    let rows = cfg
        .runs()
        .par_iter()
        .map(|rc| {
            let record = run(rc)?;
            if let Some(dir) = &cfg.out {
                write_run_files(&record, dir)?;
            }
            Ok(SuiteRow::from_record(rc, &record))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        write_summary_csv(&rows, File::create(dir.join("summary.csv"))?)?;
    }
    Ok(rows)
}

pub fn write_summary_csv<W: Write>(rows: &[SuiteRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// File stem for a run: `<dataset>_<regime>_<seed>`.
pub fn run_stem(record: &RunRecord) -> String {
    format!(
        "{}_{}_{}",
        record.meta.dataset, record.meta.regime, record.meta.seed
    )
}

/// Write `runs/<stem>.jsonl` and `phase/<stem>.csv` under `dir`.
pub fn write_run_files(record: &RunRecord, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("runs"))?;
    fs::create_dir_all(dir.join("phase"))?;
    let stem = run_stem(record);
    write_run_log(
        record,
        BufWriter::new(File::create(
            dir.join("runs").join(format!("{stem}.jsonl")),
        )?),
    )?;
    write_phase_csv(record, &dir.join("phase").join(format!("{stem}.csv")))
}

/// Phase trajectory as CSV: t, complexity, energy, running accuracy, n_hyp.
pub fn write_phase_csv(record: &RunRecord, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    for p in phase_trajectory(record, PHASE_WINDOW) {
        w.serialize(p).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub dataset: String,
    pub regime: Regime,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

/// Test-accuracy mean and standard deviation per (dataset, regime), in
/// order of first appearance.
pub fn summarize(rows: &[SuiteRow]) -> Vec<CellStats> {
    let mut cells: Vec<(String, Regime, Vec<f64>)> = Vec::new();
    for r in rows {
        match cells
            .iter_mut()
            .find(|(d, g, _)| *d == r.dataset && *g == r.regime)
        {
            Some((_, _, v)) => v.push(r.test_accuracy),
            None => cells.push((r.dataset.clone(), r.regime, vec![r.test_accuracy])),
        }
    }
    cells
        .into_iter()
        .map(|(dataset, regime, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            CellStats {
                dataset,
                regime,
                runs: v.len(),
                mean,
                std,
            }
        })
        .collect()
}
