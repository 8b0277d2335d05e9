//! Dataset loading, stratified splitting and standardization.
//!
//! The four benchmark tables ship with the crate under `data/` and are
//! compiled in, so nothing is fetched at run time.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{ClassLabel, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    /// Row-major `n × d`.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<ClassLabel>,
    /// Original label text, indexed by class label.
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

/// Load a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(file, &name, label)
}

/// Parse CSV text. Labels become dense integers in order of first
/// appearance; every other column must be numeric. Rows and columns in
/// errors are 1-based, counting the header as row 1.
pub fn parse_csv<R: Read>(reader: R, name: &str, label: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
    let width = headers.len();
    let label_idx = match label {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => return Err(Error::MissingLabelColumn(i.to_string())),
        LabelColumn::Name(n) => headers
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| Error::MissingLabelColumn(n.clone()))?,
        LabelColumn::Last if width > 0 => width - 1,
        LabelColumn::Last => return Err(Error::MissingLabelColumn("last".into())),
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, ClassLabel> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| csv_error(&e, row))?;
        if rec.len() != width {
            return Err(Error::ColumnCount {
                row,
                expected: width,
                found: rec.len(),
            });
        }
        let mut features = Vec::with_capacity(width.saturating_sub(1));
        for (col, field) in rec.iter().enumerate() {
            if col == label_idx {
                let next = class_names.len();
                let k = *class_index.entry(field.to_string()).or_insert_with(|| {
                    class_names.push(field.to_string());
                    next
                });
                y.push(k);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Csv {
                    row,
                    column: col + 1,
                    message: format!("{field:?} is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        row,
                        column: col + 1,
                        message: format!("{field:?} is not finite"),
                    });
                }
                features.push(v);
            }
        }
        x.push(features);
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset {
        name: name.to_string(),
        feature_names,
        x,
        y,
        class_names,
    })
}

fn csv_error(e: &csv::Error, row: usize) -> Error {
    let row = e.position().map_or(row, |p| p.line() as usize);
    Error::Csv {
        row,
        column: 0,
        message: e.to_string(),
    }
}

const IRIS: &str = include_str!("../data/iris.csv");
const WINE: &str = include_str!("../data/wine.csv");
const BREAST_CANCER: &str = include_str!("../data/breast_cancer.csv");
const DIGITS: &str = include_str!("../data/digits.csv");

/// Names accepted by [`bundled`].
pub const BUNDLED: [&str; 4] = ["iris", "wine", "bc", "digits"];

/// One of the compiled-in benchmark tables. `bc` and `breast_cancer` are
/// the same table.
pub fn bundled(name: &str) -> Result<Dataset> {
    let (canonical, text) = match name.to_ascii_lowercase().as_str() {
        "iris" => ("iris", IRIS),
        "wine" => ("wine", WINE),
        "bc" | "breast_cancer" | "breast-cancer" => ("bc", BREAST_CANCER),
        "digits" => ("digits", DIGITS),
        _ => return Err(Error::UnknownDataset(name.to_string())),
    };
    parse_csv(
        text.as_bytes(),
        canonical,
        &LabelColumn::Name("target".into()),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    /// Source row of each train sample.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Per-class shuffle with a seeded generator; each class contributes
/// `round(n_k · fraction)` rows to train (at least one to each side).
pub fn stratified_split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidFraction(train_fraction));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes()];
    for (i, &k) in ds.y.iter().enumerate() {
        by_class[k].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (k, mut rows) in by_class.into_iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: ds.class_names[k].clone(),
                count: rows.len(),
            });
        }
        rows.shuffle(&mut rng);
        let n_train =
            ((rows.len() as f64 * train_fraction).round() as usize).clamp(1, rows.len() - 1);
        train_rows.extend_from_slice(&rows[..n_train]);
        test_rows.extend_from_slice(&rows[n_train..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(Split {
        train: ds.subset(&train_rows),
        test: ds.subset(&test_rows),
        seed,
        train_rows,
        test_rows,
    })
}

pub const STD_FLOOR: f64 = 1e-12;

/// Per-feature `(mean, std)` of `ds`, population variance.
pub fn feature_stats(ds: &Dataset) -> Vec<(f64, f64)> {
    let n = ds.len() as f64;
    (0..ds.dim())
        .map(|j| {
            let mean = ds.x.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = ds.x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect()
}

/// Z-score both partitions with statistics from the train rows only.
pub fn standardize(split: &Split) -> Split {
    let stats = feature_stats(&split.train);
    let transform = |ds: &Dataset| {
        let mut out = ds.clone();
        for row in &mut out.x {
            for (v, (mean, std)) in row.iter_mut().zip(&stats) {
                *v = (*v - mean) / std.max(STD_FLOOR);
            }
        }
        out
    };
    Split {
        train: transform(&split.train),
        test: transform(&split.test),
        ..split.clone()
    }
}
