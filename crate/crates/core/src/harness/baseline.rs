use crate::data::{Dataset, Split};

/// Softmax-linear classifier fit by full-batch gradient descent on
///
/// ```text
/// (1/n) Σ −log p(y_i | x_i) + (1 / 2Cn) ‖W‖²
/// ```
///
/// which is the usual `C`-weighted L2 logistic objective divided by `n`.
/// Biases are not penalised.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    /// `k × d`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Gradient steps taken.
    pub iterations: usize,
}

/// Stop once every gradient component is below this.
pub const TOLERANCE: f64 = 1e-6;

impl LogisticModel {
    pub fn fit(ds: &Dataset, inverse_l2: f64, max_iter: usize, learning_rate: f64) -> Self {
        let (k, d, n) = (ds.n_classes(), ds.dim(), ds.len().max(1) as f64);
        let l2 = 1.0 / (inverse_l2 * n);
        let mut model = LogisticModel {
            weights: vec![vec![0.0; d]; k],
            bias: vec![0.0; k],
            iterations: 0,
        };
        let mut gw = vec![vec![0.0; d]; k];
        let mut gb = vec![0.0; k];
        for _ in 0..max_iter {
            for (row, w) in gw.iter_mut().zip(&model.weights) {
                for (g, wj) in row.iter_mut().zip(w) {
                    *g = l2 * wj;
                }
            }
            gb.iter_mut().for_each(|g| *g = 0.0);
            for (x, &y) in ds.x.iter().zip(&ds.y) {
                let p = model.probabilities(x);
                for c in 0..k {
                    let r = (p[c] - f64::from(u8::from(c == y))) / n;
                    gb[c] += r;
                    for (g, xj) in gw[c].iter_mut().zip(x) {
                        *g += r * xj;
                    }
                }
            }
            let largest = gw
                .iter()
                .flatten()
                .chain(&gb)
                .fold(0.0f64, |m, g| m.max(g.abs()));
            if largest < TOLERANCE {
                break;
            }
            for c in 0..k {
                for (w, g) in model.weights[c].iter_mut().zip(&gw[c]) {
                    *w -= learning_rate * g;
                }
                model.bias[c] -= learning_rate * gb[c];
            }
            model.iterations += 1;
        }
        model
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|u| (u - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let p = self.probabilities(x);
        (0..p.len()).fold(0, |best, c| if p[c] > p[best] { c } else { best })
    }

    pub fn accuracy(&self, ds: &Dataset) -> f64 {
        if ds.is_empty() {
            return 0.0;
        }
        let hits =
            ds.x.iter()
                .zip(&ds.y)
                .filter(|(x, &y)| self.predict(x) == y)
                .count();
        hits as f64 / ds.len() as f64
    }
}

/// Test accuracy of a `C = 1` model trained on `split.train` for at most
/// `epochs` full-batch steps.
pub fn logistic_baseline(split: &Split, epochs: usize, learning_rate: f64) -> f64 {
    LogisticModel::fit(&split.train, 1.0, epochs, learning_rate).accuracy(&split.test)
}
