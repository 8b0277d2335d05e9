//! Atom parameters and their information-geometric updates.
//!
//! Each atom owns an extended parameter vector `[w; b]` of length `d + 1`
//! and a matching diagonal Fisher estimate. Updates divide the gradient by
//! `fisher^exponent + eps`; with the default exponent of 0.5 this is the
//! RMS-normalised step.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::forms::{AtomId, GradMap};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AtomParams {
    /// Weights followed by the bias.
    pub theta: Vec<f64>,
    /// Diagonal Fisher estimate, one entry per element of `theta`.
    pub fisher: Vec<f64>,
}

impl AtomParams {
    pub fn weights(&self) -> &[f64] {
        &self.theta[..self.theta.len() - 1]
    }

    pub fn bias(&self) -> f64 {
        self.theta[self.theta.len() - 1]
    }
}

/// Dense, append-only collection of atom parameters over a `d`-dimensional
/// input space.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    dim: usize,
    atoms: Vec<AtomParams>,
}

impl ParamStore {
    pub fn new(dim: usize) -> Self {
        ParamStore {
            dim,
            atoms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// New atom with Fisher initialised to ones.
    pub fn alloc_atom(&mut self, weights: Vec<f64>, bias: f64) -> Result<AtomId> {
        if weights.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: weights.len(),
            });
        }
        let mut theta = weights;
        theta.push(bias);
        let fisher = vec![1.0; theta.len()];
        self.atoms.push(AtomParams { theta, fisher });
        Ok(AtomId(self.atoms.len() - 1))
    }

    pub fn atom(&self, id: AtomId) -> Result<&AtomParams> {
        self.atoms.get(id.0).ok_or(Error::UnknownAtom(id))
    }

    pub fn atom_mut(&mut self, id: AtomId) -> Result<&mut AtomParams> {
        self.atoms.get_mut(id.0).ok_or(Error::UnknownAtom(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (AtomId, &AtomParams)> {
        self.atoms.iter().enumerate().map(|(i, a)| (AtomId(i), a))
    }

    /// `w·x + b`. The caller guarantees `x.len() == dim`.
    pub fn pre_activation(&self, id: AtomId, x: &[f64]) -> Result<f64> {
        let atom = self.atom(id)?;
        let dot: f64 = atom.weights().iter().zip(x).map(|(w, xi)| w * xi).sum();
        Ok(dot + atom.bias())
    }

    pub fn activation(&self, id: AtomId, x: &[f64]) -> Result<f64> {
        self.pre_activation(id, x).map(sigmoid)
    }

    fn check_keys(&self, grads: &GradMap) -> Result<()> {
        for (id, g) in grads {
            let atom = self.atom(*id)?;
            if g.len() != atom.theta.len() {
                return Err(Error::DimensionMismatch {
                    expected: atom.theta.len(),
                    got: g.len(),
                });
            }
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NatGradConfig {
    pub learning_rate: f64,
    pub fisher_decay: f64,
    pub epsilon: f64,
    /// Power applied to the Fisher entry in the step denominator.
    pub fisher_exponent: f64,
}

impl Default for NatGradConfig {
    fn default() -> Self {
        NatGradConfig {
            learning_rate: 0.02,
            fisher_decay: 0.95,
            epsilon: 1e-8,
            fisher_exponent: 0.5,
        }
    }
}

/// Random unit direction through `x`, offset so that `w·x + b = 0.1`.
pub fn genesis_atom_init<R: Rng + ?Sized>(rng: &mut R, x: &[f64]) -> (Vec<f64>, f64) {
    assert!(!x.is_empty(), "input dimension must be at least 1");
    let w = loop {
        let draw: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = draw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            break draw.into_iter().map(|v| v / norm).collect::<Vec<_>>();
        }
    };
    let dot: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    (w, -dot + 0.1)
}

/// `fisher ← β·fisher + (1 − β)·g²` on every coordinate present in `grads`.
pub fn fisher_update(store: &mut ParamStore, grads: &GradMap, decay: f64) -> Result<()> {
    store.check_keys(grads)?;
    for (id, g) in grads {
        let atom = &mut store.atoms[id.0];
        for (f, gj) in atom.fisher.iter_mut().zip(g) {
            *f = decay * *f + (1.0 - decay) * gj * gj;
        }
    }
    Ok(())
}

/// Preconditioned step `θ ← θ − η·g / (fisher^p + ε)`. Expects the Fisher
/// estimate to already include this gradient.
pub fn natural_step(store: &mut ParamStore, grads: &GradMap, cfg: &NatGradConfig) -> Result<()> {
    store.check_keys(grads)?;
    for (id, g) in grads {
        let atom = &mut store.atoms[id.0];
        for ((t, f), gj) in atom.theta.iter_mut().zip(&atom.fisher).zip(g) {
            *t -= cfg.learning_rate * gj / (f.powf(cfg.fisher_exponent) + cfg.epsilon);
        }
    }
    Ok(())
}

/// Unpreconditioned step `θ ← θ − η·g`.
pub fn plain_step(store: &mut ParamStore, grads: &GradMap, learning_rate: f64) -> Result<()> {
    store.check_keys(grads)?;
    for (id, g) in grads {
        for (t, gj) in store.atoms[id.0].theta.iter_mut().zip(g) {
            *t -= learning_rate * gj;
        }
    }
    Ok(())
}

/// Ridge fit of a separating halfspace: targets +1 for `positives`, −1 for
/// `negatives`, over extended inputs `[x; 1]`. The ridge term applies to
/// the bias as well.
pub fn fit_separator(positives: &[&[f64]], negatives: &[&[f64]], ridge: f64) -> (Vec<f64>, f64) {
    let d = positives
        .first()
        .or(negatives.first())
        .map(|x| x.len())
        .expect("separator needs at least one example");
    let n = d + 1;
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    let rows = positives
        .iter()
        .map(|x| (x, 1.0))
        .chain(negatives.iter().map(|x| (x, -1.0)));
    let mut ext = vec![1.0; n];
    for (x, target) in rows {
        ext[..d].copy_from_slice(x);
        for i in 0..n {
            rhs[i] += ext[i] * target;
            for j in 0..=i {
                gram[i * n + j] += ext[i] * ext[j];
            }
        }
    }
    for i in 0..n {
        gram[i * n + i] += ridge;
        for j in 0..i {
            gram[j * n + i] = gram[i * n + j];
        }
    }
    let v = cholesky_solve(&mut gram, &rhs, n);
    let bias = v[d];
    let mut w = v;
    w.truncate(d);
    (w, bias)
}

/// Solve `A v = b` for symmetric positive-definite `A` (row-major, n×n),
/// overwriting `A` with its Cholesky factor.
fn cholesky_solve(a: &mut [f64], b: &[f64], n: usize) -> Vec<f64> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        let diag = diag.max(f64::MIN_POSITIVE).sqrt();
        a[j * n + j] = diag;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / diag;
        }
    }
    // L y = b
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i * n + k] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    // Lᵀ v = y
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k * n + i] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grads(entries: &[(usize, &[f64])]) -> GradMap {
        entries
            .iter()
            .map(|(i, g)| (AtomId(*i), g.to_vec()))
            .collect()
    }

    #[test]
    fn alloc_assigns_dense_ids() {
        let mut store = ParamStore::new(1);
        assert_eq!(store.alloc_atom(vec![1.0], 0.0).unwrap(), AtomId(0));
        assert_eq!(store.alloc_atom(vec![2.0], 1.0).unwrap(), AtomId(1));
        assert_eq!(store.atom(AtomId(1)).unwrap().fisher, vec![1.0, 1.0]);
        assert!(matches!(
            store.alloc_atom(vec![1.0, 2.0], 0.0),
            Err(Error::DimensionMismatch {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn allocated_atom_is_a_sigmoid_halfspace() {
        let mut store = ParamStore::new(2);
        let id = store.alloc_atom(vec![0.5, -1.5], 0.25).unwrap();
        let x = [2.0, 0.4];
        let z: f64 = 0.5 * 2.0 - 1.5 * 0.4 + 0.25;
        assert_abs_diff_eq!(
            store.activation(id, &x).unwrap(),
            1.0 / (1.0 + (-z).exp()),
            epsilon = 1e-15
        );
    }

    #[test]
    fn genesis_init_centers_on_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = [2.0];
        let (w, b) = genesis_atom_init(&mut rng, &x);
        assert_abs_diff_eq!(w[0].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[0] * 2.0 + b, 0.1, epsilon = 1e-12);
        if w[0] > 0.0 {
            assert_abs_diff_eq!(b, -1.9, epsilon = 1e-12);
        }

        let x = [0.3, -1.2, 4.0, 0.0, 2.2];
        let (w, b) = genesis_atom_init(&mut rng, &x);
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        let mut store = ParamStore::new(5);
        let id = store.alloc_atom(w, b).unwrap();
        assert_abs_diff_eq!(
            store.activation(id, &x).unwrap(),
            0.52497918747894,
            epsilon = 1e-10
        );
    }

    #[test]
    fn fisher_update_examples() {
        let mut store = ParamStore::new(1);
        store.alloc_atom(vec![0.0], 0.0).unwrap();
        store.alloc_atom(vec![0.0], 0.0).unwrap();
        fisher_update(&mut store, &grads(&[(0, &[2.0, 0.0])]), 0.95).unwrap();
        let f = &store.atom(AtomId(0)).unwrap().fisher;
        assert_abs_diff_eq!(f[0], 1.15, epsilon = 1e-15);
        assert_abs_diff_eq!(f[1], 0.95, epsilon = 1e-15);
        assert_eq!(store.atom(AtomId(1)).unwrap().fisher, vec![1.0, 1.0]);
    }

    #[test]
    fn fisher_converges_to_squared_gradient() {
        let mut store = ParamStore::new(1);
        store.alloc_atom(vec![0.0], 0.0).unwrap();
        let g = grads(&[(0, &[3.0, 0.5])]);
        for _ in 0..500 {
            fisher_update(&mut store, &g, 0.95).unwrap();
        }
        // closed form: g² + (1 − g²)·β^500
        let f = &store.atom(AtomId(0)).unwrap().fisher;
        assert_abs_diff_eq!(f[0], 9.0, epsilon = 1e-6);
        assert_abs_diff_eq!(f[1], 0.25, epsilon = 1e-6);
    }

    #[test]
    fn unknown_atom_is_rejected() {
        let mut store = ParamStore::new(1);
        let g = grads(&[(4, &[1.0, 1.0])]);
        assert!(matches!(
            fisher_update(&mut store, &g, 0.9),
            Err(Error::UnknownAtom(AtomId(4)))
        ));
        let cfg = NatGradConfig::default();
        assert!(matches!(
            natural_step(&mut store, &g, &cfg),
            Err(Error::UnknownAtom(AtomId(4)))
        ));
    }

    #[test]
    fn natural_step_examples() {
        let mut store = ParamStore::new(1);
        store.alloc_atom(vec![0.0], 0.0).unwrap();
        let cfg = NatGradConfig {
            epsilon: 0.0,
            ..NatGradConfig::default()
        };
        natural_step(&mut store, &grads(&[(0, &[1.0, 0.0])]), &cfg).unwrap();
        assert_abs_diff_eq!(
            store.atom(AtomId(0)).unwrap().theta[0],
            -0.02,
            epsilon = 1e-15
        );
        assert_eq!(store.atom(AtomId(0)).unwrap().theta[1], 0.0);
    }

    #[test]
    fn natural_step_matches_formula_coordinatewise() {
        let mut store = ParamStore::new(2);
        store.alloc_atom(vec![0.3, -0.7], 0.1).unwrap();
        store.atom_mut(AtomId(0)).unwrap().fisher = vec![4.0, 0.25, 2.0];
        let g = [0.5, -1.0, 0.2];
        let cfg = NatGradConfig::default();
        natural_step(&mut store, &grads(&[(0, &g)]), &cfg).unwrap();
        let expected = [
            0.3 - 0.02 * 0.5 / (2.0 + 1e-8),
            -0.7 + 0.02 * 1.0 / (0.5 + 1e-8),
            0.1 - 0.02 * 0.2 / (2f64.sqrt() + 1e-8),
        ];
        for (a, e) in store.atom(AtomId(0)).unwrap().theta.iter().zip(expected) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn steps_leave_absent_atoms_alone() {
        let mut store = ParamStore::new(1);
        store.alloc_atom(vec![0.4], 0.2).unwrap();
        store.alloc_atom(vec![-0.4], 0.1).unwrap();
        let before = store.atom(AtomId(1)).unwrap().clone();
        let g = grads(&[(0, &[1.0, 1.0])]);
        fisher_update(&mut store, &g, 0.95).unwrap();
        natural_step(&mut store, &g, &NatGradConfig::default()).unwrap();
        plain_step(&mut store, &g, 0.1).unwrap();
        assert_eq!(store.atom(AtomId(1)).unwrap(), &before);
    }

    #[test]
    fn separator_hand_example() {
        let (w, b) = fit_separator(&[&[1.0]], &[&[-1.0]], 1.0);
        assert_abs_diff_eq!(w[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn separator_mirror_symmetry_gives_zero_bias() {
        let pos: Vec<&[f64]> = vec![&[1.0, 2.0], &[0.5, -1.0]];
        let neg: Vec<&[f64]> = vec![&[-1.0, -2.0], &[-0.5, 1.0]];
        let (_, b) = fit_separator(&pos, &neg, 0.5);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-12);
    }
}
