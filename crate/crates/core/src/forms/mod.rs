//! Laws-of-Form expressions with probabilistic semantics.
//!
//! A [`Form`] is a finite tree built from void, mark, atoms (sigmoid
//! halfspaces), cross (complement) and call (noisy-OR disjunction). Shared
//! subtrees can be moved into a [`Registry`] and referenced through
//! [`Form::ReEntry`]; evaluation through a reference is depth-guarded.

mod compress;
mod parse;
mod render;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::manifold::ParamStore;
use crate::{Error, Result};

pub use compress::compress;
pub use parse::{parse_form, MAX_PARSE_DEPTH};
pub use render::{alias, render};

/// Index of an atom in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomId(pub usize);

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.0)
    }
}

/// Key of a compressed subform in a [`Registry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegistryKey(pub u32);

impl fmt::Display for RegistryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Form {
    Void,
    Mark,
    Atom(AtomId),
    Cross(Box<Form>),
    /// Noisy-OR over an ordered, non-empty collection. Duplicates are kept.
    Call(Vec<Form>),
    ReEntry(RegistryKey),
}

impl Form {
    pub fn atom(i: usize) -> Form {
        Form::Atom(AtomId(i))
    }

    pub fn cross(inner: Form) -> Form {
        Form::Cross(Box::new(inner))
    }

    /// Panics if `children` is empty.
    pub fn call(children: Vec<Form>) -> Form {
        assert!(!children.is_empty(), "call requires at least one child");
        Form::Call(children)
    }

    /// Visit every atom id in the tree (registry references are not followed).
    pub fn for_each_atom(&self, f: &mut impl FnMut(AtomId)) {
        match self {
            Form::Atom(id) => f(*id),
            Form::Cross(g) => g.for_each_atom(f),
            Form::Call(children) => children.iter().for_each(|g| g.for_each_atom(f)),
            Form::Void | Form::Mark | Form::ReEntry(_) => {}
        }
    }

    pub fn for_each_reentry(&self, f: &mut impl FnMut(RegistryKey)) {
        match self {
            Form::ReEntry(k) => f(*k),
            Form::Cross(g) => g.for_each_reentry(f),
            Form::Call(children) => children.iter().for_each(|g| g.for_each_reentry(f)),
            Form::Void | Form::Mark | Form::Atom(_) => {}
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

impl Serialize for Form {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&render(self))
    }
}

impl<'de> Deserialize<'de> for Form {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_form(&text).map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_MAX_DEPTH: usize = 8;

/// Compressed subforms addressed by [`RegistryKey`].
#[derive(Clone, Debug, PartialEq)]
pub struct Registry {
    entries: BTreeMap<RegistryKey, Form>,
    max_depth: usize,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new(DEFAULT_MAX_DEPTH)
    }
}

impl Registry {
    pub fn new(max_depth: usize) -> Self {
        Registry {
            entries: BTreeMap::new(),
            max_depth,
        }
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn get(&self, key: RegistryKey) -> Result<&Form> {
        self.entries.get(&key).ok_or(Error::UnresolvedReEntry(key))
    }

    /// Store `form` under the next free key.
    pub fn insert(&mut self, form: Form) -> RegistryKey {
        let key = self
            .entries
            .keys()
            .next_back()
            .map_or(RegistryKey(0), |k| RegistryKey(k.0 + 1));
        self.entries.insert(key, form);
        key
    }

    /// Store `form` under an explicit key, replacing any previous entry.
    pub fn insert_at(&mut self, key: RegistryKey, form: Form) {
        self.entries.insert(key, form);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (RegistryKey, &Form)> {
        self.entries.iter().map(|(k, f)| (*k, f))
    }
}

/// Gradient of a form's evaluation, keyed by atom. Each value holds `d`
/// weight partials followed by the bias partial.
pub type GradMap = BTreeMap<AtomId, Vec<f64>>;

/// Number of primitive distinctions in `form`. A registry reference costs
/// 0.5 regardless of what it points to.
pub fn complexity(form: &Form, registry: &Registry) -> Result<f64> {
    Ok(match form {
        Form::Void | Form::Mark => 0.0,
        Form::Atom(_) => 1.0,
        Form::Cross(g) => 1.0 + complexity(g, registry)?,
        Form::Call(children) => {
            let mut total = 0.0;
            for g in children {
                total += complexity(g, registry)?;
            }
            total
        }
        Form::ReEntry(k) => {
            registry.get(*k)?;
            0.5
        }
    })
}

/// Soft evaluation in `[0, 1]`, starting at recursion depth 0.
pub fn eval_soft(form: &Form, x: &[f64], params: &ParamStore, registry: &Registry) -> Result<f64> {
    eval_soft_at_depth(form, x, params, registry, 0)
}

pub fn eval_soft_at_depth(
    form: &Form,
    x: &[f64],
    params: &ParamStore,
    registry: &Registry,
    depth: usize,
) -> Result<f64> {
    check_dim(x, params)?;
    eval_rec(form, x, params, registry, depth)
}

fn check_dim(x: &[f64], params: &ParamStore) -> Result<()> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

fn eval_rec(
    form: &Form,
    x: &[f64],
    params: &ParamStore,
    registry: &Registry,
    depth: usize,
) -> Result<f64> {
    if depth > registry.max_depth() {
        return Ok(0.5);
    }
    Ok(match form {
        Form::Void => 0.0,
        Form::Mark => 1.0,
        Form::Atom(id) => params.activation(*id, x)?,
        Form::Cross(g) => 1.0 - eval_rec(g, x, params, registry, depth)?,
        Form::Call(children) => {
            let mut miss = 1.0;
            for g in children {
                miss *= 1.0 - eval_rec(g, x, params, registry, depth)?;
            }
            1.0 - miss
        }
        Form::ReEntry(k) => eval_rec(registry.get(*k)?, x, params, registry, depth + 1)?,
    })
}

/// Gradient of [`eval_soft`] with respect to every atom in `form`.
///
/// A call child is weighted by the product of its siblings' complements,
/// which equals `(1 - P) / (1 - p_child)` away from saturation and is its
/// continuous extension when a child evaluates to exactly 1.
pub fn grad_soft(
    form: &Form,
    x: &[f64],
    params: &ParamStore,
    registry: &Registry,
) -> Result<GradMap> {
    check_dim(x, params)?;
    let mut out = GradMap::new();
    backprop(form, x, params, registry, 0, 1.0, &mut out)?;
    Ok(out)
}

/// Accumulate `upstream * d eval(form) / d theta` into `out`.
pub(crate) fn backprop(
    form: &Form,
    x: &[f64],
    params: &ParamStore,
    registry: &Registry,
    depth: usize,
    upstream: f64,
    out: &mut GradMap,
) -> Result<()> {
    if depth > registry.max_depth() {
        return Ok(());
    }
    match form {
        Form::Void | Form::Mark => {}
        Form::Atom(id) => {
            let p = params.activation(*id, x)?;
            let s = upstream * p * (1.0 - p);
            let slot = out.entry(*id).or_insert_with(|| vec![0.0; x.len() + 1]);
            for (g, xi) in slot.iter_mut().zip(x) {
                *g += s * xi;
            }
            slot[x.len()] += s;
        }
        Form::Cross(g) => backprop(g, x, params, registry, depth, -upstream, out)?,
        Form::Call(children) => {
            let misses = children
                .iter()
                .map(|g| eval_rec(g, x, params, registry, depth).map(|p| 1.0 - p))
                .collect::<Result<Vec<_>>>()?;
            // suffix[i] = prod of misses[i..]
            let mut suffix = vec![1.0; misses.len() + 1];
            for i in (0..misses.len()).rev() {
                suffix[i] = suffix[i + 1] * misses[i];
            }
            let mut prefix = 1.0;
            for (i, g) in children.iter().enumerate() {
                let others = prefix * suffix[i + 1];
                backprop(g, x, params, registry, depth, upstream * others, out)?;
                prefix *= misses[i];
            }
        }
        Form::ReEntry(k) => backprop(
            registry.get(*k)?,
            x,
            params,
            registry,
            depth + 1,
            upstream,
            out,
        )?,
    }
    Ok(())
}

/// `f ∧ g`, written as `~(|[~(f), ~(g)])`.
pub fn conj(f: Form, g: Form) -> Form {
    Form::cross(Form::Call(vec![Form::cross(f), Form::cross(g)]))
}

/// `f ∧ ¬g`, written as `~(|[~(f), g])`. This is the exception shape a
/// wedge produces.
pub fn conj_not(f: Form, g: Form) -> Form {
    Form::cross(Form::Call(vec![Form::cross(f), g]))
}

/// Structural occurrence counts of every subform, used by compression.
pub(crate) fn subform_counts<'a>(form: &'a Form, counts: &mut HashMap<&'a Form, usize>) {
    *counts.entry(form).or_insert(0) += 1;
    match form {
        Form::Cross(g) => subform_counts(g, counts),
        Form::Call(children) => children.iter().for_each(|g| subform_counts(g, counts)),
        _ => {}
    }
}
