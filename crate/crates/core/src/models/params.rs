//! Named, ordered parameter storage shared by all models.
//!
//! Parameters live here between steps as plain tensors. Each training step
//! binds them into a fresh graph as gradient-tracked leaves, and after
//! backward the accumulated gradients are read back out in insertion order —
//! a fixed order, so gradient summation across items and optimizer updates
//! are bitwise reproducible run to run.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{checkpoint, Adam, Graph, Tensor, TensorId};

#[derive(Clone, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

/// Leaf ids of one binding of a [`ParamSet`] into a graph.
pub struct Bound {
    ids: HashMap<String, TensorId>,
}

impl Bound {
    /// Leaf id for `name`. Missing names are a programming error, not an
    /// input error, so this panics rather than returning a result.
    pub fn id(&self, name: &str) -> TensorId {
        match self.ids.get(name) {
            Some(&id) => id,
            None => panic!("parameter {name:?} was never registered"),
        }
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name {name:?}")));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    /// Mutable view of one parameter's values (shape is fixed).
    pub fn data_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let i = *self.index.get(name)?;
        Some(self.entries[i].1.data_mut())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Bind every parameter as a leaf of `graph`. With `trainable` false the
    /// leaves are constants (a frozen model).
    pub fn bind(&self, graph: &mut Graph, trainable: bool) -> Bound {
        let mut ids = HashMap::with_capacity(self.entries.len());
        for (name, tensor) in &self.entries {
            ids.insert(name.clone(), graph.leaf(tensor.clone(), trainable));
        }
        Bound { ids }
    }

    /// Gradients of one bound copy, in insertion order. Leaves backward
    /// never reached yield zeros (a parameter can be unused under some
    /// wiring variants).
    pub fn grads(&self, graph: &Graph, bound: &Bound) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|(name, tensor)| match graph.grad(bound.id(name)) {
                Some(g) => g.to_vec(),
                None => vec![0.0; tensor.numel()],
            })
            .collect()
    }

    /// Sum per-parameter gradient lists elementwise (fixed order).
    pub fn sum_grads(&self, acc: &mut [Vec<f64>], item: &[Vec<f64>]) {
        for (a, b) in acc.iter_mut().zip(item) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn zero_grads_like(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|(_, t)| vec![0.0; t.numel()]).collect()
    }

    /// One optimizer update per parameter, insertion order, using the
    /// parameter's name as its moment-slot key (prefixed per model by the
    /// caller's naming convention).
    pub fn apply_updates(&mut self, opt: &mut Adam, grads: &[Vec<f64>]) -> Result<()> {
        self.apply_updates_except(opt, grads, |_| false)
    }

    /// Like [`ParamSet::apply_updates`], but names matching `frozen` are
    /// skipped entirely — no value change, and their optimizer moments stay
    /// untouched (a zero gradient would still drain nonzero moments into the
    /// parameter, which is not freezing).
    pub fn apply_updates_except(
        &mut self,
        opt: &mut Adam,
        grads: &[Vec<f64>],
        frozen: impl Fn(&str) -> bool,
    ) -> Result<()> {
        if grads.len() != self.entries.len() {
            return Err(Error::Shape(format!(
                "{} gradient lists for {} parameters",
                grads.len(),
                self.entries.len()
            )));
        }
        for ((name, tensor), grad) in self.entries.iter_mut().zip(grads) {
            if frozen(name) {
                continue;
            }
            opt.update(name, tensor.data_mut(), grad)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.entries)
    }

    /// Load values into an already-constructed set; names and shapes must
    /// match exactly (no extra, no missing).
    pub fn load_from(&mut self, path: &Path) -> Result<()> {
        let loaded = checkpoint::load(path)?;
        if loaded.len() != self.entries.len() {
            return Err(Error::format(
                path,
                &format!("checkpoint has {} tensors, model {}", loaded.len(), self.entries.len()),
            ));
        }
        for (name, tensor) in loaded {
            let Some(&i) = self.index.get(&name) else {
                return Err(Error::format(path, &format!("unexpected tensor {name:?}")));
            };
            if self.entries[i].1.shape() != tensor.shape() {
                return Err(Error::format(
                    path,
                    &format!(
                        "tensor {name:?} has shape {:?}, model wants {:?}",
                        tensor.shape(),
                        self.entries[i].1.shape()
                    ),
                ));
            }
            self.entries[i].1 = tensor;
        }
        Ok(())
    }

    /// Bitwise equality of all values, for reproducibility checks.
    pub fn bitwise_eq(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|((n1, t1), (n2, t2))| {
                n1 == n2
                    && t1.shape() == t2.shape()
                    && t1.data().iter().zip(t2.data()).all(|(a, b)| a.to_bits() == b.to_bits())
            })
    }
}
