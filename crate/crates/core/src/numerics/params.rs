use indexmap::IndexMap;

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Named tensors with a stable insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<F> {
    tensors: IndexMap<String, Tensor<F>>,
}

impl<F> Default for ParamSet<F> {
    fn default() -> Self {
        ParamSet { tensors: IndexMap::new() }
    }
}

impl<F: Real> ParamSet<F> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<F>) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::Shape(format!("duplicate parameter name `{name}`")));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<F>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Shape(format!("no parameter named `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<F>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::Shape(format!("no parameter named `{name}`")))
    }

    /// Mutable access to several distinct tensors at once.
    pub fn get_many_mut<const N: usize>(&mut self, names: [&str; N]) -> Result<[&mut Tensor<F>; N]> {
        let mut slots: [Option<&mut Tensor<F>>; N] = std::array::from_fn(|_| None);
        for (name, t) in self.tensors.iter_mut() {
            if let Some(k) = names.iter().position(|n| n == name) {
                slots[k] = Some(t);
            }
        }
        let mut out = Vec::with_capacity(N);
        for (k, slot) in slots.into_iter().enumerate() {
            out.push(slot.ok_or_else(|| Error::Shape(format!("no parameter named `{}`", names[k])))?);
        }
        Ok(out.try_into().unwrap_or_else(|_| unreachable!()))
    }

    /// Positional access, in insertion order.
    pub fn at(&self, index: usize) -> &Tensor<F> {
        &self.tensors[index]
    }

    pub fn at_mut(&mut self, index: usize) -> &mut Tensor<F> {
        &mut self.tensors[index]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<F>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<F>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(|k| k.as_str())
    }

    pub fn num_params(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> Self {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }

    pub fn set_zero(&mut self) {
        for t in self.tensors.values_mut() {
            t.fill(F::zero());
        }
    }

    pub fn cast<G: Real>(&self) -> ParamSet<G> {
        ParamSet {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    pub fn check_same_layout(&self, other: &ParamSet<F>) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "parameter sets have {} and {} tensors",
                self.len(),
                other.len()
            )));
        }
        for ((ka, a), (kb, b)) in self.tensors.iter().zip(&other.tensors) {
            if ka != kb || a.shape() != b.shape() {
                return Err(Error::Shape(format!(
                    "`{ka}` {:?} vs `{kb}` {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        Ok(())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ParamSet<F>, scale: F) -> Result<()> {
        self.check_same_layout(other)?;
        for (a, b) in self.tensors.values_mut().zip(other.tensors.values()) {
            a.add_scaled(b, scale)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: F) {
        for t in self.tensors.values_mut() {
            t.data_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(Tensor::all_finite)
    }

    /// Maps a flat coordinate over all tensors to (tensor index, offset).
    pub fn locate(&self, flat: usize) -> Option<(usize, usize)> {
        let mut rest = flat;
        for (i, t) in self.tensors.values().enumerate() {
            if rest < t.len() {
                return Some((i, rest));
            }
            rest -= t.len();
        }
        None
    }

    pub fn name_at(&self, index: usize) -> &str {
        self.tensors.get_index(index).map(|(k, _)| k.as_str()).unwrap_or("")
    }
}
