use std::collections::HashMap;

use super::Tensor;
use crate::error::{MkrError, Result};
use crate::scalar::Scalar;

/// Handle to a registered parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether L2 regularization applies to a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

#[derive(Clone, Debug)]
struct Entry<T> {
    name: String,
    kind: ParamKind,
    value: Tensor<T>,
    grad: Tensor<T>,
}

/// Named trainable tensors and their accumulated gradients.
///
/// Registration order is preserved and is the iteration order everywhere,
/// so two stores built the same way serialize identically.
#[derive(Clone, Debug, Default)]
pub struct ParameterStore<T> {
    entries: Vec<Entry<T>>,
    by_name: HashMap<String, ParamId>,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        ParameterStore {
            entries: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        kind: ParamKind,
        value: Tensor<T>,
    ) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(MkrError::DuplicateParameter(name));
        }
        let id = ParamId(self.entries.len());
        let grad = Tensor::zeros(value.shape());
        self.by_name.insert(name.clone(), id);
        self.entries.push(Entry {
            name,
            kind,
            value,
            grad,
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| MkrError::UnknownParameter(name.to_string()))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn kind(&self, id: ParamId) -> ParamKind {
        self.entries[id.0].kind
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].value
    }

    /// Replaces a parameter value; the shape must not change.
    pub fn set(&mut self, id: ParamId, value: Tensor<T>) -> Result<()> {
        let e = &mut self.entries[id.0];
        if e.value.shape() != value.shape() {
            return Err(MkrError::dim("set", e.value.shape(), value.shape()));
        }
        e.value = value;
        Ok(())
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].grad
    }

    pub(crate) fn grad_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].grad
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub fn total_elements(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_name_rejected() {
        let mut s = ParameterStore::<f64>::new();
        s.register("w", ParamKind::Weight, Tensor::zeros(&[2])).unwrap();
        let err = s.register("w", ParamKind::Weight, Tensor::zeros(&[3]));
        assert!(matches!(err, Err(MkrError::DuplicateParameter(_))));
    }

    #[test]
    fn gradient_shape_tracks_parameter() {
        let mut s = ParameterStore::<f64>::new();
        let id = s
            .register("m", ParamKind::Weight, Tensor::zeros(&[3, 2]))
            .unwrap();
        assert_eq!(s.grad(id).shape(), &[3, 2]);
        assert!(s.set(id, Tensor::zeros(&[2, 3])).is_err());
        assert_eq!(s.id("m").unwrap(), id);
        assert!(s.id("nope").is_err());
    }
}
