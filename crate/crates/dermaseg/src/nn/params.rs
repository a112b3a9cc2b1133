//! Named parameter storage shared by all models.
//!
//! Values live in a [`ParamStore`]; gradients accumulate in a separate
//! [`GradBuffer`] so per-sample backward passes can run in parallel on
//! private buffers and be folded together in a fixed order.

use ndarray::ArrayD;

/// Handle to one tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

/// Ordered collection of named parameter tensors.
#[derive(Debug, Clone)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<ArrayD<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore { names: Vec::new(), values: Vec::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, value: ArrayD<f64>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn value(&self, id: ParamId) -> &ArrayD<f64> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut ArrayD<f64> {
        &mut self.values[id.0]
    }

    /// Number of tensors.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<f64>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    /// Mutable tensor iterator in registration order, for optimizers.
    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut ArrayD<f64>> {
        self.values.iter_mut()
    }

    /// Replaces every tensor with the same-named, same-shaped tensor from
    /// `tensors`. Order does not matter; extra or missing names are errors.
    pub fn load_named(&mut self, tensors: &[(String, ArrayD<f64>)]) -> Result<(), String> {
        if tensors.len() != self.values.len() {
            return Err(format!(
                "expected {} tensors, got {}",
                self.values.len(),
                tensors.len()
            ));
        }
        for (name, tensor) in tensors {
            let idx = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| format!("unknown tensor {name:?}"))?;
            if self.values[idx].shape() != tensor.shape() {
                return Err(format!(
                    "tensor {name:?}: expected shape {:?}, got {:?}",
                    self.values[idx].shape(),
                    tensor.shape()
                ));
            }
            self.values[idx] = tensor.clone();
        }
        Ok(())
    }

    /// Flat view of every scalar, in registration order. Used by
    /// finite-difference checks.
    pub fn flat_len(&self) -> usize {
        self.n_scalars()
    }

    pub fn get_flat(&self, mut i: usize) -> f64 {
        for v in &self.values {
            if i < v.len() {
                return v.as_slice().expect("standard layout")[i];
            }
            i -= v.len();
        }
        panic!("flat index out of range");
    }

    pub fn set_flat(&mut self, mut i: usize, x: f64) {
        for v in &mut self.values {
            if i < v.len() {
                v.as_slice_mut().expect("standard layout")[i] = x;
                return;
            }
            i -= v.len();
        }
        panic!("flat index out of range");
    }

    /// True when every scalar is finite.
    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradient accumulator matching a [`ParamStore`] tensor for tensor.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    grads: Vec<ArrayD<f64>>,
}

impl GradBuffer {
    /// All-zero buffer shaped like `store`.
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradBuffer { grads: store.values.iter().map(|v| ArrayD::zeros(v.raw_dim())).collect() }
    }

    pub fn grad(&self, id: ParamId) -> &ArrayD<f64> {
        &self.grads[id.0]
    }

    pub fn add_to(&mut self, id: ParamId, delta: &ArrayD<f64>) {
        self.grads[id.0] += delta;
    }

    /// Folds another buffer into this one (elementwise sum).
    pub fn merge(&mut self, other: &GradBuffer) {
        assert_eq!(self.grads.len(), other.grads.len());
        for (g, o) in self.grads.iter_mut().zip(&other.grads) {
            *g += o;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            g.mapv_inplace(|x| x * factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &ArrayD<f64>> {
        self.grads.iter()
    }

    pub fn get_flat(&self, mut i: usize) -> f64 {
        for g in &self.grads {
            if i < g.len() {
                return g.as_slice().expect("standard layout")[i];
            }
            i -= g.len();
        }
        panic!("flat index out of range");
    }
}
