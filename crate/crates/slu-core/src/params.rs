//! Named trainable parameters with paired gradient buffers.

use ndarray::Array2;
use rand::Rng;

use crate::tape::Scalar;

/// One trainable tensor plus its gradient accumulator.
pub struct Parameter<F: Scalar> {
    pub name: String,
    pub value: Array2<F>,
    pub grad: Array2<F>,
}

/// Flat registry of parameters, addressed by index.
pub struct ParamSet<F: Scalar> {
    params: Vec<Parameter<F>>,
}

impl<F: Scalar> ParamSet<F> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<F>) -> usize {
        let grad = Array2::zeros(value.dim());
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad,
        });
        self.params.len() - 1
    }

    /// Glorot-uniform weight matrix: U(-s, s), s = sqrt(6 / (fan_in + fan_out)).
    pub fn add_glorot(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut impl Rng,
    ) -> usize {
        let s = (6.0 / (rows + cols) as f64).sqrt();
        let v = Array2::from_shape_fn((rows, cols), |_| F::from_f64(rng.gen_range(-s..s)));
        self.add(name, v)
    }

    /// Uniform(-0.1, 0.1), used for token embeddings.
    pub fn add_embedding(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut impl Rng,
    ) -> usize {
        let v = Array2::from_shape_fn((rows, cols), |_| F::from_f64(rng.gen_range(-0.1..0.1)));
        self.add(name, v)
    }

    pub fn add_zero_bias(&mut self, name: impl Into<String>, cols: usize) -> usize {
        self.add(name, Array2::zeros((1, cols)))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.params[idx].name
    }

    pub fn value(&self, idx: usize) -> &Array2<F> {
        &self.params[idx].value
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut Array2<F> {
        &mut self.params[idx].value
    }

    pub fn grad(&self, idx: usize) -> &Array2<F> {
        &self.params[idx].grad
    }

    pub fn grad_mut(&mut self, idx: usize) -> &mut Array2<F> {
        &mut self.params[idx].grad
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(F::zero());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<F>> {
        self.params.iter()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

impl<F: Scalar> Default for ParamSet<F> {
    fn default() -> Self {
        Self::new()
    }
}
