use alloc::vec;
use alloc::vec::Vec;

use super::layer::{Layer, LayerSpec};
use super::optim::sgd_step;
use crate::error::{config_err, usage_err, Result};
use crate::tensor::{Real, Tensor};

/// Which passes a FLOP count covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pass {
    Forward,
    /// Counted as three forward passes (backward = 2x forward).
    ForwardBackward,
}

/// Parameter gradients of a block: one list per layer, congruent with the
/// layer's parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T = f32> {
    pub layers: Vec<Vec<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn iter(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flatten()
    }
}

/// Intermediates recorded by [`Block::forward`] and consumed by
/// [`Block::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache<T = f32> {
    range: (usize, usize),
    version: u64,
    inputs: Vec<Tensor<T>>,
}

/// A contiguous run of layers `[lo, hi)` of a model, with parameters.
/// A whole model is a block covering every layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Block<T = f32> {
    lo: usize,
    hi: usize,
    input_shape: Vec<usize>,
    layers: Vec<Layer<T>>,
    version: u64,
}

impl<T: Real> Block<T> {
    /// Builds a block from layers, checking the shape chain. `lo` is the
    /// index of the first layer within its parent model.
    pub fn from_layers(lo: usize, input_shape: Vec<usize>, layers: Vec<Layer<T>>) -> Result<Self> {
        let mut shape = input_shape.clone();
        for layer in &layers {
            shape = layer.spec.output_shape(&shape)?;
            let expected = layer.spec.param_shapes();
            let got: Vec<&[usize]> = layer.params.iter().map(|p| p.shape()).collect();
            if expected.len() != got.len() || expected.iter().zip(&got).any(|(e, g)| e.as_slice() != *g) {
                return Err(config_err!("parameters of {} have shapes {:?}", layer.spec, got));
            }
        }
        Ok(Self { lo, hi: lo + layers.len(), input_shape, layers, version: 0 })
    }

    /// Builds and initializes a block from specs; layer `i` of the block is
    /// seeded as layer `lo + i` of its parent model.
    pub fn init(lo: usize, input_shape: Vec<usize>, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let layers = specs.iter().enumerate().map(|(i, &s)| Layer::new(s, seed, (lo + i) as u64)).collect();
        Self::from_layers(lo, input_shape, layers)
    }

    pub fn range(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// Per-sample input shape.
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-sample output shape.
    pub fn output_shape(&self) -> Vec<usize> {
        let mut shape = self.input_shape.clone();
        for l in &self.layers {
            shape = l.spec.output_shape(&shape).expect("shape chain validated at construction");
        }
        shape
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.spec.param_count()).sum()
    }

    /// Parameter payload in bytes at 4 bytes per element.
    pub fn param_bytes(&self) -> u64 {
        4 * self.param_count() as u64
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    /// Mutable parameter access. Invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.version += 1;
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut())
    }

    fn check_input(&self, batch: &Tensor<T>) -> Result<()> {
        if batch.shape().is_empty() || batch.shape()[1..] != self.input_shape[..] {
            return Err(config_err!(
                "batch shape {:?} does not match block input [batch, {:?}]",
                batch.shape(),
                self.input_shape
            ));
        }
        Ok(())
    }

    /// Forward pass keeping the intermediates needed by `backward`.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let y = layer.forward(&x)?;
            inputs.push(x);
            x = y;
        }
        Ok((x, ForwardCache { range: (self.lo, self.hi), version: self.version, inputs }))
    }

    /// Forward pass without a cache.
    pub fn infer(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &Tensor<T>) -> Result<(Gradients<T>, Tensor<T>)> {
        if cache.range != (self.lo, self.hi) || cache.inputs.len() != self.layers.len() {
            return Err(usage_err!(
                "forward cache for layers {:?} used with block {:?}",
                cache.range,
                (self.lo, self.hi)
            ));
        }
        if cache.version != self.version {
            return Err(usage_err!("forward cache is stale: parameters changed since the forward pass"));
        }
        let mut grads = vec![Vec::new(); self.layers.len()];
        let mut g = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (pg, dx) = layer.backward(&cache.inputs[i], &g)?;
            grads[i] = pg;
            g = dx;
        }
        Ok((Gradients { layers: grads }, g))
    }

    /// In-place SGD update `theta -= lr * grad` on every parameter.
    pub fn sgd_step(&mut self, grads: &Gradients<T>, lr: T) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(config_err!("gradients cover {} layers, block has {}", grads.layers.len(), self.layers.len()));
        }
        self.version += 1;
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            sgd_step(&mut layer.params, g, lr)?;
        }
        Ok(())
    }

    /// FLOPs for `batch` samples through this block.
    pub fn flops(&self, batch: usize, pass: Pass) -> u64 {
        let mut shape = self.input_shape.clone();
        let mut per_sample = 0;
        for l in &self.layers {
            per_sample += l.spec.forward_flops(&shape).expect("validated");
            shape = l.spec.output_shape(&shape).expect("validated");
        }
        let forward = per_sample * batch as u64;
        match pass {
            Pass::Forward => forward,
            Pass::ForwardBackward => 3 * forward,
        }
    }

    /// Splits off layers `[lo + p, hi)` into a second block.
    pub fn split_at(mut self, p: usize) -> Result<(Self, Self)> {
        if p == 0 || p >= self.layers.len() {
            return Err(config_err!("split point {p} outside [1, {})", self.layers.len()));
        }
        let tail_layers = self.layers.split_off(p);
        self.hi = self.lo + p;
        let mid_shape = self.output_shape();
        let tail = Self {
            lo: self.hi,
            hi: self.hi + tail_layers.len(),
            input_shape: mid_shape,
            layers: tail_layers,
            version: 0,
        };
        Ok((self, tail))
    }

    /// Concatenates two adjacent blocks.
    pub fn join(mut self, tail: Self) -> Result<Self> {
        if self.hi != tail.lo || self.output_shape() != tail.input_shape {
            return Err(config_err!("blocks {:?} and {:?} are not adjacent", self.range(), tail.range()));
        }
        self.hi = tail.hi;
        self.layers.extend(tail.layers);
        self.version += 1;
        Ok(self)
    }

    pub fn cast<U: Real>(&self) -> Block<U> {
        Block {
            lo: self.lo,
            hi: self.hi,
            input_shape: self.input_shape.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer { spec: l.spec, params: l.params.iter().map(|p| p.cast()).collect() })
                .collect(),
            version: 0,
        }
    }

    /// True when both blocks have the same layer specs and parameter shapes.
    pub fn congruent(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.spec == b.spec)
    }

    /// Bitwise parameter equality (ignores cache versions).
    pub fn same_params(&self, other: &Self) -> bool {
        self.congruent(other)
            && self
                .params()
                .zip(other.params())
                .all(|(a, b)| a.data().iter().zip(b.data()).all(|(x, y)| x.as_f64().to_bits() == y.as_f64().to_bits()))
    }
}
