use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use super::data::normal_pair;
use crate::error::{Error, Result};

/// A fully connected layer, `y = x W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// ReLU multilayer perceptron over 2D inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input of every layer; entries past the first are post-ReLU.
    inputs: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
}

impl Mlp {
    /// He-initialized weights and zero biases for layer widths `sizes`.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut spare: Option<f64> = None;
        let mut normal = move || match spare.take() {
            Some(v) => v,
            None => {
                let [a, b] = normal_pair(&mut rng);
                spare = Some(b);
                a
            }
        };
        let layers = sizes
            .windows(2)
            .map(|w| {
                let scale = (2.0 / w[0] as f64).sqrt();
                Dense {
                    w: Array2::from_shape_simple_fn((w[0], w[1]), || scale * normal()),
                    b: Array1::zeros(w[1]),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Mlp {
            layers: sizes
                .windows(2)
                .map(|w| Dense {
                    w: Array2::zeros((w[0], w[1])),
                    b: Array1::zeros(w[1]),
                })
                .collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.nrows()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.ncols())
    }

    /// Logits for a batch of row vectors.
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_cached(x).logits
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> ForwardCache {
        let mut inputs = vec![x.clone()];
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.dot(&l.w) + &l.b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
                inputs.push(z.clone());
            }
            h = z;
        }
        ForwardCache { inputs, logits: h }
    }

    pub fn logits(&self, x: [f64; 2]) -> Vec<f64> {
        let a = Array2::from_shape_vec((1, 2), x.to_vec()).expect("1x2");
        self.forward(&a).into_raw_vec_and_offset().0
    }

    /// Parameter gradients given the gradient of a scalar loss with respect
    /// to the logits of the cached batch.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Array2<f64>) -> Mlp {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = dlogits.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            grads.push(Dense {
                w: input.t().dot(&delta),
                b: delta.sum_axis(Axis(0)),
            });
            if i > 0 {
                let mut back = delta.dot(&l.w.t());
                back.zip_mut_with(input, |g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        Mlp { layers: grads }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn to_file(&self) -> MlpFile {
        MlpFile {
            sizes: self.sizes(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: l.w.outer_iter().map(|r| r.to_vec()).collect(),
                    bias: l.b.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: &MlpFile) -> Result<Self> {
        if file.sizes.len() != file.layers.len() + 1 || file.sizes.len() < 2 {
            return Err(Error::InvalidInput("layer sizes do not match layer count".into()));
        }
        let mut layers = Vec::new();
        for (i, l) in file.layers.iter().enumerate() {
            let (rows, cols) = (file.sizes[i], file.sizes[i + 1]);
            if l.weights.len() != rows || l.weights.iter().any(|r| r.len() != cols) || l.bias.len() != cols {
                return Err(Error::InvalidInput(format!("layer {i} is not {rows}x{cols}")));
            }
            let w = Array2::from_shape_vec((rows, cols), l.weights.iter().flatten().copied().collect())
                .expect("checked shape");
            layers.push(Dense {
                w,
                b: Array1::from(l.bias.clone()),
            });
        }
        let mlp = Mlp { layers };
        if !mlp.is_finite() {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        Ok(mlp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpFile {
    pub sizes: Vec<usize>,
    pub layers: Vec<LayerFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    /// Row-major, `sizes[i]` rows of `sizes[i + 1]` values.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64, params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    pub fn step(&mut self, model: &mut Mlp, grads: &Mlp) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in model.params_mut().zip(grads.params()).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}
