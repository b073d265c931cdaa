//! Minimal dense network engine with hand-written backward passes.
//!
//! Topology: `input → [dense → batchnorm → ReLU] × hidden → dense → logits`,
//! followed by a sigmoid and a hard 0/1 rounding. Matrices are row-major with
//! the batch along rows; dense weights are stored `out × in`.

mod checkpoint;
mod loss;
mod optim;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use loss::{bce_loss, round_half_up, sigmoid, surrogate_grad, surrogate_round_backward, surrogate_smooth};
pub use optim::{clip_global_norm, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::rng::{self, Stream};
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 2] = [2048, 1024];
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batchnorm.
    Train,
    /// Running statistics in batchnorm.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || {
            (2.0 * rng.gen::<f64>() - 1.0) * bound
        });
        Dense {
            weight,
            bias: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, input: &Array2<f64>) -> Array2<f64> {
        input.dot(&self.weight.t()) + &self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub dense: Dense,
    pub norm: BatchNorm,
}

/// All network parameters and batchnorm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n_items: usize,
    pub hidden: Vec<HiddenLayer>,
    pub output: Dense,
    pub rng_seed: u64,
}

/// Per hidden layer values needed by the backward pass.
#[derive(Debug, Clone)]
pub struct HiddenTrace {
    pub input: Array2<f64>,
    pub normalized: Array2<f64>,
    pub pre_activation: Array2<f64>,
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
    pub inv_std: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub mode: Mode,
    pub hidden: Vec<HiddenTrace>,
    /// Input of the output layer.
    pub last_hidden: Array2<f64>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
    pub rounded: Array2<f64>,
}

impl ForwardTrace {
    pub fn batch_size(&self) -> usize {
        self.logits.nrows()
    }
}

/// Gradients shaped like the trainable part of [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<HiddenGradients>,
    pub output: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenGradients {
    pub dense: Dense,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl Gradients {
    /// Trainable tensors in the fixed order shared with
    /// [`ModelParams::trainable_mut`]: per hidden layer weight, bias, gamma,
    /// beta; then output weight and bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for h in &self.hidden {
            out.push(slice(&h.dense.weight));
            out.push(h.dense.bias.as_slice().expect("contiguous"));
            out.push(h.gamma.as_slice().expect("contiguous"));
            out.push(h.beta.as_slice().expect("contiguous"));
        }
        out.push(slice(&self.output.weight));
        out.push(self.output.bias.as_slice().expect("contiguous"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for h in &mut self.hidden {
            out.push(h.dense.weight.as_slice_mut().expect("contiguous"));
            out.push(h.dense.bias.as_slice_mut().expect("contiguous"));
            out.push(h.gamma.as_slice_mut().expect("contiguous"));
            out.push(h.beta.as_slice_mut().expect("contiguous"));
        }
        out.push(self.output.weight.as_slice_mut().expect("contiguous"));
        out.push(self.output.bias.as_slice_mut().expect("contiguous"));
        out
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("contiguous")
}

impl ModelParams {
    /// Network with the default hidden widths (2048, 1024).
    pub fn init(n_items: usize, seed: u64) -> Result<Self> {
        Self::init_with_hidden(n_items, &DEFAULT_HIDDEN, seed)
    }

    /// Uniform `±1/√fan_in` weights, zero biases, identity batchnorm.
    pub fn init_with_hidden(n_items: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if n_items == 0 {
            return Err(Error::InvalidArgument("n_items must be positive".into()));
        }
        if hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden widths must be positive".into()));
        }
        let mut rng = rng::stream(seed, Stream::Init);
        let mut fan_in = 2 * n_items + 1;
        let mut layers = Vec::with_capacity(hidden.len());
        for &width in hidden {
            layers.push(HiddenLayer {
                dense: Dense::init(fan_in, width, &mut rng),
                norm: BatchNorm::new(width),
            });
            fan_in = width;
        }
        Ok(ModelParams {
            n_items,
            hidden: layers,
            output: Dense::init(fan_in, n_items, &mut rng),
            rng_seed: seed,
        })
    }

    pub fn input_width(&self) -> usize {
        2 * self.n_items + 1
    }

    /// `[2n+1, hidden.., n]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.hidden.iter().map(|h| h.dense.bias.len()))
            .chain(std::iter::once(self.n_items))
            .collect()
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for h in &mut self.hidden {
            out.push(h.dense.weight.as_slice_mut().expect("contiguous"));
            out.push(h.dense.bias.as_slice_mut().expect("contiguous"));
            out.push(h.norm.gamma.as_slice_mut().expect("contiguous"));
            out.push(h.norm.beta.as_slice_mut().expect("contiguous"));
        }
        out.push(self.output.weight.as_slice_mut().expect("contiguous"));
        out.push(self.output.bias.as_slice_mut().expect("contiguous"));
        out
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            hidden: self
                .hidden
                .iter()
                .map(|h| HiddenGradients {
                    dense: Dense {
                        weight: Array2::zeros(h.dense.weight.raw_dim()),
                        bias: Array1::zeros(h.dense.bias.len()),
                    },
                    gamma: Array1::zeros(h.norm.gamma.len()),
                    beta: Array1::zeros(h.norm.beta.len()),
                })
                .collect(),
            output: Dense {
                weight: Array2::zeros(self.output.weight.raw_dim()),
                bias: Array1::zeros(self.output.bias.len()),
            },
        }
    }

    /// Checks that every dimension chain lines up.
    pub fn validate(&self) -> Result<()> {
        let mut fan_in = self.input_width();
        for (l, h) in self.hidden.iter().enumerate() {
            let (out, inp) = h.dense.weight.dim();
            let n = &h.norm;
            if inp != fan_in
                || h.dense.bias.len() != out
                || [&n.gamma, &n.beta, &n.running_mean, &n.running_var]
                    .iter()
                    .any(|t| t.len() != out)
            {
                return Err(Error::Shape(format!("hidden layer {l} inconsistent")));
            }
            if n.running_var.iter().any(|v| *v < 0.0) {
                return Err(Error::Shape(format!("hidden layer {l} has negative running variance")));
            }
            fan_in = out;
        }
        if self.output.weight.dim() != (self.n_items, fan_in) || self.output.bias.len() != self.n_items {
            return Err(Error::Shape("output layer inconsistent".into()));
        }
        Ok(())
    }

    /// Forward pass. Does not touch running statistics; see
    /// [`ModelParams::commit_batch_statistics`].
    pub fn forward(&self, inputs: ArrayView2<f64>, mode: Mode) -> Result<ForwardTrace> {
        if inputs.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "input width {} but network expects {}",
                inputs.ncols(),
                self.input_width()
            )));
        }
        if inputs.nrows() == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        let mut x = inputs.to_owned();
        let mut traces = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let z = layer.dense.apply(&x);
            let (mean, var) = match mode {
                Mode::Train => batch_moments(&z),
                Mode::Eval => (layer.norm.running_mean.clone(), layer.norm.running_var.clone()),
            };
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let normalized = (&z - &mean) * &inv_std;
            let pre_activation = &normalized * &layer.norm.gamma + &layer.norm.beta;
            let next = pre_activation.mapv(|v| v.max(0.0));
            traces.push(HiddenTrace {
                input: std::mem::replace(&mut x, next),
                normalized,
                pre_activation,
                mean,
                var,
                inv_std,
            });
        }
        let logits = self.output.apply(&x);
        let probs = logits.mapv(sigmoid);
        let rounded = probs.mapv(round_half_up);
        Ok(ForwardTrace {
            mode,
            hidden: traces,
            last_hidden: x,
            logits,
            probs,
            rounded,
        })
    }

    /// Folds the batch statistics of a train-mode trace into the running
    /// estimates (momentum 0.1, unbiased variance).
    pub fn commit_batch_statistics(&mut self, trace: &ForwardTrace) {
        if trace.mode != Mode::Train {
            return;
        }
        let b = trace.batch_size() as f64;
        let unbias = if b > 1.0 { b / (b - 1.0) } else { 1.0 };
        for (layer, t) in self.hidden.iter_mut().zip(&trace.hidden) {
            let norm = &mut layer.norm;
            Zip::from(&mut norm.running_mean)
                .and(&t.mean)
                .for_each(|r, &m| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m);
            Zip::from(&mut norm.running_var)
                .and(&t.var)
                .for_each(|r, &v| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v * unbias);
        }
    }

    /// Back-propagates `grad_logits` through the network recorded in `trace`.
    pub fn backward(&self, trace: &ForwardTrace, grad_logits: &Array2<f64>) -> Result<Gradients> {
        if grad_logits.dim() != trace.logits.dim() {
            return Err(Error::Shape(format!(
                "gradient shape {:?} != logits shape {:?}",
                grad_logits.dim(),
                trace.logits.dim()
            )));
        }
        let b = trace.batch_size() as f64;
        let output = Dense {
            weight: grad_logits.t().dot(&trace.last_hidden),
            bias: grad_logits.sum_axis(Axis(0)),
        };
        let mut upstream = grad_logits.dot(&self.output.weight);
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for (l, (layer, t)) in self.hidden.iter().zip(&trace.hidden).enumerate().rev() {
            let mut dy = upstream;
            Zip::from(&mut dy)
                .and(&t.pre_activation)
                .for_each(|g, &y| {
                    if y <= 0.0 {
                        *g = 0.0
                    }
                });
            let gamma = (&dy * &t.normalized).sum_axis(Axis(0));
            let beta = dy.sum_axis(Axis(0));
            let dxhat = &dy * &layer.norm.gamma;
            let dz = match trace.mode {
                Mode::Train => {
                    let sum_dxhat = dxhat.sum_axis(Axis(0));
                    let sum_dxhat_xhat = (&dxhat * &t.normalized).sum_axis(Axis(0));
                    let centered = &dxhat * b - &sum_dxhat - &t.normalized * &sum_dxhat_xhat;
                    centered * &(&t.inv_std / b)
                }
                Mode::Eval => &dxhat * &t.inv_std,
            };
            let dense = Dense {
                weight: dz.t().dot(&t.input),
                bias: dz.sum_axis(Axis(0)),
            };
            upstream = if l > 0 {
                dz.dot(&layer.dense.weight)
            } else {
                Array2::zeros((0, 0))
            };
            hidden.push(HiddenGradients { dense, gamma, beta });
        }
        hidden.reverse();
        Ok(Gradients { hidden, output })
    }
}

/// Per-feature batch mean and biased variance.
fn batch_moments(z: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let b = z.nrows() as f64;
    let mean = z.sum_axis(Axis(0)) / b;
    let centered = z - &mean;
    let var = (&centered * &centered).sum_axis(Axis(0)) / b;
    (mean, var)
}
