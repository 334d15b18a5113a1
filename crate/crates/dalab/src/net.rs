//! Dense feed-forward networks with exact reverse-mode gradients and
//! box-projected parameters.
//!
//! A network of depth `L` maps an input `x` through
//! `xi^l = eta^l(W^l xi^{l-1} + b^l)` for `l = 1..=L`, with every parameter
//! entry confined to `[-B_theta, B_theta]`. Gradients are hand-derived per
//! activation; no autodiff framework is involved.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};

/// Architecture description: layer widths `d_0..d_L`, per-layer activations,
/// the parameter box bound and the input norm bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weight_bound: f64,
    pub input_bound: f64,
}

impl NetworkSpec {
    pub fn new(
        widths: Vec<usize>,
        activations: Vec<Activation>,
        weight_bound: f64,
        input_bound: f64,
    ) -> Result<Self> {
        let spec = NetworkSpec {
            widths,
            activations,
            weight_bound,
            input_bound,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Spec("widths must list d_0..d_L with L >= 1".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::Spec("layer widths must be positive".into()));
        }
        if self.activations.len() != self.depth() {
            return Err(Error::Spec(format!(
                "expected {} activations for depth {}, got {}",
                self.depth(),
                self.depth(),
                self.activations.len()
            )));
        }
        if self.activations[..self.depth() - 1].contains(&Activation::Softmax) {
            return Err(Error::Spec(
                "softmax is permitted only in the output position".into(),
            ));
        }
        if !(self.weight_bound.is_finite() && self.weight_bound > 0.0) {
            return Err(Error::Spec(
                "weight_bound must be finite and positive".into(),
            ));
        }
        if !(self.input_bound.is_finite() && self.input_bound > 0.0) {
            return Err(Error::Spec(
                "input_bound must be finite and positive".into(),
            ));
        }
        Ok(())
    }

    /// Number of layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

/// Parameters of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Parameter tensors `Theta^1..Theta^L`; also reused, shape-for-shape, as the
/// gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
}

/// Gradients have exactly the shape of the parameters they refer to.
pub type NetworkGrads = NetworkParams;

impl NetworkParams {
    /// All-zero parameters with shapes given by `spec` (also the neutral
    /// element for gradient accumulation).
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = (1..=spec.depth())
            .map(|l| LayerParams {
                weight: DMatrix::zeros(spec.widths[l], spec.widths[l - 1]),
                bias: DVector::zeros(spec.widths[l]),
            })
            .collect();
        NetworkParams { layers }
    }

    pub fn shapes_match(&self, spec: &NetworkSpec) -> bool {
        self.layers.len() == spec.depth()
            && self.layers.iter().enumerate().all(|(i, l)| {
                l.weight.nrows() == spec.widths[i + 1]
                    && l.weight.ncols() == spec.widths[i]
                    && l.bias.len() == spec.widths[i + 1]
            })
    }

    /// Largest parameter entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn axpy(&mut self, a: f64, other: &NetworkParams) {
        for (s, o) in self.layers.iter_mut().zip(&other.layers) {
            s.weight.zip_apply(&o.weight, |x, y| *x += a * y);
            s.bias.zip_apply(&o.bias, |x, y| *x += a * y);
        }
    }

    pub fn scale_mut(&mut self, a: f64) {
        for l in &mut self.layers {
            l.weight *= a;
            l.bias *= a;
        }
    }
}

/// Per-layer activations `xi^0..xi^L` for one input.
#[derive(Debug, Clone)]
pub struct LayerFeatures {
    pub activations: Vec<DVector<f64>>,
}

impl LayerFeatures {
    pub fn output(&self) -> &DVector<f64> {
        self.activations.last().unwrap()
    }
}

/// Draws parameters uniformly from `[-B_theta/sqrt(d_{l-1}), +B_theta/sqrt(d_{l-1})]`,
/// which keeps pre-activations O(1) while staying inside the parameter box.
/// The same seed reproduces the same parameters bit for bit.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = (1..=spec.depth())
        .map(|l| {
            let (rows, cols) = (spec.widths[l], spec.widths[l - 1]);
            let scale = spec.weight_bound / (cols as f64).sqrt();
            // row-major draw order, weights before bias
            let mut weight = DMatrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    weight[(i, j)] = rng.gen_range(-scale..=scale);
                }
            }
            let bias = DVector::from_fn(rows, |_, _| rng.gen_range(-scale..=scale));
            LayerParams { weight, bias }
        })
        .collect();
    NetworkParams { layers }
}

/// Projects every parameter entry into `[-B_theta, B_theta]`. Idempotent.
pub fn clip_params(spec: &NetworkSpec, params: &NetworkParams) -> NetworkParams {
    let b = spec.weight_bound;
    let layers = params
        .layers
        .iter()
        .map(|l| LayerParams {
            weight: l.weight.map(|v| v.clamp(-b, b)),
            bias: l.bias.map(|v| v.clamp(-b, b)),
        })
        .collect();
    NetworkParams { layers }
}

/// In-place variant used after each optimizer step.
pub fn clip_params_mut(spec: &NetworkSpec, params: &mut NetworkParams) {
    let b = spec.weight_bound;
    for l in &mut params.layers {
        l.weight.iter_mut().for_each(|v| *v = v.clamp(-b, b));
        l.bias.iter_mut().for_each(|v| *v = v.clamp(-b, b));
    }
}

/// Runs the layer recursion and returns every intermediate feature vector.
pub fn forward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    x: &DVector<f64>,
) -> Result<LayerFeatures> {
    if x.len() != spec.input_dim() {
        return Err(Error::Dimension {
            expected: spec.input_dim(),
            got: x.len(),
            context: "forward input",
        });
    }
    if !params.shapes_match(spec) {
        return Err(Error::Spec("params do not match spec widths".into()));
    }
    let mut acts = Vec::with_capacity(spec.depth() + 1);
    acts.push(x.clone());
    for (l, layer) in params.layers.iter().enumerate() {
        let z = &layer.weight * acts.last().unwrap() + &layer.bias;
        acts.push(spec.activations[l].apply(&z));
    }
    Ok(LayerFeatures { activations: acts })
}

/// Batched forward pass over a `d_0 x n` matrix of column samples.
/// Returns `L+1` matrices of features, one per layer including the input.
pub fn forward_batch(
    spec: &NetworkSpec,
    params: &NetworkParams,
    x: &DMatrix<f64>,
) -> Vec<DMatrix<f64>> {
    debug_assert_eq!(x.nrows(), spec.input_dim());
    let n = x.ncols();
    let mut feats = Vec::with_capacity(spec.depth() + 1);
    feats.push(x.clone());
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = &layer.weight * feats.last().unwrap();
        for mut col in z.column_iter_mut() {
            col += &layer.bias;
        }
        let act = spec.activations[l];
        let mut out = DMatrix::zeros(z.nrows(), n);
        for j in 0..n {
            out.set_column(j, &act.apply(&z.column(j).into_owned()));
        }
        feats.push(out);
    }
    feats
}

/// Exact reverse-mode differentiation of the forward recursion for a single
/// input. `upstream` is the gradient of the loss with respect to `xi^L`.
/// Returns parameter gradients (same shapes as `params`) and the gradient
/// with respect to the input.
pub fn backward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    x: &DVector<f64>,
    upstream: &DVector<f64>,
) -> Result<(NetworkGrads, DVector<f64>)> {
    if upstream.len() != spec.output_dim() {
        return Err(Error::Dimension {
            expected: spec.output_dim(),
            got: upstream.len(),
            context: "backward upstream gradient",
        });
    }
    let feats = forward(spec, params, x)?;
    let x_mat = DMatrix::from_columns(std::slice::from_ref(x));
    let up = DMatrix::from_columns(std::slice::from_ref(upstream));
    let batch_feats: Vec<DMatrix<f64>> = feats
        .activations
        .iter()
        .map(|v| DMatrix::from_columns(std::slice::from_ref(v)))
        .collect();
    let _ = x_mat;
    let (grads, input_grad) = backward_batch(spec, params, &batch_feats, &up, None);
    Ok((grads, input_grad.column(0).into_owned()))
}

/// Batched reverse pass. `feats` must come from [`forward_batch`].
///
/// `injected` optionally adds an external gradient to the flowing feature
/// gradient at each layer `1..L` before it is pulled through that layer;
/// this is how the per-layer alignment terms reach the parameters. Parameter
/// gradients are summed over the batch columns (callers encode any `1/M`
/// weighting in the upstream columns).
pub fn backward_batch(
    spec: &NetworkSpec,
    params: &NetworkParams,
    feats: &[DMatrix<f64>],
    upstream: &DMatrix<f64>,
    injected: Option<&[Option<DMatrix<f64>>]>,
) -> (NetworkGrads, DMatrix<f64>) {
    let depth = spec.depth();
    let n = upstream.ncols();
    let mut grads = NetworkParams::zeros(spec);
    let mut g_feat = upstream.clone();
    for l in (0..depth).rev() {
        if let Some(inj) = injected {
            if let Some(extra) = &inj[l + 1] {
                g_feat += extra;
            }
        }
        let out = &feats[l + 1];
        let act = spec.activations[l];
        let mut g_z = DMatrix::zeros(out.nrows(), n);
        for j in 0..n {
            g_z.set_column(
                j,
                &act.vjp(&out.column(j).into_owned(), &g_feat.column(j).into_owned()),
            );
        }
        let layer = &params.layers[l];
        grads.layers[l].weight = &g_z * feats[l].transpose();
        grads.layers[l].bias = DVector::from_fn(g_z.nrows(), |i, _| g_z.row(i).sum());
        g_feat = layer.weight.transpose() * g_z;
    }
    (grads, g_feat)
}
