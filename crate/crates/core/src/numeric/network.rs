//! Shared-trunk actor-critic MLP with hand-written backpropagation.
//!
//! Parameters live in one flat vector. The canonical layout is:
//!
//! ```text
//! trunk layer 0 | trunk layer 1 | ... | policy head | value head
//! ```
//!
//! and each layer stores its weight matrix of shape `(out, in)` row-major,
//! followed by its `out` biases. So `w[o][i]` sits at `offset + o * in + i`.

use rand::Rng;

use crate::error::{contract, ensure_finite, Result};

/// Hidden-layer nonlinearity. Only `tanh` is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    obs_dim: usize,
    hidden_sizes: Vec<usize>,
    action_count: usize,
    activation: Activation,
}

/// Position of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub input: usize,
    pub output: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_len(&self) -> usize {
        self.input * self.output
    }

    pub fn len(&self) -> usize {
        (self.input + 1) * self.output
    }

    pub fn is_empty(&self) -> bool {
        self.output == 0
    }

    pub fn weights<'a>(&self, flat: &'a [f64]) -> &'a [f64] {
        &flat[self.offset..self.offset + self.weight_len()]
    }

    pub fn biases<'a>(&self, flat: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.weight_len();
        &flat[start..start + self.output]
    }

    fn split_mut<'a>(&self, flat: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64]) {
        flat[self.offset..self.offset + self.len()].split_at_mut(self.weight_len())
    }
}

impl NetworkConfig {
    pub fn new(obs_dim: usize, hidden_sizes: Vec<usize>, action_count: usize) -> Result<Self> {
        if obs_dim == 0 {
            return Err(contract("obs_dim must be at least 1"));
        }
        if action_count < 2 {
            return Err(contract("action_count must be at least 2"));
        }
        if hidden_sizes.contains(&0) {
            return Err(contract("every hidden layer needs at least one unit"));
        }
        Ok(Self {
            obs_dim,
            hidden_sizes,
            action_count,
            activation: Activation::Tanh,
        })
    }

    /// 4 observations, two hidden layers of 64, 2 actions.
    pub fn cartpole() -> Self {
        Self::new(4, vec![64, 64], 2).expect("static config is valid")
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.hidden_sizes
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn last_hidden(&self) -> usize {
        self.hidden_sizes.last().copied().unwrap_or(self.obs_dim)
    }

    pub fn trunk_layers(&self) -> Vec<LayerShape> {
        let mut layers = Vec::with_capacity(self.hidden_sizes.len());
        let mut input = self.obs_dim;
        let mut offset = 0;
        for &output in &self.hidden_sizes {
            let layer = LayerShape {
                input,
                output,
                offset,
            };
            offset += layer.len();
            input = output;
            layers.push(layer);
        }
        layers
    }

    fn trunk_len(&self) -> usize {
        self.trunk_layers().iter().map(LayerShape::len).sum()
    }

    pub fn policy_head(&self) -> LayerShape {
        LayerShape {
            input: self.last_hidden(),
            output: self.action_count,
            offset: self.trunk_len(),
        }
    }

    pub fn value_head(&self) -> LayerShape {
        let policy = self.policy_head();
        LayerShape {
            input: self.last_hidden(),
            output: 1,
            offset: policy.offset + policy.len(),
        }
    }

    pub fn param_count(&self) -> usize {
        let value = self.value_head();
        value.offset + value.len()
    }
}

/// Flat parameter vector in the canonical layout described at module level.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    values: Vec<f64>,
}

impl ParameterSet {
    pub fn from_vec(config: &NetworkConfig, values: Vec<f64>) -> Result<Self> {
        if values.len() != config.param_count() {
            return Err(contract(format!(
                "expected {} parameters, got {}",
                config.param_count(),
                values.len()
            )));
        }
        ensure_finite(&values, "parameters")?;
        Ok(Self { values })
    }

    pub fn zeros(config: &NetworkConfig) -> Self {
        Self {
            values: vec![0.0; config.param_count()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Gradient with the same layout as [`ParameterSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    values: Vec<f64>,
}

impl GradientSet {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Per-sample logits and state values for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOutput {
    action_count: usize,
    logits: Vec<f64>,
    values: Vec<f64>,
}

impl NetworkOutput {
    pub fn new(action_count: usize, logits: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if action_count == 0 || logits.len() != values.len() * action_count {
            return Err(contract(format!(
                "{} logits do not fit {} samples of {} actions",
                logits.len(),
                values.len(),
                action_count
            )));
        }
        Ok(Self {
            action_count,
            logits,
            values,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.values.len()
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn logits(&self, sample: usize) -> &[f64] {
        &self.logits[sample * self.action_count..(sample + 1) * self.action_count]
    }

    pub fn value(&self, sample: usize) -> f64 {
        self.values[sample]
    }

    pub fn all_logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.logits.iter().chain(&self.values).all(|v| v.is_finite())
    }
}

/// Intermediates kept from [`forward`] so [`backprop`] need not recompute them.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub batch_size: usize,
    pub inputs: Vec<f64>,
    /// One `batch × width` buffer per trunk layer, before tanh.
    pub pre_activations: Vec<Vec<f64>>,
    /// One `batch × width` buffer per trunk layer, after tanh.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    fn features(&self) -> &[f64] {
        self.activations.last().unwrap_or(&self.inputs)
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> ParameterSet {
    let mut values = vec![0.0; config.param_count()];
    let mut layers = config.trunk_layers();
    layers.push(config.policy_head());
    layers.push(config.value_head());
    for layer in layers {
        let bound = glorot_bound(layer.input, layer.output);
        let (weights, _) = layer.split_mut(&mut values);
        for w in weights {
            *w = rng.random_range(-bound..=bound);
        }
    }
    ParameterSet { values }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `out[b][o] = bias[o] + Σ_i w[o][i] * input[b][i]`
fn affine(layer: &LayerShape, params: &[f64], input: &[f64], batch: usize) -> Vec<f64> {
    let weights = layer.weights(params);
    let biases = layer.biases(params);
    let mut out = Vec::with_capacity(batch * layer.output);
    for row in input.chunks_exact(layer.input) {
        for (w_row, &b) in weights.chunks_exact(layer.input).zip(biases) {
            let dot: f64 = w_row.iter().zip(row).map(|(w, x)| w * x).sum();
            out.push(b + dot);
        }
    }
    out
}

/// Accumulates weight and bias gradients for one affine layer and, when
/// `d_input` is given, the gradient w.r.t. the layer input.
fn affine_backward(
    layer: &LayerShape,
    params: &[f64],
    input: &[f64],
    d_out: &[f64],
    grads: &mut [f64],
    mut d_input: Option<&mut [f64]>,
) {
    let weights = layer.weights(params);
    let (d_w, d_b) = layer.split_mut(grads);
    for (sample, (x, dz)) in input
        .chunks_exact(layer.input)
        .zip(d_out.chunks_exact(layer.output))
        .enumerate()
    {
        for (o, &g) in dz.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            d_b[o] += g;
            let row = o * layer.input;
            for (dw, xi) in d_w[row..row + layer.input].iter_mut().zip(x) {
                *dw += g * xi;
            }
            if let Some(d_in) = d_input.as_deref_mut() {
                let dx = &mut d_in[sample * layer.input..(sample + 1) * layer.input];
                for (d, w) in dx.iter_mut().zip(&weights[row..row + layer.input]) {
                    *d += g * w;
                }
            }
        }
    }
}

/// Runs a batch of `obs.len() / obs_dim` observations through the network.
pub fn forward(
    params: &ParameterSet,
    config: &NetworkConfig,
    obs: &[f64],
) -> Result<(NetworkOutput, ForwardTrace)> {
    if params.len() != config.param_count() {
        return Err(contract(format!(
            "parameter length {} does not match config ({})",
            params.len(),
            config.param_count()
        )));
    }
    if !obs.len().is_multiple_of(config.obs_dim) {
        return Err(contract(format!(
            "observation buffer of {} values is not a multiple of obs_dim {}",
            obs.len(),
            config.obs_dim
        )));
    }
    let batch = obs.len() / config.obs_dim;
    let p = params.as_slice();

    let mut pre_activations = Vec::with_capacity(config.hidden_sizes.len());
    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(config.hidden_sizes.len());
    for layer in config.trunk_layers() {
        let input = activations.last().map(Vec::as_slice).unwrap_or(obs);
        let z = affine(&layer, p, input, batch);
        let a = z.iter().map(|v| v.tanh()).collect();
        pre_activations.push(z);
        activations.push(a);
    }
    let trace = ForwardTrace {
        batch_size: batch,
        inputs: obs.to_vec(),
        pre_activations,
        activations,
    };

    let features = trace.features();
    let logits = affine(&config.policy_head(), p, features, batch);
    let values = affine(&config.value_head(), p, features, batch);
    let output = NetworkOutput {
        action_count: config.action_count,
        logits,
        values,
    };
    Ok((output, trace))
}

/// Pulls per-sample output partials back to a parameter gradient.
///
/// Contributions are summed over the batch; callers that want a mean pass
/// partials already scaled by `1 / batch`.
pub fn backprop(
    params: &ParameterSet,
    config: &NetworkConfig,
    trace: &ForwardTrace,
    d_logits: &[f64],
    d_values: &[f64],
) -> Result<GradientSet> {
    let batch = trace.batch_size;
    if params.len() != config.param_count() {
        return Err(contract("parameter length does not match config"));
    }
    if d_logits.len() != batch * config.action_count || d_values.len() != batch {
        return Err(contract(format!(
            "partials ({} logits, {} values) do not match batch of {}",
            d_logits.len(),
            d_values.len(),
            batch
        )));
    }
    if trace.activations.len() != config.hidden_sizes.len() || trace.inputs.len() != batch * config.obs_dim {
        return Err(contract("trace does not match network config"));
    }
    ensure_finite(d_logits, "logit partials")?;
    ensure_finite(d_values, "value partials")?;

    let p = params.as_slice();
    let mut grads = vec![0.0; config.param_count()];
    let features = trace.features();
    let mut d_features = vec![0.0; features.len()];
    let has_trunk = !trace.activations.is_empty();

    let heads = [(config.policy_head(), d_logits), (config.value_head(), d_values)];
    for (head, d_out) in heads {
        let d_in = has_trunk.then_some(d_features.as_mut_slice());
        affine_backward(&head, p, features, d_out, &mut grads, d_in);
    }

    let trunk = config.trunk_layers();
    for (idx, layer) in trunk.iter().enumerate().rev() {
        // tanh'(z) = 1 - tanh(z)^2
        let d_pre: Vec<f64> = d_features
            .iter()
            .zip(&trace.activations[idx])
            .map(|(d, a)| d * (1.0 - a * a))
            .collect();
        let input = if idx == 0 {
            trace.inputs.as_slice()
        } else {
            trace.activations[idx - 1].as_slice()
        };
        let mut d_input = vec![0.0; if idx == 0 { 0 } else { input.len() }];
        let d_in = (idx > 0).then_some(d_input.as_mut_slice());
        affine_backward(layer, p, input, &d_pre, &mut grads, d_in);
        d_features = d_input;
    }

    Ok(GradientSet::new(grads))
}
