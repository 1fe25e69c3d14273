//! Fully connected PReLU network with an explicit forward tape.
//!
//! Every layer is `PReLU(x·W + b)`; inverted dropout follows every layer
//! except the last. Weights are stored `(in, out)` so a batch `x` of shape
//! `(b, in)` maps to `x·W` of shape `(b, out)`.

use rand::Rng as _;

use super::matrix::Matrix;
use super::rng::Rng;
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 2] = [512, 256];
pub const DEFAULT_SLOPE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: Matrix::zeros(input, output),
            bias: vec![0.0; output],
            slopes: vec![0.0; output],
        }
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Dense>,
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases, slopes at [`DEFAULT_SLOPE`].
    pub fn init(input_dim: usize, hidden: &[usize], output_dim: usize, rng: &mut Rng) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidConfig(format!(
                "layer widths must be positive (input {input_dim}, hidden {hidden:?}, output {output_dim})"
            )));
        }
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input_dim);
        widths.extend_from_slice(hidden);
        widths.push(output_dim);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Dense {
                    weights: Matrix::from_vec(fan_in, fan_out, data).expect("sized buffer"),
                    bias: vec![0.0; fan_out],
                    slopes: vec![DEFAULT_SLOPE; fan_out],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.output_dim() == 0 || l.input_dim() == 0 {
                return Err(Error::dim(format!("layer {k} has an empty dimension")));
            }
            if l.bias.len() != l.output_dim() || l.slopes.len() != l.output_dim() {
                return Err(Error::dim(format!(
                    "layer {k}: bias/slope lengths {}/{} differ from width {}",
                    l.bias.len(),
                    l.slopes.len(),
                    l.output_dim()
                )));
            }
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::dim(format!(
                    "layer {k} outputs {} but layer {} expects {}",
                    pair[0].output_dim(),
                    k + 1,
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| l.weights.shape()).collect()
    }

    /// Parameter tensors in a fixed order: per layer weights, bias, slopes.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.data(), l.bias.as_slice(), l.slopes.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.data_mut(),
                    l.bias.as_mut_slice(),
                    l.slopes.as_mut_slice(),
                ]
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Elementwise `self += other`.
    pub fn accumulate(&mut self, other: &MlpParams) -> Result<()> {
        if self.shapes() != other.shapes() {
            return Err(Error::dim("accumulating gradients of different shapes"));
        }
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        }
        Ok(())
    }
}

/// `out[i,j] = x[i,j]` when positive, else `slopes[j]·x[i,j]`.
pub fn prelu(x: &Matrix, slopes: &[f64]) -> Result<Matrix> {
    if slopes.len() != x.cols() {
        return Err(Error::dim(format!(
            "{} slopes for {} columns",
            slopes.len(),
            x.cols()
        )));
    }
    let mut out = x.clone();
    for row in out.data_mut().chunks_exact_mut(slopes.len().max(1)) {
        for (v, s) in row.iter_mut().zip(slopes) {
            if *v <= 0.0 {
                *v *= s;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct LayerTrace {
    input: Matrix,
    pre_activation: Matrix,
    /// Scaled keep-mask (`0` or `1/(1-p)`), present only for training passes.
    mask: Option<Matrix>,
}

/// Activations recorded by [`mlp_forward`] for use by [`mlp_backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    shapes: Vec<(usize, usize)>,
    layers: Vec<LayerTrace>,
}

impl Tape {
    pub fn batch_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.input.rows())
    }

    /// Dropout masks in layer order, for inspection.
    pub fn masks(&self) -> Vec<Option<&Matrix>> {
        self.layers.iter().map(|l| l.mask.as_ref()).collect()
    }
}

pub fn mlp_forward(
    params: &MlpParams,
    x: &Matrix,
    dropout_p: f64,
    training: bool,
    rng: &mut Rng,
) -> Result<(Matrix, Tape)> {
    if x.cols() != params.input_dim() {
        return Err(Error::dim(format!(
            "input has {} features, network expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    if !(0.0..1.0).contains(&dropout_p) {
        return Err(Error::InvalidConfig(format!(
            "dropout probability {dropout_p} outside [0, 1)"
        )));
    }
    x.ensure_finite("network input")?;

    let last = params.layers.len() - 1;
    let keep_scale = 1.0 / (1.0 - dropout_p);
    let mut current = x.clone();
    let mut traces = Vec::with_capacity(params.layers.len());
    for (k, layer) in params.layers.iter().enumerate() {
        let mut pre = current.matmul(&layer.weights)?;
        pre.add_row_vector(&layer.bias)?;
        let mut out = prelu(&pre, &layer.slopes)?;
        let mask = if training && k < last && dropout_p > 0.0 {
            let mut mask = Matrix::zeros(out.rows(), out.cols());
            for m in mask.data_mut() {
                if rng.random::<f64>() >= dropout_p {
                    *m = keep_scale;
                }
            }
            for (v, m) in out.data_mut().iter_mut().zip(mask.data()) {
                *v *= m;
            }
            Some(mask)
        } else {
            None
        };
        traces.push(LayerTrace {
            input: current,
            pre_activation: pre,
            mask,
        });
        current = out;
    }
    current.ensure_finite("network output")?;
    Ok((
        current,
        Tape {
            shapes: params.shapes(),
            layers: traces,
        },
    ))
}

/// Reverse pass through a recorded forward. Returns parameter gradients
/// (same shapes as `params`) and the gradient with respect to the input.
pub fn mlp_backward(params: &MlpParams, tape: &Tape, upstream: &Matrix) -> Result<(MlpParams, Matrix)> {
    if tape.shapes != params.shapes() {
        return Err(Error::State(format!(
            "tape recorded layer shapes {:?} but params have {:?}",
            tape.shapes,
            params.shapes()
        )));
    }
    let batch = tape.batch_size();
    if upstream.shape() != (batch, params.output_dim()) {
        return Err(Error::dim(format!(
            "upstream gradient {:?}, expected {:?}",
            upstream.shape(),
            (batch, params.output_dim())
        )));
    }

    let mut grads = params.zeros_like();
    let mut g = upstream.clone();
    for k in (0..params.layers.len()).rev() {
        let layer = &params.layers[k];
        let trace = &tape.layers[k];
        if let Some(mask) = &trace.mask {
            for (v, m) in g.data_mut().iter_mut().zip(mask.data()) {
                *v *= m;
            }
        }
        let width = layer.output_dim();
        let gl = &mut grads.layers[k];
        for (grow, zrow) in g
            .data_mut()
            .chunks_exact_mut(width)
            .zip(trace.pre_activation.data().chunks_exact(width))
        {
            for j in 0..width {
                let z = zrow[j];
                if z <= 0.0 {
                    gl.slopes[j] += grow[j] * z;
                    grow[j] *= layer.slopes[j];
                }
            }
        }
        gl.bias = g.column_sums();
        gl.weights = trace.input.t_matmul(&g)?;
        g = g.matmul_t(&layer.weights)?;
    }
    Ok((grads, g))
}
