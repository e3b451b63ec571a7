use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::activation::{RationalActivation, POLE_CLAMP};

/// Whether each hidden layer shares one activation or has one per neuron.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationSharing {
    #[default]
    PerLayer,
    PerNeuron,
}

/// Affine map `x -> W x + b` with `W` stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn new(rows: usize, cols: usize, w: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if w.len() != rows * cols || b.len() != rows {
            return Err(Error::Dimension(format!("layer {rows}x{cols} given {} weights and {} biases", w.len(), b.len())));
        }
        Ok(Layer { rows, cols, w, b })
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            let mut s = self.b[r];
            for c in 0..self.cols {
                s += row[c] * x[c];
            }
            out[r] = s;
        }
    }
}

/// Feedforward network: affine layers with a rational activation after
/// every layer except the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalNetwork {
    pub widths: Vec<usize>,
    pub layers: Vec<Layer>,
    /// One entry per hidden layer; each holds one or `width` activations.
    pub activations: Vec<Vec<RationalActivation>>,
}

/// Cached forward pass over a batch, consumed by [`RationalNetwork::backward`].
#[derive(Clone, Debug)]
pub struct Tape {
    pub samples: usize,
    /// `values[l]` holds the input of layer `l` for every sample, then the
    /// network output as the last entry.
    values: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
    /// Number of clamped denominator evaluations.
    pub pole_hits: usize,
}

impl Tape {
    pub fn outputs(&self) -> &[f64] {
        self.values.last().expect("tape has an output layer")
    }
}

impl RationalNetwork {
    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases, ReLU-like
    /// activations.
    pub fn new(widths: &[usize], degrees: (usize, usize), sharing: ActivationSharing, seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer widths {widths:?}")));
        }
        let mut g = rng::seeded(seed);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for l in 0..widths.len() - 1 {
            let (rows, cols) = (widths[l + 1], widths[l]);
            let bound = 1.0 / (cols as f64).sqrt();
            let w = (0..rows * cols).map(|_| g.random_range(-bound..=bound)).collect();
            layers.push(Layer { rows, cols, w, b: vec![0.0; rows] });
        }
        let act = RationalActivation::init_relu_like(degrees.0, degrees.1)?;
        let activations = widths[1..widths.len() - 1]
            .iter()
            .map(|&w| match sharing {
                ActivationSharing::PerLayer => vec![act.clone()],
                ActivationSharing::PerNeuron => vec![act.clone(); w],
            })
            .collect();
        Ok(RationalNetwork { widths: widths.to_vec(), layers, activations })
    }

    pub fn from_parts(layers: Vec<Layer>, activations: Vec<Vec<RationalActivation>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        let mut widths = vec![layers[0].cols];
        for l in &layers {
            if l.cols != *widths.last().unwrap() {
                return Err(Error::Dimension("consecutive layer shapes do not chain".into()));
            }
            widths.push(l.rows);
        }
        if activations.len() != layers.len() - 1 {
            return Err(Error::Dimension(format!("{} hidden layers need {} activation sets", layers.len() - 1, layers.len() - 1)));
        }
        for (h, acts) in activations.iter().enumerate() {
            if acts.len() != 1 && acts.len() != widths[h + 1] {
                return Err(Error::Dimension(format!("hidden layer {h} has {} activations", acts.len())));
            }
        }
        Ok(RationalNetwork { widths, layers, activations })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum::<usize>()
            + self.activations.iter().flatten().map(|a| a.param_count()).sum::<usize>()
    }

    /// Parameters flattened as: per layer `W` (row-major) then `b`; then
    /// per activation numerator then denominator coefficients.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.w);
            p.extend_from_slice(&l.b);
        }
        for a in self.activations.iter().flatten() {
            p.extend_from_slice(&a.num);
            p.extend_from_slice(&a.den);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Dimension(format!("{} parameters for a network with {}", p.len(), self.param_count())));
        }
        let mut off = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&p[off..off + dst.len()]);
            off += dst.len();
        };
        for l in &mut self.layers {
            take(&mut l.w);
            take(&mut l.b);
        }
        for a in self.activations.iter_mut().flatten() {
            take(&mut a.num);
            take(&mut a.den);
        }
        Ok(())
    }

    fn max_width(&self) -> usize {
        *self.widths.iter().max().unwrap()
    }

    fn activation(&self, hidden: usize, neuron: usize) -> &RationalActivation {
        let acts = &self.activations[hidden];
        if acts.len() == 1 {
            &acts[0]
        } else {
            &acts[neuron]
        }
    }

    fn forward_one(&self, x: &[f64], buf: &mut [f64], next: &mut [f64], out: &mut [f64]) -> usize {
        let mut poles = 0;
        buf[..x.len()].copy_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&buf[..layer.cols], &mut next[..layer.rows]);
            if l < last {
                for k in 0..layer.rows {
                    let (v, pole) = self.activation(l, k).eval(next[k]);
                    poles += pole as usize;
                    next[k] = v;
                }
            }
            buf[..layer.rows].copy_from_slice(&next[..layer.rows]);
        }
        out.copy_from_slice(&buf[..self.output_dim()]);
        poles
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(x, 1)?.0)
    }

    /// Row-major `samples x input_dim` inputs to row-major outputs, plus
    /// the number of pole-clamped evaluations.
    pub fn forward_batch(&self, inputs: &[f64], samples: usize) -> Result<(Vec<f64>, usize)> {
        let (din, dout) = (self.input_dim(), self.output_dim());
        if inputs.len() != samples * din {
            return Err(Error::Dimension(format!("{} inputs for {samples} samples of width {din}", inputs.len())));
        }
        let mw = self.max_width();
        let (mut buf, mut next) = (vec![0.0; mw], vec![0.0; mw]);
        let mut out = vec![0.0; samples * dout];
        let mut poles = 0;
        for s in 0..samples {
            poles += self.forward_one(&inputs[s * din..(s + 1) * din], &mut buf, &mut next, &mut out[s * dout..(s + 1) * dout]);
        }
        Ok((out, poles))
    }

    /// Forward pass keeping intermediate values for [`Self::backward`].
    pub fn forward_tape(&self, inputs: &[f64], samples: usize) -> Result<Tape> {
        let din = self.input_dim();
        if inputs.len() != samples * din {
            return Err(Error::Dimension(format!("{} inputs for {samples} samples of width {din}", inputs.len())));
        }
        let last = self.layers.len() - 1;
        let mut values = vec![inputs.to_vec()];
        let mut pre = Vec::with_capacity(last);
        let mut poles = 0;
        for (l, layer) in self.layers.iter().enumerate() {
            let input = &values[l];
            let mut z = vec![0.0; samples * layer.rows];
            for s in 0..samples {
                layer.apply(&input[s * layer.cols..(s + 1) * layer.cols], &mut z[s * layer.rows..(s + 1) * layer.rows]);
            }
            if l < last {
                let mut a = vec![0.0; z.len()];
                for s in 0..samples {
                    for k in 0..layer.rows {
                        let (v, pole) = self.activation(l, k).eval(z[s * layer.rows + k]);
                        poles += pole as usize;
                        a[s * layer.rows + k] = v;
                    }
                }
                pre.push(z);
                values.push(a);
            } else {
                values.push(z);
            }
        }
        Ok(Tape { samples, values, pre, pole_hits: poles })
    }

    /// Gradient of `sum_s out_grad[s] . N(x_s)` in the layout of
    /// [`Self::params`]. Samples are accumulated in order.
    pub fn backward(&self, tape: &Tape, out_grad: &[f64]) -> Result<Vec<f64>> {
        let dout = self.output_dim();
        if out_grad.len() != tape.samples * dout {
            return Err(Error::Dimension("output gradient does not match the tape".into()));
        }
        let mut grad = vec![0.0; self.param_count()];
        // offsets into the flat layout
        let mut layer_off = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            layer_off.push(off);
            off += l.w.len() + l.b.len();
        }
        let mut act_off = Vec::with_capacity(self.activations.len());
        for acts in &self.activations {
            let mut v = Vec::with_capacity(acts.len());
            for a in acts {
                v.push(off);
                off += a.param_count();
            }
            act_off.push(v);
        }

        let mw = self.max_width();
        let (mut delta, mut prev) = (vec![0.0; mw], vec![0.0; mw]);
        let last = self.layers.len() - 1;
        for s in 0..tape.samples {
            delta[..dout].copy_from_slice(&out_grad[s * dout..(s + 1) * dout]);
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let (rows, cols) = (layer.rows, layer.cols);
                if l < last {
                    // delta holds dL/da for this layer's activated output
                    let z = &tape.pre[l][s * rows..(s + 1) * rows];
                    for k in 0..rows {
                        let ai = if self.activations[l].len() == 1 { 0 } else { k };
                        let act = &self.activations[l][ai];
                        let base = act_off[l][ai];
                        let d = accumulate_activation(act, z[k], delta[k], &mut grad[base..base + act.param_count()]);
                        delta[k] *= d;
                    }
                }
                let input = &tape.values[l][s * cols..(s + 1) * cols];
                let base = layer_off[l];
                for r in 0..rows {
                    let dr = delta[r];
                    let gw = &mut grad[base + r * cols..base + (r + 1) * cols];
                    for c in 0..cols {
                        gw[c] += dr * input[c];
                    }
                }
                for r in 0..rows {
                    grad[base + rows * cols + r] += delta[r];
                }
                if l > 0 {
                    for c in 0..cols {
                        let mut v = 0.0;
                        for r in 0..rows {
                            v += layer.w[r * cols + c] * delta[r];
                        }
                        prev[c] = v;
                    }
                    delta[..cols].copy_from_slice(&prev[..cols]);
                }
            }
        }
        Ok(grad)
    }
}

/// Adds `upstream * dsigma/dcoef` into `g` (numerator then denominator)
/// and returns `dsigma/dx`.
fn accumulate_activation(act: &RationalActivation, x: f64, upstream: f64, g: &mut [f64]) -> f64 {
    let mut q = 0.0;
    let mut dq = 0.0;
    for &c in act.den.iter().rev() {
        dq = dq * x + q;
        q = q * x + c;
    }
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in act.num.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    if q.abs() < POLE_CLAMP {
        q = if q < 0.0 { -POLE_CLAMP } else { POLE_CLAMP };
    }
    let nn = act.num.len();
    let mut xi = upstream / q;
    for gi in g[..nn].iter_mut() {
        *gi += xi;
        xi *= x;
    }
    let mut xi = -upstream * p / (q * q);
    for gi in g[nn..].iter_mut() {
        *gi += xi;
        xi *= x;
    }
    (dp * q - p * dq) / (q * q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(widths: &[usize], seed: u64) -> RationalNetwork {
        let mut n = RationalNetwork::new(widths, (3, 2), ActivationSharing::PerLayer, seed).unwrap();
        // nonzero biases exercise every gradient path
        let mut p = n.params();
        let mut g = rng::seeded(seed + 100);
        for v in p.iter_mut() {
            *v += 0.05 * rng::standard_normal(&mut g);
        }
        n.set_params(&p).unwrap();
        n
    }

    #[test]
    fn parameter_count_formula() {
        for widths in [vec![2, 8, 8, 1], vec![2, 32, 32, 1], vec![1, 16, 1], vec![3, 1]] {
            let n = RationalNetwork::new(&widths, (3, 2), ActivationSharing::PerLayer, 0).unwrap();
            let affine: usize = widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
            assert_eq!(n.param_count(), affine + (widths.len() - 2) * 7);
            assert_eq!(n.params().len(), n.param_count());
        }
        let n = RationalNetwork::new(&[2, 4, 1], (3, 2), ActivationSharing::PerNeuron, 0).unwrap();
        assert_eq!(n.param_count(), 12 + 5 + 4 * 7);
    }

    #[test]
    fn single_affine_layer() {
        let layer = Layer::new(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0], vec![0.5, -2.0]).unwrap();
        let n = RationalNetwork::from_parts(vec![layer], vec![]).unwrap();
        assert_eq!(n.forward(&[1.0, 1.0, 2.0]).unwrap(), vec![9.5, -2.5]);
        assert!(n.forward(&[1.0]).is_err());
    }

    #[test]
    fn zero_network_gives_zero() {
        let mut n = RationalNetwork::new(&[2, 5, 5, 1], (3, 2), ActivationSharing::PerLayer, 1).unwrap();
        let mut p = vec![0.0; n.param_count()];
        for a in 0..2 {
            // activation denominators must stay nonzero
            let base = n.param_count() - (2 - a) * 7;
            p[base + 4] = 1.0;
        }
        n.set_params(&p).unwrap();
        assert_eq!(n.forward(&[0.3, -2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn batch_equals_loop_bitwise() {
        let n = net(&[2, 16, 16, 1], 7);
        let mut g = rng::seeded(9);
        let inputs = rng::normal_vec(&mut g, 2 * 50);
        let (batch, _) = n.forward_batch(&inputs, 50).unwrap();
        let tape = n.forward_tape(&inputs, 50).unwrap();
        for s in 0..50 {
            let single = n.forward(&inputs[2 * s..2 * s + 2]).unwrap();
            assert_eq!(single[0].to_bits(), batch[s].to_bits());
            assert_eq!(tape.outputs()[s].to_bits(), batch[s].to_bits());
        }
    }

    #[test]
    fn linear_network_gradient_closed_form() {
        let layer = Layer::new(1, 2, vec![0.7, -0.3], vec![0.2]).unwrap();
        let n = RationalNetwork::from_parts(vec![layer], vec![]).unwrap();
        let x = [1.5, 2.0];
        let y = 0.4;
        let tape = n.forward_tape(&x, 1).unwrap();
        let r = tape.outputs()[0] - y;
        let g = n.backward(&tape, &[2.0 * r]).unwrap();
        assert_eq!(g, vec![2.0 * r * x[0], 2.0 * r * x[1], 2.0 * r]);
    }

    #[test]
    fn identity_activation_reduces_to_linear_backprop() {
        let l1 = Layer::new(2, 1, vec![0.5, -1.0], vec![0.1, 0.2]).unwrap();
        let l2 = Layer::new(1, 2, vec![2.0, 3.0], vec![-0.5]).unwrap();
        let n = RationalNetwork::from_parts(vec![l1, l2], vec![vec![RationalActivation::identity()]]).unwrap();
        let tape = n.forward_tape(&[2.0], 1).unwrap();
        let g = n.backward(&tape, &[1.0]).unwrap();
        // d/dW1 = W2^T x, d/db1 = W2^T, d/dW2 = h, d/db2 = 1
        assert_eq!(&g[..7], &[4.0, 6.0, 2.0, 3.0, 1.1, -1.8, 1.0]);
    }

    #[test]
    fn gradients_match_central_differences() {
        let n = net(&[2, 8, 8, 1], 3);
        let mut g = rng::seeded(5);
        let h = 1e-5;
        for _ in 0..5 {
            let x = [g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)];
            let tape = n.forward_tape(&x, 1).unwrap();
            assert_eq!(tape.pole_hits, 0);
            let grad = n.backward(&tape, &[1.0]).unwrap();
            let p = n.params();
            for i in 0..p.len() {
                let mut q = p.clone();
                q[i] += h;
                let mut np = n.clone();
                np.set_params(&q).unwrap();
                let fp = np.forward(&x).unwrap()[0];
                q[i] -= 2.0 * h;
                np.set_params(&q).unwrap();
                let fm = np.forward(&x).unwrap()[0];
                let fd = (fp - fm) / (2.0 * h);
                let ok = if grad[i].abs() < 1e-8 && fd.abs() < 1e-8 {
                    (grad[i] - fd).abs() <= 1e-8
                } else {
                    (grad[i] - fd).abs() <= 1e-5 * grad[i].abs().max(fd.abs())
                };
                assert!(ok, "param {i}: {} vs {fd}", grad[i]);
            }
        }
    }

    #[test]
    fn polynomial_activation_network() {
        let act = RationalActivation::new(vec![0.0, 1.0, 0.5], vec![1.0]).unwrap();
        let l1 = Layer::new(1, 1, vec![2.0], vec![1.0]).unwrap();
        let l2 = Layer::new(1, 1, vec![3.0], vec![0.0]).unwrap();
        let n = RationalNetwork::from_parts(vec![l1, l2], vec![vec![act]]).unwrap();
        for x in [-1.0f64, 0.0, 0.5, 2.0] {
            let z = 2.0 * x + 1.0;
            assert!((n.forward(&[x]).unwrap()[0] - 3.0 * (z + 0.5 * z * z)).abs() < 1e-14);
        }
    }
}
