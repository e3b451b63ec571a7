use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::{Adam, RationalNetwork};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean squared error over the epoch's minibatches.
    pub loss_history: Vec<f64>,
    pub pole_hits: usize,
}

/// Mean over samples of the squared output error.
pub fn mse(net: &RationalNetwork, inputs: &[f64], targets: &[f64]) -> Result<f64> {
    let dout = net.output_dim();
    let samples = targets.len() / dout.max(1);
    let (out, _) = net.forward_batch(inputs, samples)?;
    if out.len() != targets.len() {
        return Err(Error::Dimension("targets do not match the inputs".into()));
    }
    Ok(out.iter().zip(targets).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / samples as f64)
}

/// Minibatch Adam on the mean squared error with a seeded shuffle per
/// epoch. A non-finite loss restores the last finite parameters and
/// returns [`Error::Diverged`].
pub fn train(
    net: &mut RationalNetwork,
    optimizer: &mut Adam,
    inputs: &[f64],
    targets: &[f64],
    opts: &TrainOptions,
) -> Result<TrainReport> {
    let (din, dout) = (net.input_dim(), net.output_dim());
    if targets.is_empty() || !targets.len().is_multiple_of(dout) {
        return Err(Error::InvalidArgument("training set is empty or ragged".into()));
    }
    let samples = targets.len() / dout;
    if inputs.len() != samples * din {
        return Err(Error::Dimension(format!("{} inputs for {samples} samples of width {din}", inputs.len())));
    }
    if opts.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    if optimizer.m.len() != net.param_count() {
        return Err(Error::Dimension("optimizer state does not match the network".into()));
    }
    let mut g = rng::seeded(opts.seed);
    let mut order: Vec<usize> = (0..samples).collect();
    let mut report = TrainReport::default();
    let mut params = net.params();
    let (mut bx, mut by) = (Vec::new(), Vec::new());
    for epoch in 0..opts.epochs {
        let last_good = params.clone();
        order.shuffle(&mut g);
        let mut total = 0.0;
        for chunk in order.chunks(opts.batch_size) {
            bx.clear();
            by.clear();
            for &s in chunk {
                bx.extend_from_slice(&inputs[s * din..(s + 1) * din]);
                by.extend_from_slice(&targets[s * dout..(s + 1) * dout]);
            }
            let tape = net.forward_tape(&bx, chunk.len())?;
            report.pole_hits += tape.pole_hits;
            let scale = 1.0 / chunk.len() as f64;
            let out_grad: Vec<f64> = tape.outputs().iter().zip(&by).map(|(o, t)| 2.0 * scale * (o - t)).collect();
            total += tape.outputs().iter().zip(&by).map(|(o, t)| (o - t).powi(2)).sum::<f64>();
            let grad = net.backward(&tape, &out_grad)?;
            optimizer.update(&mut params, &grad)?;
            net.set_params(&params)?;
        }
        let loss = total / samples as f64;
        if !loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            net.set_params(&last_good)?;
            return Err(Error::Diverged { epoch });
        }
        report.loss_history.push(loss);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ActivationSharing;

    fn sine_data(n: usize) -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let ys = xs.iter().map(|x| (2.0 * std::f64::consts::PI * x).sin()).collect();
        (xs, ys)
    }

    #[test]
    fn deterministic_loss_history() {
        let (xs, ys) = sine_data(64);
        let run = || {
            let mut net = RationalNetwork::new(&[1, 8, 8, 1], (3, 2), ActivationSharing::PerLayer, 2).unwrap();
            let mut opt = Adam::new(net.param_count(), 1e-2).unwrap();
            let opts = TrainOptions { epochs: 20, batch_size: 16, lr: 1e-2, seed: 5 };
            train(&mut net, &mut opt, &xs, &ys, &opts).unwrap().loss_history
        };
        let a = run();
        let b = run();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert!(a.last().unwrap() < &a[0]);
    }

    #[test]
    fn divergence_restores_last_finite_state() {
        let mut net = RationalNetwork::new(&[1, 4, 1], (3, 2), ActivationSharing::PerLayer, 0).unwrap();
        let mut opt = Adam::new(net.param_count(), 1e-3).unwrap();
        let before = net.params();
        let opts = TrainOptions { epochs: 3, batch_size: 2, lr: 1e-3, seed: 0 };
        let err = train(&mut net, &mut opt, &[0.0, 1.0], &[f64::INFINITY, 0.0], &opts).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 0 }));
        assert_eq!(net.params(), before);
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut net = RationalNetwork::new(&[2, 4, 1], (3, 2), ActivationSharing::PerLayer, 0).unwrap();
        let mut opt = Adam::new(net.param_count(), 1e-3).unwrap();
        let opts = TrainOptions { epochs: 1, batch_size: 2, lr: 1e-3, seed: 0 };
        assert!(train(&mut net, &mut opt, &[0.0, 1.0, 2.0], &[0.0, 1.0], &opts).is_err());
        assert!(train(&mut net, &mut opt, &[], &[], &opts).is_err());
    }
}
