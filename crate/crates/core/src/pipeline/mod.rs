//! Green's function discovery: a network pair `(N_G, N_hom)` trained so
//! that `u(x) ~ sum_j w_j N_G(x, y_j) f(y_j) + N_hom(x)` on the sensors,
//! and feature extraction from the learned kernel.

mod features;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use features::{extract_features, FeatureReport, FeatureThresholds, Mode, SingularityCandidate};

use crate::error::{Error, Result};
use crate::gp::Grid1D;
use crate::hs::IntegralOperator;
use crate::linalg::Matrix;
use crate::pde::Dataset;
use crate::rational::{ActivationSharing, Adam, RationalNetwork};

/// Pairs with squared sensor norm below this use the absolute error.
const ZERO_SOLUTION: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenModel {
    /// `(x, y) -> G(x, y)`.
    pub green: RationalNetwork,
    /// `x -> u_hom(x)`.
    pub hom: RationalNetwork,
    pub domain: (f64, f64),
}

impl GreenModel {
    pub fn new(
        green_widths: &[usize],
        hom_widths: &[usize],
        degrees: (usize, usize),
        sharing: ActivationSharing,
        domain: (f64, f64),
        seed: u64,
    ) -> Result<Self> {
        if green_widths.first() != Some(&2) || green_widths.last() != Some(&1) {
            return Err(Error::InvalidArgument(format!("kernel network must map 2 inputs to 1 output, got {green_widths:?}")));
        }
        if hom_widths.first() != Some(&1) || hom_widths.last() != Some(&1) {
            return Err(Error::InvalidArgument(format!("homogeneous network must map 1 input to 1 output, got {hom_widths:?}")));
        }
        if !(domain.0 < domain.1) {
            return Err(Error::InvalidArgument(format!("invalid domain {domain:?}")));
        }
        Ok(GreenModel {
            green: RationalNetwork::new(green_widths, degrees, sharing, seed)?,
            hom: RationalNetwork::new(hom_widths, degrees, sharing, seed ^ 0x686f6d)?,
            domain,
        })
    }

    /// Affine map of the domain onto `[-1, 1]`.
    fn scale(&self, x: f64) -> f64 {
        2.0 * (x - self.domain.0) / (self.domain.1 - self.domain.0) - 1.0
    }

    fn pair_inputs(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * xs.len() * ys.len());
        for &x in xs {
            let sx = self.scale(x);
            for &y in ys {
                v.push(sx);
                v.push(self.scale(y));
            }
        }
        v
    }

    /// Kernel values on `xs x ys` and the number of pole-clamped
    /// activation evaluations.
    pub fn kernel_matrix(&self, xs: &[f64], ys: &[f64]) -> Result<(Matrix, usize)> {
        let (vals, poles) = self.green.forward_batch(&self.pair_inputs(xs, ys), xs.len() * ys.len())?;
        Ok((Matrix::from_fn(xs.len(), ys.len(), |i, j| vals[i * ys.len() + j]), poles))
    }

    pub fn homogeneous(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let inputs: Vec<f64> = xs.iter().map(|&x| self.scale(x)).collect();
        Ok(self.hom.forward_batch(&inputs, xs.len())?.0)
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.green.params();
        p.extend(self.hom.params());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        let n = self.green.param_count();
        if p.len() != n + self.hom.param_count() {
            return Err(Error::Dimension("parameter vector does not match the model".into()));
        }
        self.green.set_params(&p[..n])?;
        self.hom.set_params(&p[n..])
    }

    pub fn param_count(&self) -> usize {
        self.green.param_count() + self.hom.param_count()
    }

    /// Predicted responses at the sensors, one column per pair.
    pub fn predict(&self, data: &Dataset) -> Result<Matrix> {
        let xs = data.sensor_grid.nodes();
        let (g, _) = self.kernel_matrix(xs, xs)?;
        let h = self.homogeneous(xs)?;
        Ok(predict_with(&g, &h, data))
    }
}

/// `W~ F`: sensor-weighted forcings.
fn weighted_forcings(data: &Dataset) -> Matrix {
    let w = data.sensor_grid.weights();
    let mut f = data.forcing_at_sensors();
    for (i, wi) in w.iter().enumerate() {
        f.row_mut(i).scale_mut(*wi);
    }
    f
}

fn predict_with(g: &Matrix, h: &[f64], data: &Dataset) -> Matrix {
    let mut pred = g * weighted_forcings(data);
    for (i, hi) in h.iter().enumerate() {
        pred.row_mut(i).add_scalar_mut(*hi);
    }
    pred
}

struct LossParts {
    loss: f64,
    /// dL/dG on the sensor grid.
    dg: Matrix,
    /// dL/dh at the sensors.
    dh: Vec<f64>,
}

fn loss_parts(g: &Matrix, h: &[f64], data: &Dataset, wf: &Matrix) -> Result<LossParts> {
    let n = data.len();
    if n == 0 {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    let w = data.sensor_grid.weights();
    let m = w.len();
    let u = data.solutions();
    let mut pred = g * wf;
    for i in 0..m {
        pred.row_mut(i).add_scalar_mut(h[i]);
    }
    let mut loss = 0.0;
    // R'_ij = 2/N w_i r_ij / D_j
    let mut rp = Matrix::zeros(m, n);
    for j in 0..n {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            let r = pred[(i, j)] - u[(i, j)];
            num += w[i] * r * r;
            den += w[i] * u[(i, j)] * u[(i, j)];
        }
        let d = if den < ZERO_SOLUTION { 1.0 } else { den };
        loss += num / d;
        for i in 0..m {
            rp[(i, j)] = 2.0 / n as f64 * w[i] * (pred[(i, j)] - u[(i, j)]) / d;
        }
    }
    let dg = &rp * wf.transpose();
    let dh = (0..m).map(|i| rp.row(i).sum()).collect();
    Ok(LossParts { loss: loss / n as f64, dg, dh })
}

/// Mean over pairs of the relative squared sensor error, with the kernel
/// given as values on the sensor grid.
pub fn kernel_loss(g: &Matrix, h: &[f64], data: &Dataset) -> Result<f64> {
    let m = data.sensors.len();
    if g.shape() != (m, m) || h.len() != m {
        return Err(Error::Dimension("kernel values do not match the sensor grid".into()));
    }
    Ok(loss_parts(g, h, data, &weighted_forcings(data))?.loss)
}

pub fn green_loss(model: &GreenModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    let xs = data.sensor_grid.nodes();
    let (g, _) = model.kernel_matrix(xs, xs)?;
    let h = model.homogeneous(xs)?;
    kernel_loss(&g, &h, data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenTrainConfig {
    #[serde(default = "default_green_widths")]
    pub green_widths: Vec<usize>,
    #[serde(default = "default_hom_widths")]
    pub hom_widths: Vec<usize>,
    #[serde(default = "default_degrees")]
    pub degrees: (usize, usize),
    #[serde(default)]
    pub sharing: ActivationSharing,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Learning rate reached at the last epoch by geometric decay.
    #[serde(default = "default_lr_final")]
    pub lr_final: f64,
    /// Epochs between checkpoints; 0 disables them.
    #[serde(default)]
    pub checkpoint_every: usize,
}

fn default_green_widths() -> Vec<usize> {
    vec![2, 32, 32, 1]
}
fn default_hom_widths() -> Vec<usize> {
    vec![1, 16, 1]
}
fn default_degrees() -> (usize, usize) {
    (3, 2)
}
fn default_epochs() -> usize {
    3000
}
fn default_lr() -> f64 {
    5e-3
}
fn default_lr_final() -> f64 {
    1e-3
}

impl Default for GreenTrainConfig {
    fn default() -> Self {
        GreenTrainConfig {
            green_widths: default_green_widths(),
            hom_widths: default_hom_widths(),
            degrees: default_degrees(),
            sharing: ActivationSharing::PerLayer,
            epochs: default_epochs(),
            lr: default_lr(),
            lr_final: default_lr_final(),
            checkpoint_every: 0,
        }
    }
}

/// Model, optimizer and progress at one epoch boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenCheckpoint {
    pub model: GreenModel,
    pub optimizer: Adam,
    pub epoch: usize,
    pub seed: u64,
    pub config: GreenTrainConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GreenTrainReport {
    /// Loss before each epoch's update, then the final loss.
    pub loss_history: Vec<f64>,
    pub pole_hits: usize,
}

/// Full-batch Adam on [`green_loss`] over both networks jointly.
///
pub type CheckpointHook<'a> = &'a mut dyn FnMut(&GreenCheckpoint) -> Result<()>;

/// `on_checkpoint` runs every `checkpoint_every` epochs and after the
/// last one. A non-finite loss restores the most recent checkpoint state
/// and returns [`Error::Diverged`].
pub fn train_green(
    data: &Dataset,
    config: &GreenTrainConfig,
    seed: u64,
    mut on_checkpoint: Option<CheckpointHook<'_>>,
) -> Result<(GreenModel, GreenTrainReport)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    if !(config.lr_final > 0.0) {
        return Err(Error::InvalidArgument("final learning rate must be positive".into()));
    }
    let mut model = GreenModel::new(
        &config.green_widths,
        &config.hom_widths,
        config.degrees,
        config.sharing,
        data.grid.domain(),
        seed,
    )?;
    let mut opt = Adam::new(model.param_count(), config.lr)?;
    let xs: Vec<f64> = data.sensor_grid.nodes().to_vec();
    let m = xs.len();
    let green_inputs = model.pair_inputs(&xs, &xs);
    let hom_inputs: Vec<f64> = xs.iter().map(|&x| model.scale(x)).collect();
    let wf = weighted_forcings(data);
    let ng = model.green.param_count();

    let mut report = GreenTrainReport::default();
    let mut params = model.params();
    let mut saved = (params.clone(), opt.clone());
    let decay = if config.epochs > 1 { (config.lr_final / config.lr).powf(1.0 / (config.epochs - 1) as f64) } else { 1.0 };

    let checkpoint = |model: &GreenModel, opt: &Adam, epoch: usize| GreenCheckpoint {
        model: model.clone(),
        optimizer: opt.clone(),
        epoch,
        seed,
        config: config.clone(),
    };

    for epoch in 0..config.epochs {
        opt.lr = config.lr * decay.powi(epoch as i32);
        let gt = model.green.forward_tape(&green_inputs, m * m)?;
        let ht = model.hom.forward_tape(&hom_inputs, m)?;
        report.pole_hits += gt.pole_hits + ht.pole_hits;
        let g = Matrix::from_fn(m, m, |i, j| gt.outputs()[i * m + j]);
        let parts = loss_parts(&g, ht.outputs(), data, &wf)?;
        if !parts.loss.is_finite() {
            params = saved.0;
            model.set_params(&params)?;
            log::error!("loss diverged at epoch {epoch}; restored the last checkpoint");
            return Err(Error::Diverged { epoch });
        }
        report.loss_history.push(parts.loss);
        let dg: Vec<f64> = (0..m * m).map(|k| parts.dg[(k / m, k % m)]).collect();
        let mut grad = model.green.backward(&gt, &dg)?;
        grad.extend(model.hom.backward(&ht, &parts.dh)?);
        debug_assert_eq!(grad.len(), ng + model.hom.param_count());
        opt.update(&mut params, &grad)?;
        model.set_params(&params)?;
        if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 && params.iter().all(|p| p.is_finite()) {
            saved = (params.clone(), opt.clone());
            if let Some(cb) = on_checkpoint.as_mut() {
                cb(&checkpoint(&model, &opt, epoch + 1))?;
            }
        }
    }
    let final_loss = green_loss(&model, data)?;
    if !final_loss.is_finite() {
        model.set_params(&saved.0)?;
        return Err(Error::Diverged { epoch: config.epochs });
    }
    report.loss_history.push(final_loss);
    if let Some(cb) = on_checkpoint.as_mut() {
        if config.checkpoint_every == 0 || !config.epochs.is_multiple_of(config.checkpoint_every) {
            cb(&checkpoint(&model, &opt, config.epochs))?;
        }
    }
    Ok((model, report))
}

/// Dense evaluation of the learned kernel on `grid x grid`.
pub fn evaluate_kernel(model: &GreenModel, grid: Arc<Grid1D>) -> Result<IntegralOperator> {
    let (g, _) = model.kernel_matrix(grid.nodes(), grid.nodes())?;
    IntegralOperator::new(grid.clone(), grid, g)
}
