use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::Grid1D;

use super::GreenModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureThresholds {
    /// Number of dominant modes reported.
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// `|G|` above `factor` times this percentile marks a candidate cell.
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

fn default_modes() -> usize {
    4
}
fn default_percentile() -> f64 {
    99.5
}
fn default_factor() -> f64 {
    5.0
}

impl Default for FeatureThresholds {
    fn default() -> Self {
        FeatureThresholds { modes: default_modes(), percentile: default_percentile(), factor: default_factor() }
    }
}

/// Singular triplet of the learned operator, functions as grid values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub sigma: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityCandidate {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub pole: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub symmetry_score: f64,
    pub dominant_modes: Vec<Mode>,
    /// Non-increasing.
    pub mode_energies: Vec<f64>,
    pub singularity_candidates: Vec<SingularityCandidate>,
    pub hom_norm: f64,
}

/// Nearest-rank percentile of `values`, `q` in `[0, 100]`.
fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

/// Reads symmetry, dominant modes, singularity candidates and the size of
/// the homogeneous term off a trained model, evaluated on `grid x grid`.
pub fn extract_features(model: &GreenModel, grid: Arc<Grid1D>, thresholds: &FeatureThresholds) -> Result<FeatureReport> {
    if !(0.0..=100.0).contains(&thresholds.percentile) || !(thresholds.factor > 0.0) {
        return Err(Error::InvalidArgument("percentile must lie in [0, 100] and factor be positive".into()));
    }
    let xs = grid.nodes();
    let n = xs.len();
    let inputs = model.pair_inputs(xs, xs);
    let tape = model.green.forward_tape(&inputs, n * n)?;
    let values = tape.outputs();
    // Pole flags per sample: re-evaluate only when any fired.
    let pole_cells: Vec<bool> = if tape.pole_hits > 0 {
        (0..n * n)
            .map(|k| model.green.forward_batch(&inputs[2 * k..2 * k + 2], 1).map(|(_, p)| p > 0))
            .collect::<Result<_>>()?
    } else {
        vec![false; n * n]
    };
    let g = crate::linalg::Matrix::from_fn(n, n, |i, j| values[i * n + j]);
    let op = crate::hs::IntegralOperator::new(grid.clone(), grid.clone(), g)?;

    let svd = op.singular_functions();
    let r = thresholds.modes.min(svd.rank());
    let dominant_modes = (0..r)
        .map(|j| {
            let mut left: Vec<f64> = svd.u.column(j).iter().copied().collect();
            let mut right: Vec<f64> = svd.v.column(j).iter().copied().collect();
            // sign convention: left mode has positive integral
            if grid.integrate(&left) < 0.0 {
                left.iter_mut().for_each(|v| *v = -*v);
                right.iter_mut().for_each(|v| *v = -*v);
            }
            Mode { sigma: svd.singular_values[j], left, right }
        })
        .collect();

    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let cut = thresholds.factor * percentile(&abs, thresholds.percentile);
    let singularity_candidates = (0..n * n)
        .filter(|&k| pole_cells[k] || abs[k] > cut)
        .map(|k| SingularityCandidate { x: xs[k / n], y: xs[k % n], value: values[k], pole: pole_cells[k] })
        .collect();

    let hom = model.homogeneous(xs)?;
    Ok(FeatureReport {
        symmetry_score: op.symmetry_score()?,
        dominant_modes,
        mode_energies: svd.singular_values[..r].to_vec(),
        singularity_candidates,
        hom_norm: grid.l2_norm(&hom),
    })
}
