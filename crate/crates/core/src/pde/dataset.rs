use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{kl_sample, Grid1D, KernelSpec, SampledFunction, SpectralKernel};
use crate::hs::ForwardOperator;
use crate::io;
use crate::rng::{self, derive_seed};

use super::{EllipticOperator1D, OperatorSpec};

/// Separates the noise stream from the forcing stream of a pair.
const NOISE_STREAM: u64 = 0x6e6f_6973_6500_0000;

/// Uniform sensor subsampling of the solver grid; both endpoints are
/// always sensors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub stride: usize,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec { stride: 5 }
    }
}

impl SensorSpec {
    pub fn indices(&self, n: usize) -> Result<Vec<usize>> {
        if self.stride == 0 {
            return Err(Error::InvalidArgument("sensor stride must be at least 1".into()));
        }
        if n < 2 {
            return Err(Error::InvalidArgument("grid too small for sensors".into()));
        }
        let mut idx: Vec<usize> = (0..n).step_by(self.stride).collect();
        if *idx.last().unwrap() != n - 1 {
            idx.push(n - 1);
        }
        Ok(idx)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    /// Forcing on the solver grid.
    pub forcing: SampledFunction,
    /// Possibly noisy response on the sensor grid.
    pub solution: SampledFunction,
    pub noise: f64,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub operator: String,
    pub grid: Arc<Grid1D>,
    pub sensors: Vec<usize>,
    /// Sensor nodes with trapezoid weights.
    pub sensor_grid: Arc<Grid1D>,
    pub pairs: Vec<TrainingPair>,
    pub noise: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Forcings restricted to the sensors, one column per pair.
    pub fn forcing_at_sensors(&self) -> crate::linalg::Matrix {
        crate::linalg::Matrix::from_fn(self.sensors.len(), self.pairs.len(), |i, j| {
            self.pairs[j].forcing.values[self.sensors[i]]
        })
    }

    pub fn solutions(&self) -> crate::linalg::Matrix {
        crate::linalg::Matrix::from_fn(self.sensors.len(), self.pairs.len(), |i, j| self.pairs[j].solution.values[i])
    }
}

/// Generates `n` pairs: forcing `j` is the KL draw with seed
/// `seed ^ (j + 1)` and the response gets relative Gaussian noise
/// `noise * ||u_j||_inf` at each sensor.
pub fn generate_dataset(
    op: &EllipticOperator1D,
    kernel: &SpectralKernel,
    n: usize,
    noise: f64,
    sensors: &[usize],
    seed: u64,
) -> Result<Dataset> {
    let solver = op.discretize(kernel.grid().clone())?;
    generate_dataset_with(&solver, op.tag(), kernel, n, noise, sensors, seed)
}

/// [`generate_dataset`] for an arbitrary forward operator on the kernel's grid.
pub fn generate_dataset_with(
    solver: &dyn ForwardOperator,
    tag: &str,
    kernel: &SpectralKernel,
    n: usize,
    noise: f64,
    sensors: &[usize],
    seed: u64,
) -> Result<Dataset> {
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level {noise} must be finite and non-negative")));
    }
    let grid = kernel.grid().clone();
    if solver.source_grid() != &grid || solver.target_grid() != &grid {
        return Err(Error::Dimension("operator and kernel use different grids".into()));
    }
    if sensors.is_empty() || sensors.windows(2).any(|w| w[0] >= w[1]) || *sensors.last().unwrap() >= grid.len() {
        return Err(Error::InvalidArgument("sensors must be increasing grid indices".into()));
    }
    let (a, b) = grid.domain();
    let sensor_grid = Arc::new(Grid1D::trapezoid_on(a, b, sensors.iter().map(|&i| grid.nodes()[i]).collect())?);
    let mut pairs = Vec::with_capacity(n);
    for j in 0..n {
        let pair_seed = derive_seed(seed, j as u64 + 1);
        let forcing = kl_sample(kernel, pair_seed);
        let u = solver.apply(&forcing.values)?;
        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup == 0.0 {
            return Err(Error::Numerical(format!("pair {j} has an identically zero solution")));
        }
        let mut g = rng::seeded(pair_seed ^ NOISE_STREAM);
        let values: Vec<f64> = sensors
            .iter()
            .map(|&i| if noise > 0.0 { u[i] + noise * sup * rng::standard_normal(&mut g) } else { u[i] })
            .collect();
        pairs.push(TrainingPair {
            forcing,
            solution: SampledFunction::new(sensor_grid.clone(), values)?,
            noise,
        });
    }
    Ok(Dataset {
        operator: tag.to_string(),
        grid,
        sensors: sensors.to_vec(),
        sensor_grid,
        pairs,
        noise,
        seed,
    })
}

/// Everything needed to regenerate or reload a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub operator: OperatorSpec,
    pub kernel: KernelSpec,
    /// Uniform solver grid size, endpoints included.
    pub grid_n: usize,
    #[serde(default)]
    pub sensors: SensorSpec,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub noise: f64,
    pub seed: u64,
    #[serde(default)]
    pub pairs: Vec<String>,
}

impl DatasetManifest {
    pub fn grid(&self) -> Result<Arc<Grid1D>> {
        let [a, b] = self.operator.domain;
        Ok(Arc::new(Grid1D::trapezoid(self.grid_n, a, b)?))
    }

    /// Builds the operator and kernel and generates the pairs.
    pub fn generate(&self) -> Result<Dataset> {
        let grid = self.grid()?;
        let op = self.operator.build()?;
        let kernel = self.kernel.build_on(grid.clone())?;
        let sensors = self.sensors.indices(grid.len())?;
        generate_dataset(&op, &kernel, self.n, self.noise, &sensors, self.seed)
    }
}

fn pair_file(j: usize) -> String {
    format!("pair_{j:05}.csv")
}

/// Writes `dataset.json` plus one CSV per pair with columns
/// `node,f,u,is_sensor` (`u` empty away from sensors).
pub fn write_dataset(dir: &Path, manifest: &DatasetManifest, data: &Dataset) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut manifest = manifest.clone();
    manifest.pairs = (0..data.len()).map(pair_file).collect();
    for (j, pair) in data.pairs.iter().enumerate() {
        let mut out = String::from("node,f,u,is_sensor\n");
        let mut s = 0;
        for (i, (&x, &f)) in data.grid.nodes().iter().zip(&pair.forcing.values).enumerate() {
            let sensor = s < data.sensors.len() && data.sensors[s] == i;
            let u = if sensor { io::fmt_f64(pair.solution.values[s]) } else { String::new() };
            out.push_str(&format!("{},{},{},{}\n", io::fmt_f64(x), io::fmt_f64(f), u, sensor as u8));
            if sensor {
                s += 1;
            }
        }
        fs::write(dir.join(&manifest.pairs[j]), out)?;
    }
    io::write_json(&dir.join("dataset.json"), &manifest)?;
    Ok(manifest)
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Dataset)> {
    let manifest: DatasetManifest = io::read_json(&dir.join("dataset.json"))?;
    let grid = manifest.grid()?;
    let op = manifest.operator.build()?;
    if manifest.pairs.len() != manifest.n {
        return Err(Error::Parse(format!("manifest lists {} pair files for N = {}", manifest.pairs.len(), manifest.n)));
    }
    let mut sensors: Option<Vec<usize>> = None;
    let mut raw = Vec::with_capacity(manifest.n);
    for name in &manifest.pairs {
        let text = fs::read_to_string(dir.join(name))?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("node,f,u,is_sensor") {
            return Err(Error::Parse(format!("{name}: unexpected header")));
        }
        let mut f = Vec::with_capacity(grid.len());
        let mut u = Vec::new();
        let mut idx = Vec::new();
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 4 {
                return Err(Error::Parse(format!("{name}: line {} has {} fields", i + 2, cells.len())));
            }
            let x = io::parse_f64(cells[0])?;
            if i >= grid.len() || (x - grid.nodes()[i]).abs() > 1e-12 * (1.0 + x.abs()) {
                return Err(Error::Parse(format!("{name}: node {i} does not match the manifest grid")));
            }
            f.push(io::parse_f64(cells[1])?);
            match cells[3].trim() {
                "1" => {
                    idx.push(i);
                    u.push(io::parse_f64(cells[2])?);
                }
                "0" => {}
                other => return Err(Error::Parse(format!("{name}: is_sensor must be 0 or 1, got {other:?}"))),
            }
        }
        if f.len() != grid.len() {
            return Err(Error::Parse(format!("{name}: {} rows for a {}-node grid", f.len(), grid.len())));
        }
        match &sensors {
            None => sensors = Some(idx),
            Some(s) if *s != idx => return Err(Error::Parse(format!("{name}: sensor set differs from other pairs"))),
            _ => {}
        }
        raw.push((f, u));
    }
    let sensors = match sensors {
        Some(s) => s,
        None => manifest.sensors.indices(grid.len())?,
    };
    let (a, b) = grid.domain();
    let sensor_grid = Arc::new(Grid1D::trapezoid_on(a, b, sensors.iter().map(|&i| grid.nodes()[i]).collect())?);
    let pairs = raw
        .into_iter()
        .map(|(f, u)| {
            Ok(TrainingPair {
                forcing: SampledFunction::new(grid.clone(), f)?,
                solution: SampledFunction::new(sensor_grid.clone(), u)?,
                noise: manifest.noise,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let data = Dataset {
        operator: op.tag().to_string(),
        grid,
        sensors,
        sensor_grid,
        pairs,
        noise: manifest.noise,
        seed: manifest.seed,
    };
    Ok((manifest, data))
}
