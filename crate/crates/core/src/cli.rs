//! Command-line front end. Every subcommand writes into `--out` only,
//! including a `manifest.json` that echoes the input config verbatim.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gp::{kl_sample_batch, Grid1D, KernelSpec};
use crate::hs::{hierarchical_learn, BlockData, HierarchicalPartition, LearnOptions, Symmetry};
use crate::io::{self, fmt_f64};
use crate::linalg::DenseMatrix;
use crate::pde::{read_dataset, write_dataset, DatasetManifest, OperatorPreset, OperatorSpec};
use crate::pipeline::{extract_features, train_green, FeatureThresholds, GreenCheckpoint, GreenTrainConfig};
use crate::rational::{train, ActivationSharing, Adam, NetworkCheckpoint, RationalNetwork, TrainOptions};
use crate::rsvd::{bound_rhs, randomized_svd, verify_bound, BoundParams, RsvdConfig};

#[derive(Parser, Debug)]
#[command(name = "greenkit", version, about = "Learn Green's functions of 1D elliptic operators from data")]
struct Cli {
    /// Log verbosity on standard error (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Randomized SVD of a matrix CSV.
    Rsvd(RsvdArgs),
    /// Monte Carlo check of the randomized SVD error bound.
    BoundCheck(BoundArgs),
    /// Karhunen-Loeve samples from a covariance kernel spec.
    GpSample(GpSampleArgs),
    /// Forcing/solution pairs for an operator preset.
    GenData(GenDataArgs),
    /// Hierarchical-matrix recovery of a Green's function.
    LearnHmatrix(LearnHmatrixArgs),
    /// Train the kernel and homogeneous networks on a dataset.
    TrainGreen(TrainGreenArgs),
    /// Symmetry, modes and singularity candidates of a trained model.
    Features(FeaturesArgs),
    /// Fit a rational network to tabulated data.
    TrainRational(TrainRationalArgs),
}

#[derive(Args, Debug)]
struct OutArg {
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RsvdArgs {
    /// Matrix CSV.
    #[arg(long)]
    matrix: PathBuf,
    /// Optional covariance CSV for correlated test vectors.
    #[arg(long)]
    covariance: Option<PathBuf>,
    /// Target rank.
    #[arg(long)]
    k: usize,
    /// Oversampling.
    #[arg(long)]
    p: usize,
    /// Bound deviation parameter, at least 1.
    #[arg(long, default_value_t = 2.0)]
    t: f64,
    /// Bound deviation parameter, at least 1.
    #[arg(long, default_value_t = 2.0)]
    u: f64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct BoundArgs {
    /// Matrix CSV.
    #[arg(long)]
    matrix: PathBuf,
    /// Optional covariance CSV; the bound is only asserted without one.
    #[arg(long)]
    covariance: Option<PathBuf>,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    u: f64,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct GpSampleArgs {
    /// Kernel spec JSON.
    #[arg(long)]
    kernel: PathBuf,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Dataset config JSON: operator, kernel, grid_n, sensors, N, noise.
    #[arg(long)]
    config: PathBuf,
    /// Must agree with the config's seed when both are given.
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct LearnHmatrixArgs {
    /// Config JSON: operator, kernel, grid_n, levels, eta, k, p, options.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct TrainGreenArgs {
    /// Directory written by `gen-data`.
    #[arg(long)]
    data: PathBuf,
    /// Training config JSON; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    /// Checkpoint written by `train-green`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Uniform evaluation grid size, endpoints included.
    #[arg(long, default_value_t = 256)]
    grid_n: usize,
    /// Thresholds JSON: modes, percentile, factor.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct TrainRationalArgs {
    /// CSV with a header row; the first `widths[0]` columns are inputs,
    /// the rest targets.
    #[arg(long)]
    data: PathBuf,
    /// Config JSON: widths, degrees, sharing, epochs, batch_size, lr.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HmatrixConfig {
    operator: OperatorSpec,
    kernel: KernelSpec,
    #[serde(default = "default_grid_n")]
    grid_n: usize,
    #[serde(default = "default_levels")]
    levels: usize,
    #[serde(default = "default_eta")]
    eta: f64,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_p")]
    p: usize,
    /// Symmetry defaults to general for advection, self-adjoint otherwise.
    #[serde(default)]
    options: Option<LearnOptions>,
}

fn default_grid_n() -> usize {
    256
}
fn default_levels() -> usize {
    4
}
fn default_eta() -> f64 {
    1.0
}
fn default_k() -> usize {
    8
}
fn default_p() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RationalConfig {
    widths: Vec<usize>,
    #[serde(default = "default_degrees")]
    degrees: (usize, usize),
    #[serde(default)]
    sharing: ActivationSharing,
    epochs: usize,
    batch_size: usize,
    lr: f64,
}

fn default_degrees() -> (usize, usize) {
    (3, 2)
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    seed: Option<u64>,
    inputs: Value,
    /// Input config exactly as read.
    config_text: Option<String>,
    /// Config after defaults were applied.
    config: Value,
    outputs: Vec<String>,
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code: 0 on success, 1 for usage or validation
/// errors, 2 for numerical failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Rsvd(a) => cmd_rsvd(a),
        Command::BoundCheck(a) => cmd_bound(a),
        Command::GpSample(a) => cmd_gp_sample(a),
        Command::GenData(a) => cmd_gen_data(a),
        Command::LearnHmatrix(a) => cmd_learn_hmatrix(a),
        Command::TrainGreen(a) => cmd_train_green(a),
        Command::Features(a) => cmd_features(a),
        Command::TrainRational(a) => cmd_train_rational(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn parse_config<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    DenseMatrix::new(io::matrix_from_csv(&read_text(path)?)?)
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn path_str(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

fn write_manifest(out: &Path, m: &RunManifest<'_>) -> Result<()> {
    io::write_json(&out.join("manifest.json"), m)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn cmd_rsvd(a: RsvdArgs) -> Result<()> {
    let m = read_matrix(&a.matrix)?;
    let cov = a.covariance.as_deref().map(read_matrix).transpose()?;
    let cfg = RsvdConfig::new(a.k, a.p, a.seed);
    cfg.validate(m.rows(), m.cols())?;
    let params = BoundParams::new(a.t, a.u)?;
    prepare_out(&a.out.out)?;
    let r = randomized_svd(&m, &cfg, cov.as_ref())?;
    let rhs = bound_rhs(&crate::linalg::svd(&m).singular_values, a.k, a.p, &params)?;
    let failed = r.achieved_error > rhs;
    let report = json!({
        "k": a.k,
        "p": a.p,
        "t": a.t,
        "u": a.u,
        "achieved_error": r.achieved_error,
        "bound_rhs": rhs,
        "trials": 1,
        "failure_rate": if failed { 1.0 } else { 0.0 },
        "deficient": r.deficient,
    });
    let out = &a.out.out;
    io::write_json(&out.join("rsvd.json"), &report)?;
    let s = &r.svd.singular_values;
    let idx: Vec<f64> = (1..=s.len()).map(|j| j as f64).collect();
    fs::write(out.join("singular_values.csv"), io::columns_to_csv(&["index", "sigma"], &[&idx, s]))?;
    io::write_matrix_csv(&out.join("u.csv"), &r.svd.u)?;
    io::write_matrix_csv(&out.join("v.csv"), &r.svd.v)?;
    write_manifest(
        out,
        &RunManifest {
            tool: "greenkit",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: "rsvd",
            seed: Some(a.seed),
            inputs: json!({ "matrix": path_str(&a.matrix), "covariance": a.covariance.as_deref().map(path_str) }),
            config_text: None,
            config: json!({ "k": a.k, "p": a.p, "t": a.t, "u": a.u }),
            outputs: vec!["rsvd.json".into(), "singular_values.csv".into(), "u.csv".into(), "v.csv".into()],
        },
    )
}

fn cmd_bound(a: BoundArgs) -> Result<()> {
    let m = read_matrix(&a.matrix)?;
    let cov = a.covariance.as_deref().map(read_matrix).transpose()?;
    let params = BoundParams::new(a.t, a.u)?;
    let cfg = RsvdConfig::new(a.k, a.p, a.seed);
    cfg.validate(m.rows(), m.cols())?;
    prepare_out(&a.out.out)?;
    let report = verify_bound(&m, &cfg, &params, a.trials, cov.as_ref())?;
    io::write_json(&a.out.out.join("bound.json"), &report)?;
    write_manifest(
        &a.out.out,
        &RunManifest {
            tool: "greenkit",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: "bound-check",
            seed: Some(a.seed),
            inputs: json!({ "matrix": path_str(&a.matrix), "covariance": a.covariance.as_deref().map(path_str) }),
            config_text: None,
            config: json!({ "k": a.k, "p": a.p, "t": a.t, "u": a.u, "trials": a.trials }),
            outputs: vec!["bound.json".into()],
        },
    )
}

fn cmd_gp_sample(a: GpSampleArgs) -> Result<()> {
    let text = read_text(&a.kernel)?;
    let spec: KernelSpec = parse_config(&text, &a.kernel)?;
    if a.n == 0 {
        return Err(Error::InvalidArgument("--n must be at least 1".into()));
    }
    let kernel = spec.build()?;
    prepare_out(&a.out.out)?;
    let samples = kl_sample_batch(&kernel, a.n, a.seed);
    let grid = kernel.grid();
    let mut outputs = Vec::with_capacity(a.n);
    for j in 0..a.n {
        let name = format!("sample_{j:03}.csv");
        let values = samples.column(j);
        fs::write(a.out.out.join(&name), io::columns_to_csv(&["node", "weight", "value"], &[grid.nodes(), grid.weights(), &values]))?;
        outputs.push(name);
    }
    write_manifest(
        &a.out.out,
        &RunManifest {
            tool: "greenkit",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: "gp-sample",
            seed: Some(a.seed),
            inputs: json!({ "kernel": path_str(&a.kernel) }),
            config_text: Some(text),
            config: json!({ "kernel": to_value(&spec)?, "n": a.n }),
            outputs,
        },
    )
}

fn cmd_gen_data(a: GenDataArgs) -> Result<()> {
    let text = read_text(&a.config)?;
    let mut value: Value = parse_config(&text, &a.config)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Parse(format!("{}: expected a JSON object", a.config.display())))?;
    match obj.get("seed").and_then(Value::as_u64) {
        Some(s) if s != a.seed => {
            return Err(Error::InvalidArgument(format!("config seed {s} disagrees with --seed {}", a.seed)));
        }
        _ => {
            obj.insert("seed".into(), json!(a.seed));
        }
    }
    let manifest: DatasetManifest = serde_json::from_value(value).map_err(|e| Error::Parse(format!("{}: {e}", a.config.display())))?;
    let data = manifest.generate()?;
    prepare_out(&a.out.out)?;
    let written = write_dataset(&a.out.out, &manifest, &data)?;
    let mut outputs = vec!["dataset.json".to_string()];
    outputs.extend(written.pairs.iter().cloned());
    write_manifest(
        &a.out.out,
        &RunManifest {
            tool: "greenkit",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: "gen-data",
            seed: Some(a.seed),
            inputs: json!({ "config": path_str(&a.config) }),
            config_text: Some(text),
            config: to_value(&DatasetManifest { pairs: vec![], ..written })?,
            outputs,
        },
    )
}

fn cmd_learn_hmatrix(a: LearnHmatrixArgs) -> Result<()> {
    let text = read_text(&a.config)?;
    let cfg: HmatrixConfig = parse_config(&text, &a.config)?;
    let mut options = cfg.options.clone().unwrap_or_default();
    if cfg.options.is_none() && cfg.operator.preset == OperatorPreset::AdvectionDiffusion {
        options.symmetry = Symmetry::General;
    }
    let op = cfg.operator.build()?;
    let grid = Arc::new(Grid1D::trapezoid(cfg.grid_n, cfg.operator.domain[0], cfg.operator.domain[1])?);
    let solver = op.discretize(grid.clone())?;
    let kernel = cfg.kernel.build_on(grid.clone())?;
    let partition = HierarchicalPartition::new(grid.domain(), cfg.levels, cfg.eta)?;
    let (h, report) = hierarchical_learn(&solver, &partition, cfg.k, cfg.p, &kernel, a.seed, &options)?;
    let reference = solver.greens_function()?;
    let relative_error = h.to_dense().relative_error(&reference)?;
    prepare_out(&a.out.out)?;
    let out = &a.out.out;
    let mut outputs = vec!["hmatrix.json".to_string()];
    let mut blocks = Vec::with_capacity(h.blocks.len());
    for (i, (b, data)) in partition.blocks.iter().zip(&h.blocks).enumerate() {
        let files: Vec<String> = match data {
            BlockData::LowRank { u, v } => {
                let (fu, fv) = (format!("block_{i:04}_u.csv"), format!("block_{i:04}_v.csv"));
                io::write_matrix_csv(&out.join(&fu), u)?;
                io::write_matrix_csv(&out.join(&fv), v)?;
                vec![fu, fv]
            }
            BlockData::Dense(m) => {
                let f = format!("block_{i:04}_dense.csv");
                io::write_matrix_csv(&out.join(&f), m)?;
                vec![f]
            }
        };
        outputs.extend(files.iter().cloned());
        blocks.push(json!({
            "target": b.target,
            "source": b.source,
            "admissible": b.admissible,
            "rank": data.rank(),
            "files": files,
        }));
    }
    let doc = json!({
        "domain": partition.domain,
        "levels": partition.levels,
        "eta": partition.eta,
        "grid_n": cfg.grid_n,
        "blocks": blocks,
        "report": to_value(&report)?,
        "relative_error": relative_error,
    });
    io::write_json(&out.join("hmatrix.json"), &doc)?;
    let resolved = HmatrixConfig { options: Some(options), ..cfg };
    write_manifest(
        out,
        &RunManifest {
            tool: "greenkit",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: "learn-hmatrix",
            seed: Some(a.seed),
            inputs: json!({ "config": path_str(&a.config) }),
            config_text: Some(text),
            config: to_value(&resolved)?,
            outputs,
        },
    )
}

fn loss_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        s.push_str(&format!("{i},{}\n", fmt_f64(*l)));
    }
    s
}

fn cmd_train_green(a: TrainGreenArgs) -> Result<()> {
    let (text, config) = match &a.config {
        Some(p) => {
            let t = read_text(p)?;
            let c: GreenTrainConfig = parse_config(&t, p)?;
            (Some(t), c)
        }
        None => (None, GreenTrainConfig::default()),
    };
    let (_, data) = read_dataset(&a.data)?;
    let out = a.out.out.clone();
    prepare_out(&out)?;
    let mut outputs = Vec::new();
    let mut last: Option<GreenCheckpoint> = None;
    let mut on_checkpoint = |c: &GreenCheckpoint| -> Result<()> {
        if c.epoch < config.epochs {
            let name = format!("checkpoint_{:06}.json", c.epoch);
            io::write_json(&out.join(&name), c)?;
            outputs.push(name);
        } else {
            last = Some(c.clone());
        }
        Ok(())
    };
    let (_, report) = train_green(&data, &config, a.seed, Some(&mut on_checkpoint))?;
    let ckpt = last.ok_or_else(|| Error::Numerical("training produced no final checkpoint".into()))?;
    io::write_json(&out.join("checkpoint.json"), &ckpt)?;
    fs::write(out.join("loss_history.csv"), loss_csv(&report.loss_history))?;
    outputs.push("checkpoint.json".into());
    outputs.push("loss_history.csv".into());
    write_manifest(
        &out,
        &RunManifest {
            tool: "greenkit",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: "train-green",
            seed: Some(a.seed),
            inputs: json!({ "data": path_str(&a.data), "config": a.config.as_deref().map(path_str) }),
            config_text: text,
            config: to_value(&config)?,
            outputs,
        },
    )
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let ckpt: GreenCheckpoint = parse_config(&read_text(&a.checkpoint)?, &a.checkpoint)?;
    let (text, thresholds) = match &a.thresholds {
        Some(p) => {
            let t = read_text(p)?;
            let c: FeatureThresholds = parse_config(&t, p)?;
            (Some(t), c)
        }
        None => (None, FeatureThresholds::default()),
    };
    let (lo, hi) = ckpt.model.domain;
    let grid = Arc::new(Grid1D::trapezoid(a.grid_n, lo, hi)?);
    let report = extract_features(&ckpt.model, grid, &thresholds)?;
    prepare_out(&a.out.out)?;
    io::write_json(&a.out.out.join("features.json"), &report)?;
    write_manifest(
        &a.out.out,
        &RunManifest {
            tool: "greenkit",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: "features",
            seed: None,
            inputs: json!({ "checkpoint": path_str(&a.checkpoint), "thresholds": a.thresholds.as_deref().map(path_str) }),
            config_text: text,
            config: json!({ "thresholds": to_value(&thresholds)?, "grid_n": a.grid_n }),
            outputs: vec!["features.json".into()],
        },
    )
}

/// Header row, then numeric rows.
fn read_table(path: &Path) -> Result<(usize, Vec<Vec<f64>>)> {
    let text = read_text(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse(format!("{} is empty", path.display())))?;
    let cols = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line.split(',').map(io::parse_f64).collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::Parse(format!("{} row {} has {} fields, expected {cols}", path.display(), i + 1, row.len())));
        }
        rows.push(row);
    }
    Ok((cols, rows))
}

fn cmd_train_rational(a: TrainRationalArgs) -> Result<()> {
    let text = read_text(&a.config)?;
    let cfg: RationalConfig = parse_config(&text, &a.config)?;
    let (cols, rows) = read_table(&a.data)?;
    let (din, dout) = (cfg.widths.first().copied().unwrap_or(0), cfg.widths.last().copied().unwrap_or(0));
    if din + dout != cols {
        return Err(Error::InvalidArgument(format!("network maps {din} -> {dout} but the table has {cols} columns")));
    }
    let mut inputs = Vec::with_capacity(rows.len() * din);
    let mut targets = Vec::with_capacity(rows.len() * dout);
    for r in &rows {
        inputs.extend_from_slice(&r[..din]);
        targets.extend_from_slice(&r[din..]);
    }
    let mut net = RationalNetwork::new(&cfg.widths, cfg.degrees, cfg.sharing, a.seed)?;
    let mut opt = Adam::new(net.param_count(), cfg.lr)?;
    let opts = TrainOptions { epochs: cfg.epochs, batch_size: cfg.batch_size, lr: cfg.lr, seed: a.seed };
    let report = train(&mut net, &mut opt, &inputs, &targets, &opts)?;
    prepare_out(&a.out.out)?;
    let ckpt = NetworkCheckpoint { network: net, optimizer: opt, seed: a.seed, epoch: cfg.epochs };
    io::write_json(&a.out.out.join("checkpoint.json"), &ckpt)?;
    fs::write(a.out.out.join("loss_history.csv"), loss_csv(&report.loss_history))?;
    write_manifest(
        &a.out.out,
        &RunManifest {
            tool: "greenkit",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: "train-rational",
            seed: Some(a.seed),
            inputs: json!({ "data": path_str(&a.data), "config": path_str(&a.config) }),
            config_text: Some(text),
            config: to_value(&cfg)?,
            outputs: vec!["checkpoint.json".into(), "loss_history.csv".into()],
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_exit_one() {
        assert_eq!(run(["greenkit", "no-such-command"]), 1);
        assert_eq!(run(["greenkit", "rsvd", "--k", "3"]), 1);
        assert_eq!(run(["greenkit", "gp-sample", "--kernel", "k.json", "--n", "2", "--out", "x"]), 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["greenkit", "--help"]), 0);
    }

    #[test]
    fn loss_csv_layout() {
        assert_eq!(loss_csv(&[0.5, 0.25]), "epoch,loss\n0,5.0000000000000000e-1\n1,2.5000000000000000e-1\n");
    }
}
