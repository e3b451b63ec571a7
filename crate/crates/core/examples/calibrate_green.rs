//! Trains the kernel network on one preset and prints recovery metrics.
//!
//! `cargo run --release -p greenkit --example calibrate_green -- <preset> <N> <noise> <epochs> <lr> <lr_final> <M> <nu> <seed>`

use std::sync::Arc;
use std::time::Instant;

use greenkit::gp::{DecayLaw, KernelSpec};
use greenkit::pde::{DatasetManifest, OperatorPreset, OperatorSpec, SensorSpec};
use greenkit::pipeline::{evaluate_kernel, extract_features, train_green, FeatureThresholds, GreenTrainConfig};

fn main() {
    let a: Vec<String> = std::env::args().collect();
    let preset: OperatorPreset = serde_json::from_str(&format!("\"{}\"", a[1])).unwrap();
    let n: usize = a[2].parse().unwrap();
    let noise: f64 = a[3].parse().unwrap();
    let epochs: usize = a[4].parse().unwrap();
    let lr: f64 = a[5].parse().unwrap();
    let lr_final: f64 = a[6].parse().unwrap();
    let m: usize = a[7].parse().unwrap();
    let nu: f64 = a[8].parse().unwrap();
    let seed: u64 = a[9].parse().unwrap();
    let manifest = DatasetManifest {
        operator: OperatorSpec::new(preset),
        kernel: KernelSpec::jacobi(m, 1.0, 1.0, DecayLaw::Algebraic, nu),
        grid_n: 256,
        sensors: SensorSpec::default(),
        n,
        noise,
        seed,
        pairs: vec![],
    };
    let data = manifest.generate().unwrap();
    let cfg = GreenTrainConfig { epochs, lr, lr_final, ..Default::default() };
    let t = Instant::now();
    let (model, report) = train_green(&data, &cfg, seed, None).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let grid = data.grid.clone();
    let reference = manifest.operator.build().unwrap().greens_reference(grid.clone()).unwrap();
    let learned = evaluate_kernel(&model, grid.clone()).unwrap();
    let rel = learned.relative_error(&reference).unwrap();
    let f = extract_features(&model, Arc::clone(&grid), &FeatureThresholds::default()).unwrap();
    let sine: Vec<f64> = grid.nodes().iter().map(|x| (std::f64::consts::PI * x).sin()).collect();
    let mode = &f.dominant_modes[0].left;
    let cos = grid.inner(mode, &sine) / (grid.l2_norm(mode) * grid.l2_norm(&sine));
    let h = &report.loss_history;
    println!(
        "loss0={:.3e} loss_mid={:.3e} final={:.3e} rel={:.3e} sym={:.3e} refsym={:.3e} cos={:.5} ratio={:.3} hom={:.3e} poles={} time={:.1}s",
        h[0], h[h.len() / 2], h[h.len() - 1], rel, f.symmetry_score, reference.symmetry_score().unwrap(), cos.abs(),
        f.mode_energies[0] / f.mode_energies[1], f.hom_norm, report.pole_hits, secs
    );
}
