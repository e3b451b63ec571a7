//! Hierarchical low-rank recovery of a Green's function from forward
//! applications only.
//!
//! Blocks are recovered level by level ("peeling"): forcings supported on a
//! group of source intervals are applied, contributions of blocks recovered
//! at coarser levels are subtracted, and each target interval then sees at
//! most one unknown source interval per group.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{kl_sample, Grid1D, SpectralKernel};
use crate::linalg::{self, Matrix};
use crate::rng::{self, derive_seed};
use crate::rsvd::orthonormal_range;

use super::{ForwardOperator, IntegralOperator};

/// Dyadic interval `index` at `level` of the cluster tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cluster {
    pub level: usize,
    pub index: usize,
}

impl Cluster {
    /// Half-open interval `[lo, hi)`; the last interval of a level is closed.
    pub fn interval(&self, (a, b): (f64, f64)) -> (f64, f64) {
        let n = (1usize << self.level) as f64;
        let w = (b - a) / n;
        let lo = a + self.index as f64 * w;
        let hi = if self.index + 1 == 1 << self.level { b } else { a + (self.index + 1) as f64 * w };
        (lo, hi)
    }

    pub fn is_last(&self) -> bool {
        self.index + 1 == 1 << self.level
    }

    pub fn contains(&self, domain: (f64, f64), x: f64) -> bool {
        let (lo, hi) = self.interval(domain);
        x >= lo && (x < hi || (self.is_last() && x <= hi))
    }

    fn children(&self) -> [Cluster; 2] {
        [
            Cluster { level: self.level + 1, index: 2 * self.index },
            Cluster { level: self.level + 1, index: 2 * self.index + 1 },
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub target: Cluster,
    pub source: Cluster,
    pub admissible: bool,
}

impl Block {
    pub fn level(&self) -> usize {
        self.target.level
    }
}

/// Block partition of the domain square from a dyadic cluster tree with
/// admissibility `dist(X, Y) >= eta * max(diam X, diam Y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalPartition {
    pub domain: (f64, f64),
    pub levels: usize,
    pub eta: f64,
    pub blocks: Vec<Block>,
}

impl HierarchicalPartition {
    pub fn new(domain: (f64, f64), levels: usize, eta: f64) -> Result<Self> {
        if !(domain.0 < domain.1) {
            return Err(Error::InvalidArgument(format!("invalid domain {domain:?}")));
        }
        if !(eta > 0.0) {
            return Err(Error::InvalidArgument(format!("admissibility parameter {eta} must be positive")));
        }
        if levels > 20 {
            return Err(Error::InvalidArgument(format!("{levels} levels is too deep")));
        }
        let mut blocks = Vec::new();
        let root = Cluster { level: 0, index: 0 };
        Self::subdivide(domain, levels, eta, root, root, &mut blocks);
        Ok(HierarchicalPartition { domain, levels, eta, blocks })
    }

    fn admissible(domain: (f64, f64), eta: f64, x: Cluster, y: Cluster) -> bool {
        let (xl, xh) = x.interval(domain);
        let (yl, yh) = y.interval(domain);
        let dist = (yl - xh).max(xl - yh).max(0.0);
        let diam = (xh - xl).max(yh - yl);
        dist >= eta * diam
    }

    fn subdivide(domain: (f64, f64), levels: usize, eta: f64, x: Cluster, y: Cluster, out: &mut Vec<Block>) {
        if Self::admissible(domain, eta, x, y) {
            out.push(Block { target: x, source: y, admissible: true });
        } else if x.level == levels {
            out.push(Block { target: x, source: y, admissible: false });
        } else {
            for cx in x.children() {
                for cy in y.children() {
                    Self::subdivide(domain, levels, eta, cx, cy, out);
                }
            }
        }
    }

    /// Index of the unique block containing `(x, y)`.
    pub fn locate(&self, x: f64, y: f64) -> Result<usize> {
        let (a, b) = self.domain;
        for (p, v) in [(x, a), (y, b)] {
            let _ = v;
            if !(p >= a && p <= b) {
                return Err(Error::OutOfDomain { point: p, lo: a, hi: b });
            }
        }
        self.blocks
            .iter()
            .position(|blk| blk.target.contains(self.domain, x) && blk.source.contains(self.domain, y))
            .ok_or_else(|| Error::Numerical(format!("no block contains ({x}, {y})")))
    }

    pub fn admissible_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.admissible).count()
    }
}

/// Grid node indices lying in a cluster's interval.
pub fn cluster_nodes(grid: &Grid1D, domain: (f64, f64), c: Cluster) -> Vec<usize> {
    grid.nodes()
        .iter()
        .enumerate()
        .filter(|(_, &x)| c.contains(domain, x))
        .map(|(i, _)| i)
        .collect()
}

/// Stored representation of one block.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockData {
    /// `G_XY ~ U V^T` on the block's nodes.
    LowRank { u: Matrix, v: Matrix },
    Dense(Matrix),
}

impl BlockData {
    pub fn rank(&self) -> Option<usize> {
        match self {
            BlockData::LowRank { u, .. } => Some(u.ncols()),
            BlockData::Dense(_) => None,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            BlockData::LowRank { u, v } => u * v.transpose(),
            BlockData::Dense(m) => m.clone(),
        }
    }
}

/// Hierarchical-matrix representation of a Green's function on a grid.
#[derive(Clone, Debug)]
pub struct HMatrixGreen {
    pub partition: HierarchicalPartition,
    pub grid: Arc<Grid1D>,
    pub blocks: Vec<BlockData>,
    /// Node indices per block: (target rows, source columns).
    pub index_sets: Vec<(Vec<usize>, Vec<usize>)>,
}

impl HMatrixGreen {
    pub fn new(partition: HierarchicalPartition, grid: Arc<Grid1D>, blocks: Vec<BlockData>) -> Result<Self> {
        if partition.blocks.len() != blocks.len() {
            return Err(Error::Dimension(format!(
                "{} blocks in the partition, {} payloads",
                partition.blocks.len(),
                blocks.len()
            )));
        }
        if grid.domain() != partition.domain {
            return Err(Error::InvalidArgument("grid and partition domains differ".into()));
        }
        let index_sets: Vec<(Vec<usize>, Vec<usize>)> = partition
            .blocks
            .iter()
            .map(|b| (cluster_nodes(&grid, partition.domain, b.target), cluster_nodes(&grid, partition.domain, b.source)))
            .collect();
        for ((rows, cols), data) in index_sets.iter().zip(&blocks) {
            let shape_ok = match data {
                BlockData::LowRank { u, v } => u.nrows() == rows.len() && v.nrows() == cols.len() && u.ncols() == v.ncols(),
                BlockData::Dense(m) => m.shape() == (rows.len(), cols.len()),
            };
            if !shape_ok {
                return Err(Error::Dimension("block payload does not match its node sets".into()));
            }
        }
        Ok(HMatrixGreen { partition, grid, blocks, index_sets })
    }

    /// Kernel value at `(x, y)`, interpolating linearly inside the block.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let bi = self.partition.locate(x, y)?;
        let (rows, cols) = &self.index_sets[bi];
        if rows.is_empty() || cols.is_empty() {
            return Ok(0.0);
        }
        let nodes = self.grid.nodes();
        let (rw, cw) = (linear_weights(nodes, rows, x), linear_weights(nodes, cols, y));
        let value = match &self.blocks[bi] {
            BlockData::LowRank { u, v } => (0..u.ncols())
                .map(|r| {
                    let ux: f64 = rw.iter().map(|&(i, w)| w * u[(i, r)]).sum();
                    let vy: f64 = cw.iter().map(|&(j, w)| w * v[(j, r)]).sum();
                    ux * vy
                })
                .sum(),
            BlockData::Dense(m) => rw
                .iter()
                .map(|&(i, wi)| cw.iter().map(|&(j, wj)| wi * wj * m[(i, j)]).sum::<f64>())
                .sum(),
        };
        Ok(value)
    }

    /// Assembles the kernel on the grid.
    pub fn to_dense(&self) -> IntegralOperator {
        let n = self.grid.len();
        let mut g = Matrix::zeros(n, n);
        for ((rows, cols), data) in self.index_sets.iter().zip(&self.blocks) {
            let d = data.to_dense();
            for (bi, &i) in rows.iter().enumerate() {
                for (bj, &j) in cols.iter().enumerate() {
                    g[(i, j)] = d[(bi, bj)];
                }
            }
        }
        IntegralOperator::new(self.grid.clone(), self.grid.clone(), g).expect("finite block payloads")
    }

    pub fn ranks(&self) -> Vec<Option<usize>> {
        self.blocks.iter().map(|b| b.rank()).collect()
    }
}

/// Interpolation stencil `(local index, weight)` of `x` over the sorted
/// node subset `idx`, extended linearly past its ends.
fn linear_weights(nodes: &[f64], idx: &[usize], x: f64) -> Vec<(usize, f64)> {
    if idx.len() == 1 {
        return vec![(0, 1.0)];
    }
    let pos = idx.partition_point(|&i| nodes[i] < x);
    if pos < idx.len() && nodes[idx[pos]] == x {
        return vec![(pos, 1.0)];
    }
    let seg = pos.saturating_sub(1).min(idx.len() - 2);
    let (x0, x1) = (nodes[idx[seg]], nodes[idx[seg + 1]]);
    let t = (x - x0) / (x1 - x0);
    vec![(seg, 1.0 - t), (seg + 1, t)]
}

/// Whether the operator's adjoint can be replaced by the operator itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    SelfAdjoint,
    General,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnOptions {
    pub symmetry: Symmetry,
    /// Forcings per dense leaf; defaults to 1.5 times the widest leaf.
    pub m_dense: Option<usize>,
    pub ridge: f64,
    /// Condition number above which dense least squares is regularized.
    pub max_condition: f64,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            symmetry: Symmetry::SelfAdjoint,
            m_dense: None,
            ridge: 1e-10,
            max_condition: 1e8,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LearnReport {
    /// Total forward applications, the empirical training-pair count.
    pub forward_applications: usize,
    pub applications_per_level: Vec<usize>,
    pub groups_per_level: Vec<usize>,
    pub regularized_blocks: usize,
}

/// Recovers a Green's function in hierarchical form from forward
/// applications of `forward` (on a single grid).
///
/// Admissible blocks use `k + p` GP forcings drawn from `kernel` and
/// zero-extended outside the source intervals; leaves use white-noise
/// forcings and least squares.
pub fn hierarchical_learn(
    forward: &dyn ForwardOperator,
    partition: &HierarchicalPartition,
    k: usize,
    p: usize,
    kernel: &SpectralKernel,
    seed: u64,
    options: &LearnOptions,
) -> Result<(HMatrixGreen, LearnReport)> {
    if k == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!("k and p must be at least 1 (k = {k}, p = {p})")));
    }
    let grid = forward.source_grid().clone();
    if forward.target_grid() != &grid {
        return Err(Error::InvalidArgument("hierarchical learning needs matching source and target grids".into()));
    }
    if kernel.grid() != &grid {
        return Err(Error::Dimension("covariance kernel and operator use different grids".into()));
    }
    if grid.domain() != partition.domain {
        return Err(Error::InvalidArgument("grid and partition domains differ".into()));
    }
    let n = grid.len();
    let weights = grid.weights().to_vec();
    let domain = partition.domain;
    let sketch = k + p;

    let nodes_of = |c: Cluster| cluster_nodes(&grid, domain, c);
    let max_leaf = partition
        .blocks
        .iter()
        .filter(|b| !b.admissible)
        .map(|b| nodes_of(b.source).len())
        .max()
        .unwrap_or(0);
    let m_dense = options.m_dense.unwrap_or((3 * max_leaf).div_ceil(2)).max(max_leaf);

    let mut known = Matrix::zeros(n, n);
    let mut payloads: Vec<Option<BlockData>> = vec![None; partition.blocks.len()];
    let mut report = LearnReport::default();

    for level in 0..=partition.levels {
        let level_blocks: Vec<usize> = (0..partition.blocks.len())
            .filter(|&i| partition.blocks[i].level() == level)
            .collect();
        if level_blocks.is_empty() {
            report.applications_per_level.push(0);
            report.groups_per_level.push(0);
            continue;
        }
        let has_leaves = level_blocks.iter().any(|&i| !partition.blocks[i].admissible);
        let per_group = if has_leaves { sketch.max(m_dense) } else { sketch };

        // unknown source clusters seen by each target cluster
        // includes near-field pairs refined at finer levels
        let mut unknown: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for b in partition.blocks.iter().filter(|b| b.level() >= level) {
            let shift = b.level() - level;
            let ys = unknown.entry(b.target.index >> shift).or_default();
            let y = b.source.index >> shift;
            if !ys.contains(&y) {
                ys.push(y);
            }
        }
        let mut sources: Vec<usize> = level_blocks.iter().map(|&i| partition.blocks[i].source.index).collect();
        sources.sort_unstable();
        sources.dedup();
        let groups = color_sources(&sources, &unknown);

        // sketches per block: (responses restricted to X, weighted forcings on Y)
        let mut sketches: BTreeMap<usize, (Matrix, Matrix)> = BTreeMap::new();
        let mut applications = 0;
        for (gi, group) in groups.iter().enumerate() {
            let support: Vec<bool> = {
                let mut s = vec![false; n];
                for &yi in group {
                    for i in nodes_of(Cluster { level, index: yi }) {
                        s[i] = true;
                    }
                }
                s
            };
            let mut forcings = Matrix::zeros(n, per_group);
            for t in 0..per_group {
                let fseed = derive_seed(seed, ((level as u64) << 48) | ((gi as u64) << 24) | t as u64);
                let values = if has_leaves {
                    let mut g = rng::seeded(fseed);
                    (0..n).map(|_| rng::standard_normal(&mut g)).collect::<Vec<f64>>()
                } else {
                    kl_sample(kernel, fseed).values
                };
                for i in 0..n {
                    if support[i] {
                        forcings[(i, t)] = values[i];
                    }
                }
            }
            let weighted = Matrix::from_fn(n, per_group, |i, t| weights[i] * forcings[(i, t)]);
            let mut residual = Matrix::zeros(n, per_group);
            for t in 0..per_group {
                let f: Vec<f64> = forcings.column(t).iter().copied().collect();
                let u = forward.apply(&f)?;
                if u.len() != n {
                    return Err(Error::Dimension("operator returned the wrong number of values".into()));
                }
                applications += 1;
                residual.column_mut(t).copy_from_slice(&u);
            }
            residual -= &known * &weighted;

            for &bi in &level_blocks {
                let b = partition.blocks[bi];
                if !group.contains(&b.source.index) {
                    continue;
                }
                let rows = nodes_of(b.target);
                let cols = nodes_of(b.source);
                let s = Matrix::from_fn(rows.len(), per_group, |i, t| residual[(rows[i], t)]);
                let om = Matrix::from_fn(cols.len(), per_group, |j, t| weighted[(cols[j], t)]);
                sketches.insert(bi, (s, om));
            }
        }

        for &bi in &level_blocks {
            let b = partition.blocks[bi];
            let (s, om) = &sketches[&bi];
            let data = if b.admissible {
                let mirror = if options.symmetry == Symmetry::SelfAdjoint {
                    let mi = level_blocks
                        .iter()
                        .copied()
                        .find(|&j| partition.blocks[j].target == b.source && partition.blocks[j].source == b.target)
                        .ok_or_else(|| Error::Numerical("partition is not symmetric".into()))?;
                    Some(&sketches[&mi])
                } else {
                    None
                };
                low_rank_block(s, om, mirror, sketch)
            } else {
                let (m, regularized) = dense_block(s, om, options)?;
                if regularized {
                    report.regularized_blocks += 1;
                }
                BlockData::Dense(m)
            };
            let rows = nodes_of(b.target);
            let cols = nodes_of(b.source);
            let d = data.to_dense();
            for (i, &r) in rows.iter().enumerate() {
                for (j, &c) in cols.iter().enumerate() {
                    known[(r, c)] = d[(i, j)];
                }
            }
            payloads[bi] = Some(data);
        }
        report.forward_applications += applications;
        report.applications_per_level.push(applications);
        report.groups_per_level.push(groups.len());
    }

    let blocks = payloads
        .into_iter()
        .map(|p| p.ok_or_else(|| Error::Numerical("block left unrecovered".into())))
        .collect::<Result<Vec<_>>>()?;
    Ok((HMatrixGreen::new(partition.clone(), grid, blocks)?, report))
}

/// Greedy coloring so that no target cluster sees two unknown sources of
/// the same group.
fn color_sources(sources: &[usize], unknown: &BTreeMap<usize, Vec<usize>>) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &y in sources {
        let conflicts = |g: &Vec<usize>| {
            unknown
                .values()
                .any(|ys| ys.contains(&y) && g.iter().any(|other| ys.contains(other)))
        };
        match groups.iter_mut().find(|g| !conflicts(g)) {
            Some(g) => g.push(y),
            None => groups.push(vec![y]),
        }
    }
    groups
}

/// Pseudo-inverse solve `X A = B` for `X` (least squares over rows),
/// discarding singular values below `rel * s_max`.
fn right_solve(b: &Matrix, a: &Matrix, rel: f64) -> Matrix {
    let f = linalg::svd_matrix(a);
    let smax = f.singular_values.first().copied().unwrap_or(0.0);
    let keep = f.singular_values.iter().take_while(|&&s| s > rel * smax && s > 0.0).count();
    let mut out = Matrix::zeros(b.nrows(), a.nrows());
    if keep == 0 {
        return out;
    }
    // X = B V S^{-1} U^T
    let mut bv = b * f.v.columns(0, keep);
    for j in 0..keep {
        bv.column_mut(j).scale_mut(1.0 / f.singular_values[j]);
    }
    out += bv * f.u.columns(0, keep).transpose();
    out
}

/// Low-rank factors for an admissible block from its sketch `S = G Omega`.
///
/// With a mirror sketch `S' = G^T Omega'` available (self-adjoint case) the
/// co-range is fitted from `Omega'^T G = S'^T`; otherwise `G ~ S Omega^+`.
fn low_rank_block(s: &Matrix, om: &Matrix, mirror: Option<&(Matrix, Matrix)>, max_rank: usize) -> BlockData {
    let basis = orthonormal_range(s);
    let q = basis.q;
    if q.ncols() == 0 {
        return BlockData::LowRank {
            u: Matrix::zeros(s.nrows(), 0),
            v: Matrix::zeros(om.nrows(), 0),
        };
    }
    let coeffs = match mirror {
        Some((s_mirror, om_mirror)) => {
            // (Omega'^T Q) C = S'^T
            let lhs = om_mirror.transpose() * &q;
            let rhs = s_mirror.transpose();
            let f = linalg::svd_matrix(&lhs);
            let smax = f.singular_values.first().copied().unwrap_or(0.0);
            let keep = f.singular_values.iter().take_while(|&&v| v > 1e-12 * smax).count();
            let mut c = Matrix::zeros(q.ncols(), rhs.ncols());
            if keep > 0 {
                let mut ut_rhs = f.u.columns(0, keep).transpose() * rhs;
                for j in 0..keep {
                    ut_rhs.row_mut(j).scale_mut(1.0 / f.singular_values[j]);
                }
                c = f.v.columns(0, keep) * ut_rhs;
            }
            c
        }
        None => q.transpose() * right_solve(s, om, 1e-12),
    };
    let f = linalg::svd_matrix(&coeffs);
    let smax = f.singular_values.first().copied().unwrap_or(0.0);
    let r = f
        .singular_values
        .iter()
        .take_while(|&&v| v > 1e-14 * smax && v > 0.0)
        .count()
        .min(max_rank);
    let mut u = &q * f.u.columns(0, r);
    for j in 0..r {
        u.column_mut(j).scale_mut(f.singular_values[j]);
    }
    BlockData::LowRank {
        u,
        v: f.v.columns(0, r).into_owned(),
    }
}

/// Least-squares recovery `G = S Omega^+`, ridge-regularized when the
/// forcings are ill-conditioned.
fn dense_block(s: &Matrix, om: &Matrix, options: &LearnOptions) -> Result<(Matrix, bool)> {
    let sv = linalg::singular_values(om);
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = if om.nrows() <= om.ncols() { sv.get(om.nrows().saturating_sub(1)).copied().unwrap_or(0.0) } else { 0.0 };
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond <= options.max_condition {
        return Ok((right_solve(s, om, 0.0), false));
    }
    log::warn!("dense leaf forcings ill-conditioned (condition {cond:e}); applying ridge {}", options.ridge);
    // G = S Omega^T (Omega Omega^T + lambda I)^{-1}
    let lambda = options.ridge * smax * smax;
    let gram = om * om.transpose() + Matrix::identity(om.nrows(), om.nrows()) * lambda;
    let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| Error::Singular("regularized leaf system".into()))?;
    let rhs = (s * om.transpose()).transpose();
    Ok((chol.solve(&rhs).transpose(), true))
}
