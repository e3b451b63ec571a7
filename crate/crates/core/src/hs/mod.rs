//! Hilbert–Schmidt operator learning: quasimatrices, integral operators,
//! randomized range sampling and hierarchical recovery.

mod hmatrix;
mod operator;
mod quasimatrix;
mod randomized;

pub use hmatrix::{
    cluster_nodes, hierarchical_learn, Block, BlockData, Cluster, HMatrixGreen, HierarchicalPartition, LearnOptions,
    LearnReport, Symmetry,
};
pub use operator::{numerical_rank, qm_project, ForwardOperator, IntegralOperator};
pub use quasimatrix::QuasiMatrix;
pub use randomized::{hs_randomized_svd, AdjointAccess, HsRsvdResult};
