//! Structured P1 finite elements on the unit square with a two-subdomain split.

mod assembly;
mod mesh;
mod partition;
mod problem;

pub use assembly::{
    assemble, assemble_vertex_load, assemble_vertex_matrix, element_matrices, extract_blocks,
    triangle_subdomain, AffineOperator, AffineRhs, BlockSet, OperatorTerm, SourceTerm,
    SubdomainBlocks,
};
pub use mesh::{build_mesh, Mesh2D};
pub use partition::DomainPartition;
pub use problem::{
    OperatorSpec, ParamCoef, ProblemDefinition, ProblemId, SourceSpec, SpaceProfile, TermKind,
};
