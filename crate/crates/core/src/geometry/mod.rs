//! Domain polygons, triangulations and projection matrices.

mod mesh;
mod polygon;
mod projection;

pub use mesh::{build_mesh, Mesh, Zone};
pub use polygon::Polygon;
pub use projection::{
    block_projection, point_projection, spacetime_blockdiag, Block, BlockSet, GridSpec, ProjMatrix,
    RowMeta, SourceKind,
};
