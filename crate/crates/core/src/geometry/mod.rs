//! Mesh ingestion, surface sampling, bounding volumes and neighbor graphs.

mod bounds;
pub mod io;
mod knn;
mod mesh;
pub mod raycast;
mod sampling;

use nalgebra::Vector3;
use thiserror::Error;

pub use bounds::{bounding_sphere, compute_obb, minimal_sphere, BoundingSphere, OrientedBoundingBox};
pub use io::{load_mesh, load_xyz, PointCloud};
pub use knn::{knn_graph, KdTree, NeighborGraph};
pub use mesh::{aabb, closest_point_on_triangle, TriangleMesh, DEGENERATE_AREA};
pub use sampling::{area_weighted_sample, closest_surface_point, PointSample};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record {record}: vertex index {index} out of range ({count} vertices)")]
    IndexOutOfRange { record: usize, index: i64, count: usize },
    #[error("record {record}: non-finite coordinate")]
    NonFinite { record: usize },
    #[error("label count {found} does not match face count {expected}")]
    LabelCount { expected: usize, found: usize },
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("every face is degenerate")]
    AllDegenerate,
    #[error("empty point set")]
    EmptyInput,
    #[error("k = {k} needs more than {count} points")]
    TooFewPoints { k: usize, count: usize },
}
