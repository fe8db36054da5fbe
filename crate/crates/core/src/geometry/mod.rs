//! Geometric primitives, ray/triangle intersection and spatial indices.

mod aabb;
mod bvh;
mod kdtree;
mod ray;
mod vec3;

pub use aabb::Aabb;
pub use bvh::{merge_ordered_hits, Bvh, BvhNode, NodeKind, DEFAULT_LEAF_SIZE, HIT_MERGE_DISTANCE};
pub use kdtree::KdTree;
pub use ray::{ray_triangle_intersect, Hit, Ray, Triangle, DETERMINANT_EPSILON, MIN_TRIANGLE_AREA};
pub use vec3::Vec3;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("scene contains no triangles")]
    EmptyScene,
}
