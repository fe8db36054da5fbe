//! Virtual terrestrial laser scanning of class-labeled mesh scenes.
//!
//! The pipeline runs from OBJ assets ([`asset`]) through scene assembly and
//! scan-position layout ([`scene`]), survey configuration ([`survey`]) and
//! pulse simulation ([`scanner`]) to labeled point clouds ([`pointcloud`])
//! and sliding-window training blocks ([`blocks`]).

pub mod asset;
pub mod blocks;
pub mod geometry;
pub mod pointcloud;
pub mod scanner;
pub mod scene;
pub mod survey;
mod xml;

/// Seed used when none is configured.
pub const DEFAULT_SEED: u64 = 42;
