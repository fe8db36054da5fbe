//! Scene assembly: labeled assets placed flat on a ground plane, plus the
//! ring of scan positions around the scene center.

mod xml;

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::asset::{
    AssetError, ClassLabel, LabelRegistry, LabeledAsset, MeshAsset, GROUND_LABEL_ID,
};
use crate::geometry::{Aabb, Triangle, Vec3};

pub use xml::{parse_scene_xml, write_scene_xml};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error("no object assets to place")]
    NoAssets,
    #[error("number of objects must be at least 1")]
    NoObjects,
    #[error("object layout needs {needed:?} but the ground plane only covers {available:?}")]
    GroundTooSmall { needed: Aabb, available: Aabb },
    #[error("malformed scene XML <{element}>: {reason}")]
    MalformedSceneXml { element: String, reason: String },
    #[error("scene references missing asset {0}")]
    MissingAsset(PathBuf),
    #[error("part {part} has a rotation filter; rotated placement is not supported")]
    RotationUnsupported { part: usize },
    #[error("the ground plane must be opaque")]
    TransmissiveGround,
}

/// How a surface treats an incoming pulse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Material {
    /// Stops the pulse and produces a return.
    #[default]
    Opaque,
    /// Lets the pulse through without a return.
    Transmissive,
}

impl Material {
    pub fn as_str(self) -> &'static str {
        match self {
            Material::Opaque => "opaque",
            Material::Transmissive => "transmissive",
        }
    }
}

impl std::str::FromStr for Material {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "opaque" => Ok(Material::Opaque),
            "transmissive" => Ok(Material::Transmissive),
            other => Err(format!("unknown material {other:?}")),
        }
    }
}

/// One placed asset. Parts are only ever translated.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenePart {
    /// Path the asset was loaded from, as written to the scene file.
    pub source: PathBuf,
    pub asset: Arc<MeshAsset>,
    pub translation: Vec3,
    pub label: ClassLabel,
    pub part_index: u32,
    pub material: Material,
}

impl ScenePart {
    pub fn aabb(&self) -> Aabb {
        self.asset.aabb().translated(self.translation)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub name: String,
    /// Part 0 is the ground plane.
    pub parts: Vec<ScenePart>,
    pub center: Vec3,
}

impl Scene {
    /// Assembles a scene from already-placed parts, renumbering them in order
    /// and recomputing the center.
    pub fn from_parts(name: &str, mut parts: Vec<ScenePart>) -> Result<Self, SceneError> {
        for (i, p) in parts.iter_mut().enumerate() {
            p.part_index = i as u32;
        }
        match parts.first() {
            Some(g) if g.label.id == GROUND_LABEL_ID => {
                if g.material != Material::Opaque {
                    return Err(SceneError::TransmissiveGround);
                }
            }
            _ => {
                return Err(SceneError::MalformedSceneXml {
                    element: "part".into(),
                    reason: "first part must be the ground plane (classId 0)".into(),
                })
            }
        }
        let center = scene_center(&parts);
        Ok(Scene {
            name: name.to_string(),
            parts,
            center,
        })
    }

    pub fn ground(&self) -> &ScenePart {
        &self.parts[0]
    }

    /// Height objects rest on: the top of the ground plane's bounding box.
    pub fn ground_z(&self) -> f64 {
        self.ground().aabb().max.z
    }

    pub fn objects(&self) -> &[ScenePart] {
        &self.parts[1..]
    }

    pub fn labels(&self) -> LabelRegistry {
        let mut reg = LabelRegistry::new();
        for p in &self.parts {
            // Parts were validated on construction or parse; a conflict here
            // would already have been rejected.
            let _ = reg.insert(p.label.id, &p.label.name);
        }
        reg
    }

    pub fn set_material(
        &mut self,
        part_index: usize,
        material: Material,
    ) -> Result<(), SceneError> {
        if part_index == 0 && material != Material::Opaque {
            return Err(SceneError::TransmissiveGround);
        }
        self.parts[part_index].material = material;
        Ok(())
    }

    pub fn triangle_count(&self) -> usize {
        self.parts.iter().map(|p| p.asset.triangles.len()).sum()
    }

    /// World-space triangles of every part. Degenerate triangles are dropped
    /// with a warning.
    pub fn triangles(&self) -> Vec<Triangle> {
        self.triangles_with_normals().0
    }

    /// Like [`Scene::triangles`], also returning each kept triangle's vertex
    /// normals when its asset has them.
    pub fn triangles_with_normals(&self) -> (Vec<Triangle>, Vec<Option<[Vec3; 3]>>) {
        let mut tris = Vec::with_capacity(self.triangle_count());
        let mut normals = Vec::with_capacity(self.triangle_count());
        let mut dropped = 0usize;
        for part in &self.parts {
            let asset = &part.asset;
            for (i, &[a, b, c]) in asset.triangles.iter().enumerate() {
                let [p0, p1, p2] = asset.triangle_vertices(i);
                let t = part.translation;
                let tri = Triangle::new(p0 + t, p1 + t, p2 + t, part.part_index);
                if tri.is_degenerate() {
                    dropped += 1;
                    continue;
                }
                tris.push(tri);
                normals.push(
                    asset
                        .normals
                        .as_ref()
                        .map(|n| [n[a as usize], n[b as usize], n[c as usize]]),
                );
            }
        }
        if dropped > 0 {
            log::warn!(
                "dropped {dropped} degenerate triangles from scene {:?}",
                self.name
            );
        }
        (tris, normals)
    }
}

/// Centroid of the non-ground parts' bounding-box centers, or the ground's
/// center when there are no objects.
pub fn scene_center(parts: &[ScenePart]) -> Vec3 {
    let objects: Vec<Vec3> = parts
        .iter()
        .filter(|p| p.part_index != 0)
        .map(|p| p.aabb().center())
        .collect();
    if objects.is_empty() {
        return parts.first().map_or(Vec3::ZERO, |g| g.aabb().center());
    }
    objects.iter().fold(Vec3::ZERO, |acc, &c| acc + c) / objects.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Placement {
    /// Square grid, row-major, centered on the ground plane.
    Grid,
    /// Seeded uniform positions inside the ground footprint.
    Scatter { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Layout {
    pub num_objects: usize,
    /// Grid pitch (m).
    pub spacing: f64,
    pub placement: Placement,
}

/// Columns and rows of the smallest near-square grid holding `n` cells.
pub fn grid_shape(n: usize) -> (usize, usize) {
    let cols = (n as f64).sqrt().ceil() as usize;
    let cols = cols.max(1);
    (cols, n.div_ceil(cols))
}

/// Grid cell centers relative to the grid center, row-major.
pub fn grid_offsets(n: usize, spacing: f64) -> Vec<(f64, f64)> {
    let (cols, rows) = grid_shape(n);
    (0..n)
        .map(|k| {
            let (r, c) = (k / cols, k % cols);
            (
                (c as f64 - (cols - 1) as f64 / 2.0) * spacing,
                (r as f64 - (rows - 1) as f64 / 2.0) * spacing,
            )
        })
        .collect()
}

/// Places `layout.num_objects` assets (reused round-robin) on the ground
/// plane. Every object is translated so its bounding-box center sits on its
/// target and its lowest vertex touches the ground.
pub fn build_scene(
    assets: &[LabeledAsset],
    ground: &LabeledAsset,
    layout: &Layout,
    name: &str,
) -> Result<Scene, SceneError> {
    if assets.is_empty() {
        return Err(SceneError::NoAssets);
    }
    if layout.num_objects == 0 {
        return Err(SceneError::NoObjects);
    }
    let ground_box = ground.asset.aabb();
    let ground_z = ground_box.max.z;
    let ground_center = ground_box.center();

    let shared: Vec<Arc<MeshAsset>> = assets.iter().map(|a| Arc::new(a.asset.clone())).collect();
    let mut rng = match layout.placement {
        Placement::Scatter { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Placement::Grid => None,
    };
    let offsets = grid_offsets(layout.num_objects, layout.spacing);

    let mut parts = vec![ScenePart {
        source: ground.path.clone(),
        asset: Arc::new(ground.asset.clone()),
        translation: Vec3::ZERO,
        label: ground.label.clone(),
        part_index: 0,
        material: Material::Opaque,
    }];
    let mut needed = Aabb::EMPTY;
    for (k, &(dx, dy)) in offsets.iter().enumerate() {
        let source = &assets[k % assets.len()];
        let bounds = source.asset.aabb();
        let half = bounds.extent() * 0.5;
        let (x, y) = match rng.as_mut() {
            None => (ground_center.x + dx, ground_center.y + dy),
            Some(rng) => {
                let lo_x = ground_box.min.x + half.x;
                let hi_x = ground_box.max.x - half.x;
                let lo_y = ground_box.min.y + half.y;
                let hi_y = ground_box.max.y - half.y;
                if lo_x > hi_x || lo_y > hi_y {
                    return Err(SceneError::GroundTooSmall {
                        needed: bounds,
                        available: ground_box,
                    });
                }
                (rng.gen_range(lo_x..=hi_x), rng.gen_range(lo_y..=hi_y))
            }
        };
        let center = bounds.center();
        let translation = Vec3::new(x - center.x, y - center.y, ground_z - bounds.min.z);
        let part = ScenePart {
            source: source.path.clone(),
            asset: shared[k % assets.len()].clone(),
            translation,
            label: source.label.clone(),
            part_index: (k + 1) as u32,
            material: Material::Opaque,
        };
        needed = needed.union(part.aabb());
        parts.push(part);
    }

    const SLACK: f64 = 1e-9;
    let fits = needed.min.x >= ground_box.min.x - SLACK
        && needed.min.y >= ground_box.min.y - SLACK
        && needed.max.x <= ground_box.max.x + SLACK
        && needed.max.y <= ground_box.max.y + SLACK;
    if !fits {
        return Err(SceneError::GroundTooSmall {
            needed,
            available: ground_box,
        });
    }
    Scene::from_parts(name, parts)
}

/// A scanner standing position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPosition {
    pub position: Vec3,
    pub index: usize,
}

/// `segments` positions evenly spaced on a horizontal circle of `radius`
/// around `center`, raised by `height`. The first sits on the +x axis.
///
/// # Panics
///
/// If `segments` is zero or `radius` is not positive.
pub fn generate_scan_positions(
    center: Vec3,
    radius: f64,
    segments: usize,
    height: f64,
) -> Vec<ScanPosition> {
    assert!(segments >= 1, "at least one scan position is required");
    assert!(radius > 0.0, "scan radius must be positive");
    (0..segments)
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / segments as f64;
            let (s, c) = theta.sin_cos();
            ScanPosition {
                position: center + Vec3::new(radius * c, radius * s, height),
                index: i,
            }
        })
        .collect()
}
