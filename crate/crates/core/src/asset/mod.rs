//! Mesh assets and the class-label registry.
//!
//! OBJ carries no semantics, so an asset's class comes from its file name:
//! `elbow_03.obj` and `Elbow-7.obj` are both instances of class `elbow`.

mod obj;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Aabb, Vec3};

pub use obj::{parse_obj, write_obj};

/// Class id reserved for the ground plane.
pub const GROUND_LABEL_ID: u32 = 0;
pub const GROUND_LABEL_NAME: &str = "ground";

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("malformed OBJ at line {line}: {reason}")]
    MalformedObj { line: usize, reason: String },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<AssetError>,
    },
    #[error("class id {id} is already registered as {existing:?}, not {requested:?}")]
    LabelConflict {
        id: u32,
        existing: String,
        requested: String,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const WHITE: Rgb = Rgb(255, 255, 255);
}

const PALETTE: [Rgb; 12] = [
    Rgb(128, 128, 128),
    Rgb(230, 25, 75),
    Rgb(60, 180, 75),
    Rgb(255, 225, 25),
    Rgb(0, 130, 200),
    Rgb(245, 130, 48),
    Rgb(145, 30, 180),
    Rgb(70, 240, 240),
    Rgb(240, 50, 230),
    Rgb(210, 245, 60),
    Rgb(250, 190, 212),
    Rgb(0, 128, 128),
];

/// Display color for a class id. Ground is grey; the rest cycle through a
/// fixed table.
pub fn palette_color(label_id: u32) -> Rgb {
    if label_id == GROUND_LABEL_ID {
        PALETTE[0]
    } else {
        PALETTE[1 + (label_id as usize - 1) % (PALETTE.len() - 1)]
    }
}

/// A triangle mesh as read from one OBJ file.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshAsset {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Unit normal per vertex, present only when every face supplied one.
    pub normals: Option<Vec<Vec3>>,
    pub color: Rgb,
}

impl MeshAsset {
    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    pub fn triangle_vertices(&self, index: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[index];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassLabel {
    pub id: u32,
    pub name: String,
}

/// Class labels keyed by id. Id 0 is always `ground`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelRegistry {
    labels: Vec<ClassLabel>,
}

impl Default for LabelRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl LabelRegistry {
    pub fn new() -> Self {
        LabelRegistry {
            labels: vec![ClassLabel {
                id: GROUND_LABEL_ID,
                name: GROUND_LABEL_NAME.to_string(),
            }],
        }
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn by_id(&self, id: u32) -> Option<&ClassLabel> {
        self.labels.iter().find(|l| l.id == id)
    }

    pub fn by_name(&self, name: &str) -> Option<&ClassLabel> {
        self.labels.iter().find(|l| l.name == name)
    }

    /// Returns the label called `name`, registering it under the next free id
    /// if it is new.
    pub fn get_or_insert(&mut self, name: &str) -> ClassLabel {
        if let Some(l) = self.by_name(name) {
            return l.clone();
        }
        let id = self.labels.iter().map(|l| l.id).max().map_or(0, |m| m + 1);
        let label = ClassLabel {
            id,
            name: name.to_string(),
        };
        self.labels.push(label.clone());
        label
    }

    /// Registers an explicit (id, name) pair, as read back from a scene file.
    pub fn insert(&mut self, id: u32, name: &str) -> Result<ClassLabel, AssetError> {
        match self.by_id(id) {
            Some(existing) if existing.name == name => Ok(existing.clone()),
            Some(existing) => Err(AssetError::LabelConflict {
                id,
                existing: existing.name.clone(),
                requested: name.to_string(),
            }),
            None => {
                let label = ClassLabel {
                    id,
                    name: name.to_string(),
                };
                self.labels.push(label.clone());
                self.labels.sort_by_key(|l| l.id);
                Ok(label)
            }
        }
    }
}

fn is_label_suffix(c: char) -> bool {
    c.is_ascii_digit() || matches!(c, '_' | '-' | '.' | ' ')
}

/// Class name for an asset file: the lowercased stem with trailing digits and
/// separators removed. A stem made only of digits is kept whole.
pub fn label_name(filename: &str) -> String {
    let stem = Path::new(filename)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(filename)
        .to_lowercase();
    let trimmed = stem.trim_end_matches(is_label_suffix);
    if trimmed.is_empty() {
        stem
    } else {
        trimmed.to_string()
    }
}

/// Looks up or assigns the class label for an asset file name.
pub fn label_for_asset(filename: &str, registry: &mut LabelRegistry) -> ClassLabel {
    registry.get_or_insert(&label_name(filename))
}

/// An asset together with the file it came from and its class.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledAsset {
    pub path: PathBuf,
    pub asset: MeshAsset,
    pub label: ClassLabel,
}

fn read_file(path: &Path) -> Result<Vec<u8>, AssetError> {
    std::fs::read(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            AssetError::MissingFile(path.to_path_buf())
        } else {
            AssetError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

/// Reads and parses one OBJ file. The asset is named after the file stem.
pub fn load_obj(path: &Path) -> Result<MeshAsset, AssetError> {
    let bytes = read_file(path)?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh")
        .to_string();
    parse_obj(&bytes, &name).map_err(|e| match e {
        e @ AssetError::MalformedObj { .. } => AssetError::InFile {
            path: path.to_path_buf(),
            source: Box::new(e),
        },
        e => e,
    })
}

/// Loads the ground mesh and tags it with the reserved ground label. No
/// planarity is required.
pub fn load_ground_plane(path: &Path) -> Result<LabeledAsset, AssetError> {
    let mut asset = load_obj(path)?;
    asset.color = palette_color(GROUND_LABEL_ID);
    Ok(LabeledAsset {
        path: path.to_path_buf(),
        asset,
        label: ClassLabel {
            id: GROUND_LABEL_ID,
            name: GROUND_LABEL_NAME.to_string(),
        },
    })
}

/// Loads every `.obj` file in `dir` (non-recursive), skipping paths in
/// `exclude`. Files are parsed in parallel; labels are assigned in sorted
/// file-name order so the registry is the same on every run.
pub fn load_asset_dir(
    dir: &Path,
    exclude: &[PathBuf],
    registry: &mut LabelRegistry,
) -> Result<Vec<LabeledAsset>, AssetError> {
    let io_err = |source| AssetError::Io {
        path: dir.to_path_buf(),
        source,
    };
    if !dir.is_dir() {
        return Err(AssetError::MissingFile(dir.to_path_buf()));
    }
    let excluded: Vec<PathBuf> = exclude
        .iter()
        .filter_map(|p| p.canonicalize().ok())
        .collect();
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        let is_obj = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("obj"));
        if !is_obj || !path.is_file() {
            continue;
        }
        if path.canonicalize().is_ok_and(|c| excluded.contains(&c)) {
            continue;
        }
        paths.push(path);
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let parsed: Vec<MeshAsset> = paths
        .par_iter()
        .map(|p| load_obj(p))
        .collect::<Result<_, _>>()?;

    Ok(paths
        .into_iter()
        .zip(parsed)
        .map(|(path, mut asset)| {
            let filename = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
            let label = label_for_asset(filename, registry);
            asset.color = palette_color(label.id);
            LabeledAsset { path, asset, label }
        })
        .collect())
}
