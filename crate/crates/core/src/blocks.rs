//! Sliding-window partition of a labeled cloud into training blocks.
//!
//! Windows tile the cloud's x-y bounding box starting at its minimum corner
//! and take the full z column. Window bounds are half-open,
//! `[x0, x0 + window_x) × [y0, y0 + window_y)`.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pointcloud::{format_sig9, write_training_txt_to, LabeledPoint, PointCloud};

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("invalid block spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockSpec {
    pub window_x: f64,
    pub window_y: f64,
    pub stride_x: f64,
    pub stride_y: f64,
    /// Blocks with fewer points are dropped.
    pub min_points: usize,
    /// Resample every block to exactly this many points (with replacement).
    pub sample_to: Option<usize>,
    pub seed: u64,
}

impl Default for BlockSpec {
    fn default() -> Self {
        BlockSpec {
            window_x: 1.0,
            window_y: 1.0,
            stride_x: 1.0,
            stride_y: 1.0,
            min_points: 100,
            sample_to: None,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl BlockSpec {
    pub fn validate(&self) -> Result<(), BlockError> {
        let bad = |m: &str| Err(BlockError::InvalidSpec(m.to_string()));
        for (w, s) in [
            (self.window_x, self.stride_x),
            (self.window_y, self.stride_y),
        ] {
            if !(w.is_finite() && w > 0.0) {
                return bad("window must be positive");
            }
            if !(s.is_finite() && s > 0.0 && s <= w) {
                return bad("stride must be positive and at most the window");
            }
        }
        if self.min_points < 1 {
            return bad("min_points must be at least 1");
        }
        if self.sample_to == Some(0) {
            return bad("sample_to must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    /// Window index along x and y.
    pub index: (usize, usize),
    pub origin: (f64, f64),
    pub points: Vec<LabeledPoint>,
}

/// Windows along one axis: half-open `[lo, hi)` intervals anchored at `min`,
/// stopping at the first window that reaches past `max`.
fn axis_windows(min: f64, max: f64, window: f64, stride: f64) -> Vec<(f64, f64)> {
    let tiled = stride == window;
    let mut out = Vec::new();
    for i in 0usize.. {
        let lo = min + i as f64 * stride;
        // Abutting windows share the exact same boundary value.
        let hi = if tiled {
            min + (i + 1) as f64 * stride
        } else {
            lo + window
        };
        out.push((lo, hi));
        if hi > max {
            break;
        }
    }
    out
}

/// Indices of the windows containing `v`.
fn containing(
    windows: &[(f64, f64)],
    min: f64,
    stride: f64,
    v: f64,
) -> impl Iterator<Item = usize> + '_ {
    let guess = ((v - min) / stride).floor().max(0.0) as usize;
    let reach = windows.len();
    // Windows overlapping `v` lie at most window/stride slots before the
    // guess; scanning one extra slot on both sides absorbs rounding.
    let back = windows
        .first()
        .map_or(0, |&(lo, hi)| ((hi - lo) / stride).ceil() as usize + 1);
    let start = guess.saturating_sub(back);
    let end = (guess + 2).min(reach);
    (start..end).filter(move |&i| {
        let (lo, hi) = windows[i];
        v >= lo && v < hi
    })
}

pub fn partition_blocks(cloud: &PointCloud, spec: &BlockSpec) -> Result<Vec<Block>, BlockError> {
    if cloud.is_empty() {
        return Err(BlockError::EmptyCloud);
    }
    spec.validate()?;
    let bbox = cloud.aabb();
    let xs = axis_windows(bbox.min.x, bbox.max.x, spec.window_x, spec.stride_x);
    let ys = axis_windows(bbox.min.y, bbox.max.y, spec.window_y, spec.stride_y);

    let mut cells: Vec<Vec<LabeledPoint>> = vec![Vec::new(); xs.len() * ys.len()];
    for p in &cloud.points {
        let (x, y) = (p.position.x, p.position.y);
        for i in containing(&xs, bbox.min.x, spec.stride_x, x) {
            for j in containing(&ys, bbox.min.y, spec.stride_y, y) {
                cells[i * ys.len() + j].push(*p);
            }
        }
    }

    let mut blocks = Vec::new();
    for (k, points) in cells.into_iter().enumerate() {
        if points.len() < spec.min_points {
            continue;
        }
        let (i, j) = (k / ys.len(), k % ys.len());
        let points = match spec.sample_to {
            Some(n) => {
                let key = crate::scanner::pulse_key(spec.seed, usize::MAX, i, j);
                let mut rng = ChaCha8Rng::seed_from_u64(key);
                (0..n)
                    .map(|_| points[rng.gen_range(0..points.len())])
                    .collect()
            }
            None => points,
        };
        blocks.push(Block {
            index: (i, j),
            origin: (xs[i].0, ys[j].0),
            points,
        });
    }
    Ok(blocks)
}

/// One row of the block manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub origin: (f64, f64),
    pub count: usize,
}

pub fn block_file_name(base: &str, block: &Block) -> String {
    format!("{base}_{}_{}.txt", block.index.0, block.index.1)
}

/// Writes each block as `{base}_{i}_{j}.txt` in `x y z label` form plus
/// `{base}_manifest.csv` with `file,origin_x,origin_y,count` rows.
pub fn write_blocks(
    blocks: &[Block],
    dir: &Path,
    base: &str,
) -> Result<Vec<ManifestEntry>, BlockError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BlockError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut manifest = Vec::with_capacity(blocks.len());
    for block in blocks {
        let name = block_file_name(base, block);
        let path = dir.join(&name);
        let file = std::fs::File::create(&path).map_err(io(&path))?;
        let mut w = std::io::BufWriter::new(file);
        write_training_txt_to(&block.points, &mut w).map_err(io(&path))?;
        w.flush().map_err(io(&path))?;
        manifest.push(ManifestEntry {
            file: name,
            origin: block.origin,
            count: block.points.len(),
        });
    }

    let manifest_path = dir.join(format!("{base}_manifest.csv"));
    let mut w = csv::Writer::from_path(&manifest_path)?;
    w.write_record(["file", "origin_x", "origin_y", "count"])?;
    for e in &manifest {
        w.write_record([
            e.file.clone(),
            format_sig9(e.origin.0),
            format_sig9(e.origin.1),
            e.count.to_string(),
        ])?;
    }
    w.flush().map_err(io(&manifest_path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asset::Rgb;
    use crate::geometry::Vec3;

    fn line_cloud() -> PointCloud {
        PointCloud::new(
            (0..10)
                .map(|i| LabeledPoint {
                    position: Vec3::new(i as f64 + 0.5, 0.0, i as f64),
                    normal: Vec3::Z,
                    label: i % 2,
                    color: Rgb::WHITE,
                })
                .collect(),
        )
    }

    fn spec(window: f64, stride: f64, min_points: usize) -> BlockSpec {
        BlockSpec {
            window_x: window,
            window_y: window,
            stride_x: stride,
            stride_y: stride,
            min_points,
            sample_to: None,
            seed: 1,
        }
    }

    #[test]
    fn tiled_line_gives_five_pairs() {
        let blocks = partition_blocks(&line_cloud(), &spec(2.0, 2.0, 1)).unwrap();
        assert_eq!(blocks.len(), 5);
        for (k, b) in blocks.iter().enumerate() {
            assert_eq!(b.index, (k, 0));
            assert_eq!(b.points.len(), 2);
            assert_eq!(b.origin, (0.5 + 2.0 * k as f64, 0.0));
        }
    }

    #[test]
    fn overlapping_windows_double_interior_points() {
        let cloud = line_cloud();
        let blocks = partition_blocks(&cloud, &spec(2.0, 1.0, 1)).unwrap();
        for p in &cloud.points {
            let n = blocks.iter().filter(|b| b.points.contains(p)).count();
            let x = p.position.x;
            let expected = if x == 0.5 || x == 9.5 { 1 } else { 2 };
            assert_eq!(n, expected, "x = {x}");
        }
    }

    #[test]
    fn min_points_threshold_drops_all() {
        assert!(partition_blocks(&line_cloud(), &spec(2.0, 2.0, 3))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn empty_cloud_is_an_error() {
        assert!(matches!(
            partition_blocks(&PointCloud::default(), &spec(1.0, 1.0, 1)),
            Err(BlockError::EmptyCloud)
        ));
    }

    #[test]
    fn invalid_specs() {
        for s in [
            spec(0.0, 0.0, 1),
            spec(1.0, 2.0, 1),
            spec(1.0, 1.0, 0),
            BlockSpec {
                sample_to: Some(0),
                ..spec(1.0, 1.0, 1)
            },
        ] {
            assert!(matches!(
                partition_blocks(&line_cloud(), &s),
                Err(BlockError::InvalidSpec(_))
            ));
        }
    }

    #[test]
    fn sampling_is_seeded_and_exact() {
        let s = BlockSpec {
            sample_to: Some(16),
            ..spec(2.0, 2.0, 1)
        };
        let a = partition_blocks(&line_cloud(), &s).unwrap();
        let b = partition_blocks(&line_cloud(), &s).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|blk| blk.points.len() == 16));
        let c = partition_blocks(&line_cloud(), &BlockSpec { seed: 2, ..s }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_point_cloud() {
        let cloud = PointCloud::new(line_cloud().points[..1].to_vec());
        let blocks = partition_blocks(&cloud, &spec(1.0, 0.5, 1)).unwrap();
        assert_eq!(blocks.len(), 1);
    }

    #[test]
    fn files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let blocks = partition_blocks(&line_cloud(), &spec(2.0, 2.0, 1)).unwrap();
        let manifest = write_blocks(&blocks, dir.path(), "line").unwrap();
        assert_eq!(manifest.len(), 5);
        assert_eq!(manifest[0].file, "line_0_0.txt");
        let csv = std::fs::read_to_string(dir.path().join("line_manifest.csv")).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "file,origin_x,origin_y,count");
        assert_eq!(rows[1], "line_0_0.txt,0.5,0,2");
        assert_eq!(rows.len(), 6);
        let first = std::fs::read_to_string(dir.path().join("line_0_0.txt")).unwrap();
        assert_eq!(first, "0.5 0 0 0\n1.5 0 1 1\n");

        let empty = tempfile::tempdir().unwrap();
        assert!(write_blocks(&[], empty.path(), "none").unwrap().is_empty());
        let files: Vec<_> = std::fs::read_dir(empty.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
    }
}
