//! Labeled point clouds and their text formats.
//!
//! `.xyz` lines carry ten whitespace-separated fields,
//! `x y z nx ny nz label r g b`, with floats printed to 9 significant digits.
//! Training `.txt` lines keep only `x y z label`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::asset::Rgb;
use crate::geometry::{Aabb, KdTree, Vec3};

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("malformed XYZ at line {line}: {reason}")]
    MalformedXyz { line: usize, reason: String },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPoint {
    pub position: Vec3,
    /// Unit surface normal facing the scanner.
    pub normal: Vec3,
    pub label: u32,
    pub color: Rgb,
}

/// Where a simulated cloud came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub survey: String,
    pub leg: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<LabeledPoint>,
    pub provenance: Option<Provenance>,
}

impl PointCloud {
    pub fn new(points: Vec<LabeledPoint>) -> Self {
        PointCloud {
            points,
            provenance: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.points.iter().map(|p| p.position))
    }
}

/// Formats `v` with 9 significant digits, using the shortest decimal that
/// reads back to the rounded value. Zero (of either sign) prints as `0`.
pub fn format_sig9(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    if rounded == 0.0 {
        "0".to_string()
    } else {
        rounded.to_string()
    }
}

fn write_xyz_line<W: Write>(w: &mut W, p: &LabeledPoint) -> std::io::Result<()> {
    let Rgb(r, g, b) = p.color;
    writeln!(
        w,
        "{} {} {} {} {} {} {} {r} {g} {b}",
        format_sig9(p.position.x),
        format_sig9(p.position.y),
        format_sig9(p.position.z),
        format_sig9(p.normal.x),
        format_sig9(p.normal.y),
        format_sig9(p.normal.z),
        p.label,
    )
}

pub fn write_xyz_to<W: Write>(cloud: &PointCloud, w: &mut W) -> std::io::Result<()> {
    for p in &cloud.points {
        write_xyz_line(w, p)?;
    }
    Ok(())
}

pub fn write_xyz(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 64);
    write_xyz_to(cloud, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn read_xyz(bytes: &[u8]) -> Result<PointCloud, CloudError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CloudError::MalformedXyz {
        line: 0,
        reason: format!("not UTF-8: {e}"),
    })?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let bad = |reason: String| CloudError::MalformedXyz {
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 10 {
            return Err(bad(format!("expected 10 fields, found {}", fields.len())));
        }
        let mut f = [0.0f64; 6];
        for (slot, s) in f.iter_mut().zip(&fields[..6]) {
            *slot = s
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| bad(format!("invalid number {s:?}")))?;
        }
        let label: u32 = fields[6]
            .parse()
            .map_err(|_| bad(format!("invalid label {:?}", fields[6])))?;
        let mut rgb = [0u8; 3];
        for (slot, s) in rgb.iter_mut().zip(&fields[7..]) {
            *slot = s
                .parse()
                .map_err(|_| bad(format!("invalid color channel {s:?}")))?;
        }
        points.push(LabeledPoint {
            position: Vec3::new(f[0], f[1], f[2]),
            normal: Vec3::new(f[3], f[4], f[5]),
            label,
            color: Rgb(rgb[0], rgb[1], rgb[2]),
        });
    }
    Ok(PointCloud::new(points))
}

pub fn read_xyz_file(path: &Path) -> Result<PointCloud, CloudError> {
    let bytes = std::fs::read(path).map_err(|source| CloudError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_xyz(&bytes)
}

pub fn write_xyz_file(path: &Path, cloud: &PointCloud) -> Result<(), CloudError> {
    let io = |source| CloudError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    write_xyz_to(cloud, &mut w).map_err(io)?;
    w.flush().map_err(io)
}

/// Concatenates clouds in order. Overlapping returns are not deduplicated.
pub fn merge(clouds: &[PointCloud]) -> PointCloud {
    let mut points = Vec::with_capacity(clouds.iter().map(PointCloud::len).sum());
    for c in clouds {
        points.extend_from_slice(&c.points);
    }
    PointCloud::new(points)
}

pub fn write_training_txt_to<W: Write>(points: &[LabeledPoint], w: &mut W) -> std::io::Result<()> {
    for p in points {
        writeln!(
            w,
            "{} {} {} {}",
            format_sig9(p.position.x),
            format_sig9(p.position.y),
            format_sig9(p.position.z),
            p.label
        )?;
    }
    Ok(())
}

/// Projects a cloud to `x y z label` lines, keeping point order.
pub fn to_training_txt(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * 40);
    write_training_txt_to(&cloud.points, &mut out).expect("writing to a Vec cannot fail");
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CloudStats {
    pub count: usize,
    /// `None` for an empty cloud.
    pub bbox: Option<Aabb>,
    pub per_label: BTreeMap<u32, usize>,
    /// Mean distance from each point to its nearest other point (m); 0 when
    /// undefined.
    pub mean_nn_spacing: f64,
    /// False when the cloud has fewer than two points.
    pub nn_spacing_defined: bool,
}

pub fn stats(cloud: &PointCloud) -> CloudStats {
    let mut per_label = BTreeMap::new();
    for p in &cloud.points {
        *per_label.entry(p.label).or_insert(0) += 1;
    }
    let bbox = (!cloud.is_empty()).then(|| cloud.aabb());
    let (mean_nn_spacing, nn_spacing_defined) = if cloud.len() < 2 {
        (0.0, false)
    } else {
        let positions = cloud.positions();
        let tree = KdTree::new(&positions);
        let spacings: Vec<f64> = positions
            .par_iter()
            .enumerate()
            .map(|(i, &p)| tree.nearest_excluding(p, Some(i)).map_or(0.0, |(_, d)| d))
            .collect();
        (spacings.iter().sum::<f64>() / spacings.len() as f64, true)
    };
    CloudStats {
        count: cloud.len(),
        bbox,
        per_label,
        mean_nn_spacing,
        nn_spacing_defined,
    }
}

/// Aggregated nearest-neighbor distances.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DistanceSummary {
    pub count: usize,
    pub mean: f64,
    pub rms: f64,
    pub max: f64,
}

impl DistanceSummary {
    fn from_distances(d: impl Iterator<Item = f64>) -> Self {
        let (mut count, mut sum, mut sum_sq, mut max) = (0usize, 0.0, 0.0, 0.0f64);
        for v in d {
            count += 1;
            sum += v;
            sum_sq += v * v;
            max = max.max(v);
        }
        if count == 0 {
            return DistanceSummary::default();
        }
        DistanceSummary {
            count,
            mean: sum / count as f64,
            rms: (sum_sq / count as f64).sqrt(),
            max,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub overall: DistanceSummary,
    /// Keyed by the label of the point in the first cloud.
    pub per_label: BTreeMap<u32, DistanceSummary>,
}

/// Distance from every point of `a` to its nearest neighbor in `b`.
pub fn compare(a: &PointCloud, b: &PointCloud) -> Result<Comparison, CloudError> {
    if a.is_empty() || b.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    let tree = KdTree::new(&b.positions());
    let distances: Vec<f64> = a
        .points
        .par_iter()
        .map(|p| tree.nearest(p.position).map_or(0.0, |(_, d)| d))
        .collect();
    let labels: std::collections::BTreeSet<u32> = a.points.iter().map(|p| p.label).collect();
    let per_label = labels
        .into_iter()
        .map(|label| {
            let summary = DistanceSummary::from_distances(
                a.points
                    .iter()
                    .zip(&distances)
                    .filter(|(p, _)| p.label == label)
                    .map(|(_, &d)| d),
            );
            (label, summary)
        })
        .collect();
    Ok(Comparison {
        overall: DistanceSummary::from_distances(distances.iter().copied()),
        per_label,
    })
}
