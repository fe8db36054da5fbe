//! Wavefront OBJ reading and writing.
//!
//! Only geometry is read: `v`, `vn` and `f`. Object and group statements are
//! ignored so that every group in a file lands in one asset. Texture
//! coordinates, materials and smoothing groups are skipped.

use std::fmt::Write as _;

use super::{AssetError, MeshAsset, Rgb};
use crate::geometry::Vec3;

fn malformed(line: usize, reason: impl Into<String>) -> AssetError {
    AssetError::MalformedObj {
        line,
        reason: reason.into(),
    }
}

/// Resolves a 1-based or negative (relative) OBJ index against `len`
/// already-declared elements.
fn resolve_index(token: &str, len: usize, line: usize, what: &str) -> Result<usize, AssetError> {
    let raw: i64 = token
        .parse()
        .map_err(|_| malformed(line, format!("invalid {what} index {token:?}")))?;
    let resolved = match raw {
        0 => None,
        r if r > 0 => Some(r - 1),
        r => Some(len as i64 + r),
    };
    match resolved {
        Some(i) if i >= 0 && (i as usize) < len => Ok(i as usize),
        _ => Err(malformed(
            line,
            format!("{what} index {raw} out of range ({len} defined)"),
        )),
    }
}

fn parse_coords(
    parts: &mut std::str::SplitWhitespace<'_>,
    line: usize,
) -> Result<Vec3, AssetError> {
    let mut c = [0.0f64; 3];
    for slot in &mut c {
        let tok = parts
            .next()
            .ok_or_else(|| malformed(line, "expected 3 coordinates"))?;
        *slot = tok
            .parse()
            .map_err(|_| malformed(line, format!("non-numeric coordinate {tok:?}")))?;
        if !slot.is_finite() {
            return Err(malformed(line, format!("non-finite coordinate {tok:?}")));
        }
    }
    Ok(Vec3::new(c[0], c[1], c[2]))
}

/// Parses OBJ text into a single mesh asset named `name`.
pub fn parse_obj(bytes: &[u8], name: &str) -> Result<MeshAsset, AssetError> {
    let text = std::str::from_utf8(bytes).map_err(|e| malformed(0, format!("not UTF-8: {e}")))?;

    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    // Normal index chosen for each vertex by the faces that reference it.
    let mut vertex_normal: Vec<Option<usize>> = Vec::new();
    let mut faces_with_normals = 0usize;
    let mut faces = 0usize;

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        let Some(keyword) = parts.next() else {
            continue;
        };
        match keyword {
            "v" => {
                vertices.push(parse_coords(&mut parts, line_no)?);
                vertex_normal.push(None);
            }
            "vn" => normals.push(parse_coords(&mut parts, line_no)?.normalized()),
            "f" => {
                let mut corners = Vec::with_capacity(4);
                let mut corner_normals = 0usize;
                for token in parts {
                    let mut fields = token.split('/');
                    let v = resolve_index(
                        fields.next().unwrap_or(""),
                        vertices.len(),
                        line_no,
                        "vertex",
                    )?;
                    let _texcoord = fields.next();
                    if let Some(n) = fields.next().filter(|s| !s.is_empty()) {
                        let n = resolve_index(n, normals.len(), line_no, "normal")?;
                        vertex_normal[v] = Some(n);
                        corner_normals += 1;
                    }
                    corners.push(v as u32);
                }
                if corners.len() < 3 {
                    return Err(malformed(line_no, "face needs at least 3 vertices"));
                }
                faces += 1;
                if corner_normals == corners.len() {
                    faces_with_normals += 1;
                }
                for k in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            // o, g, s, vt, usemtl, mtllib, l, p and anything else.
            _ => {}
        }
    }

    if triangles.is_empty() {
        return Err(malformed(0, "no faces"));
    }

    // Per-vertex normals are kept only when every face supplies them.
    // Vertices no face references get a zero placeholder.
    let used_normals = (faces_with_normals == faces).then(|| {
        vertex_normal
            .iter()
            .map(|n| n.map_or(Vec3::ZERO, |n| normals[n]))
            .collect()
    });

    Ok(MeshAsset {
        name: name.to_string(),
        vertices,
        triangles,
        normals: used_normals,
        color: Rgb::WHITE,
    })
}

/// Serializes an asset back to OBJ. Coordinates use the shortest decimal
/// form that reads back to the same `f64`.
pub fn write_obj(asset: &MeshAsset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "o {}", asset.name);
    for v in &asset.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    if let Some(normals) = &asset.normals {
        for n in normals {
            let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
        }
        for [a, b, c] in &asset.triangles {
            let (a, b, c) = (a + 1, b + 1, c + 1);
            let _ = writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}");
        }
    } else {
        for [a, b, c] in &asset.triangles {
            let _ = writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1);
        }
    }
    out
}
