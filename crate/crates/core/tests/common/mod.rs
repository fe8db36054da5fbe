#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthscan_core::asset::{palette_color, parse_obj, ClassLabel, MeshAsset};
use synthscan_core::geometry::{Ray, Triangle, Vec3};
use synthscan_core::scene::{Material, ScanPosition, Scene, ScenePart};
use synthscan_core::survey::{ScannerSettings, Survey};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::new(
        rng.gen_range(-half..half),
        rng.gen_range(-half..half),
        rng.gen_range(-half..half),
    )
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = random_point(rng, 1.0);
        let l = v.length();
        if l > 0.1 && l <= 1.0 {
            return v / l;
        }
    }
}

/// Random non-degenerate triangles of edge length up to `size` inside a cube
/// of half-width `half`.
pub fn random_triangles(rng: &mut ChaCha8Rng, n: usize, half: f64, size: f64) -> Vec<Triangle> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let c = random_point(rng, half);
        let t = Triangle::new(
            c + random_point(rng, size / 2.0),
            c + random_point(rng, size / 2.0),
            c + random_point(rng, size / 2.0),
            (out.len() % 7) as u32,
        );
        if t.area() > 1e-6 {
            out.push(t);
        }
    }
    out
}

/// Ray from a random origin aimed at a random point inside the cube.
pub fn random_ray(rng: &mut ChaCha8Rng, half: f64) -> Ray {
    let o = random_point(rng, half * 1.5);
    let target = random_point(rng, half);
    Ray::new(o, target - o)
}

pub fn box_obj(min: Vec3, max: Vec3) -> String {
    let (a, b) = (min, max);
    let v = [
        (a.x, a.y, a.z),
        (b.x, a.y, a.z),
        (b.x, b.y, a.z),
        (a.x, b.y, a.z),
        (a.x, a.y, b.z),
        (b.x, a.y, b.z),
        (b.x, b.y, b.z),
        (a.x, b.y, b.z),
    ];
    let mut s: String = v
        .iter()
        .map(|(x, y, z)| format!("v {x} {y} {z}\n"))
        .collect();
    s.push_str("f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n");
    s
}

pub fn quad_obj(half: f64, z: f64) -> String {
    format!("v -{half} -{half} {z}\nv {half} -{half} {z}\nv {half} {half} {z}\nv -{half} {half} {z}\nf 1 2 3 4\n")
}

pub fn mesh(src: &str, id: u32) -> MeshAsset {
    let mut m = parse_obj(src.as_bytes(), "m").unwrap();
    m.color = palette_color(id);
    m
}

pub fn part(src: &str, id: u32, name: &str, material: Material) -> ScenePart {
    ScenePart {
        source: format!("{name}.obj").into(),
        asset: Arc::new(mesh(src, id)),
        translation: Vec3::ZERO,
        label: ClassLabel {
            id,
            name: name.into(),
        },
        part_index: 0,
        material,
    }
}

pub fn scene(parts: Vec<ScenePart>) -> Scene {
    Scene::from_parts("test", parts).unwrap()
}

/// Euclidean distance from `p` to the closed triangle, by projection onto
/// the plane and clamping to edges.
pub fn point_triangle_distance(p: Vec3, t: &Triangle) -> f64 {
    let n = (t.v1 - t.v0).cross(t.v2 - t.v0).normalized();
    let d = (p - t.v0).dot(n);
    let q = p - n * d;
    let inside = [(t.v0, t.v1), (t.v1, t.v2), (t.v2, t.v0)]
        .iter()
        .all(|&(a, b)| (b - a).cross(q - a).dot(n) >= 0.0);
    if inside {
        return d.abs();
    }
    [(t.v0, t.v1), (t.v1, t.v2), (t.v2, t.v0)]
        .iter()
        .map(|&(a, b)| {
            let ab = b - a;
            let s = ((p - a).dot(ab) / ab.length_squared()).clamp(0.0, 1.0);
            p.distance(a + ab * s)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Whether the open segment (a, b) passes through the closed box.
pub fn segment_crosses_box(a: Vec3, b: Vec3, min: Vec3, max: Vec3) -> bool {
    let d = b - a;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for axis in 0..3 {
        if d[axis] == 0.0 {
            if a[axis] < min[axis] || a[axis] > max[axis] {
                return false;
            }
            continue;
        }
        let t0 = (min[axis] - a[axis]) / d[axis];
        let t1 = (max[axis] - a[axis]) / d[axis];
        lo = lo.max(t0.min(t1));
        hi = hi.min(t0.max(t1));
    }
    lo < hi && hi > 0.0 && lo < 1.0
}

pub fn sweep(h: (f64, f64, f64), v: (f64, f64, f64)) -> ScannerSettings {
    ScannerSettings {
        horiz_start: h.0,
        horiz_end: h.1,
        horiz_res: h.2,
        vert_start: v.0,
        vert_end: v.1,
        vert_res: v.2,
        max_range: 100.0,
        range_noise_sigma: 0.0,
        beam_divergence: 0.0,
        beam_sample_quality: 1,
    }
}

pub fn survey_at(settings: ScannerSettings, positions: &[Vec3], seed: u64) -> Survey {
    let ring: Vec<ScanPosition> = positions
        .iter()
        .enumerate()
        .map(|(index, &position)| ScanPosition { position, index })
        .collect();
    Survey::from_positions("test", "scene.xml", "test", settings, &ring, seed)
}
