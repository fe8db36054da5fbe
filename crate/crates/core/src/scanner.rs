//! Pulse-level simulation of a static terrestrial laser scanner.
//!
//! Each leg sweeps an azimuth-major grid of pulses. A pulse is approximated
//! by a bundle of subrays filling the beam cone; every subray travels through
//! transmissive parts to the first opaque surface within range, and the
//! pulse reports the nearest of those returns. Range noise is drawn from a
//! per-pulse RNG keyed on (seed, leg, azimuth, elevation), so output does not
//! depend on how pulses are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::asset::{ClassLabel, Rgb};
use crate::geometry::{Bvh, GeometryError, Hit, Ray, Vec3};
use crate::pointcloud::{LabeledPoint, PointCloud, Provenance};
use crate::scene::{Material, Scene};
use crate::survey::{Leg, ScannerSettings, Survey};

/// One grid cell of a leg's sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pulse {
    pub leg_index: usize,
    pub azimuth_index: usize,
    pub elevation_index: usize,
    /// Unit central direction of the beam.
    pub direction: Vec3,
}

/// Pulses of one leg, azimuth-major and elevation-minor.
pub fn pulse_grid(
    settings: &ScannerSettings,
    leg_index: usize,
) -> impl Iterator<Item = Pulse> + '_ {
    let rows = settings.elevation_steps();
    (0..settings.azimuth_steps()).flat_map(move |az| {
        (0..rows).map(move |el| Pulse {
            leg_index,
            azimuth_index: az,
            elevation_index: el,
            direction: Vec3::from_spherical(settings.azimuth(az), settings.elevation(el)),
        })
    })
}

/// Subray offsets within the beam cone as (angle from the beam axis,
/// azimuth about the axis), both in radians.
#[derive(Clone, Debug, PartialEq)]
pub struct SubrayPattern {
    pub offsets: Vec<(f64, f64)>,
}

/// Number of subrays on ring `i` (ring 0 is the axial ray).
pub fn ring_size(i: u32) -> usize {
    if i == 0 {
        1
    } else {
        ((std::f64::consts::TAU * i as f64).round() as usize).max(1)
    }
}

/// Concentric-ring sampling of a beam with full divergence angle
/// `divergence_mrad`. Ring `i` of `q - 1` sits at `i / (q - 1)` of the
/// half-angle and holds about `2πi` equally spaced subrays, which keeps the
/// spacing between neighbours close to the ring spacing.
pub fn subray_pattern(divergence_mrad: f64, quality: u32) -> SubrayPattern {
    if quality <= 1 || divergence_mrad <= 0.0 {
        return SubrayPattern {
            offsets: vec![(0.0, 0.0)],
        };
    }
    let half_angle = divergence_mrad * 1e-3 / 2.0;
    let ring_step = half_angle / (quality - 1) as f64;
    let mut offsets = vec![(0.0, 0.0)];
    for ring in 1..quality {
        let n = ring_size(ring);
        let angle = ring as f64 * ring_step;
        offsets.extend((0..n).map(|k| (angle, std::f64::consts::TAU * k as f64 / n as f64)));
    }
    SubrayPattern { offsets }
}

impl SubrayPattern {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Unit subray directions around the unit beam axis `axis`.
    pub fn directions(&self, axis: Vec3) -> impl Iterator<Item = Vec3> + '_ {
        let (u, v) = axis.orthonormal_basis();
        self.offsets.iter().map(move |&(angle, azimuth)| {
            if angle == 0.0 {
                return axis;
            }
            let (sa, ca) = angle.sin_cos();
            let (sz, cz) = azimuth.sin_cos();
            (axis * ca + (u * cz + v * sz) * sa).normalized()
        })
    }
}

/// Per-part attributes the simulator attaches to returns.
#[derive(Clone, Debug, PartialEq)]
pub struct PartInfo {
    pub label: ClassLabel,
    pub color: Rgb,
    pub material: Material,
}

/// A scene compiled for ray casting. Immutable and shareable across threads.
#[derive(Clone, Debug)]
pub struct SceneGeometry {
    pub bvh: Bvh,
    pub parts: Vec<PartInfo>,
    /// Vertex normals per triangle id, when the source asset had them.
    shading: Vec<Option<[Vec3; 3]>>,
    has_transmissive: bool,
}

impl SceneGeometry {
    pub fn new(scene: &Scene) -> Result<Self, GeometryError> {
        let (triangles, shading) = scene.triangles_with_normals();
        let bvh = Bvh::build(triangles)?;
        let parts: Vec<PartInfo> = scene
            .parts
            .iter()
            .map(|p| PartInfo {
                label: p.label.clone(),
                color: p.asset.color,
                material: p.material,
            })
            .collect();
        let has_transmissive = parts.iter().any(|p| p.material == Material::Transmissive);
        Ok(SceneGeometry {
            bvh,
            parts,
            shading,
            has_transmissive,
        })
    }

    /// Nearest opaque surface along `ray`, passing through transmissive
    /// parts.
    pub fn first_opaque_hit(&self, ray: &Ray) -> Option<Hit> {
        if self.has_transmissive {
            self.bvh.first_hit_where(ray, |tri| {
                self.parts[tri.part_index as usize].material == Material::Opaque
            })
        } else {
            self.bvh.first_hit(ray)
        }
    }

    /// Interpolated vertex normal at a hit if available, else the geometric
    /// normal. Always faces the ray origin.
    fn surface_normal(&self, hit: &Hit, direction: Vec3) -> Vec3 {
        let Some([n0, n1, n2]) = self.shading[hit.triangle_id as usize] else {
            return hit.normal;
        };
        let n = (n0 * (1.0 - hit.u - hit.v) + n1 * hit.u + n2 * hit.v).normalized();
        if n.length_squared() == 0.0 {
            return hit.normal;
        }
        if n.dot(direction) > 0.0 {
            -n
        } else {
            n
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream key for one pulse.
pub fn pulse_key(seed: u64, leg: usize, azimuth: usize, elevation: usize) -> u64 {
    let mut k = splitmix64(seed);
    for v in [leg, azimuth, elevation] {
        k = splitmix64(k ^ v as u64);
    }
    k
}

/// Simulates one pulse. Returns the nearest opaque return over all subrays,
/// with its range perturbed by Gaussian noise, or `None` when nothing opaque
/// lies within `max_range`.
pub fn simulate_pulse(
    geometry: &SceneGeometry,
    origin: Vec3,
    pulse: &Pulse,
    pattern: &SubrayPattern,
    settings: &ScannerSettings,
    stream_key: u64,
) -> Option<LabeledPoint> {
    let mut best: Option<(Hit, Vec3)> = None;
    for direction in pattern.directions(pulse.direction) {
        let ray = Ray {
            origin,
            direction,
            t_min: 0.0,
            t_max: best.as_ref().map_or(settings.max_range, |(h, _)| h.t),
        };
        if let Some(hit) = geometry.first_opaque_hit(&ray) {
            if best.as_ref().is_none_or(|(b, _)| hit.t < b.t) {
                best = Some((hit, direction));
            }
        }
    }
    let (hit, direction) = best?;
    let range = if settings.range_noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_key);
        let z: f64 = StandardNormal.sample(&mut rng);
        hit.t + settings.range_noise_sigma * z
    } else {
        hit.t
    };
    let part = &geometry.parts[hit.part_index as usize];
    Some(LabeledPoint {
        position: origin + direction * range,
        normal: geometry.surface_normal(&hit, direction),
        label: part.label.id,
        color: part.color,
    })
}

/// Scans one leg. Points come back in pulse-grid order; the work is spread
/// over the current rayon pool one azimuth column at a time.
pub fn simulate_leg(geometry: &SceneGeometry, survey: &Survey, leg: &Leg) -> PointCloud {
    let settings = survey.settings_for(leg);
    let pattern = subray_pattern(settings.beam_divergence, settings.beam_sample_quality);
    let rows = settings.elevation_steps();
    let columns: Vec<Vec<LabeledPoint>> = (0..settings.azimuth_steps())
        .into_par_iter()
        .map(|az| {
            let azimuth = settings.azimuth(az);
            (0..rows)
                .filter_map(|el| {
                    let pulse = Pulse {
                        leg_index: leg.index,
                        azimuth_index: az,
                        elevation_index: el,
                        direction: Vec3::from_spherical(azimuth, settings.elevation(el)),
                    };
                    let key = pulse_key(survey.seed, leg.index, az, el);
                    simulate_pulse(geometry, leg.position, &pulse, &pattern, settings, key)
                })
                .collect()
        })
        .collect();
    PointCloud {
        points: columns.concat(),
        provenance: Some(Provenance {
            survey: survey.name.clone(),
            leg: leg.index,
        }),
    }
}

/// One cloud per leg, in leg order. Empty clouds keep their slot.
pub fn simulate_survey(geometry: &SceneGeometry, survey: &Survey) -> Vec<PointCloud> {
    survey
        .legs
        .iter()
        .map(|leg| simulate_leg(geometry, survey, leg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asset::{parse_obj, ClassLabel, LabeledAsset};
    use crate::scene::{Scene, ScenePart};
    use crate::survey::preset;
    use std::sync::Arc;

    fn quad(half: f64, z: f64) -> String {
        format!("v -{half} -{half} {z}\nv {half} -{half} {z}\nv {half} {half} {z}\nv -{half} {half} {z}\nf 1 2 3 4\n")
    }

    fn part(src: &str, id: u32, name: &str, material: Material) -> ScenePart {
        let asset = parse_obj(src.as_bytes(), name).unwrap();
        ScenePart {
            source: format!("{name}.obj").into(),
            asset: Arc::new(asset),
            translation: Vec3::ZERO,
            label: ClassLabel {
                id,
                name: name.into(),
            },
            part_index: 0,
            material,
        }
    }

    fn down_settings() -> ScannerSettings {
        ScannerSettings {
            horiz_start: 0.0,
            horiz_end: 1.0,
            horiz_res: 1.0,
            vert_start: -90.0,
            vert_end: -90.0,
            vert_res: 1.0,
            max_range: 100.0,
            range_noise_sigma: 0.0,
            beam_divergence: 0.0,
            beam_sample_quality: 1,
        }
    }

    fn straight_down() -> Pulse {
        Pulse {
            leg_index: 0,
            azimuth_index: 0,
            elevation_index: 0,
            direction: -Vec3::Z,
        }
    }

    #[test]
    fn grid_counts() {
        let s = preset("generic-lidar").unwrap();
        assert_eq!(pulse_grid(&s, 0).count(), 7200);
        let mut s = down_settings();
        (
            s.horiz_start,
            s.horiz_end,
            s.horiz_res,
            s.vert_start,
            s.vert_end,
        ) = (0.0, 90.0, 1.0, 0.0, 0.0);
        assert_eq!(pulse_grid(&s, 0).count(), 90);
        (s.horiz_end, s.vert_end) = (1.0, 10.0);
        let pulses: Vec<_> = pulse_grid(&s, 2).collect();
        assert_eq!(pulses.len(), 11);
        assert!(pulses
            .iter()
            .all(|p| p.leg_index == 2 && p.azimuth_index == 0));
        assert!((pulses[10].direction.z - 10f64.to_radians().sin()).abs() < 1e-15);
    }

    #[test]
    fn grid_is_azimuth_major() {
        let mut s = down_settings();
        (s.horiz_end, s.vert_start, s.vert_end) = (3.0, 0.0, 1.0);
        let idx: Vec<_> = pulse_grid(&s, 0)
            .map(|p| (p.azimuth_index, p.elevation_index))
            .collect();
        assert_eq!(idx, vec![(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]);
    }

    #[test]
    fn pattern_sizes() {
        assert_eq!(subray_pattern(0.3, 1).len(), 1);
        assert_eq!(subray_pattern(0.0, 5).len(), 1);
        assert_eq!(subray_pattern(0.3, 3).len(), 20);
        let q2 = subray_pattern(0.3, 2);
        assert_eq!(q2.len(), 7);
        assert!(q2.offsets[1..]
            .iter()
            .all(|&(a, _)| (a - 0.15e-3).abs() < 1e-18));
    }

    #[test]
    fn pattern_directions_sit_on_cone() {
        let axis = Vec3::new(0.3, -0.2, 0.9).normalized();
        let pattern = subray_pattern(2.0, 4);
        for (d, &(angle, _)) in pattern.directions(axis).zip(&pattern.offsets) {
            assert!((d.length() - 1.0).abs() < 1e-12);
            assert!((d.dot(axis).clamp(-1.0, 1.0).acos() - angle).abs() < 1e-9);
        }
    }

    #[test]
    fn pulse_keys_differ_per_cell() {
        let keys = [
            pulse_key(42, 0, 0, 0),
            pulse_key(42, 0, 0, 1),
            pulse_key(42, 0, 1, 0),
            pulse_key(42, 1, 0, 0),
            pulse_key(43, 0, 0, 0),
        ];
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                assert_ne!(keys[i], keys[j]);
            }
        }
    }

    fn scene(parts: Vec<ScenePart>) -> SceneGeometry {
        SceneGeometry::new(&Scene::from_parts("t", parts).unwrap()).unwrap()
    }

    #[test]
    fn downward_pulse_hits_ground() {
        let geo = scene(vec![part(&quad(10.0, 0.0), 0, "ground", Material::Opaque)]);
        let s = down_settings();
        let p = simulate_pulse(
            &geo,
            Vec3::new(0.0, 0.0, 10.0),
            &straight_down(),
            &subray_pattern(0.0, 1),
            &s,
            1,
        )
        .unwrap();
        assert!(p.position.distance(Vec3::ZERO) < 1e-12);
        assert_eq!(p.label, 0);
        assert_eq!(p.normal, Vec3::Z);
    }

    #[test]
    fn transmissive_pane_is_skipped() {
        let geo = scene(vec![
            part(&quad(10.0, 0.0), 0, "ground", Material::Opaque),
            part(&quad(10.0, 5.0), 1, "glass", Material::Transmissive),
        ]);
        let p = simulate_pulse(
            &geo,
            Vec3::new(0.1, 0.2, 10.0),
            &straight_down(),
            &subray_pattern(0.0, 1),
            &down_settings(),
            1,
        )
        .unwrap();
        assert_eq!(p.label, 0);
        assert!(p.position.z.abs() < 1e-12);

        let opaque = scene(vec![
            part(&quad(10.0, 0.0), 0, "ground", Material::Opaque),
            part(&quad(10.0, 5.0), 1, "glass", Material::Opaque),
        ]);
        let p = simulate_pulse(
            &opaque,
            Vec3::new(0.1, 0.2, 10.0),
            &straight_down(),
            &subray_pattern(0.0, 1),
            &down_settings(),
            1,
        )
        .unwrap();
        assert_eq!(p.label, 1);
    }

    #[test]
    fn target_beyond_max_range_is_lost() {
        let wall = "v 150 -10 -10\nv 150 10 -10\nv 150 10 10\nv 150 -10 10\nf 1 2 3 4\n";
        let geo = scene(vec![
            part(&quad(1.0, -50.0), 0, "ground", Material::Opaque),
            part(wall, 1, "wall", Material::Opaque),
        ]);
        let s = ScannerSettings {
            max_range: 100.0,
            ..down_settings()
        };
        let pulse = Pulse {
            direction: Vec3::X,
            ..straight_down()
        };
        assert!(simulate_pulse(&geo, Vec3::ZERO, &pulse, &subray_pattern(0.0, 1), &s, 1).is_none());
        let s = ScannerSettings {
            max_range: 200.0,
            ..s
        };
        assert_eq!(
            simulate_pulse(&geo, Vec3::ZERO, &pulse, &subray_pattern(0.0, 1), &s, 1)
                .unwrap()
                .label,
            1
        );
    }

    #[test]
    fn noise_is_keyed_and_along_ray() {
        let geo = scene(vec![part(&quad(10.0, 0.0), 0, "ground", Material::Opaque)]);
        let s = ScannerSettings {
            range_noise_sigma: 0.01,
            ..down_settings()
        };
        let origin = Vec3::new(0.0, 0.0, 10.0);
        let pattern = subray_pattern(0.0, 1);
        let a = simulate_pulse(&geo, origin, &straight_down(), &pattern, &s, 7).unwrap();
        let b = simulate_pulse(&geo, origin, &straight_down(), &pattern, &s, 7).unwrap();
        let c = simulate_pulse(&geo, origin, &straight_down(), &pattern, &s, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.position, c.position);
        assert_eq!((a.position.x, a.position.y), (0.0, 0.0));
        assert!(a.position.z.abs() < 0.1);
    }

    #[test]
    fn vertex_normals_are_interpolated() {
        let tilted =
            "v -10 -10 0\nv 10 -10 0\nv 10 10 0\nv -10 10 0\nvn 0 1 1\nf 1//1 2//1 3//1 4//1\n";
        let geo = scene(vec![part(tilted, 0, "ground", Material::Opaque)]);
        let p = simulate_pulse(
            &geo,
            Vec3::new(0.0, 0.0, 10.0),
            &straight_down(),
            &subray_pattern(0.0, 1),
            &down_settings(),
            1,
        )
        .unwrap();
        let expected = Vec3::new(0.0, 1.0, 1.0).normalized();
        assert!(p.normal.distance(expected) < 1e-12);
    }

    #[test]
    fn ground_only_scan_labels_everything_ground() {
        let ground = LabeledAsset {
            path: "g.obj".into(),
            asset: parse_obj(quad(100.0, 0.0).as_bytes(), "g").unwrap(),
            label: ClassLabel {
                id: 0,
                name: "ground".into(),
            },
        };
        let sc = Scene::from_parts(
            "g",
            vec![ScenePart {
                source: ground.path.clone(),
                asset: Arc::new(ground.asset.clone()),
                translation: Vec3::ZERO,
                label: ground.label.clone(),
                part_index: 0,
                material: Material::Opaque,
            }],
        )
        .unwrap();
        let geo = SceneGeometry::new(&sc).unwrap();
        let settings = ScannerSettings {
            horiz_start: 0.0,
            horiz_end: 360.0,
            horiz_res: 10.0,
            vert_start: -80.0,
            vert_end: -30.0,
            vert_res: 10.0,
            ..down_settings()
        };
        let survey = Survey {
            name: "s".into(),
            scene_path: "scene.xml".into(),
            scene_id: "g".into(),
            settings,
            legs: vec![Leg {
                position: Vec3::new(0.0, 0.0, 2.0),
                settings: None,
                index: 0,
            }],
            seed: 1,
        };
        let cloud = simulate_leg(&geo, &survey, &survey.legs[0]);
        assert_eq!(cloud.len(), settings.pulse_count());
        assert!(cloud
            .points
            .iter()
            .all(|p| p.label == 0 && p.position.z.abs() < 1e-9));
    }
}
