use super::{Aabb, Vec3};

/// Determinant threshold below which a ray is treated as parallel to a
/// triangle's plane.
pub const DETERMINANT_EPSILON: f64 = 1e-12;

/// Triangles with area at or below this (m²) are dropped at ingestion.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// A half-open segment of a ray, `origin + t * direction` for `t` in
/// `[t_min, t_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    /// An unbounded ray. `direction` is normalized.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction: direction.normalized(),
            t_min: 0.0,
            t_max: f64::INFINITY,
        }
    }

    pub fn with_range(mut self, t_min: f64, t_max: f64) -> Self {
        self.t_min = t_min;
        self.t_max = t_max;
        self
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    #[inline]
    pub fn inv_direction(&self) -> Vec3 {
        Vec3::new(
            1.0 / self.direction.x,
            1.0 / self.direction.y,
            1.0 / self.direction.z,
        )
    }
}

/// A scene triangle tagged with the index of the part that owns it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
    pub part_index: u32,
}

impl Triangle {
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3, part_index: u32) -> Self {
        Triangle {
            v0,
            v1,
            v2,
            part_index,
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.v1 - self.v0).cross(self.v2 - self.v0).length()
    }

    pub fn is_degenerate(&self) -> bool {
        let area = self.area();
        area.is_nan() || area <= MIN_TRIANGLE_AREA
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::new(
            self.v0.min(self.v1).min(self.v2),
            self.v0.max(self.v1).max(self.v2),
        )
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v0 + self.v1 + self.v2) / 3.0
    }

    /// Unit geometric normal following the v0, v1, v2 winding.
    pub fn normal(&self) -> Vec3 {
        (self.v1 - self.v0).cross(self.v2 - self.v0).normalized()
    }
}

/// A ray/triangle intersection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    /// Range along the ray (m).
    pub t: f64,
    pub point: Vec3,
    /// Unit geometric normal, flipped to face the ray origin.
    pub normal: Vec3,
    pub triangle_id: u32,
    pub part_index: u32,
    /// Barycentric weights of `v1` and `v2` at the hit point.
    pub u: f64,
    pub v: f64,
}

/// Intersects a ray with a closed triangle (edges and vertices count as
/// inside). Returns `None` for parallel rays and hits outside
/// `[ray.t_min, ray.t_max]`.
#[inline]
pub fn ray_triangle_intersect(ray: &Ray, tri: &Triangle, triangle_id: u32) -> Option<Hit> {
    let e1 = tri.v1 - tri.v0;
    let e2 = tri.v2 - tri.v0;
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < DETERMINANT_EPSILON {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = ray.origin - tri.v0;
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv_det;
    if t < ray.t_min || t > ray.t_max {
        return None;
    }
    let mut normal = e1.cross(e2).normalized();
    if normal.dot(ray.direction) > 0.0 {
        normal = -normal;
    }
    Some(Hit {
        t,
        point: ray.at(t),
        normal,
        triangle_id,
        part_index: tri.part_index,
        u,
        v,
    })
}
