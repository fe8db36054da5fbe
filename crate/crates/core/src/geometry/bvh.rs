//! Bounding volume hierarchy over a triangle soup.
//!
//! Built top-down by median split on the longest axis of the centroid bounds.
//! The tree is immutable after construction and all queries take `&self`, so
//! one `Bvh` can serve any number of threads.

use super::{ray_triangle_intersect, Aabb, GeometryError, Hit, Ray, Triangle};

/// Default maximum number of triangles per leaf.
pub const DEFAULT_LEAF_SIZE: usize = 8;

/// Hits closer than this along a ray (m) are reported once.
pub const HIT_MERGE_DISTANCE: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    /// Children are indices into the node array.
    Internal { left: u32, right: u32 },
    /// `start..start + count` indexes the triangle order permutation.
    Leaf { start: u32, count: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BvhNode {
    pub aabb: Aabb,
    pub kind: NodeKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    /// Triangles in input order; a triangle's id is its index here.
    triangles: Vec<Triangle>,
    /// Leaf ranges index into this permutation of triangle ids.
    order: Vec<u32>,
    /// `triangles` permuted by `order`, for cache-friendly leaf scans.
    leaf_triangles: Vec<Triangle>,
}

struct Builder<'a> {
    bounds: &'a [Aabb],
    centroids: &'a [super::Vec3],
    leaf_size: usize,
    nodes: Vec<BvhNode>,
}

impl Builder<'_> {
    fn build(&mut self, ids: &mut [u32], start: usize) -> u32 {
        let aabb = ids
            .iter()
            .fold(Aabb::EMPTY, |b, &i| b.union(self.bounds[i as usize]));
        let index = self.nodes.len() as u32;
        if ids.len() <= self.leaf_size {
            self.nodes.push(BvhNode {
                aabb,
                kind: NodeKind::Leaf {
                    start: start as u32,
                    count: ids.len() as u32,
                },
            });
            return index;
        }

        let centroid_bounds = Aabb::from_points(ids.iter().map(|&i| self.centroids[i as usize]));
        let axis = centroid_bounds.longest_axis();
        let mid = ids.len() / 2;
        let centroids = self.centroids;
        ids.select_nth_unstable_by(mid, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });

        // Reserve our slot before the children so the root stays at 0.
        self.nodes.push(BvhNode {
            aabb,
            kind: NodeKind::Leaf { start: 0, count: 0 },
        });
        let (lo, hi) = ids.split_at_mut(mid);
        let left = self.build(lo, start);
        let right = self.build(hi, start + mid);
        self.nodes[index as usize].kind = NodeKind::Internal { left, right };
        index
    }
}

impl Bvh {
    pub fn build(triangles: Vec<Triangle>) -> Result<Self, GeometryError> {
        Self::build_with_leaf_size(triangles, DEFAULT_LEAF_SIZE)
    }

    /// Builds with an explicit leaf capacity (clamped to at least 1).
    pub fn build_with_leaf_size(
        triangles: Vec<Triangle>,
        leaf_size: usize,
    ) -> Result<Self, GeometryError> {
        if triangles.is_empty() {
            return Err(GeometryError::EmptyScene);
        }
        let bounds: Vec<Aabb> = triangles.iter().map(Triangle::aabb).collect();
        let centroids: Vec<_> = bounds.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut builder = Builder {
            bounds: &bounds,
            centroids: &centroids,
            leaf_size: leaf_size.max(1),
            nodes: Vec::with_capacity(2 * triangles.len() / leaf_size.max(1) + 1),
        };
        builder.build(&mut order, 0);
        let leaf_triangles = order.iter().map(|&i| triangles[i as usize]).collect();
        Ok(Bvh {
            nodes: builder.nodes,
            triangles,
            order,
            leaf_triangles,
        })
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn root(&self) -> &BvhNode {
        &self.nodes[0]
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle_order(&self) -> &[u32] {
        &self.order
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].aabb
    }

    /// Nearest intersection; equal ranges resolve to the smallest triangle id.
    pub fn first_hit(&self, ray: &Ray) -> Option<Hit> {
        self.first_hit_where(ray, |_| true)
    }

    /// Nearest intersection among triangles accepted by `accept`.
    pub fn first_hit_where<F>(&self, ray: &Ray, accept: F) -> Option<Hit>
    where
        F: Fn(&Triangle) -> bool,
    {
        let inv_dir = ray.inv_direction();
        let mut best: Option<Hit> = None;
        let mut limit = *ray;
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        if let Some(t) = self.nodes[0].aabb.intersect(ray, inv_dir, ray.t_max) {
            stack.push((0, t));
        }
        while let Some((node_index, entry)) = stack.pop() {
            if entry > limit.t_max {
                continue;
            }
            match self.nodes[node_index as usize].kind {
                NodeKind::Leaf { start, count } => {
                    let range = start as usize..(start + count) as usize;
                    for (tri, &id) in self.leaf_triangles[range.clone()]
                        .iter()
                        .zip(&self.order[range])
                    {
                        let Some(hit) = ray_triangle_intersect(&limit, tri, id) else {
                            continue;
                        };
                        let closer = match &best {
                            None => true,
                            Some(b) => hit.t < b.t || (hit.t == b.t && id < b.triangle_id),
                        };
                        if closer && accept(tri) {
                            limit.t_max = hit.t;
                            best = Some(hit);
                        }
                    }
                }
                NodeKind::Internal { left, right } => {
                    let tl = self.nodes[left as usize]
                        .aabb
                        .intersect(ray, inv_dir, limit.t_max);
                    let tr = self.nodes[right as usize]
                        .aabb
                        .intersect(ray, inv_dir, limit.t_max);
                    match (tl, tr) {
                        (Some(a), Some(b)) if a <= b => {
                            stack.push((right, b));
                            stack.push((left, a));
                        }
                        (Some(a), Some(b)) => {
                            stack.push((left, a));
                            stack.push((right, b));
                        }
                        (Some(a), None) => stack.push((left, a)),
                        (None, Some(b)) => stack.push((right, b)),
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }

    /// Every intersection in `[t_min, t_max]`, by strictly ascending range.
    ///
    /// Hits are grouped greedily from the nearest: a hit less than
    /// [`HIT_MERGE_DISTANCE`] beyond the first hit of the current group joins
    /// it, and each group reports its smallest triangle id. This collapses the
    /// duplicate hits a ray produces on an edge shared by two triangles.
    pub fn ordered_hits(&self, ray: &Ray) -> Vec<Hit> {
        let inv_dir = ray.inv_direction();
        let mut hits = Vec::new();
        let mut stack: Vec<u32> = vec![0];
        while let Some(node_index) = stack.pop() {
            let node = &self.nodes[node_index as usize];
            if node.aabb.intersect(ray, inv_dir, ray.t_max).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    let range = start as usize..(start + count) as usize;
                    for (tri, &id) in self.leaf_triangles[range.clone()]
                        .iter()
                        .zip(&self.order[range])
                    {
                        if let Some(hit) = ray_triangle_intersect(ray, tri, id) {
                            hits.push(hit);
                        }
                    }
                }
                NodeKind::Internal { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        merge_ordered_hits(hits)
    }

    /// Structural check: every triangle sits in exactly one leaf and every
    /// node's box contains the boxes of all triangles below it.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = vec![0u32; self.triangles.len()];
        self.validate_node(0, &mut seen)?;
        if let Some(id) = seen.iter().position(|&c| c != 1) {
            return Err(format!("triangle {id} appears in {} leaves", seen[id]));
        }
        Ok(())
    }

    fn validate_node(&self, index: u32, seen: &mut [u32]) -> Result<Vec<u32>, String> {
        let node = &self.nodes[index as usize];
        let ids: Vec<u32> = match node.kind {
            NodeKind::Leaf { start, count } => {
                let ids = self.order[start as usize..(start + count) as usize].to_vec();
                for &id in &ids {
                    seen[id as usize] += 1;
                }
                ids
            }
            NodeKind::Internal { left, right } => {
                let mut ids = self.validate_node(left, seen)?;
                ids.extend(self.validate_node(right, seen)?);
                ids
            }
        };
        for &id in &ids {
            if !node.aabb.contains(&self.triangles[id as usize].aabb()) {
                return Err(format!("node {index} does not contain triangle {id}"));
            }
        }
        Ok(ids)
    }
}

/// Sorts hits by (range, triangle id) and applies the merge rule of
/// [`Bvh::ordered_hits`].
pub fn merge_ordered_hits(mut hits: Vec<Hit>) -> Vec<Hit> {
    hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.triangle_id.cmp(&b.triangle_id)));
    let mut merged: Vec<Hit> = Vec::with_capacity(hits.len());
    let mut group_start = f64::NEG_INFINITY;
    for hit in hits {
        if hit.t - group_start < HIT_MERGE_DISTANCE {
            let rep = merged.last_mut().expect("group has a representative");
            if hit.triangle_id < rep.triangle_id {
                *rep = hit;
            }
        } else {
            group_start = hit.t;
            merged.push(hit);
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn tri_at(x: f64, part: u32) -> Triangle {
        Triangle::new(
            Vec3::new(x, 0.0, 0.0),
            Vec3::new(x + 1.0, 0.0, 0.0),
            Vec3::new(x, 1.0, 0.0),
            part,
        )
    }

    fn square(z: f64, part: u32) -> [Triangle; 2] {
        let a = Vec3::new(-1.0, -1.0, z);
        let b = Vec3::new(1.0, -1.0, z);
        let c = Vec3::new(1.0, 1.0, z);
        let d = Vec3::new(-1.0, 1.0, z);
        [Triangle::new(a, b, c, part), Triangle::new(a, c, d, part)]
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(Bvh::build(vec![]), Err(GeometryError::EmptyScene));
    }

    #[test]
    fn single_triangle_is_one_leaf() {
        let tri = tri_at(0.0, 0);
        let bvh = Bvh::build(vec![tri]).unwrap();
        assert_eq!(bvh.nodes().len(), 1);
        assert_eq!(bvh.root().aabb, tri.aabb());
        assert_eq!(bvh.root().kind, NodeKind::Leaf { start: 0, count: 1 });
    }

    #[test]
    fn two_disjoint_triangles_split_on_x() {
        let bvh = Bvh::build_with_leaf_size(vec![tri_at(5.0, 0), tri_at(0.0, 1)], 1).unwrap();
        let NodeKind::Internal { left, right } = bvh.root().kind else {
            panic!("root should be internal");
        };
        let l = bvh.nodes()[left as usize];
        let r = bvh.nodes()[right as usize];
        assert!(matches!(l.kind, NodeKind::Leaf { count: 1, .. }));
        assert!(matches!(r.kind, NodeKind::Leaf { count: 1, .. }));
        assert!(l.aabb.max.x <= r.aabb.min.x);
        assert_eq!(bvh.triangle_order(), &[1, 0]);
        bvh.validate().unwrap();
    }

    #[test]
    fn ground_plane_hit_from_above() {
        let bvh = Bvh::build(square(0.0, 0).to_vec()).unwrap();
        let hit = bvh
            .first_hit(&Ray::new(Vec3::new(0.0, 0.0, 10.0), -Vec3::Z))
            .unwrap();
        assert_eq!(hit.t, 10.0);
    }

    #[test]
    fn two_planes_give_two_ordered_hits() {
        let mut tris = square(1.0, 0).to_vec();
        tris.extend(square(2.0, 1));
        let bvh = Bvh::build(tris).unwrap();
        let ray = Ray::new(Vec3::new(0.3, 0.2, 5.0), -Vec3::Z);
        let hits = bvh.ordered_hits(&ray);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].t, 3.0);
        assert_eq!(hits[0].part_index, 1);
        assert_eq!(hits[1].t, 4.0);
        let miss = Ray::new(Vec3::new(3.0, 0.0, 5.0), -Vec3::Z);
        assert!(bvh.ordered_hits(&miss).is_empty());
    }

    #[test]
    fn shared_diagonal_reports_once() {
        let bvh = Bvh::build(square(0.0, 0).to_vec()).unwrap();
        // (0.5, 0.5) lies on the diagonal shared by both triangles.
        let ray = Ray::new(Vec3::new(0.5, 0.5, 1.0), -Vec3::Z);
        let hits = bvh.ordered_hits(&ray);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].triangle_id, 0);
        assert_eq!(bvh.first_hit(&ray).unwrap().triangle_id, 0);
    }

    #[test]
    fn filtered_first_hit_skips_rejected() {
        let mut tris = square(1.0, 1).to_vec();
        tris.extend(square(0.0, 0));
        let bvh = Bvh::build(tris).unwrap();
        let ray = Ray::new(Vec3::new(0.1, 0.2, 5.0), -Vec3::Z);
        assert_eq!(bvh.first_hit(&ray).unwrap().part_index, 1);
        let hit = bvh.first_hit_where(&ray, |t| t.part_index == 0).unwrap();
        assert_eq!(hit.part_index, 0);
        assert_eq!(hit.t, 5.0);
    }
}
