//! Static 3-d tree for nearest-neighbor queries over point sets.

use super::{Aabb, Vec3};

/// Balanced kd-tree stored implicitly: the node for a range is its middle
/// element, with the left and right halves as subtrees.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    ids: Vec<u32>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut items: Vec<(Vec3, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, i as u32))
            .collect();
        let mut axes = vec![0u8; items.len()];
        Self::build(&mut items, &mut axes);
        KdTree {
            points: items.iter().map(|&(p, _)| p).collect(),
            ids: items.iter().map(|&(_, i)| i).collect(),
            axes,
        }
    }

    fn build(items: &mut [(Vec3, u32)], axes: &mut [u8]) {
        if items.len() <= 1 {
            return;
        }
        let axis = Aabb::from_points(items.iter().map(|&(p, _)| p)).longest_axis();
        let mid = items.len() / 2;
        items.select_nth_unstable_by(mid, |a, b| {
            a.0[axis].total_cmp(&b.0[axis]).then(a.1.cmp(&b.1))
        });
        axes[mid] = axis as u8;
        let (lo, rest) = items.split_at_mut(mid);
        let (lo_axes, rest_axes) = axes.split_at_mut(mid);
        Self::build(lo, lo_axes);
        Self::build(&mut rest[1..], &mut rest_axes[1..]);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Closest point to `query` as `(index, distance)`, with `index` into the
    /// slice the tree was built from.
    pub fn nearest(&self, query: Vec3) -> Option<(usize, f64)> {
        self.nearest_excluding(query, None)
    }

    /// Like [`KdTree::nearest`] but never returns the point at `exclude`.
    pub fn nearest_excluding(&self, query: Vec3, exclude: Option<usize>) -> Option<(usize, f64)> {
        let mut best = (u32::MAX, f64::INFINITY);
        let exclude = exclude.map(|e| e as u32);
        self.search(0, self.points.len(), query, exclude, &mut best);
        (best.0 != u32::MAX).then(|| (best.0 as usize, best.1.sqrt()))
    }

    fn search(
        &self,
        lo: usize,
        hi: usize,
        query: Vec3,
        exclude: Option<u32>,
        best: &mut (u32, f64),
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[mid];
        let id = self.ids[mid];
        if Some(id) != exclude {
            let d2 = (p - query).length_squared();
            if d2 < best.1 || (d2 == best.1 && id < best.0) {
                *best = (id, d2);
            }
        }
        let axis = self.axes[mid] as usize;
        let diff = query[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, query, exclude, best);
        if diff * diff <= best.1 {
            self.search(far.0, far.1, query, exclude, best);
        }
    }
}
