//! Bounding volume hierarchy over the scene triangles.
//!
//! Built once with a binned surface-area heuristic and traversed with an
//! explicit stack. Hits are ordered by `(distance, triangle index)` so the
//! result is identical to testing every triangle.

use super::geom::{intersect_triangle, Aabb, Vec3};

const LEAF_SIZE: usize = 4;
const BINS: usize = 12;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Triangle {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
}

impl Triangle {
    fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        b.grow(self.v0);
        b.grow(self.v1);
        b.grow(self.v2);
        b
    }

    fn centroid(&self) -> Vec3 {
        (self.v0 + self.v1 + self.v2) / 3.0
    }

    #[inline]
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        intersect_triangle(origin, dir, self.v0, self.v1, self.v2)
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first entry in `order`. Interior: index of the left child.
    start: u32,
    /// Triangle count for leaves, zero for interior nodes.
    count: u32,
    right: u32,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices in leaf order.
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(triangles: &[Triangle]) -> Bvh {
        if triangles.is_empty() {
            return Bvh::default();
        }
        let bounds: Vec<Aabb> = triangles.iter().map(Triangle::bounds).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(Triangle::centroid).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len());
        build_node(&mut nodes, &mut order, 0, triangles.len(), &bounds, &centroids);
        Bvh { nodes, order }
    }

    /// Nearest hit with distance in `(t_min, t_max)`, as `(distance, triangle index)`.
    pub fn nearest(
        &self,
        triangles: &[Triangle],
        origin: Vec3,
        dir: Vec3,
        t_min: f64,
        t_max: f64,
    ) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, usize)> = None;
        let mut limit = t_max;
        let mut stack = [0u32; 64];
        let mut top = 1;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if node.bounds.hit(origin, inv, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &tri in &self.order[s..s + node.count as usize] {
                    let tri = tri as usize;
                    if let Some(t) = triangles[tri].intersect(origin, dir) {
                        if t > t_min && t < t_max && is_better(t, tri, best) {
                            best = Some((t, tri));
                            limit = t;
                        }
                    }
                }
            } else {
                let left = node.start;
                let right = node.right;
                let lt = self.nodes[left as usize].bounds.hit(origin, inv, limit);
                let rt = self.nodes[right as usize].bounds.hit(origin, inv, limit);
                // Push the farther child first so the nearer one is popped next.
                match (lt, rt) {
                    (Some(a), Some(b)) => {
                        let (near, far) = if a <= b { (left, right) } else { (right, left) };
                        stack[top] = far;
                        stack[top + 1] = near;
                        top += 2;
                    }
                    (Some(_), None) => {
                        stack[top] = left;
                        top += 1;
                    }
                    (None, Some(_)) => {
                        stack[top] = right;
                        top += 1;
                    }
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// True if any triangle is hit with distance in `(t_min, t_max)`.
    pub fn any_hit(&self, triangles: &[Triangle], origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = [0u32; 64];
        let mut top = 1;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if node.bounds.hit(origin, inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &tri in &self.order[s..s + node.count as usize] {
                    if let Some(t) = triangles[tri as usize].intersect(origin, dir) {
                        if t > t_min && t < t_max {
                            return true;
                        }
                    }
                }
            } else {
                stack[top] = node.start;
                stack[top + 1] = node.right;
                top += 2;
            }
        }
        false
    }
}

#[inline]
fn is_better(t: f64, tri: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bt, bi)) => t < bt || (t == bt && tri < bi),
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    start: usize,
    end: usize,
    bounds: &[Aabb],
    centroids: &[Vec3],
) -> u32 {
    let index = nodes.len();
    let mut node_bounds = Aabb::empty();
    let mut centroid_bounds = Aabb::empty();
    for &t in &order[start..end] {
        node_bounds = node_bounds.union(&bounds[t as usize]);
        centroid_bounds.grow(centroids[t as usize]);
    }
    // Padding keeps rounding in the slab test from culling a box whose triangle is hit.
    let pad = Vec3::new(1e-7, 1e-7, 1e-7);
    let node_bounds = Aabb::new(node_bounds.min - pad, node_bounds.max + pad);
    nodes.push(Node { bounds: node_bounds, start: start as u32, count: (end - start) as u32, right: 0 });

    let n = end - start;
    if n <= LEAF_SIZE {
        return index as u32;
    }

    let split = sah_split(&order[start..end], bounds, centroids, &centroid_bounds);
    let mid = match split {
        Some((axis, pos)) => {
            let slice = &mut order[start..end];
            let mut i = 0;
            for j in 0..slice.len() {
                if centroids[slice[j] as usize][axis] < pos {
                    slice.swap(i, j);
                    i += 1;
                }
            }
            start + i
        }
        None => start + n / 2,
    };
    let mid = if mid == start || mid == end {
        // Degenerate centroid distribution: fall back to a median split on the widest axis.
        let axis = widest_axis(&centroid_bounds);
        order[start..end].sort_by(|&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        start + n / 2
    } else {
        mid
    };

    let left = build_node(nodes, order, start, mid, bounds, centroids);
    let right = build_node(nodes, order, mid, end, bounds, centroids);
    let node = &mut nodes[index];
    node.start = left;
    node.right = right;
    node.count = 0;
    index as u32
}

fn widest_axis(b: &Aabb) -> usize {
    let e = b.extent();
    if e.x >= e.y && e.x >= e.z {
        0
    } else if e.y >= e.z {
        1
    } else {
        2
    }
}

fn sah_split(tris: &[u32], bounds: &[Aabb], centroids: &[Vec3], cb: &Aabb) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize, f64)> = None;
    for axis in 0..3 {
        let lo = cb.min[axis];
        let hi = cb.max[axis];
        if hi - lo < 1e-12 {
            continue;
        }
        let mut bin_bounds = [Aabb::empty(); BINS];
        let mut bin_counts = [0usize; BINS];
        for &t in tris {
            let c = centroids[t as usize][axis];
            let b = (((c - lo) / (hi - lo)) * BINS as f64) as usize;
            let b = b.min(BINS - 1);
            bin_counts[b] += 1;
            bin_bounds[b] = bin_bounds[b].union(&bounds[t as usize]);
        }
        for split in 1..BINS {
            let (mut lb, mut rb) = (Aabb::empty(), Aabb::empty());
            let (mut lc, mut rc) = (0, 0);
            for b in 0..split {
                lb = lb.union(&bin_bounds[b]);
                lc += bin_counts[b];
            }
            for b in split..BINS {
                rb = rb.union(&bin_bounds[b]);
                rc += bin_counts[b];
            }
            if lc == 0 || rc == 0 {
                continue;
            }
            let cost = lb.surface_area() * lc as f64 + rb.surface_area() * rc as f64;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, axis, lo + (hi - lo) * split as f64 / BINS as f64));
            }
        }
    }
    best.map(|(_, axis, pos)| (axis, pos))
}
