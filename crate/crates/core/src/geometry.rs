//! Small planar geometry kit shared by the mesh, forcing and estimator code.

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Twice the signed area of `(a, b, c)`; positive for counter-clockwise order.
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

#[inline]
pub fn triangle_area(t: &[Point; 3]) -> f64 {
    0.5 * orient(t[0], t[1], t[2])
}

/// Axis-aligned bounding box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn of_points(pts: &[Point]) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in pts {
            for k in 0..2 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Aabb { min, max }
    }

    pub fn inflate(self, by: f64) -> Self {
        Aabb {
            min: [self.min[0] - by, self.min[1] - by],
            max: [self.max[0] + by, self.max[1] + by],
        }
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: [self.min[0].min(o.min[0]), self.min[1].min(o.min[1])],
            max: [self.max[0].max(o.max[0]), self.max[1].max(o.max[1])],
        }
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min[0] <= o.max[0] && o.min[0] <= self.max[0] && self.min[1] <= o.max[1] && o.min[1] <= self.max[1]
    }

    /// Euclidean gap between two boxes, zero when they overlap.
    pub fn distance(&self, o: &Aabb) -> f64 {
        let dx = (o.min[0] - self.max[0]).max(self.min[0] - o.max[0]).max(0.0);
        let dy = (o.min[1] - self.max[1]).max(self.min[1] - o.max[1]).max(0.0);
        dx.hypot(dy)
    }
}

/// Closed point-in-triangle test for a counter-clockwise triangle.
pub fn point_in_triangle(p: Point, t: &[Point; 3]) -> bool {
    // scale-aware slack so points on an edge count as inside
    let eps = 1e-14 * (dist(t[0], t[1]) + dist(t[1], t[2]) + dist(t[2], t[0])).powi(2);
    orient(t[0], t[1], p) >= -eps && orient(t[1], t[2], p) >= -eps && orient(t[2], t[0], p) >= -eps
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(p, add(a, scale(ab, t)))
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: Point, b: Point, p: Point, o: f64| {
        o == 0.0
            && p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

pub fn segment_segment_distance(p1: Point, p2: Point, q1: Point, q2: Point) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}

/// Whether the segment `[a, b]` meets the closed triangle.
pub fn segment_meets_triangle(a: Point, b: Point, t: &[Point; 3]) -> bool {
    point_in_triangle(a, t)
        || point_in_triangle(b, t)
        || (0..3).any(|i| segments_intersect(a, b, t[i], t[(i + 1) % 3]))
}

/// Euclidean distance between the segment `[a, b]` and the closed triangle.
pub fn segment_triangle_distance(a: Point, b: Point, t: &[Point; 3]) -> f64 {
    if segment_meets_triangle(a, b, t) {
        return 0.0;
    }
    (0..3)
        .map(|i| segment_segment_distance(a, b, t[i], t[(i + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

pub fn point_triangle_distance(p: Point, t: &[Point; 3]) -> f64 {
    if point_in_triangle(p, t) {
        return 0.0;
    }
    (0..3)
        .map(|i| point_segment_distance(p, t[i], t[(i + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

/// Parameter interval `[t0, t1] ⊆ [0, 1]` of the part of `a + t (b - a)` inside
/// the counter-clockwise triangle, or `None` if the intersection has no length.
pub fn clip_segment_to_triangle(a: Point, b: Point, t: &[Point; 3]) -> Option<(f64, f64)> {
    let d = sub(b, a);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for i in 0..3 {
        let p = t[i];
        let q = t[(i + 1) % 3];
        // inside half-plane: orient(p, q, x) >= 0, linear in the parameter
        let f0 = orient(p, q, a);
        let slope = cross(sub(q, p), d);
        if slope == 0.0 {
            if f0 < 0.0 {
                return None;
            }
            continue;
        }
        let root = -f0 / slope;
        if slope > 0.0 {
            lo = lo.max(root);
        } else {
            hi = hi.min(root);
        }
        if lo >= hi {
            return None;
        }
    }
    Some((lo, hi))
}

/// Simple polygon given by its vertices in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd rule; points on the boundary may land either way.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn segment_distance(&self, p: Point, q: Point) -> f64 {
        self.edges()
            .map(|(a, b)| segment_segment_distance(p, q, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| cross(a, b)).sum::<f64>()
    }
}

/// Uniform bucket grid over a set of segments for proximity queries.
#[derive(Debug, Clone)]
pub struct SegmentGrid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl SegmentGrid {
    pub fn new(segments: &[(Point, Point)], cell: f64) -> Self {
        let pts: Vec<Point> = segments.iter().flat_map(|s| [s.0, s.1]).collect();
        let bb = Aabb::of_points(&pts).inflate(cell);
        let nx = (((bb.max[0] - bb.min[0]) / cell).ceil() as usize).max(1);
        let ny = (((bb.max[1] - bb.min[1]) / cell).ceil() as usize).max(1);
        let mut grid = SegmentGrid {
            origin: bb.min,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for (k, s) in segments.iter().enumerate() {
            let sb = Aabb::of_points(&[s.0, s.1]);
            let (i0, j0, i1, j1) = grid.range(&sb);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    grid.buckets[j * nx + i].push(k as u32);
                }
            }
        }
        grid
    }

    fn range(&self, b: &Aabb) -> (usize, usize, usize, usize) {
        let idx = |v: f64, o: f64, n: usize| -> usize {
            let c = ((v - o) / self.cell).floor();
            if c < 0.0 {
                0
            } else {
                (c as usize).min(n - 1)
            }
        };
        (
            idx(b.min[0], self.origin[0], self.nx),
            idx(b.min[1], self.origin[1], self.ny),
            idx(b.max[0], self.origin[0], self.nx),
            idx(b.max[1], self.origin[1], self.ny),
        )
    }

    /// Sorted, deduplicated ids of segments whose bucket overlaps `b`.
    pub fn candidates(&self, b: &Aabb) -> Vec<u32> {
        let far = b.max[0] < self.origin[0]
            || b.max[1] < self.origin[1]
            || b.min[0] > self.origin[0] + self.cell * self.nx as f64
            || b.min[1] > self.origin[1] + self.cell * self.ny as f64;
        if far {
            return Vec::new();
        }
        let (i0, j0, i1, j1) = self.range(b);
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.extend_from_slice(&self.buckets[j * self.nx + i]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Bounding-box tree over a sequence of segments, splitting the index range
/// in halves. Consecutive polyline segments are spatially close, so this
/// stays tight without any sorting.
#[derive(Debug, Clone)]
pub struct SegmentTree {
    nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone)]
struct TreeNode {
    bb: Aabb,
    lo: u32,
    hi: u32,
    children: Option<[u32; 2]>,
}

const TREE_LEAF: usize = 8;

impl SegmentTree {
    pub fn new(segments: &[(Point, Point)]) -> Self {
        let mut tree = SegmentTree { nodes: Vec::new() };
        if !segments.is_empty() {
            tree.build(segments, 0, segments.len());
        }
        tree
    }

    fn build(&mut self, segs: &[(Point, Point)], lo: usize, hi: usize) -> u32 {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            bb: Aabb::of_points(&[segs[lo].0, segs[lo].1]),
            lo: lo as u32,
            hi: hi as u32,
            children: None,
        });
        if hi - lo <= TREE_LEAF {
            let mut bb = self.nodes[id].bb;
            for s in &segs[lo..hi] {
                bb = bb.union(&Aabb::of_points(&[s.0, s.1]));
            }
            self.nodes[id].bb = bb;
        } else {
            let mid = lo + (hi - lo) / 2;
            let a = self.build(segs, lo, mid);
            let b = self.build(segs, mid, hi);
            self.nodes[id].bb = self.nodes[a as usize].bb.union(&self.nodes[b as usize].bb);
            self.nodes[id].children = Some([a, b]);
        }
        id as u32
    }

    /// Depth-first walk: subtrees whose box fails `descend` are skipped and
    /// `leaf` sees every remaining segment id in increasing order. Stops early
    /// (returning `true`) once `leaf` returns `true`.
    pub fn visit(&self, mut descend: impl FnMut(&Aabb) -> bool, mut leaf: impl FnMut(usize) -> bool) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if !descend(&node.bb) {
                continue;
            }
            match node.children {
                Some([a, b]) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => {
                    for k in node.lo..node.hi {
                        if leaf(k as usize) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

/// The four congruent children of uniform (red) subdivision.
pub fn red_children(t: &[Point; 3]) -> [[Point; 3]; 4] {
    let m01 = midpoint(t[0], t[1]);
    let m12 = midpoint(t[1], t[2]);
    let m20 = midpoint(t[2], t[0]);
    [
        [t[0], m01, m20],
        [m01, t[1], m12],
        [m20, m12, t[2]],
        [m01, m12, m20],
    ]
}

/// All sub-triangles after `depth` levels of red subdivision.
pub fn subdivide(t: &[Point; 3], depth: u32) -> Vec<[Point; 3]> {
    let mut cur = vec![*t];
    for _ in 0..depth {
        cur = cur.iter().flat_map(red_children).collect();
    }
    cur
}
