//! Immersed curves, mollifier kernels and the regularized line forcing.
//!
//! The line-Dirac forcing `⟨F, v⟩ = ∫_γ f v dσ` is replaced by the density
//! `F^r(x) = ∫_γ f(y) δ^r(y - x) dσ_y` with `δ^r(x) = r^{-2} ψ(x / r)`.

use std::cell::Cell;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Aabb, Point, Polygon, SegmentTree};
use crate::quadrature::{adaptive_integrate, barycentric_point, GAUSS4_01, TRI_DEG4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `c (1 + cos(π|x|))` on the unit disk.
    RadialC1,
    /// Product of normalised `exp(1 - 1/(1 - t²))` bumps.
    TensorCinf,
    /// Product of `½ χ_(-1,1)`, i.e. `¼` on the unit square.
    TensorLinf,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [
        KernelFamily::RadialC1,
        KernelFamily::TensorCinf,
        KernelFamily::TensorLinf,
    ];
}

fn bump_1d(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

fn radial_normalization() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let mass = adaptive_integrate(&|s: f64| (1.0 + (PI * s).cos()) * 2.0 * PI * s, 0.0, 1.0, 1e-14);
        1.0 / mass
    })
}

fn bump_normalization() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / adaptive_integrate(&bump_1d, -1.0, 1.0, 1e-14))
}

/// A mollifier `ψ`: nonnegative, unit mass, even, supported in the unit ball
/// (radial) or the unit square (tensor families).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub family: KernelFamily,
    /// `c_d` for the radial family, the 1D factor for the tensor families.
    pub normalization: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily) -> Self {
        let normalization = match family {
            KernelFamily::RadialC1 => radial_normalization(),
            KernelFamily::TensorCinf => bump_normalization(),
            KernelFamily::TensorLinf => 0.5,
        };
        Kernel {
            family,
            normalization,
        }
    }

    #[inline]
    pub fn psi(&self, x: Point) -> f64 {
        match self.family {
            KernelFamily::RadialC1 => {
                let s = geometry::norm(x);
                if s >= 1.0 {
                    0.0
                } else {
                    self.normalization * (1.0 + (PI * s).cos())
                }
            }
            KernelFamily::TensorCinf => {
                let c = self.normalization;
                c * bump_1d(x[0]) * c * bump_1d(x[1])
            }
            KernelFamily::TensorLinf => {
                if x[0].abs() >= 1.0 || x[1].abs() >= 1.0 {
                    0.0
                } else {
                    0.25
                }
            }
        }
    }

    /// `sup ψ = ψ(0)`.
    pub fn sup(&self) -> f64 {
        self.psi([0.0, 0.0])
    }

    /// Radius of the smallest centred ball containing the support of `ψ`.
    pub fn support_radius(&self) -> f64 {
        match self.family {
            KernelFamily::RadialC1 => 1.0,
            KernelFamily::TensorCinf | KernelFamily::TensorLinf => std::f64::consts::SQRT_2,
        }
    }

    /// Whether `x` lies in the closed support of `ψ(·/r)`.
    pub fn in_support(&self, r: f64, x: Point) -> bool {
        match self.family {
            KernelFamily::RadialC1 => geometry::norm(x) <= r,
            _ => x[0].abs() <= r && x[1].abs() <= r,
        }
    }

    #[inline]
    fn delta_unchecked(&self, r: f64, x: Point) -> f64 {
        self.psi([x[0] / r, x[1] / r]) / (r * r)
    }

    /// The Dirac approximation `δ^r(x) = r^{-2} ψ(x / r)`.
    pub fn delta_r(&self, r: f64, x: Point) -> Result<f64> {
        check_radius(r)?;
        Ok(self.delta_unchecked(r, x))
    }

    /// Largest deviation of the order-0 or order-1 moments of `δ^r` from the
    /// identity, measured at `samples` with tensor Gauss quadrature.
    pub fn moment_defect(&self, r: f64, order: u32, samples: &[Point]) -> Result<f64> {
        check_radius(r)?;
        if order > 1 {
            return Err(Error::input("moment order must be 0 or 1"));
        }
        let (gx, gw) = crate::quadrature::gauss_legendre(8);
        let n = 64;
        let h = 2.0 * r / n as f64;
        let mut worst: f64 = 0.0;
        for &x in samples {
            let mut m = [0.0_f64; 3];
            for i in 0..n {
                for j in 0..n {
                    let c = [x[0] - r + (i as f64 + 0.5) * h, x[1] - r + (j as f64 + 0.5) * h];
                    for (a, wa) in gx.iter().zip(&gw) {
                        for (b, wb) in gx.iter().zip(&gw) {
                            let y = [c[0] + 0.5 * h * a, c[1] + 0.5 * h * b];
                            let w = wa * wb * 0.25 * h * h;
                            let d = w * self.delta_unchecked(r, [x[0] - y[0], x[1] - y[1]]);
                            m[0] += d;
                            m[1] += d * y[0];
                            m[2] += d * y[1];
                        }
                    }
                }
            }
            worst = worst.max((m[0] - 1.0).abs());
            if order == 1 {
                worst = worst.max((m[1] - x[0]).abs()).max((m[2] - x[1]).abs());
            }
        }
        Ok(worst)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!("regularization radius must be positive, got {r}")))
    }
}

/// Regularization radius for a tolerance, `r = τ²`.
pub fn r_of_tau(tau: f64) -> f64 {
    tau * tau
}

/// Polyline approximation of the immersed curve.
#[derive(Debug, Clone)]
pub struct Curve {
    points: Vec<Point>,
    closed: bool,
    lengths: Vec<f64>,
    tree: SegmentTree,
    boundary_gap: f64,
}

impl Curve {
    pub fn polyline(points: Vec<Point>, closed: bool) -> Result<Self> {
        let min_points = if closed { 3 } else { 2 };
        if points.len() < min_points {
            return Err(Error::input(format!("curve needs at least {min_points} points")));
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::input("curve points must be finite"));
        }
        let n_seg = if closed { points.len() } else { points.len() - 1 };
        let segs: Vec<(Point, Point)> = (0..n_seg)
            .map(|i| (points[i], points[(i + 1) % points.len()]))
            .collect();
        let lengths: Vec<f64> = segs.iter().map(|s| geometry::dist(s.0, s.1)).collect();
        let total: f64 = lengths.iter().sum();
        if !(total > 0.0) {
            return Err(Error::input("curve must have positive length"));
        }
        Ok(Curve {
            tree: SegmentTree::new(&segs),
            points,
            closed,
            lengths,
            boundary_gap: f64::INFINITY,
        })
    }

    /// Inscribed regular polygon with vertices on the circle.
    pub fn circle(center: Point, radius: f64, n_segments: usize) -> Result<Self> {
        if !(radius > 0.0) || n_segments < 3 {
            return Err(Error::input("circle needs a positive radius and at least 3 segments"));
        }
        let pts = (0..n_segments)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n_segments as f64;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            })
            .collect();
        Self::polyline(pts, true)
    }

    /// Attaches the domain and records `dist(γ, ∂Ω)`; the curve must lie
    /// strictly inside.
    pub fn within(mut self, domain: &Polygon) -> Result<Self> {
        if self.points.iter().any(|&p| !domain.contains(p)) {
            return Err(Error::input("curve leaves the domain"));
        }
        let gap = (0..self.n_segments())
            .map(|i| {
                let (a, b) = self.segment(i);
                domain.segment_distance(a, b)
            })
            .fold(f64::INFINITY, f64::min);
        if !(gap > 0.0) {
            return Err(Error::input("curve touches the domain boundary"));
        }
        self.boundary_gap = gap;
        Ok(self)
    }

    pub fn boundary_gap(&self) -> f64 {
        self.boundary_gap
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn n_segments(&self) -> usize {
        self.lengths.len()
    }

    pub fn segment(&self, i: usize) -> (Point, Point) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }

    pub fn segment_length(&self, i: usize) -> f64 {
        self.lengths[i]
    }

    pub fn length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Ids of segments whose bounding boxes overlap `bb`, increasing.
    pub fn nearby_segments(&self, bb: &Aabb) -> Vec<u32> {
        let mut out = Vec::new();
        self.tree.visit(
            |nb| nb.overlaps(bb),
            |k| {
                let (a, b) = self.segment(k);
                if Aabb::of_points(&[a, b]).overlaps(bb) {
                    out.push(k as u32);
                }
                false
            },
        );
        out
    }

    pub fn meets_triangle(&self, t: &[Point; 3]) -> bool {
        let bb = Aabb::of_points(t);
        self.tree.visit(
            |nb| nb.overlaps(&bb),
            |k| {
                let (a, b) = self.segment(k);
                geometry::segment_meets_triangle(a, b, t)
            },
        )
    }

    /// Whether the closed triangle comes within `cutoff` of the curve.
    pub fn near_triangle(&self, t: &[Point; 3], cutoff: f64) -> bool {
        let bb = Aabb::of_points(t);
        self.tree.visit(
            |nb| nb.distance(&bb) <= cutoff,
            |k| {
                let (a, b) = self.segment(k);
                geometry::segment_triangle_distance(a, b, t) <= cutoff
            },
        )
    }

    /// Distance from the closed triangle to the curve, or `None` when it
    /// exceeds `cutoff`.
    pub fn distance_to_triangle(&self, t: &[Point; 3], cutoff: f64) -> Option<f64> {
        let bb = Aabb::of_points(t);
        let best = Cell::new(f64::INFINITY);
        self.tree.visit(
            |nb| nb.distance(&bb) <= cutoff.min(best.get()),
            |k| {
                let (a, b) = self.segment(k);
                best.set(best.get().min(geometry::segment_triangle_distance(a, b, t)));
                best.get() == 0.0
            },
        );
        let best = best.get();
        (best <= cutoff).then_some(best)
    }

    pub fn distance_to_point(&self, p: Point, cutoff: f64) -> Option<f64> {
        let bb = Aabb::of_points(&[p]);
        let best = Cell::new(f64::INFINITY);
        self.tree.visit(
            |nb| nb.distance(&bb) <= cutoff.min(best.get()),
            |k| {
                let (a, b) = self.segment(k);
                best.set(best.get().min(geometry::point_segment_distance(p, a, b)));
                false
            },
        );
        let best = best.get();
        (best <= cutoff).then_some(best)
    }
}

/// Piecewise-constant data `f` on the curve segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedData {
    values: Vec<f64>,
    /// Maximal runs `(first segment, count)` on which `f` keeps its sign.
    sign_partition: Vec<(usize, usize)>,
}

impl SegmentedData {
    pub fn constant(curve: &Curve, f: f64) -> Result<Self> {
        Self::per_segment(curve, vec![f; curve.n_segments()])
    }

    pub fn per_segment(curve: &Curve, values: Vec<f64>) -> Result<Self> {
        if values.len() != curve.n_segments() {
            return Err(Error::input(format!(
                "expected {} segment values, got {}",
                curve.n_segments(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("curve data must be finite"));
        }
        let sign_partition = sign_runs(&values, curve.is_closed());
        Ok(SegmentedData {
            values,
            sign_partition,
        })
    }

    pub fn value(&self, segment: usize) -> f64 {
        self.values[segment]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sign_partition(&self) -> &[(usize, usize)] {
        &self.sign_partition
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫_γ f² dσ`.
    pub fn l2_norm_sq(&self, curve: &Curve) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * v * curve.segment_length(i))
            .sum()
    }
}

fn sign_runs(values: &[f64], closed: bool) -> Vec<(usize, usize)> {
    let sign = |v: f64| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
    let mut runs: Vec<(usize, usize, i32)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let s = sign(v);
        match runs.last_mut() {
            Some(run) if run.2 == 0 || s == 0 || run.2 == s => {
                run.1 += 1;
                if run.2 == 0 {
                    run.2 = s;
                }
            }
            _ => runs.push((i, 1, s)),
        }
    }
    if closed && runs.len() > 1 {
        let last = runs[runs.len() - 1];
        let first = runs[0];
        if last.2 == first.2 || last.2 == 0 || first.2 == 0 {
            runs.pop();
            runs[0] = (last.0, last.1 + first.1, if first.2 == 0 { last.2 } else { first.2 });
        }
    }
    runs.into_iter().map(|(s, n, _)| (s, n)).collect()
}

/// Integrals of a forcing over one cell: the P1 load vector
/// `∫_T g φ_i` and the squared local data indicator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellLoad {
    pub load: [f64; 3],
    pub data_sq: f64,
}

/// Right-hand side data as seen by assembly and estimation.
pub trait Forcing: Sync {
    /// Integrals over the counter-clockwise triangle `t`.
    fn cell_load(&self, t: &[Point; 3]) -> CellLoad;
}

/// Affine inverse of a triangle: barycentric coordinates of a point.
#[derive(Debug, Clone, Copy)]
pub struct Barycentric {
    origin: Point,
    inv: [[f64; 2]; 2],
}

impl Barycentric {
    pub fn new(t: &[Point; 3]) -> Self {
        let e1 = geometry::sub(t[1], t[0]);
        let e2 = geometry::sub(t[2], t[0]);
        let det = geometry::cross(e1, e2);
        Barycentric {
            origin: t[0],
            inv: [[e2[1] / det, -e2[0] / det], [-e1[1] / det, e1[0] / det]],
        }
    }

    #[inline]
    pub fn coords(&self, p: Point) -> [f64; 3] {
        let d = geometry::sub(p, self.origin);
        let l1 = self.inv[0][0] * d[0] + self.inv[0][1] * d[1];
        let l2 = self.inv[1][0] * d[0] + self.inv[1][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }
}

/// A square-integrable density `g` with the `h_T ‖g‖_{L²(T)}` data indicator.
///
/// `depth` chooses how many red-refinement levels the cell is split into
/// before the degree-four rule is applied; `None` means `g = 0` on the cell.
pub struct DensityForcing<G, D> {
    pub density: G,
    pub depth: D,
}

impl<G, D> DensityForcing<G, D>
where
    G: Fn(Point) -> f64 + Sync,
    D: Fn(&[Point; 3]) -> Option<u32> + Sync,
{
    pub fn new(density: G, depth: D) -> Self {
        DensityForcing { density, depth }
    }
}

/// A smooth density integrated with the plain degree-four rule.
pub fn smooth_density<G: Fn(Point) -> f64 + Sync>(
    g: G,
) -> DensityForcing<G, impl Fn(&[Point; 3]) -> Option<u32> + Sync> {
    DensityForcing::new(g, |_: &[Point; 3]| Some(0))
}

impl<G, D> Forcing for DensityForcing<G, D>
where
    G: Fn(Point) -> f64 + Sync,
    D: Fn(&[Point; 3]) -> Option<u32> + Sync,
{
    fn cell_load(&self, t: &[Point; 3]) -> CellLoad {
        match (self.depth)(t) {
            None => CellLoad::default(),
            Some(depth) => integrate_density(t, depth, &self.density, |_| true),
        }
    }
}

fn integrate_density(
    t: &[Point; 3],
    depth: u32,
    g: &impl Fn(Point) -> f64,
    keep: impl Fn(&[Point; 3]) -> bool,
) -> CellLoad {
    let bary = Barycentric::new(t);
    let area = geometry::triangle_area(t);
    let mut load = [0.0; 3];
    let mut norm_sq = 0.0;
    for sub in geometry::subdivide(t, depth) {
        if !keep(&sub) {
            continue;
        }
        let a = geometry::triangle_area(&sub);
        for &(l, w) in TRI_DEG4.iter() {
            let x = barycentric_point(&sub, l);
            let gx = g(x);
            if gx == 0.0 {
                continue;
            }
            let phi = bary.coords(x);
            let wa = w * a;
            for i in 0..3 {
                load[i] += wa * gx * phi[i];
            }
            norm_sq += wa * gx * gx;
        }
    }
    CellLoad {
        load,
        data_sq: area * norm_sq,
    }
}

/// Quadrature nodes on the curve for a given radius: arc-length panels of
/// length at most `r/4` with four Gauss points each. Consecutive segments
/// shorter than a panel (and carrying the same value) share one panel.
#[derive(Debug, Clone)]
struct CurveQuadrature {
    nodes: Vec<Point>,
    weights: Vec<f64>,
    grid: NodeGrid,
}

/// Bucket grid over quadrature nodes, stored as a flat bucket-sorted list.
#[derive(Debug, Clone)]
struct NodeGrid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    start: Vec<u32>,
    ids: Vec<u32>,
}

impl NodeGrid {
    fn new(nodes: &[Point], cell: f64) -> Self {
        let bb = Aabb::of_points(nodes);
        let nx = (((bb.max[0] - bb.min[0]) / cell).floor() as usize + 1).max(1);
        let ny = (((bb.max[1] - bb.min[1]) / cell).floor() as usize + 1).max(1);
        let mut g = NodeGrid {
            origin: bb.min,
            cell,
            nx,
            ny,
            start: vec![0; nx * ny + 1],
            ids: vec![0; nodes.len()],
        };
        let buckets: Vec<usize> = nodes.iter().map(|&p| g.bucket(p)).collect();
        for &b in &buckets {
            g.start[b + 1] += 1;
        }
        for i in 0..nx * ny {
            g.start[i + 1] += g.start[i];
        }
        let mut fill = g.start.clone();
        for (k, &b) in buckets.iter().enumerate() {
            g.ids[fill[b] as usize] = k as u32;
            fill[b] += 1;
        }
        g
    }

    fn coord(&self, v: f64, o: f64, n: usize) -> isize {
        (((v - o) / self.cell).floor() as isize).clamp(-1, n as isize)
    }

    fn bucket(&self, p: Point) -> usize {
        let i = self.coord(p[0], self.origin[0], self.nx).clamp(0, self.nx as isize - 1) as usize;
        let j = self.coord(p[1], self.origin[1], self.ny).clamp(0, self.ny as isize - 1) as usize;
        j * self.nx + i
    }

    /// Calls `f` for every node in a bucket overlapping the box of half-width
    /// `reach` around `x`.
    #[inline]
    fn for_each_near(&self, x: Point, reach: f64, mut f: impl FnMut(usize)) {
        let i0 = self.coord(x[0] - reach, self.origin[0], self.nx).max(0);
        let i1 = self.coord(x[0] + reach, self.origin[0], self.nx).min(self.nx as isize - 1);
        let j0 = self.coord(x[1] - reach, self.origin[1], self.ny).max(0);
        let j1 = self.coord(x[1] + reach, self.origin[1], self.ny).min(self.ny as isize - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let b = j as usize * self.nx + i as usize;
                for &k in &self.ids[self.start[b] as usize..self.start[b + 1] as usize] {
                    f(k as usize);
                }
            }
        }
    }
}

impl CurveQuadrature {
    fn new(curve: &Curve, data: &SegmentedData, r: f64) -> Self {
        let panel = r / 4.0;
        let n = curve.n_segments();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut i = 0;
        while i < n {
            let len = curve.segment_length(i);
            let f = data.value(i);
            if len >= panel {
                let (a, b) = curve.segment(i);
                let m = (len / panel).ceil() as usize;
                for k in 0..m {
                    for &(xi, w) in GAUSS4_01.iter() {
                        let s = (k as f64 + xi) / m as f64;
                        nodes.push(geometry::add(a, geometry::scale(geometry::sub(b, a), s)));
                        weights.push(w * len / m as f64 * f);
                    }
                }
                i += 1;
                continue;
            }
            let start = i;
            let mut total = 0.0;
            while i < n {
                let l = curve.segment_length(i);
                if l >= panel || data.value(i) != f || (i > start && total + l > panel) {
                    break;
                }
                total += l;
                i += 1;
            }
            if total == 0.0 {
                continue;
            }
            for &(xi, w) in GAUSS4_01.iter() {
                let mut s = xi * total;
                let mut k = start;
                while k + 1 < i && s > curve.segment_length(k) {
                    s -= curve.segment_length(k);
                    k += 1;
                }
                let (a, b) = curve.segment(k);
                let lk = curve.segment_length(k);
                let t = if lk > 0.0 { (s / lk).clamp(0.0, 1.0) } else { 0.0 };
                nodes.push(geometry::add(a, geometry::scale(geometry::sub(b, a), t)));
                weights.push(w * total * f);
            }
        }
        let cell = (2.0 * r).max(curve.length() / 4096.0);
        CurveQuadrature {
            grid: NodeGrid::new(&nodes, cell),
            nodes,
            weights,
        }
    }
}

/// The regularized forcing `F^r` for a curve, its data and a kernel.
#[derive(Debug, Clone)]
pub struct RegularizedForcing {
    curve: Arc<Curve>,
    data: Arc<SegmentedData>,
    kernel: Kernel,
    r: f64,
    quad: CurveQuadrature,
}

impl RegularizedForcing {
    pub fn new(curve: Arc<Curve>, data: Arc<SegmentedData>, kernel: Kernel, r: f64) -> Result<Self> {
        check_radius(r)?;
        if data.values().len() != curve.n_segments() {
            return Err(Error::input("curve data does not match the curve"));
        }
        let quad = CurveQuadrature::new(&curve, &data, r);
        Ok(RegularizedForcing {
            curve,
            data,
            kernel,
            r,
            quad,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn curve(&self) -> &Arc<Curve> {
        &self.curve
    }

    pub fn data(&self) -> &Arc<SegmentedData> {
        &self.data
    }

    /// Distance from `γ` beyond which `F^r` vanishes.
    pub fn reach(&self) -> f64 {
        self.r * self.kernel.support_radius()
    }

    /// Whether the support of `F^r` pokes out of the domain (`r ≥ dist(γ, ∂Ω)`).
    pub fn exceeds_boundary_gap(&self) -> bool {
        self.r >= self.curve.boundary_gap()
    }

    /// `F^r(x)`.
    pub fn eval(&self, x: Point) -> f64 {
        let reach = self.reach();
        let mut sum = 0.0;
        self.quad.grid.for_each_near(x, reach, |k| {
            let d = geometry::sub(self.quad.nodes[k], x);
            if d[0].abs() <= reach && d[1].abs() <= reach {
                sum += self.quad.weights[k] * self.kernel.delta_unchecked(self.r, d);
            }
        });
        sum
    }

    /// Red-refinement depth used for cell integrals of `F^r`, or `None` when
    /// the cell is out of reach of the curve.
    pub fn cell_depth(&self, t: &[Point; 3]) -> Option<u32> {
        if !self.curve.near_triangle(t, self.reach()) {
            return None;
        }
        let h = geometry::triangle_area(t).sqrt();
        let levels = (h / self.r).log2().ceil().max(0.0) as u32;
        Some(levels + 2)
    }
}

impl Forcing for RegularizedForcing {
    fn cell_load(&self, t: &[Point; 3]) -> CellLoad {
        match self.cell_depth(t) {
            None => CellLoad::default(),
            Some(depth) => {
                let reach = self.reach();
                integrate_density(t, depth, &|x| self.eval(x), |sub| {
                    depth <= 2 || self.curve.near_triangle(sub, reach)
                })
            }
        }
    }
}

/// The unregularized line forcing `v ↦ ∫_γ f v dσ`, integrated exactly by
/// clipping the curve against each cell. Its data indicator is the surrogate
/// `h_T^{1/2} ‖f‖_{L²(T∩γ)}`.
#[derive(Debug, Clone)]
pub struct LineForcing {
    curve: Arc<Curve>,
    data: Arc<SegmentedData>,
}

impl LineForcing {
    pub fn new(curve: Arc<Curve>, data: Arc<SegmentedData>) -> Result<Self> {
        if data.values().len() != curve.n_segments() {
            return Err(Error::input("curve data does not match the curve"));
        }
        Ok(LineForcing { curve, data })
    }

    /// `(∫_{T∩γ} f φ_i dσ, ∫_{T∩γ} f² dσ, |T∩γ|)`.
    pub fn clipped_integrals(&self, t: &[Point; 3]) -> ([f64; 3], f64, f64) {
        let bary = Barycentric::new(t);
        let mut load = [0.0; 3];
        let mut f2 = 0.0;
        let mut length = 0.0;
        for k in self.curve.nearby_segments(&Aabb::of_points(t)) {
            let k = k as usize;
            let (a, b) = self.curve.segment(k);
            let Some((t0, t1)) = geometry::clip_segment_to_triangle(a, b, t) else {
                continue;
            };
            let len = (t1 - t0) * self.curve.segment_length(k);
            let f = self.data.value(k);
            let mid = geometry::add(a, geometry::scale(geometry::sub(b, a), 0.5 * (t0 + t1)));
            // φ_i is affine along the piece, so the midpoint rule is exact
            let phi = bary.coords(mid);
            for i in 0..3 {
                load[i] += f * len * phi[i];
            }
            f2 += f * f * len;
            length += len;
        }
        (load, f2, length)
    }
}

impl Forcing for LineForcing {
    fn cell_load(&self, t: &[Point; 3]) -> CellLoad {
        let (load, f2, _) = self.clipped_integrals(t);
        let h = geometry::triangle_area(t).sqrt();
        CellLoad {
            load,
            data_sq: h * f2,
        }
    }
}

/// `g = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroForcing;

impl Forcing for ZeroForcing {
    fn cell_load(&self, _t: &[Point; 3]) -> CellLoad {
        CellLoad::default()
    }
}
