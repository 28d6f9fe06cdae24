//! P1 Galerkin discretization on conforming triangulations.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forcing::{CellLoad, Curve, Forcing};
use crate::geometry::{self, Point};
use crate::mesh::{CellId, Mesh};
use crate::quadrature::{barycentric_point, TRI_DEG4};

pub type Matrix2 = [[f64; 2]; 2];

/// `A(u, v) = ∫ ∇vᵀ A ∇u + c u v`.
#[derive(Clone)]
pub struct BilinearForm {
    diffusion: Arc<dyn Fn(Point) -> Matrix2 + Send + Sync>,
    reaction: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for BilinearForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BilinearForm").finish_non_exhaustive()
    }
}

impl Default for BilinearForm {
    fn default() -> Self {
        Self::laplace()
    }
}

impl BilinearForm {
    pub fn new(
        diffusion: impl Fn(Point) -> Matrix2 + Send + Sync + 'static,
        reaction: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        BilinearForm {
            diffusion: Arc::new(diffusion),
            reaction: Arc::new(reaction),
        }
    }

    /// `A = I`, `c = 0`.
    pub fn laplace() -> Self {
        Self::new(|_| [[1.0, 0.0], [0.0, 1.0]], |_| 0.0)
    }

    #[inline]
    pub fn diffusion(&self, x: Point) -> Matrix2 {
        (self.diffusion)(x)
    }

    #[inline]
    pub fn reaction(&self, x: Point) -> f64 {
        (self.reaction)(x)
    }

    /// Checks symmetry, ellipticity and `c ≥ 0` at `samples` and returns the
    /// observed eigenvalue range `(a0, a1)`.
    pub fn check(&self, samples: &[Point]) -> Result<(f64, f64)> {
        let mut a0 = f64::INFINITY;
        let mut a1: f64 = 0.0;
        for &x in samples {
            let a = self.diffusion(x);
            if (a[0][1] - a[1][0]).abs() > 1e-14 * (a[0][1].abs() + a[1][0].abs() + 1.0) {
                return Err(Error::input(format!("diffusion is not symmetric at {x:?}")));
            }
            let mean = 0.5 * (a[0][0] + a[1][1]);
            let rad = (0.25 * (a[0][0] - a[1][1]).powi(2) + a[0][1] * a[1][0]).sqrt();
            a0 = a0.min(mean - rad);
            a1 = a1.max(mean + rad);
            if !(self.reaction(x) >= 0.0) {
                return Err(Error::input(format!("reaction is negative at {x:?}")));
            }
        }
        if !(a0 > 0.0) {
            return Err(Error::input("diffusion is not uniformly positive definite"));
        }
        Ok((a0, a1))
    }
}

/// Gradients of the three barycentric coordinates of a triangle.
pub fn p1_gradients(t: &[Point; 3]) -> [Point; 3] {
    let two_area = geometry::orient(t[0], t[1], t[2]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let a = t[(i + 1) % 3];
        let b = t[(i + 2) % 3];
        g[i] = [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area];
    }
    g
}

#[inline]
fn a_dot(a: &Matrix2, v: Point) -> Point {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Element matrix `∫_T ∇φ_jᵀ A ∇φ_i + c φ_i φ_j` with the degree-four rule.
pub fn local_matrix(t: &[Point; 3], form: &BilinearForm) -> [[f64; 3]; 3] {
    let area = geometry::triangle_area(t);
    let g = p1_gradients(t);
    let mut k = [[0.0; 3]; 3];
    for &(l, w) in TRI_DEG4.iter() {
        let x = barycentric_point(t, l);
        let a = form.diffusion(x);
        let c = form.reaction(x);
        let wa = w * area;
        for i in 0..3 {
            let agi = a_dot(&a, g[i]);
            for j in 0..3 {
                k[i][j] += wa * (geometry::dot(agi, g[j]) + c * l[i] * l[j]);
            }
        }
    }
    k
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries; the summation order follows the input order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(u32, u32, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len() / 4);
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len() / 4);
        let mut last: Option<(u32, u32)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i as usize + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&(j as u32)) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().with_min_len(4096).for_each(|(i, yi)| {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j as usize]).sum();
        });
    }

    /// `max |a_ij - a_ji| / max |a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                scale = scale.max(a.abs());
                worst = worst.max((a - self.get(j as usize, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

/// Convergence data of one conjugate gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    /// Smallest Ritz value of the preconditioned operator, when requested.
    pub smallest_ritz: Option<f64>,
}

pub const CG_TOLERANCE: f64 = 1e-10;

/// The P1 system on a mesh with Dirichlet data eliminated symmetrically:
/// boundary unknowns are fixed to the interpolated data and their columns
/// moved to the right-hand side.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    matrix: CsrMatrix,
    load: Vec<f64>,
    is_boundary: Vec<bool>,
    boundary_values: Vec<f64>,
    /// Squared data indicator per active cell.
    data_sq: Vec<f64>,
}

impl DiscreteSystem {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// `(g, φ_i)` for every vertex.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn is_boundary(&self) -> &[bool] {
        &self.is_boundary
    }

    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary_values
    }

    pub fn data_sq(&self) -> &[f64] {
        &self.data_sq
    }

    pub fn n_dofs(&self) -> usize {
        self.load.len()
    }

    /// `(g, φ_i) - A(W, φ_i)` at interior vertices, zero at boundary ones.
    pub fn galerkin_residual(&self, w: &FeFunction) -> Vec<f64> {
        let mut aw = vec![0.0; self.n_dofs()];
        self.matrix.mul_vec(w.values(), &mut aw);
        (0..self.n_dofs())
            .map(|i| if self.is_boundary[i] { 0.0 } else { self.load[i] - aw[i] })
            .collect()
    }

    /// Interior rows and columns, renumbered in reverse Cuthill–McKee order.
    fn interior(&self) -> Interior {
        let n = self.n_dofs();
        let interior = |j: u32| !self.is_boundary[j as usize];
        let degree: Vec<usize> = (0..n).map(|i| self.matrix.row(i).0.iter().filter(|&&j| interior(j)).count()).collect();
        let mut seeds: Vec<usize> = (0..n).filter(|&i| !self.is_boundary[i]).collect();
        seeds.sort_by_key(|&i| (degree[i], i));
        let mut order = Vec::with_capacity(seeds.len());
        let mut seen = vec![false; n];
        let mut nbrs = Vec::new();
        for &s in &seeds {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut head = order.len();
            order.push(s);
            while head < order.len() {
                let i = order[head];
                head += 1;
                nbrs.clear();
                nbrs.extend(self.matrix.row(i).0.iter().map(|&j| j as usize).filter(|&j| !self.is_boundary[j] && !seen[j]));
                nbrs.sort_by_key(|&j| (degree[j], j));
                for &j in &nbrs {
                    seen[j] = true;
                    order.push(j);
                }
            }
        }
        order.reverse();
        let mut local = vec![u32::MAX; n];
        for (li, &g) in order.iter().enumerate() {
            local[g] = li as u32;
        }
        let mut row_ptr = Vec::with_capacity(order.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag_pos = Vec::with_capacity(order.len());
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for (li, &g) in order.iter().enumerate() {
            let (c, v) = self.matrix.row(g);
            entries.clear();
            entries.extend(c.iter().zip(v).filter(|(&j, _)| interior(j)).map(|(&j, &a)| (local[j as usize], a)));
            entries.sort_by_key(|e| e.0);
            let start = cols.len();
            for &(j, a) in &entries {
                if j as usize == li {
                    diag_pos.push(cols.len());
                }
                cols.push(j);
                vals.push(a);
            }
            if diag_pos.len() != li + 1 {
                diag_pos.push(start);
            }
            row_ptr.push(cols.len());
        }
        let diag = (0..order.len())
            .map(|i| if cols.get(diag_pos[i]) == Some(&(i as u32)) { vals[diag_pos[i]] } else { 0.0 })
            .collect();
        Interior { global: order, row_ptr, cols, vals, diag_pos, diag }
    }

    /// Right-hand side of the interior block, in the interior numbering.
    fn reduced_rhs(&self, block: &Interior) -> Vec<f64> {
        block
            .global
            .iter()
            .map(|&g| {
                let (c, v) = self.matrix.row(g);
                let mut s = self.load[g];
                for (&j, &a) in c.iter().zip(v) {
                    if self.is_boundary[j as usize] {
                        s -= a * self.boundary_values[j as usize];
                    }
                }
                s
            })
            .collect()
    }

    /// Preconditioned conjugate gradients (symmetric Gauss–Seidel) to a
    /// relative residual of [`CG_TOLERANCE`], starting from `initial` when
    /// given.
    pub fn solve(&self, initial: Option<&FeFunction>, ritz: bool) -> Result<(FeFunction, SolveStats)> {
        let n_all = self.n_dofs();
        let block = self.interior();
        let n = block.global.len();
        if block.diag.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Numerical("nonpositive diagonal entry".into()));
        }
        let b = self.reduced_rhs(&block);
        let mut x = vec![0.0; n];
        if let Some(w) = initial {
            if w.values().len() == n_all {
                for (xi, &g) in x.iter_mut().zip(&block.global) {
                    *xi = w.values()[g];
                }
            }
        }
        let b_norm = dot(&b, &b).sqrt();
        let finish = |x: Vec<f64>, stats: SolveStats| {
            let mut out: Vec<f64> = (0..n_all)
                .map(|i| if self.is_boundary[i] { self.boundary_values[i] } else { 0.0 })
                .collect();
            for (xi, &g) in x.iter().zip(&block.global) {
                out[g] = *xi;
            }
            (FeFunction::new(out), stats)
        };
        if b_norm == 0.0 {
            let stats = SolveStats {
                iterations: 0,
                relative_residual: 0.0,
                smallest_ritz: None,
            };
            return Ok(finish(vec![0.0; n], stats));
        }
        let mut r = vec![0.0; n];
        block.mul(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let mut z = vec![0.0; n];
        block.sgs(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut q = vec![0.0; n];
        let cap = 10 * n_all.max(1);
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        let mut res = dot(&r, &r).sqrt() / b_norm;
        let mut it = 0;
        while res > CG_TOLERANCE {
            if it >= cap {
                return Err(Error::SolverDiverged {
                    iterations: it,
                    residual: res,
                });
            }
            block.mul(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                return Err(Error::Numerical(format!(
                    "operator is not positive definite (pᵀAp = {pq:e})"
                )));
            }
            let alpha = rz / pq;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &q, &mut r);
            block.sgs(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            alphas.push(alpha);
            betas.push(beta);
            res = dot(&r, &r).sqrt() / b_norm;
            it += 1;
            if !res.is_finite() {
                return Err(Error::SolverDiverged {
                    iterations: it,
                    residual: res,
                });
            }
        }
        // true residual, guarding against drift of the recurrence
        block.mul(&x, &mut q);
        let true_res = (0..n).map(|i| (b[i] - q[i]).powi(2)).sum::<f64>().sqrt() / b_norm;
        let stats = SolveStats {
            iterations: it,
            relative_residual: true_res,
            smallest_ritz: if ritz && !alphas.is_empty() {
                Some(smallest_lanczos_eigenvalue(&alphas, &betas))
            } else {
                None
            },
        };
        Ok(finish(x, stats))
    }
}

/// The interior block of a [`DiscreteSystem`] in its own numbering.
struct Interior {
    global: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag_pos: Vec<usize>,
    diag: Vec<f64>,
}

impl Interior {
    fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().with_min_len(4096).for_each(|(i, yi)| {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            *yi = self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&j, &v)| v * x[j as usize]).sum();
        });
    }

    /// Symmetric Gauss–Seidel sweep `z = M⁻¹ r`.
    fn sgs(&self, r: &[f64], z: &mut [f64]) {
        let n = self.global.len();
        for i in 0..n {
            let mut s = r[i];
            for k in self.row_ptr[i]..self.diag_pos[i] {
                s -= self.vals[k] * z[self.cols[k] as usize];
            }
            z[i] = s / self.diag[i];
        }
        for i in (0..n).rev() {
            let mut s = 0.0;
            for k in self.diag_pos[i] + 1..self.row_ptr[i + 1] {
                s += self.vals[k] * z[self.cols[k] as usize];
            }
            z[i] -= s / self.diag[i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Smallest eigenvalue of the Lanczos tridiagonal built from CG coefficients.
fn smallest_lanczos_eigenvalue(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    let mut d = vec![0.0; m];
    let mut e = vec![0.0; m.saturating_sub(1)];
    for i in 0..m {
        d[i] = 1.0 / alphas[i];
        if i > 0 {
            d[i] += betas[i - 1] / alphas[i - 1];
        }
        if i + 1 < m {
            e[i] = betas[i].sqrt() / alphas[i];
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..m {
        let rad = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < m { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - rad);
        hi = hi.max(d[i] + rad);
    }
    // Sturm count of eigenvalues below x
    let below = |x: f64| {
        let mut count = 0;
        let mut q = d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..m {
            let denom = if q == 0.0 { f64::EPSILON } else { q };
            q = d[i] - x - e[i - 1] * e[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Nodal values of a continuous piecewise linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    values: Vec<f64>,
}

impl FeFunction {
    pub fn new(values: Vec<f64>) -> Self {
        FeFunction { values }
    }

    pub fn zeros(n: usize) -> Self {
        FeFunction { values: vec![0.0; n] }
    }

    pub fn interpolate(mesh: &Mesh, u: impl Fn(Point) -> f64) -> Self {
        FeFunction {
            values: mesh.vertices().iter().map(|&p| u(p)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Extends the function to vertices created by refinement; new vertices
    /// are edge midpoints, so linear interpolation is exact.
    pub fn prolongate(&self, mesh: &Mesh) -> Result<FeFunction> {
        if self.values.len() > mesh.n_vertices() {
            return Err(Error::input("function has more values than the mesh has vertices"));
        }
        let mut values = self.values.clone();
        for v in values.len()..mesh.n_vertices() {
            let [a, b] = mesh
                .vertex_parents(v)
                .ok_or_else(|| Error::input(format!("vertex {v} was not created by bisection")))?;
            let (a, b) = (a as usize, b as usize);
            if a >= v || b >= v {
                return Err(Error::input("vertex parents must precede their child"));
            }
            values.push(0.5 * (values[a] + values[b]));
        }
        Ok(FeFunction { values })
    }

    pub fn gradient_on(&self, mesh: &Mesh, c: CellId) -> Point {
        let t = mesh.triangle(c);
        let g = p1_gradients(&t);
        let v = mesh.cell(c).vertices;
        let mut out = [0.0; 2];
        for i in 0..3 {
            let w = self.values[v[i] as usize];
            out[0] += w * g[i][0];
            out[1] += w * g[i][1];
        }
        out
    }
}

/// Per-cell right-hand side integrals, memoised by vertex triple. Vertex ids
/// are stable under refinement, so the cache stays valid along a sequence of
/// nested meshes as long as the forcing does not change.
pub struct LoadCache<'f> {
    forcing: &'f dyn Forcing,
    map: HashMap<[u32; 3], CellLoad>,
}

impl<'f> LoadCache<'f> {
    pub fn new(forcing: &'f dyn Forcing) -> Self {
        LoadCache {
            forcing,
            map: HashMap::new(),
        }
    }

    pub fn forcing(&self) -> &'f dyn Forcing {
        self.forcing
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Loads for `cells`, in order.
    pub fn loads_for(&mut self, mesh: &Mesh, cells: &[CellId]) -> Vec<CellLoad> {
        let missing: Vec<CellId> = cells
            .iter()
            .copied()
            .filter(|&c| !self.map.contains_key(&mesh.cell(c).vertices))
            .collect();
        let forcing = self.forcing;
        let fresh: Vec<CellLoad> = missing
            .par_iter()
            .map(|&c| forcing.cell_load(&mesh.triangle(c)))
            .collect();
        for (c, l) in missing.into_iter().zip(fresh) {
            self.map.insert(mesh.cell(c).vertices, l);
        }
        cells.iter().map(|&c| self.map[&mesh.cell(c).vertices]).collect()
    }

    /// Loads for every active cell, aligned with `mesh.active()`.
    pub fn loads(&mut self, mesh: &Mesh) -> Vec<CellLoad> {
        self.loads_for(mesh, mesh.active())
    }
}

/// Assembles the system for `A(W, V) = (g, V)` with `W = boundary` on `∂Ω`.
/// `loads` must be aligned with `mesh.active()`.
pub fn assemble(
    mesh: &Mesh,
    form: &BilinearForm,
    loads: &[CellLoad],
    boundary: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<DiscreteSystem> {
    if loads.len() != mesh.n_active() {
        return Err(Error::input("one load per active cell is required"));
    }
    let n = mesh.n_vertices();
    let locals: Vec<[[f64; 3]; 3]> = mesh
        .active()
        .par_iter()
        .map(|&c| local_matrix(&mesh.triangle(c), form))
        .collect();
    let mut triplets = Vec::with_capacity(9 * locals.len());
    let mut load = vec![0.0; n];
    for ((&c, k), l) in mesh.active().iter().zip(&locals).zip(loads) {
        let v = mesh.cell(c).vertices;
        for i in 0..3 {
            load[v[i] as usize] += l.load[i];
            for j in 0..3 {
                triplets.push((v[i], v[j], k[i][j]));
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(n, triplets);
    let is_boundary = mesh.boundary_vertices();
    let boundary_values = mesh
        .vertices()
        .iter()
        .zip(&is_boundary)
        .map(|(&p, &b)| if b { boundary(p) } else { 0.0 })
        .collect();
    Ok(DiscreteSystem {
        matrix,
        load,
        is_boundary,
        boundary_values,
        data_sq: loads.iter().map(|l| l.data_sq).collect(),
    })
}

/// Value and gradient of a known solution, away from the interface.
pub trait ExactSolution: Sync + Send {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> Point;
}

/// Red-refinement depth used for cells crossed by the interface.
pub const KINK_DEPTH: u32 = 4;

/// `|||u - W|||`, with cells meeting `curve` subdivided [`KINK_DEPTH`] times.
pub fn energy_error(
    mesh: &Mesh,
    w: &FeFunction,
    form: &BilinearForm,
    exact: &dyn ExactSolution,
    curve: Option<&Curve>,
) -> f64 {
    let per_cell: Vec<f64> = mesh
        .active()
        .par_iter()
        .map(|&c| {
            let t = mesh.triangle(c);
            let v = mesh.cell(c).vertices;
            let wv = [
                w.values[v[0] as usize],
                w.values[v[1] as usize],
                w.values[v[2] as usize],
            ];
            let gw = w.gradient_on(mesh, c);
            let depth = match curve {
                Some(g) if g.meets_triangle(&t) => KINK_DEPTH,
                _ => 0,
            };
            let bary = crate::forcing::Barycentric::new(&t);
            let mut s = 0.0;
            for sub in geometry::subdivide(&t, depth) {
                let a = geometry::triangle_area(&sub);
                for &(l, wq) in TRI_DEG4.iter() {
                    let x = barycentric_point(&sub, l);
                    let gu = exact.gradient(x);
                    let d = geometry::sub(gu, gw);
                    let mut term = geometry::dot(a_dot(&form.diffusion(x), d), d);
                    let cr = form.reaction(x);
                    if cr != 0.0 {
                        let lam = bary.coords(x);
                        let wx = lam[0] * wv[0] + lam[1] * wv[1] + lam[2] * wv[2];
                        term += cr * (exact.value(x) - wx).powi(2);
                    }
                    s += wq * a * term;
                }
            }
            s
        })
        .collect();
    per_cell.iter().sum::<f64>().sqrt()
}

/// One Galerkin solve on `mesh`, warm-started from `previous` when given.
pub fn solve_galerkin(
    mesh: &Mesh,
    form: &BilinearForm,
    loads: &[CellLoad],
    boundary: &(dyn Fn(Point) -> f64 + Sync),
    previous: Option<&FeFunction>,
) -> Result<(FeFunction, DiscreteSystem, SolveStats)> {
    let system = assemble(mesh, form, loads, boundary)?;
    let warm = match previous {
        Some(p) => Some(p.prolongate(mesh)?),
        None => None,
    };
    let (w, stats) = system.solve(warm.as_ref(), false)?;
    Ok((w, system, stats))
}
