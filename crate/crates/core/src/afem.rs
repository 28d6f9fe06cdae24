//! Adaptive drivers: Dörfler marking, the DATA / GREEDY / INTERFACE mesh
//! loops, SOLVE, the outer regularized schedule and the unregularized
//! baseline.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{self, IndicatorSet};
use crate::fem::{self, BilinearForm, ExactSolution, FeFunction, LoadCache};
use crate::forcing::{r_of_tau, Curve, Forcing, Kernel, KernelFamily, LineForcing, RegularizedForcing, SegmentedData};
use crate::geometry::Point;
use crate::mesh::{interface_cells, CellId, Mesh};

pub const DATA_CAP: usize = 10_000;
pub const GREEDY_CAP: usize = 10_000;
pub const SOLVE_CAP: usize = 1_000;
pub const INTERFACE_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AfemParams {
    pub theta: f64,
    pub theta_data: f64,
    pub lambda: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    pub beta: f64,
    pub tau0: f64,
    pub j_max: usize,
    #[serde(default)]
    pub single_shot: bool,
    pub kernel: KernelFamily,
    #[serde(default)]
    pub extra_final_step: bool,
}

fn default_mu() -> f64 {
    0.5
}

impl AfemParams {
    /// Parameters of the L-shaped domain experiment.
    pub fn l_shape() -> Self {
        AfemParams {
            theta: 0.7,
            theta_data: 0.7,
            lambda: 1.0 / 3.0,
            mu: 0.5,
            beta: 0.8,
            tau0: 0.6,
            j_max: 6,
            single_shot: false,
            kernel: KernelFamily::RadialC1,
            extra_final_step: false,
        }
    }

    /// Parameters of the square experiment.
    pub fn square() -> Self {
        AfemParams {
            theta: 0.55,
            theta_data: 0.55,
            lambda: 1.0 / 3.0,
            mu: 0.5,
            beta: 0.7,
            tau0: 0.3,
            j_max: 8,
            single_shot: false,
            kernel: KernelFamily::TensorLinf,
            extra_final_step: false,
        }
    }

    /// Names and messages of every out-of-range field.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let open = |name: &str, v: f64, out: &mut Vec<String>| {
            if !(v > 0.0 && v < 1.0) {
                out.push(format!("{name} must lie in (0, 1), got {v}"));
            }
        };
        open("theta", self.theta, &mut out);
        open("theta_data", self.theta_data, &mut out);
        open("mu", self.mu, &mut out);
        open("beta", self.beta, &mut out);
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            out.push(format!("lambda must lie in (0, 1], got {}", self.lambda));
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            out.push(format!("tau0 must be positive, got {}", self.tau0));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::input(p.join("; ")))
        }
    }

    /// `τ_j = τ₀ β^j`.
    pub fn tau(&self, j: usize) -> f64 {
        self.tau0 * self.beta.powi(j as i32)
    }
}

/// How the mesh of a Galerkin solve was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Initial solve of a stage that did not refine the interface.
    #[serde(rename = "START")]
    Start,
    #[serde(rename = "DATA")]
    Data,
    #[serde(rename = "MARK")]
    Mark,
    #[serde(rename = "INTERFACE")]
    Interface,
}

/// One row per Galerkin solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub j: usize,
    pub k: usize,
    pub tau: f64,
    pub r: f64,
    pub dofs: usize,
    pub cells: usize,
    pub estimator_total: f64,
    pub estimator_jump: f64,
    pub estimator_data: f64,
    pub energy_error: Option<f64>,
    pub branch: Branch,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
}

impl RunRecord {
    /// Last row of every outer iteration.
    pub fn outer_samples(&self) -> Vec<&RunRow> {
        let mut out: Vec<&RunRow> = Vec::new();
        for row in &self.rows {
            match out.last_mut() {
                Some(last) if last.j == row.j => *last = row,
                _ => out.push(row),
            }
        }
        out
    }
}

/// Indices of a smallest set `M` with `Σ_M v² ≥ θ² Σ v²`: the largest values
/// first, ties to the lower index.
pub fn mark(values: &[f64], theta: f64) -> Vec<usize> {
    let total: f64 = values.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let goal = theta * theta * total;
    let mut acc = 0.0;
    let mut out = Vec::new();
    for i in order {
        out.push(i);
        acc += values[i] * values[i];
        if acc >= goal {
            break;
        }
    }
    out
}

/// Counters returned by the mesh loops.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoopStats {
    /// Refinement calls.
    pub passes: usize,
    /// Cells handed to refinement, summed over passes.
    pub marked: usize,
    pub cells_before: usize,
    pub cells_after: usize,
}

impl LoopStats {
    fn start(mesh: &Mesh) -> Self {
        LoopStats {
            cells_before: mesh.n_active(),
            cells_after: mesh.n_active(),
            ..Default::default()
        }
    }

    pub fn cells_added(&self) -> usize {
        self.cells_after - self.cells_before
    }
}

fn data_norm(loads: &[crate::forcing::CellLoad]) -> f64 {
    loads.iter().map(|l| l.data_sq).sum::<f64>().sqrt()
}

/// Dörfler refinement on the data indicator until `𝒟 ≤ τ`.
pub fn data_loop(mesh: &mut Mesh, cache: &mut LoadCache, tau: f64, theta_data: f64) -> Result<LoopStats> {
    let mut stats = LoopStats::start(mesh);
    loop {
        let loads = cache.loads(mesh);
        let d = data_norm(&loads);
        if d <= tau {
            break;
        }
        if stats.passes >= DATA_CAP {
            return Err(Error::NonTermination {
                routine: "DATA",
                cap: DATA_CAP,
                detail: format!("data indicator {d:e} above {tau:e}"),
            });
        }
        let values: Vec<f64> = loads.iter().map(|l| l.data_sq.sqrt()).collect();
        let marked: Vec<CellId> = mark(&values, theta_data).into_iter().map(|i| mesh.active()[i]).collect();
        stats.marked += marked.len();
        stats.passes += 1;
        mesh.refine_in_place(&marked)?;
    }
    stats.cells_after = mesh.n_active();
    Ok(stats)
}

#[derive(PartialEq)]
struct HeapItem {
    d_sq: f64,
    cell: CellId,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d_sq.total_cmp(&other.d_sq).then(other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Refines the cell with the largest data indicator, one at a time, until
/// `𝒟 ≤ τ`.
pub fn greedy(mesh: &mut Mesh, cache: &mut LoadCache, tau: f64) -> Result<LoopStats> {
    let mut stats = LoopStats::start(mesh);
    let loads = cache.loads(mesh);
    let mut heap: BinaryHeap<HeapItem> = mesh
        .active()
        .iter()
        .zip(&loads)
        .map(|(&cell, l)| HeapItem { d_sq: l.data_sq, cell })
        .collect();
    let mut total: f64 = loads.iter().map(|l| l.data_sq).sum();
    let goal = tau * tau;
    loop {
        if total <= goal {
            // drift check on the running sum
            total = cache.loads(mesh).iter().map(|l| l.data_sq).sum();
            if total <= goal {
                break;
            }
        }
        if stats.passes >= GREEDY_CAP {
            return Err(Error::NonTermination {
                routine: "GREEDY",
                cap: GREEDY_CAP,
                detail: format!("data indicator {:e} above {tau:e}", total.sqrt()),
            });
        }
        let top = loop {
            let item = heap.pop().ok_or_else(|| Error::Numerical("greedy heap exhausted".into()))?;
            if mesh.is_active(item.cell) {
                break item.cell;
            }
        };
        let delta = mesh.refine_in_place(&[top])?;
        stats.passes += 1;
        stats.marked += 1;
        for l in cache.loads_for(mesh, &delta.removed) {
            total -= l.data_sq;
        }
        for (l, &cell) in cache.loads_for(mesh, &delta.added).iter().zip(&delta.added) {
            total += l.data_sq;
            heap.push(HeapItem { d_sq: l.data_sq, cell });
        }
    }
    stats.cells_after = mesh.n_active();
    Ok(stats)
}

/// Refines the cells meeting `γ` until all of them have `h_T ≤ r/2`.
pub fn interface_loop(mesh: &mut Mesh, curve: &Curve, r: f64) -> Result<LoopStats> {
    if !(r > 0.0) {
        return Err(Error::input(format!("radius must be positive, got {r}")));
    }
    let mut stats = LoopStats::start(mesh);
    let mut near = interface_cells(mesh, curve).cells;
    loop {
        let coarse: Vec<CellId> = near.iter().copied().filter(|&c| mesh.h(c) > 0.5 * r).collect();
        if coarse.is_empty() {
            break;
        }
        if stats.passes >= INTERFACE_CAP {
            return Err(Error::NonTermination {
                routine: "INTERFACE",
                cap: INTERFACE_CAP,
                detail: format!("{} interface cells above r/2", coarse.len()),
            });
        }
        let delta = mesh.refine_in_place(&coarse)?;
        stats.passes += 1;
        stats.marked += coarse.len();
        near.retain(|&c| mesh.is_active(c));
        near.extend(
            delta
                .added
                .iter()
                .copied()
                .filter(|&c| mesh.is_active(c) && curve.meets_triangle(&mesh.triangle(c))),
        );
        near.sort_unstable();
        near.dedup();
    }
    stats.cells_after = mesh.n_active();
    Ok(stats)
}

/// Checks that the initial mesh resolves the curve: `𝒢(γ, 𝒯₀)` is nonempty
/// and its cell sizes are within a factor 4 of each other.
pub fn validate_initial_grid(mesh: &Mesh, curve: &Curve) -> Result<()> {
    let g = interface_cells(mesh, curve);
    if g.cells.is_empty() {
        return Err(Error::input("initial mesh has no cell meeting the curve"));
    }
    let min = g.cells.iter().map(|&c| mesh.h(c)).fold(f64::INFINITY, f64::min);
    if g.diam > 4.0 * min {
        return Err(Error::input(format!(
            "interface cells are not quasi-uniform (h from {min:e} to {:e})",
            g.diam
        )));
    }
    Ok(())
}

/// Fixed inputs of a boundary value problem.
#[derive(Clone)]
pub struct Problem {
    pub form: BilinearForm,
    pub boundary: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub exact: Option<Arc<dyn ExactSolution>>,
    /// Curve across which the exact solution kinks.
    pub kink: Option<Arc<Curve>>,
}

impl Problem {
    pub fn energy_error(&self, mesh: &Mesh, w: &FeFunction) -> Option<f64> {
        self.exact
            .as_ref()
            .map(|u| fem::energy_error(mesh, w, &self.form, u.as_ref(), self.kink.as_deref()))
    }
}

/// Where the wall-clock column comes from.
#[derive(Debug, Clone, Copy)]
pub enum Clock {
    /// Always zero, for byte-identical records.
    Frozen,
    Since(Instant),
}

impl Clock {
    pub fn new(deterministic: bool) -> Self {
        if deterministic {
            Clock::Frozen
        } else {
            Clock::Since(Instant::now())
        }
    }

    fn ms(&self) -> f64 {
        match self {
            Clock::Frozen => 0.0,
            Clock::Since(t) => t.elapsed().as_secs_f64() * 1e3,
        }
    }
}

/// The evolving state of an adaptive run.
#[derive(Debug, Clone)]
pub struct Adaptive {
    pub mesh: Mesh,
    pub solution: FeFunction,
    pub indicators: IndicatorSet,
    pub record: RunRecord,
    pub clock: Clock,
}

/// Row labels of a SOLVE call.
#[derive(Debug, Clone, Copy)]
pub struct Stage {
    pub j: usize,
    pub tau: f64,
    pub r: f64,
    pub first: Branch,
}

impl Adaptive {
    pub fn new(mesh: Mesh, deterministic: bool) -> Self {
        let n = mesh.n_vertices();
        Adaptive {
            mesh,
            solution: FeFunction::zeros(n),
            indicators: IndicatorSet::default(),
            record: RunRecord::default(),
            clock: Clock::new(deterministic),
        }
    }

    /// GAL followed by ESTIMATE; appends one row.
    pub fn gal(&mut self, problem: &Problem, cache: &mut LoadCache, stage: Stage, k: usize, branch: Branch) -> Result<()> {
        let loads = cache.loads(&self.mesh);
        let (w, _, _) = fem::solve_galerkin(
            &self.mesh,
            &problem.form,
            &loads,
            problem.boundary.as_ref(),
            Some(&self.solution),
        )?;
        self.indicators = estimate::estimate_with_loads(&self.mesh, &w, &problem.form, &loads);
        self.solution = w;
        self.record.rows.push(RunRow {
            j: stage.j,
            k,
            tau: stage.tau,
            r: stage.r,
            dofs: self.mesh.n_vertices(),
            cells: self.mesh.n_active(),
            estimator_total: self.indicators.total_norm,
            estimator_jump: self.indicators.jump_norm,
            estimator_data: self.indicators.data_norm,
            energy_error: problem.energy_error(&self.mesh, &self.solution),
            branch,
            wall_ms: self.clock.ms(),
        });
        Ok(())
    }

    /// SOLVE: until `ℰ ≤ tol`, refine either by DATA (when `𝒟 > λθℰ`) or by
    /// marking the total indicator.
    pub fn solve_loop(
        &mut self,
        problem: &Problem,
        cache: &mut LoadCache,
        tol: f64,
        params: &AfemParams,
        stage: Stage,
    ) -> Result<()> {
        self.solve_until(problem, cache, tol, params, stage, None)
    }

    /// SOLVE that additionally stops once the energy error is below `target`.
    pub fn solve_until(
        &mut self,
        problem: &Problem,
        cache: &mut LoadCache,
        tol: f64,
        params: &AfemParams,
        stage: Stage,
        target: Option<f64>,
    ) -> Result<()> {
        if !(tol > 0.0) {
            return Err(Error::input(format!("tolerance must be positive, got {tol}")));
        }
        self.gal(problem, cache, stage, 0, stage.first)?;
        let mut k = 0;
        while self.indicators.total_norm > tol && !self.below(target) {
            if k >= SOLVE_CAP {
                return Err(Error::NonTermination {
                    routine: "SOLVE",
                    cap: SOLVE_CAP,
                    detail: format!(
                        "estimator {:e} above {tol:e} at {} dofs",
                        self.indicators.total_norm,
                        self.mesh.n_vertices()
                    ),
                });
            }
            let sigma = params.lambda * params.theta * self.indicators.total_norm;
            let branch = if self.indicators.data_norm > sigma {
                data_loop(&mut self.mesh, cache, 0.5 * sigma, params.theta_data)?;
                Branch::Data
            } else {
                let marked: Vec<CellId> = mark(&self.indicators.total, params.theta)
                    .into_iter()
                    .map(|i| self.indicators.cells[i])
                    .collect();
                self.mesh.refine_in_place(&marked)?;
                Branch::Mark
            };
            k += 1;
            self.gal(problem, cache, stage, k, branch)?;
        }
        Ok(())
    }

    /// Whether the latest energy error is below `target`.
    pub fn below(&self, target: Option<f64>) -> bool {
        match (target, self.record.rows.last().and_then(|r| r.energy_error)) {
            (Some(t), Some(e)) => e < t,
            _ => false,
        }
    }
}

/// Curve data and kernel for the regularized drivers.
#[derive(Clone)]
pub struct InterfaceData {
    pub curve: Arc<Curve>,
    pub data: Arc<SegmentedData>,
}

/// Tolerances visited by the outer loop.
pub fn schedule(params: &AfemParams) -> Vec<f64> {
    if params.single_shot {
        vec![params.tau(params.j_max)]
    } else {
        (0..params.j_max).map(|j| params.tau(j)).collect()
    }
}

fn final_step_tau(params: &AfemParams) -> f64 {
    params.tau(params.j_max + 1)
}

/// The regularized adaptive method. For every tolerance `τ_j` of the
/// schedule: resolve the curve at `r = τ_j²`, then SOLVE for `F^r` to
/// `μ̃ τ_j`. With `j_max = 0` (and no single shot) only the first
/// interface resolution and one Galerkin solve are performed.
pub fn regsolve(
    mesh: Mesh,
    problem: &Problem,
    interface: &InterfaceData,
    params: &AfemParams,
    deterministic: bool,
) -> Result<Adaptive> {
    params.validate()?;
    let kernel = Kernel::new(params.kernel);
    let mut state = Adaptive::new(mesh, deterministic);
    let forcing_at = |r: f64| RegularizedForcing::new(interface.curve.clone(), interface.data.clone(), kernel, r);
    let taus = schedule(params);
    if taus.is_empty() {
        let (tau, r) = (params.tau0, r_of_tau(params.tau0));
        interface_loop(&mut state.mesh, &interface.curve, r)?;
        let f = forcing_at(r)?;
        let mut cache = LoadCache::new(&f);
        let stage = Stage { j: 0, tau, r, first: Branch::Interface };
        state.gal(problem, &mut cache, stage, 0, Branch::Interface)?;
    }
    for (j, &tau) in taus.iter().enumerate() {
        let r = r_of_tau(tau);
        interface_loop(&mut state.mesh, &interface.curve, r)?;
        let f = forcing_at(r)?;
        let mut cache = LoadCache::new(&f);
        let stage = Stage { j, tau, r, first: Branch::Interface };
        state.solve_loop(problem, &mut cache, params.mu * tau, params, stage)?;
    }
    if params.extra_final_step {
        let tau = final_step_tau(params);
        let r = r_of_tau(tau);
        interface_loop(&mut state.mesh, &interface.curve, r)?;
        let f = forcing_at(r)?;
        let mut cache = LoadCache::new(&f);
        let stage = Stage { j: taus.len().max(1), tau, r, first: Branch::Interface };
        state.gal(problem, &mut cache, stage, 0, Branch::Interface)?;
    }
    Ok(state)
}

/// SOLVE on the unregularized line forcing with the surrogate data indicator,
/// following the same tolerance schedule. Stops early once the energy error
/// drops below `target` (when an exact solution is known).
pub fn baseline_solve(
    mesh: Mesh,
    problem: &Problem,
    interface: &InterfaceData,
    params: &AfemParams,
    deterministic: bool,
    target: Option<f64>,
) -> Result<Adaptive> {
    params.validate()?;
    let line = LineForcing::new(interface.curve.clone(), interface.data.clone())?;
    let mut cache = LoadCache::new(&line);
    let mut state = Adaptive::new(mesh, deterministic);
    let mut taus = schedule(params);
    if taus.is_empty() {
        taus.push(params.tau0);
    }
    for (j, &tau) in taus.iter().enumerate() {
        let stage = Stage { j, tau, r: 0.0, first: Branch::Start };
        state.solve_until(problem, &mut cache, params.mu * tau, params, stage, target)?;
        if state.below(target) {
            break;
        }
    }
    Ok(state)
}

/// SOLVE for a fixed forcing from a given mesh.
pub fn solve_loop(
    mesh: Mesh,
    problem: &Problem,
    forcing: &dyn Forcing,
    tol: f64,
    params: &AfemParams,
    deterministic: bool,
) -> Result<Adaptive> {
    let mut state = Adaptive::new(mesh, deterministic);
    let mut cache = LoadCache::new(forcing);
    let stage = Stage { j: 0, tau: tol, r: 0.0, first: Branch::Start };
    state.solve_loop(problem, &mut cache, tol, params, stage)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::smooth_density;

    #[test]
    fn mark_takes_the_largest() {
        assert_eq!(mark(&[3.0, 2.0, 1.0], 0.7), vec![0]);
        assert_eq!(mark(&[1.0, 1.0], 0.5), vec![0]);
        assert_eq!(mark(&[0.0, 0.0], 0.5), Vec::<usize>::new());
        let mut all = mark(&[0.1, 0.4, 0.3, 0.2], 0.999);
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn mark_breaks_ties_by_index() {
        assert_eq!(mark(&[1.0, 2.0, 2.0, 1.0], 0.6), vec![1]);
        assert_eq!(mark(&[1.0, 2.0, 2.0, 1.0], 0.7), vec![1, 2]);
    }

    #[test]
    fn schedule_is_geometric() {
        let p = AfemParams::l_shape();
        let s = schedule(&p);
        assert_eq!(s.len(), 6);
        for (j, t) in s.iter().enumerate() {
            assert_eq!(*t, 0.6 * 0.8f64.powi(j as i32));
        }
        let one = schedule(&AfemParams { single_shot: true, j_max: 14, ..p });
        assert_eq!(one, vec![0.6 * 0.8f64.powi(14)]);
    }

    #[test]
    fn params_are_checked() {
        assert!(AfemParams::l_shape().validate().is_ok());
        let bad = AfemParams { theta: 1.0, beta: 0.0, ..AfemParams::square() };
        assert_eq!(bad.problems().len(), 2);
    }

    #[test]
    fn data_loop_is_identity_when_satisfied() {
        let mut mesh = Mesh::unit_square(4).unwrap();
        let before = mesh.clone();
        let g = smooth_density(|_| 1.0);
        let mut cache = LoadCache::new(&g);
        let s = data_loop(&mut mesh, &mut cache, 10.0, 0.5).unwrap();
        assert_eq!(s.passes, 0);
        assert_eq!(mesh.active(), before.active());
    }

    #[test]
    fn uniform_data_pass_divides_by_sqrt2() {
        // g = 1: d(T)² = |T|², so bisecting every cell halves 𝒟²
        let mesh = Mesh::unit_square(4).unwrap();
        let g = smooth_density(|_| 1.0);
        let mut cache = LoadCache::new(&g);
        let d0 = data_norm(&cache.loads(&mesh));
        let all: Vec<CellId> = mesh.active().to_vec();
        let fine = mesh.refine(&all).unwrap();
        let d1 = data_norm(&cache.loads(&fine));
        assert!((d0 / d1 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn greedy_first_refines_the_largest() {
        let mut mesh = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [2.0, 0.5]],
            vec![[0, 1, 3], [1, 2, 3], [1, 4, 2]],
        )
        .unwrap();
        // d = |T| g gives {1, 5, 1} on the three cells of area 1/2
        let g = smooth_density(|p: Point| if p[0] > 1.0 { 2.0 } else if p[0] + p[1] > 1.0 { 10.0 } else { 2.0 });
        let mut cache = LoadCache::new(&g);
        let d: Vec<f64> = cache.loads(&mesh).iter().map(|l| l.data_sq.sqrt()).collect();
        for (a, b) in d.iter().zip([1.0, 5.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let s = greedy(&mut mesh, &mut cache, 4.0).unwrap();
        assert_eq!(s.passes, 1);
        assert!(!mesh.is_active(1));
        assert!(mesh.is_active(2));
    }

    #[test]
    fn interface_loop_reaches_half_radius() {
        let mut mesh = Mesh::unit_square(4).unwrap();
        let curve = Curve::circle([0.5, 0.5], 0.2, 256).unwrap();
        let r = 0.05;
        interface_loop(&mut mesh, &curve, r).unwrap();
        let g = interface_cells(&mesh, &curve);
        assert!(g.diam <= 0.5 * r);
        mesh.check_conforming().unwrap();
        let before = mesh.n_active();
        let s = interface_loop(&mut mesh, &curve, 2.0 * g.diam).unwrap();
        assert_eq!(s.passes, 0);
        assert_eq!(mesh.n_active(), before);
    }

    #[test]
    fn outer_samples_keep_last_rows() {
        let row = |j, k| RunRow {
            j,
            k,
            tau: 0.0,
            r: 0.0,
            dofs: 0,
            cells: 0,
            estimator_total: 0.0,
            estimator_jump: 0.0,
            estimator_data: 0.0,
            energy_error: None,
            branch: Branch::Mark,
            wall_ms: 0.0,
        };
        let rec = RunRecord { rows: vec![row(0, 0), row(0, 1), row(1, 0), row(2, 0), row(2, 1)] };
        let s: Vec<(usize, usize)> = rec.outer_samples().iter().map(|r| (r.j, r.k)).collect();
        assert_eq!(s, vec![(0, 1), (1, 0), (2, 1)]);
    }
}
