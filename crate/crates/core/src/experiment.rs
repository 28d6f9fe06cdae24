//! Test problems, experiment configuration, runs and convergence slopes.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::afem::{self, Adaptive, AfemParams, Branch, InterfaceData, Problem, RunRecord, RunRow};
use crate::error::{Error, Result};
use crate::fem::{BilinearForm, ExactSolution};
use crate::forcing::{r_of_tau, Curve, SegmentedData};
use crate::geometry::{self, Point, Polygon};
use crate::mesh::Mesh;
use crate::vtk;

/// `-fR ln max(|x - c|, R)`: harmonic off the circle with normal-derivative
/// jump `f` across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSolution {
    pub center: Point,
    pub radius: f64,
    pub f: f64,
}

impl ExactSolution for CircleSolution {
    fn value(&self, x: Point) -> f64 {
        let d = geometry::dist(x, self.center).max(self.radius);
        -self.f * self.radius * d.ln()
    }

    fn gradient(&self, x: Point) -> Point {
        let v = geometry::sub(x, self.center);
        let d2 = geometry::dot(v, v);
        if d2 <= self.radius * self.radius {
            [0.0, 0.0]
        } else {
            let s = -self.f * self.radius / d2;
            [s * v[0], s * v[1]]
        }
    }
}

/// Polar angle measured in `[0, 2π)` with the positive x axis mapped to `2π`,
/// so that it is continuous on the L-shaped domain.
fn l_shape_angle(x: Point) -> f64 {
    let t = x[1].atan2(x[0]);
    if t <= 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// `ρ^{2/3} sin(2/3 (φ - π/2))`, the reentrant-corner singularity.
pub fn corner_singularity(x: Point) -> (f64, Point) {
    let rho = geometry::norm(x);
    if rho == 0.0 {
        return (0.0, [0.0, 0.0]);
    }
    let phi = l_shape_angle(x);
    let a = 2.0 / 3.0 * (phi - 0.5 * PI);
    let value = rho.powf(2.0 / 3.0) * a.sin();
    let dr = 2.0 / 3.0 * rho.powf(-1.0 / 3.0) * a.sin();
    let dphi = 2.0 / 3.0 * rho.powf(-1.0 / 3.0) * a.cos();
    let (c, s) = (phi.cos(), phi.sin());
    (value, [dr * c - dphi * s, dr * s + dphi * c])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LShapeSolution {
    pub circle: CircleSolution,
}

impl ExactSolution for LShapeSolution {
    fn value(&self, x: Point) -> f64 {
        corner_singularity(x).0 + self.circle.value(x)
    }

    fn gradient(&self, x: Point) -> Point {
        geometry::add(corner_singularity(x).1, self.circle.gradient(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `(-1, 1)² \ [0, 1]²`.
    LShape,
    /// `(0, 1)²`.
    UnitSquare,
    /// `(-1, 1)²`.
    Square,
}

impl Domain {
    pub fn polygon(self) -> Polygon {
        let vertices = match self {
            Domain::LShape => vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [-1.0, 1.0]],
            Domain::UnitSquare => vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            Domain::Square => vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]],
        };
        Polygon { vertices }
    }

    /// Structured mesh with squares of side `1/n`, split along a diagonal.
    pub fn mesh(self, n: usize) -> Result<Mesh> {
        match self {
            Domain::LShape => Mesh::l_shape(n),
            Domain::UnitSquare => Mesh::unit_square(n),
            Domain::Square => Mesh::rectangle(-1.0, 1.0, -1.0, 1.0, 2 * n, 2 * n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle {
        center: Point,
        radius: f64,
        n_segments: usize,
        f: f64,
    },
    Polyline {
        points: Vec<Point>,
        closed: bool,
        /// One value per segment.
        f: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub curve: CurveSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    Regsolve,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub driver: Driver,
    pub params: AfemParams,
    /// Squares per unit length in the initial structured mesh.
    pub initial_mesh: usize,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Baseline only: stop once the energy error falls below this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_error: Option<f64>,
}

pub const DEFAULT_SEGMENTS: usize = 1 << 14;

impl ExperimentConfig {
    /// Circle of radius 0.2 around `(0.5, -0.5)` in the L-shaped domain.
    pub fn l_shape() -> Self {
        ExperimentConfig {
            problem: ProblemSpec {
                domain: Domain::LShape,
                curve: CurveSpec::Circle {
                    center: [0.5, -0.5],
                    radius: 0.2,
                    n_segments: DEFAULT_SEGMENTS,
                    f: 5.0,
                },
            },
            driver: Driver::Regsolve,
            params: AfemParams::l_shape(),
            initial_mesh: 4,
            deterministic: false,
            threads: None,
            target_error: None,
        }
    }

    /// Circle of radius 0.2 around `(0.3, 0.3)` in the unit square.
    pub fn unit_square(driver: Driver) -> Self {
        ExperimentConfig {
            problem: ProblemSpec {
                domain: Domain::UnitSquare,
                curve: CurveSpec::Circle {
                    center: [0.3, 0.3],
                    radius: 0.2,
                    n_segments: DEFAULT_SEGMENTS,
                    f: 5.0,
                },
            },
            driver,
            params: AfemParams::square(),
            initial_mesh: 4,
            deterministic: false,
            threads: None,
            target_error: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut s = String::new();
        std::fs::File::open(path)?.read_to_string(&mut s)?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Every offending field, as `field: message`.
    pub fn problems(&self) -> Vec<String> {
        let mut out: Vec<String> = self.params.problems().into_iter().map(|m| format!("params: {m}")).collect();
        if self.initial_mesh == 0 {
            out.push("initial_mesh: must be at least 1".into());
        }
        if self.threads == Some(0) {
            out.push("threads: must be at least 1".into());
        }
        if let Some(t) = self.target_error {
            if !(t > 0.0) {
                out.push("target_error: must be positive".into());
            }
            if self.driver != Driver::Baseline {
                out.push("target_error: only used by the baseline driver".into());
            }
        }
        match &self.problem.curve {
            CurveSpec::Circle { radius, n_segments, f, center } => {
                if !(*radius > 0.0) {
                    out.push("problem.curve.radius: must be positive".into());
                }
                if *n_segments < 3 {
                    out.push("problem.curve.n_segments: must be at least 3".into());
                }
                if !f.is_finite() {
                    out.push("problem.curve.f: must be finite".into());
                }
                if !center.iter().all(|c| c.is_finite()) {
                    out.push("problem.curve.center: must be finite".into());
                }
            }
            CurveSpec::Polyline { points, closed, f } => {
                let segs = if *closed { points.len() } else { points.len().saturating_sub(1) };
                if f.len() != segs {
                    out.push(format!("problem.curve.f: expected {segs} values, got {}", f.len()));
                }
            }
        }
        if out.is_empty() {
            if let Err(e) = self.build() {
                out.push(format!("problem: {e}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::input(p.join("\n")))
        }
    }

    /// Builds the initial mesh, the problem and the curve data.
    pub fn build(&self) -> Result<TestProblem> {
        let domain = self.problem.domain;
        let polygon = domain.polygon();
        let (curve, data, exact): (Curve, _, Option<CircleSolution>) = match &self.problem.curve {
            CurveSpec::Circle { center, radius, n_segments, f } => {
                let c = Curve::circle(*center, *radius, *n_segments)?.within(&polygon)?;
                let d = SegmentedData::constant(&c, *f)?;
                (c, d, Some(CircleSolution { center: *center, radius: *radius, f: *f }))
            }
            CurveSpec::Polyline { points, closed, f } => {
                let c = Curve::polyline(points.clone(), *closed)?.within(&polygon)?;
                let d = SegmentedData::per_segment(&c, f.clone())?;
                (c, d, None)
            }
        };
        let mesh = domain.mesh(self.initial_mesh)?;
        afem::validate_initial_grid(&mesh, &curve)?;
        let curve = Arc::new(curve);
        let exact: Option<Arc<dyn ExactSolution>> = match (exact, domain) {
            (Some(c), Domain::LShape) => Some(Arc::new(LShapeSolution { circle: c })),
            (Some(c), _) => Some(Arc::new(c)),
            (None, _) => None,
        };
        let boundary: Arc<dyn Fn(Point) -> f64 + Send + Sync> = match &exact {
            Some(u) => {
                let u = u.clone();
                Arc::new(move |x| u.value(x))
            }
            None => Arc::new(|_| 0.0),
        };
        Ok(TestProblem {
            domain: polygon,
            mesh,
            problem: Problem {
                form: BilinearForm::laplace(),
                boundary,
                exact,
                kink: Some(curve.clone()),
            },
            interface: InterfaceData {
                curve,
                data: Arc::new(data),
            },
        })
    }

    /// Warnings that do not prevent a run.
    pub fn warnings(&self, tp: &TestProblem) -> Vec<String> {
        let gap = tp.interface.curve.boundary_gap();
        let r0 = r_of_tau(self.params.tau0);
        let mut out = Vec::new();
        if self.driver == Driver::Regsolve && r0 >= gap {
            out.push(format!(
                "initial radius {r0} is not below the curve-boundary distance {gap:.6}; the regularized forcing is cut off by the boundary"
            ));
        }
        out
    }
}

/// Everything a driver needs for one experiment.
#[derive(Clone)]
pub struct TestProblem {
    pub domain: Polygon,
    pub mesh: Mesh,
    pub problem: Problem,
    pub interface: InterfaceData,
}

/// Least-squares slope of `ln error` against `ln dofs` over the last
/// `n_last` points.
pub fn slope_fit(points: &[(f64, f64)], n_last: usize) -> Result<f64> {
    if n_last < 2 || points.len() < n_last {
        return Err(Error::input(format!(
            "slope needs at least 2 points and n_last ≤ {} (got n_last = {n_last})",
            points.len()
        )));
    }
    let pts = &points[points.len() - n_last..];
    if pts.iter().any(|&(n, e)| !(n > 0.0) || !(e > 0.0)) {
        return Err(Error::input("dofs and errors must be positive"));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::input("all samples have the same number of dofs"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// `(dofs, energy error)` of the last solve of every outer iteration.
pub fn outer_points(record: &RunRecord) -> Vec<(f64, f64)> {
    record
        .outer_samples()
        .into_iter()
        .filter_map(|r| r.energy_error.map(|e| (r.dofs as f64, e)))
        .collect()
}

/// Slope over the last `n_last` outer samples, or over all of them when
/// fewer are available.
pub fn record_slope(record: &RunRecord, n_last: usize) -> Result<f64> {
    let pts = outer_points(record);
    slope_fit(&pts, n_last.min(pts.len()))
}

pub const CSV_HEADER: [&str; 12] = [
    "j",
    "k",
    "tau",
    "r",
    "dofs",
    "cells",
    "estimator_total",
    "estimator_jump",
    "estimator_data",
    "energy_error",
    "branch",
    "wall_ms",
];

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Start => "START",
        Branch::Data => "DATA",
        Branch::Mark => "MARK",
        Branch::Interface => "INTERFACE",
    }
}

pub fn write_csv<W: Write>(record: &RunRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &record.rows {
        w.write_record([
            r.j.to_string(),
            r.k.to_string(),
            sci(r.tau),
            sci(r.r),
            r.dofs.to_string(),
            r.cells.to_string(),
            sci(r.estimator_total),
            sci(r.estimator_jump),
            sci(r.estimator_data),
            r.energy_error.map(sci).unwrap_or_default(),
            branch_name(r.branch).to_string(),
            sci(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<RunRecord> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::input(format!("unexpected CSV header {header:?}")));
    }
    let rows = rd.deserialize::<RunRow>().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(RunRecord { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub driver: Driver,
    pub gal_calls: usize,
    pub outer_iterations: usize,
    pub final_dofs: usize,
    pub final_cells: usize,
    pub final_estimator: f64,
    pub final_energy_error: Option<f64>,
    /// Slope of energy error against dofs over the last five outer samples.
    pub slope: Option<f64>,
    pub slope_samples: usize,
    pub warnings: Vec<String>,
}

/// Runs the configured driver.
pub fn execute(config: &ExperimentConfig) -> Result<(Adaptive, RunSummary)> {
    config.validate()?;
    let tp = config.build()?;
    let state = match config.driver {
        Driver::Regsolve => afem::regsolve(tp.mesh.clone(), &tp.problem, &tp.interface, &config.params, config.deterministic)?,
        Driver::Baseline => afem::baseline_solve(
            tp.mesh.clone(),
            &tp.problem,
            &tp.interface,
            &config.params,
            config.deterministic,
            config.target_error,
        )?,
    };
    let pts = outer_points(&state.record);
    let n = pts.len().min(5);
    let slope = if n >= 2 { slope_fit(&pts, n).ok() } else { None };
    let last = state.record.rows.last().ok_or_else(|| Error::Numerical("run produced no rows".into()))?;
    let summary = RunSummary {
        driver: config.driver,
        gal_calls: state.record.rows.len(),
        outer_iterations: state.record.outer_samples().len(),
        final_dofs: last.dofs,
        final_cells: last.cells,
        final_estimator: last.estimator_total,
        final_energy_error: last.energy_error,
        slope,
        slope_samples: if slope.is_some() { n } else { 0 },
        warnings: config.warnings(&tp),
    };
    Ok((state, summary))
}

/// Runs the experiment and writes `run.csv`, `mesh.vtk`, `solution.vtk` and
/// `summary.json` into `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let (state, summary) = execute(config)?;
    std::fs::create_dir_all(out)?;
    write_csv(&state.record, std::fs::File::create(out.join("run.csv"))?)?;
    let mesh = &state.mesh;
    let generation: Vec<f64> = mesh.active().iter().map(|&c| mesh.cell(c).generation as f64).collect();
    vtk::write(
        &out.join("mesh.vtk"),
        mesh,
        "final mesh",
        &[],
        &[
            ("generation", &generation),
            ("estimator", &state.indicators.total),
            ("jump", &state.indicators.jump),
            ("data", &state.indicators.data),
        ],
    )?;
    vtk::write(&out.join("solution.vtk"), mesh, "discrete solution", &[("u", state.solution.values())], &[])?;
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..8).map(|k| (4f64.powi(k), 2f64.powi(-k))).collect();
        assert!((slope_fit(&pts, 5).unwrap() + 0.5).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = (1..4).map(|k| (k as f64 * 10.0, 0.3)).collect();
        assert_eq!(slope_fit(&flat, 3).unwrap(), 0.0);
        assert!(slope_fit(&flat, 1).is_err());
        assert!(slope_fit(&flat, 4).is_err());
    }

    #[test]
    fn circle_solution_jump_is_f() {
        let u = CircleSolution { center: [0.3, 0.3], radius: 0.2, f: 5.0 };
        let x = [0.5 + 1e-9, 0.3];
        let outer = u.gradient(x)[0];
        let inner = u.gradient([0.5 - 1e-9, 0.3])[0];
        // outward normal (1, 0): [∇u·ν] = inner - outer
        assert!((inner - outer - 5.0).abs() < 1e-6);
    }

    #[test]
    fn corner_term_vanishes_on_the_reentrant_edges() {
        for x in [[0.5, 0.0], [0.0, 0.5], [1.0, 0.0], [0.0, 1.0]] {
            assert!(corner_singularity(x).0.abs() < 1e-14, "{x:?}");
        }
        assert!(corner_singularity([-0.5, -0.5]).0 > 0.0);
    }

    #[test]
    fn presets_validate() {
        assert!(ExperimentConfig::l_shape().problems().is_empty());
        assert!(ExperimentConfig::unit_square(Driver::Baseline).problems().is_empty());
        let mut bad = ExperimentConfig::l_shape();
        bad.params.theta = 2.0;
        bad.initial_mesh = 0;
        assert_eq!(bad.problems().len(), 2);
    }

    #[test]
    fn curve_outside_the_domain_is_rejected() {
        let mut c = ExperimentConfig::l_shape();
        c.problem.curve = CurveSpec::Circle { center: [0.5, 0.5], radius: 0.2, n_segments: 64, f: 1.0 };
        assert_eq!(c.problems().len(), 1);
    }

    #[test]
    fn l_shape_preset_flags_the_large_radius() {
        let c = ExperimentConfig::l_shape();
        let tp = c.build().unwrap();
        assert_eq!(c.warnings(&tp).len(), 1);
    }
}
