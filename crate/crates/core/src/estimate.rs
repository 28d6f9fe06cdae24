//! Residual indicators: normal-flux jumps and the data term.

use rayon::prelude::*;

use crate::fem::{BilinearForm, FeFunction};
use crate::forcing::{CellLoad, Forcing, LineForcing};
use crate::geometry;
use crate::mesh::{CellId, Mesh};
use crate::quadrature::GAUSS3_01;

/// Per-cell indicators aligned with `cells`, plus their Euclidean sums.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndicatorSet {
    pub cells: Vec<CellId>,
    pub jump: Vec<f64>,
    pub data: Vec<f64>,
    pub total: Vec<f64>,
    pub jump_norm: f64,
    pub data_norm: f64,
    pub total_norm: f64,
}

impl IndicatorSet {
    pub fn from_parts(cells: Vec<CellId>, jump_sq: Vec<f64>, data_sq: Vec<f64>) -> Self {
        let total = jump_sq
            .iter()
            .zip(&data_sq)
            .map(|(j, d)| (j + d).sqrt())
            .collect();
        let js: f64 = jump_sq.iter().sum();
        let ds: f64 = data_sq.iter().sum();
        IndicatorSet {
            cells,
            jump: jump_sq.iter().map(|v| v.sqrt()).collect(),
            data: data_sq.iter().map(|v| v.sqrt()).collect(),
            total,
            jump_norm: js.sqrt(),
            data_norm: ds.sqrt(),
            total_norm: (js + ds).sqrt(),
        }
    }
}

/// `j(T)² = Σ_{F ⊂ ∂T} h_F ‖[A∇W·n]‖²_{L²(F)}`, zero on boundary edges.
pub fn jump_indicators_sq(mesh: &Mesh, w: &FeFunction, form: &BilinearForm) -> Vec<f64> {
    mesh.active()
        .par_iter()
        .map(|&c| {
            let cell = mesh.cell(c);
            let grad = w.gradient_on(mesh, c);
            let mut s = 0.0;
            for i in 0..3 {
                let (a, b) = cell.edge(i);
                let Some(other) = mesh.edge_cells(a, b).and_then(|e| e.other(c as u32)) else {
                    continue;
                };
                let g_other = w.gradient_on(mesh, other as usize);
                let (pa, pb) = (mesh.vertex(a as usize), mesh.vertex(b as usize));
                let e = geometry::sub(pb, pa);
                let len = geometry::norm(e);
                let n = [e[1] / len, -e[0] / len];
                let diff = geometry::sub(grad, g_other);
                let mut l2 = 0.0;
                for &(t, wq) in GAUSS3_01.iter() {
                    let x = geometry::add(pa, geometry::scale(e, t));
                    let a = form.diffusion(x);
                    let flux = (a[0][0] * diff[0] + a[0][1] * diff[1]) * n[0]
                        + (a[1][0] * diff[0] + a[1][1] * diff[1]) * n[1];
                    l2 += wq * len * flux * flux;
                }
                s += len * l2;
            }
            s
        })
        .collect()
}

/// Indicators of `W` for the data `loads` (aligned with `mesh.active()`).
pub fn estimate_with_loads(
    mesh: &Mesh,
    w: &FeFunction,
    form: &BilinearForm,
    loads: &[CellLoad],
) -> IndicatorSet {
    IndicatorSet::from_parts(
        mesh.active().to_vec(),
        jump_indicators_sq(mesh, w, form),
        loads.iter().map(|l| l.data_sq).collect(),
    )
}

pub fn estimate(mesh: &Mesh, w: &FeFunction, forcing: &dyn Forcing, form: &BilinearForm) -> IndicatorSet {
    let loads: Vec<CellLoad> = mesh
        .active()
        .par_iter()
        .map(|&c| forcing.cell_load(&mesh.triangle(c)))
        .collect();
    estimate_with_loads(mesh, w, form, &loads)
}

/// Data-only indicators `d(T)` for `loads`.
pub fn data_indicators(mesh: &Mesh, loads: &[CellLoad]) -> IndicatorSet {
    IndicatorSet::from_parts(
        mesh.active().to_vec(),
        vec![0.0; loads.len()],
        loads.iter().map(|l| l.data_sq).collect(),
    )
}

/// `h_T^{1/2} ‖f‖_{L²(T∩γ)}` by clipping the curve against every cell.
pub fn surrogate_data_indicator(mesh: &Mesh, line: &LineForcing) -> IndicatorSet {
    let loads: Vec<CellLoad> = mesh
        .active()
        .par_iter()
        .map(|&c| line.cell_load(&mesh.triangle(c)))
        .collect();
    data_indicators(mesh, &loads)
}
