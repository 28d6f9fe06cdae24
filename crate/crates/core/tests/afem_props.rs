use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use regafem::afem::{self, AfemParams, Branch, Problem};
use regafem::fem::{BilinearForm, LoadCache};
use regafem::forcing::{r_of_tau, smooth_density, Curve, Kernel, KernelFamily, RegularizedForcing, SegmentedData};
use regafem::geometry::Point;
use regafem::mesh::{interface_cells, Mesh};

fn circle(f: f64) -> (Arc<Curve>, Arc<SegmentedData>) {
    let curve = Arc::new(Curve::circle([0.3, 0.3], 0.2, 4096).unwrap());
    let data = Arc::new(SegmentedData::constant(&curve, f).unwrap());
    (curve, data)
}

fn smallest_dorfler_set(v: &[f64], theta: f64) -> usize {
    let total: f64 = v.iter().map(|x| x * x).sum();
    (0u32..1 << v.len())
        .filter(|s| {
            let part: f64 = (0..v.len()).filter(|i| s >> i & 1 == 1).map(|i| v[i] * v[i]).sum();
            part >= theta * theta * total
        })
        .map(|s| s.count_ones() as usize)
        .min()
        .unwrap()
}

proptest! {
    #[test]
    fn mark_is_minimal(v in prop::collection::vec(0.0f64..10.0, 1..=12), theta in 0.01f64..0.99) {
        prop_assume!(v.iter().any(|&x| x > 0.0));
        let m = afem::mark(&v, theta);
        prop_assert_eq!(m.len(), smallest_dorfler_set(&v, theta));
        let got: f64 = m.iter().map(|&i| v[i] * v[i]).sum();
        let total: f64 = v.iter().map(|x| x * x).sum();
        prop_assert!(got >= theta * theta * total);
        let mut sorted = m.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), m.len());
    }

    #[test]
    fn tolerances_follow_the_schedule(tau0 in 0.05f64..1.0, beta in 0.1f64..0.95, j_max in 0usize..12) {
        let p = AfemParams { tau0, beta, j_max, ..AfemParams::l_shape() };
        let taus = afem::schedule(&p);
        prop_assert_eq!(taus.len(), j_max);
        for (j, &t) in taus.iter().enumerate() {
            prop_assert_eq!(t, tau0 * beta.powi(j as i32));
            prop_assert_eq!(r_of_tau(t), t * t);
        }
    }
}

#[test]
fn data_loop_cost_scales_like_inverse_tau_squared() {
    let (curve, data) = circle(1.0);
    let r = 2f64.powi(-5);
    let f = RegularizedForcing::new(curve.clone(), data, Kernel::new(KernelFamily::RadialC1), r).unwrap();
    let mut start = Mesh::unit_square(4).unwrap();
    afem::interface_loop(&mut start, &curve, r).unwrap();
    let added: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&tau| {
            let mut mesh = start.clone();
            let mut cache = LoadCache::new(&f);
            let stats = afem::data_loop(&mut mesh, &mut cache, tau, 0.7).unwrap();
            let d: f64 = cache.loads(&mesh).iter().map(|l| l.data_sq).sum::<f64>().sqrt();
            assert!(d <= tau);
            stats.cells_added() as f64
        })
        .collect();
    for w in added.windows(2) {
        let ratio = w[1] / w[0];
        assert!((ratio / 4.0 - 1.0).abs() <= 0.25, "{added:?}");
    }
}

#[test]
fn satisfied_loops_leave_the_mesh_alone() {
    let (curve, data) = circle(1.0);
    let f = RegularizedForcing::new(curve.clone(), data, Kernel::new(KernelFamily::RadialC1), 0.05).unwrap();
    let mesh = Mesh::unit_square(8).unwrap();
    let mut cache = LoadCache::new(&f);
    let d: f64 = cache.loads(&mesh).iter().map(|l| l.data_sq).sum::<f64>().sqrt();
    let mut m = mesh.clone();
    assert_eq!(afem::data_loop(&mut m, &mut cache, 2.0 * d, 0.7).unwrap().passes, 0);
    assert_eq!(m.n_active(), mesh.n_active());
    assert_eq!(afem::greedy(&mut m, &mut cache, 2.0 * d).unwrap().passes, 0);
    assert_eq!(m.n_active(), mesh.n_active());
    // the interface is already resolved for a large radius
    let diam = interface_cells(&m, &curve).diam;
    assert_eq!(afem::interface_loop(&mut m, &curve, 2.0 * diam).unwrap().passes, 0);
    assert_eq!(m.n_active(), mesh.n_active());
}

#[test]
fn interface_loop_postcondition() {
    let (curve, _) = circle(1.0);
    for k in 3..8 {
        let r = 2f64.powi(-k);
        let mut m = Mesh::unit_square(4).unwrap();
        let before = m.clone();
        afem::interface_loop(&mut m, &curve, r).unwrap();
        assert!(m.is_refinement_of(&before));
        let set = interface_cells(&m, &curve);
        assert!(set.diam <= r / 2.0);
        assert!(set.cells.iter().all(|&c| m.h(c) <= r / 2.0));
    }
}

fn bubble_problem() -> (Problem, impl regafem::forcing::Forcing) {
    let exact = |x: Point| (PI * x[0]).sin() * (PI * x[1]).sin();
    let g = smooth_density(move |x: Point| 2.0 * PI * PI * exact(x));
    let problem = Problem { form: BilinearForm::laplace(), boundary: Arc::new(|_| 0.0), exact: None, kink: None };
    (problem, g)
}

#[test]
fn solve_exits_early_when_tolerance_is_met() {
    let (problem, g) = bubble_problem();
    let mesh = Mesh::unit_square(4).unwrap();
    let state = afem::solve_loop(mesh.clone(), &problem, &g, 1e6, &AfemParams::square(), true).unwrap();
    assert_eq!(state.record.rows.len(), 1);
    assert_eq!(state.mesh.n_active(), mesh.n_active());
}

#[test]
fn tiny_radius_takes_the_data_branch_first() {
    let (curve, data) = circle(5.0);
    let f = RegularizedForcing::new(curve.clone(), data, Kernel::new(KernelFamily::RadialC1), 0.005).unwrap();
    let problem = Problem { form: BilinearForm::laplace(), boundary: Arc::new(|_| 0.0), exact: None, kink: Some(curve) };
    let mut mesh = Mesh::unit_square(4).unwrap();
    mesh.refine_in_place(&mesh.active().to_vec()).unwrap();
    let tol = 0.5;
    let mut state = afem::Adaptive::new(mesh, true);
    let mut cache = LoadCache::new(&f);
    let stage = afem::Stage { j: 0, tau: tol, r: 0.005, first: Branch::Start };
    state.gal(&problem, &mut cache, stage, 0, Branch::Start).unwrap();
    assert!(state.indicators.data_norm > 0.9 * state.indicators.total_norm);
    let state = afem::solve_loop(state.mesh, &problem, &f, tol, &AfemParams::square(), true).unwrap();
    assert!(state.record.rows.len() >= 2);
    assert_eq!(state.record.rows[1].branch, Branch::Data);
}

#[test]
fn meshes_are_nested_through_a_run() {
    let (curve, data) = circle(5.0);
    let problem = Problem { form: BilinearForm::laplace(), boundary: Arc::new(|_| 0.0), exact: None, kink: Some(curve.clone()) };
    let params = AfemParams { j_max: 3, tau0: 0.5, ..AfemParams::square() };
    let kernel = Kernel::new(params.kernel);
    let mut state = afem::Adaptive::new(Mesh::unit_square(4).unwrap(), true);
    let mut previous = state.mesh.clone();
    for (j, &tau) in afem::schedule(&params).iter().enumerate() {
        let r = r_of_tau(tau);
        afem::interface_loop(&mut state.mesh, &curve, r).unwrap();
        assert!(state.mesh.is_refinement_of(&previous));
        previous = state.mesh.clone();
        let f = RegularizedForcing::new(curve.clone(), data.clone(), kernel, r).unwrap();
        let mut cache = LoadCache::new(&f);
        let stage = afem::Stage { j, tau, r, first: Branch::Interface };
        state.solve_loop(&problem, &mut cache, params.mu * tau, &params, stage).unwrap();
        assert!(state.mesh.is_refinement_of(&previous));
        assert!(state.indicators.total_norm <= params.mu * tau);
        previous = state.mesh.clone();
    }
    let rows = &state.record.rows;
    assert!(rows.windows(2).all(|w| w[1].cells >= w[0].cells));
    assert!(rows.windows(2).all(|w| (w[1].j, w[1].k) > (w[0].j, w[0].k)));
}
