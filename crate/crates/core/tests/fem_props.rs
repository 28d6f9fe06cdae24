use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use regafem::estimate::{estimate_with_loads, surrogate_data_indicator};
use regafem::fem::{self, BilinearForm, ExactSolution, LoadCache};
use regafem::forcing::{smooth_density, Curve, Forcing, Kernel, KernelFamily, LineForcing, RegularizedForcing, SegmentedData};
use regafem::geometry::Point;
use regafem::mesh::Mesh;

fn circle(f: f64) -> (Arc<Curve>, Arc<SegmentedData>) {
    let curve = Arc::new(Curve::circle([0.3, 0.3], 0.2, 2048).unwrap());
    let data = Arc::new(SegmentedData::constant(&curve, f).unwrap());
    (curve, data)
}

fn random_mesh(seed: u64, rounds: usize) -> Mesh {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = Mesh::unit_square(4).unwrap();
    for _ in 0..rounds {
        let marked: Vec<usize> = m.active().iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
        m.refine_in_place(&marked).unwrap();
    }
    m
}

struct Bubble;

impl ExactSolution for Bubble {
    fn value(&self, x: Point) -> f64 {
        (PI * x[0]).sin() * (PI * x[1]).sin()
    }

    fn gradient(&self, x: Point) -> Point {
        [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn system_is_symmetric_and_orthogonal(seed in 0u64..500, k in 3i32..6) {
        let mesh = random_mesh(seed, 3);
        let (curve, data) = circle(5.0);
        let f = RegularizedForcing::new(curve, data, Kernel::new(KernelFamily::RadialC1), 2f64.powi(-k)).unwrap();
        let loads = LoadCache::new(&f).loads(&mesh);
        let form = BilinearForm::laplace();
        let (w, system, stats) = fem::solve_galerkin(&mesh, &form, &loads, &|p: Point| p[0] * p[1], None).unwrap();
        prop_assert!(system.matrix().asymmetry() <= 1e-14);
        prop_assert!(stats.relative_residual <= 1e-10);
        let res = system.galerkin_residual(&w);
        let worst = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(worst <= 1e-8, "orthogonality defect {}", worst);
        let (_, stats) = system.solve(None, true).unwrap();
        prop_assert!(stats.smallest_ritz.unwrap() > 0.0);
    }
}

#[test]
fn energy_error_decreases_under_uniform_refinement() {
    let form = BilinearForm::laplace();
    let g = smooth_density(|x: Point| 2.0 * PI * PI * Bubble.value(x));
    let mut mesh = Mesh::unit_square(2).unwrap();
    let mut prev = f64::INFINITY;
    for _ in 0..7 {
        let loads = LoadCache::new(&g).loads(&mesh);
        let (w, _, _) = fem::solve_galerkin(&mesh, &form, &loads, &|_| 0.0, None).unwrap();
        let e = fem::energy_error(&mesh, &w, &form, &Bubble, None);
        assert!(e <= prev, "{e} after {prev}");
        prev = e;
        let all = mesh.active().to_vec();
        mesh.refine_in_place(&all).unwrap();
    }
}

#[test]
fn load_vanishes_away_from_the_curve() {
    let mesh = random_mesh(7, 4);
    let (curve, data) = circle(1.0);
    for family in [KernelFamily::RadialC1, KernelFamily::TensorLinf] {
        let f = RegularizedForcing::new(curve.clone(), data.clone(), Kernel::new(family), 0.03).unwrap();
        let loads = LoadCache::new(&f).loads(&mesh);
        let system = fem::assemble(&mesh, &BilinearForm::laplace(), &loads, &|_| 0.0).unwrap();
        let mut near = vec![false; mesh.n_vertices()];
        for &c in mesh.active() {
            if curve.near_triangle(&mesh.triangle(c), f.reach()) {
                for v in mesh.cell(c).vertices {
                    near[v as usize] = true;
                }
            }
        }
        let mut zero = 0;
        for (v, &l) in system.load().iter().enumerate() {
            if !near[v] {
                assert_eq!(l, 0.0, "vertex {v}");
                zero += 1;
            }
        }
        assert!(zero > 0);
        // the data indicator is local in the same way
        for (&c, l) in mesh.active().iter().zip(&loads) {
            if !curve.near_triangle(&mesh.triangle(c), f.reach()) {
                assert_eq!(l.data_sq, 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn surrogate_partitions_the_curve(seed in 0u64..500, rounds in 0usize..5) {
        let mesh = random_mesh(seed, rounds);
        let (curve, data) = circle(3.0);
        let line = LineForcing::new(curve.clone(), data.clone()).unwrap();
        let total: f64 = mesh.active().iter().map(|&c| line.clipped_integrals(&mesh.triangle(c)).1).sum();
        let expect = data.l2_norm_sq(&curve);
        prop_assert!((total - expect).abs() <= 1e-10 * expect.max(1.0));
        let set = surrogate_data_indicator(&mesh, &line);
        for (i, &c) in set.cells.iter().enumerate() {
            let (_, f2, len) = line.clipped_integrals(&mesh.triangle(c));
            let expect = mesh.h(c).sqrt() * 3.0 * len.sqrt();
            prop_assert!((set.data[i] - expect).abs() <= 1e-12 * expect.max(1.0));
            prop_assert!((f2 - 9.0 * len).abs() <= 1e-12);
        }
    }

    #[test]
    fn indicators_satisfy_pythagoras(seed in 0u64..500) {
        let mesh = random_mesh(seed, 3);
        let (curve, data) = circle(5.0);
        let f = RegularizedForcing::new(curve, data, Kernel::new(KernelFamily::TensorCinf), 0.05).unwrap();
        let loads = LoadCache::new(&f).loads(&mesh);
        let form = BilinearForm::laplace();
        let (w, _, _) = fem::solve_galerkin(&mesh, &form, &loads, &|_| 0.0, None).unwrap();
        let set = estimate_with_loads(&mesh, &w, &form, &loads);
        for i in 0..set.cells.len() {
            prop_assert!(set.jump[i] >= 0.0 && set.data[i] >= 0.0);
            let lhs = set.total[i] * set.total[i];
            let rhs = set.jump[i] * set.jump[i] + set.data[i] * set.data[i];
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300));
        }
        let lhs = set.total_norm * set.total_norm;
        let rhs = set.jump_norm * set.jump_norm + set.data_norm * set.data_norm;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }
}

#[test]
fn estimator_is_reliable_along_a_solve_run() {
    use regafem::afem::{self, AfemParams, Problem};
    let form = BilinearForm::laplace();
    let g = smooth_density(|x: Point| 2.0 * PI * PI * Bubble.value(x));
    let problem = Problem { form, boundary: Arc::new(|_| 0.0), exact: Some(Arc::new(Bubble)), kink: None };
    let state = afem::solve_loop(Mesh::unit_square(2).unwrap(), &problem, &g, 0.2, &AfemParams::square(), true).unwrap();
    let rows = &state.record.rows;
    assert!(rows.len() >= 4);
    for row in &rows[2..] {
        let eff = row.energy_error.unwrap() / row.estimator_total;
        assert!((0.05..=1.5).contains(&eff), "effectivity {eff} at {} dofs", row.dofs);
    }
}

#[test]
fn constant_density_gives_area_indicator() {
    let mesh = random_mesh(3, 2);
    let g = smooth_density(|_| 1.0);
    for &c in mesh.active() {
        let load = g.cell_load(&mesh.triangle(c));
        let a = mesh.area(c);
        assert!((load.data_sq.sqrt() - a).abs() <= 1e-14);
    }
}
