use std::sync::Arc;

use proptest::prelude::*;
use regafem::forcing::{Curve, Forcing, Kernel, KernelFamily, RegularizedForcing, SegmentedData};
use regafem::geometry::{self, Point};
use regafem::mesh::Mesh;

const FAMILIES: [KernelFamily; 3] = [KernelFamily::RadialC1, KernelFamily::TensorCinf, KernelFamily::TensorLinf];

// 5-point Gauss–Legendre on [-1, 1]
const GX: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GW: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let m = a + (p as f64 + 0.5) * h;
        for (x, w) in GX.iter().zip(GW) {
            s += w * 0.5 * h * f(m + 0.5 * h * x);
        }
    }
    s
}

/// `∫ δ^r`, in polar coordinates for the radial kernel and as a tensor
/// product for the others (both families factor into 1D bumps).
fn mass(k: &Kernel, r: f64) -> f64 {
    match k.family {
        KernelFamily::RadialC1 => {
            2.0 * std::f64::consts::PI * gauss(|s| k.delta_r(r, [s, 0.0]).unwrap() * s, 0.0, r, 400)
        }
        _ => {
            let d = |x: Point| k.delta_r(r, x).unwrap();
            let gx = gauss(|t| d([t, 0.0]), -r, r, 400);
            let gy = gauss(|t| d([0.0, t]), -r, r, 400);
            gx * gy / d([0.0, 0.0])
        }
    }
}

#[test]
fn every_kernel_has_unit_mass() {
    for family in FAMILIES {
        let k = Kernel::new(family);
        for r in [1.0, 0.1, 0.01] {
            let m = mass(&k, r);
            assert!((m - 1.0).abs() <= 1e-6, "{family:?} r = {r}: mass {m}");
        }
    }
}

#[test]
fn moments_are_exact() {
    let samples = [[0.0, 0.0], [0.3, -0.2], [-0.7, 0.45]];
    for family in FAMILIES {
        let k = Kernel::new(family);
        for order in [0, 1] {
            let d = k.moment_defect(0.1, order, &samples).unwrap();
            assert!(d <= 1e-6, "{family:?} order {order}: {d:e}");
        }
    }
}

fn family() -> impl Strategy<Value = KernelFamily> {
    prop::sample::select(FAMILIES.to_vec())
}

proptest! {
    #[test]
    fn delta_is_nonnegative(f in family(), r in 1e-3f64..2.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let k = Kernel::new(f);
        let d = k.delta_r(r, [x, y]).unwrap();
        prop_assert!(d >= 0.0);
        if !k.in_support(r, [x, y]) {
            prop_assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn scaled_monotonicity(f in family(), r1 in 0.01f64..1.0, ratio in 0.05f64..1.0, x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let k = Kernel::new(f);
        let r2 = r1 * ratio;
        let (p2, p1) = (k.psi([x / r2, y / r2]), k.psi([x / r1, y / r1]));
        prop_assert!(p2 <= p1 * (1.0 + 1e-12), "{} > {}", p2, p1);
        let (d2, d1) = (k.delta_r(r2, [x, y]).unwrap(), k.delta_r(r1, [x, y]).unwrap());
        prop_assert!(d2 <= (r1 / r2).powi(2) * d1 * (1.0 + 1e-12));
    }
}

fn circle_forcing(family: KernelFamily, r: f64) -> RegularizedForcing {
    let curve = Arc::new(Curve::circle([0.5, 0.5], 0.2, 1024).unwrap());
    let data = Arc::new(SegmentedData::constant(&curve, 1.0).unwrap());
    RegularizedForcing::new(curve, data, Kernel::new(family), r).unwrap()
}

/// Length of the part of segment `a b` inside the closed support of `δ^r(· − x)`.
fn length_in_support(k: &Kernel, r: f64, x: Point, a: Point, b: Point) -> f64 {
    let d = geometry::sub(b, a);
    let len = geometry::norm(d);
    let (lo, hi) = match k.family {
        KernelFamily::RadialC1 => {
            let p = geometry::sub(a, x);
            let (qa, qb, qc) = (geometry::dot(d, d), 2.0 * geometry::dot(p, d), geometry::dot(p, p) - r * r);
            let disc = qb * qb - 4.0 * qa * qc;
            if disc < 0.0 {
                return 0.0;
            }
            ((-qb - disc.sqrt()) / (2.0 * qa), (-qb + disc.sqrt()) / (2.0 * qa))
        }
        _ => {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..2 {
                if d[i] == 0.0 {
                    if (a[i] - x[i]).abs() > r {
                        return 0.0;
                    }
                    continue;
                }
                let t0 = (x[i] - r - a[i]) / d[i];
                let t1 = (x[i] + r - a[i]) / d[i];
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
            }
            (lo, hi)
        }
    };
    (hi.min(1.0) - lo.max(0.0)).max(0.0) * len
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forcing_is_bounded_and_local(f in family(), k in 4i32..8, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let r = 2f64.powi(-k);
        let forcing = circle_forcing(f, r);
        let kernel = *forcing.kernel();
        let curve = forcing.curve().clone();
        let v = forcing.eval([x, y]);
        prop_assert!(v >= 0.0);
        // a quadrature panel (length r/4) straddling the support edge counts in full
        let near: f64 = (0..curve.n_segments())
            .map(|s| {
                let (a, b) = curve.segment(s);
                length_in_support(&kernel, 1.25 * r, [x, y], a, b)
            })
            .sum();
        let bound = kernel.sup() / (r * r) * near;
        prop_assert!(v <= bound * (1.0 + 1e-9) + 1e-12, "{} > {}", v, bound);
        if near == 0.0 {
            prop_assert_eq!(v, 0.0);
        }
        let dist = curve.distance_to_point([x, y], 1.0).unwrap();
        if dist > forcing.reach() {
            prop_assert_eq!(v, 0.0);
        }
    }
}

/// `‖F^r‖²_{L²(Ω)}` from the cell integrals, where `data_sq = |T| ‖F^r‖²_T`.
fn l2_norm(forcing: &RegularizedForcing, mesh: &Mesh) -> f64 {
    mesh.active()
        .iter()
        .map(|&c| forcing.cell_load(&mesh.triangle(c)).data_sq / mesh.area(c))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn l2_norm_grows_like_inverse_sqrt_radius() {
    let mesh = Mesh::unit_square(32).unwrap();
    for family in FAMILIES {
        let norms: Vec<f64> = (4..=7).map(|k| l2_norm(&circle_forcing(family, 2f64.powi(-k)), &mesh)).collect();
        for w in norms.windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio / 2f64.sqrt() - 1.0).abs() <= 0.15, "{family:?}: {norms:?}");
        }
    }
}

#[test]
fn forcing_mass_matches_curve_data() {
    // ∫_Ω F^r = ∫_γ f when the support stays inside Ω
    let mesh = Mesh::unit_square(16).unwrap();
    for family in FAMILIES {
        let forcing = circle_forcing(family, 0.05);
        let total: f64 = mesh
            .active()
            .iter()
            .map(|&c| forcing.cell_load(&mesh.triangle(c)).load.iter().sum::<f64>())
            .sum();
        let expect = forcing.data().l2_norm_sq(forcing.curve());
        // the box kernel jumps inside cells, so its cell quadrature is only first order
        let tol = if family == KernelFamily::TensorLinf { 5e-3 } else { 1e-4 };
        assert!((total - expect).abs() <= tol * expect, "{family:?}: {total} vs {expect}");
    }
}

#[test]
fn r_of_tau_is_monotone() {
    let mut prev = 0.0;
    for k in 1..20 {
        let r = regafem::forcing::r_of_tau(k as f64 * 0.05);
        assert!(r > prev);
        prev = r;
    }
    assert_eq!(regafem::forcing::r_of_tau(0.1), 0.1 * 0.1);
}
