//! Gauss rules on intervals and triangles.

use crate::geometry::{triangle_area, Point};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Four-point Gauss–Legendre rule on `[0, 1]`.
pub const GAUSS4_01: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// Three-point Gauss–Legendre rule on `[0, 1]`.
pub const GAUSS3_01: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Symmetric six-point rule exact for degree four: barycentric coordinates
/// and weights normalised to sum to one.
pub const TRI_DEG4: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445_948_490_915_964_9;
    const B: f64 = 0.091_576_213_509_770_74;
    const WA: f64 = 0.223_381_589_678_011_47;
    const WB: f64 = 0.109_951_743_655_321_87;
    [
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ]
};

#[inline]
pub fn barycentric_point(t: &[Point; 3], l: [f64; 3]) -> Point {
    [
        l[0] * t[0][0] + l[1] * t[1][0] + l[2] * t[2][0],
        l[0] * t[0][1] + l[1] * t[1][1] + l[2] * t[2][1],
    ]
}

/// `∫_T f` with the degree-four rule.
pub fn integrate_triangle(t: &[Point; 3], mut f: impl FnMut(Point) -> f64) -> f64 {
    let area = triangle_area(t);
    TRI_DEG4
        .iter()
        .map(|&(l, w)| w * f(barycentric_point(t, l)))
        .sum::<f64>()
        * area
}

/// Globally adaptive Gauss–Legendre on `[a, b]`: bisects until the 10-point
/// estimate on each piece agrees with the sum over its halves within `tol`
/// (scaled by the piece length).
pub fn adaptive_integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (x, w) = gauss_legendre(10);
    let rule = |lo: f64, hi: f64| -> f64 {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        x.iter().zip(&w).map(|(&xi, &wi)| wi * f(c + h * xi)).sum::<f64>() * h
    };
    fn recurse(
        rule: &impl Fn(f64, f64) -> f64,
        lo: f64,
        hi: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let mid = 0.5 * (lo + hi);
        let left = rule(lo, mid);
        let right = rule(mid, hi);
        if depth >= 40 || (left + right - whole).abs() <= tol {
            left + right
        } else {
            recurse(rule, lo, mid, left, 0.5 * tol, depth + 1)
                + recurse(rule, mid, hi, right, 0.5 * tol, depth + 1)
        }
    }
    let whole = rule(a, b);
    recurse(&rule, a, b, whole, tol, 0)
}
