//! Tetrahedral quadrature.
//!
//! Polynomial moments of degree two are integrated by the closed vertex-value
//! formula; everything smooth goes through a 14-point degree-5 rule. For
//! integrands with a point singularity at a vertex the rule is applied on a
//! geometrically graded decomposition of the element toward that vertex.

use crate::geometry::{tet_volume, Vec3};

/// `int_T p q` for linear `p`, `q` given by their values at the four
/// vertices of a tetrahedron of volume `vol`. Exact.
pub fn int_tet_linear_product(vol: f64, p: &[f64; 4], q: &[f64; 4]) -> f64 {
    let dot: f64 = (0..4).map(|k| p[k] * q[k]).sum();
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    vol / 20.0 * (dot + sp * sq)
}

/// Barycentric abscissae and weights of the 14-point rule, exact to degree 5.
/// Weights are normalized to sum to one.
pub const TET_14: [([f64; 4], f64); 14] = {
    const A1: f64 = 0.310_885_919_263_300_6;
    const B1: f64 = 1.0 - 3.0 * A1;
    const W1: f64 = 0.112_687_925_718_015_85;
    const A2: f64 = 0.092_735_250_310_891_23;
    const B2: f64 = 1.0 - 3.0 * A2;
    const W2: f64 = 0.073_493_043_116_361_95;
    const A3: f64 = 0.045_503_704_125_649_65;
    const B3: f64 = 0.5 - A3;
    const W3: f64 = 0.042_546_020_777_081_466;
    [
        ([B1, A1, A1, A1], W1),
        ([A1, B1, A1, A1], W1),
        ([A1, A1, B1, A1], W1),
        ([A1, A1, A1, B1], W1),
        ([B2, A2, A2, A2], W2),
        ([A2, B2, A2, A2], W2),
        ([A2, A2, B2, A2], W2),
        ([A2, A2, A2, B2], W2),
        ([A3, A3, B3, B3], W3),
        ([A3, B3, A3, B3], W3),
        ([A3, B3, B3, A3], W3),
        ([B3, A3, A3, B3], W3),
        ([B3, A3, B3, A3], W3),
        ([B3, B3, A3, A3], W3),
    ]
};

/// Integrate `f` over the tetrahedron `v` with the degree-5 rule.
pub fn integrate_tet(v: &[Vec3; 4], f: &mut impl FnMut(Vec3) -> f64) -> f64 {
    let vol = tet_volume(v);
    let mut acc = 0.0;
    for (b, w) in TET_14 {
        let p = v[0] * b[0] + v[1] * b[1] + v[2] * b[2] + v[3] * b[3];
        acc += w * f(p);
    }
    acc * vol
}

/// Integrate `f` over `v` with geometric grading toward the vertex `apex`.
///
/// The element is cut into `levels` similar shells shrinking by factors of
/// two toward the apex plus a core element of relative size `2^-levels`;
/// each shell splits into three tetrahedra and every piece gets the
/// degree-5 rule. Intended for integrands singular at the apex.
pub fn integrate_tet_graded(
    v: &[Vec3; 4],
    apex: usize,
    levels: u32,
    f: &mut impl FnMut(Vec3) -> f64,
) -> f64 {
    assert!(apex < 4);
    let a = v[apex];
    let mut others = [Vec3::ZERO; 3];
    let mut k = 0;
    for (i, &p) in v.iter().enumerate() {
        if i != apex {
            others[k] = p - a;
            k += 1;
        }
    }
    let at = |s: f64, i: usize| a + others[i] * s;
    let mut acc = 0.0;
    let mut outer = 1.0;
    for _ in 0..levels {
        let inner = outer * 0.5;
        let (b0, b1, b2) = (at(outer, 0), at(outer, 1), at(outer, 2));
        let (a0, a1, a2) = (at(inner, 0), at(inner, 1), at(inner, 2));
        // Frustum between the similar triangles, cut into three tets.
        acc += integrate_tet(&[a0, a1, a2, b0], f);
        acc += integrate_tet(&[a1, a2, b0, b1], f);
        acc += integrate_tet(&[a2, b0, b1, b2], f);
        outer = inner;
    }
    acc + integrate_tet(&[a, at(outer, 0), at(outer, 1), at(outer, 2)], f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tet_barycentric;
    use approx::assert_relative_eq;

    fn test_tet() -> [Vec3; 4] {
        [
            Vec3::new(0.1, -0.2, 0.0),
            Vec3::new(1.3, 0.1, -0.1),
            Vec3::new(0.2, 1.1, 0.3),
            Vec3::new(-0.3, 0.4, 1.2),
        ]
    }

    /// Exact moment of a barycentric monomial: the Dirichlet integral
    /// `int_T b0^m0 b1^m1 b2^m2 b3^m3 = 6 V m0! m1! m2! m3! / (|m| + 3)!`.
    fn monomial_moment(vol: f64, m: &[u32; 4]) -> f64 {
        fn fact(n: u32) -> f64 {
            (1..=n).map(|k| k as f64).product()
        }
        let s: u32 = m.iter().sum();
        6.0 * vol * m.iter().map(|&k| fact(k)).product::<f64>() / fact(s + 3)
    }

    #[test]
    fn rule_weights_sum_to_one() {
        let s: f64 = TET_14.iter().map(|&(_, w)| w).sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-15);
        for (b, _) in TET_14 {
            assert_relative_eq!(b.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn degree_five_rule_matches_dirichlet_moments() {
        let t = test_tet();
        let vol = tet_volume(&t);
        for m0 in 0..=5u32 {
            for m1 in 0..=5 - m0 {
                for m2 in 0..=5 - m0 - m1 {
                    for m3 in 0..=5 - m0 - m1 - m2 {
                        let m = [m0, m1, m2, m3];
                        let got = integrate_tet(&t, &mut |p| {
                            let b = tet_barycentric(&t, p);
                            (0..4).map(|i| b[i].powi(m[i] as i32)).product()
                        });
                        let want = monomial_moment(vol, &m);
                        assert_relative_eq!(got, want, epsilon = 1e-14, max_relative = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn linear_product_formula_matches_quadrature() {
        let t = test_tet();
        let vol = tet_volume(&t);
        let p = [0.3, -1.1, 0.7, 2.2];
        let q = [1.4, 0.5, -0.6, 0.9];
        let by_rule = integrate_tet(&t, &mut |x| {
            let b = tet_barycentric(&t, x);
            let pv: f64 = (0..4).map(|i| p[i] * b[i]).sum();
            let qv: f64 = (0..4).map(|i| q[i] * b[i]).sum();
            pv * qv
        });
        assert_relative_eq!(
            int_tet_linear_product(vol, &p, &q),
            by_rule,
            max_relative = 1e-13
        );
    }

    #[test]
    fn graded_rule_partitions_the_element() {
        let t = test_tet();
        for apex in 0..4 {
            let got = integrate_tet_graded(&t, apex, 5, &mut |_| 1.0);
            assert_relative_eq!(got, tet_volume(&t), max_relative = 1e-12);
        }
    }

    #[test]
    fn grading_beats_the_plain_rule_on_a_vertex_singularity() {
        // int over the reference tet of 1/|x|, singular at vertex 0.
        let t = [
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let mut f = |p: Vec3| 1.0 / p.norm();
        let deep = integrate_tet_graded(&t, 0, 24, &mut f);
        let graded = integrate_tet_graded(&t, 0, 3, &mut f);
        let plain = integrate_tet(&t, &mut f);
        assert!((graded - deep).abs() < (plain - deep).abs() / 4.0);
        assert!((graded - deep).abs() / deep < 5e-3);
    }
}
