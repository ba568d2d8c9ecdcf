//! Closed-form integral geometry: unit-ball volumes, flag coefficients,
//! Gaussian Minkowski functionals of points and affine subspaces, the
//! Lebesgue Minkowski conversion, the kinematic right-hand side for
//! expected intrinsic volumes of preimages, and the upper-triangular
//! Z system that recovers intrinsic volumes from expected Euler
//! characteristics of random subspace slices.
//!
//! Everything here is deterministic arithmetic in small closed forms; the
//! only numerics are a Lanczos gamma evaluation and a convergent series
//! for the chi cumulative distribution (kept as a permanent cross-check
//! against the frozen Gaussian-Minkowski algebra).

use nalgebra::DMatrix;

use crate::curvature::LKCVector;
use crate::error::{Error, Result};

const PI: f64 = std::f64::consts::PI;

/// Gamma function via the Lanczos approximation (g = 7, 9 terms);
/// relative error well below 1e-13 for the argument range used here.
pub fn gamma_fn(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEFFS: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection formula
        return PI / ((PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Volume of the unit ball in R^n: omega_n = pi^{n/2} / Gamma(n/2 + 1).
pub fn ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma_fn(n as f64 / 2.0 + 1.0)
}

/// Exact binomial coefficient as a float.
fn binomial(a: usize, b: usize) -> f64 {
    let b = b.min(a - b.min(a));
    let mut acc = 1.0f64;
    for i in 0..b {
        acc = acc * (a - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Flag coefficient [a over b] = binom(a, b) * omega_a / (omega_{a-b} omega_b).
pub fn flag_coefficient(a: usize, b: usize) -> Result<f64> {
    if b > a {
        return Err(Error::invalid(format!(
            "flag coefficient needs b <= a, got [{a} over {b}]"
        )));
    }
    Ok(binomial(a, b) * ball_volume(a) / (ball_volume(a - b) * ball_volume(b)))
}

/// Gaussian Minkowski functionals M_j of a point in R^n, j = 0..=j_max:
/// the j-th derivative at rho = 0 of the Gaussian measure of the
/// rho-tube, i.e. of P{chi_n <= rho}.
#[derive(Clone, Debug)]
pub struct GMFTable {
    /// codimension of the point (ambient dimension of its space)
    pub n: usize,
    /// values[j] = M_j for j = 0..=j_max
    pub values: Vec<f64>,
}

/// Closed form: nonzero only at j = n + 2l with
/// M_{n+2l} = (n+2l)! (-1/2)^l / (2^{n/2} Gamma(n/2) l! (n/2 + l)).
pub fn gmf_point(n: usize, j_max: usize) -> Result<GMFTable> {
    if n == 0 {
        return Err(Error::invalid("point functionals need codimension >= 1"));
    }
    let mut values = vec![0.0; j_max + 1];
    let half_n = n as f64 / 2.0;
    let prefix = 1.0 / (2.0f64.powf(half_n) * gamma_fn(half_n));
    let mut l = 0usize;
    while n + 2 * l <= j_max {
        let j = n + 2 * l;
        let j_fact: f64 = (1..=j).map(|v| v as f64).product();
        let l_fact: f64 = (1..=l).map(|v| v as f64).product();
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        values[j] = j_fact * sign * 0.5f64.powi(l as i32) * prefix / (l_fact * (half_n + l as f64));
        l += 1;
    }
    Ok(GMFTable { n, values })
}

/// M_j of an affine subspace of codimension n in R^k: equals the point
/// value in R^n (tube measure factorizes), independent of k.
pub fn gmf_subspace(k: usize, n: usize, j: usize) -> Result<f64> {
    if n == 0 || n > k {
        return Err(Error::invalid(format!(
            "subspace codimension must satisfy 1 <= n <= k, got n={n}, k={k}"
        )));
    }
    Ok(gmf_point(n, j)?.values[j])
}

/// Lebesgue Minkowski functionals from intrinsic volumes:
/// M_j = j! omega_j L_{n-j}, j = 0..=n.
pub fn lebesgue_minkowski(lkc: &LKCVector, n: usize) -> Result<Vec<f64>> {
    if lkc.values.len() != n + 1 {
        return Err(Error::invalid(format!(
            "need {} intrinsic volumes for R^{n}, got {}",
            n + 1,
            lkc.values.len()
        )));
    }
    Ok((0..=n)
        .map(|j| {
            let j_fact: f64 = (1..=j).map(|v| v as f64).product();
            j_fact * ball_volume(j) * lkc.values[n - j]
        })
        .collect())
}

/// Kinematic right-hand side: the expected i-th intrinsic volume of the
/// preimage of D under a unit-variance isotropic field on an m-manifold,
///
///   sum_{j=0}^{m-i} [i+j over j] (2 pi)^{-j/2} L_{i+j}(M) M_j(D),
///
/// with L from `lkc_m` and M from `gmf_d`.
pub fn gkf_rhs(i: usize, lkc_m: &LKCVector, gmf_d: &GMFTable, m: usize) -> Result<f64> {
    if lkc_m.values.len() != m + 1 {
        return Err(Error::invalid("intrinsic-volume vector arity mismatch"));
    }
    if i > m {
        return Err(Error::invalid(format!("order {i} exceeds dimension {m}")));
    }
    if gmf_d.values.len() < m - i + 1 {
        return Err(Error::invalid("functional table too short for the sum"));
    }
    let mut acc = 0.0;
    for j in 0..=(m - i) {
        acc += flag_coefficient(i + j, j)?
            * (2.0 * PI).powf(-(j as f64) / 2.0)
            * lkc_m.values[i + j]
            * gmf_d.values[j];
    }
    Ok(acc)
}

/// Upper-triangular map from intrinsic volumes to expected Euler
/// characteristics of random subspace slices: row 0 is the identity row
/// (no slicing), row n >= 1 has entries (2 pi)^{-j/2} M_j of a point in R^n.
#[derive(Clone, Debug)]
pub struct ZMatrix {
    pub a: usize,
    pub z: DMatrix<f64>,
}

pub fn z_matrix(a: usize) -> Result<ZMatrix> {
    let mut z = DMatrix::zeros(a + 1, a + 1);
    z[(0, 0)] = 1.0;
    for n in 1..=a {
        let table = gmf_point(n, a)?;
        for j in 0..=a {
            z[(n, j)] = (2.0 * PI).powf(-(j as f64) / 2.0) * table.values[j];
        }
    }
    Ok(ZMatrix { a, z })
}

/// Solve Z L = mu by back-substitution (Z upper triangular with nonzero
/// diagonal for valid tables).
pub fn recover_lkc(z: &ZMatrix, mu: &[f64]) -> Result<LKCVector> {
    let a = z.a;
    if mu.len() != a + 1 {
        return Err(Error::invalid(format!(
            "need {} slice values, got {}",
            a + 1,
            mu.len()
        )));
    }
    let mut values = vec![0.0; a + 1];
    for n in (0..=a).rev() {
        let diag = z.z[(n, n)];
        if diag == 0.0 {
            return Err(Error::invalid(
                "internal consistency: zero diagonal in triangular system",
            ));
        }
        let mut acc = mu[n];
        for j in n + 1..=a {
            acc -= z.z[(n, j)] * values[j];
        }
        values[n] = acc / diag;
    }
    Ok(LKCVector { values })
}

/// Smooth continuation of P{chi_n <= rho} evaluated by its power series
/// (odd in rho for odd n, even for even n). Permanent numerical
/// cross-check for the frozen closed forms above.
pub fn chi_cdf_series(n: usize, rho: f64) -> f64 {
    let s = n as f64 / 2.0;
    let y = rho * rho / 2.0;
    // rho^n / 2^{n/2}, kept as a signed power for the smooth continuation
    let lead = rho.powi(n as i32) / 2.0f64.powf(s);
    let mut sum = 0.0;
    let mut term = 1.0 / gamma_fn(s + 1.0);
    for k in 0..60 {
        sum += term;
        term *= y / (s + k as f64 + 1.0);
    }
    lead * (-y).exp() * sum
}

/// Finite-difference weights (Fornberg's algorithm): returns w such that
/// sum_i w[i] f(nodes[i]) approximates the `order`-th derivative of f at 0.
pub fn fd_derivative_weights(order: usize, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len() - 1;
    let m = order;
    let mut c = vec![vec![0.0f64; m + 1]; n + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    c[0][0] = 1.0;
    for i in 1..=n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// Symmetric FD stencil (21 nodes, spacing 0.12) for derivatives at zero —
/// the frozen oracle window whose noise and truncation errors are both
/// below 1e-7 relative for the chi-distribution derivatives up to order 8.
pub fn gmf_numeric_oracle(n: usize, j: usize) -> f64 {
    const NPTS: usize = 21;
    const H: f64 = 0.12;
    let nodes: Vec<f64> = (0..NPTS)
        .map(|i| (i as f64 - (NPTS / 2) as f64) * H)
        .collect();
    let w = fd_derivative_weights(j, &nodes);
    nodes
        .iter()
        .zip(&w)
        .map(|(x, w)| w * chi_cdf_series(n, *x))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::distribution::ContinuousCDF;

    #[test]
    fn ball_volumes_match_closed_values() {
        assert_relative_eq!(ball_volume(0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(ball_volume(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(ball_volume(2), PI, epsilon = 1e-14);
        assert_relative_eq!(ball_volume(3), 4.0 * PI / 3.0, epsilon = 1e-14);
        assert_relative_eq!(ball_volume(4), PI * PI / 2.0, epsilon = 1e-13);
    }

    #[test]
    fn gamma_matches_exact_values_and_reference() {
        // exact recurrences: Gamma(k) = (k-1)!, Gamma(k + 1/2) from sqrt(pi)
        let mut exact_int = 1.0f64;
        for k in 1..=50usize {
            assert_relative_eq!(gamma_fn(k as f64), exact_int, max_relative = 1e-13);
            exact_int *= k as f64;
        }
        let mut exact_half = PI.sqrt();
        for k in 0..50usize {
            let x = k as f64 + 0.5;
            assert_relative_eq!(gamma_fn(x), exact_half, max_relative = 1e-13);
            exact_half *= x;
        }
        // independent implementation cross-check (both are approximations)
        for i in 1..=100 {
            let x = i as f64 * 0.5;
            assert_relative_eq!(
                gamma_fn(x),
                statrs::function::gamma::gamma(x),
                max_relative = 5e-13
            );
        }
        // reflection branch
        assert_relative_eq!(
            gamma_fn(0.25),
            statrs::function::gamma::gamma(0.25),
            max_relative = 5e-13
        );
    }

    #[test]
    fn flag_coefficients_take_known_values() {
        assert_relative_eq!(flag_coefficient(5, 0).unwrap(), 1.0, epsilon = 1e-13);
        assert_relative_eq!(flag_coefficient(5, 5).unwrap(), 1.0, epsilon = 1e-13);
        assert_relative_eq!(flag_coefficient(2, 1).unwrap(), PI / 2.0, epsilon = 1e-13);
        assert!(flag_coefficient(2, 3).is_err());
        // symmetry in b <-> a-b
        for a in 0..8 {
            for b in 0..=a {
                assert_relative_eq!(
                    flag_coefficient(a, b).unwrap(),
                    flag_coefficient(a, a - b).unwrap(),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn point_functionals_have_the_zero_pattern() {
        for n in 1..=4usize {
            let t = gmf_point(n, 12).unwrap();
            for j in 0..=12usize {
                if j < n || (j - n) % 2 == 1 {
                    assert_eq!(t.values[j], 0.0, "n={n}, j={j} should vanish exactly");
                } else {
                    assert!(t.values[j] != 0.0, "n={n}, j={j} should be nonzero");
                }
            }
        }
        assert!(gmf_point(0, 4).is_err());
    }

    #[test]
    fn first_point_functionals_match_density_values() {
        // n=1: derivative at 0 of P{|Z| <= rho} is 2 phi(0) = sqrt(2/pi)
        let t = gmf_point(1, 3).unwrap();
        assert_relative_eq!(t.values[1], (2.0 / PI).sqrt(), epsilon = 1e-13);
        // n=2: second derivative at 0 of 1 - exp(-rho^2/2) is 1
        let t = gmf_point(2, 3).unwrap();
        assert_relative_eq!(t.values[2], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn closed_forms_match_numerical_derivatives() {
        let tables: Vec<GMFTable> = (1..=4).map(|n| gmf_point(n, 8).unwrap()).collect();
        // comparison scale for entries that vanish identically: the largest
        // j-th derivative across the table (the stencil's noise floor grows
        // with the derivative order, not with the row)
        let column_scale = |j: usize| -> f64 {
            tables
                .iter()
                .map(|t| t.values[j].abs())
                .fold(1.0f64, f64::max)
        };
        for (idx, table) in tables.iter().enumerate() {
            let n = idx + 1;
            for j in 0..=8usize {
                let numeric = gmf_numeric_oracle(n, j);
                let exact = table.values[j];
                if exact == 0.0 {
                    let tol = 1e-6 * column_scale(j);
                    assert!(
                        numeric.abs() < tol,
                        "n={n}, j={j}: numeric {numeric}, tolerance {tol}"
                    );
                } else {
                    assert!(
                        (numeric - exact).abs() <= 1e-6 * exact.abs(),
                        "n={n}, j={j}: numeric {numeric} vs exact {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn chi_series_matches_reference_cdf() {
        for n in 1..=4usize {
            let chi2 = statrs::distribution::ChiSquared::new(n as f64).unwrap();
            for rho in [0.1, 0.5, 1.0, 1.5] {
                assert_relative_eq!(
                    chi_cdf_series(n, rho),
                    chi2.cdf(rho * rho),
                    max_relative = 1e-12
                );
            }
        }
        // parity of the smooth continuation
        assert_relative_eq!(
            chi_cdf_series(1, -0.7),
            -chi_cdf_series(1, 0.7),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            chi_cdf_series(2, -0.7),
            chi_cdf_series(2, 0.7),
            epsilon = 1e-15
        );
    }

    #[test]
    fn subspace_functionals_reduce_to_point_values() {
        let point = gmf_point(2, 4).unwrap();
        assert_eq!(gmf_subspace(10, 2, 2).unwrap(), point.values[2]);
        assert_eq!(gmf_subspace(10, 2, 1).unwrap(), 0.0);
        assert_eq!(gmf_subspace(2, 2, 2).unwrap(), point.values[2]);
        // independence of the ambient dimension
        assert_eq!(
            gmf_subspace(5, 3, 3).unwrap(),
            gmf_subspace(50, 3, 3).unwrap()
        );
        assert!(gmf_subspace(2, 3, 1).is_err());
        assert!(gmf_subspace(2, 0, 1).is_err());
    }

    #[test]
    fn minkowski_conversion_matches_disc_oracle() {
        // unit disc: tube area pi (1 + rho)^2 = pi + 2 pi rho + pi rho^2,
        // so M_j = j! * (coefficient of rho^j): (pi, 2 pi, 2 pi)
        let disc = LKCVector {
            values: vec![1.0, PI, PI],
        };
        let m = lebesgue_minkowski(&disc, 2).unwrap();
        assert_relative_eq!(m[0], PI, epsilon = 1e-13);
        assert_relative_eq!(m[1], 2.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(m[2], 2.0 * PI, epsilon = 1e-13);

        let zero = LKCVector {
            values: vec![0.0; 3],
        };
        assert_eq!(lebesgue_minkowski(&zero, 2).unwrap(), vec![0.0; 3]);
        assert!(lebesgue_minkowski(&disc, 3).is_err());
    }

    proptest! {
        #[test]
        fn tube_series_roundtrips_with_minkowski(values in proptest::collection::vec(-5.0f64..5.0, 2..5)) {
            // sum_j rho^j / j! M_j equals the tube polynomial exactly
            let n = values.len() - 1;
            let lkc = LKCVector { values };
            let m = lebesgue_minkowski(&lkc, n).unwrap();
            for rho in [0.1f64, 0.5, 1.0] {
                let via_minkowski: f64 = m
                    .iter()
                    .enumerate()
                    .map(|(j, mj)| {
                        let j_fact: f64 = (1..=j).map(|v| v as f64).product();
                        rho.powi(j as i32) / j_fact * mj
                    })
                    .sum();
                let direct = crate::curvature::tube_volume(&lkc, rho, n).unwrap();
                prop_assert!((via_minkowski - direct).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }

        #[test]
        fn z_system_roundtrips(values in proptest::collection::vec(-10.0f64..10.0, 2..5)) {
            let a = values.len() - 1;
            let z = z_matrix(a).unwrap();
            let mu = &z.z * nalgebra::DVector::from_vec(values.clone());
            let back = recover_lkc(&z, mu.as_slice()).unwrap();
            for j in 0..=a {
                prop_assert!((back.values[j] - values[j]).abs() < 1e-12 * values[j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn kinematic_sum_has_expected_degenerate_cases() {
        let torus = LKCVector {
            values: vec![0.0, 0.0, 4.0 * PI * PI],
        };
        // D with only M_0 = 1: fixed-set case, returns L_i itself
        let trivial = GMFTable {
            n: 1,
            values: vec![1.0, 0.0, 0.0],
        };
        for i in 0..=2usize {
            assert_relative_eq!(
                gkf_rhs(i, &torus, &trivial, 2).unwrap(),
                torus.values[i],
                epsilon = 1e-12
            );
        }
        // i = m: the sum collapses to L_m M_0
        let point2 = gmf_point(2, 4).unwrap();
        assert_relative_eq!(
            gkf_rhs(2, &torus, &point2, 2).unwrap(),
            0.0,
            epsilon = 1e-12
        );

        // codimension-2 zero set on the flat torus: expected point count
        // (2 pi)^{-1} [2 over 2] L_2 M_2 = area / (2 pi)
        let count = gkf_rhs(0, &torus, &point2, 2).unwrap();
        assert_relative_eq!(count, 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn z_matrix_structure_and_slice_identity() {
        let a = 3;
        let zm = z_matrix(a).unwrap();
        for n in 0..=a {
            for j in 0..n {
                assert_eq!(zm.z[(n, j)], 0.0, "Z[{n}][{j}] must vanish exactly");
            }
            assert!(zm.z[(n, n)] != 0.0);
        }
        // row 0 is the no-slice convention
        assert_eq!(zm.z[(0, 0)], 1.0);
        for j in 1..=a {
            assert_eq!(zm.z[(0, j)], 0.0);
        }
        // row n against the kinematic sum at i = 0
        let l = LKCVector {
            values: vec![1.5, -0.25, 2.0, 0.75],
        };
        let lv = nalgebra::DVector::from_vec(l.values.clone());
        let mu = &zm.z * lv;
        for n in 1..=a {
            let table = gmf_point(n, a).unwrap();
            let want = gkf_rhs(0, &l, &table, a).unwrap();
            assert_relative_eq!(mu[n], want, epsilon = 1e-12);
        }

        // a = 0 edge: identity system
        let z0 = z_matrix(0).unwrap();
        let back = recover_lkc(&z0, &[7.25]).unwrap();
        assert_eq!(back.values, vec![7.25]);
        assert!(recover_lkc(&z0, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn fd_weights_differentiate_polynomials_exactly() {
        let nodes: Vec<f64> = (-3..=3).map(|i| i as f64 * 0.5).collect();
        // f(x) = x^4: f'''(0) = 0, f''(0) = 0; f(x) = x^3: f'''(0) = 6
        let w3 = fd_derivative_weights(3, &nodes);
        let d3: f64 = nodes.iter().zip(&w3).map(|(x, w)| w * x.powi(3)).sum();
        assert_relative_eq!(d3, 6.0, epsilon = 1e-10);
        let w1 = fd_derivative_weights(1, &nodes);
        let d1: f64 = nodes
            .iter()
            .zip(&w1)
            .map(|(x, w)| w * (2.0 * x + 5.0))
            .sum();
        assert_relative_eq!(d1, 2.0, epsilon = 1e-12);
        let d0: f64 = nodes
            .iter()
            .zip(&fd_derivative_weights(0, &nodes))
            .map(|(x, w)| w * (x + 1.0))
            .sum();
        assert_relative_eq!(d0, 1.0, epsilon = 1e-12);
    }
}
