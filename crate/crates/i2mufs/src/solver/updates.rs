//! Multiplicative update kernels and closed-form subproblem solutions.
//!
//! Every rule keeps its factor entrywise non-negative: factors are scaled by
//! the square root of a ratio of non-negative terms whose denominator is
//! floored at `eps`. Zero entries are absorbing, matching the fixed-point
//! structure of the underlying bound-minimization steps.

use ndarray::{Array1, Array2, Axis, Zip};

use crate::error::{Error, Result};

/// Sum of Euclidean row norms.
pub fn l21_norm(m: &Array2<f64>) -> f64 {
    m.rows().into_iter().map(|r| r.dot(&r).sqrt()).sum()
}

/// Per-row Euclidean norms as a vector.
pub fn row_norms(m: &Array2<f64>) -> Array1<f64> {
    m.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
}

/// `sum_j w2[j] * ||(x - v u^T)(:, j)||^2`, the diagonally weighted squared
/// reconstruction error of one chunk.
pub fn weighted_residual(
    x: &Array2<f64>,
    v: &Array2<f64>,
    u: &Array2<f64>,
    w2: &Array1<f64>,
) -> f64 {
    let e = x - &v.dot(&u.t());
    (&e * &e).sum_axis(Axis(0)).dot(w2)
}

/// `u^T diag(w2) u`, the weighted Gram matrix of an indicator factor.
pub fn weighted_gram(u: &Array2<f64>, w2: &Array1<f64>) -> Array2<f64> {
    let su = u * &w2.view().insert_axis(Axis(1));
    u.t().dot(&su)
}

/// `x diag(w2) u`, the weighted cross-product feeding the feature factor.
pub fn weighted_cross(x: &Array2<f64>, w2: &Array1<f64>, u: &Array2<f64>) -> Array2<f64> {
    (x * w2).dot(u)
}

/// `sum_j w2[j] * ||(u - ustar)(j, :)||^2`, the weighted consensus gap.
pub fn consensus_residual(u: &Array2<f64>, ustar: &Array2<f64>, w2: &Array1<f64>) -> f64 {
    let d = u - ustar;
    (&d * &d).sum_axis(Axis(1)).dot(w2)
}

/// `tr(u^T l u)`, the graph smoothness of an indicator factor.
pub fn graph_trace(u: &Array2<f64>, laplacian: &Array2<f64>) -> f64 {
    (&laplacian.dot(u) * u).sum()
}

/// `||u^T u - I||_F`, distance of the indicator factor from orthonormality.
pub fn orthogonality_gap(u: &Array2<f64>) -> f64 {
    let mut g = u.t().dot(u);
    for i in 0..g.nrows() {
        g[[i, i]] -= 1.0;
    }
    (&g * &g).sum().sqrt()
}

/// Splits a matrix into non-negative positive and negative parts with
/// `z = pos - neg`.
pub fn split_signs(z: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let pos = z.mapv(|x| if x > 0.0 { x } else { 0.0 });
    let neg = z.mapv(|x| if x < 0.0 { -x } else { 0.0 });
    (pos, neg)
}

/// One multiplicative step on the feature factor `v`.
///
/// `r_eff` and `q_eff` must already include the current chunk's contribution
/// on top of the folded accumulators; `alpha_pow` is the view weight raised
/// to the weighting exponent (1 for the binary-weight variant).
pub fn v_step(
    v: &mut Array2<f64>,
    r_eff: &Array2<f64>,
    q_eff: &Array2<f64>,
    alpha_pow: f64,
    eta: f64,
    eps: f64,
) {
    let inv_rows = row_norms(v).mapv(|n| 1.0 / (n + eps));
    let shrink = &*v * &inv_rows.view().insert_axis(Axis(1));
    let denom = 2.0 * alpha_pow * v.dot(r_eff) + eta * shrink;
    Zip::from(&mut *v)
        .and(q_eff)
        .and(&denom)
        .for_each(|x, &q, &d| {
            *x *= (2.0 * alpha_pow * q / d.max(eps)).sqrt();
        });
}

/// One multiplicative step on the chunk indicator factor `u`.
///
/// `recon_w2` weights the reconstruction pull (squared confidence weights,
/// or a binary observedness diagonal), `cons_w2` weights the consensus pull,
/// and `z_pos`/`z_neg` are the sign parts of the scaled graph Laplacian.
#[allow(clippy::too_many_arguments)]
pub fn u_step(
    u: &mut Array2<f64>,
    x: &Array2<f64>,
    v: &Array2<f64>,
    ustar: &Array2<f64>,
    recon_w2: &Array1<f64>,
    cons_w2: &Array1<f64>,
    z_pos: &Array2<f64>,
    z_neg: &Array2<f64>,
    alpha_pow: f64,
    beta: f64,
    xi: f64,
    eps: f64,
) {
    let recon_col = recon_w2.view().insert_axis(Axis(1));
    let cons_col = cons_w2.view().insert_axis(Axis(1));

    let xtv = x.t().dot(v);
    let numer = alpha_pow * (&xtv * &recon_col)
        + beta * (ustar * &cons_col)
        + 2.0 * xi * &*u
        + z_neg.dot(u);

    let vtv = v.t().dot(v);
    let utu = u.t().dot(u);
    let denom = alpha_pow * (&u.dot(&vtv) * &recon_col)
        + beta * (&*u * &cons_col)
        + z_pos.dot(u)
        + 2.0 * xi * u.dot(&utu);

    Zip::from(&mut *u)
        .and(&numer)
        .and(&denom)
        .for_each(|x, &n, &d| {
            *x *= (n / d.max(eps)).sqrt();
        });
}

/// Closed-form consensus indicator: each row is the weighted average of the
/// per-view indicator rows, weights `beta_v * w2_v[j]`.
pub fn consensus_step(
    us: &[Array2<f64>],
    cons_w2: &[Array1<f64>],
    beta: &[f64],
) -> Result<Array2<f64>> {
    let (n, k) = us[0].dim();
    let mut numer = Array2::zeros((n, k));
    let mut denom = Array1::zeros(n);
    for ((u, w2), &b) in us.iter().zip(cons_w2).zip(beta) {
        numer += &(b * &(u * &w2.view().insert_axis(Axis(1))));
        denom += &(b * w2);
    }
    if let Some(row) = denom.iter().position(|&d| d <= 0.0) {
        return Err(Error::DegenerateConsensus { row });
    }
    Ok(&numer / &denom.insert_axis(Axis(1)))
}

/// Closed-form simplex weights: `alpha_v` proportional to
/// `loss_v^(1 / (1 - lambda))`, computed in log space so extreme losses and
/// exponents stay finite. Losses are floored at `eps`.
pub fn alpha_from_losses(losses: &[f64], lambda: f64, eps: f64) -> Vec<f64> {
    debug_assert!(lambda > 1.0);
    let p = 1.0 / (1.0 - lambda);
    let logs: Vec<f64> = losses.iter().map(|&l| p * l.max(eps).ln()).collect();
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|&g| (g - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn positive_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen::<f64>() + 0.05)
    }

    #[test]
    fn v_step_fixed_point_when_ratio_is_one() {
        // Engineer q so that 2a*q equals the denominator exactly; a = 0.5
        // keeps the reconstruction of the numerator bit-exact.
        let mut v = positive_matrix(4, 3, 0);
        let r = {
            let m = positive_matrix(3, 3, 1);
            0.5 * (&m + &m.t())
        };
        let (a, eta, eps) = (0.5, 0.3, 1e-9);
        let inv = row_norms(&v).mapv(|n| 1.0 / (n + eps));
        let denom = 2.0 * a * v.dot(&r) + eta * (&v * &inv.view().insert_axis(Axis(1)));
        let q = denom.mapv(|d| d / (2.0 * a));
        let before = v.clone();
        v_step(&mut v, &r, &q, a, eta, eps);
        assert_eq!(v, before);
    }

    #[test]
    fn v_step_zero_numerator_kills_and_pins_entries() {
        let mut v = positive_matrix(3, 2, 2);
        let r = Array2::eye(2);
        let mut q = positive_matrix(3, 2, 3);
        q[[1, 0]] = 0.0;
        v_step(&mut v, &r, &q, 1.0, 0.1, 1e-9);
        assert_eq!(v[[1, 0]], 0.0);
        v_step(&mut v, &r, &q, 1.0, 0.1, 1e-9);
        assert_eq!(v[[1, 0]], 0.0, "zero entries must be absorbing");
        assert!(v.iter().all(|&x| x >= 0.0 && x.is_finite()));
    }

    #[test]
    fn repeated_v_steps_shrink_reconstruction_error() {
        // Exact factorization exists, so the error can reach zero; each step
        // must never increase it.
        let truth_v = positive_matrix(5, 3, 4);
        let u = positive_matrix(8, 3, 5);
        let x = truth_v.dot(&u.t());
        let w2 = Array1::ones(8);
        let r = weighted_gram(&u, &w2);
        let q = weighted_cross(&x, &w2, &u);

        let mut v = positive_matrix(5, 3, 6);
        let first = weighted_residual(&x, &v, &u, &w2);
        let mut last = first;
        for _ in 0..200 {
            v_step(&mut v, &r, &q, 1.0, 0.0, 1e-9);
            let now = weighted_residual(&x, &v, &u, &w2);
            assert!(
                now <= last * (1.0 + 1e-9),
                "reconstruction error rose from {last} to {now}"
            );
            last = now;
        }
        assert!(last < 0.05 * first, "only reached {last} from {first}");
    }

    #[test]
    fn u_step_does_not_increase_penalized_subproblem() {
        // Frozen random instance; the step must not increase the sum of the
        // reconstruction, consensus, graph and orthogonality terms.
        let (n, d, k) = (6, 4, 3);
        let x = positive_matrix(d, n, 7);
        let v = positive_matrix(d, k, 8);
        let ustar = positive_matrix(n, k, 9);
        let mut u = positive_matrix(n, k, 10);
        let w2 = Array1::from_shape_fn(n, |j| 0.3 + 0.1 * j as f64);
        let lap = {
            let g = crate::graph::build_graph(&x, 2, crate::graph::Bandwidth::Median).unwrap();
            g.laplacian
        };
        let (a, beta, theta, xi) = (0.6, 0.4, 0.2, 2.0);
        let z = theta * &lap;
        let (z_pos, z_neg) = split_signs(&z);

        let value = |u: &Array2<f64>| {
            a * weighted_residual(&x, &v, u, &w2)
                + beta * consensus_residual(u, &ustar, &w2)
                + theta * graph_trace(u, &lap)
                + xi * orthogonality_gap(u).powi(2)
        };
        let before = value(&u);
        u_step(
            &mut u, &x, &v, &ustar, &w2, &w2, &z_pos, &z_neg, a, beta, xi, 1e-9,
        );
        let after = value(&u);
        assert!(
            after <= before * (1.0 + 1e-9),
            "penalized value rose from {before} to {after}"
        );
        assert!(u.iter().all(|&x| x >= 0.0 && x.is_finite()));
    }

    #[test]
    fn consensus_single_view_returns_its_indicator() {
        let u = positive_matrix(5, 2, 11);
        let w2 = Array1::from_elem(5, 0.64);
        let ustar = consensus_step(std::slice::from_ref(&u), &[w2], &[0.1]).unwrap();
        for (a, b) in ustar.iter().zip(u.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn consensus_blends_rows_by_squared_weights() {
        // One row, two views: weights 1 and 0.25 with equal trade-offs give
        // (u1 + 0.25 u2) / 1.25.
        let u1 = array![[1.0, 0.0]];
        let u2 = array![[0.0, 1.0]];
        let w1 = array![1.0];
        let w2 = array![0.25];
        let ustar = consensus_step(&[u1, u2], &[w1, w2], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(ustar[[0, 0]], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(ustar[[0, 1]], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn consensus_is_row_optimal_under_perturbation() {
        let us = vec![positive_matrix(4, 3, 12), positive_matrix(4, 3, 13)];
        let w2s = vec![
            Array1::from_shape_fn(4, |j| 0.2 + 0.2 * j as f64),
            Array1::from_elem(4, 0.5),
        ];
        let beta = [0.3, 0.7];
        let ustar = consensus_step(&us, &w2s, &beta).unwrap();
        let objective = |m: &Array2<f64>| -> f64 {
            us.iter()
                .zip(&w2s)
                .zip(beta)
                .map(|((u, w2), b)| b * consensus_residual(u, m, w2))
                .sum()
        };
        let base = objective(&ustar);
        for r in 0..4 {
            for c in 0..3 {
                for delta in [1e-4, -1e-4] {
                    let mut probe = ustar.clone();
                    probe[[r, c]] += delta;
                    assert!(
                        objective(&probe) >= base - 1e-15,
                        "perturbing ({r},{c}) by {delta} improved the consensus"
                    );
                }
            }
        }
    }

    #[test]
    fn consensus_rejects_zero_weight_rows() {
        let u = positive_matrix(2, 2, 14);
        let w2 = Array1::zeros(2);
        let err = consensus_step(&[u], &[w2], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateConsensus { row: 0 }));
    }

    #[test]
    fn alpha_closed_form_matches_hand_values() {
        let a = alpha_from_losses(&[1.0, 4.0], 2.0, 1e-9);
        assert_abs_diff_eq!(a[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], 0.2, epsilon = 1e-12);

        let a = alpha_from_losses(&[1.0, 4.0], 3.0, 1e-9);
        assert_abs_diff_eq!(a[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], 1.0 / 3.0, epsilon = 1e-12);

        // A large exponent flattens the weights toward uniform.
        let a = alpha_from_losses(&[1.0, 4.0], 11.0, 1e-9);
        assert!((a[0] - 0.5).abs() < 0.04 && (a[1] - 0.5).abs() < 0.04);

        let a = alpha_from_losses(&[5.0], 3.0, 1e-9);
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn alpha_stays_on_simplex_for_extreme_losses() {
        for losses in [
            vec![1e-30, 1.0, 1e30],
            vec![0.0, 0.0],
            vec![1e308, 1e-308, 1.0],
        ] {
            for lambda in [1.001, 2.0, 3.0, 50.0] {
                let a = alpha_from_losses(&losses, lambda, 1e-9);
                let total: f64 = a.iter().sum();
                assert!((total - 1.0).abs() < 1e-12, "sum {total} for {losses:?}");
                assert!(a.iter().all(|&x| x >= 0.0 && x.is_finite()));
            }
        }
    }

    #[test]
    fn split_signs_reassembles_the_input() {
        let z = array![[1.5, -2.0], [0.0, 3.0]];
        let (pos, neg) = split_signs(&z);
        assert!(pos.iter().all(|&x| x >= 0.0));
        assert!(neg.iter().all(|&x| x >= 0.0));
        assert_eq!(&pos - &neg, z);
    }
}
