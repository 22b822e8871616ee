//! Kalman filter and fixed-interval (Rauch-Tung-Striebel) smoother for the
//! random-walk coefficient model
//!
//! ```text
//! y_t     = X_t gamma_t + u_t,        u_t ~ N(0, s2 W^{-1})
//! gamma_t = gamma_{t-1} + v_t,        v_t ~ N(0, (s2 / lambda) I)
//! ```
//!
//! with `gamma_0` known. The filter runs at `s2 = 1`; the likelihood is then
//! concentrated over `s2`, which leaves `lambda` as the only free parameter.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{StateLayout, TvProblem, TvSolution};
use crate::error::{Error, Result};

fn concentrated(sum_sq: f64, logdet: f64, n_obs: usize) -> f64 {
    let n = n_obs as f64;
    let s2 = sum_sq / n;
    -0.5 * (n * ((2.0 * PI).ln() + s2.ln() + 1.0) + logdet)
}

/// Full-state filter and smoother over the stacked `d`-dimensional state.
///
/// This is the reference implementation of the smoother; it costs
/// `O(T d^3)` and is meant for checking [`super::solve_tv`] rather than for
/// production-size problems.
pub fn kalman_smoother(problem: &TvProblem) -> Result<TvSolution> {
    problem.check_lambda()?;
    let StateLayout { k, m, t_len } = problem.layout;
    let d = k * m;
    let q = DMatrix::<f64>::identity(d, d) / problem.lambda;
    let r = DMatrix::from_diagonal(&DVector::from_iterator(
        k,
        problem.obs_weights.iter().map(|w| 1.0 / w),
    ));

    let mut a_pred = DVector::from_vec(problem.gamma0.clone());
    let mut p_pred = q.clone();
    let mut filtered = Vec::with_capacity(t_len);
    let mut predicted = Vec::with_capacity(t_len);
    let (mut sum_sq, mut logdet) = (0.0, 0.0);

    for t in 0..t_len {
        let h = problem.observation_matrix(t);
        let y = problem.y.row(t).transpose();
        let e = &y - &h * &a_pred;
        let ph = &p_pred * h.transpose();
        let f = &h * &ph + &r;
        let chol = Cholesky::<f64, Dyn>::new(f)
            .ok_or_else(|| Error::Singular(format!("innovation variance at t={t}")))?;
        let l = chol.l();
        logdet += 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let finv_e = chol.solve(&e);
        sum_sq += e.dot(&finv_e);
        // K = P H' F^{-1}
        let k_gain = chol.solve(&ph.transpose()).transpose();
        let a = &a_pred + &k_gain * &e;
        let mut p = &p_pred - &k_gain * ph.transpose();
        p = (&p + p.transpose()) * 0.5;
        predicted.push((a_pred.clone(), p_pred.clone()));
        a_pred = a.clone();
        p_pred = &p + &q;
        filtered.push((a, p));
    }

    let mut gamma = DMatrix::zeros(t_len, d);
    let mut smoothed = filtered[t_len - 1].0.clone();
    gamma.set_row(t_len - 1, &smoothed.transpose());
    for t in (0..t_len - 1).rev() {
        let (a_t, p_t) = &filtered[t];
        let (a_next, p_next) = &predicted[t + 1];
        let chol = Cholesky::<f64, Dyn>::new(p_next.clone())
            .ok_or_else(|| Error::Singular(format!("predicted covariance at t={}", t + 1)))?;
        // J = P_t P_{t+1|t}^{-1}
        let gain = chol.solve(p_t).transpose();
        smoothed = a_t + gain * (&smoothed - a_next);
        gamma.set_row(t, &smoothed.transpose());
    }

    let loglik = concentrated(sum_sq, logdet, t_len * k);
    Ok(TvSolution::from_gamma(problem, gamma, loglik))
}

/// Concentrated log-likelihood from per-portfolio filters.
///
/// Observation errors are independent across portfolios and the state
/// covariance is isotropic, so the joint prediction-error decomposition is
/// the sum of `k` filters with scalar observations and `m`-dimensional
/// states. Matches the likelihood of [`kalman_smoother`].
pub fn filter_loglik(problem: &TvProblem) -> Result<f64> {
    problem.check_lambda()?;
    let StateLayout { k, m, t_len } = problem.layout;
    let q = 1.0 / problem.lambda;
    let (mut sum_sq, mut logdet) = (0.0, 0.0);
    let mut p = DMatrix::<f64>::zeros(m, m);
    let mut px = vec![0.0; m];

    for i in 0..k {
        let obs_var = 1.0 / problem.obs_weights[i];
        let mut a: Vec<f64> = problem.gamma0[i * m..(i + 1) * m].to_vec();
        p.fill(0.0);
        p.fill_diagonal(q);
        for t in 0..t_len {
            let x = problem.row(t, i);
            for (r, slot) in px.iter_mut().enumerate() {
                *slot = (0..m).map(|c| p[(r, c)] * x[c]).sum();
            }
            let f = x.iter().zip(&px).map(|(a, b)| a * b).sum::<f64>() + obs_var;
            if f.is_nan() || f <= 0.0 {
                return Err(Error::Singular(format!("innovation variance at t={t}")));
            }
            let e = problem.y[(t, i)] - x.iter().zip(&a).map(|(x, a)| x * a).sum::<f64>();
            sum_sq += e * e / f;
            logdet += f.ln();
            for r in 0..m {
                a[r] += px[r] * e / f;
                for c in 0..m {
                    p[(r, c)] -= px[r] * px[c] / f;
                }
                p[(r, r)] += q;
            }
        }
    }
    Ok(concentrated(sum_sq, logdet, t_len * k))
}
