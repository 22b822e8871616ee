//! Time-varying coefficient estimation.
//!
//! Each portfolio `i` has a coefficient path `gamma_{i,t}` (intercept and
//! factor loadings) that follows a random walk. Stacking every portfolio's
//! coefficients gives the state vector `gamma_t` of length `d = k * m`.
//! The estimate minimizes
//!
//! ```text
//! sum_t sum_i w_i (y_{i,t} - x_{i,t}' gamma_{i,t})^2
//!     + lambda |gamma_1 - gamma_0|^2 + lambda sum_{t>=2} |gamma_t - gamma_{t-1}|^2
//! ```
//!
//! which is the stacked GLS regression of observation equations on top of
//! state-difference equations. Its normal equations are block tridiagonal
//! and are solved by [`solve_tv`] in `O(T)` block operations. The same
//! estimate is the fixed-interval smoother of the state-space model with
//! observation variance `1/w_i` and state variance `1/lambda`, see
//! [`kalman_smoother`].

mod blocktri;
mod dense;
mod kalman;
mod select;
mod solve;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factors::{check_same_dates, design_matrix, ModelSpec};
use crate::timeseries::ReturnPanel;

pub use blocktri::BlockTridiagCholesky;
pub use dense::dense_stacked_solve;
pub use kalman::{filter_loglik, kalman_smoother};
pub use select::{default_lambda_grid, select_lambda, LambdaSelection};
pub use solve::{solve_tv, solve_tv_with, SolveMode, TvSystem};

/// Index arithmetic for the stacked state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    /// Portfolios.
    pub k: usize,
    /// Coefficients per portfolio.
    pub m: usize,
    /// Dates.
    pub t_len: usize,
}

impl StateLayout {
    pub fn d(&self) -> usize {
        self.k * self.m
    }

    /// Flat state index of coefficient `j` of portfolio `i`.
    pub fn index(&self, portfolio: usize, coef: usize) -> usize {
        debug_assert!(portfolio < self.k && coef < self.m);
        portfolio * self.m + coef
    }

    pub fn split(&self, flat: usize) -> (usize, usize) {
        (flat / self.m, flat % self.m)
    }
}

/// A fully specified estimation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TvProblem {
    pub layout: StateLayout,
    /// Regressor rows, indexed `[(t * k + i) * m + j]`. Row `(t, i)` is the
    /// non-zero block of row `i` of the observation matrix `X_t`.
    pub regressors: Vec<f64>,
    /// `T x k` observations.
    pub y: DMatrix<f64>,
    /// Prior mean of the state before the first date, length `d`.
    pub gamma0: Vec<f64>,
    /// Weight on state differences relative to observation errors.
    pub lambda: f64,
    /// Per-portfolio observation weights (inverse relative variances).
    pub obs_weights: Vec<f64>,
}

impl TvProblem {
    /// Checks shapes and builds the problem from raw arrays.
    pub fn new(
        layout: StateLayout,
        regressors: Vec<f64>,
        y: DMatrix<f64>,
        gamma0: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let StateLayout { k, m, t_len } = layout;
        if t_len == 0 || k == 0 || m == 0 {
            return Err(Error::ShapeError("empty problem".into()));
        }
        if regressors.len() != t_len * k * m {
            return Err(Error::ShapeError(format!(
                "expected {} regressor values, got {}",
                t_len * k * m,
                regressors.len()
            )));
        }
        if y.shape() != (t_len, k) {
            return Err(Error::ShapeError(format!(
                "y is {:?}, expected ({t_len}, {k})",
                y.shape()
            )));
        }
        if gamma0.len() != layout.d() {
            return Err(Error::ShapeError(format!(
                "gamma0 has length {}, state dimension is {}",
                gamma0.len(),
                layout.d()
            )));
        }
        Ok(Self {
            layout,
            regressors,
            y,
            gamma0,
            lambda,
            obs_weights: vec![1.0; k],
        })
    }

    pub fn with_obs_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.layout.k || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::ConfigError(
                "observation weights must be positive, one per portfolio".into(),
            ));
        }
        self.obs_weights = weights;
        Ok(self)
    }

    pub fn with_y(&self, y: DMatrix<f64>, gamma0: Vec<f64>) -> Result<Self> {
        let mut p = Self::new(self.layout, self.regressors.clone(), y, gamma0, self.lambda)?;
        p.obs_weights = self.obs_weights.clone();
        Ok(p)
    }

    /// Regressor row of portfolio `i` at date `t`.
    pub fn row(&self, t: usize, i: usize) -> &[f64] {
        let m = self.layout.m;
        let start = (t * self.layout.k + i) * m;
        &self.regressors[start..start + m]
    }

    /// Dense `k x d` observation matrix for date `t`.
    pub fn observation_matrix(&self, t: usize) -> DMatrix<f64> {
        let StateLayout { k, m, .. } = self.layout;
        let mut x = DMatrix::zeros(k, k * m);
        for i in 0..k {
            for (j, v) in self.row(t, i).iter().enumerate() {
                x[(i, i * m + j)] = *v;
            }
        }
        x
    }

    pub(crate) fn check_lambda(&self) -> Result<()> {
        if self.lambda > 0.0 && self.lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::Singular(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )))
        }
    }
}

/// Estimated coefficient paths and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TvSolution {
    pub layout: StateLayout,
    /// `T x d`; row `t` is the stacked state at date `t`.
    pub gamma: DMatrix<f64>,
    /// `T x k` observation residuals.
    pub obs_resid: DMatrix<f64>,
    /// `T x d` state innovations, row 0 relative to `gamma0`.
    pub state_resid: DMatrix<f64>,
    /// Concentrated Gaussian log-likelihood (observation scale profiled out).
    pub loglik: f64,
    pub lambda_used: f64,
}

impl TvSolution {
    pub(crate) fn from_gamma(problem: &TvProblem, gamma: DMatrix<f64>, loglik: f64) -> Self {
        let StateLayout { k, m, t_len } = problem.layout;
        let mut obs_resid = DMatrix::zeros(t_len, k);
        for t in 0..t_len {
            for i in 0..k {
                let fit: f64 = problem
                    .row(t, i)
                    .iter()
                    .enumerate()
                    .map(|(j, x)| x * gamma[(t, i * m + j)])
                    .sum();
                obs_resid[(t, i)] = problem.y[(t, i)] - fit;
            }
        }
        let mut state_resid = gamma.clone();
        for t in (0..t_len).rev() {
            for s in 0..k * m {
                let prev = if t == 0 {
                    problem.gamma0[s]
                } else {
                    gamma[(t - 1, s)]
                };
                state_resid[(t, s)] -= prev;
            }
        }
        Self {
            layout: problem.layout,
            gamma,
            obs_resid,
            state_resid,
            loglik,
            lambda_used: problem.lambda,
        }
    }

    /// Path of one coefficient of one portfolio.
    pub fn path(&self, portfolio: usize, coef: usize) -> Vec<f64> {
        self.gamma
            .column(self.layout.index(portfolio, coef))
            .iter()
            .copied()
            .collect()
    }

    /// Penalized objective evaluated at the stored path.
    pub fn objective(&self, problem: &TvProblem) -> f64 {
        objective(problem, &self.gamma)
    }

    /// Sum of squared state differences (excluding the prior term).
    pub fn roughness(&self) -> f64 {
        self.state_resid
            .rows(1, self.layout.t_len - 1)
            .norm_squared()
    }
}

/// Penalized least-squares objective of an arbitrary `T x d` path.
pub fn objective(problem: &TvProblem, gamma: &DMatrix<f64>) -> f64 {
    let StateLayout { k, m, t_len } = problem.layout;
    let mut total = 0.0;
    for t in 0..t_len {
        for i in 0..k {
            let fit: f64 = problem
                .row(t, i)
                .iter()
                .enumerate()
                .map(|(j, x)| x * gamma[(t, i * m + j)])
                .sum();
            total += problem.obs_weights[i] * (problem.y[(t, i)] - fit).powi(2);
        }
        for s in 0..k * m {
            let prev = if t == 0 {
                problem.gamma0[s]
            } else {
                gamma[(t - 1, s)]
            };
            total += problem.lambda * (gamma[(t, s)] - prev).powi(2);
        }
    }
    total
}

/// Assembles the problem for `k` portfolios sharing the model's factor regressors.
pub fn build_problem(
    spec: &ModelSpec,
    excess: &ReturnPanel,
    factors: &ReturnPanel,
    gamma0: Vec<f64>,
    lambda: f64,
) -> Result<TvProblem> {
    check_same_dates(excess, factors)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::ConfigError(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let x = design_matrix(spec, factors)?;
    let t_len = excess.len();
    let k = excess.width();
    let m = spec.m();
    let mut regressors = Vec::with_capacity(t_len * k * m);
    for t in 0..t_len {
        for _ in 0..k {
            regressors.extend(x.row(t).iter());
        }
    }
    let y = DMatrix::from_row_slice(t_len, k, &excess.dense()?);
    TvProblem::new(StateLayout { k, m, t_len }, regressors, y, gamma0, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::FactorModel;
    use crate::timeseries::MonthStamp;

    fn panels(t: usize, k: usize, p: usize) -> (ReturnPanel, ReturnPanel) {
        let start = MonthStamp::new(2001, 1).unwrap();
        let labels = ["Mkt-RF", "SMB", "HML", "RMW", "CMA", "WML"];
        let f = ReturnPanel::from_columns(
            start,
            labels[..p]
                .iter()
                .enumerate()
                .map(|(j, n)| {
                    (
                        n.to_string(),
                        (0..t)
                            .map(|s| ((s * 7 + j * 3) % 11) as f64 * 0.01)
                            .collect(),
                    )
                })
                .collect(),
        )
        .unwrap();
        let e = ReturnPanel::from_columns(
            start,
            (0..k)
                .map(|i| {
                    (
                        format!("P{i}"),
                        (0..t).map(|s| (s + i) as f64 * 0.001).collect(),
                    )
                })
                .collect(),
        )
        .unwrap();
        (e, f)
    }

    #[test]
    fn state_dimension_per_model() {
        for (model, d) in [
            (FactorModel::FF3, 100),
            (FactorModel::FF5, 150),
            (FactorModel::FF6, 175),
        ] {
            let spec = ModelSpec::new(model);
            let (e, f) = panels(4, 25, spec.p());
            let prob = build_problem(&spec, &e, &f, vec![0.0; d], 1.0).unwrap();
            assert_eq!(prob.layout.d(), d);
        }
    }

    #[test]
    fn observation_blocks_are_diagonal() {
        let spec = ModelSpec::new(FactorModel::FF3);
        let (e, f) = panels(6, 3, 3);
        let prob = build_problem(&spec, &e, &f, vec![0.0; 12], 1.0).unwrap();
        for t in 0..6 {
            let x = prob.observation_matrix(t);
            assert_eq!(x.shape(), (3, 12));
            for i in 0..3 {
                for s in 0..12 {
                    if s / 4 != i {
                        assert_eq!(x[(i, s)], 0.0);
                    }
                }
                assert_eq!(x[(i, i * 4)], 1.0);
            }
        }
    }

    #[test]
    fn single_factor_rows() {
        let layout = StateLayout {
            k: 1,
            m: 2,
            t_len: 3,
        };
        let prob = TvProblem::new(
            layout,
            vec![1.0, 0.1, 1.0, 0.2, 1.0, 0.3],
            DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 0.0]),
            vec![0.0; 2],
            1.0,
        )
        .unwrap();
        assert_eq!(
            prob.observation_matrix(1),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.2])
        );
    }

    #[test]
    fn build_rejects_bad_inputs() {
        let spec = ModelSpec::new(FactorModel::FF3);
        let (e, f) = panels(6, 2, 3);
        assert!(matches!(
            build_problem(&spec, &e, &f, vec![0.0; 8], 0.0),
            Err(Error::ConfigError(_))
        ));
        let shifted = e
            .slice(Some(MonthStamp::new(2001, 2).unwrap()), None)
            .unwrap();
        assert!(matches!(
            build_problem(&spec, &shifted, &f, vec![0.0; 8], 1.0),
            Err(Error::ShapeError(_))
        ));
        assert!(matches!(
            build_problem(&spec, &e, &f, vec![0.0; 7], 1.0),
            Err(Error::ShapeError(_))
        ));
    }

    #[test]
    fn layout_index_is_bijective() {
        let l = StateLayout {
            k: 5,
            m: 4,
            t_len: 1,
        };
        let mut seen = vec![false; l.d()];
        for i in 0..5 {
            for j in 0..4 {
                let s = l.index(i, j);
                assert!(!seen[s]);
                seen[s] = true;
                assert_eq!(l.split(s), (i, j));
            }
        }
        assert!(seen.into_iter().all(|b| b));
    }
}
