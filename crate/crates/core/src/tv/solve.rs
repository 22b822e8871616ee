use nalgebra::DMatrix;

use super::blocktri::BlockTridiagCholesky;
use super::kalman::filter_loglik;
use super::{StateLayout, TvProblem, TvSolution};
use crate::error::{Error, Result};

/// How the block-tridiagonal normal equations are factored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    /// One `m x m`-block system per portfolio. `X_t` is block diagonal and
    /// the penalty is isotropic, so the `d x d` system separates exactly;
    /// portfolios with identical regressors and weights share one factor.
    #[default]
    Decoupled,
    /// The full system with `d x d` blocks.
    Joint,
}

/// Factored normal equations for a fixed regressor set, weights and
/// `lambda`. Solving for new observations costs `O(T m^2)` per portfolio.
#[derive(Debug, Clone)]
pub struct TvSystem {
    layout: StateLayout,
    lambda: f64,
    regressors: Vec<f64>,
    weights: Vec<f64>,
    factors: Vec<BlockTridiagCholesky>,
    /// Index into `factors` for each portfolio.
    factor_of: Vec<usize>,
}

fn diag_penalty(t: usize, t_len: usize) -> f64 {
    if t + 1 < t_len {
        2.0
    } else {
        1.0
    }
}

impl TvSystem {
    pub fn factor(problem: &TvProblem) -> Result<Self> {
        problem.check_lambda()?;
        let StateLayout { k, m, t_len } = problem.layout;
        let lambda = problem.lambda;

        let same_inputs = |a: usize, b: usize| {
            problem.obs_weights[a] == problem.obs_weights[b]
                && (0..t_len).all(|t| problem.row(t, a) == problem.row(t, b))
        };
        let mut representatives: Vec<usize> = Vec::new();
        let mut factor_of = Vec::with_capacity(k);
        for i in 0..k {
            match representatives.iter().position(|&r| same_inputs(r, i)) {
                Some(g) => factor_of.push(g),
                None => {
                    factor_of.push(representatives.len());
                    representatives.push(i);
                }
            }
        }

        let sub = vec![DMatrix::identity(m, m) * -lambda; t_len - 1];
        let factors = representatives
            .iter()
            .map(|&i| {
                let w = problem.obs_weights[i];
                let diag = (0..t_len)
                    .map(|t| {
                        let x = problem.row(t, i);
                        let mut a = DMatrix::identity(m, m) * (lambda * diag_penalty(t, t_len));
                        for r in 0..m {
                            for c in 0..m {
                                a[(r, c)] += w * x[r] * x[c];
                            }
                        }
                        a
                    })
                    .collect();
                BlockTridiagCholesky::factor(diag, &sub)
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            layout: problem.layout,
            lambda,
            regressors: problem.regressors.clone(),
            weights: problem.obs_weights.clone(),
            factors,
            factor_of,
        })
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    /// Number of distinct factorizations held.
    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// Path of portfolio `i` (`T x m`) for observations `y` and prior `gamma0`.
    pub fn solve_portfolio(&self, i: usize, y: &[f64], gamma0: &[f64]) -> Result<DMatrix<f64>> {
        let StateLayout { k, m, t_len } = self.layout;
        if y.len() != t_len || gamma0.len() != m || i >= k {
            return Err(Error::ShapeError("portfolio solve inputs".into()));
        }
        let w = self.weights[i];
        let mut rhs = DMatrix::zeros(t_len * m, 1);
        for (t, &yt) in y.iter().enumerate() {
            let start = (t * k + i) * m;
            for j in 0..m {
                rhs[t * m + j] = w * self.regressors[start + j] * yt;
            }
        }
        for j in 0..m {
            rhs[j] += self.lambda * gamma0[j];
        }
        self.factors[self.factor_of[i]].solve_mut(&mut rhs)?;
        Ok(DMatrix::from_row_slice(t_len, m, rhs.as_slice()))
    }

    /// Full `T x d` path for `T x k` observations `y`.
    pub fn solve(&self, y: &DMatrix<f64>, gamma0: &[f64]) -> Result<DMatrix<f64>> {
        let StateLayout { k, m, t_len } = self.layout;
        if y.shape() != (t_len, k) || gamma0.len() != k * m {
            return Err(Error::ShapeError("solve inputs".into()));
        }
        let mut gamma = DMatrix::zeros(t_len, k * m);
        for i in 0..k {
            let col: Vec<f64> = y.column(i).iter().copied().collect();
            let path = self.solve_portfolio(i, &col, &gamma0[i * m..(i + 1) * m])?;
            gamma.columns_mut(i * m, m).copy_from(&path);
        }
        Ok(gamma)
    }
}

/// Smoothed coefficient paths via the block-tridiagonal normal equations.
pub fn solve_tv(problem: &TvProblem) -> Result<TvSolution> {
    solve_tv_with(problem, SolveMode::Decoupled)
}

pub fn solve_tv_with(problem: &TvProblem, mode: SolveMode) -> Result<TvSolution> {
    let gamma = match mode {
        SolveMode::Decoupled => TvSystem::factor(problem)?.solve(&problem.y, &problem.gamma0)?,
        SolveMode::Joint => solve_joint(problem)?,
    };
    let loglik = filter_loglik(problem)?;
    Ok(TvSolution::from_gamma(problem, gamma, loglik))
}

fn solve_joint(problem: &TvProblem) -> Result<DMatrix<f64>> {
    problem.check_lambda()?;
    let StateLayout { k, m, t_len } = problem.layout;
    let d = k * m;
    let lambda = problem.lambda;
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(problem.obs_weights.clone()));

    let mut rhs = DMatrix::zeros(t_len * d, 1);
    let diag = (0..t_len)
        .map(|t| {
            let x = problem.observation_matrix(t);
            let xtw = x.tr_mul(&w);
            let b = &xtw * problem.y.row(t).transpose();
            rhs.rows_mut(t * d, d).copy_from(&b);
            &xtw * &x + DMatrix::identity(d, d) * (lambda * diag_penalty(t, t_len))
        })
        .collect();
    for s in 0..d {
        rhs[s] += lambda * problem.gamma0[s];
    }
    let sub = vec![DMatrix::identity(d, d) * -lambda; t_len - 1];
    BlockTridiagCholesky::factor(diag, &sub)?.solve_mut(&mut rhs)?;
    Ok(DMatrix::from_row_slice(t_len, d, rhs.as_slice()))
}
