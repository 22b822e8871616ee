//! Residual bootstrap confidence bands for coefficient paths under the null
//! that every coefficient is zero.
//!
//! Each replicate resamples whole dates of the residual matrix with
//! replacement, uses the resampled residuals themselves as the observations
//! (the null model has no signal), and re-solves the smoothing problem with
//! the original regressors, the original `lambda` and a zero prior. Bands
//! are pointwise empirical quantiles across replicates.
//!
//! Quantile convention: for probability `q` and `N` replicates, the
//! `ceil(q * N)`-th smallest value (1-based, clamped to `1..=N`).

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::factors::ModelSpec;
use crate::rng::{substream, StreamRng};
use crate::timeseries::ReturnPanel;
use crate::tv::{build_problem, StateLayout, TvProblem, TvSolution, TvSystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n_reps: usize,
    pub level: f64,
    pub seed: u64,
    pub lambda: f64,
    /// Resample whole cross-sections (dates) rather than each portfolio
    /// independently.
    pub joint_resampling: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_reps: 500,
            level: 0.95,
            seed: 0,
            lambda: 1.0,
            joint_resampling: true,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_reps < 2 {
            return Err(Error::ConfigError(format!(
                "need at least 2 bootstrap replicates, got {}",
                self.n_reps
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::ConfigError(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::ConfigError(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSet {
    /// `T x d`.
    pub lower: DMatrix<f64>,
    /// `T x d`.
    pub upper: DMatrix<f64>,
    pub level: f64,
    pub n_reps: usize,
    /// `T x d`; set by [`BandSet::flagged`], all false until then.
    pub significant: DMatrix<bool>,
}

impl BandSet {
    /// Attaches significance flags for `solution`.
    pub fn flagged(mut self, solution: &TvSolution) -> Result<Self> {
        self.significant = flag_significance(solution, &self)?;
        Ok(self)
    }
}

/// 1-based rank of the order statistic used for probability `q`.
pub fn quantile_rank(q: f64, n: usize) -> usize {
    ((q * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Resampled row indices for portfolio `i`.
///
/// Joint resampling draws one index per date, shared by all portfolios.
/// Independent resampling draws `k` index sequences portfolio by portfolio
/// from the same stream and keeps the `i`-th.
fn resample_indices(
    rng: &mut StreamRng,
    t_len: usize,
    i: usize,
    joint: bool,
    out: &mut Vec<usize>,
) {
    let rounds = if joint { 1 } else { i + 1 };
    for _ in 0..rounds {
        out.clear();
        out.extend((0..t_len).map(|_| rng.random_range(0..t_len)));
    }
}

/// The `T x k` residual matrix replicate `replicate` solves against.
pub fn resample_residuals(
    residuals: &DMatrix<f64>,
    config: &BootstrapConfig,
    replicate: usize,
) -> DMatrix<f64> {
    let (t_len, k) = residuals.shape();
    let mut out = DMatrix::zeros(t_len, k);
    let mut idx = Vec::with_capacity(t_len);
    for i in 0..k {
        let mut rng = substream(config.seed, replicate as u64);
        resample_indices(&mut rng, t_len, i, config.joint_resampling, &mut idx);
        for (t, &s) in idx.iter().enumerate() {
            out[(t, i)] = residuals[(s, i)];
        }
    }
    out
}

fn check_residuals(layout: StateLayout, residuals: &DMatrix<f64>) -> Result<()> {
    if residuals.shape() != (layout.t_len, layout.k) {
        return Err(Error::ShapeError(format!(
            "residuals are {:?}, expected ({}, {})",
            residuals.shape(),
            layout.t_len,
            layout.k
        )));
    }
    Ok(())
}

/// Replicate paths of portfolio `i`, one `T x m` matrix per replicate.
fn portfolio_replicates(
    system: &TvSystem,
    residuals: &DMatrix<f64>,
    i: usize,
    config: &BootstrapConfig,
    exec: Execution,
) -> Result<Vec<DMatrix<f64>>> {
    let StateLayout { m, t_len, .. } = system.layout();
    let zeros = vec![0.0; m];
    exec.try_map(config.n_reps, |r| {
        let mut rng = substream(config.seed, r as u64);
        let mut idx = Vec::with_capacity(t_len);
        resample_indices(&mut rng, t_len, i, config.joint_resampling, &mut idx);
        let y: Vec<f64> = idx.iter().map(|&s| residuals[(s, i)]).collect();
        system
            .solve_portfolio(i, &y, &zeros)
            .map_err(|e| Error::ReplicateFailed {
                index: r,
                source: Box::new(e),
            })
    })
}

/// All replicate paths as `T x d` matrices. Memory is `N * T * d`; meant
/// for inspection and testing on small problems.
pub fn bootstrap_replicates(
    problem: &TvProblem,
    residuals: &DMatrix<f64>,
    config: &BootstrapConfig,
    exec: Execution,
) -> Result<Vec<DMatrix<f64>>> {
    config.validate()?;
    check_residuals(problem.layout, residuals)?;
    let system = null_system(problem, config)?;
    let StateLayout { k, m, t_len } = problem.layout;
    let mut reps = vec![DMatrix::zeros(t_len, k * m); config.n_reps];
    for i in 0..k {
        for (r, path) in portfolio_replicates(&system, residuals, i, config, exec)?
            .into_iter()
            .enumerate()
        {
            reps[r].columns_mut(i * m, m).copy_from(&path);
        }
    }
    Ok(reps)
}

fn null_system(problem: &TvProblem, config: &BootstrapConfig) -> Result<TvSystem> {
    let mut p = problem.clone();
    p.lambda = config.lambda;
    p.gamma0.iter_mut().for_each(|g| *g = 0.0);
    TvSystem::factor(&p)
}

/// Bootstrap bands for the regressors and weights of `problem`; its
/// observations and prior are ignored.
pub fn bootstrap_problem(
    problem: &TvProblem,
    residuals: &DMatrix<f64>,
    config: &BootstrapConfig,
    exec: Execution,
) -> Result<BandSet> {
    config.validate()?;
    check_residuals(problem.layout, residuals)?;
    let system = null_system(problem, config)?;
    let StateLayout { k, m, t_len } = problem.layout;
    let n = config.n_reps;
    let tail = (1.0 - config.level) / 2.0;
    let lo_rank = quantile_rank(tail, n) - 1;
    let hi_rank = quantile_rank(1.0 - tail, n) - 1;

    let mut lower = DMatrix::zeros(t_len, k * m);
    let mut upper = DMatrix::zeros(t_len, k * m);
    for i in 0..k {
        let reps = portfolio_replicates(&system, residuals, i, config, exec)?;
        let cells = exec.map(t_len * m, |c| {
            let (t, j) = (c / m, c % m);
            let mut vals: Vec<f64> = reps.iter().map(|r| r[(t, j)]).collect();
            vals.sort_unstable_by(f64::total_cmp);
            (vals[lo_rank], vals[hi_rank])
        });
        for (c, (lo, hi)) in cells.into_iter().enumerate() {
            let (t, j) = (c / m, c % m);
            lower[(t, i * m + j)] = lo;
            upper[(t, i * m + j)] = hi;
        }
    }
    Ok(BandSet {
        significant: DMatrix::from_element(t_len, k * m, false),
        lower,
        upper,
        level: config.level,
        n_reps: n,
    })
}

/// Bands for the model's factor regressors, resampling `residuals` (`T x k`,
/// usually the static-fit residuals).
pub fn bootstrap_bands(
    spec: &ModelSpec,
    excess: &ReturnPanel,
    factors: &ReturnPanel,
    residuals: &DMatrix<f64>,
    config: &BootstrapConfig,
    exec: Execution,
) -> Result<BandSet> {
    config.validate()?;
    let d = excess.width() * spec.m();
    let problem = build_problem(spec, excess, factors, vec![0.0; d], config.lambda)?;
    bootstrap_problem(&problem, residuals, config, exec)
}

/// True where the estimate lies outside the closed band `[lower, upper]`.
pub fn flag_significance(solution: &TvSolution, bands: &BandSet) -> Result<DMatrix<bool>> {
    let shape = solution.gamma.shape();
    if bands.lower.shape() != shape || bands.upper.shape() != shape {
        return Err(Error::ShapeError(format!(
            "estimate is {:?}, bands are {:?}",
            shape,
            bands.lower.shape()
        )));
    }
    Ok(DMatrix::from_fn(shape.0, shape.1, |t, s| {
        let g = solution.gamma[(t, s)];
        g < bands.lower[(t, s)] || g > bands.upper[(t, s)]
    }))
}
