use super::{build_problem, filter_loglik};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::factors::ModelSpec;
use crate::timeseries::ReturnPanel;

/// `10^-2 .. 10^6` in half-decade steps (17 points).
pub fn default_lambda_grid() -> Vec<f64> {
    (0..17)
        .map(|i| 10f64.powf(-2.0 + 0.5 * f64::from(i)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda: f64,
    /// `(lambda, loglik)` for every grid point, in grid order. Non-finite
    /// likelihoods are kept as NaN.
    pub profile: Vec<(f64, f64)>,
}

/// Maximum-likelihood choice of `lambda` over `grid`. Ties go to the
/// earliest grid point.
pub fn select_lambda(
    spec: &ModelSpec,
    excess: &ReturnPanel,
    factors: &ReturnPanel,
    gamma0: &[f64],
    grid: &[f64],
    exec: Execution,
) -> Result<LambdaSelection> {
    if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::ConfigError(
            "lambda grid must be non-empty and positive".into(),
        ));
    }
    let base = build_problem(spec, excess, factors, gamma0.to_vec(), grid[0])?;
    let profile: Vec<(f64, f64)> = exec.map(grid.len(), |g| {
        let mut p = base.clone();
        p.lambda = grid[g];
        let ll = filter_loglik(&p)
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::NAN);
        (grid[g], ll)
    });
    let best = profile
        .iter()
        .filter(|(_, ll)| ll.is_finite())
        .fold(None::<(f64, f64)>, |acc, &(l, ll)| match acc {
            Some((_, best)) if best >= ll => acc,
            _ => Some((l, ll)),
        })
        .ok_or(Error::SelectionFailed)?;
    Ok(LambdaSelection {
        lambda: best.0,
        profile,
    })
}
