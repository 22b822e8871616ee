//! Augmented Dickey-Fuller unit-root test, constant and no trend, with the
//! augmentation order chosen by BIC.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Significance {
    One,
    Five,
    Ten,
}

impl Significance {
    pub fn from_fraction(level: f64) -> Result<Self> {
        match level {
            l if (l - 0.01).abs() < 1e-12 => Ok(Significance::One),
            l if (l - 0.05).abs() < 1e-12 => Ok(Significance::Five),
            l if (l - 0.10).abs() < 1e-12 => Ok(Significance::Ten),
            _ => Err(Error::ConfigError(format!(
                "no Dickey-Fuller critical values for level {level}"
            ))),
        }
    }
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Significance::One => "1%",
            Significance::Five => "5%",
            Significance::Ten => "10%",
        })
    }
}

/// Dickey-Fuller critical values for the regression with a constant and no
/// trend. Source: Fuller (1976), Introduction to Statistical Time Series,
/// Table 8.5.2, as reproduced in Hamilton (1994), Time Series Analysis,
/// Table B.6, case 2. Columns: sample size, 1%, 5%, 10%. The last row is
/// the asymptotic distribution.
const DF_TABLE: [(f64, [f64; 3]); 6] = [
    (25.0, [-3.75, -3.00, -2.63]),
    (50.0, [-3.58, -2.93, -2.60]),
    (100.0, [-3.51, -2.89, -2.58]),
    (250.0, [-3.46, -2.88, -2.57]),
    (500.0, [-3.44, -2.87, -2.57]),
    (f64::INFINITY, [-3.43, -2.86, -2.57]),
];

/// Critical value at `level` for `n_obs` observations, linearly
/// interpolated in `1 / n` between table rows. Sizes below 25 use the
/// 25-observation row.
pub fn df_critical_value(level: Significance, n_obs: usize) -> f64 {
    let col = match level {
        Significance::One => 0,
        Significance::Five => 1,
        Significance::Ten => 2,
    };
    let inv = 1.0 / (n_obs.max(1) as f64);
    let inv_of = |n: f64| if n.is_infinite() { 0.0 } else { 1.0 / n };
    if inv >= inv_of(DF_TABLE[0].0) {
        return DF_TABLE[0].1[col];
    }
    for w in DF_TABLE.windows(2) {
        let (a, b) = (inv_of(w[0].0), inv_of(w[1].0));
        if inv <= a && inv >= b {
            let frac = (inv - b) / (a - b);
            return w[1].1[col] + frac * (w[0].1[col] - w[1].1[col]);
        }
    }
    DF_TABLE[DF_TABLE.len() - 1].1[col]
}

/// Schwert's rule, `floor(12 (T / 100)^(1/4))`.
pub fn schwert_max_lag(t_len: usize) -> usize {
    (12.0 * (t_len as f64 / 100.0).powf(0.25)).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagSelection {
    pub max_lag: usize,
}

impl LagSelection {
    pub fn schwert(t_len: usize) -> Self {
        Self {
            max_lag: schwert_max_lag(t_len),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdfResult {
    /// t-ratio on the lagged level.
    pub statistic: f64,
    pub lag: usize,
    /// Observations in the final regression, `T - lag - 1`.
    pub n_obs: usize,
    pub critical_1pct: f64,
    pub reject_1pct: bool,
}

struct Ols {
    rss: f64,
    t_level: f64,
    n: usize,
}

/// `dy_t = c + rho y_{t-1} + sum_j phi_j dy_{t-j}` over targets
/// `first..T-1` (indices into `y`).
fn adf_regression(y: &[f64], lag: usize, first: usize) -> Result<Ols> {
    let n = y.len() - first;
    let cols = lag + 2;
    if n <= cols {
        return Err(Error::TooShort {
            needed: first + cols + 1,
            got: y.len(),
        });
    }
    let dy = |t: usize| y[t] - y[t - 1];
    let mut x = DMatrix::zeros(n, cols);
    let mut target = DVector::zeros(n);
    for (row, t) in (first..y.len()).enumerate() {
        target[row] = dy(t);
        x[(row, 0)] = 1.0;
        x[(row, 1)] = y[t - 1];
        for j in 1..=lag {
            x[(row, 1 + j)] = dy(t - j);
        }
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    if diag_max == 0.0 || (0..cols).any(|j| r[(j, j)].abs() <= 1e-12 * diag_max) {
        return Err(Error::Singular("ADF regression is rank deficient".into()));
    }
    let beta = r
        .solve_upper_triangular(&qr.q().tr_mul(&target))
        .ok_or_else(|| Error::Singular("ADF triangular solve".into()))?;
    let resid = &target - &x * &beta;
    let rss = resid.norm_squared();
    // (X'X)^{-1} = R^{-1} R^{-T}; the level coefficient's variance factor is
    // the squared norm of row 1 of R^{-1}.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .ok_or_else(|| Error::Singular("ADF covariance".into()))?;
    let v11 = r_inv.row(1).norm_squared();
    let s2 = rss / (n - cols) as f64;
    Ok(Ols {
        rss,
        t_level: beta[1] / (s2 * v11).sqrt(),
        n,
    })
}

/// ADF test with a fixed augmentation order, on the largest sample it allows.
pub fn adf_fixed_lag(series: &[f64], lag: usize) -> Result<AdfResult> {
    let ols = adf_regression(series, lag, lag + 1)?;
    let cv = df_critical_value(Significance::One, ols.n);
    Ok(AdfResult {
        statistic: ols.t_level,
        lag,
        n_obs: ols.n,
        critical_1pct: cv,
        reject_1pct: ols.t_level < cv,
    })
}

/// Chooses the lag in `0..=max_lag` minimizing BIC, with every candidate
/// fitted on the sample left after dropping `max_lag + 1` leading points.
pub fn select_lag(series: &[f64], selection: LagSelection) -> Result<usize> {
    let first = selection.max_lag + 1;
    let mut best: Option<(f64, usize)> = None;
    for lag in 0..=selection.max_lag {
        let ols = adf_regression(series, lag, first)?;
        let n = ols.n as f64;
        let bic = n * (ols.rss / n).ln() + (lag + 2) as f64 * n.ln();
        if best.is_none_or(|(b, _)| bic < b) {
            best = Some((bic, lag));
        }
    }
    Ok(best.map(|b| b.1).unwrap_or(0))
}

pub fn adf_test(series: &[f64], selection: LagSelection) -> Result<AdfResult> {
    let needed = selection.max_lag + 10;
    if series.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::ShapeError(
            "series contains non-finite values".into(),
        ));
    }
    let lag = select_lag(series, selection)?;
    adf_fixed_lag(series, lag)
}
