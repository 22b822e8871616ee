//! Fama-French model specifications and constant-coefficient fits.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::timeseries::ReturnPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorModel {
    FF3,
    FF5,
    FF6,
}

impl FactorModel {
    pub fn as_str(self) -> &'static str {
        match self {
            FactorModel::FF3 => "ff3",
            FactorModel::FF5 => "ff5",
            FactorModel::FF6 => "ff6",
        }
    }
}

impl fmt::Display for FactorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FactorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ff3" => Ok(FactorModel::FF3),
            "ff5" => Ok(FactorModel::FF5),
            "ff6" => Ok(FactorModel::FF6),
            _ => Err(Error::ConfigError(format!("unknown model `{s}`"))),
        }
    }
}

const ALL_FACTORS: [&str; 6] = ["Mkt-RF", "SMB", "HML", "RMW", "CMA", "WML"];

/// Which factors enter the regression. Coefficient order is intercept
/// first, then factors in the fixed order Mkt, SMB, HML, RMW, CMA, WML.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub model: FactorModel,
}

impl ModelSpec {
    pub fn new(model: FactorModel) -> Self {
        Self { model }
    }

    /// Number of factors.
    pub fn p(&self) -> usize {
        match self.model {
            FactorModel::FF3 => 3,
            FactorModel::FF5 => 5,
            FactorModel::FF6 => 6,
        }
    }

    /// Coefficients per portfolio, `p + 1`.
    pub fn m(&self) -> usize {
        self.p() + 1
    }

    pub fn factor_labels(&self) -> &'static [&'static str] {
        &ALL_FACTORS[..self.p()]
    }

    /// `alpha`, `beta_Mkt`, `beta_SMB`, ...
    pub fn coefficient_names(&self) -> Vec<String> {
        std::iter::once("alpha".to_string())
            .chain(self.factor_labels().iter().map(|f| {
                let short = f.strip_suffix("-RF").unwrap_or(f);
                format!("beta_{short}")
            }))
            .collect()
    }

    pub fn coefficient_index(&self, name: &str) -> Option<usize> {
        self.coefficient_names().iter().position(|n| n == name)
    }
}

/// `[1, f_1, ..., f_p]`.
pub fn regressor_row(spec: &ModelSpec, factors_at_t: &[f64]) -> Result<Vec<f64>> {
    if factors_at_t.len() != spec.p() {
        return Err(Error::ShapeError(format!(
            "{} expects {} factors, got {}",
            spec.model,
            spec.p(),
            factors_at_t.len()
        )));
    }
    let mut row = Vec::with_capacity(spec.m());
    row.push(1.0);
    row.extend_from_slice(factors_at_t);
    Ok(row)
}

/// `T x m` regressor matrix from the model's factor columns.
pub fn design_matrix(spec: &ModelSpec, factors: &ReturnPanel) -> Result<DMatrix<f64>> {
    let f = factors.select(spec.factor_labels())?;
    let t_len = f.len();
    let mut x = DMatrix::zeros(t_len, spec.m());
    for t in 0..t_len {
        let raw = (0..spec.p())
            .map(|j| {
                f.get(t, j).ok_or_else(|| Error::GapInSeries {
                    series: f.names()[j].clone(),
                    at: f.dates()[t],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for (j, v) in regressor_row(spec, &raw)?.into_iter().enumerate() {
            x[(t, j)] = v;
        }
    }
    Ok(x)
}

pub(crate) fn check_same_dates(a: &ReturnPanel, b: &ReturnPanel) -> Result<()> {
    if a.dates() != b.dates() {
        return Err(Error::ShapeError(format!(
            "panels not aligned: {:?}..{:?} ({}) vs {:?}..{:?} ({})",
            a.first_date(),
            a.last_date(),
            a.len(),
            b.first_date(),
            b.last_date(),
            b.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticFit {
    pub portfolios: Vec<String>,
    /// `k x m`, one row per portfolio: alpha then betas.
    pub coef: DMatrix<f64>,
    /// `T x k`.
    pub residuals: DMatrix<f64>,
    pub rss: Vec<f64>,
}

impl StaticFit {
    /// Coefficients stacked portfolio-major, the layout of the state vector.
    pub fn stacked_coef(&self) -> Vec<f64> {
        let (k, m) = self.coef.shape();
        (0..k)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| self.coef[(i, j)])
            .collect()
    }
}

/// Equation-by-equation least squares via one Householder QR of the shared
/// regressor matrix.
pub fn static_ols(
    spec: &ModelSpec,
    excess: &ReturnPanel,
    factors: &ReturnPanel,
    exec: Execution,
) -> Result<StaticFit> {
    check_same_dates(excess, factors)?;
    let x = design_matrix(spec, factors)?;
    let (t_len, m) = x.shape();
    if t_len <= m {
        return Err(Error::TooShort {
            needed: m + 1,
            got: t_len,
        });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    if (0..m).any(|j| r[(j, j)].abs() <= 1e-12 * diag_max.max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular("regressor matrix is rank deficient".into()));
    }
    let q = qr.q();

    let k = excess.width();
    let fits = exec.try_map(k, |i| -> Result<(Vec<f64>, Vec<f64>)> {
        let y = DVector::from_vec(excess.column_at(i)?);
        let qty = q.tr_mul(&y);
        let beta = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
        let resid = &y - &x * &beta;
        Ok((beta.as_slice().to_vec(), resid.as_slice().to_vec()))
    })?;

    let mut coef = DMatrix::zeros(k, m);
    let mut residuals = DMatrix::zeros(t_len, k);
    let mut rss = Vec::with_capacity(k);
    for (i, (beta, resid)) in fits.into_iter().enumerate() {
        for (j, b) in beta.into_iter().enumerate() {
            coef[(i, j)] = b;
        }
        rss.push(resid.iter().map(|u| u * u).sum());
        residuals.set_column(i, &DVector::from_vec(resid));
    }
    Ok(StaticFit {
        portfolios: excess.names().to_vec(),
        coef,
        residuals,
        rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::MonthStamp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn start() -> MonthStamp {
        MonthStamp::new(2000, 1).unwrap()
    }

    fn random_factors(t: usize, seed: u64) -> ReturnPanel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = ALL_FACTORS
            .iter()
            .map(|n| {
                (
                    n.to_string(),
                    (0..t).map(|_| rng.random_range(-0.05..0.05)).collect(),
                )
            })
            .collect();
        ReturnPanel::from_columns(start(), cols).unwrap()
    }

    #[test]
    fn spec_shapes() {
        let ff3 = ModelSpec::new(FactorModel::FF3);
        assert_eq!((ff3.p(), ff3.m()), (3, 4));
        assert_eq!(
            ff3.coefficient_names(),
            vec!["alpha", "beta_Mkt", "beta_SMB", "beta_HML"]
        );
        let ff6 = ModelSpec::new(FactorModel::FF6);
        assert_eq!(ff6.factor_labels().last(), Some(&"WML"));
        assert_eq!(ff6.m(), 7);
    }

    #[test]
    fn regressor_rows() {
        let ff3 = ModelSpec::new(FactorModel::FF3);
        assert_eq!(
            regressor_row(&ff3, &[0.01, -0.002, 0.003]).unwrap(),
            vec![1.0, 0.01, -0.002, 0.003]
        );
        let ff6 = ModelSpec::new(FactorModel::FF6);
        assert_eq!(
            regressor_row(&ff6, &[0.0; 6]).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        let ff5 = ModelSpec::new(FactorModel::FF5);
        assert_eq!(regressor_row(&ff5, &[0.3; 5]).unwrap().len(), 6);
        assert!(matches!(
            regressor_row(&ff5, &[0.0; 3]),
            Err(Error::ShapeError(_))
        ));
    }

    #[test]
    fn exact_linear_case_is_recovered() {
        let spec = ModelSpec::new(FactorModel::FF3);
        let f = random_factors(120, 1);
        let (mkt, smb, hml) = (
            f.column("Mkt-RF").unwrap(),
            f.column("SMB").unwrap(),
            f.column("HML").unwrap(),
        );
        let y: Vec<f64> = (0..120)
            .map(|t| 0.001 + 1.0 * mkt[t] + 0.5 * smb[t] - 0.3 * hml[t])
            .collect();
        let ex = ReturnPanel::from_columns(start(), vec![("P".into(), y)]).unwrap();
        let fit = static_ols(&spec, &ex, &f, Execution::Serial).unwrap();
        let want = [0.001, 1.0, 0.5, -0.3];
        for (j, w) in want.iter().enumerate() {
            assert!((fit.coef[(0, j)] - w).abs() < 1e-10, "coef {j}");
        }
        assert!(fit.residuals.amax() <= 1e-12);
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let spec = ModelSpec::new(FactorModel::FF3);
        let f = random_factors(10, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..10).map(|_| rng.random_range(-0.1..0.1)).collect();
        let ex = ReturnPanel::from_columns(start(), vec![("P".into(), y.clone())]).unwrap();
        let fit = static_ols(&spec, &ex, &f, Execution::Serial).unwrap();

        // explicit (X'X)^-1 X'y via a dense LU solve
        let x = design_matrix(&spec, &f).unwrap();
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * DVector::from_vec(y);
        let beta = xtx.lu().solve(&xty).unwrap();
        for j in 0..4 {
            assert!((fit.coef[(0, j)] - beta[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn residuals_orthogonal_and_permutation_equivariant() {
        let spec = ModelSpec::new(FactorModel::FF5);
        let f = random_factors(60, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cols: Vec<(String, Vec<f64>)> = (0..3)
            .map(|i| {
                (
                    format!("P{i}"),
                    (0..60).map(|_| rng.random_range(-0.1..0.1)).collect(),
                )
            })
            .collect();
        let ex = ReturnPanel::from_columns(start(), cols.clone()).unwrap();
        let fit = static_ols(&spec, &ex, &f, Execution::Parallel).unwrap();
        let x = design_matrix(&spec, &f).unwrap();
        let xtu = x.transpose() * &fit.residuals;
        assert!(xtu.amax() <= 1e-12);
        for i in 0..3 {
            assert!(fit.residuals.column(i).sum().abs() <= 1e-8 * 60.0 * 0.1);
        }

        let mut rev = cols;
        rev.reverse();
        let ex_rev = ReturnPanel::from_columns(start(), rev).unwrap();
        let fit_rev = static_ols(&spec, &ex_rev, &f, Execution::Serial).unwrap();
        for i in 0..3 {
            assert_eq!(fit.coef.row(i), fit_rev.coef.row(2 - i));
        }
    }

    #[test]
    fn nested_models_never_raise_rss() {
        let f = random_factors(80, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = (0..80).map(|_| rng.random_range(-0.1..0.1)).collect();
        let ex = ReturnPanel::from_columns(start(), vec![("P".into(), y)]).unwrap();
        let rss: Vec<f64> = [FactorModel::FF3, FactorModel::FF5, FactorModel::FF6]
            .iter()
            .map(|&m| {
                static_ols(&ModelSpec::new(m), &ex, &f, Execution::Serial)
                    .unwrap()
                    .rss[0]
            })
            .collect();
        assert!(rss[1] <= rss[0] + 1e-15 && rss[2] <= rss[1] + 1e-15);
    }

    #[test]
    fn collinear_factors_are_singular() {
        let spec = ModelSpec::new(FactorModel::FF3);
        let f = random_factors(30, 8);
        let mkt = f.column("Mkt-RF").unwrap();
        let cols = vec![
            ("Mkt-RF".to_string(), mkt.clone()),
            ("SMB".to_string(), mkt.iter().map(|v| 2.0 * v).collect()),
            ("HML".to_string(), f.column("HML").unwrap()),
        ];
        let bad = ReturnPanel::from_columns(start(), cols).unwrap();
        let ex = ReturnPanel::from_columns(start(), vec![("P".into(), mkt)]).unwrap();
        assert!(matches!(
            static_ols(&spec, &ex, &bad, Execution::Serial),
            Err(Error::Singular(_))
        ));
    }
}
