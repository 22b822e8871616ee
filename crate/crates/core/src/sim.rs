//! Simulated factor data with known coefficient paths.
//!
//! Used by the test suites and benchmarks, and handy for checking an
//! installation without network access: [`SyntheticLibrary::write`] lays
//! out a cache directory that the loaders accept exactly like downloaded
//! library files.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factors::ModelSpec;
use crate::ingest::{
    from_panel, portfolio_label, serialize_sections, store, DatasetId, DatasetKind, Region,
};
use crate::rng::substream;
use crate::timeseries::{MonthStamp, ReturnPanel};
use crate::tv::{StateLayout, TvProblem};

/// `(label, monthly mean, monthly sd)` in decimal units, roughly matching
/// long-run US magnitudes.
pub const FACTOR_MOMENTS: [(&str, f64, f64); 6] = [
    ("Mkt-RF", 0.006, 0.045),
    ("SMB", 0.002, 0.030),
    ("HML", 0.003, 0.030),
    ("RMW", 0.003, 0.020),
    ("CMA", 0.003, 0.020),
    ("WML", 0.006, 0.040),
];

/// Independent Gaussian factor returns for `labels` (any of
/// [`FACTOR_MOMENTS`], plus `RF`).
pub fn gaussian_factors<R: Rng>(
    labels: &[&str],
    start: MonthStamp,
    t_len: usize,
    rng: &mut R,
) -> Result<ReturnPanel> {
    let mut columns = Vec::with_capacity(labels.len());
    for &label in labels {
        let (mean, sd) = if label == "RF" {
            (0.003, 0.0005)
        } else {
            FACTOR_MOMENTS
                .iter()
                .find(|(l, _, _)| *l == label)
                .map(|&(_, m, s)| (m, s))
                .ok_or_else(|| Error::MissingSeries(label.to_string()))?
        };
        let col = (0..t_len)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                let v = mean + sd * z;
                if label == "RF" {
                    v.abs()
                } else {
                    v
                }
            })
            .collect();
        columns.push((label.to_string(), col));
    }
    ReturnPanel::from_columns(start, columns)
}

/// `y_it = x_t . gamma_t[i] + sd_i * e_it` with standard normal `e`.
///
/// `gamma` is `T x (k*m)`, portfolio-major, and `factors` must carry the
/// model's factor columns.
pub fn simulate_excess<R: Rng>(
    spec: &ModelSpec,
    factors: &ReturnPanel,
    gamma: &DMatrix<f64>,
    noise_sd: &[f64],
    names: Vec<String>,
    rng: &mut R,
) -> Result<ReturnPanel> {
    let m = spec.m();
    let k = names.len();
    let t_len = factors.len();
    if gamma.nrows() != t_len || gamma.ncols() != k * m || noise_sd.len() != k {
        return Err(Error::ShapeError(format!(
            "gamma {}x{} and {} noise scales for T={t_len}, k={k}, m={m}",
            gamma.nrows(),
            gamma.ncols(),
            noise_sd.len()
        )));
    }
    let x = crate::factors::design_matrix(spec, factors)?;
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(t_len); k];
    for t in 0..t_len {
        for (i, col) in cols.iter_mut().enumerate() {
            let signal: f64 = (0..m).map(|j| x[(t, j)] * gamma[(t, i * m + j)]).sum();
            let e: f64 = rng.sample(StandardNormal);
            col.push(signal + noise_sd[i] * e);
        }
    }
    let start = factors
        .first_date()
        .ok_or(Error::TooShort { needed: 1, got: 0 })?;
    ReturnPanel::from_columns(start, names.into_iter().zip(cols).collect())
}

/// `mean + amplitude * sin(2 pi cycles t / T)` for `t = 0..T`.
pub fn sinusoid(t_len: usize, mean: f64, amplitude: f64, cycles: f64) -> Vec<f64> {
    (0..t_len)
        .map(|t| mean + amplitude * (2.0 * PI * cycles * t as f64 / t_len as f64).sin())
        .collect()
}

/// A random problem with random-walk coefficients, intercept plus
/// `m - 1` Gaussian regressors per portfolio, and noisy observations.
///
/// With `shared` every portfolio sees the same regressors (the factor-model
/// case); otherwise each portfolio draws its own. Observation weights are
/// drawn from `[0.5, 2]` when `weighted`.
pub fn random_problem<R: Rng>(
    rng: &mut R,
    layout: StateLayout,
    lambda: f64,
    shared: bool,
    weighted: bool,
) -> Result<TvProblem> {
    let StateLayout { k, m, t_len } = layout;
    let d = k * m;
    let mut regressors = Vec::with_capacity(t_len * k * m);
    for _ in 0..t_len {
        let common: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..k {
            for (j, c) in common.iter().enumerate() {
                regressors.push(match (j, shared) {
                    (0, _) => 1.0,
                    (_, true) => *c,
                    (_, false) => rng.sample(StandardNormal),
                });
            }
        }
    }
    let gamma0: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut state = gamma0.clone();
    let mut y = DMatrix::zeros(t_len, k);
    for t in 0..t_len {
        for s in state.iter_mut() {
            *s += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        for i in 0..k {
            let row = &regressors[(t * k + i) * m..(t * k + i + 1) * m];
            let fit: f64 = row
                .iter()
                .zip(&state[i * m..(i + 1) * m])
                .map(|(x, g)| x * g)
                .sum();
            y[(t, i)] = fit + 0.5 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let problem = TvProblem::new(layout, regressors, y, gamma0, lambda)?;
    if weighted {
        let w = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
        problem.with_obs_weights(w)
    } else {
        Ok(problem)
    }
}

/// How simulated portfolios load on the factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loadings {
    /// Unit market beta, nothing else.
    Capm,
    /// Market beta swings around one over the sample; size and value
    /// loadings are fixed and increase with the portfolio's quintiles.
    Drifting,
}

/// A complete fake copy of one region's library files.
#[derive(Debug, Clone)]
pub struct SyntheticLibrary {
    pub start: MonthStamp,
    pub t_len: usize,
    pub seed: u64,
    pub loadings: Loadings,
    /// Idiosyncratic monthly volatility of every portfolio.
    pub noise_sd: f64,
}

const ALL_FACTORS: [&str; 7] = ["Mkt-RF", "SMB", "HML", "RMW", "CMA", "WML", "RF"];

impl SyntheticLibrary {
    pub fn new(start: MonthStamp, t_len: usize, seed: u64) -> Self {
        Self {
            start,
            t_len,
            seed,
            loadings: Loadings::Drifting,
            noise_sd: 0.02,
        }
    }

    /// True loading of portfolio `(size, bm)` (1-based) on each of the six
    /// factors at month `t`.
    pub fn loading(&self, size: usize, bm: usize, t: usize) -> [f64; 6] {
        match self.loadings {
            Loadings::Capm => [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            Loadings::Drifting => {
                let phase = (size * 5 + bm) as f64 / 25.0;
                let angle = 2.0 * PI * (t as f64 / self.t_len as f64 + phase);
                [
                    1.0 + 0.3 * angle.sin(),
                    0.8 - 0.3 * size as f64,
                    -0.6 + 0.3 * bm as f64,
                    0.0,
                    0.0,
                    0.0,
                ]
            }
        }
    }

    /// `(factors with RF, 25 portfolio raw returns)`, both in decimals.
    pub fn panels(&self) -> Result<(ReturnPanel, ReturnPanel)> {
        let mut rng = substream(self.seed, 0);
        let factors = gaussian_factors(&ALL_FACTORS, self.start, self.t_len, &mut rng)?;
        let f: Vec<Vec<f64>> = ALL_FACTORS
            .iter()
            .map(|l| factors.column(l))
            .collect::<Result<_>>()?;
        let mut cols = Vec::with_capacity(25);
        for size in 1..=5 {
            for bm in 1..=5 {
                let col = (0..self.t_len)
                    .map(|t| {
                        let b = self.loading(size, bm, t);
                        let e: f64 = rng.sample(StandardNormal);
                        f[6][t] + (0..6).map(|j| b[j] * f[j][t]).sum::<f64>() + self.noise_sd * e
                    })
                    .collect();
                cols.push((portfolio_label(size, bm), col));
            }
        }
        Ok((factors, ReturnPanel::from_columns(self.start, cols)?))
    }

    /// Writes every dataset of `region` into `cache_dir` as vintage
    /// `vintage`, in the library's CSV layout.
    pub fn write(&self, cache_dir: &Path, region: Region, vintage: &str) -> Result<()> {
        let (factors, ports) = self.panels()?;
        let preamble = "Synthetic returns with known loadings.\n";
        for kind in DatasetKind::ALL {
            let id = DatasetId::new(region, kind);
            let sections = match kind {
                DatasetKind::Factors3 => {
                    vec![from_panel(
                        &factors.select(&["Mkt-RF", "SMB", "HML", "RF"])?,
                        preamble,
                        true,
                    )]
                }
                DatasetKind::Factors5 => vec![from_panel(
                    &factors.select(&["Mkt-RF", "SMB", "HML", "RMW", "CMA", "RF"])?,
                    preamble,
                    true,
                )],
                DatasetKind::Momentum => {
                    let mom = factors.select(&["WML"])?.rename(|_| "Mom".to_string());
                    vec![from_panel(&mom, preamble, true)]
                }
                DatasetKind::Portfolios25 => {
                    // A decoy block first, so the value-weighted one has to be picked by title.
                    let ew = ports.clone().scaled(0.5);
                    vec![
                        from_panel(&ew, "Average Equal Weighted Returns -- Monthly", true),
                        from_panel(&ports, "Average Value Weighted Returns -- Monthly", true),
                    ]
                }
            };
            let text = serialize_sections(&sections);
            store(
                id,
                cache_dir,
                vintage,
                &format!("{}.CSV", id.remote_stem()),
                text.as_bytes(),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::load_vintage;

    #[test]
    fn written_library_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let lib = SyntheticLibrary::new(MonthStamp::new(1990, 7).unwrap(), 24, 3);
        lib.write(dir.path(), Region::Japan, "2024-01-01").unwrap();
        let (factors, ports) = lib.panels().unwrap();

        let p = load_vintage(
            DatasetId::new(Region::Japan, DatasetKind::Portfolios25),
            dir.path(),
            "2024-01-01",
        )
        .unwrap();
        assert_eq!(p.panel.names(), ports.names());
        for t in 0..24 {
            for j in 0..25 {
                assert!((p.panel.get(t, j).unwrap() - ports.get(t, j).unwrap()).abs() < 1e-12);
            }
        }
        let m = load_vintage(
            DatasetId::new(Region::Japan, DatasetKind::Momentum),
            dir.path(),
            "2024-01-01",
        )
        .unwrap();
        let wml = factors.column("WML").unwrap();
        let got = m.panel.column("WML").unwrap();
        assert!(wml.iter().zip(&got).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn sinusoid_shape() {
        let s = sinusoid(8, 1.0, 0.5, 1.0);
        assert!((s[0] - 1.0).abs() < 1e-15);
        assert!((s[2] - 1.5).abs() < 1e-12);
        assert!((s[6] - 0.5).abs() < 1e-12);
    }
}
