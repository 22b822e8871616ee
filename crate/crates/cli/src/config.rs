use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tvfactor::factors::{FactorModel, ModelSpec};
use tvfactor::ingest::{DatasetId, DatasetKind, Region};
use tvfactor::timeseries::MonthStamp;
use tvfactor::{Error, Execution, Result};

/// Prior mean of the coefficient paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Gamma0Policy {
    /// Full-sample static OLS coefficients.
    #[default]
    StaticOls,
    Zero,
}

/// Which residuals the bootstrap resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualSource {
    #[default]
    Static,
    TimeVarying,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: FactorModel,
    pub region: Region,
    pub start: Option<MonthStamp>,
    pub end: Option<MonthStamp>,
    /// Fixed smoothness ratio; selected by maximum likelihood when absent.
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    pub offline: bool,
    pub json: bool,
    pub gamma0: Gamma0Policy,
    pub residuals: ResidualSource,
    pub joint_resampling: bool,
    /// Weight portfolios by inverse static residual variance.
    pub rescale: bool,
    pub max_lag: Option<usize>,
    /// Pin dataset vintages instead of using the newest cached copy.
    pub vintages: Vec<(DatasetId, String)>,
    pub exec: Execution,
}

impl RunConfig {
    pub fn new(model: FactorModel, region: Region) -> Self {
        Self {
            model,
            region,
            start: None,
            end: None,
            lambda: None,
            lambda_grid: tvfactor::tv::default_lambda_grid(),
            n_boot: 500,
            level: 0.95,
            seed: 0,
            cache_dir: PathBuf::from("data/cache"),
            out_dir: PathBuf::from("out"),
            offline: false,
            json: false,
            gamma0: Gamma0Policy::default(),
            residuals: ResidualSource::default(),
            joint_resampling: true,
            rescale: false,
            max_lag: None,
            vintages: Vec::new(),
            exec: Execution::default(),
        }
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec::new(self.model)
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                return Err(Error::ConfigError(format!("start {s} is after end {e}")));
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::ConfigError(format!(
                    "lambda must be positive, got {l}"
                )));
            }
        }
        if self.n_boot < 2 {
            return Err(Error::ConfigError("--n-boot must be at least 2".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::ConfigError("--level must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Files needed for this region and model, factors first.
    pub fn datasets(&self) -> Vec<DatasetId> {
        datasets_for(self.model, self.region)
    }

    pub fn pinned_vintage(&self, id: DatasetId) -> Option<&str> {
        self.vintages
            .iter()
            .find(|(d, _)| *d == id)
            .map(|(_, v)| v.as_str())
    }

    /// First month the model can be estimated for this region.
    pub fn window_start(&self) -> MonthStamp {
        availability_start(self.model, self.region)
    }
}

pub fn datasets_for(model: FactorModel, region: Region) -> Vec<DatasetId> {
    let kinds: &[DatasetKind] = match model {
        FactorModel::FF3 => &[DatasetKind::Factors3, DatasetKind::Portfolios25],
        FactorModel::FF5 => &[DatasetKind::Factors5, DatasetKind::Portfolios25],
        FactorModel::FF6 => &[
            DatasetKind::Factors5,
            DatasetKind::Momentum,
            DatasetKind::Portfolios25,
        ],
    };
    kinds.iter().map(|&k| DatasetId::new(region, k)).collect()
}

/// Start of the published sample for each region and model.
pub fn availability_start(model: FactorModel, region: Region) -> MonthStamp {
    let (y, m) = match (region, model) {
        (Region::Us, FactorModel::FF3) => (1926, 7),
        (Region::Us, _) => (1963, 7),
        (_, FactorModel::FF6) => (1990, 11),
        (_, _) => (1990, 7),
    };
    MonthStamp::new(y, m).expect("valid month")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_counts() {
        assert_eq!(datasets_for(FactorModel::FF3, Region::Us).len(), 2);
        assert_eq!(datasets_for(FactorModel::FF5, Region::Japan).len(), 2);
        assert_eq!(datasets_for(FactorModel::FF6, Region::Europe).len(), 3);
    }

    #[test]
    fn windows_reproduce_sample_sizes() {
        let end = MonthStamp::new(2022, 3).unwrap();
        let n = |m, r| end.months_since(availability_start(m, r)) + 1;
        assert_eq!(n(FactorModel::FF3, Region::Us), 1149);
        assert_eq!(n(FactorModel::FF5, Region::Us), 705);
        assert_eq!(n(FactorModel::FF6, Region::Us), 705);
        assert_eq!(n(FactorModel::FF3, Region::Japan), 381);
        assert_eq!(n(FactorModel::FF5, Region::Europe), 381);
        assert_eq!(n(FactorModel::FF6, Region::Japan), 377);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::new(FactorModel::FF3, Region::Us);
        assert!(c.validate().is_ok());
        c.start = Some(MonthStamp::new(2000, 1).unwrap());
        c.end = Some(MonthStamp::new(1999, 1).unwrap());
        assert!(c.validate().unwrap_err().is_config());
        let mut c = RunConfig::new(FactorModel::FF3, Region::Us);
        c.n_boot = 1;
        assert!(c.validate().is_err());
        c.n_boot = 2;
        c.lambda = Some(-1.0);
        assert!(c.validate().is_err());
    }
}
