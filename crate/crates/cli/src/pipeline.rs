//! The four commands: fetch, describe, estimate, plotdata.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tvfactor::adf::{adf_test, LagSelection};
use tvfactor::bootstrap::{bootstrap_problem, BandSet, BootstrapConfig};
use tvfactor::factors::{static_ols, FactorModel, ModelSpec, StaticFit};
use tvfactor::ingest::{fetch, load_vintage, DatasetId, DatasetKind, Fetched, Region};
use tvfactor::timeseries::{align, describe, excess_returns, MonthStamp, ReturnPanel};
use tvfactor::tv::{build_problem, select_lambda, solve_tv, TvSolution};
use tvfactor::{Error, Result};

use crate::config::{Gamma0Policy, ResidualSource, RunConfig};
use crate::output::{write_atomic, write_csv};

const RF: &str = "RF";

pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const BANDS_FILE: &str = "bands.csv";
pub const PROFILE_FILE: &str = "lambda_profile.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DESCRIBE_FILE: &str = "describe.csv";

fn load(config: &RunConfig, id: DatasetId) -> Result<Fetched> {
    match config.pinned_vintage(id) {
        Some(v) => load_vintage(id, &config.cache_dir, v),
        None => fetch(id, &config.cache_dir, config.offline),
    }
}

/// One line per dataset: `<id> <vintage> <path>`.
pub fn cmd_fetch(config: &RunConfig, only: Option<DatasetId>) -> Result<String> {
    let ids = match only {
        Some(id) => vec![id],
        None => config.datasets(),
    };
    let mut report = String::new();
    for id in ids {
        let f = load(config, id)?;
        let _ = writeln!(
            report,
            "{}\t{}\t{}\t{}..{}",
            id,
            f.vintage,
            f.path.display(),
            f.panel.first_date().unwrap(),
            f.panel.last_date().unwrap()
        );
    }
    Ok(report)
}

/// Aligned model inputs.
#[derive(Debug, Clone)]
pub struct ModelData {
    pub excess: ReturnPanel,
    pub factors: ReturnPanel,
    pub vintages: BTreeMap<String, String>,
}

fn clamp_range(config: &RunConfig) -> (MonthStamp, Option<MonthStamp>) {
    let start = config
        .start
        .map_or(config.window_start(), |s| s.max(config.window_start()));
    (start, config.end)
}

fn sliced(panel: &ReturnPanel, config: &RunConfig) -> Result<ReturnPanel> {
    let (start, end) = clamp_range(config);
    panel.slice(Some(start), end)
}

/// Factor columns of the model plus `RF`, over the availability window.
pub fn load_factors(config: &RunConfig) -> Result<(ReturnPanel, BTreeMap<String, String>)> {
    let mut panels = Vec::new();
    let mut vintages = BTreeMap::new();
    for id in config.datasets().into_iter().filter(|d| d.kind.is_factor()) {
        let f = load(config, id)?;
        vintages.insert(id.to_string(), f.vintage);
        panels.push(sliced(&f.panel, config)?);
    }
    let mut labels: Vec<&str> = config.spec().factor_labels().to_vec();
    labels.push(RF);
    Ok((align(&panels)?.select(&labels)?, vintages))
}

pub fn load_model_data(config: &RunConfig) -> Result<ModelData> {
    let (factors, mut vintages) = load_factors(config)?;
    let pid = DatasetId::new(config.region, DatasetKind::Portfolios25);
    let ports = load(config, pid)?;
    vintages.insert(pid.to_string(), ports.vintage.clone());
    let all = align(&[sliced(&ports.panel, config)?, factors])?;

    let mut with_rf: Vec<&str> = ports.panel.names().iter().map(String::as_str).collect();
    with_rf.push(RF);
    let excess = excess_returns(&all.select(&with_rf)?, RF)?;
    let factors = all.select(config.spec().factor_labels())?;
    Ok(ModelData {
        excess,
        factors,
        vintages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeRow {
    pub model: String,
    pub region: String,
    pub factor: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub adf: f64,
    pub lags: usize,
    pub n: usize,
    pub reject_1pct: bool,
}

pub fn describe_rows(config: &RunConfig) -> Result<Vec<DescribeRow>> {
    let (factors, _) = load_factors(config)?;
    config
        .spec()
        .factor_labels()
        .iter()
        .map(|label| {
            let x = factors.column(label)?;
            let stats = describe(&x)?;
            let sel = config.max_lag.map_or_else(
                || LagSelection::schwert(x.len()),
                |max_lag| LagSelection { max_lag },
            );
            let adf = adf_test(&x, sel)?;
            Ok(DescribeRow {
                model: config.model.to_string(),
                region: config.region.to_string(),
                factor: label.to_string(),
                mean: stats.mean,
                sd: stats.sd,
                min: stats.min,
                max: stats.max,
                adf: adf.statistic,
                lags: adf.lag,
                n: stats.n,
                reject_1pct: adf.reject_1pct,
            })
        })
        .collect()
}

/// Writes `describe.csv` and returns a fixed-width text table.
pub fn cmd_describe(config: &RunConfig) -> Result<String> {
    config.validate()?;
    let rows = describe_rows(config)?;
    fs::create_dir_all(&config.out_dir).map_err(|e| io_err(&config.out_dir, e))?;
    write_csv(&config.out_dir.join(DESCRIBE_FILE), &rows)?;
    let mut text = format!(
        "{:<8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>4} {:>6}\n",
        "factor", "mean", "sd", "min", "max", "adf", "lags", "n"
    );
    for r in &rows {
        let _ = writeln!(
            text,
            "{:<8} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>10.4} {:>4} {:>6}",
            r.factor, r.mean, r.sd, r.min, r.max, r.adf, r.lags, r.n
        );
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub model: String,
    pub region: String,
    pub portfolio: String,
    pub date: String,
    pub coefficient: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BandRecord {
    portfolio: String,
    date: String,
    coefficient: String,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfileRecord {
    lambda: f64,
    loglik: f64,
}

/// Everything needed to re-run an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub model: String,
    pub region: String,
    pub start: String,
    pub end: String,
    pub n_obs: usize,
    pub portfolios: Vec<String>,
    pub coefficients: Vec<String>,
    pub lambda: f64,
    /// `None` when lambda was selected by maximum likelihood.
    pub lambda_requested: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub gamma0: Gamma0Policy,
    pub residuals: ResidualSource,
    pub joint_resampling: bool,
    pub rescale: bool,
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
    pub vintages: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::ConfigError(format!("bad manifest {}: {e}", path.display())))
    }

    /// Run configuration reproducing this manifest.
    pub fn to_config(&self, cache_dir: PathBuf, out_dir: PathBuf) -> Result<RunConfig> {
        let model: FactorModel = self.model.parse()?;
        let region: Region = self.region.parse()?;
        let mut c = RunConfig::new(model, region);
        c.start = Some(self.start.parse()?);
        c.end = Some(self.end.parse()?);
        c.lambda = self.lambda_requested;
        c.lambda_grid = self.lambda_grid.clone();
        c.gamma0 = self.gamma0;
        c.residuals = self.residuals;
        c.joint_resampling = self.joint_resampling;
        c.rescale = self.rescale;
        c.n_boot = self.n_boot;
        c.level = self.level;
        c.seed = self.seed;
        c.cache_dir = cache_dir;
        c.out_dir = out_dir;
        c.offline = true;
        c.vintages = self
            .vintages
            .iter()
            .map(|(id, v)| Ok((id.parse()?, v.clone())))
            .collect::<Result<_>>()?;
        Ok(c)
    }
}

/// In-memory result of an estimation run.
#[derive(Debug, Clone)]
pub struct Estimation {
    pub spec: ModelSpec,
    pub data: ModelData,
    pub fit: StaticFit,
    pub solution: TvSolution,
    pub bands: BandSet,
    pub profile: Vec<(f64, f64)>,
    pub manifest: Manifest,
}

impl Estimation {
    pub fn records(&self) -> Vec<EstimateRecord> {
        let names = self.spec.coefficient_names();
        let m = self.spec.m();
        let dates = self.data.excess.dates();
        let mut out = Vec::with_capacity(self.solution.gamma.len());
        for (i, port) in self.data.excess.names().iter().enumerate() {
            for (j, coef) in names.iter().enumerate() {
                let s = i * m + j;
                for (t, date) in dates.iter().enumerate() {
                    out.push(EstimateRecord {
                        model: self.manifest.model.clone(),
                        region: self.manifest.region.clone(),
                        portfolio: port.clone(),
                        date: date.to_string(),
                        coefficient: coef.clone(),
                        estimate: self.solution.gamma[(t, s)],
                        lower: self.bands.lower[(t, s)],
                        upper: self.bands.upper[(t, s)],
                        significant: self.bands.significant[(t, s)],
                    });
                }
            }
        }
        out
    }
}

/// Static fit, smoothing, and bootstrap bands, without touching the disk.
pub fn estimate(config: &RunConfig) -> Result<Estimation> {
    config.validate()?;
    let spec = config.spec();
    let data = load_model_data(config)?;
    let fit = static_ols(&spec, &data.excess, &data.factors, config.exec)?;
    let k = data.excess.width();
    let gamma0 = match config.gamma0 {
        Gamma0Policy::StaticOls => fit.stacked_coef(),
        Gamma0Policy::Zero => vec![0.0; k * spec.m()],
    };

    let (lambda, profile) = match config.lambda {
        Some(l) => (l, Vec::new()),
        None => {
            let sel = select_lambda(
                &spec,
                &data.excess,
                &data.factors,
                &gamma0,
                &config.lambda_grid,
                config.exec,
            )?;
            (sel.lambda, sel.profile)
        }
    };

    let mut problem = build_problem(&spec, &data.excess, &data.factors, gamma0, lambda)?;
    if config.rescale {
        let dof = (data.excess.len() - spec.m()) as f64;
        let var: Vec<f64> = fit.rss.iter().map(|r| r / dof).collect();
        let mean = var.iter().sum::<f64>() / var.len() as f64;
        problem = problem.with_obs_weights(var.iter().map(|v| mean / v).collect())?;
    }
    let solution = solve_tv(&problem)?;

    let residuals = match config.residuals {
        ResidualSource::Static => fit.residuals.clone(),
        ResidualSource::TimeVarying => solution.obs_resid.clone(),
    };
    let boot = BootstrapConfig {
        n_reps: config.n_boot,
        level: config.level,
        seed: config.seed,
        lambda,
        joint_resampling: config.joint_resampling,
    };
    let bands = bootstrap_problem(&problem, &residuals, &boot, config.exec)?.flagged(&solution)?;

    let manifest = Manifest {
        tool: "tvfactor".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        model: config.model.to_string(),
        region: config.region.to_string(),
        start: data.excess.first_date().unwrap().to_string(),
        end: data.excess.last_date().unwrap().to_string(),
        n_obs: data.excess.len(),
        portfolios: data.excess.names().to_vec(),
        coefficients: spec.coefficient_names(),
        lambda,
        lambda_requested: config.lambda,
        lambda_grid: config.lambda_grid.clone(),
        gamma0: config.gamma0,
        residuals: config.residuals,
        joint_resampling: config.joint_resampling,
        rescale: config.rescale,
        n_boot: config.n_boot,
        level: config.level,
        seed: config.seed,
        vintages: data.vintages.clone(),
    };
    Ok(Estimation {
        spec,
        data,
        fit,
        solution,
        bands,
        profile,
        manifest,
    })
}

/// Runs [`estimate`] and writes estimates, bands, likelihood profile and
/// manifest under `out_dir`. Returns the files written.
pub fn cmd_estimate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let est = estimate(config)?;
    let out = &config.out_dir;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let records = est.records();
    let mut written = Vec::new();

    let path = out.join(ESTIMATES_FILE);
    write_csv(&path, &records)?;
    written.push(path);

    let bands: Vec<BandRecord> = records
        .iter()
        .map(|r| BandRecord {
            portfolio: r.portfolio.clone(),
            date: r.date.clone(),
            coefficient: r.coefficient.clone(),
            lower: r.lower,
            upper: r.upper,
        })
        .collect();
    let path = out.join(BANDS_FILE);
    write_csv(&path, &bands)?;
    written.push(path);

    let profile: Vec<ProfileRecord> = est
        .profile
        .iter()
        .map(|&(lambda, loglik)| ProfileRecord { lambda, loglik })
        .collect();
    let path = out.join(PROFILE_FILE);
    if profile.is_empty() {
        write_atomic(&path, b"lambda,loglik\n")?;
    } else {
        write_csv(&path, &profile)?;
    }
    written.push(path);

    let path = out.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&est.manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(&path, json.as_bytes())?;
    written.push(path);

    if config.json {
        let path = out.join("estimates.json");
        let body = serde_json::to_string(&records).expect("records serialize");
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub date: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant: bool,
}

/// Splits `estimates.csv` into one file per (portfolio, coefficient) under
/// `<out>/plot/`. `None` selects every portfolio or coefficient.
pub fn cmd_plotdata(
    config: &RunConfig,
    portfolio: Option<&str>,
    coefficient: Option<&str>,
) -> Result<Vec<PathBuf>> {
    let src = config.out_dir.join(ESTIMATES_FILE);
    let mut reader = csv::Reader::from_path(&src).map_err(|e| csv_err(&src, e))?;
    let records: Vec<EstimateRecord> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_err(&src, e))?;

    let mut series: BTreeMap<(String, String), Vec<PlotRow>> = BTreeMap::new();
    let mut ports = Vec::new();
    let mut coefs = Vec::new();
    for r in records {
        if !ports.contains(&r.portfolio) {
            ports.push(r.portfolio.clone());
        }
        if !coefs.contains(&r.coefficient) {
            coefs.push(r.coefficient.clone());
        }
        if portfolio.is_some_and(|p| p != r.portfolio)
            || coefficient.is_some_and(|c| c != r.coefficient)
        {
            continue;
        }
        series
            .entry((r.portfolio, r.coefficient))
            .or_default()
            .push(PlotRow {
                date: r.date,
                estimate: r.estimate,
                lower: r.lower,
                upper: r.upper,
                significant: r.significant,
            });
    }
    if let Some(p) = portfolio {
        if !ports.iter().any(|x| x == p) {
            return Err(Error::MissingSeries(p.to_string()));
        }
    }
    if let Some(c) = coefficient {
        if !coefs.iter().any(|x| x == c) {
            return Err(Error::MissingSeries(c.to_string()));
        }
    }

    let dir = config.out_dir.join("plot");
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut written = Vec::new();
    for ((p, c), rows) in series {
        let path = dir.join(format!("{p}__{c}.csv"));
        write_csv(&path, &rows)?;
        written.push(path);
    }
    Ok(written)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        detail: format!("{}: {e}", path.display()),
    }
}
