use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tvfactor::factors::FactorModel;
use tvfactor::ingest::Region;
use tvfactor::sim::{Loadings, SyntheticLibrary};
use tvfactor::timeseries::MonthStamp;
use tvfactor::Error;
use tvfactor_cli::config::RunConfig;
use tvfactor_cli::pipeline::{self, EstimateRecord, Manifest};

const T_LEN: usize = 60;
const VINTAGE: &str = "2024-05-01";

fn japan_cache(dir: &Path, loadings: Loadings) {
    let mut lib = SyntheticLibrary::new(MonthStamp::new(1990, 7).unwrap(), T_LEN, 11);
    lib.loadings = loadings;
    lib.write(dir, Region::Japan, VINTAGE).unwrap();
}

fn tvfactor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvfactor"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn estimate_args<'a>(cache: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "estimate",
        "--model",
        "ff3",
        "--region",
        "japan",
        "--cache-dir",
        cache,
        "--out",
        out,
        "--offline",
        "--n-boot",
        "40",
        "--seed",
        "9",
    ]
}

fn read_records(out: &Path) -> Vec<EstimateRecord> {
    csv::Reader::from_path(out.join(pipeline::ESTIMATES_FILE))
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn cold_cache_offline_fetch_fails_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let out = tvfactor(&[
        "fetch",
        "--region",
        "europe",
        "--cache-dir",
        cache,
        "--offline",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("europe-factors3"), "{err}");

    let mut c = RunConfig::new(FactorModel::FF3, Region::Europe);
    c.cache_dir = dir.path().to_path_buf();
    c.offline = true;
    assert!(matches!(
        pipeline::cmd_fetch(&c, None),
        Err(Error::FetchFailed { .. })
    ));
}

#[test]
fn warm_fetch_lists_every_needed_file() {
    let dir = tempfile::tempdir().unwrap();
    japan_cache(dir.path(), Loadings::Drifting);
    let cache = dir.path().to_str().unwrap();
    let out = tvfactor(&[
        "fetch",
        "--model",
        "ff6",
        "--region",
        "japan",
        "--cache-dir",
        cache,
        "--offline",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let ids: Vec<&str> = text
        .lines()
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(
        ids,
        ["japan-factors5", "japan-momentum", "japan-portfolios25"]
    );
    assert!(text.lines().all(|l| l.contains(VINTAGE)));
}

#[test]
fn bad_configuration_exits_with_code_two() {
    let out = tvfactor(&[
        "estimate",
        "--level",
        "1.5",
        "--offline",
        "--cache-dir",
        "/nonexistent",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = tvfactor(&["estimate", "--model", "ff4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_is_deterministic_and_serial_matches_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    japan_cache(&cache, Loadings::Drifting);
    let cache = cache.to_str().unwrap();
    let outs = ["a", "b", "c"].map(|n| dir.path().join(n));

    let a = tvfactor(&estimate_args(cache, outs[0].to_str().unwrap()));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    tvfactor(&estimate_args(cache, outs[1].to_str().unwrap()));
    let mut serial = estimate_args(cache, outs[2].to_str().unwrap());
    serial.push("--serial");
    tvfactor(&serial);

    for file in [
        pipeline::ESTIMATES_FILE,
        pipeline::BANDS_FILE,
        pipeline::PROFILE_FILE,
        pipeline::MANIFEST_FILE,
    ] {
        let first = fs::read(outs[0].join(file)).unwrap();
        for other in &outs[1..] {
            assert_eq!(first, fs::read(other.join(file)).unwrap(), "{file} differs");
        }
    }
}

#[test]
fn record_count_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    japan_cache(dir.path(), Loadings::Drifting);
    for (model, m) in [
        (FactorModel::FF3, 4),
        (FactorModel::FF5, 6),
        (FactorModel::FF6, 7),
    ] {
        let mut c = RunConfig::new(model, Region::Japan);
        c.cache_dir = dir.path().to_path_buf();
        c.out_dir = dir.path().join(format!("out-{model}"));
        c.offline = true;
        c.n_boot = 20;
        c.lambda = Some(10.0);
        pipeline::cmd_estimate(&c).unwrap();
        let recs = read_records(&c.out_dir);
        // The six-factor window starts four months later.
        let t = if model == FactorModel::FF6 {
            T_LEN - 4
        } else {
            T_LEN
        };
        assert_eq!(recs.len(), 25 * m * t, "{model}");
        assert_eq!(recs[0].portfolio, "ME1BM1");
        assert_eq!(recs[0].coefficient, "alpha");
        assert_eq!(recs[1].date, if t == T_LEN { "1990-08" } else { "1990-12" });
        assert_eq!(recs[t].coefficient, "beta_Mkt");
        assert_eq!(recs.last().unwrap().portfolio, "ME5BM5");
        assert!(recs.iter().all(|r| r.lower <= r.upper));
        assert!(recs
            .iter()
            .all(|r| r.significant == (r.estimate < r.lower || r.estimate > r.upper)));
    }
}

#[test]
fn capm_market_beta_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    japan_cache(dir.path(), Loadings::Capm);
    let mut c = RunConfig::new(FactorModel::FF3, Region::Japan);
    c.cache_dir = dir.path().to_path_buf();
    c.offline = true;
    c.n_boot = 20;
    let est = pipeline::estimate(&c).unwrap();
    let betas: Vec<f64> = est
        .records()
        .into_iter()
        .filter(|r| r.coefficient == "beta_Mkt")
        .map(|r| r.estimate)
        .collect();
    let mean = betas.iter().sum::<f64>() / betas.len() as f64;
    assert!((mean - 1.0).abs() < 0.05, "mean beta_Mkt {mean}");
    assert_eq!(est.profile.len(), 17);
    assert!(est.manifest.lambda_requested.is_none());
}

#[test]
fn plotdata_splits_series() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    japan_cache(&cache, Loadings::Drifting);
    let out = dir.path().join("out");
    let mut args = estimate_args(cache.to_str().unwrap(), out.to_str().unwrap());
    args.extend(["--lambda", "5"]);
    assert!(tvfactor(&args).status.success());

    let mut c = RunConfig::new(FactorModel::FF3, Region::Japan);
    c.out_dir = out.clone();
    let all = pipeline::cmd_plotdata(&c, None, None).unwrap();
    assert_eq!(all.len(), 25 * 4);
    let one = pipeline::cmd_plotdata(&c, Some("ME2BM4"), Some("beta_HML")).unwrap();
    assert_eq!(one.len(), 1);
    assert!(one[0].ends_with("plot/ME2BM4__beta_HML.csv"));
    let text = fs::read_to_string(&one[0]).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("date,estimate,lower,upper,significant")
    );
    assert_eq!(text.lines().count(), T_LEN + 1);

    let cols = pipeline::cmd_plotdata(&c, None, Some("alpha")).unwrap();
    assert_eq!(cols.len(), 25);

    assert!(matches!(
        pipeline::cmd_plotdata(&c, Some("ME9BM9"), None),
        Err(Error::MissingSeries(_))
    ));
    let bad = tvfactor(&[
        "plotdata",
        "--out",
        out.to_str().unwrap(),
        "--coefficient",
        "beta_XYZ",
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn replay_reproduces_outputs_with_pinned_vintages() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    japan_cache(&cache, Loadings::Drifting);
    let first = dir.path().join("first");
    assert!(tvfactor(&estimate_args(
        cache.to_str().unwrap(),
        first.to_str().unwrap()
    ))
    .status
    .success());

    // A newer vintage with different numbers must not leak into the replay.
    let mut newer = SyntheticLibrary::new(MonthStamp::new(1990, 7).unwrap(), T_LEN, 99);
    newer.loadings = Loadings::Capm;
    newer.write(&cache, Region::Japan, "2025-01-01").unwrap();

    let manifest_path = first.join(pipeline::MANIFEST_FILE);
    let manifest = Manifest::read(&manifest_path).unwrap();
    assert_eq!(manifest.vintages.len(), 2);
    assert!(manifest.vintages.values().all(|v| v == VINTAGE));

    let second = dir.path().join("second");
    let out = tvfactor(&[
        "estimate",
        "--replay",
        manifest_path.to_str().unwrap(),
        "--cache-dir",
        cache.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in [pipeline::ESTIMATES_FILE, pipeline::MANIFEST_FILE] {
        assert_eq!(
            fs::read(first.join(file)).unwrap(),
            fs::read(second.join(file)).unwrap()
        );
    }

    // Without pinning, the newest vintage is used.
    let third = dir.path().join("third");
    tvfactor(&estimate_args(
        cache.to_str().unwrap(),
        third.to_str().unwrap(),
    ));
    assert_ne!(
        fs::read(first.join(pipeline::ESTIMATES_FILE)).unwrap(),
        fs::read(third.join(pipeline::ESTIMATES_FILE)).unwrap()
    );
}

#[test]
fn describe_reports_each_factor() {
    let dir = tempfile::tempdir().unwrap();
    japan_cache(dir.path(), Loadings::Drifting);
    let out = dir.path().join("out");
    let o = tvfactor(&[
        "describe",
        "--model",
        "ff6",
        "--region",
        "japan",
        "--offline",
        "--cache-dir",
        dir.path().to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    let rows: Vec<pipeline::DescribeRow> =
        csv::Reader::from_path(out.join(pipeline::DESCRIBE_FILE))
            .unwrap()
            .deserialize()
            .map(|r| r.unwrap())
            .collect();
    let names: Vec<&str> = rows.iter().map(|r| r.factor.as_str()).collect();
    assert_eq!(names, ["Mkt-RF", "SMB", "HML", "RMW", "CMA", "WML"]);
    assert!(rows.iter().all(|r| r.n == T_LEN - 4));
    // White-noise factors are stationary.
    assert!(rows.iter().all(|r| r.reject_1pct), "{rows:?}");
}
