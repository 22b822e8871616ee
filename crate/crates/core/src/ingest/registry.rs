use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::timeseries::ReturnPanel;

use super::parse::{to_panel, RawSection};

pub const BASE_URL: &str = "https://mba.tuck.dartmouth.edu/pages/faculty/ken.french/ftp/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Us,
    Japan,
    Europe,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Us, Region::Japan, Region::Europe];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Us => "us",
            Region::Japan => "japan",
            Region::Europe => "europe",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "us" => Ok(Region::Us),
            "japan" => Ok(Region::Japan),
            "europe" => Ok(Region::Europe),
            _ => Err(Error::ConfigError(format!("unknown region `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatasetKind {
    Factors3,
    Factors5,
    Momentum,
    Portfolios25,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::Factors3,
        DatasetKind::Factors5,
        DatasetKind::Momentum,
        DatasetKind::Portfolios25,
    ];

    fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Factors3 => "factors3",
            DatasetKind::Factors5 => "factors5",
            DatasetKind::Momentum => "momentum",
            DatasetKind::Portfolios25 => "portfolios25",
        }
    }

    pub fn is_factor(self) -> bool {
        !matches!(self, DatasetKind::Portfolios25)
    }
}

/// One file of the data library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DatasetId {
    pub region: Region,
    pub kind: DatasetKind,
}

impl DatasetId {
    pub fn new(region: Region, kind: DatasetKind) -> Self {
        Self { region, kind }
    }

    pub fn all() -> impl Iterator<Item = DatasetId> {
        Region::ALL.into_iter().flat_map(|r| {
            DatasetKind::ALL
                .into_iter()
                .map(move |k| DatasetId::new(r, k))
        })
    }

    /// Library file stem, without the `_CSV.zip` suffix.
    pub fn remote_stem(self) -> String {
        use DatasetKind::*;
        match (self.region, self.kind) {
            (Region::Us, Factors3) => "F-F_Research_Data_Factors".into(),
            (Region::Us, Factors5) => "F-F_Research_Data_5_Factors_2x3".into(),
            (Region::Us, Momentum) => "F-F_Momentum_Factor".into(),
            (Region::Us, Portfolios25) => "25_Portfolios_5x5".into(),
            (r, kind) => {
                let prefix = match r {
                    Region::Japan => "Japan",
                    _ => "Europe",
                };
                let stem = match kind {
                    Factors3 => "3_Factors",
                    Factors5 => "5_Factors",
                    Momentum => "MOM_Factor",
                    Portfolios25 => "25_Portfolios_ME_BE-ME",
                };
                format!("{prefix}_{stem}")
            }
        }
    }

    pub fn remote_file(self) -> String {
        format!("{}_CSV.zip", self.remote_stem())
    }

    pub fn url(self) -> String {
        format!("{BASE_URL}{}", self.remote_file())
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.region, self.kind.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    /// `<region>-<kind>`, e.g. `us-factors3`, `japan-portfolios25`.
    fn from_str(s: &str) -> Result<Self> {
        let (r, k) = s.split_once('-').ok_or_else(|| {
            Error::ConfigError(format!("dataset id `{s}` is not <region>-<kind>"))
        })?;
        let kind = DatasetKind::ALL
            .into_iter()
            .find(|kind| kind.as_str() == k.to_ascii_lowercase())
            .ok_or_else(|| Error::ConfigError(format!("unknown dataset kind `{k}`")))?;
        Ok(DatasetId::new(r.parse()?, kind))
    }
}

/// Canonical label of portfolio `(size quintile, book-to-market quintile)`, 1-based.
pub fn portfolio_label(size: usize, bm: usize) -> String {
    format!("ME{size}BM{bm}")
}

/// Picks the monthly section a dataset feeds into estimation.
///
/// Portfolio files carry several monthly blocks (value- and equal-weighted
/// returns, firm counts, sizes); the value-weighted returns are used.
pub fn select_monthly(kind: DatasetKind, sections: &[RawSection]) -> Result<&RawSection> {
    let monthly = || sections.iter().filter(|s| s.is_monthly());
    if kind == DatasetKind::Portfolios25 {
        let vw = monthly().find(|s| {
            let t = s.title.to_ascii_lowercase();
            t.contains("value weight") && t.contains("monthly")
        });
        if let Some(s) = vw {
            return Ok(s);
        }
    }
    monthly().next().ok_or(Error::NoMonthlySection)
}

/// Monthly panel with canonical column labels.
///
/// Factor files keep their own labels except the momentum column, which
/// becomes `WML`. Portfolio columns become `ME{i}BM{j}` in file order
/// (size-major), which is how the library lays out its 5x5 sorts.
pub fn canonical_panel(id: DatasetId, sections: &[RawSection]) -> Result<ReturnPanel> {
    let corrupt = |detail: String| Error::CorruptDataset {
        dataset: id.to_string(),
        detail,
    };
    let section =
        select_monthly(id.kind, sections).map_err(|_| corrupt("no monthly section".into()))?;
    if section.rows.len() < 12 {
        return Err(corrupt(format!("only {} monthly rows", section.rows.len())));
    }
    let panel = to_panel(section, true)?;
    match id.kind {
        DatasetKind::Momentum => {
            if panel.width() != 1 {
                return Err(corrupt(format!(
                    "expected 1 momentum column, got {}",
                    panel.width()
                )));
            }
            Ok(panel.rename(|_| "WML".to_string()))
        }
        DatasetKind::Portfolios25 => {
            if panel.width() != 25 {
                return Err(corrupt(format!(
                    "expected 25 portfolios, got {}",
                    panel.width()
                )));
            }
            let names: Vec<String> = (1..=5)
                .flat_map(|s| (1..=5).map(move |b| portfolio_label(s, b)))
                .collect();
            let mut it = names.into_iter();
            Ok(panel.rename(|_| it.next().unwrap()))
        }
        DatasetKind::Factors3 | DatasetKind::Factors5 => {
            let expected: &[&str] = if id.kind == DatasetKind::Factors3 {
                &["Mkt-RF", "SMB", "HML", "RF"]
            } else {
                &["Mkt-RF", "SMB", "HML", "RMW", "CMA", "RF"]
            };
            for e in expected {
                if panel.index_of(e).is_none() {
                    return Err(corrupt(format!("missing column `{e}`")));
                }
            }
            Ok(panel)
        }
    }
}
