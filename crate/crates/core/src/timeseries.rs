//! Month-indexed return panels and the small amount of arithmetic the
//! pipeline needs on them: alignment, excess returns, summary statistics.
//!
//! Values are decimal returns (0.01 = 1%). Percent-to-decimal conversion
//! happens once, at ingest.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A calendar month. Ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthStamp {
    year: i32,
    month: u8,
}

impl MonthStamp {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::ConfigError(format!("month {month} out of range")));
        }
        Ok(Self {
            year,
            month: month as u8,
        })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        u32::from(self.month)
    }

    /// Months since year 0, January.
    fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// `self - earlier` in whole months.
    pub fn months_since(self, earlier: MonthStamp) -> i64 {
        self.ordinal() - earlier.ordinal()
    }

    /// Parses the French-library `YYYYMM` key.
    pub fn from_yyyymm(key: u32) -> Result<Self> {
        Self::new((key / 100) as i32, key % 100)
    }

    pub fn to_yyyymm(self) -> u32 {
        self.year as u32 * 100 + u32::from(self.month)
    }
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthStamp {
    type Err = Error;

    /// Accepts `YYYY-MM` or `YYYYMM`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::ConfigError(format!("invalid month `{s}`, expected YYYY-MM"));
        let (y, m) = match s.split_once('-') {
            Some((y, m)) => (y, m),
            None if s.len() == 6 => s.split_at(4),
            None => return Err(bad()),
        };
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        Self::new(year, month).map_err(|_| bad())
    }
}

/// Contiguous monthly panel of `T` rows by `n` named series, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<MonthStamp>,
    names: Vec<String>,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl ReturnPanel {
    /// Builds a panel, checking that dates are contiguous and present cells finite.
    pub fn new(
        dates: Vec<MonthStamp>,
        names: Vec<String>,
        values: Vec<f64>,
        missing: Vec<bool>,
    ) -> Result<Self> {
        let n = names.len();
        if values.len() != dates.len() * n || missing.len() != values.len() {
            return Err(Error::ShapeError(format!(
                "{} dates x {} series needs {} cells, got {} values / {} mask",
                dates.len(),
                n,
                dates.len() * n,
                values.len(),
                missing.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] != w[0].succ() {
                return Err(Error::GapInSeries {
                    series: "<dates>".into(),
                    at: w[1],
                });
            }
        }
        for (idx, (&v, &miss)) in values.iter().zip(&missing).enumerate() {
            if !miss && !v.is_finite() {
                return Err(Error::ShapeError(format!(
                    "non-finite value in `{}` at {}",
                    names[idx % n],
                    dates[idx / n]
                )));
            }
        }
        Ok(Self {
            dates,
            names,
            values,
            missing,
        })
    }

    /// Panel with no missing cells, from per-series columns.
    pub fn from_columns(start: MonthStamp, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let t = columns.first().map_or(0, |c| c.1.len());
        if columns.iter().any(|c| c.1.len() != t) {
            return Err(Error::ShapeError("columns differ in length".into()));
        }
        let dates = (0..t as i64).map(|i| start.add_months(i)).collect();
        let n = columns.len();
        let mut values = vec![0.0; t * n];
        for (j, (_, col)) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * n + j] = v;
            }
        }
        let names = columns.into_iter().map(|c| c.0).collect();
        Self::new(dates, names, values, vec![false; t * n])
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn dates(&self) -> &[MonthStamp] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn first_date(&self) -> Option<MonthStamp> {
        self.dates.first().copied()
    }

    pub fn last_date(&self) -> Option<MonthStamp> {
        self.dates.last().copied()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, t: usize, j: usize) -> Option<f64> {
        let idx = t * self.width() + j;
        (!self.missing[idx]).then(|| self.values[idx])
    }

    pub fn is_missing(&self, t: usize, j: usize) -> bool {
        self.missing[t * self.width() + j]
    }

    /// Row `t`, with NaN in missing cells.
    pub fn row(&self, t: usize) -> Vec<f64> {
        (0..self.width())
            .map(|j| self.get(t, j).unwrap_or(f64::NAN))
            .collect()
    }

    /// Column by name. Fails if any cell is missing.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .index_of(name)
            .ok_or_else(|| Error::MissingSeries(name.to_string()))?;
        self.column_at(j)
    }

    pub fn column_at(&self, j: usize) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|t| {
                self.get(t, j).ok_or_else(|| Error::GapInSeries {
                    series: self.names[j].clone(),
                    at: self.dates[t],
                })
            })
            .collect()
    }

    /// Sub-panel with the named columns, in the order given.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::MissingSeries((*n).to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.take_columns(&idx))
    }

    fn take_columns(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.len() * idx.len());
        let mut missing = Vec::with_capacity(values.capacity());
        for t in 0..self.len() {
            for &j in idx {
                let k = t * self.width() + j;
                values.push(self.values[k]);
                missing.push(self.missing[k]);
            }
        }
        Self {
            dates: self.dates.clone(),
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
            values,
            missing,
        }
    }

    /// Panel with every column except `name`.
    pub fn without(&self, name: &str) -> Result<Self> {
        let drop = self
            .index_of(name)
            .ok_or_else(|| Error::MissingSeries(name.to_string()))?;
        let idx: Vec<usize> = (0..self.width()).filter(|&j| j != drop).collect();
        Ok(self.take_columns(&idx))
    }

    /// Rows whose dates fall in `[start, end]` (inclusive, either bound optional).
    pub fn slice(&self, start: Option<MonthStamp>, end: Option<MonthStamp>) -> Result<Self> {
        let lo = start.map_or(0, |s| self.dates.partition_point(|d| *d < s));
        let hi = end.map_or(self.len(), |e| self.dates.partition_point(|d| *d <= e));
        if lo >= hi {
            return Err(Error::NoOverlap);
        }
        Ok(self.rows(lo, hi))
    }

    fn rows(&self, lo: usize, hi: usize) -> Self {
        let n = self.width();
        Self {
            dates: self.dates[lo..hi].to_vec(),
            names: self.names.clone(),
            values: self.values[lo * n..hi * n].to_vec(),
            missing: self.missing[lo * n..hi * n].to_vec(),
        }
    }

    /// Returns a copy with series renamed through `f`.
    pub fn rename(mut self, mut f: impl FnMut(&str) -> String) -> Self {
        for n in &mut self.names {
            *n = f(n);
        }
        self
    }

    /// Multiplies every present cell by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        for (v, &m) in self.values.iter_mut().zip(&self.missing) {
            if !m {
                *v *= factor;
            }
        }
        self
    }

    /// Dense `T x n` row-major values; errors if anything is missing.
    pub fn dense(&self) -> Result<Vec<f64>> {
        if let Some(idx) = self.missing.iter().position(|&m| m) {
            let n = self.width();
            return Err(Error::GapInSeries {
                series: self.names[idx % n].clone(),
                at: self.dates[idx / n],
            });
        }
        Ok(self.values.clone())
    }
}

/// Intersects the date ranges of `panels` and concatenates their columns.
///
/// Rows with a missing cell are trimmed from either end of the common range;
/// a missing cell strictly inside the trimmed range is an error. A label
/// repeated across inputs is kept once if the values agree.
pub fn align(panels: &[ReturnPanel]) -> Result<ReturnPanel> {
    if panels.is_empty() || panels.iter().any(ReturnPanel::is_empty) {
        return Err(Error::NoOverlap);
    }
    let start = panels
        .iter()
        .filter_map(ReturnPanel::first_date)
        .max()
        .unwrap();
    let end = panels
        .iter()
        .filter_map(ReturnPanel::last_date)
        .min()
        .unwrap();
    if start > end {
        return Err(Error::NoOverlap);
    }
    let t_len = end.months_since(start) as usize + 1;

    let mut names: Vec<String> = Vec::new();
    let mut sources: Vec<(usize, usize, usize)> = Vec::new(); // (panel, column, row offset)
    for (p, panel) in panels.iter().enumerate() {
        let offset = start.months_since(panel.first_date().unwrap()) as usize;
        for (j, name) in panel.names().iter().enumerate() {
            if let Some(prev) = names.iter().position(|n| n == name) {
                let (pp, pj, po) = sources[prev];
                let same = (0..t_len).all(|t| {
                    let a = panels[pp].get(t + po, pj);
                    let b = panel.get(t + offset, j);
                    a.map(f64::to_bits) == b.map(f64::to_bits)
                });
                if !same {
                    return Err(Error::ShapeError(format!(
                        "label `{name}` appears in several inputs with different values"
                    )));
                }
                continue;
            }
            names.push(name.clone());
            sources.push((p, j, offset));
        }
    }

    let n = names.len();
    let mut values = Vec::with_capacity(t_len * n);
    let mut missing = Vec::with_capacity(t_len * n);
    for t in 0..t_len {
        for &(p, j, off) in &sources {
            let k = (t + off) * panels[p].width() + j;
            values.push(panels[p].values[k]);
            missing.push(panels[p].missing[k]);
        }
    }
    let row_complete = |t: usize| !missing[t * n..(t + 1) * n].iter().any(|&m| m);
    let lo = (0..t_len)
        .find(|&t| row_complete(t))
        .ok_or(Error::NoOverlap)?;
    let hi = (0..t_len).rev().find(|&t| row_complete(t)).unwrap() + 1;
    for t in lo..hi {
        if let Some(j) = (0..n).find(|&j| missing[t * n + j]) {
            return Err(Error::GapInSeries {
                series: names[j].clone(),
                at: start.add_months(t as i64),
            });
        }
    }
    Ok(ReturnPanel {
        dates: (lo..hi).map(|t| start.add_months(t as i64)).collect(),
        names,
        values: values[lo * n..hi * n].to_vec(),
        missing: missing[lo * n..hi * n].to_vec(),
    })
}

/// Subtracts the risk-free column from every other column and drops it.
pub fn excess_returns(panel: &ReturnPanel, riskfree_label: &str) -> Result<ReturnPanel> {
    let rf_idx = panel
        .index_of(riskfree_label)
        .ok_or_else(|| Error::MissingSeries(riskfree_label.to_string()))?;
    let mut out = panel.without(riskfree_label)?;
    let n = out.width();
    for t in 0..panel.len() {
        let rf_missing = panel.is_missing(t, rf_idx);
        let rf = panel.values[t * panel.width() + rf_idx];
        for j in 0..n {
            let k = t * n + j;
            if rf_missing {
                out.missing[k] = true;
            } else if !out.missing[k] {
                out.values[k] -= rf;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub fn describe(series: &[f64]) -> Result<SummaryStats> {
    let n = series.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::ShapeError(
            "series contains non-finite values".into(),
        ));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    // Centered second pass; the correction term absorbs rounding in `mean`.
    let (ss, comp) = series.iter().fold((0.0, 0.0), |(ss, c), &x| {
        let d = x - mean;
        (ss + d * d, c + d)
    });
    let var = ((ss - comp * comp / n as f64) / (n - 1) as f64).max(0.0);
    let (min, max) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    Ok(SummaryStats {
        mean: mean.clamp(min, max),
        sd: var.sqrt(),
        min,
        max,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(y: i32, m: u32) -> MonthStamp {
        MonthStamp::new(y, m).unwrap()
    }

    fn panel(start: MonthStamp, name: &str, vals: &[f64]) -> ReturnPanel {
        ReturnPanel::from_columns(start, vec![(name.into(), vals.to_vec())]).unwrap()
    }

    /// Panel of `len` months starting at `start`, values irrelevant.
    fn span(start: MonthStamp, end: MonthStamp, name: &str) -> ReturnPanel {
        let len = end.months_since(start) as usize + 1;
        panel(start, name, &vec![0.001; len])
    }

    #[test]
    fn month_arithmetic() {
        assert_eq!(ms(1926, 12).succ(), ms(1927, 1));
        assert_eq!(ms(2022, 3).months_since(ms(1926, 7)), 1148);
        assert_eq!(ms(1990, 7).add_months(-7), ms(1989, 12));
        assert_eq!("1963-07".parse::<MonthStamp>().unwrap(), ms(1963, 7));
        assert_eq!("196307".parse::<MonthStamp>().unwrap(), ms(1963, 7));
        assert!("1963-13".parse::<MonthStamp>().is_err());
        assert_eq!(ms(1926, 7).to_string(), "1926-07");
        assert_eq!(MonthStamp::from_yyyymm(192607).unwrap(), ms(1926, 7));
    }

    #[test]
    fn table_sample_sizes_from_month_counts() {
        let end = ms(2022, 3);
        let us_ff3 = span(ms(1926, 7), end, "Mkt-RF");
        assert_eq!(us_ff3.len(), 1149);

        let us_ff5 = span(ms(1963, 7), end, "RMW");
        let us_ports = span(ms(1926, 7), end, "ME1BM1");
        assert_eq!(align(&[us_ff5, us_ports]).unwrap().len(), 705);

        let jp_ff5 = span(ms(1990, 7), end, "CMA");
        assert_eq!(jp_ff5.len(), 381);
        let jp_wml = span(ms(1990, 11), end, "WML");
        assert_eq!(align(&[jp_wml, jp_ff5]).unwrap().len(), 377);
    }

    #[test]
    fn align_with_itself_is_identity() {
        let p = panel(ms(2000, 1), "A", &[0.01, 0.02, -0.03]);
        assert_eq!(align(&[p.clone(), p.clone()]).unwrap(), p);
        assert_eq!(align(std::slice::from_ref(&p)).unwrap(), p);
    }

    #[test]
    fn align_rejects_disjoint_ranges() {
        let a = panel(ms(2000, 1), "A", &[0.0, 0.0]);
        let b = panel(ms(2001, 1), "B", &[0.0, 0.0]);
        assert!(matches!(align(&[a, b]), Err(Error::NoOverlap)));
    }

    #[test]
    fn align_trims_edges_but_rejects_interior_gaps() {
        let dates: Vec<_> = (0..5).map(|i| ms(2000, 1).add_months(i)).collect();
        let vals = vec![0.0, 0.1, 0.2, 0.3, 0.4];
        let edge = ReturnPanel::new(
            dates.clone(),
            vec!["A".into()],
            vals.clone(),
            vec![true, false, false, false, true],
        )
        .unwrap();
        let b = panel(ms(2000, 1), "B", &vals);
        let out = align(&[edge, b.clone()]).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.first_date(), Some(ms(2000, 2)));

        let hole = ReturnPanel::new(
            dates,
            vec!["A".into()],
            vals,
            vec![false, false, true, false, false],
        )
        .unwrap();
        assert!(matches!(align(&[hole, b]), Err(Error::GapInSeries { .. })));
    }

    #[test]
    fn new_rejects_noncontiguous_dates() {
        let r = ReturnPanel::new(
            vec![ms(2000, 1), ms(2000, 3)],
            vec!["A".into()],
            vec![0.0, 0.0],
            vec![false, false],
        );
        assert!(matches!(r, Err(Error::GapInSeries { .. })));
    }

    #[test]
    fn excess_return_subtracts_riskfree() {
        let p = ReturnPanel::from_columns(
            ms(2000, 1),
            vec![
                ("P".into(), vec![0.0120, 0.0050]),
                ("RF".into(), vec![0.0022, 0.0]),
            ],
        )
        .unwrap();
        let ex = excess_returns(&p, "RF").unwrap();
        assert_eq!(ex.names(), &["P".to_string()]);
        assert!((ex.get(0, 0).unwrap() - 0.0098).abs() < 1e-15);
        assert_eq!(ex.get(1, 0), Some(0.0050));
        assert!(matches!(
            excess_returns(&p, "RFX"),
            Err(Error::MissingSeries(_))
        ));
    }

    #[test]
    fn excess_with_zero_riskfree_is_identity_minus_column() {
        let p = ReturnPanel::from_columns(
            ms(2000, 1),
            vec![
                ("A".into(), vec![0.01, -0.02, 0.03]),
                ("RF".into(), vec![0.0; 3]),
            ],
        )
        .unwrap();
        assert_eq!(excess_returns(&p, "RF").unwrap(), p.without("RF").unwrap());
    }

    #[test]
    fn describe_constant_series() {
        let s = describe(&[0.25; 7]).unwrap();
        assert_eq!(
            (s.mean, s.sd, s.min, s.max, s.n),
            (0.25, 0.0, 0.25, 0.25, 7)
        );
    }

    #[test]
    fn describe_needs_two_points() {
        assert!(matches!(describe(&[1.0]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn describe_matches_two_pass_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-0.1..0.1)).collect();

        // textbook two-pass
        let mean: f64 = x.iter().sum::<f64>() / 10.0;
        let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;

        let s = describe(&x).unwrap();
        assert!((s.mean - mean).abs() < 1e-15);
        assert!((s.sd - var.sqrt()).abs() < 1e-15);
        assert!(s.min <= s.mean && s.mean <= s.max);
    }
}
