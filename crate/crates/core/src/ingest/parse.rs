//! Reader and writer for the CSV layout used by the Kenneth French data
//! library: a free-text preamble, then sections made of optional title
//! lines, a header row whose first cell is empty, and data rows keyed by
//! `YYYYMM` (monthly) or `YYYY` (annual), each section ended by a blank line.

use crate::error::{Error, Result};
use crate::timeseries::{MonthStamp, ReturnPanel};

const SENTINELS: [f64; 2] = [-99.99, -999.0];

#[derive(Debug, Clone, PartialEq)]
pub struct RawSection {
    pub title: String,
    pub header: Vec<String>,
    /// `(date key, cells)`; `None` marks a missing-value sentinel.
    pub rows: Vec<(u32, Vec<Option<f64>>)>,
}

impl RawSection {
    /// All keys are six-digit `YYYYMM`.
    pub fn is_monthly(&self) -> bool {
        !self.rows.is_empty()
            && self
                .rows
                .iter()
                .all(|(k, _)| (100_000..1_000_000).contains(k))
    }
}

fn is_blank(line: &str) -> bool {
    line.chars().all(|c| c == ',' || c.is_whitespace())
}

fn date_key(cell: &str) -> Option<u32> {
    let cell = cell.trim();
    if (cell.len() == 4 || cell.len() == 6) && cell.bytes().all(|b| b.is_ascii_digit()) {
        cell.parse().ok()
    } else {
        None
    }
}

fn parse_cell(cell: &str, line: usize) -> Result<Option<f64>> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        line,
        detail: format!("`{}` is not a number", cell.trim()),
    })?;
    if SENTINELS.iter().any(|s| (v - s).abs() < 1e-9) {
        Ok(None)
    } else {
        Ok(Some(v))
    }
}

/// Splits a French-library file into its sections, in file order.
pub fn parse_french_csv(text: &str) -> Result<Vec<RawSection>> {
    let mut sections = Vec::new();
    let mut title: Vec<&str> = Vec::new();
    let mut current: Option<RawSection> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let lineno = lineno + 1;
        if is_blank(line) {
            sections.extend(current.take());
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if let Some(sec) = current.as_mut() {
            if let Some(key) = date_key(cells[0]) {
                let got = cells.len() - 1;
                if got != sec.header.len() {
                    return Err(Error::RaggedRow {
                        line: lineno,
                        expected: sec.header.len(),
                        got,
                    });
                }
                let vals = cells[1..]
                    .iter()
                    .map(|c| parse_cell(c, lineno))
                    .collect::<Result<Vec<_>>>()?;
                sec.rows.push((key, vals));
                continue;
            }
            // Anything else closes the section and starts a new title.
            sections.extend(current.take());
        }
        let is_header = cells.len() > 1 && cells[0].trim().is_empty();
        if is_header {
            current = Some(RawSection {
                title: title.join("\n"),
                header: cells[1..].iter().map(|c| c.trim().to_string()).collect(),
                rows: Vec::new(),
            });
            title.clear();
        } else {
            title.push(line.trim());
        }
    }
    sections.extend(current);
    Ok(sections)
}

/// Writes sections back in the library's layout. `parse_french_csv` inverts it.
pub fn serialize_sections(sections: &[RawSection]) -> String {
    let mut out = String::new();
    for sec in sections {
        for line in sec.title.lines() {
            out.push_str(line);
            out.push('\n');
        }
        out.push(',');
        out.push_str(&sec.header.join(","));
        out.push('\n');
        for (key, vals) in &sec.rows {
            out.push_str(&key.to_string());
            for v in vals {
                out.push(',');
                match v {
                    Some(x) => out.push_str(&format!("{x:?}")),
                    None => out.push_str("-99.99"),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Monthly section holding `panel`, multiplied by 100 when `percent`.
/// Missing cells are written as the library's `-99.99` sentinel.
pub fn from_panel(panel: &ReturnPanel, title: &str, percent: bool) -> RawSection {
    let scale = if percent { 100.0 } else { 1.0 };
    let rows = panel
        .dates()
        .iter()
        .enumerate()
        .map(|(t, d)| {
            let cells = (0..panel.width())
                .map(|j| panel.get(t, j).map(|v| v * scale))
                .collect();
            (d.to_yyyymm(), cells)
        })
        .collect();
    RawSection {
        title: title.to_string(),
        header: panel.names().to_vec(),
        rows,
    }
}

/// Converts a monthly section into a panel, dividing by 100 when `percent`.
pub fn to_panel(section: &RawSection, percent: bool) -> Result<ReturnPanel> {
    if !section.is_monthly() {
        return Err(Error::NoMonthlySection);
    }
    let dates = section
        .rows
        .iter()
        .map(|(k, _)| MonthStamp::from_yyyymm(*k))
        .collect::<Result<Vec<_>>>()?;
    for (w, name) in dates.windows(2).zip(std::iter::repeat(&section.title)) {
        if w[1] != w[0].succ() {
            return Err(Error::GapInSeries {
                series: name.lines().last().unwrap_or_default().to_string(),
                at: w[1],
            });
        }
    }
    let scale = if percent { 0.01 } else { 1.0 };
    let n = section.header.len();
    let mut values = Vec::with_capacity(dates.len() * n);
    let mut missing = Vec::with_capacity(dates.len() * n);
    for (_, row) in &section.rows {
        for cell in row {
            values.push(cell.map_or(f64::NAN, |v| v * scale));
            missing.push(cell.is_none());
        }
    }
    ReturnPanel::new(dates, section.header.clone(), values, missing)
}
