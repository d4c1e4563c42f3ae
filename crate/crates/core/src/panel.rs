//! Returns panels, exposure series, and availability accounting.
//!
//! Returns are ingested from a long CSV with header `date,asset_id,return`;
//! a `(date, asset)` pair that never appears is treated as missing. Exposures
//! come from a long CSV with header `date,asset_id,factor_id,value` and are
//! carried forward from each exposure date until the next one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::ops::Range;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{MosaicError, Result};

const MODULE: &str = "panel";

/// A `T x p` panel of returns with an availability mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    times: Vec<NaiveDate>,
    assets: Vec<String>,
    values: DMatrix<f64>,
    available: Vec<bool>,
}

impl ReturnsPanel {
    /// Build a panel, checking that times increase, asset ids are unique and
    /// every available cell is finite. Unavailable cells are zeroed.
    pub fn new(
        times: Vec<NaiveDate>,
        assets: Vec<String>,
        mut values: DMatrix<f64>,
        available: Vec<bool>,
    ) -> Result<Self> {
        let (t_len, p) = (times.len(), assets.len());
        if values.nrows() != t_len || values.ncols() != p {
            return Err(MosaicError::invalid(
                MODULE,
                format!(
                    "values are {}x{} but panel has {} times and {} assets",
                    values.nrows(),
                    values.ncols(),
                    t_len,
                    p
                ),
            ));
        }
        if available.len() != t_len * p {
            return Err(MosaicError::invalid(MODULE, "availability mask has wrong length"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MosaicError::invalid(MODULE, "times must be strictly increasing"));
        }
        let unique: BTreeSet<&String> = assets.iter().collect();
        if unique.len() != p {
            return Err(MosaicError::invalid(MODULE, "asset identifiers must be unique"));
        }
        for t in 0..t_len {
            for j in 0..p {
                if available[t * p + j] {
                    if !values[(t, j)].is_finite() {
                        return Err(MosaicError::invalid(
                            MODULE,
                            format!("non-finite return at ({t}, {j})"),
                        ));
                    }
                } else {
                    values[(t, j)] = 0.0;
                }
            }
        }
        Ok(Self {
            times,
            assets,
            values,
            available,
        })
    }

    /// A fully observed panel.
    pub fn complete(times: Vec<NaiveDate>, assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let n = times.len() * assets.len();
        Self::new(times, assets, values, vec![true; n])
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn times(&self) -> &[NaiveDate] {
        &self.times
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Row-major `T x p` availability mask.
    pub fn mask(&self) -> &[bool] {
        &self.available
    }

    pub fn is_available(&self, t: usize, j: usize) -> bool {
        self.available[t * self.assets.len() + j]
    }

    pub fn is_complete(&self) -> bool {
        self.available.iter().all(|&a| a)
    }

    /// Restrict to a contiguous range of timepoints.
    pub fn slice_times(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.n_times() || range.start > range.end {
            return Err(MosaicError::invalid(MODULE, "time slice out of bounds"));
        }
        let p = self.n_assets();
        let rows = range.len();
        let values = self.values.rows(range.start, rows).into_owned();
        let available = self.available[range.start * p..range.end * p].to_vec();
        Ok(Self {
            times: self.times[range].to_vec(),
            assets: self.assets.clone(),
            values,
            available,
        })
    }

    /// Restrict to a subset of assets (in the given order).
    pub fn select_assets(&self, assets: &[usize]) -> Result<Self> {
        let p = self.n_assets();
        if assets.iter().any(|&j| j >= p) {
            return Err(MosaicError::invalid(MODULE, "asset index out of bounds"));
        }
        let values = self.values.select_columns(assets);
        let mut available = Vec::with_capacity(self.n_times() * assets.len());
        for t in 0..self.n_times() {
            available.extend(assets.iter().map(|&j| self.available[t * p + j]));
        }
        Self::new(
            self.times.clone(),
            assets.iter().map(|&j| self.assets[j].clone()).collect(),
            values,
            available,
        )
    }
}

/// Exposures `L_t`, piecewise constant between change-points.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSeries {
    n_times: usize,
    change_points: Vec<usize>,
    matrices: Vec<DMatrix<f64>>,
    factor_ids: Vec<String>,
}

impl ExposureSeries {
    pub fn new(
        n_times: usize,
        change_points: Vec<usize>,
        matrices: Vec<DMatrix<f64>>,
        factor_ids: Vec<String>,
    ) -> Result<Self> {
        if n_times == 0 {
            if !change_points.is_empty() || !matrices.is_empty() {
                return Err(MosaicError::invalid(MODULE, "empty series cannot have segments"));
            }
            return Ok(Self {
                n_times,
                change_points,
                matrices,
                factor_ids,
            });
        }
        if change_points.first() != Some(&0) {
            return Err(MosaicError::invalid(MODULE, "change points must begin at 0"));
        }
        if change_points.windows(2).any(|w| w[0] >= w[1]) || *change_points.last().unwrap() >= n_times {
            return Err(MosaicError::invalid(
                MODULE,
                "change points must be strictly increasing and inside the panel",
            ));
        }
        if matrices.len() != change_points.len() {
            return Err(MosaicError::invalid(MODULE, "one exposure matrix per segment required"));
        }
        let (p, k) = matrices[0].shape();
        if matrices.iter().any(|m| m.shape() != (p, k)) || factor_ids.len() != k {
            return Err(MosaicError::invalid(MODULE, "inconsistent exposure dimensions"));
        }
        Ok(Self {
            n_times,
            change_points,
            matrices,
            factor_ids,
        })
    }

    /// The same `p x k` matrix at every timepoint.
    pub fn constant(n_times: usize, matrix: DMatrix<f64>, factor_ids: Vec<String>) -> Result<Self> {
        if n_times == 0 {
            return Self::new(0, vec![], vec![], factor_ids);
        }
        Self::new(n_times, vec![0], vec![matrix], factor_ids)
    }

    /// Build from one matrix per timepoint, merging runs of identical matrices.
    pub fn from_per_time(per_time: Vec<DMatrix<f64>>, factor_ids: Vec<String>) -> Result<Self> {
        let n_times = per_time.len();
        let mut change_points = Vec::new();
        let mut matrices: Vec<DMatrix<f64>> = Vec::new();
        for (t, m) in per_time.into_iter().enumerate() {
            if matrices.last() != Some(&m) {
                change_points.push(t);
                matrices.push(m);
            }
        }
        Self::new(n_times, change_points, matrices, factor_ids)
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn n_assets(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    pub fn n_factors(&self) -> usize {
        self.factor_ids.len()
    }

    pub fn factor_ids(&self) -> &[String] {
        &self.factor_ids
    }

    pub fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// Index of the segment containing timepoint `t`.
    pub fn segment_of(&self, t: usize) -> usize {
        debug_assert!(t < self.n_times);
        self.change_points.partition_point(|&c| c <= t) - 1
    }

    /// Exposures in force at timepoint `t`.
    pub fn at(&self, t: usize) -> &DMatrix<f64> {
        &self.matrices[self.segment_of(t)]
    }

    /// Time ranges of the constant segments.
    pub fn segments(&self) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.change_points.len());
        for (i, &start) in self.change_points.iter().enumerate() {
            let end = self.change_points.get(i + 1).copied().unwrap_or(self.n_times);
            out.push(start..end);
        }
        out
    }

    /// Restrict to a contiguous range of timepoints.
    pub fn slice_times(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.n_times || range.start > range.end {
            return Err(MosaicError::invalid(MODULE, "time slice out of bounds"));
        }
        if range.is_empty() {
            return Self::new(0, vec![], vec![], self.factor_ids.clone());
        }
        let mut change_points = vec![0];
        let mut matrices = vec![self.at(range.start).clone()];
        for &c in &self.change_points {
            if c > range.start && c < range.end {
                change_points.push(c - range.start);
                matrices.push(self.at(c).clone());
            }
        }
        Self::new(range.len(), change_points, matrices, self.factor_ids.clone())
    }

    /// Restrict to a subset of assets (rows).
    pub fn select_assets(&self, assets: &[usize]) -> Self {
        Self {
            n_times: self.n_times,
            change_points: self.change_points.clone(),
            matrices: self.matrices.iter().map(|m| m.select_rows(assets)).collect(),
            factor_ids: self.factor_ids.clone(),
        }
    }

    /// Add declared change-points on top of the inferred ones.
    pub fn with_extra_change_points(&self, extra: &[usize]) -> Result<Self> {
        let mut points: BTreeSet<usize> = self.change_points.iter().copied().collect();
        for &c in extra {
            if c >= self.n_times {
                return Err(MosaicError::invalid(
                    MODULE,
                    format!("declared change point {c} outside panel of length {}", self.n_times),
                ));
            }
            points.insert(c);
        }
        let change_points: Vec<usize> = points.into_iter().collect();
        let matrices = change_points.iter().map(|&c| self.at(c).clone()).collect();
        Self::new(self.n_times, change_points, matrices, self.factor_ids.clone())
    }
}

/// Which assets are fully observed in each exposure segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvailabilitySummary {
    pub always_available: Vec<usize>,
    pub per_segment_available: Vec<Vec<usize>>,
}

/// Assets observed at every timepoint of each exposure segment, and the
/// intersection over all segments.
pub fn summarize_availability(panel: &ReturnsPanel, exposures: &ExposureSeries) -> AvailabilitySummary {
    let p = panel.n_assets();
    let per_segment_available: Vec<Vec<usize>> = exposures
        .segments()
        .into_iter()
        .map(|seg| {
            (0..p)
                .filter(|&j| seg.clone().all(|t| panel.is_available(t, j)))
                .collect()
        })
        .collect();
    let always_available = if panel.n_times() == 0 {
        Vec::new()
    } else {
        (0..p)
            .filter(|j| per_segment_available.iter().all(|s| s.binary_search(j).is_ok()))
            .collect()
    };
    AvailabilitySummary {
        always_available,
        per_segment_available,
    }
}

fn parse_date(raw: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d").map_err(|e| MosaicError::Parse {
        line,
        message: format!("bad date {raw:?}: {e}"),
    })
}

fn parse_finite(raw: &str, line: u64, what: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| MosaicError::Parse {
        line,
        message: format!("non-numeric {what} {raw:?}"),
    })?;
    if !v.is_finite() {
        return Err(MosaicError::Parse {
            line,
            message: format!("non-finite {what} {raw:?}"),
        });
    }
    Ok(v)
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?.clone();
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(MosaicError::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Read a long-format returns CSV (`date,asset_id,return`).
///
/// Assets are ordered lexicographically and dates chronologically. Absent
/// `(date, asset)` pairs are marked unavailable.
pub fn load_returns(source: impl Read) -> Result<ReturnsPanel> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    check_header(&mut reader, &["date", "asset_id", "return"])?;
    let mut cells: HashMap<(NaiveDate, String), f64> = HashMap::new();
    let mut dates = BTreeSet::new();
    let mut assets = BTreeSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(MosaicError::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let date = parse_date(&record[0], line)?;
        let asset = record[1].trim().to_string();
        if asset.is_empty() {
            return Err(MosaicError::Parse {
                line,
                message: "empty asset_id".into(),
            });
        }
        let value = parse_finite(&record[2], line, "return")?;
        if cells.insert((date, asset.clone()), value).is_some() {
            return Err(MosaicError::Duplicate {
                line,
                cell: format!("({date}, {asset})"),
            });
        }
        dates.insert(date);
        assets.insert(asset);
    }
    let times: Vec<NaiveDate> = dates.into_iter().collect();
    let assets: Vec<String> = assets.into_iter().collect();
    let (t_len, p) = (times.len(), assets.len());
    let mut values = DMatrix::zeros(t_len, p);
    let mut available = vec![false; t_len * p];
    for (t, date) in times.iter().enumerate() {
        for (j, asset) in assets.iter().enumerate() {
            if let Some(&v) = cells.get(&(*date, asset.clone())) {
                values[(t, j)] = v;
                available[t * p + j] = true;
            }
        }
    }
    ReturnsPanel::new(times, assets, values, available)
}

/// Write a panel in the long returns format; unavailable cells are omitted.
///
/// Values use Rust's shortest round-trip formatting, so reloading is bit-exact.
pub fn write_returns(panel: &ReturnsPanel, sink: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["date", "asset_id", "return"])?;
    for (t, date) in panel.times().iter().enumerate() {
        for (j, asset) in panel.assets().iter().enumerate() {
            if panel.is_available(t, j) {
                writer.write_record([
                    date.to_string(),
                    asset.clone(),
                    format!("{}", panel.values()[(t, j)]),
                ])?;
            }
        }
    }
    writer.flush().map_err(|e| MosaicError::Io {
        path: "<returns csv>".into(),
        source: e,
    })?;
    Ok(())
}

/// Write an exposure series in the long exposures format, one snapshot per
/// segment start.
pub fn write_exposures(panel: &ReturnsPanel, exposures: &ExposureSeries, sink: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["date", "asset_id", "factor_id", "value"])?;
    for (s, &start) in exposures.change_points().iter().enumerate() {
        let m = &exposures.matrices()[s];
        for (j, asset) in panel.assets().iter().enumerate() {
            for (f, factor) in exposures.factor_ids().iter().enumerate() {
                writer.write_record([
                    panel.times()[start].to_string(),
                    asset.clone(),
                    factor.clone(),
                    format!("{}", m[(j, f)]),
                ])?;
            }
        }
    }
    writer.flush().map_err(|e| MosaicError::Io {
        path: "<exposures csv>".into(),
        source: e,
    })?;
    Ok(())
}

/// Read a long-format exposures CSV (`date,asset_id,factor_id,value`) and
/// align it with `panel`.
///
/// Each exposure date governs panel dates up to the next exposure date.
/// Change-points are the panel indices where any exposure value changes.
/// Assets not in the panel are ignored; an observed asset without a complete
/// exposure row in its governing snapshot is a coverage error.
pub fn load_exposures(source: impl Read, panel: &ReturnsPanel) -> Result<ExposureSeries> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    check_header(&mut reader, &["date", "asset_id", "factor_id", "value"])?;
    let asset_index: HashMap<&str, usize> = panel
        .assets()
        .iter()
        .enumerate()
        .map(|(j, a)| (a.as_str(), j))
        .collect();
    let mut snapshots: BTreeMap<NaiveDate, HashMap<(usize, String), f64>> = BTreeMap::new();
    let mut factors = BTreeSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 4 {
            return Err(MosaicError::Parse {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let date = parse_date(&record[0], line)?;
        let asset = record[1].trim();
        let factor = record[2].trim().to_string();
        let value = parse_finite(&record[3], line, "exposure")?;
        factors.insert(factor.clone());
        let Some(&j) = asset_index.get(asset) else {
            continue;
        };
        let snap = snapshots.entry(date).or_default();
        if snap.insert((j, factor.clone()), value).is_some() {
            return Err(MosaicError::Duplicate {
                line,
                cell: format!("({date}, {asset}, {factor})"),
            });
        }
    }
    let factor_ids: Vec<String> = factors.into_iter().collect();
    let (t_len, p, k) = (panel.n_times(), panel.n_assets(), factor_ids.len());
    if t_len == 0 {
        return ExposureSeries::new(0, vec![], vec![], factor_ids);
    }
    let snap_dates: Vec<NaiveDate> = snapshots.keys().copied().collect();
    let mut per_time_snapshot = Vec::with_capacity(t_len);
    for (t, date) in panel.times().iter().enumerate() {
        let idx = snap_dates.partition_point(|d| d <= date);
        if idx == 0 {
            return Err(MosaicError::Coverage(format!(
                "no exposures on or before panel date {date} (index {t})"
            )));
        }
        per_time_snapshot.push(idx - 1);
    }
    let mut built: HashMap<usize, DMatrix<f64>> = HashMap::new();
    for (t, &s) in per_time_snapshot.iter().enumerate() {
        let snap = &snapshots[&snap_dates[s]];
        for j in 0..p {
            if !panel.is_available(t, j) {
                continue;
            }
            for f in &factor_ids {
                if !snap.contains_key(&(j, f.clone())) {
                    return Err(MosaicError::Coverage(format!(
                        "asset {} observed on {} lacks factor {} in exposure snapshot {}",
                        panel.assets()[j],
                        panel.times()[t],
                        f,
                        snap_dates[s]
                    )));
                }
            }
        }
        built.entry(s).or_insert_with(|| {
            DMatrix::from_fn(p, k, |j, f| snap.get(&(j, factor_ids[f].clone())).copied().unwrap_or(0.0))
        });
    }
    let per_time = per_time_snapshot.iter().map(|s| built[s].clone()).collect();
    ExposureSeries::from_per_time(per_time, factor_ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, day).unwrap()
    }

    #[test]
    fn complete_grid_loads_all_available() {
        let csv = "date,asset_id,return\n2020-01-01,B,0.1\n2020-01-01,A,0.2\n2020-01-02,A,0.3\n2020-01-02,B,0.4\n";
        let panel = load_returns(csv.as_bytes()).unwrap();
        assert_eq!(panel.assets(), ["A", "B"]);
        assert_eq!(panel.times(), [d(1), d(2)]);
        assert!(panel.is_complete());
        assert_eq!(panel.values()[(0, 1)], 0.1);
        assert_eq!(panel.values()[(1, 0)], 0.3);
    }

    #[test]
    fn absent_pair_masks_one_cell() {
        let csv = "date,asset_id,return\n2020-01-01,A,0.2\n2020-01-02,A,0.3\n2020-01-02,B,0.4\n";
        let panel = load_returns(csv.as_bytes()).unwrap();
        assert_eq!(panel.mask().iter().filter(|&&a| !a).count(), 1);
        assert!(!panel.is_available(0, 1));
    }

    #[test]
    fn nan_return_is_rejected_with_line() {
        let csv = "date,asset_id,return\n2020-01-01,A,0.2\n2020-01-02,A,NaN\n";
        match load_returns(csv.as_bytes()) {
            Err(MosaicError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_cell_is_rejected() {
        let csv = "date,asset_id,return\n2020-01-01,A,0.2\n2020-01-01,A,0.3\n";
        assert!(matches!(
            load_returns(csv.as_bytes()),
            Err(MosaicError::Duplicate { line: 3, .. })
        ));
    }

    #[test]
    fn bad_header_and_bad_date() {
        assert!(load_returns("a,b,c\n".as_bytes()).is_err());
        let csv = "date,asset_id,return\n2020-13-01,A,0.2\n";
        assert!(matches!(load_returns(csv.as_bytes()), Err(MosaicError::Parse { line: 2, .. })));
    }

    fn grid_panel(t_len: usize) -> ReturnsPanel {
        let times = (1..=t_len as u32).map(d).collect();
        ReturnsPanel::complete(
            times,
            vec!["A".into(), "B".into()],
            DMatrix::from_fn(t_len, 2, |t, j| (t * 2 + j) as f64),
        )
        .unwrap()
    }

    fn exposure_csv(t_len: usize, change_at: Option<usize>) -> String {
        let mut s = String::from("date,asset_id,factor_id,value\n");
        for t in 0..t_len {
            let bump = if change_at.is_some_and(|c| t >= c) { 1.0 } else { 0.0 };
            for (j, a) in ["A", "B"].iter().enumerate() {
                s.push_str(&format!("{},{a},mkt,{}\n", d(t as u32 + 1), 1.0 + j as f64 + bump));
            }
        }
        s
    }

    #[test]
    fn constant_exposures_form_one_segment() {
        let panel = grid_panel(8);
        let e = load_exposures(exposure_csv(8, None).as_bytes(), &panel).unwrap();
        assert_eq!(e.change_points(), [0]);
        assert_eq!(e.n_factors(), 1);
    }

    #[test]
    fn change_at_index_five() {
        let panel = grid_panel(8);
        let e = load_exposures(exposure_csv(8, Some(5)).as_bytes(), &panel).unwrap();
        assert_eq!(e.change_points(), [0, 5]);
        assert_eq!(e.at(6)[(0, 0)], 2.0);
    }

    #[test]
    fn zero_factor_column_is_accepted_at_load() {
        let panel = grid_panel(2);
        let csv = "date,asset_id,factor_id,value\n2020-01-01,A,z,0\n2020-01-01,B,z,0\n";
        let e = load_exposures(csv.as_bytes(), &panel).unwrap();
        assert_eq!(e.at(1)[(1, 0)], 0.0);
    }

    #[test]
    fn missing_asset_exposure_is_coverage_error() {
        let panel = grid_panel(2);
        let csv = "date,asset_id,factor_id,value\n2020-01-01,A,mkt,1\n";
        assert!(matches!(load_exposures(csv.as_bytes(), &panel), Err(MosaicError::Coverage(_))));
        let csv = "date,asset_id,factor_id,value\n2020-01-01,A,mkt,x\n";
        assert!(matches!(load_exposures(csv.as_bytes(), &panel), Err(MosaicError::Parse { .. })));
    }

    #[test]
    fn exposures_carry_forward() {
        let panel = grid_panel(4);
        let csv = "date,asset_id,factor_id,value\n2020-01-01,A,mkt,1\n2020-01-01,B,mkt,2\n2020-01-03,A,mkt,3\n2020-01-03,B,mkt,2\n";
        let e = load_exposures(csv.as_bytes(), &panel).unwrap();
        assert_eq!(e.change_points(), [0, 2]);
        assert_eq!(e.at(1)[(0, 0)], 1.0);
        assert_eq!(e.at(3)[(0, 0)], 3.0);
    }

    #[test]
    fn availability_summary_cases() {
        let times: Vec<NaiveDate> = (1..=6).map(d).collect();
        let assets: Vec<String> = (0..4).map(|j| format!("a{j}")).collect();
        let mut mask = vec![true; 24];
        // asset 3 missing one cell in segment 2 (times 4..6)
        mask[4 * 4 + 3] = false;
        let panel = ReturnsPanel::new(times, assets, DMatrix::zeros(6, 4), mask).unwrap();
        let e = ExposureSeries::new(
            6,
            vec![0, 2, 4],
            vec![DMatrix::from_element(4, 1, 1.0); 3],
            vec!["f".into()],
        )
        .unwrap();
        let s = summarize_availability(&panel, &e);
        assert_eq!(s.per_segment_available[0], vec![0, 1, 2, 3]);
        assert_eq!(s.per_segment_available[2], vec![0, 1, 2]);
        assert_eq!(s.always_available, vec![0, 1, 2]);
        assert_eq!(summarize_availability(&panel, &e), s);

        let full = grid_panel(3);
        let e = ExposureSeries::constant(3, DMatrix::from_element(2, 1, 1.0), vec!["f".into()]).unwrap();
        assert_eq!(summarize_availability(&full, &e).always_available, vec![0, 1]);
    }

    #[test]
    fn empty_panel_summary() {
        let panel = ReturnsPanel::complete(vec![], vec!["A".into()], DMatrix::zeros(0, 1)).unwrap();
        let e = ExposureSeries::new(0, vec![], vec![], vec![]).unwrap();
        let s = summarize_availability(&panel, &e);
        assert!(s.always_available.is_empty());
        assert!(s.per_segment_available.is_empty());
    }

    #[test]
    fn slicing_and_extra_change_points() {
        let e = ExposureSeries::new(
            10,
            vec![0, 4],
            vec![DMatrix::from_element(2, 1, 1.0), DMatrix::from_element(2, 1, 2.0)],
            vec!["f".into()],
        )
        .unwrap();
        let s = e.slice_times(2..8).unwrap();
        assert_eq!(s.change_points(), [0, 2]);
        assert_eq!(s.at(0)[(0, 0)], 1.0);
        assert_eq!(s.at(5)[(0, 0)], 2.0);
        let x = e.with_extra_change_points(&[7, 4]).unwrap();
        assert_eq!(x.change_points(), [0, 4, 7]);
        assert!(e.with_extra_change_points(&[10]).is_err());
    }
}
