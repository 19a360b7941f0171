//! GPS trajectory ingestion and discretization into symbol sequences.
//!
//! Raw points are projected onto a planar equirectangular grid anchored at a
//! reference latitude, cells are re-encoded to dense symbols, and visit
//! sequences are extracted by merging runs of the same cell. Resampling
//! helpers support the sampling-rate experiments on mutual information.

use std::collections::BTreeMap;
use std::collections::HashMap;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Symbol, SymbolSequence};

/// Meters per degree of latitude (and of longitude at the equator).
pub const METERS_PER_DEGREE: f64 = 111_320.0;

pub const DEFAULT_CELL_SIZE_M: f64 = 250.0;
pub const DEFAULT_MIN_DWELL_S: f64 = 600.0;

const PLT_HEADER_LINES: usize = 6;
const POLE_MARGIN_DEG: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawPoint {
    pub lat: f64,
    pub lon: f64,
    /// Seconds since the Unix epoch.
    pub t: f64,
}

impl RawPoint {
    pub fn new(lat: f64, lon: f64, t: f64) -> Self {
        Self { lat, lon, t }
    }
}

/// One stay at a symbol, from first to last observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub symbol: Symbol,
    pub arrive: f64,
    pub depart: f64,
}

impl Visit {
    pub fn dwell(&self) -> f64 {
        self.depart - self.arrive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cell edge length in meters.
    pub cell_size: f64,
    /// Latitude (degrees) at which the longitude step is computed.
    pub ref_lat: f64,
}

impl GridSpec {
    pub fn new(cell_size: f64, ref_lat: f64) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::invalid(format!("cell size must be positive, got {cell_size}")));
        }
        if !ref_lat.is_finite() || ref_lat.abs() > 90.0 - POLE_MARGIN_DEG {
            return Err(Error::invalid(format!(
                "reference latitude {ref_lat} is within {POLE_MARGIN_DEG} degrees of a pole"
            )));
        }
        Ok(Self { cell_size, ref_lat })
    }

    /// Grid anchored at the median latitude of `points`.
    pub fn anchored_at_median(points: &[RawPoint], cell_size: f64) -> Result<Self> {
        let lats: Vec<f64> = points.iter().map(|p| p.lat).collect();
        let ref_lat = median(&lats).ok_or_else(|| Error::invalid("no points to anchor the grid"))?;
        Self::new(cell_size, ref_lat)
    }

    pub fn lat_step(&self) -> f64 {
        self.cell_size / METERS_PER_DEGREE
    }

    pub fn lon_step(&self) -> f64 {
        self.cell_size / (METERS_PER_DEGREE * self.ref_lat.to_radians().cos())
    }

    /// Integer cell coordinates of a point.
    pub fn cell_of(&self, p: &RawPoint) -> (i64, i64) {
        (
            (p.lat / self.lat_step()).floor() as i64,
            (p.lon / self.lon_step()).floor() as i64,
        )
    }
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    })
}

fn check_coordinates(lat: f64, lon: f64, line: usize) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(Error::CoordinateRange { line, field: "latitude", value: lat });
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(Error::CoordinateRange { line, field: "longitude", value: lon });
    }
    Ok(())
}

/// Parses a GeoLife PLT file.
///
/// The first six lines are a fixed header. Each following line is
/// `lat,lon,0,altitude,day-number,date,time`; the timestamp is taken from the
/// date and time fields, interpreted as UTC.
pub fn parse_plt(bytes: &[u8]) -> Result<Vec<RawPoint>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Parse { line: 0, message: format!("not UTF-8: {e}") })?;
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if idx < PLT_HEADER_LINES {
            continue;
        }
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line,
                message: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let number = |i: usize, name: &str| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, message: format!("bad {name} {:?}", fields[i]) })
        };
        let lat = number(0, "latitude")?;
        let lon = number(1, "longitude")?;
        check_coordinates(lat, lon, line)?;
        let date = NaiveDate::parse_from_str(fields[5], "%Y-%m-%d")
            .map_err(|e| Error::Parse { line, message: format!("bad date {:?}: {e}", fields[5]) })?;
        let time = NaiveTime::parse_from_str(fields[6], "%H:%M:%S")
            .map_err(|e| Error::Parse { line, message: format!("bad time {:?}: {e}", fields[6]) })?;
        let t = date.and_time(time).and_utc().timestamp() as f64;
        points.push(RawPoint::new(lat, lon, t));
    }
    Ok(points)
}

/// Parses a generic `user_id,timestamp,lat,lon` CSV (with header) into
/// per-user trajectories sorted by timestamp, keyed by user id.
pub fn parse_points_csv<R: std::io::Read>(reader: R) -> Result<BTreeMap<String, Vec<RawPoint>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["user_id", "timestamp", "lat", "lon"];
    if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}", expected.join(",")),
        });
    }
    let mut users: BTreeMap<String, Vec<RawPoint>> = BTreeMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        let number = |i: usize, name: &str| -> Result<f64> {
            record
                .get(i)
                .and_then(|f| f.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, message: format!("bad {name}") })
        };
        let t = number(1, "timestamp")?;
        let lat = number(2, "latitude")?;
        let lon = number(3, "longitude")?;
        check_coordinates(lat, lon, line)?;
        users
            .entry(record[0].to_string())
            .or_default()
            .push(RawPoint::new(lat, lon, t));
    }
    for points in users.values_mut() {
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    Ok(users)
}

fn check_projectable(points: &[RawPoint]) -> Result<()> {
    if let Some(p) = points.iter().find(|p| p.lat.abs() > 90.0 - POLE_MARGIN_DEG) {
        return Err(Error::invalid(format!("point at latitude {} is too close to a pole", p.lat)));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.lon), hi.max(p.lon)));
    if hi - lo > 180.0 {
        return Err(Error::invalid("trajectory crosses the antimeridian"));
    }
    Ok(())
}

/// Maps points to grid cells and re-encodes the cells densely in order of
/// first appearance. Timestamps are carried over.
pub fn discretize(points: &[RawPoint], grid: &GridSpec) -> Result<SymbolSequence> {
    if points.is_empty() {
        return Err(Error::invalid("cannot discretize an empty trajectory"));
    }
    GridSpec::new(grid.cell_size, grid.ref_lat)?;
    check_projectable(points)?;
    let cells = points.iter().map(|p| grid.cell_of(p));
    let timestamps = points.iter().map(|p| p.t).collect();
    SymbolSequence::encode(cells, Some(timestamps))
}

/// Dataset-wide cell index, so that symbol ids agree across users.
#[derive(Debug, Clone, Default)]
pub struct CellIndex {
    ids: HashMap<(i64, i64), u64>,
}

impl CellIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn id_of(&mut self, cell: (i64, i64)) -> u64 {
        let next = self.ids.len() as u64;
        *self.ids.entry(cell).or_insert(next)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn runs(symbols: &[Symbol], ts: &[f64]) -> Vec<Visit> {
    let mut visits: Vec<Visit> = Vec::new();
    for (&symbol, &t) in symbols.iter().zip(ts) {
        match visits.last_mut() {
            Some(last) if last.symbol == symbol => last.depart = t,
            _ => visits.push(Visit { symbol, arrive: t, depart: t }),
        }
    }
    visits
}

/// Collapses runs of equal symbols into visits, drops visits shorter than
/// `min_dwell` seconds and merges neighbours that become adjacent and equal.
pub fn extract_visits(seq: &SymbolSequence, min_dwell: f64) -> Result<Vec<Visit>> {
    let ts = seq
        .timestamps()
        .ok_or_else(|| Error::invalid("visit extraction needs timestamps"))?;
    let mut merged: Vec<Visit> = Vec::new();
    for visit in runs(seq.symbols(), ts) {
        if visit.dwell() < min_dwell {
            continue;
        }
        match merged.last_mut() {
            Some(last) if last.symbol == visit.symbol => last.depart = visit.depart,
            _ => merged.push(visit),
        }
    }
    Ok(merged)
}

/// Visit symbols as a densely encoded sequence stamped with arrival times.
pub fn visits_to_sequence(visits: &[Visit]) -> Result<SymbolSequence> {
    SymbolSequence::encode(
        visits.iter().map(|v| v.symbol),
        Some(visits.iter().map(|v| v.arrive).collect()),
    )
}

/// Keeps every `k`-th symbol starting at index 0 and re-encodes densely.
pub fn undersample(seq: &SymbolSequence, k: usize) -> Result<SymbolSequence> {
    if k == 0 {
        return Err(Error::invalid("undersampling factor must be at least 1"));
    }
    let symbols = seq.symbols().iter().step_by(k).copied();
    let timestamps = seq.timestamps().map(|ts| ts.iter().step_by(k).copied().collect());
    SymbolSequence::encode(symbols, timestamps)
}

/// Inserts `k - 1` linearly interpolated points between consecutive points.
pub fn oversample(points: &[RawPoint], k: usize) -> Result<Vec<RawPoint>> {
    if k == 0 {
        return Err(Error::invalid("oversampling factor must be at least 1"));
    }
    if k == 1 {
        return Ok(points.to_vec());
    }
    if points.len() < 2 {
        return Err(Error::invalid("oversampling needs at least two points"));
    }
    let mut out = Vec::with_capacity((points.len() - 1) * k + 1);
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for j in 0..k {
            let f = j as f64 / k as f64;
            out.push(RawPoint::new(
                a.lat + f * (b.lat - a.lat),
                a.lon + f * (b.lon - a.lon),
                a.t + f * (b.t - a.t),
            ));
        }
    }
    out.push(*points.last().unwrap());
    Ok(out)
}
