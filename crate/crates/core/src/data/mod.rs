//! Smart-meter and temperature ingestion, user filtering, alignment and
//! min-max scaling.

mod adf;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::time::Hour;

pub use adf::{adf_critical_value_99, adf_test, adf_test_values, AdfResult};

/// Default threshold above which a single hourly reading counts as corrupt.
pub const DEFAULT_MAX_KWH: f64 = 50.0;
/// Longest run of missing temperature hours that is filled by interpolation.
pub const DEFAULT_MAX_INTERP_GAP: usize = 3;

pub const METER_HEADER: [&str; 3] = ["user_id", "timestamp", "consumption_kwh"];
pub const TEMPERATURE_HEADER: [&str; 3] = ["station_id", "timestamp", "temp_c"];
pub const METADATA_HEADER: [&str; 4] = ["user_id", "has_pv", "has_automation", "signup_date"];

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: duplicate reading for '{key}' at {timestamp}")]
    DuplicateKey { line: u64, key: String, timestamp: Hour },
    #[error("line {line}: timestamp {timestamp} for '{key}' is earlier than the previous row")]
    NonMonotone { line: u64, key: String, timestamp: Hour },
    #[error("user '{0}' has a constant consumption series, min-max scaling is undefined")]
    DegenerateScale(String),
    #[error("user '{0}' has no hours overlapping the temperature record")]
    EmptyOverlap(String),
    #[error("temperature file has stations {0:?}; choose one explicitly")]
    AmbiguousStation(Vec<String>),
    #[error("unknown temperature station '{0}'")]
    UnknownStation(String),
    #[error("insufficient data: need more than {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
}

/// Per-user metadata from the user-metadata CSV.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UserMeta {
    pub has_pv: bool,
    pub has_automation: bool,
    pub signup: Option<Hour>,
}

/// Raw hourly kWh readings keyed by user, each sorted by timestamp.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawReadingTable {
    pub readings: BTreeMap<String, Vec<(Hour, f64)>>,
    pub metadata: BTreeMap<String, UserMeta>,
}

impl RawReadingTable {
    pub fn with_metadata(mut self, metadata: BTreeMap<String, UserMeta>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn meta(&self, user_id: &str) -> UserMeta {
        self.metadata.get(user_id).copied().unwrap_or_default()
    }

    pub fn n_rows(&self) -> usize {
        self.readings.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemperatureTable {
    pub stations: BTreeMap<String, Vec<(Hour, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp: Hour,
    /// Min-max scaled consumption in [0, 1].
    pub consumption: f64,
    /// Standardised temperature.
    pub temperature: f64,
}

/// What is needed to map scaled values back to kWh and degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub min: f64,
    pub max: f64,
    pub temp_mean: f64,
    pub temp_std: f64,
}

impl ScalingRecord {
    pub fn kwh(&self, scaled: f64) -> f64 {
        self.min + scaled * (self.max - self.min)
    }

    pub fn celsius(&self, z: f64) -> f64 {
        self.temp_mean + z * self.temp_std
    }
}

/// A gap-free hourly series of scaled consumption and temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionSeries {
    pub user_id: String,
    /// Index of this piece when a user's record had to be split.
    pub segment: usize,
    samples: Vec<Sample>,
    pub scaling: ScalingRecord,
}

impl ConsumptionSeries {
    /// Validates the gap-free, [0, 1] and scaling invariants.
    pub fn new(user_id: impl Into<String>, samples: Vec<Sample>, scaling: ScalingRecord) -> Result<Self, DataError> {
        if samples.is_empty() {
            return Err(DataError::InvalidSeries("empty series".into()));
        }
        for w in samples.windows(2) {
            if w[1].timestamp.0 != w[0].timestamp.0 + 1 {
                return Err(DataError::InvalidSeries(format!(
                    "gap between {} and {}",
                    w[0].timestamp, w[1].timestamp
                )));
            }
        }
        if let Some(s) = samples
            .iter()
            .find(|s| !(0.0..=1.0).contains(&s.consumption) || !s.temperature.is_finite())
        {
            return Err(DataError::InvalidSeries(format!(
                "sample at {} out of range",
                s.timestamp
            )));
        }
        if !(scaling.max > scaling.min) {
            return Err(DataError::InvalidSeries("scaling max must exceed min".into()));
        }
        Ok(Self {
            user_id: user_id.into(),
            segment: 0,
            samples,
            scaling,
        })
    }

    /// Scales raw kWh and degrees starting at `start` into a series.
    pub fn from_raw(user_id: impl Into<String>, start: Hour, kwh: &[f64], temp_c: &[f64]) -> Result<Self, DataError> {
        let user_id = user_id.into();
        assert_eq!(kwh.len(), temp_c.len(), "consumption and temperature lengths differ");
        if kwh.is_empty() {
            return Err(DataError::EmptyOverlap(user_id));
        }
        let (min, max) = kwh.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if !(max > min) {
            return Err(DataError::DegenerateScale(user_id));
        }
        let n = temp_c.len() as f64;
        let temp_mean = temp_c.iter().sum::<f64>() / n;
        let var = temp_c.iter().map(|t| (t - temp_mean).powi(2)).sum::<f64>() / n;
        // constant temperature: z-scores collapse to zero
        let temp_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let samples = kwh
            .iter()
            .zip(temp_c)
            .enumerate()
            .map(|(i, (&y, &t))| Sample {
                timestamp: start.offset(i as i64),
                consumption: (y - min) / (max - min),
                temperature: (t - temp_mean) / temp_std,
            })
            .collect();
        Self::new(
            user_id,
            samples,
            ScalingRecord {
                min,
                max,
                temp_mean,
                temp_std,
            },
        )
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> Hour {
        self.samples[0].timestamp
    }

    pub fn end(&self) -> Hour {
        self.samples[self.samples.len() - 1].timestamp
    }

    pub fn consumption(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.consumption).collect()
    }

    pub fn temperature(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.temperature).collect()
    }

    /// Index of `t` in the series, if covered.
    pub fn index_of(&self, t: Hour) -> Option<usize> {
        let i = t.0 - self.start().0;
        (i >= 0 && (i as usize) < self.len()).then_some(i as usize)
    }
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), DataError> {
    let header = rdr.headers().map_err(|e| DataError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(DataError::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), found.join(",")),
        });
    }
    Ok(())
}

fn records<R: Read>(
    rdr: &mut csv::Reader<R>,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord), DataError>> + '_ {
    rdr.records().map(|r| {
        r.map(|rec| (rec.position().map_or(0, |p| p.line()), rec))
            .map_err(|e| DataError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })
    })
}

fn parse_hour(line: u64, s: &str) -> Result<Hour, DataError> {
    Hour::parse(s).map_err(|e| DataError::Parse {
        line,
        message: e.to_string(),
    })
}

fn parse_f64(line: u64, field: &str, s: &str) -> Result<f64, DataError> {
    let v: f64 = s.parse().map_err(|_| DataError::Parse {
        line,
        message: format!("{field}: '{s}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(DataError::Parse {
            line,
            message: format!("{field}: non-finite value"),
        });
    }
    Ok(v)
}

fn parse_bool(line: u64, field: &str, s: &str) -> Result<bool, DataError> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(DataError::Parse {
            line,
            message: format!("{field}: '{s}' is not a boolean"),
        }),
    }
}

/// Appends `(t, v)` to `key`'s rows; rows of one key must arrive in strictly
/// increasing time order.
fn push_keyed(
    map: &mut BTreeMap<String, Vec<(Hour, f64)>>,
    line: u64,
    key: &str,
    t: Hour,
    v: f64,
) -> Result<(), DataError> {
    let rows = map.entry(key.to_string()).or_default();
    if let Some(&(last, _)) = rows.last() {
        if t == last {
            return Err(DataError::DuplicateKey {
                line,
                key: key.to_string(),
                timestamp: t,
            });
        }
        if t < last {
            let duplicate = rows.binary_search_by_key(&t, |r| r.0).is_ok();
            return Err(if duplicate {
                DataError::DuplicateKey {
                    line,
                    key: key.to_string(),
                    timestamp: t,
                }
            } else {
                DataError::NonMonotone {
                    line,
                    key: key.to_string(),
                    timestamp: t,
                }
            });
        }
    }
    rows.push((t, v));
    Ok(())
}

/// Parses a meter CSV (`user_id,timestamp,consumption_kwh`).
pub fn read_meter<R: Read>(r: R) -> Result<RawReadingTable, DataError> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &METER_HEADER)?;
    let mut table = RawReadingTable::default();
    for rec in records(&mut rdr) {
        let (line, rec) = rec?;
        let t = parse_hour(line, &rec[1])?;
        let kwh = parse_f64(line, "consumption_kwh", &rec[2])?;
        if kwh < 0.0 {
            return Err(DataError::Parse {
                line,
                message: format!("consumption_kwh: negative reading {kwh}"),
            });
        }
        push_keyed(&mut table.readings, line, &rec[0], t, kwh)?;
    }
    Ok(table)
}

/// Parses a temperature CSV (`station_id,timestamp,temp_c`).
pub fn read_temperature<R: Read>(r: R) -> Result<TemperatureTable, DataError> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &TEMPERATURE_HEADER)?;
    let mut table = TemperatureTable::default();
    for rec in records(&mut rdr) {
        let (line, rec) = rec?;
        let t = parse_hour(line, &rec[1])?;
        let temp = parse_f64(line, "temp_c", &rec[2])?;
        push_keyed(&mut table.stations, line, &rec[0], t, temp)?;
    }
    Ok(table)
}

/// Parses a user-metadata CSV (`user_id,has_pv,has_automation,signup_date`).
/// An empty signup date means the user never signed up.
pub fn read_metadata<R: Read>(r: R) -> Result<BTreeMap<String, UserMeta>, DataError> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &METADATA_HEADER)?;
    let mut out = BTreeMap::new();
    for rec in records(&mut rdr) {
        let (line, rec) = rec?;
        let signup = if rec[3].is_empty() {
            None
        } else {
            Some(parse_hour(line, &rec[3])?)
        };
        let meta = UserMeta {
            has_pv: parse_bool(line, "has_pv", &rec[1])?,
            has_automation: parse_bool(line, "has_automation", &rec[2])?,
            signup,
        };
        if out.insert(rec[0].to_string(), meta).is_some() {
            return Err(DataError::Parse {
                line,
                message: format!("duplicate metadata for user '{}'", &rec[0]),
            });
        }
    }
    Ok(out)
}

pub fn load_readings(meter_path: &Path, temp_path: &Path) -> Result<(RawReadingTable, TemperatureTable), DataError> {
    let meter = read_meter(open(meter_path)?)?;
    let temps = read_temperature(open(temp_path)?)?;
    Ok((meter, temps))
}

pub fn load_metadata(path: &Path) -> Result<BTreeMap<String, UserMeta>, DataError> {
    read_metadata(open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    Photovoltaic,
    CorruptReading { max_kwh: f64, at: Hour },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub user_id: String,
    #[serde(flatten)]
    pub reason: ExclusionReason,
}

/// Users that [`filter_users`] would remove, with the reason.
pub fn exclusions(table: &RawReadingTable, max_kwh: f64) -> Vec<Exclusion> {
    assert!(max_kwh > 0.0, "max_kwh must be positive");
    table
        .readings
        .iter()
        .filter_map(|(user, rows)| {
            let reason = if table.meta(user).has_pv {
                ExclusionReason::Photovoltaic
            } else {
                let &(at, _) = rows.iter().find(|(_, v)| *v > max_kwh)?;
                ExclusionReason::CorruptReading { max_kwh, at }
            };
            Some(Exclusion {
                user_id: user.clone(),
                reason,
            })
        })
        .collect()
}

/// Drops PV users and users with any reading above `max_kwh`.
pub fn filter_users(table: &RawReadingTable, max_kwh: f64) -> RawReadingTable {
    let excluded: Vec<String> = exclusions(table, max_kwh).into_iter().map(|e| e.user_id).collect();
    let mut out = table.clone();
    for user in &excluded {
        out.readings.remove(user);
    }
    out
}

#[derive(Debug, Clone)]
pub struct AlignOptions {
    /// Station to align against; the only station when `None`.
    pub station: Option<String>,
    pub max_interp_gap: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            station: None,
            max_interp_gap: DEFAULT_MAX_INTERP_GAP,
        }
    }
}

fn station_rows<'a>(temps: &'a TemperatureTable, opts: &AlignOptions) -> Result<&'a [(Hour, f64)], DataError> {
    match &opts.station {
        Some(id) => temps
            .stations
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| DataError::UnknownStation(id.clone())),
        None => {
            let mut it = temps.stations.values();
            match (it.next(), it.next()) {
                (Some(rows), None) => Ok(rows),
                (None, _) => Ok(&[]),
                _ => Err(DataError::AmbiguousStation(temps.stations.keys().cloned().collect())),
            }
        }
    }
}

/// Temperature at `t`: the reading itself, or a linear interpolation when `t`
/// sits inside a run of at most `max_gap` missing hours.
fn temperature_at(rows: &[(Hour, f64)], t: Hour, max_gap: usize) -> Option<f64> {
    match rows.binary_search_by_key(&t, |r| r.0) {
        Ok(i) => Some(rows[i].1),
        Err(i) => {
            if i == 0 || i == rows.len() {
                return None;
            }
            let (t0, v0) = rows[i - 1];
            let (t1, v1) = rows[i];
            let missing = (t1.0 - t0.0 - 1) as usize;
            if missing > max_gap {
                return None;
            }
            let frac = (t.0 - t0.0) as f64 / (t1.0 - t0.0) as f64;
            Some(v0 + (v1 - v0) * frac)
        }
    }
}

/// Aligns one user's readings with temperature and scales each gap-free
/// piece. Pieces shorter than two hours are dropped.
pub fn align_user(
    user_id: &str,
    readings: &[(Hour, f64)],
    temps: &[(Hour, f64)],
    max_interp_gap: usize,
) -> Result<Vec<ConsumptionSeries>, DataError> {
    let mut pieces: Vec<(Hour, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut prev: Option<Hour> = None;
    for &(t, kwh) in readings {
        let Some(temp) = temperature_at(temps, t, max_interp_gap) else {
            prev = None;
            continue;
        };
        match (prev, pieces.last_mut()) {
            (Some(p), Some(piece)) if t.0 == p.0 + 1 => {
                piece.1.push(kwh);
                piece.2.push(temp);
            }
            _ => pieces.push((t, vec![kwh], vec![temp])),
        }
        prev = Some(t);
    }
    if pieces.is_empty() {
        return Err(DataError::EmptyOverlap(user_id.to_string()));
    }
    pieces
        .into_iter()
        .filter(|p| p.1.len() >= 2)
        .enumerate()
        .map(|(segment, (start, kwh, temp))| {
            let mut s = ConsumptionSeries::from_raw(user_id, start, &kwh, &temp)?;
            s.segment = segment;
            Ok(s)
        })
        .collect()
}

pub fn align_and_scale(table: &RawReadingTable, temps: &TemperatureTable) -> Result<Vec<ConsumptionSeries>, DataError> {
    align_and_scale_with(table, temps, &AlignOptions::default())
}

pub fn align_and_scale_with(
    table: &RawReadingTable,
    temps: &TemperatureTable,
    opts: &AlignOptions,
) -> Result<Vec<ConsumptionSeries>, DataError> {
    let rows = station_rows(temps, opts)?;
    let mut out = Vec::new();
    for (user, readings) in &table.readings {
        out.extend(align_user(user, readings, rows, opts.max_interp_gap)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(hour: u32) -> Hour {
        Hour::from_ymdh(2013, 6, 1, 0).unwrap().offset(hour as i64)
    }

    #[test]
    fn parses_well_formed_meter_file() {
        let csv = "user_id,timestamp,consumption_kwh\n\
                   u1,2013-06-01T00:00:00Z,1.5\n\
                   u1,2013-06-01T01:00:00Z,2.0\n";
        let t = read_meter(csv.as_bytes()).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.readings["u1"], vec![(h(0), 1.5), (h(1), 2.0)]);
    }

    #[test]
    fn duplicate_key_reports_line() {
        let csv = "user_id,timestamp,consumption_kwh\n\
                   u1,2013-06-01T00:00:00Z,1.5\n\
                   u1,2013-06-01T00:00:00Z,2.0\n";
        match read_meter(csv.as_bytes()) {
            Err(DataError::DuplicateKey { line, key, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(key, "u1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_order_rows_are_rejected() {
        let csv = "user_id,timestamp,consumption_kwh\n\
                   u1,2013-06-01T02:00:00Z,1.5\n\
                   u1,2013-06-01T01:00:00Z,2.0\n";
        assert!(matches!(
            read_meter(csv.as_bytes()),
            Err(DataError::NonMonotone { line: 3, .. })
        ));
        // an earlier duplicate is still reported as a duplicate
        let csv = "user_id,timestamp,consumption_kwh\n\
                   u1,2013-06-01T01:00:00Z,1.5\n\
                   u1,2013-06-01T02:00:00Z,1.5\n\
                   u1,2013-06-01T01:00:00Z,2.0\n";
        assert!(matches!(
            read_meter(csv.as_bytes()),
            Err(DataError::DuplicateKey { line: 4, .. })
        ));
    }

    #[test]
    fn negative_consumption_is_rejected() {
        let csv = "user_id,timestamp,consumption_kwh\nu1,2013-06-01T00:00:00Z,-1.0\n";
        assert!(matches!(
            read_meter(csv.as_bytes()),
            Err(DataError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let csv = "user,timestamp,kwh\nu1,2013-06-01T00:00:00Z,1.0\n";
        assert!(matches!(
            read_meter(csv.as_bytes()),
            Err(DataError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn metadata_parses_optional_signup() {
        let csv = "user_id,has_pv,has_automation,signup_date\n\
                   a,false,true,2013-07-01\n\
                   b,true,false,\n";
        let m = read_metadata(csv.as_bytes()).unwrap();
        assert!(m["a"].has_automation);
        assert_eq!(m["a"].signup, Hour::from_ymdh(2013, 7, 1, 0));
        assert!(m["b"].has_pv);
        assert_eq!(m["b"].signup, None);
    }

    fn three_user_table() -> RawReadingTable {
        let mut t = RawReadingTable::default();
        t.readings.insert("normal".into(), vec![(h(0), 1.0), (h(1), 2.0)]);
        t.readings.insert("pv".into(), vec![(h(0), 1.0), (h(1), 2.0)]);
        t.readings
            .insert("spike".into(), vec![(h(0), 1.0), (h(1), 500.0), (h(2), 1.0)]);
        t.metadata.insert(
            "pv".into(),
            UserMeta {
                has_pv: true,
                ..Default::default()
            },
        );
        t
    }

    #[test]
    fn filter_removes_pv_and_corrupt_users() {
        let t = three_user_table();
        let f = filter_users(&t, 50.0);
        assert_eq!(f.readings.keys().collect::<Vec<_>>(), vec!["normal"]);
        assert_eq!(f.readings["normal"], t.readings["normal"]);
        let ex = exclusions(&t, 50.0);
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].reason, ExclusionReason::Photovoltaic);
        assert!(matches!(ex[1].reason, ExclusionReason::CorruptReading { at, .. } if at == h(1)));
    }

    #[test]
    fn filter_is_noop_on_clean_table() {
        let mut t = three_user_table();
        t.readings.remove("pv");
        t.readings.remove("spike");
        assert_eq!(filter_users(&t, 50.0), t);
    }

    #[test]
    fn filter_is_idempotent() {
        let t = three_user_table();
        let once = filter_users(&t, 50.0);
        assert_eq!(filter_users(&once, 50.0), once);
    }

    fn temps(rows: Vec<(Hour, f64)>) -> TemperatureTable {
        let mut t = TemperatureTable::default();
        t.stations.insert("s".into(), rows);
        t
    }

    #[test]
    fn two_point_scaling() {
        let mut t = RawReadingTable::default();
        t.readings.insert("u".into(), vec![(h(0), 2.0), (h(1), 4.0)]);
        let s = align_and_scale(&t, &temps(vec![(h(0), 10.0), (h(1), 10.0)])).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].consumption(), vec![0.0, 1.0]);
        // constant temperature: std replaced by 1, z-scores zero
        assert_eq!(s[0].temperature(), vec![0.0, 0.0]);
        assert_eq!(s[0].scaling.temp_std, 1.0);
    }

    #[test]
    fn interpolates_single_missing_temperature_hour() {
        let readings: Vec<_> = (0..24).map(|i| (h(i), 1.0 + (i % 5) as f64)).collect();
        let temp_rows: Vec<_> = (0..24).filter(|&i| i != 10).map(|i| (h(i), 2.0 * i as f64)).collect();
        let mut t = RawReadingTable::default();
        t.readings.insert("u".into(), readings);
        let s = align_and_scale(&t, &temps(temp_rows)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), 24);
        // hand value: neighbours 18 and 22 -> 20 degrees
        let z = s[0].samples()[10].temperature;
        assert!((s[0].scaling.celsius(z) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn long_temperature_gap_splits_series() {
        let readings: Vec<_> = (0..24).map(|i| (h(i), (i % 3) as f64)).collect();
        let temp_rows: Vec<_> = (0..24)
            .filter(|&i| !(8..12).contains(&i))
            .map(|i| (h(i), i as f64))
            .collect();
        let mut t = RawReadingTable::default();
        t.readings.insert("u".into(), readings);
        let s = align_and_scale(&t, &temps(temp_rows)).unwrap();
        assert_eq!(s.iter().map(|s| s.len()).collect::<Vec<_>>(), vec![8, 12]);
        assert_eq!(s[1].segment, 1);
        assert_eq!(s[1].start(), h(12));
    }

    #[test]
    fn degenerate_and_empty_cases() {
        let mut t = RawReadingTable::default();
        t.readings.insert("flat".into(), vec![(h(0), 3.0), (h(1), 3.0)]);
        assert!(matches!(
            align_and_scale(&t, &temps(vec![(h(0), 1.0), (h(1), 2.0)])),
            Err(DataError::DegenerateScale(_))
        ));
        let mut t = RawReadingTable::default();
        t.readings.insert("u".into(), vec![(h(0), 3.0), (h(1), 4.0)]);
        assert!(matches!(
            align_and_scale(&t, &temps(vec![(h(50), 1.0)])),
            Err(DataError::EmptyOverlap(_))
        ));
    }

    #[test]
    fn multiple_stations_need_a_choice() {
        let mut tt = temps(vec![(h(0), 1.0), (h(1), 2.0)]);
        tt.stations.insert("other".into(), vec![(h(0), 1.0)]);
        let mut t = RawReadingTable::default();
        t.readings.insert("u".into(), vec![(h(0), 3.0), (h(1), 4.0)]);
        assert!(matches!(align_and_scale(&t, &tt), Err(DataError::AmbiguousStation(_))));
        let opts = AlignOptions {
            station: Some("s".into()),
            ..Default::default()
        };
        assert_eq!(align_and_scale_with(&t, &tt, &opts).unwrap().len(), 1);
    }
}
