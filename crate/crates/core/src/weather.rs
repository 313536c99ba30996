//! Hourly precipitation records binarized into event streams.
//!
//! Input is a flat CSV with the header
//! `station_id,latitude,longitude,timestamp_iso8601,precip_mm`, one row
//! per station-hour. A station's process is 1 for an hour when any of
//! its rows in that hour reports strictly positive precipitation. The
//! time axis is the contiguous hour range spanned by the parsed rows;
//! hours with no record count as missing and read as 0 (no rain), and a
//! station missing more than 5% of the axis is dropped.

use std::collections::BTreeMap;
use std::io::BufRead;

use crate::bits::BitVec;
use crate::ensemble::TableSource;

pub const WEATHER_HEADER: &str = "station_id,latitude,longitude,timestamp_iso8601,precip_mm";

/// Fraction of missing hours above which a station is dropped.
const MAX_MISSING_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: String,
    pub latitude: f64,
    pub longitude: f64,
}

/// Binary rain/no-rain matrix over a uniform, contiguous hour axis.
#[derive(Debug, Clone)]
pub struct WeatherTable {
    pub stations: Vec<Station>,
    /// Hours in the common axis.
    pub n_hours: usize,
    /// Absolute index of the first hour (hours since 1970-01-01T00).
    pub first_hour: i64,
    rows: Vec<BitVec>,
    /// Input rows that failed to parse and were skipped.
    pub skipped_rows: usize,
    /// Stations dropped for exceeding the missing-hours budget.
    pub dropped_stations: Vec<String>,
}

#[derive(Debug)]
pub enum WeatherError {
    Io(std::io::Error),
    BadHeader { found: String },
    NoData,
    BadBand { lo: f64, hi: f64 },
    EmptySelection { lo: f64, hi: f64 },
}

impl std::fmt::Display for WeatherError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeatherError::Io(e) => write!(f, "weather input: {e}"),
            WeatherError::BadHeader { found } => {
                write!(f, "expected header `{WEATHER_HEADER}`, found `{found}`")
            }
            WeatherError::NoData => write!(f, "no parseable station-hour rows"),
            WeatherError::BadBand { lo, hi } => {
                write!(f, "rate band [{lo}, {hi}] must lie within [0, 1]")
            }
            WeatherError::EmptySelection { lo, hi } => {
                write!(f, "no station has an event rate within [{lo}, {hi}]")
            }
        }
    }
}

impl std::error::Error for WeatherError {}

impl From<std::io::Error> for WeatherError {
    fn from(e: std::io::Error) -> Self {
        WeatherError::Io(e)
    }
}

/// Days from 1970-01-01 for a civil date (proleptic Gregorian).
fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m as i64 + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Hour index for timestamps shaped `YYYY-MM-DD[T ]HH[:MM[:SS]][Z]`.
/// Minutes and seconds are ignored; the record lands in its hour bucket.
fn parse_hour_index(ts: &str) -> Option<i64> {
    let ts = ts.trim();
    let bytes = ts.as_bytes();
    if bytes.len() < 13 {
        return None;
    }
    let year: i64 = ts.get(0..4)?.parse().ok()?;
    if bytes[4] != b'-' || bytes[7] != b'-' {
        return None;
    }
    let month: u32 = ts.get(5..7)?.parse().ok()?;
    let day: u32 = ts.get(8..10)?.parse().ok()?;
    if bytes[10] != b'T' && bytes[10] != b' ' {
        return None;
    }
    let hour: u32 = ts.get(11..13)?.parse().ok()?;
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) || hour > 23 {
        return None;
    }
    Some(days_from_civil(year, month, day) * 24 + hour as i64)
}

struct StationAcc {
    latitude: f64,
    longitude: f64,
    // hour index -> rained this hour
    hours: BTreeMap<i64, bool>,
}

/// Parse and binarize hourly precipitation records.
///
/// Unparseable rows are counted and skipped rather than failing the
/// whole ingest; a bad header or a fully unparseable file is an error.
pub fn binarize_weather<R: BufRead>(reader: R) -> Result<WeatherTable, WeatherError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(WeatherError::NoData),
    };
    if header.trim() != WEATHER_HEADER {
        return Err(WeatherError::BadHeader {
            found: header.trim().to_string(),
        });
    }

    let mut acc: BTreeMap<String, StationAcc> = BTreeMap::new();
    let mut skipped_rows = 0usize;
    for line in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let parsed = (|| {
            let id = fields.next()?.trim();
            let lat: f64 = fields.next()?.trim().parse().ok()?;
            let lon: f64 = fields.next()?.trim().parse().ok()?;
            let hour = parse_hour_index(fields.next()?)?;
            let precip: f64 = fields.next()?.trim().parse().ok()?;
            if fields.next().is_some() || !precip.is_finite() || precip < 0.0 {
                return None;
            }
            Some((id.to_string(), lat, lon, hour, precip))
        })();
        match parsed {
            Some((id, lat, lon, hour, precip)) => {
                let entry = acc.entry(id).or_insert_with(|| StationAcc {
                    latitude: lat,
                    longitude: lon,
                    hours: BTreeMap::new(),
                });
                let rained = entry.hours.entry(hour).or_insert(false);
                *rained |= precip > 0.0;
            }
            None => skipped_rows += 1,
        }
    }
    if acc.is_empty() {
        return Err(WeatherError::NoData);
    }

    let first_hour = acc
        .values()
        .filter_map(|s| s.hours.keys().next())
        .min()
        .copied()
        .ok_or(WeatherError::NoData)?;
    let last_hour = acc
        .values()
        .filter_map(|s| s.hours.keys().next_back())
        .max()
        .copied()
        .ok_or(WeatherError::NoData)?;
    let n_hours = (last_hour - first_hour + 1) as usize;

    let mut stations = Vec::new();
    let mut rows = Vec::new();
    let mut dropped_stations = Vec::new();
    for (id, st) in acc {
        let missing = n_hours - st.hours.len();
        if missing as f64 > MAX_MISSING_FRACTION * n_hours as f64 {
            dropped_stations.push(id);
            continue;
        }
        let mut row = BitVec::zeros(n_hours);
        for (&hour, &rained) in &st.hours {
            if rained {
                row.set((hour - first_hour) as usize, true);
            }
        }
        stations.push(Station {
            id,
            latitude: st.latitude,
            longitude: st.longitude,
        });
        rows.push(row);
    }
    Ok(WeatherTable {
        stations,
        n_hours,
        first_hour,
        rows,
        skipped_rows,
        dropped_stations,
    })
}

impl WeatherTable {
    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn row(&self, station: usize) -> &BitVec {
        &self.rows[station]
    }

    /// Empirical event rate of one station.
    pub fn event_rate(&self, station: usize) -> f64 {
        self.rows[station].count_ones() as f64 / self.n_hours as f64
    }

    pub fn to_source(&self) -> TableSource {
        TableSource::from_rows(&self.rows)
    }
}

/// Keep only stations whose event rate lies in [lo, hi]; the result
/// stays ordered by station id.
pub fn select_stations(
    table: &WeatherTable,
    lo: f64,
    hi: f64,
) -> Result<WeatherTable, WeatherError> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(WeatherError::BadBand { lo, hi });
    }
    let mut stations = Vec::new();
    let mut rows = Vec::new();
    for i in 0..table.n_stations() {
        let rate = table.event_rate(i);
        if rate >= lo && rate <= hi {
            stations.push(table.stations[i].clone());
            rows.push(table.rows[i].clone());
        }
    }
    if stations.is_empty() {
        return Err(WeatherError::EmptySelection { lo, hi });
    }
    Ok(WeatherTable {
        stations,
        n_hours: table.n_hours,
        first_hour: table.first_hour,
        rows,
        skipped_rows: table.skipped_rows,
        dropped_stations: table.dropped_stations.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn table_from(text: &str) -> Result<WeatherTable, WeatherError> {
        binarize_weather(Cursor::new(text.as_bytes()))
    }

    #[test]
    fn hour_index_matches_known_dates() {
        assert_eq!(parse_hour_index("1970-01-01T00:00:00Z"), Some(0));
        assert_eq!(parse_hour_index("1970-01-02T01:00:00"), Some(25));
        // 2015-01-01 is 16436 days after the epoch.
        assert_eq!(parse_hour_index("2015-01-01T00:00:00Z"), Some(16_436 * 24));
        assert_eq!(parse_hour_index("2015-01-01 13:30"), Some(16_436 * 24 + 13));
        assert_eq!(parse_hour_index("2015-13-01T00:00:00"), None);
        assert_eq!(parse_hour_index("garbage"), None);
    }

    #[test]
    fn hand_built_three_station_fixture() {
        // Axis: 4 hours. Oracle bit matrix written by hand:
        //   alpha: rain at hours 0 and 2       -> 1 0 1 0
        //   bravo: trace 0.0 never counts      -> 0 0 0 0
        //   carol: rain only at hour 3         -> 0 0 0 1
        let text = "\
station_id,latitude,longitude,timestamp_iso8601,precip_mm
alpha,40.0,-105.0,2015-01-01T00:00:00Z,1.2
alpha,40.0,-105.0,2015-01-01T01:00:00Z,0.0
alpha,40.0,-105.0,2015-01-01T02:00:00Z,0.4
alpha,40.0,-105.0,2015-01-01T03:00:00Z,0.0
bravo,41.0,-104.0,2015-01-01T00:00:00Z,0.0
bravo,41.0,-104.0,2015-01-01T01:00:00Z,0.0
bravo,41.0,-104.0,2015-01-01T02:00:00Z,0.0
bravo,41.0,-104.0,2015-01-01T03:00:00Z,0.0
carol,42.0,-103.0,2015-01-01T00:00:00Z,0.0
carol,42.0,-103.0,2015-01-01T01:00:00Z,0.0
carol,42.0,-103.0,2015-01-01T02:00:00Z,0.0
carol,42.0,-103.0,2015-01-01T03:00:00Z,2.5
";
        let t = table_from(text).unwrap();
        assert_eq!(t.n_stations(), 3);
        assert_eq!(t.n_hours, 4);
        assert_eq!(t.skipped_rows, 0);
        let bits = |i: usize| (0..4).map(|h| t.row(i).get(h)).collect::<Vec<_>>();
        assert_eq!(bits(0), vec![true, false, true, false]);
        assert_eq!(bits(1), vec![false, false, false, false]);
        assert_eq!(bits(2), vec![false, false, false, true]);
    }

    #[test]
    fn always_raining_station_is_all_ones() {
        let text = "\
station_id,latitude,longitude,timestamp_iso8601,precip_mm
wet,10.0,10.0,2015-06-01T00:00:00Z,3.0
wet,10.0,10.0,2015-06-01T01:00:00Z,1.0
wet,10.0,10.0,2015-06-01T02:00:00Z,0.2
";
        let t = table_from(text).unwrap();
        assert_eq!(t.row(0).count_ones(), 3);
        assert!((t.event_rate(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unparseable_rows_are_counted_and_skipped() {
        let text = "\
station_id,latitude,longitude,timestamp_iso8601,precip_mm
ok,10.0,10.0,2015-06-01T00:00:00Z,1.0
broken,not_a_number,10.0,2015-06-01T00:00:00Z,1.0
ok,10.0,10.0,bad_timestamp,1.0
ok,10.0,10.0,2015-06-01T01:00:00Z,-4.0
";
        let t = table_from(text).unwrap();
        assert_eq!(t.skipped_rows, 3);
        assert_eq!(t.n_stations(), 1);
    }

    #[test]
    fn gappy_station_is_dropped() {
        // Axis spans 100 hours via the dense station; `gappy` has only
        // one record (99% missing) and must be dropped.
        let mut text = String::from(WEATHER_HEADER);
        text.push('\n');
        for h in 0..100usize {
            text.push_str(&format!(
                "dense,10.0,10.0,2015-06-{:02}T{:02}:00:00Z,0.1\n",
                h / 24 + 1,
                h % 24
            ));
        }
        text.push_str("gappy,11.0,11.0,2015-06-01T00:00:00Z,1.0\n");
        let t = table_from(&text).unwrap();
        assert_eq!(t.dropped_stations, vec!["gappy".to_string()]);
        assert_eq!(t.n_stations(), 1);
        assert_eq!(t.stations[0].id, "dense");
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(matches!(
            table_from("id,lat\n"),
            Err(WeatherError::BadHeader { .. })
        ));
    }

    #[test]
    fn band_selection_keeps_only_matching_rates() {
        // Rates over a 100-hour axis: 0.01, 0.05, 0.5.
        let mut text = String::from(WEATHER_HEADER);
        text.push('\n');
        for (station, wet_hours) in [("a", 1usize), ("b", 5), ("c", 50)] {
            for h in 0..100usize {
                let precip = if h < wet_hours { 1.0 } else { 0.0 };
                text.push_str(&format!(
                    "{station},10.0,10.0,2015-06-{:02}T{:02}:00:00Z,{precip}\n",
                    h / 24 + 1,
                    h % 24
                ));
            }
        }
        let t = table_from(&text).unwrap();
        assert_eq!(t.n_stations(), 3);

        let selected = select_stations(&t, 0.02, 0.1).unwrap();
        assert_eq!(selected.n_stations(), 1);
        assert_eq!(selected.stations[0].id, "b");

        let identity = select_stations(&t, 0.0, 1.0).unwrap();
        assert_eq!(identity.n_stations(), 3);

        assert!(matches!(
            select_stations(&t, 0.9, 0.95),
            Err(WeatherError::EmptySelection { .. })
        ));
        assert!(matches!(
            select_stations(&t, 0.5, 0.2),
            Err(WeatherError::BadBand { .. })
        ));
    }
}
