//! 20-second loop-detector readings and their per-minute aggregation.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const READING_INTERVAL_S: i64 = 20;
pub const READINGS_PER_MINUTE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawDetectorReading {
    pub timestamp_s: i64,
    /// mi/hr
    pub speed: f64,
    /// percent
    pub occupancy: f64,
    /// vehicles counted in the 20 s interval
    pub volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinuteAggregate {
    pub minute_start_s: i64,
    pub speed: f64,
    pub occupancy: f64,
    /// veh/min
    pub volume: f64,
}

/// Mean speed and occupancy, summed volume, per whole minute.
pub fn aggregate_to_minutes(readings: &[RawDetectorReading]) -> Result<Vec<MinuteAggregate>> {
    if readings.is_empty() {
        return Err(Error::invalid("no detector readings to aggregate"));
    }
    for (i, r) in readings.iter().enumerate() {
        if r.timestamp_s.rem_euclid(READING_INTERVAL_S) != 0 {
            return Err(Error::invalid(format!(
                "reading {i}: timestamp {} s is off the 20 s grid",
                r.timestamp_s
            )));
        }
        if !(r.speed >= 0.0 && r.volume >= 0.0 && (0.0..=100.0).contains(&r.occupancy)) {
            return Err(Error::invalid(format!(
                "reading {i} at {} s has out-of-range values",
                r.timestamp_s
            )));
        }
        if i > 0 && r.timestamp_s <= readings[i - 1].timestamp_s {
            return Err(Error::invalid(format!(
                "readings not strictly increasing at {} s",
                r.timestamp_s
            )));
        }
    }

    let mut out = Vec::new();
    let mut i = 0;
    while i < readings.len() {
        let start = readings[i].timestamp_s.div_euclid(60) * 60;
        let group: Vec<&RawDetectorReading> = readings[i..]
            .iter()
            .take_while(|r| r.timestamp_s.div_euclid(60) * 60 == start)
            .collect();
        for k in 0..READINGS_PER_MINUTE as i64 {
            let want = start + k * READING_INTERVAL_S;
            if !group.iter().any(|r| r.timestamp_s == want) {
                return Err(Error::invalid(format!(
                    "incomplete minute starting at {start} s: missing reading at {want} s"
                )));
            }
        }
        let n = READINGS_PER_MINUTE as f64;
        out.push(MinuteAggregate {
            minute_start_s: start,
            speed: group.iter().map(|r| r.speed).sum::<f64>() / n,
            occupancy: group.iter().map(|r| r.occupancy).sum::<f64>() / n,
            volume: group.iter().map(|r| r.volume).sum(),
        });
        i += group.len();
    }
    Ok(out)
}

pub const RAW_HEADER: [&str; 4] = ["timestamp_s", "speed", "occupancy", "volume_20s"];

pub fn read_raw_csv<R: Read>(reader: R) -> Result<Vec<RawDetectorReading>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != RAW_HEADER {
        return Err(Error::Header {
            detail: "raw detector CSV".into(),
            expected: RAW_HEADER.join(","),
            found: found.join(","),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != RAW_HEADER.len() {
            return Err(Error::Row {
                row,
                column: "*".into(),
                message: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        let num = |c: usize| -> Result<f64> {
            rec[c].parse::<f64>().map_err(|_| Error::Row {
                row,
                column: RAW_HEADER[c].into(),
                message: format!("cannot parse '{}'", &rec[c]),
            })
        };
        let timestamp_s = rec[0].parse::<i64>().map_err(|_| Error::Row {
            row,
            column: RAW_HEADER[0].into(),
            message: format!("cannot parse '{}'", &rec[0]),
        })?;
        out.push(RawDetectorReading {
            timestamp_s,
            speed: num(1)?,
            occupancy: num(2)?,
            volume: num(3)?,
        });
    }
    Ok(out)
}

pub fn load_raw_csv(path: impl AsRef<Path>) -> Result<Vec<RawDetectorReading>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_raw_csv(std::io::BufReader::new(f))
}
