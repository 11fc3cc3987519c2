//! Dataset CSV reading and writing.
//!
//! Header: `speed_up_0..speed_up_10, speed_down_0..10, occ_up_*, occ_down_*,
//! vol_up_*, vol_down_*, weather, weekday, am_peak, pm_peak, label`.

use std::io::{Read, Write};
use std::path::Path;

use super::window::{Dataset, TrafficWindow, CONTEXT_NAMES, SERIES_NAMES};
use super::STEPS;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub fn dataset_header(with_label: bool) -> Vec<String> {
    let mut h: Vec<String> = SERIES_NAMES
        .iter()
        .flat_map(|name| (0..STEPS).map(move |t| format!("{name}_{t}")))
        .collect();
    h.extend(CONTEXT_NAMES.iter().map(|s| s.to_string()));
    if with_label {
        h.push("label".into());
    }
    h
}

fn header_error(found: &[String], with_label: bool) -> Error {
    let expected = dataset_header(with_label);
    let mut detail = None;
    for name in SERIES_NAMES {
        let prefix = format!("{name}_");
        let block: Vec<&String> = found.iter().filter(|c| c.starts_with(&prefix)).collect();
        let want: Vec<String> = (0..STEPS).map(|t| format!("{name}_{t}")).collect();
        if block.len() != STEPS || block.iter().zip(&want).any(|(a, b)| *a != b) {
            detail = Some(format!(
                "column block {name}: expected {name}_0..{name}_{} ({STEPS} columns), found {}",
                STEPS - 1,
                block.len()
            ));
            break;
        }
    }
    let detail =
        detail.unwrap_or_else(
            || match expected.iter().zip(found).position(|(a, b)| a != b) {
                Some(i) => format!(
                    "column {}: expected '{}', found '{}'",
                    i + 1,
                    expected[i],
                    found[i]
                ),
                None => format!("expected {} columns, found {}", expected.len(), found.len()),
            },
        );
    Error::Header {
        detail,
        expected: expected.join(","),
        found: found.join(","),
    }
}

fn parse_field<T: std::str::FromStr>(raw: &str, row: usize, column: &str) -> Result<T> {
    raw.trim().parse::<T>().map_err(|_| Error::Row {
        row,
        column: column.to_string(),
        message: format!("cannot parse '{raw}'"),
    })
}

fn parse_flag(raw: &str, row: usize, column: &str) -> Result<bool> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Row {
            row,
            column: column.to_string(),
            message: format!("expected 0 or 1, found '{other}'"),
        }),
    }
}

/// Read windows from CSV. When `label_optional` is set a header without
/// the `label` column is accepted and every window gets label 0.
/// Returns the windows and whether labels were present.
pub fn read_windows<R: Read>(reader: R, label_optional: bool) -> Result<(Dataset, bool)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let has_label = if found == dataset_header(true) {
        true
    } else if label_optional && found == dataset_header(false) {
        false
    } else {
        return Err(header_error(&found, true));
    };
    let names = dataset_header(has_label);

    let mut windows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != names.len() {
            return Err(Error::Row {
                row,
                column: "*".into(),
                message: format!(
                    "expected {} fields ({STEPS} per traffic block), found {}",
                    names.len(),
                    rec.len()
                ),
            });
        }
        let mut w = TrafficWindow {
            speed_up: [0.0; STEPS],
            speed_down: [0.0; STEPS],
            occ_up: [0.0; STEPS],
            occ_down: [0.0; STEPS],
            vol_up: [0.0; STEPS],
            vol_down: [0.0; STEPS],
            weather: 1,
            weekday: false,
            am_peak: false,
            pm_peak: false,
            label: 0,
        };
        let mut col = 0;
        for series in w.series_mut() {
            for v in series.iter_mut() {
                *v = parse_field(&rec[col], row, &names[col])?;
                col += 1;
            }
        }
        w.weather = parse_field(&rec[col], row, "weather")?;
        w.weekday = parse_flag(&rec[col + 1], row, "weekday")?;
        w.am_peak = parse_flag(&rec[col + 2], row, "am_peak")?;
        w.pm_peak = parse_flag(&rec[col + 3], row, "pm_peak")?;
        if has_label {
            w.label = u8::from(parse_flag(&rec[col + 4], row, "label")?);
        }
        w.check().map_err(|(column, message)| Error::Row {
            row,
            column,
            message,
        })?;
        windows.push(w);
    }
    Ok((Dataset::new(windows), has_label))
}

pub fn write_windows<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(dataset_header(true))?;
    let mut fields = Vec::with_capacity(71);
    for w in &ds.windows {
        fields.clear();
        for s in w.series() {
            fields.extend(s.iter().map(|v| v.to_string()));
        }
        fields.push(w.weather.to_string());
        for flag in [w.weekday, w.am_peak, w.pm_peak] {
            fields.push(u8::from(flag).to_string());
        }
        fields.push(w.label.to_string());
        wtr.write_record(&fields)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    load_windows(path, false).map(|(ds, _)| ds)
}

pub fn load_windows(path: impl AsRef<Path>, label_optional: bool) -> Result<(Dataset, bool)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_windows(std::io::BufReader::new(file), label_optional)
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_windows(ds, &mut buf)?;
    write_atomic(path, &buf)
}
