//! Delimited-text observation tables.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, Timelike};

use crate::model::{Observation, ObservationTable};
use crate::{Error, Result};

/// A loaded table and the number of rows dropped for a missing or
/// non-positive concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTable {
    pub table: ObservationTable,
    pub dropped: usize,
}

enum Calendar {
    Columns(usize, usize, usize),
    Timestamp(usize),
}

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

/// `(dayno, hrofday, dayofweek)` of an ISO-8601 local timestamp, Sunday = 1.
pub fn calendar_fields(timestamp: &str) -> Result<(u32, u32, u32)> {
    let t = TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(timestamp.trim(), f).ok())
        .ok_or_else(|| Error::Parse(format!("unrecognised timestamp {timestamp:?}")))?;
    Ok((t.ordinal(), t.hour() + 1, t.weekday().num_days_from_sunday() + 1))
}

pub fn load_table(path: &Path) -> Result<LoadedTable> {
    read_table(std::fs::File::open(path)?)
}

/// Reads a comma-separated table with a header naming `CPC`, `site`, `long`,
/// `lat` and either `dayno`, `hrofday`, `dayofweek` or `timestamp`.
pub fn read_table<R: Read>(reader: R) -> Result<LoadedTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: HashMap<String, usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let col = |name: &str| header.get(name).copied().ok_or_else(|| Error::MissingColumn(name.to_string()));
    let cpc = col("CPC")?;
    let site = col("site")?;
    let long = col("long")?;
    let lat = col("lat")?;
    let calendar = match (col("dayno"), col("hrofday"), col("dayofweek"), col("timestamp")) {
        (Ok(d), Ok(h), Ok(w), _) => Calendar::Columns(d, h, w),
        (_, _, _, Ok(t)) => Calendar::Timestamp(t),
        (d, h, w, Err(_)) => return Err(d.and(h).and(w).expect_err("one calendar column is missing")),
    };

    let parse = |text: &str, what: &str, line: u64| -> Result<f64> {
        text.parse::<f64>()
            .map_err(|e| Error::Parse(format!("line {line}: bad {what} {text:?}: {e}")))
    };
    let parse_int = |text: &str, what: &str, line: u64| -> Result<u32> {
        text.parse::<u32>()
            .map_err(|e| Error::Parse(format!("line {line}: bad {what} {text:?}: {e}")))
    };

    let mut rows = Vec::new();
    let mut dropped = 0usize;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let raw = field(cpc);
        let value = if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
            None
        } else {
            Some(parse(raw, "CPC", line)?)
        };
        let Some(value) = value.filter(|v| *v > 0.0 && v.is_finite()) else {
            dropped += 1;
            continue;
        };
        let (dayno, hrofday, dayofweek) = match calendar {
            Calendar::Columns(d, h, w) => (
                parse_int(field(d), "dayno", line)?,
                parse_int(field(h), "hrofday", line)?,
                parse_int(field(w), "dayofweek", line)?,
            ),
            Calendar::Timestamp(t) => calendar_fields(field(t))?,
        };
        let site_id = field(site)
            .parse::<i64>()
            .map_err(|e| Error::Parse(format!("line {line}: bad site {:?}: {e}", field(site))))?;
        rows.push(Observation {
            response: value.ln(),
            dayno,
            hrofday,
            dayofweek,
            site: site_id,
            location: [parse(field(long), "long", line)?, parse(field(lat), "lat", line)?],
        });
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with missing or non-positive CPC");
    }
    if rows.is_empty() {
        return Err(Error::EmptyAfterFiltering);
    }
    Ok(LoadedTable {
        table: ObservationTable::new(rows)?,
        dropped,
    })
}

/// Writes the table with `CPC = exp(response)`.
pub fn write_table<W: Write>(table: &ObservationTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["CPC", "dayno", "hrofday", "dayofweek", "site", "long", "lat"])?;
    for r in &table.rows {
        w.write_record([
            r.response.exp().to_string(),
            r.dayno.to_string(),
            r.hrofday.to_string(),
            r.dayofweek.to_string(),
            r.site.to_string(),
            r.location[0].to_string(),
            r.location[1].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_table(table: &ObservationTable, path: &Path) -> Result<()> {
    write_table(table, std::io::BufWriter::new(std::fs::File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_drops() {
        let text = "CPC,dayno,hrofday,dayofweek,site,long,lat\n6608,10,5,2,3,153.0,-27.5\n0,10,6,2,3,153.0,-27.5\n,1,1,1,3,153.0,-27.5\n";
        let t = read_table(text.as_bytes()).unwrap();
        assert_eq!(t.dropped, 2);
        assert_eq!(t.table.len(), 1);
        assert!((t.table.rows[0].response - 8.796).abs() < 5e-4);
    }

    #[test]
    fn missing_site_column() {
        let text = "CPC,dayno,hrofday,dayofweek,long,lat\n1,1,1,1,0,0\n";
        assert!(matches!(read_table(text.as_bytes()), Err(Error::MissingColumn(c)) if c == "site"));
    }

    #[test]
    fn timestamp_fields() {
        // 2024-01-07 is a Sunday
        assert_eq!(calendar_fields("2024-01-07T00:30:00").unwrap(), (7, 1, 1));
        assert_eq!(calendar_fields("2024-12-31 23:00").unwrap(), (366, 24, 3));
        let text = "CPC,timestamp,site,long,lat\n5,2024-01-13T10:00:00,1,0,0\n";
        let t = read_table(text.as_bytes()).unwrap();
        assert_eq!(t.table.rows[0].dayofweek, 7);
        assert_eq!(t.table.rows[0].hrofday, 11);
    }

    #[test]
    fn everything_filtered() {
        let text = "CPC,dayno,hrofday,dayofweek,site,long,lat\n-1,1,1,1,1,0,0\n";
        assert!(matches!(read_table(text.as_bytes()), Err(Error::EmptyAfterFiltering)));
    }
}
