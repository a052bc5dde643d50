use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::Estimate;
use crate::error::{Error, Result};
use crate::model::{BoxGeometry, ConnectionFunction};

/// What a table row was estimated for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InputDescriptor {
    Displacement(Vec<f64>),
    Size(usize),
    /// Everything above the largest tabulated size.
    Overflow,
    Label(String),
}

impl fmt::Display for InputDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputDescriptor::Displacement(x) => {
                let parts: Vec<String> = x.iter().map(|c| c.to_string()).collect();
                write!(f, "x={}", parts.join(";"))
            }
            InputDescriptor::Size(k) => write!(f, "size={k}"),
            InputDescriptor::Overflow => write!(f, "overflow"),
            InputDescriptor::Label(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for InputDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(x) = s.strip_prefix("x=") {
            let v = x
                .split(';')
                .map(f64::from_str)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Parse(format!("bad displacement {s:?}")))?;
            Ok(InputDescriptor::Displacement(v))
        } else if let Some(k) = s.strip_prefix("size=") {
            Ok(InputDescriptor::Size(
                k.parse().map_err(|_| Error::Parse(format!("bad size class {s:?}")))?,
            ))
        } else if s == "overflow" {
            Ok(InputDescriptor::Overflow)
        } else {
            Ok(InputDescriptor::Label(s.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub input: InputDescriptor,
    pub estimate: f64,
    pub std_error: f64,
    pub replicates: u64,
}

impl EstimateRow {
    pub fn new(input: InputDescriptor, e: Estimate) -> Self {
        Self {
            input,
            estimate: e.value,
            std_error: e.std_error,
            replicates: e.replicates,
        }
    }

    pub fn as_estimate(&self) -> Estimate {
        Estimate {
            value: self.estimate,
            std_error: self.std_error,
            replicates: self.replicates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub estimator: String,
    pub t: f64,
    pub connection: ConnectionFunction,
    pub geometry: BoxGeometry,
    pub seed: u64,
    pub replicates: u64,
    pub wall_time_s: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Estimator output: one row per input plus run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateTable {
    pub rows: Vec<EstimateRow>,
    pub metadata: RunMetadata,
}

pub const TABLE_HEADER: &str = "input,estimate,stderr,n";

impl EstimateTable {
    /// CSV with header `input,estimate,stderr,n`. Contains no timing data, so
    /// equal runs give equal bytes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TABLE_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.input, r.estimate, r.std_error, r.replicates)?;
        }
        Ok(())
    }

    pub fn read_csv_rows<R: BufRead>(r: R) -> Result<Vec<EstimateRow>> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty estimate table".into()))??;
        if header.trim() != TABLE_HEADER {
            return Err(Error::Parse(format!("unexpected estimate table header {header:?}")));
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("estimate table row {k}: expected 4 fields")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("row {k}: bad number {s:?}")));
            rows.push(EstimateRow {
                input: f[0].parse()?,
                estimate: num(f[1])?,
                std_error: num(f[2])?,
                replicates: f[3].parse().map_err(|_| Error::Parse(format!("row {k}: bad count")))?,
            });
        }
        Ok(rows)
    }

    pub fn write_metadata_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.metadata).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Boundary;

    #[test]
    fn descriptor_round_trip() {
        for d in [
            InputDescriptor::Displacement(vec![0.5, -1.25]),
            InputDescriptor::Size(3),
            InputDescriptor::Overflow,
            InputDescriptor::Label("mean".into()),
        ] {
            assert_eq!(d.to_string().parse::<InputDescriptor>().unwrap(), d);
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = EstimateTable {
            rows: vec![
                EstimateRow::new(InputDescriptor::Displacement(vec![0.5]), Estimate::binomial(3, 4)),
                EstimateRow::new(InputDescriptor::Size(1), Estimate::binomial(1, 3)),
            ],
            metadata: RunMetadata {
                estimator: "test".into(),
                t: 0.1,
                connection: ConnectionFunction::gilbert(1, 1.0).unwrap(),
                geometry: BoxGeometry::new(1, 10.0, Boundary::Periodic).unwrap(),
                seed: 1,
                replicates: 4,
                wall_time_s: 0.0,
                warnings: vec![],
            },
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("input,estimate,stderr,n\nx=0.5,0.75,"));
        assert_eq!(EstimateTable::read_csv_rows(buf.as_slice()).unwrap(), t.rows);
        let mut json = Vec::new();
        t.write_metadata_json(&mut json).unwrap();
        let back: RunMetadata = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, t.metadata);
    }
}
