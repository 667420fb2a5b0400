//! Monthly bloom records.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::ProbitError;

/// Raw covariate columns of a [`MonthlyRecord`].
pub const COLUMNS: [&str; 5] = ["min_temp", "max_temp", "solar", "clear_sky", "rainfall"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonthlyRecord {
    /// `YYYY-MM`.
    pub month: String,
    /// 1 if a bloom was recorded that month.
    pub bloom: u8,
    /// Mean minimum air temperature, °C.
    pub min_temp: f64,
    /// Mean maximum air temperature, °C.
    pub max_temp: f64,
    /// Mean daily solar exposure, MJ/m².
    pub solar: f64,
    /// Fraction of clear-sky days.
    pub clear_sky: f64,
    /// Total rainfall, mm.
    pub rainfall: f64,
}

impl MonthlyRecord {
    pub fn value(&self, column: &str) -> Option<f64> {
        Some(match column {
            "min_temp" => self.min_temp,
            "max_temp" => self.max_temp,
            "solar" => self.solar,
            "clear_sky" => self.clear_sky,
            "rainfall" => self.rainfall,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSeriesDataset {
    pub rows: Vec<MonthlyRecord>,
}

fn parse_month(s: &str) -> Option<i64> {
    let (y, m) = s.split_once('-')?;
    if y.len() != 4 || m.len() != 2 {
        return None;
    }
    let y: i64 = y.parse().ok()?;
    let m: i64 = m.parse().ok()?;
    (1..=12).contains(&m).then_some(y * 12 + m - 1)
}

impl TimeSeriesDataset {
    pub fn new(rows: Vec<MonthlyRecord>) -> Result<Self, ProbitError> {
        let ds = TimeSeriesDataset { rows };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Months consecutive and unique, indicator binary, values finite.
    pub fn validate(&self) -> Result<(), ProbitError> {
        let mut prev: Option<i64> = None;
        for (i, r) in self.rows.iter().enumerate() {
            let m = parse_month(&r.month).ok_or_else(|| ProbitError::InvalidRecord {
                row: i,
                reason: format!("month `{}` is not YYYY-MM", r.month),
            })?;
            if let Some(p) = prev {
                if m == p {
                    return Err(ProbitError::InvalidRecord {
                        row: i,
                        reason: format!("duplicate month {}", r.month),
                    });
                }
                if m != p + 1 {
                    return Err(ProbitError::InvalidRecord {
                        row: i,
                        reason: format!("month {} does not follow the previous row", r.month),
                    });
                }
            }
            prev = Some(m);
            if r.bloom > 1 {
                return Err(ProbitError::InvalidRecord {
                    row: i,
                    reason: format!("bloom indicator {} is not 0 or 1", r.bloom),
                });
            }
            for c in COLUMNS {
                let v = r.value(c).unwrap_or(f64::NAN);
                if !v.is_finite() {
                    return Err(ProbitError::InvalidRecord {
                        row: i,
                        reason: format!("{c} is not finite"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, ProbitError> {
        if !COLUMNS.contains(&name) {
            return Err(ProbitError::UnknownColumn(name.to_string()));
        }
        Ok(self.rows.iter().map(|r| r.value(name).unwrap_or(f64::NAN)).collect())
    }

    pub fn response(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.bloom == 1).collect()
    }

    /// Reads comma-separated records with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, ProbitError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize().enumerate() {
            rows.push(rec.map_err(|e| ProbitError::InvalidRecord {
                row: i,
                reason: e.to_string(),
            })?);
        }
        Self::new(rows)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
    }
}
