//! Claims CSV ingestion.
//!
//! Two layouts are accepted: `accident,delay,amount` with numeric times, or
//! `accident_date,payment_date,amount` with ISO-8601 dates, where times are
//! counted in days from an origin date.

use std::fmt;
use std::path::Path;

use ccl_core::{ClaimDataset, ClaimRecord};
use chrono::NaiveDate;
use serde::Deserialize;

const MAX_REPORTED: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    /// Chosen from the header.
    #[default]
    Auto,
    Numeric,
    Dates,
}

/// Rejected claims file, with the offending rows.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestError {
    pub path: String,
    /// `(line, message)` for the first offenders, line 1 being the header.
    pub offenders: Vec<(usize, String)>,
    pub total: usize,
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} invalid row(s)", self.path, self.total)?;
        for (line, msg) in &self.offenders {
            write!(f, "\n  line {line}: {msg}")?;
        }
        if self.total > self.offenders.len() {
            write!(f, "\n  ... {} more", self.total - self.offenders.len())?;
        }
        Ok(())
    }
}

impl std::error::Error for IngestError {}

struct Offenders {
    path: String,
    list: Vec<(usize, String)>,
    total: usize,
}

impl Offenders {
    fn push(&mut self, line: usize, msg: String) {
        self.total += 1;
        if self.list.len() < MAX_REPORTED {
            self.list.push((line, msg));
        }
    }

    fn fail(self) -> IngestError {
        IngestError {
            path: self.path,
            offenders: self.list,
            total: self.total,
        }
    }
}

/// Reads and validates a claims file and normalizes it to horizon 1.
///
/// For the date schema `horizon` is in days and `origin` defaults to the
/// earliest accident date.
pub fn ingest_claims(
    path: &Path,
    schema: Schema,
    horizon: f64,
    origin: Option<NaiveDate>,
) -> Result<ClaimDataset, IngestError> {
    let mut bad = Offenders {
        path: path.display().to_string(),
        list: Vec::new(),
        total: 0,
    };
    let mut reader = match csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
    {
        Ok(r) => r,
        Err(e) => {
            bad.push(0, e.to_string());
            return Err(bad.fail());
        }
    };
    let header: Vec<String> = match reader.headers() {
        Ok(h) => h.iter().map(str::to_ascii_lowercase).collect(),
        Err(e) => {
            bad.push(1, e.to_string());
            return Err(bad.fail());
        }
    };
    let numeric = ["accident", "delay", "amount"];
    let dated = ["accident_date", "payment_date", "amount"];
    let columns = |names: &[&str]| -> Option<Vec<usize>> {
        names
            .iter()
            .map(|n| header.iter().position(|h| h == n))
            .collect()
    };
    let (schema, cols) = match (schema, columns(&numeric), columns(&dated)) {
        (Schema::Auto | Schema::Numeric, Some(c), _) => (Schema::Numeric, c),
        (Schema::Auto | Schema::Dates, _, Some(c)) => (Schema::Dates, c),
        _ => {
            bad.push(
                1,
                format!("header must contain `accident,delay,amount` or `accident_date,payment_date,amount`, found `{}`", header.join(",")),
            );
            return Err(bad.fail());
        }
    };
    if !(horizon.is_finite() && horizon > 0.0) {
        bad.push(0, format!("horizon must be positive, got {horizon}"));
        return Err(bad.fail());
    }

    // (line, accident, delay, amount) with accident as a date offset pending origin
    let mut rows: Vec<(usize, f64, f64, f64)> = Vec::new();
    let mut dates: Vec<NaiveDate> = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let line = k + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                bad.push(line, e.to_string());
                continue;
            }
        };
        let field = |i: usize| row.get(cols[i]).unwrap_or("");
        let amount = match field(2).parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => v,
            Ok(v) => {
                bad.push(line, format!("amount {v} must be finite and nonnegative"));
                continue;
            }
            Err(_) => {
                bad.push(line, format!("amount `{}` is not a number", field(2)));
                continue;
            }
        };
        match schema {
            Schema::Dates => {
                let parse = |i: usize| NaiveDate::parse_from_str(field(i), "%Y-%m-%d");
                match (parse(0), parse(1)) {
                    (Ok(acc), Ok(pay)) if pay >= acc => {
                        dates.push(acc);
                        rows.push((line, 0.0, (pay - acc).num_days() as f64, amount));
                    }
                    (Ok(acc), Ok(pay)) => bad.push(
                        line,
                        format!("payment date {pay} precedes accident date {acc}"),
                    ),
                    _ => bad.push(
                        line,
                        format!(
                            "dates `{}`, `{}` are not ISO-8601 (YYYY-MM-DD)",
                            field(0),
                            field(1)
                        ),
                    ),
                }
            }
            _ => {
                let parse = |i: usize| field(i).parse::<f64>().ok().filter(|v| v.is_finite());
                match (parse(0), parse(1)) {
                    (Some(u), Some(t)) if u >= 0.0 && t >= 0.0 => rows.push((line, u, t, amount)),
                    (Some(u), Some(t)) => bad.push(
                        line,
                        format!("accident {u} and delay {t} must be nonnegative"),
                    ),
                    _ => bad.push(
                        line,
                        format!(
                            "accident `{}` or delay `{}` is not a number",
                            field(0),
                            field(1)
                        ),
                    ),
                }
            }
        }
    }
    if schema == Schema::Dates {
        let origin = origin.or_else(|| dates.iter().min().copied());
        for (row, acc) in rows.iter_mut().zip(&dates) {
            let days = (*acc - origin.expect("dates present")).num_days();
            if days < 0 {
                bad.push(row.0, format!("accident date {acc} precedes the origin"));
            }
            row.1 = days as f64;
        }
    }
    for &(line, u, t, _) in &rows {
        if u + t > horizon {
            bad.push(
                line,
                format!("accident + delay = {} exceeds horizon {horizon}", u + t),
            );
        }
    }
    if bad.total == 0 && rows.is_empty() {
        bad.push(1, "no claims".into());
    }
    if bad.total > 0 {
        bad.list.sort_by_key(|o| o.0);
        return Err(bad.fail());
    }
    let records = rows
        .into_iter()
        .map(|(_, u, t, z)| ClaimRecord::new(u, t, z))
        .collect();
    match ClaimDataset::new(records, horizon) {
        Ok(d) => Ok(d.normalized()),
        Err(e) => {
            bad.push(0, e.to_string());
            Err(bad.fail())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_numeric_rows() {
        let f = file("accident,delay,amount\n0,1,10\n2,3,5.5\n4,0,1\n");
        let d = ingest_claims(f.path(), Schema::Auto, 10.0, None).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.unit_scale(), 10.0);
        assert_eq!(d.records()[1], ClaimRecord::new(0.2, 0.3, 5.5));
    }

    #[test]
    fn negative_amount_names_the_row() {
        let f = file("accident,delay,amount\n0,1,10\n2,3,-1\n");
        let err = ingest_claims(f.path(), Schema::Auto, 10.0, None).unwrap_err();
        assert_eq!(err.total, 1);
        assert_eq!(err.offenders[0].0, 3);
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn dates_before_accident_are_rejected() {
        let f = file(
            "accident_date,payment_date,amount\n2020-01-01,2020-02-01,3\n2020-03-01,2020-02-01,1\n",
        );
        let err = ingest_claims(f.path(), Schema::Auto, 400.0, None).unwrap_err();
        assert_eq!(err.offenders[0].0, 3);
        assert!(err.offenders[0].1.contains("precedes"));
    }

    #[test]
    fn dates_count_days_from_origin() {
        let f = file(
            "amount,accident_date,payment_date\n3,2020-01-11,2020-01-21\n1,2020-01-01,2020-01-02\n",
        );
        let origin = NaiveDate::from_ymd_opt(2019, 12, 22);
        let d = ingest_claims(f.path(), Schema::Dates, 100.0, origin).unwrap();
        assert_eq!(d.records()[0], ClaimRecord::new(0.2, 0.1, 3.0));
        assert_eq!(d.records()[1], ClaimRecord::new(0.1, 0.01, 1.0));
    }

    #[test]
    fn offenders_are_capped_at_twenty() {
        let mut text = String::from("accident,delay,amount\n");
        for _ in 0..30 {
            text.push_str("x,1,1\n");
        }
        text.push_str("5,6,1\n");
        let err = ingest_claims(file(&text).path(), Schema::Auto, 10.0, None).unwrap_err();
        assert_eq!(err.total, 31);
        assert_eq!(err.offenders.len(), 20);
        assert!(err.to_string().contains("11 more"));
    }

    #[test]
    fn malformed_rows_and_headers() {
        let f = file("accident,delay,amount\n1,2\n");
        assert!(ingest_claims(f.path(), Schema::Auto, 10.0, None).is_err());
        let f = file("a,b,c\n1,2,3\n");
        let err = ingest_claims(f.path(), Schema::Auto, 10.0, None).unwrap_err();
        assert_eq!(err.offenders[0].0, 1);
        let f = file("accident,delay,amount\n");
        assert!(ingest_claims(f.path(), Schema::Numeric, 10.0, None).is_err());
        let f = file("accident,delay,amount\n1,2,3\n");
        assert!(ingest_claims(f.path(), Schema::Dates, 10.0, None).is_err());
    }
}
