//! Wide-format dataset CSV: one row per participant-day, header
//! `pid,date[,week][,label],<feature...>`.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use imputelab_core::{Cell, DataError, DayRow, LongitudinalDataset, ParticipantSeries};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow { path: String, line: u64, reason: String },
    #[error("{path}: duplicate row for participant {pid} on {date}")]
    DuplicateRow { path: String, pid: String, date: NaiveDate },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {source}")]
    Data { path: String, source: DataError },
}

/// Column roles of a dataset file. The week and label columns are used
/// when the header contains them; every other column is a feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WideCsvSchema {
    pub id_column: String,
    pub date_column: String,
    pub week_column: Option<String>,
    pub label_column: Option<String>,
    pub missing_tokens: Vec<String>,
}

impl Default for WideCsvSchema {
    fn default() -> Self {
        Self {
            id_column: "pid".into(),
            date_column: "date".into(),
            week_column: Some("week".into()),
            label_column: Some("label".into()),
            missing_tokens: ["", "NA", "NaN", "nan"].map(String::from).to_vec(),
        }
    }
}

pub fn load_dataset_csv(path: &Path, schema: &WideCsvSchema) -> Result<LongitudinalDataset, IoError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|source| IoError::Io {
        path: name.clone(),
        source,
    })?;
    read_dataset(file, schema, &name)
}

struct Columns {
    id: usize,
    date: usize,
    week: Option<usize>,
    label: Option<usize>,
    features: Vec<usize>,
}

fn columns(header: &csv::StringRecord, schema: &WideCsvSchema, path: &str) -> Result<(Columns, Vec<String>), IoError> {
    let find = |name: &str| header.iter().position(|h| h == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| IoError::MissingColumn {
            path: path.to_string(),
            column: name.to_string(),
        })
    };
    let id = required(&schema.id_column)?;
    let date = required(&schema.date_column)?;
    let week = schema.week_column.as_deref().and_then(find);
    let label = schema.label_column.as_deref().and_then(find);
    let reserved: BTreeSet<usize> = [Some(id), Some(date), week, label].into_iter().flatten().collect();
    let features: Vec<usize> = (0..header.len()).filter(|i| !reserved.contains(i)).collect();
    let names = features.iter().map(|&i| header[i].to_string()).collect();
    Ok((
        Columns {
            id,
            date,
            week,
            label,
            features,
        },
        names,
    ))
}

/// date, week, values, label as read before grouping.
type RawRow = (NaiveDate, Option<u32>, Vec<Cell>, Option<bool>);

/// Reads a dataset from any reader; `path` only labels error messages.
pub fn read_dataset(reader: impl Read, schema: &WideCsvSchema, path: &str) -> Result<LongitudinalDataset, IoError> {
    let csv_err = |source| IoError::Csv {
        path: path.to_string(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let (cols, names) = columns(&header, schema, path)?;
    let missing = |t: &str| schema.missing_tokens.iter().any(|m| m == t);

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<RawRow>> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, csv::Position::line);
        let bad = |reason: String| IoError::MalformedRow {
            path: path.to_string(),
            line,
            reason,
        };
        if record.len() != header.len() {
            return Err(bad(format!("{} fields, header has {}", record.len(), header.len())));
        }
        let pid = record[cols.id].to_string();
        if pid.is_empty() {
            return Err(bad("empty participant id".into()));
        }
        let date = NaiveDate::parse_from_str(&record[cols.date], "%Y-%m-%d")
            .map_err(|_| bad(format!("date `{}` is not ISO-8601", &record[cols.date])))?;
        let week = match cols.week {
            Some(i) => Some(
                record[i]
                    .parse::<u32>()
                    .ok()
                    .filter(|&w| w >= 1)
                    .ok_or_else(|| bad(format!("week `{}` is not a positive integer", &record[i])))?,
            ),
            None => None,
        };
        let label = match cols.label {
            Some(i) => parse_label(&record[i], missing).ok_or_else(|| bad(format!("label `{}` is not 0/1", &record[i])))?,
            None => None,
        };
        let mut values = Vec::with_capacity(cols.features.len());
        for (k, &i) in cols.features.iter().enumerate() {
            let token = &record[i];
            let cell = if missing(token) {
                Cell::Missing
            } else {
                match token.parse::<f64>() {
                    Ok(x) if x.is_finite() => Cell::Observed(x),
                    _ => return Err(bad(format!("column `{}`: `{token}` is not numeric", names[k]))),
                }
            };
            values.push(cell);
        }
        let entry = rows.entry(pid.clone()).or_insert_with(|| {
            order.push(pid.clone());
            Vec::new()
        });
        entry.push((date, week, values, label));
    }

    let mut participants = Vec::with_capacity(order.len());
    for pid in order {
        let mut days = rows.remove(&pid).unwrap_or_default();
        days.sort_by_key(|d| d.0);
        if let Some(w) = days.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(IoError::DuplicateRow {
                path: path.to_string(),
                pid,
                date: w[0].0,
            });
        }
        let has_weeks = cols.week.is_some();
        let day_rows: Vec<DayRow> = days
            .into_iter()
            .map(|(date, week, values, label)| DayRow::new(date, week.unwrap_or(1), values, label))
            .collect();
        let series = if has_weeks {
            ParticipantSeries::new(pid, day_rows)
        } else {
            ParticipantSeries::with_derived_weeks(pid, day_rows)
        };
        participants.push(series.map_err(|source| IoError::Data {
            path: path.to_string(),
            source,
        })?);
    }
    LongitudinalDataset::new(names, participants).map_err(|source| IoError::Data {
        path: path.to_string(),
        source,
    })
}

fn parse_label(token: &str, missing: impl Fn(&str) -> bool) -> Option<Option<bool>> {
    if missing(token) {
        return Some(None);
    }
    match token.to_ascii_lowercase().as_str() {
        "1" | "true" => Some(Some(true)),
        "0" | "false" => Some(Some(false)),
        _ => None,
    }
}

/// Writes `pid,date,week[,label],<features>` with LF line endings. Floats
/// use the shortest representation that parses back to the same value.
pub fn write_dataset(dataset: &LongitudinalDataset, writer: impl Write) -> csv::Result<()> {
    let with_labels = dataset.participants().iter().any(|p| p.rows().iter().any(|r| r.label.is_some()));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = vec!["pid".to_string(), "date".into(), "week".into()];
    if with_labels {
        header.push("label".into());
    }
    header.extend(dataset.feature_names().iter().cloned());
    w.write_record(&header)?;
    for p in dataset.participants() {
        for r in p.rows() {
            let mut rec = vec![p.id().to_string(), r.date.format("%Y-%m-%d").to_string(), r.week.to_string()];
            if with_labels {
                rec.push(r.label.map_or(String::new(), |l| u8::from(l).to_string()));
            }
            rec.extend(r.values.iter().map(|c| c.value().map_or(String::new(), |x| x.to_string())));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_csv(dataset: &LongitudinalDataset, path: &Path) -> Result<(), IoError> {
    let name = path.display().to_string();
    let file = File::create(path).map_err(|source| IoError::Io {
        path: name.clone(),
        source,
    })?;
    write_dataset(dataset, std::io::BufWriter::new(file)).map_err(|source| IoError::Csv { path: name, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<LongitudinalDataset, IoError> {
        read_dataset(s.as_bytes(), &WideCsvSchema::default(), "mem.csv")
    }

    #[test]
    fn empty_cell_is_missing() {
        let d = read("pid,date,a,b\np1,2021-04-05,,3.5\n").unwrap();
        assert_eq!(d.participants()[0].rows()[0].values, vec![Cell::Missing, Cell::Observed(3.5)]);
    }

    #[test]
    fn missing_tokens() {
        let d = read("pid,date,a,b,c\r\np1,2021-04-05,NA,NaN,nan\r\n").unwrap();
        assert_eq!(d.participants()[0].rows()[0].values, vec![Cell::Missing; 3]);
    }

    #[test]
    fn malformed_token_reports_line() {
        let e = read("pid,date,a\np1,2021-04-05,1\np1,2021-04-06,abc\n").unwrap_err();
        assert!(matches!(e, IoError::MalformedRow { line: 3, .. }), "{e}");
        assert!(e.to_string().contains(":3:"));
    }

    #[test]
    fn duplicate_day() {
        let e = read("pid,date,a\np1,2021-04-05,1\np1,2021-04-05,2\n").unwrap_err();
        assert!(matches!(e, IoError::DuplicateRow { .. }), "{e}");
    }

    #[test]
    fn missing_date_column() {
        let e = read("pid,day,a\np1,2021-04-05,1\n").unwrap_err();
        assert!(matches!(e, IoError::MissingColumn { ref column, .. } if column == "date"), "{e}");
    }

    #[test]
    fn rows_grouped_and_sorted() {
        let d = read("pid,date,label,a\np2,2021-04-06,1,1\np1,2021-04-09,0,2\np2,2021-04-05,,3\n").unwrap();
        let ids: Vec<&str> = d.participants().iter().map(|p| p.id()).collect();
        assert_eq!(ids, ["p2", "p1"]);
        let p2 = &d.participants()[0];
        assert_eq!(p2.rows()[0].values, vec![Cell::Observed(3.0)]);
        assert_eq!(p2.rows()[0].label, None);
        assert_eq!(p2.rows()[1].label, Some(true));
        assert_eq!(d.feature_names(), ["a"]);
    }

    #[test]
    fn writer_emits_lf() {
        let d = read("pid,date,a\r\np1,2021-04-05,0.1\r\n").unwrap();
        let mut out = Vec::new();
        write_dataset(&d, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "pid,date,week,a\np1,2021-04-05,1,0.1\n");
    }
}
