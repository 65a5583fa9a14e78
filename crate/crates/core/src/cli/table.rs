//! Header-addressed CSV tables and JSON/CSV writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::Value;

use crate::corr::Coordinates;
use crate::error::{Error, Result};

pub(crate) struct Table {
    path: PathBuf,
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = reader
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(csv_err)?;
        if rows.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} has no data rows",
                path.display()
            )));
        }
        Ok(Table {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Usage(format!(
                "column `{name}` not found in {} (columns: {})",
                self.path.display(),
                self.headers.join(", ")
            ))
        })
    }

    pub fn text(&self, name: &str) -> Result<Vec<String>> {
        let j = self.index(name)?;
        Ok(self
            .rows
            .iter()
            .map(|r| r.get(j).unwrap_or("").to_string())
            .collect())
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = r.get(j).unwrap_or("");
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "{} row {}: column `{name}` holds `{cell}`, not a finite number",
                            self.path.display(),
                            i + 2
                        ))
                    })
            })
            .collect()
    }

    pub fn coordinates(&self, names: &[String]) -> Result<Coordinates> {
        if names.is_empty() || names.len() > 2 {
            return Err(Error::Usage(
                "--coords takes one or two column names".into(),
            ));
        }
        let cols = names
            .iter()
            .map(|n| self.numeric(n))
            .collect::<Result<Vec<_>>>()?;
        let data = (0..self.len())
            .flat_map(|i| cols.iter().map(move |c| c[i]))
            .collect();
        Coordinates::new(names.len(), data)
    }

    /// Covariate columns, with a leading column of ones when `intercept` is set.
    pub fn design(&self, names: &[String], intercept: bool) -> Result<(DMatrix<f64>, Vec<String>)> {
        let cols = names
            .iter()
            .map(|n| self.numeric(n))
            .collect::<Result<Vec<_>>>()?;
        let offset = intercept as usize;
        let x = DMatrix::from_fn(self.len(), cols.len() + offset, |i, j| {
            if j < offset {
                1.0
            } else {
                cols[j - offset][i]
            }
        });
        let mut out_names: Vec<String> = if intercept {
            vec!["intercept".into()]
        } else {
            vec![]
        };
        out_names.extend(names.iter().cloned());
        Ok((x, out_names))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub(crate) fn write_csv(
    path: &Path,
    headers: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(headers).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest decimal that round-trips, so CSV values are exact.
pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}

fn round12(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .map(round12)
                .and_then(serde_json::Number::from_f64)
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits; non-finite values become `null`.
pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let json_err = |source| Error::Json {
        path: path.to_path_buf(),
        source,
    };
    let mut v = serde_json::to_value(value).map_err(json_err)?;
    round_numbers(&mut v);
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &v).map_err(json_err)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_twelve_digits() {
        let mut v = serde_json::json!({"a": 0.1 + 0.2, "b": [1.0 / 3.0, 7], "c": null});
        round_numbers(&mut v);
        assert_eq!(v["a"], serde_json::json!(0.3));
        assert_eq!(v["b"][0].as_f64().unwrap(), 0.333333333333);
        assert_eq!(v["b"][1], serde_json::json!(7));
    }

    #[test]
    fn non_finite_becomes_null() {
        let v = serde_json::to_value(f64::NAN).unwrap();
        assert!(v.is_null());
    }
}
