//! Curve tables: `sample_id,subject_id,t,y1..yq` with empty or `NA` for
//! missing coordinates.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use simm::{DataSet, FunctionalSample};

use crate::error::{CliError, CliResult};

/// A loaded table: the data set on rescaled unit time plus the original
/// times of every sample.
#[derive(Debug, Clone)]
pub struct CurveTable {
    pub data: DataSet,
    pub times: Vec<Vec<f64>>,
}

impl CurveTable {
    /// Map a unit time of sample `n` back to original units.
    pub fn to_original(&self, n: usize, u: f64) -> f64 {
        let t = &self.times[n];
        let (lo, hi) = (t[0], t[t.len() - 1]);
        lo + u * (hi - lo)
    }

    /// Common original time range if every sample shares one.
    pub fn common_range(&self) -> Option<(f64, f64)> {
        let first = (self.times[0][0], *self.times[0].last().unwrap());
        self.times.iter().all(|t| (t[0], *t.last().unwrap()) == first).then_some(first)
    }

    pub fn q(&self) -> usize {
        self.data.q()
    }

    /// Build a table from a data set on unit time and the original times.
    pub fn new(data: DataSet, times: Vec<Vec<f64>>) -> Self {
        Self { data, times }
    }
}

/// Time, values and line number of one record.
type Row = (f64, Vec<f64>, u64);

pub fn parse_value(field: &str) -> Option<Result<f64, std::num::ParseFloatError>> {
    let f = field.trim();
    if f.is_empty() || f == "NA" {
        None
    } else {
        Some(f.parse())
    }
}

/// Shortest representation that parses back to the same value.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:?}")
    }
}

pub fn load(path: &Path) -> CliResult<CurveTable> {
    let file = std::fs::File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    read(file, None).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parse a curve table. With `subjects`, subject names are resolved against
/// that list (unknown names are an error); otherwise subjects are numbered
/// in order of first appearance.
pub fn read<R: Read>(reader: R, subjects: Option<&[String]>) -> CliResult<CurveTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 4 || &header[0] != "sample_id" || &header[1] != "subject_id" || &header[2] != "t" {
        return Err(CliError::data("header must be sample_id,subject_id,t,y1..yq"));
    }
    let q = header.len() - 3;
    let mut subject_names: Vec<String> = subjects.map(<[String]>::to_vec).unwrap_or_default();
    let mut sample_index: HashMap<String, usize> = HashMap::new();
    let mut samples: Vec<(String, usize, Vec<Row>)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(CliError::data(format!("line {line}: expected {} fields, found {}", header.len(), record.len())));
        }
        let t: f64 = record[2].trim().parse().map_err(|_| CliError::data(format!("line {line}: invalid time {:?}", &record[2])))?;
        if !t.is_finite() {
            return Err(CliError::data(format!("line {line}: time must be finite")));
        }
        let mut values = Vec::with_capacity(q);
        for j in 0..q {
            values.push(match parse_value(&record[3 + j]) {
                None => f64::NAN,
                Some(Ok(v)) if v.is_finite() => v,
                _ => return Err(CliError::data(format!("line {line}: invalid value {:?} for {}", &record[3 + j], &header[3 + j]))),
            });
        }
        if values.iter().all(|v| v.is_nan()) {
            continue;
        }
        let subject_name = record[1].to_string();
        let subject = match subject_names.iter().position(|s| *s == subject_name) {
            Some(j) => j,
            None if subjects.is_some() => return Err(CliError::data(format!("line {line}: unknown subject {subject_name:?}"))),
            None => {
                subject_names.push(subject_name);
                subject_names.len() - 1
            }
        };
        let id = record[0].to_string();
        let idx = *sample_index.entry(id.clone()).or_insert_with(|| {
            samples.push((id.clone(), subject, Vec::new()));
            samples.len() - 1
        });
        if samples[idx].1 != subject {
            return Err(CliError::data(format!("line {line}: sample {id:?} changes subject")));
        }
        samples[idx].2.push((t, values, line));
    }
    if samples.is_empty() {
        return Err(CliError::data("no observations"));
    }
    let mut built = Vec::with_capacity(samples.len());
    let mut times = Vec::with_capacity(samples.len());
    for (id, subject, mut rows) in samples {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(CliError::data(format!("line {}: duplicate time {} for sample {id:?}", w[1].2.max(w[0].2), w[1].0)));
        }
        if rows.len() < 2 {
            return Err(CliError::data(format!("sample {id:?} needs at least two time points")));
        }
        let orig: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let (lo, hi) = (orig[0], orig[orig.len() - 1]);
        let mut unit: Vec<f64> = orig.iter().map(|t| (t - lo) / (hi - lo)).collect();
        let last = unit.len() - 1;
        unit[last] = 1.0;
        let values: Vec<f64> = rows.into_iter().flat_map(|r| r.1).collect();
        built.push(FunctionalSample::new(id, subject, unit, q, values)?);
        times.push(orig);
    }
    Ok(CurveTable { data: DataSet::new(built, subject_names)?, times })
}

/// Write a curve table in original time units.
pub fn write<W: Write>(out: W, table: &CurveTable) -> CliResult<()> {
    let q = table.q();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sample_id".to_string(), "subject_id".into(), "t".into()];
    header.extend((1..=q).map(|j| format!("y{j}")));
    w.write_record(&header)?;
    for (n, s) in table.data.samples().iter().enumerate() {
        for (k, t) in table.times[n].iter().enumerate() {
            let mut row = vec![s.id.clone(), table.data.subjects()[s.subject].clone(), fmt(*t)];
            row.extend((0..q).map(|j| s.value(k, j).map_or_else(String::new, fmt)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save(path: &Path, table: &CurveTable) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    write(std::io::BufWriter::new(file), table)
}

/// Write a plain numeric table with a header.
pub fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
