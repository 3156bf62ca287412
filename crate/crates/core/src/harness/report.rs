//! Report emission: one CSV row per (quantity, t), a JSON summary of fits and
//! pass flags, and field dumps as a JSON header next to a little-endian
//! binary tensor.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::FieldTrajectory;

/// One sample of a reported quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub quantity: String,
    pub t: f64,
    pub value: f64,
}

/// One named check with its headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub name: String,
    pub passed: bool,
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub detail: String,
}

impl SummaryEntry {
    pub fn new(name: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            passed,
            values: BTreeMap::new(),
            detail: String::new(),
        }
    }

    pub fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

/// Report of one experiment; failures are enumerated, never short-circuited.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub entries: Vec<SummaryEntry>,
    #[serde(skip)]
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self {
            experiment: experiment.into(),
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> Vec<&SummaryEntry> {
        self.entries.iter().filter(|e| !e.passed).collect()
    }

    pub fn push(&mut self, entry: SummaryEntry) {
        self.entries.push(entry);
    }

    pub fn add_samples(&mut self, quantity: &str, samples: &[(f64, f64)]) {
        for &(t, value) in samples {
            self.rows.push(ReportRow {
                experiment: self.experiment.clone(),
                quantity: quantity.to_string(),
                t,
                value,
            });
        }
    }

    /// Writes `<id>.csv` and `<id>.summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        write_csv(&csv_path, &self.rows)?;
        let json_path = dir.join(format!("{}.summary.json", self.experiment));
        fs::write(&json_path, self.summary_json()?)?;
        Ok((csv_path, json_path))
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            experiment: &'a str,
            passed: bool,
            entries: &'a [SummaryEntry],
        }
        serde_json::to_string_pretty(&Summary {
            experiment: &self.experiment,
            passed: self.passed(),
            entries: &self.entries,
        })
        .map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn write_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Summary file as read back for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub experiment: String,
    pub passed: bool,
    pub entries: Vec<SummaryEntry>,
}

/// Collects every `*.summary.json` and `*.csv` in `dir` (sorted by name) into
/// `aggregate.summary.json` and `aggregate.csv`.
pub fn aggregate(dir: &Path) -> Result<Vec<SummaryFile>> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for path in &names {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("aggregate.") {
            continue;
        }
        if name.ends_with(".summary.json") {
            let text = fs::read_to_string(path)?;
            summaries.push(serde_json::from_str::<SummaryFile>(&text).map_err(|e| Error::Parse(format!("{name}: {e}")))?);
        } else if name.ends_with(".csv") {
            rows.extend(read_csv(path)?);
        }
    }
    write_csv(&dir.join("aggregate.csv"), &rows)?;
    let text = serde_json::to_string_pretty(&summaries).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("aggregate.summary.json"), text)?;
    Ok(summaries)
}

/// Header of a field dump. Values are stored time-major, then by axis in
/// order (normal axis fastest), as little-endian `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub quantity: String,
    pub dimension: usize,
    pub shape: Vec<usize>,
    /// `(min, max)` per axis.
    pub extents: Vec<(f64, f64)>,
    /// Uniform spacing per axis.
    pub spacing: Vec<f64>,
    pub times: Vec<f64>,
    pub dtype: String,
    pub data_file: String,
}

/// Writes `<name>.json` and `<name>.bin` into `dir`.
pub fn write_field_dump(dir: &Path, name: &str, traj: &FieldTrajectory) -> Result<PathBuf> {
    let first = traj
        .values()
        .first()
        .ok_or_else(|| Error::Data("cannot dump an empty trajectory".into()))?;
    let axes = first.axes();
    let header = FieldHeader {
        quantity: name.to_string(),
        dimension: axes.len(),
        shape: axes.iter().map(Vec::len).collect(),
        extents: first.extents(),
        spacing: axes
            .iter()
            .map(|a| if a.len() > 1 { (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64 } else { 0.0 })
            .collect(),
        times: traj.times().to_vec(),
        dtype: "f64-le".into(),
        data_file: format!("{name}.bin"),
    };
    fs::create_dir_all(dir)?;
    let mut bin = std::io::BufWriter::new(fs::File::create(dir.join(&header.data_file))?);
    for field in traj.values() {
        for v in field.values().as_standard_layout().iter() {
            bin.write_all(&v.to_le_bytes())?;
        }
    }
    bin.flush()?;
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_string_pretty(&header).map_err(|e| Error::Parse(e.to_string()))?)?;
    Ok(path)
}

/// Reads a dump back as `(header, values)` with values in file order.
pub fn read_field_dump(header_path: &Path) -> Result<(FieldHeader, Vec<f64>)> {
    let header: FieldHeader =
        serde_json::from_str(&fs::read_to_string(header_path)?).map_err(|e| Error::Parse(e.to_string()))?;
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&header.data_file))?;
    let expected = header.times.len() * header.shape.iter().product::<usize>() * 8;
    if bytes.len() != expected {
        return Err(Error::Data(format!("dump holds {} bytes, header implies {expected}", bytes.len())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::SampledField;

    #[test]
    fn csv_and_summary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new("exp");
        r.add_samples("w_lr[1],odd", &[(0.1, 1.0), (1.0, 2.5)]);
        r.push(SummaryEntry::new("a", true).value("slope", -0.5));
        r.push(SummaryEntry::new("b", false).detail("gap too large"));
        let (csv_path, _) = r.write(dir.path()).unwrap();
        assert_eq!(read_csv(&csv_path).unwrap(), r.rows);
        assert!(!r.passed());
        assert_eq!(r.failures().len(), 1);
        let all = aggregate(dir.path()).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].entries, r.entries);
        assert_eq!(read_csv(&dir.path().join("aggregate.csv")).unwrap().len(), 2);
    }

    #[test]
    fn field_dump_round_trip() {
        let x = [-1.0, 0.0, 1.0];
        let z = [0.0, 0.5];
        let f = |c: f64| SampledField::from_fn_2d(&x, &z, move |a, b| c * a + b).unwrap();
        let traj = FieldTrajectory::new(vec![0.5, 1.0], vec![f(1.0), f(2.0)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = write_field_dump(dir.path(), "u", &traj).unwrap();
        let (h, v) = read_field_dump(&path).unwrap();
        assert_eq!(h.shape, vec![3, 2]);
        assert_eq!(h.spacing, vec![1.0, 0.5]);
        assert_eq!(h.extents, vec![(-1.0, 1.0), (0.0, 0.5)]);
        assert_eq!(v.len(), 12);
        // second time, x = 1, z = 0.5
        assert_eq!(v[6 + 5], 2.5);
    }
}
