use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{GroundTruthEvent, Sample};

pub const STREAM_SCHEMA: &str = "# driftguard stream v1";
pub const TRUTH_SCHEMA: &str = "# driftguard truth v1";

/// Cell values treated as missing by [`load_csv`], compared after trimming.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub missing_codes: Vec<String>,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            missing_codes: ["", "NA", "NaN", "nan", "?"].iter().map(|s| s.to_string()).collect(),
            delimiter: b',',
        }
    }
}

fn reader(path: &Path, delimiter: u8) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))
}

/// Reads the selected columns of a delimited file into samples. Rows with a
/// missing or non-finite value in any selected column are dropped and `t`
/// follows the order of the kept rows.
pub fn load_csv(
    path: &Path,
    target_column: &str,
    feature_columns: &[&str],
    options: &CsvOptions,
) -> Result<Vec<Sample>> {
    let mut rdr = reader(path, options.delimiter)?;
    let headers = rdr.headers()?.clone();
    let target = column(&headers, target_column)?;
    let features = feature_columns
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let parse = |rec: &csv::StringRecord, idx: usize, row: usize| -> Result<Option<f64>> {
        let cell = rec.get(idx).unwrap_or("");
        if options.missing_codes.iter().any(|m| m == cell) {
            return Ok(None);
        }
        let v: f64 = cell.parse().map_err(|_| {
            Error::Malformed(format!(
                "row {row}, column `{}`: `{cell}` is not numeric",
                &headers[idx]
            ))
        })?;
        Ok(v.is_finite().then_some(v))
    };
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(y) = parse(&rec, target, row + 1)? else {
            continue;
        };
        let mut x = Vec::with_capacity(features.len());
        for &j in &features {
            match parse(&rec, j, row + 1)? {
                Some(v) => x.push(v),
                None => break,
            }
        }
        if x.len() == features.len() {
            out.push(Sample::new(out.len() as u64, x, y));
        }
    }
    if out.is_empty() {
        return Err(Error::NoValidRows(path.display().to_string()));
    }
    Ok(out)
}

/// Writes `t,x0,...,x{d-1},y` after a schema comment line.
pub fn write_stream_csv(path: &Path, samples: &[Sample]) -> Result<()> {
    let d = samples.first().map_or(0, Sample::dim);
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "{STREAM_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|j| format!("x{j}")));
    header.push("y".into());
    w.write_record(&header)?;
    for s in samples {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.dim(),
            });
        }
        let mut rec = vec![s.t.to_string()];
        rec.extend(s.x.iter().map(|v| v.to_string()));
        rec.push(s.y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stream_csv(path: &Path) -> Result<Vec<Sample>> {
    let mut rdr = reader(path, b',')?;
    let headers = rdr.headers()?.clone();
    let n = headers.len();
    let (t_col, y_col) = (column(&headers, "t")?, column(&headers, "y")?);
    if n < 3 || t_col != 0 || y_col != n - 1 {
        return Err(Error::Malformed(format!(
            "{}: stream header must be t,x0,...,y",
            path.display()
        )));
    }
    for (j, h) in headers.iter().skip(1).take(n - 2).enumerate() {
        if h != format!("x{j}") {
            return Err(Error::Malformed(format!(
                "{}: expected column x{j}, found `{h}`",
                path.display()
            )));
        }
    }
    let num = |s: &str, row: usize| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Malformed(format!("{}: row {row}: `{s}` is not numeric", path.display())))
    };
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let t: u64 = rec[0]
            .parse()
            .map_err(|_| Error::Malformed(format!("{}: row {}: bad t `{}`", path.display(), row + 1, &rec[0])))?;
        let x = (1..n - 1).map(|j| num(&rec[j], row + 1)).collect::<Result<Vec<_>>>()?;
        out.push(Sample::new(t, x, num(&rec[n - 1], row + 1)?));
    }
    Ok(out)
}

pub fn write_truth_csv(path: &Path, events: &[GroundTruthEvent]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "{TRUTH_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["t", "kind"])?;
    for e in events {
        w.write_record([e.t.to_string(), e.kind.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<GroundTruthEvent>> {
    let mut rdr = reader(path, b',')?;
    let headers = rdr.headers()?.clone();
    let t_col = column(&headers, "t")?;
    let k_col = column(&headers, "kind")?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let t: u64 = rec[t_col]
            .parse()
            .map_err(|_| Error::Malformed(format!("{}: bad t `{}`", path.display(), &rec[t_col])))?;
        out.push(GroundTruthEvent::new(t, rec[k_col].parse()?));
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EventKind;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn three_rows_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let s = load_csv(&p, "y", &["a", "b"], &CsvOptions::default()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[2], Sample::new(2, vec![7.0, 8.0], 9.0));
    }

    #[test]
    fn empty_target_dropped_and_reindexed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "a,y\n1,3\n4,\n7,9\n");
        let s = load_csv(&p, "y", &["a"], &CsvOptions::default()).unwrap();
        assert_eq!(s.iter().map(|x| x.t).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(s[1].y, 9.0);
    }

    #[test]
    fn unknown_column_and_no_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "a,y\n,1\n");
        match load_csv(&p, "y", &["zz"], &CsvOptions::default()) {
            Err(Error::UnknownColumn(c)) => assert_eq!(c, "zz"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_csv(&p, "y", &["a"], &CsvOptions::default()),
            Err(Error::NoValidRows(_))
        ));
        assert!(matches!(
            load_csv(&dir.path().join("nope.csv"), "y", &[], &CsvOptions::default()),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn stream_and_truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![
            Sample::new(0, vec![0.1, 1.0 / 3.0], -2.5e-7),
            Sample::new(1, vec![0.4, 0.2], std::f64::consts::PI),
        ];
        let p = dir.path().join("s.csv");
        write_stream_csv(&p, &samples).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(STREAM_SCHEMA));
        assert!(text.lines().nth(1).unwrap() == "t,x0,x1,y");
        assert_eq!(read_stream_csv(&p).unwrap(), samples);

        let events = vec![
            GroundTruthEvent::new(5, EventKind::Outlier),
            GroundTruthEvent::new(9, EventKind::DriftIncremental),
        ];
        let q = dir.path().join("t.csv");
        write_truth_csv(&q, &events).unwrap();
        assert_eq!(read_truth_csv(&q).unwrap(), events);
    }

    #[test]
    fn bad_stream_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "s.csv", "t,a,y\n0,1,2\n");
        assert!(matches!(read_stream_csv(&p), Err(Error::Malformed(_))));
        let q = write(&dir, "q.csv", "t,x0,target\n0,1,2\n");
        assert!(matches!(read_stream_csv(&q), Err(Error::UnknownColumn(c)) if c == "y"));
    }
}
