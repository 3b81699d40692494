//! CSV formats.
//!
//! * probabilities: header `p_0,…,p_{K-1}` with an optional trailing `label`
//! * per-label scores: header `s_0,…,s_{K-1}`; `inf` is accepted
//! * prediction sets: `index,size,members` with members joined by `;`
//! * trade-off curves: `lambda,avg_size,p_size_gt,coverage`
//!
//! Row numbers in errors count data rows from 1.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use socop_core::tuning::TradeoffCurve;
use socop_core::{PredictionSet, ProbMatrix, SortedDist};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io_path(path, e))
}

fn csv_err(context: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        context: context.to_string(),
        source,
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Raw probability rows and optional labels, before validation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawProbs {
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
}

impl RawProbs {
    /// Validate every row. Errors name the 1-based data row.
    pub fn into_matrix(self) -> Result<ProbMatrix> {
        let classes = self.rows.first().map(Vec::len).unwrap_or(0);
        let mut sorted = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let dist = SortedDist::new(row).map_err(|e| Error::Row {
                row: i + 1,
                message: e.to_string(),
            })?;
            sorted.push(dist);
        }
        if let Some(labels) = &self.labels {
            if let Some((i, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("label {label} out of range for {classes} classes"),
                });
            }
        }
        Ok(ProbMatrix::from_sorted(sorted, self.labels)?)
    }
}

fn parse_prob_header(headers: &csv::StringRecord, prefix: &str) -> Result<(usize, bool)> {
    let mut classes = 0;
    let mut has_label = false;
    for (i, name) in headers.iter().enumerate() {
        if has_label {
            return Err(Error::Input(format!("column `{name}` after `label`")));
        }
        if name == "label" {
            has_label = true;
        } else if name == format!("{prefix}{i}") {
            classes += 1;
        } else {
            return Err(Error::Input(format!(
                "unexpected column `{name}` at position {i}, expected `{prefix}{i}`"
            )));
        }
    }
    if classes < 2 {
        return Err(Error::Input(format!("need at least 2 `{prefix}*` columns")));
    }
    Ok((classes, has_label))
}

fn parse_number(cell: &str, row: usize, col: &str) -> Result<f64> {
    match cell.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => return Ok(f64::INFINITY),
        _ => {}
    }
    cell.parse::<f64>().map_err(|_| Error::Row {
        row,
        message: format!("column {col}: `{cell}` is not a number"),
    })
}

pub fn read_probs_csv<R: Read>(input: R) -> Result<RawProbs> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(csv_err("header"))?.clone();
    let (classes, has_label) = parse_prob_header(&headers, "p_")?;
    let width = classes + has_label as usize;

    let mut out = RawProbs {
        rows: Vec::new(),
        labels: has_label.then(Vec::new),
    };
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err(&format!("row {row}")))?;
        if record.len() != width {
            return Err(Error::Row {
                row,
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        let probs = (0..classes)
            .map(|j| parse_number(&record[j], row, &headers[j]))
            .collect::<Result<Vec<_>>>()?;
        if let Some(labels) = out.labels.as_mut() {
            let cell = &record[classes];
            let label: usize = cell.parse().map_err(|_| Error::Row {
                row,
                message: format!("label `{cell}` is not a class index"),
            })?;
            labels.push(label);
        }
        out.rows.push(probs);
    }
    if out.rows.is_empty() {
        return Err(Error::Input("no data rows".into()));
    }
    Ok(out)
}

/// Load and validate a probability CSV.
pub fn load_probs_csv(path: impl AsRef<Path>) -> Result<ProbMatrix> {
    let path = path.as_ref();
    read_probs_csv(open(path)?)?
        .into_matrix()
        .map_err(|e| match e {
            Error::Row { row, message } => Error::Row {
                row,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })
}

pub fn read_scores_csv<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(csv_err("header"))?.clone();
    let (classes, has_label) = parse_prob_header(&headers, "s_")?;
    let width = classes + has_label as usize;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err(&format!("row {row}")))?;
        if record.len() != width {
            return Err(Error::Row {
                row,
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        let scores = (0..classes)
            .map(|j| parse_number(&record[j], row, &headers[j]))
            .collect::<Result<Vec<_>>>()?;
        if let Some(j) = scores.iter().position(|s| s.is_nan()) {
            return Err(Error::Row {
                row,
                message: format!("column s_{j} is NaN"),
            });
        }
        rows.push(scores);
    }
    Ok(rows)
}

/// Per-label nonconformity scores computed elsewhere, one row per instance.
pub fn load_scores_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    read_scores_csv(open(path)?)
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        format!("{v}")
    }
}

fn numbered_header(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|i| format!("{prefix}{i}")).collect()
}

pub fn write_probs_csv<W: Write>(
    out: W,
    rows: &[Vec<f64>],
    labels: Option<&[usize]>,
) -> Result<()> {
    let k = rows.first().map(Vec::len).unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = numbered_header("p_", k);
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(csv_err("write"))?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        if let Some(labels) = labels {
            rec.push(labels[i].to_string());
        }
        w.write_record(&rec).map_err(csv_err("write"))?;
    }
    w.flush().map_err(|e| Error::io_path("<output>", e))?;
    Ok(())
}

pub fn write_scores_csv<W: Write>(out: W, rows: &[Vec<f64>]) -> Result<()> {
    let k = rows.first().map(Vec::len).unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(numbered_header("s_", k))
        .map_err(csv_err("write"))?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt_f64(v)))
            .map_err(csv_err("write"))?;
    }
    w.flush().map_err(|e| Error::io_path("<output>", e))?;
    Ok(())
}

/// `index,label,score` for calibration-style output.
pub fn write_instance_scores_csv<W: Write>(out: W, labels: &[usize], scores: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "label", "score"])
        .map_err(csv_err("write"))?;
    for (i, (label, score)) in labels.iter().zip(scores).enumerate() {
        w.write_record([i.to_string(), label.to_string(), fmt_f64(*score)])
            .map_err(csv_err("write"))?;
    }
    w.flush().map_err(|e| Error::io_path("<output>", e))?;
    Ok(())
}

pub fn write_sets_csv<W: Write>(out: W, sets: &[PredictionSet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "size", "members"])
        .map_err(csv_err("write"))?;
    for (i, set) in sets.iter().enumerate() {
        let members = set
            .members()
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([i.to_string(), set.size().to_string(), members])
            .map_err(csv_err("write"))?;
    }
    w.flush().map_err(|e| Error::io_path("<output>", e))?;
    Ok(())
}

pub fn read_sets_csv<R: Read>(input: R) -> Result<Vec<PredictionSet>> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(csv_err("header"))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["index", "size", "members"] {
        return Err(Error::Input("expected header `index,size,members`".into()));
    }
    let mut sets = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err(&format!("row {row}")))?;
        if record.len() != 3 {
            return Err(Error::Row {
                row,
                message: format!("expected 3 columns, found {}", record.len()),
            });
        }
        let members = record[2]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.trim().parse::<usize>().map_err(|_| Error::Row {
                    row,
                    message: format!("member `{s}` is not a class index"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let set = PredictionSet::new(members);
        let declared: usize = record[1].parse().map_err(|_| Error::Row {
            row,
            message: format!("size `{}` is not an integer", &record[1]),
        })?;
        if declared != set.size() {
            return Err(Error::Row {
                row,
                message: format!("size {declared} does not match {} members", set.size()),
            });
        }
        sets.push(set);
    }
    Ok(sets)
}

pub fn load_sets_csv(path: impl AsRef<Path>) -> Result<Vec<PredictionSet>> {
    let path = path.as_ref();
    read_sets_csv(open(path)?)
}

pub fn write_curve_csv<W: Write>(out: W, curve: &TradeoffCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "avg_size", "p_size_gt", "coverage"])
        .map_err(csv_err("write"))?;
    for p in &curve.points {
        w.write_record([p.lambda, p.avg_size, p.p_size_gt, p.coverage].map(fmt_f64))
            .map_err(csv_err("write"))?;
    }
    w.flush().map_err(|e| Error::io_path("<output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_labelled_file() {
        let text =
            "p_0,p_1,p_2,p_3,label\n0.1,0.2,0.3,0.4,3\n0.25,0.25,0.25,0.25,0\n0.7,0.1,0.1,0.1,1\n";
        let m = read_probs_csv(text.as_bytes())
            .unwrap()
            .into_matrix()
            .unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.classes(), 4);
        assert_eq!(m.labels(), Some(&[3, 0, 1][..]));
    }

    #[test]
    fn labels_are_optional() {
        let text = "p_0,p_1\n0.5,0.5\n";
        let m = read_probs_csv(text.as_bytes())
            .unwrap()
            .into_matrix()
            .unwrap();
        assert!(m.labels().is_none());
    }

    #[test]
    fn bad_mass_names_the_row() {
        let text = "p_0,p_1,label\n0.5,0.5,0\n0.5,0.4,1\n";
        let err = read_probs_csv(text.as_bytes())
            .unwrap()
            .into_matrix()
            .unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn ragged_and_non_numeric_rows() {
        let err = read_probs_csv("p_0,p_1\n0.5,0.5\n0.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }));
        let err = read_probs_csv("p_0,p_1\nabc,0.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Row { row: 1, .. }));
    }

    #[test]
    fn label_out_of_range() {
        let raw = read_probs_csv("p_0,p_1,label\n0.5,0.5,2\n".as_bytes()).unwrap();
        let err = raw.into_matrix().unwrap_err();
        assert!(err.to_string().contains("out of range"));
    }

    #[test]
    fn header_is_checked() {
        assert!(read_probs_csv("a,b\n0.5,0.5\n".as_bytes()).is_err());
        assert!(read_probs_csv("p_0,label,p_1\n0.5,0,0.5\n".as_bytes()).is_err());
    }

    #[test]
    fn sets_round_trip() {
        let sets = vec![
            PredictionSet::new(vec![2, 0]),
            PredictionSet::new(vec![]),
            PredictionSet::new(vec![1]),
        ];
        let mut buf = Vec::new();
        write_sets_csv(&mut buf, &sets).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("0,2,0;2"));
        assert_eq!(read_sets_csv(buf.as_slice()).unwrap(), sets);
    }

    #[test]
    fn scores_accept_infinity() {
        let rows = read_scores_csv("s_0,s_1\n0.5,inf\n".as_bytes()).unwrap();
        assert_eq!(rows, vec![vec![0.5, f64::INFINITY]]);
    }

    #[test]
    fn written_probabilities_reload_bit_exact() {
        let rows = vec![vec![0.1 + 0.2, 1.0 - 0.1 - 0.2], vec![1.0 / 3.0, 2.0 / 3.0]];
        let mut buf = Vec::new();
        write_probs_csv(&mut buf, &rows, Some(&[0, 1])).unwrap();
        let back = read_probs_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows, rows);
        assert_eq!(back.labels, Some(vec![0, 1]));
    }
}
