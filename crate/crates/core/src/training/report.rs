//! CSV forms of histories, metrics and cross-validation results.
//!
//! Floats are written in shortest round-trip form, so parsing a file back
//! reproduces the values exactly.
//!
//! | file | header |
//! |---|---|
//! | history | `epoch,train_loss,train_accuracy,val_loss,val_accuracy` (empty cells without validation) |
//! | confusion | `truth,<class…>`, one row per true class |
//! | metrics | `class,tp,fp,tn,fn,precision,recall,f1,accuracy,precision_undefined,recall_undefined` |
//! | folds | `fold,accuracy,precision,recall,f1` (macro averages) |
//! | summary | `metric,mean,std` |

use std::io::{Read, Write};
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, Writer};

use super::cv::{CvResult, MetricSummary};
use super::metrics::{ClassMetrics, MetricsReport};
use super::train::EpochRecord;
use super::TrainError;

fn field<T: FromStr>(rec: &StringRecord, i: usize) -> Result<T, TrainError> {
    let raw = rec
        .get(i)
        .ok_or_else(|| TrainError::CsvFormat(format!("missing column {i} in {rec:?}")))?;
    raw.parse()
        .map_err(|_| TrainError::CsvFormat(format!("cannot parse {raw:?} in column {i}")))
}

fn opt_field(rec: &StringRecord, i: usize) -> Result<Option<f64>, TrainError> {
    match rec.get(i) {
        Some("") => Ok(None),
        _ => field(rec, i).map(Some),
    }
}

fn records<R: Read>(r: R, header: &[&str]) -> Result<Vec<StringRecord>, TrainError> {
    let mut rd = ReaderBuilder::new().from_reader(r);
    let h = rd.headers()?.clone();
    if h.iter().collect::<Vec<_>>() != header {
        return Err(TrainError::CsvFormat(format!("unexpected header {h:?}")));
    }
    Ok(rd.records().collect::<Result<_, _>>()?)
}

const HISTORY: [&str; 5] = ["epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"];

pub fn write_history<W: Write>(w: W, records: &[EpochRecord]) -> Result<(), TrainError> {
    let mut wr = Writer::from_writer(w);
    wr.write_record(HISTORY)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        wr.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.train_accuracy.to_string(),
            opt(r.val_loss),
            opt(r.val_accuracy),
        ])?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_history<R: Read>(r: R) -> Result<Vec<EpochRecord>, TrainError> {
    records(r, &HISTORY)?
        .iter()
        .map(|rec| {
            Ok(EpochRecord {
                epoch: field(rec, 0)?,
                train_loss: field(rec, 1)?,
                train_accuracy: field(rec, 2)?,
                val_loss: opt_field(rec, 3)?,
                val_accuracy: opt_field(rec, 4)?,
            })
        })
        .collect()
}

pub fn write_confusion<W: Write>(w: W, report: &MetricsReport) -> Result<(), TrainError> {
    let mut wr = Writer::from_writer(w);
    let mut header = vec!["truth".to_string()];
    header.extend(report.class_names.iter().cloned());
    wr.write_record(&header)?;
    for (name, row) in report.class_names.iter().zip(&report.confusion) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|c| c.to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Rebuilds the full report from a confusion-matrix file.
pub fn read_confusion<R: Read>(r: R) -> Result<MetricsReport, TrainError> {
    let mut rd = ReaderBuilder::new().from_reader(r);
    let h = rd.headers()?.clone();
    if h.get(0) != Some("truth") {
        return Err(TrainError::CsvFormat("confusion header must start with `truth`".into()));
    }
    let names: Vec<String> = h.iter().skip(1).map(str::to_string).collect();
    let mut matrix = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.get(0) != names.get(i).map(String::as_str) {
            return Err(TrainError::CsvFormat(format!("row {i} is not labelled {:?}", names.get(i))));
        }
        matrix.push((1..=names.len()).map(|j| field(&rec, j)).collect::<Result<Vec<usize>, _>>()?);
    }
    MetricsReport::from_confusion(matrix, names)
}

const METRICS: [&str; 11] = [
    "class",
    "tp",
    "fp",
    "tn",
    "fn",
    "precision",
    "recall",
    "f1",
    "accuracy",
    "precision_undefined",
    "recall_undefined",
];

pub fn write_metrics<W: Write>(w: W, report: &MetricsReport) -> Result<(), TrainError> {
    let mut wr = Writer::from_writer(w);
    wr.write_record(METRICS)?;
    for (name, m) in report.class_names.iter().zip(&report.per_class) {
        wr.write_record([
            name.clone(),
            m.tp.to_string(),
            m.fp.to_string(),
            m.tn.to_string(),
            m.fn_.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            m.accuracy.to_string(),
            m.precision_undefined.to_string(),
            m.recall_undefined.to_string(),
        ])?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<(String, ClassMetrics)>, TrainError> {
    records(r, &METRICS)?
        .iter()
        .map(|rec| {
            Ok((
                field(rec, 0)?,
                ClassMetrics {
                    tp: field(rec, 1)?,
                    fp: field(rec, 2)?,
                    tn: field(rec, 3)?,
                    fn_: field(rec, 4)?,
                    precision: field(rec, 5)?,
                    recall: field(rec, 6)?,
                    f1: field(rec, 7)?,
                    accuracy: field(rec, 8)?,
                    precision_undefined: field(rec, 9)?,
                    recall_undefined: field(rec, 10)?,
                },
            ))
        })
        .collect()
}

const FOLDS: [&str; 5] = ["fold", "accuracy", "precision", "recall", "f1"];

/// `(fold, accuracy, macro precision, macro recall, macro F1)`
pub type FoldRow = (usize, f64, f64, f64, f64);

pub fn fold_rows(cv: &CvResult) -> Vec<FoldRow> {
    cv.folds
        .iter()
        .map(|f| {
            (
                f.fold,
                f.report.accuracy,
                f.report.macro_precision,
                f.report.macro_recall,
                f.report.macro_f1,
            )
        })
        .collect()
}

pub fn write_folds<W: Write>(w: W, rows: &[FoldRow]) -> Result<(), TrainError> {
    let mut wr = Writer::from_writer(w);
    wr.write_record(FOLDS)?;
    for r in rows {
        wr.write_record([r.0.to_string(), r.1.to_string(), r.2.to_string(), r.3.to_string(), r.4.to_string()])?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_folds<R: Read>(r: R) -> Result<Vec<FoldRow>, TrainError> {
    records(r, &FOLDS)?
        .iter()
        .map(|rec| Ok((field(rec, 0)?, field(rec, 1)?, field(rec, 2)?, field(rec, 3)?, field(rec, 4)?)))
        .collect()
}

const SUMMARY: [&str; 3] = ["metric", "mean", "std"];

pub fn summary_rows(cv: &CvResult) -> Vec<(String, MetricSummary)> {
    vec![
        ("accuracy".into(), cv.accuracy),
        ("precision".into(), cv.precision),
        ("recall".into(), cv.recall),
        ("f1".into(), cv.f1),
    ]
}

pub fn write_summary<W: Write>(w: W, rows: &[(String, MetricSummary)]) -> Result<(), TrainError> {
    let mut wr = Writer::from_writer(w);
    wr.write_record(SUMMARY)?;
    for (name, s) in rows {
        wr.write_record([name.clone(), s.mean.to_string(), s.std.to_string()])?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<(String, MetricSummary)>, TrainError> {
    records(r, &SUMMARY)?
        .iter()
        .map(|rec| {
            Ok((
                field(rec, 0)?,
                MetricSummary {
                    mean: field(rec, 1)?,
                    std: field(rec, 2)?,
                },
            ))
        })
        .collect()
}
