//! CSV import and export of labeled samples.
//!
//! Files carry a header `x0,...,x{d-1}` optionally followed by `label`; labels
//! in files are 1-based.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mixture::LabeledSample;

pub fn write_sample_csv<W: Write>(sample: &LabeledSample, mut out: W) -> Result<()> {
    let mut header: Vec<String> = (0..sample.dim()).map(|a| format!("x{a}")).collect();
    if sample.labels().is_some() {
        header.push("label".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, x) in sample.points().enumerate() {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = sample.labels() {
            row.push((labels[i] + 1).to_string());
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_sample_csv<R: Read>(input: R) -> Result<LabeledSample> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let has_label = names.last() == Some(&"label");
    let d = names.len() - usize::from(has_label);
    for (a, name) in names[..d].iter().enumerate() {
        if *name != format!("x{a}") {
            return Err(Error::InvalidParameter(format!(
                "expected column x{a}, found {name:?}"
            )));
        }
    }
    if d == 0 {
        return Err(Error::InvalidParameter("no coordinate columns".into()));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("row {}: cannot parse {s:?} as a number", row + 1))
            })
        };
        for a in 0..d {
            let v = parse(&record[a])?;
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("row {}: non-finite coordinate", row + 1)));
            }
            points.push(v);
        }
        if has_label {
            let l: usize = record[d].trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("row {}: label {:?} is not a positive integer", row + 1, &record[d]))
            })?;
            if l == 0 {
                return Err(Error::InvalidParameter(format!("row {}: labels are 1-based", row + 1)));
            }
            labels.push(l - 1);
        }
    }
    LabeledSample::new(d, points, has_label.then_some(labels))
}
