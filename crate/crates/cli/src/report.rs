//! Benchmark rows and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// CSV header written by [`write_csv`].
pub const CSV_HEADER: &str = "case,method,theta,omega,M,n,alpha1,alpha2,error_inf,iters,wall_time_s,converged";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub case: String,
    pub method: String,
    pub theta: f64,
    pub omega: Option<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    /// Interior points per axis.
    pub n: usize,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub error_inf: Option<f64>,
    pub iters: usize,
    pub wall_time_s: f64,
    pub converged: bool,
}

pub fn write_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ReportRow>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(CliError::Usage(format!("unexpected CSV header `{}`", header.join(","))));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<ReportRow> {
        vec![
            ReportRow {
                case: "ex2".into(),
                method: "pgmres".into(),
                theta: 0.5,
                omega: Some(0.8660254037844386),
                m: 16,
                n: 15,
                alpha1: Some(1.1),
                alpha2: Some(1.2),
                error_inf: Some(6.123456789012345e-4),
                iters: 8,
                wall_time_s: 0.012345678901234,
                converged: true,
            },
            ReportRow {
                case: "ex1_case1".into(),
                method: "gmres".into(),
                theta: 1.0,
                omega: None,
                m: 8,
                n: 31,
                alpha1: None,
                alpha2: None,
                error_inf: None,
                iters: 0,
                wall_time_s: 0.0,
                converged: false,
            },
        ]
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows());
    }

    #[test]
    fn empty_file_keeps_header() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
