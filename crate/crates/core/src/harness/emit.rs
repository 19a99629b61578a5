use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::sim::{LogRow, RunLog};
use crate::harness::svg;
use crate::harness::sweep::SweepSummary;

pub const CSV_COLUMNS: [&str; 25] = [
    "t", "qw", "qx", "qy", "qz", "wx", "wy", "wz", "qdw", "qdx", "qdy", "qdz", "wdx", "wdy", "wdz",
    "taux", "tauy", "tauz", "sigma", "lambda", "v_plus", "v_minus", "psi", "psi_d", "fa",
];

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "wz",
    "psi0_deg",
    "controller",
    "n",
    "gamma_tau_mean",
    "gamma_tau_esd",
    "gamma_p_mean",
    "gamma_p_esd",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(Error::InvalidArgument(format!("unknown format '{other}'"))),
        }
    }
}

impl LogRow {
    /// Values in [`CSV_COLUMNS`] order.
    pub fn csv_values(&self) -> [f64; 25] {
        let q = self.state.q.as_quaternion();
        let qd = self.reference.qd.as_quaternion();
        let (w, wd, tau) = (self.state.w, self.reference.wd, self.tau);
        [
            self.t,
            q.w,
            q.v.x,
            q.v.y,
            q.v.z,
            w.x,
            w.y,
            w.z,
            qd.w,
            qd.v.x,
            qd.v.y,
            qd.v.z,
            wd.x,
            wd.y,
            wd.z,
            tau.x,
            tau.y,
            tau.z,
            self.sigma.value(),
            self.lambda,
            self.v_plus,
            self.v_minus,
            self.psi,
            self.psi_d,
            self.fa,
        ]
    }
}

/// 17 significant digits, enough to reproduce every `f64` exactly.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

fn write_run_records<W: Write>(log: &RunLog, w: W) -> std::result::Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_COLUMNS)?;
    for row in &log.rows {
        wr.write_record(row.csv_values().iter().map(|&x| num(x)))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn run_to_csv(log: &RunLog) -> String {
    let mut buf = Vec::new();
    write_run_records(log, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

fn write_summary_records<W: Write>(s: &SweepSummary, w: W) -> std::result::Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SUMMARY_COLUMNS)?;
    for c in &s.cells {
        wr.write_record([
            num(c.pair.wz),
            num(c.pair.psi0_deg),
            c.controller.name().to_string(),
            c.gamma_tau.n.to_string(),
            num(c.gamma_tau.mean),
            num(c.gamma_tau.esd),
            num(c.gamma_p.mean),
            num(c.gamma_p.esd),
            if c.failed { "failed" } else { "ok" }.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn summary_to_csv(s: &SweepSummary) -> String {
    let mut buf = Vec::new();
    write_summary_records(s, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| match e.io_error_kind() {
        Some(kind) => Error::io(path, kind.into()),
        None => Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_run_csv(log: &RunLog, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_run_records(log, BufWriter::new(f)).map_err(|e| csv_err(path, e))
}

pub fn emit_run(log: &RunLog, format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Csv => write_run_csv(log, path),
        Format::Json => write_json(log, path),
        Format::Svg => {
            let title = format!("{} controller", log.controller.name());
            write_text(path, &svg::run_svg(&svg::RunSeries::from(log), &title))
        }
    }
}

pub fn emit_summary(s: &SweepSummary, format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Csv => write_text(path, &summary_to_csv(s)),
        Format::Json => write_json(s, path),
        Format::Svg => write_text(path, &svg::summary_svg(s)),
    }
}

/// Numeric columns read back from a run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Parses a CSV whose fields are all numbers. `path` is only used in errors.
pub fn parse_numeric_csv(text: &str, path: &Path) -> Result<CsvTable> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = rd
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("line {}: '{f}' is not a number", i + 2),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { columns, rows })
}

pub fn read_run_csv(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_numeric_csv(&text, path)
}
