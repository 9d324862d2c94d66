//! CSV artifacts: the per-step time series and nodal snapshots.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which
//! round-trips every finite `f64` exactly.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use kwc_core::{Field, GridSpec, SimState, StepReport};

pub const SERIES_FILE: &str = "series.csv";
pub const SERIES_HEADER: [&str; 9] = [
    "j",
    "t",
    "energy",
    "minH",
    "maxH",
    "minTheta",
    "maxTheta",
    "theta_iters",
    "dissipation_slack",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One line of `series.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRow {
    pub j: usize,
    pub t: f64,
    pub energy: f64,
    pub min_h: f64,
    pub max_h: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    pub theta_iters: usize,
    pub dissipation_slack: f64,
}

impl TimeSeriesRow {
    /// Row of the initial state; no solve, zero slack.
    pub fn initial(state: &SimState) -> Self {
        Self::from_state(state, 0, 0.0)
    }

    pub fn after_step(state: &SimState, report: &StepReport) -> Self {
        Self::from_state(state, report.theta_iters, report.dissipation_slack)
    }

    fn from_state(s: &SimState, theta_iters: usize, dissipation_slack: f64) -> Self {
        Self {
            j: s.j,
            t: s.t,
            energy: s.energy,
            min_h: s.h.min(),
            max_h: s.h.max(),
            min_theta: s.theta.min(),
            max_theta: s.theta.max(),
            theta_iters,
            dissipation_slack,
        }
    }

    pub fn record(&self) -> [String; 9] {
        [
            self.j.to_string(),
            fmt_f64(self.t),
            fmt_f64(self.energy),
            fmt_f64(self.min_h),
            fmt_f64(self.max_h),
            fmt_f64(self.min_theta),
            fmt_f64(self.max_theta),
            self.theta_iters.to_string(),
            fmt_f64(self.dissipation_slack),
        ]
    }

    fn parse(rec: &csv::StringRecord) -> anyhow::Result<Self> {
        if rec.len() != SERIES_HEADER.len() {
            bail!("expected {} fields, got {}", SERIES_HEADER.len(), rec.len());
        }
        let f = |i: usize| -> anyhow::Result<f64> {
            rec[i].parse().with_context(|| format!("column {}: `{}`", SERIES_HEADER[i], &rec[i]))
        };
        let u = |i: usize| -> anyhow::Result<usize> {
            rec[i].parse().with_context(|| format!("column {}: `{}`", SERIES_HEADER[i], &rec[i]))
        };
        Ok(Self {
            j: u(0)?,
            t: f(1)?,
            energy: f(2)?,
            min_h: f(3)?,
            max_h: f(4)?,
            min_theta: f(5)?,
            max_theta: f(6)?,
            theta_iters: u(7)?,
            dissipation_slack: f(8)?,
        })
    }
}

/// Streams rows to a CSV sink, flushing after each one so a failed run
/// leaves every completed step on disk.
pub struct SeriesWriter<W: Write> {
    inner: csv::Writer<W>,
    last_j: Option<usize>,
}

impl SeriesWriter<File> {
    pub fn create(path: &Path) -> anyhow::Result<Self> {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Self::new(f)
    }
}

impl<W: Write> SeriesWriter<W> {
    pub fn new(sink: W) -> anyhow::Result<Self> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(SERIES_HEADER)?;
        Ok(Self { inner, last_j: None })
    }

    pub fn push(&mut self, row: &TimeSeriesRow) -> anyhow::Result<()> {
        if self.last_j.is_some_and(|j| row.j <= j) {
            bail!("row j = {} after j = {}", row.j, self.last_j.unwrap());
        }
        self.inner.write_record(row.record())?;
        self.inner.flush()?;
        self.last_j = Some(row.j);
        Ok(())
    }

    pub fn into_inner(self) -> anyhow::Result<W> {
        self.inner.into_inner().map_err(|e| anyhow::anyhow!("{}", e.error()))
    }
}

pub fn read_series(reader: impl Read) -> anyhow::Result<Vec<TimeSeriesRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(SERIES_HEADER) {
        bail!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","));
    }
    let mut rows: Vec<TimeSeriesRow> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = TimeSeriesRow::parse(&rec?).with_context(|| format!("row {}", i + 1))?;
        if rows.last().is_some_and(|p| row.j <= p.j) {
            bail!("row {}: j = {} is not increasing", i + 1, row.j);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_series_file(path: &Path) -> anyhow::Result<Vec<TimeSeriesRow>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_series(f).with_context(|| path.display().to_string())
}

pub fn snapshot_path(dir: &Path, field: &str, j: usize) -> PathBuf {
    dir.join(format!("snap_{field}_{j}.csv"))
}

/// Writes `x,value` for the nodes `k = 0..=K`.
pub fn write_snapshot(sink: impl Write, grid: &GridSpec, f: &Field) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["x", "value"])?;
    for (k, v) in f.interior().iter().enumerate() {
        w.write_record([fmt_f64(grid.x(k as isize)), fmt_f64(*v)])?;
    }
    w.flush()
}

pub fn read_snapshot(reader: impl Read) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 {
            bail!("expected 2 fields, got {}", rec.len());
        }
        out.push((rec[0].parse()?, rec[1].parse()?));
    }
    Ok(out)
}

/// Saves `snap_H_<j>.csv` and `snap_Theta_<j>.csv`.
pub fn write_snapshots(dir: &Path, grid: &GridSpec, state: &SimState) -> anyhow::Result<()> {
    for (name, f) in [("H", &state.h), ("Theta", &state.theta)] {
        let path = snapshot_path(dir, name, state.j);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_snapshot(io::BufWriter::new(file), grid, f)?;
    }
    Ok(())
}
