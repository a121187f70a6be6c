//! Results CSV: one row per run, plus per-cell means.
//!
//! Floats are written with six decimals, lines end in LF. Means are taken
//! over the values as written, so the mean file can be recomputed exactly from
//! the per-run file.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use swarmupdate_core::{MetricsRecord, Strategy};

pub const HEADER: [&str; 15] = [
    "strategy",
    "swarm_size",
    "failure_rate",
    "patch_packets",
    "rep",
    "seed",
    "convergence_steps",
    "steps_per_drone",
    "overhead_bytes",
    "overhead_per_drone_bytes",
    "packet_emissions",
    "signal_emissions",
    "evictions",
    "aborts",
    "converged",
];

pub const MEAN_HEADER: [&str; 14] = [
    "strategy",
    "swarm_size",
    "failure_rate",
    "patch_packets",
    "reps",
    "converged_reps",
    "convergence_steps",
    "steps_per_drone",
    "overhead_bytes",
    "overhead_per_drone_bytes",
    "packet_emissions",
    "signal_emissions",
    "evictions",
    "aborts",
];

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: column `{column}` has invalid value `{value}`")]
    BadValue { line: u64, column: &'static str, value: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn float(v: f64) -> String {
    format!("{v:.6}")
}

/// `v` as it reads back from the CSV.
pub fn rendered(v: f64) -> f64 {
    float(v).parse().expect("formatted float parses")
}

/// Companion file of the means: `results.csv` → `results.mean.csv`.
pub fn mean_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.mean.csv"))
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_rows<W: Write>(w: W, rows: &[MetricsRecord]) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(HEADER)?;
    for r in rows {
        out.write_record([
            r.strategy.name().to_string(),
            r.swarm_size.to_string(),
            float(r.failure_rate),
            r.patch_packets.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.convergence_steps.to_string(),
            float(r.steps_per_drone),
            r.overhead_bytes.to_string(),
            float(r.overhead_per_drone_bytes),
            r.packet_emissions.to_string(),
            r.signal_emissions.to_string(),
            r.evictions.to_string(),
            r.aborts.to_string(),
            r.converged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a results file, locating columns by header name.
pub fn read_rows<R: Read>(r: R) -> Result<Vec<MetricsRecord>, SchemaError> {
    let mut input = csv::ReaderBuilder::new().from_reader(r);
    let headers = input.headers()?.clone();
    let mut index = [0usize; HEADER.len()];
    for (slot, name) in index.iter_mut().zip(HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(SchemaError::MissingColumn(name))?;
    }
    let mut rows = Vec::new();
    for record in input.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(index[i]).unwrap_or("").trim();
        fn parse<T: std::str::FromStr>(line: u64, column: &'static str, value: &str) -> Result<T, SchemaError> {
            value.parse().map_err(|_| SchemaError::BadValue {
                line,
                column,
                value: value.to_string(),
            })
        }
        let p = |i: usize| (line, HEADER[i], field(i));
        macro_rules! get {
            ($i:expr) => {{
                let (l, c, v) = p($i);
                parse(l, c, v)?
            }};
        }
        let strategy: Strategy = get!(0);
        rows.push(MetricsRecord {
            strategy,
            swarm_size: get!(1),
            failure_rate: get!(2),
            patch_packets: get!(3),
            rep: get!(4),
            seed: get!(5),
            convergence_steps: get!(6),
            steps_per_drone: get!(7),
            overhead_bytes: get!(8),
            overhead_per_drone_bytes: get!(9),
            packet_emissions: get!(10),
            signal_emissions: get!(11),
            evictions: get!(12),
            aborts: get!(13),
            converged: get!(14),
        });
    }
    Ok(rows)
}

/// Means over the repetitions of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMean {
    pub strategy: Strategy,
    pub swarm_size: usize,
    pub failure_rate: f64,
    pub patch_packets: u32,
    pub reps: u32,
    pub converged_reps: u32,
    pub convergence_steps: f64,
    pub steps_per_drone: f64,
    pub overhead_bytes: f64,
    pub overhead_per_drone_bytes: f64,
    pub packet_emissions: f64,
    pub signal_emissions: f64,
    pub evictions: f64,
    pub aborts: f64,
}

impl CellMean {
    pub fn is_cell(&self, strategy: Strategy, swarm_size: usize, failure_rate: f64, patch_packets: u32) -> bool {
        self.strategy == strategy
            && self.swarm_size == swarm_size
            && float(self.failure_rate) == float(failure_rate)
            && self.patch_packets == patch_packets
    }
}

/// Cells in order of first appearance.
pub fn cell_means(rows: &[MetricsRecord]) -> Vec<CellMean> {
    let mut groups: Vec<Vec<&MetricsRecord>> = Vec::new();
    for r in rows {
        let same = |g: &&mut Vec<&MetricsRecord>| {
            let f = g[0];
            f.strategy == r.strategy
                && f.swarm_size == r.swarm_size
                && float(f.failure_rate) == float(r.failure_rate)
                && f.patch_packets == r.patch_packets
        };
        match groups.iter_mut().find(same) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let n = g.len() as f64;
            let mean = |v: fn(&MetricsRecord) -> f64| g.iter().map(|r| v(r)).sum::<f64>() / n;
            let first = g[0];
            CellMean {
                strategy: first.strategy,
                swarm_size: first.swarm_size,
                failure_rate: rendered(first.failure_rate),
                patch_packets: first.patch_packets,
                reps: g.len() as u32,
                converged_reps: g.iter().filter(|r| r.converged).count() as u32,
                convergence_steps: mean(|r| r.convergence_steps as f64),
                steps_per_drone: mean(|r| rendered(r.steps_per_drone)),
                overhead_bytes: mean(|r| r.overhead_bytes as f64),
                overhead_per_drone_bytes: mean(|r| rendered(r.overhead_per_drone_bytes)),
                packet_emissions: mean(|r| r.packet_emissions as f64),
                signal_emissions: mean(|r| r.signal_emissions as f64),
                evictions: mean(|r| r.evictions as f64),
                aborts: mean(|r| r.aborts as f64),
            }
        })
        .collect()
}

pub fn write_means<W: Write>(w: W, means: &[CellMean]) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(MEAN_HEADER)?;
    for m in means {
        out.write_record([
            m.strategy.name().to_string(),
            m.swarm_size.to_string(),
            float(m.failure_rate),
            m.patch_packets.to_string(),
            m.reps.to_string(),
            m.converged_reps.to_string(),
            float(m.convergence_steps),
            float(m.steps_per_drone),
            float(m.overhead_bytes),
            float(m.overhead_per_drone_bytes),
            float(m.packet_emissions),
            float(m.signal_emissions),
            float(m.evictions),
            float(m.aborts),
        ])?;
    }
    out.flush()?;
    Ok(())
}
