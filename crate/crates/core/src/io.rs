//! Trajectory CSV.
//!
//! One row per path: the first column is a path id, the remaining `p`
//! columns are the values at `t₁..t_p`. The header row is `id` followed by
//! the grid points `t₁..t_p` (`t₀ = 0` is implicit). A paired sample is one
//! file whose ids are `x_k` and `y_k`.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{PairedSample, Partition, Trajectory};

/// Fixed float format: 17 significant digits, round-trips exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_float(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: '{field}' is not a number")))
}

pub fn write_trajectories<W: Write>(writer: W, ids: &[String], paths: &[Trajectory]) -> Result<()> {
    if ids.len() != paths.len() {
        return Err(Error::invalid(format!("{} ids for {} paths", ids.len(), paths.len())));
    }
    let Some(first) = paths.first() else {
        return Err(Error::invalid("no trajectories to write"));
    };
    if paths.iter().any(|t| !t.same_grid(first)) {
        return Err(Error::invalid("trajectories are on different grids"));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(first.partition().observation_times().iter().map(|&t| format_float(t)));
    w.write_record(&header)?;
    for (id, path) in ids.iter().zip(paths) {
        let mut row = vec![id.clone()];
        row.extend(path.values().iter().map(|&v| format_float(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Trajectory>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers()?.clone();
    if header.get(0).map(str::trim) != Some("id") || header.len() < 2 {
        return Err(Error::Parse("header must be 'id' followed by the grid points".into()));
    }
    let mut points = vec![0.0];
    for field in header.iter().skip(1) {
        points.push(parse_float(field, "grid point")?);
    }
    let partition = Arc::new(Partition::new(points)?);
    let mut ids = Vec::new();
    let mut paths = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let id = record.get(0).unwrap_or_default().trim().to_string();
        let values = record
            .iter()
            .skip(1)
            .map(|f| parse_float(f, &format!("row {}", line + 2)))
            .collect::<Result<Vec<_>>>()?;
        paths.push(Trajectory::new(partition.clone(), values)?);
        ids.push(id);
    }
    if paths.is_empty() {
        return Err(Error::Parse("no trajectory rows".into()));
    }
    Ok((ids, paths))
}

pub fn write_pair<W: Write>(writer: W, sample: &PairedSample) -> Result<()> {
    let n = sample.len();
    let ids: Vec<String> = (0..n).map(|k| format!("x_{k}")).chain((0..n).map(|k| format!("y_{k}"))).collect();
    let paths: Vec<Trajectory> = sample.x().iter().chain(sample.y()).cloned().collect();
    write_trajectories(writer, &ids, &paths)
}

/// Reads a paired sample; `x_*` rows and `y_*` rows are paired in file order.
pub fn read_pair<R: Read>(reader: R) -> Result<PairedSample> {
    let (ids, paths) = read_trajectories(reader)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (id, path) in ids.iter().zip(paths) {
        if id.starts_with("x_") {
            x.push(path);
        } else if id.starts_with("y_") {
            y.push(path);
        } else {
            return Err(Error::Parse(format!("path id '{id}' must start with x_ or y_")));
        }
    }
    PairedSample::new(x, y)
}

pub fn read_trajectories_file(path: &Path) -> Result<Vec<Trajectory>> {
    let file = std::fs::File::open(path).map_err(|e| Error::in_file(path)(e.into()))?;
    Ok(read_trajectories(file).map_err(Error::in_file(path))?.1)
}

pub fn read_pair_file(path: &Path) -> Result<PairedSample> {
    let file = std::fs::File::open(path).map_err(|e| Error::in_file(path)(e.into()))?;
    read_pair(file).map_err(Error::in_file(path))
}
