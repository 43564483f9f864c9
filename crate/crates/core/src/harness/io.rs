use std::fs;
use std::path::Path;

use serde_json::json;

use super::config::ExperimentConfig;
use super::experiment::ExperimentResult;
use super::svg::scatter_svg;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::points::Points;

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn coord_header(dim: usize) -> impl Iterator<Item = String> {
    (0..dim).map(|k| format!("x{k}"))
}

/// Writes points as CSV with columns `x0, x1, ...`.
pub fn write_points_csv(path: impl AsRef<Path>, points: &Points) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let wrap = |e| Error::csv(path, e);
    w.write_record(coord_header(points.dim())).map_err(wrap)?;
    for row in points.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_particles_csv(path: &Path, ensemble: &Ensemble) -> Result<()> {
    let mut w = writer(path)?;
    let wrap = |e| Error::csv(path, e);
    let header = ["id".to_string(), "weight".to_string()].into_iter().chain(coord_header(ensemble.dim()));
    w.write_record(header).map_err(wrap)?;
    for (i, (row, a)) in ensemble.positions.rows().zip(&ensemble.weights).enumerate() {
        let fields = [i.to_string(), format!("{a:?}")].into_iter().chain(row.iter().map(|v| format!("{v:?}")));
        w.write_record(fields).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> =
        r.headers().map_err(|e| Error::csv(path, e))?.iter().map(|s| s.to_ascii_lowercase()).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("{}: row {}: cannot parse {f:?}", path.display(), line + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn coordinate_columns(header: &[String]) -> Vec<usize> {
    let mut cols: Vec<(usize, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix('x')?.parse::<usize>().ok().map(|k| (k, i)))
        .collect();
    cols.sort();
    cols.into_iter().map(|(_, i)| i).collect()
}

fn gather(rows: &[Vec<f64>], cols: &[usize]) -> Result<Points> {
    let data: Vec<Vec<f64>> = rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
    Points::from_rows(&data)
}

/// Reads points written by [`write_points_csv`] (any `x<k>` columns).
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Points> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    let cols = coordinate_columns(&header);
    if cols.is_empty() || rows.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no coordinate columns or rows", path.display())));
    }
    gather(&rows, &cols)
}

/// Reads a weighted particle file (`id, weight, x0, ...`). Missing weights
/// mean uniform weights; weights are renormalised to sum to one.
pub fn read_particles_csv(path: impl AsRef<Path>) -> Result<Ensemble> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    let cols = coordinate_columns(&header);
    if cols.is_empty() || rows.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no coordinate columns or rows", path.display())));
    }
    let positions = gather(&rows, &cols)?;
    match header.iter().position(|h| h == "weight") {
        None => Ensemble::uniform(positions),
        Some(w) => {
            let weights: Vec<f64> = rows.iter().map(|r| r[w]).collect();
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) || weights.iter().any(|a| !(*a >= 0.0)) {
                return Err(Error::InvalidInput(format!("{}: weights must be nonnegative with positive sum", path.display())));
            }
            Ensemble::new(positions, weights.into_iter().map(|a| a / total).collect())
        }
    }
}

/// Writes `results.csv`, `summary.csv`, `run_meta.json`, `reference.csv`,
/// one `particles_<alg>_<M>_<rep>.csv` per successful run and, when enabled
/// and the target is planar, `scatter_<alg>_<M>.svg` for the first run of
/// the largest particle count of each algorithm.
pub fn write_outputs(result: &ExperimentResult, config: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("results.csv");
    let mut w = writer(&path)?;
    for row in &result.table.rows {
        w.serialize(row).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("summary.csv");
    let mut w = writer(&path)?;
    for row in result.table.summary() {
        w.serialize(row).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    write_points_csv(dir.join("reference.csv"), &result.reference)?;

    for run in &result.runs {
        if let Some(ens) = &run.ensemble {
            let name = format!("particles_{}_{}_{}.csv", file_safe(&run.algorithm), run.particles, run.repeat);
            write_particles_csv(&dir.join(name), ens)?;
        }
    }

    let meta = json!({
        "name": config.name,
        "seed": config.seed,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "target": result.target.description,
        "reference": result.reference_meta,
        "algorithms": result.specs,
        "particle_counts": config.particle_counts,
        "repeats": config.repeats,
        "metrics": config.metrics,
        "ksd_bandwidth": config.ksd_bandwidth,
        "runs": result.runs.iter().map(|r| json!({
            "algorithm": r.algorithm,
            "particles": r.particles,
            "repeat": r.repeat,
            "seed": r.seed,
            "ok": r.ensemble.is_some(),
            "wall_time_s": r.wall_time_secs,
            "trace": r.trace,
        })).collect::<Vec<_>>(),
    });
    let path = dir.join("run_meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("metadata is serialisable");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    if config.svg {
        if result.target.target.dim() != 2 {
            log::info!("skipping SVG output: target is not two-dimensional");
        } else {
            let largest = config.particle_counts.iter().copied().max().unwrap_or(0);
            for run in result.runs.iter().filter(|r| r.particles == largest && r.repeat == 0) {
                let Some(ens) = &run.ensemble else { continue };
                let title = format!("{} (M = {})", run.algorithm, run.particles);
                let svg = scatter_svg(result.target.target.as_ref(), ens, Some(&result.reference), &title)?;
                let path = dir.join(format!("scatter_{}_{}.svg", file_safe(&run.algorithm), run.particles));
                fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    Ok(())
}

fn file_safe(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn particles_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let ens = Ensemble::new(Points::from_rows(&[[0.5, -1.0], [2.0, 3.25]]).unwrap(), vec![0.25, 0.75]).unwrap();
        write_particles_csv(&path, &ens).unwrap();
        let back = read_particles_csv(&path).unwrap();
        assert_eq!(back, ens);
    }

    #[test]
    fn points_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let pts = Points::from_rows(&[[0.1, 0.2, 0.3]]).unwrap();
        write_points_csv(&path, &pts).unwrap();
        assert_eq!(read_points_csv(&path).unwrap(), pts);
    }
}
