use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::run::{direct_samples_table, DensityTable, ExperimentReport, RunOutput};
use crate::combine::Method;
use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "model,d,M,method,parameter,relative_l2";

/// Metric rows for one experiment: one row per (method, parameter) and an
/// `average` row per method.
pub fn report_rows(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for r in &report.reports {
        for (p, v) in r.parameters.iter().zip(&r.per_parameter) {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.model, r.d, r.shards, r.method, p, v);
        }
        let _ = writeln!(out, "{},{},{},{},average,{}", r.model, r.d, r.shards, r.method, r.average);
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Write `report.csv`, `report.json`, and any retained densities and samples
/// into `dir`.
pub fn write_experiment(dir: &Path, run: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_text(&dir.join("report.csv"), &format!("{REPORT_HEADER}\n{}", report_rows(&run.report)))?;
    write_text(&dir.join("report.json"), &serde_json::to_string_pretty(&run.report)?)?;
    if let Some(tables) = &run.densities {
        let ddir = dir.join("densities");
        fs::create_dir_all(&ddir)?;
        for t in tables {
            write_density_table(&ddir.join(format!("param_{}.csv", t.parameter)), t)?;
        }
    }
    if run.report.config.want_samples {
        let sdir = dir.join("samples");
        fs::create_dir_all(&sdir)?;
        for s in &run.shards {
            s.draws.write_csv(BufWriter::new(File::create(sdir.join(format!("shard_{}.csv", s.shard_id)))?))?;
        }
        run.full.draws.write_csv(BufWriter::new(File::create(sdir.join("full.csv"))?))?;
        for c in &run.combined {
            c.draws.write_csv(BufWriter::new(File::create(sdir.join(format!("{}.csv", c.method)))?))?;
        }
        if let Some(draws) = run.direct.as_deref().and_then(direct_samples_table) {
            draws.write_csv(BufWriter::new(File::create(sdir.join("direct.csv"))?))?;
        }
        let meta = serde_json::json!({
            "parameters": run.report.parameters,
            "methods": run.combined.iter().map(|c| c.method).collect::<Vec<_>>(),
            "seeds": run.report.seeds,
        });
        write_text(&sdir.join("metadata.json"), &serde_json::to_string_pretty(&meta)?)?;
    }
    Ok(())
}

/// Record a failed run.
pub fn write_error(dir: &Path, name: &str, error: &Error) -> Result<()> {
    fs::create_dir_all(dir)?;
    let stage = match error {
        Error::Stage { stage, .. } => stage.to_string(),
        _ => "unknown".to_string(),
    };
    let record = serde_json::json!({
        "experiment": name,
        "stage": stage,
        "error": error.root().to_string(),
    });
    write_text(&dir.join("error.json"), &serde_json::to_string_pretty(&record)?)
}

/// Concatenated metric rows of several experiments.
pub fn write_combined_report(path: &Path, reports: &[&ExperimentReport]) -> Result<()> {
    let mut text = format!("{REPORT_HEADER}\n");
    for r in reports {
        text.push_str(&report_rows(r));
    }
    write_text(path, &text)
}

fn write_density_table(path: &Path, table: &DensityTable) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    let names: Vec<&str> = table.columns.iter().map(|(n, _)| n.as_str()).collect();
    writeln!(f, "x,{}", names.join(","))?;
    for (i, x) in table.grid.points().enumerate() {
        write!(f, "{x:.16e}")?;
        for (_, col) in &table.columns {
            write!(f, ",{:.16e}", col[i])?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

/// Experiment directories under `dir`: `dir` itself if it holds a report,
/// otherwise its immediate subdirectories that do, sorted by name.
pub fn experiment_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join("report.json").is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut found: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("report.json").is_file())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(Error::Config(format!("no report.json under {}", dir.display())));
    }
    Ok(found)
}

pub fn read_report(dir: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(dir.join("report.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// Table of average relative L2 per method, one line per experiment.
pub fn format_summary(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<24} {:>3} {:>4}", "model", "d", "M");
    for m in Method::ALL {
        let _ = write!(out, " {:>10}", m.as_str());
    }
    let _ = writeln!(out, " {:>10}", "seconds");
    for r in reports {
        let _ = write!(out, "{:<24} {:>3} {:>4}", r.config.model.name(), r.config.model.dim(), r.config.shards);
        for m in Method::ALL {
            match r.method(m) {
                Some(l2) => {
                    let _ = write!(out, " {:>10.4}", l2.average);
                }
                None => {
                    let _ = write!(out, " {:>10}", "-");
                }
            }
        }
        let _ = writeln!(out, " {:>10.1}", r.timings.total);
    }
    out
}

/// Split `densities/param_<j>.csv` into a shard-density file and a combined
/// file (full-data density and each method) under `plots/`.
pub fn export_plot_data(dir: &Path, parameter: usize) -> Result<(PathBuf, PathBuf)> {
    let report = read_report(dir)?;
    if !report.parameters.contains(&parameter) {
        return Err(Error::Config(format!(
            "parameter {parameter} was not estimated; available: {}",
            report.parameters.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
        )));
    }
    let source = dir.join("densities").join(format!("param_{parameter}.csv"));
    if !report.densities_kept || !source.is_file() {
        return Err(Error::MissingDensities(format!(
            "{} not found; rerun with --keep-densities",
            source.display()
        )));
    }
    let mut lines = BufReader::new(File::open(&source)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::MissingDensities(format!("{} is empty", source.display())))?;
    let names: Vec<&str> = header.split(',').collect();
    let shard_idx: Vec<usize> = (1..names.len()).filter(|&i| names[i].starts_with("shard_")).collect();
    let other_idx: Vec<usize> = (1..names.len()).filter(|&i| !names[i].starts_with("shard_")).collect();

    let pdir = dir.join("plots");
    fs::create_dir_all(&pdir)?;
    let shard_path = pdir.join(format!("param_{parameter}_shards.csv"));
    let combined_path = pdir.join(format!("param_{parameter}_combined.csv"));
    let mut shards_out = BufWriter::new(File::create(&shard_path)?);
    let mut combined_out = BufWriter::new(File::create(&combined_path)?);
    let pick = |fields: &[&str], idx: &[usize]| -> String {
        std::iter::once(fields[0])
            .chain(idx.iter().map(|&i| fields[i]))
            .collect::<Vec<_>>()
            .join(",")
    };
    writeln!(shards_out, "{}", pick(&names, &shard_idx))?;
    writeln!(combined_out, "{}", pick(&names, &other_idx))?;
    for line in lines {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::MissingDensities(format!("{} is malformed", source.display())));
        }
        writeln!(shards_out, "{}", pick(&fields, &shard_idx))?;
        writeln!(combined_out, "{}", pick(&fields, &other_idx))?;
    }
    shards_out.flush()?;
    combined_out.flush()?;
    Ok((shard_path, combined_path))
}
