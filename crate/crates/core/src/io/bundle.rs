use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{fmt_f64, line_plot, Curve, ExperimentConfig};
use crate::ensemble::{EnsembleResult, Observable, SeriesStats, TimeSeriesStats};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub realizations: usize,
    pub grid_points: usize,
    pub workers: usize,
    pub version: String,
    pub wall_time_seconds: f64,
    pub observables: Vec<String>,
    /// Re-running this config reproduces every CSV of the bundle.
    pub config: ExperimentConfig,
}

/// A bundle read back from disk.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub path: PathBuf,
    pub manifest: Manifest,
    pub stats: TimeSeriesStats,
}

impl Bundle {
    pub fn config(&self) -> &ExperimentConfig {
        &self.manifest.config
    }

    /// Directory name, used as a curve label.
    pub fn label(&self) -> String {
        self.path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.manifest.name.clone())
    }
}

fn stats_csv(times: &[f64], s: &SeriesStats) -> String {
    let mut out = String::from("t,mean,sigma_cl,sem,R\n");
    for (k, t) in times.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(s.mean[k]),
            fmt_f64(s.sigma_cl[k]),
            fmt_f64(s.sem[k]),
            s.count[k]
        );
    }
    out
}

fn raw_csv(result: &EnsembleResult, obs: Observable) -> String {
    let mut out = String::from("t");
    for r in &result.records {
        let _ = write!(out, ",r{}", r.index);
    }
    out.push('\n');
    for (k, t) in result.times.iter().enumerate() {
        out.push_str(&fmt_f64(*t));
        for r in &result.records {
            let v = r.get(obs).map_or(f64::NAN, |s| s[k]);
            let _ = write!(out, ",{}", fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

fn fields_csv(result: &EnsembleResult) -> String {
    let n = result.config.n_sites;
    let mut out = String::from("realization");
    for i in 1..=n {
        let _ = write!(out, ",h{i}");
    }
    out.push('\n');
    for r in &result.records {
        out.push_str(&r.index.to_string());
        for h in &r.fields {
            let _ = write!(out, ",{}", fmt_f64(*h));
        }
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn scratch_name(dir: &Path, name: &str, tag: &str) -> PathBuf {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.subsec_nanos());
    dir.join(format!(".{name}.{tag}-{}-{nanos}", std::process::id()))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_file_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = scratch_name(dir, &name, "tmp");
    write(&tmp, contents)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn fill_bundle(dir: &Path, result: &EnsembleResult, cfg: &ExperimentConfig, manifest: &Manifest) -> Result<()> {
    write(&dir.join("config.json"), &cfg.to_json())?;
    let manifest_json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write(&dir.join("manifest.json"), &manifest_json)?;
    for (obs, s) in &result.stats.series {
        write(&dir.join(format!("{}.csv", obs.name())), &stats_csv(&result.times, s))?;
        if cfg.write_svg {
            let curve = Curve::new(obs.name(), result.times.clone(), s.mean.clone()).with_errors(s.sem.clone());
            let svg = line_plot(obs.name(), &[curve]);
            write(&dir.join(format!("{}.svg", obs.name())), &svg)?;
        }
    }
    if cfg.write_raw {
        let raw = dir.join("raw");
        fs::create_dir(&raw).map_err(|e| Error::io(&raw, e))?;
        write(&raw.join("fields.csv"), &fields_csv(result))?;
        for obs in result.stats.series.keys() {
            write(&raw.join(format!("{}.csv", obs.name())), &raw_csv(result, *obs))?;
        }
    }
    Ok(())
}

/// Writes the bundle into a scratch directory under `root` and renames it to
/// `root/<name>` once complete, replacing any earlier bundle of that name.
pub fn write_bundle(
    root: &Path,
    result: &EnsembleResult,
    cfg: &ExperimentConfig,
    workers: usize,
    wall: Duration,
) -> Result<PathBuf> {
    let name = cfg.bundle_name();
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(Error::Config(format!("invalid bundle name `{name}`")));
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let manifest = Manifest {
        name: name.clone(),
        seed: cfg.ensemble.seed,
        realizations: result.records.len(),
        grid_points: result.times.len(),
        workers,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: wall.as_secs_f64(),
        observables: result.stats.series.keys().map(|o| o.name().to_string()).collect(),
        config: cfg.clone(),
    };
    let tmp = scratch_name(root, &name, "tmp");
    fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    if let Err(e) = fill_bundle(&tmp, result, cfg, &manifest) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    let target = root.join(&name);
    let old = scratch_name(root, &name, "old");
    let had_old = target.exists();
    if had_old {
        fs::rename(&target, &old).map_err(|e| {
            let _ = fs::remove_dir_all(&tmp);
            Error::io(&target, e)
        })?;
    }
    if let Err(e) = fs::rename(&tmp, &target) {
        let _ = fs::remove_dir_all(&tmp);
        if had_old {
            let _ = fs::rename(&old, &target);
        }
        return Err(Error::io(&target, e));
    }
    if had_old {
        let _ = fs::remove_dir_all(&old);
    }
    Ok(target)
}

fn parse_stats_csv(path: &Path) -> Result<(Vec<f64>, SeriesStats)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, what: &str| Error::Config(format!("{}:{line}: {what}", path.display()));
    let mut lines = text.lines();
    if lines.next() != Some("t,mean,sigma_cl,sem,R") {
        return Err(bad(1, "unexpected header"));
    }
    let (mut times, mut mean, mut sigma_cl, mut sem, mut count) = (vec![], vec![], vec![], vec![], vec![]);
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad(i + 2, "expected 5 columns"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 2, "malformed number"));
        times.push(num(cols[0])?);
        mean.push(num(cols[1])?);
        sigma_cl.push(num(cols[2])?);
        sem.push(num(cols[3])?);
        count.push(cols[4].parse::<usize>().map_err(|_| bad(i + 2, "malformed count"))?);
    }
    Ok((times, SeriesStats { mean, sigma_cl, sem, count }))
}

/// Reads a bundle's manifest and every observable CSV present.
pub fn read_bundle(path: &Path) -> Result<Bundle> {
    let manifest_path = path.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", manifest_path.display())))?;
    let mut series = BTreeMap::new();
    let mut times: Option<Vec<f64>> = None;
    for obs in Observable::ALL {
        let csv = path.join(format!("{}.csv", obs.name()));
        if !csv.exists() {
            continue;
        }
        let (t, s) = parse_stats_csv(&csv)?;
        match &times {
            Some(prev) if *prev != t => {
                return Err(Error::Config(format!("{}: time column differs from other series", csv.display())))
            }
            Some(_) => {}
            None => times = Some(t),
        }
        series.insert(obs, s);
    }
    let times = times.ok_or_else(|| Error::MissingSeries(format!("any observable in {}", path.display())))?;
    if times.len() != manifest.grid_points {
        return Err(Error::Config(format!(
            "{}: {} rows but the manifest lists {} grid points",
            path.display(),
            times.len(),
            manifest.grid_points
        )));
    }
    Ok(Bundle {
        path: path.to_path_buf(),
        stats: TimeSeriesStats {
            times,
            realizations: manifest.realizations,
            sigma_defined: manifest.realizations >= 2,
            series,
        },
        manifest,
    })
}
