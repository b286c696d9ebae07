use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use super::{fmt_f64, line_plot, read_bundle, write_bundle, write_file_atomic, Bundle, Curve, ExperimentConfig};
use crate::ensemble::{classify_phase, fit_log_slope, run_ensemble, EnsembleResult, Observable, PhaseReport};
use crate::{Error, Result};

/// Settings shared by every command.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Output root; falls back to the config's `output_dir`, then `results`.
    pub out: Option<PathBuf>,
    /// Overrides the config's master seed.
    pub seed: Option<u64>,
    pub workers: usize,
}

impl RunOptions {
    fn root(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("results"))
    }

    fn resolve(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = cfg.clone();
        if let Some(seed) = self.seed {
            cfg.ensemble.seed = seed;
        }
        cfg
    }
}

fn execute(cfg: &ExperimentConfig, workers: usize) -> Result<EnsembleResult> {
    run_ensemble(&cfg.ensemble, workers).map_err(|failure| {
        log::error!(
            "ensemble aborted after {} completed realizations",
            failure.completed.len()
        );
        failure.error
    })
}

/// Runs the ensemble and writes its bundle; returns the bundle directory.
pub fn cmd_run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<PathBuf> {
    let cfg = opts.resolve(cfg);
    cfg.ensemble.validate()?;
    let started = Instant::now();
    let result = execute(&cfg, opts.workers)?;
    let path = write_bundle(&opts.root(&cfg), &result, &cfg, opts.workers, started.elapsed())?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Disorder,
    Jz,
    Sites,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Disorder => "W",
            SweepAxis::Jz => "Jz",
            SweepAxis::Sites => "N",
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        match self {
            SweepAxis::Disorder => cfg.ensemble.disorder = value,
            SweepAxis::Jz => cfg.ensemble.j_z = value,
            SweepAxis::Sites => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::Config(format!("chain length must be a whole number, got {value}")));
                }
                cfg.ensemble.n_sites = value as usize;
            }
        }
        Ok(())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "W" | "w" => Ok(SweepAxis::Disorder),
            "Jz" | "jz" | "JZ" => Ok(SweepAxis::Jz),
            "N" | "n" => Ok(SweepAxis::Sites),
            _ => Err(Error::Config(format!("unknown sweep axis `{s}` (expected W, Jz or N)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub bundles: Vec<PathBuf>,
    pub summary: PathBuf,
}

/// One bundle per value plus a summary CSV with, per observable, the value
/// at `t = 0`, the late-time mean and the fitted log-time slope.
pub fn cmd_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64], opts: &RunOptions) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let base = opts.resolve(cfg);
    let mut configs = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = base.clone();
        axis.apply(&mut c, v)?;
        c.name = Some(format!("{}_{}={v}", base.bundle_name(), axis.name()));
        c.ensemble.validate()?;
        configs.push(c);
    }
    let root = opts.root(&base);
    let mut bundles = Vec::new();
    let mut rows = Vec::new();
    for (c, &v) in configs.iter().zip(values) {
        let started = Instant::now();
        let result = execute(c, opts.workers)?;
        bundles.push(write_bundle(&root, &result, c, opts.workers, started.elapsed())?);
        rows.push((v, result));
    }

    let observables: Vec<Observable> = rows[0].1.stats.series.keys().copied().collect();
    let mut csv = String::from(axis.name());
    for o in &observables {
        let n = o.name();
        let _ = write!(csv, ",{n}_t0,{n}_late,{n}_slope,{n}_slope_stderr");
    }
    csv.push('\n');
    let cls = &base.classify;
    for (v, result) in &rows {
        csv.push_str(&fmt_f64(*v));
        for &o in &observables {
            let s = result.stats.get(o)?;
            let late = result.stats.late_time_mean(o, cls.late_from).unwrap_or(f64::NAN);
            let (slope, stderr) = fit_log_slope(&result.times, &s.mean, cls.window)
                .map_or((f64::NAN, f64::NAN), |f| (f.slope, f.stderr));
            let _ = write!(
                csv,
                ",{},{},{},{}",
                fmt_f64(s.mean[0]),
                fmt_f64(late),
                fmt_f64(slope),
                fmt_f64(stderr)
            );
        }
        csv.push('\n');
    }
    let summary = root.join(format!("{}_sweep_{}.csv", base.bundle_name(), axis.name()));
    write_file_atomic(&summary, &csv)?;
    Ok(SweepOutcome { bundles, summary })
}

/// Phase label of a bundle, using the thresholds stored in its config.
pub fn cmd_classify(bundle: &Path) -> Result<PhaseReport> {
    let b = read_bundle(bundle)?;
    let cfg = b.config();
    classify_phase(&b.stats, cfg.ensemble.disorder, cfg.ensemble.j_perp, &cfg.classify)
}

/// Figure layouts for `plotdata`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotPreset {
    /// Block entropy of each bundle.
    Fig1b,
    /// Local ergotropy of each bundle.
    Fig2,
    /// Local and switch-off ergotropy with their difference.
    Fig3,
    /// Quantum work fluctuations, absolute and relative.
    Fig4,
    /// Half-chain entropy of each bundle, for comparing chain lengths.
    FigA1,
}

impl PlotPreset {
    pub const ALL: [PlotPreset; 5] = [
        PlotPreset::Fig1b,
        PlotPreset::Fig2,
        PlotPreset::Fig3,
        PlotPreset::Fig4,
        PlotPreset::FigA1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotPreset::Fig1b => "fig1b",
            PlotPreset::Fig2 => "fig2",
            PlotPreset::Fig3 => "fig3",
            PlotPreset::Fig4 => "fig4",
            PlotPreset::FigA1 => "figA1",
        }
    }

    fn observables(self) -> &'static [Observable] {
        match self {
            PlotPreset::Fig1b => &[Observable::EntropyBlock],
            PlotPreset::Fig2 => &[Observable::ErgotropyLocal],
            PlotPreset::Fig3 => &[Observable::ErgotropyLocal, Observable::ErgotropySwitchOff],
            PlotPreset::Fig4 => &[Observable::Sigma, Observable::RelativeSigma],
            PlotPreset::FigA1 => &[Observable::EntropyHalf],
        }
    }
}

impl FromStr for PlotPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown plot preset `{s}`")))
    }
}

/// Writes `<preset>.csv` and `<preset>.svg` into `out`, with standard errors
/// as the error bars. All inputs are read and checked before anything is
/// written.
pub fn cmd_plotdata(bundles: &[PathBuf], preset: PlotPreset, out: &Path) -> Result<Vec<PathBuf>> {
    if bundles.is_empty() {
        return Err(Error::Config("plotdata needs at least one bundle".into()));
    }
    let loaded: Vec<Bundle> = bundles.iter().map(|p| read_bundle(p)).collect::<Result<_>>()?;
    let times = loaded[0].stats.times.clone();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let mut curves = Vec::new();
    for b in &loaded {
        if b.stats.times != times {
            return Err(Error::Config(format!("{}: time grid differs from the first bundle", b.path.display())));
        }
        let label = b.label();
        for &o in preset.observables() {
            let s = b.stats.get(o)?;
            let name = format!("{label}:{}", o.name());
            curves.push(Curve::new(name.clone(), times.clone(), s.mean.clone()).with_errors(s.sem.clone()));
            columns.push((name.clone(), s.mean.clone()));
            columns.push((format!("{name}_sem"), s.sem.clone()));
        }
        if preset == PlotPreset::Fig3 {
            let local = &b.stats.get(Observable::ErgotropyLocal)?.mean;
            let so = &b.stats.get(Observable::ErgotropySwitchOff)?.mean;
            let diff: Vec<f64> = local.iter().zip(so).map(|(a, b)| a - b).collect();
            curves.push(Curve::new(format!("{label}:difference"), times.clone(), diff.clone()));
            columns.push((format!("{label}:difference"), diff));
        }
    }

    let mut csv = String::from("t");
    for (name, _) in &columns {
        let _ = write!(csv, ",{name}");
    }
    csv.push('\n');
    for (k, t) in times.iter().enumerate() {
        csv.push_str(&fmt_f64(*t));
        for (_, v) in &columns {
            let _ = write!(csv, ",{}", fmt_f64(v[k]));
        }
        csv.push('\n');
    }
    let svg = line_plot(preset.name(), &curves);

    let csv_path = out.join(format!("{}.csv", preset.name()));
    let svg_path = out.join(format!("{}.svg", preset.name()));
    write_file_atomic(&csv_path, &csv)?;
    write_file_atomic(&svg_path, &svg)?;
    Ok(vec![csv_path, svg_path])
}
