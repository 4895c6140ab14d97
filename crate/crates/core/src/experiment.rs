//! File-level pipeline behind the command-line tool: simulate, evaluate,
//! memory, plot and the composite sweep. Every command leaves a manifest
//! naming its outputs and the config digest they came from.

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::plot::{heatmap_chart, line_chart, Marker, Series};
use crate::readout::{memory_curve, sweep as sweep_readout, Evaluation, MemoryCurve, ReadoutConfig};
use crate::reservoir::{discard_washin, run_simulation, StateTrajectory};
use crate::signals::input_sequence;
use crate::tables::{self, Heatmap, MemorySummary};
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const CONFIG_FILE: &str = "config.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const EXTINCT_MARKER: &str = "EXTINCT";
pub const RESULTS_FILE: &str = "results.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const CORRELATION_FILE: &str = "correlation.csv";
pub const MEMORY_FILE: &str = "memory.csv";
pub const MEMORY_SUMMARY_FILE: &str = "memory_summary.csv";

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extinct_at: Option<usize>,
}

impl Manifest {
    fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(format!("manifest_{}.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn names(paths: &[&str]) -> Vec<String> {
    paths.iter().map(|p| p.to_string()).collect()
}

pub fn read_trajectory(path: &Path) -> Result<StateTrajectory> {
    let f = File::open(path).map_err(|e| Error::schema(format!("cannot open trajectory {}: {e}", path.display())))?;
    StateTrajectory::read(BufReader::new(f))
}

/// Run the reservoir on the configured input and write the post-wash-in
/// trajectory. Extinction still writes the truncated trajectory plus a marker
/// file, then reports [`Error::Extinct`].
pub fn simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<StateTrajectory> {
    let start = Instant::now();
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(CONFIG_FILE), cfg.persisted_json() + "\n")?;
    let digest = cfg.digest();
    let u = input_sequence(&cfg.signal, cfg.simulation.n_windows)?;
    let full = run_simulation(&cfg.simulation, &u, cfg.seed)?;
    let mut traj = if full.len() > cfg.simulation.n_washin { discard_washin(&full, cfg.simulation.n_washin)? } else { full };
    traj.meta.config_digest = digest.clone();
    write_with(&out_dir.join(TRAJECTORY_FILE), |w| traj.write(w))?;
    let mut outputs = names(&[CONFIG_FILE, TRAJECTORY_FILE]);
    if let Some(window) = traj.meta.extinct_at {
        std::fs::write(out_dir.join(EXTINCT_MARKER), format!("extinct_at_window={window}\nconfig_digest={digest}\n"))?;
        outputs.push(EXTINCT_MARKER.into());
    }
    Manifest {
        command: "simulate".into(),
        config_digest: digest,
        seed: cfg.seed,
        outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
        workers: Some(cfg.simulation.workers),
        readout: None,
        extinct_at: traj.meta.extinct_at,
    }
    .write(out_dir)?;
    match traj.meta.extinct_at {
        Some(window) => Err(Error::Extinct { window }),
        None => Ok(traj),
    }
}

/// H × k × offset sweep; writes the per-offset results, the median-NRMSE
/// heatmap and the median correlation per (k, H).
pub fn evaluate(traj: &StateTrajectory, h_list: &[usize], k_list: &[usize], readout: &ReadoutConfig, out_dir: &Path) -> Result<Vec<Evaluation>> {
    let start = Instant::now();
    if h_list.is_empty() || k_list.is_empty() {
        return Err(Error::config("H and k lists must be non-empty"));
    }
    if h_list.contains(&0) {
        return Err(Error::config("horizons must be >= 1"));
    }
    let evals = sweep_readout(traj, h_list, k_list, readout)?;
    std::fs::create_dir_all(out_dir)?;
    write_with(&out_dir.join(RESULTS_FILE), |w| tables::write_results(&evals, w))?;
    write_with(&out_dir.join(HEATMAP_FILE), |w| Heatmap::from_evaluations(&evals).write(w))?;
    write_with(&out_dir.join(CORRELATION_FILE), |w| tables::write_correlation(&evals, w))?;
    Manifest {
        command: "evaluate".into(),
        config_digest: traj.meta.config_digest.clone(),
        seed: traj.meta.seed,
        outputs: names(&[RESULTS_FILE, HEATMAP_FILE, CORRELATION_FILE]),
        wall_time_s: start.elapsed().as_secs_f64(),
        workers: None,
        readout: Some(readout.clone()),
        extinct_at: None,
    }
    .write(out_dir)?;
    Ok(evals)
}

/// Memory curve R²(d) for `d = 1..=d_max` plus the MC / H* summary.
pub fn memory(traj: &StateTrajectory, d_max: usize, readout: &ReadoutConfig, out_dir: &Path) -> Result<(MemoryCurve, MemorySummary)> {
    let start = Instant::now();
    let curve = memory_curve(traj, d_max, readout)?;
    let summary = MemorySummary::new(&curve);
    std::fs::create_dir_all(out_dir)?;
    write_with(&out_dir.join(MEMORY_FILE), |w| tables::write_memory(&curve, w))?;
    write_with(&out_dir.join(MEMORY_SUMMARY_FILE), |w| summary.write(w))?;
    Manifest {
        command: "memory".into(),
        config_digest: traj.meta.config_digest.clone(),
        seed: traj.meta.seed,
        outputs: names(&[MEMORY_FILE, MEMORY_SUMMARY_FILE]),
        wall_time_s: start.elapsed().as_secs_f64(),
        workers: None,
        readout: Some(readout.clone()),
        extinct_at: None,
    }
    .write(out_dir)?;
    Ok((curve, summary))
}

fn open_table(path: &Path) -> Result<Option<BufReader<File>>> {
    match File::open(path) {
        Ok(f) => Ok(Some(BufReader::new(f))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Render SVGs for whichever tables exist in `in_dir`. Returns the files written.
pub fn plot(in_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    std::fs::create_dir_all(out_dir)?;
    let summary = open_table(&in_dir.join(MEMORY_SUMMARY_FILE))?.map(MemorySummary::read).transpose()?;
    let h_star: Vec<Marker> =
        summary.iter().map(|s| Marker { x: s.h_star, label: format!("H* = {:.1}", s.h_star) }).collect();

    if let Some(r) = open_table(&in_dir.join(HEATMAP_FILE))? {
        let hm = Heatmap::read(r)?;
        let path = out_dir.join("heatmap.svg");
        std::fs::write(&path, heatmap_chart("Median NRMSE", &hm))?;
        written.push(path);
        let series: Vec<Series> = hm
            .ks
            .iter()
            .zip(&hm.values)
            .map(|(k, row)| Series::new(format!("k = {k}"), hm.hs.iter().zip(row).map(|(h, v)| (*h as f64, *v)).collect()))
            .collect();
        let path = out_dir.join("nrmse_vs_h.svg");
        std::fs::write(&path, line_chart("Median NRMSE vs horizon", "horizon H", "NRMSE", &series, &[]))?;
        written.push(path);
    }
    if let Some(r) = open_table(&in_dir.join(CORRELATION_FILE))? {
        let rows = tables::read_correlation(r)?;
        let mut ks: Vec<usize> = rows.iter().map(|r| r.0).collect();
        ks.dedup();
        let series: Vec<Series> = ks
            .iter()
            .map(|&k| Series::new(format!("k = {k}"), rows.iter().filter(|r| r.0 == k).map(|r| (r.1 as f64, r.2)).collect()))
            .collect();
        let path = out_dir.join("correlation_vs_h.svg");
        std::fs::write(&path, line_chart("Median correlation vs horizon", "horizon H", "Pearson correlation", &series, &h_star))?;
        written.push(path);
    }
    if let Some(r) = open_table(&in_dir.join(MEMORY_FILE))? {
        let rows = tables::read_memory(r)?;
        let title = match &summary {
            Some(s) => format!("Memory curve (MC = {:.2})", s.mc),
            None => "Memory curve".into(),
        };
        let series = [Series::new("R²(d)", rows.iter().map(|&(d, r2)| (d as f64, r2)).collect())];
        let path = out_dir.join("memory_curve.svg");
        std::fs::write(&path, line_chart(&title, "delay d", "R²", &series, &[]))?;
        written.push(path);
    }
    if written.is_empty() {
        return Err(Error::schema(format!("no result tables found in {}", in_dir.display())));
    }
    Ok(written)
}

/// simulate → evaluate → memory → plot, all into `out_dir`.
pub fn sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let start = Instant::now();
    let traj = simulate(cfg, out_dir)?;
    evaluate(&traj, &cfg.h_list, &cfg.k_list, &cfg.readout, out_dir)?;
    memory(&traj, cfg.readout.d_max, &cfg.readout, out_dir)?;
    let svgs = plot(out_dir, out_dir)?;
    let mut outputs = names(&[
        CONFIG_FILE,
        TRAJECTORY_FILE,
        RESULTS_FILE,
        HEATMAP_FILE,
        CORRELATION_FILE,
        MEMORY_FILE,
        MEMORY_SUMMARY_FILE,
    ]);
    outputs.extend(svgs.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()));
    Manifest {
        command: "sweep".into(),
        config_digest: cfg.digest(),
        seed: cfg.seed,
        outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
        workers: Some(cfg.simulation.workers),
        readout: Some(cfg.readout.clone()),
        extinct_at: None,
    }
    .write(out_dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.simulation.grid = GridSpec { nx: 5, ny: 4, nz: 3, voxel_edge: 20.0, dt: 0.04 };
        cfg.simulation.ac.t_window = 2.0;
        cfg.simulation.ac.t_stim = 1.0;
        cfg.simulation.ac.attractant_start = [30.0, 40.0, 30.0];
        cfg.simulation.ac.repellent_start = [70.0, 40.0, 30.0];
        cfg.simulation.n_bact_init = 20;
        cfg.simulation.n_windows = 70;
        cfg.simulation.n_washin = 5;
        cfg.h_list = vec![1, 2];
        cfg.k_list = vec![0, 1];
        cfg.readout.d_max = 5;
        cfg
    }

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("wetres-exp-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn sweep_writes_everything_deterministically() {
        let (a, b) = (tmp("a"), tmp("b"));
        let cfg = tiny();
        sweep(&cfg, &a).unwrap();
        sweep(&ExperimentConfig { simulation: crate::reservoir::SimConfig { workers: 3, ..cfg.simulation.clone() }, ..cfg }, &b)
            .unwrap();
        for f in [
            CONFIG_FILE,
            TRAJECTORY_FILE,
            RESULTS_FILE,
            HEATMAP_FILE,
            CORRELATION_FILE,
            MEMORY_FILE,
            MEMORY_SUMMARY_FILE,
            "heatmap.svg",
            "nrmse_vs_h.svg",
            "correlation_vs_h.svg",
            "memory_curve.svg",
        ] {
            let x = std::fs::read(a.join(f)).unwrap();
            let y = std::fs::read(b.join(f)).unwrap();
            assert_eq!(x, y, "{f}");
        }
        let results = std::fs::read_to_string(a.join(RESULTS_FILE)).unwrap();
        assert_eq!(results.lines().count(), 1 + 4 * 7);
        let manifest = std::fs::read_to_string(a.join("manifest_sweep.json")).unwrap();
        assert!(manifest.contains(&tiny().digest()));
        let _ = std::fs::remove_dir_all(&a);
        let _ = std::fs::remove_dir_all(&b);
    }

    #[test]
    fn extinction_leaves_a_marker() {
        let dir = tmp("ext");
        let mut cfg = tiny();
        cfg.simulation.metabolism.p_base_death = 1.0;
        let err = simulate(&cfg, &dir).unwrap_err();
        assert!(matches!(err, Error::Extinct { .. }), "{err}");
        assert!(dir.join(EXTINCT_MARKER).exists());
        assert!(dir.join(TRAJECTORY_FILE).exists());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn evaluate_refuses_short_trajectories() {
        let dir = tmp("short");
        let mut cfg = tiny();
        cfg.simulation.n_windows = 20;
        let traj = simulate(&cfg, &dir).unwrap();
        let err = evaluate(&traj, &[30], &[0], &cfg.readout, &dir).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)), "{err}");
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn plot_without_tables_is_a_schema_error() {
        let dir = tmp("empty");
        std::fs::create_dir_all(&dir).unwrap();
        assert!(matches!(plot(&dir, &dir), Err(Error::Schema(_))));
        std::fs::write(dir.join(HEATMAP_FILE), "nope\n").unwrap();
        assert!(matches!(plot(&dir, &dir), Err(Error::Schema(_))));
        let _ = std::fs::remove_dir_all(&dir);
    }
}
