//! Windowed reservoir simulation and state extraction.
//!
//! Each input window drives the artificial cells with one sample `u[n]`; the
//! per-timestep order is ACs, bacteria, lifecycle, then fields. At the end of a
//! window (or averaged over it) the attractant, repellent and bacterial-density
//! voxels are concatenated into the state vector `r[n]` of length `3V`.

use crate::bacteria::{agent_stream, ChemoParams, Colony, ColonyParams, FieldsMut, MetabolicParams, QuorumParams};
use crate::error::{Error, Result};
use crate::fields::{ChemicalField, GridSpec, Species, SpeciesParams};
use crate::geom::Vec3;
use crate::transducer::{self, AcParams, AcRole, AcState};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotMode {
    #[default]
    EndOfWindow,
    WindowMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeciesSet {
    pub attractant: SpeciesParams,
    pub repellent: SpeciesParams,
    pub glucose: SpeciesParams,
}

impl Default for SpeciesSet {
    fn default() -> Self {
        Self {
            attractant: SpeciesParams::attractant(),
            repellent: SpeciesParams::repellent(),
            glucose: SpeciesParams::glucose(),
        }
    }
}

/// Initial uniform concentrations (molecules/µm³).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialFields {
    #[serde(rename = "attractant_per_um3")]
    pub attractant: f64,
    #[serde(rename = "repellent_per_um3")]
    pub repellent: f64,
    #[serde(rename = "glucose_per_um3")]
    pub glucose: f64,
}

impl Default for InitialFields {
    fn default() -> Self {
        Self { attractant: 0.0, repellent: 0.0, glucose: SpeciesParams::glucose().feed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub species: SpeciesSet,
    pub initial: InitialFields,
    pub ac: AcParams,
    pub chemotaxis: ChemoParams,
    pub metabolism: MetabolicParams,
    pub quorum: QuorumParams,
    pub n_bact_init: usize,
    /// Total windows simulated, wash-in included.
    pub n_windows: usize,
    pub n_washin: usize,
    pub snapshot_mode: SnapshotMode,
    /// Worker threads for per-agent updates; results do not depend on it.
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            species: SpeciesSet::default(),
            initial: InitialFields::default(),
            ac: AcParams::default(),
            chemotaxis: ChemoParams::default(),
            metabolism: MetabolicParams::default(),
            quorum: QuorumParams::default(),
            n_bact_init: 90,
            n_windows: 600,
            n_washin: 50,
            snapshot_mode: SnapshotMode::EndOfWindow,
            workers: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.species;
        for (expected, p) in [
            (Species::Attractant, &s.attractant),
            (Species::Repellent, &s.repellent),
            (Species::Glucose, &s.glucose),
        ] {
            if p.species != expected {
                return Err(Error::config(format!("species.{expected} has species tag {}", p.species)));
            }
            self.grid.validate_for(p)?;
        }
        self.ac.validate()?;
        self.chemotaxis.validate()?;
        self.metabolism.validate(self.grid.dt)?;
        self.quorum.validate()?;
        self.steps_per_window()?;
        if self.n_windows <= self.n_washin {
            return Err(Error::config(format!(
                "n_windows ({}) must exceed n_washin ({})",
                self.n_windows, self.n_washin
            )));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be >= 1"));
        }
        for (name, v) in [
            ("attractant_per_um3", self.initial.attractant),
            ("repellent_per_um3", self.initial.repellent),
            ("glucose_per_um3", self.initial.glucose),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("initial.{name} must be >= 0")));
            }
        }
        let extent = self.grid.extent();
        for p in [self.ac.attractant_start, self.ac.repellent_start] {
            if !self.grid.contains(Vec3::new(p[0], p[1], p[2])) {
                return Err(Error::config(format!("AC start {p:?} lies outside the {extent:?} box")));
            }
        }
        Ok(())
    }

    pub fn steps_per_window(&self) -> Result<usize> {
        let ratio = self.ac.t_window / self.grid.dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::config(format!(
                "window_s = {} is not a whole number of dt_s = {} steps",
                self.ac.t_window, self.grid.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn colony_params(&self) -> ColonyParams {
        ColonyParams { chemo: self.chemotaxis, metabolism: self.metabolism, quorum: self.quorum }
    }

    /// SHA-256 of the canonical JSON serialisation. `workers` is left out
    /// since it cannot change results.
    pub fn digest(&self) -> String {
        digest_json(&Self { workers: 0, ..self.clone() })
    }
}

pub fn digest_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serialises");
    let hash = Sha256::digest(&bytes);
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub config_digest: String,
    pub seed: u64,
    /// Voxels per block; each state has `3 * n_voxels` entries.
    pub n_voxels: usize,
    /// Number of recorded windows.
    pub n_windows: usize,
    /// Index of the first recorded window in the original simulation.
    pub first_window: usize,
    /// Window at whose end the colony died out, if it did.
    pub extinct_at: Option<usize>,
}

/// Sequence of reservoir states aligned one-to-one with their inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl StateTrajectory {
    pub fn new(states: Vec<Vec<f64>>, inputs: Vec<f64>, meta: TrajectoryMeta) -> Result<Self> {
        if states.len() != inputs.len() {
            return Err(Error::schema(format!("{} states but {} inputs", states.len(), inputs.len())));
        }
        let width = 3 * meta.n_voxels;
        if let Some(bad) = states.iter().position(|s| s.len() != width) {
            return Err(Error::schema(format!("state {bad} has length {} (expected {width})", states[bad].len())));
        }
        Ok(Self { states, inputs, meta })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        3 * self.meta.n_voxels
    }

    pub fn is_extinct(&self) -> bool {
        self.meta.extinct_at.is_some()
    }

    /// Bacterial count recorded in each state.
    pub fn population(&self) -> Vec<f64> {
        let v = self.meta.n_voxels;
        self.states.iter().map(|s| s[2 * v..].iter().sum()).collect()
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = serde_json::to_string(&self.meta)?;
        writeln!(out, "{header}")?;
        let v = self.meta.n_voxels;
        let mut cols: Vec<String> = Vec::with_capacity(3 * v + 1);
        for prefix in ["ca", "cr", "p"] {
            cols.extend((0..v).map(|i| format!("{prefix}_{i}")));
        }
        cols.push("u".into());
        writeln!(out, "{}", cols.join(","))?;
        let mut line = String::new();
        for (s, u) in self.states.iter().zip(&self.inputs) {
            line.clear();
            for x in s {
                use std::fmt::Write as _;
                write!(line, "{x},").expect("string write");
            }
            use std::fmt::Write as _;
            write!(line, "{u}").expect("string write");
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::schema("empty trajectory file"))??;
        let meta: TrajectoryMeta =
            serde_json::from_str(&header).map_err(|e| Error::schema(format!("trajectory header: {e}")))?;
        let cols = lines.next().ok_or_else(|| Error::schema("missing column header"))??;
        let width = 3 * meta.n_voxels;
        let n_cols = cols.split(',').count();
        if n_cols != width + 1 || !cols.ends_with(",u") {
            return Err(Error::schema(format!("expected {} columns ending in `u`, found {n_cols}", width + 1)));
        }
        let mut states = Vec::with_capacity(meta.n_windows);
        let mut inputs = Vec::with_capacity(meta.n_windows);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let values: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            let mut values = values.map_err(|e| Error::schema(format!("row {}: {e}", i + 3)))?;
            if values.len() != width + 1 {
                return Err(Error::schema(format!("row {} has {} fields, expected {}", i + 3, values.len(), width + 1)));
            }
            inputs.push(values.pop().expect("non-empty"));
            states.push(values);
        }
        if states.len() != meta.n_windows {
            return Err(Error::schema(format!("header says {} windows, file has {}", meta.n_windows, states.len())));
        }
        Self::new(states, inputs, meta)
    }
}

/// Concatenate `[attractant; repellent; density]` voxel blocks.
pub fn extract_state(attractant: &ChemicalField, repellent: &ChemicalField, density: &[f64]) -> Vec<f64> {
    let v = attractant.concentrations().len();
    debug_assert_eq!(repellent.concentrations().len(), v);
    debug_assert_eq!(density.len(), v);
    let mut r = Vec::with_capacity(3 * v);
    r.extend_from_slice(attractant.concentrations());
    r.extend_from_slice(repellent.concentrations());
    r.extend_from_slice(density);
    r
}

/// Drop the first `n_washin` (state, input) pairs.
pub fn discard_washin(traj: &StateTrajectory, n_washin: usize) -> Result<StateTrajectory> {
    if n_washin >= traj.len() {
        return Err(Error::config(format!(
            "wash-in of {n_washin} windows leaves nothing of a {}-window trajectory",
            traj.len()
        )));
    }
    let mut meta = traj.meta.clone();
    meta.n_windows = traj.len() - n_washin;
    meta.first_window += n_washin;
    Ok(StateTrajectory {
        states: traj.states[n_washin..].to_vec(),
        inputs: traj.inputs[n_washin..].to_vec(),
        meta,
    })
}

/// Complete mutable simulation state, advanced one timestep at a time.
pub struct Simulation {
    config: SimConfig,
    attractant: ChemicalField,
    repellent: ChemicalField,
    glucose: ChemicalField,
    acs: Vec<(AcState, ChaCha8Rng)>,
    colony: Colony,
    steps_per_window: usize,
}

impl Simulation {
    pub fn new(config: &SimConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let grid = config.grid;
        let sp = &config.species;
        let init = &config.initial;
        let attractant = ChemicalField::new(grid, sp.attractant, init.attractant)?;
        let repellent = ChemicalField::new(grid, sp.repellent, init.repellent)?;
        let glucose = ChemicalField::new(grid, sp.glucose, init.glucose)?;
        let start = |p: [f64; 3]| Vec3::new(p[0], p[1], p[2]);
        let acs = vec![
            (
                AcState::at_rest(start(config.ac.attractant_start), AcRole::AttractantSecretor),
                agent_stream(seed, u64::MAX - 1),
            ),
            (
                AcState::at_rest(start(config.ac.repellent_start), AcRole::RepellentSecretor),
                agent_stream(seed, u64::MAX - 2),
            ),
        ];
        let colony = Colony::seeded(config.n_bact_init, &grid, &config.colony_params(), seed);
        Ok(Self {
            config: config.clone(),
            attractant,
            repellent,
            glucose,
            acs,
            colony,
            steps_per_window: config.steps_per_window()?,
        })
    }

    pub fn colony(&self) -> &Colony {
        &self.colony
    }

    pub fn field(&self, species: Species) -> &ChemicalField {
        match species {
            Species::Attractant => &self.attractant,
            Species::Repellent => &self.repellent,
            Species::Glucose => &self.glucose,
        }
    }

    pub fn acs(&self) -> impl Iterator<Item = &AcState> {
        self.acs.iter().map(|(s, _)| s)
    }

    pub fn state(&self) -> Vec<f64> {
        extract_state(&self.attractant, &self.repellent, &self.colony.density(&self.config.grid))
    }

    /// One timestep at window phase `step_in_window`.
    fn step(&mut self, u: f64, step_in_window: usize, parallel: bool) {
        let grid = self.config.grid;
        let dt = grid.dt;
        let ac = &self.config.ac;
        let tau = (step_in_window as f64 + 0.5) * dt;
        let extent = grid.extent();

        for (state, rng) in self.acs.iter_mut() {
            let drive = ac.drive_input(state.role, u);
            *state = transducer::step_internal(state, drive, ac, dt);
            let rate = transducer::secretion_rate(state, tau, ac);
            if rate > 0.0 {
                let field = match state.role.species() {
                    Species::Attractant => &mut self.attractant,
                    _ => &mut self.repellent,
                };
                field.deposit_voxel(grid.voxel_of_unchecked(state.position), rate * dt);
            }
            *state = transducer::step_motion_ac(state, extent, ac, dt, rng);
        }

        let params = self.config.colony_params();
        self.colony.step(
            FieldsMut { attractant: &mut self.attractant, repellent: &self.repellent, glucose: &mut self.glucose },
            &params,
            &grid,
            parallel,
        );
        let boundary = step_in_window + 1 == self.steps_per_window;
        self.colony.lifecycle(&self.repellent, &params, &grid, boundary);

        self.attractant.step();
        self.repellent.step();
        self.glucose.step();
    }

    /// Run one full window with input `u` and return its snapshot.
    pub fn run_window(&mut self, u: f64) -> Vec<f64> {
        let parallel = self.config.workers > 1;
        let mode = self.config.snapshot_mode;
        let mut acc = match mode {
            SnapshotMode::WindowMean => Some(vec![0.0; 3 * self.config.grid.n_voxels()]),
            SnapshotMode::EndOfWindow => None,
        };
        for j in 0..self.steps_per_window {
            self.step(u, j, parallel);
            if let Some(acc) = acc.as_mut() {
                for (a, x) in acc.iter_mut().zip(self.state()) {
                    *a += x;
                }
            }
        }
        match acc {
            Some(mut acc) => {
                let n = self.steps_per_window as f64;
                acc.iter_mut().for_each(|a| *a /= n);
                acc
            }
            None => self.state(),
        }
    }
}

/// Simulate `config.n_windows` windows driven by `u` and record every state
/// (wash-in included; see [`discard_washin`]).
///
/// If a colony that started non-empty dies out, the trajectory stops after that
/// window and `meta.extinct_at` records it.
pub fn run_simulation(config: &SimConfig, u: &[f64], seed: u64) -> Result<StateTrajectory> {
    config.validate()?;
    if u.len() < config.n_windows {
        return Err(Error::insufficient(format!(
            "{} inputs supplied for {} windows",
            u.len(),
            config.n_windows
        )));
    }
    let run = || -> Result<StateTrajectory> {
        let mut sim = Simulation::new(config, seed)?;
        let had_bacteria = !sim.colony.is_empty();
        let mut states = Vec::with_capacity(config.n_windows);
        let mut extinct_at = None;
        for (n, &un) in u.iter().take(config.n_windows).enumerate() {
            states.push(sim.run_window(un));
            if had_bacteria && sim.colony.is_empty() {
                extinct_at = Some(n);
                break;
            }
        }
        let meta = TrajectoryMeta {
            config_digest: config.digest(),
            seed,
            n_voxels: config.grid.n_voxels(),
            n_windows: states.len(),
            first_window: 0,
            extinct_at,
        };
        let inputs = u[..states.len()].to_vec();
        StateTrajectory::new(states, inputs, meta)
    };
    if config.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        pool.install(run)
    } else {
        run()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SimConfig {
        SimConfig {
            grid: GridSpec { nx: 5, ny: 4, nz: 3, voxel_edge: 10.0, dt: 0.04 },
            ac: AcParams {
                t_window: 2.0,
                t_stim: 1.0,
                attractant_start: [15.0, 20.0, 15.0],
                repellent_start: [35.0, 20.0, 15.0],
                ..AcParams::default()
            },
            n_bact_init: 20,
            n_windows: 12,
            n_washin: 2,
            ..SimConfig::default()
        }
    }

    fn meta(n_voxels: usize, n: usize) -> TrajectoryMeta {
        TrajectoryMeta { config_digest: "x".into(), seed: 1, n_voxels, n_windows: n, first_window: 0, extinct_at: None }
    }

    #[test]
    fn extract_layout() {
        let grid = GridSpec::default();
        let mut a = ChemicalField::new(grid, SpeciesParams::attractant(), 0.7).unwrap();
        let r = ChemicalField::new(grid, SpeciesParams::repellent(), 0.0).unwrap();
        let mut density = vec![0.0; 1000];
        let s = extract_state(&a, &r, &density);
        assert_eq!(s.len(), 3000);
        assert!(s[..1000].iter().all(|&x| x == 0.7));
        assert!(s[1000..].iter().all(|&x| x == 0.0));

        a.set_concentrations(&vec![0.0; 1000]).unwrap();
        density[437] = 1.0;
        let s = extract_state(&a, &r, &density);
        let nz: Vec<usize> = s.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect();
        assert_eq!(nz, vec![2000 + 437]);
    }

    #[test]
    fn washin_indexing() {
        let states: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64; 3]).collect();
        let inputs: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let t = StateTrajectory::new(states, inputs, meta(1, 100)).unwrap();
        assert_eq!(discard_washin(&t, 0).unwrap().states, t.states);
        let d = discard_washin(&t, 5).unwrap();
        assert_eq!(d.len(), 95);
        assert_eq!(d.inputs[0], 0.05);
        assert_eq!(d.meta.first_window, 5);
        assert!(matches!(discard_washin(&t, 100), Err(Error::Config(_))));
    }

    #[test]
    fn same_seed_same_trajectory_and_shape() {
        let cfg = tiny();
        let u = crate::signals::input_sequence(&Default::default(), cfg.n_windows).unwrap();
        let a = run_simulation(&cfg, &u, 9).unwrap();
        let b = run_simulation(&cfg, &u, 9).unwrap();
        assert_eq!(a, b);
        let v = cfg.grid.n_voxels();
        assert!(a.states.iter().all(|s| s.len() == 3 * v));
        let c = run_simulation(&cfg, &u, 10).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut cfg = tiny();
        let u = crate::signals::input_sequence(&Default::default(), cfg.n_windows).unwrap();
        let serial = run_simulation(&cfg, &u, 4).unwrap();
        cfg.workers = 3;
        let par = run_simulation(&cfg, &u, 4).unwrap();
        assert_eq!(serial, par);
    }

    #[test]
    fn quiescent_without_input_or_cells() {
        let cfg = SimConfig { n_bact_init: 0, ..tiny() };
        let u = vec![0.0; cfg.n_windows];
        let t = run_simulation(&cfg, &u, 1).unwrap();
        assert_eq!(t.len(), cfg.n_windows);
        assert!(t.states.iter().flatten().all(|&x| x == 0.0));
        assert!(!t.is_extinct());
    }

    #[test]
    fn truncated_input_is_causal() {
        let cfg = tiny();
        let u = crate::signals::input_sequence(&Default::default(), cfg.n_windows).unwrap();
        let full = run_simulation(&cfg, &u, 3).unwrap();
        let short_cfg = SimConfig { n_windows: 6, ..cfg };
        let short = run_simulation(&short_cfg, &u[..6], 3).unwrap();
        assert_eq!(&full.states[..6], &short.states[..]);
    }

    #[test]
    fn density_block_counts_population() {
        let cfg = tiny();
        let u = vec![0.5; cfg.n_windows];
        let mut sim = Simulation::new(&cfg, 2).unwrap();
        for &un in &u {
            let s = sim.run_window(un);
            let v = cfg.grid.n_voxels();
            assert_eq!(s[2 * v..].iter().sum::<f64>(), sim.colony().len() as f64);
        }
    }

    #[test]
    fn window_mean_mode_differs_from_end_snapshot() {
        let cfg = tiny();
        let u = vec![0.8; cfg.n_windows];
        let end = run_simulation(&cfg, &u, 5).unwrap();
        let mean = run_simulation(&SimConfig { snapshot_mode: SnapshotMode::WindowMean, ..cfg }, &u, 5).unwrap();
        assert_eq!(end.len(), mean.len());
        assert_ne!(end.states, mean.states);
    }

    #[test]
    fn extinction_truncates() {
        let mut cfg = tiny();
        cfg.metabolism.p_base_death = 1.0;
        let u = vec![0.5; cfg.n_windows];
        let t = run_simulation(&cfg, &u, 1).unwrap();
        assert_eq!(t.meta.extinct_at, Some(0));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn rejects_bad_configs() {
        let cfg = SimConfig { n_washin: 12, ..tiny() };
        assert!(run_simulation(&cfg, &[0.0; 12], 1).is_err());
        let mut cfg = tiny();
        cfg.grid.dt = 0.2;
        assert!(matches!(run_simulation(&cfg, &[0.0; 12], 1), Err(Error::Config(_))));
        let cfg = tiny();
        assert!(matches!(run_simulation(&cfg, &[0.0; 3], 1), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn trajectory_file_round_trip_is_exact() {
        let cfg = tiny();
        let u = crate::signals::input_sequence(&Default::default(), cfg.n_windows).unwrap();
        let t = run_simulation(&cfg, &u, 8).unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = StateTrajectory::read(&buf[..]).unwrap();
        assert_eq!(back, t);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(buf, again);

        let text = String::from_utf8(buf).unwrap();
        let broken = text.replacen(",u\n", ",v\n", 1);
        assert!(matches!(StateTrajectory::read(broken.as_bytes()), Err(Error::Schema(_))));
    }
}
