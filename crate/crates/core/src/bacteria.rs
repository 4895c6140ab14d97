//! Bacterial agents: receptor adaptation, run-and-tumble motility, Monod
//! metabolism, division/death and glucose-dependent AHL release.

use crate::error::{Error, Result};
use crate::fields::{ChemicalField, GridSpec};
use crate::geom::{reflect_into_box, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChemoParams {
    #[serde(rename = "k_r_per_s")]
    pub k_r: f64,
    #[serde(rename = "k_b_per_s")]
    pub k_b: f64,
    #[serde(rename = "t0_per_s")]
    pub t0: f64,
    pub gamma_t: f64,
    pub a0: f64,
    pub n_r: f64,
    #[serde(rename = "k_a_per_um3")]
    pub k_a: f64,
    #[serde(rename = "k_rep_per_um3")]
    pub k_rep: f64,
    pub alpha_m: f64,
    pub m0: f64,
    #[serde(rename = "run_speed_um_per_s")]
    pub run_speed: f64,
    #[serde(rename = "cell_length_um")]
    pub cell_length: f64,
}

impl Default for ChemoParams {
    fn default() -> Self {
        Self {
            k_r: 0.005,
            k_b: 0.005,
            t0: 1.0,
            gamma_t: 10.0,
            a0: 0.5,
            n_r: 6.0,
            k_a: 100.0,
            k_rep: 100.0,
            alpha_m: 2.0,
            m0: 1.0,
            run_speed: 20.0,
            cell_length: 1.0,
        }
    }
}

impl ChemoParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k_r_per_s", self.k_r), ("k_b_per_s", self.k_b), ("t0_per_s", self.t0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("chemotaxis.{name} must be > 0, got {v}")));
            }
        }
        if !(self.a0 > 0.0 && self.a0 < 1.0) {
            return Err(Error::config(format!("chemotaxis.a0 must lie in (0, 1), got {}", self.a0)));
        }
        if !(self.k_a > 0.0 && self.k_rep > 0.0) {
            return Err(Error::config("chemotaxis half-activity constants must be > 0"));
        }
        for (name, v) in [
            ("gamma_t", self.gamma_t),
            ("n_r", self.n_r),
            ("alpha_m", self.alpha_m),
            ("run_speed_um_per_s", self.run_speed),
            ("cell_length_um", self.cell_length),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("chemotaxis.{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Adapted activity `k_R / (k_R + k_B)`.
    pub fn adapted_activity(&self) -> f64 {
        self.k_r / (self.k_r + self.k_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetabolicParams {
    #[serde(rename = "v_max_energy_per_s")]
    pub v_max: f64,
    #[serde(rename = "k_g_per_um3")]
    pub k_g: f64,
    #[serde(rename = "eta_per_s")]
    pub eta: f64,
    pub e_div: f64,
    pub e_death: f64,
    #[serde(rename = "tox_threshold_per_um3")]
    pub tox_threshold: f64,
    #[serde(rename = "p_base_death_per_window")]
    pub p_base_death: f64,
    /// Glucose molecules consumed per unit of energy gained.
    pub molecules_per_energy: f64,
}

impl Default for MetabolicParams {
    fn default() -> Self {
        Self {
            v_max: 0.2,
            k_g: 0.5,
            eta: 0.01,
            e_div: 10.0,
            e_death: 0.5,
            tox_threshold: 500.0,
            p_base_death: 0.01,
            molecules_per_energy: 350.0,
        }
    }
}

impl MetabolicParams {
    pub fn validate(&self, dt: f64) -> Result<()> {
        for (name, v) in [
            ("v_max_energy_per_s", self.v_max),
            ("k_g_per_um3", self.k_g),
            ("eta_per_s", self.eta),
            ("e_div", self.e_div),
            ("e_death", self.e_death),
            ("tox_threshold_per_um3", self.tox_threshold),
            ("molecules_per_energy", self.molecules_per_energy),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("metabolism.{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.p_base_death) {
            return Err(Error::config("metabolism.p_base_death_per_window must lie in [0, 1]"));
        }
        if self.e_death >= self.e_div {
            return Err(Error::config("metabolism.e_death must be below e_div"));
        }
        if self.eta * dt >= 1.0 {
            return Err(Error::config("metabolism: eta * dt must be < 1 to keep energy nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuorumParams {
    #[serde(rename = "alpha_ahl_molecules_per_s")]
    pub alpha_ahl: f64,
    #[serde(rename = "k_g_ahl_per_um3")]
    pub k_g_ahl: f64,
}

impl Default for QuorumParams {
    fn default() -> Self {
        Self { alpha_ahl: 500.0, k_g_ahl: 1.0 }
    }
}

impl QuorumParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_ahl > 0.0 && self.k_g_ahl > 0.0) {
            return Err(Error::config("quorum parameters must be > 0"));
        }
        Ok(())
    }
}

/// One bacterium. Each agent owns its random stream so updates are independent
/// of evaluation order and worker count.
#[derive(Debug, Clone)]
pub struct Bacterium {
    pub id: u64,
    pub position: Vec3,
    pub heading: Vec3,
    pub m: f64,
    pub a: f64,
    pub energy: f64,
    pub alive: bool,
    rng: ChaCha8Rng,
}

/// Random stream for agent `id` under run seed `seed`. Stream 0 is reserved.
pub fn agent_stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id.wrapping_add(1));
    rng
}

impl Bacterium {
    pub fn new(id: u64, position: Vec3, heading: Vec3, m: f64, a: f64, energy: f64, rng: ChaCha8Rng) -> Self {
        Self { id, position, heading, m, a, energy, alive: true, rng }
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Two-state receptor activity. Attractant raises the free energy and lowers
/// activity; repellent and methylation raise activity.
pub fn receptor_activity(c_a: f64, c_r: f64, m: f64, p: &ChemoParams) -> f64 {
    let free_energy = -p.alpha_m * (m - p.m0) + (c_a / p.k_a).ln_1p() - (c_r / p.k_rep).ln_1p();
    let a = 1.0 / (1.0 + (p.n_r * free_energy).exp());
    a.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// Methylation rate `k_R (1 - a) - k_B a`.
pub fn methylation_rate(a: f64, p: &ChemoParams) -> f64 {
    p.k_r * (1.0 - a) - p.k_b * a
}

/// Explicit Euler methylation update, then re-sense at the local ligand levels.
pub fn step_methylation(b: &mut Bacterium, c_a: f64, c_r: f64, p: &ChemoParams, dt: f64) {
    b.m += dt * methylation_rate(b.a, p);
    b.a = receptor_activity(c_a, c_r, b.m, p);
}

pub fn tumble_rate(a: f64, p: &ChemoParams) -> f64 {
    p.t0 * (p.gamma_t * (a - p.a0)).exp()
}

/// Probability of at least one tumble within `dt` at constant rate.
pub fn tumble_probability(a: f64, p: &ChemoParams, dt: f64) -> f64 {
    -(-tumble_rate(a, p) * dt).exp_m1()
}

/// Possibly tumble, then run for `dt` with wall reflection.
pub fn step_motion(b: &mut Bacterium, p: &ChemoParams, dt: f64, extent: Vec3) {
    let p_tumble = tumble_probability(b.a, p, dt);
    if b.rng.gen::<f64>() < p_tumble {
        b.heading = Vec3::random_unit(&mut b.rng);
    }
    b.position = b.position + b.heading * (p.run_speed * dt);
    reflect_into_box(&mut b.position, &mut b.heading, extent);
}

/// Monod uptake `V_max G / (K_g + G)` in energy per second.
pub fn uptake_rate(glucose: f64, p: &MetabolicParams) -> f64 {
    p.v_max * glucose / (p.k_g + glucose)
}

/// Credit the glucose actually granted and pay basal expenditure.
pub fn apply_energy(b: &mut Bacterium, granted_molecules: f64, p: &MetabolicParams, dt: f64) {
    b.energy = (b.energy + granted_molecules / p.molecules_per_energy - dt * p.eta * b.energy).max(0.0);
}

/// One metabolic step against a glucose field: sample, withdraw, update energy.
/// Returns the number of molecules consumed.
pub fn step_metabolism(b: &mut Bacterium, glucose: &mut ChemicalField, p: &MetabolicParams, dt: f64) -> Result<f64> {
    let g = glucose.sample(b.position)?;
    let request = uptake_rate(g, p) * dt * p.molecules_per_energy;
    let granted = glucose.withdraw(b.position, request)?;
    apply_energy(b, granted, p, dt);
    Ok(granted)
}

pub fn ahl_production_rate(glucose: f64, q: &QuorumParams) -> f64 {
    q.alpha_ahl * glucose / (q.k_g_ahl + glucose)
}

/// Parameters needed to advance a colony.
#[derive(Debug, Clone, Copy)]
pub struct ColonyParams {
    pub chemo: ChemoParams,
    pub metabolism: MetabolicParams,
    pub quorum: QuorumParams,
}

/// Mutable views of the three shared fields for one colony step.
pub struct FieldsMut<'a> {
    pub attractant: &'a mut ChemicalField,
    pub repellent: &'a ChemicalField,
    pub glucose: &'a mut ChemicalField,
}

#[derive(Debug, Clone, Copy)]
struct AgentEffect {
    voxel: usize,
    glucose_request: f64,
    ahl: f64,
}

/// Counts of lifecycle events in one call to [`Colony::lifecycle`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LifecycleReport {
    pub births: usize,
    pub starved: usize,
    pub poisoned: usize,
    pub baseline: usize,
}

/// The bacterial population.
#[derive(Debug, Clone)]
pub struct Colony {
    agents: Vec<Bacterium>,
    next_id: u64,
    seed: u64,
    extent: Vec3,
}

impl Colony {
    /// Seed `n` agents uniformly in the box with random headings, adapted
    /// methylation and energies spread over `[0.3, 0.7]·E_div`.
    pub fn seeded(n: usize, grid: &GridSpec, params: &ColonyParams, seed: u64) -> Self {
        let extent = grid.extent();
        let agents = (0..n as u64)
            .map(|id| {
                let mut rng = agent_stream(seed, id);
                let pos = Vec3::new(
                    rng.gen::<f64>() * extent.x,
                    rng.gen::<f64>() * extent.y,
                    rng.gen::<f64>() * extent.z,
                );
                let heading = Vec3::random_unit(&mut rng);
                let energy = params.metabolism.e_div * rng.gen_range(0.3..0.7);
                let m = params.chemo.m0;
                let a = receptor_activity(0.0, 0.0, m, &params.chemo);
                Bacterium::new(id, pos, heading, m, a, energy, rng)
            })
            .collect();
        Self { agents, next_id: n as u64, seed, extent }
    }

    pub fn from_agents(agents: Vec<Bacterium>, grid: &GridSpec, seed: u64) -> Self {
        let next_id = agents.iter().map(|b| b.id + 1).max().unwrap_or(0);
        Self { agents, next_id, seed, extent: grid.extent() }
    }

    pub fn agents(&self) -> &[Bacterium] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Sense, adapt, move, and exchange molecules with the fields.
    ///
    /// Per-agent work reads the fields as they were at the start of the call;
    /// withdrawals and deposits are then applied in agent-index order.
    pub fn step(&mut self, fields: FieldsMut<'_>, params: &ColonyParams, grid: &GridSpec, parallel: bool) {
        let dt = grid.dt;
        let extent = self.extent;
        let attractant: &ChemicalField = fields.attractant;
        let repellent = fields.repellent;
        let glucose: &ChemicalField = fields.glucose;

        let update = |b: &mut Bacterium| -> AgentEffect {
            let voxel = grid.voxel_of_unchecked(b.position);
            let c_a = attractant.sample_voxel(voxel);
            let c_r = repellent.sample_voxel(voxel);
            let g = glucose.sample_voxel(voxel);
            step_methylation(b, c_a, c_r, &params.chemo, dt);
            step_motion(b, &params.chemo, dt, extent);
            AgentEffect {
                voxel,
                glucose_request: uptake_rate(g, &params.metabolism) * dt * params.metabolism.molecules_per_energy,
                ahl: ahl_production_rate(g, &params.quorum) * dt,
            }
        };

        let effects: Vec<AgentEffect> = if parallel {
            self.agents.par_iter_mut().with_min_len(64).map(update).collect()
        } else {
            self.agents.iter_mut().map(update).collect()
        };

        for (b, fx) in self.agents.iter_mut().zip(&effects) {
            let granted = fields.glucose.withdraw_voxel(fx.voxel, fx.glucose_request);
            apply_energy(b, granted, &params.metabolism, dt);
            fields.attractant.deposit_voxel(fx.voxel, fx.ahl);
        }
    }

    /// Division, starvation, toxicity and (when `window_boundary`) baseline death.
    ///
    /// Births are decided from the roster as it stands on entry; deaths are then
    /// checked for that roster in index order, and newborns are appended last.
    pub fn lifecycle(&mut self, repellent: &ChemicalField, params: &ColonyParams, grid: &GridSpec, window_boundary: bool) -> LifecycleReport {
        let mp = &params.metabolism;
        let mut report = LifecycleReport::default();
        let mut newborns = Vec::new();

        for b in self.agents.iter_mut() {
            if b.energy >= mp.e_div {
                let half = b.energy / 2.0;
                b.energy = half;
                let id = self.next_id;
                self.next_id += 1;
                let dir = Vec3::random_unit(&mut b.rng);
                let mut pos = b.position + dir * params.chemo.cell_length;
                let mut heading = dir;
                reflect_into_box(&mut pos, &mut heading, self.extent);
                newborns.push(Bacterium::new(id, pos, heading, b.m, b.a, half, agent_stream(self.seed, id)));
                report.births += 1;
            }
        }

        for b in self.agents.iter_mut() {
            if b.energy <= mp.e_death {
                b.alive = false;
                report.starved += 1;
            } else if repellent.sample_voxel(grid.voxel_of_unchecked(b.position)) > mp.tox_threshold {
                b.alive = false;
                report.poisoned += 1;
            } else if window_boundary && mp.p_base_death > 0.0 && b.rng.gen::<f64>() < mp.p_base_death {
                b.alive = false;
                report.baseline += 1;
            }
        }
        self.agents.retain(|b| b.alive);
        self.agents.extend(newborns);
        report
    }

    /// Alive agents per voxel, x-fastest.
    pub fn density(&self, grid: &GridSpec) -> Vec<f64> {
        let mut counts = vec![0.0; grid.n_voxels()];
        for b in self.agents.iter().filter(|b| b.alive) {
            counts[grid.voxel_of_unchecked(b.position)] += 1.0;
        }
        counts
    }

    pub fn write_snapshot_csv<W: Write>(&self, step: u64, out: &mut W) -> std::io::Result<()> {
        for b in &self.agents {
            let p = b.position;
            writeln!(out, "{step},{},{},{},{},{},{},{}", b.id, p.x, p.y, p.z, b.m, b.a, b.energy)?;
        }
        Ok(())
    }
}

pub const POPULATION_SNAPSHOT_HEADER: &str = "step,agent_id,px,py,pz,m,a,E";
