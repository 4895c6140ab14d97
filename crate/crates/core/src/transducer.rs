//! Artificial-cell transducers: a two-stage leaky integrator per cell turns the
//! scalar input into gated secretion of one signalling species.

use crate::error::{Error, Result};
use crate::fields::Species;
use crate::geom::{reflect_into_box, Vec3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Which species an artificial cell releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcRole {
    AttractantSecretor,
    RepellentSecretor,
}

impl AcRole {
    pub fn species(self) -> Species {
        match self {
            AcRole::AttractantSecretor => Species::Attractant,
            AcRole::RepellentSecretor => Species::Repellent,
        }
    }
}

/// How the input drives the repellent-secreting cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveMode {
    /// Both cells see `u`.
    #[default]
    Symmetric,
    /// The repellent cell sees `1 - u` (inputs are normalised to [0, 1]).
    Antisymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcParams {
    #[serde(rename = "k_u_per_s")]
    pub k_u: f64,
    #[serde(rename = "gamma_x_per_s")]
    pub gamma_x: f64,
    #[serde(rename = "k_x_per_s")]
    pub k_x: f64,
    #[serde(rename = "gamma_s_per_s")]
    pub gamma_s: f64,
    #[serde(rename = "secretion_gain_attractant_molecules_per_s")]
    pub gain_attractant: f64,
    #[serde(rename = "secretion_gain_repellent_molecules_per_s")]
    pub gain_repellent: f64,
    #[serde(rename = "window_s")]
    pub t_window: f64,
    #[serde(rename = "stimulation_s")]
    pub t_stim: f64,
    #[serde(rename = "speed_um_per_s")]
    pub speed: f64,
    pub drive: DriveMode,
    #[serde(rename = "attractant_ac_start_um")]
    pub attractant_start: [f64; 3],
    #[serde(rename = "repellent_ac_start_um")]
    pub repellent_start: [f64; 3],
}

impl Default for AcParams {
    fn default() -> Self {
        Self {
            k_u: 1.0,
            gamma_x: 0.5,
            k_x: 1.0,
            gamma_s: 0.5,
            gain_attractant: 200_000.0,
            gain_repellent: 200_000.0,
            t_window: 10.0,
            t_stim: 5.0,
            speed: 1.0,
            drive: DriveMode::Symmetric,
            attractant_start: [30.0, 50.0, 50.0],
            repellent_start: [70.0, 50.0, 50.0],
        }
    }
}

impl AcParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("k_u_per_s", self.k_u),
            ("gamma_x_per_s", self.gamma_x),
            ("k_x_per_s", self.k_x),
            ("gamma_s_per_s", self.gamma_s),
            ("secretion_gain_attractant_molecules_per_s", self.gain_attractant),
            ("secretion_gain_repellent_molecules_per_s", self.gain_repellent),
            ("speed_um_per_s", self.speed),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("ac.{name} must be >= 0, got {v}")));
            }
        }
        if !(self.t_stim > 0.0 && self.t_stim <= self.t_window && self.t_window.is_finite()) {
            return Err(Error::config(format!(
                "ac: need 0 < stimulation_s <= window_s, got {} and {}",
                self.t_stim, self.t_window
            )));
        }
        Ok(())
    }

    pub fn gain(&self, role: AcRole) -> f64 {
        match role {
            AcRole::AttractantSecretor => self.gain_attractant,
            AcRole::RepellentSecretor => self.gain_repellent,
        }
    }

    /// Input seen by a cell of the given role.
    pub fn drive_input(&self, role: AcRole, u: f64) -> f64 {
        match (self.drive, role) {
            (DriveMode::Antisymmetric, AcRole::RepellentSecretor) => 1.0 - u,
            _ => u,
        }
    }

    /// Steady state `(x*, s*)` under constant input.
    pub fn fixed_point(&self, u: f64) -> (f64, f64) {
        let x = self.k_u * u / self.gamma_x;
        (x, self.k_x * x / self.gamma_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcState {
    pub x_ac: f64,
    pub s_ac: f64,
    pub position: Vec3,
    pub role: AcRole,
}

impl AcState {
    pub fn at_rest(position: Vec3, role: AcRole) -> Self {
        Self { x_ac: 0.0, s_ac: 0.0, position, role }
    }
}

/// `(1 - e^{-g t}) / g`, continuous at `g = 0`.
fn phi1(g: f64, t: f64) -> f64 {
    if g == 0.0 {
        t
    } else {
        -(-g * t).exp_m1() / g
    }
}

/// `∫_0^t e^{-b (t - τ)} e^{-a τ} dτ`.
fn exp_convolution(a: f64, b: f64, t: f64) -> f64 {
    (-a.min(b) * t).exp() * phi1((a - b).abs(), t)
}

/// Exact update of the integrator pair over `dt` with `u` held constant.
pub fn step_internal(state: &AcState, u: f64, params: &AcParams, dt: f64) -> AcState {
    let a = params.gamma_x;
    let b = params.gamma_s;
    let drive = params.k_u * u;
    let x0 = state.x_ac;
    let s0 = state.s_ac;

    let x = x0 * (-a * dt).exp() + drive * phi1(a, dt);

    let conv = exp_convolution(a, b, dt);
    // ∫_0^dt e^{-b(dt-τ)} φ1(a, τ) dτ
    let forced = if a > 0.0 {
        (phi1(b, dt) - conv) / a
    } else if b > 0.0 {
        (dt - phi1(b, dt)) / b
    } else {
        0.5 * dt * dt
    };
    let s = s0 * (-b * dt).exp() + params.k_x * (x0 * conv + drive * forced);

    AcState { x_ac: x, s_ac: s, ..*state }
}

/// Stimulation gate: open strictly inside `(0, T_p)` of each window.
pub fn gate(tau: f64, params: &AcParams) -> f64 {
    if tau > 0.0 && tau < params.t_stim {
        1.0
    } else {
        0.0
    }
}

/// Release rate (molecules/s) of the cell's own species.
pub fn secretion_rate(state: &AcState, tau: f64, params: &AcParams) -> f64 {
    params.gain(state.role) * state.s_ac * gate(tau, params)
}

/// Isotropic random step of length `speed * dt`, reflected at the walls.
pub fn step_motion_ac<R: Rng + ?Sized>(state: &AcState, extent: Vec3, params: &AcParams, dt: f64, rng: &mut R) -> AcState {
    if params.speed == 0.0 {
        return *state;
    }
    let mut dir = Vec3::random_unit(rng);
    let mut pos = state.position + dir * (params.speed * dt);
    reflect_into_box(&mut pos, &mut dir, extent);
    AcState { position: pos, ..*state }
}

pub const AC_LOG_HEADER: &str = "step,ac_id,x_ac,s_ac,rate,px,py,pz";

pub fn write_ac_log_row<W: Write>(out: &mut W, step: u64, ac_id: usize, state: &AcState, rate: f64) -> std::io::Result<()> {
    let p = state.position;
    writeln!(out, "{step},{ac_id},{},{},{rate},{},{},{}", state.x_ac, state.s_ac, p.x, p.y, p.z)
}
