//! Extracellular chemical species on a voxel grid.
//!
//! Each [`ChemicalField`] carries one species and advances it with an
//! operator-split step: explicit 7-point diffusion (no-flux walls), first-order
//! upwind advection along +x (zero inflow at x⁻, outflow at x⁺), exact
//! exponential decay and, for nutrient species, chemostat relaxation towards a
//! feed concentration.

use crate::error::{Error, Result};
use crate::geom::Vec3;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Attractant,
    Repellent,
    Glucose,
}

impl Species {
    pub const ALL: [Species; 3] = [Species::Attractant, Species::Repellent, Species::Glucose];

    pub fn name(self) -> &'static str {
        match self {
            Species::Attractant => "attractant",
            Species::Repellent => "repellent",
            Species::Glucose => "glucose",
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Voxel grid geometry and the shared timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    #[serde(rename = "voxel_edge_um")]
    pub voxel_edge: f64,
    #[serde(rename = "dt_s")]
    pub dt: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 10, ny: 10, nz: 10, voxel_edge: 10.0, dt: 0.01 }
    }
}

impl GridSpec {
    pub fn n_voxels(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn voxel_volume(&self) -> f64 {
        self.voxel_edge.powi(3)
    }

    /// Physical size of the box along each axis.
    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.nx as f64 * self.voxel_edge,
            self.ny as f64 * self.voxel_edge,
            self.nz as f64 * self.voxel_edge,
        )
    }

    pub fn center(&self) -> Vec3 {
        self.extent() * 0.5
    }

    /// Flat index with x varying fastest.
    #[inline]
    pub fn flat(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.nx * (iy + self.ny * iz)
    }

    #[inline]
    pub fn unflat(&self, idx: usize) -> (usize, usize, usize) {
        let ix = idx % self.nx;
        let iy = (idx / self.nx) % self.ny;
        let iz = idx / (self.nx * self.ny);
        (ix, iy, iz)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let e = self.extent();
        (0.0..=e.x).contains(&p.x) && (0.0..=e.y).contains(&p.y) && (0.0..=e.z).contains(&p.z)
    }

    /// Voxel containing `p`; a point on a shared face belongs to the lower-index voxel.
    pub fn voxel_of(&self, p: Vec3) -> Result<usize> {
        if !self.contains(p) {
            return Err(Error::Domain { x: p.x, y: p.y, z: p.z });
        }
        Ok(self.voxel_of_unchecked(p))
    }

    #[inline]
    pub(crate) fn voxel_of_unchecked(&self, p: Vec3) -> usize {
        let axis = |c: f64, n: usize| -> usize {
            if c <= 0.0 {
                0
            } else {
                ((c / self.voxel_edge).ceil() as usize).saturating_sub(1).min(n - 1)
            }
        };
        self.flat(axis(p.x, self.nx), axis(p.y, self.ny), axis(p.z, self.nz))
    }

    /// Geometry-only checks.
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::config(format!(
                "grid dimensions must be >= 1, got {}x{}x{}",
                self.nx, self.ny, self.nz
            )));
        }
        if !(self.voxel_edge > 0.0 && self.voxel_edge.is_finite()) {
            return Err(Error::config(format!("voxel_edge_um must be > 0, got {}", self.voxel_edge)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt_s must be > 0, got {}", self.dt)));
        }
        Ok(())
    }

    /// Geometry checks plus the explicit-scheme stability bounds for one species.
    pub fn validate_for(&self, params: &SpeciesParams) -> Result<()> {
        self.validate()?;
        params.validate()?;
        let h2 = self.voxel_edge * self.voxel_edge;
        if self.dt * 6.0 * params.diffusion > h2 {
            return Err(Error::config(format!(
                "{}: dt = {} s violates diffusion bound dt <= h^2/(6D) = {} s",
                params.species,
                self.dt,
                h2 / (6.0 * params.diffusion)
            )));
        }
        if params.flow_velocity * self.dt > self.voxel_edge {
            return Err(Error::config(format!(
                "{}: advection CFL violated, v*dt = {} > voxel edge {}",
                params.species,
                params.flow_velocity * self.dt,
                self.voxel_edge
            )));
        }
        if params.replenish_rate * self.dt > 1.0 {
            return Err(Error::config(format!(
                "{}: replenish rate * dt must be <= 1",
                params.species
            )));
        }
        Ok(())
    }
}

/// Transport coefficients for one species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesParams {
    pub species: Species,
    #[serde(rename = "d_um2_per_s")]
    pub diffusion: f64,
    #[serde(rename = "decay_per_s")]
    pub decay: f64,
    #[serde(rename = "flow_um_per_s")]
    pub flow_velocity: f64,
    /// Chemostat relaxation rate towards `feed`; zero disables replenishment.
    #[serde(rename = "replenish_per_s", default)]
    pub replenish_rate: f64,
    #[serde(rename = "feed_per_um3", default)]
    pub feed: f64,
}

impl SpeciesParams {
    pub fn attractant() -> Self {
        Self {
            species: Species::Attractant,
            diffusion: 100.0,
            decay: 0.02,
            flow_velocity: 1.0,
            replenish_rate: 0.0,
            feed: 0.0,
        }
    }

    pub fn repellent() -> Self {
        Self { species: Species::Repellent, ..Self::attractant() }
    }

    pub fn glucose() -> Self {
        Self {
            species: Species::Glucose,
            diffusion: 400.0,
            decay: 0.0,
            flow_velocity: 1.0,
            replenish_rate: 0.05,
            feed: 1.0,
        }
    }

    pub fn defaults_for(species: Species) -> Self {
        match species {
            Species::Attractant => Self::attractant(),
            Species::Repellent => Self::repellent(),
            Species::Glucose => Self::glucose(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("d_um2_per_s", self.diffusion),
            ("decay_per_s", self.decay),
            ("flow_um_per_s", self.flow_velocity),
            ("replenish_per_s", self.replenish_rate),
            ("feed_per_um3", self.feed),
        ];
        for (name, v) in checks {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{}: {name} must be >= 0, got {v}", self.species)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChemicalField {
    spec: GridSpec,
    params: SpeciesParams,
    conc: Vec<f64>,
    scratch: Vec<f64>,
}

impl ChemicalField {
    pub fn new(spec: GridSpec, params: SpeciesParams, initial: f64) -> Result<Self> {
        spec.validate_for(&params)?;
        if !(initial >= 0.0 && initial.is_finite()) {
            return Err(Error::config(format!("initial concentration must be >= 0, got {initial}")));
        }
        let n = spec.n_voxels();
        Ok(Self { spec, params, conc: vec![initial; n], scratch: vec![0.0; n] })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn params(&self) -> &SpeciesParams {
        &self.params
    }

    pub fn species(&self) -> Species {
        self.params.species
    }

    pub fn concentrations(&self) -> &[f64] {
        &self.conc
    }

    /// Overwrite the concentration array (used for fixtures and restarts).
    pub fn set_concentrations(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.conc.len() {
            return Err(Error::config(format!(
                "expected {} voxel values, got {}",
                self.conc.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::config(format!("concentrations must be >= 0, got {v}")));
        }
        self.conc.copy_from_slice(values);
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.conc.iter().sum::<f64>() * self.spec.voxel_volume()
    }

    pub fn max_concentration(&self) -> f64 {
        self.conc.iter().copied().fold(0.0, f64::max)
    }

    pub fn sample(&self, position: Vec3) -> Result<f64> {
        Ok(self.conc[self.spec.voxel_of(position)?])
    }

    #[inline]
    pub(crate) fn sample_voxel(&self, voxel: usize) -> f64 {
        self.conc[voxel]
    }

    pub fn deposit(&mut self, position: Vec3, amount: f64) -> Result<()> {
        let voxel = self.spec.voxel_of(position)?;
        self.deposit_voxel(voxel, amount);
        Ok(())
    }

    #[inline]
    pub(crate) fn deposit_voxel(&mut self, voxel: usize, amount: f64) {
        debug_assert!(amount >= 0.0);
        self.conc[voxel] += amount / self.spec.voxel_volume();
    }

    /// Remove up to `requested` molecules from the voxel containing `position`.
    /// Returns the amount actually removed.
    pub fn withdraw(&mut self, position: Vec3, requested: f64) -> Result<f64> {
        let voxel = self.spec.voxel_of(position)?;
        Ok(self.withdraw_voxel(voxel, requested))
    }

    #[inline]
    pub(crate) fn withdraw_voxel(&mut self, voxel: usize, requested: f64) -> f64 {
        let vol = self.spec.voxel_volume();
        let available = self.conc[voxel] * vol;
        if requested >= available {
            self.conc[voxel] = 0.0;
            available
        } else {
            self.conc[voxel] = ((available - requested) / vol).max(0.0);
            requested
        }
    }

    /// Advance one timestep: diffusion, then advection, then decay, then replenishment.
    pub fn step(&mut self) {
        let GridSpec { nx, ny, nz, voxel_edge, dt } = self.spec;
        let p = self.params;

        if p.diffusion > 0.0 {
            let r = p.diffusion * dt / (voxel_edge * voxel_edge);
            let c = &self.conc;
            let out = &mut self.scratch;
            let sx = 1;
            let sy = nx;
            let sz = nx * ny;
            for iz in 0..nz {
                for iy in 0..ny {
                    for ix in 0..nx {
                        let i = ix + nx * (iy + ny * iz);
                        let ci = c[i];
                        let mut lap = 0.0;
                        if ix > 0 {
                            lap += c[i - sx] - ci;
                        }
                        if ix + 1 < nx {
                            lap += c[i + sx] - ci;
                        }
                        if iy > 0 {
                            lap += c[i - sy] - ci;
                        }
                        if iy + 1 < ny {
                            lap += c[i + sy] - ci;
                        }
                        if iz > 0 {
                            lap += c[i - sz] - ci;
                        }
                        if iz + 1 < nz {
                            lap += c[i + sz] - ci;
                        }
                        out[i] = (ci + r * lap).max(0.0);
                    }
                }
            }
            std::mem::swap(&mut self.conc, &mut self.scratch);
        }

        if p.flow_velocity > 0.0 {
            let nu = p.flow_velocity * dt / voxel_edge;
            let c = &self.conc;
            let out = &mut self.scratch;
            for row in 0..ny * nz {
                let base = row * nx;
                let mut upstream = 0.0;
                for ix in 0..nx {
                    let ci = c[base + ix];
                    out[base + ix] = (1.0 - nu) * ci + nu * upstream;
                    upstream = ci;
                }
            }
            std::mem::swap(&mut self.conc, &mut self.scratch);
        }

        if p.decay > 0.0 {
            let factor = (-p.decay * dt).exp();
            self.conc.iter_mut().for_each(|c| *c *= factor);
        }

        if p.replenish_rate > 0.0 {
            let k = p.replenish_rate * dt;
            let feed = p.feed;
            self.conc.iter_mut().for_each(|c| *c += k * (feed - *c));
        }
    }

    /// Append this field's voxels as `step,species,ix,iy,iz,conc` rows.
    pub fn write_snapshot_csv<W: Write>(&self, step: u64, out: &mut W) -> std::io::Result<()> {
        for (i, c) in self.conc.iter().enumerate() {
            let (ix, iy, iz) = self.spec.unflat(i);
            writeln!(out, "{step},{},{ix},{iy},{iz},{c}", self.params.species)?;
        }
        Ok(())
    }
}

pub const FIELD_SNAPSHOT_HEADER: &str = "step,species,ix,iy,iz,conc";
