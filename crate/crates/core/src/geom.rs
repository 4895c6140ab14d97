//! Minimal 3-vector used for agent positions and headings.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn get(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn get_mut(&mut self, axis: usize) -> &mut f64 {
        match axis {
            0 => &mut self.x,
            1 => &mut self.y,
            _ => &mut self.z,
        }
    }

    /// Uniform direction on the unit sphere (Marsaglia/Archimedes: uniform z, uniform azimuth).
    pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.gen_range(-1.0..=1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).max(0.0).sqrt();
        Self::new(r * phi.cos(), r * phi.sin(), z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Reflect `pos` back into `[0, extent]` along each axis, flipping the matching
/// component of `heading` whenever a wall is hit. Handles overshoots of any size.
pub fn reflect_into_box(pos: &mut Vec3, heading: &mut Vec3, extent: Vec3) {
    for axis in 0..3 {
        let len = extent.get(axis);
        let p = pos.get_mut(axis);
        let mut flips = 0u32;
        // a single agent step is far shorter than the box, so this loops at most twice
        while *p < 0.0 || *p > len {
            if *p < 0.0 {
                *p = -*p;
            } else {
                *p = 2.0 * len - *p;
            }
            flips += 1;
        }
        if flips % 2 == 1 {
            let h = heading.get_mut(axis);
            *h = -*h;
        }
    }
}
