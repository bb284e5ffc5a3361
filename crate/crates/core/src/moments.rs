//! Macroscopic moments, the continuous Maxwellian, and the distribution storage.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{PhysicalGrid, VelocityGrid};

/// Conserved moments `(rho, rho U, E)` of a velocity cube.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub rho: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
}

impl Moments {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.rho,
            self.momentum[0],
            self.momentum[1],
            self.momentum[2],
            self.energy,
        ]
    }

    pub fn from_array(m: [f64; 5]) -> Self {
        Self {
            rho: m[0],
            momentum: [m[1], m[2], m[3]],
            energy: m[4],
        }
    }

    /// Natural magnitude of each component: `rho`, `rho c` for the three
    /// momenta (with `c = sqrt(2E/rho)`), and `E`.
    pub fn scales(&self) -> [f64; 5] {
        let c = if self.rho > 0.0 && self.energy > 0.0 {
            (2.0 * self.energy / self.rho).sqrt()
        } else {
            0.0
        };
        let m = self.rho.abs() * c;
        [self.rho.abs(), m, m, m, self.energy.abs()]
    }

    /// Largest componentwise difference, each normalized by `scales()` of `self`.
    pub fn scaled_mismatch(&self, other: &Moments) -> f64 {
        let a = self.as_array();
        let b = other.as_array();
        let s = self.scales();
        (0..5)
            .map(|i| {
                let d = (a[i] - b[i]).abs();
                if s[i] > 0.0 {
                    d / s[i]
                } else {
                    d
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Local thermodynamic state at one spatial point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroState {
    pub rho: f64,
    pub velocity: [f64; 3],
    pub temperature: f64,
    /// Specific internal energy `e = 3/2 R T`.
    pub internal_energy: f64,
    /// Total energy density `E = rho e + rho |U|^2 / 2`.
    pub total_energy: f64,
    pub pressure: f64,
}

impl MacroState {
    /// State with the given density, bulk velocity and temperature.
    pub fn new(rho: f64, velocity: [f64; 3], temperature: f64, gas_constant: f64) -> Self {
        let internal_energy = 1.5 * gas_constant * temperature;
        let u2 = dot(&velocity, &velocity);
        Self {
            rho,
            velocity,
            temperature,
            internal_energy,
            total_energy: rho * internal_energy + 0.5 * rho * u2,
            pressure: rho * gas_constant * temperature,
        }
    }

    /// State from density, velocity and specific internal energy.
    pub fn from_internal_energy(
        rho: f64,
        velocity: [f64; 3],
        internal_energy: f64,
        gas_constant: f64,
    ) -> Self {
        Self::new(rho, velocity, internal_energy / (1.5 * gas_constant), gas_constant)
    }

    pub fn moments(&self) -> Moments {
        Moments {
            rho: self.rho,
            momentum: self.velocity.map(|u| self.rho * u),
            energy: self.total_energy,
        }
    }
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Discrete moments of one velocity cube as plain node sums times `dv^3`.
///
/// The cube is stored with `v_z` fastest, then `v_y`, then `v_x`.
pub fn compute_moments(cube: &[f64], vgrid: &VelocityGrid) -> Result<Moments> {
    if cube.len() != vgrid.cube_len() {
        return Err(Error::DimensionMismatch {
            expected: vgrid.cube_len(),
            got: cube.len(),
        });
    }
    Ok(moments_unchecked(cube, vgrid.nodes(), vgrid.cell_volume()))
}

pub(crate) fn moments_unchecked(cube: &[f64], v: &[f64], cell: f64) -> Moments {
    let n = v.len();
    let mut rho = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    let mut mz = 0.0;
    let mut e2 = 0.0;
    for (j, &vx) in v.iter().enumerate() {
        let plane = &cube[j * n * n..(j + 1) * n * n];
        let mut p0 = 0.0;
        let mut p2 = 0.0;
        for (k, &vy) in v.iter().enumerate() {
            let row = &plane[k * n..(k + 1) * n];
            let mut r0 = 0.0;
            let mut r1 = 0.0;
            let mut r2 = 0.0;
            for (&f, &vz) in row.iter().zip(v) {
                r0 += f;
                r1 += vz * f;
                r2 += vz * vz * f;
            }
            p0 += r0;
            my += vy * r0;
            mz += r1;
            p2 += vy * vy * r0 + r2;
        }
        rho += p0;
        mx += vx * p0;
        e2 += vx * vx * p0 + p2;
    }
    Moments {
        rho: rho * cell,
        momentum: [mx * cell, my * cell, mz * cell],
        energy: 0.5 * e2 * cell,
    }
}

/// Recovers `(U, e, T, p)` from conserved moments.
///
/// A non-positive internal energy means the field is corrupted and is
/// reported as an error rather than clamped.
pub fn macro_from_moments(m: &Moments, gas_constant: f64) -> Result<MacroState> {
    if !(m.rho > 0.0) {
        return Err(Error::NonPositiveDensity { rho: m.rho });
    }
    let velocity = m.momentum.map(|p| p / m.rho);
    let internal_energy = m.energy / m.rho - 0.5 * dot(&velocity, &velocity);
    let temperature = internal_energy / (1.5 * gas_constant);
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::NonPositiveTemperature {
            temperature,
            rho: m.rho,
            energy: m.energy,
        });
    }
    Ok(MacroState {
        rho: m.rho,
        velocity,
        temperature,
        internal_energy,
        total_energy: m.energy,
        pressure: m.rho * gas_constant * temperature,
    })
}

/// Continuous Maxwellian density at velocity `v`.
pub fn eval_maxwellian(state: &MacroState, v: [f64; 3], gas_constant: f64) -> f64 {
    let rt = gas_constant * state.temperature;
    let c = [
        v[0] - state.velocity[0],
        v[1] - state.velocity[1],
        v[2] - state.velocity[2],
    ];
    state.rho / (2.0 * PI * rt).powf(1.5) * (-dot(&c, &c) / (2.0 * rt)).exp()
}

/// Writes the sampled Maxwellian of `state` into `out`, using the product
/// structure of the Gaussian so only `3 (N_v + 1)` exponentials are taken.
pub fn fill_maxwellian(state: &MacroState, vgrid: &VelocityGrid, gas_constant: f64, out: &mut [f64]) {
    let rt = gas_constant * state.temperature;
    let norm = state.rho / (2.0 * PI * rt).powf(1.5);
    let factor = |u: f64| -> Vec<f64> {
        vgrid
            .nodes()
            .iter()
            .map(|&v| (-(v - u) * (v - u) / (2.0 * rt)).exp())
            .collect()
    };
    let gx = factor(state.velocity[0]);
    let gy = factor(state.velocity[1]);
    let gz = factor(state.velocity[2]);
    fill_separable(norm, &gx, &gy, &gz, out);
}

pub(crate) fn fill_separable(scale: f64, gx: &[f64], gy: &[f64], gz: &[f64], out: &mut [f64]) {
    let n = gz.len();
    debug_assert_eq!(out.len(), n * n * n);
    for (j, plane) in out.chunks_exact_mut(n * n).enumerate() {
        let sx = scale * gx[j];
        for (k, row) in plane.chunks_exact_mut(n).enumerate() {
            let sxy = sx * gy[k];
            for (o, &g) in row.iter_mut().zip(gz) {
                *o = sxy * g;
            }
        }
    }
}

/// Distribution values `f[i, j, k, l]` over space and the velocity cube,
/// stored space-major with `v_z` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    values: Vec<f64>,
    points: usize,
    nodes: usize,
}

impl DistributionField {
    pub fn zeros(points: usize, vgrid: &VelocityGrid) -> Self {
        Self {
            values: vec![0.0; points * vgrid.cube_len()],
            points,
            nodes: vgrid.len(),
        }
    }

    pub fn from_values(values: Vec<f64>, points: usize, vgrid: &VelocityGrid) -> Result<Self> {
        let expected = points * vgrid.cube_len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self {
            values,
            points,
            nodes: vgrid.len(),
        })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Nodes per velocity axis.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn cube_len(&self) -> usize {
        self.nodes * self.nodes * self.nodes
    }

    pub fn index(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.nodes + j) * self.nodes + k) * self.nodes + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.values[self.index(i, j, k, l)]
    }

    pub fn cube(&self, i: usize) -> &[f64] {
        let len = self.cube_len();
        &self.values[i * len..(i + 1) * len]
    }

    pub fn cube_mut(&mut self, i: usize) -> &mut [f64] {
        let len = self.cube_len();
        &mut self.values[i * len..(i + 1) * len]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Samples the Maxwellian of each point's macro state onto the velocity grid.
pub fn init_maxwellian_field(
    states: &[MacroState],
    xgrid: &PhysicalGrid,
    vgrid: &VelocityGrid,
    gas_constant: f64,
) -> Result<DistributionField> {
    if states.len() != xgrid.len() {
        return Err(Error::DimensionMismatch {
            expected: xgrid.len(),
            got: states.len(),
        });
    }
    let mut field = DistributionField::zeros(xgrid.len(), vgrid);
    for (i, state) in states.iter().enumerate() {
        fill_maxwellian(state, vgrid, gas_constant, field.cube_mut(i));
    }
    Ok(field)
}
