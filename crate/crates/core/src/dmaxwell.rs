//! Discrete Maxwellian: the exponential-family distribution on the velocity
//! grid whose discrete moments match a prescribed target exactly.
//!
//! The distribution is `exp(a0 + a1 vx + a2 vy + a3 vz + a4 |v|^2)` sampled at
//! the grid nodes. Its moments are found by Newton iteration on the five
//! parameters with an Armijo backtracking line search. The exponent factors
//! over the three axes, so every moment and Jacobian entry is assembled from
//! one-dimensional power sums of order at most four.
//!
//! The Jacobian is taken with respect to the natural coordinates
//! `(a0, a1, a2, a3, 2 a4)`, in which `a4 |v|^2` reads `(2 a4)(|v|^2 / 2)`
//! and the matrix is the symmetric Gram matrix of the collision invariants
//! `(1, vx, vy, vz, |v|^2 / 2)` under the distribution.

use std::f64::consts::PI;

use nalgebra::{Matrix5, Vector5};

use crate::error::{Error, Result};
use crate::grid::VelocityGrid;
use crate::moments::{fill_separable, MacroState, Moments};

/// Largest exponent accepted before evaluation is declared divergent.
pub const MAX_EXPONENT: f64 = 700.0;
pub const MAX_ITERATIONS: usize = 100;
pub const RELATIVE_TOLERANCE: f64 = 1e-10;
/// Absolute floor, in units of each component's natural scale.
pub const ABSOLUTE_FLOOR: f64 = 1e-14;
pub const ARMIJO_C: f64 = 1e-4;
pub const MIN_STEP: f64 = 1.0 / (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DMaxParams {
    pub alpha: [f64; 5],
}

impl DMaxParams {
    /// Parameters that reproduce the continuous Maxwellian of `state` pointwise.
    pub fn from_macro(state: &MacroState, gas_constant: f64) -> Self {
        let rt = gas_constant * state.temperature;
        let u = state.velocity;
        let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        Self {
            alpha: [
                (state.rho / (2.0 * PI * rt).powf(1.5)).ln() - u2 / (2.0 * rt),
                u[0] / rt,
                u[1] / rt,
                u[2] / rt,
                -1.0 / (2.0 * rt),
            ],
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.alpha[4] < 0.0 && self.alpha.iter().all(|a| a.is_finite())
    }

    fn shifted(&self, direction: &[f64; 5], t: f64) -> Self {
        let mut alpha = self.alpha;
        for (a, d) in alpha.iter_mut().zip(direction) {
            *a += t * d;
        }
        Self { alpha }
    }
}

/// Per-axis power sums `sum_j v_j^m exp(a v_j + a4 v_j^2)` for `m = 0..=4`.
#[derive(Debug, Clone, Copy)]
struct AxisSums([f64; 5]);

/// Evaluated discrete Maxwellian in factored form.
#[derive(Debug, Clone)]
struct Factored {
    scale: f64,
    axes: [Vec<f64>; 3],
}

fn factor(params: &DMaxParams, vgrid: &VelocityGrid) -> Result<Factored> {
    if !params.is_admissible() {
        return Err(Error::InvalidArgument(format!(
            "discrete Maxwellian requires a4 < 0, got {:?}",
            params.alpha
        )));
    }
    let a = &params.alpha;
    let v = vgrid.nodes();
    let mut peak = a[0];
    let axes = [1, 2, 3].map(|c| {
        let exps: Vec<f64> = v.iter().map(|&x| a[c] * x + a[4] * x * x).collect();
        peak += exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        exps
    });
    if peak > MAX_EXPONENT || !peak.is_finite() {
        return Err(Error::Divergence { exponent: peak });
    }
    Ok(Factored {
        scale: a[0].exp(),
        axes: axes.map(|e| e.into_iter().map(f64::exp).collect()),
    })
}

fn axis_sums(g: &[f64], v: &[f64]) -> AxisSums {
    let mut s = [0.0; 5];
    for (&gi, &vi) in g.iter().zip(v) {
        let mut p = gi;
        for sm in &mut s {
            *sm += p;
            p *= vi;
        }
    }
    AxisSums(s)
}

/// Discrete moments and Gram matrix of a discrete Maxwellian.
fn moments_and_gram(f: &Factored, vgrid: &VelocityGrid) -> (Moments, Matrix5<f64>) {
    let v = vgrid.nodes();
    let [x, y, z] = [0, 1, 2].map(|c| axis_sums(&f.axes[c], v).0);
    let w = f.scale * vgrid.cell_volume();

    let rho = w * x[0] * y[0] * z[0];
    let mx = w * x[1] * y[0] * z[0];
    let my = w * x[0] * y[1] * z[0];
    let mz = w * x[0] * y[0] * z[1];
    let energy = 0.5 * w * (x[2] * y[0] * z[0] + x[0] * y[2] * z[0] + x[0] * y[0] * z[2]);

    let j11 = w * x[2] * y[0] * z[0];
    let j12 = w * x[1] * y[1] * z[0];
    let j13 = w * x[1] * y[0] * z[1];
    let j22 = w * x[0] * y[2] * z[0];
    let j23 = w * x[0] * y[1] * z[1];
    let j33 = w * x[0] * y[0] * z[2];
    let j14 = 0.5 * w * (x[3] * y[0] * z[0] + x[1] * y[2] * z[0] + x[1] * y[0] * z[2]);
    let j24 = 0.5 * w * (x[2] * y[1] * z[0] + x[0] * y[3] * z[0] + x[0] * y[1] * z[2]);
    let j34 = 0.5 * w * (x[2] * y[0] * z[1] + x[0] * y[2] * z[1] + x[0] * y[0] * z[3]);
    let j44 = 0.25
        * w
        * (x[4] * y[0] * z[0]
            + x[0] * y[4] * z[0]
            + x[0] * y[0] * z[4]
            + 2.0 * (x[2] * y[2] * z[0] + x[2] * y[0] * z[2] + x[0] * y[2] * z[2]));

    #[rustfmt::skip]
    let gram = Matrix5::new(
        rho,    mx,  my,  mz,  energy,
        mx,     j11, j12, j13, j14,
        my,     j12, j22, j23, j24,
        mz,     j13, j23, j33, j34,
        energy, j14, j24, j34, j44,
    );
    (
        Moments {
            rho,
            momentum: [mx, my, mz],
            energy,
        },
        gram,
    )
}

/// Samples the discrete Maxwellian on the velocity cube.
pub fn eval_discrete_maxwellian(params: &DMaxParams, vgrid: &VelocityGrid) -> Result<Vec<f64>> {
    let mut out = vec![0.0; vgrid.cube_len()];
    fill_discrete_maxwellian(params, vgrid, &mut out)?;
    Ok(out)
}

pub fn fill_discrete_maxwellian(params: &DMaxParams, vgrid: &VelocityGrid, out: &mut [f64]) -> Result<()> {
    if out.len() != vgrid.cube_len() {
        return Err(Error::DimensionMismatch {
            expected: vgrid.cube_len(),
            got: out.len(),
        });
    }
    let f = factor(params, vgrid)?;
    fill_separable(f.scale, &f.axes[0], &f.axes[1], &f.axes[2], out);
    Ok(())
}

/// Residual `moments(params) - target` in the order `(rho, rho U, E)` and the
/// Jacobian with respect to `(a0, a1, a2, a3, 2 a4)`.
pub fn residual_and_jacobian(
    params: &DMaxParams,
    target: &Moments,
    vgrid: &VelocityGrid,
) -> Result<([f64; 5], [[f64; 5]; 5])> {
    let f = factor(params, vgrid)?;
    let (m, gram) = moments_and_gram(&f, vgrid);
    let residual = sub(&m.as_array(), &target.as_array());
    let mut jac = [[0.0; 5]; 5];
    for (a, row) in jac.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = gram[(a, b)];
        }
    }
    Ok((residual, jac))
}

fn residual_only(params: &DMaxParams, target: &Moments, vgrid: &VelocityGrid) -> Result<[f64; 5]> {
    let f = factor(params, vgrid)?;
    let (m, _) = moments_and_gram(&f, vgrid);
    Ok(sub(&m.as_array(), &target.as_array()))
}

fn sub(a: &[f64; 5], b: &[f64; 5]) -> [f64; 5] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3], a[4] - b[4]]
}

fn scaled_norm_sq(r: &[f64; 5], scales: &[f64; 5]) -> f64 {
    r.iter()
        .zip(scales)
        .map(|(ri, si)| {
            let q = if *si > 0.0 { ri / si } else { *ri };
            q * q
        })
        .sum()
}

/// Armijo backtracking over `t in {1, 1/2, 1/4, ...}` down to `2^-30`.
///
/// `merit(t)` returns the squared residual norm at step `t`, or `None` when
/// the step is inadmissible. The accepted step satisfies
/// `merit(t) <= (1 - c t) merit(0)`.
pub fn armijo_backtrack(merit0: f64, mut merit: impl FnMut(f64) -> Option<f64>) -> Option<f64> {
    let mut t = 1.0;
    while t >= MIN_STEP {
        if let Some(m) = merit(t) {
            if m.is_finite() && m <= (1.0 - ARMIJO_C * t) * merit0 {
                return Some(t);
            }
        }
        t *= 0.5;
    }
    None
}

/// Step length along `direction` (in `alpha` coordinates) for the moment
/// problem; residuals are measured in units of the target's natural scales.
pub fn backtracking_search(
    params: &DMaxParams,
    direction: &[f64; 5],
    target: &Moments,
    vgrid: &VelocityGrid,
) -> Result<f64> {
    let scales = target.scales();
    let r0 = residual_only(params, target, vgrid)?;
    let merit0 = scaled_norm_sq(&r0, &scales);
    armijo_backtrack(merit0, |t| {
        let trial = params.shifted(direction, t);
        if !trial.is_admissible() {
            return None;
        }
        residual_only(&trial, target, vgrid)
            .ok()
            .map(|r| scaled_norm_sq(&r, &scales))
    })
    .ok_or(Error::LineSearchFailed {
        residual: merit0.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DMaxSolution {
    pub params: DMaxParams,
    pub iterations: usize,
    /// Scaled residual norm at the returned parameters.
    pub residual: f64,
}

fn converged(r: &[f64; 5], target: &Moments) -> bool {
    let t = target.as_array();
    let s = target.scales();
    (0..5).all(|a| r[a].abs() <= RELATIVE_TOLERANCE * t[a].abs() + ABSOLUTE_FLOOR * s[a])
}

/// Newton direction in `alpha` coordinates.
///
/// The Gram matrix is equilibrated by its diagonal before a Cholesky solve;
/// when Cholesky reports the matrix is not numerically positive definite the
/// solve falls back to full-pivoting LU.
fn newton_direction(residual: &[f64; 5], gram: &[[f64; 5]; 5]) -> Option<[f64; 5]> {
    let d = Vector5::from_fn(|a, _| {
        let g = gram[a][a];
        if g > 0.0 {
            1.0 / g.sqrt()
        } else {
            1.0
        }
    });
    let scaled = Matrix5::from_fn(|a, b| d[a] * gram[a][b] * d[b]);
    let rhs = Vector5::from_fn(|a, _| -d[a] * residual[a]);
    let y = match scaled.cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => scaled.full_piv_lu().solve(&rhs)?,
    };
    let eta = y.component_mul(&d);
    if eta.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some([eta[0], eta[1], eta[2], eta[3], 0.5 * eta[4]])
}

/// Solves for the discrete Maxwellian whose moments equal `target`.
///
/// Starts from the continuous-Maxwellian parameters of `guess`, or of the
/// target's own macro state when no guess is given.
pub fn solve_discrete_maxwellian(
    target: &Moments,
    vgrid: &VelocityGrid,
    guess: Option<&MacroState>,
    gas_constant: f64,
) -> Result<DMaxSolution> {
    let start = match guess {
        Some(state) => *state,
        None => crate::moments::macro_from_moments(target, gas_constant)?,
    };
    let mut params = DMaxParams::from_macro(&start, gas_constant);
    let scales = target.scales();
    for iterations in 0..=MAX_ITERATIONS {
        let (r, gram) = residual_and_jacobian(&params, target, vgrid)?;
        let norm = scaled_norm_sq(&r, &scales).sqrt();
        if converged(&r, target) {
            return Ok(DMaxSolution {
                params,
                iterations,
                residual: norm,
            });
        }
        if iterations == MAX_ITERATIONS {
            return Err(Error::NotConverged {
                iterations,
                residual: norm,
            });
        }
        let direction = newton_direction(&r, &gram).ok_or(Error::LineSearchFailed { residual: norm })?;
        let t = backtracking_search(&params, &direction, target, vgrid)?;
        params = params.shifted(&direction, t);
    }
    unreachable!("loop returns on its last iteration")
}
