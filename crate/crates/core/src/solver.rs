//! Semi-Lagrangian time stepping for the BGK equation.
//!
//! One step traces the characteristic of every `(x_i, v_j)` pair back by
//! `v_j dt`, reconstructs the distribution there, builds the Maxwellian with
//! the same discrete moments, and applies the implicit relaxation
//! `f = (tau f~ + dt M) / (tau + dt)`. Diffuse-reflection walls close the
//! system at both ends.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;
use serde::Deserialize;

use crate::dmaxwell::{fill_discrete_maxwellian, solve_discrete_maxwellian};
use crate::error::{Error, Result};
use crate::gas::{relaxation_time, GasConstants};
use crate::grid::{PhysicalGrid, VelocityGrid};
use crate::interp::{
    find_neighbors_with_fallback, mls_boundary_stencil, orient_anchor, mls_stencil, spline_stencil, MlsConfig, Stencil,
    UpwindSign,
};
use crate::moments::{fill_maxwellian, macro_from_moments, moments_unchecked, DistributionField, MacroState, Moments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reconstruction {
    Spline,
    Mls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxwellianMode {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauMode {
    /// Relaxation times fixed at their initial left/right values.
    Constant,
    /// Relaxation times recomputed from the local state after every step.
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallSide {
    Left,
    Right,
}

/// Diffusely reflecting wall at one end of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallSpec {
    pub side: WallSide,
    pub velocity: [f64; 3],
    pub temperature: f64,
}

impl WallSpec {
    pub fn at_rest(side: WallSide, temperature: f64) -> Self {
        Self {
            side,
            velocity: [0.0; 3],
            temperature,
        }
    }

    /// Unit normal pointing into the gas.
    pub fn normal(&self) -> [f64; 3] {
        match self.side {
            WallSide::Left => [1.0, 0.0, 0.0],
            WallSide::Right => [-1.0, 0.0, 0.0],
        }
    }

    fn normal_speed(&self, v: [f64; 3]) -> f64 {
        let n = self.normal();
        (v[0] - self.velocity[0]) * n[0] + (v[1] - self.velocity[1]) * n[1] + (v[2] - self.velocity[2]) * n[2]
    }

    /// Wall Maxwellian with unit density.
    fn unit_maxwellian(&self, v: [f64; 3], gas_constant: f64) -> f64 {
        let rt = gas_constant * self.temperature;
        let c2 = (v[0] - self.velocity[0]).powi(2) + (v[1] - self.velocity[1]).powi(2) + (v[2] - self.velocity[2]).powi(2);
        (-c2 / (2.0 * rt)).exp() / (2.0 * PI * rt).powf(1.5)
    }
}

/// Numerical settings of the kinetic solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub t_final: f64,
    pub reconstruction: Reconstruction,
    pub maxwellian: MaxwellianMode,
    pub tau_mode: TauMode,
    pub mls: MlsConfig,
    pub gas: GasConstants,
    /// Product `lambda * rho`, which fixes the mean free path of any density.
    pub mean_free_path_density: f64,
    pub walls: [WallSpec; 2],
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0) || !self.cfl.is_finite() {
            return Err(Error::config("cfl", "must be positive"));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::config("t_final", "must be positive"));
        }
        if !self.gas.is_valid() {
            return Err(Error::config("gas", "gas constants must be positive"));
        }
        if !(self.mean_free_path_density > 0.0) {
            return Err(Error::config("lambda", "mean free path must be positive"));
        }
        for w in &self.walls {
            if !(w.temperature > 0.0) {
                return Err(Error::config("wall_temperature", "must be positive"));
            }
        }
        self.mls.validate()
    }

    /// Mean free path at density `rho` under this configuration's scaling.
    pub fn mean_free_path(&self, rho: f64) -> f64 {
        self.mean_free_path_density / rho
    }
}

/// Relative slack, in nominal steps, under which the final time counts as reached.
const FINAL_TIME_SLACK: f64 = 1e-9;

pub fn timestep_from_cfl(cfl: f64, dx_avg: f64, v_max: f64) -> f64 {
    cfl * dx_avg / v_max
}

/// Origin of the characteristic that reaches `x` after `dt` at speed `v`.
pub fn foot_point(x: f64, v: f64, dt: f64) -> f64 {
    x - v * dt
}

/// Reconstruction stencils for every `(i, j)` foot point at one time step.
#[derive(Debug, Clone)]
pub struct AdvectionPlan {
    dt: f64,
    nodes: usize,
    stencils: Vec<Stencil>,
}

impl AdvectionPlan {
    pub fn build(
        xgrid: &PhysicalGrid,
        vgrid: &VelocityGrid,
        dt: f64,
        method: Reconstruction,
        mls: &MlsConfig,
    ) -> Result<Self> {
        let points = xgrid.points();
        let nodes = vgrid.len();
        let ghosts = match method {
            Reconstruction::Spline => Some(GhostedGrid::new(xgrid, dt * vgrid.v_max())),
            Reconstruction::Mls => None,
        };
        let h = mls.radius_factor * xgrid.dx_avg();
        let mut stencils = Vec::with_capacity(points.len() * nodes);
        for (i, &x) in points.iter().enumerate() {
            for &v in vgrid.nodes() {
                let foot = foot_point(x, v, dt);
                let stencil = if dt == 0.0 || v == 0.0 {
                    // Exact identity, independent of the reconstruction.
                    Stencil::identity(i)
                } else {
                    match &ghosts {
                        Some(g) => g.stencil(foot)?,
                        // Feet beyond a wall take the wall value, as the
                        // mirrored ghost points do for the spline.
                        None if foot <= xgrid.a() => Stencil::identity(0),
                        None if foot >= xgrid.b() => Stencil::identity(points.len() - 1),
                        None => {
                            let sign = if mls.upwind {
                                UpwindSign::for_velocity(v)
                            } else {
                                UpwindSign::None
                            };
                            let mut set = find_neighbors_with_fallback(points, 0..points.len(), foot, h, sign)?;
                            orient_anchor(points, &mut set, UpwindSign::for_velocity(v));
                            mls_stencil(points, &set, mls.alpha)?
                        }
                    }
                };
                stencils.push(stencil);
            }
        }
        Ok(Self { dt, nodes, stencils })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stencil(&self, i: usize, j: usize) -> &Stencil {
        &self.stencils[i * self.nodes + j]
    }

    /// Writes the reconstructed field `f~` into `out`.
    pub fn apply(&self, f: &DistributionField, out: &mut DistributionField) {
        let n = self.nodes;
        let slab = n * n;
        let cube = f.cube_len();
        let src = f.values();
        out.values_mut()
            .par_chunks_mut(cube)
            .enumerate()
            .for_each(|(i, dst_cube)| {
                for (j, dst) in dst_cube.chunks_exact_mut(slab).enumerate() {
                    let terms = self.stencils[i * n + j].terms();
                    let (first, rest) = terms.split_first().expect("stencils are never empty");
                    let offset = |p: usize| p * cube + j * slab;
                    let s = &src[offset(first.0)..offset(first.0) + slab];
                    for (d, &v) in dst.iter_mut().zip(s) {
                        *d = first.1 * v;
                    }
                    for &(p, c) in rest {
                        let s = &src[offset(p)..offset(p) + slab];
                        for (d, &v) in dst.iter_mut().zip(s) {
                            *d += c * v;
                        }
                    }
                }
            });
    }
}

/// Grid extended by mirrored ghost points whose values copy the wall node.
struct GhostedGrid {
    coords: Vec<f64>,
    source: Vec<usize>,
}

impl GhostedGrid {
    fn new(xgrid: &PhysicalGrid, reach: f64) -> Self {
        let p = xgrid.points();
        let last = p.len() - 1;
        let (a, b) = (xgrid.a(), xgrid.b());
        let min_ghosts = (reach / xgrid.dx_avg()).ceil() as usize + 1;
        let count = |dist: &dyn Fn(usize) -> f64| {
            let mut g = min_ghosts.min(last);
            while g < last && dist(g) < reach {
                g += 1;
            }
            g
        };
        let gl = count(&|m| p[m] - a);
        let gr = count(&|m| b - p[last - m]);
        let mut coords = Vec::with_capacity(p.len() + gl + gr);
        let mut source = Vec::with_capacity(coords.capacity());
        for m in (1..=gl).rev() {
            coords.push(a - (p[m] - a));
            source.push(0);
        }
        coords.extend_from_slice(p);
        source.extend(0..p.len());
        for m in 1..=gr {
            coords.push(b + (b - p[last - m]));
            source.push(last);
        }
        Self { coords, source }
    }

    fn stencil(&self, x: f64) -> Result<Stencil> {
        let raw = spline_stencil(&self.coords, x)?;
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(2);
        for &(e, c) in raw.terms() {
            let idx = self.source[e];
            match merged.iter_mut().find(|t| t.0 == idx) {
                Some(t) => t.1 += c,
                None => merged.push((idx, c)),
            }
        }
        Ok(Stencil::from_terms(merged))
    }
}

/// Reconstructs `f` at every foot point for time step `dt`.
pub fn advect(
    f: &DistributionField,
    xgrid: &PhysicalGrid,
    vgrid: &VelocityGrid,
    dt: f64,
    method: Reconstruction,
    mls: &MlsConfig,
) -> Result<DistributionField> {
    let plan = AdvectionPlan::build(xgrid, vgrid, dt, method, mls)?;
    let mut out = DistributionField::zeros(f.points(), vgrid);
    plan.apply(f, &mut out);
    Ok(out)
}

/// Outcome of building the target Maxwellian at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetReport {
    pub moments: Moments,
    pub state: MacroState,
    /// Newton iterations of the discrete solve, if one converged.
    pub dmax_iterations: Option<usize>,
    /// The discrete solve failed and the continuous Maxwellian was used.
    pub fallback: bool,
}

/// Writes into `out` the Maxwellian sharing the discrete moments of `tilde`.
pub fn build_target_maxwellian(
    tilde: &[f64],
    vgrid: &VelocityGrid,
    mode: MaxwellianMode,
    gas_constant: f64,
    out: &mut [f64],
) -> Result<TargetReport> {
    if tilde.len() != vgrid.cube_len() || out.len() != vgrid.cube_len() {
        return Err(Error::DimensionMismatch {
            expected: vgrid.cube_len(),
            got: tilde.len().min(out.len()),
        });
    }
    let moments = moments_unchecked(tilde, vgrid.nodes(), vgrid.cell_volume());
    let state = macro_from_moments(&moments, gas_constant)?;
    let mut report = TargetReport {
        moments,
        state,
        dmax_iterations: None,
        fallback: false,
    };
    match mode {
        MaxwellianMode::Continuous => fill_maxwellian(&state, vgrid, gas_constant, out),
        MaxwellianMode::Discrete => {
            match solve_discrete_maxwellian(&moments, vgrid, Some(&state), gas_constant)
                .and_then(|sol| fill_discrete_maxwellian(&sol.params, vgrid, out).map(|_| sol))
            {
                Ok(sol) => report.dmax_iterations = Some(sol.iterations),
                Err(e) => {
                    warn!("discrete Maxwellian failed ({e}); using the continuous one");
                    fill_maxwellian(&state, vgrid, gas_constant, out);
                    report.fallback = true;
                }
            }
        }
    }
    Ok(report)
}

/// Implicit relaxation `(tau f~ + dt M) / (tau + dt)`, written over `tilde`.
pub fn relax(tilde: &mut [f64], maxwellian: &[f64], tau: f64, dt: f64) {
    debug_assert!(tau > 0.0);
    let keep = tau / (tau + dt);
    let gain = dt / (tau + dt);
    for (f, &m) in tilde.iter_mut().zip(maxwellian) {
        *f = keep * *f + gain * m;
    }
}

/// Density of the re-emitted wall Maxwellian that balances the arriving flux.
///
/// Only the arriving entries of `cube` (with `(v - U_w) . n < 0`) are read.
pub fn wall_density(cube: &[f64], wall: &WallSpec, vgrid: &VelocityGrid, gas_constant: f64) -> Result<f64> {
    if cube.len() != vgrid.cube_len() {
        return Err(Error::DimensionMismatch {
            expected: vgrid.cube_len(),
            got: cube.len(),
        });
    }
    let v = vgrid.nodes();
    let n = v.len();
    let mut arriving = 0.0;
    let mut emitted = 0.0;
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                let vel = [v[j], v[k], v[l]];
                let c = wall.normal_speed(vel);
                if c < 0.0 {
                    arriving += c * cube[(j * n + k) * n + l];
                } else if c > 0.0 {
                    emitted += c * wall.unit_maxwellian(vel, gas_constant);
                }
            }
        }
    }
    let cell = vgrid.cell_volume();
    if !(emitted > 0.0) {
        return Err(Error::ZeroWallFlux);
    }
    Ok(-(arriving * cell) / (emitted * cell))
}

/// Closes both wall cubes of `f`: arriving velocities are extrapolated from
/// the interior with MLS, emitted velocities follow the wall Maxwellian.
/// Returns the two wall densities.
pub fn apply_diffuse_boundary(
    f: &mut DistributionField,
    xgrid: &PhysicalGrid,
    walls: &[WallSpec; 2],
    vgrid: &VelocityGrid,
    gas_constant: f64,
    mls: &MlsConfig,
) -> Result<[f64; 2]> {
    let stencils = boundary_stencils(xgrid, mls)?;
    apply_boundary_with(f, &stencils, walls, vgrid, gas_constant)
}

fn boundary_stencils(xgrid: &PhysicalGrid, mls: &MlsConfig) -> Result<[Stencil; 2]> {
    let last = xgrid.len() - 1;
    let h = mls.radius_factor * xgrid.dx_avg();
    let interior = 1..last;
    Ok([
        mls_boundary_stencil(xgrid.points(), interior.clone(), xgrid.a(), h, mls)?,
        mls_boundary_stencil(xgrid.points(), interior, xgrid.b(), h, mls)?,
    ])
}

fn apply_boundary_with(
    f: &mut DistributionField,
    stencils: &[Stencil; 2],
    walls: &[WallSpec; 2],
    vgrid: &VelocityGrid,
    gas_constant: f64,
) -> Result<[f64; 2]> {
    let last = f.points() - 1;
    let v = vgrid.nodes();
    let n = v.len();
    let mut densities = [0.0; 2];
    for (w, wall) in walls.iter().enumerate() {
        let iw = match wall.side {
            WallSide::Left => 0,
            WallSide::Right => last,
        };
        let mut cube = f.cube(iw).to_vec();
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    if wall.normal_speed([v[j], v[k], v[l]]) <= 0.0 {
                        let idx = (j * n + k) * n + l;
                        cube[idx] = stencils[w]
                            .terms()
                            .iter()
                            .map(|&(p, c)| c * f.values()[p * f.cube_len() + idx])
                            .sum();
                    }
                }
            }
        }
        let rho_w = wall_density(&cube, wall, vgrid, gas_constant)?;
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let vel = [v[j], v[k], v[l]];
                    if wall.normal_speed(vel) > 0.0 {
                        cube[(j * n + k) * n + l] = rho_w * wall.unit_maxwellian(vel, gas_constant);
                    }
                }
            }
        }
        f.cube_mut(iw).copy_from_slice(&cube);
        densities[w] = rho_w;
    }
    Ok(densities)
}

/// Solution at one time level.
#[derive(Debug, Clone)]
pub struct StepState {
    pub f: DistributionField,
    pub t: f64,
    pub step: usize,
    pub tau: Vec<f64>,
    pub macro_states: Vec<MacroState>,
}

/// Per-step monitoring data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    /// Trapezoidal total mass `sum rho_i w_i` after the step.
    pub mass: f64,
    pub min_f: f64,
    pub max_f: f64,
    /// Largest scaled moment difference between `f^{n+1}` and `f~` over all
    /// points, measured before the wall closure.
    pub max_moment_mismatch: f64,
    pub dmax_iterations_mean: f64,
    pub dmax_iterations_max: usize,
    pub dmax_fallbacks: usize,
    pub wall_densities: [f64; 2],
}

/// Semi-Lagrangian BGK solver on fixed grids.
pub struct Solver {
    xgrid: PhysicalGrid,
    vgrid: VelocityGrid,
    cfg: SolverConfig,
    plan: Option<AdvectionPlan>,
    boundary: [Stencil; 2],
    scratch: DistributionField,
    cell_widths: Vec<f64>,
}

impl Solver {
    pub fn new(xgrid: PhysicalGrid, vgrid: VelocityGrid, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let boundary = boundary_stencils(&xgrid, &cfg.mls)?;
        let scratch = DistributionField::zeros(xgrid.len(), &vgrid);
        let cell_widths = xgrid.cell_widths();
        Ok(Self {
            xgrid,
            vgrid,
            cfg,
            plan: None,
            boundary,
            scratch,
            cell_widths,
        })
    }

    pub fn xgrid(&self) -> &PhysicalGrid {
        &self.xgrid
    }

    pub fn vgrid(&self) -> &VelocityGrid {
        &self.vgrid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Nominal time step set by the CFL number.
    pub fn dt(&self) -> f64 {
        timestep_from_cfl(self.cfg.cfl, self.xgrid.dx_avg(), self.vgrid.v_max())
    }

    /// Relaxation time of a local state under the variable-tau rule.
    pub fn local_tau(&self, state: &MacroState) -> f64 {
        relaxation_time(
            self.cfg.mean_free_path(state.rho),
            state.temperature,
            self.cfg.gas.gas_constant,
        )
    }

    /// Maxwellian initial state with the given per-point relaxation times.
    pub fn initial_state(&self, states: &[MacroState], tau: Vec<f64>) -> Result<StepState> {
        if tau.len() != self.xgrid.len() || tau.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument(
                "one positive relaxation time per grid point is required".into(),
            ));
        }
        let f = crate::moments::init_maxwellian_field(states, &self.xgrid, &self.vgrid, self.cfg.gas.gas_constant)?;
        let macro_states = self.macro_states(&f).map_err(|(point, e)| Error::StepFailed {
            step: 0,
            time: 0.0,
            point,
            source: Box::new(e),
        })?;
        Ok(StepState {
            f,
            t: 0.0,
            step: 0,
            tau,
            macro_states,
        })
    }

    fn macro_states(&self, f: &DistributionField) -> std::result::Result<Vec<MacroState>, (usize, Error)> {
        let r = self.cfg.gas.gas_constant;
        (0..f.points())
            .into_par_iter()
            .map(|i| {
                let m = moments_unchecked(f.cube(i), self.vgrid.nodes(), self.vgrid.cell_volume());
                macro_from_moments(&m, r).map_err(|e| (i, e))
            })
            .collect()
    }

    pub fn is_finished(&self, state: &StepState) -> bool {
        self.cfg.t_final - state.t <= FINAL_TIME_SLACK * self.dt()
    }

    /// Advances `state` by one step, clipped so that `t` never passes `t_final`.
    ///
    /// On error the state is left untouched.
    pub fn step(&mut self, state: &mut StepState) -> Result<StepDiagnostics> {
        if self.is_finished(state) {
            return Err(Error::InvalidArgument(format!(
                "no time left to advance: t = {}, t_final = {}",
                state.t, self.cfg.t_final
            )));
        }
        let nominal = self.dt();
        let remaining = self.cfg.t_final - state.t;
        if remaining <= nominal * (1.0 + FINAL_TIME_SLACK) {
            let mut diag = self.step_by(state, remaining)?;
            state.t = self.cfg.t_final;
            diag.t = state.t;
            Ok(diag)
        } else {
            self.step_by(state, nominal)
        }
    }

    /// Steps until `t_final`, handing every step's diagnostics to `observe`.
    pub fn run(&mut self, state: &mut StepState, mut observe: impl FnMut(&StepDiagnostics)) -> Result<()> {
        while !self.is_finished(state) {
            let diag = self.step(state)?;
            observe(&diag);
        }
        Ok(())
    }

    /// Advances `state` by an explicit time step.
    pub fn step_by(&mut self, state: &mut StepState, dt: f64) -> Result<StepDiagnostics> {
        let step = state.step;
        let fail = |point: usize, e: Error| Error::StepFailed {
            step,
            time: state.t,
            point,
            source: Box::new(e),
        };
        if self.plan.as_ref().map(|p| p.dt()) != Some(dt) {
            self.plan = Some(
                AdvectionPlan::build(&self.xgrid, &self.vgrid, dt, self.cfg.reconstruction, &self.cfg.mls)
                    .map_err(|e| fail(0, e))?,
            );
        }
        let plan = self.plan.as_ref().expect("plan built above");
        plan.apply(&state.f, &mut self.scratch);

        let vgrid = &self.vgrid;
        let mode = self.cfg.maxwellian;
        let r = self.cfg.gas.gas_constant;
        let cube_len = vgrid.cube_len();
        let reports: Vec<std::result::Result<(TargetReport, f64), Error>> = self
            .scratch
            .values_mut()
            .par_chunks_mut(cube_len)
            .zip(state.tau.par_iter())
            .map_init(
                || vec![0.0; cube_len],
                |maxwellian, (cube, &tau)| {
                    let report = build_target_maxwellian(cube, vgrid, mode, r, maxwellian)?;
                    relax(cube, maxwellian, tau, dt);
                    let after = moments_unchecked(cube, vgrid.nodes(), vgrid.cell_volume());
                    Ok((report, report.moments.scaled_mismatch(&after)))
                },
            )
            .collect();

        let mut max_mismatch: f64 = 0.0;
        let mut iter_sum = 0usize;
        let mut iter_count = 0usize;
        let mut iter_max = 0usize;
        let mut fallbacks = 0usize;
        for (i, rep) in reports.into_iter().enumerate() {
            let (report, mismatch) = rep.map_err(|e| fail(i, e))?;
            max_mismatch = max_mismatch.max(mismatch);
            if let Some(it) = report.dmax_iterations {
                iter_sum += it;
                iter_count += 1;
                iter_max = iter_max.max(it);
            }
            if report.fallback {
                fallbacks += 1;
            }
        }

        let wall_densities = apply_boundary_with(&mut self.scratch, &self.boundary, &self.cfg.walls, vgrid, r)
            .map_err(|e| fail(0, e))?;
        if !self.scratch.is_finite() {
            return Err(fail(0, Error::InvalidArgument("non-finite distribution values".into())));
        }
        let macro_states = self.macro_states(&self.scratch).map_err(|(i, e)| fail(i, e))?;

        std::mem::swap(&mut state.f, &mut self.scratch);
        state.macro_states = macro_states;
        if self.cfg.tau_mode == TauMode::Variable {
            state.tau = state.macro_states.iter().map(|s| self.local_tau(s)).collect();
        }
        state.t += dt;
        state.step += 1;

        let (min_f, max_f) = state.f.min_max();
        let mass = state
            .macro_states
            .iter()
            .zip(&self.cell_widths)
            .map(|(s, w)| s.rho * w)
            .sum();
        Ok(StepDiagnostics {
            step: state.step,
            t: state.t,
            dt,
            mass,
            min_f,
            max_f,
            max_moment_mismatch: max_mismatch,
            dmax_iterations_mean: if iter_count > 0 {
                iter_sum as f64 / iter_count as f64
            } else {
                0.0
            },
            dmax_iterations_max: iter_max,
            dmax_fallbacks: fallbacks,
            wall_densities,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{compute_moments, init_maxwellian_field};
    use approx::assert_relative_eq;

    const R: f64 = 208.0;
    const T_LEFT: f64 = 2.0 * 2.5 / (3.0 * R);

    fn config(reconstruction: Reconstruction, maxwellian: MaxwellianMode) -> SolverConfig {
        SolverConfig {
            cfl: 1.0,
            t_final: 0.17,
            reconstruction,
            maxwellian,
            tau_mode: TauMode::Constant,
            mls: MlsConfig::default(),
            gas: GasConstants::argon(),
            mean_free_path_density: 1e-3 * 1e-4,
            walls: [WallSpec::at_rest(WallSide::Left, T_LEFT), WallSpec::at_rest(WallSide::Right, T_LEFT)],
        }
    }

    fn linear_field(xgrid: &PhysicalGrid, vgrid: &VelocityGrid) -> DistributionField {
        let mut f = DistributionField::zeros(xgrid.len(), vgrid);
        let cube = vgrid.cube_len();
        for (i, &x) in xgrid.points().iter().enumerate() {
            for (q, v) in f.cube_mut(i).iter_mut().enumerate() {
                *v = 2.0 + 3.0 * x + 0.01 * (q % cube) as f64;
            }
        }
        f
    }

    #[test]
    fn timestep_examples() {
        assert_relative_eq!(timestep_from_cfl(1.0, 0.005, 10.0), 5e-4, max_relative = 1e-15);
        assert_eq!(timestep_from_cfl(2.0, 0.005, 10.0), 2.0 * timestep_from_cfl(1.0, 0.005, 10.0));
    }

    #[test]
    fn foot_point_examples() {
        assert_eq!(foot_point(0.3, 0.0, 1e-3), 0.3);
        assert_relative_eq!(foot_point(0.5, 10.0, 5e-4), 0.495, max_relative = 1e-15);
        assert!(foot_point(0.001, 10.0, 5e-4) < 0.0);
    }

    #[test]
    fn zero_dt_advection_is_bitwise_identity() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 20).unwrap();
        let vgrid = VelocityGrid::new(10.0, 4).unwrap();
        let f = linear_field(&xgrid, &vgrid);
        for method in [Reconstruction::Spline, Reconstruction::Mls] {
            let out = advect(&f, &xgrid, &vgrid, 0.0, method, &MlsConfig::default()).unwrap();
            assert_eq!(out.values(), f.values());
        }
    }

    #[test]
    fn constant_profile_unchanged() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 20).unwrap().jittered(3).unwrap();
        let vgrid = VelocityGrid::new(10.0, 4).unwrap();
        let f = DistributionField::from_values(vec![0.7; 21 * vgrid.cube_len()], 21, &vgrid).unwrap();
        for method in [Reconstruction::Spline, Reconstruction::Mls] {
            let out = advect(&f, &xgrid, &vgrid, 0.013, method, &MlsConfig::default()).unwrap();
            for v in out.values() {
                assert!((v - 0.7).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_profile_shifts_exactly() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 40).unwrap();
        let vgrid = VelocityGrid::new(10.0, 4).unwrap();
        let f = linear_field(&xgrid, &vgrid);
        let dt = 0.0037;
        let n = vgrid.len();
        for method in [Reconstruction::Spline, Reconstruction::Mls] {
            let out = advect(&f, &xgrid, &vgrid, dt, method, &MlsConfig::default()).unwrap();
            // Interior points whose foot points and stencils stay off the walls.
            for i in 8..33 {
                let x = xgrid.points()[i];
                for (j, &v) in vgrid.nodes().iter().enumerate() {
                    for q in 0..n * n {
                        let idx = j * n * n + q;
                        let expect = 2.0 + 3.0 * foot_point(x, v, dt) + 0.01 * idx as f64;
                        assert!((out.cube(i)[idx] - expect).abs() < 1e-12, "{method:?} i={i} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn relax_limits() {
        let tilde = vec![1.0, 2.0, 4.0];
        let m = vec![3.0, 2.0, 0.0];
        let mut mean = tilde.clone();
        relax(&mut mean, &m, 1e-3, 1e-3);
        assert_eq!(mean, vec![2.0, 2.0, 2.0]);
        let mut free = tilde.clone();
        relax(&mut free, &m, 1.0, 1e-12);
        for (a, b) in free.iter().zip(&tilde) {
            assert!((a - b).abs() < 1e-11);
        }
        let mut fluid = tilde.clone();
        relax(&mut fluid, &m, 1e-12, 1.0);
        for (a, b) in fluid.iter().zip(&m) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn relax_keeps_positivity() {
        let mut tilde = vec![0.0, 1e-9, 5.0];
        relax(&mut tilde, &[1.0, 0.0, 2.0], 0.3, 0.7);
        assert!(tilde.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn continuous_target_reproduces_sampled_maxwellian() {
        let vgrid = VelocityGrid::new(10.0, 20).unwrap();
        let state = MacroState::new(1e-4, [0.4, -0.1, 0.0], T_LEFT, R);
        let mut cube = vec![0.0; vgrid.cube_len()];
        fill_maxwellian(&state, &vgrid, R, &mut cube);
        let mut out = vec![0.0; vgrid.cube_len()];
        let report = build_target_maxwellian(&cube, &vgrid, MaxwellianMode::Continuous, R, &mut out).unwrap();
        let sampled = compute_moments(&cube, &vgrid).unwrap();
        let recovered = macro_from_moments(&sampled, R).unwrap();
        assert_eq!(report.state, recovered);
        assert!((report.state.rho - 1e-4).abs() / 1e-4 < 1e-3);
        assert!((report.state.temperature - T_LEFT).abs() / T_LEFT < 1e-2);
    }

    #[test]
    fn discrete_target_matches_moments() {
        let vgrid = VelocityGrid::new(10.0, 13).unwrap();
        let state = MacroState::new(1.0, [0.7, 0.0, 0.0], 0.0065, R);
        let mut tilde = vec![0.0; vgrid.cube_len()];
        fill_maxwellian(&state, &vgrid, R, &mut tilde);
        // Perturb so the cube is not itself a Maxwellian.
        for (q, v) in tilde.iter_mut().enumerate() {
            *v *= 1.0 + 0.05 * ((q % 7) as f64 / 7.0 - 0.5);
        }
        let mut out = vec![0.0; vgrid.cube_len()];
        let report = build_target_maxwellian(&tilde, &vgrid, MaxwellianMode::Discrete, R, &mut out).unwrap();
        assert!(report.dmax_iterations.is_some());
        assert!(!report.fallback);
        let a = compute_moments(&tilde, &vgrid).unwrap();
        let b = compute_moments(&out, &vgrid).unwrap();
        assert!(a.scaled_mismatch(&b) <= 1e-10);
    }

    #[test]
    fn resting_target_is_even() {
        let vgrid = VelocityGrid::new(10.0, 8).unwrap();
        let state = MacroState::new(2e-5, [0.0; 3], 0.007, R);
        let mut tilde = vec![0.0; vgrid.cube_len()];
        fill_maxwellian(&state, &vgrid, R, &mut tilde);
        let n = vgrid.len();
        for mode in [MaxwellianMode::Continuous, MaxwellianMode::Discrete] {
            let mut out = vec![0.0; vgrid.cube_len()];
            build_target_maxwellian(&tilde, &vgrid, mode, R, &mut out).unwrap();
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let a = out[(j * n + k) * n + l];
                        let b = out[((n - 1 - j) * n + (n - 1 - k)) * n + (n - 1 - l)];
                        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{mode:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn negative_energy_rejected() {
        let vgrid = VelocityGrid::new(10.0, 4).unwrap();
        let tilde = vec![-1.0; vgrid.cube_len()];
        let mut out = vec![0.0; vgrid.cube_len()];
        assert!(build_target_maxwellian(&tilde, &vgrid, MaxwellianMode::Continuous, R, &mut out).is_err());
    }

    fn half_maxwellian(wall: &WallSpec, rho: f64, vgrid: &VelocityGrid) -> Vec<f64> {
        let v = vgrid.nodes();
        let n = v.len();
        let mut cube = vec![0.0; vgrid.cube_len()];
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let vel = [v[j], v[k], v[l]];
                    if wall.normal_speed(vel) < 0.0 {
                        cube[(j * n + k) * n + l] = rho * wall.unit_maxwellian(vel, R);
                    }
                }
            }
        }
        cube
    }

    #[test]
    fn wall_density_recovers_equilibrium() {
        // Fine velocity grid: quadrature error is small.
        let vgrid = VelocityGrid::new(10.0, 60).unwrap();
        for side in [WallSide::Left, WallSide::Right] {
            let wall = WallSpec::at_rest(side, T_LEFT);
            let cube = half_maxwellian(&wall, 3e-5, &vgrid);
            let rho_w = wall_density(&cube, &wall, &vgrid, R).unwrap();
            assert!((rho_w - 3e-5).abs() / 3e-5 < 1e-6, "{side:?}: {rho_w}");
        }
    }

    #[test]
    fn wall_density_linear_and_zero() {
        let vgrid = VelocityGrid::new(10.0, 10).unwrap();
        let wall = WallSpec::at_rest(WallSide::Left, T_LEFT);
        let cube = half_maxwellian(&wall, 1e-4, &vgrid);
        let one = wall_density(&cube, &wall, &vgrid, R).unwrap();
        let doubled: Vec<f64> = cube.iter().map(|v| 2.0 * v).collect();
        assert_relative_eq!(wall_density(&doubled, &wall, &vgrid, R).unwrap(), 2.0 * one, max_relative = 1e-14);
        assert_eq!(wall_density(&vec![0.0; vgrid.cube_len()], &wall, &vgrid, R).unwrap(), 0.0);
        assert!(one > 0.0);
    }

    #[test]
    fn boundary_preserves_global_equilibrium() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 40).unwrap();
        let vgrid = VelocityGrid::new(10.0, 20).unwrap();
        let state = MacroState::new(1e-4, [0.0; 3], T_LEFT, R);
        let mut f = init_maxwellian_field(&vec![state; 41], &xgrid, &vgrid, R).unwrap();
        let before = f.clone();
        let walls = [WallSpec::at_rest(WallSide::Left, T_LEFT), WallSpec::at_rest(WallSide::Right, T_LEFT)];
        let rho_w = apply_diffuse_boundary(&mut f, &xgrid, &walls, &vgrid, R, &MlsConfig::default()).unwrap();
        for i in [0, 40] {
            let max = before.cube(i).iter().fold(0.0f64, |m, v| m.max(*v));
            for (a, b) in f.cube(i).iter().zip(before.cube(i)) {
                assert!((a - b).abs() <= 1e-3 * max);
            }
        }
        for r in rho_w {
            assert!((r - 1e-4).abs() / 1e-4 < 1e-3);
        }
    }

    #[test]
    fn emitted_half_is_even_in_tangential_velocity() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 20).unwrap();
        let vgrid = VelocityGrid::new(10.0, 8).unwrap();
        let states: Vec<MacroState> = (0..21)
            .map(|i| MacroState::new(1e-4 * (1.0 + 0.02 * i as f64), [0.3, 0.0, 0.0], T_LEFT, R))
            .collect();
        let mut f = init_maxwellian_field(&states, &xgrid, &vgrid, R).unwrap();
        let walls = [WallSpec::at_rest(WallSide::Left, T_LEFT), WallSpec::at_rest(WallSide::Right, 0.006)];
        apply_diffuse_boundary(&mut f, &xgrid, &walls, &vgrid, R, &MlsConfig::default()).unwrap();
        let n = vgrid.len();
        for i in [0, 20] {
            let cube = f.cube(i);
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let a = cube[(j * n + k) * n + l];
                        let b = cube[(j * n + (n - 1 - k)) * n + (n - 1 - l)];
                        assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
                    }
                }
            }
        }
    }

    #[test]
    fn no_arrivals_means_no_emission() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 20).unwrap();
        let vgrid = VelocityGrid::new(10.0, 6).unwrap();
        let mut f = DistributionField::zeros(21, &vgrid);
        let walls = [WallSpec::at_rest(WallSide::Left, T_LEFT), WallSpec::at_rest(WallSide::Right, T_LEFT)];
        let rho_w = apply_diffuse_boundary(&mut f, &xgrid, &walls, &vgrid, R, &MlsConfig::default()).unwrap();
        assert_eq!(rho_w, [0.0, 0.0]);
        assert!(f.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_equilibrium_is_a_fixed_point() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 50).unwrap();
        let vgrid = VelocityGrid::new(10.0, 20).unwrap();
        for method in [Reconstruction::Spline, Reconstruction::Mls] {
            let mut solver = Solver::new(xgrid.clone(), vgrid.clone(), config(method, MaxwellianMode::Continuous)).unwrap();
            let state = MacroState::new(1e-4, [0.0; 3], T_LEFT, R);
            let tau = vec![solver.local_tau(&state); 51];
            let mut st = solver.initial_state(&vec![state; 51], tau).unwrap();
            let start = st.macro_states.clone();
            solver.step(&mut st).unwrap();
            for (a, b) in st.macro_states.iter().zip(&start) {
                assert!((a.rho - b.rho).abs() / b.rho < 1e-8, "{method:?}");
                assert!((a.temperature - b.temperature).abs() / b.temperature < 1e-8);
                assert!(a.velocity[0].abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sod_step_conserves_interior_mass() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 200).unwrap();
        let vgrid = VelocityGrid::new(10.0, 20).unwrap();
        let mut solver = Solver::new(xgrid.clone(), vgrid, config(Reconstruction::Mls, MaxwellianMode::Continuous)).unwrap();
        let left = MacroState::new(1e-4, [0.0; 3], T_LEFT, R);
        let right = MacroState::new(1.25e-5, [0.0; 3], 2.0 * 2.0 / (3.0 * R), R);
        let states: Vec<MacroState> = xgrid.points().iter().map(|&x| if x < 0.5 { left } else { right }).collect();
        let tau: Vec<f64> = states.iter().map(|s| solver.local_tau(s)).collect();
        let mut st = solver.initial_state(&states, tau).unwrap();
        let w = xgrid.cell_widths();
        let mass = |st: &StepState| -> f64 { st.macro_states[20..181].iter().zip(&w[20..181]).map(|(s, w)| s.rho * w).sum() };
        let before = mass(&st);
        solver.step(&mut st).unwrap();
        let drift = (mass(&st) - before).abs() / before;
        assert!(drift < 1e-8, "drift {drift:e}");
    }

    #[test]
    fn final_step_is_clipped() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 20).unwrap();
        let vgrid = VelocityGrid::new(10.0, 4).unwrap();
        let mut cfg = config(Reconstruction::Spline, MaxwellianMode::Continuous);
        cfg.t_final = 0.012;
        cfg.cfl = 1.0;
        let mut solver = Solver::new(xgrid, vgrid, cfg).unwrap();
        let state = MacroState::new(1e-4, [0.0; 3], T_LEFT, R);
        let mut st = solver.initial_state(&vec![state; 21], vec![1e-3; 21]).unwrap();
        let mut dts = Vec::new();
        solver.run(&mut st, |d| dts.push(d.dt)).unwrap();
        assert_eq!(st.t, 0.012);
        assert_eq!(dts.len(), 3);
        assert!((dts[2] - 0.002).abs() < 1e-12);
        assert!(solver.step(&mut st).is_err());
    }

    #[test]
    fn variable_tau_tracks_density() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 20).unwrap();
        let vgrid = VelocityGrid::new(10.0, 8).unwrap();
        let mut cfg = config(Reconstruction::Mls, MaxwellianMode::Continuous);
        cfg.tau_mode = TauMode::Variable;
        let mut solver = Solver::new(xgrid, vgrid, cfg).unwrap();
        let state = MacroState::new(1e-4, [0.0; 3], T_LEFT, R);
        let mut st = solver.initial_state(&vec![state; 21], vec![1.0; 21]).unwrap();
        solver.step(&mut st).unwrap();
        for (t, s) in st.tau.iter().zip(&st.macro_states) {
            assert_relative_eq!(*t, relaxation_time(1e-7 / s.rho, s.temperature, R), max_relative = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_tau() {
        let xgrid = PhysicalGrid::regular(0.0, 1.0, 10).unwrap();
        let vgrid = VelocityGrid::new(10.0, 4).unwrap();
        let solver = Solver::new(xgrid, vgrid, config(Reconstruction::Mls, MaxwellianMode::Continuous)).unwrap();
        let state = MacroState::new(1e-4, [0.0; 3], T_LEFT, R);
        assert!(solver.initial_state(&vec![state; 11], vec![0.0; 11]).is_err());
        assert!(solver.initial_state(&vec![state; 11], vec![1.0; 10]).is_err());
    }
}
