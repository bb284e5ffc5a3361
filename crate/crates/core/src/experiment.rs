//! Sod shock-tube experiments: running configurations, writing profiles and
//! diagnostics, and comparing profiles.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::riemann::{EulerState, RiemannSolution, Wave, MONATOMIC_GAMMA};
use crate::solver::{Solver, StepDiagnostics, StepState};

/// Macroscopic profile on the spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub ux: Vec<f64>,
    pub temperature: Vec<f64>,
    pub pressure: Vec<f64>,
}

impl Profile {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn field(&self, field: Field) -> &[f64] {
        match field {
            Field::Rho => &self.rho,
            Field::Ux => &self.ux,
            Field::Temperature => &self.temperature,
            Field::Pressure => &self.pressure,
        }
    }

    fn from_state(state: &StepState, x: &[f64]) -> Self {
        let m = &state.macro_states;
        Self {
            x: x.to_vec(),
            rho: m.iter().map(|s| s.rho).collect(),
            ux: m.iter().map(|s| s.velocity[0]).collect(),
            temperature: m.iter().map(|s| s.temperature).collect(),
            pressure: m.iter().map(|s| s.pressure).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,rho,ux,T,p\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e}",
                self.x[i], self.rho[i], self.ux[i], self.temperature[i], self.pressure[i]
            );
        }
        out
    }

    /// Parses the CSV written by [`Profile::to_csv`]. Lines starting with `#` are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty profile file".into()))?;
        if header.trim() != "x,rho,ux,T,p" {
            return Err(Error::InvalidArgument(format!("unexpected profile header `{header}`")));
        }
        let mut p = Profile {
            x: Vec::new(),
            rho: Vec::new(),
            ux: Vec::new(),
            temperature: Vec::new(),
            pressure: Vec::new(),
        };
        for (n, line) in lines.enumerate() {
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("profile row {}: {e}", n + 1)))?;
            if cols.len() != 5 {
                return Err(Error::InvalidArgument(format!(
                    "profile row {} has {} columns, expected 5",
                    n + 1,
                    cols.len()
                )));
            }
            p.x.push(cols[0]);
            p.rho.push(cols[1]);
            p.ux.push(cols[2]);
            p.temperature.push(cols[3]);
            p.pressure.push(cols[4]);
        }
        Ok(p)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Rho,
    Ux,
    Temperature,
    Pressure,
}

impl Field {
    pub const ALL: [Field; 4] = [Field::Rho, Field::Ux, Field::Temperature, Field::Pressure];

    pub fn name(&self) -> &'static str {
        match self {
            Field::Rho => "rho",
            Field::Ux => "ux",
            Field::Temperature => "T",
            Field::Pressure => "p",
        }
    }
}

/// Kinetic solver together with its evolving state.
pub struct Simulation {
    config: RunConfig,
    solver: Solver,
    state: StepState,
    diagnostics: Vec<StepDiagnostics>,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let xgrid = config.physical_grid()?;
        let vgrid = config.velocity_grid()?;
        let states = config.initial_states(&xgrid);
        let tau = config.initial_tau(&xgrid);
        let solver = Solver::new(xgrid, vgrid, config.solver_config())?;
        let state = solver.initial_state(&states, tau)?;
        Ok(Self {
            config: config.clone(),
            solver,
            state,
            diagnostics: Vec::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    pub fn state(&self) -> &StepState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn is_finished(&self) -> bool {
        self.solver.is_finished(&self.state)
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    pub fn step(&mut self) -> Result<&StepDiagnostics> {
        let diag = self.solver.step(&mut self.state)?;
        self.diagnostics.push(diag);
        Ok(self.diagnostics.last().expect("just pushed"))
    }

    /// Steps to the final time.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }

    pub fn profile(&self) -> Profile {
        Profile::from_state(&self.state, self.solver.xgrid().points())
    }

    /// Exact Euler solution for this configuration at the current time.
    pub fn euler_reference(&self) -> Result<Profile> {
        euler_reference(&self.config, self.solver.xgrid().points(), self.state.t)
    }
}

/// Outcome of one run.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: RunConfig,
    pub profile: Profile,
    pub reference: Option<Profile>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub wall_clock: Duration,
}

/// Runs one configuration to its final time.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    let mut sim = Simulation::new(cfg)?;
    sim.run()?;
    let wall_clock = start.elapsed();
    let reference = if cfg.emit_reference {
        Some(sim.euler_reference()?)
    } else {
        None
    };
    Ok(ExperimentResult {
        config: cfg.clone(),
        profile: sim.profile(),
        reference,
        diagnostics: sim.diagnostics,
        wall_clock,
    })
}

pub fn diagnostics_csv(diagnostics: &[StepDiagnostics]) -> String {
    let mut out = String::from(
        "step,t,dt,mass,min_f,max_f,max_moment_mismatch,dmax_iterations_mean,dmax_iterations_max,dmax_fallbacks,rho_wall_left,rho_wall_right\n",
    );
    for d in diagnostics {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e},{:e},{},{},{},{:e},{:e}",
            d.step,
            d.t,
            d.dt,
            d.mass,
            d.min_f,
            d.max_f,
            d.max_moment_mismatch,
            d.dmax_iterations_mean,
            d.dmax_iterations_max,
            d.dmax_fallbacks,
            d.wall_densities[0],
            d.wall_densities[1]
        );
    }
    out
}

/// Files written for one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub profile: PathBuf,
    pub diagnostics: PathBuf,
    pub reference: Option<PathBuf>,
    pub wall_clock: Duration,
}

/// Runs one configuration and writes `<stem>.csv`, `<stem>.diag.csv` and,
/// when requested, `<stem>.euler.csv` into `cfg.output_dir`.
///
/// If the solver aborts, the profile at the last completed step and the
/// diagnostics so far are written with a trailing `# FAILED` line.
pub fn run_and_write(cfg: &RunConfig) -> Result<RunOutput> {
    fs::create_dir_all(&cfg.output_dir)?;
    let stem = cfg.file_stem();
    let profile_path = cfg.output_dir.join(format!("{stem}.csv"));
    let diag_path = cfg.output_dir.join(format!("{stem}.diag.csv"));
    info!("running {stem}");
    let start = Instant::now();
    let mut sim = Simulation::new(cfg)?;
    let outcome = sim.run();
    let wall_clock = start.elapsed();
    let mut profile = sim.profile().to_csv();
    let mut diag = diagnostics_csv(sim.diagnostics());
    let _ = writeln!(diag, "# wall_clock_s,{}", wall_clock.as_secs_f64());
    if let Err(e) = &outcome {
        let marker = format!("# FAILED at t = {}: {e}\n", sim.time());
        profile.push_str(&marker);
        diag.push_str(&marker);
    }
    fs::write(&profile_path, profile)?;
    fs::write(&diag_path, diag)?;
    outcome?;
    let reference = if cfg.emit_reference {
        let path = cfg.output_dir.join(format!("{stem}.euler.csv"));
        fs::write(&path, sim.euler_reference()?.to_csv())?;
        Some(path)
    } else {
        None
    };
    info!("{stem} finished in {:.2} s", wall_clock.as_secs_f64());
    Ok(RunOutput {
        profile: profile_path,
        diagnostics: diag_path,
        reference,
        wall_clock,
    })
}

/// Left and right Euler states of a configuration, with `p = (gamma - 1) rho e`.
pub fn euler_states(cfg: &RunConfig) -> (EulerState, EulerState) {
    (
        EulerState::from_internal_energy(cfg.rho_left, 0.0, cfg.e_left, MONATOMIC_GAMMA),
        EulerState::from_internal_energy(cfg.rho_right, 0.0, cfg.e_right, MONATOMIC_GAMMA),
    )
}

/// Exact Euler profile at time `t` on the points `x`.
pub fn euler_reference(cfg: &RunConfig, x: &[f64], t: f64) -> Result<Profile> {
    let (l, r) = euler_states(cfg);
    let states = crate::riemann::sample_solution(&l, &r, MONATOMIC_GAMMA, cfg.diaphragm, t, x)?;
    let gas_constant = cfg.gas.gas_constant;
    Ok(Profile {
        x: x.to_vec(),
        rho: states.iter().map(|s| s.rho).collect(),
        ux: states.iter().map(|s| s.u).collect(),
        temperature: states.iter().map(|s| s.p / (s.rho * gas_constant)).collect(),
        pressure: states.iter().map(|s| s.p).collect(),
    })
}

/// Exact shock position and post-shock density at time `t`.
pub fn exact_shock(cfg: &RunConfig, t: f64) -> Result<(f64, f64)> {
    let (l, r) = euler_states(cfg);
    let sol = RiemannSolution::new(l, r, MONATOMIC_GAMMA)?;
    match sol.right_wave() {
        Wave::Shock { speed } => Ok((cfg.diaphragm + speed * t, sol.star_right().rho)),
        Wave::Rarefaction { .. } => Err(Error::InvalidArgument("right wave is not a shock".into())),
    }
}

/// Position where the density first falls through the midpoint of
/// `post_shock` and `ahead`, searching from the right end.
pub fn shock_location(profile: &Profile, post_shock: f64, ahead: f64) -> Option<f64> {
    let level = 0.5 * (post_shock + ahead);
    let rho = &profile.rho;
    (1..rho.len()).rev().find_map(|i| {
        let (a, b) = (rho[i - 1], rho[i]);
        if (a - level) * (b - level) <= 0.0 && a != b {
            let s = (level - a) / (b - a);
            Some(profile.x[i - 1] + s * (profile.x[i] - profile.x[i - 1]))
        } else {
            None
        }
    })
}

/// L1 and L-infinity norms of one field's difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norm {
    pub l1: f64,
    pub linf: f64,
    /// Range `max - min` of the reference field.
    pub jump: f64,
}

impl Norm {
    pub fn l1_relative(&self) -> f64 {
        self.l1 / self.jump
    }

    pub fn linf_relative(&self) -> f64 {
        self.linf / self.jump
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldNorms {
    pub rho: Norm,
    pub ux: Norm,
    pub temperature: Norm,
    pub pressure: Norm,
}

impl FieldNorms {
    pub fn get(&self, field: Field) -> Norm {
        match field {
            Field::Rho => self.rho,
            Field::Ux => self.ux,
            Field::Temperature => self.temperature,
            Field::Pressure => self.pressure,
        }
    }
}

/// Dual-cell widths of sorted points.
pub fn dual_widths(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = if i == 0 { x[0] } else { 0.5 * (x[i - 1] + x[i]) };
            let hi = if i + 1 == n { x[n - 1] } else { 0.5 * (x[i] + x[i + 1]) };
            hi - lo
        })
        .collect()
}

/// Per-field `L1 = sum |a - b| dx_i` and `Linf = max |a - b|`.
///
/// Both profiles must share their x coordinates.
pub fn error_norms(a: &Profile, b: &Profile) -> Result<FieldNorms> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: a.len(),
        });
    }
    for (i, (xa, xb)) in a.x.iter().zip(&b.x).enumerate() {
        if (xa - xb).abs() > 1e-12 * (1.0 + xb.abs()) {
            return Err(Error::InvalidArgument(format!(
                "coordinate mismatch at row {i}: {xa} vs {xb}"
            )));
        }
    }
    let w = dual_widths(&b.x);
    let norm = |f: Field| {
        let (fa, fb) = (a.field(f), b.field(f));
        let mut l1 = 0.0;
        let mut linf: f64 = 0.0;
        for i in 0..fa.len() {
            let d = (fa[i] - fb[i]).abs();
            l1 += d * w[i];
            linf = linf.max(d);
        }
        let (lo, hi) = fb.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Norm {
            l1,
            linf,
            jump: hi - lo,
        }
    };
    Ok(FieldNorms {
        rho: norm(Field::Rho),
        ux: norm(Field::Ux),
        temperature: norm(Field::Temperature),
        pressure: norm(Field::Pressure),
    })
}

/// `sum |a - b| dx / sum |b| dx` for one field.
pub fn relative_l1(a: &Profile, b: &Profile, field: Field) -> Result<f64> {
    let norms = error_norms(a, b)?;
    let w = dual_widths(&b.x);
    let size: f64 = b.field(field).iter().zip(&w).map(|(v, w)| v.abs() * w).sum();
    Ok(norms.get(field).l1 / size)
}
