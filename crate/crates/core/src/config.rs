//! Run configuration: flat TOML keys, the Sod presets and their variants.
//!
//! Resolution order per field is variant, then the explicit file value, then
//! the preset value, then the built-in default.

use std::path::PathBuf;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gas::{relaxation_time, GasConstants};
use crate::grid::{PhysicalGrid, VelocityGrid};
use crate::interp::MlsConfig;
use crate::moments::MacroState;
use crate::solver::{MaxwellianMode, Reconstruction, SolverConfig, TauMode, WallSide, WallSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Regular,
    Jittered,
}

/// Raw key set of a configuration file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<u8>,
    pub cfl: Option<f64>,
    pub t_final: Option<f64>,
    pub n_x: Option<usize>,
    pub n_v: Option<usize>,
    pub v_max: Option<f64>,
    pub tau_mode: Option<TauMode>,
    pub reconstruction: Option<Reconstruction>,
    pub maxwellian: Option<MaxwellianMode>,
    pub mls_alpha: Option<f64>,
    pub mls_radius_factor: Option<f64>,
    pub upwind: Option<bool>,
    pub seed: Option<u64>,
    pub grid: Option<GridKind>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub diaphragm: Option<f64>,
    pub rho_left: Option<f64>,
    pub rho_right: Option<f64>,
    pub e_left: Option<f64>,
    pub e_right: Option<f64>,
    pub lambda_left: Option<f64>,
    pub lambda_right: Option<f64>,
    pub tau_left: Option<f64>,
    pub tau_right: Option<f64>,
    pub gas_constant: Option<f64>,
    pub diameter: Option<f64>,
    pub boltzmann: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub emit_reference: Option<bool>,
}

macro_rules! overlay_fields {
    ($hi:expr, $lo:expr; $($f:ident),*) => {
        ConfigFile { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl ConfigFile {
    /// Parses TOML text. Errors name the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .and_then(|span| offending_key(text, span.start))
                .unwrap_or_else(|| "<file>".to_string());
            Error::config(key, e.message().to_string())
        })
    }

    /// Field-wise `self` where set, `lower` otherwise.
    pub fn overlay(&self, lower: &ConfigFile) -> ConfigFile {
        let hi = self.clone();
        let lo = lower.clone();
        overlay_fields!(hi, lo; preset, cfl, t_final, n_x, n_v, v_max, tau_mode, reconstruction, maxwellian,
            mls_alpha, mls_radius_factor, upwind, seed, grid, x_min, x_max, diaphragm, rho_left, rho_right,
            e_left, e_right, lambda_left, lambda_right, tau_left, tau_right, gas_constant, diameter, boltzmann,
            output_dir, emit_reference)
    }
}

/// Key on the line containing byte offset `pos`.
fn offending_key(text: &str, pos: usize) -> Option<String> {
    let start = text[..pos.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next()?;
    let key = line.split('=').next()?.trim();
    (!key.is_empty()).then(|| key.to_string())
}

/// One run of a preset, with the keys it forces.
#[derive(Debug, Clone)]
pub struct Variant {
    /// Suffix added to file names when the standard name would collide.
    pub label: Option<String>,
    pub overrides: ConfigFile,
}

pub const PRESETS: std::ops::RangeInclusive<u8> = 1..=7;

fn sod(rho_left: f64, lambda_left: f64, lambda_right: f64, n_x: usize) -> ConfigFile {
    ConfigFile {
        rho_left: Some(rho_left),
        rho_right: Some(rho_left / 8.0),
        lambda_left: Some(lambda_left),
        lambda_right: Some(lambda_right),
        n_x: Some(n_x),
        ..Default::default()
    }
}

/// Base keys of a preset.
pub fn preset_base(preset: u8) -> Result<ConfigFile> {
    let base = match preset {
        1 => sod(1e-4, 1e-3, 8e-3, 200),
        2..=4 => sod(5e-6, 0.02, 0.17, 200),
        5 => sod(1e-5, 0.01, 0.08, 400),
        6 | 7 => ConfigFile {
            emit_reference: Some(preset == 6),
            ..sod(1.0, 1e-7, 8e-7, 800)
        },
        _ => return Err(Error::config("preset", format!("unknown preset {preset}, expected 1 to 7"))),
    };
    Ok(ConfigFile {
        preset: Some(preset),
        ..base
    })
}

fn variant(label: Option<String>, overrides: ConfigFile) -> Variant {
    Variant { label, overrides }
}

fn recon_variants(base: &ConfigFile, label: Option<String>) -> Vec<Variant> {
    [Reconstruction::Mls, Reconstruction::Spline]
        .into_iter()
        .map(|r| {
            variant(
                label.clone(),
                ConfigFile {
                    reconstruction: Some(r),
                    ..base.clone()
                },
            )
        })
        .collect()
}

/// Runs a preset expands into.
pub fn preset_variants(preset: u8) -> Result<Vec<Variant>> {
    Ok(match preset {
        1 => [1.0, 2.0]
            .into_iter()
            .map(|cfl| {
                variant(
                    Some(format!("cfl{cfl}")),
                    ConfigFile {
                        cfl: Some(cfl),
                        ..Default::default()
                    },
                )
            })
            .collect(),
        2 => {
            let mut runs = Vec::new();
            for (rho, ll, lr) in [(5e-6, 0.02, 0.17), (1e-4, 1e-3, 8e-3), (1.0, 1e-7, 8e-7)] {
                for (mode, name) in [(TauMode::Constant, "constant"), (TauMode::Variable, "variable")] {
                    runs.push(variant(
                        Some(format!("lambda{ll:e}_{name}")),
                        ConfigFile {
                            tau_mode: Some(mode),
                            ..sod(rho, ll, lr, 200)
                        },
                    ));
                }
            }
            runs
        }
        3 => [(GridKind::Regular, "regular"), (GridKind::Jittered, "jittered")]
            .into_iter()
            .map(|(g, name)| {
                variant(
                    Some(name.to_string()),
                    ConfigFile {
                        grid: Some(g),
                        ..Default::default()
                    },
                )
            })
            .collect(),
        4 | 6 => recon_variants(&ConfigFile::default(), None),
        5 => {
            let mut runs = recon_variants(&sod(1e-5, 0.01, 0.08, 400), Some("lambda1e-2".into()));
            runs.extend(recon_variants(&sod(1e-4, 1e-3, 8e-3, 800), Some("lambda1e-3".into())));
            runs
        }
        7 => [
            (MaxwellianMode::Continuous, 20),
            (MaxwellianMode::Continuous, 13),
            (MaxwellianMode::Discrete, 13),
        ]
        .into_iter()
        .map(|(m, n)| {
            variant(
                None,
                ConfigFile {
                    maxwellian: Some(m),
                    n_v: Some(n),
                    ..Default::default()
                },
            )
        })
        .collect(),
        _ => return Err(Error::config("preset", format!("unknown preset {preset}, expected 1 to 7"))),
    })
}

/// Fully resolved configuration of one run (or of a preset's base run).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<u8>,
    pub variant: Option<String>,
    pub cfl: f64,
    pub t_final: f64,
    pub n_x: usize,
    pub n_v: usize,
    pub v_max: f64,
    pub tau_mode: TauMode,
    pub reconstruction: Reconstruction,
    pub maxwellian: MaxwellianMode,
    pub mls: MlsConfig,
    pub seed: u64,
    pub grid: GridKind,
    pub x_min: f64,
    pub x_max: f64,
    pub diaphragm: f64,
    pub rho_left: f64,
    pub rho_right: f64,
    pub e_left: f64,
    pub e_right: f64,
    pub lambda_left: f64,
    pub lambda_right: f64,
    pub tau_left: Option<f64>,
    pub tau_right: Option<f64>,
    pub gas: GasConstants,
    pub output_dir: PathBuf,
    pub emit_reference: bool,
    explicit: ConfigFile,
}

/// Parses and resolves configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    RunConfig::resolve(ConfigFile::parse(text)?)
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::resolve(ConfigFile::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    /// Resolves explicit keys against the preset and the defaults.
    pub fn resolve(explicit: ConfigFile) -> Result<Self> {
        let layered = match explicit.preset {
            Some(p) => explicit.overlay(&preset_base(p)?),
            None => explicit.clone(),
        };
        let mut cfg = Self::from_layers(&layered, None)?;
        cfg.explicit = explicit;
        Ok(cfg)
    }

    fn from_layers(c: &ConfigFile, variant: Option<String>) -> Result<Self> {
        let gas = GasConstants {
            gas_constant: c.gas_constant.unwrap_or(crate::gas::ARGON_GAS_CONSTANT),
            diameter: c.diameter.unwrap_or(crate::gas::ARGON_DIAMETER),
            boltzmann: c.boltzmann.unwrap_or(crate::gas::BOLTZMANN),
        };
        positive("gas_constant", gas.gas_constant)?;
        positive("diameter", gas.diameter)?;
        positive("boltzmann", gas.boltzmann)?;
        let rho_left = positive("rho_left", c.rho_left.unwrap_or(1e-4))?;
        let rho_right = positive("rho_right", c.rho_right.unwrap_or(rho_left / 8.0))?;
        let lambda_left = positive("lambda_left", c.lambda_left.unwrap_or_else(|| gas.mean_free_path(rho_left)))?;
        let lambda_right = positive(
            "lambda_right",
            c.lambda_right.unwrap_or(lambda_left * rho_left / rho_right),
        )?;
        let cfg = Self {
            preset: c.preset,
            variant,
            cfl: positive("cfl", c.cfl.unwrap_or(1.0))?,
            t_final: positive("t_final", c.t_final.unwrap_or(0.17))?,
            n_x: at_least("n_x", c.n_x.unwrap_or(200), 2)?,
            n_v: at_least("n_v", c.n_v.unwrap_or(20), 2)?,
            v_max: positive("v_max", c.v_max.unwrap_or(10.0))?,
            tau_mode: c.tau_mode.unwrap_or(TauMode::Constant),
            reconstruction: c.reconstruction.unwrap_or(Reconstruction::Mls),
            maxwellian: c.maxwellian.unwrap_or(MaxwellianMode::Continuous),
            mls: MlsConfig {
                alpha: positive("mls_alpha", c.mls_alpha.unwrap_or(6.0))?,
                radius_factor: c.mls_radius_factor.unwrap_or(2.5),
                upwind: c.upwind.unwrap_or(false),
            },
            seed: c.seed.unwrap_or(1),
            grid: c.grid.unwrap_or(GridKind::Regular),
            x_min: c.x_min.unwrap_or(0.0),
            x_max: c.x_max.unwrap_or(1.0),
            diaphragm: c.diaphragm.unwrap_or(0.5),
            rho_left,
            rho_right,
            e_left: positive("e_left", c.e_left.unwrap_or(2.5))?,
            e_right: positive("e_right", c.e_right.unwrap_or(2.0))?,
            lambda_left,
            lambda_right,
            tau_left: c.tau_left.map(|t| positive("tau_left", t)).transpose()?,
            tau_right: c.tau_right.map(|t| positive("tau_right", t)).transpose()?,
            gas,
            output_dir: c.output_dir.clone().unwrap_or_else(|| PathBuf::from("output")),
            emit_reference: c.emit_reference.unwrap_or(false),
            explicit: ConfigFile::default(),
        };
        if !(cfg.mls.radius_factor >= 1.0) {
            return Err(Error::config("mls_radius_factor", "must be at least 1 so every stencil has 2 points"));
        }
        if !(cfg.x_min < cfg.x_max) || !cfg.x_min.is_finite() || !cfg.x_max.is_finite() {
            return Err(Error::config("x_max", "domain must satisfy x_min < x_max"));
        }
        if !(cfg.diaphragm > cfg.x_min && cfg.diaphragm < cfg.x_max) {
            return Err(Error::config("diaphragm", "must lie strictly inside the domain"));
        }
        if let Some(p) = cfg.preset {
            if !PRESETS.contains(&p) {
                return Err(Error::config("preset", format!("unknown preset {p}, expected 1 to 7")));
            }
        }
        Ok(cfg)
    }

    /// Keys that were set explicitly, before presets and defaults.
    pub fn explicit(&self) -> &ConfigFile {
        &self.explicit
    }

    /// Individual runs: the preset's variants, or this configuration alone.
    ///
    /// Variant keys take precedence over explicit keys.
    pub fn runs(&self) -> Result<Vec<RunConfig>> {
        let Some(p) = self.preset else {
            return Ok(vec![self.clone()]);
        };
        let base = self.explicit.overlay(&preset_base(p)?);
        preset_variants(p)?
            .into_iter()
            .map(|v| {
                let mut cfg = Self::from_layers(&v.overrides.overlay(&base), v.label)?;
                cfg.explicit = self.explicit.clone();
                Ok(cfg)
            })
            .collect()
    }

    /// File name stem `<preset>_<reconstruction>_<maxwellian>_<Nv>[_<variant>]`.
    pub fn file_stem(&self) -> String {
        let preset = self.preset.map_or_else(|| "custom".to_string(), |p| p.to_string());
        let recon = match self.reconstruction {
            Reconstruction::Spline => "spline",
            Reconstruction::Mls => "mls",
        };
        let maxwell = match self.maxwellian {
            MaxwellianMode::Continuous => "continuous",
            MaxwellianMode::Discrete => "discrete",
        };
        let mut stem = format!("{preset}_{recon}_{maxwell}_{}", self.n_v);
        if let Some(v) = &self.variant {
            stem.push('_');
            stem.push_str(v);
        }
        stem
    }

    /// Temperature of internal energy `e`, from `e = 3/2 R T`.
    pub fn temperature_of(&self, e: f64) -> f64 {
        2.0 * e / (3.0 * self.gas.gas_constant)
    }

    pub fn left_state(&self) -> MacroState {
        MacroState::new(self.rho_left, [0.0; 3], self.temperature_of(self.e_left), self.gas.gas_constant)
    }

    pub fn right_state(&self) -> MacroState {
        MacroState::new(self.rho_right, [0.0; 3], self.temperature_of(self.e_right), self.gas.gas_constant)
    }

    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.v_max, self.n_v)
    }

    pub fn physical_grid(&self) -> Result<PhysicalGrid> {
        let grid = PhysicalGrid::regular(self.x_min, self.x_max, self.n_x)?;
        match self.grid {
            GridKind::Regular => Ok(grid),
            GridKind::Jittered => grid.jittered(self.seed),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            cfl: self.cfl,
            t_final: self.t_final,
            reconstruction: self.reconstruction,
            maxwellian: self.maxwellian,
            tau_mode: self.tau_mode,
            mls: self.mls,
            gas: self.gas,
            mean_free_path_density: self.lambda_left * self.rho_left,
            walls: [
                WallSpec::at_rest(WallSide::Left, self.temperature_of(self.e_left)),
                WallSpec::at_rest(WallSide::Right, self.temperature_of(self.e_right)),
            ],
        }
    }

    /// Sod initial states: left state strictly left of the diaphragm.
    pub fn initial_states(&self, grid: &PhysicalGrid) -> Vec<MacroState> {
        let (l, r) = (self.left_state(), self.right_state());
        grid.points().iter().map(|&x| if x < self.diaphragm { l } else { r }).collect()
    }

    /// Initial relaxation times; the left value applies up to and including the diaphragm.
    pub fn initial_tau(&self, grid: &PhysicalGrid) -> Vec<f64> {
        let r = self.gas.gas_constant;
        let tau_l = self
            .tau_left
            .unwrap_or_else(|| relaxation_time(self.lambda_left, self.temperature_of(self.e_left), r));
        let tau_r = self
            .tau_right
            .unwrap_or_else(|| relaxation_time(self.lambda_right, self.temperature_of(self.e_right), r));
        grid.points()
            .iter()
            .map(|&x| if x <= self.diaphragm { tau_l } else { tau_r })
            .collect()
    }
}

fn positive(key: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {value}")))
    }
}

fn at_least(key: &str, value: usize, min: usize) -> Result<usize> {
    if value >= min {
        Ok(value)
    } else {
        Err(Error::config(key, format!("must be at least {min}, got {value}")))
    }
}
