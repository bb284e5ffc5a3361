//! Gas constants and the collision-time closure.

use std::f64::consts::PI;

/// Specific gas constant of argon, J kg^-1 K^-1.
pub const ARGON_GAS_CONSTANT: f64 = 208.0;
/// Hard-sphere diameter of argon, m.
pub const ARGON_DIAMETER: f64 = 0.368e-9;
/// Boltzmann constant, J K^-1.
pub const BOLTZMANN: f64 = 1.3806e-23;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasConstants {
    /// Specific gas constant R.
    pub gas_constant: f64,
    /// Molecular diameter d.
    pub diameter: f64,
    /// Boltzmann constant k_B.
    pub boltzmann: f64,
}

impl GasConstants {
    pub fn argon() -> Self {
        Self {
            gas_constant: ARGON_GAS_CONSTANT,
            diameter: ARGON_DIAMETER,
            boltzmann: BOLTZMANN,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.gas_constant, self.diameter, self.boltzmann]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
    }

    /// Hard-sphere mean free path `k_B / (sqrt(2) pi rho R d^2)`.
    pub fn mean_free_path(&self, rho: f64) -> f64 {
        debug_assert!(rho > 0.0);
        self.boltzmann
            / (std::f64::consts::SQRT_2 * PI * rho * self.gas_constant * self.diameter * self.diameter)
    }
}

impl Default for GasConstants {
    fn default() -> Self {
        Self::argon()
    }
}

/// Mean thermal speed `sqrt(8 R T / pi)`.
pub fn mean_thermal_speed(temperature: f64, gas_constant: f64) -> f64 {
    (8.0 * gas_constant * temperature / PI).sqrt()
}

/// Relaxation time `4 lambda / (pi C)` with `C` the mean thermal speed.
pub fn relaxation_time(lambda: f64, temperature: f64, gas_constant: f64) -> f64 {
    debug_assert!(lambda > 0.0 && temperature > 0.0);
    4.0 * lambda / (PI * mean_thermal_speed(temperature, gas_constant))
}
