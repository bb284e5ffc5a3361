//! Exact Riemann solver for the one-dimensional Euler equations of an ideal gas.

use crate::error::{Error, Result};

/// Ratio of specific heats of a monatomic gas.
pub const MONATOMIC_GAMMA: f64 = 5.0 / 3.0;

const PRESSURE_TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

impl EulerState {
    pub fn new(rho: f64, u: f64, p: f64) -> Self {
        Self { rho, u, p }
    }

    /// State with pressure `(gamma - 1) rho e`.
    pub fn from_internal_energy(rho: f64, u: f64, e: f64, gamma: f64) -> Self {
        Self::new(rho, u, (gamma - 1.0) * rho * e)
    }

    pub fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.p / self.rho).sqrt()
    }

    fn is_valid(&self) -> bool {
        self.rho > 0.0 && self.p > 0.0 && self.u.is_finite()
    }

    /// Mass, momentum and energy fluxes.
    pub fn flux(&self, gamma: f64) -> [f64; 3] {
        let energy = self.p / (gamma - 1.0) + 0.5 * self.rho * self.u * self.u;
        [
            self.rho * self.u,
            self.rho * self.u * self.u + self.p,
            self.u * (energy + self.p),
        ]
    }

    /// Conserved variables `(rho, rho u, E)`.
    pub fn conserved(&self, gamma: f64) -> [f64; 3] {
        [
            self.rho,
            self.rho * self.u,
            self.p / (gamma - 1.0) + 0.5 * self.rho * self.u * self.u,
        ]
    }
}

/// Pressure and velocity of the star region between the two nonlinear waves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarRegion {
    pub p: f64,
    pub u: f64,
}

/// Wave function `f_K(p)` and its derivative for one side.
fn wave_function(p: f64, side: &EulerState, gamma: f64) -> (f64, f64) {
    let a = side.sound_speed(gamma);
    if p > side.p {
        // Shock.
        let big_a = 2.0 / ((gamma + 1.0) * side.rho);
        let big_b = (gamma - 1.0) / (gamma + 1.0) * side.p;
        let q = (big_a / (p + big_b)).sqrt();
        let f = (p - side.p) * q;
        let df = q * (1.0 - 0.5 * (p - side.p) / (p + big_b));
        (f, df)
    } else {
        // Rarefaction.
        let exponent = (gamma - 1.0) / (2.0 * gamma);
        let ratio = p / side.p;
        let f = 2.0 * a / (gamma - 1.0) * (ratio.powf(exponent) - 1.0);
        let df = ratio.powf(-(gamma + 1.0) / (2.0 * gamma)) / (side.rho * a);
        (f, df)
    }
}

/// Pressure function `f_L(p) + f_R(p) + (u_R - u_L)`, increasing in `p`.
pub fn pressure_function(p: f64, left: &EulerState, right: &EulerState, gamma: f64) -> f64 {
    wave_function(p, left, gamma).0 + wave_function(p, right, gamma).0 + (right.u - left.u)
}

fn check_inputs(left: &EulerState, right: &EulerState, gamma: f64) -> Result<()> {
    if !left.is_valid() || !right.is_valid() {
        return Err(Error::InvalidArgument("Euler states need positive density and pressure".into()));
    }
    if !(gamma > 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must exceed 1, got {gamma}")));
    }
    let critical = 2.0 / (gamma - 1.0) * (left.sound_speed(gamma) + right.sound_speed(gamma));
    if critical <= right.u - left.u {
        return Err(Error::Vacuum);
    }
    Ok(())
}

/// Bracket `[lo, hi]` with `phi(lo) < 0 <= phi(hi)`.
fn bracket(left: &EulerState, right: &EulerState, gamma: f64) -> (f64, f64) {
    let lo = 0.0;
    let mut hi = left.p.max(right.p);
    while pressure_function(hi, left, right, gamma) < 0.0 {
        hi *= 2.0;
    }
    (lo, hi)
}

/// Star state by Newton iteration safeguarded with bisection.
pub fn star_region(left: &EulerState, right: &EulerState, gamma: f64) -> Result<StarRegion> {
    check_inputs(left, right, gamma)?;
    let (mut lo, mut hi) = bracket(left, right, gamma);
    // Two-rarefaction guess, which is exact when both waves are rarefactions.
    let z = (gamma - 1.0) / (2.0 * gamma);
    let (al, ar) = (left.sound_speed(gamma), right.sound_speed(gamma));
    let guess = ((al + ar - 0.5 * (gamma - 1.0) * (right.u - left.u)) / (al / left.p.powf(z) + ar / right.p.powf(z)))
        .powf(1.0 / z);
    let mut p = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    for _ in 0..MAX_ITERATIONS {
        let (fl, dfl) = wave_function(p, left, gamma);
        let (fr, dfr) = wave_function(p, right, gamma);
        let phi = fl + fr + (right.u - left.u);
        if phi < 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let mut next = p - phi / (dfl + dfr);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let change = (next - p).abs() / (0.5 * (next + p));
        p = next;
        if change < PRESSURE_TOLERANCE {
            break;
        }
    }
    Ok(star_from_pressure(p, left, right, gamma))
}

/// Star state by pure bisection on the pressure function.
pub fn star_region_bisection(left: &EulerState, right: &EulerState, gamma: f64) -> Result<StarRegion> {
    check_inputs(left, right, gamma)?;
    let (mut lo, mut hi) = bracket(left, right, gamma);
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pressure_function(mid, left, right, gamma) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(star_from_pressure(0.5 * (lo + hi), left, right, gamma))
}

fn star_from_pressure(p: f64, left: &EulerState, right: &EulerState, gamma: f64) -> StarRegion {
    let fl = wave_function(p, left, gamma).0;
    let fr = wave_function(p, right, gamma).0;
    StarRegion {
        p,
        u: 0.5 * (left.u + right.u) + 0.5 * (fr - fl),
    }
}

/// Exact solution of one Riemann problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSolution {
    pub left: EulerState,
    pub right: EulerState,
    pub star: StarRegion,
    pub gamma: f64,
}

/// Kind and speeds of one nonlinear wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Wave {
    Shock { speed: f64 },
    Rarefaction { head: f64, tail: f64 },
}

impl RiemannSolution {
    pub fn new(left: EulerState, right: EulerState, gamma: f64) -> Result<Self> {
        let star = star_region(&left, &right, gamma)?;
        Ok(Self {
            left,
            right,
            star,
            gamma,
        })
    }

    fn star_density(&self, side: &EulerState) -> f64 {
        let g = self.gamma;
        let ratio = self.star.p / side.p;
        if self.star.p > side.p {
            let q = (g - 1.0) / (g + 1.0);
            side.rho * (ratio + q) / (ratio * q + 1.0)
        } else {
            side.rho * ratio.powf(1.0 / g)
        }
    }

    pub fn star_left(&self) -> EulerState {
        EulerState::new(self.star_density(&self.left), self.star.u, self.star.p)
    }

    pub fn star_right(&self) -> EulerState {
        EulerState::new(self.star_density(&self.right), self.star.u, self.star.p)
    }

    pub fn left_wave(&self) -> Wave {
        let g = self.gamma;
        let s = &self.left;
        let a = s.sound_speed(g);
        if self.star.p > s.p {
            let ratio = self.star.p / s.p;
            Wave::Shock {
                speed: s.u - a * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt(),
            }
        } else {
            let a_star = a * (self.star.p / s.p).powf((g - 1.0) / (2.0 * g));
            Wave::Rarefaction {
                head: s.u - a,
                tail: self.star.u - a_star,
            }
        }
    }

    pub fn right_wave(&self) -> Wave {
        let g = self.gamma;
        let s = &self.right;
        let a = s.sound_speed(g);
        if self.star.p > s.p {
            let ratio = self.star.p / s.p;
            Wave::Shock {
                speed: s.u + a * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt(),
            }
        } else {
            let a_star = a * (self.star.p / s.p).powf((g - 1.0) / (2.0 * g));
            Wave::Rarefaction {
                head: s.u + a,
                tail: self.star.u + a_star,
            }
        }
    }

    /// State on the ray `x / t = xi`.
    pub fn sample(&self, xi: f64) -> EulerState {
        let g = self.gamma;
        if xi <= self.star.u {
            let s = &self.left;
            match self.left_wave() {
                Wave::Shock { speed } => {
                    if xi <= speed {
                        *s
                    } else {
                        self.star_left()
                    }
                }
                Wave::Rarefaction { head, tail } => {
                    if xi <= head {
                        *s
                    } else if xi >= tail {
                        self.star_left()
                    } else {
                        let a = s.sound_speed(g);
                        let c = 2.0 / (g + 1.0) + (g - 1.0) / ((g + 1.0) * a) * (s.u - xi);
                        EulerState::new(
                            s.rho * c.powf(2.0 / (g - 1.0)),
                            2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * s.u + xi),
                            s.p * c.powf(2.0 * g / (g - 1.0)),
                        )
                    }
                }
            }
        } else {
            let s = &self.right;
            match self.right_wave() {
                Wave::Shock { speed } => {
                    if xi >= speed {
                        *s
                    } else {
                        self.star_right()
                    }
                }
                Wave::Rarefaction { head, tail } => {
                    if xi >= head {
                        *s
                    } else if xi <= tail {
                        self.star_right()
                    } else {
                        let a = s.sound_speed(g);
                        let c = 2.0 / (g + 1.0) - (g - 1.0) / ((g + 1.0) * a) * (s.u - xi);
                        EulerState::new(
                            s.rho * c.powf(2.0 / (g - 1.0)),
                            2.0 / (g + 1.0) * (-a + 0.5 * (g - 1.0) * s.u + xi),
                            s.p * c.powf(2.0 * g / (g - 1.0)),
                        )
                    }
                }
            }
        }
    }
}

/// Samples the solution with diaphragm at `x0` at time `t` on `xs`.
pub fn sample_solution(
    left: &EulerState,
    right: &EulerState,
    gamma: f64,
    x0: f64,
    t: f64,
    xs: &[f64],
) -> Result<Vec<EulerState>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling time must be positive, got {t}")));
    }
    let sol = RiemannSolution::new(*left, *right, gamma)?;
    Ok(xs.iter().map(|&x| sol.sample((x - x0) / t)).collect())
}
