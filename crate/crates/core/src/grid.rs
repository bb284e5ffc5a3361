//! Velocity and physical-space grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Uniform tensor-product velocity grid, identical along x, y and z.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    v_max: f64,
    intervals: usize,
    dv: f64,
    nodes: Vec<f64>,
}

impl VelocityGrid {
    /// Builds `intervals + 1` nodes per axis spanning `[-v_max, v_max]`.
    pub fn new(v_max: f64, intervals: usize) -> Result<Self> {
        if intervals < 2 {
            return Err(Error::VelocityGridTooSmall(intervals));
        }
        if !(v_max > 0.0) || !v_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "v_max must be positive, got {v_max}"
            )));
        }
        let dv = 2.0 * v_max / intervals as f64;
        // Fill from both ends so that nodes[j] == -nodes[n - j] holds bitwise.
        let mut nodes = vec![0.0; intervals + 1];
        for j in 0..=intervals / 2 {
            let v = -v_max + j as f64 * dv;
            nodes[j] = v;
            nodes[intervals - j] = -v;
        }
        if intervals % 2 == 0 {
            nodes[intervals / 2] = 0.0;
        }
        Ok(Self {
            v_max,
            intervals,
            dv,
            nodes,
        })
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Number of intervals `N_v` per axis.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes per axis, `N_v + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    /// Quadrature weight of one velocity cell, `dv^3`.
    pub fn cell_volume(&self) -> f64 {
        self.dv * self.dv * self.dv
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Values per spatial point, `(N_v + 1)^3`.
    pub fn cube_len(&self) -> usize {
        let n = self.len();
        n * n * n
    }
}

/// Sorted set of spatial points on `[a, b]`, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalGrid {
    a: f64,
    b: f64,
    points: Vec<f64>,
    dx_avg: f64,
}

impl PhysicalGrid {
    /// Equispaced grid with `intervals + 1` points.
    pub fn regular(a: f64, b: f64, intervals: usize) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidArgument(format!(
                "domain requires a < b, got [{a}, {b}]"
            )));
        }
        if intervals < 2 {
            return Err(Error::InvalidArgument(format!(
                "physical grid needs at least 2 intervals, got {intervals}"
            )));
        }
        let dx = (b - a) / intervals as f64;
        let mut points: Vec<f64> = (0..=intervals).map(|i| a + i as f64 * dx).collect();
        points[intervals] = b;
        Ok(Self {
            a,
            b,
            points,
            dx_avg: dx,
        })
    }

    /// Builds a grid from explicit coordinates, which must be strictly increasing.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "physical grid needs at least 3 points, got {}",
                points.len()
            )));
        }
        check_monotone(&points)?;
        let a = points[0];
        let b = points[points.len() - 1];
        let dx_avg = (b - a) / (points.len() - 1) as f64;
        Ok(Self {
            a,
            b,
            points,
            dx_avg,
        })
    }

    /// Randomly displaces interior points in two sweeps of at most `dx/4` each.
    ///
    /// Each displacement is `(dx/4) * u` with `u` uniform on `[-1, 1]`, drawn
    /// from a ChaCha stream keyed by `seed`; endpoints never move.
    pub fn jittered(&self, seed: u64) -> Result<Self> {
        const SWEEPS: usize = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amplitude = 0.25 * self.dx_avg;
        let mut points = self.points.clone();
        let last = points.len() - 1;
        for _ in 0..SWEEPS {
            for p in &mut points[1..last] {
                let u: f64 = rng.gen_range(-1.0..=1.0);
                *p += amplitude * u;
            }
        }
        check_monotone(&points)?;
        Ok(Self {
            a: self.a,
            b: self.b,
            points,
            dx_avg: self.dx_avg,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dx_avg(&self) -> f64 {
        self.dx_avg
    }

    /// Width of the dual cell around each point (half-intervals on either side).
    pub fn cell_widths(&self) -> Vec<f64> {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 {
                    self.points[i] - self.points[i - 1]
                } else {
                    0.0
                };
                let right = if i + 1 < n {
                    self.points[i + 1] - self.points[i]
                } else {
                    0.0
                };
                0.5 * (left + right)
            })
            .collect()
    }
}

fn check_monotone(points: &[f64]) -> Result<()> {
    for (index, pair) in points.windows(2).enumerate() {
        if !(pair[0] < pair[1]) {
            return Err(Error::GridOrdering {
                index,
                left: pair[0],
                right: pair[1],
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn velocity_grid_unit_spacing() {
        let g = VelocityGrid::new(10.0, 20).unwrap();
        assert_eq!(g.dv(), 1.0);
        assert_eq!(g.len(), 21);
        for (j, v) in g.nodes().iter().enumerate() {
            assert_eq!(*v, -10.0 + j as f64);
        }
    }

    #[test]
    fn velocity_grid_two_intervals() {
        let g = VelocityGrid::new(10.0, 2).unwrap();
        assert_eq!(g.nodes(), &[-10.0, 0.0, 10.0]);
    }

    #[test]
    fn velocity_grid_center_node_is_zero() {
        let g = VelocityGrid::new(5.0, 4).unwrap();
        assert_eq!(g.dv(), 2.5);
        assert_eq!(g.nodes()[2], 0.0);
    }

    #[test]
    fn velocity_grid_rejects_single_interval() {
        assert!(matches!(
            VelocityGrid::new(10.0, 1),
            Err(Error::VelocityGridTooSmall(1))
        ));
    }

    #[test]
    fn velocity_grid_symmetric_and_spans_range() {
        for n in [2, 3, 7, 13, 16, 20, 41] {
            let g = VelocityGrid::new(10.0, n).unwrap();
            let nodes = g.nodes();
            assert_eq!(nodes[0], -10.0);
            assert_eq!(nodes[n], 10.0);
            for j in 0..=n {
                assert_eq!(nodes[j], -nodes[n - j]);
            }
            let span: f64 = nodes.windows(2).map(|w| w[1] - w[0]).sum();
            assert_relative_eq!(span, 20.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn regular_grid_spacing() {
        let g = PhysicalGrid::regular(0.0, 1.0, 200).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g.dx_avg(), 0.005);
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(g.points()[200], 1.0);
        assert_eq!(g.points()[17], 17.0 * 0.005);

        let g = PhysicalGrid::regular(0.0, 1.0, 2).unwrap();
        assert_eq!(g.points(), &[0.0, 0.5, 1.0]);

        let g = PhysicalGrid::regular(0.0, 1.0, 800).unwrap();
        assert_eq!(g.dx_avg(), 0.00125);
    }

    #[test]
    fn jitter_keeps_endpoints_and_is_deterministic() {
        let g = PhysicalGrid::regular(0.0, 1.0, 200).unwrap();
        let j1 = g.jittered(42).unwrap();
        let j2 = g.jittered(42).unwrap();
        assert_eq!(j1, j2);
        assert_eq!(j1.points()[0], 0.0);
        assert_eq!(j1.points()[200], 1.0);
        assert_ne!(j1, g.jittered(43).unwrap());
    }

    #[test]
    fn jitter_displacement_bound() {
        let g = PhysicalGrid::regular(0.0, 1.0, 200).unwrap();
        let bound = 2.0 * g.dx_avg() / 4.0;
        for seed in 0..50 {
            let j = g.jittered(seed).unwrap();
            let worst = g
                .points()
                .iter()
                .zip(j.points())
                .map(|(r, q)| (r - q).abs())
                .fold(0.0, f64::max);
            assert!(worst <= bound * (1.0 + 1e-12), "seed {seed}: {worst}");
        }
    }

    #[test]
    fn jitter_monotone_over_seed_sweep() {
        let g = PhysicalGrid::regular(0.0, 1.0, 200).unwrap();
        for seed in 0..1000 {
            let j = g.jittered(seed).unwrap();
            assert!(j.points().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn from_points_rejects_unsorted() {
        let err = PhysicalGrid::from_points(vec![0.0, 0.6, 0.5, 1.0]).unwrap_err();
        assert!(matches!(err, Error::GridOrdering { index: 1, .. }));
    }

    #[test]
    fn cell_widths_sum_to_domain() {
        let g = PhysicalGrid::regular(0.0, 1.0, 50).unwrap().jittered(3).unwrap();
        let total: f64 = g.cell_widths().iter().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-14);
    }
}
