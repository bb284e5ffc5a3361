//! One-dimensional reconstruction at characteristic foot points.
//!
//! Both schemes are linear in the data, so every reconstruction is expressed
//! as a [`Stencil`]: a short list of `(point index, coefficient)` pairs. The
//! solver builds one stencil per foot point and applies it to every velocity
//! row sharing that foot point.

use std::ops::Range;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::grid::PhysicalGrid;

/// Linear combination of nodal values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Stencil {
    terms: SmallVec<[(usize, f64); 8]>,
}

impl Stencil {
    pub fn identity(index: usize) -> Self {
        let mut terms = SmallVec::new();
        terms.push((index, 1.0));
        Self { terms }
    }

    /// Builds a stencil from raw terms, dropping zero coefficients.
    pub fn from_terms(terms: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut s = Self::default();
        for (i, c) in terms {
            s.push(i, c);
        }
        s
    }

    fn push(&mut self, index: usize, coefficient: f64) {
        if coefficient != 0.0 {
            self.terms.push((index, coefficient));
        }
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * values[i]).sum()
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.1).sum()
    }
}

/// Piecewise-linear interpolation through `(xs, values)` at `x`.
pub fn spline_interpolate(xs: &[f64], values: &[f64], x: f64) -> Result<f64> {
    if xs.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: values.len(),
        });
    }
    Ok(spline_stencil(xs, x)?.apply(values))
}

/// Two-point stencil on the interval `[x_k, x_{k+1}]` that brackets `x`.
pub fn spline_stencil(xs: &[f64], x: f64) -> Result<Stencil> {
    let n = xs.len();
    if n < 2 || !(x >= xs[0] && x <= xs[n - 1]) {
        return Err(Error::OutOfDomain {
            x,
            lo: xs.first().copied().unwrap_or(f64::NAN),
            hi: xs.last().copied().unwrap_or(f64::NAN),
        });
    }
    // First index with xs[k] > x, clamped so that [k-1, k] is an interval.
    let upper = xs.partition_point(|&p| p <= x).clamp(1, n - 1);
    let k = upper - 1;
    let mut s = Stencil::default();
    if x == xs[k] {
        s.push(k, 1.0);
        return Ok(s);
    }
    if x == xs[upper] {
        s.push(upper, 1.0);
        return Ok(s);
    }
    let width = xs[upper] - xs[k];
    s.push(k, (xs[upper] - x) / width);
    s.push(upper, (x - xs[k]) / width);
    Ok(s)
}

/// Which side of the query point an upwind-biased stencil may draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpwindSign {
    None,
    /// Information travels in `+x`: keep points with `x_j <= x_query`.
    Positive,
    /// Information travels in `-x`: keep points with `x_j >= x_query`.
    Negative,
}

impl UpwindSign {
    pub fn for_velocity(v: f64) -> Self {
        if v > 0.0 {
            UpwindSign::Positive
        } else if v < 0.0 {
            UpwindSign::Negative
        } else {
            UpwindSign::None
        }
    }
}

/// Relative widening of the neighbor radius and tolerance for distance ties.
pub const RADIUS_SLACK: f64 = 1e-10;

/// Points within radius `h` of a query, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub indices: SmallVec<[usize; 8]>,
    pub query: f64,
    pub radius: f64,
}

/// Neighbors of `x` on the whole grid.
pub fn find_neighbors(grid: &PhysicalGrid, x: f64, h: f64, upwind: UpwindSign) -> Result<NeighborSet> {
    find_neighbors_in(grid.points(), 0..grid.len(), x, h, upwind)
}

/// Neighbors of `x` among `points[range]`.
///
/// With an upwind sign, points on the downwind side are dropped except the
/// nearest point, which always anchors the stencil.
pub fn find_neighbors_in(
    points: &[f64],
    range: Range<usize>,
    x: f64,
    h: f64,
    upwind: UpwindSign,
) -> Result<NeighborSet> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("neighbor radius must be positive, got {h}")));
    }
    // Rounding in the point coordinates must not decide whether a point at
    // exactly distance h belongs to the stencil, or which of two equidistant
    // points anchors it. Either would break translation invariance of the
    // advection stencils and with it discrete mass conservation.
    let h = h * (1.0 + RADIUS_SLACK);
    let slice = &points[range.clone()];
    let lo = slice.partition_point(|&p| p < x - h);
    let hi = slice.partition_point(|&p| p <= x + h);
    let mut indices: SmallVec<[usize; 8]> = (lo..hi)
        .map(|i| i + range.start)
        .filter(|&i| (points[i] - x).abs() <= h)
        .collect();
    indices.sort_by(|&a, &b| {
        (points[a] - x)
            .abs()
            .total_cmp(&(points[b] - x).abs())
            .then(a.cmp(&b))
    });
    if indices.len() > 1 {
        let nearest = (points[indices[0]] - x).abs();
        let tied = indices
            .iter()
            .take_while(|&&i| (points[i] - x).abs() <= nearest + RADIUS_SLACK * h)
            .count();
        let first = (0..tied).min_by_key(|&k| indices[k]).unwrap_or(0);
        indices.swap(0, first);
    }
    if let Some(&anchor) = indices.first() {
        let keep = |i: usize| match upwind {
            UpwindSign::None => true,
            UpwindSign::Positive => points[i] <= x,
            UpwindSign::Negative => points[i] >= x,
        };
        let mut filtered: SmallVec<[usize; 8]> = SmallVec::new();
        filtered.push(anchor);
        filtered.extend(indices[1..].iter().copied().filter(|&i| keep(i)));
        indices = filtered;
    }
    if indices.len() < 2 {
        return Err(Error::StencilStarvation {
            x,
            found: indices.len(),
            radius: h,
        });
    }
    Ok(NeighborSet {
        indices,
        query: x,
        radius: h,
    })
}

/// Among points tied for nearest, anchor on the one furthest upwind of the
/// query: the highest index when information travels in `-x`, otherwise the
/// lowest. Keeps the scheme mirror symmetric under `v -> -v`.
pub fn orient_anchor(points: &[f64], set: &mut NeighborSet, direction: UpwindSign) {
    if direction != UpwindSign::Negative || set.indices.len() < 2 {
        return;
    }
    let x = set.query;
    let nearest = (points[set.indices[0]] - x).abs();
    let tol = RADIUS_SLACK * set.radius;
    let best = (0..set.indices.len())
        .filter(|&k| (points[set.indices[k]] - x).abs() <= nearest + tol)
        .max_by_key(|&k| set.indices[k])
        .unwrap_or(0);
    set.indices.swap(0, best);
}

/// Neighbor search with the starvation fallback: drop the upwind filter,
/// then widen the radius once by 1.5.
pub fn find_neighbors_with_fallback(
    points: &[f64],
    range: Range<usize>,
    x: f64,
    h: f64,
    upwind: UpwindSign,
) -> Result<NeighborSet> {
    if let Ok(set) = find_neighbors_in(points, range.clone(), x, h, upwind) {
        return Ok(set);
    }
    if upwind != UpwindSign::None {
        if let Ok(set) = find_neighbors_in(points, range.clone(), x, h, UpwindSign::None) {
            return Ok(set);
        }
    }
    find_neighbors_in(points, range, x, 1.5 * h, UpwindSign::None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlsConfig {
    /// Sharpness of the Gaussian weight.
    pub alpha: f64,
    /// Support radius in multiples of the average grid spacing.
    pub radius_factor: f64,
    pub upwind: bool,
}

impl Default for MlsConfig {
    fn default() -> Self {
        Self {
            alpha: 6.0,
            radius_factor: 2.5,
            upwind: false,
        }
    }
}

impl MlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::config("mls_alpha", "must be positive"));
        }
        if !(self.radius_factor >= 1.0) {
            return Err(Error::config("mls_radius_factor", "must be at least 1"));
        }
        Ok(())
    }
}

/// Truncated Gaussian weight.
pub fn mls_weight(xj: f64, x: f64, h: f64, alpha: f64) -> f64 {
    let d = xj - x;
    if d.abs() <= h {
        (-alpha * d * d / (h * h)).exp()
    } else {
        0.0
    }
}

/// Constrained linear MLS stencil.
///
/// The fit is exact at the nearest neighbor `x_1`; the slope is the weighted
/// least-squares slope of the differences `f_j - f_1`, with weights centred on
/// the query point. The value is then `f_1 + (x - x_1) * slope`.
pub fn mls_stencil(points: &[f64], neighbors: &NeighborSet, alpha: f64) -> Result<Stencil> {
    let x = neighbors.query;
    let h = neighbors.radius;
    let anchor = neighbors.indices[0];
    let x1 = points[anchor];
    let mut denom = 0.0;
    let mut slope: SmallVec<[(usize, f64); 8]> = SmallVec::new();
    for &j in &neighbors.indices[1..] {
        let dx = points[j] - x1;
        let w = mls_weight(points[j], x, h, alpha);
        denom += w * dx * dx;
        slope.push((j, w * dx));
    }
    if !(denom > 0.0) {
        return Err(Error::DegenerateStencil { x });
    }
    let offset = x - x1;
    let mut stencil = Stencil::default();
    let mut anchor_coeff = 1.0;
    let mut rest: SmallVec<[(usize, f64); 8]> = SmallVec::new();
    for (j, s) in slope {
        let c = offset * s / denom;
        anchor_coeff -= c;
        rest.push((j, c));
    }
    stencil.push(anchor, anchor_coeff);
    for (j, c) in rest {
        stencil.push(j, c);
    }
    Ok(stencil)
}

/// MLS reconstruction of `values` (indexed like `points`) at the query of `neighbors`.
pub fn mls_interpolate(points: &[f64], neighbors: &NeighborSet, values: &[f64], cfg: &MlsConfig) -> Result<f64> {
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: values.len(),
        });
    }
    Ok(mls_stencil(points, neighbors, cfg.alpha)?.apply(values))
}

/// Stencil extrapolating interior data (indices in `interior`) to `x_boundary`.
pub fn mls_boundary_stencil(
    points: &[f64],
    interior: Range<usize>,
    x_boundary: f64,
    h: f64,
    cfg: &MlsConfig,
) -> Result<Stencil> {
    let neighbors = find_neighbors_with_fallback(points, interior, x_boundary, h, UpwindSign::None)?;
    mls_stencil(points, &neighbors, cfg.alpha)
}

/// Extrapolates interior `values` to the wall coordinate `x_boundary`.
pub fn mls_extrapolate_boundary(
    points: &[f64],
    interior: Range<usize>,
    values: &[f64],
    x_boundary: f64,
    h: f64,
    cfg: &MlsConfig,
) -> Result<f64> {
    Ok(mls_boundary_stencil(points, interior, x_boundary, h, cfg)?.apply(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> MlsConfig {
        MlsConfig::default()
    }

    #[test]
    fn spline_reproduces_nodes() {
        let xs = [0.0, 0.2, 0.35, 0.7, 1.0];
        let f = [1.0, -2.0, 3.5, 0.25, 9.0];
        for (x, v) in xs.iter().zip(&f) {
            assert_eq!(spline_interpolate(&xs, &f, *x).unwrap(), *v);
        }
    }

    #[test]
    fn spline_midpoint_average() {
        assert_eq!(spline_interpolate(&[0.0, 0.005], &[2.0, 4.0], 0.0025).unwrap(), 3.0);
    }

    #[test]
    fn spline_linear_exact() {
        let xs = [0.0, 0.13, 0.3, 0.31, 0.8, 1.0];
        let f: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        for q in [0.0, 0.05, 0.2, 0.305, 0.5, 0.99, 1.0] {
            assert_relative_eq!(spline_interpolate(&xs, &f, q).unwrap(), 3.0 * q + 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn spline_out_of_domain() {
        assert!(matches!(
            spline_interpolate(&[0.0, 1.0], &[0.0, 1.0], 1.5),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn five_neighbors_on_regular_grid() {
        let g = PhysicalGrid::regular(0.0, 1.0, 200).unwrap();
        let x = g.points()[100];
        let set = find_neighbors(&g, x, 0.0125, UpwindSign::None).unwrap();
        assert_eq!(set.indices.len(), 5);
        assert_eq!(set.indices[0], 100);
        let mut sorted = set.indices.to_vec();
        sorted.sort();
        assert_eq!(sorted, vec![98, 99, 100, 101, 102]);
    }

    #[test]
    fn neighbors_sorted_and_within_radius() {
        let g = PhysicalGrid::regular(0.0, 1.0, 40).unwrap().jittered(5).unwrap();
        let h = 2.5 * g.dx_avg();
        for q in [0.0, 0.013, 0.5, 0.777, 1.0] {
            let set = find_neighbors(&g, q, h, UpwindSign::None).unwrap();
            let d: Vec<f64> = set.indices.iter().map(|&i| (g.points()[i] - q).abs()).collect();
            assert!(d.iter().all(|v| *v <= h));
            assert!(d.windows(2).all(|w| w[0] <= w[1]));
            // Brute-force enumeration agrees on membership.
            let brute = g.points().iter().filter(|p| (*p - q).abs() <= h).count();
            assert_eq!(brute, set.indices.len());
        }
    }

    #[test]
    fn midpoint_ties_anchor_consistently() {
        let g = PhysicalGrid::regular(0.0, 1.0, 200).unwrap();
        let p = g.points();
        for i in 10..190 {
            let q = 0.5 * (p[i] + p[i + 1]);
            let mut set = find_neighbors(&g, q, 2.5 * g.dx_avg(), UpwindSign::None).unwrap();
            assert_eq!(set.indices[0], i);
            assert_eq!(set.indices.len(), 6, "at {i}");
            orient_anchor(p, &mut set, UpwindSign::Negative);
            assert_eq!(set.indices[0], i + 1);
        }
    }

    #[test]
    fn upwind_filter_keeps_anchor() {
        let g = PhysicalGrid::regular(0.0, 1.0, 200).unwrap();
        let x = g.points()[50] + 0.001;
        let set = find_neighbors(&g, x, 0.0125, UpwindSign::Positive).unwrap();
        assert_eq!(set.indices[0], 50);
        assert!(set.indices[1..].iter().all(|&i| g.points()[i] <= x));
        // Anchor on the downwind side is still kept.
        let x = g.points()[50] - 0.001;
        let set = find_neighbors(&g, x, 0.0125, UpwindSign::Positive).unwrap();
        assert_eq!(set.indices[0], 50);
        assert!(set.indices[1..].iter().all(|&i| g.points()[i] <= x));
    }

    #[test]
    fn starvation_and_fallback() {
        let points = [0.0, 1.0, 2.0, 3.0];
        let err = find_neighbors_in(&points, 0..4, 3.0, 0.5, UpwindSign::None).unwrap_err();
        assert!(matches!(err, Error::StencilStarvation { found: 1, .. }));
        // Upwind filter starves at the right end; dropping it recovers.
        let set = find_neighbors_with_fallback(&points, 0..4, 0.0, 1.1, UpwindSign::Positive).unwrap();
        assert_eq!(set.indices.to_vec(), vec![0, 1]);
        // Widening by 1.5 reaches the next point.
        let set = find_neighbors_with_fallback(&points, 0..4, 3.0, 0.8, UpwindSign::None).unwrap();
        assert_eq!(set.indices.to_vec(), vec![3, 2]);
        assert_relative_eq!(set.radius, 1.2 * (1.0 + RADIUS_SLACK), max_relative = 1e-15);
    }

    #[test]
    fn weight_values() {
        assert_eq!(mls_weight(0.3, 0.3, 0.1, 6.0), 1.0);
        assert_relative_eq!(mls_weight(0.75, 0.5, 0.25, 6.0), (-6.0f64).exp(), max_relative = 1e-9);
        assert_relative_eq!((-6.0f64).exp(), 0.00248, max_relative = 1e-2);
        assert_eq!(mls_weight(0.75 + 1e-12, 0.5, 0.25, 6.0), 0.0);
    }

    #[test]
    fn mls_constant_and_linear() {
        let g = PhysicalGrid::regular(0.0, 1.0, 30).unwrap().jittered(11).unwrap();
        let h = 2.5 * g.dx_avg();
        let c: Vec<f64> = vec![4.25; g.len()];
        let lin: Vec<f64> = g.points().iter().map(|x| 3.0 * x + 1.0).collect();
        for q in [0.0, 0.021, 0.5, 0.66, 1.0] {
            let set = find_neighbors(&g, q, h, UpwindSign::None).unwrap();
            assert_relative_eq!(mls_interpolate(g.points(), &set, &c, &cfg()).unwrap(), 4.25, max_relative = 1e-14);
            assert_relative_eq!(
                mls_interpolate(g.points(), &set, &lin, &cfg()).unwrap(),
                3.0 * q + 1.0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn mls_quadratic_exact_at_anchor() {
        // Symmetric stencil {x1 - d, x1, x1 + d}: the weighted slope is
        // ((x1+d)^2 - (x1-d)^2) / (2d) = 2 x1 and the offset is zero.
        let x1 = 0.4;
        let d = 0.1;
        let points = [x1 - d, x1, x1 + d];
        let f: Vec<f64> = points.iter().map(|x| x * x).collect();
        let set = find_neighbors_in(&points, 0..3, x1, 0.25, UpwindSign::None).unwrap();
        let st = mls_stencil(&points, &set, 6.0).unwrap();
        assert_eq!(st.apply(&f), x1 * x1);
        // Slope check through a shifted query.
        let q = x1 + 0.01;
        let set = NeighborSet {
            indices: set.indices.clone(),
            query: q,
            radius: 0.25,
        };
        let w_plus = mls_weight(x1 + d, q, 0.25, 6.0);
        let w_minus = mls_weight(x1 - d, q, 0.25, 6.0);
        let slope = (w_plus * d * ((x1 + d).powi(2) - x1 * x1) + w_minus * (-d) * ((x1 - d).powi(2) - x1 * x1))
            / (w_plus * d * d + w_minus * d * d);
        let got = mls_stencil(&points, &set, 6.0).unwrap().apply(&f);
        assert_relative_eq!(got, x1 * x1 + 0.01 * slope, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_stencil() {
        // Non-anchor neighbor beyond the weight support after widening is
        // impossible, so build the set by hand.
        let points = [0.0, 1.0];
        let set = NeighborSet {
            indices: SmallVec::from_slice(&[0, 1]),
            query: 0.0,
            radius: 0.5,
        };
        assert!(matches!(mls_stencil(&points, &set, 6.0), Err(Error::DegenerateStencil { .. })));
    }

    #[test]
    fn boundary_extrapolation() {
        let g = PhysicalGrid::regular(0.0, 1.0, 20).unwrap();
        let h = 2.5 * g.dx_avg();
        let interior = 1..g.len() - 1;
        let c = vec![7.0; g.len()];
        let lin: Vec<f64> = g.points().iter().map(|x| -2.0 * x + 0.5).collect();
        assert_relative_eq!(
            mls_extrapolate_boundary(g.points(), interior.clone(), &c, 0.0, h, &cfg()).unwrap(),
            7.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            mls_extrapolate_boundary(g.points(), interior.clone(), &lin, 1.0, h, &cfg()).unwrap(),
            -1.5,
            max_relative = 1e-13
        );
        // Three interior points at 0.05, 0.10, 0.15 inside a radius just above 0.15.
        let f: Vec<f64> = g.points().iter().map(|x| (10.0 * x).powi(3)).collect();
        let h = 0.150001;
        let got = mls_extrapolate_boundary(g.points(), interior, &f, 0.0, h, &cfg()).unwrap();
        let p = g.points();
        let hs = h * (1.0 + RADIUS_SLACK);
        let w = |x: f64| (-6.0 * x * x / (hs * hs)).exp();
        let (f1, f2, f3) = (f[1], f[2], f[3]);
        let (d2, d3) = (p[2] - p[1], p[3] - p[1]);
        let slope = (w(p[2]) * d2 * (f2 - f1) + w(p[3]) * d3 * (f3 - f1)) / (w(p[2]) * d2 * d2 + w(p[3]) * d3 * d3);
        assert_relative_eq!(got, f1 - p[1] * slope, max_relative = 1e-12);
    }

    #[test]
    fn far_points_do_not_contribute() {
        let g = PhysicalGrid::regular(0.0, 1.0, 50).unwrap();
        let h = 2.5 * g.dx_avg();
        let q = 0.5013;
        let set = find_neighbors(&g, q, h, UpwindSign::None).unwrap();
        let mut f: Vec<f64> = g.points().iter().map(|x| x.sin()).collect();
        let a = mls_interpolate(g.points(), &set, &f, &cfg()).unwrap();
        f[40] = 1e6;
        f[3] = -7.0;
        let b = mls_interpolate(g.points(), &set, &f, &cfg()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    proptest! {
        #[test]
        fn mls_translation_invariant(seed in 0u64..500, shift in -5.0f64..5.0, t in 0.0f64..1.0) {
            let g = PhysicalGrid::regular(0.0, 1.0, 25).unwrap().jittered(seed).unwrap();
            let h = 2.5 * g.dx_avg();
            let f: Vec<f64> = g.points().iter().map(|x| (7.0 * x).cos()).collect();
            let q = t;
            let set = find_neighbors(&g, q, h, UpwindSign::None).unwrap();
            let a = mls_interpolate(g.points(), &set, &f, &cfg()).unwrap();
            let moved: Vec<f64> = g.points().iter().map(|x| x + shift).collect();
            let set2 = find_neighbors_in(&moved, 0..moved.len(), q + shift, h, UpwindSign::None).unwrap();
            prop_assert_eq!(&set.indices, &set2.indices);
            let b = mls_interpolate(&moved, &set2, &f, &cfg()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn stencils_are_affine(seed in 0u64..500, t in 0.0f64..1.0, upwind in 0usize..3) {
            let g = PhysicalGrid::regular(0.0, 1.0, 25).unwrap().jittered(seed).unwrap();
            let sign = [UpwindSign::None, UpwindSign::Positive, UpwindSign::Negative][upwind];
            let set = find_neighbors_with_fallback(g.points(), 0..g.len(), t, 2.5 * g.dx_avg(), sign).unwrap();
            let st = mls_stencil(g.points(), &set, 6.0).unwrap();
            prop_assert!((st.coefficient_sum() - 1.0).abs() < 1e-13);
            let sp = spline_stencil(g.points(), t).unwrap();
            prop_assert!((sp.coefficient_sum() - 1.0).abs() < 1e-15);
        }
    }
}
