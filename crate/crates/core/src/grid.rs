use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform mesh `x_i = x_min + i·h`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidArgument(format!(
                "grid needs finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n < Self::MIN_POINTS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} points, got {n}",
                Self::MIN_POINTS
            )));
        }
        let grid = Self { x_min, x_max, n };
        if !(grid.h() > 0.0) || grid.point(n - 2) >= x_max {
            return Err(Error::InvalidArgument(
                "grid spacing is not resolvable in floating point".into(),
            ));
        }
        Ok(grid)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + i as f64 * self.h()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Index of the grid point nearest to `x`, if `x` lies on the grid span.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        if x < self.x_min - 0.5 * self.h() || x > self.x_max + 0.5 * self.h() {
            return None;
        }
        let i = ((x - self.x_min) / self.h()).round();
        Some((i.max(0.0) as usize).min(self.n - 1))
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }
}

/// Time-stamped samples `u(t, x_i)` on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    t: f64,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, t: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("time stamp must be ≥ 0, got {t}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Diverged { t, x: grid.point(i) });
        }
        Ok(Self { grid, t, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, t: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().into_iter().map(f).collect();
        Self::new(grid, t, values)
    }

    pub fn constant(grid: Grid, t: f64, c: f64) -> Result<Self> {
        Self::new(grid, t, vec![c; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `(x_i, u_i)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &u)| (self.grid.point(i), u))
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn retimed(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub(crate) fn with_values(&self, t: f64, values: Vec<f64>) -> Self {
        Self {
            grid: self.grid,
            t,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_are_ordered_and_hit_endpoints() {
        let g = Grid::new(-200.0, 4000.0, 21001).unwrap();
        assert_eq!(g.h(), 0.2);
        assert_eq!(g.point(0), -200.0);
        assert_eq!(g.point(21_000), 4000.0);
        assert_eq!(g.point(20_000), 3800.0);
        assert_eq!(g.point(1000), 0.0);
        let pts = g.points();
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(Grid::new(1.0, 1.0, 32).is_err());
        assert!(Grid::new(0.0, 1.0, 15).is_err());
        assert!(Grid::new(0.0, f64::INFINITY, 32).is_err());
    }

    #[test]
    fn field_checks_length_and_finiteness() {
        let g = Grid::new(0.0, 1.0, 16).unwrap();
        assert!(matches!(
            Field::new(g, 0.0, vec![0.0; 15]),
            Err(Error::GridMismatch(_))
        ));
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert!(matches!(Field::new(g, 0.0, v), Err(Error::Diverged { .. })));
    }

    #[test]
    fn nearest_index_rounds() {
        let g = Grid::new(0.0, 1.5, 16).unwrap();
        assert_eq!(g.nearest_index(0.26), Some(3));
        assert_eq!(g.nearest_index(-1.0), None);
    }
}
