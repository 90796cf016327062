use crate::error::{invalid, Result};

/// Smallest grid the solver accepts.
pub const MIN_GRID_POINTS: usize = 64;

/// `N` equidistant points spanning `[0, threshold]`.
///
/// Cell `j` is `[x_j, x_{j+1}]`; there are `N - 1` cells. The last point sits
/// on the threshold itself and stands for the left limit of state-indexed
/// tables there (states at or above the threshold have already decoded).
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    points: Vec<f64>,
    step: f64,
}

impl StateGrid {
    pub fn new(n: usize, threshold: f64) -> Result<Self> {
        if n < MIN_GRID_POINTS {
            return Err(invalid(format!("grid needs at least {MIN_GRID_POINTS} points, got {n}")));
        }
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(invalid(format!("grid threshold must be positive, got {threshold}")));
        }
        let step = threshold / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        points[n - 1] = threshold;
        Ok(Self { points, step })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.points.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn threshold(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> f64 {
        self.points[i]
    }

    pub fn midpoint(&self, cell: usize) -> f64 {
        0.5 * (self.points[cell] + self.points[cell + 1])
    }

    /// Cell index containing `x` (clamped to the grid) and the fractional
    /// position inside it.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        if x <= 0.0 {
            return (0, 0.0);
        }
        let pos = x / self.step;
        let cell = (pos.floor() as usize).min(self.cells() - 1);
        let frac = (pos - cell as f64).clamp(0.0, 1.0);
        (cell, frac)
    }

    /// Piecewise-linear interpolation of node values, clamped at both ends.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let (cell, frac) = self.locate(x);
        values[cell] + frac * (values[cell + 1] - values[cell])
    }
}
