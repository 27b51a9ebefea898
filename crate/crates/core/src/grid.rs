//! Uniform discretization of `[0, π]` and the interpolation/quadrature
//! rules that live on it.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Smallest number of intervals a [`Grid`] may have.
pub const MIN_INTERVALS: usize = 16;

/// `M + 1` equally spaced nodes on `[0, π]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    intervals: usize,
}

impl Grid {
    pub fn new(intervals: usize) -> Result<Self> {
        if intervals < MIN_INTERVALS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_INTERVALS} intervals, got {intervals}"
            )));
        }
        Ok(Self { intervals })
    }

    /// Like [`Grid::new`] but additionally requires an even interval count,
    /// which composite Simpson quadrature needs.
    pub fn new_even(intervals: usize) -> Result<Self> {
        if !intervals.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "interval count must be even, got {intervals}"
            )));
        }
        Self::new(intervals)
    }

    /// Number of intervals `M`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        PI / self.intervals as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.intervals);
        if i == self.intervals {
            PI
        } else {
            i as f64 * PI / self.intervals as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(move |i| self.node(i))
    }

    pub fn is_even(&self) -> bool {
        self.intervals.is_multiple_of(2)
    }
}

/// Natural cubic spline through samples on a [`Grid`].
#[derive(Debug, Clone)]
pub struct CubicSpline {
    grid: Grid,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(grid: Grid, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.len(), "spline sample count");
        let m = grid.intervals();
        let h = grid.step();
        let mut second = vec![0.0; m + 1];
        // Thomas sweep for m[i-1] + 4 m[i] + m[i+1] = 6 Δ²y / h², natural ends.
        let n = m - 1;
        let mut diag = vec![4.0; n];
        let mut rhs: Vec<f64> = (1..m)
            .map(|i| 6.0 * (values[i - 1] - 2.0 * values[i] + values[i + 1]) / (h * h))
            .collect();
        for k in 1..n {
            let w = 1.0 / diag[k - 1];
            diag[k] -= w;
            rhs[k] -= w * rhs[k - 1];
        }
        second[n] = rhs[n - 1] / diag[n - 1];
        for k in (0..n - 1).rev() {
            second[k + 1] = (rhs[k] - second[k + 2]) / diag[k];
        }
        Self {
            grid,
            values: values.to_vec(),
            second,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn eval(&self, x: f64) -> f64 {
        let h = self.grid.step();
        let m = self.grid.intervals();
        let i = ((x / h).floor().max(0.0) as usize).min(m - 1);
        let a = self.grid.node(i + 1) - x;
        let b = x - self.grid.node(i);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        (m0 * a * a * a + m1 * b * b * b) / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b
    }

    /// Samples the spline on another grid. Identical grids copy the data.
    pub fn resample(&self, target: Grid) -> Vec<f64> {
        if target == self.grid {
            return self.values.clone();
        }
        target.nodes().map(|x| self.eval(x)).collect()
    }
}

/// Composite Simpson rule over the full grid.
pub fn simpson(grid: Grid, values: &[f64]) -> Result<f64> {
    if !grid.is_even() {
        return Err(Error::InvalidGrid(
            "Simpson quadrature needs an even interval count".into(),
        ));
    }
    debug_assert_eq!(values.len(), grid.len());
    let m = grid.intervals();
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(m).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    Ok(grid.step() / 3.0 * (values[0] + values[m] + 4.0 * odd + 2.0 * even))
}

/// Quadrature weights (in units of the step) for `n + 1` equispaced points.
///
/// Short panels use closed Newton-Cotes rules; from six points on the
/// trapezoid rule carries fourth-order Gregory end corrections.
pub fn nystrom_weights(n: usize) -> Vec<f64> {
    match n {
        0 => vec![0.0],
        1 => vec![0.5, 0.5],
        2 => vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
        3 => vec![3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0],
        4 => vec![
            14.0 / 45.0,
            64.0 / 45.0,
            24.0 / 45.0,
            64.0 / 45.0,
            14.0 / 45.0,
        ],
        _ => {
            let mut w = vec![1.0; n + 1];
            let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
            for (k, e) in ends.iter().enumerate() {
                w[k] = *e;
                w[n - k] = *e;
            }
            w
        }
    }
}

/// Running integral `∫₀^{xᵢ} f` of equispaced samples, fourth order.
///
/// Each panel uses the cubic through the four nearest samples, shifted
/// inward at the two ends.
pub fn cumulative_order4(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 4, "need at least four samples");
    let f = values;
    let m = n - 1;
    let mut out = vec![0.0; n];
    for j in 0..m {
        let panel = if j == 0 {
            9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]
        } else if j == m - 1 {
            f[m - 3] - 5.0 * f[m - 2] + 19.0 * f[m - 1] + 9.0 * f[m]
        } else {
            -f[j - 1] + 13.0 * f[j] + 13.0 * f[j + 1] - f[j + 2]
        };
        out[j + 1] = out[j] + panel * h / 24.0;
    }
    out
}

/// Fourth-order finite-difference derivative of equispaced samples.
///
/// Interior nodes use the five-point central stencil, the two nodes at
/// each end use one-sided fourth-order stencils.
pub fn derivative_order4(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "need at least five samples");
    let f = values;
    let mut d = vec![0.0; n];
    let s = 12.0 * h;
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / s;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / s;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / s;
    }
    let l = n - 1;
    d[l] = (25.0 * f[l] - 48.0 * f[l - 1] + 36.0 * f[l - 2] - 16.0 * f[l - 3] + 3.0 * f[l - 4]) / s;
    d[l - 1] = (3.0 * f[l] + 10.0 * f[l - 1] - 18.0 * f[l - 2] + 6.0 * f[l - 3] - f[l - 4]) / s;
    d
}
