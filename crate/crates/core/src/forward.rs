//! Direct spectral problem.
//!
//! Solutions are integrated with classical fixed-step RK4 on the first-order
//! system `(y, y')`, with `y'' = (q - μ) y`. By default every trace is the
//! Richardson combination `(16 T_{h/2} - T_h) / 15` of two RK4 runs, which
//! cancels the `h⁴` term of the global error; [`ForwardSolver::plain`] turns
//! this off.
//!
//! Eigenvalues are located with the Prüfer angle `θ`, defined by
//! `y = r sin θ`, `y' = r cos θ`, `θ(0) = π - α`. `θ(π; μ)` increases with
//! `μ` and the `n`-th eigenvalue is the unique `μ` with
//! `θ(π; μ) = π - β + nπ`, which gives a guaranteed bracket per index.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{simpson, Grid};
use crate::types::{OperatorSpec, SpectralDatum, SpectrumTable};

/// Default number of solver intervals on `[0, π]`.
pub const DEFAULT_SOLVER_INTERVALS: usize = 2000;

/// `|Φ(μ)| ≤ ROOT_TOLERANCE (1 + |μ|)` accepts `μ` as a computed root.
pub const ROOT_TOLERANCE: f64 = 1e-8;

/// Looser bound used when a caller hands in an eigenvalue.
pub const EIGENVALUE_CHECK_TOLERANCE: f64 = 1e-6;

/// Bound on `|φ(π, μₙ) ψ(0, μₙ) - 1|`.
pub const KAPPA_SELF_CHECK_TOLERANCE: f64 = 1e-5;

/// Smallest admissible `|Φ̇(μₙ)|`.
pub const MIN_CHAR_SLOPE: f64 = 1e-6;

/// Root tests are relative to the solution size, which grows exponentially
/// for eigenfunctions pinned to an end by a large Robin cotangent.
fn trace_scale(t: &SolutionTrace) -> f64 {
    t.y.iter().fold(1.0, |m: f64, v| m.max(v.abs()))
}

const BISECTION_WIDTH: f64 = 1e-9;
const NEWTON_STEPS: usize = 3;
const MAX_EXPANSIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `φ`: `y(0) = 1`, `y'(0) = -cot α`.
    ForwardFromZero,
    /// `ψ`: `y(π) = 1`, `y'(π) = -cot β`.
    BackwardFromPi,
}

/// Samples of a solution and its derivative on the solver grid, in node
/// order regardless of the integration direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrace {
    pub grid: Grid,
    pub y: Vec<f64>,
    pub yprime: Vec<f64>,
    pub mu: f64,
    pub direction: Direction,
}

impl SolutionTrace {
    /// Number of sign changes of `y` strictly inside `(0, π)`.
    pub fn interior_zeros(&self) -> usize {
        count_sign_changes(&self.y)
    }

    /// Prüfer angle at `x = π` for a forward trace.
    pub fn prufer_end(&self) -> f64 {
        debug_assert_eq!(self.direction, Direction::ForwardFromZero);
        let zeros = self.interior_zeros();
        let sign = if zeros.is_multiple_of(2) { 1.0 } else { -1.0 };
        let m = self.y.len() - 1;
        let y = (sign * self.y[m]).abs();
        let yp = sign * self.yprime[m];
        zeros as f64 * PI + f64::atan2(y, yp)
    }

    /// `∫ y² dx` by composite Simpson.
    pub fn norm_squared(&self) -> Result<f64> {
        let sq: Vec<f64> = self.y.iter().map(|v| v * v).collect();
        simpson(self.grid, &sq)
    }
}

fn count_sign_changes(y: &[f64]) -> usize {
    let mut last = 0.0_f64;
    let mut count = 0;
    for &v in y {
        if v == 0.0 {
            continue;
        }
        let s = v.signum();
        if last != 0.0 && s != last {
            count += 1;
        }
        last = s;
    }
    count
}

/// Values of the characteristic functions at one `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicValue {
    pub mu: f64,
    /// `Φ(μ) = φ(π, μ) cot β + φ'(π, μ)`.
    pub phi_big: f64,
    /// `Ψ(μ) = ψ(0, μ) cot α + ψ'(0, μ)`.
    pub psi_big: Option<f64>,
    /// `dΦ/dμ`.
    pub phi_big_dot: Option<f64>,
}

/// `κₙ = φ(π, μₙ)` together with the residual of `κₙ ψ(0, μₙ) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub value: f64,
    pub psi_start: f64,
    pub self_check: f64,
}

/// Forward solver bound to one operator.
///
/// Construction samples the potential on the quarter-step lattice used by
/// the RK4 stages; all evaluation methods are pure and `Sync`.
#[derive(Debug, Clone)]
pub struct ForwardSolver<'a> {
    op: &'a OperatorSpec,
    lattice: Vec<f64>,
    extrapolate: bool,
}

impl<'a> ForwardSolver<'a> {
    pub fn new(op: &'a OperatorSpec) -> Self {
        Self::with_extrapolation(op, true)
    }

    /// Single RK4 pass per trace, no Richardson step.
    pub fn plain(op: &'a OperatorSpec) -> Self {
        Self::with_extrapolation(op, false)
    }

    fn with_extrapolation(op: &'a OperatorSpec, extrapolate: bool) -> Self {
        let grid = op.grid();
        let m = grid.intervals();
        let quarter = grid.step() / 4.0;
        let nodes = op.potential.values();
        let lattice = (0..=4 * m)
            .map(|k| {
                if k % 4 == 0 {
                    nodes[k / 4]
                } else {
                    op.potential.eval(k as f64 * quarter)
                }
            })
            .collect();
        Self {
            op,
            lattice,
            extrapolate,
        }
    }

    pub fn operator(&self) -> &OperatorSpec {
        self.op
    }

    pub fn grid(&self) -> Grid {
        self.op.grid()
    }

    /// RK4 with `refine` steps per grid interval, returning node samples.
    fn sweep(&self, mu: f64, refine: usize, direction: Direction) -> Result<(Vec<f64>, Vec<f64>)> {
        let grid = self.grid();
        let m = grid.intervals();
        let steps = m * refine;
        let stride = 4 / refine;
        let half = stride / 2;
        let h = grid.step() / refine as f64;
        let angles = self.op.angles;
        let (mut y, mut yp, dx, mut p) = match direction {
            Direction::ForwardFromZero => (1.0, -angles.cot_alpha(), h, 0usize),
            Direction::BackwardFromPi => (1.0, -angles.cot_beta(), -h, 4 * m),
        };
        let mut ys = vec![0.0; m + 1];
        let mut yps = vec![0.0; m + 1];
        let store = |ys: &mut [f64], yps: &mut [f64], step: usize, y: f64, yp: f64| {
            let node = step / refine;
            let idx = match direction {
                Direction::ForwardFromZero => node,
                Direction::BackwardFromPi => m - node,
            };
            ys[idx] = y;
            yps[idx] = yp;
        };
        store(&mut ys, &mut yps, 0, y, yp);
        let lat = &self.lattice;
        for step in 1..=steps {
            let (q0, qm, q1) = match direction {
                Direction::ForwardFromZero => {
                    let v = (lat[p], lat[p + half], lat[p + stride]);
                    p += stride;
                    v
                }
                Direction::BackwardFromPi => {
                    let v = (lat[p], lat[p - half], lat[p - stride]);
                    p -= stride;
                    v
                }
            };
            let (a0, am, a1) = (q0 - mu, qm - mu, q1 - mu);
            let k1y = yp;
            let k1p = a0 * y;
            let k2y = yp + 0.5 * dx * k1p;
            let k2p = am * (y + 0.5 * dx * k1y);
            let k3y = yp + 0.5 * dx * k2p;
            let k3p = am * (y + 0.5 * dx * k2y);
            let k4y = yp + dx * k3p;
            let k4p = a1 * (y + dx * k3y);
            y += dx / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
            yp += dx / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            if !(y.is_finite() && yp.is_finite()) {
                return Err(Error::IntegrationOverflow { mu, intervals: m });
            }
            if step % refine == 0 {
                store(&mut ys, &mut yps, step, y, yp);
            }
        }
        Ok((ys, yps))
    }

    fn trace(&self, mu: f64, direction: Direction) -> Result<SolutionTrace> {
        let (y, yprime) = if self.extrapolate {
            let (yc, ypc) = self.sweep(mu, 1, direction)?;
            let (mut yf, mut ypf) = self.sweep(mu, 2, direction)?;
            for (f, c) in yf.iter_mut().zip(&yc) {
                *f = (16.0 * *f - c) / 15.0;
            }
            for (f, c) in ypf.iter_mut().zip(&ypc) {
                *f = (16.0 * *f - c) / 15.0;
            }
            (yf, ypf)
        } else {
            self.sweep(mu, 1, direction)?
        };
        if y.iter().chain(&yprime).any(|v| !v.is_finite()) {
            return Err(Error::IntegrationOverflow {
                mu,
                intervals: self.grid().intervals(),
            });
        }
        Ok(SolutionTrace {
            grid: self.grid(),
            y,
            yprime,
            mu,
            direction,
        })
    }

    /// `φ(·, μ)` with `φ(0) = 1`, `φ'(0) = -cot α`.
    pub fn integrate_phi(&self, mu: f64) -> Result<SolutionTrace> {
        self.trace(mu, Direction::ForwardFromZero)
    }

    /// `ψ(·, μ)` with `ψ(π) = 1`, `ψ'(π) = -cot β`.
    pub fn integrate_psi(&self, mu: f64) -> Result<SolutionTrace> {
        self.trace(mu, Direction::BackwardFromPi)
    }

    fn phi_big_of(&self, t: &SolutionTrace) -> f64 {
        let m = t.y.len() - 1;
        t.y[m] * self.op.angles.cot_beta() + t.yprime[m]
    }

    fn psi_big_of(&self, t: &SolutionTrace) -> f64 {
        t.y[0] * self.op.angles.cot_alpha() + t.yprime[0]
    }

    pub fn phi_big(&self, mu: f64) -> Result<f64> {
        Ok(self.phi_big_of(&self.integrate_phi(mu)?))
    }

    pub fn psi_big(&self, mu: f64) -> Result<f64> {
        Ok(self.psi_big_of(&self.integrate_psi(mu)?))
    }

    pub fn char_phi(&self, mu: f64) -> Result<CharacteristicValue> {
        Ok(CharacteristicValue {
            mu,
            phi_big: self.phi_big(mu)?,
            psi_big: None,
            phi_big_dot: None,
        })
    }

    pub fn char_psi(&self, mu: f64) -> Result<CharacteristicValue> {
        Ok(CharacteristicValue {
            mu,
            phi_big: self.phi_big(mu)?,
            psi_big: Some(self.psi_big(mu)?),
            phi_big_dot: None,
        })
    }

    /// Both characteristic functions and `Φ̇`.
    pub fn characteristic(&self, mu: f64) -> Result<CharacteristicValue> {
        Ok(CharacteristicValue {
            mu,
            phi_big: self.phi_big(mu)?,
            psi_big: Some(self.psi_big(mu)?),
            phi_big_dot: Some(self.char_derivative(mu)?),
        })
    }

    /// `Φ̇(μ)` by central differences with step `max(1e-5, 1e-5 |μ|)`.
    pub fn char_derivative(&self, mu: f64) -> Result<f64> {
        let h = mu_step(mu);
        Ok((self.phi_big(mu + h)? - self.phi_big(mu - h)?) / (2.0 * h))
    }

    /// `Ψ̇(μ)`, same stencil as [`char_derivative`](Self::char_derivative).
    pub fn char_psi_derivative(&self, mu: f64) -> Result<f64> {
        let h = mu_step(mu);
        Ok((self.psi_big(mu + h)? - self.psi_big(mu - h)?) / (2.0 * h))
    }

    fn check_eigenvalue(&self, mu: f64, big: f64, t: &SolutionTrace) -> Result<()> {
        if big.abs() > EIGENVALUE_CHECK_TOLERANCE * (1.0 + mu.abs()) * trace_scale(t) {
            return Err(Error::NotAnEigenvalue { mu, residual: big.abs() });
        }
        Ok(())
    }

    /// `aₙ = ∫ φ(x, μₙ)² dx`.
    pub fn norming_constant_a(&self, mu_n: f64) -> Result<f64> {
        let t = self.integrate_phi(mu_n)?;
        self.check_eigenvalue(mu_n, self.phi_big_of(&t), &t)?;
        t.norm_squared()
    }

    /// `bₙ = ∫ ψ(x, μₙ)² dx`.
    pub fn norming_constant_b(&self, mu_n: f64) -> Result<f64> {
        let t = self.integrate_psi(mu_n)?;
        self.check_eigenvalue(mu_n, self.psi_big_of(&t), &t)?;
        t.norm_squared()
    }

    pub fn kappa(&self, mu_n: f64) -> Result<Kappa> {
        let phi = self.integrate_phi(mu_n)?;
        self.check_eigenvalue(mu_n, self.phi_big_of(&phi), &phi)?;
        let psi = self.integrate_psi(mu_n)?;
        let value = phi.y[phi.y.len() - 1];
        let psi_start = psi.y[0];
        let self_check = (value * psi_start - 1.0).abs();
        if self_check > KAPPA_SELF_CHECK_TOLERANCE {
            return Err(Error::Consistency(format!(
                "phi(pi) * psi(0) = {} at mu = {mu_n}; eigenvalue tolerance too loose",
                value * psi_start
            )));
        }
        Ok(Kappa {
            value,
            psi_start,
            self_check,
        })
    }

    /// Signed distance of the Prüfer angle at `π` from the `n`-th target.
    fn prufer_offset(&self, mu: f64, n: usize) -> Result<f64> {
        let t = self.integrate_phi(mu)?;
        Ok(t.prufer_end() - (PI - self.op.beta()) - n as f64 * PI)
    }

    /// Initial window `[min q - cot²α - cot²β - 1, (n_max + 2)² + max q + 1]`.
    pub fn search_window(&self, n_max: usize) -> (f64, f64) {
        let a = self.op.angles;
        let p = &self.op.potential;
        let lo = p.min() - a.cot_alpha().powi(2) - a.cot_beta().powi(2) - 1.0;
        let hi = ((n_max + 2) as f64).powi(2) + p.max() + 1.0;
        (lo, hi)
    }

    fn bracket(&self, n_max: usize) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = self.search_window(n_max);
        let mut width = hi - lo;
        let below = |mu: f64| -> Result<bool> { Ok(self.prufer_offset(mu, 0)? < 0.0) };
        let mut ok = false;
        for _ in 0..MAX_EXPANSIONS {
            match below(lo) {
                Ok(true) => {
                    ok = true;
                    break;
                }
                Ok(false) => {
                    lo -= width;
                    width *= 2.0;
                }
                Err(_) => break,
            }
        }
        if !ok {
            return Err(Error::SearchFailure { index: 0 });
        }
        let mut width = hi - lo;
        for _ in 0..MAX_EXPANSIONS {
            if self.prufer_offset(hi, n_max)? > 0.0 {
                return Ok((lo, hi));
            }
            hi += width;
            width *= 2.0;
        }
        Err(Error::SearchFailure { index: n_max })
    }

    fn locate(&self, n: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
        while hi - lo > BISECTION_WIDTH * (1.0 + lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.prufer_offset(mid, n)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut mu = 0.5 * (lo + hi);
        let mut best = self.phi_big(mu)?.abs();
        for _ in 0..NEWTON_STEPS {
            let slope = self.char_derivative(mu)?;
            if slope == 0.0 {
                break;
            }
            let next = mu - self.phi_big(mu)? / slope;
            if !(next > lo - BISECTION_WIDTH && next < hi + BISECTION_WIDTH) {
                break;
            }
            let val = self.phi_big(next)?.abs();
            if val > best {
                break;
            }
            mu = next;
            best = val;
        }
        if best > ROOT_TOLERANCE * (1.0 + mu.abs()) * trace_scale(&self.integrate_phi(mu)?) {
            return Err(Error::Consistency(format!(
                "eigenvalue {n} at mu = {mu} leaves |Phi| = {best:e}"
            )));
        }
        Ok(mu)
    }

    fn datum(&self, n: usize, mu: f64, with_b: bool) -> Result<SpectralDatum> {
        let phi = self.integrate_phi(mu)?;
        let zeros = phi.interior_zeros();
        if zeros != n {
            return Err(Error::Consistency(format!(
                "eigenfunction {n} has {zeros} interior zeros"
            )));
        }
        let slope = self.char_derivative(mu)?;
        if slope.abs() < MIN_CHAR_SLOPE {
            return Err(Error::Consistency(format!(
                "|dPhi/dmu| = {:e} at eigenvalue {n}",
                slope.abs()
            )));
        }
        let a = phi.norm_squared()?;
        let phi_end = phi.y[phi.y.len() - 1];
        let b = if with_b {
            Some(self.integrate_psi(mu)?.norm_squared()?)
        } else {
            None
        };
        Ok(SpectralDatum {
            n,
            mu,
            a,
            b,
            phi_end,
            kappa: phi_end,
        })
    }

    /// `μ₀ < … < μ_{n_max}` with `a`, `φ(π)` and `κ`.
    pub fn eigenvalues(&self, n_max: usize) -> Result<SpectrumTable> {
        self.spectrum(n_max, false)
    }

    /// Like [`eigenvalues`](Self::eigenvalues), optionally also computing `bₙ`.
    pub fn spectrum(&self, n_max: usize, with_b: bool) -> Result<SpectrumTable> {
        if !self.grid().is_even() {
            return Err(Error::InvalidGrid(
                "solver grid needs an even interval count".into(),
            ));
        }
        let (lo, hi) = self.bracket(n_max)?;
        let data = (0..=n_max)
            .into_par_iter()
            .map(|n| {
                let mu = self.locate(n, lo, hi)?;
                self.datum(n, mu, with_b)
            })
            .collect::<Result<Vec<_>>>()?;
        SpectrumTable::new(data)
    }
}

fn mu_step(mu: f64) -> f64 {
    f64::max(1e-5, 1e-5 * mu.abs())
}

pub fn integrate_phi(op: &OperatorSpec, mu: f64) -> Result<SolutionTrace> {
    ForwardSolver::new(op).integrate_phi(mu)
}

pub fn integrate_psi(op: &OperatorSpec, mu: f64) -> Result<SolutionTrace> {
    ForwardSolver::new(op).integrate_psi(mu)
}

pub fn char_phi(op: &OperatorSpec, mu: f64) -> Result<CharacteristicValue> {
    ForwardSolver::new(op).char_phi(mu)
}

pub fn char_psi(op: &OperatorSpec, mu: f64) -> Result<CharacteristicValue> {
    ForwardSolver::new(op).char_psi(mu)
}

pub fn char_derivative(op: &OperatorSpec, mu: f64) -> Result<f64> {
    ForwardSolver::new(op).char_derivative(mu)
}

pub fn eigenvalues(op: &OperatorSpec, n_max: usize) -> Result<SpectrumTable> {
    ForwardSolver::new(op).eigenvalues(n_max)
}

pub fn norming_constant_a(op: &OperatorSpec, mu_n: f64) -> Result<f64> {
    ForwardSolver::new(op).norming_constant_a(mu_n)
}

pub fn norming_constant_b(op: &OperatorSpec, mu_n: f64) -> Result<f64> {
    ForwardSolver::new(op).norming_constant_b(mu_n)
}

pub fn kappa(op: &OperatorSpec, mu_n: f64) -> Result<Kappa> {
    ForwardSolver::new(op).kappa(mu_n)
}
