//! Domain types shared by the forward solver, the Gelfand-Levitan engine
//! and the certificates.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{CubicSpline, Grid};

/// Cotangent with an exact zero at `π/2`.
pub fn cot(angle: f64) -> f64 {
    if angle == PI / 2.0 {
        0.0
    } else {
        1.0 / angle.tan()
    }
}

/// Inverse cotangent with values in `(0, π)`.
pub fn arccot(value: f64) -> f64 {
    f64::atan2(1.0, value)
}

/// Robin boundary angles `(α, β)`, both strictly inside `(0, π)`.
///
/// The left condition reads `y(0) cot α + y'(0) = 0`, the right one
/// `y(π) cot β + y'(π) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinAngles {
    alpha: f64,
    beta: f64,
}

impl RobinAngles {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        check_angle("alpha", alpha)?;
        check_angle("beta", beta)?;
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn cot_alpha(&self) -> f64 {
        cot(self.alpha)
    }

    pub fn cot_beta(&self) -> f64 {
        cot(self.beta)
    }

    /// Angles of the operator reflected about `x = π/2`. The derivative
    /// changes sign, so each cotangent flips as well as moving ends.
    pub fn reflected(&self) -> Self {
        Self {
            alpha: PI - self.beta,
            beta: PI - self.alpha,
        }
    }
}

fn check_angle(field: &str, angle: f64) -> Result<()> {
    if !(angle.is_finite() && angle > 0.0 && angle < PI) {
        return Err(Error::schema(
            field,
            format!("angle must lie strictly inside (0, pi), got {angle}"),
        ));
    }
    if !cot(angle).is_finite() {
        return Err(Error::schema(field, "cotangent is not finite"));
    }
    Ok(())
}

/// Potential sampled on a grid; off-node values come from a natural cubic
/// spline.
#[derive(Debug, Clone)]
pub struct Potential {
    spline: CubicSpline,
    values: Vec<f64>,
}

impl Potential {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::schema(
                "potential",
                format!("expected {} samples, got {}", grid.len(), values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::schema(
                "potential",
                format!("sample {i} is not finite"),
            ));
        }
        Ok(Self {
            spline: CubicSpline::new(grid, &values),
            values,
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn zero(grid: Grid) -> Self {
        Self::new(grid, vec![0.0; grid.len()]).expect("zero potential is valid")
    }

    pub fn grid(&self) -> Grid {
        self.spline.grid()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.spline.eval(x)
    }

    pub fn resample(&self, grid: Grid) -> Self {
        Self::new(grid, self.spline.resample(grid)).expect("spline samples are finite")
    }

    /// `x ↦ q(π - x)` on the same grid.
    pub fn reflected(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self::new(self.grid(), values).expect("reflection keeps samples finite")
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest node difference after bringing `other` onto this grid.
    pub fn max_abs_diff(&self, other: &Potential) -> f64 {
        let other = other.spline.resample(self.grid());
        self.values
            .iter()
            .zip(&other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl PartialEq for Potential {
    fn eq(&self, other: &Self) -> bool {
        self.grid() == other.grid() && self.values == other.values
    }
}

/// One boundary value problem `L(q, α, β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub potential: Potential,
    pub angles: RobinAngles,
}

impl OperatorSpec {
    pub fn new(potential: Potential, angles: RobinAngles) -> Self {
        Self { potential, angles }
    }

    pub fn grid(&self) -> Grid {
        self.potential.grid()
    }

    pub fn alpha(&self) -> f64 {
        self.angles.alpha()
    }

    pub fn beta(&self) -> f64 {
        self.angles.beta()
    }

    /// `L(q(π - ·), π - β, π - α)`, which has the same spectrum.
    pub fn reflected(&self) -> Self {
        Self {
            potential: self.potential.reflected(),
            angles: self.angles.reflected(),
        }
    }
}

/// Spectral data attached to one eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDatum {
    pub n: usize,
    pub mu: f64,
    /// `∫ φ(x, μ)² dx`.
    pub a: f64,
    /// `∫ ψ(x, μ)² dx`, when requested.
    pub b: Option<f64>,
    /// `φ(π, μ)`.
    pub phi_end: f64,
    /// Ratio `φ(·, μ) / ψ(·, μ)`; equal to `phi_end`.
    pub kappa: f64,
}

impl SpectralDatum {
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("spectrum[{}].{name}", self.n);
        if !self.mu.is_finite() {
            return Err(Error::schema(field("mu"), "not finite"));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::schema(field("a"), "norming constant must be positive"));
        }
        if let Some(b) = self.b {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::schema(field("b"), "norming constant must be positive"));
            }
        }
        if !self.phi_end.is_finite() {
            return Err(Error::schema(field("phi_end"), "not finite"));
        }
        if !(self.kappa.is_finite() && self.kappa != 0.0) {
            return Err(Error::schema(field("kappa"), "must be finite and nonzero"));
        }
        if self.kappa != self.phi_end {
            return Err(Error::schema(field("kappa"), "must equal phi_end"));
        }
        Ok(())
    }
}

/// Prefix `μ₀ < μ₁ < … < μ_N` of a spectrum with its data.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    data: Vec<SpectralDatum>,
}

impl SpectrumTable {
    pub fn new(data: Vec<SpectralDatum>) -> Result<Self> {
        for (i, d) in data.iter().enumerate() {
            if d.n != i {
                return Err(Error::InvalidSpectrum(format!(
                    "indices must be contiguous from 0; position {i} holds n = {}",
                    d.n
                )));
            }
            d.validate()?;
        }
        for w in data.windows(2) {
            if w[1].mu <= w[0].mu {
                return Err(Error::InvalidSpectrum(format!(
                    "eigenvalues must strictly increase: mu[{}] = {} after mu[{}] = {}",
                    w[1].n, w[1].mu, w[0].n, w[0].mu
                )));
            }
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &[SpectralDatum] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, n: usize) -> Option<&SpectralDatum> {
        self.data.get(n)
    }

    pub fn mus(&self) -> Vec<f64> {
        self.data.iter().map(|d| d.mu).collect()
    }

    pub fn norming(&self) -> Vec<f64> {
        self.data.iter().map(|d| d.a).collect()
    }

    /// Appends the next eigenvalue, rejecting anything that would break the
    /// ordering.
    pub fn push(&mut self, datum: SpectralDatum) -> Result<()> {
        if datum.n != self.data.len() {
            return Err(Error::InvalidSpectrum(format!(
                "expected index {}, got {}",
                self.data.len(),
                datum.n
            )));
        }
        datum.validate()?;
        if let Some(last) = self.data.last() {
            if datum.mu <= last.mu {
                return Err(Error::InvalidSpectrum(format!(
                    "eigenvalue {} does not exceed {}",
                    datum.mu, last.mu
                )));
            }
        }
        self.data.push(datum);
        Ok(())
    }
}

/// Finitely supported real sequence `c₀, …, c_N` (zero beyond `N`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerturbationSeq {
    coeffs: Vec<f64>,
}

impl PerturbationSeq {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::schema(format!("coeffs[{i}]"), "not finite"));
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a sequence from `(n, c)` pairs; repeated indices accumulate.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let len = pairs.iter().map(|(n, _)| n + 1).max().unwrap_or(0);
        let mut coeffs = vec![0.0; len];
        for &(n, c) in pairs {
            coeffs[n] += c;
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    /// Indices with nonzero coefficients.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, c)| *c != 0.0)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.support().map(|(n, _)| n).last()
    }

    pub fn is_zero(&self) -> bool {
        self.support().next().is_none()
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// Checks `1 + cₙ aₙ⁰ > 0` on the support against a base spectrum.
    pub fn check_admissible(&self, base: &SpectrumTable) -> Result<()> {
        for (n, c) in self.support() {
            let datum = base.get(n).ok_or(Error::Coverage {
                index: n,
                available: base.len().saturating_sub(1),
            })?;
            let value = 1.0 + c * datum.a;
            if !(value > 0.0) {
                return Err(Error::Inadmissible { index: n, value });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn datum(n: usize, mu: f64) -> SpectralDatum {
        SpectralDatum {
            n,
            mu,
            a: 1.0,
            b: None,
            phi_end: 1.0,
            kappa: 1.0,
        }
    }

    #[test]
    fn angles_must_be_interior() {
        assert!(RobinAngles::new(PI / 2.0, PI / 2.0).is_ok());
        for bad in [0.0, PI, -0.1, 4.0, f64::NAN] {
            let err = RobinAngles::new(1.0, bad).unwrap_err();
            assert!(matches!(err, Error::Schema { ref field, .. } if field == "beta"));
        }
        assert!(RobinAngles::new(0.0, 1.0).is_err());
    }

    #[test]
    fn cot_is_exact_at_right_angle() {
        assert_eq!(cot(PI / 2.0), 0.0);
        assert_eq!(arccot(1.0), PI / 4.0);
        assert_eq!(arccot(0.0), PI / 2.0);
        assert!((arccot(-1.0) - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn spectrum_rejects_duplicates_and_gaps() {
        assert!(SpectrumTable::new(vec![datum(0, 0.0), datum(1, 1.0)]).is_ok());
        assert!(SpectrumTable::new(vec![datum(0, 0.0), datum(1, 0.0)]).is_err());
        assert!(SpectrumTable::new(vec![datum(0, 0.0), datum(2, 1.0)]).is_err());
        let mut t = SpectrumTable::new(vec![datum(0, 0.0)]).unwrap();
        assert!(t.push(datum(1, 0.0)).is_err());
        assert!(t.push(datum(1, 2.0)).is_ok());
    }

    #[test]
    fn spectral_datum_invariants() {
        let mut d = datum(0, 1.0);
        d.a = 0.0;
        assert!(d.validate().is_err());
        let mut d = datum(0, 1.0);
        d.kappa = 0.5;
        assert!(d.validate().is_err());
        let mut d = datum(0, 1.0);
        d.b = Some(-1.0);
        assert!(d.validate().is_err());
    }

    #[test]
    fn admissibility_names_first_violation() {
        let base = SpectrumTable::new(vec![
            SpectralDatum { a: PI, ..datum(0, 0.0) },
            SpectralDatum { a: PI / 2.0, ..datum(1, 1.0) },
        ])
        .unwrap();
        let c = PerturbationSeq::new(vec![0.1, -2.0 / PI]).unwrap();
        match c.check_admissible(&base).unwrap_err() {
            Error::Inadmissible { index, .. } => assert_eq!(index, 1),
            e => panic!("{e}"),
        }
        let c = PerturbationSeq::from_pairs(&[(3, 0.1)]).unwrap();
        assert!(matches!(
            c.check_admissible(&base),
            Err(Error::Coverage { index: 3, .. })
        ));
    }

    #[test]
    fn potential_reflection_and_diff() {
        let g = Grid::new(16).unwrap();
        let p = Potential::from_fn(g, |x| x).unwrap();
        let r = p.reflected();
        assert!((r.values()[0] - PI).abs() < 1e-15);
        assert!((p.max_abs_diff(&r) - PI).abs() < 1e-12);
        assert!(Potential::new(g, vec![0.0; 3]).is_err());
        let mut v = vec![0.0; 17];
        v[4] = f64::INFINITY;
        assert!(Potential::new(g, v).is_err());
    }
}
