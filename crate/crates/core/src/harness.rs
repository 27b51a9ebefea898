//! Numerical certificates for Marchenko-type uniqueness, the Ambarzumyan
//! generalization and Levinson's even-operator criterion.
//!
//! Each certificate evaluates the finite identities the corresponding
//! argument rests on, over the indices `0..=n_max`, and grades every
//! residual against its tolerance:
//!
//! * within the tolerance: consistent,
//! * within ten times the tolerance: inconclusive,
//! * beyond that: failed.
//!
//! A report passes only if every toleranced residual is within tolerance.
//! Sums over truncated index ranges carry the magnitude of their last term
//! as a tail estimate; when it exceeds a tenth of the tolerance a passing
//! verdict is downgraded to inconclusive.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ForwardSolver;
use crate::gelfand_levitan::{construct, ConstructOptions};
use crate::grid::Grid;
use crate::io::{from_json_str, to_pretty_json};
use crate::types::{OperatorSpec, PerturbationSeq, Potential, RobinAngles, SpectrumTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "thm1_2")]
    Thm1_2,
    #[serde(rename = "thm1_4")]
    Thm1_4,
    #[serde(rename = "thm5_2")]
    Thm5_2,
    #[serde(rename = "levinson")]
    Levinson,
    #[serde(rename = "marchenko_consistency")]
    MarchenkoConsistency,
    #[serde(rename = "kappa_relations")]
    KappaRelations,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [
        TheoremId::Thm1_2,
        TheoremId::Thm1_4,
        TheoremId::Thm5_2,
        TheoremId::Levinson,
        TheoremId::MarchenkoConsistency,
        TheoremId::KappaRelations,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::Thm1_2 => "thm1_2",
            TheoremId::Thm1_4 => "thm1_4",
            TheoremId::Thm5_2 => "thm5_2",
            TheoremId::Levinson => "levinson",
            TheoremId::MarchenkoConsistency => "marchenko_consistency",
            TheoremId::KappaRelations => "kappa_relations",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Schema {
                field: "theorem".into(),
                message: format!("unknown theorem id `{s}`"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportFlags {
    pub hypothesis_violated: bool,
    /// The data differences are not one-signed, so the uniqueness theorem
    /// does not apply.
    pub one_sidedness_violated: bool,
    pub tail_limited: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub even: Option<bool>,
}

/// Outcome of one certificate. Residuals without an entry in `tolerances`
/// are reported for corroboration only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateReport {
    pub theorem_id: TheoremId,
    pub verdict: Verdict,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub flags: ReportFlags,
    pub details: String,
}

impl CertificateReport {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.get(name).copied()
    }

    pub fn is_pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Names of toleranced residuals that exceed their tolerance.
    pub fn violations(&self) -> Vec<&str> {
        self.tolerances
            .iter()
            .filter(|(name, tol)| !(self.residuals[name.as_str()] <= **tol))
            .map(|(name, _)| name.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        to_pretty_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        from_json_str(text)
    }
}

/// Turns a hypothesis violation into a failed report; other errors are
/// passed through.
pub fn hypothesis_failure(id: TheoremId, err: Error) -> Result<CertificateReport> {
    match err.root() {
        Error::Hypothesis(message) => Ok(CertificateReport {
            theorem_id: id,
            verdict: Verdict::Fail,
            residuals: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            flags: ReportFlags {
                hypothesis_violated: true,
                ..ReportFlags::default()
            },
            details: format!("hypothesis violated: {message}"),
        }),
        _ => Err(err),
    }
}

/// Tolerances shared by all certificates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute, on eigenvalues.
    pub iso: f64,
    /// Relative, on norming constants and `|κₙ|`.
    pub norming: f64,
    /// Theorem sums, multiplied by `Σ|termₙ| + 1`.
    pub sum: f64,
    /// Relative, on the characteristic-function identities.
    pub kappa: f64,
    /// `max |φ(π, μₙ) - (-1)ⁿ|` for even operators.
    pub levinson_end: f64,
    /// Smallest `max |φ(π, μₙ) - (-1)ⁿ|` accepted as evidence of asymmetry.
    pub asymmetry: f64,
    /// Node symmetry of `q` and `|α + β - π|` below which an operator is even.
    pub symmetry: f64,
    /// Boundary angles fixed by a theorem's hypothesis.
    pub hypothesis: f64,
    /// Node difference of potentials required by uniqueness conclusions.
    pub potential: f64,
    /// Boundary-angle difference required by uniqueness conclusions.
    pub angle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            iso: 5e-5,
            norming: 1e-4,
            sum: 1e-6,
            kappa: 1e-4,
            levinson_end: 1e-5,
            asymmetry: 1e-2,
            symmetry: 1e-10,
            hypothesis: 1e-10,
            potential: 1e-3,
            angle: 1e-6,
        }
    }
}

impl Tolerances {
    /// `(name, value, meaning)` rows, in flag order.
    pub fn table(&self) -> Vec<(&'static str, f64, &'static str)> {
        vec![
            ("iso", self.iso, "absolute eigenvalue mismatch"),
            ("norming", self.norming, "relative norming-constant / |kappa| mismatch"),
            ("sum", self.sum, "theorem sums, scaled by sum|term| + 1"),
            ("kappa", self.kappa, "relative characteristic-function identities"),
            ("levinson-end", self.levinson_end, "max |phi(pi, mu_n) - (-1)^n| for even operators"),
            ("asymmetry", self.asymmetry, "end deviation accepted as evidence of asymmetry"),
            ("symmetry", self.symmetry, "max |q(x) - q(pi - x)| and |alpha + beta - pi| for even"),
            ("hypothesis", self.hypothesis, "boundary angles fixed by a hypothesis"),
            ("potential", self.potential, "max |q - q0| in uniqueness conclusions"),
            ("angle", self.angle, "boundary-angle difference in uniqueness conclusions"),
        ]
    }
}

/// Which boundary angle the uniqueness hypothesis fixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedAngle {
    #[default]
    Alpha,
    Beta,
}

/// Spectral quantity compared by the Marchenko-type certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `aₙ` for [`thm12_certificate`], `|κₙ|` for [`thm52_certificate`].
    #[default]
    Primary,
    /// `bₙ` for [`thm12_certificate`], `|ψ(0, μₙ)|` for
    /// [`thm52_certificate`]. Only one-sidedness and direct comparison are
    /// checked; no sum formula is available.
    Mirror,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UniquenessOptions {
    pub fixed: FixedAngle,
    pub quantity: Quantity,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Grade {
    Within,
    Band,
    Beyond,
}

fn grade(value: f64, tol: f64) -> Grade {
    if value <= tol {
        Grade::Within
    } else if value <= 10.0 * tol {
        Grade::Band
    } else {
        Grade::Beyond
    }
}

struct Builder {
    id: TheoremId,
    residuals: BTreeMap<String, f64>,
    tolerances: BTreeMap<String, f64>,
    flags: ReportFlags,
    notes: Vec<String>,
}

impl Builder {
    fn new(id: TheoremId) -> Self {
        Self {
            id,
            residuals: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            flags: ReportFlags::default(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, value: f64, tol: f64) -> Grade {
        self.residuals.insert(name.into(), value);
        self.tolerances.insert(name.into(), tol);
        grade(value, tol)
    }

    fn info(&mut self, name: &str, value: f64) {
        self.residuals.insert(name.into(), value);
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    fn finish(self, verdict: Verdict) -> CertificateReport {
        CertificateReport {
            theorem_id: self.id,
            verdict,
            residuals: self.residuals,
            tolerances: self.tolerances,
            flags: self.flags,
            details: self.notes.join("; "),
        }
    }
}

fn verdict_of(worst: Grade) -> Verdict {
    match worst {
        Grade::Within => Verdict::Pass,
        Grade::Band => Verdict::Inconclusive,
        Grade::Beyond => Verdict::Fail,
    }
}

fn downgrade(v: Verdict) -> Verdict {
    match v {
        Verdict::Pass => Verdict::Inconclusive,
        other => other,
    }
}

fn spectra(base: &OperatorSpec, candidate: &OperatorSpec, n_max: usize, with_b: bool) -> Result<(SpectrumTable, SpectrumTable)> {
    let (b, c) = rayon::join(
        || ForwardSolver::new(base).spectrum(n_max, with_b),
        || ForwardSolver::new(candidate).spectrum(n_max, with_b),
    );
    Ok((b?, c?))
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn iso_residual(base: &SpectrumTable, candidate: &SpectrumTable) -> f64 {
    max_abs(base.data().iter().zip(candidate.data()).map(|(b, c)| c.mu - b.mu))
}

/// `min(max positive part, max negative part)` of relative differences:
/// zero exactly when the differences share one sign.
fn one_sidedness(diffs: &[f64]) -> (f64, &'static str) {
    let up = diffs.iter().fold(0.0_f64, |m, d| m.max(*d));
    let down = diffs.iter().fold(0.0_f64, |m, d| m.max(-*d));
    if up >= down {
        (down, ">=")
    } else {
        (up, "<=")
    }
}

fn check_fixed_angle(base: &OperatorSpec, candidate: &OperatorSpec, fixed: FixedAngle, tol: f64) -> Result<()> {
    let (name, b, c) = match fixed {
        FixedAngle::Alpha => ("alpha", base.alpha(), candidate.alpha()),
        FixedAngle::Beta => ("beta", base.beta(), candidate.beta()),
    };
    if (b - c).abs() > tol {
        return Err(Error::Hypothesis(format!(
            "{name} must be shared: base {b}, candidate {c} (difference {:e} > {tol:e})",
            (b - c).abs()
        )));
    }
    Ok(())
}

fn corroborate(b: &mut Builder, base: &OperatorSpec, candidate: &OperatorSpec) {
    b.info("max_potential_difference", base.potential.max_abs_diff(&candidate.potential));
    b.info("alpha_difference", (base.alpha() - candidate.alpha()).abs());
    b.info("beta_difference", (base.beta() - candidate.beta()).abs());
}

/// Grades isospectrality, one-sidedness and the vanishing sum shared by the
/// Marchenko-type certificates.
struct SumCheck<'a> {
    name: &'a str,
    terms: Vec<f64>,
}

fn finish_uniqueness(
    mut b: Builder,
    iso: f64,
    diffs: &[f64],
    sum: Option<SumCheck>,
    tol: &Tolerances,
) -> CertificateReport {
    let mut worst = b.check("isospectrality", iso, tol.iso);
    let (gap, orientation) = one_sidedness(diffs);
    let one_sided = b.check("one_sidedness", gap, tol.norming) == Grade::Within;
    b.info("max_relative_difference", max_abs(diffs.iter().copied()));
    let mut tail_limited = false;
    match sum {
        Some(SumCheck { name, terms }) => {
            let total: f64 = terms.iter().sum();
            let scale = 1.0 + terms.iter().map(|t| t.abs()).sum::<f64>();
            let sum_tol = tol.sum * scale;
            worst = worst.max(b.check(name, total.abs(), sum_tol));
            let tail = terms.last().map_or(0.0, |t| t.abs());
            b.info("tail_estimate", tail);
            tail_limited = tail > 0.1 * sum_tol;
        }
        None => {
            worst = worst.max(b.check(
                "max_relative_difference",
                max_abs(diffs.iter().copied()),
                tol.norming,
            ));
        }
    }
    let mut verdict = verdict_of(worst);
    if !one_sided {
        b.flags.one_sidedness_violated = true;
        b.note(format!(
            "differences change sign (minority part {gap:e}); the uniqueness hypothesis does not hold"
        ));
        verdict = downgrade(verdict);
    } else {
        b.note(format!("differences are one-sided ({orientation} 0)"));
    }
    if tail_limited {
        b.flags.tail_limited = true;
        b.note("last term of the truncated sum exceeds a tenth of the tolerance");
        verdict = downgrade(verdict);
    }
    if verdict == Verdict::Pass {
        b.note("data consistent with coinciding spectral data, q = q0 and equal boundary angles");
    }
    b.finish(verdict)
}

/// Uniqueness from one spectrum and one-sided norming constants.
pub fn thm12_certificate(base: &OperatorSpec, candidate: &OperatorSpec, n_max: usize) -> Result<CertificateReport> {
    thm12_certificate_with(base, candidate, n_max, &Tolerances::default(), UniquenessOptions::default())
}

pub fn thm12_certificate_with(
    base: &OperatorSpec,
    candidate: &OperatorSpec,
    n_max: usize,
    tol: &Tolerances,
    opts: UniquenessOptions,
) -> Result<CertificateReport> {
    check_fixed_angle(base, candidate, opts.fixed, tol.hypothesis)?;
    let mirror = opts.quantity == Quantity::Mirror;
    let (s0, s1) = spectra(base, candidate, n_max, mirror)?;
    let mut b = Builder::new(TheoremId::Thm1_2);
    let iso = iso_residual(&s0, &s1);
    let value = |d: &crate::types::SpectralDatum| if mirror { d.b.unwrap_or(f64::NAN) } else { d.a };
    let diffs: Vec<f64> = s0
        .data()
        .iter()
        .zip(s1.data())
        .map(|(d0, d1)| (value(d1) - value(d0)) / value(d0))
        .collect();
    corroborate(&mut b, base, candidate);
    let sum = if mirror {
        b.note("b_n variant: one-sidedness and direct comparison only");
        None
    } else {
        let c: Vec<f64> = s0.data().iter().zip(s1.data()).map(|(d0, d1)| 1.0 / d1.a - 1.0 / d0.a).collect();
        b.info("max_implied_c", max_abs(c.iter().copied()));
        // The angle not held fixed is predicted by the other update formula.
        let (terms, predicted_name, predicted_gap) = match opts.fixed {
            FixedAngle::Alpha => {
                let cot_beta = base.angles.cot_beta()
                    + s0.data()
                        .iter()
                        .zip(s1.data())
                        .map(|(d0, d1)| (d0.a - d1.a) * d0.phi_end * d0.phi_end / (d0.a * d0.a))
                        .sum::<f64>();
                (c.clone(), "norming_cot_beta_gap", (cot_beta - candidate.angles.cot_beta()).abs())
            }
            FixedAngle::Beta => {
                let terms: Vec<f64> = s0
                    .data()
                    .iter()
                    .zip(s1.data())
                    .map(|(d0, d1)| (d0.a - d1.a) * d0.phi_end * d0.phi_end / (d0.a * d0.a))
                    .collect();
                let cot_alpha = base.angles.cot_alpha() + c.iter().sum::<f64>();
                (terms, "norming_cot_alpha_gap", (cot_alpha - candidate.angles.cot_alpha()).abs())
            }
        };
        b.info(predicted_name, predicted_gap);
        Some(SumCheck {
            name: match opts.fixed {
                FixedAngle::Alpha => "sum_implied_c",
                FixedAngle::Beta => "sum_beta_update",
            },
            terms,
        })
    };
    Ok(finish_uniqueness(b, iso, &diffs, sum, tol))
}

/// Uniqueness from one spectrum and one-sided `|κₙ|`.
pub fn thm52_certificate(base: &OperatorSpec, candidate: &OperatorSpec, n_max: usize) -> Result<CertificateReport> {
    thm52_certificate_with(base, candidate, n_max, &Tolerances::default(), UniquenessOptions::default())
}

pub fn thm52_certificate_with(
    base: &OperatorSpec,
    candidate: &OperatorSpec,
    n_max: usize,
    tol: &Tolerances,
    opts: UniquenessOptions,
) -> Result<CertificateReport> {
    check_fixed_angle(base, candidate, opts.fixed, tol.hypothesis)?;
    let (s0, s1) = spectra(base, candidate, n_max, false)?;
    let mut b = Builder::new(TheoremId::Thm5_2);
    let iso = iso_residual(&s0, &s1);
    let k0: Vec<f64> = s0.data().iter().map(|d| d.kappa.abs()).collect();
    let k1: Vec<f64> = s1.data().iter().map(|d| d.kappa.abs()).collect();
    corroborate(&mut b, base, candidate);
    let (diffs, sum): (Vec<f64>, _) = match opts.quantity {
        Quantity::Mirror => {
            b.note("psi(0, mu_n) variant: one-sidedness and direct comparison only");
            let diffs = k0.iter().zip(&k1).map(|(k0, k1)| (1.0 / k1 - 1.0 / k0) * k0).collect();
            (diffs, None)
        }
        Quantity::Primary => {
            let solver = ForwardSolver::new(base);
            let dots = s0
                .data()
                .iter()
                .map(|d| Ok(solver.char_derivative(d.mu)?.abs()))
                .collect::<Result<Vec<f64>>>()?;
            let alpha_terms: Vec<f64> = (0..k0.len()).map(|n| (1.0 / k1[n] - 1.0 / k0[n]) / dots[n]).collect();
            let beta_terms: Vec<f64> = (0..k0.len()).map(|n| (k0[n] - k1[n]) / dots[n]).collect();
            let diffs = k0.iter().zip(&k1).map(|(k0, k1)| (k1 - k0) / k0).collect();
            let (terms, name, gap_name, gap) = match opts.fixed {
                FixedAngle::Alpha => {
                    let cot_beta = base.angles.cot_beta() + beta_terms.iter().sum::<f64>();
                    (alpha_terms, "sum_kappa_alpha_update", "kappa_cot_beta_gap", (cot_beta - candidate.angles.cot_beta()).abs())
                }
                FixedAngle::Beta => {
                    let cot_alpha = base.angles.cot_alpha() + alpha_terms.iter().sum::<f64>();
                    (beta_terms, "sum_kappa_beta_update", "kappa_cot_alpha_gap", (cot_alpha - candidate.angles.cot_alpha()).abs())
                }
            };
            b.info(gap_name, gap);
            (diffs, Some(SumCheck { name, terms }))
        }
    };
    Ok(finish_uniqueness(b, iso, &diffs, sum, tol))
}

/// Consistency of Marchenko's theorem on sampled data: equal eigenvalues
/// and norming constants must come with equal angles and potentials.
pub fn marchenko_consistency(base: &OperatorSpec, candidate: &OperatorSpec, n_max: usize) -> Result<CertificateReport> {
    marchenko_consistency_with(base, candidate, n_max, &Tolerances::default())
}

pub fn marchenko_consistency_with(
    base: &OperatorSpec,
    candidate: &OperatorSpec,
    n_max: usize,
    tol: &Tolerances,
) -> Result<CertificateReport> {
    let (s0, s1) = spectra(base, candidate, n_max, false)?;
    let mut b = Builder::new(TheoremId::MarchenkoConsistency);
    let iso = iso_residual(&s0, &s1);
    let norming = max_abs(s0.data().iter().zip(s1.data()).map(|(d0, d1)| (d1.a - d0.a) / d0.a));
    let premise = b.check("isospectrality", iso, tol.iso).max(b.check("norming_difference", norming, tol.norming));
    let conclusion = b
        .check("max_potential_difference", base.potential.max_abs_diff(&candidate.potential), tol.potential)
        .max(b.check("alpha_difference", (base.alpha() - candidate.alpha()).abs(), tol.angle))
        .max(b.check("beta_difference", (base.beta() - candidate.beta()).abs(), tol.angle));
    let verdict = if premise != Grade::Within {
        b.note("spectral data differ; the theorem makes no claim");
        Verdict::Inconclusive
    } else {
        let v = verdict_of(conclusion);
        if v != Verdict::Pass {
            b.note("equal spectral data but different operators");
        }
        v
    };
    Ok(b.finish(verdict))
}

/// Certificate that an operator isospectral with `L(0, α, π - α)` has
/// `q ≡ 0`.
pub fn ambarzumyan_certificate(alpha: f64, candidate: &OperatorSpec, n_max: usize) -> Result<CertificateReport> {
    ambarzumyan_certificate_with(alpha, candidate, n_max, &Tolerances::default())
}

pub fn ambarzumyan_certificate_with(
    alpha: f64,
    candidate: &OperatorSpec,
    n_max: usize,
    tol: &Tolerances,
) -> Result<CertificateReport> {
    let mirror_gap = (candidate.beta() - (PI - candidate.alpha())).abs();
    if mirror_gap > tol.hypothesis {
        return Err(Error::Hypothesis(format!(
            "beta must equal pi - alpha: alpha {}, beta {} (gap {mirror_gap:e})",
            candidate.alpha(),
            candidate.beta()
        )));
    }
    if (candidate.alpha() - alpha).abs() > tol.hypothesis {
        return Err(Error::Hypothesis(format!(
            "candidate alpha {} differs from the reference alpha {alpha}",
            candidate.alpha()
        )));
    }
    let base = OperatorSpec::new(
        Potential::zero(candidate.grid()),
        RobinAngles::new(alpha, PI - alpha)?,
    );
    let (s0, s1) = spectra(&base, candidate, n_max, false)?;
    let mut b = Builder::new(TheoremId::Thm1_4);
    let iso = b.check("isospectrality", iso_residual(&s0, &s1), tol.iso);
    let c: Vec<f64> = s0.data().iter().zip(s1.data()).map(|(d0, d1)| 1.0 / d1.a - 1.0 / d0.a).collect();
    let a0: Vec<f64> = s0.data().iter().map(|d| d.a).collect();
    let sums = AmbarzumyanSums::new(&c, &a0)?;
    b.info("max_implied_c", max_abs(c.iter().copied()));
    b.info("sum_c", sums.sum_c);
    b.info("sum_c_over_denominator", sums.sum_ratio);
    b.info("identity_residual", sums.identity_residual());
    b.info("max_abs_q", max_abs(candidate.potential.values().iter().copied()));
    let scale = 1.0 + c.iter().map(|v| v.abs()).sum::<f64>();
    let sum_tol = tol.sum * scale;
    let positive = b.check("sum_positive_terms", sums.sum_positive, sum_tol);
    let tail = sums.terms.last().copied().unwrap_or(0.0);
    b.info("tail_estimate", tail);
    let mut verdict = verdict_of(iso.max(positive));
    if tail > 0.1 * sum_tol {
        b.flags.tail_limited = true;
        b.note("last positive term exceeds a tenth of the tolerance");
        verdict = downgrade(verdict);
    }
    if verdict == Verdict::Pass {
        b.note("every implied c_n vanishes, so q = 0");
    }
    Ok(b.finish(verdict))
}

/// The two constraint sums and their nonnegative difference for one
/// perturbation sequence against an even base.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbarzumyanSums {
    /// `Σ cₙ`.
    pub sum_c: f64,
    /// `Σ cₙ / (1 + cₙ aₙ⁰)`.
    pub sum_ratio: f64,
    /// `Σ cₙ² aₙ⁰ / (1 + cₙ aₙ⁰)`.
    pub sum_positive: f64,
    pub terms: Vec<f64>,
}

impl AmbarzumyanSums {
    /// Rejects inadmissible entries and asserts termwise positivity before
    /// summing.
    pub fn new(c: &[f64], a0: &[f64]) -> Result<Self> {
        let mut terms = Vec::with_capacity(c.len());
        let (mut sum_c, mut sum_ratio) = (0.0, 0.0);
        for (n, (&cn, &an)) in c.iter().zip(a0).enumerate() {
            let denom = 1.0 + cn * an;
            if !(denom > 0.0) {
                return Err(Error::Inadmissible { index: n, value: denom });
            }
            let term = cn * cn * an / denom;
            if term < 0.0 || (cn != 0.0 && term == 0.0) {
                return Err(Error::Consistency(format!(
                    "term {n} of the positive sum is {term} for c = {cn}"
                )));
            }
            sum_c += cn;
            sum_ratio += cn / denom;
            terms.push(term);
        }
        let sum_positive = terms.iter().sum();
        Ok(Self {
            sum_c,
            sum_ratio,
            sum_positive,
            terms,
        })
    }

    /// `|Σc - Σc/(1+ca) - Σc²a/(1+ca)|`.
    pub fn identity_residual(&self) -> f64 {
        (self.sum_c - self.sum_ratio - self.sum_positive).abs()
    }
}

#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub coeffs: PerturbationSeq,
    pub sums: AmbarzumyanSums,
    /// Both constraint sums vanish within tolerance.
    pub satisfies_both: bool,
    /// `max |q|` of the constructed operator, for members satisfying both.
    pub max_abs_q: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FamilySearch {
    pub alpha: f64,
    pub members: Vec<FamilyMember>,
    pub max_identity_residual: f64,
    /// Every member meeting both constraints is `c ≡ 0`.
    pub only_zero_satisfies: bool,
}

/// Evaluates the Ambarzumyan constraint sums over candidate sequences in
/// the isospectral family of `L(0, α, π - α)`; members satisfying both are
/// constructed and their potentials measured.
pub fn ambarzumyan_family_search(
    alpha: f64,
    grid: Grid,
    candidates: &[PerturbationSeq],
    tol: &Tolerances,
) -> Result<FamilySearch> {
    let base = OperatorSpec::new(Potential::zero(grid), RobinAngles::new(alpha, PI - alpha)?);
    let n_max = candidates.iter().filter_map(|c| c.max_index()).max().unwrap_or(0);
    let spec = ForwardSolver::new(&base).eigenvalues(n_max)?;
    let mut members = Vec::with_capacity(candidates.len());
    for c in candidates {
        c.check_admissible(&spec)?;
        let a0: Vec<f64> = spec.data()[..c.coeffs().len()].iter().map(|d| d.a).collect();
        let sums = AmbarzumyanSums::new(c.coeffs(), &a0)?;
        let scale = 1.0 + c.coeffs().iter().map(|v| v.abs()).sum::<f64>();
        let satisfies_both = sums.sum_c.abs() <= tol.sum * scale && sums.sum_ratio.abs() <= tol.sum * scale;
        let max_abs_q = if satisfies_both {
            let op = construct(&base, c, &ConstructOptions::default())?.operator;
            Some(max_abs(op.potential.values().iter().copied()))
        } else {
            None
        };
        members.push(FamilyMember {
            coeffs: c.clone(),
            sums,
            satisfies_both,
            max_abs_q,
        });
    }
    let max_identity_residual = members.iter().map(|m| m.sums.identity_residual()).fold(0.0, f64::max);
    let only_zero_satisfies = members.iter().filter(|m| m.satisfies_both).all(|m| m.coeffs.is_zero());
    Ok(FamilySearch {
        alpha,
        members,
        max_identity_residual,
        only_zero_satisfies,
    })
}

/// Levinson's criterion in both directions: an operator is even exactly
/// when `φ(π, μₙ) = (-1)ⁿ` for all `n`.
pub fn levinson_even_check(op: &OperatorSpec, n_max: usize) -> Result<CertificateReport> {
    levinson_even_check_with(op, n_max, &Tolerances::default())
}

pub fn levinson_even_check_with(op: &OperatorSpec, n_max: usize, tol: &Tolerances) -> Result<CertificateReport> {
    let q = op.potential.values();
    let m = q.len() - 1;
    let q_gap = max_abs((0..=m).map(|i| q[i] - q[m - i]));
    let angle_gap = (op.alpha() + op.beta() - PI).abs();
    let r_even = q_gap.max(angle_gap);
    let spec = ForwardSolver::new(op).eigenvalues(n_max)?;
    let r_end = max_abs(
        spec.data()
            .iter()
            .map(|d| d.phi_end - if d.n % 2 == 0 { 1.0 } else { -1.0 }),
    );
    let mut b = Builder::new(TheoremId::Levinson);
    b.info("r_even", r_even);
    b.info("r_end", r_end);
    let even = r_even <= tol.symmetry;
    b.flags.even = Some(even);
    let verdict = if even {
        b.note("operator is even");
        verdict_of(b.check("end_deviation", r_end, tol.levinson_end))
    } else {
        b.note("operator is not even");
        let deficit = (tol.asymmetry - r_end).max(0.0);
        b.check("end_deficit", deficit, 0.0);
        if r_end >= tol.asymmetry {
            Verdict::Pass
        } else if r_end > tol.levinson_end {
            b.note("end values deviate, but less than the asymmetry threshold");
            Verdict::Inconclusive
        } else {
            b.note("end values alternate although the operator is not even");
            Verdict::Fail
        }
    };
    Ok(b.finish(verdict))
}

/// Relations between norming constants, `κₙ` and the characteristic
/// functions:
///
/// ```text
/// φ(x, μₙ) = κₙ ψ(x, μₙ),   κₙ = φ(π, μₙ) = 1/ψ(0, μₙ),
/// aₙ = |φ(π, μₙ)| |Φ̇(μₙ)| = |κₙ| |Φ̇(μₙ)|,   bₙ = |ψ(0, μₙ)| |Ψ̇(μₙ)|.
/// ```
pub fn kappa_relations_check(op: &OperatorSpec, n_max: usize) -> Result<CertificateReport> {
    kappa_relations_check_with(op, n_max, &Tolerances::default())
}

pub fn kappa_relations_check_with(op: &OperatorSpec, n_max: usize, tol: &Tolerances) -> Result<CertificateReport> {
    let solver = ForwardSolver::new(op);
    let spec = solver.spectrum(n_max, true)?;
    let rows = spec
        .data()
        .iter()
        .map(|d| {
            let phi = solver.integrate_phi(d.mu)?;
            let psi = solver.integrate_psi(d.mu)?;
            let phi_end = phi.y[phi.y.len() - 1];
            let psi_start = psi.y[0];
            let kappa = 1.0 / psi_start;
            let scale = max_abs(phi.y.iter().copied());
            let proportional = max_abs(phi.y.iter().zip(&psi.y).map(|(p, s)| p - kappa * s)) / scale;
            let phi_dot = solver.char_derivative(d.mu)?.abs();
            let psi_dot = solver.char_psi_derivative(d.mu)?.abs();
            let b = d.b.expect("spectrum computed with b");
            Ok([
                proportional,
                (phi_end * psi_start - 1.0).abs(),
                (d.a - phi_end.abs() * phi_dot).abs() / d.a,
                (b - psi_start.abs() * psi_dot).abs() / b,
                (d.a - kappa.abs() * phi_dot).abs() / d.a,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut b = Builder::new(TheoremId::KappaRelations);
    let names = [
        "proportionality",
        "kappa_endpoints",
        "norming_a_phi",
        "norming_b_psi",
        "norming_a_kappa",
    ];
    let mut worst = Grade::Within;
    for (k, name) in names.iter().enumerate() {
        let value = rows.iter().map(|r| r[k]).fold(0.0, f64::max);
        worst = worst.max(b.check(name, value, tol.kappa));
    }
    b.note(format!("relative residuals over n = 0..={n_max}"));
    Ok(b.finish(verdict_of(worst)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gelfand_levitan::isospectral_construct;

    fn op(q: impl Fn(f64) -> f64, alpha: f64, beta: f64) -> OperatorSpec {
        let g = Grid::new(2000).unwrap();
        OperatorSpec::new(Potential::from_fn(g, q).unwrap(), RobinAngles::new(alpha, beta).unwrap())
    }

    #[test]
    fn theorem_ids_round_trip() {
        for id in TheoremId::ALL {
            assert_eq!(id.as_str().parse::<TheoremId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{id}\""));
        }
        assert!("thm9".parse::<TheoremId>().is_err());
    }

    #[test]
    fn grading_bands() {
        assert!(grade(1.0, 1.0) == Grade::Within);
        assert!(grade(5.0, 1.0) == Grade::Band);
        assert!(grade(10.5, 1.0) == Grade::Beyond);
        assert!(grade(f64::NAN, 1.0) == Grade::Beyond);
    }

    #[test]
    fn one_sidedness_measure() {
        assert_eq!(one_sidedness(&[0.1, 0.0, 0.3]), (0.0, ">="));
        assert_eq!(one_sidedness(&[-0.1, -0.2]), (0.0, "<="));
        assert_eq!(one_sidedness(&[0.1, -0.02]), (0.02, ">="));
    }

    #[test]
    fn identical_operators_pass_everything() {
        let base = op(|x| x * (PI - x) / 5.0, PI / 3.0, 2.0 * PI / 3.0);
        for report in [
            thm12_certificate(&base, &base, 8).unwrap(),
            thm52_certificate(&base, &base, 8).unwrap(),
            marchenko_consistency(&base, &base, 8).unwrap(),
            kappa_relations_check(&base, 8).unwrap(),
        ] {
            assert!(report.is_pass(), "{report:?}");
            assert!(report.violations().is_empty());
        }
    }

    #[test]
    fn alpha_shift_violates_hypothesis() {
        let base = op(|_| 0.0, PI / 2.0, PI / 2.0);
        let cand = isospectral_construct(&base, &PerturbationSeq::new(vec![0.5]).unwrap()).unwrap();
        let err = thm12_certificate(&base, &cand, 6).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
        let report = hypothesis_failure(TheoremId::Thm1_2, err).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.flags.hypothesis_violated);
        assert!(hypothesis_failure(TheoremId::Thm1_2, Error::Domain("x".into())).is_err());
    }

    #[test]
    fn mixed_sign_pair_is_inconclusive() {
        let base = op(|_| 0.0, PI / 2.0, PI / 2.0);
        let c = PerturbationSeq::new(vec![0.1, -0.1]).unwrap();
        let cand = isospectral_construct(&base, &c).unwrap();
        for report in [
            thm12_certificate(&base, &cand, 10).unwrap(),
            thm52_certificate(&base, &cand, 10).unwrap(),
        ] {
            assert_eq!(report.verdict, Verdict::Inconclusive, "{report:?}");
            assert!(report.flags.one_sidedness_violated);
            assert!(report.residual("isospectrality").unwrap() < 5e-5);
        }
        let mirrored = UniquenessOptions {
            quantity: Quantity::Mirror,
            ..UniquenessOptions::default()
        };
        let report = thm12_certificate_with(&base, &cand, 10, &Tolerances::default(), mirrored).unwrap();
        assert_ne!(report.verdict, Verdict::Pass);
        let report = thm52_certificate_with(&base, &cand, 10, &Tolerances::default(), mirrored).unwrap();
        assert_ne!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn ambarzumyan_on_bases() {
        for alpha in [PI / 3.0, PI / 2.0] {
            let cand = op(|_| 0.0, alpha, PI - alpha);
            let r = ambarzumyan_certificate(alpha, &cand, 10).unwrap();
            assert!(r.is_pass(), "{r:?}");
            assert_eq!(r.residual("max_abs_q"), Some(0.0));
        }
    }

    #[test]
    fn ambarzumyan_rejects_shifted_member() {
        let base = op(|_| 0.0, PI / 3.0, 2.0 * PI / 3.0);
        let cand = isospectral_construct(&base, &PerturbationSeq::new(vec![0.5]).unwrap()).unwrap();
        let err = ambarzumyan_certificate(PI / 3.0, &cand, 8).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
    }

    #[test]
    fn ambarzumyan_sums_identity() {
        let s = AmbarzumyanSums::new(&[0.3, -0.2, 0.0], &[PI, PI / 2.0, PI / 2.0]).unwrap();
        assert!(s.identity_residual() < 1e-15);
        assert_eq!(s.terms[2], 0.0);
        assert!(s.terms[..2].iter().all(|t| *t > 0.0));
        assert!(matches!(
            AmbarzumyanSums::new(&[-1.0 / PI], &[PI]),
            Err(Error::Inadmissible { index: 0, .. })
        ));
    }

    #[test]
    fn levinson_both_directions() {
        let even = levinson_even_check(&op(|x| (2.0 * x).cos(), PI / 3.0, 2.0 * PI / 3.0), 12).unwrap();
        assert!(even.is_pass(), "{even:?}");
        assert_eq!(even.flags.even, Some(true));
        let odd = levinson_even_check(&op(|x| x, PI / 2.0, PI / 2.0), 12).unwrap();
        assert!(odd.is_pass(), "{odd:?}");
        assert_eq!(odd.flags.even, Some(false));
        assert!(odd.residual("r_end").unwrap() > 1e-2);
    }

    #[test]
    fn report_document_round_trip() {
        let base = op(|_| 0.0, PI / 2.0, PI / 2.0);
        let r = kappa_relations_check(&base, 3).unwrap();
        let back = CertificateReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_json().contains("\"theorem_id\": \"kappa_relations\""));
    }
}
