//! Isospectral families through the Gelfand-Levitan equation
//!
//! ```text
//! K(x, y) + F(x, y) + ∫₀ˣ K(x, t) F(t, y) dt = 0,   0 ≤ y ≤ x ≤ π,
//! F(x, y) = Σ cₙ φ₀(x, μₙ⁰) φ₀(y, μₙ⁰).
//! ```
//!
//! For every admissible finite sequence `cₙ` (`1 + cₙ aₙ⁰ > 0`) the kernel
//! `K` yields an operator `L(q, α, β)` with the same spectrum as the base:
//!
//! ```text
//! q(x)  = q₀(x) + 2 d/dx K(x, x)
//! cot α = cot α₀ + Σ cₙ
//! cot β = cot β₀ + Σ cₙ φ₀(π, μₙ⁰)² / (1 + cₙ aₙ⁰)
//! ```
//!
//! and norming constants `aₙ = aₙ⁰ / (1 + cₙ aₙ⁰)`.
//!
//! Kernels assembled from coefficients have rank `r = #supp c`, and the
//! equation reduces exactly to an `r × r` system per node of the solver
//! grid. Plain Nyström collocation on the kernel grid, one linear system
//! per node `xᵢ`, handles arbitrary sampled kernels.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result, StageExt};
use crate::forward::{Direction, ForwardSolver, SolutionTrace};
use crate::grid::{cumulative_order4, derivative_order4, nystrom_weights, CubicSpline, Grid};
use crate::types::{arccot, cot, OperatorSpec, PerturbationSeq, Potential, RobinAngles, SpectrumTable};

/// Default number of intervals of the Gelfand-Levitan grid.
pub const DEFAULT_GL_INTERVALS: usize = 400;

/// Scaled bound on the discrete residual of every row.
pub const GL_RESIDUAL_TOLERANCE: f64 = 1e-8;

/// One term `cₙ φ₀(x, μₙ⁰) φ₀(y, μₙ⁰)` of the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTerm {
    pub n: usize,
    pub c: f64,
    /// `φ₀(xᵢ, μₙ⁰)` on the kernel grid.
    pub samples: Vec<f64>,
}

/// Eigenfunction traces behind a coefficient-built kernel, kept on the
/// solver grid of the base operator.
#[derive(Debug, Clone)]
pub struct FineTerms {
    pub grid: Grid,
    pub coeffs: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

/// Kernel `F(xᵢ, yⱼ)` on the Gelfand-Levitan grid.
#[derive(Debug, Clone)]
pub struct KernelF {
    grid: Grid,
    values: Vec<f64>,
    terms: Option<Vec<KernelTerm>>,
    fine: Option<FineTerms>,
    base_spectrum: Option<SpectrumTable>,
    coeffs: Option<PerturbationSeq>,
}

impl KernelF {
    /// Dense kernel from a symmetric function; no low-rank structure is
    /// recorded.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(grid.node(i), grid.node(j));
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self {
            grid,
            values,
            terms: None,
            fine: None,
            base_spectrum: None,
            coeffs: None,
        }
    }

    fn from_terms(grid: Grid, terms: Vec<KernelTerm>) -> Self {
        let n = grid.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = terms.iter().map(|t| t.c * t.samples[i] * t.samples[j]).sum();
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self {
            grid,
            values,
            terms: Some(terms),
            fine: None,
            base_spectrum: None,
            coeffs: None,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Separable terms, when the kernel was assembled from coefficients.
    pub fn terms(&self) -> Option<&[KernelTerm]> {
        self.terms.as_deref()
    }

    pub fn fine_terms(&self) -> Option<&FineTerms> {
        self.fine.as_ref()
    }

    pub fn base_spectrum(&self) -> Option<&SpectrumTable> {
        self.base_spectrum.as_ref()
    }

    pub fn coeffs(&self) -> Option<&PerturbationSeq> {
        self.coeffs.as_ref()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.grid.len();
        (0..n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Samples a trace on another grid, picking nodes when the grids nest.
fn sample_on(values: &[f64], from: Grid, to: Grid) -> Vec<f64> {
    let (mf, mt) = (from.intervals(), to.intervals());
    if mf % mt == 0 {
        let r = mf / mt;
        (0..=mt).map(|i| values[i * r]).collect()
    } else {
        CubicSpline::new(from, values).resample(to)
    }
}

/// `F = Σ cₙ φ₀(x, μₙ⁰) φ₀(y, μₙ⁰)` over the support of `c`.
pub fn build_kernel_from_coeffs(
    base: &OperatorSpec,
    base_spec: &SpectrumTable,
    c: &PerturbationSeq,
    gl_grid: Grid,
) -> Result<KernelF> {
    c.check_admissible(base_spec)?;
    let solver = ForwardSolver::new(base);
    let traces = c
        .support()
        .map(|(n, cn)| Ok((n, cn, solver.integrate_phi(base_spec.data()[n].mu)?)))
        .collect::<Result<Vec<_>>>()?;
    let terms = traces
        .iter()
        .map(|(n, cn, trace)| KernelTerm {
            n: *n,
            c: *cn,
            samples: sample_on(&trace.y, base.grid(), gl_grid),
        })
        .collect();
    let mut kernel = KernelF::from_terms(gl_grid, terms);
    kernel.fine = Some(FineTerms {
        grid: base.grid(),
        coeffs: traces.iter().map(|t| t.1).collect(),
        phi: traces.into_iter().map(|t| t.2.y).collect(),
    });
    kernel.base_spectrum = Some(base_spec.clone());
    kernel.coeffs = Some(c.clone());
    Ok(kernel)
}

/// `cₙ = 1/aₙ - 1/aₙ⁰`; indices where the targets equal the base get an
/// exact zero.
pub fn coeffs_from_norming(base_spec: &SpectrumTable, target_a: &[f64]) -> Result<PerturbationSeq> {
    if target_a.len() > base_spec.len() {
        return Err(Error::Coverage {
            index: target_a.len() - 1,
            available: base_spec.len().saturating_sub(1),
        });
    }
    let coeffs = target_a
        .iter()
        .zip(base_spec.data())
        .enumerate()
        .map(|(n, (&a, d))| {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Domain(format!(
                    "target norming constant a[{n}] = {a} must be positive"
                )));
            }
            Ok(if a == d.a { 0.0 } else { 1.0 / a - 1.0 / d.a })
        })
        .collect::<Result<Vec<_>>>()?;
    PerturbationSeq::new(coeffs)
}

/// Kernel prescribed by target norming constants; indices past the end of
/// `target_a` keep their base values.
pub fn build_kernel_from_norming(
    base_spec: &SpectrumTable,
    target_a: &[f64],
    gl_grid: Grid,
    base: &OperatorSpec,
) -> Result<KernelF> {
    let c = coeffs_from_norming(base_spec, target_a)?;
    build_kernel_from_coeffs(base, base_spec, &c, gl_grid)
}

/// Discrete solution of the Gelfand-Levitan equation.
#[derive(Debug, Clone)]
pub struct GlSolution {
    pub grid: Grid,
    /// `rows[i][j] = K(xᵢ, yⱼ)` for `j ≤ i`.
    pub rows: Vec<Vec<f64>>,
    pub diag: Vec<f64>,
    pub diag_derivative: Vec<f64>,
    /// Largest scaled residual `|r| / (1 + max|F|)` over all rows.
    pub max_residual: f64,
    pub method: GlMethod,
    /// Solution on the base solver grid, when the degenerate method ran.
    pub fine: Option<FineSolution>,
}

/// Finite-rank solution `K(x, y) = -Σ cₙ eₙ(x) φₙ(y)` on the solver grid.
#[derive(Debug, Clone)]
pub struct FineSolution {
    pub grid: Grid,
    pub coeffs: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    /// `e[j]` solves `(I + G(xⱼ) C) e = φ(xⱼ)`.
    pub e: Vec<Vec<f64>>,
    pub diag: Vec<f64>,
    pub diag_derivative: Vec<f64>,
}

impl GlSolution {
    pub fn k(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    /// Residual of the discrete equation on row `i`, unscaled.
    fn row_residual(kernel: &KernelF, i: usize, u: &[f64]) -> f64 {
        if i == 0 {
            return (u[0] + kernel.get(0, 0)).abs();
        }
        let h = kernel.grid.step();
        let w = nystrom_weights(i);
        let mut worst = 0.0_f64;
        for j in 0..=i {
            let integral: f64 = (0..=i).map(|k| w[k] * u[k] * kernel.get(k, j)).sum::<f64>() * h;
            worst = worst.max((u[j] + kernel.get(i, j) + integral).abs());
        }
        worst
    }
}

/// Discretization used by [`solve_gl_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GlMethod {
    /// Degenerate when the kernel carries traces on a grid nesting the
    /// kernel grid, low-rank Nyström when it only carries terms, dense
    /// Nyström otherwise.
    #[default]
    Auto,
    /// Exact reduction of the finite-rank equation to an `r × r` system per
    /// node of the solver grid, Gram integrals by fourth-order quadrature.
    Degenerate,
    /// Nyström collocation, symmetrized dense system, Cholesky with an LU
    /// fallback.
    Dense,
    /// Nyström collocation solved in the span of the kernel terms; same
    /// discrete system as `Dense`, `O(i r²)` per row.
    LowRank,
}

/// Solves the discretized equation row by row.
pub fn solve_gl(kernel: &KernelF) -> Result<GlSolution> {
    solve_gl_with(kernel, GlMethod::Auto)
}

fn nests(fine: &FineTerms, grid: Grid) -> bool {
    fine.grid.intervals().is_multiple_of(grid.intervals())
}

pub fn solve_gl_with(kernel: &KernelF, method: GlMethod) -> Result<GlSolution> {
    let method = match method {
        GlMethod::Auto => match kernel.fine_terms() {
            Some(f) if nests(f, kernel.grid) => GlMethod::Degenerate,
            _ if kernel.terms().is_some() => GlMethod::LowRank,
            _ => GlMethod::Dense,
        },
        m => m,
    };
    let sol = match method {
        GlMethod::Degenerate => {
            let fine = kernel
                .fine_terms()
                .filter(|f| nests(f, kernel.grid))
                .ok_or_else(|| {
                    Error::Domain(
                        "degenerate solve needs kernel traces on a grid nesting the kernel grid".into(),
                    )
                })?;
            solve_degenerate(kernel, fine)?
        }
        GlMethod::LowRank => {
            let terms = kernel.terms().ok_or_else(|| {
                Error::Domain("low-rank solve needs a kernel assembled from coefficients".into())
            })?;
            solve_nystrom(kernel, |i| solve_row_low_rank(kernel.grid, terms, i), method)?
        }
        _ => solve_nystrom(kernel, |i| solve_row_dense(kernel, i), GlMethod::Dense)?,
    };
    if !(sol.max_residual <= GL_RESIDUAL_TOLERANCE) {
        return Err(Error::Consistency(format!(
            "Gelfand-Levitan residual {:e} exceeds {GL_RESIDUAL_TOLERANCE:e}",
            sol.max_residual
        )));
    }
    Ok(sol)
}

fn solve_nystrom(
    kernel: &KernelF,
    row: impl Fn(usize) -> Result<Vec<f64>> + Sync + Send,
    method: GlMethod,
) -> Result<GlSolution> {
    let grid = kernel.grid;
    let rows = (0..grid.len())
        .into_par_iter()
        .map(row)
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 + kernel.max_abs();
    let max_residual = rows
        .par_iter()
        .enumerate()
        .map(|(i, u)| GlSolution::row_residual(kernel, i, u) / scale)
        .reduce(|| 0.0, f64::max);
    let diag: Vec<f64> = rows.iter().enumerate().map(|(i, r)| r[i]).collect();
    let diag_derivative = derivative_order4(&diag, grid.step());
    Ok(GlSolution {
        grid,
        rows,
        diag,
        diag_derivative,
        max_residual,
        method,
        fine: None,
    })
}

fn solve_degenerate(kernel: &KernelF, fine: &FineTerms) -> Result<GlSolution> {
    let grid = kernel.grid;
    let fg = fine.grid;
    let ratio = fg.intervals() / grid.intervals();
    let c = &fine.coeffs;
    let phi = &fine.phi;
    let r = c.len();
    let h = fg.step();
    if r == 0 {
        return solve_nystrom(kernel, |i| Ok(vec![0.0; i + 1]), GlMethod::Degenerate);
    }
    let pairs: Vec<(usize, usize)> = (0..r).flat_map(|p| (0..=p).map(move |q| (p, q))).collect();
    let cumulative: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(p, q)| {
            let prod: Vec<f64> = phi[p].iter().zip(&phi[q]).map(|(a, b)| a * b).collect();
            cumulative_order4(&prod, h)
        })
        .collect();
    let gram = |p: usize, q: usize, j: usize| {
        let (p, q) = if p >= q { (p, q) } else { (q, p) };
        cumulative[p * (p + 1) / 2 + q][j]
    };
    // Residual of the reduced system feeds the equation residual through
    // r(x, y) = Σ c_q φ_q(y) [φ(x) - (I + G C) e]_q.
    let solved = (0..fg.len())
        .into_par_iter()
        .map(|j| {
            let system = DMatrix::from_fn(r, r, |p, q| {
                let delta = if p == q { 1.0 } else { 0.0 };
                delta + gram(p, q, j) * c[q]
            });
            let rhs = DVector::from_fn(r, |p, _| phi[p][j]);
            let e = system
                .clone()
                .lu()
                .solve(&rhs)
                .ok_or(Error::Solvability { row: j })?;
            let defect: Vec<f64> = (rhs - system * &e).iter().copied().collect();
            Ok((e.iter().copied().collect::<Vec<f64>>(), defect))
        })
        .collect::<Result<Vec<_>>>()?;
    let (e, defect): (Vec<Vec<f64>>, Vec<Vec<f64>>) = solved.into_iter().unzip();
    let k_at = |j: usize, t: usize| -> f64 { -(0..r).map(|p| c[p] * e[j][p] * phi[p][t]).sum::<f64>() };
    let fine_diag: Vec<f64> = (0..fg.len()).map(|j| k_at(j, j)).collect();
    let fine_derivative = derivative_order4(&fine_diag, h);
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| (0..=i).map(|j| k_at(i * ratio, j * ratio)).collect())
        .collect();
    let scale = 1.0 + kernel.max_abs();
    let max_residual = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let d = &defect[i * ratio];
            (0..=i)
                .map(|j| (0..r).map(|q| c[q] * phi[q][j * ratio] * d[q]).sum::<f64>().abs())
                .fold(0.0, f64::max)
                / scale
        })
        .reduce(|| 0.0, f64::max);
    let diag: Vec<f64> = (0..grid.len()).map(|i| fine_diag[i * ratio]).collect();
    let diag_derivative = (0..grid.len()).map(|i| fine_derivative[i * ratio]).collect();
    Ok(GlSolution {
        grid,
        rows,
        diag,
        diag_derivative,
        max_residual,
        method: GlMethod::Degenerate,
        fine: Some(FineSolution {
            grid: fg,
            coeffs: c.clone(),
            phi: phi.clone(),
            e,
            diag: fine_diag,
            diag_derivative: fine_derivative,
        }),
    })
}

fn solve_row_dense(kernel: &KernelF, i: usize) -> Result<Vec<f64>> {
    if i == 0 {
        return Ok(vec![-kernel.get(0, 0)]);
    }
    let h = kernel.grid.step();
    let n = i + 1;
    let d: Vec<f64> = nystrom_weights(i).iter().map(|w| (w * h).sqrt()).collect();
    // (I + D F D) v = -D f,  K = D⁻¹ v.
    let a = DMatrix::from_fn(n, n, |r, c| {
        let delta = if r == c { 1.0 } else { 0.0 };
        delta + d[r] * kernel.get(r, c) * d[c]
    });
    let rhs = DVector::from_fn(n, |r, _| -d[r] * kernel.get(i, r));
    let v = match a.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => a.lu().solve(&rhs).ok_or(Error::Solvability { row: i })?,
    };
    Ok(v.iter().zip(&d).map(|(v, d)| v / d).collect())
}

fn solve_row_low_rank(grid: Grid, terms: &[KernelTerm], i: usize) -> Result<Vec<f64>> {
    let r = terms.len();
    if r == 0 {
        return Ok(vec![0.0; i + 1]);
    }
    if i == 0 {
        let f00: f64 = terms.iter().map(|t| t.c * t.samples[0] * t.samples[0]).sum();
        return Ok(vec![-f00]);
    }
    let h = grid.step();
    let w = nystrom_weights(i);
    // K(xᵢ, y) = -Σ cₙ eₙ φₙ(y) with (I + G C) e = φ(xᵢ), G the weighted Gram matrix.
    let gram = DMatrix::from_fn(r, r, |p, q| {
        (0..=i)
            .map(|k| w[k] * terms[p].samples[k] * terms[q].samples[k])
            .sum::<f64>()
            * h
    });
    let mut system = gram.clone();
    for q in 0..r {
        for p in 0..r {
            system[(p, q)] *= terms[q].c;
        }
        system[(q, q)] += 1.0;
    }
    let rhs = DVector::from_fn(r, |p, _| terms[p].samples[i]);
    let e = system.lu().solve(&rhs).ok_or(Error::Solvability { row: i })?;
    Ok((0..=i)
        .map(|j| {
            -terms
                .iter()
                .zip(e.iter())
                .map(|(t, e)| t.c * e * t.samples[j])
                .sum::<f64>()
        })
        .collect())
}

/// `q = q₀ + 2 d/dx K(x, x)` on the base grid. The diagonal derivative is
/// taken from the finest grid the solution carries.
pub fn reconstruct_potential(base: &OperatorSpec, sol: &GlSolution) -> Result<Potential> {
    let (grid, derivative) = match &sol.fine {
        Some(f) => (f.grid, &f.diag_derivative),
        None => (sol.grid, &sol.diag_derivative),
    };
    let shift: Vec<f64> = derivative.iter().map(|d| 2.0 * d).collect();
    let shift = CubicSpline::new(grid, &shift).resample(base.grid());
    let values = base
        .potential
        .values()
        .iter()
        .zip(&shift)
        .map(|(q0, s)| q0 + s)
        .collect();
    Potential::new(base.grid(), values)
}

/// `α = arccot(cot α₀ + Σ cₙ)`.
pub fn new_alpha(base_alpha: f64, c: &PerturbationSeq) -> f64 {
    arccot(cot(base_alpha) + c.sum())
}

/// Right boundary angle of the constructed operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaUpdate {
    pub beta: f64,
    pub cot_beta: f64,
    /// `2 Σ |termₙ| / (1 + cot²β)`: first-order change of `β` per unit
    /// relative error in the endpoint values `φ₀(π, μₙ⁰)`.
    pub endpoint_sensitivity: f64,
    /// Smallest `|φ₀(π, μₙ⁰)|` over the support.
    pub min_endpoint: f64,
}

impl BetaUpdate {
    fn from_terms(base_beta: f64, terms: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut cot_beta = cot(base_beta);
        let mut abs_sum = 0.0;
        let mut min_endpoint = f64::INFINITY;
        for (term, endpoint) in terms {
            cot_beta += term;
            abs_sum += term.abs();
            min_endpoint = min_endpoint.min(endpoint.abs());
        }
        Self {
            beta: arccot(cot_beta),
            cot_beta,
            endpoint_sensitivity: 2.0 * abs_sum / (1.0 + cot_beta * cot_beta),
            min_endpoint,
        }
    }
}

/// `cot β = cot β₀ + Σ cₙ φ₀(π, μₙ⁰)² / (1 + cₙ aₙ⁰)`.
pub fn new_beta(base: &OperatorSpec, base_spec: &SpectrumTable, c: &PerturbationSeq) -> Result<BetaUpdate> {
    c.check_admissible(base_spec)?;
    let terms = c.support().map(|(n, cn)| {
        let d = &base_spec.data()[n];
        (cn * d.phi_end * d.phi_end / (1.0 + cn * d.a), d.phi_end)
    });
    Ok(BetaUpdate::from_terms(base.beta(), terms))
}

/// Same update written in target norming constants:
/// `cot β = cot β₀ + Σ (aₙ⁰ - aₙ) φ₀(π, μₙ⁰)² / (aₙ⁰)²`.
pub fn new_beta_from_norming(
    base: &OperatorSpec,
    base_spec: &SpectrumTable,
    target_a: &[f64],
) -> Result<BetaUpdate> {
    coeffs_from_norming(base_spec, target_a)?;
    let terms = target_a.iter().zip(base_spec.data()).map(|(&a, d)| {
        ((d.a - a) * d.phi_end * d.phi_end / (d.a * d.a), d.phi_end)
    });
    Ok(BetaUpdate::from_terms(base.beta(), terms))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructOptions {
    pub gl_intervals: usize,
    pub method: GlMethod,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        Self {
            gl_intervals: DEFAULT_GL_INTERVALS,
            method: GlMethod::Auto,
        }
    }
}

/// Everything produced along the way to an isospectral operator.
#[derive(Debug, Clone)]
pub struct Construction {
    pub operator: OperatorSpec,
    pub base_spectrum: SpectrumTable,
    pub kernel: KernelF,
    pub solution: GlSolution,
    pub beta: BetaUpdate,
}

/// Member of the isospectral family of `base` selected by `c`.
pub fn isospectral_construct(base: &OperatorSpec, c: &PerturbationSeq) -> Result<OperatorSpec> {
    Ok(construct(base, c, &ConstructOptions::default())?.operator)
}

pub fn construct(base: &OperatorSpec, c: &PerturbationSeq, opts: &ConstructOptions) -> Result<Construction> {
    let n_needed = c.max_index().unwrap_or(0);
    let base_spectrum = ForwardSolver::new(base)
        .eigenvalues(n_needed)
        .stage("base spectrum")?;
    c.check_admissible(&base_spectrum).stage("admissibility")?;
    let gl_grid = Grid::new_even(opts.gl_intervals).stage("kernel grid")?;
    let kernel = build_kernel_from_coeffs(base, &base_spectrum, c, gl_grid).stage("kernel")?;
    let solution = solve_gl_with(&kernel, opts.method).stage("Gelfand-Levitan solve")?;
    let potential = reconstruct_potential(base, &solution).stage("potential")?;
    let alpha = new_alpha(base.alpha(), c);
    let beta = new_beta(base, &base_spectrum, c).stage("beta update")?;
    let angles = RobinAngles::new(alpha, beta.beta).stage("boundary angles")?;
    Ok(Construction {
        operator: OperatorSpec::new(potential, angles),
        base_spectrum,
        kernel,
        solution,
        beta,
    })
}

/// `φ(x, μ) = φ₀(x, μ) + ∫₀ˣ K(x, t) φ₀(t, μ) dt`; the derivative comes
/// from fourth-order differences.
///
/// A trace on the solver grid of a degenerate solution is transformed there,
/// anything else is resampled onto the kernel grid.
pub fn transform_solution(base_trace: &SolutionTrace, sol: &GlSolution, mu: f64) -> Result<SolutionTrace> {
    if base_trace.direction != Direction::ForwardFromZero {
        return Err(Error::GridMismatch(
            "transformation operator acts on forward traces".into(),
        ));
    }
    if base_trace.y.len() != base_trace.grid.len() {
        return Err(Error::GridMismatch(format!(
            "trace has {} samples on a grid of {} nodes",
            base_trace.y.len(),
            base_trace.grid.len()
        )));
    }
    let (grid, y) = match &sol.fine {
        Some(f) if f.grid == base_trace.grid => (f.grid, transform_fine(f, &base_trace.y)),
        _ => (sol.grid, transform_coarse(sol, base_trace)?),
    };
    let yprime = derivative_order4(&y, grid.step());
    Ok(SolutionTrace {
        grid,
        y,
        yprime,
        mu,
        direction: Direction::ForwardFromZero,
    })
}

fn transform_fine(f: &FineSolution, base: &[f64]) -> Vec<f64> {
    let h = f.grid.step();
    let moments: Vec<Vec<f64>> = f
        .phi
        .iter()
        .map(|p| {
            let prod: Vec<f64> = p.iter().zip(base).map(|(a, b)| a * b).collect();
            cumulative_order4(&prod, h)
        })
        .collect();
    (0..f.grid.len())
        .map(|j| {
            let integral: f64 = (0..f.coeffs.len())
                .map(|p| f.coeffs[p] * f.e[j][p] * moments[p][j])
                .sum();
            base[j] - integral
        })
        .collect()
}

fn transform_coarse(sol: &GlSolution, base_trace: &SolutionTrace) -> Result<Vec<f64>> {
    let grid = sol.grid;
    let base = sample_on(&base_trace.y, base_trace.grid, grid);
    if base.len() != grid.len() {
        return Err(Error::GridMismatch("resampled trace length".into()));
    }
    let h = grid.step();
    Ok((0..grid.len())
        .map(|i| {
            let w = nystrom_weights(i);
            let integral: f64 = (0..=i).map(|k| w[k] * sol.rows[i][k] * base[k]).sum::<f64>() * h;
            base[i] + integral
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn neumann(m: usize) -> OperatorSpec {
        OperatorSpec::new(
            Potential::zero(Grid::new(m).unwrap()),
            RobinAngles::new(PI / 2.0, PI / 2.0).unwrap(),
        )
    }

    #[test]
    fn zero_coeffs_give_zero_kernel() {
        let base = neumann(400);
        let spec = ForwardSolver::new(&base).eigenvalues(2).unwrap();
        let k = build_kernel_from_coeffs(&base, &spec, &PerturbationSeq::zero(), Grid::new(100).unwrap()).unwrap();
        assert_eq!(k.max_abs(), 0.0);
        let sol = solve_gl(&k).unwrap();
        assert!(sol.rows.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn first_row_is_algebraic() {
        let g = Grid::new(32).unwrap();
        let k = KernelF::from_fn(g, |x, y| 0.3 + x * y);
        let sol = solve_gl_with(&k, GlMethod::Dense).unwrap();
        assert_eq!(sol.rows[0][0], -k.get(0, 0));
    }

    #[test]
    fn low_rank_requires_terms() {
        let g = Grid::new(32).unwrap();
        let k = KernelF::from_fn(g, |_, _| 1.0);
        assert!(matches!(
            solve_gl_with(&k, GlMethod::LowRank),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn constant_kernel_closed_form() {
        let g = Grid::new(400).unwrap();
        let k = KernelF::from_fn(g, |_, _| 1.0);
        let sol = solve_gl(&k).unwrap();
        assert_eq!(sol.method, GlMethod::Dense);
        for (i, row) in sol.rows.iter().enumerate() {
            let exact = -1.0 / (1.0 + g.node(i));
            assert!(row.iter().all(|v| (v - exact).abs() <= 1e-6), "row {i}");
        }
        assert!(sol.max_residual <= GL_RESIDUAL_TOLERANCE);
    }

    #[test]
    fn separable_cosine_kernel_closed_form() {
        let g = Grid::new(400).unwrap();
        let c1 = 0.7;
        let k = KernelF::from_fn(g, |x, y| c1 * x.cos() * y.cos());
        let sol = solve_gl(&k).unwrap();
        for (i, row) in sol.rows.iter().enumerate() {
            let x = g.node(i);
            let denom = 1.0 + c1 * (x / 2.0 + (2.0 * x).sin() / 4.0);
            for (j, v) in row.iter().enumerate() {
                let exact = -c1 * x.cos() * g.node(j).cos() / denom;
                assert!((v - exact).abs() <= 1e-6, "({i}, {j}): {v} vs {exact}");
            }
        }
    }

    #[test]
    fn methods_agree_on_coefficient_kernels() {
        let base = neumann(2000);
        let spec = ForwardSolver::new(&base).eigenvalues(3).unwrap();
        let c = PerturbationSeq::new(vec![0.4, -0.3, 0.0, 0.6]).unwrap();
        let k = build_kernel_from_coeffs(&base, &spec, &c, Grid::new(200).unwrap()).unwrap();
        assert!(k.is_symmetric());
        let deg = solve_gl(&k).unwrap();
        assert_eq!(deg.method, GlMethod::Degenerate);
        for method in [GlMethod::Dense, GlMethod::LowRank] {
            let other = solve_gl_with(&k, method).unwrap();
            let diff = deg
                .rows
                .iter()
                .flatten()
                .zip(other.rows.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-5, "{method:?}: {diff:e}");
        }
        let dense = solve_gl_with(&k, GlMethod::Dense).unwrap();
        let low = solve_gl_with(&k, GlMethod::LowRank).unwrap();
        let diff = dense
            .rows
            .iter()
            .flatten()
            .zip(low.rows.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-11, "same discrete system: {diff:e}");
    }

    #[test]
    fn degenerate_needs_nested_traces() {
        let base = neumann(2000);
        let spec = ForwardSolver::new(&base).eigenvalues(0).unwrap();
        let c = PerturbationSeq::new(vec![1.0]).unwrap();
        let k = build_kernel_from_coeffs(&base, &spec, &c, Grid::new(300).unwrap()).unwrap();
        assert_eq!(solve_gl(&k).unwrap().method, GlMethod::LowRank);
        assert!(matches!(
            solve_gl_with(&k, GlMethod::Degenerate),
            Err(Error::Domain(_))
        ));
        let dense = KernelF::from_fn(Grid::new(40).unwrap(), |_, _| 1.0);
        assert!(solve_gl_with(&dense, GlMethod::Degenerate).is_err());
    }

    #[test]
    fn kernel_examples() {
        let base = neumann(2000);
        let spec = ForwardSolver::new(&base).eigenvalues(1).unwrap();
        let g = Grid::new(100).unwrap();
        let k0 = build_kernel_from_coeffs(&base, &spec, &PerturbationSeq::new(vec![0.8]).unwrap(), g).unwrap();
        let k1 = build_kernel_from_coeffs(&base, &spec, &PerturbationSeq::from_pairs(&[(1, 0.5)]).unwrap(), g).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert!((k0.get(i, j) - 0.8).abs() < 1e-9);
                let exact = 0.5 * g.node(i).cos() * g.node(j).cos();
                assert!((k1.get(i, j) - exact).abs() < 1e-9);
            }
        }
        let f = build_kernel_from_norming(&spec, &[PI / (1.0 + PI)], g, &base).unwrap();
        assert!((f.coeffs().unwrap().get(0) - 1.0).abs() < 1e-9);
        assert!((0..g.len()).all(|i| (f.get(i, 0) - 1.0).abs() < 1e-9));
        let same = build_kernel_from_norming(&spec, &[spec.data()[0].a, spec.data()[1].a], g, &base).unwrap();
        assert_eq!(same.max_abs(), 0.0);
    }

    #[test]
    fn constant_perturbation_potential() {
        let base = neumann(2000);
        let c = PerturbationSeq::new(vec![1.0]).unwrap();
        let con = construct(&base, &c, &ConstructOptions::default()).unwrap();
        let q = con.operator.potential.values();
        let err = base
            .grid()
            .nodes()
            .zip(q)
            .map(|(x, q)| (q - 2.0 / (1.0 + x).powi(2)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-4, "{err:e}");
        assert_eq!(con.operator.alpha(), PI / 4.0);
        assert!((con.beta.cot_beta - 1.0 / (1.0 + PI)).abs() <= 1e-8);
    }

    #[test]
    fn cosine_perturbation_potential() {
        let base = neumann(2000);
        let c1 = 0.6;
        let c = PerturbationSeq::from_pairs(&[(1, c1)]).unwrap();
        let con = construct(&base, &c, &ConstructOptions::default()).unwrap();
        let err = base
            .grid()
            .nodes()
            .zip(con.operator.potential.values())
            .map(|(x, q)| {
                let d = 1.0 + c1 * (x / 2.0 + (2.0 * x).sin() / 4.0);
                let exact = 2.0 * c1 * ((2.0 * x).sin() * d + c1 * x.cos().powi(4)) / (d * d);
                (q - exact).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 1e-4, "{err:e}");
    }

    #[test]
    fn zero_kernel_leaves_potential() {
        let g = Grid::new(64).unwrap();
        let base = OperatorSpec::new(Potential::from_fn(g, |x| x.sin()).unwrap(), RobinAngles::new(1.0, 2.0).unwrap());
        let k = KernelF::from_fn(Grid::new(32).unwrap(), |_, _| 0.0);
        let q = reconstruct_potential(&base, &solve_gl(&k).unwrap()).unwrap();
        assert_eq!(q, base.potential);
    }

    #[test]
    fn beta_examples() {
        let base = neumann(2000);
        let spec = ForwardSolver::new(&base).eigenvalues(2).unwrap();
        let b = new_beta(&base, &spec, &PerturbationSeq::zero()).unwrap();
        assert_eq!(b.beta, PI / 2.0);
        let c = PerturbationSeq::new(vec![1.0]).unwrap();
        let b = new_beta(&base, &spec, &c).unwrap();
        assert!((b.beta - arccot(1.0 / (1.0 + PI))).abs() < 1e-9);
        let targets: Vec<f64> = spec.data().iter().map(|d| d.a / (1.0 + c.get(d.n) * d.a)).collect();
        let via_norming = new_beta_from_norming(&base, &spec, &targets).unwrap();
        assert!((via_norming.cot_beta - b.cot_beta).abs() < 1e-12);
        // On an even base Σc = 0 forces Σc/(1 + ca) = -Σc²a/(1 + ca) ≤ 0, so
        // both sums vanish only for c ≡ 0 and any other choice lowers cot β.
        let c = PerturbationSeq::new(vec![0.2, -0.2]).unwrap();
        assert_eq!(new_alpha(PI / 2.0, &c), PI / 2.0);
        let b = new_beta(&base, &spec, &c).unwrap();
        let expected: f64 = c.support().map(|(n, cn)| cn / (1.0 + cn * spec.data()[n].a)).sum();
        assert!((b.cot_beta - expected).abs() < 1e-9);
        assert!(b.cot_beta < 0.0);
    }

    #[test]
    fn transformed_solution_closed_form() {
        let base = neumann(2000);
        let c = PerturbationSeq::new(vec![1.0]).unwrap();
        let con = construct(&base, &c, &ConstructOptions::default()).unwrap();
        let trace = ForwardSolver::new(&base).integrate_phi(0.0).unwrap();
        let t = transform_solution(&trace, &con.solution, 0.0).unwrap();
        for (x, y) in t.grid.nodes().zip(&t.y) {
            assert!((y - 1.0 / (1.0 + x)).abs() < 1e-8);
        }
        let direct = ForwardSolver::new(&con.operator).integrate_phi(0.0).unwrap();
        let diff = t.y.iter().zip(&direct.y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff:e}");
        let l = t.y.len() - 1;
        assert!((t.y[l] * con.beta.cot_beta + t.yprime[l]).abs() < 1e-5);
        // Coarse path through the kernel grid.
        let coarse = Grid::new(400).unwrap();
        let resampled = SolutionTrace {
            grid: coarse,
            y: CubicSpline::new(trace.grid, &trace.y).resample(coarse),
            yprime: CubicSpline::new(trace.grid, &trace.yprime).resample(coarse),
            mu: 0.0,
            direction: Direction::ForwardFromZero,
        };
        let t = transform_solution(&resampled, &con.solution, 0.0).unwrap();
        assert_eq!(t.grid, coarse);
        for (x, y) in t.grid.nodes().zip(&t.y) {
            assert!((y - 1.0 / (1.0 + x)).abs() < 1e-6);
        }
        let back = ForwardSolver::new(&base).integrate_psi(0.0).unwrap();
        assert!(matches!(
            transform_solution(&back, &con.solution, 0.0),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn identity_construction() {
        let g = Grid::new(2000).unwrap();
        let base = OperatorSpec::new(
            Potential::from_fn(g, |x| x * (PI - x) / 5.0).unwrap(),
            RobinAngles::new(PI / 3.0, 2.0 * PI / 3.0).unwrap(),
        );
        let out = isospectral_construct(&base, &PerturbationSeq::zero()).unwrap();
        assert!(out.potential.max_abs_diff(&base.potential) <= 1e-10);
        assert!((out.alpha() - base.alpha()).abs() <= 1e-10);
        assert!((out.beta() - base.beta()).abs() <= 1e-10);
    }

    #[test]
    fn admissibility_boundary() {
        let base = neumann(2000);
        let bad = PerturbationSeq::new(vec![-1.0 / PI]).unwrap();
        let err = isospectral_construct(&base, &bad).unwrap_err();
        assert!(matches!(err.root(), Error::Inadmissible { index: 0, .. }), "{err}");
        let ok = PerturbationSeq::new(vec![-1.0 / (2.0 * PI)]).unwrap();
        let op = isospectral_construct(&base, &ok).unwrap();
        let spec = ForwardSolver::new(&op).eigenvalues(12).unwrap();
        for d in spec.data() {
            assert!((d.mu - (d.n * d.n) as f64).abs() <= 1e-6, "n = {}: {}", d.n, d.mu);
        }
    }

    #[test]
    fn alpha_update() {
        let c = PerturbationSeq::new(vec![1.0]).unwrap();
        assert_eq!(new_alpha(PI / 2.0, &c), PI / 4.0);
        let c = PerturbationSeq::new(vec![1.0, -1.0]).unwrap();
        assert_eq!(new_alpha(PI / 2.0, &c), PI / 2.0);
        assert_eq!(new_alpha(1.0, &PerturbationSeq::zero()), arccot(cot(1.0)));
    }

    #[test]
    fn non_positive_target_is_domain_error() {
        let base = neumann(200);
        let spec = ForwardSolver::new(&base).eigenvalues(1).unwrap();
        let err = build_kernel_from_norming(&spec, &[PI, 0.0], Grid::new(50).unwrap(), &base).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
