//! Subcommand bodies. Each returns the process exit code.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use isospec_core::gelfand_levitan::{construct as gl_construct, ConstructOptions, GlMethod};
use isospec_core::harness::{
    ambarzumyan_certificate_with, hypothesis_failure, kappa_relations_check_with, levinson_even_check_with,
    marchenko_consistency_with, thm12_certificate_with, thm52_certificate_with, UniquenessOptions,
};
use isospec_core::{
    CertificateReport, Error, ForwardSolver, Grid, OperatorSpec, PerturbationSeq, Potential, RobinAngles,
    SpectrumTable, TheoremId, Tolerances,
};
use serde::Serialize;

use crate::exit::{self, verdict_code, CliError};

pub struct RunConfig {
    pub n_max: usize,
    pub solver: Grid,
    pub gl_m: usize,
    pub tol: Tolerances,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::usage(format!("cannot write to stdout: {e}"))),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("finite floats only");
    s.push('\n');
    s
}

/// Reads an operator and moves it onto the solver grid.
fn load_operator(path: &Path, grid: Grid) -> Result<OperatorSpec, CliError> {
    let op = OperatorSpec::from_json(&read(path)?).map_err(|e| CliError::at(path.display(), e))?;
    Ok(on_grid(op, grid))
}

fn on_grid(op: OperatorSpec, grid: Grid) -> OperatorSpec {
    if op.grid() == grid {
        op
    } else {
        OperatorSpec::new(op.potential.resample(grid), op.angles)
    }
}

fn potential_csv(op: &OperatorSpec) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    op.write_potential_csv(&mut buf)?;
    Ok(buf)
}

/// `dir/<stem>.<suffix>` next to `out`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

pub fn spectrum(cfg: &RunConfig, input: &Path, out: Option<&Path>, csv: Option<&Path>) -> Result<u8, CliError> {
    let op = load_operator(input, cfg.solver)?;
    let spec = ForwardSolver::new(&op).spectrum(cfg.n_max, true)?;
    if let Some(path) = csv {
        let mut buf = Vec::new();
        spec.write_csv(&mut buf)?;
        write(path, &buf)?;
    }
    emit(out, &spec.to_json())?;
    Ok(exit::OK)
}

#[derive(Serialize)]
struct VerificationRow {
    n: usize,
    mu_base: f64,
    mu: f64,
    a_base: f64,
    a: f64,
    a_expected: f64,
}

#[derive(Serialize)]
struct Verification {
    n_max: usize,
    gl_intervals: usize,
    max_eigenvalue_difference: f64,
    max_norming_relative_error: f64,
    gl_max_residual: f64,
    alpha: f64,
    beta: f64,
    beta_endpoint_sensitivity: f64,
    rows: Vec<VerificationRow>,
}

fn verification_rows(base: &SpectrumTable, built: &SpectrumTable, c: &PerturbationSeq) -> Vec<VerificationRow> {
    base.data()
        .iter()
        .zip(built.data())
        .map(|(d0, d1)| VerificationRow {
            n: d0.n,
            mu_base: d0.mu,
            mu: d1.mu,
            a_base: d0.a,
            a: d1.a,
            a_expected: d0.a / (1.0 + c.get(d0.n) * d0.a),
        })
        .collect()
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

fn build_member(cfg: &RunConfig, base: &OperatorSpec, c: &PerturbationSeq) -> Result<(OperatorSpec, Verification), CliError> {
    let opts = ConstructOptions {
        gl_intervals: cfg.gl_m,
        method: GlMethod::Auto,
    };
    let built = gl_construct(base, c, &opts)?;
    let op = on_grid(built.operator, cfg.solver);
    let n_max = cfg.n_max.max(c.max_index().unwrap_or(0));
    let (s0, s1) = (
        ForwardSolver::new(base).eigenvalues(n_max)?,
        ForwardSolver::new(&op).eigenvalues(n_max)?,
    );
    let rows = verification_rows(&s0, &s1, c);
    let verification = Verification {
        n_max,
        gl_intervals: cfg.gl_m,
        max_eigenvalue_difference: max_of(rows.iter().map(|r| (r.mu - r.mu_base).abs())),
        max_norming_relative_error: max_of(rows.iter().map(|r| (r.a - r.a_expected).abs() / r.a_expected)),
        gl_max_residual: built.solution.max_residual,
        alpha: op.alpha(),
        beta: op.beta(),
        beta_endpoint_sensitivity: built.beta.endpoint_sensitivity,
        rows,
    };
    Ok((op, verification))
}

pub fn construct(cfg: &RunConfig, base: &Path, coeffs: &Path, out: &Path) -> Result<u8, CliError> {
    let base = load_operator(base, cfg.solver)?;
    let c = PerturbationSeq::from_json(&read(coeffs)?).map_err(|e| CliError::at(coeffs.display(), e))?;
    let (op, verification) = build_member(cfg, &base, &c)?;
    write(out, op.to_json().as_bytes())?;
    write(&sibling(out, "potential.csv"), &potential_csv(&op)?)?;
    write(&sibling(out, "verification.json"), to_json(&verification).as_bytes())?;
    eprintln!(
        "max |mu - mu0| = {:e}, max relative norming error = {:e}",
        verification.max_eigenvalue_difference, verification.max_norming_relative_error
    );
    Ok(exit::OK)
}

pub struct CertifyRequest<'a> {
    pub theorem: TheoremId,
    pub base: Option<&'a Path>,
    pub candidate: Option<&'a Path>,
    pub out: Option<&'a Path>,
    pub opts: UniquenessOptions,
}

fn required<'a>(path: Option<&'a Path>, flag: &str, theorem: TheoremId) -> Result<&'a Path, CliError> {
    path.ok_or_else(|| CliError::usage(format!("{theorem} needs {flag}")))
}

fn run_certificate(cfg: &RunConfig, req: &CertifyRequest) -> Result<Result<CertificateReport, Error>, CliError> {
    let (n, tol, id) = (cfg.n_max, &cfg.tol, req.theorem);
    let candidate = load_operator(required(req.candidate, "--candidate or --input", id)?, cfg.solver)?;
    let base = match id {
        TheoremId::Thm1_2 | TheoremId::Thm5_2 | TheoremId::MarchenkoConsistency => {
            Some(load_operator(required(req.base, "--base", id)?, cfg.solver)?)
        }
        TheoremId::Thm1_4 => req.base.map(|p| load_operator(p, cfg.solver)).transpose()?,
        TheoremId::Levinson | TheoremId::KappaRelations => None,
    };
    Ok(match id {
        TheoremId::Thm1_2 => thm12_certificate_with(base.as_ref().unwrap(), &candidate, n, tol, req.opts),
        TheoremId::Thm5_2 => thm52_certificate_with(base.as_ref().unwrap(), &candidate, n, tol, req.opts),
        TheoremId::MarchenkoConsistency => marchenko_consistency_with(base.as_ref().unwrap(), &candidate, n, tol),
        TheoremId::Thm1_4 => {
            let alpha = base.as_ref().map_or(candidate.alpha(), |b| b.alpha());
            ambarzumyan_certificate_with(alpha, &candidate, n, tol)
        }
        TheoremId::Levinson => levinson_even_check_with(&candidate, n, tol),
        TheoremId::KappaRelations => kappa_relations_check_with(&candidate, n, tol),
    })
}

pub fn certify(cfg: &RunConfig, req: &CertifyRequest) -> Result<u8, CliError> {
    let report = match run_certificate(cfg, req)? {
        Ok(r) => r,
        Err(e) => hypothesis_failure(req.theorem, e)?,
    };
    emit(req.out, &report.to_json())?;
    eprintln!("{}: {} ({})", report.theorem_id, report.verdict, report.details);
    Ok(verdict_code(report.verdict))
}

/// Neumann base, its `c₀ = 1` family member, a spectrum check of the member
/// and the Ambarzumyan certificate of the base.
pub fn demo(cfg: &RunConfig, dir: &Path) -> Result<u8, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    let base = OperatorSpec::new(Potential::zero(cfg.solver), RobinAngles::new(PI / 2.0, PI / 2.0)?);
    write(&dir.join("base.operator.json"), base.to_json().as_bytes())?;

    let c = PerturbationSeq::new(vec![1.0])?;
    let (member, verification) = build_member(cfg, &base, &c)?;
    write(&dir.join("member.operator.json"), member.to_json().as_bytes())?;
    write(&dir.join("member.potential.csv"), &potential_csv(&member)?)?;

    let mut table = String::from("n,mu,mu_expected,mu_error,a,a_expected,a_relative_error\n");
    for r in verification.rows.iter().take(cfg.n_max + 1) {
        let mu_expected = (r.n * r.n) as f64;
        table.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?}\n",
            r.n,
            r.mu,
            mu_expected,
            (r.mu - mu_expected).abs(),
            r.a,
            r.a_expected,
            (r.a - r.a_expected).abs() / r.a_expected
        ));
    }
    write(&dir.join("member.residuals.csv"), table.as_bytes())?;

    let report = ambarzumyan_certificate_with(PI / 2.0, &base, cfg.n_max, &cfg.tol)?;
    write(&dir.join("ambarzumyan.json"), report.to_json().as_bytes())?;

    let spectrum_ok = verification.max_eigenvalue_difference <= cfg.tol.iso
        && verification.max_norming_relative_error <= cfg.tol.norming;
    println!(
        "member c0 = 1: alpha = {:.12}, cot beta = {:.12}",
        member.alpha(),
        member.angles.cot_beta()
    );
    println!(
        "spectrum check n <= {}: max |mu - n^2| = {:e}, max relative norming error = {:e} ({})",
        cfg.n_max,
        verification.max_eigenvalue_difference,
        verification.max_norming_relative_error,
        if spectrum_ok { "ok" } else { "exceeds tolerance" }
    );
    println!("ambarzumyan on base: {}", report.verdict);
    println!("wrote 5 files to {}", dir.display());
    if !spectrum_ok {
        return Ok(exit::FAIL);
    }
    Ok(verdict_code(report.verdict))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn siblings_share_the_stem() {
        assert_eq!(sibling(Path::new("out/member.json"), "potential.csv"), Path::new("out/member.potential.csv"));
        assert_eq!(sibling(Path::new("plain"), "verification.json"), Path::new("plain.verification.json"));
    }

    #[test]
    fn resampling_is_skipped_on_the_solver_grid() {
        let g = Grid::new(64).unwrap();
        let op = OperatorSpec::new(Potential::from_fn(g, |x| x).unwrap(), RobinAngles::new(1.0, 2.0).unwrap());
        assert_eq!(on_grid(op.clone(), g).potential.values(), op.potential.values());
        let fine = on_grid(op, Grid::new(128).unwrap());
        assert_eq!(fine.grid().intervals(), 128);
        assert!((fine.potential.values()[64] - PI / 2.0).abs() < 1e-12);
    }
}
