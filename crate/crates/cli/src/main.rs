//! `isospec`: spectra, isospectral construction and uniqueness certificates
//! for Sturm-Liouville operators on `[0, π]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use isospec_core::harness::{FixedAngle, Quantity};
use isospec_core::{Grid, TheoremId, Tolerances};

mod commands;
mod exit;

use commands::RunConfig;
use exit::CliError;

#[derive(Parser)]
#[command(
    name = "isospec",
    version,
    about = "Sturm-Liouville spectra, isospectral construction and uniqueness certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, norming constants and kappa of an operator.
    Spectrum {
        /// Operator document.
        #[arg(long)]
        input: PathBuf,
        /// Spectrum document; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write an `n,mu,a,b,kappa` table.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Isospectral family member selected by a coefficient document.
    Construct {
        /// Base operator document.
        #[arg(long)]
        base: PathBuf,
        /// Coefficient document, an array of `{n, c}`.
        #[arg(long)]
        coeffs: PathBuf,
        /// Operator document to write; `<stem>.potential.csv` and
        /// `<stem>.verification.json` go next to it.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run one theorem certificate.
    Certify {
        #[arg(long, value_parser = theorem_parser())]
        theorem: TheoremId,
        /// Reference operator for two-operator certificates.
        #[arg(long)]
        base: Option<PathBuf>,
        /// Operator under test.
        #[arg(long)]
        candidate: Option<PathBuf>,
        /// Operator for single-operator certificates (same as --candidate).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Report document; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Boundary angle shared by hypothesis (thm1_2, thm5_2).
        #[arg(long, value_enum, default_value_t = AngleArg::Alpha)]
        fixed: AngleArg,
        /// Compare a_n / |kappa_n| (primary) or b_n / |psi(0, mu_n)| (mirror).
        #[arg(long, value_enum, default_value_t = QuantityArg::Primary)]
        quantity: QuantityArg,
        #[command(flatten)]
        common: Common,
    },
    /// Built-in showcase: Neumann base, c0 = 1 member, spectrum check and
    /// the Ambarzumyan certificate.
    Demo {
        /// Output directory.
        #[arg(long, default_value = "isospec-demo")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Largest eigenvalue index.
    #[arg(long, default_value_t = 12)]
    n_max: usize,
    /// Intervals of the solver grid (even); operators are resampled onto it.
    #[arg(long, default_value_t = 2000)]
    solver_m: usize,
    /// Intervals of the Gelfand-Levitan grid (even).
    #[arg(long, default_value_t = 400)]
    gl_m: usize,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
#[command(next_help_heading = "Tolerances")]
struct TolArgs {
    /// Absolute eigenvalue mismatch.
    #[arg(long, value_name = "X", value_parser = positive)]
    tol_iso: Option<f64>,
    /// Relative norming-constant or |kappa| mismatch.
    #[arg(long, value_name = "X", value_parser = positive)]
    tol_norming: Option<f64>,
    /// Theorem sums, scaled by sum|term| + 1.
    #[arg(long, value_name = "X", value_parser = positive)]
    tol_sum: Option<f64>,
    /// Relative characteristic-function identities.
    #[arg(long, value_name = "X", value_parser = positive)]
    tol_kappa: Option<f64>,
    /// End deviation allowed for even operators.
    #[arg(long, value_name = "X", value_parser = positive)]
    tol_levinson_end: Option<f64>,
    /// End deviation accepted as evidence of asymmetry.
    #[arg(long, value_name = "X", value_parser = positive)]
    tol_asymmetry: Option<f64>,
    /// Symmetry threshold for calling an operator even.
    #[arg(long, value_name = "X", value_parser = positive)]
    tol_symmetry: Option<f64>,
    /// Boundary angles fixed by a hypothesis.
    #[arg(long, value_name = "X", value_parser = positive)]
    tol_hypothesis: Option<f64>,
    /// max |q - q0| in uniqueness conclusions.
    #[arg(long, value_name = "X", value_parser = positive)]
    tol_potential: Option<f64>,
    /// Boundary-angle difference in uniqueness conclusions.
    #[arg(long, value_name = "X", value_parser = positive)]
    tol_angle: Option<f64>,
}

impl TolArgs {
    fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            iso: self.tol_iso.unwrap_or(d.iso),
            norming: self.tol_norming.unwrap_or(d.norming),
            sum: self.tol_sum.unwrap_or(d.sum),
            kappa: self.tol_kappa.unwrap_or(d.kappa),
            levinson_end: self.tol_levinson_end.unwrap_or(d.levinson_end),
            asymmetry: self.tol_asymmetry.unwrap_or(d.asymmetry),
            symmetry: self.tol_symmetry.unwrap_or(d.symmetry),
            hypothesis: self.tol_hypothesis.unwrap_or(d.hypothesis),
            potential: self.tol_potential.unwrap_or(d.potential),
            angle: self.tol_angle.unwrap_or(d.angle),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AngleArg {
    Alpha,
    Beta,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantityArg {
    Primary,
    Mirror,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        Ok(x) => Err(format!("tolerance must be positive and finite, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn theorem_parser() -> impl TypedValueParser<Value = TheoremId> {
    PossibleValuesParser::new(TheoremId::ALL.map(|id| id.as_str())).map(|s| s.parse::<TheoremId>().expect("listed id"))
}

fn tolerance_table() -> String {
    let mut s = String::from("Tolerance defaults (override with --tol-<name>):\n");
    for (name, value, meaning) in Tolerances::default().table() {
        s.push_str(&format!("  {name:<14} {value:<8e} {meaning}\n"));
    }
    s.push_str(
        "\nExit codes: 0 pass/ok, 2 I/O or schema, 3 inadmissible coefficients, \
         4 certificate fail or hypothesis violated, 5 inconclusive, 6 solver error",
    );
    s
}

impl Common {
    fn config(&self) -> Result<RunConfig, CliError> {
        let solver = Grid::new_even(self.solver_m).map_err(|e| CliError::usage(format!("--solver-m: {e}")))?;
        Grid::new_even(self.gl_m).map_err(|e| CliError::usage(format!("--gl-m: {e}")))?;
        Ok(RunConfig {
            n_max: self.n_max,
            solver,
            gl_m: self.gl_m,
            tol: self.tol.resolve(),
        })
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Spectrum { input, out, csv, common } => {
            commands::spectrum(&common.config()?, &input, out.as_deref(), csv.as_deref())
        }
        Command::Construct { base, coeffs, out, common } => {
            commands::construct(&common.config()?, &base, &coeffs, &out)
        }
        Command::Certify {
            theorem,
            base,
            candidate,
            input,
            out,
            fixed,
            quantity,
            common,
        } => {
            let opts = isospec_core::harness::UniquenessOptions {
                fixed: match fixed {
                    AngleArg::Alpha => FixedAngle::Alpha,
                    AngleArg::Beta => FixedAngle::Beta,
                },
                quantity: match quantity {
                    QuantityArg::Primary => Quantity::Primary,
                    QuantityArg::Mirror => Quantity::Mirror,
                },
            };
            let request = commands::CertifyRequest {
                theorem,
                base: base.as_deref(),
                candidate: candidate.as_deref().or(input.as_deref()),
                out: out.as_deref(),
                opts,
            };
            commands::certify(&common.config()?, &request)
        }
        Command::Demo { out, common } => commands::demo(&common.config()?, &out),
    }
}

fn main() -> ExitCode {
    let table = tolerance_table();
    let mut cmd = Cli::command().after_help(table.clone());
    for sub in ["spectrum", "construct", "certify", "demo"] {
        cmd = cmd.mut_subcommand(sub, |c| c.after_help(table.clone()));
    }
    let cli = match cmd.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
