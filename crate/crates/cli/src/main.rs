//! `bandfn`: scans, minima, verification suites and large-τ fits.
//!
//! Exit codes: 0 success, 1 check or solver failure, 2 invalid
//! configuration, 3 uncertified minimum.

mod output;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use bandfn::analysis::{
    asymptotic_fit, certify_minimum, degennes_tail_check, find_minimum, gaussian_bound_minimum,
    AsymptoticFit, MinimumCertificate, TailReport, DEFAULT_AXISYM_BRACKET, DEFAULT_MIN_TOL,
    DEFAULT_NEUMANN_BRACKET, TAIL_WINDOW,
};
use bandfn::bandfuncs::{scan, tau_grid, SolverOptions};
use bandfn::operators::{Family, DEFAULT_N_CELLS, DEFAULT_PAD};
use bandfn::verify::{self, Suite, SuiteReport, ASYMPTOTIC_RANGE, ASYMPTOTIC_SAMPLES, TAIL_SAMPLES};
use bandfn::eigensolve::DEFAULT_TOL;
use bandfn::Error;

use output::{scan_csv, scan_rows, to_json, Constants, Provenance, ScanRow};

#[derive(Parser)]
#[command(name = "bandfn", version, about = "Band functions of axisymmetric magnetic and de Gennes operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate band functions on a τ-grid
    Scan(ScanArgs),
    /// Locate and certify the minimum of a band function
    Minimize(MinimizeArgs),
    /// Run a verification suite
    Verify(VerifyArgs),
    /// Large-τ fits (axisym) or exponential tails (de Gennes)
    Asymptotics(AsymptoticsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Axisym,
    DegennesLine,
    DegennesNeumann,
    DegennesDirichlet,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct FamilyOpts {
    #[arg(long, value_enum, default_value = "axisym")]
    family: FamilyArg,
    /// Magnetic quantum number (axisym only)
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    m: i32,
}

impl FamilyOpts {
    fn family(&self) -> Result<Family, Error> {
        match (self.family, self.m) {
            (FamilyArg::Axisym, m) => Ok(Family::AxiSym { m }),
            (_, m) if m != 0 => Err(Error::InvalidArgument("--m applies to the axisym family only".into())),
            (FamilyArg::DegennesLine, _) => Ok(Family::DeGennesLine),
            (FamilyArg::DegennesNeumann, _) => Ok(Family::DeGennesNeumann),
            (FamilyArg::DegennesDirichlet, _) => Ok(Family::DeGennesDirichlet),
        }
    }
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = DEFAULT_N_CELLS)]
    n_cells: usize,
    /// Distance from the potential well to the truncation boundary
    #[arg(long, default_value_t = DEFAULT_PAD)]
    pad: f64,
    /// Eigenvalue bisection tolerance
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Write output here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn solver(&self) -> SolverOptions {
        SolverOptions {
            n_cells: self.n_cells,
            pad: self.pad,
            tol: self.tol,
        }
    }

    fn json_only(&self) -> Result<(), Error> {
        match self.format {
            Some(Format::Csv) => Err(Error::InvalidArgument("this subcommand only emits json".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    family: FamilyOpts,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    levels: Vec<usize>,
    #[arg(long, allow_negative_numbers = true)]
    tau_min: f64,
    #[arg(long)]
    tau_max: f64,
    #[arg(long)]
    tau_step: f64,
    /// Fill the deriv_fh column
    #[arg(long)]
    with_derivatives: bool,
    /// Append Θ₀ and √(4−π) columns
    #[arg(long)]
    with_constants: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MinimizeArgs {
    #[command(flatten)]
    family: FamilyOpts,
    #[arg(long, default_value_t = 1)]
    level: usize,
    /// Search interval; its ends must show a derivative sign change
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    bracket: Option<Vec<f64>>,
    /// Width at which golden-section search stops
    #[arg(long, default_value_t = DEFAULT_MIN_TOL)]
    xtol: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: SuiteArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Derivatives,
    Virial,
    Gap,
    Asymptotics,
    Interlacing,
    Hermite,
    Bounds,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Derivatives => Suite::Derivatives,
            SuiteArg::Virial => Suite::Virial,
            SuiteArg::Gap => Suite::Gap,
            SuiteArg::Asymptotics => Suite::Asymptotics,
            SuiteArg::Interlacing => Suite::Interlacing,
            SuiteArg::Hermite => Suite::Hermite,
            SuiteArg::Bounds => Suite::Bounds,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Args)]
struct AsymptoticsArgs {
    #[command(flatten)]
    family: FamilyOpts,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    levels: Vec<usize>,
    /// Defaults to 6 (axisym) or 2.5 (de Gennes)
    #[arg(long, allow_negative_numbers = true)]
    tau_min: Option<f64>,
    /// Defaults to 12 (axisym) or 3.5 (de Gennes)
    #[arg(long, allow_negative_numbers = true)]
    tau_max: Option<f64>,
    /// Defaults to 13 (axisym) or 11 (de Gennes)
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    common: Common,
}

/// Outcome of a subcommand: text to emit and the exit status.
struct Emit {
    text: String,
    code: u8,
}

#[derive(Serialize)]
struct ScanJson {
    provenance: Provenance,
    family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    constants: Option<Constants>,
    rows: Vec<ScanRow>,
}

fn cmd_scan(args: &ScanArgs) -> Result<Emit, Error> {
    let family = args.family.family()?;
    let opts = args.common.solver();
    let grid = tau_grid(args.tau_min, args.tau_max, args.tau_step)?;
    let result = scan(family, &args.levels, &grid, args.with_derivatives, &opts)?;
    let constants = if args.with_constants {
        let theta = find_minimum(Family::DeGennesNeumann, 1, DEFAULT_NEUMANN_BRACKET, DEFAULT_MIN_TOL, &opts)?;
        Some(Constants {
            theta0: theta.value,
            sqrt_4_minus_pi: gaussian_bound_minimum(),
        })
    } else {
        None
    };
    let text = match args.common.format.unwrap_or(Format::Csv) {
        Format::Csv => scan_csv(&result, constants),
        Format::Json => to_json(&ScanJson {
            provenance: Provenance::new(&opts, None),
            family: family.to_string(),
            constants,
            rows: scan_rows(&result),
        }),
    };
    Ok(Emit { text, code: 0 })
}

#[derive(Serialize)]
struct MinimizeJson {
    provenance: Provenance,
    family: String,
    level: usize,
    tau_star: f64,
    value: f64,
    error_estimate: f64,
    derivative_at_min: f64,
    second_derivative_estimate: f64,
    bracket: (f64, f64),
    iterations: usize,
    certificate: MinimumCertificate,
}

fn cmd_minimize(args: &MinimizeArgs) -> Result<Emit, Error> {
    args.common.json_only()?;
    let family = args.family.family()?;
    let opts = args.common.solver();
    let bracket = match (&args.bracket, family) {
        (Some(b), _) => (b[0], b[1]),
        (None, Family::AxiSym { .. }) => DEFAULT_AXISYM_BRACKET,
        (None, _) => DEFAULT_NEUMANN_BRACKET,
    };
    let report = find_minimum(family, args.level, bracket, args.xtol, &opts)?;
    let certificate = certify_minimum(&report, &opts)?;
    let out = MinimizeJson {
        provenance: Provenance::new(&opts, Some(args.xtol)),
        family: family.to_string(),
        level: report.level,
        tau_star: report.tau_star,
        value: report.value,
        error_estimate: report.error_estimate,
        derivative_at_min: report.derivative_at_min,
        second_derivative_estimate: report.second_derivative_estimate,
        bracket: report.bracket,
        iterations: report.iterations,
        certificate,
    };
    Ok(Emit {
        text: to_json(&out),
        code: if certificate.certified { 0 } else { 3 },
    })
}

#[derive(Serialize)]
struct VerifyJson {
    provenance: Provenance,
    suite: Suite,
    passed: bool,
    reports: Vec<SuiteReport>,
}

fn cmd_verify(args: &VerifyArgs) -> Result<Emit, Error> {
    args.common.json_only()?;
    let opts = args.common.solver();
    let suite = Suite::from(args.suite);
    let reports = verify::run(suite, &opts)?;
    let passed = reports.iter().all(|r| r.passed);
    for r in &reports {
        for c in r.checks.iter().filter(|c| !c.passed) {
            eprintln!("failed [{}] {}: measured {:e}, tolerance {:e}", r.suite, c.name, c.measured, c.tolerance);
        }
    }
    let out = VerifyJson {
        provenance: Provenance::new(&opts, None),
        suite,
        passed,
        reports,
    };
    Ok(Emit {
        text: to_json(&out),
        code: if passed { 0 } else { 1 },
    })
}

#[derive(Serialize)]
struct FitJson {
    #[serde(flatten)]
    fit: AsymptoticFit,
    /// `m² − 1/4`
    expected_c2: f64,
    expected_c0: f64,
}

#[derive(Serialize)]
struct AsymptoticsJson {
    provenance: Provenance,
    family: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fits: Vec<FitJson>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    tails: Vec<TailReport>,
}

fn cmd_asymptotics(args: &AsymptoticsArgs) -> Result<Emit, Error> {
    args.common.json_only()?;
    let family = args.family.family()?;
    let opts = args.common.solver();
    let mut out = AsymptoticsJson {
        provenance: Provenance::new(&opts, None),
        family: family.to_string(),
        fits: Vec::new(),
        tails: Vec::new(),
    };
    let mut code = 0;
    match family {
        Family::AxiSym { m } => {
            let range = (args.tau_min.unwrap_or(ASYMPTOTIC_RANGE.0), args.tau_max.unwrap_or(ASYMPTOTIC_RANGE.1));
            for &n in &args.levels {
                let fit = asymptotic_fit(family, n, range, args.samples.unwrap_or(ASYMPTOTIC_SAMPLES), &opts)?;
                out.fits.push(FitJson {
                    fit,
                    expected_c2: (m * m) as f64 - 0.25,
                    expected_c0: (2 * n - 1) as f64,
                });
            }
        }
        Family::DeGennesNeumann | Family::DeGennesDirichlet => {
            let range = (args.tau_min.unwrap_or(TAIL_WINDOW.0), args.tau_max.unwrap_or(TAIL_WINDOW.1));
            for &n in &args.levels {
                let tail = degennes_tail_check(n, range, args.samples.unwrap_or(TAIL_SAMPLES), &opts)?;
                if !tail.passed {
                    code = 1;
                }
                out.tails.push(tail);
            }
        }
        Family::DeGennesLine => {
            return Err(Error::InvalidArgument(
                "tails are defined for the half-line families; use degennes-neumann or degennes-dirichlet".into(),
            ))
        }
    }
    Ok(Emit { text: to_json(&out), code })
}

/// 2 for configuration problems, 1 for everything the solver reports.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::AtTau { source, .. } => exit_code(source),
        Error::InvalidArgument(_)
        | Error::InvalidMesh(_)
        | Error::NoSignChange { .. }
        | Error::IllConditioned(_)
        | Error::TooManyEigenvalues { .. } => 2,
        _ => 1,
    }
}

fn jobs(command: &Command) -> Option<usize> {
    match command {
        Command::Scan(a) => a.common.jobs,
        Command::Minimize(a) => a.common.jobs,
        Command::Verify(a) => a.common.jobs,
        Command::Asymptotics(a) => a.common.jobs,
    }
}

fn out_path(command: &Command) -> Option<&PathBuf> {
    match command {
        Command::Scan(a) => a.common.out.as_ref(),
        Command::Minimize(a) => a.common.out.as_ref(),
        Command::Verify(a) => a.common.out.as_ref(),
        Command::Asymptotics(a) => a.common.out.as_ref(),
    }
}

fn run(command: &Command) -> Result<Emit, Error> {
    match command {
        Command::Scan(a) => cmd_scan(a),
        Command::Minimize(a) => cmd_minimize(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Asymptotics(a) => cmd_asymptotics(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs(&cli.command) {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };

    let emit = match pool.install(|| run(&cli.command)) {
        Ok(emit) => emit,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };

    let written = match out_path(&cli.command) {
        Some(path) => fs::write(path, &emit.text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout()
            .lock()
            .write_all(emit.text.as_bytes())
            .map_err(|e| format!("cannot write to stdout: {e}")),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(emit.code)
}
