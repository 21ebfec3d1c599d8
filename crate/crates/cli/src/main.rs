//! Batch front door: run identity suites, solves, divergence-form
//! cross-validation and Montel experiments from config files.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/config error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "dirac-beltrami",
    about = "Spectral experiments for the Dirac-Beltrami equation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, clap::Args)]
struct CommonArgs {
    /// Key-value config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports and dumps.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker thread count (results are identical for any value).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the operator and algebra identity suites.
    VerifyIdentities(CommonArgs),
    /// Solve one Dirac-Beltrami instance and dump the field and report.
    Solve(CommonArgs),
    /// Divergence-form cross-validation via the Cayley transform.
    Divform(CommonArgs),
    /// Bounded-family generation and subsequence extraction.
    Montel(CommonArgs),
    /// Caccioppoli quotients for one certified solution.
    Caccioppoli(CommonArgs),
}

/// Verification failed (an assertion-style check did not hold).
const EXIT_VERIFY: u8 = 1;
/// Usage or configuration problem.
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&CommonArgs, fn(&commands::Ctx) -> dirac_beltrami::Result<bool>) =
        match &cli.command {
            Command::VerifyIdentities(c) => (c, commands::cmd_verify_identities),
            Command::Solve(c) => (c, commands::cmd_solve),
            Command::Divform(c) => (c, commands::cmd_divform),
            Command::Montel(c) => (c, commands::cmd_montel),
            Command::Caccioppoli(c) => (c, commands::cmd_caccioppoli),
        };

    if common.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(EXIT_CONFIG);
    }
    // results do not depend on the pool size; build it anyway so the flag
    // controls resource usage
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build_global();

    if let Err(e) = std::fs::create_dir_all(&common.out) {
        eprintln!("error: cannot create output directory: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let ctx = commands::Ctx {
        config_path: common.config.clone(),
        out_dir: common.out.clone(),
    };
    match run(&ctx) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &dirac_beltrami::Error) -> u8 {
    use dirac_beltrami::Error::*;
    match e {
        // input and configuration problems
        InvalidConfig(_) | Format(_) | Io(_) | Json(_) | UnsupportedDimension(_)
        | DimensionMismatch(_, _) | GridMismatch(_) | CoefficientNormTooLarge { .. }
        | EllipticityViolation { .. } | NotNormal { .. } | FamilyTooSmall { .. }
        | NotHarmonic { .. } | NotMonogenic { .. } | GradeOutOfRange { .. }
        | NotGradeOne | PolynomialPartUnsupported => EXIT_CONFIG,
        // verification-style failures
        ResidualGate { .. } | IterationBudget { .. } | GradePurity { .. } => EXIT_VERIFY,
    }
}
