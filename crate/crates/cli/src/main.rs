use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Checks and simulations for third-order variational systems.
#[derive(Debug, Parser)]
#[command(name = "edskit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the Helmholtz-type conditions of a model at seeded samples.
    CheckVariational(VariationalArgs),
    /// Check a generator against a model through multiplier solves.
    CheckSymmetry(SymmetryArgs),
    /// Integrate the spinning particle from initial data.
    Simulate(SimulateArgs),
    /// Compare the parametric and time-parametrized spin systems on random jets.
    ReduceCheck(ReduceArgs),
    /// Print prolongation coefficients of a generator at a point.
    Prolong(ProlongArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Sampling interval for t, as `lo,hi`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub t_range: Option<(f64, f64)>,
    /// Sampling interval for every xᵃ, as `lo,hi`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub x_range: Option<(f64, f64)>,
    /// Velocity components are drawn from [-v_max, v_max].
    #[arg(long)]
    pub v_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SpinFlags {
    /// Time component of the spin four-vector of the built-in model.
    #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
    pub s0: f64,
    /// Spatial spin vector of the built-in model.
    #[arg(long, value_parser = parse_vec3, default_value = "0.3,-0.4,0.5", allow_hyphen_values = true)]
    pub s: [f64; 3],
    /// Mass parameter of the built-in model.
    #[arg(long, default_value_t = 1.3)]
    pub m: f64,
}

#[derive(Debug, Args)]
pub struct VariationalArgs {
    /// Model document.
    #[arg(required_unless_present = "builtin")]
    pub model: Option<std::path::PathBuf>,
    /// Use a built-in model instead of a document (`spin`).
    #[arg(long, conflicts_with = "model")]
    pub builtin: Option<String>,
    #[command(flatten)]
    pub spin: SpinFlags,
    #[command(flatten)]
    pub sampling: SampleArgs,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct SymmetryArgs {
    /// Model document.
    #[arg(required_unless_present = "builtin")]
    pub model: Option<std::path::PathBuf>,
    #[arg(long, conflicts_with = "model")]
    pub builtin: Option<String>,
    #[command(flatten)]
    pub spin: SpinFlags,
    /// Rotation axis `n` of a pseudo-orthogonal generator.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub rotation: Option<[f64; 3]>,
    /// Boost vector `q` of a pseudo-orthogonal generator.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub boost: Option<[f64; 3]>,
    /// Generator document.
    #[arg(long, conflicts_with_all = ["rotation", "boost"])]
    pub generator: Option<std::path::PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Central-difference step of the Lie derivative.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0", allow_hyphen_values = true)]
    pub x0: [f64; 3],
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub v0: [f64; 3],
    /// Initial acceleration v′.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0", allow_hyphen_values = true)]
    pub a0: [f64; 3],
    #[command(flatten)]
    pub spin: SpinFlags,
    #[arg(long)]
    pub dt: f64,
    #[arg(long)]
    pub steps: usize,
    /// Move a0 along the constraint gradient onto the constraint surface.
    #[arg(long)]
    pub project_initial: bool,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub spin: SpinFlags,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProlongArgs {
    /// Generator document.
    pub generator: std::path::PathBuf,
    /// Model whose parameters the generator may act on.
    #[arg(long, conflicts_with = "builtin")]
    pub model: Option<std::path::PathBuf>,
    #[arg(long)]
    pub builtin: Option<String>,
    #[command(flatten)]
    pub spin: SpinFlags,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Point document (default: the origin).
    #[arg(long)]
    pub at: Option<std::path::PathBuf>,
    /// Also print each step of the recursion.
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| {
            let x = x.trim();
            x.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{x}` is not a finite number"))
        })
        .collect()
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let v = parse_list(s)?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 3 comma-separated numbers, got {}", v.len()))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [lo, hi] if lo < hi => Ok((*lo, *hi)),
        [_, _] => Err("range needs lo < hi".into()),
        v => Err(format!("expected `lo,hi`, got {} numbers", v.len())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::CheckVariational(a) => commands::check_variational(&a),
        Command::CheckSymmetry(a) => commands::check_symmetry(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::ReduceCheck(a) => commands::reduce_check(&a),
        Command::Prolong(a) => commands::prolong(&a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("edskit: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn vectors_and_ranges() {
        assert_eq!(parse_vec3("1, -2,3.5").unwrap(), [1.0, -2.0, 3.5]);
        assert!(parse_vec3("1,2").is_err());
        assert!(parse_vec3("1,2,nan").is_err());
        assert_eq!(parse_range("-1,2").unwrap(), (-1.0, 2.0));
        assert!(parse_range("2,1").is_err());
    }

    #[test]
    fn command_line_is_consistent() {
        Cli::command().debug_assert();
    }
}
