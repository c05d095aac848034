use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "mhodge",
    version,
    about = "Mixed elliptic-hyperbolic Hodge systems: classification, estimates, solves"
)]
pub struct Cli {
    /// Read the whole run (command and flags) from a JSON file instead of the
    /// command line.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

/// One run of the tool. The same shape is accepted from `--config`, with the
/// command name under `"command"` and flags as snake_case keys.
#[derive(Debug, Clone, Subcommand, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Type map of a system over a box (CSV, or PGM when the output ends in .pgm).
    Classify(ClassifyArgs),
    /// Characteristic lines through random exterior points, as CSV polylines.
    Characteristics(CharacteristicsArgs),
    /// Ratio ‖L*w‖/‖w‖ over generated admissible test functions.
    VerifyEstimate(SampleArgs),
    /// Green-identity defect at h and h/2 on random pairs.
    VerifyGreen(SampleArgs),
    /// Lower bound (L₀w, xyw) ≥ c‖w‖² on an omega_o domain.
    VerifyHomogeneous(HomogeneousArgs),
    /// Least-squares solve of Lu = g with the tangential condition on C.
    Solve(SolveArgs),
    /// Validate a domain file; optionally write its normalized form.
    ValidateDomain(ValidateArgs),
}

fn default_system() -> String {
    "hodge".into()
}
fn default_samples() -> usize {
    100
}
fn default_h() -> f64 {
    1.0 / 64.0
}
fn default_classify_h() -> f64 {
    0.01
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    100_000
}
fn default_length() -> f64 {
    4.0
}
fn default_bbox() -> Vec<f64> {
    vec![-1.5, 1.5, -1.5, 1.5]
}
fn default_g() -> String {
    "zero".into()
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyArgs {
    #[arg(long, default_value = "hodge")]
    #[serde(default = "default_system")]
    pub system: String,
    /// x0 x1 y0 y1
    #[arg(long, num_args = 4, allow_negative_numbers = true, value_names = ["X0", "X1", "Y0", "Y1"],
          default_values_t = default_bbox())]
    #[serde(default = "default_bbox")]
    pub bbox: Vec<f64>,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    #[serde(default = "default_classify_h")]
    pub h: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicsArgs {
    #[arg(long, default_value_t = 100)]
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    /// Half-length of each sampled line.
    #[arg(long, default_value_t = 4.0)]
    #[serde(default = "default_length")]
    pub length: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    #[arg(long, default_value = "hodge")]
    #[serde(default = "default_system")]
    pub system: String,
    /// Domain JSON file, or `builtin:omega|omega_m|omega_o`.
    #[arg(long)]
    pub domain: String,
    #[arg(long, default_value_t = 100)]
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0 / 64.0, allow_negative_numbers = true)]
    #[serde(default = "default_h")]
    pub h: f64,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogeneousArgs {
    #[arg(long)]
    pub domain: String,
    #[arg(long, default_value_t = 50)]
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0 / 64.0, allow_negative_numbers = true)]
    #[serde(default = "default_h")]
    pub h: f64,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveArgs {
    #[arg(long, default_value = "hodge")]
    #[serde(default = "default_system")]
    pub system: String,
    #[arg(long)]
    pub domain: String,
    /// `zero`, `manufactured`, or a CSV file with columns x,y,class,u1,u2 on
    /// the solver lattice.
    #[arg(long, default_value = "zero")]
    #[serde(default = "default_g")]
    pub g: String,
    #[arg(long, default_value_t = 1.0 / 64.0, allow_negative_numbers = true)]
    #[serde(default = "default_h")]
    pub h: f64,
    #[arg(long, default_value_t = 1e-10)]
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    /// Solution CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Report JSON; defaults to the solution path with a .json extension.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateArgs {
    #[arg(long)]
    pub domain: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Loads a run from JSON. Relative paths inside the file are resolved
/// against the file's directory.
pub fn load(path: &Path) -> Result<Command, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid("file_exists", format!("{}: {e}", path.display())))?;
    let mut cmd: Command =
        serde_json::from_str(&text).map_err(|e| CliError::invalid("config", format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    cmd.rebase(base);
    Ok(cmd)
}

fn rebase_path(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn rebase_str(base: &Path, s: &mut String) {
    let reserved = s.starts_with("builtin:") || s == "zero" || s == "manufactured";
    if !reserved && Path::new(s.as_str()).is_relative() {
        *s = base.join(s.as_str()).to_string_lossy().into_owned();
    }
}

impl Command {
    fn rebase(&mut self, base: &Path) {
        match self {
            Command::Classify(a) => rebase_path(base, &mut a.out),
            Command::Characteristics(a) => rebase_path(base, &mut a.out),
            Command::VerifyEstimate(a) | Command::VerifyGreen(a) => {
                rebase_str(base, &mut a.domain);
                a.out.iter_mut().for_each(|p| rebase_path(base, p));
            }
            Command::VerifyHomogeneous(a) => {
                rebase_str(base, &mut a.domain);
                a.out.iter_mut().for_each(|p| rebase_path(base, p));
            }
            Command::Solve(a) => {
                rebase_str(base, &mut a.domain);
                rebase_str(base, &mut a.g);
                rebase_path(base, &mut a.out);
                a.report.iter_mut().for_each(|p| rebase_path(base, p));
            }
            Command::ValidateDomain(a) => {
                rebase_str(base, &mut a.domain);
                a.out.iter_mut().for_each(|p| rebase_path(base, p));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_fills_defaults_and_rebases_paths() {
        let mut cmd: Command =
            serde_json::from_str(r#"{"command": "verify-estimate", "domain": "omega.json", "seed": 7}"#).unwrap();
        cmd.rebase(Path::new("runs"));
        let Command::VerifyEstimate(a) = cmd else {
            panic!("wrong command")
        };
        assert_eq!(a.system, "hodge");
        assert_eq!((a.samples, a.seed, a.h), (100, 7, 1.0 / 64.0));
        assert_eq!(Path::new(&a.domain), Path::new("runs/omega.json"));

        let mut cmd: Command =
            serde_json::from_str(r#"{"command": "solve", "domain": "builtin:omega", "out": "u.csv"}"#).unwrap();
        cmd.rebase(Path::new("runs"));
        let Command::Solve(a) = cmd else {
            panic!("wrong command")
        };
        assert_eq!((a.domain.as_str(), a.g.as_str()), ("builtin:omega", "zero"));
        assert_eq!(a.out, Path::new("runs/u.csv"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r: Result<Command, _> = serde_json::from_str(r#"{"command": "classify", "out": "t.csv", "hh": 1}"#);
        assert!(r.is_err());
    }
}
