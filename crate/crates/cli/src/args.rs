//! Command-line flags and the equivalent JSON experiment config.
//!
//! Every subcommand's flags deserialize from the same structs, so a config file
//! `{"out": ..., "seed": ..., "command": {"<name>": {<flags>}}}` and the flag form
//! describe identical runs.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use onephase::solver::Method;

pub const DEFAULT_OUT: &str = "onephase-out";

#[derive(Debug, Parser)]
#[command(name = "onephase", version, about = "Experiments on the singularly perturbed one-phase free boundary problem")]
pub struct Cli {
    /// JSON experiment config, used instead of a subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving result.json and the CSV artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized inputs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub command: Command,
}

fn default_out() -> PathBuf {
    PathBuf::from(DEFAULT_OUT)
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Validate and tabulate a reaction term.
    Potential(PotentialArgs),
    /// Integrate a monotone or wedge profile.
    Profile(ProfileArgs),
    /// Minimize the energy with profile boundary data.
    Solve(SolveArgs),
    /// Inner variations of a field along vector fields.
    Vary(VaryArgs),
    /// Free boundary diagnostics.
    Check(CheckArgs),
    /// Exact limit solutions: interface, surface forms, stability form.
    Cone(ConeArgs),
    /// Repeat a check (or any config) over a list of eps values.
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Potential(_) => "potential",
            Command::Profile(_) => "profile",
            Command::Solve(_) => "solve",
            Command::Vary(_) => "vary",
            Command::Check(_) => "check",
            Command::Cone(_) => "cone",
            Command::Sweep(_) => "sweep",
        }
    }
}

/// Defaults shared by clap and serde.
macro_rules! parsed_default {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                <$t as Parser>::parse_from(["onephase"])
            }
        }
    )*};
}

parsed_default!(PotentialArgs, ProfileArgs, SolveArgs, VaryArgs, CheckArgs, ConeArgs, SweepArgs, TermArgs, FieldArgs);

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct TermArgs {
    /// Support endpoint T of the reference family.
    #[arg(long, default_value_t = 1.0)]
    pub support: f64,
    /// Reaction term JSON file; overrides --support.
    #[arg(long)]
    pub term: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// Sampled monotone profile along the last axis.
    Profile,
    /// Discrete minimizer with profile boundary data.
    Solution,
    /// Symmetric wedge profile with slope --slope (default eps).
    Wedge,
    /// `x⁺` along the last axis.
    Halfplane,
    /// `R log(|x|/R)⁺`.
    Radial,
    /// Field CSV plus grid JSON.
    File,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldArgs {
    #[arg(long, value_enum, default_value_t = FieldKind::Profile)]
    pub kind: FieldKind,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Lower corner coordinate of the square domain.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    /// Radius of the radial solution.
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    /// Asymptotic slope of the wedge profile.
    #[arg(long)]
    pub slope: Option<f64>,
    /// Field CSV (kind = file).
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Grid JSON; overrides --dim/--lo/--hi/--h.
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct PotentialArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub term: TermArgs,
    /// Sample count for the structural checks.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Number of intervals in the tabulation.
    #[arg(long, default_value_t = 100)]
    pub table: usize,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub term: TermArgs,
    /// Wedge profile instead of the monotone one.
    #[arg(long)]
    pub wedge: bool,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// Wedge slope.
    #[arg(long)]
    pub s: Option<f64>,
    /// Squared wedge slope (alternative to --s).
    #[arg(long)]
    pub s2: Option<f64>,
    /// Integration step.
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub t_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    /// Rescale the profile to this eps after integration.
    #[arg(long)]
    pub rescale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    ProjectedGradient,
    GaussSeidelNewton,
    Newton,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::ProjectedGradient => Method::ProjectedGradient,
            MethodArg::GaussSeidelNewton => Method::GaussSeidelNewton,
            MethodArg::Newton => Method::Newton,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// Linear interpolation of the boundary data along the last axis.
    Linear,
    /// The sampled profile itself.
    Profile,
    /// Zero in the interior.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub term: TermArgs,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 0.02)]
    pub h: f64,
    #[arg(long, value_enum, default_value_t = InitKind::Linear)]
    pub init: InitKind,
    #[arg(long, value_enum, default_value_t = MethodArg::Newton)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Solver config JSON; overrides --eps/--method/--tol/--max-iter.
    #[arg(long)]
    pub solve_config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct VaryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub term: TermArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    /// Scale of the energy; 0 selects the limit energy.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Vector field JSON; otherwise --count random fields from --seed.
    #[arg(long)]
    pub x: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub count: usize,
    /// Coefficient scale of random vector fields.
    #[arg(long, default_value_t = 0.3)]
    pub amplitude: f64,
    /// Flow time step of the finite-difference oracle.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Nondeg,
    Density,
    ZeroDensity,
    Lipschitz,
    L1,
    Hausdorff,
    Exit,
    Poincare,
}

/// Parameters shared by `check` and `sweep`.
#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckParams {
    #[arg(long, value_enum, default_value_t = CheckKind::Nondeg)]
    pub check: CheckKind,
    /// Level factor θ (defaults: τ, or τ/4 for exit).
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5])]
    pub radii: Vec<f64>,
    /// Density scale L (radii must be ≥ L·eps).
    #[arg(long = "L", default_value_t = 1.0)]
    pub l: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Scan window `x0,y0,x1,y1` (region for poincare).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub window: Option<Vec<f64>>,
    /// Base point for exit (defaults to the θε crossing along the last axis).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub point: Option<Vec<f64>>,
    /// Also write the node sets involved as CSV index lists.
    #[arg(long)]
    pub emit_sets: bool,
}

impl Default for CheckParams {
    fn default() -> Self {
        <CheckParams as Parser>::parse_from(["onephase"])
    }
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub term: TermArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: CheckParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeKind {
    Halfplane,
    Radial,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub term: TermArgs,
    #[arg(long, value_enum, default_value_t = ConeKind::Halfplane)]
    pub kind: ConeKind,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    /// Write the interface vertices as CSV.
    #[arg(long)]
    pub emit_interface: bool,
    /// Vector field JSON; otherwise a random field near the interface from --seed.
    #[arg(long)]
    pub x: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepArgs {
    /// Comma-separated eps values.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.1, 0.05])]
    pub eps: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub term: TermArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: CheckParams,
    /// Arbitrary command to repeat instead of a check (config files only).
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<Command>>,
}
