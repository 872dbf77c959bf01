//! Command-line and config-file parameters.
//!
//! Every subcommand's parameters are one struct that is both a clap
//! `Args` and a serde type, so `--config run.json` accepts exactly the
//! flags (in their long, snake_case form) with the same defaults.

use std::path::PathBuf;

use clap::{Args, FromArgMatches, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "quasikdv",
    version,
    about = "Reproducible KdV/Airy experiments with CSV and JSON artifacts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    /// JSON run configuration `{command, parameters, output_dir, seed}`;
    /// used instead of a subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for artifacts and the manifest.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    /// Seed for randomized sweeps.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Subcommand, Debug, Clone, PartialEq)]
pub enum Command {
    /// Linear Airy evolution of square-wave (or supplied) data.
    AiryEvolve(AiryArgs),
    /// Gauss-sum reconstruction at a rational time against the direct sum.
    Talbot(TalbotArgs),
    /// Integrate the truncated KdV system and store the trajectory.
    KdvSolve(KdvArgs),
    /// Nonlinear smoothing difference (and optional normal-form audit).
    SmoothingReport(SmoothingArgs),
    /// Green's function field, bounds audit and static identities.
    GreensVerify(GreensArgs),
    /// Dynamic and Gronwall identities on manufactured forced pairs.
    GronwallCheck(GronwallArgs),
    /// Scan shifts for ε-almost periods.
    AlmostPeriods(AlmostArgs),
    /// Stepanov norms of shift differences against their sup norms.
    StepanovDemo(StepanovArgs),
    /// Square-wave KdV run, smoothing report and almost-period scans.
    DeiftPipeline(DeiftArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AiryEvolve(_) => "airy-evolve",
            Command::Talbot(_) => "talbot",
            Command::KdvSolve(_) => "kdv-solve",
            Command::SmoothingReport(_) => "smoothing-report",
            Command::GreensVerify(_) => "greens-verify",
            Command::GronwallCheck(_) => "gronwall-check",
            Command::AlmostPeriods(_) => "almost-periods",
            Command::StepanovDemo(_) => "stepanov-demo",
            Command::DeiftPipeline(_) => "deift-pipeline",
        }
    }

    /// The resolved parameters, defaults included.
    pub fn parameters(&self) -> serde_json::Value {
        let v = match self {
            Command::AiryEvolve(a) => serde_json::to_value(a),
            Command::Talbot(a) => serde_json::to_value(a),
            Command::KdvSolve(a) => serde_json::to_value(a),
            Command::SmoothingReport(a) => serde_json::to_value(a),
            Command::GreensVerify(a) => serde_json::to_value(a),
            Command::GronwallCheck(a) => serde_json::to_value(a),
            Command::AlmostPeriods(a) => serde_json::to_value(a),
            Command::StepanovDemo(a) => serde_json::to_value(a),
            Command::DeiftPipeline(a) => serde_json::to_value(a),
        };
        v.expect("parameter structs serialize")
    }

    /// Builds a command from its config-file form.
    pub fn from_config(name: &str, parameters: serde_json::Value) -> Result<Self, String> {
        fn parse<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T, String> {
            serde_json::from_value(v).map_err(|e| format!("invalid parameters: {e}"))
        }
        let parameters = if parameters.is_null() {
            serde_json::Value::Object(Default::default())
        } else {
            parameters
        };
        let given: Vec<String> = match &parameters {
            serde_json::Value::Object(m) => m.keys().cloned().collect(),
            _ => return Err("parameters must be a JSON object".into()),
        };
        let command = match name {
            "airy-evolve" => Command::AiryEvolve(parse(parameters)?),
            "talbot" => Command::Talbot(parse(parameters)?),
            "kdv-solve" => Command::KdvSolve(parse(parameters)?),
            "smoothing-report" => Command::SmoothingReport(parse(parameters)?),
            "greens-verify" => Command::GreensVerify(parse(parameters)?),
            "gronwall-check" => Command::GronwallCheck(parse(parameters)?),
            "almost-periods" => Command::AlmostPeriods(parse(parameters)?),
            "stepanov-demo" => Command::StepanovDemo(parse(parameters)?),
            "deift-pipeline" => Command::DeiftPipeline(parse(parameters)?),
            other => return Err(format!("unknown command {other:?}")),
        };
        // flattened structs cannot deny unknown fields themselves
        let known = command.parameters();
        if let Some(extra) = given.iter().find(|k| known.get(k.as_str()).is_none()) {
            return Err(format!(
                "invalid parameters: unknown field {extra:?} for {name}"
            ));
        }
        Ok(command)
    }
}

/// Clap's defaults, so serde and the command line cannot drift apart.
fn clap_defaults<T: Args + FromArgMatches>() -> T {
    let cmd = T::augment_args(clap::Command::new("defaults").no_binary_name(true));
    let matches = cmd
        .try_get_matches_from(Vec::<String>::new())
        .expect("every parameter has a default");
    T::from_arg_matches(&matches).expect("defaults parse")
}

macro_rules! serde_defaults {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                clap_defaults()
            }
        }
    )*};
}

serde_defaults!(
    AiryArgs,
    TalbotArgs,
    KdvArgs,
    SmoothingArgs,
    GreensArgs,
    GronwallArgs,
    AlmostArgs,
    StepanovArgs,
    DeiftArgs
);

/// Parameters of the square-wave KdV/Airy runs shared by several commands.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowArgs {
    /// Wavenumbers `α₁,α₂`.
    #[arg(long, default_value = "1,1.4142135623730951")]
    pub alpha: String,
    /// Diophantine exponent recorded with the basis.
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    /// Truncation radius.
    #[arg(long = "N", default_value_t = 32)]
    #[serde(rename = "N")]
    pub n: i64,
    /// Amplitude multiplying the data.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// Coefficient JSON to use instead of square-wave data.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

impl Default for FlowArgs {
    fn default() -> Self {
        clap_defaults()
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long = "T", default_value_t = 0.01)]
    #[serde(rename = "T")]
    pub t_final: f64,
    /// `exponential-rk4` or `picard-fixed-point`.
    #[arg(long, default_value = "exponential-rk4")]
    pub scheme: String,
    #[arg(long, default_value_t = 1e-12)]
    pub picard_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub picard_max_iter: usize,
    /// Drop the quadratic term.
    #[arg(long)]
    pub linear: bool,
}

impl Default for SolverArgs {
    fn default() -> Self {
        clap_defaults()
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AiryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    /// Evolution time, or `p/q` for `t = 2πp/q`.
    #[arg(long, default_value = "0.01")]
    pub t: String,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub x_max: f64,
    #[arg(long, default_value_t = 4001)]
    pub samples: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TalbotArgs {
    #[arg(long, default_value_t = 1)]
    pub p: i64,
    #[arg(long, default_value_t = 2)]
    pub q: i64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long = "N", default_value_t = 2001)]
    #[serde(rename = "N")]
    pub n: i64,
    /// Samples on `[−π/α, π/α]`.
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KdvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0.9)]
    pub theta: f64,
    /// Constant standing in for "much larger than" in the region split.
    #[arg(long, default_value_t = 8.0)]
    pub margin: f64,
    /// Also run the normal-form audit on the trajectory.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreensArgs {
    /// `constant:c`, `gauss:a[:center]`, `sech2:a` or `random`.
    #[arg(long, default_value = "gauss:0.2")]
    pub q: String,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Half-width `L` of the window `[−L, L]`.
    #[arg(long = "L", default_value_t = 8.0)]
    #[serde(rename = "L")]
    pub half_width: f64,
    /// Finest spacing, as a number or `1/m`.
    #[arg(long, default_value = "1/128")]
    pub h: String,
    /// Number of spacings `h, 2h, 4h, …` for order estimates.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// `all` or one of `q-equation`, `g-second`, `g-third`, `G-identity`.
    #[arg(long, default_value = "all")]
    pub identity: String,
    /// Number of potentials for `--q random`.
    #[arg(long, default_value_t = 20)]
    pub count: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GronwallArgs {
    #[arg(long, default_value_t = 1.2)]
    pub kappa: f64,
    #[arg(long = "L", default_value_t = 8.0)]
    #[serde(rename = "L")]
    pub half_width: f64,
    /// Spatial intervals on `[−L, L]`; the order is estimated against half as many.
    #[arg(long, default_value_t = 512)]
    pub nx: usize,
    /// Time intervals on `[0, T]`.
    #[arg(long, default_value_t = 64)]
    pub nt: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Bump height: `q₁ = A e^{−x²} cos t`, `q₂ = A e^{−x²}`.
    #[arg(long, default_value_t = 0.3)]
    pub amplitude: f64,
    /// Weight `ψ = sech(x/R)`.
    #[arg(long = "R", default_value_t = 1.0)]
    #[serde(rename = "R")]
    pub weight_scale: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlmostArgs {
    /// `square` (sq x), `square-both` (sq x + sq αx) or `evolved`.
    #[arg(long, default_value = "square-both")]
    pub function: String,
    /// Second wavenumber of `square-both` and `evolved`.
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    pub alpha: f64,
    /// Time of the `evolved` profile, or `golden` for `t = π(√5−1)`.
    #[arg(long, default_value = "golden")]
    pub t: String,
    /// Truncation of the `evolved` profile.
    #[arg(long = "N", default_value_t = 255)]
    #[serde(rename = "N")]
    pub n: i64,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    pub x_max: f64,
    #[arg(long, default_value_t = 20_001)]
    pub samples: usize,
    /// Candidate shifts `k·step`, `|k| ≤ count`.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, default_value_t = 10_000)]
    pub count: i64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepanovArgs {
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    pub alpha: f64,
    /// Shifts `ℓ` whose differences `f(·+ℓ) − f` are measured.
    #[arg(long, default_value = "0.1,0.01,0.001")]
    pub shifts: String,
    /// Window offsets `y ∈ [0, span]` for the Stepanov sup.
    #[arg(long, default_value_t = 20.0)]
    pub span: f64,
    #[arg(long, default_value_t = 201)]
    pub offsets: usize,
    /// Simpson nodes on each unit window.
    #[arg(long, default_value_t = 20_001)]
    pub nodes: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeiftArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub flow: FlowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    /// Tolerance of the `t = 0` scan.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon_rough: f64,
    /// Tolerance of the irrational-time scan.
    #[arg(long, default_value_t = 2.0)]
    pub epsilon_smooth: f64,
    /// Truncation of the irrational-time slice of the linear part.
    #[arg(long, default_value_t = 255)]
    pub slice_n: i64,
}

/// `a,b` into two floats.
pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got {s:?}"));
    }
    let a = parts[0]
        .parse()
        .map_err(|_| format!("bad number {:?}", parts[0]))?;
    let b = parts[1]
        .parse()
        .map_err(|_| format!("bad number {:?}", parts[1]))?;
    Ok((a, b))
}

/// A comma-separated float list.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("bad number {p:?}")))
        .collect()
}

/// `x` or `a/b`.
pub fn parse_ratio(s: &str) -> Result<f64, String> {
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in {s:?}"))?;
            let b: f64 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in {s:?}"))?;
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| format!("bad number {s:?}")),
    }
}
