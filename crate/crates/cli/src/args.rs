use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bgwscale", version, about = "Scale functions and passage transforms of killed branching processes with immigration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output document format.
    #[arg(long, value_enum, default_value_t = OutFormat::Json, global = true)]
    pub out: OutFormat,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Include wall time in the output (breaks byte-identical reruns).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutFormat {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate or classify a model file.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Evaluate a scale function.
    Scale(ScaleArgs),
    /// Passage, explosion and derived transforms.
    Passage {
        #[command(subcommand)]
        action: PassageAction,
    },
    /// Immigration control problem.
    Control {
        #[command(subcommand)]
        action: ControlAction,
    },
    /// Monte Carlo estimators.
    Simulate(SimulateArgs),
    /// Run an invariant suite on a model.
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
pub enum ModelAction {
    Check(ModelArg),
    Classify(ModelArg),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArg {
    #[arg(long)]
    pub model: PathBuf,
}

/// `n` or an inclusive range `lo..hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid(pub Vec<u64>);

impl Grid {
    pub fn is_range(&self) -> bool {
        self.0.len() != 1
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("'{t}': {e}"));
        match s.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                if lo > hi {
                    return Err(format!("empty range {s}"));
                }
                if hi - lo > 100_000 {
                    return Err(format!("range {s} has more than 100001 points"));
                }
                Ok(Grid((lo..=hi).collect()))
            }
            None => Ok(Grid(vec![num(s)?])),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleKind {
    Phi,
    Psi,
    Phi0,
    Phiqq,
}

#[derive(Args, Debug)]
pub struct ScaleArgs {
    #[arg(value_enum, default_value_t = ScaleKind::Phi)]
    pub kind: ScaleKind,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub qbar: Option<f64>,
    #[arg(long)]
    pub x: Grid,
}

#[derive(Args, Debug)]
pub struct PointArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub x: Grid,
    #[arg(long, default_value = "0")]
    pub a: Grid,
}

#[derive(Subcommand, Debug)]
pub enum PassageAction {
    /// E_x[exp(-q T_a); T_a < ∞].
    Lt(PointArgs),
    /// P_x(T_a < ∞).
    Prob(PointArgs),
    /// E_x[T_a].
    Mean(PointArgs),
    /// Explosion before T_a: transform with --q, probability without, or
    /// E_x[zeta; zeta < ∞] with --mean.
    Explosion {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        mean: bool,
    },
    /// Law of the level of the last minimum before an exponential clock.
    Atmin {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        x: u64,
        /// With --k: conditional transforms of G and e_q - G.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        k: Option<u64>,
    },
    /// Generator of the chain conditioned on T_0 > e_q.
    Condition {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        q: f64,
        /// Largest state listed.
        #[arg(long)]
        x: u64,
    },
    /// Model tilted by varphi_qbar.
    Tilt {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        qbar: f64,
    },
    /// Joint transform of T_a and the area under the path.
    Avalanche {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        qbar: f64,
    },
}

#[derive(Args, Debug)]
pub struct ControlArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub q: f64,
    /// Lowest admissible level.
    #[arg(long, default_value_t = 0)]
    pub floor: u64,
}

/// `barrier:A` or `topup:M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyArg {
    Barrier(u64),
    TopUp(u64),
}

impl FromStr for PolicyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, n) = s.split_once(':').ok_or_else(|| format!("expected barrier:A or topup:M, got '{s}'"))?;
        let n = n.parse::<u64>().map_err(|e| format!("'{n}': {e}"))?;
        match kind {
            "barrier" => Ok(PolicyArg::Barrier(n)),
            "topup" => Ok(PolicyArg::TopUp(n)),
            _ => Err(format!("unknown policy '{kind}'")),
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum ControlAction {
    /// Barrier cost W_a(x) with --a, else the optimal value V(x).
    Value {
        #[command(flatten)]
        problem: ControlArgs,
        #[arg(long)]
        x: Grid,
        #[arg(long)]
        a: Option<Grid>,
    },
    /// B(a) = Phi_q(a) - Phi_q(a + 1).
    Gap {
        #[command(flatten)]
        problem: ControlArgs,
        #[arg(long)]
        a: Grid,
    },
    /// Grid check of the Bellman inequalities.
    Bellman {
        #[command(flatten)]
        problem: ControlArgs,
        #[arg(long, default_value_t = 12)]
        x_max: u64,
        #[arg(long, default_value_t = 12)]
        f_max: u64,
    },
    /// Monte Carlo cost of a policy.
    Simulate {
        #[command(flatten)]
        problem: ControlArgs,
        #[arg(long)]
        policy: PolicyArg,
        #[arg(long)]
        x: u64,
        #[command(flatten)]
        sim: SimFlags,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SimFlags {
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Population treated as explosion.
    #[arg(long, default_value_t = 1_000_000)]
    pub threshold: u64,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_jumps: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    /// E_x[exp(-q T_a)].
    Lt,
    /// E_x[exp(-q T_a - qbar ∫X)].
    Avalanche,
    /// E_x[T_a].
    Mean,
    /// E_x[exp(-q zeta); zeta < T_a].
    Explosion,
    /// E_x[zeta; zeta < ∞].
    MeanExplosion,
    /// Law of the minimum at an exponential clock.
    Atmin,
    /// Conditional transforms of G and e_q - G given X_G = k.
    AtminLt,
    /// P_x(T_a < e_q) with the clock simulated.
    Clock,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub estimator: Estimator,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub q: f64,
    #[arg(long, default_value_t = 0.0)]
    pub qbar: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long)]
    pub x: u64,
    #[arg(long, default_value_t = 0)]
    pub a: u64,
    #[arg(long, default_value_t = 0)]
    pub k: u64,
    #[command(flatten)]
    pub sim: SimFlags,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Analytic,
    Mc,
    Control,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Discount rate for the control suite.
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long, default_value_t = 0)]
    pub floor: u64,
    #[command(flatten)]
    pub sim: SimFlags,
}
