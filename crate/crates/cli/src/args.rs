use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use infraplan::budget::MappingMode;
use infraplan::dql::DqlHyperParams;
use infraplan::hdrl::HyperParams;
use infraplan::oracle::CostArithmetic;

/// Budget-constrained maintenance planning: training, exact solving and
/// plan evaluation.
#[derive(Debug, Parser)]
#[command(name = "infraplan", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset and budget file and print a summary.
    Validate { network: PathBuf, budget: PathBuf },
    /// Train one agent and write metrics.csv, plan.csv, trace.csv and
    /// checkpoint.json to the output directory.
    Train {
        method: Method,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Optimal plan by exhaustive search.
    SolveExact {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        oracle: OracleArgs,
        /// Also write the plan CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Number of budget-feasible multi-year plans.
    CountPlans {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        oracle: OracleArgs,
    },
    /// Feasible annual action counts per year.
    EnumerateActions {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = Arithmetic::Exact)]
        cost_arithmetic: Arithmetic,
        /// Print every subset as well.
        #[arg(long)]
        list: bool,
    },
    /// Objective, annual costs and constraint report of a plan CSV.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Independent training runs over seeds `0..k` with a summary CSV.
    Study {
        #[arg(long)]
        method: Method,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a seeded synthetic instance as network.json and budget.json.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        horizon: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Hdrl,
    Dql,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arithmetic {
    Exact,
    WholeUnits,
}

impl From<Arithmetic> for CostArithmetic {
    fn from(a: Arithmetic) -> Self {
        match a {
            Arithmetic::Exact => CostArithmetic::Exact,
            Arithmetic::WholeUnits => CostArithmetic::WholeUnits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mapping {
    Clamp,
    LiteralMax,
}

#[derive(Debug, Clone, Args)]
pub struct Inputs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub budget: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum, default_value_t = Arithmetic::Exact)]
    pub cost_arithmetic: Arithmetic,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Disable cumulative-cost pruning.
    #[arg(long)]
    pub no_prune: bool,
}

/// Shared training inputs and hyperparameter overrides.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub capacity: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub lr_actor1: Option<f64>,
    #[arg(long)]
    pub lr_actor2: Option<f64>,
    #[arg(long)]
    pub lr_critic: Option<f64>,
    #[arg(long)]
    pub lr_alpha: Option<f64>,
    #[arg(long)]
    pub alpha_init: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub target_entropy: Option<f64>,
    #[arg(long, value_enum)]
    pub mapping: Option<Mapping>,
    /// DQL learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epsilon_fraction: Option<f64>,
    #[arg(long)]
    pub epsilon_end: Option<f64>,
    #[arg(long)]
    pub per_alpha: Option<f64>,
}

impl RunArgs {
    pub fn hdrl(&self, seed: u64) -> HyperParams {
        let d = HyperParams::default();
        HyperParams {
            episodes: self.episodes.unwrap_or(d.episodes),
            hidden: self.hidden.unwrap_or(d.hidden),
            batch: self.batch.unwrap_or(d.batch),
            capacity: self.capacity.unwrap_or(d.capacity),
            gamma: self.gamma.unwrap_or(d.gamma),
            tau: self.tau.unwrap_or(d.tau),
            eval_every: self.eval_every.unwrap_or(d.eval_every),
            lr_actor1: self.lr_actor1.unwrap_or(d.lr_actor1),
            lr_actor2: self.lr_actor2.unwrap_or(d.lr_actor2),
            lr_critic: self.lr_critic.unwrap_or(d.lr_critic),
            lr_alpha: self.lr_alpha.unwrap_or(d.lr_alpha),
            alpha_init: self.alpha_init.unwrap_or(d.alpha_init),
            target_entropy: self.target_entropy.or(d.target_entropy),
            mapping: match self.mapping {
                Some(Mapping::LiteralMax) => MappingMode::LiteralMax,
                Some(Mapping::Clamp) => MappingMode::Clamp,
                None => d.mapping,
            },
            seed,
        }
    }

    pub fn dql(&self, seed: u64) -> DqlHyperParams {
        let d = DqlHyperParams::default();
        DqlHyperParams {
            episodes: self.episodes.unwrap_or(d.episodes),
            hidden: self.hidden.unwrap_or(d.hidden),
            batch: self.batch.unwrap_or(d.batch),
            capacity: self.capacity.unwrap_or(d.capacity),
            gamma: self.gamma.unwrap_or(d.gamma),
            tau: self.tau.unwrap_or(d.tau),
            eval_every: self.eval_every.unwrap_or(d.eval_every),
            lr: self.lr.unwrap_or(d.lr),
            epsilon_fraction: self.epsilon_fraction.unwrap_or(d.epsilon_fraction),
            epsilon_end: self.epsilon_end.unwrap_or(d.epsilon_end),
            per_alpha: self.per_alpha.unwrap_or(d.per_alpha),
            seed,
            ..d
        }
    }
}
