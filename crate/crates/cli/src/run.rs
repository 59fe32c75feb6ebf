use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;

use anyhow::{bail, Context, Result};
use infraplan::dataset::{load_budget, load_network, save_budget, save_network};
use infraplan::dql::dql_train;
use infraplan::hdrl::{train, BestPlan, FeasibilityTally};
use infraplan::nn::checkpoint::Checkpoint;
use infraplan::oracle::{
    average_condition, count_feasible_plans, evaluate_plan, feasible_actions, network_condition, solve_optimal_plan, OracleOptions,
};
use infraplan::report::{metrics_to_csv, plan_to_csv, read_plan, trace_to_csv, write_atomic, write_plan, EpisodeMetrics};
use infraplan::simulator::{Simulator, TraceRow};
use infraplan::synthetic::{random_instance, SyntheticConfig};
use infraplan::{BudgetSpec64, NetworkSpec64};

use crate::args::{Cli, Command, Inputs, Method, OracleArgs, RunArgs};

fn load(inputs: &Inputs) -> Result<(NetworkSpec64, BudgetSpec64)> {
    let network = load_network(&inputs.network).with_context(|| format!("loading {}", inputs.network.display()))?;
    let budget = load_budget(&inputs.budget).with_context(|| format!("loading {}", inputs.budget.display()))?;
    budget.check_compatible(&network)?;
    Ok((network, budget))
}

fn oracle_options(a: &OracleArgs) -> OracleOptions {
    OracleOptions { arithmetic: a.cost_arithmetic.into(), prune: !a.no_prune, jobs: a.jobs.max(1) }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { network, budget } => {
            let (network, budget) = load(&Inputs { network, budget })?;
            println!(
                "ok: {} assets, {} condition states, horizon {}, total weight {:.2}",
                network.n(),
                network.k(),
                network.horizon(),
                network.total_weight()
            );
            println!("initial average condition {:.4}", network_condition(&network));
            println!("lifecycle budget {}, annual minima sum {}", budget.total(), budget.lower().iter().sum::<f64>());
        }
        Command::Train { method, run, seed, out_dir } => {
            let (network, budget) = load(&run.inputs)?;
            let outcome = train_once(method, &run, seed, &network, &budget)?;
            write_run(&out_dir, &network, &budget, &outcome)?;
            println!("episodes {}", outcome.log.len());
            match &outcome.best {
                Some(b) => println!(
                    "best objective {:.6} (average condition {:.4}) at episode {}",
                    b.objective,
                    average_condition(network.k(), b.objective),
                    b.episode + 1
                ),
                None => println!("no budget-feasible plan found"),
            }
        }
        Command::SolveExact { inputs, oracle, out } => {
            let (network, budget) = load(&inputs)?;
            let Some(opt) = solve_optimal_plan(&network, &budget, &oracle_options(&oracle))? else {
                bail!("no budget-feasible plan exists");
            };
            println!("objective {:.9}", opt.objective);
            println!("average condition {:.6}", opt.average_condition);
            println!("plans evaluated {}", opt.plans_evaluated);
            print!("{}", plan_to_csv(&network, &opt.plan));
            if let Some(path) = out {
                write_plan(&network, &opt.plan, &path)?;
            }
        }
        Command::CountPlans { inputs, oracle } => {
            let (network, budget) = load(&inputs)?;
            println!("{}", count_feasible_plans(&network, &budget, &oracle_options(&oracle))?);
        }
        Command::EnumerateActions { inputs, cost_arithmetic, list } => {
            let (network, budget) = load(&inputs)?;
            let years = feasible_actions(&network, &budget, cost_arithmetic.into())?;
            for (t, y) in years.iter().enumerate() {
                println!("year {}: {}", t + 1, y.len());
                if list {
                    for (s, c) in y.subsets.iter().zip(&y.costs) {
                        let ids: Vec<&str> = s.indices().map(|i| network.assets()[i].id.as_str()).collect();
                        println!("  {} {:.2}", ids.join(";"), c);
                    }
                }
            }
        }
        Command::Evaluate { inputs, plan } => {
            let (network, budget) = load(&inputs)?;
            let plan = read_plan(&network, &plan)?;
            let e = evaluate_plan(&network, &budget, &plan)?;
            println!("objective {:.9}", e.objective);
            println!("average condition {:.6}", e.average_condition);
            for (t, (c, v)) in e.annual_costs.iter().zip(&e.violations).enumerate() {
                let mut flags = Vec::new();
                if v.annual_lower {
                    flags.push("below annual minimum");
                }
                if v.annual_upper {
                    flags.push("above annual maximum");
                }
                if v.lifecycle {
                    flags.push("over lifecycle budget");
                }
                println!("year {}: cost {:.2} {}", t + 1, c, if flags.is_empty() { "ok".into() } else { flags.join(", ") });
            }
            println!("total cost {:.2}", e.total_cost);
            println!("feasible {}", if e.is_feasible() { "yes" } else { "no" });
        }
        Command::Study { method, run, seeds, jobs, out_dir } => study(method, &run, seeds, jobs, &out_dir)?,
        Command::Synth { seed, n, horizon, out_dir } => {
            let cfg = SyntheticConfig { n, horizon, ..SyntheticConfig::default() };
            let (network, budget) = random_instance::<f64>(seed, &cfg)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            save_network(&network, out_dir.join("network.json"))?;
            save_budget(&budget, out_dir.join("budget.json"))?;
            println!("wrote {}", out_dir.display());
        }
    }
    Ok(())
}

struct RunOutcome {
    log: Vec<EpisodeMetrics>,
    best: Option<BestPlan<f64>>,
    checkpoint: Checkpoint<f64>,
    feasibility: FeasibilityTally,
}

fn train_once(method: Method, run: &RunArgs, seed: u64, network: &NetworkSpec64, budget: &BudgetSpec64) -> Result<RunOutcome> {
    Ok(match method {
        Method::Hdrl => {
            let o = train(network, budget, &run.hdrl(seed))?;
            RunOutcome { checkpoint: o.bundle.to_checkpoint(), log: o.log, best: o.best, feasibility: o.feasibility }
        }
        Method::Dql => {
            let o = dql_train(network, budget, &run.dql(seed))?;
            let mut checkpoint = Checkpoint::new();
            checkpoint.push_mlp("q", &o.q);
            RunOutcome { checkpoint, log: o.log, best: o.best, feasibility: o.feasibility }
        }
    })
}

fn write_run(dir: &Path, network: &NetworkSpec64, budget: &BudgetSpec64, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join("metrics.csv"), metrics_to_csv(&outcome.log).as_bytes())?;
    outcome.checkpoint.save(dir.join("checkpoint.json"))?;
    if let Some(best) = &outcome.best {
        write_plan(network, &best.plan, dir.join("plan.csv"))?;
        let sim = Simulator::new(network, budget)?;
        let steps = sim.rollout(best.plan.x())?;
        let rows: Vec<TraceRow> = steps
            .iter()
            .zip(best.plan.x())
            .enumerate()
            .map(|(t, (s, x))| TraceRow::from_step(&sim, best.episode + 1, t + 1, x, s))
            .collect();
        write_atomic(&dir.join("trace.csv"), trace_to_csv(&rows).as_bytes())?;
    }
    if outcome.feasibility.violations > 0 {
        bail!("{} executed years broke a budget constraint", outcome.feasibility.violations);
    }
    Ok(())
}

fn study(method: Method, run: &RunArgs, seeds: u64, jobs: usize, out_dir: &Path) -> Result<()> {
    let (network, budget) = load(&run.inputs)?;
    let next = AtomicU64::new(0);
    let results: Mutex<Vec<Option<Result<String>>>> = Mutex::new((0..seeds).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..jobs.clamp(1, seeds.max(1) as usize) {
            s.spawn(|| loop {
                let seed = next.fetch_add(1, Ordering::SeqCst);
                if seed >= seeds {
                    break;
                }
                let row = train_once(method, run, seed, &network, &budget).and_then(|o| {
                    write_run(&out_dir.join(format!("seed-{seed}")), &network, &budget, &o)?;
                    Ok(match &o.best {
                        Some(b) => format!(
                            "{seed},{},{},{},{}",
                            b.objective,
                            average_condition(network.k(), b.objective),
                            b.plan.total_cost(),
                            b.episode + 1
                        ),
                        None => format!("{seed},,,,"),
                    })
                });
                results.lock().unwrap()[seed as usize] = Some(row);
            });
        }
    });
    let mut csv = String::from("seed,objective,average_condition,total_cost,best_episode\n");
    let mut objectives = Vec::new();
    for r in results.into_inner().unwrap() {
        let row = r.expect("every seed ran")?;
        if let Some(obj) = row.split(',').nth(1).and_then(|f| f.parse::<f64>().ok()) {
            objectives.push(obj);
        }
        csv.push_str(&row);
        csv.push('\n');
    }
    write_atomic(&out_dir.join("summary.csv"), csv.as_bytes())?;
    if !objectives.is_empty() {
        let mean = objectives.iter().sum::<f64>() / objectives.len() as f64;
        println!("runs {seeds}, with feasible plan {}, mean objective {mean:.6}", objectives.len());
        println!("mean average condition {:.4}", average_condition(network.k(), mean));
    }
    Ok(())
}
