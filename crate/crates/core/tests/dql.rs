mod common;

use std::ops::ControlFlow;

use common::naive_optimum;
use infraplan::dql::{dql_train, dql_train_with, DqlHyperParams};
use infraplan::knapsack::Subset;
use infraplan::network::BudgetSpec;
use infraplan::oracle::{asset_costs, evaluate_plan, CostArithmetic};
use infraplan::simulator::{episode_return, Simulator};
use infraplan::synthetic::{random_instance, SyntheticConfig};
use infraplan::{BudgetSpec64, NetworkSpec64};

fn small(seed: u64) -> (NetworkSpec64, BudgetSpec64) {
    let cfg = SyntheticConfig { n: 3, horizon: 3, annual_lower: 0.2, annual_upper: 0.6, ..SyntheticConfig::default() };
    random_instance(seed, &cfg).unwrap()
}

fn quick(episodes: usize, seed: u64) -> DqlHyperParams {
    DqlHyperParams { episodes, hidden: 32, batch: 32, capacity: 2000, eval_every: 5, seed, ..DqlHyperParams::default() }
}

#[test]
fn single_feasible_action_forces_the_plan() {
    let (network, _) = small(11);
    let h = network.horizon();
    let pick = Subset::from_bools(&[true, false, true]);
    let annual: Vec<f64> = (0..h).map(|t| pick.sum(&asset_costs(&network, t, CostArithmetic::Exact))).collect();
    let total = annual.iter().sum::<f64>();
    let budget = BudgetSpec::new(annual.clone(), annual, total + 1e-9).unwrap();
    let plan = vec![vec![true, false, true]; h];
    let rewards: Vec<f64> =
        Simulator::new(&network, &budget).unwrap().rollout(&plan).unwrap().iter().map(|s| s.reward).collect();
    let (ret, _) = episode_return(&rewards);

    let out = dql_train(&network, &budget, &quick(5, 0)).unwrap();
    assert_eq!(out.table.len(), 1);
    assert!(out.log.iter().all(|m| (m.ret - ret).abs() < 1e-12));
    assert_eq!(out.best.unwrap().plan.x(), plan.as_slice());
}

#[test]
fn best_plan_is_feasible_and_close_to_optimal() {
    for seed in 0..3 {
        let (network, budget) = small(seed);
        let (opt, _) = naive_optimum(&network, &budget).unwrap();
        let out = dql_train(&network, &budget, &quick(150, seed)).unwrap();
        assert_eq!(out.feasibility.violations, 0);
        let best = out.best.unwrap();
        assert!(evaluate_plan(&network, &budget, &best.plan).unwrap().is_feasible());
        assert!(best.objective >= 0.95 * opt, "seed {seed}: {} vs {opt}", best.objective);
        assert!(out.log.iter().all(|m| m.alpha.is_none() && m.actor1_loss.is_none()));
    }
}

#[test]
fn same_seed_same_run() {
    let (network, budget) = small(2);
    let a = dql_train(&network, &budget, &quick(30, 4)).unwrap();
    let b = dql_train(&network, &budget, &quick(30, 4)).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.best, b.best);
    assert_eq!(a.q, b.q);
}

#[test]
fn sink_can_stop_training() {
    let (network, budget) = small(6);
    let out = dql_train_with(&network, &budget, &quick(50, 0), |m, _| {
        if m.episode == 7 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }
    })
    .unwrap();
    assert_eq!(out.log.len(), 7);
}
