#![allow(dead_code)]

use std::path::PathBuf;

use infraplan::dataset::{load_budget, load_network};
use infraplan::simulator::{episode_return, Simulator};
use infraplan::{BudgetSpec64, NetworkSpec64};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Sewershed dataset with `n` assets and the shared five-year budget.
pub fn sewersheds(n: usize) -> (NetworkSpec64, BudgetSpec64) {
    let network = load_network(data_path(&format!("sewersheds{n}.json"))).unwrap();
    let budget = load_budget(data_path("budget.json")).unwrap();
    (network, budget)
}

/// Rolls out every one of the `2^(n h)` schedules through the simulator.
pub fn naive_optimum(network: &NetworkSpec64, budget: &BudgetSpec64) -> Option<(f64, Vec<Vec<bool>>)> {
    let sim = Simulator::new(network, budget).unwrap();
    let (n, h) = (network.n(), network.horizon());
    let mut best: Option<(f64, Vec<Vec<bool>>)> = None;
    for code in 0u64..1 << (n * h) {
        let plan: Vec<Vec<bool>> = (0..h).map(|t| (0..n).map(|i| code >> (t * n + i) & 1 == 1).collect()).collect();
        let steps = sim.rollout(&plan).unwrap();
        if steps.iter().any(|s| s.violated) {
            continue;
        }
        let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
        let (_, avg) = episode_return(&rewards);
        if best.as_ref().map_or(true, |(b, _)| avg > *b) {
            best = Some((avg, plan));
        }
    }
    best
}

/// Exhaustive 0/1 search; `None` if no subset meets the bounds.
pub fn brute_knapsack(values: &[f64], costs: &[f64], lower: f64, upper: f64) -> Option<f64> {
    let n = values.len();
    let mut best: Option<f64> = None;
    for m in 0u64..1 << n {
        let (mut v, mut c) = (0.0, 0.0);
        for i in 0..n {
            if m >> i & 1 == 1 {
                v += values[i];
                c += costs[i];
            }
        }
        if c >= lower - 1e-6 && c <= upper + 1e-6 && best.map_or(true, |b| v > b) {
            best = Some(v);
        }
    }
    best
}
