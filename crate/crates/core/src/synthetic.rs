//! Seeded synthetic instances for tests, benchmarks and studies.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::knapsack::enumerate_feasible_subsets;
use crate::network::{AssetSpec, BudgetSpec, ConditionDistribution, NetworkSpec, TransitionMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub horizon: usize,
    pub k: usize,
    /// Annual window as fractions of the total network treatment cost.
    pub annual_lower: f64,
    pub annual_upper: f64,
    /// Lifecycle cap as a fraction of `horizon * annual_upper`.
    pub lifecycle: f64,
    /// Fully random stochastic matrices instead of monotone deterioration.
    pub dense_matrices: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 6,
            horizon: 4,
            k: 5,
            annual_lower: 0.25,
            annual_upper: 0.40,
            lifecycle: 0.85,
            dense_matrices: false,
        }
    }
}

fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.gen_range(1e-9f64..1.0).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// Deterioration that only moves to worse states: stay with probability
/// `p`, else drop one state (occasionally two).
fn monotone_matrix<R: Rng>(rng: &mut R, k: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; k]; k];
    for (j, row) in rows.iter_mut().enumerate() {
        if j + 1 == k {
            row[j] = 1.0;
            continue;
        }
        let stay = rng.gen_range(0.55..0.95);
        row[j] = stay;
        if j + 2 < k {
            let two = (1.0 - stay) * rng.gen_range(0.0..0.3);
            row[j + 2] = two;
            row[j + 1] = 1.0 - stay - two;
        } else {
            row[j + 1] = 1.0 - stay;
        }
    }
    rows
}

fn cast<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

/// Draws per seed before giving up on a configuration.
const MAX_ATTEMPTS: usize = 1000;

/// Random instance with every year admitting at least one feasible action
/// and at least one schedule within the lifecycle cap.
pub fn random_instance<T: Scalar>(seed: u64, cfg: &SyntheticConfig) -> Result<(NetworkSpec<T>, BudgetSpec<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut assets = Vec::with_capacity(cfg.n);
        for i in 0..cfg.n {
            let det = if cfg.dense_matrices {
                (0..cfg.k).map(|_| random_simplex(&mut rng, cfg.k)).collect()
            } else {
                monotone_matrix(&mut rng, cfg.k)
            };
            let act = if cfg.dense_matrices {
                (0..cfg.k).map(|_| random_simplex(&mut rng, cfg.k)).collect()
            } else {
                TransitionMatrix::<f64>::reset_to_prime(cfg.k).rows()
            };
            let weight: f64 = rng.gen_range(1.0..10.0);
            assets.push(AssetSpec {
                id: format!("a{}", i + 1),
                weight: T::lit((weight * 100.0).round() / 100.0),
                unit_cost: vec![T::lit(3.0); cfg.horizon],
                deterioration: TransitionMatrix::new(det.iter().map(|r| cast(r)).collect())?,
                maintenance: TransitionMatrix::new(act.iter().map(|r| cast(r)).collect())?,
                initial: ConditionDistribution::new(cast(&random_simplex(&mut rng, cfg.k)))?,
            });
        }
        let network = NetworkSpec::new(cfg.k, cfg.horizon, assets)?;
        let full: f64 = network.costs(0).iter().map(|c| c.to_f64_lossy()).sum();
        let lo = (full * cfg.annual_lower).round();
        let hi = (full * cfg.annual_upper).round();
        let total = (cfg.horizon as f64 * hi * cfg.lifecycle).round().max(cfg.horizon as f64 * lo);
        let budget = BudgetSpec::uniform(cfg.horizon, T::lit(lo), T::lit(hi), T::lit(total))?;
        let feasible = enumerate_feasible_subsets(&network.costs(0), budget.lower()[0], budget.upper()[0])?;
        let min_cost = feasible.iter().map(|s| s.sum(&network.costs(0)).to_f64_lossy()).fold(f64::INFINITY, f64::min);
        if min_cost * cfg.horizon as f64 <= total {
            return Ok((network, budget));
        }
    }
    Err(Error::invariant("synthetic instance", format!("no feasible draw in {MAX_ATTEMPTS} attempts for {cfg:?}")))
}

/// The fixed six-asset, four-year benchmark with tight annual and lifecycle
/// bounds used for learning-competence checks.
pub fn benchmark<T: Scalar>() -> (NetworkSpec<T>, BudgetSpec<T>) {
    random_instance(2024, &SyntheticConfig::default()).expect("benchmark instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_seeded_and_valid() {
        let cfg = SyntheticConfig::default();
        let (a, b) = random_instance::<f64>(7, &cfg).unwrap();
        let (c, d) = random_instance::<f64>(7, &cfg).unwrap();
        assert_eq!(a, c);
        assert_eq!(b, d);
        assert_eq!(a.n(), 6);
        let dense = SyntheticConfig { dense_matrices: true, n: 4, horizon: 3, ..cfg };
        assert!(random_instance::<f64>(1, &dense).is_ok());
    }
}
