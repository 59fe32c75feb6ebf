//! Exact doubly-bounded 0/1 knapsack used to turn per-asset priorities into
//! a budget-feasible annual work plan, plus exhaustive subset enumeration.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::network::{expected_score, AssetSpec, ConditionDistribution};
use crate::scalar::Scalar;
use crate::simulator::CURRENCY_TOL;

/// Largest instance accepted by [`solve`].
pub const MAX_SOLVE_ITEMS: usize = 64;
/// Largest instance accepted by [`enumerate_feasible_subsets`].
pub const MAX_ENUMERATE_ITEMS: usize = 25;

/// Set of asset indices as a bitmask; bit `i` is asset `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Subset(pub u64);

impl Subset {
    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        let m = self.0;
        (0..64).filter(move |i| m >> i & 1 == 1)
    }

    pub fn to_bools(self, n: usize) -> Vec<bool> {
        (0..n).map(|i| self.contains(i)).collect()
    }

    pub fn from_bools(sel: &[bool]) -> Self {
        Subset(sel.iter().enumerate().filter(|(_, &s)| s).fold(0, |m, (i, _)| m | 1 << i))
    }

    /// Sum of `weights` over members, accumulated in index order.
    pub fn sum<T: Scalar>(self, weights: &[T]) -> T {
        self.indices().map(|i| weights[i]).fold(T::zero(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackInstance<T> {
    pub values: Vec<T>,
    pub costs: Vec<T>,
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> KnapsackInstance<T> {
    pub fn new(values: Vec<T>, costs: Vec<T>, lower: T, upper: T) -> Result<Self> {
        if values.len() != costs.len() {
            return Err(Error::Dimension { expected: costs.len(), got: values.len() });
        }
        if !(lower <= upper) {
            return Err(Error::invariant("knapsack bounds", format!("lower {lower} exceeds upper {upper}")));
        }
        if let Some(c) = costs.iter().find(|c| !(**c > T::zero()) || !c.is_finite()) {
            return Err(Error::invariant("knapsack costs", format!("must be positive, got {c}")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invariant("knapsack values", format!("must be finite, got {v}")));
        }
        Ok(Self { values, costs, lower, upper })
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackSolution<T> {
    pub selected: Subset,
    pub objective: T,
    pub cost: T,
    pub exact: bool,
    /// No subset reached the lower bound; `selected` is the costliest subset
    /// within the upper bound instead.
    pub relaxed_lower: bool,
}

/// Next-year score improvement (in weight units) from treating `asset`.
pub fn gain<T: Scalar>(asset: &AssetSpec<T>, dist: &ConditionDistribution<T>) -> T {
    let treated = expected_score(&dist.propagate(&asset.maintenance));
    let untreated = expected_score(&dist.propagate(&asset.deterioration));
    asset.weight * (treated - untreated)
}

pub fn solve<T: Scalar>(instance: &KnapsackInstance<T>) -> Result<KnapsackSolution<T>> {
    let n = instance.n();
    if n > MAX_SOLVE_ITEMS {
        return Err(Error::Scale { what: "knapsack items", got: n as u128, limit: MAX_SOLVE_ITEMS as u128 });
    }
    let tol = T::lit(CURRENCY_TOL);
    let lower = instance.lower - tol;
    let upper = instance.upper + tol;
    if let Some((mask, objective, cost)) = BranchAndBound::run(&instance.values, &instance.costs, lower, upper) {
        return Ok(KnapsackSolution { selected: mask, objective, cost, exact: true, relaxed_lower: false });
    }
    // Nothing reaches the lower bound: spend as much as the upper bound allows.
    let (mask, _, cost) = BranchAndBound::run(&instance.costs, &instance.costs, T::neg_infinity(), upper)
        .expect("the empty set is always within the upper bound");
    Ok(KnapsackSolution {
        selected: mask,
        objective: mask.sum(&instance.values),
        cost,
        exact: true,
        relaxed_lower: true,
    })
}

struct BranchAndBound<'a, T> {
    values: &'a [T],
    costs: &'a [T],
    order: Vec<usize>,
    /// Sum of costs of `order[d..]`.
    suffix_cost: Vec<T>,
    lower: T,
    upper: T,
    best: Option<(Subset, T, T)>,
}

impl<'a, T: Scalar> BranchAndBound<'a, T> {
    fn run(values: &'a [T], costs: &'a [T], lower: T, upper: T) -> Option<(Subset, T, T)> {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        // Positive items by value density first, then the rest by density.
        order.sort_by(|&a, &b| {
            let pa = values[a] > T::zero();
            let pb = values[b] > T::zero();
            pb.cmp(&pa)
                .then_with(|| {
                    let ra = values[a] / costs[a];
                    let rb = values[b] / costs[b];
                    rb.partial_cmp(&ra).unwrap_or(Ordering::Equal)
                })
                .then(a.cmp(&b))
        });
        let mut suffix_cost = vec![T::zero(); n + 1];
        for d in (0..n).rev() {
            suffix_cost[d] = suffix_cost[d + 1] + costs[order[d]];
        }
        let mut bb = Self { values, costs, order, suffix_cost, lower, upper, best: None };
        bb.dfs(0, Subset(0), T::zero(), T::zero());
        bb.best
    }

    /// Fractional relaxation over the positive items still undecided.
    fn bound(&self, depth: usize, value: T, cost: T) -> T {
        let mut room = self.upper - cost;
        let mut b = value;
        for &i in &self.order[depth..] {
            let v = self.values[i];
            if v <= T::zero() {
                break;
            }
            let c = self.costs[i];
            if c <= room {
                room = room - c;
                b = b + v;
            } else {
                b = b + v * (room / c);
                break;
            }
        }
        b
    }

    fn slack(x: T) -> T {
        T::lit(1e-9) * (T::one() + x.abs())
    }

    fn dfs(&mut self, depth: usize, mask: Subset, value: T, cost: T) {
        if cost + self.suffix_cost[depth] < self.lower {
            return;
        }
        if let Some((_, best, _)) = self.best {
            if self.bound(depth, value, cost) + Self::slack(best) < best {
                return;
            }
        }
        if depth == self.order.len() {
            if cost >= self.lower {
                self.offer(mask);
            }
            return;
        }
        let i = self.order[depth];
        let c = cost + self.costs[i];
        if c <= self.upper {
            self.dfs(depth + 1, Subset(mask.0 | 1 << i), value + self.values[i], c);
        }
        self.dfs(depth + 1, mask, value, cost);
    }

    fn offer(&mut self, mask: Subset) {
        let objective = mask.sum(self.values);
        let better = match self.best {
            None => true,
            Some((m, best, _)) => {
                let eps = T::lit(1e-12) * (T::one() + best.abs());
                objective > best + eps || ((objective - best).abs() <= eps && mask < m)
            }
        };
        if better {
            self.best = Some((mask, objective, mask.sum(self.costs)));
        }
    }
}

/// All subsets with `lower ≤ cost ≤ upper`, in ascending bitmask order.
pub fn enumerate_feasible_subsets<T: Scalar>(costs: &[T], lower: T, upper: T) -> Result<Vec<Subset>> {
    let n = costs.len();
    if n > MAX_ENUMERATE_ITEMS {
        return Err(Error::Scale {
            what: "enumerated items",
            got: n as u128,
            limit: MAX_ENUMERATE_ITEMS as u128,
        });
    }
    let tol = T::lit(CURRENCY_TOL);
    let (lo, hi) = (lower - tol, upper + tol);
    // Split into low and high halves so every subset sum is one addition.
    let low_bits = n.min(12);
    let half_sums = |items: &[T]| -> Vec<T> {
        let mut sums = vec![T::zero(); 1 << items.len()];
        for m in 1..sums.len() {
            sums[m] = Subset(m as u64).sum(items);
        }
        sums
    };
    let low = half_sums(&costs[..low_bits]);
    let high = half_sums(&costs[low_bits..]);
    let mut out = Vec::new();
    for (h, &hs) in high.iter().enumerate() {
        if hs > hi {
            continue;
        }
        for (l, &ls) in low.iter().enumerate() {
            let s = hs + ls;
            if s >= lo && s <= hi {
                out.push(Subset(((h as u64) << low_bits) | l as u64));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::TransitionMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: scan all subsets.
    fn brute(inst: &KnapsackInstance<f64>) -> Option<(u64, f64)> {
        let n = inst.n();
        let mut best: Option<(u64, f64)> = None;
        for m in 0u64..1 << n {
            let mut v = 0.0;
            let mut c = 0.0;
            for i in 0..n {
                if m >> i & 1 == 1 {
                    v += inst.values[i];
                    c += inst.costs[i];
                }
            }
            if c < inst.lower - 1e-6 || c > inst.upper + 1e-6 {
                continue;
            }
            if best.map_or(true, |(_, b)| v > b + 1e-12) {
                best = Some((m, v));
            }
        }
        best
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> KnapsackInstance<f64> {
        let costs: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..20.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..10.0)).collect();
        let total: f64 = costs.iter().sum();
        let a = rng.gen_range(0.0..0.7) * total;
        let b = a + rng.gen_range(0.0..0.4) * total;
        KnapsackInstance::new(values, costs, a, b).unwrap()
    }

    #[test]
    fn select_everything_when_unconstrained() {
        let inst = KnapsackInstance::new(vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0], 0.0, 10.0).unwrap();
        let s = solve(&inst).unwrap();
        assert_eq!(s.selected, Subset(0b111));
        assert_eq!(s.objective, 6.0);
    }

    #[test]
    fn binding_capacity() {
        let inst = KnapsackInstance::new(vec![5.0, 4.0], vec![10.0, 10.0], 0.0, 10.0).unwrap();
        let s = solve(&inst).unwrap();
        assert_eq!(s.selected, Subset(0b01));
        assert_eq!(s.objective, 5.0);
        assert!(s.exact && !s.relaxed_lower);
    }

    #[test]
    fn twelve_seeded_items_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let inst = random_instance(&mut rng, 12);
        let s = solve(&inst).unwrap();
        let (m, v) = brute(&inst).unwrap();
        assert!((s.objective - v).abs() < 1e-9);
        assert_eq!(s.selected.0, m);
    }

    #[test]
    fn lower_bound_forces_negative_items() {
        let inst = KnapsackInstance::new(vec![-1.0, -3.0, 2.0], vec![5.0, 5.0, 1.0], 6.0, 100.0).unwrap();
        let s = solve(&inst).unwrap();
        assert_eq!(s.selected, Subset(0b101));
        assert_eq!(s.objective, 1.0);
    }

    #[test]
    fn relaxed_lower_falls_back_to_max_cost() {
        let inst = KnapsackInstance::new(vec![1.0, 1.0, 1.0], vec![4.0, 6.0, 7.0], 20.0, 12.0);
        assert!(inst.is_err());
        let inst = KnapsackInstance::new(vec![1.0, 1.0, 1.0], vec![4.0, 6.0, 7.0], 12.0, 12.0).unwrap();
        let s = solve(&inst).unwrap();
        assert!(s.relaxed_lower);
        assert_eq!(s.selected, Subset(0b101));
        assert_eq!(s.cost, 11.0);
        assert!(enumerate_feasible_subsets(&inst.costs, 12.0, 12.0).unwrap().is_empty());
    }

    #[test]
    fn ties_pick_smallest_mask() {
        let inst = KnapsackInstance::new(vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0], 0.0, 1.0).unwrap();
        assert_eq!(solve(&inst).unwrap().selected, Subset(0b001));
    }

    #[test]
    fn scale_contract() {
        let inst = KnapsackInstance::new(vec![1.0; 65], vec![1.0; 65], 0.0, 1.0).unwrap();
        assert!(matches!(solve(&inst), Err(Error::Scale { .. })));
        assert!(matches!(enumerate_feasible_subsets(&[1.0; 26], 0.0, 1.0), Err(Error::Scale { .. })));
    }

    #[test]
    fn enumeration_examples() {
        let s = enumerate_feasible_subsets(&[40.0, 70.0], 50.0, 80.0).unwrap();
        assert_eq!(s, vec![Subset(0b10)]);
        assert!(enumerate_feasible_subsets(&[1.0, 2.0], 4.0, 10.0).unwrap().is_empty());
    }

    #[test]
    fn enumeration_matches_scan_in_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let costs: Vec<f64> = (0..14).map(|_| rng.gen_range(1.0..10.0)).collect();
        let got = enumerate_feasible_subsets(&costs, 20.0, 30.0).unwrap();
        let want: Vec<Subset> = (0u64..1 << 14)
            .filter(|m| {
                let c: f64 = (0..14).filter(|i| m >> i & 1 == 1).map(|i| costs[i]).sum();
                (20.0 - 1e-6..=30.0 + 1e-6).contains(&c)
            })
            .map(Subset)
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn gain_examples() {
        let k = 5;
        let asset = |det: TransitionMatrix<f64>, act: TransitionMatrix<f64>| AssetSpec {
            id: "a".into(),
            weight: 1.0,
            unit_cost: vec![1.0],
            deterioration: det,
            maintenance: act,
            initial: ConditionDistribution::point_mass(k, 1).unwrap(),
        };
        let same = asset(TransitionMatrix::identity(k), TransitionMatrix::identity(k));
        let d2 = ConditionDistribution::point_mass(k, 2).unwrap();
        assert_eq!(gain(&same, &d2), 0.0);
        let flush = asset(TransitionMatrix::identity(k), TransitionMatrix::reset_to_prime(k));
        assert_eq!(gain(&flush, &ConditionDistribution::point_mass(k, 1).unwrap()), 0.0);
        assert!((gain(&flush, &d2) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn many_random_instances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..300 {
            let n = rng.gen_range(1..=10);
            let inst = random_instance(&mut rng, n);
            let s = solve(&inst).unwrap();
            match brute(&inst) {
                Some((_, v)) => {
                    assert!(!s.relaxed_lower);
                    assert!((s.objective - v).abs() < 1e-9, "{} vs {v}", s.objective);
                }
                None => assert!(s.relaxed_lower),
            }
            assert!(s.cost <= inst.upper + 1e-6);
        }
    }
}
