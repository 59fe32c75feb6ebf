use rand::Rng;

/// Binary sum tree over leaf priorities.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(capacity: usize) -> Self {
        let leaves = capacity.next_power_of_two();
        Self { leaves, nodes: vec![0.0; 2 * leaves] }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    fn set(&mut self, i: usize, value: f64) {
        let mut node = self.leaves + i;
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative range contains `mass`.
    fn find(&self, mut mass: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let left = self.nodes[2 * node];
            if mass < left || self.nodes[2 * node + 1] <= 0.0 {
                node *= 2;
            } else {
                mass -= left;
                node = 2 * node + 1;
            }
        }
        node - self.leaves
    }
}

/// Drawn batch: slot indices with max-normalized importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PrioritySample {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// FIFO ring with proportional prioritized sampling.
#[derive(Debug, Clone)]
pub struct PrioritizedBuffer<R> {
    capacity: usize,
    records: Vec<R>,
    next: usize,
    tree: SumTree,
    alpha: f64,
    max_priority: f64,
}

impl<R> PrioritizedBuffer<R> {
    pub fn new(capacity: usize, alpha: f64) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            records: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            tree: SumTree::new(capacity),
            alpha,
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, index: usize) -> &R {
        &self.records[index]
    }

    /// Sampling probability of slot `index`.
    pub fn probability(&self, index: usize) -> f64 {
        self.tree.get(index) / self.tree.total()
    }

    /// Inserts at the highest priority seen so far, evicting the oldest
    /// record when full.
    pub fn push(&mut self, record: R) {
        let slot = self.next;
        if self.records.len() < self.capacity {
            self.records.push(record);
        } else {
            self.records[slot] = record;
        }
        self.tree.set(slot, self.max_priority.powf(self.alpha));
        self.next = (slot + 1) % self.capacity;
    }

    /// Stratified proportional draw of `batch` slots.
    pub fn sample<G: Rng>(&self, batch: usize, beta: f64, rng: &mut G) -> PrioritySample {
        assert!(!self.is_empty(), "sampling from an empty buffer");
        let total = self.tree.total();
        let segment = total / batch as f64;
        let n = self.len() as f64;
        let mut indices = Vec::with_capacity(batch);
        let mut weights = Vec::with_capacity(batch);
        for j in 0..batch {
            let mass = segment * (j as f64 + rng.gen::<f64>());
            let i = self.tree.find(mass.min(total * (1.0 - f64::EPSILON))).min(self.len() - 1);
            indices.push(i);
            weights.push((n * self.probability(i)).powf(-beta));
        }
        let max = weights.iter().copied().fold(0.0, f64::max);
        for w in &mut weights {
            *w /= max;
        }
        PrioritySample { indices, weights }
    }

    /// Sets slot priorities to `|td| + eps`.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64], eps: f64) {
        for (&i, &td) in indices.iter().zip(td_errors) {
            let p = td.abs() + eps;
            self.max_priority = self.max_priority.max(p);
            self.tree.set(i, p.powf(self.alpha));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_tree_finds_leaves_by_mass() {
        let mut t = SumTree::new(5);
        for (i, p) in [1.0, 2.0, 0.0, 3.0, 4.0].iter().enumerate() {
            t.set(i, *p);
        }
        assert_eq!(t.total(), 10.0);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.5), 1);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(9.99), 4);
    }

    #[test]
    fn ring_evicts_oldest() {
        let mut b = PrioritizedBuffer::new(3, 0.6);
        for i in 0..5 {
            b.push(i);
        }
        assert_eq!(b.len(), 3);
        let mut held: Vec<i32> = (0..3).map(|i| *b.get(i)).collect();
        held.sort();
        assert_eq!(held, vec![2, 3, 4]);
    }

    #[test]
    fn equal_priorities_sample_uniformly() {
        let mut b = PrioritizedBuffer::new(8, 0.6);
        for i in 0..8 {
            b.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 8];
        let draws = 4000;
        for _ in 0..draws / 16 {
            let s = b.sample(16, 0.4, &mut rng);
            assert!(s.weights.iter().all(|&w| (w - 1.0).abs() < 1e-12));
            for i in s.indices {
                counts[i] += 1;
            }
        }
        let expected = draws as f64 / 8.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 7 degrees of freedom, 99.9th percentile
        assert!(chi2 < 24.32, "chi2 {chi2}, counts {counts:?}");
    }

    #[test]
    fn priorities_shape_probabilities_and_weights() {
        let mut b = PrioritizedBuffer::new(4, 0.5);
        for i in 0..4 {
            b.push(i);
        }
        b.update_priorities(&[0, 1, 2, 3], &[0.0, 3.0, 8.0, 15.0], 1.0);
        // p^0.5 = 1, 2, 3, 4
        assert!((b.probability(3) - 0.4).abs() < 1e-12);
        let s = b.sample(64, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        for (&i, &w) in s.indices.iter().zip(&s.weights) {
            let expect = (4.0 * b.probability(i)).powi(-1) / (4.0 * 0.1f64).powi(-1);
            assert!((w - expect).abs() < 1e-12);
        }
        // new records enter at the running maximum priority
        b.push(9);
        assert!((b.probability(0) - 4.0 / 13.0).abs() < 1e-12);
    }
}
