use rand::Rng;

/// One environment transition as stored for off-policy learning.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord<T> {
    pub obs: Vec<T>,
    pub a1: T,
    pub a2: Vec<T>,
    pub reward: T,
    pub next_obs: Vec<T>,
    pub terminal: bool,
}

/// Fixed-capacity FIFO ring with uniform sampling (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer<R> {
    records: Vec<R>,
    capacity: usize,
    next: usize,
}

impl<R> ReplayBuffer<R> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { records: Vec::with_capacity(capacity.min(1 << 16)), capacity, next: 0 }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends `record`, evicting the oldest one when full.
    pub fn push(&mut self, record: R) {
        if self.records.len() < self.capacity {
            self.records.push(record);
        } else {
            self.records[self.next] = record;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Records from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &R> {
        let split = if self.records.len() < self.capacity { 0 } else { self.next };
        self.records[split..].iter().chain(&self.records[..split])
    }

    pub fn sample<G: Rng>(&self, batch: usize, rng: &mut G) -> Vec<&R> {
        assert!(!self.records.is_empty(), "cannot sample an empty buffer");
        (0..batch).map(|_| &self.records[rng.gen_range(0..self.records.len())]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn fifo_eviction(cap in 1usize..20, pushes in 0usize..80) {
            let mut b = ReplayBuffer::new(cap);
            for i in 0..pushes {
                b.push(i);
                prop_assert!(b.len() <= cap);
            }
            let kept: Vec<usize> = b.iter().copied().collect();
            let want: Vec<usize> = (pushes.saturating_sub(cap)..pushes).collect();
            prop_assert_eq!(kept, want);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let mut b = ReplayBuffer::new(10);
        (0..10).for_each(|i| b.push(i));
        let s1: Vec<i32> = b.sample(5, &mut ChaCha8Rng::seed_from_u64(1)).into_iter().copied().collect();
        let s2: Vec<i32> = b.sample(5, &mut ChaCha8Rng::seed_from_u64(1)).into_iter().copied().collect();
        assert_eq!(s1, s2);
    }
}
