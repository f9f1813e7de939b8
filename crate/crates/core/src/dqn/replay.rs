use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// `(s_t, a_t, r, s_{t+d})` for one completed decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub start_state: [f64; 4],
    pub action: usize,
    pub reward: f64,
    pub end_state: [f64; 4],
}

/// Bounded FIFO experience store.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of `count` transitions, with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, count: usize, rng: &mut R) -> Vec<&'a Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..count)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(tag: usize) -> Transition {
        Transition {
            start_state: [tag as f64, 0.0, 0.0, 0.0],
            action: 0,
            reward: 0.0,
            end_state: [0.0; 4],
        }
    }

    #[test]
    fn fifo_eviction() {
        let cap = 10;
        for j in 0..15 {
            let mut mem = ReplayMemory::new(cap);
            for i in 0..cap + j {
                mem.push(t(i));
            }
            assert_eq!(mem.len(), cap);
            let oldest = mem.get(0).unwrap().start_state[0] as usize;
            assert_eq!(oldest, j);
            let newest = mem.get(cap - 1).unwrap().start_state[0] as usize;
            assert_eq!(newest, cap + j - 1);
        }
    }

    #[test]
    fn sampling_covers_memory() {
        let mut mem = ReplayMemory::new(8);
        for i in 0..8 {
            mem.push(t(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen = [0usize; 8];
        for s in mem.sample(8000, &mut rng) {
            seen[s.start_state[0] as usize] += 1;
        }
        assert!(seen.iter().all(|&c| (800..1200).contains(&c)), "{seen:?}");
        assert!(ReplayMemory::new(3).sample(4, &mut rng).is_empty());
    }
}
