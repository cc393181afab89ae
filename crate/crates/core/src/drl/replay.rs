//! FIFO experience replay.

use rand::Rng;

use crate::drl::env::MdpState;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: MdpState,
    /// Normalized features of `state`, snapshotted by the episode's
    /// environment (feature scaling is market-specific).
    pub features: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: MdpState,
    pub next_features: Vec<f64>,
    pub done: bool,
}

/// Bounded transition store with first-in-first-out eviction.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer { capacity, storage: Vec::with_capacity(capacity.min(4096)), next: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.next] = t;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn contains(&self, t: &Transition) -> bool {
        self.storage.contains(t)
    }

    /// Uniform sample with replacement.
    pub fn sample<'a>(&'a self, batch: usize, rng: &mut impl Rng) -> Vec<&'a Transition> {
        assert!(!self.is_empty(), "cannot sample an empty buffer");
        (0..batch).map(|_| &self.storage[rng.random_range(0..self.storage.len())]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn transition(tag: f64) -> Transition {
        let s = MdpState {
            flag: 0,
            round: 0,
            buyer_clock: tag,
            seller_clock: 0.0,
            n_buy_winners: 0,
            n_sell_winners: 0,
        };
        Transition {
            state: s.clone(),
            features: vec![tag],
            action: 0,
            reward: tag,
            next_state: s,
            next_features: vec![tag],
            done: false,
        }
    }

    #[test]
    fn eviction_is_fifo() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(transition(i as f64));
        }
        assert_eq!(buf.len(), 3);
        // 0 and 1 were evicted first.
        assert!(!buf.contains(&transition(0.0)));
        assert!(!buf.contains(&transition(1.0)));
        for i in 2..5 {
            assert!(buf.contains(&transition(i as f64)));
        }
    }

    #[test]
    fn samples_only_stored_transitions() {
        let mut buf = ReplayBuffer::new(8);
        for i in 0..6 {
            buf.push(transition(i as f64));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for t in buf.sample(64, &mut rng) {
            assert!(buf.contains(t));
        }
    }
}
