//! Experience replay: ring storage with uniform with-replacement sampling.

use rand::Rng;

use crate::error::{Result, SctlError};

/// One environment interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// State vector.
    pub s: Vec<f64>,
    /// Raw RL action in [−1, 1].
    pub u_tilde: f64,
    /// Reward, ≤ 0.
    pub r: f64,
    /// Next-state vector.
    pub s_next: Vec<f64>,
    /// Raw RL action taken at `s_next` (available as the literal target action
    /// behind a config switch).
    pub a_next_hint: f64,
}

impl Transition {
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.s.len() != state_dim || self.s_next.len() != state_dim {
            return Err(SctlError::Shape(format!(
                "transition state dims {}/{} != {}",
                self.s.len(),
                self.s_next.len(),
                state_dim
            )));
        }
        if !self.r.is_finite() || self.r > 0.0 {
            return Err(SctlError::NonFinite(format!("reward must be finite and <= 0, got {}", self.r)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer { storage: Vec::with_capacity(capacity.min(4096)), capacity, cursor: 0 }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Insert, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Uniform with-replacement batch of references.
    pub fn sample<'a>(&'a self, n: usize, rng: &mut impl Rng) -> Result<Vec<&'a Transition>> {
        if self.is_empty() {
            return Err(SctlError::Usage("cannot sample from an empty replay buffer".into()));
        }
        if n == 0 {
            return Err(SctlError::Usage("sample size must be >= 1".into()));
        }
        Ok((0..n).map(|_| &self.storage[rng.random_range(0..self.storage.len())]).collect())
    }

    /// Iterate oldest → newest (rotated past the overwrite cursor once full).
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity { 0 } else { self.cursor };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }
}
