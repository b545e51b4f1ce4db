//! Counter-based deterministic random numbers.
//!
//! Every draw is a pure function of (seed, counter, draw index), so
//! trajectories are reproducible regardless of call interleaving and
//! independent subsystems never perturb each other's streams.

/// SplitMix64 finalizer, applied to a combined key.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key(seed: u64, counter: u64, idx: u64) -> u64 {
    mix(mix(mix(seed).wrapping_add(counter)).wrapping_add(idx))
}

/// Uniform draw in (0, 1], keyed by (seed, counter, idx).
pub fn uniform(seed: u64, counter: u64, idx: u64) -> f64 {
    let bits = key(seed, counter, idx) >> 11;
    (bits + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw via Box-Muller, keyed by (seed, counter, idx).
pub fn normal(seed: u64, counter: u64, idx: u64) -> f64 {
    let u1 = uniform(seed, counter, 2 * idx);
    let u2 = uniform(seed, counter, 2 * idx + 1);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Sequential stream over the same keyed generator, for weight
/// initialization and minibatch shuffling.
pub struct CounterRng {
    seed: u64,
    counter: u64,
    idx: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng { seed, counter: stream, idx: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = key(self.seed, self.counter, self.idx);
        self.idx += 1;
        v
    }

    pub fn next_uniform(&mut self) -> f64 {
        let bits = self.next_u64() >> 11;
        (bits + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [-scale, scale].
    pub fn next_symmetric(&mut self, scale: f64) -> f64 {
        (2.0 * self.next_uniform() - 1.0) * scale
    }

    /// Uniform integer in [0, bound).
    pub fn next_below(&mut self, bound: usize) -> usize {
        (self.next_u64() % bound as u64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }
}
