use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded schedule perturbation for one worker; inert without a seed.
pub(super) struct Jitter(Option<ChaCha8Rng>);

impl Jitter {
    pub fn new(seed: Option<u64>, worker: usize) -> Self {
        Jitter(seed.map(|s| ChaCha8Rng::seed_from_u64(s ^ (worker as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))))
    }

    /// Delays the worker's start by up to 200µs.
    pub fn start(&mut self) {
        if let Some(rng) = &mut self.0 {
            thread::sleep(Duration::from_micros(rng.gen_range(0..200)));
        }
    }

    /// Occasionally yields or spins before the worker takes its next item.
    pub fn step(&mut self) {
        let Some(rng) = &mut self.0 else { return };
        match rng.gen_range(0..8) {
            0 | 1 => thread::yield_now(),
            2 => (0..rng.gen_range(0..2000)).for_each(|_| std::hint::spin_loop()),
            _ => {}
        }
    }
}
