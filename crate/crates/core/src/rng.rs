//! Deterministic random stream for the simulator.
//!
//! The whole simulation consumes randomness through [`RandomStream`], so tests
//! can substitute scripted streams and every run is reproducible from a single
//! 64-bit seed. The default generator is xoshiro256++ seeded via splitmix64.

/// Source of the random draws a simulation step consumes.
///
/// Implementations must be deterministic given their initial state.
pub trait RandomStream {
    /// Uniform index in `0..bound`. `bound` must be at least 1.
    fn index(&mut self, bound: usize) -> usize;

    /// Uniform draw on the open interval (0, 1); never returns 0.0 or 1.0.
    fn open01(&mut self) -> f64;

    /// Uniform draw on the open interval (-1, 1).
    fn signed_open01(&mut self) -> f64 {
        2.0 * self.open01() - 1.0
    }
}

/// xoshiro256++ generator (Blackman & Vigna), seeded with splitmix64.
#[derive(Debug, Clone)]
pub struct Xoshiro256 {
    state: [u64; 4],
}

impl Xoshiro256 {
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = seed;
        let mut state = [0u64; 4];
        for word in &mut state {
            *word = splitmix64(&mut sm);
        }
        Xoshiro256 { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = (s[0].wrapping_add(s[3]))
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }
}

impl RandomStream for Xoshiro256 {
    fn index(&mut self, bound: usize) -> usize {
        debug_assert!(bound >= 1, "index bound must be at least 1");
        // Lemire multiply-shift; bias is below 2^-50 for the bounds used here.
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    fn open01(&mut self) -> f64 {
        // 53 high bits, offset by half a lattice cell: strictly inside (0, 1).
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Fisher-Yates shuffle driven by a [`RandomStream`].
pub fn shuffle<T>(rng: &mut impl RandomStream, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.index(i + 1);
        items.swap(i, j);
    }
}
