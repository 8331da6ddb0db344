//! Deterministic splittable randomness for reproducible parallel ensembles.
//!
//! The generator is SplitMix64 (Vigna's 64-bit finalizer over a Weyl
//! sequence, period 2^64). Every tree level of every trial draws from its
//! own stream, seeded by a pure function of (master, trialIndex, level), so
//! results never depend on thread scheduling. The algorithm is fixed:
//! changing it invalidates every golden CSV.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Bijective on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a salt. For a fixed parent
/// this is injective in the salt, so sibling streams never collide.
#[inline]
pub fn combine(parent: u64, salt: u64) -> u64 {
    mix64(mix64(parent.wrapping_add(GOLDEN_GAMMA)) ^ salt)
}

/// The sequential generator behind one stream.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 / DEN
    }
}

/// Addresses the randomness of one Monte Carlo trial.
///
/// The derived per-trial seed is a pure function of (master, trialIndex);
/// distinct trial indices give distinct derived seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedSpec {
    pub master: u64,
    pub trial_index: u64,
}

impl SeedSpec {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            trial_index: 0,
        }
    }

    pub fn for_trial(master: u64, trial_index: u64) -> Self {
        Self {
            master,
            trial_index,
        }
    }

    /// The derived 64-bit trial seed, also used as the reproducibility
    /// token stored on realizations.
    pub fn trial_seed(&self) -> u64 {
        combine(self.master, self.trial_index)
    }

    /// The stream feeding one tree generation of this trial.
    pub fn level_stream(&self, level: u32) -> SplitMix64 {
        SplitMix64::new(combine(self.trial_seed(), level as u64))
    }
}

/// Threshold such that `u64 < threshold` has probability `p` up to 2^-64.
/// `p = 1` is handled by callers (no threshold reaches it).
#[inline]
pub(crate) fn sign_threshold(p: f64) -> u64 {
    debug_assert!((0.0..1.0).contains(&p));
    const TWO64: f64 = 18_446_744_073_709_551_616.0;
    (p * TWO64) as u64
}
