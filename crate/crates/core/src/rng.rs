//! Deterministic counter-based random streams.
//!
//! Every random draw in the simulator is addressed by a
//! (master seed, stream id, event counter) key. Distinct keys produce
//! statistically independent values and equal keys replay the same
//! values, so results never depend on scheduling or iteration order.
//! This is what makes bulk array operations safe to fan out across
//! worker threads while staying bit-reproducible.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_SALT: u64 = 0x6A09_E667_F3BC_C909;
const EVENT_SALT: u64 = 0xBB67_AE85_84CA_A73B;

/// 64-bit finalizer with full avalanche (Stafford mix 13).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key identifying one logical stream under a master seed.
#[inline]
pub fn stream_key(master_seed: u64, stream_id: u64) -> u64 {
    mix64(master_seed ^ GOLDEN.wrapping_mul(stream_id ^ STREAM_SALT))
}

/// One uniform 64-bit value for a pre-derived stream key and event counter.
#[inline]
pub fn event_u64(stream_key: u64, event: u64) -> u64 {
    mix64(stream_key ^ GOLDEN.wrapping_mul(event ^ EVENT_SALT))
}

/// One uniform 64-bit value for a full (seed, stream, event) key.
#[inline]
pub fn keyed_u64(master_seed: u64, stream_id: u64, event: u64) -> u64 {
    event_u64(stream_key(master_seed, stream_id), event)
}

/// Threshold for comparing a uniform `u64` against probability `p`.
///
/// `fires(u, bernoulli_threshold(p))` is true with probability `p`
/// (to within 2^-53 for interior `p`; exactly for `p <= 0` and `p >= 1`).
#[inline]
pub fn bernoulli_threshold(p: f64) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        u64::MAX
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

/// Bernoulli draw against a threshold from [`bernoulli_threshold`].
#[inline]
pub fn fires(u: u64, threshold: u64) -> bool {
    threshold == u64::MAX || u < threshold
}

/// A deterministic random stream positioned at one event key.
///
/// Construct a fresh stream per logical event (one RESET, one readout).
/// Any number of draws may be taken inside the event; consumption does
/// not leak into other events because the key fixes the whole sequence.
#[derive(Debug, Clone)]
pub struct RandomStream {
    state: u64,
}

impl RandomStream {
    pub fn for_event(master_seed: u64, stream_id: u64, event: u64) -> Self {
        Self {
            state: keyed_u64(master_seed, stream_id, event),
        }
    }

    pub fn from_key(key: u64) -> Self {
        Self { state: key }
    }

    /// Next 64-bit value (splitmix64 walk from the event key).
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform value in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform value in (0, 1); safe as a logarithm argument.
    #[inline]
    fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        let r = (-2.0 * self.next_open01().ln()).sqrt();
        let theta = std::f64::consts::TAU * self.next_f64();
        r * theta.cos()
    }

    /// Bernoulli draw with probability `p`.
    pub fn next_bool(&mut self, p: f64) -> bool {
        fires(self.next_u64(), bernoulli_threshold(p))
    }
}
