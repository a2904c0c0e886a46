//! Counter-based random streams.
//!
//! One master seed drives a run. Every consumer draws from its own ChaCha
//! stream whose id packs the round index and a lane (0 = server sampling,
//! `1 + client_id` = that client's local solver), so results do not depend on
//! how client solves are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type SimRng = ChaCha20Rng;

const LANE_BITS: u32 = 24;

pub const SAMPLING_LANE: u64 = 0;

pub fn client_lane(client_id: usize) -> u64 {
    1 + client_id as u64
}

/// Stream for `(round, lane)` under `seed`.
pub fn stream(seed: u64, round: u64, lane: u64) -> SimRng {
    debug_assert!(lane < (1 << LANE_BITS));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((round << LANE_BITS) | lane);
    rng
}

/// Plain seeded generator for one-off uses (problem generation, probes).
pub fn seeded(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}
