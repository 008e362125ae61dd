//! Counter-keyed random streams.
//!
//! Every trial gets its own ChaCha stream derived from `(seed, trial, role)`,
//! so results do not depend on which worker ran which trial.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for inside one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Data = 0,
    Planted = 1,
    Commitment = 2,
    Aux = 3,
}

const ROLES: u64 = 4;

pub fn stream(seed: u64, trial: u64, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(ROLES).wrapping_add(role as u64));
    rng
}
