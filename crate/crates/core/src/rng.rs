//! Counter-based random streams.
//!
//! Every replicate draws from its own ChaCha8 stream keyed by
//! `(master_seed, replicate_id)`: the master seed fills the key and the
//! replicate id selects the stream. Results therefore never depend on how
//! replicates are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

pub fn derive_stream(master_seed: u64, replicate_id: u64) -> RandomStream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    // Domain tag so that a zero seed still yields a non-trivial key.
    key[8..16].copy_from_slice(b"bulletrs");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate_id);
    rng
}
