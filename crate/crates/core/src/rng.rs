//! Deterministic random substreams.
//!
//! Every random quantity of realization `kappa` is drawn from its own ChaCha stream,
//! seeded by SHA-256 of `(master seed, kappa, label)`. Results therefore do not depend
//! on the order in which realizations are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

pub const LABEL_W: &str = "W";
pub const LABEL_Y: &str = "Y";

pub fn amplitude_label(m: usize, n: usize) -> String {
    format!("Z:{m}{n}")
}

pub fn phase_label(m: usize, n: usize) -> String {
    format!("Phi:{m}{n}")
}

pub fn substream(master_seed: u64, kappa: u64, label: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(b"stochhom/v1");
    hasher.update(master_seed.to_le_bytes());
    hasher.update(kappa.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    StreamRng::from_seed(seed)
}
