//! Shared helpers for the criterion benches.

use rsp_core::model::{generate, GenKind};
use rsp_core::Instance;

/// A seeded uniform instance with the default hop budget.
pub fn uniform_instance(n: usize, seed: u64) -> Instance {
    generate(GenKind::Uniform, n, seed).expect("n >= 2")
}
