//! A stand-in parity-check matrix for use when the official tables are not
//! available: regular (column weight 3, row weight 6), free of length-4
//! cycles, with an invertible parity block. Generated from a fixed seed.

use std::collections::HashSet;
use std::sync::OnceLock;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_generator, ParityCheckMatrix, M, N};

pub const SYNTHETIC_SEED: u64 = 0xB2B_1620_81;

const COL_WEIGHT: usize = 3;
const ROW_WEIGHT: usize = N * COL_WEIGHT / M;

fn attempt(rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize, u8)>> {
    let mut degree = [0usize; M];
    let mut pairs: HashSet<(usize, usize)> = HashSet::new();
    let mut entries = Vec::with_capacity(N * COL_WEIGHT);
    for col in 0..N {
        let mut chosen: Vec<usize> = Vec::with_capacity(COL_WEIGHT);
        for _ in 0..COL_WEIGHT {
            let mut candidates: Vec<usize> = (0..M)
                .filter(|&r| degree[r] < ROW_WEIGHT && !chosen.contains(&r))
                .filter(|&r| chosen.iter().all(|&q| !pairs.contains(&(q.min(r), q.max(r)))))
                .collect();
            let min_deg = candidates.iter().map(|&r| degree[r]).min()?;
            candidates.retain(|&r| degree[r] == min_deg);
            chosen.push(*candidates.choose(rng)?);
        }
        for (i, &a) in chosen.iter().enumerate() {
            for &b in &chosen[i + 1..] {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
        for &r in &chosen {
            degree[r] += 1;
            entries.push((r, col, rng.random_range(1..64u8)));
        }
    }
    Some(entries)
}

fn build() -> ParityCheckMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(SYNTHETIC_SEED);
    loop {
        let Some(entries) = attempt(&mut rng) else { continue };
        let h = ParityCheckMatrix::from_entries(entries).expect("generated entries are valid");
        if derive_generator(&h).is_ok() {
            return h;
        }
    }
}

/// The shipped synthetic matrix (deterministic).
pub fn synthetic_parity_matrix() -> ParityCheckMatrix {
    static H: OnceLock<ParityCheckMatrix> = OnceLock::new();
    H.get_or_init(build).clone()
}
