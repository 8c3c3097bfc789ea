//! Deterministic probe generation for audits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::space::{
    build_uniform_grid, conditional_resolution, Filtration, OutcomeSpace, RandomVariable,
};

pub const DEFAULT_SEED: u64 = 20181201;
pub const DEFAULT_PROBES: usize = 200;

/// `count` probes uniform in `[lo, hi]^n`.
pub fn random_probes(n: usize, count: usize, seed: u64, lo: f64, hi: f64) -> Vec<RandomVariable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            RandomVariable::new((0..n).map(|_| rng.gen_range(lo..=hi)).collect()).expect("finite")
        })
        .collect()
}

/// `count` `F1`-measurable probes with block values uniform in `[lo, hi]`.
pub fn random_f1_probes(
    filtration: &Filtration,
    count: usize,
    seed: u64,
    lo: f64,
    hi: f64,
) -> Vec<RandomVariable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = filtration.f1.num_blocks();
    (0..count)
        .map(|_| {
            let vals: Vec<f64> = (0..blocks).map(|_| rng.gen_range(lo..=hi)).collect();
            RandomVariable::from_blocks(&filtration.f1, &vals).expect("one value per block")
        })
        .collect()
}

/// Probes built to expose recomposition gaps, using the finest uniform grid
/// the space supports:
///
/// * interleaved payoffs `U + s·b` where `b` is the `F1` block index, for
///   `s ∈ {1/2, 1, 2}`;
/// * for every block `A_b` and every `0 < k < n`, the payoff
///   `1 − 1_{A_b ∩ {U ≤ k/n}}` that loses one unit on a fraction `k/n` of
///   one block only.
///
/// When the space has no conditional resolution, the within-block position
/// stands in for `U`.
pub fn crafted_probes(space: &OutcomeSpace, filtration: &Filtration) -> Vec<RandomVariable> {
    let n = space.len();
    let f1 = &filtration.f1;
    let resolution = conditional_resolution(space, filtration);
    let (u, levels): (Vec<f64>, Option<_>) =
        match build_uniform_grid(space, filtration, resolution.max(1)) {
            Ok(grid) if resolution >= 2 => (grid.values().values().to_vec(), Some(grid)),
            _ => {
                let mut u = vec![0.0; n];
                for block in f1.blocks() {
                    for (pos, &i) in block.iter().enumerate() {
                        u[i] = (pos + 1) as f64 / block.len() as f64;
                    }
                }
                (u, None)
            }
        };

    let mut probes = Vec::new();
    for s in [0.5, 1.0, 2.0] {
        let vals = (0..n).map(|i| u[i] + s * f1.block_of(i) as f64).collect();
        probes.push(RandomVariable::new(vals).expect("finite"));
    }
    if let Some(grid) = levels {
        for block in f1.blocks() {
            for k in 1..resolution {
                let mut vals = vec![1.0; n];
                for &i in block {
                    if grid.level_set(k).contains(i) {
                        vals[i] = 0.0;
                    }
                }
                probes.push(RandomVariable::new(vals).expect("finite"));
            }
        }
    }
    probes
}
