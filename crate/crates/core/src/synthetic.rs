//! Seeded synthetic datasets for desk-scale benchmarking and tests.

use rand::Rng;

use crate::rng::{op_rng, stream};

/// Gaussian mixture: `clusters` isotropic blobs with centers uniform in the
/// unit cube and standard deviation `spread`. Points are assigned to blobs
/// round-robin so every blob has nearly equal mass.
pub fn gaussian_blobs(
    n: usize,
    dim: usize,
    clusters: usize,
    spread: f64,
    seed: u64,
) -> Vec<Vec<f32>> {
    assert!(clusters >= 1);
    let mut rng = op_rng(seed, stream::WORKLOAD, 0xb10b);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            let center = &centers[i % clusters];
            (0..dim)
                .map(|j| (center[j] + spread * normal(&mut rng)) as f32)
                .collect()
        })
        .collect()
}

// Box-Muller; one sample per call is plenty at this scale.
fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
