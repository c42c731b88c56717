//! Fixtures shared by the benchmarks.

use domi_core::{build_similarity_matrix, Description, Kernel, SeededRng};

/// Cosine kernel over `n` random `dim`-dimensional descriptions.
pub fn random_kernel(n: usize, dim: usize, seed: u64) -> Kernel {
    let mut rng = SeededRng::new(seed);
    let descriptions: Vec<Description> = (0..n)
        .map(|i| {
            let values = (0..dim).map(|_| rng.normal()).collect();
            Description::new(format!("d{i}"), values).unwrap()
        })
        .collect();
    build_similarity_matrix(&descriptions).unwrap()
}
