//! Sampling diverse subsets from an L-ensemble determinantal point process.
//!
//! `P(S) ∝ det(L_S)` with normalizer `det(L + I)`. The exact sampler is the
//! two-phase spectral algorithm: pick eigenvectors independently with
//! probability `λ/(λ+1)`, then choose items one at a time from the spanned
//! subspace, projecting the chosen coordinate out after each step. The
//! fixed-size variant picks exactly `k` eigenvectors using elementary
//! symmetric polynomials of the spectrum. Greedy MAP is the deterministic
//! alternative for large ground sets.

use serde::{Deserialize, Serialize};

use crate::error::{DomiError, Result};
use crate::kernel::{EigenDecomposition, Kernel};
use crate::linalg::{det, dot, log_add_exp};
use crate::rng::SeededRng;

/// Largest ground set the enumeration oracle accepts.
pub const MAX_ORACLE_N: usize = 20;
/// Eigenvalues at or below this count as zero for k-DPP rank purposes.
pub const RANK_TOL: f64 = 1e-10;
/// Greedy MAP stops when no residual variance exceeds this.
pub const GAIN_TOL: f64 = 1e-10;
const REORTH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMethod {
    ExactDpp,
    KDpp,
    GreedyMap,
    Random,
    BruteForce,
}

impl SampleMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleMethod::ExactDpp => "exact-dpp",
            SampleMethod::KDpp => "k-dpp",
            SampleMethod::GreedyMap => "greedy-map",
            SampleMethod::Random => "random",
            SampleMethod::BruteForce => "brute-force",
        }
    }
}

/// Indices chosen by a sampler, in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSelection {
    pub indices: Vec<usize>,
    pub method: SampleMethod,
    pub seed: u64,
}

impl SampleSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v
    }

    /// Bitmask of the selection (ground sets up to 64 items).
    pub fn mask(&self) -> u64 {
        self.indices.iter().fold(0u64, |m, &i| m | (1u64 << i))
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }
}

/// `det(L_S) / det(L + I)`; the brute-force oracle for small ground sets.
pub fn subset_probability(l: &Kernel, subset: &[usize]) -> Result<f64> {
    let n = l.len();
    check_oracle_size(n)?;
    check_indices(subset, n)?;
    l.psd_eig()?;
    Ok(det(&l.principal_minor(subset), subset.len()) / normalizer(l))
}

fn normalizer(l: &Kernel) -> f64 {
    let n = l.len();
    let mut shifted = l.entries().to_vec();
    for i in 0..n {
        shifted[i * n + i] += 1.0;
    }
    det(&shifted, n)
}

fn check_oracle_size(n: usize) -> Result<()> {
    if n > MAX_ORACLE_N {
        return Err(DomiError::InvalidArgument(format!(
            "ground set of {n} items exceeds the enumeration limit of {MAX_ORACLE_N}"
        )));
    }
    Ok(())
}

fn check_indices(subset: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(DomiError::InvalidArgument(format!(
                "index {i} out of range for {n} items"
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(DomiError::InvalidArgument(format!("duplicate index {i}")));
        }
    }
    Ok(())
}

/// Every subset (as a bitmask) with its probability under the L-ensemble,
/// optionally conditioned on `|S| = k`. Exponential; oracle use only.
pub fn subset_distribution(l: &Kernel, k: Option<usize>) -> Result<Vec<(u64, f64)>> {
    let n = l.len();
    check_oracle_size(n)?;
    l.psd_eig()?;
    let mut out = Vec::new();
    let mut total = 0.0;
    for mask in 0u64..(1u64 << n) {
        if let Some(k) = k {
            if mask.count_ones() as usize != k {
                continue;
            }
        }
        let idx = mask_indices(mask);
        let w = det(&l.principal_minor(&idx), idx.len()).max(0.0);
        total += w;
        out.push((mask, w));
    }
    if !(total > 0.0) {
        return Err(DomiError::RankDeficient {
            requested: k.unwrap_or(0),
            rank: 0,
        });
    }
    for (_, w) in &mut out {
        *w /= total;
    }
    Ok(out)
}

pub fn mask_indices(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask & (1u64 << i) != 0).collect()
}

/// Sample by inverting the enumerated subset distribution.
pub fn sample_brute_force(l: &Kernel, k: Option<usize>, seed: u64) -> Result<SampleSelection> {
    let dist = subset_distribution(l, k)?;
    let weights: Vec<f64> = dist.iter().map(|&(_, p)| p).collect();
    let mut rng = SeededRng::new(seed);
    let pick = rng.categorical(&weights).expect("normalized distribution");
    Ok(SampleSelection {
        indices: mask_indices(dist[pick].0),
        method: SampleMethod::BruteForce,
        seed,
    })
}

/// Exact L-ensemble draw by the spectral method.
pub fn sample_dpp(l: &Kernel, seed: u64) -> Result<SampleSelection> {
    let eig = l.psd_eig()?;
    Ok(sample_dpp_with(&eig, seed))
}

/// Exact draw reusing a precomputed decomposition (for repeated sampling).
pub fn sample_dpp_with(eig: &EigenDecomposition, seed: u64) -> SampleSelection {
    let mut rng = SeededRng::new(seed);
    let basis: Vec<Vec<f64>> = eig
        .eigenvalues
        .iter()
        .zip(&eig.eigenvectors)
        .filter(|(&lam, _)| rng.uniform() < lam / (lam + 1.0))
        .map(|(_, v)| v.clone())
        .collect();
    SampleSelection {
        indices: project_sample(basis, &mut rng),
        method: SampleMethod::ExactDpp,
        seed,
    }
}

/// Elementary symmetric polynomial `e_k` by the O(nk) recurrence.
pub fn elementary_symmetric(values: &[f64], k: usize) -> Result<f64> {
    if k > values.len() {
        return Err(DomiError::InvalidArgument(format!(
            "k = {k} exceeds {} values",
            values.len()
        )));
    }
    // e[l] holds e_l of the prefix processed so far.
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (m, &lam) in values.iter().enumerate() {
        for l in (1..=k.min(m + 1)).rev() {
            e[l] += lam * e[l - 1];
        }
    }
    Ok(e[k])
}

/// `table[l][m] = ln e_l(λ_1..λ_m)`, computed in log space so large k
/// and widely spread spectra neither overflow nor underflow.
fn log_esp_table(values: &[f64], k: usize) -> Vec<Vec<f64>> {
    let n = values.len();
    let mut t = vec![vec![f64::NEG_INFINITY; n + 1]; k + 1];
    t[0].iter_mut().for_each(|x| *x = 0.0);
    for l in 1..=k {
        for m in 1..=n {
            let lam = values[m - 1];
            let with = if lam > 0.0 {
                lam.ln() + t[l - 1][m - 1]
            } else {
                f64::NEG_INFINITY
            };
            t[l][m] = log_add_exp(t[l][m - 1], with);
        }
    }
    t
}

/// Draw exactly `k` items with `P(S) ∝ det(L_S)`.
pub fn sample_kdpp(l: &Kernel, k: usize, seed: u64) -> Result<SampleSelection> {
    let eig = l.psd_eig()?;
    sample_kdpp_with(&eig, k, seed)
}

pub fn sample_kdpp_with(eig: &EigenDecomposition, k: usize, seed: u64) -> Result<SampleSelection> {
    let rank = eig.rank(RANK_TOL);
    if k > rank {
        return Err(DomiError::RankDeficient { requested: k, rank });
    }
    let values: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&x| if x > RANK_TOL { x } else { 0.0 })
        .collect();
    let table = log_esp_table(&values, k);
    let mut rng = SeededRng::new(seed);
    let mut basis = Vec::with_capacity(k);
    let mut remaining = k;
    for m in (1..=values.len()).rev() {
        if remaining == 0 {
            break;
        }
        let lam = values[m - 1];
        if lam <= 0.0 {
            continue;
        }
        let log_marginal = lam.ln() + table[remaining - 1][m - 1] - table[remaining][m];
        if rng.uniform() < log_marginal.exp() {
            basis.push(eig.eigenvectors[m - 1].clone());
            remaining -= 1;
        }
    }
    debug_assert_eq!(remaining, 0);
    Ok(SampleSelection {
        indices: project_sample(basis, &mut rng),
        method: SampleMethod::KDpp,
        seed,
    })
}

/// Second phase shared by the exact and fixed-size samplers: select one item
/// per basis vector, each time conditioning the subspace on that item.
fn project_sample(mut basis: Vec<Vec<f64>>, rng: &mut SeededRng) -> Vec<usize> {
    let mut picked = Vec::with_capacity(basis.len());
    if basis.is_empty() {
        return picked;
    }
    let n = basis[0].len();
    orthonormalize(&mut basis);
    while !basis.is_empty() {
        let weights: Vec<f64> = (0..n)
            .map(|i| basis.iter().map(|v| v[i] * v[i]).sum())
            .collect();
        let item = match rng.categorical(&weights) {
            Some(i) => i,
            None => break,
        };
        picked.push(item);
        let pivot_at = (0..basis.len())
            .max_by(|&a, &b| basis[a][item].abs().total_cmp(&basis[b][item].abs()))
            .unwrap();
        let pivot = basis.remove(pivot_at);
        for v in &mut basis {
            let f = v[item] / pivot[item];
            for (x, p) in v.iter_mut().zip(&pivot) {
                *x -= f * p;
            }
            v[item] = 0.0;
        }
        orthonormalize(&mut basis);
    }
    picked
}

/// Modified Gram–Schmidt; vectors whose projected norm falls below
/// `REORTH_TOL` get a second pass, and are dropped if still degenerate.
fn orthonormalize(basis: &mut Vec<Vec<f64>>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    for mut v in basis.drain(..) {
        let before = dot(&v, &v).sqrt();
        let mut nrm = project_out(&mut v, &out);
        if nrm < REORTH_TOL * before.max(1.0) {
            nrm = project_out(&mut v, &out);
        }
        if nrm > 1e-14 {
            v.iter_mut().for_each(|x| *x /= nrm);
            out.push(v);
        }
    }
    *basis = out;
}

fn project_out(v: &mut [f64], against: &[Vec<f64>]) -> f64 {
    for q in against {
        let c = dot(q, v);
        for (x, qi) in v.iter_mut().zip(q) {
            *x -= c * qi;
        }
    }
    dot(v, v).sqrt()
}

/// Deterministic greedy maximization of `log det(L_S)` with `|S| = k`.
///
/// Uses incremental Cholesky factors, so each step is O(n·|S|). Near-equal
/// gains (within 1e-12 relative) go to the lowest index.
pub fn greedy_map(l: &Kernel, k: usize) -> Result<SampleSelection> {
    let n = l.len();
    if k > n {
        return Err(DomiError::InvalidArgument(format!(
            "k = {k} exceeds ground set of {n}"
        )));
    }
    let mut residual: Vec<f64> = (0..n).map(|i| l.get(i, i)).collect();
    let mut factors: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    let mut taken = vec![false; n];
    let mut picked = Vec::with_capacity(k);
    for step in 0..k {
        let mut best: Option<usize> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            match best {
                None => best = Some(i),
                Some(b) => {
                    let rb = residual[b];
                    if residual[i] > rb + 1e-12 * rb.abs().max(1.0) {
                        best = Some(i);
                    }
                }
            }
        }
        let j = best.expect("k <= n leaves a candidate");
        if !(residual[j] > GAIN_TOL) {
            return Err(DomiError::RankDeficient {
                requested: k,
                rank: step,
            });
        }
        taken[j] = true;
        picked.push(j);
        let dj = residual[j].sqrt();
        let cj = factors[j].clone();
        for i in (0..n).filter(|&i| !taken[i]) {
            let e = (l.get(j, i) - dot(&cj, &factors[i])) / dj;
            factors[i].push(e);
            residual[i] -= e * e;
        }
    }
    Ok(SampleSelection {
        indices: picked,
        method: SampleMethod::GreedyMap,
        seed: 0,
    })
}

/// Uniform size-k subset via partial Fisher–Yates.
pub fn sample_random(n: usize, k: usize, seed: u64) -> Result<SampleSelection> {
    if k > n {
        return Err(DomiError::InvalidArgument(format!(
            "k = {k} exceeds ground set of {n}"
        )));
    }
    let mut items: Vec<usize> = (0..n).collect();
    let mut rng = SeededRng::new(seed);
    rng.partial_shuffle(&mut items, k);
    items.truncate(k);
    Ok(SampleSelection {
        indices: items,
        method: SampleMethod::Random,
        seed,
    })
}

/// Natural log of `det(L_S)`.
pub fn log_det_minor(l: &Kernel, subset: &[usize]) -> f64 {
    det(&l.principal_minor(subset), subset.len()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn duplicated_kernel() -> Kernel {
        // Items 0 and 2 are identical.
        Kernel::from_rows(&[
            vec![1.0, 0.3, 1.0, 0.1],
            vec![0.3, 1.0, 0.3, 0.2],
            vec![1.0, 0.3, 1.0, 0.1],
            vec![0.1, 0.2, 0.1, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn subset_probability_examples() {
        assert!((subset_probability(&Kernel::identity(2), &[0]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(
            subset_probability(&duplicated_kernel(), &[0, 2]).unwrap(),
            0.0
        );
        assert!(
            (subset_probability(&Kernel::diagonal(&[3.0]), &[0]).unwrap() - 0.75).abs() < 1e-15
        );
    }

    #[test]
    fn subset_probability_errors() {
        assert!(subset_probability(&Kernel::identity(21), &[0]).is_err());
        assert!(subset_probability(&Kernel::identity(2), &[2]).is_err());
        assert!(subset_probability(&Kernel::identity(2), &[1, 1]).is_err());
        let indefinite = Kernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            subset_probability(&indefinite, &[0]),
            Err(DomiError::NotPsd(_))
        ));
    }

    #[test]
    fn zero_kernel_samples_empty_set() {
        let l = Kernel::diagonal(&[0.0, 0.0, 0.0]);
        for seed in 0..100 {
            assert!(sample_dpp(&l, seed).unwrap().is_empty());
        }
    }

    #[test]
    fn esp_examples() {
        assert_eq!(elementary_symmetric(&[4.0, 5.0], 0).unwrap(), 1.0);
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 1).unwrap(), 6.0);
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 3).unwrap(), 6.0);
        assert!(elementary_symmetric(&[1.0], 2).is_err());
    }

    #[test]
    fn log_esp_matches_linear_recurrence() {
        let vals = [0.5, 2.0, 0.0, 3.5, 1.25];
        let t = log_esp_table(&vals, 5);
        for k in 0..=5 {
            let want = elementary_symmetric(&vals, k).unwrap();
            let got = t[k][5].exp();
            assert!((got - want).abs() <= 1e-12 * want.max(1.0), "k={k}");
        }
    }

    #[test]
    fn kdpp_full_set_when_k_equals_n() {
        let l = Kernel::from_rows(&[
            vec![2.0, 0.5, 0.1],
            vec![0.5, 1.0, 0.2],
            vec![0.1, 0.2, 1.5],
        ])
        .unwrap();
        for seed in 0..50 {
            assert_eq!(sample_kdpp(&l, 3, seed).unwrap().sorted(), vec![0, 1, 2]);
        }
    }

    #[test]
    fn kdpp_rank_error() {
        let l = Kernel::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            sample_kdpp(&l, 2, 0),
            Err(DomiError::RankDeficient {
                requested: 2,
                rank: 1
            })
        ));
    }

    #[test]
    fn kdpp_zero_is_empty() {
        assert!(sample_kdpp(&Kernel::identity(3), 0, 1).unwrap().is_empty());
    }

    #[test]
    fn greedy_map_examples() {
        let sel = greedy_map(&Kernel::diagonal(&[5.0, 1.0, 3.0]), 2).unwrap();
        assert_eq!(sel.indices, vec![0, 2]);
        let sel = greedy_map(&duplicated_kernel(), 3).unwrap();
        assert!(!(sel.contains(0) && sel.contains(2)));
        assert!(matches!(
            greedy_map(&duplicated_kernel(), 4),
            Err(DomiError::RankDeficient {
                requested: 4,
                rank: 3
            })
        ));
        assert!(greedy_map(&Kernel::identity(2), 3).is_err());
    }

    #[test]
    fn greedy_map_ties_take_lowest_index() {
        assert_eq!(
            greedy_map(&Kernel::identity(4), 2).unwrap().indices,
            vec![0, 1]
        );
    }

    #[test]
    fn random_examples() {
        assert_eq!(
            sample_random(5, 5, 3).unwrap().sorted(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(
            sample_random(10, 4, 99).unwrap(),
            sample_random(10, 4, 99).unwrap()
        );
        assert!(sample_random(2, 3, 0).is_err());
    }

    #[test]
    fn selection_serializes_method_in_kebab_case() {
        let s = SampleSelection {
            indices: vec![2, 0],
            method: SampleMethod::KDpp,
            seed: 4,
        };
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"indices":[2,0],"method":"k-dpp","seed":4}"#
        );
    }
}
