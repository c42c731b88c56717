//! The cats-vs-lions toy study: twelve binary-feature points, four
//! class-stratified batch samplers, and the training accuracy that the
//! object- and domain-spurious shortcuts reach on the sampled batches.
//!
//! The candidate space is small (C(6,3)² = 400 stratified batches), so every
//! sampler's support is enumerated and exact expectations are available
//! alongside seeded Monte-Carlo means.
//!
//! "More diverse on features F" is the within-class sum of pairwise
//! Manhattan distances on F, maximized exactly; the sampler is uniform over
//! the maximizing batches. Counting cross-class pairs instead would reward
//! batches where F separates the classes, which strengthens the shortcut
//! the sampler is meant to weaken.

use serde::{Deserialize, Serialize};

use crate::error::{DomiError, Result};
use crate::rng::SeededRng;

pub const BATCH_PER_CLASS: usize = 3;
pub const BATCH_SIZE: usize = 2 * BATCH_PER_CLASS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyPoint {
    /// Mane, proportion of face, body color, background.
    pub x: [u8; 4],
    /// 0 = cat, 1 = lion.
    pub y: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyFeature {
    Mane,
    FaceProportion,
    BodyColor,
    Background,
}

impl ToyFeature {
    pub const ALL: [ToyFeature; 4] = [
        ToyFeature::Mane,
        ToyFeature::FaceProportion,
        ToyFeature::BodyColor,
        ToyFeature::Background,
    ];
    pub const OBJECT: [ToyFeature; 3] = [
        ToyFeature::Mane,
        ToyFeature::FaceProportion,
        ToyFeature::BodyColor,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    /// `x1 + x2 >= 1 ⇒ lion`
    Causal,
    /// Object-spurious: `x3 = 1 ⇒ lion`
    Osc,
    /// Domain-spurious: `x4 = 1 ⇒ lion`
    Dsc,
}

impl Correlation {
    pub fn predict(self, p: &ToyPoint) -> u8 {
        let lion = match self {
            Correlation::Causal => p.x[0] + p.x[1] >= 1,
            Correlation::Osc => p.x[2] == 1,
            Correlation::Dsc => p.x[3] == 1,
        };
        u8::from(lion)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToyMethod {
    S1,
    S2,
    S3,
    S4,
}

impl ToyMethod {
    pub const ALL: [ToyMethod; 4] = [ToyMethod::S1, ToyMethod::S2, ToyMethod::S3, ToyMethod::S4];

    /// Features the sampler diversifies; `None` for plain stratified sampling.
    pub fn diversity_features(self) -> Option<&'static [ToyFeature]> {
        match self {
            ToyMethod::S1 => None,
            ToyMethod::S2 => Some(&ToyFeature::OBJECT),
            ToyMethod::S3 => Some(&[ToyFeature::Background]),
            ToyMethod::S4 => Some(&ToyFeature::ALL),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ToyMethod::S1 => "S1",
            ToyMethod::S2 => "S2",
            ToyMethod::S3 => "S3",
            ToyMethod::S4 => "S4",
        }
    }
}

/// The twelve points D1..D12: six cats followed by six lions.
pub fn toy_dataset() -> [ToyPoint; 12] {
    const COLS: [([u8; 4], u8); 12] = [
        ([0, 0, 0, 0], 0),
        ([0, 0, 0, 0], 0),
        ([0, 0, 0, 0], 0),
        ([0, 0, 0, 1], 0),
        ([0, 0, 1, 0], 0),
        ([0, 0, 1, 1], 0),
        ([0, 1, 1, 1], 1),
        ([0, 1, 1, 1], 1),
        ([0, 1, 1, 0], 1),
        ([1, 0, 1, 0], 1),
        ([1, 1, 1, 1], 1),
        ([1, 1, 1, 1], 1),
    ];
    COLS.map(|(x, y)| ToyPoint { x, y })
}

fn manhattan(a: &ToyPoint, b: &ToyPoint, features: &[ToyFeature]) -> u32 {
    features
        .iter()
        .map(|f| u32::from(a.x[f.index()].abs_diff(b.x[f.index()])))
        .sum()
}

/// Sum over unordered point pairs of the Manhattan distance on `features`.
pub fn batch_diversity(batch: &[ToyPoint], features: &[ToyFeature]) -> Result<u32> {
    if features.is_empty() {
        return Err(DomiError::InvalidArgument("empty feature subset".into()));
    }
    if batch.is_empty() {
        return Err(DomiError::InvalidArgument("empty batch".into()));
    }
    let mut total = 0;
    for i in 0..batch.len() {
        for j in (i + 1)..batch.len() {
            total += manhattan(&batch[i], &batch[j], features);
        }
    }
    Ok(total)
}

/// Diversity objective of the S2–S4 samplers: pairs within the same class only.
pub fn within_class_diversity(batch: &[ToyPoint], features: &[ToyFeature]) -> Result<u32> {
    let cats: Vec<ToyPoint> = batch.iter().filter(|p| p.y == 0).copied().collect();
    let lions: Vec<ToyPoint> = batch.iter().filter(|p| p.y == 1).copied().collect();
    let part = |ps: &[ToyPoint]| {
        if ps.is_empty() {
            Ok(0)
        } else {
            batch_diversity(ps, features)
        }
    };
    Ok(part(&cats)? + part(&lions)?)
}

/// Dataset indices of a stratified batch: three cats then three lions.
pub type ToyBatch = [usize; BATCH_SIZE];

fn triples(offset: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(20);
    for a in 0..6 {
        for b in (a + 1)..6 {
            for c in (b + 1)..6 {
                out.push([offset + a, offset + b, offset + c]);
            }
        }
    }
    out
}

/// All 400 class-stratified batches, in lexicographic order.
pub fn stratified_batches() -> Vec<ToyBatch> {
    let (cats, lions) = (triples(0), triples(6));
    let mut out = Vec::with_capacity(cats.len() * lions.len());
    for c in &cats {
        for l in &lions {
            out.push([c[0], c[1], c[2], l[0], l[1], l[2]]);
        }
    }
    out
}

pub fn batch_points(batch: &ToyBatch) -> [ToyPoint; BATCH_SIZE] {
    let data = toy_dataset();
    batch.map(|i| data[i])
}

/// Batches a method can return (each equally likely).
pub fn method_support(method: ToyMethod) -> Vec<ToyBatch> {
    let all = stratified_batches();
    let Some(features) = method.diversity_features() else {
        return all;
    };
    let scored: Vec<(u32, ToyBatch)> = all
        .into_iter()
        .map(|b| {
            (
                within_class_diversity(&batch_points(&b), features).unwrap(),
                b,
            )
        })
        .collect();
    let best = scored.iter().map(|(s, _)| *s).max().unwrap_or(0);
    scored
        .into_iter()
        .filter(|(s, _)| *s == best)
        .map(|(_, b)| b)
        .collect()
}

fn sample_from(support: &[ToyBatch], rng: &mut SeededRng) -> ToyBatch {
    support[rng.below(support.len())]
}

pub fn sample_toy_batch(method: ToyMethod, seed: u64) -> ToyBatch {
    sample_from(&method_support(method), &mut SeededRng::new(seed))
}

/// Fraction of points whose label the correlation predicts.
pub fn correlation_accuracy(batch: &[ToyPoint], corr: Correlation) -> Result<f64> {
    if batch.is_empty() {
        return Err(DomiError::InvalidArgument("empty batch".into()));
    }
    Ok(correct(batch, corr) as f64 / batch.len() as f64)
}

fn correct(batch: &[ToyPoint], corr: Correlation) -> u64 {
    batch.iter().filter(|p| corr.predict(p) == p.y).count() as u64
}

/// Exact rational value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        let g = gcd(num, den).max(1);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (u128::from(self.num) * u128::from(other.den))
            .cmp(&(u128::from(other.num) * u128::from(self.den)))
    }
}

impl std::fmt::Display for Fraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Expected accuracy of `corr` under the method's uniform-over-support law.
pub fn exact_expectation(method: ToyMethod, corr: Correlation) -> Fraction {
    let support = method_support(method);
    let hits: u64 = support
        .iter()
        .map(|b| correct(&batch_points(b), corr))
        .sum();
    Fraction::new(hits, (support.len() * BATCH_SIZE) as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRow {
    pub method: ToyMethod,
    pub support_size: usize,
    pub osc_mean: f64,
    pub dsc_mean: f64,
    pub exact_osc: Fraction,
    pub exact_dsc: Fraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub n_batches: usize,
    pub seed: u64,
    pub rows: Vec<ToyRow>,
}

impl ToyReport {
    pub fn row(&self, method: ToyMethod) -> &ToyRow {
        self.rows.iter().find(|r| r.method == method).unwrap()
    }
}

/// Mean Osc/Dsc accuracy over `n_batches` seeded draws per method, plus the
/// exact expectations. Each method draws from its own derived stream.
pub fn run_toy_experiment(n_batches: usize, seed: u64) -> Result<ToyReport> {
    if n_batches == 0 {
        return Err(DomiError::InvalidArgument("n_batches must be >= 1".into()));
    }
    let rows = ToyMethod::ALL
        .iter()
        .map(|&method| {
            let support = method_support(method);
            let mut rng = SeededRng::for_stage(seed, &format!("toy/{}", method.name()));
            let (mut osc, mut dsc) = (0u64, 0u64);
            for _ in 0..n_batches {
                let pts = batch_points(&sample_from(&support, &mut rng));
                osc += correct(&pts, Correlation::Osc);
                dsc += correct(&pts, Correlation::Dsc);
            }
            let denom = (n_batches * BATCH_SIZE) as f64;
            ToyRow {
                method,
                support_size: support.len(),
                osc_mean: osc as f64 / denom,
                dsc_mean: dsc as f64 / denom,
                exact_osc: exact_expectation(method, Correlation::Osc),
                exact_dsc: exact_expectation(method, Correlation::Dsc),
            }
        })
        .collect();
    Ok(ToyReport {
        n_batches,
        seed,
        rows,
    })
}
