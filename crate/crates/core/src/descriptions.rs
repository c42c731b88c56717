//! Description vectors: the mean featurizer output over a set of points.
//!
//! Column sums are taken over sorted values, so a description is exactly
//! (bitwise) invariant to the order of its points. That keeps parallel
//! extraction and capped subsampling free of summation-order drift.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::data::DomainDataset;
use crate::error::{DomiError, Result};
use crate::kernel::{cosine_similarity, fmt_f64, Description};
use crate::nnet::Mlp;
use crate::rng::SeededRng;

/// Mean of the featurizer outputs of `points`.
///
/// A zero result is returned as-is; the kernel builder rejects it.
pub fn describe_set(
    featurizer: &Mlp,
    source_id: impl Into<String>,
    points: &[&[f64]],
) -> Result<Description> {
    if points.is_empty() {
        return Err(DomiError::InvalidArgument(
            "cannot describe an empty set".into(),
        ));
    }
    let features: Vec<Vec<f64>> = points
        .iter()
        .map(|x| featurizer.forward(x))
        .collect::<Result<_>>()?;
    let dim = featurizer.output_dim();
    let n = features.len() as f64;
    let mut column = Vec::with_capacity(features.len());
    let values = (0..dim)
        .map(|j| {
            column.clear();
            column.extend(features.iter().map(|f| f[j]));
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / n
        })
        .collect();
    Description::new(source_id, values)
}

/// One description per domain, in ascending domain order.
///
/// With `cap = Some(c)` at most `c` points per domain are used, chosen as
/// the first `c` of a per-domain seeded shuffle. `None` (or a cap at least
/// the domain size) uses every point and ignores `seed`.
pub fn describe_domains(
    featurizer: &Mlp,
    data: &DomainDataset,
    cap: Option<usize>,
    seed: u64,
) -> Result<Vec<Description>> {
    if cap == Some(0) {
        return Err(DomiError::InvalidArgument(
            "per-domain cap must be positive".into(),
        ));
    }
    data.domain_ids()
        .par_iter()
        .map(|&domain| {
            let mut idx = data.domain_points(domain).unwrap_or(&[]).to_vec();
            if idx.is_empty() {
                return Err(DomiError::Degenerate(format!("domain {domain} is empty")));
            }
            if let Some(c) = cap {
                if c < idx.len() {
                    let mut rng = SeededRng::for_stage(seed, &format!("describe/{domain}"));
                    rng.partial_shuffle(&mut idx, c);
                    idx.truncate(c);
                }
            }
            let xs: Vec<&[f64]> = idx.iter().map(|&i| data.points()[i].x.as_slice()).collect();
            describe_set(featurizer, domain.to_string(), &xs)
        })
        .collect()
}

/// Descriptions of point batches (`batches[b]` holds dataset indices).
pub fn describe_batches(
    featurizer: &Mlp,
    data: &DomainDataset,
    batches: &[Vec<usize>],
) -> Result<Vec<Description>> {
    batches
        .par_iter()
        .enumerate()
        .map(|(b, idx)| {
            let xs: Vec<&[f64]> = idx.iter().map(|&i| data.points()[i].x.as_slice()).collect();
            describe_set(featurizer, format!("b{b}"), &xs)
        })
        .collect()
}

/// Sum of cosine similarities over unordered distinct pairs.
pub fn pairwise_similarity_sum(descriptions: &[Description]) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..descriptions.len() {
        for j in (i + 1)..descriptions.len() {
            total += cosine_similarity(&descriptions[i], &descriptions[j])?;
        }
    }
    Ok(total)
}

/// Sum of pairwise cosine similarities of all domain descriptions.
/// Smaller means the representation separates domains more.
pub fn sensitivity_score(featurizer: &Mlp, data: &DomainDataset) -> Result<f64> {
    if data.n_domains() < 2 {
        return Err(DomiError::InvalidArgument(
            "sensitivity needs at least 2 domains".into(),
        ));
    }
    pairwise_similarity_sum(&describe_domains(featurizer, data, None, 0)?)
}

/// CSV with header `id,v0,v1,...`, one row per description.
pub fn write_descriptions_csv<W: Write>(descriptions: &[Description], mut w: W) -> Result<()> {
    let dim = descriptions.first().map_or(0, Description::dim);
    let mut line = String::from("id");
    for j in 0..dim {
        write!(line, ",v{j}").unwrap();
    }
    writeln!(w, "{line}")?;
    for d in descriptions {
        line.clear();
        line.push_str(&d.source_id);
        for v in &d.values {
            write!(line, ",{}", fmt_f64(*v)).unwrap();
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
