//! Similarity kernels over description vectors.
//!
//! A [`Kernel`] is the dense symmetric matrix that parameterizes an
//! L-ensemble. It is built from [`Description`]s with cosine similarity
//! (so it is a Gram matrix of unit vectors and PSD by construction) and
//! decomposed with cyclic Jacobi rotations.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{DomiError, Result};

/// Symmetry tolerance on `|K[i][j] - K[j][i]|`.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Eigenvalues in `[-PSD_TOL, 0)` are clamped to zero; anything lower is an error.
pub const PSD_TOL: f64 = 1e-8;
/// Jacobi stops once every off-diagonal entry is below this (relative to `max(1, max|K|)`).
pub const JACOBI_TOL: f64 = 1e-11;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Mean representation of a domain or batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub source_id: String,
    pub values: Vec<f64>,
}

impl Description {
    pub fn new(source_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(DomiError::Degenerate(format!(
                "description contains non-finite value {v}"
            )));
        }
        Ok(Self {
            source_id: source_id.into(),
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    /// Zero descriptions are representable but rejected by the kernel builder.
    pub fn is_degenerate(&self) -> bool {
        self.norm() == 0.0
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity of two raw vectors, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(DomiError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(DomiError::Degenerate(
            "cosine similarity of a zero-norm vector".into(),
        ));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn cosine_similarity(u: &Description, v: &Description) -> Result<f64> {
    cosine(&u.values, &v.values)
}

/// Dense symmetric similarity matrix with row/column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    item_ids: Vec<String>,
    entries: Vec<f64>,
}

impl Kernel {
    /// Build from row-major entries, checking shape and symmetry.
    pub fn new(item_ids: Vec<String>, entries: Vec<f64>) -> Result<Self> {
        let n = item_ids.len();
        if entries.len() != n * n {
            return Err(DomiError::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
            return Err(DomiError::Degenerate(format!("kernel entry {v}")));
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((entries[i * n + j] - entries[j * n + i]).abs());
            }
        }
        if worst > SYMMETRY_TOL {
            return Err(DomiError::NotSymmetric(worst));
        }
        Ok(Self { item_ids, entries })
    }

    /// Build from nested rows with ids `0..n`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(DomiError::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Self::new((0..n).map(|i| i.to_string()).collect(), entries)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut entries = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * n + i] = d;
        }
        Self {
            item_ids: (0..n).map(|i| i.to_string()).collect(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len() + j]
    }

    /// Principal submatrix on `indices` (row-major, `|S|×|S|`).
    pub fn principal_minor(&self, indices: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(indices.len() * indices.len());
        for &i in indices {
            for &j in indices {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Eigendecomposition that rejects kernels with eigenvalues below `-PSD_TOL`.
    pub fn psd_eig(&self) -> Result<EigenDecomposition> {
        let eig = sym_eig(self)?;
        if let Some(&min) = eig.eigenvalues.last() {
            if min < 0.0 {
                return Err(DomiError::NotPsd(min));
            }
        }
        Ok(eig)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for id in &self.item_ids {
            if id.contains([',', '\n', '\r']) {
                return Err(DomiError::InvalidArgument(format!(
                    "item id {id:?} cannot be written to CSV"
                )));
            }
        }
        writeln!(w, "{}", self.item_ids.join(","))?;
        let n = self.len();
        let mut line = String::new();
        for i in 0..n {
            line.clear();
            for j in 0..n {
                if j > 0 {
                    line.push(',');
                }
                write!(line, "{}", fmt_f64(self.get(i, j))).unwrap();
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| DomiError::Parse("empty kernel file".into()))??;
        let ids: Vec<String> = if header.trim().is_empty() {
            Vec::new()
        } else {
            header.split(',').map(|s| s.trim().to_string()).collect()
        };
        let n = ids.len();
        let mut entries = Vec::with_capacity(n * n);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| {
                    DomiError::Parse(format!("row {}: bad number {field:?}", row + 1))
                })?;
                entries.push(v);
            }
        }
        Self::new(ids, entries)
    }
}

/// Format a float with 17 significant digits; parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Cosine-similarity kernel over descriptions. Diagonal is exactly 1.
pub fn build_similarity_matrix(descriptions: &[Description]) -> Result<Kernel> {
    let first = descriptions
        .first()
        .ok_or_else(|| DomiError::InvalidArgument("no descriptions".into()))?;
    let dim = first.dim();
    let mut units = Vec::with_capacity(descriptions.len());
    for d in descriptions {
        if d.dim() != dim {
            return Err(DomiError::DimensionMismatch {
                expected: dim,
                got: d.dim(),
            });
        }
        let nrm = d.norm();
        if nrm == 0.0 {
            return Err(DomiError::Degenerate(format!(
                "description {:?} has zero norm",
                d.source_id
            )));
        }
        units.push(d.values.iter().map(|v| v / nrm).collect::<Vec<_>>());
    }
    let n = descriptions.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let dot: f64 = units[i].iter().zip(&units[j]).map(|(a, b)| a * b).sum();
            let c = dot.clamp(-1.0, 1.0);
            entries[i * n + j] = c;
            entries[j * n + i] = c;
        }
    }
    Ok(Kernel {
        item_ids: descriptions.iter().map(|d| d.source_id.clone()).collect(),
        entries,
    })
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column-major: `eigenvectors[i]` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V Λ Vᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for (lam, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for i in 0..n {
                let li = lam * v[i];
                for j in 0..n {
                    out[i * n + j] += li * v[j];
                }
            }
        }
        out
    }

    /// Number of eigenvalues strictly above `threshold`.
    pub fn rank(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > threshold).count()
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Eigenvalues in `[-PSD_TOL, 0)` are clamped to zero; more negative values
/// are returned unchanged (callers needing PSD use [`Kernel::psd_eig`]).
pub fn sym_eig(k: &Kernel) -> Result<EigenDecomposition> {
    let n = k.len();
    let mut a = k.entries.clone();
    // `Kernel::new` only guarantees symmetry within tolerance; symmetrize exactly.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = JACOBI_TOL * scale;

    let max_off = |a: &[f64]| {
        let mut m = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                m = m.max(a[i * n + j].abs());
            }
        }
        m
    };

    let mut sweeps = 0;
    while max_off(&a) >= tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(DomiError::NoConvergence(sweeps));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < tol * 1e-3 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (arp, arq) = (a[r * n + p], a[r * n + q]);
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let (apr, aqr) = (a[p * n + r], a[q * n + r]);
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    let (vrp, vrq) = (v[r * n + p], v[r * n + q]);
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let eigenvalues = order
        .iter()
        .map(|&i| {
            let l = a[i * n + i];
            if (-PSD_TOL..0.0).contains(&l) {
                0.0
            } else {
                l
            }
        })
        .collect();
    let eigenvectors = order
        .iter()
        .map(|&c| (0..n).map(|r| v[r * n + c]).collect())
        .collect();
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
