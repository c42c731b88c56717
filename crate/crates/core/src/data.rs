//! Labeled multi-domain datasets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{DomiError, Result};
use crate::kernel::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub x: Vec<f64>,
    pub y: usize,
    pub domain: u32,
}

/// Points plus an index from domain label to point positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    points: Vec<LabeledPoint>,
    domain_index: BTreeMap<u32, Vec<usize>>,
    dim: usize,
}

impl DomainDataset {
    pub fn new(points: Vec<LabeledPoint>) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.x.len());
        let mut domain_index: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, p) in points.iter().enumerate() {
            if p.x.len() != dim {
                return Err(DomiError::DimensionMismatch {
                    expected: dim,
                    got: p.x.len(),
                });
            }
            if p.x.iter().any(|v| !v.is_finite()) {
                return Err(DomiError::Degenerate(format!(
                    "point {i} has a non-finite feature"
                )));
            }
            domain_index.entry(p.domain).or_default().push(i);
        }
        Ok(Self {
            points,
            domain_index,
            dim,
        })
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Domain labels in ascending order.
    pub fn domain_ids(&self) -> Vec<u32> {
        self.domain_index.keys().copied().collect()
    }

    pub fn n_domains(&self) -> usize {
        self.domain_index.len()
    }

    pub fn domain_points(&self, domain: u32) -> Option<&[usize]> {
        self.domain_index.get(&domain).map(Vec::as_slice)
    }

    /// Position of a domain label within [`Self::domain_ids`]; used as the
    /// class index when domains are prediction targets.
    pub fn domain_position(&self, domain: u32) -> Option<usize> {
        self.domain_index.keys().position(|&d| d == domain)
    }

    /// `1 + max(y)`.
    pub fn n_classes(&self) -> usize {
        self.points.iter().map(|p| p.y + 1).max().unwrap_or(0)
    }

    /// Number of distinct class labels that actually occur.
    pub fn distinct_classes(&self) -> usize {
        let mut seen: Vec<usize> = self.points.iter().map(|p| p.y).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Dataset keeping only the listed domains (in original point order).
    pub fn restrict_to_domains(&self, domains: &[u32]) -> Result<Self> {
        for d in domains {
            if !self.domain_index.contains_key(d) {
                return Err(DomiError::InvalidArgument(format!("unknown domain {d}")));
            }
        }
        let keep: Vec<LabeledPoint> = self
            .points
            .iter()
            .filter(|p| domains.contains(&p.domain))
            .cloned()
            .collect();
        Self::new(keep)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut pts = Vec::with_capacity(indices.len());
        for &i in indices {
            pts.push(
                self.points
                    .get(i)
                    .ok_or_else(|| DomiError::InvalidArgument(format!("point index {i}")))?
                    .clone(),
            );
        }
        Self::new(pts)
    }

    /// CSV with header `domain,y,x0,x1,...`; features at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("domain,y");
        for j in 0..self.dim {
            write!(header, ",x{j}").unwrap();
        }
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for p in &self.points {
            line.clear();
            write!(line, "{},{}", p.domain, p.y).unwrap();
            for v in &p.x {
                write!(line, ",{}", fmt_f64(*v)).unwrap();
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| DomiError::Parse("empty dataset file".into()))??;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "domain" || cols[1] != "y" {
            return Err(DomiError::Parse(
                "dataset header must start with `domain,y`".into(),
            ));
        }
        let dim = cols.len() - 2;
        let mut points = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 2 {
                return Err(DomiError::Parse(format!(
                    "row {}: expected {} fields, found {}",
                    row + 1,
                    dim + 2,
                    fields.len()
                )));
            }
            let bad = |what: &str, f: &str| {
                DomiError::Parse(format!("row {}: bad {what} {f:?}", row + 1))
            };
            let domain = fields[0].parse().map_err(|_| bad("domain", fields[0]))?;
            let y = fields[1].parse().map_err(|_| bad("label", fields[1]))?;
            let x = fields[2..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad("feature", f)))
                .collect::<Result<Vec<_>>>()?;
            points.push(LabeledPoint { x, y, domain });
        }
        Self::new(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], y: usize, domain: u32) -> LabeledPoint {
        LabeledPoint {
            x: x.to_vec(),
            y,
            domain,
        }
    }

    #[test]
    fn index_and_restriction() {
        let ds =
            DomainDataset::new(vec![pt(&[0.0], 0, 5), pt(&[1.0], 1, 2), pt(&[2.0], 1, 5)]).unwrap();
        assert_eq!(ds.domain_ids(), vec![2, 5]);
        assert_eq!(ds.domain_points(5).unwrap(), &[0, 2]);
        assert_eq!(ds.domain_position(5), Some(1));
        assert_eq!(ds.n_classes(), 2);
        let r = ds.restrict_to_domains(&[5]).unwrap();
        assert_eq!(r.len(), 2);
        assert!(ds.restrict_to_domains(&[9]).is_err());
    }

    #[test]
    fn rejects_ragged_points() {
        assert!(DomainDataset::new(vec![pt(&[0.0], 0, 0), pt(&[1.0, 2.0], 0, 0)]).is_err());
        assert!(DomainDataset::new(vec![pt(&[f64::INFINITY], 0, 0)]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = DomainDataset::new(vec![pt(&[0.1, -2.5e-7], 0, 3), pt(&[1.0 / 3.0, 7.0], 1, 4)])
            .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("domain,y,x0,x1\n"));
        assert_eq!(DomainDataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn csv_errors_name_the_row() {
        let err = DomainDataset::read_csv("domain,y,x0\n0,1,abc\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 1"));
        assert!(DomainDataset::read_csv("a,b\n".as_bytes()).is_err());
    }
}
