//! Synthetic rotated-domain data with separable causal, object-spurious and
//! domain-side feature blocks.
//!
//! Each point is `[ẋ | x̂ | x̄]`:
//! - `ẋ` (causal): class prototype `±causal_scale·e₁`, rotated by the domain
//!   angle in its first two coordinates, plus noise;
//! - `x̂` (object-spurious): `±spurious_scale` on every coordinate, agreeing
//!   with the label with probability `spurious_alignment` (0.5 at test);
//! - `x̄` (domain-side): an angle code `domain_scale·[cos a, sin a, bumps…]`
//!   plus noise, where the bumps are Gaussian profiles centered on an even
//!   grid spanning every train and test angle. An optional label coupling
//!   adds `(2y−1)·domain_coupling·[cos ψ, sin ψ]` in training domains, with
//!   `ψ` turning once over the training angle range.

use serde::{Deserialize, Serialize};

use crate::data::{DomainDataset, LabeledPoint};
use crate::error::{DomiError, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_domains: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    pub test_angles: Vec<f64>,
    pub points_per_domain: usize,
    pub test_points_per_domain: usize,
    pub causal_dims: usize,
    pub object_spurious_dims: usize,
    pub domain_feature_dims: usize,
    /// `p_train`: probability that `x̂` agrees with `y` in training.
    pub spurious_alignment: f64,
    pub causal_scale: f64,
    pub spurious_scale: f64,
    pub domain_scale: f64,
    /// Standard deviation of each `x̄` bump, in degrees.
    pub bump_width: f64,
    pub domain_coupling: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_domains: 61,
            angle_min: 15.0,
            angle_max: 75.0,
            test_angles: vec![0.0, 90.0],
            points_per_domain: 200,
            test_points_per_domain: 500,
            causal_dims: 2,
            object_spurious_dims: 2,
            domain_feature_dims: 32,
            spurious_alignment: 0.9,
            causal_scale: 0.25,
            spurious_scale: 1.0,
            domain_scale: 1.0,
            bump_width: 3.0,
            domain_coupling: 0.0,
            noise_std: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DomiError::Config(m));
        if self.n_domains == 0 {
            return bad("n_domains must be positive".into());
        }
        if self.causal_dims == 0 || self.object_spurious_dims == 0 || self.domain_feature_dims == 0
        {
            return bad(
                "causal_dims, object_spurious_dims and domain_feature_dims must be at least 1"
                    .into(),
            );
        }
        if !(0.5..=1.0).contains(&self.spurious_alignment) {
            return bad(format!(
                "spurious_alignment = {} must lie in [0.5, 1]",
                self.spurious_alignment
            ));
        }
        if self.points_per_domain < 2 || self.test_points_per_domain < 2 {
            return bad("points per domain must be at least 2".into());
        }
        let finite = [
            self.angle_min,
            self.angle_max,
            self.causal_scale,
            self.spurious_scale,
            self.domain_scale,
            self.bump_width,
            self.domain_coupling,
            self.noise_std,
        ];
        if finite.iter().any(|v| !v.is_finite()) || self.noise_std < 0.0 || self.bump_width <= 0.0 {
            return bad(
                "scales, angles and noise_std must be finite (noise_std ≥ 0, bump_width > 0)"
                    .into(),
            );
        }
        if self.angle_max < self.angle_min
            || (self.n_domains > 1 && self.angle_max == self.angle_min)
        {
            return bad(format!(
                "invalid angle range [{}, {}] for {} domains",
                self.angle_min, self.angle_max, self.n_domains
            ));
        }
        if self.test_angles.is_empty() || self.test_angles.iter().any(|a| !a.is_finite()) {
            return bad("test_angles must be a nonempty list of finite angles".into());
        }
        let train = self.train_angles();
        for &t in &self.test_angles {
            if train.iter().any(|&a| (a - t).abs() < 1e-9) {
                return bad(format!("test angle {t} coincides with a training angle"));
            }
        }
        Ok(())
    }

    /// Evenly spaced training angles from `angle_min` to `angle_max`.
    pub fn train_angles(&self) -> Vec<f64> {
        if self.n_domains == 1 {
            return vec![self.angle_min];
        }
        let step = (self.angle_max - self.angle_min) / (self.n_domains - 1) as f64;
        (0..self.n_domains)
            .map(|i| self.angle_min + step * i as f64)
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.causal_dims + self.object_spurious_dims + self.domain_feature_dims
    }

    /// Column ranges of the `ẋ`, `x̂` and `x̄` blocks.
    pub fn blocks(&self) -> [std::ops::Range<usize>; 3] {
        let a = self.causal_dims;
        let b = a + self.object_spurious_dims;
        [0..a, a..b, b..b + self.domain_feature_dims]
    }

    /// Noise-free `x̄` block for an angle.
    pub fn domain_code(&self, angle: f64) -> Vec<f64> {
        let d = self.domain_feature_dims;
        let r = angle.to_radians();
        let mut code = Vec::with_capacity(d);
        if d == 1 {
            code.push(r.cos());
        } else {
            code.push(r.cos());
            code.push(r.sin());
            let n_bumps = d - 2;
            let lo = self
                .test_angles
                .iter()
                .copied()
                .fold(self.angle_min, f64::min);
            let hi = self
                .test_angles
                .iter()
                .copied()
                .fold(self.angle_max, f64::max);
            for j in 0..n_bumps {
                let c = if n_bumps > 1 {
                    lo + (hi - lo) * j as f64 / (n_bumps - 1) as f64
                } else {
                    (lo + hi) / 2.0
                };
                let z = (angle - c) / self.bump_width;
                code.push((-0.5 * z * z).exp());
            }
        }
        code.iter().map(|v| v * self.domain_scale).collect()
    }

    fn coupling_direction(&self, angle: f64) -> [f64; 2] {
        let span = (self.angle_max - self.angle_min).max(f64::MIN_POSITIVE);
        let psi = 2.0 * std::f64::consts::PI * (angle - self.angle_min) / span;
        [psi.cos(), psi.sin()]
    }
}

/// Generated train and test sets; training domain `i` has angle
/// `train_angles[i]`, test domains follow with ids `n_domains + j`.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: DomainDataset,
    pub test: DomainDataset,
    pub train_angles: Vec<f64>,
    pub test_angles: Vec<f64>,
}

struct DomainSpec {
    id: u32,
    angle: f64,
    alignment: f64,
    coupling: f64,
    n: usize,
}

fn generate_domain(cfg: &SynthConfig, spec: &DomainSpec, out: &mut Vec<LabeledPoint>) {
    let mut rng = SeededRng::for_stage(cfg.seed, &format!("synth/domain/{}", spec.id));
    let [causal, spurious, domain] = cfg.blocks();
    let r = spec.angle.to_radians();
    let (cos, sin) = (r.cos(), r.sin());
    let code = cfg.domain_code(spec.angle);
    let dir = cfg.coupling_direction(spec.angle);
    for i in 0..spec.n {
        let y = i % 2;
        let sign = if y == 1 { 1.0 } else { -1.0 };
        let mut x = vec![0.0; cfg.dim()];
        let proto = sign * cfg.causal_scale;
        if causal.len() >= 2 {
            x[causal.start] = proto * cos;
            x[causal.start + 1] = proto * sin;
        } else {
            x[causal.start] = proto;
        }
        let agree = rng.bernoulli(spec.alignment);
        let s = if agree { sign } else { -sign } * cfg.spurious_scale;
        for v in &mut x[spurious.clone()] {
            *v = s;
        }
        x[domain.clone()].copy_from_slice(&code);
        if spec.coupling != 0.0 {
            let end = domain.end.min(domain.start + 2);
            for (k, j) in (domain.start..end).enumerate() {
                x[j] += sign * spec.coupling * dir[k];
            }
        }
        if cfg.noise_std > 0.0 {
            for v in &mut x {
                *v += cfg.noise_std * rng.normal();
            }
        }
        out.push(LabeledPoint {
            x,
            y,
            domain: spec.id,
        });
    }
}

/// Generate label-balanced training and test domains.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let train_angles = cfg.train_angles();
    let mut train = Vec::with_capacity(cfg.n_domains * cfg.points_per_domain);
    for (i, &angle) in train_angles.iter().enumerate() {
        let spec = DomainSpec {
            id: i as u32,
            angle,
            alignment: cfg.spurious_alignment,
            coupling: cfg.domain_coupling,
            n: cfg.points_per_domain,
        };
        generate_domain(cfg, &spec, &mut train);
    }
    let mut test = Vec::with_capacity(cfg.test_angles.len() * cfg.test_points_per_domain);
    for (j, &angle) in cfg.test_angles.iter().enumerate() {
        let spec = DomainSpec {
            id: (cfg.n_domains + j) as u32,
            angle,
            alignment: 0.5,
            coupling: 0.0,
            n: cfg.test_points_per_domain,
        };
        generate_domain(cfg, &spec, &mut test);
    }
    Ok(SynthData {
        train: DomainDataset::new(train)?,
        test: DomainDataset::new(test)?,
        train_angles,
        test_angles: cfg.test_angles.clone(),
    })
}

/// Fraction of points whose `x̂` block sign agrees with the label.
pub fn spurious_agreement(cfg: &SynthConfig, data: &DomainDataset) -> f64 {
    let col = cfg.blocks()[1].clone();
    let agree = data
        .points()
        .iter()
        .filter(|p| {
            let s: f64 = p.x[col.clone()].iter().sum();
            (s > 0.0) == (p.y == 1)
        })
        .count();
    agree as f64 / data.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            points_per_domain: 40,
            test_points_per_domain: 40,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn shapes_and_balance() {
        let cfg = small();
        let d = generate(&cfg).unwrap();
        assert_eq!(d.train.n_domains(), 61);
        assert_eq!(d.test.n_domains(), 2);
        assert_eq!(d.train.dim(), cfg.dim());
        assert_eq!(d.train_angles.first(), Some(&15.0));
        assert_eq!(d.train_angles.last(), Some(&75.0));
        for dom in d.train.domain_ids() {
            let idx = d.train.domain_points(dom).unwrap();
            let ones = idx.iter().filter(|&&i| d.train.points()[i].y == 1).count();
            assert_eq!(ones * 2, idx.len());
        }
    }

    #[test]
    fn rotation_identity() {
        let cfg = SynthConfig {
            noise_std: 0.0,
            causal_scale: 1.0,
            test_angles: vec![90.0],
            angle_min: 10.0,
            angle_max: 20.0,
            n_domains: 3,
            ..small()
        };
        let d = generate(&cfg).unwrap();
        let p = d.test.points().iter().find(|p| p.y == 1).unwrap();
        assert!(p.x[0].abs() < 1e-15);
        assert_eq!(p.x[1], 1.0);
    }

    #[test]
    fn noiseless_blocks_match_within_class_and_domain() {
        let cfg = SynthConfig {
            noise_std: 0.0,
            ..small()
        };
        let d = generate(&cfg).unwrap();
        let pts: Vec<_> = d
            .train
            .points()
            .iter()
            .filter(|p| p.domain == 7 && p.y == 0)
            .collect();
        let [c, _, x] = cfg.blocks();
        for p in &pts[1..] {
            assert_eq!(p.x[c.clone()], pts[0].x[c.clone()]);
            assert_eq!(p.x[x.clone()], pts[0].x[x.clone()]);
        }
    }

    #[test]
    fn alignment_marginals() {
        let cfg = SynthConfig {
            spurious_alignment: 0.8,
            points_per_domain: 200,
            test_points_per_domain: 2000,
            noise_std: 0.0,
            ..SynthConfig::default()
        };
        let d = generate(&cfg).unwrap();
        let n = d.train.len() as f64;
        let sigma = (0.8 * 0.2 / n).sqrt();
        assert!((spurious_agreement(&cfg, &d.train) - 0.8).abs() < 3.0 * sigma);
        let m = d.test.len() as f64;
        assert!((spurious_agreement(&cfg, &d.test) - 0.5).abs() < 3.0 * (0.25 / m).sqrt());
    }

    #[test]
    fn invalid_configs() {
        let overlap = SynthConfig {
            test_angles: vec![15.0],
            ..small()
        };
        assert!(generate(&overlap).is_err());
        let reversed = SynthConfig {
            angle_min: 80.0,
            ..small()
        };
        assert!(generate(&reversed).is_err());
        let p = SynthConfig {
            spurious_alignment: 0.4,
            ..small()
        };
        assert!(generate(&p).is_err());
        let dims = SynthConfig {
            object_spurious_dims: 0,
            ..small()
        };
        assert!(generate(&dims).is_err());
    }
}
