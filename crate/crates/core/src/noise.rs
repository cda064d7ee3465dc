//! Target densities on the lattice, the double geometric proposal and the
//! calibration constants for the Gaussian variant.

use std::f64::consts::{E, PI};

use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intlinalg::LatticeBasis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    LaplaceL1,
    LaplaceL2,
    Gaussian,
}

/// Unnormalized log-density for additive lattice noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseTarget {
    /// `exp(-epsilon * |z|_1)`
    LaplaceL1 { epsilon: f64 },
    /// `exp(-epsilon * |z|_2)`
    LaplaceL2 { epsilon: f64 },
    /// `exp(-|z - center|_2^2 / (2 sigma^2))`; an empty center means zero.
    Gaussian { sigma: f64, center: Vec<i64> },
}

impl NoiseTarget {
    pub fn laplace_l1(epsilon: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        Ok(Self::LaplaceL1 { epsilon })
    }

    pub fn laplace_l2(epsilon: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        Ok(Self::LaplaceL2 { epsilon })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::gaussian_centered(sigma, Vec::new())
    }

    pub fn gaussian_centered(sigma: f64, center: Vec<i64>) -> Result<Self> {
        check_positive("sigma", sigma)?;
        Ok(Self::Gaussian { sigma, center })
    }

    pub fn kind(&self) -> NoiseKind {
        match self {
            Self::LaplaceL1 { .. } => NoiseKind::LaplaceL1,
            Self::LaplaceL2 { .. } => NoiseKind::LaplaceL2,
            Self::Gaussian { .. } => NoiseKind::Gaussian,
        }
    }

    /// Log-density up to an additive constant. Norms are accumulated in
    /// 128-bit integers; the only float conversion is the final scalar.
    pub fn log_target(&self, z: &[i64]) -> f64 {
        match self {
            Self::LaplaceL1 { epsilon } => {
                let l1: i128 = z.iter().map(|&x| (x as i128).abs()).sum();
                -epsilon * l1 as f64
            }
            Self::LaplaceL2 { epsilon } => -epsilon * (sq_norm(z) as f64).sqrt(),
            Self::Gaussian { sigma, center } => {
                let sq = if center.is_empty() {
                    sq_norm(z)
                } else {
                    debug_assert_eq!(center.len(), z.len());
                    z.iter()
                        .zip(center)
                        .map(|(&x, &c)| {
                            let t = x as i128 - c as i128;
                            t * t
                        })
                        .sum()
                };
                -(sq as f64) / (2.0 * sigma * sigma)
            }
        }
    }
}

fn sq_norm(z: &[i64]) -> i128 {
    z.iter().map(|&x| (x as i128) * (x as i128)).sum()
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

/// Integer distribution with mass `(1-a)/(1+a) * a^|e|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleGeometric {
    a: f64,
}

impl DoubleGeometric {
    pub fn new(a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::ParameterDomain(format!("ratio a must lie in [0, 1), got {a}")));
        }
        Ok(Self { a })
    }

    /// `a = exp(-scale)`.
    pub fn from_scale(scale: f64) -> Result<Self> {
        check_positive("scale", scale)?;
        Self::new((-scale).exp())
    }

    pub fn ratio(&self) -> f64 {
        self.a
    }

    pub fn pmf(&self, e: i64) -> f64 {
        if self.a == 0.0 {
            return if e == 0 { 1.0 } else { 0.0 };
        }
        (1.0 - self.a) / (1.0 + self.a) * self.a.powf(e.unsigned_abs() as f64)
    }

    pub fn ln_pmf(&self, e: i64) -> f64 {
        if self.a == 0.0 {
            return if e == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        ((1.0 - self.a) / (1.0 + self.a)).ln() + e.unsigned_abs() as f64 * self.a.ln()
    }

    /// Inverse-CDF draw of `|e|` followed by a fair sign.
    ///
    /// With `S(n) = P(|e| >= n) = 2 a^n / (1 + a)` for `n >= 1`, the
    /// magnitude is the largest `n` with `U < S(n)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        if self.a == 0.0 {
            return 0;
        }
        // U in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        let scaled = u * (1.0 + self.a) / 2.0;
        if scaled >= self.a {
            return 0;
        }
        let x = scaled.ln() / self.a.ln();
        let magnitude = (x.ceil() as i64 - 1).max(1);
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }
}

/// Volume of the unit Euclidean ball in `m` dimensions.
pub fn unit_ball_volume(m: usize) -> f64 {
    // V_m = 2 pi / m * V_{m-2}
    let (mut v, start) = if m % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
    let mut l = start;
    while l <= m {
        v *= 2.0 * PI / l as f64;
        l += 2;
    }
    v
}

/// Tail constant `4 * 2^m * V_m / sqrt(gram_det)`.
pub fn tail_constant(lattice_dim: usize, gram_det: f64) -> f64 {
    4.0 * 2f64.powi(lattice_dim as i32) * unit_ball_volume(lattice_dim) / gram_det.sqrt()
}

pub fn tail_constant_k(basis: &LatticeBasis) -> f64 {
    let gram = basis.gram_det.to_f64().unwrap_or(f64::INFINITY);
    tail_constant(basis.lattice_dim, gram)
}

/// Explicit choice for the Gaussian calibration constant:
/// `3 * max(m ln max(m, 2), ln max(K, e), 1)`.
pub fn default_c_a(lattice_dim: usize, k: f64) -> f64 {
    let m = lattice_dim as f64;
    let dim_term = m * m.max(2.0).ln();
    let k_term = k.max(E).ln();
    3.0 * dim_term.max(k_term).max(1.0)
}

/// Gaussian scale for `(epsilon, delta)` with the default calibration constant.
pub fn gaussian_sigma(epsilon: f64, delta: f64, lattice_dim: usize, k: f64) -> Result<f64> {
    gaussian_sigma_with_constant(epsilon, delta, default_c_a(lattice_dim, k))
}

/// `sigma = sqrt(2 c_A ln(1/delta)) / epsilon`, requiring `0 < delta < epsilon < 1/e`.
pub fn gaussian_sigma_with_constant(epsilon: f64, delta: f64, c_a: f64) -> Result<f64> {
    if !(0.0 < delta && delta < epsilon && epsilon < 1.0 / E) {
        return Err(Error::ParameterDomain(format!(
            "Gaussian calibration needs 0 < delta < epsilon < 1/e, got epsilon = {epsilon}, delta = {delta}"
        )));
    }
    check_positive("c_A", c_a)?;
    Ok((2.0 * c_a * (1.0 / delta).ln()).sqrt() / epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn log_target_examples() {
        let t = NoiseTarget::laplace_l1(0.25).unwrap();
        assert_eq!(t.log_target(&[0, 0, 0]), 0.0);
        assert!((t.log_target(&[1, -1, 0]) + 0.5).abs() < 1e-15);
        let g = NoiseTarget::gaussian(2.0).unwrap();
        assert!((g.log_target(&[2, 0]) + 0.5).abs() < 1e-15);
        let l2 = NoiseTarget::laplace_l2(0.5).unwrap();
        assert!((l2.log_target(&[3, 4]) + 2.5).abs() < 1e-15);
        let shifted = NoiseTarget::gaussian_centered(1.0, vec![1, 1]).unwrap();
        assert_eq!(shifted.log_target(&[1, 1]), 0.0);
    }

    #[test]
    fn invalid_scales() {
        assert!(NoiseTarget::laplace_l1(0.0).is_err());
        assert!(NoiseTarget::gaussian(-1.0).is_err());
        assert!(DoubleGeometric::new(1.0).is_err());
        assert!(DoubleGeometric::new(-0.1).is_err());
    }

    #[test]
    fn degenerate_ratio_always_zero() {
        let dg = DoubleGeometric::new(0.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| dg.sample(&mut rng) == 0));
        assert_eq!(dg.pmf(0), 1.0);
        assert_eq!(dg.ln_pmf(3), f64::NEG_INFINITY);
    }

    #[test]
    fn atom_at_zero() {
        let dg = DoubleGeometric::from_scale(1.0).unwrap();
        assert!((dg.pmf(0) - 0.462_117_157_260_009_8).abs() < 1e-12);
        assert!((dg.ln_pmf(-4).exp() - dg.pmf(4)).abs() < 1e-15);
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(unit_ball_volume(0), 1.0);
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        // pi^(9/2) / Gamma(11/2)
        assert!((unit_ball_volume(9) - 3.298_508_902_738_706_6).abs() < 1e-12);
    }

    #[test]
    fn tail_constant_pair_lattice() {
        assert!((tail_constant(1, 2.0) - 16.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sigma_domain_and_monotonicity() {
        assert!(gaussian_sigma(0.5, 0.6, 1, 11.3).is_err());
        assert!(gaussian_sigma(0.4, 0.1, 1, 11.3).is_err());
        let a = gaussian_sigma(0.25, 1e-6, 1, 11.3).unwrap();
        let b = gaussian_sigma(0.25, 1e-9, 1, 11.3).unwrap();
        assert!(b > a);
    }
}
