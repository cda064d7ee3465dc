//! End-to-end generalized Laplace and Gaussian releases.
//!
//! Noise is always drawn around the origin from a chain that never sees
//! the data and is then added to the histogram, so two histograms released
//! with the same seed receive identical noise.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::constraints::{Budget, ConstraintSet, Histogram};
use crate::coupling::TvBoundCurve;
use crate::error::{Error, Result};
use crate::intlinalg::{lattice_basis, smith_normal_form, LatticeBasis, SmithDecomposition};
use crate::noise::{default_c_a, gaussian_sigma_with_constant, tail_constant_k, NoiseKind, NoiseTarget};
use crate::sampler::{
    default_burn_in, default_ratio, run_chain, ChainConfig, LatticeContext, ProposalSpec, DEFAULT_THIN,
};

/// Everything derived from a constraint set; compile once, release many times.
#[derive(Clone, Debug)]
pub struct MechanismContext {
    pub constraints: ConstraintSet,
    pub kept_rows: Vec<usize>,
    pub snf: SmithDecomposition,
    /// `None` when the constraints pin every coordinate.
    pub basis: Option<LatticeBasis>,
    pub lattice: LatticeContext,
    /// Tail constant `K`; `None` for a degenerate lattice.
    pub tail_constant: Option<f64>,
}

impl MechanismContext {
    pub fn lattice_dim(&self) -> usize {
        self.lattice.lattice_dim()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lattice.is_degenerate()
    }

    pub fn gram_det(&self) -> Option<&BigInt> {
        self.basis.as_ref().map(|b| &b.gram_det)
    }
}

pub fn compile(cs: &ConstraintSet) -> Result<MechanismContext> {
    let kept_rows = cs.independent_rows();
    let a = cs.incidence_matrix().select_rows(&kept_rows);
    let snf = smith_normal_form(&a)?;
    let basis = match lattice_basis(&snf) {
        Ok(b) => Some(b),
        Err(Error::EmptyLattice) => None,
        Err(e) => return Err(e),
    };
    let lattice = LatticeContext::from_decomposition(&snf)?;
    let tail_constant = basis.as_ref().map(tail_constant_k);
    Ok(MechanismContext {
        constraints: cs.clone(),
        kept_rows,
        snf,
        basis,
        lattice,
        tail_constant,
    })
}

/// Target family, budget and sampler settings for a release.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub kind: NoiseKind,
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    pub chain: ChainConfig,
    /// Double geometric ratio `a` shared by all free coordinates.
    pub proposal_ratio: f64,
    /// Overrides the default Gaussian calibration constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_a: Option<f64>,
}

impl MechanismSpec {
    /// Defaults: `a = e^{-1}`, burn-in by family, thinning 10^4, one draw.
    pub fn new(kind: NoiseKind, epsilon: f64, delta: f64, seed: u64) -> Self {
        Self {
            kind,
            epsilon,
            delta,
            chain: ChainConfig::for_draws(default_burn_in(kind), DEFAULT_THIN, 1, seed),
            proposal_ratio: default_ratio(),
            c_a: None,
        }
    }

    pub fn laplace_l1(epsilon: f64, seed: u64) -> Self {
        Self::new(NoiseKind::LaplaceL1, epsilon, 0.0, seed)
    }

    pub fn laplace_l2(epsilon: f64, seed: u64) -> Self {
        Self::new(NoiseKind::LaplaceL2, epsilon, 0.0, seed)
    }

    pub fn gaussian(epsilon: f64, delta: f64, seed: u64) -> Self {
        Self::new(NoiseKind::Gaussian, epsilon, delta, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        match self.kind {
            NoiseKind::Gaussian => {
                let e = std::f64::consts::E;
                if !(0.0 < self.delta && self.delta < self.epsilon && self.epsilon < 1.0 / e) {
                    return Err(Error::ParameterDomain(format!(
                        "Gaussian mechanism needs 0 < delta < epsilon < 1/e, got ({}, {})",
                        self.epsilon, self.delta
                    )));
                }
            }
            NoiseKind::LaplaceL1 | NoiseKind::LaplaceL2 => {
                if self.delta != 0.0 {
                    return Err(Error::ParameterDomain("Laplace mechanisms take delta = 0".into()));
                }
            }
        }
        self.chain.validate()
    }

    pub fn budget(&self) -> Budget {
        Budget {
            epsilon: self.epsilon,
            delta: self.delta,
        }
    }
}

/// Concrete Gaussian scale and the calibration constant behind it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianCalibration {
    pub sigma: f64,
    pub c_a: f64,
}

/// Target density for `spec` on `ctx`, plus the Gaussian calibration if any.
pub fn build_target(
    ctx: &MechanismContext,
    spec: &MechanismSpec,
) -> Result<(NoiseTarget, Option<GaussianCalibration>)> {
    spec.validate()?;
    match spec.kind {
        NoiseKind::LaplaceL1 => Ok((NoiseTarget::laplace_l1(spec.epsilon)?, None)),
        NoiseKind::LaplaceL2 => Ok((NoiseTarget::laplace_l2(spec.epsilon)?, None)),
        NoiseKind::Gaussian => {
            let k = ctx.tail_constant.unwrap_or(1.0);
            let c_a = spec.c_a.unwrap_or_else(|| default_c_a(ctx.lattice_dim(), k));
            let sigma = gaussian_sigma_with_constant(spec.epsilon, spec.delta, c_a)?;
            Ok((NoiseTarget::gaussian(sigma)?, Some(GaussianCalibration { sigma, c_a })))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReleaseDiagnostics {
    pub seed: u64,
    pub nsim: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub proposal_ratio: f64,
    pub lattice_dim: usize,
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianCalibration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_curve: Option<TvBoundCurve>,
}

/// A privatized histogram `x + z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Release {
    pub output: Vec<i64>,
    pub noise: Vec<i64>,
    pub budget_spent: Budget,
    pub diagnostics: ReleaseDiagnostics,
}

fn proposal(ctx: &MechanismContext, spec: &MechanismSpec) -> Result<ProposalSpec> {
    ProposalSpec::uniform(spec.proposal_ratio, ctx.lattice_dim())
}

/// Thinned post-burn-in noise draws, one per retained step of `spec.chain`
/// extended to `count` draws.
pub fn noise_replicates(ctx: &MechanismContext, spec: &MechanismSpec, count: usize) -> Result<Vec<Vec<i64>>> {
    if count == 0 {
        return Err(Error::ConfigInvalid("replicate count must be at least 1".into()));
    }
    let (target, _) = build_target(ctx, spec)?;
    let cfg = ChainConfig {
        nsim: spec.chain.burn_in + spec.chain.thin * count as u64,
        ..spec.chain.clone()
    };
    let draws = run_chain(&cfg, &target, &proposal(ctx, spec)?, &ctx.lattice)?;
    debug_assert_eq!(draws.len(), count);
    Ok(draws)
}

/// Releases `x + z` with `z` the final retained draw of the configured chain.
pub fn privatize(ctx: &MechanismContext, x: &Histogram, spec: &MechanismSpec) -> Result<Release> {
    let d = ctx.constraints.dimension();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    let (target, gaussian) = build_target(ctx, spec)?;
    let noise = run_chain(&spec.chain, &target, &proposal(ctx, spec)?, &ctx.lattice)?
        .pop()
        .expect("validated config retains at least one draw");
    let output: Vec<i64> = x.values().iter().zip(&noise).map(|(a, b)| a + b).collect();
    if !ctx.constraints.equivalent(x, &output)? {
        return Err(Error::InvariantViolated);
    }
    Ok(Release {
        output,
        noise,
        budget_spent: spec.budget(),
        diagnostics: ReleaseDiagnostics {
            seed: spec.chain.seed,
            nsim: spec.chain.nsim,
            burn_in: spec.chain.burn_in,
            thin: spec.chain.thin,
            proposal_ratio: spec.proposal_ratio,
            lattice_dim: ctx.lattice_dim(),
            degenerate: ctx.is_degenerate(),
            gaussian,
            tv_curve: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(mut spec: MechanismSpec) -> MechanismSpec {
        spec.chain = ChainConfig::for_draws(2_000, 100, 1, spec.chain.seed);
        spec
    }

    #[test]
    fn compile_dimensions() {
        assert_eq!(compile(&ConstraintSet::total(4).unwrap()).unwrap().lattice_dim(), 3);
        assert_eq!(
            compile(&ConstraintSet::table_margins(4, 4).unwrap())
                .unwrap()
                .lattice_dim(),
            9
        );
        let states = compile(&ConstraintSet::partition(&[3, 5, 2]).unwrap()).unwrap();
        assert_eq!(states.lattice_dim(), 10 - 3);
    }

    #[test]
    fn fully_constrained_release_is_exact() {
        let cs = ConstraintSet::from_subsets(3, vec![vec![0], vec![1], vec![2], vec![0, 1]]).unwrap();
        let ctx = compile(&cs).unwrap();
        assert!(ctx.is_degenerate());
        assert!(ctx.tail_constant.is_none());
        let x = Histogram::new(vec![4, 0, 9]).unwrap();
        let r = privatize(&ctx, &x, &quick(MechanismSpec::laplace_l1(0.25, 1))).unwrap();
        assert_eq!(r.output, vec![4, 0, 9]);
        assert!(r.diagnostics.degenerate);
    }

    #[test]
    fn release_preserves_margins() {
        let ctx = compile(&ConstraintSet::table_margins(4, 4).unwrap()).unwrap();
        let x = Histogram::new(vec![15, 1, 3, 1, 20, 10, 10, 15, 3, 10, 10, 2, 12, 14, 7, 2]).unwrap();
        for seed in 0..5 {
            let r = privatize(&ctx, &x, &quick(MechanismSpec::laplace_l1(0.25, seed))).unwrap();
            assert!(ctx.constraints.equivalent(&x, &r.output).unwrap());
            assert!(ctx.lattice.preserves_invariants(&r.noise));
            assert_eq!(r.budget_spent, Budget::pure(0.25).unwrap());
        }
    }

    #[test]
    fn spec_validation() {
        assert!(MechanismSpec::laplace_l1(0.0, 0).validate().is_err());
        assert!(MechanismSpec::gaussian(0.5, 0.6, 0).validate().is_err());
        assert!(MechanismSpec::gaussian(0.4, 1e-6, 0).validate().is_err());
        assert!(MechanismSpec::gaussian(0.25, 1e-6, 0).validate().is_ok());
        let mut l = MechanismSpec::laplace_l2(1.0, 0);
        l.delta = 0.1;
        assert!(l.validate().is_err());
    }

    #[test]
    fn gaussian_reports_calibration() {
        let ctx = compile(&ConstraintSet::total(2).unwrap()).unwrap();
        let r = privatize(
            &ctx,
            &Histogram::new(vec![5, 5]).unwrap(),
            &quick(MechanismSpec::gaussian(0.25, 1e-6, 3)),
        )
        .unwrap();
        let g = r.diagnostics.gaussian.unwrap();
        let k = ctx.tail_constant.unwrap();
        assert_eq!(g.c_a, default_c_a(1, k));
        assert!(g.sigma > 0.0);
        assert_eq!(r.budget_spent, Budget::new(0.25, 1e-6).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let ctx = compile(&ConstraintSet::total(3).unwrap()).unwrap();
        let x = Histogram::new(vec![1, 2]).unwrap();
        assert!(privatize(&ctx, &x, &quick(MechanismSpec::laplace_l1(1.0, 0))).is_err());
        assert!(noise_replicates(&ctx, &MechanismSpec::laplace_l1(1.0, 0), 0).is_err());
    }
}
