//! Gibbs-within-Metropolis sampling on the constraint lattice.
//!
//! The chain lives in reduced coordinates `v` with `z = V v`. The first `k`
//! coordinates of `v` stay at zero, so every state and every proposed jump
//! `u = V e` satisfies `A z = 0` exactly. A sweep draws a pre-jump
//! coordinate for each free direction, then a single uniform decides
//! acceptance of the composite move.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::intlinalg::{smith_normal_form, SmithDecomposition};
use crate::noise::{DoubleGeometric, NoiseKind, NoiseTarget};

/// Immutable data a chain needs: the cofactor `V`, its inverse and the
/// reduced incidence matrix, in machine integers.
#[derive(Clone, Debug)]
pub struct LatticeContext {
    dim: usize,
    rank: usize,
    /// Columns `k..d` of `V`, stored sparsely.
    jumps: Vec<Vec<(usize, i64)>>,
    v: Vec<Vec<i64>>,
    v_inv: Vec<Vec<i64>>,
    incidence: Vec<Vec<i64>>,
}

impl LatticeContext {
    pub fn from_decomposition(snf: &SmithDecomposition) -> Result<Self> {
        let v = snf.v.to_i64_rows()?;
        let v_inv = snf.v_inv.to_i64_rows()?;
        let incidence = snf.input.to_i64_rows()?;
        let dim = snf.v.cols();
        let rank = snf.rank;
        let jumps = (rank..dim)
            .map(|j| (0..dim).filter(|&i| v[i][j] != 0).map(|i| (i, v[i][j])).collect())
            .collect();
        Ok(Self {
            dim,
            rank,
            jumps,
            v,
            v_inv,
            incidence,
        })
    }

    /// Reduces the constraints to full rank and decomposes them.
    pub fn from_constraints(cs: &ConstraintSet) -> Result<Self> {
        let (a, _) = cs.full_rank_reduce();
        Self::from_decomposition(&smith_normal_form(&a)?)
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of independent constraints `k`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `m = d - k`.
    pub fn lattice_dim(&self) -> usize {
        self.dim - self.rank
    }

    pub fn is_degenerate(&self) -> bool {
        self.rank == self.dim
    }

    /// `z = V v`.
    pub fn to_lattice(&self, v: &[i64]) -> Vec<i64> {
        mat_vec(&self.v, v)
    }

    /// `v = V^{-1} z`.
    pub fn to_reduced(&self, z: &[i64]) -> Vec<i64> {
        mat_vec(&self.v_inv, z)
    }

    /// True iff `A z = 0`.
    pub fn preserves_invariants(&self, z: &[i64]) -> bool {
        self.incidence
            .iter()
            .all(|row| row.iter().zip(z).map(|(&a, &x)| a as i128 * x as i128).sum::<i128>() == 0)
    }

    pub fn incidence(&self) -> &[Vec<i64>] {
        &self.incidence
    }
}

fn mat_vec(m: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
        .collect()
}

/// Independent symmetric pre-jump laws for the `m` free coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalSpec {
    pub etas: Vec<DoubleGeometric>,
}

impl ProposalSpec {
    pub fn uniform(ratio: f64, lattice_dim: usize) -> Result<Self> {
        Ok(Self {
            etas: vec![DoubleGeometric::new(ratio)?; lattice_dim],
        })
    }

    fn check(&self, ctx: &LatticeContext) -> Result<()> {
        if self.etas.len() != ctx.lattice_dim() {
            return Err(Error::DimensionMismatch {
                expected: ctx.lattice_dim(),
                found: self.etas.len(),
            });
        }
        Ok(())
    }
}

/// Draws a lattice jump `u = V e` with `e_1 .. e_k = 0`.
pub fn propose_jump<R: Rng + ?Sized>(ps: &ProposalSpec, ctx: &LatticeContext, rng: &mut R) -> Vec<i64> {
    let mut u = vec![0; ctx.dim];
    for (eta, col) in ps.etas.iter().zip(&ctx.jumps) {
        let e = eta.sample(rng);
        if e != 0 {
            for &(i, c) in col {
                u[i] += e * c;
            }
        }
    }
    u
}

/// Initial distribution of a chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// One draw of the jump distribution from the origin.
    #[default]
    FromProposal,
    Zero,
    /// Reduced coordinates; the first `k` entries must be zero.
    Reduced(Vec<i64>),
    /// A lattice point `z` with `A z = 0`.
    Lattice(Vec<i64>),
}

/// Current lattice point in both coordinate systems plus its cached log-density.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub v: Vec<i64>,
    pub z: Vec<i64>,
    pub log_density: f64,
    pub step_index: u64,
}

impl ChainState {
    pub fn new(ctx: &LatticeContext, target: &NoiseTarget, v: Vec<i64>) -> Result<Self> {
        if v.len() != ctx.dim {
            return Err(Error::DimensionMismatch {
                expected: ctx.dim,
                found: v.len(),
            });
        }
        if v[..ctx.rank].iter().any(|&x| x != 0) {
            return Err(Error::ConfigInvalid(
                "reduced coordinates must vanish on the constrained directions".into(),
            ));
        }
        let z = ctx.to_lattice(&v);
        let log_density = target.log_target(&z);
        Ok(Self {
            v,
            z,
            log_density,
            step_index: 0,
        })
    }

    pub fn initial<R: Rng + ?Sized>(
        ctx: &LatticeContext,
        target: &NoiseTarget,
        ps: &ProposalSpec,
        init: &Init,
        rng: &mut R,
    ) -> Result<Self> {
        let v = match init {
            Init::Zero => vec![0; ctx.dim],
            Init::FromProposal => {
                let mut v = vec![0; ctx.dim];
                for (j, eta) in ps.etas.iter().enumerate() {
                    v[ctx.rank + j] = eta.sample(rng);
                }
                v
            }
            Init::Reduced(v) => v.clone(),
            Init::Lattice(z) => {
                if z.len() != ctx.dim {
                    return Err(Error::DimensionMismatch {
                        expected: ctx.dim,
                        found: z.len(),
                    });
                }
                if !ctx.preserves_invariants(z) {
                    return Err(Error::ConfigInvalid("initial point violates the invariants".into()));
                }
                ctx.to_reduced(z)
            }
        };
        Self::new(ctx, target, v)
    }

    /// Same lattice point (the step counters may differ).
    pub fn same_point(&self, other: &ChainState) -> bool {
        self.v == other.v
    }
}

/// Scratch space for a proposed move.
#[derive(Clone, Debug, Default)]
pub(crate) struct Proposal {
    pub(crate) v: Vec<i64>,
    pub(crate) z: Vec<i64>,
}

impl Proposal {
    pub(crate) fn reset_to(&mut self, state: &ChainState) {
        self.v.clone_from(&state.v);
        self.z.clone_from(&state.z);
    }

    /// Moves free coordinate `j` (0-based among the free ones) by `e`.
    pub(crate) fn shift(&mut self, ctx: &LatticeContext, j: usize, e: i64) {
        if e == 0 {
            return;
        }
        self.v[ctx.rank + j] += e;
        for &(i, c) in &ctx.jumps[j] {
            self.z[i] += e * c;
        }
    }
}

/// Accepts `proposal` into `state` iff `ln r <= target(proposal) - target(state)`.
pub(crate) fn accept_or_stay(state: &mut ChainState, proposal: &mut Proposal, target: &NoiseTarget, ln_r: f64) -> bool {
    let proposed = target.log_target(&proposal.z);
    state.step_index += 1;
    if ln_r <= proposed - state.log_density {
        std::mem::swap(&mut state.v, &mut proposal.v);
        std::mem::swap(&mut state.z, &mut proposal.z);
        state.log_density = proposed;
        true
    } else {
        false
    }
}

/// `ln U` for `U` uniform on `(0, 1]`.
pub(crate) fn ln_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (1.0 - rng.random::<f64>()).ln()
}

/// One Gibbs sweep followed by a Metropolis accept/reject. Returns whether
/// the move was accepted.
pub fn metropolis_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &NoiseTarget,
    ps: &ProposalSpec,
    ctx: &LatticeContext,
    rng: &mut R,
) -> bool {
    let mut proposal = Proposal::default();
    step_with(state, &mut proposal, target, ps, ctx, rng)
}

pub(crate) fn step_with<R: Rng + ?Sized>(
    state: &mut ChainState,
    proposal: &mut Proposal,
    target: &NoiseTarget,
    ps: &ProposalSpec,
    ctx: &LatticeContext,
    rng: &mut R,
) -> bool {
    proposal.reset_to(state);
    for (j, eta) in ps.etas.iter().enumerate() {
        let e = eta.sample(rng);
        proposal.shift(ctx, j, e);
    }
    let accepted = accept_or_stay(state, proposal, target, ln_uniform(rng));
    debug_assert!(
        state.step_index % 1000 != 0 || state.log_density == target.log_target(&state.z),
        "cached log-density drifted"
    );
    accepted
}

/// A single chain that owns its generator.
pub struct Chain<'a> {
    ctx: &'a LatticeContext,
    target: &'a NoiseTarget,
    proposal_spec: &'a ProposalSpec,
    rng: ChaCha20Rng,
    state: ChainState,
    scratch: Proposal,
    accepted: u64,
}

impl<'a> Chain<'a> {
    pub fn new(
        ctx: &'a LatticeContext,
        target: &'a NoiseTarget,
        proposal_spec: &'a ProposalSpec,
        init: &Init,
        mut rng: ChaCha20Rng,
    ) -> Result<Self> {
        proposal_spec.check(ctx)?;
        let state = ChainState::initial(ctx, target, proposal_spec, init, &mut rng)?;
        Ok(Self {
            ctx,
            target,
            proposal_spec,
            rng,
            state,
            scratch: Proposal::default(),
            accepted: 0,
        })
    }

    pub fn step(&mut self) -> bool {
        let accepted = step_with(
            &mut self.state,
            &mut self.scratch,
            self.target,
            self.proposal_spec,
            self.ctx,
            &mut self.rng,
        );
        self.accepted += accepted as u64;
        accepted
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn z(&self) -> &[i64] {
        &self.state.z
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.state.step_index == 0 {
            0.0
        } else {
            self.accepted as f64 / self.state.step_index as f64
        }
    }
}

/// Default burn-in for a target family at moderate privacy levels.
pub fn default_burn_in(kind: NoiseKind) -> u64 {
    match kind {
        NoiseKind::LaplaceL1 => 100_000,
        NoiseKind::LaplaceL2 | NoiseKind::Gaussian => 1_000_000,
    }
}

pub const DEFAULT_THIN: u64 = 10_000;

/// Default pre-jump ratio `a = e^{-1}`.
pub fn default_ratio() -> f64 {
    (-1.0f64).exp()
}

/// Run length, burn-in, thinning, seed and initial distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub nsim: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    #[serde(default)]
    pub init: Init,
}

impl ChainConfig {
    /// Enough iterations for `count` retained draws after burn-in.
    pub fn for_draws(burn_in: u64, thin: u64, count: u64, seed: u64) -> Self {
        Self {
            nsim: burn_in + thin * count,
            burn_in,
            thin,
            seed,
            init: Init::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::ConfigInvalid("thin must be at least 1".into()));
        }
        if self.burn_in.checked_add(self.thin).is_none_or(|n| n > self.nsim) {
            return Err(Error::ConfigInvalid(format!(
                "nsim = {} leaves no retained draw after burn_in = {} with thin = {}",
                self.nsim, self.burn_in, self.thin
            )));
        }
        Ok(())
    }

    /// Number of draws [`run_chain`] returns.
    pub fn retained(&self) -> u64 {
        (self.nsim - self.burn_in) / self.thin
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.seed)
    }
}

/// Generator for replicate `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs a chain and calls `visit` with every state from step 1 to `nsim`.
pub fn run_chain_with<F>(
    cfg: &ChainConfig,
    target: &NoiseTarget,
    ps: &ProposalSpec,
    ctx: &LatticeContext,
    rng: ChaCha20Rng,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&ChainState),
{
    let mut chain = Chain::new(ctx, target, ps, &cfg.init, rng)?;
    for _ in 0..cfg.nsim {
        chain.step();
        visit(chain.state());
    }
    Ok(())
}

/// Post-burn-in, thinned lattice points `z`; reproducible from `cfg.seed`.
/// The draws are at steps `burn_in + thin`, `burn_in + 2 thin`, ...
pub fn run_chain(
    cfg: &ChainConfig,
    target: &NoiseTarget,
    ps: &ProposalSpec,
    ctx: &LatticeContext,
) -> Result<Vec<Vec<i64>>> {
    cfg.validate()?;
    if ctx.is_degenerate() {
        return Ok(vec![vec![0; ctx.dim()]; cfg.retained() as usize]);
    }
    let mut out = Vec::with_capacity(cfg.retained() as usize);
    run_chain_with(cfg, target, ps, ctx, cfg.rng(), |state| {
        let l = state.step_index;
        if l > cfg.burn_in && (l - cfg.burn_in) % cfg.thin == 0 {
            debug_assert!(ctx.preserves_invariants(&state.z));
            out.push(state.z.clone());
        }
    })?;
    Ok(out)
}

/// `chains` independent runs in parallel; chain `c` uses stream `c` of `cfg.seed`.
/// Each entry holds that chain's thinned draws.
pub fn run_independent_chains(
    cfg: &ChainConfig,
    inits: &[Init],
    target: &NoiseTarget,
    ps: &ProposalSpec,
    ctx: &LatticeContext,
) -> Result<Vec<Vec<Vec<i64>>>> {
    cfg.validate()?;
    inits
        .par_iter()
        .enumerate()
        .map(|(c, init)| {
            let cfg = ChainConfig {
                init: init.clone(),
                ..cfg.clone()
            };
            let mut out = Vec::with_capacity(cfg.retained() as usize);
            if ctx.is_degenerate() {
                out.resize(cfg.retained() as usize, vec![0; ctx.dim()]);
                return Ok(out);
            }
            run_chain_with(&cfg, target, ps, ctx, stream_rng(cfg.seed, c as u64), |s| {
                let l = s.step_index;
                if l > cfg.burn_in && (l - cfg.burn_in) % cfg.thin == 0 {
                    out.push(s.z.clone());
                }
            })?;
            Ok(out)
        })
        .collect()
}
