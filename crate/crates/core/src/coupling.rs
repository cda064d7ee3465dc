//! Lagged coupling of two chains and the convergence diagnostics built on it.
//!
//! The leader runs `lag` steps ahead of the follower. Each coupled step
//! draws the leader's pre-jump coordinate, couples the follower's
//! coordinate to it maximally, and then drives both accept/reject decisions
//! with the same uniform. Once the two states coincide they move together
//! for good, and the first such time bounds the total variation distance
//! of the chain from its target.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseTarget;
use crate::sampler::{
    accept_or_stay, ln_uniform, step_with, stream_rng, ChainState, Init, LatticeContext, Proposal, ProposalSpec,
};

/// Attempts allowed in the follower's rejection loop for one coordinate.
pub const REJECTION_CAP: u64 = 1_000_000;

/// Leader at time `l`, follower at time `l - lag`.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub leader: ChainState,
    pub follower: ChainState,
    pub lag: u64,
    pub met: bool,
}

impl CoupledState {
    pub fn new(leader: ChainState, follower: ChainState, lag: u64) -> Self {
        let met = leader.same_point(&follower);
        Self {
            leader,
            follower,
            lag,
            met,
        }
    }
}

/// Reusable proposal buffers for [`coupled_step`].
#[derive(Clone, Debug, Default)]
pub struct CouplingScratch {
    leader: Proposal,
    follower: Proposal,
}

/// Advances the pair by one step of the joint kernel.
pub fn coupled_step<R: Rng + ?Sized>(
    cs: &mut CoupledState,
    target: &NoiseTarget,
    ps: &ProposalSpec,
    ctx: &LatticeContext,
    scratch: &mut CouplingScratch,
    rng: &mut R,
) -> Result<()> {
    let k = ctx.rank();
    scratch.leader.reset_to(&cs.leader);
    scratch.follower.reset_to(&cs.follower);
    for (j, eta) in ps.etas.iter().enumerate() {
        let v_j = cs.leader.v[k + j];
        let w_j = cs.follower.v[k + j];
        let e = eta.sample(rng);
        let x = v_j + e;
        // Maximal coupling of eta(. - v_j) and eta(. - w_j).
        let y = if ln_uniform(rng) + eta.ln_pmf(e) <= eta.ln_pmf(x - w_j) {
            x
        } else {
            let mut attempts = 0;
            loop {
                attempts += 1;
                if attempts > REJECTION_CAP {
                    return Err(Error::RejectionCap {
                        coordinate: j,
                        cap: REJECTION_CAP,
                    });
                }
                let e_tilde = eta.sample(rng);
                let y = w_j + e_tilde;
                if ln_uniform(rng) + eta.ln_pmf(e_tilde) > eta.ln_pmf(y - v_j) {
                    break y;
                }
            }
        };
        scratch.leader.shift(ctx, j, e);
        scratch.follower.shift(ctx, j, y - w_j);
    }
    let ln_r = ln_uniform(rng);
    accept_or_stay(&mut cs.leader, &mut scratch.leader, target, ln_r);
    accept_or_stay(&mut cs.follower, &mut scratch.follower, target, ln_r);
    let now_met = cs.leader.same_point(&cs.follower);
    debug_assert!(!cs.met || now_met, "coupled chains separated after meeting");
    cs.met = now_met;
    Ok(())
}

/// First time the leader equals the lagged follower.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetingTimeSample {
    pub tau: u64,
    pub lag: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeetingConfig {
    pub lag: u64,
    /// Hard cap on `l`; exceeding it yields [`Error::MeetingTimeout`].
    pub max_iterations: u64,
    #[serde(default)]
    pub init: Init,
}

impl MeetingConfig {
    pub fn new(lag: u64) -> Self {
        Self {
            lag,
            max_iterations: 10_000_000,
            init: Init::FromProposal,
        }
    }
}

/// Samples one `L`-lag meeting time.
pub fn sample_meeting_time<R: Rng + ?Sized>(
    cfg: &MeetingConfig,
    target: &NoiseTarget,
    ps: &ProposalSpec,
    ctx: &LatticeContext,
    rng: &mut R,
) -> Result<MeetingTimeSample> {
    if cfg.lag == 0 {
        return Err(Error::ConfigInvalid("lag must be at least 1".into()));
    }
    if ps.etas.len() != ctx.lattice_dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.lattice_dim(),
            found: ps.etas.len(),
        });
    }
    let mut leader = ChainState::initial(ctx, target, ps, &cfg.init, rng)?;
    let mut scratch = Proposal::default();
    for _ in 0..cfg.lag {
        step_with(&mut leader, &mut scratch, target, ps, ctx, rng);
    }
    let follower = ChainState::initial(ctx, target, ps, &cfg.init, rng)?;
    let mut pair = CoupledState::new(leader, follower, cfg.lag);
    let mut buffers = CouplingScratch::default();
    let mut l = cfg.lag;
    loop {
        l += 1;
        if l > cfg.max_iterations {
            return Err(Error::MeetingTimeout {
                cap: cfg.max_iterations,
            });
        }
        coupled_step(&mut pair, target, ps, ctx, &mut buffers, rng)?;
        if pair.met {
            return Ok(MeetingTimeSample { tau: l, lag: cfg.lag });
        }
    }
}

/// Independent meeting times in parallel; replicate `i` uses stream `i` of `seed`.
pub fn meeting_times(
    cfg: &MeetingConfig,
    replicates: usize,
    seed: u64,
    target: &NoiseTarget,
    ps: &ProposalSpec,
    ctx: &LatticeContext,
) -> Vec<Result<MeetingTimeSample>> {
    (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng: ChaCha20Rng = stream_rng(seed, i as u64);
            sample_meeting_time(cfg, target, ps, ctx, &mut rng)
        })
        .collect()
}

/// Estimated upper bounds on the total variation distance at each time `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvBoundCurve {
    pub lag: u64,
    pub times: Vec<u64>,
    pub bounds: Vec<f64>,
    pub replicates: usize,
}

/// `max(0, ceil((tau - L - l) / L))`
pub fn tv_bound_term(sample: &MeetingTimeSample, l: u64) -> u64 {
    let excess = sample.tau as i128 - sample.lag as i128 - l as i128;
    if excess <= 0 {
        0
    } else {
        let lag = sample.lag as i128;
        ((excess + lag - 1) / lag) as u64
    }
}

/// Averages [`tv_bound_term`] over replicates at each requested time.
pub fn tv_bound_curve(taus: &[MeetingTimeSample], times: &[u64]) -> Result<TvBoundCurve> {
    let Some(first) = taus.first() else {
        return Err(Error::ConfigInvalid("no meeting times supplied".into()));
    };
    if taus.iter().any(|t| t.lag != first.lag) {
        return Err(Error::ConfigInvalid("meeting times mix different lags".into()));
    }
    let n = taus.len() as f64;
    let bounds = times
        .iter()
        .map(|&l| taus.iter().map(|t| tv_bound_term(t, l) as f64).sum::<f64>() / n)
        .collect();
    Ok(TvBoundCurve {
        lag: first.lag,
        times: times.to_vec(),
        bounds,
        replicates: taus.len(),
    })
}

impl TvBoundCurve {
    /// Bound at time `l`, if it was evaluated.
    pub fn at(&self, l: u64) -> Option<f64> {
        self.times.iter().position(|&t| t == l).map(|i| self.bounds[i])
    }

    /// CSV with columns `l,bound,replicates`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["l", "bound", "replicates"])?;
        for (l, b) in self.times.iter().zip(&self.bounds) {
            w.write_record([l.to_string(), b.to_string(), self.replicates.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R, lag: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut curve = TvBoundCurve {
            lag,
            times: Vec::new(),
            bounds: Vec::new(),
            replicates: 0,
        };
        for rec in r.deserialize() {
            let (l, bound, replicates): (u64, f64, usize) = rec?;
            curve.times.push(l);
            curve.bounds.push(bound);
            curve.replicates = replicates;
        }
        Ok(curve)
    }
}

/// Evenly spaced grid `0, step, 2 step, ..., <= max`.
pub fn time_grid(max: u64, step: u64) -> Vec<u64> {
    let step = step.max(1);
    (0..=max / step).map(|i| i * step).collect()
}

/// Doubles the lag from `start` until the bound at `l = 0` drops to at most
/// one (i.e. becomes informative) or `max_lag` is reached. Returns the lag
/// and the meeting times observed with it.
#[allow(clippy::too_many_arguments)]
pub fn escalate_lag(
    start: u64,
    max_lag: u64,
    replicates: usize,
    seed: u64,
    base: &MeetingConfig,
    target: &NoiseTarget,
    ps: &ProposalSpec,
    ctx: &LatticeContext,
) -> Result<(u64, Vec<MeetingTimeSample>)> {
    let mut lag = start.max(1);
    loop {
        let cfg = MeetingConfig { lag, ..base.clone() };
        let taus = meeting_times(&cfg, replicates, seed, target, ps, ctx)
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let at_zero = tv_bound_curve(&taus, &[0])?.bounds[0];
        if at_zero <= 1.0 || lag >= max_lag {
            return Ok((lag, taus));
        }
        lag = (lag * 2).min(max_lag);
    }
}

/// Potential scale reduction factor of one scalar across chains.
///
/// Uses the variance decomposition of the pooled draws,
/// `R = sqrt((W + B) / W)`, where `W` is the mean within-chain variance and
/// `B` the variance of the chain means (both with divisor equal to the
/// count). Identical chains give exactly 1; the value agrees with the
/// usual Gelman-Rubin statistic to first order in `1/n`.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    let n = chains.first().map_or(0, Vec::len);
    if m < 2 || n == 0 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::InsufficientChains);
    }
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let within = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n as f64)
        .sum::<f64>()
        / m as f64;
    let grand = means.iter().sum::<f64>() / m as f64;
    let between = means.iter().map(|mu| (mu - grand) * (mu - grand)).sum::<f64>() / m as f64;
    if within == 0.0 {
        return Ok(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(((within + between) / within).sqrt())
}

/// [`psrf`] for every coordinate of vector-valued chains (`chain x draw x coordinate`).
pub fn psrf_per_coordinate(chains: &[Vec<Vec<i64>>]) -> Result<Vec<f64>> {
    let dim = chains
        .first()
        .and_then(|c| c.first())
        .map(Vec::len)
        .ok_or(Error::InsufficientChains)?;
    (0..dim)
        .map(|i| {
            let traces: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|z| z[i] as f64).collect()).collect();
            psrf(&traces)
        })
        .collect()
}
