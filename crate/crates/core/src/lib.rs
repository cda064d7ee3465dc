//! Integer-valued, invariant-preserving differentially private noise for
//! histograms.
//!
//! Counting invariants (subset sums that must be released exactly) cut out
//! an integer lattice `{ z : A z = 0 }`. Noise is drawn on that lattice from
//! a Laplace-type (`exp(-eps |z|)`) or Gaussian-type density with a
//! Gibbs-within-Metropolis chain whose moves never leave the lattice, and
//! lagged couplings of that chain give empirical convergence bounds.
//!
//! ```
//! use lattice_dp::{compile, privatize, ConstraintSet, Histogram, MechanismSpec};
//! use lattice_dp::sampler::ChainConfig;
//!
//! let cs = ConstraintSet::table_margins(2, 2).unwrap();
//! let ctx = compile(&cs).unwrap();
//! let x = Histogram::new(vec![3, 1, 4, 1]).unwrap();
//! let mut spec = MechanismSpec::laplace_l1(0.5, 7);
//! spec.chain = ChainConfig::for_draws(1_000, 100, 1, 7);
//! let release = privatize(&ctx, &x, &spec).unwrap();
//! assert_eq!(cs.margins_of(&release.output).unwrap(), cs.margins(&x).unwrap());
//! ```

pub mod constraints;
pub mod coupling;
pub mod error;
pub mod intlinalg;
pub mod io;
pub mod mechanism;
pub mod noise;
pub mod sampler;

pub use constraints::{budget_compose, Budget, BudgetLedger, Constraint, ConstraintSet, Histogram};
pub use coupling::{
    coupled_step, meeting_times, psrf, psrf_per_coordinate, sample_meeting_time, tv_bound_curve, CoupledState,
    MeetingConfig, MeetingTimeSample, TvBoundCurve,
};
pub use error::{Error, Result};
pub use intlinalg::{
    gram_determinant, lattice_basis, smith_normal_form, unimodular_inverse, IntMatrix, LatticeBasis, SmithDecomposition,
};
pub use mechanism::{
    compile, noise_replicates, privatize, GaussianCalibration, MechanismContext, MechanismSpec, Release,
};
pub use noise::{gaussian_sigma, tail_constant_k, unit_ball_volume, DoubleGeometric, NoiseKind, NoiseTarget};
pub use sampler::{
    metropolis_step, propose_jump, run_chain, ChainConfig, ChainState, Init, LatticeContext, ProposalSpec,
};

/// Library version recorded in release manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
