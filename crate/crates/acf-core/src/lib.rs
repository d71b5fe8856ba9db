//! Numerical ergodic theory for the one-parameter family of
//! α-continued-fraction interval maps (Nakada's maps)
//!
//! ```text
//! T_α(x) = 1/|x| − ⌊1/|x| + 1 − α⌋      on  I_α = [α−1, α],   T_α(0) = 0
//! ```
//!
//! The crate computes, for any `α ∈ (0, 1]`:
//!
//! - digit expansions, orbits and convergents ([`map`]),
//! - the branch partition, cylinder sets and the inverse-derivative
//!   weights `g_{n,α}` ([`partition`]),
//! - the transfer operator in two realizations (exact branch sum and
//!   an Ulam matrix), its invariant density, and bounded-variation /
//!   mild-growth norm utilities ([`transfer`], [`bv`]),
//! - metric entropy via Rohlin's integral and via Birkhoff averages,
//!   plus parameter sweeps and Hölder-quotient fits ([`entropy`]),
//! - Birkhoff-sum statistics: empirical central limit behaviour and
//!   three independent estimators of the limit variance ([`stochastics`]),
//! - quantitative continuity-in-α diagnostics: the Keller-distance
//!   construction between translated maps, Lasota–Yorke constant probes
//!   and density moduli of continuity ([`continuity`]).
//!
//! All computations are deterministic given their parameters; random
//! sampling uses a counter-based stream keyed by `(seed, index)` so runs
//! are reproducible and order-independent under parallelism.

#![forbid(unsafe_code)]

use thiserror::Error;

pub mod bv;
pub mod continuity;
pub mod entropy;
pub mod grid;
pub mod map;
pub mod partition;
pub mod rng;
pub mod stochastics;
pub mod suite;
pub mod transfer;

pub use grid::GridFunction;
pub use map::{AlphaMap, Digit, Expansion, Sign};
pub use partition::{BranchId, Cylinder};
pub use transfer::UlamOperator;

/// `(√5 − 1)/2`, the golden mean; the closed-form density regime starts
/// here and the entropy has a one-sided-derivative break at this parameter.
pub const GOLDEN_MEAN: f64 = 0.618_033_988_749_894_9;

/// Points with `|x| ≤ ZERO_EPS` are treated as the fixed point 0: below
/// roughly 2⁻⁵² the floating-point digit formula degenerates, and the set
/// has negligible measure for every quantity computed here.
pub const ZERO_EPS: f64 = 1e-15;

/// Orbit points are clamped onto `[α−1, α]` when within this distance of
/// an endpoint, absorbing roundoff from the `1/|x| − a` iteration.
pub const ENDPOINT_CLAMP: f64 = 1e-14;

/// Map evaluation accepts arguments this far outside `[α−1, α]` (clamping
/// them in) so that long iterated orbits cannot fail on accumulated
/// roundoff; anything farther out is a genuine domain error.
pub const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alpha = {0} outside (0, 1]")]
    BadAlpha(f64),
    #[error("x = {x} outside [{left}, {right}]")]
    OutsideInterval { x: f64, left: f64, right: f64 },
    #[error("digit undefined at x = 0")]
    ZeroPoint,
    #[error("branch (j = {j}, {eps}) not admissible for alpha = {alpha}")]
    InadmissibleBranch { j: u64, eps: Sign, alpha: f64 },
    #[error("inverse branch lands at {x}, outside branch (j = {j}, {eps})")]
    OutsideBranch { x: f64, j: u64, eps: Sign },
    #[error("convergent numerator/denominator overflow at index {0}")]
    ConvergentOverflow(usize),
    #[error("iteration did not converge: residual {residual:.3e} after {iters} steps")]
    NoConvergence { residual: f64, iters: usize },
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("conjugation construction invalid at x = {x}: {reason}")]
    ConstructionInvalid { x: f64, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T> = std::result::Result<T, Error>;
