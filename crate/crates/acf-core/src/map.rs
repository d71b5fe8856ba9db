//! The map family `T_α`, digit extraction, orbits, expansions and
//! convergents.
//!
//! For `α ∈ (0, 1]` the map acts on `I_α = [α−1, α]` by
//! `T_α(x) = 1/|x| − a_α(x)` with digit `a_α(x) = ⌊1/|x| + 1 − α⌋` and
//! `T_α(0) = 0`. Iteration produces the signed continued-fraction
//! expansion `x = ε₁/(a₁ + ε₂/(a₂ + …))` with `εₖ = sign` of the
//! previous orbit point.

use crate::{Error, Result, DOMAIN_SLACK, ENDPOINT_CLAMP, ZERO_EPS};
use serde::Serialize;
use std::fmt;

/// Sign of a continued-fraction digit (the sign of the orbit point that
/// produced it).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Neg
        } else {
            Sign::Pos
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Pos => 1.0,
            Sign::Neg => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Pos => "+",
            Sign::Neg => "-",
        })
    }
}

/// One signed digit `(a, ε)` of the expansion.
///
/// Admissible digits satisfy `a ≥ 2` on negative branches and
/// `a ≥ j_min` on positive ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Digit {
    pub a: u64,
    pub eps: Sign,
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.a, self.eps)
    }
}

/// The parameter `α` with its derived constants.
///
/// `gamma = max{α², (α−1)²}` bounds `1/|T_α′|` on the interval, so it is
/// `< 1` for `α < 1` (uniform expansion) and `1` exactly at `α = 1`,
/// where the weight bound is replaced by `4·((√5−1)/2)^{2n−4}`.
#[derive(Clone, Copy, Debug)]
pub struct AlphaMap {
    alpha: f64,
    left: f64,
    right: f64,
    j_min: u64,
    gamma: f64,
}

impl AlphaMap {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) || !alpha.is_finite() {
            return Err(Error::BadAlpha(alpha));
        }
        let left = alpha - 1.0;
        let right = alpha;
        let j_min = if alpha == 1.0 {
            1
        } else {
            let mut j = (1.0 / alpha - alpha).ceil().max(1.0) as u64;
            // When 1/α − α is an exact integer the branch the formula names is
            // empty (its endpoints coincide); the first nonempty branch is next.
            while 1.0 / (j as f64 + alpha) >= alpha {
                j += 1;
            }
            j
        };
        let gamma = (alpha * alpha).max((alpha - 1.0) * (alpha - 1.0));
        Ok(AlphaMap {
            alpha,
            left,
            right,
            j_min,
            gamma,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Left endpoint `α − 1`.
    pub fn left(&self) -> f64 {
        self.left
    }

    /// Right endpoint `α`.
    pub fn right(&self) -> f64 {
        self.right
    }

    /// Smallest digit on positive branches.
    pub fn j_min(&self) -> u64 {
        self.j_min
    }

    /// Smallest digit on negative branches, `None` at `α = 1` where the
    /// interval has no negative part.
    pub fn neg_j_min(&self) -> Option<u64> {
        if self.alpha == 1.0 {
            return None;
        }
        let t = 1.0 / (1.0 - self.alpha) - self.alpha;
        let mut j = (t.floor() as u64 + 1).max(2);
        while -(1.0 / (j as f64 + self.alpha)) <= self.left {
            j += 1;
        }
        Some(j)
    }

    /// `max{α², (α−1)²}`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.left && x <= self.right
    }

    /// Validates `x` against `[α−1, α]`, absorbing upstream iteration
    /// roundoff up to `DOMAIN_SLACK`.
    fn admit(&self, x: f64) -> Result<f64> {
        if x < self.left - DOMAIN_SLACK || x > self.right + DOMAIN_SLACK || x.is_nan() {
            return Err(Error::OutsideInterval {
                x,
                left: self.left,
                right: self.right,
            });
        }
        Ok(x.clamp(self.left, self.right))
    }

    /// The digit `a_α(x) = ⌊1/|x| + 1 − α⌋` with the sign of `x`.
    ///
    /// Branch-endpoint ties are resolved by the floor itself, which is the
    /// deterministic convention used throughout the crate.
    pub fn digit(&self, x: f64) -> Result<Digit> {
        let x = self.admit(x)?;
        if x.abs() <= ZERO_EPS {
            return Err(Error::ZeroPoint);
        }
        let a = (1.0 / x.abs() + 1.0 - self.alpha).floor();
        debug_assert!(a >= 1.0 && a < u64::MAX as f64);
        Ok(Digit {
            a: a as u64,
            eps: Sign::of(x),
        })
    }

    /// One application of `T_α`; `T_α(0) = 0`.
    pub fn step(&self, x: f64) -> Result<f64> {
        let x = self.admit(x)?;
        if x.abs() <= ZERO_EPS {
            return Ok(0.0);
        }
        let v = 1.0 / x.abs();
        let y = v - (v + 1.0 - self.alpha).floor();
        Ok(self.clamp_endpoint(y))
    }

    fn clamp_endpoint(&self, y: f64) -> f64 {
        if y > self.right && y - self.right <= ENDPOINT_CLAMP {
            self.right
        } else if y < self.left && self.left - y <= ENDPOINT_CLAMP {
            self.left
        } else {
            y
        }
    }

    /// The orbit `[x, T_α x, …, T_α^n x]` (length `n + 1`).
    pub fn orbit(&self, x: f64, n: usize) -> Result<Vec<f64>> {
        let mut points = Vec::with_capacity(n + 1);
        let mut cur = self.admit(x)?;
        points.push(cur);
        for _ in 0..n {
            cur = self.step(cur)?;
            points.push(cur);
        }
        Ok(points)
    }

    /// Digits along the first `n` steps of the orbit, stopping early if the
    /// orbit reaches 0; the residual is the final orbit point.
    pub fn expand(&self, x: f64, n: usize) -> Result<Expansion> {
        let mut cur = self.admit(x)?;
        let mut digits = Vec::new();
        for _ in 0..n {
            if cur.abs() <= ZERO_EPS {
                cur = 0.0;
                break;
            }
            digits.push(self.digit(cur)?);
            cur = self.step(cur)?;
        }
        Ok(Expansion {
            a0: 0,
            digits,
            residual: cur,
        })
    }
}

/// A finite signed continued-fraction expansion with its residual orbit
/// point, `x = a₀ + ε₁/(a₁ + ε₂/(… + εₙ/(aₙ + xₙ)))`.
///
/// Seeds are restricted to `I_α`, so `a0` is always 0.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub a0: i64,
    pub digits: Vec<Digit>,
    pub residual: f64,
}

impl Expansion {
    /// Reconstructs the seed from the digits and the residual by backward
    /// evaluation.
    pub fn evaluate(&self) -> f64 {
        let mut t = self.residual;
        for d in self.digits.iter().rev() {
            t = d.eps.as_f64() / (d.a as f64 + t);
        }
        self.a0 as f64 + t
    }

    /// The `k`-th convergent `p/q` (`k = 0` gives `a0/1`), from the signed
    /// recurrence `pₖ = aₖpₖ₋₁ + εₖpₖ₋₂`, `qₖ = aₖqₖ₋₁ + εₖqₖ₋₂`.
    pub fn convergent(&self, k: usize) -> Result<(i128, i128)> {
        if k > self.digits.len() {
            return Err(Error::InvalidParam(format!(
                "convergent index {k} exceeds digit count {}",
                self.digits.len()
            )));
        }
        let (mut p_prev, mut q_prev) = (1i128, 0i128);
        let (mut p, mut q) = (self.a0 as i128, 1i128);
        for (i, d) in self.digits.iter().take(k).enumerate() {
            let a = d.a as i128;
            let e = match d.eps {
                Sign::Pos => 1i128,
                Sign::Neg => -1i128,
            };
            let p_next = a
                .checked_mul(p)
                .and_then(|t| t.checked_add(e * p_prev))
                .ok_or(Error::ConvergentOverflow(i))?;
            let q_next = a
                .checked_mul(q)
                .and_then(|t| t.checked_add(e * q_prev))
                .ok_or(Error::ConvergentOverflow(i))?;
            p_prev = p;
            q_prev = q;
            p = p_next;
            q = q_next;
        }
        Ok((p, q))
    }
}
