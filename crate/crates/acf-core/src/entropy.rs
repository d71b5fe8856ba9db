//! Metric entropy of `T_α` two ways, parameter sweeps, and Hölder
//! quotient fits.
//!
//! Rohlin's identity turns entropy into a weighted integral of the
//! invariant density, `h(T_α) = ∫ log|T_α′| dμ_α = −2∫ log|x| ρ_α(x) dx`,
//! which the grid evaluates with exact per-cell antiderivatives of the
//! log (no special treatment of the singular cell). The second route
//! averages the observable `−2 log|x|` along orbits started from
//! μ_α-distributed seeds.

use crate::grid::{integral_ln_abs, GridFunction};
use crate::map::AlphaMap;
use crate::rng;
use crate::transfer::{invariant_density, DensityParams};
use crate::{Error, Result, ZERO_EPS};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMethod {
    Rohlin,
    Birkhoff,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyEstimate {
    pub alpha: f64,
    /// nats
    pub value: f64,
    pub method: EntropyMethod,
    /// refinement difference for Rohlin, standard error for Birkhoff
    pub error_proxy: f64,
    pub params: String,
}

/// Entropy by Rohlin's integral against a computed (normalized) density.
///
/// The integral is a plain functional of whatever density is supplied;
/// invariance is not assumed.
pub fn rohlin_entropy(map: &AlphaMap, density: &GridFunction) -> EntropyEstimate {
    let value = -2.0 * density.integral_against(integral_ln_abs);
    // proxy: difference against the 2× coarsened density
    let coarse_value = if density.n_cells() % 2 == 0 {
        let coarse: Vec<f64> = density
            .values()
            .chunks_exact(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect();
        let g = GridFunction::from_values(*map, coarse).expect("nonempty");
        -2.0 * g.integral_against(integral_ln_abs)
    } else {
        value
    };
    EntropyEstimate {
        alpha: map.alpha(),
        value,
        method: EntropyMethod::Rohlin,
        error_proxy: (value - coarse_value).abs(),
        params: format!("n_cells={}", density.n_cells()),
    }
}

/// Inverse-CDF sampler for a grid density.
pub struct DensitySampler {
    map: AlphaMap,
    cdf: Vec<f64>,
}

impl DensitySampler {
    pub fn new(density: &GridFunction) -> Self {
        let h = density.h();
        let mut cdf = Vec::with_capacity(density.n_cells());
        let mut acc = 0.0;
        for v in density.values() {
            acc += v.max(0.0) * h;
            cdf.push(acc);
        }
        let total = *cdf.last().unwrap();
        for c in cdf.iter_mut() {
            *c /= total;
        }
        DensitySampler {
            map: density.map(),
            cdf,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1);
        let lo = if i == 0 { 0.0 } else { self.cdf[i - 1] };
        let w = (self.cdf[i] - lo).max(f64::MIN_POSITIVE);
        let frac = ((u - lo) / w).clamp(0.0, 1.0);
        let h = 1.0 / self.cdf.len() as f64;
        self.map.left() + (i as f64 + frac) * h
    }
}

/// Entropy as the mean Birkhoff average of `−2 log|x|` over `m` orbits of
/// length `n`; the error proxy is the standard error over orbits.
///
/// Seeds are drawn from the supplied density by inverse-CDF sampling
/// (no burn-in needed); with `lebesgue = true` they are uniform instead
/// and a burn-in of 10³ steps is discarded. Orbits that hit 0 exactly
/// are resampled.
pub fn birkhoff_entropy(
    map: &AlphaMap,
    density: &GridFunction,
    n: usize,
    m: usize,
    seed: u64,
    lebesgue: bool,
) -> Result<EntropyEstimate> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParam("need n >= 1 and m >= 1".into()));
    }
    let sampler = DensitySampler::new(density);
    let burn_in = if lebesgue { 1000 } else { 0 };
    let averages: Vec<f64> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            'resample: for _attempt in 0..64 {
                let mut x = if lebesgue {
                    map.left() + r.random::<f64>()
                } else {
                    sampler.sample(&mut r)
                };
                for _ in 0..burn_in {
                    if x.abs() <= ZERO_EPS {
                        continue 'resample;
                    }
                    x = map.step(x).expect("orbit stays inside");
                }
                let mut acc = 0.0;
                for _ in 0..n {
                    if x.abs() <= ZERO_EPS {
                        continue 'resample;
                    }
                    acc -= 2.0 * x.abs().ln();
                    x = map.step(x).expect("orbit stays inside");
                }
                return acc / n as f64;
            }
            f64::NAN
        })
        .collect();
    if averages.iter().any(|v| v.is_nan()) {
        return Err(Error::DegenerateSample(
            "orbit kept hitting the fixed point at 0".into(),
        ));
    }
    let mean = averages.iter().sum::<f64>() / m as f64;
    let var = averages.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0).max(1.0);
    Ok(EntropyEstimate {
        alpha: map.alpha(),
        value: mean,
        method: EntropyMethod::Birkhoff,
        error_proxy: (var / m as f64).sqrt(),
        params: format!("n={n};m={m};seed={seed}"),
    })
}

/// One α of a sweep; failures are recorded as gaps, never aborting the
/// sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub estimate: Option<EntropyEstimate>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub n_cells: usize,
    pub j_max: u64,
    /// max adjacent quotient |Δh|/|Δα|^s for s ∈ {0.3, 0.45, 0.49}
    pub adjacent_quotients: Vec<(f64, f64)>,
    /// all-pairs Hölder fit at s = 0.49
    pub holder_fit: HolderFit,
}

impl SweepResult {
    /// The successfully computed `(α, h)` pairs.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.estimate.as_ref().map(|e| (p.alpha, e.value)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HolderFit {
    pub s: f64,
    /// max over grid pairs of |h(α)−h(β)|/|α−β|^s
    pub c: f64,
    /// RMS residual of the log|Δh| vs log|Δα| regression (adjacent pairs)
    pub residual: f64,
}

/// Uniform parameter grid, inclusive of both ends (up to roundoff).
pub fn alpha_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 0.5).floor() as usize;
    (0..=n).map(|k| from + k as f64 * step).collect()
}

/// Rohlin entropy at every grid parameter, in parallel.
pub fn sweep_entropy(alphas: &[f64], params: DensityParams) -> SweepResult {
    let points: Vec<SweepPoint> = alphas
        .par_iter()
        .map(|&alpha| {
            let run = AlphaMap::new(alpha).and_then(|map| Ok((map, invariant_density(&map, params)?)));
            match run {
                Ok((map, rho)) => SweepPoint {
                    alpha,
                    estimate: Some(rohlin_entropy(&map, &rho)),
                    error: None,
                },
                Err(e) => SweepPoint {
                    alpha,
                    estimate: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let curve: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.estimate.as_ref().map(|e| (p.alpha, e.value)))
        .collect();
    let adjacent_quotients = [0.3, 0.45, 0.49]
        .iter()
        .map(|&s| {
            let c = curve
                .windows(2)
                .map(|w| (w[1].1 - w[0].1).abs() / (w[1].0 - w[0].0).abs().powf(s))
                .fold(0.0f64, f64::max);
            (s, c)
        })
        .collect();
    let holder_fit = holder_fit(&curve, 0.49);
    SweepResult {
        points,
        n_cells: params.n_cells,
        j_max: params.j_max,
        adjacent_quotients,
        holder_fit,
    }
}

/// Hölder constant at exponent `s`: the max over all grid pairs of
/// `|h(α)−h(β)|/|α−β|^s`, plus the fit quality of the log-log regression
/// over adjacent pairs.
pub fn holder_fit(curve: &[(f64, f64)], s: f64) -> HolderFit {
    let mut c = 0.0f64;
    for (i, &(a1, h1)) in curve.iter().enumerate() {
        for &(a2, h2) in &curve[i + 1..] {
            let q = (h2 - h1).abs() / (a2 - a1).abs().powf(s);
            c = c.max(q);
        }
    }
    let pts: Vec<(f64, f64)> = curve
        .windows(2)
        .filter(|w| (w[1].1 - w[0].1).abs() > 1e-14)
        .map(|w| ((w[1].0 - w[0].0).abs().ln(), (w[1].1 - w[0].1).abs().ln()))
        .collect();
    let residual = if pts.len() < 3 {
        0.0
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let sse: f64 = pts
            .iter()
            .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
            .sum();
        (sse / n).sqrt()
    };
    HolderFit { s, c, residual }
}

/// Breakpoint of a two-segment least-squares fit: the grid α at which
/// splitting the curve into two independent lines minimizes the total
/// squared error. Localizes a slope discontinuity.
pub fn breakpoint_fit(curve: &[(f64, f64)]) -> Option<f64> {
    if curve.len() < 8 {
        return None;
    }
    let sse = |pts: &[(f64, f64)]| -> f64 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        pts.iter()
            .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
            .sum()
    };
    let mut best = (f64::INFINITY, 0usize);
    for b in 3..curve.len() - 3 {
        let total = sse(&curve[..=b]) + sse(&curve[b..]);
        if total < best.0 {
            best = (total, b);
        }
    }
    Some(curve[best.1].0)
}
