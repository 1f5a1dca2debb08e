//! Closed-form theoretical quantities: the Hoeffding band tail and the derived
//! instability lower bound for cube-supported laws, the Chebyshev analogue for
//! Gaussian squared norms, unit-ball volume machinery, the two-term E[Z]/d^{1/p}
//! lower bound, and the stable-volume/largeness diagnostics.
//!
//! Everything dataset-size-dependent flows through log n(d), so exponential
//! size rules at d = 1000 (n ~ 10^643) never materialize n as an integer.

use crate::distributions::gaussian_squared_norm_moments;
use crate::metric::{delta, CompensatedSum, Epsilon, MetricError, PNorm};
use crate::special::ln_gamma;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("dataset size rule parameters invalid: {0}")]
    InvalidSizeRule(String),
    #[error("realized dataset size overflows a 64-bit count (log n = {log_n})")]
    DatasetSizeOverflow { log_n: f64 },
    #[error("query coordinate {value} lies outside [0,1]")]
    QueryCoordinateOutOfRange { value: f64 },
    #[error("density supremum witness must be positive, got {0}")]
    InvalidBetaValue(f64),
    #[error("stddev spectrum must contain at least one positive entry")]
    AllZeroSpectrum,
    #[error("log n must be nonnegative (n >= 1), got {0}")]
    InvalidLogN(f64),
    #[error("squared L2 density norm must be positive, got {0}")]
    InvalidL2Norm(f64),
    #[error("zeta must lie in (0.99, 1), got {0}")]
    ZetaOutOfRange(f64),
    #[error("omega must lie in [0, 1), got {0}")]
    OmegaOutOfRange(f64),
    #[error("volume lower bound must be positive, got {0}")]
    NonPositiveVolume(f64),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// How the dataset size n(d) scales with dimension. The evaluator returns
/// log n(d), which is the only form the bound formulas consume.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSizeRule {
    Constant { n: u64 },
    /// n(d) = coefficient · d^exponent.
    Polynomial { coefficient: f64, exponent: f64 },
    /// n(d) = base^d with base > 1; base = 4(1+ε) is the growth rate at
    /// which the expected-separation lower bound turns positive.
    Exponential { base: f64 },
}

impl DatasetSizeRule {
    pub fn constant(n: u64) -> Result<Self, BoundsError> {
        if n == 0 {
            return Err(BoundsError::InvalidSizeRule(
                "constant size must be at least 1".into(),
            ));
        }
        Ok(Self::Constant { n })
    }

    pub fn polynomial(coefficient: f64, exponent: f64) -> Result<Self, BoundsError> {
        if !coefficient.is_finite() || coefficient <= 0.0 || !exponent.is_finite() || exponent < 0.0
        {
            return Err(BoundsError::InvalidSizeRule(format!(
                "polynomial needs c > 0 and k >= 0, got c = {coefficient}, k = {exponent}"
            )));
        }
        Ok(Self::Polynomial {
            coefficient,
            exponent,
        })
    }

    pub fn exponential(base: f64) -> Result<Self, BoundsError> {
        if !base.is_finite() || base <= 1.0 {
            return Err(BoundsError::InvalidSizeRule(format!(
                "exponential base must exceed 1, got {base}"
            )));
        }
        Ok(Self::Exponential { base })
    }

    /// log n(d), finite for every d ≥ 1.
    pub fn log_n(&self, d: usize) -> f64 {
        let d = d as f64;
        match self {
            Self::Constant { n } => (*n as f64).ln(),
            Self::Polynomial {
                coefficient,
                exponent,
            } => coefficient.ln() + exponent * d.ln(),
            Self::Exponential { base } => d * base.ln(),
        }
    }

    /// Concrete point count for estimation, rounded to the nearest integer and
    /// floored at 1. Rounding (not ceiling) keeps the realized count equal to
    /// the published value for fractional powers such as 4.4^6 = 7256.31 → 7256.
    pub fn realize(&self, d: usize) -> Result<u64, BoundsError> {
        if let Self::Constant { n } = self {
            return Ok(*n);
        }
        let log_n = self.log_n(d);
        if log_n > (u64::MAX as f64).ln() - 1.0 {
            return Err(BoundsError::DatasetSizeOverflow { log_n });
        }
        Ok((log_n.exp().round() as u64).max(1))
    }
}

/// Expected p-th power distance from a fixed query to a uniform-cube draw:
/// Σ_j [q_j^{p+1} + (1−q_j)^{p+1}]/(p+1). Per coordinate this is minimized at
/// q_j = 1/2 with value 1/((p+1)·2^p), the floor the Hoeffding bound uses.
pub fn gamma_uniform(query: &[f64], p: PNorm) -> Result<f64, BoundsError> {
    let exponent = p.get() + 1.0;
    let mut acc = CompensatedSum::new();
    for &q in query {
        if !(0.0..=1.0).contains(&q) {
            return Err(BoundsError::QueryCoordinateOutOfRange { value: q });
        }
        acc.add((q.powf(exponent) + (1.0 - q).powf(exponent)) / exponent);
    }
    Ok(acc.value())
}

fn hoeffding_deviation_raw(d: usize, p: PNorm, epsilon: Epsilon, beta_value: f64) -> f64 {
    let dl = delta(epsilon, p);
    let pv = p.get();
    // 2β·exp(−2δ²·d/((p+1)²·4^p)); the d/((p+1)²4^p) form is the algebraic
    // simplification of [d/((p+1)2^p)]²/d.
    let exponent = 2.0 * dl * dl * d as f64 / ((pv + 1.0) * (pv + 1.0) * 4f64.powf(pv));
    2.0 * beta_value * (-exponent).exp()
}

/// Hoeffding tail bound on the band-violation probability for cube-supported
/// laws, clamped into [0,1]. `beta_value` is the density-supremum witness β(d).
pub fn hoeffding_deviation_bound(
    d: usize,
    p: PNorm,
    epsilon: Epsilon,
    beta_value: f64,
) -> Result<f64, BoundsError> {
    if !beta_value.is_finite() || beta_value <= 0.0 {
        return Err(BoundsError::InvalidBetaValue(beta_value));
    }
    Ok(hoeffding_deviation_raw(d, p, epsilon, beta_value).min(1.0))
}

/// (1 − tail)^n evaluated from log n without ever materializing n. Handles
/// n beyond 10^300 (log n up to ~1e9 and beyond) and degenerate tails exactly.
fn one_minus_tail_to_the_n(tail: f64, log_n: f64) -> f64 {
    if tail >= 1.0 {
        return 0.0;
    }
    if tail <= 0.0 {
        return 1.0;
    }
    // n·ln(1−tail) = −exp(log n + ln(−ln(1−tail))), composed entirely in log
    // space; overflow of the inner exp collapses to −inf and thus to 0.
    let per_point = -(-tail).ln_1p();
    (-(log_n + per_point.ln()).exp()).exp()
}

/// Lower bound on the instability probability for a cube-supported law:
/// max(0, 1 − hoeffding tail)^{n(d)}.
pub fn instability_probability_lower_bound(
    d: usize,
    size_rule: &DatasetSizeRule,
    p: PNorm,
    epsilon: Epsilon,
    beta_value: f64,
) -> Result<f64, BoundsError> {
    let tail = hoeffding_deviation_bound(d, p, epsilon, beta_value)?;
    Ok(one_minus_tail_to_the_n(tail, size_rule.log_n(d)))
}

/// Chebyshev tail bound on |‖Y‖₂² − Σλ²| > δ·Σλ² for a centered diagonal
/// Gaussian: min(1, Var/t²) with Var = 2Σλ⁴ and t = δ(ε,2)·Σλ².
pub fn chebyshev_gaussian_deviation_bound(
    stddevs: &[f64],
    epsilon: Epsilon,
) -> Result<f64, BoundsError> {
    let (mean, variance) = gaussian_squared_norm_moments(stddevs);
    if mean <= 0.0 {
        return Err(BoundsError::AllZeroSpectrum);
    }
    let dl = delta(epsilon, PNorm::new(2.0).expect("2 is a valid exponent"));
    let threshold = dl * mean;
    Ok((variance / (threshold * threshold)).min(1.0))
}

/// Instability lower bound in the Gaussian setting (centered law, query at the
/// origin, p = 2): max(0, 1 − chebyshev tail)^{n(d)}.
pub fn gaussian_instability_lower_bound(
    stddevs: &[f64],
    size_rule: &DatasetSizeRule,
    epsilon: Epsilon,
    d: usize,
) -> Result<f64, BoundsError> {
    let tail = chebyshev_gaussian_deviation_bound(stddevs, epsilon)?;
    Ok(one_minus_tail_to_the_n(tail, size_rule.log_n(d)))
}

/// log of the unit p-norm ball volume in dimension d:
/// d·log(2Γ(1+1/p)) − logΓ(1+d/p).
pub fn log_unit_ball_volume(d: usize, p: PNorm) -> f64 {
    let inv_p = 1.0 / p.get();
    d as f64 * (2f64.ln() + ln_gamma(1.0 + inv_p)) - ln_gamma(1.0 + d as f64 * inv_p)
}

/// The finite-d value d^{1/p}·V_{d,p}^{1/d} next to its dimension-free ceiling
/// 2(ep)^{1/p}. The value approaches the ceiling from below as d grows; both are
/// returned so callers can report the margin. Requires a true norm (p ≥ 1).
pub fn ball_volume_limit_check(d: usize, p: PNorm) -> Result<(f64, f64), MetricError> {
    let p = p.require_norm()?;
    let d_f = d as f64;
    let value = d_f.powf(1.0 / p.get()) * (log_unit_ball_volume(d, p) / d_f).exp();
    let limit = 2.0 * (std::f64::consts::E * p.get()).powf(1.0 / p.get());
    Ok((value, limit))
}

/// Largest log n for which exp(log n) + 1 + 1/d is still comfortably inside the
/// f64/log-gamma domain; beyond it the Γ-ratio is 1 to machine precision.
const GAMMA_RATIO_LOG_N_LIMIT: f64 = 700.0;

/// Γ(n+1/d)·Γ(n+1) / (Γ(n)·Γ(n+1+1/d)) evaluated as exp of log-gamma
/// differences. The recurrence Γ(z+1) = zΓ(z) collapses the ratio to
/// n/(n+1/d) → 1, which is the substituted limit once n leaves the
/// representable range.
pub fn gamma_ratio(log_n: f64, d: usize) -> f64 {
    if log_n >= GAMMA_RATIO_LOG_N_LIMIT {
        return 1.0;
    }
    let n = log_n.exp();
    let inv_d = 1.0 / d as f64;
    (ln_gamma(n + inv_d) + ln_gamma(n + 1.0) - ln_gamma(n) - ln_gamma(n + 1.0 + inv_d)).exp()
}

/// Two-term lower bound on E[Z]/d^{1/p} (asymptotic: the vanishing
/// o((1+ε)/(d^{1/p}(n+1)^{1/d})) correction carries no constant and is dropped):
///
///   term1 = Γ-ratio / (d^{1/p}·√3·2^{1/d}·e^{1/(2d)}·(‖f‖₂²)^{1/d}·V^{1/d})
///   term2 = 2(1+ε) / (d^{1/p}·(n+1)^{1/d}·V^{1/d})
///
/// All n-dependence enters through `log_n`. The result may be negative
/// (vacuous bound) and is reported as-is.
pub fn ez_ratio_lower_bound(
    d: usize,
    p: PNorm,
    epsilon: Epsilon,
    log_n: f64,
    l2_norm_squared: f64,
) -> Result<f64, BoundsError> {
    let p = p.require_norm()?;
    if !log_n.is_finite() || log_n < 0.0 {
        return Err(BoundsError::InvalidLogN(log_n));
    }
    if !l2_norm_squared.is_finite() || l2_norm_squared <= 0.0 {
        return Err(BoundsError::InvalidL2Norm(l2_norm_squared));
    }
    let d_f = d as f64;
    let inv_d = 1.0 / d_f;
    let d_root = d_f.powf(1.0 / p.get());
    let volume_root = (log_unit_ball_volume(d, p) * inv_d).exp();

    let term1 = gamma_ratio(log_n, d)
        / (d_root
            * 3f64.sqrt()
            * (inv_d * (2f64.ln() + 0.5 + l2_norm_squared.ln())).exp()
            * volume_root);

    // ln(n+1) from ln n, stable for arbitrarily large n.
    let log_n_plus_one = log_n + (-log_n).exp().ln_1p();
    let term2 = 2.0 * epsilon.factor() / (d_root * (log_n_plus_one * inv_d).exp() * volume_root);

    Ok(term1 - term2)
}

/// Lower bound on the volume of the ζ-stable query region:
/// [1/(ζβ)]·[ez_ratio + ζ − 1], clamped below at 0 (it is a volume).
pub fn stable_volume_lower_bound(
    ez_ratio: f64,
    zeta: f64,
    beta_value: f64,
) -> Result<f64, BoundsError> {
    check_zeta(zeta)?;
    if !beta_value.is_finite() || beta_value <= 0.0 {
        return Err(BoundsError::InvalidBetaValue(beta_value));
    }
    Ok(((ez_ratio + zeta - 1.0) / (zeta * beta_value)).max(0.0))
}

/// The "large query set" requirement accepts any ζ in (99/100, 1).
pub fn check_zeta(zeta: f64) -> Result<(), BoundsError> {
    if !zeta.is_finite() || zeta <= 0.99 || zeta >= 1.0 {
        return Err(BoundsError::ZetaOutOfRange(zeta));
    }
    Ok(())
}

/// log of Volume([0,ω]^d)/volume_lower = d·log ω − log(volume_lower). Must fall
/// to −∞ along d for any fixed ω < 1 when the stable region is genuinely large;
/// ω = 0 yields the −∞ sentinel immediately.
pub fn largeness_ratio(omega: f64, d: usize, volume_lower: f64) -> Result<f64, BoundsError> {
    if !omega.is_finite() || !(0.0..1.0).contains(&omega) {
        return Err(BoundsError::OmegaOutOfRange(omega));
    }
    if !volume_lower.is_finite() || volume_lower <= 0.0 {
        return Err(BoundsError::NonPositiveVolume(volume_lower));
    }
    if omega == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(d as f64 * omega.ln() - volume_lower.ln())
}

/// Every closed-form quantity for one configuration, with inputs echoed and
/// clamp events recorded as flags (a clamped bound is information, not an
/// error). Serializes to one CSV row / JSON object downstream.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub d: usize,
    pub log_n: f64,
    pub p: f64,
    pub epsilon: f64,
    /// Density supremum witness; absent for the Gaussian law, where the
    /// cube-law tail machinery does not apply.
    pub beta: Option<f64>,
    pub zeta: f64,
    pub delta_value: f64,
    /// Band center: expected p-power distance for the configured query.
    pub gamma: f64,
    pub deviation_bound: f64,
    pub instability_lower_bound: f64,
    pub ez_ratio_bound: Option<f64>,
    pub stable_volume_bound: Option<f64>,
    pub deviation_bound_clamped: bool,
    pub stable_volume_clamped: bool,
}

impl BoundReport {
    /// Report for a cube-supported law. `l2_norm_squared` enables the
    /// E[Z]/d^{1/p} and stable-volume entries (they additionally need p ≥ 1).
    #[allow(clippy::too_many_arguments)]
    pub fn cube_law(
        query: &[f64],
        d: usize,
        size_rule: &DatasetSizeRule,
        p: PNorm,
        epsilon: Epsilon,
        beta_value: f64,
        zeta: f64,
        l2_norm_squared: Option<f64>,
    ) -> Result<Self, BoundsError> {
        check_zeta(zeta)?;
        let raw = hoeffding_deviation_raw(d, p, epsilon, beta_value);
        let deviation_bound = hoeffding_deviation_bound(d, p, epsilon, beta_value)?;
        let log_n = size_rule.log_n(d);
        let instability_lower_bound = one_minus_tail_to_the_n(deviation_bound, log_n);
        let ez = match l2_norm_squared {
            Some(l2) if p.get() >= 1.0 => {
                Some(ez_ratio_lower_bound(d, p, epsilon, log_n, l2)?)
            }
            _ => None,
        };
        let (stable_volume, stable_clamped) = match ez {
            Some(ez) => {
                let v = stable_volume_lower_bound(ez, zeta, beta_value)?;
                (Some(v), ez + zeta - 1.0 < 0.0)
            }
            None => (None, false),
        };
        Ok(Self {
            d,
            log_n,
            p: p.get(),
            epsilon: epsilon.get(),
            beta: Some(beta_value),
            zeta,
            delta_value: delta(epsilon, p),
            gamma: gamma_uniform(query, p)?,
            deviation_bound,
            instability_lower_bound,
            ez_ratio_bound: ez,
            stable_volume_bound: stable_volume,
            deviation_bound_clamped: raw > 1.0,
            stable_volume_clamped: stable_clamped,
        })
    }

    /// Report for the centered Gaussian law at p = 2 (query at the origin).
    pub fn gaussian_law(
        stddevs: &[f64],
        d: usize,
        size_rule: &DatasetSizeRule,
        epsilon: Epsilon,
        zeta: f64,
    ) -> Result<Self, BoundsError> {
        check_zeta(zeta)?;
        let p = PNorm::new(2.0).expect("2 is a valid exponent");
        let (mean, variance) = gaussian_squared_norm_moments(stddevs);
        if mean <= 0.0 {
            return Err(BoundsError::AllZeroSpectrum);
        }
        let dl = delta(epsilon, p);
        let raw = variance / (dl * mean * dl * mean);
        let deviation_bound = chebyshev_gaussian_deviation_bound(stddevs, epsilon)?;
        let log_n = size_rule.log_n(d);
        Ok(Self {
            d,
            log_n,
            p: 2.0,
            epsilon: epsilon.get(),
            beta: None,
            zeta,
            delta_value: dl,
            gamma: mean,
            deviation_bound,
            instability_lower_bound: one_minus_tail_to_the_n(deviation_bound, log_n),
            ez_ratio_bound: None,
            stable_volume_bound: None,
            deviation_bound_clamped: raw > 1.0,
            stable_volume_clamped: false,
        })
    }
}
