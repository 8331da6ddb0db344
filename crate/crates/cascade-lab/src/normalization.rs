//! Closed-form normalization constants and regime dispatch.
//!
//! The antipersistent and critical martingales are divided by sigma_H *
//! b^(n(1/2-H)) and sigma_(1/2) * sqrt(n); the persistent remainder uses the
//! same geometric factor, now decaying; the fair-sign walk divides by
//! b^(n/2).

use crate::error::{Error, Result};

/// Regime of the exponent H. A pure function of H.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Finite H < 1/2: the martingale oscillates unboundedly.
    Antipersistent,
    /// H = 1/2: the atypical sqrt(n) normalization.
    Critical,
    /// H > 1/2: strong convergence, remainder theorems apply.
    Persistent,
    /// H = -inf: fair signs, the correlated coin-tossing walk.
    DegenerateLimit,
}

pub fn regime_of(h: f64) -> Result<Regime> {
    if h.is_nan() || h > 1.0 {
        return Err(Error::InvalidExponent { h });
    }
    Ok(if h == f64::NEG_INFINITY {
        Regime::DegenerateLimit
    } else if h < 0.5 {
        Regime::Antipersistent
    } else if h == 0.5 {
        Regime::Critical
    } else {
        Regime::Persistent
    })
}

fn validate(b: u32, h: f64) -> Result<()> {
    if b < 2 {
        return Err(Error::InvalidBase { b });
    }
    if h.is_nan() || h > 1.0 {
        return Err(Error::InvalidExponent { h });
    }
    Ok(())
}

/// The limit standard deviation sigma_H = sqrt(E(B_H(1)^2) - 1) extended by
/// its closed forms:
///
///   H = -inf        -> 1
///   H < 1/2         -> sqrt((b-1)/(b^(2-2H) - b) + 1)
///   H = 1/2         -> sqrt((b-1)/b)
///   1/2 < H <= 1    -> sqrt((b^(1-2H) - 1/b)/(1 - b^(1-2H)))
///
/// The persistent branch is the fixed point of the second-moment recursion;
/// it is cross-checked against the moments module in the test suite.
/// sigma_1 = 0: the deterministic case, flagged degenerate on the schedule.
pub fn sigma(b: u32, h: f64) -> Result<f64> {
    validate(b, h)?;
    let bf = b as f64;
    if h == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    Ok(if h < 0.5 {
        ((bf - 1.0) / (bf.powf(2.0 - 2.0 * h) - bf) + 1.0).sqrt()
    } else if h == 0.5 {
        ((bf - 1.0) / bf).sqrt()
    } else {
        let c = bf.powf(1.0 - 2.0 * h);
        ((c - 1.0 / bf) / (1.0 - c)).sqrt()
    })
}

/// Width of the near-critical band where a_n falls back to the sqrt(n)
/// branch to dodge catastrophic cancellation.
const CRITICAL_BAND: f64 = 1e-6;

/// The natural normalizer a_n of the antipersistent and critical regimes:
///
///   H < 1/2 -> sqrt(((b-1)/b + b^(1-2H) - 1) * (b^(n(1-2H)) - 1)/(b^(1-2H) - 1))
///   H = 1/2 -> sqrt(n (b-1)/b)
pub fn a_n(b: u32, h: f64, n: u32) -> Result<f64> {
    validate(b, h)?;
    if !h.is_finite() || h > 0.5 {
        return Err(Error::WrongRegime {
            h,
            expected: "H <= 1/2 finite",
        });
    }
    let bf = b as f64;
    let nf = n as f64;
    if (1.0 - 2.0 * h).abs() < CRITICAL_BAND {
        return Ok((nf * (bf - 1.0) / bf).sqrt());
    }
    let c = bf.powf(1.0 - 2.0 * h);
    let coeff = (bf - 1.0) / bf + c - 1.0;
    Ok((coeff * (c.powf(nf) - 1.0) / (c - 1.0)).sqrt())
}

/// The theorem normalizer for generation n:
///
///   finite H != 1/2 -> sigma_H * b^(n(1/2-H))
///   H = 1/2         -> sigma_(1/2) * sqrt(n)
///   H = -inf        -> b^(n/2)
pub fn normalizer(b: u32, h: f64, n: u32) -> Result<f64> {
    validate(b, h)?;
    let bf = b as f64;
    let nf = n as f64;
    if h == f64::NEG_INFINITY {
        return Ok(bf.powf(nf / 2.0));
    }
    if h == 0.5 {
        return Ok(sigma(b, h)? * nf.sqrt());
    }
    Ok(sigma(b, h)? * bf.powf(nf * (0.5 - h)))
}

/// Regime-dispatched normalization data for one (b, H).
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct NormalizationSchedule {
    pub b: u32,
    pub h: f64,
    pub regime: Regime,
    pub sigma: f64,
    /// True only at H = 1, where sigma_1 = 0 and the cascade is the
    /// deterministic ramp.
    pub degenerate: bool,
}

impl NormalizationSchedule {
    pub fn new(b: u32, h: f64) -> Result<Self> {
        let regime = regime_of(h)?;
        let sigma = sigma(b, h)?;
        Ok(Self {
            b,
            h,
            regime,
            sigma,
            degenerate: sigma == 0.0,
        })
    }

    pub fn normalizer(&self, n: u32) -> f64 {
        normalizer(self.b, self.h, n).expect("validated at construction")
    }
}
