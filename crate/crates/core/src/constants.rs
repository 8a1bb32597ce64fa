//! Closed-form constants of the fractional trace inequality, the reduction
//! principle, the Escobar trace inequality and the Steklov spectrum.

use crate::error::{Result, TslError};
use crate::special::{binomial, gamma_ratio, ln_gamma};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Dimension data (n, m, α) of the fractional Sobolev trace inequality.
///
/// `n` is the ambient dimension, `m` the codimension of the trace
/// hyperplane and `alpha` the smoothness order, with 0 ≤ m < n and
/// m/2 < α < n/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    /// Ambient dimension n.
    pub n: usize,
    /// Trace codimension m.
    pub m: usize,
    /// Smoothness order α.
    pub alpha: f64,
}

impl TraceParams {
    /// Validates and builds the parameter triple.
    pub fn new(n: usize, m: usize, alpha: f64) -> Result<Self> {
        let p = TraceParams { n, m, alpha };
        p.validate()?;
        Ok(p)
    }

    /// Checks 1 ≤ n, 0 ≤ m < n and m/2 < α < n/2.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n < 1 {
            errs.push(format!("n = {} must be at least 1", self.n));
        }
        if self.m >= self.n {
            errs.push(format!(
                "m = {} must satisfy 0 <= m < n = {}",
                self.m, self.n
            ));
        }
        if !self.alpha.is_finite()
            || self.alpha <= self.m as f64 / 2.0
            || self.alpha >= self.n as f64 / 2.0
        {
            errs.push(format!(
                "alpha = {} must satisfy m/2 = {} < alpha < n/2 = {}",
                self.alpha,
                self.m as f64 / 2.0,
                self.n as f64 / 2.0
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(TslError::Parameter(errs.join("; ")))
        }
    }

    /// Builds a triple for the reduction operators only, which need
    /// 0 ≤ m < n and α > m/2 but admit the endpoint α ≥ n/2.
    pub fn for_reduction(n: usize, m: usize, alpha: f64) -> Result<Self> {
        let p = TraceParams { n, m, alpha };
        p.validate_reduction()?;
        Ok(p)
    }

    /// Checks 1 ≤ n, 0 ≤ m < n and α > m/2.
    pub fn validate_reduction(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n < 1 {
            errs.push(format!("n = {} must be at least 1", self.n));
        }
        if self.m >= self.n {
            errs.push(format!(
                "m = {} must satisfy 0 <= m < n = {}",
                self.m, self.n
            ));
        }
        if !self.alpha.is_finite() || self.alpha <= self.m as f64 / 2.0 {
            errs.push(format!(
                "alpha = {} must exceed m/2 = {}",
                self.alpha,
                self.m as f64 / 2.0
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(TslError::Parameter(errs.join("; ")))
        }
    }

    /// Trace-critical exponent s = 2(n−m)/(n−2α).
    pub fn s(&self) -> f64 {
        2.0 * (self.n - self.m) as f64 / (self.n as f64 - 2.0 * self.alpha)
    }

    /// Dimension N = n − m of the trace hyperplane.
    pub fn big_n(&self) -> usize {
        self.n - self.m
    }

    /// Smoothness β = α − m/2 of the trace space.
    pub fn beta(&self) -> f64 {
        self.alpha - self.m as f64 / 2.0
    }

    /// Parameters (n − m, 0, α − m/2) of the reduced fractional Sobolev inequality.
    pub fn reduced(&self) -> TraceParams {
        TraceParams {
            n: self.big_n(),
            m: 0,
            alpha: self.beta(),
        }
    }
}

/// Exponents attached to the Escobar trace inequality in dimension n ≥ 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscobarParams {
    /// Ambient dimension n ≥ 3.
    pub n: usize,
}

impl EscobarParams {
    /// Validates n ≥ 3.
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(TslError::Parameter(format!("n = {n} must be at least 3")));
        }
        Ok(EscobarParams { n })
    }

    /// Nonlinearity exponent p = n/(n−2).
    pub fn p(&self) -> f64 {
        self.n as f64 / (self.n as f64 - 2.0)
    }

    /// Trace-critical exponent 2† = 2(n−1)/(n−2).
    pub fn two_dagger(&self) -> f64 {
        2.0 * (self.n as f64 - 1.0) / (self.n as f64 - 2.0)
    }

    /// Transported Steklov eigenvalue κ_k = 1 + 2k/(n−2).
    pub fn kappa(&self, k: usize) -> f64 {
        1.0 + 2.0 * k as f64 / (self.n as f64 - 2.0)
    }

    /// Half of n − 2, the exponent scale that recurs in the conformal identities.
    pub fn half(&self) -> f64 {
        (self.n as f64 - 2.0) / 2.0
    }
}

/// Sharp constant S(n, m, α) of the fractional Sobolev trace inequality.
pub fn sharp_trace_constant(params: &TraceParams) -> Result<f64> {
    params.validate()?;
    let n = params.n as f64;
    let m = params.m as f64;
    let a = params.alpha;
    let big = n - m;
    let ln_front = 2.0 * a * 2f64.ln() + a * PI.ln() + ln_gamma(a) + ln_gamma(n / 2.0 + a - m)
        - ln_gamma(n / 2.0 - a)
        - ln_gamma(a - m / 2.0);
    let ln_ratio = ln_gamma(big) - ln_gamma(big / 2.0);
    Ok((ln_front + (m - 2.0 * a) / big * ln_ratio).exp())
}

/// Reduction constant R(n, m, α) = 2^m π^{m/2} Γ(α)/Γ(α − m/2).
///
/// Only α > m/2 is required, so the endpoint α = n/2 is admitted.
pub fn reduction_constant(params: &TraceParams) -> Result<f64> {
    params.validate_reduction()?;
    let m = params.m as f64;
    Ok(2f64.powf(m) * PI.powf(m / 2.0) * gamma_ratio(params.alpha, params.alpha - m / 2.0))
}

/// The integral C₁(m, α) = ∫_{ℝ^m} (1+|x|²)^{−α} dx = π^{m/2} Γ(α − m/2)/Γ(α).
pub fn c1_constant(m: usize, alpha: f64) -> Result<f64> {
    let mf = m as f64;
    if !(alpha > mf / 2.0) {
        return Err(TslError::Parameter(format!(
            "the integral of (1+|x|^2)^(-alpha) over R^{m} diverges for alpha = {alpha} <= m/2 = {}",
            mf / 2.0
        )));
    }
    Ok(PI.powf(mf / 2.0) * gamma_ratio(alpha - mf / 2.0, alpha))
}

/// Sharp constant S_E(n) = S(n,1,1)/2 of the Escobar trace inequality.
pub fn escobar_constant(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(TslError::Parameter(format!("n = {n} must be at least 3")));
    }
    Ok(sharp_trace_constant(&TraceParams::new(n, 1, 1.0)?)? / 2.0)
}

/// Lower and upper estimates of the optimal stability constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeBounds {
    /// Lower estimate min{K, 1, 2^{(n+2α−2m)/(n−m)} − 2}/4, with K omitted when absent.
    pub lower: f64,
    /// Upper estimate, split by n − m ≥ 2 and n − m = 1.
    pub upper: f64,
    /// Whether the upper estimate is strict (n − m ≥ 2) or not.
    pub upper_strict: bool,
    /// Whether the caller supplied the external constant K.
    pub k_supplied: bool,
}

/// Bounds on the optimal stability constant of the fractional trace inequality.
///
/// When `k_external` is `None` the K term is dropped from the minimum, so the
/// returned lower value is an upper estimate of the true lower bound.
pub fn be_bounds(params: &TraceParams, k_external: Option<f64>) -> Result<BeBounds> {
    params.validate()?;
    if let Some(k) = k_external {
        if !(k > 0.0 && k.is_finite()) {
            return Err(TslError::Parameter(format!(
                "external constant K = {k} must be positive"
            )));
        }
    }
    let n = params.n as f64;
    let m = params.m as f64;
    let a = params.alpha;
    let big = n - m;
    let mut lower = 1f64.min(2f64.powf((n + 2.0 * a - 2.0 * m) / big) - 2.0);
    if let Some(k) = k_external {
        lower = lower.min(k);
    }
    lower /= 4.0;
    let (upper, strict) = if params.big_n() >= 2 {
        let u1 = (4.0 * a - 2.0 * m) / (n + 2.0 * a + 2.0 - 2.0 * m);
        let u2 = 2.0 - 2f64.powf((n - 2.0 * a) / big);
        (u1.min(u2), true)
    } else {
        ((4.0 * a - 2.0 * m) / (4.0 + 2.0 * a), false)
    };
    Ok(BeBounds {
        lower,
        upper,
        upper_strict: strict,
        k_supplied: k_external.is_some(),
    })
}

/// Spectral data of the transported Steklov problem at degree k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConstants {
    /// κ_k = 1 + 2k/(n−2).
    pub kappa: f64,
    /// Dimension of the degree-k harmonic polynomials in n variables.
    pub multiplicity: u64,
    /// Upper bound 2/(n+2) of the critical-point stability constant.
    pub cp_upper: f64,
}

/// κ_k, the multiplicity of the degree-k eigenspace and 2/(n+2).
pub fn spectral_constants(n: usize, k: usize) -> Result<SpectralConstants> {
    let e = EscobarParams::new(n)?;
    let (ni, ki) = (n as i64, k as i64);
    let mult = binomial(ni + ki - 1, ni - 1) - binomial(ni + ki - 3, ni - 1);
    Ok(SpectralConstants {
        kappa: e.kappa(k),
        multiplicity: mult,
        cp_upper: 2.0 / (n as f64 + 2.0),
    })
}

/// Dimension of the space of degree-k harmonic polynomials in n variables.
pub fn harmonic_dimension(n: usize, k: usize) -> usize {
    let (ni, ki) = (n as i64, k as i64);
    (binomial(ni + ki - 1, ni - 1) - binomial(ni + ki - 3, ni - 1)) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_params_validation_lists_every_violation() {
        let e = TraceParams::new(2, 3, 5.0).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("m = 3"));
        assert!(msg.contains("alpha = 5"));
    }

    #[test]
    fn derived_exponents() {
        let p = TraceParams::new(3, 1, 1.0).unwrap();
        assert_eq!(p.s(), 4.0);
        assert_eq!(p.big_n(), 2);
        assert_eq!(p.beta(), 0.5);
        let e = EscobarParams::new(3).unwrap();
        assert_eq!(e.p(), 3.0);
        assert_eq!(e.two_dagger(), 4.0);
        assert_eq!(e.kappa(2), 5.0);
    }

    #[test]
    fn spectral_examples() {
        let s = spectral_constants(3, 2).unwrap();
        assert_eq!((s.kappa, s.multiplicity), (5.0, 5));
        assert!((s.cp_upper - 0.4).abs() < 1e-15);
        assert_eq!(spectral_constants(3, 0).unwrap().multiplicity, 1);
        let s = spectral_constants(4, 1).unwrap();
        assert_eq!((s.kappa, s.multiplicity), (2.0, 4));
    }

    #[test]
    fn bounds_examples() {
        let b = be_bounds(&TraceParams::new(2, 1, 0.75).unwrap(), None).unwrap();
        assert!((b.upper - 1.0 / 5.5).abs() < 1e-15);
        assert!(!b.upper_strict);
        let b = be_bounds(&TraceParams::new(3, 1, 1.0).unwrap(), None).unwrap();
        assert!((b.upper - 0.4).abs() < 1e-15 && b.upper_strict);
        let b = be_bounds(&TraceParams::new(3, 0, 1.0).unwrap(), Some(1.0)).unwrap();
        assert!((b.lower - 0.25).abs() < 1e-15);
    }

    #[test]
    fn c1_rejects_divergent_integral() {
        assert!(c1_constant(2, 1.0).is_err());
        assert_eq!(c1_constant(0, 1.0).unwrap(), 1.0);
    }
}
