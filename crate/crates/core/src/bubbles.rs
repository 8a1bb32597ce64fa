//! Escobar bubbles U[z, λ] on the half-space ℝ^n_+: evaluation with
//! derivatives, energies, pairwise interactions, δ-interaction checks and
//! logarithmic localization cut-offs.

use crate::constants::{escobar_constant, EscobarParams};
use crate::error::{Result, TslError};
use crate::quadrature::{integrate, polar_integral_within, radial_integral, Tolerance};
use crate::special::sphere_area;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// An Escobar bubble with center z ∈ ℝ^{n−1} and scale λ > 0; the ambient
/// dimension is n = z.len() + 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    /// Center on the boundary hyperplane.
    pub z: Vec<f64>,
    /// Concentration scale.
    pub lambda: f64,
}

/// Value and first derivatives of a bubble at a point of the closed half-space.
#[derive(Debug, Clone, PartialEq)]
pub struct BubbleEval {
    /// U[z, λ](x, t).
    pub value: f64,
    /// Gradient in (x, t), length n.
    pub gradient: Vec<f64>,
    /// ∂U/∂λ.
    pub d_lambda: f64,
    /// ∂U/∂z_i, length n − 1.
    pub d_center: Vec<f64>,
}

impl Bubble {
    /// Builds a bubble, validating λ > 0 and n ≥ 3.
    pub fn new(z: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(TslError::Parameter(format!(
                "bubble scale lambda = {lambda} must be positive"
            )));
        }
        if z.len() < 2 {
            return Err(TslError::Parameter(format!(
                "bubble center has {} coordinates; the ambient dimension must be at least 3",
                z.len()
            )));
        }
        if z.iter().any(|c| !c.is_finite()) {
            return Err(TslError::Parameter("bubble center must be finite".into()));
        }
        Ok(Bubble { z, lambda })
    }

    /// The standard bubble U[0, 1] in dimension n.
    pub fn standard(n: usize) -> Self {
        Bubble {
            z: vec![0.0; n - 1],
            lambda: 1.0,
        }
    }

    /// Ambient dimension n.
    pub fn n(&self) -> usize {
        self.z.len() + 1
    }

    /// Exponent e = (n − 2)/2.
    fn e(&self) -> f64 {
        (self.n() as f64 - 2.0) / 2.0
    }

    /// Normalizing factor (n − 2)^{(n−2)/2}.
    pub fn prefactor(&self) -> f64 {
        let e = self.e();
        (2.0 * e).powf(e)
    }

    /// Value on the boundary t = 0, without derivatives.
    pub fn boundary_value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.z).map(|(a, b)| (a - b).powi(2)).sum();
        let l = self.lambda;
        self.prefactor() * (l / (1.0 + l * l * r2)).powf(self.e())
    }

    /// Value at an interior point (x, t), t ≥ 0, without derivatives.
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let r2: f64 = x.iter().zip(&self.z).map(|(a, b)| (a - b).powi(2)).sum();
        let l = self.lambda;
        self.prefactor() * (l / ((1.0 + l * t).powi(2) + l * l * r2)).powf(self.e())
    }

    /// Boundary value and derivatives with respect to λ and z at t = 0.
    pub fn boundary_with_derivatives(&self, x: &[f64]) -> (f64, f64, Vec<f64>) {
        let ev = eval_bubble_unchecked(self, x, 0.0);
        (ev.value, ev.d_lambda, ev.d_center)
    }
}

fn eval_bubble_unchecked(b: &Bubble, x: &[f64], t: f64) -> BubbleEval {
    let e = b.e();
    let l = b.lambda;
    let dx: Vec<f64> = x.iter().zip(&b.z).map(|(a, c)| a - c).collect();
    let r2: f64 = dx.iter().map(|v| v * v).sum();
    let d = (1.0 + l * t).powi(2) + l * l * r2;
    let u = b.prefactor() * (l / d).powf(e);
    let mut gradient: Vec<f64> = dx.iter().map(|v| -e * u * 2.0 * l * l * v / d).collect();
    gradient.push(-e * u * 2.0 * l * (1.0 + l * t) / d);
    let d_center = dx.iter().map(|v| e * u * 2.0 * l * l * v / d).collect();
    let d_lambda = e / l * u * (1.0 - l * l * t * t - l * l * r2) / d;
    BubbleEval {
        value: u,
        gradient,
        d_lambda,
        d_center,
    }
}

/// Evaluates U[z, λ] and its derivatives at (x, t) with t ≥ 0.
pub fn eval_bubble(b: &Bubble, x: &[f64], t: f64) -> Result<BubbleEval> {
    if !(t >= 0.0) {
        return Err(TslError::Domain(format!(
            "t = {t} lies outside the closed half-space"
        )));
    }
    if x.len() != b.z.len() {
        return Err(TslError::Parameter(format!(
            "point has {} tangential coordinates, bubble has {}",
            x.len(),
            b.z.len()
        )));
    }
    Ok(eval_bubble_unchecked(b, x, t))
}

/// Dirichlet energy and boundary mass of a bubble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleEnergy {
    /// ∫_{ℝ^n_+} |∇U|².
    pub h1_norm_sq: f64,
    /// ∫_{ℝ^{n−1}} U^{2†}.
    pub boundary_mass: f64,
}

/// Energies of a bubble by exact radial reduction and adaptive 1-D quadrature.
///
/// In polar coordinates about the reflected pole (z, −1/λ) the gradient
/// energy reduces to an integral over the polar angle, and the boundary mass
/// to a radial integral over ℝ^{n−1}.
pub fn bubble_energy(b: &Bubble) -> Result<BubbleEnergy> {
    let n = b.n();
    let e = b.e();
    let c2 = b.prefactor().powi(2);
    let nf = n as f64;
    let tol = Tolerance::new(1e-15, 1e-13);
    let angular = integrate(
        |th: f64| (th.cos() * th.sin()).powf(nf - 2.0),
        0.0,
        PI / 2.0,
        &[],
        tol,
    )?;
    let h1 = c2 * (nf - 2.0) * sphere_area(n - 1) * angular.value;
    let l = b.lambda;
    let td = EscobarParams::new(n)?.two_dagger();
    let pref = b.prefactor().powf(td);
    let mass = radial_integral(
        |r| pref * (l / (1.0 + l * l * r * r)).powf(e * td),
        n - 1,
        1.0 / l,
        tol,
    )?;
    Ok(BubbleEnergy {
        h1_norm_sq: h1,
        boundary_mass: mass.value,
    })
}

/// Interaction quantity μ = min(λ₁/λ₂, λ₂/λ₁, 1/(λ₁λ₂|z₁ − z₂|²)).
pub fn interaction_mu(b1: &Bubble, b2: &Bubble) -> f64 {
    let r2: f64 = b1.z.iter().zip(&b2.z).map(|(a, b)| (a - b).powi(2)).sum();
    let q = b1.lambda / b2.lambda;
    let sep = if r2 == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (b1.lambda * b2.lambda * r2)
    };
    q.min(1.0 / q).min(sep).min(1.0)
}

/// Rescales the pair so that the first bubble becomes U[0, 1]; returns the moved second bubble.
pub fn normalize_pair(b1: &Bubble, b2: &Bubble) -> Bubble {
    Bubble {
        z: b2
            .z
            .iter()
            .zip(&b1.z)
            .map(|(a, c)| b1.lambda * (a - c))
            .collect(),
        lambda: b2.lambda / b1.lambda,
    }
}

/// Integral over ℝ^{n−1} of a function concentrated near a few bubbles.
///
/// The integrand is split by the smooth partition of unity
/// w_i = ψ_i²/Σψ_j² with ψ_i = λ_i/(1 + λ_i²|x − z_i|²), and each piece is
/// integrated in polar coordinates about its own center.
pub fn boundary_integral<F: Fn(&[f64]) -> f64 + Sync>(
    f: F,
    bubbles: &[Bubble],
    tol: Tolerance,
) -> Result<f64> {
    let k = bubbles[0].z.len();
    let psi = |b: &Bubble, x: &[f64]| -> f64 {
        let r2: f64 = x.iter().zip(&b.z).map(|(a, c)| (a - c).powi(2)).sum();
        (b.lambda / (1.0 + b.lambda * b.lambda * r2)).powi(2)
    };
    let mut total = 0.0;
    for (i, bi) in bubbles.iter().enumerate() {
        let piece = |x: &[f64]| -> f64 {
            if bubbles.len() == 1 {
                return f(x);
            }
            let wi = psi(bi, x);
            let s: f64 = bubbles.iter().map(|b| psi(b, x)).sum();
            if wi == 0.0 {
                0.0
            } else {
                f(x) * wi / s
            }
        };
        let mut rbreaks = Vec::new();
        let mut abreaks = Vec::new();
        for (j, bj) in bubbles.iter().enumerate() {
            if j == i {
                continue;
            }
            let d: f64 =
                bj.z.iter()
                    .zip(&bi.z)
                    .map(|(a, c)| (a - c).powi(2))
                    .sum::<f64>()
                    .sqrt();
            let w = 1.0 / bj.lambda;
            rbreaks.extend([0.5 * d, (d - w).max(0.0), d, d + w]);
            if k == 2 && d > 0.0 {
                let th = (bj.z[1] - bi.z[1])
                    .atan2(bj.z[0] - bi.z[0])
                    .rem_euclid(2.0 * PI);
                abreaks.push(th);
            }
        }
        let res = polar_integral_within(
            piece,
            &bi.z,
            None,
            24,
            &abreaks,
            &rbreaks,
            1.0 / bi.lambda,
            tol,
        )?;
        total += res.value;
    }
    Ok(total)
}

/// Boundary interaction ∫_{ℝ^{n−1}} U₁^{γ₁} U₂^{γ₂} with γ₁ + γ₂ = 2†.
///
/// The pair is first rescaled so that the first bubble is U[0, 1].
pub fn interaction_integral(b1: &Bubble, b2: &Bubble, gamma1: f64, gamma2: f64) -> Result<f64> {
    let n = b1.n();
    if b2.n() != n {
        return Err(TslError::Parameter(
            "bubbles live in different dimensions".into(),
        ));
    }
    let td = EscobarParams::new(n)?.two_dagger();
    if !(gamma1 > 0.0 && gamma2 > 0.0) || (gamma1 + gamma2 - td).abs() > 1e-12 {
        return Err(TslError::Parameter(format!(
            "exponents ({gamma1}, {gamma2}) must be positive with sum 2(n-1)/(n-2) = {td}"
        )));
    }
    let u1 = Bubble::standard(n);
    let u2 = normalize_pair(b1, b2);
    let f = |x: &[f64]| u1.boundary_value(x).powf(gamma1) * u2.boundary_value(x).powf(gamma2);
    boundary_integral(f, &[u1.clone(), u2.clone()], Tolerance::new(1e-12, 1e-10))
}

/// Interaction ∫ U₁^{γ₁}U₂^{γ₂} restricted to the boundary ball B(z₁, λ₁⁻¹).
pub fn interaction_integral_near_first(
    b1: &Bubble,
    b2: &Bubble,
    gamma1: f64,
    gamma2: f64,
) -> Result<f64> {
    let n = b1.n();
    let u1 = Bubble::standard(n);
    let u2 = normalize_pair(b1, b2);
    let d: f64 = u2.z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f = |x: &[f64]| u1.boundary_value(x).powf(gamma1) * u2.boundary_value(x).powf(gamma2);
    let mut abreaks = Vec::new();
    if u2.z.len() == 2 && d > 0.0 {
        abreaks.push(u2.z[1].atan2(u2.z[0]).rem_euclid(2.0 * PI));
    }
    let rb = [d, (d - 1.0 / u2.lambda).max(0.0), d + 1.0 / u2.lambda];
    Ok(polar_integral_within(
        f,
        &u1.z,
        Some(1.0),
        24,
        &abreaks,
        &rb,
        1.0,
        Tolerance::new(1e-13, 1e-10),
    )?
    .value)
}

/// Coefficient-weighted family of bubbles σ = Σ α_i U[z_i, λ_i].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleFamily {
    /// Ambient dimension.
    pub n: usize,
    /// The bubbles.
    pub bubbles: Vec<Bubble>,
    /// Positive coefficients α_i.
    pub coefficients: Vec<f64>,
}

impl BubbleFamily {
    /// Validates a family: nonempty, matching dimensions, positive coefficients.
    pub fn new(n: usize, bubbles: Vec<Bubble>, coefficients: Vec<f64>) -> Result<Self> {
        let fam = BubbleFamily {
            n,
            bubbles,
            coefficients,
        };
        fam.validate()?;
        Ok(fam)
    }

    /// Checks the family invariants.
    pub fn validate(&self) -> Result<()> {
        if self.bubbles.is_empty() {
            return Err(TslError::Parameter("bubble family is empty".into()));
        }
        if self.bubbles.len() != self.coefficients.len() {
            return Err(TslError::Parameter(format!(
                "{} bubbles but {} coefficients",
                self.bubbles.len(),
                self.coefficients.len()
            )));
        }
        for b in &self.bubbles {
            Bubble::new(b.z.clone(), b.lambda)?;
            if b.n() != self.n {
                return Err(TslError::Parameter(format!(
                    "bubble of dimension {} in family of dimension {}",
                    b.n(),
                    self.n
                )));
            }
        }
        if let Some(c) = self
            .coefficients
            .iter()
            .find(|c| !(**c > 0.0 && c.is_finite()))
        {
            return Err(TslError::Parameter(format!(
                "coefficient {c} must be positive"
            )));
        }
        Ok(())
    }

    /// Boundary value of σ at x.
    pub fn boundary_value(&self, x: &[f64]) -> f64 {
        self.bubbles
            .iter()
            .zip(&self.coefficients)
            .map(|(b, a)| a * b.boundary_value(x))
            .sum()
    }

    /// Parses the JSON document {n, bubbles: [{z, lambda}], coefficients}.
    pub fn from_json(text: &str) -> Result<Self> {
        let fam: BubbleFamily = serde_json::from_str(text)
            .map_err(|e| TslError::Input(format!("bubble family JSON: {e}")))?;
        fam.validate()?;
        Ok(fam)
    }

    /// Serializes to the JSON document format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("family serializes")
    }
}

/// Outcome of a δ-interaction check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheck {
    /// True when every μ_ij ≤ δ and every |α_i − 1| ≤ δ.
    pub is_delta_interacting: bool,
    /// The worst violation or, when none, the largest quantity.
    pub worst: WorstEntry,
    /// Σ α_i² S_E^{n−1}.
    pub energy_sum: f64,
}

/// The quantity that decides a δ-interaction check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WorstEntry {
    /// No pairs and no coefficient deviation.
    None,
    /// Pair (i, j) with interaction μ.
    Pair { i: usize, j: usize, mu: f64 },
    /// Coefficient index with deviation |α_i − 1|.
    Coefficient { i: usize, deviation: f64 },
}

/// Checks whether a family is δ-interacting.
pub fn family_check(fam: &BubbleFamily, delta: f64) -> Result<FamilyCheck> {
    fam.validate()?;
    if !(delta > 0.0) {
        return Err(TslError::Parameter(format!(
            "delta = {delta} must be positive"
        )));
    }
    let mut worst = WorstEntry::None;
    let mut worst_val = f64::NEG_INFINITY;
    for (i, a) in fam.coefficients.iter().enumerate() {
        let dev = (a - 1.0).abs();
        if dev > worst_val && (dev > 0.0 || fam.bubbles.len() == 1) {
            worst_val = dev;
            worst = WorstEntry::Coefficient { i, deviation: dev };
        }
    }
    for i in 0..fam.bubbles.len() {
        for j in i + 1..fam.bubbles.len() {
            let mu = interaction_mu(&fam.bubbles[i], &fam.bubbles[j]);
            if mu > worst_val {
                worst_val = mu;
                worst = WorstEntry::Pair { i, j, mu };
            }
        }
    }
    if worst_val == 0.0 && fam.bubbles.len() == 1 {
        worst = WorstEntry::None;
    }
    let se = escobar_constant(fam.n)?;
    let energy_sum =
        fam.coefficients.iter().map(|a| a * a).sum::<f64>() * se.powf(fam.n as f64 - 1.0);
    Ok(FamilyCheck {
        is_delta_interacting: worst_val <= delta,
        worst,
        energy_sum,
    })
}

/// Logarithmic cut-off φ_{x₀,r,R}: 1 inside radius r, 0 beyond R and
/// (ln R − ln|x − x₀|)/(ln R − ln r) in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCutoff {
    /// Center x₀ ∈ ℝ^n (on the boundary for every cut-off used here).
    pub center: Vec<f64>,
    /// Inner radius r.
    pub inner: f64,
    /// Outer radius R.
    pub outer: f64,
}

impl LogCutoff {
    /// Validates 0 < r < R.
    pub fn new(center: Vec<f64>, inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner && outer.is_finite()) {
            return Err(TslError::Parameter(format!(
                "cut-off radii must satisfy 0 < r = {inner} < R = {outer}"
            )));
        }
        Ok(LogCutoff {
            center,
            inner,
            outer,
        })
    }

    /// φ at a point of ℝ^n.
    pub fn eval(&self, p: &[f64]) -> f64 {
        let d: f64 = p
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if d <= self.inner {
            1.0
        } else if d >= self.outer {
            0.0
        } else {
            (self.outer.ln() - d.ln()) / (self.outer.ln() - self.inner.ln())
        }
    }

    /// ‖∇φ‖_{L^n(ℝ^n_+)} for a boundary center: (|S^{n−1}|/2)^{1/n} ln(R/r)^{(1−n)/n}.
    pub fn gradient_ln_norm(&self) -> f64 {
        let n = self.center.len();
        let nf = n as f64;
        (sphere_area(n) / 2.0).powf(1.0 / nf) * (self.outer / self.inner).ln().powf((1.0 - nf) / nf)
    }
}

/// Composite cut-off Φ = φ_main · Π_j (1 − φ_j) in normalized coordinates of one bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeCutoff {
    /// Index of the bubble normalized to U[0, 1].
    pub bubble: usize,
    /// Main cut-off centered at the origin.
    pub main: LogCutoff,
    /// Excision cut-offs around more concentrated nearby bubbles (the index set J).
    pub excisions: Vec<(usize, LogCutoff)>,
}

impl CompositeCutoff {
    /// Φ at a point of the normalized half-space.
    pub fn eval(&self, p: &[f64]) -> f64 {
        self.excisions
            .iter()
            .fold(self.main.eval(p), |acc, (_, c)| acc * (1.0 - c.eval(p)))
    }
}

/// Verification of the four localization properties for one bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffCheck {
    /// Lower bound of the boundary mass of U on {Φ = 1}, divided by S_E^{n−1}.
    pub mass_fraction: f64,
    /// Property (1): mass fraction ≥ 1 − ε.
    pub mass_ok: bool,
    /// Largest ratio U_j/U_i over the boundary part of the support, over j ≠ i.
    pub max_ratio: f64,
    /// Property (2): max_ratio < ε.
    pub dominance_ok: bool,
    /// Triangle-inequality bound on ‖∇Φ‖_{L^n}.
    pub gradient_bound: f64,
    /// Property (3): gradient bound ≤ ε.
    pub gradient_ok: bool,
    /// Largest sup/inf ratio of U_j over the support, over j with λ_j ≤ λ_i.
    pub max_oscillation: f64,
    /// Property (4): max_oscillation < 1 + ε.
    pub oscillation_ok: bool,
}

/// Cut-offs for every bubble of a family with their verification reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    /// Localization parameter ε.
    pub epsilon: f64,
    /// Logarithmic width ln(R/r) shared by all annuli.
    pub log_width: f64,
    /// One composite cut-off per bubble, in that bubble's normalized coordinates.
    pub cutoffs: Vec<CompositeCutoff>,
    /// One verification report per bubble.
    pub checks: Vec<CutoffCheck>,
    /// Names of violated properties, formatted as "bubble i: property (k)".
    pub violations: Vec<String>,
}

/// Boundary mass of U[0,1] inside radius r, by adaptive radial quadrature.
fn mass_within(n: usize, r: f64) -> Result<f64> {
    let b = Bubble::standard(n);
    let td = EscobarParams::new(n)?.two_dagger();
    let area = sphere_area(n - 1);
    let v = integrate(
        |s: f64| {
            s.powi(n as i32 - 2)
                * b.boundary_value(&{
                    let mut x = vec![0.0; n - 1];
                    x[0] = s;
                    x
                })
                .powf(td)
        },
        0.0,
        r,
        &[1.0],
        Tolerance::new(1e-14, 1e-12),
    )?;
    Ok(area * v.value)
}

/// Builds the localization cut-offs of a family and verifies their properties.
///
/// For each bubble, coordinates are rescaled so that it becomes U[0, 1]. The
/// inner radius r of the main cut-off captures mass (1 − ε/2)S_E^{n−1}. All
/// annuli share the logarithmic width Λ = ln(R/r) chosen so that the
/// triangle-inequality bound on ‖∇Φ‖_{L^n} is ε. More concentrated bubbles
/// near the support are excised by balls whose radius makes them ε/2-dominated.
pub fn localization_cutoffs(fam: &BubbleFamily, epsilon: f64) -> Result<LocalizationReport> {
    fam.validate()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(TslError::Parameter(format!(
            "epsilon = {epsilon} must lie in (0, 1)"
        )));
    }
    let n = fam.n;
    let nu = fam.bubbles.len();
    let mut max_mu: f64 = 0.0;
    for i in 0..nu {
        for j in i + 1..nu {
            max_mu = max_mu.max(interaction_mu(&fam.bubbles[i], &fam.bubbles[j]));
        }
    }
    if max_mu > epsilon {
        return Err(TslError::Precondition(format!(
            "family interaction mu = {max_mu:.3e} exceeds epsilon = {epsilon}; the bubbles are not separated enough to localize"
        )));
    }
    let nf = n as f64;
    let e = (nf - 2.0) / 2.0;
    let total = escobar_constant(n)?.powf(nf - 1.0);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while mass_within(n, hi)? < (1.0 - epsilon / 2.0) * total {
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mass_within(n, mid)? < (1.0 - epsilon / 2.0) * total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_in = hi;
    let factors = 1
        + (0..nu)
            .map(|i| {
                (0..nu)
                    .filter(|&j| j != i && fam.bubbles[j].lambda > fam.bubbles[i].lambda)
                    .count()
            })
            .max()
            .unwrap_or(0);
    let gauge = (sphere_area(n) / 2.0).powf(1.0 / nf);
    let log_width = (gauge * factors as f64 / epsilon).powf(nf / (nf - 1.0));
    let r_out = r_in * log_width.exp();
    let profile = |lambda: f64, d: f64| -> f64 {
        (2.0 * e).powf(e) * (lambda / (1.0 + lambda * lambda * d * d)).powf(e)
    };

    let mut cutoffs = Vec::new();
    let mut checks = Vec::new();
    let mut violations = Vec::new();
    for i in 0..nu {
        let bi = &fam.bubbles[i];
        let main = LogCutoff::new(vec![0.0; n], r_in, r_out)?;
        let mut excisions = Vec::new();
        let mut mass_loss = 0.0;
        let mut max_ratio: f64 = 0.0;
        let mut max_osc: f64 = 1.0;
        let u_min = profile(1.0, r_out);
        for (j, bj) in fam.bubbles.iter().enumerate() {
            if j == i {
                continue;
            }
            let moved = normalize_pair(bi, bj);
            let dist: f64 = moved.z.iter().map(|v| v * v).sum::<f64>().sqrt();
            if moved.lambda > 1.0 && dist < 2.0 * r_out {
                let target = 0.5 * epsilon * u_min;
                let rj = (((2.0 * e).powf(e) / target).powf(1.0 / e) / moved.lambda).sqrt();
                let mut c = moved.z.clone();
                c.push(0.0);
                let cut = LogCutoff::new(c, rj, rj * log_width.exp())?;
                let outer_r = cut.outer;
                mass_loss += crate::special::ball_volume(n - 1)
                    * outer_r.powi(n as i32 - 1)
                    * profile(1.0, 0.0).powf(2.0 * (nf - 1.0) / (nf - 2.0));
                max_ratio = max_ratio.max(profile(moved.lambda, rj) / u_min);
                excisions.push((j, cut));
            } else {
                let dmin = (dist - r_out).max(0.0);
                max_ratio = max_ratio.max(profile(moved.lambda, dmin) / u_min);
                if moved.lambda <= 1.0 {
                    let dmax = dist + r_out;
                    max_osc =
                        max_osc.max(profile(moved.lambda, dmin) / profile(moved.lambda, dmax));
                }
            }
        }
        let mass_fraction = (mass_within(n, r_in)? - mass_loss) / total;
        let gradient_bound = (1 + excisions.len()) as f64 * main.gradient_ln_norm();
        let check = CutoffCheck {
            mass_fraction,
            mass_ok: mass_fraction >= 1.0 - epsilon,
            max_ratio,
            dominance_ok: max_ratio < epsilon,
            gradient_bound,
            gradient_ok: gradient_bound <= epsilon * (1.0 + 1e-12),
            max_oscillation: max_osc,
            oscillation_ok: max_osc < 1.0 + epsilon,
        };
        for (ok, k) in [
            (check.mass_ok, 1),
            (check.dominance_ok, 2),
            (check.gradient_ok, 3),
            (check.oscillation_ok, 4),
        ] {
            if !ok {
                violations.push(format!("bubble {i}: property ({k})"));
            }
        }
        cutoffs.push(CompositeCutoff {
            bubble: i,
            main,
            excisions,
        });
        checks.push(check);
    }
    Ok(LocalizationReport {
        epsilon,
        log_width,
        cutoffs,
        checks,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bubble_plug_in_values() {
        let b = Bubble::standard(3);
        let ev = eval_bubble(&b, &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(ev.value, 1.0);
        assert!((ev.d_lambda - 0.5).abs() < 1e-15);
        assert!((b.boundary_value(&[1.0, 0.0]) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(eval_bubble(&b, &[0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn mu_examples() {
        let a = Bubble::new(vec![0.0, 0.0], 100.0).unwrap();
        let b = Bubble::new(vec![0.0, 0.0], 1.0).unwrap();
        assert!((interaction_mu(&a, &b) - 0.01).abs() < 1e-15);
        let c = Bubble::new(vec![10.0, 0.0], 1.0).unwrap();
        assert!((interaction_mu(&b, &c) - 0.01).abs() < 1e-15);
        assert_eq!(interaction_mu(&b, &b), 1.0);
    }

    #[test]
    fn log_cutoff_midpoint() {
        let c = LogCutoff::new(vec![0.0, 0.0, 0.0], 1.0, 4.0).unwrap();
        assert!((c.eval(&[2.0, 0.0, 0.0]) - 0.5).abs() < 1e-15);
    }
}
