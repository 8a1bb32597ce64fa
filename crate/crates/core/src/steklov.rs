//! Conformal dictionary between the half-space ℝ^n_+ and the unit ball,
//! solid-harmonic bases, Steklov decompositions and the spectral-gap quotient.

use crate::bubbles::Bubble;
use crate::constants::{harmonic_dimension, EscobarParams};
use crate::error::{Result, TslError};
use crate::poly::Poly;
use crate::quadrature::SphereRule;
use serde::{Deserialize, Serialize};

/// Direction of the conformal map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapDirection {
    /// F: 𝔹^n → ℝ^n_+.
    BallToHalf,
    /// F⁻¹: ℝ^n_+ → 𝔹^n.
    HalfToBall,
}

/// F(y) = (2y′, 1 − |y|²)/((1 + y_n)² + |y′|²) for a ball point y.
pub fn ball_to_half(y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    let r2: f64 = y.iter().map(|v| v * v).sum();
    if r2 > 1.0 + 1e-12 {
        return Err(TslError::Domain(format!("|y|^2 = {r2} exceeds 1")));
    }
    let d = (1.0 + y[n - 1]).powi(2) + y[..n - 1].iter().map(|v| v * v).sum::<f64>();
    if d == 0.0 {
        return Err(TslError::Domain("the south pole maps to infinity".into()));
    }
    let mut out: Vec<f64> = y[..n - 1].iter().map(|v| 2.0 * v / d).collect();
    out.push(((1.0 - r2) / d).max(0.0));
    Ok(out)
}

/// F⁻¹(x, t) = (2x, 1 − t² − |x|²)/((1 + t)² + |x|²) for a half-space point.
pub fn half_to_ball(p: &[f64]) -> Result<Vec<f64>> {
    let n = p.len();
    let t = p[n - 1];
    if !(t >= 0.0) {
        return Err(TslError::Domain(format!(
            "t = {t} lies outside the closed half-space"
        )));
    }
    Ok(half_to_ball_unchecked(&p[..n - 1], t))
}

fn half_to_ball_unchecked(x: &[f64], t: f64) -> Vec<f64> {
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let d = (1.0 + t).powi(2) + x2;
    let mut out: Vec<f64> = x.iter().map(|v| 2.0 * v / d).collect();
    out.push((1.0 - t * t - x2) / d);
    out
}

/// Jacobian ∂(F⁻¹)_i/∂w_j of F⁻¹ at w = (x, t), as rows i.
pub fn half_to_ball_jacobian(x: &[f64], t: f64) -> Vec<Vec<f64>> {
    let k = x.len();
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let d = (1.0 + t).powi(2) + x2;
    let num = 1.0 - t * t - x2;
    let mut jac = vec![vec![0.0; k + 1]; k + 1];
    for i in 0..k {
        for j in 0..k {
            jac[i][j] = if i == j { 2.0 / d } else { 0.0 } - 4.0 * x[i] * x[j] / (d * d);
        }
        jac[i][k] = -4.0 * x[i] * (1.0 + t) / (d * d);
    }
    for j in 0..k {
        jac[k][j] = -2.0 * x[j] / d - 2.0 * num * x[j] / (d * d);
    }
    jac[k][k] = -2.0 * t / d - 2.0 * num * (1.0 + t) / (d * d);
    jac
}

/// Applies F or F⁻¹ to a list of points; any point outside the domain is an error.
pub fn map_points(direction: MapDirection, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    points
        .iter()
        .map(|p| match direction {
            MapDirection::BallToHalf => ball_to_half(p),
            MapDirection::HalfToBall => half_to_ball(p),
        })
        .collect()
}

/// 𝓕[φ](y) = φ(F(y))/U[0,1](F(y)) for a half-space function φ(x, t).
pub fn transport_to_ball<'a, G: Fn(&[f64], f64) -> f64 + 'a>(
    phi: G,
    n: usize,
) -> impl Fn(&[f64]) -> f64 + 'a {
    let u = Bubble::standard(n);
    move |y: &[f64]| {
        let p = ball_to_half(y).expect("ball point");
        let (x, t) = p.split_at(n - 1);
        phi(x, t[0]) / u.value(x, t[0])
    }
}

/// 𝓕⁻¹[ψ](x, t) = U[0,1](x, t)·ψ(F⁻¹(x, t)) for a ball function ψ.
pub fn transport_from_ball<'a, G: Fn(&[f64]) -> f64 + 'a>(
    psi: G,
    n: usize,
) -> impl Fn(&[f64], f64) -> f64 + 'a {
    let u = Bubble::standard(n);
    move |x: &[f64], t: f64| u.value(x, t) * psi(&half_to_ball_unchecked(x, t))
}

/// A half-space harmonic function represented as 𝓕⁻¹[P] for a ball polynomial P.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportedPoly {
    /// The ball polynomial P.
    pub poly: Poly,
    grad: Vec<Poly>,
    bubble: Bubble,
}

impl TransportedPoly {
    /// Wraps a polynomial in n variables.
    pub fn new(poly: Poly) -> Self {
        let n = poly.n;
        TransportedPoly {
            grad: poly.gradient(),
            poly,
            bubble: Bubble::standard(n),
        }
    }

    /// Value 𝓕⁻¹[P](x, t).
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        self.bubble.value(x, t) * self.poly.eval(&half_to_ball_unchecked(x, t))
    }

    /// Boundary trace at t = 0.
    pub fn trace(&self, x: &[f64]) -> f64 {
        self.value(x, 0.0)
    }

    /// Gradient in (x, t) by the chain rule through F⁻¹.
    pub fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        let y = half_to_ball_unchecked(x, t);
        let ev = crate::bubbles::eval_bubble(&self.bubble, x, t).expect("half-space point");
        let pv = self.poly.eval(&y);
        let gp: Vec<f64> = self.grad.iter().map(|g| g.eval(&y)).collect();
        let jac = half_to_ball_jacobian(x, t);
        (0..y.len())
            .map(|j| {
                pv * ev.gradient[j]
                    + ev.value * (0..y.len()).map(|i| gp[i] * jac[i][j]).sum::<f64>()
            })
            .collect()
    }
}

/// Orthonormal bases of the degree-k solid harmonics for k = 0..=K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolidHarmonicBasis {
    /// Dimension n.
    pub n: usize,
    /// Largest degree K.
    pub max_degree: usize,
    /// Per degree, polynomials orthonormal in L²(S^{n−1}).
    pub degrees: Vec<Vec<Poly>>,
}

fn monomials_of_degree(n: usize, k: u32) -> Vec<Vec<u32>> {
    if n == 1 {
        return vec![vec![k]];
    }
    let mut out = Vec::new();
    for first in (0..=k).rev() {
        for mut rest in monomials_of_degree(n - 1, k - first) {
            let mut e = vec![first];
            e.append(&mut rest);
            out.push(e);
        }
    }
    out
}

/// Builds orthonormal solid-harmonic bases up to degree K by Gram–Schmidt on
/// harmonic projections of the monomials whose last exponent is 0 or 1.
pub fn build_basis(n: usize, max_degree: usize) -> Result<SolidHarmonicBasis> {
    EscobarParams::new(n)?;
    if max_degree > 8 {
        return Err(TslError::Parameter(format!(
            "maximal degree K = {max_degree} exceeds 8"
        )));
    }
    let mut degrees = Vec::new();
    for k in 0..=max_degree as u32 {
        let mut ortho: Vec<Poly> = Vec::new();
        for e in monomials_of_degree(n, k) {
            if e[n - 1] > 1 {
                continue;
            }
            let mut h = Poly::monomial(e, 1.0).harmonic_projection();
            for _ in 0..2 {
                for q in &ortho {
                    let c = h.sphere_inner(q);
                    h = h.sub(&q.scale(c));
                }
            }
            let norm = h.sphere_inner(&h).sqrt();
            if !(norm > 1e-8) {
                return Err(TslError::Construction(format!(
                    "rank deficiency in degree {k} of the solid-harmonic basis"
                )));
            }
            ortho.push(h.scale(1.0 / norm));
        }
        let expected = harmonic_dimension(n, k as usize);
        if ortho.len() != expected {
            return Err(TslError::Construction(format!(
                "degree {k}: built {} basis functions, expected {expected}",
                ortho.len()
            )));
        }
        degrees.push(ortho);
    }
    Ok(SolidHarmonicBasis {
        n,
        max_degree,
        degrees,
    })
}

impl SolidHarmonicBasis {
    /// Exports the basis as JSON: degree → list of monomial-coefficient tables.
    pub fn to_json(&self) -> String {
        let doc = serde_json::json!({
            "n": self.n,
            "max_degree": self.max_degree,
            "degrees": self.degrees.iter().enumerate().map(|(k, list)| serde_json::json!({
                "degree": k,
                "polynomials": list.iter().map(|p| p.coefficient_table().into_iter()
                    .map(|(e, c)| serde_json::json!({"exponents": e, "coefficient": c}))
                    .collect::<Vec<_>>()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&doc).expect("basis serializes")
    }

    /// Largest deviation of a per-degree Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for list in &self.degrees {
            for (i, a) in list.iter().enumerate() {
                for (j, b) in list.iter().enumerate() {
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((a.sphere_inner(b) - target).abs());
                }
            }
        }
        worst
    }
}

/// Degree-wise Steklov decomposition of a harmonic field on the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteklovDecomposition {
    /// Coefficients in the orthonormal E_k basis, for k = 0..=K.
    pub components: Vec<Vec<f64>>,
    /// H¹(ℝ^n_+) norm of each degree component.
    pub component_norms: Vec<f64>,
    /// H¹ norm of the trace-zero interior part, when a probe value was supplied.
    pub interior_norm: f64,
    /// H¹ estimate of the part of the trace beyond degree K.
    pub truncation_residual: f64,
    /// L²(S^{n−1}) norm of the input boundary function.
    pub boundary_norm: f64,
    /// Set when the truncation residual exceeds 10% of the norm.
    pub warning: Option<String>,
}

impl SteklovDecomposition {
    /// Σ_k ‖component_k‖²_{H¹} + interior² + residual².
    pub fn total_norm_sq(&self) -> f64 {
        self.component_norms.iter().map(|v| v * v).sum::<f64>()
            + self.interior_norm.powi(2)
            + self.truncation_residual.powi(2)
    }

    /// Squared L²(S) mass of degree k.
    pub fn degree_mass(&self, k: usize) -> f64 {
        self.components[k].iter().map(|c| c * c).sum()
    }
}

/// H¹(ℝ^n_+) norm² of 𝓕⁻¹[r^k Y] per unit ‖Y‖²_{L²(S)}: c^{n−2}(k + c), c = (n−2)/2.
pub fn degree_weight(n: usize, k: usize) -> f64 {
    let c = (n as f64 - 2.0) / 2.0;
    c.powf(n as f64 - 2.0) * (k as f64 + c)
}

fn finish_decomposition(
    n: usize,
    components: Vec<Vec<f64>>,
    boundary_norm_sq: f64,
    interior: Option<f64>,
) -> SteklovDecomposition {
    let k_max = components.len() - 1;
    let captured: f64 = components
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let component_norms: Vec<f64> = components
        .iter()
        .enumerate()
        .map(|(k, c)| (degree_weight(n, k) * c.iter().map(|v| v * v).sum::<f64>()).sqrt())
        .collect();
    // Differences at the rounding level of the norm are treated as zero before the square root.
    let raw = boundary_norm_sq - captured;
    let leftover = if raw <= 1e-12 * boundary_norm_sq {
        0.0
    } else {
        raw
    };
    let truncation_residual = (degree_weight(n, k_max + 1) * leftover).sqrt();
    let total: f64 =
        component_norms.iter().map(|v| v * v).sum::<f64>() + truncation_residual.powi(2);
    let warning = if truncation_residual > 0.1 * total.sqrt() {
        Some(format!(
            "truncation residual {truncation_residual:.3e} exceeds 10% of the norm; raise the maximal degree above {k_max}"
        ))
    } else {
        None
    };
    SteklovDecomposition {
        components,
        component_norms,
        interior_norm: interior.unwrap_or(0.0),
        truncation_residual,
        boundary_norm: boundary_norm_sq.sqrt(),
        warning,
    }
}

/// Decomposes a boundary function on S^{n−1} into the E_k components of
/// `basis`, using a product sphere rule exact for polynomials of degree
/// 2K + 4 (raised to `extra_degree` when given).
pub fn steklov_decompose<F: Fn(&[f64]) -> f64>(
    boundary: F,
    basis: &SolidHarmonicBasis,
    interior_probe: Option<f64>,
    extra_degree: Option<usize>,
) -> SteklovDecomposition {
    let deg = extra_degree.unwrap_or(0).max(2 * basis.max_degree + 4);
    let rule = SphereRule::product(basis.n, deg);
    let values: Vec<f64> = rule.nodes.iter().map(|y| boundary(y)).collect();
    let norm_sq: f64 = values
        .iter()
        .zip(&rule.weights)
        .map(|(v, w)| w * v * v)
        .sum();
    let components = basis
        .degrees
        .iter()
        .map(|list| {
            list.iter()
                .map(|q| {
                    rule.nodes
                        .iter()
                        .zip(&rule.weights)
                        .zip(&values)
                        .map(|((y, w), v)| w * v * q.eval(y))
                        .sum()
                })
                .collect()
        })
        .collect();
    finish_decomposition(basis.n, components, norm_sq, interior_probe)
}

/// Exact decomposition of the boundary values of a polynomial, via monomial integrals.
pub fn steklov_decompose_poly(
    p: &Poly,
    basis: &SolidHarmonicBasis,
    interior_probe: Option<f64>,
) -> SteklovDecomposition {
    let components = basis
        .degrees
        .iter()
        .map(|list| list.iter().map(|q| p.sphere_inner(q)).collect())
        .collect();
    finish_decomposition(basis.n, components, p.sphere_inner(p), interior_probe)
}

/// ‖ρ‖²_{H¹(ℝ^n_+)}/∫_{ℝ^{n−1}} U^{p−1}ρ² for the harmonic ρ with the given
/// degree masses, i.e. Σ κ_k m_k / Σ m_k.
fn quotient_from_decomposition(n: usize, dec: &SteklovDecomposition) -> Result<f64> {
    let e = EscobarParams::new(n)?;
    let total: f64 = (0..dec.components.len()).map(|k| dec.degree_mass(k)).sum();
    if !(total > 0.0) {
        return Err(TslError::Parameter("the direction is zero".into()));
    }
    let tangent = dec.degree_mass(0) + dec.components.get(1).map_or(0.0, |_| dec.degree_mass(1));
    if tangent.sqrt() > 1e-10 * total.sqrt() {
        return Err(TslError::Precondition(format!(
            "direction is not orthogonal to the tangent space: degree-0 mass {:.3e}, degree-1 mass {:.3e}, total {:.3e}",
            dec.degree_mass(0),
            dec.degree_mass(1),
            total
        )));
    }
    let num: f64 = (0..dec.components.len())
        .map(|k| e.kappa(k) * dec.degree_mass(k))
        .sum();
    Ok(num / total)
}

/// Spectral-gap quotient of the harmonic extension of a ball polynomial's boundary values.
pub fn spectral_gap_quotient_poly(p: &Poly, basis: &SolidHarmonicBasis) -> Result<f64> {
    if p.degree() as usize > basis.max_degree {
        return Err(TslError::Parameter(format!(
            "polynomial degree {} exceeds the basis degree {}",
            p.degree(),
            basis.max_degree
        )));
    }
    quotient_from_decomposition(basis.n, &steklov_decompose_poly(p, basis, None))
}

/// Spectral-gap quotient of the harmonic ρ with a given boundary trace on ℝ^{n−1}.
///
/// The trace is transported to the sphere by 𝓕 and decomposed with `basis`.
pub fn spectral_gap_quotient<F: Fn(&[f64]) -> f64>(
    trace: F,
    basis: &SolidHarmonicBasis,
) -> Result<f64> {
    let n = basis.n;
    let u = Bubble::standard(n);
    let on_sphere = |y: &[f64]| -> f64 {
        let d = (1.0 + y[n - 1]).powi(2) + y[..n - 1].iter().map(|v| v * v).sum::<f64>();
        if d < 1e-300 {
            return 0.0;
        }
        let x: Vec<f64> = y[..n - 1].iter().map(|v| 2.0 * v / d).collect();
        trace(&x) / u.boundary_value(&x)
    };
    let dec = steklov_decompose(on_sphere, basis, None, Some(4 * basis.max_degree + 8));
    if let Some(w) = &dec.warning {
        return Err(TslError::Truncation(w.clone()));
    }
    quotient_from_decomposition(n, &dec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_plug_in_values() {
        assert_eq!(ball_to_half(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(ball_to_half(&[0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert!(ball_to_half(&[0.0, 0.0, -1.0]).is_err());
        assert!(half_to_ball(&[0.0, 0.0, -0.5]).is_err());
    }

    #[test]
    fn basis_counts() {
        let b = build_basis(3, 2).unwrap();
        let counts: Vec<usize> = b.degrees.iter().map(|d| d.len()).collect();
        assert_eq!(counts, vec![1, 3, 5]);
        assert!(b.gram_deviation() < 1e-12);
    }
}
