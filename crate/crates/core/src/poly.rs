//! Sparse multivariate polynomials with real coefficients: arithmetic,
//! derivatives, harmonic projection and exact sphere and ball integrals.

use crate::special::{ball_monomial_integral, sphere_monomial_integral};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A polynomial in `n` variables stored as exponent vector → coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    /// Number of variables.
    pub n: usize,
    /// Nonzero coefficients keyed by exponent vector.
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    /// The zero polynomial.
    pub fn zero(n: usize) -> Self {
        Poly {
            n,
            terms: BTreeMap::new(),
        }
    }

    /// The constant polynomial c.
    pub fn constant(n: usize, c: f64) -> Self {
        Poly::monomial(vec![0; n], c)
    }

    /// The monomial c·y^e.
    pub fn monomial(exps: Vec<u32>, c: f64) -> Self {
        let n = exps.len();
        let mut p = Poly::zero(n);
        if c != 0.0 {
            p.terms.insert(exps, c);
        }
        p
    }

    /// The coordinate function y_i.
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Poly::monomial(e, 1.0)
    }

    /// |y|² = Σ y_i².
    pub fn norm_sq(n: usize) -> Self {
        let mut p = Poly::zero(n);
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 2;
            p.terms.insert(e, 1.0);
        }
        p
    }

    /// Total degree (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Whether every monomial has total degree k.
    pub fn is_homogeneous(&self, k: u32) -> bool {
        self.terms.keys().all(|e| e.iter().sum::<u32>() == k)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(e).or_insert(0.0);
        *entry += c;
    }

    fn prune(mut self) -> Self {
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    /// self + other.
    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out.prune()
    }

    /// self − other.
    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    /// s·self.
    pub fn scale(&self, s: f64) -> Poly {
        Poly {
            n: self.n,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        }
        .prune()
    }

    /// self·other.
    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out.prune()
    }

    /// self^k for a nonnegative integer k.
    pub fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::constant(self.n, 1.0), |acc, _| acc.mul(self))
    }

    /// Evaluates at a point.
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(y)
                    .map(|(k, v)| v.powi(*k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// ∂/∂y_i.
    pub fn partial(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.n);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                out.add_term(f, c * e[i] as f64);
            }
        }
        out.prune()
    }

    /// Gradient as a list of polynomials.
    pub fn gradient(&self) -> Vec<Poly> {
        (0..self.n).map(|i| self.partial(i)).collect()
    }

    /// Laplacian Σ ∂²/∂y_i².
    pub fn laplacian(&self) -> Poly {
        let mut out = Poly::zero(self.n);
        for (e, c) in &self.terms {
            for i in 0..self.n {
                if e[i] >= 2 {
                    let mut f = e.clone();
                    f[i] -= 2;
                    out.add_term(f, c * (e[i] * (e[i] - 1)) as f64);
                }
            }
        }
        out.prune()
    }

    /// Homogeneous part of degree k.
    pub fn homogeneous_part(&self, k: u32) -> Poly {
        Poly {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() == k)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    /// Harmonic projection of a homogeneous polynomial of degree k: the
    /// unique harmonic h with P − h divisible by |y|².
    ///
    /// Uses h = Σ_j (−1)^j |y|^{2j} Δ^j P / (2^j j! Π_{i=1..j}(n + 2k − 2 − 2i)).
    pub fn harmonic_projection(&self) -> Poly {
        let k = self.degree() as i64;
        let n = self.n as i64;
        let r2 = Poly::norm_sq(self.n);
        let mut out = Poly::zero(self.n);
        let mut lap = self.clone();
        let mut rpow = Poly::constant(self.n, 1.0);
        let mut denom = 1.0;
        let mut j = 0i64;
        while !lap.terms.is_empty() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            out = out.add(&rpow.mul(&lap).scale(sign / denom));
            j += 1;
            lap = lap.laplacian();
            rpow = rpow.mul(&r2);
            denom *= 2.0 * j as f64 * (n + 2 * k - 2 - 2 * j) as f64;
        }
        out
    }

    /// ∫_{S^{n−1}} self dσ, exactly.
    pub fn sphere_integral(&self) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * sphere_monomial_integral(e))
            .sum()
    }

    /// ∫_{S^{n−1}} self·other dσ, exactly.
    pub fn sphere_inner(&self, other: &Poly) -> f64 {
        let mut s = 0.0;
        let mut e = vec![0u32; self.n];
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                if ea.iter().zip(eb).any(|(a, b)| (a + b) % 2 == 1) {
                    continue;
                }
                for i in 0..self.n {
                    e[i] = ea[i] + eb[i];
                }
                s += ca * cb * sphere_monomial_integral(&e);
            }
        }
        s
    }

    /// ∫_{B^n} self dy, exactly.
    pub fn ball_integral(&self) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * ball_monomial_integral(e))
            .sum()
    }

    /// ∫_{B^n} |∇self|² dy, exactly.
    pub fn ball_dirichlet_energy(&self) -> f64 {
        self.gradient()
            .iter()
            .map(|g| g.mul(g).ball_integral())
            .sum()
    }

    /// Coefficient table as a list of (exponents, coefficient) pairs.
    pub fn coefficient_table(&self) -> Vec<(Vec<u32>, f64)> {
        self.terms.iter().map(|(e, c)| (e.clone(), *c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_of_square() {
        let p = Poly::monomial(vec![2, 0, 0], 1.0).harmonic_projection();
        assert!(p.laplacian().max_abs_coefficient() < 1e-14);
        assert!((p.terms[&vec![2, 0, 0]] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.terms[&vec![0, 2, 0]] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn projection_is_harmonic_in_higher_degree() {
        let p = Poly::monomial(vec![3, 2, 1, 0], 1.0).harmonic_projection();
        assert!(p.laplacian().max_abs_coefficient() < 1e-12);
    }

    #[test]
    fn sphere_integrals() {
        let r2 = Poly::norm_sq(3);
        assert!((r2.sphere_integral() - 4.0 * std::f64::consts::PI).abs() < 1e-13);
        let y1 = Poly::coordinate(3, 0);
        assert!((y1.sphere_inner(&y1) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-13);
    }
}
