//! Quadrature rules: Gauss–Legendre and symmetric Gauss–Jacobi nodes,
//! adaptive Gauss–Kronrod integration on finite and half-infinite intervals,
//! product rules on spheres, and integrals over ℝ^k in polar coordinates.

use crate::error::{Result, TslError};
use crate::special::{gamma, sphere_area};
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Nodes and weights of the `n`-point Gauss rule for the weight (1 − x²)^a on [−1, 1].
///
/// Computed by the Golub–Welsch eigenvalue method; requires `a > −1/2`
/// so that the three-term recurrence has no removable singularity.
pub fn gauss_jacobi_symmetric(n: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && a > -0.5);
    if a == 0.0 {
        return gauss_legendre(n);
    }
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a + 1.0) * (2.0 * kf + 2.0 * a - 1.0));
        let s = b.sqrt();
        jm[(k, k - 1)] = s;
        jm[(k - 1, k)] = s;
    }
    let mu0 = PI.sqrt() * gamma(a + 1.0) / gamma(a + 1.5);
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// Kronrod nodes of the 15-point rule on [−1, 1] (nonnegative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
/// Kronrod weights matching [`XGK`].
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Embedded 7-point Gauss weights (at the odd Kronrod nodes).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Tolerances for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Absolute error target.
    pub abs: f64,
    /// Relative error target.
    pub rel: f64,
    /// Maximum number of panels.
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-13,
            rel: 1e-12,
            max_panels: 4000,
        }
    }
}

impl Tolerance {
    /// Tolerance with the given absolute and relative targets.
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            ..Default::default()
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    /// Integral estimate.
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
}

/// Adaptive Gauss–Kronrod integration of `f` over [a, b] with interior breakpoints.
///
/// Panels are bisected largest-error first until the global error estimate
/// meets the tolerance. Fails with an accuracy error when the panel budget is
/// exhausted.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a.min(b) && x < a.max(b))
        .collect();
    if b < a {
        inner.sort_by(|p, q| q.total_cmp(p));
    } else {
        inner.sort_by(|p, q| p.total_cmp(q));
    }
    pts.extend(inner);
    pts.push(b);
    let mut panels: Vec<(f64, f64, f64, f64)> = pts
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(TslError::Accuracy(
                "integrand produced a non-finite value".into(),
            ));
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(Integral {
                value: total,
                error: err,
            });
        }
        if panels.len() >= tol.max_panels {
            return Err(TslError::Accuracy(format!(
                "adaptive quadrature stopped at {} panels with error {err:.3e} (value {total:.6e})",
                panels.len()
            )));
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .3.total_cmp(&q.1 .3))
            .expect("nonempty panel list");
        let (a0, b0, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (a0 + b0);
        if mid == a0 || mid == b0 {
            return Err(TslError::Accuracy(
                "panel width reached machine resolution".into(),
            ));
        }
        let (v1, e1) = gk15(&f, a0, mid);
        let (v2, e2) = gk15(&f, mid, b0);
        panels.push((a0, mid, v1, e1));
        panels.push((mid, b0, v2, e2));
    }
}

/// Adaptive integration of `f` over [a, ∞).
///
/// Uses the substitution x = a + s·u/(1 − u) with u ∈ [0, 1); `scale` sets
/// the length scale `s` and the breakpoints are given in the original variable.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral> {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let om = 1.0 - u;
        let x = a + scale * u / om;
        let jac = scale / (om * om);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let ubreaks: Vec<f64> = breaks
        .iter()
        .filter(|&&x| x > a)
        .map(|&x| {
            let t = (x - a) / scale;
            t / (1.0 + t)
        })
        .collect();
    integrate(g, 0.0, 1.0, &ubreaks, tol)
}

/// A quadrature rule on the unit sphere S^{d−1} ⊂ ℝ^d.
#[derive(Debug, Clone)]
pub struct SphereRule {
    /// Ambient dimension d.
    pub dim: usize,
    /// Nodes, each a unit vector of length `dim`.
    pub nodes: Vec<Vec<f64>>,
    /// Weights; they sum to the surface measure of the sphere.
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Product Gauss rule on S^{d−1} exact for polynomials of total degree ≤ `degree`.
    ///
    /// The last coordinate uses a Gauss rule for the weight (1−u²)^{(d−3)/2}
    /// and the remaining coordinates recurse on the lower sphere scaled by
    /// √(1−u²). The circle uses equally spaced nodes.
    pub fn product(dim: usize, degree: usize) -> Self {
        assert!(dim >= 2, "sphere rules need ambient dimension at least 2");
        if dim == 2 {
            let m = degree + 1;
            let nodes = (0..m)
                .map(|j| {
                    let th = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect();
            return SphereRule {
                dim,
                nodes,
                weights: vec![2.0 * PI / m as f64; m],
            };
        }
        let lower = SphereRule::product(dim - 1, degree);
        let nu = degree / 2 + 1;
        let (us, ws) = gauss_jacobi_symmetric(nu, (dim as f64 - 3.0) / 2.0);
        let mut nodes = Vec::with_capacity(nu * lower.nodes.len());
        let mut weights = Vec::with_capacity(nu * lower.nodes.len());
        for (u, wu) in us.iter().zip(&ws) {
            let s = (1.0 - u * u).sqrt();
            for (node, wl) in lower.nodes.iter().zip(&lower.weights) {
                let mut p: Vec<f64> = node.iter().map(|c| c * s).collect();
                p.push(*u);
                nodes.push(p);
                weights.push(wu * wl);
            }
        }
        SphereRule {
            dim,
            nodes,
            weights,
        }
    }

    /// Integrates `f` over the sphere with this rule.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| w * f(y))
            .sum()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// True when the rule has no nodes.
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Integral over ℝ^k of a radial profile: |S^{k−1}| ∫_0^∞ r^{k−1} f(r) dr.
pub fn radial_integral<F: Fn(f64) -> f64>(
    f: F,
    k: usize,
    scale: f64,
    tol: Tolerance,
) -> Result<Integral> {
    if k == 0 {
        return Ok(Integral {
            value: f(0.0),
            error: 0.0,
        });
    }
    let area = if k == 1 { 2.0 } else { sphere_area(k) };
    let r = integrate_to_infinity(|r| r.powi(k as i32 - 1) * f(r), 0.0, scale, &[], tol)?;
    Ok(Integral {
        value: area * r.value,
        error: area * r.error,
    })
}

/// Integral over ℝ^k (k ≥ 2) in polar coordinates about `center`.
///
/// The angular integral uses a product sphere rule of the given degree when
/// k ≥ 3 and an adaptive rule on the circle when k = 2 (with angular
/// breakpoints); the radial integral is adaptive with breakpoints `rbreaks`.
pub fn polar_integral<F: Fn(&[f64]) -> f64 + Sync>(
    f: F,
    center: &[f64],
    angular_degree: usize,
    angle_breaks: &[f64],
    rbreaks: &[f64],
    scale: f64,
    tol: Tolerance,
) -> Result<Integral> {
    polar_integral_within(
        f,
        center,
        None,
        angular_degree,
        angle_breaks,
        rbreaks,
        scale,
        tol,
    )
}

/// [`polar_integral`] restricted to the ball of radius `rmax` about the center
/// when `rmax` is given.
#[allow(clippy::too_many_arguments)]
pub fn polar_integral_within<F: Fn(&[f64]) -> f64 + Sync>(
    f: F,
    center: &[f64],
    rmax: Option<f64>,
    angular_degree: usize,
    angle_breaks: &[f64],
    rbreaks: &[f64],
    scale: f64,
    tol: Tolerance,
) -> Result<Integral> {
    let k = center.len();
    assert!(k >= 2);
    let mut err_acc = 0.0;
    let rule = if k == 2 {
        None
    } else {
        Some(SphereRule::product(k, angular_degree))
    };
    let angular = |r: f64| -> f64 {
        if k == 2 {
            let g = |th: f64| {
                let p = [center[0] + r * th.cos(), center[1] + r * th.sin()];
                f(&p)
            };
            let inner_tol = Tolerance::new(tol.abs * 1e-2, tol.rel * 1e-1);
            match integrate(g, 0.0, 2.0 * PI, angle_breaks, inner_tol) {
                Ok(v) => v.value,
                Err(_) => f64::NAN,
            }
        } else {
            let rule = rule.as_ref().expect("sphere rule built for k >= 3");
            let mut p = vec![0.0; k];
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(w, wt)| {
                    for i in 0..k {
                        p[i] = center[i] + r * w[i];
                    }
                    wt * f(&p)
                })
                .sum()
        }
    };
    let radial = |r: f64| r.powi(k as i32 - 1) * angular(r);
    let res = match rmax {
        Some(rm) => integrate(radial, 0.0, rm, rbreaks, tol)?,
        None => integrate_to_infinity(radial, 0.0, scale, rbreaks, tol)?,
    };
    err_acc += res.error;
    Ok(Integral {
        value: res.value,
        error: err_acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(1);
        assert_eq!(x, vec![0.0]);
        assert!((w[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_weights_sum_to_mass() {
        let (x, w) = gauss_jacobi_symmetric(5, 0.5);
        let s: f64 = w.iter().sum();
        assert!((s - PI / 2.0).abs() < 1e-13);
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((m2 - PI / 8.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_breakpoints_and_tails() {
        let v = integrate(
            |x: f64| x.abs().sqrt(),
            -1.0,
            1.0,
            &[0.0],
            Tolerance::default(),
        )
        .unwrap();
        assert!((v.value - 4.0 / 3.0).abs() < 1e-11);
        let v = integrate_to_infinity(
            |x: f64| 1.0 / (1.0 + x * x),
            0.0,
            1.0,
            &[],
            Tolerance::default(),
        )
        .unwrap();
        assert!((v.value - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_rule_is_exact_for_monomials() {
        let rule = SphereRule::product(3, 8);
        let s = rule.integrate(|y| (y[0] * y[1] * y[2]).powi(2));
        assert!((s - 4.0 * PI / 105.0).abs() < 1e-14);
        let rule = SphereRule::product(4, 6);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0 * PI * PI).abs() < 1e-12);
    }
}
