//! Stability experiments: multi-bubble fitting with orthogonality and
//! interaction reporting, the one-bubble quotient scan, the spike
//! construction showing that linear decay is sharp, and the elementary
//! pointwise inequalities.

use crate::bubbles::{
    boundary_integral, interaction_integral, interaction_mu, Bubble, BubbleFamily,
};
use crate::constants::{escobar_constant, EscobarParams};
use crate::error::{Result, TslError};
use crate::fft::unflatten;
use crate::grid::GridField;
use crate::neumann::{dual_residual_norm, periodic_h1_inner, BallCalculus, HarmonicField};
use crate::optim::polyfit;
use crate::par::{par_accumulate, par_sum};
use crate::poly::Poly;
use crate::quadrature::{integrate, SphereRule, Tolerance};
use crate::special::ball_volume;
use crate::steklov::{degree_weight, TransportedPoly};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Options of the bubble fitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Iteration cap of the damped Gauss–Newton loop.
    pub max_iterations: usize,
    /// Convergence threshold on the normalized orthogonality residuals.
    pub tolerance: f64,
    /// Optional starting bubbles (coefficient 1); peak seeding is used otherwise.
    pub seeds: Option<Vec<Bubble>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            tolerance: 1e-11,
            seeds: None,
        }
    }
}

/// Result of fitting ν bubbles to a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Coefficients α_i.
    pub coefficients: Vec<f64>,
    /// Fitted bubbles (centers and scales).
    pub bubbles: Vec<Bubble>,
    /// ‖u − σ‖_{H¹}.
    pub distance: f64,
    /// Per bubble, the normalized pairings ⟨ρ, φ⟩/‖φ‖ for φ = U_i, ∂_λU_i, ∂_{z_j}U_i.
    pub orthogonality_residuals: Vec<Vec<f64>>,
    /// Matrix of ∫U_i^p U_j (diagonal ∫U_i^{p+1}).
    pub interactions: Vec<Vec<f64>>,
    /// Whether the residuals met the tolerance.
    pub converged: bool,
    /// Gauss–Newton iterations used.
    pub iterations: usize,
    /// Starting bubbles.
    pub seeds: Vec<Bubble>,
}

impl FitResult {
    /// The fitted family with its coefficients.
    pub fn family(&self) -> BubbleFamily {
        BubbleFamily {
            n: self.bubbles[0].n(),
            bubbles: self.bubbles.clone(),
            coefficients: self.coefficients.clone(),
        }
    }

    /// Largest orthogonality residual in absolute value.
    pub fn max_orthogonality_residual(&self) -> f64 {
        self.orthogonality_residuals
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Boundary value of U[z, λ] and its parameter derivatives, without allocation.
struct BubblePoint {
    u: f64,
    du_dlog_lambda: f64,
    du_dz: [f64; 8],
}

fn bubble_point(x: &[f64], z: &[f64], lambda: f64, c0: f64, e: f64) -> BubblePoint {
    let mut r2 = 0.0;
    for (a, b) in x.iter().zip(z) {
        r2 += (a - b) * (a - b);
    }
    let l2 = lambda * lambda;
    let d = 1.0 + l2 * r2;
    let u = c0 * (lambda / d).powf(e);
    let mut du_dz = [0.0; 8];
    for (j, (a, b)) in x.iter().zip(z).enumerate() {
        du_dz[j] = e * u * 2.0 * l2 * (a - b) / d;
    }
    BubblePoint {
        u,
        du_dlog_lambda: e * u * (1.0 - l2 * r2) / d,
        du_dz,
    }
}

struct FitContext<'a> {
    trace: &'a GridField,
    density: Option<&'a GridField>,
    n: usize,
    nu: usize,
    p: f64,
    c0: f64,
    e: f64,
}

/// Layout of θ: per bubble [α, z_1..z_{n−1}, ln λ].
fn unpack(theta: &[f64], n: usize, i: usize) -> (f64, &[f64], f64) {
    let k = n + 1;
    let base = i * k;
    (
        theta[base],
        &theta[base + 1..base + n],
        theta[base + n].exp(),
    )
}

impl<'a> FitContext<'a> {
    fn coords(&self, i: usize, buf: &mut [f64]) {
        let d = self.n - 1;
        let mut idx = [0usize; 8];
        unflatten(i, d, self.trace.n(), &mut idx[..d]);
        for a in 0..d {
            buf[a] = self.trace.coord(idx[a]);
        }
    }

    /// Merit J = ‖u − σ‖²: the grid pairing of trace and density when u
    /// carries a density, the periodic H¹ norm of the residual trace otherwise.
    fn merit(&self, theta: &[f64]) -> f64 {
        let d = self.n - 1;
        let tr = self.trace.values();
        let eval = |i: usize| -> (f64, f64) {
            let mut x = [0.0; 8];
            self.coords(i, &mut x[..d]);
            let (mut ts, mut gs) = (0.0, 0.0);
            for b in 0..self.nu {
                let (a, z, l) = unpack(theta, self.n, b);
                let bp = bubble_point(&x[..d], z, l, self.c0, self.e);
                ts += a * bp.u;
                gs += a * bp.u.powf(self.p);
            }
            (ts, gs)
        };
        match self.density {
            Some(g) => {
                let s = par_sum(tr.len(), |i| {
                    let (ts, gs) = eval(i);
                    (tr[i] - ts) * (g.values()[i] - gs)
                });
                s * self.trace.cell_volume()
            }
            None => {
                let res: Vec<f64> = (0..tr.len())
                    .into_par_iter()
                    .map(|i| tr[i] - eval(i).0)
                    .collect();
                GridField::from_values(d, self.trace.n(), self.trace.l(), res)
                    .and_then(|r| periodic_h1_inner(&r, &r))
                    .unwrap_or(f64::INFINITY)
            }
        }
    }

    /// Gram matrix of the tangent fields and pairings b_k = ⟨u − σ, T_k⟩.
    fn normal_equations(&self, theta: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let d = self.n - 1;
        let kk = self.nu * (self.n + 1);
        let tr = self.trace.values();
        let acc = par_accumulate(tr.len(), kk * kk + kk, |acc, i| {
            let mut x = [0.0; 8];
            self.coords(i, &mut x[..d]);
            let mut t = [0.0; 64];
            let mut g = [0.0; 64];
            let (mut ts, mut gs) = (0.0, 0.0);
            for b in 0..self.nu {
                let (a, z, l) = unpack(theta, self.n, b);
                let bp = bubble_point(&x[..d], z, l, self.c0, self.e);
                let up1 = bp.u.powf(self.p - 1.0);
                let base = b * (self.n + 1);
                t[base] = bp.u;
                g[base] = up1 * bp.u;
                for j in 0..d {
                    t[base + 1 + j] = a * bp.du_dz[j];
                    g[base + 1 + j] = a * self.p * up1 * bp.du_dz[j];
                }
                t[base + self.n] = a * bp.du_dlog_lambda;
                g[base + self.n] = a * self.p * up1 * bp.du_dlog_lambda;
                ts += a * bp.u;
                gs += a * up1 * bp.u;
            }
            let rt = tr[i] - ts;
            for k in 0..kk {
                for l in 0..kk {
                    acc[k * kk + l] += 0.5 * (t[k] * g[l] + t[l] * g[k]);
                }
                acc[kk * kk + k] += match self.density {
                    Some(gu) => 0.5 * (rt * g[k] + t[k] * (gu.values()[i] - gs)),
                    None => rt * g[k],
                };
            }
        });
        let h = self.trace.cell_volume();
        let gram = DMatrix::from_fn(kk, kk, |k, l| acc[k * kk + l] * h);
        let rhs = DVector::from_fn(kk, |k, _| acc[kk * kk + k] * h);
        (gram, rhs)
    }
}

/// Finds up to `count` strongest strict local maxima of |f| on the grid,
/// at least `min_sep` apart.
pub fn find_peaks(field: &GridField, count: usize, min_sep: f64) -> Vec<(Vec<f64>, f64)> {
    let d = field.dim();
    let n = field.n();
    let v = field.values();
    let mut cands: Vec<(usize, f64)> = (0..v.len())
        .into_par_iter()
        .filter_map(|i| {
            let mut idx = vec![0usize; d];
            unflatten(i, d, n, &mut idx);
            if idx.iter().any(|&j| j == 0 || j == n - 1) {
                return None;
            }
            let here = v[i].abs();
            if here == 0.0 {
                return None;
            }
            for off in 0..3usize.pow(d as u32) {
                let mut r = off;
                let mut flat = 0usize;
                let mut centre = true;
                for &ia in idx.iter().take(d) {
                    let step = (r % 3) as i64 - 1;
                    r /= 3;
                    if step != 0 {
                        centre = false;
                    }
                    let j = (ia as i64 + step) as usize;
                    flat = flat * n + j;
                }
                if !centre && v[flat].abs() >= here {
                    return None;
                }
            }
            Some((i, here))
        })
        .collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, h) in cands {
        let p = field.point(i);
        if out.iter().all(|(q, _)| {
            p.iter()
                .zip(q)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                >= min_sep
        }) {
            out.push((p, h));
            if out.len() == count {
                break;
            }
        }
    }
    out
}

/// Local minimizer of ‖u − Σ α_i U[z_i, λ_i]‖_{H¹} by damped Gauss–Newton on
/// (α_i, z_i, ln λ_i).
///
/// Seeds come from `opts.seeds` or from the ν strongest separated peaks of
/// |u| on the boundary, with λ from the peak height U(z, 0) = (n−2)^{(n−2)/2}λ^{(n−2)/2}.
pub fn fit_bubbles(u: &HarmonicField, nu: usize, opts: &FitOptions) -> Result<FitResult> {
    let n = u.n();
    let e = EscobarParams::new(n)?;
    if nu == 0 {
        return Err(TslError::Parameter(
            "the number of bubbles must be at least 1".into(),
        ));
    }
    if n > 9 {
        return Err(TslError::Parameter(format!(
            "fitting supports n <= 9, got {n}"
        )));
    }
    let trace = u.trace();
    if trace.values().iter().all(|v| *v == 0.0) {
        return Err(TslError::Input("the field is identically zero".into()));
    }
    let ex = e.half();
    let c0 = (2.0 * ex).powf(ex);
    let seeds: Vec<Bubble> = match &opts.seeds {
        Some(s) => {
            if s.len() != nu {
                return Err(TslError::Parameter(format!(
                    "{} seeds given for {nu} bubbles",
                    s.len()
                )));
            }
            s.clone()
        }
        None => {
            let peaks = find_peaks(trace, nu, 4.0 * trace.h());
            if peaks.len() < nu {
                let listed: Vec<String> = peaks
                    .iter()
                    .map(|(p, h)| format!("{p:?} (height {h:.4})"))
                    .collect();
                return Err(TslError::Input(format!(
                    "found {} separated peaks but {nu} bubbles were requested: [{}]",
                    peaks.len(),
                    listed.join(", ")
                )));
            }
            peaks
                .into_iter()
                .map(|(z, h)| Bubble {
                    z,
                    lambda: (h / c0).powf(1.0 / ex),
                })
                .collect()
        }
    };
    let ctx = FitContext {
        trace,
        density: u.density(),
        n,
        nu,
        p: e.p(),
        c0,
        e: ex,
    };
    let mut theta = Vec::with_capacity(nu * (n + 1));
    for s in &seeds {
        theta.push(1.0);
        theta.extend_from_slice(&s.z);
        theta.push(s.lambda.ln());
    }
    let mut merit = ctx.merit(&theta);
    let mut converged = false;
    let mut iterations = 0;
    let mut residuals = Vec::new();
    for it in 0..opts.max_iterations {
        iterations = it;
        let (gram, rhs) = ctx.normal_equations(&theta);
        residuals = normalized_residuals(&gram, &rhs, nu, n);
        let worst = residuals
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if worst <= opts.tolerance {
            converged = true;
            break;
        }
        let step = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match gram.clone().lu().solve(&rhs) {
                Some(s) => s,
                None => break,
            },
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(a, b)| a + t * b)
                .collect();
            let m = ctx.merit(&trial);
            if m.is_finite() && m <= merit + 1e-15 * merit.abs().max(1e-300) {
                theta = trial;
                merit = m;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            let worst = residuals
                .iter()
                .flatten()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            converged = worst <= opts.tolerance.max(1e-9);
            break;
        }
    }
    if !converged && iterations + 1 >= opts.max_iterations {
        let (gram, rhs) = ctx.normal_equations(&theta);
        residuals = normalized_residuals(&gram, &rhs, nu, n);
    }
    let bubbles: Vec<Bubble> = (0..nu)
        .map(|i| {
            let (_, z, l) = unpack(&theta, n, i);
            Bubble {
                z: z.to_vec(),
                lambda: l,
            }
        })
        .collect();
    let coefficients: Vec<f64> = (0..nu).map(|i| theta[i * (n + 1)]).collect();
    let dist_sq = merit;
    let p = e.p();
    let mut interactions = vec![vec![0.0; nu]; nu];
    let self_energy = escobar_constant(n)?.powf(n as f64 - 1.0);
    for i in 0..nu {
        for j in 0..nu {
            interactions[i][j] = if i == j {
                self_energy
            } else {
                interaction_integral(&bubbles[i], &bubbles[j], p, 1.0)?
            };
        }
    }
    Ok(FitResult {
        coefficients,
        bubbles,
        distance: dist_sq.max(0.0).sqrt(),
        orthogonality_residuals: residuals,
        interactions,
        converged,
        iterations,
        seeds,
    })
}

/// Converts pairings with the (α-scaled) tangent fields into normalized
/// residuals ⟨ρ, φ⟩/‖φ‖ in the order U, ∂_λU, ∂_{z_j}U.
fn normalized_residuals(
    gram: &DMatrix<f64>,
    rhs: &DVector<f64>,
    nu: usize,
    n: usize,
) -> Vec<Vec<f64>> {
    (0..nu)
        .map(|i| {
            let base = i * (n + 1);
            let norm = |k: usize| gram[(k, k)].max(1e-300).sqrt();
            let mut v = vec![rhs[base] / norm(base), rhs[base + n] / norm(base + n)];
            for j in 0..n - 1 {
                v.push(rhs[base + 1 + j] / norm(base + 1 + j));
            }
            v
        })
        .collect()
}

/// Distance, dual residual and interaction report for a field near a bubble sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// The fit.
    pub fit: FitResult,
    /// d = ‖u − σ‖_{H¹}.
    pub distance: f64,
    /// r = ‖Δu + |u|^{p−1}u‖_{H⁻¹}.
    pub residual: f64,
    /// Largest off-diagonal interaction ∫U_i^p U_j.
    pub max_interaction: f64,
    /// r/d, absent when d is numerically zero.
    pub residual_over_distance: Option<f64>,
    /// max interaction / r, absent for one bubble or r = 0.
    pub interaction_constant: Option<f64>,
    /// Configured floor for r/d.
    pub ratio_floor: f64,
    /// Whether r/d meets the floor (true when degenerate).
    pub ratio_ok: bool,
    /// Set when the ratios are degenerate (u on the manifold).
    pub degenerate: bool,
}

/// Fits ν bubbles to u and reports d, r, interactions and the ratios r/d and interaction/r.
pub fn quantitative_stability_report(
    u: &HarmonicField,
    nu: usize,
    opts: &FitOptions,
    ratio_floor: f64,
) -> Result<StabilityReport> {
    let fit = fit_bubbles(u, nu, opts)?;
    if !fit.converged {
        return Err(TslError::Precondition(format!(
            "bubble fit did not converge (largest orthogonality residual {:.3e})",
            fit.max_orthogonality_residual()
        )));
    }
    let residual = dual_residual_norm(u)?.value;
    let d = fit.distance;
    let mut max_interaction: f64 = 0.0;
    for i in 0..nu {
        for j in 0..nu {
            if i != j {
                max_interaction = max_interaction.max(fit.interactions[i][j]);
            }
        }
    }
    let degenerate = d <= 1e-6;
    let ratio = if degenerate { None } else { Some(residual / d) };
    let interaction_constant = if nu > 1 && residual > 0.0 {
        Some(max_interaction / residual)
    } else {
        None
    };
    Ok(StabilityReport {
        distance: d,
        residual,
        max_interaction,
        residual_over_distance: ratio,
        interaction_constant,
        ratio_floor,
        ratio_ok: ratio.is_none_or(|r| r >= ratio_floor),
        degenerate,
        fit,
    })
}

/// The degree-2 direction −Σ_{i<j≤3} y_i y_j in n variables.
pub fn symmetric_direction(n: usize) -> Poly {
    let mut q = Poly::zero(n);
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        let mut e = vec![0; n];
        e[i] = 1;
        e[j] = 1;
        q = q.add(&Poly::monomial(e, -1.0));
    }
    q
}

/// The degree-2 direction y₁y₂.
pub fn product_direction(n: usize) -> Poly {
    let mut e = vec![0; n];
    e[0] = 1;
    e[1] = 1;
    Poly::monomial(e, 1.0)
}

/// Scales a degree-k harmonic polynomial so that ‖𝓕⁻¹[q]‖_{H¹} = 1.
pub fn normalize_direction(q: &Poly, k: usize) -> Poly {
    let n = q.n;
    let norm = (degree_weight(n, k) * q.sphere_inner(q)).sqrt();
    q.scale(1.0 / norm)
}

/// Results of the one-bubble quotient scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientReport {
    /// Dimension n.
    pub n: usize,
    /// Description of the direction.
    pub direction: String,
    /// Signed ε values.
    pub epsilons: Vec<f64>,
    /// Quotients r(ε)/d(ε).
    pub quotients: Vec<f64>,
    /// Dual residuals r(ε).
    pub residuals: Vec<f64>,
    /// Distances d(ε) to the bubble manifold.
    pub distances: Vec<f64>,
    /// Limit √c₀ from the quadratic fit of quotient² in ε.
    pub extrapolated_limit: f64,
    /// Limits from quadratic fits of the quotient on each sign separately (negative, positive).
    pub limit_per_sign: [f64; 2],
    /// The expected limit 2/(n+2).
    pub target_limit: f64,
    /// Linear coefficient of quotient² in ε.
    pub fitted_slope: f64,
    /// Standard error of the fitted slope.
    pub slope_stderr: f64,
    /// Analytic linear coefficient p(p−1)(pκ₂⁻¹ − 1)∫U^{p−2}ρ³.
    pub analytic_slope_prediction: f64,
    /// The coefficient (p(p−1)/3)(κ₂⁻¹ − 1)∫U^{p−2}ρ³, reported alongside for comparison.
    pub alternate_slope_prediction: f64,
    /// ∫_{ℝ^{n−1}}U^{p−2}ρ³ = c^{n−1}∫_S q³ dσ for the normalized direction.
    pub cubic_integral: f64,
    /// Slope indistinguishable from zero.
    pub inconclusive: bool,
    /// Some ε gives a quotient strictly below 2/(n+2).
    pub certified_below_limit: bool,
    /// (ε, quotient) witnessing the certificate.
    pub certificate: Option<(f64, f64)>,
    /// Whether every residual was exact polynomial algebra.
    pub exact: bool,
}

/// Quotient r/d along u = U + ερ, ρ = 𝓕⁻¹[q]/‖𝓕⁻¹[q]‖, for ±ε.
pub fn one_bubble_quotient_scan(
    n: usize,
    direction: &Poly,
    label: &str,
    epsilons: &[f64],
) -> Result<QuotientReport> {
    let e = EscobarParams::new(n)?;
    if direction.n != n {
        return Err(TslError::Parameter(format!(
            "direction has {} variables, expected {n}",
            direction.n
        )));
    }
    if !direction.is_homogeneous(2) || direction.terms.is_empty() {
        return Err(TslError::Parameter(
            "the direction must be a nonzero homogeneous quadratic".into(),
        ));
    }
    if direction.laplacian().max_abs_coefficient()
        > 1e-12 * direction.max_abs_coefficient().max(1.0)
    {
        return Err(TslError::Parameter("the direction must be harmonic".into()));
    }
    let mut mags: Vec<f64> = epsilons.to_vec();
    mags.sort_by(f64::total_cmp);
    mags.dedup();
    if let Some(bad) = mags.iter().find(|v| !(**v > 0.0 && **v <= 0.1)) {
        return Err(TslError::Parameter(format!(
            "epsilon = {bad} must lie in (0, 0.1]"
        )));
    }
    if mags.len() < 4 {
        return Err(TslError::Parameter(format!(
            "the scan needs at least 4 distinct epsilons per sign, got {}",
            mags.len()
        )));
    }
    let q = normalize_direction(direction, 2);
    let calc = BallCalculus::new(n, 8)?;
    let signed: Vec<f64> = mags
        .iter()
        .rev()
        .map(|v| -v)
        .chain(mags.iter().copied())
        .collect();
    let rows: Vec<Result<(f64, f64, bool)>> = signed
        .par_iter()
        .map(|&eps| {
            let v = Poly::constant(n, 1.0).add(&q.scale(eps));
            let r = calc.dual_residual(&v)?;
            let d = calc.manifold_distance(&v);
            Ok((r.value, d.distance, r.exact))
        })
        .collect();
    let mut residuals = Vec::new();
    let mut distances = Vec::new();
    let mut exact = true;
    for row in rows {
        let (r, d, ex) = row?;
        residuals.push(r);
        distances.push(d);
        exact &= ex;
    }
    let quotients: Vec<f64> = residuals
        .iter()
        .zip(&distances)
        .map(|(r, d)| r / d)
        .collect();
    let sq: Vec<f64> = quotients.iter().map(|v| v * v).collect();
    let (coef, se) = polyfit(&signed, &sq, 2);
    let half = mags.len();
    let (neg_c, _) = polyfit(
        &mags,
        &quotients[..half].iter().rev().copied().collect::<Vec<_>>(),
        2,
    );
    let (pos_c, _) = polyfit(&mags, &quotients[half..], 2);
    let c = e.half();
    let p = e.p();
    let k2 = e.kappa(2);
    let cubic = c.powf(n as f64 - 1.0) * q.mul(&q).mul(&q).sphere_integral();
    let analytic = p * (p - 1.0) * (p / k2 - 1.0) * cubic;
    let alternate = p * (p - 1.0) / 3.0 * (1.0 / k2 - 1.0) * cubic;
    let target = 2.0 / (n as f64 + 2.0);
    let inconclusive = coef[1].abs() < 3.0 * se[1] || coef[1].abs() < 1e-9 * coef[0].abs();
    let certificate = signed
        .iter()
        .zip(&quotients)
        .filter(|(_, qv)| **qv < target - 1e-9)
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .map(|(e, q)| (*e, *q));
    Ok(QuotientReport {
        n,
        direction: label.to_string(),
        epsilons: signed,
        quotients,
        residuals,
        distances,
        extrapolated_limit: coef[0].max(0.0).sqrt(),
        limit_per_sign: [neg_c[0], pos_c[0]],
        target_limit: target,
        fitted_slope: coef[1],
        slope_stderr: se[1],
        analytic_slope_prediction: analytic,
        alternate_slope_prediction: alternate,
        cubic_integral: cubic,
        inconclusive,
        certified_below_limit: certificate.is_some() && !inconclusive,
        certificate,
        exact,
    })
}

/// Report of the spike construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    /// Dimension n.
    pub n: usize,
    /// Number of bubbles ν.
    pub nu: usize,
    /// Target δ.
    pub delta: f64,
    /// Spike radius ε = (δ/(4C_n))^{2/(n−2)}.
    pub epsilon: f64,
    /// C_n = √|B₁| with ‖∇ρ_ε‖ = C_n ε^{(n−2)/2}.
    pub c_n: f64,
    /// ‖∇ρ_ε‖ from the closed form.
    pub spike_gradient_norm: f64,
    /// ‖∇ρ_ε‖ from radial quadrature of finite-difference gradients.
    pub spike_gradient_quadrature: f64,
    /// Largest |∫∇ρ_ε·∇U_i| by sphere quadrature (zero in exact arithmetic).
    pub orthogonality_residual: f64,
    /// Separation radius R of the bubble centers Rθ_i.
    pub radius: f64,
    /// Largest pairwise interaction μ_ij.
    pub max_mu: f64,
    /// ‖∇(u − ΣU_i)‖.
    pub distance_to_sum: f64,
    /// inf over W of ‖∇(u − ΣW_i)‖ (equal to ‖∇ρ_ε‖ by orthogonality).
    pub inf_distance: f64,
    /// First inequality: ‖∇(u − ΣU_i)‖ ≤ 2·inf ≤ δ.
    pub first_inequality: bool,
    /// Margins (2·inf − dist, δ − 2·inf).
    pub first_margins: [f64; 2],
    /// Σ_i ‖ΔU_i + U_i^p‖_{H⁻¹} (zero: bubbles solve the equation).
    pub bubble_terms: f64,
    /// ‖Δρ_ε‖_{H⁻¹} = ‖∇ρ_ε‖.
    pub spike_term: f64,
    /// ‖(ΣU_i)^p − ΣU_i^p‖_{L^{2(n−1)/n}(ℝ^{n−1})}.
    pub coupling_norm: f64,
    /// S_E^{−1/2} times the coupling norm.
    pub coupling_term: f64,
    /// Upper bound on ‖Δu + u^p‖_{H⁻¹}.
    pub residual_bound: f64,
    /// residual_bound / ‖∇(u − ΣU_i)‖.
    pub constant: f64,
    /// Second inequality holds with the reported constant.
    pub second_inequality: bool,
    /// Number of radius doublings.
    pub doublings: usize,
}

/// Directions θ_i = (cos 2πi/ν, sin 2πi/ν, 0, …) on S^{n−2}.
fn spread_directions(n: usize, nu: usize) -> Vec<Vec<f64>> {
    (0..nu)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / nu as f64;
            let mut v = vec![0.0; n - 1];
            v[0] = a.cos();
            v[1] = a.sin();
            v
        })
        .collect()
}

fn cone_spike(p: &[f64], eps: f64) -> f64 {
    let n = p.len();
    let r2: f64 = p[..n - 1].iter().map(|v| v * v).sum::<f64>() + (p[n - 1] - 1.0).powi(2);
    (1.0 - r2.sqrt() / eps).max(0.0)
}

/// Builds u = Σ U[Rθ_i, 1] + ρ_ε and verifies both inequalities of the
/// linear-decay sharpness statement, doubling R until the coupling term is
/// at most δ/4.
pub fn sharpness_construction(n: usize, nu: usize, delta: f64) -> Result<SharpnessReport> {
    let e = EscobarParams::new(n)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TslError::Parameter(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    if nu == 0 {
        return Err(TslError::Parameter(
            "the number of bubbles must be at least 1".into(),
        ));
    }
    let nf = n as f64;
    let c_n = ball_volume(n).sqrt();
    let eps = (delta / (4.0 * c_n)).powf(2.0 / (nf - 2.0));
    let grad_norm = c_n * eps.powf((nf - 2.0) / 2.0);
    let rule = SphereRule::product(n, 12);
    let tol = Tolerance::new(1e-14, 1e-12);
    let h = 1e-7 * eps;
    let quad = integrate(
        |r: f64| {
            let s: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(w, wt)| {
                    let mut g2 = 0.0;
                    for a in 0..n {
                        let mut pp: Vec<f64> = w.iter().map(|v| r * v).collect();
                        pp[n - 1] += 1.0;
                        let mut pm = pp.clone();
                        pp[a] += h;
                        pm[a] -= h;
                        g2 += ((cone_spike(&pp, eps) - cone_spike(&pm, eps)) / (2.0 * h)).powi(2);
                    }
                    wt * g2
                })
                .sum();
            r.powi(n as i32 - 1) * s
        },
        0.0,
        eps * 1.5,
        &[eps],
        tol,
    )?;
    let grad_quad = quad.value.sqrt();
    let dirs = spread_directions(n, nu);
    let se = escobar_constant(n)?;
    let p = e.p();
    let q = 2.0 * (nf - 1.0) / nf;
    let mut radius = 4.0_f64.max(if nu > 1 { (1.0 / delta).sqrt() } else { 1.0 });
    let mut doublings = 0;
    loop {
        let bubbles: Vec<Bubble> = dirs
            .iter()
            .map(|t| Bubble {
                z: t.iter().map(|v| radius * v).collect(),
                lambda: 1.0,
            })
            .collect();
        let mut max_mu: f64 = 0.0;
        for i in 0..nu {
            for j in i + 1..nu {
                max_mu = max_mu.max(interaction_mu(&bubbles[i], &bubbles[j]));
            }
        }
        let coupling = if nu == 1 {
            0.0
        } else {
            let f = |x: &[f64]| {
                let vals: Vec<f64> = bubbles.iter().map(|b| b.boundary_value(x)).collect();
                let s: f64 = vals.iter().sum();
                (s.powf(p) - vals.iter().map(|v| v.powf(p)).sum::<f64>())
                    .abs()
                    .powf(q)
            };
            boundary_integral(f, &bubbles, Tolerance::new(1e-14, 1e-9))?.powf(1.0 / q)
        };
        let coupling_term = coupling / se.sqrt();
        if (coupling_term <= delta / 4.0 && max_mu <= delta) || radius > 1e6 {
            if radius > 1e6 {
                return Err(TslError::Construction(format!(
                    "radius exceeded 1e6 with coupling term {coupling_term:.3e} > delta/4 = {:.3e}",
                    delta / 4.0
                )));
            }
            let mut orth: f64 = 0.0;
            let orule = SphereRule::product(n, 16);
            for b in &bubbles {
                let val = integrate(
                    |r: f64| {
                        let s: f64 = orule
                            .nodes
                            .iter()
                            .zip(&orule.weights)
                            .map(|(w, wt)| {
                                let x: Vec<f64> = w[..n - 1].iter().map(|v| r * v).collect();
                                let t = 1.0 + r * w[n - 1];
                                let g = crate::bubbles::eval_bubble(b, &x, t)
                                    .expect("interior point")
                                    .gradient;
                                let radial: f64 = g.iter().zip(w).map(|(a, b)| a * b).sum();
                                wt * radial
                            })
                            .sum();
                        -r.powi(n as i32 - 1) * s / eps
                    },
                    0.0,
                    eps,
                    &[],
                    tol,
                )?;
                orth = orth.max(val.value.abs());
            }
            let dist = grad_norm;
            let inf = grad_norm;
            let bound = grad_norm + coupling_term;
            let constant = bound / dist;
            return Ok(SharpnessReport {
                n,
                nu,
                delta,
                epsilon: eps,
                c_n,
                spike_gradient_norm: grad_norm,
                spike_gradient_quadrature: grad_quad,
                orthogonality_residual: orth,
                radius,
                max_mu,
                distance_to_sum: dist,
                inf_distance: inf,
                first_inequality: dist <= 2.0 * inf && 2.0 * inf <= delta,
                first_margins: [2.0 * inf - dist, delta - 2.0 * inf],
                bubble_terms: 0.0,
                spike_term: grad_norm,
                coupling_norm: coupling,
                coupling_term,
                residual_bound: bound,
                constant,
                second_inequality: bound <= constant * dist * (1.0 + 1e-12) && inf >= delta / 8.0,
                doublings,
            });
        }
        radius *= 2.0;
        doublings += 1;
    }
}

/// Measured constants of the elementary pointwise inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryReport {
    /// Dimension n.
    pub n: usize,
    /// Sup of |N(a+b) − N(a) − pN′(a)b| / bound over the adversarial grid, with
    /// N(s) = |s|^{p−1}s and bound |a|^{p−2}b² + |b|^p (n = 3) or |b|^p (n ≥ 4).
    pub c_single: f64,
    /// For n = 3, the same sup with the bound |b|^p alone (unbounded as b → 0).
    pub c_single_power_only: Option<f64>,
    /// Sup of |N(Σa_i) − ΣN(a_i)| / Σ_{i≠j}|a_i|^{p−1}|a_j| over random vectors.
    pub c_multi: f64,
    /// Number of (a, b) pairs tested.
    pub pairs_tested: usize,
    /// Per supplied pair: (a, b, left side, right-side bound).
    pub rows: Vec<[f64; 4]>,
}

fn npow(s: f64, p: f64) -> f64 {
    s.abs().powf(p - 1.0) * s
}

/// N(1+t) − 1 − pt, using the binomial series for small |t| so that the
/// result keeps full relative accuracy.
fn remainder_after_linear(t: f64, p: f64) -> f64 {
    if t.abs() < 1e-3 {
        let mut term = p * (p - 1.0) / 2.0 * t * t;
        let mut sum = term;
        for k in 3..8 {
            term *= (p - k as f64 + 1.0) / k as f64 * t;
            sum += term;
        }
        sum
    } else {
        npow(1.0 + t, p) - 1.0 - p * t
    }
}

/// Left side |N(a+b) − N(a) − pN′(a)b| of the single-pair inequality.
pub fn single_pair_lhs(a: f64, b: f64, p: f64) -> f64 {
    if a == 0.0 {
        return b.abs().powf(p);
    }
    a.abs().powf(p) * remainder_after_linear(b / a, p).abs()
}

/// Left side |N(Σa_i) − ΣN(a_i)| of the multi-term inequality.
///
/// The dominant entry is factored out so that cancellation between N(Σa_i)
/// and its largest summand is handled by the series for N(1+t).
pub fn multi_lhs(a: &[f64], p: f64) -> f64 {
    let Some((imax, &am)) = a
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
    else {
        return 0.0;
    };
    if am == 0.0 {
        return 0.0;
    }
    let rest: f64 = a
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != imax)
        .map(|(_, v)| v)
        .sum();
    let others: f64 = a
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != imax)
        .map(|(_, v)| npow(*v, p))
        .sum();
    let t = rest / am;
    let head = npow(am, p) * (remainder_after_linear(t, p) + p * t);
    (head - others).abs()
}

/// Evaluates both pointwise inequalities on adversarial grids across 12
/// decades and both signs, plus optional user pairs.
pub fn elementary_inequality_check(
    n: usize,
    pairs: &[(f64, f64)],
    seed: u64,
) -> Result<ElementaryReport> {
    let p = EscobarParams::new(n)?.p();
    let bound = |a: f64, b: f64| -> f64 {
        if n == 3 {
            a.abs().powf(p - 2.0) * b * b + b.abs().powf(p)
        } else {
            b.abs().powf(p)
        }
    };
    let mut vals: Vec<f64> = Vec::new();
    for k in -24..=24 {
        let m = 10f64.powf(k as f64 / 4.0);
        vals.push(m);
        vals.push(-m);
    }
    vals.push(0.0);
    let mut c_single: f64 = 0.0;
    let mut c_pow: f64 = 0.0;
    let mut tested = 0;
    for &a in &vals {
        for &b in &vals {
            if b == 0.0 {
                continue;
            }
            let lhs = single_pair_lhs(a, b, p);
            c_single = c_single.max(lhs / bound(a, b));
            c_pow = c_pow.max(lhs / b.abs().powf(p));
            tested += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c_multi: f64 = 0.0;
    for _ in 0..20_000 {
        let k = rng.gen_range(2..=5);
        let a: Vec<f64> = (0..k)
            .map(|_| rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-6.0..6.0)))
            .collect();
        let mut rhs = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    rhs += a[i].abs().powf(p - 1.0) * a[j].abs();
                }
            }
        }
        if rhs > 0.0 {
            c_multi = c_multi.max(multi_lhs(&a, p) / rhs);
        }
    }
    let rows = pairs
        .iter()
        .map(|&(a, b)| [a, b, single_pair_lhs(a, b, p), bound(a, b)])
        .collect();
    Ok(ElementaryReport {
        n,
        c_single,
        c_single_power_only: if n == 3 { Some(c_pow) } else { None },
        c_multi,
        pairs_tested: tested,
        rows,
    })
}

/// Field ρ_b = λ^{(n−2)/2} ρ(λ(x − z), λt) for ρ = 𝓕⁻¹[q], sampled with its Neumann density.
pub fn transported_field(q: &Poly, b: &Bubble, n_grid: usize, l: f64) -> Result<HarmonicField> {
    let n = q.n;
    let tp = TransportedPoly::new(q.clone());
    let ex = (n as f64 - 2.0) / 2.0;
    let lam = b.lambda;
    let local =
        |x: &[f64]| -> Vec<f64> { x.iter().zip(&b.z).map(|(a, c)| lam * (a - c)).collect() };
    let trace = GridField::sample(|x| lam.powf(ex) * tp.trace(&local(x)), n - 1, n_grid, l)?;
    let density = GridField::sample(
        |x| -lam.powf(ex + 1.0) * tp.gradient(&local(x), 0.0)[n - 1],
        n - 1,
        n_grid,
        l,
    )?;
    HarmonicField::free_space(trace, Some(density))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_plug_ins() {
        assert_eq!(single_pair_lhs(1.0, 0.0, 3.0), 0.0);
        assert!((single_pair_lhs(1.0, -2.0, 2.0) - 2.0).abs() < 1e-15);
        assert_eq!(multi_lhs(&[1.0, -1.0, 0.0], 3.0), 0.0);
    }

    #[test]
    fn symmetric_direction_is_harmonic() {
        let q = symmetric_direction(3);
        assert!(q.laplacian().terms.is_empty());
        let norm = degree_weight(3, 2) * q.sphere_inner(&q);
        assert!((norm - std::f64::consts::PI).abs() < 1e-12);
    }
}
