//! The Neumann extension operator 𝒫, H¹(ℝ^n_+) inner products of harmonic
//! fields, dual (H⁻¹) residual norms and the expansion bookkeeping near a
//! bubble.
//!
//! Harmonic fields live on a boundary grid in one of two models. In the
//! periodic model a field is determined by its mean-zero trace and every
//! operator is a Fourier multiplier on the torus. In the free-space model a
//! field also carries its Neumann density g = −∂_t u on the boundary, and 𝒫
//! is the convolution with the half-space Neumann kernel, evaluated by a
//! zero-padded FFT so that no periodic images enter.
//!
//! Fields of the form 𝓕⁻¹[V] with V a ball polynomial are handled exactly
//! in the degree-wise Steklov representation.

use crate::bubbles::{Bubble, BubbleFamily};
use crate::constants::EscobarParams;
use crate::error::{Result, TslError};
use crate::fft::{fft_nd, signed_index, unflatten, Direction};
use crate::grid::GridField;
use crate::optim::nelder_mead;
use crate::par::par_sum;
use crate::poly::Poly;
use crate::quadrature::{gauss_legendre, SphereRule};
use crate::special::{epstein_zeta, sphere_area};
use crate::steklov::{
    degree_weight, steklov_decompose, steklov_decompose_poly, SolidHarmonicBasis,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// How a harmonic field is represented beyond its boundary trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldModel {
    /// Torus model: mean-zero trace, Fourier-multiplier operators.
    Periodic,
    /// Free-space model: trace plus optional Neumann density.
    FreeSpace,
}

/// A harmonic function on ℝ^n_+ given by boundary data on a grid of dimension n − 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicField {
    trace: GridField,
    density: Option<GridField>,
    model: FieldModel,
}

/// Relative DC tolerance for the periodic model.
const DC_TOLERANCE: f64 = 1e-12;

fn dc_ratio(g: &GridField) -> f64 {
    let l1: f64 = g.values().iter().map(|v| v.abs()).sum();
    if l1 == 0.0 {
        0.0
    } else {
        g.values().iter().sum::<f64>().abs() / l1
    }
}

impl HarmonicField {
    /// Periodic-model field; the trace must have zero mean.
    pub fn periodic(trace: GridField) -> Result<Self> {
        let r = dc_ratio(&trace);
        if r > DC_TOLERANCE {
            return Err(TslError::MeanZero(format!(
                "trace mean is {r:.3e} of its L1 mass; subtract the mean first"
            )));
        }
        Ok(HarmonicField {
            trace,
            density: None,
            model: FieldModel::Periodic,
        })
    }

    /// Free-space field from its trace and, when known, its Neumann density.
    pub fn free_space(trace: GridField, density: Option<GridField>) -> Result<Self> {
        if let Some(d) = &density {
            trace.same_grid(d)?;
        }
        Ok(HarmonicField {
            trace,
            density,
            model: FieldModel::FreeSpace,
        })
    }

    /// Free-space field 𝒫[g] whose trace is computed from the density.
    pub fn from_density(density: GridField, n: usize) -> Result<Self> {
        let trace = FreeSpaceOperator::new(&density, n, 0.0)?.apply(&density)?;
        Self::free_space(trace, Some(density))
    }

    /// Free-space field of a bubble sum Σ α_i U_i with its exact density Σ α_i U_i^p.
    pub fn from_bubbles(family: &BubbleFamily, n_grid: usize, l: f64) -> Result<Self> {
        family.validate()?;
        let p = EscobarParams::new(family.n)?.p();
        let d = family.n - 1;
        let trace = GridField::sample(|x| family.boundary_value(x), d, n_grid, l)?;
        let density = GridField::sample(
            |x| {
                family
                    .bubbles
                    .iter()
                    .zip(&family.coefficients)
                    .map(|(b, a)| a * b.boundary_value(x).powf(p))
                    .sum()
            },
            d,
            n_grid,
            l,
        )?;
        Self::free_space(trace, Some(density))
    }

    /// Mean-corrected periodic field, returning the subtracted mean.
    pub fn periodic_mean_corrected(trace: &GridField) -> Result<(Self, f64)> {
        let mean = trace.values().iter().sum::<f64>() / trace.len() as f64;
        let t = trace.map(|v| v - mean)?;
        Ok((
            HarmonicField {
                trace: t,
                density: None,
                model: FieldModel::Periodic,
            },
            mean,
        ))
    }

    /// Boundary trace.
    pub fn trace(&self) -> &GridField {
        &self.trace
    }

    /// Neumann density, when carried.
    pub fn density(&self) -> Option<&GridField> {
        self.density.as_ref()
    }

    /// Representation model.
    pub fn model(&self) -> FieldModel {
        self.model
    }

    /// Ambient dimension n = grid dimension + 1.
    pub fn n(&self) -> usize {
        self.trace.dim() + 1
    }

    /// Linear combination a·self + b·other (densities combine when both exist).
    pub fn combine(&self, a: f64, other: &HarmonicField, b: f64) -> Result<Self> {
        if self.model != other.model {
            return Err(TslError::Parameter(
                "cannot combine fields of different models".into(),
            ));
        }
        let trace = self.trace.combine(a, &other.trace, b)?;
        let density = match (&self.density, &other.density) {
            (Some(x), Some(y)) => Some(x.combine(a, y, b)?),
            _ => None,
        };
        Ok(HarmonicField {
            trace,
            density,
            model: self.model,
        })
    }
}

/// Convolution with the half-space Neumann kernel at a fixed height t.
///
/// The kernel is 2/((n−2)|S^{n−1}|)·(|x|² + t²)^{(2−n)/2}. On the boundary
/// t = 0 the corrected trapezoidal rule is used: point values away from the
/// origin and a lattice-zeta weight at the singular node. For 0 < t < 2h the
/// kernel is averaged over the cells near the origin; higher slabs use
/// point values.
#[derive(Debug, Clone)]
pub struct FreeSpaceOperator {
    dim: usize,
    n: usize,
    l: f64,
    spectrum: Vec<Complex64>,
}

/// Cells within this many grid steps of the origin use cell averages.
const NEAR_CELLS: i64 = 6;

fn kernel_coefficient(n_amb: usize) -> f64 {
    2.0 / ((n_amb as f64 - 2.0) * sphere_area(n_amb))
}

/// Origin weight of the corrected trapezoidal rule for |y|^{−(d−1)} in ℝ^d.
///
/// With this weight, h^d Σ'_{j≠0} f(jh)|jh|^{1−d} + w₀ f(0) integrates
/// f|y|^{1−d} to third order for smooth f; w₀ = −Z(d−1) h, with Z the
/// cubic-lattice Epstein zeta function.
fn singular_weight(d: usize, h: f64) -> f64 {
    -epstein_zeta(d, d as f64 - 1.0) * h
}

impl FreeSpaceOperator {
    /// Builds the operator for the grid of `like` at height t ≥ 0.
    pub fn new(like: &GridField, n_amb: usize, t: f64) -> Result<Self> {
        let dim = like.dim();
        if dim + 1 != n_amb {
            return Err(TslError::Parameter(format!(
                "grid dimension {dim} does not match n = {n_amb}"
            )));
        }
        EscobarParams::new(n_amb)?;
        if !(t >= 0.0) {
            return Err(TslError::Domain(format!(
                "height t = {t} must be nonnegative"
            )));
        }
        let n = like.n();
        let h = like.h();
        let m = 2 * n;
        let coef = kernel_coefficient(n_amb);
        let expo = (2.0 - n_amb as f64) / 2.0;
        let total = m.pow(dim as u32);
        let (gx, gw) = gauss_legendre(16);
        let use_average = t < 2.0 * h;
        let sing = if t == 0.0 {
            singular_weight(dim, h) / h.powi(dim as i32)
        } else {
            0.0
        };
        let mut kernel: Vec<Complex64> = (0..total)
            .into_par_iter()
            .map(|i| {
                let mut idx = vec![0usize; dim];
                unflatten(i, dim, m, &mut idx);
                let off: Vec<i64> = idx.iter().map(|&j| signed_index(j, m)).collect();
                let near = off.iter().all(|o| o.abs() <= NEAR_CELLS);
                let origin = off.iter().all(|&o| o == 0);
                let value = if t == 0.0 && origin {
                    coef * sing
                } else if t > 0.0 && use_average && near {
                    let q = gx.len();
                    let mut s = 0.0;
                    let mut sub = vec![0usize; dim];
                    for c in 0..q.pow(dim as u32) {
                        unflatten(c, dim, q, &mut sub);
                        let mut r2 = t * t;
                        let mut wt = 1.0;
                        for a in 0..dim {
                            let y = (off[a] as f64 + 0.5 * gx[sub[a]]) * h;
                            r2 += y * y;
                            wt *= 0.5 * gw[sub[a]];
                        }
                        s += wt * r2.powf(expo);
                    }
                    coef * s
                } else {
                    let r2: f64 = off.iter().map(|&o| (o as f64 * h).powi(2)).sum::<f64>() + t * t;
                    coef * r2.powf(expo)
                };
                Complex64::new(value, 0.0)
            })
            .collect();
        fft_nd(&mut kernel, dim, m, Direction::Forward);
        Ok(FreeSpaceOperator {
            dim,
            n,
            l: like.l(),
            spectrum: kernel,
        })
    }

    /// 𝒫[g] at the operator's height, on the grid of g.
    pub fn apply(&self, g: &GridField) -> Result<GridField> {
        if g.dim() != self.dim || g.n() != self.n || g.l() != self.l {
            return Err(TslError::Parameter(
                "density grid does not match the operator grid".into(),
            ));
        }
        let (dim, n) = (self.dim, self.n);
        let m = 2 * n;
        let total = m.pow(dim as u32);
        let mut data = vec![Complex64::new(0.0, 0.0); total];
        let mut idx = vec![0usize; dim];
        for (i, v) in g.values().iter().enumerate() {
            unflatten(i, dim, n, &mut idx);
            let mut flat = 0;
            for &j in &idx {
                flat = flat * m + j;
            }
            data[flat] = Complex64::new(*v, 0.0);
        }
        fft_nd(&mut data, dim, m, Direction::Forward);
        data.par_iter_mut()
            .zip(&self.spectrum)
            .for_each(|(a, b)| *a *= b);
        fft_nd(&mut data, dim, m, Direction::Inverse);
        let scale = g.cell_volume() / total as f64;
        let out: Vec<f64> = (0..g.len())
            .map(|i| {
                let mut idx = vec![0usize; dim];
                unflatten(i, dim, n, &mut idx);
                let mut flat = 0;
                for &j in &idx {
                    flat = flat * m + j;
                }
                data[flat].re * scale
            })
            .collect();
        GridField::from_values(dim, n, g.l(), out)
    }
}

/// Values of 𝒫[g] on the slabs t ∈ `heights`.
///
/// In the periodic model the multiplier ĝ(ξ)e^{−2π|ξ|t}/(2π|ξ|) is applied
/// and g must have zero mean; in the free-space model the kernel convolution
/// is used.
pub fn neumann_extend(g: &GridField, heights: &[f64], model: FieldModel) -> Result<Vec<GridField>> {
    if let Some(t) = heights.iter().find(|t| !(**t >= 0.0)) {
        return Err(TslError::Domain(format!(
            "height t = {t} must be nonnegative"
        )));
    }
    match model {
        FieldModel::Periodic => {
            let r = dc_ratio(g);
            if r > DC_TOLERANCE {
                return Err(TslError::MeanZero(format!(
                    "Neumann data mean is {r:.3e} of its L1 mass"
                )));
            }
            let spec = g.spectrum();
            heights
                .iter()
                .map(|&t| {
                    let out: Vec<Complex64> = spec
                        .par_iter()
                        .enumerate()
                        .map(|(i, c)| {
                            let k = g.frequency_sq(i).sqrt();
                            if k == 0.0 {
                                Complex64::new(0.0, 0.0)
                            } else {
                                c * ((-2.0 * PI * k * t).exp() / (2.0 * PI * k))
                            }
                        })
                        .collect();
                    GridField::from_spectrum(g.dim(), g.n(), g.l(), &out)
                })
                .collect()
        }
        FieldModel::FreeSpace => {
            let n_amb = g.dim() + 1;
            heights
                .iter()
                .map(|&t| FreeSpaceOperator::new(g, n_amb, t)?.apply(g))
                .collect()
        }
    }
}

/// Σ_ξ 2π|ξ| Re(â(ξ) conj b̂(ξ)) over the frequency lattice, times the cell measure.
pub fn periodic_h1_inner(a: &GridField, b: &GridField) -> Result<f64> {
    a.same_grid(b)?;
    let (sa, sb) = (a.spectrum(), b.spectrum());
    let s = par_sum(sa.len(), |i| {
        2.0 * PI * a.frequency_sq(i).sqrt() * (sa[i] * sb[i].conj()).re
    });
    Ok(s * a.frequency_cell())
}

/// H¹(ℝ^n_+) inner product ∫∇u·∇v of two harmonic fields.
///
/// With Neumann densities the pairing is ½(∫u g_v + ∫v g_u) (or the one
/// available half); without them the periodic symbol is used.
pub fn h1_inner(u: &HarmonicField, v: &HarmonicField) -> Result<f64> {
    u.trace.same_grid(&v.trace)?;
    if u.model != v.model {
        return Err(TslError::Parameter("fields use different models".into()));
    }
    let dot = |a: &GridField, b: &GridField| -> f64 {
        par_sum(a.len(), |i| a.values()[i] * b.values()[i]) * a.cell_volume()
    };
    match (u.model, &u.density, &v.density) {
        (FieldModel::FreeSpace, Some(gu), Some(gv)) => {
            Ok(0.5 * (dot(&u.trace, gv) + dot(&v.trace, gu)))
        }
        (FieldModel::FreeSpace, Some(gu), None) => Ok(dot(&v.trace, gu)),
        (FieldModel::FreeSpace, None, Some(gv)) => Ok(dot(&u.trace, gv)),
        _ => periodic_h1_inner(&u.trace, &v.trace),
    }
}

/// Dual residual ‖Δu + |u|^{p−1}u‖_{H⁻¹} of a harmonic field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualResidual {
    /// The residual norm.
    pub value: f64,
    /// Mean subtracted from the nonlinear term, relative to its RMS (periodic model only).
    pub mean_correction: f64,
    /// Model used for the evaluation.
    pub model: FieldModel,
}

/// Computes the dual residual of u = 𝒫[g].
///
/// In the free-space model with a density, δ = g − |u|^{p−1}u on the
/// boundary and the residual is (∫δ 𝒫[δ])^{1/2}. Otherwise the periodic
/// formula (Σ 2π|ξ| |û − n̂l/(2π|ξ|)|² cell)^{1/2} is used after mean-correcting
/// the nonlinear term; a correction above 1% of its RMS is a truncation error.
pub fn dual_residual_norm(u: &HarmonicField) -> Result<DualResidual> {
    let n = u.n();
    let p = EscobarParams::new(n)?.p();
    let nl = u.trace.map(|v| v.abs().powf(p - 1.0) * v)?;
    if let (FieldModel::FreeSpace, Some(g)) = (u.model, &u.density) {
        let delta = g.combine(1.0, &nl, -1.0)?;
        let op = FreeSpaceOperator::new(&delta, n, 0.0)?;
        let pd = op.apply(&delta)?;
        let s: f64 = delta
            .values()
            .iter()
            .zip(pd.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * delta.cell_volume();
        return Ok(DualResidual {
            value: s.max(0.0).sqrt(),
            mean_correction: 0.0,
            model: FieldModel::FreeSpace,
        });
    }
    let len = nl.len() as f64;
    let mean = nl.values().iter().sum::<f64>() / len;
    let rms = (nl.values().iter().map(|v| v * v).sum::<f64>() / len).sqrt();
    let correction = if rms > 0.0 { mean.abs() / rms } else { 0.0 };
    if correction > 0.01 {
        return Err(TslError::Truncation(format!(
            "mean correction of the nonlinear term is {:.2}% of its RMS; enlarge the box",
            100.0 * correction
        )));
    }
    let nl = nl.map(|v| v - mean)?;
    let (su, sn) = (u.trace.spectrum(), nl.spectrum());
    let s = par_sum(su.len(), |i| {
        let w = 2.0 * PI * u.trace.frequency_sq(i).sqrt();
        if w == 0.0 {
            0.0
        } else {
            (su[i] * w - sn[i]).norm_sqr() / w
        }
    });
    Ok(DualResidual {
        value: (s * u.trace.frequency_cell()).sqrt(),
        mean_correction: correction,
        model: FieldModel::Periodic,
    })
}

/// Exact quantities for fields u = 𝓕⁻¹[V] with V a ball polynomial.
#[derive(Debug, Clone)]
pub struct BallCalculus {
    /// Dimension n.
    pub n: usize,
    /// Basis used for degree projections.
    pub basis: SolidHarmonicBasis,
    rule: SphereRule,
}

/// Dual residual of a ball field with the bound on its neglected high-degree part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallResidual {
    /// Residual norm from degrees 0..=K.
    pub value: f64,
    /// Upper bound of the squared contribution of degrees above K (0 when exact).
    pub tail_bound_sq: f64,
    /// Whether the evaluation is exact polynomial algebra.
    pub exact: bool,
}

impl BallCalculus {
    /// Prepares the calculus with an orthonormal basis up to degree K ≤ 8.
    pub fn new(n: usize, max_degree: usize) -> Result<Self> {
        let basis = crate::steklov::build_basis(n, max_degree)?;
        let deg = if n == 3 { 64 } else { 40 };
        Ok(BallCalculus {
            n,
            basis,
            rule: SphereRule::product(n, deg),
        })
    }

    fn c(&self) -> f64 {
        (self.n as f64 - 2.0) / 2.0
    }

    /// ‖U‖²_{H¹} = c^{n−1}|S^{n−1}|.
    pub fn bubble_norm_sq(&self) -> f64 {
        self.c().powf(self.n as f64 - 1.0) * sphere_area(self.n)
    }

    /// ‖𝓕⁻¹[V]‖²_{H¹} = Σ_k c^{n−2}(k + c)‖V_k‖²_{L²(S)}.
    pub fn h1_norm_sq(&self, v: &Poly) -> f64 {
        let dec = steklov_decompose_poly(v, &self.basis, None);
        (0..dec.components.len())
            .map(|k| degree_weight(self.n, k) * dec.degree_mass(k))
            .sum()
    }

    /// Dual residual of 𝓕⁻¹[V]: c^{n−2} Σ_k (k + c)‖V_k − W_k/κ_k‖² with W = |V|^{p−1}V on the sphere.
    pub fn dual_residual(&self, v: &Poly) -> Result<BallResidual> {
        let n = self.n;
        let e = EscobarParams::new(n)?;
        let p = e.p();
        let kmax = self.basis.max_degree;
        if v.degree() as usize > kmax {
            return Err(TslError::Parameter(format!(
                "field degree {} exceeds the basis degree {kmax}",
                v.degree()
            )));
        }
        let vdec = steklov_decompose_poly(v, &self.basis, None);
        let int_p = p.fract() == 0.0;
        let vmin = self
            .rule
            .nodes
            .iter()
            .map(|y| v.eval(y))
            .fold(f64::INFINITY, f64::min);
        let exact_poly = int_p && ((p as u32) % 2 == 1 || vmin > 0.0);
        let (wdec, exact) = if exact_poly && v.degree() as usize * p as usize <= kmax {
            (
                steklov_decompose_poly(&v.pow(p as u32), &self.basis, None),
                true,
            )
        } else if exact_poly {
            (
                steklov_decompose_poly(&v.pow(p as u32), &self.basis, None),
                false,
            )
        } else {
            let w = |y: &[f64]| {
                let x = v.eval(y);
                x.abs().powf(p - 1.0) * x
            };
            (steklov_decompose(w, &self.basis, None, Some(64)), false)
        };
        let mut s = 0.0;
        for k in 0..=kmax {
            let kap = e.kappa(k);
            let diff: f64 = vdec.components[k]
                .iter()
                .zip(&wdec.components[k])
                .map(|(a, b)| (a - b / kap).powi(2))
                .sum();
            s += degree_weight(n, k) * diff;
        }
        let c = self.c();
        let captured: f64 = (0..=kmax).map(|k| wdec.degree_mass(k)).sum();
        let tail = (wdec.boundary_norm.powi(2) - captured).max(0.0);
        let tail_bound_sq = if exact {
            0.0
        } else {
            c.powf(n as f64 - 2.0) * c * c / (kmax as f64 + 1.0 + c) * tail
        };
        Ok(BallResidual {
            value: s.sqrt(),
            tail_bound_sq,
            exact,
        })
    }

    /// ⟨𝓕⁻¹[V], U[z, λ]⟩_{H¹} = c^{n−1}∫_S V·B^p with B = 𝓕[U[z, λ]] on the sphere.
    pub fn bubble_pairing(&self, v_at_nodes: &[f64], z: &[f64], lambda: f64) -> f64 {
        let n = self.n;
        let c = self.c();
        let p = n as f64 / (n as f64 - 2.0);
        let s: f64 = self
            .rule
            .nodes
            .iter()
            .zip(&self.rule.weights)
            .zip(v_at_nodes)
            .map(|((y, w), v)| {
                let denom = 1.0 + y[n - 1];
                let b = if denom < 1e-14 {
                    lambda.powf(-c)
                } else {
                    let x2: f64 = y[..n - 1].iter().map(|a| (a / denom).powi(2)).sum();
                    let d2: f64 = y[..n - 1]
                        .iter()
                        .zip(z)
                        .map(|(a, zz)| (a / denom - zz).powi(2))
                        .sum();
                    (lambda * (1.0 + x2) / (1.0 + lambda * lambda * d2)).powf(c)
                };
                w * v * b.powf(p)
            })
            .sum();
        c.powf(n as f64 - 1.0) * s
    }

    /// Distance from 𝓕⁻¹[V] to the bubble manifold {U[z, λ]}, minimizing
    /// ‖u‖² + ‖U‖² − 2⟨u, U[z, λ]⟩ over (z, log λ) from (0, 0).
    pub fn manifold_distance(&self, v: &Poly) -> ManifoldFit {
        let n = self.n;
        let vals: Vec<f64> = self.rule.nodes.iter().map(|y| v.eval(y)).collect();
        let u2 = self.h1_norm_sq(v);
        let b2 = self.bubble_norm_sq();
        let obj =
            |th: &[f64]| -> f64 { -self.bubble_pairing(&vals, &th[..n - 1], th[n - 1].exp()) };
        let res = nelder_mead(obj, &vec![0.0; n], &vec![0.05; n], 1e-17, 1e-9, 20_000);
        let d2 = (u2 + b2 + 2.0 * res.value).max(0.0);
        ManifoldFit {
            distance: d2.sqrt(),
            z: res.x[..n - 1].to_vec(),
            lambda: res.x[n - 1].exp(),
            converged: res.converged,
        }
    }
}

/// Closest bubble to a ball field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldFit {
    /// H¹ distance to the manifold.
    pub distance: f64,
    /// Optimal center.
    pub z: Vec<f64>,
    /// Optimal scale.
    pub lambda: f64,
    /// Whether the simplex search converged.
    pub converged: bool,
}

/// Term-by-term bookkeeping of the dual residual near U.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    /// Coefficient β of U in u = βU + w.
    pub beta: f64,
    /// H¹ norms of the degree components of w (entry 0 is zero).
    pub component_norms: Vec<f64>,
    /// (β − β^p)²‖U‖² + Σ_k (1 − pκ_k⁻¹)²‖ρ_k‖².
    pub predicted_residual_sq: f64,
    /// Exact residual² from the ball representation.
    pub measured_residual_sq: f64,
    /// d(u, ℳ_E)² = (1 − β)²‖U‖² + ‖w‖².
    pub distance: f64,
    /// measured residual / distance.
    pub quotient: f64,
    /// Set when u is not within 0.1‖U‖ of U.
    pub warning: Option<String>,
}

/// Expansion terms of the dual residual for u = 𝓕⁻¹[V].
pub fn expansion_terms(v: &Poly, calc: &BallCalculus) -> Result<ExpansionReport> {
    let n = calc.n;
    let e = EscobarParams::new(n)?;
    let p = e.p();
    let dec = steklov_decompose_poly(v, &calc.basis, None);
    let beta = dec.components[0][0] / sphere_area(n).sqrt();
    let u2 = calc.bubble_norm_sq();
    let mut component_norms = vec![0.0];
    let mut predicted = (beta - beta.powf(p)).powi(2) * u2;
    let mut w2 = 0.0;
    for k in 1..dec.components.len() {
        let nk2 = degree_weight(n, k) * dec.degree_mass(k);
        component_norms.push(nk2.sqrt());
        predicted += (1.0 - p / e.kappa(k)).powi(2) * nk2;
        w2 += nk2;
    }
    let measured = calc.dual_residual(v)?;
    let distance = ((1.0 - beta).powi(2) * u2 + w2).sqrt();
    let off = ((1.0 - beta).powi(2) * u2 + w2).sqrt();
    let warning = if off > 0.1 * u2.sqrt() {
        Some(format!(
            "field lies {off:.3e} from U, beyond 0.1·‖U‖; the expansion is not meaningful"
        ))
    } else {
        None
    };
    Ok(ExpansionReport {
        beta,
        component_norms,
        predicted_residual_sq: predicted,
        measured_residual_sq: measured.value.powi(2),
        distance,
        quotient: if distance > 0.0 {
            measured.value / distance
        } else {
            f64::NAN
        },
        warning,
    })
}

/// The bubble U[0, 1] as a free-space field sampled on a grid.
pub fn standard_bubble_field(n: usize, n_grid: usize, l: f64) -> Result<HarmonicField> {
    let fam = BubbleFamily::new(n, vec![Bubble::standard(n)], vec![1.0])?;
    HarmonicField::from_bubbles(&fam, n_grid, l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_weight_in_2d() {
        assert!((singular_weight(2, 1.0) - 3.900_264_920_001_956).abs() < 1e-12);
    }

    #[test]
    fn periodic_requires_mean_zero() {
        let g = GridField::sample(|x| 1.0 + x[0].cos(), 1, 16, 1.0).unwrap();
        assert!(matches!(
            HarmonicField::periodic(g),
            Err(TslError::MeanZero(_))
        ));
    }
}
