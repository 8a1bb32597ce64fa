//! Periodized Fourier-grid fields on [−L, L)^d: fractional D_α norms,
//! strong and weak Lebesgue norms, traces on coordinate hyperplanes, the
//! reduction extension, trace deficits and distances to the extremal manifold.
//!
//! Spectra use the convention f̂(k) = h^d Σ_j f(x_j) e^{−2πi k·x_j} with
//! x_j = −L + j h and k = κ/(2L), so that f̂ approximates the continuum
//! Fourier transform and the frequency cell measure is (2L)^{−d}.

use crate::constants::{sharp_trace_constant, TraceParams};
use crate::error::{Result, TslError};
use crate::fft::{fft_nd, signed_index, unflatten, Direction};
use crate::optim::nelder_mead;
use crate::par::par_sum;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::OnceLock;

/// Samples of a real function on a uniform periodic grid.
#[derive(Debug, Clone)]
pub struct GridField {
    dim: usize,
    n: usize,
    l: f64,
    cell_centered: bool,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for GridField {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && self.l == other.l
            && self.cell_centered == other.cell_centered
            && self.values == other.values
    }
}

fn check_grid(dim: usize, n: usize, l: f64) -> Result<()> {
    if dim == 0 {
        return Err(TslError::Parameter(
            "grid dimension must be at least 1".into(),
        ));
    }
    if n < 2 || !n.is_power_of_two() {
        return Err(TslError::Parameter(format!(
            "samples per axis N = {n} must be a power of two, at least 2"
        )));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(TslError::Parameter(format!(
            "box half-width L = {l} must be positive and finite"
        )));
    }
    Ok(())
}

impl GridField {
    /// Builds a field from row-major values on the node-centered grid.
    pub fn from_values(dim: usize, n: usize, l: f64, values: Vec<f64>) -> Result<Self> {
        Self::build(dim, n, l, false, values)
    }

    /// Builds a field on the cell-centered grid with nodes −L + (j + 1/2)h.
    pub fn from_values_cell_centered(
        dim: usize,
        n: usize,
        l: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        Self::build(dim, n, l, true, values)
    }

    fn build(dim: usize, n: usize, l: f64, cell_centered: bool, values: Vec<f64>) -> Result<Self> {
        check_grid(dim, n, l)?;
        let expected = n.pow(dim as u32);
        if values.len() != expected {
            return Err(TslError::Input(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let mut idx = vec![0; dim];
            unflatten(i, dim, n, &mut idx);
            return Err(TslError::Input(format!("non-finite value at node {idx:?}")));
        }
        Ok(GridField {
            dim,
            n,
            l,
            cell_centered,
            values,
            spectrum: OnceLock::new(),
        })
    }

    /// Samples `f` at every node of the d-dimensional grid with N nodes per axis on [−L, L).
    pub fn sample<F: Fn(&[f64]) -> f64 + Sync>(f: F, dim: usize, n: usize, l: f64) -> Result<Self> {
        check_grid(dim, n, l)?;
        let h = 2.0 * l / n as f64;
        let total = n.pow(dim as u32);
        let values: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|i| {
                let mut idx = vec![0; dim];
                unflatten(i, dim, n, &mut idx);
                let x: Vec<f64> = idx.iter().map(|&j| -l + j as f64 * h).collect();
                f(&x)
            })
            .collect();
        Self::from_values(dim, n, l, values)
    }

    /// A field of zeros.
    pub fn zeros(dim: usize, n: usize, l: f64) -> Result<Self> {
        check_grid(dim, n, l)?;
        Self::from_values(dim, n, l, vec![0.0; n.pow(dim as u32)])
    }

    /// Spatial dimension d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Samples per axis N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Box half-width L.
    pub fn l(&self) -> f64 {
        self.l
    }

    /// Grid spacing h = 2L/N.
    pub fn h(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    /// Whether nodes sit at cell centers rather than at −L + jh.
    pub fn is_cell_centered(&self) -> bool {
        self.cell_centered
    }

    /// Volume h^d of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Measure (2L)^{−d} of one frequency cell.
    pub fn frequency_cell(&self) -> f64 {
        (2.0 * self.l).powi(-(self.dim as i32))
    }

    /// Row-major sample values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True for an empty grid (never the case for a validated field).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinate of node index `j` along any axis.
    pub fn coord(&self, j: usize) -> f64 {
        let off = if self.cell_centered { 0.5 } else { 0.0 };
        -self.l + (j as f64 + off) * self.h()
    }

    /// Coordinates of the node with flat index `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        unflatten(i, self.dim, self.n, &mut idx);
        idx.iter().map(|&j| self.coord(j)).collect()
    }

    /// Frequency k = κ/(2L) attached to index `j` along any axis.
    pub fn frequency(&self, j: usize) -> f64 {
        signed_index(j, self.n) as f64 / (2.0 * self.l)
    }

    /// |k|² of the frequency with flat index `i`.
    pub fn frequency_sq(&self, i: usize) -> f64 {
        let mut r = i;
        let mut s = 0.0;
        for _ in 0..self.dim {
            s += self.frequency(r % self.n).powi(2);
            r /= self.n;
        }
        s
    }

    /// Cached spectrum (compute-once, thread safe).
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut data: Vec<Complex64> = self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            fft_nd(&mut data, self.dim, self.n, Direction::Forward);
            let cell = self.cell_volume();
            let (dim, n) = (self.dim, self.n);
            data.par_iter_mut().enumerate().for_each(|(i, c)| {
                *c *= cell * parity_sign(i, dim, n);
            });
            data
        })
    }

    /// Builds the real field whose spectrum is `spec` (imaginary parts of the
    /// synthesized samples are discarded).
    pub fn from_spectrum(dim: usize, n: usize, l: f64, spec: &[Complex64]) -> Result<Self> {
        check_grid(dim, n, l)?;
        let mut data: Vec<Complex64> = spec
            .par_iter()
            .enumerate()
            .map(|(i, c)| c * parity_sign(i, dim, n))
            .collect();
        fft_nd(&mut data, dim, n, Direction::Inverse);
        let scale = (2.0 * l).powi(-(dim as i32));
        Self::from_values(dim, n, l, data.iter().map(|c| c.re * scale).collect())
    }

    /// Integral approximation Σ f h^d.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    /// Pointwise map into a new field on the same grid.
    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> Result<Self> {
        Self::build(
            self.dim,
            self.n,
            self.l,
            self.cell_centered,
            self.values.par_iter().map(|&v| f(v)).collect(),
        )
    }

    /// Linear combination a·self + b·other on a shared grid.
    pub fn combine(&self, a: f64, other: &GridField, b: f64) -> Result<Self> {
        self.same_grid(other)?;
        let v = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::build(self.dim, self.n, self.l, self.cell_centered, v)
    }

    /// Checks that two fields live on the same grid.
    pub fn same_grid(&self, other: &GridField) -> Result<()> {
        if self.dim != other.dim
            || self.n != other.n
            || self.l != other.l
            || self.cell_centered != other.cell_centered
        {
            return Err(TslError::Parameter(format!(
                "grid mismatch: (d={}, N={}, L={}) vs (d={}, N={}, L={})",
                self.dim, self.n, self.l, other.dim, other.n, other.l
            )));
        }
        Ok(())
    }
}

/// (−1)^{Σ j_a}, the phase that centers the transform at x = 0.
#[inline]
fn parity_sign(i: usize, dim: usize, n: usize) -> f64 {
    let mut s = 0usize;
    let mut r = i;
    for _ in 0..dim {
        s += r % n;
        r /= n;
    }
    if s.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// |2πk|^{2α} multiplier with the zero mode mapped to zero.
fn dalpha_weight(k2: f64, alpha: f64) -> f64 {
    if k2 == 0.0 {
        if alpha == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (4.0 * PI * PI * k2).powf(alpha)
    }
}

/// Homogeneous fractional norm ‖f‖_{D_α} = (Σ |f̂(k)|² |2πk|^{2α} (2L)^{−d})^{1/2}.
pub fn dalpha_norm(field: &GridField, alpha: f64) -> Result<f64> {
    Ok(dalpha_inner(field, field, alpha)?.sqrt())
}

/// Inner product ⟨f, g⟩_{D_α} = Re Σ f̂ conj(ĝ) |2πk|^{2α} (2L)^{−d}.
pub fn dalpha_inner(f: &GridField, g: &GridField, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(TslError::Parameter(format!(
            "alpha = {alpha} must be nonnegative"
        )));
    }
    f.same_grid(g)?;
    let (a, b) = (f.spectrum(), g.spectrum());
    let s = par_sum(a.len(), |i| {
        (a[i] * b[i].conj()).re * dalpha_weight(f.frequency_sq(i), alpha)
    });
    Ok(s * f.frequency_cell())
}

/// Strong and weak (Marcinkiewicz) L^q norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqNorms {
    /// (Σ|u|^q h^d)^{1/q}.
    pub strong: f64,
    /// sup_t t·|{|u| ≥ t}|^{1/q} over the sample values t.
    pub weak: f64,
}

/// Strong and weak L^q norms of the samples.
///
/// The weak norm evaluates t·μ{|u| ≥ t}^{1/q} at every distinct nonzero
/// sample magnitude t; this is the left limit of t·μ{|u| > t}^{1/q} and
/// has the same supremum.
pub fn lq_norms(field: &GridField, q: f64) -> Result<LqNorms> {
    if !(q > 0.0) {
        return Err(TslError::Parameter(format!("q = {q} must be positive")));
    }
    lq_norms_masked(field, None, q)
}

/// [`lq_norms`] restricted to the nodes where `mask` is true.
pub fn lq_norms_masked(field: &GridField, mask: Option<&[bool]>, q: f64) -> Result<LqNorms> {
    let cell = field.cell_volume();
    let mut mags: Vec<f64> = field
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .map(|(_, v)| v.abs())
        .collect();
    let strong = (mags.iter().map(|v| v.powf(q)).sum::<f64>() * cell).powf(1.0 / q);
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut weak: f64 = 0.0;
    let mut i = 0;
    while i < mags.len() {
        let t = mags[i];
        if t == 0.0 {
            break;
        }
        let mut j = i;
        while j + 1 < mags.len() && mags[j + 1] == t {
            j += 1;
        }
        let measure = (j + 1) as f64 * cell;
        weak = weak.max(t * measure.powf(1.0 / q));
        i = j + 1;
    }
    Ok(LqNorms { strong, weak })
}

/// Restriction of the field to the hyperplane where the last `m` coordinates vanish.
pub fn trace_restrict(field: &GridField, m: usize) -> Result<GridField> {
    if m >= field.dim {
        return Err(TslError::Parameter(format!(
            "trace codimension m = {m} must be below d = {}",
            field.dim
        )));
    }
    if m == 0 {
        return Ok(field.clone());
    }
    if field.cell_centered {
        return Err(TslError::GridAlignment(
            "cell-centered grid has no node at coordinate 0 on the traced axes".into(),
        ));
    }
    let n = field.n;
    let zero = n / 2;
    let inner = n.pow(m as u32);
    let offset = (0..m).fold(0usize, |acc, _| acc * n + zero);
    let outer = n.pow((field.dim - m) as u32);
    let vals: Vec<f64> = (0..outer)
        .map(|o| field.values[o * inner + offset])
        .collect();
    GridField::from_values(field.dim - m, n, field.l, vals)
}

/// Per-mode lattice normalization Ĉ₁(k₁) = (2L)^{−m} Σ_{k₂} (|k₁|²+|k₂|²)^{−α}
/// for every frequency of the trace grid; the joint zero mode term is omitted
/// and Ĉ₁(0) is returned as +∞ when m = 0.
pub fn lattice_c1(trace: &GridField, m: usize, alpha: f64) -> Vec<f64> {
    let n = trace.n;
    let l = trace.l;
    let extra = n.pow(m as u32);
    let k2_extra: Vec<f64> = (0..extra)
        .map(|e| {
            let mut idx = vec![0; m];
            unflatten(e, m, n, &mut idx);
            idx.iter()
                .map(|&j| (signed_index(j, n) as f64 / (2.0 * l)).powi(2))
                .sum()
        })
        .collect();
    let cell = (2.0 * l).powi(-(m as i32));
    (0..trace.len())
        .into_par_iter()
        .map(|t| {
            let k1 = trace.frequency_sq(t);
            let s: f64 = k2_extra
                .iter()
                .filter(|&&k2| k1 + k2 > 0.0)
                .map(|&k2| (k1 + k2).powf(-alpha))
                .sum();
            if s == 0.0 {
                f64::INFINITY
            } else {
                s * cell
            }
        })
        .collect()
}

/// Weight w(k₁) with ‖ext v‖²_{D_α} = Σ_{k₁} w(k₁)|v̂(k₁)|² for the reduction extension.
fn extension_weights(trace: &GridField, m: usize, alpha: f64) -> Vec<f64> {
    let c1 = lattice_c1(trace, m, alpha);
    let cell = trace.frequency_cell();
    let pref = (2.0 * PI).powf(2.0 * alpha);
    c1.iter()
        .enumerate()
        .map(|(t, c)| {
            if trace.frequency_sq(t) == 0.0 || !c.is_finite() {
                0.0
            } else {
                pref / c * cell
            }
        })
        .collect()
}

/// Norm weights on the trace grid: the D_α multiplier when m = 0 and the
/// extension weights otherwise.
fn trace_norm_weights(trace: &GridField, m: usize, alpha: f64) -> Vec<f64> {
    if m == 0 {
        let cell = trace.frequency_cell();
        (0..trace.len())
            .map(|i| dalpha_weight(trace.frequency_sq(i), alpha) * cell)
            .collect()
    } else {
        extension_weights(trace, m, alpha)
    }
}

/// Relative size of the zero mode below which a trace counts as mean-zero.
const DC_TOLERANCE: f64 = 1e-10;

/// Extension g of a trace to ℝ^n with the extremal Fourier profile
/// ĝ(k₁,k₂) = τ̂f(k₁)(|k₁|²+|k₂|²)^{−α}/Ĉ₁(k₁).
///
/// The extension grid shares N and L with the trace grid; `n_extra` and
/// `l_extra` must match them. The trace must have zero mean.
pub fn reduction_extension(
    trace: &GridField,
    params: &TraceParams,
    n_extra: usize,
    l_extra: f64,
) -> Result<GridField> {
    params.validate_reduction()?;
    let m = params.m;
    if trace.dim != params.big_n() {
        return Err(TslError::Parameter(format!(
            "trace field has dimension {} but n - m = {}",
            trace.dim,
            params.big_n()
        )));
    }
    if n_extra != trace.n || l_extra != trace.l {
        return Err(TslError::Parameter(format!(
            "extension axes (N = {n_extra}, L = {l_extra}) must share the trace grid (N = {}, L = {}) so the spacing is uniform",
            trace.n, trace.l
        )));
    }
    if m == 0 {
        return Ok(trace.clone());
    }
    let spec = trace.spectrum();
    let mass: f64 = trace.values.iter().map(|v| v.abs()).sum::<f64>() * trace.cell_volume();
    if spec[0].norm() > DC_TOLERANCE * mass.max(f64::MIN_POSITIVE) {
        return Err(TslError::MeanZero(format!(
            "trace has zero mode {:.3e}; the joint zero mode of the extension must vanish",
            spec[0].norm()
        )));
    }
    let n = trace.n;
    let l = trace.l;
    let c1 = lattice_c1(trace, m, params.alpha);
    let extra = n.pow(m as u32);
    let k2_extra: Vec<f64> = (0..extra)
        .map(|e| {
            let mut idx = vec![0; m];
            unflatten(e, m, n, &mut idx);
            idx.iter()
                .map(|&j| (signed_index(j, n) as f64 / (2.0 * l)).powi(2))
                .sum()
        })
        .collect();
    let alpha = params.alpha;
    let out: Vec<Complex64> = (0..trace.len() * extra)
        .into_par_iter()
        .map(|i| {
            let (t, e) = (i / extra, i % extra);
            let k1 = trace.frequency_sq(t);
            if k1 == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            spec[t] * ((k1 + k2_extra[e]).powf(-alpha) / c1[t])
        })
        .collect();
    GridField::from_spectrum(params.n, n, l, &out)
}

/// Deficit of the trace inequality at a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceDeficit {
    /// ‖f‖²_{D_α} − S(n,m,α)‖τ_m f‖²_{L^s}.
    pub deficit: f64,
    /// ‖τ_m f‖_{L^s}.
    pub trace_norm_s: f64,
    /// ‖f‖²_{D_α}.
    pub energy: f64,
    /// Discretization tolerance 1e-6·‖f‖²_{D_α} below which a negative deficit is not significant.
    pub tolerance: f64,
}

/// Trace deficit ‖f‖²_{D_α} − S(n,m,α)‖τ_m f‖²_{L^s}.
pub fn trace_deficit(field: &GridField, params: &TraceParams) -> Result<TraceDeficit> {
    params.validate()?;
    if field.dim != params.n {
        return Err(TslError::Parameter(format!(
            "field dimension {} differs from n = {}",
            field.dim, params.n
        )));
    }
    let energy = dalpha_inner(field, field, params.alpha)?;
    let tr = trace_restrict(field, params.m)?;
    let ts = lq_norms(&tr, params.s())?.strong;
    let s = sharp_trace_constant(params)?;
    Ok(TraceDeficit {
        deficit: energy - s * ts * ts,
        trace_norm_s: ts,
        energy,
        tolerance: 1e-6 * energy,
    })
}

/// Parameters (A, γ, a) of an extremal A(γ² + |x − a|²)^{−(N−2β)/2}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalParams {
    /// Amplitude A.
    pub amplitude: f64,
    /// Width γ > 0.
    pub gamma: f64,
    /// Center a ∈ ℝ^N.
    pub center: Vec<f64>,
}

/// Result of the projection onto the extremal manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDistance {
    /// Minimized distance.
    pub distance: f64,
    /// Best parameters found.
    pub best: ExtremalParams,
    /// Whether the best start met the simplex tolerances.
    pub converged: bool,
    /// Total objective evaluations over all starts.
    pub evaluations: usize,
}

/// Samples the extremal profile (γ² + |x − a|²)^{−e} on the grid of `like`.
pub fn sample_extremal(
    like: &GridField,
    gamma: f64,
    center: &[f64],
    exponent: f64,
) -> Result<GridField> {
    let g2 = gamma * gamma;
    let vals: Vec<f64> = (0..like.len())
        .into_par_iter()
        .map(|i| {
            let x = like.point(i);
            let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
            (g2 + r2).powf(-exponent)
        })
        .collect();
    GridField::build(like.dim, like.n, like.l, like.cell_centered, vals)
}

/// Distance to the extremal manifold, minimized over (A, γ, a).
///
/// For m = 0 the distance is measured in D_α on the field grid. For m > 0
/// the field splits orthogonally into f − g and the extension g of its
/// trace; the distance squared is ‖f − g‖² plus the extension-weighted
/// distance of the trace to the (n − m)-dimensional extremals. The optimal
/// amplitude is solved in closed form and the remaining parameters by
/// Nelder–Mead from 8 starts seeded at the field's peak.
pub fn manifold_distance(
    field: &GridField,
    params: &TraceParams,
    seed: u64,
) -> Result<ManifoldDistance> {
    params.validate()?;
    if field.dim != params.n {
        return Err(TslError::Parameter(format!(
            "field dimension {} differs from n = {}",
            field.dim, params.n
        )));
    }
    let trace = trace_restrict(field, params.m)?;
    let weights = trace_norm_weights(&trace, params.m, params.alpha);
    let tspec = trace.spectrum().to_vec();
    let trace_energy: f64 = tspec
        .iter()
        .zip(&weights)
        .map(|(c, w)| c.norm_sqr() * w)
        .sum();
    let base = if params.m == 0 {
        0.0
    } else {
        (dalpha_inner(field, field, params.alpha)? - trace_energy).max(0.0)
    };
    let big_n = params.big_n();
    let exponent = (big_n as f64 - 2.0 * params.beta()) / 2.0;

    let objective = |x: &[f64]| -> (f64, f64) {
        let gamma = x[0].exp();
        let phi = match sample_extremal(&trace, gamma, &x[1..], exponent) {
            Ok(p) => p,
            Err(_) => return (f64::INFINITY, 0.0),
        };
        let ps = phi.spectrum();
        let mut tp = 0.0;
        let mut pp = 0.0;
        for i in 0..ps.len() {
            tp += (tspec[i] * ps[i].conj()).re * weights[i];
            pp += ps[i].norm_sqr() * weights[i];
        }
        if pp <= 0.0 {
            return (trace_energy, 0.0);
        }
        (trace_energy - tp * tp / pp, tp / pp)
    };

    let (peak_idx, peak) = trace
        .values
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, v)| {
            if v.abs() > acc.1 {
                (i, v.abs())
            } else {
                acc
            }
        });
    if peak == 0.0 {
        return Ok(ManifoldDistance {
            distance: base.sqrt(),
            best: ExtremalParams {
                amplitude: 0.0,
                gamma: 1.0,
                center: vec![0.0; big_n],
            },
            converged: true,
            evaluations: 0,
        });
    }
    let above = trace
        .values
        .iter()
        .filter(|v| v.abs() >= 0.5 * peak)
        .count() as f64
        * trace.cell_volume();
    let r_half = (above / crate::special::ball_volume(big_n)).powf(1.0 / big_n as f64);
    let gamma0 = (r_half / (2f64.powf(1.0 / exponent) - 1.0).sqrt()).max(trace.h());
    let center0 = trace.point(peak_idx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut evals = 0;
    for start in 0..8 {
        let mut x0 = vec![gamma0.ln()];
        x0.extend(center0.iter().copied());
        if start > 0 {
            x0[0] += rng.gen_range(-0.7..0.7);
            for c in x0.iter_mut().skip(1) {
                *c += rng.gen_range(-0.5..0.5) * gamma0;
            }
        }
        let mut step = vec![0.3];
        step.extend(std::iter::repeat_n(0.3 * gamma0, big_n));
        let scale = trace_energy.max(f64::MIN_POSITIVE);
        let res = nelder_mead(|x| objective(x).0 / scale, &x0, &step, 1e-15, 1e-9, 4000);
        evals += res.evaluations;
        let better = best.as_ref().is_none_or(|b| res.value < b.1);
        if better {
            best = Some((res.x, res.value, res.converged));
        }
    }
    let (x, _, converged) = best.expect("at least one start");
    let (dist2, amp) = objective(&x);
    Ok(ManifoldDistance {
        distance: (base + dist2.max(0.0)).sqrt(),
        best: ExtremalParams {
            amplitude: amp,
            gamma: x[0].exp(),
            center: x[1..].to_vec(),
        },
        converged,
        evaluations: evals,
    })
}

/// Squared norm of a trace-grid field in the metric used by [`manifold_distance`].
pub fn trace_metric_norm_sq(trace: &GridField, m: usize, alpha: f64) -> f64 {
    let w = trace_norm_weights(trace, m, alpha);
    trace
        .spectrum()
        .iter()
        .zip(&w)
        .map(|(c, w)| c.norm_sqr() * w)
        .sum()
}

/// Ratio ‖g‖²_{D_α}/‖τ_m f‖²_{D_{α−m/2}} for the reduction extension g of a trace.
///
/// On the torus the lattice normalization makes this ratio grid dependent;
/// it tends to R(n, m, α) as the grid is refined.
pub fn reduction_ratio(trace: &GridField, params: &TraceParams) -> Result<f64> {
    params.validate_reduction()?;
    if trace.dim != params.big_n() {
        return Err(TslError::Parameter(format!(
            "trace field has dimension {} but n - m = {}",
            trace.dim,
            params.big_n()
        )));
    }
    let den = dalpha_inner(trace, trace, params.alpha - params.m as f64 / 2.0)?;
    if den <= 0.0 {
        return Err(TslError::Input("trace has zero fractional energy".into()));
    }
    Ok(trace_metric_norm_sq(trace, params.m, params.alpha) / den)
}

/// Richardson extrapolation of values on grids with spacings h and h/2 for
/// an error expansion with leading order h^order.
pub fn richardson(coarse: f64, fine: f64, order: f64) -> f64 {
    let f = 2f64.powf(order);
    (f * fine - coarse) / (f - 1.0)
}

/// Inner product of two trace-grid fields in the metric used by [`manifold_distance`].
pub fn trace_metric_inner(a: &GridField, b: &GridField, m: usize, alpha: f64) -> Result<f64> {
    a.same_grid(b)?;
    let w = trace_norm_weights(a, m, alpha);
    Ok(a.spectrum()
        .iter()
        .zip(b.spectrum())
        .zip(&w)
        .map(|((x, y), w)| (x * y.conj()).re * w)
        .sum())
}

/// Support mask and exponents of a refined embedding estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedEmbeddingSpec {
    /// Mask of Ω on the trace grid (row-major, one entry per trace node).
    pub omega_mask: Vec<bool>,
    /// Weak exponent q₁ = (n−m)/(n−2α).
    pub q1: f64,
    /// Weak exponent q₂ = (n−m)/(n−α−m/2).
    pub q2: f64,
}

impl RefinedEmbeddingSpec {
    /// Builds the spec with the exponents determined by `params`.
    pub fn new(params: &TraceParams, omega_mask: Vec<bool>) -> Result<Self> {
        params.validate()?;
        let n = params.n as f64;
        let m = params.m as f64;
        let q1 = (n - m) / (n - 2.0 * params.alpha);
        let q2 = (n - m) / (n - params.alpha - m / 2.0);
        if !(q1 > q2 && q2 > 1.0) {
            return Err(TslError::Parameter(format!(
                "exponents q1 = {q1}, q2 = {q2} must satisfy q1 > q2 > 1"
            )));
        }
        Ok(RefinedEmbeddingSpec { omega_mask, q1, q2 })
    }
}

/// Quantities entering the refined embedding estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    /// Trace deficit.
    pub deficit: f64,
    /// Measure of Ω inside the trace hyperplane (cell count × cell volume).
    pub omega_measure: f64,
    /// Weak L^{q₁} norm of the trace on Ω.
    pub weak_trace_q1: f64,
    /// Strong L^{q₁} norm of the trace on Ω, for comparison.
    pub strong_trace_q1: f64,
    /// Weak L^{q₂} norm of (−Δ)^{β/2} of the trace on Ω when β = α − m/2 is a positive integer.
    pub weak_derivative_q2: Option<f64>,
    /// Implied constant deficit / (measure^{−1/q₁} · weak_trace_q1²).
    pub implied_c_q1: f64,
    /// Implied constant for the derivative remainder, when defined.
    pub implied_c_q2: Option<f64>,
    /// Implied constant without the measure factor, deficit / weak_trace_q1².
    pub implied_c_unweighted: f64,
    /// The measure of Ω is taken in the (n−m)-dimensional trace hyperplane.
    pub measure_note: String,
}

/// Evaluates both sides of the refined embedding estimates for a field.
pub fn refined_embedding_report(
    field: &GridField,
    spec: &RefinedEmbeddingSpec,
    params: &TraceParams,
) -> Result<EmbeddingReport> {
    let trace = trace_restrict(field, params.m)?;
    if spec.omega_mask.len() != trace.len() {
        return Err(TslError::Parameter(format!(
            "mask has {} entries, trace grid has {}",
            spec.omega_mask.len(),
            trace.len()
        )));
    }
    let tmax = trace.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let outside = trace
        .values
        .iter()
        .zip(&spec.omega_mask)
        .filter(|(_, &m)| !m)
        .fold(0.0f64, |a, (v, _)| a.max(v.abs()));
    if outside > 1e-10 * tmax.max(f64::MIN_POSITIVE) {
        return Err(TslError::Precondition(format!(
            "trace does not vanish outside Omega: max |trace| there is {outside:.3e}"
        )));
    }
    let deficit = trace_deficit(field, params)?.deficit;
    let count = spec.omega_mask.iter().filter(|&&m| m).count();
    let measure = count as f64 * trace.cell_volume();
    let norms = lq_norms_masked(&trace, Some(&spec.omega_mask), spec.q1)?;
    let beta = params.beta();
    let weak_derivative_q2 = if beta >= 1.0 - 1e-12 && (beta - beta.round()).abs() < 1e-12 {
        let spec_t = trace.spectrum();
        let d: Vec<Complex64> = spec_t
            .iter()
            .enumerate()
            .map(|(i, c)| c * (4.0 * PI * PI * trace.frequency_sq(i)).powf(beta / 2.0))
            .collect();
        let der = GridField::from_spectrum(trace.dim, trace.n, trace.l, &d)?;
        Some(lq_norms_masked(&der, Some(&spec.omega_mask), spec.q2)?.weak)
    } else {
        None
    };
    let factor = measure.powf(-1.0 / spec.q1);
    let implied_c_q1 = deficit / (factor * norms.weak * norms.weak);
    let implied_c_q2 = weak_derivative_q2.map(|w| deficit / (factor * w * w));
    Ok(EmbeddingReport {
        deficit,
        omega_measure: measure,
        weak_trace_q1: norms.weak,
        strong_trace_q1: norms.strong,
        weak_derivative_q2,
        implied_c_q1,
        implied_c_q2,
        implied_c_unweighted: deficit / (norms.weak * norms.weak),
        measure_note: format!(
            "measure of Omega counted in the {}-dimensional trace hyperplane",
            params.big_n()
        ),
    })
}

/// Magic bytes of a grid snapshot file.
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"TSLF";
/// Current snapshot format version.
pub const SNAPSHOT_VERSION: u16 = 1;
/// Snapshot flag: nodes are cell-centered.
pub const FLAG_CELL_CENTERED: u32 = 1;

/// Writes the 32-byte header and the little-endian samples.
pub fn write_snapshot<W: Write>(field: &GridField, mut w: W) -> Result<()> {
    let mut header = [0u8; 32];
    header[0..4].copy_from_slice(SNAPSHOT_MAGIC);
    header[4..6].copy_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    header[6..8].copy_from_slice(&(field.dim as u16).to_le_bytes());
    header[8..12].copy_from_slice(&(field.n as u32).to_le_bytes());
    header[12..20].copy_from_slice(&field.l.to_le_bytes());
    let flags = if field.cell_centered {
        FLAG_CELL_CENTERED
    } else {
        0
    };
    header[20..24].copy_from_slice(&flags.to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot<R: Read>(mut r: R) -> Result<GridField> {
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[0..4] != SNAPSHOT_MAGIC {
        return Err(TslError::Input("not a grid snapshot: bad magic".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != SNAPSHOT_VERSION {
        return Err(TslError::Input(format!(
            "unsupported snapshot version {version}"
        )));
    }
    let dim = u16::from_le_bytes([header[6], header[7]]) as usize;
    let n = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let l = f64::from_le_bytes(header[12..20].try_into().expect("8 bytes"));
    let flags = u32::from_le_bytes(header[20..24].try_into().expect("4 bytes"));
    if header[24..32].iter().any(|&b| b != 0) {
        return Err(TslError::Input(
            "snapshot header padding is not zero".into(),
        ));
    }
    check_grid(dim, n, l)?;
    let count = n
        .checked_pow(dim as u32)
        .ok_or_else(|| TslError::Input("snapshot grid size overflows".into()))?;
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    GridField::build(dim, n, l, flags & FLAG_CELL_CENTERED != 0, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_places_origin_at_center_node() {
        let f = GridField::sample(|x| (-(x[0] * x[0] + x[1] * x[1])).exp(), 2, 16, 4.0).unwrap();
        assert_eq!(f.values()[8 * 16 + 8], 1.0);
        assert!(GridField::sample(|_| f64::NAN, 1, 8, 1.0)
            .unwrap_err()
            .to_string()
            .contains("node [0]"));
        assert!(GridField::sample(|_| 1.0, 1, 12, 1.0).is_err());
    }

    #[test]
    fn spectrum_round_trip() {
        let f =
            GridField::sample(|x| (x[0] - 0.3).sin() * (-x[0] * x[0]).exp(), 1, 64, 6.0).unwrap();
        let g = GridField::from_spectrum(1, 64, 6.0, f.spectrum()).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn weak_norm_of_indicator() {
        let f =
            GridField::sample(|x| if x[0].abs() < 1.0 { 1.0 } else { 0.0 }, 1, 64, 4.0).unwrap();
        let r = lq_norms(&f, 2.0).unwrap();
        assert!((r.strong - r.weak).abs() < 1e-14);
    }

    #[test]
    fn cell_centered_trace_is_misaligned() {
        let f = GridField::from_values_cell_centered(2, 4, 1.0, vec![0.0; 16]).unwrap();
        assert!(matches!(
            trace_restrict(&f, 1),
            Err(TslError::GridAlignment(_))
        ));
    }

    #[test]
    fn snapshot_rejects_bad_magic() {
        let bytes = [0u8; 40];
        assert!(read_snapshot(&bytes[..]).is_err());
    }
}
