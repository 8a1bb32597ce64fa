//! Derivative-free minimization (Nelder–Mead simplex) and small dense
//! least-squares helpers.

/// Outcome of a simplex minimization.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    /// Best point found.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub value: f64,
    /// Whether the simplex met the tolerances before the iteration cap.
    pub converged: bool,
    /// Number of objective evaluations.
    pub evaluations: usize,
}

/// Nelder–Mead minimization of `f` from `x0` with initial step sizes `step`.
///
/// Stops when the spread of objective values and the simplex diameter are
/// both below `ftol` and `xtol`, or after `max_evals` evaluations.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    ftol: f64,
    xtol: f64,
    max_evals: usize,
) -> SimplexResult {
    let d = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = d + 1;
    let mut converged = false;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = (vals[d] - vals[0]).abs();
        let diam = pts[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&pts[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= ftol && diam <= xtol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| pts[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..d)
                .map(|j| centroid[j] + t * (pts[d][j] - centroid[j]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[d] = xe;
                vals[d] = fe;
            } else {
                pts[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            pts[d] = xr;
            vals[d] = fr;
        } else {
            let (xc, fc) = if fr < vals[d] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if fc < vals[d].min(fr) {
                pts[d] = xc;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    let p: Vec<f64> = (0..d)
                        .map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]))
                        .collect();
                    vals[i] = f(&p);
                    pts[i] = p;
                }
                evals += d;
            }
        }
    }
    let best = (0..=d)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap_or(0);
    SimplexResult {
        x: pts[best].clone(),
        value: vals[best],
        converged,
        evaluations: evals,
    }
}

/// Ordinary least-squares fit of y ≈ Σ_j c_j x^j for j < `degree + 1`.
///
/// Returns the coefficients and their standard errors (from the residual
/// variance; zero when the fit is exactly determined).
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> (Vec<f64>, Vec<f64>) {
    use nalgebra::{DMatrix, DVector};
    let k = degree + 1;
    let m = xs.len();
    assert!(m >= k, "need at least degree + 1 points");
    let a = DMatrix::from_fn(m, k, |i, j| xs[i].powi(j as i32));
    let y = DVector::from_column_slice(ys);
    let ata = a.transpose() * &a;
    let aty = a.transpose() * &y;
    let inv = ata
        .clone()
        .try_inverse()
        .expect("Vandermonde normal matrix is singular");
    let c = &inv * aty;
    let resid = &y - &a * &c;
    let dof = m as f64 - k as f64;
    let s2 = if dof > 0.0 {
        resid.norm_squared() / dof
    } else {
        0.0
    };
    let se: Vec<f64> = (0..k).map(|j| (s2 * inv[(j, j)]).sqrt()).collect();
    (c.iter().copied().collect(), se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let r = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.5, 0.5],
            1e-20,
            1e-10,
            20_000,
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn polyfit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (c, se) = polyfit(&xs, &ys, 1);
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] + 0.5).abs() < 1e-12);
        assert!(se[1] < 1e-10);
    }
}
