//! Special functions: the Gamma function, incomplete Gamma at half-integer
//! orders, the cubic-lattice Epstein zeta function, binomial coefficients and
//! the measures of spheres and balls.

use std::f64::consts::PI;

/// Lanczos parameter `g`.
const LANCZOS_G: f64 = 7.0;

/// Lanczos series coefficients for `g = 7`, nine terms.
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Partial fraction sum of the Lanczos approximation at `x` (already shifted by one).
fn lanczos_sum(x: f64) -> f64 {
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// The Gamma function Γ(x) for real `x`.
///
/// Uses the Lanczos approximation for `x ≥ 1/2` and the reflection formula
/// below. Nonpositive integers return `NaN`. Relative accuracy is close to
/// machine precision for moderate arguments.
pub fn gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return f64::NAN;
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    // Exact values for small positive integers and half integers avoid the
    // approximation error where the Gamma function is used most often.
    if x == x.floor() && x <= 30.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f;
    }
    let y = x - 1.0;
    let t = y + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(y + 0.5) * (-t).exp() * lanczos_sum(y)
}

/// Natural logarithm of |Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return f64::INFINITY;
    }
    if x < 0.5 {
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let y = x - 1.0;
    let t = y + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (y + 0.5) * t.ln() - t + lanczos_sum(y).ln()
}

/// Ratio Γ(a)/Γ(b) computed through logarithms when the factors are large.
pub fn gamma_ratio(a: f64, b: f64) -> f64 {
    if a.abs() < 100.0 && b.abs() < 100.0 {
        gamma(a) / gamma(b)
    } else {
        (ln_gamma(a) - ln_gamma(b)).exp()
    }
}

/// Binomial coefficient C(a, b) for integers with the convention that it
/// vanishes when `a < b`, `b < 0` or `a < 0`.
pub fn binomial(a: i64, b: i64) -> u64 {
    if a < 0 || b < 0 || a < b {
        return 0;
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for i in 0..b {
        acc = acc * (a - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Surface measure of the unit sphere S^{d−1} ⊂ ℝ^d, that is 2π^{d/2}/Γ(d/2).
pub fn sphere_area(d: usize) -> f64 {
    assert!(d >= 1, "sphere dimension must be positive");
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// Volume of the unit ball in ℝ^d, that is π^{d/2}/Γ(d/2 + 1).
pub fn ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

/// Upper incomplete Gamma function Γ(a, x) for a a positive multiple of 1/2.
pub fn upper_gamma_half_integer(a: f64, x: f64) -> f64 {
    assert!(
        a > 0.0 && (2.0 * a).fract() == 0.0,
        "a must be a positive multiple of 1/2"
    );
    let (mut cur, mut g) = if (2.0 * a) as u64 % 2 == 1 {
        (0.5, PI.sqrt() * libm::erfc(x.sqrt()))
    } else {
        (1.0, (-x).exp())
    };
    while cur < a {
        g = cur * g + x.powf(cur) * (-x).exp();
        cur += 1.0;
    }
    g
}

/// Epstein zeta function Z(s) = Σ'_{j ∈ ℤ^d} |j|^{−s} of the cubic lattice,
/// analytically continued, for s a positive multiple of 1/2 with s ≠ d.
///
/// Evaluated by the theta-function splitting
/// π^{−s/2}Γ(s/2)Z(s) = −2/s − 2/(d−s) + Σ' [Γ(s/2, π|j|²)(π|j|²)^{−s/2} + Γ((d−s)/2, π|j|²)(π|j|²)^{−(d−s)/2}].
pub fn epstein_zeta(d: usize, s: f64) -> f64 {
    let df = d as f64;
    assert!(
        s > 0.0 && s < df,
        "the cubic-lattice zeta is evaluated for 0 < s < d"
    );
    let reach: i64 = 7;
    let side = (2 * reach + 1) as usize;
    let mut acc = -2.0 / s - 2.0 / (df - s);
    let mut idx = vec![0usize; d];
    for flat in 0..side.pow(d as u32) {
        let mut r = flat;
        for slot in idx.iter_mut() {
            *slot = r % side;
            r /= side;
        }
        let j2: i64 = idx.iter().map(|&k| (k as i64 - reach).pow(2)).sum();
        if j2 == 0 || j2 > reach * reach {
            continue;
        }
        let x = PI * j2 as f64;
        acc += upper_gamma_half_integer(s / 2.0, x) * x.powf(-s / 2.0)
            + upper_gamma_half_integer((df - s) / 2.0, x) * x.powf(-(df - s) / 2.0);
    }
    acc * PI.powf(s / 2.0) / gamma(s / 2.0)
}

/// Integral of the monomial y^e over the unit sphere S^{d−1} with surface measure.
///
/// Vanishes unless every exponent is even; otherwise equals
/// 2 Π Γ((e_i+1)/2) / Γ((|e|+d)/2).
pub fn sphere_monomial_integral(exponents: &[u32]) -> f64 {
    if exponents.iter().any(|e| e % 2 == 1) {
        return 0.0;
    }
    let d = exponents.len() as f64;
    let total: u32 = exponents.iter().sum();
    let mut ln = 0.0;
    for &e in exponents {
        ln += ln_gamma((e as f64 + 1.0) / 2.0);
    }
    ln -= ln_gamma((total as f64 + d) / 2.0);
    2.0 * ln.exp()
}

/// Integral of the monomial y^e over the unit ball B^d.
///
/// Equals the sphere integral divided by |e| + d.
pub fn ball_monomial_integral(exponents: &[u32]) -> f64 {
    let total: u32 = exponents.iter().sum();
    sphere_monomial_integral(exponents) / (total as f64 + exponents.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_small_values() {
        assert_eq!(gamma(1.0), 1.0);
        assert_eq!(gamma(5.0), 24.0);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma(1.5) - 0.5 * PI.sqrt()).abs() < 1e-15);
        assert!((gamma(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-14);
        assert!(gamma(0.0).is_nan());
        assert!(gamma(-3.0).is_nan());
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &x in &[0.1, 0.7, 1.3, 2.5, 7.25, 17.0, 33.3] {
            assert!((ln_gamma(x) - gamma(x).ln()).abs() < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn binomial_convention() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(1, 2), 0);
        assert_eq!(binomial(-1, 2), 0);
        assert_eq!(binomial(7, 0), 1);
    }

    #[test]
    fn sphere_and_ball_measures() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((sphere_monomial_integral(&[0, 0, 0]) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_monomial_integral(&[2, 0, 0]) - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!((sphere_monomial_integral(&[2, 2, 2]) - 4.0 * PI / 105.0).abs() < 1e-14);
        assert_eq!(sphere_monomial_integral(&[1, 2, 0]), 0.0);
        assert!((ball_monomial_integral(&[0, 0, 0]) - 4.0 * PI / 3.0).abs() < 1e-13);
    }
}
