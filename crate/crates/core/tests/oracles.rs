//! Point checks against independently computed reference values.
//!
//! Reference numbers marked "mpmath" were produced with 30-digit arithmetic
//! outside this crate and frozen here; the rest are closed forms evaluated
//! in the test itself.

#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;
use tsl::bubbles::{
    bubble_energy, eval_bubble, family_check, interaction_integral, interaction_mu, Bubble,
    BubbleFamily, LogCutoff, WorstEntry,
};
use tsl::constants::{
    be_bounds, c1_constant, escobar_constant, harmonic_dimension, reduction_constant,
    sharp_trace_constant, spectral_constants, TraceParams,
};
use tsl::grid::{dalpha_norm, read_snapshot, trace_restrict, write_snapshot, GridField};
use tsl::lab::{normalize_direction, one_bubble_quotient_scan, symmetric_direction};
use tsl::neumann::{neumann_extend, FieldModel};
use tsl::poly::Poly;
use tsl::special::{epstein_zeta, gamma, ln_gamma, sphere_monomial_integral};
use tsl::steklov::{
    ball_to_half, build_basis, spectral_gap_quotient_poly, steklov_decompose_poly,
    transport_to_ball,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn gamma_matches_mpmath() {
    for (x, v) in [
        (0.3, 2.991_568_987_687_590_74),
        (2.5, 1.329_340_388_179_137_02),
        (7.0, 720.0),
    ] {
        assert!(rel(gamma(x), v) < 1e-13, "Γ({x}) = {}", gamma(x));
    }
}

#[test]
fn ln_gamma_matches_mpmath() {
    let table = [
        (0.1, 2.252_712_651_734_205_90),
        (0.5, 0.572_364_942_924_700_087),
        (1.5, -0.120_782_237_635_245_222),
        (3.7, 1.428_072_326_665_388_13),
        (10.25, 13.368_023_671_476_046_3),
        (42.0, 114.034_211_781_461_703),
    ];
    for (x, v) in table {
        assert!(
            (ln_gamma(x) - v).abs() < 1e-13 * v.abs().max(1.0),
            "lnΓ({x}) = {}",
            ln_gamma(x)
        );
    }
}

#[test]
fn epstein_zeta_matches_mpmath() {
    // Z₂(1) = 4ζ(½)β(½) and Z₃(2), both by lattice sums in mpmath.
    assert!((epstein_zeta(2, 1.0) - (-3.900_264_920_001_955_88)).abs() < 1e-12);
    assert!((epstein_zeta(3, 2.0) - (-8.913_632_917_585_151_27)).abs() < 1e-11);
}

#[test]
fn sharp_trace_constants_match_closed_forms() {
    let s311 = sharp_trace_constant(&TraceParams::new(3, 1, 1.0).unwrap()).unwrap();
    let s301 = sharp_trace_constant(&TraceParams::new(3, 0, 1.0).unwrap()).unwrap();
    assert!((s311 - 2.0 * PI.sqrt()).abs() < 1e-12);
    assert!((s311 - 3.544_907_701_811_032_05).abs() < 1e-12);
    assert!((s301 - 3.0 * (PI / 2.0).powf(4.0 / 3.0)).abs() < 1e-12);
    assert!((s301 - 5.477_904_089_531_331_87).abs() < 1e-12);
}

#[test]
fn escobar_constants_match_mpmath() {
    let table = [
        (3, 1.772_453_850_905_516_03, PI),
        (4, 2.702_567_690_063_490_19, 19.739_208_802_178_717_2),
        (5, 3.397_491_496_892_490_66, 133.239_659_414_706_341),
    ];
    for (n, se, power) in table {
        let v = escobar_constant(n).unwrap();
        assert!(rel(v, se) < 1e-13, "S_E({n}) = {v}");
        assert!(rel(v.powi(n as i32 - 1), power) < 1e-12);
        let half = sharp_trace_constant(&TraceParams::new(n, 1, 1.0).unwrap()).unwrap() / 2.0;
        assert!((v - half).abs() < 1e-12);
    }
}

#[test]
fn reduction_constant_examples() {
    let r = |n, m, a| reduction_constant(&TraceParams::new(n, m, a).unwrap()).unwrap();
    assert!((r(3, 1, 1.0) - 2.0).abs() < 1e-12);
    assert!((r(4, 2, 1.5) - 2.0 * PI).abs() < 1e-12);
    for (n, a) in [(3, 0.7), (5, 1.2), (2, 0.4)] {
        assert!((r(n, 0, a) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn c1_constant_examples() {
    assert!((c1_constant(1, 1.0).unwrap() - PI).abs() < 1e-12);
    assert!((c1_constant(2, 2.0).unwrap() - PI).abs() < 1e-12);
    assert!((c1_constant(0, 1.0).unwrap() - 1.0).abs() < 1e-14);
    assert!(c1_constant(2, 1.0).is_err());
}

#[test]
fn stability_bound_examples() {
    // min{(4α − 2m)/(n + 2α + 2 − 2m), 2 − 2^{(n−2α)/(n−m)}} = min{2/5, 2 − √2}.
    let b = be_bounds(&TraceParams::new(3, 1, 1.0).unwrap(), None).unwrap();
    assert!((b.upper - 0.4).abs() < 1e-14 && b.upper_strict);
    // The n − m = 1 branch (4α − 2m)/(4 + 2α); α = n/2 lies outside the parameter domain.
    let b = be_bounds(&TraceParams::new(2, 1, 0.75).unwrap(), None).unwrap();
    assert!((b.upper - 1.0 / 5.5).abs() < 1e-14 && !b.upper_strict);
    assert!(TraceParams::new(2, 1, 1.0).is_err());
    let b = be_bounds(&TraceParams::new(3, 0, 1.0).unwrap(), Some(1.0)).unwrap();
    // min{1, 1, 2^{5/3} − 2}/4 with 2^{5/3} − 2 ≈ 1.17, so the minimum is 1.
    assert!(2f64.powf(5.0 / 3.0) - 2.0 > 1.0);
    assert!((b.lower - 0.25).abs() < 1e-15);
    let b = be_bounds(&TraceParams::new(3, 0, 1.0).unwrap(), Some(0.5)).unwrap();
    assert!((b.lower - 0.125).abs() < 1e-15);
}

#[test]
fn spectral_constant_examples() {
    let s = spectral_constants(3, 2).unwrap();
    assert_eq!((s.kappa, s.multiplicity), (5.0, 5));
    assert!((s.cp_upper - 0.4).abs() < 1e-15);
    let s = spectral_constants(3, 0).unwrap();
    assert_eq!((s.kappa, s.multiplicity), (1.0, 1));
    let s = spectral_constants(4, 1).unwrap();
    assert_eq!((s.kappa, s.multiplicity), (2.0, 4));
    assert!((s.cp_upper - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(harmonic_dimension(3, 3), 7);
}

#[test]
fn bubble_plug_in_values() {
    let u = Bubble::standard(3);
    assert!((eval_bubble(&u, &[0.0, 0.0], 0.0).unwrap().value - 1.0).abs() < 1e-15);
    assert!((eval_bubble(&u, &[1.0, 0.0], 0.0).unwrap().value - 0.5f64.sqrt()).abs() < 1e-15);
    assert!((eval_bubble(&u, &[0.0, 0.0], 0.0).unwrap().d_lambda - 0.5).abs() < 1e-15);
    assert!(eval_bubble(&u, &[0.0, 0.0], -0.1).is_err());
}

#[test]
fn bubble_energy_is_pi_in_three_dimensions() {
    for lambda in [1.0, 10.0, 0.25] {
        let e = bubble_energy(&Bubble::new(vec![0.3, -1.0], lambda).unwrap()).unwrap();
        assert!((e.h1_norm_sq - PI).abs() < 1e-10);
        assert!((e.boundary_mass - PI).abs() < 1e-10);
    }
}

#[test]
fn interaction_mu_examples() {
    let a = Bubble::new(vec![0.0, 0.0], 100.0).unwrap();
    let b = Bubble::new(vec![0.0, 0.0], 1.0).unwrap();
    assert!((interaction_mu(&a, &b) - 0.01).abs() < 1e-15);
    let c = Bubble::new(vec![10.0, 0.0], 1.0).unwrap();
    assert!((interaction_mu(&b, &c) - 0.01).abs() < 1e-15);
    assert_eq!(interaction_mu(&b, &b), 1.0);
}

#[test]
fn interaction_integrals_match_mpmath() {
    // ∫_{ℝ²} U[0,1]³ U[(d,0),1] by split polar quadrature in mpmath, d = μ^{−1/2}.
    let table = [
        (1e-2, 0.616_117_009_400_542_07),
        (1e-3, 0.198_295_569_975_905_31),
        (1e-4, 0.062_819_290_469_836_49),
    ];
    let u = Bubble::standard(3);
    for (mu, v) in table {
        let w = Bubble::new(vec![1.0 / f64::sqrt(mu), 0.0], 1.0).unwrap();
        let got = interaction_integral(&u, &w, 3.0, 1.0).unwrap();
        assert!(rel(got, v) < 1e-8, "μ = {mu}: {got} vs {v}");
    }
    let far = Bubble::new(vec![100.0, 0.0], 1.0).unwrap();
    let approx = 2.0 * PI / (1.0f64 + 100.0 * 100.0).sqrt();
    assert!(rel(interaction_integral(&u, &far, 3.0, 1.0).unwrap(), approx) < 0.02);
    for n in [3, 4, 5] {
        let b = Bubble::standard(n);
        let p = n as f64 / (n as f64 - 2.0);
        let same = interaction_integral(&b, &b, p, 1.0).unwrap();
        assert!(rel(same, escobar_constant(n).unwrap().powi(n as i32 - 1)) < 1e-9);
    }
}

#[test]
fn family_check_examples() {
    let b1 = Bubble::new(vec![0.0, 0.0], 100.0).unwrap();
    let b2 = Bubble::new(vec![0.0, 0.0], 1.0).unwrap();
    let fam = BubbleFamily::new(3, vec![b1.clone(), b2.clone()], vec![1.0, 1.0]).unwrap();
    assert!(family_check(&fam, 0.01).unwrap().is_delta_interacting);
    let fam = BubbleFamily::new(3, vec![b1, b2.clone()], vec![1.05, 1.0]).unwrap();
    let c = family_check(&fam, 0.01).unwrap();
    assert!(!c.is_delta_interacting);
    assert!(matches!(c.worst, WorstEntry::Coefficient { i: 0, .. }));
    let single = BubbleFamily::new(3, vec![b2], vec![1.0]).unwrap();
    assert!(family_check(&single, 1e-9).unwrap().is_delta_interacting);
}

#[test]
fn log_cutoff_examples() {
    let phi = LogCutoff::new(vec![0.0, 0.0, 0.0], 1.0, 100.0).unwrap();
    assert!((phi.eval(&[10.0, 0.0, 0.0]) - 0.5).abs() < 1e-14);
    let phi = LogCutoff::new(vec![0.0, 0.0, 0.0], 1.0, std::f64::consts::E.powi(2)).unwrap();
    // Half of 4π times (ln R/r)^{−2}, to the power 1/3.
    assert!((phi.gradient_ln_norm() - (PI / 2.0).powf(1.0 / 3.0)).abs() < 1e-12);
}

#[test]
fn conformal_map_examples() {
    let p = ball_to_half(&[0.0, 0.0, 0.0]).unwrap();
    assert!(p[0].abs() < 1e-15 && p[1].abs() < 1e-15 && (p[2] - 1.0).abs() < 1e-15);
    let p = ball_to_half(&[0.0, 0.0, 1.0]).unwrap();
    assert!(p.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn transported_bubble_and_translation_mode() {
    let u = Bubble::standard(3);
    let one = transport_to_ball(|x: &[f64], t: f64| u.value(x, t), 3);
    let dz = transport_to_ball(
        |x: &[f64], t: f64| eval_bubble(&u, x, t).unwrap().d_center[0],
        3,
    );
    let pts = [
        [0.1, 0.2, 0.3],
        [-0.5, 0.1, -0.2],
        [0.0, 0.6, 0.1],
        [0.3, -0.3, -0.6],
    ];
    for y in pts {
        assert!((one(&y) - 1.0).abs() < 1e-12);
        // Differentiating U in z₁ and transporting gives +½y₁.
        assert!((dz(&y) - 0.5 * y[0]).abs() < 1e-10);
    }
}

#[test]
fn basis_counts_and_finite_expansion() {
    let basis = build_basis(3, 2).unwrap();
    let counts: Vec<usize> = basis.degrees.iter().map(|d| d.len()).collect();
    assert_eq!(counts, vec![1, 3, 5]);
    let y = |i| Poly::coordinate(3, i);
    let f = Poly::constant(3, 1.0).add(&y(2)).add(&y(0).mul(&y(1)));
    let dec = steklov_decompose_poly(&f, &basis, None);
    assert!((dec.degree_mass(0) - 4.0 * PI).abs() < 1e-12);
    assert!((dec.degree_mass(1) - 4.0 * PI / 3.0).abs() < 1e-12);
    assert!((dec.degree_mass(2) - 4.0 * PI / 15.0).abs() < 1e-12);
    assert!(dec.truncation_residual.abs() < 1e-10);
}

#[test]
fn spectral_gap_quotient_examples() {
    let basis = build_basis(3, 3).unwrap();
    let y = |i| Poly::coordinate(3, i);
    let q2 = y(0).mul(&y(1));
    assert!((spectral_gap_quotient_poly(&q2, &basis).unwrap() - 5.0).abs() < 1e-9);
    let q3 = y(0).mul(&y(1)).mul(&y(2));
    assert!((spectral_gap_quotient_poly(&q3, &basis).unwrap() - 7.0).abs() < 1e-9);
    let mixed = spectral_gap_quotient_poly(&q2.add(&q3), &basis).unwrap();
    assert!(mixed > 5.0 + 1e-6 && mixed < 7.0 - 1e-6);
    assert!(spectral_gap_quotient_poly(&y(0), &basis).is_err());
}

#[test]
fn cubic_sphere_integrals() {
    // ∫_{S²}(y₁y₂ + y₂y₃ + y₁y₃)³ = 6∫y₁²y₂²y₃² = 8π/35.
    let s = symmetric_direction(3).scale(-1.0);
    let cube = s.pow(3);
    let direct: f64 = cube
        .coefficient_table()
        .iter()
        .map(|(e, c)| c * sphere_monomial_integral(e))
        .sum();
    assert!((direct - 8.0 * PI / 35.0).abs() < 1e-13);
    // Normalized to unit transported H¹ norm, c^{n−1}∫q³ = −2/(35√π).
    let q = normalize_direction(&symmetric_direction(3), 2);
    let cubic = q.pow(3).sphere_integral() * 0.25;
    assert!((cubic + 2.0 / (35.0 * PI.sqrt())).abs() < 1e-13);
}

#[test]
fn quotient_scan_limit_and_slope_coefficient() {
    let rep = one_bubble_quotient_scan(3, &symmetric_direction(3), "symmetric", &[0.01, 0.02, 0.04, 0.08])
        .unwrap();
    assert!((rep.cubic_integral + 2.0 / (35.0 * PI.sqrt())).abs() < 1e-12);
    // p(p − 1)(p/κ₂ − 1) c^{n−1}∫q³ with p = 3, κ₂ = 5.
    let analytic = 6.0 * (3.0 / 5.0 - 1.0) * (-2.0 / (35.0 * PI.sqrt()));
    assert!(rel(rep.analytic_slope_prediction, analytic) < 1e-12);
    assert!((rep.target_limit - 0.4).abs() < 1e-15);
}

#[test]
fn gaussian_dalpha_norm() {
    let g = GridField::sample(|x| (-PI * x[0] * x[0]).exp(), 1, 256, 8.0).unwrap();
    let v = dalpha_norm(&g, 1.0).unwrap();
    assert!((v * v - PI / 2f64.sqrt()).abs() < 1e-10);
    let l2 = dalpha_norm(&g, 0.0).unwrap();
    assert!((l2 * l2 - 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn product_field_trace() {
    let f = GridField::sample(|x| (x[0]).cos() * (1.0 + x[1] * x[1]).recip(), 2, 32, 4.0).unwrap();
    let t = trace_restrict(&f, 1).unwrap();
    for (i, v) in t.values().iter().enumerate() {
        assert!((v - t.coord(i).cos()).abs() < 1e-14);
    }
}

#[test]
fn snapshot_round_trip() {
    let f = GridField::sample(|x| x[0].sin() + 2.0 * x[1], 2, 16, 3.0).unwrap();
    let mut buf = Vec::new();
    write_snapshot(&f, &mut buf).unwrap();
    assert_eq!(buf.len(), 32 + 8 * 256);
    assert_eq!(read_snapshot(buf.as_slice()).unwrap(), f);
    buf[0] = b'X';
    assert!(read_snapshot(buf.as_slice()).is_err());
}

#[test]
fn periodic_neumann_single_mode() {
    // −∂_t u = cos(kx) on t = 0 gives u = cos(kx) e^{−kt}/k.
    let (n, l) = (64, 4.0);
    let k = 3.0 * PI / l;
    let g = GridField::sample(|x| (k * x[0]).cos() * (k * x[1]).cos(), 2, n, l).unwrap();
    let kk = k * 2f64.sqrt();
    let ext = neumann_extend(&g, &[0.0, 0.7], FieldModel::Periodic).unwrap();
    for (t, u) in [0.0, 0.7].iter().zip(&ext) {
        for (i, v) in u.values().iter().enumerate() {
            let want = g.values()[i] * (-kk * t).exp() / kk;
            assert!((v - want).abs() < 1e-12);
        }
    }
}
