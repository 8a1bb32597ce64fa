//! Property tests of the invariants that hold for every admissible input.

use proptest::prelude::*;
use tsl::bubbles::{bubble_energy, interaction_integral, Bubble};
use tsl::cli::run_experiment;
use tsl::config::parse_config;
use tsl::constants::{reduction_constant, sharp_trace_constant, TraceParams};
use tsl::grid::{dalpha_norm, lq_norms, GridField};
use tsl::lab::{symmetric_direction, single_pair_lhs};
use tsl::neumann::BallCalculus;
use tsl::poly::Poly;
use tsl::report::{render_report, Format};
use tsl::steklov::{ball_to_half, build_basis, half_to_ball, spectral_gap_quotient_poly};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn triple() -> impl Strategy<Value = (usize, usize, f64)> {
    (2usize..=7)
        .prop_flat_map(|n| (Just(n), 0..n))
        .prop_flat_map(|(n, m)| {
            let lo = m as f64 / 2.0;
            let hi = n as f64 / 2.0;
            (
                Just(n),
                Just(m),
                (0.01f64..0.99).prop_map(move |f| lo + f * (hi - lo)),
            )
        })
}

/// Rotation matrix from a unit quaternion.
fn rotation(q: [f64; 4]) -> [[f64; 3]; 3] {
    let s = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / s);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn composition_identity_holds((n, m, alpha) in triple()) {
        let t = TraceParams::new(n, m, alpha).unwrap();
        let lhs = sharp_trace_constant(&t).unwrap();
        let rhs = reduction_constant(&t).unwrap() * sharp_trace_constant(&t.reduced()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs, "{lhs} vs {rhs}");
    }

    #[test]
    fn map_round_trip(y in prop::collection::vec(-1.0f64..1.0, 3)) {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(r < 0.999);
        let back = half_to_ball(&ball_to_half(&y).unwrap()).unwrap();
        for (a, b) in y.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn elementary_single_pair_bound(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        prop_assume!(b != 0.0);
        let lhs = single_pair_lhs(a, b, 3.0);
        let rhs = a.abs() * b * b + b.abs().powi(3);
        prop_assert!(lhs <= 3.0 * rhs * (1.0 + 1e-12), "a = {a}, b = {b}: {lhs} > 3·{rhs}");
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn parseval_and_weak_below_strong(
        seed_vals in prop::collection::vec(-2.0f64..2.0, 64),
        q in 1.0f64..6.0,
    ) {
        let f = GridField::from_values(1, 64, 3.0, seed_vals.clone()).unwrap();
        let l2 = dalpha_norm(&f, 0.0).unwrap();
        let direct = (seed_vals.iter().map(|v| v * v).sum::<f64>() * f.cell_volume()).sqrt();
        prop_assert!((l2 - direct).abs() <= 1e-12 * direct.max(1e-300));
        let norms = lq_norms(&f, q).unwrap();
        prop_assert!(norms.weak <= norms.strong * (1.0 + 1e-12));
    }

    #[test]
    fn energy_is_scale_and_translation_invariant(
        n in 3usize..=5,
        z in prop::collection::vec(-5.0f64..5.0, 4),
        log_lambda in -2.0f64..2.0,
    ) {
        let b = Bubble::new(z[..n - 1].to_vec(), log_lambda.exp()).unwrap();
        let e = bubble_energy(&b).unwrap();
        let e0 = bubble_energy(&Bubble::standard(n)).unwrap();
        prop_assert!((e.h1_norm_sq - e0.h1_norm_sq).abs() <= 1e-9 * e0.h1_norm_sq);
        prop_assert!((e.boundary_mass - e0.boundary_mass).abs() <= 1e-9 * e0.boundary_mass);
    }

    #[test]
    fn gap_holds_for_orthogonal_polynomials(
        coeffs in prop::collection::vec(-1.0f64..1.0, 21),
        scales in prop::collection::vec(-3.0f64..1.0, 3),
    ) {
        let basis = build_basis(3, 4).unwrap();
        let mut p = Poly::zero(3);
        let mut it = coeffs.iter();
        for k in 2..=4 {
            for q in &basis.degrees[k] {
                p = p.add(&q.scale(10f64.powf(scales[k - 2]) * it.next().unwrap()));
            }
        }
        prop_assume!(!p.terms.is_empty());
        prop_assert!(spectral_gap_quotient_poly(&p, &basis).unwrap() >= 5.0 - 1e-9);
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn interaction_is_invariant_under_common_scaling(
        z2 in prop::collection::vec(-6.0f64..6.0, 2),
        log_ratio in -1.0f64..1.0,
        log_l0 in -1.5f64..1.5,
        shift in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let b1 = Bubble::new(vec![0.0, 0.0], 1.0).unwrap();
        let b2 = Bubble::new(z2.clone(), log_ratio.exp()).unwrap();
        let l0 = log_l0.exp();
        let map = |b: &Bubble| {
            Bubble::new(b.z.iter().zip(&shift).map(|(v, c)| l0 * v + c).collect(), b.lambda / l0).unwrap()
        };
        let a = interaction_integral(&b1, &b2, 3.0, 1.0).unwrap();
        let b = interaction_integral(&map(&b1), &map(&b2), 3.0, 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a, "{a} vs {b}");
    }

    #[test]
    fn ball_quantities_are_rotation_invariant(q in prop::collection::vec(-1.0f64..1.0, 4), eps in -0.1f64..0.1) {
        prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-2);
        let r = rotation([q[0], q[1], q[2], q[3]]);
        let l: Vec<Poly> = (0..3)
            .map(|i| (0..3).fold(Poly::zero(3), |acc, j| acc.add(&Poly::coordinate(3, j).scale(r[i][j]))))
            .collect();
        let rotated = l[0].mul(&l[1]).add(&l[1].mul(&l[2])).add(&l[0].mul(&l[2])).scale(-1.0);
        let calc = BallCalculus::new(3, 4).unwrap();
        let one = Poly::constant(3, 1.0);
        let v = one.add(&symmetric_direction(3).scale(eps));
        let w = one.add(&rotated.scale(eps));
        let (a, b) = (calc.dual_residual(&v).unwrap().value, calc.dual_residual(&w).unwrap().value);
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-12), "{a} vs {b}");
        let (a, b) = (calc.h1_norm_sq(&v), calc.h1_norm_sq(&w));
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn reports_are_deterministic(seed in 0u64..1_000_000) {
        let cfg = parse_config(&format!("experiment = steklov\nsamples = 40\nmax_degree = 3\nseed = {seed}\n")).unwrap();
        let a = render_report(&run_experiment(&cfg).unwrap(), Format::Json).unwrap();
        let b = render_report(&run_experiment(&cfg).unwrap(), Format::Json).unwrap();
        prop_assert_eq!(a, b);
    }
}

const KEYS: &[&str] = &[
    "n",
    "m",
    "alpha",
    "nu",
    "deltas",
    "grid_n",
    "box_l",
    "epsilons",
    "mus",
    "perturbation",
    "direction",
    "samples",
    "max_degree",
    "fields",
    "ratio_floor",
    "bogus",
];
const EXPERIMENTS: &[&str] = &[
    "constants",
    "reduction",
    "bubbles",
    "steklov",
    "dual",
    "quotient-scan",
    "fit",
    "sharpness",
    "embedding",
];

fn value() -> impl Strategy<Value = String> {
    prop_oneof![
        (-10i64..10_000).prop_map(|v| v.to_string()),
        (-1e3f64..1e3).prop_map(|v| format!("{v}")),
        prop::collection::vec(-1.0f64..1.0, 0..5).prop_map(|v| v
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")),
        Just("nan".to_string()),
        Just("inf".to_string()),
        Just("symmetric".to_string()),
        Just(String::new()),
        "[a-z,=#. ]{0,12}",
    ]
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn config_parser_never_panics_and_validates(
        exp in 0..EXPERIMENTS.len(),
        entries in prop::collection::vec((0..KEYS.len(), value()), 0..6),
        junk in "[ -~\n]{0,40}",
    ) {
        let mut text = format!("experiment = {}\n", EXPERIMENTS[exp]);
        for (k, v) in &entries {
            text.push_str(&format!("{} = {}\n", KEYS[*k], v));
        }
        let _ = parse_config(&format!("{text}{junk}"));
        if let Ok(cfg) = parse_config(&text) {
            // Each experiment validates the keys it reads.
            let p = &cfg.params;
            let name = EXPERIMENTS[exp];
            if ["reduction", "dual", "fit", "embedding"].contains(&name) {
                prop_assert!(p.grid_n.is_power_of_two() && p.grid_n >= 8);
                prop_assert!(p.box_l > 0.0 && p.box_l.is_finite());
            }
            if name == "quotient-scan" {
                prop_assert!(p.epsilons.iter().all(|e| *e > 0.0 && *e <= 0.1));
            }
            if name == "sharpness" {
                prop_assert!(!p.deltas.is_empty() && p.deltas.iter().all(|d| *d > 0.0 && *d < 1.0));
            }
            if name != "constants" && name != "reduction" && name != "embedding" {
                prop_assert!(p.n >= 3);
            }
            prop_assert!(!entries.iter().any(|(k, _)| KEYS[*k] == "bogus"));
        }
    }

    #[test]
    fn invalid_grid_sizes_are_rejected(bad in 9usize..5000) {
        prop_assume!(!bad.is_power_of_two());
        let text = format!("experiment = dual\ngrid_n = {bad}\n");
        prop_assert!(parse_config(&text).is_err());
    }
}
