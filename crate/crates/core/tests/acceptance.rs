//! Acceptance suite: one pass/fail line per criterion, tolerances as pinned.
//!
//! Lines are written straight to the process stdout so that they appear in
//! the test log without `--nocapture`.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};
use tsl::bubbles::{bubble_energy, interaction_integral, Bubble};
use tsl::cli::{composition_triples, run_experiment};
use tsl::config::parse_config;
use tsl::constants::{reduction_constant, sharp_trace_constant, TraceParams};
use tsl::lab::{one_bubble_quotient_scan, symmetric_direction, sharpness_construction};
use tsl::poly::Poly;
use tsl::report::{render_report, ExperimentReport, Format};
use tsl::steklov::{build_basis, spectral_gap_quotient_poly};

struct Outcome {
    checks: Vec<(String, bool)>,
    elapsed: Duration,
}

impl Outcome {
    fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn timed<F: FnOnce(&mut Vec<(String, bool)>)>(budget: Duration, f: F) -> Outcome {
    let start = Instant::now();
    let mut checks = Vec::new();
    f(&mut checks);
    let elapsed = start.elapsed();
    checks.push((
        format!(
            "runtime {:.2}s < {:.0}s",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ),
        elapsed < budget,
    ));
    Outcome { checks, elapsed }
}

fn check(out: &mut Vec<(String, bool)>, label: String, ok: bool) {
    out.push((label, ok));
}

fn run(text: &str) -> ExperimentReport {
    run_experiment(&parse_config(text).expect("valid configuration")).expect("experiment runs")
}

fn criterion_1(c: &mut Vec<(String, bool)>) {
    let s = |n, m, a| sharp_trace_constant(&TraceParams::new(n, m, a).unwrap()).unwrap();
    let v = s(3, 0, 1.0);
    check(
        c,
        format!("S(3,0,1) = {v:.15} vs 3(π/2)^(4/3)"),
        (v - 3.0 * (PI / 2.0).powf(4.0 / 3.0)).abs() <= 1e-10,
    );
    let v = s(3, 1, 1.0);
    check(
        c,
        format!("S(3,1,1) = {v:.15} vs 2√π"),
        (v - 2.0 * PI.sqrt()).abs() <= 1e-10,
    );
    let r = reduction_constant(&TraceParams::new(3, 1, 1.0).unwrap()).unwrap();
    check(c, format!("R(3,1,1) = {r:.15}"), (r - 2.0).abs() <= 1e-12);
    let triples = composition_triples();
    let mut worst: f64 = 0.0;
    for &(n, m, a) in &triples {
        let t = TraceParams::new(n, m, a).unwrap();
        let lhs = sharp_trace_constant(&t).unwrap();
        let rhs = reduction_constant(&t).unwrap() * sharp_trace_constant(&t.reduced()).unwrap();
        worst = worst.max((lhs - rhs).abs() / lhs);
    }
    check(
        c,
        format!(
            "composition over {} triples, worst {worst:.2e}",
            triples.len()
        ),
        triples.len() >= 20 && worst <= 1e-10,
    );
}

fn criterion_2(c: &mut Vec<(String, bool)>) {
    let e = bubble_energy(&Bubble::standard(3)).unwrap();
    let se: f64 = 1.772_453_850_905_516;
    check(
        c,
        format!("∫|∇U|² = {:.15}", e.h1_norm_sq),
        (e.h1_norm_sq - PI).abs() <= 1e-8,
    );
    check(
        c,
        format!("∫U⁴ = {:.15} vs S_E(3)²", e.boundary_mass),
        (e.boundary_mass - se * se).abs() <= 1e-8,
    );
}

fn criterion_3(c: &mut Vec<(String, bool)>) {
    let r = run("experiment = reduction\nn = 2\nm = 1\nalpha = 1\ngrid_n = 128\nfields = 10\n");
    let py = r.derived_f64("pythagoras_max_residual").unwrap();
    check(
        c,
        format!("Pythagoras over 10 fields, worst {py:.2e}"),
        py <= 1e-10,
    );
    // R(2,1,1) = 2π^{1/2}Γ(1)/Γ(1/2) = 2.
    let rich = r.derived_f64("richardson_estimate").unwrap();
    let rel = (rich - 2.0).abs() / 2.0;
    check(
        c,
        format!("Richardson estimate {rich:.6} (relative error {rel:.2e})"),
        rel <= 1e-2,
    );
}

fn criterion_4(c: &mut Vec<(String, bool)>) {
    let basis = build_basis(3, 4).unwrap();
    for (k, target) in [(2, 5.0), (3, 7.0)] {
        let worst = basis.degrees[k]
            .iter()
            .map(|q| (spectral_gap_quotient_poly(q, &basis).unwrap() - target).abs())
            .fold(0.0f64, f64::max);
        check(
            c,
            format!("degree {k} quotients vs {target}, worst {worst:.2e}"),
            worst <= 1e-9,
        );
    }
    let r = run("experiment = steklov\nn = 3\nsamples = 10000\nmax_degree = 4\nseed = 0\n");
    let m = r.derived_f64("random_min_quotient").unwrap();
    check(
        c,
        format!("min over 10⁴ random orthogonal polynomials {m:.12}"),
        m >= 5.0 - 1e-9,
    );
    let y = |i| Poly::coordinate(3, i);
    let q = y(0).mul(&y(1));
    check(
        c,
        "y₁y₂ quotient".into(),
        (spectral_gap_quotient_poly(&q, &basis).unwrap() - 5.0).abs() <= 1e-9,
    );
}

fn criterion_5(c: &mut Vec<(String, bool)>) {
    let r = run("experiment = dual\nn = 3\ngrid_n = 1024\nbox_l = 80\n");
    let ext = r.derived_f64("extension_max_error").unwrap();
    check(
        c,
        format!("𝒫[U^p] vs U, relative error {ext:.2e}"),
        ext <= 1e-3,
    );
    let sa = r.derived_f64("self_adjointness_residual").unwrap();
    check(c, format!("self-adjointness {sa:.2e}"), sa <= 1e-10);
    let d = r.derived_f64("dual_residual_reconstructed").unwrap();
    check(c, format!("dual residual of U {d:.2e}"), d <= 1e-3);
}

fn criterion_6(c: &mut Vec<(String, bool)>) {
    let eps = [0.01, 0.02, 0.04, 0.08];
    let rep = one_bubble_quotient_scan(3, &symmetric_direction(3), "symmetric", &eps).unwrap();
    check(
        c,
        format!("n = 3 limit {:.9}", rep.extrapolated_limit),
        (rep.extrapolated_limit - 0.4).abs() <= 1e-3,
    );
    // p(p − 1)(p/κ₂ − 1)·c^{n−1}∫_S q³ with p = 3, κ₂ = 5 and c^{n−1}∫q³ = −2/(35√π).
    let analytic = 6.0 * (3.0 / 5.0 - 1.0) * (-2.0 / (35.0 * PI.sqrt()));
    let rel = (rep.fitted_slope - analytic).abs() / analytic.abs();
    check(
        c,
        format!(
            "slope {:.6} vs {analytic:.6} (relative {rel:.2e})",
            rep.fitted_slope
        ),
        rel <= 0.05,
    );
    let t = rep.fitted_slope.abs() / rep.slope_stderr;
    check(c, format!("slope t-statistic {t:.1}"), t >= 3.0);
    check(
        c,
        format!("certificate {:?}", rep.certificate),
        rep.certified_below_limit && rep.certificate.is_some_and(|(_, q)| q < 0.4),
    );
    let rep4 = one_bubble_quotient_scan(4, &symmetric_direction(4), "symmetric", &eps).unwrap();
    check(
        c,
        format!("n = 4 limit {:.9}", rep4.extrapolated_limit),
        (rep4.extrapolated_limit - 1.0 / 3.0).abs() <= 2e-3,
    );
}

fn criterion_7(c: &mut Vec<(String, bool)>) {
    let u = Bubble::standard(3);
    let mus: Vec<f64> = (0..5).map(|i| 10f64.powf(-4.0 + 0.5 * i as f64)).collect();
    let pts: Vec<(f64, f64)> = mus
        .iter()
        .map(|&mu| {
            let w = Bubble::new(vec![1.0 / mu.sqrt(), 0.0], 1.0).unwrap();
            (
                mu.ln(),
                interaction_integral(&u, &w, 3.0, 1.0).unwrap().ln(),
            )
        })
        .collect();
    let k = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / k,
        pts.iter().map(|p| p.1).sum::<f64>() / k,
    );
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    check(
        c,
        format!("log-log slope {slope:.5}"),
        (slope - 0.5).abs() <= 0.05,
    );
}

fn criterion_8(c: &mut Vec<(String, bool)>) {
    let r = run("experiment = fit\nn = 3\nnu = 2\nmu = 1e-3\nperturbation = 1e-3\n");
    let e = r.derived_f64("parameter_relative_error").unwrap();
    check(c, format!("parameter recovery {e:.2e}"), e <= 1e-3);
    let ortho = r.derived["orthogonality_residuals"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|per_bubble| {
            per_bubble
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap().abs())
        })
        .fold(0.0f64, f64::max);
    check(c, format!("orthogonality {ortho:.2e}"), ortho <= 1e-6);
    let cst = r.derived_f64("interaction_constant");
    check(
        c,
        format!("interaction constant {cst:?}"),
        cst.is_some_and(f64::is_finite),
    );
}

fn criterion_9(c: &mut Vec<(String, bool)>) {
    let c3 = (4.0 * PI / 3.0).sqrt();
    for delta in [0.1, 0.05, 0.025] {
        let s = sharpness_construction(3, 2, delta).unwrap();
        check(
            c,
            format!("δ = {delta}: both inequalities (C = {:.4})", s.constant),
            s.first_inequality && s.second_inequality,
        );
        let eps = (delta / (4.0 * c3)).powi(2);
        let want = (4.0 * PI * eps / 3.0).sqrt();
        let err = (s.spike_gradient_quadrature - want).abs();
        check(
            c,
            format!("δ = {delta}: ‖∇ρ_ε‖ error {err:.2e}"),
            err <= 1e-6 && (s.epsilon - eps).abs() <= 1e-15,
        );
    }
}

fn determinism(c: &mut Vec<(String, bool)>) {
    for text in [
        "experiment = reduction\nseed = 42\n",
        "experiment = steklov\nsamples = 2000\nseed = 42\n",
        "experiment = fit\nseed = 42\n",
        "experiment = sharpness\nseed = 42\n",
    ] {
        let a = render_report(&run(text), Format::Json).unwrap();
        let b = render_report(&run(text), Format::Json).unwrap();
        check(
            c,
            format!("{} report reproducible", text.lines().next().unwrap()),
            a == b,
        );
    }
}

#[test]
fn acceptance_criteria() {
    let start = Instant::now();
    let secs = Duration::from_secs;
    let mut results: Vec<(usize, Outcome)> = vec![
        (1, timed(secs(1), criterion_1)),
        (2, timed(secs(5), criterion_2)),
        (3, timed(secs(30), criterion_3)),
        (4, timed(secs(60), criterion_4)),
        (5, timed(secs(60), criterion_5)),
        (6, timed(secs(300), criterion_6)),
        (7, timed(secs(60), criterion_7)),
        (8, timed(secs(120), criterion_8)),
        (9, timed(secs(120), criterion_9)),
    ];
    let mut ten = timed(secs(600), determinism);
    let total = start.elapsed();
    ten.checks.push((
        format!("full suite {:.1}s <= 600s", total.as_secs_f64()),
        total <= secs(600),
    ));
    results.push((10, ten));

    let mut out = std::io::stdout().lock();
    for (k, o) in &results {
        let verdict = if o.passed() { "PASS" } else { "FAIL" };
        let detail: Vec<String> = o
            .checks
            .iter()
            .map(|(l, ok)| {
                if *ok {
                    l.clone()
                } else {
                    format!("FAILED: {l}")
                }
            })
            .collect();
        writeln!(
            out,
            "criterion {k}: {verdict} ({:.2}s) {}",
            o.elapsed.as_secs_f64(),
            detail.join("; ")
        )
        .unwrap();
    }
    out.flush().unwrap();
    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, o)| !o.passed())
        .map(|(k, _)| *k)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
