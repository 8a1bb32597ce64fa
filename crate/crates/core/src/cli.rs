//! Batch experiment driver: command line parsing, experiment dispatch and
//! deterministic report emission.

use crate::bubbles::{bubble_energy, interaction_integral, Bubble, BubbleFamily};
use crate::config::{parse_config, to_key_value, Direction, Experiment, ExperimentConfig};
use crate::constants::{
    be_bounds, escobar_constant, reduction_constant, sharp_trace_constant, EscobarParams,
    TraceParams,
};
use crate::error::{Result, TslError};
use crate::grid::{
    dalpha_inner, read_snapshot, reduction_extension, reduction_ratio, refined_embedding_report,
    richardson, trace_restrict, GridField, RefinedEmbeddingSpec,
};
use crate::lab::{
    elementary_inequality_check, normalize_direction, one_bubble_quotient_scan, symmetric_direction,
    product_direction, quantitative_stability_report, sharpness_construction, transported_field,
    FitOptions,
};
use crate::neumann::{
    dual_residual_norm, neumann_extend, FieldModel, FreeSpaceOperator, HarmonicField,
};
use crate::optim::polyfit;
use crate::report::{emit_report, ExperimentReport, GridInfo, Status};
use crate::steklov::{build_basis, spectral_gap_quotient_poly};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

/// Command line interface of the `tsl` binary.
#[derive(Debug, Parser)]
#[command(
    name = "tsl",
    version,
    about = "Sharp trace inequalities and bubble stability experiments"
)]
pub struct Cli {
    /// Experiment to run.
    #[command(subcommand)]
    pub command: Command,
}

/// Shared flags of every subcommand.
#[derive(Debug, Args, Clone, Default)]
pub struct CommonFlags {
    /// Configuration file (key = value lines or a flat JSON object).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long)]
    pub format: Option<String>,
    /// Seed of every random draw.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to TSL_THREADS).
    #[arg(long, env = "TSL_THREADS")]
    pub threads: Option<usize>,
    /// Extra key=value settings applied after the configuration file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Subcommands, one per experiment.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sharp constants and the composition identity.
    Constants(CommonFlags),
    /// Discrete reduction principle.
    Reduction(CommonFlags),
    /// Bubble energies and interaction asymptotics.
    Bubbles(CommonFlags),
    /// Steklov spectral gap.
    Steklov(CommonFlags),
    /// Neumann operator and dual residual.
    Dual(CommonFlags),
    /// One-bubble quotient scan.
    QuotientScan(CommonFlags),
    /// Multi-bubble fit and stability report.
    Fit(CommonFlags),
    /// Sharpness construction and elementary inequalities.
    Sharpness(CommonFlags),
    /// Refined embedding report.
    Embedding(CommonFlags),
}

impl Command {
    fn split(&self) -> (Experiment, &CommonFlags) {
        match self {
            Command::Constants(f) => (Experiment::Constants, f),
            Command::Reduction(f) => (Experiment::Reduction, f),
            Command::Bubbles(f) => (Experiment::Bubbles, f),
            Command::Steklov(f) => (Experiment::Steklov, f),
            Command::Dual(f) => (Experiment::Dual, f),
            Command::QuotientScan(f) => (Experiment::QuotientScan, f),
            Command::Fit(f) => (Experiment::Fit, f),
            Command::Sharpness(f) => (Experiment::Sharpness, f),
            Command::Embedding(f) => (Experiment::Embedding, f),
        }
    }
}

/// Builds the configuration from the subcommand, the optional file and the flags.
pub fn build_config(experiment: Experiment, flags: &CommonFlags) -> Result<ExperimentConfig> {
    let mut text = match &flags.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| TslError::Io(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    if text.trim_start().starts_with('{') {
        let cfg = parse_config(&text)?;
        text = to_key_value(&cfg);
    }
    let mut lines: Vec<String> = Vec::new();
    let mut file_experiment = None;
    for line in text.lines() {
        let key = line
            .split('#')
            .next()
            .unwrap_or("")
            .split('=')
            .next()
            .unwrap_or("")
            .trim();
        if key == "experiment" {
            file_experiment = line
                .split_once('=')
                .map(|(_, v)| v.split('#').next().unwrap_or("").trim().to_string());
            continue;
        }
        lines.push(line.to_string());
    }
    if let Some(e) = file_experiment {
        if e != experiment.name() {
            return Err(TslError::Config(format!(
                "configuration names experiment {e:?} but the subcommand is {}",
                experiment.name()
            )));
        }
    }
    let mut overrides: Vec<(String, String)> = Vec::new();
    for s in &flags.set {
        match s.split_once('=') {
            Some((k, v)) => overrides.push((k.trim().to_string(), v.trim().to_string())),
            None => {
                return Err(TslError::Config(format!(
                    "--set expects KEY=VALUE, got {s:?}"
                )))
            }
        }
    }
    if let Some(seed) = flags.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(f) = &flags.format {
        overrides.push(("format".into(), f.clone()));
    }
    if let Some(o) = &flags.out {
        overrides.push(("output".into(), o.display().to_string()));
    }
    let override_keys: Vec<&str> = overrides.iter().map(|(k, _)| k.as_str()).collect();
    let mut merged = format!("experiment = {}\n", experiment.name());
    for l in lines {
        let key = l
            .split('#')
            .next()
            .unwrap_or("")
            .split('=')
            .next()
            .unwrap_or("")
            .trim()
            .to_string();
        if !override_keys.contains(&key.as_str()) {
            merged += &l;
            merged.push('\n');
        }
    }
    for (k, v) in &overrides {
        merged += &format!("{k} = {v}\n");
    }
    parse_config(&merged)
}

/// Exit status of a run: 0 success, 2 inconclusive, 1 error.
pub fn exit_code(result: &Result<ExperimentReport>) -> i32 {
    match result {
        Ok(r) if r.status == Status::Ok => 0,
        Ok(_) => 2,
        Err(_) => 1,
    }
}

/// Entry point used by the binary; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (experiment, flags) = cli.command.split();
    if let Some(t) = flags.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let result = build_config(experiment, flags).and_then(|cfg| {
        let report = run_experiment(&cfg)?;
        let text = emit_report(&report, cfg.format, cfg.output.as_deref())?;
        if cfg.output.is_none() {
            print!("{text}");
        }
        Ok(report)
    });
    if let Err(e) = &result {
        eprintln!("error: {e}");
    } else if let Ok(r) = &result {
        for note in &r.notes {
            eprintln!("note: {note}");
        }
    }
    exit_code(&result)
}

/// Runs the configured experiment and returns its report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new(cfg.experiment.name(), cfg.seed);
    match cfg.experiment {
        Experiment::Constants => run_constants(cfg, &mut r)?,
        Experiment::Reduction => run_reduction(cfg, &mut r)?,
        Experiment::Bubbles => run_bubbles(cfg, &mut r)?,
        Experiment::Steklov => run_steklov(cfg, &mut r)?,
        Experiment::Dual => run_dual(cfg, &mut r)?,
        Experiment::QuotientScan => run_quotient(cfg, &mut r)?,
        Experiment::Fit => run_fit(cfg, &mut r)?,
        Experiment::Sharpness => run_sharpness(cfg, &mut r)?,
        Experiment::Embedding => run_embedding(cfg, &mut r)?,
    }
    Ok(r)
}

/// Parameter triples of the composition identity check.
pub fn composition_triples() -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for n in 2..=6usize {
        for m in 0..n.min(3) {
            for frac in [0.2, 0.5, 0.8] {
                let lo = m as f64 / 2.0;
                let hi = n as f64 / 2.0;
                out.push((n, m, lo + frac * (hi - lo)));
            }
        }
    }
    out
}

fn run_constants(cfg: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = &cfg.params;
    let tp = TraceParams::new(p.n, p.m, p.alpha)?;
    r.param("n", p.n).param("m", p.m).param("alpha", p.alpha);
    let s = sharp_trace_constant(&tp)?;
    let red = reduction_constant(&tp)?;
    let reduced = sharp_trace_constant(&tp.reduced())?;
    r.derive("sharp_trace_constant", s)
        .derive("reduction_constant", red)
        .derive("reduced_sharp_constant", reduced)
        .derive("trace_exponent_s", tp.s())
        .derive("be_bounds", be_bounds(&tp, None)?);
    if p.n >= 3 {
        r.derive("escobar_constant", escobar_constant(p.n)?);
    }
    let mut worst: f64 = 0.0;
    for (i, (n, m, a)) in composition_triples().into_iter().enumerate() {
        let t = TraceParams::new(n, m, a)?;
        let lhs = sharp_trace_constant(&t)?;
        let rhs = reduction_constant(&t)? * sharp_trace_constant(&t.reduced())?;
        let rel = (lhs - rhs).abs() / lhs;
        worst = worst.max(rel);
        r.point("composition_residual", i as f64, rel);
    }
    r.derive("composition_max_residual", worst)
        .tolerance("composition", 1e-10);
    r.check("composition", worst <= 1e-10);
    Ok(())
}

/// A random real field with Fourier modes j ∈ [−band, band]^d, j₁ … j_{d−m} not all zero on the trace axes.
pub fn random_band_limited(
    dim: usize,
    m: usize,
    n_grid: usize,
    l: f64,
    band: i64,
    rng: &mut ChaCha8Rng,
) -> Result<GridField> {
    let mut modes: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    let count = (2 * band + 1).pow(dim as u32);
    for c in 0..count as usize {
        let mut rem = c as i64;
        let mut j = Vec::with_capacity(dim);
        for _ in 0..dim {
            j.push(rem % (2 * band + 1) - band);
            rem /= 2 * band + 1;
        }
        if j[..dim - m].iter().all(|v| *v == 0) {
            continue;
        }
        let k: Vec<f64> = j
            .iter()
            .map(|v| std::f64::consts::PI * *v as f64 / l)
            .collect();
        modes.push((k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    GridField::sample(
        |x| {
            modes
                .iter()
                .map(|(k, a, b)| {
                    let ph: f64 = k.iter().zip(x).map(|(u, v)| u * v).sum();
                    a * ph.cos() + b * ph.sin()
                })
                .sum()
        },
        dim,
        n_grid,
        l,
    )
}

fn run_reduction(cfg: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = &cfg.params;
    let tp = TraceParams::for_reduction(p.n, p.m, p.alpha)?;
    r.param("n", p.n)
        .param("m", p.m)
        .param("alpha", p.alpha)
        .param("fields", p.fields);
    r.provenance.grid = Some(GridInfo {
        n: p.grid_n,
        l: p.box_l,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    for i in 0..p.fields {
        let f = random_band_limited(p.n, p.m, p.grid_n, p.box_l, 4, &mut rng)?;
        let tr = trace_restrict(&f, p.m)?;
        let g = reduction_extension(&tr, &tp, p.grid_n, p.box_l)?;
        let diff = f.combine(1.0, &g, -1.0)?;
        let ff = dalpha_inner(&f, &f, p.alpha)?;
        let gg = dalpha_inner(&g, &g, p.alpha)?;
        let dd = dalpha_inner(&diff, &diff, p.alpha)?;
        let res = (dd - (ff - gg)).abs() / ff;
        let tg = trace_restrict(&g, p.m)?;
        let terr = tg
            .values()
            .iter()
            .zip(tr.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(res);
        worst_trace = worst_trace.max(terr);
        r.point("pythagoras_residual", i as f64, res);
    }
    let profile = |x: &[f64]| x[0] * (-x.iter().map(|v| v * v).sum::<f64>()).exp();
    let dim = p.n - p.m;
    let coarse = reduction_ratio(&GridField::sample(profile, dim, p.grid_n, p.box_l)?, &tp)?;
    let fine = reduction_ratio(
        &GridField::sample(profile, dim, 2 * p.grid_n, p.box_l)?,
        &tp,
    )?;
    let rich = richardson(coarse, fine, 1.0);
    let exact = reduction_constant(&tp)?;
    let rel = (rich - exact).abs() / exact;
    r.point("reduction_ratio", p.grid_n as f64, coarse).point(
        "reduction_ratio",
        2.0 * p.grid_n as f64,
        fine,
    );
    r.derive("pythagoras_max_residual", worst)
        .derive("trace_preservation_max_error", worst_trace)
        .derive("ratio_coarse", coarse)
        .derive("ratio_fine", fine)
        .derive("richardson_estimate", rich)
        .derive("reduction_constant", exact)
        .derive("richardson_relative_error", rel)
        .tolerance("pythagoras", 1e-10)
        .tolerance("richardson", 1e-2);
    r.check("pythagoras", worst <= 1e-10)
        .check("richardson", rel <= 1e-2);
    Ok(())
}

fn run_bubbles(cfg: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = &cfg.params;
    let e = EscobarParams::new(p.n)?;
    r.param("n", p.n).param("mus", &p.mus);
    let en = bubble_energy(&Bubble::standard(p.n))?;
    let se = escobar_constant(p.n)?;
    let pred = se.powf(p.n as f64 - 1.0);
    r.derive("dirichlet_energy", en.h1_norm_sq)
        .derive("boundary_mass", en.boundary_mass)
        .derive("escobar_power", pred)
        .tolerance("energy", 1e-8);
    r.check(
        "energy",
        (en.h1_norm_sq - pred).abs() <= 1e-8 && (en.boundary_mass - pred).abs() <= 1e-8,
    );
    let b1 = Bubble::standard(p.n);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &mu in &p.mus {
        let mut z = vec![0.0; p.n - 1];
        z[0] = 1.0 / mu.sqrt();
        let b2 = Bubble::new(z, 1.0)?;
        let v = interaction_integral(&b1, &b2, e.p(), 1.0)?;
        r.point("interaction", mu, v);
        xs.push(mu.ln());
        ys.push(v.ln());
    }
    let (c, se_fit) = polyfit(&xs, &ys, 1);
    let expected = e.half();
    r.derive("interaction_slope", c[1])
        .derive("interaction_slope_stderr", se_fit[1])
        .derive("expected_slope", expected);
    r.check("interaction_slope", (c[1] - expected).abs() <= 0.05);
    Ok(())
}

fn run_steklov(cfg: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = &cfg.params;
    let e = EscobarParams::new(p.n)?;
    r.param("n", p.n)
        .param("max_degree", p.max_degree)
        .param("samples", p.samples);
    let basis = build_basis(p.n, p.max_degree)?;
    r.derive("gram_deviation", basis.gram_deviation());
    let mut worst_basis: f64 = 0.0;
    for k in 2..=p.max_degree {
        for (i, q) in basis.degrees[k].iter().enumerate() {
            let v = spectral_gap_quotient_poly(q, &basis)?;
            worst_basis = worst_basis.max((v - e.kappa(k)).abs());
            r.point(&format!("degree_{k}"), i as f64, v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut min_q = f64::INFINITY;
    for _ in 0..p.samples {
        let mut poly = crate::poly::Poly::zero(p.n);
        for k in 2..=p.max_degree {
            let scale = 10f64.powf(rng.gen_range(-3.0..1.0));
            for q in &basis.degrees[k] {
                poly = poly.add(&q.scale(scale * rng.gen_range(-1.0..1.0)));
            }
        }
        if poly.terms.is_empty() {
            continue;
        }
        min_q = min_q.min(spectral_gap_quotient_poly(&poly, &basis)?);
    }
    r.derive("basis_max_deviation", worst_basis)
        .derive("random_min_quotient", min_q)
        .derive("kappa_2", e.kappa(2))
        .tolerance("quotient", 1e-9);
    r.check("basis_quotients", worst_basis <= 1e-9)
        .check("gap", min_q >= e.kappa(2) - 1e-9);
    Ok(())
}

fn run_dual(cfg: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = &cfg.params;
    let e = EscobarParams::new(p.n)?;
    r.param("n", p.n);
    r.provenance.grid = Some(GridInfo {
        n: p.grid_n,
        l: p.box_l,
    });
    let dim = p.n - 1;
    let b = Bubble::standard(p.n);
    let g = GridField::sample(|x| b.boundary_value(x).powf(e.p()), dim, p.grid_n, p.box_l)?;
    let heights = [0.0, 0.5, 1.0];
    let ext = neumann_extend(&g, &heights, FieldModel::FreeSpace)?;
    let mut worst: f64 = 0.0;
    for (t, pg) in heights.iter().zip(&ext) {
        let exact = GridField::sample(|x| b.value(x, *t), dim, p.grid_n, p.box_l)?;
        let (rel, raw) = relative_error_mod_constant(pg, &exact);
        worst = worst.max(rel);
        r.point("extension_error", *t, rel)
            .point("extension_error_raw", *t, raw);
    }
    let shifted = Bubble::new((0..dim).map(|i| 0.5 + 0.25 * i as f64).collect(), 2.0)?;
    let g2 = GridField::sample(
        |x| shifted.boundary_value(x).powf(e.p()),
        dim,
        p.grid_n,
        p.box_l,
    )?;
    let op = FreeSpaceOperator::new(&g, p.n, 0.0)?;
    let (p1, p2) = (op.apply(&g)?, op.apply(&g2)?);
    let a = inner(&g2, &p1);
    let bb = inner(&g, &p2);
    let sa = (a - bb).abs() / a.abs().max(bb.abs());
    let rec = HarmonicField::from_density(g.clone(), p.n)?;
    let rec_res = dual_residual_norm(&rec)?;
    let fam = BubbleFamily::new(p.n, vec![b.clone()], vec![1.0])?;
    let exact_res = dual_residual_norm(&HarmonicField::from_bubbles(&fam, p.grid_n, p.box_l)?)?;
    r.derive("extension_max_error", worst)
        .derive("self_adjointness_residual", sa)
        .derive("dual_residual_reconstructed", rec_res.value)
        .derive("dual_residual_exact_density", exact_res.value)
        .derive("mean_correction", rec_res.mean_correction)
        .tolerance("extension", 1e-3)
        .tolerance("self_adjointness", 1e-10)
        .tolerance("dual_residual", 1e-3);
    r.check("extension", worst <= 1e-3)
        .check("self_adjointness", sa <= 1e-10)
        .check("dual_residual", rec_res.value <= 1e-3);
    Ok(())
}

/// Relative L² error of `approx` against `exact` after removing the mean
/// offset, and the raw relative error.
pub fn relative_error_mod_constant(approx: &GridField, exact: &GridField) -> (f64, f64) {
    let len = approx.len() as f64;
    let d: Vec<f64> = approx
        .values()
        .iter()
        .zip(exact.values())
        .map(|(a, b)| a - b)
        .collect();
    let dm = d.iter().sum::<f64>() / len;
    let em = exact.values().iter().sum::<f64>() / len;
    let num = d.iter().map(|v| (v - dm).powi(2)).sum::<f64>().sqrt();
    let den = exact
        .values()
        .iter()
        .map(|v| (v - em).powi(2))
        .sum::<f64>()
        .sqrt();
    let raw = d.iter().map(|v| v * v).sum::<f64>().sqrt()
        / exact.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    (num / den, raw)
}

fn inner(a: &GridField, b: &GridField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x * y)
        .sum::<f64>()
        * a.cell_volume()
}

fn run_quotient(cfg: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = &cfg.params;
    let (q, label) = match p.direction {
        Direction::Symmetric => (symmetric_direction(p.n), "symmetric"),
        Direction::Y1y2 => (product_direction(p.n), "y1y2"),
    };
    r.param("n", p.n)
        .param("direction", label)
        .param("epsilons", &p.epsilons);
    let rep = one_bubble_quotient_scan(p.n, &q, label, &p.epsilons)?;
    for ((e, qv), (res, d)) in rep
        .epsilons
        .iter()
        .zip(&rep.quotients)
        .zip(rep.residuals.iter().zip(&rep.distances))
    {
        r.point("quotient", *e, *qv)
            .point("residual", *e, *res)
            .point("distance", *e, *d);
    }
    let tol = if p.n == 3 { 1e-3 } else { 2e-3 };
    let slope_rel = (rep.fitted_slope - rep.analytic_slope_prediction).abs()
        / rep.analytic_slope_prediction.abs();
    r.derive("limit", rep.extrapolated_limit)
        .derive("limit_negative_side", rep.limit_per_sign[0])
        .derive("limit_positive_side", rep.limit_per_sign[1])
        .derive("target_limit", rep.target_limit)
        .derive("slope", rep.fitted_slope)
        .derive("slope_stderr", rep.slope_stderr)
        .derive("analytic_slope", rep.analytic_slope_prediction)
        .derive("alternate_slope", rep.alternate_slope_prediction)
        .derive("slope_relative_error", slope_rel)
        .derive("cubic_integral", rep.cubic_integral)
        .derive("certificate", rep.certificate)
        .derive("exact", rep.exact)
        .tolerance("limit", tol)
        .tolerance("slope", 0.05);
    if rep.inconclusive {
        r.flag("fitted slope is not statistically distinguishable from zero");
    }
    r.check(
        "limit",
        (rep.extrapolated_limit - rep.target_limit).abs() <= tol,
    )
    .check("slope", slope_rel <= 0.05)
    .check("certified_below_limit", rep.certified_below_limit);
    Ok(())
}

fn run_fit(cfg: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = &cfg.params;
    r.param("n", p.n).param("nu", p.nu);
    let (u, truth) = match &p.input {
        Some(path) => {
            let open = |q: &PathBuf| -> Result<GridField> {
                let f = std::fs::File::open(q)
                    .map_err(|e| TslError::Io(format!("cannot open {}: {e}", q.display())))?;
                read_snapshot(std::io::BufReader::new(f))
            };
            let trace = open(path)?;
            if trace.dim() != p.n - 1 {
                return Err(TslError::Input(format!(
                    "snapshot has dimension {} but n - 1 = {}",
                    trace.dim(),
                    p.n - 1
                )));
            }
            let density = match &p.density_input {
                Some(d) => Some(open(d)?),
                None => None,
            };
            r.param("input", path.display().to_string());
            r.provenance.grid = Some(GridInfo {
                n: trace.n(),
                l: trace.l(),
            });
            (HarmonicField::free_space(trace, density)?, None)
        }
        None => {
            let mu = p.mus[0];
            r.param("mu", mu).param("perturbation", p.perturbation);
            r.provenance.grid = Some(GridInfo {
                n: p.grid_n,
                l: p.box_l,
            });
            let bubbles: Vec<Bubble> = (0..p.nu)
                .map(|i| {
                    let mut z = vec![0.0; p.n - 1];
                    z[0] = i as f64 / mu.sqrt();
                    Bubble { z, lambda: 1.0 }
                })
                .collect();
            let fam = BubbleFamily::new(p.n, bubbles.clone(), vec![1.0; p.nu])?;
            let mut u = HarmonicField::from_bubbles(&fam, p.grid_n, p.box_l)?;
            if p.perturbation > 0.0 {
                let q = normalize_direction(&symmetric_direction(p.n), 2);
                for b in &bubbles {
                    u = u.combine(
                        1.0,
                        &transported_field(&q, b, p.grid_n, p.box_l)?,
                        p.perturbation,
                    )?;
                }
            }
            (u, Some(bubbles))
        }
    };
    let rep = quantitative_stability_report(&u, p.nu, &FitOptions::default(), p.ratio_floor)?;
    for (i, b) in rep.fit.bubbles.iter().enumerate() {
        r.point("coefficient", i as f64, rep.fit.coefficients[i])
            .point("lambda", i as f64, b.lambda);
    }
    r.derive("bubbles", &rep.fit.bubbles)
        .derive("coefficients", &rep.fit.coefficients)
        .derive("distance", rep.distance)
        .derive("residual", rep.residual)
        .derive("max_interaction", rep.max_interaction)
        .derive("interactions", &rep.fit.interactions)
        .derive("orthogonality_residuals", &rep.fit.orthogonality_residuals)
        .derive("residual_over_distance", rep.residual_over_distance)
        .derive("interaction_constant", rep.interaction_constant)
        .derive("degenerate", rep.degenerate)
        .derive("iterations", rep.fit.iterations)
        .tolerance("orthogonality", 1e-6);
    r.check("converged", rep.fit.converged)
        .check(
            "orthogonality",
            rep.fit.max_orthogonality_residual() <= 1e-6,
        )
        .check("ratio_floor", rep.ratio_ok);
    if let Some(c) = rep.interaction_constant {
        r.check("interaction_constant_finite", c.is_finite());
    }
    if let Some(truth) = truth {
        let mut worst: f64 = 0.0;
        for (t, (b, a)) in truth
            .iter()
            .zip(rep.fit.bubbles.iter().zip(&rep.fit.coefficients))
        {
            let dz =
                t.z.iter()
                    .zip(&b.z)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    * t.lambda;
            worst = worst
                .max((a - 1.0).abs())
                .max((b.lambda - t.lambda).abs() / t.lambda)
                .max(dz);
        }
        r.derive("parameter_relative_error", worst)
            .tolerance("parameters", 1e-3);
        r.check("parameters", worst <= 1e-3);
    }
    Ok(())
}

fn run_sharpness(cfg: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = &cfg.params;
    r.param("n", p.n)
        .param("nu", p.nu)
        .param("deltas", &p.deltas);
    let mut worst_c: f64 = 0.0;
    let mut all_first = true;
    let mut all_second = true;
    let mut worst_grad: f64 = 0.0;
    let mut reports = Vec::new();
    for &d in &p.deltas {
        let s = sharpness_construction(p.n, p.nu, d)?;
        worst_c = worst_c.max(s.constant);
        all_first &= s.first_inequality;
        all_second &= s.second_inequality;
        worst_grad = worst_grad.max((s.spike_gradient_quadrature - s.spike_gradient_norm).abs());
        r.point("residual_over_distance", d, s.constant).point(
            "spike_gradient",
            d,
            s.spike_gradient_norm,
        );
        reports.push(s);
    }
    let el = elementary_inequality_check(p.n, &[], cfg.seed)?;
    r.derive("constructions", &reports)
        .derive("max_constant", worst_c)
        .derive("gradient_quadrature_max_error", worst_grad)
        .derive("elementary", &el)
        .tolerance("gradient", 1e-6);
    r.check("first_inequality", all_first)
        .check("second_inequality", all_second)
        .check("gradient_quadrature", worst_grad <= 1e-6);
    Ok(())
}

fn run_embedding(cfg: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = &cfg.params;
    let tp = TraceParams::new(p.n, p.m, p.alpha)?;
    r.param("n", p.n).param("m", p.m).param("alpha", p.alpha);
    r.provenance.grid = Some(GridInfo {
        n: p.grid_n,
        l: p.box_l,
    });
    let probe = GridField::zeros(p.n, p.grid_n, p.box_l)?;
    let trace_probe = trace_restrict(&probe, p.m)?;
    let mask: Vec<bool> = (0..trace_probe.len())
        .map(|i| trace_probe.point(i).iter().all(|v| v.abs() <= 1.0))
        .collect();
    let spec = RefinedEmbeddingSpec::new(&tp, mask)?;
    let bump = |s: f64| {
        if s.abs() < 1.0 {
            (1.0 - s * s).powi(3)
        } else {
            0.0
        }
    };
    let mut min_c = f64::INFINITY;
    for lam in [1.0, 2.0, 4.0, 8.0] {
        let f = GridField::sample(
            |x| {
                let tan: f64 = x[..p.n - p.m].iter().map(|v| bump(lam * v / 0.9)).product();
                let nor: f64 = x[p.n - p.m..].iter().map(|v| bump(lam * v)).product();
                tan * nor
            },
            p.n,
            p.grid_n,
            p.box_l,
        )?;
        let e = refined_embedding_report(&f, &spec, &tp)?;
        min_c = min_c.min(e.implied_c_q1);
        r.point("implied_constant", lam, e.implied_c_q1)
            .point("deficit", lam, e.deficit);
    }
    r.derive("min_implied_constant", min_c);
    r.check("positive_constant", min_c > 0.0 && min_c.is_finite());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Format;

    #[test]
    fn composition_grid_has_enough_triples() {
        assert!(composition_triples().len() >= 20);
        for (n, m, a) in composition_triples() {
            assert!(TraceParams::new(n, m, a).is_ok());
        }
    }

    #[test]
    fn exit_codes() {
        let mut r = ExperimentReport::new("x", 0);
        assert_eq!(exit_code(&Ok(r.clone())), 0);
        r.flag("flagged");
        assert_eq!(exit_code(&Ok(r)), 2);
        assert_eq!(exit_code(&Err(TslError::Config("bad".into()))), 1);
    }

    #[test]
    fn format_flag_overrides_file() {
        let flags = CommonFlags {
            format: Some("csv".into()),
            ..Default::default()
        };
        let c = build_config(Experiment::Constants, &flags).unwrap();
        assert_eq!(c.format, Format::Csv);
    }
}
