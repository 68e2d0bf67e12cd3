//! Registered claims, the runner and the JSON-lines report.
//!
//! Every claim instance reports a residual and a tolerance, and passes iff
//! `max_residual <= tolerance`. Claims that must *fail* a threshold (a metric
//! that is not conformally flat, say) or that combine several conditions report
//! a normalized residual with tolerance `1.0`.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::curvature::{cotton, CurvatureBundle, CurvatureJets};
use crate::error::{Error, Result};
use crate::families::{
    build, line, lorentzian_space_form, product_metric, riemannian_space_form, FamilyId,
    FamilyParams, FamilySpec, Sign,
};
use crate::fields::{MetricField, MultiPoly, UPoly};
use crate::holonomy::{
    classify, curvature_span, default_base, sample_points, HolonomyLabel, SAMPLE_RADIUS,
};
use crate::killing;
use crate::walker::{
    coordinate_transform, gt_decomposition_map, max_metric_difference, perturb_h,
    walker_closed_forms, walker_extract, CLOSED_FORM_ORIENTATION,
};

/// Number of holonomy sample points per span.
pub const HOLONOMY_SAMPLES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimResult {
    pub claim_id: String,
    pub family: String,
    pub n: usize,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub elapsed_ms: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skipped {
    pub claim_id: String,
    pub family: String,
    pub n: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClaimReport {
    pub results: Vec<ClaimResult>,
    pub skipped: Vec<Skipped>,
    pub seed: u64,
}

#[derive(Serialize)]
struct Summary {
    total: usize,
    passed: usize,
    failed: usize,
    skipped: usize,
    seed: u64,
}

impl ClaimReport {
    pub fn passed(&self) -> usize {
        self.results.iter().filter(|r| r.pass).count()
    }

    pub fn failed(&self) -> usize {
        self.results.len() - self.passed()
    }

    /// 0 when everything ran and passed, 2 when something was skipped, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if !self.skipped.is_empty() {
            2
        } else if self.failed() > 0 {
            1
        } else {
            0
        }
    }

    pub fn find(&self, claim_id: &str) -> Vec<&ClaimResult> {
        self.results
            .iter()
            .filter(|r| r.claim_id == claim_id)
            .collect()
    }

    /// One JSON object per result, then `{"summary": {...}}`.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            out.push_str(&serde_json::to_string(r).expect("plain struct serializes"));
            out.push('\n');
        }
        let summary = serde_json::json!({
            "summary": Summary {
                total: self.results.len(),
                passed: self.passed(),
                failed: self.failed(),
                skipped: self.skipped.len(),
                seed: self.seed,
            }
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<26} {:<20} {:>2} {:>7} {:>12} {:>9}  result",
            "claim", "family", "n", "samples", "residual", "tol"
        );
        for r in &self.results {
            let _ = writeln!(
                out,
                "{:<26} {:<20} {:>2} {:>7} {:>12.3e} {:>9.1e}  {}",
                r.claim_id,
                r.family,
                r.n,
                r.samples,
                r.max_residual,
                r.tolerance,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        for s in &self.skipped {
            let _ = writeln!(
                out,
                "{:<26} {:<20} {:>2}  SKIPPED: {}",
                s.claim_id, s.family, s.n, s.reason
            );
        }
        let _ = writeln!(
            out,
            "{} passed, {} failed, {} skipped (seed {})",
            self.passed(),
            self.failed(),
            self.skipped.len(),
            self.seed
        );
        out
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub timings: bool,
}

/// Residual, tolerance and sample count of one claim instance.
#[derive(Clone, Copy, Debug)]
struct Outcome {
    residual: f64,
    tolerance: f64,
    samples: usize,
    /// Plain residuals may have their tolerance overridden by the config.
    plain: bool,
}

impl Outcome {
    fn plain(residual: f64, tolerance: f64, samples: usize) -> Outcome {
        Outcome {
            residual,
            tolerance,
            samples,
            plain: true,
        }
    }

    fn normalized(residual: f64, samples: usize) -> Outcome {
        Outcome {
            residual,
            tolerance: 1.0,
            samples,
            plain: false,
        }
    }
}

/// Normalized residual of a condition that must hold.
fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        2.0
    }
}

/// Normalized residual of `observed > threshold`.
fn must_exceed(observed: f64, threshold: f64) -> f64 {
    if observed > 0.0 {
        threshold / observed
    } else {
        f64::MAX
    }
}

#[derive(Clone, Debug)]
struct Instance {
    family: String,
    id: Option<FamilyId>,
    n: usize,
}

impl Instance {
    fn family(id: FamilyId, n: usize) -> Instance {
        Instance {
            family: id.to_string(),
            id: Some(id),
            n,
        }
    }

    fn named(name: &str, n: usize) -> Instance {
        Instance {
            family: name.to_string(),
            id: None,
            n,
        }
    }
}

struct Ctx<'a> {
    cfg: &'a Config,
    rng: ChaCha8Rng,
}

type Runner = fn(&mut Ctx, &Instance) -> Result<Outcome>;

struct Claim {
    id: &'static str,
    instances: fn(&Config) -> Vec<Instance>,
    run: Runner,
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic generator for one claim instance.
pub fn instance_rng(seed: u64, claim_id: &str, family: &str, n: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&format!("{claim_id}/{family}/{n}")))
}

const THEOREM: [FamilyId; 4] = FamilyId::THEOREM_FAMILIES;

/// Instances over `ids` and the configured `n` values, narrowed to the configured family.
fn over(cfg: &Config, ids: &[FamilyId]) -> Vec<Instance> {
    let ids: Vec<FamilyId> = match cfg.family {
        Some(f) if ids.contains(&f) => vec![f],
        Some(_) => vec![],
        None => ids.to_vec(),
    };
    let mut out = Vec::new();
    for id in ids {
        for &n in &cfg.ns {
            out.push(Instance::family(id, n));
        }
    }
    out
}

/// Instances that exist only when no family is selected.
fn unfiltered(cfg: &Config, make: impl FnOnce() -> Vec<Instance>) -> Vec<Instance> {
    if cfg.family.is_some() {
        Vec::new()
    } else {
        make()
    }
}

fn random_params(
    rng: &mut ChaCha8Rng,
    cfg: &Config,
    id: FamilyId,
    n: usize,
) -> Result<FamilyParams> {
    let mut p = FamilyParams::random(rng, n);
    let lam = UPoly::new(vec![
        rng.gen_range(0.5..1.5),
        rng.gen_range(-0.2..0.2),
        rng.gen_range(0.0..0.5),
    ]);
    match id {
        FamilyId::SphereF3 => p.lambda = Some(lam.scale(-1.0)),
        FamilyId::HypF4 => p.lambda = Some(lam),
        _ => {}
    }
    p.c_const = rng.gen_range(0.5..2.0);
    for (key, poly) in &cfg.params {
        match key.as_str() {
            "a" => p.a = poly.clone(),
            "D" => p.d = poly.clone(),
            "lambda" => p.lambda = Some(poly.clone()),
            k => {
                let idx: usize = k[1..].parse().expect("validated key");
                let list = if k.starts_with('B') {
                    &mut p.b
                } else {
                    &mut p.c
                };
                if idx > n {
                    return Err(Error::FamilyConstraint(format!("`{k}` given but n = {n}")));
                }
                list[idx - 1] = poly.clone();
            }
        }
    }
    if let Some(c) = cfg.c_const {
        p.c_const = c;
    }
    Ok(p)
}

fn sample_metric(ctx: &mut Ctx, inst: &Instance) -> Result<(MetricField, Vec<f64>)> {
    let id = inst.id.expect("family instance");
    let params = random_params(&mut ctx.rng, ctx.cfg, id, inst.n)?;
    let g = build(&FamilySpec::new(id, inst.n, params))?;
    let p = g.sample_point(&mut ctx.rng)?;
    Ok((g, p))
}

/// Instance-level metric for claims that evaluate one metric at many points.
fn instance_metric(ctx: &mut Ctx, inst: &Instance) -> Result<MetricField> {
    let id = inst.id.expect("family instance");
    let params = random_params(&mut ctx.rng, ctx.cfg, id, inst.n)?;
    build(&FamilySpec::new(id, inst.n, params))
}

fn weyl_instances(cfg: &Config) -> Vec<Instance> {
    let mut out = over(cfg, &THEOREM);
    let walker_like = [
        FamilyId::Thc3Dec(Sign::Positive),
        FamilyId::Thc3Dec(Sign::Negative),
        FamilyId::Thc3Flat,
        FamilyId::CahenWallach,
    ];
    out.extend(
        over(cfg, &walker_like)
            .into_iter()
            .filter(|i| cfg.family.is_some() || i.n == 2),
    );
    let fixed = [
        FamilyId::GtOriginal,
        FamilyId::GtCorrected,
        FamilyId::GtSimplified,
    ];
    for id in fixed {
        if cfg.family.is_none() || cfg.family == Some(id) {
            out.push(Instance::family(id, 2));
        }
    }
    match cfg.family {
        None => out.extend([4, 5, 6].map(|d| Instance::family(FamilyId::Product, d))),
        Some(FamilyId::Product) => out.extend(
            cfg.ns
                .iter()
                .map(|&d| Instance::family(FamilyId::Product, d)),
        ),
        Some(f @ (FamilyId::Flat | FamilyId::ConstCurvRiem(_) | FamilyId::ConstCurvLorentz(_))) => {
            out.extend(cfg.ns.iter().map(|&n| Instance::family(f, n)))
        }
        _ => {}
    }
    out
}

fn weyl_zero(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let samples = ctx.cfg.samples;
    let order = ctx.cfg.order;
    let mut worst: f64 = 0.0;
    let mut smallest = f64::INFINITY;
    for _ in 0..samples {
        let (g, p) = sample_metric(ctx, inst)?;
        let b = CurvatureBundle::from_jets(&p, &CurvatureJets::compute(&g, &p, order)?)?;
        let w = b
            .weyl_norm()
            .ok_or_else(|| Error::FamilyConstraint("Weyl tensor needs dimension >= 4".into()))?;
        // families 1-4 are measured relative to the curvature scale
        let scale = match inst.id {
            Some(id) if THEOREM.contains(&id) => 1.0 + b.riemann_lo.max_abs(),
            _ => 1.0,
        };
        worst = worst.max(w / scale);
        smallest = smallest.min(w);
    }
    if inst.id == Some(FamilyId::GtOriginal) {
        // not conformally flat: every sample must exceed the threshold
        return Ok(Outcome::normalized(must_exceed(smallest, 1e-3), samples));
    }
    Ok(Outcome::plain(worst, 1e-9, samples))
}

fn lemma1(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let (g, p) = sample_metric(ctx, inst)?;
        let w = walker_extract(&g, &p)?;
        worst = w.lemma1_residuals().iter().fold(worst, |m, r| m.max(*r));
    }
    Ok(Outcome::plain(worst, 1e-8, ctx.cfg.samples))
}

fn lemma1_perturbed(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let d = inst.n + 2;
    let mut cube = vec![0u32; d];
    cube[1] = 3;
    for _ in 0..ctx.cfg.samples {
        let (g, _) = sample_metric(ctx, inst)?;
        let bumped = perturb_h(&g, MultiPoly::zero(d).with_term(&cube, 0.1))?;
        let mut p = bumped.sample_point(&mut ctx.rng)?;
        // keep x^1 away from 0, where the x^1 H-Hessian vanishes
        p[1] = p[1].signum() * p[1].abs().max(0.3);
        let w = walker_extract(&bumped, &p)?;
        let lemma = w.lemma1_residuals().iter().cloned().fold(0.0, f64::max);
        let weyl = w.bundle.weyl_norm().unwrap_or(0.0);
        worst = worst
            .max(must_exceed(weyl, 1e-3))
            .max(must_exceed(lemma, 1e-3));
    }
    Ok(Outcome::normalized(worst, ctx.cfg.samples))
}

fn ricci_f1(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let n = inst.n;
    let d = n + 2;
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let id = inst.id.expect("family instance");
        let params = random_params(&mut ctx.rng, ctx.cfg, id, n)?;
        let g = build(&FamilySpec::new(id, n, params.clone()))?;
        let p = g.sample_point(&mut ctx.rng)?;
        let b = CurvatureBundle::at(&g, &p)?;
        let mut expect = DMatrix::zeros(d, d);
        expect[(0, d - 1)] = CLOSED_FORM_ORIENTATION * n as f64 * params.a.eval(p[d - 1]);
        let slot = (&b.ricci_op - expect).amax();
        let sq = (&b.ricci_op * &b.ricci_op).amax();
        worst = worst.max(slot / 1e-9).max(sq / 1e-10);
    }
    Ok(Outcome::normalized(worst, ctx.cfg.samples))
}

fn ricci_f2(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let (g, p) = sample_metric(ctx, inst)?;
        let b = CurvatureBundle::at(&g, &p)?;
        let ric = &b.ricci_op;
        let r2 = ric * ric;
        let r3 = &r2 * ric;
        let norm = ric.amax();
        worst = worst
            .max(must_exceed(r2.amax(), 1e-6 * norm * norm))
            .max(r3.amax() / 1e-9);
    }
    Ok(Outcome::normalized(worst, ctx.cfg.samples))
}

fn scalar_f2(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let (g, p) = sample_metric(ctx, inst)?;
        worst = worst.max(CurvatureBundle::at(&g, &p)?.scalar.abs());
    }
    Ok(Outcome::plain(worst, 1e-9, ctx.cfg.samples))
}

fn scalar_f34(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let nf = inst.n as f64;
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let (g, p) = sample_metric(ctx, inst)?;
        let w = walker_extract(&g, &p)?;
        worst = worst.max((w.bundle.scalar + (nf - 2.0) * (nf + 1.0) * w.lambda).abs());
    }
    Ok(Outcome::plain(worst, 1e-8, ctx.cfg.samples))
}

fn span_for(ctx: &mut Ctx, g: &MetricField) -> Result<crate::holonomy::EndoSpan> {
    let base = default_base(g.dim);
    let seed = ctx.rng.gen::<u64>();
    let pts = sample_points(g, &base, HOLONOMY_SAMPLES, SAMPLE_RADIUS, seed)?;
    curvature_span(g, &base, &pts, seed)
}

fn e0(d: usize) -> DVector<f64> {
    let mut e = DVector::zeros(d);
    e[0] = 1.0;
    e
}

fn holonomy_f1(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let g = instance_metric(ctx, inst)?;
    let s = span_for(ctx, &g)?;
    let dev = s.null_line_deviation(&e0(g.dim)).unwrap_or(1.0);
    let label_ok = matches!(
        classify(&s, inst.n),
        HolonomyLabel::NullTranslations(_) | HolonomyLabel::Trivial
    );
    let r = flag(s.bracket_closed_dim <= inst.n)
        .max(flag(s.is_abelian()))
        .max(flag(s.flags.preserves_null_line))
        .max(flag(label_ok))
        .max(s.cube_defect() / 1e-6)
        .max(dev / 1e-6);
    Ok(Outcome::normalized(r, HOLONOMY_SAMPLES))
}

fn holonomy_sim(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let n = inst.n;
    let g = instance_metric(ctx, inst)?;
    let s = span_for(ctx, &g)?;
    let expected = 1 + n * (n - 1) / 2 + n;
    let dev = s.null_line_deviation(&e0(g.dim)).unwrap_or(1.0);
    let r = flag(s.bracket_closed_dim == expected)
        .max(flag(s.flags.preserves_null_line))
        .max(flag(!s.flags.preserves_nondeg_subspace))
        .max(flag(classify(&s, n) == HolonomyLabel::Sim(n)))
        .max(dev / 1e-6)
        .max(s.skew_defect() / 1e-8);
    Ok(Outcome::normalized(r, HOLONOMY_SAMPLES))
}

fn holonomy_deterministic(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let g = instance_metric(ctx, inst)?;
    let seed = ctx.rng.gen::<u64>();
    let base = default_base(g.dim);
    let run = || -> Result<crate::holonomy::EndoSpan> {
        let pts = sample_points(&g, &base, HOLONOMY_SAMPLES, SAMPLE_RADIUS, seed)?;
        curvature_span(&g, &base, &pts, seed)
    };
    let (a, b) = (run()?, run()?);
    let mut diff = flag(a.bracket_closed_dim == b.bracket_closed_dim && a.flags == b.flags);
    for (x, y) in a.closure.iter().zip(&b.closure) {
        diff = diff.max((x - y).amax());
    }
    Ok(Outcome::plain(diff, 0.0, 2 * HOLONOMY_SAMPLES))
}

fn gt_holonomy(ctx: &mut Ctx, _inst: &Instance) -> Result<Outcome> {
    let g = build(&FamilySpec::simple(FamilyId::GtCorrected, 2))?;
    let s = span_for(ctx, &g)?;
    let r = flag(classify(&s, 2) == HolonomyLabel::So11PlusSo(2))
        .max(flag(s.bracket_closed_dim == 2))
        .max(flag(s.flags.preserves_nondeg_subspace));
    Ok(Outcome::normalized(r, HOLONOMY_SAMPLES))
}

fn decomposable_holonomy(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let g = instance_metric(ctx, inst)?;
    let s = span_for(ctx, &g)?;
    let r = flag(s.flags.preserves_null_line)
        .max(flag(s.flags.preserves_nondeg_subspace))
        .max(flag(
            classify(&s, inst.n) == HolonomyLabel::So11PlusSo(inst.n),
        ));
    Ok(Outcome::normalized(r, HOLONOMY_SAMPLES))
}

fn gt_decomposition(ctx: &mut Ctx, _inst: &Instance) -> Result<Outcome> {
    let corrected = build(&FamilySpec::simple(FamilyId::GtCorrected, 2))?;
    let simplified = build(&FamilySpec::simple(FamilyId::GtSimplified, 2))?;
    let pulled = coordinate_transform(&corrected, &gt_decomposition_map())?;
    let mut pts = Vec::new();
    for _ in 0..ctx.cfg.samples {
        pts.push(simplified.sample_point(&mut ctx.rng)?);
    }
    Ok(Outcome::plain(
        max_metric_difference(&pulled, &simplified, &pts)?,
        1e-9,
        ctx.cfg.samples,
    ))
}

fn thc3_flat_riemann(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let (g, p) = sample_metric(ctx, inst)?;
        worst = worst.max(CurvatureBundle::at(&g, &p)?.riemann_lo.max_abs());
    }
    Ok(Outcome::plain(worst, 1e-10, ctx.cfg.samples))
}

fn surface_line(sign: Sign) -> Result<MetricField> {
    let surface = riemannian_space_form(2, sign, 1.0)?;
    Ok(product_metric(&surface, &line(-1.0)))
}

fn cotton_surface_line(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let sign = if inst.family.starts_with("sphere") {
        Sign::Positive
    } else {
        Sign::Negative
    };
    let g = surface_line(sign)?;
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let p: Vec<f64> = vec![
            ctx.rng.gen_range(-0.6..0.6),
            ctx.rng.gen_range(-0.6..0.6),
            ctx.rng.gen_range(-1.0..1.0),
        ];
        worst = worst.max(cotton(&g, &p)?.max_abs());
    }
    Ok(Outcome::plain(worst, 1e-9, ctx.cfg.samples))
}

fn lorentz_space_form_weyl(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let sign = if inst.family.ends_with('+') {
        Sign::Positive
    } else {
        Sign::Negative
    };
    let g = lorentzian_space_form(inst.n, sign, 1.0)?;
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let p: Vec<f64> = (0..inst.n).map(|_| ctx.rng.gen_range(-0.3..0.3)).collect();
        let b = CurvatureBundle::at(&g, &p)?;
        worst = worst.max(b.weyl_norm().unwrap_or(0.0) / (1.0 + b.riemann_lo.max_abs()));
    }
    Ok(Outcome::plain(worst, 1e-9, ctx.cfg.samples))
}

fn chart_sign(inst: &Instance) -> Sign {
    if inst.family == "sphere_chart" {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

fn chart_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // inside |x| < 0.8 for every n
    let r = 0.8 / (n as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-r..r)).collect()
}

fn random_b_f(rng: &mut ChaCha8Rng, n: usize) -> (DVector<f64>, DMatrix<f64>) {
    let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (b, &m - m.transpose())
}

fn chart_instances(cfg: &Config) -> Vec<Instance> {
    unfiltered(cfg, || {
        let mut out = Vec::new();
        for name in ["lobachevskian_chart", "sphere_chart"] {
            for &n in &cfg.ns {
                out.push(Instance::named(name, n));
            }
        }
        out
    })
}

fn killing_fields(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let sign = chart_sign(inst);
    let h = killing::chart_metric(inst.n, sign)?;
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let (b, f) = random_b_f(&mut ctx.rng, inst.n);
        let a = killing::lower(sign, &killing::killing_vector(sign, &b, &f)?);
        let p = chart_point(&mut ctx.rng, inst.n);
        worst = worst.max(killing::killing_residual(&h, &a, &p)?);
    }
    Ok(Outcome::plain(worst, 1e-9, ctx.cfg.samples))
}

fn killing_algebra(_ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let n = inst.n;
    let pts = killing::rank_points(n);
    let rank = killing::killing_algebra_dim(chart_sign(inst), n, &pts)?;
    Ok(Outcome::plain(
        (rank as f64 - (n * (n + 1) / 2) as f64).abs(),
        0.0,
        pts.len(),
    ))
}

fn conformal_general(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let sign = chart_sign(inst);
    let n = inst.n;
    let h = killing::chart_metric(n, sign)?;
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let (bb, d) = random_b_f(&mut ctx.rng, n);
        let ci = DVector::from_fn(n, |_, _| ctx.rng.gen_range(-1.0..1.0));
        let c = ctx.rng.gen_range(-1.0..1.0);
        let a = killing::lower(sign, &killing::conformal_vector(&bb, &d, c, &ci)?);
        let p = chart_point(&mut ctx.rng, n);
        worst = worst.max(killing::conformal_system_residual(&h, &a, &p)?);
    }
    Ok(Outcome::plain(worst, 1e-9, ctx.cfg.samples))
}

fn killing_flow(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let sign = chart_sign(inst);
    let n = inst.n;
    let h = killing::chart_metric(n, sign)?;
    let count = ctx.cfg.samples.min(10);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let (b, f) = random_b_f(&mut ctx.rng, n);
        let x = killing::killing_vector(sign, &b, &f)?;
        let p: Vec<f64> = (0..n).map(|_| ctx.rng.gen_range(-0.25..0.25)).collect();
        worst = worst.max(killing::flow_isometry_defect(&h, &x, &p, 0.1, 20)?);
    }
    Ok(Outcome::plain(worst, 1e-5, count))
}

fn closed_forms(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let (g, p) = sample_metric(ctx, inst)?;
        let w = walker_extract(&g, &p)?;
        let (pc, tc) = walker_closed_forms(&g, &p)?;
        worst = worst.max(pc.sub(&w.p).max_abs()).max((tc - &w.t).amax());
    }
    Ok(Outcome::plain(worst, 1e-8, ctx.cfg.samples))
}

fn frame_formulas(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let (g, p) = sample_metric(ctx, inst)?;
        let w = walker_extract(&g, &p)?;
        worst = worst
            .max(w.ricci_formula_residual())
            .max(w.r_l_formula_residual().unwrap_or(0.0))
            .max((w.bundle.scalar - 2.0 * w.lambda - w.s0).abs());
    }
    Ok(Outcome::plain(worst, 1e-8, ctx.cfg.samples))
}

/// Largest relative gap between jet derivatives of `g` and central differences.
pub fn jets_vs_finite_differences(g: &MetricField, p: &[f64], step: f64) -> Result<f64> {
    let d = g.dim;
    let jets = g.eval(p, 2)?;
    let mut worst: f64 = 0.0;
    let rel = |exact: f64, approx: f64| (exact - approx).abs() / exact.abs().max(1.0);
    for k in 0..d {
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[k] += step;
        lo[k] -= step;
        let (ghi, glo) = (g.eval(&hi, 1)?, g.eval(&lo, 1)?);
        for a in 0..d {
            for b in 0..d {
                let fd = (ghi.get(a, b).value() - glo.get(a, b).value()) / (2.0 * step);
                worst = worst.max(rel(jets.get(a, b).derivative(&[k]), fd));
                for l in 0..d {
                    let fd2 = (ghi.get(a, b).derivative(&[l]) - glo.get(a, b).derivative(&[l]))
                        / (2.0 * step);
                    let mut idx = [k, l];
                    idx.sort_unstable();
                    worst = worst.max(rel(jets.get(a, b).derivative(&idx), fd2));
                }
            }
        }
    }
    Ok(worst)
}

fn jets_fd(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let count = ctx.cfg.samples.min(20);
    for _ in 0..count {
        let (g, p) = sample_metric(ctx, inst)?;
        worst = worst.max(jets_vs_finite_differences(&g, &p, 1e-5)?);
    }
    Ok(Outcome::plain(worst, 1e-6, count))
}

fn nordstrom(ctx: &mut Ctx, inst: &Instance) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..ctx.cfg.samples {
        let (g, p) = sample_metric(ctx, inst)?;
        let b = CurvatureBundle::at(&g, &p)?;
        worst = worst.max(b.weyl_norm().unwrap_or(0.0)).max(b.scalar.abs());
    }
    Ok(Outcome::plain(worst, 1e-9, ctx.cfg.samples))
}

fn fixed(cfg: &Config, id: FamilyId, n: usize) -> Vec<Instance> {
    if cfg.family.is_none() || cfg.family == Some(id) {
        vec![Instance::family(id, n)]
    } else {
        Vec::new()
    }
}

fn registry() -> Vec<Claim> {
    vec![
        Claim {
            id: "closed_forms",
            instances: |c| over(c, &[FamilyId::PpwaveF1, FamilyId::SimF2]),
            run: closed_forms,
        },
        Claim {
            id: "conformal_general",
            instances: chart_instances,
            run: conformal_general,
        },
        Claim {
            id: "cotton_surface_line",
            instances: |c| {
                unfiltered(c, || {
                    vec![
                        Instance::named("lob2_x_line", 3),
                        Instance::named("sphere2_x_line", 3),
                    ]
                })
            },
            run: cotton_surface_line,
        },
        Claim {
            id: "decomposable_holonomy",
            instances: |c| {
                let mut v = fixed(c, FamilyId::Thc3Dec(Sign::Negative), 2);
                v.extend(fixed(c, FamilyId::Thc3Dec(Sign::Positive), 2));
                v
            },
            run: decomposable_holonomy,
        },
        Claim {
            id: "frame_formulas",
            instances: |c| over(c, &THEOREM),
            run: frame_formulas,
        },
        Claim {
            id: "gt_decomposition",
            instances: |c| fixed(c, FamilyId::GtCorrected, 2),
            run: gt_decomposition,
        },
        Claim {
            id: "gt_holonomy",
            instances: |c| fixed(c, FamilyId::GtCorrected, 2),
            run: gt_holonomy,
        },
        Claim {
            id: "holonomy_deterministic",
            instances: |c| {
                over(c, &[FamilyId::SimF2])
                    .into_iter()
                    .filter(|i| i.n == 2 || c.family.is_some())
                    .collect()
            },
            run: holonomy_deterministic,
        },
        Claim {
            id: "holonomy_f1",
            instances: |c| over(c, &[FamilyId::PpwaveF1]),
            run: holonomy_f1,
        },
        Claim {
            id: "holonomy_sim",
            instances: |c| over(c, &[FamilyId::SimF2, FamilyId::SphereF3, FamilyId::HypF4]),
            run: holonomy_sim,
        },
        Claim {
            id: "jets_fd",
            instances: |c| over(c, &THEOREM),
            run: jets_fd,
        },
        Claim {
            id: "killing_algebra",
            instances: chart_instances,
            run: killing_algebra,
        },
        Claim {
            id: "killing_fields",
            instances: chart_instances,
            run: killing_fields,
        },
        Claim {
            id: "killing_flow",
            instances: chart_instances,
            run: killing_flow,
        },
        Claim {
            id: "lemma1",
            instances: |c| {
                let walker = [
                    FamilyId::PpwaveF1,
                    FamilyId::SimF2,
                    FamilyId::SphereF3,
                    FamilyId::HypF4,
                    FamilyId::Thc3Dec(Sign::Positive),
                    FamilyId::Thc3Dec(Sign::Negative),
                    FamilyId::Thc3Flat,
                    FamilyId::CahenWallach,
                ];
                over(c, &walker)
                    .into_iter()
                    .filter(|i| c.family.is_some() || THEOREM.contains(&i.id.unwrap()))
                    .collect()
            },
            run: lemma1,
        },
        Claim {
            id: "lemma1_perturbed",
            instances: |c| over(c, &[FamilyId::PpwaveF1]),
            run: lemma1_perturbed,
        },
        Claim {
            id: "lorentz_space_form_weyl",
            instances: |c| {
                unfiltered(c, || {
                    vec![
                        Instance::named("const_curv_lorentz+", 4),
                        Instance::named("const_curv_lorentz-", 4),
                    ]
                })
            },
            run: lorentz_space_form_weyl,
        },
        Claim {
            id: "nordstrom",
            instances: |c| {
                let mut v = fixed(c, FamilyId::PpwaveF1, 2);
                v.extend(fixed(c, FamilyId::SimF2, 2));
                v
            },
            run: nordstrom,
        },
        Claim {
            id: "ricci_f1",
            instances: |c| over(c, &[FamilyId::PpwaveF1]),
            run: ricci_f1,
        },
        Claim {
            id: "ricci_f2",
            instances: |c| over(c, &[FamilyId::SimF2]),
            run: ricci_f2,
        },
        Claim {
            id: "scalar_f2",
            instances: |c| over(c, &[FamilyId::SimF2]),
            run: scalar_f2,
        },
        Claim {
            id: "scalar_f34",
            instances: |c| over(c, &[FamilyId::SphereF3, FamilyId::HypF4]),
            run: scalar_f34,
        },
        Claim {
            id: "thc3_flat_riemann",
            instances: |c| {
                over(c, &[FamilyId::Thc3Flat])
                    .into_iter()
                    .filter(|i| i.n == 2 || c.family.is_some())
                    .collect()
            },
            run: thc3_flat_riemann,
        },
        Claim {
            id: "weyl_zero",
            instances: weyl_instances,
            run: weyl_zero,
        },
    ]
}

/// Ids of every registered claim, sorted.
pub fn claim_ids() -> Vec<&'static str> {
    let mut ids: Vec<&str> = registry().iter().map(|c| c.id).collect();
    ids.sort_unstable();
    ids
}

/// Runs the selected claims. Unknown claim ids are a configuration error.
pub fn run_claims(cfg: &Config, opts: RunOptions) -> Result<ClaimReport> {
    let reg = registry();
    if let Some(sel) = &cfg.claims {
        for id in sel {
            if !reg.iter().any(|c| c.id == id) {
                return Err(Error::Config {
                    line: 0,
                    msg: format!("unknown claim `{id}`"),
                });
            }
        }
    }
    let mut report = ClaimReport {
        seed: cfg.seed,
        ..ClaimReport::default()
    };
    for claim in &reg {
        if let Some(sel) = &cfg.claims {
            if !sel.iter().any(|s| s == claim.id) {
                continue;
            }
        }
        for inst in (claim.instances)(cfg) {
            let mut ctx = Ctx {
                cfg,
                rng: instance_rng(cfg.seed, claim.id, &inst.family, inst.n),
            };
            let start = Instant::now();
            let outcome = (claim.run)(&mut ctx, &inst);
            let elapsed_ms = if opts.timings {
                start.elapsed().as_millis() as u64
            } else {
                0
            };
            match outcome {
                Ok(o) => {
                    let tolerance = match (o.plain, cfg.tol) {
                        (true, Some(t)) => t,
                        _ => o.tolerance,
                    };
                    report.results.push(ClaimResult {
                        claim_id: claim.id.to_string(),
                        family: inst.family.clone(),
                        n: inst.n,
                        samples: o.samples,
                        max_residual: o.residual,
                        tolerance,
                        pass: o.residual <= tolerance,
                        elapsed_ms,
                        seed: cfg.seed,
                    });
                }
                Err(e @ (Error::FamilyConstraint(_) | Error::InvalidParameter(_))) => {
                    report.skipped.push(Skipped {
                        claim_id: claim.id.to_string(),
                        family: inst.family.clone(),
                        n: inst.n,
                        reason: e.to_string(),
                    })
                }
                Err(e) => {
                    // numerical failure: reported as a failed claim
                    eprintln!("{} [{} n={}]: {e}", claim.id, inst.family, inst.n);
                    report.results.push(ClaimResult {
                        claim_id: claim.id.to_string(),
                        family: inst.family.clone(),
                        n: inst.n,
                        samples: 0,
                        max_residual: f64::MAX,
                        tolerance: 0.0,
                        pass: false,
                        elapsed_ms,
                        seed: cfg.seed,
                    });
                }
            }
        }
    }
    report.results.sort_by(|a, b| {
        (a.claim_id.as_str(), a.family.as_str(), a.n).cmp(&(
            b.claim_id.as_str(),
            b.family.as_str(),
            b.n,
        ))
    });
    Ok(report)
}

/// Summary of one curvature span, as printed by `cfwalker holonomy`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolonomySummary {
    pub family: String,
    pub n: usize,
    pub samples: usize,
    pub span_dim: usize,
    pub closed_dim: usize,
    pub preserves_null_line: bool,
    pub preserves_nondeg_subspace: bool,
    pub fiber_rotation_dim: usize,
    pub label: String,
    pub seed: u64,
}

/// Holonomy span of the configured family (default `sim_f2`) at the first configured `n`.
pub fn holonomy_summary(cfg: &Config) -> Result<HolonomySummary> {
    let id = cfg.family.unwrap_or(FamilyId::SimF2);
    let n = if id.fixed_dim4() { 2 } else { cfg.ns[0] };
    let inst = Instance::family(id, n);
    let mut ctx = Ctx {
        cfg,
        rng: instance_rng(cfg.seed, "holonomy", &inst.family, n),
    };
    let g = instance_metric(&mut ctx, &inst)?;
    let s = span_for(&mut ctx, &g)?;
    Ok(HolonomySummary {
        family: inst.family,
        n,
        samples: HOLONOMY_SAMPLES,
        span_dim: s.dim,
        closed_dim: s.bracket_closed_dim,
        preserves_null_line: s.flags.preserves_null_line,
        preserves_nondeg_subspace: s.flags.preserves_nondeg_subspace,
        fiber_rotation_dim: s.flags.fiber_rotation_dim,
        label: classify(&s, n).to_string(),
        seed: cfg.seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    /// Pullback of the corrected GT metric against the simplified one.
    Gt,
    /// `v -> v + phi(x, u)` against its closed form.
    Gauge,
    /// Fiber rotation `x -> O x` preserves the curvature invariants.
    Rotation,
}

impl std::str::FromStr for Transform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Transform> {
        match s {
            "gt" => Ok(Transform::Gt),
            "gauge" => Ok(Transform::Gauge),
            "rotation" => Ok(Transform::Rotation),
            _ => Err(Error::InvalidParameter(format!(
                "unknown transform `{s}` (gt, gauge, rotation)"
            ))),
        }
    }
}

fn random_gauge(rng: &mut ChaCha8Rng, d: usize) -> MultiPoly {
    let mut phi = MultiPoly::zero(d);
    for _ in 0..4 {
        let mut e = vec![0u32; d];
        for slot in e.iter_mut().skip(1) {
            *slot = rng.gen_range(0..2);
        }
        phi = phi.with_term(&e, rng.gen_range(-1.0..1.0));
    }
    phi
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    m.qr().q()
}

/// Runs one transform check and reports it as a claim result.
pub fn transform_check(kind: Transform, cfg: &Config) -> Result<ClaimResult> {
    let (name, default_family) = match kind {
        Transform::Gt => ("transform_gt", FamilyId::GtCorrected),
        Transform::Gauge => ("transform_gauge", FamilyId::SimF2),
        Transform::Rotation => ("transform_rotation", FamilyId::SphereF3),
    };
    let id = cfg.family.unwrap_or(default_family);
    let n = if id.fixed_dim4() { 2 } else { cfg.ns[0] };
    let inst = Instance::family(id, n);
    let mut ctx = Ctx {
        cfg,
        rng: instance_rng(cfg.seed, name, &inst.family, n),
    };
    let samples = cfg.samples;
    let (residual, tolerance) = match kind {
        Transform::Gt => (gt_decomposition(&mut ctx, &inst)?.residual, 1e-9),
        Transform::Gauge => {
            let g = instance_metric(&mut ctx, &inst)?;
            let phi = random_gauge(&mut ctx.rng, g.dim);
            let gauged = crate::walker::gauge_transform(&g, &phi)?;
            let shift = crate::fields::PolyMap::identity(g.dim)
                .with_component(0, MultiPoly::var(g.dim, 0).add(&phi));
            let pulled = coordinate_transform(&g, &shift)?;
            let mut pts = Vec::new();
            for _ in 0..samples {
                pts.push(pulled.sample_point(&mut ctx.rng)?);
            }
            (max_metric_difference(&gauged, &pulled, &pts)?, 1e-9)
        }
        Transform::Rotation => {
            let g = instance_metric(&mut ctx, &inst)?;
            let n = g
                .walker
                .as_ref()
                .map(|w| w.n)
                .ok_or_else(|| Error::NotWalker(g.label.clone()))?;
            let o = random_orthogonal(&mut ctx.rng, n);
            let map = crate::walker::fiber_rotation_map(&o);
            let rotated = coordinate_transform(&g, &map)?;
            let mut worst: f64 = 0.0;
            for _ in 0..samples {
                let y = rotated.sample_point(&mut ctx.rng)?;
                let (a, b) = (
                    CurvatureBundle::at(&rotated, &y)?,
                    CurvatureBundle::at(&g, &map.eval(&y))?,
                );
                let ric2 = |m: &DMatrix<f64>| (m * m).trace();
                worst = worst
                    .max((a.scalar - b.scalar).abs())
                    .max((ric2(&a.ricci_op) - ric2(&b.ricci_op)).abs())
                    .max((a.riemann_lo.frobenius() - b.riemann_lo.frobenius()).abs());
            }
            (worst, 1e-8)
        }
    };
    let tolerance = cfg.tol.unwrap_or(tolerance);
    Ok(ClaimResult {
        claim_id: name.to_string(),
        family: inst.family,
        n,
        samples,
        max_residual: residual,
        tolerance,
        pass: residual <= tolerance,
        elapsed_ms: 0,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(claims: &[&str]) -> Config {
        Config {
            samples: 3,
            ns: vec![2],
            claims: Some(claims.iter().map(|s| s.to_string()).collect()),
            ..Config::default()
        }
    }

    #[test]
    fn empty_selection() {
        let r = run_claims(&quick(&[]), RunOptions::default()).unwrap();
        assert!(r.results.is_empty());
        assert_eq!(r.exit_code(), 0);
        assert_eq!(r.to_json_lines().lines().count(), 1);
    }

    #[test]
    fn unknown_claim_is_config_error() {
        assert!(matches!(
            run_claims(&quick(&["nope"]), RunOptions::default()),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn gt_original_must_fail_reports_pass() {
        let cfg = Config {
            family: Some(FamilyId::GtOriginal),
            ..quick(&["weyl_zero"])
        };
        let r = run_claims(&cfg, RunOptions::default()).unwrap();
        assert_eq!(r.results.len(), 1);
        assert!(r.results[0].pass);
        assert_eq!(r.results[0].tolerance, 1.0);
    }

    #[test]
    fn report_is_sorted_and_deterministic() {
        let cfg = quick(&["weyl_zero", "lemma1", "scalar_f2"]);
        let a = run_claims(&cfg, RunOptions::default()).unwrap();
        let b = run_claims(&cfg, RunOptions::default()).unwrap();
        assert_eq!(a.to_json_lines(), b.to_json_lines());
        let keys: Vec<_> = a
            .results
            .iter()
            .map(|r| (r.claim_id.clone(), r.family.clone(), r.n))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(a
            .results
            .iter()
            .all(|r| r.pass == (r.max_residual <= r.tolerance)));
        assert!(a.results.iter().all(|r| r.elapsed_ms == 0));
    }

    #[test]
    fn constraint_violation_is_skipped() {
        let cfg = Config {
            family: Some(FamilyId::Product),
            ns: vec![2],
            ..quick(&["weyl_zero"])
        };
        let r = run_claims(&cfg, RunOptions::default()).unwrap();
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn transforms_pass() {
        let cfg = Config {
            samples: 5,
            ns: vec![2],
            ..Config::default()
        };
        for kind in [Transform::Gt, Transform::Gauge, Transform::Rotation] {
            let r = transform_check(kind, &cfg).unwrap();
            assert!(r.pass, "{r:?}");
        }
        let f3 = Config {
            family: Some(FamilyId::SphereF3),
            ..cfg
        };
        assert!(matches!(
            transform_check(Transform::Gauge, &f3),
            Err(Error::NonzeroLambda(_))
        ));
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
    }
}
