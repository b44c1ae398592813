//! Benchmark harness: query sampling, timed oracle runs and CSV reports.
//!
//! Column order of every report:
//! `d,n,instance,phase,method,wall_time_s,mean_time_s,queries,evaluated,success_rate,avg_steps,dist_min,dist_max,dist_avg,k,l,probes,eps,seed`.
//! Fields that do not apply to a row are left empty. `#` metadata lines come
//! before the header.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::ann::{build_exact, build_lsh, ExactIndex, LshIndex, LshParams};
use crate::datagen::{brute_ray_shoot, hit_and_run, outside_point};
use crate::error::{Error, Result};
use crate::geom::{dist, AxisBox, HPolytope, Ray};
use crate::io::Metadata;
use crate::lp::{bounding_box, chebyshev_center};
use crate::oracle::{
    approx_boundary, approx_membership, exact_boundary, exact_membership, BoundaryResult,
    BoundaryStatus, EpsPrimeMode, OracleConfig,
};
use crate::rng;
use crate::sites::{build_sites, SiteSet, INTERIOR_MARGIN};

/// Largest factor by which an outside query's margin is stretched to reach clearance.
const MAX_PUSH: f64 = 1e3;

pub const CSV_HEADER: &str = "d,n,instance,phase,method,wall_time_s,mean_time_s,queries,evaluated,success_rate,avg_steps,dist_min,dist_max,dist_avg,k,l,probes,eps,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Preprocess,
    Membership,
    Boundary,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Preprocess => "PREPROCESS",
            Phase::Membership => "MEMBERSHIP",
            Phase::Boundary => "BOUNDARY",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lsh,
    Exact,
    Naive,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lsh => "lsh",
            Method::Exact => "exact",
            Method::Naive => "naive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub d: usize,
    pub n: usize,
    pub instance: u64,
    pub phase: Phase,
    pub method: Method,
    pub wall_time_s: f64,
    pub mean_time_s: Option<f64>,
    pub queries: usize,
    pub evaluated: Option<usize>,
    pub success_rate: Option<f64>,
    pub avg_steps: Option<f64>,
    pub dist_min: Option<f64>,
    pub dist_max: Option<f64>,
    pub dist_avg: Option<f64>,
    pub lsh: Option<LshParams>,
    pub eps: f64,
    pub seed: u64,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ReportRow {
    pub fn csv(&self) -> String {
        [
            self.d.to_string(),
            self.n.to_string(),
            self.instance.to_string(),
            self.phase.name().to_string(),
            self.method.name().to_string(),
            self.wall_time_s.to_string(),
            opt(self.mean_time_s),
            self.queries.to_string(),
            opt(self.evaluated),
            opt(self.success_rate),
            opt(self.avg_steps),
            opt(self.dist_min),
            opt(self.dist_max),
            opt(self.dist_avg),
            opt(self.lsh.map(|p| p.k)),
            opt(self.lsh.map(|p| p.l)),
            opt(self.lsh.map(|p| p.probes)),
            self.eps.to_string(),
            self.seed.to_string(),
        ]
        .join(",")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub meta: Metadata,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            writeln!(out, "# {k}={v}").unwrap();
        }
        writeln!(out, "{CSV_HEADER}").unwrap();
        for r in &self.rows {
            writeln!(out, "{}", r.csv()).unwrap();
        }
        out
    }

    pub fn extend(&mut self, other: Report) {
        for kv in other.meta {
            if !self.meta.contains(&kv) {
                self.meta.push(kv);
            }
        }
        self.rows.extend(other.rows);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnchorChoice {
    #[default]
    Origin,
    Chebyshev,
}

impl AnchorChoice {
    pub fn name(self) -> &'static str {
        match self {
            AnchorChoice::Origin => "origin",
            AnchorChoice::Chebyshev => "chebyshev",
        }
    }
}

/// A polytope with its anchor, diameter bound and the body queries are drawn
/// from. `bbox` is set only when the polytope is known to be bounded.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub polytope: HPolytope,
    pub anchor: Vec<f64>,
    pub bbox: Option<AxisBox>,
    pub body: HPolytope,
    pub diam_ub: f64,
}

impl Prepared {
    pub fn bounded(&self) -> bool {
        self.bbox.is_some()
    }
}

pub fn choose_anchor(p: &HPolytope, choice: AnchorChoice) -> Result<Vec<f64>> {
    match choice {
        AnchorChoice::Origin => Ok(vec![0.0; p.dim()]),
        AnchorChoice::Chebyshev => Ok(chebyshev_center(p)?.center),
    }
}

/// With `use_lp` and a bounded polytope, `diam_ub` is the diagonal of the LP
/// bounding box and queries come from the polytope itself. Otherwise no box
/// is known: Δ stands in for the diameter and queries come from the polytope
/// clipped to the cube of half-width Δ around the anchor.
pub fn prepare(p: HPolytope, anchor: AnchorChoice, use_lp: bool) -> Result<Prepared> {
    let anchor = choose_anchor(&p, anchor)?;
    if use_lp {
        match bounding_box(&p) {
            Ok(bx) => {
                return Ok(Prepared {
                    diam_ub: bx.diagonal(),
                    body: p.clone(),
                    polytope: p,
                    anchor,
                    bbox: Some(bx),
                })
            }
            Err(Error::Unbounded { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let min_slack = p.min_slack(&anchor)?;
    if !(min_slack > 0.0) {
        return Err(Error::AnchorNotInterior { min_slack, required: 0.0 });
    }
    let delta = 2.0
        * p.slack(&anchor)?
            .iter()
            .zip(p.row_norms())
            .map(|(s, r)| s / r)
            .fold(0.0, f64::max);
    let body = p.with_box(&AxisBox::around(&anchor, delta))?;
    Ok(Prepared { polytope: p, anchor, bbox: None, body, diam_ub: delta })
}

fn median3(mut f: impl FnMut() -> Result<f64>) -> Result<f64> {
    let mut t = [f()?, f()?, f()?];
    t.sort_by(f64::total_cmp);
    Ok(t[1])
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

/// Labelled membership queries.
#[derive(Debug, Clone, Default)]
pub struct QuerySet {
    pub inside: Vec<Vec<f64>>,
    pub outside: Vec<Vec<f64>>,
    /// Candidate points drawn, including those rejected for low clearance.
    pub drawn: usize,
}

/// Hit-and-run points inside the body and their pushed-out images, `count`
/// of each. Outside points start `margin` (default `2 * eps * diam_ub`) past
/// the boundary along the ray from the anchor. With `clearance`, inside points
/// closer than `eps * diam_ub` to the boundary are dropped, and outside points
/// are pushed further until their largest normalized violation is twice that.
pub fn sample_membership_queries(
    prep: &Prepared,
    count: usize,
    eps: f64,
    seed: u64,
    clearance: bool,
    margin: Option<f64>,
) -> Result<QuerySet> {
    let p = &prep.polytope;
    let band = eps * prep.diam_ub;
    let target = 2.0 * band;
    let margin = margin.unwrap_or(target);
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(Error::InvalidParameter(format!("margin must be positive, got {margin}")));
    }
    let mut set = QuerySet::default();
    let mut start = prep.anchor.clone();
    let burn = 100;
    let max_draws = 50 * count.max(1);
    let mut batch = 0u64;
    while (set.inside.len() < count || set.outside.len() < count) && set.drawn < max_draws {
        let size = count.clamp(16, 2000);
        let chain = hit_and_run(&prep.body, &start, if batch == 0 { burn } else { 0 }, size, seed.wrapping_add(batch))?;
        batch += 1;
        start = chain.last().cloned().unwrap_or(start);
        set.drawn += chain.len();
        let pushed: Vec<Option<Vec<f64>>> = chain
            .par_iter()
            .map(|x| {
                let o = match outside_point(p, x, &prep.anchor, margin) {
                    Ok(o) => o,
                    Err(Error::RayEscapes | Error::ZeroDirection) => return Ok(None),
                    Err(e) => return Err(e),
                };
                if !clearance {
                    return Ok(Some(o));
                }
                // Violation grows at least linearly with the margin.
                let v = p.violation_distance(&o)?;
                if v > target {
                    return Ok(Some(o));
                }
                if !(v > 0.0) || target / v > MAX_PUSH {
                    return Ok(None);
                }
                outside_point(p, x, &prep.anchor, margin * target / v).map(Some)
            })
            .collect::<Result<_>>()?;
        for (x, o) in chain.into_iter().zip(pushed) {
            if set.inside.len() < count && (!clearance || p.facet_distance(&x)? > band) {
                set.inside.push(x);
            }
            if let Some(o) = o {
                if set.outside.len() < count && (!clearance || p.violation_distance(&o)? > band) {
                    set.outside.push(o);
                }
            }
        }
    }
    Ok(set)
}

#[derive(Debug, Clone)]
pub struct MembershipOpts {
    pub eps: f64,
    pub lsh: LshParams,
    pub queries: usize,
    pub seed: u64,
    pub eps_prime: EpsPrimeMode,
    pub clearance: bool,
    /// Outside push distance; `2 * eps * diam_ub` when absent.
    pub margin: Option<f64>,
    pub methods: Vec<Method>,
}

/// Sites plus both indices, with the oracle configuration that goes with them.
pub struct Built {
    pub sites: Arc<SiteSet>,
    pub exact: ExactIndex,
    pub lsh: LshIndex,
    pub cfg: OracleConfig,
}

pub fn build_all(prep: &Prepared, eps: f64, lsh: LshParams, mode: EpsPrimeMode) -> Result<Built> {
    let p = &prep.polytope;
    let sites = Arc::new(build_sites(p, &prep.anchor, INTERIOR_MARGIN)?);
    let exact = build_exact(sites.clone());
    let lsh = build_lsh(sites.clone(), lsh)?;
    let mut cfg = OracleConfig::new(eps, prep.diam_ub, sites.delta(), p.n_facets(), p.scale(), mode)?;
    if !prep.bounded() {
        cfg = cfg.without_far_cut();
    }
    Ok(Built { sites, exact, lsh, cfg })
}

/// Per-query latencies and correctness for one oracle over labelled queries.
struct Timing {
    wall: f64,
    mean: f64,
    correct: usize,
}

fn run_membership(
    queries: &[(&[f64], bool)],
    oracle: impl Fn(&[f64]) -> Result<bool> + Sync,
) -> Result<Timing> {
    let (res, wall) = timed(|| {
        queries
            .par_iter()
            .map(|&(q, label)| {
                let start = Instant::now();
                let got = oracle(q)?;
                Ok((start.elapsed().as_secs_f64(), got == label))
            })
            .collect::<Result<Vec<_>>>()
    });
    let res = res?;
    let total: f64 = res.iter().map(|r| r.0).sum();
    Ok(Timing {
        wall,
        mean: if res.is_empty() { 0.0 } else { total / res.len() as f64 },
        correct: res.iter().filter(|r| r.1).count(),
    })
}

fn row(p: &HPolytope, instance: u64, phase: Phase, method: Method, eps: f64, seed: u64) -> ReportRow {
    ReportRow {
        d: p.dim(),
        n: p.n_facets(),
        instance,
        phase,
        method,
        wall_time_s: 0.0,
        mean_time_s: None,
        queries: 0,
        evaluated: None,
        success_rate: None,
        avg_steps: None,
        dist_min: None,
        dist_max: None,
        dist_avg: None,
        lsh: None,
        eps,
        seed,
    }
}

fn prep_meta(prep: &Prepared, cfg: &OracleConfig) -> Metadata {
    [
        ("bounded", prep.bounded().to_string()),
        ("diam_ub", cfg.diam_ub.to_string()),
        ("delta", cfg.delta.to_string()),
        ("eps_prime", cfg.eps_prime.to_string()),
        ("far_cut", opt(cfg.far_cut)),
        ("threads", rayon::current_num_threads().to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn preprocess_rows(
    prep: &Prepared,
    eps: f64,
    lsh: LshParams,
    instance: u64,
    seed: u64,
) -> Result<Vec<ReportRow>> {
    let p = &prep.polytope;
    let t_lsh = median3(|| {
        let (r, t) = timed(|| {
            let s = Arc::new(build_sites(p, &prep.anchor, INTERIOR_MARGIN)?);
            build_lsh(s, lsh).map(drop)
        });
        r.map(|_| t)
    })?;
    let t_exact = median3(|| {
        let (r, t) = timed(|| build_sites(p, &prep.anchor, INTERIOR_MARGIN).map(|s| drop(build_exact(Arc::new(s)))));
        r.map(|_| t)
    })?;
    let mut a = row(p, instance, Phase::Preprocess, Method::Lsh, eps, seed);
    a.wall_time_s = t_lsh;
    a.lsh = Some(lsh);
    let mut b = row(p, instance, Phase::Preprocess, Method::Exact, eps, seed);
    b.wall_time_s = t_exact;
    Ok(vec![a, b])
}

/// Times preprocessing and the membership oracles against construction labels.
pub fn bench_membership(prep: &Prepared, instance: u64, opts: &MembershipOpts) -> Result<Report> {
    let built = build_all(prep, opts.eps, opts.lsh, opts.eps_prime)?;
    let mut report = Report { meta: prep_meta(prep, &built.cfg), rows: Vec::new() };
    if opts.queries == 0 {
        return Ok(report);
    }
    report.rows = preprocess_rows(prep, opts.eps, opts.lsh, instance, opts.seed)?;
    let qs = sample_membership_queries(prep, opts.queries, opts.eps, opts.seed, opts.clearance, opts.margin)?;
    report.meta.push(("drawn".into(), qs.drawn.to_string()));
    report.rows.extend(membership_rows(prep, &built, &qs, instance, opts)?);
    Ok(report)
}

/// One MEMBERSHIP row per requested method over an already sampled query set.
pub fn membership_rows(
    prep: &Prepared,
    built: &Built,
    qs: &QuerySet,
    instance: u64,
    opts: &MembershipOpts,
) -> Result<Vec<ReportRow>> {
    let p = &prep.polytope;
    let labelled: Vec<(&[f64], bool)> = qs
        .inside
        .iter()
        .map(|q| (q.as_slice(), true))
        .chain(qs.outside.iter().map(|q| (q.as_slice(), false)))
        .collect();
    let mut rows = Vec::new();
    for &method in &opts.methods {
        let t = match method {
            Method::Lsh => run_membership(&labelled, |q| approx_membership(&built.lsh, &built.cfg, q))?,
            Method::Exact => run_membership(&labelled, |q| exact_membership(&built.exact, q))?,
            Method::Naive => run_membership(&labelled, |q| Ok(p.min_slack(q)? >= 0.0))?,
        };
        let mut r = row(p, instance, Phase::Membership, method, opts.eps, opts.seed);
        r.wall_time_s = t.wall;
        r.mean_time_s = Some(t.mean);
        r.queries = labelled.len();
        r.evaluated = Some(labelled.len());
        r.success_rate = Some(if labelled.is_empty() { 0.0 } else { t.correct as f64 / labelled.len() as f64 });
        if method == Method::Lsh {
            r.lsh = Some(opts.lsh);
        }
        rows.push(r);
    }
    Ok(rows)
}

/// Membership rows for every `(k, l, probes)` in the grid, on one shared query set.
pub fn sweep(
    prep: &Prepared,
    instance: u64,
    opts: &MembershipOpts,
    ks: &[usize],
    ls: &[usize],
    probes: &[usize],
) -> Result<Report> {
    if ks.is_empty() || ls.is_empty() || probes.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    let mut built = build_all(prep, opts.eps, opts.lsh, opts.eps_prime)?;
    let mut report = Report { meta: prep_meta(prep, &built.cfg), rows: Vec::new() };
    let qs = sample_membership_queries(prep, opts.queries, opts.eps, opts.seed, opts.clearance, opts.margin)?;
    for &k in ks {
        for &l in ls {
            for &pr in probes {
                let params = LshParams { k, l, probes: pr, seed: opts.lsh.seed };
                built.lsh = build_lsh(built.sites.clone(), params)?;
                let o = MembershipOpts { lsh: params, methods: vec![Method::Lsh], ..opts.clone() };
                report.rows.extend(membership_rows(prep, &built, &qs, instance, &o)?);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct BoundaryOpts {
    pub eps: f64,
    pub lsh: LshParams,
    pub rays: usize,
    pub seed: u64,
    pub eps_prime: EpsPrimeMode,
    pub methods: Vec<Method>,
}

/// Random rays: hit-and-run apexes with uniform directions.
pub fn sample_rays(prep: &Prepared, count: usize, seed: u64) -> Result<Vec<Ray>> {
    let apexes = hit_and_run(&prep.body, &prep.anchor, 100, count, seed)?;
    let mut rng = rng::stream(seed, u64::MAX - 1);
    apexes
        .into_iter()
        .map(|a| Ray::new(a, &rng::unit_vec(&mut rng, prep.polytope.dim())))
        .collect()
}

/// Per-ray outcome of a boundary oracle against the brute-force shot.
#[derive(Debug, Clone)]
pub struct RayOutcome {
    pub result: BoundaryResult,
    pub error: f64,
    pub surrogate: f64,
    pub seconds: f64,
}

pub fn run_boundary(
    prep: &Prepared,
    built: &Built,
    rays: &[Ray],
    method: Method,
) -> Result<Vec<RayOutcome>> {
    let p = &prep.polytope;
    let bbox = prep.bbox.as_ref().ok_or(Error::Unbounded { direction: None })?;
    rays.par_iter()
        .map(|r| {
            let shot = brute_ray_shoot(p, r)?;
            let (result, seconds) = timed(|| match method {
                Method::Exact => exact_boundary(p, &built.exact, bbox, r, built.cfg.max_iters),
                Method::Lsh => approx_boundary(p, &built.lsh, &built.cfg, bbox, r),
                Method::Naive => Ok(BoundaryResult {
                    point: shot.point.clone(),
                    t: shot.t,
                    steps: 1,
                    status: BoundaryStatus::Hit,
                    ts: vec![shot.t],
                    sites: Vec::new(),
                }),
            });
            let result = result?;
            Ok(RayOutcome {
                error: dist(&result.point, &shot.point),
                surrogate: p.facet_distance(&result.point)?,
                result,
                seconds,
            })
        })
        .collect()
}

/// Times the boundary oracles on random rays and scores them against brute-force shooting.
pub fn bench_boundary(prep: &Prepared, instance: u64, opts: &BoundaryOpts) -> Result<Report> {
    let p = &prep.polytope;
    if !prep.bounded() {
        return Err(bounding_box(p).err().unwrap_or(Error::Unbounded { direction: None }));
    }
    let built = build_all(prep, opts.eps, opts.lsh, opts.eps_prime)?;
    let mut report = Report { meta: prep_meta(prep, &built.cfg), rows: Vec::new() };
    if opts.rays == 0 {
        return Ok(report);
    }
    report.meta.push(("step".into(), built.cfg.step.to_string()));
    report.rows = preprocess_rows(prep, opts.eps, opts.lsh, instance, opts.seed)?;
    let rays = sample_rays(prep, opts.rays, opts.seed)?;
    let tol = 1e-7 * p.scale();
    for &method in &opts.methods {
        let (outs, wall) = timed(|| run_boundary(prep, &built, &rays, method));
        let outs = outs?;
        let ok = |o: &RayOutcome| match method {
            Method::Exact | Method::Naive => o.result.status == BoundaryStatus::Hit && o.error <= tol,
            Method::Lsh => {
                matches!(o.result.status, BoundaryStatus::Hit | BoundaryStatus::ApexNearBoundary)
                    && o.surrogate <= opts.eps * prep.diam_ub + tol
            }
        };
        let m = outs.len() as f64;
        let mut r = row(p, instance, Phase::Boundary, method, opts.eps, opts.seed);
        r.wall_time_s = wall;
        r.mean_time_s = Some(outs.iter().map(|o| o.seconds).sum::<f64>() / m);
        r.queries = outs.len();
        r.evaluated = Some(outs.len());
        r.success_rate = Some(outs.iter().filter(|o| ok(o)).count() as f64 / m);
        r.avg_steps = Some(outs.iter().map(|o| o.result.steps as f64).sum::<f64>() / m);
        r.dist_min = Some(outs.iter().map(|o| o.error).fold(f64::INFINITY, f64::min));
        r.dist_max = Some(outs.iter().map(|o| o.error).fold(0.0, f64::max));
        r.dist_avg = Some(outs.iter().map(|o| o.error).sum::<f64>() / m);
        if method == Method::Lsh {
            r.lsh = Some(opts.lsh);
        }
        report.rows.push(r);
    }
    Ok(report)
}
