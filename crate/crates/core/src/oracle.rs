//! Membership and boundary oracles built on a site set.
//!
//! Exact membership asks whether the anchor is the nearest site. Approximate
//! membership does the same with an LSH candidate plus a far-query cutoff.
//! The boundary oracles walk a ray inward from the bounding-box exit, jumping
//! to the facet hyperplane of whichever site beats the anchor until the
//! current point is classified inside.

use crate::ann::{ExactIndex, SiteIndex};
use crate::error::{Error, Result};
use crate::geom::{dist_sq, AxisBox, HPolytope, Ray, PARALLEL_TOL};
use crate::sites::SiteId;

/// Which formula produces ε'.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpsPrimeMode {
    /// `sqrt(1 + 2ε²) - 1`.
    #[default]
    Branch2,
    /// `min(sqrt(ε⁴·diam) - 1, sqrt(1 + 2ε²) - 1)`.
    Paper,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

pub fn epsilon_prime(eps: f64, diam: f64, mode: EpsPrimeMode) -> Result<f64> {
    check_eps(eps)?;
    if !(diam > 0.0 && diam.is_finite()) {
        return Err(Error::InvalidParameter(format!("diameter must be positive, got {diam}")));
    }
    let branch2 = (1.0 + 2.0 * eps * eps).sqrt() - 1.0;
    match mode {
        EpsPrimeMode::Branch2 => Ok(branch2),
        EpsPrimeMode::Paper => {
            let first = (eps.powi(4) * diam).sqrt() - 1.0;
            let v = first.min(branch2);
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::Degenerate(format!(
                    "eps' = min({first:.6e}, {branch2:.6e}) is not positive for eps={eps}, diam={diam}"
                )))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub eps: f64,
    pub eps_prime: f64,
    /// Upper bound on the polytope diameter.
    pub diam_ub: f64,
    /// Largest anchor-to-site distance.
    pub delta: f64,
    /// Queries at least this far from the anchor are answered "outside".
    pub far_cut: Option<f64>,
    pub step: f64,
    pub max_iters: usize,
}

impl OracleConfig {
    pub fn new(
        eps: f64,
        diam_ub: f64,
        delta: f64,
        n_facets: usize,
        scale: f64,
        mode: EpsPrimeMode,
    ) -> Result<Self> {
        let eps_prime = epsilon_prime(eps, diam_ub, mode)?;
        let step = (eps * diam_ub * 1e-2).max(1e-9 * scale);
        let max_iters = 10 * n_facets + (diam_ub / step).ceil() as usize;
        let far_cut = Some((delta / (2.0 * eps)).max(diam_ub));
        Ok(Self { eps, eps_prime, diam_ub, delta, far_cut, step, max_iters })
    }

    /// Disables the far-query cutoff, for polytopes whose diameter is not
    /// actually bounded by `diam_ub`.
    pub fn without_far_cut(mut self) -> Self {
        self.far_cut = None;
        self
    }

    /// Depth beyond the anchor/site bisector at which the boundary walk
    /// accepts a point as inside.
    pub fn inside_band(&self) -> f64 {
        0.5 * self.eps * self.diam_ub
    }
}

/// True iff the anchor is a nearest site of `q` (ties count as inside).
pub fn exact_membership(idx: &ExactIndex, q: &[f64]) -> Result<bool> {
    Ok(idx.query(q)?.site.is_anchor())
}

/// Far cut, then the index candidate against the anchor: inside unless the
/// index finds a site strictly closer than the anchor.
pub fn approx_membership<I: SiteIndex + ?Sized>(
    idx: &I,
    cfg: &OracleConfig,
    q: &[f64],
) -> Result<bool> {
    let s = idx.site_set();
    if q.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), got: q.len() });
    }
    let da2 = dist_sq(q, s.anchor());
    if let Some(cut) = cfg.far_cut {
        if da2 >= cut * cut {
            return Ok(false);
        }
    }
    Ok(!idx.any_closer(q, da2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryStatus {
    Hit,
    ApexNearBoundary,
    MaxIters,
    NoIntersection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryResult {
    pub point: Vec<f64>,
    /// Arc length from the apex.
    pub t: f64,
    /// Nearest-site queries issued.
    pub steps: usize,
    pub status: BoundaryStatus,
    /// Every parameter visited, starting with the box exit.
    pub ts: Vec<f64>,
    /// Sites whose hyperplanes were jumped to, in order.
    pub sites: Vec<SiteId>,
}

fn check_apex(p: &HPolytope, r: &Ray) -> Result<()> {
    if !(p.min_slack(r.apex())? > 0.0) {
        return Err(Error::ApexOutside { what: "polytope" });
    }
    Ok(())
}

fn made_progress(t_new: f64, t: f64) -> bool {
    t_new >= 0.0 && t_new < t - 1e-12 * t.max(1.0)
}

/// Voronoi walk with exact nearest sites. Terminates on the boundary point
/// where the anchor becomes a nearest site.
pub fn exact_boundary(
    p: &HPolytope,
    idx: &ExactIndex,
    bbox: &AxisBox,
    r: &Ray,
    max_iters: usize,
) -> Result<BoundaryResult> {
    check_apex(p, r)?;
    let mut t = bbox.exit_param(r)?;
    let mut ts = vec![t];
    let mut sites = Vec::new();
    let done = |t: f64, steps, status, ts, sites| BoundaryResult {
        point: r.at(t),
        t,
        steps,
        status,
        ts,
        sites,
    };
    for steps in 1..=max_iters {
        let x = r.at(t);
        let (anchor_d2, tied) = idx.nearest_sites_tied(&x, 1e-12);
        if tied.is_empty() || anchor_d2 <= tied[0].1 {
            return Ok(done(t, steps, BoundaryStatus::Hit, ts, sites));
        }
        // Among tied sites, the one whose hyperplane pulls t back the most.
        let next = tied
            .iter()
            .filter_map(|&(id, _)| {
                let f = id.facet()?;
                r.hyperplane_param(p.facet(f), PARALLEL_TOL).map(|tn| (tn, id))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let Some((t_new, id)) = next else {
            return Ok(done(t, steps, BoundaryStatus::NoIntersection, ts, sites));
        };
        if !made_progress(t_new, t) {
            // Rounding left x a hair outside the facet it already sits on.
            return Ok(done(t, steps, BoundaryStatus::Hit, ts, sites));
        }
        t = t_new;
        ts.push(t);
        sites.push(id);
    }
    Ok(done(t, max_iters, BoundaryStatus::MaxIters, ts, sites))
}

/// Voronoi walk driven by an approximate index, with ε-steps toward the apex
/// whenever the candidate's hyperplane does not move the walk inward.
///
/// A point counts as inside when no candidate is found or it lies at least
/// [`OracleConfig::inside_band`] past the bisector of the anchor and the
/// candidate site. On inside the result is one step outward from it; when the
/// walk backs up past the apex the result is one step from the apex.
pub fn approx_boundary<I: SiteIndex + ?Sized>(
    p: &HPolytope,
    idx: &I,
    cfg: &OracleConfig,
    bbox: &AxisBox,
    r: &Ray,
) -> Result<BoundaryResult> {
    check_apex(p, r)?;
    let s = idx.site_set();
    let anchor = s.anchor();
    let band = cfg.inside_band();
    let mut t = bbox.exit_param(r)?;
    let mut ts = vec![t];
    let mut sites = Vec::new();
    for steps in 1..=cfg.max_iters {
        let x = r.at(t);
        let cand = idx.nearest_site(&x);
        let inside = match cand {
            None => true,
            Some(c) => {
                let da2 = dist_sq(&x, anchor);
                let dc2 = dist_sq(&x, s.point(c.site));
                let sep = 2.0 * s.facet_gaps()[c.site.0 - 1];
                (dc2 - da2) / (2.0 * sep) >= band
            }
        };
        if inside {
            let t_out = t + cfg.step;
            return Ok(BoundaryResult {
                point: r.at(t_out),
                t: t_out,
                steps,
                status: BoundaryStatus::Hit,
                ts,
                sites,
            });
        }
        let c = cand.expect("inside when no candidate");
        let facet = c.site.0 - 1;
        match r.hyperplane_param(p.facet(facet), PARALLEL_TOL) {
            Some(t_new) if made_progress(t_new, t) => {
                t = t_new;
                sites.push(c.site);
            }
            _ => t -= cfg.step,
        }
        ts.push(t);
        if t < 0.0 {
            return Ok(BoundaryResult {
                point: r.at(cfg.step),
                t: cfg.step,
                steps,
                status: BoundaryStatus::ApexNearBoundary,
                ts,
                sites,
            });
        }
    }
    Ok(BoundaryResult {
        point: r.at(t),
        t,
        steps: cfg.max_iters,
        status: BoundaryStatus::MaxIters,
        ts,
        sites,
    })
}
