//! Voronoi site sets: an interior anchor plus its mirror image across every
//! facet hyperplane. The Voronoi cell of the anchor in this set is exactly the
//! polytope, so membership becomes "is the anchor the nearest site?".

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{dist, dot, HPolytope};
use crate::lp::chebyshev_center;

/// Default relative clearance required between the anchor and the boundary.
pub const INTERIOR_MARGIN: f64 = 1e-9;

/// Index into a [`SiteSet`]. Index 0 is always the anchor; site `i >= 1` is
/// the reflection across facet `i - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteId(pub usize);

impl SiteId {
    pub const ANCHOR: SiteId = SiteId(0);

    pub fn is_anchor(self) -> bool {
        self.0 == 0
    }

    /// Row of the polytope this site was reflected across.
    pub fn facet(self) -> Option<usize> {
        self.0.checked_sub(1)
    }

    pub fn from_facet(facet: usize) -> Self {
        SiteId(facet + 1)
    }
}

#[derive(Debug, Clone)]
pub struct SiteSet {
    dim: usize,
    /// `(n + 1) x dim`, anchor first.
    points: Vec<f64>,
    /// Distance from the anchor to each facet hyperplane.
    facet_gaps: Vec<f64>,
    delta: f64,
}

impl SiteSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of reflected sites (equals the facet count).
    pub fn n_sites(&self) -> usize {
        self.facet_gaps.len()
    }

    /// Anchor plus sites.
    pub fn len(&self) -> usize {
        self.n_sites() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn anchor(&self) -> &[f64] {
        &self.points[..self.dim]
    }

    pub fn point(&self, id: SiteId) -> &[f64] {
        &self.points[id.0 * self.dim..(id.0 + 1) * self.dim]
    }

    /// Flat `(n + 1) x dim` storage, anchor first.
    pub fn raw(&self) -> &[f64] {
        &self.points
    }

    /// Reflected sites only, in facet order.
    pub fn sites(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points[self.dim..].chunks_exact(self.dim)
    }

    pub fn facet_of(&self, id: SiteId) -> Option<usize> {
        id.facet()
    }

    /// `d(anchor, H_i)` for each facet.
    pub fn facet_gaps(&self) -> &[f64] {
        &self.facet_gaps
    }

    /// Largest anchor-to-site distance, twice the largest facet gap.
    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Reflects `anchor` across every facet hyperplane of `p`.
pub fn build_sites(p: &HPolytope, anchor: &[f64], interior_margin: f64) -> Result<SiteSet> {
    p.check_oracle_ready()?;
    let d = p.dim();
    let min_slack = p.min_slack(anchor)?;
    let required = interior_margin * p.scale();
    if !(min_slack >= required && min_slack > 0.0) {
        return Err(Error::AnchorNotInterior { min_slack, required });
    }

    let mut points = vec![0.0; (p.n_facets() + 1) * d];
    points[..d].copy_from_slice(anchor);
    let facet_gaps: Vec<f64> = points[d..]
        .par_chunks_mut(d)
        .enumerate()
        .map(|(i, site)| {
            let row = p.row(i);
            let rn = p.row_norms()[i];
            let s = p.rhs()[i] - dot(row, anchor);
            let t = 2.0 * s / (rn * rn);
            for ((out, x), a) in site.iter_mut().zip(anchor).zip(row) {
                *out = x + t * a;
            }
            s / rn
        })
        .collect();
    let delta = 2.0 * facet_gaps.iter().copied().fold(0.0, f64::max);
    Ok(SiteSet { dim: d, points, facet_gaps, delta })
}

/// Chebyshev center of `p`, the anchor that lies deepest inside it.
pub fn anchor_from_chebyshev(p: &HPolytope) -> Result<Vec<f64>> {
    Ok(chebyshev_center(p)?.center)
}

/// Largest violation of the per-site construction identities, relative to
/// `scale`: midpoint on the hyperplane, site offset parallel to the normal,
/// and anchor-to-site distance equal to twice the facet gap.
#[derive(Debug, Clone, Copy, Default)]
pub struct SiteResiduals {
    pub midpoint: f64,
    pub parallel: f64,
    pub doubling: f64,
}

pub fn site_residuals(p: &HPolytope, s: &SiteSet) -> SiteResiduals {
    let anchor = s.anchor();
    let scale = p.scale().max(crate::geom::norm(anchor)).max(s.delta());
    let mut res = SiteResiduals::default();
    let mut mid = vec![0.0; s.dim()];
    for (i, site) in s.sites().enumerate() {
        let row = p.row(i);
        let rn = p.row_norms()[i];
        for ((m, a), b) in mid.iter_mut().zip(anchor).zip(site) {
            *m = 0.5 * (a + b);
        }
        let r_mid = (dot(row, &mid) - p.rhs()[i]).abs() / scale;

        let off: Vec<f64> = site.iter().zip(anchor).map(|(x, y)| x - y).collect();
        let off_len = crate::geom::norm(&off);
        let along = dot(&off, row) / (rn * rn);
        let perp: f64 = off.iter().zip(row).map(|(o, a)| (o - along * a).powi(2)).sum::<f64>().sqrt();
        let r_par = if off_len == 0.0 { 0.0 } else { perp / off_len };

        let gap = (p.rhs()[i] - dot(row, anchor)) / rn;
        let r_dbl = (dist(site, anchor) - 2.0 * gap).abs() / scale;

        res.midpoint = res.midpoint.max(r_mid);
        res.parallel = res.parallel.max(r_par);
        res.doubling = res.doubling.max(r_dbl);
    }
    res
}
