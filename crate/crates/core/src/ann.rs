//! Nearest-neighbor indices over a [`SiteSet`].
//!
//! [`ExactIndex`] is a linear scan and the reference for everything else.
//! [`LshIndex`] hashes the reflected sites with random-hyperplane signs
//! (angular LSH on anchor-centered coordinates) and answers queries with
//! multi-probe lookups; the anchor is never stored in its tables, so callers
//! compare against it explicitly.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{dist_sq, dot};
use crate::rng;
use crate::sites::{SiteId, SiteSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub site: SiteId,
    pub dist: f64,
}

/// Something that proposes the reflected site closest to a query.
pub trait SiteIndex: Send + Sync {
    fn site_set(&self) -> &SiteSet;

    /// Best reflected site found for `q`; never the anchor.
    fn nearest_site(&self, q: &[f64]) -> Option<Neighbor>;

    /// Whether the index finds a site with squared distance to `q` strictly
    /// below `radius_sq`.
    fn any_closer(&self, q: &[f64], radius_sq: f64) -> bool {
        self.nearest_site(q)
            .is_some_and(|n| dist_sq(q, self.site_set().point(n.site)) < radius_sq)
    }
}

fn check_query(s: &SiteSet, q: &[f64]) -> Result<()> {
    if q.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), got: q.len() });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ExactIndex {
    sites: Arc<SiteSet>,
}

pub fn build_exact(sites: Arc<SiteSet>) -> ExactIndex {
    ExactIndex { sites }
}

impl ExactIndex {
    /// True nearest point among anchor and sites. Ties go to the anchor,
    /// then to the lowest site index.
    pub fn query(&self, q: &[f64]) -> Result<Neighbor> {
        check_query(&self.sites, q)?;
        let anchor_d2 = dist_sq(q, self.sites.anchor());
        let mut best = (SiteId::ANCHOR, anchor_d2);
        for (i, p) in self.sites.sites().enumerate() {
            let d2 = dist_sq(q, p);
            if d2 < best.1 {
                best = (SiteId(i + 1), d2);
            }
        }
        Ok(Neighbor { site: best.0, dist: best.1.sqrt() })
    }

    /// Squared anchor distance plus every reflected site whose squared
    /// distance is within a relative `rel_tol` of the smallest one.
    pub fn nearest_sites_tied(&self, q: &[f64], rel_tol: f64) -> (f64, Vec<(SiteId, f64)>) {
        let d2: Vec<f64> = self.sites.sites().map(|p| dist_sq(q, p)).collect();
        let min = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let cut = min + rel_tol * min.max(f64::MIN_POSITIVE);
        let tied = d2
            .iter()
            .enumerate()
            .filter(|(_, &v)| v <= cut)
            .map(|(i, &v)| (SiteId(i + 1), v))
            .collect();
        (dist_sq(q, self.sites.anchor()), tied)
    }
}

/// Free-function form of [`ExactIndex::query`].
pub fn query_exact(idx: &ExactIndex, q: &[f64]) -> Result<Neighbor> {
    idx.query(q)
}

impl SiteIndex for ExactIndex {
    fn site_set(&self) -> &SiteSet {
        &self.sites
    }

    fn nearest_site(&self, q: &[f64]) -> Option<Neighbor> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.sites.sites().enumerate() {
            let d2 = dist_sq(q, p);
            if best.is_none_or(|(_, b)| d2 < b) {
                best = Some((i, d2));
            }
        }
        best.map(|(i, d2)| Neighbor { site: SiteId(i + 1), dist: d2.sqrt() })
    }
}

/// Hash width, table count, per-table probe budget and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LshParams {
    pub k: usize,
    pub l: usize,
    pub probes: usize,
    pub seed: u64,
}

impl LshParams {
    /// `(k, l, probes) = (8, 1, 150)` below 10 000 facets, `(11, 1, 40)` from there on.
    pub fn for_facets(n: usize, seed: u64) -> Self {
        if n < 10_000 {
            Self { k: 8, l: 1, probes: 150, seed }
        } else {
            Self { k: 11, l: 1, probes: 40, seed }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > 63 {
            return Err(Error::InvalidParameter(format!("k must be in 1..=63, got {}", self.k)));
        }
        if self.l == 0 {
            return Err(Error::InvalidParameter("l must be at least 1".into()));
        }
        if self.probes == 0 {
            return Err(Error::InvalidParameter("probes must be at least 1".into()));
        }
        Ok(())
    }
}

/// `k` Gaussian normals `g_j` hashing `x` to the bit string `[g_j·x >= 0]`.
#[derive(Debug, Clone)]
pub struct HyperplaneHash {
    dim: usize,
    normals: Vec<f64>,
}

impl HyperplaneHash {
    pub fn sample(dim: usize, k: usize, rng: &mut rng::Rng) -> Self {
        Self { dim, normals: rng::gaussian_vec(rng, dim * k) }
    }

    pub fn bits(&self) -> usize {
        self.normals.len() / self.dim
    }

    pub fn normal(&self, j: usize) -> &[f64] {
        &self.normals[j * self.dim..(j + 1) * self.dim]
    }

    pub fn projections(&self, x: &[f64]) -> Vec<f64> {
        self.normals.chunks_exact(self.dim).map(|g| dot(g, x)).collect()
    }

    pub fn key(&self, x: &[f64]) -> u64 {
        key_of(&self.projections(x))
    }
}

fn key_of(proj: &[f64]) -> u64 {
    proj.iter()
        .enumerate()
        .fold(0u64, |k, (j, &p)| if p >= 0.0 { k | (1 << j) } else { k })
}

/// Fraction of `count` fresh Gaussian hyperplanes on which `x` and `y` get
/// the same sign. Converges to `1 - angle(x, y) / π`.
pub fn sign_agreement(x: &[f64], y: &[f64], count: usize, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, 0);
    let mut agree = 0usize;
    for _ in 0..count {
        let g = rng::gaussian_vec(&mut rng, x.len());
        if (dot(&g, x) >= 0.0) == (dot(&g, y) >= 0.0) {
            agree += 1;
        }
    }
    agree as f64 / count as f64
}

#[derive(Debug, Clone)]
struct Table {
    hash: HyperplaneHash,
    buckets: HashMap<u64, Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct LshIndex {
    sites: Arc<SiteSet>,
    params: LshParams,
    /// Points were hashed relative to the anchor.
    centered: bool,
    tables: Vec<Table>,
}

#[derive(Clone, Copy, PartialEq)]
struct Score(f64);

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so BinaryHeap pops the smallest score first.
        other.0.total_cmp(&self.0)
    }
}

/// Bucket keys to visit for projections `proj`, best first: the query's own
/// bucket, then flips of bit sets ordered by their summed `|g·x|` margins.
pub fn probe_sequence(proj: &[f64], probes: usize) -> Vec<u64> {
    let base = key_of(proj);
    let mut keys = Vec::with_capacity(probes);
    keys.push(base);
    let k = proj.len();
    if probes == 1 || k == 0 {
        return keys;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| proj[a].abs().total_cmp(&proj[b].abs()).then(a.cmp(&b)));
    let margin = |pos: usize| proj[order[pos]].abs();

    // Each heap entry is a set of positions into `order`, kept sorted; the
    // shift/expand moves enumerate every non-empty subset exactly once in
    // non-decreasing score order.
    let mut heap: BinaryHeap<(Score, Vec<usize>)> = BinaryHeap::new();
    heap.push((Score(margin(0)), vec![0]));
    while keys.len() < probes {
        let Some((Score(score), set)) = heap.pop() else { break };
        let flip = set.iter().fold(0u64, |m, &p| m | (1 << order[p]));
        keys.push(base ^ flip);
        let last = *set.last().unwrap();
        if last + 1 < k {
            let mut shifted = set.clone();
            *shifted.last_mut().unwrap() = last + 1;
            heap.push((Score(score - margin(last) + margin(last + 1)), shifted));
            let mut expanded = set;
            expanded.push(last + 1);
            heap.push((Score(score + margin(last + 1)), expanded));
        }
    }
    keys
}

pub fn build_lsh(sites: Arc<SiteSet>, params: LshParams) -> Result<LshIndex> {
    params.validate()?;
    let d = sites.dim();
    let anchor = sites.anchor().to_vec();
    let tables = (0..params.l)
        .map(|t| {
            let mut rng = rng::stream(params.seed, t as u64);
            let hash = HyperplaneHash::sample(d, params.k, &mut rng);
            let keys: Vec<u64> = sites
                .raw()
                .par_chunks_exact(d)
                .skip(1)
                .map(|p| {
                    let centered: Vec<f64> = p.iter().zip(&anchor).map(|(x, a)| x - a).collect();
                    hash.key(&centered)
                })
                .collect();
            let mut buckets: HashMap<u64, Vec<u32>> = HashMap::new();
            for (i, key) in keys.into_iter().enumerate() {
                buckets.entry(key).or_default().push(i as u32 + 1);
            }
            Table { hash, buckets }
        })
        .collect();
    Ok(LshIndex { sites, params, centered: true, tables })
}

impl LshIndex {
    pub fn params(&self) -> LshParams {
        self.params
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn sites(&self) -> &Arc<SiteSet> {
        &self.sites
    }

    /// Per-table projections of `x` after centering on the anchor.
    pub fn projections(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let centered: Vec<f64> = x.iter().zip(self.sites.anchor()).map(|(v, a)| v - a).collect();
        self.tables.iter().map(|t| t.hash.projections(&centered)).collect()
    }

    /// Number of non-empty buckets per table.
    pub fn bucket_counts(&self) -> Vec<usize> {
        self.tables.iter().map(|t| t.buckets.len()).collect()
    }

    /// Visits every candidate in the probed buckets until `visit` returns false.
    fn scan(&self, q: &[f64], mut visit: impl FnMut(u32, &[f64]) -> bool) {
        let centered: Vec<f64> = q.iter().zip(self.sites.anchor()).map(|(x, a)| x - a).collect();
        for table in &self.tables {
            let proj = table.hash.projections(&centered);
            for key in probe_sequence(&proj, self.params.probes) {
                if let Some(bucket) = table.buckets.get(&key) {
                    for &i in bucket {
                        if !visit(i, self.sites.point(SiteId(i as usize))) {
                            return;
                        }
                    }
                }
            }
        }
    }

    /// Closest site among the probed buckets, `None` when all are empty.
    pub fn query(&self, q: &[f64]) -> Result<Option<Neighbor>> {
        check_query(&self.sites, q)?;
        Ok(self.nearest_site(q))
    }
}

/// Free-function form of [`LshIndex::query`].
pub fn query_lsh(idx: &LshIndex, q: &[f64]) -> Result<Option<Neighbor>> {
    idx.query(q)
}

impl SiteIndex for LshIndex {
    fn site_set(&self) -> &SiteSet {
        &self.sites
    }

    fn nearest_site(&self, q: &[f64]) -> Option<Neighbor> {
        let mut best: Option<(u32, f64)> = None;
        self.scan(q, |i, p| {
            let d2 = dist_sq(q, p);
            if best.is_none_or(|(bi, b)| d2 < b || (d2 == b && i < bi)) {
                best = Some((i, d2));
            }
            true
        });
        best.map(|(i, d2)| Neighbor { site: SiteId(i as usize), dist: d2.sqrt() })
    }

    /// Stops at the first probed site inside the radius.
    fn any_closer(&self, q: &[f64], radius_sq: f64) -> bool {
        let mut found = false;
        self.scan(q, |_, p| {
            found = dist_sq(q, p) < radius_sq;
            !found
        });
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::HPolytope;
    use crate::sites::{build_sites, INTERIOR_MARGIN};

    fn square_sites() -> Arc<SiteSet> {
        let p = HPolytope::from_rows(
            &[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            vec![1.0; 4],
        )
        .unwrap();
        Arc::new(build_sites(&p, &[0.0, 0.0], INTERIOR_MARGIN).unwrap())
    }

    #[test]
    fn exact_examples() {
        let idx = build_exact(square_sites());
        assert_eq!(idx.query(&[0.1, 0.0]).unwrap().site, SiteId::ANCHOR);
        assert_eq!(idx.query(&[3.0, 0.0]).unwrap().site, SiteId(1));
        // (1, 0.3) is equidistant from the anchor and (2, 0).
        assert_eq!(idx.query(&[1.0, 0.3]).unwrap().site, SiteId::ANCHOR);
        let n = idx.query(&[0.0, 0.0]).unwrap();
        assert_eq!((n.site, n.dist), (SiteId::ANCHOR, 0.0));
        let n = idx.query(&[1.6, 0.0]).unwrap();
        assert_eq!(n.site, SiteId(1));
        assert!((n.dist - 0.4).abs() < 1e-15);
        assert!(idx.query(&[1.0]).is_err());
    }

    #[test]
    fn ties_between_sites_go_to_lowest_index() {
        let idx = build_exact(square_sites());
        // (5, 5) is equidistant from (2, 0) and (0, 2), both beat the anchor.
        assert_eq!(idx.query(&[5.0, 5.0]).unwrap().site, SiteId(1));
        let (_, tied) = idx.nearest_sites_tied(&[5.0, 5.0], 1e-12);
        assert_eq!(tied.iter().map(|t| t.0).collect::<Vec<_>>(), vec![SiteId(1), SiteId(3)]);
    }

    #[test]
    fn default_parameters_by_facet_count() {
        assert_eq!(LshParams::for_facets(5000, 0), LshParams { k: 8, l: 1, probes: 150, seed: 0 });
        assert_eq!(LshParams::for_facets(9999, 0).k, 8);
        assert_eq!(LshParams::for_facets(10_000, 0), LshParams { k: 11, l: 1, probes: 40, seed: 0 });
    }

    #[test]
    fn invalid_parameters_rejected() {
        for (k, l, probes) in [(0, 1, 1), (4, 0, 1), (4, 1, 0), (64, 1, 1)] {
            let p = LshParams { k, l, probes, seed: 1 };
            assert!(matches!(build_lsh(square_sites(), p), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn probe_sequence_is_margin_ordered() {
        let proj = [0.5, -0.1, 2.0, -0.3];
        let keys = probe_sequence(&proj, 16);
        assert_eq!(keys.len(), 16);
        let base = key_of(&proj);
        assert_eq!(keys[0], base);
        // Cheapest flips: bit 1 (0.1), bit 3 (0.3), bits {1,3} (0.4), bit 0 (0.5).
        assert_eq!(keys[1], base ^ 0b0010);
        assert_eq!(keys[2], base ^ 0b1000);
        assert_eq!(keys[3], base ^ 0b1010);
        assert_eq!(keys[4], base ^ 0b0001);
        let mut all = keys.clone();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 16, "every bucket exactly once");
        let score = |key: u64| -> f64 {
            (0..4).filter(|j| (key ^ base) >> j & 1 == 1).map(|j| proj[j].abs()).sum()
        };
        assert!(keys.windows(2).all(|w| score(w[0]) <= score(w[1]) + 1e-15));
    }

    #[test]
    fn small_index_reaches_every_bucket() {
        let sites = square_sites();
        let idx = build_lsh(sites, LshParams { k: 2, l: 1, probes: 4, seed: 11 }).unwrap();
        let n = idx.query(&[3.0, 0.0]).unwrap().unwrap();
        assert_eq!(n.site, SiteId(1));
        assert!((n.dist - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_probe_can_come_back_empty() {
        let sites = square_sites();
        let idx = build_lsh(sites, LshParams { k: 8, l: 1, probes: 1, seed: 3 }).unwrap();
        assert!(idx.bucket_counts()[0] <= 4);
        // With four occupied buckets out of 256, some direction hashes to an empty one.
        let empty = (0..360).map(|deg| {
            let a = (deg as f64).to_radians();
            [a.cos(), a.sin()]
        });
        let hit = empty.into_iter().find(|q| idx.query(q).unwrap().is_none());
        assert!(hit.is_some(), "expected an empty probe for some direction");
    }

    #[test]
    fn identical_and_antipodal_agreement() {
        let x = [0.3, -1.2, 0.7];
        assert_eq!(sign_agreement(&x, &x, 1000, 5), 1.0);
        let y = [-0.3, 1.2, -0.7];
        assert_eq!(sign_agreement(&x, &y, 1000, 5), 0.0);
    }
}
