//! Geometric vocabulary shared by every other module: dense vector helpers,
//! hyperplanes, rays, axis-aligned boxes and H-polytopes `{x : Ax <= b}`.
//!
//! Points are plain `&[f64]` slices. All tolerances are relative and get
//! multiplied by a magnitude scale of at least one.

use crate::error::{Error, Result};

/// Default relative tolerance below which a ray counts as parallel to a hyperplane.
pub const PARALLEL_TOL: f64 = 1e-12;
/// Default relative tolerance of [`HPolytope::classify`].
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        let d0 = a[i] - b[i];
        let d1 = a[i + 1] - b[i + 1];
        let d2 = a[i + 2] - b[i + 2];
        let d3 = a[i + 3] - b[i + 3];
        acc[0] += d0 * d0;
        acc[1] += d1 * d1;
        acc[2] += d2 * d2;
        acc[3] += d3 * d3;
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        let d = a[i] - b[i];
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// `a + t * b`
pub fn add_scaled(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// The hyperplane `{x : normal · x = offset}`, borrowing its normal.
#[derive(Debug, Clone, Copy)]
pub struct Hyperplane<'a> {
    pub normal: &'a [f64],
    pub offset: f64,
}

impl<'a> Hyperplane<'a> {
    pub fn new(normal: &'a [f64], offset: f64) -> Self {
        Self { normal, offset }
    }

    /// Signed residual `normal · p - offset`.
    pub fn residual(&self, p: &[f64]) -> f64 {
        dot(self.normal, p) - self.offset
    }

    fn normal_sq(&self) -> Result<f64> {
        let nn = dot(self.normal, self.normal);
        if nn == 0.0 {
            return Err(Error::ZeroNormal { row: 0 });
        }
        Ok(nn)
    }
}

/// Orthogonal projection of `p` onto `h`.
pub fn project_onto_hyperplane(p: &[f64], h: Hyperplane<'_>) -> Result<Vec<f64>> {
    check_dim(h.normal.len(), p.len())?;
    let nn = h.normal_sq()?;
    let t = (h.offset - dot(h.normal, p)) / nn;
    Ok(add_scaled(p, t, h.normal))
}

/// Mirror image of `p` across `h`.
pub fn reflect_across_hyperplane(p: &[f64], h: Hyperplane<'_>) -> Result<Vec<f64>> {
    check_dim(h.normal.len(), p.len())?;
    let nn = h.normal_sq()?;
    let t = 2.0 * (h.offset - dot(h.normal, p)) / nn;
    Ok(add_scaled(p, t, h.normal))
}

/// A half-line `{apex + t * dir : t >= 0}` with a unit-length direction, so
/// the parameter `t` is Euclidean arc length from the apex.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    apex: Vec<f64>,
    dir: Vec<f64>,
}

impl Ray {
    pub fn new(apex: Vec<f64>, direction: &[f64]) -> Result<Self> {
        check_dim(apex.len(), direction.len())?;
        if apex.iter().chain(direction).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "ray" });
        }
        let len = norm(direction);
        if len == 0.0 {
            return Err(Error::ZeroDirection);
        }
        let dir = direction.iter().map(|x| x / len).collect();
        Ok(Self { apex, dir })
    }

    pub fn apex(&self) -> &[f64] {
        &self.apex
    }

    /// Unit direction.
    pub fn dir(&self) -> &[f64] {
        &self.dir
    }

    pub fn dim(&self) -> usize {
        self.apex.len()
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        add_scaled(&self.apex, t, &self.dir)
    }

    /// Parameter of the intersection with `h`, or `None` when the ray runs
    /// parallel to `h` within `parallel_tol`. Negative values lie behind the apex.
    pub fn hyperplane_param(&self, h: Hyperplane<'_>, parallel_tol: f64) -> Option<f64> {
        let denom = dot(h.normal, &self.dir);
        if denom.abs() <= parallel_tol * norm(h.normal) {
            return None;
        }
        Some((h.offset - dot(h.normal, &self.apex)) / denom)
    }
}

/// Intersection point of the supporting line of `ray` with `h`.
pub fn ray_hyperplane_intersect(
    ray: &Ray,
    h: Hyperplane<'_>,
    parallel_tol: f64,
) -> Result<Option<Vec<f64>>> {
    check_dim(ray.dim(), h.normal.len())?;
    Ok(ray.hyperplane_param(h, parallel_tol).map(|t| ray.at(t)))
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if let Some(j) = lo.iter().zip(&hi).position(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidParameter(format!(
                "box has lo > hi in coordinate {j}"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Cube of half-width `w` around `center`.
    pub fn around(center: &[f64], w: f64) -> Self {
        Self {
            lo: center.iter().map(|c| c - w).collect(),
            hi: center.iter().map(|c| c + w).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Length of the main diagonal, an upper bound on the diameter of anything inside.
    pub fn diagonal(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }

    pub fn contains_strictly(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| l < x && x < h)
    }

    /// Arc length at which `ray` leaves the box (slab method).
    pub fn exit_param(&self, ray: &Ray) -> Result<f64> {
        check_dim(self.dim(), ray.dim())?;
        if !self.contains_strictly(ray.apex()) {
            return Err(Error::ApexOutside { what: "box" });
        }
        let mut t_exit = f64::INFINITY;
        for j in 0..self.dim() {
            let v = ray.dir()[j];
            let s = ray.apex()[j];
            let t = if v > 0.0 {
                (self.hi[j] - s) / v
            } else if v < 0.0 {
                (self.lo[j] - s) / v
            } else {
                continue;
            };
            t_exit = t_exit.min(t);
        }
        Ok(t_exit)
    }
}

/// Point where `ray` exits `bx`.
pub fn ray_box_exit(ray: &Ray, bx: &AxisBox) -> Result<Vec<f64>> {
    Ok(ray.at(bx.exit_param(ray)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Membership {
    Inside,
    Outside,
    Boundary,
}

/// H-polytope `{x : Ax <= b}` with `A` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    row_norms: Vec<f64>,
    scale: f64,
}

impl HPolytope {
    /// `a` holds `b.len()` rows of length `dim`.
    pub fn new(dim: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if dim == 0 || b.is_empty() {
            return Err(Error::InvalidParameter(
                "polytope needs at least one row and one dimension".into(),
            ));
        }
        check_dim(dim * b.len(), a.len())?;
        if a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "polytope" });
        }
        let row_norms: Vec<f64> = a.chunks_exact(dim).map(norm).collect();
        if let Some(row) = row_norms.iter().position(|&r| r == 0.0) {
            return Err(Error::ZeroNormal { row });
        }
        let scale = row_norms
            .iter()
            .chain(b.iter())
            .fold(1.0f64, |m, x| m.max(x.abs()));
        Ok(Self { dim, a, b, row_norms, scale })
    }

    pub fn from_rows(rows: &[Vec<f64>], b: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        Self::new(dim, rows.concat(), b)
    }

    /// The box `[lo, hi]` as a polytope with `2d` facets.
    pub fn from_box(bx: &AxisBox) -> Result<Self> {
        let unconstrained =
            Self { dim: bx.dim(), a: Vec::new(), b: Vec::new(), row_norms: Vec::new(), scale: 1.0 };
        unconstrained.with_box(bx)
    }

    /// This polytope intersected with an axis-aligned box (appends `2d` rows).
    pub fn with_box(&self, bx: &AxisBox) -> Result<Self> {
        check_dim(self.dim, bx.dim())?;
        let d = self.dim;
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for j in 0..d {
            let mut row = vec![0.0; d];
            row[j] = 1.0;
            a.extend_from_slice(&row);
            b.push(bx.hi[j]);
            row[j] = -1.0;
            a.extend_from_slice(&row);
            b.push(-bx.lo[j]);
        }
        Self::new(d, a, b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of inequalities.
    pub fn n_facets(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.a.chunks_exact(self.dim)
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    pub fn min_row_norm(&self) -> f64 {
        self.row_norms.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max(1, |b_i|, ||a_i||)`, the magnitude all tolerances are scaled by.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn facet(&self, i: usize) -> Hyperplane<'_> {
        Hyperplane::new(self.row(i), self.b[i])
    }

    /// Oracles need a full-dimensional polytope: `d >= 2` and `n >= d + 1`.
    pub fn check_oracle_ready(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Degenerate(format!("dimension {} < 2", self.dim)));
        }
        if self.n_facets() < self.dim + 1 {
            return Err(Error::Degenerate(format!(
                "{} facets cannot bound a {}-dimensional polytope",
                self.n_facets(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `b - A q`.
    pub fn slack(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, q.len())?;
        Ok(self.rows().zip(&self.b).map(|(r, b)| b - dot(r, q)).collect())
    }

    /// Smallest entry of [`Self::slack`], without allocating.
    pub fn min_slack(&self, q: &[f64]) -> Result<f64> {
        check_dim(self.dim, q.len())?;
        Ok(self
            .rows()
            .zip(&self.b)
            .map(|(r, b)| b - dot(r, q))
            .fold(f64::INFINITY, f64::min))
    }

    /// Reference O(nd) membership test; `tol` is scaled by [`Self::scale`].
    pub fn classify(&self, q: &[f64], tol: f64) -> Result<Membership> {
        let s = self.min_slack(q)?;
        let band = tol * self.scale;
        Ok(if s > band {
            Membership::Inside
        } else if s < -band {
            Membership::Outside
        } else {
            Membership::Boundary
        })
    }

    /// Smallest Euclidean distance from `q` to any facet hyperplane. Exact
    /// distance to the boundary for interior points; a lower bound otherwise.
    pub fn facet_distance(&self, q: &[f64]) -> Result<f64> {
        let s = self.slack(q)?;
        Ok(s.iter()
            .zip(&self.row_norms)
            .map(|(s, r)| s.abs() / r)
            .fold(f64::INFINITY, f64::min))
    }

    /// Lower bound on the distance from `q` to the polytope: the largest
    /// normalized violation, zero when `q` satisfies every inequality.
    pub fn violation_distance(&self, q: &[f64]) -> Result<f64> {
        let s = self.slack(q)?;
        Ok(s.iter()
            .zip(&self.row_norms)
            .map(|(s, r)| -s / r)
            .fold(0.0, f64::max))
    }

    /// Same polytope shifted by `t`.
    pub fn translated(&self, t: &[f64]) -> Result<Self> {
        check_dim(self.dim, t.len())?;
        let b = self.rows().zip(&self.b).map(|(r, b)| b + dot(r, t)).collect();
        Self::new(self.dim, self.a.clone(), b)
    }
}

/// Free-function form of [`HPolytope::slack`].
pub fn slack(p: &HPolytope, q: &[f64]) -> Result<Vec<f64>> {
    p.slack(q)
}

/// Free-function form of [`HPolytope::classify`].
pub fn membership_direct(p: &HPolytope, q: &[f64], tol: f64) -> Result<Membership> {
    p.classify(q, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn unit_square() -> HPolytope {
        HPolytope::from_rows(
            &[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            vec![1.0; 4],
        )
        .unwrap()
    }

    #[test]
    fn slack_of_square() {
        let sq = unit_square();
        assert_eq!(sq.slack(&[0.0, 0.0]).unwrap(), vec![1.0; 4]);
        let s = sq.slack(&[1.0, 0.0]).unwrap();
        assert_eq!(s[0], 0.0);
        assert!(matches!(sq.slack(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn classify_square() {
        let sq = unit_square();
        assert_eq!(sq.classify(&[0.5, 0.5], 1e-12).unwrap(), Membership::Inside);
        assert_eq!(sq.classify(&[2.0, 0.0], 1e-12).unwrap(), Membership::Outside);
        assert_eq!(sq.classify(&[1.0, 0.3], 1e-12).unwrap(), Membership::Boundary);
    }

    #[test]
    fn zero_row_rejected() {
        let err = HPolytope::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]], vec![1.0, 1.0]);
        assert!(matches!(err, Err(Error::ZeroNormal { row: 1 })));
    }

    #[test]
    fn projection_examples() {
        let p = project_onto_hyperplane(&[0.0, 0.0], Hyperplane::new(&[1.0, 0.0], 1.0)).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
        let p = project_onto_hyperplane(&[0.0, 0.0], Hyperplane::new(&[0.0, 1.0], 3.0)).unwrap();
        assert_eq!(p, vec![0.0, 3.0]);
        let p = project_onto_hyperplane(&[1.0, 1.0], Hyperplane::new(&[1.0, 1.0], 4.0)).unwrap();
        assert_eq!(p, vec![2.0, 2.0]);
        assert!(project_onto_hyperplane(&[1.0, 1.0], Hyperplane::new(&[0.0, 0.0], 4.0)).is_err());
    }

    #[test]
    fn reflection_examples() {
        let r = reflect_across_hyperplane(&[0.0, 0.0], Hyperplane::new(&[1.0, 0.0], 1.0)).unwrap();
        assert_eq!(r, vec![2.0, 0.0]);
        let r = reflect_across_hyperplane(&[0.0, 0.0], Hyperplane::new(&[0.0, 1.0], 3.0)).unwrap();
        assert_eq!(r, vec![0.0, 6.0]);
        let on = [0.5, 3.0];
        let r = reflect_across_hyperplane(&on, Hyperplane::new(&[0.0, 1.0], 3.0)).unwrap();
        assert_eq!(r, on.to_vec());
    }

    #[test]
    fn ray_hyperplane_examples() {
        let h = Hyperplane::new(&[1.0, 0.0], 2.0);
        let r = Ray::new(vec![0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(ray_hyperplane_intersect(&r, h, PARALLEL_TOL).unwrap(), Some(vec![2.0, 0.0]));
        let r = Ray::new(vec![0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(ray_hyperplane_intersect(&r, h, PARALLEL_TOL).unwrap(), None);
        let r = Ray::new(vec![0.0, 0.0], &[2.0, 1.0]).unwrap();
        let x = ray_hyperplane_intersect(&r, Hyperplane::new(&[1.0, 0.0], 1.0), PARALLEL_TOL)
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_direction_rejected() {
        assert!(matches!(Ray::new(vec![0.0, 0.0], &[0.0, 0.0]), Err(Error::ZeroDirection)));
    }

    #[test]
    fn box_exit_examples() {
        let q = AxisBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let cases: [([f64; 2], [f64; 2]); 3] =
            [([1.0, 0.0], [1.0, 0.0]), ([1.0, 1.0], [1.0, 1.0]), ([2.0, 1.0], [1.0, 0.5])];
        for (v, want) in cases {
            let r = Ray::new(vec![0.0, 0.0], &v).unwrap();
            let x = ray_box_exit(&r, &q).unwrap();
            assert_abs_diff_eq!(x[0], want[0], epsilon = 1e-15);
            assert_abs_diff_eq!(x[1], want[1], epsilon = 1e-15);
        }
        let r = Ray::new(vec![2.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(matches!(ray_box_exit(&r, &q), Err(Error::ApexOutside { .. })));
    }

    #[test]
    fn with_box_appends_rows() {
        let sq = unit_square();
        let clipped = sq.with_box(&AxisBox::around(&[0.0, 0.0], 0.5)).unwrap();
        assert_eq!(clipped.n_facets(), 8);
        assert_eq!(clipped.classify(&[0.7, 0.0], 1e-12).unwrap(), Membership::Outside);
        let bx = HPolytope::from_box(&AxisBox::around(&[1.0, 1.0], 1.0)).unwrap();
        assert_eq!(bx.n_facets(), 4);
        assert_eq!(bx.classify(&[1.5, 0.5], 1e-12).unwrap(), Membership::Inside);
    }
}
