//! Synthetic polytopes, hit-and-run sampling and brute-force reference answers.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{dot, HPolytope, Ray};
use crate::io::Metadata;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Nonnegative coefficients, `b = rhs`. Unbounded: the negative orthant is feasible.
    #[default]
    Paper,
    /// The same coefficients with independent random signs; bounded with high probability once `n >> d`.
    Symmetrized,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Paper => "paper",
            Variant::Symmetrized => "symmetrized",
        }
    }
}

/// How `mod(U(0, 32767), 1000)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coefficients {
    /// Uniform real on `[0, 32767)`, real remainder mod 1000.
    #[default]
    Real,
    /// Uniform integer on `0..=32767`, integer remainder mod 1000.
    Integer,
}

impl Coefficients {
    pub fn name(self) -> &'static str {
        match self {
            Coefficients::Real => "real",
            Coefficients::Integer => "integer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub d: usize,
    pub n: usize,
    pub rhs: f64,
    pub seed: u64,
    /// Selects an independent stream under `seed`.
    pub instance: u64,
    pub variant: Variant,
    pub coefficients: Coefficients,
}

impl GenSpec {
    pub fn new(d: usize, n: usize, seed: u64, variant: Variant) -> Self {
        Self {
            d,
            n,
            rhs: 1000.0,
            seed,
            instance: 0,
            variant,
            coefficients: Coefficients::Real,
        }
    }

    pub fn instance(mut self, i: u64) -> Self {
        self.instance = i;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParameter(format!("d must be at least 2, got {}", self.d)));
        }
        if self.n < self.d + 1 {
            return Err(Error::InvalidParameter(format!(
                "n must be at least d + 1 = {}, got {}",
                self.d + 1,
                self.n
            )));
        }
        if !(self.rhs > 0.0 && self.rhs.is_finite()) {
            return Err(Error::InvalidParameter(format!("rhs must be positive, got {}", self.rhs)));
        }
        Ok(())
    }

    pub fn metadata(&self) -> Metadata {
        [
            ("generator", "polyoracle".to_string()),
            ("d", self.d.to_string()),
            ("n", self.n.to_string()),
            ("instance", self.instance.to_string()),
            ("seed", self.seed.to_string()),
            ("variant", self.variant.name().to_string()),
            ("coefficients", self.coefficients.name().to_string()),
            ("rhs", self.rhs.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

pub fn file_name(d: usize, n: usize, instance: u64) -> String {
    format!("P_{d}_{n}_{instance}.poly")
}

pub fn draw_coefficient(rng: &mut Rng, mode: Coefficients) -> f64 {
    match mode {
        Coefficients::Real => (rng.random::<f64>() * 32767.0) % 1000.0,
        Coefficients::Integer => (rng.random_range(0..=32767u32) % 1000) as f64,
    }
}

pub fn gen_polytope(spec: &GenSpec) -> Result<HPolytope> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, spec.instance);
    let mut a = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n * spec.d {
        let mut v = draw_coefficient(&mut rng, spec.coefficients);
        if spec.variant == Variant::Symmetrized && rng.random::<bool>() {
            v = -v;
        }
        a.push(v);
    }
    HPolytope::new(spec.d, a, vec![spec.rhs; spec.n])
}

fn mat_vec(p: &HPolytope, u: &[f64], out: &mut Vec<f64>) {
    let d = p.dim();
    if p.n_facets() * d >= 1 << 16 {
        p.matrix().par_chunks_exact(d).map(|r| dot(r, u)).collect_into_vec(out);
    } else {
        out.clear();
        out.extend(p.rows().map(|r| dot(r, u)));
    }
}

fn slack_into(p: &HPolytope, x: &[f64], out: &mut Vec<f64>) {
    mat_vec(p, x, out);
    for (s, b) in out.iter_mut().zip(p.rhs()) {
        *s = b - *s;
    }
}

/// Hit-and-run chain from `start`: discards `burn` points, then returns `count`.
pub fn hit_and_run(
    p: &HPolytope,
    start: &[f64],
    burn: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let min_slack = p.min_slack(start)?;
    if !(min_slack > 0.0) {
        return Err(Error::AnchorNotInterior { min_slack, required: 0.0 });
    }
    let d = p.dim();
    let mut rng = rng::stream(seed, u64::MAX);
    let mut x = start.to_vec();
    let mut slack = Vec::new();
    let mut au = Vec::new();
    slack_into(p, &x, &mut slack);
    let mut out = Vec::with_capacity(count);
    for it in 0..burn + count {
        let u = rng::unit_vec(&mut rng, d);
        mat_vec(p, &u, &mut au);
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (s, a) in slack.iter().zip(&au) {
            if *a > 0.0 {
                hi = hi.min(s / a);
            } else if *a < 0.0 {
                lo = lo.max(s / a);
            }
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::UnboundedChord { direction: u });
        }
        for _ in 0..64 {
            let t = lo + rng.random::<f64>() * (hi - lo);
            if slack.iter().zip(&au).all(|(s, a)| s - t * a > 0.0) {
                for (xi, ui) in x.iter_mut().zip(&u) {
                    *xi += t * ui;
                }
                if it % 64 == 63 {
                    slack_into(p, &x, &mut slack);
                } else {
                    for (s, a) in slack.iter_mut().zip(&au) {
                        *s -= t * a;
                    }
                }
                break;
            }
        }
        if it >= burn {
            out.push(x.clone());
        }
    }
    Ok(out)
}

/// Exact ray shot: the point where `r` leaves `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub point: Vec<f64>,
    pub facet: usize,
    pub t: f64,
}

pub fn brute_ray_shoot(p: &HPolytope, r: &Ray) -> Result<Shot> {
    let slack = p.slack(r.apex())?;
    if !slack.iter().all(|&s| s > 0.0) {
        return Err(Error::ApexOutside { what: "polytope" });
    }
    let mut best: Option<(f64, usize)> = None;
    for (i, (row, s)) in p.rows().zip(&slack).enumerate() {
        let den = dot(row, r.dir());
        if den > 0.0 {
            let t = s / den;
            if best.is_none_or(|(b, _)| t < b) {
                best = Some((t, i));
            }
        }
    }
    let (t, facet) = best.ok_or(Error::RayEscapes)?;
    Ok(Shot { point: r.at(t), facet, t })
}

/// `anchor + (t* + margin) · (pt - anchor)/||pt - anchor||`, with `t*` the exit parameter.
pub fn outside_point(p: &HPolytope, pt: &[f64], anchor: &[f64], margin: f64) -> Result<Vec<f64>> {
    if !(margin > 0.0) {
        return Err(Error::InvalidParameter(format!("margin must be positive, got {margin}")));
    }
    let dir: Vec<f64> = pt.iter().zip(anchor).map(|(a, b)| a - b).collect();
    let r = Ray::new(anchor.to_vec(), &dir)?;
    let shot = brute_ray_shoot(p, &r)?;
    Ok(r.at(shot.t + margin))
}

/// Pushes every point of `pts` out along its ray from `anchor`, `margin` past the boundary.
pub fn make_outside(
    p: &HPolytope,
    pts: &[Vec<f64>],
    anchor: &[f64],
    margin: f64,
) -> Result<Vec<Vec<f64>>> {
    pts.iter().map(|q| outside_point(p, q, anchor, margin)).collect()
}
