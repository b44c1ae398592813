//! Plain-text polytope, point and ray files.
//!
//! Polytope files start with a `d n` line followed by `n` rows of `d + 1`
//! numbers (`a_i1 .. a_id b_i`). Point files hold `d` numbers per line, ray
//! files `2d` (apex then direction). Lines starting with `#` carry
//! `key=value` metadata and are otherwise ignored; blank lines are skipped.
//! Numbers are written in Rust's shortest round-trip form, so output is
//! locale-independent and byte-stable.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{HPolytope, Ray};

/// `key=value` pairs from `#` lines, in file order.
pub type Metadata = Vec<(String, String)>;

struct Lines<'a> {
    path: &'a Path,
    meta: Metadata,
    body: Vec<(usize, &'a str)>,
}

fn split_lines<'a>(path: &'a Path, text: &'a str) -> Lines<'a> {
    let mut meta = Vec::new();
    let mut body = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                if let Some((k, v)) = tok.split_once('=') {
                    meta.push((k.to_string(), v.to_string()));
                }
            }
        } else if !line.is_empty() {
            body.push((i + 1, line));
        }
    }
    Lines { path, meta, body }
}

impl Lines<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse { path: self.path.to_path_buf(), line, msg: msg.into() }
    }

    fn numbers(&self, line: usize, text: &str) -> Result<Vec<f64>> {
        text.split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| self.err(line, format!("not a number: {tok:?}")))
            })
            .collect()
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_polytope(path: &Path, text: &str) -> Result<(HPolytope, Metadata)> {
    let lines = split_lines(path, text);
    let Some(&(hline, header)) = lines.body.first() else {
        return Err(lines.err(0, "missing `d n` header"));
    };
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| lines.err(hline, format!("bad header token {t:?}"))))
        .collect::<Result<_>>()?;
    let [d, n] = dims[..] else {
        return Err(lines.err(hline, "header must be `d n`"));
    };
    let rows = &lines.body[1..];
    if rows.len() != n {
        return Err(lines.err(hline, format!("header announces {n} rows, found {}", rows.len())));
    }
    let mut a = Vec::with_capacity(n * d);
    let mut b = Vec::with_capacity(n);
    for &(ln, text) in rows {
        let nums = lines.numbers(ln, text)?;
        if nums.len() != d + 1 {
            return Err(lines.err(ln, format!("expected {} numbers, found {}", d + 1, nums.len())));
        }
        a.extend_from_slice(&nums[..d]);
        b.push(nums[d]);
    }
    let p = HPolytope::new(d, a, b).map_err(|e| lines.err(hline, e.to_string()))?;
    Ok((p, lines.meta))
}

pub fn read_polytope(path: &Path) -> Result<(HPolytope, Metadata)> {
    parse_polytope(path, &read(path)?)
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v}").unwrap();
    }
    out.push('\n');
}

fn push_meta(out: &mut String, meta: &[(String, String)]) {
    for (k, v) in meta {
        writeln!(out, "# {k}={v}").unwrap();
    }
}

pub fn format_polytope(p: &HPolytope, meta: &[(String, String)]) -> String {
    let mut out = String::new();
    push_meta(&mut out, meta);
    writeln!(out, "{} {}", p.dim(), p.n_facets()).unwrap();
    for (row, b) in p.rows().zip(p.rhs()) {
        push_row(&mut out, row.iter().copied().chain(std::iter::once(*b)));
    }
    out
}

pub fn write_polytope(path: &Path, p: &HPolytope, meta: &[(String, String)]) -> Result<()> {
    fs::write(path, format_polytope(p, meta)).map_err(|e| Error::io(path, e))
}

pub fn format_points<'a>(
    points: impl IntoIterator<Item = &'a [f64]>,
    meta: &[(String, String)],
) -> String {
    let mut out = String::new();
    push_meta(&mut out, meta);
    for p in points {
        push_row(&mut out, p.iter().copied());
    }
    out
}

/// Points of dimension `d`, one per line.
pub fn parse_points(path: &Path, text: &str, d: usize) -> Result<Vec<Vec<f64>>> {
    let lines = split_lines(path, text);
    lines
        .body
        .iter()
        .map(|&(ln, t)| {
            let nums = lines.numbers(ln, t)?;
            if nums.len() != d {
                return Err(lines.err(ln, format!("expected {d} numbers, found {}", nums.len())));
            }
            Ok(nums)
        })
        .collect()
}

pub fn read_points(path: &Path, d: usize) -> Result<Vec<Vec<f64>>> {
    parse_points(path, &read(path)?, d)
}

/// Rays of dimension `d`: `2d` numbers per line, apex then direction.
pub fn parse_rays(path: &Path, text: &str, d: usize) -> Result<Vec<Ray>> {
    let lines = split_lines(path, text);
    lines
        .body
        .iter()
        .map(|&(ln, t)| {
            let nums = lines.numbers(ln, t)?;
            if nums.len() != 2 * d {
                return Err(lines.err(ln, format!("expected {} numbers, found {}", 2 * d, nums.len())));
            }
            Ray::new(nums[..d].to_vec(), &nums[d..]).map_err(|e| lines.err(ln, e.to_string()))
        })
        .collect()
}

pub fn read_rays(path: &Path, d: usize) -> Result<Vec<Ray>> {
    parse_rays(path, &read(path)?, d)
}

pub fn format_rays(rays: &[Ray], meta: &[(String, String)]) -> String {
    let mut out = String::new();
    push_meta(&mut out, meta);
    for r in rays {
        push_row(&mut out, r.apex().iter().chain(r.dir()).copied());
    }
    out
}

/// Looks up a metadata value by key.
pub fn meta_get<'a>(meta: &'a [(String, String)], key: &str) -> Option<&'a str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}
