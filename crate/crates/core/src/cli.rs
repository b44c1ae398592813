//! Command-line front end.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::ann::LshParams;
use crate::bench::{
    bench_boundary, bench_membership, prepare, sweep, AnchorChoice, BoundaryOpts, MembershipOpts,
    Method, Report,
};
use crate::datagen::{self, Coefficients, GenSpec, Variant};
use crate::error::{Error, Result};
use crate::geom::HPolytope;
use crate::io::{self, Metadata};
use crate::oracle::EpsPrimeMode;
use crate::sites::{build_sites, INTERIOR_MARGIN};

pub const THREADS_ENV: &str = "POLYORACLE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "polyoracle", version, about = "Polytope membership and boundary oracles via nearest-neighbor search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate random polytopes, one .poly file per instance.
    Gen(GenArgs),
    /// Write the anchor and its facet reflections as a point file.
    Sites(SitesArgs),
    /// Time preprocessing and membership queries, report CSV.
    BenchMembership(MembershipArgs),
    /// Time boundary queries against brute-force ray shooting, report CSV.
    BenchBoundary(BoundaryArgs),
    /// Membership accuracy and timing over a grid of LSH parameters.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Paper,
    Symmetrized,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CoefficientsArg {
    Real,
    Integer,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AnchorArg {
    Origin,
    Chebyshev,
}

impl From<AnchorArg> for AnchorChoice {
    fn from(a: AnchorArg) -> Self {
        match a {
            AnchorArg::Origin => AnchorChoice::Origin,
            AnchorArg::Chebyshev => AnchorChoice::Chebyshev,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EpsPrimeArg {
    Branch2,
    Paper,
}

impl From<EpsPrimeArg> for EpsPrimeMode {
    fn from(a: EpsPrimeArg) -> Self {
        match a {
            EpsPrimeArg::Branch2 => EpsPrimeMode::Branch2,
            EpsPrimeArg::Paper => EpsPrimeMode::Paper,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BoundaryMethodArg {
    Exact,
    Lsh,
    Both,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub instances: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "paper")]
    pub variant: VariantArg,
    /// Reading of `mod(U(0, 32767), 1000)`.
    #[arg(long, value_enum, default_value = "real")]
    pub coefficients: CoefficientsArg,
    #[arg(long, default_value_t = 1000.0)]
    pub rhs: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SitesArgs {
    pub polytope: PathBuf,
    #[arg(long, value_enum, default_value = "origin")]
    pub anchor: AnchorArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Shared {
    pub polytope: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "origin")]
    pub anchor: AnchorArg,
    #[arg(long = "eps-prime", value_enum, default_value = "branch2")]
    pub eps_prime: EpsPrimeArg,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LshArgs {
    /// Bits per hash (default 8 below 10000 facets, 11 from there on).
    #[arg(long)]
    pub k: Option<usize>,
    /// Hash tables (default 1).
    #[arg(long)]
    pub l: Option<usize>,
    /// Buckets probed per table (default 150 below 10000 facets, 40 from there on).
    #[arg(long)]
    pub probes: Option<usize>,
}

impl LshArgs {
    fn resolve(&self, n: usize, seed: u64) -> LshParams {
        let d = LshParams::for_facets(n, seed);
        LshParams {
            k: self.k.unwrap_or(d.k),
            l: self.l.unwrap_or(d.l),
            probes: self.probes.unwrap_or(d.probes),
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct MembershipArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[command(flatten)]
    pub lsh: LshArgs,
    /// Inside queries; the same number of outside queries is added.
    #[arg(long, default_value_t = 1000)]
    pub queries: usize,
    /// Keep queries regardless of their distance to the boundary; skips all LPs.
    #[arg(long = "no-clearance")]
    pub no_clearance: bool,
    /// Distance outside queries are pushed past the boundary (default 2 * eps * diameter bound).
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[command(flatten)]
    pub lsh: LshArgs,
    #[arg(long, default_value_t = 1000)]
    pub rays: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub method: BoundaryMethodArg,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub l: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub probes: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub queries: usize,
    #[arg(long = "no-clearance")]
    pub no_clearance: bool,
    #[arg(long)]
    pub margin: Option<f64>,
}

/// Thread cap from the environment, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn load(path: &Path) -> Result<(HPolytope, Metadata)> {
    io::read_polytope(path)
}

fn instance_of(meta: &Metadata) -> u64 {
    io::meta_get(meta, "instance").and_then(|v| v.parse().ok()).unwrap_or(0)
}

fn header(report: &mut Report, command: &str, s: &Shared) {
    let mut meta: Metadata = vec![
        ("command".into(), command.into()),
        ("polytope".into(), s.polytope.display().to_string()),
        ("anchor".into(), AnchorChoice::from(s.anchor).name().into()),
    ];
    meta.append(&mut report.meta);
    report.meta = meta;
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Sites(a) => cmd_sites(&a),
        Command::BenchMembership(a) => cmd_bench_membership(&a),
        Command::BenchBoundary(a) => cmd_bench_boundary(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let variant = match a.variant {
        VariantArg::Paper => Variant::Paper,
        VariantArg::Symmetrized => Variant::Symmetrized,
    };
    let coefficients = match a.coefficients {
        CoefficientsArg::Real => Coefficients::Real,
        CoefficientsArg::Integer => Coefficients::Integer,
    };
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let paths: Vec<PathBuf> = (0..a.instances)
        .into_par_iter()
        .map(|i| {
            let mut spec = GenSpec::new(a.d, a.n, a.seed, variant).instance(i);
            spec.rhs = a.rhs;
            spec.coefficients = coefficients;
            let p = datagen::gen_polytope(&spec)?;
            let path = a.out.join(datagen::file_name(a.d, a.n, i));
            io::write_polytope(&path, &p, &spec.metadata())?;
            Ok(path)
        })
        .collect::<Result<_>>()?;
    let listing: String = paths.iter().map(|p| format!("{}\n", p.display())).collect();
    emit(None, &listing)
}

fn cmd_sites(a: &SitesArgs) -> Result<()> {
    let (p, _) = load(&a.polytope)?;
    let anchor = crate::bench::choose_anchor(&p, a.anchor.into())?;
    let s = build_sites(&p, &anchor, INTERIOR_MARGIN)?;
    let meta: Metadata = vec![
        ("polytope".into(), a.polytope.display().to_string()),
        ("anchor".into(), AnchorChoice::from(a.anchor).name().into()),
        ("delta".into(), s.delta().to_string()),
    ];
    let text = io::format_points(s.raw().chunks_exact(s.dim()), &meta);
    emit(a.out.as_deref(), &text)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("--eps must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

fn cmd_bench_membership(a: &MembershipArgs) -> Result<()> {
    check_eps(a.shared.eps)?;
    let (p, meta) = load(&a.shared.polytope)?;
    let lsh = a.lsh.resolve(p.n_facets(), a.shared.seed);
    let prep = prepare(p, a.shared.anchor.into(), !a.no_clearance)?;
    let opts = MembershipOpts {
        eps: a.shared.eps,
        lsh,
        queries: a.queries,
        seed: a.shared.seed,
        eps_prime: a.shared.eps_prime.into(),
        clearance: !a.no_clearance,
        margin: a.margin,
        methods: vec![Method::Lsh, Method::Exact, Method::Naive],
    };
    let mut report = bench_membership(&prep, instance_of(&meta), &opts)?;
    header(&mut report, "bench-membership", &a.shared);
    emit(a.shared.out.as_deref(), &report.to_csv())
}

fn cmd_bench_boundary(a: &BoundaryArgs) -> Result<()> {
    check_eps(a.shared.eps)?;
    let (p, meta) = load(&a.shared.polytope)?;
    let lsh = a.lsh.resolve(p.n_facets(), a.shared.seed);
    let prep = prepare(p, a.shared.anchor.into(), true)?;
    let methods = match a.method {
        BoundaryMethodArg::Exact => vec![Method::Exact],
        BoundaryMethodArg::Lsh => vec![Method::Lsh],
        BoundaryMethodArg::Both => vec![Method::Exact, Method::Lsh],
    };
    let opts = BoundaryOpts {
        eps: a.shared.eps,
        lsh,
        rays: a.rays,
        seed: a.shared.seed,
        eps_prime: a.shared.eps_prime.into(),
        methods,
    };
    let mut report = bench_boundary(&prep, instance_of(&meta), &opts)?;
    header(&mut report, "bench-boundary", &a.shared);
    emit(a.shared.out.as_deref(), &report.to_csv())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    check_eps(a.shared.eps)?;
    if a.k.is_empty() || a.l.is_empty() || a.probes.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    let (p, meta) = load(&a.shared.polytope)?;
    let base = LshParams { k: a.k[0], l: a.l[0], probes: a.probes[0], seed: a.shared.seed };
    let prep = prepare(p, a.shared.anchor.into(), !a.no_clearance)?;
    let opts = MembershipOpts {
        eps: a.shared.eps,
        lsh: base,
        queries: a.queries,
        seed: a.shared.seed,
        eps_prime: a.shared.eps_prime.into(),
        clearance: !a.no_clearance,
        margin: a.margin,
        methods: vec![Method::Lsh],
    };
    let mut report = sweep(&prep, instance_of(&meta), &opts, &a.k, &a.l, &a.probes)?;
    header(&mut report, "sweep", &a.shared);
    emit(a.shared.out.as_deref(), &report.to_csv())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Some(n) = threads {
        // Fails only if a global pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
