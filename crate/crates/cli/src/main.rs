use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use coarselab::amenability::{diam_table, growth_experiment, DiamForm, DiamTarget};
use coarselab::group::{self, FiniteGroup, GroupAction, QuotientChain};
use coarselab::io::{from_json, to_json};
use coarselab::kernel::{self, EmbedMode, Kernel};
use coarselab::metric::{self, gen, FiniteMetricSpace, PointMap};
use coarselab::spectral::{self, ExpansionMode, RegularGraph};
use coarselab::witness::{self, Form, LpWitness, Witness};
use coarselab::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "coarselab", version, about = "Finite coarse geometry laboratory")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Numerical tolerance for PSD and classification tests.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Force exact rational LP solves (default: exact up to 16 points).
    #[arg(long, global = true)]
    exact: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate or check metric spaces.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Generate groups and their word metrics.
    #[command(subcommand)]
    Group(GroupCmd),
    /// Build, convert and verify witnesses.
    #[command(subcommand)]
    Witness(WitnessCmd),
    /// Classify, embed and transform kernels.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Spectral gap, expansion and Kazhdan reports for regular graphs.
    #[command(subcommand)]
    Spectral(SpectralCmd),
    /// diam^F / diam^A tables for a finite group.
    Diam(DiamArgs),
    /// Embeddings and their compression profiles.
    Embed(EmbedArgs),
    /// Validate any coarselab document and print a summary.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SpaceKind {
    Cycle,
    Path,
    Tree,
    Hypercube,
    Complete,
    RandomRegular,
    Z2pow,
    Zn,
    Box,
    Nowak,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: SpaceKind,
    /// Size parameter: points, cube dimension, exponent or `n_max`.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Degree for random-regular graphs.
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    branch: usize,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Box chain: orders of the quotients `Z/a`, each dividing the next.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    divisors: Vec<usize>,
    /// Base group order `Z/m` for nowak spaces.
    #[arg(long, default_value_t = 2)]
    base: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum SpaceCmd {
    Gen(GenArgs),
    /// Re-verify the metric axioms of a space document.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GroupKind {
    Z2pow,
    Zn,
    Dihedral,
}

#[derive(Subcommand, Debug)]
enum GroupCmd {
    Gen {
        #[arg(long, value_enum)]
        kind: GroupKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Word metric of a group document.
    Metric {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Warped metric of a space under a group action.
    Warp {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        group: PathBuf,
        #[arg(long)]
        action: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BuildKind {
    Balls,
    Tree,
}

#[derive(Subcommand, Debug)]
enum WitnessCmd {
    Build {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, value_enum)]
        kind: BuildKind,
        #[arg(long = "r", default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        to: String,
        /// Target exponent for ℓᵖ → ℓ^q.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long = "r", default_value_t = 1.0)]
        r: f64,
        /// Quantization constant for ℓ¹ → A.
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Output space, for conversions that change it.
        #[arg(long)]
        space_out: Option<PathBuf>,
    },
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        space: PathBuf,
        #[arg(long = "r", default_value_t = 1.0)]
        r: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Op {
    Exp,
    Power,
}

#[derive(Subcommand, Debug)]
enum KernelCmd {
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Embed {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Transform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        op: Op,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GraphKind {
    Cycle,
    Complete,
    Hypercube,
    RandomRegular,
    Z2pow,
    Zn,
    Dihedral,
}

#[derive(Subcommand, Debug)]
enum SpectralCmd {
    Gen {
        #[arg(long, value_enum)]
        kind: GraphKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Gap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Expansion {
        #[arg(long = "in")]
        input: PathBuf,
        /// Sample this many subsets instead of enumerating.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Kazhdan {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormArg {
    F,
    A,
    Both,
}

#[derive(Args, Debug)]
struct DiamArgs {
    #[arg(long, value_enum)]
    group: GroupKind,
    #[arg(long)]
    n: usize,
    #[arg(long = "r", value_delimiter = ',', default_value = "1")]
    r: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    eps: Vec<f64>,
    #[arg(long, value_enum, default_value = "f")]
    form: FormArg,
    /// Also run diam^F(Gᵏ; 1, ε) for k = 1..=growth.
    #[arg(long)]
    growth: Option<usize>,
    #[arg(long, default_value_t = 64)]
    max_order: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EmbedKind {
    /// Hamming embedding of the truncated hypercube space over Z/2.
    Hypercube,
    /// Negative-type embedding of a space's own distance kernel.
    Kernel,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long, value_enum)]
    kind: EmbedKind,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long)]
    space: Option<PathBuf>,
    /// Compression profile CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Space the document lives on (witnesses only).
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long = "r", default_value_t = 1.0)]
    r: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn write(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    write(path, &to_json(value))
}

fn load_space(path: &Path) -> Result<FiniteMetricSpace> {
    let s = FiniteMetricSpace::from_json_value(from_json(&read(path)?)?)?;
    s.check_invariants()?;
    Ok(s)
}

fn load_group(path: &Path) -> Result<FiniteGroup> {
    FiniteGroup::from_json_value(from_json(&read(path)?)?)
}

fn load_witness(path: &Path) -> Result<Witness> {
    Witness::from_json_value(from_json(&read(path)?)?)
}

fn load_kernel(path: &Path) -> Result<Kernel> {
    Kernel::from_json_value(from_json(&read(path)?)?)
}

fn load_graph(path: &Path) -> Result<RegularGraph> {
    RegularGraph::from_json_value(from_json(&read(path)?)?)
}

fn make_group(kind: GroupKind, n: usize) -> Result<FiniteGroup> {
    if n == 0 {
        return Err(Error::InvalidInput("group size parameter must be positive".into()));
    }
    Ok(match kind {
        GroupKind::Z2pow => FiniteGroup::z2_pow(n as u32),
        GroupKind::Zn => FiniteGroup::cyclic(n),
        GroupKind::Dihedral => FiniteGroup::dihedral(n),
    })
}

fn make_space(a: &GenArgs, seed: u64) -> Result<FiniteMetricSpace> {
    Ok(match a.kind {
        SpaceKind::Cycle => gen::cycle(a.n),
        SpaceKind::Path => gen::path(a.n),
        SpaceKind::Tree => gen::tree(a.branch, a.depth),
        SpaceKind::Hypercube => gen::hypercube(a.n as u32),
        SpaceKind::Complete => gen::complete(a.n),
        SpaceKind::RandomRegular => {
            let g = spectral::random_regular_graph(a.n, a.d, seed)?;
            metric::graph_metric_from_lists(g.lists())?
        }
        SpaceKind::Z2pow => group::cayley_metric(&FiniteGroup::z2_pow(a.n as u32)),
        SpaceKind::Zn => group::cayley_metric(&FiniteGroup::cyclic(a.n)),
        SpaceKind::Box => {
            let top = *a.divisors.last().ok_or_else(|| Error::InvalidInput("empty divisor chain".into()))?;
            let g = FiniteGroup::cyclic(top);
            let chain = QuotientChain::cyclic(&g, &a.divisors)?;
            group::box_space(&g, &chain)?.space
        }
        SpaceKind::Nowak => group::hypercube_space(&FiniteGroup::cyclic(a.base), a.n)?,
    })
}

fn make_graph(kind: GraphKind, n: usize, d: usize, seed: u64) -> Result<RegularGraph> {
    match kind {
        GraphKind::Cycle => RegularGraph::from_lists(gen::cycle_adjacency(n)),
        GraphKind::Complete => RegularGraph::from_lists((0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect()),
        GraphKind::Hypercube | GraphKind::Z2pow => RegularGraph::cayley(&FiniteGroup::z2_pow(n as u32)),
        GraphKind::RandomRegular => spectral::random_regular_graph(n, d, seed),
        GraphKind::Zn => RegularGraph::cayley(&FiniteGroup::cyclic(n)),
        GraphKind::Dihedral => RegularGraph::cayley(&FiniteGroup::dihedral(n)),
    }
}

/// Geodesic from vertex 0 to a farthest vertex.
fn default_ray(space: &FiniteMetricSpace) -> Vec<usize> {
    let far = (0..space.len()).max_by(|&a, &b| space.d(0, a).total_cmp(&space.d(0, b))).unwrap_or(0);
    let total = space.d(0, far);
    let mut ray: Vec<usize> = (0..space.len())
        .filter(|&v| (space.d(0, v) + space.d(v, far) - total).abs() <= space.tol())
        .collect();
    ray.sort_by(|&a, &b| space.d(0, a).total_cmp(&space.d(0, b)));
    ray
}

fn with_meta(cli: &Cli, kind: &str, body: Value, seeded: bool) -> Value {
    let mut v = json!({"schema": coarselab::SCHEMA, "kind": kind, "tol": cli.tol});
    if seeded {
        v["seed"] = json!(cli.seed);
    }
    v["result"] = body;
    v
}

fn report_value(cli: &Cli, rep: &witness::WitnessReport) -> Value {
    with_meta(cli, "witness-report", serde_json::to_value(rep).expect("report"), false)
}

fn exact_flag(cli: &Cli) -> Option<bool> {
    cli.exact.then_some(true)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Space(SpaceCmd::Gen(a)) => {
            let s = make_space(a, cli.seed)?;
            s.check_invariants()?;
            emit(a.out.as_deref(), &s.to_json_value())
        }
        Cmd::Space(SpaceCmd::Check { input }) => {
            let s = load_space(input)?;
            s.check_triangle()?;
            let body = json!({
                "points": s.len(),
                "diameter": s.diameter(),
                "integer_valued": s.is_integer_valued(),
            });
            emit(None, &with_meta(cli, "space-check", body, false))
        }
        Cmd::Group(GroupCmd::Gen { kind, n, out }) => emit(out.as_deref(), &make_group(*kind, *n)?.to_json_value()),
        Cmd::Group(GroupCmd::Metric { input, out }) => {
            let s = group::cayley_metric(&load_group(input)?);
            s.check_invariants()?;
            emit(out.as_deref(), &s.to_json_value())
        }
        Cmd::Group(GroupCmd::Warp { space, group: g, action, out }) => {
            let s = load_space(space)?;
            let g = load_group(g)?;
            let act = GroupAction::from_json_value(g, from_json(&read(action)?)?, s.len())?;
            let w = group::warp_metric(&s, &act)?;
            w.check_invariants()?;
            w.check_triangle()?;
            emit(out.as_deref(), &w.to_json_value())
        }
        Cmd::Witness(WitnessCmd::Build {
            space,
            kind,
            r,
            eps,
            p,
            out,
            report,
        }) => {
            let s = load_space(space)?;
            let w = match kind {
                BuildKind::Balls => Witness::Lp(LpWitness::uniform_balls(&s, *r, *p)?),
                BuildKind::Tree => Witness::AFamily(witness::tree_witness(&s, &default_ray(&s), *r, *eps)?.family),
            };
            witness::check_invariants(&w, &s)?;
            let rep = witness::measure_witness(&w, &s, *r)?;
            emit(out.as_deref(), &w.to_json_value())?;
            if let Some(path) = report {
                emit(Some(path), &report_value(cli, &rep))?;
            }
            Ok(())
        }
        Cmd::Witness(WitnessCmd::Convert {
            input,
            space,
            to,
            p,
            r,
            m,
            out,
            report,
            space_out,
        }) => {
            let s = load_space(space)?;
            let w = load_witness(input)?;
            witness::check_invariants(&w, &s)?;
            let mut params = witness::ConvertParams::at_scale(*r);
            params.q = *p;
            params.m = *m;
            params.psd_tol = cli.tol;
            if matches!(w, Witness::Lp(_)) && Form::parse(to)? == Form::AFamily {
                params.n_table = Some(metric::bounded_geometry_stats(&s, &[witness_support(&w, &s)])?);
            }
            let conv = witness::convert_witness(&w, &s, Form::parse(to)?, &params)?;
            let rep = conv.verify(&s, *r)?;
            emit(out.as_deref(), &conv.witness.to_json_value())?;
            if let (Some(path), Some(space)) = (space_out, &conv.space) {
                emit(Some(path), &space.to_json_value())?;
            }
            let body = json!({"bound": conv.bound, "measured": rep});
            match report {
                Some(path) => emit(Some(path), &with_meta(cli, "conversion-report", body, false)),
                None => Ok(()),
            }
        }
        Cmd::Witness(WitnessCmd::Verify { input, space, r, report }) => {
            let s = load_space(space)?;
            let w = load_witness(input)?;
            witness::check_invariants(&w, &s)?;
            let rep = witness::measure_witness(&w, &s, *r)?;
            emit(report.as_deref(), &report_value(cli, &rep))
        }
        Cmd::Kernel(KernelCmd::Classify { input, out }) => {
            let k = load_kernel(input)?;
            k.check_invariants()?;
            let c = kernel::classify_kernel(&k, cli.tol)?;
            emit(out.as_deref(), &with_meta(cli, "kernel-class", serde_json::to_value(c).expect("class"), false))
        }
        Cmd::Kernel(KernelCmd::Embed { input, mode, csv, out }) => {
            let k = load_kernel(input)?;
            let mode = match mode {
                Mode::Positive => EmbedMode::Positive,
                Mode::Negative => EmbedMode::Negative,
            };
            let e = kernel::embed_from_kernel(&k, mode, cli.tol)?;
            let ids: Vec<String> = (0..e.len()).map(|i| i.to_string()).collect();
            if let Some(path) = csv {
                write(Some(path), &e.to_csv(&ids))?;
            }
            let body = json!({"dim": e.dim(), "clipped": e.clipped, "coords": e.coords});
            emit(out.as_deref(), &with_meta(cli, "embedding", body, false))
        }
        Cmd::Kernel(KernelCmd::Transform { input, op, t, out }) => {
            let k = load_kernel(input)?;
            let res = match op {
                Op::Exp => kernel::exp_transform(&k, *t, cli.tol)?,
                Op::Power => kernel::power_transform(&k, *t, cli.tol)?,
            };
            res.check_invariants()?;
            emit(out.as_deref(), &res.to_json_value())
        }
        Cmd::Spectral(SpectralCmd::Gen { kind, n, d, out }) => {
            emit(out.as_deref(), &make_graph(*kind, *n, *d, cli.seed)?.to_json_value())
        }
        Cmd::Spectral(SpectralCmd::Gap { input, csv, out }) => {
            let g = load_graph(input)?;
            let rep = spectral::laplacian_gap(&g)?;
            let check = spectral::poincare_check(&g, &rep, &rep.eigenvector)?;
            if !check.holds {
                return Err(Error::Invariant(format!("Poincaré check failed at the gap eigenvector: {check:?}")));
            }
            if let Some(path) = csv {
                write(Some(path), &rep.to_csv())?;
            }
            emit(out.as_deref(), &with_meta(cli, "spectral-gap", serde_json::to_value(&rep).expect("report"), false))
        }
        Cmd::Spectral(SpectralCmd::Expansion { input, samples, out }) => {
            let g = load_graph(input)?;
            let mode = match samples {
                Some(s) => ExpansionMode::Sampled { samples: *s, seed: cli.seed },
                None => ExpansionMode::Exact,
            };
            let rep = spectral::expansion_constant(g.lists(), mode)?;
            emit(
                out.as_deref(),
                &with_meta(cli, "expansion", serde_json::to_value(&rep).expect("report"), samples.is_some()),
            )
        }
        Cmd::Spectral(SpectralCmd::Kazhdan { input, out }) => {
            let g = load_graph(input)?;
            let rep = spectral::kazhdan_gap(&g)?;
            if !rep.expansion.violations.is_empty() {
                return Err(Error::Invariant(format!(
                    "{} subsets violate the expansion inequality",
                    rep.expansion.violations.len()
                )));
            }
            emit(out.as_deref(), &with_meta(cli, "kazhdan", serde_json::to_value(&rep).expect("report"), false))
        }
        Cmd::Diam(a) => run_diam(cli, a),
        Cmd::Embed(a) => run_embed(cli, a),
        Cmd::Report(a) => run_report(cli, a),
    }
}

fn witness_support(w: &Witness, s: &FiniteMetricSpace) -> f64 {
    match w {
        Witness::Lp(l) => (0..s.len()).map(|x| witness::support_radius(s, x, &l.xi[x])).fold(0.0, f64::max),
        _ => s.diameter(),
    }
}

fn run_diam(cli: &Cli, a: &DiamArgs) -> Result<()> {
    let g = make_group(a.group, a.n)?;
    let name = format!("{:?}({})", a.group, a.n).to_lowercase();
    let forms: &[DiamForm] = match a.form {
        FormArg::F => &[DiamForm::F],
        FormArg::A => &[DiamForm::A],
        FormArg::Both => &[DiamForm::F, DiamForm::A],
    };
    let mut tables = Vec::new();
    let mut csv = String::new();
    for &form in forms {
        let t = diam_table(DiamTarget::Group(&g), form, &name, &a.r, &a.eps, exact_flag(cli))?;
        let body = t.to_csv();
        if csv.is_empty() {
            csv = body;
        } else {
            csv.extend(body.lines().skip(1).map(|l| format!("{l}\n")));
        }
        tables.push(t);
    }
    if tables.len() == 2 {
        for (f, x) in tables[0].entries.iter().zip(&tables[1].entries) {
            if f.s != x.s {
                return Err(Error::Invariant(format!(
                    "diam^F = {} but diam^A = {} at R = {}, ε = {}",
                    f.s, x.s, f.r, f.eps
                )));
            }
        }
    }
    let mut body = json!({"tables": tables});
    if let Some(k) = a.growth {
        let base = match a.group {
            GroupKind::Z2pow => FiniteGroup::cyclic(2),
            _ => g.clone(),
        };
        let eps = a.eps[0];
        body["growth"] = serde_json::to_value(growth_experiment(&base, eps, 1..=k, a.max_order)?).expect("growth");
    }
    if let Some(path) = &a.csv {
        write(Some(path), &csv)?;
    }
    match &a.out {
        Some(path) => emit(Some(path), &with_meta(cli, "diam", body, false)),
        None if a.csv.is_none() => write(None, &csv),
        None => Ok(()),
    }
}

fn run_embed(cli: &Cli, a: &EmbedArgs) -> Result<()> {
    let (space, coords) = match a.kind {
        EmbedKind::Hypercube => {
            let h = group::hypercube_embedding(a.n)?;
            let e = kernel::embed_from_kernel(&h.kernel, EmbedMode::Negative, cli.tol)?;
            (h.space, e.coords)
        }
        EmbedKind::Kernel => {
            let path = a.space.as_deref().ok_or_else(|| Error::InvalidInput("--space is required".into()))?;
            let s = load_space(path)?;
            let k = Kernel::from_fn(s.len(), |x, y| s.d(x, y))?;
            let e = kernel::embed_from_kernel(&k, EmbedMode::Negative, cli.tol)?;
            (s, e.coords)
        }
    };
    let map = PointMap::into_euclidean(space, coords)?;
    let prof = metric::compression_profile(&map, Some(1.0))?;
    if let Some(path) = &a.csv {
        write(Some(path), &prof.to_csv())?;
    }
    let body = json!({
        "profile": prof,
        "rho1_envelope": prof.rho1_envelope(),
        "effectively_proper": prof.effectively_proper(),
    });
    emit(a.out.as_deref(), &with_meta(cli, "compression-profile", body, false))
}

fn run_report(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let text = read(&a.input)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| schema_err("$", e.to_string()))?;
    let body = if v.get("form").is_some() {
        let w = Witness::from_json_value(from_json(&text)?)?;
        let path = a
            .space
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("--space is required for witness documents".into()))?;
        let s = load_space(path)?;
        witness::check_invariants(&w, &s)?;
        json!({"document": "witness", "report": witness::measure_witness(&w, &s, a.r)?})
    } else if v.get("dist").is_some() {
        let s = FiniteMetricSpace::from_json_value(from_json(&text)?)?;
        s.check_invariants()?;
        s.check_triangle()?;
        json!({"document": "space", "points": s.len(), "diameter": s.diameter()})
    } else if v.get("table").is_some() {
        let g = FiniteGroup::from_json_value(from_json(&text)?)?;
        json!({"document": "group", "order": g.order(), "generators": g.generators().len()})
    } else if v.get("matrix").is_some() {
        let k = Kernel::from_json_value(from_json(&text)?)?;
        k.check_invariants()?;
        json!({"document": "kernel", "class": kernel::classify_kernel(&k, cli.tol)?})
    } else if v.get("adjacency").is_some() {
        let g = RegularGraph::from_json_value(from_json(&text)?)?;
        json!({"document": "graph", "vertices": g.len(), "degree": g.degree()})
    } else if let (Some(kind), Some(_)) = (v.get("kind").and_then(Value::as_str), v.get("result")) {
        let schema = v.get("schema").and_then(Value::as_str).ok_or_else(|| schema_err("$.schema", "missing".into()))?;
        coarselab::io::check_schema(schema, "$.schema")?;
        json!({"document": "report", "kind": kind})
    } else {
        return Err(schema_err("$", "unrecognized document".into()));
    };
    emit(a.out.as_deref(), &with_meta(cli, "report", body, false))
}

fn schema_err(path: &str, msg: String) -> Error {
    Error::Schema { path: path.into(), msg }
}

fn init_threads() {
    if let Some(n) = std::env::var("COARSELAB_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Schema { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e @ Error::Invariant(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
