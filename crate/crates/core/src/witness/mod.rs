//! Property-A certificates in six forms, exhaustive measurement, conversions
//! between forms and builders from covers, trees and space constructions.

mod build;
mod convert;

pub use build::*;
pub use convert::*;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::FiniteMetricSpace;

/// Tolerance for unit norms and partition sums.
pub const NORM_TOL: f64 = 1e-9;

/// Nonnegative finitely supported function, sorted by point index, zeros
/// dropped.
pub type Sparse = Vec<(usize, f64)>;

/// Declared parameters. Measurement never trusts these.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// Cleans a function table: absolute values, sorted indices, duplicates
/// summed, zeros dropped.
pub fn sparse_from(values: Vec<(usize, f64)>) -> Sparse {
    let mut v: Vec<(usize, f64)> = values.into_iter().map(|(i, x)| (i, x.abs())).collect();
    v.sort_by_key(|e| e.0);
    let mut out: Sparse = Vec::with_capacity(v.len());
    for (i, x) in v {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += x,
            _ => out.push((i, x)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

pub fn sparse_from_dense(values: &[f64]) -> Sparse {
    sparse_from(values.iter().copied().enumerate().collect())
}

pub fn lp_norm(v: &Sparse, p: f64) -> f64 {
    if p == 1.0 {
        v.iter().map(|e| e.1).sum()
    } else {
        v.iter().map(|e| e.1.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `‖a − b‖_p` by merging the two supports.
pub fn lp_distance(a: &Sparse, b: &Sparse, p: f64) -> f64 {
    let mut acc = 0.0;
    let add = |acc: &mut f64, x: f64| *acc += if p == 1.0 { x.abs() } else { x.abs().powf(p) };
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            add(&mut acc, a[i].1);
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            add(&mut acc, b[j].1);
            j += 1;
        } else {
            add(&mut acc, a[i].1 - b[j].1);
            i += 1;
            j += 1;
        }
    }
    if p == 1.0 {
        acc
    } else {
        acc.powf(1.0 / p)
    }
}

/// `‖v|_{B̄(x, r)}‖_p`.
pub fn ball_norm(space: &FiniteMetricSpace, x: usize, v: &Sparse, r: f64, p: f64) -> f64 {
    let t = space.tol();
    let inside: Sparse = v.iter().copied().filter(|&(y, _)| space.d(x, y) <= r + t).collect();
    lp_norm(&inside, p)
}

/// Largest `d(x, y)` over the support of `v`.
pub fn support_radius(space: &FiniteMetricSpace, x: usize, v: &Sparse) -> f64 {
    v.iter().map(|&(y, _)| space.d(x, y)).fold(0.0, f64::max)
}

/// Subsets `A_x ⊆ X × ℕ`, stored as sorted `(point, copy)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AFamily {
    pub sets: Vec<Vec<(usize, u32)>>,
    pub params: Params,
}

impl AFamily {
    pub fn new(sets: Vec<Vec<(usize, u32)>>, params: Params) -> Result<Self> {
        let mut out = Vec::with_capacity(sets.len());
        for (x, mut a) in sets.into_iter().enumerate() {
            a.sort_unstable();
            a.dedup();
            if a.is_empty() {
                return Err(Error::InvalidInput(format!("A_{x} is empty")));
            }
            if a.iter().any(|e| e.1 == 0) {
                return Err(Error::InvalidInput(format!("A_{x} uses copy index 0")));
            }
            out.push(a);
        }
        Ok(Self { sets: out, params })
    }

    /// `(|A_x △ A_y|, |A_x ∩ A_y|)`.
    pub fn sym_diff_and_meet(&self, x: usize, y: usize) -> (usize, usize) {
        let (a, b) = (&self.sets[x], &self.sets[y]);
        let (mut i, mut j, mut meet) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    meet += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        (a.len() + b.len() - 2 * meet, meet)
    }
}

/// `ξ: X → ℓᵖ(X)` with nonnegative values.
#[derive(Debug, Clone, PartialEq)]
pub struct LpWitness {
    pub p: f64,
    pub xi: Vec<Sparse>,
    pub params: Params,
}

impl LpWitness {
    pub fn new(p: f64, xi: Vec<Vec<(usize, f64)>>, params: Params) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidInput(format!("exponent {p} outside [1, ∞)")));
        }
        Ok(Self {
            p,
            xi: xi.into_iter().map(sparse_from).collect(),
            params: Params { p: Some(p), ..params },
        })
    }

    /// `ξ_x` uniform on `B̄(x, r)`, normalized in `ℓᵖ`.
    pub fn uniform_balls(space: &FiniteMetricSpace, r: f64, p: f64) -> Result<Self> {
        let xi = (0..space.len())
            .map(|x| {
                let ball = space.ball(x, r);
                let v = (ball.len() as f64).powf(-1.0 / p);
                ball.into_iter().map(|y| (y, v)).collect()
            })
            .collect();
        Self::new(p, xi, Params { s: Some(r), ..Params::default() })
    }
}

/// `ζ: X → ℓᵖ(X)` with tail data: in-ball mass above `1 − δ` at radius `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailWitness {
    pub p: f64,
    pub zeta: Vec<Sparse>,
    pub s: f64,
    pub delta: f64,
    /// `min(δ, εᵖ)` when produced by the tail-fixing conversion.
    pub delta_prime: Option<f64>,
    pub params: Params,
}

/// Partition of unity `{φ_i}` subordinate to a cover `{U_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionWitness {
    pub cover: Vec<Vec<usize>>,
    /// `phi[i][x]`, dense over points.
    pub phi: Vec<Vec<f64>>,
    pub params: Params,
}

impl PartitionWitness {
    pub fn new(cover: Vec<Vec<usize>>, phi: Vec<Vec<f64>>, params: Params) -> Result<Self> {
        if cover.len() != phi.len() {
            return Err(Error::InvalidInput("one function per cover set required".into()));
        }
        let cover = cover
            .into_iter()
            .map(|mut u| {
                u.sort_unstable();
                u.dedup();
                u
            })
            .collect();
        Ok(Self { cover, phi, params })
    }

    /// The single-set partition `φ ≡ 1` on an `n`-point space.
    pub fn trivial(n: usize) -> Self {
        Self {
            cover: vec![(0..n).collect()],
            phi: vec![vec![1.0; n]],
            params: Params::default(),
        }
    }

    pub fn n_points(&self) -> usize {
        self.phi.first().map_or(0, Vec::len)
    }
}

/// Unit vectors `f(x)` in a Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorWitness {
    pub coords: Vec<Vec<f64>>,
    pub params: Params,
}

/// Normalized positive-type kernel of finite propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWitness {
    pub k: DMatrix<f64>,
    pub params: Params,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Form {
    AFamily,
    Lp,
    Tail,
    Partition,
    Vector,
    Kernel,
}

impl Form {
    pub fn name(self) -> &'static str {
        match self {
            Form::AFamily => "a-family",
            Form::Lp => "lp",
            Form::Tail => "tail",
            Form::Partition => "partition",
            Form::Vector => "vector",
            Form::Kernel => "kernel",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.into()))
            .map_err(|_| Error::InvalidInput(format!("unknown witness form {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    AFamily(AFamily),
    Lp(LpWitness),
    Tail(TailWitness),
    Partition(PartitionWitness),
    Vector(VectorWitness),
    Kernel(KernelWitness),
}

impl Witness {
    pub fn form(&self) -> Form {
        match self {
            Witness::AFamily(_) => Form::AFamily,
            Witness::Lp(_) => Form::Lp,
            Witness::Tail(_) => Form::Tail,
            Witness::Partition(_) => Form::Partition,
            Witness::Vector(_) => Form::Vector,
            Witness::Kernel(_) => Form::Kernel,
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            Witness::AFamily(w) => &w.params,
            Witness::Lp(w) => &w.params,
            Witness::Tail(w) => &w.params,
            Witness::Partition(w) => &w.params,
            Witness::Vector(w) => &w.params,
            Witness::Kernel(w) => &w.params,
        }
    }

    fn n_points(&self) -> usize {
        match self {
            Witness::AFamily(w) => w.sets.len(),
            Witness::Lp(w) => w.xi.len(),
            Witness::Tail(w) => w.zeta.len(),
            Witness::Partition(w) => w.n_points(),
            Witness::Vector(w) => w.coords.len(),
            Witness::Kernel(w) => w.k.nrows(),
        }
    }

    fn check_points(&self, space: &FiniteMetricSpace) -> Result<()> {
        let n = space.len();
        if self.n_points() != n {
            return Err(Error::PointMismatch(format!(
                "witness has {} points, space has {n}",
                self.n_points()
            )));
        }
        let bad_sparse = |v: &[Sparse]| v.iter().flatten().any(|e| e.0 >= n);
        let bad = match self {
            Witness::AFamily(w) => w.sets.iter().flatten().any(|e| e.0 >= n),
            Witness::Lp(w) => bad_sparse(&w.xi),
            Witness::Tail(w) => bad_sparse(&w.zeta),
            Witness::Partition(w) => {
                w.cover.iter().flatten().any(|&x| x >= n) || w.phi.iter().any(|f| f.len() != n)
            }
            Witness::Vector(_) => false,
            Witness::Kernel(w) => w.k.ncols() != n,
        };
        if bad {
            return Err(Error::PointMismatch("witness references points outside the space".into()));
        }
        Ok(())
    }
}

/// Exhaustively measured parameters of a witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub form: Form,
    #[serde(rename = "R_target")]
    pub r_target: f64,
    /// Worst variation over pairs with `d ≤ R_target`; `None` when some pair
    /// has infinite variation (e.g. disjoint A-sets).
    pub eps_measured: Option<f64>,
    #[serde(rename = "S_measured")]
    pub s_measured: f64,
    pub norm_deviation: f64,
    /// Pair attaining `eps_measured`.
    pub worst_pair: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_ball_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annulus_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl WitnessReport {
    pub fn eps(&self) -> f64 {
        self.eps_measured.unwrap_or(f64::INFINITY)
    }
}

/// Worst value of `f(x, y)` over ordered pairs `x < y` with `d(x,y) ≤ r`.
fn worst_pair(space: &FiniteMetricSpace, r: f64, f: impl Fn(usize, usize) -> f64) -> (f64, Option<(usize, usize)>) {
    let t = space.tol();
    let mut best = (0.0, None);
    for x in 0..space.len() {
        for y in (x + 1)..space.len() {
            if space.d(x, y) <= r + t {
                let v = f(x, y);
                if v > best.0 || v.is_nan() {
                    best = (v, Some((x, y)));
                }
            }
        }
    }
    best
}

/// Measures a witness against a space at scale `r_target`.
pub fn measure_witness(w: &Witness, space: &FiniteMetricSpace, r_target: f64) -> Result<WitnessReport> {
    w.check_points(space)?;
    let n = space.len();
    let mut report = WitnessReport {
        form: w.form(),
        r_target,
        eps_measured: None,
        s_measured: 0.0,
        norm_deviation: 0.0,
        worst_pair: None,
        min_eigenvalue: None,
        in_ball_mass: None,
        annulus_mass: None,
        flags: Vec::new(),
    };
    let (eps, pair) = match w {
        Witness::AFamily(a) => {
            report.s_measured = (0..n)
                .flat_map(|x| a.sets[x].iter().map(move |&(y, _)| space.d(x, y)))
                .fold(0.0, f64::max);
            worst_pair(space, r_target, |x, y| {
                let (sd, meet) = a.sym_diff_and_meet(x, y);
                if meet == 0 {
                    f64::INFINITY
                } else {
                    sd as f64 / meet as f64
                }
            })
        }
        Witness::Lp(l) => {
            report.s_measured = (0..n).map(|x| support_radius(space, x, &l.xi[x])).fold(0.0, f64::max);
            report.norm_deviation = l.xi.iter().map(|v| (lp_norm(v, l.p) - 1.0).abs()).fold(0.0, f64::max);
            worst_pair(space, r_target, |x, y| lp_distance(&l.xi[x], &l.xi[y], l.p))
        }
        Witness::Tail(tw) => {
            report.s_measured = (0..n).map(|x| support_radius(space, x, &tw.zeta[x])).fold(0.0, f64::max);
            report.norm_deviation = tw.zeta.iter().map(|v| (lp_norm(v, tw.p) - 1.0).abs()).fold(0.0, f64::max);
            let (inb, ann) = tail_masses(space, tw, r_target);
            report.in_ball_mass = Some(inb);
            report.annulus_mass = Some(ann);
            worst_pair(space, r_target, |x, y| lp_distance(&tw.zeta[x], &tw.zeta[y], tw.p))
        }
        Witness::Partition(pw) => {
            let t = space.tol();
            report.s_measured = pw
                .cover
                .iter()
                .map(|u| {
                    u.iter()
                        .flat_map(|&a| u.iter().map(move |&b| space.d(a, b)))
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            report.norm_deviation = (0..n)
                .map(|x| (pw.phi.iter().map(|f| f[x]).sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max);
            for (i, (u, f)) in pw.cover.iter().zip(&pw.phi).enumerate() {
                if let Some(x) = (0..n).find(|&x| f[x] != 0.0 && u.binary_search(&x).is_err()) {
                    report.flags.push(format!("phi_{i} nonzero at point {x} outside U_{i}"));
                }
                if let Some(x) = (0..n).find(|&x| f[x] < 0.0 || f[x] > 1.0 + t) {
                    report.flags.push(format!("phi_{i}({x}) outside [0,1]"));
                }
            }
            worst_pair(space, r_target, |x, y| pw.phi.iter().map(|f| (f[x] - f[y]).abs()).sum())
        }
        Witness::Vector(v) => {
            report.norm_deviation = v
                .coords
                .iter()
                .map(|c| (c.iter().map(|a| a * a).sum::<f64>().sqrt() - 1.0).abs())
                .fold(0.0, f64::max);
            for x in 0..n {
                for y in (x + 1)..n {
                    let ip: f64 = v.coords[x].iter().zip(&v.coords[y]).map(|(a, b)| a * b).sum();
                    if ip.abs() > NORM_TOL {
                        report.s_measured = report.s_measured.max(space.d(x, y));
                    }
                }
            }
            worst_pair(space, r_target, |x, y| {
                v.coords[x].iter().zip(&v.coords[y]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
        }
        Witness::Kernel(kw) => {
            let k = &kw.k;
            if !linalg::is_symmetric(k, NORM_TOL) {
                report.flags.push("kernel is not symmetric".into());
            }
            report.norm_deviation = (0..n).map(|x| (k[(x, x)] - 1.0).abs()).fold(0.0, f64::max);
            report.s_measured = kernel_propagation(k, space);
            report.min_eigenvalue = linalg::sym_eigen(k).values.first().copied();
            worst_pair(space, r_target, |x, y| (1.0 - k[(x, y)]).abs())
        }
    };
    report.eps_measured = if eps.is_finite() { Some(eps) } else { None };
    report.worst_pair = pair;
    Ok(report)
}

/// Smallest `S` with `k(x,y) = 0` whenever `d(x,y) > S` (entries below
/// `1e-12·max|k|` count as zero).
pub fn kernel_propagation(k: &DMatrix<f64>, space: &FiniteMetricSpace) -> f64 {
    let cut = 1e-12 * linalg::max_abs(k).max(1.0);
    let n = k.nrows();
    let mut s: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            if k[(x, y)].abs() > cut {
                s = s.max(space.d(x, y));
            }
        }
    }
    s
}

/// `(min_x ‖ζ_x|_{B̄(x,S)}‖_p, max_x ‖ζ_x|_{B̄(x,R+S)∖B̄(x,S)}‖_p)`.
pub fn tail_masses(space: &FiniteMetricSpace, tw: &TailWitness, r: f64) -> (f64, f64) {
    let t = space.tol();
    let mut inb = f64::INFINITY;
    let mut ann: f64 = 0.0;
    for (x, z) in tw.zeta.iter().enumerate() {
        inb = inb.min(ball_norm(space, x, z, tw.s, tw.p));
        let ring: Sparse = z
            .iter()
            .copied()
            .filter(|&(y, _)| {
                let d = space.d(x, y);
                d > tw.s + t && d <= r + tw.s + t
            })
            .collect();
        ann = ann.max(lp_norm(&ring, tw.p));
    }
    (if inb.is_finite() { inb } else { 0.0 }, ann)
}

/// Checks the type invariants of the witness's form (declared `S` used for
/// support conditions when present).
pub fn check_invariants(w: &Witness, space: &FiniteMetricSpace) -> Result<()> {
    w.check_points(space)?;
    let t = space.tol();
    let fail = |m: String| Err(Error::Invariant(m));
    let support_ok = |x: usize, v: &Sparse, s: Option<f64>| s.map_or(true, |s| support_radius(space, x, v) <= s + t);
    match w {
        Witness::AFamily(a) => {
            for (x, set) in a.sets.iter().enumerate() {
                if set.is_empty() {
                    return fail(format!("A_{x} is empty"));
                }
                if let Some(s) = a.params.s {
                    if let Some(&(y, _)) = set.iter().find(|&&(y, _)| space.d(x, y) > s + t) {
                        return fail(format!("A_{x} contains point {y} beyond S"));
                    }
                }
            }
        }
        Witness::Lp(l) => {
            for (x, v) in l.xi.iter().enumerate() {
                if (lp_norm(v, l.p) - 1.0).abs() > NORM_TOL {
                    return fail(format!("‖ξ_{x}‖_p != 1"));
                }
                if !support_ok(x, v, l.params.s) {
                    return fail(format!("supp ξ_{x} leaves B(x, S)"));
                }
            }
        }
        Witness::Tail(tw) => {
            let r = tw.params.r.unwrap_or(0.0);
            let (inb, ann) = tail_masses(space, tw, r);
            if let Some(x) = (0..tw.zeta.len()).find(|&x| (lp_norm(&tw.zeta[x], tw.p) - 1.0).abs() > NORM_TOL) {
                return fail(format!("‖ζ_{x}‖_p != 1"));
            }
            if !(inb > 1.0 - tw.delta || (tw.delta == 0.0 && (inb - 1.0).abs() <= NORM_TOL)) {
                return fail(format!("in-ball mass {inb} not above 1 - δ = {}", 1.0 - tw.delta));
            }
            if let Some(eps) = tw.params.eps {
                if ann > eps + NORM_TOL {
                    return fail(format!("annulus mass {ann} exceeds ε = {eps}"));
                }
            }
        }
        Witness::Partition(pw) => {
            let n = space.len();
            for x in 0..n {
                let s: f64 = pw.phi.iter().map(|f| f[x]).sum();
                if (s - 1.0).abs() > NORM_TOL {
                    return fail(format!("Σφ_i({x}) = {s}"));
                }
            }
            for (i, (u, f)) in pw.cover.iter().zip(&pw.phi).enumerate() {
                if let Some(x) = (0..n).find(|&x| f[x] < -NORM_TOL || (f[x] != 0.0 && u.binary_search(&x).is_err())) {
                    return fail(format!("φ_{i} invalid at point {x}"));
                }
                if let Some(s) = pw.params.s {
                    let diam = u.iter().flat_map(|&a| u.iter().map(move |&b| space.d(a, b))).fold(0.0, f64::max);
                    if diam > s + t {
                        return fail(format!("diam U_{i} = {diam} exceeds S"));
                    }
                }
            }
        }
        Witness::Vector(v) => {
            for (x, c) in v.coords.iter().enumerate() {
                if (c.iter().map(|a| a * a).sum::<f64>().sqrt() - 1.0).abs() > NORM_TOL {
                    return fail(format!("‖f({x})‖ != 1"));
                }
            }
            if let Some(s) = v.params.s {
                for x in 0..v.coords.len() {
                    for y in 0..x {
                        let ip: f64 = v.coords[x].iter().zip(&v.coords[y]).map(|(a, b)| a * b).sum();
                        if space.d(x, y) > s + t && ip.abs() > NORM_TOL {
                            return fail(format!("⟨f({x}), f({y})⟩ != 0 beyond S"));
                        }
                    }
                }
            }
        }
        Witness::Kernel(kw) => {
            let k = &kw.k;
            let n = k.nrows();
            if !linalg::is_symmetric(k, NORM_TOL) {
                return fail("kernel is not symmetric".into());
            }
            if let Some(x) = (0..n).find(|&x| (k[(x, x)] - 1.0).abs() > NORM_TOL) {
                return fail(format!("k({x},{x}) != 1"));
            }
            let scale = linalg::max_abs(k).max(1.0);
            let min_eig = linalg::sym_eigen(k).values.first().copied().unwrap_or(0.0);
            if min_eig < -NORM_TOL * scale {
                return fail(format!("kernel has eigenvalue {min_eig}"));
            }
            if let Some(s) = kw.params.s {
                if kernel_propagation(k, space) > s + t {
                    return fail("kernel nonzero beyond its propagation".into());
                }
            }
            if let (Some(r), Some(eps)) = (kw.params.r, kw.params.eps) {
                for x in 0..n {
                    for y in 0..n {
                        if space.d(x, y) <= r + t && (1.0 - k[(x, y)]).abs() >= eps {
                            return fail(format!("|1 - k({x},{y})| ≥ ε"));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// JSON shape of a witness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessJson {
    pub schema: String,
    pub form: Form,
    #[serde(default)]
    pub params: Params,
    pub data: Value,
}

impl Witness {
    pub fn to_json_value(&self) -> WitnessJson {
        let sparse = |v: &[Sparse]| json!(v.iter().map(|f| f.iter().map(|&(y, a)| json!([y, a])).collect::<Vec<_>>()).collect::<Vec<_>>());
        let mut params = self.params().clone();
        let data = match self {
            Witness::AFamily(a) => json!(a.sets),
            Witness::Lp(l) => {
                params.p = Some(l.p);
                sparse(&l.xi)
            }
            Witness::Tail(tw) => {
                params.p = Some(tw.p);
                params.s = Some(tw.s);
                params.delta = Some(tw.delta);
                json!({"zeta": sparse(&tw.zeta), "delta_prime": tw.delta_prime})
            }
            Witness::Partition(pw) => json!({"cover": pw.cover, "phi": pw.phi}),
            Witness::Vector(v) => json!(v.coords),
            Witness::Kernel(kw) => {
                let n = kw.k.nrows();
                json!((0..n).map(|i| (0..n).map(|j| kw.k[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>())
            }
        };
        WitnessJson {
            schema: crate::SCHEMA.into(),
            form: self.form(),
            params,
            data,
        }
    }

    pub fn from_json_value(j: WitnessJson) -> Result<Self> {
        crate::io::check_schema(&j.schema, "$.schema")?;
        let data = j.data;
        let params = j.params;
        let de = |path: &str, e: serde_json::Error| Error::schema(path, e.to_string());
        let sparse = |v: Value, path: &str| -> Result<Vec<Vec<(usize, f64)>>> {
            serde_json::from_value(v).map_err(|e| de(path, e))
        };
        Ok(match j.form {
            Form::AFamily => {
                let sets = serde_json::from_value(data).map_err(|e| de("$.data", e))?;
                Witness::AFamily(AFamily::new(sets, params).map_err(|e| Error::schema("$.data", e.to_string()))?)
            }
            Form::Lp => {
                let p = params.p.unwrap_or(1.0);
                Witness::Lp(LpWitness::new(p, sparse(data, "$.data")?, params).map_err(|e| Error::schema("$.params.p", e.to_string()))?)
            }
            Form::Tail => {
                let zeta = sparse(data.get("zeta").cloned().unwrap_or(Value::Null), "$.data.zeta")?;
                let delta_prime = data.get("delta_prime").and_then(Value::as_f64);
                let (p, s, delta) = match (params.p, params.s, params.delta) {
                    (Some(p), Some(s), Some(d)) => (p, s, d),
                    _ => return Err(Error::schema("$.params", "tail witness needs p, S and delta")),
                };
                Witness::Tail(TailWitness {
                    p,
                    zeta: zeta.into_iter().map(sparse_from).collect(),
                    s,
                    delta,
                    delta_prime,
                    params,
                })
            }
            Form::Partition => {
                let cover = serde_json::from_value(data.get("cover").cloned().unwrap_or(Value::Null)).map_err(|e| de("$.data.cover", e))?;
                let phi = serde_json::from_value(data.get("phi").cloned().unwrap_or(Value::Null)).map_err(|e| de("$.data.phi", e))?;
                Witness::Partition(PartitionWitness::new(cover, phi, params).map_err(|e| Error::schema("$.data", e.to_string()))?)
            }
            Form::Vector => Witness::Vector(VectorWitness {
                coords: serde_json::from_value(data).map_err(|e| de("$.data", e))?,
                params,
            }),
            Form::Kernel => {
                let rows: Vec<Vec<f64>> = serde_json::from_value(data).map_err(|e| de("$.data", e))?;
                let n = rows.len();
                if let Some(i) = rows.iter().position(|r| r.len() != n) {
                    return Err(Error::schema(format!("$.data[{i}]"), "kernel matrix is not square"));
                }
                Witness::Kernel(KernelWitness {
                    k: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
                    params,
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::gen;

    #[test]
    fn dirac_witness_on_two_points_has_variation_two() {
        let s = gen::path(2);
        let w = Witness::Lp(LpWitness::new(1.0, vec![vec![(0, 1.0)], vec![(1, 1.0)]], Params::default()).unwrap());
        let r = measure_witness(&w, &s, 1.0).unwrap();
        assert_eq!(r.eps_measured, Some(2.0));
        assert_eq!(r.s_measured, 0.0);
    }

    #[test]
    fn identical_sets_have_zero_ratio() {
        let s = gen::path(3);
        let a = AFamily::new(vec![vec![(0, 1), (1, 1)]; 3], Params::default()).unwrap();
        let r = measure_witness(&Witness::AFamily(a), &s, 2.0).unwrap();
        assert_eq!(r.eps_measured, Some(0.0));
    }

    #[test]
    fn uniform_over_whole_space() {
        let s = gen::cycle(4);
        let w = LpWitness::uniform_balls(&s, s.diameter(), 1.0).unwrap();
        let r = measure_witness(&Witness::Lp(w), &s, 1.0).unwrap();
        assert_eq!(r.eps_measured, Some(0.0));
        assert_eq!(r.s_measured, s.diameter());
        assert!(r.norm_deviation < 1e-15);
    }

    #[test]
    fn mismatch_is_reported() {
        let s = gen::path(3);
        let w = Witness::Lp(LpWitness::new(1.0, vec![vec![(0, 1.0)]], Params::default()).unwrap());
        assert!(matches!(measure_witness(&w, &s, 1.0), Err(Error::PointMismatch(_))));
        let w = Witness::Lp(LpWitness::new(1.0, vec![vec![(5, 1.0)]; 3], Params::default()).unwrap());
        assert!(matches!(measure_witness(&w, &s, 1.0), Err(Error::PointMismatch(_))));
    }

    #[test]
    fn ingestion_takes_absolute_values() {
        let w = LpWitness::new(2.0, vec![vec![(1, -0.6), (0, 0.8)]], Params::default()).unwrap();
        assert_eq!(w.xi[0], vec![(0, 0.8), (1, 0.6)]);
    }

    #[test]
    fn lp_distance_merges_supports() {
        let a = vec![(0, 0.5), (2, 0.5)];
        let b = vec![(1, 0.5), (2, 0.5)];
        assert_eq!(lp_distance(&a, &b, 1.0), 1.0);
        assert!((lp_distance(&a, &b, 2.0) - 0.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_all_forms() {
        let s = gen::path(3);
        let lp = LpWitness::uniform_balls(&s, 1.0, 2.0).unwrap();
        let forms = vec![
            Witness::Lp(lp.clone()),
            Witness::AFamily(AFamily::new(vec![vec![(0, 1)], vec![(1, 1), (1, 2)], vec![(2, 1)]], Params::default()).unwrap()),
            Witness::Partition(PartitionWitness::trivial(3)),
            Witness::Vector(VectorWitness {
                coords: vec![vec![1.0, 0.0]; 3],
                params: Params::default(),
            }),
            Witness::Kernel(KernelWitness {
                k: DMatrix::identity(3, 3),
                params: Params::default(),
            }),
            Witness::Tail(TailWitness {
                p: 2.0,
                zeta: lp.xi.clone(),
                s: 1.0,
                delta: 0.5,
                delta_prime: Some(0.25),
                params: Params { p: Some(2.0), s: Some(1.0), delta: Some(0.5), ..Params::default() },
            }),
        ];
        for w in forms {
            let text = crate::io::to_json(&w.to_json_value());
            let back = Witness::from_json_value(crate::io::from_json(&text).unwrap()).unwrap();
            assert_eq!(back.form(), w.form());
            assert_eq!(crate::io::to_json(&back.to_json_value()), text);
        }
    }
}
