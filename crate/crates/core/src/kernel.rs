//! Positive- and negative-type kernels, their embeddings and transforms, ℓᵖ
//! tools (negative-type ℓᵖ kernels, Mazur maps) and the sequence embeddings
//! built from witness schedules.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::{self, CompressionProfile, FiniteMetricSpace};
use crate::witness::{self, LpWitness};

/// Eigenvalues above `-PSD_TOL·max|k|` are accepted as nonnegative.
pub const PSD_TOL: f64 = 1e-9;
const SYM_TOL: f64 = 1e-9;

/// Symmetric real kernel on the points of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub matrix: DMatrix<f64>,
    /// Propagation against a space; `None` is infinite or unknown.
    pub propagation: Option<f64>,
    /// Constant diagonal equal to 1 or to 0.
    pub normalized: bool,
}

fn diag_is(m: &DMatrix<f64>, v: f64) -> bool {
    let t = SYM_TOL * linalg::max_abs(m).max(1.0);
    (0..m.nrows()).all(|i| (m[(i, i)] - v).abs() <= t)
}

impl Kernel {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !linalg::is_symmetric(&matrix, SYM_TOL) {
            return Err(Error::InvalidInput("kernel matrix is not symmetric".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("kernel has non-finite entries".into()));
        }
        let normalized = diag_is(&matrix, 1.0) || diag_is(&matrix, 0.0);
        Ok(Self {
            matrix,
            propagation: None,
            normalized,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("kernel matrix is not square".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, f))
    }

    /// Records the propagation of the kernel measured against `space`.
    pub fn with_propagation(mut self, space: &FiniteMetricSpace) -> Result<Self> {
        if space.len() != self.len() {
            return Err(Error::PointMismatch(format!("kernel on {} points, space has {}", self.len(), space.len())));
        }
        self.propagation = Some(witness::kernel_propagation(&self.matrix, space));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    pub fn scale(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    pub fn check_invariants(&self) -> Result<()> {
        if !linalg::is_symmetric(&self.matrix, SYM_TOL) {
            return Err(Error::Invariant("kernel is not symmetric".into()));
        }
        let norm = diag_is(&self.matrix, 1.0) || diag_is(&self.matrix, 0.0);
        if norm != self.normalized {
            return Err(Error::Invariant(format!("normalized flag {} disagrees with the diagonal", self.normalized)));
        }
        Ok(())
    }

    pub fn to_json_value(&self) -> KernelJson {
        let n = self.len();
        KernelJson {
            schema: crate::SCHEMA.into(),
            matrix: (0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)]).collect()).collect(),
            propagation: self.propagation,
            normalized: self.normalized,
        }
    }

    pub fn from_json_value(j: KernelJson) -> Result<Self> {
        crate::io::check_schema(&j.schema, "$.schema")?;
        let n = j.matrix.len();
        if let Some(i) = j.matrix.iter().position(|r| r.len() != n) {
            return Err(Error::schema(format!("$.matrix[{i}]"), format!("expected {n} entries")));
        }
        let mut k = Self::from_rows(&j.matrix).map_err(|e| Error::schema("$.matrix", e.to_string()))?;
        if k.normalized != j.normalized {
            return Err(Error::schema("$.normalized", "flag disagrees with the diagonal"));
        }
        k.propagation = j.propagation;
        Ok(k)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelJson {
    pub schema: String,
    pub matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagation: Option<f64>,
    pub normalized: bool,
}

/// Extremal quadratic-form values of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelClass {
    pub positive_type: bool,
    pub min_eigenvalue: f64,
    pub negative_type: bool,
    /// Largest eigenvalue of the form restricted to `Σλ = 0`.
    pub max_mean_zero_form: f64,
}

pub fn classify_kernel(k: &Kernel, tol: f64) -> Result<KernelClass> {
    if !linalg::is_symmetric(&k.matrix, SYM_TOL) {
        return Err(Error::InvalidInput("kernel matrix is not symmetric".into()));
    }
    let n = k.len();
    let scale = k.scale();
    let min_eigenvalue = linalg::sym_eigen(&k.matrix).values.first().copied().unwrap_or(0.0);
    let max_mean_zero_form = if n < 2 {
        0.0
    } else {
        let b = linalg::mean_zero_basis(n);
        let c = b.transpose() * &k.matrix * &b;
        linalg::sym_eigen(&c).values.last().copied().unwrap_or(0.0)
    };
    Ok(KernelClass {
        positive_type: min_eigenvalue >= -tol * scale,
        min_eigenvalue,
        negative_type: max_mean_zero_form <= tol * scale,
        max_mean_zero_form,
    })
}

/// Classifies independent kernels in parallel.
pub fn classify_many(ks: &[Kernel], tol: f64) -> Vec<Result<KernelClass>> {
    ks.par_iter().map(|k| classify_kernel(k, tol)).collect()
}

/// Per-point Euclidean coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: Vec<Vec<f64>>,
    /// Total magnitude of negative eigenvalues clipped during factorization.
    pub clipped: f64,
}

impl Embedding {
    pub fn new(coords: Vec<Vec<f64>>) -> Result<Self> {
        let d = coords.first().map_or(0, Vec::len);
        if coords.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidInput("coordinate rows have different lengths".into()));
        }
        Ok(Self { coords, clipped: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn inner(&self, x: usize, y: usize) -> f64 {
        self.coords[x].iter().zip(&self.coords[y]).map(|(a, b)| a * b).sum()
    }

    pub fn sq_distance(&self, x: usize, y: usize) -> f64 {
        self.coords[x].iter().zip(&self.coords[y]).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.sq_distance(x, y).sqrt()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.inner(i, j))
    }

    pub fn to_csv(&self, ids: &[String]) -> String {
        use std::fmt::Write;
        let mut s = String::from("id");
        for j in 0..self.dim() {
            let _ = write!(s, ",c{j}");
        }
        s.push('\n');
        for (id, row) in ids.iter().zip(&self.coords) {
            s.push_str(id);
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn into_map(self, space: FiniteMetricSpace) -> Result<metric::PointMap> {
        metric::PointMap::into_euclidean(space, self.coords)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedMode {
    Positive,
    Negative,
}

/// Rows of `V·diag(√λ⁺)`, so that the Gram of the rows is `G` with negative
/// eigenvalues clipped.
fn factorize(g: &DMatrix<f64>) -> Embedding {
    let eig = linalg::sym_eigen(g);
    let n = g.nrows();
    let keep: Vec<usize> = (0..n).filter(|&j| eig.values[j] > 0.0).collect();
    let clipped = eig.values.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    let coords = (0..n)
        .map(|x| keep.iter().map(|&j| eig.vectors[(x, j)] * eig.values[j].sqrt()).collect())
        .collect();
    Embedding { coords, clipped }
}

pub fn embed_from_kernel(k: &Kernel, mode: EmbedMode, tol: f64) -> Result<Embedding> {
    let class = classify_kernel(k, tol)?;
    match mode {
        EmbedMode::Positive => {
            if !class.positive_type {
                return Err(Error::Classification(format!("min eigenvalue {} below tolerance", class.min_eigenvalue)));
            }
            Ok(factorize(&k.matrix))
        }
        EmbedMode::Negative => {
            if !class.negative_type {
                return Err(Error::Classification(format!(
                    "mean-zero form reaches {} above tolerance",
                    class.max_mean_zero_form
                )));
            }
            if !diag_is(&k.matrix, 0.0) {
                return Err(Error::Precondition("negative-type embedding needs k(x,x) = 0".into()));
            }
            let n = k.len();
            let g = DMatrix::from_fn(n, n, |x, y| 0.5 * (k.get(x, 0) + k.get(0, y) - k.get(x, y)));
            Ok(factorize(&g))
        }
    }
}

pub fn schur_product(a: &Kernel, b: &Kernel, tol: f64) -> Result<Kernel> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput("kernels have different sizes".into()));
    }
    for k in [a, b] {
        if !classify_kernel(k, tol)?.positive_type {
            return Err(Error::Classification("Schur product needs positive-type factors".into()));
        }
    }
    Kernel::new(a.matrix.component_mul(&b.matrix))
}

/// `e^{−tk}` for a negative-type `k`.
pub fn exp_transform(k: &Kernel, t: f64, tol: f64) -> Result<Kernel> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("t = {t} must be nonnegative")));
    }
    if !classify_kernel(k, tol)?.negative_type {
        return Err(Error::Classification("exponential transform needs a negative-type kernel".into()));
    }
    Kernel::new(k.matrix.map(|v| (-t * v).exp()))
}

/// `k^α` entrywise for a nonnegative negative-type `k` and `0 < α < 1`.
pub fn power_transform(k: &Kernel, alpha: f64, tol: f64) -> Result<Kernel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("α = {alpha} outside (0, 1)")));
    }
    if k.matrix.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("power transform needs k ≥ 0 entrywise".into()));
    }
    if !classify_kernel(k, tol)?.negative_type {
        return Err(Error::Classification("power transform needs a negative-type kernel".into()));
    }
    Kernel::new(k.matrix.map(|v| v.powf(alpha)))
}

/// `k(x,y) = e^{−t‖f(x)−f(y)‖²}`.
pub fn gaussian_kernel(f: &Embedding, t: f64) -> Result<Kernel> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("t = {t} must be positive")));
    }
    let n = f.len();
    Kernel::from_fn(n, |x, y| if x == y { 1.0 } else { (-t * f.sq_distance(x, y)).exp() })
}

/// Gaussian parameter `ε/(1+ρ₂(R)²)` giving `|1−k| ≤ ε` at scale `R`.
pub fn gaussian_t0(eps: f64, rho2_r: f64) -> f64 {
    eps / (1.0 + rho2_r * rho2_r)
}

/// Truncated sum `Σ_n (1 − k_n)` with schedule diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CeSum {
    pub kernel: Kernel,
    /// Number of summed terms (truncation index).
    pub terms: usize,
    /// `|1 − k_n| < 2^{−n}` whenever `d < n`, for every listed `n`.
    pub schedule_ok: Option<bool>,
    /// `|k(x,y)| ≤ 2d(x,y)+1` for all pairs; checked only on schedule.
    pub growth_ok: Option<bool>,
}

pub fn ce_sum(kernels: &[Kernel], space: Option<&FiniteMetricSpace>, tol: f64) -> Result<CeSum> {
    let Some(first) = kernels.first() else {
        return Err(Error::InvalidInput("empty kernel list".into()));
    };
    let n = first.len();
    let mut sum = DMatrix::zeros(n, n);
    for (i, k) in kernels.iter().enumerate() {
        if k.len() != n {
            return Err(Error::InvalidInput(format!("kernel {i} has a different size")));
        }
        if !diag_is(&k.matrix, 1.0) {
            return Err(Error::Precondition(format!("kernel {i} is not normalized")));
        }
        if !classify_kernel(k, tol)?.positive_type {
            return Err(Error::Classification(format!("kernel {i} is not of positive type")));
        }
        sum += k.matrix.map(|v| 1.0 - v);
    }
    let kernel = Kernel::new(sum)?;
    let (mut schedule_ok, mut growth_ok) = (None, None);
    if let Some(space) = space {
        if space.len() != n {
            return Err(Error::PointMismatch("space and kernels differ in size".into()));
        }
        let t = space.tol();
        let on = kernels.iter().enumerate().all(|(i, k)| {
            let scale = (i + 1) as f64;
            let bound = 0.5f64.powi(i as i32 + 1);
            (0..n).all(|x| (0..n).all(|y| space.d(x, y) >= scale - t || (1.0 - k.get(x, y)).abs() < bound))
        });
        schedule_ok = Some(on);
        if on {
            growth_ok = Some((0..n).all(|x| (0..n).all(|y| kernel.get(x, y).abs() <= 2.0 * space.d(x, y) + 1.0 + 1e-12)));
        }
    }
    Ok(CeSum {
        kernel,
        terms: kernels.len(),
        schedule_ok,
        growth_ok,
    })
}

/// A kernel transform with its inputs.
#[derive(Debug, Clone)]
pub enum Transform {
    Schur(Kernel, Kernel),
    Exp(Kernel, f64),
    Power(Kernel, f64),
    Gaussian(Embedding, f64),
    CeSum(Vec<Kernel>),
}

pub fn kernel_transform(tr: &Transform, tol: f64) -> Result<Kernel> {
    match tr {
        Transform::Schur(a, b) => schur_product(a, b, tol),
        Transform::Exp(k, t) => exp_transform(k, *t, tol),
        Transform::Power(k, a) => power_transform(k, *a, tol),
        Transform::Gaussian(f, t) => gaussian_kernel(f, *t),
        Transform::CeSum(ks) => Ok(ce_sum(ks, None, tol)?.kernel),
    }
}

/// `k(x,y) = ‖x−y‖_p^p` on a coordinate table.
pub fn lp_negtype_kernel(points: &[Vec<f64>], p: f64) -> Result<Kernel> {
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::InvalidInput(format!("p = {p} outside (0, 2]")));
    }
    let d = points.first().map_or(0, Vec::len);
    if points.iter().any(|c| c.len() != d) {
        return Err(Error::InvalidInput("coordinate rows have different lengths".into()));
    }
    Kernel::from_fn(points.len(), |x, y| {
        points[x].iter().zip(&points[y]).map(|(a, b)| (a - b).abs().powf(p)).sum()
    })
}

/// `M_{p,q}(x)_n = |x_n|^{p/q} sign(x_n)` on the unit sphere of ℓᵖ.
pub fn mazur_map(x: &[f64], p: f64, q: f64) -> Result<Vec<f64>> {
    if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
        return Err(Error::InvalidInput(format!("exponents p = {p}, q = {q} must be positive and finite")));
    }
    let norm = x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("input has ℓ^{p} norm {norm}, not 1")));
    }
    let e = p / q;
    Ok(x.iter().map(|&v| if v == 0.0 { 0.0 } else { v.signum() * v.abs().powf(e) }).collect())
}

/// Concatenated block map `f(x) = ⊕_k (ξ^k_x − ξ^k_{x₀})` with its measured
/// profile and the two-sided bounds it satisfies.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEmbedding {
    pub p: f64,
    /// Dense block coordinates; block `k` occupies `[k·n, (k+1)·n)`.
    pub coords: Vec<Vec<f64>>,
    /// Separation thresholds `S_k`: pairs with `d > S_k` are separated at scale `k`.
    pub thresholds: Vec<f64>,
    /// Separation constant `δ` (`√2` for the Hilbert-space construction).
    pub delta: f64,
    /// Hilbert-space construction, with upper bound `2d+1`.
    pub hilbert: bool,
    pub profile: CompressionProfile,
}

impl SequenceEmbedding {
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.coords[x]
            .iter()
            .zip(&self.coords[y])
            .map(|(a, b)| (a - b).abs().powf(self.p))
            .sum::<f64>()
            .powf(1.0 / self.p)
    }

    /// `Q_t = #{k : S_k < t}`.
    pub fn q(&self, t: f64) -> usize {
        self.thresholds.iter().filter(|&&s| s < t - 1e-9 * t.abs().max(1.0)).count()
    }

    pub fn lower_bound(&self, d: f64) -> f64 {
        self.delta * (self.q(d) as f64).powf(1.0 / self.p)
    }

    pub fn upper_bound(&self, d: f64) -> f64 {
        if self.hilbert {
            2.0 * d + 1.0
        } else {
            2.0 * (d + 1.0).powf(1.0 / self.p)
        }
    }
}

/// Checks `‖ξ^k_x − ξ^k_y‖_p < 2^{−k}` whenever `d(x,y) < k` (scales from 1).
fn check_schedule(space: &FiniteMetricSpace, seq: &[LpWitness], p: f64) -> Result<()> {
    let n = space.len();
    let t = space.tol();
    for (i, w) in seq.iter().enumerate() {
        if w.xi.len() != n {
            return Err(Error::PointMismatch(format!("witness {} has {} points", i + 1, w.xi.len())));
        }
        if (w.p - p).abs() > 0.0 {
            return Err(Error::Schedule(format!("witness {} has exponent {}, expected {p}", i + 1, w.p)));
        }
        if let Some((x, v)) = w.xi.iter().enumerate().find(|(_, v)| (witness::lp_norm(v, p) - 1.0).abs() > witness::NORM_TOL) {
            return Err(Error::Schedule(format!("witness {}: ξ_{x} has norm {}", i + 1, witness::lp_norm(v, p))));
        }
        if let Some(&(y, _)) = w.xi.iter().flatten().find(|(y, _)| *y >= n) {
            return Err(Error::PointMismatch(format!("witness {} references point {y}", i + 1)));
        }
        let scale = (i + 1) as f64;
        let bound = 0.5f64.powi(i as i32 + 1);
        for x in 0..n {
            for y in (x + 1)..n {
                if space.d(x, y) < scale - t {
                    let v = witness::lp_distance(&w.xi[x], &w.xi[y], p);
                    if v >= bound {
                        return Err(Error::Schedule(format!(
                            "scale {}: ‖ξ_{x} − ξ_{y}‖ = {v} at distance {} is not below {bound}",
                            i + 1,
                            space.d(x, y)
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

fn block_coords(n: usize, seq: &[LpWitness]) -> Vec<Vec<f64>> {
    let mut coords = vec![vec![0.0; n * seq.len()]; n];
    for (k, w) in seq.iter().enumerate() {
        let off = k * n;
        for (x, row) in coords.iter_mut().enumerate() {
            for &(y, v) in &w.xi[x] {
                row[off + y] += v;
            }
            for &(y, v) in &w.xi[0] {
                row[off + y] -= v;
            }
        }
    }
    coords
}

fn finish(space: &FiniteMetricSpace, p: f64, delta: f64, hilbert: bool, coords: Vec<Vec<f64>>, thresholds: Vec<f64>) -> Result<SequenceEmbedding> {
    let mut emb = SequenceEmbedding {
        p,
        coords,
        thresholds,
        delta,
        hilbert,
        profile: CompressionProfile {
            bins: vec![],
            rho1: vec![],
            rho2: vec![],
            q_table: vec![],
        },
    };
    let mut profile = metric::profile_by(space, None, |x, y| emb.distance(x, y))?;
    profile.q_table = space.distance_values().into_iter().map(|t| (t, emb.q(t))).collect();
    emb.profile = profile;
    let n = space.len();
    for x in 0..n {
        for y in (x + 1)..n {
            let d = space.d(x, y);
            let v = emb.distance(x, y);
            let (lo, hi) = (emb.lower_bound(d), emb.upper_bound(d));
            if v < lo - 1e-9 || v > hi + 1e-9 {
                return Err(Error::Invariant(format!("pair ({x}, {y}): {v} outside [{lo}, {hi}]")));
            }
        }
    }
    Ok(emb)
}

/// Hilbert-space embedding from ℓ² witnesses: two-sided bounds
/// `√(2Q_d) ≤ ‖f(x)−f(y)‖ ≤ 2d+1`, with `S_k` the largest distance between
/// points whose scale-`k` supports overlap.
pub fn yu_embedding(space: &FiniteMetricSpace, seq: &[LpWitness]) -> Result<SequenceEmbedding> {
    if seq.is_empty() {
        return Err(Error::Schedule("empty witness sequence".into()));
    }
    check_schedule(space, seq, 2.0)?;
    let n = space.len();
    let thresholds = seq
        .iter()
        .map(|w| {
            let mut s: f64 = 0.0;
            for x in 0..n {
                for y in (x + 1)..n {
                    let overlap = w.xi[x].iter().any(|&(a, _)| w.xi[y].iter().any(|&(b, _)| a == b));
                    if overlap {
                        s = s.max(space.d(x, y));
                    }
                }
            }
            s
        })
        .collect();
    finish(space, 2.0, 2f64.sqrt(), true, block_coords(n, seq), thresholds)
}

/// ℓᵖ embedding from witnesses separated by `δ`: two-sided bounds
/// `δ·Q_d^{1/p} ≤ ‖f(x)−f(y)‖_p ≤ 2(d+1)^{1/p}`, with `S_k` the largest
/// distance between pairs not separated at scale `k`.
pub fn lp_sequence_embedding(space: &FiniteMetricSpace, seq: &[LpWitness], delta: f64) -> Result<SequenceEmbedding> {
    let Some(first) = seq.first() else {
        return Err(Error::Schedule("empty witness sequence".into()));
    };
    let p = first.p;
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("p = {p} must be at least 1")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("δ = {delta} must be positive")));
    }
    check_schedule(space, seq, p)?;
    let n = space.len();
    let thresholds = seq
        .iter()
        .map(|w| {
            let mut s: f64 = 0.0;
            for x in 0..n {
                for y in (x + 1)..n {
                    if witness::lp_distance(&w.xi[x], &w.xi[y], p) < delta {
                        s = s.max(space.d(x, y));
                    }
                }
            }
            s
        })
        .collect();
    finish(space, p, delta, false, block_coords(n, seq), thresholds)
}

/// Verified facts about the convolution operator of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorReport {
    pub propagation: f64,
    /// Largest ball size at radius `propagation`.
    pub n_bound: usize,
    pub norm: f64,
    /// `N·max|k|`.
    pub norm_bound: f64,
    pub operator_psd: bool,
    pub positive_type: bool,
}

/// The matrix of `T_k` with its norm and positivity checks. `n_table`
/// supplies `(r, N_r)` pairs; without it ball sizes are computed.
pub fn kernel_operator_bridge(
    k: &Kernel,
    space: &FiniteMetricSpace,
    n_table: Option<&[(f64, usize)]>,
    tol: f64,
) -> Result<(DMatrix<f64>, OperatorReport)> {
    if k.len() != space.len() {
        return Err(Error::PointMismatch("kernel and space differ in size".into()));
    }
    let s = match k.propagation {
        Some(s) => s,
        None if n_table.is_some() => f64::INFINITY,
        None => return Err(Error::Precondition("infinite propagation and no N bound".into())),
    };
    let n_bound = match n_table {
        Some(table) if s.is_finite() => table
            .iter()
            .filter(|&&(r, _)| r >= s - space.tol())
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|&(_, m)| m)
            .ok_or_else(|| Error::Precondition(format!("N table has no radius ≥ {s}")))?,
        Some(table) => table.iter().map(|&(_, m)| m).max().unwrap_or(0),
        None => metric::bounded_geometry_stats(space, &[s])?[0].1,
    };
    let t = k.matrix.clone();
    let norm = linalg::largest_singular_value(&t);
    let min_op = linalg::sym_eigen(&t).values.first().copied().unwrap_or(0.0);
    let scale = k.scale();
    let report = OperatorReport {
        propagation: s,
        n_bound,
        norm,
        norm_bound: n_bound as f64 * scale,
        operator_psd: min_op >= -tol * scale,
        positive_type: classify_kernel(k, tol)?.positive_type,
    };
    if norm > report.norm_bound * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::Invariant(format!("‖T_k‖ = {norm} exceeds {}", report.norm_bound)));
    }
    Ok((t, report))
}
