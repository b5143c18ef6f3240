//! Laplacian spectra of regular graphs, vertex expansion, the Poincaré
//! inequality and its concentration consequence, and per-quotient expansion
//! from generator-wise displacement bounds.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::FiniteGroup;
use crate::linalg;
use crate::metric;

/// Connected `D`-regular simple graph, optionally with a generator colouring.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularGraph {
    lists: Vec<Vec<usize>>,
    degree: usize,
    /// `colors[j][x]` is the neighbour of `x` along generator `j`.
    colors: Option<Vec<Vec<usize>>>,
}

impl RegularGraph {
    pub fn new(adjacency: &[Vec<u8>]) -> Result<Self> {
        let lists = metric::adjacency_lists(adjacency)?;
        Self::from_lists(lists)
    }

    pub fn from_lists(mut lists: Vec<Vec<usize>>) -> Result<Self> {
        let n = lists.len();
        for (v, l) in lists.iter_mut().enumerate() {
            l.sort_unstable();
            l.dedup();
            if l.iter().any(|&w| w >= n || w == v) {
                return Err(Error::InvalidInput(format!("bad neighbour list at vertex {v}")));
            }
        }
        for v in 0..n {
            if let Some(&w) = lists[v].iter().find(|&&w| lists[w].binary_search(&v).is_err()) {
                return Err(Error::InvalidInput(format!("edge {v}-{w} is not symmetric")));
            }
        }
        let degree = lists.first().map_or(0, Vec::len);
        if let Some(v) = lists.iter().position(|l| l.len() != degree) {
            return Err(Error::InvalidInput(format!("vertex {v} has degree {}, expected {degree}", lists[v].len())));
        }
        let hops = metric::bfs_all_pairs(&lists);
        if let Some(j) = hops.first().and_then(|row| row.iter().position(Option::is_none)) {
            return Err(Error::Disconnected(0, j));
        }
        Ok(Self {
            lists,
            degree,
            colors: None,
        })
    }

    /// Right Cayley graph `x ~ x·s`, coloured by generator.
    pub fn cayley(g: &FiniteGroup) -> Result<Self> {
        let perms = g.right_generator_perms();
        let n = g.order();
        let lists = (0..n).map(|x| perms.iter().map(|p| p[x]).collect()).collect();
        let mut graph = Self::from_lists(lists)?;
        if graph.degree != perms.len() {
            return Err(Error::Group("generators produce multiple edges".into()));
        }
        graph.colors = Some(perms);
        Ok(graph)
    }

    pub fn with_colors(mut self, colors: Vec<Vec<usize>>) -> Result<Self> {
        let n = self.len();
        for (j, p) in colors.iter().enumerate() {
            if p.len() != n || (0..n).any(|x| self.lists[x].binary_search(&p[x]).is_err()) {
                return Err(Error::InvalidInput(format!("colour {j} does not follow graph edges")));
            }
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    pub fn colors(&self) -> Option<&[Vec<usize>]> {
        self.colors.as_deref()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .flat_map(|v| self.lists[v].iter().filter(move |&&w| w > v).map(move |&w| (v, w)))
            .collect()
    }

    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        metric::gen::lists_to_matrix(&self.lists)
    }

    /// `Δ = D·I − A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut l = DMatrix::identity(n, n) * self.degree as f64;
        for (v, ws) in self.lists.iter().enumerate() {
            for &w in ws {
                l[(v, w)] -= 1.0;
            }
        }
        l
    }

    pub fn to_json_value(&self) -> GraphJson {
        let colors = self.colors.as_ref().map(|perms| {
            let n = self.len();
            let mut c = vec![vec![None; n]; n];
            for (j, p) in perms.iter().enumerate() {
                for x in 0..n {
                    c[x][p[x]] = Some(j);
                }
            }
            c
        });
        GraphJson {
            schema: crate::SCHEMA.into(),
            adjacency: self.adjacency(),
            degree: self.degree,
            colors,
        }
    }

    pub fn from_json_value(j: GraphJson) -> Result<Self> {
        crate::io::check_schema(&j.schema, "$.schema")?;
        let g = Self::new(&j.adjacency).map_err(|e| Error::schema("$.adjacency", e.to_string()))?;
        if g.degree != j.degree {
            return Err(Error::schema("$.degree", format!("graph has degree {}", g.degree)));
        }
        let Some(c) = j.colors else { return Ok(g) };
        let n = g.len();
        if c.len() != n {
            return Err(Error::schema("$.colors", format!("expected {n} rows")));
        }
        let k = c.iter().flatten().flatten().map(|&j| j + 1).max().unwrap_or(0);
        let mut perms = vec![vec![usize::MAX; n]; k];
        for (x, row) in c.iter().enumerate() {
            for (y, col) in row.iter().enumerate() {
                if let Some(j) = *col {
                    if perms[j][x] != usize::MAX {
                        return Err(Error::schema(format!("$.colors[{x}][{y}]"), format!("colour {j} used twice at vertex {x}")));
                    }
                    perms[j][x] = y;
                }
            }
        }
        if perms.iter().flatten().any(|&y| y == usize::MAX) {
            return Err(Error::schema("$.colors", "every colour must leave every vertex"));
        }
        g.with_colors(perms).map_err(|e| Error::schema("$.colors", e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphJson {
    pub schema: String,
    pub adjacency: Vec<Vec<u8>>,
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<Vec<Vec<Option<usize>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Laplacian eigenvalues, ascending.
    pub spectrum: Vec<f64>,
    pub lambda: f64,
    pub eigenvector: Vec<f64>,
}

impl SpectralReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue\n");
        for (i, v) in self.spectrum.iter().enumerate() {
            s.push_str(&format!("{i},{v}\n"));
        }
        s
    }
}

pub fn laplacian_gap(g: &RegularGraph) -> Result<SpectralReport> {
    if g.len() < 2 {
        return Err(Error::InvalidInput("spectral gap needs at least two vertices".into()));
    }
    let eig = linalg::sym_eigen(&g.laplacian());
    let lambda = eig.values[1];
    if lambda <= 1e-9 * g.degree as f64 {
        return Err(Error::Disconnected(0, 0));
    }
    Ok(SpectralReport {
        spectrum: eig.values.clone(),
        lambda,
        eigenvector: eig.vectors.column(1).iter().copied().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `Σ(f−M)² ≤ (1/λ)·Σ_E (f(v)−f(w))²`.
pub fn poincare_check(g: &RegularGraph, spec: &SpectralReport, f: &[f64]) -> Result<PoincareCheck> {
    if f.len() != g.len() {
        return Err(Error::PointMismatch(format!("function on {} vertices, graph has {}", f.len(), g.len())));
    }
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let lhs = f.iter().map(|v| (v - mean) * (v - mean)).sum();
    let rhs = g.edges().iter().map(|&(v, w)| (f[v] - f[w]).powi(2)).sum::<f64>() / spec.lambda;
    Ok(PoincareCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ExpansionMode {
    Exact,
    Sampled { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub c: f64,
    /// Vertices of the minimizing subset.
    pub subset: Vec<usize>,
    pub mode: ExpansionMode,
    pub subsets_examined: u64,
}

/// Largest `n` for exhaustive subset enumeration.
pub const EXACT_SUBSET_LIMIT: usize = 20;

fn neighbour_masks(lists: &[Vec<usize>]) -> Vec<u64> {
    lists.iter().map(|l| l.iter().fold(0u64, |m, &w| m | 1 << w)).collect()
}

/// Outer vertex boundary size of `mask`.
fn boundary(nb: &[u64], mask: u64) -> u32 {
    let mut reach = 0u64;
    let mut m = mask;
    while m != 0 {
        let v = m.trailing_zeros() as usize;
        reach |= nb[v];
        m &= m - 1;
    }
    (reach & !mask).count_ones()
}

fn ratio(n: usize, a: u32, b: u32) -> f64 {
    let a = f64::from(a);
    f64::from(b) / ((1.0 - a / n as f64) * a)
}

/// `min_A |∂A| / ((1−|A|/|V|)·|A|)` over nonempty proper subsets, with the
/// outer vertex boundary. Works on any simple graph given by neighbour lists.
pub fn expansion_constant(lists: &[Vec<usize>], mode: ExpansionMode) -> Result<ExpansionReport> {
    let n = lists.len();
    if n < 2 {
        return Err(Error::InvalidInput("expansion needs at least two vertices".into()));
    }
    match mode {
        ExpansionMode::Exact => {
            if n > EXACT_SUBSET_LIMIT {
                return Err(Error::Budget(format!("exact enumeration limited to {EXACT_SUBSET_LIMIT} vertices, got {n}")));
            }
            let nb = neighbour_masks(lists);
            let full = (1u64 << n) - 1;
            // min over a fixed order: ties keep the smallest mask
            let (c, mask) = (1..full)
                .into_par_iter()
                .map(|m| (ratio(n, m.count_ones(), boundary(&nb, m)), m))
                .reduce(|| (f64::INFINITY, u64::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
            Ok(ExpansionReport {
                c,
                subset: (0..n).filter(|&v| mask >> v & 1 == 1).collect(),
                mode,
                subsets_examined: full - 1,
            })
        }
        ExpansionMode::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidInput("sampled mode needs a positive sample count".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut best = (f64::INFINITY, Vec::new());
            let mut verts: Vec<usize> = (0..n).collect();
            for _ in 0..samples {
                let a = rng.gen_range(1..n);
                verts.shuffle(&mut rng);
                let mut inside = vec![false; n];
                for &v in &verts[..a] {
                    inside[v] = true;
                }
                let mut outer = vec![false; n];
                for &v in &verts[..a] {
                    for &w in &lists[v] {
                        outer[w] |= !inside[w];
                    }
                }
                let r = ratio(n, a as u32, outer.iter().filter(|&&b| b).count() as u32);
                if r < best.0 {
                    let mut s = verts[..a].to_vec();
                    s.sort_unstable();
                    best = (r, s);
                }
            }
            Ok(ExpansionReport {
                c: best.0,
                subset: best.1,
                mode,
                subsets_examined: samples as u64,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n: usize,
    /// Largest edge displacement found (must not exceed `c_edge`).
    pub max_edge: f64,
    /// Radius `√(2c²/λ)` around the centroid.
    pub radius: f64,
    pub inside: usize,
    /// `inside ≥ ⌈n/2⌉`.
    pub holds: bool,
    /// Count within the degree-aware radius `√(D·c²/λ)`, for which at least
    /// half the vertices always lie inside.
    pub inside_degree_radius: usize,
}

/// Counts vertices of an embedding within `√(2c²/λ)` of the centroid.
pub fn concentration_test(g: &RegularGraph, lambda: f64, coords: &[Vec<f64>], c_edge: f64) -> Result<ConcentrationReport> {
    let n = g.len();
    if coords.len() != n {
        return Err(Error::PointMismatch(format!("embedding has {} points, graph has {n}", coords.len())));
    }
    let dim = coords.first().map_or(0, Vec::len);
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let max_edge = g.edges().iter().map(|&(v, w)| sq(&coords[v], &coords[w]).sqrt()).fold(0.0, f64::max);
    if max_edge > c_edge * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("edge displacement {max_edge} exceeds c = {c_edge}")));
    }
    let centroid: Vec<f64> = (0..dim).map(|i| coords.iter().map(|c| c[i]).sum::<f64>() / n as f64).collect();
    let r2 = 2.0 * c_edge * c_edge / lambda;
    let rd2 = g.degree() as f64 * c_edge * c_edge / lambda;
    let norms: Vec<f64> = coords.iter().map(|c| sq(c, &centroid)).collect();
    let inside = norms.iter().filter(|&&v| v <= r2 * (1.0 + 1e-12)).count();
    Ok(ConcentrationReport {
        n,
        max_edge,
        radius: r2.sqrt(),
        inside,
        holds: inside >= n.div_ceil(2),
        inside_degree_radius: norms.iter().filter(|&&v| v <= rd2 * (1.0 + 1e-12)).count(),
    })
}

/// Per-generator displacement gap and the expansion inequality it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KazhdanReport {
    /// Certified lower bound on `min_f max_s ‖sf−f‖/‖f‖` over mean-zero `f`.
    pub eps: f64,
    /// Best value found by direct minimization (only for small graphs).
    pub upper: Option<f64>,
    /// `eps` and `upper` agree within `1e-6`.
    pub exact: bool,
    /// `√(2λ/|S|)`.
    pub spectral_bound: f64,
    pub expansion: ExpansionCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub subsets_checked: u64,
    /// All nonempty proper subsets were checked.
    pub exhaustive: bool,
    /// Subsets violating `|∂A| ≥ (ε²/2)(1−a/m)a`.
    pub violations: Vec<Vec<usize>>,
    /// `min_A |∂A| − (ε²/2)(1−a/m)a`.
    pub min_margin: f64,
}

/// Largest vertex count for the direct min-max optimization.
pub const KAZHDAN_OPT_LIMIT: usize = 12;
/// Largest vertex count for the exhaustive expansion check.
pub const KAZHDAN_SUBSET_LIMIT: usize = 16;

/// Checks that the colouring comes from a simply transitive action: for each
/// vertex `v` the colour-preserving map with `0 ↦ v` is a graph automorphism.
fn check_vertex_transitive(perms: &[Vec<usize>], n: usize) -> Result<()> {
    for (j, p) in perms.iter().enumerate() {
        let mut seen = vec![false; n];
        for &y in p {
            if y >= n || std::mem::replace(&mut seen[y], true) {
                return Err(Error::Precondition(format!("colour {j} is not a permutation")));
            }
        }
    }
    // BFS words from vertex 0
    let mut word: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut order = vec![0];
    let mut reached = vec![false; n];
    reached[0] = true;
    let mut i = 0;
    while i < order.len() {
        let u = order[i];
        for (j, p) in perms.iter().enumerate() {
            let w = p[u];
            if !reached[w] {
                reached[w] = true;
                word[w] = Some((u, j));
                order.push(w);
            }
        }
        i += 1;
    }
    if order.len() != n {
        return Err(Error::Precondition("coloured graph is not connected".into()));
    }
    for v in 0..n {
        let mut phi = vec![usize::MAX; n];
        phi[0] = v;
        for &u in &order[1..] {
            let (prev, j) = word[u].expect("reached vertex has a word");
            phi[u] = perms[j][phi[prev]];
        }
        let ok = (0..n).all(|u| perms.iter().all(|p| p[phi[u]] == phi[p[u]]));
        if !ok {
            return Err(Error::Precondition(format!("no colour-preserving automorphism sends 0 to {v}: graph is not vertex-transitive")));
        }
    }
    Ok(())
}

/// Forms `q_s(f) = Σ_x (f(xs) − f(x))²` restricted to mean-zero functions,
/// with duplicates removed.
fn displacement_forms(perms: &[Vec<usize>], n: usize) -> Vec<DMatrix<f64>> {
    let b = linalg::mean_zero_basis(n);
    let mut out: Vec<DMatrix<f64>> = Vec::new();
    for p in perms {
        let mut d = DMatrix::<f64>::zeros(n, n);
        for x in 0..n {
            d[(x, p[x])] += 1.0;
            d[(x, x)] -= 1.0;
        }
        let q = d.transpose() * d;
        let c = b.transpose() * q * &b;
        if !out.iter().any(|o| linalg::max_abs(&(o - &c)) < 1e-12) {
            out.push(c);
        }
    }
    out
}

fn combine(forms: &[DMatrix<f64>], mu: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(forms[0].nrows(), forms[0].ncols());
    for (f, &w) in forms.iter().zip(mu) {
        m += f * w;
    }
    m
}

fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        acc += x;
        let t = (acc - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// `max_μ λ_min(Σ μ_s C_s)` over the simplex: every value is a lower bound
/// on the min-max. Returns the value and the maximizing weights.
fn dual_bound(forms: &[DMatrix<f64>]) -> (f64, Vec<f64>) {
    let m = forms.len();
    let h = |mu: &[f64]| {
        let e = linalg::sym_eigen(&combine(forms, mu));
        (e.values[0], e.vectors.column(0).into_owned())
    };
    let uniform = vec![1.0 / m as f64; m];
    let mut best = (h(&uniform).0, uniform.clone());
    match m {
        1 => {}
        2 => {
            // golden-section search on the concave function t ↦ h(1−t, t)
            let g = |t: f64| h(&[1.0 - t, t]).0;
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            let (mut a, mut b) = (0.0, 1.0);
            let mut c = b - phi * (b - a);
            let mut d = a + phi * (b - a);
            let (mut fc, mut fd) = (g(c), g(d));
            for _ in 0..80 {
                if fc < fd {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + phi * (b - a);
                    fd = g(d);
                } else {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - phi * (b - a);
                    fc = g(c);
                }
            }
            for t in [0.0, 1.0, (a + b) / 2.0] {
                let v = g(t);
                if v > best.0 {
                    best = (v, vec![1.0 - t, t]);
                }
            }
        }
        _ => {
            let scale = forms.iter().map(linalg::max_abs).fold(0.0, f64::max).max(1e-300);
            let mut mu = uniform;
            for k in 1..=3000 {
                let (v, vec) = h(&mu);
                if v > best.0 {
                    best = (v, mu.clone());
                }
                let grad: Vec<f64> = forms.iter().map(|f| vec.dot(&(f * &vec))).collect();
                let step = 1.0 / (scale * (k as f64).sqrt());
                let next: Vec<f64> = mu.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
                mu = project_simplex(&next);
            }
        }
    }
    best
}

fn max_form(forms: &[DMatrix<f64>], g: &DVector<f64>) -> f64 {
    forms.iter().map(|f| g.dot(&(f * g))).fold(f64::NEG_INFINITY, f64::max)
}

/// Minimizes a log-sum-exp smoothing of `max_s gᵀC_s g` on the unit sphere
/// with increasing sharpness; returns the exact max at the final point.
fn smoothed_descent(forms: &[DMatrix<f64>], mut g: DVector<f64>, scale: f64) -> (f64, DVector<f64>) {
    g /= g.norm();
    let lse = |beta: f64, g: &DVector<f64>| {
        let q: Vec<f64> = forms.iter().map(|f| g.dot(&(f * g))).collect();
        let top = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = q.iter().map(|v| (beta * (v - top)).exp()).collect();
        let z: f64 = w.iter().sum();
        (top + z.ln() / beta, w.into_iter().map(|a| a / z).collect::<Vec<_>>())
    };
    for k in 0..10 {
        let beta = 10f64.powi(k) / scale;
        let mut step = 0.5 / scale;
        for _ in 0..200 {
            let (val, w) = lse(beta, &g);
            let mut grad = DVector::zeros(g.len());
            for (f, wi) in forms.iter().zip(&w) {
                grad += (f * &g) * (2.0 * wi);
            }
            let rgrad = &grad - &g * g.dot(&grad);
            let gn = rgrad.norm();
            if gn < 1e-14 * scale {
                break;
            }
            let mut accepted = false;
            for _ in 0..40 {
                let mut cand = &g - &rgrad * step;
                cand /= cand.norm();
                if lse(beta, &cand).0 <= val - 1e-4 * step * gn * gn {
                    g = cand;
                    step *= 2.0;
                    accepted = true;
                    break;
                }
                step /= 2.0;
            }
            if !accepted {
                break;
            }
        }
    }
    (max_form(forms, &g), g)
}

/// Primal candidate from the dual optimum: the minimizer lies in the bottom
/// eigenspace `E` of `Σ μ_s C_s`, where the weighted form is constant. With
/// two forms the difference form on `E` is balanced exactly; otherwise the
/// smoothed descent runs inside `E`.
fn eigenspace_primal(forms: &[DMatrix<f64>], mu: &[f64], scale: f64) -> f64 {
    let eig = linalg::sym_eigen(&combine(forms, mu));
    let lo = eig.values[0];
    let cols: Vec<usize> = (0..eig.values.len()).filter(|&j| eig.values[j] <= lo + 1e-7 * scale).collect();
    let v = DMatrix::from_fn(eig.vectors.nrows(), cols.len(), |i, j| eig.vectors[(i, cols[j])]);
    let restricted: Vec<DMatrix<f64>> = forms.iter().map(|f| v.transpose() * f * &v).collect();
    let lift = |c: &DVector<f64>| &v * c;
    let mut best = max_form(forms, &lift(&DVector::from_fn(cols.len(), |i, _| if i == 0 { 1.0 } else { 0.0 })));
    if forms.len() == 2 {
        let d = linalg::sym_eigen(&(&restricted[0] - &restricted[1]));
        let r = d.values.len();
        let (a, b) = (d.values[r - 1], d.values[0]);
        let (up, down) = (d.vectors.column(r - 1).into_owned(), d.vectors.column(0).into_owned());
        let mut cands = vec![up.clone(), down.clone()];
        if a > 0.0 && b < 0.0 {
            // a·cos²θ + b·sin²θ = 0
            let theta = (a / -b).sqrt().atan();
            cands.push(up * theta.cos() + down * theta.sin());
        }
        for c in cands {
            best = best.min(max_form(forms, &lift(&c)));
        }
    } else {
        for j in 0..cols.len() {
            let start = DVector::from_fn(cols.len(), |i, _| if i == j { 1.0 } else { 0.3 });
            let (_, c) = smoothed_descent(&restricted, start, scale);
            best = best.min(max_form(forms, &lift(&c)));
        }
    }
    best
}

/// Generator-wise displacement gap of a coloured Cayley graph and the
/// expansion inequality `|∂A| ≥ (ε²/2)(1−|A|/m)|A|` it implies.
pub fn kazhdan_gap(g: &RegularGraph) -> Result<KazhdanReport> {
    let Some(perms) = g.colors() else {
        return Err(Error::Precondition("kazhdan_gap needs a generator-coloured Cayley graph".into()));
    };
    let n = g.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two vertices".into()));
    }
    check_vertex_transitive(perms, n)?;
    let spec = laplacian_gap(g)?;
    let spectral_bound = (2.0 * spec.lambda / perms.len() as f64).sqrt();
    let forms = displacement_forms(perms, n);
    let (dual, mu) = dual_bound(&forms);
    let lower = dual.max(2.0 * spec.lambda / perms.len() as f64).max(0.0);
    let eps = lower.sqrt();

    let mut upper = None;
    if n <= KAZHDAN_OPT_LIMIT {
        let scale = forms.iter().map(linalg::max_abs).fold(0.0, f64::max).max(1e-300);
        let start = linalg::sym_eigen(&combine(&forms, &mu)).vectors.column(0).into_owned();
        let mut best = smoothed_descent(&forms, start, scale).0.min(eigenspace_primal(&forms, &mu, scale));
        if best.max(0.0).sqrt() - eps > 1e-6 {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for _ in 0..50 {
                let v = DVector::from_fn(n - 1, |_, _| rng.gen_range(-1.0..1.0));
                best = best.min(smoothed_descent(&forms, v, scale).0);
            }
        }
        upper = Some(best.max(0.0).sqrt());
    }
    let exact = upper.is_some_and(|u| (u - eps).abs() <= 1e-6);
    Ok(KazhdanReport {
        eps,
        upper,
        exact,
        spectral_bound,
        expansion: expansion_inequality(g.lists(), eps)?,
    })
}

/// Checks `|∂A| ≥ (ε²/2)(1−a/m)a`, exhaustively up to
/// [`KAZHDAN_SUBSET_LIMIT`] vertices and on 10⁴ seeded samples beyond.
pub fn expansion_inequality(lists: &[Vec<usize>], eps: f64) -> Result<ExpansionCheck> {
    let n = lists.len();
    let k = eps * eps / 2.0;
    let need = |a: u32| k * (1.0 - f64::from(a) / n as f64) * f64::from(a);
    if n <= KAZHDAN_SUBSET_LIMIT {
        let nb = neighbour_masks(lists);
        let full = (1u64 << n) - 1;
        let mut min_margin = f64::INFINITY;
        let mut violations = Vec::new();
        for m in 1..full {
            let margin = f64::from(boundary(&nb, m)) - need(m.count_ones());
            min_margin = min_margin.min(margin);
            if margin < -1e-9 {
                violations.push((0..n).filter(|&v| m >> v & 1 == 1).collect());
            }
        }
        return Ok(ExpansionCheck {
            subsets_checked: full - 1,
            exhaustive: true,
            violations,
            min_margin,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut verts: Vec<usize> = (0..n).collect();
    let mut check = ExpansionCheck {
        subsets_checked: 10_000,
        exhaustive: false,
        violations: Vec::new(),
        min_margin: f64::INFINITY,
    };
    for _ in 0..10_000 {
        let a = rng.gen_range(1..n);
        verts.shuffle(&mut rng);
        let mut inside = vec![false; n];
        for &v in &verts[..a] {
            inside[v] = true;
        }
        let mut outer = vec![false; n];
        for &v in &verts[..a] {
            for &w in &lists[v] {
                outer[w] |= !inside[w];
            }
        }
        let margin = outer.iter().filter(|&&b| b).count() as f64 - need(a as u32);
        check.min_margin = check.min_margin.min(margin);
        if margin < -1e-9 {
            let mut s = verts[..a].to_vec();
            s.sort_unstable();
            check.violations.push(s);
        }
    }
    Ok(check)
}

/// Uniform pairing-model `d`-regular graph on `n` vertices, resampled until
/// simple and connected.
pub fn random_regular_graph(n: usize, d: usize, seed: u64) -> Result<RegularGraph> {
    if (n * d) % 2 != 0 {
        return Err(Error::InvalidInput(format!("n·d = {} is odd", n * d)));
    }
    if d == 0 || n <= d {
        return Err(Error::InvalidInput(format!("need 0 < d < n, got n = {n}, d = {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<usize> = (0..n * d).map(|i| i / d).collect();
    for _ in 0..100_000 {
        points.shuffle(&mut rng);
        let mut lists = vec![Vec::with_capacity(d); n];
        let mut simple = true;
        for pair in points.chunks(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || lists[a].contains(&b) {
                simple = false;
                break;
            }
            lists[a].push(b);
            lists[b].push(a);
        }
        if !simple {
            continue;
        }
        match RegularGraph::from_lists(lists) {
            Ok(g) => return Ok(g),
            Err(Error::Disconnected(..)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Budget(format!("no simple connected {d}-regular graph on {n} vertices after 100000 pairings")))
}
