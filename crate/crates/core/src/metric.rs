//! Finite metric spaces, their standard constructions, and coarse-map
//! diagnostics (compression profiles, bounded-geometry tables).

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base relative tolerance for distance comparisons; scaled by the largest
/// distance of the space in use.
pub const TOL: f64 = 1e-9;

/// A finite set of points with an explicit symmetric distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    ids: Vec<String>,
    dist: Vec<f64>,
    blocks: Option<Vec<usize>>,
}

impl FiniteMetricSpace {
    /// Builds a space and checks every metric axiom, including the triangle
    /// inequality over all triples.
    pub fn new(ids: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if dist.len() != n || dist.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMetric(format!(
                "distance matrix is not {n}x{n}"
            )));
        }
        let space = Self {
            ids,
            dist: dist.into_iter().flatten().collect(),
            blocks: None,
        };
        space.check_invariants()?;
        Ok(space)
    }

    /// Builds a space from a distance function. The caller guarantees the
    /// metric axioms (used by constructions that are metrics by design);
    /// debug builds still verify them on small inputs.
    pub(crate) fn from_fn(ids: Vec<String>, f: impl Fn(usize, usize) -> f64) -> Self {
        let n = ids.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                dist[i * n + j] = v;
                dist[j * n + i] = v;
            }
        }
        let space = Self {
            ids,
            dist,
            blocks: None,
        };
        debug_assert!(n > 40 || space.check_invariants().is_ok());
        space
    }

    /// Points `0..n` labelled by their index.
    pub fn from_matrix(dist: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..dist.len()).map(|i| i.to_string()).collect();
        Self::new(ids, dist)
    }

    pub fn with_blocks(mut self, blocks: Vec<usize>) -> Result<Self> {
        if blocks.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "{} block labels for {} points",
                blocks.len(),
                self.len()
            )));
        }
        self.blocks = Some(blocks);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn blocks(&self) -> Option<&[usize]> {
        self.blocks.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.dist[i * n..(i + 1) * n]
    }

    pub fn max_distance(&self) -> f64 {
        self.dist.iter().fold(0.0_f64, |a, &b| a.max(b))
    }

    pub fn diameter(&self) -> f64 {
        self.max_distance()
    }

    /// Comparison tolerance for this space: `TOL` scaled by its largest distance.
    pub fn tol(&self) -> f64 {
        TOL * self.max_distance().max(1.0)
    }

    /// Closed ball `B̄(x, r)` as point indices in increasing order.
    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        let t = self.tol();
        (0..self.len()).filter(|&y| self.d(x, y) <= r + t).collect()
    }

    pub fn is_integer_valued(&self) -> bool {
        self.dist.iter().all(|v| v.fract() == 0.0)
    }

    /// Sorted list of the distinct distance values (within tolerance).
    pub fn distance_values(&self) -> Vec<f64> {
        let mut v = self.dist.clone();
        v.sort_by(f64::total_cmp);
        let t = self.tol();
        let mut out: Vec<f64> = Vec::new();
        for x in v {
            if out.last().map_or(true, |&l| x - l > t) {
                out.push(x);
            }
        }
        out
    }

    /// Induced metric on `points` (order preserved); block labels carried over.
    pub fn subspace(&self, points: &[usize]) -> Self {
        let ids = points.iter().map(|&p| self.ids[p].clone()).collect();
        let mut s = Self::from_fn(ids, |i, j| self.d(points[i], points[j]));
        s.blocks = self
            .blocks
            .as_ref()
            .map(|b| points.iter().map(|&p| b[p]).collect());
        s
    }

    /// Checks zero diagonal, symmetry, positivity off the diagonal, and the
    /// triangle inequality (relative tolerance 1e-9).
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.len();
        if self.dist.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMetric(
                "distances must be finite and nonnegative".into(),
            ));
        }
        let t = self.tol();
        for i in 0..n {
            if self.d(i, i) != 0.0 {
                return Err(Error::InvalidMetric(format!("d({i},{i}) != 0")));
            }
            for j in (i + 1)..n {
                if (self.d(i, j) - self.d(j, i)).abs() > t {
                    return Err(Error::InvalidMetric(format!("d({i},{j}) != d({j},{i})")));
                }
                if self.d(i, j) <= 0.0 {
                    return Err(Error::InvalidMetric(format!(
                        "distinct points {i} and {j} at distance 0"
                    )));
                }
            }
        }
        self.check_triangle()
    }

    pub fn check_triangle(&self) -> Result<()> {
        let n = self.len();
        let t = self.tol();
        for x in 0..n {
            for y in 0..n {
                let dxy = self.d(x, y);
                for z in 0..n {
                    if self.d(x, z) > dxy + self.d(y, z) + t {
                        return Err(Error::InvalidMetric(format!(
                            "triangle inequality fails at ({x},{y},{z})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// All-pairs breadth-first search on an unweighted graph. Returns integer hop
/// counts, `None` for unreachable pairs.
pub(crate) fn bfs_all_pairs(adj: &[Vec<usize>]) -> Vec<Vec<Option<u32>>> {
    let n = adj.len();
    let mut out = vec![vec![None; n]; n];
    let mut queue = VecDeque::new();
    for (s, row) in out.iter_mut().enumerate() {
        row[s] = Some(0);
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = row[u].unwrap();
            for &v in &adj[u] {
                if row[v].is_none() {
                    row[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    out
}

pub(crate) fn adjacency_lists(adjacency: &[Vec<u8>]) -> Result<Vec<Vec<usize>>> {
    let n = adjacency.len();
    for (i, row) in adjacency.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidInput(format!("adjacency row {i} has wrong length")));
        }
        if row[i] != 0 {
            return Err(Error::InvalidInput(format!("self-loop at vertex {i}")));
        }
        for (j, &a) in row.iter().enumerate() {
            if a > 1 {
                return Err(Error::InvalidInput(format!("adjacency entry ({i},{j}) is not 0/1")));
            }
            if a != adjacency[j][i] {
                return Err(Error::InvalidInput(format!("adjacency not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(adjacency
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &a)| a == 1).map(|(j, _)| j).collect())
        .collect())
}

/// Shortest-path metric of a connected unweighted graph.
pub fn graph_metric(adjacency: &[Vec<u8>]) -> Result<FiniteMetricSpace> {
    let adj = adjacency_lists(adjacency)?;
    graph_metric_from_lists(&adj)
}

pub fn graph_metric_from_lists(adj: &[Vec<usize>]) -> Result<FiniteMetricSpace> {
    let hops = bfs_all_pairs(adj);
    for (i, row) in hops.iter().enumerate() {
        if let Some(j) = row.iter().position(Option::is_none) {
            return Err(Error::Disconnected(i, j));
        }
    }
    let ids = (0..adj.len()).map(|i| i.to_string()).collect();
    Ok(FiniteMetricSpace::from_fn(ids, |i, j| {
        f64::from(hops[i][j].unwrap())
    }))
}

/// Exponent for product metrics: finite `p ≥ 1` or the max metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            Exponent::Infinity => a.max(b),
            Exponent::Finite(p) if p == 1.0 => a + b,
            Exponent::Finite(p) => (a.powf(p) + b.powf(p)).powf(1.0 / p),
        }
    }
}

/// `ℓᵖ` product metric on the cartesian product; points ordered row-major
/// with `x` outer.
pub fn lp_product(
    x: &FiniteMetricSpace,
    y: &FiniteMetricSpace,
    p: Exponent,
) -> Result<FiniteMetricSpace> {
    if let Exponent::Finite(p) = p {
        if !(p >= 1.0) {
            return Err(Error::InvalidInput(format!("product exponent {p} < 1")));
        }
    }
    let ny = y.len();
    let ids = x
        .ids()
        .iter()
        .flat_map(|a| y.ids().iter().map(move |b| format!("({a},{b})")))
        .collect();
    Ok(FiniteMetricSpace::from_fn(ids, |i, j| {
        p.combine(x.d(i / ny, j / ny), y.d(i % ny, j % ny))
    }))
}

/// How far apart blocks of a separated union are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapPolicy {
    /// Cross-block distance `max(diam_i, diam_j) + 1`.
    MaxDiamPlusOne,
    /// Consecutive blocks (1-based `n`, `n+1`) at distance `n + 1`; gaps add
    /// up across intermediate blocks.
    Nowak,
}

impl GapPolicy {
    pub fn cross_distance(self, i: usize, j: usize, diams: &[f64]) -> f64 {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        match self {
            GapPolicy::MaxDiamPlusOne => diams[lo].max(diams[hi]) + 1.0,
            // block index k (0-based) is X_{k+1}; gap(X_n, X_{n+1}) = n + 1
            GapPolicy::Nowak => (lo..hi).map(|k| (k + 2) as f64).sum(),
        }
    }
}

/// Disjoint union with within-block distances preserved and constant
/// cross-block distances given by `policy`. Block labels are block indices.
pub fn separated_union(
    blocks: &[FiniteMetricSpace],
    policy: GapPolicy,
) -> Result<FiniteMetricSpace> {
    if blocks.is_empty() {
        return Err(Error::InvalidInput("separated union of no blocks".into()));
    }
    let diams: Vec<f64> = blocks.iter().map(FiniteMetricSpace::diameter).collect();
    for i in 0..blocks.len() {
        for j in 0..blocks.len() {
            if i != j && 2.0 * policy.cross_distance(i, j, &diams) < diams[i] {
                return Err(Error::InvalidMetric(format!(
                    "gap between blocks {i} and {j} is below half the diameter of block {i}"
                )));
            }
        }
    }
    let mut owner = Vec::new();
    let mut ids = Vec::new();
    for (b, space) in blocks.iter().enumerate() {
        for (k, id) in space.ids().iter().enumerate() {
            owner.push((b, k));
            ids.push(if blocks.len() == 1 {
                id.clone()
            } else {
                format!("{b}:{id}")
            });
        }
    }
    let space = FiniteMetricSpace::from_fn(ids, |i, j| {
        let (bi, ki) = owner[i];
        let (bj, kj) = owner[j];
        if bi == bj {
            blocks[bi].d(ki, kj)
        } else {
            policy.cross_distance(bi, bj, &diams)
        }
    });
    space.with_blocks(owner.iter().map(|o| o.0).collect())
}

/// Greedy maximal `delta`-separated subset, scanning points in index order.
/// Returns the chosen indices and the induced subspace.
pub fn net_extract(space: &FiniteMetricSpace, delta: f64) -> Result<(Vec<usize>, FiniteMetricSpace)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("net separation {delta} must be positive")));
    }
    let t = space.tol();
    let mut net: Vec<usize> = Vec::new();
    for x in 0..space.len() {
        if net.iter().all(|&y| space.d(x, y) >= delta - t) {
            net.push(x);
        }
    }
    let sub = space.subspace(&net);
    Ok((net, sub))
}

/// `N_r = max_x |B̄(x, r)|` for each requested radius.
pub fn bounded_geometry_stats(space: &FiniteMetricSpace, radii: &[f64]) -> Result<Vec<(f64, usize)>> {
    radii
        .iter()
        .map(|&r| {
            if r < 0.0 {
                return Err(Error::InvalidInput(format!("negative radius {r}")));
            }
            let n = (0..space.len()).map(|x| space.ball(x, r).len()).max().unwrap_or(0);
            Ok((r, n))
        })
        .collect()
}

/// Target of a point map.
#[derive(Debug, Clone, PartialEq)]
pub enum MapTarget {
    /// Points of another finite metric space, by index.
    Space {
        space: FiniteMetricSpace,
        assignment: Vec<usize>,
    },
    /// Euclidean coordinates (one row per source point).
    Euclidean(Vec<Vec<f64>>),
}

/// A total map from the points of `source` to a target.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    pub source: FiniteMetricSpace,
    pub target: MapTarget,
}

impl PointMap {
    pub fn into_space(
        source: FiniteMetricSpace,
        target: FiniteMetricSpace,
        assignment: Vec<usize>,
    ) -> Result<Self> {
        if assignment.len() != source.len() || assignment.iter().any(|&a| a >= target.len()) {
            return Err(Error::InvalidInput("assignment is not total on the source".into()));
        }
        Ok(Self {
            source,
            target: MapTarget::Space {
                space: target,
                assignment,
            },
        })
    }

    pub fn into_euclidean(source: FiniteMetricSpace, coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.len() != source.len() {
            return Err(Error::InvalidInput("coordinate table is not total on the source".into()));
        }
        Ok(Self {
            source,
            target: MapTarget::Euclidean(coords),
        })
    }

    pub fn identity(space: FiniteMetricSpace) -> Self {
        let assignment = (0..space.len()).collect();
        Self {
            target: MapTarget::Space {
                space: space.clone(),
                assignment,
            },
            source: space,
        }
    }

    pub fn image_distance(&self, x: usize, y: usize) -> f64 {
        match &self.target {
            MapTarget::Space { space, assignment } => space.d(assignment[x], assignment[y]),
            MapTarget::Euclidean(c) => c[x]
                .iter()
                .zip(&c[y])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// `g ∘ self`, where `g` starts at this map's target space.
    pub fn then(&self, g: &PointMap) -> Result<PointMap> {
        let MapTarget::Space { space, assignment } = &self.target else {
            return Err(Error::InvalidInput("cannot compose after a Euclidean target".into()));
        };
        if space != &g.source {
            return Err(Error::InvalidInput("composition domains do not match".into()));
        }
        let target = match &g.target {
            MapTarget::Space {
                space: s2,
                assignment: a2,
            } => MapTarget::Space {
                space: s2.clone(),
                assignment: assignment.iter().map(|&a| a2[a]).collect(),
            },
            MapTarget::Euclidean(c) => {
                MapTarget::Euclidean(assignment.iter().map(|&a| c[a].clone()).collect())
            }
        };
        Ok(PointMap {
            source: self.source.clone(),
            target,
        })
    }
}

/// Empirical control functions of a point map, binned by source distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionProfile {
    /// Half-open source-distance bins `[r_lo, r_hi)`; empty bins are omitted.
    pub bins: Vec<(f64, f64)>,
    /// Minimum image distance per bin.
    pub rho1: Vec<f64>,
    /// Maximum image distance per bin.
    pub rho2: Vec<f64>,
    /// `(t, Q_t)` pairs, when the producing construction defines them.
    #[serde(default)]
    pub q_table: Vec<(f64, usize)>,
}

impl CompressionProfile {
    /// Monotone lower envelope of `rho1`: `env[b] = min_{b' ≥ b} rho1[b']`.
    pub fn rho1_envelope(&self) -> Vec<f64> {
        let mut env = self.rho1.clone();
        for b in (0..env.len().saturating_sub(1)).rev() {
            env[b] = env[b].min(env[b + 1]);
        }
        env
    }

    /// Monotone upper envelope of `rho2`: `env[b] = max_{b' ≤ b} rho2[b']`.
    pub fn rho2_envelope(&self) -> Vec<f64> {
        let mut env = self.rho2.clone();
        for b in 1..env.len() {
            env[b] = env[b].max(env[b - 1]);
        }
        env
    }

    /// Effective properness over the available range: the lower envelope is
    /// strictly increasing across the top (up to three) bins.
    pub fn effectively_proper(&self) -> bool {
        let env = self.rho1_envelope();
        if env.len() < 2 {
            return false;
        }
        let top = &env[env.len().saturating_sub(3)..];
        top.windows(2).all(|w| w[1] > w[0])
    }

    /// Value of the `rho2` upper envelope at source distance `r` (the envelope
    /// of the last bin starting at or below `r`).
    pub fn rho2_at(&self, r: f64) -> Option<f64> {
        let env = self.rho2_envelope();
        let idx = self.bins.iter().rposition(|&(lo, _)| lo <= r)?;
        Some(env[idx])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r_lo,r_hi,rho1,rho2\n");
        for (b, &(lo, hi)) in self.bins.iter().enumerate() {
            let _ = writeln!(s, "{lo},{hi},{},{}", self.rho1[b], self.rho2[b]);
        }
        s
    }
}

/// Accumulates every pair's image distance into the bin of its source
/// distance. `bin_width` defaults to 1.0 when `None`.
pub fn compression_profile(map: &PointMap, bin_width: Option<f64>) -> Result<CompressionProfile> {
    profile_by(&map.source, bin_width, |x, y| map.image_distance(x, y))
}

/// Profile of an arbitrary image distance `img(x, y)` over the pairs of
/// `source`.
pub fn profile_by(
    source: &FiniteMetricSpace,
    bin_width: Option<f64>,
    img: impl Fn(usize, usize) -> f64,
) -> Result<CompressionProfile> {
    let w = bin_width.unwrap_or(1.0);
    if !(w > 0.0) {
        return Err(Error::InvalidInput("bin width must be positive".into()));
    }
    let n = source.len();
    let t = source.tol();
    let mut acc: std::collections::BTreeMap<i64, (f64, f64)> = Default::default();
    for x in 0..n {
        for y in (x + 1)..n {
            let b = ((source.d(x, y) + t) / w).floor() as i64;
            let img = img(x, y);
            let e = acc.entry(b).or_insert((f64::INFINITY, f64::NEG_INFINITY));
            e.0 = e.0.min(img);
            e.1 = e.1.max(img);
        }
    }
    let mut prof = CompressionProfile {
        bins: Vec::with_capacity(acc.len()),
        rho1: Vec::with_capacity(acc.len()),
        rho2: Vec::with_capacity(acc.len()),
        q_table: Vec::new(),
    };
    for (b, (lo, hi)) in acc {
        prof.bins.push((b as f64 * w, (b + 1) as f64 * w));
        prof.rho1.push(lo);
        prof.rho2.push(hi);
    }
    Ok(prof)
}

/// JSON shape of a metric space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceJson {
    pub schema: String,
    pub points: Vec<serde_json::Value>,
    pub dist: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
}

impl FiniteMetricSpace {
    pub fn to_json_value(&self) -> SpaceJson {
        let n = self.len();
        SpaceJson {
            schema: crate::SCHEMA.into(),
            points: self.ids.iter().map(|s| serde_json::Value::String(s.clone())).collect(),
            dist: (0..n).map(|i| self.row(i).to_vec()).collect(),
            blocks: self.blocks.clone(),
        }
    }

    pub fn from_json_value(j: SpaceJson) -> Result<Self> {
        crate::io::check_schema(&j.schema, "$.schema")?;
        let ids = j
            .points
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                serde_json::Value::String(s) => Ok(s.clone()),
                serde_json::Value::Number(x) => Ok(x.to_string()),
                _ => Err(Error::schema(format!("$.points[{i}]"), "point id must be a string or number")),
            })
            .collect::<Result<Vec<_>>>()?;
        if j.dist.len() != ids.len() {
            return Err(Error::schema("$.dist", "row count differs from point count"));
        }
        for (i, row) in j.dist.iter().enumerate() {
            if row.len() != ids.len() {
                return Err(Error::schema(format!("$.dist[{i}]"), "row length differs from point count"));
            }
        }
        let space = Self::new(ids, j.dist).map_err(|e| Error::schema("$.dist", e.to_string()))?;
        match j.blocks {
            Some(b) => space
                .with_blocks(b)
                .map_err(|e| Error::schema("$.blocks", e.to_string())),
            None => Ok(space),
        }
    }
}

/// Standard generators used by tests, the CLI and the acceptance suite.
pub mod gen {
    use super::*;

    fn lists_to_space(adj: Vec<Vec<usize>>) -> FiniteMetricSpace {
        graph_metric_from_lists(&adj).expect("generator graphs are connected")
    }

    pub fn path(n: usize) -> FiniteMetricSpace {
        let adj = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        lists_to_space(adj)
    }

    pub fn cycle(n: usize) -> FiniteMetricSpace {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        lists_to_space(cycle_adjacency(n))
    }

    pub fn cycle_adjacency(n: usize) -> Vec<Vec<usize>> {
        (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect()
    }

    pub fn complete(n: usize) -> FiniteMetricSpace {
        lists_to_space((0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect())
    }

    /// Hamming cube `{0,1}^n`; point `i` has bit pattern `i`.
    pub fn hypercube(n: u32) -> FiniteMetricSpace {
        let m = 1usize << n;
        let ids = (0..m).map(|i| format!("{i:0width$b}", width = n as usize)).collect();
        FiniteMetricSpace::from_fn(ids, |i, j| f64::from((i ^ j).count_ones()))
    }

    /// Adjacency lists of the rooted tree with the given branching and depth
    /// (root 0, breadth-first numbering).
    pub fn tree_adjacency(branch: usize, depth: usize) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new()];
        let mut frontier = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::new();
            for &p in &frontier {
                for _ in 0..branch {
                    let c = adj.len();
                    adj.push(vec![p]);
                    adj[p].push(c);
                    next.push(c);
                }
            }
            frontier = next;
        }
        adj
    }

    pub fn tree(branch: usize, depth: usize) -> FiniteMetricSpace {
        lists_to_space(tree_adjacency(branch, depth))
    }

    pub fn lists_to_matrix(adj: &[Vec<usize>]) -> Vec<Vec<u8>> {
        let n = adj.len();
        let mut m = vec![vec![0u8; n]; n];
        for (i, row) in adj.iter().enumerate() {
            for &j in row {
                m[i][j] = 1;
            }
        }
        m
    }
}
