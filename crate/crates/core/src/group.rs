//! Finite groups as metric objects: word metrics, quotients, box spaces,
//! hypercube spaces and warped metrics.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::amenability::FolnerFunction;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::metric::{self, FiniteMetricSpace, GapPolicy};
use crate::witness::{self, LpWitness, Witness, WitnessReport};

/// A finite group given by its multiplication table, with a symmetric
/// generating set and an integer length function.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGroup {
    names: Vec<String>,
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
    generators: Vec<usize>,
    lengths: Vec<u32>,
}

impl FiniteGroup {
    /// Checks the group axioms and the generating set, then takes word
    /// lengths from the generators.
    pub fn new(names: Vec<String>, table: Vec<Vec<usize>>, generators: Vec<usize>) -> Result<Self> {
        let n = names.len();
        if n == 0 || table.len() != n || table.iter().any(|r| r.len() != n || r.iter().any(|&v| v >= n)) {
            return Err(Error::Group("multiplication table must be n x n over 0..n".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| Error::Group("no identity element".into()))?;
        let mut inverse = vec![usize::MAX; n];
        for g in 0..n {
            let h = (0..n)
                .find(|&h| table[g][h] == identity && table[h][g] == identity)
                .ok_or_else(|| Error::Group(format!("element {} has no inverse", names[g])))?;
            inverse[g] = h;
        }
        for a in 0..n {
            for b in 0..n {
                let ab = table[a][b];
                for c in 0..n {
                    if table[ab][c] != table[a][table[b][c]] {
                        return Err(Error::Group(format!(
                            "associativity fails at ({}, {}, {})",
                            names[a], names[b], names[c]
                        )));
                    }
                }
            }
        }
        let mut group = Self {
            names,
            table,
            identity,
            inverse,
            generators: Vec::new(),
            lengths: Vec::new(),
        };
        group.set_generators(generators)?;
        Ok(group)
    }

    fn set_generators(&mut self, generators: Vec<usize>) -> Result<()> {
        let n = self.order();
        let mut gens = generators;
        gens.sort_unstable();
        gens.dedup();
        for &s in &gens {
            if s >= n {
                return Err(Error::Group(format!("generator index {s} out of range")));
            }
            if s == self.identity {
                return Err(Error::Group("generating set contains the identity".into()));
            }
            if gens.binary_search(&self.inverse[s]).is_err() {
                return Err(Error::Group(format!(
                    "generating set not symmetric: {} lacks its inverse",
                    self.names[s]
                )));
            }
        }
        let mut len = vec![u32::MAX; n];
        len[self.identity] = 0;
        let mut q = VecDeque::from([self.identity]);
        while let Some(g) = q.pop_front() {
            for &s in &gens {
                let h = self.table[g][s];
                if len[h] == u32::MAX {
                    len[h] = len[g] + 1;
                    q.push_back(h);
                }
            }
        }
        if let Some(g) = len.iter().position(|&l| l == u32::MAX) {
            return Err(Error::Group(format!(
                "generators do not generate: {} unreachable",
                self.names[g]
            )));
        }
        self.generators = gens;
        self.lengths = len;
        Ok(())
    }

    /// Replaces word lengths with user-supplied integer lengths, checking
    /// `|g| = |g⁻¹|`, subadditivity and `|g| = 0 ⇔ g = e`.
    pub fn with_lengths(mut self, lengths: Vec<u32>) -> Result<Self> {
        let n = self.order();
        if lengths.len() != n {
            return Err(Error::Group("one length per element required".into()));
        }
        for g in 0..n {
            if (lengths[g] == 0) != (g == self.identity) {
                return Err(Error::Group(format!("|{}| = 0 must hold exactly at e", self.names[g])));
            }
            if lengths[g] != lengths[self.inverse[g]] {
                return Err(Error::Group(format!("|{0}| != |{0}^-1|", self.names[g])));
            }
            for h in 0..n {
                if lengths[self.table[g][h]] > lengths[g] + lengths[h] {
                    return Err(Error::Group(format!(
                        "|gh| > |g| + |h| at ({}, {})",
                        self.names[g], self.names[h]
                    )));
                }
            }
        }
        self.lengths = lengths;
        Ok(self)
    }

    /// `Z/n` with generators `{1, n-1}`.
    pub fn cyclic(n: usize) -> Self {
        assert!(n >= 1);
        let names = (0..n).map(|i| i.to_string()).collect();
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        let gens = if n == 1 { vec![] } else { vec![1 % n, n - 1] };
        Self::new(names, table, gens).expect("cyclic group")
    }

    /// `(Z/2)^k` with the coordinate flips as generators; element `i` is the
    /// bit vector `i`.
    pub fn z2_pow(k: u32) -> Self {
        let n = 1usize << k;
        let names = (0..n).map(|i| format!("{i:0w$b}", w = k as usize)).collect();
        let table = (0..n).map(|a| (0..n).map(|b| a ^ b).collect()).collect();
        let gens = (0..k).map(|b| 1usize << b).collect();
        Self::new(names, table, gens).expect("elementary abelian group")
    }

    /// Dihedral group of order `2m` (`m ≥ 3`): `r^i` is element `i`, `r^i s`
    /// is element `m + i`; generators `r, r⁻¹, s`.
    pub fn dihedral(m: usize) -> Self {
        assert!(m >= 3);
        let n = 2 * m;
        let names = (0..n)
            .map(|e| if e < m { format!("r{e}") } else { format!("r{}s", e - m) })
            .collect();
        let mul = |a: usize, b: usize| -> usize {
            let (ia, sa) = (a % m, a >= m);
            let (ib, sb) = (b % m, b >= m);
            // r^ia s^sa r^ib s^sb = r^(ia ± ib) s^(sa xor sb)
            let i = if sa { (ia + m - ib) % m } else { (ia + ib) % m };
            if sa ^ sb {
                m + i
            } else {
                i
            }
        };
        let table = (0..n).map(|a| (0..n).map(|b| mul(a, b)).collect()).collect();
        Self::new(names, table, vec![1, m - 1, m]).expect("dihedral group")
    }

    /// Direct product with generators `(s, e)` and `(e, t)`; element
    /// `(a, b)` has index `a * |H| + b`.
    pub fn direct_product(&self, other: &FiniteGroup) -> Self {
        let nh = other.order();
        let n = self.order() * nh;
        let names = (0..n)
            .map(|i| format!("({},{})", self.names[i / nh], other.names[i % nh]))
            .collect();
        let table = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| self.table[a / nh][b / nh] * nh + other.table[a % nh][b % nh])
                    .collect()
            })
            .collect();
        let gens = self
            .generators
            .iter()
            .map(|&s| s * nh + other.identity)
            .chain(other.generators.iter().map(|&t| self.identity * nh + t))
            .collect();
        Self::new(names, table, gens).expect("direct product of groups")
    }

    pub fn power(&self, n: usize) -> Self {
        assert!(n >= 1);
        let mut g = self.clone();
        for _ in 1..n {
            g = g.direct_product(self);
        }
        g
    }

    pub fn order(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    #[inline]
    pub fn length(&self, g: usize) -> u32 {
        self.lengths[g]
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    /// Elements with `|g| ≤ r`, in index order.
    pub fn ball(&self, r: f64) -> Vec<usize> {
        (0..self.order()).filter(|&g| f64::from(self.lengths[g]) <= r + 1e-9).collect()
    }

    pub fn is_subgroup(&self, k: &[usize]) -> bool {
        let mut mark = vec![false; self.order()];
        for &g in k {
            if g >= self.order() {
                return false;
            }
            mark[g] = true;
        }
        mark[self.identity] && k.iter().all(|&a| k.iter().all(|&b| mark[self.mul(a, self.inv(b))]))
    }

    pub fn is_normal(&self, k: &[usize]) -> bool {
        let mut mark = vec![false; self.order()];
        for &g in k {
            mark[g] = true;
        }
        self.is_subgroup(k)
            && (0..self.order()).all(|g| k.iter().all(|&h| mark[self.mul(self.mul(g, h), self.inv(g))]))
    }

    /// Subgroup generated by `gens` (closure under multiplication).
    pub fn generated_subgroup(&self, gens: &[usize]) -> Vec<usize> {
        let mut mark = vec![false; self.order()];
        mark[self.identity] = true;
        let mut q = VecDeque::from([self.identity]);
        while let Some(g) = q.pop_front() {
            for &s in gens {
                let h = self.mul(g, s);
                if !mark[h] {
                    mark[h] = true;
                    q.push_back(h);
                }
            }
        }
        (0..self.order()).filter(|&g| mark[g]).collect()
    }

    /// Right-multiplication permutations `x ↦ x·s`, one per generator.
    pub fn right_generator_perms(&self) -> Vec<Vec<usize>> {
        self.generators
            .iter()
            .map(|&s| (0..self.order()).map(|x| self.mul(x, s)).collect())
            .collect()
    }

    pub fn to_json_value(&self) -> GroupJson {
        GroupJson {
            schema: crate::SCHEMA.into(),
            elements: self.names.clone(),
            table: self.table.clone(),
            generators: self.generators.clone(),
            lengths: Some(self.lengths.clone()),
        }
    }

    pub fn from_json_value(j: GroupJson) -> Result<Self> {
        crate::io::check_schema(&j.schema, "$.schema")?;
        let g = Self::new(j.elements, j.table, j.generators)
            .map_err(|e| Error::schema("$.table", e.to_string()))?;
        match j.lengths {
            Some(l) if l != g.lengths => g.with_lengths(l).map_err(|e| Error::schema("$.lengths", e.to_string())),
            _ => Ok(g),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupJson {
    pub schema: String,
    pub elements: Vec<String>,
    pub table: Vec<Vec<usize>>,
    pub generators: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<u32>>,
}

/// `d(g, h) = |g⁻¹h|`.
pub fn cayley_metric(g: &FiniteGroup) -> FiniteMetricSpace {
    FiniteMetricSpace::from_fn(g.names.clone(), |a, b| f64::from(g.length(g.mul(g.inv(a), b))))
}

/// Cosets of a normal subgroup, indexed by order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Cosets {
    /// Coset index of each group element.
    pub of: Vec<usize>,
    /// Lowest-index representative of each coset.
    pub reps: Vec<usize>,
}

pub fn cosets(g: &FiniteGroup, k: &[usize]) -> Result<Cosets> {
    if !g.is_normal(k) {
        return Err(Error::Group("subgroup is not normal".into()));
    }
    let mut of = vec![usize::MAX; g.order()];
    let mut reps = Vec::new();
    for a in 0..g.order() {
        if of[a] == usize::MAX {
            for &h in k {
                of[g.mul(a, h)] = reps.len();
            }
            reps.push(a);
        }
    }
    Ok(Cosets { of, reps })
}

/// Quotient group `G/K` with the quotient length `|aK| = min |ak|`; the
/// generators are the images of the generators of `G`.
pub fn quotient_group(g: &FiniteGroup, k: &[usize]) -> Result<(FiniteGroup, Cosets)> {
    let c = cosets(g, k)?;
    let m = c.reps.len();
    let names = c.reps.iter().map(|&r| format!("[{}]", g.names[r])).collect();
    let table = (0..m)
        .map(|a| (0..m).map(|b| c.of[g.mul(c.reps[a], c.reps[b])]).collect())
        .collect();
    let mut gens: Vec<usize> = g.generators.iter().map(|&s| c.of[s]).filter(|&q| q != c.of[g.identity]).collect();
    gens.sort_unstable();
    gens.dedup();
    let mut lengths = vec![u32::MAX; m];
    for a in 0..g.order() {
        lengths[c.of[a]] = lengths[c.of[a]].min(g.length(a));
    }
    let q = FiniteGroup::new(names, table, gens)?.with_lengths(lengths)?;
    Ok((q, c))
}

/// Metric on cosets: `d(aK, bK) = min_{k∈K} |a⁻¹bk|`. The quotient map is
/// verified to be contractive.
pub fn quotient_metric(g: &FiniteGroup, k: &[usize]) -> Result<FiniteMetricSpace> {
    let (q, c) = quotient_group(g, k)?;
    let space = cayley_metric(&q);
    for a in 0..g.order() {
        for b in 0..g.order() {
            let dq = space.d(c.of[a], c.of[b]);
            if dq > f64::from(g.length(g.mul(g.inv(a), b))) {
                return Err(Error::Invariant("quotient map is not contractive".into()));
            }
        }
    }
    Ok(space)
}

/// Decreasing chain of normal subgroups of one ambient finite group.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientChain {
    pub subgroups: Vec<Vec<usize>>,
    /// Intersection of all subgroups in the chain.
    pub intersection: Vec<usize>,
}

impl QuotientChain {
    pub fn new(g: &FiniteGroup, subgroups: Vec<Vec<usize>>) -> Result<Self> {
        if subgroups.is_empty() {
            return Err(Error::InvalidInput("empty quotient chain".into()));
        }
        let mut sets = Vec::with_capacity(subgroups.len());
        for (i, mut k) in subgroups.into_iter().enumerate() {
            k.sort_unstable();
            k.dedup();
            if !g.is_normal(&k) {
                return Err(Error::Group(format!("chain entry {i} is not a normal subgroup")));
            }
            sets.push(k);
        }
        for i in 1..sets.len() {
            if !sets[i].iter().all(|h| sets[i - 1].binary_search(h).is_ok()) {
                return Err(Error::Group(format!("chain entry {i} is not contained in entry {}", i - 1)));
            }
        }
        let intersection = sets.last().cloned().unwrap_or_default();
        Ok(Self {
            subgroups: sets,
            intersection,
        })
    }

    /// `Z/m` chain `⟨d_1⟩ ⊇ ⟨d_2⟩ ⊇ …` for the given divisors of `m`.
    pub fn cyclic(g: &FiniteGroup, divisors: &[usize]) -> Result<Self> {
        let subs = divisors.iter().map(|&d| g.generated_subgroup(&[d % g.order()])).collect();
        Self::new(g, subs)
    }
}

/// A box space together with the quotient data needed to move between the
/// ambient group and each block.
#[derive(Debug, Clone)]
pub struct BoxSpace {
    pub space: FiniteMetricSpace,
    pub ambient: FiniteGroup,
    pub chain: QuotientChain,
    pub quotients: Vec<FiniteGroup>,
    pub cosets: Vec<Cosets>,
    /// Index of the first point of each block in `space`.
    pub offsets: Vec<usize>,
}

impl BoxSpace {
    pub fn block_range(&self, n: usize) -> std::ops::Range<usize> {
        self.offsets[n]..self.offsets[n] + self.quotients[n].order()
    }

    /// Whether the quotient map of block `n` is isometric on `B̄(e, s)`.
    pub fn isometric_on_ball(&self, n: usize, s: f64) -> bool {
        let ball = self.ambient.ball(s);
        let q = &self.quotients[n];
        let c = &self.cosets[n];
        ball.iter().all(|&a| {
            ball.iter().all(|&b| {
                let dg = self.ambient.length(self.ambient.mul(self.ambient.inv(a), b));
                let (qa, qb) = (c.of[a], c.of[b]);
                q.length(q.mul(q.inv(qa), qb)) == dg
            })
        })
    }
}

/// Separated union of the quotients `G/K_n` under the max-diam-plus-1 policy.
pub fn box_space(g: &FiniteGroup, chain: &QuotientChain) -> Result<BoxSpace> {
    let mut blocks = Vec::new();
    let mut quotients = Vec::new();
    let mut all_cosets = Vec::new();
    let mut offsets = Vec::new();
    let mut off = 0;
    for k in &chain.subgroups {
        let (q, c) = quotient_group(g, k)?;
        blocks.push(cayley_metric(&q));
        offsets.push(off);
        off += q.order();
        quotients.push(q);
        all_cosets.push(c);
    }
    let space = metric::separated_union(&blocks, GapPolicy::MaxDiamPlusOne)?;
    Ok(BoxSpace {
        space,
        ambient: g.clone(),
        chain: chain.clone(),
        quotients,
        cosets: all_cosets,
        offsets,
    })
}

/// Kernel built from a positive-type function on the ambient group.
#[derive(Debug, Clone)]
pub struct BoxKernel {
    pub kernel: DMatrix<f64>,
    /// First block whose quotient map is isometric on the support ball.
    pub first_late_block: usize,
    /// Propagation of the kernel on the box space.
    pub propagation: f64,
}

/// Piecewise kernel on a box space: 1 on blocks before the first isometric
/// block, `φ` through the unique short lift on later blocks, 0 across blocks.
pub fn box_kernel_from_function(bx: &BoxSpace, phi: &[f64]) -> Result<BoxKernel> {
    let g = &bx.ambient;
    if phi.len() != g.order() {
        return Err(Error::InvalidInput("function must have one value per ambient element".into()));
    }
    let s = (0..g.order())
        .filter(|&h| phi[h] != 0.0)
        .map(|h| g.length(h))
        .max()
        .unwrap_or(0);
    let s = f64::from(s);
    let first = (0..bx.quotients.len())
        .find(|&n| bx.isometric_on_ball(n, s))
        .ok_or_else(|| Error::Precondition(format!("no block is isometric on B(e, {s})")))?;
    let total = bx.space.len();
    let mut k = DMatrix::zeros(total, total);
    for n in 0..bx.quotients.len() {
        let q = &bx.quotients[n];
        let range = bx.block_range(n);
        if n < first {
            for i in range.clone() {
                for j in range.clone() {
                    k[(i, j)] = 1.0;
                }
            }
            continue;
        }
        // pushforward of φ to the quotient; isometry on the ball makes each
        // coset meet the support at most once
        let mut pushed = vec![0.0; q.order()];
        for h in 0..g.order() {
            if phi[h] != 0.0 {
                pushed[bx.cosets[n].of[h]] += phi[h];
            }
        }
        for a in 0..q.order() {
            for b in 0..q.order() {
                k[(range.start + a, range.start + b)] = pushed[q.mul(q.inv(a), b)];
            }
        }
    }
    let mut propagation: f64 = 0.0;
    for i in 0..total {
        for j in 0..total {
            if k[(i, j)] != 0.0 {
                propagation = propagation.max(bx.space.d(i, j));
            }
        }
    }
    Ok(BoxKernel {
        kernel: k,
        first_late_block: first,
        propagation,
    })
}

/// `ψ_n(f) = (1/|F_n|) Σ_{f'∈F_n} k(f', f'f)` on block `n`.
pub fn box_function_from_kernel(bx: &BoxSpace, kernel: &DMatrix<f64>, n: usize) -> Result<Vec<f64>> {
    if n >= bx.quotients.len() {
        return Err(Error::InvalidInput(format!("block {n} does not exist")));
    }
    if kernel.nrows() != bx.space.len() || kernel.ncols() != bx.space.len() {
        return Err(Error::PointMismatch("kernel size differs from the box space".into()));
    }
    let q = &bx.quotients[n];
    let off = bx.offsets[n];
    let m = q.order() as f64;
    Ok((0..q.order())
        .map(|f| (0..q.order()).map(|a| kernel[(off + a, off + q.mul(a, f))]).sum::<f64>() / m)
        .collect())
}

/// `χ_G` truncated at `n_max`: blocks `Gⁿ` with the ℓ¹ product word metric,
/// consecutive gaps `n + 1`, additive across blocks.
pub fn hypercube_space(base: &FiniteGroup, n_max: usize) -> Result<FiniteMetricSpace> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let b = cayley_metric(base);
    let mut blocks = vec![b.clone()];
    for _ in 1..n_max {
        let next = metric::lp_product(blocks.last().unwrap(), &b, metric::Exponent::Finite(1.0))?;
        blocks.push(next);
    }
    metric::separated_union(&blocks, GapPolicy::Nowak)
}

/// `χ_{Z₂}` truncated at `n_max` with its Hamming embedding: block `Xₙ`
/// sits on the cube `{0,1}ⁿ` (padded to `n_max` coordinates) shifted by the
/// cumulative gap along one extra axis.
#[derive(Debug, Clone)]
pub struct HypercubeEmbedding {
    pub space: FiniteMetricSpace,
    pub coords: Vec<Vec<f64>>,
    /// Squared image distances, a negative-type kernel by construction.
    pub kernel: Kernel,
}

pub fn hypercube_embedding(n_max: usize) -> Result<HypercubeEmbedding> {
    let space = hypercube_space(&FiniteGroup::cyclic(2), n_max)?;
    let blocks = space.blocks().expect("separated union carries block labels").to_vec();
    let mut coords = Vec::with_capacity(space.len());
    let mut start = 0;
    let mut offset = 0.0;
    for k in 0..n_max {
        let size = 1usize << (k + 1);
        for i in 0..size {
            // first factor is the most significant digit
            let mut c: Vec<f64> = (0..n_max).map(|j| if j <= k && (i >> (k - j)) & 1 == 1 { 1.0 } else { 0.0 }).collect();
            c.push(offset);
            coords.push(c);
        }
        for a in start..start + size {
            for b in start..start + size {
                let ham = ((a - start) ^ (b - start)).count_ones() as f64;
                if space.d(a, b) != ham || blocks[a] != k {
                    return Err(Error::Invariant(format!("block {k} is not the Hamming cube at ({a}, {b})")));
                }
            }
        }
        start += size;
        offset += (k + 2) as f64;
    }
    let n = space.len();
    let sq = |a: usize, b: usize| coords[a].iter().zip(&coords[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let kernel = Kernel::from_fn(n, sq)?;
    Ok(HypercubeEmbedding { space, coords, kernel })
}

/// Action of a finite group on the points of a finite metric space.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAction {
    pub group: FiniteGroup,
    /// `perms[g][x] = g·x`.
    pub perms: Vec<Vec<usize>>,
}

impl GroupAction {
    pub fn new(group: FiniteGroup, perms: Vec<Vec<usize>>, n_points: usize) -> Result<Self> {
        if perms.len() != group.order() {
            return Err(Error::Group("one permutation per group element required".into()));
        }
        for (g, p) in perms.iter().enumerate() {
            let mut seen = vec![false; n_points];
            if p.len() != n_points || p.iter().any(|&x| x >= n_points || std::mem::replace(&mut seen[x], true)) {
                return Err(Error::Group(format!("element {} does not act by a permutation", group.names[g])));
            }
        }
        if perms[group.identity].iter().enumerate().any(|(x, &y)| x != y) {
            return Err(Error::Group("identity does not act trivially".into()));
        }
        for g in 0..group.order() {
            for h in 0..group.order() {
                let gh = group.mul(g, h);
                if (0..n_points).any(|x| perms[gh][x] != perms[g][perms[h][x]]) {
                    return Err(Error::Group(format!(
                        "action is not a homomorphism at ({}, {})",
                        group.names[g], group.names[h]
                    )));
                }
            }
        }
        Ok(Self { group, perms })
    }

    /// Action of `Z/m` whose generator acts by the permutation `step`.
    pub fn cyclic_from_step(step: Vec<usize>, m: usize) -> Result<Self> {
        let n = step.len();
        let mut perms = vec![(0..n).collect::<Vec<_>>()];
        for i in 1..m {
            let prev: &Vec<usize> = &perms[i - 1];
            perms.push((0..n).map(|x| step[prev[x]]).collect());
        }
        Self::new(FiniteGroup::cyclic(m), perms, n)
    }

    pub fn trivial(n_points: usize) -> Self {
        Self {
            group: FiniteGroup::cyclic(1),
            perms: vec![(0..n_points).collect()],
        }
    }
}

/// Largest metric below `d` with `d_G(x, g·x) ≤ |g|`: Dijkstra from every
/// point over metric moves (cost `d(x,y)`) and group moves (cost `|g|`).
pub fn warp_metric(space: &FiniteMetricSpace, action: &GroupAction) -> Result<FiniteMetricSpace> {
    let g = &action.group;
    if action.perms.first().map_or(0, Vec::len) != space.len() {
        return Err(Error::PointMismatch("action and space sizes differ".into()));
    }
    for h in 0..g.order() {
        if h != g.identity() && g.length(h) == 0 {
            return Err(Error::Group(format!("non-identity element {} has length 0", g.names[h])));
        }
    }
    let n = space.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|src| {
            let mut dist = vec![f64::INFINITY; n];
            let mut done = vec![false; n];
            dist[src] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((OrdF64(0.0), src)));
            while let Some(Reverse((OrdF64(du), u))) = heap.pop() {
                if done[u] {
                    continue;
                }
                done[u] = true;
                let relax = |v: usize, c: f64, dist: &mut Vec<f64>, heap: &mut BinaryHeap<Reverse<(OrdF64, usize)>>| {
                    if du + c < dist[v] {
                        dist[v] = du + c;
                        heap.push(Reverse((OrdF64(du + c), v)));
                    }
                };
                for v in 0..n {
                    relax(v, space.d(u, v), &mut dist, &mut heap);
                }
                for h in 0..g.order() {
                    if h != g.identity() {
                        relax(action.perms[h][u], f64::from(g.length(h)), &mut dist, &mut heap);
                    }
                }
            }
            dist
        })
        .collect();
    let ids = space.ids().to_vec();
    let out = FiniteMetricSpace::new(ids, rows)?;
    match space.blocks() {
        Some(b) => out.with_blocks(b.to_vec()),
        None => Ok(out),
    }
}

/// JSON form of a group action: one permutation per group element name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionJson {
    pub schema: String,
    pub permutations: BTreeMap<String, Vec<usize>>,
}

impl GroupAction {
    pub fn to_json_value(&self) -> ActionJson {
        ActionJson {
            schema: crate::SCHEMA.into(),
            permutations: self.group.names.iter().cloned().zip(self.perms.iter().cloned()).collect(),
        }
    }

    pub fn from_json_value(group: FiniteGroup, j: ActionJson, n_points: usize) -> Result<Self> {
        crate::io::check_schema(&j.schema, "$.schema")?;
        let mut perms = Vec::with_capacity(group.order());
        for name in &group.names {
            let p = j
                .permutations
                .get(name)
                .ok_or_else(|| Error::schema(format!("$.permutations.{name}"), "missing permutation"))?;
            perms.push(p.clone());
        }
        if let Some(extra) = j.permutations.keys().find(|k| !group.names.contains(k)) {
            return Err(Error::schema(format!("$.permutations.{extra}"), "not an element of the group"));
        }
        Self::new(group, perms, n_points).map_err(|e| Error::schema("$.permutations", e.to_string()))
    }
}

/// Averaged witness on the warped space with its measured parameters.
#[derive(Debug, Clone)]
pub struct WarpedWitness {
    pub space: FiniteMetricSpace,
    pub witness: LpWitness,
    /// `S_base + max |g|` over the support of the Følner function.
    pub support_bound: f64,
    pub report: WitnessReport,
}

/// `ν_x = Σ_g f(g) μ_{g·x}`, measured at scale `r` on the warped metric.
pub fn warped_witness(
    space: &FiniteMetricSpace,
    action: &GroupAction,
    folner: &FolnerFunction,
    base: &LpWitness,
    r: f64,
) -> Result<WarpedWitness> {
    let n = space.len();
    let g = &action.group;
    if base.p != 1.0 {
        return Err(Error::InvalidInput(format!("base witness must be ℓ¹, got p = {}", base.p)));
    }
    if base.xi.len() != n || action.perms.first().map_or(0, Vec::len) != n {
        return Err(Error::PointMismatch("space, action and base witness sizes differ".into()));
    }
    if folner.values.len() != g.order() {
        return Err(Error::PointMismatch("Følner function does not live on the acting group".into()));
    }
    for (x, v) in base.xi.iter().enumerate() {
        if v.iter().any(|&(y, _)| y >= n) {
            return Err(Error::PointMismatch(format!("base witness at {x} references a missing point")));
        }
        if (witness::lp_norm(v, 1.0) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("base witness at {x} does not have norm 1")));
        }
    }
    let warped = warp_metric(space, action)?;
    let s_base = (0..n).map(|x| witness::support_radius(space, x, &base.xi[x])).fold(0.0, f64::max);
    let reach = (0..g.order())
        .filter(|&h| folner.values[h] > 0.0)
        .map(|h| f64::from(g.length(h)))
        .fold(0.0, f64::max);
    let xi = (0..n)
        .map(|x| {
            (0..g.order())
                .filter(|&h| folner.values[h] > 0.0)
                .flat_map(|h| {
                    let w = folner.values[h];
                    base.xi[action.perms[h][x]].iter().map(move |&(y, a)| (y, w * a))
                })
                .collect()
        })
        .collect();
    let mut w = LpWitness::new(
        1.0,
        xi,
        witness::Params {
            r: Some(r),
            s: Some(s_base + reach),
            ..witness::Params::default()
        },
    )?;
    let wrapped = Witness::Lp(w.clone());
    witness::check_invariants(&wrapped, &warped)?;
    let report = witness::measure_witness(&wrapped, &warped, r)?;
    if report.s_measured > s_base + reach + warped.tol() {
        return Err(Error::Invariant(format!(
            "warped support radius {} exceeds {}",
            report.s_measured,
            s_base + reach
        )));
    }
    w.params.eps = report.eps_measured;
    Ok(WarpedWitness {
        space: warped,
        witness: w,
        support_bound: s_base + reach,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
