//! Witness builders: trees, Lipschitz partitions of covers, gluing, and
//! witnesses on products, unions and subspaces.

use serde::{Deserialize, Serialize};

use super::*;
use crate::error::{Error, Result};
use crate::metric::{self, Exponent, FiniteMetricSpace};

/// Output of [`tree_witness`].
#[derive(Debug, Clone)]
pub struct TreeWitness {
    pub family: AFamily,
    /// Length `⌊3R/ε⌋ + 1` of each untruncated set.
    pub set_len: usize,
    /// Points whose path to the boundary vertex was shorter than `set_len`.
    pub truncated: Vec<usize>,
}

impl TreeWitness {
    pub fn is_truncated(&self, v: usize) -> bool {
        self.truncated.binary_search(&v).is_ok()
    }
}

/// `2ε/(3−ε)`.
pub fn tree_ratio_bound(eps: f64) -> f64 {
    2.0 * eps / (3.0 - eps)
}

/// Checks that the metric is the path metric of a tree and returns the
/// neighbour lists (edges are pairs at distance 1).
pub fn tree_adjacency(space: &FiniteMetricSpace) -> Result<Vec<Vec<usize>>> {
    let n = space.len();
    if !space.is_integer_valued() {
        return Err(Error::InvalidInput("tree metrics are integer valued".into()));
    }
    let adj: Vec<Vec<usize>> = (0..n).map(|x| (0..n).filter(|&y| space.d(x, y) == 1.0).collect()).collect();
    let edges: usize = adj.iter().map(Vec::len).sum::<usize>() / 2;
    if n > 0 && edges != n - 1 {
        return Err(Error::InvalidInput(format!("{edges} edges on {n} vertices: graph has a cycle or is not a tree")));
    }
    let g = metric::graph_metric_from_lists(&adj).map_err(|_| Error::InvalidInput("edge graph is disconnected".into()))?;
    if (0..n).any(|x| g.row(x) != space.row(x)) {
        return Err(Error::InvalidInput("metric is not the path metric of its edge graph".into()));
    }
    Ok(adj)
}

/// A-family on a tree: `A_v` is the first `⌊3R/ε⌋+1` vertices of the
/// geodesic from `v` toward the last vertex of `ray`.
pub fn tree_witness(space: &FiniteMetricSpace, ray: &[usize], r: f64, eps: f64) -> Result<TreeWitness> {
    if !(eps > 0.0 && eps < 3.0) || !(r > 0.0) {
        return Err(Error::InvalidInput(format!("need R > 0 and 0 < ε < 3, got R = {r}, ε = {eps}")));
    }
    let adj = tree_adjacency(space)?;
    let n = space.len();
    let &boundary = ray.last().ok_or_else(|| Error::InvalidInput("empty ray".into()))?;
    for (i, &v) in ray.iter().enumerate() {
        if v >= n || space.d(ray[0], v) != i as f64 {
            return Err(Error::InvalidInput("ray is not a geodesic".into()));
        }
    }
    // parent pointers toward the boundary vertex
    let mut next = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    seen[boundary] = true;
    let mut q = std::collections::VecDeque::from([boundary]);
    while let Some(u) = q.pop_front() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                next[w] = u;
                q.push_back(w);
            }
        }
    }
    let set_len = (3.0 * r / eps + 1e-12).floor() as usize + 1;
    let mut sets = Vec::with_capacity(n);
    let mut truncated = Vec::new();
    for v in 0..n {
        let mut set = Vec::with_capacity(set_len);
        let mut u = v;
        loop {
            set.push((u, 1));
            if set.len() == set_len || u == boundary {
                break;
            }
            u = next[u];
        }
        if set.len() < set_len {
            truncated.push(v);
        }
        sets.push(set);
    }
    let family = AFamily::new(
        sets,
        Params {
            r: Some(r),
            eps: Some(tree_ratio_bound(eps)),
            s: Some((set_len - 1) as f64),
            ..Params::default()
        },
    )?;
    Ok(TreeWitness {
        family,
        set_len,
        truncated,
    })
}

/// Diagnostics of a cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverStats {
    /// Largest number of cover sets containing one point.
    pub multiplicity: usize,
    /// `min_x max_i ℓ(x, U_i)` with `ℓ(x, U)` the largest realized distance
    /// from `x` below `d(x, X∖U)`, so that `B̄(x, ℓ) ⊆ U`.
    pub lebesgue: f64,
    /// `(2k+2)(2k+3)/L`.
    pub lipschitz_bound: f64,
}

fn dist_to_complement(space: &FiniteMetricSpace, x: usize, member: &[bool]) -> f64 {
    (0..space.len())
        .filter(|&y| !member[y])
        .map(|y| space.d(x, y))
        .fold(f64::INFINITY, f64::min)
}

pub fn cover_stats(space: &FiniteMetricSpace, cover: &[Vec<usize>]) -> Result<CoverStats> {
    let n = space.len();
    let members: Vec<Vec<bool>> = cover
        .iter()
        .map(|u| {
            let mut m = vec![false; n];
            for &x in u {
                m[x] = true;
            }
            m
        })
        .collect();
    let outside = space.diameter() + 1.0;
    let t = space.tol();
    let mut multiplicity = 0;
    let mut lebesgue = f64::INFINITY;
    for x in 0..n {
        let k = members.iter().filter(|m| m[x]).count();
        if k == 0 {
            return Err(Error::InvalidInput(format!("point {x} is not covered")));
        }
        multiplicity = multiplicity.max(k);
        let best = members
            .iter()
            .filter(|m| m[x])
            .map(|m| {
                let dc = dist_to_complement(space, x, m).min(outside);
                (0..n).map(|y| space.d(x, y)).filter(|&d| d < dc - t).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if best <= 0.0 {
            return Err(Error::ZeroLebesgue(x));
        }
        lebesgue = lebesgue.min(best);
    }
    let k = multiplicity as f64;
    Ok(CoverStats {
        multiplicity,
        lebesgue,
        lipschitz_bound: (2.0 * k + 2.0) * (2.0 * k + 3.0) / lebesgue,
    })
}

/// Distance-quotient partition `φ_i(x) = d(x, X∖U_i) / Σ_j d(x, X∖U_j)`,
/// with `d(x, ∅) = diam + 1`.
pub fn lipschitz_partition(space: &FiniteMetricSpace, cover: &[Vec<usize>], r: f64, eps: f64) -> Result<(PartitionWitness, CoverStats)> {
    let stats = cover_stats(space, cover)?;
    let n = space.len();
    let outside = space.diameter() + 1.0;
    let raw: Vec<Vec<f64>> = cover
        .iter()
        .map(|u| {
            let mut m = vec![false; n];
            for &x in u {
                m[x] = true;
            }
            (0..n).map(|x| if m[x] { dist_to_complement(space, x, &m).min(outside) } else { 0.0 }).collect()
        })
        .collect();
    let totals: Vec<f64> = (0..n).map(|x| raw.iter().map(|f| f[x]).sum()).collect();
    let phi = raw.into_iter().map(|f| (0..n).map(|x| f[x] / totals[x]).collect()).collect();
    let w = PartitionWitness::new(
        cover.to_vec(),
        phi,
        Params {
            r: Some(r),
            eps: Some(eps),
            ..Params::default()
        },
    )?;
    Ok((w, stats))
}

/// `{x : d(x, U) ≤ r}` in index order.
pub fn expand(space: &FiniteMetricSpace, u: &[usize], r: f64) -> Vec<usize> {
    let t = space.tol();
    (0..space.len()).filter(|&x| u.iter().any(|&y| space.d(x, y) <= r + t)).collect()
}

/// Result of gluing, with the measured ingredients of the additive bound.
#[derive(Debug, Clone)]
pub struct Glued {
    pub witness: PartitionWitness,
    pub eps_outer: f64,
    pub eps_local: f64,
}

/// `θ_ij = φ_i · ψ_i^j`, where `locals[i]` is a partition of unity on the
/// subspace `U_i(R)` (points in increasing index order).
pub fn glue_witness(space: &FiniteMetricSpace, outer: &PartitionWitness, locals: &[PartitionWitness], r: f64) -> Result<Glued> {
    if locals.len() != outer.cover.len() {
        return Err(Error::InvalidInput(format!(
            "{} local witnesses for {} cover sets",
            locals.len(),
            outer.cover.len()
        )));
    }
    let n = space.len();
    let eps_outer = measure_witness(&Witness::Partition(outer.clone()), space, r)?.eps();
    let mut eps_local: f64 = 0.0;
    let mut cover = Vec::new();
    let mut phi = Vec::new();
    for (i, (u, local)) in outer.cover.iter().zip(locals).enumerate() {
        let ex = expand(space, u, r);
        let sub = space.subspace(&ex);
        if local.n_points() != ex.len() {
            return Err(Error::PointMismatch(format!(
                "local witness {i} has {} points, U_{i}(R) has {}",
                local.n_points(),
                ex.len()
            )));
        }
        eps_local = eps_local.max(measure_witness(&Witness::Partition(local.clone()), &sub, r)?.eps());
        for (v, psi) in local.cover.iter().zip(&local.phi) {
            let mut theta = vec![0.0; n];
            for (a, &x) in ex.iter().enumerate() {
                theta[x] = outer.phi[i][x] * psi[a];
            }
            let in_u: Vec<usize> = v.iter().map(|&a| ex[a]).filter(|x| u.binary_search(x).is_ok()).collect();
            if !in_u.is_empty() && theta.iter().any(|&t| t != 0.0) {
                cover.push(in_u);
                phi.push(theta);
            }
        }
    }
    let witness = PartitionWitness::new(
        cover,
        phi,
        Params {
            r: Some(r),
            eps: Some(eps_outer + eps_local),
            ..Params::default()
        },
    )?;
    Ok(Glued {
        witness,
        eps_outer,
        eps_local,
    })
}

/// Inputs for [`derived_space_witness`].
#[derive(Debug, Clone)]
pub enum Derived<'a> {
    Product {
        x: &'a FiniteMetricSpace,
        wx: &'a PartitionWitness,
        y: &'a FiniteMetricSpace,
        wy: &'a PartitionWitness,
        p: Exponent,
    },
    Union {
        space: &'a FiniteMetricSpace,
        /// Point sets `X_i` (may overlap) covering the space.
        pieces: &'a [Vec<usize>],
        /// Partition witness on each `X_i` (as a subspace, index order).
        witnesses: &'a [PartitionWitness],
        expansion: f64,
        r: f64,
    },
    Subspace {
        space: &'a FiniteMetricSpace,
        witness: &'a PartitionWitness,
        sub: &'a FiniteMetricSpace,
        /// Inclusion `sub → space`.
        inclusion: &'a [usize],
    },
}

/// A derived witness with the space it lives on and its stated bound.
#[derive(Debug, Clone)]
pub struct DerivedWitness {
    pub space: FiniteMetricSpace,
    pub witness: PartitionWitness,
    /// Upper bound on the measured variation at the construction's scale
    /// (`None` when the construction has no scale).
    pub eps_bound: Option<f64>,
}

pub fn derived_space_witness(input: Derived<'_>) -> Result<DerivedWitness> {
    match input {
        Derived::Product { x, wx, y, wy, p } => product_witness(x, wx, y, wy, p),
        Derived::Union {
            space,
            pieces,
            witnesses,
            expansion,
            r,
        } => union_witness(space, pieces, witnesses, expansion, r),
        Derived::Subspace {
            space,
            witness,
            sub,
            inclusion,
        } => subspace_witness(space, witness, sub, inclusion),
    }
}

/// Tensor partition `{φ_i(x)·ψ_j(y)}` on the ℓᵖ product.
pub fn product_witness(x: &FiniteMetricSpace, wx: &PartitionWitness, y: &FiniteMetricSpace, wy: &PartitionWitness, p: Exponent) -> Result<DerivedWitness> {
    let space = metric::lp_product(x, y, p)?;
    let ny = y.len();
    let mut cover = Vec::new();
    let mut phi = Vec::new();
    for (u, f) in wx.cover.iter().zip(&wx.phi) {
        for (v, g) in wy.cover.iter().zip(&wy.phi) {
            cover.push(u.iter().flat_map(|&a| v.iter().map(move |&b| a * ny + b)).collect());
            phi.push((0..space.len()).map(|i| f[i / ny] * g[i % ny]).collect());
        }
    }
    let eps_bound = match (wx.params.r, wy.params.r) {
        (Some(rx), Some(ry)) if rx == ry => {
            let ex = measure_witness(&Witness::Partition(wx.clone()), x, rx)?.eps();
            let ey = measure_witness(&Witness::Partition(wy.clone()), y, ry)?.eps();
            Some(ex + ey)
        }
        _ => None,
    };
    let r = wx.params.r.filter(|_| eps_bound.is_some());
    let witness = PartitionWitness::new(cover, phi, Params { r, eps: eps_bound, ..Params::default() })?;
    Ok(DerivedWitness {
        space,
        witness,
        eps_bound,
    })
}

/// Lowest-index nearest point of `piece` to each point of `pts`.
fn nearest(space: &FiniteMetricSpace, pts: &[usize], piece: &[usize]) -> Vec<usize> {
    pts.iter()
        .map(|&x| {
            let mut best = 0;
            for (k, &y) in piece.iter().enumerate() {
                if space.d(x, y) < space.d(x, piece[best]) {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Expands each piece by `L`, partitions the expanded cover, pulls the
/// piece witnesses back along nearest-point projection and glues.
pub fn union_witness(space: &FiniteMetricSpace, pieces: &[Vec<usize>], witnesses: &[PartitionWitness], expansion: f64, r: f64) -> Result<DerivedWitness> {
    if !(expansion > 0.0) {
        return Err(Error::InvalidInput(format!("expansion L = {expansion} must be positive")));
    }
    if pieces.len() != witnesses.len() {
        return Err(Error::InvalidInput("one witness per piece required".into()));
    }
    let cover: Vec<Vec<usize>> = pieces.iter().map(|p| expand(space, p, expansion)).collect();
    let (outer, stats) = lipschitz_partition(space, &cover, r, f64::INFINITY)?;
    let mut locals = Vec::with_capacity(pieces.len());
    for (i, (piece, w)) in pieces.iter().zip(witnesses).enumerate() {
        if w.n_points() != piece.len() {
            return Err(Error::PointMismatch(format!("witness {i} does not match its piece")));
        }
        let ex = expand(space, &cover[i], r);
        let proj = nearest(space, &ex, piece);
        let phi: Vec<Vec<f64>> = w.phi.iter().map(|f| proj.iter().map(|&k| f[k]).collect()).collect();
        let local_cover = w
            .cover
            .iter()
            .map(|v| (0..ex.len()).filter(|&a| v.binary_search(&proj[a]).is_ok()).collect())
            .collect();
        locals.push(PartitionWitness::new(local_cover, phi, Params::default())?);
    }
    let glued = glue_witness(space, &outer, &locals, r)?;
    let outer_bound = stats.lipschitz_bound * r;
    Ok(DerivedWitness {
        space: space.clone(),
        witness: glued.witness,
        eps_bound: Some(outer_bound.min(2.0) + glued.eps_local),
    })
}

/// Pulls a partition back along an isometric inclusion.
pub fn subspace_witness(space: &FiniteMetricSpace, w: &PartitionWitness, sub: &FiniteMetricSpace, inclusion: &[usize]) -> Result<DerivedWitness> {
    if inclusion.len() != sub.len() || inclusion.iter().any(|&x| x >= space.len()) {
        return Err(Error::PointMismatch("inclusion is not total".into()));
    }
    let t = space.tol().max(sub.tol());
    for a in 0..sub.len() {
        for b in 0..sub.len() {
            if (sub.d(a, b) - space.d(inclusion[a], inclusion[b])).abs() > t {
                return Err(Error::InvalidInput(format!("inclusion is not isometric at ({a}, {b})")));
            }
        }
    }
    let mut cover = Vec::new();
    let mut phi = Vec::new();
    for (u, f) in w.cover.iter().zip(&w.phi) {
        let v: Vec<usize> = (0..sub.len()).filter(|&a| u.binary_search(&inclusion[a]).is_ok()).collect();
        let g: Vec<f64> = inclusion.iter().map(|&x| f[x]).collect();
        if !v.is_empty() && g.iter().any(|&a| a != 0.0) {
            cover.push(v);
            phi.push(g);
        }
    }
    let eps_bound = match w.params.r {
        Some(r) => Some(measure_witness(&Witness::Partition(w.clone()), space, r)?.eps()),
        None => None,
    };
    let witness = PartitionWitness::new(cover, phi, w.params.clone())?;
    Ok(DerivedWitness {
        space: sub.clone(),
        witness,
        eps_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::gen;
    use num_rational::Ratio;

    fn interval(a: usize, b: usize) -> Vec<usize> {
        (a..=b).collect()
    }

    #[test]
    fn segment_tree_example() {
        let seg = gen::path(21);
        let ray: Vec<usize> = (0..21).collect();
        let tw = tree_witness(&seg, &ray, 2.0, 1.0).unwrap();
        assert_eq!(tw.set_len, 7);
        assert_eq!(tw.family.sets[3].len(), 7);
        assert_eq!(tw.family.sym_diff_and_meet(3, 5), (4, 5));
        assert_eq!(tw.family.sym_diff_and_meet(4, 4), (0, 7));
        assert!(tw.is_truncated(20) && !tw.is_truncated(14));
    }

    #[test]
    fn binary_tree_adjacent_ratios() {
        let t = gen::tree(2, 6);
        // ray from the root down the leftmost branch
        let mut ray = vec![0];
        for _ in 0..6 {
            ray.push(2 * ray.last().unwrap() + 1);
        }
        let tw = tree_witness(&t, &ray, 1.0, 0.5).unwrap();
        let bound = Ratio::new(2 * 1, 5); // 2ε/(3−ε) at ε = 1/2, as a ratio of integers: 1/2.5 = 2/5
        for v in 0..t.len() {
            for w in 0..t.len() {
                if t.d(v, w) == 1.0 && !tw.is_truncated(v) && !tw.is_truncated(w) {
                    let (sd, meet) = tw.family.sym_diff_and_meet(v, w);
                    assert!(Ratio::new(sd, meet) <= bound);
                }
            }
        }
    }

    #[test]
    fn tree_witness_rejects_cycles() {
        let c = gen::cycle(5);
        assert!(matches!(tree_witness(&c, &[0, 1], 1.0, 0.5), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn lipschitz_partition_examples() {
        let seg = gen::path(11);
        let (w, st) = lipschitz_partition(&seg, &[interval(0, 10)], 1.0, 0.1).unwrap();
        assert!(w.phi[0].iter().all(|&v| v == 1.0));
        assert_eq!(st.multiplicity, 1);

        let (w, st) = lipschitz_partition(&seg, &[interval(0, 7), interval(3, 10)], 1.0, 0.1).unwrap();
        assert_eq!((st.multiplicity, st.lebesgue, st.lipschitz_bound), (2, 2.0, 21.0));
        for x in 0..11 {
            assert!((w.phi[0][x] + w.phi[1][x] - 1.0).abs() < 1e-12);
            for y in 0..11 {
                let var: f64 = w.phi.iter().map(|f| (f[x] - f[y]).abs()).sum();
                assert!(var <= 21.0 * seg.d(x, y) + 1e-12);
            }
        }

        let blocks = metric::separated_union(&[gen::path(3), gen::path(3)], metric::GapPolicy::MaxDiamPlusOne).unwrap();
        let (w, _) = lipschitz_partition(&blocks, &[interval(0, 2), interval(3, 5)], 1.0, 0.1).unwrap();
        assert_eq!(w.phi[0], vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_lebesgue_is_rejected() {
        let seg = gen::path(4);
        let err = lipschitz_partition(&seg, &[interval(0, 1), interval(2, 3)], 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::ZeroLebesgue(_)));
    }

    #[test]
    fn glue_examples() {
        let seg = gen::path(9);
        let local = PartitionWitness::trivial(9);
        let g = glue_witness(&seg, &PartitionWitness::trivial(9), &[local.clone()], 1.0).unwrap();
        assert_eq!(g.witness.phi, local.phi);

        let blocks = metric::separated_union(&[gen::path(3), gen::path(3)], metric::GapPolicy::MaxDiamPlusOne).unwrap();
        let (outer, _) = lipschitz_partition(&blocks, &[interval(0, 2), interval(3, 5)], 1.0, 0.1).unwrap();
        let g = glue_witness(&blocks, &outer, &[PartitionWitness::trivial(3), PartitionWitness::trivial(3)], 1.0).unwrap();
        assert_eq!(g.witness.phi[0], vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(g.witness.phi[1], vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);

        for r in [1.0, 2.0, 3.0] {
            let cover = [interval(0, 5), interval(3, 8)];
            let (outer, _) = lipschitz_partition(&seg, &cover, r, 1.0).unwrap();
            let locals: Vec<PartitionWitness> = cover
                .iter()
                .map(|u| {
                    let ex = expand(&seg, u, r);
                    let sub = seg.subspace(&ex);
                    let m = ex.len();
                    lipschitz_partition(&sub, &[(0..m / 2 + 1).collect(), (m / 2 - 1..m).collect()], r, 1.0).unwrap().0
                })
                .collect();
            let g = glue_witness(&seg, &outer, &locals, r).unwrap();
            let rep = measure_witness(&Witness::Partition(g.witness.clone()), &seg, r).unwrap();
            assert!(rep.norm_deviation < 1e-12);
            assert!(rep.eps() <= g.eps_outer + g.eps_local + 1e-12);
        }
    }

    #[test]
    fn glue_requires_every_local() {
        let seg = gen::path(4);
        assert!(glue_witness(&seg, &PartitionWitness::trivial(4), &[], 1.0).is_err());
    }

    #[test]
    fn derived_examples() {
        let a = gen::path(3);
        let b = gen::cycle(4);
        let d = derived_space_witness(Derived::Product {
            x: &a,
            wx: &PartitionWitness::trivial(3),
            y: &b,
            wy: &PartitionWitness::trivial(4),
            p: Exponent::Finite(1.0),
        })
        .unwrap();
        assert_eq!(d.witness.cover.len(), 1);
        assert!(d.witness.phi[0].iter().all(|&v| v == 1.0));

        let sub = a.subspace(&[0, 2]);
        let d = subspace_witness(&a, &PartitionWitness::trivial(3), &sub, &[0, 2]).unwrap();
        assert_eq!(d.witness.phi, vec![vec![1.0, 1.0]]);
        assert!(subspace_witness(&a, &PartitionWitness::trivial(3), &gen::path(2), &[0, 2]).is_err());

        // two segments sharing point 5 inside a 0..10 segment
        let seg = gen::path(11);
        let pieces = vec![interval(0, 5), interval(5, 10)];
        let ws: Vec<PartitionWitness> = pieces.iter().map(|p| PartitionWitness::trivial(p.len())).collect();
        let d = union_witness(&seg, &pieces, &ws, 2.0, 1.0).unwrap();
        let rep = measure_witness(&Witness::Partition(d.witness.clone()), &seg, 1.0).unwrap();
        assert!(rep.eps().is_finite());
        assert!(rep.eps() <= d.eps_bound.unwrap() + 1e-12);
        assert!(union_witness(&seg, &pieces, &ws, 0.0, 1.0).is_err());
    }
}
