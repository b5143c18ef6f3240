//! End-to-end acceptance checks. Run with
//! `cargo test -p coarselab --test acceptance`; prints one line per criterion
//! and exits nonzero if any criterion fails.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coarselab::amenability::{diam_table, growth_experiment, DiamForm, DiamTarget};
use coarselab::group::{self, FiniteGroup, GroupAction, QuotientChain};
use coarselab::kernel::{classify_kernel, embed_from_kernel, EmbedMode, Kernel};
use coarselab::metric::{self, gen, FiniteMetricSpace, PointMap};
use coarselab::spectral::{self, RegularGraph};
use coarselab::witness::{
    self, check_invariants, convert_witness, measure_witness, ConvertParams, Form, KernelWitness, LpWitness, Params,
    Witness,
};
use coarselab::{linalg, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn corpus_spaces() -> Vec<(String, FiniteMetricSpace)> {
    let mut v: Vec<(String, FiniteMetricSpace)> = Vec::new();
    for n in [5, 6, 8, 10, 12] {
        v.push((format!("cycle{n}"), gen::cycle(n)));
    }
    for n in [4, 6, 8, 10, 12] {
        v.push((format!("path{n}"), gen::path(n)));
    }
    for (b, d) in [(2, 1), (2, 2), (3, 1), (4, 1), (11, 1)] {
        v.push((format!("tree{b}x{d}"), gen::tree(b, d)));
    }
    for k in 1..=3 {
        v.push((format!("cube{k}"), gen::hypercube(k)));
    }
    for (n, d, seed) in [(8, 3, 0), (8, 3, 1), (10, 3, 0), (10, 3, 1), (12, 3, 0), (12, 3, 1), (12, 4, 0)] {
        let g = spectral::random_regular_graph(n, d, seed).expect("random regular graph");
        v.push((format!("rr{n}d{d}s{seed}"), metric::graph_metric_from_lists(g.lists()).expect("connected")));
    }
    v
}

/// Runs one conversion and checks its output against the degradation table.
fn step(w: &Witness, space: &FiniteMetricSpace, to: Form, params: &ConvertParams, log: &mut Vec<String>) -> Option<(Witness, FiniteMetricSpace)> {
    let res = convert_witness(w, space, to, params).and_then(|c| {
        c.verify(space, params.r)?;
        Ok(c)
    });
    match res {
        Ok(c) => {
            let s = c.space.clone().unwrap_or_else(|| space.clone());
            Some((c.witness, s))
        }
        Err(e) => {
            log.push(format!("{} -> {}: {e}", w.form().name(), to.name()));
            None
        }
    }
}

fn criterion_1() -> Outcome {
    let spaces = corpus_spaces();
    let mut failures = Vec::new();
    let mut checked = 0;
    for (name, space) in &spaces {
        for s in [1.0, 2.0] {
            let mut log = Vec::new();
            let base = Witness::Lp(LpWitness::uniform_balls(space, s, 1.0).expect("ball witness"));
            let mut params = ConvertParams::at_scale(1.0);
            params.q = Some(2.0);
            let table = metric::bounded_geometry_stats(space, &space.distance_values()).expect("table");
            // quantization needs an explicit M when the input does not vary
            if measure_witness(&base, space, 1.0).expect("measure").eps() == 0.0 {
                params.m = Some(100 * table.iter().map(|e| e.1 as u64).max().unwrap_or(1));
            }
            params.n_table = Some(table);
            // 2 -> 2 (q = 2) -> 4 -> 5 -> 8 -> 2
            if let Some((l2, _)) = step(&base, space, Form::Lp, &params, &mut log) {
                if let Some((v, _)) = step(&l2, space, Form::Vector, &params, &mut log) {
                    if let Some((k, _)) = step(&v, space, Form::Kernel, &params, &mut log) {
                        step(&k, space, Form::Lp, &params, &mut log);
                        checked += 1;
                    }
                    checked += 1;
                }
                checked += 2;
            }
            // 2 -> 1 -> 2
            if let Some((a, _)) = step(&base, space, Form::AFamily, &params, &mut log) {
                step(&a, space, Form::Lp, &params, &mut log);
                checked += 2;
            }
            // 2 -> 3 -> 3 (fixed tail) -> 2
            if let Some((t, _)) = step(&base, space, Form::Tail, &params, &mut log) {
                if let Some((ft, _)) = step(&t, space, Form::Tail, &params, &mut log) {
                    step(&ft, space, Form::Lp, &params, &mut log);
                    checked += 1;
                }
                checked += 2;
            }
            // 2 -> 6 -> 2
            if let Some((p, _)) = step(&base, space, Form::Partition, &params, &mut log) {
                step(&p, space, Form::Lp, &params, &mut log);
                checked += 2;
            }
            failures.extend(log.into_iter().map(|l| format!("{name} S={s}: {l}")));
        }
    }
    let detail = format!("{} spaces, {checked} conversions, {} violations", spaces.len(), failures.len());
    match failures.first() {
        None => outcome(spaces.len() == 25, detail),
        Some(f) => outcome(false, format!("{detail}; first: {f}")),
    }
}

fn criterion_2() -> Outcome {
    let mut trees: Vec<(String, FiniteMetricSpace)> = Vec::new();
    for n in [2, 5, 16, 33, 64] {
        trees.push((format!("segment{n}"), gen::path(n)));
    }
    for depth in 1..=5 {
        trees.push((format!("binary{depth}"), gen::tree(2, depth)));
    }
    let mut pairs = 0usize;
    let mut bad = Vec::new();
    for (name, t) in &trees {
        let far = (0..t.len()).max_by(|&a, &b| t.d(0, a).total_cmp(&t.d(0, b))).unwrap();
        let mut ray: Vec<usize> = (0..t.len()).filter(|&v| t.d(0, v) + t.d(v, far) == t.d(0, far)).collect();
        ray.sort_by(|&a, &b| t.d(0, a).total_cmp(&t.d(0, b)));
        for r in [1u32, 2, 4] {
            // ε = e4 / 4
            for e4 in [1i64, 2, 4] {
                let eps = e4 as f64 / 4.0;
                let tw = match witness::tree_witness(t, &ray, f64::from(r), eps) {
                    Ok(w) => w,
                    Err(e) => {
                        bad.push(format!("{name}: {e}"));
                        continue;
                    }
                };
                for x in 0..t.len() {
                    for y in (x + 1)..t.len() {
                        if t.d(x, y) > f64::from(r) || tw.is_truncated(x) || tw.is_truncated(y) {
                            continue;
                        }
                        pairs += 1;
                        let (sd, meet) = tw.family.sym_diff_and_meet(x, y);
                        // sd/meet ≤ 2ε/(3−ε)  ⇔  sd·(12 − e4) ≤ 2·e4·meet
                        if (sd as i64) * (12 - e4) > 2 * e4 * meet as i64 {
                            bad.push(format!("{name} R={r} ε={eps} ({x},{y}): {sd}/{meet}"));
                        }
                    }
                }
            }
        }
    }
    outcome(bad.is_empty() && pairs > 0, format!("{} trees, {pairs} pairs, {} violations{}", trees.len(), bad.len(), first(&bad)))
}

fn first(v: &[String]) -> String {
    v.first().map(|s| format!("; first: {s}")).unwrap_or_default()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for trial in 0..100 {
        let n = rng.gen_range(2..=10);
        let dim = rng.gen_range(1..=5);
        let pts = random_points(&mut rng, n, dim);
        let k = Kernel::from_fn(n, |i, j| sq_dist(&pts[i], &pts[j])).expect("kernel");
        match embed_from_kernel(&k, EmbedMode::Negative, 1e-9) {
            Ok(e) => {
                for i in 0..n {
                    for j in 0..n {
                        worst = worst.max((e.sq_distance(i, j) - k.get(i, j)).abs());
                    }
                }
            }
            Err(err) => bad.push(format!("trial {trial}: {err}")),
        }
    }
    outcome(bad.is_empty() && worst <= 1e-8, format!("100 kernels, max entry error {worst:.2e}{}", first(&bad)))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ts: Vec<f64> = (-4..=4).map(|e| 2f64.powi(e)).collect();
    let tol = 1e-8;
    let (mut agree, mut neg) = (0, 0);
    let mut bad = Vec::new();
    for trial in 0..200 {
        let n = rng.gen_range(2..=8);
        let dim = rng.gen_range(1..=4);
        let m = match trial % 3 {
            0 => {
                let pts = random_points(&mut rng, n, dim);
                DMatrix::from_fn(n, n, |i, j| sq_dist(&pts[i], &pts[j]))
            }
            1 => {
                let pts = random_points(&mut rng, n, dim);
                let a: f64 = rng.gen_range(0.2..2.0);
                DMatrix::from_fn(n, n, |i, j| sq_dist(&pts[i], &pts[j]).powf(a / 2.0))
            }
            _ => {
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = rng.gen_range(0.0..3.0);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                m
            }
        };
        let k = Kernel::new(m.clone()).expect("kernel");
        let is_neg = classify_kernel(&k, tol).expect("classify").negative_type;
        let all_pt = ts.iter().all(|&t| {
            let e = Kernel::new(m.map(|v| (-t * v).exp())).expect("kernel");
            classify_kernel(&e, tol).expect("classify").positive_type
        });
        neg += usize::from(is_neg);
        if is_neg == all_pt {
            agree += 1;
        } else {
            let c = classify_kernel(&k, tol).expect("classify");
            // largest t = 2^-j at which e^(-tk) fails, below the grid
            let witness_t = (5..=30).map(|j| 2f64.powi(-j)).find(|&t| {
                let e = Kernel::new(m.map(|v| (-t * v).exp())).expect("kernel");
                !classify_kernel(&e, tol).expect("classify").positive_type
            });
            bad.push(format!(
                "trial {trial} (n = {n}): negative type {is_neg} (mean-zero form max {:.3e}), e^(-tk) PSD on the whole t grid {all_pt}, first failing t below the grid {witness_t:?}",
                c.max_mean_zero_form
            ));
        }
    }
    outcome(agree == 200, format!("{agree}/200 agree ({neg} negative type){}", first(&bad)))
}

fn corpus_graphs() -> Vec<(String, RegularGraph)> {
    let mut v = Vec::new();
    for n in [3, 6, 9, 12] {
        v.push((format!("C{n}"), RegularGraph::from_lists(gen::cycle_adjacency(n)).unwrap()));
    }
    for n in [4, 7] {
        let lists = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        v.push((format!("K{n}"), RegularGraph::from_lists(lists).unwrap()));
    }
    for k in 2..=4 {
        v.push((format!("Q{k}"), RegularGraph::cayley(&FiniteGroup::z2_pow(k)).unwrap()));
    }
    for m in [3, 5, 8] {
        v.push((format!("D{m}"), RegularGraph::cayley(&FiniteGroup::dihedral(m)).unwrap()));
    }
    for (n, d, seed) in [(16, 3, 0), (32, 3, 1), (64, 3, 2), (20, 4, 3)] {
        v.push((format!("rr{n}d{d}"), spectral::random_regular_graph(n, d, seed).unwrap()));
    }
    v
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let graphs = corpus_graphs();
    let mut bad = Vec::new();
    let mut worst_eq: f64 = 0.0;
    for (name, g) in &graphs {
        let spec = spectral::laplacian_gap(g).expect("gap");
        for _ in 0..1000 {
            let f: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c = spectral::poincare_check(g, &spec, &f).expect("poincare");
            if c.lhs > c.rhs + 1e-9 {
                bad.push(format!("{name}: {} > {}", c.lhs, c.rhs));
            }
        }
        let c = spectral::poincare_check(g, &spec, &spec.eigenvector).expect("poincare");
        worst_eq = worst_eq.max((c.lhs - c.rhs).abs());
    }
    outcome(
        bad.is_empty() && worst_eq <= 1e-8,
        format!("{} graphs x 1000 functions, {} violations, eigenvector gap {worst_eq:.2e}{}", graphs.len(), bad.len(), first(&bad)),
    )
}

/// Rescales coordinates so the largest edge displacement is `c`.
fn rescale(g: &RegularGraph, coords: &mut [Vec<f64>], c: f64) {
    let m = g.edges().iter().map(|&(v, w)| sq_dist(&coords[v], &coords[w]).sqrt()).fold(0.0, f64::max);
    if m > 0.0 {
        coords.iter_mut().flatten().for_each(|x| *x *= c / m);
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let c = 1.0;
    let mut runs = 0;
    let mut fails = Vec::new();
    let mut min_margin_degree = usize::MAX;
    let mut lambdas = Vec::new();
    for (i, n) in [16usize, 32, 64, 128].into_iter().enumerate() {
        let g = spectral::random_regular_graph(n, 3, 60 + i as u64).expect("graph");
        let spec = spectral::laplacian_gap(&g).expect("gap");
        lambdas.push(format!("λ({n})={:.3}", spec.lambda));
        let eig = linalg::sym_eigen(&g.laplacian());
        let mut embeddings: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
        for dim in [1, 2, 3] {
            let coords = (0..n).map(|x| (1..=dim).map(|j| eig.vectors[(x, j)]).collect()).collect();
            embeddings.push((format!("spectral{dim}"), coords));
        }
        // random functions smoothed by the lazy walk
        let walk = DMatrix::identity(n, n) - g.laplacian() / (2.0 * g.degree() as f64);
        for trial in 0..8 {
            let dim = 1 + trial % 3;
            let mut m = DMatrix::from_fn(n, dim, |_, _| rng.gen_range(-1.0..1.0));
            for _ in 0..(1 + trial) {
                m = &walk * m;
            }
            let coords = (0..n).map(|x| (0..dim).map(|j| m[(x, j)]).collect()).collect();
            embeddings.push((format!("smooth{trial}"), coords));
        }
        for (name, mut coords) in embeddings {
            rescale(&g, &mut coords, c);
            let rep = spectral::concentration_test(&g, spec.lambda, &coords, c).expect("concentration");
            runs += 1;
            min_margin_degree = min_margin_degree.min(rep.inside_degree_radius);
            if !rep.holds {
                fails.push(format!("n={n} {name}: {}/{n} inside radius {:.3}", rep.inside, rep.radius));
            }
        }
    }
    outcome(
        fails.is_empty(),
        format!("{runs} embeddings ({}), {} failures{}", lambdas.join(" "), fails.len(), first(&fails)),
    )
}

fn criterion_7() -> Outcome {
    let mut groups: Vec<(String, FiniteGroup)> = Vec::new();
    for n in 3..=12 {
        groups.push((format!("Z{n}"), FiniteGroup::cyclic(n)));
    }
    for k in 1..=4 {
        groups.push((format!("Z2^{k}"), FiniteGroup::z2_pow(k)));
    }
    for m in 3..=8 {
        groups.push((format!("D{m}"), FiniteGroup::dihedral(m)));
    }
    let mut bad = Vec::new();
    let mut subsets = 0u64;
    for (name, g) in &groups {
        let res: Result<()> = (|| {
            let graph = RegularGraph::cayley(g)?;
            let k = spectral::kazhdan_gap(&graph)?;
            let check = spectral::expansion_inequality(graph.lists(), k.eps)?;
            subsets += check.subsets_checked;
            if !check.exhaustive {
                bad.push(format!("{name}: enumeration not exhaustive"));
            }
            if let Some(v) = check.violations.first() {
                bad.push(format!("{name}: subset {v:?} violates the inequality at ε = {}", k.eps));
            }
            Ok(())
        })();
        if let Err(e) = res {
            bad.push(format!("{name}: {e}"));
        }
    }
    outcome(bad.is_empty(), format!("{} groups, {subsets} subsets, {} violations{}", groups.len(), bad.len(), first(&bad)))
}

fn criterion_8() -> Outcome {
    let groups = [
        ("Z2", FiniteGroup::cyclic(2)),
        ("Z3", FiniteGroup::cyclic(3)),
        ("Z4", FiniteGroup::cyclic(4)),
        ("Z2^2", FiniteGroup::z2_pow(2)),
    ];
    let rs = [1.0, 2.0];
    let eps = [0.25, 0.5, 1.0];
    let mut bad = Vec::new();
    let mut cells = 0;
    let mut anchors = (None, None);
    for (name, g) in &groups {
        let f = diam_table(DiamTarget::Group(g), DiamForm::F, name, &rs, &eps, Some(true));
        let a = diam_table(DiamTarget::Group(g), DiamForm::A, name, &rs, &eps, Some(true));
        match (f, a) {
            (Ok(f), Ok(a)) => {
                for (x, y) in f.entries.iter().zip(&a.entries) {
                    cells += 1;
                    if x.s != y.s {
                        bad.push(format!("{name} R={} ε={}: F={} A={}", x.r, x.eps, x.s, y.s));
                    }
                }
                match *name {
                    "Z2" => anchors.0 = f.get(1.0, 0.5),
                    "Z2^2" => anchors.1 = f.get(1.0, 0.5),
                    _ => {}
                }
            }
            (Err(e), _) | (_, Err(e)) => bad.push(format!("{name}: {e}")),
        }
    }
    let anchors_ok = anchors == (Some(1), Some(2));
    outcome(
        bad.is_empty() && anchors_ok,
        format!("{cells} cells, {} mismatches, anchors (Z2, Z2^2) = {anchors:?}{}", bad.len(), first(&bad)),
    )
}

fn criterion_9() -> Outcome {
    match growth_experiment(&FiniteGroup::cyclic(2), 0.5, 1..=4, 16) {
        Ok(t) => {
            let d: Vec<Option<u32>> = t.rows.iter().map(|r| r.diam).collect();
            let all = d.iter().all(Option::is_some) && d.len() == 4;
            let above = d.iter().skip(1).all(|v| v.is_some_and(|s| s > 1));
            outcome(all && t.nondecreasing && above, format!("diam^F(Z2^n; 1, 0.5), n = 1..4: {d:?}"))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_10() -> Outcome {
    let h = match group::hypercube_embedding(6) {
        Ok(h) => h,
        Err(e) => return outcome(false, e.to_string()),
    };
    let e = match embed_from_kernel(&h.kernel, EmbedMode::Negative, 1e-9) {
        Ok(e) => e,
        Err(err) => return outcome(false, err.to_string()),
    };
    let blocks = h.space.blocks().expect("blocks").to_vec();
    let mut worst: f64 = 0.0;
    for a in 0..h.space.len() {
        for b in 0..h.space.len() {
            if blocks[a] == blocks[b] {
                worst = worst.max((e.distance(a, b) - h.space.d(a, b).sqrt()).abs());
            }
        }
    }
    let n = h.space.len();
    let map = PointMap::into_euclidean(h.space.clone(), e.coords.clone()).expect("map");
    let prof = metric::compression_profile(&map, Some(1.0)).expect("profile");
    let env = prof.rho1_envelope();
    let increasing = env.windows(2).all(|w| w[1] > w[0]);
    outcome(
        worst <= 1e-9 && increasing,
        format!("{n} points, within-block |image − √d| ≤ {worst:.2e}, ρ₁ envelope over {} bins strictly increasing: {increasing}", env.len()),
    )
}

/// `d_G` by relaxing chains one move at a time (no priority queue).
fn chain_oracle(space: &FiniteMetricSpace, action: &GroupAction) -> Vec<Vec<f64>> {
    let n = space.len();
    let g = &action.group;
    let mut mv = vec![vec![f64::INFINITY; n]; n];
    for x in 0..n {
        for y in 0..n {
            mv[x][y] = space.d(x, y);
        }
        for h in 0..g.order() {
            let y = action.perms[h][x];
            mv[x][y] = mv[x][y].min(f64::from(g.length(h)));
        }
    }
    let mut best = mv.clone();
    for _ in 0..n {
        let mut next = best.clone();
        for x in 0..n {
            for z in 0..n {
                for y in 0..n {
                    next[x][y] = next[x][y].min(best[x][z] + mv[z][y]);
                }
            }
        }
        if next == best {
            break;
        }
        best = next;
    }
    best
}

fn criterion_11() -> Outcome {
    let mut cases: Vec<(String, FiniteMetricSpace, GroupAction)> = Vec::new();
    for n in (6..=12).step_by(2) {
        let anti = GroupAction::cyclic_from_step((0..n).map(|x| (x + n / 2) % n).collect(), 2).unwrap();
        cases.push((format!("C{n} antipodal"), gen::cycle(n), anti));
        let rot2 = GroupAction::cyclic_from_step((0..n).map(|x| (x + 2) % n).collect(), n / 2).unwrap();
        cases.push((format!("C{n} rotation by 2"), gen::cycle(n), rot2));
    }
    for n in [5, 7, 9, 11] {
        let rot = GroupAction::cyclic_from_step((0..n).map(|x| (x + 1) % n).collect(), n).unwrap();
        cases.push((format!("C{n} rotation"), gen::cycle(n), rot));
        let refl = GroupAction::cyclic_from_step((0..n).rev().collect(), 2).unwrap();
        cases.push((format!("P{n} reflection"), gen::path(n), refl));
    }
    let cube = GroupAction::cyclic_from_step((0..8).map(|x| x ^ 7).collect(), 2).unwrap();
    cases.push(("Q3 antipodal".into(), gen::hypercube(3), cube));
    let shift = GroupAction::cyclic_from_step((0..12).map(|x| (x + 3) % 12).collect(), 4).unwrap();
    cases.push(("P12 cyclic shift".into(), gen::path(12), shift));

    let mut bad = Vec::new();
    for (name, space, action) in &cases {
        let w = match group::warp_metric(space, action) {
            Ok(w) => w,
            Err(e) => {
                bad.push(format!("{name}: {e}"));
                continue;
            }
        };
        let oracle = chain_oracle(space, action);
        let n = space.len();
        for x in 0..n {
            for y in 0..n {
                if w.d(x, y) != oracle[x][y] {
                    bad.push(format!("{name} ({x},{y}): Dijkstra {} vs chains {}", w.d(x, y), oracle[x][y]));
                }
                if w.d(x, y) > space.d(x, y) {
                    bad.push(format!("{name} ({x},{y}): d_G > d"));
                }
            }
            for h in 0..action.group.order() {
                if w.d(x, action.perms[h][x]) > f64::from(action.group.length(h)) {
                    bad.push(format!("{name}: d_G(x, gx) > |g| at x = {x}"));
                }
            }
        }
        if let Err(e) = w.check_triangle() {
            bad.push(format!("{name}: {e}"));
        }
    }
    outcome(bad.is_empty(), format!("{} actions, {} violations{}", cases.len(), bad.len(), first(&bad)))
}

fn criterion_12() -> Outcome {
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    let mut late_blocks = 0;
    for k in 1..=5u32 {
        let order = 1usize << k;
        let g = FiniteGroup::cyclic(order);
        let divisors: Vec<usize> = (1..=k).map(|j| 1usize << j).collect();
        let res: Result<()> = (|| {
            let chain = QuotientChain::cyclic(&g, &divisors)?;
            let bx = group::box_space(&g, &chain)?;
            // triangular bump of half-width 3
            let phi: Vec<f64> = (0..order).map(|h| (1.0 - f64::from(g.length(h)) / 3.0).max(0.0)).collect();
            let bk = group::box_kernel_from_function(&bx, &phi)?;
            let w = Witness::Kernel(KernelWitness {
                k: bk.kernel.clone(),
                params: Params::default(),
            });
            check_invariants(&w, &bx.space)?;
            measure_witness(&w, &bx.space, 1.0)?;
            if !classify_kernel(&Kernel::new(bk.kernel.clone())?, 1e-9)?.positive_type {
                bad.push(format!("Z/{order}: kernel is not of positive type"));
            }
            let support = g.ball(2.0);
            for n in bk.first_late_block..bx.quotients.len() {
                late_blocks += 1;
                let psi = group::box_function_from_kernel(&bx, &bk.kernel, n)?;
                for &h in &support {
                    worst = worst.max((psi[bx.cosets[n].of[h]] - phi[h]).abs());
                }
            }
            Ok(())
        })();
        if let Err(e) = res {
            bad.push(format!("Z/{order}: {e}"));
        }
    }
    outcome(
        bad.is_empty() && worst <= 1e-9,
        format!("k = 1..5, {late_blocks} late blocks, round-trip error {worst:.2e}{}", first(&bad)),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("conversion degradation", criterion_1),
        ("tree witness bound", criterion_2),
        ("negative-type reconstruction", criterion_3),
        ("Schoenberg equivalence", criterion_4),
        ("Poincaré inequality", criterion_5),
        ("expander concentration", criterion_6),
        ("per-quotient expansion", criterion_7),
        ("diam^A = diam^F", criterion_8),
        ("hypercube growth shadow", criterion_9),
        ("hypercube-space embedding", criterion_10),
        ("warped metric exactness", criterion_11),
        ("box-space bridge", criterion_12),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {:<30} {}  ({:.1}s) {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("{} of 12 criteria passed in {:.1}s", 12 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
