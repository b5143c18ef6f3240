use std::collections::VecDeque;

use approx::assert_abs_diff_eq;
use coarselab::amenability::{self, DiamForm, DiamTarget, FolnerFunction};
use coarselab::group::{self, FiniteGroup, GroupAction};
use coarselab::io;
use coarselab::kernel::{self, EmbedMode, Kernel};
use coarselab::metric::{self, gen, Exponent, FiniteMetricSpace};
use coarselab::spectral::{self, ExpansionMode};
use coarselab::witness::{self, ConvertParams, Form, LpWitness, Witness};
use proptest::prelude::*;
use proptest::sample::Index;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

/// Random connected graph: a random tree plus extra edges.
fn connected_lists() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (3usize..11).prop_flat_map(|n| {
        (prop::collection::vec(any::<Index>(), n - 1), prop::collection::vec((any::<Index>(), any::<Index>()), 0..n)).prop_map(
            move |(parents, extra)| {
                let mut adj = vec![Vec::new(); n];
                let mut add = |a: usize, b: usize| {
                    if a != b && !adj[a].contains(&b) {
                        adj[a].push(b);
                        adj[b].push(a);
                    }
                };
                for (i, p) in parents.iter().enumerate() {
                    add(i + 1, p.index(i + 1));
                }
                for (a, b) in extra {
                    add(a.index(n), b.index(n));
                }
                adj
            },
        )
    })
}

/// Random simple graph, possibly disconnected.
fn any_lists() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (2usize..10).prop_flat_map(|n| {
        prop::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let mut adj = vec![Vec::new(); n];
            let mut k = 0;
            for a in 0..n {
                for b in (a + 1)..n {
                    if bits[k] {
                        adj[a].push(b);
                        adj[b].push(a);
                    }
                    k += 1;
                }
            }
            adj
        })
    })
}

fn connected(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut q = VecDeque::from([0]);
    seen[0] = true;
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                q.push_back(w);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn small_group() -> impl Strategy<Value = FiniteGroup> {
    prop_oneof![
        (1usize..13).prop_map(FiniteGroup::cyclic),
        (1u32..5).prop_map(FiniteGroup::z2_pow),
        (3usize..9).prop_map(FiniteGroup::dihedral),
        (2usize..5, 2usize..5).prop_map(|(a, b)| FiniteGroup::cyclic(a).direct_product(&FiniteGroup::cyclic(b))),
    ]
}

fn tiny_group() -> impl Strategy<Value = FiniteGroup> {
    prop_oneof![
        (2usize..7).prop_map(FiniteGroup::cyclic),
        (1u32..3).prop_map(FiniteGroup::z2_pow),
        Just(FiniteGroup::dihedral(3)),
        Just(FiniteGroup::dihedral(4)),
    ]
}

fn gram(vectors: &[Vec<f64>]) -> Kernel {
    Kernel::from_fn(vectors.len(), |i, j| vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum()).unwrap()
}

fn sq_dist(points: &[Vec<f64>]) -> Kernel {
    Kernel::from_fn(points.len(), |i, j| points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum()).unwrap()
}

fn point_cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..8, 1usize..4).prop_flat_map(|(n, d)| prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), n))
}

fn probability(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(|mut v| {
        v[0] += 1e-3;
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    })
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn graph_metric_is_an_integer_metric(adj in connected_lists()) {
        let x = metric::graph_metric_from_lists(&adj).unwrap();
        x.check_invariants().unwrap();
        prop_assert!(x.is_integer_valued());
        for (v, nb) in adj.iter().enumerate() {
            for &w in nb {
                prop_assert_eq!(x.d(v, w), 1.0);
            }
        }
    }

    #[test]
    fn product_dominates_factors(a in connected_lists(), b in connected_lists(), p in prop_oneof![Just(Exponent::Infinity), (1.0f64..4.0).prop_map(Exponent::Finite)]) {
        let x = metric::graph_metric_from_lists(&a).unwrap();
        let y = metric::graph_metric_from_lists(&b).unwrap();
        let z = metric::lp_product(&x, &y, p).unwrap();
        let ny = y.len();
        for i in 0..z.len() {
            for j in 0..z.len() {
                prop_assert!(z.d(i, j) >= x.d(i / ny, j / ny).max(y.d(i % ny, j % ny)) - 1e-12);
            }
        }
    }

    #[test]
    fn nets_are_separated_and_dense(adj in connected_lists(), delta in 1u32..4) {
        let x = metric::graph_metric_from_lists(&adj).unwrap();
        let delta = f64::from(delta);
        let (net, sub) = metric::net_extract(&x, delta).unwrap();
        for (i, &a) in net.iter().enumerate() {
            for &b in &net[i + 1..] {
                prop_assert!(x.d(a, b) >= delta);
            }
        }
        for v in 0..x.len() {
            prop_assert!(net.iter().any(|&a| x.d(v, a) < delta));
        }
        let (again, _) = metric::net_extract(&sub, delta).unwrap();
        prop_assert_eq!(again, (0..sub.len()).collect::<Vec<_>>());
    }

    #[test]
    fn lp_conversion_meets_its_bound(adj in connected_lists(), r in 1u32..3, q in 1.0f64..4.0) {
        let x = metric::graph_metric_from_lists(&adj).unwrap();
        let r = f64::from(r);
        let w = Witness::Lp(LpWitness::uniform_balls(&x, r, 1.0).unwrap());
        let mut params = ConvertParams::at_scale(r);
        params.q = Some(q);
        let c = witness::convert_witness(&w, &x, Form::Lp, &params).unwrap();
        c.verify(&x, r).unwrap();
        let back = witness::convert_witness(&c.witness, &x, Form::Lp, &ConvertParams { q: Some(1.0), ..params }).unwrap();
        back.verify(&x, r).unwrap();
    }

    #[test]
    fn partitions_of_unity_sum_to_one(adj in connected_lists(), r in 1u32..3) {
        let x = metric::graph_metric_from_lists(&adj).unwrap();
        let cover: Vec<Vec<usize>> = (0..x.len()).map(|v| x.ball(v, f64::from(r))).collect();
        let (w, _) = witness::lipschitz_partition(&x, &cover, 1.0, 1.0).unwrap();
        for v in 0..x.len() {
            let s: f64 = w.phi.iter().map(|f| f[v]).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
            for (f, u) in w.phi.iter().zip(&w.cover) {
                prop_assert!(f[v] >= 0.0);
                prop_assert!(f[v] == 0.0 || u.contains(&v));
            }
        }
    }

    #[test]
    fn witness_json_round_trips(adj in connected_lists(), r in 1u32..3) {
        let x = metric::graph_metric_from_lists(&adj).unwrap();
        let w = Witness::Lp(LpWitness::uniform_balls(&x, f64::from(r), 2.0).unwrap());
        let text = io::to_json(&w.to_json_value());
        let back = Witness::from_json_value(io::from_json(&text).unwrap()).unwrap();
        prop_assert_eq!(back, w);
        let text = io::to_json(&x.to_json_value());
        let back = FiniteMetricSpace::from_json_value(io::from_json(&text).unwrap()).unwrap();
        prop_assert_eq!(back, x);
    }
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn schur_product_of_positive_kernels(a in point_cloud(), seed in prop::collection::vec(-2.0f64..2.0, 24)) {
        let n = a.len();
        let b: Vec<Vec<f64>> = (0..n).map(|i| seed[3 * i..3 * i + 3].to_vec()).collect();
        let p = kernel::schur_product(&gram(&a), &gram(&b), 1e-9).unwrap();
        prop_assert!(kernel::classify_kernel(&p, 1e-9).unwrap().positive_type);
    }

    #[test]
    fn embeddings_reproduce_their_kernel(pts in point_cloud()) {
        let k = gram(&pts);
        let e = kernel::embed_from_kernel(&k, EmbedMode::Positive, 1e-9).unwrap();
        let g = e.gram();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_abs_diff_eq!(g[(i, j)], k.get(i, j), epsilon = 1e-8);
            }
        }
        let k = sq_dist(&pts);
        let e = kernel::embed_from_kernel(&k, EmbedMode::Negative, 1e-9).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_abs_diff_eq!(e.sq_distance(i, j), k.get(i, j), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn powers_keep_negative_type(pts in point_cloud(), alpha in prop::sample::select(vec![0.25, 0.5, 0.75])) {
        let k = kernel::power_transform(&sq_dist(&pts), alpha, 1e-9).unwrap();
        prop_assert!(kernel::classify_kernel(&k, 1e-9).unwrap().negative_type);
    }

    #[test]
    fn mazur_map_preserves_the_sphere(v in prop::collection::vec(-1.0f64..1.0, 1..6), p in 1.0f64..5.0, q in 1.0f64..5.0) {
        prop_assume!(v.iter().any(|&a| a != 0.0));
        let norm = |x: &[f64], p: f64| x.iter().map(|a| a.abs().powf(p)).sum::<f64>().powf(1.0 / p);
        let n = norm(&v, p);
        let u: Vec<f64> = v.iter().map(|a| a / n).collect();
        let image = kernel::mazur_map(&u, p, q).unwrap();
        assert_abs_diff_eq!(norm(&image, q), 1.0, epsilon = 1e-12);
        let same = kernel::mazur_map(&u, p, p).unwrap();
        for (a, b) in same.iter().zip(&u) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn kernel_json_round_trips(pts in point_cloud()) {
        let k = sq_dist(&pts);
        let back = Kernel::from_json_value(io::from_json(&io::to_json(&k.to_json_value())).unwrap()).unwrap();
        prop_assert_eq!(back, k);
    }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn poincare_holds_and_is_sharp(half in 3usize..9, seed in any::<u64>(), f in prop::collection::vec(-5.0f64..5.0, 16)) {
        let g = spectral::random_regular_graph(2 * half, 3, seed).unwrap();
        let spec = spectral::laplacian_gap(&g).unwrap();
        let c = spectral::poincare_check(&g, &spec, &f[..g.len()]).unwrap();
        prop_assert!(c.holds, "{c:?}");
        let sharp = spectral::poincare_check(&g, &spec, &spec.eigenvector).unwrap();
        assert_abs_diff_eq!(sharp.lhs, sharp.rhs, epsilon = 1e-8);
    }

    #[test]
    fn expansion_is_positive_iff_connected(adj in any_lists()) {
        let r = spectral::expansion_constant(&adj, ExpansionMode::Exact).unwrap();
        prop_assert_eq!(r.c > 0.0, connected(&adj));
    }

    #[test]
    fn cayley_metric_is_left_invariant(g in small_group()) {
        let d = group::cayley_metric(&g);
        d.check_invariants().unwrap();
        let n = g.order();
        for a in 0..n {
            for x in 0..n {
                for y in 0..n {
                    prop_assert_eq!(d.d(g.mul(a, x), g.mul(a, y)), d.d(x, y));
                }
            }
        }
    }

    #[test]
    fn group_json_round_trips(g in small_group()) {
        let back = FiniteGroup::from_json_value(io::from_json(&io::to_json(&g.to_json_value())).unwrap()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn warped_metric_properties(n in 3usize..13, k in 1usize..12) {
        let k = k % n;
        let m = if k == 0 { 1 } else { n / gcd(n, k) };
        let space = gen::cycle(n);
        let action = GroupAction::cyclic_from_step((0..n).map(|x| (x + k) % n).collect(), m).unwrap();
        let w = group::warp_metric(&space, &action).unwrap();
        w.check_invariants().unwrap();
        for x in 0..n {
            for y in 0..n {
                prop_assert!(w.d(x, y) <= space.d(x, y) + 1e-12);
                for z in 0..n {
                    prop_assert!(w.d(x, z) <= w.d(x, y) + w.d(y, z) + 1e-9);
                }
            }
            for h in 0..action.group.order() {
                prop_assert!(w.d(x, action.perms[h][x]) <= f64::from(action.group.length(h)) + 1e-12);
            }
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn reiter_defect_is_bounded(g in small_group(), r in 1u32..3, seed in prop::collection::vec(0.0f64..1.0, 32)) {
        let mut v = seed[..g.order()].to_vec();
        v[0] += 1e-3;
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        let f = FolnerFunction::new(&g, v).unwrap();
        let d = amenability::reiter_defect(&g, &f, f64::from(r));
        prop_assert!((0.0..=2.0 + 1e-12).contains(&d));
    }

    #[test]
    fn optimal_folner_beats_random_candidates(g in tiny_group(), r in 1u32..3, s in 0u32..3, p in probability(16)) {
        let (r, s) = (f64::from(r), f64::from(s));
        let (f, exact) = amenability::optimal_folner(&g, r, s, true).unwrap();
        let (_, float) = amenability::optimal_folner(&g, r, s, false).unwrap();
        assert_abs_diff_eq!(exact, float, epsilon = 1e-6);
        assert_abs_diff_eq!(amenability::reiter_defect(&g, &f, r), exact, epsilon = 1e-9);
        let ball = g.ball(s);
        let mut v = vec![0.0; g.order()];
        for (i, &h) in ball.iter().enumerate() {
            v[h] = p[i];
        }
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        let cand = FolnerFunction::new(&g, v).unwrap();
        prop_assert!(amenability::reiter_defect(&g, &cand, r) >= exact - 1e-9);
    }

    #[test]
    fn folner_json_round_trips(g in tiny_group(), p in probability(16)) {
        let f = FolnerFunction::new(&g, p[..g.order()].iter().map(|x| x / p[..g.order()].iter().sum::<f64>()).collect()).unwrap();
        let j = f.to_json_value(&g, "g");
        let back = FolnerFunction::from_json_value(&g, io::from_json(&io::to_json(&j)).unwrap()).unwrap();
        for (a, b) in back.values.iter().zip(&f.values) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn kernel_bridge_gives_positive_functions(g in tiny_group(), seed in prop::collection::vec(-1.0f64..1.0, 64)) {
        let n = g.order();
        let vecs: Vec<Vec<f64>> = (0..n).map(|i| seed[4 * i % 60..4 * i % 60 + 4].to_vec()).collect();
        let phi = amenability::kernel_to_function(&g, &gram(&vecs), 1e-9).unwrap();
        let k = amenability::function_kernel(&g, &phi).unwrap();
        prop_assert!(kernel::classify_kernel(&k, 1e-9).unwrap().positive_type);
    }
}

proptest! {
    #![proptest_config(cfg(8))]

    #[test]
    fn diam_tables_are_monotone(g in prop_oneof![(2usize..6).prop_map(FiniteGroup::cyclic), (1u32..3).prop_map(FiniteGroup::z2_pow)]) {
        let rs = [1.0, 2.0];
        let es = [0.5, 1.0, 1.5];
        let t = amenability::diam_table(DiamTarget::Group(&g), DiamForm::F, "g", &rs, &es, Some(true)).unwrap();
        let a = amenability::diam_table(DiamTarget::Group(&g), DiamForm::A, "g", &rs, &es, Some(true)).unwrap();
        for &r in &rs {
            for &e in &es {
                prop_assert_eq!(t.get(r, e), a.get(r, e));
            }
            for w in es.windows(2) {
                prop_assert!(t.get(r, w[1]) <= t.get(r, w[0]));
            }
        }
        for &e in &es {
            prop_assert!(t.get(1.0, e) <= t.get(2.0, e));
        }
    }
}
