//! Reiter functions on finite groups, LP-optimal Følner-type functions, the
//! diam^A / diam^F tables, averaging bridges between group functions and
//! witnesses, and the growth of diam^F along powers of a group.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{cayley_metric, FiniteGroup};
use crate::kernel::{classify_kernel, Kernel};
use crate::lp::{self, LinearProgram, RowKind};
use crate::metric::FiniteMetricSpace;
use crate::witness::{self, LpWitness, Params};

/// Largest group (or space) solved in exact rational arithmetic.
pub const EXACT_LIMIT: usize = 16;

/// Probability function on a finite group.
#[derive(Debug, Clone, PartialEq)]
pub struct FolnerFunction {
    /// `values[g]`, dense over group elements.
    pub values: Vec<f64>,
    /// Largest length on the support.
    pub s: f64,
}

impl FolnerFunction {
    pub fn new(g: &FiniteGroup, values: Vec<f64>) -> Result<Self> {
        if values.len() != g.order() {
            return Err(Error::PointMismatch(format!("{} values for a group of order {}", values.len(), g.order())));
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidInput("Følner function must be nonnegative".into()));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("Følner function sums to {total}, not 1")));
        }
        let s = (0..g.order()).filter(|&h| values[h] > 0.0).map(|h| f64::from(g.length(h))).fold(0.0, f64::max);
        Ok(Self { values, s })
    }

    pub fn delta(g: &FiniteGroup) -> Self {
        let mut values = vec![0.0; g.order()];
        values[g.identity()] = 1.0;
        Self { values, s: 0.0 }
    }

    pub fn uniform(g: &FiniteGroup) -> Self {
        let n = g.order();
        Self::new(g, vec![1.0 / n as f64; n]).expect("uniform probability")
    }

    /// `(gf)(h) = f(g⁻¹h)`.
    pub fn translate(&self, grp: &FiniteGroup, g: usize) -> Vec<f64> {
        let gi = grp.inv(g);
        (0..grp.order()).map(|h| self.values[grp.mul(gi, h)]).collect()
    }

    pub fn to_json_value(&self, g: &FiniteGroup, group_id: &str) -> FolnerJson {
        FolnerJson {
            schema: crate::SCHEMA.into(),
            group: group_id.into(),
            values: g.names().iter().cloned().zip(self.values.iter().copied()).filter(|&(_, v)| v != 0.0).collect(),
            s: self.s,
        }
    }

    pub fn from_json_value(g: &FiniteGroup, j: FolnerJson) -> Result<Self> {
        crate::io::check_schema(&j.schema, "$.schema")?;
        let mut values = vec![0.0; g.order()];
        for (name, v) in &j.values {
            let idx = g
                .names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::schema(format!("$.values.{name}"), "not an element of the group"))?;
            values[idx] = *v;
        }
        let f = Self::new(g, values).map_err(|e| Error::schema("$.values", e.to_string()))?;
        if f.s > j.s + 1e-9 {
            return Err(Error::schema("$.S", format!("support reaches length {}", f.s)));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FolnerJson {
    pub schema: String,
    pub group: String,
    pub values: BTreeMap<String, f64>,
    #[serde(rename = "S")]
    pub s: f64,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `max_{0<|g|≤R} ‖gf − f‖₁` (0 when no such `g`).
pub fn reiter_defect(g: &FiniteGroup, f: &FolnerFunction, r: f64) -> f64 {
    g.ball(r)
        .into_iter()
        .filter(|&h| h != g.identity())
        .map(|h| l1(&f.translate(g, h), &f.values))
        .fold(0.0, f64::max)
}

/// Minimizes the Reiter defect at scale `R` over probability functions
/// supported on `B̄(e,S)`. Exact rationals when `exact`.
pub fn optimal_folner(g: &FiniteGroup, r: f64, s: f64, exact: bool) -> Result<(FolnerFunction, f64)> {
    let ball = g.ball(s);
    let n = g.order();
    // variable index of f(h), if h is in the ball
    let mut var = vec![None; n];
    for (i, &h) in ball.iter().enumerate() {
        var[h] = Some(i);
    }
    let mut lp = LinearProgram::new(ball.len());
    let t = lp.add_var();
    lp.objective = vec![(t, 1.0)];
    lp.push(ball.iter().map(|&h| (var[h].unwrap(), 1.0)).collect(), RowKind::Eq, 1.0);
    for a in g.ball(r).into_iter().filter(|&a| a != g.identity()) {
        let ai = g.inv(a);
        let mut sum = vec![(t, -1.0)];
        for h in 0..n {
            // (af)(h) − f(h) = f(a⁻¹h) − f(h)
            let (p, q) = (var[g.mul(ai, h)], var[h]);
            if p.is_none() && q.is_none() || p == q {
                continue;
            }
            let u = lp.add_var();
            let mut diff = Vec::new();
            if let Some(p) = p {
                diff.push((p, 1.0));
            }
            if let Some(q) = q {
                diff.push((q, -1.0));
            }
            let mut up = diff.clone();
            up.push((u, -1.0));
            lp.push(up, RowKind::Le, 0.0);
            let mut down: Vec<(usize, f64)> = diff.iter().map(|&(i, c)| (i, -c)).collect();
            down.push((u, -1.0));
            lp.push(down, RowKind::Le, 0.0);
            sum.push((u, 1.0));
        }
        lp.push(sum, RowKind::Le, 0.0);
    }
    let sol = lp::solve_f64(&lp, exact)?;
    let mut values = vec![0.0; n];
    for &h in &ball {
        values[h] = sol.x[var[h].unwrap()].max(0.0);
    }
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    let f = FolnerFunction::new(g, values)?;
    Ok((f, sol.objective.max(0.0)))
}

/// Minimal worst variation `max_{d(x,y)≤R} ‖ξ_x − ξ_y‖₁` over nonnegative
/// unit families with `supp ξ_x ⊆ B̄(x,S)`, as one joint LP.
pub fn optimal_family(space: &FiniteMetricSpace, r: f64, s: f64, exact: bool) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = space.len();
    let t_tol = space.tol();
    let mut var = vec![vec![None; n]; n];
    let mut lp = LinearProgram::new(0);
    for x in 0..n {
        for y in space.ball(x, s) {
            var[x][y] = Some(lp.add_var());
        }
    }
    let t = lp.add_var();
    lp.objective = vec![(t, 1.0)];
    for row in &var {
        lp.push(row.iter().flatten().map(|&v| (v, 1.0)).collect(), RowKind::Eq, 1.0);
    }
    for x in 0..n {
        for y in (x + 1)..n {
            if space.d(x, y) > r + t_tol {
                continue;
            }
            let mut sum = vec![(t, -1.0)];
            for z in 0..n {
                let (p, q) = (var[x][z], var[y][z]);
                if p.is_none() && q.is_none() {
                    continue;
                }
                let u = lp.add_var();
                let mut diff = Vec::new();
                if let Some(p) = p {
                    diff.push((p, 1.0));
                }
                if let Some(q) = q {
                    diff.push((q, -1.0));
                }
                let mut up = diff.clone();
                up.push((u, -1.0));
                lp.push(up, RowKind::Le, 0.0);
                let mut down: Vec<(usize, f64)> = diff.iter().map(|&(i, c)| (i, -c)).collect();
                down.push((u, -1.0));
                lp.push(down, RowKind::Le, 0.0);
                sum.push((u, 1.0));
            }
            lp.push(sum, RowKind::Le, 0.0);
        }
    }
    let sol = lp::solve_f64(&lp, exact)?;
    let family = var
        .iter()
        .map(|row| row.iter().map(|v| v.map_or(0.0, |i| sol.x[i].max(0.0))).collect())
        .collect();
    Ok((family, sol.objective.max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiamForm {
    #[serde(rename = "A")]
    A,
    #[serde(rename = "F")]
    F,
}

/// Target of a diam table.
#[derive(Debug, Clone, Copy)]
pub enum DiamTarget<'a> {
    Group(&'a FiniteGroup),
    Space(&'a FiniteMetricSpace),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiamEntry {
    #[serde(rename = "R")]
    pub r: f64,
    pub eps: f64,
    /// Smallest integer `S` whose optimal defect is below `eps`.
    #[serde(rename = "S")]
    pub s: u32,
    pub optimal_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiamTable {
    pub target: String,
    pub form: DiamForm,
    pub entries: Vec<DiamEntry>,
    /// `(R, S, optimal defect)` for every solved cell.
    pub certificates: Vec<(f64, u32, f64)>,
}

impl DiamTable {
    pub fn get(&self, r: f64, eps: f64) -> Option<u32> {
        self.entries.iter().find(|e| e.r == r && e.eps == eps).map(|e| e.s)
    }

    pub fn to_csv(&self) -> String {
        let form = match self.form {
            DiamForm::A => "A",
            DiamForm::F => "F",
        };
        let mut s = String::from("target,form,R,eps,S,optimal_defect\n");
        for e in &self.entries {
            s.push_str(&format!("{},{form},{},{},{},{}\n", self.target, e.r, e.eps, e.s, e.optimal_defect));
        }
        s
    }
}

/// diam^F (group targets only) or diam^A over a grid, scanning integer `S`
/// upward until the optimal defect drops below `ε`. `exact` defaults to
/// rational arithmetic up to [`EXACT_LIMIT`] points.
pub fn diam_table(
    target: DiamTarget<'_>,
    form: DiamForm,
    name: &str,
    r_grid: &[f64],
    eps_grid: &[f64],
    exact: Option<bool>,
) -> Result<DiamTable> {
    let space = match target {
        DiamTarget::Group(g) => cayley_metric(g),
        DiamTarget::Space(s) => s.clone(),
    };
    if form == DiamForm::F && !matches!(target, DiamTarget::Group(_)) {
        return Err(Error::InvalidInput("diam^F needs a group target".into()));
    }
    if !space.is_integer_valued() {
        return Err(Error::InvalidInput("the S scan needs an integer-valued metric".into()));
    }
    let exact = exact.unwrap_or(space.len() <= EXACT_LIMIT);
    let diam = space.diameter() as u32;
    let min_eps = eps_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let rows: Vec<Result<Vec<(u32, f64)>>> = r_grid
        .par_iter()
        .map(|&r| {
            let mut defects = Vec::new();
            for s in 0..=diam {
                let d = match (form, target) {
                    (DiamForm::F, DiamTarget::Group(g)) => optimal_folner(g, r, f64::from(s), exact)?.1,
                    _ => optimal_family(&space, r, f64::from(s), exact)?.1,
                };
                defects.push((s, d));
                if d < min_eps {
                    break;
                }
            }
            Ok(defects)
        })
        .collect();
    let mut table = DiamTable {
        target: name.into(),
        form,
        entries: Vec::new(),
        certificates: Vec::new(),
    };
    for (&r, row) in r_grid.iter().zip(rows) {
        let row = row?;
        for &(s, d) in &row {
            table.certificates.push((r, s, d));
        }
        for &eps in eps_grid {
            let &(s, d) = row
                .iter()
                .find(|&&(_, d)| d < eps)
                .ok_or_else(|| Error::Invariant(format!("no admissible S up to the diameter at R = {r}, ε = {eps}")))?;
            table.entries.push(DiamEntry {
                r,
                eps,
                s,
                optimal_defect: d,
            });
        }
    }
    Ok(table)
}

/// `ξ_x = x·f` on the Cayley metric space.
pub fn folner_to_witness(g: &FiniteGroup, f: &FolnerFunction, r: f64) -> Result<LpWitness> {
    let xi = (0..g.order())
        .map(|x| f.translate(g, x).into_iter().enumerate().filter(|&(_, v)| v != 0.0).collect())
        .collect();
    LpWitness::new(
        1.0,
        xi,
        Params {
            r: Some(r),
            eps: Some(reiter_defect(g, f, r)),
            s: Some(f.s),
            ..Params::default()
        },
    )
}

/// `f(h) = (1/|G|) Σ_g ξ_g(gh)`.
pub fn witness_to_folner(g: &FiniteGroup, w: &LpWitness) -> Result<FolnerFunction> {
    let n = g.order();
    if w.xi.len() != n {
        return Err(Error::PointMismatch(format!("witness on {} points, group has {n} elements", w.xi.len())));
    }
    let mut values = vec![0.0; n];
    for (x, v) in w.xi.iter().enumerate() {
        let xi = g.inv(x);
        for &(y, a) in v {
            if y >= n {
                return Err(Error::PointMismatch(format!("witness references point {y}")));
            }
            // y = x·h
            values[g.mul(xi, y)] += a / n as f64;
        }
    }
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    FolnerFunction::new(g, values)
}

/// Direction and payload of the Følner/witness bridge.
#[derive(Debug, Clone)]
pub enum FolnerBridge {
    ToWitness(FolnerFunction, f64),
    ToFolner(LpWitness),
}

#[derive(Debug, Clone)]
pub enum FolnerBridgeOutput {
    Witness(LpWitness),
    Folner(FolnerFunction),
}

pub fn folner_witness_bridge(g: &FiniteGroup, input: &FolnerBridge) -> Result<FolnerBridgeOutput> {
    match input {
        FolnerBridge::ToWitness(f, r) => folner_to_witness(g, f, *r).map(FolnerBridgeOutput::Witness),
        FolnerBridge::ToFolner(w) => witness_to_folner(g, w).map(FolnerBridgeOutput::Folner),
    }
}

/// `φ(h) = (1/|G|) Σ_g k(h⁻¹g, g)`.
pub fn kernel_to_function(g: &FiniteGroup, k: &Kernel, tol: f64) -> Result<Vec<f64>> {
    let n = g.order();
    if k.len() != n {
        return Err(Error::PointMismatch(format!("kernel on {} points, group has {n} elements", k.len())));
    }
    if !classify_kernel(k, tol)?.positive_type {
        return Err(Error::Classification("kernel is not of positive type".into()));
    }
    Ok((0..n)
        .map(|h| {
            let hi = g.inv(h);
            (0..n).map(|x| k.get(g.mul(hi, x), x)).sum::<f64>() / n as f64
        })
        .collect())
}

/// The kernel `(g, h) ↦ φ(g⁻¹h)` of a group function.
pub fn function_kernel(g: &FiniteGroup, phi: &[f64]) -> Result<Kernel> {
    Kernel::from_fn(g.order(), |a, b| phi[g.mul(g.inv(a), b)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub order: usize,
    /// `None` past the truncation point.
    pub diam: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub eps: f64,
    pub rows: Vec<GrowthRow>,
    /// First power whose order exceeded the budget.
    pub truncated_at: Option<usize>,
    /// Non-decreasing over the computed rows.
    pub nondecreasing: bool,
}

/// `diam^F(Gⁿ; 1, ε)` for `n` in `ns`, stopping at the first power larger
/// than `max_order`.
pub fn growth_experiment(base: &FiniteGroup, eps: f64, ns: std::ops::RangeInclusive<usize>, max_order: usize) -> Result<GrowthTable> {
    let mut table = GrowthTable {
        eps,
        rows: Vec::new(),
        truncated_at: None,
        nondecreasing: true,
    };
    for n in ns {
        let order = base.order().checked_pow(n as u32).unwrap_or(usize::MAX);
        if order > max_order {
            table.truncated_at = Some(n);
            table.rows.push(GrowthRow { n, order, diam: None });
            break;
        }
        let g = base.power(n);
        let t = diam_table(DiamTarget::Group(&g), DiamForm::F, &format!("G^{n}"), &[1.0], &[eps], None)?;
        table.rows.push(GrowthRow {
            n,
            order,
            diam: t.get(1.0, eps),
        });
    }
    let computed: Vec<u32> = table.rows.iter().filter_map(|r| r.diam).collect();
    table.nondecreasing = computed.windows(2).all(|w| w[0] <= w[1]);
    Ok(table)
}

/// Variation of a family of dense ℓ¹ vectors at scale `R`.
pub fn family_variation(space: &FiniteMetricSpace, family: &[Vec<f64>], r: f64) -> f64 {
    let w = LpWitness::new(1.0, family.iter().map(|v| witness::sparse_from_dense(v)).collect(), Params::default());
    match w {
        Ok(w) => witness::measure_witness(&witness::Witness::Lp(w), space, r).map_or(f64::INFINITY, |rep| rep.eps()),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::PSD_TOL;

    #[test]
    fn defect_examples() {
        let v4 = FiniteGroup::z2_pow(2);
        assert_eq!(reiter_defect(&v4, &FolnerFunction::uniform(&v4), 1.0), 0.0);
        assert_eq!(reiter_defect(&v4, &FolnerFunction::delta(&v4), 1.0), 2.0);
        let f = FolnerFunction::new(&v4, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]).unwrap();
        assert!((reiter_defect(&v4, &f, 1.0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_folner_examples() {
        let z2 = FiniteGroup::cyclic(2);
        assert_eq!(optimal_folner(&z2, 1.0, 1.0, true).unwrap().1, 0.0);
        assert_eq!(optimal_folner(&z2, 1.0, 0.0, true).unwrap().1, 2.0);
        let v4 = FiniteGroup::z2_pow(2);
        let (f, d) = optimal_folner(&v4, 1.0, 1.0, true).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-12);
        assert!((reiter_defect(&v4, &f, 1.0) - d).abs() < 1e-12);
        let (_, df) = optimal_folner(&v4, 1.0, 1.0, false).unwrap();
        assert!((df - d).abs() < 1e-9);
    }

    #[test]
    fn diam_examples() {
        let z2 = FiniteGroup::cyclic(2);
        let t = diam_table(DiamTarget::Group(&z2), DiamForm::F, "Z2", &[1.0], &[0.5], None).unwrap();
        assert_eq!(t.get(1.0, 0.5), Some(1));
        let v4 = FiniteGroup::z2_pow(2);
        let f = diam_table(DiamTarget::Group(&v4), DiamForm::F, "Z2^2", &[1.0], &[0.5], None).unwrap();
        let a = diam_table(DiamTarget::Group(&v4), DiamForm::A, "Z2^2", &[1.0], &[0.5], None).unwrap();
        assert_eq!((f.get(1.0, 0.5), a.get(1.0, 0.5)), (Some(2), Some(2)));
        assert!(f.to_csv().starts_with("target,form,R,eps,S,optimal_defect\nZ2^2,F,1,0.5,2,0\n"));
        assert!(diam_table(DiamTarget::Space(&crate::metric::gen::path(3)), DiamForm::F, "P3", &[1.0], &[0.5], None).is_err());
    }

    #[test]
    fn bridge_examples() {
        let v4 = FiniteGroup::z2_pow(2);
        let w = folner_to_witness(&v4, &FolnerFunction::uniform(&v4), 1.0).unwrap();
        let rep = witness::measure_witness(&witness::Witness::Lp(w), &cayley_metric(&v4), 1.0).unwrap();
        assert_eq!(rep.eps(), 0.0);

        let f = FolnerFunction::new(&v4, vec![0.5, 0.3, 0.2, 0.0]).unwrap();
        let w = folner_to_witness(&v4, &f, 1.0).unwrap();
        let rep = witness::measure_witness(&witness::Witness::Lp(w.clone()), &cayley_metric(&v4), 1.0).unwrap();
        assert!((rep.eps() - reiter_defect(&v4, &f, 1.0)).abs() < 1e-12);
        let back = witness_to_folner(&v4, &w).unwrap();
        assert!((back.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(reiter_defect(&v4, &back, 1.0) <= reiter_defect(&v4, &f, 1.0) + 1e-12);

        let dirac = LpWitness::new(1.0, (0..4).map(|x| vec![(x, 1.0)]).collect(), Params::default()).unwrap();
        assert_eq!(witness_to_folner(&v4, &dirac).unwrap(), FolnerFunction::delta(&v4));
    }

    #[test]
    fn kernel_to_function_examples() {
        let z5 = FiniteGroup::cyclic(5);
        let ones = Kernel::from_fn(5, |_, _| 1.0).unwrap();
        assert_eq!(kernel_to_function(&z5, &ones, PSD_TOL).unwrap(), vec![1.0; 5]);
        let id = Kernel::from_fn(5, |a, b| if a == b { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(kernel_to_function(&z5, &id, PSD_TOL).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let psi = [1.0, 0.5, 0.1, 0.1, 0.5];
        let k = function_kernel(&z5, &psi).unwrap();
        let phi = kernel_to_function(&z5, &k, PSD_TOL).unwrap();
        assert!(phi.iter().zip(&psi).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(classify_kernel(&function_kernel(&z5, &phi).unwrap(), PSD_TOL).unwrap().positive_type);
    }

    #[test]
    fn growth_examples() {
        let t = growth_experiment(&FiniteGroup::cyclic(2), 0.5, 1..=3, 16).unwrap();
        let d: Vec<Option<u32>> = t.rows.iter().map(|r| r.diam).collect();
        assert_eq!(&d[..2], &[Some(1), Some(2)]);
        assert!(t.nondecreasing && t.truncated_at.is_none());
        let t = growth_experiment(&FiniteGroup::cyclic(2), 0.5, 1..=6, 8).unwrap();
        assert_eq!(t.truncated_at, Some(4));
    }

    #[test]
    fn folner_json_round_trip() {
        let v4 = FiniteGroup::z2_pow(2);
        let f = FolnerFunction::new(&v4, vec![0.5, 0.25, 0.25, 0.0]).unwrap();
        let j = serde_json::to_value(f.to_json_value(&v4, "Z2^2")).unwrap();
        assert_eq!(j["S"], 1.0);
        assert_eq!(FolnerFunction::from_json_value(&v4, serde_json::from_value(j).unwrap()).unwrap(), f);
    }
}
