//! Constructive conversions between witness forms with parameter bookkeeping.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::*;
use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::{self, Exponent, FiniteMetricSpace};

/// Conversion step, named by the source and target conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    /// A-family to ℓ¹ functions.
    AToL1,
    /// ℓᵖ functions to ℓ^q functions.
    LpToLq,
    /// ℓ¹ functions to an A-family by quantization.
    L1ToA,
    /// ℓᵖ functions reinterpreted as a tail witness.
    LpToTail,
    /// Tail witness with a fixed radius and mass defect.
    TailToFixedTail,
    /// Fixed-tail ℓ¹ witness restricted and renormalized.
    TailToL1,
    /// ℓ¹ functions transposed into a partition of unity.
    L1ToPartition,
    /// Partition of unity to ℓ¹ functions on `X × I`.
    PartitionToL1,
    /// ℓ² functions as unit vectors.
    L2ToVector,
    /// Unit vectors to their Gram kernel.
    VectorToKernel,
    /// Kernel to ℓ² functions through the positive square root.
    KernelToL2,
}

/// Inputs for the conversions that need more than the witness itself.
#[derive(Debug, Clone)]
pub struct ConvertParams {
    /// Scale at which variation is measured and bounds are stated.
    pub r: f64,
    /// Target exponent for `LpToLq`.
    pub q: Option<f64>,
    /// Quantization constant for `L1ToA`.
    pub m: Option<u64>,
    /// Bounded-geometry table `(r, N_r)` for `L1ToA`.
    pub n_table: Option<Vec<(f64, usize)>>,
    /// Mass defect for `TailToFixedTail`.
    pub delta: f64,
    /// Tail mass (squared ℓ²) dropped by `KernelToL2` truncation.
    pub truncation_tol: f64,
    /// Tolerance for the positive-type test of `KernelToL2`.
    pub psd_tol: f64,
}

impl ConvertParams {
    pub fn at_scale(r: f64) -> Self {
        Self {
            r,
            q: None,
            m: None,
            n_table: None,
            delta: 0.5,
            truncation_tol: 1e-12,
            psd_tol: 1e-9,
        }
    }
}

/// Input measurements and the bounds the output must meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationBound {
    pub step: Step,
    pub eps_in: f64,
    pub s_in: f64,
    /// Upper bound on the output's measured variation (or on `|1 − k|`).
    pub eps_bound: f64,
    /// Upper bound on the output's measured support radius, if the step
    /// controls it.
    pub s_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Conversion {
    pub witness: Witness,
    /// The space the output lives on, when it differs from the input space.
    pub space: Option<FiniteMetricSpace>,
    pub bound: DegradationBound,
}

impl Conversion {
    /// Measures the output and checks it against the degradation bound.
    pub fn verify(&self, input_space: &FiniteMetricSpace, r: f64) -> Result<WitnessReport> {
        let space = self.space.as_ref().unwrap_or(input_space);
        check_invariants(&self.witness, space)?;
        let rep = measure_witness(&self.witness, space, r)?;
        let slack = 1e-9;
        if rep.eps() > self.bound.eps_bound + slack {
            return Err(Error::Invariant(format!(
                "{:?}: measured ε {} exceeds bound {}",
                self.bound.step,
                rep.eps(),
                self.bound.eps_bound
            )));
        }
        if let Some(s) = self.bound.s_bound {
            if rep.s_measured > s + space.tol() {
                return Err(Error::Invariant(format!(
                    "{:?}: measured S {} exceeds bound {s}",
                    self.bound.step, rep.s_measured
                )));
            }
        }
        Ok(rep)
    }
}

/// Picks the step for a (source form, target form) pair.
pub fn step_for(w: &Witness, target: Form) -> Result<Step> {
    let step = match (w, target) {
        (Witness::AFamily(_), Form::Lp) => Step::AToL1,
        (Witness::Lp(_), Form::Lp) => Step::LpToLq,
        (Witness::Lp(_), Form::AFamily) => Step::L1ToA,
        (Witness::Lp(_), Form::Tail) => Step::LpToTail,
        (Witness::Tail(_), Form::Tail) => Step::TailToFixedTail,
        (Witness::Tail(_), Form::Lp) => Step::TailToL1,
        (Witness::Lp(_), Form::Partition) => Step::L1ToPartition,
        (Witness::Partition(_), Form::Lp) => Step::PartitionToL1,
        (Witness::Lp(_), Form::Vector) => Step::L2ToVector,
        (Witness::Vector(_), Form::Kernel) => Step::VectorToKernel,
        (Witness::Kernel(_), Form::Lp) => Step::KernelToL2,
        _ => {
            return Err(Error::UnsupportedConversion {
                from: w.form().name().into(),
                to: target.name().into(),
            })
        }
    };
    Ok(step)
}

/// Converts `w` (on `space`) to the target form.
pub fn convert_witness(w: &Witness, space: &FiniteMetricSpace, target: Form, params: &ConvertParams) -> Result<Conversion> {
    let step = step_for(w, target)?;
    let input = measure_witness(w, space, params.r)?;
    match (step, w) {
        (Step::AToL1, Witness::AFamily(a)) => a_to_l1(a, &input),
        (Step::LpToLq, Witness::Lp(l)) => lp_to_lq(l, &input, params),
        (Step::L1ToA, Witness::Lp(l)) => l1_to_a(l, space, &input, params),
        (Step::LpToTail, Witness::Lp(l)) => lp_to_tail(l, &input, params),
        (Step::TailToFixedTail, Witness::Tail(t)) => fix_tail(t, space, &input, params),
        (Step::TailToL1, Witness::Tail(t)) => tail_to_l1(t, space, &input, params),
        (Step::L1ToPartition, Witness::Lp(l)) => l1_to_partition(l, space, &input),
        (Step::PartitionToL1, Witness::Partition(p)) => partition_to_l1(p, space, &input),
        (Step::L2ToVector, Witness::Lp(l)) => l2_to_vector(l, space, &input),
        (Step::VectorToKernel, Witness::Vector(v)) => vector_to_kernel(v, &input),
        (Step::KernelToL2, Witness::Kernel(k)) => kernel_to_l2(k, space, &input, params),
        _ => unreachable!("step_for matched the witness form"),
    }
}

fn bound(step: Step, input: &WitnessReport, eps_bound: f64, s_bound: Option<f64>) -> DegradationBound {
    DegradationBound {
        step,
        eps_in: input.eps(),
        s_in: input.s_measured,
        eps_bound,
        s_bound,
        notes: Vec::new(),
    }
}

fn require_p(l_p: f64, want: f64, step: Step) -> Result<()> {
    if l_p != want {
        return Err(Error::Precondition(format!("{step:?} needs exponent {want}, witness has {l_p}")));
    }
    Ok(())
}

fn a_to_l1(a: &AFamily, input: &WitnessReport) -> Result<Conversion> {
    let xi = a
        .sets
        .iter()
        .map(|set| {
            let total = set.len() as f64;
            let mut v: Vec<(usize, f64)> = Vec::new();
            for &(y, _) in set {
                match v.last_mut() {
                    Some(last) if last.0 == y => last.1 += 1.0,
                    _ => v.push((y, 1.0)),
                }
            }
            v.into_iter().map(|(y, c)| (y, c / total)).collect()
        })
        .collect();
    let out = LpWitness::new(1.0, xi, Params { r: Some(input.r_target), s: a.params.s, ..Params::default() })?;
    Ok(Conversion {
        witness: Witness::Lp(out),
        space: None,
        bound: bound(Step::AToL1, input, 2.0 * input.eps(), Some(input.s_measured)),
    })
}

/// `(p · 2^{(p−1)/p} · ε)^{1/q}`, the ℓᵖ → ℓ^q variation bound.
pub fn lp_to_lq_bound(p: f64, q: f64, eps: f64) -> f64 {
    (p * 2f64.powf((p - 1.0) / p) * eps).powf(1.0 / q)
}

fn lp_to_lq(l: &LpWitness, input: &WitnessReport, params: &ConvertParams) -> Result<Conversion> {
    let q = params.q.ok_or_else(|| Error::InvalidInput("target exponent q required".into()))?;
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidInput(format!("target exponent {q} outside [1, ∞)")));
    }
    let e = l.p / q;
    let xi = l.xi.iter().map(|v| v.iter().map(|&(y, a)| (y, a.powf(e))).collect()).collect();
    let out = LpWitness::new(q, xi, Params { r: Some(input.r_target), s: l.params.s, ..Params::default() })?;
    let mut b = bound(Step::LpToLq, input, lp_to_lq_bound(l.p, q, input.eps()), Some(input.s_measured));
    if l.p != 1.0 {
        b.notes.push("source exponent above 1: bound (p·2^((p−1)/p)·ε)^(1/q)".into());
    }
    Ok(Conversion {
        witness: Witness::Lp(out),
        space: None,
        bound: b,
    })
}

/// Largest-remainder rounding of a probability vector to multiples of `1/m`
/// summing to exactly `m`.
pub fn quantize(v: &Sparse, m: u64) -> Vec<(usize, u64)> {
    let scaled: Vec<(usize, f64)> = v.iter().map(|&(y, a)| (y, a * m as f64)).collect();
    let mut counts: Vec<(usize, u64)> = scaled.iter().map(|&(y, s)| (y, s.floor() as u64)).collect();
    let assigned: u64 = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..scaled.len()).collect();
    // stable: larger remainder first, lower index on ties
    order.sort_by(|&i, &j| {
        let ri = scaled[i].1 - scaled[i].1.floor();
        let rj = scaled[j].1 - scaled[j].1.floor();
        rj.total_cmp(&ri)
    });
    for &i in order.iter().take(m.saturating_sub(assigned) as usize) {
        counts[i].1 += 1;
    }
    counts.retain(|c| c.1 > 0);
    counts
}

fn l1_to_a(l: &LpWitness, space: &FiniteMetricSpace, input: &WitnessReport, params: &ConvertParams) -> Result<Conversion> {
    require_p(l.p, 1.0, Step::L1ToA)?;
    let table = params.n_table.as_ref().ok_or_else(|| {
        Error::Precondition("quantization needs the bounded-geometry table N_r".into())
    })?;
    let s = input.s_measured;
    let t = space.tol();
    let n_bound = table
        .iter()
        .filter(|&&(r, _)| r + t >= s)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|e| e.1)
        .ok_or_else(|| Error::Precondition(format!("N_r table has no radius ≥ support radius {s}")))?;
    let eps = input.eps();
    let m = match params.m {
        Some(m) if m > 0 => m,
        Some(_) => return Err(Error::InvalidInput("quantization constant must be positive".into())),
        None if eps > 0.0 && eps.is_finite() => (n_bound as f64 / eps).floor() as u64 + 1,
        None => return Err(Error::Precondition("input has zero variation; supply M explicitly".into())),
    };
    let sets = l
        .xi
        .iter()
        .map(|v| {
            quantize(v, m)
                .into_iter()
                .flat_map(|(y, c)| (1..=c as u32).map(move |j| (y, j)))
                .collect()
        })
        .collect();
    let out = AFamily::new(sets, Params { r: Some(input.r_target), s: l.params.s, ..Params::default() })?;
    let eff = eps.max(n_bound as f64 / m as f64);
    let eps_bound = if 1.5 * eff < 1.0 { 3.0 * eff / (1.0 - 1.5 * eff) } else { f64::INFINITY };
    let mut b = bound(Step::L1ToA, input, eps_bound, Some(s));
    b.notes.push(format!("N = {n_bound}, M = {m}, effective ε = {eff}"));
    Ok(Conversion {
        witness: Witness::AFamily(out),
        space: None,
        bound: b,
    })
}

fn lp_to_tail(l: &LpWitness, input: &WitnessReport, _params: &ConvertParams) -> Result<Conversion> {
    let out = TailWitness {
        p: l.p,
        zeta: l.xi.clone(),
        s: input.s_measured,
        delta: 0.0,
        delta_prime: None,
        params: Params {
            r: Some(input.r_target),
            p: Some(l.p),
            s: Some(input.s_measured),
            delta: Some(0.0),
            ..Params::default()
        },
    };
    Ok(Conversion {
        witness: Witness::Tail(out),
        space: None,
        bound: bound(Step::LpToTail, input, input.eps(), None),
    })
}

fn fix_tail(tw: &TailWitness, space: &FiniteMetricSpace, input: &WitnessReport, params: &ConvertParams) -> Result<Conversion> {
    let delta = params.delta;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("δ = {delta} outside (0, 1)")));
    }
    let eps = input.eps();
    let dp = delta.min(eps.powf(tw.p));
    // smallest radius at which every ζ_x keeps p-mass above 1 − δ′, or all of it
    let radii = space.distance_values();
    let ok_at = |s: f64| {
        tw.zeta.iter().enumerate().all(|(x, z)| {
            let m = ball_norm(space, x, z, s, tw.p).powf(tw.p);
            m > 1.0 - dp || (m - lp_norm(z, tw.p).powf(tw.p)).abs() <= NORM_TOL
        })
    };
    let s = radii.into_iter().find(|&s| ok_at(s)).unwrap_or(space.diameter());
    let out = TailWitness {
        p: tw.p,
        zeta: tw.zeta.clone(),
        s,
        delta,
        delta_prime: Some(dp),
        params: Params {
            r: Some(input.r_target),
            eps: Some(eps),
            p: Some(tw.p),
            s: Some(s),
            delta: Some(delta),
        },
    };
    let mut b = bound(Step::TailToFixedTail, input, eps, None);
    b.notes.push(format!("δ = {delta}, δ′ = {dp}, S = {s}"));
    Ok(Conversion {
        witness: Witness::Tail(out),
        space: None,
        bound: b,
    })
}

fn tail_to_l1(tw: &TailWitness, space: &FiniteMetricSpace, input: &WitnessReport, params: &ConvertParams) -> Result<Conversion> {
    require_p(tw.p, 1.0, Step::TailToL1)?;
    let r = params.r;
    let t = space.tol();
    let (inb, ann) = tail_masses(space, tw, r);
    let delta = 1.0 - inb;
    if !(delta < 1.0) {
        return Err(Error::Precondition("some ζ_x has no mass in its ball".into()));
    }
    let xi: Vec<Vec<(usize, f64)>> = tw
        .zeta
        .iter()
        .enumerate()
        .map(|(x, z)| {
            let theta: Sparse = z.iter().copied().filter(|&(y, _)| space.d(x, y) <= r + tw.s + t).collect();
            let mass = lp_norm(&theta, 1.0);
            theta.into_iter().map(|(y, a)| (y, a / mass)).collect()
        })
        .collect();
    let out = LpWitness::new(1.0, xi, Params { r: Some(r), s: Some(r + tw.s), ..Params::default() })?;
    let eps_prime = input.eps().max(ann);
    let mut b = bound(Step::TailToL1, input, 6.0 * eps_prime / (1.0 - delta), Some(r + tw.s));
    b.notes.push(format!("ε′ = {eps_prime}, δ = {delta}"));
    Ok(Conversion {
        witness: Witness::Lp(out),
        space: None,
        bound: b,
    })
}

fn l1_to_partition(l: &LpWitness, space: &FiniteMetricSpace, input: &WitnessReport) -> Result<Conversion> {
    require_p(l.p, 1.0, Step::L1ToPartition)?;
    let n = space.len();
    let mut phi = vec![vec![0.0; n]; n];
    for (y, v) in l.xi.iter().enumerate() {
        for &(x, a) in v {
            phi[x][y] = a;
        }
    }
    let mut cover = Vec::new();
    let mut funcs = Vec::new();
    for f in phi {
        let u: Vec<usize> = (0..n).filter(|&y| f[y] != 0.0).collect();
        if !u.is_empty() {
            cover.push(u);
            funcs.push(f);
        }
    }
    let out = PartitionWitness::new(cover, funcs, Params { r: Some(input.r_target), ..Params::default() })?;
    let mut b = bound(Step::L1ToPartition, input, input.eps(), Some(2.0 * input.s_measured));
    b.notes.push("cover sets are supports inside B(x, S); their diameter is at most 2S".into());
    Ok(Conversion {
        witness: Witness::Partition(out),
        space: None,
        bound: b,
    })
}

/// `{0, …, m−1}` with the discrete metric.
pub fn discrete_space(m: usize) -> FiniteMetricSpace {
    let rows = (0..m).map(|i| (0..m).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect();
    FiniteMetricSpace::from_matrix(rows).expect("discrete metric")
}

fn partition_to_l1(pw: &PartitionWitness, space: &FiniteMetricSpace, input: &WitnessReport) -> Result<Conversion> {
    let m = pw.cover.len();
    if m == 0 || pw.cover.iter().any(Vec::is_empty) {
        return Err(Error::Precondition("cover sets must be nonempty".into()));
    }
    let prod = metric::lp_product(space, &discrete_space(m), Exponent::Finite(1.0))?;
    let anchors: Vec<usize> = pw.cover.iter().map(|u| u[0]).collect();
    let xi = (0..space.len() * m)
        .map(|xi_idx| {
            let x = xi_idx / m;
            (0..m)
                .filter(|&j| pw.phi[j][x] != 0.0)
                .map(|j| (anchors[j] * m + j, pw.phi[j][x]))
                .collect()
        })
        .collect();
    let out = LpWitness::new(1.0, xi, Params { r: Some(input.r_target), ..Params::default() })?;
    Ok(Conversion {
        witness: Witness::Lp(out),
        space: Some(prod),
        bound: bound(Step::PartitionToL1, input, input.eps(), Some(input.s_measured + 2.0)),
    })
}

fn l2_to_vector(l: &LpWitness, space: &FiniteMetricSpace, input: &WitnessReport) -> Result<Conversion> {
    require_p(l.p, 2.0, Step::L2ToVector)?;
    let n = space.len();
    let coords = l
        .xi
        .iter()
        .map(|v| {
            let mut c = vec![0.0; n];
            for &(y, a) in v {
                c[y] = a;
            }
            c
        })
        .collect();
    let out = VectorWitness {
        coords,
        params: Params {
            r: Some(input.r_target),
            s: Some(2.0 * input.s_measured),
            ..Params::default()
        },
    };
    Ok(Conversion {
        witness: Witness::Vector(out),
        space: None,
        bound: bound(Step::L2ToVector, input, input.eps(), Some(2.0 * input.s_measured)),
    })
}

fn vector_to_kernel(v: &VectorWitness, input: &WitnessReport) -> Result<Conversion> {
    let n = v.coords.len();
    let k = DMatrix::from_fn(n, n, |i, j| v.coords[i].iter().zip(&v.coords[j]).map(|(a, b)| a * b).sum());
    let out = KernelWitness {
        k,
        params: Params {
            r: Some(input.r_target),
            s: Some(input.s_measured),
            ..Params::default()
        },
    };
    let e = input.eps();
    Ok(Conversion {
        witness: Witness::Kernel(out),
        space: None,
        bound: bound(Step::VectorToKernel, input, e * e / 2.0, Some(input.s_measured)),
    })
}

/// Table bound `2√(6ε/(1−2ε))` for the kernel-to-ℓ² step; infinite when
/// `ε ≥ 1/2`.
pub fn kernel_to_l2_table_bound(eps: f64) -> f64 {
    if eps < 0.5 {
        2.0 * (6.0 * eps / (1.0 - 2.0 * eps)).sqrt()
    } else {
        f64::INFINITY
    }
}

fn kernel_to_l2(kw: &KernelWitness, space: &FiniteMetricSpace, input: &WitnessReport, params: &ConvertParams) -> Result<Conversion> {
    let k = &kw.k;
    let n = k.nrows();
    let scale = linalg::max_abs(k).max(1.0);
    let min_eig = input.min_eigenvalue.unwrap_or(0.0);
    if min_eig < -params.psd_tol * scale {
        return Err(Error::Precondition(format!("kernel is not positive type (eigenvalue {min_eig})")));
    }
    let (root, clipped) = linalg::psd_sqrt(k);
    // reconstruction error of the square root, clipping included
    let recon = linalg::max_abs(&(&root * &root - k));
    let rows: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|y| root[(x, y)].abs()).collect()).collect();
    // smallest radius whose tail (squared ℓ² mass outside the ball) is
    // below the tolerance for every row
    let t = space.tol();
    let tail_at = |rho: f64| {
        (0..n)
            .map(|x| (0..n).filter(|&y| space.d(x, y) > rho + t).map(|y| rows[x][y] * rows[x][y]).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let radii = space.distance_values();
    let rho = radii
        .iter()
        .copied()
        .find(|&r| tail_at(r) <= params.truncation_tol)
        .unwrap_or(space.diameter());
    let mu = tail_at(rho);
    let xi: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|x| {
            let kept: Vec<(usize, f64)> = (0..n).filter(|&y| space.d(x, y) <= rho + t).map(|y| (y, rows[x][y])).collect();
            let norm = kept.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            kept.into_iter().map(|(y, a)| (y, a / norm)).collect()
        })
        .collect();
    let out = LpWitness::new(2.0, xi, Params { r: Some(input.r_target), s: Some(rho), ..Params::default() })?;
    let eps = input.eps();
    let base = (2.0 * eps + 2.0 * recon).sqrt();
    let sharp = if mu == 0.0 {
        base
    } else {
        2.0 * (base + 2.0 * mu.sqrt()) / (1.0 - mu.sqrt())
    };
    let mut b = bound(Step::KernelToL2, input, sharp, Some(rho));
    b.notes.push(format!("truncation radius {rho}, dropped squared mass {mu}, clipped eigenvalue mass {clipped}, square-root error {recon}"));
    b.notes.push(format!("table bound 2√(6ε/(1−2ε)) = {}", kernel_to_l2_table_bound(eps)));
    Ok(Conversion {
        witness: Witness::Lp(out),
        space: None,
        bound: b,
    })
}
