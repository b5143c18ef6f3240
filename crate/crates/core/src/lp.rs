//! Dense two-phase simplex with Bland's rule, generic over the number type so
//! small problems can be solved in exact rational arithmetic.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Field operations plus a sign test; `f64` uses an absolute tolerance.
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn is_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
}

/// Feasibility tolerance of the floating-point solver.
pub const FLOAT_TOL: f64 = 1e-9;

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_pos(&self) -> bool {
        *self > FLOAT_TOL
    }
    fn is_neg(&self) -> bool {
        *self < -FLOAT_TOL
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_f64(v: f64) -> Self {
        // every LP coefficient we build is an integer or a short decimal; go
        // through the decimal string so 0.1 stays 1/10
        let s = format!("{v}");
        match s.split_once('.') {
            Some((int, frac)) => {
                let num: BigInt = format!("{int}{frac}").parse().expect("finite float");
                let den = BigInt::from(10u32).pow(frac.len() as u32);
                BigRational::new(num, den)
            }
            None => <BigRational as FromPrimitive>::from_f64(v).expect("finite float"),
        }
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `minimize objective·x` subject to `rows`, `x ≥ 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub objective: Vec<(usize, f64)>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            ..Self::default()
        }
    }

    pub fn add_var(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    pub fn push(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) {
        self.rows.push(Row { coeffs, kind, rhs });
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    obj: Vec<T>,
    basis: Vec<usize>,
    width: usize,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v = v.clone() / p.clone();
            }
        }
        let prow = self.rows[r].clone();
        let nz: Vec<usize> = (0..=self.width).filter(|&j| !prow[j].is_zero()).collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for &j in &nz {
                row[j] = row[j].clone() - f.clone() * prow[j].clone();
            }
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for &j in &nz {
                self.obj[j] = self.obj[j].clone() - f.clone() * prow[j].clone();
            }
        }
        self.basis[r] = c;
    }

    /// Runs Bland-rule pivots over columns `< allowed` until optimal.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        let limit = 50_000;
        for _ in 0..limit {
            let Some(c) = (0..allowed).find(|&j| self.obj[j].is_neg()) else {
                return Ok(());
            };
            let mut best: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[c].is_pos() {
                    continue;
                }
                let ratio = row[self.width].clone() / row[c].clone();
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let diff = ratio.clone() - br.clone();
                        if diff.is_neg() || (diff.is_zero() && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = best else {
                return Err(Error::Lp("objective is unbounded".into()));
            };
            self.pivot(r, c);
        }
        Err(Error::Lp(format!("no convergence after {limit} pivots")))
    }
}

/// Solves the program with the two-phase method. Infeasible or unbounded
/// programs return `Error::Lp`.
pub fn solve<T: Scalar>(lp: &LinearProgram) -> Result<LpSolution<T>> {
    let n = lp.n_vars;
    let n_slack = lp.rows.iter().filter(|r| r.kind != RowKind::Eq).count();
    let m = lp.rows.len();
    let art0 = n + n_slack;
    let width = art0 + m;

    let mut rows = Vec::with_capacity(m);
    let mut slack = n;
    for (i, r) in lp.rows.iter().enumerate() {
        let mut row = vec![T::zero(); width + 1];
        for &(j, v) in &r.coeffs {
            if j >= n {
                return Err(Error::Lp(format!("row {i} references variable {j} of {n}")));
            }
            row[j] = row[j].clone() + T::from_f64(v);
        }
        match r.kind {
            RowKind::Le => {
                row[slack] = T::one();
                slack += 1;
            }
            RowKind::Ge => {
                row[slack] = -T::one();
                slack += 1;
            }
            RowKind::Eq => {}
        }
        row[width] = T::from_f64(r.rhs);
        if row[width].is_neg() {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
        }
        row[art0 + i] = T::one();
        rows.push(row);
    }

    // phase 1: minimize the sum of artificials
    let mut obj = vec![T::zero(); width + 1];
    for row in &rows {
        for j in (0..art0).chain(std::iter::once(width)) {
            obj[j] = obj[j].clone() - row[j].clone();
        }
    }
    let mut tab = Tableau {
        rows,
        obj,
        basis: (art0..width).collect(),
        width,
    };
    tab.optimize(art0)?;
    if (-tab.obj[width].clone()).is_pos() {
        return Err(Error::Lp("program is infeasible".into()));
    }

    // drive remaining artificials out of the basis; drop redundant rows
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= art0 {
            if let Some(c) = (0..art0).find(|&j| !tab.rows[i][j].is_zero()) {
                tab.pivot(i, c);
            } else {
                tab.rows.remove(i);
                tab.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }

    // phase 2
    let mut cost = vec![T::zero(); width + 1];
    for &(j, v) in &lp.objective {
        cost[j] = cost[j].clone() + T::from_f64(v);
    }
    let mut obj = cost.clone();
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        if cost[b].is_zero() {
            continue;
        }
        for j in 0..=width {
            obj[j] = obj[j].clone() - cost[b].clone() * row[j].clone();
        }
    }
    tab.obj = obj;
    tab.optimize(art0)?;

    let mut x = vec![T::zero(); n];
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        if b < n {
            x[b] = row[width].clone();
        }
    }
    Ok(LpSolution {
        x,
        objective: -tab.obj[width].clone(),
    })
}

/// Solves exactly (rationals) or in floats, returning `f64` values either way.
pub fn solve_f64(lp: &LinearProgram, exact: bool) -> Result<LpSolution<f64>> {
    if exact {
        let s = solve::<BigRational>(lp)?;
        Ok(LpSolution {
            x: s.x.iter().map(Scalar::to_f64).collect(),
            objective: Scalar::to_f64(&s.objective),
        })
    } else {
        solve::<f64>(lp)
    }
}
