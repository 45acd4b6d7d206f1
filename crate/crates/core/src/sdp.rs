//! Primal–dual interior-point solver for [`BlockSdp`] problems made of many
//! small PSD blocks plus free scalars.
//!
//! Internally every problem is put in the standard form
//!
//! ```text
//! (P)  min ⟨C, X⟩ + g·z   s.t.  A(X) + B z = b,  X ⪰ 0
//! (D)  max b·y            s.t.  A*(y) + S = C,  Bᵀ y = g,  S ⪰ 0
//! ```
//!
//! and solved with Mehrotra predictor–corrector steps in the Nesterov–Todd
//! scaling. The Schur complement is assembled block by block and factored
//! per connected group of constraints; free scalars are eliminated through
//! a small dense system on top of it.
//!
//! Before that, free scalars that are alone in some row are substituted out,
//! and problems of the form `X = C₀ + Σ z_j F_j ⪰ 0` (every block entry
//! pinned by one row) are handed to the solver through their dual, which has
//! one equality per scalar. Large objectives are normalized first.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones::{BlockSdp, LinearForm, Sense};
use crate::error::Result;
use crate::linalg::min_eigenvalue;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

/// Per-iteration statistics in the internal minimization form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    /// `⟨X, S⟩`.
    pub complementarity: f64,
    /// `primal_obj − dual_obj` minus the terms caused by infeasibility of
    /// the iterate; equals `⟨X, S⟩` in exact arithmetic.
    pub corrected_gap: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Objective at the primal point, in the problem's own sense. For
    /// feasibility problems this is the largest uniform eigenvalue slack.
    pub primal_value: f64,
    /// Dual objective, in the problem's own sense.
    pub dual_value: f64,
    /// `|primal − dual| / (1 + |primal| + |dual|)`, on the normalized
    /// objective when it was rescaled (see [`OBJECTIVE_NORMALIZE`]).
    pub gap: f64,
    pub block_values: Vec<DMatrix<f64>>,
    pub scalar_values: Vec<f64>,
    /// Multipliers of the constraints for the minimization form (maximize
    /// problems are negated); removed dependent rows get 0.
    pub dual_multipliers: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<IterRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max_i |A_i(X) + B_i z − b_i| / (1 + ‖b‖∞)`.
    pub primal_infeas: f64,
    /// Negative part of `λ_min(C − A*(y))` relative to `1 + ‖C‖∞`, or the
    /// free-scalar residual `‖g − Bᵀy‖∞ / (1 + ‖g‖∞)`, whichever is larger.
    pub dual_infeas: f64,
    /// Smallest eigenvalue over all blocks of `X`.
    pub min_eig: f64,
}

/// Symmetric sparse matrix listed with both mirrored positions.
#[derive(Debug, Clone, Default)]
struct SymEntries(Vec<(usize, usize, f64)>);

impl SymEntries {
    fn push_upper(&mut self, r: usize, c: usize, coef: f64) {
        if r == c {
            self.0.push((r, r, coef));
        } else {
            self.0.push((r, c, coef / 2.0));
            self.0.push((c, r, coef / 2.0));
        }
    }

    fn dot(&self, x: &DMatrix<f64>) -> f64 {
        self.0.iter().map(|&(r, c, v)| v * x[(r, c)]).sum()
    }

    fn add_to(&self, x: &mut DMatrix<f64>, scale: f64) {
        for &(r, c, v) in &self.0 {
            x[(r, c)] += scale * v;
        }
    }

    fn trace(&self) -> f64 {
        self.0.iter().filter(|e| e.0 == e.1).map(|e| e.2).sum()
    }
}

/// Problem in the internal standard form.
struct Standard {
    sizes: Vec<usize>,
    /// Per row: touched blocks with their coefficient matrices.
    rows: Vec<Vec<(usize, SymEntries)>>,
    /// Per row: free-scalar coefficients.
    row_scalars: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    c: Vec<DMatrix<f64>>,
    g: Vec<f64>,
    nscalars: usize,
}

impl Standard {
    fn apply(&self, x: &[DMatrix<f64>], z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.row_scalars)
            .map(|(blocks, sc)| {
                blocks.iter().map(|(bk, a)| a.dot(&x[*bk])).sum::<f64>()
                    + sc.iter().map(|&(i, v)| v * z[i]).sum::<f64>()
            })
            .collect()
    }

    fn adjoint(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> =
            self.sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (row, &yi) in self.rows.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for (bk, a) in row {
                a.add_to(&mut out[*bk], yi);
            }
        }
        out
    }

    fn adjoint_scalars(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nscalars];
        for (sc, &yi) in self.row_scalars.iter().zip(y) {
            for &(i, v) in sc {
                out[i] += v * yi;
            }
        }
        out
    }
}

fn form_to_blocks(form: &LinearForm) -> (BTreeMap<usize, SymEntries>, Vec<(usize, f64)>) {
    let mut blocks: BTreeMap<usize, SymEntries> = BTreeMap::new();
    for e in &form.entries {
        blocks
            .entry(e.block)
            .or_default()
            .push_upper(e.row, e.col, e.coef);
    }
    (blocks, form.scalars.clone())
}

/// Objective of the minimization form, per block and per scalar.
fn min_objective(problem: &BlockSdp) -> (Vec<DMatrix<f64>>, Vec<f64>) {
    let sign = match problem.sense {
        Sense::Maximize => -1.0,
        _ => 1.0,
    };
    let mut c: Vec<DMatrix<f64>> = problem
        .blocks
        .iter()
        .map(|b| DMatrix::zeros(b.size, b.size))
        .collect();
    let mut g = vec![0.0; problem.scalars.len()];
    if problem.sense != Sense::Feasibility {
        let (blocks, sc) = form_to_blocks(&problem.objective);
        for (bk, a) in blocks {
            a.add_to(&mut c[bk], sign);
        }
        for (i, v) in sc {
            g[i] += sign * v;
        }
    }
    (c, g)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Entry(usize, usize, usize),
    Scalar(usize),
}

fn row_vector(form: &LinearForm) -> BTreeMap<Key, f64> {
    let mut v = BTreeMap::new();
    for e in &form.entries {
        *v.entry(Key::Entry(e.block, e.row, e.col)).or_insert(0.0) += e.coef;
    }
    for &(i, c) in &form.scalars {
        *v.entry(Key::Scalar(i)).or_insert(0.0) += c;
    }
    v.retain(|_, c| *c != 0.0);
    v
}

enum Presolve {
    Keep(Vec<usize>),
    Inconsistent,
}

/// Drops linearly dependent rows (modified Gram–Schmidt with relative
/// threshold 1e-10). Rows owning a variable no other row touches are
/// independent and skip the orthogonalization.
fn presolve(problem: &BlockSdp, feas_tol: f64) -> Presolve {
    const DEP_TOL: f64 = 1e-10;
    let vecs: Vec<BTreeMap<Key, f64>> = problem
        .constraints
        .iter()
        .map(|c| row_vector(&c.form))
        .collect();
    let mut count: BTreeMap<Key, usize> = BTreeMap::new();
    for v in &vecs {
        for k in v.keys() {
            *count.entry(*k).or_insert(0) += 1;
        }
    }
    let mut keep = Vec::new();
    let mut basis: Vec<(BTreeMap<Key, f64>, f64)> = Vec::new();
    let mut rest = Vec::new();
    for (i, v) in vecs.iter().enumerate() {
        if v.keys().any(|k| count[k] == 1) {
            keep.push(i);
        } else {
            rest.push(i);
        }
    }
    for i in rest {
        let mut v = vecs[i].clone();
        let mut rhs = problem.constraints[i].rhs;
        let norm0 = v.values().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            if rhs.abs() > feas_tol * (1.0 + rhs.abs()) {
                return Presolve::Inconsistent;
            }
            continue;
        }
        for (q, qr) in &basis {
            let dot: f64 = v
                .iter()
                .filter_map(|(k, x)| q.get(k).map(|y| x * y))
                .sum();
            if dot != 0.0 {
                for (k, y) in q {
                    *v.entry(*k).or_insert(0.0) -= dot * y;
                }
                rhs -= dot * qr;
            }
        }
        let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= DEP_TOL * norm0 {
            let scale = 1.0 + problem.constraints[i].rhs.abs();
            if rhs.abs() > feas_tol.max(1e-9) * scale {
                return Presolve::Inconsistent;
            }
            continue;
        }
        v.retain(|_, x| *x != 0.0);
        for x in v.values_mut() {
            *x /= norm;
        }
        basis.push((v, rhs / norm));
        keep.push(i);
    }
    keep.sort_unstable();
    Presolve::Keep(keep)
}

struct Built {
    std: Standard,
    kept_rows: Vec<usize>,
    /// Index of the uniform slack scalar for feasibility problems.
    slack: Option<usize>,
}

fn build_standard(problem: &BlockSdp, kept_rows: Vec<usize>) -> Built {
    let (c, mut g) = min_objective(problem);
    let mut sizes: Vec<usize> = problem.blocks.iter().map(|b| b.size).collect();
    let mut rows = Vec::new();
    let mut row_scalars = Vec::new();
    let mut b = Vec::new();
    for &i in &kept_rows {
        let con = &problem.constraints[i];
        let (blocks, sc) = form_to_blocks(&con.form);
        rows.push(blocks.into_iter().collect::<Vec<_>>());
        row_scalars.push(sc);
        b.push(con.rhs);
    }
    let mut nscalars = problem.scalars.len();
    let mut c = c;
    let mut slack = None;
    if problem.sense == Sense::Feasibility {
        // X = Y + τ I with Y ⪰ 0; maximize τ ≤ cap.
        let tau = nscalars;
        nscalars += 1;
        g.push(-1.0);
        for (row, sc) in rows.iter().zip(row_scalars.iter_mut()) {
            let tr: f64 = row.iter().map(|(_, a)| a.trace()).sum();
            if tr != 0.0 {
                sc.push((tau, tr));
            }
        }
        let cap = 1.0 + b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let cap_block = sizes.len();
        sizes.push(1);
        c.push(DMatrix::zeros(1, 1));
        let mut e = SymEntries::default();
        e.push_upper(0, 0, 1.0);
        rows.push(vec![(cap_block, e)]);
        row_scalars.push(vec![(tau, 1.0)]);
        b.push(cap);
        slack = Some(tau);
    }
    Built {
        std: Standard {
            sizes,
            rows,
            row_scalars,
            b,
            c,
            g,
            nscalars,
        },
        kept_rows,
        slack,
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn max_abs_mats(v: &[DMatrix<f64>]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.amax()))
}

fn frob(v: &[DMatrix<f64>]) -> f64 {
    v.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

/// Nesterov–Todd scaling of one block: `G` with `Gᵀ S G = G⁻¹ X G⁻ᵀ = D`.
struct NtScaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: Vec<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<NtScaling> {
    let l = x.clone().cholesky()?.l();
    let r = s.clone().cholesky()?.l();
    let svd = (r.transpose() * &l).svd(true, true);
    let u_t = svd.v_t?;
    svd.u?;
    let v = u_t.transpose();
    let d: Vec<f64> = svd.singular_values.iter().copied().collect();
    if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return None;
    }
    let n = x.nrows();
    let dm12 = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / d[i].sqrt() } else { 0.0 });
    let dp12 = DMatrix::from_fn(n, n, |i, j| if i == j { d[i].sqrt() } else { 0.0 });
    let g = &l * &v * dm12;
    let l_inv = l.clone().try_inverse()?;
    let g_inv = dp12 * v.transpose() * l_inv;
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    Some(NtScaling { g, g_inv, w, d })
}

/// Largest `α ≤ cap` keeping `X + αΔX` PSD, given `X = LLᵀ`.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(ch) = x.clone().cholesky() else {
        return 0.0;
    };
    let l = ch.l();
    let Some(tmp) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(mut m) = l.solve_lower_triangular(&tmp.transpose()) else {
        return 0.0;
    };
    symmetrize(&mut m);
    let lmin = min_eigenvalue(&m);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Factored Schur complement: per connected group of rows, plus the
/// elimination system for the free scalars.
///
/// Each group keeps the scaled constraint matrix `F` (columns `svec(Gᵀ A_i G)`)
/// with `M = FᵀF`, and factors `F = QR` so the normal equations are never
/// formed explicitly.
struct Kkt {
    groups: Vec<Vec<usize>>,
    cols: Vec<DMatrix<f64>>,
    factors: Vec<GroupFactor>,
    scalars: Option<ScalarFactor>,
}

/// Factor of the free-scalar Schur complement `Bᵀ M⁻¹ B`.
enum ScalarFactor {
    /// `Bᵀ M⁻¹ B = QᵀQ` with `Q` stacked from `R_g⁻ᵀ B_g`; keeps the
    /// per-group pieces and the triangular factor of `Q`.
    Root { pieces: Vec<DMatrix<f64>>, r: DMatrix<f64> },
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

enum GroupFactor {
    Qr(DMatrix<f64>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl GroupFactor {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            GroupFactor::Qr(r) => {
                let u = r.tr_solve_upper_triangular(rhs)?;
                r.solve_upper_triangular(&u)
            }
            GroupFactor::Lu(l) => l.solve(rhs),
        }
    }
}

/// `svec(Gᵀ A G)` appended to `out` (off-diagonals weighted by √2).
fn scaled_svec(a: &SymEntries, g: &DMatrix<f64>, out: &mut [f64]) {
    let n = g.nrows();
    let mut m = DMatrix::zeros(n, n);
    for &(r, c, v) in &a.0 {
        for i in 0..n {
            let gri = g[(r, i)] * v;
            if gri == 0.0 {
                continue;
            }
            for j in 0..n {
                m[(i, j)] += gri * g[(c, j)];
            }
        }
    }
    let mut p = 0;
    for j in 0..n {
        for i in 0..=j {
            out[p] = if i == j {
                m[(i, i)]
            } else {
                (m[(i, j)] + m[(j, i)]) * std::f64::consts::FRAC_1_SQRT_2
            };
            p += 1;
        }
    }
}

fn row_groups(std: &Standard) -> Vec<Vec<usize>> {
    let m = std.rows.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut owner: Vec<Option<usize>> = vec![None; std.sizes.len()];
    for (i, row) in std.rows.iter().enumerate() {
        for (bk, _) in row {
            match owner[*bk] {
                None => owner[*bk] = Some(i),
                Some(j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..m {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

impl Kkt {
    fn new(std: &Standard, groups: &[Vec<usize>], scal: &[NtScaling]) -> Option<Kkt> {
        let mut cols = Vec::with_capacity(groups.len());
        let mut factors = Vec::with_capacity(groups.len());
        for g in groups {
            let mut offset: BTreeMap<usize, usize> = BTreeMap::new();
            let mut total = 0;
            for &i in g {
                for (bk, _) in &std.rows[i] {
                    offset.entry(*bk).or_insert_with(|| {
                        let o = total;
                        let n = std.sizes[*bk];
                        total += n * (n + 1) / 2;
                        o
                    });
                }
            }
            let mut f = DMatrix::zeros(total, g.len());
            for (p, &i) in g.iter().enumerate() {
                for (bk, a) in &std.rows[i] {
                    let n = std.sizes[*bk];
                    let o = offset[bk];
                    let mut col = f.column_mut(p);
                    scaled_svec(a, &scal[*bk].g, &mut col.as_mut_slice()[o..o + n * (n + 1) / 2]);
                }
            }
            let r = if total >= g.len() {
                let r = f.clone().qr().r();
                let top = r.diagonal().amax();
                let ok = top > 0.0
                    && top.is_finite()
                    && r.diagonal().iter().all(|d| d.abs() > 1e-15 * top);
                ok.then_some(r)
            } else {
                None
            };
            match r {
                Some(r) => factors.push(GroupFactor::Qr(r)),
                None => {
                    let mut mat = f.transpose() * &f;
                    symmetrize(&mut mat);
                    let lu = mat.lu();
                    if !lu.is_invertible() {
                        return None;
                    }
                    factors.push(GroupFactor::Lu(lu));
                }
            }
            cols.push(f);
        }
        let mut kkt = Kkt {
            groups: groups.to_vec(),
            cols,
            factors,
            scalars: None,
        };
        if std.nscalars > 0 {
            kkt.scalars = Some(match kkt.scalar_root(std) {
                Some(f) => f,
                None => kkt.scalar_explicit(std)?,
            });
        }
        Some(kkt)
    }

    fn scalar_root(&self, std: &Standard) -> Option<ScalarFactor> {
        let ns = std.nscalars;
        let mut pieces = Vec::with_capacity(self.groups.len());
        let mut total = 0;
        for (g, f) in self.groups.iter().zip(&self.factors) {
            let GroupFactor::Qr(r) = f else {
                return None;
            };
            let mut b = DMatrix::zeros(g.len(), ns);
            for (p, &i) in g.iter().enumerate() {
                for &(j, v) in &std.row_scalars[i] {
                    b[(p, j)] += v;
                }
            }
            let q = r.tr_solve_upper_triangular(&b)?;
            total += g.len();
            pieces.push(q);
        }
        if total < ns {
            return None;
        }
        let mut stacked = DMatrix::zeros(total, ns);
        let mut at = 0;
        for q in &pieces {
            stacked.rows_mut(at, q.nrows()).copy_from(q);
            at += q.nrows();
        }
        let r = stacked.qr().r();
        let top = r.diagonal().amax();
        let ok = top > 0.0 && top.is_finite() && r.diagonal().iter().all(|d| d.abs() > 1e-15 * top);
        ok.then_some(ScalarFactor::Root { pieces, r })
    }

    fn scalar_explicit(&self, std: &Standard) -> Option<ScalarFactor> {
        let ns = std.nscalars;
        let mut sz = DMatrix::zeros(ns, ns);
        for col in 0..ns {
            let bcol: Vec<f64> = std
                .row_scalars
                .iter()
                .map(|sc| sc.iter().filter(|e| e.0 == col).map(|e| e.1).sum())
                .collect();
            if bcol.iter().all(|&x| x == 0.0) {
                continue;
            }
            let minv_b = self.m_solve(&bcol)?;
            let bt = std.adjoint_scalars(&minv_b);
            for (r, v) in bt.into_iter().enumerate() {
                sz[(r, col)] = v;
            }
        }
        symmetrize(&mut sz);
        let lu = sz.lu();
        lu.is_invertible().then_some(ScalarFactor::Lu(lu))
    }

    fn m_solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let mut out = vec![0.0; rhs.len()];
        for (g, f) in self.groups.iter().zip(&self.factors) {
            let r = DVector::from_iterator(g.len(), g.iter().map(|&i| rhs[i]));
            if r.iter().all(|&x| x == 0.0) {
                continue;
            }
            let s = f.solve(&r)?;
            for (p, &i) in g.iter().enumerate() {
                out[i] = s[p];
            }
        }
        Some(out)
    }

    fn m_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (g, f) in self.groups.iter().zip(&self.cols) {
            let vg = DVector::from_iterator(g.len(), g.iter().map(|&i| v[i]));
            let mv = f.tr_mul(&(f * vg));
            for (p, &i) in g.iter().enumerate() {
                out[i] = mv[p];
            }
        }
        out
    }

    /// Solves `M Δy + B Δz = r1`, `Bᵀ Δy = r2` with two rounds of
    /// iterative refinement.
    fn solve(&self, std: &Standard, r1: &[f64], r2: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let (mut dy, mut dz) = self.solve_once(std, r1, r2)?;
        for _ in 0..2 {
            let mdy = self.m_apply(&dy);
            let e1: Vec<f64> = (0..r1.len())
                .map(|i| {
                    let bz: f64 = std.row_scalars[i].iter().map(|&(j, v)| v * dz[j]).sum();
                    r1[i] - mdy[i] - bz
                })
                .collect();
            let bty = std.adjoint_scalars(&dy);
            let e2: Vec<f64> = r2.iter().zip(&bty).map(|(a, b)| a - b).collect();
            let (cy, cz) = self.solve_once(std, &e1, &e2)?;
            for (a, b) in dy.iter_mut().zip(&cy) {
                *a += b;
            }
            for (a, b) in dz.iter_mut().zip(&cz) {
                *a += b;
            }
        }
        Some((dy, dz))
    }

    fn solve_once(&self, std: &Standard, r1: &[f64], r2: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.scalars {
            None => Some((self.m_solve(r1)?, Vec::new())),
            Some(ScalarFactor::Root { pieces, r }) => {
                // w = R⁻ᵀ r1 per group, Δz from QᵀQ Δz = Qᵀw − r2, Δy = R⁻¹(w − QΔz)
                let mut ws = Vec::with_capacity(self.groups.len());
                let mut rhs = DVector::from_iterator(r2.len(), r2.iter().map(|v| -v));
                for ((g, f), q) in self.groups.iter().zip(&self.factors).zip(pieces) {
                    let GroupFactor::Qr(rg) = f else {
                        return None;
                    };
                    let rv = DVector::from_iterator(g.len(), g.iter().map(|&i| r1[i]));
                    let w = rg.tr_solve_upper_triangular(&rv)?;
                    rhs += q.tr_mul(&w);
                    ws.push(w);
                }
                let u = r.tr_solve_upper_triangular(&rhs)?;
                let dz = r.solve_upper_triangular(&u)?;
                let mut dy = vec![0.0; r1.len()];
                for (((g, f), q), w) in self.groups.iter().zip(&self.factors).zip(pieces).zip(ws) {
                    let GroupFactor::Qr(rg) = f else {
                        return None;
                    };
                    let v = rg.solve_upper_triangular(&(w - q * &dz))?;
                    for (p, &i) in g.iter().enumerate() {
                        dy[i] = v[p];
                    }
                }
                Some((dy, dz.iter().copied().collect()))
            }
            Some(ScalarFactor::Lu(lu)) => {
                let minv_r1 = self.m_solve(r1)?;
                let bt = std.adjoint_scalars(&minv_r1);
                let rhs = DVector::from_iterator(bt.len(), bt.iter().zip(r2).map(|(a, b)| a - b));
                let dz = lu.solve(&rhs)?;
                let dz: Vec<f64> = dz.iter().copied().collect();
                let mut r = r1.to_vec();
                for (ri, sc) in r.iter_mut().zip(&std.row_scalars) {
                    for &(j, v) in sc {
                        *ri -= v * dz[j];
                    }
                }
                let dy = self.m_solve(&r)?;
                Some((dy, dz))
            }
        }
    }
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dz: Vec<f64>,
    dy: Vec<f64>,
    ds: Vec<DMatrix<f64>>,
}

fn direction(
    std: &Standard,
    kkt: &Kkt,
    scal: &[NtScaling],
    rp: &[f64],
    rd: &[DMatrix<f64>],
    rg: &[f64],
    k: &[DMatrix<f64>],
) -> Option<Direction> {
    // ΔX = K − W(Rd − A*Δy)W, so M Δy + B Δz = rp − A(K) + A(W Rd W).
    let wrw: Vec<DMatrix<f64>> = scal
        .iter()
        .zip(rd)
        .map(|(s, r)| &s.w * r * &s.w)
        .collect();
    let zeros = vec![0.0; std.nscalars];
    let ak = std.apply(k, &zeros);
    let awrw = std.apply(&wrw, &zeros);
    let r1: Vec<f64> = (0..rp.len()).map(|i| rp[i] - ak[i] + awrw[i]).collect();
    let (mut dy, mut dz) = kkt.solve(std, &r1, rg)?;
    let aty = std.adjoint(&dy);
    let mut ds: Vec<DMatrix<f64>> = rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
    let mut dx: Vec<DMatrix<f64>> = scal
        .iter()
        .zip(k)
        .zip(&ds)
        .map(|((s, kk), d)| {
            let mut m = kk - &s.w * d * &s.w;
            symmetrize(&mut m);
            m
        })
        .collect();
    // ΔX is formed by cancellation between large terms; refine against the
    // primal equation itself.
    for _ in 0..2 {
        let adx = std.apply(&dx, &dz);
        let e1: Vec<f64> = rp.iter().zip(&adx).map(|(a, b)| a - b).collect();
        let bty = std.adjoint_scalars(&dy);
        let e2: Vec<f64> = rg.iter().zip(&bty).map(|(a, b)| a - b).collect();
        let (cy, cz) = kkt.solve(std, &e1, &e2)?;
        let atc = std.adjoint(&cy);
        for (i, s) in scal.iter().enumerate() {
            ds[i] -= &atc[i];
            let mut corr = &s.w * &atc[i] * &s.w;
            symmetrize(&mut corr);
            dx[i] += corr;
        }
        for (a, b) in dy.iter_mut().zip(&cy) {
            *a += b;
        }
        for (a, b) in dz.iter_mut().zip(&cz) {
            *a += b;
        }
    }
    Some(Direction { dx, dz, dy, ds })
}

/// `G T Gᵀ` with `T_ij = rhs_ij / (d_i + d_j)`.
fn lyapunov_target(s: &NtScaling, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.d.len();
    let t = DMatrix::from_fn(n, n, |i, j| rhs[(i, j)] / (s.d[i] + s.d[j]));
    let mut k = &s.g * t * s.g.transpose();
    symmetrize(&mut k);
    k
}

/// Largest step keeping `D + αΔ` PSD for diagonal positive `D`.
fn max_step_diag(d: &[f64], delta: &DMatrix<f64>) -> f64 {
    let n = d.len();
    let mut m = DMatrix::from_fn(n, n, |i, j| delta[(i, j)] / (d[i] * d[j]).sqrt());
    symmetrize(&mut m);
    let lmin = min_eigenvalue(&m);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Primal and dual step limits computed in the scaled space, where both
/// iterates equal the diagonal `D`.
fn scaled_steps(scal: &[NtScaling], dx: &[DMatrix<f64>], ds: &[DMatrix<f64>]) -> (f64, f64) {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for ((s, x), z) in scal.iter().zip(dx).zip(ds) {
        let xt = &s.g_inv * x * s.g_inv.transpose();
        let st = s.g.transpose() * z * &s.g;
        ap = ap.min(max_step_diag(&s.d, &xt));
        ad = ad.min(max_step_diag(&s.d, &st));
    }
    (ap, ad)
}

fn step_length(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> f64 {
    x.iter()
        .zip(dx)
        .map(|(a, b)| max_step(a, b))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone)]
struct IterateState {
    x: Vec<DMatrix<f64>>,
    z: Vec<f64>,
    y: Vec<f64>,
    s: Vec<DMatrix<f64>>,
}

/// A free scalar substituted out through a pivot row before solving.
struct Elimination {
    scalar: usize,
    row: usize,
    coef: f64,
    /// Block part and right-hand side of the pivot row once earlier
    /// eliminations have been substituted.
    entries: Vec<crate::cones::BlockEntry>,
    rhs: f64,
}

struct Reduction {
    problem: BlockSdp,
    elims: Vec<Elimination>,
    scalar_map: Vec<usize>,
    row_map: Vec<usize>,
}

/// Substitutes out every free scalar that is the only scalar of some row,
/// repeating until no such row is left. Among the candidate rows for a scalar
/// the one with the fewest block entries and then the largest coefficient is
/// used as pivot.
fn eliminate_scalars(problem: &BlockSdp) -> Option<Reduction> {
    let ns = problem.scalars.len();
    let nrows = problem.constraints.len();
    let mut forms: Vec<LinearForm> = problem.constraints.iter().map(|c| c.form.clone()).collect();
    let mut rhs: Vec<f64> = problem.constraints.iter().map(|c| c.rhs).collect();
    for f in &mut forms {
        f.compress();
    }
    let mut objective = problem.objective.clone();
    objective.compress();
    let mut constant = problem.objective_constant;
    let mut elims: Vec<Elimination> = Vec::new();
    let mut gone = vec![false; ns];
    let mut taken = vec![false; nrows];
    loop {
        let mut progress = false;
        for j in 0..ns {
            if gone[j] {
                continue;
            }
            let mut best: Option<(usize, usize, f64)> = None;
            for i in 0..nrows {
                let f = &forms[i];
                if taken[i] || f.entries.is_empty() || f.scalars.len() != 1 || f.scalars[0].0 != j {
                    continue;
                }
                let a = f.scalars[0].1;
                let better = match best {
                    None => true,
                    Some((_, n, b)) => f.entries.len() < n || (f.entries.len() == n && a.abs() > b.abs()),
                };
                if better {
                    best = Some((i, f.entries.len(), a));
                }
            }
            let Some((piv, _, a)) = best else { continue };
            taken[piv] = true;
            gone[j] = true;
            progress = true;
            let entries = forms[piv].entries.clone();
            let prhs = rhs[piv];
            // z_j = (prhs − entries·X)/a
            let substitute = |form: &mut LinearForm, c: f64| {
                for en in &entries {
                    form.entries.push(crate::cones::BlockEntry {
                        coef: -c * en.coef / a,
                        ..*en
                    });
                }
                form.scalars.retain(|s| s.0 != j);
                form.compress();
            };
            for i in 0..nrows {
                if i == piv {
                    continue;
                }
                let c: f64 = forms[i].scalars.iter().filter(|s| s.0 == j).map(|s| s.1).sum();
                if c != 0.0 {
                    rhs[i] -= c * prhs / a;
                    substitute(&mut forms[i], c);
                }
            }
            let c: f64 = objective.scalars.iter().filter(|s| s.0 == j).map(|s| s.1).sum();
            if c != 0.0 {
                constant += c * prhs / a;
                substitute(&mut objective, c);
            }
            elims.push(Elimination {
                scalar: j,
                row: piv,
                coef: a,
                entries,
                rhs: prhs,
            });
        }
        if !progress {
            break;
        }
    }
    if elims.is_empty() {
        return None;
    }
    let scalar_map: Vec<usize> = (0..ns).filter(|&j| !gone[j]).collect();
    let mut new_index = vec![usize::MAX; ns];
    for (n, &j) in scalar_map.iter().enumerate() {
        new_index[j] = n;
    }
    let reindex = |form: &LinearForm| LinearForm {
        entries: form.entries.clone(),
        scalars: form.scalars.iter().map(|&(j, v)| (new_index[j], v)).collect(),
    };
    let mut out = problem.clone();
    out.scalars = scalar_map.iter().map(|&j| problem.scalars[j].clone()).collect();
    out.bound_scalar = None;
    out.objective = reindex(&objective);
    out.objective_constant = constant;
    let row_map: Vec<usize> = (0..nrows).filter(|&i| !taken[i]).collect();
    out.constraints = row_map
        .iter()
        .map(|&i| crate::cones::Constraint {
            form: reindex(&forms[i]),
            rhs: rhs[i],
            label: problem.constraints[i].label.clone(),
        })
        .collect();
    Some(Reduction {
        problem: out,
        elims,
        scalar_map,
        row_map,
    })
}

/// Row `i` of a problem in linear-matrix-inequality form pins one block
/// entry: `coef · X[pos] + Σ_j B_ij z_j = rhs`.
struct PinnedEntry {
    pos: (usize, usize, usize),
    coef: f64,
}

/// Recognizes problems where every block entry is pinned by exactly one row
/// holding no other entry, i.e. `X = C₀ + Σ z_j F_j ⪰ 0` with free `z`.
fn lmi_form(problem: &BlockSdp) -> Option<Vec<PinnedEntry>> {
    if problem.sense == Sense::Feasibility || problem.scalars.is_empty() || !problem.objective.entries.is_empty() {
        return None;
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut pins = Vec::with_capacity(problem.constraints.len());
    for c in &problem.constraints {
        let mut f = c.form.clone();
        f.compress();
        let [e] = f.entries[..] else { return None };
        if !seen.insert((e.block, e.row, e.col)) {
            return None;
        }
        pins.push(PinnedEntry {
            pos: (e.block, e.row, e.col),
            coef: e.coef,
        });
    }
    let entries: usize = problem.blocks.iter().map(|b| b.size * (b.size + 1) / 2).sum();
    (seen.len() == entries).then_some(pins)
}

/// Solves an LMI-form problem through its dual, which has one equality per
/// free scalar instead of one per block entry. The block matrix of the
/// original problem is the dual slack; the original multipliers are the
/// dual's block entries.
fn solve_lmi(problem: &BlockSdp, pins: &[PinnedEntry], settings: &SolverSettings) -> Result<SdpSolution> {
    let sign = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let ns = problem.scalars.len();
    // multiplier of row i is kappa_i times the dual's entry at the pinned position
    let kappa: Vec<f64> = pins
        .iter()
        .map(|p| if p.pos.1 == p.pos.2 { -1.0 / p.coef } else { -2.0 / p.coef })
        .collect();
    let mut dual = BlockSdp::new(Sense::Maximize);
    for b in &problem.blocks {
        dual.add_block(b.size, b.label.clone());
    }
    let mut forms = vec![LinearForm::default(); ns];
    for ((c, p), &k) in problem.constraints.iter().zip(pins).zip(&kappa) {
        let (b, r, col) = p.pos;
        dual.objective.add_entry(b, r, col, k * c.rhs);
        for &(j, v) in &c.form.scalars {
            forms[j].add_entry(b, r, col, k * v);
        }
    }
    dual.objective.compress();
    dual.objective_constant = sign * problem.objective_constant;
    let mut g = vec![0.0; ns];
    for &(j, v) in &problem.objective.scalars {
        g[j] += sign * v;
    }
    for (j, form) in forms.into_iter().enumerate() {
        dual.add_constraint(form, g[j], format!("scalar {}", problem.scalars[j]));
    }
    let ds = solve(&dual, settings)?;
    let status = match ds.status {
        SolveStatus::Infeasible => SolveStatus::Unbounded,
        SolveStatus::Unbounded => SolveStatus::Infeasible,
        s => s,
    };
    // the dual's multipliers are for its minimization form
    let z: Vec<f64> = ds.dual_multipliers.iter().map(|w| -w).collect();
    let mut x: Vec<DMatrix<f64>> = problem.blocks.iter().map(|b| DMatrix::zeros(b.size, b.size)).collect();
    for (c, p) in problem.constraints.iter().zip(pins) {
        let rest: f64 = c.form.scalars.iter().map(|&(j, v)| v * z[j]).sum();
        let v = (c.rhs - rest) / p.coef;
        let (b, r, col) = p.pos;
        x[b][(r, col)] = v;
        x[b][(col, r)] = v;
    }
    let y: Vec<f64> = pins
        .iter()
        .zip(&kappa)
        .map(|(p, k)| k * ds.block_values[p.pos.0][(p.pos.1, p.pos.2)])
        .collect();
    Ok(SdpSolution {
        status,
        primal_value: sign * ds.dual_value,
        dual_value: sign * ds.primal_value,
        gap: ds.gap,
        block_values: x,
        scalar_values: z,
        dual_multipliers: y,
        iterations: ds.iterations,
        history: ds.history,
    })
}

/// Objectives larger than this in max-norm are divided by a power of two
/// near their size before solving; values and multipliers are scaled back.
pub const OBJECTIVE_NORMALIZE: f64 = 1e2;

/// Solves `problem`; errors only when the problem is malformed.
pub fn solve(problem: &BlockSdp, settings: &SolverSettings) -> Result<SdpSolution> {
    problem.validate()?;
    let cnorm = problem
        .objective
        .entries
        .iter()
        .map(|e| e.coef.abs())
        .chain(problem.objective.scalars.iter().map(|s| s.1.abs()))
        .fold(0.0, f64::max);
    if problem.sense == Sense::Feasibility || cnorm <= OBJECTIVE_NORMALIZE {
        return solve_normalized(problem, settings);
    }
    let sigma = 2f64.powi(cnorm.log2().round() as i32);
    let mut scaled = problem.clone();
    for e in &mut scaled.objective.entries {
        e.coef /= sigma;
    }
    for sc in &mut scaled.objective.scalars {
        sc.1 /= sigma;
    }
    scaled.objective_constant /= sigma;
    let mut sol = solve_normalized(&scaled, settings)?;
    // the gap stays the one measured on the normalized problem
    sol.primal_value *= sigma;
    sol.dual_value *= sigma;
    sol.dual_multipliers.iter_mut().for_each(|y| *y *= sigma);
    for h in &mut sol.history {
        h.primal_obj *= sigma;
        h.dual_obj *= sigma;
        h.complementarity *= sigma;
        h.corrected_gap *= sigma;
    }
    Ok(sol)
}

fn solve_normalized(problem: &BlockSdp, settings: &SolverSettings) -> Result<SdpSolution> {
    if let Some(pins) = lmi_form(problem) {
        return solve_lmi(problem, &pins, settings);
    }
    let Some(red) = eliminate_scalars(problem) else {
        return solve_reduced(problem, settings);
    };
    let mut sol = solve_reduced(&red.problem, settings)?;
    let mut scalars = vec![0.0; problem.scalars.len()];
    for (n, &j) in red.scalar_map.iter().enumerate() {
        scalars[j] = sol.scalar_values[n];
    }
    let sign = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut duals = vec![0.0; problem.constraints.len()];
    for (n, &i) in red.row_map.iter().enumerate() {
        duals[i] = sol.dual_multipliers[n];
    }
    for e in &red.elims {
        let rest: f64 = e.entries.iter().map(|en| en.coef * sol.block_values[en.block][(en.row, en.col)]).sum();
        scalars[e.scalar] = (e.rhs - rest) / e.coef;
    }
    // Scalar stationarity Σ_i y_i B_ij = sign·c_j fixes the pivot-row
    // multipliers; a pivot row only holds its own scalar and ones
    // eliminated before it, so later pivots are settled first.
    for e in red.elims.iter().rev() {
        let c: f64 = problem.objective.scalars.iter().filter(|s| s.0 == e.scalar).map(|s| s.1).sum();
        let mut acc = sign * c;
        for (i, con) in problem.constraints.iter().enumerate() {
            if i == e.row {
                continue;
            }
            for &(j, v) in &con.form.scalars {
                if j == e.scalar {
                    acc -= duals[i] * v;
                }
            }
        }
        let own: f64 = problem.constraints[e.row].form.scalars.iter().filter(|s| s.0 == e.scalar).map(|s| s.1).sum();
        duals[e.row] = acc / own;
    }
    sol.scalar_values = scalars;
    sol.dual_multipliers = duals;
    Ok(sol)
}

fn solve_reduced(problem: &BlockSdp, settings: &SolverSettings) -> Result<SdpSolution> {
    let sign = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let nblocks = problem.blocks.len();
    let zero_solution = |status: SolveStatus| SdpSolution {
        status,
        primal_value: f64::NAN,
        dual_value: f64::NAN,
        gap: f64::NAN,
        block_values: problem
            .blocks
            .iter()
            .map(|b| DMatrix::zeros(b.size, b.size))
            .collect(),
        scalar_values: vec![0.0; problem.scalars.len()],
        dual_multipliers: vec![0.0; problem.constraints.len()],
        iterations: 0,
        history: Vec::new(),
    };
    let kept = match presolve(problem, settings.feas_tol) {
        Presolve::Keep(k) => k,
        Presolve::Inconsistent => return Ok(zero_solution(SolveStatus::Infeasible)),
    };
    let built = build_standard(problem, kept);
    let std = &built.std;

    // Free scalars no constraint touches are either unbounded or idle.
    let mut touched = vec![false; std.nscalars];
    for sc in &std.row_scalars {
        for &(i, v) in sc {
            if v != 0.0 {
                touched[i] = true;
            }
        }
    }
    if (0..std.nscalars).any(|i| !touched[i] && std.g[i] != 0.0) {
        return Ok(zero_solution(SolveStatus::Unbounded));
    }
    if (0..std.nscalars).any(|i| !touched[i]) {
        // Idle scalars make the scalar system singular; pin them with a row.
        let mut std2 = Standard {
            sizes: std.sizes.clone(),
            rows: std.rows.clone(),
            row_scalars: std.row_scalars.clone(),
            b: std.b.clone(),
            c: std.c.clone(),
            g: std.g.clone(),
            nscalars: std.nscalars,
        };
        let mut kept_rows = built.kept_rows.clone();
        for i in 0..std.nscalars {
            if !touched[i] {
                std2.rows.push(Vec::new());
                std2.row_scalars.push(vec![(i, 1.0)]);
                std2.b.push(0.0);
                kept_rows.push(usize::MAX);
            }
        }
        let built2 = Built {
            std: std2,
            kept_rows,
            slack: built.slack,
        };
        return Ok(run_ipm(problem, &built2, settings, sign, nblocks));
    }
    Ok(run_ipm(problem, &built, settings, sign, nblocks))
}

fn run_ipm(
    problem: &BlockSdp,
    built: &Built,
    settings: &SolverSettings,
    sign: f64,
    nblocks: usize,
) -> SdpSolution {
    let std = &built.std;
    let m = std.rows.len();
    let n_total: usize = std.sizes.iter().sum();
    let bnorm = max_abs(&std.b);
    let cnorm = max_abs_mats(&std.c).max(max_abs(&std.g));
    let init = 1.0 + bnorm;
    let mut st = IterateState {
        x: std.sizes.iter().map(|&n| DMatrix::identity(n, n) * init).collect(),
        z: vec![0.0; std.nscalars],
        y: vec![0.0; m],
        s: std.sizes.iter().map(|&n| DMatrix::identity(n, n) * init).collect(),
    };
    let groups = row_groups(std);
    let mut history = Vec::new();
    let mut status = SolveStatus::NumericalTrouble;
    let mut iterations = 0;
    let mut stalled = 0;
    // best iterate by the largest normalized termination measure
    let mut best: Option<(f64, IterateState, usize)> = None;
    // the gap is measured on the reported values, constant included
    let shift = if problem.sense == Sense::Feasibility {
        0.0
    } else {
        sign * problem.objective_constant
    };
    for it in 0..=settings.max_iter {
        iterations = it;
        let ax = std.apply(&st.x, &st.z);
        let rp: Vec<f64> = std.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = std.adjoint(&st.y);
        let rd: Vec<DMatrix<f64>> = (0..std.sizes.len())
            .map(|i| &std.c[i] - &aty[i] - &st.s[i])
            .collect();
        let bty = std.adjoint_scalars(&st.y);
        let rg: Vec<f64> = std.g.iter().zip(&bty).map(|(g, b)| g - b).collect();
        let pobj = inner(&std.c, &st.x) + dotv(&std.g, &st.z);
        let dobj = dotv(&std.b, &st.y);
        let xs = inner(&st.x, &st.s);
        let mu = xs / n_total as f64;
        let pinf = max_abs(&rp) / (1.0 + bnorm);
        let dinf = (frob(&rd) / (1.0 + cnorm)).max(max_abs(&rg) / (1.0 + max_abs(&std.g)));
        let gap = (pobj - dobj).abs() / (1.0 + (pobj + shift).abs() + (dobj + shift).abs());
        let corrected = pobj - dobj - inner(&rd, &st.x) - dotv(&rg, &st.z) + dotv(&rp, &st.y);
        history.push(IterRecord {
            primal_obj: pobj,
            dual_obj: dobj,
            primal_infeas: pinf,
            dual_infeas: dinf,
            complementarity: xs,
            corrected_gap: corrected,
            step_primal: 0.0,
            step_dual: 0.0,
        });
        let merit = (pinf / settings.feas_tol)
            .max(dinf / settings.feas_tol)
            .max(gap / settings.gap_tol);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, st.clone(), history.len() - 1));
        }
        if pinf <= settings.feas_tol
            && dinf <= settings.feas_tol
            && gap <= settings.gap_tol
        {
            status = SolveStatus::Optimal;
            break;
        }
        let ynorm = max_abs(&st.y);
        let xnorm = max_abs_mats(&st.x).max(max_abs(&st.z));
        let blowup = 1e10 * (1.0 + bnorm + cnorm);
        if ynorm > blowup && dobj > 0.0 && pinf > settings.feas_tol {
            status = SolveStatus::Infeasible;
            break;
        }
        if xnorm > blowup && pobj < 0.0 && dinf > settings.feas_tol {
            status = SolveStatus::Unbounded;
            break;
        }
        if it == settings.max_iter {
            break;
        }
        let Some(scal) = st
            .x
            .iter()
            .zip(&st.s)
            .map(|(x, s)| nt_scaling(x, s))
            .collect::<Option<Vec<_>>>()
        else {
            break;
        };
        let Some(kkt) = Kkt::new(std, &groups, &scal) else {
            break;
        };
        // predictor: K = −X
        let k_aff: Vec<DMatrix<f64>> = st.x.iter().map(|x| -x).collect();
        let Some(aff) = direction(std, &kkt, &scal, &rp, &rd, &rg, &k_aff) else {
            break;
        };
        let ap = step_length(&st.x, &aff.dx).min(1.0);
        let ad = step_length(&st.s, &aff.ds).min(1.0);
        let mut xs_aff = 0.0;
        for i in 0..st.x.len() {
            let xa = &st.x[i] + &aff.dx[i] * ap;
            let sa = &st.s[i] + &aff.ds[i] * ad;
            xs_aff += xa.dot(&sa);
        }
        let mu_aff = (xs_aff / n_total as f64).max(0.0);
        let sigma = if mu > 0.0 {
            (mu_aff / mu).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };
        // corrector; on a short step retry with more centering and without
        // the second-order term
        let corrector = |sigma: f64, cross_weight: f64| -> Option<(Direction, f64, f64)> {
            let k_cor: Vec<DMatrix<f64>> = scal
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let n = s.d.len();
                    let dxt = &s.g_inv * &aff.dx[i] * s.g_inv.transpose();
                    let dst = s.g.transpose() * &aff.ds[i] * &s.g;
                    let cross = (&dxt * &dst + &dst * &dxt) * cross_weight;
                    let rhs = DMatrix::from_fn(n, n, |a, b| {
                        let base = if a == b {
                            2.0 * sigma * mu - 2.0 * s.d[a] * s.d[a]
                        } else {
                            0.0
                        };
                        base - cross[(a, b)]
                    });
                    lyapunov_target(s, &rhs)
                })
                .collect();
            let dir = direction(std, &kkt, &scal, &rp, &rd, &rg, &k_cor)?;
            let (ap, ad) = scaled_steps(&scal, &dir.dx, &dir.ds);
            let (ap, ad) = ((0.98 * ap).min(1.0), (0.98 * ad).min(1.0));
            Some((dir, ap, ad))
        };
        let Some(mut best) = corrector(sigma, 1.0) else {
            break;
        };
        if best.1.min(best.2) < 0.3 {
            for (sg, cw) in [(sigma.max(0.3), 1.0), (sigma.max(0.5), 0.0)] {
                if let Some(alt) = corrector(sg, cw) {
                    if alt.1.min(alt.2) > best.1.min(best.2) {
                        best = alt;
                    }
                }
            }
        }
        let (dir, ap, ad) = best;
        // a common step keeps infeasibility and complementarity shrinking
        // together; otherwise X drifts outwards near the optimum
        let step = ap.min(ad);
        let (ap, ad) = (step, step);
        if let Some(h) = history.last_mut() {
            h.step_primal = ap;
            h.step_dual = ad;
        }
        if ap < 1e-10 && ad < 1e-10 {
            break;
        }
        if ap < 1e-6 && ad < 1e-6 {
            stalled += 1;
            if stalled > 5 {
                break;
            }
        } else {
            stalled = 0;
        }
        for i in 0..st.x.len() {
            st.x[i] += &dir.dx[i] * ap;
            symmetrize(&mut st.x[i]);
            st.s[i] += &dir.ds[i] * ad;
            symmetrize(&mut st.s[i]);
        }
        for (z, d) in st.z.iter_mut().zip(&dir.dz) {
            *z += ap * d;
        }
        for (y, d) in st.y.iter_mut().zip(&dir.dy) {
            *y += ad * d;
        }
    }

    // A stalled run reports its best iterate.
    let mut last = history.last().copied();
    if status == SolveStatus::NumericalTrouble {
        if let Some((_, b, idx)) = best {
            st = b;
            last = Some(history[idx]);
        }
    }
    // Map back to the problem's variables.
    let tau = built.slack.map(|i| st.z[i]).unwrap_or(0.0);
    let mut block_values: Vec<DMatrix<f64>> = st.x[..nblocks].to_vec();
    if built.slack.is_some() {
        for b in &mut block_values {
            let n = b.nrows();
            *b += DMatrix::<f64>::identity(n, n) * tau;
        }
    }
    let scalar_values = st.z[..problem.scalars.len()].to_vec();
    let mut dual_multipliers = vec![0.0; problem.constraints.len()];
    for (pos, &orig) in built.kept_rows.iter().enumerate() {
        if orig < dual_multipliers.len() {
            dual_multipliers[orig] = st.y[pos];
        }
    }
    let (pobj, dobj) = last.map_or((f64::NAN, f64::NAN), |h| (h.primal_obj, h.dual_obj));
    let (primal_value, dual_value) = if problem.sense == Sense::Feasibility {
        (tau, -dobj)
    } else {
        (
            sign * pobj + problem.objective_constant,
            sign * dobj + problem.objective_constant,
        )
    };
    if problem.sense == Sense::Feasibility && status == SolveStatus::Optimal {
        if tau < -settings.feas_tol {
            status = SolveStatus::Infeasible;
        }
    }
    let gap = (primal_value - dual_value).abs() / (1.0 + primal_value.abs() + dual_value.abs());
    SdpSolution {
        status,
        primal_value,
        dual_value,
        gap,
        block_values,
        scalar_values,
        dual_multipliers,
        iterations,
        history,
    }
}

/// Recomputes feasibility measures of a solution directly from the problem
/// data, without any solver state.
pub fn residuals(problem: &BlockSdp, solution: &SdpSolution) -> Residuals {
    let bnorm = problem
        .constraints
        .iter()
        .fold(0.0f64, |m, c| m.max(c.rhs.abs()));
    let mut pinf = 0.0f64;
    for c in &problem.constraints {
        let v = c.form.eval(&solution.block_values, &solution.scalar_values);
        pinf = pinf.max((v - c.rhs).abs());
    }
    let (cmat, g) = min_objective(problem);
    let cnorm = max_abs_mats(&cmat);
    let gnorm = max_abs(&g);
    let mut slack = cmat;
    let mut bty = vec![0.0; problem.scalars.len()];
    for (c, &y) in problem.constraints.iter().zip(&solution.dual_multipliers) {
        let (blocks, sc) = form_to_blocks(&c.form);
        for (bk, a) in blocks {
            a.add_to(&mut slack[bk], -y);
        }
        for (i, v) in sc {
            bty[i] += v * y;
        }
    }
    let mut dinf = 0.0f64;
    for s in &mut slack {
        symmetrize(s);
        dinf = dinf.max((-min_eigenvalue(s)).max(0.0) / (1.0 + cnorm));
    }
    let rg = g
        .iter()
        .zip(&bty)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    dinf = dinf.max(rg / (1.0 + gnorm));
    let min_eig = solution
        .block_values
        .iter()
        .map(min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    Residuals {
        primal_infeas: pinf / (1.0 + bnorm),
        dual_infeas: dinf,
        min_eig,
    }
}
