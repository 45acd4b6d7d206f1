//! Semidefinite encodings of sums of shifted sos chains on the supported
//! intervals: membership, lower bounds, moment duals and the banded variant.
//!
//! Every problem is an equality-form [`BlockSdp`]: symmetric PSD blocks, free
//! scalars, affine equalities between them and an objective.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::poly::{Interval, SparsePoly};

/// What a PSD block means as part of a Gram decomposition: it contributes
/// `weight(t) · t^shift · (1, t, …)·X·(1, t, …)ᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRole {
    pub weight: SparsePoly,
    pub shift: u32,
    /// The block certifies `f(-t)` rather than `f(t)` (full-line problems).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reflected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub size: usize,
    pub label: String,
    pub role: Option<BlockRole>,
    /// Half bandwidth when this block stands for a banded variable whose
    /// entries beyond the band are pinned to zero.
    pub band: Option<usize>,
}

/// A coefficient on the upper-triangle entry `X[row][col]` (`row <= col`).
/// Off-diagonal coefficients act on the single stored entry, so a symmetric
/// matrix pairing contributes `coef/2` to both mirrored positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub entries: Vec<BlockEntry>,
    pub scalars: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn add_entry(&mut self, block: usize, i: usize, j: usize, coef: f64) {
        let (row, col) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push(BlockEntry {
            block,
            row,
            col,
            coef,
        });
    }

    pub fn add_scalar(&mut self, idx: usize, coef: f64) {
        self.scalars.push((idx, coef));
    }

    /// Value at the given block matrices and scalars.
    pub fn eval(&self, blocks: &[DMatrix<f64>], scalars: &[f64]) -> f64 {
        let mut acc = 0.0;
        for e in &self.entries {
            acc += e.coef * blocks[e.block][(e.row, e.col)];
        }
        for &(i, c) in &self.scalars {
            acc += c * scalars[i];
        }
        acc
    }

    /// Merges repeated entries and drops exact zeros; keeps first-seen order.
    pub fn compress(&mut self) {
        let mut seen: std::collections::BTreeMap<(usize, usize, usize), usize> =
            std::collections::BTreeMap::new();
        let mut out: Vec<BlockEntry> = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            match seen.get(&(e.block, e.row, e.col)) {
                Some(&pos) => out[pos].coef += e.coef,
                None => {
                    seen.insert((e.block, e.row, e.col), out.len());
                    out.push(*e);
                }
            }
        }
        out.retain(|e| e.coef != 0.0);
        self.entries = out;
        let mut sc: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
        for &(i, c) in &self.scalars {
            *sc.entry(i).or_insert(0.0) += c;
        }
        self.scalars = sc.into_iter().filter(|&(_, c)| c != 0.0).collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub form: LinearForm,
    pub rhs: f64,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
    Feasibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSdp {
    pub blocks: Vec<Block>,
    /// Names of the free scalar variables.
    pub scalars: Vec<String>,
    pub objective: LinearForm,
    pub objective_constant: f64,
    pub constraints: Vec<Constraint>,
    pub sense: Sense,
    /// Sparsity parameter the problem was built with, if any.
    pub k: Option<usize>,
    /// Scalar holding the lower bound in bound problems.
    pub bound_scalar: Option<usize>,
    pub interval: Option<Interval>,
}

impl BlockSdp {
    pub fn new(sense: Sense) -> Self {
        BlockSdp {
            blocks: Vec::new(),
            scalars: Vec::new(),
            objective: LinearForm::default(),
            objective_constant: 0.0,
            constraints: Vec::new(),
            sense,
            k: None,
            bound_scalar: None,
            interval: None,
        }
    }

    pub fn add_block(&mut self, size: usize, label: impl Into<String>) -> usize {
        self.blocks.push(Block {
            size,
            label: label.into(),
            role: None,
            band: None,
        });
        self.blocks.len() - 1
    }

    pub fn add_scalar(&mut self, name: impl Into<String>) -> usize {
        self.scalars.push(name.into());
        self.scalars.len() - 1
    }

    pub fn add_constraint(&mut self, mut form: LinearForm, rhs: f64, label: impl Into<String>) {
        form.compress();
        self.constraints.push(Constraint {
            form,
            rhs,
            label: label.into(),
        });
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(|b| b.size).max().unwrap_or(0)
    }

    /// Structural checks: every reference is declared and every number finite.
    pub fn validate(&self) -> Result<()> {
        let check_form = |f: &LinearForm, what: &str| -> Result<()> {
            for e in &f.entries {
                let Some(b) = self.blocks.get(e.block) else {
                    return Err(Error::MalformedProblem(format!(
                        "{what} references undeclared block {}",
                        e.block
                    )));
                };
                if e.row > e.col || e.col >= b.size {
                    return Err(Error::MalformedProblem(format!(
                        "{what} references entry ({}, {}) outside block {} of size {}",
                        e.row, e.col, e.block, b.size
                    )));
                }
                if !e.coef.is_finite() {
                    return Err(Error::MalformedProblem(format!("{what} has a non-finite coefficient")));
                }
            }
            for &(i, c) in &f.scalars {
                if i >= self.scalars.len() {
                    return Err(Error::MalformedProblem(format!(
                        "{what} references undeclared scalar {i}"
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::MalformedProblem(format!("{what} has a non-finite coefficient")));
                }
            }
            Ok(())
        };
        if self.blocks.iter().any(|b| b.size == 0) {
            return Err(Error::MalformedProblem("empty block".into()));
        }
        check_form(&self.objective, "objective")?;
        for (n, c) in self.constraints.iter().enumerate() {
            check_form(&c.form, &format!("constraint {n}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::MalformedProblem(format!("constraint {n} has a non-finite rhs")));
            }
        }
        if let Some(s) = self.bound_scalar {
            if s >= self.scalars.len() {
                return Err(Error::MalformedProblem("bound scalar not declared".into()));
            }
        }
        Ok(())
    }
}

/// Pseudo-moments `v_0, …, v_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub v: Vec<f64>,
}

impl MomentVector {
    pub fn new(v: Vec<f64>) -> Self {
        MomentVector { v }
    }

    /// Moments of the point mass at `t0` up to degree `d`.
    pub fn dirac(t0: f64, d: usize) -> Self {
        let mut v = Vec::with_capacity(d + 1);
        let mut p = 1.0;
        for _ in 0..=d {
            v.push(p);
            p *= t0;
        }
        MomentVector { v }
    }

    pub fn degree(&self) -> usize {
        self.v.len().saturating_sub(1)
    }

    /// `⟨p, v⟩ = Σ p_i v_i`.
    pub fn pair(&self, p: &SparsePoly) -> f64 {
        p.terms()
            .iter()
            .map(|&(e, c)| c * self.v.get(e as usize).copied().unwrap_or(0.0))
            .sum()
    }

    /// Shifted Hankel section `(v_{s+i+j})_{i,j=0..k}`.
    pub fn hankel_section(&self, s: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(k + 1, k + 1, |i, j| self.v[s + i + j])
    }

    /// Localized section `(⟨w · t^{s+i+j}, v⟩)_{i,j<n}`.
    pub fn localized_section(&self, weight: &SparsePoly, s: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            weight
                .terms()
                .iter()
                .map(|&(e, c)| c * self.v[e as usize + s + i + j])
                .sum()
        })
    }

    /// Smallest eigenvalue over all localized sections of a chain.
    pub fn min_section_eigenvalue(&self, parts: &[ChainPart]) -> f64 {
        parts
            .iter()
            .map(|p| min_eigenvalue(&self.localized_section(&p.weight, p.shift as usize, p.size)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// One summand `weight · t^shift · Σ` of size `size` (degree `2(size-1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPart {
    pub weight: SparsePoly,
    pub shift: u32,
    pub size: usize,
}

impl ChainPart {
    /// Degree of the polynomials this part generates.
    pub fn degree(&self) -> u32 {
        self.weight.degree() + self.shift + 2 * (self.size as u32 - 1)
    }
}

/// The weights `w` and their sos degree drop used on each interval.
pub fn weight_system(iv: &Interval) -> Vec<SparsePoly> {
    let lin = |c1: f64, c0: f64| SparsePoly::from_dense(&[c0, c1]);
    match *iv {
        Interval::HalfLine | Interval::FullLine => vec![SparsePoly::constant(1.0)],
        Interval::UnitInterval => vec![SparsePoly::constant(1.0), lin(-1.0, 1.0)],
        Interval::Compact { a, b } => {
            let lo = lin(1.0, -a);
            let hi = lin(-1.0, b);
            let both = &lo * &hi;
            vec![SparsePoly::constant(1.0), lo, hi, both]
        }
        Interval::RightHalfLine { a } => vec![SparsePoly::constant(1.0), lin(1.0, -a)],
    }
}

/// Summands of the cone used for degree `d` with sparsity `k` on `iv`.
///
/// For `d > 2k` this is the shifted chain: each weight `w` pairs with
/// `t^s Σ_{2k}` for `s = 0..=d-2k-deg w`. For `d = 2k` it is the dense
/// description `Σ_{2k} + q·Σ_{2k-2}` with `q` the interval's boundary
/// multiplier.
pub fn chain_parts(k: usize, d: usize, iv: &Interval) -> Result<Vec<ChainPart>> {
    if k == 0 {
        return Err(Error::InvalidK(0));
    }
    iv.validate()?;
    if 2 * k > d {
        return Err(Error::UseDenseCone {
            two_k: 2 * k,
            degree: d,
        });
    }
    if 2 * k == d {
        let one = SparsePoly::constant(1.0);
        let q = match *iv {
            Interval::HalfLine | Interval::FullLine => SparsePoly::monomial(1, 1.0),
            Interval::UnitInterval => SparsePoly::from_dense(&[0.0, 1.0, -1.0]),
            Interval::Compact { a, b } => {
                &SparsePoly::from_dense(&[-a, 1.0]) * &SparsePoly::from_dense(&[b, -1.0])
            }
            Interval::RightHalfLine { a } => SparsePoly::from_dense(&[-a, 1.0]),
        };
        let mut parts = vec![ChainPart {
            weight: one,
            shift: 0,
            size: k + 1,
        }];
        parts.push(ChainPart {
            weight: q,
            shift: 0,
            size: k,
        });
        return Ok(parts);
    }
    let mut parts = Vec::new();
    for w in weight_system(iv) {
        let wd = w.degree() as usize;
        if wd + 2 * k > d {
            continue;
        }
        for s in 0..=(d - 2 * k - wd) {
            parts.push(ChainPart {
                weight: w.clone(),
                shift: s as u32,
                size: k + 1,
            });
        }
    }
    Ok(parts)
}

fn part_label(p: &ChainPart, reflected: bool) -> String {
    let w = if p.weight == SparsePoly::constant(1.0) {
        String::new()
    } else {
        format!("({}) ", p.weight)
    };
    let r = if reflected { "reflected " } else { "" };
    format!("{r}{w}t^{} gram", p.shift)
}

/// Adds one PSD block per part and accumulates, per degree, the linear form
/// giving that coefficient of `Σ_parts w t^s φ(X)`.
fn add_gram_parts(
    sdp: &mut BlockSdp,
    parts: &[ChainPart],
    d: usize,
    reflected: bool,
) -> Vec<LinearForm> {
    let mut rows = vec![LinearForm::default(); d + 1];
    for p in parts {
        let b = sdp.add_block(p.size, part_label(p, reflected));
        sdp.blocks[b].role = Some(BlockRole {
            weight: p.weight.clone(),
            shift: p.shift,
            reflected,
        });
        for i in 0..p.size {
            for j in i..p.size {
                let mult = if i == j { 1.0 } else { 2.0 };
                for &(e, c) in p.weight.terms() {
                    let deg = e as usize + p.shift as usize + i + j;
                    rows[deg].add_entry(b, i, j, mult * c);
                }
            }
        }
    }
    rows
}

fn check_degree(f: &SparsePoly, k: usize, d: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidK(0));
    }
    if (f.degree() as usize) > d {
        return Err(Error::DimensionMismatch(format!(
            "degree {} exceeds relaxation degree {d}",
            f.degree()
        )));
    }
    Ok(())
}

fn half_line_only(iv: &Interval) -> Result<()> {
    if *iv == Interval::FullLine {
        return Err(Error::InvalidInterval(
            "the real line is handled by build_full_line".into(),
        ));
    }
    Ok(())
}

/// Feasibility problem `f ∈ cone(k, deg f, I)`.
pub fn build_membership(f: &SparsePoly, k: usize, iv: &Interval) -> Result<BlockSdp> {
    build_membership_degree(f, k, f.degree() as usize, iv)
}

pub fn build_membership_degree(
    f: &SparsePoly,
    k: usize,
    d: usize,
    iv: &Interval,
) -> Result<BlockSdp> {
    half_line_only(iv)?;
    check_degree(f, k, d)?;
    let parts = chain_parts(k, d, iv)?;
    Ok(membership_from_parts(f, k, d, iv, &parts))
}

/// Diagnostic variant keeping only the listed shifts of each weight.
pub fn build_membership_with_shifts(
    f: &SparsePoly,
    k: usize,
    iv: &Interval,
    shifts: &[u32],
) -> Result<BlockSdp> {
    half_line_only(iv)?;
    let d = f.degree() as usize;
    check_degree(f, k, d)?;
    let parts: Vec<ChainPart> = chain_parts(k, d, iv)?
        .into_iter()
        .filter(|p| shifts.contains(&p.shift))
        .collect();
    Ok(membership_from_parts(f, k, d, iv, &parts))
}

fn membership_from_parts(
    f: &SparsePoly,
    k: usize,
    d: usize,
    iv: &Interval,
    parts: &[ChainPart],
) -> BlockSdp {
    let mut sdp = BlockSdp::new(Sense::Feasibility);
    sdp.k = Some(k);
    sdp.interval = Some(*iv);
    let rows = add_gram_parts(&mut sdp, parts, d, false);
    for (deg, row) in rows.into_iter().enumerate() {
        sdp.add_constraint(row, f.coeff(deg as u32), format!("coefficient of t^{deg}"));
    }
    sdp
}

/// `max λ` subject to `f − λ ∈ cone(k, deg f, I)`.
pub fn build_bound_primal(f: &SparsePoly, k: usize, iv: &Interval) -> Result<BlockSdp> {
    build_bound_primal_degree(f, k, f.degree() as usize, iv)
}

pub fn build_bound_primal_degree(
    f: &SparsePoly,
    k: usize,
    d: usize,
    iv: &Interval,
) -> Result<BlockSdp> {
    half_line_only(iv)?;
    check_degree(f, k, d)?;
    let parts = chain_parts(k, d, iv)?;
    let mut sdp = BlockSdp::new(Sense::Maximize);
    sdp.k = Some(k);
    sdp.interval = Some(*iv);
    let lam = sdp.add_scalar("bound");
    sdp.bound_scalar = Some(lam);
    sdp.objective.add_scalar(lam, 1.0);
    let mut rows = add_gram_parts(&mut sdp, &parts, d, false);
    rows[0].add_scalar(lam, 1.0);
    for (deg, row) in rows.into_iter().enumerate() {
        sdp.add_constraint(row, f.coeff(deg as u32), format!("coefficient of t^{deg}"));
    }
    Ok(sdp)
}

/// `min ⟨f, v⟩` over pseudo-moments `v` with `v_0 = 1` whose localized
/// sections for every summand of the cone are PSD.
///
/// Scalars are `v_1, …, v_d` in order; each block `X` is tied to its
/// section entrywise.
pub fn build_moment_dual(f: &SparsePoly, k: usize, d: usize, iv: &Interval) -> Result<BlockSdp> {
    half_line_only(iv)?;
    check_degree(f, k, d)?;
    let parts = chain_parts(k, d, iv)?;
    let mut sdp = BlockSdp::new(Sense::Minimize);
    sdp.k = Some(k);
    sdp.interval = Some(*iv);
    for i in 1..=d {
        sdp.add_scalar(format!("v{i}"));
    }
    sdp.objective_constant = f.coeff(0);
    for &(e, c) in f.terms() {
        if e > 0 {
            sdp.objective.add_scalar(e as usize - 1, c);
        }
    }
    for p in &parts {
        let b = sdp.add_block(p.size, format!("moment section {}", part_label(p, false)));
        sdp.blocks[b].role = Some(BlockRole {
            weight: p.weight.clone(),
            shift: p.shift,
            reflected: false,
        });
        for i in 0..p.size {
            for j in i..p.size {
                let mut form = LinearForm::default();
                form.add_entry(b, i, j, 1.0);
                let mut rhs = 0.0;
                for &(e, c) in p.weight.terms() {
                    let m = e as usize + p.shift as usize + i + j;
                    if m == 0 {
                        rhs += c;
                    } else {
                        form.add_scalar(m - 1, -c);
                    }
                }
                sdp.add_constraint(form, rhs, format!("block {b} entry ({i},{j})"));
            }
        }
    }
    Ok(sdp)
}

/// Reads the moment vector `(1, v_1, …, v_d)` off a moment-dual solution.
pub fn moments_from_scalars(scalars: &[f64]) -> MomentVector {
    let mut v = Vec::with_capacity(scalars.len() + 1);
    v.push(1.0);
    v.extend_from_slice(scalars);
    MomentVector { v }
}

/// Half-line bound problems for `f(t)` and `f(-t)`; the bound on the real
/// line is the smaller of the two optima.
pub fn build_full_line(f: &SparsePoly, k: usize) -> Result<(BlockSdp, BlockSdp)> {
    let pos = build_bound_primal(f, k, &Interval::HalfLine)?;
    let mut neg = build_bound_primal(&f.reflect(), k, &Interval::HalfLine)?;
    for b in &mut neg.blocks {
        if let Some(r) = &mut b.role {
            r.reflected = true;
        }
        b.label = format!("reflected {}", b.label);
    }
    Ok((pos, neg))
}

/// Single problem maximizing `λ` with both `f(t) − λ` and `f(−t) − λ` in the
/// half-line cone; its optimum equals the smaller of the two half-line bounds.
pub fn build_full_line_joint(f: &SparsePoly, k: usize, d: usize) -> Result<BlockSdp> {
    check_degree(f, k, d)?;
    let parts = chain_parts(k, d, &Interval::HalfLine)?;
    let mut sdp = BlockSdp::new(Sense::Maximize);
    sdp.k = Some(k);
    sdp.interval = Some(Interval::FullLine);
    let lam = sdp.add_scalar("bound");
    sdp.bound_scalar = Some(lam);
    sdp.objective.add_scalar(lam, 1.0);
    for (reflected, g) in [(false, f.clone()), (true, f.reflect())] {
        let mut rows = add_gram_parts(&mut sdp, &parts, d, reflected);
        rows[0].add_scalar(lam, 1.0);
        let tag = if reflected { "f(-t)" } else { "f(t)" };
        for (deg, row) in rows.into_iter().enumerate() {
            sdp.add_constraint(row, g.coeff(deg as u32), format!("{tag} coefficient of t^{deg}"));
        }
    }
    Ok(sdp)
}

/// Sizes of the two banded variables for degree `d`.
pub fn banded_sizes(d: usize) -> (usize, usize) {
    let e = d / 2;
    if d % 2 == 0 {
        (e + 1, e)
    } else {
        (e + 1, e + 1)
    }
}

fn banded_problem(f: &SparsePoly, k: usize, with_bound: bool) -> Result<BlockSdp> {
    if k == 0 {
        return Err(Error::InvalidK(0));
    }
    let d = f.degree() as usize;
    if d <= 2 * k {
        return Err(Error::DimensionMismatch(format!(
            "banded form needs degree > 2k, got degree {d} with k = {k}"
        )));
    }
    let (na, nb) = banded_sizes(d);
    let mut sdp = BlockSdp::new(if with_bound {
        Sense::Maximize
    } else {
        Sense::Feasibility
    });
    sdp.k = Some(k);
    sdp.interval = Some(Interval::HalfLine);
    let lam = if with_bound {
        let l = sdp.add_scalar("bound");
        sdp.bound_scalar = Some(l);
        sdp.objective.add_scalar(l, 1.0);
        Some(l)
    } else {
        None
    };
    let mut rows = vec![LinearForm::default(); d + 1];
    for (shift, n) in [(0u32, na), (1u32, nb)] {
        let b = sdp.add_block(n, format!("banded t^{shift} variable"));
        sdp.blocks[b].band = Some(k);
        sdp.blocks[b].role = Some(BlockRole {
            weight: SparsePoly::constant(1.0),
            shift,
            reflected: false,
        });
        for i in 0..n {
            for j in i..n {
                if j - i > k {
                    let mut z = LinearForm::default();
                    z.add_entry(b, i, j, 1.0);
                    sdp.add_constraint(z, 0.0, format!("block {b} off-band ({i},{j})"));
                    continue;
                }
                let deg = shift as usize + i + j;
                if deg > d {
                    return Err(Error::DimensionMismatch(format!(
                        "banded variable of size {n} exceeds degree {d}"
                    )));
                }
                rows[deg].add_entry(b, i, j, if i == j { 1.0 } else { 2.0 });
            }
        }
    }
    if let Some(l) = lam {
        rows[0].add_scalar(l, 1.0);
    }
    for (deg, row) in rows.into_iter().enumerate() {
        sdp.add_constraint(row, f.coeff(deg as u32), format!("coefficient of t^{deg}"));
    }
    Ok(sdp)
}

/// Membership in the half-line cone through two banded PSD variables
/// `A` (weight 1) and `B` (weight t) with `f = φ(A) + t·φ(B)`.
pub fn build_banded(f: &SparsePoly, k: usize) -> Result<BlockSdp> {
    banded_problem(f, k, false)
}

/// Bound version of [`build_banded`].
pub fn build_banded_bound(f: &SparsePoly, k: usize) -> Result<BlockSdp> {
    banded_problem(f, k, true)
}

/// Replaces every banded block by PSD blocks on its cliques
/// `{i, …, i+k}` and rewrites the constraints accordingly. Off-band
/// pinning constraints disappear.
pub fn expand_banded(sdp: &BlockSdp) -> Result<BlockSdp> {
    let mut out = BlockSdp::new(sdp.sense);
    out.scalars = sdp.scalars.clone();
    out.objective_constant = sdp.objective_constant;
    out.k = sdp.k;
    out.bound_scalar = sdp.bound_scalar;
    out.interval = sdp.interval;
    // For each old block: list of (new block, offset) cliques.
    let mut cliques: Vec<Vec<(usize, usize)>> = Vec::with_capacity(sdp.blocks.len());
    for b in &sdp.blocks {
        match b.band {
            Some(k) if k + 1 < b.size => {
                let mut list = Vec::new();
                for i in 0..b.size - k {
                    let nb = out.add_block(k + 1, format!("{} clique {i}", b.label));
                    out.blocks[nb].role = b.role.as_ref().map(|r| BlockRole {
                        weight: r.weight.clone(),
                        shift: r.shift + 2 * i as u32,
                        reflected: r.reflected,
                    });
                    list.push((nb, i));
                }
                cliques.push(list);
            }
            _ => {
                let nb = out.add_block(b.size, b.label.clone());
                out.blocks[nb].role = b.role.clone();
                cliques.push(vec![(nb, 0)]);
            }
        }
    }
    let rewrite = |form: &LinearForm| -> Option<LinearForm> {
        let mut nf = LinearForm {
            entries: Vec::new(),
            scalars: form.scalars.clone(),
        };
        for e in &form.entries {
            let b = &sdp.blocks[e.block];
            let size = match b.band {
                Some(k) if k + 1 < b.size => k + 1,
                _ => b.size,
            };
            let hits: Vec<_> = cliques[e.block]
                .iter()
                .filter(|&&(_, off)| e.row >= off && e.col < off + size)
                .collect();
            if hits.is_empty() {
                return None;
            }
            for &&(nb, off) in &hits {
                nf.add_entry(nb, e.row - off, e.col - off, e.coef);
            }
        }
        Some(nf)
    };
    out.objective = rewrite(&sdp.objective).ok_or_else(|| {
        Error::MalformedProblem("objective touches off-band entries".into())
    })?;
    for c in &sdp.constraints {
        match rewrite(&c.form) {
            Some(form) => out.add_constraint(form, c.rhs, c.label.clone()),
            None => {
                let only_offband = c.form.entries.len() == 1 && c.form.scalars.is_empty();
                if !(only_offband && c.rhs == 0.0) {
                    return Err(Error::MalformedProblem(format!(
                        "constraint '{}' mixes off-band entries with other terms",
                        c.label
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// Polynomial `Σ_parts w t^s φ(X)` generated by block values; reflected
/// parts are collected separately.
pub fn gram_polynomial(sdp: &BlockSdp, blocks: &[DMatrix<f64>], reflected: bool) -> SparsePoly {
    let mut acc = SparsePoly::zero();
    for (b, x) in sdp.blocks.iter().zip(blocks) {
        let Some(role) = &b.role else { continue };
        if role.reflected != reflected {
            continue;
        }
        acc = acc.add_tol(&gram_image(&role.weight, role.shift, x), 0.0);
    }
    acc
}

/// `w(t) · t^s · (1, t, …)·X·(1, t, …)ᵀ`.
pub fn gram_image(weight: &SparsePoly, shift: u32, x: &DMatrix<f64>) -> SparsePoly {
    let n = x.nrows();
    let mut dense = vec![0.0; 2 * n.max(1) - 1];
    for i in 0..n {
        for j in 0..n {
            dense[i + j] += x[(i, j)];
        }
    }
    weight.mul_tol(&SparsePoly::from_dense(&dense).shift(shift), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(dense: &[f64]) -> SparsePoly {
        SparsePoly::from_dense(dense)
    }

    #[test]
    fn half_line_chain_shapes() {
        let f = poly(&[1.0, 0.0, 0.0, -4.0, 3.0]);
        let sdp = build_membership(&f, 1, &Interval::HalfLine).unwrap();
        assert_eq!(sdp.blocks.len(), 3);
        assert_eq!(sdp.max_block_size(), 2);
        assert_eq!(sdp.constraints.len(), 5);
        sdp.validate().unwrap();
        let shifts: Vec<u32> = sdp.blocks.iter().map(|b| b.role.as_ref().unwrap().shift).collect();
        assert_eq!(shifts, vec![0, 1, 2]);
        let restricted = build_membership_with_shifts(&f, 1, &Interval::HalfLine, &[0, 2]).unwrap();
        assert_eq!(restricted.blocks.len(), 2);
    }

    #[test]
    fn builder_errors() {
        let f = poly(&[1.0, 0.0, 1.0]);
        assert!(matches!(
            build_membership(&f, 2, &Interval::HalfLine),
            Err(Error::UseDenseCone { .. })
        ));
        assert!(matches!(build_membership(&f, 0, &Interval::HalfLine), Err(Error::InvalidK(0))));
        assert!(build_membership(&f, 1, &Interval::FullLine).is_err());
    }

    #[test]
    fn dense_boundary_uses_two_blocks() {
        let f = poly(&[3.0, -2.0, 1.0]);
        let sdp = build_bound_primal(&f, 1, &Interval::HalfLine).unwrap();
        let sizes: Vec<usize> = sdp.blocks.iter().map(|b| b.size).collect();
        assert_eq!(sizes, vec![2, 1]);
    }

    #[test]
    fn interval_weight_counts() {
        let parts = chain_parts(1, 5, &Interval::UnitInterval).unwrap();
        // weight 1: shifts 0..=3, weight 1-t: shifts 0..=2
        assert_eq!(parts.len(), 7);
        let parts = chain_parts(1, 5, &Interval::compact(1.0, 3.0).unwrap()).unwrap();
        assert_eq!(parts.len(), 4 + 3 + 3 + 2);
        assert!(parts.iter().all(|p| p.degree() <= 5));
        let parts = chain_parts(2, 6, &Interval::right_half_line(1.0).unwrap()).unwrap();
        assert_eq!(parts.len(), 3 + 2);
    }

    #[test]
    fn dirac_moments_are_feasible_sections() {
        let v = MomentVector::dirac(2.0, 4);
        assert_eq!(v.v, vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        let parts = chain_parts(1, 4, &Interval::HalfLine).unwrap();
        assert!(v.min_section_eigenvalue(&parts) >= -1e-12);
        for s in 0..=2 {
            let h = v.hankel_section(s, 1);
            assert!(h.determinant().abs() < 1e-9);
        }
        let f = poly(&[3.0, -2.0, 1.0]);
        assert_eq!(v.pair(&f), 3.0);
        let delta0 = MomentVector::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(delta0.min_section_eigenvalue(&parts) >= 0.0);
        assert_eq!(delta0.hankel_section(1, 1).norm(), 0.0);
    }

    #[test]
    fn moment_dual_constraints_tie_every_entry() {
        let f = poly(&[3.0, -2.0, 1.0]);
        let sdp = build_moment_dual(&f, 1, 4, &Interval::HalfLine).unwrap();
        sdp.validate().unwrap();
        assert_eq!(sdp.scalars.len(), 4);
        assert_eq!(sdp.blocks.len(), 3);
        assert_eq!(sdp.constraints.len(), 9);
        // Dirac moments at 1 satisfy every linking constraint.
        let v = MomentVector::dirac(1.0, 4);
        let parts = chain_parts(1, 4, &Interval::HalfLine).unwrap();
        let blocks: Vec<_> = parts
            .iter()
            .map(|p| v.localized_section(&p.weight, p.shift as usize, p.size))
            .collect();
        for c in &sdp.constraints {
            assert!((c.form.eval(&blocks, &v.v[1..]) - c.rhs).abs() < 1e-12);
        }
        let obj = sdp.objective.eval(&blocks, &v.v[1..]) + sdp.objective_constant;
        assert_eq!(obj, 2.0);
    }

    #[test]
    fn banded_shapes_and_expansion() {
        let f = poly(&[1.0, 0.0, 0.0, -4.0, 3.0]);
        let sdp = build_banded(&f, 1).unwrap();
        let sizes: Vec<usize> = sdp.blocks.iter().map(|b| b.size).collect();
        assert_eq!(sizes, vec![3, 2]);
        let expanded = expand_banded(&sdp).unwrap();
        assert_eq!(expanded.max_block_size(), 2);
        let shifts: Vec<u32> = expanded
            .blocks
            .iter()
            .map(|b| b.role.as_ref().unwrap().shift)
            .collect();
        assert_eq!(shifts, vec![0, 2, 1]);
        assert_eq!(banded_sizes(7), (4, 4));
        assert!(build_banded(&poly(&[1.0, 0.0, 1.0]), 1).is_err());
    }

    #[test]
    fn gram_image_of_square() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let p = gram_image(&SparsePoly::constant(1.0), 0, &x);
        assert_eq!(p, poly(&[1.0, -2.0, 1.0]));
    }
}
