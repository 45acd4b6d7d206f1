//! SDPA sparse format (`.dat-s`) export and import.
//!
//! A [`BlockSdp`] is written as the SDPA dual problem
//! `max ⟨F0, Y⟩ s.t. ⟨Fi, Y⟩ = ci, Y ⪰ 0`, with one SDPA constraint per
//! equality row. Free scalars go into a trailing diagonal block as pairs
//! `z = z⁺ − z⁻`. Comment lines starting with `* socf` record the sense, the
//! objective constant and the free-scalar block so that re-import restores
//! the original problem; files from elsewhere import as plain maximizations.

use std::fmt::Write as _;

use crate::cones::{BlockSdp, LinearForm, Sense};
use crate::error::{Error, Result};

const TAG: &str = "* socf";

/// Renders `problem` as SDPA sparse text.
pub fn write_sdpa(problem: &BlockSdp) -> Result<String> {
    problem.validate()?;
    let m = problem.constraints.len();
    let nsdp = problem.blocks.len();
    let ns = problem.scalars.len();
    let mut out = String::new();
    let sense = match problem.sense {
        Sense::Maximize => "maximize",
        Sense::Minimize => "minimize",
        Sense::Feasibility => "feasibility",
    };
    let _ = writeln!(out, "\"socf block sdp: {nsdp} psd blocks, {ns} free scalars, {m} equalities\"");
    let _ = writeln!(out, "{TAG} sense {sense}");
    let _ = writeln!(out, "{TAG} objective_constant {:e}", problem.objective_constant);
    if ns > 0 {
        let _ = writeln!(out, "{TAG} free_block {}", nsdp + 1);
        for name in &problem.scalars {
            let _ = writeln!(out, "{TAG} scalar {name}");
        }
    }
    let _ = writeln!(out, "{m}");
    let _ = writeln!(out, "{}", nsdp + usize::from(ns > 0));
    let mut sizes: Vec<String> = problem.blocks.iter().map(|b| b.size.to_string()).collect();
    if ns > 0 {
        sizes.push(format!("-{}", 2 * ns));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = problem.constraints.iter().map(|c| format!("{:e}", c.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));
    // F0 is the objective in maximization form
    let obj_sign = match problem.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
        Sense::Feasibility => 0.0,
    };
    if obj_sign != 0.0 {
        write_form(&mut out, 0, &problem.objective, obj_sign, nsdp);
    }
    for (i, c) in problem.constraints.iter().enumerate() {
        write_form(&mut out, i + 1, &c.form, 1.0, nsdp);
    }
    Ok(out)
}

fn write_form(out: &mut String, matno: usize, form: &LinearForm, sign: f64, nsdp: usize) {
    let mut f = form.clone();
    f.compress();
    for e in &f.entries {
        let v = if e.row == e.col { e.coef } else { e.coef / 2.0 };
        let _ = writeln!(out, "{matno} {} {} {} {:e}", e.block + 1, e.row + 1, e.col + 1, sign * v);
    }
    for &(j, c) in &f.scalars {
        let _ = writeln!(out, "{matno} {} {} {} {:e}", nsdp + 1, 2 * j + 1, 2 * j + 1, sign * c);
        let _ = writeln!(out, "{matno} {} {} {} {:e}", nsdp + 1, 2 * j + 2, 2 * j + 2, -sign * c);
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("bad {what} '{tok}' in SDPA input")))
}

/// Parses SDPA sparse text. Diagonal blocks become runs of 1×1 blocks unless
/// marked as the free-scalar block.
pub fn read_sdpa(text: &str) -> Result<BlockSdp> {
    let mut sense = Sense::Maximize;
    let mut constant = 0.0;
    let mut free_block: Option<usize> = None;
    let mut names: Vec<String> = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix(TAG) {
            let mut it = rest.split_whitespace();
            match (it.next(), it.next()) {
                (Some("sense"), Some(s)) => {
                    sense = match s {
                        "maximize" => Sense::Maximize,
                        "minimize" => Sense::Minimize,
                        "feasibility" => Sense::Feasibility,
                        other => return Err(Error::Parse(format!("unknown sense '{other}'"))),
                    }
                }
                (Some("objective_constant"), Some(v)) => constant = parse_num(v, "constant")?,
                (Some("free_block"), Some(v)) => free_block = Some(parse_num(v, "block number")?),
                (Some("scalar"), Some(v)) => names.push(v.to_string()),
                _ => {}
            }
            continue;
        }
        if t.is_empty() || t.starts_with('"') || t.starts_with('*') {
            continue;
        }
        // separators allowed by the format
        tokens.extend(
            t.split(|c: char| c.is_whitespace() || matches!(c, ',' | '(' | ')' | '{' | '}'))
                .filter(|s| !s.is_empty())
                .map(String::from),
        );
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
    let m: usize = parse_num(&next("constraint count")?, "constraint count")?;
    let nblocks: usize = parse_num(&next("block count")?, "block count")?;
    let mut struct_: Vec<i64> = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        struct_.push(parse_num(&next("block size")?, "block size")?);
    }
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        rhs.push(parse_num::<f64>(&next("objective vector")?, "objective vector")?);
    }

    let mut p = BlockSdp::new(sense);
    p.objective_constant = constant;
    // SDPA block number → (first internal block, is diagonal)
    let mut layout: Vec<(usize, bool)> = Vec::with_capacity(nblocks);
    let mut free_dim = 0;
    for (b, &s) in struct_.iter().enumerate() {
        if s == 0 {
            return Err(Error::Parse("zero block size".into()));
        }
        if free_block == Some(b + 1) {
            if s > 0 || s.unsigned_abs() % 2 != 0 {
                return Err(Error::Parse("free-scalar block must be diagonal of even size".into()));
            }
            free_dim = s.unsigned_abs() as usize / 2;
            for j in 0..free_dim {
                let name = names.get(j).cloned().unwrap_or_else(|| format!("z{j}"));
                p.add_scalar(name);
            }
            layout.push((usize::MAX, true));
        } else if s > 0 {
            let idx = p.add_block(s as usize, format!("block {}", b + 1));
            layout.push((idx, false));
        } else {
            let first = p.blocks.len();
            for j in 0..s.unsigned_abs() {
                p.add_block(1, format!("block {} diag {}", b + 1, j + 1));
            }
            layout.push((first, true));
        }
    }
    let mut forms: Vec<LinearForm> = vec![LinearForm::default(); m + 1];
    loop {
        let Some(tok) = it.next() else { break };
        let matno: usize = parse_num(&tok, "matrix number")?;
        let blk: usize = parse_num(&it.next().ok_or_else(|| Error::Parse("truncated entry".into()))?, "block")?;
        let i: usize = parse_num(&it.next().ok_or_else(|| Error::Parse("truncated entry".into()))?, "row")?;
        let j: usize = parse_num(&it.next().ok_or_else(|| Error::Parse("truncated entry".into()))?, "column")?;
        let v: f64 = parse_num(&it.next().ok_or_else(|| Error::Parse("truncated entry".into()))?, "value")?;
        if matno > m || blk == 0 || blk > nblocks || i == 0 || j == 0 {
            return Err(Error::Parse(format!("entry out of range: {matno} {blk} {i} {j}")));
        }
        let size = struct_[blk - 1].unsigned_abs() as usize;
        if i > size || j > size {
            return Err(Error::Parse(format!("index beyond block {blk} size {size}")));
        }
        let (first, diag) = layout[blk - 1];
        let form = &mut forms[matno];
        if first == usize::MAX {
            if i != j {
                return Err(Error::Parse("off-diagonal entry in diagonal block".into()));
            }
            // only z⁺ columns carry the coefficient; z⁻ mirrors it
            if i % 2 == 1 {
                form.add_scalar((i - 1) / 2, v);
            }
        } else if diag {
            if i != j {
                return Err(Error::Parse("off-diagonal entry in diagonal block".into()));
            }
            form.add_entry(first + i - 1, 0, 0, v);
        } else {
            let coef = if i == j { v } else { 2.0 * v };
            form.add_entry(first, i - 1, j - 1, coef);
        }
    }
    let _ = free_dim;
    let obj_sign = match sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
        Sense::Feasibility => 0.0,
    };
    let mut objective = std::mem::take(&mut forms[0]);
    for e in &mut objective.entries {
        e.coef *= obj_sign;
    }
    for s in &mut objective.scalars {
        s.1 *= obj_sign;
    }
    objective.compress();
    p.objective = objective;
    for (i, form) in forms.into_iter().enumerate().skip(1) {
        p.add_constraint(form, rhs[i - 1], format!("row {i}"));
    }
    p.validate()?;
    Ok(p)
}
