#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socf::SparsePoly;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|supp ∪ {0}| = 2k + 1`, degree in `[2k, max_deg]`, coefficients in
/// `[-10, 10]` with a positive leading one.
pub fn sparse_instance(rng: &mut ChaCha8Rng, k: usize, max_deg: u32) -> SparsePoly {
    let d: u32 = rng.gen_range((2 * k as u32).max(2)..=max_deg);
    let mut exps = vec![d, 0];
    while exps.len() < 2 * k + 1 {
        let e = rng.gen_range(1..d);
        if !exps.contains(&e) {
            exps.push(e);
        }
    }
    let terms = exps.iter().enumerate().map(|(i, &e)| {
        let c: f64 = rng.gen_range(-10.0..10.0);
        (e, if i == 0 { c.abs().max(0.1) } else { c })
    });
    SparsePoly::from_terms(terms.collect::<Vec<_>>()).unwrap()
}

/// `Σ_s t^s q_s(t)²` over a few shifts `s ≤ d − 2k`, with `deg q_s ≤ k` and
/// the top shift carrying a degree-`k` square, so the result has degree `d`.
pub fn chain_member(rng: &mut ChaCha8Rng, k: usize, d: u32) -> SparsePoly {
    let top = d - 2 * k as u32;
    let mut shifts = vec![top];
    for _ in 0..rng.gen_range(0..3) {
        shifts.push(rng.gen_range(0..=top));
    }
    let mut f = SparsePoly::zero();
    for s in shifts {
        let mut q: Vec<f64> = (0..=k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        if s == top {
            q[k] = q[k].abs().max(0.5);
        }
        let q = SparsePoly::from_dense(&q);
        f = &f + &(&(&q * &q) * &SparsePoly::monomial(s, 1.0));
    }
    f
}

/// `Σ |c| |t|^e`.
pub fn magnitude(f: &SparsePoly, t: f64) -> f64 {
    f.terms().iter().map(|&(e, c)| c.abs() * t.abs().powi(e as i32)).sum()
}
