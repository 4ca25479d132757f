//! Exact counting and exhaustive listing of small spaces.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::{fold_active, Config, FoldConfig, Mode, PruneConfig, SpaceSpec, CANONICAL};
use crate::error::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

fn binomial(n: usize, k: usize) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Options for one retained layer: (selection row, merge factor, output scale, method).
type LayerOption = (Vec<bool>, f64, f64, u32);

fn layer_options(spec: &SpaceSpec) -> Vec<LayerOption> {
    let k = spec.k;
    let row = |mask: usize| (0..k).map(|j| mask >> j & 1 == 1).collect::<Vec<bool>>();
    match spec.mode {
        Mode::RemoveOnly | Mode::Fold => vec![(vec![false; k], CANONICAL, CANONICAL, 1)],
        Mode::SelectRemove => (0..=k)
            .map(|choice| (if choice == 0 { row(0) } else { row(1 << (choice - 1)) }, CANONICAL, CANONICAL, 1))
            .collect(),
        Mode::Full => {
            let mut out = Vec::new();
            for &scale in &spec.output_scale_grid {
                for mask in 0..1usize << k {
                    if mask.count_ones() <= 1 {
                        out.push((row(mask), CANONICAL, scale, 1));
                    } else {
                        for m in 1..=spec.z as u32 {
                            for &mf in &spec.merge_factor_grid {
                                out.push((row(mask), mf, scale, m));
                            }
                        }
                    }
                }
            }
            out
        }
    }
}

/// Number of distinct valid configurations, in arbitrary precision.
///
/// Full mode: `C(l, r) · (|S|·((1+K) + (2^K − 1 − K)·Z·|H|))^(l−r)` where `S` is
/// the output-scale grid and `H` the merge-factor grid.
pub fn cardinality(spec: &SpaceSpec) -> BigUint {
    let l = spec.l;
    let r = spec.remove_count;
    let placements = binomial(l, r);
    if spec.mode == Mode::Fold {
        return placements_weight_fold(l, r, spec.importance_grid.len());
    }
    let per_layer: BigUint = match spec.mode {
        Mode::RemoveOnly | Mode::Fold => BigUint::one(),
        Mode::SelectRemove => BigUint::from(1 + spec.k),
        Mode::Full => {
            let all = BigUint::one() << spec.k;
            let non_merging = BigUint::from(1 + spec.k);
            let merging = all - &non_merging;
            BigUint::from(spec.output_scale_grid.len())
                * (non_merging + merging * BigUint::from(spec.z) * BigUint::from(spec.merge_factor_grid.len()))
        }
    };
    placements * num_traits::pow(per_layer, l - r)
}

/// Fold mode: each placement contributes `g^(active importance entries)`.
///
/// A leading run of `a` removed layers and the run `b_1` after the first
/// retained layer both fold into that layer; every later retained layer
/// absorbs the run after it. Summing over run lengths with a DP over retained
/// layers avoids walking all placements.
fn placements_weight_fold(l: usize, r: usize, g: usize) -> BigUint {
    let q = l - r;
    if q == 0 {
        return BigUint::one();
    }
    let g = BigUint::from(g);
    // dp[t] = weighted count of ways having used t removed layers so far
    let mut dp = vec![BigUint::zero(); r + 1];
    for (t, slot) in dp.iter_mut().enumerate() {
        // (a, b_1) pairs with a + b_1 = t: t + 1 of them
        *slot = BigUint::from(t + 1) * if t > 0 { g.clone() } else { BigUint::one() };
    }
    for _ in 1..q {
        let mut next = vec![BigUint::zero(); r + 1];
        for (used, w) in dp.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for run in 0..=r - used {
                let factor = if run > 0 { &g * w } else { w.clone() };
                next[used + run] += factor;
            }
        }
        dp = next;
    }
    num_traits::pow(g, r) * dp[r].clone()
}

/// Lexicographic r-subsets of 0..n.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, r: usize) -> Self {
        Combinations {
            n,
            idx: (0..r).collect(),
            done: r > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let r = self.idx.len();
        let mut i = r;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - r + i {
                self.idx[i] += 1;
                for j in i + 1..r {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Mixed-radix counter over `radices`, most significant digit first.
struct Odometer {
    radices: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
}

impl Odometer {
    fn new(radices: Vec<usize>) -> Self {
        let done = radices.contains(&0);
        Odometer {
            digits: vec![0; radices.len()],
            radices,
            done,
        }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.digits.clone();
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.radices[i] {
                break;
            }
            self.digits[i] = 0;
        }
        Some(out)
    }
}

/// Every valid configuration exactly once, in a fixed order. Refuses spaces
/// larger than `cap`.
pub fn enumerate(spec: &SpaceSpec, cap: u64) -> Result<Box<dyn Iterator<Item = Config> + Send>> {
    spec.check()?;
    let card = cardinality(spec);
    if card.to_u64().is_none_or(|c| c > cap) {
        return Err(Error::CapExceeded { cardinality: card, cap });
    }
    let l = spec.l;
    let spec = spec.clone();
    if spec.mode == Mode::Fold {
        let grid = spec.importance_grid.clone();
        return Ok(Box::new(Combinations::new(l, spec.remove_count).flat_map(move |removed| {
            let mut r = vec![false; l];
            removed.iter().for_each(|&i| r[i] = true);
            let active: Vec<usize> = fold_active(&r).iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect();
            let grid = grid.clone();
            Odometer::new(vec![grid.len(); active.len()]).map(move |digits| {
                let mut importance = vec![CANONICAL; l];
                for (&i, &d) in active.iter().zip(&digits) {
                    importance[i] = grid[d];
                }
                Config::Fold(FoldConfig {
                    fold_select: r.clone(),
                    importance,
                })
            })
        })));
    }
    let options = layer_options(&spec);
    let k = spec.k;
    Ok(Box::new(Combinations::new(l, spec.remove_count).flat_map(move |removed| {
        let mut r = vec![false; l];
        removed.iter().for_each(|&i| r[i] = true);
        let retained: Vec<usize> = (0..l).filter(|&i| !r[i]).collect();
        let options = options.clone();
        Odometer::new(vec![options.len(); retained.len()]).map(move |digits| {
            let mut p = PruneConfig::identity(l, k);
            p.r = r.clone();
            for (&i, &d) in retained.iter().zip(&digits) {
                let (row, mf, scale, m) = &options[d];
                p.c[i] = row.clone();
                p.merge_factor[i] = *mf;
                p.output_scale[i] = *scale;
                p.m[i] = *m;
            }
            Config::Prune(p)
        })
    })))
}
