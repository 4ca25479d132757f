use rand::seq::index;
use rand::Rng as _;

use super::{fold_active, Config, FoldConfig, Mode, PruneConfig, SpaceSpec, CANONICAL};
use crate::error::Result;
use crate::rng::Rng;

fn removal_bits(l: usize, count: usize, rng: &mut Rng) -> Vec<bool> {
    let mut r = vec![false; l];
    for i in index::sample(rng, l, count).iter() {
        r[i] = true;
    }
    r
}

fn pick(grid: &[f64], rng: &mut Rng) -> f64 {
    grid[rng.random_range(0..grid.len())]
}

/// Nearest grid member; ties resolve toward the lower member.
pub fn snap_to_grid(grid: &[f64], v: f64) -> f64 {
    let mut best = grid[0];
    for &g in &grid[1..] {
        if (g - v).abs() < (best - v).abs() {
            best = g;
        }
    }
    best
}

/// Uniform draw: removal placement uniform over subsets, then per-layer
/// selection bits and grid values uniform over what the mode allows.
pub fn sample(spec: &SpaceSpec, rng: &mut Rng) -> Result<Config> {
    spec.check()?;
    let r = removal_bits(spec.l, spec.remove_count, rng);
    Ok(fill_layers(spec, r, rng))
}

fn fill_layers(spec: &SpaceSpec, r: Vec<bool>, rng: &mut Rng) -> Config {
    if spec.mode == Mode::Fold {
        let importance = fold_active(&r)
            .into_iter()
            .map(|a| if a { pick(&spec.importance_grid, rng) } else { CANONICAL })
            .collect();
        return FoldConfig {
            fold_select: r,
            importance,
        }
        .into();
    }
    let mut p = PruneConfig::identity(spec.l, spec.k);
    for i in 0..spec.l {
        if r[i] {
            continue;
        }
        match spec.mode {
            Mode::RemoveOnly | Mode::Fold => {}
            Mode::SelectRemove => {
                let choice = rng.random_range(0..=spec.k);
                if choice > 0 {
                    p.c[i][choice - 1] = true;
                }
            }
            Mode::Full => {
                for b in p.c[i].iter_mut() {
                    *b = rng.random_bool(0.5);
                }
                if p.selected(i) > 1 {
                    p.m[i] = rng.random_range(1..=spec.z as u32);
                    p.merge_factor[i] = pick(&spec.merge_factor_grid, rng);
                }
                p.output_scale[i] = pick(&spec.output_scale_grid, rng);
            }
        }
    }
    p.r = r;
    p.into()
}

/// Smallest randomized edit that makes `config` valid under `spec`.
pub fn repair(config: &Config, spec: &SpaceSpec, rng: &mut Rng) -> Config {
    let l = spec.l;
    let mut r: Vec<bool> = config.removed().to_vec();
    r.resize(l, false);
    fix_removal_count(&mut r, spec.remove_count, rng);
    match (config, spec.mode) {
        (Config::Fold(f), Mode::Fold) => {
            let mut importance = f.importance.clone();
            importance.resize(l, CANONICAL);
            for (w, active) in importance.iter_mut().zip(fold_active(&r)) {
                *w = if active {
                    snap_to_grid(&spec.importance_grid, *w)
                } else {
                    CANONICAL
                };
            }
            FoldConfig {
                fold_select: r,
                importance,
            }
            .into()
        }
        (Config::Prune(p), mode) if mode != Mode::Fold => repair_prune(p, r, spec, rng).into(),
        // kind mismatch: keep the removal pattern, rebuild the rest canonically
        (_, Mode::Fold) => FoldConfig {
            importance: fold_active(&r)
                .into_iter()
                .map(|a| if a { snap_to_grid(&spec.importance_grid, CANONICAL) } else { CANONICAL })
                .collect(),
            fold_select: r,
        }
        .into(),
        (_, _) => {
            let mut p = PruneConfig::identity(l, spec.k);
            p.r = r;
            repair_prune(&p, p.r.clone(), spec, rng).into()
        }
    }
}

fn fix_removal_count(r: &mut [bool], target: usize, rng: &mut Rng) {
    loop {
        let count = r.iter().filter(|&&b| b).count();
        if count == target {
            return;
        }
        let want = count < target;
        // flip a random position whose bit is the opposite of what we need more of
        let candidates: Vec<usize> = (0..r.len()).filter(|&i| r[i] != want).collect();
        let i = candidates[rng.random_range(0..candidates.len())];
        r[i] = want;
    }
}

fn repair_prune(p: &PruneConfig, r: Vec<bool>, spec: &SpaceSpec, rng: &mut Rng) -> PruneConfig {
    let l = spec.l;
    let mut out = PruneConfig::identity(l, spec.k);
    for i in 0..l {
        if r[i] {
            continue;
        }
        let mut row: Vec<bool> = p.c.get(i).cloned().unwrap_or_default();
        row.resize(spec.k, false);
        let allowed = match spec.mode {
            Mode::RemoveOnly | Mode::Fold => 0,
            Mode::SelectRemove => 1,
            Mode::Full => spec.k,
        };
        let set: Vec<usize> = (0..spec.k).filter(|&j| row[j]).collect();
        if set.len() > allowed {
            row = vec![false; spec.k];
            if allowed == 1 {
                row[set[rng.random_range(0..set.len())]] = true;
            }
        }
        let sel = row.iter().filter(|&&b| b).count();
        out.c[i] = row;
        if sel > 1 {
            let mf = p.merge_factor.get(i).copied().unwrap_or(CANONICAL);
            out.merge_factor[i] = snap_to_grid(&spec.merge_factor_grid, mf);
            out.m[i] = p.m.get(i).copied().unwrap_or(1).clamp(1, spec.z as u32);
        }
        if spec.mode == Mode::Full {
            let os = p.output_scale.get(i).copied().unwrap_or(CANONICAL);
            out.output_scale[i] = snap_to_grid(&spec.output_scale_grid, os);
        }
    }
    out.r = r;
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub configs: Vec<Config>,
    /// The middle band was too narrow; removals were drawn from all layers.
    pub fell_back: bool,
}

/// Base-only configs with removals drawn from the middle band `[⌊l/4⌋, ⌈3l/4⌉)`.
pub fn warm_start(spec: &SpaceSpec, n: usize, rng: &mut Rng) -> Result<WarmStart> {
    spec.check()?;
    let lo = spec.l / 4;
    let hi = (3 * spec.l).div_ceil(4);
    let fell_back = hi - lo < spec.remove_count;
    let (lo, hi) = if fell_back { (0, spec.l) } else { (lo, hi) };
    let configs = (0..n.max(1))
        .map(|_| {
            let mut r = vec![false; spec.l];
            for i in index::sample(rng, hi - lo, spec.remove_count).iter() {
                r[lo + i] = true;
            }
            default_layers(spec, r)
        })
        .collect();
    Ok(WarmStart { configs, fell_back })
}

fn default_layers(spec: &SpaceSpec, r: Vec<bool>) -> Config {
    if spec.mode == Mode::Fold {
        let importance = fold_active(&r)
            .into_iter()
            .map(|a| if a { snap_to_grid(&spec.importance_grid, CANONICAL) } else { CANONICAL })
            .collect();
        return FoldConfig {
            fold_select: r,
            importance,
        }
        .into();
    }
    let mut p = PruneConfig::identity(spec.l, spec.k);
    if spec.mode == Mode::Full {
        let unit = snap_to_grid(&spec.output_scale_grid, CANONICAL);
        for (s, &rm) in p.output_scale.iter_mut().zip(&r) {
            if !rm {
                *s = unit;
            }
        }
    }
    p.r = r;
    p.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::space::{validate, Violation};

    #[test]
    fn sample_removes_exact_count() {
        let mut rng = seeded(1);
        for (l, s, expect) in [(32, 9.0 / 32.0, 9), (40, 10.0 / 40.0, 10), (8, 0.0, 0)] {
            let spec = SpaceSpec::new(l, 3, s, Mode::Full).unwrap();
            for _ in 0..20 {
                let c = sample(&spec, &mut rng).unwrap();
                assert_eq!(c.removed_count(), expect);
                assert!(validate(&c, &spec).is_empty());
            }
        }
    }

    #[test]
    fn sample_rejects_impossible_removal() {
        let mut spec = SpaceSpec::new(4, 1, 0.5, Mode::Full).unwrap();
        spec.remove_count = 5;
        assert!(sample(&spec, &mut seeded(0)).is_err());
    }

    #[test]
    fn snapping_ties_go_low() {
        let g = [0.5, 0.75, 1.0];
        assert_eq!(snap_to_grid(&g, 0.62), 0.5);
        assert_eq!(snap_to_grid(&g, 0.625), 0.5);
        assert_eq!(snap_to_grid(&g, 0.63), 0.75);
        assert_eq!(snap_to_grid(&g, 7.0), 1.0);
    }

    #[test]
    fn repair_restores_count_by_one_flip() {
        let spec = SpaceSpec::new(32, 2, 9.0 / 32.0, Mode::RemoveOnly).unwrap();
        let mut p = PruneConfig::identity(32, 2);
        for i in 0..10 {
            p.r[i] = true;
        }
        let fixed = repair(&p.clone().into(), &spec, &mut seeded(4));
        assert_eq!(fixed.removed_count(), 9);
        let flipped: Vec<usize> = (0..32).filter(|&i| fixed.removed()[i] != p.r[i]).collect();
        assert_eq!(flipped.len(), 1);
        assert!(flipped[0] < 10);
        assert!(validate(&fixed, &spec).is_empty());
    }

    #[test]
    fn repair_snaps_and_is_fixed_point() {
        let spec = SpaceSpec::new(3, 2, 0.0, Mode::Full)
            .unwrap()
            .with_grids(vec![0.5, 0.75, 1.0], vec![1.0])
            .unwrap();
        let mut p = PruneConfig::identity(3, 2);
        p.c[0] = vec![true, true];
        p.merge_factor[0] = 0.62;
        p.merge_factor[2] = 0.9; // inert
        let fixed = repair(&p.into(), &spec, &mut seeded(0));
        let fp = fixed.as_prune().unwrap();
        assert_eq!(fp.merge_factor, vec![0.5, 1.0, 1.0]);
        assert!(validate(&fixed, &spec).is_empty());
        assert_eq!(repair(&fixed, &spec, &mut seeded(9)), fixed);
    }

    #[test]
    fn repair_enforces_select_remove() {
        let spec = SpaceSpec::new(2, 3, 0.0, Mode::SelectRemove).unwrap();
        let mut p = PruneConfig::identity(2, 3);
        p.c[1] = vec![true, true, true];
        p.merge_factor[1] = 0.5;
        let fixed = repair(&p.into(), &spec, &mut seeded(2));
        assert_eq!(fixed.as_prune().unwrap().selected(1), 1);
        assert!(validate(&fixed, &spec).is_empty());
    }

    #[test]
    fn warm_start_band() {
        let spec = SpaceSpec::new(32, 2, 9.0 / 32.0, Mode::Full).unwrap();
        let ws = warm_start(&spec, 50, &mut seeded(3)).unwrap();
        assert!(!ws.fell_back);
        for c in &ws.configs {
            assert!(validate(c, &spec).is_empty());
            for (i, &rm) in c.removed().iter().enumerate() {
                assert!(!rm || (8..24).contains(&i));
            }
            assert!(c.as_prune().unwrap().c.iter().flatten().all(|b| !b));
        }
        let small = SpaceSpec::new(4, 1, 0.75, Mode::Full).unwrap();
        let ws = warm_start(&small, 3, &mut seeded(3)).unwrap();
        assert!(ws.fell_back);
        assert!(ws.configs.iter().all(|c| validate(c, &small).is_empty()));
    }

    #[test]
    fn warm_start_seeded() {
        let spec = SpaceSpec::new(32, 2, 9.0 / 32.0, Mode::Full).unwrap();
        let a = warm_start(&spec, 4, &mut seeded(1)).unwrap();
        assert_eq!(a, warm_start(&spec, 4, &mut seeded(1)).unwrap());
        assert_ne!(a, warm_start(&spec, 4, &mut seeded(2)).unwrap());
    }

    #[test]
    fn fold_sampling_valid() {
        let spec = SpaceSpec::new(6, 0, 0.5, Mode::Fold).unwrap();
        let mut rng = seeded(8);
        for _ in 0..50 {
            let c = sample(&spec, &mut rng).unwrap();
            assert_eq!(validate(&c, &spec), Vec::<Violation>::new());
        }
    }
}
