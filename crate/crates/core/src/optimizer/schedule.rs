use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub count: usize,
    pub budget: usize,
    /// Index into the budget ladder.
    pub rung: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bracket {
    pub s: usize,
    pub n: usize,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperbandSchedule {
    pub s_max: usize,
    pub ladder: Vec<usize>,
    /// Ordered from `s_max` down to 0.
    pub brackets: Vec<Bracket>,
}

impl HyperbandSchedule {
    /// Trials consumed by one full pass over all brackets.
    pub fn sweep_trials(&self) -> usize {
        self.brackets.iter().flat_map(|b| &b.stages).map(|s| s.count).sum()
    }
}

/// Successive-halving brackets over the ladder `{b_min·η^i : i < s_max} ∪ {b_max}`.
///
/// `s_max = ⌊log_η(b_max / b_min)⌋`; bracket `s` starts with
/// `n = ⌈(s_max+1)/(s+1)·η^s⌉` configurations on rung `s_max − s`, and stage
/// `i` keeps `⌊n·η^{−i}⌋` of them on the next rung up.
pub fn compute_schedule(b_min: usize, b_max: usize, eta: usize) -> Result<HyperbandSchedule> {
    if b_min == 0 || b_min > b_max {
        return Err(Error::config(format!("need 0 < b_min <= b_max, got {b_min} and {b_max}")));
    }
    if eta < 2 {
        return Err(Error::config("reduction factor eta must be at least 2"));
    }
    let mut s_max = 0;
    let mut rung = b_min;
    while let Some(next) = rung.checked_mul(eta).filter(|&v| v <= b_max) {
        rung = next;
        s_max += 1;
    }
    let mut ladder: Vec<usize> = (0..s_max).map(|i| b_min * eta.pow(i as u32)).collect();
    ladder.push(b_max);
    let brackets = (0..=s_max)
        .rev()
        .map(|s| {
            let n = ((s_max + 1) * eta.pow(s as u32)).div_ceil(s + 1);
            let stages = (0..=s)
                .map(|i| Stage {
                    count: n / eta.pow(i as u32),
                    budget: ladder[s_max - s + i],
                    rung: s_max - s + i,
                })
                .collect();
            Bracket { s, n, stages }
        })
        .collect();
    Ok(HyperbandSchedule { s_max, ladder, brackets })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stages(b: &Bracket) -> Vec<(usize, usize)> {
        b.stages.iter().map(|s| (s.count, s.budget)).collect()
    }

    #[test]
    fn reported_ladder_and_brackets() {
        let s = compute_schedule(100, 1000, 3).unwrap();
        assert_eq!(s.s_max, 2);
        assert_eq!(s.ladder, vec![100, 300, 1000]);
        assert_eq!(stages(&s.brackets[0]), vec![(9, 100), (3, 300), (1, 1000)]);
        assert_eq!(stages(&s.brackets[1]), vec![(5, 300), (1, 1000)]);
        assert_eq!(stages(&s.brackets[2]), vec![(3, 1000)]);
        assert_eq!(s.sweep_trials(), 22);
    }

    #[test]
    fn degenerate_single_rung() {
        let s = compute_schedule(500, 500, 3).unwrap();
        assert_eq!(s.s_max, 0);
        assert_eq!(s.ladder, vec![500]);
        assert_eq!(s.brackets.len(), 1);
        assert_eq!(stages(&s.brackets[0]), vec![(1, 500)]);
    }

    #[test]
    fn bracket_invariants() {
        for (lo, hi, eta) in [(1, 81, 3), (10, 1000, 2), (7, 100, 4), (100, 200, 3)] {
            let s = compute_schedule(lo, hi, eta).unwrap();
            for b in &s.brackets {
                assert_eq!(b.stages.last().unwrap().budget, hi);
                assert!(b.stages.windows(2).all(|w| w[0].budget < w[1].budget && w[0].count >= w[1].count));
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(compute_schedule(10, 5, 3).is_err());
        assert!(compute_schedule(10, 50, 1).is_err());
        assert!(compute_schedule(0, 50, 3).is_err());
    }
}
