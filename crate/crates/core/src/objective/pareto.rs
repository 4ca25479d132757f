use serde::{Deserialize, Serialize};

use super::ObjectiveVector;
use crate::space::Config;

/// `a` dominates `b` when it is no worse everywhere and better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub encoding: Vec<f64>,
    pub config: Config,
    pub objectives: ObjectiveVector,
    /// Lowest scalarized value recorded for this configuration.
    pub scalarized_best: f64,
}

/// Mutually non-dominated configurations evaluated at the maximum budget.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParetoFront {
    members: Vec<FrontMember>,
}

impl ParetoFront {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn members(&self) -> &[FrontMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Inserts `candidate` unless something dominates it, evicting whatever
    /// it dominates. A repeated encoding only refreshes `scalarized_best`.
    /// Returns whether the candidate is (now) on the front.
    pub fn update(&mut self, candidate: FrontMember) -> bool {
        if let Some(existing) = self.members.iter_mut().find(|m| m.encoding == candidate.encoding) {
            existing.scalarized_best = existing.scalarized_best.min(candidate.scalarized_best);
            return true;
        }
        if self.members.iter().any(|m| dominates(&m.objectives.0, &candidate.objectives.0)) {
            return false;
        }
        self.members.retain(|m| !dominates(&candidate.objectives.0, &m.objectives.0));
        self.members.push(candidate);
        true
    }

    /// Members ordered by objective vector, then encoding.
    pub fn sorted(&self) -> Vec<&FrontMember> {
        let mut v: Vec<&FrontMember> = self.members.iter().collect();
        v.sort_by(|a, b| {
            cmp_vec(&a.objectives.0, &b.objectives.0).then_with(|| cmp_vec(&a.encoding, &b.encoding))
        });
        v
    }
}

pub(crate) fn cmp_vec(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}
