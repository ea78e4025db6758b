//! Choosing which correctly classified nodes to attack.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::rng::rng;

/// Group sizes: largest clean margins, smallest clean margins, and a
/// uniform sample of the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetCounts {
    pub high: usize,
    pub low: usize,
    pub random: usize,
}

impl Default for TargetCounts {
    fn default() -> Self {
        TargetCounts {
            high: 10,
            low: 10,
            random: 20,
        }
    }
}

impl TargetCounts {
    pub fn total(&self) -> usize {
        self.high + self.low + self.random
    }

    /// Scales the groups down to fit `available` nodes, keeping their
    /// proportions as far as rounding allows.
    pub fn shrink_to(&self, available: usize) -> TargetCounts {
        let total = self.total();
        if available >= total {
            return *self;
        }
        let high = self.high * available / total;
        let low = self.low * available / total;
        TargetCounts {
            high,
            low,
            random: (available - high - low).min(self.random),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetGroups {
    pub high: Vec<NodeId>,
    pub low: Vec<NodeId>,
    pub random: Vec<NodeId>,
}

impl TargetGroups {
    /// High, then low, then random.
    pub fn all(&self) -> Vec<NodeId> {
        self.high.iter().chain(&self.low).chain(&self.random).copied().collect()
    }
}

/// Picks targets among the nodes of `pool` that are marked `correct`.
/// `margins` and `correct` are indexed by node. Margin ties go to the
/// lower node index in both extreme groups.
pub fn select_targets(
    pool: &[NodeId],
    margins: &[f64],
    correct: &[bool],
    counts: &TargetCounts,
    seed: u64,
) -> Result<TargetGroups> {
    if margins.len() != correct.len() {
        return Err(Error::dims("margins and correct mask differ in length"));
    }
    if let Some(&u) = pool.iter().find(|&&u| u >= margins.len()) {
        return Err(Error::invalid(format!("pool node {u} out of range")));
    }
    let mut eligible: Vec<NodeId> = pool.iter().copied().filter(|&u| correct[u]).collect();
    eligible.sort_unstable();
    eligible.dedup();
    let counts = if eligible.len() < counts.total() {
        let shrunk = counts.shrink_to(eligible.len());
        log::warn!(
            "only {} correctly classified candidates; target groups shrunk to {}/{}/{}",
            eligible.len(),
            shrunk.high,
            shrunk.low,
            shrunk.random
        );
        shrunk
    } else {
        *counts
    };

    let by_margin_desc = {
        let mut v = eligible.clone();
        v.sort_by(|&a, &b| margins[b].total_cmp(&margins[a]).then(a.cmp(&b)));
        v
    };
    let high: Vec<NodeId> = by_margin_desc[..counts.high].to_vec();
    let mut by_margin_asc: Vec<NodeId> = eligible.iter().copied().filter(|u| !high.contains(u)).collect();
    by_margin_asc.sort_by(|&a, &b| margins[a].total_cmp(&margins[b]).then(a.cmp(&b)));
    let low: Vec<NodeId> = by_margin_asc[..counts.low].to_vec();
    let mut rest: Vec<NodeId> = eligible
        .iter()
        .copied()
        .filter(|u| !high.contains(u) && !low.contains(u))
        .collect();
    rest.shuffle(&mut rng(seed));
    rest.truncate(counts.random);
    rest.sort_unstable();
    Ok(TargetGroups {
        high,
        low,
        random: rest,
    })
}
