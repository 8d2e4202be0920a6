//! Screen semantic values and the greedy hosting of shared screens on the
//! collaborator's unused physical monitors.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{angular_distance, gaussian_utility};
use crate::workspace::{Scenario, Screen, ScreenId, ScreenLabel, UserEnv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPair {
    pub shared: ScreenId,
    pub host: ScreenId,
    pub host_user: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreSolveResult {
    /// Semantic value of every screen, computed in its owner's workspace.
    pub values: BTreeMap<ScreenId, f64>,
    pub fixed_pairs: Vec<FixedPair>,
    /// Distinct screens that still need a placement, sorted by id.
    pub residual_screens: Vec<ScreenId>,
    /// Screens each user's view must place, sorted by id.
    pub placements: [Vec<ScreenId>; 2],
    /// Own virtual screens that stay put in their owner's view because the
    /// collaborator hosts them on a physical monitor.
    pub pinned: [Vec<ScreenId>; 2],
}

impl PreSolveResult {
    pub fn value(&self, id: &ScreenId) -> f64 {
        self.values[id]
    }

    pub fn host_of(&self, shared: &ScreenId) -> Option<&FixedPair> {
        self.fixed_pairs.iter().find(|p| &p.shared == shared)
    }

    pub fn is_empty_pool(&self) -> bool {
        self.placements.iter().all(Vec::is_empty)
    }
}

/// Gaussian semantic value of a screen from its angular offset to the
/// owner's workspace center.
pub fn screen_semantic_value(s: &Screen, env: &UserEnv, mu: f64, sigma: f64) -> Result<f64> {
    let theta = angular_distance(env.center_direction(), s.center() - env.head_pos)?;
    Ok(gaussian_utility(theta, mu, sigma))
}

fn by_value_desc<'a>(values: &BTreeMap<ScreenId, f64>) -> impl FnMut(&&'a Screen, &&'a Screen) -> Ordering + '_ {
    move |a, b| {
        values[&b.id]
            .partial_cmp(&values[&a.id])
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    }
}

pub fn presolve(scn: &Scenario) -> Result<PreSolveResult> {
    let p = &scn.params;
    let mut values = BTreeMap::new();
    for env in &scn.users {
        for s in &env.screens {
            values.insert(s.id.clone(), screen_semantic_value(s, env, p.mu, p.sigma)?);
        }
    }

    let mut fixed_pairs = Vec::new();
    for (from, to) in [(0usize, 1usize), (1, 0)] {
        let mut shared: Vec<&Screen> =
            scn.users[from].screens.iter().filter(|s| s.label == ScreenLabel::Shared).collect();
        let mut hosts: Vec<&Screen> = scn.users[to]
            .screens
            .iter()
            .filter(|s| s.physical && s.label == ScreenLabel::Available)
            .collect();
        shared.sort_by(by_value_desc(&values));
        hosts.sort_by(by_value_desc(&values));
        for (s, h) in shared.iter().zip(hosts.iter()) {
            fixed_pairs.push(FixedPair { shared: s.id.clone(), host: h.id.clone(), host_user: to });
        }
    }
    let hosted: BTreeSet<&ScreenId> = fixed_pairs.iter().map(|p| &p.shared).collect();

    let mut placements: [Vec<ScreenId>; 2] = Default::default();
    let mut pinned: [Vec<ScreenId>; 2] = Default::default();
    for u in 0..2 {
        let own = &scn.users[u];
        let remote = &scn.users[1 - u];
        for s in &own.screens {
            if s.physical || s.label == ScreenLabel::Private {
                continue;
            }
            if hosted.contains(&s.id) {
                pinned[u].push(s.id.clone());
            } else {
                placements[u].push(s.id.clone());
            }
        }
        for s in &remote.screens {
            if s.label == ScreenLabel::Shared && !hosted.contains(&s.id) {
                placements[u].push(s.id.clone());
            }
        }
        placements[u].sort();
        pinned[u].sort();
    }
    let residual_screens: BTreeSet<ScreenId> = placements.iter().flatten().cloned().collect();

    Ok(PreSolveResult {
        values,
        fixed_pairs,
        residual_screens: residual_screens.into_iter().collect(),
        placements,
        pinned,
    })
}
