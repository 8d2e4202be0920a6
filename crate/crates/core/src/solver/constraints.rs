//! Independent re-validation of assignments. Footprints and conflicts are
//! recomputed from the grids rather than taken from the search's bitsets.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::objectives::{Assignment, MergeProblem};
use crate::voxelizer::ContainerId;
use crate::workspace::ScreenId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    Missing { screen: ScreenId, user: usize },
    Unexpected { screen: ScreenId, user: usize },
    UnknownContainer { screen: ScreenId, user: usize, container: ContainerId },
    FootprintOutside { screen: ScreenId, user: usize },
    Overlap { user: usize, container: ContainerId, screens: (ScreenId, ScreenId) },
    Occlusion { user: usize, screens: (ScreenId, ScreenId) },
}

/// Every placed footprint lies on surviving cells, each slot is placed
/// exactly once, no cell holds two screens and no two screens' footprints
/// occlude each other.
pub fn check_constraints(problem: &MergeProblem, asg: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in &problem.slots {
        if !asg.placements.contains_key(&(s.screen.clone(), s.user)) {
            out.push(Violation::Missing { screen: s.screen.clone(), user: s.user });
        }
    }

    // user → (screen, footprint cells)
    let mut placed: [Vec<(ScreenId, Vec<ContainerId>)>; 2] = Default::default();
    for ((screen, user), &container) in &asg.placements {
        let Some(slot) = problem.slots.iter().find(|s| &s.screen == screen && s.user == *user) else {
            out.push(Violation::Unexpected { screen: screen.clone(), user: *user });
            continue;
        };
        let grid = &problem.grids[*user];
        if container.index() >= grid.containers.len() {
            out.push(Violation::UnknownContainer { screen: screen.clone(), user: *user, container });
            continue;
        }
        match grid.footprint(container, slot.dims.x, slot.dims.y) {
            Some(cells) => placed[*user].push((screen.clone(), cells)),
            None => out.push(Violation::FootprintOutside { screen: screen.clone(), user: *user }),
        }
    }

    for (user, screens) in placed.iter().enumerate() {
        let mut owner: BTreeMap<ContainerId, &ScreenId> = BTreeMap::new();
        for (screen, cells) in screens {
            for c in cells {
                if let Some(prev) = owner.insert(*c, screen) {
                    out.push(Violation::Overlap { user, container: *c, screens: (prev.clone(), screen.clone()) });
                }
            }
        }
        let grid = &problem.grids[user];
        for (i, (a, cells_a)) in screens.iter().enumerate() {
            for (b, cells_b) in &screens[i + 1..] {
                let hidden = cells_a.iter().any(|x| cells_b.iter().any(|y| grid.occlusion_conflict(*x, *y)));
                if hidden {
                    out.push(Violation::Occlusion { user, screens: (a.clone(), b.clone()) });
                }
            }
        }
    }
    out
}
