//! The four layout objectives and their weighted total, evaluated on complete
//! assignments.
//!
//! Point clouds are built from screen centers. Agreement compares the shared
//! screens of both merged views; modification compares each user's own
//! screens before and after merging.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{hausdorff, Vec3};
use crate::presolver::{FixedPair, PreSolveResult};
use crate::voxelizer::{ContainerId, VoxelGrid};
use crate::workspace::{center_from_corner, Scenario, ScreenId, ScreenLabel, Weights};

/// Number of users in a merge.
pub const USERS: usize = 2;

/// One screen that must be placed in one user's view.
#[derive(Debug, Clone)]
pub struct Slot {
    pub screen: ScreenId,
    pub user: usize,
    pub owner: usize,
    /// Semantic value of the screen in its owner's workspace.
    pub value: f64,
    pub dims: Vec3,
    /// Counted in the agreement cloud (the screen is shared).
    pub in_agreement: bool,
    /// Counted in the modification cloud (the view belongs to the owner).
    pub in_modification: bool,
}

/// Everything needed to score an assignment: slots in canonical
/// `(screen id, user)` order, the fixed parts of every cloud and the
/// normalization constants.
#[derive(Debug, Clone)]
pub struct MergeProblem<'a> {
    pub grids: &'a [VoxelGrid; 2],
    pub slots: Vec<Slot>,
    pub fixed_pairs: Vec<FixedPair>,
    /// Shared-screen centers whose position in each view is already decided.
    pub fixed_agreement: [Vec<Vec3>; 2],
    /// Own-screen centers that do not move, per user.
    pub fixed_modification: [Vec<Vec3>; 2],
    /// Own-screen centers before merging, per user.
    pub priors: [Vec<Vec3>; 2],
    pub z_avg: [f64; 2],
    pub n_screens: usize,
    pub n_containers: [usize; 2],
    pub weights: Weights,
}

impl<'a> MergeProblem<'a> {
    pub fn new(scn: &Scenario, pre: &PreSolveResult, grids: &'a [VoxelGrid; 2]) -> Result<Self> {
        let mut slots = Vec::new();
        for u in 0..USERS {
            for id in &pre.placements[u] {
                let s = scn.screen(id).ok_or_else(|| Error::Inconsistent(format!("unknown screen {id}")))?;
                slots.push(Slot {
                    screen: id.clone(),
                    user: u,
                    owner: s.owner,
                    value: pre.value(id),
                    dims: s.dims,
                    in_agreement: s.label == ScreenLabel::Shared,
                    in_modification: s.owner == u,
                });
            }
        }
        slots.sort_by(|a, b| (&a.screen, a.user).cmp(&(&b.screen, b.user)));

        let mut fixed_agreement: [Vec<Vec3>; 2] = Default::default();
        let mut fixed_modification: [Vec<Vec3>; 2] = Default::default();
        let mut priors: [Vec<Vec3>; 2] = Default::default();
        for u in 0..USERS {
            for s in scn.all_screens() {
                if s.label == ScreenLabel::Private {
                    continue;
                }
                let placed_here = pre.placements[u].contains(&s.id);
                if s.owner == u {
                    priors[u].push(s.center());
                    if !placed_here {
                        fixed_modification[u].push(s.center());
                    }
                }
                if s.label != ScreenLabel::Shared || placed_here {
                    continue;
                }
                let pos = if s.owner == u {
                    s.center()
                } else {
                    let pair = pre
                        .host_of(&s.id)
                        .filter(|p| p.host_user == u)
                        .ok_or_else(|| Error::Inconsistent(format!("shared screen {} has no place for user {u}", s.id)))?;
                    scn.screen(&pair.host)
                        .ok_or_else(|| Error::Inconsistent(format!("unknown host {}", pair.host)))?
                        .center()
                };
                fixed_agreement[u].push(pos);
            }
        }

        Ok(Self {
            grids,
            slots,
            fixed_pairs: pre.fixed_pairs.clone(),
            fixed_agreement,
            fixed_modification,
            priors,
            z_avg: [scn.users[0].z_avg, scn.users[1].z_avg],
            n_screens: pre.residual_screens.len(),
            n_containers: [grids[0].containers.len(), grids[1].containers.len()],
            weights: scn.params.weights,
        })
    }

    /// Center of `slot`'s screen when anchored at `container`.
    pub fn placed_center(&self, slot: usize, container: ContainerId) -> Vec3 {
        let s = &self.slots[slot];
        center_from_corner(self.grids[s.user].container(container).anchor, s.dims)
    }

    /// Normalizer `N_s · N_u · N_C(u)` for the per-placement sums.
    pub fn normalizer(&self, user: usize) -> f64 {
        (self.n_screens * USERS * self.n_containers[user]) as f64
    }

    /// Semantic-utility contribution of one placement (unweighted, negative).
    pub fn utility_term(&self, slot: usize, container: ContainerId) -> f64 {
        let s = &self.slots[slot];
        let v_c = self.grids[s.user].container(container).value;
        -(s.value * v_c) / self.normalizer(s.user)
    }

    /// Appearance contribution of one placement (unweighted).
    pub fn appearance_term(&self, slot: usize, container: ContainerId) -> f64 {
        let s = &self.slots[slot];
        let z_c = self.grids[s.user].container(container).depth;
        (self.z_avg[s.user] - z_c).abs() / self.normalizer(s.user)
    }

    pub fn slot_index(&self, screen: &ScreenId, user: usize) -> Option<usize> {
        self.slots.iter().position(|s| &s.screen == screen && s.user == user)
    }

    /// Containers in slot order; fails unless every slot is placed exactly once.
    pub fn slot_containers(&self, asg: &Assignment) -> Result<Vec<ContainerId>> {
        if asg.placements.len() != self.slots.len() {
            return Err(Error::Inconsistent(format!(
                "assignment has {} placements, expected {}",
                asg.placements.len(),
                self.slots.len()
            )));
        }
        self.slots
            .iter()
            .map(|s| {
                asg.placements
                    .get(&(s.screen.clone(), s.user))
                    .copied()
                    .ok_or_else(|| Error::Inconsistent(format!("screen {} unplaced for user {}", s.screen, s.user)))
            })
            .collect()
    }

    pub fn assignment(&self, containers: &[ContainerId]) -> Assignment {
        Assignment {
            placements: self
                .slots
                .iter()
                .zip(containers)
                .map(|(s, c)| ((s.screen.clone(), s.user), *c))
                .collect(),
            fixed: self.fixed_pairs.clone(),
        }
    }

    fn agreement_clouds(&self, containers: &[ContainerId]) -> [Vec<Vec3>; 2] {
        let mut clouds = self.fixed_agreement.clone();
        for (i, s) in self.slots.iter().enumerate() {
            if s.in_agreement {
                clouds[s.user].push(self.placed_center(i, containers[i]));
            }
        }
        clouds
    }

    fn modification_clouds(&self, containers: &[ContainerId]) -> [Vec<Vec3>; 2] {
        let mut clouds = self.fixed_modification.clone();
        for (i, s) in self.slots.iter().enumerate() {
            if s.in_modification {
                clouds[s.user].push(self.placed_center(i, containers[i]));
            }
        }
        clouds
    }
}

/// Decision output: a container for every `(screen, user)` slot plus the
/// pre-solved hosting pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    #[serde(with = "placement_list")]
    pub placements: BTreeMap<(ScreenId, usize), ContainerId>,
    pub fixed: Vec<FixedPair>,
}

mod placement_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        screen: ScreenId,
        user: usize,
        container: ContainerId,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(ScreenId, usize), ContainerId>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = map
            .iter()
            .map(|((screen, user), c)| Entry { screen: screen.clone(), user: *user, container: *c })
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<(ScreenId, usize), ContainerId>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| ((e.screen, e.user), e.container)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    #[serde(rename = "A")]
    pub agreement: f64,
    #[serde(rename = "M")]
    pub modification: f64,
    #[serde(rename = "V")]
    pub semantic_utility: f64,
    #[serde(rename = "P")]
    pub appearance: f64,
    pub total: f64,
}

impl ObjectiveBreakdown {
    pub fn new(w: &Weights, agreement: f64, modification: f64, semantic_utility: f64, appearance: f64) -> Self {
        // `+ 0.0` turns the -0.0 of empty sums into 0.0.
        Self {
            agreement: agreement + 0.0,
            modification: modification + 0.0,
            semantic_utility: semantic_utility + 0.0,
            appearance: appearance + 0.0,
            total: w.a * agreement + w.m * modification + w.v * semantic_utility + w.p * appearance + 0.0,
        }
    }
}

fn agreement_of(p: &MergeProblem, containers: &[ContainerId]) -> f64 {
    let [a, b] = p.agreement_clouds(containers);
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    hausdorff(&a, &b).expect("both views hold every shared screen")
}

fn modification_of(p: &MergeProblem, containers: &[ContainerId]) -> f64 {
    let after = p.modification_clouds(containers);
    let sum: f64 = (0..USERS)
        .map(|u| {
            if p.priors[u].is_empty() {
                0.0
            } else {
                hausdorff(&p.priors[u], &after[u]).expect("priors and placements pair up")
            }
        })
        .sum();
    0.5 * sum
}

fn semantic_utility_of(p: &MergeProblem, containers: &[ContainerId]) -> f64 {
    containers.iter().enumerate().map(|(i, c)| p.utility_term(i, *c)).sum()
}

fn appearance_of(p: &MergeProblem, containers: &[ContainerId]) -> f64 {
    containers.iter().enumerate().map(|(i, c)| p.appearance_term(i, *c)).sum()
}

/// Scores a complete slot-ordered container list from scratch.
pub fn evaluate(p: &MergeProblem, containers: &[ContainerId]) -> ObjectiveBreakdown {
    ObjectiveBreakdown::new(
        &p.weights,
        agreement_of(p, containers),
        modification_of(p, containers),
        semantic_utility_of(p, containers),
        appearance_of(p, containers),
    )
}

/// Hausdorff distance between the two views' shared-screen clouds; 0 when
/// nothing is shared.
pub fn agreement(asg: &Assignment, p: &MergeProblem) -> Result<f64> {
    Ok(agreement_of(p, &p.slot_containers(asg)?))
}

/// Mean over users of the Hausdorff distance between their own screens
/// before and after merging.
pub fn modification(asg: &Assignment, p: &MergeProblem) -> Result<f64> {
    Ok(modification_of(p, &p.slot_containers(asg)?))
}

pub fn semantic_utility(asg: &Assignment, p: &MergeProblem) -> Result<f64> {
    Ok(semantic_utility_of(p, &p.slot_containers(asg)?))
}

pub fn appearance(asg: &Assignment, p: &MergeProblem) -> Result<f64> {
    Ok(appearance_of(p, &p.slot_containers(asg)?))
}

pub fn total(asg: &Assignment, p: &MergeProblem) -> Result<ObjectiveBreakdown> {
    Ok(evaluate(p, &p.slot_containers(asg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use crate::voxelizer::voxelize;
    use crate::workspace::{AvatarSide, Screen, UserEnv};

    fn env(user: usize, screens: Vec<Screen>) -> UserEnv {
        let center = crate::workspace::workspace_center(&screens).unwrap();
        UserEnv {
            user,
            head_pos: Vec3::new(0.0, 1.2, 0.0),
            avatar_pos: Vec3::new(3.0, 1.2, 0.0),
            avatar_side: AvatarSide::Right,
            min_distance: 0.3,
            z_avg: center.z - 0.0,
            workspace_center: center,
            screens,
            obstacles: vec![],
            usable_volumes: vec![Aabb::new(Vec3::new(-0.5, 1.0, 1.0), Vec3::new(0.5, 1.4, 1.1))],
        }
    }

    fn grid(e: &UserEnv) -> VoxelGrid {
        voxelize(e, 0.1, 0.0, 0.5, &[]).unwrap()
    }

    fn slot(screen: &str, user: usize, owner: usize) -> Slot {
        Slot {
            screen: screen.into(),
            user,
            owner,
            value: 1.0,
            dims: Vec3::new(0.1, 0.1, 0.0),
            in_agreement: true,
            in_modification: owner == user,
        }
    }

    fn problem<'a>(grids: &'a [VoxelGrid; 2], slots: Vec<Slot>) -> MergeProblem<'a> {
        MergeProblem {
            grids,
            slots,
            fixed_pairs: vec![],
            fixed_agreement: Default::default(),
            fixed_modification: Default::default(),
            priors: Default::default(),
            z_avg: [1.0, 1.0],
            n_screens: 1,
            n_containers: [grids[0].containers.len(), grids[1].containers.len()],
            weights: crate::workspace::DEFAULT_WEIGHTS,
        }
    }

    fn screen(id: &str, owner: usize, pos: Vec3) -> Screen {
        Screen { id: id.into(), owner, physical: false, label: ScreenLabel::Shared, pos, dims: Vec3::new(0.1, 0.1, 0.0) }
    }

    fn grids() -> [VoxelGrid; 2] {
        let e0 = env(0, vec![screen("a", 0, Vec3::new(-0.05, 1.15, 1.0))]);
        let e1 = env(1, vec![screen("b", 1, Vec3::new(-0.05, 1.15, 1.0))]);
        [grid(&e0), grid(&e1)]
    }

    #[test]
    fn agreement_zero_for_identical_layouts() {
        let g = grids();
        let p = problem(&g, vec![slot("a", 0, 0), slot("a", 1, 0)]);
        let c = g[0].container_at([3, 1, 0]).unwrap();
        assert_eq!(agreement_of(&p, &[c, c]), 0.0);
    }

    #[test]
    fn agreement_single_screen_offset() {
        let g = grids();
        let p = problem(&g, vec![slot("a", 0, 0), slot("a", 1, 0)]);
        let c0 = g[0].container_at([2, 1, 0]).unwrap();
        let c1 = g[1].container_at([5, 1, 0]).unwrap();
        assert!((agreement_of(&p, &[c0, c1]) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn agreement_without_shared_screens_is_zero() {
        let g = grids();
        let mut s = slot("a", 0, 0);
        s.in_agreement = false;
        let p = problem(&g, vec![s]);
        assert_eq!(agreement_of(&p, &[ContainerId(0)]), 0.0);
    }

    #[test]
    fn modification_half_of_single_move() {
        let g = grids();
        let mut p = problem(&g, vec![slot("a", 0, 0)]);
        let c = g[0].container_at([4, 1, 0]).unwrap();
        let center = p.placed_center(0, c);
        // Prior sits 0.2 m to the left; user 1 keeps a fixed screen in place.
        p.priors = [vec![center - Vec3::new(0.2, 0.0, 0.0)], vec![Vec3::new(0.0, 1.0, 1.0)]];
        p.fixed_modification = [vec![], vec![Vec3::new(0.0, 1.0, 1.0)]];
        assert!((modification_of(&p, &[c]) - 0.1).abs() < 1e-12);
        // Nothing moved.
        p.priors[0] = vec![center];
        assert_eq!(modification_of(&p, &[c]), 0.0);
    }

    #[test]
    fn semantic_utility_single_unit_pair() {
        // One placement, one container per user, v_s · v_c = 1.
        let e0 = env(0, vec![screen("a", 0, Vec3::new(-0.05, 1.15, 1.0))]);
        let mut single = e0.clone();
        single.usable_volumes = vec![Aabb::new(Vec3::new(0.0, 1.2, 1.0), Vec3::new(0.1, 1.3, 1.1))];
        // Aim the workspace center at the lone anchor so its v_c is exactly 1.
        single.workspace_center = Vec3::new(0.0, 1.2, 1.0);
        let g0 = voxelize(&single, 0.1, 0.0, 0.5, &[]).unwrap();
        assert_eq!(g0.containers.len(), 1);
        assert_eq!(g0.containers[0].value, 1.0);
        let g = [g0.clone(), g0];
        let p = problem(&g, vec![slot("a", 0, 1)]);
        assert_eq!(semantic_utility_of(&p, &[ContainerId(0)]), -0.5);
        let empty = MergeProblem { slots: vec![], ..p.clone() };
        assert_eq!(semantic_utility_of(&empty, &[]), 0.0);
    }

    #[test]
    fn appearance_hand_value() {
        let g = grids();
        let mut p = problem(&g, vec![slot("a", 0, 0)]);
        // All containers at depth 1.0; z_avg 1.5 → |1.5 − 1.0| / (1·2·N_C).
        p.z_avg = [1.5, 1.5];
        let n_c = g[0].containers.len() as f64;
        let expect = 0.5 / (2.0 * n_c);
        assert!((appearance_of(&p, &[ContainerId(0)]) - expect).abs() < 1e-15);
        p.z_avg = [1.0, 1.0];
        assert_eq!(appearance_of(&p, &[ContainerId(0)]), 0.0);
    }

    #[test]
    fn total_is_weighted_sum() {
        let w = crate::workspace::DEFAULT_WEIGHTS;
        let b = ObjectiveBreakdown::new(&w, 0.0, 0.0, -0.5, 0.0);
        assert!((b.total - -0.25).abs() < 1e-15);
        assert_eq!(ObjectiveBreakdown::new(&w, 0.0, 0.0, 0.0, 0.0).total, 0.0);
    }

    #[test]
    fn assignment_lookup_requires_every_slot() {
        let g = grids();
        let p = problem(&g, vec![slot("a", 0, 0), slot("a", 1, 0)]);
        let mut asg = p.assignment(&[ContainerId(0), ContainerId(1)]);
        assert!(total(&asg, &p).is_ok());
        asg.placements.remove(&("a".into(), 1));
        assert!(matches!(total(&asg, &p), Err(Error::Inconsistent(_))));
    }
}
