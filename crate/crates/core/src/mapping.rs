//! The merged result: where every screen ends up in each user's view and
//! which copies correspond across users.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Rect3, Vec3};
use crate::objectives::Assignment;
use crate::presolver::PreSolveResult;
use crate::voxelizer::VoxelGrid;
use crate::workspace::{center_from_corner, AvatarSide, Scenario, Screen, ScreenId, ScreenLabel};

/// One shared screen and its center in both users' views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenLink {
    pub id: ScreenId,
    pub owner: usize,
    pub pos_user0: Vec3,
    pub pos_user1: Vec3,
    /// Displayed size in each view; a hosted copy takes its monitor's size.
    pub dims_user0: Vec3,
    pub dims_user1: Vec3,
    pub hosted_on: Option<ScreenId>,
}

impl ScreenLink {
    pub fn pos(&self, user: usize) -> Vec3 {
        if user == 0 {
            self.pos_user0
        } else {
            self.pos_user1
        }
    }

    pub fn dims(&self, user: usize) -> Vec3 {
        if user == 0 {
            self.dims_user0
        } else {
            self.dims_user1
        }
    }

    /// Screen surface in `user`'s view.
    pub fn rect(&self, user: usize) -> Rect3 {
        let d = self.dims(user);
        Rect3::from_center(self.pos(user), d.x, d.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Stays where it was (physical, or a virtual screen hosted remotely).
    Original,
    /// Anchored in a container by the solver.
    Placed,
    /// Shown on one of this user's physical monitors.
    Hosted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedScreen {
    pub id: ScreenId,
    pub owner: usize,
    pub label: ScreenLabel,
    pub center: Vec3,
    pub dims: Vec3,
    pub placement: Placement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seat {
    pub head_pos: Vec3,
    pub avatar_pos: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedWorkspace {
    pub links: Vec<ScreenLink>,
    /// Every screen visible in each user's merged view.
    pub layouts: [Vec<PlacedScreen>; 2],
    pub private_screens: [Vec<ScreenId>; 2],
    pub seats: [Seat; 2],
    pub avatar_sides: [AvatarSide; 2],
    pub mirror_streaming: bool,
}

impl MergedWorkspace {
    pub fn link(&self, id: &ScreenId) -> Option<&ScreenLink> {
        self.links.iter().find(|l| &l.id == id)
    }
}

/// Where `s` appears in `user`'s view, or `None` when it is not shown there.
fn locate(
    scn: &Scenario,
    pre: &PreSolveResult,
    grids: &[VoxelGrid; 2],
    asg: &Assignment,
    s: &Screen,
    user: usize,
) -> Result<Option<(Vec3, Vec3, Placement)>> {
    if s.label == ScreenLabel::Private {
        return Ok(None);
    }
    if let Some(c) = asg.placements.get(&(s.id.clone(), user)) {
        let grid = &grids[user];
        if c.index() >= grid.containers.len() {
            return Err(Error::Inconsistent(format!("container {} out of range for user {user}", c.0)));
        }
        return Ok(Some((center_from_corner(grid.container(*c).anchor, s.dims), s.dims, Placement::Placed)));
    }
    if pre.placements[user].contains(&s.id) {
        return Err(Error::Inconsistent(format!("screen {} has no placement for user {user}", s.id)));
    }
    if s.owner == user {
        return Ok(Some((s.center(), s.dims, Placement::Original)));
    }
    match pre.host_of(&s.id) {
        Some(pair) if pair.host_user == user => {
            let host = scn
                .screen(&pair.host)
                .ok_or_else(|| Error::Inconsistent(format!("unknown host screen {}", pair.host)))?;
            Ok(Some((host.center(), host.dims, Placement::Hosted)))
        }
        _ => Ok(None),
    }
}

/// Assembles both layouts and the cross-user links from a solved assignment.
pub fn build_merged(
    scn: &Scenario,
    pre: &PreSolveResult,
    grids: &[VoxelGrid; 2],
    asg: &Assignment,
) -> Result<MergedWorkspace> {
    let mut layouts: [Vec<PlacedScreen>; 2] = Default::default();
    let mut links = Vec::new();
    for s in scn.all_screens() {
        let mut views = [None, None];
        for (u, view) in views.iter_mut().enumerate() {
            *view = locate(scn, pre, grids, asg, s, u)?;
            if let Some((center, dims, placement)) = *view {
                layouts[u].push(PlacedScreen { id: s.id.clone(), owner: s.owner, label: s.label, center, dims, placement });
            }
        }
        if s.label == ScreenLabel::Shared {
            let [Some(v0), Some(v1)] = views else {
                return Err(Error::Inconsistent(format!("shared screen {} is missing from a view", s.id)));
            };
            links.push(ScreenLink {
                id: s.id.clone(),
                owner: s.owner,
                pos_user0: v0.0,
                pos_user1: v1.0,
                dims_user0: v0.1,
                dims_user1: v1.1,
                hosted_on: pre.host_of(&s.id).map(|p| p.host.clone()),
            });
        }
    }
    links.sort_by(|a, b| a.id.cmp(&b.id));
    for layout in &mut layouts {
        layout.sort_by(|a, b| a.id.cmp(&b.id));
    }

    let private = |u: usize| -> Vec<ScreenId> {
        scn.users[u].screens.iter().filter(|s| s.label == ScreenLabel::Private).map(|s| s.id.clone()).collect()
    };
    let seat = |u: usize| Seat { head_pos: scn.users[u].head_pos, avatar_pos: scn.users[u].avatar_pos };
    let avatar_sides = [scn.users[0].avatar_side, scn.users[1].avatar_side];
    Ok(MergedWorkspace {
        links,
        layouts,
        private_screens: [private(0), private(1)],
        seats: [seat(0), seat(1)],
        avatar_sides,
        mirror_streaming: avatar_sides[0] == avatar_sides[1],
    })
}
