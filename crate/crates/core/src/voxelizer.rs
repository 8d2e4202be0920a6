//! Candidate containers: a uniform grid of cubic cells over each user's
//! usable volumes, filtered by obstacles, fixed screens and proximity, and
//! annotated with semantic utility and cell-to-cell occlusion.

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angular_distance, gaussian_utility, ray_intersects_rect, Aabb, Ray, Rect3, Vec3, EPS};
use crate::workspace::{ScreenLabel, UserEnv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContainerId(pub u32);

impl ContainerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Why a generated cell did not survive filtering. Rules apply in this order
/// and a cell is attributed to the first one that removes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalRule {
    Obstacle,
    FixedScreen,
    Proximity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CellState {
    Outside,
    Removed(RemovalRule),
    Alive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalStats {
    pub generated: usize,
    pub obstacle: usize,
    pub fixed_screen: usize,
    pub proximity: usize,
    pub surviving: usize,
}

#[derive(Debug, Clone)]
pub struct Container {
    pub id: ContainerId,
    pub user: usize,
    /// Grid index `(ix, iy, iz)`.
    pub cell: [usize; 3],
    /// Bottom-left-near corner of the cell; screens anchor here.
    pub anchor: Vec3,
    /// Forward depth of the anchor relative to the head.
    pub depth: f64,
    pub value: f64,
    /// Containers hidden behind this one when it is filled.
    pub occludes: FixedBitSet,
    /// Containers that hide this one when filled.
    pub occluded_by: FixedBitSet,
}

#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub user: usize,
    pub head: Vec3,
    pub origin: Vec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    /// One bit per grid cell, set for surviving cells.
    pub occupancy: FixedBitSet,
    pub containers: Vec<Container>,
    pub stats: RemovalStats,
    states: Vec<CellState>,
    cell_to_container: Vec<Option<ContainerId>>,
}

/// Number of cells a length spans, rounding up.
pub fn cells_for(length: f64, cell_size: f64) -> usize {
    ((length / cell_size - 1e-9).ceil() as usize).max(1)
}

impl VoxelGrid {
    pub fn cell_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn linear(&self, [ix, iy, iz]: [usize; 3]) -> usize {
        (iz * self.dims[1] + iy) * self.dims[0] + ix
    }

    pub fn cell_min(&self, [ix, iy, iz]: [usize; 3]) -> Vec3 {
        self.origin + Vec3::new(ix as f64, iy as f64, iz as f64) * self.cell_size
    }

    pub fn cell_box(&self, cell: [usize; 3]) -> Aabb {
        let min = self.cell_min(cell);
        Aabb::new(min, min + Vec3::new(1.0, 1.0, 1.0) * self.cell_size)
    }

    pub fn cell_center(&self, cell: [usize; 3]) -> Vec3 {
        self.cell_min(cell) + Vec3::new(0.5, 0.5, 0.5) * self.cell_size
    }

    /// Center of the cell face nearest the user, where a screen would sit.
    pub fn face_center(&self, cell: [usize; 3]) -> Vec3 {
        self.cell_min(cell) + Vec3::new(0.5, 0.5, 0.0) * self.cell_size
    }

    pub fn container(&self, id: ContainerId) -> &Container {
        &self.containers[id.index()]
    }

    pub fn container_at(&self, cell: [usize; 3]) -> Option<ContainerId> {
        if cell[0] >= self.dims[0] || cell[1] >= self.dims[1] || cell[2] >= self.dims[2] {
            return None;
        }
        self.cell_to_container[self.linear(cell)]
    }

    pub fn removal_reason(&self, cell: [usize; 3]) -> Option<RemovalRule> {
        match self.states[self.linear(cell)] {
            CellState::Removed(rule) => Some(rule),
            _ => None,
        }
    }

    pub fn is_generated(&self, cell: [usize; 3]) -> bool {
        self.states[self.linear(cell)] != CellState::Outside
    }

    /// Footprint (in footprint cell order, row by row) of a `width × height`
    /// screen anchored at `anchor`, or `None` when any cell is missing.
    pub fn footprint(&self, anchor: ContainerId, width: f64, height: f64) -> Option<Vec<ContainerId>> {
        let [ix, iy, iz] = self.container(anchor).cell;
        let fw = cells_for(width, self.cell_size);
        let fh = cells_for(height, self.cell_size);
        let mut cells = Vec::with_capacity(fw * fh);
        for j in 0..fh {
            for i in 0..fw {
                cells.push(self.container_at([ix + i, iy + j, iz])?);
            }
        }
        Some(cells)
    }

    /// Anchors whose whole footprint consists of surviving cells.
    pub fn feasible_anchors(&self, width: f64, height: f64) -> Vec<ContainerId> {
        self.containers
            .iter()
            .filter(|c| self.footprint(c.id, width, height).is_some())
            .map(|c| c.id)
            .collect()
    }

    /// Whether filling `a` hides `b` (or the reverse).
    pub fn occlusion_conflict(&self, a: ContainerId, b: ContainerId) -> bool {
        self.container(a).occludes.contains(b.index()) || self.container(b).occludes.contains(a.index())
    }
}

/// Rectangles that generated cells must stay clear of: physical screens,
/// private screens and any `pinned` screens of this user.
pub fn fixed_screen_rects(env: &UserEnv, pinned: &[crate::workspace::ScreenId]) -> Vec<Rect3> {
    env.screens
        .iter()
        .filter(|s| s.physical || s.label == ScreenLabel::Private || pinned.contains(&s.id))
        .map(|s| s.rect())
        .collect()
}

fn rect_bounds(rect: &Rect3) -> Aabb {
    let corners = [
        rect.origin,
        rect.point_at_uv(1.0, 0.0),
        rect.point_at_uv(0.0, 1.0),
        rect.point_at_uv(1.0, 1.0),
    ];
    let min = corners.iter().fold(corners[0], |m, c| m.min(*c));
    let max = corners.iter().fold(corners[0], |m, c| m.max(*c));
    Aabb::new(min, max)
}

/// Semantic utility of a container anchored at `anchor`.
pub fn container_utility(anchor: Vec3, head: Vec3, center_dir: Vec3, mu: f64, sigma: f64) -> Result<f64> {
    let theta = angular_distance(center_dir, anchor - head)?;
    Ok(gaussian_utility(theta, mu, sigma))
}

/// Builds and filters the grid without failing on zero capacity.
pub fn voxelize(env: &UserEnv, cell_size: f64, mu: f64, sigma: f64, blockers: &[Rect3]) -> Result<VoxelGrid> {
    // Negated so NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(cell_size > 0.0) {
        return Err(Error::Domain("cell size must be positive".into()));
    }
    let mut lo = env.usable_volumes[0].min;
    let mut hi = env.usable_volumes[0].max;
    for v in &env.usable_volumes[1..] {
        lo = lo.min(v.min);
        hi = hi.max(v.max);
    }
    let extent = hi - lo;
    let dims = [
        cells_for(extent.x, cell_size),
        cells_for(extent.y, cell_size),
        cells_for(extent.z, cell_size),
    ];
    let mut grid = VoxelGrid {
        user: env.user,
        head: env.head_pos,
        origin: lo,
        cell_size,
        dims,
        occupancy: FixedBitSet::with_capacity(dims[0] * dims[1] * dims[2]),
        containers: Vec::new(),
        stats: RemovalStats::default(),
        states: vec![CellState::Outside; dims[0] * dims[1] * dims[2]],
        cell_to_container: vec![None; dims[0] * dims[1] * dims[2]],
    };
    let blocker_boxes: Vec<Aabb> = blockers.iter().map(rect_bounds).collect();

    for iz in 0..dims[2] {
        for iy in 0..dims[1] {
            for ix in 0..dims[0] {
                let cell = [ix, iy, iz];
                let cbox = grid.cell_box(cell);
                if !env.usable_volumes.iter().any(|v| v.contains(&cbox)) {
                    continue;
                }
                grid.stats.generated += 1;
                let center = cbox.center();
                let state = if env.obstacles.iter().any(|o| o.intersects(&cbox)) {
                    CellState::Removed(RemovalRule::Obstacle)
                } else if conflicts_with_blockers(env.head_pos, &cbox, center, blockers, &blocker_boxes) {
                    CellState::Removed(RemovalRule::FixedScreen)
                } else if center.distance(env.head_pos) < env.min_distance
                    || center.distance(env.avatar_pos) < env.min_distance
                {
                    CellState::Removed(RemovalRule::Proximity)
                } else {
                    CellState::Alive
                };
                let idx = grid.linear(cell);
                grid.states[idx] = state;
                match state {
                    CellState::Removed(RemovalRule::Obstacle) => grid.stats.obstacle += 1,
                    CellState::Removed(RemovalRule::FixedScreen) => grid.stats.fixed_screen += 1,
                    CellState::Removed(RemovalRule::Proximity) => grid.stats.proximity += 1,
                    CellState::Alive => {
                        let id = ContainerId(grid.containers.len() as u32);
                        let anchor = cbox.min;
                        let value = container_utility(anchor, env.head_pos, env.center_direction(), mu, sigma)?;
                        grid.occupancy.insert(idx);
                        grid.cell_to_container[idx] = Some(id);
                        grid.containers.push(Container {
                            id,
                            user: env.user,
                            cell,
                            anchor,
                            depth: anchor.z - env.head_pos.z,
                            value,
                            occludes: FixedBitSet::new(),
                            occluded_by: FixedBitSet::new(),
                        });
                    }
                    CellState::Outside => unreachable!(),
                }
            }
        }
    }
    grid.stats.surviving = grid.containers.len();
    compute_occlusion(&mut grid);
    Ok(grid)
}

/// Like [`voxelize`] but fails when no cell survives.
pub fn generate(env: &UserEnv, cell_size: f64, mu: f64, sigma: f64, blockers: &[Rect3]) -> Result<VoxelGrid> {
    let grid = voxelize(env, cell_size, mu, sigma, blockers)?;
    if grid.containers.is_empty() {
        return Err(Error::NoCapacity { user: env.user });
    }
    Ok(grid)
}

fn conflicts_with_blockers(head: Vec3, cbox: &Aabb, center: Vec3, rects: &[Rect3], boxes: &[Aabb]) -> bool {
    if boxes.iter().any(|b| b.intersects(cbox)) {
        return true;
    }
    // A hit anywhere along the head ray means the cell hides the screen or is
    // hidden by it.
    let Ok(ray) = Ray::through(head, center) else {
        return true;
    };
    rects.iter().any(|r| ray_intersects_rect(&ray, r).is_some())
}

/// Fills `occludes`/`occluded_by`: container `c` occludes `c'` when the
/// segment from the head to the face center of `c'` crosses the closed front
/// face of `c` before reaching `c'`.
pub fn compute_occlusion(grid: &mut VoxelGrid) {
    let n = grid.containers.len();
    let head = grid.head;
    let g = &*grid;
    // For every target, collect the occluders along its sight line.
    let occluders: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|t| {
            let target_cell = g.containers[t].cell;
            let target = g.face_center(target_cell);
            let mut found = Vec::new();
            for iz in 0..target_cell[2] {
                let plane_z = g.origin.z + iz as f64 * g.cell_size;
                let s = (plane_z - head.z) / (target.z - head.z);
                if !(s > 0.0 && s < 1.0) {
                    continue;
                }
                let p = head + (target - head) * s;
                let (x_lo, x_hi) = index_span(p.x - g.origin.x, g.cell_size, g.dims[0]);
                let (y_lo, y_hi) = index_span(p.y - g.origin.y, g.cell_size, g.dims[1]);
                for iy in y_lo..=y_hi {
                    for ix in x_lo..=x_hi {
                        if let Some(c) = g.container_at([ix, iy, iz]) {
                            found.push(c.index());
                        }
                    }
                }
            }
            found
        })
        .collect();

    for c in &mut grid.containers {
        c.occludes = FixedBitSet::with_capacity(n);
        c.occluded_by = FixedBitSet::with_capacity(n);
    }
    for (target, list) in occluders.into_iter().enumerate() {
        for occ in list {
            grid.containers[occ].occludes.insert(target);
            grid.containers[target].occluded_by.insert(occ);
        }
    }
}

/// Range of cell indices whose closed interval `[i·d, (i+1)·d]` contains `offset`.
fn index_span(offset: f64, d: f64, count: usize) -> (usize, usize) {
    let lo = ((offset - EPS) / d).floor();
    let hi = ((offset + EPS) / d).floor();
    if hi < 0.0 || lo >= count as f64 {
        return (1, 0);
    }
    let lo = lo.max(0.0) as usize;
    let hi = (hi as usize).min(count - 1);
    (lo, hi)
}
