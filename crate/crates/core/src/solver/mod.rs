//! Minimizes the weighted objective over container assignments.
//!
//! Three modes share one candidate model: [`SolveMode::Exact`] runs a
//! depth-first branch and bound warm-started from the beam,
//! [`SolveMode::Beam`] keeps the best partial layouts level by level, and
//! [`SolveMode::Oracle`] enumerates every feasible layout for cross-checking.

mod constraints;
mod search;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use constraints::{check_constraints, Violation};

use crate::error::{Error, Result};
use crate::objectives::{evaluate, Assignment, MergeProblem, ObjectiveBreakdown};
use crate::presolver::{presolve, PreSolveResult};
use crate::voxelizer::{fixed_screen_rects, voxelize, VoxelGrid};
use crate::workspace::Scenario;

use search::Search;

/// Oracle refuses instances whose candidate product exceeds this.
pub const ORACLE_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    #[default]
    Exact,
    Beam,
    Oracle,
}

impl std::str::FromStr for SolveMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(SolveMode::Exact),
            "beam" => Ok(SolveMode::Beam),
            "oracle" => Ok(SolveMode::Oracle),
            other => Err(format!("unknown mode {other:?} (expected exact, beam or oracle)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveParams {
    pub mode: SolveMode,
    pub beam_width: usize,
    /// Candidate anchors kept per slot, best `v_c` first; 0 keeps all.
    pub top_k: usize,
    pub time_limit_s: f64,
    pub tolerance: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self { mode: SolveMode::Exact, beam_width: 16, top_k: 50, time_limit_s: 60.0, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub assignment: Option<Assignment>,
    pub breakdown: Option<ObjectiveBreakdown>,
    pub nodes_explored: u64,
    /// Not serialized so that output documents stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Pre-solve result plus the per-user container grids built around the
/// screens that stay fixed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub presolve: PreSolveResult,
    pub grids: [VoxelGrid; 2],
}

pub fn prepare(scn: &Scenario) -> Result<Prepared> {
    let pre = presolve(scn)?;
    let p = &scn.params;
    let grid = |u: usize| {
        let env = &scn.users[u];
        voxelize(env, p.voxel_size, p.mu, p.sigma, &fixed_screen_rects(env, &pre.pinned[u]))
    };
    let grids = [grid(0)?, grid(1)?];
    Ok(Prepared { presolve: pre, grids })
}

pub fn solve(scn: &Scenario, grids: &[VoxelGrid; 2], pre: &PreSolveResult, params: &SolveParams) -> Result<SolveReport> {
    let problem = MergeProblem::new(scn, pre, grids)?;
    solve_problem(&problem, params)
}

pub fn oracle_solve(scn: &Scenario, grids: &[VoxelGrid; 2], pre: &PreSolveResult, params: &SolveParams) -> Result<SolveReport> {
    solve(scn, grids, pre, &SolveParams { mode: SolveMode::Oracle, ..*params })
}

pub fn solve_problem(problem: &MergeProblem, params: &SolveParams) -> Result<SolveReport> {
    let started = Instant::now();
    let search = Search::new(problem, params, started);
    if problem.slots.is_empty() {
        return Ok(finish(problem, SolveStatus::Optimal, Some(Vec::new()), 0, started));
    }
    if search.has_empty_slot() {
        log::info!("a screen has no feasible anchor; instance is infeasible");
        return Ok(finish(problem, SolveStatus::Infeasible, None, 0, started));
    }

    let outcome = match params.mode {
        SolveMode::Oracle => {
            let combos = search.combinations();
            if combos > ORACLE_LIMIT {
                return Err(Error::TooLarge { combinations: combos, limit: ORACLE_LIMIT });
            }
            search.oracle()
        }
        SolveMode::Beam => search.beam(params.beam_width),
        SolveMode::Exact => search.exact(),
    };
    let status = match (outcome.best.is_some(), outcome.timed_out, params.mode) {
        (_, true, _) => SolveStatus::TimedOut,
        (false, false, _) => SolveStatus::Infeasible,
        (true, false, SolveMode::Beam) => SolveStatus::Feasible,
        (true, false, _) => SolveStatus::Optimal,
    };
    log::debug!("{:?} search: {:?} after {} nodes", params.mode, status, outcome.nodes);
    Ok(finish(problem, status, outcome.best, outcome.nodes, started))
}

fn finish(
    problem: &MergeProblem,
    status: SolveStatus,
    containers: Option<Vec<crate::voxelizer::ContainerId>>,
    nodes: u64,
    started: Instant,
) -> SolveReport {
    let (assignment, breakdown) = match containers {
        Some(c) => (Some(problem.assignment(&c)), Some(evaluate(problem, &c))),
        None => (None, None),
    };
    SolveReport { status, assignment, breakdown, nodes_explored: nodes, wall_time: started.elapsed().as_secs_f64() }
}
