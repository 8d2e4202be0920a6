//! Branch and bound, beam and exhaustive enumeration over slot candidates.
//!
//! Slots are branched in order of descending screen value. A node's bound
//! adds the exact separable cost (utility and appearance) of placed slots,
//! the cheapest still-feasible candidate of every open slot, and partial
//! Hausdorff bounds for agreement and modification.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::time::{Duration, Instant};

use fixedbitset::FixedBitSet;
use rayon::prelude::*;

use crate::geometry::Vec3;
use crate::objectives::{evaluate, MergeProblem, USERS};
use crate::voxelizer::ContainerId;

use super::SolveParams;

struct Candidate {
    id: ContainerId,
    footprint: FixedBitSet,
    /// Footprint plus every cell it occludes or is occluded by.
    blocked: FixedBitSet,
    center: Vec3,
    /// Weighted utility + appearance cost of this placement.
    cost: f64,
}

pub(super) struct Outcome {
    pub best: Option<Vec<ContainerId>>,
    pub nodes: u64,
    pub timed_out: bool,
}

/// Partial assignment: candidate index per slot plus the cells it rules out.
#[derive(Clone)]
struct Node {
    chosen: Vec<Option<usize>>,
    forbidden: [FixedBitSet; 2],
    cost: f64,
}

#[derive(Clone)]
struct Incumbent {
    total: f64,
    key: Vec<u32>,
    containers: Vec<ContainerId>,
}

pub(super) struct Search<'p, 'a> {
    problem: &'p MergeProblem<'a>,
    cands: Vec<Vec<Candidate>>,
    /// Branching order: slot indices by descending value, then id.
    order: Vec<usize>,
    tol: f64,
    beam_width: usize,
    deadline: Instant,
    timed_out: AtomicBool,
}

/// Lexicographic key used to break ties between equal totals.
fn key_of(containers: &[ContainerId]) -> Vec<u32> {
    containers.iter().map(|c| c.0).collect()
}

fn min_distance(p: Vec3, cloud: &[Vec3]) -> f64 {
    cloud.iter().map(|q| p.distance(*q)).fold(f64::INFINITY, f64::min)
}

/// Lower bound on `sup_{x ∈ X} d(x, Y)` where `Y` holds `known` points plus
/// one point from each of the `pending` candidate sets.
fn directed_bound(xs: &[Vec3], known: &[Vec3], pending: &[&[Vec3]]) -> f64 {
    let mut worst: f64 = 0.0;
    for &x in xs {
        let mut d = min_distance(x, known);
        for set in pending {
            d = d.min(min_distance(x, set));
        }
        if d.is_finite() {
            worst = worst.max(d);
        }
    }
    worst
}

impl<'p, 'a> Search<'p, 'a> {
    pub fn new(problem: &'p MergeProblem<'a>, params: &SolveParams, started: Instant) -> Self {
        let w = problem.weights;
        let cands: Vec<Vec<Candidate>> = problem
            .slots
            .par_iter()
            .enumerate()
            .map(|(i, slot)| {
                let grid = &problem.grids[slot.user];
                let n = grid.containers.len();
                let mut anchors = grid.feasible_anchors(slot.dims.x, slot.dims.y);
                anchors.sort_by(|a, b| {
                    let (va, vb) = (grid.container(*a).value, grid.container(*b).value);
                    vb.partial_cmp(&va).unwrap_or(Ordering::Equal).then(a.cmp(b))
                });
                if params.top_k > 0 {
                    anchors.truncate(params.top_k);
                }
                anchors
                    .into_iter()
                    .map(|id| {
                        let cells = grid.footprint(id, slot.dims.x, slot.dims.y).expect("feasible anchor");
                        let mut footprint = FixedBitSet::with_capacity(n);
                        let mut blocked = FixedBitSet::with_capacity(n);
                        for c in cells {
                            footprint.insert(c.index());
                            let cont = grid.container(c);
                            blocked.union_with(&cont.occludes);
                            blocked.union_with(&cont.occluded_by);
                        }
                        blocked.union_with(&footprint);
                        Candidate {
                            id,
                            footprint,
                            blocked,
                            center: problem.placed_center(i, id),
                            cost: w.v * problem.utility_term(i, id) + w.p * problem.appearance_term(i, id),
                        }
                    })
                    .collect()
            })
            .collect();

        let mut order: Vec<usize> = (0..problem.slots.len()).collect();
        order.sort_by(|&a, &b| {
            let (sa, sb) = (&problem.slots[a], &problem.slots[b]);
            sb.value
                .partial_cmp(&sa.value)
                .unwrap_or(Ordering::Equal)
                .then_with(|| (&sa.screen, sa.user).cmp(&(&sb.screen, sb.user)))
        });

        let limit = Duration::try_from_secs_f64(params.time_limit_s).unwrap_or(Duration::MAX);
        Self {
            problem,
            cands,
            order,
            tol: params.tolerance,
            beam_width: params.beam_width.max(1),
            deadline: started.checked_add(limit).unwrap_or(started + Duration::from_secs(86_400 * 365)),
            timed_out: AtomicBool::new(false),
        }
    }

    pub fn has_empty_slot(&self) -> bool {
        self.cands.iter().any(Vec::is_empty)
    }

    /// Product of per-slot candidate counts.
    pub fn combinations(&self) -> f64 {
        self.cands.iter().map(|c| c.len() as f64).product()
    }

    fn root(&self) -> Node {
        Node {
            chosen: vec![None; self.problem.slots.len()],
            forbidden: [
                FixedBitSet::with_capacity(self.problem.n_containers[0]),
                FixedBitSet::with_capacity(self.problem.n_containers[1]),
            ],
            cost: 0.0,
        }
    }

    fn fits(&self, node: &Node, slot: usize, cand: usize) -> bool {
        let user = self.problem.slots[slot].user;
        self.cands[slot][cand].footprint.is_disjoint(&node.forbidden[user])
    }

    fn child(&self, node: &Node, slot: usize, cand: usize) -> Node {
        let mut next = node.clone();
        let c = &self.cands[slot][cand];
        next.chosen[slot] = Some(cand);
        next.forbidden[self.problem.slots[slot].user].union_with(&c.blocked);
        next.cost += c.cost;
        next
    }

    fn containers(&self, node: &Node) -> Vec<ContainerId> {
        node.chosen
            .iter()
            .enumerate()
            .map(|(slot, c)| self.cands[slot][c.expect("complete node")].id)
            .collect()
    }

    fn check_time(&self, nodes: u64) -> bool {
        if self.timed_out.load(AtomicOrdering::Relaxed) {
            return true;
        }
        if nodes.is_multiple_of(256) && Instant::now() >= self.deadline {
            self.timed_out.store(true, AtomicOrdering::Relaxed);
            return true;
        }
        false
    }

    /// Lower bound on the total of any completion of `node`, or `None` when
    /// some open slot has no candidate left.
    fn bound(&self, node: &Node) -> Option<f64> {
        let p = self.problem;
        let w = p.weights;
        let mut lb = node.cost;
        let mut pending: Vec<(usize, Vec<Vec3>)> = Vec::new();
        for (slot, chosen) in node.chosen.iter().enumerate() {
            if chosen.is_some() {
                continue;
            }
            let s = &p.slots[slot];
            let needs_points = (s.in_agreement && w.a > 0.0) || (s.in_modification && w.m > 0.0);
            let mut best = f64::INFINITY;
            let mut points = Vec::new();
            for (ci, c) in self.cands[slot].iter().enumerate() {
                if !self.fits(node, slot, ci) {
                    continue;
                }
                best = best.min(c.cost);
                if needs_points {
                    points.push(c.center);
                }
            }
            if best == f64::INFINITY {
                return None;
            }
            lb += best;
            if needs_points {
                pending.push((slot, points));
            }
        }

        let placed = |slot: usize| node.chosen[slot].map(|c| self.cands[slot][c].center);
        if w.a > 0.0 {
            let mut known: [Vec<Vec3>; 2] = p.fixed_agreement.clone();
            let mut open: [Vec<&[Vec3]>; 2] = Default::default();
            for (slot, s) in p.slots.iter().enumerate() {
                if s.in_agreement {
                    if let Some(c) = placed(slot) {
                        known[s.user].push(c);
                    }
                }
            }
            for (slot, pts) in &pending {
                let s = &p.slots[*slot];
                if s.in_agreement {
                    open[s.user].push(pts);
                }
            }
            let a = directed_bound(&known[0], &known[1], &open[1]).max(directed_bound(&known[1], &known[0], &open[0]));
            lb += w.a * a;
        }
        if w.m > 0.0 {
            let mut sum = 0.0;
            for u in 0..USERS {
                if p.priors[u].is_empty() {
                    continue;
                }
                let mut known = p.fixed_modification[u].clone();
                let mut open: Vec<&[Vec3]> = Vec::new();
                for (slot, s) in p.slots.iter().enumerate() {
                    if s.in_modification && s.user == u {
                        if let Some(c) = placed(slot) {
                            known.push(c);
                        }
                    }
                }
                for (slot, pts) in &pending {
                    let s = &p.slots[*slot];
                    if s.in_modification && s.user == u {
                        open.push(pts);
                    }
                }
                sum += directed_bound(&p.priors[u], &known, &open).max(directed_bound(&known, &p.priors[u], &[]));
            }
            lb += w.m * 0.5 * sum;
        }
        Some(lb)
    }

    /// Children of `node` at `depth` with their bounds, best bound first.
    fn expand(&self, node: &Node, depth: usize) -> Vec<(f64, Node)> {
        let slot = self.order[depth];
        let mut children: Vec<(f64, usize, Node)> = (0..self.cands[slot].len())
            .filter(|&c| self.fits(node, slot, c))
            .filter_map(|c| {
                let child = self.child(node, slot, c);
                self.bound(&child).map(|lb| (lb, c, child))
            })
            .collect();
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        children.into_iter().map(|(lb, _, n)| (lb, n)).collect()
    }

    fn better(&self, total: f64, key: &[u32], best: Option<&Incumbent>) -> bool {
        match best {
            None => true,
            Some(b) => total < b.total - self.tol || (total <= b.total + self.tol && key < b.key.as_slice()),
        }
    }

    fn leaf(&self, node: &Node) -> Incumbent {
        let containers = self.containers(node);
        Incumbent { total: evaluate(self.problem, &containers).total, key: key_of(&containers), containers }
    }

    fn offer(&self, candidate: Incumbent, best: &mut Option<Incumbent>) {
        if self.better(candidate.total, &candidate.key, best.as_ref()) {
            *best = Some(candidate);
        }
    }

    fn branch(&self, node: &Node, depth: usize, best: &mut Option<Incumbent>, nodes: &mut u64) {
        *nodes += 1;
        if self.check_time(*nodes) {
            return;
        }
        if depth == self.order.len() {
            self.offer(self.leaf(node), best);
            return;
        }
        for (lb, child) in self.expand(node, depth) {
            if let Some(b) = best {
                if lb > b.total + self.tol {
                    break;
                }
            }
            self.branch(&child, depth + 1, best, nodes);
        }
    }

    /// Branch and bound from the beam incumbent. Root children are explored
    /// in parallel, each starting from the same incumbent, so the result and
    /// node count do not depend on the number of threads.
    pub fn exact(&self) -> Outcome {
        let warm = self.beam(self.beam_width);
        let initial = warm.best.map(|c| Incumbent { total: evaluate(self.problem, &c).total, key: key_of(&c), containers: c });
        let root = self.root();
        let children = self.expand(&root, 0);
        let results: Vec<(Option<Incumbent>, u64)> = children
            .par_iter()
            .map(|(lb, child)| {
                let mut best = initial.clone();
                let mut nodes = 0;
                if best.as_ref().is_none_or(|b| *lb <= b.total + self.tol) {
                    self.branch(child, 1, &mut best, &mut nodes);
                }
                (best, nodes)
            })
            .collect();
        let mut best = initial;
        let mut nodes = warm.nodes + 1;
        for (candidate, n) in results {
            nodes += n;
            if let Some(c) = candidate {
                self.offer(c, &mut best);
            }
        }
        Outcome { best: best.map(|b| b.containers), nodes, timed_out: self.timed_out.load(AtomicOrdering::Relaxed) }
    }

    /// Keeps the `width` best partial layouts by (bound, key) at each level.
    pub fn beam(&self, width: usize) -> Outcome {
        let mut nodes = 1u64;
        let mut layer = vec![self.root()];
        for depth in 0..self.order.len() {
            let mut next: Vec<(f64, Vec<u32>, Node)> = layer
                .par_iter()
                .flat_map_iter(|node| {
                    self.expand(node, depth).into_iter().map(|(lb, child)| {
                        let key: Vec<u32> = self.order[..=depth]
                            .iter()
                            .map(|&s| self.cands[s][child.chosen[s].expect("placed")].id.0)
                            .collect();
                        (lb, key, child)
                    })
                })
                .collect();
            nodes += next.len() as u64;
            next.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            next.dedup_by(|a, b| a.1 == b.1);
            next.truncate(width);
            layer = next.into_iter().map(|(_, _, n)| n).collect();
            if layer.is_empty() || Instant::now() >= self.deadline {
                break;
            }
        }
        let mut best = None;
        for node in layer.iter().filter(|n| n.chosen.iter().all(Option::is_some)) {
            self.offer(self.leaf(node), &mut best);
        }
        if best.is_none() {
            // The beam dropped every completable branch; fall back to the
            // first feasible layout in depth-first order.
            best = self.first_feasible(&self.root(), 0, &mut nodes);
        }
        if best.is_none() && Instant::now() >= self.deadline {
            self.timed_out.store(true, AtomicOrdering::Relaxed);
        }
        Outcome { best: best.map(|b| b.containers), nodes, timed_out: self.timed_out.load(AtomicOrdering::Relaxed) }
    }

    fn first_feasible(&self, node: &Node, depth: usize, nodes: &mut u64) -> Option<Incumbent> {
        *nodes += 1;
        if self.check_time(*nodes) {
            return None;
        }
        if depth == self.order.len() {
            return Some(self.leaf(node));
        }
        for (_, child) in self.expand(node, depth) {
            if let Some(found) = self.first_feasible(&child, depth + 1, nodes) {
                return Some(found);
            }
        }
        None
    }

    /// Enumerates every feasible layout, scoring each from scratch.
    pub fn oracle(&self) -> Outcome {
        let mut best = None;
        let mut nodes = 0;
        self.enumerate(&self.root(), 0, &mut best, &mut nodes);
        Outcome { best: best.map(|b| b.containers), nodes, timed_out: self.timed_out.load(AtomicOrdering::Relaxed) }
    }

    fn enumerate(&self, node: &Node, depth: usize, best: &mut Option<Incumbent>, nodes: &mut u64) {
        *nodes += 1;
        if self.check_time(*nodes) {
            return;
        }
        if depth == self.order.len() {
            self.offer(self.leaf(node), best);
            return;
        }
        let slot = self.order[depth];
        for c in 0..self.cands[slot].len() {
            if self.fits(node, slot, c) {
                self.enumerate(&self.child(node, slot, c), depth + 1, best, nodes);
            }
        }
    }
}
