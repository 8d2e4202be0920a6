//! Replays one user's tracked poses as the avatar the other user sees.
//!
//! Poses stream straight through until the source points at a shared screen
//! or at the viewer's avatar for long enough. The avatar then turns toward
//! the viewer's copy of that screen (Targeting), follows the pointed-at spot
//! on it (Adjusting) and eases back to the streamed pose once the source
//! lets go (Returning).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_intersects_rect, ray_intersects_sphere, Ray, Vec3};
use crate::mapping::MergedWorkspace;
use crate::workspace::ScreenId;

/// Interaction radius around an avatar's head.
pub const AVATAR_RADIUS: f64 = 0.3;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetargetParams {
    pub p_t_hand: f64,
    pub p_t_head: f64,
    pub s_t: f64,
    pub b_scale: f64,
    /// Hand distance from the head along the pointing ray while adjusting.
    pub hand_distance: f64,
}

impl Default for RetargetParams {
    fn default() -> Self {
        Self { p_t_hand: 0.1, p_t_head: 0.3, s_t: 0.5, b_scale: 1.3, hand_distance: 0.42 }
    }
}

impl RetargetParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_t_hand", self.p_t_hand),
            ("p_t_head", self.p_t_head),
            ("s_t", self.s_t),
            ("b_scale", self.b_scale),
            ("D_r", self.hand_distance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::schema(format!("params.retarget.{name}"), "must be finite and > 0"));
            }
        }
        if self.b_scale < 1.0 {
            return Err(Error::schema("params.retarget.b_scale", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSample {
    pub t: f64,
    pub head_pos: Vec3,
    pub head_dir: Vec3,
    pub hand_pos: Vec3,
    pub hand_tracked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Streaming,
    Targeting,
    Adjusting,
    Returning,
}

/// Whether `from → to` is an allowed state change (self-loops included).
pub fn is_legal_transition(from: Mode, to: Mode) -> bool {
    use Mode::*;
    from == to
        || matches!(
            (from, to),
            (Streaming, Targeting)
                | (Targeting, Adjusting)
                | (Adjusting, Targeting)
                | (Adjusting, Returning)
                | (Returning, Streaming)
                | (Returning, Targeting)
        )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Link(ScreenId),
    Avatar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Hand,
    Head,
}

/// Avatar pose targets in the viewer's frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub head_target: Vec3,
    pub hand_target: Vec3,
    pub hand_pos: Vec3,
}

impl Pose {
    fn lerp(self, other: Pose, alpha: f64) -> Pose {
        Pose {
            head_target: self.head_target.lerp(other.head_target, alpha),
            hand_target: self.hand_target.lerp(other.hand_target, alpha),
            hand_pos: self.hand_pos.lerp(other.hand_pos, alpha),
        }
    }
}

/// Candidate a pointing ray has rested on, and for how long.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dwell {
    pub candidate: Option<Target>,
    pub clock: f64,
}

impl Dwell {
    fn update(&mut self, hit: Option<Target>, dt: f64) {
        if hit.is_some() && hit == self.candidate {
            self.clock += dt;
        } else {
            self.candidate = hit;
            self.clock = 0.0;
        }
    }

    fn complete(&self, threshold: f64) -> Option<&Target> {
        self.candidate.as_ref().filter(|_| self.clock >= threshold - TIME_EPS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetargetState {
    pub mode: Mode,
    pub target: Option<Target>,
    /// Modality that acquired the current target; retention uses its ray.
    pub modality: Option<Modality>,
    pub hand_dwell: Dwell,
    pub head_dwell: Dwell,
    pub interp_clock: f64,
    pub interp_from: Option<Pose>,
    /// Last normalized point hit on the target's source rectangle.
    pub uv: (f64, f64),
    pub last_pose: Option<Pose>,
}

impl Default for RetargetState {
    fn default() -> Self {
        Self {
            mode: Mode::Streaming,
            target: None,
            modality: None,
            hand_dwell: Dwell::default(),
            head_dwell: Dwell::default(),
            interp_clock: 0.0,
            interp_from: None,
            uv: (0.5, 0.5),
            last_pose: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarOutput {
    pub t: f64,
    pub state: Mode,
    pub head_pos: Vec3,
    pub head_target: Vec3,
    pub hand_pos: Vec3,
    pub hand_target: Vec3,
    pub target: Option<Target>,
    pub highlighted_link: Option<ScreenId>,
}

/// The source user's seat mapped onto the avatar seat in the viewer's room.
struct Frame<'m> {
    merged: &'m MergedWorkspace,
    source: usize,
    viewer: usize,
}

impl Frame<'_> {
    fn point(&self, p: Vec3) -> Vec3 {
        let mut d = p - self.merged.seats[self.source].head_pos;
        if self.merged.mirror_streaming {
            d.x = -d.x;
        }
        self.merged.seats[self.viewer].avatar_pos + d
    }

    fn rays(&self, sample: &PoseSample) -> (Option<Ray>, Option<Ray>) {
        let hand = if sample.hand_tracked { Ray::through(sample.head_pos, sample.hand_pos).ok() } else { None };
        (hand, Ray::new(sample.head_pos, sample.head_dir).ok())
    }

    /// Distance along `ray` to `target`, using bounds enlarged by `scale`.
    fn hit(&self, ray: &Ray, target: &Target, scale: f64) -> Option<f64> {
        match target {
            Target::Link(id) => {
                let link = self.merged.link(id)?;
                ray_intersects_rect(ray, &link.rect(self.source).scaled(scale))
            }
            Target::Avatar => {
                ray_intersects_sphere(ray, self.merged.seats[self.source].avatar_pos, AVATAR_RADIUS * scale)
            }
        }
    }

    /// Nearest candidate along `ray`; the current target wins anywhere inside
    /// its enlarged bounds.
    fn nearest(&self, ray: &Ray, current: Option<&Target>, scale: f64) -> Option<Target> {
        if let Some(cur) = current {
            if self.hit(ray, cur, scale).is_some() {
                return Some(cur.clone());
            }
        }
        let mut best: Option<(f64, Target)> = None;
        let candidates = self
            .merged
            .links
            .iter()
            .map(|l| Target::Link(l.id.clone()))
            .chain(std::iter::once(Target::Avatar));
        for cand in candidates {
            if let Some(t) = self.hit(ray, &cand, 1.0) {
                if best.as_ref().is_none_or(|(bt, _)| t < *bt) {
                    best = Some((t, cand));
                }
            }
        }
        best.map(|(_, c)| c)
    }

    fn streamed(&self, s: &PoseSample) -> Pose {
        let dir = s.head_dir.normalized().unwrap_or(Vec3::Z);
        let hand = self.point(s.hand_pos);
        Pose { head_target: self.point(s.head_pos + dir), hand_target: hand, hand_pos: hand }
    }

    /// Pose pointing at `target` in the viewer's room.
    fn goal(&self, target: &Target, uv: (f64, f64), head: Vec3, params: &RetargetParams) -> Result<Pose> {
        let aim = match target {
            Target::Link(id) => {
                let link = self
                    .merged
                    .link(id)
                    .ok_or_else(|| Error::Inconsistent(format!("retarget link {id} missing from merged workspace")))?;
                link.rect(self.viewer).point_at_uv(uv.0, uv.1)
            }
            Target::Avatar => self.merged.seats[self.viewer].head_pos,
        };
        let hand_pos = match (aim - head).normalized() {
            Some(d) => head + d * params.hand_distance,
            None => head,
        };
        Ok(Pose { head_target: aim, hand_target: aim, hand_pos })
    }

    /// Normalized spot where `ray` meets the target's source copy, if the ray
    /// is inside the enlarged bounds.
    fn uv_on(&self, ray: &Ray, target: &Target, scale: f64) -> Option<(f64, f64)> {
        let Target::Link(id) = target else { return None };
        let rect = self.merged.link(id)?.rect(self.source);
        let t = ray_intersects_rect(ray, &rect.scaled(scale))?;
        let (u, v) = rect.local_uv(ray.at(t));
        Some((u.clamp(0.0, 1.0), v.clamp(0.0, 1.0)))
    }
}

/// Updates the dwell clocks for one sample and returns the target whose
/// dwell has completed, hand first.
pub fn detect_interaction(
    state: &mut RetargetState,
    sample: &PoseSample,
    merged: &MergedWorkspace,
    source: usize,
    params: &RetargetParams,
    dt: f64,
) -> Option<Target> {
    let frame = Frame { merged, source, viewer: 1 - source };
    let (hand_ray, head_ray) = frame.rays(sample);
    let current = state.target.as_ref();
    let hand_hit = hand_ray.and_then(|r| frame.nearest(&r, current, params.b_scale));
    let head_hit = head_ray.and_then(|r| frame.nearest(&r, current, params.b_scale));
    state.hand_dwell.update(hand_hit, dt);
    state.head_dwell.update(head_hit, dt);
    state
        .hand_dwell
        .complete(params.p_t_hand)
        .map(|t| (t.clone(), Modality::Hand))
        .or_else(|| state.head_dwell.complete(params.p_t_head).map(|t| (t.clone(), Modality::Head)))
        .map(|(t, m)| {
            if state.target.as_ref() != Some(&t) {
                state.modality = Some(m);
            }
            t
        })
}

/// Advances the state machine by one sample.
pub fn step(
    state: &RetargetState,
    sample: &PoseSample,
    merged: &MergedWorkspace,
    source: usize,
    params: &RetargetParams,
    dt: f64,
) -> Result<(RetargetState, AvatarOutput)> {
    let frame = Frame { merged, source, viewer: 1 - source };
    let mut next = state.clone();
    let prev_modality = state.modality;
    let acquired = detect_interaction(&mut next, sample, merged, source, params, dt);
    let (hand_ray, head_ray) = frame.rays(sample);
    let streamed = frame.streamed(sample);
    let last = state.last_pose.unwrap_or(streamed);
    let head = frame.point(sample.head_pos);

    let retain_ray = match prev_modality {
        Some(Modality::Hand) => hand_ray,
        Some(Modality::Head) => head_ray,
        None => None,
    };
    let retained = match (&state.target, retain_ray) {
        (Some(t), Some(r)) => frame.hit(&r, t, params.b_scale).is_some(),
        _ => false,
    };

    let begin_targeting = |next: &mut RetargetState, target: Target| {
        next.mode = Mode::Targeting;
        next.target = Some(target);
        next.interp_clock = 0.0;
        next.interp_from = Some(last);
        next.uv = (0.5, 0.5);
    };

    match (state.mode, acquired) {
        (Mode::Streaming, Some(t)) | (Mode::Returning, Some(t)) => begin_targeting(&mut next, t),
        (Mode::Targeting | Mode::Adjusting, Some(t)) if state.target.as_ref() != Some(&t) => {
            begin_targeting(&mut next, t)
        }
        (Mode::Streaming, None) => {}
        (Mode::Targeting, _) => {
            next.interp_clock = (state.interp_clock + dt).min(params.s_t);
            next.modality = prev_modality;
        }
        (Mode::Adjusting, _) => {
            next.modality = prev_modality;
            let pending = next.hand_dwell.candidate.is_some() || next.head_dwell.candidate.is_some();
            if !retained && !pending {
                next.mode = Mode::Returning;
                next.target = None;
                next.modality = None;
                next.interp_clock = 0.0;
                next.interp_from = Some(last);
            }
        }
        (Mode::Returning, None) => {
            next.interp_clock = (state.interp_clock + dt).min(params.s_t);
        }
    }

    // Refresh the pointed-at spot on the target's source copy.
    if let Some(target) = next.target.clone() {
        let ray = match next.modality {
            Some(Modality::Hand) => hand_ray,
            _ => head_ray,
        };
        if let Some(uv) = ray.and_then(|r| frame.uv_on(&r, &target, params.b_scale)) {
            next.uv = uv;
        }
    }

    let pose = match next.mode {
        Mode::Streaming => streamed,
        Mode::Targeting => {
            let goal = frame.goal(next.target.as_ref().expect("targeting has a target"), next.uv, head, params)?;
            if next.interp_clock >= params.s_t - TIME_EPS {
                next.mode = Mode::Adjusting;
                next.interp_from = None;
                goal
            } else {
                next.interp_from.unwrap_or(last).lerp(goal, next.interp_clock / params.s_t)
            }
        }
        Mode::Adjusting => frame.goal(next.target.as_ref().expect("adjusting has a target"), next.uv, head, params)?,
        Mode::Returning => {
            if next.interp_clock >= params.s_t - TIME_EPS {
                next.mode = Mode::Streaming;
                next.interp_from = None;
                next.interp_clock = 0.0;
                streamed
            } else {
                next.interp_from.unwrap_or(last).lerp(streamed, next.interp_clock / params.s_t)
            }
        }
    };
    next.last_pose = Some(pose);

    let highlighted_link = match (&next.mode, &next.target) {
        (Mode::Targeting | Mode::Adjusting, Some(Target::Link(id))) => Some(id.clone()),
        _ => None,
    };
    let out = AvatarOutput {
        t: sample.t,
        state: next.mode,
        head_pos: head,
        head_target: pose.head_target,
        hand_pos: pose.hand_pos,
        hand_target: pose.hand_target,
        target: next.target.clone(),
        highlighted_link,
    };
    Ok((next, out))
}

/// Folds [`step`] over a time-ordered stream starting from Streaming.
pub fn run_stream(
    stream: &[PoseSample],
    merged: &MergedWorkspace,
    source: usize,
    params: &RetargetParams,
) -> Result<Vec<AvatarOutput>> {
    if source > 1 {
        return Err(Error::Domain(format!("source user must be 0 or 1, got {source}")));
    }
    let mut state = RetargetState::default();
    let mut out = Vec::with_capacity(stream.len());
    let mut prev_t: Option<f64> = None;
    for (i, s) in stream.iter().enumerate() {
        if !s.t.is_finite() {
            return Err(Error::schema(format!("stream[{i}].t"), "time must be finite"));
        }
        let dt = match prev_t {
            Some(p) if s.t < p => return Err(Error::UnorderedStream { index: i, t: s.t, previous: p }),
            Some(p) => s.t - p,
            None => 0.0,
        };
        prev_t = Some(s.t);
        let (next, o) = step(&state, s, merged, source, params, dt)?;
        state = next;
        out.push(o);
    }
    Ok(out)
}

/// Parses one pose sample per non-empty line.
pub fn read_stream(source: &str) -> Result<Vec<PoseSample>> {
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let de = &mut serde_json::Deserializer::from_str(line);
            serde_path_to_error::deserialize(de).map_err(|e| {
                let path = e.path().to_string();
                let at = if path == "." || path.is_empty() { format!("line {}", i + 1) } else { format!("line {}: {path}", i + 1) };
                Error::schema(at, e.into_inner().to_string())
            })
        })
        .collect()
}

pub fn write_outputs(outputs: &[AvatarOutput]) -> String {
    let mut s = String::new();
    for o in outputs {
        s.push_str(&serde_json::to_string(o).expect("output serializes"));
        s.push('\n');
    }
    s
}
