//! Users, screens and their rooms, plus loading and validating scenario
//! documents.
//!
//! A scenario document is UTF-8 JSON:
//!
//! ```json
//! {
//!   "users": [
//!     { "head_pos": [0, 1.2, 0], "avatar_pos": [0.8, 1.2, 0.1], "D_u": 0.5,
//!       "screens": [ { "id": "w", "physical": true, "label": "shared",
//!                      "pos": [-0.3, 1.0, 0.6], "dims": [0.6, 0.35, 0.02] } ],
//!       "obstacles": [ { "min": [..], "max": [..] } ],
//!       "usable_volumes": [ { "min": [..], "max": [..] } ] },
//!     { ... }
//!   ],
//!   "params": { "weights": { "a": 0.2, "m": 0.2, "v": 0.5, "p": 0.1 },
//!               "voxel_size": 0.1, "mu": 0.0, "sigma": 0.5236,
//!               "solver": { "mode": "exact", "beam_width": 16, "top_k": 50, "time_limit_s": 60 } }
//! }
//! ```
//!
//! Every `params` entry is optional; omitted values take the defaults below.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angular_distance, Aabb, Rect3, Vec3};
use crate::retargeting::RetargetParams;
use crate::solver::{SolveMode, SolveParams};

pub const DEFAULT_WEIGHTS: Weights = Weights { a: 0.2, m: 0.2, v: 0.5, p: 0.1 };
pub const DEFAULT_VOXEL_SIZE: f64 = 0.1;
pub const DEFAULT_MU: f64 = 0.0;
pub const DEFAULT_SIGMA: f64 = std::f64::consts::FRAC_PI_6;
pub const DEFAULT_MIN_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScreenId(pub String);

impl fmt::Display for ScreenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ScreenId {
    fn from(s: &str) -> Self {
        ScreenId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScreenLabel {
    /// Hidden from the collaborator and left where it is.
    Private,
    /// Must appear in both merged views.
    Shared,
    /// Unused locally; a physical one can host a remote shared screen.
    Available,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvatarSide {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub a: f64,
    pub m: f64,
    pub v: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Screen {
    pub id: ScreenId,
    pub owner: usize,
    pub physical: bool,
    pub label: ScreenLabel,
    /// Bottom-left corner.
    pub pos: Vec3,
    /// Width, height, thickness.
    pub dims: Vec3,
}

impl Screen {
    pub fn width(&self) -> f64 {
        self.dims.x
    }

    pub fn height(&self) -> f64 {
        self.dims.y
    }

    pub fn center(&self) -> Vec3 {
        center_from_corner(self.pos, self.dims)
    }

    /// Zero-thickness rectangle used for occlusion and overlap tests.
    pub fn rect(&self) -> Rect3 {
        Rect3::facing_user(self.pos, self.width(), self.height())
    }

    /// Forward depth of the screen center relative to `head`.
    pub fn depth(&self, head: Vec3) -> f64 {
        self.center().z - head.z
    }
}

pub fn center_from_corner(corner: Vec3, dims: Vec3) -> Vec3 {
    corner + Vec3::new(dims.x * 0.5, dims.y * 0.5, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserEnv {
    pub user: usize,
    /// Seated head position.
    pub head_pos: Vec3,
    /// Where this user placed the collaborator's avatar.
    pub avatar_pos: Vec3,
    pub avatar_side: AvatarSide,
    /// Minimum distance between placed screens and the user or the avatar.
    pub min_distance: f64,
    pub screens: Vec<Screen>,
    pub obstacles: Vec<Aabb>,
    pub usable_volumes: Vec<Aabb>,
    pub workspace_center: Vec3,
    /// Mean forward depth of the user's screens before merging.
    pub z_avg: f64,
}

impl UserEnv {
    /// Direction from the head toward the workspace center.
    pub fn center_direction(&self) -> Vec3 {
        self.workspace_center - self.head_pos
    }

    pub fn screen(&self, id: &ScreenId) -> Option<&Screen> {
        self.screens.iter().find(|s| &s.id == id)
    }
}

/// Mean of the screen centers.
pub fn workspace_center(screens: &[Screen]) -> Result<Vec3> {
    if screens.is_empty() {
        return Err(Error::Domain("workspace center of a user without screens".into()));
    }
    let sum = screens.iter().fold(Vec3::ZERO, |acc, s| acc + s.center());
    Ok(sum / screens.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub weights: Weights,
    pub voxel_size: f64,
    pub mu: f64,
    pub sigma: f64,
    pub solver: SolveParams,
    pub retarget: RetargetParams,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            weights: DEFAULT_WEIGHTS,
            voxel_size: DEFAULT_VOXEL_SIZE,
            mu: DEFAULT_MU,
            sigma: DEFAULT_SIGMA,
            solver: SolveParams::default(),
            retarget: RetargetParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: [UserEnv; 2],
    pub params: Params,
}

impl Scenario {
    pub fn user(&self, u: usize) -> &UserEnv {
        &self.users[u]
    }

    pub fn screen(&self, id: &ScreenId) -> Option<&Screen> {
        self.users.iter().find_map(|u| u.screen(id))
    }

    pub fn all_screens(&self) -> impl Iterator<Item = &Screen> {
        self.users.iter().flat_map(|u| u.screens.iter())
    }

    /// Fully resolved document; loading it again yields an identical scenario.
    pub fn to_document(&self) -> ScenarioDoc {
        ScenarioDoc {
            users: self.users.iter().map(user_doc).collect(),
            params: Some(ParamsDoc::resolved(&self.params)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("scenario serializes")
    }
}

fn user_doc(env: &UserEnv) -> UserDoc {
    UserDoc {
        head_pos: env.head_pos,
        avatar_pos: env.avatar_pos,
        min_distance: Some(env.min_distance),
        screens: env
            .screens
            .iter()
            .map(|s| ScreenDoc {
                id: s.id.0.clone(),
                physical: s.physical,
                label: s.label,
                pos: s.pos,
                dims: s.dims,
            })
            .collect(),
        obstacles: env.obstacles.clone(),
        usable_volumes: env.usable_volumes.clone(),
    }
}

// ---------------------------------------------------------------------------
// Document schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub users: Vec<UserDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserDoc {
    pub head_pos: Vec3,
    pub avatar_pos: Vec3,
    #[serde(rename = "D_u", default, skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<f64>,
    pub screens: Vec<ScreenDoc>,
    #[serde(default)]
    pub obstacles: Vec<Aabb>,
    pub usable_volumes: Vec<Aabb>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenDoc {
    pub id: String,
    pub physical: bool,
    pub label: ScreenLabel,
    pub pos: Vec3,
    pub dims: Vec3,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    pub a: Option<f64>,
    pub m: Option<f64>,
    pub v: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDoc {
    pub mode: Option<SolveMode>,
    pub beam_width: Option<usize>,
    pub top_k: Option<usize>,
    pub time_limit_s: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetargetDoc {
    pub p_t_hand: Option<f64>,
    pub p_t_head: Option<f64>,
    pub s_t: Option<f64>,
    pub b_scale: Option<f64>,
    #[serde(rename = "D_r")]
    pub hand_distance: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    #[serde(default)]
    pub weights: Option<WeightsDoc>,
    pub voxel_size: Option<f64>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    #[serde(default)]
    pub solver: Option<SolverDoc>,
    #[serde(default)]
    pub retarget: Option<RetargetDoc>,
}

impl ParamsDoc {
    pub fn resolved(p: &Params) -> Self {
        ParamsDoc {
            weights: Some(WeightsDoc {
                a: Some(p.weights.a),
                m: Some(p.weights.m),
                v: Some(p.weights.v),
                p: Some(p.weights.p),
            }),
            voxel_size: Some(p.voxel_size),
            mu: Some(p.mu),
            sigma: Some(p.sigma),
            solver: Some(SolverDoc {
                mode: Some(p.solver.mode),
                beam_width: Some(p.solver.beam_width),
                top_k: Some(p.solver.top_k),
                time_limit_s: Some(p.solver.time_limit_s),
                tolerance: Some(p.solver.tolerance),
            }),
            retarget: Some(RetargetDoc {
                p_t_hand: Some(p.retarget.p_t_hand),
                p_t_head: Some(p.retarget.p_t_head),
                s_t: Some(p.retarget.s_t),
                b_scale: Some(p.retarget.b_scale),
                hand_distance: Some(p.retarget.hand_distance),
            }),
        }
    }

    /// Applies defaults and checks parameter invariants.
    pub fn resolve(&self) -> Result<Params> {
        let d = Params::default();
        let w = self.weights.clone().unwrap_or_default();
        let s = self.solver.clone().unwrap_or_default();
        let r = self.retarget.clone().unwrap_or_default();
        let params = Params {
            weights: Weights {
                a: w.a.unwrap_or(d.weights.a),
                m: w.m.unwrap_or(d.weights.m),
                v: w.v.unwrap_or(d.weights.v),
                p: w.p.unwrap_or(d.weights.p),
            },
            voxel_size: self.voxel_size.unwrap_or(d.voxel_size),
            mu: self.mu.unwrap_or(d.mu),
            sigma: self.sigma.unwrap_or(d.sigma),
            solver: SolveParams {
                mode: s.mode.unwrap_or(d.solver.mode),
                beam_width: s.beam_width.unwrap_or(d.solver.beam_width),
                top_k: s.top_k.unwrap_or(d.solver.top_k),
                time_limit_s: s.time_limit_s.unwrap_or(d.solver.time_limit_s),
                tolerance: s.tolerance.unwrap_or(d.solver.tolerance),
            },
            retarget: RetargetParams {
                p_t_hand: r.p_t_hand.unwrap_or(d.retarget.p_t_hand),
                p_t_head: r.p_t_head.unwrap_or(d.retarget.p_t_head),
                s_t: r.s_t.unwrap_or(d.retarget.s_t),
                b_scale: r.b_scale.unwrap_or(d.retarget.b_scale),
                hand_distance: r.hand_distance.unwrap_or(d.retarget.hand_distance),
            },
        };
        validate_params(&params)?;
        Ok(params)
    }
}

fn validate_params(p: &Params) -> Result<()> {
    for (name, value) in [("a", p.weights.a), ("m", p.weights.m), ("v", p.weights.v), ("p", p.weights.p)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::schema(format!("params.weights.{name}"), "weight must be finite and >= 0"));
        }
    }
    if !(p.voxel_size.is_finite() && p.voxel_size > 0.0) {
        return Err(Error::schema("params.voxel_size", "voxel size must be > 0"));
    }
    if !p.mu.is_finite() {
        return Err(Error::schema("params.mu", "mu must be finite"));
    }
    if !(p.sigma.is_finite() && p.sigma > 0.0) {
        return Err(Error::schema("params.sigma", "sigma must be > 0"));
    }
    if p.solver.beam_width == 0 {
        return Err(Error::schema("params.solver.beam_width", "beam width must be >= 1"));
    }
    if !(p.solver.time_limit_s.is_finite() && p.solver.time_limit_s > 0.0) {
        return Err(Error::schema("params.solver.time_limit_s", "time limit must be > 0"));
    }
    if !(p.solver.tolerance.is_finite() && p.solver.tolerance >= 0.0) {
        return Err(Error::schema("params.solver.tolerance", "tolerance must be >= 0"));
    }
    p.retarget.validate()
}

/// Parses and validates a scenario document.
pub fn load_scenario(source: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(source);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(if path.is_empty() { "$".to_owned() } else { path }, e.into_inner().to_string())
    })?;
    scenario_from_document(&doc)
}

pub fn scenario_from_document(doc: &ScenarioDoc) -> Result<Scenario> {
    if doc.users.len() != 2 {
        return Err(Error::schema("users", format!("expected exactly 2 users, found {}", doc.users.len())));
    }
    let params = doc.params.clone().unwrap_or_default().resolve()?;

    let mut seen = BTreeSet::new();
    for (u, user) in doc.users.iter().enumerate() {
        for (i, s) in user.screens.iter().enumerate() {
            if !seen.insert(s.id.clone()) {
                return Err(Error::schema(
                    format!("users[{u}].screens[{i}].id"),
                    format!("duplicate screen id {:?}", s.id),
                ));
            }
        }
    }

    let a = build_user(0, &doc.users[0])?;
    let b = build_user(1, &doc.users[1])?;
    Ok(Scenario { users: [a, b], params })
}

fn check_vec(path: &str, v: Vec3) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::schema(path, "coordinates must be finite"))
    }
}

fn build_user(u: usize, doc: &UserDoc) -> Result<UserEnv> {
    let base = format!("users[{u}]");
    check_vec(&format!("{base}.head_pos"), doc.head_pos)?;
    check_vec(&format!("{base}.avatar_pos"), doc.avatar_pos)?;
    let head = doc.head_pos;

    let min_distance = doc.min_distance.unwrap_or(DEFAULT_MIN_DISTANCE);
    if !(min_distance.is_finite() && min_distance > 0.0) {
        return Err(Error::schema(format!("{base}.D_u"), "D_u must be > 0"));
    }

    let lateral = doc.avatar_pos.x - head.x;
    let avatar_side = if lateral > 0.0 {
        AvatarSide::Right
    } else if lateral < 0.0 {
        AvatarSide::Left
    } else {
        return Err(Error::schema(
            format!("{base}.avatar_pos"),
            "avatar must sit to the left or right of the user, not directly in line",
        ));
    };

    let mut screens = Vec::with_capacity(doc.screens.len());
    for (i, s) in doc.screens.iter().enumerate() {
        let path = format!("{base}.screens[{i}]");
        if s.id.is_empty() {
            return Err(Error::schema(format!("{path}.id"), "screen id must not be empty"));
        }
        check_vec(&format!("{path}.pos"), s.pos)?;
        check_vec(&format!("{path}.dims"), s.dims)?;
        if !(s.dims.x > 0.0 && s.dims.y > 0.0 && s.dims.z >= 0.0) {
            return Err(Error::schema(
                format!("{path}.dims"),
                "width and height must be > 0 and thickness >= 0",
            ));
        }
        let screen = Screen {
            id: ScreenId(s.id.clone()),
            owner: u,
            physical: s.physical,
            label: s.label,
            pos: s.pos,
            dims: s.dims,
        };
        if screen.depth(head) < 0.0 {
            return Err(Error::schema(format!("{path}.pos"), "screen lies behind the user"));
        }
        if (screen.center() - head).normalized().is_none() {
            return Err(Error::schema(format!("{path}.pos"), "screen center coincides with the head"));
        }
        screens.push(screen);
    }
    if screens.is_empty() {
        return Err(Error::schema(format!("{base}.screens"), "each user needs at least one screen"));
    }

    for (i, b) in doc.obstacles.iter().enumerate() {
        if !b.is_valid() {
            return Err(Error::schema(format!("{base}.obstacles[{i}]"), "min must be <= max and finite"));
        }
    }
    if doc.usable_volumes.is_empty() {
        return Err(Error::schema(format!("{base}.usable_volumes"), "at least one usable volume is required"));
    }
    for (i, b) in doc.usable_volumes.iter().enumerate() {
        let path = format!("{base}.usable_volumes[{i}]");
        if !b.is_valid() {
            return Err(Error::schema(path, "min must be <= max and finite"));
        }
        let size = b.size();
        if !(size.x > 0.0 && size.y > 0.0 && size.z > 0.0) {
            return Err(Error::schema(path, "usable volume must have positive extent"));
        }
        if b.min.z <= head.z {
            return Err(Error::schema(path, "usable volume must lie entirely in front of the user"));
        }
    }

    let workspace_center = workspace_center(&screens)?;
    if angular_distance(workspace_center - head, Vec3::Z).is_err() {
        return Err(Error::schema(format!("{base}.screens"), "workspace center coincides with the head"));
    }
    let z_avg = screens.iter().map(|s| s.depth(head)).sum::<f64>() / screens.len() as f64;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(z_avg > 0.0) {
        return Err(Error::schema(format!("{base}.screens"), "average screen depth must be > 0"));
    }

    Ok(UserEnv {
        user: u,
        head_pos: head,
        avatar_pos: doc.avatar_pos,
        avatar_side,
        min_distance,
        screens,
        obstacles: doc.obstacles.clone(),
        usable_volumes: doc.usable_volumes.clone(),
        workspace_center,
        z_avg,
    })
}
