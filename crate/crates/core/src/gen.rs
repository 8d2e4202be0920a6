//! Seeded scenario generators: the four study desk combinations and random
//! instances for property testing.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::workspace::{ParamsDoc, ScenarioDoc, ScreenDoc, ScreenLabel, UserDoc};

/// Physical-monitor split between the two users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combination {
    OneTwo,
    TwoTwo,
    TwoThree,
    ThreeThree,
}

impl Combination {
    pub const ALL: [Combination; 4] =
        [Combination::OneTwo, Combination::TwoTwo, Combination::TwoThree, Combination::ThreeThree];

    /// Physical monitors of user 0 and user 1.
    pub fn monitors(self) -> (usize, usize) {
        match self {
            Combination::OneTwo => (1, 2),
            Combination::TwoTwo => (2, 2),
            Combination::TwoThree => (2, 3),
            Combination::ThreeThree => (3, 3),
        }
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.monitors();
        write!(f, "{a}-{b}")
    }
}

impl FromStr for Combination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Combination::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::Domain(format!("unknown combination {s:?} (expected 1-2, 2-2, 2-3 or 3-3)")))
    }
}

const MONITOR: Vec3 = Vec3::new(0.6, 0.35, 0.02);
const MONITOR_GAP: f64 = 0.05;

fn jitter(rng: &mut ChaCha8Rng, amount: f64) -> f64 {
    rng.gen_range(-amount..=amount)
}

/// Rounds to millimetres so generated documents stay readable.
fn mm(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn mm3(v: Vec3) -> Vec3 {
    Vec3::new(mm(v.x), mm(v.y), mm(v.z))
}

/// A desk with `names.len()` monitors side by side; the first `shared`
/// monitors carry the user's shared documents, the rest are spare.
fn desk(rng: &mut ChaCha8Rng, names: &[String], shared: usize) -> UserDoc {
    let n = names.len() as f64;
    let row = n * MONITOR.x + (n - 1.0) * MONITOR_GAP;
    let screens = names
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let x = -row / 2.0 + i as f64 * (MONITOR.x + MONITOR_GAP) + jitter(rng, 0.01);
            ScreenDoc {
                id: id.clone(),
                physical: true,
                label: if i < shared { ScreenLabel::Shared } else { ScreenLabel::Available },
                pos: mm3(Vec3::new(x, 1.0 + jitter(rng, 0.02), 0.6 + jitter(rng, 0.03))),
                dims: MONITOR,
            }
        })
        .collect();
    UserDoc {
        head_pos: mm3(Vec3::new(jitter(rng, 0.02), 1.2 + jitter(rng, 0.03), 0.0)),
        avatar_pos: mm3(Vec3::new(0.9 + jitter(rng, 0.05), 1.2, 0.05)),
        min_distance: Some(0.5),
        screens,
        obstacles: vec![Aabb::new(Vec3::new(-1.4, 0.7, 0.2), Vec3::new(1.4, 0.75, 1.1))],
        usable_volumes: vec![Aabb::new(Vec3::new(-1.2, 0.8, 0.5), Vec3::new(1.2, 1.8, 1.0))],
    }
}

/// Study desk pair: user 0 shares a whiteboard, user 1 a task list and a
/// notes page; remaining monitors are spare and can host remote documents.
pub fn study_scenario(combo: Combination, seed: u64) -> ScenarioDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (na, nb) = combo.monitors();
    let mut a_names = vec!["whiteboard".to_owned()];
    a_names.extend((1..na).map(|i| format!("a-monitor-{i}")));
    let mut b_names = vec!["list".to_owned(), "notes".to_owned()];
    b_names.extend((2..nb).map(|i| format!("b-monitor-{i}")));
    let a = desk(&mut rng, &a_names, 1);
    let b = desk(&mut rng, &b_names, 2);
    ScenarioDoc { users: vec![a, b], params: Some(ParamsDoc::default()) }
}

/// Bounds for [`random_scenario`].
#[derive(Debug, Clone, Copy)]
pub struct RandomOptions {
    /// Largest grid, in cells of `voxel_size`.
    pub max_cells: [usize; 3],
    pub voxel_size: f64,
    /// Virtual screens per user, at most.
    pub max_virtual: usize,
    pub max_obstacles: usize,
}

impl Default for RandomOptions {
    fn default() -> Self {
        Self { max_cells: [30, 15, 3], voxel_size: 0.1, max_virtual: 2, max_obstacles: 2 }
    }
}

fn random_user(rng: &mut ChaCha8Rng, u: usize, opts: &RandomOptions) -> UserDoc {
    let d = opts.voxel_size;
    let cells = [
        rng.gen_range(4..=opts.max_cells[0]),
        rng.gen_range(3..=opts.max_cells[1]),
        rng.gen_range(1..=opts.max_cells[2]),
    ];
    let size = Vec3::new(cells[0] as f64 * d, cells[1] as f64 * d, cells[2] as f64 * d);
    let head = Vec3::new(0.0, 1.2, 0.0);
    let min = Vec3::new(-size.x / 2.0, 1.2 - size.y / 2.0, rng.gen_range(5..=8) as f64 * d);
    let volume = Aabb::new(min, min + size);

    let mut screens = Vec::new();
    let n_virtual = rng.gen_range(0..=opts.max_virtual);
    for i in 0..n_virtual {
        let w = rng.gen_range(1..=4) as f64 * d * 0.95;
        let h = rng.gen_range(1..=3) as f64 * d * 0.95;
        let label = if rng.gen_bool(0.7) { ScreenLabel::Shared } else { ScreenLabel::Available };
        let x = rng.gen_range(volume.min.x..volume.max.x - w);
        let y = rng.gen_range(volume.min.y..volume.max.y - h);
        screens.push(ScreenDoc {
            id: format!("u{u}-v{i}"),
            physical: false,
            label,
            pos: mm3(Vec3::new(x, y, volume.min.z)),
            dims: Vec3::new(mm(w), mm(h), 0.0),
        });
    }
    // A physical screen just in front of the volume, low and to one side.
    let side = if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
    screens.push(ScreenDoc {
        id: format!("u{u}-p"),
        physical: true,
        label: if rng.gen_bool(0.5) { ScreenLabel::Shared } else { ScreenLabel::Private },
        pos: mm3(Vec3::new(side * (size.x / 2.0 - 0.2) - 0.1, volume.min.y - 0.3, volume.min.z - 0.05)),
        dims: Vec3::new(0.2, 0.15, 0.0),
    });

    let obstacles = (0..rng.gen_range(0..=opts.max_obstacles))
        .map(|_| {
            let c = Vec3::new(
                rng.gen_range(volume.min.x..volume.max.x),
                rng.gen_range(volume.min.y..volume.max.y),
                rng.gen_range(volume.min.z..volume.max.z),
            );
            let half = Vec3::new(rng.gen_range(0.02..0.15), rng.gen_range(0.02..0.15), rng.gen_range(0.02..0.1));
            Aabb::new(mm3(c - half), mm3(c + half))
        })
        .collect();

    UserDoc {
        head_pos: head,
        avatar_pos: Vec3::new(if rng.gen_bool(0.5) { 1.5 } else { -1.5 }, 1.2, 0.0),
        min_distance: Some(rng.gen_range(0.3..0.6)),
        screens,
        obstacles,
        usable_volumes: vec![volume],
    }
}

/// Random two-user scenario within `opts`.
pub fn random_scenario(seed: u64, opts: &RandomOptions) -> ScenarioDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_user(&mut rng, 0, opts);
    let b = random_user(&mut rng, 1, opts);
    let params = ParamsDoc { voxel_size: Some(opts.voxel_size), ..ParamsDoc::default() };
    ScenarioDoc { users: vec![a, b], params: Some(params) }
}
