//! `deskmerge` command line: merge, retarget, validate and gen.
//!
//! Exit codes: 0 success, 1 I/O or validation failure, 2 infeasible,
//! 3 timed out.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::gen::{study_scenario, Combination};
use crate::mapping::{build_merged, MergedWorkspace};
use crate::presolver::PreSolveResult;
use crate::retargeting::{read_stream, run_stream, write_outputs, RetargetParams};
use crate::solver::{check_constraints, prepare, solve_problem, SolveMode, SolveStatus};
use crate::objectives::{Assignment, MergeProblem, ObjectiveBreakdown};
use crate::voxelizer::RemovalStats;
use crate::workspace::{load_scenario, scenario_from_document, ParamsDoc, ScreenId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_TIMED_OUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "deskmerge", version, about = "Merge two users' desk workspaces into a shared layout")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the layout and write the merged workspace document.
    Merge {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's solver mode.
        #[arg(long)]
        mode: Option<SolveMode>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the number of logical cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Replay a pose stream as the avatar the other user sees.
    Retarget {
        /// Merge output document (or a bare merged workspace).
        #[arg(long)]
        merged: PathBuf,
        /// One pose sample per line.
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// User whose poses the stream holds.
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
        source: u8,
    },
    /// Report voxel removal counts, anchor capacity and the pre-solve preview.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write a seeded study scenario (1-2, 2-2, 2-3 or 3-3).
    Gen {
        combination: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize)]
struct PresolveReport<'a> {
    values: &'a std::collections::BTreeMap<ScreenId, f64>,
    fixed_pairs: &'a [crate::presolver::FixedPair],
    residual_screens: &'a [ScreenId],
    placements: &'a [Vec<ScreenId>; 2],
}

impl<'a> From<&'a PreSolveResult> for PresolveReport<'a> {
    fn from(p: &'a PreSolveResult) -> Self {
        Self { values: &p.values, fixed_pairs: &p.fixed_pairs, residual_screens: &p.residual_screens, placements: &p.placements }
    }
}

#[derive(Debug, Serialize)]
struct MergeDocument<'a> {
    params: ParamsDoc,
    status: SolveStatus,
    nodes_explored: u64,
    breakdown: Option<ObjectiveBreakdown>,
    voxels: [RemovalStats; 2],
    presolve: PresolveReport<'a>,
    assignment: Option<&'a Assignment>,
    merged: Option<MergedWorkspace>,
}

/// The parts of a merge document that `retarget` reads back.
#[derive(Debug, Deserialize)]
struct MergeInput {
    params: Option<ParamsDoc>,
    merged: Option<MergedWorkspace>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("DESKMERGE_LOG", "warn"))
        .format_timestamp(None)
        .try_init();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Merge { scenario, mode, out, threads } => with_threads(threads, || cmd_merge(&scenario, mode, &out)),
        Command::Retarget { merged, stream, out, source } => cmd_retarget(&merged, &stream, &out, source as usize),
        Command::Validate { scenario, threads } => with_threads(threads, || cmd_validate(&scenario)),
        Command::Gen { combination, seed, out } => cmd_gen(&combination, seed, out.as_deref()),
    }
}

fn with_threads(threads: Option<usize>, f: impl FnOnce() -> Result<i32> + Send) -> Result<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .context("building thread pool")?;
    pool.install(f)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_merge(path: &Path, mode: Option<SolveMode>, out: &Path) -> Result<i32> {
    let mut scn = load_scenario(&read(path)?).with_context(|| format!("loading {}", path.display()))?;
    if let Some(m) = mode {
        scn.params.solver.mode = m;
    }
    let prep = prepare(&scn)?;
    let problem = MergeProblem::new(&scn, &prep.presolve, &prep.grids)?;
    let report = solve_problem(&problem, &scn.params.solver)?;
    log::info!(
        "{:?} after {} nodes in {:.3} s",
        report.status,
        report.nodes_explored,
        report.wall_time
    );

    let merged = match &report.assignment {
        Some(asg) => {
            let violations = check_constraints(&problem, asg);
            anyhow::ensure!(violations.is_empty(), "solver output violates constraints: {violations:?}");
            Some(build_merged(&scn, &prep.presolve, &prep.grids, asg)?)
        }
        None => None,
    };
    let doc = MergeDocument {
        params: ParamsDoc::resolved(&scn.params),
        status: report.status,
        nodes_explored: report.nodes_explored,
        breakdown: report.breakdown,
        voxels: [prep.grids[0].stats, prep.grids[1].stats],
        presolve: (&prep.presolve).into(),
        assignment: report.assignment.as_ref(),
        merged,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write(out, &text)?;

    Ok(match report.status {
        SolveStatus::Optimal | SolveStatus::Feasible => EXIT_OK,
        SolveStatus::Infeasible => {
            eprintln!("infeasible: not every screen fits in the available space");
            EXIT_INFEASIBLE
        }
        SolveStatus::TimedOut => {
            eprintln!("time limit reached; wrote the best layout found");
            EXIT_TIMED_OUT
        }
    })
}

fn cmd_retarget(merged_path: &Path, stream_path: &Path, out: &Path, source: usize) -> Result<i32> {
    let text = read(merged_path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", merged_path.display()))?;
    let (merged, params) = if value.get("merged").is_some() {
        let input: MergeInput = serde_json::from_value(value).context("reading merge document")?;
        let merged = input.merged.context("merge document has no merged workspace (the merge was infeasible)")?;
        let params = match input.params {
            Some(p) => p.resolve()?.retarget,
            None => RetargetParams::default(),
        };
        (merged, params)
    } else {
        let merged: MergedWorkspace = serde_json::from_value(value).context("reading merged workspace")?;
        (merged, RetargetParams::default())
    };
    let stream = read_stream(&read(stream_path)?).with_context(|| format!("reading {}", stream_path.display()))?;
    let outputs = run_stream(&stream, &merged, source, &params)?;
    write(out, &write_outputs(&outputs))?;
    Ok(EXIT_OK)
}

fn cmd_validate(path: &Path) -> Result<i32> {
    let scn = load_scenario(&read(path)?).with_context(|| format!("loading {}", path.display()))?;
    let prep = prepare(&scn)?;
    let pre = &prep.presolve;
    let mut solvable = true;
    for (u, grid) in prep.grids.iter().enumerate() {
        let s = grid.stats;
        println!(
            "user {u}: {} cells generated, removed {} by obstacles, {} by fixed screens, {} by proximity; {} usable",
            s.generated, s.obstacle, s.fixed_screen, s.proximity, s.surviving
        );
        for id in &pre.placements[u] {
            let screen = scn.screen(id).expect("placed screens exist");
            let n = grid.feasible_anchors(screen.width(), screen.height()).len();
            println!("  {id}: {n} feasible anchors");
            if n == 0 {
                solvable = false;
            }
        }
    }
    for p in &pre.fixed_pairs {
        println!("pre-solve: {} shown on {} for user {}", p.shared, p.host, p.host_user);
    }
    println!("residual screens: {}", pre.residual_screens.len());
    let shared = scn.all_screens().filter(|s| s.label == crate::workspace::ScreenLabel::Shared).count();
    if shared == 0 {
        eprintln!("warning: empty shared pool; no screen is shared between the users");
    }
    if solvable {
        Ok(EXIT_OK)
    } else {
        eprintln!("some screens have no feasible anchor");
        Ok(EXIT_INFEASIBLE)
    }
}

fn cmd_gen(combination: &str, seed: u64, out: Option<&Path>) -> Result<i32> {
    let combo: Combination = combination.parse()?;
    let scn = scenario_from_document(&study_scenario(combo, seed))?;
    let mut text = scn.to_json();
    text.push('\n');
    match out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}
