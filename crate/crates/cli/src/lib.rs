//! Config-driven experiments over the `accim` library.
//!
//! Each command is a pure function of the configuration: it returns the text
//! to print and the files to write, and the binary only does the I/O.

pub mod config;
pub mod report;

use accim::analysis::{density_bounds, lipschitz_study, shrink_study, solve};
use accim::checker::{check_hypotheses, check_transitivity, compute_constants};
use accim::maps::{build_open_system, Hole};
use accim::montecarlo::{empirical_conditional_density, ratio_fit, simulate_survival};
use accim::operator::sample_y;
use accim::tower::{build_tower_with, choose_delta};
use accim::ulam::ulam_oracle;
use accim::{Error, Result};
use serde_json::json;

pub use config::{load_config, parse_config, ExperimentConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Check,
    Solve,
    Shrink,
    Lipschitz,
    Mc,
    TowerDump,
}

/// Printed text plus `(file name, contents)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<(String, String)>,
}

/// 2 for configuration problems, 3 for degenerate dynamics, 4 for an invalid
/// hole family. Hypothesis failures reported by `check` are not errors.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidMap(_) | Error::InvalidHole(_) | Error::Io(_) | Error::Domain(_) => 2,
        Error::Degenerate(_)
        | Error::Construction(_)
        | Error::Hypothesis(_)
        | Error::TotalEscape
        | Error::Starvation { .. } => 3,
        Error::Family(_) => 4,
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("results serialize");
    s.push('\n');
    s
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Output> {
    match cmd {
        Command::Check => check(cfg),
        Command::Solve => solve_cmd(cfg),
        Command::Shrink => shrink(cfg),
        Command::Lipschitz => lipschitz(cfg),
        Command::Mc => mc(cfg),
        Command::TowerDump => tower_dump(cfg),
    }
}

fn check(cfg: &ExperimentConfig) -> Result<Output> {
    let system = build_open_system(cfg.map.clone(), cfg.hole.clone())?;
    let delta = cfg.solve.delta.map_or_else(|| choose_delta(&system), Ok)?;
    let tower = build_tower_with(&system, delta, &cfg.solve.tower)?;
    let constants = compute_constants(&tower, &system, cfg.solve.xi);
    let hypotheses = check_hypotheses(&constants, &tower, &system);
    let transitivity = check_transitivity(&system, cfg.solve.transitivity_horizon);
    let text = report::constants_text(&constants, &hypotheses, &transitivity);
    let doc = json!({
        "constants": constants,
        "hypotheses": hypotheses,
        "transitivity": transitivity,
        "hole_bound": tower.hole_bound(),
        "tail_mass": tower.tail_mass(),
    });
    Ok(Output {
        files: vec![("check.txt".into(), text.clone()), ("constants.json".into(), to_json(&doc))],
        stdout: text,
    })
}

fn solve_cmd(cfg: &ExperimentConfig) -> Result<Output> {
    let system = build_open_system(cfg.map.clone(), cfg.hole.clone())?;
    let sol = solve(&system, &cfg.solve)?;
    let bounds = density_bounds(&sol);
    let ulam = match cfg.ulam_bins {
        Some(n) => Some((n, ulam_oracle(&system, n)?.lambda)),
        None => None,
    };
    let text = report::solve_text(&sol, &bounds, ulam);
    let r = &sol.result;
    let doc = json!({
        "lambda": r.lambda,
        "escape_rate": r.escape_rate,
        "interval_lambda": r.interval_lambda,
        "iterations": r.iterations,
        "converged": r.converged,
        "fixed_point_residual": r.fixed_point_residual,
        "residual": r.residual,
        "integral": r.integral,
        "sup_psi": r.sup_psi,
        "inf_psi": r.inf_psi,
        "variation": r.variation,
        "bounds": bounds,
        "hypotheses_pass": r.hypotheses_pass,
        "constants": sol.constants,
        "ulam": ulam.map(|(bins, lambda)| json!({ "bins": bins, "lambda": lambda })),
    });
    let g = sol.fixed_point.phi.samples_per_node();
    let nodes = sol.tower.nodes();
    let tower_csv = report::tower_density_csv(&sol.tower, &sol.fixed_point.phi, |n, s| sample_y(&nodes[n].j, g, s))?;
    Ok(Output {
        files: vec![
            ("summary.txt".into(), text.clone()),
            ("summary.json".into(), to_json(&doc)),
            ("density.csv".into(), report::density_csv(&r.psi)?),
            ("tower_density.csv".into(), tower_csv),
        ],
        stdout: text,
    })
}

fn family(cfg: &ExperimentConfig) -> Result<&accim::analysis::HoleFamily> {
    cfg.family.as_ref().ok_or_else(|| Error::Config {
        line: None,
        msg: "this command needs a [family] section".into(),
    })
}

fn shrink(cfg: &ExperimentConfig) -> Result<Output> {
    let rows = shrink_study(&cfg.map, family(cfg)?, &cfg.solve)?;
    let csv = report::shrink_csv(&rows)?;
    Ok(Output {
        stdout: csv.clone(),
        files: vec![("shrink.csv".into(), csv)],
    })
}

fn lipschitz(cfg: &ExperimentConfig) -> Result<Output> {
    let holes: Vec<Hole> = family(cfg)?.members.iter().map(|(_, h)| h.clone()).collect();
    let rows = lipschitz_study(&cfg.map, &holes, &cfg.solve)?;
    let csv = report::lipschitz_csv(&rows)?;
    Ok(Output {
        stdout: csv.clone(),
        files: vec![("lipschitz.csv".into(), csv)],
    })
}

fn mc(cfg: &ExperimentConfig) -> Result<Output> {
    let m = &cfg.montecarlo;
    let system = build_open_system(cfg.map.clone(), cfg.hole.clone())?;
    let rows = simulate_survival(&system, m.particles, m.steps, m.seed, m.initial)?;
    let fit = ratio_fit(&rows, m.fit_from, m.fit_to);
    // The tower eigenvalue is a reference only; a failed solve just omits it.
    let tower_lambda = solve(&system, &cfg.solve).ok().map(|s| s.result.lambda);
    let text = report::mc_text(&rows, fit.as_ref(), tower_lambda);
    let mut files = vec![
        ("survival.csv".into(), report::survival_csv(&rows)?),
        ("mc.txt".into(), text.clone()),
    ];
    if let Some(step) = m.hist_step {
        let h = empirical_conditional_density(&system, step, m.bins, m.particles, m.seed, m.initial)?;
        files.push(("histogram.csv".into(), report::histogram_csv(&h)?));
    }
    Ok(Output { stdout: text, files })
}

fn tower_dump(cfg: &ExperimentConfig) -> Result<Output> {
    let system = build_open_system(cfg.map.clone(), cfg.hole.clone())?;
    let delta = cfg.solve.delta.map_or_else(|| choose_delta(&system), Ok)?;
    let tower = build_tower_with(&system, delta, &cfg.solve.tower)?;
    let dump = tower.dump();
    let summary = format!(
        "delta {}\nbases {}\nlevels {}\ncells {}\ntail mass {}\n",
        dump.delta,
        dump.n_bases,
        dump.levels.len(),
        dump.cells.len(),
        dump.tail_mass
    );
    Ok(Output {
        stdout: summary,
        files: vec![("tower.json".into(), to_json(&dump))],
    })
}
