//! One experiment: solve, compare against the closed-form oracle when the
//! costs are linear-quadratic, and write `omega.csv`, `trajectories.csv`,
//! `supply.csv` and `report.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pricemfg_core::analytic::{
    analytic_price, analytic_price_regular_part, lq_constants, AnalyticTrajectories, LQParams,
};
use pricemfg_core::supply::write_supply_csv;
use pricemfg_core::{
    generate_supply, pdhg_solve, Error as CoreError, Potential, PriceVector, Problem, SolveReport,
    SupplySpec,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{io_err, CliError, Result};

/// Agent indices `floor((j - 1/2) M / K)` for `j = 1..=K`, `K = min(k, M)`.
pub fn sampled_agents(agents: usize, k: usize) -> Vec<usize> {
    let k = k.min(agents);
    (1..=k)
        .map(|j| ((j as f64 - 0.5) * agents as f64 / k as f64).floor() as usize)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    pub recorded: usize,
    pub every: usize,
    pub first: Option<f64>,
    pub last: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Last few `(iteration, value)` pairs.
    pub tail: Vec<(usize, f64)>,
}

impl TraceSummary {
    fn new(report: &SolveReport) -> Self {
        let t = &report.objective_trace;
        let fold = |f: fn(f64, f64) -> f64| t.iter().copied().reduce(f);
        let start = t.len().saturating_sub(10);
        Self {
            recorded: t.len(),
            every: report.config.trace_every,
            first: t.first().copied(),
            last: t.last().copied(),
            min: fold(f64::min),
            max: fold(f64::max),
            tail: report.trace_iterations[start..]
                .iter()
                .copied()
                .zip(t[start..].iter().copied())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    pub center: f64,
    pub radius: f64,
    pub count: usize,
}

/// Terminal cluster counts around the wells of whichever potential is a
/// double well (terminal first).
#[derive(Debug, Clone, Serialize)]
pub struct TerminalClusters {
    pub clusters: Vec<Cluster>,
    pub outside: usize,
    pub min: f64,
    pub max: f64,
}

pub const CLUSTER_RADIUS: f64 = 0.1;

fn terminal_clusters(cfg: &RunConfig, terminal: &[f64]) -> Option<TerminalClusters> {
    let wells = [cfg.cost.terminal, cfg.cost.running]
        .into_iter()
        .find_map(|p| match p {
            Potential::DoubleWell { y_a, y_b, .. } => Some([y_a, y_b]),
            _ => None,
        })?;
    let clusters: Vec<Cluster> = wells
        .iter()
        .map(|&center| Cluster {
            center,
            radius: CLUSTER_RADIUS,
            count: terminal
                .iter()
                .filter(|z| (*z - center).abs() <= CLUSTER_RADIUS)
                .count(),
        })
        .collect();
    let outside = terminal
        .iter()
        .filter(|z| wells.iter().all(|c| (*z - c).abs() > CLUSTER_RADIUS))
        .count();
    let (min, max) = terminal
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| {
            (a.min(z), b.max(z))
        });
    Some(TerminalClusters {
        clusters,
        outside,
        min,
        max,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub status: String,
    pub error: Option<String>,
    pub diverged_at_iteration: Option<usize>,
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub supply_seed: Option<u64>,
    pub iterations_run: Option<usize>,
    pub clearing_residual_sup: Option<f64>,
    pub linf_omega_error: Option<f64>,
    pub linf_trajectory_error: Option<f64>,
    pub linf_regular_part_error: Option<f64>,
    pub oracle: Option<String>,
    pub sampled_agents: Vec<usize>,
    pub objective_trace: Option<TraceSummary>,
    pub terminal_clusters: Option<TerminalClusters>,
    pub threads: usize,
    pub wall_time_seconds: f64,
}

/// Closed-form price and sampled trajectories.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub omega: PriceVector,
    pub regular_part: Vec<f64>,
    /// One `N + 1` trajectory per sampled agent.
    pub trajectories: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub problem: Problem,
    pub solve: SolveReport,
    pub sampled: Vec<usize>,
    pub oracle: Option<Oracle>,
    /// Why no oracle was computed, when the costs are not linear-quadratic.
    pub oracle_note: Option<String>,
}

fn sup_diff<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    a.into_iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

impl Experiment {
    pub fn linf_omega_error(&self) -> Option<f64> {
        let o = self.oracle.as_ref()?;
        Some(sup_diff(self.solve.omega.as_slice(), o.omega.as_slice()))
    }

    pub fn linf_trajectory_error(&self) -> Option<f64> {
        let o = self.oracle.as_ref()?;
        Some(
            self.sampled
                .iter()
                .zip(&o.trajectories)
                .map(|(&m, z)| sup_diff(self.solve.states.row(m), z))
                .fold(0.0, f64::max),
        )
    }

    /// `l_inf` distance between `omega + c0 Q` and the smooth part of the oracle price.
    pub fn linf_regular_part_error(&self) -> Option<f64> {
        let o = self.oracle.as_ref()?;
        let c0 = self.config.cost.c0;
        let num: Vec<f64> = self
            .solve
            .omega
            .as_slice()
            .iter()
            .zip(self.problem.supply.as_slice())
            .map(|(w, q)| w + c0 * q)
            .collect();
        Some(sup_diff(&num, &o.regular_part))
    }
}

pub fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    let initial = cfg.agents.initial_states()?;
    let supply = generate_supply(&cfg.supply, &cfg.grid)?;
    Ok(Problem::new(cfg.grid, cfg.cost, initial, supply)?)
}

fn oracle(
    cfg: &RunConfig,
    problem: &Problem,
    sampled: &[usize],
) -> std::result::Result<Oracle, CoreError> {
    let p = LQParams::from_cost(&cfg.cost)?;
    let rule = cfg.oracle_quadrature;
    let (x, q, g) = (&problem.initial, &problem.supply, &problem.grid);
    let omega = analytic_price(&p, x, q, g, rule)?;
    let regular_part = analytic_price_regular_part(&p, x, q, g, rule)?;
    let consts = lq_constants(&p, x, &omega, g, rule)?;
    let traj = AnalyticTrajectories::new(&p, &consts, &omega, g, rule)?;
    let trajectories = sampled
        .iter()
        .map(|&m| traj.trajectory(x.as_slice()[m]))
        .collect();
    Ok(Oracle {
        omega,
        regular_part,
        trajectories,
    })
}

/// Solves the configured problem without touching the filesystem.
pub fn solve(cfg: &RunConfig) -> Result<Experiment> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let sampled = sampled_agents(problem.agents(), cfg.sample_agents);
    let (oracle, oracle_note) = match oracle(cfg, &problem, &sampled) {
        Ok(o) => (Some(o), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let solve = pdhg_solve(&problem, &cfg.solver)?;
    Ok(Experiment {
        config: cfg.clone(),
        problem,
        solve,
        sampled,
        oracle,
        oracle_note,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// `t, omega_num[, omega_analytic]` on the left endpoints.
pub fn write_omega_csv(path: &Path, exp: &Experiment) -> Result<()> {
    let mut header = vec!["t".to_string(), "omega_num".to_string()];
    if exp.oracle.is_some() {
        header.push("omega_analytic".into());
    }
    let grid = &exp.problem.grid;
    let rows = (0..grid.steps()).map(|l| {
        let mut row = vec![fmt(grid.time(l)), fmt(exp.solve.omega.as_slice()[l])];
        if let Some(o) = &exp.oracle {
            row.push(fmt(o.omega.as_slice()[l]));
        }
        row
    });
    write_csv(path, &header, rows)
}

/// `t` plus `agent_<m>` (and `agent_<m>_analytic`) for every sampled agent, on all nodes.
pub fn write_trajectories_csv(path: &Path, exp: &Experiment) -> Result<()> {
    let mut header = vec!["t".to_string()];
    for &m in &exp.sampled {
        header.push(format!("agent_{m}"));
        if exp.oracle.is_some() {
            header.push(format!("agent_{m}_analytic"));
        }
    }
    let grid = &exp.problem.grid;
    let rows = (0..=grid.steps()).map(|l| {
        let mut row = vec![fmt(grid.time(l))];
        for (j, &m) in exp.sampled.iter().enumerate() {
            row.push(fmt(exp.solve.states.get(m, l)));
            if let Some(o) = &exp.oracle {
                row.push(fmt(o.trajectories[j][l]));
            }
        }
        row
    });
    write_csv(path, &header, rows)
}

fn supply_seed(cfg: &RunConfig) -> Option<u64> {
    match cfg.supply {
        SupplySpec::Wiener { seed } => Some(seed),
        _ => None,
    }
}

fn base_report(cfg: &RunConfig, started: Instant) -> Report {
    Report {
        status: String::new(),
        error: None,
        diverged_at_iteration: None,
        config: cfg.clone(),
        seed: cfg.solver.seed(),
        supply_seed: supply_seed(cfg),
        iterations_run: None,
        clearing_residual_sup: None,
        linf_omega_error: None,
        linf_trajectory_error: None,
        linf_regular_part_error: None,
        oracle: None,
        sampled_agents: Vec::new(),
        objective_trace: None,
        terminal_clusters: None,
        threads: rayon::current_num_threads(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Creates `dir`, refusing one that already holds files.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
        if entries.next().is_some() {
            return Err(CliError::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_report(dir: &Path, report: &Report) -> Result<()> {
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report).map_err(|e| CliError::Io {
        path: path.clone(),
        source: e.into(),
    })?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(path))
}

pub struct RunOutput {
    pub dir: PathBuf,
    pub report: Report,
    pub experiment: Experiment,
}

/// Solves and writes every artifact into the configured output directory.
/// A diverged solve still writes `report.json` (status `diverged`) before
/// the error is returned.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let started = Instant::now();
    cfg.validate()?;
    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.label()));
    prepare_output_dir(&dir)?;

    let exp = match solve(cfg) {
        Ok(exp) => exp,
        Err(err) => {
            let mut report = base_report(cfg, started);
            report.status = match err {
                CliError::Core(CoreError::Diverged { iteration }) => {
                    report.diverged_at_iteration = Some(iteration);
                    "diverged".into()
                }
                _ => "failed".into(),
            };
            report.error = Some(err.to_string());
            report.wall_time_seconds = started.elapsed().as_secs_f64();
            write_report(&dir, &report)?;
            return Err(err);
        }
    };

    write_omega_csv(&dir.join("omega.csv"), &exp)?;
    write_trajectories_csv(&dir.join("trajectories.csv"), &exp)?;
    write_supply_csv(&dir.join("supply.csv"), &exp.problem.supply)?;

    let mut report = base_report(cfg, started);
    report.status = "ok".into();
    report.iterations_run = Some(exp.solve.iterations_run);
    report.clearing_residual_sup = Some(exp.solve.clearing_residual_sup);
    report.linf_omega_error = exp.linf_omega_error();
    report.linf_trajectory_error = exp.linf_trajectory_error();
    report.linf_regular_part_error = exp.linf_regular_part_error();
    report.oracle = match &exp.oracle {
        Some(_) => Some(format!(
            "linear-quadratic, {:?} quadrature",
            cfg.oracle_quadrature
        )),
        None => exp.oracle_note.clone(),
    };
    report.sampled_agents = exp.sampled.clone();
    report.objective_trace = Some(TraceSummary::new(&exp.solve));
    report.terminal_clusters = terminal_clusters(cfg, &exp.solve.states.terminal());
    report.wall_time_seconds = started.elapsed().as_secs_f64();
    write_report(&dir, &report)?;
    Ok(RunOutput {
        dir,
        report,
        experiment: exp,
    })
}
