//! Command-line driver: scenario configs in, CSV/SVG out.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qualdyn::analysis::suites::{self, SuiteReport};
use qualdyn::equilibrium::{find_equilibria_with, EquilibriumOptions};
use qualdyn::gendyn::{self, GenVariant};
use qualdyn::{
    balanced_functions, detect_oscillation, find_equilibria, simulate, threshold_map,
    FairnessConstraint, Scenario, Termination,
};
use rayon::prelude::*;

use config::ScenarioConfig;
use output::{fmt, scatter_svg, trajectory_rows, write_csv, PhasePortrait};

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration (exit code 2).
    Config(String),
    /// A property suite reported violations (exit code 1).
    Violation(String),
    /// The numerics failed (exit code 3).
    Numeric(String),
}

impl From<qualdyn::Error> for CliError {
    fn from(e: qualdyn::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Violation(m) => write!(f, "property violation: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qualdyn",
    about = "Simulate threshold-decision dynamics over group qualification rates, find their \
             equilibria, and compare long-run disparity across fairness constraints.",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct CommonArgs {
    /// Scenario config file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config's `output_dir`, or `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override the config's step budget.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Emit SVG plots next to the CSV files.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a config file.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate trajectories (one CSV per constraint and initial state).
    Simulate(CommonArgs),
    /// Enumerate equilibria with uniqueness and stability diagnostics.
    Equilibrium(CommonArgs),
    /// Run the configured sweep grid (long-format CSV).
    Sweep(CommonArgs),
    /// Run a seeded property suite: thm3, thm4, thm5, prop1, prop2, prop3.
    Suite {
        /// Suite name.
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the suite's default case count.
        #[arg(long)]
        cases: Option<usize>,
        /// Output directory for the suite's CSV table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Violation(_) => ExitCode::from(1),
                CliError::Config(_) => ExitCode::from(2),
                CliError::Numeric(_) => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check { config } => cmd_check(&config),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Equilibrium(args) => cmd_equilibrium(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Suite {
            name,
            seed,
            cases,
            out,
        } => cmd_suite(&name, seed.unwrap_or(0), cases, out.as_deref()),
    }
}

struct Resolved {
    config: ScenarioConfig,
    seed: u64,
    out: PathBuf,
    tol: f64,
    max_steps: usize,
}

fn resolve(args: &CommonArgs) -> Result<Resolved, CliError> {
    let config = ScenarioConfig::load(&args.config)?;
    let out = args
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
    Ok(Resolved {
        seed: args.seed.unwrap_or(config.seed),
        tol: args.tol.unwrap_or(config.tol),
        max_steps: args.max_steps.unwrap_or(config.max_steps),
        config,
        out,
    })
}

fn cmd_check(path: &Path) -> Result<(), CliError> {
    let config = ScenarioConfig::load(path)?;
    if let Some(scenario) = &config.scenario {
        let (ca, cb) = scenario.classes();
        println!(
            "scenario: condition classes ({ca}, {cb}), shares ({}, {}), u+/u- = {}",
            scenario.group_a().share(),
            scenario.group_b().share(),
            scenario.u_plus() / scenario.u_minus()
        );
    }
    if let Some(generation) = &config.generation {
        println!(
            "generation block: condition class {}, u+/u- = {}",
            generation.transitions().classify(),
            generation.u_plus() / generation.u_minus()
        );
    }
    println!(
        "constraints: {}",
        config
            .constraints()
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    if let Some(sweep) = &config.sweep {
        let points: usize = sweep.axes.iter().map(|a| a.values.len()).product();
        println!("sweep: {} axes, {points} grid points", sweep.axes.len());
    }
    println!("ok");
    Ok(())
}

fn cmd_simulate(args: &CommonArgs) -> Result<(), CliError> {
    let r = resolve(args)?;
    if let Some(model) = &r.config.generation {
        for (i, init) in r.config.initial_states(r.seed).iter().enumerate() {
            let traj = gendyn::gen_simulate(
                model,
                gendyn::GenState::product(init.alpha_a)?,
                r.max_steps,
                r.tol,
            )?;
            let path = r.out.join(format!("gen_traj_{i}.csv"));
            let rows = traj.thetas.iter().enumerate().map(|(k, theta)| {
                let s = traj.states[k];
                vec![
                    k.to_string(),
                    fmt(s.alpha()),
                    fmt(s.zeta11),
                    fmt(s.zeta10),
                    fmt(s.zeta01),
                    fmt(s.zeta00),
                    fmt(*theta),
                ]
            });
            write_csv(
                &path,
                &["step", "alpha", "zeta11", "zeta10", "zeta01", "zeta00", "theta"],
                rows,
            )?;
            println!(
                "generation run {i}: {} steps, {:?} -> {}",
                traj.states.len() - 1,
                traj.termination,
                path.display()
            );
        }
        return Ok(());
    }
    let scenario = required_scenario(&r.config)?;
    let inits = r.config.initial_states(r.seed);
    for constraint in r.config.constraints() {
        let mut finals = Vec::new();
        let mut paths = Vec::new();
        for (i, init) in inits.iter().enumerate() {
            let traj = simulate(scenario, constraint, *init, r.max_steps, r.tol)?;
            let path = r
                .out
                .join(format!("traj_{}_{i}.csv", constraint.to_string().to_lowercase()));
            write_csv(
                &path,
                &["step", "alphaA", "alphaB", "thetaA", "thetaB", "utility"],
                trajectory_rows(&traj),
            )?;
            println!(
                "{constraint} from ({:.3}, {:.3}): {} steps, {:?}",
                init.alpha_a,
                init.alpha_b,
                traj.states.len() - 1,
                traj.termination
            );
            finals.push(traj.last_state());
            paths.push(traj.states);
        }
        if args.plot {
            let bf = balanced_functions(scenario, constraint, 129)?;
            let report = find_equilibria_with(
                scenario,
                &threshold_map(scenario, constraint)?,
                EquilibriumOptions {
                    diagnostics: false,
                    ..Default::default()
                },
            )?;
            let portrait = PhasePortrait {
                title: format!("{constraint} policy"),
                curve_a: bf.curve_a(),
                curve_b: bf.curve_b(),
                trajectories: paths,
                equilibria: report.equilibria.iter().map(|e| e.state).collect(),
            };
            let path = r
                .out
                .join(format!("phase_{}.svg", constraint.to_string().to_lowercase()));
            portrait.write(&path)?;
            println!("phase portrait -> {}", path.display());
        }
    }
    Ok(())
}

fn required_scenario(config: &ScenarioConfig) -> Result<&Scenario, CliError> {
    config
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs a `scenario` block".into()))
}

fn cmd_equilibrium(args: &CommonArgs) -> Result<(), CliError> {
    let r = resolve(args)?;
    if let Some(model) = &r.config.generation {
        let variant = detect_variant(model)?;
        let report = gendyn::gen_equilibrium(model, variant)?;
        let path = r.out.join("gen_equilibria.csv");
        let rows = report.equilibria.iter().enumerate().map(|(i, e)| {
            vec![
                i.to_string(),
                fmt(e.alpha),
                fmt(e.state.zeta11),
                fmt(e.state.zeta10),
                fmt(e.state.zeta01),
                fmt(e.state.zeta00),
                fmt(e.theta),
                fmt(e.residual),
                fmt(report.baseline_alpha),
                format!("{:?}", report.shape),
                report.precondition_holds.to_string(),
                report.ordering_holds.to_string(),
                report.feasibility_ok.to_string(),
            ]
        });
        write_csv(
            &path,
            &[
                "index",
                "alpha",
                "zeta11",
                "zeta10",
                "zeta01",
                "zeta00",
                "theta",
                "residual",
                "baseline_alpha",
                "shape",
                "precondition",
                "ordering_holds",
                "feasible",
            ],
            rows,
        )?;
        println!(
            "{} equilibria (baseline alpha {:.6}) -> {}",
            report.equilibria.len(),
            report.baseline_alpha,
            path.display()
        );
        return Ok(());
    }
    let scenario = required_scenario(&r.config)?;
    let mut rows = Vec::new();
    for constraint in r.config.constraints() {
        let report = find_equilibria(scenario, constraint)?;
        let unique = match &report.unique_by_theorem2 {
            Some(u) => u.unique.to_string(),
            None => "unknown".into(),
        };
        for (i, eq) in report.equilibria.iter().enumerate() {
            rows.push(vec![
                constraint.to_string(),
                i.to_string(),
                fmt(eq.state.alpha_a),
                fmt(eq.state.alpha_b),
                fmt(eq.residual_a),
                fmt(eq.residual_b),
                report.stable[i].to_string(),
                unique.clone(),
                report.condition_class.0.to_string(),
                report.condition_class.1.to_string(),
                fmt(report.lipschitz_estimate.unwrap_or(f64::NAN)),
            ]);
        }
        println!(
            "{constraint}: {} equilibrium point(s), uniqueness {}",
            report.equilibria.len(),
            unique
        );
    }
    let path = r.out.join("equilibria.csv");
    write_csv(
        &path,
        &[
            "constraint",
            "index",
            "alpha_a",
            "alpha_b",
            "residual_a",
            "residual_b",
            "stable",
            "unique_by_sufficient_condition",
            "condition_class_a",
            "condition_class_b",
            "lipschitz_estimate",
        ],
        rows,
    )?;
    println!("equilibria -> {}", path.display());
    Ok(())
}

fn detect_variant(model: &gendyn::GenModel) -> Result<GenVariant, CliError> {
    if model.dist(1, 1) == model.dist(1, 0) && model.dist(0, 1) != model.dist(0, 0) {
        Ok(GenVariant::UnqualifiedSide)
    } else if model.dist(0, 1) == model.dist(0, 0) && model.dist(1, 1) != model.dist(1, 0) {
        Ok(GenVariant::QualifiedSide)
    } else {
        Err(CliError::Config(
            "generation equilibrium analysis needs exactly one decision-dependent class \
             (simulation handles the general case)"
                .into(),
        ))
    }
}

fn cmd_sweep(args: &CommonArgs) -> Result<(), CliError> {
    let r = resolve(args)?;
    let points = r.config.sweep_points()?;
    if points.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    let constraints = r.config.constraints();
    let lean = EquilibriumOptions {
        diagnostics: false,
        ..Default::default()
    };

    struct PointResult {
        rows: Vec<Vec<String>>,
        scatter: Vec<(FairnessConstraint, qualdyn::QualState, bool)>,
    }

    let results: Vec<Result<PointResult, CliError>> = points
        .par_iter()
        .map(|point| {
            let mut rows = Vec::new();
            let mut scatter = Vec::new();
            for constraint in &constraints {
                let policy = threshold_map(&point.scenario, *constraint)?;
                let report = find_equilibria_with(&point.scenario, &policy, lean)?;
                // Oscillation probe: iterate from the square's center.
                let traj = simulate(
                    &point.scenario,
                    *constraint,
                    qualdyn::QualState::new(0.5, 0.5).expect("valid"),
                    r.max_steps.min(2000),
                    r.tol,
                )?;
                let (oscillating, period) = match traj.termination {
                    Termination::Oscillating(p) => (true, p),
                    Termination::Converged(_) => (false, 0),
                    Termination::MaxSteps => {
                        match detect_oscillation(&traj.states, 64, r.tol.max(1e-9) * 10.0) {
                            Some(p) => (true, p),
                            None => (false, 0),
                        }
                    }
                };
                for (i, eq) in report.equilibria.iter().enumerate() {
                    let mut row = Vec::new();
                    for axis in &point.assignment {
                        row.push(fmt(axis.value));
                        if axis.value_b != axis.value {
                            row.push(fmt(axis.value_b));
                        }
                    }
                    row.extend([
                        constraint.to_string(),
                        i.to_string(),
                        fmt(eq.state.alpha_a),
                        fmt(eq.state.alpha_b),
                        report.stable[i].to_string(),
                        oscillating.to_string(),
                        period.to_string(),
                    ]);
                    rows.push(row);
                    if i == 0 {
                        scatter.push((*constraint, eq.state, oscillating));
                    }
                }
            }
            Ok(PointResult { rows, scatter })
        })
        .collect();

    // Header mirrors the first point's assignment layout.
    let mut header: Vec<String> = Vec::new();
    for axis in &points[0].assignment {
        header.push(format!("{}_{}", axis.parameter.name(), group_tag(axis.group)));
        if axis.value_b != axis.value {
            header.push(format!("{}_b", axis.parameter.name()));
        }
    }
    header.extend(
        [
            "constraint",
            "eq_index",
            "alpha_a",
            "alpha_b",
            "stable",
            "oscillating",
            "period",
        ]
        .map(String::from),
    );
    let mut rows = Vec::new();
    let mut scatter: Vec<(FairnessConstraint, qualdyn::QualState, bool)> = Vec::new();
    for res in results {
        let res = res?;
        rows.extend(res.rows);
        scatter.extend(res.scatter);
    }
    let path = r.out.join("sweep.csv");
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&path, &header_refs, rows)?;
    println!("{} grid points -> {}", points.len(), path.display());
    if args.plot {
        for constraint in &constraints {
            let pts: Vec<(qualdyn::QualState, bool)> = scatter
                .iter()
                .filter(|(c, _, _)| c == constraint)
                .map(|(_, s, o)| (*s, *o))
                .collect();
            let path = r
                .out
                .join(format!("sweep_{}.svg", constraint.to_string().to_lowercase()));
            scatter_svg(&path, &format!("{constraint} equilibria"), &pts)?;
            println!("scatter -> {}", path.display());
        }
    }
    Ok(())
}

fn group_tag(g: config::SweepGroup) -> &'static str {
    match g {
        config::SweepGroup::A => "a",
        config::SweepGroup::B => "b",
        config::SweepGroup::Both => "ab",
    }
}

fn cmd_suite(
    name: &str,
    seed: u64,
    cases: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let report: SuiteReport = match name {
        "thm3" => suites::natural_equality_suite(seed, cases.unwrap_or(50))?,
        "thm4" => suites::disparity_ordering_suite(seed, cases.unwrap_or(200))?,
        "thm5" => suites::eqopt_mitigation_suite(seed, cases.unwrap_or(50))?,
        "prop1" => suites::policy_offset_suite(seed, cases.unwrap_or(50))?,
        "prop2" => suites::equitable_policy_suite(seed, cases.unwrap_or(50))?,
        "prop3" => suites::transition_boost_suite(seed, cases.unwrap_or(100))?,
        other => {
            return Err(CliError::Config(format!(
                "unknown suite `{other}` (expected thm3, thm4, thm5, prop1, prop2 or prop3)"
            )))
        }
    };
    for (i, case) in report.cases.iter().enumerate() {
        println!(
            "case {i:>4}: {} {}",
            if case.pass { "pass" } else { "FAIL" },
            case.note
        );
    }
    println!(
        "suite {name} (seed {seed}): {}/{} passed",
        report.passed(),
        report.cases.len()
    );
    if let (Some(out), Some(table)) = (out, &report.table) {
        std::fs::create_dir_all(out)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
        let mut header = vec!["constraint".to_string()];
        header.extend((0..table.columns.len()).map(|i| format!("s{i}")));
        let rows = (0..3).map(|row| {
            let mut out = vec![suites::DisparityTable::ROWS[row].to_string()];
            out.extend(table.columns.iter().map(|col| fmt(col[row])));
            out
        });
        let path = out.join(format!("suite_{name}.csv"));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(&path, &header_refs, rows)?;
        println!("disparity table -> {}", path.display());
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Violation(format!(
            "suite {name}: {}/{} cases passed",
            report.passed(),
            report.cases.len()
        )))
    }
}
