use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fieldline_ap::analysis::{run_study, write_csv, CondPolicy, StudyConfig};
use fieldline_ap::assembly::assemble_system;
use fieldline_ap::config::RunConfig;
use fieldline_ap::error::Error;
use fieldline_ap::grid::classify_nodes;
use fieldline_ap::quadrature::{QuadKind, QuadratureSet};
use fieldline_ap::solver::{solve, CondMode};
use fieldline_ap::tracer::{trace_method_one, trace_method_two, TraceMethod, TracerParams};
use fieldline_ap::{Grid, Point};

/// Anisotropic diffusion solver with field-line integral constraints on
/// closed field lines.
#[derive(Parser)]
#[command(name = "fieldline-ap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file with key=value lines; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value assignments applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated epsilon list, entries in (0, 1].
    #[arg(long)]
    eps: Option<String>,
    /// Comma-separated grid list: N (square) or IxJ entries.
    #[arg(long)]
    grids: Option<String>,
    /// ap | baseline
    #[arg(long)]
    scheme: Option<String>,
    /// one | two (closed-field-line determination)
    #[arg(long)]
    method: Option<String>,
    /// two_sided | single_exp (integrating-factor form)
    #[arg(long)]
    e_mode: Option<String>,
    #[arg(long)]
    step_factor: Option<f64>,
    /// Absolute tracer step, overriding the grid-scaled step_factor rule.
    #[arg(long)]
    trace_step: Option<f64>,
    /// skip | auto | dense | iterative
    #[arg(long)]
    cond: Option<String>,
    /// Output CSV path (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once on the first grid/epsilon and write the nodal solution.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Write the assembled matrix as row,col,value triplets.
        #[arg(long)]
        dump_matrix: Option<PathBuf>,
    },
    /// Run the full eps x grid convergence study and emit the study CSV.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
    /// Convergence study with condition numbers included (auto mode).
    Condition {
        #[command(flatten)]
        common: Common,
    },
    /// Trace the field line through a point and dump the polyline.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        /// Dump the quadrature set (x,y,kind,omega,E) instead of the polyline.
        #[arg(long)]
        quadrature: bool,
    },
}

fn build_config(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(fieldline_ap::error::ConfigError::Io)?;
        cfg.apply_file(&text)?;
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            fieldline_ap::error::ConfigError::Invalid(format!("--set expects key=value, got `{kv}`"))
        })?;
        cfg.apply(k, v)?;
    }
    macro_rules! flag {
        ($field:ident, $key:literal) => {
            if let Some(v) = &common.$field {
                cfg.apply($key, &v.to_string())?;
            }
        };
    }
    flag!(problem, "problem");
    flag!(gamma1, "gamma1");
    flag!(gamma2, "gamma2");
    flag!(phi, "phi");
    flag!(lambda, "lambda");
    flag!(alpha, "alpha");
    flag!(eps, "eps");
    flag!(grids, "grids");
    flag!(scheme, "scheme");
    flag!(method, "method");
    flag!(e_mode, "e_mode");
    flag!(step_factor, "step_factor");
    flag!(trace_step, "trace_step");
    flag!(cond, "cond");
    if let Some(path) = &common.output {
        cfg.output = Some(path.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open_output(cfg: &RunConfig) -> std::io::Result<Box<dyn Write>> {
    Ok(match &cfg.output {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn study_config(cfg: &RunConfig) -> StudyConfig {
    StudyConfig {
        scheme: cfg.scheme,
        method: cfg.method,
        e_mode: cfg.e_mode,
        step_factor: cfg.step_factor,
        trace_step: cfg.trace_step,
        cond: cfg.cond,
    }
}

fn tracer_params(cfg: &RunConfig, grid: &Grid) -> TracerParams {
    match cfg.trace_step {
        Some(s) => TracerParams::fixed_step(grid, s),
        None => TracerParams::from_grid(grid, cfg.step_factor),
    }
}

fn cmd_solve(cfg: &RunConfig, dump_matrix: Option<&PathBuf>) -> Result<(), Error> {
    let eps = cfg.eps[0];
    let (i_half, j_half) = cfg.grids[0];
    let problem = cfg.build_problem(eps)?;
    let grid = Grid::for_problem(&problem, i_half, j_half)?;
    let params = tracer_params(cfg, &grid);
    let class = classify_nodes(&grid, &problem, &params, cfg.method)?;
    let sys = assemble_system(&grid, &problem, &class, cfg.scheme, cfg.e_mode)?;
    if let Some(path) = dump_matrix {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "row,col,value")?;
        for (r, c, v) in sys.triplets() {
            writeln!(f, "{r},{c},{v}")?;
        }
    }
    let rep = solve(&sys, CondMode::Skip)?;
    let mut out = open_output(cfg)?;
    writeln!(out, "x,y,u,exact,error")?;
    for (i, j) in grid.nodes() {
        let p = grid.point(i, j);
        let u = rep.solution[grid.index(i, j)];
        let ex = problem.exact(p);
        writeln!(out, "{},{},{},{},{}", p.x, p.y, u, ex, u - ex)?;
    }
    eprintln!(
        "solved {} unknowns, residual {:.3e}",
        sys.n, rep.residual
    );
    Ok(())
}

fn cmd_study(cfg: &RunConfig) -> Result<(), Error> {
    let rows = run_study(
        &cfg.label(),
        &|eps| cfg.build_problem(eps),
        &cfg.eps,
        &cfg.grids,
        &study_config(cfg),
    )?;
    let mut out = open_output(cfg)?;
    write_csv(&rows, &mut out)?;
    Ok(())
}

fn cmd_trace(cfg: &RunConfig, x: f64, y: f64, quadrature: bool) -> Result<(), Error> {
    let problem = cfg.build_problem(cfg.eps[0])?;
    let (i_half, j_half) = cfg.grids[0];
    let grid = Grid::for_problem(&problem, i_half, j_half)?;
    let params = tracer_params(cfg, &grid);
    let start = Point::new(x, y);
    let line = match cfg.method {
        TraceMethod::One => trace_method_one(start, &problem.field, &params, &grid)?,
        _ => trace_method_two(start, &problem.field, &params, &grid)?,
    };
    let mut out = open_output(cfg)?;
    if quadrature {
        let q = QuadratureSet::build(&line, &grid, &problem.field, cfg.e_mode)?;
        writeln!(out, "x,y,kind,omega,e")?;
        for (k, p) in q.points.iter().enumerate() {
            let kind = match p.kind {
                QuadKind::Cut => "cut",
                QuadKind::EdgeX => "edge_x",
                QuadKind::EdgeY => "edge_y",
                QuadKind::Jump => "jump",
            };
            let omega = if k < q.weights.len() { q.weights[k] } else { 0.0 };
            writeln!(out, "{},{},{},{},{}", p.p.x, p.p.y, kind, omega, p.e)?;
        }
    } else {
        writeln!(out, "x,y,arclen")?;
        let mut s = 0.0;
        let mut prev: Option<Point> = None;
        for p in &line.points {
            if let Some(q) = prev {
                s += q.dist(*p);
            }
            prev = Some(*p);
            writeln!(out, "{},{},{}", p.x, p.y, s)?;
        }
        eprintln!("line kind: {:?}, length {}", line.kind, s);
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve { common, dump_matrix } => {
            let cfg = build_config(common)?;
            cmd_solve(&cfg, dump_matrix.as_ref())
        }
        Command::Convergence { common } => {
            let cfg = build_config(common)?;
            cmd_study(&cfg)
        }
        Command::Condition { common } => {
            let mut cfg = build_config(common)?;
            if matches!(cfg.cond, CondPolicy::Skip) {
                cfg.cond = CondPolicy::Auto;
            }
            cmd_study(&cfg)
        }
        Command::Trace {
            common,
            x,
            y,
            quadrature,
        } => {
            let cfg = build_config(common)?;
            cmd_trace(&cfg, *x, *y, *quadrature)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
