//! Convergence studies: discrete error norms, observed orders, condition
//! numbers and CSV reporting.

use std::io::Write;
use std::time::Instant;

use crate::assembly::{assemble_system, Scheme};
use crate::error::Error;
use crate::grid::{classify_nodes, Grid};
use crate::problem::ProblemCase;
use crate::quadrature::EMode;
use crate::solver::{solve, CondMode};
use crate::tracer::{TraceMethod, TracerParams};

#[derive(Clone, Copy, Debug)]
pub struct ErrorNorms {
    pub l2: f64,
    pub linf: f64,
}

/// Discrete norms of the nodal error against the exact solution:
/// L2 is the cell-weighted root mean square, Linf the max over nodes.
pub fn error_norms(grid: &Grid, problem: &ProblemCase, solution: &[f64]) -> ErrorNorms {
    let mut sum2 = 0.0;
    let mut linf = 0.0f64;
    for (i, j) in grid.nodes() {
        let e = solution[grid.index(i, j)] - problem.exact(grid.point(i, j));
        sum2 += e * e;
        linf = linf.max(e.abs());
    }
    ErrorNorms {
        l2: (grid.hx * grid.hy * sum2).sqrt(),
        linf,
    }
}

/// Estimated order of convergence from errors on two grids.
pub fn eoc(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

#[derive(Clone, Copy, Debug)]
pub enum CondPolicy {
    Skip,
    /// Dense up to 64 cells per half-axis, iterative estimate beyond.
    Auto,
    Force(CondMode),
}

#[derive(Clone, Copy, Debug)]
pub struct StudyConfig {
    pub scheme: Scheme,
    pub method: TraceMethod,
    pub e_mode: EMode,
    pub step_factor: f64,
    /// Absolute tracer step; overrides the grid-scaled `step_factor` rule.
    pub trace_step: Option<f64>,
    pub cond: CondPolicy,
}

impl Default for StudyConfig {
    fn default() -> StudyConfig {
        StudyConfig {
            scheme: Scheme::Ap,
            method: TraceMethod::Two,
            e_mode: EMode::TwoSided,
            step_factor: 0.25,
            trace_step: None,
            cond: CondPolicy::Skip,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyRow {
    pub problem: String,
    pub scheme: Scheme,
    pub method: TraceMethod,
    pub eps: f64,
    pub i_half: i32,
    pub j_half: i32,
    pub hx: f64,
    pub hy: f64,
    pub l2: f64,
    pub linf: f64,
    pub eoc_l2: Option<f64>,
    pub eoc_linf: Option<f64>,
    pub cond: Option<f64>,
    pub wall_ms: f64,
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Ap => "ap",
        Scheme::Baseline => "baseline",
    }
}

fn method_name(m: TraceMethod) -> &'static str {
    match m {
        TraceMethod::One => "one",
        TraceMethod::Two => "two",
        TraceMethod::OpenTrace => "open",
    }
}

/// Run one problem family over a grid sequence and a list of epsilon values.
/// The classification is computed once per grid (the field direction does not
/// depend on epsilon) and reused across all epsilon values. Rows come out
/// ordered by epsilon, then by grid.
pub fn run_study(
    label: &str,
    build: &dyn Fn(f64) -> Result<ProblemCase, crate::error::ConfigError>,
    eps_list: &[f64],
    grids: &[(i32, i32)],
    cfg: &StudyConfig,
) -> Result<Vec<StudyRow>, Error> {
    let mut cells: Vec<Vec<(ErrorNorms, Option<f64>, f64)>> = vec![Vec::new(); eps_list.len()];
    for &(i_half, j_half) in grids {
        let probe = build(eps_list[0])?;
        let grid = Grid::for_problem(&probe, i_half, j_half)?;
        let params = match cfg.trace_step {
            Some(s) => TracerParams::fixed_step(&grid, s),
            None => TracerParams::from_grid(&grid, cfg.step_factor),
        };
        let class = classify_nodes(&grid, &probe, &params, cfg.method)?;
        let cond_mode = match cfg.cond {
            CondPolicy::Skip => CondMode::Skip,
            CondPolicy::Force(m) => m,
            CondPolicy::Auto => {
                if i_half.max(j_half) <= 64 {
                    CondMode::Dense
                } else {
                    CondMode::Iterative
                }
            }
        };
        for (k, &eps) in eps_list.iter().enumerate() {
            let problem = build(eps)?;
            let t0 = Instant::now();
            // a failed solve is recorded as NaN errors and the study goes on
            let outcome = assemble_system(&grid, &problem, &class, cfg.scheme, cfg.e_mode)
                .map_err(Error::from)
                .and_then(|sys| solve(&sys, cond_mode).map_err(Error::from));
            let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
            match outcome {
                Ok(rep) => {
                    let norms = error_norms(&grid, &problem, &rep.solution);
                    cells[k].push((norms, rep.cond, wall_ms));
                }
                Err(e) => {
                    eprintln!("solve failed ({label}, eps={eps}, {i_half}x{j_half}): {e}");
                    cells[k].push((
                        ErrorNorms {
                            l2: f64::NAN,
                            linf: f64::NAN,
                        },
                        None,
                        wall_ms,
                    ));
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(eps_list.len() * grids.len());
    for (k, &eps) in eps_list.iter().enumerate() {
        for (g, &(i_half, j_half)) in grids.iter().enumerate() {
            let probe = build(eps)?;
            let grid = Grid::for_problem(&probe, i_half, j_half)?;
            let (norms, cond, wall_ms) = cells[k][g];
            let (eoc_l2, eoc_linf) = if g > 0 {
                let (prev, _, _) = cells[k][g - 1];
                let h_prev = probe.half_width / grids[g - 1].0 as f64;
                let safe = |o: f64| o.is_finite().then_some(o);
                (
                    safe(eoc(prev.l2, norms.l2, h_prev, grid.hx)),
                    safe(eoc(prev.linf, norms.linf, h_prev, grid.hx)),
                )
            } else {
                (None, None)
            };
            rows.push(StudyRow {
                problem: label.to_string(),
                scheme: cfg.scheme,
                method: cfg.method,
                eps,
                i_half,
                j_half,
                hx: grid.hx,
                hy: grid.hy,
                l2: norms.l2,
                linf: norms.linf,
                eoc_l2,
                eoc_linf,
                cond,
                wall_ms,
            });
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[StudyRow], out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "problem,scheme,method,eps,I,J,hx,hy,l2,linf,eoc_l2,eoc_linf,cond,wall_ms"
    )?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.problem,
            scheme_name(r.scheme),
            method_name(r.method),
            r.eps,
            r.i_half,
            r.j_half,
            r.hx,
            r.hy,
            r.l2,
            r.linf,
            opt(r.eoc_l2),
            opt(r.eoc_linf),
            opt(r.cond),
            r.wall_ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::example1_case;
    use approx::assert_relative_eq;

    #[test]
    fn eoc_of_quadratic_errors_is_two() {
        assert_relative_eq!(eoc(4e-2, 1e-2, 0.1, 0.05), 2.0, epsilon = 1e-12);
        assert_relative_eq!(eoc(1e-3, 1e-3, 0.1, 0.05), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn norms_of_shifted_exact_solution() {
        let problem = example1_case(0.5, 0.5, 0.0, 1.0, 1.0).unwrap();
        let grid = Grid::for_problem(&problem, 8, 8).unwrap();
        let u: Vec<f64> = grid
            .nodes()
            .map(|(i, j)| problem.exact(grid.point(i, j)) + 0.25)
            .collect();
        let n = error_norms(&grid, &problem, &u);
        assert_relative_eq!(n.linf, 0.25, epsilon = 1e-14);
        // constant error: l2 = 0.25 * sqrt(hx*hy*n_nodes) = 0.25 * sqrt(area + O(h))
        assert_relative_eq!(
            n.l2,
            0.25 * (grid.hx * grid.hy * grid.n_nodes() as f64).sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn study_converges_on_mild_case() {
        let rows = run_study(
            "ex1a",
            &|eps| example1_case(0.5, 0.5, 0.0, eps, 1.0),
            &[1e-6],
            &[(8, 8), (16, 16)],
            &StudyConfig::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].eoc_linf.is_none());
        let order = rows[1].eoc_linf.unwrap();
        assert!(order > 1.5, "observed order {order}");
        assert!(rows[1].linf < rows[0].linf);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![StudyRow {
            problem: "ex1a".into(),
            scheme: crate::assembly::Scheme::Ap,
            method: TraceMethod::Two,
            eps: 1e-3,
            i_half: 16,
            j_half: 16,
            hx: 0.03125,
            hy: 0.03125,
            l2: 1e-4,
            linf: 2e-4,
            eoc_l2: None,
            eoc_linf: Some(2.0),
            cond: None,
            wall_ms: 1.5,
        }];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(
            lines.next().unwrap(),
            "problem,scheme,method,eps,I,J,hx,hy,l2,linf,eoc_l2,eoc_linf,cond,wall_ms"
        );
        assert_eq!(
            lines.next().unwrap(),
            "ex1a,ap,two,0.001,16,16,0.03125,0.03125,0.0001,0.0002,,2,,1.5"
        );
    }
}
