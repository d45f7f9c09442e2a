//! Uniform Cartesian grid on Omega = (-a, a) x (-b, b) and node
//! classification into boundary, open-interior, closed-interior and cut
//! nodes.

use rayon::prelude::*;

use crate::error::{ClassifyError, ConfigError};
use crate::geom::Point;
use crate::problem::ProblemCase;
use crate::tracer::{self, FieldLine, LineKind, TraceMethod, TracerParams};

/// Node (i, j) for i in [-I, I], j in [-J, J] maps to (i*hx, j*hy).
#[derive(Clone, Copy, Debug)]
pub struct Grid {
    pub half_width: f64,
    pub half_height: f64,
    pub i_half: i32,
    pub j_half: i32,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn new(a: f64, b: f64, i_half: i32, j_half: i32) -> Result<Grid, ConfigError> {
        if a <= 0.0 || b <= 0.0 {
            return Err(ConfigError::Invalid(format!(
                "domain half-extents must be positive, got ({a}, {b})"
            )));
        }
        if i_half < 2 || j_half < 2 {
            return Err(ConfigError::Invalid(format!(
                "cell half-counts must be at least 2, got ({i_half}, {j_half})"
            )));
        }
        Ok(Grid {
            half_width: a,
            half_height: b,
            i_half,
            j_half,
            hx: a / i_half as f64,
            hy: b / j_half as f64,
        })
    }

    pub fn for_problem(problem: &ProblemCase, i_half: i32, j_half: i32) -> Result<Grid, ConfigError> {
        Grid::new(problem.half_width, problem.half_height, i_half, j_half)
    }

    pub fn n_nodes(&self) -> usize {
        (2 * self.i_half as usize + 1) * (2 * self.j_half as usize + 1)
    }

    pub fn index(&self, i: i32, j: i32) -> usize {
        debug_assert!(i.abs() <= self.i_half && j.abs() <= self.j_half);
        ((j + self.j_half) as usize) * (2 * self.i_half as usize + 1) + (i + self.i_half) as usize
    }

    pub fn point(&self, i: i32, j: i32) -> Point {
        Point::new(i as f64 * self.hx, j as f64 * self.hy)
    }

    pub fn is_boundary(&self, i: i32, j: i32) -> bool {
        i.abs() == self.i_half || j.abs() == self.j_half
    }

    /// All (i, j) node indices in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let (ih, jh) = (self.i_half, self.j_half);
        (-jh..=jh).flat_map(move |j| (-ih..=ih).map(move |i| (i, j)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeTag {
    Boundary,
    OpenInterior,
    ClosedInterior,
    /// Cut node; index into `Classification::cut_lines`.
    Cut(usize),
}

/// Per-node tags plus the traced closed field lines through the cut nodes.
#[derive(Clone, Debug)]
pub struct Classification {
    pub tags: Vec<NodeTag>,
    pub cut_lines: Vec<FieldLine>,
}

impl Classification {
    pub fn tag(&self, grid: &Grid, i: i32, j: i32) -> NodeTag {
        self.tags[grid.index(i, j)]
    }

    pub fn count(&self, want: fn(&NodeTag) -> bool) -> usize {
        self.tags.iter().filter(|t| want(t)).count()
    }
}

fn on_cut_ray(problem: &ProblemCase, p: Point, hy: f64) -> bool {
    problem.cut_rays.iter().any(|r| {
        (p.y - r.y).abs() < 1e-9 * hy.max(1.0)
            && p.x > r.x_min + 1e-12
            && p.x < r.x_max - 1e-12
    })
}

/// Classify every node. Nodes on a cut ray are traced with `cut_method` and
/// tagged Cut when their line closes; all other interior nodes are classified
/// open/closed by a Method Two trace of their own line.
pub fn classify_nodes(
    grid: &Grid,
    problem: &ProblemCase,
    params: &TracerParams,
    cut_method: TraceMethod,
) -> Result<Classification, ClassifyError> {
    let field = &problem.field;
    // open/closed classification of ordinary nodes always runs with a step
    // that resolves the return ball; only the cut-line determination uses
    // the caller's step verbatim
    let bg = {
        let step = params.step.min(0.25 * params.delta_close);
        let perimeter = 4.0 * (grid.half_width + grid.half_height);
        TracerParams {
            step,
            max_steps: (100.0 * perimeter / step).ceil() as usize,
            ..*params
        }
    };
    let idx: Vec<(i32, i32)> = grid.nodes().collect();
    let raw: Vec<Result<(NodeTag, Option<FieldLine>), ClassifyError>> = idx
        .par_iter()
        .map(|&(i, j)| {
            if grid.is_boundary(i, j) {
                return Ok((NodeTag::Boundary, None));
            }
            let p = grid.point(i, j);
            if field.is_singular(p) {
                // Island centers sit inside the closed region; the remaining
                // singular points are saddle points on the separatrix.
                let tag = if problem.island_centers.iter().any(|c| c.dist(p) < 1e-12) {
                    NodeTag::ClosedInterior
                } else {
                    NodeTag::OpenInterior
                };
                return Ok((tag, None));
            }
            if on_cut_ray(problem, p, grid.hy) {
                let line = match cut_method {
                    TraceMethod::One => tracer::trace_method_one(p, field, params, grid),
                    _ => tracer::trace_method_two(p, field, params, grid),
                }
                .map_err(|source| ClassifyError::Trace { i, j, source })?;
                return Ok(match line.kind {
                    LineKind::Closed => (NodeTag::Cut(0), Some(line)),
                    LineKind::Open => (NodeTag::OpenInterior, None),
                });
            }
            let line = tracer::trace_method_two(p, field, &bg, grid)
                .map_err(|source| ClassifyError::Trace { i, j, source })?;
            Ok(match line.kind {
                LineKind::Closed => (NodeTag::ClosedInterior, None),
                LineKind::Open => (NodeTag::OpenInterior, None),
            })
        })
        .collect();

    let mut tags = Vec::with_capacity(idx.len());
    let mut cut_lines = Vec::new();
    for r in raw {
        let (tag, line) = r?;
        match (tag, line) {
            (NodeTag::Cut(_), Some(line)) => {
                tags.push(NodeTag::Cut(cut_lines.len()));
                cut_lines.push(line);
            }
            (t, _) => tags.push(t),
        }
    }
    Ok(Classification { tags, cut_lines })
}
