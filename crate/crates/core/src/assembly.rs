//! Assembly of the discrete linear system: Dirichlet rows on the boundary,
//! flux-form 9-point diffusion rows at interior nodes, and for the AP scheme
//! a field-line integral constraint row at each cut node.

use crate::error::{AssemblyError, FieldError};
use crate::geom::{Mat2, Point};
use crate::grid::{Classification, Grid, NodeTag};
use crate::problem::ProblemCase;
use crate::quadrature::{EMode, QuadratureSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Dirichlet,
    Stencil,
    Constraint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Cut-node constraint rows on closed field lines.
    Ap,
    /// Classical 9-point FDM at every interior node.
    Baseline,
}

/// Square sparse system in row form.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub row_kind: Vec<RowKind>,
}

impl LinearSystem {
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.rows.iter().map(Vec::len).sum());
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                t.push((r, c, v));
            }
        }
        t
    }

    /// max_i sum_j |a_ij|
    pub fn inf_norm(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(_, v)| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }
}

/// Coefficients of the centered flux-form discretization of
/// div(A grad u) at node (i, j); entry [di+1][dj+1] multiplies u_{i+di,j+dj}.
/// The tensor is evaluated at the four edge midpoints.
pub fn nine_point_coeffs(
    grid: &Grid,
    i: i32,
    j: i32,
    tensor: &dyn Fn(Point) -> Result<Mat2, FieldError>,
) -> Result<[[f64; 3]; 3], FieldError> {
    let (hx, hy) = (grid.hx, grid.hy);
    let p = grid.point(i, j);
    let east = tensor(Point::new(p.x + hx / 2.0, p.y))?;
    let west = tensor(Point::new(p.x - hx / 2.0, p.y))?;
    let north = tensor(Point::new(p.x, p.y + hy / 2.0))?;
    let south = tensor(Point::new(p.x, p.y - hy / 2.0))?;

    let mut c = [[0.0f64; 3]; 3];
    let mut add = |di: i32, dj: i32, v: f64| c[(di + 1) as usize][(dj + 1) as usize] += v;

    // +Q1(i+1/2,j)/hx
    add(1, 0, east[0][0] / (hx * hx));
    add(0, 0, -east[0][0] / (hx * hx));
    for (di, dj, s) in [(1, 1, 1.0), (0, 1, 1.0), (0, -1, -1.0), (1, -1, -1.0)] {
        add(di, dj, s * east[0][1] / (4.0 * hx * hy));
    }
    // -Q1(i-1/2,j)/hx
    add(0, 0, -west[0][0] / (hx * hx));
    add(-1, 0, west[0][0] / (hx * hx));
    for (di, dj, s) in [(0, 1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0), (0, -1, 1.0)] {
        add(di, dj, s * west[0][1] / (4.0 * hx * hy));
    }
    // +Q2(i,j+1/2)/hy
    add(0, 1, north[1][1] / (hy * hy));
    add(0, 0, -north[1][1] / (hy * hy));
    for (di, dj, s) in [(1, 1, 1.0), (1, 0, 1.0), (-1, 0, -1.0), (-1, 1, -1.0)] {
        add(di, dj, s * north[1][0] / (4.0 * hx * hy));
    }
    // -Q2(i,j-1/2)/hy
    add(0, 0, -south[1][1] / (hy * hy));
    add(0, -1, south[1][1] / (hy * hy));
    for (di, dj, s) in [(1, -1, -1.0), (1, 0, -1.0), (-1, 0, 1.0), (-1, -1, 1.0)] {
        add(di, dj, s * south[1][0] / (4.0 * hx * hy));
    }
    Ok(c)
}

fn push_stencil_row(
    row: &mut Vec<(usize, f64)>,
    grid: &Grid,
    i: i32,
    j: i32,
    coeffs: &[[f64; 3]; 3],
    scale: f64,
) {
    for di in -1i32..=1 {
        for dj in -1i32..=1 {
            let v = scale * coeffs[(di + 1) as usize][(dj + 1) as usize];
            if v != 0.0 {
                row.push((grid.index(i + di, j + dj), v));
            }
        }
    }
}

fn compress(row: &mut Vec<(usize, f64)>) {
    row.sort_by_key(|&(c, _)| c);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for &(c, v) in row.iter() {
        match out.last_mut() {
            Some((lc, lv)) if *lc == c => *lv += v,
            _ => out.push((c, v)),
        }
    }
    *row = out;
}

/// Constraint row for one cut node: the trapezoid-rule discretization of
/// int E (f + div(alpha b_perp b_perp^T grad u)) ds = 0 along its closed
/// field line, with the continuous terms interpolated from grid nodes.
fn constraint_row(
    grid: &Grid,
    problem: &ProblemCase,
    quad: &QuadratureSet,
    row: &mut Vec<(usize, f64)>,
) -> Result<f64, AssemblyError> {
    let field = &problem.field;
    let tensor = |p: Point| Ok(field.perp_tensor(p));
    let mut rhs = 0.0;
    // cache the perp stencil per host node; hosts repeat heavily
    let mut cache: std::collections::HashMap<(i32, i32), [[f64; 3]; 3]> =
        std::collections::HashMap::new();
    for (k, qp) in quad.points.iter().enumerate() {
        let w = quad.trapezoid_weight(k) * qp.e;
        if w == 0.0 {
            continue;
        }
        for &((hi, hj), iw) in &qp.hosts {
            let coeffs = match cache.get(&(hi, hj)) {
                Some(c) => *c,
                None => {
                    let c = nine_point_coeffs(grid, hi, hj, &tensor)
                        .map_err(|_| AssemblyError::EmptyQuadrature { i: hi, j: hj })?;
                    cache.insert((hi, hj), c);
                    c
                }
            };
            // row carries -P so that the diagonal has the same sign as the
            // diffusion rows; rhs moves +f to the right-hand side
            push_stencil_row(row, grid, hi, hj, &coeffs, -w * iw);
            rhs += w * iw * problem.source(grid.point(hi, hj));
        }
    }
    compress(row);
    Ok(rhs)
}

/// Assemble the full square system over all grid nodes.
pub fn assemble_system(
    grid: &Grid,
    problem: &ProblemCase,
    class: &Classification,
    scheme: Scheme,
    e_mode: EMode,
) -> Result<LinearSystem, AssemblyError> {
    let field = &problem.field;
    let n = grid.n_nodes();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut rhs = vec![0.0f64; n];
    let mut row_kind = vec![RowKind::Stencil; n];

    let quads: Vec<QuadratureSet> = class
        .cut_lines
        .iter()
        .map(|line| QuadratureSet::build(line, grid, field, e_mode))
        .collect::<Result<_, _>>()?;

    let full_tensor = |p: Point| field.diffusion_tensor(p);
    for (i, j) in grid.nodes() {
        let r = grid.index(i, j);
        let tag = class.tag(grid, i, j);
        if tag == NodeTag::Boundary {
            rows[r].push((r, 1.0));
            rhs[r] = problem.boundary(grid.point(i, j));
            row_kind[r] = RowKind::Dirichlet;
            continue;
        }
        if let (Scheme::Ap, NodeTag::Cut(line_idx)) = (scheme, tag) {
            rhs[r] = constraint_row(grid, problem, &quads[line_idx], &mut rows[r])?;
            row_kind[r] = RowKind::Constraint;
            continue;
        }
        // -div(A grad u) = f
        let coeffs = nine_point_coeffs(grid, i, j, &full_tensor)
            .map_err(|_| AssemblyError::EmptyQuadrature { i, j })?;
        push_stencil_row(&mut rows[r], grid, i, j, &coeffs, -1.0);
        compress(&mut rows[r]);
        rhs[r] = problem.source(grid.point(i, j));
    }
    Ok(LinearSystem {
        n,
        rows,
        rhs,
        row_kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::grid::classify_nodes;
    use crate::problem::example1_case;
    use crate::tracer::{TraceMethod, TracerParams};
    use approx::assert_relative_eq;

    fn coeff(c: &[[f64; 3]; 3], di: i32, dj: i32) -> f64 {
        c[(di + 1) as usize][(dj + 1) as usize]
    }

    #[test]
    fn identity_tensor_gives_five_point_laplacian() {
        let grid = Grid::new(0.5, 0.5, 8, 8).unwrap();
        let tensor = |_p: Point| -> Result<Mat2, FieldError> { Ok([[1.0, 0.0], [0.0, 1.0]]) };
        let c = nine_point_coeffs(&grid, 1, 2, &tensor).unwrap();
        let h2 = grid.hx * grid.hx;
        assert_relative_eq!(coeff(&c, 0, 0), -4.0 / h2, max_relative = 1e-13);
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            assert_relative_eq!(coeff(&c, di, dj), 1.0 / h2, max_relative = 1e-13);
        }
        for (di, dj) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            assert_eq!(coeff(&c, di, dj), 0.0);
        }
    }

    #[test]
    fn constant_full_tensor_corner_coefficients() {
        let grid = Grid::new(0.5, 0.5, 8, 8).unwrap();
        let a12 = 0.7;
        let tensor = |_p: Point| -> Result<Mat2, FieldError> { Ok([[2.0, a12], [a12, 3.0]]) };
        let c = nine_point_coeffs(&grid, 0, 0, &tensor).unwrap();
        let (hx, hy) = (grid.hx, grid.hy);
        // each corner collects a12/(4 hx hy) from one x-edge and one y-edge
        assert_relative_eq!(coeff(&c, 1, 1), 2.0 * a12 / (4.0 * hx * hy), max_relative = 1e-13);
        assert_relative_eq!(coeff(&c, -1, -1), 2.0 * a12 / (4.0 * hx * hy), max_relative = 1e-13);
        assert_relative_eq!(coeff(&c, 1, -1), -2.0 * a12 / (4.0 * hx * hy), max_relative = 1e-13);
        assert_relative_eq!(coeff(&c, -1, 1), -2.0 * a12 / (4.0 * hx * hy), max_relative = 1e-13);
        // cross terms cancel at the four edge neighbors for constant tensors
        for (di, dj, diag) in [(1, 0, 2.0), (-1, 0, 2.0), (0, 1, 3.0), (0, -1, 3.0)] {
            assert_relative_eq!(coeff(&c, di, dj), diag / (hx * hy), max_relative = 1e-13);
        }
        assert_relative_eq!(coeff(&c, 0, 0), -10.0 / (hx * hy), max_relative = 1e-13);
    }

    #[test]
    fn stencil_annihilates_constants_and_is_exact_on_linears() {
        let field = FieldSpec::ellipse(0.5, 0.85, 0.4, 1e-2, 2.0);
        let tensor = |p: Point| field.diffusion_tensor(p);
        // constants are annihilated exactly (up to rounding)
        let grid = Grid::new(0.5, 0.5, 16, 16).unwrap();
        let c = nine_point_coeffs(&grid, 3, -2, &tensor).unwrap();
        let total: f64 = c.iter().flatten().sum();
        assert!(total.abs() < 1e-9 / (grid.hx * grid.hx));

        // applied to linear data u = x + y the stencil approximates
        // div(A grad u) = d/dx(a11 + a12) + d/dy(a21 + a22); second order in h
        let p = Point::new(3.0 / 32.0, -2.0 / 32.0);
        let apply = |n: i32| -> f64 {
            let g = Grid::new(0.5, 0.5, n, n).unwrap();
            let (i, j) = (3 * n / 16, -2 * n / 16);
            let c = nine_point_coeffs(&g, i, j, &tensor).unwrap();
            let mut acc = 0.0;
            for di in -1i32..=1 {
                for dj in -1i32..=1 {
                    let q = g.point(i + di, j + dj);
                    acc += coeff(&c, di, dj) * (q.x + q.y);
                }
            }
            acc
        };
        let h = 1e-5;
        let q1 = |p: Point| {
            let a = field.diffusion_tensor(p).unwrap();
            a[0][0] + a[0][1]
        };
        let q2 = |p: Point| {
            let a = field.diffusion_tensor(p).unwrap();
            a[1][0] + a[1][1]
        };
        let exact = (q1(Point::new(p.x + h, p.y)) - q1(Point::new(p.x - h, p.y))) / (2.0 * h)
            + (q2(Point::new(p.x, p.y + h)) - q2(Point::new(p.x, p.y - h))) / (2.0 * h);
        let e16 = (apply(16) - exact).abs();
        let e64 = (apply(64) - exact).abs();
        // two refinements: second order means a factor near 16
        assert!(e64 < e16 / 8.0, "e16 = {e16}, e64 = {e64}");
        assert_relative_eq!(apply(64), exact, max_relative = 2e-3);
    }

    #[test]
    fn nine_point_matches_dense_operator_on_smooth_data() {
        // apply the assembled interior rows to exact nodal data and compare
        // with -div(A grad u) pointwise
        let problem = example1_case(0.5, 0.85, 0.0, 1.0, 1.0).unwrap();
        let grid = Grid::for_problem(&problem, 16, 16).unwrap();
        let params = TracerParams::from_grid(&grid, 0.25);
        let class = classify_nodes(&grid, &problem, &params, TraceMethod::Two).unwrap();
        let sys = assemble_system(&grid, &problem, &class, Scheme::Baseline, EMode::TwoSided).unwrap();
        let u: Vec<f64> = grid.nodes().map(|(i, j)| problem.exact(grid.point(i, j))).collect();
        let au = sys.matvec(&u);
        // residual |Au - f| should shrink like the truncation error; just
        // check it is small relative to the row scale at a few nodes
        let scale = sys.inf_norm();
        for (i, j) in [(3, 4), (-5, 2), (7, -7)] {
            let r = grid.index(i, j);
            assert!(
                (au[r] - sys.rhs[r]).abs() < 1e-3 * scale,
                "truncation at ({i},{j}): {}",
                au[r] - sys.rhs[r]
            );
        }
    }

    #[test]
    fn row_kind_census_ap_vs_baseline() {
        let problem = example1_case(0.5, 0.5, 0.0, 1e-3, 1.0).unwrap();
        let grid = Grid::for_problem(&problem, 16, 16).unwrap();
        let params = TracerParams::from_grid(&grid, 0.25);
        let class = classify_nodes(&grid, &problem, &params, TraceMethod::Two).unwrap();
        let ap = assemble_system(&grid, &problem, &class, Scheme::Ap, EMode::TwoSided).unwrap();
        let base =
            assemble_system(&grid, &problem, &class, Scheme::Baseline, EMode::TwoSided).unwrap();
        let n_con = ap.row_kind.iter().filter(|k| **k == RowKind::Constraint).count();
        assert_eq!(n_con, class.cut_lines.len());
        assert_eq!(
            base.row_kind.iter().filter(|k| **k == RowKind::Constraint).count(),
            0
        );
        let n_dir = ap.row_kind.iter().filter(|k| **k == RowKind::Dirichlet).count();
        assert_eq!(n_dir, 4 * 32); // perimeter nodes of a 33x33 grid
    }

    #[test]
    fn constraint_row_annihilates_constants() {
        // for u = const the perp flux vanishes, so the matrix part of every
        // constraint row must sum to zero
        let problem = example1_case(0.5, 0.85, 0.0, 1e-6, 1.0).unwrap();
        let grid = Grid::for_problem(&problem, 16, 16).unwrap();
        let params = TracerParams::from_grid(&grid, 0.25);
        let class = classify_nodes(&grid, &problem, &params, TraceMethod::Two).unwrap();
        let sys = assemble_system(&grid, &problem, &class, Scheme::Ap, EMode::TwoSided).unwrap();
        for (r, kind) in sys.row_kind.iter().enumerate() {
            if *kind == RowKind::Constraint {
                let s: f64 = sys.rows[r].iter().map(|(_, v)| v).sum();
                let scale: f64 = sys.rows[r].iter().map(|(_, v)| v.abs()).sum();
                assert!(s.abs() <= 1e-10 * scale.max(1.0), "row {r}: sum {s}");
            }
        }
    }

    #[test]
    fn constraint_row_residual_small_on_exact_solution() {
        // the exact solution satisfies the integral identity; the discrete
        // constraint applied to exact nodal data must be small
        let problem = example1_case(0.5, 0.85, 0.0, 1e-9, 1.0).unwrap();
        let grid = Grid::for_problem(&problem, 32, 32).unwrap();
        let params = TracerParams::from_grid(&grid, 0.25);
        let class = classify_nodes(&grid, &problem, &params, TraceMethod::Two).unwrap();
        let sys = assemble_system(&grid, &problem, &class, Scheme::Ap, EMode::TwoSided).unwrap();
        let u: Vec<f64> = grid.nodes().map(|(i, j)| problem.exact(grid.point(i, j))).collect();
        let au = sys.matvec(&u);
        for (r, kind) in sys.row_kind.iter().enumerate() {
            if *kind == RowKind::Constraint {
                let scale: f64 = sys.rows[r].iter().map(|(_, v)| v.abs()).sum();
                let res = (au[r] - sys.rhs[r]).abs();
                assert!(res < 2e-2 * scale, "row {r}: residual {res}, scale {scale}");
            }
        }
    }
}
