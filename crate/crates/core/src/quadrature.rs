//! Quadrature along a closed field line: intersections of the traced polyline
//! with grid lines, inserted div-b discontinuity points, Euclidean weights,
//! the discrete integrating factor E, and interpolation stencils onto grid
//! nodes.

use crate::error::QuadError;
use crate::field::{DiscontinuityLocus, FieldSpec};
use crate::geom::Point;
use crate::grid::Grid;
use crate::tracer::{FieldLine, LineKind};

/// Positional tolerance for merging coincident quadrature points.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadKind {
    /// The cut node (first and last abscissa).
    Cut,
    /// On a vertical grid line x = x_i.
    EdgeX,
    /// On a horizontal grid line y = y_j.
    EdgeY,
    /// Inserted crossing of the div-b discontinuity locus.
    Jump,
}

/// A quadrature abscissa located on the traced polyline; `seg`/`t` give its
/// position along the polyline for ordering.
#[derive(Clone, Copy, Debug)]
pub struct Abscissa {
    pub p: Point,
    pub kind: QuadKind,
    seg: usize,
    t: f64,
}

#[derive(Clone, Debug)]
pub struct QuadPoint {
    pub p: Point,
    pub kind: QuadKind,
    /// Interpolation stencil onto grid nodes; weights sum to 1.
    pub hosts: Vec<((i32, i32), f64)>,
    /// One-sided div b on the incoming arc.
    pub div_minus: f64,
    /// One-sided div b on the outgoing arc.
    pub div_plus: f64,
    /// Discrete integrating factor at this abscissa.
    pub e: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EMode {
    /// Two-term form e^{int_0^s} + e^{-int_s^L} as printed in the discrete
    /// scheme; equals 2 exactly for divergence-free fields.
    #[default]
    TwoSided,
    /// Plain single exponential e^{int_0^s}; for comparison studies.
    SingleExp,
}

/// Ordered quadrature set along one closed field line.
#[derive(Clone, Debug)]
pub struct QuadratureSet {
    pub points: Vec<QuadPoint>,
    /// weights[i] = |p_{i+1} - p_i|; length = points.len() - 1.
    pub weights: Vec<f64>,
}

/// All crossings of the polyline with grid lines, in traversal order. The
/// endpoints of the line are not included.
pub fn edge_intersections(line: &FieldLine, grid: &Grid) -> Vec<Abscissa> {
    let mut out = Vec::new();
    for (seg, w) in line.points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let mut events: Vec<Abscissa> = Vec::new();
        // vertical lines x = i*hx
        if (b.x - a.x).abs() > 0.0 {
            let (lo, hi) = (a.x.min(b.x), a.x.max(b.x));
            let i0 = (lo / grid.hx - 1e-9).floor() as i32;
            let i1 = (hi / grid.hx + 1e-9).ceil() as i32;
            for i in i0..=i1 {
                if i.abs() > grid.i_half {
                    continue;
                }
                let xi = i as f64 * grid.hx;
                let t = (xi - a.x) / (b.x - a.x);
                if t > DEDUP_TOL && t <= 1.0 {
                    let p = Point::new(xi, a.y + t * (b.y - a.y));
                    events.push(Abscissa {
                        p,
                        kind: QuadKind::EdgeX,
                        seg,
                        t,
                    });
                }
            }
        }
        // horizontal lines y = j*hy
        if (b.y - a.y).abs() > 0.0 {
            let (lo, hi) = (a.y.min(b.y), a.y.max(b.y));
            let j0 = (lo / grid.hy - 1e-9).floor() as i32;
            let j1 = (hi / grid.hy + 1e-9).ceil() as i32;
            for j in j0..=j1 {
                if j.abs() > grid.j_half {
                    continue;
                }
                let yj = j as f64 * grid.hy;
                let t = (yj - a.y) / (b.y - a.y);
                if t > DEDUP_TOL && t <= 1.0 {
                    let p = Point::new(a.x + t * (b.x - a.x), yj);
                    events.push(Abscissa {
                        p,
                        kind: QuadKind::EdgeY,
                        seg,
                        t,
                    });
                }
            }
        }
        events.sort_by(|u, v| u.t.partial_cmp(&v.t).unwrap());
        out.extend(events);
    }
    out
}

/// Insert each transversal crossing of the discontinuity locus at its
/// interpolated position, preserving order. A crossing coincident with an
/// existing abscissa is merged and re-tagged Jump.
pub fn insert_discontinuities(
    mut abscissae: Vec<Abscissa>,
    line: &FieldLine,
    locus: &DiscontinuityLocus,
) -> Vec<Abscissa> {
    if matches!(locus, DiscontinuityLocus::None) {
        return abscissae;
    }
    let mut crossings = Vec::new();
    for (seg, w) in line.points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let (sa, sb) = match (locus.side(a), locus.side(b)) {
            (Some(sa), Some(sb)) => (sa, sb),
            _ => continue,
        };
        if sa == 0.0 || sa * sb >= 0.0 {
            continue;
        }
        let t = sa / (sa - sb);
        let p = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        if locus.on_positive_ray(p) {
            crossings.push(Abscissa {
                p,
                kind: QuadKind::Jump,
                seg,
                t,
            });
        }
    }
    for c in crossings {
        // merge with an existing abscissa if closer than the dedup tolerance
        if let Some(existing) = abscissae.iter_mut().find(|a| a.p.dist(c.p) < DEDUP_TOL) {
            existing.kind = QuadKind::Jump;
            continue;
        }
        let pos = abscissae
            .iter()
            .position(|a| a.seg > c.seg || (a.seg == c.seg && a.t > c.t))
            .unwrap_or(abscissae.len());
        abscissae.insert(pos, c);
    }
    abscissae
}

/// Interpolation stencil for an arbitrary point: weight 1 at a grid node,
/// a 2-node pair on a grid line, bilinear corner weights inside a cell.
/// Host nodes are always interior; a point in the outermost cell ring is
/// interpolated by linear extrapolation from the adjacent interior pair.
pub fn host_weights(p: Point, grid: &Grid) -> Result<Vec<((i32, i32), f64)>, QuadError> {
    if p.x.abs() > grid.half_width + DEDUP_TOL || p.y.abs() > grid.half_height + DEDUP_TOL {
        return Err(QuadError::OutOfDomain { x: p.x, y: p.y });
    }
    let snap_i = |coord: f64, h: f64| -> Option<i32> {
        let r = (coord / h).round();
        ((coord - r * h).abs() < DEDUP_TOL).then_some(r as i32)
    };
    // 1-D interior pair with clamping away from the boundary nodes
    let pair = |coord: f64, h: f64, half: i32| -> [(i32, f64); 2] {
        let j = ((coord / h).floor() as i32).clamp(-half + 1, half - 2);
        let w_lo = ((j + 1) as f64 * h - coord) / h;
        [(j, w_lo), (j + 1, 1.0 - w_lo)]
    };
    let sx = snap_i(p.x, grid.hx);
    let sy = snap_i(p.y, grid.hy);
    Ok(match (sx, sy) {
        (Some(i), Some(j)) => vec![((i, j), 1.0)],
        (Some(i), None) => pair(p.y, grid.hy, grid.j_half)
            .into_iter()
            .map(|(j, w)| ((i, j), w))
            .collect(),
        (None, Some(j)) => pair(p.x, grid.hx, grid.i_half)
            .into_iter()
            .map(|(i, w)| ((i, j), w))
            .collect(),
        (None, None) => {
            let px = pair(p.x, grid.hx, grid.i_half);
            let py = pair(p.y, grid.hy, grid.j_half);
            let mut out = Vec::with_capacity(4);
            for (i, wx) in px {
                for (j, wy) in py {
                    out.push(((i, j), wx * wy));
                }
            }
            out
        }
    })
}

impl QuadratureSet {
    pub fn build(
        line: &FieldLine,
        grid: &Grid,
        field: &FieldSpec,
        mode: EMode,
    ) -> Result<QuadratureSet, QuadError> {
        if line.kind != LineKind::Closed {
            return Err(QuadError::OpenLine);
        }
        if line.points.len() < 3 {
            return Err(QuadError::Degenerate);
        }
        let abscissae = insert_discontinuities(edge_intersections(line, grid), line, &field.locus);

        let first = *line.points.first().unwrap();
        let last = *line.points.last().unwrap();
        let mut pts: Vec<(Point, QuadKind)> = Vec::with_capacity(abscissae.len() + 2);
        pts.push((first, QuadKind::Cut));
        for a in abscissae {
            let prev = pts.last().unwrap().0;
            if a.p.dist(prev) < DEDUP_TOL {
                if a.kind == QuadKind::Jump {
                    pts.last_mut().unwrap().1 = QuadKind::Jump;
                }
                continue;
            }
            pts.push((a.p, a.kind));
        }
        if pts.last().unwrap().0.dist(last) < DEDUP_TOL && pts.len() > 1 {
            pts.pop();
        }
        pts.push((last, QuadKind::Cut));

        let weights: Vec<f64> = pts.windows(2).map(|w| w[0].0.dist(w[1].0)).collect();

        // one-sided divergence values; the tangent comes from neighboring
        // abscissae (the jump offset only matters at Jump points)
        let n = pts.len();
        let mut points: Vec<QuadPoint> = Vec::with_capacity(n);
        for (k, &(p, kind)) in pts.iter().enumerate() {
            let before = pts[k.saturating_sub(1).max(0)].0;
            let after = pts[(k + 1).min(n - 1)].0;
            let tangent = {
                let d = after.sub(before);
                let nn = d.norm();
                if nn > 0.0 {
                    d.scale(1.0 / nn)
                } else {
                    Point::new(1.0, 0.0)
                }
            };
            let (div_minus, div_plus) = if kind == QuadKind::Jump {
                (
                    field.div_b(p.sub(tangent.scale(1e-10))),
                    field.div_b(p.add(tangent.scale(1e-10))),
                )
            } else {
                let d = field.div_b(p);
                (d, d)
            };
            points.push(QuadPoint {
                p,
                kind,
                hosts: host_weights(p, grid)?,
                div_minus,
                div_plus,
                e: 0.0,
            });
        }
        compute_e(&mut points, &weights, mode);
        Ok(QuadratureSet { points, weights })
    }

    /// Composite trapezoid weight of abscissa k in the line integral.
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        let lo = if k > 0 { self.weights[k - 1] } else { 0.0 };
        let hi = if k < self.weights.len() {
            self.weights[k]
        } else {
            0.0
        };
        0.5 * (lo + hi)
    }

    /// Trapezoid approximation of the loop integral of div b (the Lemma 1
    /// quantity; tends to 0 with grid refinement on closed lines).
    pub fn loop_divergence_integral(&self) -> f64 {
        panel_sums(&self.points, &self.weights).iter().sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn panel_sums(points: &[QuadPoint], weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| 0.5 * w * (points[i].div_plus + points[i + 1].div_minus))
        .collect()
}

/// Fill in the discrete integrating factor at every abscissa.
pub fn compute_e(points: &mut [QuadPoint], weights: &[f64], mode: EMode) {
    let panels = panel_sums(points, weights);
    let total: f64 = panels.iter().sum();
    let mut prefix = 0.0f64;
    for (k, pt) in points.iter_mut().enumerate() {
        pt.e = match mode {
            EMode::TwoSided => prefix.exp() + (-(total - prefix)).exp(),
            EMode::SingleExp => prefix.exp(),
        };
        if k < panels.len() {
            prefix += panels[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::tracer::{trace_method_two, TracerParams};
    use approx::assert_relative_eq;

    fn circle_line(radius: f64, n: usize) -> FieldLine {
        // synthetic closed polyline, first == last
        let mut points: Vec<Point> = (0..n)
            .map(|k| {
                let th = std::f64::consts::PI * 2.0 * k as f64 / n as f64;
                Point::new(radius * th.cos() - 0.0, radius * th.sin())
            })
            .collect();
        // rotate so it starts on the negative x axis at a grid node-ish spot
        points.iter_mut().for_each(|p| {
            let q = Point::new(-p.x, p.y);
            *p = q;
        });
        points.push(points[0]);
        FieldLine {
            points,
            kind: LineKind::Closed,
            method: crate::tracer::TraceMethod::Two,
            cut_point: Point::new(-radius, 0.0),
            step: 2.0 * std::f64::consts::PI * radius / n as f64,
        }
    }

    #[test]
    fn circle_crossing_count() {
        // radius 0.25 circle on hx = hy = 0.125: crosses x in {-0.125, 0, 0.125}
        // and y in {-0.125, 0, 0.125}; 16 interior crossings plus the two
        // cut-node endpoints (the cut node itself sits on x = -0.25, y = 0).
        let grid = Grid::new(0.5, 0.5, 4, 4).unwrap();
        let line = circle_line(0.25, 400);
        let q = QuadratureSet::build(&line, &grid, &FieldSpec::uniform(Point::new(1.0, 0.0), 1.0, 1.0), EMode::TwoSided)
            .unwrap();
        // transversal crossings: x = -0.125, 0, 0.125 twice each (6),
        // y = -0.125, 0.125 twice each (4), y = 0 at x = 0.25 (1); the
        // crossing of y = 0 at x = -0.25 coincides with the endpoints.
        // Tangencies at x = 0.25 and y = +-0.25 may add a few more.
        // 11 guaranteed interior crossings + 2 endpoints.
        assert!(q.points.len() >= 13, "got {}", q.points.len());
        assert_eq!(q.points.first().unwrap().kind, QuadKind::Cut);
        assert_eq!(q.points.last().unwrap().kind, QuadKind::Cut);
        // total chord length approximates the circumference
        assert_relative_eq!(
            q.total_weight(),
            2.0 * std::f64::consts::PI * 0.25,
            max_relative = 2e-2
        );
    }

    #[test]
    fn segment_inside_one_cell_contributes_nothing() {
        let grid = Grid::new(0.5, 0.5, 4, 4).unwrap();
        let line = FieldLine {
            points: vec![Point::new(0.01, 0.02), Point::new(0.03, 0.04)],
            kind: LineKind::Open,
            method: crate::tracer::TraceMethod::OpenTrace,
            cut_point: Point::new(0.01, 0.02),
            step: 0.1,
        };
        assert!(edge_intersections(&line, &grid).is_empty());
    }

    #[test]
    fn midpoint_crossing_interpolation() {
        let grid = Grid::new(0.5, 0.5, 4, 4).unwrap();
        let line = FieldLine {
            points: vec![Point::new(-0.01, 0.06), Point::new(0.01, 0.06)],
            kind: LineKind::Open,
            method: crate::tracer::TraceMethod::OpenTrace,
            cut_point: Point::new(-0.01, 0.06),
            step: 0.1,
        };
        let ev = edge_intersections(&line, &grid);
        assert_eq!(ev.len(), 1);
        assert_relative_eq!(ev[0].p.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(ev[0].p.y, 0.06, epsilon = 1e-15);
        assert_eq!(ev[0].kind, QuadKind::EdgeX);
    }

    #[test]
    fn host_weight_cases() {
        let grid = Grid::new(0.5, 0.5, 4, 4).unwrap();
        // exact node
        let h = host_weights(Point::new(0.125, -0.25), &grid).unwrap();
        assert_eq!(h, vec![((1, -2), 1.0)]);
        // edge midpoint
        let h = host_weights(Point::new(0.0625, 0.125), &grid).unwrap();
        assert_eq!(h.len(), 2);
        for (_, w) in &h {
            assert_relative_eq!(*w, 0.5);
        }
        // cell center
        let h = host_weights(Point::new(0.0625, 0.0625), &grid).unwrap();
        assert_eq!(h.len(), 4);
        for (_, w) in &h {
            assert_relative_eq!(*w, 0.25);
        }
        // out of domain
        assert!(host_weights(Point::new(0.7, 0.0), &grid).is_err());
    }

    #[test]
    fn host_weights_partition_of_unity() {
        let grid = Grid::new(0.5, 0.5, 8, 8).unwrap();
        let mut state = 12345u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let p = Point::new(rand01() - 0.5, rand01() - 0.5);
            let h = host_weights(p, &grid).unwrap();
            let s: f64 = h.iter().map(|(_, w)| w).sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-12);
            for ((i, j), _) in &h {
                assert!(!grid.is_boundary(*i, *j), "host node ({i},{j}) for {p:?}");
            }
        }
    }

    #[test]
    fn e_is_two_for_divergence_free_field() {
        let grid = Grid::new(0.5, 0.5, 16, 16).unwrap();
        let field = FieldSpec::ellipse(0.5, 0.5, 0.0, 1.0, 1.0);
        let params = TracerParams::from_grid(&grid, 0.25);
        let line = trace_method_two(Point::new(-0.25, 0.0), &field, &params, &grid).unwrap();
        let q = QuadratureSet::build(&line, &grid, &field, EMode::TwoSided).unwrap();
        for pt in &q.points {
            assert_relative_eq!(pt.e, 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn e_single_panel_toy_values() {
        let mut pts = vec![
            QuadPoint {
                p: Point::new(0.0, 0.0),
                kind: QuadKind::Cut,
                hosts: vec![],
                div_minus: 1.0,
                div_plus: 1.0,
                e: 0.0,
            },
            QuadPoint {
                p: Point::new(1.0, 0.0),
                kind: QuadKind::Cut,
                hosts: vec![],
                div_minus: 1.0,
                div_plus: 1.0,
                e: 0.0,
            },
        ];
        compute_e(&mut pts, &[1.0], EMode::TwoSided);
        assert_relative_eq!(pts[0].e, 1.0 + (-1.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(pts[1].e, 1.0f64.exp() + 1.0, epsilon = 1e-15);
        compute_e(&mut pts, &[1.0], EMode::SingleExp);
        assert_relative_eq!(pts[0].e, 1.0);
        assert_relative_eq!(pts[1].e, 1.0f64.exp());
    }

    #[test]
    fn discontinuity_ray_inserted_once_per_loop() {
        let grid = Grid::new(0.5, 0.5, 32, 32).unwrap();
        let field = FieldSpec::ellipse(0.5, 0.85, std::f64::consts::FRAC_PI_4, 1.0, 1.0);
        let params = TracerParams::from_grid(&grid, 0.25);
        let line = trace_method_two(Point::new(-0.25, 0.0), &field, &params, &grid).unwrap();
        let q = QuadratureSet::build(&line, &grid, &field, EMode::TwoSided).unwrap();
        let jumps = q
            .points
            .iter()
            .filter(|p| p.kind == QuadKind::Jump)
            .count();
        assert_eq!(jumps, 1);
        // the jump sits on the ray at angle pi/4
        let jp = q
            .points
            .iter()
            .find(|p| p.kind == QuadKind::Jump)
            .unwrap()
            .p;
        assert_relative_eq!(jp.y, jp.x, epsilon = 1e-9);
        assert!(jp.x > 0.0);
    }

    #[test]
    fn weights_sum_to_polyline_resolution_length() {
        let grid = Grid::new(0.5, 0.5, 16, 16).unwrap();
        let field = FieldSpec::ellipse(0.5, 0.85, 0.0, 1.0, 1.0);
        let params = TracerParams::from_grid(&grid, 0.25);
        let line = trace_method_two(Point::new(-0.3, 0.0), &field, &params, &grid).unwrap();
        let q = QuadratureSet::build(&line, &grid, &field, EMode::TwoSided).unwrap();
        assert_relative_eq!(q.total_weight(), line.length(), max_relative = 1e-2);
        // E positive everywhere; loop integral of div b small
        for p in &q.points {
            assert!(p.e > 0.0);
        }
        assert!(q.loop_divergence_integral().abs() < 1e-2);
    }
}
