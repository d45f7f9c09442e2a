//! The two manufactured benchmark problems: exact solutions, boundary data and
//! cancellation-safe source terms.

use crate::error::ConfigError;
use crate::field::FieldSpec;
use crate::geom::{Mat2, Point};

/// A horizontal open ray {y = y0, x in (x_min, x_max)} on which cut points are
/// placed, one per island.
#[derive(Clone, Copy, Debug)]
pub struct CutRay {
    pub y: f64,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Clone, Debug)]
pub(crate) enum ProblemKind {
    Example1 { gamma1: f64, gamma2: f64, phi: f64 },
    Example2 { lambda: f64 },
}

/// A complete benchmark case: domain, field, exact solution, source, boundary
/// data and cut-ray placement.
#[derive(Clone, Debug)]
pub struct ProblemCase {
    pub label: String,
    /// Domain half-extents: Omega = (-a, a) x (-b, b).
    pub half_width: f64,
    pub half_height: f64,
    pub field: FieldSpec,
    pub island_centers: Vec<Point>,
    pub cut_rays: Vec<CutRay>,
    pub(crate) kind: ProblemKind,
}

/// Elliptic island problem: u = 1 - [g1^2 X^2 + g2^2 Y^2]^{3/2} on the unit
/// square centered at the origin, with the field tangent to the level sets.
pub fn example1_case(
    gamma1: f64,
    gamma2: f64,
    phi: f64,
    epsilon: f64,
    alpha: f64,
) -> Result<ProblemCase, ConfigError> {
    if gamma1 <= 0.0 || gamma2 <= 0.0 {
        return Err(ConfigError::Invalid(format!(
            "gamma parameters must be positive, got ({gamma1}, {gamma2})"
        )));
    }
    if !(0.0..std::f64::consts::PI).contains(&phi) {
        return Err(ConfigError::OutOfRange {
            key: "phi".into(),
            value: phi.to_string(),
            range: "[0, pi)".into(),
        });
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(ConfigError::OutOfRange {
            key: "eps".into(),
            value: epsilon.to_string(),
            range: "(0, 1]".into(),
        });
    }
    Ok(ProblemCase {
        label: format!("example1(g1={gamma1},g2={gamma2},phi={phi})"),
        half_width: 0.5,
        half_height: 0.5,
        field: FieldSpec::ellipse(gamma1, gamma2, phi, epsilon, alpha),
        island_centers: vec![Point::new(0.0, 0.0)],
        cut_rays: vec![CutRay {
            y: 0.0,
            x_min: -0.5,
            x_max: 0.0,
        }],
        kind: ProblemKind::Example1 {
            gamma1,
            gamma2,
            phi,
        },
    })
}

/// Two-island problem on [-1, 1] x [-0.5, 0.5].
pub fn example2_case(lambda: f64, epsilon: f64, alpha: f64) -> Result<ProblemCase, ConfigError> {
    if lambda == 0.0 {
        return Err(ConfigError::Invalid(
            "lambda = 0 degenerates the two-island field".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(ConfigError::OutOfRange {
            key: "eps".into(),
            value: epsilon.to_string(),
            range: "(0, 1]".into(),
        });
    }
    Ok(ProblemCase {
        label: format!("example2(lambda={lambda})"),
        half_width: 1.0,
        half_height: 0.5,
        field: FieldSpec::two_islands(lambda, epsilon, alpha),
        island_centers: vec![Point::new(-0.5, 0.0), Point::new(0.5, 0.0)],
        cut_rays: vec![
            CutRay {
                y: 0.0,
                x_min: -1.0,
                x_max: -0.5,
            },
            CutRay {
                y: 0.0,
                x_min: 0.0,
                x_max: 0.5,
            },
        ],
        kind: ProblemKind::Example2 { lambda },
    })
}

impl ProblemCase {
    pub fn contains(&self, p: Point) -> bool {
        p.x.abs() <= self.half_width + 1e-14 && p.y.abs() <= self.half_height + 1e-14
    }

    /// Exact solution at the problem's epsilon.
    pub fn exact(&self, p: Point) -> f64 {
        match &self.kind {
            ProblemKind::Example1 {
                gamma1,
                gamma2,
                phi,
            } => {
                let g = quad_form(*gamma1, *gamma2, *phi, p).g;
                1.0 - g.powf(1.5)
            }
            ProblemKind::Example2 { lambda } => {
                u0(*lambda, p) + self.field.epsilon * w_term(p)
            }
        }
    }

    /// Dirichlet boundary data (the exact solution restricted to the boundary).
    pub fn boundary(&self, p: Point) -> f64 {
        self.exact(p)
    }

    /// Manufactured source term, built so no 1/eps factor ever appears.
    pub fn source(&self, p: Point) -> f64 {
        let alpha = self.field.alpha;
        match &self.kind {
            ProblemKind::Example1 {
                gamma1,
                gamma2,
                phi,
            } => {
                // b_perp is the unit gradient direction, so the perpendicular
                // flux is exactly alpha grad u and f = -alpha lap u
                //   = alpha * (3/2) [ sqrt(g) lap g + |grad g|^2 / (2 sqrt(g)) ].
                let d = quad_form(*gamma1, *gamma2, *phi, p);
                if d.g == 0.0 {
                    return 0.0;
                }
                let lap_g = d.gxx + d.gyy;
                let grad_g2 = d.gx * d.gx + d.gy * d.gy;
                alpha * 1.5 * (d.g.sqrt() * lap_g + grad_g2 / (2.0 * d.g.sqrt()))
            }
            ProblemKind::Example2 { lambda } => {
                // (1/eps)(b . grad u_eps) = b . grad w exactly, because
                // B . grad u0 = 0 by construction. Hence
                // f = -div(b (b.grad w)) - alpha div(bp (bp.grad u0))
                //     - eps alpha div(bp (bp.grad w)).
                let eps = self.field.epsilon;
                let (b, jb) = self.field.field_with_jacobian(p);
                let bp = b.perp();
                let jbp = [[-jb[1][0], -jb[1][1]], [jb[0][0], jb[0][1]]];
                let (gu0, hu0) = u0_derivs(*lambda, p);
                let (gw, hw) = w_derivs(p);
                let t1 = div_directional_flux(b, &jb, gw, &hw);
                let t2 = div_directional_flux(bp, &jbp, gu0, &hu0);
                let t3 = div_directional_flux(bp, &jbp, gw, &hw);
                -t1 - alpha * t2 - eps * alpha * t3
            }
        }
    }

    /// Limiting solution u0 (Example 2); for Example 1 the exact solution is
    /// epsilon-independent already.
    pub fn exact_limit(&self, p: Point) -> f64 {
        match &self.kind {
            ProblemKind::Example1 { .. } => self.exact(p),
            ProblemKind::Example2 { lambda } => u0(*lambda, p),
        }
    }
}

/// div( d (d . grad v) ) = (d . grad)(d . grad v) + (div d)(d . grad v),
/// from the direction field d, its Jacobian, and grad/Hessian of v.
fn div_directional_flux(d: Point, jd: &Mat2, grad_v: Point, hess_v: &Mat2) -> f64 {
    let s = d.dot(grad_v);
    // grad s = J_d^T grad_v + H_v d
    let sx = jd[0][0] * grad_v.x + jd[1][0] * grad_v.y + hess_v[0][0] * d.x + hess_v[0][1] * d.y;
    let sy = jd[0][1] * grad_v.x + jd[1][1] * grad_v.y + hess_v[1][0] * d.x + hess_v[1][1] * d.y;
    d.x * sx + d.y * sy + (jd[0][0] + jd[1][1]) * s
}

struct QuadForm {
    g: f64,
    gx: f64,
    gy: f64,
    gxx: f64,
    gyy: f64,
}

fn quad_form(gamma1: f64, gamma2: f64, phi: f64, p: Point) -> QuadForm {
    let (s, c) = phi.sin_cos();
    let big_x = p.x * c + p.y * s;
    let big_y = p.x * s - p.y * c;
    let (a1, a2) = (gamma1 * gamma1, gamma2 * gamma2);
    QuadForm {
        g: a1 * big_x * big_x + a2 * big_y * big_y,
        gx: 2.0 * a1 * big_x * c + 2.0 * a2 * big_y * s,
        gy: 2.0 * a1 * big_x * s - 2.0 * a2 * big_y * c,
        gxx: 2.0 * a1 * c * c + 2.0 * a2 * s * s,
        gyy: 2.0 * a1 * s * s + 2.0 * a2 * c * c,
    }
}

fn psi(lambda: f64, p: Point) -> f64 {
    let pi = std::f64::consts::PI;
    lambda * (2.0 * pi * (p.x - 1.5)).cos() + (pi * p.y).cos()
}

fn u0(lambda: f64, p: Point) -> f64 {
    psi(lambda, p).cos()
}

fn u0_derivs(lambda: f64, p: Point) -> (Point, Mat2) {
    let pi = std::f64::consts::PI;
    let ps = psi(lambda, p);
    let gpsi = Point::new(
        -2.0 * pi * lambda * (2.0 * pi * (p.x - 1.5)).sin(),
        -pi * (pi * p.y).sin(),
    );
    let hpsi_xx = -4.0 * pi * pi * lambda * (2.0 * pi * (p.x - 1.5)).cos();
    let hpsi_yy = -pi * pi * (pi * p.y).cos();
    let (sp, cp) = ps.sin_cos();
    let grad = gpsi.scale(-sp);
    let hess = [
        [-cp * gpsi.x * gpsi.x - sp * hpsi_xx, -cp * gpsi.x * gpsi.y],
        [-cp * gpsi.y * gpsi.x, -cp * gpsi.y * gpsi.y - sp * hpsi_yy],
    ];
    (grad, hess)
}

fn w_term(p: Point) -> f64 {
    let pi = std::f64::consts::PI;
    (2.0 * pi * p.y).sin() * (pi * p.x).sin()
}

fn w_derivs(p: Point) -> (Point, Mat2) {
    let pi = std::f64::consts::PI;
    let w = w_term(p);
    let grad = Point::new(
        pi * (pi * p.x).cos() * (2.0 * pi * p.y).sin(),
        2.0 * pi * (pi * p.x).sin() * (2.0 * pi * p.y).cos(),
    );
    let cross = 2.0 * pi * pi * (pi * p.x).cos() * (2.0 * pi * p.y).cos();
    let hess = [
        [-pi * pi * w, cross],
        [cross, -4.0 * pi * pi * w],
    ];
    (grad, hess)
}
