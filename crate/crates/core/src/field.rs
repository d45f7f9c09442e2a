//! Anisotropy field: unit direction b, its divergence and Jacobian, and the
//! diffusion tensor A = (1/eps) b b^T + alpha b_perp b_perp^T.
//!
//! The direction is stored through its components rather than an angle, so the
//! tensor is evaluated without atan2 branch cuts.

use crate::error::FieldError;
use crate::geom::{add_scaled_outer, Mat2, Point};

pub const DEFAULT_DELTA_REG: f64 = 1e-16;

/// Where the divergence of b jumps (or is otherwise non-smooth) and must be
/// resolved by extra quadrature points.
#[derive(Clone, Debug)]
pub enum DiscontinuityLocus {
    None,
    /// Ray from the origin at the given angle to the x axis.
    Ray { angle: f64 },
}

#[derive(Clone, Debug)]
pub(crate) enum FieldKind {
    /// Constant direction; for tests.
    Uniform { b: Point },
    /// Field tangent to the level sets of the rotated quadratic form
    /// g = gamma1^2 X^2 + gamma2^2 Y^2 with X, Y the frame rotated by phi.
    Ellipse { gamma1: f64, gamma2: f64, phi: f64 },
    /// Two-island field B = (-pi sin(pi y), 2 lambda pi sin(2 pi (x - 3/2))).
    TwoIslands { lambda: f64 },
}

/// The anisotropy field specification.
#[derive(Clone, Debug)]
pub struct FieldSpec {
    pub epsilon: f64,
    pub alpha: f64,
    pub delta_reg: f64,
    pub singular_points: Vec<Point>,
    pub locus: DiscontinuityLocus,
    pub(crate) kind: FieldKind,
}

/// First derivatives of the quadratic form behind the ellipse field.
struct EllipseDerivs {
    gx: f64,
    gy: f64,
    gxx: f64,
    gxy: f64,
    gyy: f64,
    g: f64,
}

impl FieldSpec {
    pub fn uniform(b: Point, epsilon: f64, alpha: f64) -> FieldSpec {
        let n = b.norm();
        FieldSpec {
            epsilon,
            alpha,
            delta_reg: DEFAULT_DELTA_REG,
            singular_points: Vec::new(),
            locus: DiscontinuityLocus::None,
            kind: FieldKind::Uniform {
                b: b.scale(1.0 / n),
            },
        }
    }

    pub(crate) fn ellipse(
        gamma1: f64,
        gamma2: f64,
        phi: f64,
        epsilon: f64,
        alpha: f64,
    ) -> FieldSpec {
        let locus = if (gamma1 - gamma2).abs() < 1e-15 {
            DiscontinuityLocus::None
        } else {
            DiscontinuityLocus::Ray { angle: phi }
        };
        FieldSpec {
            epsilon,
            alpha,
            delta_reg: DEFAULT_DELTA_REG,
            singular_points: vec![Point::new(0.0, 0.0)],
            locus,
            kind: FieldKind::Ellipse {
                gamma1,
                gamma2,
                phi,
            },
        }
    }

    pub(crate) fn two_islands(lambda: f64, epsilon: f64, alpha: f64) -> FieldSpec {
        FieldSpec {
            epsilon,
            alpha,
            delta_reg: DEFAULT_DELTA_REG,
            singular_points: vec![
                Point::new(-1.0, 0.0),
                Point::new(-0.5, 0.0),
                Point::new(0.0, 0.0),
                Point::new(0.5, 0.0),
                Point::new(1.0, 0.0),
            ],
            locus: DiscontinuityLocus::None,
            kind: FieldKind::TwoIslands { lambda },
        }
    }

    fn ellipse_derivs(gamma1: f64, gamma2: f64, phi: f64, p: Point) -> EllipseDerivs {
        let (s, c) = phi.sin_cos();
        let big_x = p.x * c + p.y * s;
        let big_y = p.x * s - p.y * c;
        let (a1, a2) = (gamma1 * gamma1, gamma2 * gamma2);
        EllipseDerivs {
            gx: 2.0 * a1 * big_x * c + 2.0 * a2 * big_y * s,
            gy: 2.0 * a1 * big_x * s - 2.0 * a2 * big_y * c,
            gxx: 2.0 * a1 * c * c + 2.0 * a2 * s * s,
            gxy: 2.0 * c * s * (a1 - a2),
            gyy: 2.0 * a1 * s * s + 2.0 * a2 * c * c,
            g: a1 * big_x * big_x + a2 * big_y * big_y,
        }
    }

    /// Raw (un-normalized) direction vector. For gradient-defined fields this
    /// is the rotated gradient (-u_y, u_x) of the stream function.
    fn raw_field(&self, p: Point) -> Point {
        match &self.kind {
            FieldKind::Uniform { b } => *b,
            FieldKind::Ellipse {
                gamma1,
                gamma2,
                phi,
            } => {
                // u = 1 - g^{3/2}, so (-u_y, u_x) = (3/2) sqrt(g) (g_y, -g_x).
                let d = Self::ellipse_derivs(*gamma1, *gamma2, *phi, p);
                let f = 1.5 * d.g.sqrt();
                Point::new(f * d.gy, -f * d.gx)
            }
            FieldKind::TwoIslands { lambda } => {
                let pi = std::f64::consts::PI;
                Point::new(
                    -pi * (pi * p.y).sin(),
                    2.0 * lambda * pi * (2.0 * pi * (p.x - 1.5)).sin(),
                )
            }
        }
    }

    /// The regularized unit direction b(p). Norm is 1 away from singular
    /// points and strictly below 1 close to them.
    pub fn unit_field(&self, p: Point) -> Point {
        let v = self.raw_field(p);
        let m = (v.x * v.x + v.y * v.y + self.delta_reg).sqrt();
        if m == 0.0 {
            return Point::new(0.0, 0.0);
        }
        v.scale(1.0 / m)
    }

    /// Divergence of the unit field, computed in closed form.
    pub fn div_b(&self, p: Point) -> f64 {
        match &self.kind {
            FieldKind::Uniform { .. } => 0.0,
            FieldKind::Ellipse {
                gamma1,
                gamma2,
                phi,
            } => {
                // b = (g_y, -g_x)/|grad g|, so
                // div b = [(g_x^2 - g_y^2) g_xy + g_x g_y (g_yy - g_xx)] / |grad g|^3.
                let d = Self::ellipse_derivs(*gamma1, *gamma2, *phi, p);
                let r2 = d.gx * d.gx + d.gy * d.gy;
                if r2 < 1e-280 {
                    return 0.0;
                }
                ((d.gx * d.gx - d.gy * d.gy) * d.gxy + d.gx * d.gy * (d.gyy - d.gxx))
                    / (r2 * r2.sqrt())
            }
            FieldKind::TwoIslands { .. } => {
                let (b, j) = self.field_with_jacobian(p);
                let _ = b;
                j[0][0] + j[1][1]
            }
        }
    }

    /// b together with its Jacobian J[i][j] = d b_i / d x_j (regularized).
    pub fn field_with_jacobian(&self, p: Point) -> (Point, Mat2) {
        match &self.kind {
            FieldKind::Uniform { b } => (*b, [[0.0; 2]; 2]),
            FieldKind::TwoIslands { lambda } => {
                let pi = std::f64::consts::PI;
                let raw = self.raw_field(p);
                // Jacobian of the raw field B.
                let jb = [
                    [0.0, -pi * pi * (pi * p.y).cos()],
                    [
                        4.0 * lambda * pi * pi * (2.0 * pi * (p.x - 1.5)).cos(),
                        0.0,
                    ],
                ];
                let m = (raw.x * raw.x + raw.y * raw.y + self.delta_reg).sqrt();
                // grad m = J_B^T B / m
                let gm = Point::new(
                    (jb[0][0] * raw.x + jb[1][0] * raw.y) / m,
                    (jb[0][1] * raw.x + jb[1][1] * raw.y) / m,
                );
                let b = raw.scale(1.0 / m);
                let m2 = m * m;
                let j = [
                    [
                        jb[0][0] / m - raw.x * gm.x / m2,
                        jb[0][1] / m - raw.x * gm.y / m2,
                    ],
                    [
                        jb[1][0] / m - raw.y * gm.x / m2,
                        jb[1][1] / m - raw.y * gm.y / m2,
                    ],
                ];
                (b, j)
            }
            FieldKind::Ellipse { .. } => {
                // Not needed analytically for the ellipse sources; fall back to
                // central differences of the regularized unit field.
                let h = 1e-6;
                let bx1 = self.unit_field(Point::new(p.x + h, p.y));
                let bx0 = self.unit_field(Point::new(p.x - h, p.y));
                let by1 = self.unit_field(Point::new(p.x, p.y + h));
                let by0 = self.unit_field(Point::new(p.x, p.y - h));
                let j = [
                    [(bx1.x - bx0.x) / (2.0 * h), (by1.x - by0.x) / (2.0 * h)],
                    [(bx1.y - bx0.y) / (2.0 * h), (by1.y - by0.y) / (2.0 * h)],
                ];
                (self.unit_field(p), j)
            }
        }
    }

    pub fn is_singular(&self, p: Point) -> bool {
        self.singular_points.iter().any(|s| s.dist(p) < 1e-12)
    }

    /// Full diffusion tensor A = (1/eps) b b^T + alpha b_perp b_perp^T.
    pub fn diffusion_tensor(&self, p: Point) -> Result<Mat2, FieldError> {
        if self.delta_reg == 0.0 && self.is_singular(p) {
            return Err(FieldError::SingularPoint { x: p.x, y: p.y });
        }
        let b = self.unit_field(p);
        let mut a = [[0.0; 2]; 2];
        add_scaled_outer(&mut a, b, 1.0 / self.epsilon);
        add_scaled_outer(&mut a, b.perp(), self.alpha);
        Ok(a)
    }

    /// Perpendicular part alpha b_perp b_perp^T only (no 1/eps).
    pub fn perp_tensor(&self, p: Point) -> Mat2 {
        let b = self.unit_field(p);
        let mut a = [[0.0; 2]; 2];
        add_scaled_outer(&mut a, b.perp(), self.alpha);
        a
    }
}

impl DiscontinuityLocus {
    /// Signed side of the locus line, used for crossing detection.
    /// Returns None if the locus is empty or the point is not near the
    /// relevant half (the ray side).
    pub fn side(&self, p: Point) -> Option<f64> {
        match self {
            DiscontinuityLocus::None => None,
            DiscontinuityLocus::Ray { angle } => {
                let (s, c) = angle.sin_cos();
                Some(p.x * s - p.y * c)
            }
        }
    }

    /// Whether the given point (on the locus line) lies on the ray itself.
    pub fn on_positive_ray(&self, p: Point) -> bool {
        match self {
            DiscontinuityLocus::None => false,
            DiscontinuityLocus::Ray { angle } => {
                let (s, c) = angle.sin_cos();
                p.x * c + p.y * s > 1e-12
            }
        }
    }
}
