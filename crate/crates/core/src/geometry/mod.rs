//! Geometric primitives for the randomized sphere-separator construction:
//! stereographic projection between `R^d` and the unit sphere `S^d`,
//! centerpoints via linear programming on random subsets, rotations to the
//! pole, dilatation maps, random great circles, and the closed-form
//! back-projection of a circle on `S^d` to a sphere (or hyperplane) in `R^d`.

mod centerpoint;

pub use centerpoint::{centerpoint, default_sample_size, CenterpointConfig};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A point in `R^d` or `R^{d+1}`; the ambient dimension is checked at call sites.
pub type Point = Vec<f64>;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A tensor's graphical representation: a ball in `R^d` around its position.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSphere {
    pub center: Point,
    pub radius: f64,
    pub tensor_id: usize,
}

impl EmbeddedSphere {
    pub fn new(center: Point, radius: f64, tensor_id: usize) -> Self {
        assert!(radius > 0.0, "embedded sphere radius must be positive");
        EmbeddedSphere {
            center,
            radius,
            tensor_id,
        }
    }
}

/// A candidate separating surface in `R^d`. The hyperplane variant is the
/// degenerate limit of a sphere through the projection's north pole.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparatingSphere {
    Sphere { center: Point, radius: f64 },
    Hyperplane { normal: Point, offset: f64 },
}

impl SeparatingSphere {
    /// Signed distance of `p` to the surface: negative inside a sphere,
    /// negative on the negative side of a hyperplane.
    pub fn signed_distance(&self, p: &[f64]) -> f64 {
        match self {
            SeparatingSphere::Sphere { center, radius } => dist(p, center) - radius,
            SeparatingSphere::Hyperplane { normal, offset } => dot(normal, p) - offset,
        }
    }
}

/// A great circle on `S^d`, stored as the unit normal of the hyperplane
/// through the origin that cuts it out.
#[derive(Debug, Clone, PartialEq)]
pub struct GreatCircle {
    pub normal: Point,
}

/// Stereographic projection `R^d -> S^d` with the north pole
/// `(0, ..., 0, 1)` as the missing point: `(2q, |q|^2 - 1) / (|q|^2 + 1)`.
pub fn stereo_project(p: &[f64]) -> Point {
    let n2 = norm_sq(p);
    let denom = n2 + 1.0;
    let mut out = Vec::with_capacity(p.len() + 1);
    for &x in p {
        out.push(2.0 * x / denom);
    }
    out.push((n2 - 1.0) / denom);
    out
}

/// Inverse stereographic projection. Fails on the north pole.
pub fn stereo_unproject(s: &[f64]) -> Result<Point> {
    let w = *s.last().expect("nonempty point");
    if w >= 1.0 - 1e-12 {
        return Err(Error::PointAtInfinity);
    }
    Ok(s[..s.len() - 1].iter().map(|&u| u / (1.0 - w)).collect())
}

/// Orthogonal matrix mapping `c` to `(0, ..., 0, |c|)`. The identity for
/// `c = 0` or `c` already at the pole; a Householder reflection otherwise.
pub fn rotation_to_pole(c: &[f64]) -> DMatrix<f64> {
    let dim = c.len();
    let nc = norm(c);
    if nc < 1e-300 {
        return DMatrix::identity(dim, dim);
    }
    // u = c/|c| - e_last; H = I - 2 u u^T / |u|^2 reflects c/|c| onto e_last.
    let mut u: Vec<f64> = c.iter().map(|&x| x / nc).collect();
    u[dim - 1] -= 1.0;
    let u2 = norm_sq(&u);
    if u2 < 1e-30 {
        return DMatrix::identity(dim, dim);
    }
    let mut m = DMatrix::identity(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] -= 2.0 * u[i] * u[j] / u2;
        }
    }
    m
}

/// Dilatation map `D_alpha = project . (alpha * id) . unproject` acting on
/// `S^d`. The north pole is a fixed point (the continuous extension).
pub fn dilate(alpha: f64, s: &[f64]) -> Point {
    assert!(alpha > 0.0, "dilatation factor must be positive");
    match stereo_unproject(s) {
        Ok(q) => {
            let scaled: Vec<f64> = q.iter().map(|&x| alpha * x).collect();
            stereo_project(&scaled)
        }
        Err(_) => s.to_vec(),
    }
}

/// Uniformly random great circle on `S^d` (`ambient_dim = d + 1`):
/// a normalized Gaussian normal vector.
pub fn sample_great_circle<R: Rng + ?Sized>(rng: &mut R, ambient_dim: usize) -> GreatCircle {
    loop {
        let v: Vec<f64> = (0..ambient_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = norm(&v);
        if n > 1e-12 {
            return GreatCircle {
                normal: v.iter().map(|&x| x / n).collect(),
            };
        }
    }
}

/// A circle on `S^d`: the intersection of the sphere with the affine
/// hyperplane `{x : m . x = h}`, `|m| = 1`, `|h| < 1`.
#[derive(Debug, Clone)]
struct SphereCircle {
    m: Vec<f64>,
    h: f64,
}

/// Tolerance below which a back-projected circle is treated as passing
/// through the north pole, yielding a hyperplane instead of a sphere.
const POLE_TOL: f64 = 1e-9;

/// Inverse stereographic image of a circle on `S^d`: a sphere in `R^d`, or a
/// hyperplane when the circle passes through the north pole.
fn unproject_circle(c: &SphereCircle) -> SeparatingSphere {
    let dim = c.m.len() - 1;
    let m_u = &c.m[..dim];
    let m_w = c.m[dim];
    let denom = m_w - c.h;
    if denom.abs() <= POLE_TOL {
        let nu = norm(m_u);
        // m_u = 0 with m_w = h would mean the circle degenerates to the pole
        // itself; callers never produce that.
        let normal: Vec<f64> = m_u.iter().map(|&x| x / nu).collect();
        let offset = (m_w + c.h) / (2.0 * nu);
        SeparatingSphere::Hyperplane { normal, offset }
    } else {
        let center: Vec<f64> = m_u.iter().map(|&x| -x / denom).collect();
        let radius = (1.0 - c.h * c.h).max(0.0).sqrt() / denom.abs();
        SeparatingSphere::Sphere { center, radius }
    }
}

/// Stereographic image of a sphere or hyperplane in `R^d`: a circle on `S^d`.
fn project_surface(surface: &SeparatingSphere) -> SphereCircle {
    match surface {
        SeparatingSphere::Sphere { center, radius } => {
            let c2 = norm_sq(center);
            let mut m: Vec<f64> = center.iter().map(|&x| -x).collect();
            m.push((1.0 - c2 + radius * radius) / 2.0);
            let h = -(1.0 + c2 - radius * radius) / 2.0;
            let n = norm(&m);
            SphereCircle {
                m: m.iter().map(|&x| x / n).collect(),
                h: h / n,
            }
        }
        SeparatingSphere::Hyperplane { normal, offset } => {
            let mut m = normal.clone();
            m.push(*offset);
            let n = norm(&m);
            SphereCircle {
                m: m.iter().map(|&x| x / n).collect(),
                h: offset / n,
            }
        }
    }
}

fn scale_surface(surface: &SeparatingSphere, beta: f64) -> SeparatingSphere {
    match surface {
        SeparatingSphere::Sphere { center, radius } => SeparatingSphere::Sphere {
            center: center.iter().map(|&x| beta * x).collect(),
            radius: beta * radius,
        },
        SeparatingSphere::Hyperplane { normal, offset } => SeparatingSphere::Hyperplane {
            normal: normal.clone(),
            offset: beta * offset,
        },
    }
}

/// Closed-form back-projection of a great circle: computes
/// `unproject . R^T . D_alpha^{-1}` applied to `circle`, expressed as a
/// sphere or hyperplane in `R^d`.
pub fn circle_to_sphere(
    circle: &GreatCircle,
    rotation: &DMatrix<f64>,
    alpha: f64,
) -> SeparatingSphere {
    // D_alpha^{-1} = D_{1/alpha} = project . (1/alpha) . unproject, so the
    // whole inverse transform factors through closed-form surface maps.
    let start = SphereCircle {
        m: circle.normal.clone(),
        h: 0.0,
    };
    let in_plane = unproject_circle(&start);
    let dilated = scale_surface(&in_plane, 1.0 / alpha);
    let on_sphere = project_surface(&dilated);
    let dim = on_sphere.m.len();
    let mut rotated = vec![0.0; dim];
    // m -> R^T m
    for j in 0..dim {
        let mut acc = 0.0;
        for i in 0..dim {
            acc += rotation[(i, j)] * on_sphere.m[i];
        }
        rotated[j] = acc;
    }
    unproject_circle(&SphereCircle {
        m: rotated,
        h: on_sphere.h,
    })
}
