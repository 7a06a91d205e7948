//! Small fixed-size geometry kit for tetrahedra and their triangular faces.
//!
//! Mesh coordinates are dyadic rationals (integers halved a bounded number of
//! times), so sums, differences and products of coordinates are exact in f64
//! as long as the bisection depth guard in the mesh module holds. The
//! predicates below (`tet_contains`, `triangle_contains`) rely on that: they
//! compare exact determinants against zero, with no epsilon.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// 3D point or vector.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    /// Exact midpoint of two dyadic points.
    pub fn midpoint(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: (self.x + o.x) * 0.5,
            y: (self.y + o.y) * 0.5,
            z: (self.z + o.z) * 0.5,
        }
    }

    /// Coordinate bits as a hashable key. Valid because dyadic coordinates
    /// are produced deterministically and never as -0.0.
    pub fn bits(self) -> [u64; 3] {
        [self.x.to_bits(), self.y.to_bits(), self.z.to_bits()]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Symmetric 3x3 coefficient matrix, row major.
pub type Mat3 = [[f64; 3]; 3];

/// Identity diffusion tensor.
pub const MAT3_IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat3_mul_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

/// Signed determinant of the edge matrix, i.e. six times the signed volume.
/// Exact for dyadic coordinates within the depth guard.
pub fn tet_det(v: &[Vec3; 4]) -> f64 {
    (v[1] - v[0]).dot((v[2] - v[0]).cross(v[3] - v[0]))
}

pub fn tet_volume(v: &[Vec3; 4]) -> f64 {
    tet_det(v).abs() / 6.0
}

pub fn tet_centroid(v: &[Vec3; 4]) -> Vec3 {
    (v[0] + v[1] + v[2] + v[3]) / 4.0
}

/// Barycentric coordinates of `p` with respect to the tetrahedron `v`.
pub fn tet_barycentric(v: &[Vec3; 4], p: Vec3) -> [f64; 4] {
    let d = tet_det(v);
    let mut out = [0.0; 4];
    for i in 0..4 {
        let mut w = *v;
        w[i] = p;
        out[i] = tet_det(&w) / d;
    }
    out
}

/// Gradients of the four barycentric coordinate functions.
pub fn tet_barycentric_gradients(v: &[Vec3; 4]) -> [Vec3; 4] {
    let d = tet_det(v);
    let mut out = [Vec3::ZERO; 4];
    for i in 0..4 {
        // Face opposite vertex i, oriented so the normal points toward v[i].
        let (a, b, c) = match i {
            0 => (v[1], v[3], v[2]),
            1 => (v[0], v[2], v[3]),
            2 => (v[0], v[3], v[1]),
            _ => (v[0], v[1], v[2]),
        };
        out[i] = (b - a).cross(c - a) / d;
    }
    out
}

/// Whether `p` lies in the closed tetrahedron. Exact for dyadic input.
pub fn tet_contains(v: &[Vec3; 4], p: Vec3) -> bool {
    let d = tet_det(v);
    let sign = if d > 0.0 { 1.0 } else { -1.0 };
    for i in 0..4 {
        let mut w = *v;
        w[i] = p;
        if sign * tet_det(&w) < 0.0 {
            return false;
        }
    }
    true
}

/// Twice the area vector of a triangle; orientation follows vertex order.
pub fn triangle_cross(a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    (b - a).cross(c - a)
}

pub fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    triangle_cross(a, b, c).norm() * 0.5
}

pub fn triangle_centroid(a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    (a + b + c) / 3.0
}

/// Whether `p` lies in the closed triangle `(a, b, c)` embedded in 3D.
/// Exact for dyadic input: coplanarity and the three edge half-plane tests
/// are determinant sign checks.
pub fn triangle_contains(a: Vec3, b: Vec3, c: Vec3, p: Vec3) -> bool {
    let n = triangle_cross(a, b, c);
    if (p - a).dot(n) != 0.0 {
        return false;
    }
    let ea = (b - a).cross(p - a).dot(n);
    let eb = (c - b).cross(p - b).dot(n);
    let ec = (a - c).cross(p - c).dot(n);
    ea >= 0.0 && eb >= 0.0 && ec >= 0.0
}

/// Whether `p` lies strictly inside the open segment `(a, b)`.
/// Exact for dyadic input.
pub fn segment_contains_interior(a: Vec3, b: Vec3, p: Vec3) -> bool {
    if p == a || p == b {
        return false;
    }
    let d = b - a;
    let r = p - a;
    if d.cross(r) != Vec3::ZERO {
        return false;
    }
    let t = r.dot(d);
    t > 0.0 && t < d.dot(d)
}
