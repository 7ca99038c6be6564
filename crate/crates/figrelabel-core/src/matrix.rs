//! Affine transforms in the PostScript row convention.
//!
//! A matrix `[a b c d tx ty]` maps a user-space point to device space:
//!
//! ```text
//! (x', y') = (a*x + c*y + tx, b*x + d*y + ty)
//! ```

use crate::math;

/// A point or delta in either user or device space, in big points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    /// Bit-level equality, used where results must match exactly.
    pub fn bits_eq(&self, other: &Point) -> bool {
        self.x.to_bits() == other.x.to_bits() && self.y.to_bits() == other.y.to_bits()
    }
}

/// Determinants smaller than this flag the matrix as singular.
pub const SINGULARITY_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for Matrix {
    fn default() -> Matrix {
        Matrix::IDENTITY
    }
}

impl Matrix {
    pub const IDENTITY: Matrix = Matrix {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64, tx: f64, ty: f64) -> Matrix {
        Matrix { a, b, c, d, tx, ty }
    }

    pub fn translation(tx: f64, ty: f64) -> Matrix {
        Matrix::new(1.0, 0.0, 0.0, 1.0, tx, ty)
    }

    pub fn scaling(sx: f64, sy: f64) -> Matrix {
        Matrix::new(sx, 0.0, 0.0, sy, 0.0, 0.0)
    }

    pub fn rotation_degrees(theta: f64) -> Matrix {
        let (s, c) = (math::sin_deg(theta), math::cos_deg(theta));
        Matrix::new(c, s, -s, c, 0.0, 0.0)
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn is_singular(&self) -> bool {
        math::abs(self.determinant()) <= SINGULARITY_EPSILON
    }

    /// Full affine map of a point, translation included.
    pub fn transform_point(&self, p: Point) -> Point {
        Point::new(
            self.a * p.x + self.c * p.y + self.tx,
            self.b * p.x + self.d * p.y + self.ty,
        )
    }

    /// Linear part only; the PostScript `dtransform` of a distance vector.
    pub fn transform_delta(&self, d: Point) -> Point {
        Point::new(self.a * d.x + self.c * d.y, self.b * d.x + self.d * d.y)
    }

    /// Inverse of the full map. Fails on singular matrices.
    pub fn inverse_transform_point(&self, p: Point) -> Option<Point> {
        let det = self.determinant();
        if math::abs(det) <= SINGULARITY_EPSILON {
            return None;
        }
        let x = p.x - self.tx;
        let y = p.y - self.ty;
        Some(Point::new(
            (self.d * x - self.c * y) / det,
            (self.a * y - self.b * x) / det,
        ))
    }

    /// Inverse of the linear part: the user-space delta whose image under
    /// `[a c; b d]` equals `d`. Translation terms never participate.
    pub fn inverse_transform_delta(&self, d: Point) -> Option<Point> {
        let det = self.determinant();
        if math::abs(det) <= SINGULARITY_EPSILON {
            return None;
        }
        Some(Point::new(
            (self.d * d.x - self.c * d.y) / det,
            (self.a * d.y - self.b * d.x) / det,
        ))
    }
}

/// Compose two transforms: the result applies `inner` first, then `outer`.
///
/// This is the PostScript `concat` rule: after `m concat` the new CTM is
/// `m x CTM`, i.e. `concat_matrix(ctm, m)`.
pub fn concat_matrix(outer: &Matrix, inner: &Matrix) -> Matrix {
    Matrix {
        a: inner.a * outer.a + inner.b * outer.c,
        b: inner.a * outer.b + inner.b * outer.d,
        c: inner.c * outer.a + inner.d * outer.c,
        d: inner.c * outer.b + inner.d * outer.d,
        tx: inner.tx * outer.a + inner.ty * outer.c + outer.tx,
        ty: inner.tx * outer.b + inner.ty * outer.d + outer.ty,
    }
}
