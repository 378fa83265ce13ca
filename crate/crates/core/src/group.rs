//! Group law of the first Heisenberg group, its isometries and dilations.
//!
//! Points are written `(x, y, t)` with horizontal part `z = x + iy`. The
//! product is
//!
//! ```text
//! (x, y, t) · (x', y', t') = (x + x', y + y', t + t' + 2(x'y − xy'))
//! ```
//!
//! so that `X = ∂x + 2y∂t` and `Y = ∂y − 2x∂t` are left invariant.

use std::fmt;
use std::ops::Mul;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// A point of the Heisenberg group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T = f64> {
    pub x: T,
    pub y: T,
    pub t: T,
}

impl<T: Scalar> Point<T> {
    #[inline]
    pub fn new(x: T, y: T, t: T) -> Self {
        Point { x, y, t }
    }

    /// Like [`Point::new`] but rejects non-finite coordinates.
    pub fn try_new(x: T, y: T, t: T) -> Result<Self> {
        if x.is_finite() && y.is_finite() && t.is_finite() {
            Ok(Point { x, y, t })
        } else {
            invalid(format!("non-finite coordinates ({x}, {y}, {t})"))
        }
    }

    #[inline]
    pub fn origin() -> Self {
        Point::new(T::zero(), T::zero(), T::zero())
    }

    /// Horizontal point `(x, y, 0)`.
    #[inline]
    pub fn horizontal(x: T, y: T) -> Self {
        Point::new(x, y, T::zero())
    }

    /// Point `(0, 0, t)` on the vertical axis.
    #[inline]
    pub fn vertical(t: T) -> Self {
        Point::new(T::zero(), T::zero(), t)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.t.is_finite()
    }

    /// Euclidean modulus `|z|` of the horizontal part.
    #[inline]
    pub fn z_norm(&self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn is_origin(&self) -> bool {
        self.x == T::zero() && self.y == T::zero() && self.t == T::zero()
    }

    #[inline]
    pub fn mul(&self, q: &Point<T>) -> Point<T> {
        multiply(self, q)
    }

    #[inline]
    pub fn inv(&self) -> Point<T> {
        inverse(self)
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.t]
    }

    pub fn cast<U: Scalar>(self) -> Point<U> {
        Point::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()), U::lit(self.t.to_f64_lossy()))
    }
}

impl<T: Scalar> From<[T; 3]> for Point<T> {
    fn from(a: [T; 3]) -> Self {
        Point::new(a[0], a[1], a[2])
    }
}

impl<T: Scalar> Mul for Point<T> {
    type Output = Point<T>;

    fn mul(self, rhs: Point<T>) -> Point<T> {
        multiply(&self, &rhs)
    }
}

impl<T: Scalar> fmt::Display for Point<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.t)
    }
}

// Points travel as bare JSON arrays `[x, y, t]`.
impl<T: Scalar + Serialize> Serialize for Point<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(3)?;
        tup.serialize_element(&self.x)?;
        tup.serialize_element(&self.y)?;
        tup.serialize_element(&self.t)?;
        tup.end()
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Point<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PointVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Scalar + Deserialize<'de>> Visitor<'de> for PointVisitor<T> {
            type Value = Point<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array [x, y, t]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Point<T>, A::Error> {
                let x = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let y = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let t = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(2, &self))?;
                if seq.next_element::<T>()?.is_some() {
                    return Err(de::Error::invalid_length(4, &self));
                }
                Point::try_new(x, y, t).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_tuple(3, PointVisitor(std::marker::PhantomData))
    }
}

/// Group product `p · q`.
#[inline]
pub fn multiply<T: Scalar>(p: &Point<T>, q: &Point<T>) -> Point<T> {
    let two = T::lit(2.0);
    Point::new(p.x + q.x, p.y + q.y, p.t + q.t + two * (q.x * p.y - p.x * q.y))
}

#[inline]
pub fn inverse<T: Scalar>(p: &Point<T>) -> Point<T> {
    Point::new(-p.x, -p.y, -p.t)
}

/// Anisotropic dilation `δ_λ(z; t) = (λz; λ²t)`.
pub fn dilate<T: Scalar>(lambda: T, p: &Point<T>) -> Result<Point<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return invalid(format!("dilation factor must be positive, got {lambda}"));
    }
    Ok(Point::new(lambda * p.x, lambda * p.y, lambda * lambda * p.t))
}

/// Rotation `R_θ(z; t) = (e^{iθ}z; t)` about the vertical axis.
#[inline]
pub fn rotate<T: Scalar>(theta: T, p: &Point<T>) -> Point<T> {
    let (s, c) = theta.sin_cos();
    Point::new(c * p.x - s * p.y, s * p.x + c * p.y, p.t)
}

/// The reflection `J(z; t) = (z̄; −t)`.
#[inline]
pub fn reflect<T: Scalar>(p: &Point<T>) -> Point<T> {
    Point::new(p.x, -p.y, -p.t)
}

/// Gauge quasi-distance `|z − z'| + |t' − t − 2 Im(z z̄')|^{1/2}`.
///
/// Globally equivalent to the control distance but not equal to it; use it
/// for bounding boxes and brackets only.
pub fn gauge_distance<T: Scalar>(p: &Point<T>, q: &Point<T>) -> T {
    let d = multiply(&inverse(p), q);
    d.z_norm() + d.t.abs().sqrt()
}

/// Reduce an angle to `[0, 2π)`.
pub fn normalize_angle<T: Scalar>(theta: T) -> T {
    let tau = T::TAU();
    let mut a = theta % tau;
    if a < T::zero() {
        a = a + tau;
    }
    // `a + tau` can round up to exactly tau for tiny negative inputs.
    if a >= tau {
        a = T::zero();
    }
    a
}

/// An isometry in the canonical form `L_w ∘ R_θ ∘ J^m`.
///
/// Every isometry of the group has a unique representation of this shape
/// with `θ ∈ [0, 2π)` and `m ∈ {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct IsometryDescriptor<T = f64> {
    pub w: Point<T>,
    pub theta: T,
    pub m: u8,
}

impl<T: Scalar> IsometryDescriptor<T> {
    pub fn new(w: Point<T>, theta: T, m: u8) -> Result<Self> {
        if m > 1 {
            return invalid(format!("reflection exponent must be 0 or 1, got {m}"));
        }
        if !theta.is_finite() || !w.is_finite() {
            return invalid("isometry parameters must be finite");
        }
        Ok(IsometryDescriptor { w, theta: normalize_angle(theta), m })
    }

    pub fn identity() -> Self {
        IsometryDescriptor { w: Point::origin(), theta: T::zero(), m: 0 }
    }

    pub fn rotation(theta: T) -> Self {
        IsometryDescriptor { w: Point::origin(), theta: normalize_angle(theta), m: 0 }
    }

    pub fn translation(w: Point<T>) -> Self {
        IsometryDescriptor { w, theta: T::zero(), m: 0 }
    }

    pub fn reflection() -> Self {
        IsometryDescriptor { w: Point::origin(), theta: T::zero(), m: 1 }
    }

    /// The fixed-origin part `R_θ ∘ J^m`.
    pub fn linear_part(&self) -> Self {
        IsometryDescriptor { w: Point::origin(), theta: self.theta, m: self.m }
    }

    /// `L_w(R_θ(J^m(p)))`.
    pub fn apply(&self, p: &Point<T>) -> Point<T> {
        let q = if self.m == 1 { reflect(p) } else { *p };
        multiply(&self.w, &rotate(self.theta, &q))
    }

    /// Canonical form of `self ∘ other`.
    ///
    /// Uses that `R_θ` and `J` are group automorphisms and `J R_θ = R_{−θ} J`.
    pub fn compose(&self, other: &Self) -> Self {
        let moved = self.linear_part().apply(&other.w);
        let theta = if self.m == 1 { self.theta - other.theta } else { self.theta + other.theta };
        IsometryDescriptor { w: multiply(&self.w, &moved), theta: normalize_angle(theta), m: (self.m + other.m) % 2 }
    }

    pub fn inverse(&self) -> Self {
        // (L_w R_θ J^m)^{-1} = J^m R_{−θ} L_{w^{-1}}
        let back = IsometryDescriptor { w: Point::origin(), theta: normalize_angle(-self.theta), m: 0 };
        let mut w = back.apply(&inverse(&self.w));
        if self.m == 1 {
            w = reflect(&w);
        }
        let theta = if self.m == 1 { self.theta } else { -self.theta };
        IsometryDescriptor { w, theta: normalize_angle(theta), m: self.m }
    }

    /// 2×2 matrix of the horizontal action, row major.
    pub fn horizontal_matrix(&self) -> [[T; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        if self.m == 1 {
            // R_θ ∘ conj
            [[c, s], [s, -c]]
        } else {
            [[c, -s], [s, c]]
        }
    }
}

impl<T: Scalar> Default for IsometryDescriptor<T> {
    fn default() -> Self {
        Self::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: Point, b: Point, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && (a.t - b.t).abs() <= tol
    }

    #[test]
    fn product_examples() {
        let p = Point::new(1.0, 0.0, 0.0) * Point::new(0.0, 1.0, 0.0);
        assert_eq!(p, Point::new(1.0, 1.0, -2.0));
        let q = Point::new(0.7, -3.0, 2.5);
        assert_eq!(Point::origin() * q, q);
        let r = Point::new(0.3, -1.2, 5.0);
        assert_eq!(r * r.inv(), Point::origin());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse(&Point::new(1.0, 2.0, 3.0)), Point::new(-1.0, -2.0, -3.0));
        assert_eq!(inverse(&Point::<f64>::origin()), Point::origin());
    }

    #[test]
    fn isometry_examples() {
        let quarter = IsometryDescriptor::rotation(FRAC_PI_2);
        assert!(close(quarter.apply(&Point::new(1.0, 0.0, 0.0)), Point::new(0.0, 1.0, 0.0), 1e-15));
        let j = IsometryDescriptor::reflection();
        assert_eq!(j.apply(&Point::new(1.0, 2.0, 3.0)), Point::new(1.0, -2.0, -3.0));
        let up = IsometryDescriptor::translation(Point::vertical(5.0));
        assert_eq!(up.apply(&Point::new(1.0, 1.0, 0.0)), Point::new(1.0, 1.0, 5.0));
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(dilate(2.0, &Point::new(1.0, 0.0, 1.0)).unwrap(), Point::new(2.0, 0.0, 4.0));
        let p = Point::new(0.4, -0.1, 3.0);
        assert_eq!(dilate(1.0, &p).unwrap(), p);
        let eps = 1e-3;
        let q = dilate(1.0 + eps, &Point::vertical(1.0)).unwrap();
        assert_eq!(q, Point::vertical((1.0 + eps) * (1.0 + eps)));
        assert!(dilate(0.0, &p).is_err());
        assert!(dilate(-1.0, &p).is_err());
    }

    #[test]
    fn gauge_examples() {
        let o = Point::origin();
        assert_eq!(gauge_distance(&o, &Point::new(1.0, 0.0, 0.0)), 1.0);
        assert_eq!(gauge_distance(&o, &Point::vertical(4.0)), 2.0);
        // hand evaluation: |z − z'| = √2, t' − t − 2 Im(z z̄') = 2
        let g = gauge_distance(&Point::new(1.0, 0.0, 0.0), &Point::new(0.0, 1.0, 0.0));
        assert_abs_diff_eq!(g, 2.0 * 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn compose_matches_sequential_application() {
        let a = IsometryDescriptor::new(Point::new(0.3, -1.0, 2.0), 1.1, 1).unwrap();
        let b = IsometryDescriptor::new(Point::new(-0.5, 0.25, -0.7), 4.0, 1).unwrap();
        let c = IsometryDescriptor::new(Point::new(2.0, 0.1, 0.0), 0.3, 0).unwrap();
        let p = Point::new(0.9, -0.4, 1.3);
        for (g, h) in [(a, b), (b, c), (c, a), (a, a)] {
            let direct = g.apply(&h.apply(&p));
            assert!(close(g.compose(&h).apply(&p), direct, 1e-12));
        }
    }

    #[test]
    fn inverse_isometry_undoes() {
        for m in 0..2 {
            let g = IsometryDescriptor::new(Point::new(0.3, -1.0, 2.0), 5.5, m).unwrap();
            let p = Point::new(-1.5, 0.2, 0.8);
            assert!(close(g.inverse().apply(&g.apply(&p)), p, 1e-12));
            let id = g.compose(&g.inverse());
            assert!(close(id.w, Point::origin(), 1e-12));
            assert_eq!(id.m, 0);
        }
    }

    #[test]
    fn horizontal_matrix_agrees_with_action() {
        for m in 0..2 {
            let g = IsometryDescriptor::new(Point::origin(), 2.2, m).unwrap();
            let a = g.horizontal_matrix();
            let q = g.apply(&Point::new(0.6, -0.8, 0.0));
            assert_abs_diff_eq!(q.x, a[0][0] * 0.6 + a[0][1] * -0.8, epsilon = 1e-15);
            assert_abs_diff_eq!(q.y, a[1][0] * 0.6 + a[1][1] * -0.8, epsilon = 1e-15);
        }
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(normalize_angle(0.0), 0.0);
        assert_abs_diff_eq!(normalize_angle(-FRAC_PI_2), 1.5 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(normalize_angle(5.0 * PI), PI, epsilon = 1e-14);
        let tiny = normalize_angle(-1e-300);
        assert!((0.0..2.0 * PI).contains(&tiny));
    }

    #[test]
    fn json_forms() {
        let p = Point::new(1.0, -2.0, 0.5);
        assert_eq!(serde_json::to_string(&p).unwrap(), "[1.0,-2.0,0.5]");
        let back: Point = serde_json::from_str("[1, -2, 0.5]").unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Point>("[1, 2]").is_err());
        let g = IsometryDescriptor::new(p, 0.25, 1).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"w":[1.0,-2.0,0.5],"theta":0.25,"m":1}"#);
        let h: IsometryDescriptor = serde_json::from_str(&s).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn single_precision_instantiation() {
        let p: Point<f32> = Point::new(1.0, 0.0, 0.0) * Point::new(0.0, 1.0, 0.0);
        assert_eq!(p, Point::new(1.0f32, 1.0, -2.0));
    }
}
