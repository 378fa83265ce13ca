//! Exact geodesics and the Carnot–Carathéodory distance.
//!
//! The unit-speed geodesic leaving the origin with heading `α` and signed
//! curvature `φ` is
//!
//! ```text
//! z(s) = i e^{iα} (e^{−iφs} − 1) / φ,     t(s) = 2 (φs − sin φs) / φ²
//! ```
//!
//! and it minimizes length up to its lifetime `2π/|φ|`. Every point
//! `(z; t)` off the axes sits on exactly one such arc, found by inverting
//! the ratio
//!
//! ```text
//! m(ψ) = (ψ − sin ψ) / (1 − cos ψ) = |t| / |z|²,      ψ = |φ| r ∈ (0, 2π)
//! ```
//!
//! which is strictly increasing with a double pole at `ψ = 2π`. The distance
//! is then `r = |z| ψ / (2 sin(ψ/2))`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::group::{inverse, multiply, normalize_angle, Point};
use crate::roots::{bisect, bisect_newton, HybridConfig};
use crate::scalar::Scalar;

/// Below this `|φs|` the geodesic formulas switch to truncated series.
const SERIES_CUTOFF: f64 = 1e-4;
/// Below this `ψ` the lift ratio uses `ψ/3 + ψ³/90 + ψ⁵/2520`.
const RATIO_SERIES_CUTOFF: f64 = 1e-3;

/// Unit-speed geodesic: curvature, initial heading and starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct GeodesicParams<T = f64> {
    /// Signed curvature; `0` is a straight line.
    pub phi: T,
    /// Direction of the initial velocity.
    pub alpha: T,
    pub base: Point<T>,
}

impl<T: Scalar> GeodesicParams<T> {
    pub fn from_origin(phi: T, alpha: T) -> Self {
        GeodesicParams { phi, alpha, base: Point::origin() }
    }

    /// The geodesic of lifetime `2πq` that starts at `(0, 0, −2πq²)`, crosses
    /// the plane `t = 0` at `(2q e^{iα}; 0)` when `s = πq` and ends at
    /// `(0, 0, 2πq²)`.
    ///
    /// Here `α` labels the crossing direction, so the initial heading is
    /// `α + π/2`.
    pub fn lifted_family(q: T, alpha: T) -> Result<Self> {
        if !(q > T::zero()) {
            return invalid(format!("family parameter q must be positive, got {q}"));
        }
        Ok(GeodesicParams {
            phi: q.recip(),
            alpha: alpha + T::FRAC_PI_2(),
            base: Point::vertical(-T::lit(2.0) * T::PI() * q * q),
        })
    }

    /// Length over which the curve is minimizing.
    pub fn lifetime(&self) -> T {
        if self.phi == T::zero() {
            T::infinity()
        } else {
            T::TAU() / self.phi.abs()
        }
    }

    pub fn point(&self, s: T) -> Point<T> {
        geodesic_point(self, s)
    }
}

/// Solved geodesic coordinates of a point relative to the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct PolarSolve<T = f64> {
    /// Sweep angle `|φ| r ∈ [0, 2π]`.
    pub psi: T,
    /// Distance from the origin.
    pub r: T,
    /// Lifetime ratio `2π/ψ`, infinite on the plane `t = 0`.
    pub lambda: T,
    /// Initial heading of the minimizing geodesic (0 on the vertical axis).
    pub heading: T,
    /// Signed curvature of the minimizing geodesic.
    pub phi: T,
}

impl<T: Scalar> PolarSolve<T> {
    pub fn geodesic(&self) -> GeodesicParams<T> {
        GeodesicParams::from_origin(self.phi, self.heading)
    }
}

/// A point `A(α, φ)` of the sphere of radius `r` about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SpherePoint<T = f64> {
    pub r: T,
    pub phi: T,
    /// Argument of the horizontal part.
    pub alpha: T,
}

/// `ψ − sin ψ` without cancellation for small `ψ ≥ 0`.
pub fn psi_minus_sin<T: Scalar>(psi: T) -> T {
    if psi.abs() >= T::lit(0.5) {
        return psi - psi.sin();
    }
    // ψ³/3! − ψ⁵/5! + ...
    let p2 = psi * psi;
    let mut term = psi * p2 / T::lit(6.0);
    let mut sum = term;
    for k in 2..20 {
        let n = (2 * k) as f64;
        term = -term * p2 / T::lit(n * (n + 1.0));
        sum = sum + term;
        if term.abs() <= T::epsilon() * sum.abs() * T::lit(0.01) {
            break;
        }
    }
    sum
}

/// The lift ratio `m(ψ) = (ψ − sin ψ)/(1 − cos ψ)` on `[0, 2π)`.
pub fn lift_ratio<T: Scalar>(psi: T) -> T {
    if psi < T::lit(RATIO_SERIES_CUTOFF) {
        let p2 = psi * psi;
        return psi * (T::lit(1.0 / 3.0) + p2 * (T::lit(1.0 / 90.0) + p2 * T::lit(1.0 / 2520.0)));
    }
    let h = (psi * T::lit(0.5)).sin();
    psi_minus_sin(psi) / (T::lit(2.0) * h * h)
}

/// Derivative of [`lift_ratio`].
fn lift_ratio_prime<T: Scalar>(psi: T) -> T {
    if psi < T::lit(RATIO_SERIES_CUTOFF) {
        let p2 = psi * psi;
        return T::lit(1.0 / 3.0) + p2 * (T::lit(1.0 / 30.0) + p2 * T::lit(1.0 / 504.0));
    }
    let half = psi * T::lit(0.5);
    T::one() - lift_ratio(psi) * half.cos() / half.sin()
}

/// Lift ratio written in the gap `e = 2π − ψ`, accurate as `e → 0`.
fn lift_ratio_gap<T: Scalar>(e: T) -> (T, T) {
    let h = (e * T::lit(0.5)).sin();
    let m = (T::TAU() - e + e.sin()) / (T::lit(2.0) * h * h);
    let cot = (e * T::lit(0.5)).cos() / h;
    (m, -(T::one() + m * cot))
}

/// Solve for the sweep angle and distance of `p` seen from the origin.
pub fn solve_polar<T: Scalar>(p: &Point<T>) -> Result<PolarSolve<T>> {
    if !p.is_finite() {
        return invalid(format!("non-finite point {p}"));
    }
    if p.is_origin() {
        return invalid("polar coordinates are undefined at the origin");
    }
    let rz = p.z_norm();
    let tau = T::TAU();
    if p.t == T::zero() {
        return Ok(PolarSolve {
            psi: T::zero(),
            r: rz,
            lambda: T::infinity(),
            heading: normalize_angle(p.y.atan2(p.x)),
            phi: T::zero(),
        });
    }
    let sign = p.t.signum();
    if rz == T::zero() {
        let r = (T::PI() * p.t.abs()).sqrt();
        return Ok(PolarSolve { psi: tau, r, lambda: T::one(), heading: T::zero(), phi: sign * tau / r });
    }

    let ratio = p.t.abs() / (rz * rz);
    let cfg = HybridConfig::default();
    let (psi, stretch) = if ratio <= T::FRAC_PI_2() {
        // ψ ∈ (0, π]; seed from m(ψ) ≈ ψ/3
        let seed = T::lit(3.0) * ratio;
        let (lo, hi) = seeded_bracket(|x| lift_ratio(x) - ratio, seed, T::zero(), T::PI(), true);
        let psi = bisect_newton(|x| (lift_ratio(x) - ratio, lift_ratio_prime(x)), lo, hi, true, ratio, &cfg)?;
        let stretch = if psi == T::zero() { T::one() } else { psi / (T::lit(2.0) * (psi * T::lit(0.5)).sin()) };
        (psi, stretch)
    } else {
        // gap e = 2π − ψ ∈ (0, π); seed from m ≈ 4π/e²
        let seed = (T::lit(4.0) * T::PI() / ratio).sqrt();
        let floor = T::min_positive_value().sqrt();
        let (lo, hi) = seeded_bracket(|e| lift_ratio_gap(e).0 - ratio, seed, floor, T::PI(), false);
        let e = bisect_newton(
            |e| {
                let (m, dm) = lift_ratio_gap(e);
                (m - ratio, dm)
            },
            lo,
            hi,
            false,
            ratio,
            &cfg,
        )?;
        let psi = tau - e;
        (psi, psi / (T::lit(2.0) * (e * T::lit(0.5)).sin()))
    };
    let r = rz * stretch;
    let arg = p.y.atan2(p.x);
    Ok(PolarSolve {
        psi,
        r,
        lambda: tau / psi,
        heading: normalize_angle(arg + sign * psi * T::lit(0.5)),
        phi: sign * psi / r,
    })
}

/// Shrink `[lo, hi]` around an asymptotic seed when the seed brackets the
/// root, otherwise return the full interval.
fn seeded_bracket<T: Scalar, F: Fn(T) -> T>(g: F, seed: T, lo: T, hi: T, increasing: bool) -> (T, T) {
    let a = (seed * T::lit(0.5)).max(lo);
    let b = (seed * T::lit(2.0)).min(hi);
    if a < b {
        let (ga, gb) = (g(a), g(b));
        let ok = if increasing { ga <= T::zero() && gb >= T::zero() } else { ga >= T::zero() && gb <= T::zero() };
        if ok && ga.is_finite() && gb.is_finite() {
            return (a, b);
        }
    }
    (lo, hi)
}

/// Carnot–Carathéodory distance.
pub fn cc_distance<T: Scalar>(p: &Point<T>, q: &Point<T>) -> T {
    let d = multiply(&inverse(p), q);
    if d.is_origin() {
        return T::zero();
    }
    match solve_polar(&d) {
        Ok(sol) => sol.r,
        Err(_) => T::nan(),
    }
}

/// Distance from the origin.
pub fn cc_norm<T: Scalar>(p: &Point<T>) -> T {
    cc_distance(&Point::origin(), p)
}

/// Lifetime ratio `λ(p)` of `p` relative to the origin.
pub fn lambda_coordinate<T: Scalar>(p: &Point<T>) -> Result<T> {
    Ok(solve_polar(p)?.lambda)
}

/// Point at arclength `s` along `g`.
///
/// Arclengths beyond the lifetime are allowed; the curve is then simply no
/// longer minimizing.
pub fn geodesic_point<T: Scalar>(g: &GeodesicParams<T>, s: T) -> Point<T> {
    let (sa, ca) = g.alpha.sin_cos();
    if g.phi == T::zero() {
        return multiply(&g.base, &Point::horizontal(s * ca, s * sa));
    }
    let phi = g.phi;
    let psi = phi * s;
    // a = sin ψ / φ,  b = (1 − cos ψ)/φ,  t = 2(ψ − sin ψ)/φ²
    let (a, b, t) = if psi.abs() < T::lit(SERIES_CUTOFF) {
        let p2 = psi * psi;
        let a = s * (T::one() - p2 / T::lit(6.0) + p2 * p2 / T::lit(120.0));
        let b = s * psi * (T::lit(0.5) - p2 / T::lit(24.0) + p2 * p2 / T::lit(720.0));
        let t = T::lit(2.0) * s * s * psi * (T::lit(1.0 / 6.0) - p2 / T::lit(120.0) + p2 * p2 / T::lit(5040.0));
        (a, b, t)
    } else {
        let h = (psi * T::lit(0.5)).sin();
        let a = psi.sin() / phi;
        let b = T::lit(2.0) * h * h / phi;
        let t = T::lit(2.0) * psi.signum() * psi_minus_sin(psi.abs()) / (phi * phi);
        (a, b, t)
    };
    let local = Point::new(sa * b + ca * a, sa * a - ca * b, t);
    multiply(&g.base, &local)
}

/// Evaluate the sphere parametrization `A(α, φ)`.
pub fn sphere_point<T: Scalar>(sp: &SpherePoint<T>) -> Result<Point<T>> {
    if !(sp.r > T::zero()) {
        return invalid(format!("sphere radius must be positive, got {}", sp.r));
    }
    let sweep = sp.phi * sp.r;
    if sweep.abs() > T::TAU() * (T::one() + T::lit(4.0) * T::epsilon()) {
        return invalid(format!("|φ r| = {} exceeds the lifetime 2π", sweep.abs()));
    }
    let (rz, t) = if sweep.abs() < T::lit(SERIES_CUTOFF) {
        let p2 = sweep * sweep;
        let rz = sp.r * (T::one() - p2 / T::lit(24.0) + p2 * p2 / T::lit(1920.0));
        let t = T::lit(2.0) * sp.r * sp.r * sweep * (T::lit(1.0 / 6.0) - p2 / T::lit(120.0));
        (rz, t)
    } else {
        let rz = T::lit(2.0) * (sweep * T::lit(0.5)).sin() / sp.phi;
        let t = T::lit(2.0) * sweep.signum() * psi_minus_sin(sweep.abs()) / (sp.phi * sp.phi);
        (rz.abs(), t)
    };
    let (sa, ca) = sp.alpha.sin_cos();
    Ok(Point::new(rz * ca, rz * sa, t))
}

/// Height `u(ρ)` of the upper unit hemisphere above horizontal radius `ρ`.
///
/// Scale with `t = r² u(|z|/r)` for other radii.
pub fn hemisphere_height<T: Scalar>(rho_z: T) -> Result<T> {
    if !(rho_z >= T::zero() && rho_z <= T::one()) {
        return invalid(format!("horizontal radius must lie in [0, 1], got {rho_z}"));
    }
    let psi = sweep_for_radius(rho_z)?;
    if psi == T::zero() {
        return Ok(T::zero());
    }
    Ok(T::lit(2.0) * psi_minus_sin(psi) / (psi * psi))
}

/// Sweep `ψ ∈ [0, 2π]` at which the unit sphere has `|z| = ρ`, i.e.
/// `sin(ψ/2)/(ψ/2) = ρ`.
fn sweep_for_radius<T: Scalar>(rho_z: T) -> Result<T> {
    if rho_z == T::one() {
        return Ok(T::zero());
    }
    if rho_z == T::zero() {
        return Ok(T::TAU());
    }
    let sinc = |psi: T| {
        let u = psi * T::lit(0.5);
        if u == T::zero() {
            (T::one(), T::zero())
        } else {
            (u.sin() / u, T::lit(0.5) * (u * u.cos() - u.sin()) / (u * u))
        }
    };
    bisect_newton(
        |psi| {
            let (v, dv) = sinc(psi);
            (v - rho_z, dv)
        },
        T::zero(),
        T::TAU(),
        false,
        rho_z,
        &HybridConfig::default(),
    )
}

/// Horizontal radius `v(t)` of the unit sphere at height `t`, for
/// `|t| < 1/π` on the outer (`|φ| ≤ π`) sheet.
///
/// Found by bisection on `|z| ↦ d(O, (|z|, 0, t)) − 1`; there is no closed
/// form.
pub fn hemisphere_radius<T: Scalar>(t: T) -> Result<T> {
    if !(t.abs() < T::FRAC_1_PI()) {
        return invalid(format!("height must satisfy |t| < 1/π, got {t}"));
    }
    if t == T::zero() {
        return Ok(T::one());
    }
    // |z| ∈ [2/π, 1] on the outer sheet, distance increasing in |z|
    let lo = T::FRAC_2_PI() * T::lit(0.5);
    bisect(|rz| cc_norm(&Point::new(rz, T::zero(), t)) - T::one(), lo, T::one(), true, T::epsilon() * T::lit(4.0))
}

/// Whether `p` lies in the Euclidean convex hull of the closed ball
/// `B(O, r)`: the `|φr| ≤ π` part of the sphere capped by the discs
/// `t = ±(2/π) r²`, `|z| ≤ (2/π) r`.
pub fn in_convex_hull<T: Scalar>(p: &Point<T>, r: T) -> Result<bool> {
    if !(r > T::zero()) {
        return invalid(format!("radius must be positive, got {r}"));
    }
    let rz = p.z_norm();
    if rz > r {
        return Ok(false);
    }
    let cap_edge = T::FRAC_2_PI() * r;
    let bound = if rz <= cap_edge { T::FRAC_2_PI() * r * r } else { r * r * hemisphere_height(rz / r)? };
    Ok(p.t.abs() <= bound)
}

/// Aperture `a(λ)` of the cones `t = ±a|z|²` holding the points of
/// lifetime ratio `λ`.
pub fn cone_aperture<T: Scalar>(lambda: T) -> Result<T> {
    if !(lambda > T::one()) {
        return invalid(format!("lifetime ratio must exceed 1, got {lambda}"));
    }
    let sp = SpherePoint { r: T::one(), phi: T::TAU() / lambda, alpha: T::zero() };
    let q = sphere_point(&sp)?;
    let rz = q.z_norm();
    Ok(q.t / (rz * rz))
}

/// Position of `q` relative to the cone `Γ_{apex, a} = L_apex {t = a|z|²}`.
///
/// `Greater` means above the cone surface.
pub fn cone_side<T: Scalar>(apex: &Point<T>, a: T, q: &Point<T>) -> Ordering {
    let d = multiply(&inverse(apex), q);
    let rz = d.z_norm();
    let gap = d.t - a * rz * rz;
    gap.partial_cmp(&T::zero()).unwrap_or(Ordering::Equal)
}

/// Distance from an interior point to the sphere `S(O, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereDistance<T = f64> {
    pub distance: T,
    /// Whether the distance is realized at the pole `(0; ±R²/π)`.
    pub realized_at_north_pole: bool,
}

/// Distance from `p` (inside the open ball) to `S(O, R)`.
///
/// When `λ(p) ≤ R/d(O, p)` the nearest sphere point is the pole; otherwise
/// the prolonged geodesic through `p` reaches the sphere after `R − d(O, p)`.
/// Points below the plane `t = 0` use the pole `(0; −R²/π)`.
pub fn dist_to_sphere<T: Scalar>(p: &Point<T>, big_r: T) -> Result<SphereDistance<T>> {
    if !(big_r > T::zero()) {
        return invalid(format!("radius must be positive, got {big_r}"));
    }
    if p.is_origin() {
        return Ok(SphereDistance { distance: big_r, realized_at_north_pole: false });
    }
    let sol = solve_polar(p)?;
    if !(sol.r < big_r) {
        return invalid(format!("point {p} is not inside the open ball of radius {big_r}"));
    }
    if sol.lambda <= big_r / sol.r {
        let pole = Point::vertical(p.t.signum() * big_r * big_r / T::PI());
        Ok(SphereDistance { distance: cc_distance(p, &pole), realized_at_north_pole: true })
    } else {
        Ok(SphereDistance { distance: big_r - sol.r, realized_at_north_pole: false })
    }
}

/// `ρ(θ) = d((1; 0), (e^{iθ}; 0))`, computed as the distance from the
/// origin to `(2 sin(θ/2), 0, 2 sin θ)`.
pub fn rho<T: Scalar>(theta: T) -> Result<T> {
    if !(theta > T::zero() && theta <= T::PI()) {
        return invalid(format!("θ must lie in (0, π], got {theta}"));
    }
    Ok(cc_norm(&chord_point(theta)))
}

fn chord_point<T: Scalar>(theta: T) -> Point<T> {
    let h = (theta * T::lit(0.5)).sin();
    Point::new(T::lit(2.0) * h, T::zero(), T::lit(2.0) * theta.sin())
}

/// Closed-form derivative of [`rho`].
///
/// The sweep `α₀` of the chord endpoint solves
/// `tan(θ/2) = (1 − cos α)/(α − sin α)`, whose right side decreases
/// strictly on `(0, 2π)`; then
/// `ρ'(θ) = (α₀/2)/sin(α₀/2) · sin(α₀/2 + θ) / ρ(θ)`.
pub fn rho_prime<T: Scalar>(theta: T) -> Result<T> {
    if !(theta > T::zero() && theta < T::PI()) {
        return invalid(format!("θ must lie in the open interval (0, π), got {theta}"));
    }
    let alpha = chord_sweep(theta)?;
    let half = alpha * T::lit(0.5);
    Ok(half / half.sin() * (half + theta).sin() / rho(theta)?)
}

/// Sweep angle `α₀(θ)` of the chord endpoint, by bisection on
/// `R(α) = 1/m(α)`.
pub fn chord_sweep<T: Scalar>(theta: T) -> Result<T> {
    let target = (theta * T::lit(0.5)).tan();
    let lo = T::min_positive_value().sqrt();
    let hi = T::TAU() * (T::one() - T::epsilon());
    bisect(|a| lift_ratio(a).recip() - target, lo, hi, false, T::epsilon() * T::lit(8.0))
}
