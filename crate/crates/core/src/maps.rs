//! A zoo of biLipschitz self-maps of the Heisenberg group.
//!
//! Dilations, spiral maps `S_k(z,t) = (z e^{ik ln|z|}, t − k|z|²)`, contact
//! flows generated by scalar potentials, isometries and compositions of all
//! of these. Maps are plain data ([`MapDescriptor`]) and are evaluated on
//! demand, so they can be shipped in reports and parsed from the command line.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, HeisError, Result};
use crate::geodesics::cc_distance;
use crate::group::{dilate, inverse, IsometryDescriptor, Point};
use crate::sampling::rng_for;
use rand::Rng;

pub const DEFAULT_FLOW_STEP: f64 = 1e-3;

/// Tolerance of the finite-difference derivative audit.
pub const AUDIT_TOL: f64 = 1e-6;

/// A smooth scalar potential with its horizontal derivatives.
pub trait PotentialField: Send + Sync {
    fn id(&self) -> String;
    fn value(&self, p: &Point) -> f64;
    /// `Xp = ∂x p + 2y ∂t p`.
    fn x_deriv(&self, p: &Point) -> f64;
    /// `Yp = ∂y p − 2x ∂t p`.
    fn y_deriv(&self, p: &Point) -> f64;
    /// Declared bound on `|X²p| + |Y²p| + |XYp| + |YXp|`.
    fn c0(&self) -> f64;
}

/// Built-in potentials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Constant {
        c: f64,
    },
    /// `p = x`
    LinearX,
    /// `p = sin x`
    SinX,
    /// `p = x y exp(−(x² + y² + t²))`
    XyBump,
}

fn bump(p: &Point) -> f64 {
    (-(p.x * p.x + p.y * p.y + p.t * p.t)).exp()
}

impl PotentialField for Potential {
    fn id(&self) -> String {
        match self {
            Potential::Constant { .. } => "const".into(),
            Potential::LinearX => "x".into(),
            Potential::SinX => "sin_x".into(),
            Potential::XyBump => "xy_bump".into(),
        }
    }

    fn value(&self, p: &Point) -> f64 {
        match *self {
            Potential::Constant { c } => c,
            Potential::LinearX => p.x,
            Potential::SinX => p.x.sin(),
            Potential::XyBump => p.x * p.y * bump(p),
        }
    }

    fn x_deriv(&self, p: &Point) -> f64 {
        match *self {
            Potential::Constant { .. } => 0.0,
            Potential::LinearX => 1.0,
            Potential::SinX => p.x.cos(),
            Potential::XyBump => {
                let b = bump(p);
                p.y * b * (1.0 - 2.0 * p.x * p.x) - 4.0 * p.x * p.y * p.y * p.t * b
            }
        }
    }

    fn y_deriv(&self, p: &Point) -> f64 {
        match *self {
            Potential::Constant { .. } | Potential::LinearX | Potential::SinX => 0.0,
            Potential::XyBump => {
                let b = bump(p);
                p.x * b * (1.0 - 2.0 * p.y * p.y) + 4.0 * p.x * p.x * p.y * p.t * b
            }
        }
    }

    fn c0(&self) -> f64 {
        match self {
            Potential::Constant { .. } | Potential::LinearX => 0.0,
            Potential::SinX => 1.0,
            // grid maximum is 5.21
            Potential::XyBump => 5.5,
        }
    }
}

impl Potential {
    pub fn parse(id: &str, c: Option<f64>) -> Result<Self> {
        match id {
            "const" | "constant" => Ok(Potential::Constant { c: c.unwrap_or(1.0) }),
            "x" | "linear_x" => Ok(Potential::LinearX),
            "sin_x" => Ok(Potential::SinX),
            "xy_bump" => Ok(Potential::XyBump),
            _ => invalid(format!("unknown potential '{id}' (expected const, x, sin_x, xy_bump)")),
        }
    }
}

/// Largest deviation between the analytic `Xp`, `Yp` and central differences
/// along the left-invariant flows `P·(s,0,0)`, `P·(0,s,0)`.
///
/// Fails if the deviation exceeds [`AUDIT_TOL`] on any of `probes` random
/// points in the box `[-2, 2]³`.
pub fn audit_potential<P: PotentialField + ?Sized>(pf: &P, probes: usize, seed: u64) -> Result<f64> {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..probes as u64 {
        let mut rng = rng_for(seed, i);
        let p = Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let fx =
            (pf.value(&p.mul(&Point::horizontal(h, 0.0))) - pf.value(&p.mul(&Point::horizontal(-h, 0.0)))) / (2.0 * h);
        let fy =
            (pf.value(&p.mul(&Point::horizontal(0.0, h))) - pf.value(&p.mul(&Point::horizontal(0.0, -h)))) / (2.0 * h);
        let ex = (fx - pf.x_deriv(&p)).abs() / pf.x_deriv(&p).abs().max(1.0);
        let ey = (fy - pf.y_deriv(&p)).abs() / pf.y_deriv(&p).abs().max(1.0);
        worst = worst.max(ex).max(ey);
    }
    if !(worst <= AUDIT_TOL) {
        return Err(HeisError::Numeric(format!("potential '{}' fails derivative audit: deviation {worst:e}", pf.id())));
    }
    Ok(worst)
}

/// The contact field `−¼(Yp)X + ¼(Xp)Y + pT` in coordinates.
pub fn kr_vector_field<P: PotentialField + ?Sized>(pf: &P, p: &Point) -> [f64; 3] {
    let xp = pf.x_deriv(p);
    let yp = pf.y_deriv(p);
    [-0.25 * yp, 0.25 * xp, pf.value(p) - 0.5 * (p.x * xp + p.y * yp)]
}

fn shift(p: &Point, k: &[f64; 3], a: f64) -> Point {
    Point::new(p.x + a * k[0], p.y + a * k[1], p.t + a * k[2])
}

/// Time-`s` flow of the contact field of `pf`, by fixed-step RK4 with
/// `ceil(|s|/h)` steps.
pub fn integrate_flow<P: PotentialField + ?Sized>(pf: &P, s: f64, p: &Point, h: f64) -> Result<Point> {
    if !(h > 0.0 && h.is_finite()) {
        return invalid(format!("flow step must be positive, got {h}"));
    }
    if !s.is_finite() || !p.is_finite() {
        return invalid("flow time and start point must be finite");
    }
    if s == 0.0 {
        return Ok(*p);
    }
    let n = (s.abs() / h).ceil();
    if n > 1e9 {
        return invalid(format!("flow needs {n} steps"));
    }
    let n = n as u64;
    let dt = s / n as f64;
    let mut q = *p;
    for _ in 0..n {
        let k1 = kr_vector_field(pf, &q);
        let k2 = kr_vector_field(pf, &shift(&q, &k1, 0.5 * dt));
        let k3 = kr_vector_field(pf, &shift(&q, &k2, 0.5 * dt));
        let k4 = kr_vector_field(pf, &shift(&q, &k3, dt));
        q = Point::new(
            q.x + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            q.y + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            q.t + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        );
        if !q.is_finite() {
            return Err(HeisError::Numeric(format!("flow of '{}' left the finite range", pf.id())));
        }
    }
    Ok(q)
}

/// Time-`s` flow of a built-in potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrFlow {
    pub potential: Potential,
    pub s: f64,
    pub h: f64,
}

impl KrFlow {
    /// Validates the step and audits the potential's derivatives.
    pub fn new(potential: Potential, s: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return invalid(format!("flow step must be positive, got {h}"));
        }
        if !s.is_finite() {
            return invalid("flow time must be finite");
        }
        audit_potential(&potential, 64, 0x5eed)?;
        Ok(KrFlow { potential, s, h })
    }
}

/// A self-map of the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapDescriptor {
    Isometry(IsometryDescriptor),
    /// `δ_λ`
    Dilation(f64),
    /// `S_k`, extended by `(0;t) ↦ (0;t)` on the vertical axis.
    Spiral(f64),
    KrFlow(KrFlow),
    /// Anisotropic `(x,y,t) ↦ (a x, b y, c t)`. Not a contact map in general;
    /// kept for testing the conjugate map.
    Scaling([f64; 3]),
    /// Applied right to left: the last entry acts first.
    Composition(Vec<MapDescriptor>),
}

impl MapDescriptor {
    pub fn identity() -> Self {
        MapDescriptor::Isometry(IsometryDescriptor::identity())
    }

    pub fn dilation(lambda: f64) -> Result<Self> {
        let m = MapDescriptor::Dilation(lambda);
        m.validate()?;
        Ok(m)
    }

    pub fn spiral(k: f64) -> Result<Self> {
        let m = MapDescriptor::Spiral(k);
        m.validate()?;
        Ok(m)
    }

    pub fn kr_flow(potential: Potential, s: f64, h: f64) -> Result<Self> {
        Ok(MapDescriptor::KrFlow(KrFlow::new(potential, s, h)?))
    }

    pub fn composition(maps: Vec<MapDescriptor>) -> Result<Self> {
        let m = MapDescriptor::Composition(maps);
        m.validate()?;
        Ok(m)
    }

    /// Checks the invariants of every variant, recursively.
    pub fn validate(&self) -> Result<()> {
        match self {
            MapDescriptor::Isometry(iso) => {
                IsometryDescriptor::new(iso.w, iso.theta, iso.m)?;
            }
            MapDescriptor::Dilation(l) => {
                if !(*l > 0.0 && l.is_finite()) {
                    return invalid(format!("dilation factor must be positive, got {l}"));
                }
            }
            MapDescriptor::Spiral(k) => {
                if !k.is_finite() {
                    return invalid("spiral parameter must be finite");
                }
            }
            MapDescriptor::KrFlow(f) => {
                KrFlow::new(f.potential, f.s, f.h)?;
            }
            MapDescriptor::Scaling(a) => {
                if a.iter().any(|v| !v.is_finite()) {
                    return invalid("scaling factors must be finite");
                }
            }
            MapDescriptor::Composition(list) => {
                if list.is_empty() {
                    return invalid("composition must be non-empty");
                }
                for m in list {
                    m.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, p: &Point) -> Result<Point> {
        match self {
            MapDescriptor::Isometry(iso) => Ok(iso.apply(p)),
            MapDescriptor::Dilation(l) => dilate(*l, p),
            MapDescriptor::Spiral(k) => Ok(spiral(*k, p)),
            MapDescriptor::KrFlow(f) => integrate_flow(&f.potential, f.s, p, f.h),
            MapDescriptor::Scaling([a, b, c]) => Ok(Point::new(a * p.x, b * p.y, c * p.t)),
            MapDescriptor::Composition(list) => {
                let mut q = *p;
                for m in list.iter().rev() {
                    q = m.eval(&q)?;
                }
                Ok(q)
            }
        }
    }

    /// Whether the map is known to be Pansu-singular at `p` (the spiral axis).
    pub fn singular_at(&self, p: &Point) -> bool {
        match self {
            MapDescriptor::Spiral(k) => *k != 0.0 && p.z_norm() == 0.0,
            MapDescriptor::Composition(list) => list.iter().any(|m| m.singular_at(p)),
            _ => false,
        }
    }

    /// Whether the map contains a spiral factor.
    pub fn has_spiral(&self) -> bool {
        match self {
            MapDescriptor::Spiral(_) => true,
            MapDescriptor::Composition(list) => list.iter().any(|m| m.has_spiral()),
            _ => false,
        }
    }
}

fn spiral(k: f64, p: &Point) -> Point {
    let r2 = p.x * p.x + p.y * p.y;
    if r2 == 0.0 {
        return *p;
    }
    let (s, c) = (0.5 * k * r2.ln()).sin_cos();
    Point::new(c * p.x - s * p.y, s * p.x + c * p.y, p.t - k * r2)
}

/// Free-function form of [`MapDescriptor::eval`].
pub fn eval_map(m: &MapDescriptor, p: &Point) -> Result<Point> {
    m.eval(p)
}

/// `Φ(P) = f(P)^{-1} · P`.
pub fn phi_conjugate(m: &MapDescriptor, p: &Point) -> Result<Point> {
    Ok(inverse(&m.eval(p)?).mul(p))
}

/// Extreme distortion ratios over a set of pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilipEstimate {
    pub upper: f64,
    pub lower: f64,
    pub used: usize,
    /// Pairs at distance zero, left out.
    pub skipped: usize,
}

/// Max and min of `d(f(P), f(Q)) / d(P, Q)` over `pairs`.
pub fn bilip_estimate(m: &MapDescriptor, pairs: &[(Point, Point)]) -> Result<BilipEstimate> {
    if pairs.is_empty() {
        return invalid("bilip_estimate needs at least one pair");
    }
    let ratios: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|(p, q)| {
            let d = cc_distance(p, q);
            if !(d > 0.0) {
                return Ok(None);
            }
            let dd = cc_distance(&m.eval(p)?, &m.eval(q)?);
            if !dd.is_finite() {
                return Err(HeisError::Numeric(format!("distance of images of {p}, {q} is not finite")));
            }
            Ok(Some(dd / d))
        })
        .collect::<Result<_>>()?;
    let used: Vec<f64> = ratios.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(HeisError::Degenerate("every pair is coincident".into()));
    }
    Ok(BilipEstimate {
        upper: used.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        lower: used.iter().copied().fold(f64::INFINITY, f64::min),
        used: used.len(),
        skipped: ratios.len() - used.len(),
    })
}

/// Lipschitz constant of the spiral map `S_k` as stated for the zoo:
/// `(|k| + √(|k| + 4)) / 2`.
pub fn spiral_lipschitz_bound(k: f64) -> f64 {
    0.5 * (k.abs() + (k.abs() + 4.0).sqrt())
}

fn fmt_num(v: f64) -> String {
    format!("{v:e}")
}

impl fmt::Display for MapDescriptor {
    /// The command-line syntax accepted by [`FromStr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapDescriptor::Isometry(iso) => write!(
                f,
                "isometry:x={},y={},t={},theta={},m={}",
                fmt_num(iso.w.x),
                fmt_num(iso.w.y),
                fmt_num(iso.w.t),
                fmt_num(iso.theta),
                iso.m
            ),
            MapDescriptor::Dilation(l) => write!(f, "dilation:lambda={}", fmt_num(*l)),
            MapDescriptor::Spiral(k) => write!(f, "spiral:k={}", fmt_num(*k)),
            MapDescriptor::KrFlow(kr) => {
                write!(f, "krflow:p={},s={},h={}", kr.potential.id(), fmt_num(kr.s), fmt_num(kr.h))?;
                if let Potential::Constant { c } = kr.potential {
                    write!(f, ",c={}", fmt_num(c))?;
                }
                Ok(())
            }
            MapDescriptor::Scaling([a, b, c]) => {
                write!(f, "scaling:x={},y={},t={}", fmt_num(*a), fmt_num(*b), fmt_num(*c))
            }
            MapDescriptor::Composition(list) => {
                for (i, m) in list.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{m}")?;
                }
                Ok(())
            }
        }
    }
}

struct Params<'a> {
    map: &'a str,
    kv: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn parse(map: &'a str, body: &'a str) -> Result<Self> {
        let mut kv = Vec::new();
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.split_once('=') {
                Some((k, v)) => kv.push((k.trim(), v.trim())),
                None => return invalid(format!("{map}: expected key=value, got '{item}'")),
            }
        }
        Ok(Params { map, kv })
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.kv.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn num(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| HeisError::InvalidArgument(format!("{}: '{key}={v}' is not a number", self.map))),
        }
    }

    fn num_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        for (k, _) in &self.kv {
            if !allowed.contains(k) {
                return invalid(format!("{}: unknown parameter '{k}'", self.map));
            }
        }
        Ok(())
    }
}

fn parse_single(s: &str) -> Result<MapDescriptor> {
    let (name, body) = s.split_once(':').unwrap_or((s, ""));
    let name = name.trim();
    let p = Params::parse(name, body)?;
    let m = match name {
        "identity" => {
            p.only(&[])?;
            MapDescriptor::identity()
        }
        "isometry" | "translation" | "rotation" | "reflection" => {
            p.only(&["x", "y", "t", "theta", "m"])?;
            let default_m = if name == "reflection" { 1.0 } else { 0.0 };
            let m = p.num_or("m", default_m)?;
            if m != 0.0 && m != 1.0 {
                return invalid(format!("{name}: m must be 0 or 1"));
            }
            let w = Point::new(p.num_or("x", 0.0)?, p.num_or("y", 0.0)?, p.num_or("t", 0.0)?);
            MapDescriptor::Isometry(IsometryDescriptor::new(w, p.num_or("theta", 0.0)?, m as u8)?)
        }
        "dilation" => {
            p.only(&["lambda", "eps"])?;
            let l = match (p.num("lambda")?, p.num("eps")?) {
                (Some(l), None) => l,
                (None, Some(e)) => 1.0 + e,
                (None, None) => return invalid("dilation: give lambda= or eps="),
                (Some(_), Some(_)) => return invalid("dilation: give only one of lambda=, eps="),
            };
            MapDescriptor::dilation(l)?
        }
        "spiral" => {
            p.only(&["k"])?;
            match p.num("k")? {
                Some(k) => MapDescriptor::spiral(k)?,
                None => return invalid("spiral: missing k="),
            }
        }
        "krflow" => {
            p.only(&["p", "s", "h", "c"])?;
            let pot = Potential::parse(p.raw("p").unwrap_or("sin_x"), p.num("c")?)?;
            let s = match p.num("s")? {
                Some(s) => s,
                None => return invalid("krflow: missing s="),
            };
            MapDescriptor::kr_flow(pot, s, p.num_or("h", DEFAULT_FLOW_STEP)?)?
        }
        "scaling" => {
            p.only(&["x", "y", "t"])?;
            let m = MapDescriptor::Scaling([p.num_or("x", 1.0)?, p.num_or("y", 1.0)?, p.num_or("t", 1.0)?]);
            m.validate()?;
            m
        }
        _ => return invalid(format!("unknown map '{name}'")),
    };
    Ok(m)
}

impl FromStr for MapDescriptor {
    type Err = HeisError;

    /// `name:key=value,...`, several joined by `;` for a composition
    /// (rightmost acts first).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(';').map(str::trim).filter(|p| !p.is_empty()).collect();
        match parts.len() {
            0 => invalid("empty map description"),
            1 => parse_single(parts[0]),
            _ => MapDescriptor::composition(parts.into_iter().map(parse_single).collect::<Result<_>>()?),
        }
    }
}
