//! Finite-difference Pansu differentials and ball averages of them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HeisError, Result};
use crate::group::{dilate, inverse, Point};
use crate::maps::MapDescriptor;
use crate::sampling::ball_sample;

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    OneSided,
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffConfig {
    pub sigma: f64,
    pub scheme: Scheme,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig { sigma: 1e-4, scheme: Scheme::Central }
    }
}

impl DiffConfig {
    pub fn new(sigma: f64, scheme: Scheme) -> Result<Self> {
        let c = DiffConfig { sigma, scheme };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return invalid(format!("sigma must lie in (0, 1], got {}", self.sigma));
        }
        Ok(())
    }
}

/// Horizontal part of a Pansu differential, `[[α, β], [γ, δ]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PansuJacobian {
    pub a2x2: Mat2,
    pub det: f64,
}

impl PansuJacobian {
    pub fn from_matrix(a: Mat2) -> Self {
        PansuJacobian { a2x2: a, det: det(&a) }
    }

    pub fn op_norm(&self) -> f64 {
        op_norm(&self.a2x2)
    }

    /// The morphism `(u,v,w) ↦ (αu+βv, γu+δv, det·w)`.
    pub fn apply(&self, q: &Point) -> Point {
        let a = &self.a2x2;
        Point::new(a[0][0] * q.x + a[0][1] * q.y, a[1][0] * q.x + a[1][1] * q.y, self.det * q.t)
    }
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn sub(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

/// Largest singular value, from the characteristic polynomial of `AᵀA`.
pub fn op_norm(a: &Mat2) -> f64 {
    let fro2 = a[0][0].powi(2) + a[0][1].powi(2) + a[1][0].powi(2) + a[1][1].powi(2);
    let d = det(a);
    let disc = (fro2 * fro2 - 4.0 * d * d).max(0.0);
    (0.5 * (fro2 + disc.sqrt())).sqrt()
}

/// Largest deviation of `AᵀA` from the identity.
pub fn orthogonality_gap(a: &Mat2) -> f64 {
    let p = a[0][0] * a[0][0] + a[1][0] * a[1][0] - 1.0;
    let q = a[0][0] * a[0][1] + a[1][0] * a[1][1];
    let r = a[0][1] * a[0][1] + a[1][1] * a[1][1] - 1.0;
    let mid = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    (mid + rad).abs().max((mid - rad).abs())
}

/// Operator norm of `JᵀJ − I`.
pub fn orthogonality_defect(j: &PansuJacobian) -> f64 {
    orthogonality_gap(&j.a2x2)
}

/// `δ_{1/σ}(f(P)^{-1} · f(P · δ_σ Q))`, with `σ` allowed negative for the
/// backward probe (meaning `δ_|σ|` applied to `Q^{-1}`).
fn quotient(m: &MapDescriptor, fp_inv: &Point, p: &Point, q: &Point, sigma: f64) -> Result<Point> {
    let step = if sigma > 0.0 { dilate(sigma, q)? } else { dilate(-sigma, &inverse(q))? };
    let fq = m.eval(&p.mul(&step))?;
    let d = fp_inv.mul(&fq);
    let s = sigma.abs();
    Ok(Point::new(d.x / s, d.y / s, d.t / (s * s)))
}

fn column(m: &MapDescriptor, fp_inv: &Point, p: &Point, q: &Point, cfg: &DiffConfig) -> Result<[f64; 2]> {
    let fwd = quotient(m, fp_inv, p, q, cfg.sigma)?;
    Ok(match cfg.scheme {
        Scheme::OneSided => [fwd.x, fwd.y],
        Scheme::Central => {
            let back = quotient(m, fp_inv, p, q, -cfg.sigma)?;
            [0.5 * (fwd.x - back.x), 0.5 * (fwd.y - back.y)]
        }
    })
}

/// Difference-quotient Pansu differential of `m` at `p`.
pub fn pansu_jacobian(m: &MapDescriptor, p: &Point, cfg: &DiffConfig) -> Result<PansuJacobian> {
    cfg.validate()?;
    let fp_inv = inverse(&m.eval(p)?);
    let c1 = column(m, &fp_inv, p, &Point::horizontal(1.0, 0.0), cfg)?;
    let c2 = column(m, &fp_inv, p, &Point::horizontal(0.0, 1.0), cfg)?;
    let j = PansuJacobian::from_matrix([[c1[0], c2[0]], [c1[1], c2[1]]]);
    if !j.a2x2.iter().flatten().all(|v| v.is_finite()) {
        return Err(HeisError::Numeric(format!("non-finite Pansu quotient at {p}")));
    }
    Ok(j)
}

/// Vertical difference quotient against `Q = (0,0,1)`; tends to `det Jf(P)`.
pub fn vertical_quotient(m: &MapDescriptor, p: &Point, cfg: &DiffConfig) -> Result<f64> {
    cfg.validate()?;
    let fp_inv = inverse(&m.eval(p)?);
    let e3 = Point::vertical(1.0);
    let fwd = quotient(m, &fp_inv, p, &e3, cfg.sigma)?;
    Ok(match cfg.scheme {
        Scheme::OneSided => fwd.t,
        Scheme::Central => 0.5 * (fwd.t - quotient(m, &fp_inv, p, &e3, -cfg.sigma)?.t),
    })
}

/// Observed convergence order of the differential at `p` from steps
/// `σ, σ/2, σ/4`. `None` when the quotients agree to rounding, as they do for
/// maps whose quotient is exact.
pub fn richardson_order(m: &MapDescriptor, p: &Point, cfg: &DiffConfig) -> Result<Option<f64>> {
    let at = |s: f64| pansu_jacobian(m, p, &DiffConfig { sigma: s, scheme: cfg.scheme });
    let j1 = at(cfg.sigma)?.a2x2;
    let j2 = at(0.5 * cfg.sigma)?.a2x2;
    let j3 = at(0.25 * cfg.sigma)?.a2x2;
    let e1 = op_norm(&sub(&j1, &j2));
    let e2 = op_norm(&sub(&j2, &j3));
    let floor = 1e-9 * op_norm(&j1).max(1.0);
    if e1 < floor || e2 < floor {
        return Ok(None);
    }
    Ok(Some((e1 / e2).log2()))
}

/// Whether `p` is usable as a probe for `m`: spirals only away from the axis.
pub fn probe_ok(m: &MapDescriptor, p: &Point, cfg: &DiffConfig) -> bool {
    !m.has_spiral() || p.z_norm() > 10.0 * cfg.sigma
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Samples actually used.
    pub n: usize,
}

impl McEstimate {
    fn from_values(v: &[f64]) -> Result<Self> {
        let n = v.len();
        if n == 0 {
            return Err(HeisError::Degenerate("no usable samples".into()));
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Ok(McEstimate { mean, stderr: (var / n as f64).sqrt(), n })
    }
}

/// Differentials of `m` at `n` seeded points of `B(O, r)`, skipping probes too
/// close to a singular set.
pub fn jacobian_sample(m: &MapDescriptor, r: f64, n: usize, seed: u64, cfg: &DiffConfig) -> Result<Vec<Mat2>> {
    cfg.validate()?;
    let pts = ball_sample(r, n, seed)?;
    let js: Vec<Option<Mat2>> = pts
        .par_iter()
        .map(|p| if probe_ok(m, p, cfg) { pansu_jacobian(m, p, cfg).map(|j| Some(j.a2x2)) } else { Ok(None) })
        .collect::<Result<_>>()?;
    Ok(js.into_iter().flatten().collect())
}

fn check_orthogonal(a: &Mat2) -> Result<()> {
    if !a.iter().flatten().all(|v| v.is_finite()) || orthogonality_gap(a) > 1e-10 {
        return invalid(format!("reference matrix {a:?} is not orthogonal"));
    }
    Ok(())
}

/// Ball average of `‖Jf − A‖` over `B(O, r)`.
pub fn bmo_average(m: &MapDescriptor, a: &Mat2, r: f64, n: usize, seed: u64, cfg: &DiffConfig) -> Result<McEstimate> {
    check_orthogonal(a)?;
    let js = jacobian_sample(m, r, n, seed, cfg)?;
    let vals: Vec<f64> = js.iter().map(|j| op_norm(&sub(j, a))).collect();
    McEstimate::from_values(&vals)
}

/// Entrywise mean of a set of matrices.
pub fn mean_matrix(js: &[Mat2]) -> Mat2 {
    let mut s = [[0.0; 2]; 2];
    for j in js {
        for i in 0..2 {
            for k in 0..2 {
                s[i][k] += j[i][k];
            }
        }
    }
    let n = js.len().max(1) as f64;
    s.map(|row| row.map(|v| v / n))
}

/// Mean of `exp(‖J − centre‖ / c_scale)` over precomputed differentials;
/// `+∞` when an exponent overflows.
pub fn exp_average(js: &[Mat2], centre: &Mat2, c_scale: f64) -> Result<f64> {
    if !(c_scale > 0.0) {
        return invalid(format!("scale must be positive, got {c_scale}"));
    }
    if js.is_empty() {
        return Err(HeisError::Degenerate("no usable samples".into()));
    }
    let mut sum = 0.0;
    for j in js {
        let e = op_norm(&sub(j, centre)) / c_scale;
        if e > 700.0 {
            return Ok(f64::INFINITY);
        }
        sum += e.exp();
    }
    let v = sum / js.len() as f64;
    Ok(if v.is_finite() { v } else { f64::INFINITY })
}

/// Ball average of `exp(‖Jf − (Jf)_B‖ / c_scale)`, where `(Jf)_B` is the
/// sample mean of the differential, or `centre` if one is given.
#[allow(clippy::too_many_arguments)]
pub fn exp_integrability_check(
    m: &MapDescriptor,
    centre: Option<&Mat2>,
    r: f64,
    c_scale: f64,
    n: usize,
    seed: u64,
    cfg: &DiffConfig,
) -> Result<f64> {
    if !(c_scale > 0.0) {
        return invalid(format!("scale must be positive, got {c_scale}"));
    }
    let js = jacobian_sample(m, r, n, seed, cfg)?;
    let c = centre.copied().unwrap_or_else(|| mean_matrix(&js));
    exp_average(&js, &c, c_scale)
}

/// Smallest `c_scale` (to relative precision `1e-6`) for which the sample
/// mean of `exp(‖J − (J)_B‖ / c_scale)` is at most `target`.
pub fn min_exp_scale(js: &[Mat2], target: f64) -> Result<f64> {
    if !(target > 1.0) {
        return invalid(format!("target must exceed 1, got {target}"));
    }
    let c = mean_matrix(js);
    let spread = js.iter().map(|j| op_norm(&sub(j, &c))).fold(0.0, f64::max);
    if spread == 0.0 {
        return Ok(0.0);
    }
    // value ≤ exp(spread / c), so c = spread / ln(target) is admissible
    let mut hi = spread / target.ln();
    let mut lo = hi * 1e-6;
    while exp_average(js, &c, lo)? <= target {
        lo *= 0.5;
    }
    while hi / lo > 1.0 + 1e-6 {
        let mid = (lo * hi).sqrt();
        if exp_average(js, &c, mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Serializable record of a ball average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmoRecord {
    pub map: String,
    #[serde(rename = "A")]
    pub a: Mat2,
    #[serde(rename = "R")]
    pub r: f64,
    pub n: usize,
    pub seed: u64,
    pub mean: f64,
    pub stderr: f64,
}

impl BmoRecord {
    pub fn compute(m: &MapDescriptor, a: &Mat2, r: f64, n: usize, seed: u64, cfg: &DiffConfig) -> Result<Self> {
        let est = bmo_average(m, a, r, n, seed, cfg)?;
        Ok(BmoRecord { map: m.to_string(), a: *a, r, n, seed, mean: est.mean, stderr: est.stderr })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::IsometryDescriptor;
    use crate::maps::{bilip_estimate, Potential};
    use crate::sampling::pair_sample;
    use approx::assert_abs_diff_eq;

    fn mat_close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        op_norm(&sub(a, b)) <= tol
    }

    fn rot(th: f64) -> Mat2 {
        let (s, c) = th.sin_cos();
        [[c, -s], [s, c]]
    }

    #[test]
    fn rotation_differential() {
        let th = 0.7;
        let m = MapDescriptor::Isometry(IsometryDescriptor::rotation(th));
        let j = pansu_jacobian(&m, &Point::new(0.4, -0.2, 1.0), &DiffConfig::default()).unwrap();
        assert!(mat_close(&j.a2x2, &rot(th), 1e-9));
        assert_abs_diff_eq!(j.det, 1.0, epsilon = 1e-9);
        assert!(orthogonality_defect(&j) < 1e-8);
    }

    #[test]
    fn dilation_differential() {
        let e = 0.02;
        let m = MapDescriptor::Dilation(1.0 + e);
        let j = pansu_jacobian(&m, &Point::new(1.0, 2.0, 3.0), &DiffConfig::default()).unwrap();
        assert!(mat_close(&j.a2x2, &[[1.0 + e, 0.0], [0.0, 1.0 + e]], 1e-9));
        assert_abs_diff_eq!(j.det, (1.0 + e) * (1.0 + e), epsilon = 1e-9);
        let exact = PansuJacobian::from_matrix([[1.0 + e, 0.0], [0.0, 1.0 + e]]);
        assert_abs_diff_eq!(orthogonality_defect(&exact), (1.0 + e) * (1.0 + e) - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spiral_differential_at_one() {
        let k = 0.3;
        let j =
            pansu_jacobian(&MapDescriptor::Spiral(k), &Point::horizontal(1.0, 0.0), &DiffConfig::default()).unwrap();
        assert!(mat_close(&j.a2x2, &[[1.0, 0.0], [k, 1.0]], 1e-7), "{:?}", j.a2x2);
        assert_abs_diff_eq!(j.det, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn spiral_defect_linear_in_k() {
        let m = MapDescriptor::Spiral(0.1);
        let cfg = DiffConfig::default();
        for p in ball_sample(2.0, 100, 12).unwrap() {
            if probe_ok(&m, &p, &cfg) {
                let j = pansu_jacobian(&m, &p, &cfg).unwrap();
                assert!(orthogonality_defect(&j) <= 3.0 * 0.1);
            }
        }
    }

    #[test]
    fn op_norm_closed_form() {
        assert_abs_diff_eq!(op_norm(&[[3.0, 0.0], [0.0, -5.0]]), 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(op_norm(&rot(1.3)), 1.0, epsilon = 1e-14);
        // [[1,1],[0,1]] has largest singular value the golden ratio
        assert_abs_diff_eq!(op_norm(&[[1.0, 1.0], [0.0, 1.0]]), (1.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn richardson_orders() {
        let maps = [MapDescriptor::Spiral(0.2), MapDescriptor::kr_flow(Potential::XyBump, 0.3, 1e-3).unwrap()];
        for m in &maps {
            for p in ball_sample(1.0, 10, 4).unwrap() {
                if p.z_norm() < 0.2 {
                    continue;
                }
                let c = DiffConfig::new(1e-2, Scheme::Central).unwrap();
                if let Some(o) = richardson_order(m, &p, &c).unwrap() {
                    assert!((o - 2.0).abs() < 0.3, "{m} central order {o}");
                }
                let c = DiffConfig::new(1e-3, Scheme::OneSided).unwrap();
                if let Some(o) = richardson_order(m, &p, &c).unwrap() {
                    assert!((o - 1.0).abs() < 0.3, "{m} one-sided order {o}");
                }
            }
        }
        let id = MapDescriptor::identity();
        assert_eq!(richardson_order(&id, &Point::horizontal(0.5, 0.5), &DiffConfig::default()).unwrap(), None);
    }

    #[test]
    fn vertical_quotient_is_det() {
        let cfg = DiffConfig::default();
        let p = Point::new(0.8, -0.3, 0.2);
        for m in [
            MapDescriptor::Spiral(0.25),
            MapDescriptor::Isometry(IsometryDescriptor::new(Point::new(1.0, 2.0, 3.0), 0.4, 1).unwrap()),
            MapDescriptor::Dilation(1.3),
        ] {
            let j = pansu_jacobian(&m, &p, &cfg).unwrap();
            assert_abs_diff_eq!(vertical_quotient(&m, &p, &cfg).unwrap(), j.det, epsilon = 1e-3);
        }
    }

    #[test]
    fn diagonal_bounded_for_near_isometries() {
        let cfg = DiffConfig::default();
        let eps = 0.01;
        for m in [
            MapDescriptor::Dilation(1.0 + eps),
            MapDescriptor::Spiral(eps),
            MapDescriptor::kr_flow(Potential::SinX, eps, 1e-3).unwrap(),
        ] {
            for p in ball_sample(1.0, 40, 6).unwrap() {
                if !probe_ok(&m, &p, &cfg) {
                    continue;
                }
                let a = pansu_jacobian(&m, &p, &cfg).unwrap().a2x2;
                assert!(a[0][0].abs() <= 1.0 + 10.0 * eps && a[1][1].abs() <= 1.0 + 10.0 * eps, "{m} {a:?}");
            }
        }
    }

    #[test]
    fn lipschitz_from_jacobian() {
        let cfg = DiffConfig::default();
        let pts = ball_sample(2.0, 400, 21).unwrap();
        let pairs = pair_sample(2.0, 400, 22).unwrap();
        for m in [
            MapDescriptor::Dilation(1.05),
            MapDescriptor::Spiral(0.1),
            MapDescriptor::kr_flow(Potential::XyBump, 0.2, 1e-2).unwrap(),
        ] {
            let sup = pts
                .iter()
                .filter(|p| probe_ok(&m, p, &cfg))
                .map(|p| pansu_jacobian(&m, p, &cfg).unwrap().op_norm())
                .fold(0.0, f64::max);
            let b = bilip_estimate(&m, &pairs).unwrap();
            assert!(b.upper <= sup + 1e-2, "{m}: {} vs {sup}", b.upper);
        }
    }

    #[test]
    fn bmo_examples() {
        let cfg = DiffConfig::default();
        let e = 0.01;
        let est = bmo_average(&MapDescriptor::Dilation(1.0 + e), &IDENTITY, 1.0, 2000, 1, &cfg).unwrap();
        assert_abs_diff_eq!(est.mean, e, epsilon = 1e-8);

        let th = 0.9;
        let m = MapDescriptor::Isometry(IsometryDescriptor::rotation(th));
        let est = bmo_average(&m, &rot(th), 1.0, 2000, 1, &cfg).unwrap();
        assert!(est.mean < 1e-8);

        let est = bmo_average(&MapDescriptor::Spiral(0.01), &IDENTITY, 1.0, 4000, 2, &cfg).unwrap();
        assert!(est.mean <= 3.0 * 0.01, "{}", est.mean);
        assert!(est.stderr > 0.0);

        assert!(bmo_average(&m, &[[1.0, 0.1], [0.0, 1.0]], 1.0, 10, 1, &cfg).is_err());
    }

    #[test]
    fn bmo_left_invariant() {
        let cfg = DiffConfig::default();
        let m = MapDescriptor::Spiral(0.05);
        let moved = MapDescriptor::composition(vec![
            MapDescriptor::Isometry(IsometryDescriptor::translation(Point::new(2.0, -1.0, 0.5))),
            m.clone(),
        ])
        .unwrap();
        let a = bmo_average(&m, &IDENTITY, 1.0, 3000, 9, &cfg).unwrap();
        let b = bmo_average(&moved, &IDENTITY, 1.0, 3000, 9, &cfg).unwrap();
        assert!((a.mean - b.mean).abs() <= 3.0 * a.stderr.max(1e-9), "{a:?} {b:?}");
    }

    #[test]
    fn exp_check_examples() {
        let cfg = DiffConfig::default();
        let m = MapDescriptor::Isometry(IsometryDescriptor::rotation(0.3));
        let v = exp_integrability_check(&m, None, 1.0, 0.1, 500, 1, &cfg).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-6);

        let e = 0.01;
        let v = exp_integrability_check(&MapDescriptor::Dilation(1.0 + e), None, 1.0, e, 500, 1, &cfg).unwrap();
        assert!(v <= std::f64::consts::E);

        let v = exp_integrability_check(&MapDescriptor::Spiral(0.5), None, 1.0, 1e-6, 200, 1, &cfg).unwrap();
        assert_eq!(v, f64::INFINITY);
    }

    #[test]
    fn exp_scale_linear_in_k() {
        let cfg = DiffConfig::default();
        let scales: Vec<f64> = [0.01, 0.02, 0.04]
            .iter()
            .map(|&k| {
                let js = jacobian_sample(&MapDescriptor::Spiral(k), 1.0, 3000, 5, &cfg).unwrap();
                min_exp_scale(&js, 2.0).unwrap()
            })
            .collect();
        for w in scales.windows(2) {
            let r = w[1] / w[0];
            assert!((1.8..2.2).contains(&r), "{scales:?}");
        }
    }

    #[test]
    fn record_json_fields() {
        let r =
            BmoRecord::compute(&MapDescriptor::Dilation(1.01), &IDENTITY, 1.0, 100, 3, &DiffConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for k in ["map", "A", "R", "n", "seed", "mean", "stderr"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
