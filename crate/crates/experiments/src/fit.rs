//! Least-squares fitting of an isometry `L_w ∘ R_θ ∘ J^m` to point pairs.

use heis_core::pansu::Mat2;
use heis_core::{cc_distance, inverse, IsometryDescriptor, Point};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{invalid, ExpResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "A")]
    pub a_matrix: Mat2,
    pub translation: Point,
    pub theta: f64,
    pub m: u8,
    /// Mean of `d(T(P), f(P))²`.
    pub residual: f64,
}

impl FitResult {
    pub fn isometry(&self) -> IsometryDescriptor {
        IsometryDescriptor { w: self.translation, theta: self.theta, m: self.m }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn fit_with(pairs: &[(Point, Point)], m: u8) -> ExpResult<FitResult> {
    let n = pairs.len() as f64;
    let flip = if m == 1 { -1.0 } else { 1.0 };
    let src: Vec<(f64, f64)> = pairs.iter().map(|(p, _)| (p.x, flip * p.y)).collect();
    let (ux, uy) = src.iter().fold((0.0, 0.0), |a, u| (a.0 + u.0 / n, a.1 + u.1 / n));
    let (vx, vy) = pairs.iter().fold((0.0, 0.0), |a, (_, q)| (a.0 + q.x / n, a.1 + q.y / n));
    let (mut dot, mut cross) = (0.0, 0.0);
    for ((sx, sy), (_, q)) in src.iter().zip(pairs) {
        let (a, b) = (sx - ux, sy - uy);
        let (c, d) = (q.x - vx, q.y - vy);
        dot += a * c + b * d;
        cross += a * d - b * c;
    }
    let theta = cross.atan2(dot);
    let (s, c) = theta.sin_cos();
    let wx = vx - (c * ux - s * uy);
    let wy = vy - (s * ux + c * uy);
    let flat = IsometryDescriptor::new(Point::horizontal(wx, wy), theta, m)?;
    let shifts: Vec<f64> = pairs.iter().map(|(p, q)| inverse(&flat.apply(p)).mul(q).t).collect();
    let iso = IsometryDescriptor::new(Point::new(wx, wy, median(shifts)), theta, m)?;
    let sq: Vec<f64> = pairs.par_iter().map(|(p, q)| cc_distance(&iso.apply(p), q).powi(2)).collect();
    let residual = sq.iter().sum::<f64>() / n;
    Ok(FitResult { a_matrix: iso.horizontal_matrix(), translation: iso.w, theta: iso.theta, m, residual })
}

/// Best isometry mapping each `P` near its partner `f(P)`.
///
/// The rotation comes from the closed-form 2×2 Procrustes solution on the
/// horizontal parts, the horizontal translation from the means, and the
/// vertical translation is the median of the remaining vertical offsets.
/// With `allow_reflection` both `m = 0` and `m = 1` are tried and the lower
/// residual wins.
pub fn fit_isometry(pairs: &[(Point, Point)], allow_reflection: bool) -> ExpResult<FitResult> {
    if pairs.len() < 2 {
        return invalid("fit_isometry needs at least two pairs");
    }
    if pairs.iter().any(|(p, q)| !p.is_finite() || !q.is_finite()) {
        return invalid("fit_isometry got non-finite points");
    }
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |a, (p, _)| (a.0 + p.x / n, a.1 + p.y / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (p, _) in pairs {
        sxx += (p.x - mx).powi(2);
        syy += (p.y - my).powi(2);
        sxy += (p.x - mx) * (p.y - my);
    }
    let tr = sxx + syy;
    let lam_min = 0.5 * (tr - ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt());
    if !(lam_min > 1e-12 * tr.max(f64::MIN_POSITIVE)) {
        return invalid("fit_isometry: horizontal samples are collinear");
    }
    let best = fit_with(pairs, 0)?;
    if !allow_reflection {
        return Ok(best);
    }
    let alt = fit_with(pairs, 1)?;
    Ok(if alt.residual < best.residual { alt } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use heis_core::sampling::ball_sample;
    use heis_core::MapDescriptor;

    fn data(f: &dyn Fn(&Point) -> Point, n: usize) -> Vec<(Point, Point)> {
        ball_sample(1.0, n, 17).unwrap().into_iter().map(|p| (p, f(&p))).collect()
    }

    #[test]
    fn recovers_exact_isometries() {
        let cases = [
            IsometryDescriptor::translation(Point::new(1.0, -2.0, 0.7)),
            IsometryDescriptor::rotation(2.1),
            IsometryDescriptor::reflection(),
            IsometryDescriptor::new(Point::new(-0.4, 0.9, -3.0), 4.0, 1).unwrap(),
            IsometryDescriptor::new(Point::new(0.2, 0.1, 0.3), 0.3, 0)
                .unwrap()
                .compose(&IsometryDescriptor::new(Point::new(1.0, 0.0, -1.0), 5.5, 1).unwrap()),
        ];
        for iso in cases {
            let fit = fit_isometry(&data(&|p| iso.apply(p), 500), true).unwrap();
            assert!(fit.residual <= 1e-12, "{iso:?} residual {}", fit.residual);
            assert_eq!(fit.m, iso.m);
            let t = fit.isometry();
            let err = (t.theta - iso.theta).abs().min(2.0 * std::f64::consts::PI - (t.theta - iso.theta).abs());
            assert!(err < 1e-8);
            assert!((t.w.x - iso.w.x).abs() < 1e-8 && (t.w.y - iso.w.y).abs() < 1e-8 && (t.w.t - iso.w.t).abs() < 1e-8);
            let a = fit.a_matrix;
            let ata = [
                a[0][0] * a[0][0] + a[1][0] * a[1][0],
                a[0][0] * a[0][1] + a[1][0] * a[1][1],
                a[0][1] * a[0][1] + a[1][1] * a[1][1],
            ];
            assert!((ata[0] - 1.0).abs() < 1e-10 && ata[1].abs() < 1e-10 && (ata[2] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn reflection_needed() {
        let iso = IsometryDescriptor::new(Point::origin(), 0.8, 1).unwrap();
        let d = data(&|p| iso.apply(p), 300);
        let with = fit_isometry(&d, true).unwrap();
        let without = fit_isometry(&d, false).unwrap();
        assert_eq!(without.m, 0);
        assert!(without.residual > with.residual);
    }

    #[test]
    fn dilation_fit_is_near_identity() {
        let eps = 1e-3;
        let m = MapDescriptor::Dilation(1.0 + eps);
        let fit = fit_isometry(&data(&|p| m.eval(p).unwrap(), 2000), true).unwrap();
        assert_eq!(fit.m, 0);
        assert!(fit.theta.min(2.0 * std::f64::consts::PI - fit.theta) < 1e-12);
        // least-squares translation is ε times the sample mean
        assert!(fit.translation.z_norm() < eps && fit.translation.t.abs() < 1e-3);
        // mean squared error is a few times ε (vertical errors enter as √(π|Δt|))
        assert!(fit.residual > 0.1 * eps && fit.residual < 2.0 * eps, "{}", fit.residual);
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<(Point, Point)> =
            (0..10).map(|i| (Point::horizontal(i as f64, 2.0 * i as f64), Point::origin())).collect();
        assert!(fit_isometry(&line, true).is_err());
        assert!(fit_isometry(&line[..1], true).is_err());
    }
}
