//! Stability harnesses: one function per statement, run over an ε grid.

use heis_core::pansu::{bmo_average, det, DiffConfig, Mat2};
use heis_core::sampling::{ball_sample_at, disc_sample, rng_for};
use heis_core::{bilip_estimate, cc_distance, sphere_point, IsometryDescriptor, MapDescriptor, Point, SpherePoint};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::family::{normalized, MapFamily};
use crate::fit::{fit_isometry, FitResult};
use crate::report::{Check, ExperimentReport, Row, NOISE_FLOOR};
use crate::{invalid, EpsGrid, ExpResult};

/// Knobs shared by the harnesses. Everything a report depends on lives here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    /// Constant in every bound `C·ε^a`.
    pub c: f64,
    pub seed: u64,
    pub grid: EpsGrid,
    /// Ball or disc radius `R`.
    pub radius: f64,
    /// Ball centre for the full-isometry fit.
    pub centre: Point,
    /// Points per row for the fits.
    pub samples: usize,
    /// Finest dyadic subdivision of `[-L, L]` for the chord test.
    pub intervals: usize,
    /// Half length `L` of the base interval.
    pub half_length: f64,
    /// Points along the enlarged path `[-L/√ε, L/√ε]`.
    pub path_samples: usize,
    /// Axis heights `t` in `(0, t_max]` (both signs are used).
    pub t_max: f64,
    pub t_points: usize,
    /// Monte-Carlo sample count for ball averages.
    pub mc_samples: usize,
    pub diff: DiffConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            c: 10.0,
            seed: 0,
            grid: EpsGrid::default(),
            radius: 1.0,
            centre: Point::origin(),
            samples: 2000,
            intervals: 64,
            half_length: 1.0,
            path_samples: 400,
            t_max: 1.0,
            t_points: 40,
            mc_samples: 200_000,
            diff: DiffConfig::default(),
        }
    }
}

impl HarnessConfig {
    pub fn with_seed(seed: u64) -> Self {
        HarnessConfig { seed, ..Default::default() }
    }

    fn validate(&self) -> ExpResult<()> {
        if !(self.c > 0.0) || !(self.radius > 0.0) || !(self.half_length > 0.0) || !(self.t_max > 0.0) {
            return invalid("c, radius, half_length and t_max must be positive");
        }
        if self.samples < 3 || self.path_samples < 2 || self.t_points == 0 || self.mc_samples == 0 {
            return invalid("sample counts too small");
        }
        if !self.intervals.is_power_of_two() {
            return invalid("intervals must be a power of two");
        }
        self.diff.validate()?;
        Ok(())
    }

    fn row_seed(&self, row: usize) -> u64 {
        rng_for(self.seed, row as u64).gen()
    }

    fn provenance(&self, family: MapFamily) -> serde_json::Value {
        let members: Vec<String> =
            self.grid.values().iter().map(|&e| family.member(e).map(|m| m.to_string()).unwrap_or_default()).collect();
        serde_json::json!({ "harness": self, "family": family.name(), "maps": members })
    }
}

fn rows_parallel<F>(cfg: &HarnessConfig, f: F) -> ExpResult<Vec<Row>>
where
    F: Fn(usize, f64) -> ExpResult<Row> + Sync,
{
    cfg.grid.values().par_iter().enumerate().map(|(i, &e)| f(i, e)).collect()
}

fn finish(mut report: ExperimentReport, min_slope: f64) -> ExperimentReport {
    report = report.finish();
    let resolved = report.rows.iter().any(|r| r.error > NOISE_FLOOR);
    if let (Some(s), true) = (report.slope, resolved) {
        report.checks.push(Check::new("slope", s >= min_slope, format!("fitted slope {s:.4}, required ≥ {min_slope}")));
        report.pass = report.pass && s >= min_slope;
    }
    report
}

/// Image of the straight line `s ↦ (s,0,0)` under a (1+ε)-map: chord ratios
/// on dyadic intervals, `sup |τ(s)|/s²` along the enlarged domain, and cone
/// avoidance `|τ| ≤ C ε^{1/4} |ζ|²`.
pub fn run_theorem_a(family: MapFamily, cfg: &HarnessConfig) -> ExpResult<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new("a", family.name(), cfg.provenance(family));
    let rows = rows_parallel(cfg, |_, eps| {
        let f = normalized(family.member(eps)?)?;
        let l = cfg.half_length;
        let n = cfg.intervals;
        let knots: Vec<f64> = (0..=n).map(|i| -l + 2.0 * l * i as f64 / n as f64).collect();
        let img: Vec<Point> = knots.iter().map(|&s| f.eval(&Point::horizontal(s, 0.0))).collect::<Result<_, _>>()?;
        let mut chord_min = f64::INFINITY;
        let mut width = n;
        while width >= 1 {
            for start in (0..n).step_by(width) {
                let (a, b) = (&img[start], &img[start + width]);
                let ratio = (b.x - a.x).hypot(b.y - a.y) / (knots[start + width] - knots[start]);
                chord_min = chord_min.min(ratio);
            }
            width /= 2;
        }
        let deficit = (1.0 - chord_min).max(0.0);
        let chord_bound = cfg.c * eps.sqrt();

        let big = l / eps.sqrt();
        let m = cfg.path_samples;
        let ss: Vec<f64> = (0..m)
            .map(|i| -big + 2.0 * big * (i as f64 + 0.5) / m as f64)
            .chain(knots.iter().copied())
            .filter(|s| s.abs() > 1e-9)
            .collect();
        let path: Vec<(f64, Point)> =
            ss.par_iter().map(|&s| f.eval(&Point::horizontal(s, 0.0)).map(|p| (s, p))).collect::<Result<_, _>>()?;
        let tau = path.iter().map(|(s, p)| p.t.abs() / (s * s)).fold(0.0, f64::max);
        let tau_bound = cfg.c * eps.powf(0.25);
        let cone_c = cfg.c * eps.powf(0.25);
        let cone_violations = path.iter().filter(|(_, p)| p.t.abs() > cone_c * p.z_norm().powi(2)).count();

        let line_pairs: Vec<(Point, Point)> = path
            .windows(2)
            .map(|w| (Point::horizontal(w[0].0, 0.0), Point::horizontal(w[1].0, 0.0)))
            .chain(path.iter().map(|(s, _)| (Point::horizontal(*s, 0.0), Point::horizontal(-0.5 * s, 0.0))))
            .collect();
        let (distortion, flagged) = match bilip_estimate(&f, &line_pairs) {
            Ok(b) => {
                let d = b.upper.max(1.0 / b.lower);
                (Some(d), d > 1.0 + cfg.c * eps)
            }
            Err(_) => (None, true),
        };

        let mut row = Row::new(eps, tau, tau_bound)
            .with("chord_min", chord_min)
            .with("chord_deficit", deficit)
            .with("chord_bound", chord_bound)
            .with("cone_violations", cone_violations)
            .with("path_points", path.len())
            .with("distortion", distortion);
        row.pass = tau <= tau_bound && deficit <= chord_bound && cone_violations == 0;
        row.flagged = flagged;
        Ok(row)
    })?;
    let cone_total: u64 = rows.iter().map(|r| r.extra["cone_violations"].as_u64().unwrap_or(0)).sum();
    report.check(Check::new("cone", cone_total == 0, format!("{cone_total} path point(s) inside the cone")));
    report.rows = rows;
    Ok(finish(report, 0.25))
}

fn plane_fit(f: &MapDescriptor, cfg: &HarnessConfig, seed: u64) -> ExpResult<(Vec<(Point, Point)>, FitResult)> {
    let r = cfg.radius;
    let mut pts = disc_sample(r, cfg.samples, seed)?;
    let ring = 64;
    pts.extend((0..ring).map(|i| {
        let a = 2.0 * PI * i as f64 / ring as f64;
        Point::horizontal(r * a.cos(), r * a.sin())
    }));
    let pairs: Vec<(Point, Point)> = pts.par_iter().map(|p| f.eval(p).map(|q| (*p, q))).collect::<Result<_, _>>()?;
    let fit = fit_isometry(&pairs, true)?;
    Ok((pairs, fit))
}

fn apply_matrix(a: &Mat2, p: &Point) -> Point {
    Point::horizontal(a[0][0] * p.x + a[0][1] * p.y, a[1][0] * p.x + a[1][1] * p.y)
}

/// Planar stability: `sup_{|z| ≤ R} d(f(z;0), (Az;0)) / R` for the best
/// fitted `A ∈ O(2)`; bound `C ε^{1/16}`.
pub fn run_theorem_b(family: MapFamily, cfg: &HarnessConfig) -> ExpResult<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new("b", family.name(), cfg.provenance(family));
    report.rows = rows_parallel(cfg, |i, eps| {
        let f = normalized(family.member(eps)?)?;
        let (pairs, fit) = plane_fit(&f, cfg, cfg.row_seed(i))?;
        let a = fit.a_matrix;
        let err =
            pairs.par_iter().map(|(p, q)| cc_distance(q, &apply_matrix(&a, p))).reduce(|| 0.0, f64::max) / cfg.radius;
        Ok(Row::new(eps, err, cfg.c * eps.powf(1.0 / 16.0)).with("A", a).with("det_A", det(&a)))
    })?;
    Ok(finish(report, 1.0 / 16.0))
}

/// Vertical axis: `sup_t d(f(0;t), (0;t)) / √(π|t|)`, after possibly
/// composing with `(x,y,t) ↦ (x,−y,−t)`; bound `C ε^{1/32}`. When the planar
/// fit has `det A = +1`, also checks `τ(0,0,t)/t > 0`.
pub fn run_theorem_c(family: MapFamily, cfg: &HarnessConfig) -> ExpResult<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new("c", family.name(), cfg.provenance(family));
    let ts: Vec<f64> = (1..=cfg.t_points)
        .flat_map(|j| {
            let t = cfg.t_max * j as f64 / cfg.t_points as f64;
            [t, -t]
        })
        .collect();
    let rows = rows_parallel(cfg, |i, eps| {
        let f = normalized(family.member(eps)?)?;
        let reflected =
            MapDescriptor::composition(vec![MapDescriptor::Isometry(IsometryDescriptor::reflection()), f.clone()])?;
        let sup_err = |g: &MapDescriptor| -> ExpResult<(f64, Vec<Point>)> {
            let imgs: Vec<Point> = ts.iter().map(|&t| g.eval(&Point::vertical(t))).collect::<Result<_, _>>()?;
            let e = ts
                .iter()
                .zip(&imgs)
                .map(|(&t, q)| cc_distance(q, &Point::vertical(t)) / (PI * t.abs()).sqrt())
                .fold(0.0, f64::max);
            Ok((e, imgs))
        };
        let (e_plain, img_plain) = sup_err(&f)?;
        let (e_refl, img_refl) = sup_err(&reflected)?;
        let use_refl = e_refl < e_plain;
        let err = e_plain.min(e_refl);

        let (_, fit) = plane_fit(&f, cfg, cfg.row_seed(i))?;
        let det_a = det(&fit.a_matrix);
        // orientation-preserving representative
        let imgs = if det_a > 0.0 { &img_plain } else { &img_refl };
        let sign_ok = ts.iter().zip(imgs).all(|(&t, q)| q.t / t > 0.0);
        let mut row = Row::new(eps, err, cfg.c * eps.powf(1.0 / 32.0))
            .with("reflected", use_refl)
            .with("det_A", det_a)
            .with("vertical_sign_ok", sign_ok);
        row.pass = row.pass && sign_ok;
        Ok(row)
    })?;
    let signs = rows.iter().all(|r| r.extra["vertical_sign_ok"] == serde_json::Value::Bool(true));
    report.check(Check::new("vertical_sign", signs, "τ(0,0,t)/t > 0 for the orientation-preserving representative"));
    report.rows = rows;
    Ok(finish(report, 1.0 / 32.0))
}

fn ball_with_boundary(cfg: &HarnessConfig, seed: u64) -> ExpResult<Vec<Point>> {
    let r = cfg.radius;
    let mut pts = ball_sample_at(&cfg.centre, r, cfg.samples, seed)?;
    let extra = (cfg.samples / 4).max(8) as u64;
    for i in 0..extra {
        let mut rng = rng_for(seed ^ 0xB0B, i);
        let sp =
            SpherePoint { r, phi: rng.gen_range(-2.0 * PI / r..=2.0 * PI / r), alpha: rng.gen_range(0.0..2.0 * PI) };
        pts.push(cfg.centre.mul(&sphere_point(&sp)?));
    }
    for t in [r * r / PI, -r * r / PI] {
        pts.push(cfg.centre.mul(&Point::vertical(t)));
    }
    Ok(pts)
}

/// Global stability on a ball: `sup_{P ∈ B(P₀,R)} d(f(P), T(P)) / R` for the
/// fitted isometry `T`; bound `C ε^{1/2^{11}}`.
pub fn run_theorem_d(family: MapFamily, cfg: &HarnessConfig) -> ExpResult<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new("d", family.name(), cfg.provenance(family));
    report.rows = rows_parallel(cfg, |i, eps| {
        let f = normalized(family.member(eps)?)?;
        let pts = ball_with_boundary(cfg, cfg.row_seed(i))?;
        let pairs: Vec<(Point, Point)> =
            pts.par_iter().map(|p| f.eval(p).map(|q| (*p, q))).collect::<Result<_, _>>()?;
        let fit = fit_isometry(&pairs, true)?;
        let t = fit.isometry();
        let err = pairs.par_iter().map(|(p, q)| cc_distance(q, &t.apply(p))).reduce(|| 0.0, f64::max) / cfg.radius;
        Ok(Row::new(eps, err, cfg.c * eps.powf(1.0 / 2048.0)).with("fit", fit))
    })?;
    Ok(finish(report, 1.0 / 2048.0))
}

/// Ball average of `‖Jf − A‖` with `A` from the planar fit; bound
/// `C ε^{1/2^{12}}`.
pub fn run_theorem_e(family: MapFamily, cfg: &HarnessConfig) -> ExpResult<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new("e", family.name(), cfg.provenance(family));
    report.rows = rows_parallel(cfg, |i, eps| {
        let f = normalized(family.member(eps)?)?;
        let seed = cfg.row_seed(i);
        let (_, fit) = plane_fit(&f, cfg, seed)?;
        let est = bmo_average(&f, &fit.a_matrix, cfg.radius, cfg.mc_samples, seed, &cfg.diff)?;
        Ok(Row::new(eps, est.mean, cfg.c * eps.powf(1.0 / 4096.0))
            .with("stderr", est.stderr)
            .with("n_used", est.n)
            .with("A", fit.a_matrix))
    })?;
    Ok(finish(report, 1.0 / 4096.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(seed: u64) -> HarnessConfig {
        HarnessConfig {
            seed,
            grid: EpsGrid::new(vec![1e-1, 1e-2, 1e-3]).unwrap(),
            samples: 600,
            path_samples: 200,
            t_points: 10,
            mc_samples: 2000,
            ..Default::default()
        }
    }

    fn row_f64(r: &Row, k: &str) -> f64 {
        r.extra[k].as_f64().unwrap()
    }

    #[test]
    fn theorem_a_spiral_tau_is_k() {
        let rep = run_theorem_a(MapFamily::Spiral, &small(1)).unwrap();
        for r in &rep.rows {
            assert!((r.error - r.eps).abs() <= 1e-12 * r.eps.max(1.0), "{} vs {}", r.error, r.eps);
        }
        assert!(rep.pass, "{}", rep.summary_line());
    }

    #[test]
    fn theorem_a_dilation_and_isometry() {
        let rep = run_theorem_a(MapFamily::Dilation, &small(1)).unwrap();
        for r in &rep.rows {
            assert_eq!(r.error, 0.0);
            assert_abs_diff_eq!(row_f64(r, "chord_min"), 1.0 + r.eps, epsilon = 1e-12);
        }
        let rep = run_theorem_a(MapFamily::Isometry, &small(1)).unwrap();
        for r in &rep.rows {
            assert!(r.error < 1e-12);
            assert_abs_diff_eq!(row_f64(r, "chord_min"), 1.0, epsilon = 1e-12);
        }
        assert!(rep.pass);
    }

    #[test]
    fn theorem_b_dilation_error_is_eps() {
        let rep = run_theorem_b(MapFamily::Dilation, &small(2)).unwrap();
        for r in &rep.rows {
            assert_abs_diff_eq!(r.error, r.eps, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(rep.slope.unwrap(), 1.0, epsilon = 1e-9);
        let rep = run_theorem_b(MapFamily::Isometry, &small(2)).unwrap();
        assert!(rep.rows.iter().all(|r| r.error < 1e-6));
        let rep = run_theorem_b(MapFamily::Spiral, &small(2)).unwrap();
        assert!(rep.pass && rep.slope.unwrap() >= 1.0 / 16.0, "{}", rep.summary_line());
    }

    #[test]
    fn theorem_c_dilation_exact() {
        let rep = run_theorem_c(MapFamily::Dilation, &small(3)).unwrap();
        for r in &rep.rows {
            let exact = (2.0 * r.eps + r.eps * r.eps).sqrt();
            assert_abs_diff_eq!(r.error, exact, epsilon = 1e-9);
        }
        assert!(rep.pass);
        for fam in [MapFamily::Isometry, MapFamily::KrFlow] {
            let rep = run_theorem_c(fam, &small(3)).unwrap();
            assert!(rep.rows.iter().all(|r| r.error < 1e-6), "{fam}");
            assert!(rep.pass);
        }
    }

    #[test]
    fn theorem_d_dilation_sqrt_scaling() {
        let rep = run_theorem_d(MapFamily::Dilation, &small(4)).unwrap();
        for r in &rep.rows {
            // at least the value at the poles, √(2ε+ε²), minus the fitted shift
            let ratio = r.error / r.eps.sqrt();
            assert!((1.2..2.1).contains(&ratio), "eps {} error {}", r.eps, r.error);
        }
        let s = rep.slope.unwrap();
        assert!((0.45..=0.55).contains(&s), "{s}");
        let rep = run_theorem_d(MapFamily::Isometry, &small(4)).unwrap();
        assert!(rep.rows.iter().all(|r| r.error < 1e-6));
    }

    #[test]
    fn theorem_e_values() {
        let rep = run_theorem_e(MapFamily::Dilation, &small(5)).unwrap();
        for r in &rep.rows {
            assert_abs_diff_eq!(r.error, r.eps, epsilon = 1e-7 * r.eps.max(1.0));
        }
        let rep = run_theorem_e(MapFamily::Isometry, &small(5)).unwrap();
        assert!(rep.rows.iter().all(|r| r.error <= 1e-8));
        let rep = run_theorem_e(MapFamily::Spiral, &small(5)).unwrap();
        assert!(rep.rows.iter().all(|r| r.error <= 3.0 * r.eps));
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_theorem_d(MapFamily::Spiral, &small(9)).unwrap().to_json();
        let b = run_theorem_d(MapFamily::Spiral, &small(9)).unwrap().to_json();
        assert_eq!(a, b);
    }
}
