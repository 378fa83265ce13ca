//! Single-shot checks: the sphere tangency near a geodesic endpoint, the
//! long-lifetime geodesic asymptotics and the two appendix distances.

use heis_core::sampling::rng_for;
use heis_core::{
    cc_distance, cc_norm, geodesic_point, inverse, solve_polar, sphere_point, GeodesicParams, Point, SpherePoint,
};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::report::{Check, ExperimentReport, Row};
use crate::{invalid, ExpResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SestoConfig {
    pub q: f64,
    pub s: f64,
    /// Enlargement factors, descending. Zero is allowed.
    pub sigmas: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Constant in `|z − 2q| ≤ C₀ q σ^{1/4}`.
    pub c0: f64,
    /// Largest admissible σ.
    pub sigma0: f64,
    /// Tolerance for `max t ≤ 0` on the unenlarged sphere.
    pub tol: f64,
    /// Required window for the fitted σ-slope of `sup |z − 2q|`.
    pub slope_window: (f64, f64),
}

impl Default for SestoConfig {
    fn default() -> Self {
        SestoConfig {
            q: 1.0,
            s: PI / 2.0,
            sigmas: vec![1e-4],
            samples: 100_000,
            seed: 0,
            c0: 10.0,
            sigma0: 1e-3,
            tol: 1e-8,
            slope_window: (0.2, 0.35),
        }
    }
}

struct Sphere {
    centre: Point,
    r: f64,
}

impl Sphere {
    fn at(&self, alpha: f64, phi: f64) -> Point {
        let lim = 2.0 * PI / self.r;
        let sp = SpherePoint { r: self.r, phi: phi.clamp(-lim, lim), alpha };
        self.centre.mul(&sphere_point(&sp).expect("clamped sphere parameters"))
    }

    fn random(&self, seed: u64, i: u64) -> Point {
        let mut rng = rng_for(seed, i);
        let lim = 2.0 * PI / self.r;
        self.at(rng.gen_range(0.0..2.0 * PI), rng.gen_range(-lim..=lim))
    }
}

fn maximize_t(sp: &Sphere, mut a: f64, mut f: f64) -> (f64, f64, f64) {
    let mut best = sp.at(a, f).t;
    let mut step = 0.05;
    while step > 1e-13 {
        let mut moved = false;
        for (da, df) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let (na, nf) = (a + da * step, f + df * step / sp.r);
            let v = sp.at(na, nf).t;
            if v > best {
                (a, f, best) = (na, nf, v);
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (a, f, best)
}

/// Parameter box `[a ± ha] × [f ± hf]` whose boundary lies strictly below
/// the plane `t = 0`.
fn cap_window(sp: &Sphere, a: f64, f: f64) -> (f64, f64) {
    let mut h = 1e-7;
    loop {
        let hf = h / sp.r;
        let k = 64;
        let above = (0..k).any(|i| {
            let u = -1.0 + 2.0 * i as f64 / k as f64;
            [sp.at(a + u * h, f - hf), sp.at(a + u * h, f + hf), sp.at(a - h, f + u * hf), sp.at(a + h, f + u * hf)]
                .iter()
                .any(|p| p.t > 0.0)
        });
        if !above || h >= PI {
            return (h, hf);
        }
        h *= 2.0;
    }
}

/// The sphere `S(P, d(P,Q))` through `Q = (2q,0,0)` stays below the plane
/// `t = 0`, and the part of the enlarged sphere `S(P, (1+σ)d(P,Q))` above
/// the plane projects into a disc about `2q` of radius `C₀ q σ^{1/4}`.
///
/// `P` is the point at arclength `s` on the geodesic of curvature `1/q`
/// starting at `(0,0,−2πq²)` that reaches `Q` at arclength `πq`.
pub fn check_sesto(cfg: &SestoConfig) -> ExpResult<ExperimentReport> {
    let q = cfg.q;
    if !(q > 0.0 && q.is_finite()) {
        return invalid("q must be positive");
    }
    if cfg.sigmas.is_empty() || cfg.samples < 10 || !(cfg.c0 > 0.0) {
        return invalid("need at least one sigma, ten samples and a positive C0");
    }
    let ratio = cfg.s / q;
    for &sigma in &cfg.sigmas {
        if !(0.0..=cfg.sigma0).contains(&sigma) {
            return invalid(format!("sigma {sigma} outside [0, {}]", cfg.sigma0));
        }
        let (lo, hi) = (sigma.powf(0.125), PI - sigma.powf(0.0625));
        if !(ratio >= lo && ratio <= hi) {
            return invalid(format!("s/q = {ratio} outside [{lo}, {hi}] for sigma {sigma}"));
        }
    }
    if cfg.sigmas.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("sigmas must be strictly decreasing");
    }

    let g = GeodesicParams::lifted_family(q, 0.0)?;
    let p = geodesic_point(&g, cfg.s);
    let target = Point::horizontal(2.0 * q, 0.0);
    let d = cc_distance(&p, &target);
    let rel = inverse(&p).mul(&target);
    let pol = solve_polar(&rel)?;
    let alpha_q = rel.y.atan2(rel.x);
    let phi_q = rel.t.signum() * pol.psi / d;

    let mut report = ExperimentReport::new("sesto", "sphere", serde_json::to_value(cfg)?);

    // statement 1
    let sphere = Sphere { centre: p, r: d };
    let n = cfg.samples as u64;
    let pts: Vec<Point> = (0..n).into_par_iter().map(|i| sphere.random(cfg.seed, i)).collect();
    let max_t = pts.iter().map(|x| x.t).fold(sphere.at(alpha_q, phi_q).t, f64::max);
    let spread = pts.iter().filter(|x| x.t > -1e-3 * q * q).map(|x| (x.x - 2.0 * q).hypot(x.y)).fold(0.0, f64::max);
    report.check(Check::new(
        "touches_only_at_q",
        max_t <= cfg.tol && spread <= 0.25 * q,
        format!(
            "max t = {max_t:e} (tol {:e}); samples within 1e-3 q² of the plane lie within {spread:.3e} of Q",
            cfg.tol
        ),
    ));

    // statement 2
    let mut strays = 0usize;
    for (k, &sigma) in cfg.sigmas.iter().enumerate() {
        let big = Sphere { centre: p, r: (1.0 + sigma) * d };
        let (a0, f0, top) = maximize_t(&big, alpha_q, phi_q / (1.0 + sigma));
        let bound = cfg.c0 * q * sigma.powf(0.25);
        let seed = rng_for(cfg.seed, 1 + k as u64).gen::<u64>();
        if top <= 0.0 {
            report.rows.push(Row::new(sigma, 0.0, bound).with("cap_points", 0).with("cap_top", top));
            continue;
        }
        let (ha, hf) = cap_window(&big, a0, f0);
        let cap: Vec<Point> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(seed, i);
                big.at(a0 + rng.gen_range(-ha..=ha), f0 + rng.gen_range(-hf..=hf))
            })
            .filter(|x| x.t > 0.0)
            .collect();
        let sup = cap.iter().map(|x| (x.x - 2.0 * q).hypot(x.y)).fold(0.0, f64::max);
        // positive points found by global sampling must lie in the window
        let window_reach = sup.max(1e-300);
        strays += (0..n / 4)
            .into_par_iter()
            .map(|i| big.random(seed ^ 0x5a5a, i))
            .filter(|x| x.t > 0.0 && (x.x - 2.0 * q).hypot(x.y) > 2.0 * window_reach + 1e-9)
            .count();
        report.rows.push(
            Row::new(sigma, sup, bound).with("cap_points", cap.len()).with("cap_top", top).with("window", [ha, hf]),
        );
    }
    report.check(Check::new("cap_connected", strays == 0, format!("{strays} positive sample(s) away from Q")));
    let mut report = report.finish();
    if let Some(s) = report.slope {
        let (lo, hi) = cfg.slope_window;
        let ok = (lo..=hi).contains(&s);
        report.checks.push(Check::new("slope", ok, format!("σ-slope of sup|z−2q| = {s:.4}, required in [{lo}, {hi}]")));
        report.pass = report.pass && ok;
    }
    Ok(report)
}

/// Geodesic from the origin with lifetime `R`, evaluated at arclength 1:
/// `t(1)·R → 2π/3` and `(1 − |z(1)|)·R² → π²/6`. Rows carry the larger of
/// the two relative errors against a 1% bound, with `eps = 1/R`.
pub fn check_cartozzo_b(r_grid: &[f64]) -> ExpResult<ExperimentReport> {
    if r_grid.is_empty() || r_grid.iter().any(|&r| !(r >= 10.0 && r.is_finite())) {
        return invalid("lifetimes must be finite and at least 10");
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("lifetimes must be strictly increasing");
    }
    let t_lim = 2.0 * PI / 3.0;
    let z_lim = PI * PI / 6.0;
    let mut report = ExperimentReport::new("cartozzo-b", "geodesic", serde_json::json!({ "R": r_grid }));
    let mut et = Vec::new();
    let mut ez = Vec::new();
    for &r in r_grid {
        let g = GeodesicParams::from_origin(2.0 * PI / r, 0.0);
        let p = geodesic_point(&g, 1.0);
        let tr = p.t * r;
        let zr = (1.0 - p.z_norm()) * r * r;
        let (e1, e2) = ((tr - t_lim).abs(), (zr - z_lim).abs());
        et.push(e1);
        ez.push(e2);
        report.rows.push(
            Row::new(1.0 / r, (e1 / t_lim).max(e2 / z_lim), 0.01)
                .with("R", r)
                .with("t_times_R", tr)
                .with("defect_times_R2", zr)
                .with("t_error", e1)
                .with("z_error", e2),
        );
    }
    let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    report.check(Check::new("decreasing", dec(&et) && dec(&ez), format!("t errors {et:?}, z errors {ez:?}")));
    Ok(report.finish())
}

/// `d₀(0,1,1)` and `d₀(0,1,3)` differ by more than 0.01; sanity values
/// `d₀(0,1,0) = 1` and `d₀(0,0,1) = √π`.
pub fn appendix_inequality_check() -> ExpResult<ExperimentReport> {
    let d1: f64 = cc_norm(&Point::new(0.0, 1.0, 1.0));
    let d3 = cc_norm(&Point::new(0.0, 1.0, 3.0));
    let d_plane: f64 = cc_norm(&Point::new(0.0, 1.0, 0.0));
    let d_axis = cc_norm(&Point::new(0.0, 0.0, 1.0));
    let mut report = ExperimentReport::new(
        "appendix",
        "distance",
        serde_json::json!({ "d(0,1,1)": d1, "d(0,1,3)": d3, "d(0,1,0)": d_plane, "d(0,0,1)": d_axis }),
    );
    report.check(Check::new("distinct", (d1 - d3).abs() > 0.01, format!("d(0,1,1) = {d1:.12}, d(0,1,3) = {d3:.12}")));
    report.check(Check::new("planar", (d_plane - 1.0).abs() <= 1e-12, format!("d(0,1,0) = {d_plane:.12}")));
    report.check(Check::new("axis", (d_axis - PI.sqrt()).abs() <= 1e-12, format!("d(0,0,1) = {d_axis:.12}")));
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sesto_single_sigma_passes() {
        let cfg = SestoConfig { samples: 20_000, seed: 3, ..Default::default() };
        let rep = check_sesto(&cfg).unwrap();
        assert!(rep.pass, "{}\n{}", rep.summary_line(), rep.to_json());
        assert!(rep.rows[0].error > 0.0);
    }

    #[test]
    fn sesto_zero_sigma_cap_is_q() {
        let cfg = SestoConfig { sigmas: vec![0.0], samples: 2000, ..Default::default() };
        let rep = check_sesto(&cfg).unwrap();
        assert!(rep.rows[0].error < 1e-6, "{}", rep.rows[0].error);
    }

    #[test]
    fn sesto_rejects_bad_parameters() {
        let base = SestoConfig { samples: 100, ..Default::default() };
        assert!(check_sesto(&SestoConfig { sigmas: vec![1e-2], ..base.clone() }).is_err());
        assert!(check_sesto(&SestoConfig { s: 0.1, ..base.clone() }).is_err());
        assert!(check_sesto(&SestoConfig { s: 3.0, ..base.clone() }).is_err());
        assert!(check_sesto(&SestoConfig { q: 0.0, ..base }).is_err());
    }

    #[test]
    fn sesto_scales_with_q() {
        let a = check_sesto(&SestoConfig { samples: 20_000, ..Default::default() }).unwrap();
        let b = check_sesto(&SestoConfig { q: 2.0, s: PI / 2.0 * 2.0, samples: 20_000, ..Default::default() }).unwrap();
        let r = b.rows[0].error / a.rows[0].error;
        assert!((r - 2.0).abs() < 0.1, "{r}");
    }

    #[test]
    fn cartozzo_values() {
        let rep = check_cartozzo_b(&[10.0, 100.0, 1000.0]).unwrap();
        let at100 = &rep.rows[1];
        assert_eq!(at100.extra["R"], 100.0);
        assert!(at100.error < 0.01);
        assert!(rep.find_check("decreasing").unwrap().pass);
        let e10 = rep.rows[0].extra["t_error"].as_f64().unwrap();
        let e100 = at100.extra["t_error"].as_f64().unwrap();
        assert!((e10 / e100 - 100.0).abs() < 5.0, "{}", e10 / e100);
        assert!(check_cartozzo_b(&[5.0]).is_err());
    }

    #[test]
    fn appendix_values() {
        let rep = appendix_inequality_check().unwrap();
        assert!(rep.pass);
        assert_abs_diff_eq!(rep.config["d(0,1,1)"].as_f64().unwrap(), 1.290_95, epsilon = 1e-5);
        assert_abs_diff_eq!(rep.config["d(0,1,3)"].as_f64().unwrap(), 2.255_28, epsilon = 1e-5);
    }
}
