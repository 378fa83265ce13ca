//! Seeded sampling of control balls, discs and point pairs.
//!
//! Every sample `i` draws from its own ChaCha stream keyed by `(seed, i)`, so
//! the output is identical however rayon schedules the work.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::{FRAC_2_PI, PI};

use crate::error::{invalid, Result};
use crate::geodesics::cc_norm;
use crate::group::Point;

/// Rejection draws allowed per accepted ball sample before giving up.
const MAX_TRIES: usize = 10_000;

/// RNG for sample `index` of a run keyed by `seed`.
pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Ball samples together with the number of box draws it took.
#[derive(Debug, Clone)]
pub struct BallSample {
    pub points: Vec<Point>,
    pub draws: u64,
}

impl BallSample {
    pub fn acceptance_ratio(&self) -> f64 {
        self.points.len() as f64 / self.draws as f64
    }
}

fn draw_in_ball(r: f64, rng: &mut ChaCha8Rng) -> (Point, u64) {
    let h = FRAC_2_PI * r * r;
    for k in 1..=MAX_TRIES {
        let p = Point::new(rng.gen_range(-r..=r), rng.gen_range(-r..=r), rng.gen_range(-h..=h));
        if cc_norm(&p) < r {
            return (p, k as u64);
        }
    }
    // unreachable in practice: acceptance is about 0.65
    (Point::origin(), MAX_TRIES as u64)
}

/// `n` points uniform in the open ball `B(O, r)`, with draw statistics.
pub fn ball_sample_stats(r: f64, n: usize, seed: u64) -> Result<BallSample> {
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!("ball radius must be positive, got {r}"));
    }
    if n == 0 {
        return invalid("sample count must be positive");
    }
    let drawn: Vec<(Point, u64)> =
        (0..n as u64).into_par_iter().map(|i| draw_in_ball(r, &mut rng_for(seed, i))).collect();
    let draws = drawn.iter().map(|d| d.1).sum();
    Ok(BallSample { points: drawn.into_iter().map(|d| d.0).collect(), draws })
}

/// `n` points uniform in `B(O, r)`.
pub fn ball_sample(r: f64, n: usize, seed: u64) -> Result<Vec<Point>> {
    Ok(ball_sample_stats(r, n, seed)?.points)
}

/// `n` points uniform in `B(center, r)`.
pub fn ball_sample_at(center: &Point, r: f64, n: usize, seed: u64) -> Result<Vec<Point>> {
    Ok(ball_sample(r, n, seed)?.into_iter().map(|p| center.mul(&p)).collect())
}

/// `n` points uniform in the planar disc `|z| <= r`, `t = 0`.
pub fn disc_sample(r: f64, n: usize, seed: u64) -> Result<Vec<Point>> {
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!("disc radius must be positive, got {r}"));
    }
    if n == 0 {
        return invalid("sample count must be positive");
    }
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let rad = r * rng.gen::<f64>().sqrt();
            let ang = rng.gen_range(0.0..2.0 * PI);
            Point::horizontal(rad * ang.cos(), rad * ang.sin())
        })
        .collect())
}

/// `n` independent pairs of points uniform in `B(O, r)`.
pub fn pair_sample(r: f64, n: usize, seed: u64) -> Result<Vec<(Point, Point)>> {
    let pts = ball_sample(r, 2 * n, seed)?;
    Ok(pts.chunks_exact(2).map(|c| (c[0], c[1])).collect())
}
