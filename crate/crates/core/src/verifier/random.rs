//! Seeded generators for random test instances.

use rand::seq::index::sample;
use rand::Rng;

use crate::covering::filter_containment;
use crate::domain::{Ball, RayStep, SpiderPoint, StepFunction};
use crate::scalar::{ratio, Rational};

/// A step function with up to `max_pieces` pieces per ray, cut points in
/// `(0.01, 0.99)` and values in `[-4, 4]`, about one piece in eight zero.
pub fn step_f64(rng: &mut impl Rng, k: usize, max_pieces: usize) -> StepFunction<f64> {
    let rays = (0..k)
        .map(|_| {
            let m = rng.gen_range(1..=max_pieces);
            let mut cuts: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(0.01..0.99)).collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            cuts.dedup();
            let mut breaks = vec![0.0];
            breaks.extend(cuts);
            breaks.push(1.0);
            let values = (0..breaks.len() - 1)
                .map(|_| {
                    if rng.gen_bool(0.125) {
                        0.0
                    } else {
                        rng.gen_range(-4.0..4.0)
                    }
                })
                .collect();
            RayStep::new(breaks, values).expect("valid by construction")
        })
        .collect();
    StepFunction::new(rays).expect("k >= 1")
}

fn rational_breaks(rng: &mut impl Rng, pieces: usize, denom: i64) -> Vec<Rational> {
    let pieces = pieces.min(denom as usize);
    let mut cuts: Vec<usize> = sample(rng, denom as usize - 1, pieces - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut breaks = vec![ratio(0, 1)];
    breaks.extend(cuts.into_iter().map(|c| ratio(c as i64, denom)));
    breaks.push(ratio(1, 1));
    breaks
}

/// A step function with rational cut points `c/denom` and integer values in
/// `[-max_value, max_value]`.
pub fn step_exact(
    rng: &mut impl Rng,
    k: usize,
    max_pieces: usize,
    denom: i64,
    max_value: i64,
) -> StepFunction<Rational> {
    let rays = (0..k)
        .map(|_| {
            let pieces = rng.gen_range(1..=max_pieces);
            let breaks = rational_breaks(rng, pieces, denom);
            let values = (0..breaks.len() - 1)
                .map(|_| ratio(rng.gen_range(-max_value..=max_value), 1))
                .collect();
            RayStep::new(breaks, values).expect("valid by construction")
        })
        .collect();
    StepFunction::new(rays).expect("k >= 1")
}

/// A radially decreasing function with `pieces` pieces, distinct rational cut
/// points and non-increasing values `v/4` with `v` in `0..=40`.
pub fn radial_decreasing_exact(
    rng: &mut impl Rng,
    k: usize,
    pieces: usize,
    denom: i64,
) -> StepFunction<Rational> {
    let breaks = rational_breaks(rng, pieces, denom);
    let mut vals: Vec<i64> = (0..breaks.len() - 1)
        .map(|_| rng.gen_range(0..=40))
        .collect();
    vals.sort_unstable_by(|a, b| b.cmp(a));
    if vals[0] == 0 {
        vals[0] = 1;
    }
    let profile = RayStep::new(breaks, vals.into_iter().map(|v| ratio(v, 4)).collect())
        .expect("valid by construction");
    StepFunction::radial(k, profile)
}

/// Up to `max_balls` metric balls with centers `c/denom` and radii `r/(2·denom)`,
/// containment-filtered.
pub fn ball_family(
    rng: &mut impl Rng,
    k: usize,
    max_balls: usize,
    denom: i64,
) -> Vec<Ball<Rational>> {
    let n = rng.gen_range(1..=max_balls);
    let balls: Vec<Ball<Rational>> = (0..n)
        .map(|_| {
            let ray = rng.gen_range(0..k);
            let c = ratio(rng.gen_range(0..=denom), denom);
            let r = ratio(rng.gen_range(1..=2 * denom), 2 * denom);
            let center = SpiderPoint::new(ray, c, k).expect("ray in range");
            Ball::from_center_radius(&center, r).expect("positive radius")
        })
        .collect();
    filter_containment(&balls, k)
}

/// A uniformly random composition of `total` into `n` positive parts.
pub fn composition(rng: &mut impl Rng, n: usize, total: usize) -> Vec<usize> {
    assert!(n >= 1 && n <= total, "need 1 <= n <= total");
    let mut cuts: Vec<usize> = sample(rng, total - 1, n - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut parts = Vec::with_capacity(n);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(total)) {
        parts.push(c - prev);
        prev = c;
    }
    parts
}
