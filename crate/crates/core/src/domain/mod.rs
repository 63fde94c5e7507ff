//! Geometry and measure of the spider domain: `k` unit rays glued at the
//! origin, with the railway metric and normalized length measure (each ray
//! carries mass `1/k`).
//!
//! Rays are indexed from 0 internally. Serialized formats and the CLI use
//! 1-based ray numbers.

mod mobius;
mod quadrature;
mod step;

pub use mobius::{Mobius, MobiusPiece, PiecewiseMobius};
pub use quadrature::{gauss_legendre, integrate_adaptive, Quadrature};
pub use step::{RayStep, StepFunction};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};

/// A point of the spider domain. `pos == 0` is the hub regardless of `ray`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpiderPoint<S> {
    pub ray: usize,
    pub pos: S,
}

impl<S: Scalar> SpiderPoint<S> {
    pub fn new(ray: usize, pos: S, k: usize) -> Result<Self> {
        if ray >= k {
            return Err(Error::InvalidParameter(format!(
                "ray {ray} out of range for k={k}"
            )));
        }
        if pos < S::zero() || pos > S::one() {
            return Err(Error::InvalidParameter(format!(
                "position {pos} outside [0, 1]"
            )));
        }
        Ok(Self { ray, pos })
    }

    pub fn origin() -> Self {
        Self {
            ray: 0,
            pos: S::zero(),
        }
    }

    pub fn is_origin(&self) -> bool {
        self.pos.is_zero()
    }

    /// Railway distance: `|x| + |y|` across rays, `||x| - |y||` along one ray.
    pub fn distance(&self, other: &Self) -> S {
        if self.ray == other.ray || self.is_origin() || other.is_origin() {
            (self.pos.clone() - other.pos.clone()).abs()
        } else {
            self.pos.clone() + other.pos.clone()
        }
    }
}

/// An open ball of the railway metric, described by its traces.
///
/// `Interval` lives on a single ray. `Star` contains the hub: it covers
/// `[0, b)` on its own ray and `[0, t)` on every other ray, with `t <= b`.
#[derive(Debug, Clone, PartialEq)]
pub enum Ball<S> {
    Interval { ray: usize, a: S, b: S },
    Star { ray: usize, b: S, t: S },
}

impl<S: Scalar> Ball<S> {
    pub fn interval(ray: usize, a: S, b: S) -> Result<Self> {
        let ball = Ball::Interval { ray, a, b };
        ball.validate(usize::MAX)?;
        Ok(ball)
    }

    pub fn star(ray: usize, b: S, t: S) -> Result<Self> {
        let ball = Ball::Star { ray, b, t };
        ball.validate(usize::MAX)?;
        Ok(ball)
    }

    /// The ball of radius `radius` around `center`, clipped to the domain.
    pub fn from_center_radius(center: &SpiderPoint<S>, radius: S) -> Result<Self> {
        if radius <= S::zero() {
            return Err(Error::InvalidParameter(format!(
                "radius {radius} must be positive"
            )));
        }
        let c = center.pos.clone();
        let b = S::min_of(c.clone() + radius.clone(), S::one());
        if radius <= c {
            Ok(Ball::Interval {
                ray: center.ray,
                a: c - radius,
                b,
            })
        } else {
            let t = S::min_of(radius - c, S::one());
            Ok(Ball::Star {
                ray: center.ray,
                b,
                t,
            })
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Ball::Interval { ray, a, b } => {
                if *ray >= k && k != usize::MAX {
                    return bad(format!("ray {ray} out of range for k={k}"));
                }
                if !(*a >= S::zero() && a < b && *b <= S::one()) {
                    return bad(format!(
                        "interval ball needs 0 <= a < b <= 1, got [{a}, {b})"
                    ));
                }
            }
            Ball::Star { ray, b, t } => {
                if *ray >= k && k != usize::MAX {
                    return bad(format!("ray {ray} out of range for k={k}"));
                }
                if !(*b > S::zero() && *b <= S::one() && *t >= S::zero() && t <= b) {
                    return bad(format!(
                        "star ball needs 0 <= t <= b <= 1, b > 0, got b={b}, t={t}"
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn ray(&self) -> usize {
        match self {
            Ball::Interval { ray, .. } | Ball::Star { ray, .. } => *ray,
        }
    }

    pub fn is_star(&self) -> bool {
        matches!(self, Ball::Star { .. })
    }

    /// The half-open trace `[lo, hi)` of the ball on `ray`, or `None` if empty.
    pub fn trace(&self, ray: usize) -> Option<(S, S)> {
        match self {
            Ball::Interval { ray: r, a, b } => (*r == ray).then(|| (a.clone(), b.clone())),
            Ball::Star { ray: r, b, t } => {
                let hi = if *r == ray { b.clone() } else { t.clone() };
                (hi > S::zero()).then(|| (S::zero(), hi))
            }
        }
    }

    /// Normalized measure: total trace length divided by `k`.
    pub fn measure(&self, k: usize) -> S {
        let len = match self {
            Ball::Interval { a, b, .. } => b.clone() - a.clone(),
            Ball::Star { b, t, .. } => b.clone() + from_usize::<S>(k - 1) * t.clone(),
        };
        len / from_usize(k)
    }

    /// Membership under the half-open trace convention; the hub belongs to
    /// every star.
    pub fn contains(&self, x: &SpiderPoint<S>) -> bool {
        if x.is_origin() {
            return self.is_star();
        }
        match self.trace(x.ray) {
            Some((lo, hi)) => lo <= x.pos && x.pos < hi,
            None => false,
        }
    }

    /// Whether every trace of `other` lies inside the matching trace of `self`.
    pub fn contains_ball(&self, other: &Ball<S>, k: usize) -> bool {
        if other.is_star() && !self.is_star() {
            return false;
        }
        (0..k).all(|ray| match (other.trace(ray), self.trace(ray)) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some((lo, hi)), Some((olo, ohi))) => olo <= lo && hi <= ohi,
        })
    }

    /// `|f|`-average of `f` over the ball.
    pub fn average(&self, f: &StepFunction<S>) -> S {
        let k = f.k();
        let mut total = S::zero();
        for ray in 0..k {
            if let Some((lo, hi)) = self.trace(ray) {
                total = total + f.ray(ray).integral_abs_between(&lo, &hi);
            }
        }
        total / from_usize::<S>(k) / self.measure(k)
    }

    pub fn to_f64(&self) -> Ball<f64> {
        match self {
            Ball::Interval { ray, a, b } => Ball::Interval {
                ray: *ray,
                a: a.to_f64_lossy(),
                b: b.to_f64_lossy(),
            },
            Ball::Star { ray, b, t } => Ball::Star {
                ray: *ray,
                b: b.to_f64_lossy(),
                t: t.to_f64_lossy(),
            },
        }
    }
}

/// Wire form of a ball: 1-based rays, float or `"p/q"` coordinates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BallSpec {
    Interval {
        ray: usize,
        a: serde_json::Value,
        b: serde_json::Value,
    },
    Star {
        ray: usize,
        b: serde_json::Value,
        t: serde_json::Value,
    },
}

impl BallSpec {
    pub fn to_ball<S: Scalar>(&self, k: usize) -> Result<Ball<S>> {
        let ray0 = |r: usize| {
            if r == 0 || r > k {
                Err(Error::InvalidParameter(format!(
                    "ray {r} out of range 1..={k}"
                )))
            } else {
                Ok(r - 1)
            }
        };
        let ball = match self {
            BallSpec::Interval { ray, a, b } => Ball::Interval {
                ray: ray0(*ray)?,
                a: S::from_json(a)?,
                b: S::from_json(b)?,
            },
            BallSpec::Star { ray, b, t } => Ball::Star {
                ray: ray0(*ray)?,
                b: S::from_json(b)?,
                t: S::from_json(t)?,
            },
        };
        ball.validate(k)?;
        Ok(ball)
    }

    pub fn from_ball<S: Scalar>(ball: &Ball<S>) -> Self {
        match ball {
            Ball::Interval { ray, a, b } => BallSpec::Interval {
                ray: ray + 1,
                a: a.to_json(),
                b: b.to_json(),
            },
            Ball::Star { ray, b, t } => BallSpec::Star {
                ray: ray + 1,
                b: b.to_json(),
                t: t.to_json(),
            },
        }
    }
}

/// A finite union of half-open intervals on each ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RayIntervals<S> {
    rays: Vec<Vec<(S, S)>>,
}

impl<S: Scalar> RayIntervals<S> {
    pub fn empty(k: usize) -> Self {
        Self {
            rays: vec![Vec::new(); k],
        }
    }

    pub fn full(k: usize) -> Self {
        Self {
            rays: vec![vec![(S::zero(), S::one())]; k],
        }
    }

    pub fn from_rays(rays: Vec<Vec<(S, S)>>) -> Self {
        Self { rays }
    }

    pub fn of_balls<'a>(balls: impl IntoIterator<Item = &'a Ball<S>>, k: usize) -> Self {
        let mut out = Self::empty(k);
        for ball in balls {
            for ray in 0..k {
                if let Some(tr) = ball.trace(ray) {
                    out.rays[ray].push(tr);
                }
            }
        }
        out
    }

    pub fn k(&self) -> usize {
        self.rays.len()
    }

    pub fn ray(&self, ray: usize) -> &[(S, S)] {
        &self.rays[ray]
    }

    pub fn push(&mut self, ray: usize, lo: S, hi: S) {
        if lo < hi {
            self.rays[ray].push((lo, hi));
        }
    }

    /// Sorted, merged form: overlapping or touching intervals are joined.
    pub fn canonical(&self) -> Self {
        let rays = self
            .rays
            .iter()
            .map(|ivs| {
                let mut ivs: Vec<(S, S)> = ivs.iter().filter(|(lo, hi)| lo < hi).cloned().collect();
                ivs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("ordered scalars"));
                let mut merged: Vec<(S, S)> = Vec::with_capacity(ivs.len());
                for (lo, hi) in ivs {
                    match merged.last_mut() {
                        Some(last) if lo <= last.1 => {
                            if hi > last.1 {
                                last.1 = hi;
                            }
                        }
                        _ => merged.push((lo, hi)),
                    }
                }
                merged
            })
            .collect();
        Self { rays }
    }

    pub fn contains(&self, x: &SpiderPoint<S>) -> bool {
        self.rays[x.ray]
            .iter()
            .any(|(lo, hi)| *lo <= x.pos && x.pos < *hi)
    }
}

/// Normalized measure of a family of per-ray intervals. Intervals on one ray
/// must not overlap; canonicalize first if they might.
pub fn measure<S: Scalar>(traces: &RayIntervals<S>) -> Result<S> {
    let k = traces.k();
    let mut total = S::zero();
    for (ray, ivs) in traces.rays.iter().enumerate() {
        let mut sorted: Vec<&(S, S)> = ivs.iter().collect();
        sorted.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("ordered scalars"));
        for pair in sorted.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::Overlap {
                    ray,
                    a: pair[0].0.to_f64_lossy(),
                    b: pair[0].1.to_f64_lossy(),
                    c: pair[1].0.to_f64_lossy(),
                    d: pair[1].1.to_f64_lossy(),
                });
            }
        }
        for (lo, hi) in sorted {
            if *lo < S::zero() || *hi > S::one() || lo > hi {
                return Err(Error::InvalidParameter(format!(
                    "interval [{lo}, {hi}) outside [0, 1]"
                )));
            }
            total = total + (hi.clone() - lo.clone());
        }
    }
    Ok(total / from_usize(k))
}
