use serde_json::{json, Value};

use super::{RayIntervals, SpiderPoint};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};

/// A step function on one ray: value `values[i]` on `[breaks[i], breaks[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayStep<S> {
    breaks: Vec<S>,
    values: Vec<S>,
}

impl<S: Scalar> RayStep<S> {
    pub fn new(breaks: Vec<S>, values: Vec<S>) -> Result<Self> {
        let bad = |m: &str| Err(Error::MalformedStepFunction(m.to_string()));
        if breaks.len() < 2 || values.len() + 1 != breaks.len() {
            return bad("need m+1 breakpoints for m values, m >= 1");
        }
        if !breaks[0].is_zero() || !breaks[breaks.len() - 1].is_one() {
            return bad("breakpoints must start at 0 and end at 1");
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return bad("breakpoints must be strictly increasing");
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite(v.to_f64_lossy()));
        }
        Ok(Self { breaks, values })
    }

    pub fn constant(c: S) -> Self {
        Self {
            breaks: vec![S::zero(), S::one()],
            values: vec![c],
        }
    }

    pub fn breaks(&self) -> &[S] {
        &self.breaks
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn pieces(&self) -> impl Iterator<Item = (&S, &S, &S)> {
        self.breaks
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (&w[0], &w[1], v))
    }

    /// Index of the piece containing `pos` (right-continuous; `pos = 1` maps to the last piece).
    pub fn piece_index(&self, pos: &S) -> usize {
        let idx = self.breaks.partition_point(|b| b <= pos);
        idx.saturating_sub(1).min(self.values.len() - 1)
    }

    pub fn value_at(&self, pos: &S) -> S {
        self.values[self.piece_index(pos)].clone()
    }

    /// `∫_0^pos |f|` in ray-length units.
    pub fn integral_abs_to(&self, pos: &S) -> S {
        let mut acc = S::zero();
        for (lo, hi, v) in self.pieces() {
            if lo >= pos {
                break;
            }
            let end = if hi < pos { hi.clone() } else { pos.clone() };
            acc = acc + v.abs() * (end - lo.clone());
        }
        acc
    }

    pub fn integral_abs_between(&self, lo: &S, hi: &S) -> S {
        self.integral_abs_to(hi) - self.integral_abs_to(lo)
    }

    fn canonical(&self) -> Self {
        let mut breaks = vec![self.breaks[0].clone()];
        let mut values: Vec<S> = Vec::new();
        for (_, hi, v) in self.pieces() {
            if values.last() == Some(v) {
                *breaks.last_mut().expect("nonempty") = hi.clone();
            } else {
                values.push(v.clone());
                breaks.push(hi.clone());
            }
        }
        Self { breaks, values }
    }

    fn refined(&self, points: &[S]) -> Self {
        let mut breaks: Vec<S> = self.breaks.iter().chain(points).cloned().collect();
        breaks.sort_by(|a, b| a.partial_cmp(b).expect("ordered"));
        breaks.dedup();
        let values = breaks[..breaks.len() - 1]
            .iter()
            .map(|b| self.value_at(b))
            .collect();
        Self { breaks, values }
    }
}

/// A step function on the spider domain with finitely many pieces per ray.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<S> {
    rays: Vec<RayStep<S>>,
}

impl<S: Scalar> StepFunction<S> {
    pub fn new(rays: Vec<RayStep<S>>) -> Result<Self> {
        if rays.is_empty() {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(Self { rays })
    }

    pub fn constant(k: usize, c: S) -> Self {
        Self {
            rays: vec![RayStep::constant(c); k],
        }
    }

    /// The same one-ray profile copied onto every ray.
    pub fn radial(k: usize, profile: RayStep<S>) -> Self {
        Self {
            rays: vec![profile; k],
        }
    }

    /// `1` on `[0, a)` of every ray, `0` elsewhere.
    pub fn radial_indicator(k: usize, a: S) -> Result<Self> {
        let profile = RayStep::new(vec![S::zero(), a, S::one()], vec![S::one(), S::zero()])?;
        Ok(Self::radial(k, profile))
    }

    pub fn k(&self) -> usize {
        self.rays.len()
    }

    pub fn ray(&self, ray: usize) -> &RayStep<S> {
        &self.rays[ray]
    }

    pub fn rays(&self) -> &[RayStep<S>] {
        &self.rays
    }

    pub fn value_at(&self, x: &SpiderPoint<S>) -> S {
        self.rays[x.ray].value_at(&x.pos)
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    pub fn scale(&self, c: &S) -> Self {
        self.map(|v| v.clone() * c.clone())
    }

    pub fn map(&self, f: impl Fn(&S) -> S) -> Self {
        Self {
            rays: self
                .rays
                .iter()
                .map(|r| RayStep {
                    breaks: r.breaks.clone(),
                    values: r.values.iter().map(&f).collect(),
                })
                .collect(),
        }
    }

    /// Merges adjacent equal-valued pieces.
    pub fn canonical(&self) -> Self {
        Self {
            rays: self.rays.iter().map(RayStep::canonical).collect(),
        }
    }

    /// Adds breakpoints (values unchanged).
    pub fn refined(&self, points: &[S]) -> Self {
        Self {
            rays: self.rays.iter().map(|r| r.refined(points)).collect(),
        }
    }

    /// Sorted union of all breakpoints across rays, including 0 and 1.
    pub fn merged_breakpoints(&self) -> Vec<S> {
        let mut all: Vec<S> = self
            .rays
            .iter()
            .flat_map(|r| r.breaks.iter().cloned())
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).expect("ordered"));
        all.dedup();
        all
    }

    pub fn piece_count(&self) -> usize {
        self.rays.iter().map(|r| r.values.len()).sum()
    }

    /// `∫ f dλ_k` (exact per piece).
    pub fn integrate(&self) -> S {
        let total = self.rays.iter().fold(S::zero(), |acc, r| {
            r.pieces().fold(acc, |acc, (lo, hi, v)| {
                acc + v.clone() * (hi.clone() - lo.clone())
            })
        });
        total / from_usize(self.k())
    }

    pub fn integrate_abs(&self) -> S {
        self.abs().integrate()
    }

    /// `∫ |f|^p dλ_k`, closed form per piece.
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        let total: f64 = self
            .rays
            .iter()
            .flat_map(|r| r.pieces())
            .map(|(lo, hi, v)| {
                v.to_f64_lossy().abs().powf(p) * (hi.to_f64_lossy() - lo.to_f64_lossy())
            })
            .sum();
        total / self.k() as f64
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
        }
        Ok(self.lp_norm_pow(p).powf(1.0 / p))
    }

    /// `ess sup |f|`.
    pub fn max_abs(&self) -> S {
        self.rays
            .iter()
            .flat_map(|r| r.values.iter())
            .fold(S::zero(), |m, v| S::max_of(m, v.abs()))
    }

    /// `{f > s}` (or `{f >= s}` when `strict` is false) as per-ray intervals.
    pub fn superlevel_set(&self, s: &S, strict: bool) -> RayIntervals<S> {
        let rays = self
            .rays
            .iter()
            .map(|r| {
                r.pieces()
                    .filter(|(_, _, v)| if strict { *v > s } else { *v >= s })
                    .map(|(lo, hi, _)| (lo.clone(), hi.clone()))
                    .collect()
            })
            .collect();
        RayIntervals::from_rays(rays).canonical()
    }

    /// `λ_k(f > s)`.
    pub fn level_measure(&self, s: &S) -> S {
        self.level_measure_with(s, true)
    }

    pub fn level_measure_with(&self, s: &S, strict: bool) -> S {
        let total = self.rays.iter().fold(S::zero(), |acc, r| {
            r.pieces()
                .filter(|(_, _, v)| if strict { *v > s } else { *v >= s })
                .fold(acc, |acc, (lo, hi, _)| acc + (hi.clone() - lo.clone()))
        });
        total / from_usize(self.k())
    }

    /// `∫_E |f| dλ_k` over a union of intervals (intervals on a ray must be disjoint).
    pub fn integral_abs_over(&self, set: &RayIntervals<S>) -> S {
        let mut total = S::zero();
        for ray in 0..self.k() {
            for (lo, hi) in set.ray(ray) {
                total = total + self.rays[ray].integral_abs_between(lo, hi);
            }
        }
        total / from_usize(self.k())
    }

    /// `∫_{f > s} |f| dλ_k`.
    pub fn restricted_integral_self(&self, s: &S) -> S {
        self.integral_abs_over(&self.superlevel_set(s, true))
    }

    /// True when the function depends only on the distance to the hub and is
    /// non-increasing and nonnegative along every ray.
    pub fn is_radially_decreasing(&self) -> bool {
        let c = self.canonical();
        let first = &c.rays[0];
        c.rays.iter().all(|r| r == first)
            && first.values.iter().all(|v| *v >= S::zero())
            && first.values.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn to_f64(&self) -> StepFunction<f64> {
        StepFunction {
            rays: self
                .rays
                .iter()
                .map(|r| RayStep {
                    breaks: r.breaks.iter().map(Scalar::to_f64_lossy).collect(),
                    values: r.values.iter().map(Scalar::to_f64_lossy).collect(),
                })
                .collect(),
        }
    }

    /// `{k, rays: [[[b0..bm], [v1..vm]], ...]}`.
    pub fn to_json(&self) -> Value {
        let rays: Vec<Value> = self
            .rays
            .iter()
            .map(|r| {
                json!([
                    r.breaks.iter().map(Scalar::to_json).collect::<Vec<_>>(),
                    r.values.iter().map(Scalar::to_json).collect::<Vec<_>>()
                ])
            })
            .collect();
        json!({ "k": self.k(), "rays": rays })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let parse_err = |m: &str| Error::Parse(m.to_string());
        let k = v
            .get("k")
            .and_then(Value::as_u64)
            .ok_or_else(|| parse_err("missing integer field k"))? as usize;
        let rays = v
            .get("rays")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_err("missing array field rays"))?;
        if rays.len() != k {
            return Err(parse_err(&format!(
                "expected {k} rays, found {}",
                rays.len()
            )));
        }
        let list = |v: &Value| -> Result<Vec<S>> {
            v.as_array()
                .ok_or_else(|| parse_err("expected an array"))?
                .iter()
                .map(S::from_json)
                .collect()
        };
        let rays = rays
            .iter()
            .map(|r| {
                let pair = r
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| parse_err("each ray must be [breakpoints, values]"))?;
                RayStep::new(list(&pair[0])?, list(&pair[1])?)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rays)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> Rational {
        ratio(p, q)
    }

    #[test]
    fn constant_function_integrals() {
        let f = StepFunction::constant(3, 2.5);
        assert_eq!(f.integrate(), 2.5);
        assert!((f.lp_norm(3.0).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn single_ray_indicator_integrates_to_half() {
        let f = StepFunction::new(vec![RayStep::constant(r(1, 1)), RayStep::constant(r(0, 1))])
            .unwrap();
        assert_eq!(f.integrate(), r(1, 2));
    }

    #[test]
    fn radial_indicator_integrates_to_its_radius() {
        for k in 1..6 {
            let f = StepFunction::radial_indicator(k, r(3, 10)).unwrap();
            assert_eq!(f.integrate(), r(3, 10));
        }
    }

    #[test]
    fn level_measure_of_single_jump() {
        let profile =
            RayStep::new(vec![r(0, 1), r(1, 2), r(1, 1)], vec![r(2, 1), r(1, 1)]).unwrap();
        for k in 1..5 {
            let g = StepFunction::radial(k, profile.clone());
            assert_eq!(g.level_measure(&r(3, 2)), r(1, 2));
            assert_eq!(g.level_measure(&r(2, 1)), r(0, 1));
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(RayStep::new(vec![0.0, 0.5], vec![1.0]).is_err());
        assert!(RayStep::new(vec![0.0, 0.6, 0.6, 1.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(RayStep::new(vec![0.0, 1.0], vec![f64::NAN]).is_err());
        assert!(RayStep::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn evaluation_is_right_continuous() {
        let ray = RayStep::new(vec![0.0, 0.25, 1.0], vec![4.0, 1.0]).unwrap();
        assert_eq!(ray.value_at(&0.25), 1.0);
        assert_eq!(ray.value_at(&0.2499), 4.0);
        assert_eq!(ray.value_at(&1.0), 1.0);
    }

    #[test]
    fn json_uses_fraction_strings_for_exact_values() {
        let f = StepFunction::radial_indicator(2, r(1, 3)).unwrap();
        let j = f.to_json();
        assert_eq!(j["rays"][0][0][1], serde_json::json!("1/3"));
        assert_eq!(StepFunction::<Rational>::from_json(&j).unwrap(), f);
    }

    fn arb_ray() -> impl Strategy<Value = RayStep<f64>> {
        (1usize..7).prop_flat_map(|m| {
            (
                proptest::collection::vec(0.01f64..1.0, m),
                proptest::collection::vec(-5.0f64..5.0, m),
            )
                .prop_map(|(widths, values)| {
                    let total: f64 = widths.iter().sum();
                    let mut breaks = vec![0.0];
                    let mut acc = 0.0;
                    for w in &widths[..widths.len() - 1] {
                        acc += w / total;
                        breaks.push(acc);
                    }
                    breaks.push(1.0);
                    RayStep::new(breaks, values).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn lp_norm_matches_riemann_sum(rays in proptest::collection::vec(arb_ray(), 1..4), p in 1.1f64..4.0) {
            let f = StepFunction::new(rays).unwrap();
            let k = f.k();
            let n = 20_000usize;
            let mut riemann = 0.0;
            for ray in 0..k {
                for i in 0..n {
                    let x = (i as f64 + 0.5) / n as f64;
                    riemann += f.ray(ray).value_at(&x).abs().powf(p);
                }
            }
            riemann /= (n * k) as f64;
            let exact = f.lp_norm_pow(p);
            // Midpoint sums are exact except on the cells straddling a breakpoint.
            let pieces = f.piece_count() as f64;
            let bound = pieces * 5f64.powf(p) / (n * k) as f64;
            prop_assert!((exact - riemann).abs() <= bound + 1e-10, "exact {} riemann {}", exact, riemann);
        }

        #[test]
        fn level_measure_is_nonincreasing(rays in proptest::collection::vec(arb_ray(), 1..4), s1 in -6.0f64..6.0, ds in 0.0f64..3.0) {
            let f = StepFunction::new(rays).unwrap();
            prop_assert!(f.level_measure(&(s1 + ds)) <= f.level_measure(&s1));
        }
    }
}
