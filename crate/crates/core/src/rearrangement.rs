//! Distribution functions and the `k`-decreasing rearrangement.
//!
//! For a finite random variable `ξ`, `d_ξ(s) = P(|ξ| > s)` and `ξ*` is the
//! radially decreasing function on `R_k`, identical on every ray, with
//! `λ_k(ξ* > s) = d_ξ(s)`. Since `λ_k` gives the set `{|x| < t}` measure `t`,
//! the breakpoints of `ξ*` on each ray are the cumulative probabilities of the
//! distinct values of `|ξ|` taken in decreasing order.

use crate::domain::{RayStep, StepFunction};
use crate::error::{Error, Result};
use crate::filtration::{FiniteProbSpace, Rv};
use crate::scalar::{from_usize, Scalar};

/// `s ↦ P(|ξ| > s)`, stored as the distinct positive values of `|ξ|` in
/// decreasing order together with their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionFunction<S> {
    levels: Vec<(S, S)>,
}

impl<S: Scalar> DistributionFunction<S> {
    /// Builds from `(value, weight)` pairs; absolute values are taken, zero
    /// values dropped and equal values merged.
    pub fn from_weighted(pairs: impl IntoIterator<Item = (S, S)>) -> Self {
        let mut pairs: Vec<(S, S)> = pairs
            .into_iter()
            .map(|(v, w)| (v.abs(), w))
            .filter(|(v, _)| !v.is_zero())
            .collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite values"));
        let mut levels: Vec<(S, S)> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            match levels.last_mut() {
                Some((lv, lw)) if *lv == v => *lw = lw.clone() + w,
                _ => levels.push((v, w)),
            }
        }
        Self { levels }
    }

    /// Distinct positive values of `|ξ|` (decreasing) with their probabilities.
    pub fn levels(&self) -> &[(S, S)] {
        &self.levels
    }

    /// `d(s)`; right-continuous and non-increasing.
    pub fn eval(&self, s: &S) -> S {
        self.levels
            .iter()
            .take_while(|(v, _)| v > s)
            .fold(S::zero(), |acc, (_, w)| acc + w.clone())
    }

    /// The radial profile `t ↦ inf{s > 0 : d(s) ≤ t}` as a step function on `[0, 1]`.
    pub fn quantile_profile(&self) -> Result<RayStep<S>> {
        let mut breaks = vec![S::zero()];
        let mut values = Vec::new();
        let mut acc = S::zero();
        for (v, w) in &self.levels {
            acc = acc + w.clone();
            if acc >= S::one() {
                break;
            }
            breaks.push(acc.clone());
            values.push(v.clone());
        }
        if acc >= S::one() {
            // the last level reaches total mass: close the profile at 1
            let last = self.levels[values.len()].0.clone();
            values.push(last);
        } else {
            values.push(S::zero());
        }
        breaks.push(S::one());
        RayStep::new(breaks, values)
    }
}

pub fn distribution_function<S: Scalar>(
    space: &FiniteProbSpace<S>,
    xi: &Rv<S>,
) -> Result<DistributionFunction<S>> {
    if space.len() != xi.len() {
        return Err(Error::InvalidParameter(format!(
            "random variable has {} values but the space has {} atoms",
            xi.len(),
            space.len()
        )));
    }
    Ok(DistributionFunction::from_weighted(
        xi.values()
            .iter()
            .cloned()
            .zip(space.probs().iter().cloned()),
    ))
}

/// `ξ*_(k)`: the `k`-decreasing rearrangement of a finite random variable.
pub fn rearrange<S: Scalar>(
    space: &FiniteProbSpace<S>,
    xi: &Rv<S>,
    k: usize,
) -> Result<StepFunction<S>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let d = distribution_function(space, xi)?;
    Ok(StepFunction::radial(k, d.quantile_profile()?))
}

/// The rearrangement of `|f|` for a step function on `R_k`: radially
/// decreasing, identical on all rays and equidistributed with `|f|`.
pub fn rearrange_step<S: Scalar>(f: &StepFunction<S>) -> Result<StepFunction<S>> {
    let k = from_usize::<S>(f.k());
    let d = DistributionFunction::from_weighted(f.rays().iter().flat_map(|r| {
        r.pieces()
            .map(|(lo, hi, v)| (v.clone(), (hi.clone() - lo.clone()) / k.clone()))
            .collect::<Vec<_>>()
    }));
    Ok(StepFunction::radial(f.k(), d.quantile_profile()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};
    use proptest::prelude::*;

    fn q(p: i64, d: i64) -> Rational {
        ratio(p, d)
    }

    #[test]
    fn distribution_examples() {
        let sp = FiniteProbSpace::new(vec![0.25, 0.75]).unwrap();
        let d = distribution_function(&sp, &Rv::new(vec![3.0, 1.0]).unwrap()).unwrap();
        assert_eq!(d.eval(&2.0), 0.25);
        assert_eq!(d.eval(&0.5), 1.0);
        assert_eq!(d.eval(&3.0), 0.0);
        let zero = distribution_function(&sp, &Rv::new(vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(zero.eval(&0.0), 0.0);
        let sp = FiniteProbSpace::new(vec![0.5, 0.5]).unwrap();
        let d = distribution_function(&sp, &Rv::new(vec![-2.0, 2.0]).unwrap()).unwrap();
        assert_eq!(d.eval(&1.0), 1.0);
    }

    #[test]
    fn rearrange_examples() {
        let sp = FiniteProbSpace::new(vec![q(1, 4), q(3, 4)]).unwrap();
        let f = rearrange(&sp, &Rv::new(vec![q(3, 1), q(1, 1)]).unwrap(), 2).unwrap();
        for r in 0..2 {
            assert_eq!(f.ray(r).breaks(), &[q(0, 1), q(1, 4), q(1, 1)]);
            assert_eq!(f.ray(r).values(), &[q(3, 1), q(1, 1)]);
        }
        let c = rearrange(&sp, &Rv::new(vec![q(-5, 2), q(5, 2)]).unwrap(), 3).unwrap();
        assert_eq!(c, StepFunction::constant(3, q(5, 2)));
        let z = rearrange(&sp, &Rv::new(vec![q(0, 1), q(0, 1)]).unwrap(), 2).unwrap();
        assert_eq!(z, StepFunction::constant(2, q(0, 1)));
    }

    #[test]
    fn rearrange_step_examples() {
        let one_ray =
            StepFunction::new(vec![RayStep::constant(q(0, 1)), RayStep::constant(q(1, 1))])
                .unwrap();
        let r = rearrange_step(&one_ray).unwrap();
        for ray in 0..2 {
            assert_eq!(r.ray(ray).breaks(), &[q(0, 1), q(1, 2), q(1, 1)]);
            assert_eq!(r.ray(ray).values(), &[q(1, 1), q(0, 1)]);
        }
        assert_eq!(
            rearrange_step(&StepFunction::constant(4, q(7, 3))).unwrap(),
            StepFunction::constant(4, q(7, 3))
        );
        let dec = StepFunction::radial(
            3,
            RayStep::new(
                vec![q(0, 1), q(1, 5), q(1, 2), q(1, 1)],
                vec![q(4, 1), q(2, 1), q(1, 3)],
            )
            .unwrap(),
        );
        assert_eq!(rearrange_step(&dec).unwrap(), dec);
    }

    fn atoms() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
        (1usize..=6).prop_flat_map(|n| {
            (
                prop::collection::vec(1i64..12, n),
                prop::collection::vec(-6i64..=6, n),
            )
        })
    }

    proptest! {
        #[test]
        fn equidistribution_is_exact((w, v) in atoms(), k in 1usize..=4) {
            let total: i64 = w.iter().sum();
            let sp = FiniteProbSpace::new(w.iter().map(|&x| q(x, total)).collect()).unwrap();
            let xi = Rv::new(v.iter().map(|&x| q(x, 1)).collect()).unwrap();
            let star = rearrange(&sp, &xi, k).unwrap();
            prop_assert!(star.is_radially_decreasing());
            let d = distribution_function(&sp, &xi).unwrap();
            for i in 0..=14 {
                let s = q(i, 2);
                prop_assert_eq!(star.level_measure(&s), d.eval(&s));
            }
            for p in [1.5, 2.0, 3.0] {
                let direct = xi.lp_norm_pow(&sp, p);
                prop_assert!((star.lp_norm_pow(p) - direct).abs() <= 1e-12 * direct.max(1.0));
            }
        }

        #[test]
        fn step_rearrangement_is_equidistributed_and_idempotent(
            k in 1usize..=4,
            raw in prop::collection::vec((1i64..8, -5i64..=5), 1..20),
        ) {
            let rays: Vec<RayStep<Rational>> = (0..k)
                .map(|r| {
                    let pieces: Vec<_> = raw.iter().skip(r).step_by(k).collect();
                    if pieces.is_empty() {
                        return RayStep::constant(q(1, 1));
                    }
                    let total: i64 = pieces.iter().map(|(w, _)| w).sum();
                    let mut breaks = vec![q(0, 1)];
                    let mut acc = 0;
                    for (w, _) in &pieces {
                        acc += w;
                        breaks.push(q(acc, total));
                    }
                    RayStep::new(breaks, pieces.iter().map(|(_, v)| q(*v, 1)).collect()).unwrap()
                })
                .collect();
            let f = StepFunction::new(rays).unwrap();
            let g = rearrange_step(&f).unwrap();
            prop_assert!(g.is_radially_decreasing());
            for s in 0..=6 {
                let s = q(s, 1);
                prop_assert_eq!(g.level_measure(&s), f.abs().level_measure(&s));
            }
            prop_assert_eq!(rearrange_step(&g).unwrap(), g);
        }
    }
}
