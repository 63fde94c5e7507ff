//! End-to-end inequality checks.
//!
//! Every check returns an [`InequalityReport`] carrying both sides, the slack
//! `rhs - lhs` and the verdict. In the exact backend sides are compared
//! without tolerance; in the float backend with [`FLOAT_TOL`].

mod extremal;
pub mod random;
mod sweeps;

pub use extremal::{
    aver_holds, build_extremal, delta_for_epsilon, power_profile, sharpness_sweep,
    ExtremalInstance, SweepRow,
};
pub use sweeps::{
    covering_sweep, doob_sweep, lemma_sweep, operator_sweep, tail_sweep, weak_type_sweep,
    CoveringSummary, SweepSummary, TailSweepConfig, TailSweepSummary,
};

use serde::Serialize;
use serde_json::Value;

use crate::constants::{cpk_equation, solve_cpk, DEFAULT_TOL};
use crate::domain::StepFunction;
use crate::error::{Error, Result};
use crate::filtration::{FiniteProbSpace, Rv};
use crate::maximal::{operator_ratio, MaximalFunction};
use crate::rearrangement::rearrange;
use crate::scalar::{from_usize, Backend, Scalar};

/// Tolerance for float-backend comparisons.
pub const FLOAT_TOL: f64 = 1e-9;

/// Largest atom count for the subset enumeration in
/// [`reversed_monotonicity_check`].
pub const MAX_SUBSET_ATOMS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `lhs ≤ rhs`.
    Le,
    /// `lhs = rhs`.
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub instance: String,
    pub lhs: Value,
    pub rhs: Value,
    pub relation: Relation,
    /// `rhs - lhs`.
    pub slack: f64,
    pub ok: bool,
    /// False when the instance lies outside the statement's hypotheses; such
    /// reports count as passing.
    pub applicable: bool,
    pub backend: Backend,
    pub tolerance: f64,
}

impl InequalityReport {
    pub fn compare<S: Scalar>(
        name: &str,
        instance: String,
        lhs: S,
        rhs: S,
        relation: Relation,
    ) -> Self {
        let tolerance = match S::BACKEND {
            Backend::Exact => 0.0,
            Backend::Float => FLOAT_TOL,
        };
        let diff = rhs.clone() - lhs.clone();
        let ok = match (S::BACKEND, relation) {
            (Backend::Exact, Relation::Le) => diff >= S::zero(),
            (Backend::Exact, Relation::Eq) => diff.is_zero(),
            (Backend::Float, Relation::Le) => diff.to_f64_lossy() >= -tolerance,
            (Backend::Float, Relation::Eq) => diff.to_f64_lossy().abs() <= tolerance,
        };
        Self {
            name: name.to_string(),
            instance,
            lhs: lhs.to_json(),
            rhs: rhs.to_json(),
            relation,
            slack: diff.to_f64_lossy(),
            ok,
            applicable: true,
            backend: S::BACKEND,
            tolerance,
        }
    }

    fn not_applicable(mut self) -> Self {
        self.applicable = false;
        self.ok = true;
        self
    }

    /// One JSON line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

fn describe<S: Scalar>(f: &StepFunction<S>, s: &S) -> String {
    format!("k={} pieces={} s={}", f.k(), f.piece_count(), s)
}

/// `∫_E g dλ_k` for a nonnegative step function `g`.
fn integral_over<S: Scalar>(g: &StepFunction<S>, set: &crate::domain::RayIntervals<S>) -> S {
    g.integral_abs_over(set)
}

/// The level-set identity for radially decreasing `f`:
/// `s((k-1)λ(f>s) + λ(Mf>s)) = (k-1)∫_{f>s} f + ∫_{Mf>s} f`, valid when
/// `λ(Mf > s) < 1` and `s < max f`.
pub fn lemma_aux_check<S: Scalar>(f: &StepFunction<S>, s: &S) -> Result<InequalityReport> {
    if !f.is_radially_decreasing() {
        return Err(Error::InvalidParameter(
            "the identity needs a radially decreasing function".into(),
        ));
    }
    let k: S = from_usize(f.k());
    let km1 = k - S::one();
    let mf = MaximalFunction::new(f);
    let applicable = *s >= S::zero() && *s < f.max_abs() && mf.level_measure(s)? < S::one();
    if *s < S::zero() {
        let r = InequalityReport::compare(
            "lemma_aux",
            describe(f, s),
            S::zero(),
            S::zero(),
            Relation::Eq,
        );
        return Ok(r.not_applicable());
    }
    let set = mf.superlevel_set(s, true);
    let lhs = s.clone() * (km1.clone() * f.level_measure(s) + crate::domain::measure(&set)?);
    let rhs = km1 * f.restricted_integral_self(s) + integral_over(f, &set);
    let report = InequalityReport::compare("lemma_aux", describe(f, s), lhs, rhs, Relation::Eq);
    Ok(if applicable {
        report
    } else {
        report.not_applicable()
    })
}

/// `sλ(Mf>s) + s(k-1)λ(|f|>s) ≤ ∫_{Mf>s}|f| + (k-1)∫_{|f|>s}|f|`.
///
/// On a single ray balls can overlap in pairs, so for `k = 1` the coefficient
/// `k-1` is replaced by 1 (the classical form on a segment).
pub fn weak_type_check<S: Scalar>(f: &StepFunction<S>, s: &S) -> Result<InequalityReport> {
    if *s <= S::zero() {
        return Err(Error::InvalidParameter(format!(
            "level s = {s} must be positive"
        )));
    }
    let km1: S = from_usize(f.k().max(2) - 1);
    let abs = f.abs();
    let mf = MaximalFunction::new(f);
    let set = mf.superlevel_set(s, true);
    let lhs =
        s.clone() * crate::domain::measure(&set)? + s.clone() * km1.clone() * abs.level_measure(s);
    let rhs = integral_over(&abs, &set) + km1 * abs.restricted_integral_self(s);
    Ok(InequalityReport::compare(
        "weak_type",
        describe(f, s),
        lhs,
        rhs,
        Relation::Le,
    ))
}

/// Evaluates `(p-1)R^p - pR^{p-1} - (k-1)` at `R = ‖Mf‖_p/‖f‖_p`; the report
/// passes when the value is at most [`FLOAT_TOL`], which forces `R ≤ C_{p,k}`.
pub fn lp_chain_check<S: Scalar>(f: &StepFunction<S>, p: f64) -> Result<InequalityReport> {
    let k = f.k();
    let ratio = operator_ratio(f, p)?;
    let c = solve_cpk(p, k, DEFAULT_TOL)?.value;
    let poly = cpk_equation(p, k, ratio);
    let instance = format!(
        "k={k} p={p} pieces={} ratio={ratio} C_pk={c}",
        f.piece_count()
    );
    Ok(InequalityReport::compare(
        "lp_chain",
        instance,
        poly,
        0.0,
        Relation::Le,
    ))
}

/// The rearrangement step of the tail argument: with `m = λ_k(Mξ* > s)`,
/// `∫_{Mξ*>s} (s-ξ*)_+ dλ_k ≤ ∫_E (s-|ξ|)_+ dP` for every union `E` of atoms
/// with `P(E) ≥ m`. The level set of `Mξ*` is an initial segment of every ray
/// and `(s-ξ*)_+` is non-decreasing along rays, so the left side is the least
/// such integral.
pub fn reversed_monotonicity_check<S: Scalar>(
    space: &FiniteProbSpace<S>,
    xi: &Rv<S>,
    k: usize,
    s: &S,
) -> Result<InequalityReport> {
    let n = space.len();
    if n > MAX_SUBSET_ATOMS {
        return Err(Error::SizeGuard(format!(
            "{n} atoms exceeds the subset limit of {MAX_SUBSET_ATOMS}"
        )));
    }
    if *s < S::zero() {
        return Err(Error::NegativeLevel(s.to_f64_lossy()));
    }
    let star = rearrange(space, xi, k)?;
    let mf = MaximalFunction::new(&star);
    let set = mf.superlevel_set(s, true);
    let m = crate::domain::measure(&set)?;
    let deficit = star.map(|v| S::max_of(s.clone() - v.clone(), S::zero()));
    let lhs = integral_over(&deficit, &set);
    let gap: Vec<S> = xi
        .values()
        .iter()
        .map(|v| S::max_of(s.clone() - v.abs(), S::zero()))
        .collect();
    let mut best: Option<S> = None;
    for mask in 0u32..(1u32 << n) {
        let in_e = |i: usize| mask & (1 << i) != 0;
        if space.prob_where(in_e) < m {
            continue;
        }
        let val = (0..n).filter(|&i| in_e(i)).fold(S::zero(), |a, i| {
            a + space.probs()[i].clone() * gap[i].clone()
        });
        if best.as_ref().map_or(true, |b| val < *b) {
            best = Some(val);
        }
    }
    let rhs = best.expect("the full set always qualifies");
    let instance = format!("k={k} atoms={n} s={s} measure={m}");
    Ok(InequalityReport::compare(
        "reversed_monotonicity",
        instance,
        lhs,
        rhs,
        Relation::Le,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RayStep;
    use crate::scalar::{ratio, Rational};

    fn q(p: i64, d: i64) -> Rational {
        ratio(p, d)
    }

    #[test]
    fn lemma_on_radial_indicator() {
        let f = StepFunction::radial_indicator(3, q(1, 10)).unwrap();
        let r = lemma_aux_check(&f, &q(1, 2)).unwrap();
        assert!(r.applicable && r.ok);
        assert_eq!(r.lhs, q(3, 10).to_json());
        assert_eq!(r.rhs, q(3, 10).to_json());
        let r = lemma_aux_check(&f, &q(1, 1)).unwrap();
        assert!(!r.applicable);
        assert_eq!(r.lhs, q(0, 1).to_json());
        assert_eq!(r.rhs, q(0, 1).to_json());
    }

    #[test]
    fn lemma_rejects_non_radial() {
        let f = StepFunction::new(vec![RayStep::constant(q(1, 1)), RayStep::constant(q(2, 1))])
            .unwrap();
        assert!(lemma_aux_check(&f, &q(1, 2)).is_err());
    }

    #[test]
    fn weak_type_examples() {
        let f = StepFunction::radial_indicator(3, q(1, 10)).unwrap();
        let r = weak_type_check(&f, &q(1, 2)).unwrap();
        assert!(r.ok);
        assert_eq!(r.slack, 0.0);
        assert_eq!(r.lhs, q(3, 10).to_json());
        let c = StepFunction::constant(2, q(3, 2));
        let r = weak_type_check(&c, &q(2, 1)).unwrap();
        assert!(r.ok);
        assert_eq!(r.lhs, q(0, 1).to_json());
        assert_eq!(r.rhs, q(0, 1).to_json());
        assert!(weak_type_check(&c, &q(0, 1)).is_err());
    }

    #[test]
    fn lp_chain_for_constant() {
        let r = lp_chain_check(&StepFunction::constant(3, 1.0), 2.0).unwrap();
        assert!(r.ok);
        assert!((r.slack - 3.0).abs() < 1e-9, "{}", r.slack);
    }

    #[test]
    fn single_ray_needs_two_sided_constant() {
        // a power singularity in the middle of one ray exceeds p/(p-1) = 2
        let prof = power_profile(0.45, 300, 1e-12).unwrap();
        let (b, v) = (prof.breaks(), prof.values());
        let mut breaks: Vec<f64> = (1..b.len()).rev().map(|i| 0.5 - b[i] / 2.0).collect();
        breaks.extend(b.iter().map(|x| 0.5 + x / 2.0));
        let vals: Vec<f64> = v.iter().rev().chain(v.iter()).cloned().collect();
        let f = StepFunction::new(vec![RayStep::new(breaks, vals).unwrap()]).unwrap();
        let r = operator_ratio(&f, 2.0).unwrap();
        assert!(r > 2.1 && r < 1.0 + 2f64.sqrt(), "{r}");
        assert!(!lp_chain_check(&f, 2.0).unwrap().ok);
        let f = step_from_pairs(&[(0.2, 0.0), (0.3, 4.0), (1.0, 0.0)]);
        assert!(weak_type_check(&f, &1.0).unwrap().ok);
    }

    fn step_from_pairs(pieces: &[(f64, f64)]) -> StepFunction<f64> {
        let mut breaks = vec![0.0];
        breaks.extend(pieces.iter().map(|p| p.0));
        StepFunction::new(vec![RayStep::new(
            breaks,
            pieces.iter().map(|p| p.1).collect(),
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn reversed_monotonicity_on_small_space() {
        let sp = FiniteProbSpace::new(vec![q(1, 10), q(3, 10), q(6, 10)]).unwrap();
        let xi = Rv::new(vec![q(4, 1), q(-1, 1), q(2, 1)]).unwrap();
        for s in 1..=8 {
            let r = reversed_monotonicity_check(&sp, &xi, 2, &q(s, 2)).unwrap();
            assert!(r.ok, "{r:?}");
        }
    }

    #[test]
    fn report_serializes_to_one_line() {
        let r = InequalityReport::compare("x", "y".into(), q(1, 3), q(1, 2), Relation::Le);
        let line = r.to_json_line();
        assert!(!line.contains('\n'));
        assert!(line.contains("\"lhs\":\"1/3\""));
        assert!(line.contains("\"backend\":\"exact\""));
    }
}
