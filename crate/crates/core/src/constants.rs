//! Sharp constants.
//!
//! `C_{p,k}` is the root in `[1, ∞)` of `(p-1)C^p - pC^{p-1} - (k-1) = 0`;
//! `λ_{r,k}` is the root in `[1, ∞)` of `λ(1-r) - (k-1) r λ^{(r-1)/r} - 1 = 0`.
//! Both left-hand sides are increasing on `[1, ∞)` and negative at 1, so a
//! bracket is found by doubling and the root is polished by Newton steps that
//! fall back to bisection whenever they leave the bracket.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstantKind {
    Cpk,
    Lambda,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpConstant {
    pub kind: ConstantKind,
    /// `p` for [`ConstantKind::Cpk`], `r` for [`ConstantKind::Lambda`].
    pub param: f64,
    pub k: usize,
    pub value: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    pub tol: f64,
}

fn solve_increasing(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    tol: f64,
) -> (f64, f64, (f64, f64)) {
    let mut lo = 1.0;
    let mut hi = 2.0;
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        assert!(hi.is_finite(), "no sign change before overflow");
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let fx = f(x);
        if fx == 0.0 {
            lo = x;
            hi = x;
            break;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
        let d = df(x);
        let newton = x - fx / d;
        x = if d > 0.0 && newton > lo && newton < hi && fx.abs() > tol * 1e-3 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if fx.abs() <= tol * 1e-3 && hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    // the endpoint with the smaller residual is reported
    let best = [x, lo, hi]
        .into_iter()
        .min_by(|a, b| {
            f(*a)
                .abs()
                .partial_cmp(&f(*b).abs())
                .expect("finite residuals")
        })
        .expect("three candidates");
    (best, f(best), (lo.min(best), hi.max(best)))
}

/// Left-hand side of the `C_{p,k}` equation.
pub fn cpk_equation(p: f64, k: usize, c: f64) -> f64 {
    (p - 1.0) * c.powf(p) - p * c.powf(p - 1.0) - (k as f64 - 1.0)
}

/// Left-hand side of the `λ_{r,k}` equation.
pub fn lambda_equation(r: f64, k: usize, lambda: f64) -> f64 {
    lambda * (1.0 - r) - (k as f64 - 1.0) * r * (((r - 1.0) / r) * lambda.ln()).exp() - 1.0
}

pub fn solve_cpk(p: f64, k: usize, tol: f64) -> Result<SharpConstant> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "p = {p} must lie in (1, ∞)"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let f = |c: f64| cpk_equation(p, k, c);
    let df = |c: f64| p * (p - 1.0) * c.powf(p - 2.0) * (c - 1.0);
    let (value, residual, bracket) = solve_increasing(f, df, tol);
    Ok(SharpConstant {
        kind: ConstantKind::Cpk,
        param: p,
        k,
        value,
        residual,
        bracket,
        tol,
    })
}

pub fn solve_lambda(r: f64, k: usize, tol: f64) -> Result<SharpConstant> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "r = {r} must lie in (0, 1)"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let km1 = k as f64 - 1.0;
    let f = |l: f64| lambda_equation(r, k, l);
    let df = |l: f64| (1.0 - r) * (1.0 + km1 * (-(l.ln()) / r).exp());
    let (value, residual, bracket) = solve_increasing(f, df, tol);
    Ok(SharpConstant {
        kind: ConstantKind::Lambda,
        param: r,
        k,
        value,
        residual,
        bracket,
        tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub r: f64,
    pub lambda: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub p: f64,
    pub k: usize,
    pub c_pk: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Whether the gaps strictly decrease along the given (increasing) `r` list.
    pub gaps_strictly_decreasing: bool,
}

/// `λ_{r,k}` and its gap to `C_{p,k}` for each `r < 1/p`.
pub fn convergence_report(p: f64, k: usize, r_list: &[f64]) -> Result<ConvergenceReport> {
    let c = solve_cpk(p, k, DEFAULT_TOL)?;
    let rows = r_list
        .iter()
        .map(|&r| {
            if r >= 1.0 / p {
                return Err(Error::InvalidParameter(format!(
                    "r = {r} must be below 1/p = {}",
                    1.0 / p
                )));
            }
            let lambda = solve_lambda(r, k, DEFAULT_TOL)?.value;
            Ok(ConvergenceRow {
                r,
                lambda,
                gap: c.value - lambda,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gaps_strictly_decreasing = rows
        .windows(2)
        .all(|w| w[1].r > w[0].r && w[1].gap < w[0].gap);
    Ok(ConvergenceReport {
        p,
        k,
        c_pk: c.value,
        rows,
        gaps_strictly_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_at_p_two() {
        assert!((solve_cpk(2.0, 1, DEFAULT_TOL).unwrap().value - 2.0).abs() < 1e-12);
        assert!(
            (solve_cpk(2.0, 2, DEFAULT_TOL).unwrap().value - (1.0 + 2f64.sqrt())).abs() < 1e-12
        );
        assert!(
            (solve_cpk(2.0, 3, DEFAULT_TOL).unwrap().value - (1.0 + 3f64.sqrt())).abs() < 1e-12
        );
    }

    #[test]
    fn k_one_is_doob_constant() {
        for p in [1.1, 1.5, 2.0, 3.0, 10.0] {
            let c = solve_cpk(p, 1, DEFAULT_TOL).unwrap();
            assert!(
                (c.value - p / (p - 1.0)).abs() < 1e-12 * c.value.max(1.0),
                "p={p}"
            );
        }
    }

    #[test]
    fn residual_and_bracket_invariants() {
        for p in [1.1, 1.5, 2.0, 3.0, 10.0] {
            let mut prev = 0.0;
            for k in 1..=6 {
                let c = solve_cpk(p, k, DEFAULT_TOL).unwrap();
                assert!(
                    c.residual.abs() <= DEFAULT_TOL,
                    "p={p} k={k} residual {}",
                    c.residual
                );
                assert!(c.bracket.0 <= c.value && c.value <= c.bracket.1);
                assert!(c.value >= 1.0 && c.value > prev);
                prev = c.value;
            }
        }
    }

    #[test]
    fn lambda_special_cases() {
        for r in [0.1, 0.3, 0.7] {
            let l = solve_lambda(r, 1, DEFAULT_TOL).unwrap();
            assert!((l.value - 1.0 / (1.0 - r)).abs() < 1e-12);
        }
        assert!(
            (solve_lambda(0.5, 2, DEFAULT_TOL).unwrap().value - (1.0 + 2f64.sqrt())).abs() < 1e-12
        );
        assert!(
            (solve_lambda(0.5, 3, DEFAULT_TOL).unwrap().value - (1.0 + 3f64.sqrt())).abs() < 1e-12
        );
        assert!(solve_lambda(1.0, 2, DEFAULT_TOL).is_err());
        assert!(solve_lambda(0.0, 2, DEFAULT_TOL).is_err());
    }

    #[test]
    fn lambda_stays_below_cpk() {
        for p in [1.5, 2.0, 3.0] {
            for k in 1..=5 {
                let c = solve_cpk(p, k, DEFAULT_TOL).unwrap().value;
                for i in 1..20 {
                    let r = (i as f64 / 20.0) / p;
                    let l = solve_lambda(r, k, DEFAULT_TOL).unwrap().value;
                    assert!(l <= c + DEFAULT_TOL, "p={p} k={k} r={r}: {l} > {c}");
                }
            }
        }
    }

    #[test]
    fn convergence_report_examples() {
        let rep = convergence_report(2.0, 3, &[0.4, 0.45, 0.49]).unwrap();
        assert!(rep.gaps_strictly_decreasing);
        let rep = convergence_report(2.0, 1, &[0.49]).unwrap();
        assert!((rep.rows[0].lambda - 1.0 / 0.51).abs() < 1e-12);
        assert!((rep.rows[0].gap - (2.0 - 1.0 / 0.51)).abs() < 1e-12);
        assert!(convergence_report(2.0, 3, &[0.5]).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(solve_cpk(1.0, 2, DEFAULT_TOL).is_err());
        assert!(solve_cpk(2.0, 0, DEFAULT_TOL).is_err());
        assert!(solve_cpk(f64::INFINITY, 2, DEFAULT_TOL).is_err());
    }
}
