//! Extremal constructions for the power function `ξ(x) = |x|^{-r}`.
//!
//! With `θ = λ_{r,k}^{-1/r}`, the star `B_j` covering all of ray `j` and
//! `[0, θ)` on every other ray has `ξ`-average exactly `λ_{r,k}` times the
//! value of `ξ` at its outer edge, and so does every rescaled copy `δ^n B_j`.
//! Filtrations generated by the nested balls `B_j ⊃ δB_j ⊃ …` therefore push
//! the Doob maximal function up to roughly `λ_{r,k} ξ`.

use serde::Serialize;

use crate::constants::{solve_cpk, solve_lambda, DEFAULT_TOL};
use crate::domain::{RayStep, StepFunction};
use crate::error::{Error, Result};
use crate::filtration::{
    doob_maximal, doob_ratio, FiltrationUnion, FiniteProbSpace, Partition, PartitionChain, Rv,
};
use crate::maximal::operator_ratio;

/// Average of `u^{-r}` over `[lo, hi)`, from the antiderivative `u^{1-r}/(1-r)`.
fn power_average(r: f64, lo: f64, hi: f64) -> f64 {
    if lo <= 0.0 {
        return hi.powf(-r) / (1.0 - r);
    }
    // hi^{1-r} (1 - (lo/hi)^{1-r}) keeps precision for narrow cells
    let ratio = lo / hi;
    -hi.powf(1.0 - r) * ((1.0 - r) * ratio.ln()).exp_m1() / ((1.0 - r) * (hi - lo))
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "r = {r} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// Whether `avg_{B_j} ξ ≥ (λ_{r,k} - ε) δ^{-r}`, i.e. the average over `|x|B_j`
/// dominates `(λ - ε) ξ(y)` for all `y` on ray `j` with `δ < |y|/|x| ≤ 1`.
pub fn aver_holds(r: f64, k: usize, delta: f64, eps: f64) -> Result<bool> {
    check_r(r)?;
    let lambda = solve_lambda(r, k, DEFAULT_TOL)?.value;
    let theta = lambda.powf(-1.0 / r);
    let km1 = k as f64 - 1.0;
    let avg = (1.0 + km1 * theta.powf(1.0 - r)) / ((1.0 - r) * (1.0 + km1 * theta));
    Ok(avg >= (lambda - eps) * delta.powf(-r))
}

/// Smallest `δ ∈ (0, 1)` (to within `1e-15`) satisfying [`aver_holds`].
pub fn delta_for_epsilon(r: f64, k: usize, eps: f64) -> Result<f64> {
    check_r(r)?;
    let lambda = solve_lambda(r, k, DEFAULT_TOL)?.value;
    if !(eps > 0.0 && eps < lambda) {
        return Err(Error::InvalidParameter(format!(
            "ε = {eps} must lie in (0, λ = {lambda})"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if !aver_holds(r, k, hi, eps)? {
        return Err(Error::InvalidParameter(format!(
            "no δ < 1 works for ε = {eps}"
        )));
    }
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if aver_holds(r, k, mid, eps)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// A finite atomic model of `(R_k, λ_k, |x|^{-r})` with the nested-ball filtrations.
#[derive(Debug, Clone)]
pub struct ExtremalInstance {
    pub r: f64,
    pub k: usize,
    pub delta: f64,
    pub levels: usize,
    pub lambda: f64,
    pub theta: f64,
    /// Radius of the lumped core actually used (at most the requested `η`).
    pub eta: f64,
    pub space: FiniteProbSpace<f64>,
    pub xi: Rv<f64>,
    pub union: FiltrationUnion,
    /// Per atom: `None` for the core, otherwise `(ray, lo, hi)`.
    pub cells: Vec<Option<(usize, f64, f64)>>,
}

impl ExtremalInstance {
    pub fn core_mass(&self) -> f64 {
        self.eta
    }

    /// Share of `E|ξ|^p` carried by the core atom.
    pub fn core_norm_share(&self, p: f64) -> f64 {
        let total = self.xi.lp_norm_pow(&self.space, p);
        self.space.probs()[0] * self.xi.values()[0].powf(p) / total
    }

    pub fn doob_ratio(&self, p: f64) -> Result<f64> {
        doob_ratio(&self.space, &self.xi, &self.union, p)
    }

    /// Atoms outside the innermost ball `δ^N B_i` of their own ray where
    /// `M_Gξ < (λ - ε) ξ`.
    pub fn lower_bound_violations(&self, eps: f64) -> Result<usize> {
        let m = doob_maximal(&self.space, &self.xi, &self.union, false)?;
        let floor = self.delta.powi(self.levels as i32);
        Ok(self
            .cells
            .iter()
            .enumerate()
            .filter(|(i, c)| {
                matches!(c, Some((_, lo, _)) if *lo >= floor * (1.0 - 1e-12))
                    && m.values()[*i] < (self.lambda - eps) * self.xi.values()[*i] * (1.0 - 1e-12)
            })
            .count())
    }
}

/// Builds the atomic model with chains `G_n^j = σ(B_j, δB_j, …, δ^{n-1}B_j)`
/// for `n = 1..=levels`. Atoms are the cells cut out by all ball traces; the
/// region `|x| < η` is lumped into one atom carrying the average of `ξ` there
/// (shrunk to the innermost trace endpoint if `η` exceeds it).
pub fn build_extremal(
    r: f64,
    k: usize,
    delta: f64,
    levels: usize,
    eta: f64,
) -> Result<ExtremalInstance> {
    check_r(r)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "δ = {delta} must lie in (0, 1)"
        )));
    }
    if levels == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let floor = delta.powi(levels as i32);
    if !(eta > 0.0 && eta < floor) {
        return Err(Error::InvalidParameter(format!(
            "η = {eta} must lie in (0, δ^N = {floor})"
        )));
    }
    let lambda = solve_lambda(r, k, DEFAULT_TOL)?.value;
    let theta = lambda.powf(-1.0 / r);
    let own: Vec<f64> = (0..levels).map(|n| delta.powi(n as i32)).collect();
    let other: Vec<f64> = own.iter().map(|d| theta * d).collect();
    let innermost = if k >= 2 {
        other[levels - 1].min(own[levels - 1])
    } else {
        own[levels - 1]
    };
    let eta = eta.min(innermost);

    let kf = k as f64;
    let mut cells: Vec<Option<(usize, f64, f64)>> = vec![None];
    let mut probs = vec![eta];
    let mut values = vec![power_average(r, 0.0, eta)];
    for ray in 0..k {
        let mut cuts: Vec<f64> = own.clone();
        if k >= 2 {
            cuts.extend(&other);
        }
        cuts.push(eta);
        cuts.retain(|c| *c >= eta);
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
        cuts.dedup();
        for w in cuts.windows(2) {
            cells.push(Some((ray, w[0], w[1])));
            probs.push((w[1] - w[0]) / kf);
            values.push(power_average(r, w[0], w[1]));
        }
    }
    let space = FiniteProbSpace::new(probs)?;
    let xi = Rv::new(values)?;

    let chains = (0..k)
        .map(|j| {
            let radius = |ray: usize, n: usize| if ray == j { own[n] } else { other[n] };
            let parts = (1..=levels)
                .map(|n| {
                    let labels: Vec<usize> = cells
                        .iter()
                        .map(|c| match c {
                            None => n,
                            Some((ray, _, hi)) => (0..n)
                                .filter(|&m| *hi <= radius(*ray, m) * (1.0 + 1e-14))
                                .count(),
                        })
                        .collect();
                    Partition::from_labels(&labels)
                })
                .collect();
            PartitionChain::new(parts)
        })
        .collect::<Result<Vec<_>>>()?;
    let union = FiltrationUnion::new(chains)?;
    Ok(ExtremalInstance {
        r,
        k,
        delta,
        levels,
        lambda,
        theta,
        eta,
        space,
        xi,
        union,
        cells,
    })
}

/// Cell averages of `u^{-r}` on the grid `0, lower, …, 1` with `points`
/// geometrically spaced nodes from `lower` to 1.
pub fn power_profile(r: f64, points: usize, lower: f64) -> Result<RayStep<f64>> {
    check_r(r)?;
    if points < 2 || !(lower > 0.0 && lower < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 grid points and 0 < lower < 1, got {points} and {lower}"
        )));
    }
    let step = -lower.ln() / (points - 1) as f64;
    let mut breaks = vec![0.0];
    breaks.extend((0..points).map(|i| (lower.ln() + step * i as f64).exp()));
    *breaks.last_mut().expect("nonempty") = 1.0;
    let values = breaks
        .windows(2)
        .map(|w| power_average(r, w[0], w[1]))
        .collect();
    RayStep::new(breaks, values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub lambda: f64,
    pub ratio: f64,
    #[serde(rename = "C_pk")]
    pub c_pk: f64,
    pub gap: f64,
}

/// `‖M ξ_r‖_p / ‖ξ_r‖_p` for the discretized power function `ξ_r = |x|^{-r}`
/// on each `r` of `r_list`. The grid has `points` geometric nodes from `lower` to 1.
pub fn sharpness_sweep(
    p: f64,
    k: usize,
    r_list: &[f64],
    points: usize,
    lower: f64,
) -> Result<Vec<SweepRow>> {
    let c = solve_cpk(p, k, DEFAULT_TOL)?.value;
    r_list
        .iter()
        .map(|&r| {
            if r >= 1.0 / p {
                return Err(Error::InvalidParameter(format!(
                    "r = {r} must be below 1/p = {}",
                    1.0 / p
                )));
            }
            let lambda = solve_lambda(r, k, DEFAULT_TOL)?.value;
            let f = StepFunction::radial(k, power_profile(r, points, lower)?);
            let ratio = operator_ratio(&f, p)?;
            Ok(SweepRow {
                r,
                lambda,
                ratio,
                c_pk: c,
                gap: c - ratio,
            })
        })
        .collect()
}
