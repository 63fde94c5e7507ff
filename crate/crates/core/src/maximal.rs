//! The uncentered maximal operator `M f(x) = sup_{B ∋ x} (1/λ_k(B)) ∫_B |f| dλ_k`
//! on step functions.
//!
//! For a step function the average over a ball, viewed as a function of one
//! endpoint sliding across a constant piece of `f`, is a Möbius function of
//! that endpoint and hence monotone. The supremum is therefore attained when
//! every free endpoint sits on a breakpoint of `f`, on the hub, on the end of a
//! ray, or on `x` itself. [`eval_at`] enumerates that finite candidate set
//! directly.
//!
//! [`MaximalFunction`] organizes the same candidates by grid cell: on a cell
//! between consecutive breakpoints (of all rays) the balls with an endpoint
//! pinned at `x` give Möbius functions of `|x|`, and all other candidates are
//! constants whose activity intervals are unions of cells. Level sets of the
//! maximum are unions of the candidates' level sets, each an interval solved
//! by a linear equation, so they are exact in the rational backend.
//! [`compute`] resolves the upper envelope into a [`PiecewiseMobius`].

use crate::domain::{
    Mobius, MobiusPiece, PiecewiseMobius, RayIntervals, SpiderPoint, StepFunction,
};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};

/// Default quadrature tolerance for `L^p` norms of the maximal function.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

fn sorted_dedup<S: Scalar>(mut v: Vec<S>) -> Vec<S> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("ordered scalars"));
    v.dedup();
    v
}

/// `M f(x)` by direct enumeration of candidate balls containing `x`.
///
/// Costs `O(k · B²)` for `B` total breakpoints.
pub fn eval_at<S: Scalar>(f: &StepFunction<S>, x: &SpiderPoint<S>) -> S {
    let k = f.k();
    let u = &x.pos;
    let j = x.ray;

    let mut points = f.merged_breakpoints();
    points.push(u.clone());
    let points = sorted_dedup(points);
    // prefix integrals of |f| on every ray at every candidate point
    let cum: Vec<Vec<S>> = (0..k)
        .map(|l| points.iter().map(|p| f.ray(l).integral_abs_to(p)).collect())
        .collect();
    let total: Vec<S> = (0..points.len())
        .map(|i| (0..k).fold(S::zero(), |acc, l| acc + cum[l][i].clone()))
        .collect();

    let mut best = S::zero();
    let mut consider = |v: S| {
        if v > best {
            best = v;
        }
    };

    // balls inside ray j
    let own: Vec<usize> = {
        let mut own: Vec<usize> = f
            .ray(j)
            .breaks()
            .iter()
            .chain(std::iter::once(u))
            .map(|p| points.partition_point(|q| q < p))
            .collect();
        own.sort_unstable();
        own.dedup();
        own
    };
    for &ia in own.iter().filter(|&&i| points[i] <= *u) {
        for &ib in own.iter().filter(|&&i| points[i] >= *u && i > ia) {
            consider(
                (cum[j][ib].clone() - cum[j][ia].clone())
                    / (points[ib].clone() - points[ia].clone()),
            );
        }
    }

    // balls through the hub
    let km1: S = from_usize(k - 1);
    for i in 0..k {
        for ib in 1..points.len() {
            let b = &points[ib];
            let t_range = if k == 1 { 0..1 } else { 0..ib + 1 };
            for it in t_range {
                let t = &points[it];
                let contains = u.is_zero() || if i == j { u <= b } else { u <= t };
                if !contains {
                    continue;
                }
                let others = total[it].clone() - cum[i][it].clone();
                let num = cum[i][ib].clone() + others;
                let den = b.clone() + km1.clone() * t.clone();
                consider(num / den);
            }
        }
    }
    best
}

/// `M f` for a step function `f`, held as per-cell candidate families.
#[derive(Debug, Clone)]
pub struct MaximalFunction<S> {
    k: usize,
    grid: Vec<S>,
    values: Vec<Vec<S>>,
    cum: Vec<Vec<S>>,
    cum_total: Vec<S>,
    own: Vec<Vec<usize>>,
    cell_const: Vec<Vec<S>>,
}

impl<S: Scalar> MaximalFunction<S> {
    pub fn new(f: &StepFunction<S>) -> Self {
        let k = f.k();
        let grid = f.merged_breakpoints();
        let cells = grid.len() - 1;
        let values: Vec<Vec<S>> = (0..k)
            .map(|l| {
                grid[..cells]
                    .iter()
                    .map(|g| f.ray(l).value_at(g).abs())
                    .collect()
            })
            .collect();
        let cum: Vec<Vec<S>> = values
            .iter()
            .map(|vals| {
                let mut acc = S::zero();
                let mut out = Vec::with_capacity(grid.len());
                out.push(S::zero());
                for m in 0..cells {
                    acc = acc + vals[m].clone() * (grid[m + 1].clone() - grid[m].clone());
                    out.push(acc.clone());
                }
                out
            })
            .collect();
        let cum_total: Vec<S> = (0..grid.len())
            .map(|i| (0..k).fold(S::zero(), |acc, l| acc + cum[l][i].clone()))
            .collect();
        let own: Vec<Vec<usize>> = (0..k)
            .map(|l| {
                f.ray(l)
                    .breaks()
                    .iter()
                    .map(|b| grid.partition_point(|g| g < b))
                    .collect()
            })
            .collect();

        let mut mf = Self {
            k,
            grid,
            values,
            cum,
            cum_total,
            own,
            cell_const: Vec::new(),
        };
        mf.cell_const = mf.constant_candidates();
        mf
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Merged breakpoints of `f` (cell boundaries), from 0 to 1.
    pub fn grid(&self) -> &[S] {
        &self.grid
    }

    pub fn cell_count(&self) -> usize {
        self.grid.len() - 1
    }

    fn star_average(&self, ray: usize, ib: usize, it: usize) -> S {
        let others = self.cum_total[it].clone() - self.cum[ray][it].clone();
        let den = self.grid[ib].clone() + from_usize::<S>(self.k - 1) * self.grid[it].clone();
        (self.cum[ray][ib].clone() + others) / den
    }

    /// Best average over candidate balls that do not depend on the position
    /// of `x` within a cell, for every (ray, cell).
    fn constant_candidates(&self) -> Vec<Vec<S>> {
        let k = self.k;
        let n = self.grid.len();
        let cells = n - 1;

        // Stars: best over t for each b on the star's own ray, and best over b
        // for each t on the other rays.
        let mut by_b = vec![vec![S::zero(); n]; k];
        let mut by_t = vec![vec![S::zero(); n]; k];
        for i in 0..k {
            for ib in 1..n {
                let t_hi = if k == 1 { 0 } else { ib };
                for it in 0..=t_hi {
                    let c = self.star_average(i, ib, it);
                    if c > by_b[i][ib] {
                        by_b[i][ib] = c.clone();
                    }
                    if c > by_t[i][it] {
                        by_t[i][it] = c;
                    }
                }
            }
        }
        let suffix_max = |v: &[S]| -> Vec<S> {
            let mut out = v.to_vec();
            for i in (0..n - 1).rev() {
                if out[i + 1] > out[i] {
                    out[i] = out[i + 1].clone();
                }
            }
            out
        };
        let own_star: Vec<Vec<S>> = by_b.iter().map(|v| suffix_max(v)).collect();
        let other_star: Vec<Vec<S>> = by_t.iter().map(|v| suffix_max(v)).collect();

        let mut out = vec![vec![S::zero(); cells]; k];
        for j in 0..k {
            // Intervals with both endpoints on ray-j breakpoints: sweep the
            // cells left to right, admitting left endpoints as they pass.
            let own = &self.own[j];
            let mut col_best: Vec<S> = vec![S::zero(); own.len()];
            let mut admitted = 0;
            for m in 0..cells {
                while admitted < own.len() && own[admitted] <= m {
                    let ia = own[admitted];
                    for (slot, &ib) in own.iter().enumerate().skip(admitted + 1) {
                        let avg = (self.cum[j][ib].clone() - self.cum[j][ia].clone())
                            / (self.grid[ib].clone() - self.grid[ia].clone());
                        if avg > col_best[slot] {
                            col_best[slot] = avg;
                        }
                    }
                    admitted += 1;
                }
                let mut best = self.values[j][m].clone();
                for (slot, &ib) in own.iter().enumerate() {
                    if ib > m && col_best[slot] > best {
                        best = col_best[slot].clone();
                    }
                }
                if own_star[j][m + 1] > best {
                    best = own_star[j][m + 1].clone();
                }
                for (i, other) in other_star.iter().enumerate() {
                    if i != j && other[m + 1] > best {
                        best = other[m + 1].clone();
                    }
                }
                out[j][m] = best;
            }
        }
        out
    }

    /// The candidates whose ball has an endpoint pinned at `x`, as Möbius
    /// functions of `|x|` on cell `m` of ray `j`, together with the best
    /// constant candidate for that cell.
    pub fn cell_candidates(&self, j: usize, m: usize) -> (S, Vec<Mobius<S>>) {
        let k = self.k;
        let lo = &self.grid[m];
        let base: Vec<S> = (0..k)
            .map(|l| self.cum[l][m].clone() - self.values[l][m].clone() * lo.clone())
            .collect();
        let vj = self.values[j][m].clone();
        let base_sum = base.iter().fold(S::zero(), |a, b| a + b.clone());
        let v_sum = (0..k).fold(S::zero(), |a, l| a + self.values[l][m].clone());
        let km1: S = from_usize(k - 1);
        let mut out = Vec::new();

        // interval [x, b)
        for &ib in self.own[j].iter().filter(|&&ib| ib >= m + 2) {
            out.push(Mobius::new(
                self.cum[j][ib].clone() - base[j].clone(),
                -vj.clone(),
                self.grid[ib].clone(),
                -S::one(),
            ));
        }
        // interval [a, x)
        for &ia in self.own[j].iter().filter(|&&ia| ia < m) {
            out.push(Mobius::new(
                base[j].clone() - self.cum[j][ia].clone(),
                vj.clone(),
                -self.grid[ia].clone(),
                S::one(),
            ));
        }
        if m >= 1 {
            // star on ray j reaching exactly to x
            let t_count = if k == 1 { 1 } else { m + 1 };
            for it in 0..t_count {
                let others = self.cum_total[it].clone() - self.cum[j][it].clone();
                out.push(Mobius::new(
                    base[j].clone() + others,
                    vj.clone(),
                    km1.clone() * self.grid[it].clone(),
                    S::one(),
                ));
            }
            // ball centred at the hub with radius |x|
            if k > 1 {
                out.push(Mobius::new(
                    base_sum.clone(),
                    v_sum.clone(),
                    S::zero(),
                    from_usize(k),
                ));
            }
        }
        // star on another ray reaching exactly |x| on ray j
        for i in (0..k).filter(|&i| i != j) {
            let rest_base = base_sum.clone() - base[i].clone();
            let rest_v = v_sum.clone() - self.values[i][m].clone();
            for &ib in self.own[i].iter().filter(|&&ib| ib > m) {
                out.push(Mobius::new(
                    self.cum[i][ib].clone() + rest_base.clone(),
                    rest_v.clone(),
                    self.grid[ib].clone(),
                    km1.clone(),
                ));
            }
        }
        (self.cell_const[j][m].clone(), out)
    }

    fn cell_max_at(&self, j: usize, m: usize, u: &S) -> S {
        let (c, fams) = self.cell_candidates(j, m);
        fams.iter()
            .fold(c, |best, fam| S::max_of(best, fam.eval(u)))
    }

    pub fn value_at(&self, x: &SpiderPoint<S>) -> S {
        let cells = self.cell_count();
        let idx = self.grid.partition_point(|g| *g <= x.pos);
        let m = idx.saturating_sub(1).min(cells - 1);
        let mut v = self.cell_max_at(x.ray, m, &x.pos);
        if m > 0 && self.grid[m] == x.pos {
            v = S::max_of(v, self.cell_max_at(x.ray, m - 1, &x.pos));
        }
        v
    }

    /// `{M f > s}` (or `{M f >= s}` when `strict` is false), exactly.
    pub fn superlevel_set(&self, s: &S, strict: bool) -> RayIntervals<S> {
        let mut out = RayIntervals::empty(self.k);
        for j in 0..self.k {
            for m in 0..self.cell_count() {
                let lo = &self.grid[m];
                let hi = &self.grid[m + 1];
                let (c, fams) = self.cell_candidates(j, m);
                let whole = if strict { c > *s } else { c >= *s };
                if whole {
                    out.push(j, lo.clone(), hi.clone());
                    continue;
                }
                for fam in &fams {
                    if let Some((a, b)) = fam.superlevel_within(s, lo, hi, strict) {
                        out.push(j, a, b);
                    }
                }
            }
        }
        out.canonical()
    }

    /// `λ_k(M f > s)`; rejects `s < 0` since `M f` is nonnegative.
    pub fn level_measure(&self, s: &S) -> Result<S> {
        self.level_measure_with(s, true)
    }

    pub fn level_measure_with(&self, s: &S, strict: bool) -> Result<S> {
        if *s < S::zero() {
            return Err(Error::NegativeLevel(s.to_f64_lossy()));
        }
        crate::domain::measure(&self.superlevel_set(s, strict))
    }

    /// `∫_{M f > s} |g| dλ_k`.
    pub fn restricted_integral(&self, g: &StepFunction<S>, s: &S) -> Result<S> {
        if *s < S::zero() {
            return Err(Error::NegativeLevel(s.to_f64_lossy()));
        }
        Ok(g.integral_abs_over(&self.superlevel_set(s, true)))
    }
}

impl MaximalFunction<f64> {
    /// Resolves the per-cell maxima into explicit Möbius pieces.
    pub fn to_piecewise(&self) -> PiecewiseMobius<f64> {
        let mut rays = Vec::with_capacity(self.k);
        for j in 0..self.k {
            let mut pieces: Vec<MobiusPiece<f64>> = Vec::new();
            for m in 0..self.cell_count() {
                let (c, mut fams) = self.cell_candidates(j, m);
                fams.push(Mobius::constant(c));
                for piece in upper_envelope(&fams, self.grid[m], self.grid[m + 1]) {
                    match pieces.last_mut() {
                        Some(last) if last.map == piece.map => last.hi = piece.hi,
                        _ => pieces.push(piece),
                    }
                }
            }
            rays.push(pieces);
        }
        PiecewiseMobius::new(rays).expect("envelope pieces tile every ray")
    }
}

fn derivative(m: &Mobius<f64>, u: f64) -> f64 {
    let den = m.gamma + m.delta * u;
    m.slope_numerator() / (den * den)
}

/// Roots of `a u² + b u + c` (possibly fewer than two).
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = vec![];
    if q != 0.0 {
        roots.push(q / a);
        roots.push(c / q);
    } else {
        roots.push(-b / (2.0 * a));
    }
    roots
}

/// First point in `(after, limit]` where `challenger` rises above `leader`.
fn overtake_point(
    challenger: &Mobius<f64>,
    leader: &Mobius<f64>,
    after: f64,
    limit: f64,
) -> Option<f64> {
    let (c, l) = (challenger, leader);
    // sign(c(u) - l(u)) = sign(a u² + b u + c0) on the cell (denominators positive)
    let a = c.beta * l.delta - l.beta * c.delta;
    let b = c.alpha * l.delta + c.beta * l.gamma - l.alpha * c.delta - l.beta * c.gamma;
    let c0 = c.alpha * l.gamma - l.alpha * c.gamma;
    quadratic_roots(a, b, c0)
        .into_iter()
        .filter(|&r| r > after && r <= limit && 2.0 * a * r + b > 0.0)
        .fold(None, |acc: Option<f64>, r| {
            Some(acc.map_or(r, |x| x.min(r)))
        })
}

/// Upper envelope of Möbius functions (denominators positive on `[lo, hi]`).
fn upper_envelope(fams: &[Mobius<f64>], lo: f64, hi: f64) -> Vec<MobiusPiece<f64>> {
    // Each candidate is monotone on the cell, so its smaller endpoint value is
    // a floor for the envelope; anything whose larger endpoint value is below
    // that floor never wins.
    let ends: Vec<(f64, f64)> = fams.iter().map(|m| (m.eval(&lo), m.eval(&hi))).collect();
    let floor = ends
        .iter()
        .map(|(a, b)| a.min(*b))
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = 1e-12 * floor.abs();
    let live: Vec<usize> = (0..fams.len())
        .filter(|&i| ends[i].0.max(ends[i].1) >= floor - margin)
        .collect();

    let width = hi - lo;
    let eps = 1e-14 * width;
    let pick = |u: f64, candidates: &mut dyn Iterator<Item = usize>| -> usize {
        let mut best: Option<(usize, f64, f64)> = None;
        for i in candidates {
            let v = fams[i].eval(&u);
            let d = derivative(&fams[i], u);
            best = match best {
                None => Some((i, v, d)),
                Some((bi, bv, bd)) => {
                    let tie = (v - bv).abs() <= 1e-13 * bv.abs().max(v.abs());
                    if (tie && d > bd) || (!tie && v > bv) {
                        Some((i, v, d))
                    } else {
                        Some((bi, bv, bd))
                    }
                }
            };
        }
        best.expect("at least one candidate").0
    };

    let mut pieces = Vec::new();
    let mut cur = lo;
    let mut leader = pick(lo, &mut live.iter().copied());
    for _ in 0..=4 * live.len() + 4 {
        let mut next = hi;
        let mut challengers: Vec<usize> = Vec::new();
        for &c in live.iter().filter(|&&c| c != leader) {
            if let Some(r) = overtake_point(&fams[c], &fams[leader], cur + eps, next + eps) {
                if r < next - eps {
                    next = r;
                    challengers.clear();
                }
                challengers.push(c);
            }
        }
        let next = next.min(hi);
        pieces.push(MobiusPiece {
            lo: cur,
            hi: next,
            map: fams[leader].clone(),
        });
        if challengers.is_empty() || next >= hi {
            break;
        }
        cur = next;
        leader = pick(cur, &mut challengers.into_iter());
    }
    if let Some(last) = pieces.last_mut() {
        last.hi = hi;
    }
    pieces.retain(|p| p.hi > p.lo);
    if pieces.is_empty() {
        pieces.push(MobiusPiece {
            lo,
            hi,
            map: fams[leader].clone(),
        });
    }
    pieces
}

/// `M f` as an explicit piecewise-Möbius function (double precision).
pub fn compute<S: Scalar>(f: &StepFunction<S>) -> PiecewiseMobius<f64> {
    MaximalFunction::new(&f.to_f64()).to_piecewise()
}

/// `‖M f‖_p / ‖f‖_p`.
pub fn operator_ratio<S: Scalar>(f: &StepFunction<S>, p: f64) -> Result<f64> {
    let denom = f.lp_norm(p)?;
    if denom == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let num = compute(f).lp_norm(p, DEFAULT_QUAD_TOL)?;
    Ok(num.value / denom)
}
