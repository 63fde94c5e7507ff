//! Greedy selection of a subfamily of balls with the same union and bounded
//! overlap.
//!
//! Each ray is treated as the interval `[0, 1]` and every ball is read
//! through its trace there. The sequence on a ray starts with `J_0`, the
//! star with the longest trace on that ray, and continues by
//!
//! 1. among traces meeting `J_n` and reaching past `sup J_n`, the one with
//!    the largest left endpoint;
//! 2. otherwise, among traces with `inf J ≥ sup J_n`, the one with the
//!    smallest left endpoint.
//!
//! Ties go to the ball of larger total measure, then to the lower index. The
//! selected family covers at most `k + 1` times; for `k ≥ 2` the `J_0` of a
//! ray carrying a `(k+1)`-fold point is dropped until the bound is `k`.

use crate::domain::{Ball, RayIntervals, SpiderPoint};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};

/// The per-ray sequence `J_0, J_1, …` as indices into the input family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaySequence {
    pub ray: usize,
    /// `None` when no star reaches this ray.
    pub j0: Option<usize>,
    /// `J_1, J_2, …`.
    pub rest: Vec<usize>,
}

impl RaySequence {
    /// `(ℓ, index of J_ℓ)` for every chosen `J_ℓ`.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.j0
            .map(|i| (0, i))
            .into_iter()
            .chain(self.rest.iter().enumerate().map(|(l, &i)| (l + 1, i)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult<S> {
    /// Indices of the selected balls, increasing.
    pub selected_indices: Vec<usize>,
    pub selected: Vec<Ball<S>>,
    pub per_ray_sequences: Vec<RaySequence>,
    /// Indices dropped by the improvement step, in removal order.
    pub removed: Vec<usize>,
}

fn overlap<S: Scalar>(x: &(S, S), y: &(S, S)) -> bool {
    S::max_of(x.0.clone(), y.0.clone()) < S::min_of(x.1.clone(), y.1.clone())
}

/// Drops every ball contained in another one; of identical balls the first is kept.
pub fn filter_containment<S: Scalar>(balls: &[Ball<S>], k: usize) -> Vec<Ball<S>> {
    balls
        .iter()
        .enumerate()
        .filter(|(i, b)| {
            !balls.iter().enumerate().any(|(j, o)| {
                j != *i && o.contains_ball(b, k) && (j < *i || !b.contains_ball(o, k))
            })
        })
        .map(|(_, b)| b.clone())
        .collect()
}

fn check_family<S: Scalar>(balls: &[Ball<S>], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    for b in balls {
        b.validate(k)?;
    }
    for (i, a) in balls.iter().enumerate() {
        for (j, b) in balls.iter().enumerate() {
            if i != j && a.contains_ball(b, k) {
                return Err(Error::Containment { outer: i, inner: j });
            }
        }
    }
    Ok(())
}

fn ray_sequence<S: Scalar>(balls: &[Ball<S>], k: usize, ray: usize) -> RaySequence {
    let traces: Vec<Option<(S, S)>> = balls.iter().map(|b| b.trace(ray)).collect();
    let measures: Vec<S> = balls.iter().map(|b| b.measure(k)).collect();
    // Total order on candidates: primary key, then larger measure, then lower index.
    let better = |i: usize, j: usize, key_i: &S, key_j: &S, larger: bool| -> bool {
        if key_i != key_j {
            return if larger { key_i > key_j } else { key_i < key_j };
        }
        if measures[i] != measures[j] {
            return measures[i] > measures[j];
        }
        i < j
    };
    let pick = |cands: Vec<usize>, key: &dyn Fn(usize) -> S, larger: bool| -> Option<usize> {
        cands.into_iter().reduce(|best, c| {
            if better(c, best, &key(c), &key(best), larger) {
                c
            } else {
                best
            }
        })
    };

    let stars: Vec<usize> = (0..balls.len())
        .filter(|&i| balls[i].is_star() && traces[i].is_some())
        .collect();
    let hi = |i: usize| traces[i].as_ref().expect("candidate has a trace").1.clone();
    let lo = |i: usize| traces[i].as_ref().expect("candidate has a trace").0.clone();
    let j0 = pick(stars, &hi, true);

    let mut rest = Vec::new();
    let mut current: Option<usize> = j0;
    loop {
        let sup = current.map_or_else(S::zero, hi);
        let meeting: Vec<usize> = match current {
            Some(c) => (0..balls.len())
                .filter(|&i| {
                    traces[i].as_ref().is_some_and(|t| {
                        overlap(t, traces[c].as_ref().expect("chosen ball has a trace"))
                            && t.1 > sup
                    })
                })
                .collect(),
            None => Vec::new(),
        };
        let next = if !meeting.is_empty() {
            pick(meeting, &lo, true)
        } else {
            let beyond: Vec<usize> = (0..balls.len())
                .filter(|&i| traces[i].as_ref().is_some_and(|t| t.0 >= sup))
                .collect();
            pick(beyond, &lo, false)
        };
        match next {
            Some(n) => {
                rest.push(n);
                current = Some(n);
            }
            None => break,
        }
    }
    RaySequence { ray, j0, rest }
}

/// Runs the selection on a containment-free family.
pub fn select<S: Scalar>(balls: &[Ball<S>], k: usize) -> Result<SelectionResult<S>> {
    check_family(balls, k)?;
    let per_ray_sequences: Vec<RaySequence> =
        (0..k).map(|ray| ray_sequence(balls, k, ray)).collect();
    let mut chosen = vec![false; balls.len()];
    for seq in &per_ray_sequences {
        for (_, i) in seq.indexed() {
            chosen[i] = true;
        }
    }
    let mut removed = Vec::new();
    if k >= 2 {
        let target = RayIntervals::of_balls(balls, k).canonical();
        loop {
            let current: Vec<Ball<S>> = (0..balls.len())
                .filter(|&i| chosen[i])
                .map(|i| balls[i].clone())
                .collect();
            let (mult, witness) = multiplicity_audit(&current, k);
            if mult <= k {
                break;
            }
            let Some(j0) = per_ray_sequences[witness.ray].j0.filter(|&i| chosen[i]) else {
                break;
            };
            chosen[j0] = false;
            let after = (0..balls.len()).filter(|&i| chosen[i]).map(|i| &balls[i]);
            if RayIntervals::of_balls(after, k).canonical() != target {
                // keeping the union takes precedence over the overlap bound
                chosen[j0] = true;
                break;
            }
            removed.push(j0);
        }
    }
    let selected_indices: Vec<usize> = (0..balls.len()).filter(|&i| chosen[i]).collect();
    let selected = selected_indices.iter().map(|&i| balls[i].clone()).collect();
    Ok(SelectionResult {
        selected_indices,
        selected,
        per_ray_sequences,
        removed,
    })
}

/// Largest number of balls covering a single point, with a point attaining
/// it. Points are the midpoints of the cells cut out by all trace endpoints,
/// plus the hub (covered by every star).
pub fn multiplicity_audit<S: Scalar>(balls: &[Ball<S>], k: usize) -> (usize, SpiderPoint<S>) {
    let hub = balls.iter().filter(|b| b.is_star()).count();
    let mut best = (hub, SpiderPoint::origin());
    let two = from_usize::<S>(2);
    for ray in 0..k {
        let mut cuts = vec![S::zero(), S::one()];
        for b in balls {
            if let Some((lo, hi)) = b.trace(ray) {
                cuts.push(lo);
                cuts.push(hi);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("ordered scalars"));
        cuts.dedup();
        for w in cuts.windows(2) {
            let mid = (w[0].clone() + w[1].clone()) / two.clone();
            let x = SpiderPoint { ray, pos: mid };
            let count = balls.iter().filter(|b| b.contains(&x)).count();
            if count > best.0 {
                best = (count, x);
            }
        }
    }
    best
}

/// Same canonical trace union for both families.
pub fn union_preserved<S: Scalar>(original: &[Ball<S>], selected: &[Ball<S>], k: usize) -> bool {
    RayIntervals::of_balls(original, k).canonical()
        == RayIntervals::of_balls(selected, k).canonical()
}

/// Whether `J_0, J_2, …` and `J_1, J_3, …` are pairwise disjoint on each ray.
pub fn parity_disjoint<S: Scalar>(balls: &[Ball<S>], result: &SelectionResult<S>) -> bool {
    result.per_ray_sequences.iter().all(|seq| {
        let items: Vec<(usize, (S, S))> = seq
            .indexed()
            .map(|(l, i)| (l, balls[i].trace(seq.ray).expect("selected on this ray")))
            .collect();
        items.iter().enumerate().all(|(a, (la, ta))| {
            items[a + 1..]
                .iter()
                .all(|(lb, tb)| la % 2 != lb % 2 || !overlap(ta, tb))
        })
    })
}
