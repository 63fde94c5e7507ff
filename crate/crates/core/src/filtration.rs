//! Finite probability spaces, unions of filtrations and Doob maximal functions.
//!
//! A σ-algebra on a finite atom set is stored as the partition into its atoms,
//! so conditional expectation is a probability-weighted block average. A
//! filtration is a chain of partitions, each refining the previous one.

use std::collections::HashMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::maximal::MaximalFunction;
use crate::rearrangement::{distribution_function, rearrange};
use crate::scalar::{from_usize, Scalar};

/// Largest atom count accepted by [`enumerate_unions`].
pub const MAX_ENUMERATION_ATOMS: usize = 6;

/// An atomic probability space.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProbSpace<S> {
    probs: Vec<S>,
}

impl<S: Scalar> FiniteProbSpace<S> {
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter(
                "a probability space needs at least one atom".into(),
            ));
        }
        if let Some(p) = probs
            .iter()
            .find(|p| **p <= S::zero() || !p.is_finite_value())
        {
            return Err(Error::InvalidParameter(format!(
                "atom probability {p} must be positive"
            )));
        }
        let total = probs.iter().fold(S::zero(), |a, p| a + p.clone());
        let off = (total.clone() - S::one()).abs().to_f64_lossy();
        if off > S::slack(1.0) * probs.len() as f64 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "a probability space needs at least one atom".into(),
            ));
        }
        Self::new(vec![S::one() / from_usize(n); n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    /// `P(A)` for `A` given by an atom predicate.
    pub fn prob_where(&self, pred: impl Fn(usize) -> bool) -> S {
        (0..self.len())
            .filter(|&i| pred(i))
            .fold(S::zero(), |a, i| a + self.probs[i].clone())
    }

    pub fn to_f64(&self) -> FiniteProbSpace<f64> {
        FiniteProbSpace {
            probs: self.probs.iter().map(Scalar::to_f64_lossy).collect(),
        }
    }
}

/// A random variable on a finite space: one value per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Rv<S> {
    values: Vec<S>,
}

impl<S: Scalar> Rv<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite(v.to_f64_lossy()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn abs(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn expectation(&self, space: &FiniteProbSpace<S>) -> S {
        self.values
            .iter()
            .zip(space.probs())
            .fold(S::zero(), |a, (v, p)| a + v.clone() * p.clone())
    }

    /// `E|ξ|^p`.
    pub fn lp_norm_pow(&self, space: &FiniteProbSpace<S>, p: f64) -> f64 {
        self.values
            .iter()
            .zip(space.probs())
            .map(|(v, q)| q.to_f64_lossy() * v.to_f64_lossy().abs().powf(p))
            .sum()
    }

    pub fn lp_norm(&self, space: &FiniteProbSpace<S>, p: f64) -> f64 {
        self.lp_norm_pow(space, p).powf(1.0 / p)
    }

    pub fn to_f64(&self) -> Rv<f64> {
        Rv {
            values: self.values.iter().map(Scalar::to_f64_lossy).collect(),
        }
    }
}

fn check_len<S>(space: &FiniteProbSpace<S>, n: usize, what: &str) -> Result<()> {
    if space.probs.len() != n {
        return Err(Error::MalformedPartition(format!(
            "{what} covers {n} atoms but the space has {}",
            space.probs.len()
        )));
    }
    Ok(())
}

/// A partition of `{0, …, n-1}` stored as a restricted growth string: atom `i`
/// lies in block `labels[i]`, and blocks are numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    labels: Vec<usize>,
    blocks: usize,
}

impl Partition {
    /// Relabels an arbitrary block assignment into canonical form.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let labels = raw
            .iter()
            .map(|l| match map.iter().find(|(from, _)| from == l) {
                Some(&(_, to)) => to,
                None => {
                    let to = map.len();
                    map.push((*l, to));
                    to
                }
            })
            .collect();
        Self {
            labels,
            blocks: map.len(),
        }
    }

    /// From explicit blocks of 0-based atom indices.
    pub fn from_blocks(blocks: &[Vec<usize>], n: usize) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::MalformedPartition("empty block".into()));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::MalformedPartition(format!(
                        "atom {} out of range 1..={n}",
                        i + 1
                    )));
                }
                if labels[i] != usize::MAX {
                    return Err(Error::MalformedPartition(format!(
                        "atom {} appears in two blocks",
                        i + 1
                    )));
                }
                labels[i] = b;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::MalformedPartition(format!(
                "atom {} is in no block",
                i + 1
            )));
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn trivial(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            blocks: usize::from(n > 0),
        }
    }

    pub fn discrete(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            blocks: n,
        }
    }

    pub fn atoms(&self) -> usize {
        self.labels.len()
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.blocks];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Every block of `self` lies inside a block of `coarse`.
    pub fn refines(&self, coarse: &Partition) -> bool {
        if self.atoms() != coarse.atoms() {
            return false;
        }
        let mut image = vec![usize::MAX; self.blocks];
        self.labels.iter().zip(&coarse.labels).all(|(&f, &c)| {
            if image[f] == usize::MAX {
                image[f] = c;
            }
            image[f] == c
        })
    }

    /// All partitions of `n` atoms, in lexicographic order of their labels.
    pub fn all(n: usize) -> Vec<Partition> {
        fn go(labels: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Partition>) {
            if labels.len() == n {
                out.push(Partition {
                    labels: labels.clone(),
                    blocks: if n == 0 { 0 } else { max + 1 },
                });
                return;
            }
            let top = if labels.is_empty() { 0 } else { max + 1 };
            for l in 0..=top {
                labels.push(l);
                go(labels, max.max(l), n, out);
                labels.pop();
            }
        }
        let mut out = Vec::new();
        go(&mut Vec::with_capacity(n), 0, n, &mut out);
        out
    }
}

/// A filtration: partitions `G_1 ⊆ G_2 ⊆ …`, each refining the previous one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionChain {
    parts: Vec<Partition>,
}

impl PartitionChain {
    pub fn new(parts: Vec<Partition>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::MalformedPartition(
                "a chain needs at least one partition".into(),
            ));
        };
        let n = first.atoms();
        if parts.iter().any(|p| p.atoms() != n) {
            return Err(Error::MalformedPartition(
                "partitions in a chain disagree on the atom count".into(),
            ));
        }
        if let Some(i) = parts.windows(2).position(|w| !w[1].refines(&w[0])) {
            return Err(Error::MalformedPartition(format!(
                "partition {} does not refine partition {}",
                i + 2,
                i + 1
            )));
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[Partition] {
        &self.parts
    }

    pub fn atoms(&self) -> usize {
        self.parts[0].atoms()
    }

    /// The chain with the discrete partition appended (unless already last).
    pub fn with_full(&self) -> Self {
        let n = self.atoms();
        let mut parts = self.parts.clone();
        if parts.last().map(Partition::block_count) != Some(n) {
            parts.push(Partition::discrete(n));
        }
        Self { parts }
    }
}

/// A union of `k` filtrations over the same atoms, with no relation imposed
/// between different chains.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiltrationUnion {
    chains: Vec<PartitionChain>,
}

impl FiltrationUnion {
    pub fn new(chains: Vec<PartitionChain>) -> Result<Self> {
        let Some(first) = chains.first() else {
            return Err(Error::InvalidParameter(
                "a union needs at least one chain".into(),
            ));
        };
        let n = first.atoms();
        if chains.iter().any(|c| c.atoms() != n) {
            return Err(Error::MalformedPartition(
                "chains disagree on the atom count".into(),
            ));
        }
        Ok(Self { chains })
    }

    /// Each chain reduced to the trivial partition.
    pub fn trivial(n: usize, k: usize) -> Self {
        Self {
            chains: vec![
                PartitionChain {
                    parts: vec![Partition::trivial(n)]
                };
                k
            ],
        }
    }

    pub fn k(&self) -> usize {
        self.chains.len()
    }

    pub fn atoms(&self) -> usize {
        self.chains[0].atoms()
    }

    pub fn chains(&self) -> &[PartitionChain] {
        &self.chains
    }

    pub fn with_full(&self) -> Self {
        Self {
            chains: self.chains.iter().map(PartitionChain::with_full).collect(),
        }
    }

    /// `[[ [blocks of G_1], [blocks of G_2], … ], …]` with 1-based atoms.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.chains
                .iter()
                .map(|c| {
                    Value::Array(
                        c.parts
                            .iter()
                            .map(|p| {
                                json!(p
                                    .blocks()
                                    .iter()
                                    .map(|b| b.iter().map(|i| i + 1).collect::<Vec<_>>())
                                    .collect::<Vec<_>>())
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    pub fn from_json(v: &Value, n: usize) -> Result<Self> {
        let arr = |v: &Value, what: &str| -> Result<Vec<Value>> {
            v.as_array()
                .cloned()
                .ok_or_else(|| Error::Parse(format!("{what} must be an array")))
        };
        let chains = arr(v, "chains")?
            .iter()
            .map(|c| {
                let parts = arr(c, "a chain")?
                    .iter()
                    .map(|p| {
                        let blocks = arr(p, "a partition")?
                            .iter()
                            .map(|b| {
                                arr(b, "a block")?
                                    .iter()
                                    .map(|i| match i.as_u64() {
                                        Some(i) if i >= 1 => Ok(i as usize - 1),
                                        _ => Err(Error::Parse(format!(
                                            "atom index {i} must be a positive integer"
                                        ))),
                                    })
                                    .collect::<Result<Vec<_>>>()
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Partition::from_blocks(&blocks, n)
                    })
                    .collect::<Result<Vec<_>>>()?;
                PartitionChain::new(parts)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(chains)
    }
}

/// `E(ξ | σ(partition))`.
pub fn cond_expectation<S: Scalar>(
    space: &FiniteProbSpace<S>,
    xi: &Rv<S>,
    partition: &Partition,
) -> Result<Rv<S>> {
    check_len(space, partition.atoms(), "partition")?;
    check_len(space, xi.len(), "random variable")?;
    let mut mass = vec![S::zero(); partition.block_count()];
    let mut sum = vec![S::zero(); partition.block_count()];
    for (i, &l) in partition.labels.iter().enumerate() {
        mass[l] = mass[l].clone() + space.probs[i].clone();
        sum[l] = sum[l].clone() + space.probs[i].clone() * xi.values[i].clone();
    }
    let avg: Vec<S> = sum.into_iter().zip(mass).map(|(s, m)| s / m).collect();
    Ok(Rv {
        values: partition.labels.iter().map(|&l| avg[l].clone()).collect(),
    })
}

/// `max_i |E(ξ | G_i)|` along one chain.
pub fn chain_maximal<S: Scalar>(
    space: &FiniteProbSpace<S>,
    xi: &Rv<S>,
    chain: &PartitionChain,
) -> Result<Rv<S>> {
    let mut out = vec![S::zero(); xi.len()];
    for part in &chain.parts {
        let e = cond_expectation(space, xi, part)?;
        for (o, v) in out.iter_mut().zip(e.values) {
            let a = v.abs();
            if a > *o {
                *o = a;
            }
        }
    }
    Ok(Rv { values: out })
}

/// `M_Gξ = sup_{i,j} |E(ξ | G_i^j)|`, atomwise. With `adjoin_full` the
/// discrete partition is appended to every chain first, so `M_Gξ ≥ |ξ|`.
pub fn doob_maximal<S: Scalar>(
    space: &FiniteProbSpace<S>,
    xi: &Rv<S>,
    g: &FiltrationUnion,
    adjoin_full: bool,
) -> Result<Rv<S>> {
    let g = if adjoin_full {
        g.with_full()
    } else {
        g.clone()
    };
    let mut out = vec![S::zero(); xi.len()];
    for chain in &g.chains {
        let m = chain_maximal(space, xi, chain)?;
        for (o, v) in out.iter_mut().zip(m.values) {
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(Rv { values: out })
}

/// Outcome of a tail comparison `P(M_Gξ ≥ a) ≤ λ_k(Mξ* ≥ a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailReport<S> {
    pub ok: bool,
    /// Level with the smallest slack.
    pub worst_s: S,
    /// `min_a (λ_k(Mξ* ≥ a) − P(M_Gξ ≥ a))`.
    pub slack: S,
    pub levels_checked: usize,
}

/// Checks `P(M_Gξ > s) ≤ λ_k(M(ξ*) > s)` for every `s ≥ 0`, where `k` is the
/// number of chains in `g`.
///
/// The left side is a right-continuous step function of `s` that jumps only at
/// the values `a` of `M_Gξ`, while the right side is continuous, so it suffices
/// to compare `P(M_Gξ ≥ a)` with `λ_k(Mξ* ≥ a)` at those values.
pub fn verify_tail<S: Scalar>(
    space: &FiniteProbSpace<S>,
    xi: &Rv<S>,
    g: &FiltrationUnion,
) -> Result<TailReport<S>> {
    let star = rearrange(space, xi, g.k())?;
    let mf = MaximalFunction::new(&star);
    let m = doob_maximal(space, xi, g, false)?;
    tail_check(space, &m, |a| mf.level_measure_with(a, false))
}

/// The closed-level comparison for a precomputed `M_Gξ` and a caller-supplied
/// `a ↦ λ_k(Mξ* ≥ a)`.
pub fn tail_check<S: Scalar>(
    space: &FiniteProbSpace<S>,
    m: &Rv<S>,
    mut rhs: impl FnMut(&S) -> Result<S>,
) -> Result<TailReport<S>> {
    check_len(space, m.len(), "maximal function")?;
    let mut levels: Vec<S> = m
        .values
        .iter()
        .filter(|v| **v > S::zero())
        .cloned()
        .collect();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    levels.dedup();
    let mut worst: Option<(S, S)> = None;
    for a in &levels {
        let lhs = space.prob_where(|i| m.values[i] >= *a);
        let slack = rhs(a)? - lhs;
        if worst.as_ref().map_or(true, |(_, w)| slack < *w) {
            worst = Some((a.clone(), slack));
        }
    }
    let (worst_s, slack) = worst.unwrap_or((S::zero(), S::zero()));
    let ok = slack.to_f64_lossy() >= -S::slack(1.0) * 1e3;
    Ok(TailReport {
        ok,
        worst_s,
        slack,
        levels_checked: levels.len(),
    })
}

/// Memoizes `a ↦ λ_k(Mξ* ≥ a)` by the distribution of `|ξ|`, which is all
/// the right side of the tail inequality depends on. Exhaustive sweeps revisit
/// the same few distributions many times.
#[derive(Default)]
pub struct TailOracle<S: Scalar> {
    cache: HashMap<(usize, Vec<(String, String)>), (MaximalFunction<S>, HashMap<String, S>)>,
}

impl<S: Scalar> TailOracle<S> {
    pub fn new() -> Self {
        Self {
            cache: HashMap::new(),
        }
    }

    pub fn distributions_seen(&self) -> usize {
        self.cache.len()
    }

    pub fn verify(
        &mut self,
        space: &FiniteProbSpace<S>,
        xi: &Rv<S>,
        g: &FiltrationUnion,
    ) -> Result<TailReport<S>> {
        let m = doob_maximal(space, xi, g, false)?;
        self.verify_maximal(space, xi, g.k(), &m)
    }

    /// As [`TailOracle::verify`] with `M_Gξ` already computed for a union of `k` chains.
    pub fn verify_maximal(
        &mut self,
        space: &FiniteProbSpace<S>,
        xi: &Rv<S>,
        k: usize,
        m: &Rv<S>,
    ) -> Result<TailReport<S>> {
        let d = distribution_function(space, xi)?;
        let key = (
            k,
            d.levels()
                .iter()
                .map(|(v, w)| (v.to_string(), w.to_string()))
                .collect::<Vec<_>>(),
        );
        if !self.cache.contains_key(&key) {
            let star = rearrange(space, xi, k)?;
            self.cache
                .insert(key.clone(), (MaximalFunction::new(&star), HashMap::new()));
        }
        let (mf, levels) = self.cache.get_mut(&key).expect("inserted above");
        tail_check(space, m, |a| {
            let tag = a.to_string();
            if let Some(v) = levels.get(&tag) {
                return Ok(v.clone());
            }
            let v = mf.level_measure_with(a, false)?;
            levels.insert(tag, v.clone());
            Ok(v)
        })
    }
}

/// `‖M_Gξ‖_p / ‖ξ‖_p`.
pub fn doob_ratio<S: Scalar>(
    space: &FiniteProbSpace<S>,
    xi: &Rv<S>,
    g: &FiltrationUnion,
    p: f64,
) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
    }
    let denom = xi.lp_norm(space, p);
    if denom == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(doob_maximal(space, xi, g, false)?.lp_norm(space, p) / denom)
}

/// Largest value of `∫_{max_i |E(ξ|G_i)| ≥ a} (a − |ξ|) dP` over the positive
/// values `a` of the chain maximal function. Doob's weak-type bound says it
/// is never positive.
pub fn chain_weak_type_excess<S: Scalar>(
    space: &FiniteProbSpace<S>,
    xi: &Rv<S>,
    chain: &PartitionChain,
) -> Result<S> {
    let m = chain_maximal(space, xi, chain)?;
    let mut worst: Option<S> = None;
    for a in m.values.iter().filter(|v| **v > S::zero()) {
        let excess = (0..space.len())
            .filter(|&i| m.values[i] >= *a)
            .fold(S::zero(), |acc, i| {
                acc + space.probs[i].clone() * (a.clone() - xi.values[i].abs())
            });
        if worst.as_ref().map_or(true, |w| excess > *w) {
            worst = Some(excess);
        }
    }
    Ok(worst.unwrap_or_else(S::zero))
}

/// All refining chains of length `1..=max_len` on `n` atoms, each step a strict
/// refinement.
pub fn enumerate_chains(n: usize, max_len: usize) -> Result<Vec<PartitionChain>> {
    if n > MAX_ENUMERATION_ATOMS {
        return Err(Error::SizeGuard(format!(
            "{n} atoms exceeds the enumeration limit of {MAX_ENUMERATION_ATOMS}"
        )));
    }
    if n == 0 || max_len == 0 {
        return Err(Error::InvalidParameter(
            "need at least one atom and max_len >= 1".into(),
        ));
    }
    let all = Partition::all(n);
    let mut out: Vec<PartitionChain> = all
        .iter()
        .map(|p| PartitionChain {
            parts: vec![p.clone()],
        })
        .collect();
    let mut frontier = out.clone();
    for _ in 1..max_len {
        let mut next = Vec::new();
        for chain in &frontier {
            let last = chain.parts.last().expect("nonempty");
            for p in &all {
                if p != last && p.refines(last) {
                    let mut parts = chain.parts.clone();
                    parts.push(p.clone());
                    next.push(PartitionChain { parts });
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}

/// Every union of `k` chains from [`enumerate_chains`], up to reordering of
/// the chains (multisets of size `k`).
pub fn enumerate_unions(n: usize, k: usize, max_len: usize) -> Result<UnionIter> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let chains = enumerate_chains(n, max_len)?;
    Ok(UnionIter {
        chains,
        idx: Some(vec![0; k]),
    })
}

/// Iterator over multisets of chains in lexicographic order of indices.
pub struct UnionIter {
    chains: Vec<PartitionChain>,
    idx: Option<Vec<usize>>,
}

impl UnionIter {
    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }
}

impl Iterator for UnionIter {
    type Item = FiltrationUnion;

    fn next(&mut self) -> Option<FiltrationUnion> {
        let idx = self.idx.as_mut()?;
        let item = FiltrationUnion {
            chains: idx.iter().map(|&i| self.chains[i].clone()).collect(),
        };
        let m = self.chains.len();
        match idx.iter().rposition(|&i| i + 1 < m) {
            Some(pos) => {
                let v = idx[pos] + 1;
                for slot in &mut idx[pos..] {
                    *slot = v;
                }
            }
            None => self.idx = None,
        }
        Some(item)
    }
}

/// A serializable instance `{probs, values, chains}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<S> {
    pub space: FiniteProbSpace<S>,
    pub xi: Rv<S>,
    pub union: FiltrationUnion,
}

impl<S: Scalar> Instance<S> {
    pub fn new(space: FiniteProbSpace<S>, xi: Rv<S>, union: FiltrationUnion) -> Result<Self> {
        check_len(&space, xi.len(), "random variable")?;
        check_len(&space, union.atoms(), "filtration union")?;
        Ok(Self { space, xi, union })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "probs": self.space.probs.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "values": self.xi.values.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "chains": self.union.to_json(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let list = |key: &str| -> Result<Vec<S>> {
            v.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse(format!("missing array field {key}")))?
                .iter()
                .map(S::from_json)
                .collect()
        };
        let space = FiniteProbSpace::new(list("probs")?)?;
        let xi = Rv::new(list("values")?)?;
        let union = match v.get("chains") {
            Some(c) => FiltrationUnion::from_json(c, space.len())?,
            None => FiltrationUnion::trivial(space.len(), 1),
        };
        Self::new(space, xi, union)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{solve_cpk, DEFAULT_TOL};
    use crate::scalar::{ratio, Rational};
    use num_traits::Signed;
    use proptest::prelude::*;

    fn q(p: i64, d: i64) -> Rational {
        ratio(p, d)
    }

    fn half_space() -> FiniteProbSpace<Rational> {
        FiniteProbSpace::new(vec![q(1, 2), q(1, 2)]).unwrap()
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=6).map(|n| Partition::all(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52, 203]);
        assert_eq!(enumerate_unions(2, 1, 1).unwrap().count(), 2);
        assert_eq!(enumerate_unions(3, 1, 1).unwrap().count(), 5);
        assert_eq!(enumerate_unions(1, 3, 2).unwrap().count(), 1);
        assert!(matches!(
            enumerate_unions(7, 1, 1),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn chain_counts_on_four_atoms() {
        // 15 partitions plus 45 strictly refining pairs
        let chains = enumerate_chains(4, 2).unwrap();
        assert_eq!(chains.len(), 60);
        assert_eq!(enumerate_unions(4, 3, 2).unwrap().count(), 62 * 61 * 60 / 6);
    }

    #[test]
    fn cond_expectation_examples() {
        let sp = half_space();
        let xi = Rv::new(vec![q(2, 1), q(0, 1)]).unwrap();
        let e = cond_expectation(&sp, &xi, &Partition::trivial(2)).unwrap();
        assert_eq!(e.values(), &[q(1, 1), q(1, 1)]);
        let e = cond_expectation(&sp, &xi, &Partition::discrete(2)).unwrap();
        assert_eq!(e, xi);
        assert!(cond_expectation(&sp, &xi, &Partition::trivial(3)).is_err());
    }

    #[test]
    fn doob_maximal_examples() {
        let sp = half_space();
        let xi = Rv::new(vec![q(2, 1), q(0, 1)]).unwrap();
        let chain =
            PartitionChain::new(vec![Partition::trivial(2), Partition::discrete(2)]).unwrap();
        let g = FiltrationUnion::new(vec![chain]).unwrap();
        let m = doob_maximal(&sp, &xi, &g, false).unwrap();
        assert_eq!(m.values(), &[q(2, 1), q(1, 1)]);
        let r = doob_ratio(&sp, &xi, &g, 2.0).unwrap();
        assert!((r - (2.5f64).sqrt() / 2f64.sqrt()).abs() < 1e-12);
        let trivial = FiltrationUnion::trivial(2, 3);
        let m = doob_maximal(&sp, &xi, &trivial, false).unwrap();
        assert_eq!(m.values(), &[q(1, 1), q(1, 1)]);
        assert!(matches!(
            doob_ratio(&sp, &Rv::new(vec![q(0, 1), q(0, 1)]).unwrap(), &g, 2.0),
            Err(Error::ZeroFunction)
        ));
    }

    #[test]
    fn tail_on_two_atom_example() {
        let sp = half_space();
        let xi = Rv::new(vec![q(2, 1), q(0, 1)]).unwrap();
        let chain =
            PartitionChain::new(vec![Partition::trivial(2), Partition::discrete(2)]).unwrap();
        let g = FiltrationUnion::new(vec![chain]).unwrap();
        let rep = verify_tail(&sp, &xi, &g).unwrap();
        assert!(rep.ok, "{rep:?}");
        assert_eq!(rep.levels_checked, 2);
        // ξ* = 2 on [0, 1/2); Mξ* = 1/u for u ≥ 1/2, so λ(Mξ* ≥ 1) = 1 and
        // λ(Mξ* ≥ 2) = 1/2, matching P(M_Gξ ≥ ·) exactly.
        assert_eq!(rep.slack, q(0, 1));
    }

    #[test]
    fn tail_for_constant_variable_is_tight() {
        let sp = FiniteProbSpace::new(vec![q(1, 5), q(3, 10), q(1, 2)]).unwrap();
        let xi = Rv::new(vec![q(-3, 1); 3]).unwrap();
        for g in enumerate_unions(3, 2, 2).unwrap() {
            let rep = verify_tail(&sp, &xi, &g).unwrap();
            assert!(rep.ok);
            assert_eq!(rep.slack, q(0, 1));
        }
    }

    #[test]
    fn closed_level_reduction_matches_dense_grid() {
        let sp = FiniteProbSpace::new(vec![q(1, 10), q(2, 10), q(3, 10), q(4, 10)]).unwrap();
        let xi = Rv::new(vec![q(3, 1), q(-1, 1), q(2, 1), q(0, 1)]).unwrap();
        let g = FiltrationUnion::new(vec![
            PartitionChain::new(vec![
                Partition::from_blocks(&[vec![0, 1], vec![2, 3]], 4).unwrap(),
                Partition::from_blocks(&[vec![0], vec![1], vec![2, 3]], 4).unwrap(),
            ])
            .unwrap(),
            PartitionChain::new(vec![
                Partition::from_blocks(&[vec![0, 3], vec![1, 2]], 4).unwrap()
            ])
            .unwrap(),
        ])
        .unwrap();
        let rep = verify_tail(&sp, &xi, &g).unwrap();
        let star = rearrange(&sp, &xi, 2).unwrap();
        let mf = MaximalFunction::new(&star);
        let m = doob_maximal(&sp, &xi, &g, false).unwrap();
        let mut dense_min: Option<Rational> = None;
        for i in 0..=400 {
            let s = q(i, 100);
            let lhs = sp.prob_where(|j| m.values()[j] > s);
            let slack = mf.level_measure(&s).unwrap() - lhs;
            if dense_min.as_ref().map_or(true, |d| slack < *d) {
                dense_min = Some(slack);
            }
        }
        let dense_min = dense_min.unwrap();
        assert!(dense_min >= q(0, 1));
        // the reduced check is never weaker than the grid
        assert!(rep.slack <= dense_min);
        assert!(rep.ok);
    }

    #[test]
    fn json_round_trip() {
        let v: Value = serde_json::from_str(
            r#"{"probs": ["1/2", "1/4", "1/4"], "values": [1, -2, "3/2"],
                "chains": [[[[1, 2, 3]], [[1], [2, 3]]], [[[1, 3], [2]]]]}"#,
        )
        .unwrap();
        let inst: Instance<Rational> = Instance::from_json(&v).unwrap();
        assert_eq!(inst.union.k(), 2);
        let back = Instance::<Rational>::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        let bad: Value =
            serde_json::from_str(r#"{"probs": [1], "values": [1], "chains": [[[[2]]]]}"#).unwrap();
        assert!(Instance::<Rational>::from_json(&bad).is_err());
    }

    #[test]
    fn chains_must_refine() {
        let a = Partition::from_blocks(&[vec![0, 1], vec![2]], 3).unwrap();
        let b = Partition::from_blocks(&[vec![0], vec![1, 2]], 3).unwrap();
        assert!(PartitionChain::new(vec![a.clone(), b]).is_err());
        assert!(PartitionChain::new(vec![Partition::trivial(3), a]).is_ok());
        assert!(Partition::from_blocks(&[vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(Partition::from_blocks(&[vec![0, 1]], 3).is_err());
    }

    fn space_strategy() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
        (1usize..=5).prop_flat_map(|n| {
            (
                prop::collection::vec(1i64..10, n),
                prop::collection::vec(-5i64..=5, n),
            )
        })
    }

    fn instance(w: &[i64], v: &[i64]) -> (FiniteProbSpace<Rational>, Rv<Rational>) {
        let total: i64 = w.iter().sum();
        (
            FiniteProbSpace::new(w.iter().map(|&x| q(x, total)).collect()).unwrap(),
            Rv::new(v.iter().map(|&x| q(x, 1)).collect()).unwrap(),
        )
    }

    proptest! {
        #[test]
        fn projection_and_tower((w, v) in space_strategy(), seed in 0usize..1000) {
            let (sp, xi) = instance(&w, &v);
            let parts = Partition::all(sp.len());
            let fine = &parts[seed % parts.len()];
            let coarse_all: Vec<&Partition> = parts.iter().filter(|p| fine.refines(p)).collect();
            let coarse = coarse_all[seed % coarse_all.len()];
            let ef = cond_expectation(&sp, &xi, fine).unwrap();
            prop_assert_eq!(cond_expectation(&sp, &ef, fine).unwrap(), ef.clone());
            prop_assert_eq!(
                cond_expectation(&sp, &ef, coarse).unwrap(),
                cond_expectation(&sp, &xi, coarse).unwrap()
            );
            prop_assert_eq!(ef.expectation(&sp), xi.expectation(&sp));
            for p in [1.5, 2.0, 3.0] {
                prop_assert!(ef.lp_norm(&sp, p) <= xi.lp_norm(&sp, p) + 1e-12);
            }
        }

        #[test]
        fn doob_bounds_on_random_unions((w, v) in space_strategy(), k in 1usize..=3, seed in 0u64..1000) {
            let (sp, xi) = instance(&w, &v);
            let chains = enumerate_chains(sp.len(), 3).unwrap();
            let pick = |j: u64| chains[((seed * 31 + j * 17) as usize) % chains.len()].clone();
            let g = FiltrationUnion::new((0..k as u64).map(pick).collect()).unwrap();
            for chain in g.chains() {
                prop_assert!(chain_weak_type_excess(&sp, &xi, chain).unwrap() <= q(0, 1));
            }
            let full = doob_maximal(&sp, &xi, &g, true).unwrap();
            for (m, x) in full.values().iter().zip(xi.values()) {
                prop_assert!(*m >= x.abs());
            }
            prop_assert!(verify_tail(&sp, &xi, &g).unwrap().ok);
            prop_assert!(verify_tail(&sp, &xi, &g.with_full()).unwrap().ok);
            if v.iter().any(|&x| x != 0) {
                let c = solve_cpk(2.0, k, DEFAULT_TOL).unwrap().value;
                prop_assert!(doob_ratio(&sp, &xi, &g.with_full(), 2.0).unwrap() <= c + 1e-9);
            }
        }
    }
}
