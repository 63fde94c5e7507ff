//! Batch drivers over seeded random or exhaustive instance families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{lemma_aux_check, lp_chain_check, random, weak_type_check, InequalityReport};
use crate::constants::{solve_cpk, DEFAULT_TOL};
use crate::covering::{multiplicity_audit, parity_disjoint, select, union_preserved};
use crate::error::Result;
use crate::filtration::{
    chain_weak_type_excess, doob_maximal, enumerate_chains, enumerate_unions, FiltrationUnion,
    FiniteProbSpace, Rv, TailOracle, MAX_ENUMERATION_ATOMS,
};
use crate::maximal::MaximalFunction;
use crate::scalar::{ratio, Backend, Rational, Scalar};

/// Failing reports kept in a summary.
const KEEP_FAILURES: usize = 10;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Aggregate of a batch of [`InequalityReport`]s.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub suite: String,
    pub seed: u64,
    pub instances: usize,
    pub applicable: usize,
    pub failures: usize,
    /// Smallest slack among applicable reports.
    pub worst_slack: Option<f64>,
    pub worst_instance: Option<String>,
    pub failing: Vec<InequalityReport>,
}

impl SweepSummary {
    pub fn new(suite: &str, seed: u64) -> Self {
        Self {
            suite: suite.to_string(),
            seed,
            instances: 0,
            applicable: 0,
            failures: 0,
            worst_slack: None,
            worst_instance: None,
            failing: Vec::new(),
        }
    }

    pub fn record(&mut self, report: InequalityReport) {
        self.instances += 1;
        if !report.applicable {
            return;
        }
        self.applicable += 1;
        if self.worst_slack.map_or(true, |w| report.slack < w) {
            self.worst_slack = Some(report.slack);
            self.worst_instance = Some(report.instance.clone());
        }
        if !report.ok {
            self.failures += 1;
            if self.failing.len() < KEEP_FAILURES {
                self.failing.push(report);
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.failures == 0
    }
}

/// The weak-type inequality on `count` random step functions with `k` in
/// `1..=5` and a random positive level.
pub fn weak_type_sweep(count: usize, seed: u64, backend: Backend) -> Result<SweepSummary> {
    let mut rng = stream_rng(seed, 1);
    let mut summary = SweepSummary::new("weaktype", seed);
    for _ in 0..count {
        let k = rng.gen_range(1..=5);
        let report = match backend {
            Backend::Exact => {
                let f = random::step_exact(&mut rng, k, 6, 24, 5);
                weak_type_check(&f, &ratio(rng.gen_range(1..=60), 10))?
            }
            Backend::Float => {
                let f = random::step_f64(&mut rng, k, 6);
                weak_type_check(&f, &rng.gen_range(0.05..5.0))?
            }
        };
        summary.record(report);
    }
    Ok(summary)
}

/// The level-set identity on `count` random radially decreasing functions,
/// each at `levels` random levels drawn inside the hypotheses.
pub fn lemma_sweep(count: usize, levels: usize, seed: u64) -> Result<SweepSummary> {
    let mut rng = stream_rng(seed, 2);
    let mut summary = SweepSummary::new("lemma", seed);
    for _ in 0..count {
        let k = rng.gen_range(1..=5);
        let f = random::radial_decreasing_exact(&mut rng, k, 8, 40);
        let top = f.max_abs();
        let floor = f.ray(0).values().last().cloned().expect("nonempty");
        let mf = MaximalFunction::new(&f);
        let mut found = 0;
        for _ in 0..levels * 50 {
            if found == levels {
                break;
            }
            // levels are multiples of 1/64 in [floor, top)
            let s = floor.clone() + (top.clone() - floor.clone()) * ratio(rng.gen_range(0..64), 64);
            if mf.level_measure(&s)? >= ratio(1, 1) {
                continue;
            }
            found += 1;
            summary.record(lemma_aux_check(&f, &s)?);
        }
    }
    Ok(summary)
}

/// `‖Mf‖_p/‖f‖_p ≤ C_{p,k}` on `count` random float step functions for every
/// `(k, p)` pair.
pub fn operator_sweep(count: usize, ks: &[usize], ps: &[f64], seed: u64) -> Result<SweepSummary> {
    let mut summary = SweepSummary::new("operator", seed);
    let pairs: Vec<(usize, f64)> = ks
        .iter()
        .flat_map(|&k| ps.iter().map(move |&p| (k, p)))
        .collect();
    let batches: Vec<Result<Vec<InequalityReport>>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, &(k, p))| {
            let mut rng = stream_rng(seed, 0x100 + i as u64);
            (0..count)
                .map(|_| {
                    let f = random::step_f64(&mut rng, k, 6);
                    if f.max_abs() == 0.0 {
                        return lp_chain_check(&crate::domain::StepFunction::constant(k, 1.0), p);
                    }
                    lp_chain_check(&f, p)
                })
                .collect()
        })
        .collect();
    for batch in batches {
        for r in batch? {
            summary.record(r);
        }
    }
    Ok(summary)
}

/// Options for [`tail_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct TailSweepConfig {
    /// Atom counts `1..=max_atoms`.
    pub max_atoms: usize,
    /// Chain counts `1..=max_k`.
    pub max_k: usize,
    pub max_chain_len: usize,
    /// Instances per union; probabilities are random multiples of 1/10 and
    /// values random integers in `[-max_value, max_value]`.
    pub per_union: usize,
    pub max_value: i64,
    /// Exponents for the `‖M_Gξ‖_p ≤ C_{p,k}‖ξ‖_p` check.
    pub ps: Vec<f64>,
    /// `None` visits every union; `Some(n)` draws `n` unions at random per
    /// `(atoms, k)`.
    pub unions: Option<usize>,
    pub seed: u64,
}

impl Default for TailSweepConfig {
    fn default() -> Self {
        Self {
            max_atoms: 4,
            max_k: 3,
            max_chain_len: 2,
            per_union: 50,
            max_value: 3,
            ps: vec![1.5, 2.0, 3.0],
            unions: None,
            seed: 0,
        }
    }
}

/// Result of [`tail_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSweepSummary {
    pub seed: u64,
    pub unions: usize,
    pub instances: usize,
    pub tail_failures: usize,
    /// Smallest tail slack, exact.
    pub min_tail_slack: String,
    pub min_tail_instance: Option<String>,
    /// Instances with `‖M_Gξ‖_p > (C_{p,k} + 1e-9)‖ξ‖_p`, over all `p`.
    pub doob_failures: usize,
    /// Largest `‖M_Gξ‖_p/‖ξ‖_p − C_{p,k}`.
    pub max_doob_excess: f64,
    pub failing_instances: Vec<String>,
}

impl TailSweepSummary {
    pub fn ok(&self) -> bool {
        self.tail_failures == 0 && self.doob_failures == 0
    }
}

#[derive(Default)]
struct UnionOutcome {
    instances: usize,
    tail_failures: usize,
    min_slack: Option<(Rational, String)>,
    doob_failures: usize,
    max_doob_excess: f64,
    failing: Vec<String>,
}

fn run_union(
    oracle: &mut TailOracle<Rational>,
    g: &FiltrationUnion,
    cfg: &TailSweepConfig,
    consts: &[(f64, f64)],
    rng: &mut ChaCha8Rng,
) -> Result<UnionOutcome> {
    let n = g.atoms();
    let mut out = UnionOutcome {
        max_doob_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    for _ in 0..cfg.per_union {
        let probs = random::composition(rng, n, 10)
            .into_iter()
            .map(|w| ratio(w as i64, 10))
            .collect();
        let space = FiniteProbSpace::new(probs)?;
        let xi = Rv::new(
            (0..n)
                .map(|_| ratio(rng.gen_range(-cfg.max_value..=cfg.max_value), 1))
                .collect(),
        )?;
        let m = doob_maximal(&space, &xi, g, false)?;
        let report = oracle.verify_maximal(&space, &xi, g.k(), &m)?;
        out.instances += 1;
        let describe = || {
            serde_json::json!({
                "probs": space.probs().iter().map(Scalar::to_json).collect::<Vec<_>>(),
                "values": xi.values().iter().map(Scalar::to_json).collect::<Vec<_>>(),
                "chains": g.to_json(),
            })
            .to_string()
        };
        if out
            .min_slack
            .as_ref()
            .map_or(true, |(s, _)| report.slack < *s)
        {
            out.min_slack = Some((report.slack.clone(), describe()));
        }
        let mut failed = !report.ok;
        if !report.ok {
            out.tail_failures += 1;
        }
        let fspace = space.to_f64();
        let (fxi, fm) = (xi.to_f64(), m.to_f64());
        for &(p, c) in consts {
            let denom = fxi.lp_norm(&fspace, p);
            if denom == 0.0 {
                continue;
            }
            let excess = fm.lp_norm(&fspace, p) / denom - c;
            out.max_doob_excess = out.max_doob_excess.max(excess);
            if excess > 1e-9 {
                out.doob_failures += 1;
                failed = true;
            }
        }
        if failed && out.failing.len() < KEEP_FAILURES {
            out.failing.push(describe());
        }
    }
    Ok(out)
}

/// The tail inequality `P(M_Gξ ≥ a) ≤ λ_k(Mξ* ≥ a)` in exact arithmetic,
/// together with the Doob bound `‖M_Gξ‖_p ≤ C_{p,k}‖ξ‖_p`, over unions of
/// `k` chains on small atom sets. Results do not depend on the thread count.
pub fn tail_sweep(cfg: &TailSweepConfig) -> Result<TailSweepSummary> {
    if cfg.max_atoms > MAX_ENUMERATION_ATOMS.min(10) {
        return Err(crate::Error::SizeGuard(format!(
            "{} atoms exceeds the enumeration limit of {}",
            cfg.max_atoms,
            MAX_ENUMERATION_ATOMS.min(10)
        )));
    }
    let mut summary = TailSweepSummary {
        seed: cfg.seed,
        unions: 0,
        instances: 0,
        tail_failures: 0,
        min_tail_slack: "0".into(),
        min_tail_instance: None,
        doob_failures: 0,
        max_doob_excess: f64::NEG_INFINITY,
        failing_instances: Vec::new(),
    };
    let mut min_slack: Option<Rational> = None;
    for n in 1..=cfg.max_atoms {
        for k in 1..=cfg.max_k {
            let consts: Vec<(f64, f64)> = cfg
                .ps
                .iter()
                .map(|&p| Ok((p, solve_cpk(p, k, DEFAULT_TOL)?.value)))
                .collect::<Result<_>>()?;
            let unions: Vec<FiltrationUnion> = match cfg.unions {
                None => enumerate_unions(n, k, cfg.max_chain_len)?.collect(),
                Some(count) => {
                    let chains = enumerate_chains(n, cfg.max_chain_len)?;
                    let mut rng = stream_rng(cfg.seed, (1 << 62) | ((n as u64) << 8) | k as u64);
                    (0..count)
                        .map(|_| {
                            let picked = (0..k)
                                .map(|_| chains[rng.gen_range(0..chains.len())].clone())
                                .collect();
                            FiltrationUnion::new(picked)
                        })
                        .collect::<Result<_>>()?
                }
            };
            let outcomes: Vec<Result<UnionOutcome>> = unions
                .par_iter()
                .enumerate()
                .map_init(TailOracle::new, |oracle, (idx, g)| {
                    let stream = ((n as u64) << 56) | ((k as u64) << 48) | idx as u64;
                    run_union(oracle, g, cfg, &consts, &mut stream_rng(cfg.seed, stream))
                })
                .collect();
            summary.unions += unions.len();
            for o in outcomes {
                let o = o?;
                summary.instances += o.instances;
                summary.tail_failures += o.tail_failures;
                summary.doob_failures += o.doob_failures;
                summary.max_doob_excess = summary.max_doob_excess.max(o.max_doob_excess);
                if let Some((s, inst)) = o.min_slack {
                    if min_slack.as_ref().map_or(true, |m| s < *m) {
                        summary.min_tail_slack = s.to_string();
                        summary.min_tail_instance = Some(inst);
                        min_slack = Some(s);
                    }
                }
                for f in o.failing {
                    if summary.failing_instances.len() < KEEP_FAILURES {
                        summary.failing_instances.push(f);
                    }
                }
            }
        }
    }
    Ok(summary)
}

/// Doob's inequalities on `count` random instances with `atoms` atoms and
/// unions of `1..=max_k` random chains of length at most 3: the weak-type
/// bound `∫_{max_i |E(ξ|G_i)| ≥ a} (a − |ξ|) dP ≤ 0` per chain (exact) and
/// `‖M_Gξ‖_p ≤ C_{p,k}‖ξ‖_p` for each `p`. Probabilities are multiples of 1/20.
pub fn doob_sweep(
    count: usize,
    atoms: usize,
    max_k: usize,
    ps: &[f64],
    seed: u64,
) -> Result<SweepSummary> {
    if atoms > MAX_ENUMERATION_ATOMS {
        return Err(crate::Error::SizeGuard(format!(
            "{atoms} atoms exceeds the enumeration limit of {MAX_ENUMERATION_ATOMS}"
        )));
    }
    if atoms == 0 || max_k == 0 {
        return Err(crate::Error::InvalidParameter(
            "atoms and k must be at least 1".into(),
        ));
    }
    let chains = enumerate_chains(atoms, 3)?;
    let mut rng = stream_rng(seed, 4);
    let mut summary = SweepSummary::new("doob", seed);
    for _ in 0..count {
        let k = rng.gen_range(1..=max_k);
        let g = FiltrationUnion::new(
            (0..k)
                .map(|_| chains[rng.gen_range(0..chains.len())].clone())
                .collect(),
        )?;
        let probs = random::composition(&mut rng, atoms, 20)
            .into_iter()
            .map(|w| ratio(w as i64, 20))
            .collect();
        let space = FiniteProbSpace::new(probs)?;
        let xi = Rv::new(
            (0..atoms)
                .map(|_| ratio(rng.gen_range(-6..=6), 1))
                .collect(),
        )?;
        let instance = serde_json::json!({
            "probs": space.probs().iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "values": xi.values().iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "chains": g.to_json(),
        })
        .to_string();
        for chain in g.chains() {
            let excess = chain_weak_type_excess(&space, &xi, chain)?;
            summary.record(InequalityReport::compare(
                "doob_weak_type",
                instance.clone(),
                excess,
                Rational::from_integer(0.into()),
                super::Relation::Le,
            ));
        }
        let m = doob_maximal(&space, &xi, &g, false)?.to_f64();
        let (fspace, fxi) = (space.to_f64(), xi.to_f64());
        for &p in ps {
            let denom = fxi.lp_norm(&fspace, p);
            if denom == 0.0 {
                continue;
            }
            let c = solve_cpk(p, k, DEFAULT_TOL)?.value;
            let ratio = m.lp_norm(&fspace, p) / denom;
            summary.record(InequalityReport::compare(
                "doob_lp",
                format!("{instance} p={p}"),
                ratio,
                c,
                super::Relation::Le,
            ));
        }
    }
    Ok(summary)
}

/// Result of [`covering_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringSummary {
    pub seed: u64,
    pub families: usize,
    pub balls: usize,
    pub selected: usize,
    pub union_failures: usize,
    pub multiplicity_failures: usize,
    pub parity_failures: usize,
    /// Largest `multiplicity − k`.
    pub max_multiplicity_excess: i64,
}

impl CoveringSummary {
    pub fn ok(&self) -> bool {
        self.union_failures == 0 && self.multiplicity_failures == 0 && self.parity_failures == 0
    }
}

/// Runs the selection on `count` random containment-filtered families with
/// `k` in `2..=4` and at most 30 balls.
pub fn covering_sweep(count: usize, seed: u64) -> Result<CoveringSummary> {
    let mut rng = stream_rng(seed, 3);
    let mut s = CoveringSummary {
        seed,
        families: 0,
        balls: 0,
        selected: 0,
        union_failures: 0,
        multiplicity_failures: 0,
        parity_failures: 0,
        max_multiplicity_excess: i64::MIN,
    };
    for _ in 0..count {
        let k = rng.gen_range(2..=4);
        let balls = random::ball_family(&mut rng, k, 30, 40);
        let res = select(&balls, k)?;
        let (mult, _) = multiplicity_audit(&res.selected, k);
        s.families += 1;
        s.balls += balls.len();
        s.selected += res.selected.len();
        s.union_failures += usize::from(!union_preserved(&balls, &res.selected, k));
        s.multiplicity_failures += usize::from(mult > k);
        s.parity_failures += usize::from(!parity_disjoint(&balls, &res));
        s.max_multiplicity_excess = s.max_multiplicity_excess.max(mult as i64 - k as i64);
    }
    Ok(s)
}
