//! `spider`: maximal functions, rearrangements, filtration experiments and
//! covering selection on the spider domain.
//!
//! Exit codes: 0 success, 1 a verification or audit failed, 2 bad usage or input.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use spider_core::constants::{solve_cpk, solve_lambda, SharpConstant, DEFAULT_TOL};
use spider_core::covering::{
    filter_containment, multiplicity_audit, parity_disjoint, select, union_preserved,
};
use spider_core::domain::{Ball, BallSpec, SpiderPoint, StepFunction};
use spider_core::filtration::Instance;
use spider_core::maximal::{compute, operator_ratio, MaximalFunction};
use spider_core::rearrangement::rearrange;
use spider_core::verifier::{
    covering_sweep, doob_sweep, lemma_sweep, operator_sweep, sharpness_sweep, tail_sweep,
    weak_type_sweep, SweepSummary, TailSweepConfig,
};
use spider_core::{Backend, Rational, Scalar};

#[derive(Parser)]
#[command(
    name = "spider",
    version,
    about = "Maximal operators and Doob-type inequalities on spider domains"
)]
struct Cli {
    /// Seed for every random choice; falls back to SPIDER_SEED, then 0.
    #[arg(long, global = true, env = "SPIDER_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Exact,
    Float,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Float => Backend::Float,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve for C_{p,k} (with --p) or λ_{r,k} (with --r).
    #[command(group(ArgGroup::new("param").required(true).args(["p", "r"])))]
    Constants {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Maximal function of a step function file: a point value or the full envelope.
    Maxop {
        file: PathBuf,
        /// Ray of the evaluation point (1-based).
        #[arg(long, requires = "pos")]
        ray: Option<usize>,
        /// Distance of the evaluation point from the hub, e.g. 0.25 or 1/3.
        #[arg(long, requires = "ray")]
        pos: Option<String>,
        /// Also report ‖Mf‖_p/‖f‖_p.
        #[arg(long, conflicts_with = "ray")]
        p: Option<f64>,
        #[arg(long, value_enum, default_value = "exact")]
        backend: BackendArg,
    },
    /// k-decreasing rearrangement of the random variable in an instance file.
    Rearrange {
        file: PathBuf,
        /// Number of rays; defaults to the number of chains in the instance.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "exact")]
        backend: BackendArg,
    },
    /// Run a randomized or exhaustive verification suite.
    Verify(VerifyArgs),
    /// Operator ratio of truncated power functions along a list of exponents (CSV).
    Sharpness {
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long = "r-list", value_delimiter = ',', default_values_t = vec![0.40, 0.45, 0.49])]
        r_list: Vec<f64>,
        /// Grid points per ray.
        #[arg(long, default_value_t = 2000)]
        points: usize,
        /// Innermost grid point.
        #[arg(long, default_value_t = 1e-100)]
        lower: f64,
    },
    /// Select a low-overlap subfamily from a ball file and audit it.
    Covering {
        file: PathBuf,
        /// Drop balls contained in others before selecting.
        #[arg(long)]
        filter: bool,
        #[arg(long, value_enum, default_value = "exact")]
        backend: BackendArg,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Lemma,
    Weaktype,
    Tail,
    Doob,
    Operator,
    Covering,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Number of random instances (unions for a non-exhaustive tail run).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Atoms of the probability space (tail and doob suites).
    #[arg(long, default_value_t = 4)]
    atoms: usize,
    /// Largest number of chains or rays.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Visit every union of chains instead of sampling (tail suite).
    #[arg(long)]
    exhaustive: bool,
    /// Random variables per union (tail suite).
    #[arg(long, default_value_t = 50)]
    per_union: usize,
    /// Levels per function (lemma suite).
    #[arg(long, default_value_t = 10)]
    levels: usize,
}

enum Failure {
    Usage(String),
    Verification,
}

impl From<spider_core::Error> for Failure {
    fn from(e: spider_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Constants { p, r, k, tol } => constants(*p, *r, *k, *tol),
        Command::Maxop {
            file,
            ray,
            pos,
            p,
            backend,
        } => match backend {
            BackendArg::Exact => maxop::<Rational>(file, *ray, pos.as_deref(), *p),
            BackendArg::Float => maxop::<f64>(file, *ray, pos.as_deref(), *p),
        },
        Command::Rearrange { file, k, backend } => match backend {
            BackendArg::Exact => rearrange_cmd::<Rational>(file, *k),
            BackendArg::Float => rearrange_cmd::<f64>(file, *k),
        },
        Command::Verify(args) => verify(args, cli.seed),
        Command::Sharpness {
            p,
            k,
            r_list,
            points,
            lower,
        } => sharpness(*p, *k, r_list, *points, *lower),
        Command::Covering {
            file,
            filter,
            backend,
        } => match backend {
            BackendArg::Exact => covering::<Rational>(file, *filter),
            BackendArg::Float => covering::<f64>(file, *filter),
        },
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string(v).expect("values serialize"));
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn constant_json(c: &SharpConstant, name: &str) -> Value {
    json!({
        name: c.param,
        "k": c.k,
        "value": c.value,
        "residual": c.residual,
        "bracket": [c.bracket.0, c.bracket.1],
        "tol": c.tol,
    })
}

fn constants(p: Option<f64>, r: Option<f64>, k: usize, tol: f64) -> CliResult {
    let out = match (p, r) {
        (Some(p), None) => constant_json(&solve_cpk(p, k, tol)?, "p"),
        (None, Some(r)) => constant_json(&solve_lambda(r, k, tol)?, "r"),
        _ => return Err(Failure::Usage("give exactly one of --p and --r".into())),
    };
    print_json(&out);
    Ok(())
}

fn maxop<S: Scalar>(
    file: &Path,
    ray: Option<usize>,
    pos: Option<&str>,
    p: Option<f64>,
) -> CliResult {
    let f = StepFunction::<S>::from_json(&read_json(file)?)?;
    if let (Some(ray), Some(pos)) = (ray, pos) {
        if ray == 0 || ray > f.k() {
            return Err(Failure::Usage(format!(
                "ray {ray} out of range 1..={}",
                f.k()
            )));
        }
        let x = SpiderPoint::new(
            ray - 1,
            S::from_json(&Value::String(pos.to_string()))?,
            f.k(),
        )?;
        let value = MaximalFunction::new(&f).value_at(&x);
        print_json(&json!({ "ray": ray, "pos": x.pos.to_json(), "value": value.to_json() }));
        return Ok(());
    }
    let envelope = compute(&f);
    let mut out = json!({
        "k": f.k(),
        "pieces": envelope.piece_count(),
        "function": envelope.to_json(),
    });
    if let Some(p) = p {
        out["p"] = json!(p);
        out["ratio"] = json!(operator_ratio(&f, p)?);
    }
    print_json(&out);
    Ok(())
}

fn rearrange_cmd<S: Scalar>(file: &Path, k: Option<usize>) -> CliResult {
    let inst = Instance::<S>::from_json(&read_json(file)?)?;
    let k = k.unwrap_or(inst.union.k());
    print_json(&rearrange(&inst.space, &inst.xi, k)?.to_json());
    Ok(())
}

/// Prints failing reports as JSON lines followed by the summary line.
fn emit_summary(s: &SweepSummary) -> CliResult {
    for r in &s.failing {
        println!("{}", r.to_json_line());
    }
    let mut v = serde_json::to_value(s).expect("summaries serialize");
    if let Value::Object(m) = &mut v {
        m.remove("failing");
        m.insert("ok".into(), json!(s.ok()));
    }
    print_json(&v);
    if s.ok() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn verify(a: &VerifyArgs, seed: u64) -> CliResult {
    let need = |allowed: &[BackendArg], default: BackendArg| -> Result<BackendArg, Failure> {
        let b = a.backend.unwrap_or(default);
        if allowed.contains(&b) {
            Ok(b)
        } else {
            Err(Failure::Usage(
                "this suite does not support the requested backend".into(),
            ))
        }
    };
    match a.suite {
        Suite::Lemma => {
            need(&[BackendArg::Exact], BackendArg::Exact)?;
            emit_summary(&lemma_sweep(a.count.unwrap_or(200), a.levels, seed)?)
        }
        Suite::Weaktype => {
            let b = need(&[BackendArg::Exact, BackendArg::Float], BackendArg::Exact)?;
            emit_summary(&weak_type_sweep(a.count.unwrap_or(1000), seed, b.into())?)
        }
        Suite::Operator => {
            need(&[BackendArg::Float], BackendArg::Float)?;
            let ks: Vec<usize> = (1..=a.k).collect();
            emit_summary(&operator_sweep(
                a.count.unwrap_or(1000),
                &ks,
                &[1.5, 2.0, 3.0],
                seed,
            )?)
        }
        Suite::Doob => {
            need(&[BackendArg::Exact], BackendArg::Exact)?;
            emit_summary(&doob_sweep(
                a.count.unwrap_or(1000),
                a.atoms,
                a.k,
                &[1.5, 2.0, 3.0],
                seed,
            )?)
        }
        Suite::Tail => {
            need(&[BackendArg::Exact], BackendArg::Exact)?;
            let cfg = TailSweepConfig {
                max_atoms: a.atoms,
                max_k: a.k,
                per_union: a.per_union,
                unions: if a.exhaustive {
                    None
                } else {
                    Some(a.count.unwrap_or(20))
                },
                seed,
                ..TailSweepConfig::default()
            };
            let s = tail_sweep(&cfg)?;
            for inst in &s.failing_instances {
                println!("{inst}");
            }
            let mut v = serde_json::to_value(&s).expect("summaries serialize");
            if let Value::Object(m) = &mut v {
                m.remove("failing_instances");
                m.insert("suite".into(), json!("tail"));
                m.insert("exhaustive".into(), json!(a.exhaustive));
                m.insert("ok".into(), json!(s.ok()));
            }
            print_json(&v);
            if s.ok() {
                Ok(())
            } else {
                Err(Failure::Verification)
            }
        }
        Suite::Covering => {
            need(&[BackendArg::Exact], BackendArg::Exact)?;
            let s = covering_sweep(a.count.unwrap_or(1000), seed)?;
            let mut v = serde_json::to_value(&s).expect("summaries serialize");
            if let Value::Object(m) = &mut v {
                m.insert("suite".into(), json!("covering"));
                m.insert("ok".into(), json!(s.ok()));
            }
            print_json(&v);
            if s.ok() {
                Ok(())
            } else {
                Err(Failure::Verification)
            }
        }
    }
}

fn sharpness(p: f64, k: usize, r_list: &[f64], points: usize, lower: f64) -> CliResult {
    let rows = sharpness_sweep(p, k, r_list, points, lower)?;
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    for row in &rows {
        w.serialize(row)
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    w.flush().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(())
}

#[derive(Deserialize)]
struct BallFile {
    k: usize,
    balls: Vec<BallSpec>,
}

fn covering<S: Scalar>(file: &Path, filter: bool) -> CliResult {
    let spec: BallFile = serde_json::from_value(read_json(file)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
    let k = spec.k;
    let mut balls: Vec<Ball<S>> = spec
        .balls
        .iter()
        .map(|b| b.to_ball(k))
        .collect::<Result<_, _>>()?;
    if filter {
        balls = filter_containment(&balls, k);
    }
    let res = select(&balls, k)?;
    let (mult, witness) = multiplicity_audit(&res.selected, k);
    let bound = if k == 1 { 2 } else { k };
    let union_ok = union_preserved(&balls, &res.selected, k);
    let parity_ok = parity_disjoint(&balls, &res);
    let sequences: Vec<Value> = res
        .per_ray_sequences
        .iter()
        .map(|s| {
            json!({
                "ray": s.ray + 1,
                "j0": s.j0.map(|i| i + 1),
                "rest": s.rest.iter().map(|i| i + 1).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut out = Map::new();
    out.insert("k".into(), json!(k));
    out.insert("balls".into(), json!(balls.len()));
    out.insert(
        "selected_indices".into(),
        json!(res
            .selected_indices
            .iter()
            .map(|i| i + 1)
            .collect::<Vec<_>>()),
    );
    out.insert(
        "selected".into(),
        serde_json::to_value(
            res.selected
                .iter()
                .map(BallSpec::from_ball)
                .collect::<Vec<_>>(),
        )
        .expect("serializes"),
    );
    out.insert("sequences".into(), Value::Array(sequences));
    out.insert(
        "removed".into(),
        json!(res.removed.iter().map(|i| i + 1).collect::<Vec<_>>()),
    );
    out.insert("multiplicity".into(), json!(mult));
    out.insert("multiplicity_bound".into(), json!(bound));
    out.insert(
        "witness".into(),
        json!({ "ray": witness.ray + 1, "pos": witness.pos.to_json() }),
    );
    out.insert("union_preserved".into(), json!(union_ok));
    out.insert("parity_disjoint".into(), json!(parity_ok));
    let ok = union_ok && parity_ok && mult <= bound;
    out.insert("ok".into(), json!(ok));
    print_json(&Value::Object(out));
    std::io::stdout().flush().ok();
    if ok {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}
