//! Command-line front end: scenario file I/O, focal/index/maslov queries,
//! transversal reduction, theorem verification and built-in scenario export.
//!
//! Exit codes: 0 success, 1 assertion or tolerance failure, 2 input error.

use clap::{Args, Parser, Subcommand};
use jacobi_index::{
    builtin, check_decomposition, integrate, locate_focal_points, maslov_index, winding_index,
    CurvatureFamily, Error, IndexReport, IntegrationOptions, Interval, JacobiSubspace,
    LagrangianCurve, ScenarioFile, Tolerances, TransversalOptions, TransversalSystem,
};
use jacobi_index::scenario::index_explosion_experiment;
use jacobi_index::verify::{
    decomposition_trial, index_bound_trial, maslov_trial, verify_conjugate_monotonicity,
    verify_no_conjugate_focal_bound, verify_semicontinuity, verify_taylor_estimates,
    DecompositionReport, IndexBoundReport, MaslovReport, TrialConfig,
};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "jacobi-index",
    about = "Focal points, Maslov indices and transversal reduction for Y'' + R(t)Y = 0",
    version
)]
struct Cli {
    #[command(flatten)]
    tols: TolArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Tolerance overrides; defaults match the library.
#[derive(Args, Clone, Copy, Debug)]
struct TolArgs {
    #[arg(long = "tol-sympl", global = true)]
    sympl: Option<f64>,
    #[arg(long = "tol-step", global = true)]
    step: Option<f64>,
    #[arg(long = "tol-rank", global = true)]
    rank: Option<f64>,
    #[arg(long = "tol-iso", global = true)]
    iso: Option<f64>,
    #[arg(long = "tol-loc", global = true)]
    loc: Option<f64>,
    #[arg(long = "tol-frame", global = true)]
    frame: Option<f64>,
    #[arg(long = "tol-dense", global = true)]
    dense: Option<f64>,
}

impl TolArgs {
    fn apply(&self, mut tol: Tolerances) -> Tolerances {
        if let Some(v) = self.sympl {
            tol.sympl = v;
        }
        if let Some(v) = self.step {
            tol.step = v;
        }
        if let Some(v) = self.rank {
            tol.rank = v;
        }
        if let Some(v) = self.iso {
            tol.iso = v;
        }
        if let Some(v) = self.loc {
            tol.loc = v;
        }
        if let Some(v) = self.frame {
            tol.frame = v;
        }
        if let Some(v) = self.dense {
            tol.dense = v;
        }
        tol
    }
}

#[derive(Args, Clone, Debug)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Named subspace inside the scenario file.
    #[arg(long)]
    subspace: String,
    /// Closed interval [a, b].
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    interval: Vec<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Locate focal points of a subspace and print the index report.
    Focal {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Write the report as JSON here (stdout otherwise).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the event table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Interval index of a subspace (closed-interval semantics).
    Index {
        #[command(flatten)]
        args: ScenarioArgs,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Maslov-Arnold index with crossing data and winding cross-check.
    Maslov {
        #[command(flatten)]
        args: ScenarioArgs,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Transversal reduction with respect to an isotropic subspace; writes
    /// the reduced system as a scenario file.
    Transversal {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Output path of the reduced scenario JSON.
        #[arg(long, default_value = "transversal.json")]
        out: PathBuf,
        /// Dump the horizontal frames as CSV.
        #[arg(long)]
        frames_csv: Option<PathBuf>,
        /// Dump the O'Neill operator samples as CSV.
        #[arg(long)]
        oneill_csv: Option<PathBuf>,
        /// Also verify ind_W + ind_{Lambda/W} = ind_Lambda for this
        /// Lagrangian from the scenario file.
        #[arg(long, requires = "lagrangian")]
        check_decomposition: bool,
        #[arg(long)]
        lagrangian: Option<String>,
    },
    /// Theorem verification harness.
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
        /// Trial parallelism (defaults to the machine parallelism).
        #[arg(long, global = true)]
        jobs: Option<usize>,
    },
    /// Write a built-in scenario as JSON.
    SampleScenario {
        /// One of: sphere, flat, hyperbolic, quarter, hopf.
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "scenario.json")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Index-difference bound between random Lagrangians.
    Bound {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Index decomposition on random (W, Lambda) pairs.
    Decomposition {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Maslov = winding = interval index on random Lagrangians.
    Maslov {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Semi-continuity / continuity under scaled perturbations of a
    /// scenario family.
    Semicontinuity {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        subspace: String,
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        interval: Vec<f64>,
        /// Perturbation scales, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6")]
        deltas: Vec<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Conjugate-point monotonicity for a scenario family.
    ConjugateMonotonic {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        /// Earlier anchors, comma separated.
        #[arg(long, value_delimiter = ',')]
        abars: Vec<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Focal bound and parallel-limit Lagrangian for a conjugate-free
    /// scenario family.
    NoConjugateBound {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        interval: Vec<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Short-time Taylor and near-orthogonality estimates.
    Estimates {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Index-explosion experiment in constant curvature.
    Explosion {
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0.4)]
        delta: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Failures that map to exit code 2 (bad input) rather than 1.
fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidScenario(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::OutOfDomain { .. }
            | Error::EmptyInterval { .. }
            | Error::DimensionMismatch { .. }
            | Error::NegativeBound(_)
    )
}

fn default_seed(seed: Option<u64>) -> u64 {
    seed.or_else(|| {
        std::env::var("JACOBI_INDEX_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

fn emit<T: serde::Serialize>(value: &T, json: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    match json {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_interval(pair: &[f64]) -> Result<Interval, Error> {
    if pair.len() != 2 {
        return Err(Error::InvalidScenario(
            "--interval expects two values".into(),
        ));
    }
    Interval::new(pair[0], pair[1])
}

struct Loaded {
    family: CurvatureFamily,
    subspace: JacobiSubspace,
    interval: Interval,
    tol: Tolerances,
}

fn load(args: &ScenarioArgs, tols: &TolArgs) -> Result<Loaded, Error> {
    let file = ScenarioFile::load(&args.scenario)?;
    let tol = tols.apply(file.tolerances.unwrap_or_default());
    let family = file.family()?;
    let subspace = file.subspace(&args.subspace, &tol)?;
    let interval = parse_interval(&args.interval)?;
    Ok(Loaded {
        family,
        subspace,
        interval,
        tol,
    })
}

fn solve(l: &Loaded) -> Result<jacobi_index::FundamentalSolution, Error> {
    let opts = IntegrationOptions::with_tolerances(l.tol);
    integrate(&l.family, l.subspace.anchor(), l.interval, &opts)
}

fn write_event_csv(report: &IndexReport, path: &Path) -> Result<(), Error> {
    let mut out = String::from("time,multiplicity,localization_radius\n");
    for e in &report.events {
        out.push_str(&format!(
            "{:.17},{},{:.3e}\n",
            e.time, e.multiplicity, e.localization_radius
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_frames_csv(system: &TransversalSystem, path: &Path) -> Result<(), Error> {
    let mut out = String::from("t,block,row,col,value\n");
    for (i, &t) in system.times().iter().enumerate() {
        for (label, mat) in [
            ("wtilde", &system.wtilde_frames()[i]),
            ("horizontal", &system.horizontal_frames()[i]),
        ] {
            for r in 0..mat.nrows() {
                for c in 0..mat.ncols() {
                    out.push_str(&format!("{t:.12},{label},{r},{c},{:.17}\n", mat[(r, c)]));
                }
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_oneill_csv(system: &TransversalSystem, path: &Path) -> Result<(), Error> {
    let mut out = String::from("t,row,col,value\n");
    for (i, &t) in system.times().iter().enumerate() {
        let a = &system.oneill_matrices()[i];
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                out.push_str(&format!("{t:.12},{r},{c},{:.17}\n", a[(r, c)]));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

fn run_trials<R: Send>(
    trials: usize,
    jobs: Option<usize>,
    f: impl Fn(u64) -> Result<R, Error> + Sync,
) -> Result<Vec<R>, Error> {
    use rayon::prelude::*;
    with_pool(jobs, || {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| f(t))
            .collect::<Result<Vec<R>, Error>>()
    })
}

/// Run a command; Ok(true) means every assertion held.
fn run(cli: Cli) -> Result<bool, Error> {
    let base_tol = Tolerances::default();
    match cli.cmd {
        Cmd::Focal { args, json, csv } | Cmd::Index { args, json, csv } => {
            let l = load(&args, &cli.tols)?;
            let sol = solve(&l)?;
            let report = locate_focal_points(&l.subspace, &sol, l.interval, &l.tol)?;
            if let Some(path) = csv {
                write_event_csv(&report, &path)?;
            }
            emit(&report, json.as_deref())?;
            Ok(true)
        }
        Cmd::Maslov { args, json } => {
            let l = load(&args, &cli.tols)?;
            let sol = solve(&l)?;
            let curve = LagrangianCurve::new(&l.subspace, &sol)?;
            let maslov = maslov_index(&curve, l.interval, &l.tol)?;
            let winding = winding_index(&curve, l.interval, &l.tol)?;
            let crossings = jacobi_index::crossings(&curve, l.interval, &l.tol)?;
            #[derive(serde::Serialize)]
            struct MaslovOutput {
                maslov_index: i64,
                winding_index: i64,
                crossings: Vec<jacobi_index::CrossingReport>,
            }
            emit(
                &MaslovOutput {
                    maslov_index: maslov,
                    winding_index: winding,
                    crossings,
                },
                json.as_deref(),
            )?;
            Ok(maslov == winding)
        }
        Cmd::Transversal {
            args,
            out,
            frames_csv,
            oneill_csv,
            check_decomposition: check,
            lagrangian,
        } => {
            let file = ScenarioFile::load(&args.scenario)?;
            let tol = cli.tols.apply(file.tolerances.unwrap_or_default());
            let family = file.family()?;
            let w = file.subspace(&args.subspace, &tol)?;
            let interval = parse_interval(&args.interval)?;
            let opts = IntegrationOptions::with_tolerances(tol);
            let sol = integrate(&family, w.anchor(), interval, &opts)?;
            let system =
                TransversalSystem::build(&w, &sol, interval, &tol, &TransversalOptions::default())?;
            let reduced = ScenarioFile::from_parts(
                system.reduced_family(),
                &[(
                    "lambda0".to_string(),
                    JacobiSubspace::lambda_at(system.reduced_family().dim(), interval.lo),
                )],
                Some(tol),
            );
            reduced.save(&out)?;
            if let Some(path) = frames_csv {
                write_frames_csv(&system, &path)?;
            }
            if let Some(path) = oneill_csv {
                write_oneill_csv(&system, &path)?;
            }
            eprintln!(
                "reduced system: dim {} over [{}, {}], frame residual {:.3e}, written to {}",
                system.reduced_family().dim(),
                interval.lo,
                interval.hi,
                system.frame_residual(),
                out.display()
            );
            if check {
                let name = lagrangian.expect("clap enforces --lagrangian");
                let lam = file.subspace(&name, &tol)?;
                let result = check_decomposition(&w, &lam, &sol, interval, &tol)?;
                emit(&result, None)?;
                return Ok(result.equal);
            }
            Ok(true)
        }
        Cmd::Verify { cmd, jobs } => run_verify(cmd, jobs, &cli.tols, base_tol),
        Cmd::SampleScenario { name, out } => {
            let sc = builtin(&name)?;
            ScenarioFile::from_scenario(&sc).save(&out)?;
            eprintln!("wrote scenario '{}' to {}", sc.name, out.display());
            Ok(true)
        }
    }
}

fn run_verify(
    cmd: VerifyCmd,
    jobs: Option<usize>,
    tols: &TolArgs,
    base: Tolerances,
) -> Result<bool, Error> {
    let tol = tols.apply(base);
    match cmd {
        VerifyCmd::Bound {
            trials,
            dim,
            seed,
            json,
        } => {
            let cfg = TrialConfig::new(trials, dim, default_seed(seed));
            let rows = run_trials(trials, jobs, |t| index_bound_trial(&cfg, t, &tol))?;
            let mut dist = std::collections::BTreeMap::new();
            let mut violations = Vec::new();
            for row in rows {
                *dist.entry(row.slack).or_insert(0usize) += 1;
                if !row.ok {
                    violations.push(row);
                }
            }
            let ok = violations.is_empty();
            let report = IndexBoundReport {
                config: cfg,
                config_hash: String::new(),
                tolerances: tol,
                trials,
                violations,
                slack_distribution: dist.into_iter().collect(),
                ok,
            };
            emit(&report, json.as_deref())?;
            Ok(report.ok)
        }
        VerifyCmd::Decomposition {
            trials,
            dim,
            seed,
            json,
        } => {
            let cfg = TrialConfig::new(trials, dim, default_seed(seed));
            let rows = run_trials(trials, jobs, |t| decomposition_trial(&cfg, t, &tol))?;
            let violations = rows.iter().filter(|r| !r.equal).count();
            let report = DecompositionReport {
                config: cfg,
                config_hash: String::new(),
                tolerances: tol,
                trials,
                rows,
                violations,
                ok: violations == 0,
            };
            emit(&report, json.as_deref())?;
            Ok(report.ok)
        }
        VerifyCmd::Maslov {
            trials,
            dim,
            seed,
            json,
        } => {
            let cfg = TrialConfig::new(trials, dim, default_seed(seed));
            let rows = run_trials(trials, jobs, |t| maslov_trial(&cfg, t, &tol))?;
            let violations = rows.iter().filter(|r| !r.ok).count();
            let report = MaslovReport {
                config: cfg,
                config_hash: String::new(),
                tolerances: tol,
                trials,
                rows,
                violations,
                ok: violations == 0,
            };
            emit(&report, json.as_deref())?;
            Ok(report.ok)
        }
        VerifyCmd::Semicontinuity {
            scenario,
            subspace,
            interval,
            deltas,
            json,
        } => {
            let file = ScenarioFile::load(&scenario)?;
            let tol = tols.apply(file.tolerances.unwrap_or(base));
            let family = file.family()?;
            let w = file.subspace(&subspace, &tol)?;
            let iv = parse_interval(&interval)?;
            let pert = CurvatureFamily::constant_scalar(
                family.dim(),
                1.0,
                family.domain(),
            )?;
            let report = verify_semicontinuity(&family, &w, &pert, &deltas, iv, &tol)?;
            emit(&report, json.as_deref())?;
            Ok(report.ok)
        }
        VerifyCmd::ConjugateMonotonic {
            scenario,
            a,
            b,
            abars,
            json,
        } => {
            let file = ScenarioFile::load(&scenario)?;
            let tol = tols.apply(file.tolerances.unwrap_or(base));
            let family = file.family()?;
            let report = verify_conjugate_monotonicity(&family, a, b, &abars, &tol)?;
            emit(&report, json.as_deref())?;
            Ok(report.ok)
        }
        VerifyCmd::NoConjugateBound {
            scenario,
            trials,
            seed,
            interval,
            json,
        } => {
            let file = ScenarioFile::load(&scenario)?;
            let tol = tols.apply(file.tolerances.unwrap_or(base));
            let family = file.family()?;
            let iv = parse_interval(&interval)?;
            let report = verify_no_conjugate_focal_bound(
                &family,
                trials,
                default_seed(seed),
                iv,
                &tol,
            )?;
            emit(&report, json.as_deref())?;
            Ok(report.ok)
        }
        VerifyCmd::Estimates {
            scenario,
            trials,
            seed,
            json,
        } => {
            let file = ScenarioFile::load(&scenario)?;
            let tol = tols.apply(file.tolerances.unwrap_or(base));
            let family = file.family()?;
            let report = verify_taylor_estimates(&family, trials, default_seed(seed), &tol)?;
            emit(&report, json.as_deref())?;
            Ok(report.ok)
        }
        VerifyCmd::Explosion { n, delta, json } => {
            let report = index_explosion_experiment(&n, delta, &tol)?;
            emit(&report, json.as_deref())?;
            let drop_ok = report.rows.iter().all(|r| r.ind_wn < r.ind_w);
            Ok(report.sup_norms_increasing && drop_ok)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("verification reported violations");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_input_error(&e) {
                2
            } else {
                1
            }
        }
    };
    std::process::exit(code);
}
