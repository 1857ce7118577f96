use std::fs;
use std::hash::{BuildHasher, RandomState};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tucker_core::bounds::{sthosvd_error_bound, thosvd_error_bound, BoundParams, BoundReport};
use tucker_core::io::{load_matrix, load_tensor, save_matrix, save_tensor};
use tucker_core::testbed::{run_experiment_on, summarize, ExperimentPlan, Recipe, RunReport};
use tucker_core::{
    relative_error, solve, Algorithm, Counters, DenseTensor, PowerSchedule, ShiftTrace, SketchFamily, SolverConfig,
    TuckerFactorization,
};

use crate::args::{BenchArgs, BoundArgs, Cli, Command, DecomposeArgs, GenArgs, InputArgs, IntList, RecipeKind};
use crate::error::{CliError, CliResult};

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Decompose(a) => cmd_decompose(&a).map(|_| ()),
        Command::Bench(a) => cmd_bench(&a),
        Command::Bound(a) => cmd_bound(&a).map(|_| ()),
    }
}

fn emit(text: &str) -> CliResult<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn build_tensor(recipe: &Recipe, seed: u64) -> CliResult<DenseTensor> {
    recipe.build(seed).map_err(|e| match (recipe, e) {
        (Recipe::File { path }, tucker_core::TuckerError::Io(e)) => CliError::Io(format!("{}: {e}", path.display())),
        (_, e) => e.into(),
    })
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let seed = RandomState::new().hash_one(std::time::SystemTime::now());
        eprintln!("tucker: no --seed given, using --seed {seed}");
        seed
    })
}

pub fn recipe_from(input: &InputArgs) -> CliResult<Recipe> {
    let kind = match (&input.input, input.recipe) {
        (Some(path), None) => return Ok(Recipe::File { path: path.clone() }),
        (None, Some(kind)) => kind,
        _ => return Err(CliError::Config("give exactly one of --input and --recipe".into())),
    };
    Ok(match kind {
        RecipeKind::A => Recipe::A {
            n: input.n,
            n_terms_big: input.terms_big,
            gamma: input.weight,
            sparsity: input.sparsity,
        },
        RecipeKind::B => Recipe::B {
            n: input.n,
            decay: input.decay,
        },
        RecipeKind::C => {
            let dims = input.dims.clone().unwrap_or_else(InputArgs::desk_c_dims).0;
            let dims: [usize; 3] = dims
                .try_into()
                .map_err(|d: Vec<usize>| CliError::Config(format!("recipe c needs three dims, got {}", d.len())))?;
            Recipe::C { dims }
        }
        RecipeKind::Exact => {
            let (Some(dims), Some(ranks)) = (&input.dims, &input.true_ranks) else {
                return Err(CliError::Config("recipe exact needs --dims and --true-ranks".into()));
            };
            Recipe::Exact {
                dims: dims.0.clone(),
                ranks: ranks.0.clone(),
            }
        }
    })
}

fn broadcast(list: &IntList, d: usize, what: &str) -> CliResult<Vec<usize>> {
    match list.0.len() {
        1 => Ok(vec![list.0[0]; d]),
        n if n == d => Ok(list.0.clone()),
        n => Err(CliError::Config(format!("{what} has {n} entries for a tensor with {d} modes"))),
    }
}

fn zero_based(order: &IntList, d: usize) -> CliResult<Vec<usize>> {
    order
        .0
        .iter()
        .map(|&m| {
            if (1..=d).contains(&m) {
                Ok(m - 1)
            } else {
                Err(CliError::Config(format!("--order entry {m} outside 1..={d}")))
            }
        })
        .collect()
}

fn one_based(order: &[usize]) -> Vec<usize> {
    order.iter().map(|m| m + 1).collect()
}

struct SolverFlags<'a> {
    ranks: &'a IntList,
    oversample: &'a IntList,
    power: usize,
    order: Option<&'a IntList>,
    sketch: SketchFamily,
    pve_tol: Option<f64>,
    qmax: usize,
}

fn build_config(d: usize, algorithm: Option<Algorithm>, f: SolverFlags<'_>) -> CliResult<SolverConfig> {
    let mut cfg = SolverConfig::new(broadcast(f.ranks, d, "--ranks")?).with_sketch(f.sketch);
    cfg.oversampling = broadcast(f.oversample, d, "--oversample")?;
    cfg.power = match f.pve_tol {
        Some(tol) => PowerSchedule::Pve { tol, q_max: f.qmax },
        None if algorithm == Some(Algorithm::Pve) => PowerSchedule::Pve {
            tol: PowerSchedule::DEFAULT_PVE_TOL,
            q_max: f.qmax,
        },
        None => PowerSchedule::Fixed(f.power),
    };
    if let Some(order) = f.order {
        cfg = cfg.with_order(zero_based(order, d)?);
    }
    Ok(cfg)
}

fn cmd_gen(args: &GenArgs) -> CliResult<()> {
    let recipe = recipe_from(&args.input)?;
    if matches!(recipe, Recipe::File { .. }) {
        return Err(CliError::Config("gen needs --recipe".into()));
    }
    let seed = resolve_seed(args.seed);
    let t = build_tensor(&recipe, seed)?;
    save_tensor(&args.out, &t)?;
    eprintln!("tucker: wrote {recipe} {:?} to {}", t.dims(), args.out.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeSummary {
    pub algorithm: Algorithm,
    pub recipe: Recipe,
    pub tensor_seed: u64,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub s: Vec<usize>,
    pub q: PowerSchedule,
    /// Power iterations actually run, per mode.
    pub realized_q: Vec<usize>,
    /// 1-based processing order.
    pub order: Vec<usize>,
    pub sketch: SketchFamily,
    pub seed: u64,
    pub re: f64,
    pub seconds: f64,
    pub counters: Counters,
    pub shift_trace: ShiftTrace,
    pub config: SolverConfig,
    /// DTNS1 files relative to the summary: the core, then one factor per mode.
    pub files: Vec<String>,
}

impl DecomposeSummary {
    /// Reloads the factorization stored next to the summary file.
    pub fn load_factorization(&self, summary_path: &Path) -> CliResult<TuckerFactorization> {
        let dir = summary_path.parent().unwrap_or(Path::new("."));
        let (core, factors) = self
            .files
            .split_first()
            .ok_or_else(|| CliError::Io("summary lists no files".into()))?;
        let core = load_tensor(dir.join(core))?;
        let factors = factors.iter().map(|f| load_matrix(dir.join(f))).collect::<Result<Vec<_>, _>>()?;
        Ok(TuckerFactorization::new(core, factors)?)
    }
}

pub fn cmd_decompose(args: &DecomposeArgs) -> CliResult<DecomposeSummary> {
    let recipe = recipe_from(&args.input)?;
    let seed = resolve_seed(args.seed);
    let t = build_tensor(&recipe, seed)?;
    let cfg = build_config(
        t.order(),
        Some(args.algorithm),
        SolverFlags {
            ranks: &args.ranks,
            oversample: &args.oversample,
            power: args.power,
            order: args.order.as_ref(),
            sketch: args.sketch,
            pve_tol: args.pve_tol,
            qmax: args.qmax,
        },
    )?
    .with_seed(seed);

    let start = Instant::now();
    let sol = solve(args.algorithm, &t, &cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let re = relative_error(&t, &sol.factorization)?;

    fs::create_dir_all(&args.out)?;
    let mut files = vec!["core.dtns".to_string()];
    save_tensor(args.out.join(&files[0]), &sol.factorization.core)?;
    for (k, u) in sol.factorization.factors.iter().enumerate() {
        let name = format!("factor_{}.dtns", k + 1);
        save_matrix(args.out.join(&name), u)?;
        files.push(name);
    }
    let summary = DecomposeSummary {
        algorithm: args.algorithm,
        recipe,
        tensor_seed: seed,
        dims: t.dims().to_vec(),
        ranks: cfg.ranks.clone(),
        s: cfg.oversampling.clone(),
        q: cfg.power,
        realized_q: sol.powers.clone(),
        order: one_based(&cfg.processing_order(t.order())?),
        sketch: cfg.sketch,
        seed,
        re,
        seconds,
        counters: sol.counters,
        shift_trace: sol.trace.clone(),
        config: cfg,
        files,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(args.out.join("summary.json"), format!("{json}\n"))?;
    emit(&format!("{json}\n"))?;
    Ok(summary)
}

fn plan_from_flags(args: &BenchArgs) -> CliResult<(ExperimentPlan, DenseTensor)> {
    let recipe = recipe_from(&args.input)?;
    if args.algorithms.is_empty() {
        return Err(CliError::Config("bench needs at least one --algorithm".into()));
    }
    if args.ranks.is_empty() {
        return Err(CliError::Config("bench needs at least one --ranks".into()));
    }
    let seed = resolve_seed(args.seed);
    let t = build_tensor(&recipe, seed)?;
    let mut configs = Vec::new();
    for ranks in &args.ranks {
        for oversample in &args.oversample {
            for &power in &args.power {
                for &sketch in &args.sketch {
                    configs.push(build_config(
                        t.order(),
                        None,
                        SolverFlags {
                            ranks,
                            oversample,
                            power,
                            order: args.order.as_ref(),
                            sketch,
                            pve_tol: args.pve_tol,
                            qmax: args.qmax,
                        },
                    )?);
                }
            }
        }
    }
    let plan = ExperimentPlan {
        recipe,
        tensor_seed: seed,
        algorithms: args.algorithms.clone(),
        configs,
        trials: args.trials,
        master_seed: seed,
    };
    Ok((plan, t))
}

fn plan_from_file(args: &BenchArgs, path: &PathBuf) -> CliResult<(ExperimentPlan, DenseTensor)> {
    if args.input.input.is_some() || args.input.recipe.is_some() || !args.algorithms.is_empty() || !args.ranks.is_empty()
    {
        return Err(CliError::Config("--plan replaces the input, --algorithm and --ranks flags".into()));
    }
    let plan: ExperimentPlan = serde_json::from_slice(&fs::read(path)?)?;
    let t = build_tensor(&plan.recipe, plan.tensor_seed)?;
    Ok((plan, t))
}

fn join(v: &[usize]) -> String {
    v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
}

fn schedule_label(p: &PowerSchedule) -> String {
    match p {
        PowerSchedule::Fixed(q) => q.to_string(),
        PowerSchedule::Pve { tol, q_max } => format!("pve:{tol}:{q_max}"),
    }
}

pub const CSV_HEADER: [&str; 16] = [
    "algorithm",
    "recipe",
    "r",
    "s",
    "q",
    "sketch",
    "order",
    "trial",
    "seed",
    "re",
    "seconds",
    "alpha_final",
    "realized_q",
    "mm",
    "svd",
    "error",
];

/// Serializes reports in the bench CSV schema.
pub fn reports_to_csv(reports: &[RunReport], timing: bool) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in reports {
        let d = r.config.ranks.len();
        let order = r.config.processing_order(d).map(|o| join(&one_based(&o))).unwrap_or_default();
        w.write_record([
            r.algorithm.to_string(),
            r.recipe.clone(),
            join(&r.config.ranks),
            join(&r.config.oversampling),
            schedule_label(&r.config.power),
            r.config.sketch.to_string(),
            order,
            r.trial.to_string(),
            r.seed.to_string(),
            r.re.map(|x| format!("{x:e}")).unwrap_or_default(),
            if timing { format!("{:e}", r.seconds) } else { String::new() },
            r.alpha_final().map(|x| format!("{x:e}")).unwrap_or_default(),
            join(&r.powers),
            r.counters.mm.to_string(),
            r.counters.svd.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    let (plan, t) = match &args.plan {
        Some(path) => plan_from_file(args, path)?,
        None => plan_from_flags(args)?,
    };
    let reports = run_experiment_on(&plan, &t)?;
    let failed = reports.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        eprintln!("tucker: {failed} of {} cells failed; see the error column", reports.len());
    }
    let csv = reports_to_csv(&reports, !args.no_timing)?;
    match &args.out {
        Some(path) => {
            fs::write(path, &csv)?;
            eprintln!("tucker: wrote {} rows to {}", reports.len(), path.display());
        }
        None => emit(&String::from_utf8_lossy(&csv))?,
    }
    if let Some(path) = &args.summary {
        let json = serde_json::to_string_pretty(&summarize(&reports))?;
        fs::write(path, format!("{json}\n"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundOutput {
    /// `thosvd` or `sthosvd`.
    pub theorem: String,
    pub algorithm: Algorithm,
    pub j: Vec<usize>,
    pub beta: f64,
    pub gamma: f64,
    #[serde(flatten)]
    pub report: BoundReport,
    /// `bound / ||A||_F`.
    pub relative_bound: f64,
    pub observed_error: f64,
    pub observed_re: f64,
    pub holds: bool,
}

pub fn cmd_bound(args: &BoundArgs) -> CliResult<BoundOutput> {
    let summary: DecomposeSummary = serde_json::from_slice(&fs::read(&args.summary)?)?;
    let (theorem, evaluate): (&str, fn(&BoundParams) -> tucker_core::Result<BoundReport>) = match summary.algorithm {
        Algorithm::RandThosvd | Algorithm::ShiftedThosvd => ("thosvd", thosvd_error_bound),
        Algorithm::RandSthosvd | Algorithm::ShiftedSthosvd | Algorithm::Pve => ("sthosvd", sthosvd_error_bound),
        other => {
            return Err(CliError::Config(format!("no error bound is available for {other}")));
        }
    };
    let t = build_tensor(&summary.recipe, summary.tensor_seed)?;
    let params = BoundParams::from_run(&t, &summary.config, &summary.shift_trace)?.with_knobs(
        args.j,
        args.beta,
        args.gamma,
    );
    let report = evaluate(&params)?;
    let norm = t.frobenius_norm();
    let observed_error = summary.re * norm;
    let out = BoundOutput {
        theorem: theorem.into(),
        algorithm: summary.algorithm,
        j: params.j.clone(),
        beta: args.beta,
        gamma: args.gamma,
        report,
        relative_bound: report.bound / norm,
        observed_error,
        observed_re: summary.re,
        holds: observed_error <= report.bound,
    };
    let json = serde_json::to_string_pretty(&out)?;
    if let Some(path) = &args.out {
        fs::write(path, format!("{json}\n"))?;
    }
    emit(&format!("{json}\n"))?;
    Ok(out)
}
