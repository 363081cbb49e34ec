use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use klc_opi::io::{
    format_tuple, parse_tuple, read_model, read_policy, read_values_csv, write_compare_csv, write_policy,
    write_trace_csv, write_trace_jsonl, write_values_csv,
};
use klc_opi::learner::{InitRule, Mode, RunConfig, RunOptions, SamplingRule, Scheme, StepSchedule};
use klc_opi::metrics::{compare_policies, monte_carlo_return, ComparisonRow, EvalSettings};
use klc_opi::staghare::{build_model, deterministic_baseline, GridSpec};
use klc_opi::{greedy_policy, solver, value_iteration, JointPolicy, Model};
use log::info;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{
    resolve, CommonArgs, CompareArgs, EvalArgs, EvaluateArgs, ModeArg, ModelArgs, SamplingArg, SchemeArg,
    SolveArgs, TrainArgs, ValidateArgs,
};
use crate::CliError;

const DEFAULT_GAMMA: f64 = 0.95;
const DEFAULT_GRID: usize = 5;

/// Start states always reported by `compare`.
const REFERENCE_STARTS: [[usize; 2]; 4] = [[20, 4], [5, 12], [18, 14], [11, 13]];

/// Resolved settings of one invocation, written into every output.
struct Run {
    command: &'static str,
    out_dir: PathBuf,
    workers: Option<usize>,
    settings: Map<String, Value>,
}

impl Run {
    fn new(command: &'static str, common: &CommonArgs, settings: Map<String, Value>) -> Result<Self, CliError> {
        if common.workers == Some(0) {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        let out_dir = common.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        Ok(Self {
            command,
            out_dir,
            workers: common.workers,
            settings,
        })
    }

    fn set(&mut self, key: &str, value: impl Serialize) {
        self.settings.insert(key.to_string(), serde_json::to_value(value).expect("plain values serialize"));
    }

    fn config(&self) -> Value {
        json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "settings": self.settings,
        })
    }

    /// Single-line header for CSV outputs.
    fn header(&self) -> String {
        format!("klc-opi {} {}", self.command, self.config())
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Output(format!("{}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        info!("writing {}", path.display());
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
    }

    fn write(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> klc_opi::Result<()>) -> Result<(), CliError> {
        let mut file = self.create(name)?;
        f(&mut file).map_err(|e| CliError::Output(format!("{name}: {e}")))?;
        file.flush().map_err(|e| CliError::Output(format!("{name}: {e}")))
    }

    fn pooled<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
        match self.workers {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map(|pool| pool.install(f))
                .map_err(|e| CliError::Config(e.to_string())),
            None => Ok(f()),
        }
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))
}

/// Builds the model and, for the built-in environment, its grid.
fn load_model(args: &ModelArgs, run: &mut Run) -> Result<(Model, Option<GridSpec>), CliError> {
    if let Some(gamma) = args.gamma {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(CliError::Config(format!("gamma {gamma} must lie in (0, 1)")));
        }
    }
    if let Some(path) = &args.model {
        if args.env.is_some() || args.grid_size.is_some() || args.grid.is_some() {
            return Err(CliError::Config("--model cannot be combined with --env, --grid-size or grid".into()));
        }
        let mut model = read_model(open(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(gamma) = args.gamma {
            model = model.with_gamma(gamma)?;
        }
        run.set("gamma", model.gamma());
        return Ok((model, None));
    }
    let grid = match (&args.grid, args.grid_size) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either grid or --grid-size, not both".into())),
        (Some(grid), None) => grid.clone(),
        (None, size) => GridSpec::square(size.unwrap_or(DEFAULT_GRID)),
    };
    let gamma = args.gamma.unwrap_or(DEFAULT_GAMMA);
    let model = build_model(&grid, gamma)?;
    run.set("env", "staghare");
    run.set("grid", &grid);
    run.set("gamma", gamma);
    Ok((model, Some(grid)))
}

pub fn solve(args: SolveArgs) -> Result<(), CliError> {
    let (args, settings) = resolve(args.clone(), args.common.config.as_deref())?;
    let mut run = Run::new("solve", &args.common, settings)?;
    let (model, _) = load_model(&args.model, &mut run)?;
    let tol = args.solver.tol.unwrap_or(solver::DEFAULT_TOL);
    let max_iters = args.solver.max_iters.unwrap_or(solver::DEFAULT_MAX_ITERS);
    run.set("tol", tol);
    run.set("max_iters", max_iters);

    info!("value iteration on {} states", model.n_states());
    let report = value_iteration(&model, tol, max_iters)?;
    run.write("vstar.csv", |w| write_values_csv(w, "v_star", &report.v_star, Some(&run.header())))?;
    run.write("pistar.json", |w| write_policy(w, &report.pi_star, Some(&run.config())))?;
    println!("iterations {} final_residual {:e}", report.iterations, report.final_residual);
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let (args, settings) = resolve(args.clone(), args.common.config.as_deref())?;
    let mut run = Run::new("train", &args.common, settings)?;
    let (model, _) = load_model(&args.model, &mut run)?;
    let a = &args.run;

    let scheme = match (a.scheme.unwrap_or(SchemeArg::Sync), a.d) {
        (SchemeArg::Sync, None) => Scheme::Sync,
        (SchemeArg::Sync, Some(_)) => return Err(CliError::Config("--d requires --scheme async".into())),
        (SchemeArg::Async, Some(batch)) => Scheme::Async { batch },
        (SchemeArg::Async, None) => return Err(CliError::Config("--scheme async requires --d".into())),
    };
    let mode = match a.mode.unwrap_or(ModeArg::Sampled) {
        ModeArg::Sampled => Mode::Sampled,
        ModeArg::Expected => Mode::Expected,
    };
    let seed = match (mode, a.seed) {
        (_, Some(seed)) => seed,
        (Mode::Expected, None) => 0,
        (Mode::Sampled, None) => return Err(CliError::Config("--seed is required in sampled mode".into())),
    };
    let step = match (a.unit_step, a.lr_c0) {
        (true, Some(_)) => return Err(CliError::Config("--unit-step and --lr-c0 are exclusive".into())),
        (true, None) => StepSchedule::Unit,
        (false, c0) => StepSchedule::Harmonic { c0: c0.unwrap_or(50.0) },
    };
    let init = match &a.init {
        Some(path) => InitRule::Explicit(read_values_csv(open(path)?)?),
        None => InitRule::UpperConstant,
    };
    let oracle = a.oracle.as_deref().map(|p| read_values_csv(open(p)?).map_err(CliError::from)).transpose()?;
    let config = RunConfig {
        m: a.m.unwrap_or(20),
        iterations: a.k.unwrap_or(3000),
        scheme,
        step,
        seed,
        mode,
        sampling_rule: match a.sampling_rule.unwrap_or(SamplingArg::Joint) {
            SamplingArg::Joint => SamplingRule::Joint,
            SamplingArg::ProductOfMarginals => SamplingRule::ProductOfMarginals,
        },
        init,
    };
    config.validate(&model)?;
    run.set("run", &config);

    info!("training for {} iterations on {} states", config.iterations, model.n_states());
    let options = RunOptions {
        workers: run.workers,
        keep_history: false,
    };
    let out = klc_opi::learner::run(&model, &config, oracle.as_ref(), &options)?;
    run.write("trace.csv", |w| write_trace_csv(w, &out.trace, Some(&run.header())))?;
    if a.jsonl {
        run.write("trace.jsonl", |w| write_trace_jsonl(w, &out.trace))?;
    }
    run.write("vfinal.csv", |w| write_values_csv(w, "v", &out.state.v, Some(&run.header())))?;
    let policy = greedy_policy(&model, &out.state.v)?;
    run.write("policy.json", |w| write_policy(w, &policy, Some(&run.config())))?;
    match out.trace.last() {
        Some(row) => println!("iterations {} bellman_residual {:e}", out.trace.len(), row.bellman_residual),
        None => println!("iterations 0"),
    }
    Ok(())
}

fn start_states(model: &Model, eval: &EvalArgs, include_reference: bool) -> Result<Vec<Vec<usize>>, CliError> {
    let mut starts: Vec<Vec<usize>> = Vec::new();
    if include_reference || eval.start_states.is_none() {
        starts.extend(REFERENCE_STARTS.iter().map(|s| s.to_vec()));
    }
    for text in eval.start_states.iter().flatten() {
        let tuple = parse_tuple(text)?;
        if !starts.contains(&tuple) {
            starts.push(tuple);
        }
    }
    for tuple in &starts {
        model
            .space()
            .encode(tuple)
            .map_err(|e| CliError::Config(format!("start state {}: {e}", format_tuple(tuple))))?;
    }
    Ok(starts)
}

fn eval_settings(eval: &EvalArgs, run: &mut Run) -> Result<EvalSettings, CliError> {
    let seed = eval
        .seed
        .ok_or_else(|| CliError::Config("--seed is required for Monte-Carlo evaluation".into()))?;
    let settings = EvalSettings {
        horizon: eval.horizon.unwrap_or(klc_opi::metrics::DEFAULT_HORIZON),
        n_episodes: eval.episodes.unwrap_or(klc_opi::metrics::DEFAULT_EPISODES),
        discounted: eval.discounted,
        seed,
    };
    if settings.horizon == 0 || settings.n_episodes == 0 {
        return Err(CliError::Config("--horizon and --episodes must be at least 1".into()));
    }
    run.set("horizon", settings.horizon);
    run.set("episodes", settings.n_episodes);
    run.set("discounted", settings.discounted);
    run.set("seed", seed);
    Ok(settings)
}

fn baseline_for(grid: Option<&GridSpec>, model: &Model) -> Result<JointPolicy, CliError> {
    let grid = grid.ok_or_else(|| CliError::Config("the baseline policy needs the built-in staghare env".into()))?;
    Ok(deterministic_baseline(grid, model)?)
}

fn print_rows(rows: &[ComparisonRow]) {
    for row in rows {
        println!(
            "{:>8} {:>10} mean {:>12.4} std {:>10.4}",
            format_tuple(&row.start_state),
            row.policy,
            row.mean_return,
            row.std_return
        );
    }
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let (args, settings) = resolve(args.clone(), args.common.config.as_deref())?;
    let mut run = Run::new("evaluate", &args.common, settings)?;
    let (model, grid) = load_model(&args.model, &mut run)?;
    let (label, policy) = match (&args.policy, args.baseline, args.uncontrolled) {
        (Some(path), false, false) => ("policy", read_policy(open(path)?, &model)?),
        (None, true, false) => ("baseline", baseline_for(grid.as_ref(), &model)?),
        (None, false, true) => ("uncontrolled", JointPolicy::uncontrolled(&model)),
        (None, false, false) => {
            return Err(CliError::Config("give one of --policy, --baseline or --uncontrolled".into()))
        }
        _ => return Err(CliError::Config("--policy, --baseline and --uncontrolled are exclusive".into())),
    };
    let settings = eval_settings(&args.eval, &mut run)?;
    let starts = start_states(&model, &args.eval, false)?;
    run.set("start_states", starts.iter().map(|s| format_tuple(s)).collect::<Vec<_>>());

    let rows = run.pooled(|| {
        starts
            .iter()
            .map(|tuple| {
                let start = model.space().encode(tuple)?;
                let stats = monte_carlo_return(&model, &policy, start, &settings)?;
                Ok(ComparisonRow {
                    start_state: tuple.clone(),
                    policy: label.to_string(),
                    mean_return: stats.mean,
                    std_return: stats.std,
                    n_episodes: stats.n_episodes,
                    horizon: settings.horizon,
                })
            })
            .collect::<klc_opi::Result<Vec<_>>>()
    })??;
    run.write("evaluate.csv", |w| write_compare_csv(w, &rows, Some(&run.header())))?;
    print_rows(&rows);
    Ok(())
}

pub fn compare(args: CompareArgs) -> Result<(), CliError> {
    let (args, settings) = resolve(args.clone(), args.common.config.as_deref())?;
    let mut run = Run::new("compare", &args.common, settings)?;
    let (model, grid) = load_model(&args.model, &mut run)?;
    let path = args
        .policy
        .as_deref()
        .ok_or_else(|| CliError::Config("missing policy file (--policy)".into()))?;
    let learned = read_policy(open(path)?, &model)?;
    let (label, other) = match &args.against {
        Some(p) => ("against", read_policy(open(p)?, &model)?),
        None => ("baseline", baseline_for(grid.as_ref(), &model)?),
    };
    let settings = eval_settings(&args.eval, &mut run)?;
    let starts = start_states(&model, &args.eval, true)?;
    run.set("start_states", starts.iter().map(|s| format_tuple(s)).collect::<Vec<_>>());

    let rows = run.pooled(|| compare_policies(&model, ("learned", &learned), (label, &other), &starts, &settings))??;
    run.write("compare.csv", |w| write_compare_csv(w, &rows, Some(&run.header())))?;
    print_rows(&rows);
    Ok(())
}

pub fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let (args, settings) = resolve(args.clone(), args.common.config.as_deref())?;
    let mut run = Run::new("validate", &args.common, settings)?;
    let (model, _) = load_model(&args.model, &mut run)?;
    let n = model.n_states();
    let sizes = model.space().sizes();

    let factored = sizes.iter().product::<usize>() == n;
    println!(
        "A1 factored state space: {} ({} agents, sub-state sizes {:?}, {} joint states)",
        verdict(factored),
        model.n_agents(),
        sizes,
        n
    );

    let homogeneity = model.homogeneity();
    if homogeneity.holds() {
        println!("A2 homogeneous uncontrolled kernels: PASS");
    } else if !homogeneity.comparable {
        println!("A2 homogeneous uncontrolled kernels: REPORTED (agents have different sub-state spaces; non-fatal)");
    } else {
        let shown: Vec<String> = homogeneity
            .violating_states
            .iter()
            .take(5)
            .map(|&s| format_tuple(&model.space().decode(s).expect("state in range")))
            .collect();
        println!(
            "A2 homogeneous uncontrolled kernels: REPORTED ({} of {} joint states differ across agents, e.g. {}; non-fatal)",
            homogeneity.violating_states.len(),
            homogeneity.n_states,
            shown.join(" ")
        );
    }

    let zero = klc_opi::ValueFunction::zeros(n);
    let feasible = JointPolicy::uncontrolled(&model).validate(&model).is_ok()
        && greedy_policy(&model, &zero)
            .map(|pi| (0..n).all(|s| pi.row(s).support() == model.joint_rows()[s].support()))
            .unwrap_or(false);
    println!("A3 zero-support feasibility: {}", verdict(feasible));

    let lineage = klc_opi::learner::SeedLineage::new(0);
    let unique = (0..8).all(|k| {
        let batch = klc_opi::learner::sample_batch(&lineage, k, n, n.min(20));
        batch.windows(2).all(|w| w[0] < w[1])
    });
    println!("A4 unique batch sampling: {}", verdict(unique));
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
