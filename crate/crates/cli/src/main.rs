use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use polopt::exact::{
    brute_force_with_mode, guess_and_check, iterative_elimination, sort_and_optimize,
    GuessCheckConfig,
};
use polopt::experiment::{
    ingest_dataset, run_experiment_with, DatasetSummary, ExperimentPlan, Workbench,
};
use polopt::generators::{
    gen_random_instance, ImpossibilityParams, ImpossibilitySampler, ModelKind, VertexCoverInstance,
};
use polopt::oracle::run_rng;
use polopt::sampling::{
    negative_sample_ban_smallest, negative_sample_random, sample_and_eliminate, sample_constant_k,
};
use polopt::{
    FrequencyDistribution, Mode, ModelOracle, OptimizationResult, PolicyModel, RankingPopulation,
    RuleBook, RuleSet, RuleSetConfig, SamplingConfig,
};

#[derive(Parser)]
#[command(
    name = "polopt",
    version,
    about = "Optimize password composition policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact optimization over a full model.
    OptimizeExact(ExactArgs),
    /// Optimization with sample access to the model only.
    OptimizeSample(SampleArgs),
    /// Reference values for a dataset and rule set.
    Baselines(BaselineArgs),
    /// Run an experiment plan.
    Experiment(ExperimentArgs),
    /// Write a generated instance.
    GenInstance(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ranking,
    Normalization,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Positive,
    Negative,
    Singleton,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Positive => Mode::Positive,
            ModeArg::Negative => Mode::Negative,
            ModeArg::Singleton => Mode::Singleton,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// Ranking population or `[[password, probability], ...]`.
    Json,
    /// `count password` lines (normalization model only).
    Withcount,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExactAlg {
    GuessCheck,
    IterElim,
    SortOpt,
    Brute,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleAlg {
    SampleElim,
    SampleK,
    NegRandom,
    NegSmallest,
}

#[derive(clap::Args)]
struct ModelInput {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Model file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    input_format: InputFormat,
    /// Rule set config; optional in singleton mode.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Reads the rules under this mode instead of the one in the config.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(clap::Args)]
struct ExactArgs {
    #[command(flatten)]
    input: ModelInput,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum, default_value = "brute")]
    alg: ExactAlg,
    /// Largest k accepted by guess-check.
    #[arg(long)]
    max_k: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SampleArgs {
    #[command(flatten)]
    input: ModelInput,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "sample-elim")]
    alg: SampleAlg,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Samples per iteration; derived from epsilon, delta and m when absent.
    #[arg(long)]
    sample_size: Option<u64>,
    /// Run every iteration instead of stopping once the top estimate is small.
    #[arg(long)]
    no_early_exit: bool,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BaselineArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "withcount")]
    format: InputFormat,
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Overrides the plan's JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the plan's CSV report path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Overrides the plan's runs per sample size.
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    VertexCover,
    Impossibility,
    Random,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Directory receiving model.json, rules.json and instance.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// vertex-cover: vertex count g.
    #[arg(long, default_value_t = 3)]
    vertices: usize,
    /// vertex-cover: edges as `u-v,u-v,...`.
    #[arg(long, default_value = "0-1,1-2,0-2")]
    edges: String,
    /// vertex-cover: cover size threshold t.
    #[arg(long, default_value_t = 1)]
    threshold: usize,
    /// impossibility: approximation constant c.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// impossibility and random: number of passwords N.
    #[arg(long, default_value_t = 16)]
    passwords: usize,
    /// impossibility and random (ranking): number of users n.
    #[arg(long, default_value_t = 1000)]
    users: usize,
    /// random: number of rules m.
    #[arg(long, default_value_t = 4)]
    rules: usize,
    /// random: user model.
    #[arg(long, value_enum, default_value = "ranking")]
    model: ModelArg,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::OptimizeExact(a) => optimize_exact(a),
        Command::OptimizeSample(a) => optimize_sample(a),
        Command::Baselines(a) => baselines(a),
        Command::Experiment(a) => experiment(a),
        Command::GenInstance(a) => gen_instance(a),
    }
}

fn emit(out: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_distribution(
    path: &Path,
    format: InputFormat,
) -> Result<(FrequencyDistribution, DatasetSummary)> {
    Ok(match format {
        InputFormat::Json => {
            let d = FrequencyDistribution::load_json(path)?;
            let summary = DatasetSummary {
                total_count: d.total_count().unwrap_or(0),
                distinct: d.space().len(),
                skipped_empty: 0,
            };
            (d, summary)
        }
        InputFormat::Withcount => {
            let d = ingest_dataset(path)?;
            (d.distribution, d.summary)
        }
    })
}

fn load_model(input: &ModelInput) -> Result<PolicyModel> {
    let path = &input.input;
    Ok(match (input.model, input.input_format) {
        (ModelArg::Ranking, InputFormat::Json) => RankingPopulation::load(path, None)?.into(),
        (ModelArg::Ranking, InputFormat::Withcount) => {
            bail!("withcount input only describes a normalization model")
        }
        (ModelArg::Normalization, f) => load_distribution(path, f)?.0.into(),
    })
}

/// Builds the rule book over the model's space, read in the requested mode.
fn load_book(input: &ModelInput, model: &PolicyModel) -> Result<RuleBook> {
    let space = model.space().clone();
    let mode = input.mode.map(Mode::from);
    let book = match (&input.rules, mode) {
        (_, Some(Mode::Singleton)) => RuleBook::singletons(space),
        (Some(path), _) => RuleSetConfig::load(path)?.build(space)?,
        (None, _) => bail!("--rules is required unless --mode singleton"),
    };
    match mode {
        Some(m) if m != book.mode() => Ok(book.with_mode(m)?),
        _ => Ok(book),
    }
}

fn names(space: &polopt::PasswordSpace, ids: &[polopt::PasswordId]) -> Vec<String> {
    space.names(ids).into_iter().map(str::to_string).collect()
}

fn result_json(model: &PolicyModel, book: &RuleBook, r: &OptimizationResult) -> Result<Value> {
    let space = book.space();
    let trace: Vec<Value> = r
        .trace
        .iter()
        .map(|t| {
            json!({
                "active": t.active.ids(),
                "top": t.top.map(|id| space.get(id)),
                "value": t.value,
            })
        })
        .collect();
    let policy = polopt::Policy::with_mode(book, r.mode, r.best.clone())?;
    let true_value = model.p_k(&policy, r.k).ok();
    let allowed = policy.allowed_ids();
    Ok(json!({
        "mode": r.mode,
        "k": r.k,
        "active": r.best.ids(),
        "policy": book.describe(&r.best),
        "value": r.value,
        "ratio": r.ratio,
        "value_kind": r.value_kind,
        "true_value": true_value,
        "allowed_count": allowed.len(),
        "allowed": (allowed.len() <= 1000).then(|| names(space, &allowed)),
        "samples_drawn": r.samples_drawn,
        "trace": trace,
    }))
}

fn optimize_exact(a: ExactArgs) -> Result<()> {
    let model = load_model(&a.input)?;
    let book = load_book(&a.input, &model)?;
    let out = match a.alg {
        ExactAlg::SortOpt => {
            let PolicyModel::Normalization(dist) = &model else {
                bail!("sort-opt needs the normalization model");
            };
            if book.mode() != Mode::Singleton {
                bail!("sort-opt needs singleton rules (--mode singleton)");
            }
            let s = sort_and_optimize(dist, a.k)?;
            let space = dist.space();
            json!({
                "algorithm": "sort-opt",
                "mode": Mode::Singleton,
                "k": s.k,
                "value": s.value,
                "banned": names(space, s.banned()),
                "allowed_count": s.allowed().len(),
                "allowed": (s.allowed().len() <= 1000).then(|| names(space, s.allowed())),
            })
        }
        alg => {
            let (name, r) = match alg {
                ExactAlg::GuessCheck => {
                    let PolicyModel::Ranking(pop) = &model else {
                        bail!("guess-check needs the ranking model");
                    };
                    let mut cfg = GuessCheckConfig::default();
                    if let Some(mk) = a.max_k {
                        cfg.max_k = mk;
                    }
                    ("guess-check", guess_and_check(pop, &book, a.k, &cfg)?)
                }
                ExactAlg::IterElim => {
                    if a.k != 1 {
                        bail!("iter-elim optimizes k = 1 only");
                    }
                    ("iter-elim", iterative_elimination(&model, &book)?)
                }
                _ => (
                    "brute",
                    brute_force_with_mode(&model, &book, book.mode(), a.k)?,
                ),
            };
            let mut v = result_json(&model, &book, &r)?;
            v["algorithm"] = json!(name);
            v
        }
    };
    emit(a.out.as_deref(), &out)
}

fn optimize_sample(a: SampleArgs) -> Result<()> {
    let model = load_model(&a.input)?;
    let book = load_book(&a.input, &model)?;
    let wanted = match a.alg {
        SampleAlg::SampleElim | SampleAlg::SampleK => Mode::Positive,
        SampleAlg::NegRandom | SampleAlg::NegSmallest => Mode::Negative,
    };
    let book = match (book.mode(), wanted) {
        (Mode::Positive, Mode::Negative) | (Mode::Negative, Mode::Positive) => book.complement()?,
        _ => book,
    };
    let cfg = SamplingConfig {
        k: a.k,
        sample_size: a.sample_size,
        early_exit: !a.no_early_exit,
        max_iterations: a.max_iterations,
        ..SamplingConfig::new(a.epsilon, a.delta)
    };
    let mut oracle = ModelOracle::new(&model, &book, run_rng(a.seed, 0))?;
    let (name, r) = match a.alg {
        SampleAlg::SampleElim => (
            "sample-elim",
            sample_and_eliminate(&mut oracle, &book, &cfg)?,
        ),
        SampleAlg::SampleK => ("sample-k", sample_constant_k(&mut oracle, &book, &cfg)?),
        SampleAlg::NegRandom => (
            "neg-random",
            negative_sample_random(&mut oracle, &book, &cfg, &mut run_rng(a.seed, 1))?,
        ),
        SampleAlg::NegSmallest => (
            "neg-smallest",
            negative_sample_ban_smallest(&mut oracle, &book, &cfg)?,
        ),
    };
    let mut v = result_json(&model, &book, &r)?;
    v["algorithm"] = json!(name);
    v["seed"] = json!(a.seed);
    v["sample_size"] = json!(cfg.sample_size_for(book.len()));
    emit(a.out.as_deref(), &v)
}

fn row_json(book: Option<&RuleBook>, active: &RuleSet, p1: f64, witness: &str) -> Value {
    json!({
        "active": active.ids(),
        "p1": p1,
        "witness": witness,
        "rules": book.map(|b| active.iter().map(|i| b.rules()[i].label.clone()).collect::<Vec<_>>()),
    })
}

fn baselines(a: BaselineArgs) -> Result<()> {
    let (dist, summary) = load_distribution(&a.dataset, a.format)?;
    let rules = RuleSetConfig::load(&a.rules)?;
    let bench = Workbench::new(dist, summary, &rules, None)?;
    let b = bench.baselines()?;
    let out = json!({
        "dataset": bench.summary,
        "rules": bench.positive.as_ref().map_or(0, |p| p.len()),
        "no_policy": b.no_policy,
        "mean_positive": b.mean_positive,
        "mean_negative": b.mean_negative,
        "best_single_rule": row_json(bench.positive.as_ref(), &b.best_single_rule.active, b.best_single_rule.p1, &b.best_single_rule.witness),
        "optimal_positive": row_json(bench.positive.as_ref(), &b.optimal_positive.active, b.optimal_positive.p1, &b.optimal_positive.witness),
        "optimal_negative": row_json(bench.negative.as_ref(), &b.optimal_negative.active, b.optimal_negative.p1, &b.optimal_negative.witness),
    });
    emit(a.out.as_deref(), &out)
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut plan = ExperimentPlan::load(&a.plan)?;
    if a.out.is_some() {
        plan.output = a.out;
    }
    if a.csv.is_some() {
        plan.csv = a.csv;
    }
    if let Some(r) = a.runs {
        plan.runs_per_size = r;
    }
    let report = run_experiment_with(&plan, |c| {
        eprintln!(
            "{} s={} mean={:.4e} min={:.4e} optimal={}",
            c.algorithm.name(),
            c.sample_size,
            c.mean_p1,
            c.min_p1,
            c.pct_optimal
                .map_or("-".to_string(), |p| format!("{p:.1}%"))
        );
    })?;
    if plan.output.is_none() {
        print!("{}", report.to_json()?);
    }
    Ok(())
}

fn parse_edges(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .filter(|e| !e.trim().is_empty())
        .map(|e| {
            let (u, v) = e
                .trim()
                .split_once('-')
                .with_context(|| format!("edge {e:?} is not u-v"))?;
            Ok((u.parse()?, v.parse()?))
        })
        .collect()
}

fn write_instance(dir: &Path, model: &str, rules: &RuleSetConfig, meta: Value) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("model.json"), model.to_string() + "\n")?;
    rules.save(dir.join("rules.json"))?;
    fs::write(
        dir.join("instance.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    Ok(())
}

fn gen_instance(a: GenArgs) -> Result<()> {
    match a.kind {
        GenKind::VertexCover => {
            let inst =
                VertexCoverInstance::new(a.vertices, parse_edges(&a.edges)?, a.threshold, a.seed)?;
            let (pop, book) = inst.rankings()?;
            let meta = json!({
                "kind": "vertex-cover",
                "model": "ranking",
                "k": inst.k(),
                "has_cover": inst.has_cover(),
                "instance": inst,
            });
            write_instance(
                &a.out_dir,
                &pop.to_json()?,
                &RuleSetConfig::from_book(&book, None),
                meta,
            )
        }
        GenKind::Impossibility => {
            let params = ImpossibilityParams::new(a.c, a.passwords)?;
            let mut sampler = ImpossibilitySampler::new(params.clone(), a.seed)?;
            let lists = (0..a.users).map(|_| sampler.sample_ranking().1).collect();
            let space = Arc::clone(sampler.space());
            let pop = RankingPopulation::uniform(space.clone(), lists)?;
            let meta = json!({
                "kind": "impossibility",
                "model": "ranking",
                "users": a.users,
                "seed": a.seed,
                "params": params,
            });
            let rules = RuleSetConfig::from_book(&RuleBook::singletons(space), None);
            write_instance(&a.out_dir, &pop.to_json()?, &rules, meta)
        }
        GenKind::Random => {
            let kind = match a.model {
                ModelArg::Ranking => ModelKind::Ranking,
                ModelArg::Normalization => ModelKind::Normalization,
            };
            let inst = gen_random_instance(a.passwords, a.rules, a.users, kind, a.seed)?;
            let meta = json!({
                "kind": "random",
                "model": inst.model.kind(),
                "passwords": a.passwords,
                "rules": a.rules,
                "users": a.users,
                "seed": a.seed,
            });
            let rules: RuleSetConfig = serde_json::from_str(&inst.rules_json()?)?;
            write_instance(&a.out_dir, &inst.model_json()?, &rules, meta)
        }
    }
}
