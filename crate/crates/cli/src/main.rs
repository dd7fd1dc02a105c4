//! `lpg`: data generation, Elo, model fitting and evaluation from the
//! command line.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on numerical
//! failures (including failed self-checks).

mod manifest;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lpg_core::config::HarnessConfig;
use lpg_core::diagnostics::run_checks;
use lpg_core::domain::{load_dataset, load_roster, save_dataset, standard_roster, Dataset, TrainingPipeline};
use lpg_core::elo::{elo_holdout_validation, fit_elo_records, write_marginalised_csv, EloTable};
use lpg_core::eval::{
    elo_vs_model, kfold_cv, read_json, transfer_eval, write_correlation_csv, write_json, write_metrics_csv,
    EvaluationPlan, MetricsMode, MetricsReport, MetricsRow,
};
use lpg_core::fit::{fit_from, fit_hyperparameters, latent_dim_sweep, write_sweep_csv, ModelVariant};
use lpg_core::lpg::{goal_value, project_pipeline, simulate_pipeline, LpgHyperparameters};
use lpg_core::maze::generate_agents;
use lpg_core::{Error, Result};
use serde::Serialize;

use manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "lpg", version, about = "Latent policy gradient experiments")]
struct Cli {
    /// Master seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON configuration document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train desk agents over a pipeline roster and write preference JSONL.
    GenData(GenDataArgs),
    /// Fit per-agent Elo tables, marginalise them and run the holdout check.
    Elo(DataArg),
    /// Fit one model variant and write its hyperparameters.
    Fit(FitArgs),
    /// Transfer evaluation (and optional K-fold CV) from a plan file.
    Eval(EvalArgs),
    /// Fit the full variant across latent dimensions.
    SweepDim(SweepArgs),
    /// Closed-form projection trace of each pipeline for given hyperparameters.
    Project(ProjectArgs),
    /// Run the gradient and projection self-tests.
    Check,
}

#[derive(Debug, Args)]
struct DataArg {
    /// Dataset JSONL.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Roster JSON; defaults to the built-in 24-pipeline roster.
    #[arg(long)]
    roster: Option<PathBuf>,
    #[arg(long)]
    episodes_per_pair: Option<u32>,
    #[arg(long)]
    episodes_per_stage: Option<usize>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    variant: ModelVariant,
    #[arg(long)]
    data: PathBuf,
    /// Starting hyperparameters instead of the variant's default.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Variants to score; defaults to the config's list.
    #[arg(long)]
    variant: Vec<ModelVariant>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated latent dimensions; defaults to the config's list.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// Hyperparameter JSON.
    #[arg(long)]
    hp: PathBuf,
    /// Roster JSON; alternatively take the pipelines of `--data`.
    #[arg(long, conflicts_with = "data")]
    roster: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Elo(_) => "elo",
            Command::Fit(_) => "fit",
            Command::Eval(_) => "eval",
            Command::SweepDim(_) => "sweep-dim",
            Command::Project(_) => "project",
            Command::Check => "check",
        }
    }
}

/// Outcome of a command that ran to completion.
enum Finished {
    Ok,
    /// Completed, but a self-check failed.
    ChecksFailed,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, argv) {
        Ok(Finished::Ok) => ExitCode::SUCCESS,
        Ok(Finished::ChecksFailed) => {
            eprintln!("error: one or more self-checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli, argv: Vec<String>) -> Result<Finished> {
    let mut config = match &cli.config {
        Some(p) => HarnessConfig::load(p)?,
        None => HarnessConfig::default(),
    };
    config.fit.rng_seed = cli.seed;
    fs::create_dir_all(&cli.out).map_err(|e| Error::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    let mut manifest = Manifest::new(cli.command.name(), argv[1..].to_vec(), cli.seed, config.clone());
    if let Some(p) = &cli.config {
        manifest.add_input(p)?;
    }
    let mut ctx = Context {
        out: cli.out.clone(),
        seed: cli.seed,
        config,
        manifest,
    };
    let result = dispatch(&cli.command, &mut ctx);
    ctx.manifest.status = match &result {
        Ok(Finished::Ok) => "ok".into(),
        Ok(Finished::ChecksFailed) => "checks_failed".into(),
        Err(e) => format!("error: {e}"),
    };
    ctx.manifest.write(&ctx.out)?;
    result
}

struct Context {
    out: PathBuf,
    seed: u64,
    config: HarnessConfig,
    manifest: Manifest,
}

impl Context {
    fn load_data(&mut self, path: &Path) -> Result<Dataset> {
        self.manifest.add_input(path)?;
        load_dataset(path)
    }

    fn load_roster(&mut self, path: &Path) -> Result<Vec<TrainingPipeline>> {
        self.manifest.add_input(path)?;
        load_roster(path)
    }

    fn out_path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.manifest.add_output(&p);
        p
    }

    fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.out_path(name);
        write_json(&p, value)
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let p = self.out_path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.to_path_buf(),
                source: e,
            })?;
        }
        File::create(&p).map(BufWriter::new).map_err(|e| Error::Io { path: p, source: e })
    }
}

fn dispatch(command: &Command, ctx: &mut Context) -> Result<Finished> {
    match command {
        Command::GenData(a) => gen_data(a, ctx),
        Command::Elo(a) => elo(a, ctx),
        Command::Fit(a) => fit(a, ctx),
        Command::Eval(a) => eval(a, ctx),
        Command::SweepDim(a) => sweep(a, ctx),
        Command::Project(a) => project(a, ctx),
        Command::Check => return check(ctx),
    }?;
    Ok(Finished::Ok)
}

/// File-name-safe form of a pipeline id.
fn slug(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn gen_data(a: &GenDataArgs, ctx: &mut Context) -> Result<()> {
    let roster = match &a.roster {
        Some(p) => ctx.load_roster(p)?,
        None => standard_roster(),
    };
    if let Some(n) = a.episodes_per_pair {
        ctx.config.data.episodes_per_pair = n;
    }
    if let Some(n) = a.episodes_per_stage {
        ctx.config.data.agent.episodes_per_stage = n;
    }
    ctx.config.validate()?;
    ctx.manifest.config = ctx.config.clone();
    let agents = generate_agents(&roster, &ctx.config.data, ctx.seed)?;

    let mut w = csv::Writer::from_writer(ctx.create("training_returns.csv")?);
    w.write_record(["pipeline_id", "episode", "return"]).map_err(csv_error)?;
    for agent in &agents {
        for (e, r) in agent.training.episode_returns.iter().enumerate() {
            w.write_record([agent.pipeline.id(), &e.to_string(), &r.to_string()])
                .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: ctx.out.join("training_returns.csv"),
        source: e,
    })?;
    let policies: BTreeMap<&str, &Vec<f64>> =
        agents.iter().map(|a| (a.pipeline.id(), &a.training.policy.weights)).collect();
    ctx.write_json("policies.json", &policies)?;

    let records = agents.iter().flat_map(|a| a.records.iter().cloned()).collect::<Vec<_>>();
    let dataset = Dataset::new(agents.iter().map(|a| a.pipeline.clone()), records)?;
    let path = ctx.out_path("dataset.jsonl");
    save_dataset(&dataset, &path)?;
    println!("{} agents, {} records -> {}", agents.len(), dataset.records().len(), path.display());
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Csv(e)
}

#[derive(Serialize)]
struct EloHoldoutEntry {
    pipeline_id: String,
    three_way: MetricsReport,
    two_way: MetricsReport,
}

/// Record-weighted mean of per-agent reports.
fn pooled_row(label: &str, reports: &[&MetricsReport]) -> Option<MetricsRow> {
    let n: usize = reports.iter().map(|r| r.n).sum();
    let nd: usize = reports.iter().map(|r| r.n_directional).sum();
    let first = reports.first()?;
    let wmean = |f: &dyn Fn(&MetricsReport) -> f64, w: &dyn Fn(&MetricsReport) -> usize, total: usize| {
        if total == 0 {
            0.0
        } else {
            reports.iter().map(|r| f(r) * w(r) as f64).sum::<f64>() / total as f64
        }
    };
    Some(MetricsRow {
        variant: "elo".into(),
        evaluation: label.into(),
        mode: first.mode.name().into(),
        kl: wmean(&|r| r.kl, &|r| r.n, n),
        tv: wmean(&|r| r.tv, &|r| r.n, n),
        brier: wmean(&|r| r.brier, &|r| r.n, n),
        dir_acc: wmean(&|r| r.directional_accuracy, &|r| r.n_directional, nd),
        n,
    })
}

fn elo(a: &DataArg, ctx: &mut Context) -> Result<()> {
    let dataset = ctx.load_data(&a.data)?;
    let k = ctx.config.elo_holdout_folds;
    let mut holdout = Vec::new();
    for (pipeline, records) in dataset.by_pipeline() {
        let id = pipeline.id();
        let table = fit_elo_records(records.iter().copied())?;
        table.write_csv(ctx.create(&format!("elo/{}.csv", slug(id)))?)?;
        write_marginalised_csv(&table, ctx.create(&format!("elo/{}_marginal.csv", slug(id)))?)?;
        let owned: Vec<_> = records.iter().map(|r| (*r).clone()).collect();
        holdout.push(EloHoldoutEntry {
            pipeline_id: id.to_string(),
            three_way: elo_holdout_validation(&owned, k, ctx.seed, MetricsMode::ThreeWay)?,
            two_way: elo_holdout_validation(&owned, k, ctx.seed, MetricsMode::TwoWay)?,
        });
    }
    let label = format!("holdout_k{k}");
    let rows: Vec<MetricsRow> = [
        pooled_row(&label, &holdout.iter().map(|h| &h.three_way).collect::<Vec<_>>()),
        pooled_row(&label, &holdout.iter().map(|h| &h.two_way).collect::<Vec<_>>()),
    ]
    .into_iter()
    .flatten()
    .collect();
    let p = ctx.out_path("metrics.csv");
    write_metrics_csv(&p, &rows)?;
    ctx.write_json("elo_holdout.json", &holdout)?;
    for r in &rows {
        println!("elo {} {}: dir_acc {:.4} kl {:.4} (n = {})", r.evaluation, r.mode, r.dir_acc, r.kl, r.n);
    }
    Ok(())
}

fn fit(a: &FitArgs, ctx: &mut Context) -> Result<()> {
    let dataset = ctx.load_data(&a.data)?;
    if let Some(e) = a.epochs {
        ctx.config.fit.epochs = e;
        ctx.manifest.config = ctx.config.clone();
    }
    let result = match &a.init {
        Some(p) => {
            ctx.manifest.add_input(p)?;
            let init: LpgHyperparameters = read_json(p)?;
            fit_from(&dataset, a.variant, &ctx.config.fit, init)?
        }
        None => fit_hyperparameters(&dataset, a.variant, &ctx.config.fit)?,
    };
    ctx.write_json("hyperparameters.json", &result.hyperparameters)?;
    ctx.write_json("fit_report.json", &result)?;
    println!(
        "{} fit: train loss {:.5} over {} records, {} updates",
        a.variant,
        result.train_loss,
        dataset.records().len(),
        result.diagnostics.n_updates
    );
    Ok(())
}

fn eval(a: &EvalArgs, ctx: &mut Context) -> Result<()> {
    let dataset = ctx.load_data(&a.data)?;
    ctx.manifest.add_input(&a.plan)?;
    let plan: EvaluationPlan = read_json(&a.plan)?;
    let variants = if a.variant.is_empty() {
        ctx.config.variants.clone()
    } else {
        a.variant.clone()
    };
    // surface filter errors before any fitting
    let (_, eval_set) = plan.split(&dataset)?;
    let elo_tables: BTreeMap<String, EloTable> = eval_set
        .by_pipeline()
        .into_iter()
        .map(|(p, recs)| Ok((p.id().to_string(), fit_elo_records(recs)?)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for v in variants {
        let report = transfer_eval(&dataset, &plan, v, &ctx.config.fit)?;
        rows.push(MetricsRow::new(v.name(), "transfer", &report.three_way));
        rows.push(MetricsRow::new(v.name(), "transfer", &report.two_way));
        println!(
            "{v} transfer: eval loss {:.5} (uniform {:.5}), two-way dir_acc {:.4}",
            report.eval_loss, report.eval_baseline_uniform, report.two_way.directional_accuracy
        );
        let settings = ctx.config.fit.simulation();
        for normalised in [false, true] {
            let c = elo_vs_model(&eval_set, &elo_tables, &report.fit.hyperparameters, v, &settings, normalised)?;
            let tag = if normalised { "normalised" } else { "raw" };
            let p = ctx.out_path(&format!("correlation_{}_{tag}.csv", v.name()));
            write_correlation_csv(&p, &c)?;
            println!("{v} elo correlation ({tag}): spearman {:.4}, r2 {:.4}", c.spearman_rho, c.r_squared);
            ctx.write_json(
                &format!("correlation_{}_{tag}.json", v.name()),
                &serde_json::json!({"spearman_rho": c.spearman_rho, "r_squared": c.r_squared, "n": c.points.len()}),
            )?;
        }
        ctx.write_json(&format!("transfer_{}.json", v.name()), &report)?;
        if let Some(k) = plan.k {
            let mut cfg = ctx.config.fit;
            cfg.rng_seed = plan.seed.unwrap_or(ctx.seed);
            let train_ids = plan.train.select(&dataset)?;
            let train = dataset.filter_pipelines(|p| train_ids.contains(p.id()));
            let cv = kfold_cv(&train, v, k, &cfg)?;
            println!("{v} {k}-fold CV: loss {:.5} ± {:.5}", cv.mean_loss, cv.standard_error);
            ctx.write_json(&format!("cv_{}.json", v.name()), &cv)?;
        }
    }
    let p = ctx.out_path("metrics.csv");
    write_metrics_csv(&p, &rows)
}

fn sweep(a: &SweepArgs, ctx: &mut Context) -> Result<()> {
    let dataset = ctx.load_data(&a.data)?;
    let dims = if a.dims.is_empty() {
        ctx.config.sweep_dims.clone()
    } else {
        a.dims.clone()
    };
    let rows = latent_dim_sweep(&dataset, &dims, &ctx.config.fit)?;
    write_sweep_csv(&rows, ctx.create("sweep.csv")?)?;
    for (d, l) in &rows {
        println!("d = {d}: loss {l:.5}");
    }
    Ok(())
}

#[derive(Serialize)]
struct ProjectionStage {
    goal: lpg_core::domain::Object,
    /// Closed-form weights after this stage.
    weights: Vec<f64>,
    goal_value: f64,
}

#[derive(Serialize)]
struct ProjectionTrace {
    pipeline_id: String,
    initial: Vec<f64>,
    stages: Vec<ProjectionStage>,
    /// Unit-step simulation of the same pipeline, for comparison.
    simulated_final: Vec<f64>,
    max_gap: f64,
}

fn project(a: &ProjectArgs, ctx: &mut Context) -> Result<()> {
    ctx.manifest.add_input(&a.hp)?;
    let hp: LpgHyperparameters = read_json(&a.hp)?;
    let pipelines: Vec<TrainingPipeline> = match (&a.roster, &a.data) {
        (Some(r), _) => ctx.load_roster(r)?,
        (None, Some(d)) => ctx.load_data(d)?.pipelines().values().cloned().collect(),
        (None, None) => return Err(Error::Invalid("project needs --roster or --data".into())),
    };
    let settings = ctx.config.fit.simulation();
    let mut traces = Vec::with_capacity(pipelines.len());
    for p in &pipelines {
        let trace = project_pipeline(&hp, p)?;
        let sim = simulate_pipeline(&hp, p, &settings)?;
        let last = &trace.last().expect("pipelines have stages").0;
        traces.push(ProjectionTrace {
            pipeline_id: p.id().to_string(),
            initial: hp.initial_latent().iter().copied().collect(),
            stages: p
                .stages()
                .iter()
                .zip(&trace)
                .map(|(s, w)| ProjectionStage {
                    goal: s.goal,
                    weights: w.0.iter().copied().collect(),
                    goal_value: goal_value(&hp, &w.0, Some(s.goal)),
                })
                .collect(),
            simulated_final: sim.0.iter().copied().collect(),
            max_gap: (&sim.0 - last).amax(),
        });
    }
    let worst = traces.iter().map(|t| t.max_gap).fold(0.0, f64::max);
    println!("{} pipelines projected; largest simulation gap {worst:.3e}", traces.len());
    ctx.write_json("projection.json", &traces)
}

fn check(ctx: &mut Context) -> Result<Finished> {
    let report = run_checks(&ctx.config.check, ctx.seed)?;
    for c in &report.checks {
        println!(
            "{} {}: max error {:.3e} (tolerance {:.0e}, {} cases, {:.2}s)",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.max_error,
            c.tolerance,
            c.cases,
            c.seconds
        );
    }
    ctx.write_json("check_report.json", &report)?;
    Ok(if report.all_passed() {
        Finished::Ok
    } else {
        Finished::ChecksFailed
    })
}
