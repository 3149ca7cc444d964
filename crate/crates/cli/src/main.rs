use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ard_choice::ard::{lambda_table, read_lambda_csv, select_variables, write_lambda_csv, Checkpoint, LambdaRow};
use ard_choice::data::{load_dataset, split_rows, write_dataset, DatasetSchema};
use ard_choice::eval::{evaluate, evaluate_split, format_table, AlternativeRecovery, EvalReport, RecoveryReport};
use ard_choice::mnl::{coefficient_table, coefficients_from_table, fit_mle, read_coefficients_csv, write_coefficients_csv, MleOptions};
use ard_choice::space::{build_catalog, materialize, read_tensor, write_tensor, CandidateCatalog, DesignTensor, SpaceConfig};
use ard_choice::synthetic::{generate, TrueSpecification};
use ard_choice::{fit_ard, Error, GroupLayout, Result, TrainingConfig};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Automatic utility specification for multinomial logit models.
#[derive(Parser, Debug)]
#[command(name = "ard-choice", version)]
struct Cli {
    /// Subcommand configuration (JSON): the search space for `expand`, the
    /// training settings for `fit-ard`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for simulation, training or data splits.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Request ordered reductions. Reductions always use a fixed block
    /// order, so results do not depend on the thread count either way.
    #[arg(long, global = true)]
    deterministic: bool,
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the candidate catalog and the design tensor.
    Expand(ExpandArgs),
    /// Redraw the choices from an MNL fitted on a declared specification.
    Simulate(SimulateArgs),
    /// Estimate the ARD prior variances and rank the candidates.
    FitArd(FitArdArgs),
    /// Fit an MNL by maximum likelihood on a declared specification.
    FitMnl(FitMnlArgs),
    /// Score saved coefficient tables.
    Evaluate(EvaluateArgs),
    /// Summarize a λ report, optionally against the true specification.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct ExpandArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    /// True specification (JSON: alternative → group labels).
    #[arg(long)]
    spec: PathBuf,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "simulated.csv")]
    out: String,
}

#[derive(Args, Debug)]
struct FitArdArgs {
    #[arg(long)]
    tensor: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitMnlArgs {
    #[arg(long)]
    tensor: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// Fit on this fraction of the rows and report train and test metrics.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    std_errors: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    tensor: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    /// Coefficient tables written by `fit-mnl`.
    #[arg(long, required = true, num_args = 1..)]
    coefficients: Vec<PathBuf>,
    /// Also score the train and test parts of this split.
    #[arg(long)]
    split: Option<f64>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// λ report written by `fit-ard`.
    #[arg(long)]
    lambda: PathBuf,
    /// True specification to score the selection against.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Serialize, Debug)]
struct FileRef {
    path: String,
    sha256: String,
}

/// Provenance record embedded in every JSON output and written next to the
/// tabular ones.
#[derive(Serialize, Debug)]
struct RunManifest {
    subcommand: String,
    tool_version: String,
    configs: BTreeMap<String, FileRef>,
    seeds: BTreeMap<String, u64>,
    inputs: BTreeMap<String, FileRef>,
    outputs: Vec<String>,
    catalog_hash: Option<String>,
    threads: Option<usize>,
    deterministic: bool,
}

impl RunManifest {
    fn new(subcommand: &str, cli: &Cli) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            configs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            catalog_hash: None,
            threads: cli.threads,
            deterministic: cli.deterministic,
        }
    }

    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.insert(role.into(), file_ref(path)?);
        Ok(())
    }

    fn config(&mut self, role: &str, path: &Path) -> Result<()> {
        self.configs.insert(role.into(), file_ref(path)?);
        Ok(())
    }

    fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }
}

fn file_ref(path: &Path) -> Result<FileRef> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileRef {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write `payload` (a JSON object) with the manifest under `"manifest"`.
fn write_json(path: &Path, manifest: &RunManifest, payload: &impl Serialize) -> Result<()> {
    let mut value = serde_json::to_value(payload)?;
    let object = value.as_object_mut().expect("payload serializes to an object");
    object.insert("manifest".into(), serde_json::to_value(manifest)?);
    write_text(path, &(serde_json::to_string_pretty(&value)? + "\n"))
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = dir.join(format!("{}.manifest.json", manifest.subcommand));
    write_text(&path, &(serde_json::to_string_pretty(manifest)? + "\n"))
}

fn require_config(cli: &Cli, what: &str) -> Result<PathBuf> {
    cli.config
        .clone()
        .ok_or_else(|| Error::Argument(format!("{what} requires --config")))
}

fn load_catalog(manifest: &mut RunManifest, path: &Path) -> Result<CandidateCatalog> {
    manifest.input("catalog", path)?;
    let catalog = CandidateCatalog::from_json_file(path)?;
    manifest.catalog_hash = Some(catalog.hash());
    Ok(catalog)
}

fn load_tensor(manifest: &mut RunManifest, path: &Path, catalog: &CandidateCatalog) -> Result<(DesignTensor, Vec<usize>)> {
    manifest.input("tensor", path)?;
    read_tensor(path, catalog)
}

fn cmd_expand(cli: &Cli, args: &ExpandArgs) -> Result<()> {
    let mut manifest = RunManifest::new("expand", cli);
    let config_path = require_config(cli, "expand")?;
    manifest.config("space", &config_path)?;
    manifest.input("data", &args.data)?;
    manifest.config("schema", &args.schema)?;
    let schema = DatasetSchema::from_json_file(&args.schema)?;
    let space = SpaceConfig::from_json_file(&config_path)?;
    let (data, load) = load_dataset(&args.data, &schema)?;
    log::info!("loaded {} observations, dropped {}", data.len(), load.total_dropped());
    let catalog = build_catalog(&data, &space)?;
    manifest.catalog_hash = Some(catalog.hash());
    let design = materialize(&data, &catalog, catalog.standardize)?;

    let catalog_path = cli.output_dir.join("catalog.json");
    let tensor_path = cli.output_dir.join("tensor.csv");
    manifest.output(&catalog_path);
    manifest.output(&tensor_path);
    write_tensor(&design, &catalog, data.choices(), &tensor_path)?;
    write_json(&catalog_path, &manifest, &catalog)?;
    write_manifest(&cli.output_dir, &manifest)?;
    println!("observations: {}", data.len());
    println!("groups: {}", catalog.groups.len());
    println!("candidates: {}", catalog.total_columns());
    Ok(())
}

#[derive(Serialize)]
struct SimulationSidecar<'a> {
    seed: u64,
    specification: &'a TrueSpecification,
    loglik: f64,
    coefficients: Vec<ard_choice::mnl::CoefficientEntry>,
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("simulate", cli);
    let seed = cli.seed.unwrap_or(0);
    manifest.seeds.insert("simulation".into(), seed);
    manifest.input("data", &args.data)?;
    manifest.config("schema", &args.schema)?;
    manifest.config("specification", &args.spec)?;
    let schema = DatasetSchema::from_json_file(&args.schema)?;
    let catalog = load_catalog(&mut manifest, &args.catalog)?;
    let spec = TrueSpecification::from_json_file(&args.spec)?;
    spec.resolve(&catalog)?;
    let (data, _) = load_dataset(&args.data, &schema)?;
    let generated = generate(&data, &catalog, &spec, seed)?;

    let data_path = cli.output_dir.join(&args.out);
    let sidecar_path = data_path.with_extension("json");
    manifest.output(&data_path);
    manifest.output(&sidecar_path);
    let comment = format!("seed={seed} tool=ard-choice {}", env!("CARGO_PKG_VERSION"));
    write_dataset(&generated.data, &schema, &data_path, Some(&comment))?;
    let sidecar = SimulationSidecar {
        seed,
        specification: &spec,
        loglik: generated.fit.loglik,
        coefficients: coefficient_table(&generated.coefficients, &catalog, catalog.standardize, None, true)?,
    };
    write_json(&sidecar_path, &manifest, &sidecar)?;
    write_manifest(&cli.output_dir, &manifest)?;
    println!("observations: {}", generated.data.len());
    println!("generating log-likelihood: {:.3}", generated.fit.loglik);
    Ok(())
}

/// Hash of the training settings, ignoring the iteration budget so that a
/// resumed run may extend it.
fn config_hash(config: &TrainingConfig) -> Result<String> {
    let mut c = config.clone();
    c.max_iterations = 0;
    c.min_iterations = 0;
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&c)?)))
}

#[derive(Serialize)]
struct ArdSummary {
    iterations: u64,
    converged: bool,
    smoothed_elbo: Option<f64>,
    selected: TrueSpecification,
}

fn cmd_fit_ard(cli: &Cli, args: &FitArdArgs) -> Result<()> {
    let mut manifest = RunManifest::new("fit-ard", cli);
    let mut config = match &cli.config {
        Some(path) => {
            manifest.config("training", path)?;
            TrainingConfig::from_json_file(path)?
        }
        None => TrainingConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    manifest.seeds.insert("training".into(), config.seed);
    let catalog = load_catalog(&mut manifest, &args.catalog)?;
    let (design, choices) = load_tensor(&mut manifest, &args.tensor, &catalog)?;
    let layout = GroupLayout::from_catalog(&catalog);
    let hash = config_hash(&config)?;

    let resume = match &args.resume {
        Some(path) => {
            manifest.input("checkpoint", path)?;
            let checkpoint = Checkpoint::load(path)?;
            if checkpoint.catalog_hash.as_deref() != manifest.catalog_hash.as_deref() {
                return Err(Error::Validation("checkpoint was written for a different catalog".into()));
            }
            if checkpoint.mu.len() != layout.n_columns() {
                return Err(Error::Validation("checkpoint does not match the catalog width".into()));
            }
            if checkpoint.config_hash != hash {
                log::warn!("resuming with a training configuration that differs from the checkpoint's");
            }
            Some(checkpoint.to_state()?)
        }
        None => None,
    };
    let rows: Vec<usize> = (0..design.n_rows()).collect();
    let fit = fit_ard(&design, &choices, &rows, &layout, &config, resume)?;

    let lambda_path = cli.output_dir.join("lambda.csv");
    let checkpoint_path = cli.output_dir.join("checkpoint.json");
    let trace_path = cli.output_dir.join("elbo_trace.csv");
    let summary_path = cli.output_dir.join("fit_ard.json");
    for p in [&lambda_path, &checkpoint_path, &trace_path, &summary_path] {
        manifest.output(p);
    }
    let snapshot_path = cli.output_dir.join("lambda_snapshots.csv");
    if !fit.trace.snapshots.is_empty() {
        manifest.output(&snapshot_path);
        let mut text = String::from("iteration,alternative,group,lambda\n");
        for (t, values) in &fit.trace.snapshots {
            for (g, v) in values.iter().enumerate() {
                let group = &catalog.groups[g];
                text.push_str(&format!(
                    "{t},{},{},{v}\n",
                    csv_field(&catalog.alternatives[group.alternative]),
                    csv_field(&group.label)
                ));
            }
        }
        write_text(&snapshot_path, &text)?;
    }

    write_lambda_csv(&lambda_table(&fit.lambda, &catalog, &config.selection), &lambda_path)?;
    let checkpoint = Checkpoint::from_state(&fit.state, &layout, hash, manifest.catalog_hash.clone());
    write_json(&checkpoint_path, &manifest, &checkpoint)?;
    write_text(&trace_path, &fit.trace.to_csv())?;
    let selected = select_variables(&fit.lambda, &layout, &config.selection);
    let summary = ArdSummary {
        iterations: fit.state.t,
        converged: fit.converged,
        smoothed_elbo: fit.state.smoothed,
        selected: TrueSpecification::from_groups(&selected, &catalog),
    };
    write_json(&summary_path, &manifest, &summary)?;
    write_manifest(&cli.output_dir, &manifest)?;

    println!("iterations: {}", summary.iterations);
    println!("converged: {}", summary.converged);
    if let Some(e) = summary.smoothed_elbo {
        println!("smoothed elbo: {e:.3}");
    }
    for (alt, groups) in &summary.selected.alternatives {
        println!("{alt}: {}", groups.join(", "));
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct MnlSummary<'a> {
    specification: &'a TrueSpecification,
    loglik: f64,
    iterations: usize,
    collinear: Vec<String>,
    split: Option<SplitInfo>,
    report: EvalReport,
}

#[derive(Serialize)]
struct SplitInfo {
    fraction: f64,
    train: usize,
    test: usize,
}

fn spec_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

fn cmd_fit_mnl(cli: &Cli, args: &FitMnlArgs) -> Result<()> {
    let mut manifest = RunManifest::new("fit-mnl", cli);
    manifest.config("specification", &args.spec)?;
    let catalog = load_catalog(&mut manifest, &args.catalog)?;
    let spec = TrueSpecification::from_json_file(&args.spec)?;
    let mask = spec.column_mask(&catalog)?;
    let (design, choices) = load_tensor(&mut manifest, &args.tensor, &catalog)?;
    let all: Vec<usize> = (0..design.n_rows()).collect();
    let split = match args.split {
        Some(fraction) => {
            let seed = cli.seed.unwrap_or(0);
            manifest.seeds.insert("split".into(), seed);
            Some((fraction, split_rows(design.n_rows(), fraction, seed)?))
        }
        None => None,
    };
    let fit_rows = split.as_ref().map_or(&all, |(_, s)| &s.train);
    let options = MleOptions {
        standard_errors: args.std_errors,
        ..Default::default()
    };
    let fit = fit_mle(&design, &choices, fit_rows, Some(&mask), &options)?;
    let collinear: Vec<String> = fit.collinear.iter().map(|&c| catalog.columns[c].label.clone()).collect();
    if !collinear.is_empty() {
        eprintln!(
            "warning: the specification is not identified; near-collinear columns: {}",
            collinear.join(", ")
        );
    }
    let report = match &split {
        Some((_, s)) => evaluate_split(&fit.coefficients, &design, &choices, &s.train, &s.test)?,
        None => evaluate(&fit.coefficients, &design, &choices, &all)?,
    };

    let coefficients_path = cli.output_dir.join("coefficients.csv");
    let summary_path = cli.output_dir.join("fit_mnl.json");
    manifest.output(&coefficients_path);
    manifest.output(&summary_path);
    let entries = coefficient_table(
        &fit.coefficients,
        &catalog,
        catalog.standardize,
        fit.standard_errors.as_deref(),
        false,
    )?;
    let entries: Vec<_> = entries
        .into_iter()
        .enumerate()
        .filter(|(c, _)| mask[*c])
        .map(|(_, e)| e)
        .collect();
    write_coefficients_csv(&entries, &coefficients_path)?;
    let summary = MnlSummary {
        specification: &spec,
        loglik: fit.loglik,
        iterations: fit.iterations,
        collinear,
        split: split.as_ref().map(|(fraction, s)| SplitInfo {
            fraction: *fraction,
            train: s.train.len(),
            test: s.test.len(),
        }),
        report: report.clone(),
    };
    write_json(&summary_path, &manifest, &summary)?;
    write_manifest(&cli.output_dir, &manifest)?;
    print!("{}", format_table(&[(spec_name(&args.spec), report)]));
    Ok(())
}

#[derive(Serialize)]
struct NamedReport {
    name: String,
    report: EvalReport,
}

#[derive(Serialize)]
struct EvaluationOutput {
    reports: Vec<NamedReport>,
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("evaluate", cli);
    let catalog = load_catalog(&mut manifest, &args.catalog)?;
    let (design, choices) = load_tensor(&mut manifest, &args.tensor, &catalog)?;
    let all: Vec<usize> = (0..design.n_rows()).collect();
    let split = match args.split {
        Some(fraction) => {
            let seed = cli.seed.unwrap_or(0);
            manifest.seeds.insert("split".into(), seed);
            Some(split_rows(design.n_rows(), fraction, seed)?)
        }
        None => None,
    };
    let mut reports = Vec::new();
    for (i, path) in args.coefficients.iter().enumerate() {
        manifest.input(&format!("coefficients[{i}]"), path)?;
        let beta = coefficients_from_table(&read_coefficients_csv(path)?, &catalog)?;
        let report = match &split {
            Some(s) => evaluate_split(&beta, &design, &choices, &s.train, &s.test)?,
            None => evaluate(&beta, &design, &choices, &all)?,
        };
        reports.push(NamedReport {
            name: spec_name(path),
            report,
        });
    }
    let out_path = cli.output_dir.join("evaluation.json");
    manifest.output(&out_path);
    let table: Vec<(String, EvalReport)> = reports.iter().map(|r| (r.name.clone(), r.report.clone())).collect();
    write_json(&out_path, &manifest, &EvaluationOutput { reports })?;
    write_manifest(&cli.output_dir, &manifest)?;
    print!("{}", format_table(&table));
    Ok(())
}

#[derive(Serialize)]
struct ReportOutput {
    selected: BTreeMap<String, Vec<String>>,
    recovery: Option<RecoveryReport>,
}

/// Recovery from the λ report's selection flags, matched by group label.
fn label_recovery(rows: &[LambdaRow], truth: &TrueSpecification) -> Result<RecoveryReport> {
    let mut alternatives: Vec<String> = Vec::new();
    let mut known: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for row in rows {
        if !alternatives.contains(&row.alternative) {
            alternatives.push(row.alternative.clone());
        }
        known.entry(&row.alternative).or_default().insert(&row.group);
    }
    for (alt, labels) in &truth.alternatives {
        let groups = known
            .get(alt.as_str())
            .ok_or_else(|| Error::Argument(format!("truth names unknown alternative `{alt}`")))?;
        if let Some(missing) = labels.iter().find(|l| !groups.contains(l.as_str())) {
            return Err(Error::Argument(format!("truth group `{missing}` of `{alt}` is not in the λ report")));
        }
    }
    let alternatives: Vec<AlternativeRecovery> = alternatives
        .into_iter()
        .map(|alt| {
            let selected: Vec<String> = rows
                .iter()
                .filter(|r| r.alternative == alt && r.selected)
                .map(|r| r.group.clone())
                .collect();
            let truth = truth.alternatives.get(&alt).cloned().unwrap_or_default();
            let hits = selected.iter().filter(|g| truth.contains(g)).count() as f64;
            let precision = if selected.is_empty() { 1.0 } else { hits / selected.len() as f64 };
            let recall = if truth.is_empty() { 1.0 } else { hits / truth.len() as f64 };
            AlternativeRecovery {
                alternative: alt,
                truth,
                selected,
                exact: precision == 1.0 && recall == 1.0,
                precision,
                recall,
            }
        })
        .collect();
    Ok(RecoveryReport {
        exact: alternatives.iter().all(|a| a.exact),
        alternatives,
    })
}

fn cmd_report(cli: &Cli, args: &ReportArgs) -> Result<()> {
    let mut manifest = RunManifest::new("report", cli);
    manifest.input("lambda", &args.lambda)?;
    let rows = read_lambda_csv(&args.lambda)?;
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 0,
            message: "λ report has no rows".into(),
        });
    }
    let recovery = match &args.truth {
        Some(path) => {
            manifest.config("truth", path)?;
            Some(label_recovery(&rows, &TrueSpecification::from_json_file(path)?)?)
        }
        None => None,
    };

    let mut max: BTreeMap<&str, f64> = BTreeMap::new();
    let mut selected: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for row in &rows {
        let m = max.entry(&row.alternative).or_insert(0.0);
        *m = m.max(row.lambda);
        let entry = selected.entry(row.alternative.clone()).or_default();
        if row.selected {
            entry.push(row.group.clone());
        }
    }
    let mut bars = String::from("alternative,group,rank,lambda,relative,selected\n");
    for row in &rows {
        let top = max[row.alternative.as_str()];
        let relative = if top > 0.0 { row.lambda / top } else { 0.0 };
        bars.push_str(&format!(
            "{},{},{},{},{relative},{}\n",
            csv_field(&row.alternative),
            csv_field(&row.group),
            row.rank,
            row.lambda,
            row.selected
        ));
    }

    let bars_path = cli.output_dir.join("lambda_bars.csv");
    let report_path = cli.output_dir.join("report.json");
    manifest.output(&bars_path);
    manifest.output(&report_path);
    write_text(&bars_path, &bars)?;
    let output = ReportOutput { selected, recovery };
    write_json(&report_path, &manifest, &output)?;
    write_manifest(&cli.output_dir, &manifest)?;

    for (alt, groups) in &output.selected {
        println!("{alt}: {}", groups.join(", "));
    }
    if let Some(r) = &output.recovery {
        for a in &r.alternatives {
            println!(
                "{}: exact {} precision {:.3} recall {:.3}",
                a.alternative, a.exact, a.precision, a.recall
            );
        }
        println!("exact match: {}", r.exact);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Argument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.output_dir).map_err(|e| Error::io(&cli.output_dir, e))?;
    match &cli.command {
        Command::Expand(a) => cmd_expand(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::FitArd(a) => cmd_fit_ard(cli, a),
        Command::FitMnl(a) => cmd_fit_mnl(cli, a),
        Command::Evaluate(a) => cmd_evaluate(cli, a),
        Command::Report(a) => cmd_report(cli, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARD_CHOICE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
