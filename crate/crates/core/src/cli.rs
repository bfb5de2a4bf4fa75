//! Command-line pipeline: generate / ingest / score / evaluate.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical non-convergence
//! (results are still written). Every emitted result file carries `# key:
//! value` comments referencing the run hash and the bundle content hash
//! that produced it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bundle::{
    self, load_bundle, score_file_name, write_bundle, write_scores_csv, Dataset, Manifest,
};
use crate::error::{Error, Result};
use crate::eval::{
    correlation_matrix, goodness_of_fit, partition_by_attitude, pearson, CorrelationMatrix,
    CorrelationMethod, ExpectedShareModel, GofResult,
};
use crate::granularity::build_level_matrix;
use crate::graph::{pagerank, score_psc, score_psna, Centrality};
use crate::irt::{
    fit_2pl, fit_grm, irt_visibility, item_characteristic_curve, logistic_visibility, score_psgi,
    score_psi, Fit2pl, FitConfig, FitGrm,
};
use crate::matrix::{GranularityLevelMatrix, ModelKind, ResponseMatrix, ScoreVector};
use crate::naive::{naive_graded_sensitivity, naive_sensitivity, score_psgn, score_psn_with, VisibilityForm};
use crate::synth::{generate_dataset, GenConfig};

/// Reference metrics of a comparable real-world professional network,
/// displayed (never asserted) beside computed graph statistics.
const REFERENCE_NODES: usize = 5389;
const REFERENCE_EDGES: usize = 40009;
const REFERENCE_CLUSTERING: f64 = 0.0722;
const REFERENCE_DIAMETER: usize = 4;
const REFERENCE_AVG_PATH: f64 = 2.34;

#[derive(Parser)]
#[command(
    name = "privscore",
    version,
    about = "Privacy-risk scoring toolkit for online social network data"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset bundle from a TOML config.
    Generate(GenerateArgs),
    /// Validate raw CSV files and import them into a bundle directory.
    Ingest(IngestArgs),
    /// Compute privacy scores for a bundle.
    Score(ScoreArgs),
    /// Compare scoring models: goodness of fit, correlations, curves.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Edge list CSV (source,target).
    #[arg(long)]
    edges: PathBuf,
    /// Byte-count CSV (user_id,item_id,bytes).
    #[arg(long, conflicts_with = "responses")]
    granularity: Option<PathBuf>,
    /// Share-flag CSV (user_id,item_id,shared).
    #[arg(long)]
    responses: Option<PathBuf>,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct FitFlags {
    /// Gauss-Hermite nodes for the latent prior.
    #[arg(long, default_value_t = 21)]
    quad_nodes: usize,
    /// Convergence threshold on the max parameter change.
    #[arg(long, default_value_t = 1e-4)]
    fit_tol: f64,
    #[arg(long, default_value_t = 500)]
    fit_max_iter: usize,
    /// Lower bound on fitted discriminations.
    #[arg(long, default_value_t = 0.05)]
    alpha_min: f64,
    /// Upper bound on fitted discriminations.
    #[arg(long, default_value_t = 10.0)]
    alpha_max: f64,
    /// Seed for fit initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FitFlags {
    fn config(&self) -> FitConfig {
        FitConfig {
            quad_points: self.quad_nodes,
            tolerance: self.fit_tol,
            max_iterations: self.fit_max_iter,
            alpha_min: self.alpha_min,
            alpha_max: self.alpha_max,
            seed: self.seed,
        }
    }

    fn flag_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("quad_nodes".into(), self.quad_nodes.to_string()),
            ("fit_tol".into(), self.fit_tol.to_string()),
            ("fit_max_iter".into(), self.fit_max_iter.to_string()),
            ("alpha_min".into(), self.alpha_min.to_string()),
            ("alpha_max".into(), self.alpha_max.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

#[derive(Args)]
struct ScoreArgs {
    /// Bundle directory to score.
    #[arg(long)]
    bundle: PathBuf,
    /// Output directory for score files.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated models: psn, psi, psgn, psgi, psc[:prc|evc|cc|bc],
    /// psna.
    #[arg(long, default_value = "psn,psi,psgn,psgi,psc,psna")]
    models: String,
    /// Centrality bare `psc` expands to: all, prc, evc, cc, or bc.
    #[arg(long, default_value = "all")]
    centrality: String,
    /// Damping factor for PageRank-style fixed points.
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    /// Maximum granularity level.
    #[arg(long, default_value_t = 3)]
    levels: u8,
    /// Intrinsic score feeding the network-aware propagation.
    #[arg(long, default_value = "psi")]
    intrinsic: String,
    /// Rescale betweenness by the unordered pair count (n-1)(n-2)/2.
    #[arg(long)]
    normalized_bc: bool,
    /// Use the legacy swapped-denominator visibility form.
    #[arg(long)]
    compat_eq33: bool,
    #[command(flatten)]
    fit: FitFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Bundle directory the scores were computed from.
    #[arg(long)]
    bundle: PathBuf,
    /// Directory holding scores_*.csv files.
    #[arg(long)]
    scores: PathBuf,
    /// Output directory for reports.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated group counts for the goodness-of-fit tests.
    #[arg(long, default_value = "3,4,6,8,10,12,14")]
    k_groups: String,
    /// Significance level for hypothesis acceptance.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also emit Spearman rank correlations.
    #[arg(long)]
    spearman: bool,
    /// Damping factor for the PageRank column of the correlation report.
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    /// Maximum granularity level.
    #[arg(long, default_value_t = 3)]
    levels: u8,
    /// Use the legacy swapped-denominator visibility form for PSN.
    #[arg(long)]
    compat_eq33: bool,
    #[command(flatten)]
    fit: FitFlags,
}

/// Entry point used by the binary.
pub fn main() -> i32 {
    run(std::env::args())
}

/// Entry point usable from tests with explicit arguments.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return 1;
        }
    };
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Ingest(args) => cmd_ingest(&args),
        Command::Score(args) => cmd_score(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<i32> {
    let raw = std::fs::read_to_string(&args.config)
        .map_err(|_| Error::MissingFile(args.config.clone()))?;
    let config: GenConfig =
        toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    config.validate()?;
    let dataset = generate_dataset(&config)?;
    let in_memory = Dataset {
        catalog: dataset.granularity.catalog_arc(),
        registry: dataset.granularity.registry_arc(),
        responses: ResponseMatrix::from_granularity(&dataset.granularity),
        granularity: Some(dataset.granularity.clone()),
        graph: dataset.graph.clone(),
    };
    let manifest = write_bundle(
        &in_memory,
        &args.out,
        "generate",
        Some(config.seed),
        Some(&dataset.truth),
    )?;
    println!(
        "generated bundle {} (users {}, items {}, edges {}, seed {})",
        args.out.display(),
        in_memory.registry.len(),
        in_memory.catalog.len(),
        in_memory.graph.edge_count(),
        config.seed
    );
    println!("content hash {}", manifest.content_hash);
    Ok(0)
}

fn cmd_ingest(args: &IngestArgs) -> Result<i32> {
    let (dataset, report) = bundle::ingest(
        &args.edges,
        args.granularity.as_deref(),
        args.responses.as_deref(),
    )?;
    for warning in report.warnings() {
        eprintln!("warning: {warning}");
    }
    let manifest = write_bundle(&dataset, &args.out, "ingest", None, None)?;
    println!(
        "ingested {} users, {} items, {} edges into {}",
        dataset.registry.len(),
        dataset.catalog.len(),
        dataset.graph.edge_count(),
        args.out.display()
    );
    println!("content hash {}", manifest.content_hash);
    Ok(0)
}

/// Expands the --models list into concrete model kinds, keeping the
/// canonical order and deduplicating.
fn parse_models(models: &str, centrality: &str) -> Result<Vec<ModelKind>> {
    let mut requested: Vec<ModelKind> = Vec::new();
    for token in models.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        if token.eq_ignore_ascii_case("psc") {
            if centrality.eq_ignore_ascii_case("all") {
                for method in Centrality::ALL {
                    requested.push(method.model_kind());
                }
            } else {
                requested.push(centrality.parse::<Centrality>()?.model_kind());
            }
        } else {
            requested.push(token.parse()?);
        }
    }
    if requested.is_empty() {
        return Err(Error::Config("no models requested".into()));
    }
    let mut out = Vec::new();
    for kind in ModelKind::ALL {
        if requested.contains(&kind) && !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(out)
}

fn require_graph(dataset: &Dataset, model: ModelKind) -> Result<()> {
    if dataset.graph.edge_count() == 0 {
        return Err(Error::GraphRequired(model.label().to_string()));
    }
    Ok(())
}

fn require_granularity(
    dataset: &Dataset,
    model: ModelKind,
) -> Result<&crate::matrix::GranularityMatrix> {
    dataset.granularity.as_ref().ok_or_else(|| {
        Error::Config(format!(
            "model {} requires granularity data, but the bundle only has responses",
            model.label()
        ))
    })
}

/// Lazily computed intermediate products shared between models.
struct ScoreContext<'a> {
    dataset: &'a Dataset,
    config: FitConfig,
    levels: u8,
    form: VisibilityForm,
    glm: Option<GranularityLevelMatrix>,
    fit2: Option<Fit2pl>,
    fit_grm: Option<FitGrm>,
}

impl<'a> ScoreContext<'a> {
    fn new(dataset: &'a Dataset, config: FitConfig, levels: u8, form: VisibilityForm) -> Self {
        Self {
            dataset,
            config,
            levels,
            form,
            glm: None,
            fit2: None,
            fit_grm: None,
        }
    }

    fn glm(&mut self, model: ModelKind) -> Result<&GranularityLevelMatrix> {
        if self.glm.is_none() {
            let gm = require_granularity(self.dataset, model)?;
            let (glm, _) = build_level_matrix(gm, self.levels)?;
            self.glm = Some(glm);
        }
        Ok(self.glm.as_ref().unwrap())
    }

    fn fit2(&mut self) -> Result<&Fit2pl> {
        if self.fit2.is_none() {
            self.fit2 = Some(fit_2pl(&self.dataset.responses, &self.config)?);
        }
        Ok(self.fit2.as_ref().unwrap())
    }

    fn fit_grm(&mut self, model: ModelKind) -> Result<&FitGrm> {
        if self.fit_grm.is_none() {
            let glm = self.glm(model)?.clone();
            self.fit_grm = Some(fit_grm(&glm, &self.config)?);
        }
        Ok(self.fit_grm.as_ref().unwrap())
    }

    fn intrinsic(&mut self, kind: ModelKind) -> Result<ScoreVector> {
        match kind {
            ModelKind::Psn => Ok(score_psn_with(&self.dataset.responses, self.form)),
            ModelKind::Psi => {
                let fit = self.fit2()?;
                score_psi(&fit.params, &fit.abilities)
            }
            ModelKind::Psgn => {
                let glm = self.glm(ModelKind::Psgn)?;
                score_psgn(glm)
            }
            ModelKind::Psgi => {
                let fit = self.fit_grm(ModelKind::Psgi)?;
                score_psgi(&fit.params, &fit.abilities)
            }
            other => Err(Error::Config(format!(
                "model {} cannot serve as the intrinsic score",
                other.label()
            ))),
        }
    }
}

/// Shifts negative intrinsic scores up to zero, which the propagation
/// requires; the range is unchanged.
fn non_negative_intrinsic(rho: &ScoreVector) -> (ScoreVector, bool) {
    let lo = rho.values().iter().cloned().fold(f64::INFINITY, f64::min);
    if lo >= 0.0 {
        return (rho.clone(), false);
    }
    let shifted: Vec<f64> = rho.values().iter().map(|v| v - lo).collect();
    (
        ScoreVector::new(rho.registry_arc(), rho.model(), shifted)
            .expect("shifted scores stay finite"),
        true,
    )
}

#[derive(serde::Serialize)]
struct RunManifest {
    artifact_version: String,
    command: String,
    created_unix: u64,
    bundle_hash: String,
    run_hash: String,
    flags: Vec<(String, String)>,
    outputs: Vec<String>,
}

fn write_run_manifest(
    out_dir: &Path,
    command: &str,
    manifest: &Manifest,
    flags: &[(String, String)],
    outputs: &[String],
) -> Result<String> {
    let run_hash = bundle::run_hash(command, &manifest.content_hash, flags);
    let record = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        created_unix: bundle::created_unix_now(),
        bundle_hash: manifest.content_hash.clone(),
        run_hash: run_hash.clone(),
        flags: flags.to_vec(),
        outputs: outputs.to_vec(),
    };
    std::fs::write(
        out_dir.join("run_manifest.json"),
        serde_json::to_string_pretty(&record)? + "\n",
    )?;
    Ok(run_hash)
}

#[derive(serde::Serialize)]
struct FitDiagnostics {
    model: String,
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
    excluded_items: Vec<(String, String)>,
    items: Vec<FitItemDiagnostics>,
    attitude_method: String,
}

#[derive(serde::Serialize)]
struct FitItemDiagnostics {
    item_id: String,
    alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    thresholds: Vec<(u8, f64)>,
}

fn cmd_score(args: &ScoreArgs) -> Result<i32> {
    let (dataset, manifest) = load_bundle(&args.bundle)?;
    let models = parse_models(&args.models, &args.centrality)?;
    if !(0.0..1.0).contains(&args.damping) {
        return Err(Error::BadDamping(args.damping));
    }
    let intrinsic_kind: ModelKind = args.intrinsic.parse()?;
    let form = if args.compat_eq33 {
        VisibilityForm::LegacySwapped
    } else {
        VisibilityForm::Standard
    };
    std::fs::create_dir_all(&args.out)?;

    let mut flags = vec![
        ("models".into(), args.models.clone()),
        ("centrality".into(), args.centrality.clone()),
        ("damping".into(), args.damping.to_string()),
        ("levels".into(), args.levels.to_string()),
        ("intrinsic".into(), args.intrinsic.clone()),
        ("normalized_bc".into(), args.normalized_bc.to_string()),
        ("compat_eq33".into(), args.compat_eq33.to_string()),
    ];
    flags.extend(args.fit.flag_pairs());
    let run_hash = bundle::run_hash("score", &manifest.content_hash, &flags);

    let mut context = ScoreContext::new(&dataset, args.fit.config(), args.levels, form);
    let mut outputs: Vec<String> = Vec::new();
    let mut all_converged = true;

    for model in &models {
        let mut metadata = vec![
            ("manifest".to_string(), run_hash.clone()),
            ("bundle".to_string(), manifest.content_hash.clone()),
            ("model".to_string(), model.label().to_string()),
        ];
        if args.compat_eq33 {
            metadata.push(("compat_eq33".into(), "true".into()));
        }
        let scores = match model {
            ModelKind::Psn | ModelKind::Psi | ModelKind::Psgn | ModelKind::Psgi => {
                let scores = context.intrinsic(*model)?;
                match model {
                    ModelKind::Psi => {
                        let report = &context.fit2()?.report;
                        all_converged &= report.converged;
                        metadata.push(("converged".into(), report.converged.to_string()));
                    }
                    ModelKind::Psgi => {
                        let report = &context.fit_grm(*model)?.report;
                        all_converged &= report.converged;
                        metadata.push(("converged".into(), report.converged.to_string()));
                    }
                    _ => {}
                }
                scores
            }
            ModelKind::PscPrc | ModelKind::PscEvc | ModelKind::PscCc | ModelKind::PscBc => {
                require_graph(&dataset, *model)?;
                let method = match model {
                    ModelKind::PscPrc => Centrality::PageRank,
                    ModelKind::PscEvc => Centrality::Eigenvector,
                    ModelKind::PscCc => Centrality::Closeness,
                    _ => Centrality::Betweenness,
                };
                if *model == ModelKind::PscPrc {
                    metadata.push(("damping".into(), args.damping.to_string()));
                }
                if *model == ModelKind::PscBc && args.normalized_bc {
                    metadata.push(("normalized".into(), "true".into()));
                    ScoreVector::new(
                        dataset.graph.registry_arc(),
                        ModelKind::PscBc,
                        crate::graph::betweenness_centrality_normalized(&dataset.graph),
                    )?
                } else {
                    score_psc(&dataset.graph, method, args.damping)?
                }
            }
            ModelKind::Psna => {
                require_graph(&dataset, *model)?;
                let rho = context.intrinsic(intrinsic_kind)?;
                let (rho, shifted) = non_negative_intrinsic(&rho);
                if shifted {
                    eprintln!(
                        "warning: intrinsic {} contains negatives; shifted to zero minimum \
                         before propagation",
                        intrinsic_kind.label()
                    );
                }
                metadata.push(("damping".into(), args.damping.to_string()));
                metadata.push(("intrinsic".into(), intrinsic_kind.label().to_string()));
                let (scores, converged) =
                    score_psna(&dataset.graph, &rho, args.damping, 1e-12, 100_000)?;
                all_converged &= converged;
                scores
            }
        };
        let file = score_file_name(*model);
        write_scores_csv(&args.out.join(&file), &scores, &metadata)?;
        outputs.push(file.display().to_string());
    }

    // Fit diagnostics for the latent-trait models actually fitted.
    if let Some(fit) = &context.fit2 {
        let diag = FitDiagnostics {
            model: "PSI".into(),
            log_likelihood: fit.report.log_likelihood,
            iterations: fit.report.iterations,
            converged: fit.report.converged,
            excluded_items: fit
                .params
                .excluded
                .iter()
                .map(|e| (dataset.catalog.id(e.item).to_string(), e.reason.clone()))
                .collect(),
            items: (0..dataset.catalog.len())
                .filter(|&i| fit.params.is_fitted(i))
                .map(|i| FitItemDiagnostics {
                    item_id: dataset.catalog.id(i).to_string(),
                    alpha: fit.params.alpha[i],
                    beta: Some(fit.params.beta[i]),
                    thresholds: Vec::new(),
                })
                .collect(),
            attitude_method: fit.abilities.method().to_string(),
        };
        std::fs::write(
            args.out.join("fit_psi.json"),
            serde_json::to_string_pretty(&diag)? + "\n",
        )?;
        outputs.push("fit_psi.json".into());
    }
    if let Some(fit) = &context.fit_grm {
        let diag = FitDiagnostics {
            model: "PSGI".into(),
            log_likelihood: fit.report.log_likelihood,
            iterations: fit.report.iterations,
            converged: fit.report.converged,
            excluded_items: fit
                .params
                .excluded
                .iter()
                .map(|e| (dataset.catalog.id(e.item).to_string(), e.reason.clone()))
                .collect(),
            items: (0..dataset.catalog.len())
                .filter(|&i| fit.params.is_fitted(i))
                .map(|i| FitItemDiagnostics {
                    item_id: dataset.catalog.id(i).to_string(),
                    alpha: fit.params.alpha[i],
                    beta: None,
                    thresholds: fit.params.thresholds[i]
                        .iter()
                        .map(|t| (t.level, t.beta))
                        .collect(),
                })
                .collect(),
            attitude_method: fit.abilities.method().to_string(),
        };
        std::fs::write(
            args.out.join("fit_psgi.json"),
            serde_json::to_string_pretty(&diag)? + "\n",
        )?;
        outputs.push("fit_psgi.json".into());
    }

    write_run_manifest(&args.out, "score", &manifest, &flags, &outputs)?;
    for file in &outputs {
        println!("wrote {}", args.out.join(file).display());
    }
    Ok(if all_converged { 0 } else { 2 })
}

/// Cumulative share probability P(level >= k) per (item, user) under the
/// graded fit; items without a threshold at or above `k` contribute zero.
fn grm_cumulative_visibility(fit: &FitGrm, level: u8, n_users: usize) -> Vec<f64> {
    let params = &fit.params;
    let theta = fit.abilities.values();
    let mut out = vec![0.0; params.item_count() * n_users];
    for i in 0..params.item_count() {
        let threshold = params.thresholds[i].iter().find(|t| t.level >= level);
        if let Some(threshold) = threshold {
            for (j, &t) in theta.iter().enumerate() {
                out[i * n_users + j] = logistic_visibility(params.alpha[i], threshold.beta, t);
            }
        }
    }
    out
}

/// Level-indicator response matrix: cell 1 when the level is at least `k`.
fn level_indicator_matrix(glm: &GranularityLevelMatrix, level: u8) -> ResponseMatrix {
    let cells: Vec<u8> = glm.cells().iter().map(|&c| u8::from(c >= level)).collect();
    ResponseMatrix::new(glm.catalog_arc(), glm.registry_arc(), cells)
        .expect("indicator cells are binary")
}

struct GofBlock {
    model: ModelKind,
    k: usize,
    /// Granularity level the test dichotomized at; zero for policy models.
    level: u8,
    results: Vec<GofResult>,
}

fn gof_accepted(results: &[GofResult]) -> usize {
    results.iter().filter(|r| r.accepted).count()
}

fn format_correlation_csv(matrix: &CorrelationMatrix, header_comments: &str) -> String {
    let mut out = String::from(header_comments);
    out.push_str("model");
    for label in &matrix.labels {
        let _ = write!(out, ",{label}");
    }
    out.push('\n');
    for (row, label) in matrix.labels.iter().enumerate() {
        let _ = write!(out, "{label}");
        for col in 0..matrix.size() {
            match matrix.cell(row, col) {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let (dataset, manifest) = load_bundle(&args.bundle)?;
    if !(0.0..1.0).contains(&args.damping) {
        return Err(Error::BadDamping(args.damping));
    }
    let k_list: Vec<usize> = args
        .k_groups
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid group count {t:?}")))
        })
        .collect::<Result<_>>()?;
    if k_list.is_empty() {
        return Err(Error::Config("no group counts given".into()));
    }
    std::fs::create_dir_all(&args.out)?;

    let mut flags = vec![
        ("k_groups".into(), args.k_groups.clone()),
        ("alpha".into(), args.alpha.to_string()),
        ("spearman".into(), args.spearman.to_string()),
        ("damping".into(), args.damping.to_string()),
        ("levels".into(), args.levels.to_string()),
        ("compat_eq33".into(), args.compat_eq33.to_string()),
    ];
    flags.extend(args.fit.flag_pairs());
    let run_hash = bundle::run_hash("evaluate", &manifest.content_hash, &flags);
    let comments = format!(
        "# manifest: {run_hash}\n# bundle: {}\n",
        manifest.content_hash
    );

    // Score files present in the scores directory, canonical model order.
    let mut available: Vec<(ModelKind, Vec<f64>)> = Vec::new();
    for kind in ModelKind::ALL {
        let path = args.scores.join(score_file_name(kind));
        if !path.exists() {
            continue;
        }
        let (_, rows) = bundle::read_scores_csv(&path)?;
        if rows.len() != dataset.registry.len() {
            return Err(Error::Config(format!(
                "{}: expected {} users, found {}",
                path.display(),
                dataset.registry.len(),
                rows.len()
            )));
        }
        let mut values = vec![0.0; rows.len()];
        for (user, score) in rows {
            let j = dataset.registry.index_of(&user).ok_or_else(|| {
                Error::Config(format!("{}: unknown user {user:?}", path.display()))
            })?;
            values[j] = score;
        }
        available.push((kind, values));
    }
    if available.is_empty() {
        return Err(Error::MissingFile(
            args.scores.join(score_file_name(ModelKind::Psn)),
        ));
    }

    let config = args.fit.config();
    let form = if args.compat_eq33 {
        VisibilityForm::LegacySwapped
    } else {
        VisibilityForm::Standard
    };
    let responses = &dataset.responses;
    let n_users = responses.user_count();

    // Policy-model ingredients.
    let fit2 = fit_2pl(responses, &config)?;
    let visibility_2pl = irt_visibility(&fit2.params, &fit2.abilities);
    let share_counts: Vec<f64> = responses
        .column_share_counts()
        .iter()
        .map(|&c| c as f64)
        .collect();

    // Granularity-model ingredients, when byte data exists.
    let granularity_parts = match &dataset.granularity {
        Some(gm) => {
            let (glm, _) = build_level_matrix(gm, args.levels)?;
            let fit = fit_grm(&glm, &config)?;
            let level_sums: Vec<f64> = (0..n_users)
                .map(|j| {
                    (0..glm.item_count())
                        .map(|i| glm.cell(i, j) as f64)
                        .sum()
                })
                .collect();
            Some((glm, fit, level_sums))
        }
        None => None,
    };

    let mut converged = fit2.report.converged;
    if let Some((_, fit, _)) = &granularity_parts {
        converged &= fit.report.converged;
    }

    // Goodness-of-fit blocks per model and group count.
    let mut blocks: Vec<GofBlock> = Vec::new();
    for &k in &k_list {
        let naive_partition = partition_by_attitude(&share_counts, k)?;
        let irt_partition = partition_by_attitude(fit2.abilities.values(), k)?;
        blocks.push(GofBlock {
            model: ModelKind::Psn,
            k,
            level: 0,
            results: goodness_of_fit(responses, &ExpectedShareModel::Naive, &naive_partition, args.alpha)?,
        });
        let psi_results = goodness_of_fit(
            responses,
            &ExpectedShareModel::Irt {
                visibility: &visibility_2pl,
            },
            &irt_partition,
            args.alpha,
        )?;
        // Items the 2PL could not fit are not testable under it.
        let psi_results: Vec<GofResult> = psi_results
            .into_iter()
            .filter(|r| fit2.params.is_fitted(r.item))
            .collect();
        blocks.push(GofBlock {
            model: ModelKind::Psi,
            k,
            level: 0,
            results: psi_results,
        });

        if let Some((glm, fit, level_sums)) = &granularity_parts {
            let naive_partition = partition_by_attitude(level_sums, k)?;
            let irt_partition = partition_by_attitude(fit.abilities.values(), k)?;
            for level in 1..=glm.max_level() {
                let indicator = level_indicator_matrix(glm, level);
                blocks.push(GofBlock {
                    model: ModelKind::Psgn,
                    k,
                    level,
                    results: goodness_of_fit(
                        &indicator,
                        &ExpectedShareModel::Naive,
                        &naive_partition,
                        args.alpha,
                    )?,
                });
                let visibility = grm_cumulative_visibility(fit, level, n_users);
                let results = goodness_of_fit(
                    &indicator,
                    &ExpectedShareModel::Irt {
                        visibility: &visibility,
                    },
                    &irt_partition,
                    args.alpha,
                )?
                .into_iter()
                .filter(|r| fit.params.is_fitted(r.item))
                .collect();
                blocks.push(GofBlock {
                    model: ModelKind::Psgi,
                    k,
                    level,
                    results,
                });
            }
        }
    }

    // gof.csv: one row per (model, k, level, item).
    let mut gof_csv = comments.clone();
    gof_csv.push_str("model,k_groups,level,item_id,chi_square,degrees_of_freedom,p_value,accepted,guarded\n");
    for block in &blocks {
        for r in &block.results {
            let _ = writeln!(
                gof_csv,
                "{},{},{},{},{},{},{},{},{}",
                block.model.label(),
                block.k,
                block.level,
                dataset.catalog.id(r.item),
                r.chi_square,
                r.degrees_of_freedom,
                r.p_value,
                u8::from(r.accepted),
                u8::from(r.guarded)
            );
        }
    }
    std::fs::write(args.out.join("gof.csv"), gof_csv)?;

    // gof_summary.csv: accepted / tested counts per model and k, levels
    // pooled for the granularity models.
    let mut summary_rows: BTreeMap<(usize, &'static str), (usize, usize)> = BTreeMap::new();
    for block in &blocks {
        let entry = summary_rows
            .entry((block.k, block.model.label()))
            .or_insert((0, 0));
        entry.0 += gof_accepted(&block.results);
        entry.1 += block.results.len();
    }
    let mut gof_summary = comments.clone();
    gof_summary.push_str("k_groups,model,accepted,tested\n");
    for ((k, model), (accepted, tested)) in &summary_rows {
        let _ = writeln!(gof_summary, "{k},{model},{accepted},{tested}");
    }
    std::fs::write(args.out.join("gof_summary.csv"), gof_summary)?;

    // Correlation matrices over the available score files.
    let labeled: Vec<(String, &[f64])> = available
        .iter()
        .map(|(kind, values)| (kind.label().to_string(), values.as_slice()))
        .collect();
    let pearson_matrix = correlation_matrix(&labeled, CorrelationMethod::Pearson)?;
    std::fs::write(
        args.out.join("correlations.csv"),
        format_correlation_csv(&pearson_matrix, &comments),
    )?;
    if args.spearman {
        let spearman_matrix = correlation_matrix(&labeled, CorrelationMethod::Spearman)?;
        std::fs::write(
            args.out.join("correlations_spearman.csv"),
            format_correlation_csv(&spearman_matrix, &comments),
        )?;
    }

    // Item sensitivity comparison, policy models.
    let beta_naive = naive_sensitivity(responses);
    let mut sensitivities = comments.clone();
    sensitivities.push_str("item_id,beta_naive,alpha_irt,beta_irt\n");
    for i in 0..dataset.catalog.len() {
        let _ = write!(sensitivities, "{},{}", dataset.catalog.id(i), beta_naive[i]);
        if fit2.params.is_fitted(i) {
            let _ = writeln!(
                sensitivities,
                ",{},{}",
                fit2.params.alpha[i], fit2.params.beta[i]
            );
        } else {
            sensitivities.push_str(",,\n");
        }
    }
    std::fs::write(args.out.join("sensitivities.csv"), sensitivities)?;

    // Per-level sensitivity comparison and characteristic curves for the
    // granularity models.
    if let Some((glm, fit, _)) = &granularity_parts {
        let graded_naive = naive_graded_sensitivity(glm);
        let stride = glm.max_level() as usize + 1;
        let mut graded = comments.clone();
        graded.push_str("item_id,level,beta_naive,beta_irt\n");
        for i in 0..dataset.catalog.len() {
            for k in 1..=glm.max_level() {
                let _ = write!(
                    graded,
                    "{},{},{}",
                    dataset.catalog.id(i),
                    k,
                    graded_naive[i * stride + k as usize]
                );
                match fit.params.thresholds[i].iter().find(|t| t.level == k) {
                    Some(t) => {
                        let _ = writeln!(graded, ",{}", t.beta);
                    }
                    None => graded.push_str(",\n"),
                }
            }
        }
        std::fs::write(args.out.join("sensitivities_granularity.csv"), graded)?;

        let mut curves = comments.clone();
        curves.push_str("item_id,level,theta,probability\n");
        let grid: Vec<f64> = (-40..=40).map(|t| t as f64 / 10.0).collect();
        for i in 0..dataset.catalog.len() {
            for threshold in &fit.params.thresholds[i] {
                let curve = item_characteristic_curve(&fit.params, i, threshold.level, &grid)?;
                for (t, p) in grid.iter().zip(&curve) {
                    let _ = writeln!(
                        curves,
                        "{},{},{},{}",
                        dataset.catalog.id(i),
                        threshold.level,
                        t,
                        p
                    );
                }
            }
        }
        std::fs::write(args.out.join("curves.csv"), curves)?;
    }

    // Damping sweep: correlation of the policy scores with PageRank across
    // the damping grid.
    let has_graph = dataset.graph.edge_count() > 0;
    if has_graph {
        let psn = score_psn_with(responses, form);
        let psi = score_psi(&fit2.params, &fit2.abilities)?;
        let mut sweep = comments.clone();
        sweep.push_str("damping,pearson_psn_prc,pearson_psi_prc\n");
        for step in 0..10 {
            let damping = (5 + 10 * step) as f64 / 100.0;
            let prc = pagerank(&dataset.graph, damping, 1e-10, 10_000)?;
            converged &= prc.converged;
            let _ = write!(sweep, "{damping}");
            match pearson(psn.values(), &prc.values) {
                Ok(r) => {
                    let _ = write!(sweep, ",{r}");
                }
                Err(_) => sweep.push(','),
            }
            match pearson(psi.values(), &prc.values) {
                Ok(r) => {
                    let _ = writeln!(sweep, ",{r}");
                }
                Err(_) => sweep.push_str(",\n"),
            }
        }
        std::fs::write(args.out.join("damping_sweep.csv"), sweep)?;
    }

    // Human-readable summary.
    let stats = crate::graph::graph_stats(&dataset.graph);
    let mut summary = String::new();
    let _ = writeln!(summary, "privscore evaluation report");
    let _ = writeln!(summary, "run:    {run_hash}");
    let _ = writeln!(summary, "bundle: {}", manifest.content_hash);
    let _ = writeln!(summary);
    let _ = writeln!(
        summary,
        "dataset: {} users, {} items, {} edges",
        dataset.registry.len(),
        dataset.catalog.len(),
        dataset.graph.edge_count()
    );
    let _ = writeln!(summary);
    let _ = writeln!(
        summary,
        "graph metrics (reference column: published metrics of a comparable"
    );
    let _ = writeln!(summary, "real-world professional network; displayed, not asserted)");
    let _ = writeln!(summary, "  {:<28}{:>14}{:>14}", "metric", "value", "reference");
    let _ = writeln!(summary, "  {:<28}{:>14}{:>14}", "nodes", stats.nodes, REFERENCE_NODES);
    let _ = writeln!(summary, "  {:<28}{:>14}{:>14}", "edges", stats.edges, REFERENCE_EDGES);
    let _ = writeln!(
        summary,
        "  {:<28}{:>14.4}{:>14.4}",
        "avg clustering coefficient", stats.avg_clustering, REFERENCE_CLUSTERING
    );
    let _ = writeln!(
        summary,
        "  {:<28}{:>14}{:>14}",
        "diameter", stats.diameter, REFERENCE_DIAMETER
    );
    let _ = writeln!(
        summary,
        "  {:<28}{:>14.2}{:>14.2}",
        "avg path length", stats.avg_path_length, REFERENCE_AVG_PATH
    );
    let _ = writeln!(summary);
    let _ = writeln!(
        summary,
        "goodness of fit: accepted/tested items per model (alpha {}, df K-1",
        args.alpha
    );
    let _ = writeln!(summary, "for frequency models, K-2 for latent-trait models)");
    let model_order = ["PSN", "PSI", "PSGN", "PSGI"];
    let _ = write!(summary, "  {:>4}", "K");
    for model in model_order {
        let _ = write!(summary, "{model:>12}");
    }
    let _ = writeln!(summary);
    for &k in &k_list {
        let _ = write!(summary, "  {k:>4}");
        for model in model_order {
            match summary_rows.get(&(k, model)) {
                Some((accepted, tested)) => {
                    let _ = write!(summary, "{:>12}", format!("{accepted}/{tested}"));
                }
                None => {
                    let _ = write!(summary, "{:>12}", "-");
                }
            }
        }
        let _ = writeln!(summary);
    }
    let _ = writeln!(summary);
    let _ = writeln!(summary, "correlation matrix (Pearson)");
    let _ = write!(summary, "  {:>8}", "");
    for label in &pearson_matrix.labels {
        let _ = write!(summary, "{label:>9}");
    }
    let _ = writeln!(summary);
    for (row, label) in pearson_matrix.labels.iter().enumerate() {
        let _ = write!(summary, "  {label:>8}");
        for col in 0..pearson_matrix.size() {
            match pearson_matrix.cell(row, col) {
                Some(v) => {
                    let _ = write!(summary, "{v:>9.3}");
                }
                None => {
                    let _ = write!(summary, "{:>9}", "n/a");
                }
            }
        }
        let _ = writeln!(summary);
    }
    std::fs::write(args.out.join("summary.txt"), &summary)?;

    let mut outputs = vec![
        "gof.csv".to_string(),
        "gof_summary.csv".to_string(),
        "correlations.csv".to_string(),
        "sensitivities.csv".to_string(),
        "summary.txt".to_string(),
    ];
    if args.spearman {
        outputs.push("correlations_spearman.csv".into());
    }
    if granularity_parts.is_some() {
        outputs.push("sensitivities_granularity.csv".into());
        outputs.push("curves.csv".into());
    }
    if has_graph {
        outputs.push("damping_sweep.csv".into());
    }
    outputs.sort();
    write_run_manifest(&args.out, "evaluate", &manifest, &flags, &outputs)?;
    for file in &outputs {
        println!("wrote {}", args.out.join(file).display());
    }
    print!("{summary}");
    Ok(if converged { 0 } else { 2 })
}
