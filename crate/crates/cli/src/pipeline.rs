//! The per-pair experiment: split, scale, train, explain, select, retrain,
//! evaluate, and write every artifact.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gridshap::dataset::{
    self, encode_labels, extract_pair, read_cache, write_cache, EventClass, FeatureName,
    LoadOptions, LoadOutcome, ScenarioMapping, SchemaManifest, CACHE_MAGIC,
};
use gridshap::eval::{confusion, pearson, report, ConfusionMatrix, EvalReport};
use gridshap::gbt::{self, TreeEnsemble};
use gridshap::preprocess::{fit_scaler, sample_rows, split_indices, transform, ScalerParams};
use gridshap::shap::{explanations_to_csv, interaction_partner, mean_abs_shap, select_top_k, Explainer};
use gridshap::viz::{self, file_stem, PlotKind, PlotSpec};
use gridshap::{Ensemble, Explanation, Scaler, Table};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{pair_name, RunConfig};

/// Probability cutoff for predicting code 1.
pub const DECISION_CUTOFF: f64 = 0.5;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.json";

/// Input problems that stop a command before any experiment runs.
#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("input {0} does not exist")]
    Missing(PathBuf),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("row {row} out of range for {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> InputError + '_ {
    move |source| InputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_cache(path: &Path) -> Result<bool, InputError> {
    let mut magic = [0u8; 5];
    let mut f = std::fs::File::open(path).map_err(io_err(path))?;
    Ok(f.read(&mut magic).map_err(io_err(path))? == magic.len() && &magic == CACHE_MAGIC)
}

/// Loaded input plus the cleaning record when it came from CSV.
pub struct Input {
    pub table: Table,
    pub outcome: Option<LoadOutcome>,
}

pub fn load_options(config: &RunConfig) -> Result<LoadOptions, InputError> {
    let manifest = config.manifest.as_deref().map(SchemaManifest::read).transpose()?;
    let scenario_mapping = config.marker_map.as_deref().map(ScenarioMapping::read).transpose()?;
    Ok(LoadOptions {
        label_column: config.label_column.clone(),
        manifest,
        scenario_mapping,
        strict_names: config.strict_names,
    })
}

/// Reads a binary cache or a raw CSV, whichever `path` holds.
pub fn load_table(path: &Path, options: &LoadOptions) -> Result<Input, InputError> {
    if !path.exists() {
        return Err(InputError::Missing(path.to_path_buf()));
    }
    if is_cache(path)? {
        let table = read_cache(path)?;
        let table = match &options.manifest {
            Some(m) => table.select_features(&m.columns)?,
            None => table,
        };
        return Ok(Input { table, outcome: None });
    }
    let outcome = dataset::load_events(path, options)?;
    Ok(Input {
        table: outcome.table.clone(),
        outcome: Some(outcome),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_in: usize,
    pub rows_dropped: usize,
    /// Zero-based data-row indices that were removed.
    pub dropped_rows: Vec<usize>,
    pub columns: usize,
    pub unstructured_columns: Vec<String>,
    pub class_counts: BTreeMap<String, usize>,
}

fn class_counts(table: &Table) -> BTreeMap<String, usize> {
    EventClass::ALL
        .iter()
        .zip(table.class_counts())
        .map(|(c, n)| (c.canonical_name().to_string(), n))
        .collect()
}

/// Cleans the input, writes `<out>/events.gshd` and
/// `<out>/ingest_report.json`.
pub fn ingest(config: &RunConfig) -> Result<IngestReport, InputError> {
    let input = load_table(&config.input, &load_options(config)?)?;
    let out = &config.out_dir;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    write_cache(&input.table, &out.join("events.gshd"))?;
    let report = match &input.outcome {
        Some(o) => IngestReport {
            rows_in: o.rows_in,
            rows_dropped: o.dropped.len(),
            dropped_rows: o.dropped.clone(),
            columns: o.table.n_features(),
            unstructured_columns: o.unstructured_columns.clone(),
            class_counts: class_counts(&o.table),
        },
        None => IngestReport {
            rows_in: input.table.n_rows(),
            rows_dropped: 0,
            dropped_rows: Vec::new(),
            columns: input.table.n_features(),
            unstructured_columns: Vec::new(),
            class_counts: class_counts(&input.table),
        },
    };
    let path = out.join("ingest_report.json");
    std::fs::write(&path, to_json(&report)).map_err(io_err(&path))?;
    Ok(report)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Scaler parameters with the columns they apply to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerFile {
    pub feature_names: Vec<FeatureName>,
    #[serde(flatten)]
    pub params: Scaler,
}

impl ScalerFile {
    /// Parameters for `names`, in that order.
    pub fn for_features(&self, names: &[FeatureName]) -> Result<Scaler> {
        let idx = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|m| m == n)
                    .with_context(|| format!("scaler has no column {n}"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.params.select(&idx))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub features: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub pair: String,
    /// Class for code 0 and code 1.
    pub classes: Vec<EventClass>,
    pub rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub seed: u64,
    pub base_value: f64,
    pub max_additivity_error: f64,
    pub importance: Vec<(String, f64)>,
    pub all_features: ModelEval,
    pub selected_features: ModelEval,
}

#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub name: String,
    pub metrics: PairMetrics,
    /// Written files, relative to the output directory.
    pub files: Vec<PathBuf>,
}

fn evaluate(model: &Ensemble, test: &Table, codes: &[usize], classes: &[EventClass]) -> Result<ModelEval> {
    let pred = (0..test.n_rows())
        .map(|i| model.predict_class(test.row(i), DECISION_CUTOFF))
        .collect::<Result<Vec<_>, _>>()?;
    let cm = confusion(codes, &pred, 2)?.with_labels(classes.iter().map(|c| c.to_string()).collect());
    let report = report(&cm)?;
    Ok(ModelEval {
        features: model.feature_names.iter().map(|n| n.raw().to_string()).collect(),
        confusion: cm,
        report,
    })
}

struct PairWriter {
    dir: PathBuf,
    rel: PathBuf,
    files: Vec<PathBuf>,
}

impl PairWriter {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(self.rel.join(name));
        Ok(())
    }

    fn cache(&mut self, name: &str, table: &Table) -> Result<()> {
        write_cache(table, &self.dir.join(name))?;
        self.files.push(self.rel.join(name));
        Ok(())
    }

    fn plot(&mut self, stem: &str, spec: &PlotSpec) -> Result<()> {
        spec.write_files(&self.dir, stem)?;
        self.files.push(self.rel.join(format!("{stem}.svg")));
        self.files.push(self.rel.join(format!("{stem}.csv")));
        Ok(())
    }
}

fn codes_for(table: &Table, classes: &[EventClass]) -> Vec<usize> {
    table
        .labels()
        .iter()
        .map(|l| classes.iter().position(|c| c == l).expect("pair class"))
        .collect()
}

/// Runs one pairwise experiment and writes its artifacts under
/// `<out_dir>/<pair>/`.
pub fn run_pair(config: &RunConfig, table: &Table, pair: [EventClass; 2]) -> Result<PairOutcome> {
    let name = pair_name(pair);
    let sub = extract_pair(table, pair[0], pair[1])?;
    let (_, encoding) = encode_labels(&sub)?;
    let classes = encoding.classes().to_vec();

    let (train_idx, test_idx) = split_indices(&sub, &config.split_spec())?;
    let train_raw = sub.select_rows(&train_idx);
    let test_raw = sub.select_rows(&test_idx);
    if test_raw.n_rows() == 0 {
        bail!("test split is empty");
    }
    let scaler = fit_scaler(&train_raw)?;
    let train = transform(&scaler, &train_raw)?;
    let test = transform(&scaler, &test_raw)?;
    let train_codes = codes_for(&train, &classes);
    let test_codes = codes_for(&test, &classes);

    let hp = config.hyperparams;
    let mut full = gbt::train(&train, &train_codes, &hp)?;
    full.classes = classes.clone();
    full.seed = config.seed;

    let bg_rows = sample_rows(train.n_rows(), config.background, config.seed);
    let background = train.select_rows(&bg_rows);
    let full_expl = Explainer::new(&full, &background)?.explain_table(&test)?;
    let ranking = mean_abs_shap(&full_expl, test.feature_names())?;
    let top = select_top_k(&ranking, config.top_k.min(ranking.len()))?;

    let train_top = train.select_features(&top)?;
    let test_top = test.select_features(&top)?;
    let mut selected = gbt::train(&train_top, &train_codes, &hp)?;
    selected.classes = classes.clone();
    selected.seed = config.seed;
    let bg_top = background.select_features(&top)?;
    let top_explainer = Explainer::new(&selected, &bg_top)?;
    let top_expl = top_explainer.explain_table(&test_top)?;

    let max_additivity_error = full_expl
        .iter()
        .chain(&top_expl)
        .map(Explanation::additivity_error)
        .fold(0.0, f64::max);

    let metrics = PairMetrics {
        pair: name.clone(),
        classes: classes.clone(),
        rows: sub.n_rows(),
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        seed: config.seed,
        base_value: top_explainer.base_value(),
        max_additivity_error,
        importance: ranking.entries.iter().map(|(n, v)| (n.raw().to_string(), *v)).collect(),
        all_features: evaluate(&full, &test, &test_codes, &classes)?,
        selected_features: evaluate(&selected, &test_top, &test_codes, &classes)?,
    };

    let dir = config.out_dir.join(&name);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = PairWriter {
        dir,
        rel: PathBuf::from(&name),
        files: Vec::new(),
    };
    w.text("model_full.json", &(full.to_json()? + "\n"))?;
    w.text("model_top.json", &(selected.to_json()? + "\n"))?;
    let scaler_file = ScalerFile {
        feature_names: sub.feature_names().to_vec(),
        params: scaler,
    };
    w.text("scaler.json", &to_json(&scaler_file))?;
    w.cache("test.gshd", &test_raw)?;
    w.cache("background.gshd", &train_raw.select_rows(&bg_rows))?;
    w.text("explanations_full.csv", &explanations_to_csv(&full_expl, test.feature_names()))?;
    w.text("explanations_top.csv", &explanations_to_csv(&top_expl, test_top.feature_names()))?;
    w.text(METRICS_FILE, &to_json(&metrics))?;
    w.text("confusion.txt", &metrics_confusion_text(&metrics))?;
    w.text("report.txt", &metrics_report_text(&metrics))?;

    write_plots(&mut w, config, &name, &ranking, &test_top, &top_expl, &sub)?;

    Ok(PairOutcome {
        name,
        metrics,
        files: w.files,
    })
}

#[allow(clippy::too_many_arguments)]
fn write_plots(
    w: &mut PairWriter,
    config: &RunConfig,
    name: &str,
    ranking: &gridshap::shap::ImportanceRanking<f64>,
    test_top: &Table,
    top_expl: &[Explanation],
    sub: &Table,
) -> Result<()> {
    w.plot(
        &file_stem(name, PlotKind::SummaryBar, None),
        &viz::summary_bar(ranking, config.top_k),
    )?;

    let row = config.explain_row;
    if row >= test_top.n_rows() {
        return Err(InputError::RowOutOfRange {
            row,
            rows: test_top.n_rows(),
        }
        .into());
    }
    let e = &top_expl[row];
    let names = test_top.feature_names();
    w.plot(&file_stem(name, PlotKind::Force, None), &viz::force(e, names, test_top.row(row))?)?;
    w.plot(
        &file_stem(name, PlotKind::Waterfall, None),
        &viz::waterfall(e, names, test_top.row(row), config.waterfall_max_features)?,
    )?;
    w.plot(
        &file_stem(name, PlotKind::Beeswarm, None),
        &viz::beeswarm(top_expl, test_top, config.beeswarm_max_display, config.seed)?,
    )?;

    let top_ranking = mean_abs_shap(top_expl, names)?;
    for fname in top_ranking.names().take(config.dependence_plots) {
        let j = test_top.feature_index(fname.raw()).expect("ranked feature");
        let partner = interaction_partner(top_expl, test_top, j)?;
        let spec = viz::dependence(fname.raw(), names[partner].raw(), test_top, top_expl)?;
        w.plot(&file_stem(name, PlotKind::Dependence, Some(fname.raw())), &spec)?;
    }

    let selected: Vec<&str> = names.iter().map(FeatureName::raw).collect();
    let corr = pearson(sub, &selected)?;
    w.plot(&file_stem(name, PlotKind::Heatmap, None), &viz::heatmap(&corr))?;
    Ok(())
}

pub fn metrics_confusion_text(m: &PairMetrics) -> String {
    format!(
        "{} confusion matrix, {} selected features (rows actual, columns predicted)\n{}\n{} confusion matrix, all {} features\n{}",
        m.pair,
        m.selected_features.features.len(),
        m.selected_features.confusion.to_text(),
        m.pair,
        m.all_features.features.len(),
        m.all_features.confusion.to_text()
    )
}

pub fn metrics_report_text(m: &PairMetrics) -> String {
    format!(
        "{} classification report, {} selected features\n\n{}\n{} classification report, all {} features\n\n{}",
        m.pair,
        m.selected_features.features.len(),
        m.selected_features.report.to_text(),
        m.pair,
        m.all_features.features.len(),
        m.all_features.report.to_text()
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub pair: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Relative path to SHA-256 of every file written for the pair.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: u64,
    pub input: PathBuf,
    pub pairs: Vec<PairEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct RunSummary {
    pub manifest: Manifest,
    pub outcomes: Vec<Result<PairOutcome, String>>,
}

impl RunSummary {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_err()).count()
    }
}

/// Runs every configured pair, then writes `config.toml` and the manifest.
/// Only input problems are returned as errors; a failing pair is recorded
/// and the others still run.
pub fn run(config: &RunConfig) -> Result<RunSummary, InputError> {
    config.validate().map_err(|e| InputError::Invalid(e.to_string()))?;
    let input = load_table(&config.input, &load_options(config)?)?;
    let out = &config.out_dir;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let config_text = config.to_toml();
    let config_path = out.join("config.toml");
    std::fs::write(&config_path, &config_text).map_err(io_err(&config_path))?;

    let outcomes: Vec<Result<PairOutcome, String>> = config
        .pairs
        .par_iter()
        .map(|&pair| run_pair(config, &input.table, pair).map_err(|e| format!("{e:#}")))
        .collect();

    let mut pairs = Vec::with_capacity(outcomes.len());
    for (pair, outcome) in config.pairs.iter().zip(&outcomes) {
        let (status, error, files) = match outcome {
            Ok(o) => ("ok", None, o.files.clone()),
            Err(e) => ("failed", Some(e.clone()), Vec::new()),
        };
        let mut hashes = BTreeMap::new();
        for rel in files {
            let path = out.join(&rel);
            let bytes = std::fs::read(&path).map_err(io_err(&path))?;
            hashes.insert(rel.to_string_lossy().replace('\\', "/"), sha256_hex(&bytes));
        }
        pairs.push(PairEntry {
            pair: pair_name(*pair),
            status: status.to_string(),
            error,
            files: hashes,
        });
    }
    let manifest = Manifest {
        config_sha256: sha256_hex(config_text.as_bytes()),
        seed: config.seed,
        input: config.input.clone(),
        pairs,
    };
    let path = out.join(MANIFEST_FILE);
    std::fs::write(&path, to_json(&manifest)).map_err(io_err(&path))?;
    Ok(RunSummary { manifest, outcomes })
}

/// Single-row explanation outputs from `explain`.
pub struct ExplainOutput {
    pub explanation: Explanation,
    pub files: Vec<PathBuf>,
}

pub struct ExplainRequest<'a> {
    pub model: &'a Path,
    pub data: &'a Path,
    pub row: usize,
    pub scaler: Option<&'a Path>,
    pub background: Option<&'a Path>,
    pub background_size: usize,
    pub seed: u64,
    pub waterfall_max_features: usize,
    pub out_dir: &'a Path,
    pub name: &'a str,
}

fn read_to_string(path: &Path) -> Result<String, InputError> {
    if !path.exists() {
        return Err(InputError::Missing(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn model_view(
    table: &Table,
    names: &[FeatureName],
    scaler: Option<&ScalerFile>,
) -> Result<Table, InputError> {
    let raw: Vec<&str> = names.iter().map(FeatureName::raw).collect();
    let view = table.select_features(&raw)?;
    match scaler {
        Some(s) => {
            let params: ScalerParams<f64> = s
                .for_features(names)
                .map_err(|e| InputError::Invalid(format!("{e:#}")))?;
            transform(&params, &view).map_err(|e| InputError::Invalid(e.to_string()))
        }
        None => Ok(view),
    }
}

/// Explains one row of `data` with a saved model and writes the force and
/// waterfall plots plus a one-row explanation CSV.
pub fn explain(req: &ExplainRequest<'_>) -> Result<ExplainOutput, InputError> {
    let model = TreeEnsemble::<f64>::from_json(&read_to_string(req.model)?)
        .map_err(|e| InputError::Invalid(format!("{}: {e}", req.model.display())))?;
    let scaler = req
        .scaler
        .map(|p| {
            serde_json::from_str::<ScalerFile>(&read_to_string(p)?)
                .map_err(|e| InputError::Invalid(format!("{}: {e}", p.display())))
        })
        .transpose()?;
    let options = LoadOptions::default();
    let data = model_view(&load_table(req.data, &options)?.table, &model.feature_names, scaler.as_ref())?;
    if req.row >= data.n_rows() {
        return Err(InputError::RowOutOfRange {
            row: req.row,
            rows: data.n_rows(),
        });
    }
    let background = match req.background {
        Some(p) => model_view(&load_table(p, &options)?.table, &model.feature_names, scaler.as_ref())?,
        None => data.select_rows(&sample_rows(data.n_rows(), req.background_size, req.seed)),
    };
    let explainer = Explainer::new(&model, &background).map_err(|e| InputError::Invalid(e.to_string()))?;
    let e = explainer
        .explain(data.row(req.row), req.row)
        .map_err(|e| InputError::Invalid(e.to_string()))?;

    std::fs::create_dir_all(req.out_dir).map_err(io_err(req.out_dir))?;
    let names = data.feature_names();
    let row = data.row(req.row);
    let viz_err = |e: viz::VizError| InputError::Invalid(e.to_string());
    let force = viz::force(&e, names, row).map_err(viz_err)?;
    let waterfall = viz::waterfall(&e, names, row, req.waterfall_max_features).map_err(viz_err)?;
    let mut files = Vec::new();
    for (kind, spec) in [(PlotKind::Force, force), (PlotKind::Waterfall, waterfall)] {
        let stem = format!("{}_row{}", file_stem(req.name, kind, None), req.row);
        let (svg, csv) = spec.write_files(req.out_dir, &stem).map_err(viz_err)?;
        files.extend([svg, csv]);
    }
    let csv_path = req.out_dir.join(format!("{}_explanation_row{}.csv", req.name, req.row));
    std::fs::write(&csv_path, explanations_to_csv(std::slice::from_ref(&e), names)).map_err(io_err(&csv_path))?;
    files.push(csv_path);
    Ok(ExplainOutput { explanation: e, files })
}

/// Reads `metrics.json` for every pair directory under `out_dir`, in name
/// order.
pub fn collect_reports(out_dir: &Path) -> Result<Vec<PairMetrics>, InputError> {
    if !out_dir.is_dir() {
        return Err(InputError::Missing(out_dir.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out_dir)
        .map_err(io_err(out_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(METRICS_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.iter()
        .map(|d| {
            let path = d.join(METRICS_FILE);
            serde_json::from_str(&read_to_string(&path)?)
                .map_err(|e| InputError::Invalid(format!("{}: {e}", path.display())))
        })
        .collect()
}
