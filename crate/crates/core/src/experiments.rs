//! Experiment harness: per-crop training of the configured methods over a
//! list of seeds, the accuracy comparison, permutation-importance grades,
//! R plot data and run manifests.
//!
//! Every (crop, method, seed) cell is independent and may run in parallel.
//! Reports are assembled in (crop, method) configuration order, so parallel
//! and sequential runs write identical bytes.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ann::MIN_HIDDEN;
use crate::data::{
    load_csv, split_by_year, synthesize, Attribute, Crop, Dataset, RejectPolicy, SplitSpec,
    SynthSpec,
};
use crate::error::{Error, Result};
use crate::gwo::GwoSettings;
use crate::hybrid::{
    hex_digest, prepare, train_candidate, train_method, HybridConfig, Method, TrainedModel,
    TrainingBudget,
};
use crate::ica::IcaSettings;
use crate::metrics::{evaluate, rmse, MetricsRow};
use crate::search::{stream_rng, Execution};

const PERMUTATION_STREAM: u64 = 0x9e1;

/// Header comment of `comparison.csv` and `comparison.txt`.
pub const TIE_BREAK_NOTE: &str =
    "best per crop: highest r, lowest mae_pct, lowest rmse; ties go to the first method in configuration order";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV file to load; the synthetic generator is used when absent.
    pub path: Option<PathBuf>,
    pub reject: RejectPolicy,
    pub synthetic: SynthSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            reject: RejectPolicy::Fail,
            synthetic: SynthSpec::default(),
        }
    }
}

impl DataConfig {
    pub fn load(&self) -> Result<Dataset> {
        match &self.path {
            Some(p) => Ok(load_csv(p, self.reject)?.dataset),
            None => synthesize(&self.synthetic),
        }
    }

    /// Identifies the input: a file hash or the generator spec.
    pub fn fingerprint(&self) -> Result<String> {
        match &self.path {
            Some(p) => {
                let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
                Ok(format!("file {} sha256={}", p.display(), hex_digest(&bytes)))
            }
            None => {
                let s = &self.synthetic;
                Ok(format!(
                    "synthetic seed={} n_per_crop={} noise_sd={} years={}-{}",
                    s.seed, s.n_per_crop, s.noise_sd, s.first_year, s.last_year
                ))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributePolicy {
    /// Use `ExperimentConfig::attributes` for every crop.
    #[default]
    Fixed,
    /// Greedy forward selection per crop, scored by plain backprop.
    Search,
}

/// One column of the comparison: a named method with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: String,
    pub kind: Method,
    #[serde(default)]
    pub config: HybridConfig,
}

impl MethodSpec {
    pub fn new(kind: Method, config: HybridConfig) -> Self {
        Self {
            name: kind.label().to_string(),
            kind,
            config,
        }
    }
}

/// Desk-scale ANN-ICA settings used by the default experiment.
pub fn desk_ica_config() -> HybridConfig {
    HybridConfig {
        ica: IcaSettings {
            n_countries: 12,
            n_imperialists: 3,
            max_decades: 10,
            ..IcaSettings::default()
        },
        ..HybridConfig::default()
    }
}

/// Desk-scale ANN-GWO settings used by the default experiment.
pub fn desk_gwo_config() -> HybridConfig {
    HybridConfig {
        gwo: GwoSettings {
            pop_size: 20,
            num_iter: 100,
        },
        ..HybridConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub crops: Vec<Crop>,
    pub out: PathBuf,
    pub attribute_policy: AttributePolicy,
    pub attributes: Vec<Attribute>,
    /// Shuffles per attribute and seed in permutation importance.
    pub importance_repeats: usize,
    /// How (crop, method, seed) cells are scheduled.
    pub execution: Execution,
    pub data: DataConfig,
    pub split: SplitSpec,
    /// Methods in report order; ties go to the earlier entry.
    pub methods: Vec<MethodSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1],
            crops: Crop::MAIN.to_vec(),
            out: PathBuf::from("results"),
            attribute_policy: AttributePolicy::Fixed,
            attributes: Attribute::ALL.to_vec(),
            importance_repeats: 5,
            execution: Execution::default(),
            data: DataConfig::default(),
            split: SplitSpec::default(),
            methods: vec![
                MethodSpec::new(Method::AnnIca, desk_ica_config()),
                MethodSpec::new(Method::AnnGwo, desk_gwo_config()),
            ],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        hex_digest(self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.crops.is_empty() {
            return Err(Error::config("crops", "at least one crop is required"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.importance_repeats == 0 {
            return Err(Error::config("importance_repeats", "must be at least 1"));
        }
        if self.attribute_policy == AttributePolicy::Fixed && self.attributes.is_empty() {
            return Err(Error::config("attributes", "at least one attribute is required"));
        }
        self.split.validate()?;
        for (i, m) in self.methods.iter().enumerate() {
            if m.name.trim().is_empty() {
                return Err(Error::config(format!("methods[{i}].name"), "must not be empty"));
            }
            if self.methods[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::config(
                    format!("methods[{i}].name"),
                    format!("duplicate method name {:?}", m.name),
                ));
            }
            m.config.validate().map_err(|e| match e {
                Error::Config { field, reason } => {
                    Error::config(format!("methods[{i}].config.{field}"), reason)
                }
                other => other,
            })?;
        }
        if let Some(p) = &self.data.path {
            if !p.exists() {
                return Err(Error::config("data.path", format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Keeps only the listed methods, matched by name or kind.
    pub fn retain_methods(&mut self, wanted: &[String]) -> Result<()> {
        let mut kept = Vec::new();
        for w in wanted {
            let kind: Option<Method> = w.parse().ok();
            let found: Vec<&MethodSpec> = self
                .methods
                .iter()
                .filter(|m| m.name.eq_ignore_ascii_case(w) || Some(m.kind) == kind)
                .collect();
            if found.is_empty() {
                return Err(Error::config("method", format!("no configured method matches {w:?}")));
            }
            for m in found {
                if !kept.iter().any(|k: &MethodSpec| k.name == m.name) {
                    kept.push(m.clone());
                }
            }
        }
        self.methods = self
            .methods
            .iter()
            .filter(|m| kept.iter().any(|k| k.name == m.name))
            .cloned()
            .collect();
        Ok(())
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Rank-quartile grades: attributes sorted by ascending importance get
/// `floor(4 * rank / n)`. Tied importances share the grade of the first
/// rank in their group.
pub fn quartile_grades(importance: &[f64]) -> Vec<u8> {
    let n = importance.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| importance[a].total_cmp(&importance[b]));
    let mut grades = vec![0u8; n];
    let mut group_rank = 0;
    for (rank, &i) in order.iter().enumerate() {
        if rank > 0 && importance[i] != importance[order[rank - 1]] {
            group_rank = rank;
        }
        grades[i] = (4 * group_rank / n) as u8;
    }
    grades
}

/// Test-RMSE increase per attribute when its column is shuffled, one row per
/// repetition, indexed by `Attribute::index`. Attributes the model does not
/// use score 0.
pub fn permutation_importance(
    model: &TrainedModel,
    test: &Dataset,
    seed: u64,
    repeats: usize,
) -> Result<Vec<[f64; 7]>> {
    let targets: Vec<f64> = test.records().iter().map(|r| r.yield_t_ha).collect();
    let base = rmse(&targets, &model.predict(test)?)?;
    let mut out = vec![[0.0; 7]; repeats];
    for &attr in model.attributes() {
        let k = attr.index();
        for (rep, row) in out.iter_mut().enumerate() {
            let mut column: Vec<f64> = test.records().iter().map(|r| r.attrs[k]).collect();
            column.shuffle(&mut stream_rng(seed, &[PERMUTATION_STREAM, k as u64, rep as u64]));
            let mut records = test.records().to_vec();
            for (r, v) in records.iter_mut().zip(column) {
                r.attrs[k] = v;
            }
            let shuffled = Dataset::new(records).with_attributes(test.attributes())?;
            row[k] = rmse(&targets, &model.predict(&shuffled)?)? - base;
        }
    }
    Ok(out)
}

/// Greedy forward selection: repeatedly adds the attribute that most lowers
/// validation RMSE of a plain backprop network, stopping when nothing helps.
pub fn select_attributes(train: &Dataset, config: &HybridConfig) -> Result<Vec<Attribute>> {
    let score = |attrs: &[Attribute]| -> f64 {
        let run = || -> Result<f64> {
            let ds = train.clone().with_attributes(attrs)?;
            let p = prepare(&ds, config)?;
            let (params, _) = train_candidate(
                &config.network,
                &p.fit,
                &p.val,
                &config.search_budget,
                config.init_seed(),
                config.init_scale,
            )?;
            Ok(params.mse(&p.val)?.sqrt())
        };
        run().unwrap_or(f64::INFINITY)
    };
    let mut chosen: Vec<Attribute> = Vec::new();
    let mut best = f64::INFINITY;
    loop {
        let mut step: Option<(Attribute, f64)> = None;
        for a in Attribute::ALL.into_iter().filter(|a| !chosen.contains(a)) {
            let mut trial = chosen.clone();
            trial.push(a);
            let s = score(&trial);
            if s < best && step.is_none_or(|(_, b)| s < b) {
                step = Some((a, s));
            }
        }
        match step {
            Some((a, s)) => {
                chosen.push(a);
                best = s;
            }
            None => break,
        }
    }
    if chosen.is_empty() {
        return Err(Error::config("attributes", "no attribute yields a finite validation score"));
    }
    chosen.sort();
    Ok(chosen)
}

/// Median-over-seeds result for one (crop, method).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub crop: Crop,
    pub method: String,
    pub seeds: usize,
    pub failures: usize,
    pub n_test: usize,
    /// Medians over the successful seeds; `None` when every seed failed.
    pub metrics: Option<MetricsRow>,
    /// Best flags for r, mae_pct and rmse.
    pub best: [bool; 3],
}

impl ComparisonRow {
    pub fn failed(&self) -> bool {
        self.failures > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageRow {
    pub method: String,
    /// Crops contributing to the mean.
    pub crops: usize,
    pub r: f64,
    pub mae_pct: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub methods: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    pub averages: Vec<AverageRow>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeRow {
    pub crop: Crop,
    pub method: String,
    /// Median importance per attribute, by `Attribute::index`.
    pub importance: [f64; 7],
    pub grades: [u8; 7],
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributeReport {
    pub rows: Vec<AttributeRow>,
    pub warnings: Vec<String>,
}

impl AttributeReport {
    pub fn grade(&self, crop: &Crop, method: &str, attr: Attribute) -> Option<u8> {
        self.rows
            .iter()
            .find(|r| &r.crop == crop && r.method == method)
            .map(|r| r.grades[attr.index()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub comparison: ComparisonReport,
    pub attributes: Option<AttributeReport>,
    /// Attribute subset used per crop.
    pub subsets: Vec<(Crop, Vec<Attribute>)>,
}

impl RunOutput {
    pub fn failed(&self) -> bool {
        !self.comparison.errors.is_empty()
    }
}

struct CellOutcome {
    metrics: std::result::Result<MetricsRow, String>,
    importance: Option<Vec<[f64; 7]>>,
}

struct CropData {
    crop: Crop,
    train: Dataset,
    test: Dataset,
}

fn crop_data(config: &ExperimentConfig) -> Result<Vec<CropData>> {
    let ds = config.data.load()?;
    let split = split_by_year(&ds, &config.split)?;
    let mut out = Vec::new();
    for crop in &config.crops {
        let train = split.train.filter_crop(crop);
        let test = split.test.filter_crop(crop);
        if train.is_empty() || test.is_empty() {
            return Err(Error::config(
                "crops",
                format!("{crop} has {} training and {} test rows", train.len(), test.len()),
            ));
        }
        let attrs = match config.attribute_policy {
            AttributePolicy::Fixed => config.attributes.clone(),
            AttributePolicy::Search => {
                let mut proxy = config.methods[0].config.clone();
                proxy.seed = config.seeds[0];
                select_attributes(&train, &proxy)?
            }
        };
        out.push(CropData {
            crop: crop.clone(),
            train: train.with_attributes(&attrs)?,
            test: test.with_attributes(&attrs)?,
        });
    }
    Ok(out)
}

fn run_cell(
    data: &CropData,
    method: &MethodSpec,
    seed: u64,
    importance_repeats: Option<usize>,
) -> CellOutcome {
    let mut cfg = method.config.clone();
    cfg.seed = seed;
    let model = match train_method(method.kind, &data.train, &cfg) {
        Ok(m) => m,
        Err(e) => {
            return CellOutcome {
                metrics: Err(format!("{} {} seed {seed}: {e}", data.crop, method.name)),
                importance: None,
            }
        }
    };
    let metrics = evaluate(&model, &data.test)
        .map_err(|e| format!("{} {} seed {seed}: {e}", data.crop, method.name));
    let importance = match (importance_repeats, &metrics) {
        (Some(reps), Ok(_)) => permutation_importance(&model, &data.test, seed, reps).ok(),
        _ => None,
    };
    CellOutcome { metrics, importance }
}

/// Trains every (crop, method, seed) cell and assembles the reports.
pub fn run(config: &ExperimentConfig, with_attributes: bool) -> Result<RunOutput> {
    config.validate()?;
    let crops = crop_data(config)?;
    let (nc, nm, ns) = (crops.len(), config.methods.len(), config.seeds.len());
    let repeats = with_attributes.then_some(config.importance_repeats);
    let cells = config.execution.map(nc * nm * ns, |i| {
        let (c, rest) = (i / (nm * ns), i % (nm * ns));
        let (m, s) = (rest / ns, rest % ns);
        run_cell(&crops[c], &config.methods[m], config.seeds[s], repeats)
    });

    let mut report = ComparisonReport {
        methods: config.methods.iter().map(|m| m.name.clone()).collect(),
        ..ComparisonReport::default()
    };
    let mut attr_report = AttributeReport::default();
    for (c, data) in crops.iter().enumerate() {
        for (m, method) in config.methods.iter().enumerate() {
            let group = &cells[(c * nm + m) * ns..(c * nm + m + 1) * ns];
            let ok: Vec<MetricsRow> = group.iter().filter_map(|o| o.metrics.clone().ok()).collect();
            report
                .errors
                .extend(group.iter().filter_map(|o| o.metrics.clone().err()));
            let metrics = (!ok.is_empty()).then(|| MetricsRow {
                r: median(ok.iter().map(|x| x.r).collect()),
                mae_pct: median(ok.iter().map(|x| x.mae_pct).collect()),
                rmse: median(ok.iter().map(|x| x.rmse).collect()),
                n: data.test.len(),
                r_clamped: ok.iter().any(|x| x.r_clamped),
            });
            report.rows.push(ComparisonRow {
                crop: data.crop.clone(),
                method: method.name.clone(),
                seeds: ns,
                failures: ns - ok.len(),
                n_test: data.test.len(),
                metrics,
                best: [false; 3],
            });

            if with_attributes {
                let runs: Vec<&[f64; 7]> = group
                    .iter()
                    .filter_map(|o| o.importance.as_ref())
                    .flatten()
                    .collect();
                let mut importance = [0.0; 7];
                for (k, v) in importance.iter_mut().enumerate() {
                    *v = median(runs.iter().map(|r| r[k]).collect());
                }
                let failed = runs.is_empty();
                let grades = if failed || data.train.attributes().len() == 1 {
                    if !failed {
                        attr_report.warnings.push(format!(
                            "{} {}: single-attribute model, all grades set to 0",
                            data.crop, method.name
                        ));
                    }
                    [0u8; 7]
                } else {
                    quartile_grades(&importance).try_into().expect("seven grades")
                };
                attr_report.rows.push(AttributeRow {
                    crop: data.crop.clone(),
                    method: method.name.clone(),
                    importance,
                    grades,
                    failed,
                });
            }
        }
    }
    mark_best(&mut report.rows, nm);
    report.averages = averages(&report.rows, &report.methods);
    Ok(RunOutput {
        comparison: report,
        attributes: with_attributes.then_some(attr_report),
        subsets: crops
            .iter()
            .map(|d| (d.crop.clone(), d.train.attributes().to_vec()))
            .collect(),
    })
}

fn mark_best(rows: &mut [ComparisonRow], per_crop: usize) {
    for group in rows.chunks_mut(per_crop) {
        for metric in 0..3 {
            let value = |m: &MetricsRow| match metric {
                0 => -m.r,
                1 => m.mae_pct,
                _ => m.rmse,
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in group.iter().enumerate() {
                if let Some(m) = &row.metrics {
                    let v = value(m);
                    if best.is_none_or(|(_, b)| v < b) {
                        best = Some((i, v));
                    }
                }
            }
            if let Some((i, _)) = best {
                group[i].best[metric] = true;
            }
        }
    }
}

fn averages(rows: &[ComparisonRow], methods: &[String]) -> Vec<AverageRow> {
    methods
        .iter()
        .map(|name| {
            let ms: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| &r.method == name)
                .filter_map(|r| r.metrics.as_ref())
                .collect();
            let n = ms.len() as f64;
            let mean = |f: fn(&MetricsRow) -> f64| {
                if ms.is_empty() {
                    f64::NAN
                } else {
                    ms.iter().map(|m| f(m)).sum::<f64>() / n
                }
            };
            AverageRow {
                method: name.clone(),
                crops: ms.len(),
                r: mean(|m| m.r),
                mae_pct: mean(|m| m.mae_pct),
                rmse: mean(|m| m.rmse),
            }
        })
        .collect()
}

pub fn run_comparison(config: &ExperimentConfig) -> Result<ComparisonReport> {
    Ok(run(config, false)?.comparison)
}

pub fn attribute_effects(config: &ExperimentConfig) -> Result<AttributeReport> {
    Ok(run(config, true)?.attributes.expect("requested"))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub const COMPARISON_HEADER: &str =
    "crop,method,status,seeds,failures,n_test,r,mae_pct,rmse,r_clamped,best_r,best_mae_pct,best_rmse";

/// Label of the averages rows in `comparison.csv`.
pub const AVERAGE_LABEL: &str = "average";

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("# {TIE_BREAK_NOTE}\n{COMPARISON_HEADER}\n");
        for r in &self.rows {
            let status = if r.failed() { "failed" } else { "ok" };
            let _ = match &r.metrics {
                Some(m) => writeln!(
                    s,
                    "{},{},{status},{},{},{},{},{},{},{},{},{},{}",
                    r.crop,
                    r.method,
                    r.seeds,
                    r.failures,
                    r.n_test,
                    num(m.r),
                    num(m.mae_pct),
                    num(m.rmse),
                    flag(m.r_clamped),
                    flag(r.best[0]),
                    flag(r.best[1]),
                    flag(r.best[2])
                ),
                None => writeln!(
                    s,
                    "{},{},{status},{},{},{},,,,,0,0,0",
                    r.crop, r.method, r.seeds, r.failures, r.n_test
                ),
            };
        }
        for a in &self.averages {
            let _ = writeln!(
                s,
                "{AVERAGE_LABEL},{},ok,{},0,,{},{},{},,,,",
                a.method,
                a.crops,
                num(a.r),
                num(a.mae_pct),
                num(a.rmse)
            );
        }
        s
    }

    pub fn plot_rows(&self) -> Vec<PlotRow> {
        self.rows
            .iter()
            .filter_map(|r| {
                r.metrics.as_ref().map(|m| PlotRow {
                    crop: r.crop.to_string(),
                    method: r.method.clone(),
                    r: num(m.r),
                })
            })
            .collect()
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.methods.iter().map(String::len).max().unwrap_or(6).max(6);
        writeln!(
            f,
            "{:<12} {:<width$} {:>9} {:>10} {:>10}  status",
            "crop", "method", "R", "MAE %", "RMSE"
        )?;
        let cell = |v: f64, best: bool| format!("{}{v:.4}", if best { "*" } else { "" });
        for r in &self.rows {
            let status = if r.failed() {
                format!("failed {}/{}", r.failures, r.seeds)
            } else {
                "ok".to_string()
            };
            match &r.metrics {
                Some(m) => writeln!(
                    f,
                    "{:<12} {:<width$} {:>9} {:>10} {:>10}  {status}",
                    r.crop.label(),
                    r.method,
                    cell(m.r, r.best[0]),
                    cell(m.mae_pct, r.best[1]),
                    cell(m.rmse, r.best[2])
                )?,
                None => writeln!(
                    f,
                    "{:<12} {:<width$} {:>9} {:>10} {:>10}  {status}",
                    r.crop.label(),
                    r.method,
                    "-",
                    "-",
                    "-"
                )?,
            }
        }
        for a in &self.averages {
            writeln!(
                f,
                "{:<12} {:<width$} {:>9.4} {:>10.4} {:>10.4}  {} crops",
                AVERAGE_LABEL, a.method, a.r, a.mae_pct, a.rmse, a.crops
            )?;
        }
        writeln!(f)?;
        writeln!(f, "* {TIE_BREAK_NOTE}")?;
        write!(f, "medians over {} seed(s) per cell", self.rows.first().map_or(0, |r| r.seeds))
    }
}

pub const ATTRIBUTES_HEADER: &str = "crop,method,attribute,importance,grade";

impl AttributeReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "# grade = rank quartile (0 lowest .. 3 highest) of median permutation importance\n",
        );
        s.push_str(ATTRIBUTES_HEADER);
        s.push('\n');
        for r in &self.rows {
            for a in Attribute::ALL {
                let k = a.index();
                let imp = if r.failed { String::new() } else { num(r.importance[k]) };
                let _ = writeln!(s, "{},{},{},{},{}", r.crop, r.method, a, imp, r.grades[k]);
            }
        }
        s
    }
}

/// One line of `fig2_data.csv`; `r` is kept as the report's text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotRow {
    pub crop: String,
    pub method: String,
    pub r: String,
}

pub const PLOT_HEADER: &str = "crop,method,r";

pub fn plot_data_csv(rows: &[PlotRow]) -> String {
    let mut s = String::from("# columns: crop = crop label, method = method name, r = median R index on the test split\n");
    s.push_str(PLOT_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.crop, r.method, r.r);
    }
    s
}

/// Plot rows recovered from a `comparison.csv` text, skipping failed and
/// averages rows.
pub fn plot_rows_from_comparison(text: &str) -> Result<Vec<PlotRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("comparison file lacks column {name:?}")))
    };
    let (ci, mi, si, ri) = (col("crop")?, col("method")?, col("status")?, col("r")?);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if &rec[ci] == AVERAGE_LABEL || &rec[si] != "ok" {
            continue;
        }
        rows.push(PlotRow {
            crop: rec[ci].to_string(),
            method: rec[mi].to_string(),
            r: rec[ri].to_string(),
        });
    }
    Ok(rows)
}

/// Writes `fig2_data.csv`-style output. Returns the number of data lines.
pub fn emit_plot_data(report: &ComparisonReport, path: impl AsRef<Path>) -> Result<usize> {
    let rows = report.plot_rows();
    write_file(path.as_ref(), &plot_data_csv(&rows))?;
    Ok(rows.len())
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Deterministic record of what a run used.
pub fn manifest(command: &str, config: &ExperimentConfig, output: &RunOutput) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "tool = yieldnet {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "command = {command}");
    let _ = writeln!(s, "config = config.toml");
    let _ = writeln!(s, "config_sha256 = {}", config.digest());
    let _ = writeln!(s, "data = {}", config.data.fingerprint()?);
    let _ = writeln!(
        s,
        "seeds = {}",
        config.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        s,
        "crops = {}",
        config.crops.iter().map(Crop::to_string).collect::<Vec<_>>().join(",")
    );
    for m in &config.methods {
        let _ = writeln!(s, "method = {} kind={} config_sha256={}", m.name, m.kind.id(), m.config.digest());
    }
    for (crop, attrs) in &output.subsets {
        let list: Vec<&str> = attrs.iter().map(|a| a.code()).collect();
        let _ = writeln!(s, "attributes.{crop} = {}", list.join(","));
    }
    let _ = writeln!(s, "failures = {}", output.comparison.errors.len());
    let _ = writeln!(s, "rerun = yieldnet {command} --config config.toml");
    Ok(s)
}

/// Output file names inside the run directory.
pub mod files {
    pub const COMPARISON_CSV: &str = "comparison.csv";
    pub const COMPARISON_TXT: &str = "comparison.txt";
    pub const ATTRIBUTES_CSV: &str = "attributes.csv";
    pub const PLOT_CSV: &str = "fig2_data.csv";
    pub const MANIFEST: &str = "manifest.txt";
    pub const CONFIG: &str = "config.toml";
}

/// Writes every artifact of `output` into `config.out`.
pub fn write_outputs(command: &str, config: &ExperimentConfig, output: &RunOutput) -> Result<()> {
    let dir = &config.out;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if command == "compare" {
        write_file(&dir.join(files::COMPARISON_CSV), &output.comparison.to_csv())?;
        write_file(&dir.join(files::COMPARISON_TXT), &format!("{}\n", output.comparison))?;
        emit_plot_data(&output.comparison, dir.join(files::PLOT_CSV))?;
    }
    if let Some(a) = &output.attributes {
        write_file(&dir.join(files::ATTRIBUTES_CSV), &a.to_csv())?;
    }
    write_file(&dir.join(files::CONFIG), &config.to_toml())?;
    write_file(&dir.join(files::MANIFEST), &manifest(command, config, output)?)
}

/// Small budgets for tests and smoke runs.
pub fn smoke_config() -> ExperimentConfig {
    let small = |mut c: HybridConfig| {
        c.search_budget = TrainingBudget {
            epochs: 40,
            patience: 10,
        };
        c.final_budget = TrainingBudget {
            epochs: 200,
            patience: 20,
        };
        c.network.hidden = MIN_HIDDEN.max(4);
        c
    };
    let mut ica = small(desk_ica_config());
    ica.ica = IcaSettings {
        n_countries: 6,
        n_imperialists: 2,
        max_decades: 3,
        ..IcaSettings::default()
    };
    let mut gwo = small(desk_gwo_config());
    gwo.gwo = GwoSettings {
        pop_size: 6,
        num_iter: 10,
    };
    ExperimentConfig {
        importance_repeats: 2,
        data: DataConfig {
            synthetic: SynthSpec {
                n_per_crop: 5,
                ..SynthSpec::default()
            },
            ..DataConfig::default()
        },
        methods: vec![MethodSpec::new(Method::AnnIca, ica), MethodSpec::new(Method::AnnGwo, gwo)],
        ..ExperimentConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn median_cases() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }

    #[test]
    fn grades_hand_cases() {
        assert_eq!(
            quartile_grades(&[0.0, 7.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
            vec![0, 3, 0, 1, 1, 2, 2]
        );
        assert_eq!(quartile_grades(&[0.0; 7]), vec![0; 7]);
        assert_eq!(
            quartile_grades(&[0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0]),
            vec![0, 0, 0, 1, 2, 2, 3]
        );
    }

    proptest! {
        #[test]
        fn grades_depend_only_on_order(v in prop::collection::vec(-5.0f64..5.0, 7), c in 0.01f64..100.0, s in -3.0f64..3.0) {
            let g = quartile_grades(&v);
            prop_assert!(g.iter().all(|&x| x <= 3));
            let mapped: Vec<f64> = v.iter().map(|x| c * x + s).collect();
            let gm = quartile_grades(&mapped);
            // affine maps can merge nearly-equal values through rounding only
            if v.windows(2).all(|w| (w[0] - w[1]).abs() > 1e-9) {
                prop_assert_eq!(g, gm);
            }
        }
    }

    fn row(crop: Crop, method: &str, r: f64, rmse: f64) -> ComparisonRow {
        ComparisonRow {
            crop,
            method: method.into(),
            seeds: 1,
            failures: 0,
            n_test: 4,
            metrics: Some(MetricsRow {
                r,
                mae_pct: rmse * 10.0,
                rmse,
                n: 4,
                r_clamped: false,
            }),
            best: [false; 3],
        }
    }

    #[test]
    fn best_flags_break_ties_by_order() {
        let mut rows = vec![
            row(Crop::Wheat, "a", 0.8, 1.0),
            row(Crop::Wheat, "b", 0.8, 0.5),
            row(Crop::Barley, "a", 0.5, 2.0),
            row(Crop::Barley, "b", 0.9, 2.0),
        ];
        mark_best(&mut rows, 2);
        assert_eq!(rows[0].best, [true, false, false]);
        assert_eq!(rows[1].best, [false, true, true]);
        assert_eq!(rows[2].best, [false, true, true]);
        assert_eq!(rows[3].best, [true, false, false]);
        let avg = averages(&rows, &["a".into(), "b".into()]);
        assert!((avg[0].r - 0.65).abs() < 1e-12);
        assert!((avg[1].rmse - 1.25).abs() < 1e-12);
    }

    #[test]
    fn plot_rows_round_trip_through_csv() {
        let mut rows = vec![row(Crop::Wheat, "a", 0.123456789, 1.0), row(Crop::Wheat, "b", 0.1, 1.0)];
        mark_best(&mut rows, 2);
        let report = ComparisonReport {
            methods: vec!["a".into(), "b".into()],
            averages: averages(&rows, &["a".into(), "b".into()]),
            rows,
            errors: vec![],
        };
        let back = plot_rows_from_comparison(&report.to_csv()).unwrap();
        assert_eq!(back, report.plot_rows());
        assert_eq!(back[0].r, "0.123456789");
    }

    #[test]
    fn empty_report_gives_header_only() {
        let text = plot_data_csv(&ComparisonReport::default().plot_rows());
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1);
    }

    #[test]
    fn config_round_trips_and_validates() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.validate().is_ok());

        let bad = ExperimentConfig {
            seeds: vec![],
            ..ExperimentConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { field, .. }) if field == "seeds"));

        let mut bad = ExperimentConfig::default();
        bad.methods[1].config.weight_bound = -1.0;
        match bad.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "methods[1].config.weight_bound"),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn retain_methods_by_kind_or_name() {
        let mut cfg = ExperimentConfig::default();
        cfg.retain_methods(&["gwo".into()]).unwrap();
        assert_eq!(cfg.methods.len(), 1);
        assert_eq!(cfg.methods[0].kind, Method::AnnGwo);
        assert!(cfg.retain_methods(&["backprop".into()]).is_err());
    }

    #[test]
    fn smoke_run_shape() {
        let cfg = ExperimentConfig {
            crops: vec![Crop::Wheat],
            ..smoke_config()
        };
        let out = run(&cfg, true).unwrap();
        assert_eq!(out.comparison.rows.len(), 2);
        assert_eq!(out.comparison.averages.len(), 2);
        let attrs = out.attributes.unwrap();
        assert_eq!(attrs.rows.len(), 2);
        assert!(attrs.rows.iter().all(|r| r.grades.iter().all(|&g| g <= 3)));
        assert_eq!(attrs.to_csv().lines().count(), 2 + 14);
    }
}
