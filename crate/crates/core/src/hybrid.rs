//! The two hybrid trainers and the plain backprop baseline.
//!
//! * ANN-ICA (default mode): ICA searches the 4-D meta-parameter box
//!   `(hidden neurons, hidden activation, output activation, learning rate)`;
//!   each country is scored by a short seeded backprop run and the winner is
//!   retrained with the final budget.
//! * ANN-ICA (weights mode) and ANN-GWO: the metaheuristic minimizes training
//!   MSE over the flat weight vector in `[-w, w]^P`, then backprop fine-tunes
//!   from the incumbent with validation early stopping.
//!
//! Every trainer splits the given training data into a fitting part and a
//! temporal validation tail, and fits min-max scaling on the whole training
//! data.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ann::{
    init_params, train_backprop, Activation, BackpropOptions, NetworkParams, Samples, Topology,
    TrainHistory, MAX_HIDDEN, MAX_LEARNING_RATE, MIN_HIDDEN,
};
use crate::data::{Attribute, Dataset, NormalizationStats};
use crate::error::{check_len, Error, Result};
use crate::gwo::{self, GwoConfig, GwoSettings};
use crate::ica::{self, IcaConfig, IcaSettings};
use crate::search::{derive_seed, sanitize, Bounds, Execution};

/// Smallest learning rate a decoded country can carry.
pub const MIN_LEARNING_RATE: f64 = 1e-4;

const INIT_STREAM: u64 = 0x4b1;
const OPTIMIZER_STREAM: u64 = 0x4b2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub hidden: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub learning_rate: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            hidden: 8,
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Identity,
            learning_rate: 0.2,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_HIDDEN..=MAX_HIDDEN).contains(&self.hidden) {
            return Err(Error::config(
                "hidden",
                format!("{} outside {MIN_HIDDEN}..={MAX_HIDDEN}", self.hidden),
            ));
        }
        BackpropOptions {
            learning_rate: self.learning_rate,
            max_epochs: 0,
            patience: 0,
        }
        .validate()
    }

    pub fn topology(&self, n_inputs: usize) -> Result<Topology> {
        Topology::new(n_inputs, self.hidden, self.hidden_activation, self.output_activation)
    }

    /// The search box for meta-parameter countries.
    pub fn search_bounds() -> Bounds {
        Bounds::new(
            vec![MIN_HIDDEN as f64, 1.0, 1.0, MIN_LEARNING_RATE],
            vec![MAX_HIDDEN as f64, 5.0, 5.0, MAX_LEARNING_RATE],
        )
        .expect("static bounds are valid")
    }

    /// Country coordinates of these meta-parameters.
    pub fn encode(&self) -> [f64; 4] {
        [
            self.hidden as f64,
            f64::from(self.hidden_activation.index()),
            f64::from(self.output_activation.index()),
            self.learning_rate,
        ]
    }
}

fn round_clamped(x: f64, lo: u8, hi: u8) -> u8 {
    let r = x.round();
    if r.is_nan() {
        lo
    } else {
        r.clamp(f64::from(lo), f64::from(hi)) as u8
    }
}

/// Maps a country to meta-parameters: rounds and clamps the neuron count to
/// `[2, 99]` and both activation indices to `[1, 5]`; clamps the learning
/// rate to `[1e-4, 5]`.
pub fn decode_country(position: &[f64]) -> Result<HyperParams> {
    check_len(4, position.len())?;
    let hidden = {
        let r = position[0].round();
        if r.is_nan() {
            MIN_HIDDEN
        } else {
            r.clamp(MIN_HIDDEN as f64, MAX_HIDDEN as f64) as usize
        }
    };
    let act = |x| Activation::from_index(round_clamped(x, 1, 5)).expect("clamped to 1..=5");
    let lr = if position[3].is_nan() {
        MIN_LEARNING_RATE
    } else {
        position[3].clamp(MIN_LEARNING_RATE, MAX_LEARNING_RATE)
    };
    Ok(HyperParams {
        hidden,
        hidden_activation: act(position[1]),
        output_activation: act(position[2]),
        learning_rate: lr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingBudget {
    pub epochs: usize,
    pub patience: usize,
}

/// What the ICA searches in the ANN-ICA pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcaMode {
    #[default]
    MetaParams,
    Weights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridConfig {
    pub gwo: GwoSettings,
    pub ica: IcaSettings,
    pub ica_mode: IcaMode,
    /// Network and learning rate for the weight-space pipelines and the
    /// plain baseline.
    pub network: HyperParams,
    /// Backprop budget behind each meta-parameter fitness evaluation.
    pub search_budget: TrainingBudget,
    /// Backprop budget for the final retrain or fine-tune.
    pub final_budget: TrainingBudget,
    /// Share of the training rows (latest years) held out for validation.
    pub validation_fraction: f64,
    /// Half-width `w` of the weight box `[-w, w]^P`.
    pub weight_bound: f64,
    /// Half-width of the uniform random initialization.
    pub init_scale: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            gwo: GwoSettings::default(),
            ica: IcaSettings::default(),
            ica_mode: IcaMode::default(),
            network: HyperParams::default(),
            search_budget: TrainingBudget {
                epochs: 200,
                patience: 20,
            },
            final_budget: TrainingBudget {
                epochs: 2000,
                patience: 100,
            },
            validation_fraction: 0.2,
            weight_bound: 1.0,
            init_scale: 0.5,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.ica.validate()?;
        if self.gwo.pop_size < 3 {
            return Err(Error::config("gwo.pop_size", "must be at least 3"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config("validation_fraction", "must lie in (0, 1)"));
        }
        if !(self.weight_bound > 0.0 && self.weight_bound.is_finite()) {
            return Err(Error::config("weight_bound", "must be > 0"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config("init_scale", "must be > 0"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        hex_digest(text.as_bytes())
    }

    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, &[INIT_STREAM])
    }

    fn optimizer_seed(&self) -> u64 {
        derive_seed(self.seed, &[OPTIMIZER_STREAM])
    }

    pub fn gwo_config(&self, dim: usize) -> Result<GwoConfig> {
        let bounds = Bounds::uniform(dim, -self.weight_bound, self.weight_bound)?;
        let mut cfg = GwoConfig::new(self.gwo, bounds, self.optimizer_seed());
        cfg.execution = self.execution;
        Ok(cfg)
    }

    pub fn ica_weight_config(&self, dim: usize) -> Result<IcaConfig> {
        let bounds = Bounds::uniform(dim, -self.weight_bound, self.weight_bound)?;
        let mut cfg = IcaConfig::new(self.ica, bounds, self.optimizer_seed());
        cfg.execution = self.execution;
        Ok(cfg)
    }

    pub fn ica_meta_config(&self) -> IcaConfig {
        let mut cfg = IcaConfig::new(self.ica, HyperParams::search_bounds(), self.optimizer_seed());
        cfg.execution = self.execution;
        cfg
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AnnIca,
    AnnGwo,
    Backprop,
}

impl Method {
    /// Configuration spelling, as in `kind = "ann-gwo"`.
    pub fn id(self) -> &'static str {
        match self {
            Method::AnnIca => "ann-ica",
            Method::AnnGwo => "ann-gwo",
            Method::Backprop => "backprop",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::AnnIca => "ANN-ICA",
            Method::AnnGwo => "ANN-GWO",
            Method::Backprop => "backprop",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ann-ica" | "ica" => Ok(Method::AnnIca),
            "ann-gwo" | "gwo" => Ok(Method::AnnGwo),
            "backprop" | "bp" => Ok(Method::Backprop),
            other => Err(Error::config("method", format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub method: Method,
    pub seed: u64,
    pub config_digest: String,
}

/// Incumbent produced by a weight-space metaheuristic before fine-tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOne {
    pub incumbent: NetworkParams,
    /// Training MSE of the incumbent, as scored by the optimizer.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: NetworkParams,
    pub hyper: HyperParams,
    pub normalization: NormalizationStats,
    pub provenance: Provenance,
    pub history: TrainHistory,
    pub phase_one: Option<PhaseOne>,
}

impl TrainedModel {
    pub fn attributes(&self) -> &[Attribute] {
        &self.normalization.attributes
    }

    /// Predictions in target units.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let view = ds.clone().with_attributes(self.attributes())?;
        let samples = self.normalization.apply(&view)?;
        self.predict_samples(&samples)
    }

    /// Predictions in target units for already-normalized inputs.
    pub fn predict_samples(&self, samples: &Samples) -> Result<Vec<f64>> {
        Ok(self
            .params
            .predict(samples)?
            .into_iter()
            .map(|v| self.normalization.denormalize_target(v))
            .collect())
    }

    /// Hex SHA-256 over parameters, meta-parameters, scaling and provenance.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::new();
        for v in self.params.as_flat() {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        bytes.extend_from_slice(format!("{:?}{:?}{:?}", self.hyper, self.normalization, self.provenance).as_bytes());
        hex_digest(&bytes)
    }

    /// Topology agrees with the stored meta-parameters.
    pub fn is_consistent(&self) -> bool {
        let t = self.params.topology();
        t.n_hidden() == self.hyper.hidden
            && t.hidden_activation() == self.hyper.hidden_activation
            && t.output_activation() == self.hyper.output_activation
            && t.n_inputs() == self.normalization.attributes.len()
    }
}

/// Normalized fitting/validation samples for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub fit: Samples,
    pub val: Samples,
    pub stats: NormalizationStats,
}

pub fn prepare(train: &Dataset, config: &HybridConfig) -> Result<Prepared> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let stats = NormalizationStats::fit(train)?;
    let (fit, val) = train.temporal_holdout(config.validation_fraction)?;
    Ok(Prepared {
        fit: stats.apply(&fit)?,
        val: stats.apply(&val)?,
        stats,
    })
}

fn backprop_options(hyper: &HyperParams, budget: &TrainingBudget) -> BackpropOptions {
    BackpropOptions {
        learning_rate: hyper.learning_rate,
        max_epochs: budget.epochs,
        patience: budget.patience,
    }
}

/// Seeded random init followed by backprop under `budget`.
pub fn train_candidate(
    hyper: &HyperParams,
    fit: &Samples,
    val: &Samples,
    budget: &TrainingBudget,
    init_seed: u64,
    init_scale: f64,
) -> Result<(NetworkParams, TrainHistory)> {
    let topology = hyper.topology(fit.n_features())?;
    let start = init_params(topology, init_seed, init_scale)?;
    train_backprop(start, fit, val, &backprop_options(hyper, budget))
}

/// Validation RMSE (normalized units) of a meta-parameter country.
/// Divergent or invalid candidates score `+inf`.
pub fn ann_ica_fitness(
    position: &[f64],
    fit: &Samples,
    val: &Samples,
    budget: &TrainingBudget,
    init_seed: u64,
    init_scale: f64,
) -> f64 {
    let score = || -> Result<f64> {
        let hyper = decode_country(position)?;
        let (params, _) = train_candidate(&hyper, fit, val, budget, init_seed, init_scale)?;
        let monitor = if val.is_empty() { fit } else { val };
        Ok(params.mse(monitor)?.sqrt())
    };
    score().map_or(f64::INFINITY, sanitize)
}

fn finish(
    method: Method,
    params: NetworkParams,
    hyper: HyperParams,
    history: TrainHistory,
    phase_one: Option<PhaseOne>,
    stats: NormalizationStats,
    config: &HybridConfig,
) -> TrainedModel {
    TrainedModel {
        params,
        hyper,
        normalization: stats,
        provenance: Provenance {
            method,
            seed: config.seed,
            config_digest: config.digest(),
        },
        history,
        phase_one,
    }
}

/// Baseline: random init and backprop with `config.network` and the final
/// budget.
pub fn train_backprop_model(train: &Dataset, config: &HybridConfig) -> Result<TrainedModel> {
    config.validate()?;
    let p = prepare(train, config)?;
    let hyper = config.network;
    let (params, history) =
        train_candidate(&hyper, &p.fit, &p.val, &config.final_budget, config.init_seed(), config.init_scale)?;
    Ok(finish(Method::Backprop, params, hyper, history, None, p.stats, config))
}

/// ANN-ICA in the configured mode.
pub fn train_ann_ica(train: &Dataset, config: &HybridConfig) -> Result<TrainedModel> {
    match config.ica_mode {
        IcaMode::MetaParams => train_ica_meta(train, config),
        IcaMode::Weights => train_ica_weights(train, config),
    }
}

/// The meta-parameters ICA selects on `p`, with their fitness.
pub fn search_meta_params(p: &Prepared, config: &HybridConfig) -> Result<(HyperParams, f64)> {
    let init_seed = config.init_seed();
    let fitness = |x: &[f64]| ann_ica_fitness(x, &p.fit, &p.val, &config.search_budget, init_seed, config.init_scale);
    let (best, _) = ica::optimize(fitness, &config.ica_meta_config())?;
    Ok((decode_country(&best.position)?, best.cost))
}

fn train_ica_meta(train: &Dataset, config: &HybridConfig) -> Result<TrainedModel> {
    config.validate()?;
    let p = prepare(train, config)?;
    let (hyper, _) = search_meta_params(&p, config)?;
    let (params, history) =
        train_candidate(&hyper, &p.fit, &p.val, &config.final_budget, config.init_seed(), config.init_scale)?;
    Ok(finish(Method::AnnIca, params, hyper, history, None, p.stats, config))
}

fn fine_tune(
    method: Method,
    incumbent: Vec<f64>,
    loss: f64,
    topology: Topology,
    p: Prepared,
    config: &HybridConfig,
) -> Result<TrainedModel> {
    let incumbent = NetworkParams::from_flat(topology, incumbent)?;
    let hyper = config.network;
    let (params, history) = train_backprop(
        incumbent.clone(),
        &p.fit,
        &p.val,
        &backprop_options(&hyper, &config.final_budget),
    )?;
    Ok(finish(
        method,
        params,
        hyper,
        history,
        Some(PhaseOne { incumbent, loss }),
        p.stats,
        config,
    ))
}

fn weight_fitness(topology: Topology, fit: &Samples) -> impl Fn(&[f64]) -> f64 + Sync + Send + '_ {
    move |w: &[f64]| {
        NetworkParams::from_flat(topology, w.to_vec())
            .and_then(|p| p.mse(fit))
            .map_or(f64::INFINITY, sanitize)
    }
}

/// GWO over the weight box, then backprop fine-tuning. With
/// `gwo.num_iter == 0` the first member of the initial pack is fine-tuned
/// directly.
pub fn train_ann_gwo(train: &Dataset, config: &HybridConfig) -> Result<TrainedModel> {
    config.validate()?;
    let p = prepare(train, config)?;
    let topology = config.network.topology(p.fit.n_features())?;
    let gwo_cfg = config.gwo_config(topology.param_count())?;
    let fitness = weight_fitness(topology, &p.fit);
    let (incumbent, loss) = if config.gwo.num_iter == 0 {
        let first = gwo::initial_pack(&gwo_cfg).swap_remove(0);
        let loss = fitness(&first);
        (first, loss)
    } else {
        let (best, _) = gwo::optimize(&fitness, &gwo_cfg)?;
        (best.position, best.fitness)
    };
    drop(fitness);
    fine_tune(Method::AnnGwo, incumbent, loss, topology, p, config)
}

/// ICA over the weight box, then backprop fine-tuning.
pub fn train_ica_weights(train: &Dataset, config: &HybridConfig) -> Result<TrainedModel> {
    config.validate()?;
    let p = prepare(train, config)?;
    let topology = config.network.topology(p.fit.n_features())?;
    let ica_cfg = config.ica_weight_config(topology.param_count())?;
    let fitness = weight_fitness(topology, &p.fit);
    let (best, _) = ica::optimize(&fitness, &ica_cfg)?;
    drop(fitness);
    fine_tune(Method::AnnIca, best.position, best.cost, topology, p, config)
}

pub fn train_method(method: Method, train: &Dataset, config: &HybridConfig) -> Result<TrainedModel> {
    match method {
        Method::AnnIca => train_ann_ica(train, config),
        Method::AnnGwo => train_ann_gwo(train, config),
        Method::Backprop => train_backprop_model(train, config),
    }
}
