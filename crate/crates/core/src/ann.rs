//! Single-hidden-layer feedforward regressor with a flat parameter vector.
//!
//! The flat layout is shared by backpropagation and by the metaheuristics
//! that search weight space:
//!
//! ```text
//! [ W1 (n_hidden x n_inputs, row-major) | b1 (n_hidden) | w2 (n_hidden) | b2 ]
//! ```
//!
//! Row `j` of `W1` holds the incoming weights of hidden neuron `j`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::search::stream_rng;

/// Hidden-neuron count bounds (exclusive): `1 < n_hidden < 100`.
pub const MIN_HIDDEN: usize = 2;
pub const MAX_HIDDEN: usize = 99;

/// Learning-rate ceiling; rates must lie in `(0, MAX_LEARNING_RATE]`.
pub const MAX_LEARNING_RATE: f64 = 5.0;

/// Activation catalog, addressed by the indices 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Logistic,
    Tanh,
    Relu,
    Softplus,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Identity,
        Activation::Logistic,
        Activation::Tanh,
        Activation::Relu,
        Activation::Softplus,
    ];

    pub fn from_index(index: u8) -> Result<Self> {
        match index {
            1..=5 => Ok(Self::ALL[usize::from(index - 1)]),
            _ => Err(Error::config(
                "activation",
                format!("index {index} outside 1..=5"),
            )),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Activation::Identity => 1,
            Activation::Logistic => 2,
            Activation::Tanh => 3,
            Activation::Relu => 4,
            Activation::Softplus => 5,
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Logistic => logistic(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            // log(1 + e^x) without overflow for large |x|
            Activation::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
        }
    }

    /// Derivative with respect to the pre-activation. The rectifier uses 0
    /// at the origin.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Logistic => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => logistic(x),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Activation::Identity => "identity",
            Activation::Logistic => "logistic",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
        };
        f.write_str(name)
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    n_inputs: usize,
    n_hidden: usize,
    hidden_activation: Activation,
    output_activation: Activation,
}

impl Topology {
    pub fn new(
        n_inputs: usize,
        n_hidden: usize,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if n_inputs == 0 {
            return Err(Error::config("n_inputs", "must be at least 1"));
        }
        if !(MIN_HIDDEN..=MAX_HIDDEN).contains(&n_hidden) {
            return Err(Error::config(
                "n_hidden",
                format!("{n_hidden} outside {MIN_HIDDEN}..={MAX_HIDDEN}"),
            ));
        }
        Ok(Self {
            n_inputs,
            n_hidden,
            hidden_activation,
            output_activation,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn param_count(&self) -> usize {
        (self.n_inputs + 1) * self.n_hidden + self.n_hidden + 1
    }

    fn b1_offset(&self) -> usize {
        self.n_inputs * self.n_hidden
    }

    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.n_hidden
    }

    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.n_hidden
    }
}

/// Row-major design matrix plus targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    features: Vec<f64>,
    n_features: usize,
    targets: Vec<f64>,
}

impl Samples {
    pub fn new(features: Vec<f64>, n_features: usize, targets: Vec<f64>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::config("n_features", "must be at least 1"));
        }
        check_len(targets.len() * n_features, features.len())?;
        Ok(Self {
            features,
            n_features,
            targets,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        check_len(rows.len(), targets.len())?;
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for row in rows {
            check_len(n_features, row.len())?;
            features.extend_from_slice(row);
        }
        Self::new(features, n_features.max(1), targets.to_vec())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Copy with column `col` replaced by `values`.
    pub fn with_column(&self, col: usize, values: &[f64]) -> Result<Self> {
        check_len(self.len(), values.len())?;
        if col >= self.n_features {
            return Err(Error::Shape {
                expected: self.n_features,
                actual: col,
            });
        }
        let mut out = self.clone();
        for (row, v) in out.features.chunks_exact_mut(self.n_features).zip(values) {
            row[col] = *v;
        }
        Ok(out)
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    /// Rows `start..end` as a new sample set.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            features: self.features[start * self.n_features..end * self.n_features].to_vec(),
            n_features: self.n_features,
            targets: self.targets[start..end].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    topology: Topology,
    values: Vec<f64>,
}

impl NetworkParams {
    /// Wraps a flat vector; fails unless its length equals the topology's
    /// parameter count.
    pub fn from_flat(topology: Topology, values: Vec<f64>) -> Result<Self> {
        check_len(topology.param_count(), values.len())?;
        Ok(Self { topology, values })
    }

    pub fn zeros(topology: Topology) -> Self {
        Self {
            topology,
            values: vec![0.0; topology.param_count()],
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }

    pub fn input_weight(&self, hidden: usize, input: usize) -> f64 {
        self.values[hidden * self.topology.n_inputs + input]
    }

    pub fn hidden_bias(&self, hidden: usize) -> f64 {
        self.values[self.topology.b1_offset() + hidden]
    }

    pub fn output_weight(&self, hidden: usize) -> f64 {
        self.values[self.topology.w2_offset() + hidden]
    }

    pub fn output_bias(&self) -> f64 {
        self.values[self.topology.b2_offset()]
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        check_len(self.topology.n_inputs, input.len())?;
        Ok(self.forward_unchecked(input))
    }

    fn forward_unchecked(&self, input: &[f64]) -> f64 {
        let t = &self.topology;
        let (w1, rest) = self.values.split_at(t.b1_offset());
        let (b1, rest) = rest.split_at(t.n_hidden);
        let (w2, b2) = rest.split_at(t.n_hidden);
        let mut z_out = b2[0];
        for (j, row) in w1.chunks_exact(t.n_inputs).enumerate() {
            let z = b1[j] + dot(row, input);
            z_out += w2[j] * t.hidden_activation.apply(z);
        }
        t.output_activation.apply(z_out)
    }

    pub fn predict(&self, samples: &Samples) -> Result<Vec<f64>> {
        check_len(self.topology.n_inputs, samples.n_features())?;
        Ok(samples.rows().map(|r| self.forward_unchecked(r)).collect())
    }

    /// Mean squared error over `samples`.
    pub fn mse(&self, samples: &Samples) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Empty("samples"));
        }
        check_len(self.topology.n_inputs, samples.n_features())?;
        let sse: f64 = samples
            .rows()
            .zip(samples.targets())
            .map(|(x, y)| {
                let r = self.forward_unchecked(x) - y;
                r * r
            })
            .sum();
        Ok(sse / samples.len() as f64)
    }

    /// Gradient of the batch MSE with respect to the flat parameter vector.
    pub fn gradient(&self, batch: &Samples) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let t = &self.topology;
        check_len(t.n_inputs, batch.n_features())?;
        let (w1, rest) = self.values.split_at(t.b1_offset());
        let (b1, rest) = rest.split_at(t.n_hidden);
        let (w2, b2) = rest.split_at(t.n_hidden);

        let mut grad = vec![0.0; self.values.len()];
        let mut z_hidden = vec![0.0; t.n_hidden];
        let mut a_hidden = vec![0.0; t.n_hidden];
        let scale = 2.0 / batch.len() as f64;

        for (x, y) in batch.rows().zip(batch.targets()) {
            let mut z_out = b2[0];
            for (j, row) in w1.chunks_exact(t.n_inputs).enumerate() {
                z_hidden[j] = b1[j] + dot(row, x);
                a_hidden[j] = t.hidden_activation.apply(z_hidden[j]);
                z_out += w2[j] * a_hidden[j];
            }
            let pred = t.output_activation.apply(z_out);
            let delta_out = scale * (pred - y) * t.output_activation.derivative(z_out);
            if delta_out == 0.0 {
                continue;
            }

            let (g_w1, g_rest) = grad.split_at_mut(t.b1_offset());
            let (g_b1, g_rest) = g_rest.split_at_mut(t.n_hidden);
            let (g_w2, g_b2) = g_rest.split_at_mut(t.n_hidden);
            g_b2[0] += delta_out;
            for j in 0..t.n_hidden {
                g_w2[j] += delta_out * a_hidden[j];
                let delta_h = delta_out * w2[j] * t.hidden_activation.derivative(z_hidden[j]);
                g_b1[j] += delta_h;
                for (g, xi) in g_w1[j * t.n_inputs..(j + 1) * t.n_inputs]
                    .iter_mut()
                    .zip(x)
                {
                    *g += delta_h * xi;
                }
            }
        }
        Ok(grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Uniform `[-scale, scale]` initialization from a seeded stream.
pub fn init_params(topology: Topology, seed: u64, scale: f64) -> Result<NetworkParams> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::config("init_scale", format!("{scale} is not > 0")));
    }
    let mut rng = stream_rng(seed, &[0x1417]);
    let values = (0..topology.param_count())
        .map(|_| rng.random_range(-scale..=scale))
        .collect();
    Ok(NetworkParams { topology, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackpropOptions {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated before stopping.
    pub patience: usize,
}

impl BackpropOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= MAX_LEARNING_RATE) {
            return Err(Error::config(
                "learning_rate",
                format!("{} outside (0, {MAX_LEARNING_RATE}]", self.learning_rate),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub initial_train_loss: f64,
    pub initial_val_loss: f64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub stopped_epoch: usize,
    /// Epoch whose parameters were returned; 0 means the starting point.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> f64 {
        if self.best_epoch == 0 {
            self.initial_val_loss
        } else {
            self.val_loss[self.best_epoch - 1]
        }
    }
}

/// Full-batch gradient descent on MSE with validation early stopping.
///
/// Returns the parameters with the lowest validation loss seen, including
/// the starting point. When `val` is empty the training loss is monitored
/// instead. `max_epochs == 0` returns the input unchanged.
pub fn train_backprop(
    params: NetworkParams,
    train: &Samples,
    val: &Samples,
    opts: &BackpropOptions,
) -> Result<(NetworkParams, TrainHistory)> {
    opts.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let monitor = if val.is_empty() { train } else { val };

    let initial_train_loss = params.mse(train)?;
    let initial_val_loss = params.mse(monitor)?;
    if !initial_train_loss.is_finite() || !initial_val_loss.is_finite() {
        return Err(Error::Divergence { epoch: 0 });
    }

    let mut history = TrainHistory {
        initial_train_loss,
        initial_val_loss,
        train_loss: Vec::with_capacity(opts.max_epochs),
        val_loss: Vec::with_capacity(opts.max_epochs),
        stopped_epoch: 0,
        best_epoch: 0,
    };
    let mut best = params.clone();
    let mut best_val = initial_val_loss;
    let mut current = params;
    let mut stale = 0usize;

    for epoch in 1..=opts.max_epochs {
        let grad = current.gradient(train)?;
        for (w, g) in current.values.iter_mut().zip(&grad) {
            *w -= opts.learning_rate * g;
        }
        let train_loss = current.mse(train)?;
        let val_loss = current.mse(monitor)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.stopped_epoch = epoch;

        if val_loss < best_val {
            best_val = val_loss;
            best.values.copy_from_slice(&current.values);
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale > opts.patience {
                break;
            }
        }
    }
    Ok((best, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn topo(i: usize, h: usize, ha: Activation, oa: Activation) -> Topology {
        Topology::new(i, h, ha, oa).unwrap()
    }

    #[test]
    fn activation_reference_values() {
        assert_eq!(Activation::Identity.apply(3.5), 3.5);
        assert_eq!(Activation::Logistic.apply(0.0), 0.5);
        // tanh(1) = (e^2 - 1)/(e^2 + 1)
        let e2 = std::f64::consts::E * std::f64::consts::E;
        assert_relative_eq!(Activation::Tanh.apply(1.0), (e2 - 1.0) / (e2 + 1.0), epsilon = 1e-15);
        assert_relative_eq!(Activation::Tanh.apply(1.0), 0.761_594_155_955_764_9, epsilon = 1e-15);
        assert_eq!(Activation::Relu.apply(-2.0), 0.0);
        assert_relative_eq!(Activation::Softplus.apply(0.0), std::f64::consts::LN_2);
        assert!(Activation::Softplus.apply(800.0).is_finite());
        assert!(Activation::Logistic.apply(-800.0) >= 0.0);
    }

    #[test]
    fn activation_derivatives_match_differences() {
        for act in Activation::ALL {
            for &x in &[-2.3, -0.4, 0.7, 1.9] {
                let h = 1e-6;
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                assert_relative_eq!(act.derivative(x), fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn activation_index_round_trip() {
        for i in 1..=5u8 {
            assert_eq!(Activation::from_index(i).unwrap().index(), i);
        }
        assert!(Activation::from_index(0).is_err());
        assert!(Activation::from_index(6).is_err());
    }

    #[test]
    fn topology_bounds_and_count() {
        assert!(Topology::new(3, 1, Activation::Tanh, Activation::Identity).is_err());
        assert!(Topology::new(3, 100, Activation::Tanh, Activation::Identity).is_err());
        assert!(Topology::new(0, 5, Activation::Tanh, Activation::Identity).is_err());
        let t = topo(3, 5, Activation::Tanh, Activation::Identity);
        assert_eq!(t.param_count(), 4 * 5 + 6);
    }

    #[test]
    fn zero_network_outputs_activation_of_zero() {
        for act in Activation::ALL {
            let p = NetworkParams::zeros(topo(3, 4, Activation::Tanh, act));
            assert_eq!(p.forward(&[1.0, -2.0, 5.0]).unwrap(), act.apply(0.0));
        }
    }

    #[test]
    fn identity_chain_passes_input_through() {
        // two hidden units, only the first carries signal
        let t = topo(1, 2, Activation::Identity, Activation::Identity);
        let p = NetworkParams::from_flat(t, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.forward(&[2.0]).unwrap(), 2.0);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = NetworkParams::zeros(topo(3, 4, Activation::Tanh, Activation::Identity));
        assert!(matches!(p.forward(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn from_flat_checks_length() {
        let t = topo(2, 3, Activation::Tanh, Activation::Identity);
        assert!(NetworkParams::from_flat(t, vec![0.0; 5]).is_err());
    }

    #[test]
    fn gradient_is_zero_on_perfect_fit() {
        let t = topo(2, 3, Activation::Tanh, Activation::Logistic);
        let p = init_params(t, 3, 0.5).unwrap();
        let rows = vec![vec![0.1, 0.2], vec![-0.4, 0.9]];
        let targets: Vec<f64> = rows.iter().map(|r| p.forward(r).unwrap()).collect();
        let s = Samples::from_rows(&rows, &targets).unwrap();
        assert!(p.gradient(&s).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn gradient_rejects_empty_batch() {
        let p = NetworkParams::zeros(topo(2, 3, Activation::Tanh, Activation::Identity));
        let s = Samples::new(vec![], 2, vec![]).unwrap();
        assert!(matches!(p.gradient(&s), Err(Error::Empty(_))));
    }

    #[test]
    fn output_bias_gradient_negates_with_targets() {
        // zero output weights remove the hidden contribution
        let t = topo(2, 3, Activation::Tanh, Activation::Identity);
        let p = NetworkParams::zeros(t);
        let rows = vec![vec![0.3, 0.1], vec![0.5, -0.2]];
        let pos = Samples::from_rows(&rows, &[1.0, 2.0]).unwrap();
        let neg = Samples::from_rows(&rows, &[-1.0, -2.0]).unwrap();
        let b2 = t.param_count() - 1;
        assert_eq!(p.gradient(&pos).unwrap()[b2], -p.gradient(&neg).unwrap()[b2]);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let t = topo(4, 10, Activation::Tanh, Activation::Identity);
        let a = init_params(t, 11, 0.5).unwrap();
        let b = init_params(t, 11, 0.5).unwrap();
        assert_eq!(a, b);
        assert!(a.as_flat().iter().all(|v| (-0.5..=0.5).contains(v)));
        assert!(init_params(t, 1, 0.0).is_err());
    }

    #[test]
    fn different_seeds_give_different_vectors() {
        let t = topo(4, 10, Activation::Tanh, Activation::Identity);
        for s in 0..100u64 {
            let a = init_params(t, 2 * s, 0.5).unwrap();
            let b = init_params(t, 2 * s + 1, 0.5).unwrap();
            assert_ne!(a.as_flat(), b.as_flat());
        }
    }

    fn linear_problem() -> (Samples, Samples) {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0, (i % 7) as f64 / 7.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.7 * r[0] - 0.3 * r[1] + 0.1).collect();
        let all = Samples::from_rows(&rows, &y).unwrap();
        (all.slice(0, 16), all.slice(16, 20))
    }

    #[test]
    fn backprop_descends_on_linear_target() {
        let (train, val) = linear_problem();
        let t = topo(2, 3, Activation::Identity, Activation::Identity);
        let p = init_params(t, 5, 0.5).unwrap();
        let opts = BackpropOptions {
            learning_rate: 0.01,
            max_epochs: 200,
            patience: 200,
        };
        let (_, h) = train_backprop(p, &train, &val, &opts).unwrap();
        assert!(h.train_loss.last().unwrap() < &h.initial_train_loss);
        assert_eq!(h.train_loss.len(), h.stopped_epoch);
        assert_eq!(h.val_loss.len(), h.stopped_epoch);
    }

    #[test]
    fn patience_zero_stops_at_first_non_improvement() {
        let (train, val) = linear_problem();
        let t = topo(2, 3, Activation::Tanh, Activation::Identity);
        let p = init_params(t, 5, 0.5).unwrap();
        // an oversized step makes validation worse immediately
        let opts = BackpropOptions {
            learning_rate: 5.0,
            max_epochs: 50,
            patience: 0,
        };
        match train_backprop(p, &train, &val, &opts) {
            Ok((_, h)) => {
                let first_bad = h
                    .val_loss
                    .iter()
                    .scan(h.initial_val_loss, |best, &v| {
                        let improved = v < *best;
                        if improved {
                            *best = v;
                        }
                        Some(improved)
                    })
                    .position(|improved| !improved);
                assert_eq!(first_bad.map(|i| i + 1), Some(h.stopped_epoch));
            }
            Err(Error::Divergence { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn zero_epochs_returns_input() {
        let (train, val) = linear_problem();
        let t = topo(2, 3, Activation::Tanh, Activation::Identity);
        let p = init_params(t, 5, 0.5).unwrap();
        let opts = BackpropOptions {
            learning_rate: 0.1,
            max_epochs: 0,
            patience: 3,
        };
        let (q, h) = train_backprop(p.clone(), &train, &val, &opts).unwrap();
        assert_eq!(p, q);
        assert_eq!(h.stopped_epoch, 0);
    }

    #[test]
    fn rejects_out_of_range_learning_rate() {
        let (train, val) = linear_problem();
        let p = NetworkParams::zeros(topo(2, 3, Activation::Tanh, Activation::Identity));
        for lr in [0.0, -1.0, 5.5] {
            let opts = BackpropOptions {
                learning_rate: lr,
                max_epochs: 1,
                patience: 0,
            };
            assert!(train_backprop(p.clone(), &train, &val, &opts).is_err());
        }
    }

    #[test]
    fn divergence_names_the_epoch() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![1e3 * i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| 1e3 * i as f64).collect();
        let s = Samples::from_rows(&rows, &y).unwrap();
        let t = topo(1, 2, Activation::Identity, Activation::Identity);
        let p = init_params(t, 1, 0.5).unwrap();
        let opts = BackpropOptions {
            learning_rate: 5.0,
            max_epochs: 100,
            patience: 100,
        };
        match train_backprop(p, &s, &s, &opts) {
            Err(Error::Divergence { epoch }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
