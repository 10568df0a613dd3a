//! Imperialist Competitive Algorithm over a bounded real box.
//!
//! A decade runs assimilation, revolution, re-evaluation, the
//! imperialist/colony swap and one round of imperialistic competition.
//! The run ends when a single empire remains or the decade budget is spent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{sanitize, stream_rng, Bounds, Execution, UnitSource};

const INIT_STREAM: u64 = 0x1ca1;
const FORM_STREAM: u64 = 0x1ca2;
const DECADE_STREAM: u64 = 0x1ca3;

#[derive(Debug, Clone, PartialEq)]
pub struct Country {
    pub position: Vec<f64>,
    /// Lower is better. `NaN` marks a moved country awaiting evaluation.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Empire {
    pub imperialist: Country,
    pub colonies: Vec<Country>,
}

impl Empire {
    /// Imperialist cost plus `colony_weight` times the mean colony cost.
    /// Lower total cost means a more powerful empire.
    pub fn total_cost(&self, colony_weight: f64) -> f64 {
        if self.colonies.is_empty() {
            return self.imperialist.cost;
        }
        let mean = self.colonies.iter().map(|c| c.cost).sum::<f64>() / self.colonies.len() as f64;
        self.imperialist.cost + colony_weight * mean
    }

    pub fn country_count(&self) -> usize {
        1 + self.colonies.len()
    }

    pub fn imperialist_is_best(&self) -> bool {
        self.colonies.iter().all(|c| self.imperialist.cost <= c.cost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcaSettings {
    pub n_countries: usize,
    pub n_imperialists: usize,
    /// Assimilation step factor (beta).
    pub assimilation_coeff: f64,
    pub revolution_rate: f64,
    /// Weight of the mean colony cost in an empire's total cost (xi).
    pub colony_weight: f64,
    pub max_decades: usize,
}

impl Default for IcaSettings {
    fn default() -> Self {
        Self {
            n_countries: 50,
            n_imperialists: 5,
            assimilation_coeff: 2.0,
            revolution_rate: 0.1,
            colony_weight: 0.1,
            max_decades: 200,
        }
    }
}

impl IcaSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_imperialists < 1 || self.n_imperialists >= self.n_countries {
            return Err(Error::config(
                "ica.n_imperialists",
                format!(
                    "need 1 <= n_imperialists < n_countries, got {} and {}",
                    self.n_imperialists, self.n_countries
                ),
            ));
        }
        if !(self.assimilation_coeff > 0.0 && self.assimilation_coeff.is_finite()) {
            return Err(Error::config("ica.assimilation_coeff", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.revolution_rate) {
            return Err(Error::config("ica.revolution_rate", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.colony_weight) {
            return Err(Error::config("ica.colony_weight", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaConfig {
    pub settings: IcaSettings,
    pub bounds: Bounds,
    pub seed: u64,
    pub execution: Execution,
}

impl IcaConfig {
    pub fn new(settings: IcaSettings, bounds: Bounds, seed: u64) -> Self {
        Self {
            settings,
            bounds,
            seed,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaHistory {
    pub best_per_decade: Vec<f64>,
    pub empires_per_decade: Vec<usize>,
    pub best: Country,
}

/// Power of each cost: distance below the largest finite cost. Non-finite
/// costs get zero power.
fn powers(costs: &[f64]) -> Vec<f64> {
    let max = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    costs
        .iter()
        .map(|&c| if c.is_finite() { max - c } else { 0.0 })
        .collect()
}

/// Splits `total` items proportionally to `weights` with largest-remainder
/// rounding. Remainder ties go to the lower index. All-zero weights split
/// uniformly.
pub fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let k = weights.len();
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 && sum.is_finite() {
        weights.iter().map(|w| w / sum * total as f64).collect()
    } else {
        vec![total as f64 / k as f64; k]
    };
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        let ri = quotas[i] - quotas[i].floor();
        let rj = quotas[j] - quotas[j].floor();
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Draws an index with probability proportional to `weights`; uniform when
/// every weight is zero.
pub fn roulette<R: UnitSource + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let sum: f64 = weights.iter().sum();
    let u = rng.unit();
    if !(sum > 0.0 && sum.is_finite()) {
        return ((u * weights.len() as f64) as usize).min(weights.len() - 1);
    }
    let target = u * sum;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last_positive = i;
            acc += w;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Makes the `n_imperialists` cheapest countries imperialists and deals the
/// rest out at random, in numbers proportional to imperialist power.
pub fn form_empires<R: UnitSource + ?Sized>(
    mut countries: Vec<Country>,
    n_imperialists: usize,
    rng: &mut R,
) -> Result<Vec<Empire>> {
    if n_imperialists == 0 || n_imperialists >= countries.len() {
        return Err(Error::config(
            "ica.n_imperialists",
            format!(
                "need 1 <= n_imperialists < {} countries, got {n_imperialists}",
                countries.len()
            ),
        ));
    }
    countries.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    let mut colonies = countries.split_off(n_imperialists);
    let imperialists = countries;

    let all_costs: Vec<f64> = imperialists
        .iter()
        .chain(&colonies)
        .map(|c| c.cost)
        .collect();
    let all_powers = powers(&all_costs);
    let counts = apportion(&all_powers[..n_imperialists], colonies.len());

    // Fisher-Yates through the unit source
    for i in (1..colonies.len()).rev() {
        let j = ((rng.unit() * (i + 1) as f64) as usize).min(i);
        colonies.swap(i, j);
    }

    let mut rest = colonies.into_iter();
    Ok(imperialists
        .into_iter()
        .zip(counts)
        .map(|(imperialist, n)| Empire {
            imperialist,
            colonies: rest.by_ref().take(n).collect(),
        })
        .collect())
}

/// Moves every colony towards its imperialist:
/// `x += u * beta * (imperialist - x)` with a fresh `u ~ U[0,1]` per
/// component. Moved colonies have their cost reset to `NaN`.
pub fn assimilate<R: UnitSource + ?Sized>(
    mut empire: Empire,
    beta: f64,
    rng: &mut R,
    bounds: &Bounds,
) -> Empire {
    let target = &empire.imperialist.position;
    for colony in &mut empire.colonies {
        for (x, t) in colony.position.iter_mut().zip(target) {
            *x += rng.unit() * beta * (t - *x);
        }
        bounds.clamp_in_place(&mut colony.position);
        colony.cost = f64::NAN;
    }
    empire
}

/// Re-samples each colony uniformly in `bounds` with probability `rate`.
pub fn revolve<R: UnitSource + ?Sized>(
    mut empire: Empire,
    rate: f64,
    rng: &mut R,
    bounds: &Bounds,
) -> Empire {
    for colony in &mut empire.colonies {
        if rng.unit() < rate {
            colony.position = bounds.sample(rng);
            colony.cost = f64::NAN;
        }
    }
    empire
}

/// Exchanges the imperialist with its best colony when that colony is
/// strictly cheaper. The first such colony in stored order wins ties.
pub fn swap_if_better(mut empire: Empire) -> Empire {
    let mut best: Option<usize> = None;
    for (i, c) in empire.colonies.iter().enumerate() {
        let bar = best.map_or(empire.imperialist.cost, |b| empire.colonies[b].cost);
        if c.cost < bar {
            best = Some(i);
        }
    }
    if let Some(i) = best {
        std::mem::swap(&mut empire.imperialist, &mut empire.colonies[i]);
    }
    empire
}

/// One round of imperialistic competition.
///
/// The empire with the highest total cost (first on ties) gives up its most
/// expensive colony to an empire drawn by roulette over the others' powers.
/// An empire with no colonies left collapses and its imperialist joins the
/// winner as a colony. Fewer than two empires: returned unchanged.
pub fn compete<R: UnitSource + ?Sized>(
    mut empires: Vec<Empire>,
    colony_weight: f64,
    rng: &mut R,
) -> Vec<Empire> {
    if empires.len() < 2 {
        return empires;
    }
    let totals: Vec<f64> = empires
        .iter()
        .map(|e| sanitize(e.total_cost(colony_weight)))
        .collect();
    let weakest = totals
        .iter()
        .enumerate()
        .fold(0, |w, (i, t)| if *t > totals[w] { i } else { w });

    let mut receiver_weights = powers(&totals);
    receiver_weights.remove(weakest);
    let pick = roulette(&receiver_weights, rng);
    let winner = if pick >= weakest { pick + 1 } else { pick };

    if let Some(worst) = most_expensive(&empires[weakest].colonies) {
        let colony = empires[weakest].colonies.remove(worst);
        empires[winner].colonies.push(colony);
    }
    if empires[weakest].colonies.is_empty() {
        let fallen = empires.remove(weakest);
        let winner = if winner > weakest { winner - 1 } else { winner };
        empires[winner].colonies.push(fallen.imperialist);
    }
    empires
}

fn most_expensive(colonies: &[Country]) -> Option<usize> {
    (0..colonies.len()).reduce(|w, i| {
        if colonies[i].cost.total_cmp(&colonies[w].cost).is_gt() {
            i
        } else {
            w
        }
    })
}

/// Per-step hook for invariant checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Formed,
    Swapped,
    Competed,
}

/// Starting positions, one independent stream per country.
pub fn initial_countries(config: &IcaConfig) -> Vec<Vec<f64>> {
    (0..config.settings.n_countries)
        .map(|i| config.bounds.sample(&mut stream_rng(config.seed, &[INIT_STREAM, i as u64])))
        .collect()
}

pub fn optimize<F>(fitness: F, config: &IcaConfig) -> Result<(Country, IcaHistory)>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    optimize_observed(fitness, config, |_, _, _| {})
}

/// [`optimize`] with a callback receiving `(decade, stage, empires)`.
pub fn optimize_observed<F, O>(
    fitness: F,
    config: &IcaConfig,
    mut observe: O,
) -> Result<(Country, IcaHistory)>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
    O: FnMut(usize, Stage, &[Empire]),
{
    let s = &config.settings;
    s.validate()?;
    let exec = config.execution;
    let bounds = &config.bounds;

    let positions = initial_countries(config);
    let countries: Vec<Country> = exec.map(s.n_countries, |i| Country {
        cost: sanitize(fitness(&positions[i])),
        position: positions[i].clone(),
    });
    let mut best = countries
        .iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .cloned()
        .expect("n_countries >= 2");
    let mut empires = form_empires(
        countries,
        s.n_imperialists,
        &mut stream_rng(config.seed, &[FORM_STREAM]),
    )?;
    observe(0, Stage::Formed, &empires);

    let mut best_per_decade = Vec::with_capacity(s.max_decades);
    let mut empires_per_decade = Vec::with_capacity(s.max_decades);

    for decade in 0..s.max_decades {
        if empires.len() == 1 {
            break;
        }
        let mut rng = stream_rng(config.seed, &[DECADE_STREAM, decade as u64]);
        empires = empires
            .into_iter()
            .map(|e| {
                let e = assimilate(e, s.assimilation_coeff, &mut rng, bounds);
                revolve(e, s.revolution_rate, &mut rng, bounds)
            })
            .collect();

        let pending: Vec<(usize, usize)> = empires
            .iter()
            .enumerate()
            .flat_map(|(ei, e)| {
                e.colonies
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.cost.is_nan())
                    .map(move |(ci, _)| (ei, ci))
            })
            .collect();
        let costs = exec.map(pending.len(), |k| {
            let (ei, ci) = pending[k];
            sanitize(fitness(&empires[ei].colonies[ci].position))
        });
        for ((ei, ci), cost) in pending.into_iter().zip(costs) {
            empires[ei].colonies[ci].cost = cost;
        }

        empires = empires.into_iter().map(swap_if_better).collect();
        observe(decade, Stage::Swapped, &empires);
        for e in &empires {
            if e.imperialist.cost < best.cost {
                best = e.imperialist.clone();
            }
        }

        empires = compete(empires, s.colony_weight, &mut rng);
        observe(decade, Stage::Competed, &empires);
        best_per_decade.push(best.cost);
        empires_per_decade.push(empires.len());
    }

    Ok((
        best.clone(),
        IcaHistory {
            best_per_decade,
            empires_per_decade,
            best,
        },
    ))
}
