//! Grey Wolf Optimizer over a bounded real box.
//!
//! Each iteration ranks the pack, freezes the three best wolves as
//! alpha/beta/delta, and moves every wolf (leaders included) to the mean of
//! three candidate positions, one per leader:
//!
//! ```text
//! A = 2a*r1 - a          C = 2*r2
//! D_k = |C_k * X_k - X|  X'_k = X_k - A_k * D_k
//! X(t+1) = (X'_alpha + X'_beta + X'_delta) / 3
//! ```
//!
//! with `a` decaying linearly from 2 towards 0. The best wolf ever seen is
//! tracked separately so the recorded best fitness never increases.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::search::{sanitize, stream_rng, Bounds, Execution, UnitSource};

const INIT_STREAM: u64 = 0x6a01;
const MOVE_STREAM: u64 = 0x6a02;

#[derive(Debug, Clone, PartialEq)]
pub struct Wolf {
    pub position: Vec<f64>,
    /// Lower is better; non-finite evaluations are stored as `+inf`.
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderTriplet {
    pub alpha: Wolf,
    pub beta: Wolf,
    pub delta: Wolf,
}

/// Population and iteration settings without the search box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwoSettings {
    pub pop_size: usize,
    pub num_iter: usize,
}

impl Default for GwoSettings {
    fn default() -> Self {
        Self {
            pop_size: 30,
            num_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwoConfig {
    pub pop_size: usize,
    pub num_iter: usize,
    pub bounds: Bounds,
    pub seed: u64,
    pub execution: Execution,
}

impl GwoConfig {
    pub fn new(settings: GwoSettings, bounds: Bounds, seed: u64) -> Self {
        Self {
            pop_size: settings.pop_size,
            num_iter: settings.num_iter,
            bounds,
            seed,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 3 {
            return Err(Error::config(
                "gwo.pop_size",
                format!("{} < 3; the leader triplet needs three wolves", self.pop_size),
            ));
        }
        if self.num_iter == 0 {
            return Err(Error::config("gwo.num_iter", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwoHistory {
    /// Best-so-far fitness after each iteration's ranking.
    pub best_per_iter: Vec<f64>,
    pub best: Wolf,
}

/// Read-only view handed to an observer after every ranking.
#[derive(Debug)]
pub struct IterationView<'a> {
    pub iteration: usize,
    pub pack: &'a [Wolf],
    pub leaders: &'a LeaderTriplet,
    pub best: &'a Wolf,
}

/// Linear decay `a = 2 - t * (2 / num_iter)`.
pub fn coefficient_a(t: usize, num_iter: usize) -> Result<f64> {
    if num_iter == 0 {
        return Err(Error::config("gwo.num_iter", "must be at least 1"));
    }
    if t > num_iter {
        return Err(Error::config(
            "iteration",
            format!("{t} exceeds num_iter {num_iter}"),
        ));
    }
    Ok(2.0 - t as f64 * (2.0 / num_iter as f64))
}

/// Draws `A = 2a*r1 - a` and `C = 2*r2` for `dim` components.
///
/// All `dim` values of `r1` are drawn first, then all of `r2`.
pub fn sample_coefficients<R: UnitSource + ?Sized>(
    a: f64,
    dim: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let big_a = (0..dim).map(|_| 2.0 * a * rng.unit() - a).collect();
    let c = (0..dim).map(|_| 2.0 * rng.unit()).collect();
    (big_a, c)
}

/// `|C * X_leader - X|`, componentwise.
pub fn leader_distance(c: &[f64], leader: &[f64], wolf: &[f64]) -> Result<Vec<f64>> {
    check_len(c.len(), leader.len())?;
    check_len(c.len(), wolf.len())?;
    Ok(c.iter()
        .zip(leader)
        .zip(wolf)
        .map(|((ci, li), wi)| (ci * li - wi).abs())
        .collect())
}

/// `X_leader - A * D`, componentwise.
pub fn candidate_position(leader: &[f64], a: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    check_len(leader.len(), a.len())?;
    check_len(leader.len(), d.len())?;
    Ok(leader
        .iter()
        .zip(a)
        .zip(d)
        .map(|((li, ai), di)| li - ai * di)
        .collect())
}

/// One wolf's move against a frozen leader triplet.
///
/// Coefficients are drawn per leader in the order alpha, beta, delta, each
/// through [`sample_coefficients`]; the averaged position is clamped to
/// `bounds`.
pub fn update_position<R: UnitSource + ?Sized>(
    wolf: &[f64],
    leaders: &LeaderTriplet,
    a: f64,
    rng: &mut R,
    bounds: &Bounds,
) -> Result<Vec<f64>> {
    check_len(bounds.dim(), wolf.len())?;
    let mut candidates = Vec::with_capacity(3);
    for leader in [&leaders.alpha, &leaders.beta, &leaders.delta] {
        let (big_a, c) = sample_coefficients(a, wolf.len(), rng);
        let d = leader_distance(&c, &leader.position, wolf)?;
        candidates.push(candidate_position(&leader.position, &big_a, &d)?);
    }
    let mut next: Vec<f64> = (0..wolf.len())
        .map(|k| (candidates[0][k] + candidates[1][k] + candidates[2][k]) / 3.0)
        .collect();
    bounds.clamp_in_place(&mut next);
    Ok(next)
}

/// The starting positions for `config`, drawn uniformly in the box. Wolf
/// `i` uses its own seeded stream.
pub fn initial_pack(config: &GwoConfig) -> Vec<Vec<f64>> {
    (0..config.pop_size)
        .map(|i| config.bounds.sample(&mut stream_rng(config.seed, &[INIT_STREAM, i as u64])))
        .collect()
}

/// Ranks the pack by fitness (stable: ties keep pack order) and returns the
/// three best. Requires at least three wolves.
pub fn rank_leaders(pack: &[Wolf]) -> LeaderTriplet {
    assert!(pack.len() >= 3, "leader triplet needs three wolves");
    let mut order: Vec<usize> = (0..pack.len()).collect();
    order.sort_by(|&i, &j| pack[i].fitness.total_cmp(&pack[j].fitness));
    LeaderTriplet {
        alpha: pack[order[0]].clone(),
        beta: pack[order[1]].clone(),
        delta: pack[order[2]].clone(),
    }
}

pub fn optimize<F>(fitness: F, config: &GwoConfig) -> Result<(Wolf, GwoHistory)>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    optimize_observed(fitness, config, |_| {})
}

/// [`optimize`] with a callback invoked after each iteration's ranking.
pub fn optimize_observed<F, O>(
    fitness: F,
    config: &GwoConfig,
    mut observe: O,
) -> Result<(Wolf, GwoHistory)>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
    O: FnMut(&IterationView<'_>),
{
    config.validate()?;
    let exec = config.execution;
    let init = initial_pack(config);
    let mut pack: Vec<Wolf> = exec.map(init.len(), |i| Wolf {
        fitness: sanitize(fitness(&init[i])),
        position: init[i].clone(),
    });

    let mut best: Option<Wolf> = None;
    let mut best_per_iter = Vec::with_capacity(config.num_iter);

    for t in 0..config.num_iter {
        let leaders = rank_leaders(&pack);
        if best
            .as_ref()
            .is_none_or(|b| leaders.alpha.fitness < b.fitness)
        {
            best = Some(leaders.alpha.clone());
        }
        let best_ref = best.as_ref().expect("set above");
        best_per_iter.push(best_ref.fitness);
        observe(&IterationView {
            iteration: t,
            pack: &pack,
            leaders: &leaders,
            best: best_ref,
        });

        // the final move would never be evaluated
        if t + 1 == config.num_iter {
            break;
        }
        let a = coefficient_a(t, config.num_iter)?;
        let moved: Vec<Result<Wolf>> = exec.map(pack.len(), |i| {
            let mut rng = stream_rng(config.seed, &[MOVE_STREAM, t as u64, i as u64]);
            let position = update_position(&pack[i].position, &leaders, a, &mut rng, &config.bounds)?;
            Ok(Wolf {
                fitness: sanitize(fitness(&position)),
                position,
            })
        });
        pack = moved.into_iter().collect::<Result<_>>()?;
    }

    let best = best.expect("num_iter >= 1");
    Ok((
        best.clone(),
        GwoHistory {
            best_per_iter,
            best,
        },
    ))
}
