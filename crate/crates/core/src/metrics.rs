//! Accuracy measures for regression reports.
//!
//! `r_index` is the uncentred index `sqrt(1 - SSE / sum(A^2))`, not Pearson's
//! correlation; [`pearson`] is kept separately as a diagnostic and is never
//! used in reports.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_len, Error, Result};
use crate::hybrid::TrainedModel;

fn check_pair(targets: &[f64], predictions: &[f64]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::Empty("targets"));
    }
    check_len(targets.len(), predictions.len())
}

fn sse(targets: &[f64], predictions: &[f64]) -> f64 {
    targets
        .iter()
        .zip(predictions)
        .map(|(a, p)| (a - p) * (a - p))
        .sum()
}

pub fn rmse(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    check_pair(targets, predictions)?;
    Ok((sse(targets, predictions) / targets.len() as f64).sqrt())
}

pub fn mae(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    check_pair(targets, predictions)?;
    let total: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(a, p)| (a - p).abs())
        .sum();
    Ok(total / targets.len() as f64)
}

/// MAE as a percentage of the mean target.
pub fn mae_percent(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    let m = mae(targets, predictions)?;
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    if mean == 0.0 {
        return Err(Error::UndefinedDenominator("mean target is zero"));
    }
    Ok(100.0 * m / mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RIndex {
    pub value: f64,
    /// Set when the radicand was negative and the value clamped to 0.
    pub clamped: bool,
}

pub fn r_index(targets: &[f64], predictions: &[f64]) -> Result<RIndex> {
    check_pair(targets, predictions)?;
    let energy: f64 = targets.iter().map(|a| a * a).sum();
    if energy == 0.0 {
        return Err(Error::UndefinedDenominator("all targets are zero"));
    }
    let radicand = 1.0 - sse(targets, predictions) / energy;
    Ok(if radicand < 0.0 {
        RIndex {
            value: 0.0,
            clamped: true,
        }
    } else {
        RIndex {
            value: radicand.sqrt(),
            clamped: false,
        }
    })
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(targets: &[f64], predictions: &[f64]) -> Result<Option<f64>> {
    check_pair(targets, predictions)?;
    let n = targets.len() as f64;
    let ma = targets.iter().sum::<f64>() / n;
    let mp = predictions.iter().sum::<f64>() / n;
    let (mut sap, mut saa, mut spp) = (0.0, 0.0, 0.0);
    for (a, p) in targets.iter().zip(predictions) {
        sap += (a - ma) * (p - mp);
        saa += (a - ma) * (a - ma);
        spp += (p - mp) * (p - mp);
    }
    if saa == 0.0 || spp == 0.0 {
        return Ok(None);
    }
    Ok(Some(sap / (saa * spp).sqrt()))
}

/// One cell group of a comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub r: f64,
    pub mae_pct: f64,
    pub rmse: f64,
    pub n: usize,
    pub r_clamped: bool,
}

impl MetricsRow {
    pub fn compute(targets: &[f64], predictions: &[f64]) -> Result<Self> {
        let r = r_index(targets, predictions)?;
        Ok(Self {
            r: r.value,
            mae_pct: mae_percent(targets, predictions)?,
            rmse: rmse(targets, predictions)?,
            n: targets.len(),
            r_clamped: r.clamped,
        })
    }
}

/// Metrics of `model` on `test`, in target units.
pub fn evaluate(model: &TrainedModel, test: &Dataset) -> Result<MetricsRow> {
    let preds = model.predict(test)?;
    let targets: Vec<f64> = test.records().iter().map(|r| r.yield_t_ha).collect();
    MetricsRow::compute(&targets, &preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        let a = [1.0, 2.0, 3.0];
        let p = [2.0, 2.0, 2.0];
        assert!((rmse(&a, &p).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((mae(&a, &p).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert!((mae_percent(&[10.0, 10.0], &[9.0, 11.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(mae_percent(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn r_index_cases() {
        let a = [1.5, -2.0, 4.0];
        assert_eq!(r_index(&a, &a).unwrap(), RIndex { value: 1.0, clamped: false });
        assert_eq!(
            r_index(&[3.0, 4.0], &[0.0, 0.0]).unwrap(),
            RIndex { value: 0.0, clamped: false }
        );
        let worse = r_index(&[1.0, 1.0], &[5.0, -3.0]).unwrap();
        assert_eq!(worse, RIndex { value: 0.0, clamped: true });
    }

    #[test]
    fn error_paths() {
        assert!(matches!(rmse(&[], &[]), Err(Error::Empty(_))));
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::Shape { .. })));
        assert!(matches!(r_index(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::UndefinedDenominator(_))));
        assert!(matches!(mae_percent(&[1.0, -1.0], &[0.0, 0.0]), Err(Error::UndefinedDenominator(_))));
    }

    #[test]
    fn pearson_is_separate_from_r_index() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let shifted = [11.0, 12.0, 13.0, 14.0];
        assert!((pearson(&a, &shifted).unwrap().unwrap() - 1.0).abs() < 1e-12);
        assert!(r_index(&a, &shifted).unwrap().value < 1.0);
        assert_eq!(pearson(&a, &[2.0; 4]).unwrap(), None);
    }

    fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0.1f64..100.0, n),
                prop::collection::vec(-50.0f64..150.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae((a, p) in paired()) {
            prop_assert!(rmse(&a, &p).unwrap() + 1e-12 >= mae(&a, &p).unwrap());
        }

        #[test]
        fn scale_behaviour((a, p) in paired(), c in 0.1f64..10.0) {
            let ca: Vec<f64> = a.iter().map(|v| v * c).collect();
            let cp: Vec<f64> = p.iter().map(|v| v * c).collect();
            let base = rmse(&a, &p).unwrap();
            prop_assert!((rmse(&ca, &cp).unwrap() - c * base).abs() <= 1e-9 * (1.0 + c * base));
            let pct = mae_percent(&a, &p).unwrap();
            prop_assert!((mae_percent(&ca, &cp).unwrap() - pct).abs() <= 1e-9 * (1.0 + pct));
            let r = r_index(&a, &p).unwrap();
            let rc = r_index(&ca, &cp).unwrap();
            prop_assert!((r.value - rc.value).abs() < 1e-9);
        }

        #[test]
        fn permutation_invariance((a, p) in paired(), rot in 0usize..40) {
            let k = rot % a.len();
            let mut ra = a.clone();
            let mut rp = p.clone();
            ra.rotate_left(k);
            rp.rotate_left(k);
            prop_assert!((rmse(&a, &p).unwrap() - rmse(&ra, &rp).unwrap()).abs() < 1e-9);
            prop_assert!((mae(&a, &p).unwrap() - mae(&ra, &rp).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn clamp_always_flagged((a, p) in paired()) {
            let r = r_index(&a, &p).unwrap();
            let energy: f64 = a.iter().map(|v| v * v).sum();
            let residual: f64 = a.iter().zip(&p).map(|(x, y)| (x - y) * (x - y)).sum();
            prop_assert_eq!(r.clamped, residual > energy);
            prop_assert!((0.0..=1.0).contains(&r.value));
        }
    }
}
