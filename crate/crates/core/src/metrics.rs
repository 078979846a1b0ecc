//! Point-forecast error metrics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentMetrics {
    pub component: usize,
    pub mae: f64,
    pub rmse: f64,
    pub smape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    /// Symmetric MAPE in percent, in `[0, 200]`.
    pub smape: f64,
    pub per_component: Vec<ComponentMetrics>,
    pub target_components: Vec<usize>,
}

/// One SMAPE term; `0/0` counts as a perfect prediction.
pub fn smape_term(pred: f64, truth: f64) -> f64 {
    let denom = pred.abs() + truth.abs();
    if denom == 0.0 {
        0.0
    } else {
        2.0 * (pred - truth).abs() / denom
    }
}

#[derive(Default)]
struct Acc {
    abs: f64,
    sq: f64,
    smape: f64,
    n: usize,
}

impl Acc {
    fn add(&mut self, p: f64, y: f64) {
        let e = p - y;
        self.abs += e.abs();
        self.sq += e * e;
        self.smape += smape_term(p, y);
        self.n += 1;
    }

    fn finish(&self) -> (f64, f64, f64) {
        if self.n == 0 {
            return (0.0, 0.0, 0.0);
        }
        let n = self.n as f64;
        (self.abs / n, (self.sq / n).sqrt(), 100.0 * self.smape / n)
    }
}

/// MAE, RMSE and SMAPE of `pred` against `truth` (rows are time steps)
/// over the `targets` columns; an empty `targets` selects every column.
pub fn metrics(pred: &Mat, truth: &Mat, targets: &[usize]) -> Result<MetricReport> {
    if pred.nrows() != truth.nrows() {
        return Err(Error::dim("metric rows", truth.nrows(), pred.nrows()));
    }
    if pred.ncols() != truth.ncols() {
        return Err(Error::dim("metric columns", truth.ncols(), pred.ncols()));
    }
    let targets: Vec<usize> = if targets.is_empty() {
        (0..truth.ncols()).collect()
    } else {
        targets.to_vec()
    };
    if let Some(&bad) = targets.iter().find(|&&c| c >= truth.ncols()) {
        return Err(Error::domain(format!("target component {bad} out of range for dimension {}", truth.ncols())));
    }
    let mut all = Acc::default();
    let mut per_component = Vec::with_capacity(targets.len());
    for &c in &targets {
        let mut acc = Acc::default();
        for r in 0..truth.nrows() {
            acc.add(pred[(r, c)], truth[(r, c)]);
            all.add(pred[(r, c)], truth[(r, c)]);
        }
        let (mae, rmse, smape) = acc.finish();
        per_component.push(ComponentMetrics {
            component: c,
            mae,
            rmse,
            smape,
        });
    }
    let (mae, rmse, smape) = all.finish();
    Ok(MetricReport {
        mae,
        rmse,
        smape,
        per_component,
        target_components: targets,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction_scores_zero() {
        let y = Mat::from_row_slice(2, 2, &[1.0, 0.0, -3.0, 2.0]);
        let r = metrics(&y, &y, &[]).unwrap();
        assert_eq!((r.mae, r.rmse, r.smape), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_computed_example() {
        let pred = Mat::from_row_slice(2, 1, &[1.0, 3.0]);
        let truth = Mat::from_row_slice(2, 1, &[1.0, 1.0]);
        let r = metrics(&pred, &truth, &[0]).unwrap();
        assert_eq!(r.mae, 1.0);
        assert!((r.rmse - 2f64.sqrt()).abs() < 1e-15);
        assert!((r.smape - 50.0).abs() < 1e-12);
    }

    #[test]
    fn only_targets_are_scored() {
        let pred = Mat::from_row_slice(1, 2, &[0.0, 10.0]);
        let truth = Mat::zeros(1, 2);
        assert_eq!(metrics(&pred, &truth, &[0]).unwrap().mae, 0.0);
        assert_eq!(metrics(&pred, &truth, &[1]).unwrap().mae, 10.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(metrics(&Mat::zeros(2, 2), &Mat::zeros(3, 2), &[]).is_err());
        assert!(metrics(&Mat::zeros(2, 2), &Mat::zeros(2, 2), &[2]).is_err());
    }

    #[test]
    fn mean_sd_basics() {
        assert_eq!(mean_sd(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    fn pair() -> impl Strategy<Value = (Mat, Mat)> {
        (1usize..6, 1usize..4).prop_flat_map(|(r, c)| {
            (
                proptest::collection::vec(-100.0..100.0f64, r * c),
                proptest::collection::vec(-100.0..100.0f64, r * c),
            )
                .prop_map(move |(a, b)| (Mat::from_vec(r, c, a), Mat::from_vec(r, c, b)))
        })
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae((p, y) in pair()) {
            let r = metrics(&p, &y, &[]).unwrap();
            prop_assert!(r.rmse >= r.mae * (1.0 - 1e-12));
            for c in &r.per_component {
                prop_assert!(c.rmse >= c.mae * (1.0 - 1e-12));
            }
        }

        #[test]
        fn smape_is_symmetric_and_bounded((p, y) in pair()) {
            let a = metrics(&p, &y, &[]).unwrap().smape;
            let b = metrics(&y, &p, &[]).unwrap().smape;
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=200.0).contains(&a));
        }
    }
}
