//! Posterior summaries, effective sample size, and the estimation and
//! prediction error metrics.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{HblError, Result};
use crate::gibbs::{run_chain, FitConfig};
use crate::model::{huber, Dataset, PosteriorSamples};

/// Huber threshold used for the prediction-error metric.
pub const HUBER_C: f64 = 1.345;

/// Minimum number of draws accepted by [`summarize`].
pub const MIN_SUMMARY_DRAWS: usize = 10;

/// Minimum series length accepted by [`ess`] and [`acf`].
pub const MIN_SERIES_LEN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub median: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub params: Vec<ParamSummary>,
}

impl Summary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Posterior medians of `beta0..betap`.
    pub fn coefficient_medians(&self) -> DVector<f64> {
        let v: Vec<f64> = self.coefficients().map(|p| p.median).collect();
        DVector::from_vec(v)
    }

    /// Equal-tailed 95% intervals of `beta0..betap`.
    pub fn coefficient_intervals(&self) -> Vec<(f64, f64)> {
        self.coefficients().map(|p| (p.lower, p.upper)).collect()
    }

    fn coefficients(&self) -> impl Iterator<Item = &ParamSummary> {
        self.params.iter().filter(|p| {
            p.name
                .strip_prefix("beta")
                .is_some_and(|r| !r.is_empty() && r.bytes().all(|b| b.is_ascii_digit()))
        })
    }
}

/// Quantile of sorted data by linear interpolation between order statistics
/// (`h = (S - 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Median, mean, 2.5% and 97.5% quantiles and ESS of every stored column.
/// ESS is capped at the number of draws.
pub fn summarize(samples: &PosteriorSamples) -> Result<Summary> {
    let s = samples.len();
    if s < MIN_SUMMARY_DRAWS {
        return Err(HblError::InsufficientSamples {
            needed: MIN_SUMMARY_DRAWS,
            got: s,
        });
    }
    let params = samples
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<f64> = samples.draws.column(j).iter().copied().collect();
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let ess = if s >= MIN_SERIES_LEN {
                ess(&col).map(|e| e.min(s as f64)).unwrap_or(s as f64)
            } else {
                s as f64
            };
            ParamSummary {
                name: name.clone(),
                median: quantile_sorted(&sorted, 0.5),
                mean: col.iter().sum::<f64>() / s as f64,
                lower: quantile_sorted(&sorted, 0.025),
                upper: quantile_sorted(&sorted, 0.975),
                ess,
            }
        })
        .collect();
    Ok(Summary { params })
}

fn check_len(series: &[f64]) -> Result<()> {
    if series.len() < MIN_SERIES_LEN {
        return Err(HblError::InsufficientSamples {
            needed: MIN_SERIES_LEN,
            got: series.len(),
        });
    }
    Ok(())
}

/// Autocovariance at `lag` with divisor S.
fn autocov(centered: &[f64], lag: usize) -> f64 {
    let s = centered.len();
    let sum: f64 = centered[..s - lag]
        .iter()
        .zip(&centered[lag..])
        .map(|(a, b)| a * b)
        .sum();
    sum / s as f64
}

fn centered(series: &[f64]) -> Vec<f64> {
    let m = series.iter().sum::<f64>() / series.len() as f64;
    series.iter().map(|x| x - m).collect()
}

/// Sample autocorrelations at lags `0..=max_lag`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    check_len(series)?;
    let c = centered(series);
    let c0 = autocov(&c, 0);
    let max_lag = max_lag.min(series.len() - 1);
    if c0 == 0.0 {
        let mut out = vec![0.0; max_lag + 1];
        out[0] = 1.0;
        return Ok(out);
    }
    Ok((0..=max_lag).map(|k| autocov(&c, k) / c0).collect())
}

/// Effective sample size `S / (1 + 2 sum_k rho_k)`, truncating the sum with
/// Geyer's initial positive sequence: autocorrelations are added in pairs
/// `rho_{2m} + rho_{2m+1}` while the pair sum stays positive.
pub fn ess(series: &[f64]) -> Result<f64> {
    check_len(series)?;
    let s = series.len();
    let c = centered(series);
    let c0 = autocov(&c, 0);
    if c0 == 0.0 {
        return Ok(s as f64);
    }
    // tau = -1 + 2 * sum of positive pair sums, starting with rho_0 = 1
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < s {
        let pair = (autocov(&c, 2 * m) + autocov(&c, 2 * m + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    Ok(s as f64 / tau.max(f64::MIN_POSITIVE))
}

/// Root mean squared error of the point estimates, average interval
/// length, and the fraction of intervals covering the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimMetrics {
    pub rmse: f64,
    pub al: f64,
    pub cp: f64,
}

pub fn sim_metrics(
    estimates: &DVector<f64>,
    truth: &DVector<f64>,
    intervals: &[(f64, f64)],
) -> Result<SimMetrics> {
    let k = truth.len();
    if estimates.len() != k {
        return Err(HblError::DimensionMismatch {
            expected: k,
            got: estimates.len(),
        });
    }
    if intervals.len() != k {
        return Err(HblError::DimensionMismatch {
            expected: k,
            got: intervals.len(),
        });
    }
    let rmse = ((estimates - truth).norm_squared() / k as f64).sqrt();
    let al = intervals.iter().map(|(l, u)| u - l).sum::<f64>() / k as f64;
    let covered = intervals
        .iter()
        .zip(truth.iter())
        .filter(|((l, u), t)| l <= t && *t <= u)
        .count();
    Ok(SimMetrics {
        rmse,
        al,
        cp: covered as f64 / k as f64,
    })
}

/// Intercept and slopes used to predict one held-out observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldFit {
    pub intercept: f64,
    pub beta: DVector<f64>,
}

/// Mean squared, mean absolute, mean Huber and median squared prediction
/// errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionMetrics {
    pub mspe: f64,
    pub mape: f64,
    pub mhpe: f64,
    pub medspe: f64,
}

pub fn prediction_metrics(residuals: &[f64]) -> PredictionMetrics {
    let n = residuals.len() as f64;
    let sq: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    PredictionMetrics {
        mspe: sq.iter().sum::<f64>() / n,
        mape: residuals.iter().map(|r| r.abs()).sum::<f64>() / n,
        mhpe: residuals.iter().map(|&r| huber(r, HUBER_C)).sum::<f64>() / n,
        medspe: median(&sq),
    }
}

/// Prediction metrics from one leave-one-out fit per observation.
pub fn loocv_metrics(data: &Dataset, fits: &[FoldFit]) -> Result<PredictionMetrics> {
    if fits.len() != data.n() {
        return Err(HblError::InvalidConfig(format!(
            "expected one held-out fit per observation ({}), got {}",
            data.n(),
            fits.len()
        )));
    }
    let resid: Vec<f64> = fits
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if f.beta.len() != data.p() {
                return Err(HblError::DimensionMismatch {
                    expected: data.p(),
                    got: f.beta.len(),
                });
            }
            Ok(data.y[i] - f.intercept - (data.x.row(i) * &f.beta)[0])
        })
        .collect::<Result<_>>()?;
    Ok(prediction_metrics(&resid))
}

/// Leave-one-out cross-validation: one chain per held-out row (run in
/// parallel, stream id = row index), predicting with posterior medians.
pub fn run_loocv(data: &Dataset, config: &FitConfig) -> Result<PredictionMetrics> {
    let fits: Vec<FoldFit> = (0..data.n())
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.clone();
            cfg.stream_id = config.stream_id.wrapping_add(i as u64);
            let samples = run_chain(&data.without_row(i), &cfg)?;
            let med = summarize(&samples)?.coefficient_medians();
            Ok(FoldFit {
                intercept: med[0],
                beta: med.rows(1, data.p()).into_owned(),
            })
        })
        .collect::<Result<_>>()?;
    loocv_metrics(data, &fits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn samples_from(cols: Vec<Vec<f64>>, names: &[&str]) -> PosteriorSamples {
        let s = cols[0].len();
        PosteriorSamples {
            draws: DMatrix::from_fn(s, cols.len(), |i, j| cols[j][i]),
            names: names.iter().map(|n| n.to_string()).collect(),
            burn_in: 0,
            thin: 1,
            fixed_point: Default::default(),
        }
    }

    #[test]
    fn order_statistics() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        let s = summarize(&samples_from(vec![v], &["beta0"])).unwrap();
        let p = &s.params[0];
        assert!((p.median - 500.5).abs() < 1e-12);
        assert!((p.lower - 25.975).abs() < 1e-9);
        assert!((p.upper - 975.025).abs() < 1e-9);
    }

    #[test]
    fn constant_column() {
        let s = summarize(&samples_from(vec![vec![2.5; 60]], &["eta"])).unwrap();
        let p = &s.params[0];
        assert_eq!((p.median, p.lower, p.upper), (2.5, 2.5, 2.5));
        assert_eq!(p.ess, 60.0);
    }

    #[test]
    fn too_few_draws() {
        assert!(summarize(&samples_from(vec![vec![1.0; 9]], &["a"])).is_err());
        assert!(ess(&[1.0; 49]).is_err());
    }

    #[test]
    fn acf_lag_zero_is_one() {
        let v: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64).collect();
        assert_eq!(acf(&v, 5).unwrap()[0], 1.0);
    }

    #[test]
    fn metrics_by_hand() {
        let truth = DVector::zeros(4);
        let est = DVector::from_element(4, 1.0);
        let m = sim_metrics(&est, &truth, &[(0.0, 2.0); 4]).unwrap();
        assert_eq!(m.rmse, 1.0);
        assert_eq!(m.al, 2.0);
        assert_eq!(m.cp, 1.0);
        assert!(sim_metrics(&est, &truth, &[(0.0, 1.0); 3]).is_err());

        let p = prediction_metrics(&[1.0, -1.0, 3.0]);
        assert!((p.mspe - 11.0 / 3.0).abs() < 1e-15);
        assert!((p.mape - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.medspe, 1.0);
        let mhpe = (0.5 + 0.5 + 1.345 * (3.0 - 0.6725)) / 3.0;
        assert!((p.mhpe - mhpe).abs() < 1e-15);
    }

    #[test]
    fn loocv_requires_every_fold() {
        let d = Dataset::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DMatrix::from_element(2, 1, 1.0),
        )
        .unwrap();
        let f = FoldFit {
            intercept: 0.0,
            beta: DVector::from_element(1, 1.0),
        };
        assert!(loocv_metrics(&d, std::slice::from_ref(&f)).is_err());
        let m = loocv_metrics(
            &d,
            &[
                f.clone(),
                FoldFit {
                    intercept: 1.0,
                    ..f
                },
            ],
        )
        .unwrap();
        assert_eq!(m.mspe, 0.0);
    }
}
