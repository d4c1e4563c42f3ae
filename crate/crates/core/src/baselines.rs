//! Naive comparators that ignore how OLS residuals are estimated: column-wise
//! permutation of OLS residuals and a row bootstrap Z-statistic. Both are
//! invalid when `k` is comparable to `p`; they exist for comparison studies.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MosaicError, Result};
use crate::permute::{pvalue, Statistic};
use crate::residuals::ResidualPanel;
use crate::rng::{keyed_rng, Stream};

const MODULE: &str = "baselines";

fn require_complete(ols: &ResidualPanel) -> Result<()> {
    if !ols.is_complete() {
        return Err(MosaicError::invalid(MODULE, "baselines need a complete residual panel"));
    }
    if ols.n_times() == 0 {
        return Err(MosaicError::invalid(MODULE, "empty residual panel"));
    }
    Ok(())
}

/// Permute each column of `ols` independently; replicate 0 is the original.
pub fn column_permuted(ols: &ResidualPanel, seed: u64, r: usize) -> ResidualPanel {
    let mut out = ols.values().clone();
    if r > 0 {
        let mut rng = keyed_rng(seed, Stream::NaivePermutation, &[r as u64]);
        let t_len = out.nrows();
        let mut order: Vec<usize> = (0..t_len).collect();
        for j in 0..out.ncols() {
            order.shuffle(&mut rng);
            for (i, &src) in order.iter().enumerate() {
                out[(i, j)] = ols.values()[(src, j)];
            }
        }
    }
    ResidualPanel::dense(out)
}

/// p-value of the naive test that permutes OLS residual columns independently.
pub fn naive_perm_test(ols: &ResidualPanel, statistic: &dyn Statistic, n_replicates: usize, seed: u64) -> Result<f64> {
    require_complete(ols)?;
    if n_replicates == 0 {
        return Err(MosaicError::invalid(MODULE, "at least one replicate is required"));
    }
    let values: Vec<f64> = (0..=n_replicates)
        .into_par_iter()
        .map(|r| statistic.evaluate(&column_permuted(ols, seed, r)))
        .collect::<Result<_>>()?;
    Ok(pvalue(values[0], &values[1..]))
}

/// Row indices of bootstrap sample `b` (uniform with replacement).
pub fn bootstrap_indices(seed: u64, b: usize, n_times: usize) -> Vec<usize> {
    let mut rng = keyed_rng(seed, Stream::Bootstrap, &[b as u64]);
    (0..n_times).map(|_| rng.random_range(0..n_times)).collect()
}

/// Naive bootstrap bias-corrected Z-statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapReport {
    pub bias_estimate: f64,
    pub z_bs: f64,
    pub theta_bs: f64,
    #[serde(rename = "B")]
    pub n_boot: usize,
}

/// Resample rows of `ols` with replacement `B` times and compute
/// `(S - bias) / sd`, where the bias is the mean bootstrap value minus the
/// plug-in value `S(ols)` and `sd` is the sample standard deviation of the
/// bootstrap values.
pub fn naive_bootstrap_z(
    ols: &ResidualPanel,
    statistic: &dyn Statistic,
    n_boot: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    require_complete(ols)?;
    if n_boot < 2 {
        return Err(MosaicError::invalid(MODULE, "the bootstrap needs at least 2 resamples"));
    }
    if !statistic.is_plug_in() {
        return Err(MosaicError::invalid(
            MODULE,
            "the bootstrap bias correction is only defined for plug-in statistics of the row distribution",
        ));
    }
    let theta = statistic.evaluate(ols)?;
    let t_len = ols.n_times();
    let draws: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let rows = bootstrap_indices(seed, b, t_len);
            let resampled = ols.values().select_rows(&rows);
            statistic.evaluate(&ResidualPanel::dense(resampled))
        })
        .collect::<Result<_>>()?;
    let n = n_boot as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(MosaicError::degenerate(MODULE, "bootstrap statistics have zero variance"));
    }
    let bias = mean - theta;
    Ok(BootstrapReport {
        bias_estimate: bias,
        z_bs: (theta - bias) / sd,
        theta_bs: theta,
        n_boot,
    })
}

/// One row of the comparison CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub replicate: usize,
    pub p_or_z: f64,
}

/// Write `method,replicate,p_or_z`.
pub fn write_comparison_csv(rows: &[ComparisonRow], sink: impl std::io::Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    for row in rows {
        writer.serialize(row)?;
    }
    if rows.is_empty() {
        writer.write_record(["method", "replicate", "p_or_z"])?;
    }
    writer.flush().map_err(|e| MosaicError::Io {
        path: "<comparison csv>".into(),
        source: e,
    })?;
    Ok(())
}
