//! Test statistics: residual correlations, MMC, QMC, greedy sparse PCA, the
//! bi-cross-validation R², and rolling-window analysis.

use std::ops::Range;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{MosaicError, Result};
use crate::panel::{summarize_availability, ExposureSeries, ReturnsPanel};
use crate::permute::{
    adaptive_draws, mosaic_test, replicate_family, MaxApproxZ, StatReport, Statistic, StatisticFamily,
};
use crate::residuals::{mosaic_residuals, MosaicResiduals, ResidualPanel};
use crate::rng::{derive_key, Stream};
use crate::tiling::{adaptive_tiling, default_tiling, validate_tiling, Tiling, TilingOptions};

const MODULE: &str = "stats";

/// The seven quantile levels used by the adaptive QMC statistic.
pub const DEFAULT_GAMMAS: [f64; 7] = [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99];

/// Pearson correlations of a set of assets over a time window.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub matrix: DMatrix<f64>,
    pub assets: Vec<usize>,
    pub window: Range<usize>,
}

impl CorrelationEstimate {
    /// For each asset, the largest absolute correlation with any other asset.
    pub fn max_abs_offdiag(&self) -> Vec<f64> {
        let q = self.matrix.nrows();
        (0..q)
            .map(|j| {
                let col = self.matrix.column(j);
                let mut best = 0.0f64;
                for (i, v) in col.iter().enumerate() {
                    if i != j {
                        best = best.max(v.abs());
                    }
                }
                best
            })
            .collect()
    }
}

/// Pearson correlation matrix of `assets` over `window`.
///
/// A constant column gets correlation 0 with every other column.
pub fn empirical_correlation(
    residuals: &ResidualPanel,
    window: Range<usize>,
    assets: &[usize],
) -> Result<CorrelationEstimate> {
    if window.len() < 2 {
        return Err(MosaicError::invalid(MODULE, "correlation window needs at least 2 timepoints"));
    }
    if window.end > residuals.n_times() || assets.iter().any(|&j| j >= residuals.n_assets()) {
        return Err(MosaicError::invalid(MODULE, "correlation window or assets outside the panel"));
    }
    for t in window.clone() {
        for &j in assets {
            if !residuals.is_defined(t, j) {
                return Err(MosaicError::invalid(
                    MODULE,
                    format!("residual cell ({t}, {j}) is undefined"),
                ));
            }
        }
    }
    let n = window.len();
    let q = assets.len();
    let values = residuals.values();
    let mut z = DMatrix::zeros(n, q);
    for (c, &j) in assets.iter().enumerate() {
        let col = values.view((window.start, j), (n, 1));
        let mean = col.sum() / n as f64;
        let mut ss = 0.0;
        for r in 0..n {
            let d = col[(r, 0)] - mean;
            z[(r, c)] = d;
            ss += d * d;
        }
        let norm = ss.sqrt();
        if norm > 0.0 {
            z.column_mut(c).scale_mut(1.0 / norm);
        } else {
            z.column_mut(c).fill(0.0);
        }
    }
    let mut matrix = z.tr_mul(&z);
    for a in 0..q {
        matrix[(a, a)] = 1.0;
        for b in (a + 1)..q {
            let v = matrix[(a, b)].clamp(-1.0, 1.0);
            matrix[(a, b)] = v;
            matrix[(b, a)] = v;
        }
    }
    Ok(CorrelationEstimate {
        matrix,
        assets: assets.to_vec(),
        window,
    })
}

fn require_pair(corr: &CorrelationEstimate) -> Result<()> {
    if corr.matrix.nrows() < 2 {
        return Err(MosaicError::invalid(MODULE, "correlation statistics need at least 2 assets"));
    }
    Ok(())
}

/// Mean over assets of the maximum absolute correlation with another asset.
pub fn mmc(corr: &CorrelationEstimate) -> Result<f64> {
    require_pair(corr)?;
    let mc = corr.max_abs_offdiag();
    Ok(mc.iter().sum::<f64>() / mc.len() as f64)
}

fn lower_quantile_sorted(sorted: &[f64], gamma: f64) -> f64 {
    let idx = (gamma * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(MosaicError::invalid(MODULE, format!("quantile level {gamma} outside (0, 1)")));
    }
    Ok(())
}

/// The `gamma` quantile of the per-asset maximum absolute correlations,
/// taking the lower order statistic `sorted[floor(gamma (p - 1))]`.
pub fn qmc(corr: &CorrelationEstimate, gamma: f64) -> Result<f64> {
    Ok(qmc_levels(corr, &[gamma])?[0])
}

/// [`qmc`] at several quantile levels.
pub fn qmc_levels(corr: &CorrelationEstimate, gammas: &[f64]) -> Result<Vec<f64>> {
    require_pair(corr)?;
    for &g in gammas {
        check_gamma(g)?;
    }
    let mut mc = corr.max_abs_offdiag();
    mc.sort_by(f64::total_cmp);
    Ok(gammas.iter().map(|&g| lower_quantile_sorted(&mc, g)).collect())
}

/// The assets a statistic reads: an explicit list, or every asset defined
/// at all timepoints.
fn resolve_assets(residuals: &ResidualPanel, assets: &Option<Vec<usize>>) -> Vec<usize> {
    match assets {
        Some(a) => a.clone(),
        None if residuals.is_complete() => (0..residuals.n_assets()).collect(),
        None => residuals.complete_assets(),
    }
}

fn full_window_correlation(residuals: &ResidualPanel, assets: &Option<Vec<usize>>) -> Result<CorrelationEstimate> {
    let assets = resolve_assets(residuals, assets);
    empirical_correlation(residuals, 0..residuals.n_times(), &assets)
}

/// Mean maximum absolute correlation over the whole panel.
#[derive(Debug, Clone, Default)]
pub struct Mmc {
    pub assets: Option<Vec<usize>>,
}

impl Statistic for Mmc {
    fn evaluate(&self, residuals: &ResidualPanel) -> Result<f64> {
        mmc(&full_window_correlation(residuals, &self.assets)?)
    }

    fn is_plug_in(&self) -> bool {
        true
    }
}

/// Quantile of maximum absolute correlations over the whole panel.
#[derive(Debug, Clone)]
pub struct Qmc {
    pub gamma: f64,
    pub assets: Option<Vec<usize>>,
}

impl Statistic for Qmc {
    fn evaluate(&self, residuals: &ResidualPanel) -> Result<f64> {
        qmc(&full_window_correlation(residuals, &self.assets)?, self.gamma)
    }

    fn is_plug_in(&self) -> bool {
        true
    }
}

/// QMC at several quantile levels, sharing one correlation matrix.
#[derive(Debug, Clone)]
pub struct QmcFamily {
    pub gammas: Vec<f64>,
    pub assets: Option<Vec<usize>>,
}

impl QmcFamily {
    pub fn new(gammas: Vec<f64>) -> Self {
        Self { gammas, assets: None }
    }
}

impl Default for QmcFamily {
    fn default() -> Self {
        Self::new(DEFAULT_GAMMAS.to_vec())
    }
}

impl StatisticFamily for QmcFamily {
    fn len(&self) -> usize {
        self.gammas.len()
    }

    fn evaluate(&self, residuals: &ResidualPanel) -> Result<Vec<f64>> {
        qmc_levels(&full_window_correlation(residuals, &self.assets)?, &self.gammas)
    }
}

/// QMC values at each level over a window.
pub fn qmc_family(residuals: &ResidualPanel, window: Range<usize>, gammas: &[f64]) -> Result<Vec<f64>> {
    let assets: Vec<usize> = (0..residuals.n_assets()).collect();
    qmc_levels(&empirical_correlation(residuals, window, &assets)?, gammas)
}

/// A unit-norm loading vector with a restricted support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLoading {
    pub vector: DVector<f64>,
    pub support: Vec<usize>,
    pub sparsity: usize,
}

/// Greedy sparse PCA: keep the `ell` assets with the largest maximum absolute
/// correlation (ties to the lower index) and take the top eigenvector of the
/// correlation matrix restricted to them. The sign makes the largest-magnitude
/// entry positive. Vector positions follow `corr.assets`.
pub fn greedy_sparse_pca(corr: &CorrelationEstimate, ell: usize) -> Result<SparseLoading> {
    let q = corr.matrix.nrows();
    if ell == 0 || ell > q {
        return Err(MosaicError::invalid(MODULE, format!("sparsity {ell} outside [1, {q}]")));
    }
    let mc = corr.max_abs_offdiag();
    let mut ranked: Vec<usize> = (0..q).collect();
    ranked.sort_by(|&a, &b| mc[b].total_cmp(&mc[a]).then(a.cmp(&b)));
    let mut support: Vec<usize> = ranked[..ell].to_vec();
    support.sort_unstable();
    let sub = corr.matrix.select_rows(&support).select_columns(&support);
    let eig = SymmetricEigen::new(sub);
    let top = (0..ell)
        .max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(b.cmp(&a)))
        .expect("ell >= 1");
    let mut nu: DVector<f64> = eig.eigenvectors.column(top).into_owned();
    let norm = nu.norm();
    if norm > 0.0 {
        nu /= norm;
    }
    let lead = (0..ell)
        .max_by(|&a, &b| nu[a].abs().total_cmp(&nu[b].abs()).then(b.cmp(&a)))
        .expect("ell >= 1");
    if nu[lead] < 0.0 {
        nu = -nu;
    }
    let mut vector = DVector::zeros(q);
    for (i, &j) in support.iter().enumerate() {
        vector[j] = nu[i];
    }
    Ok(SparseLoading {
        vector,
        support,
        sparsity: ell,
    })
}

/// Ten sparsity levels evenly spaced between 20 and `p`, clipped to `[1, p]`
/// and deduplicated.
pub fn sparsity_grid(p: usize) -> Vec<usize> {
    let lo = 20.0;
    let hi = p as f64;
    let mut out: Vec<usize> = (0..10)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / 9.0;
            (v.round() as usize).clamp(1, p.max(1))
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Candidate loadings for the improvement analysis: the dense top
/// eigenvector followed by the greedy sparse loadings on [`sparsity_grid`].
/// Vectors are expanded to length `p` (zero outside `assets`).
pub fn improvement_loadings(residuals: &ResidualPanel, assets: &[usize]) -> Result<Vec<SparseLoading>> {
    let corr = empirical_correlation(residuals, 0..residuals.n_times(), assets)?;
    let q = assets.len();
    let p = residuals.n_assets();
    let mut levels = vec![q];
    levels.extend(sparsity_grid(q).into_iter().filter(|&l| l != q));
    levels
        .into_iter()
        .map(|ell| {
            let local = greedy_sparse_pca(&corr, ell)?;
            let mut vector = DVector::zeros(p);
            for (i, &j) in assets.iter().enumerate() {
                vector[j] = local.vector[i];
            }
            Ok(SparseLoading {
                vector,
                support: local.support.iter().map(|&i| assets[i]).collect(),
                sparsity: ell,
            })
        })
        .collect()
}

/// Out-of-sample R² of predicting each residual from the residuals outside
/// its own tile, through a loading `v`.
///
/// For each timepoint `t` and tile group `G`, the missing factor return is
/// estimated as `<e_t, v>` restricted to the assets outside `G`, divided by
/// the squared norm of `v` there; the prediction for asset `j` in `G` is
/// `v_j` times that estimate (0 when `v` vanishes outside `G`).
#[derive(Debug, Clone)]
pub struct BcvR2 {
    loadings: Vec<SparseLoading>,
    /// `cell_group[t * p + j]` is the tile index covering `(t, j)`.
    cell_tile: Vec<Option<usize>>,
    n_tiles: usize,
    n_times: usize,
    n_assets: usize,
}

impl BcvR2 {
    pub fn new(loadings: Vec<SparseLoading>, tiling: &Tiling) -> Result<Self> {
        if loadings.is_empty() {
            return Err(MosaicError::invalid(MODULE, "at least one loading is required"));
        }
        let (n_times, n_assets) = (tiling.n_times, tiling.n_assets);
        if loadings.iter().any(|l| l.vector.len() != n_assets) {
            return Err(MosaicError::invalid(MODULE, "loading length does not match the panel"));
        }
        let mut cell_tile = vec![None; n_times * n_assets];
        for (m, tile) in tiling.tiles.iter().enumerate() {
            for &t in &tile.batch {
                for &j in &tile.group {
                    cell_tile[t * n_assets + j] = Some(m);
                }
            }
        }
        Ok(Self {
            loadings,
            cell_tile,
            n_tiles: tiling.tiles.len(),
            n_times,
            n_assets,
        })
    }

    /// R² for every loading.
    pub fn per_loading(&self, residuals: &ResidualPanel) -> Result<Vec<f64>> {
        if residuals.n_times() != self.n_times || residuals.n_assets() != self.n_assets {
            return Err(MosaicError::invalid(MODULE, "residual panel does not match the test tiling"));
        }
        let p = self.n_assets;
        let values = residuals.values();
        let mut out = Vec::with_capacity(self.loadings.len());
        let mut tile_dot = vec![0.0; self.n_tiles];
        let mut tile_norm = vec![0.0; self.n_tiles];
        for loading in &self.loadings {
            let v = &loading.vector;
            let (mut sse, mut sst) = (0.0, 0.0);
            for t in 0..self.n_times {
                let (mut dot, mut norm) = (0.0, 0.0);
                let mut touched: Vec<usize> = Vec::new();
                for j in 0..p {
                    if let Some(m) = self.cell_tile[t * p + j] {
                        let e = values[(t, j)];
                        if tile_dot[m] == 0.0 && tile_norm[m] == 0.0 {
                            touched.push(m);
                        }
                        tile_dot[m] += e * v[j];
                        tile_norm[m] += v[j] * v[j];
                        dot += e * v[j];
                        norm += v[j] * v[j];
                    }
                }
                for j in 0..p {
                    if let Some(m) = self.cell_tile[t * p + j] {
                        let e = values[(t, j)];
                        let denom = norm - tile_norm[m];
                        let pred = if denom > 1e-14 * norm.max(f64::MIN_POSITIVE) {
                            v[j] * (dot - tile_dot[m]) / denom
                        } else {
                            0.0
                        };
                        sse += (pred - e) * (pred - e);
                        sst += e * e;
                    }
                }
                for m in touched {
                    tile_dot[m] = 0.0;
                    tile_norm[m] = 0.0;
                }
            }
            if sst == 0.0 {
                return Err(MosaicError::degenerate(MODULE, "test residuals are identically zero"));
            }
            out.push(1.0 - sse / sst);
        }
        Ok(out)
    }
}

impl Statistic for BcvR2 {
    fn evaluate(&self, residuals: &ResidualPanel) -> Result<f64> {
        Ok(self
            .per_loading(residuals)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Maximum BCV R² over the loadings and the per-loading values.
pub fn bcv_r2(test: &MosaicResiduals, loadings: &[SparseLoading]) -> Result<(f64, Vec<f64>)> {
    let stat = BcvR2::new(loadings.to_vec(), test.tiling())?;
    let per = stat.per_loading(&test.materialize())?;
    let best = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((best, per))
}

/// Which statistic a test uses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum StatisticConfig {
    #[default]
    Mmc,
    Qmc {
        gamma: f64,
    },
    AdaptiveQmc {
        #[serde(default = "default_gammas")]
        gammas: Vec<f64>,
        /// Number of relabelings in the second permutation layer.
        #[serde(default = "default_k_meta")]
        k_meta: usize,
    },
    BcvR2 {
        /// Train/test split point as a timepoint index into the panel.
        #[serde(default)]
        split: Option<usize>,
    },
}

fn default_gammas() -> Vec<f64> {
    DEFAULT_GAMMAS.to_vec()
}

fn default_k_meta() -> usize {
    199
}

/// Run the test described by `config` on a set of mosaic residuals.
///
/// For the adaptive QMC statistic the report's observed value and null draws
/// are those of the meta-statistic over its relabelings.
pub fn run_statistic(
    mosaic: &MosaicResiduals,
    config: &StatisticConfig,
    assets: Option<Vec<usize>>,
    n_replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<StatReport> {
    match config {
        StatisticConfig::Mmc => mosaic_test(mosaic, &Mmc { assets }, n_replicates, alpha, seed),
        StatisticConfig::Qmc { gamma } => {
            check_gamma(*gamma)?;
            mosaic_test(mosaic, &Qmc { gamma: *gamma, assets }, n_replicates, alpha, seed)
        }
        StatisticConfig::AdaptiveQmc { gammas, k_meta } => {
            if gammas.is_empty() {
                return Err(MosaicError::invalid(MODULE, "adaptive QMC needs at least one level"));
            }
            for &g in gammas {
                check_gamma(g)?;
            }
            let family = QmcFamily {
                gammas: gammas.clone(),
                assets,
            };
            let stats = replicate_family(mosaic, &family, n_replicates, seed)?;
            let meta_seed = derive_key(seed, Stream::MetaPermutation, &[]);
            let (observed, draws) = adaptive_draws(&stats, &MaxApproxZ, *k_meta, meta_seed)?;
            StatReport::from_draws(observed, draws, alpha, seed)
        }
        StatisticConfig::BcvR2 { .. } => Err(MosaicError::invalid(
            MODULE,
            "the BCV statistic needs a train/test split; use the improvement analysis",
        )),
    }
}

/// Tiling construction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TilingMode {
    #[default]
    Default,
    Adaptive,
}

/// Everything needed to build a tiling for a panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TilingConfig {
    pub mode: TilingMode,
    #[serde(flatten)]
    pub options: TilingOptions,
}

/// A tiling, its residuals, and the assets the statistic should read.
#[derive(Debug, Clone)]
pub struct PreparedPanel {
    pub tiling: Tiling,
    pub mosaic: MosaicResiduals,
    /// `None` for complete panels; the always-available assets otherwise.
    pub assets: Option<Vec<usize>>,
}

/// Build and validate a tiling, then compute mosaic residuals.
///
/// Panels with missing cells are tiled per exposure segment over the fully
/// observed assets, and statistics are restricted to the assets observed
/// throughout.
pub fn prepare(
    panel: &ReturnsPanel,
    exposures: &ExposureSeries,
    config: &TilingConfig,
    seed: u64,
) -> Result<PreparedPanel> {
    let complete = panel.is_complete();
    let summary = (!complete).then(|| summarize_availability(panel, exposures));
    let tiling = match config.mode {
        TilingMode::Default => default_tiling(
            panel.n_times(),
            panel.n_assets(),
            exposures.n_factors(),
            &config.options,
            exposures.change_points(),
            summary.as_ref(),
            seed,
        )?,
        TilingMode::Adaptive => adaptive_tiling(panel, exposures, &config.options, summary.as_ref(), seed)?,
    };
    let mask = (!complete).then(|| panel.mask());
    let report = validate_tiling(&tiling, panel.n_times(), panel.n_assets(), exposures, mask);
    if !report.all_passed() {
        return Err(MosaicError::invariant(
            "tiling",
            format!("tiling failed validation: {}", report.failures().join("; ")),
        ));
    }
    let mosaic = mosaic_residuals(panel, exposures, &tiling)?;
    let assets = summary.map(|s| s.always_available);
    Ok(PreparedPanel { tiling, mosaic, assets })
}

/// One row of a rolling analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingRow {
    pub window_end: NaiveDate,
    #[serde(flatten)]
    pub report: StatReport,
}

/// Settings for a rolling analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingSpec {
    pub window: usize,
    pub stride: usize,
    pub n_replicates: usize,
    pub alpha: f64,
    pub seed: u64,
}

/// Run the test on windows `[s, s + window)` for `s = 0, stride, ...`.
///
/// Each window gets its own tiling and permutation seeds, derived from the
/// base seed and the window index.
pub fn rolling_analysis(
    panel: &ReturnsPanel,
    exposures: &ExposureSeries,
    tiling: &TilingConfig,
    statistic: &StatisticConfig,
    spec: &RollingSpec,
) -> Result<Vec<RollingRow>> {
    let t_len = panel.n_times();
    if spec.window == 0 || spec.window > t_len {
        return Err(MosaicError::invalid(
            MODULE,
            format!("window {} must lie in [1, {t_len}]", spec.window),
        ));
    }
    if spec.stride == 0 {
        return Err(MosaicError::invalid(MODULE, "stride must be positive"));
    }
    let mut rows = Vec::new();
    let mut start = 0;
    let mut w = 0u64;
    while start + spec.window <= t_len {
        let range = start..start + spec.window;
        let sub_panel = panel.slice_times(range.clone())?;
        let sub_exposures = exposures.slice_times(range.clone())?;
        let window_seed = derive_key(spec.seed, Stream::Window, &[w]);
        let prepared = prepare(&sub_panel, &sub_exposures, tiling, window_seed)?;
        let mut report = run_statistic(
            &prepared.mosaic,
            statistic,
            prepared.assets,
            spec.n_replicates,
            spec.alpha,
            window_seed,
        )?;
        report.seed = spec.seed;
        rows.push(RollingRow {
            window_end: panel.times()[range.end - 1],
            report,
        });
        start += spec.stride;
        w += 1;
    }
    Ok(rows)
}

/// Write the rolling CSV: `window_end,observed,threshold,p_value,z_exact,z_approx`.
pub fn write_rolling_csv(rows: &[RollingRow], sink: impl std::io::Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["window_end", "observed", "threshold", "p_value", "z_exact", "z_approx"])?;
    for row in rows {
        let r = &row.report;
        writer.write_record([
            row.window_end.to_string(),
            r.observed.to_string(),
            r.threshold.to_string(),
            r.p_value.to_string(),
            r.z_exact.to_string(),
            r.z_approx.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| MosaicError::Io {
        path: "<rolling csv>".into(),
        source: e,
    })?;
    Ok(())
}

/// Result of the improvement analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementReport {
    pub max_r2: f64,
    pub per_loading_r2: Vec<f64>,
    pub sparsity: Vec<usize>,
    #[serde(flatten)]
    pub test: StatReport,
}

/// Estimate candidate loadings on the mosaic residuals before `split` and
/// test whether they predict held-out residuals after it.
pub fn improvement_analysis(
    panel: &ReturnsPanel,
    exposures: &ExposureSeries,
    tiling: &TilingConfig,
    split: usize,
    n_replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<ImprovementReport> {
    let t_len = panel.n_times();
    if split == 0 || split >= t_len {
        return Err(MosaicError::invalid(
            MODULE,
            format!("fold boundary {split} must leave both folds nonempty (T = {t_len})"),
        ));
    }
    let train_seed = derive_key(seed, Stream::Window, &[0]);
    let test_seed = derive_key(seed, Stream::Window, &[1]);
    let train = prepare(
        &panel.slice_times(0..split)?,
        &exposures.slice_times(0..split)?,
        tiling,
        train_seed,
    )?;
    let test_panel = panel.slice_times(split..t_len)?;
    let test = prepare(&test_panel, &exposures.slice_times(split..t_len)?, tiling, test_seed)?;
    let train_residuals = train.mosaic.materialize();
    let train_assets = train
        .assets
        .clone()
        .unwrap_or_else(|| (0..panel.n_assets()).collect());
    let loadings = improvement_loadings(&train_residuals, &train_assets)?;
    let sparsity = loadings.iter().map(|l| l.sparsity).collect();
    let statistic = BcvR2::new(loadings, &test.tiling)?;
    let per_loading_r2 = statistic.per_loading(&test.mosaic.materialize())?;
    let report = mosaic_test(&test.mosaic, &statistic, n_replicates, alpha, test_seed)?;
    Ok(ImprovementReport {
        max_r2: report.observed,
        per_loading_r2,
        sparsity,
        test: StatReport { seed, ..report },
    })
}
