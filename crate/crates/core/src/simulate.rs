//! Semisynthetic data and Monte-Carlo studies of level and power.

use std::path::PathBuf;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::baselines::{naive_bootstrap_z, naive_perm_test, ComparisonRow};
use crate::error::{MosaicError, Result};
use crate::panel::{ExposureSeries, ReturnsPanel};
use crate::permute::{adaptive_pvalue, pvalue, replicate_family, MaxApproxZ, Statistic};
use crate::residuals::ols_residuals;
use crate::rng::{derive_key, keyed_rng, Stream};
use crate::stats::{prepare, run_statistic, Mmc, Qmc, QmcFamily, StatisticConfig, TilingConfig, DEFAULT_GAMMAS};

const MODULE: &str = "simulate";

/// Distribution of factor returns or idiosyncratic noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Dist {
    Gaussian,
    StudentT { nu: f64 },
}

/// Where exposures come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExposureSource {
    /// i.i.d. standard normal entries, redrawn for every dataset.
    RandomGaussian,
    /// A fixed `p x k` matrix from a CSV with header `asset_id,factor_id,value`.
    File { path: PathBuf },
}

/// A semisynthetic design: `Y_t = L X_t + gamma_t + Z_t v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    #[serde(rename = "T")]
    pub n_times: usize,
    #[serde(rename = "p")]
    pub n_assets: usize,
    #[serde(rename = "k")]
    pub n_factors: usize,
    pub exposure_source: ExposureSource,
    pub factor_dist: Dist,
    pub noise_dist: Dist,
    pub rho: f64,
    pub s0: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_times: 50,
            n_assets: 183,
            n_factors: 18,
            exposure_source: ExposureSource::RandomGaussian,
            factor_dist: Dist::StudentT { nu: 4.0 },
            noise_dist: Dist::StudentT { nu: 4.0 },
            rho: 0.0,
            s0: 0.1,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_times < 2 || self.n_assets < 2 {
            return Err(MosaicError::invalid(MODULE, "need T >= 2 and p >= 2"));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(MosaicError::invalid(MODULE, "rho must be finite and nonnegative"));
        }
        if !(self.s0 > 0.0 && self.s0 <= 1.0) {
            return Err(MosaicError::invalid(MODULE, "s0 must lie in (0, 1]"));
        }
        for d in [self.factor_dist, self.noise_dist] {
            if let Dist::StudentT { nu } = d {
                if !(nu > 2.0) {
                    return Err(MosaicError::invalid(MODULE, "student-t degrees of freedom must exceed 2"));
                }
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Number of assets loaded on the planted factor, `ceil(s0 p)`.
    pub fn support_size(&self) -> usize {
        ((self.s0 * self.n_assets as f64).ceil() as usize).clamp(1, self.n_assets)
    }

    /// Load the fixed exposure matrix, if the source is a file.
    pub fn load_exposures(&self) -> Result<Option<DMatrix<f64>>> {
        match &self.exposure_source {
            ExposureSource::RandomGaussian => Ok(None),
            ExposureSource::File { path } => {
                let file = std::fs::File::open(path).map_err(|e| MosaicError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                let m = read_exposure_matrix(file)?;
                if m.shape() != (self.n_assets, self.n_factors) {
                    return Err(MosaicError::invalid(
                        MODULE,
                        format!(
                            "exposure file is {}x{} but the config needs {}x{}",
                            m.nrows(),
                            m.ncols(),
                            self.n_assets,
                            self.n_factors
                        ),
                    ));
                }
                Ok(Some(m))
            }
        }
    }
}

/// Read a static `asset_id,factor_id,value` CSV into a matrix with rows and
/// columns in lexicographic id order.
pub fn read_exposure_matrix(source: impl std::io::Read) -> Result<DMatrix<f64>> {
    use std::collections::{BTreeMap, BTreeSet};
    let mut reader = csv::Reader::from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != ["asset_id", "factor_id", "value"] {
        return Err(MosaicError::Parse {
            line: 1,
            message: "expected header asset_id,factor_id,value".into(),
        });
    }
    let mut cells = BTreeMap::new();
    let mut assets = BTreeSet::new();
    let mut factors = BTreeSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(MosaicError::Parse {
                line,
                message: "expected 3 fields".into(),
            });
        }
        let value: f64 = record[2].trim().parse().map_err(|_| MosaicError::Parse {
            line,
            message: format!("non-numeric value {:?}", &record[2]),
        })?;
        if !value.is_finite() {
            return Err(MosaicError::Parse {
                line,
                message: "non-finite value".into(),
            });
        }
        let key = (record[0].trim().to_string(), record[1].trim().to_string());
        assets.insert(key.0.clone());
        factors.insert(key.1.clone());
        if cells.insert(key, value).is_some() {
            return Err(MosaicError::Duplicate {
                line,
                cell: format!("({}, {})", &record[0], &record[1]),
            });
        }
    }
    let assets: Vec<String> = assets.into_iter().collect();
    let factors: Vec<String> = factors.into_iter().collect();
    let mut out = DMatrix::zeros(assets.len(), factors.len());
    for (i, a) in assets.iter().enumerate() {
        for (j, f) in factors.iter().enumerate() {
            out[(i, j)] = *cells
                .get(&(a.clone(), f.clone()))
                .ok_or_else(|| MosaicError::Coverage(format!("asset {a} lacks factor {f}")))?;
        }
    }
    Ok(out)
}

/// The planted structure behind a simulated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub v: DVector<f64>,
    pub support: Vec<usize>,
    pub z: DVector<f64>,
    pub null_holds: bool,
}

enum Sampler {
    Gaussian,
    StudentT(StudentT<f64>),
}

impl Sampler {
    fn new(dist: Dist) -> Result<Self> {
        match dist {
            Dist::Gaussian => Ok(Sampler::Gaussian),
            Dist::StudentT { nu } => StudentT::new(nu)
                .map(Sampler::StudentT)
                .map_err(|e| MosaicError::invalid(MODULE, format!("bad student-t: {e}"))),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Sampler::Gaussian => rng.sample(StandardNormal),
            Sampler::StudentT(t) => t.sample(rng),
        }
    }
}

/// Asset ids that sort in index order.
pub fn asset_ids(p: usize) -> Vec<String> {
    let width = p.saturating_sub(1).to_string().len().max(4);
    (0..p).map(|j| format!("A{j:0width$}")).collect()
}

/// Consecutive calendar dates starting 2000-01-03.
pub fn sim_dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
}

/// Generate one panel from `config`.
pub fn gen_semisynthetic(config: &SimConfig) -> Result<(ReturnsPanel, ExposureSeries, SimTruth)> {
    let fixed = config.load_exposures()?;
    gen_with_exposures(config, fixed.as_ref())
}

/// [`gen_semisynthetic`] with a preloaded exposure matrix (used when the
/// source is a file, so studies read it once).
pub fn gen_with_exposures(
    config: &SimConfig,
    fixed: Option<&DMatrix<f64>>,
) -> Result<(ReturnsPanel, ExposureSeries, SimTruth)> {
    config.validate()?;
    let (t_len, p, k) = (config.n_times, config.n_assets, config.n_factors);
    let mut rng = keyed_rng(config.seed, Stream::Simulation, &[]);
    let factor = Sampler::new(config.factor_dist)?;
    let noise = Sampler::new(config.noise_dist)?;
    let l = match fixed {
        Some(m) => {
            if m.shape() != (p, k) {
                return Err(MosaicError::invalid(MODULE, "fixed exposures have the wrong shape"));
            }
            m.clone()
        }
        None => DMatrix::from_fn(p, k, |_, _| rng.sample(StandardNormal)),
    };
    let x = DMatrix::from_fn(t_len, k, |_, _| factor.draw(&mut rng));
    let gamma = DMatrix::from_fn(t_len, p, |_, _| noise.draw(&mut rng));
    let z = DVector::from_fn(t_len, |_, _| factor.draw(&mut rng));
    let n_support = config.support_size();
    let mut support = sample(&mut rng, p, n_support).into_vec();
    support.sort_unstable();
    let mut v = DVector::zeros(p);
    let height = config.rho / (n_support as f64).sqrt();
    for &j in &support {
        v[j] = height;
    }
    let mut y = &x * l.transpose() + gamma;
    if config.rho > 0.0 {
        y += &z * v.transpose();
    }
    let factor_ids = (0..k).map(|i| format!("F{i:02}")).collect();
    let panel = ReturnsPanel::complete(sim_dates(t_len), asset_ids(p), y)?;
    let exposures = ExposureSeries::constant(t_len, l, factor_ids)?;
    Ok((
        panel,
        exposures,
        SimTruth {
            v,
            support,
            z,
            null_holds: config.rho == 0.0,
        },
    ))
}

/// Methods compared in false-positive-rate studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FprMethod {
    Mosaic,
    NaivePermutation,
    NaiveBootstrap,
}

impl FprMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FprMethod::Mosaic => "mosaic",
            FprMethod::NaivePermutation => "naive_permutation",
            FprMethod::NaiveBootstrap => "naive_bootstrap",
        }
    }
}

/// Settings shared by every cell of a false-positive-rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FprSettings {
    pub reps: usize,
    pub alpha: f64,
    /// Permutation replicates for the mosaic and naive permutation tests.
    #[serde(rename = "R")]
    pub n_replicates: usize,
    /// Bootstrap resamples.
    #[serde(rename = "B")]
    pub n_boot: usize,
    pub tiling: TilingConfig,
    pub statistic: StatisticConfig,
}

impl Default for FprSettings {
    fn default() -> Self {
        Self {
            reps: 100,
            alpha: 0.05,
            n_replicates: 99,
            n_boot: 100,
            tiling: TilingConfig::default(),
            statistic: StatisticConfig::Mmc,
        }
    }
}

/// One row of a study table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub config_hash: String,
    pub method: String,
    pub rho: f64,
    pub s0: f64,
    pub reps: usize,
    pub rejection_rate: f64,
    pub stderr: f64,
}

impl StudyRow {
    fn new(config: &SimConfig, method: impl Into<String>, reps: usize, rate: f64) -> Self {
        Self {
            config_hash: config.hash(),
            method: method.into(),
            rho: config.rho,
            s0: config.s0,
            reps,
            rejection_rate: rate,
            stderr: (rate * (1.0 - rate) / reps as f64).sqrt(),
        }
    }
}

/// Study table plus the per-replicate p-values (or bootstrap Z values).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyOutput {
    pub rows: Vec<StudyRow>,
    pub replicates: Vec<ComparisonRow>,
}

/// Write `config_hash,method,rho,s0,reps,rejection_rate,stderr`.
pub fn write_study_csv(rows: &[StudyRow], sink: impl std::io::Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    if rows.is_empty() {
        writer.write_record(["config_hash", "method", "rho", "s0", "reps", "rejection_rate", "stderr"])?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|e| MosaicError::Io {
        path: "<study csv>".into(),
        source: e,
    })?;
    Ok(())
}

fn scalar_statistic(config: &StatisticConfig) -> Result<Box<dyn Statistic>> {
    match config {
        StatisticConfig::Mmc => Ok(Box::new(Mmc::default())),
        StatisticConfig::Qmc { gamma } => Ok(Box::new(Qmc {
            gamma: *gamma,
            assets: None,
        })),
        _ => Err(MosaicError::invalid(
            MODULE,
            "baseline methods need a scalar statistic (mmc or qmc)",
        )),
    }
}

/// Seed of replicate `rep` in cell `cell` of a study.
pub fn replicate_seed(seed: u64, cell: u64, rep: u64) -> u64 {
    derive_key(seed, Stream::Study, &[cell, rep])
}

/// Value reported by one method on one dataset: a p-value, or `Z_BS` for the
/// bootstrap.
pub fn evaluate_fpr_method(
    method: FprMethod,
    panel: &ReturnsPanel,
    exposures: &ExposureSeries,
    settings: &FprSettings,
    seed: u64,
) -> Result<f64> {
    match method {
        FprMethod::Mosaic => {
            let prepared = prepare(panel, exposures, &settings.tiling, seed)?;
            let report = run_statistic(
                &prepared.mosaic,
                &settings.statistic,
                prepared.assets,
                settings.n_replicates,
                settings.alpha,
                seed,
            )?;
            Ok(report.p_value)
        }
        FprMethod::NaivePermutation => {
            let ols = ols_residuals(panel, exposures)?;
            naive_perm_test(&ols, scalar_statistic(&settings.statistic)?.as_ref(), settings.n_replicates, seed)
        }
        FprMethod::NaiveBootstrap => {
            let ols = ols_residuals(panel, exposures)?;
            Ok(naive_bootstrap_z(&ols, scalar_statistic(&settings.statistic)?.as_ref(), settings.n_boot, seed)?.z_bs)
        }
    }
}

/// Whether a method's value counts as a rejection at level `alpha`.
pub fn rejects(method: FprMethod, value: f64, alpha: f64) -> bool {
    match method {
        FprMethod::NaiveBootstrap => {
            let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
            value.abs() >= z
        }
        _ => value <= alpha,
    }
}

/// Rejection rates of each method on null configurations.
pub fn fpr_study(configs: &[SimConfig], methods: &[FprMethod], settings: &FprSettings, seed: u64) -> Result<StudyOutput> {
    if settings.reps == 0 {
        return Err(MosaicError::invalid(MODULE, "at least one replicate is required"));
    }
    let mut out = StudyOutput::default();
    for (c, config) in configs.iter().enumerate() {
        config.validate()?;
        if config.rho != 0.0 {
            return Err(MosaicError::invalid(MODULE, "false-positive studies need rho = 0"));
        }
        let fixed = config.load_exposures()?;
        let values: Vec<Vec<f64>> = (0..settings.reps)
            .into_par_iter()
            .map(|rep| {
                let rep_seed = replicate_seed(seed, c as u64, rep as u64);
                let data_config = SimConfig {
                    seed: rep_seed,
                    ..config.clone()
                };
                let (panel, exposures, _) = gen_with_exposures(&data_config, fixed.as_ref())?;
                methods
                    .iter()
                    .map(|&m| evaluate_fpr_method(m, &panel, &exposures, settings, rep_seed))
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (i, &method) in methods.iter().enumerate() {
            let hits = values.iter().filter(|v| rejects(method, v[i], settings.alpha)).count();
            let rate = hits as f64 / settings.reps as f64;
            out.rows.push(StudyRow::new(config, method.name(), settings.reps, rate));
            out.replicates.extend(values.iter().enumerate().map(|(rep, v)| ComparisonRow {
                method: method.name().to_string(),
                replicate: rep,
                p_or_z: v[i],
            }));
        }
    }
    Ok(out)
}

/// Settings for a power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerSettings {
    pub reps: usize,
    pub alpha: f64,
    #[serde(rename = "R")]
    pub n_replicates: usize,
    /// Relabelings in the adaptive meta-test.
    #[serde(rename = "K")]
    pub k_meta: usize,
    pub gammas: Vec<f64>,
    /// Null datasets used to calibrate the OLS comparator.
    pub null_reps: usize,
    pub tiling: TilingConfig,
}

impl Default for PowerSettings {
    fn default() -> Self {
        Self {
            reps: 200,
            alpha: 0.05,
            n_replicates: 99,
            k_meta: 99,
            gammas: DEFAULT_GAMMAS.to_vec(),
            null_reps: 200,
            tiling: TilingConfig::default(),
        }
    }
}

/// Rejection decisions for one dataset.
struct PowerDraw {
    adaptive: bool,
    per_gamma_mosaic: Vec<bool>,
    ols_values: Vec<f64>,
}

fn power_draw(
    config: &SimConfig,
    fixed: Option<&DMatrix<f64>>,
    settings: &PowerSettings,
    with_mosaic: bool,
) -> Result<PowerDraw> {
    let (panel, exposures, _) = gen_with_exposures(config, fixed)?;
    let family = QmcFamily::new(settings.gammas.clone());
    let ols = ols_residuals(&panel, &exposures)?;
    let ols_values = crate::permute::StatisticFamily::evaluate(&family, &ols)?;
    if !with_mosaic {
        return Ok(PowerDraw {
            adaptive: false,
            per_gamma_mosaic: vec![],
            ols_values,
        });
    }
    let prepared = prepare(&panel, &exposures, &settings.tiling, config.seed)?;
    let stats = replicate_family(&prepared.mosaic, &family, settings.n_replicates, config.seed)?;
    let per_gamma_mosaic = (0..stats.nrows())
        .map(|i| {
            let row: Vec<f64> = stats.row(i).iter().copied().collect();
            pvalue(row[0], &row[1..]) <= settings.alpha
        })
        .collect();
    let meta_seed = derive_key(config.seed, Stream::MetaPermutation, &[]);
    let adaptive = adaptive_pvalue(&stats, &MaxApproxZ, settings.k_meta, meta_seed)? <= settings.alpha;
    Ok(PowerDraw {
        adaptive,
        per_gamma_mosaic,
        ols_values,
    })
}

/// Method names used in power-study tables.
pub const ADAPTIVE_METHOD: &str = "mosaic_adaptive_qmc";
pub const ORACLE_METHOD: &str = "mosaic_oracle_qmc";
pub const DOUBLE_ORACLE_METHOD: &str = "ols_double_oracle_qmc";

/// Power of the adaptive mosaic QMC test, the best single-level mosaic QMC
/// test per cell, and OLS-residual QMC calibrated against simulated nulls
/// (best level per cell), over a grid of `(rho, s0)`.
///
/// Rows for every single level are also emitted as `mosaic_qmc_g<gamma>` and
/// `ols_qmc_g<gamma>`.
pub fn power_study(
    base: &SimConfig,
    rhos: &[f64],
    s0s: &[f64],
    settings: &PowerSettings,
    seed: u64,
) -> Result<StudyOutput> {
    if settings.reps == 0 || settings.null_reps == 0 {
        return Err(MosaicError::invalid(MODULE, "reps and null_reps must be positive"));
    }
    if settings.gammas.is_empty() {
        return Err(MosaicError::invalid(MODULE, "at least one quantile level is required"));
    }
    base.validate()?;
    let fixed = base.load_exposures()?;
    let null_values: Vec<Vec<f64>> = (0..settings.null_reps)
        .into_par_iter()
        .map(|rep| {
            let config = SimConfig {
                rho: 0.0,
                seed: replicate_seed(seed, u64::MAX, rep as u64),
                ..base.clone()
            };
            Ok(power_draw(&config, fixed.as_ref(), settings, false)?.ols_values)
        })
        .collect::<Result<_>>()?;
    let d = settings.gammas.len();
    let null_by_gamma: Vec<Vec<f64>> = (0..d).map(|i| null_values.iter().map(|v| v[i]).collect()).collect();

    let mut out = StudyOutput::default();
    let mut cell = 0u64;
    for &s0 in s0s {
        for &rho in rhos {
            let cell_config = SimConfig {
                rho,
                s0,
                ..base.clone()
            };
            cell_config.validate()?;
            let draws: Vec<PowerDraw> = (0..settings.reps)
                .into_par_iter()
                .map(|rep| {
                    let config = SimConfig {
                        seed: replicate_seed(seed, cell, rep as u64),
                        ..cell_config.clone()
                    };
                    power_draw(&config, fixed.as_ref(), settings, true)
                })
                .collect::<Result<_>>()?;
            let reps = settings.reps;
            let rate = |hits: usize| hits as f64 / reps as f64;
            let adaptive = rate(draws.iter().filter(|d| d.adaptive).count());
            let mosaic_rates: Vec<f64> = (0..d)
                .map(|i| rate(draws.iter().filter(|dr| dr.per_gamma_mosaic[i]).count()))
                .collect();
            let ols_rates: Vec<f64> = (0..d)
                .map(|i| {
                    rate(
                        draws
                            .iter()
                            .filter(|dr| pvalue(dr.ols_values[i], &null_by_gamma[i]) <= settings.alpha)
                            .count(),
                    )
                })
                .collect();
            let best = |rates: &[f64]| rates.iter().copied().fold(0.0, f64::max);
            out.rows.push(StudyRow::new(&cell_config, ADAPTIVE_METHOD, reps, adaptive));
            out.rows.push(StudyRow::new(&cell_config, ORACLE_METHOD, reps, best(&mosaic_rates)));
            out.rows
                .push(StudyRow::new(&cell_config, DOUBLE_ORACLE_METHOD, reps, best(&ols_rates)));
            for (i, g) in settings.gammas.iter().enumerate() {
                out.rows
                    .push(StudyRow::new(&cell_config, format!("mosaic_qmc_g{g}"), reps, mosaic_rates[i]));
                out.rows
                    .push(StudyRow::new(&cell_config, format!("ols_qmc_g{g}"), reps, ols_rates[i]));
            }
            cell += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(rho: f64, s0: f64) -> SimConfig {
        SimConfig {
            n_times: 20,
            n_assets: 10,
            n_factors: 2,
            rho,
            s0,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn null_config_has_zero_loading() {
        let (_, _, truth) = gen_semisynthetic(&small(0.0, 0.3)).unwrap();
        assert!(truth.null_holds);
        assert!(truth.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dense_loading_height() {
        let (_, _, truth) = gen_semisynthetic(&small(2.0, 1.0)).unwrap();
        let h = 2.0 / 10f64.sqrt();
        assert!(truth.v.iter().all(|&x| (x - h).abs() < 1e-15));
        assert_eq!(truth.support.len(), 10);
    }

    #[test]
    fn sparse_loading_count() {
        let config = small(1.0, 0.25);
        let (_, _, truth) = gen_semisynthetic(&config).unwrap();
        assert_eq!(truth.support.len(), 3);
        assert_eq!(truth.v.iter().filter(|&&x| x != 0.0).count(), 3);
        assert!((truth.v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_semisynthetic(&small(1.0, 0.5)).unwrap();
        let b = gen_semisynthetic(&small(1.0, 0.5)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = gen_semisynthetic(&SimConfig { seed: 4, ..small(1.0, 0.5) }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(gen_semisynthetic(&small(-1.0, 0.5)).is_err());
        assert!(gen_semisynthetic(&small(1.0, 0.0)).is_err());
        let t2 = SimConfig {
            noise_dist: Dist::StudentT { nu: 2.0 },
            ..small(0.0, 0.5)
        };
        assert!(gen_semisynthetic(&t2).is_err());
    }

    #[test]
    fn file_exposures_must_match_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.csv");
        let mut body = String::from("asset_id,factor_id,value\n");
        for a in 0..10 {
            body.push_str(&format!("A{a:04},F0,{}\n", a as f64 * 0.1));
        }
        std::fs::write(&path, body).unwrap();
        let ok = SimConfig {
            n_factors: 1,
            exposure_source: ExposureSource::File { path: path.clone() },
            ..small(0.0, 0.5)
        };
        let (_, exposures, _) = gen_semisynthetic(&ok).unwrap();
        assert!((exposures.matrices()[0][(3, 0)] - 0.3).abs() < 1e-15);
        let wrong = SimConfig {
            n_factors: 2,
            exposure_source: ExposureSource::File { path },
            ..small(0.0, 0.5)
        };
        assert!(matches!(
            gen_semisynthetic(&wrong),
            Err(MosaicError::InvalidArgument { .. })
        ));
    }

    #[test]
    fn config_hash_is_stable_and_short() {
        let a = small(0.0, 0.5).hash();
        assert_eq!(a.len(), 16);
        assert_eq!(a, small(0.0, 0.5).hash());
        assert_ne!(a, small(0.1, 0.5).hash());
    }

    #[test]
    fn tiny_fpr_study_runs() {
        let settings = FprSettings {
            reps: 4,
            n_replicates: 19,
            n_boot: 10,
            ..Default::default()
        };
        let config = SimConfig {
            n_times: 20,
            n_assets: 12,
            n_factors: 1,
            ..small(0.0, 0.5)
        };
        let methods = [FprMethod::Mosaic, FprMethod::NaivePermutation, FprMethod::NaiveBootstrap];
        let out = fpr_study(std::slice::from_ref(&config), &methods, &settings, 1).unwrap();
        assert_eq!(out.rows.len(), 3);
        assert_eq!(out.replicates.len(), 12);
        let again = fpr_study(&[config], &methods, &settings, 1).unwrap();
        assert_eq!(out, again);
        let mut buf = Vec::new();
        write_study_csv(&out.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("config_hash,method,rho,s0,reps,rejection_rate,stderr\n"));
    }

    #[test]
    fn fpr_study_rejects_signal() {
        assert!(fpr_study(&[small(1.0, 0.5)], &[FprMethod::Mosaic], &FprSettings::default(), 0).is_err());
    }
}
