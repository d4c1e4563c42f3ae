//! Command-line interface.
//!
//! Every subcommand reads an optional JSON config; command-line flags win
//! over the file. Inputs are loaded and checked before any computation, and
//! output is written only once the whole result is ready.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{MosaicError, Result};
use crate::panel::{load_exposures, load_returns, ExposureSeries, ReturnsPanel};
use crate::residuals::mosaic_residuals;
use crate::simulate::{
    fpr_study, gen_semisynthetic, power_study, write_study_csv, FprMethod, FprSettings, PowerSettings, SimConfig,
};
use crate::stats::{
    improvement_analysis, prepare, rolling_analysis, run_statistic, write_rolling_csv, RollingSpec,
    StatisticConfig, TilingConfig, TilingMode,
};
use crate::tiling::{augment_exposures, validate_tiling, GroupRounding, Tiling};

const MODULE: &str = "cli";

#[derive(Debug, Parser)]
#[command(name = "mosaic", version, about = "Mosaic permutation tests for factor models with known exposures")]
pub struct Cli {
    /// Worker threads (output does not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test the full panel once and print a JSON report.
    Test(PanelArgs),
    /// Test sliding windows and write a CSV.
    Rolling(PanelArgs),
    /// Fit candidate loadings on one fold and test their out-of-sample R² on the next.
    Improve(PanelArgs),
    /// False-positive-rate study on simulated null data.
    Simulate(StudyArgs),
    /// Power study of adaptive and oracle QMC tests on simulated data.
    Power(StudyArgs),
    /// Build (or read) a tiling and check it against a panel.
    ValidateTiling(PanelArgs),
}

#[derive(Debug, Args, Default)]
pub struct PanelArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Returns CSV (`date,asset_id,return`).
    #[arg(long)]
    pub returns: Option<PathBuf>,
    /// Exposures CSV (`date,asset_id,factor_id,value`).
    #[arg(long)]
    pub exposures: Option<PathBuf>,
    /// Read the tiling from a JSON file instead of building one.
    #[arg(long)]
    pub tiling: Option<PathBuf>,
    /// Write the tiling that was used to this file.
    #[arg(long)]
    pub tiling_out: Option<PathBuf>,
    /// Write the mosaic residuals (long CSV) to this file.
    #[arg(long)]
    pub residuals_out: Option<PathBuf>,
    /// Tiling mode: default or adaptive.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<TilingMode>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Number of groups per batch (overrides the derived value).
    #[arg(long)]
    pub groups: Option<usize>,
    /// Round the derived group count down instead of up.
    #[arg(long)]
    pub floor_groups: bool,
    /// Statistic: mmc, qmc, or adaptive_qmc.
    #[arg(long)]
    pub statistic: Option<String>,
    /// Quantile level for qmc.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Relabelings for adaptive_qmc.
    #[arg(long)]
    pub k_meta: Option<usize>,
    /// Permutation replicates.
    #[arg(short = 'R', long = "replicates")]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Divide alpha by this many tests when computing the threshold.
    #[arg(long)]
    pub bonferroni: Option<usize>,
    /// Seed; falls back to the config file, then MOSAIC_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra exposure change-points (comma-separated time indices).
    #[arg(long, value_delimiter = ',')]
    pub change_points: Option<Vec<usize>>,
    /// Use paired (augmented) exposures.
    #[arg(long)]
    pub augment: bool,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// First date of the second fold (improve).
    #[arg(long)]
    pub split_date: Option<NaiveDate>,
    /// Output file (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct StudyArgs {
    /// JSON study configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(short = 'R', long = "replicates")]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Signal sizes (power).
    #[arg(long, value_delimiter = ',')]
    pub rhos: Option<Vec<f64>>,
    /// Sparsity fractions (power).
    #[arg(long, value_delimiter = ',')]
    pub s0s: Option<Vec<f64>>,
    /// Per-replicate values (`method,replicate,p_or_z`) for the simulate study.
    #[arg(long)]
    pub replicates_out: Option<PathBuf>,
    /// Write one simulated panel (`returns.csv`, `exposures.csv`) to this directory instead of running a study.
    #[arg(long)]
    pub emit: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn parse_mode(raw: &str) -> std::result::Result<TilingMode, String> {
    match raw {
        "default" => Ok(TilingMode::Default),
        "adaptive" => Ok(TilingMode::Adaptive),
        other => Err(format!("unknown tiling mode {other:?}")),
    }
}

/// Panel-analysis settings as stored in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub returns: Option<PathBuf>,
    pub exposures: Option<PathBuf>,
    pub tiling_file: Option<PathBuf>,
    pub tiling: TilingConfig,
    pub statistic: StatisticConfig,
    #[serde(rename = "R")]
    pub replicates: usize,
    pub alpha: f64,
    pub bonferroni: usize,
    pub seed: Option<u64>,
    pub change_points: Vec<usize>,
    pub augment: bool,
    pub window: Option<usize>,
    pub stride: Option<usize>,
    pub split_date: Option<NaiveDate>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            returns: None,
            exposures: None,
            tiling_file: None,
            tiling: TilingConfig::default(),
            statistic: StatisticConfig::Mmc,
            replicates: 999,
            alpha: 0.05,
            bonferroni: 1,
            seed: None,
            change_points: Vec::new(),
            augment: false,
            window: None,
            stride: None,
            split_date: None,
        }
    }
}

/// Study settings as stored in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Base simulation design.
    pub base: SimConfig,
    /// Designs for the false-positive study (defaults to `[base]`).
    pub configs: Vec<SimConfig>,
    pub methods: Vec<FprMethod>,
    pub fpr: FprSettings,
    pub power: PowerSettings,
    pub rhos: Vec<f64>,
    pub s0s: Vec<f64>,
    pub seed: Option<u64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            base: SimConfig::default(),
            configs: Vec::new(),
            methods: vec![FprMethod::Mosaic, FprMethod::NaivePermutation, FprMethod::NaiveBootstrap],
            fpr: FprSettings::default(),
            power: PowerSettings::default(),
            rhos: vec![0.0, 1.0, 2.0, 3.0],
            s0s: vec![0.05, 0.5],
            seed: None,
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| MosaicError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn open_file(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| MosaicError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_json<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => Ok(serde_json::from_str(&read_file(p)?)?),
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var("MOSAIC_SEED") {
        Ok(raw) => raw
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| MosaicError::invalid(MODULE, format!("MOSAIC_SEED is not an integer: {raw:?}"))),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    Ok(env_seed()?.unwrap_or(0))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| MosaicError::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| MosaicError::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}

/// Merge flags into the file config.
fn merge_panel_args(args: &PanelArgs) -> Result<RunConfig> {
    let mut cfg: RunConfig = read_json(args.config.as_deref())?;
    if args.returns.is_some() {
        cfg.returns = args.returns.clone();
    }
    if args.exposures.is_some() {
        cfg.exposures = args.exposures.clone();
    }
    if args.tiling.is_some() {
        cfg.tiling_file = args.tiling.clone();
    }
    if let Some(m) = args.mode {
        cfg.tiling.mode = m;
    }
    if let Some(b) = args.batch_size {
        cfg.tiling.options.batch_size = b;
    }
    if args.groups.is_some() {
        cfg.tiling.options.n_groups = args.groups;
    }
    if args.floor_groups {
        cfg.tiling.options.rounding = GroupRounding::Floor;
    }
    if let Some(name) = &args.statistic {
        cfg.statistic = match name.as_str() {
            "mmc" => StatisticConfig::Mmc,
            "qmc" => StatisticConfig::Qmc {
                gamma: args.gamma.unwrap_or(0.5),
            },
            "adaptive_qmc" => StatisticConfig::AdaptiveQmc {
                gammas: crate::stats::DEFAULT_GAMMAS.to_vec(),
                k_meta: args.k_meta.unwrap_or(199),
            },
            "bcv_r2" => StatisticConfig::BcvR2 { split: None },
            other => return Err(MosaicError::invalid(MODULE, format!("unknown statistic {other:?}"))),
        };
    }
    match &mut cfg.statistic {
        StatisticConfig::Qmc { gamma } => {
            if let Some(g) = args.gamma {
                *gamma = g;
            }
        }
        StatisticConfig::AdaptiveQmc { k_meta, .. } => {
            if let Some(k) = args.k_meta {
                *k_meta = k;
            }
        }
        _ => {}
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(b) = args.bonferroni {
        cfg.bonferroni = b;
    }
    cfg.seed = Some(resolve_seed(args.seed, cfg.seed)?);
    if let Some(c) = &args.change_points {
        cfg.change_points = c.clone();
    }
    cfg.augment |= args.augment;
    if args.window.is_some() {
        cfg.window = args.window;
    }
    if args.stride.is_some() {
        cfg.stride = args.stride;
    }
    if args.split_date.is_some() {
        cfg.split_date = args.split_date;
    }
    if cfg.replicates == 0 {
        return Err(MosaicError::invalid(MODULE, "R must be at least 1"));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(MosaicError::invalid(MODULE, "alpha must lie in (0, 1)"));
    }
    if cfg.bonferroni == 0 {
        return Err(MosaicError::invalid(MODULE, "bonferroni divisor must be positive"));
    }
    Ok(cfg)
}

struct LoadedPanel {
    panel: ReturnsPanel,
    exposures: ExposureSeries,
    tiling: Option<Tiling>,
}

fn load_inputs(cfg: &RunConfig) -> Result<LoadedPanel> {
    let returns = cfg
        .returns
        .as_deref()
        .ok_or_else(|| MosaicError::invalid(MODULE, "--returns is required"))?;
    let exposures_path = cfg
        .exposures
        .as_deref()
        .ok_or_else(|| MosaicError::invalid(MODULE, "--exposures is required"))?;
    let returns_file = open_file(returns)?;
    let exposures_file = open_file(exposures_path)?;
    let tiling_raw = cfg.tiling_file.as_deref().map(read_file).transpose()?;
    let panel = load_returns(returns_file)?;
    let mut exposures = load_exposures(exposures_file, &panel)?;
    if !cfg.change_points.is_empty() {
        exposures = exposures.with_extra_change_points(&cfg.change_points)?;
    }
    if cfg.augment {
        exposures = augment_exposures(&exposures)?;
    }
    let tiling = tiling_raw.as_deref().map(Tiling::from_json).transpose()?;
    Ok(LoadedPanel {
        panel,
        exposures,
        tiling,
    })
}

fn json_line<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn effective_alpha(cfg: &RunConfig) -> f64 {
    cfg.alpha / cfg.bonferroni as f64
}

fn cmd_test(args: &PanelArgs) -> Result<()> {
    let cfg = merge_panel_args(args)?;
    let inputs = load_inputs(&cfg)?;
    let seed = cfg.seed.unwrap_or(0);
    let (tiling, mosaic, assets) = match &inputs.tiling {
        Some(t) => {
            let complete = inputs.panel.is_complete();
            let mask = (!complete).then(|| inputs.panel.mask());
            let report = validate_tiling(
                t,
                inputs.panel.n_times(),
                inputs.panel.n_assets(),
                &inputs.exposures,
                mask,
            );
            if !report.all_passed() {
                return Err(MosaicError::invalid(
                    MODULE,
                    format!("supplied tiling is invalid: {}", report.failures().join("; ")),
                ));
            }
            let mosaic = mosaic_residuals(&inputs.panel, &inputs.exposures, t)?;
            let assets = (!complete).then(|| {
                crate::panel::summarize_availability(&inputs.panel, &inputs.exposures).always_available
            });
            (t.clone(), mosaic, assets)
        }
        None => {
            let prepared = prepare(&inputs.panel, &inputs.exposures, &cfg.tiling, seed)?;
            (prepared.tiling, prepared.mosaic, prepared.assets)
        }
    };
    let report = run_statistic(&mosaic, &cfg.statistic, assets, cfg.replicates, effective_alpha(&cfg), seed)?;
    let body = json_line(&report)?;
    let tiling_bytes = args.tiling_out.as_ref().map(|_| json_line(&tiling)).transpose()?;
    let residual_bytes = match &args.residuals_out {
        Some(_) => {
            let mut buf = Vec::new();
            mosaic
                .materialize()
                .write_csv(inputs.panel.times(), inputs.panel.assets(), &mut buf)?;
            Some(buf)
        }
        None => None,
    };
    if let (Some(path), Some(bytes)) = (&args.tiling_out, tiling_bytes) {
        write_output(Some(path), &bytes)?;
    }
    if let (Some(path), Some(bytes)) = (&args.residuals_out, residual_bytes) {
        write_output(Some(path), &bytes)?;
    }
    write_output(args.output.as_deref(), &body)
}

fn cmd_rolling(args: &PanelArgs) -> Result<()> {
    let cfg = merge_panel_args(args)?;
    let inputs = load_inputs(&cfg)?;
    let window = cfg
        .window
        .ok_or_else(|| MosaicError::invalid(MODULE, "--window is required"))?;
    let spec = RollingSpec {
        window,
        stride: cfg.stride.unwrap_or(window),
        n_replicates: cfg.replicates,
        alpha: effective_alpha(&cfg),
        seed: cfg.seed.unwrap_or(0),
    };
    let rows = rolling_analysis(&inputs.panel, &inputs.exposures, &cfg.tiling, &cfg.statistic, &spec)?;
    let mut buf = Vec::new();
    write_rolling_csv(&rows, &mut buf)?;
    write_output(args.output.as_deref(), &buf)
}

fn cmd_improve(args: &PanelArgs) -> Result<()> {
    let cfg = merge_panel_args(args)?;
    let inputs = load_inputs(&cfg)?;
    let times = inputs.panel.times();
    let split = match (cfg.split_date, &cfg.statistic) {
        (Some(date), _) => times.partition_point(|&t| t < date),
        (None, StatisticConfig::BcvR2 { split: Some(s) }) => *s,
        _ => return Err(MosaicError::invalid(MODULE, "--split-date is required")),
    };
    if split == 0 || split >= times.len() {
        return Err(MosaicError::invalid(
            MODULE,
            "fold boundary must leave observations on both sides of the split",
        ));
    }
    let report = improvement_analysis(
        &inputs.panel,
        &inputs.exposures,
        &cfg.tiling,
        split,
        cfg.replicates,
        effective_alpha(&cfg),
        cfg.seed.unwrap_or(0),
    )?;
    write_output(args.output.as_deref(), &json_line(&report)?)
}

fn cmd_validate_tiling(args: &PanelArgs) -> Result<()> {
    let cfg = merge_panel_args(args)?;
    let inputs = load_inputs(&cfg)?;
    let seed = cfg.seed.unwrap_or(0);
    let complete = inputs.panel.is_complete();
    let (tiling, generated) = match inputs.tiling {
        Some(t) => (t, false),
        None => (prepare(&inputs.panel, &inputs.exposures, &cfg.tiling, seed)?.tiling, true),
    };
    let mask = (!complete).then(|| inputs.panel.mask());
    let report = validate_tiling(
        &tiling,
        inputs.panel.n_times(),
        inputs.panel.n_assets(),
        &inputs.exposures,
        mask,
    );
    #[derive(Serialize)]
    struct Output<'a> {
        passed: bool,
        report: &'a crate::tiling::TilingReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        tiling: Option<&'a Tiling>,
    }
    let out = Output {
        passed: report.all_passed(),
        report: &report,
        tiling: generated.then_some(&tiling),
    };
    write_output(args.output.as_deref(), &json_line(&out)?)?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(MosaicError::invalid(MODULE, "tiling failed validation"))
    }
}

fn merge_study_args(args: &StudyArgs) -> Result<(StudyConfig, u64)> {
    let mut cfg: StudyConfig = read_json(args.config.as_deref())?;
    if let Some(r) = args.reps {
        cfg.fpr.reps = r;
        cfg.power.reps = r;
    }
    if let Some(r) = args.replicates {
        cfg.fpr.n_replicates = r;
        cfg.power.n_replicates = r;
    }
    if let Some(a) = args.alpha {
        cfg.fpr.alpha = a;
        cfg.power.alpha = a;
    }
    if let Some(r) = &args.rhos {
        cfg.rhos = r.clone();
    }
    if let Some(s) = &args.s0s {
        cfg.s0s = s.clone();
    }
    let seed = resolve_seed(args.seed, cfg.seed)?;
    cfg.base.validate()?;
    for c in &cfg.configs {
        c.validate()?;
    }
    for a in [cfg.fpr.alpha, cfg.power.alpha] {
        if !(a > 0.0 && a < 1.0) {
            return Err(MosaicError::invalid(MODULE, "alpha must lie in (0, 1)"));
        }
    }
    // exposure files are read up front so a bad path fails before any work
    cfg.base.load_exposures()?;
    for c in &cfg.configs {
        c.load_exposures()?;
    }
    Ok((cfg, seed))
}

fn emit_panel(config: &SimConfig, dir: &Path) -> Result<()> {
    let (panel, exposures, _) = gen_semisynthetic(config)?;
    let mut returns = Vec::new();
    crate::panel::write_returns(&panel, &mut returns)?;
    let mut exp = Vec::new();
    crate::panel::write_exposures(&panel, &exposures, &mut exp)?;
    std::fs::create_dir_all(dir).map_err(|e| MosaicError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    write_output(Some(&dir.join("returns.csv")), &returns)?;
    write_output(Some(&dir.join("exposures.csv")), &exp)
}

fn cmd_simulate(args: &StudyArgs) -> Result<()> {
    let (cfg, seed) = merge_study_args(args)?;
    if let Some(dir) = &args.emit {
        let config = SimConfig {
            seed,
            ..cfg.configs.first().unwrap_or(&cfg.base).clone()
        };
        return emit_panel(&config, dir);
    }
    let configs = if cfg.configs.is_empty() {
        vec![cfg.base.clone()]
    } else {
        cfg.configs.clone()
    };
    let out = fpr_study(&configs, &cfg.methods, &cfg.fpr, seed)?;
    if cfg.methods.iter().any(|m| *m != FprMethod::Mosaic) {
        eprintln!("note: naive_* methods are invalid comparison baselines, not tests to rely on");
    }
    let mut buf = Vec::new();
    write_study_csv(&out.rows, &mut buf)?;
    let replicate_bytes = match &args.replicates_out {
        Some(_) => {
            let mut b = Vec::new();
            crate::baselines::write_comparison_csv(&out.replicates, &mut b)?;
            Some(b)
        }
        None => None,
    };
    if let (Some(path), Some(bytes)) = (&args.replicates_out, replicate_bytes) {
        write_output(Some(path), &bytes)?;
    }
    write_output(args.output.as_deref(), &buf)
}

fn cmd_power(args: &StudyArgs) -> Result<()> {
    let (cfg, seed) = merge_study_args(args)?;
    let out = power_study(&cfg.base, &cfg.rhos, &cfg.s0s, &cfg.power, seed)?;
    let mut buf = Vec::new();
    write_study_csv(&out.rows, &mut buf)?;
    write_output(args.output.as_deref(), &buf)
}

/// Run a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(MosaicError::invalid(MODULE, "--threads must be positive"));
        }
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Rolling(a) => cmd_rolling(a),
        Command::Improve(a) => cmd_improve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Power(a) => cmd_power(a),
        Command::ValidateTiling(a) => cmd_validate_tiling(a),
    }
}

/// Parse arguments, run, and map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"R": 49, "alpha": 0.1, "seed": 5, "statistic": {"type": "qmc", "params": {"gamma": 0.9}},
                "tiling": {"mode": "adaptive", "batch_size": 5}}"#,
        )
        .unwrap();
        let args = PanelArgs {
            config: Some(path),
            replicates: Some(19),
            gamma: Some(0.25),
            ..Default::default()
        };
        let cfg = merge_panel_args(&args).unwrap();
        assert_eq!(cfg.replicates, 19);
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.seed, Some(5));
        assert_eq!(cfg.statistic, StatisticConfig::Qmc { gamma: 0.25 });
        assert_eq!(cfg.tiling.mode, TilingMode::Adaptive);
        assert_eq!(cfg.tiling.options.batch_size, 5);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"replicatez": 3}"#).unwrap();
        let args = PanelArgs {
            config: Some(path),
            ..Default::default()
        };
        assert_eq!(merge_panel_args(&args).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn missing_input_is_exit_code_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out.json");
        let code = main_with_args([
            "mosaic",
            "test",
            "--returns",
            "/nonexistent/returns.csv",
            "--exposures",
            "/nonexistent/exposures.csv",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
        assert!(!out.exists());
    }
}
