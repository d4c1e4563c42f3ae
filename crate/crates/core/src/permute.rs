//! Within-tile permutations, p-values, Z-statistics, and the adaptive
//! (two-layer) p-value.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{MosaicError, Result};
use crate::residuals::{MosaicResiduals, ResidualPanel};
use crate::rng::{keyed_rng, Stream};
use crate::tiling::Tiling;

const MODULE: &str = "permute";

/// A scalar test statistic of a residual panel. Larger values mean more
/// evidence against the null.
pub trait Statistic: Sync {
    fn evaluate(&self, residuals: &ResidualPanel) -> Result<f64>;

    /// Whether the statistic is a plug-in functional of the empirical law of
    /// the rows (needed by the naive bootstrap baseline).
    fn is_plug_in(&self) -> bool {
        false
    }
}

/// Several statistics evaluated together on one residual panel.
pub trait StatisticFamily: Sync {
    fn len(&self) -> usize;

    fn evaluate(&self, residuals: &ResidualPanel) -> Result<Vec<f64>>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Order of the rows of tile `m` in replicate `r`. Replicate 0 is the identity.
pub fn tile_order(seed: u64, r: usize, m: usize, len: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    if r > 0 && len > 1 {
        let mut rng = keyed_rng(seed, Stream::Permutation, &[r as u64, m as u64]);
        order.shuffle(&mut rng);
    }
    order
}

/// Row orders for every replicate and tile; replicate 0 is the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationSet {
    orders: Vec<Vec<Vec<usize>>>,
}

impl PermutationSet {
    /// Number of non-identity replicates `R`.
    pub fn n_replicates(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn order(&self, r: usize, m: usize) -> &[usize] {
        &self.orders[r][m]
    }

    pub fn replicate(&self, r: usize) -> &[Vec<usize>] {
        &self.orders[r]
    }
}

/// Draw `R` independent uniform within-tile row orders per tile.
pub fn sample_permutations(tiling: &Tiling, n_replicates: usize, seed: u64) -> Result<PermutationSet> {
    if n_replicates == 0 {
        return Err(MosaicError::invalid(MODULE, "at least one replicate is required"));
    }
    let orders = (0..=n_replicates)
        .map(|r| {
            tiling
                .tiles
                .iter()
                .enumerate()
                .map(|(m, tile)| tile_order(seed, r, m, tile.batch.len()))
                .collect()
        })
        .collect();
    Ok(PermutationSet { orders })
}

/// Write every tile's block into `out`, with rows reordered by `orders`.
///
/// Row `i` of the permuted block is row `orders[m][i]` of the original.
fn fill_permuted(mosaic: &MosaicResiduals, orders: &[Vec<usize>], out: &mut ResidualPanel) {
    let values = out.values_mut();
    for ((tile, block), order) in mosaic.tiling().tiles.iter().zip(mosaic.blocks()).zip(orders) {
        for (i, &t) in tile.batch.iter().enumerate() {
            let src = order[i];
            for (c, &j) in tile.group.iter().enumerate() {
                values[(t, j)] = block[(src, c)];
            }
        }
    }
}

/// Materialize the residual panel with each tile's rows reordered.
pub fn materialize_permuted(mosaic: &MosaicResiduals, orders: &[Vec<usize>]) -> Result<ResidualPanel> {
    let tiles = &mosaic.tiling().tiles;
    if orders.len() != tiles.len() {
        return Err(MosaicError::invalid(MODULE, "one order per tile is required"));
    }
    for (m, (tile, order)) in tiles.iter().zip(orders).enumerate() {
        let mut seen = vec![false; tile.batch.len()];
        if order.len() != seen.len() {
            return Err(MosaicError::invalid(MODULE, format!("order for tile {m} has wrong length")));
        }
        for &i in order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(MosaicError::invalid(MODULE, format!("order for tile {m} is not a permutation")));
            }
        }
    }
    let mut out = mosaic.empty_panel();
    fill_permuted(mosaic, orders, &mut out);
    Ok(out)
}

/// The residual panel of replicate `r`; `r = 0` is the unpermuted panel.
pub fn permuted_view(mosaic: &MosaicResiduals, perms: &PermutationSet, r: usize) -> Result<ResidualPanel> {
    if r >= perms.orders.len() {
        return Err(MosaicError::invalid(MODULE, format!("replicate {r} out of range")));
    }
    materialize_permuted(mosaic, perms.replicate(r))
}

/// Evaluate `f` on replicates `0..=R`, in parallel, collected by replicate index.
fn over_replicates<T: Send>(
    mosaic: &MosaicResiduals,
    n_replicates: usize,
    seed: u64,
    f: impl Fn(&ResidualPanel) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let template = mosaic.empty_panel();
    let tiles = &mosaic.tiling().tiles;
    (0..=n_replicates)
        .into_par_iter()
        .map(|r| {
            let orders: Vec<Vec<usize>> = tiles
                .iter()
                .enumerate()
                .map(|(m, tile)| tile_order(seed, r, m, tile.batch.len()))
                .collect();
            let mut panel = template.clone();
            fill_permuted(mosaic, &orders, &mut panel);
            f(&panel)
        })
        .collect()
}

/// Statistic values on the observed panel (index 0) and `R` permuted panels.
pub fn replicate_values(
    mosaic: &MosaicResiduals,
    statistic: &dyn Statistic,
    n_replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_replicates == 0 {
        return Err(MosaicError::invalid(MODULE, "at least one replicate is required"));
    }
    let values = over_replicates(mosaic, n_replicates, seed, |panel| statistic.evaluate(panel))?;
    check_finite(&values)?;
    Ok(values)
}

/// A `d x (R+1)` matrix of family values; column 0 is the observed panel.
pub fn replicate_family(
    mosaic: &MosaicResiduals,
    family: &dyn StatisticFamily,
    n_replicates: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if n_replicates == 0 {
        return Err(MosaicError::invalid(MODULE, "at least one replicate is required"));
    }
    let d = family.len();
    let columns = over_replicates(mosaic, n_replicates, seed, |panel| family.evaluate(panel))?;
    let mut out = DMatrix::zeros(d, n_replicates + 1);
    for (r, col) in columns.iter().enumerate() {
        if col.len() != d {
            return Err(MosaicError::invariant(MODULE, "statistic family returned the wrong length"));
        }
        check_finite(col)?;
        for (i, &v) in col.iter().enumerate() {
            out[(i, r)] = v;
        }
    }
    Ok(out)
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MosaicError::degenerate(MODULE, "statistic returned a non-finite value"));
    }
    Ok(())
}

/// `(1 + #{r : observed <= S_r}) / (R + 1)`; ties count against rejection.
pub fn pvalue(observed: f64, null_draws: &[f64]) -> f64 {
    let hits = null_draws.iter().filter(|&&s| observed <= s).count();
    (1 + hits) as f64 / (null_draws.len() + 1) as f64
}

/// `max(0, Phi^{-1}(1 - p))`.
pub fn exact_z(p: f64) -> f64 {
    let normal = Normal::standard();
    let z = normal.inverse_cdf(1.0 - p);
    if z.is_nan() {
        0.0
    } else {
        z.max(0.0)
    }
}

fn mean_and_pop_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standardize the observed value against all `R + 1` values (observed
/// included) using their mean and population standard deviation. Returns 0
/// when every value is equal.
pub fn approx_z(observed: f64, null_draws: &[f64]) -> f64 {
    let (mean, sd) = mean_and_pop_sd(std::iter::once(observed).chain(null_draws.iter().copied()));
    if sd == 0.0 || !sd.is_finite() {
        0.0
    } else {
        (observed - mean) / sd
    }
}

/// [`approx_z`] for every one of the `R + 1` values in turn.
pub fn approx_z_all(values: &[f64]) -> Vec<f64> {
    let (mean, sd) = mean_and_pop_sd(values.iter().copied());
    values
        .iter()
        .map(|&v| if sd == 0.0 || !sd.is_finite() { 0.0 } else { (v - mean) / sd })
        .collect()
}

/// Lower order-statistic quantile: `sorted[floor(q (n - 1))]`.
pub fn lower_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = (q * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Result of one permutation test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub observed: f64,
    #[serde(skip)]
    pub null_draws: Vec<f64>,
    pub p_value: f64,
    pub z_exact: f64,
    pub z_approx: f64,
    /// `1 - alpha` quantile of the null draws (lower order statistic).
    pub threshold: f64,
    #[serde(rename = "R")]
    pub n_replicates: usize,
    pub seed: u64,
}

impl StatReport {
    pub fn from_draws(observed: f64, null_draws: Vec<f64>, alpha: f64, seed: u64) -> Result<Self> {
        if null_draws.is_empty() {
            return Err(MosaicError::invalid(MODULE, "at least one null draw is required"));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(MosaicError::invalid(MODULE, "alpha must lie in [0, 1)"));
        }
        let p_value = pvalue(observed, &null_draws);
        Ok(Self {
            observed,
            p_value,
            z_exact: exact_z(p_value),
            z_approx: approx_z(observed, &null_draws),
            threshold: lower_quantile(&null_draws, 1.0 - alpha),
            n_replicates: null_draws.len(),
            null_draws,
            seed,
        })
    }
}

/// Run the mosaic permutation test for one statistic.
pub fn mosaic_test(
    mosaic: &MosaicResiduals,
    statistic: &dyn Statistic,
    n_replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<StatReport> {
    let mut values = replicate_values(mosaic, statistic, n_replicates, seed)?;
    let observed = values.remove(0);
    StatReport::from_draws(observed, values, alpha, seed)
}

/// A function of the full `d x (R+1)` statistic matrix, read through a
/// relabeling `order` of its columns (`order[0]` plays the observed role).
pub trait MetaStatistic: Sync {
    fn evaluate(&self, stats: &DMatrix<f64>, order: &[usize]) -> f64;
}

/// Maximum over statistics of the standardized observed value: the observed
/// value minus the mean of the others, divided by the population standard
/// deviation of all `R + 1` values. Rows with zero spread contribute 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxApproxZ;

impl MetaStatistic for MaxApproxZ {
    fn evaluate(&self, stats: &DMatrix<f64>, order: &[usize]) -> f64 {
        let n = stats.ncols();
        let mut best = f64::NEG_INFINITY;
        for i in 0..stats.nrows() {
            let row = stats.row(i);
            let (_, sd) = mean_and_pop_sd(row.iter().copied());
            let x = row[order[0]];
            let others = (row.sum() - x) / (n - 1) as f64;
            let z = if sd == 0.0 { 0.0 } else { (x - others) / sd };
            best = best.max(z);
        }
        best
    }
}

/// The value of one statistic in the observed role.
#[derive(Debug, Clone, Copy)]
pub struct ColumnValue(pub usize);

impl MetaStatistic for ColumnValue {
    fn evaluate(&self, stats: &DMatrix<f64>, order: &[usize]) -> f64 {
        stats[(self.0, order[0])]
    }
}

/// Meta-statistic on the original labels and on `K` uniform relabelings.
pub fn adaptive_draws(
    stats: &DMatrix<f64>,
    meta: &dyn MetaStatistic,
    k_meta: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if k_meta == 0 {
        return Err(MosaicError::invalid(MODULE, "at least one meta permutation is required"));
    }
    if stats.ncols() < 2 || stats.nrows() == 0 {
        return Err(MosaicError::invalid(MODULE, "statistic matrix needs d >= 1 rows and R + 1 >= 2 columns"));
    }
    let n = stats.ncols();
    let identity: Vec<usize> = (0..n).collect();
    let observed = meta.evaluate(stats, &identity);
    let draws: Vec<f64> = (1..=k_meta)
        .into_par_iter()
        .map(|l| {
            let mut order = identity.clone();
            let mut rng = keyed_rng(seed, Stream::MetaPermutation, &[l as u64]);
            order.shuffle(&mut rng);
            meta.evaluate(stats, &order)
        })
        .collect();
    Ok((observed, draws))
}

/// `(1 + #{f_orig <= f_pi}) / (K + 1)` over `K` relabelings of the replicates.
pub fn adaptive_pvalue(stats: &DMatrix<f64>, meta: &dyn MetaStatistic, k_meta: usize, seed: u64) -> Result<f64> {
    let (observed, draws) = adaptive_draws(stats, meta, k_meta, seed)?;
    Ok(pvalue(observed, &draws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiling::Tile;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pvalue_examples() {
        let draws: Vec<f64> = (0..99).map(f64::from).collect();
        assert_eq!(pvalue(1000.0, &draws), 0.01);
        assert_eq!(pvalue(-1.0, &draws), 1.0);
        let draws = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(pvalue(1.0, &draws), 0.5);
    }

    #[test]
    fn exact_z_examples() {
        assert_eq!(exact_z(0.5), 0.0);
        assert_eq!(exact_z(1.0), 0.0);
        assert!((exact_z(0.05) - 1.6449).abs() < 1e-3);
    }

    #[test]
    fn approx_z_examples() {
        assert_eq!(approx_z(3.0, &[3.0, 3.0, 3.0]), 0.0);
        assert!((approx_z(2.0, &[0.0, 0.0, 0.0]) - 1.7321).abs() < 1e-4);
    }

    #[test]
    fn lower_quantile_convention() {
        assert_eq!(lower_quantile(&[0.4, 0.1, 0.3, 0.2], 0.5), 0.2);
        assert_eq!(lower_quantile(&[0.4, 0.1, 0.3, 0.2], 1.0), 0.4);
        assert_eq!(lower_quantile(&[0.4, 0.1, 0.3, 0.2], 0.0), 0.1);
    }

    #[test]
    fn adaptive_examples() {
        let flat = DMatrix::from_element(2, 10, 1.0);
        let p = adaptive_pvalue(&flat, &MaxApproxZ, 50, 1).unwrap();
        assert_eq!(p, 1.0);
        let mut stats = DMatrix::zeros(1, 5);
        stats[(0, 0)] = 10.0;
        assert_eq!(adaptive_pvalue(&stats, &ColumnValue(0), 1, 3).unwrap(), 0.5);
        assert!(adaptive_pvalue(&stats, &ColumnValue(0), 0, 3).is_err());
    }

    fn toy_mosaic() -> MosaicResiduals {
        use crate::panel::{ExposureSeries, ReturnsPanel};
        let t_len = 4;
        let p = 4;
        let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates = (0..t_len).map(|i| start + chrono::Days::new(i as u64)).collect();
        let values = DMatrix::from_fn(t_len, p, |t, j| (t * 10 + j) as f64);
        let panel = ReturnsPanel::complete(dates, (0..p).map(|j| format!("a{j}")).collect(), values).unwrap();
        let exposures = ExposureSeries::constant(t_len, DMatrix::zeros(p, 0), vec![]).unwrap();
        let tiling = Tiling {
            tiles: vec![
                Tile {
                    batch: vec![0, 1, 2, 3],
                    group: vec![0, 1],
                },
                Tile {
                    batch: vec![0, 1, 2, 3],
                    group: vec![2, 3],
                },
            ],
            n_times: t_len,
            n_assets: p,
        };
        crate::residuals::mosaic_residuals(&panel, &exposures, &tiling).unwrap()
    }

    #[test]
    fn replicate_zero_is_identity() {
        let mosaic = toy_mosaic();
        let perms = sample_permutations(mosaic.tiling(), 5, 9).unwrap();
        assert_eq!(permuted_view(&mosaic, &perms, 0).unwrap(), mosaic.materialize());
        assert_eq!(perms.n_replicates(), 5);
        let again = sample_permutations(mosaic.tiling(), 5, 9).unwrap();
        assert_eq!(perms, again);
    }

    #[test]
    fn reversal_reverses_rows() {
        let mosaic = toy_mosaic();
        let reversed = materialize_permuted(&mosaic, &[vec![3, 2, 1, 0], vec![0, 1, 2, 3]]).unwrap();
        let base = mosaic.materialize();
        for t in 0..4 {
            assert_eq!(reversed.values()[(t, 0)], base.values()[(3 - t, 0)]);
            assert_eq!(reversed.values()[(t, 3)], base.values()[(t, 3)]);
        }
        assert!(materialize_permuted(&mosaic, &[vec![0, 0, 1, 2], vec![0, 1, 2, 3]]).is_err());
    }

    #[test]
    fn single_row_tiles_never_move() {
        for r in 0..20 {
            assert_eq!(tile_order(4, r, 0, 1), vec![0]);
        }
    }

    #[test]
    fn three_row_orders_are_uniform() {
        let n = 6000;
        let mut counts = std::collections::HashMap::new();
        for r in 1..=n {
            *counts.entry(tile_order(17, r, 0, 3)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = n as f64 / 6.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9% point of chi-square with 5 degrees of freedom
        assert!(chi2 < 20.52, "chi2 = {chi2}");
    }

    #[test]
    fn permuted_views_preserve_row_multisets() {
        let mosaic = toy_mosaic();
        let perms = sample_permutations(mosaic.tiling(), 10, 2).unwrap();
        let base = mosaic.materialize();
        for r in 0..=10 {
            let view = permuted_view(&mosaic, &perms, r).unwrap();
            for tile in &mosaic.tiling().tiles {
                let rows = |panel: &ResidualPanel| {
                    let mut rows: Vec<Vec<u64>> = tile
                        .batch
                        .iter()
                        .map(|&t| tile.group.iter().map(|&j| panel.values()[(t, j)].to_bits()).collect())
                        .collect();
                    rows.sort();
                    rows
                };
                assert_eq!(rows(&view), rows(&base));
            }
        }
    }

    struct FirstCell;
    impl Statistic for FirstCell {
        fn evaluate(&self, residuals: &ResidualPanel) -> Result<f64> {
            Ok(residuals.values()[(0, 0)])
        }
    }

    #[test]
    fn mosaic_test_is_reproducible() {
        let mosaic = toy_mosaic();
        let a = mosaic_test(&mosaic, &FirstCell, 30, 0.05, 5).unwrap();
        let b = mosaic_test(&mosaic, &FirstCell, 30, 0.05, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.null_draws.len(), 30);
        let json = serde_json::to_value(&a).unwrap();
        for key in ["observed", "p_value", "z_exact", "z_approx", "threshold", "R", "seed"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn adaptive_matches_plain_pvalue_in_distribution() {
        // with d = 1 and the column-value meta statistic, both p-values are
        // uniform on the same grid under exchangeability
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (reps, r) = (500, 19);
        let mut plain = Vec::new();
        let mut adaptive = Vec::new();
        for rep in 0..reps {
            let stats = DMatrix::from_fn(1, r + 1, |_, _| rng.random::<f64>());
            let draws: Vec<f64> = (1..=r).map(|c| stats[(0, c)]).collect();
            plain.push(pvalue(stats[(0, 0)], &draws));
            adaptive.push(adaptive_pvalue(&stats, &ColumnValue(0), 19, rep as u64).unwrap());
        }
        plain.sort_by(f64::total_cmp);
        adaptive.sort_by(f64::total_cmp);
        // two-sample Kolmogorov-Smirnov statistic on a shared grid
        let ecdf = |v: &[f64], x: f64| v.partition_point(|&y| y <= x) as f64 / v.len() as f64;
        let d = (1..=20)
            .map(|i| {
                let x = i as f64 / 20.0;
                (ecdf(&plain, x) - ecdf(&adaptive, x)).abs()
            })
            .fold(0.0, f64::max);
        // critical value at level 0.01 for n = m = 500
        assert!(d < 1.63 * (2.0f64 / 500.0).sqrt(), "KS distance {d}");
    }

    proptest! {
        #[test]
        fn shift_and_monotone_transforms_keep_pvalues(
            values in proptest::collection::vec(-100i32..100, 2..40),
            shift in -1000i32..1000,
        ) {
            let vals: Vec<f64> = values.iter().map(|&v| v as f64 / 8.0).collect();
            let p = pvalue(vals[0], &vals[1..]);
            let shifted: Vec<f64> = vals.iter().map(|v| v + shift as f64).collect();
            prop_assert_eq!(p, pvalue(shifted[0], &shifted[1..]));
            let cubed: Vec<f64> = vals.iter().map(|v| v.powi(3) + v.exp()).collect();
            prop_assert_eq!(p, pvalue(cubed[0], &cubed[1..]));
        }

        #[test]
        fn approx_z_identities(values in proptest::collection::vec(-1e3f64..1e3, 2..60)) {
            let z = approx_z_all(&values);
            let (_, sd) = mean_and_pop_sd(values.iter().copied());
            prop_assume!(sd > 1e-6);
            let sum: f64 = z.iter().sum();
            let sq: f64 = z.iter().map(|v| v * v).sum();
            prop_assert!(sum.abs() < 1e-10);
            prop_assert!((sq - values.len() as f64).abs() < 1e-10 * values.len() as f64);
            prop_assert!((z[0] - approx_z(values[0], &values[1..])).abs() < 1e-12);
        }

        #[test]
        fn pvalues_lie_on_the_grid(values in proptest::collection::vec(-5.0f64..5.0, 2..50)) {
            let p = pvalue(values[0], &values[1..]);
            let scaled = p * values.len() as f64;
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
            prop_assert!(p >= 1.0 / values.len() as f64 && p <= 1.0);
        }
    }
}
