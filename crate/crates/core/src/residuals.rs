//! Residual estimation: per-tile mosaic residuals, whole-panel OLS residuals,
//! and the within-tile covariance used by adaptive tilings.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{MosaicError, Result};
use crate::panel::{ExposureSeries, ReturnsPanel};
use crate::tiling::Tiling;

const MODULE: &str = "residuals";

/// Drop exact duplicate columns, keeping the first occurrence.
///
/// Returns the reduced matrix and the indices of the kept columns.
pub fn dedup_columns(l: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let mut kept: Vec<usize> = Vec::with_capacity(l.ncols());
    for c in 0..l.ncols() {
        if !kept.iter().any(|&k| l.column(k) == l.column(c)) {
            kept.push(c);
        }
    }
    (l.select_columns(&kept), kept)
}

/// Columns that are (numerically) in the span of the columns before them.
fn dependent_columns(l: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    for c in 0..l.ncols() {
        let mut v: DVector<f64> = l.column(c).into_owned();
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm <= tol {
            out.push(c);
        } else {
            basis.push(v / norm);
        }
    }
    out
}

/// The residual-maker `H = I - L (L'L)^{-1} L'` for an exposure block.
///
/// Exact duplicate columns are removed first. The projector is built from the
/// left singular vectors of `L`; a numerical rank below the column count is
/// an error naming the dependent factors.
pub fn tile_projection(l: &DMatrix<f64>, factor_ids: &[String]) -> Result<DMatrix<f64>> {
    let n = l.nrows();
    let (reduced, kept) = dedup_columns(l);
    let k = reduced.ncols();
    if k == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let name = |c: usize| {
        factor_ids
            .get(kept[c])
            .cloned()
            .unwrap_or_else(|| format!("#{}", kept[c]))
    };
    let svd = reduced.clone().svd(true, false);
    let sigma_max = svd.singular_values.max();
    let tol = f64::EPSILON * (n.max(k) as f64) * sigma_max;
    let rank = if sigma_max > 0.0 {
        svd.singular_values.iter().filter(|&&s| s > tol).count()
    } else {
        0
    };
    if rank < k {
        let scale = reduced.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut bad = dependent_columns(&reduced, (f64::EPSILON * (n.max(k) as f64) * scale).max(tol));
        if bad.is_empty() {
            bad = (rank..k).collect();
        }
        return Err(MosaicError::RankDeficient {
            rank,
            columns: k,
            factors: bad.into_iter().map(name).collect(),
        });
    }
    let u = svd.u.expect("left singular vectors requested");
    // keep only the singular directions spanning the column space
    let order: Vec<usize> = {
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        idx.truncate(rank);
        idx.sort_unstable();
        idx
    };
    let u_r = u.select_columns(&order);
    let mut h = -(&u_r * u_r.transpose());
    for i in 0..n {
        h[(i, i)] += 1.0;
    }
    // symmetrize exactly
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// Residualize a block of returns (rows are timepoints) with a projector.
fn residualize(y: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    y * h
}

/// A `T x p` residual matrix with a mask of defined cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPanel {
    values: DMatrix<f64>,
    mask: Vec<bool>,
}

impl ResidualPanel {
    pub fn new(values: DMatrix<f64>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != values.nrows() * values.ncols() {
            return Err(MosaicError::invalid(MODULE, "residual mask has wrong length"));
        }
        Ok(Self { values, mask })
    }

    /// Every cell defined.
    pub fn dense(values: DMatrix<f64>) -> Self {
        let n = values.nrows() * values.ncols();
        Self {
            values,
            mask: vec![true; n],
        }
    }

    pub fn n_times(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_defined(&self, t: usize, j: usize) -> bool {
        self.mask[t * self.values.ncols() + j]
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Assets defined at every timepoint.
    pub fn complete_assets(&self) -> Vec<usize> {
        (0..self.n_assets())
            .filter(|&j| (0..self.n_times()).all(|t| self.is_defined(t, j)))
            .collect()
    }

    /// Write defined cells in the long returns format.
    pub fn write_csv(
        &self,
        times: &[chrono::NaiveDate],
        assets: &[String],
        sink: impl std::io::Write,
    ) -> Result<()> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(["date", "asset_id", "return"])?;
        for (t, date) in times.iter().enumerate() {
            for (j, asset) in assets.iter().enumerate() {
                if self.is_defined(t, j) {
                    writer.write_record([date.to_string(), asset.clone(), format!("{}", self.values[(t, j)])])?;
                }
            }
        }
        writer.flush().map_err(|e| MosaicError::Io {
            path: "<residual csv>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Per-tile OLS residuals.
#[derive(Debug, Clone)]
pub struct MosaicResiduals {
    tiling: Tiling,
    blocks: Vec<DMatrix<f64>>,
    projections: Vec<DMatrix<f64>>,
    loadings: Vec<DMatrix<f64>>,
}

impl MosaicResiduals {
    pub fn tiling(&self) -> &Tiling {
        &self.tiling
    }

    /// Residual block of each tile, rows in batch order and columns in group order.
    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn projections(&self) -> &[DMatrix<f64>] {
        &self.projections
    }

    /// The within-tile exposure matrices `L_(m)` (after column deduplication).
    pub fn loadings(&self) -> &[DMatrix<f64>] {
        &self.loadings
    }

    /// An all-zero panel whose mask marks the tiled cells.
    pub fn empty_panel(&self) -> ResidualPanel {
        let (t_len, p) = (self.tiling.n_times, self.tiling.n_assets);
        let mut mask = vec![false; t_len * p];
        for tile in &self.tiling.tiles {
            for &t in &tile.batch {
                for &j in &tile.group {
                    mask[t * p + j] = true;
                }
            }
        }
        ResidualPanel {
            values: DMatrix::zeros(t_len, p),
            mask,
        }
    }

    /// Dense residual panel; cells outside every tile are undefined.
    pub fn materialize(&self) -> ResidualPanel {
        let mut out = self.empty_panel();
        for (tile, block) in self.tiling.tiles.iter().zip(&self.blocks) {
            for (r, &t) in tile.batch.iter().enumerate() {
                for (c, &j) in tile.group.iter().enumerate() {
                    out.values[(t, j)] = block[(r, c)];
                }
            }
        }
        out
    }
}

/// Residualize each tile with the OLS projector built from its own exposures.
pub fn mosaic_residuals(panel: &ReturnsPanel, exposures: &ExposureSeries, tiling: &Tiling) -> Result<MosaicResiduals> {
    let (t_len, p) = (panel.n_times(), panel.n_assets());
    if tiling.n_times != t_len || tiling.n_assets != p {
        return Err(MosaicError::invalid(MODULE, "tiling dimensions do not match panel"));
    }
    if exposures.n_times() != t_len || (t_len > 0 && exposures.n_assets() != p) {
        return Err(MosaicError::invalid(MODULE, "exposure dimensions do not match panel"));
    }
    let results: Vec<Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>> = tiling
        .tiles
        .par_iter()
        .enumerate()
        .map(|(m, tile)| residualize_tile(panel, exposures, tile, m))
        .collect();
    let mut blocks = Vec::with_capacity(results.len());
    let mut projections = Vec::with_capacity(results.len());
    let mut loadings = Vec::with_capacity(results.len());
    for r in results {
        let (b, h, l) = r?;
        blocks.push(b);
        projections.push(h);
        loadings.push(l);
    }
    Ok(MosaicResiduals {
        tiling: tiling.clone(),
        blocks,
        projections,
        loadings,
    })
}

/// Residual block, projector, and deduplicated exposures for one tile.
pub(crate) fn residualize_tile(
    panel: &ReturnsPanel,
    exposures: &ExposureSeries,
    tile: &crate::tiling::Tile,
    m: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (t_len, p) = (panel.n_times(), panel.n_assets());
    if tile.batch.is_empty() || tile.group.is_empty() {
        return Err(MosaicError::invariant(MODULE, format!("tile {m} is empty")));
    }
    if tile.batch.iter().any(|&t| t >= t_len) || tile.group.iter().any(|&j| j >= p) {
        return Err(MosaicError::invariant(MODULE, format!("tile {m} indexes outside the panel")));
    }
    for &t in &tile.batch {
        for &j in &tile.group {
            if !panel.is_available(t, j) {
                return Err(MosaicError::invariant(
                    MODULE,
                    format!("tile {m} contains missing cell ({t}, {j})"),
                ));
            }
        }
    }
    let l_full = exposures.at(tile.batch[0]).select_rows(&tile.group);
    for &t in &tile.batch[1..] {
        if exposures.at(t).select_rows(&tile.group) != l_full {
            return Err(MosaicError::invariant(
                MODULE,
                format!("exposures change inside tile {m} (timepoint {t})"),
            ));
        }
    }
    let h = tile_projection(&l_full, exposures.factor_ids())?;
    let y = DMatrix::from_fn(tile.batch.len(), tile.group.len(), |r, c| {
        panel.values()[(tile.batch[r], tile.group[c])]
    });
    let block = residualize(&y, &h);
    let (l, _) = dedup_columns(&l_full);
    Ok((block, h, l))
}

/// Cross-sectional OLS residuals at every timepoint, using the assets fully
/// observed in each exposure segment.
pub fn ols_residuals(panel: &ReturnsPanel, exposures: &ExposureSeries) -> Result<ResidualPanel> {
    let (t_len, p) = (panel.n_times(), panel.n_assets());
    if exposures.n_times() != t_len || (t_len > 0 && exposures.n_assets() != p) {
        return Err(MosaicError::invalid(MODULE, "exposure dimensions do not match panel"));
    }
    let mut values = DMatrix::zeros(t_len, p);
    let mut mask = vec![false; t_len * p];
    for (s, seg) in exposures.segments().into_iter().enumerate() {
        let assets: Vec<usize> = (0..p)
            .filter(|&j| seg.clone().all(|t| panel.is_available(t, j)))
            .collect();
        if assets.is_empty() {
            continue;
        }
        let l = exposures.matrices()[s].select_rows(&assets);
        let h = tile_projection(&l, exposures.factor_ids())?;
        let rows: Vec<usize> = seg.collect();
        let y = DMatrix::from_fn(rows.len(), assets.len(), |r, c| panel.values()[(rows[r], assets[c])]);
        let e = residualize(&y, &h);
        for (r, &t) in rows.iter().enumerate() {
            for (c, &j) in assets.iter().enumerate() {
                values[(t, j)] = e[(r, c)];
                mask[t * p + j] = true;
            }
        }
    }
    Ok(ResidualPanel { values, mask })
}

/// Running sums for the within-tile covariance estimator.
///
/// For each asset pair the accumulator tracks the timepoints at which both
/// assets shared a tile. Rows of each block are sorted before they are added,
/// so the result is bit-for-bit invariant to the row order inside tiles.
#[derive(Debug, Clone)]
pub struct CoGroupAccumulator {
    p: usize,
    count: Vec<f64>,
    sum: Vec<f64>,
    prod: Vec<f64>,
}

impl CoGroupAccumulator {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            count: vec![0.0; p * p],
            sum: vec![0.0; p * p],
            prod: vec![0.0; p * p],
        }
    }

    /// Add one tile's residual block (rows = timepoints, columns = `group`).
    pub fn add_block(&mut self, group: &[usize], block: &DMatrix<f64>) {
        let mut rows: Vec<Vec<f64>> = (0..block.nrows())
            .map(|r| block.row(r).iter().copied().collect())
            .collect();
        rows.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let p = self.p;
        for row in &rows {
            for (ca, &a) in group.iter().enumerate() {
                let ea = row[ca];
                let base = a * p;
                for (cb, &b) in group.iter().enumerate() {
                    let eb = row[cb];
                    self.count[base + b] += 1.0;
                    self.sum[base + b] += ea;
                    self.prod[base + b] += ea * eb;
                }
            }
        }
    }

    /// The current estimate; pairs never sharing a tile get 0.
    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.p;
        DMatrix::from_fn(p, p, |a, b| {
            let n = self.count[a * p + b];
            if n == 0.0 {
                return 0.0;
            }
            let mean_a = self.sum[a * p + b] / n;
            let mean_b = self.sum[b * p + a] / n;
            self.prod[a * p + b] / n - mean_a * mean_b
        })
    }
}

/// Within-tile covariance over the first `n_batches` batches of the tiling.
pub fn within_tile_covariance(mosaic: &MosaicResiduals, n_batches: usize) -> Result<DMatrix<f64>> {
    if n_batches == 0 {
        return Err(MosaicError::invalid(MODULE, "at least one batch is required"));
    }
    let tiling = mosaic.tiling();
    let batch_of_tile = tiling.batch_index_of_tiles();
    let mut acc = CoGroupAccumulator::new(tiling.n_assets);
    for ((tile, block), &b) in tiling.tiles.iter().zip(mosaic.blocks()).zip(&batch_of_tile) {
        if b < n_batches {
            acc.add_block(&tile.group, block);
        }
    }
    Ok(acc.covariance())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiling::{Tile, Tiling};
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn dates(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
    }

    fn names(n: usize, prefix: &str) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn ones_column_gives_centering_matrix() {
        let l = DMatrix::from_element(4, 1, 1.0);
        let h = tile_projection(&l, &names(1, "f")).unwrap();
        let expected = DMatrix::identity(4, 4) - DMatrix::from_element(4, 4, 0.25);
        assert!((&h - expected).amax() < 1e-14);
        assert!((&h * DVector::from_element(4, 1.0)).amax() < 1e-14);
    }

    #[test]
    fn saturated_regression_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = randn(&mut rng, 3, 3);
        let h = tile_projection(&l, &names(3, "f")).unwrap();
        assert!(h.amax() < 1e-12);
    }

    #[test]
    fn projector_algebra_on_random_exposures() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = randn(&mut rng, 10, 3);
        let h = tile_projection(&l, &names(3, "f")).unwrap();
        assert!((&h * &h - &h).amax() < 1e-10);
        assert!((&h * &l).amax() < 1e-10);
        assert_eq!(h, h.transpose());
        let trace: f64 = h.diagonal().sum();
        assert!((trace - 7.0).abs() < 1e-10);
    }

    #[test]
    fn rank_error_names_offending_factor() {
        let mut l = DMatrix::from_element(5, 3, 0.0);
        for i in 0..5 {
            l[(i, 0)] = 1.0;
            l[(i, 1)] = i as f64;
            l[(i, 2)] = 2.0 + 3.0 * i as f64;
        }
        let ids = vec!["mkt".to_string(), "size".into(), "combo".into()];
        match tile_projection(&l, &ids) {
            Err(MosaicError::RankDeficient { rank, factors, .. }) => {
                assert_eq!(rank, 2);
                assert_eq!(factors, vec!["combo".to_string()]);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
        let zero = DMatrix::from_element(5, 1, 0.0);
        assert!(matches!(
            tile_projection(&zero, &["z".into()]),
            Err(MosaicError::RankDeficient { rank: 0, .. })
        ));
    }

    #[test]
    fn duplicate_columns_are_dropped() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = randn(&mut rng, 8, 2);
        let doubled = DMatrix::from_fn(8, 4, |i, j| l[(i, j % 2)]);
        let h1 = tile_projection(&l, &names(2, "f")).unwrap();
        let h2 = tile_projection(&doubled, &names(4, "f")).unwrap();
        assert!((h1 - h2).amax() < 1e-12);
    }

    fn random_setup(seed: u64, t_len: usize, p: usize, k: usize) -> (ReturnsPanel, ExposureSeries) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = randn(&mut rng, p, k);
        let y = randn(&mut rng, t_len, p);
        (
            ReturnsPanel::complete(dates(t_len), names(p, "a"), y).unwrap(),
            ExposureSeries::constant(t_len, l, names(k, "f")).unwrap(),
        )
    }

    #[test]
    fn single_tile_matches_ols() {
        let (panel, exposures) = random_setup(4, 12, 9, 2);
        let tiling = Tiling {
            tiles: vec![Tile {
                batch: (0..12).collect(),
                group: (0..9).collect(),
            }],
            n_times: 12,
            n_assets: 9,
        };
        let mosaic = mosaic_residuals(&panel, &exposures, &tiling).unwrap().materialize();
        let ols = ols_residuals(&panel, &exposures).unwrap();
        assert_eq!(mosaic.values(), ols.values());
    }

    #[test]
    fn exact_fit_and_zero_returns_give_zero_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (t_len, p, k) = (6, 8, 2);
        let l = randn(&mut rng, p, k);
        let x = randn(&mut rng, t_len, k);
        let y = &x * l.transpose();
        let panel = ReturnsPanel::complete(dates(t_len), names(p, "a"), y).unwrap();
        let exposures = ExposureSeries::constant(t_len, l, names(k, "f")).unwrap();
        let tiling = Tiling {
            tiles: vec![
                Tile {
                    batch: (0..6).collect(),
                    group: vec![0, 2, 4, 6],
                },
                Tile {
                    batch: (0..6).collect(),
                    group: vec![1, 3, 5, 7],
                },
            ],
            n_times: t_len,
            n_assets: p,
        };
        let m = mosaic_residuals(&panel, &exposures, &tiling).unwrap();
        assert!(m.blocks().iter().all(|b| b.amax() < 1e-12));
        let zero = ReturnsPanel::complete(dates(t_len), names(p, "a"), DMatrix::zeros(t_len, p)).unwrap();
        let m = mosaic_residuals(&zero, &exposures, &tiling).unwrap();
        assert!(m.blocks().iter().all(|b| b.amax() == 0.0));
    }

    #[test]
    fn no_factors_returns_raw_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = randn(&mut rng, 5, 4);
        let panel = ReturnsPanel::complete(dates(5), names(4, "a"), y.clone()).unwrap();
        let exposures = ExposureSeries::constant(5, DMatrix::zeros(4, 0), vec![]).unwrap();
        let e = ols_residuals(&panel, &exposures).unwrap();
        assert_eq!(e.values(), &y);
    }

    #[test]
    fn within_tile_covariance_matches_formula() {
        // T=4, p=3, two batches of two rows, one tile per batch grouping different pairs
        let block0 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 5.0]);
        let block1 = DMatrix::from_row_slice(2, 2, &[-1.0, 4.0, 0.5, 2.0]);
        let mosaic = MosaicResiduals {
            tiling: Tiling {
                tiles: vec![
                    Tile {
                        batch: vec![0, 1],
                        group: vec![0, 1],
                    },
                    Tile {
                        batch: vec![0, 1],
                        group: vec![2],
                    },
                    Tile {
                        batch: vec![2, 3],
                        group: vec![0, 2],
                    },
                    Tile {
                        batch: vec![2, 3],
                        group: vec![1],
                    },
                ],
                n_times: 4,
                n_assets: 3,
            },
            blocks: vec![
                block0,
                DMatrix::from_row_slice(2, 1, &[7.0, 8.0]),
                block1,
                DMatrix::from_row_slice(2, 1, &[9.0, 10.0]),
            ],
            projections: vec![],
            loadings: vec![],
        };
        let dense = mosaic.materialize();
        let e = dense.values();
        // direct formula: A = timepoints where the pair shares a tile
        let co = |a: usize, b: usize| -> Vec<usize> {
            (0..4)
                .filter(|&t| {
                    mosaic
                        .tiling
                        .tiles
                        .iter()
                        .any(|tile| tile.batch.contains(&t) && tile.group.contains(&a) && tile.group.contains(&b))
                })
                .collect()
        };
        let sigma = within_tile_covariance(&mosaic, 2).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let set = co(a, b);
                let expected = if set.is_empty() {
                    0.0
                } else {
                    let n = set.len() as f64;
                    let m_ab: f64 = set.iter().map(|&t| e[(t, a)] * e[(t, b)]).sum::<f64>() / n;
                    let m_a: f64 = set.iter().map(|&t| e[(t, a)]).sum::<f64>() / n;
                    let m_b: f64 = set.iter().map(|&t| e[(t, b)]).sum::<f64>() / n;
                    m_ab - m_a * m_b
                };
                assert!((sigma[(a, b)] - expected).abs() < 1e-12, "({a},{b})");
            }
        }
        // never co-grouped pair
        assert_eq!(sigma[(1, 2)], 0.0);
        // perfectly shared series: pair (0,1) in batch 0 only
        let only_first = within_tile_covariance(&mosaic, 1).unwrap();
        assert!((only_first[(0, 1)] - (1.0 * 2.0 + 3.0 * 5.0) / 2.0 + 2.0 * 3.5).abs() < 1e-12);
        assert!(within_tile_covariance(&mosaic, 0).is_err());
    }

    #[test]
    fn shared_series_gives_its_variance() {
        let shared = [1.0, -2.0, 0.5, 3.0];
        let block = DMatrix::from_fn(4, 2, |r, _| shared[r]);
        let mut acc = CoGroupAccumulator::new(2);
        acc.add_block(&[0, 1], &block);
        let mean = shared.iter().sum::<f64>() / 4.0;
        let var = shared.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((acc.covariance()[(0, 1)] - var).abs() < 1e-12);
    }
}
