//! Tilings of the `T x p` panel: construction, validation, and exposure
//! augmentation.

use std::collections::HashMap;
use std::ops::Range;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MosaicError, Result};
use crate::panel::{AvailabilitySummary, ExposureSeries, ReturnsPanel};
use crate::residuals::{residualize_tile, CoGroupAccumulator};
use crate::rng::{keyed_rng, Stream};

const MODULE: &str = "tiling";

/// One rectangle `batch x group` of the panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub batch: Vec<usize>,
    pub group: Vec<usize>,
}

/// A collection of tiles over a `T x p` panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tiling {
    pub tiles: Vec<Tile>,
    #[serde(rename = "T")]
    pub n_times: usize,
    #[serde(rename = "p")]
    pub n_assets: usize,
}

impl Tiling {
    /// Distinct batches in order of first appearance.
    pub fn batches(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for tile in &self.tiles {
            if !out.contains(&tile.batch) {
                out.push(tile.batch.clone());
            }
        }
        out
    }

    /// For each tile, the index of its batch in [`Tiling::batches`].
    pub fn batch_index_of_tiles(&self) -> Vec<usize> {
        let mut seen: HashMap<&[usize], usize> = HashMap::new();
        self.tiles
            .iter()
            .map(|tile| {
                let next = seen.len();
                *seen.entry(tile.batch.as_slice()).or_insert(next)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        Ok(serde_json::from_str(raw)?)
    }
}

/// How `D` is rounded when it is derived from `p / (5k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupRounding {
    #[default]
    Ceil,
    Floor,
}

/// Options shared by the default and adaptive tilings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TilingOptions {
    pub batch_size: usize,
    /// Fixed number of groups per batch; derived from `p` and `k` when absent.
    pub n_groups: Option<usize>,
    pub rounding: GroupRounding,
}

impl Default for TilingOptions {
    fn default() -> Self {
        Self {
            batch_size: 10,
            n_groups: None,
            rounding: GroupRounding::Ceil,
        }
    }
}

/// Recommended number of groups, `max(2, ceil(p / 5k))`.
pub fn group_count(p: usize, k: usize) -> usize {
    group_count_rounded(p, k, GroupRounding::Ceil)
}

/// [`group_count`] with a choice of rounding. `k = 0` is treated as `k = 1`.
pub fn group_count_rounded(p: usize, k: usize, rounding: GroupRounding) -> usize {
    let denom = 5 * k.max(1);
    let d = match rounding {
        GroupRounding::Ceil => p.div_ceil(denom),
        GroupRounding::Floor => p / denom,
    };
    d.max(2)
}

/// Split `[0, T)` into batches of at most `batch_size` consecutive timepoints
/// that never straddle an exposure change-point.
///
/// Batch boundaries sit on the global grid `0, batch_size, 2 batch_size, ...`
/// and at every change-point. A one-timepoint fragment is merged into its
/// neighbour inside the same segment; a segment of length one is an error.
pub fn make_batches(n_times: usize, batch_size: usize, change_points: &[usize]) -> Result<Vec<Range<usize>>> {
    if batch_size < 2 {
        return Err(MosaicError::invalid(MODULE, "batch_size must be at least 2"));
    }
    let mut bounds: Vec<usize> = change_points.iter().copied().filter(|&c| c > 0 && c < n_times).collect();
    bounds.sort_unstable();
    bounds.dedup();
    let mut segments = Vec::new();
    let mut start = 0;
    for &c in bounds.iter().chain(std::iter::once(&n_times)) {
        if c > start {
            segments.push(start..c);
        }
        start = c;
    }
    let mut out = Vec::new();
    for seg in segments {
        let mut pieces: Vec<Range<usize>> = Vec::new();
        let mut s = seg.start;
        while s < seg.end {
            let grid_end = (s / batch_size + 1) * batch_size;
            let e = grid_end.min(seg.end);
            pieces.push(s..e);
            s = e;
        }
        if pieces.len() == 1 && pieces[0].len() == 1 {
            return Err(MosaicError::DegenerateBatch { time: pieces[0].start });
        }
        let mut merged: Vec<Range<usize>> = Vec::with_capacity(pieces.len());
        let mut pending: Option<usize> = None;
        for piece in pieces {
            let piece = match pending.take() {
                Some(from) => from..piece.end,
                None => piece,
            };
            if piece.len() == 1 {
                match merged.last_mut() {
                    Some(prev) => prev.end = piece.end,
                    None => pending = Some(piece.start),
                }
            } else {
                merged.push(piece);
            }
        }
        out.extend(merged);
    }
    Ok(out)
}

/// Split `universe` into `n_groups` near-equal groups uniformly at random.
///
/// Sizes differ by at most one and the larger groups come first. Each group
/// is returned sorted.
pub fn random_partition(universe: &[usize], n_groups: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut shuffled = universe.to_vec();
    shuffled.shuffle(rng);
    let n = shuffled.len();
    let (base, rem) = (n / n_groups, n % n_groups);
    let mut out = Vec::with_capacity(n_groups);
    let mut pos = 0;
    for d in 0..n_groups {
        let size = base + usize::from(d < rem);
        let mut group = shuffled[pos..pos + size].to_vec();
        group.sort_unstable();
        out.push(group);
        pos += size;
    }
    out
}

/// Asset universe of every batch: all assets, or the fully observed assets
/// of the segment containing the batch.
fn batch_universes(
    batches: &[Range<usize>],
    p: usize,
    change_points: &[usize],
    availability: Option<&AvailabilitySummary>,
) -> Result<Vec<Vec<usize>>> {
    batches
        .iter()
        .map(|b| match availability {
            None => Ok((0..p).collect()),
            Some(summary) => {
                let seg = change_points.partition_point(|&c| c <= b.start).saturating_sub(1);
                summary.per_segment_available.get(seg).cloned().ok_or_else(|| {
                    MosaicError::invalid(MODULE, "availability summary does not match the change-points")
                })
            }
        })
        .collect()
}

fn groups_for(universe: &[usize], k: usize, opts: &TilingOptions) -> Result<usize> {
    let n = universe.len();
    if n < 2 * k || n == 0 {
        return Err(MosaicError::Powerless { assets: n, factors: k });
    }
    let d = opts
        .n_groups
        .unwrap_or_else(|| group_count_rounded(n, k, opts.rounding));
    if d == 0 || d > n {
        return Err(MosaicError::invalid(
            MODULE,
            format!("cannot split {n} assets into {d} groups"),
        ));
    }
    Ok(d)
}

fn batch_rng(seed: u64, batch: usize) -> rand_chacha::ChaCha8Rng {
    keyed_rng(seed, Stream::TileGroups, &[batch as u64])
}

/// The default randomized tiling.
///
/// Batches come from [`make_batches`]; inside each batch the asset universe is
/// split at random into `D` near-equal groups, with an independent stream per
/// batch index.
pub fn default_tiling(
    n_times: usize,
    n_assets: usize,
    n_factors: usize,
    opts: &TilingOptions,
    change_points: &[usize],
    availability: Option<&AvailabilitySummary>,
    seed: u64,
) -> Result<Tiling> {
    let batches = make_batches(n_times, opts.batch_size, change_points)?;
    let universes = batch_universes(&batches, n_assets, change_points, availability)?;
    let mut tiles = Vec::new();
    for (i, (batch, universe)) in batches.iter().zip(&universes).enumerate() {
        if universe.is_empty() {
            continue;
        }
        let d = groups_for(universe, n_factors, opts)?;
        let mut rng = batch_rng(seed, i);
        for group in random_partition(universe, d, &mut rng) {
            tiles.push(Tile {
                batch: batch.clone().collect(),
                group,
            });
        }
    }
    Ok(Tiling {
        tiles,
        n_times,
        n_assets,
    })
}

/// Sum over ordered pairs in different groups of `|sigma[j, j']|`.
pub fn partition_objective(sigma: &DMatrix<f64>, groups: &[Vec<usize>]) -> f64 {
    let p = sigma.nrows();
    let mut label = vec![usize::MAX; p];
    for (d, g) in groups.iter().enumerate() {
        for &j in g {
            label[j] = d;
        }
    }
    let mut total = 0.0;
    for a in 0..p {
        for b in 0..p {
            if a != b && label[a] != label[b] {
                total += sigma[(a, b)].abs();
            }
        }
    }
    total
}

/// Deterministic core of the greedy anti-clustering heuristic.
///
/// Starts from `seeds` (one asset per group) and visits `order` in sequence,
/// placing each asset in the group whose largest `|sigma|` against it is
/// smallest. Groups are capped at `ceil(n / D)` members so the result stays
/// balanced; ties go to the smaller group, then the lower index.
pub fn greedy_anticluster_from(sigma: &DMatrix<f64>, seeds: &[usize], order: &[usize]) -> Vec<Vec<usize>> {
    let d = seeds.len();
    let cap = (seeds.len() + order.len()).div_ceil(d.max(1));
    let mut groups: Vec<Vec<usize>> = seeds.iter().map(|&s| vec![s]).collect();
    // running max |sigma| between each asset and each group
    for &j in order {
        let mut best: Option<(f64, usize, usize)> = None;
        for (g, members) in groups.iter().enumerate() {
            if members.len() >= cap {
                continue;
            }
            let score = members.iter().map(|&m| sigma[(j, m)].abs()).fold(0.0, f64::max);
            let key = (score, members.len(), g);
            let better = match best {
                None => true,
                Some((s, n, _)) => score < s || (score == s && members.len() < n),
            };
            if better {
                best = Some(key);
            }
        }
        let (_, _, g) = best.expect("capacity leaves at least one open group");
        groups[g].push(j);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups
}

/// Greedy anti-clustering of `universe` into `n_groups` groups.
///
/// Seeds are `n_groups` distinct random assets; the rest are visited in a
/// uniformly random order.
pub fn greedy_anticluster_in(
    sigma: &DMatrix<f64>,
    universe: &[usize],
    n_groups: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<usize>>> {
    if sigma.nrows() != sigma.ncols() {
        return Err(MosaicError::invalid(MODULE, "covariance estimate must be square"));
    }
    if n_groups == 0 || n_groups > universe.len() {
        return Err(MosaicError::invalid(
            MODULE,
            format!("cannot split {} assets into {n_groups} groups", universe.len()),
        ));
    }
    if universe.iter().any(|&j| j >= sigma.nrows()) {
        return Err(MosaicError::invalid(MODULE, "asset index outside covariance estimate"));
    }
    let mut shuffled = universe.to_vec();
    shuffled.shuffle(rng);
    let (seeds, order) = shuffled.split_at(n_groups);
    Ok(greedy_anticluster_from(sigma, seeds, order))
}

/// Greedy anti-clustering of all `p` assets.
pub fn greedy_anticluster(sigma: &DMatrix<f64>, n_groups: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let universe: Vec<usize> = (0..sigma.nrows()).collect();
    let mut rng = keyed_rng(seed, Stream::TileGroups, &[u64::MAX]);
    greedy_anticluster_in(sigma, &universe, n_groups, &mut rng)
}

/// Adaptive tiling: the first batch is grouped as in [`default_tiling`];
/// every later batch is grouped by greedy anti-clustering on the within-tile
/// covariance of the residuals from all earlier batches.
///
/// Only row-order-invariant summaries of earlier tiles are used, so the
/// permutation test stays exact.
pub fn adaptive_tiling(
    panel: &ReturnsPanel,
    exposures: &ExposureSeries,
    opts: &TilingOptions,
    availability: Option<&AvailabilitySummary>,
    seed: u64,
) -> Result<Tiling> {
    let (n_times, p, k) = (panel.n_times(), panel.n_assets(), exposures.n_factors());
    let change_points = exposures.change_points();
    let batches = make_batches(n_times, opts.batch_size, change_points)?;
    let universes = batch_universes(&batches, p, change_points, availability)?;
    let mut acc = CoGroupAccumulator::new(p);
    let mut tiles = Vec::new();
    let mut started = false;
    for (i, (batch, universe)) in batches.iter().zip(&universes).enumerate() {
        if universe.is_empty() {
            continue;
        }
        let d = groups_for(universe, k, opts)?;
        let mut rng = batch_rng(seed, i);
        let groups = if started {
            greedy_anticluster_in(&acc.covariance(), universe, d, &mut rng)?
        } else {
            random_partition(universe, d, &mut rng)
        };
        started = true;
        for group in groups {
            let tile = Tile {
                batch: batch.clone().collect(),
                group,
            };
            let (block, _, _) = residualize_tile(panel, exposures, &tile, tiles.len())?;
            acc.add_block(&tile.group, &block);
            tiles.push(tile);
        }
    }
    Ok(Tiling {
        tiles,
        n_times,
        n_assets: p,
    })
}

/// Outcome of one validation check.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub failures: Vec<String>,
}

impl CheckOutcome {
    fn from_failures(failures: Vec<String>) -> Self {
        Self {
            passed: failures.is_empty(),
            failures,
        }
    }
}

/// The four checks a tiling must pass before it is used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TilingReport {
    pub disjoint: CheckOutcome,
    pub coverage: CheckOutcome,
    pub exposure_constant: CheckOutcome,
    pub no_missing: CheckOutcome,
}

impl TilingReport {
    pub fn all_passed(&self) -> bool {
        self.disjoint.passed && self.coverage.passed && self.exposure_constant.passed && self.no_missing.passed
    }

    /// All failure messages, prefixed with the check name.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, c) in [
            ("disjoint", &self.disjoint),
            ("coverage", &self.coverage),
            ("exposure_constant", &self.exposure_constant),
            ("no_missing", &self.no_missing),
        ] {
            out.extend(c.failures.iter().map(|f| format!("{name}: {f}")));
        }
        out
    }
}

const MAX_REPORTED: usize = 20;

fn push_capped(list: &mut Vec<String>, msg: String) {
    if list.len() < MAX_REPORTED {
        list.push(msg);
    }
}

/// Check a tiling against the panel dimensions, the exposures, and an
/// optional availability mask (row-major, `true` = observed).
///
/// Without a mask every cell must be covered. With a mask, the cells that
/// must be covered are those of assets fully observed over each exposure
/// segment, and no tile may contain an unobserved cell.
pub fn validate_tiling(
    tiling: &Tiling,
    n_times: usize,
    n_assets: usize,
    exposures: &ExposureSeries,
    mask: Option<&[bool]>,
) -> TilingReport {
    let mut disjoint = Vec::new();
    let mut coverage = Vec::new();
    let mut constant = Vec::new();
    let mut missing = Vec::new();

    if tiling.n_times != n_times || tiling.n_assets != n_assets {
        push_capped(
            &mut coverage,
            format!(
                "tiling is {}x{} but panel is {n_times}x{n_assets}",
                tiling.n_times, tiling.n_assets
            ),
        );
    }
    if let Some(m) = mask {
        if m.len() != n_times * n_assets {
            push_capped(&mut missing, "availability mask has wrong length".into());
        }
    }
    let observed = |t: usize, j: usize| mask.is_none_or(|m| m.get(t * n_assets + j).copied().unwrap_or(false));

    let mut owner: Vec<Option<usize>> = vec![None; n_times * n_assets];
    for (m, tile) in tiling.tiles.iter().enumerate() {
        if tile.batch.is_empty() || tile.group.is_empty() {
            push_capped(&mut disjoint, format!("tile {m} is empty"));
            continue;
        }
        if tile.batch.iter().any(|&t| t >= n_times) || tile.group.iter().any(|&j| j >= n_assets) {
            push_capped(&mut coverage, format!("tile {m} indexes outside the panel"));
            continue;
        }
        for &t in &tile.batch {
            for &j in &tile.group {
                let cell = &mut owner[t * n_assets + j];
                match *cell {
                    Some(other) => push_capped(
                        &mut disjoint,
                        format!("tiles {other} and {m} share cell ({t}, {j})"),
                    ),
                    None => *cell = Some(m),
                }
                if !observed(t, j) {
                    push_capped(&mut missing, format!("tile {m} contains missing cell ({t}, {j})"));
                }
            }
        }
        if exposures.n_times() == n_times && n_times > 0 {
            let first = exposures.at(tile.batch[0]).select_rows(&tile.group);
            if let Some(&t) = tile
                .batch
                .iter()
                .find(|&&t| exposures.at(t).select_rows(&tile.group) != first)
            {
                push_capped(
                    &mut constant,
                    format!("tile {m} spans an exposure change at timepoint {t}"),
                );
            }
        }
    }
    if exposures.n_times() != n_times {
        push_capped(&mut constant, "exposure series length does not match panel".into());
    } else if n_times > 0 {
        for seg in exposures.segments() {
            for j in 0..n_assets {
                let required = mask.is_none() || seg.clone().all(|t| observed(t, j));
                if !required {
                    continue;
                }
                if let Some(t) = seg.clone().find(|&t| owner[t * n_assets + j].is_none()) {
                    push_capped(&mut coverage, format!("cell ({t}, {j}) is not covered"));
                }
            }
        }
    }
    TilingReport {
        disjoint: CheckOutcome::from_failures(disjoint),
        coverage: CheckOutcome::from_failures(coverage),
        exposure_constant: CheckOutcome::from_failures(constant),
        no_missing: CheckOutcome::from_failures(missing),
    }
}

/// Augmented exposures for models whose exposures change every period.
///
/// Timepoints are paired `(0,1), (2,3), ...` and each pair shares the
/// stacked matrix `[L_t L_{t+1}]`. When `T` is odd the last three timepoints
/// form one segment with `[L_{T-3} L_{T-2} L_{T-1}]`, and earlier pairs are
/// padded to the same width by repeating their second block (duplicate
/// columns are dropped again before regression). Factor ids get suffixes
/// `@a`, `@b`, `@c`.
pub fn augment_exposures(exposures: &ExposureSeries) -> Result<ExposureSeries> {
    let n = exposures.n_times();
    let k = exposures.n_factors();
    let p = exposures.n_assets();
    let width = if n % 2 == 1 { 3 } else { 2 };
    let mut ids = Vec::with_capacity(width * k);
    for suffix in ["a", "b", "c"].iter().take(width) {
        ids.extend(exposures.factor_ids().iter().map(|f| format!("{f}@{suffix}")));
    }
    if n == 0 {
        return ExposureSeries::new(0, vec![], vec![], ids);
    }
    let stack = |blocks: &[usize]| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(p, width * k);
        for (b, &t) in blocks.iter().enumerate() {
            out.view_mut((0, b * k), (p, k)).copy_from(exposures.at(t));
        }
        out
    };
    let mut change_points = Vec::new();
    let mut matrices = Vec::new();
    let mut t = 0;
    while t < n {
        let remaining = n - t;
        let blocks: Vec<usize> = match (width, remaining) {
            (3, 1) => vec![t, t, t],
            (3, 3) => vec![t, t + 1, t + 2],
            (3, _) => vec![t, t + 1, t + 1],
            _ => vec![t, t + 1],
        };
        let m = stack(&blocks);
        if matrices.last() != Some(&m) {
            change_points.push(t);
            matrices.push(m);
        }
        t += if width == 3 && remaining == 3 { 3 } else { 2 };
    }
    ExposureSeries::new(n, change_points, matrices, ids)
}
