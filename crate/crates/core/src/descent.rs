//! Top-down path: expand the parent level's label and mean maps, then refine
//! the pixels that disagree with the current level image.
//!
//! A refinement pass works against a frozen snapshot of the pass-start labels
//! and means. Uncertain pixels (deviation above `epsilon`) move to the nearest
//! qualifying neighboring region; those with no qualifying neighbor are
//! orphans, and the orphans are grown into new regions. A pass never merges
//! two ids. After the last pass the level is finalized: ids are split into
//! connected components, adjacent regions whose means lie within `epsilon`
//! are consolidated, and means are recomputed from the level image. If that
//! consolidation merged anything, refinement resumes on the merged map within
//! the same pass budget.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::labels::{for_each_neighbor, relabel_connected, Connectivity, LabelMap};
use crate::pyramid::{half_ceil, Pyramid};

pub const DEFAULT_EPSILON: f64 = 12.0;
pub const DEFAULT_MAX_ITERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentParams {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Neighborhood probed for reassignment candidates.
    pub connectivity: Connectivity,
}

impl Default for DescentParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_iters: DEFAULT_MAX_ITERS,
            connectivity: Connectivity::Four,
        }
    }
}

impl DescentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParam("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of segmenting one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub labels: LabelMap,
    pub means: Vec<f64>,
    /// Pixels flagged uncertain in the first pass.
    pub uncertain_count: usize,
    /// Passes that relabeled at least one pixel or created a region.
    pub iterations_used: usize,
    /// Final ids made up entirely of pixels from regions seeded at this level, ascending.
    pub emerged_ids: Vec<u32>,
}

/// Replicates parent labels and means onto the next finer level.
///
/// Child `(i, j)` takes the values of parent `(i / 2, j / 2)`. The target
/// dimensions must ceil-halve to the input dimensions.
pub fn expand_maps(
    labels: &LabelMap,
    means: &[f64],
    target_w: usize,
    target_h: usize,
) -> Result<(LabelMap, Vec<f64>)> {
    labels.same_dims(half_ceil(target_w), half_ceil(target_h))?;
    if labels.id_bound() > means.len() {
        return Err(Error::Consistency(format!(
            "label map references id {} but only {} means given",
            labels.id_bound() - 1,
            means.len()
        )));
    }
    let pw = labels.width();
    let src = labels.as_slice();
    let mut out = Vec::with_capacity(target_w * target_h);
    for i in 0..target_h {
        let row = &src[(i / 2) * pw..(i / 2 + 1) * pw];
        out.extend((0..target_w).map(|j| row[j / 2]));
    }
    let grid = out.iter().map(|&id| means[id as usize]).collect();
    Ok((LabelMap::new(target_w, target_h, out)?, grid))
}

/// Flags pixels whose intensity differs from their assigned mean by more than `epsilon`.
pub fn find_uncertain(img: &GrayImage, mean_grid: &[f64], epsilon: f64) -> Vec<bool> {
    debug_assert_eq!(img.area(), mean_grid.len());
    img.pixels()
        .iter()
        .zip(mean_grid)
        .map(|(&v, &m)| (v - m).abs() > epsilon)
        .collect()
}

/// Exact per-id means and counts of `img` under `labels`. Empty ids get mean 0.
fn region_means(img: &GrayImage, labels: &[u32], n: usize) -> (Vec<f64>, Vec<u64>) {
    let mut sums = vec![0.0f64; n];
    let mut counts = vec![0u64; n];
    for (&id, &v) in labels.iter().zip(img.pixels()) {
        sums[id as usize] += v;
        counts[id as usize] += 1;
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    (means, counts)
}

/// Result of a single refinement pass, exposed for trace-level checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PassOutcome {
    pub uncertain: Vec<bool>,
    /// Pixels moved to an existing neighboring region.
    pub reassigned: usize,
    /// Ids created from orphan components in this pass.
    pub created: Vec<u32>,
}

impl PassOutcome {
    pub fn changed(&self) -> bool {
        self.reassigned > 0 || !self.created.is_empty()
    }
}

/// Runs one refinement pass in place.
///
/// `labels` holds working ids (possibly sparse) and `means` one entry per
/// working id. On return both reflect the post-pass state, with `means`
/// recomputed exactly and extended for any new ids.
pub fn refine_pass(
    img: &GrayImage,
    labels: &mut [u32],
    means: &mut Vec<f64>,
    params: &DescentParams,
) -> PassOutcome {
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let grid: Vec<f64> = labels.iter().map(|&id| means[id as usize]).collect();
    let uncertain = find_uncertain(img, &grid, params.epsilon);
    let snapshot = labels.to_vec();
    let frozen = means.clone();

    let mut orphan = vec![false; px.len()];
    let mut reassigned = 0;
    for p in 0..px.len() {
        if !uncertain[p] {
            continue;
        }
        let v = px[p];
        let mut best: Option<(f64, u32)> = None;
        for_each_neighbor(w, h, p, params.connectivity, |q| {
            let id = snapshot[q];
            let d = (v - frozen[id as usize]).abs();
            if d > params.epsilon {
                return;
            }
            best = match best {
                Some((bd, bid)) if bd < d || (bd == d && bid <= id) => Some((bd, bid)),
                _ => Some((d, id)),
            };
        });
        match best {
            Some((_, id)) => {
                if labels[p] != id {
                    labels[p] = id;
                    reassigned += 1;
                }
            }
            None => orphan[p] = true,
        }
    }

    let created = grow_orphans(img, labels, &orphan, means.len() as u32, params.epsilon);

    let n = means.len() + created.len();
    *means = region_means(img, labels, n).0;

    PassOutcome {
        uncertain,
        reassigned,
        created,
    }
}

/// Refines one level's expanded maps against the level image.
///
/// `labels` and `means` are normally the output of [`expand_maps`]; the first
/// pass compares against these inherited means. The returned map is dense and
/// 4-connected per id, with exact means.
pub fn refine_level(
    img: &GrayImage,
    labels: &LabelMap,
    means: &[f64],
    params: &DescentParams,
    level: usize,
) -> Result<LevelResult> {
    params.validate()?;
    labels.same_dims(img.width(), img.height())?;
    if labels.id_bound() > means.len() {
        return Err(Error::Consistency(format!(
            "label map references id {} but only {} means given",
            labels.id_bound() - 1,
            means.len()
        )));
    }

    let mut work = labels.as_slice().to_vec();
    let mut work_means = means.to_vec();
    // Whether each working id was seeded at this level rather than inherited.
    let mut seeded_here = vec![false; means.len()];
    let mut uncertain_count = 0;
    let mut iterations_used = 0;
    let mut passes = 0;

    // Finalization may merge regions and move their means, so refinement
    // resumes after any merge while the pass budget lasts.
    let (finalized, final_means, emerged) = loop {
        while passes < params.max_iters {
            let outcome = refine_pass(img, &mut work, &mut work_means, params);
            if passes == 0 {
                uncertain_count = outcome.uncertain.iter().filter(|&&u| u).count();
            }
            passes += 1;
            seeded_here.resize(work_means.len(), true);
            if !outcome.changed() {
                break;
            }
            iterations_used += 1;
        }

        let working = LabelMap::new(img.width(), img.height(), std::mem::take(&mut work))?;
        let split = relabel_connected(&working, Connectivity::Four);
        let (finalized, _) = merge_similar(img, &split, params.epsilon);
        let n = finalized.id_bound();
        let (final_means, _) = region_means(img, finalized.as_slice(), n);

        // A final region has emerged when none of its pixels sat in an inherited id.
        let mut has_new = vec![false; n];
        let mut has_inherited = vec![false; n];
        for (&old, &new) in working.as_slice().iter().zip(finalized.as_slice()) {
            if seeded_here[old as usize] {
                has_new[new as usize] = true;
            } else {
                has_inherited[new as usize] = true;
            }
        }
        let emerged: Vec<bool> = (0..n).map(|k| has_new[k] && !has_inherited[k]).collect();

        if n == split.id_bound() || passes >= params.max_iters {
            break (finalized, final_means, emerged);
        }
        work = finalized.into_vec();
        work_means = final_means;
        seeded_here = emerged;
    };
    let emerged_ids = (0..finalized.id_bound())
        .filter(|&k| emerged[k])
        .map(|k| k as u32)
        .collect();

    Ok(LevelResult {
        level,
        labels: finalized,
        means: final_means,
        uncertain_count,
        iterations_used,
        emerged_ids,
    })
}

/// Grows orphan pixels into new regions, numbered from `first_id` in raster
/// order of their seeds.
///
/// Growth follows the same rule as the top-level segmenter, restricted to the
/// orphan mask: FIFO breadth-first over 4-neighbors (N, W, E, S), admitting a
/// pixel iff it lies within `epsilon` of the region's running mean. A
/// homogeneous 4-connected orphan group therefore becomes exactly one region.
fn grow_orphans(
    img: &GrayImage,
    labels: &mut [u32],
    orphan: &[bool],
    first_id: u32,
    epsilon: f64,
) -> Vec<u32> {
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let mut created = Vec::new();
    let mut taken = vec![false; px.len()];
    let mut queue = VecDeque::new();
    for seed in 0..px.len() {
        if !orphan[seed] || taken[seed] {
            continue;
        }
        let id = first_id + created.len() as u32;
        created.push(id);
        taken[seed] = true;
        labels[seed] = id;
        let mut sum = px[seed];
        let mut count = 1.0;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for_each_neighbor(w, h, p, Connectivity::Four, |q| {
                if orphan[q] && !taken[q] && (px[q] - sum / count).abs() <= epsilon {
                    taken[q] = true;
                    labels[q] = id;
                    sum += px[q];
                    count += 1.0;
                    queue.push_back(q);
                }
            });
        }
    }
    created
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Diff(f64);

impl Eq for Diff {}

impl PartialOrd for Diff {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Diff {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn find_root(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let up = parent[parent[x as usize] as usize];
        parent[x as usize] = up;
        x = up;
    }
    x
}

/// Consolidates adjacent regions whose exact means differ by at most `epsilon`.
///
/// Pairs are merged closest first (ties by the lower id pair); each merge
/// updates the surviving region's mean before further pairs are considered.
/// Returns the dense, raster-ordered relabeling and, for every input id, the
/// output id it ended up in.
pub fn merge_similar(img: &GrayImage, labels: &LabelMap, epsilon: f64) -> (LabelMap, Vec<u32>) {
    let n = labels.id_bound();
    let (w, h) = (labels.width(), labels.height());
    let ids = labels.as_slice();
    let mut sum = vec![0.0f64; n];
    let mut count = vec![0.0f64; n];
    for (&id, &v) in ids.iter().zip(img.pixels()) {
        sum[id as usize] += v;
        count[id as usize] += 1.0;
    }
    let mean = |sum: &[f64], count: &[f64], k: u32| sum[k as usize] / count[k as usize];

    let mut edges = BTreeSet::new();
    for r in 0..h {
        for c in 0..w {
            let a = ids[r * w + c];
            if c + 1 < w && ids[r * w + c + 1] != a {
                let b = ids[r * w + c + 1];
                edges.insert((a.min(b), a.max(b)));
            }
            if r + 1 < h && ids[(r + 1) * w + c] != a {
                let b = ids[(r + 1) * w + c];
                edges.insert((a.min(b), a.max(b)));
            }
        }
    }

    let mut heap = BinaryHeap::new();
    for &(a, b) in &edges {
        let d = (mean(&sum, &count, a) - mean(&sum, &count, b)).abs();
        if d <= epsilon {
            heap.push(Reverse((Diff(d), a, b)));
        }
    }

    let mut parent: Vec<u32> = (0..n as u32).collect();
    while let Some(Reverse((Diff(d), a, b))) = heap.pop() {
        let ra = find_root(&mut parent, a);
        let rb = find_root(&mut parent, b);
        if ra == rb {
            continue;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        let current = (mean(&sum, &count, lo) - mean(&sum, &count, hi)).abs();
        if (lo, hi) != (a, b) || current != d {
            // Stale entry: one side has merged since it was queued.
            if current <= epsilon {
                heap.push(Reverse((Diff(current), lo, hi)));
            }
            continue;
        }
        parent[hi as usize] = lo;
        sum[lo as usize] += sum[hi as usize];
        count[lo as usize] += count[hi as usize];
    }

    let merged: Vec<u32> = ids.iter().map(|&id| find_root(&mut parent, id)).collect();
    let merged = LabelMap::new(w, h, merged).expect("same dimensions");
    let dense = relabel_connected(&merged, Connectivity::Four);
    let mut mapping = vec![0u32; n];
    for (&old, &new) in ids.iter().zip(dense.as_slice()) {
        mapping[old as usize] = new;
    }
    (dense, mapping)
}

/// Wraps a top-level segmentation as the first [`LevelResult`] of a descent.
pub fn top_result(level: usize, labels: LabelMap, means: Vec<f64>) -> LevelResult {
    LevelResult {
        level,
        labels,
        means,
        uncertain_count: 0,
        iterations_used: 0,
        emerged_ids: Vec::new(),
    }
}

/// Descends from the top segmentation to the base, refining every level.
///
/// Results are ordered top first. `top` must match the pyramid's top level.
pub fn descend(pyr: &Pyramid, top: LevelResult, params: &DescentParams) -> Result<Vec<LevelResult>> {
    params.validate()?;
    let top_img = pyr.top();
    top.labels.same_dims(top_img.width(), top_img.height())?;

    let mut results = Vec::with_capacity(pyr.levels().len());
    results.push(top);
    for level in (0..pyr.top_index()).rev() {
        let img = pyr.level(level);
        let parent = results.last().expect("top is present");
        let (labels, _) = expand_maps(&parent.labels, &parent.means, img.width(), img.height())?;
        let refined = refine_level(img, &labels, &parent.means, params, level)?;
        results.push(refined);
    }
    Ok(results)
}
