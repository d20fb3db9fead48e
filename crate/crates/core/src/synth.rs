//! Synthetic piecewise-constant scenes with known ground truth, and a
//! labeling comparator.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::labels::{relabel_connected, Connectivity, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RectSpec {
    /// Inclusive `[row0, col0, row1, col1]`; clipped to the image.
    pub bbox: [usize; 4],
    pub intensity: u32,
}

/// Randomized rectangle placement, drawn from the scene seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomRects {
    pub count_min: usize,
    pub count_max: usize,
    pub size_min: usize,
    pub size_max: usize,
    /// When set, each random rectangle keeps at least this many background
    /// pixels between itself and every earlier rectangle and the image frame.
    #[serde(default)]
    pub separation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub background: u32,
    #[serde(default)]
    pub rectangles: Vec<RectSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Minimum separation between any two distinct intensities in the scene.
    #[serde(default)]
    pub min_gap: u32,
    #[serde(default)]
    pub random: Option<RandomRects>,
}

impl SceneSpec {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::InvalidParam(format!("scene spec: {e}")))
    }

    /// A `width`×`height` scene of `count_min..=count_max` random rectangles.
    pub fn random(width: usize, height: usize, seed: u64, min_gap: u32, random: RandomRects) -> Self {
        Self {
            width,
            height,
            background: 0,
            rectangles: Vec::new(),
            seed,
            min_gap,
            random: Some(random),
        }
    }
}

/// A rendered scene and its ground-truth partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: GrayImage,
    pub truth: LabelMap,
    /// Every painted rectangle after clipping, in paint order.
    pub rectangles: Vec<RectSpec>,
}

fn check_gap(values: &[u32], min_gap: u32) -> Result<()> {
    for (i, &a) in values.iter().enumerate() {
        for &b in &values[i + 1..] {
            if a != b && a.abs_diff(b) < min_gap {
                return Err(Error::InvalidParam(format!(
                    "intensities {a} and {b} are closer than min_gap {min_gap}"
                )));
            }
        }
    }
    Ok(())
}

fn clip(rect: RectSpec, width: usize, height: usize) -> Result<RectSpec> {
    let [r0, c0, r1, c1] = rect.bbox;
    if r0 > r1 || c0 > c1 || r0 >= height || c0 >= width {
        return Err(Error::InvalidParam(format!(
            "rectangle {:?} is empty inside {width}x{height}",
            rect.bbox
        )));
    }
    Ok(RectSpec {
        bbox: [r0, c0, r1.min(height - 1), c1.min(width - 1)],
        intensity: rect.intensity,
    })
}

fn too_close(a: &[usize; 4], b: &[usize; 4], sep: usize) -> bool {
    // Rectangles are too close when their boxes, grown by `sep`, intersect.
    a[0] <= b[2] + sep && b[0] <= a[2] + sep && a[1] <= b[3] + sep && b[1] <= a[3] + sep
}

fn pick_intensity(rng: &mut ChaCha8Rng, background: u32, used: &[u32], min_gap: u32) -> Result<u32> {
    let candidates: Vec<u32> = (0..=255u32)
        .filter(|&v| {
            if v == background {
                return false;
            }
            used.contains(&v)
                || (v.abs_diff(background) >= min_gap && used.iter().all(|&u| v.abs_diff(u) >= min_gap))
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidParam(format!(
            "no intensity keeps min_gap {min_gap} from background {background}"
        )));
    }
    Ok(candidates[rng.gen_range(0..candidates.len())])
}

fn place_random(
    spec: &SceneSpec,
    random: &RandomRects,
    rects: &mut Vec<RectSpec>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let (w, h) = (spec.width, spec.height);
    if random.count_min > random.count_max || random.size_min == 0 || random.size_min > random.size_max {
        return Err(Error::InvalidParam(format!("invalid random placement {random:?}")));
    }
    let frame = random.separation.unwrap_or(0);
    if random.size_min + 2 * frame > w.min(h) {
        return Err(Error::InvalidParam(format!(
            "rectangles of size {} do not fit in {w}x{h}",
            random.size_min
        )));
    }
    let count = rng.gen_range(random.count_min..=random.count_max);
    for _ in 0..count {
        let mut placed = None;
        for _attempt in 0..1000 {
            let rh = rng.gen_range(random.size_min..=random.size_max.min(h - 2 * frame));
            let rw = rng.gen_range(random.size_min..=random.size_max.min(w - 2 * frame));
            let r0 = rng.gen_range(frame..=h - frame - rh);
            let c0 = rng.gen_range(frame..=w - frame - rw);
            let bbox = [r0, c0, r0 + rh - 1, c0 + rw - 1];
            let clear = match random.separation {
                Some(sep) => rects.iter().all(|r| !too_close(&r.bbox, &bbox, sep)),
                None => true,
            };
            if clear {
                placed = Some(bbox);
                break;
            }
        }
        let bbox = placed.ok_or_else(|| {
            Error::InvalidParam(format!(
                "could not place {count} separated rectangles in {w}x{h}"
            ))
        })?;
        let used: Vec<u32> = rects.iter().map(|r| r.intensity).collect();
        let intensity = pick_intensity(rng, spec.background, &used, spec.min_gap)?;
        rects.push(RectSpec { bbox, intensity });
    }
    Ok(())
}

/// Paints the background and then every rectangle in order.
///
/// The ground truth holds one id per maximal 4-connected constant-intensity
/// component, numbered in raster order. A rectangle that ends up fully
/// painted over simply has no pixels in the truth.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(Error::InvalidParam(format!("scene size {w}x{h}")));
    }
    if spec.background > 255 {
        return Err(Error::InvalidParam(format!("background {} > 255", spec.background)));
    }
    let mut rects = spec
        .rectangles
        .iter()
        .map(|&r| clip(r, w, h))
        .collect::<Result<Vec<_>>>()?;
    if let Some(i) = rects.iter().find(|r| r.intensity > 255) {
        return Err(Error::InvalidParam(format!("intensity {} > 255", i.intensity)));
    }
    let mut all: Vec<u32> = rects.iter().map(|r| r.intensity).collect();
    all.push(spec.background);
    check_gap(&all, spec.min_gap)?;

    if let Some(random) = &spec.random {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        place_random(spec, random, &mut rects, &mut rng)?;
    }

    let mut px = vec![spec.background; w * h];
    for r in &rects {
        let [r0, c0, r1, c1] = r.bbox;
        for row in r0..=r1 {
            px[row * w + c0..=row * w + c1].fill(r.intensity);
        }
    }
    let image = GrayImage::new(w, h, px.iter().map(|&v| f64::from(v)).collect())?;
    let truth = relabel_connected(&LabelMap::new(w, h, px)?, Connectivity::Four);
    Ok(Scene {
        image,
        truth,
        rectangles: rects,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    /// A bijection between id sets maps one map onto the other.
    pub exact_up_to_renaming: bool,
    /// Fraction of pixels misassigned when each predicted id is mapped to its
    /// most-overlapping truth id (ties to the lower truth id).
    pub pixel_error: f64,
}

/// Compares a predicted labeling with ground truth.
pub fn compare_labelings(pred: &LabelMap, truth: &LabelMap) -> Result<Comparison> {
    pred.same_dims(truth.width(), truth.height())?;
    let mut overlap: HashMap<(u32, u32), u64> = HashMap::new();
    for (&p, &t) in pred.as_slice().iter().zip(truth.as_slice()) {
        *overlap.entry((p, t)).or_default() += 1;
    }

    let mut forward: HashMap<u32, u32> = HashMap::new();
    let mut backward: HashMap<u32, u32> = HashMap::new();
    let mut bijective = true;
    for &(p, t) in overlap.keys() {
        if *forward.entry(p).or_insert(t) != t || *backward.entry(t).or_insert(p) != p {
            bijective = false;
        }
    }

    let mut best: HashMap<u32, (u64, u32)> = HashMap::new();
    for (&(p, t), &n) in &overlap {
        best.entry(p)
            .and_modify(|b| {
                if n > b.0 || (n == b.0 && t < b.1) {
                    *b = (n, t);
                }
            })
            .or_insert((n, t));
    }
    let correct: u64 = best.values().map(|&(n, _)| n).sum();
    let total = pred.area() as u64;
    Ok(Comparison {
        exact_up_to_renaming: bijective,
        pixel_error: (total - correct) as f64 / total as f64,
    })
}
