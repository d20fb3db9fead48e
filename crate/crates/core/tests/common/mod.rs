#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use pyrseg::synth::{RandomRects, SceneSpec};
use pyrseg::{GrayImage, LabelMap};

pub const CORPUS_SEEDS: u64 = 50;

/// 256×256, 3–8 rectangles of 16–64 px per side, intensities at least 60 apart.
pub fn corpus_spec(seed: u64) -> SceneSpec {
    SceneSpec::random(
        256,
        256,
        seed,
        60,
        RandomRects {
            count_min: 3,
            count_max: 8,
            size_min: 16,
            size_max: 64,
            separation: None,
        },
    )
}

/// Fields of one region, recomputed by direct enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRegion {
    pub id: u32,
    pub pixel_count: u64,
    pub centroid: (f64, f64),
    pub mean: f64,
    pub bbox: [usize; 4],
    pub parent: Option<u32>,
    pub adjacent: Vec<u32>,
    /// `(kind, other)` pairs, sorted.
    pub relations: Vec<(String, u32)>,
}

fn pixels_of(labels: &LabelMap, id: u32) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..labels.height() {
        for c in 0..labels.width() {
            if labels.get(r, c) == id {
                out.push((r, c));
            }
        }
    }
    out
}

/// Recomputes every record of one level from its label map and image, with
/// the coarser level's labels for lineage.
pub fn oracle_level(labels: &LabelMap, img: &GrayImage, parent: Option<&LabelMap>) -> Vec<OracleRegion> {
    let (w, h) = (labels.width(), labels.height());
    let ids: BTreeSet<u32> = labels.as_slice().iter().copied().collect();

    let mut touching: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    let mut frame: BTreeSet<u32> = BTreeSet::new();
    for r in 0..h {
        for c in 0..w {
            let a = labels.get(r, c);
            if r == 0 || c == 0 || r == h - 1 || c == w - 1 {
                frame.insert(a);
            }
            let mut look = |rr: usize, cc: usize| {
                let b = labels.get(rr, cc);
                if b != a {
                    touching.entry(a).or_default().insert(b);
                }
            };
            if r > 0 {
                look(r - 1, c);
            }
            if r + 1 < h {
                look(r + 1, c);
            }
            if c > 0 {
                look(r, c - 1);
            }
            if c + 1 < w {
                look(r, c + 1);
            }
        }
    }

    let mut base: Vec<OracleRegion> = ids
        .iter()
        .map(|&id| {
            let px = pixels_of(labels, id);
            let n = px.len() as f64;
            let mean = px.iter().map(|&(r, c)| img.get(r, c)).sum::<f64>() / n;
            let cr = px.iter().map(|&(r, _)| r as f64).sum::<f64>() / n;
            let cc = px.iter().map(|&(_, c)| c as f64).sum::<f64>() / n;
            let bbox = [
                px.iter().map(|p| p.0).min().unwrap(),
                px.iter().map(|p| p.1).min().unwrap(),
                px.iter().map(|p| p.0).max().unwrap(),
                px.iter().map(|p| p.1).max().unwrap(),
            ];
            let parent = parent.map(|pl| {
                let mut votes: BTreeMap<u32, u64> = BTreeMap::new();
                for &(r, c) in &px {
                    *votes.entry(pl.get(r / 2, c / 2)).or_default() += 1;
                }
                let best = *votes.values().max().unwrap();
                *votes.iter().find(|(_, &v)| v == best).unwrap().0
            });
            OracleRegion {
                id,
                pixel_count: px.len() as u64,
                centroid: (cr, cc),
                mean,
                bbox,
                parent,
                adjacent: touching.get(&id).map(|s| s.iter().copied().collect()).unwrap_or_default(),
                relations: Vec::new(),
            }
        })
        .collect();

    let centroid: BTreeMap<u32, (f64, f64)> = base.iter().map(|r| (r.id, r.centroid)).collect();
    for rec in &mut base {
        let b = rec.id;
        let mut rel = Vec::new();
        for &a in &rec.adjacent {
            let (ra, ca) = centroid[&a];
            let (rb, cb) = rec.centroid;
            if cb + 0.5 < ca {
                rel.push(("left-of".to_string(), a));
            }
            if ca + 0.5 < cb {
                rel.push(("right-of".to_string(), a));
            }
            if rb + 0.5 < ra {
                rel.push(("above".to_string(), a));
            }
            if ra + 0.5 < rb {
                rel.push(("below".to_string(), a));
            }
        }
        if !frame.contains(&b) && rec.adjacent.len() == 1 {
            rel.push(("sub-part-of".to_string(), rec.adjacent[0]));
        }
        for (&a, others) in &touching {
            if a != b && others.len() == 1 && others.contains(&b) && !frame.contains(&a) {
                rel.push(("contains".to_string(), a));
            }
        }
        rel.sort();
        rec.relations = rel;
    }
    base
}

/// Relation list of a library record as sorted `(kind, other)` pairs.
pub fn relation_pairs(rec: &pyrseg::RegionRecord) -> Vec<(String, u32)> {
    let mut v: Vec<(String, u32)> = rec
        .relations
        .iter()
        .map(|r| (r.kind.as_str().to_string(), r.other))
        .collect();
    v.sort();
    v
}

/// Deterministic pseudo-random bytes for test images.
pub fn noise(seed: u64, n: usize) -> Vec<u8> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen()).collect()
}
