//! The object list: per-level region descriptions, parent links across
//! levels, and topological relations within a level.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Deserialize;

use crate::descent::LevelResult;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::labels::LabelMap;
use crate::pipeline::SegmentParams;
use crate::pyramid::{half_ceil, Pyramid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationKind {
    /// The other region lies entirely inside this one.
    Contains,
    /// This region lies entirely inside the other one.
    SubPartOf,
    LeftOf,
    RightOf,
    Above,
    Below,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Contains => "contains",
            Self::SubPartOf => "sub-part-of",
            Self::LeftOf => "left-of",
            Self::RightOf => "right-of",
            Self::Above => "above",
            Self::Below => "below",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "contains" => Self::Contains,
            "sub-part-of" => Self::SubPartOf,
            "left-of" => Self::LeftOf,
            "right-of" => Self::RightOf,
            "above" => Self::Above,
            "below" => Self::Below,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relation {
    pub kind: RelationKind,
    pub other: u32,
}

/// One entry of the object list.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRecord {
    pub id: u32,
    pub level: usize,
    pub pixel_count: u64,
    /// `(row, col)` in level pixel coordinates.
    pub centroid: (f64, f64),
    pub mean_intensity: f64,
    /// Inclusive `(row0, col0, row1, col1)`.
    pub bbox: [usize; 4],
    pub parent_id: Option<u32>,
    pub emerged: bool,
    pub adjacent: Vec<u32>,
    pub relations: Vec<Relation>,
}

/// Computes size, centroid, mean and bounding box for every id in `labels`.
///
/// Coordinate sums are integers; intensity sums are exact for pyramid data
/// (binary fractions). Records come back sorted by id with no parent, no
/// relations and `emerged == false`.
pub fn register_level(labels: &LabelMap, img: &GrayImage, level: usize) -> Result<Vec<RegionRecord>> {
    labels.same_dims(img.width(), img.height())?;
    let n = labels.id_bound();
    let w = labels.width();
    let mut count = vec![0u64; n];
    let mut row_sum = vec![0u64; n];
    let mut col_sum = vec![0u64; n];
    let mut val_sum = vec![0.0f64; n];
    let mut bbox = vec![[usize::MAX, usize::MAX, 0, 0]; n];

    for (p, (&id, &v)) in labels.as_slice().iter().zip(img.pixels()).enumerate() {
        let (r, c) = (p / w, p % w);
        let k = id as usize;
        count[k] += 1;
        row_sum[k] += r as u64;
        col_sum[k] += c as u64;
        val_sum[k] += v;
        let b = &mut bbox[k];
        b[0] = b[0].min(r);
        b[1] = b[1].min(c);
        b[2] = b[2].max(r);
        b[3] = b[3].max(c);
    }

    if let Some(missing) = count.iter().position(|&c| c == 0) {
        return Err(Error::Consistency(format!(
            "label map at level {level} has no pixels for id {missing}"
        )));
    }

    Ok((0..n)
        .map(|k| {
            let c = count[k] as f64;
            RegionRecord {
                id: k as u32,
                level,
                pixel_count: count[k],
                centroid: (row_sum[k] as f64 / c, col_sum[k] as f64 / c),
                mean_intensity: val_sum[k] / c,
                bbox: bbox[k],
                parent_id: None,
                emerged: false,
                adjacent: Vec::new(),
                relations: Vec::new(),
            }
        })
        .collect())
}

/// Sets each record's parent to the coarser-level id that owns most of its
/// pixels under the child-to-parent map `(i / 2, j / 2)`. Ties go to the
/// lower parent id.
pub fn link_parents(
    records: &mut [RegionRecord],
    labels: &LabelMap,
    parent_labels: &LabelMap,
) -> Result<()> {
    parent_labels.same_dims(half_ceil(labels.width()), half_ceil(labels.height()))?;
    let w = labels.width();
    let pw = parent_labels.width();
    let mut overlap: HashMap<(u32, u32), u64> = HashMap::new();
    for (p, &id) in labels.as_slice().iter().enumerate() {
        let (r, c) = (p / w, p % w);
        let parent = parent_labels.as_slice()[(r / 2) * pw + c / 2];
        *overlap.entry((id, parent)).or_default() += 1;
    }
    let mut best: HashMap<u32, (u64, u32)> = HashMap::new();
    for (&(id, parent), &n) in &overlap {
        best.entry(id)
            .and_modify(|b| {
                if n > b.0 || (n == b.0 && parent < b.1) {
                    *b = (n, parent);
                }
            })
            .or_insert((n, parent));
    }
    for rec in records.iter_mut() {
        rec.parent_id = best.get(&rec.id).map(|&(_, parent)| parent);
    }
    Ok(())
}

/// Fills adjacency lists and relations.
///
/// Two regions are adjacent when some pair of their pixels are 4-neighbors.
/// `A contains B` when B does not touch the image frame and every pixel
/// bordering B belongs to A. `A left-of B` holds for adjacent regions when
/// `col(A) + 0.5 < col(B)` by centroid; `above` is the row analogue.
pub fn compute_relations(records: &mut [RegionRecord], labels: &LabelMap) -> Result<()> {
    let n = labels.id_bound();
    if records.len() != n || records.iter().enumerate().any(|(i, r)| r.id as usize != i) {
        return Err(Error::Consistency(
            "records must cover ids 0..n in order".into(),
        ));
    }
    let (w, h) = (labels.width(), labels.height());
    let ids = labels.as_slice();
    let mut neighbors: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n];
    let mut on_frame = vec![false; n];

    for r in 0..h {
        for c in 0..w {
            let a = ids[r * w + c];
            if r == 0 || c == 0 || r + 1 == h || c + 1 == w {
                on_frame[a as usize] = true;
            }
            if c + 1 < w {
                let b = ids[r * w + c + 1];
                if a != b {
                    neighbors[a as usize].insert(b);
                    neighbors[b as usize].insert(a);
                }
            }
            if r + 1 < h {
                let b = ids[(r + 1) * w + c];
                if a != b {
                    neighbors[a as usize].insert(b);
                    neighbors[b as usize].insert(a);
                }
            }
        }
    }

    let centroids: Vec<(f64, f64)> = records.iter().map(|r| r.centroid).collect();
    let mut relations: Vec<Vec<Relation>> = vec![Vec::new(); n];
    for b in 0..n {
        if !on_frame[b] && neighbors[b].len() == 1 {
            let a = *neighbors[b].iter().next().unwrap();
            relations[a as usize].push(Relation {
                kind: RelationKind::Contains,
                other: b as u32,
            });
            relations[b].push(Relation {
                kind: RelationKind::SubPartOf,
                other: a,
            });
        }
        for &a in &neighbors[b] {
            let (ra, ca) = centroids[a as usize];
            let (rb, cb) = centroids[b];
            if cb + 0.5 < ca {
                relations[b].push(Relation {
                    kind: RelationKind::LeftOf,
                    other: a,
                });
            } else if ca + 0.5 < cb {
                relations[b].push(Relation {
                    kind: RelationKind::RightOf,
                    other: a,
                });
            }
            if rb + 0.5 < ra {
                relations[b].push(Relation {
                    kind: RelationKind::Above,
                    other: a,
                });
            } else if ra + 0.5 < rb {
                relations[b].push(Relation {
                    kind: RelationKind::Below,
                    other: a,
                });
            }
        }
    }

    for (rec, (adj, mut rel)) in records.iter_mut().zip(neighbors.into_iter().zip(relations)) {
        rel.sort();
        rec.adjacent = adj.into_iter().collect();
        rec.relations = rel;
    }
    Ok(())
}

/// Registered description of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelEntry {
    pub level: usize,
    pub labels: LabelMap,
    pub records: Vec<RegionRecord>,
    pub uncertain_count: usize,
    pub iterations_used: usize,
}

impl LevelEntry {
    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }
}

/// The full hierarchy of descriptions, top level first.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub params: SegmentParams,
    pub base_width: usize,
    pub base_height: usize,
    pub levels: Vec<LevelEntry>,
}

impl SegmentationResult {
    /// Number of levels including the base.
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn entry(&self, level: usize) -> Option<&LevelEntry> {
        self.levels.iter().find(|e| e.level == level)
    }
}

/// Registers every level of a descent and links it to the level above.
pub fn build_result(
    pyr: &Pyramid,
    results: &[LevelResult],
    params: &SegmentParams,
) -> Result<SegmentationResult> {
    let mut levels: Vec<LevelEntry> = Vec::with_capacity(results.len());
    for res in results {
        let img = pyr.level(res.level);
        let mut records = register_level(&res.labels, img, res.level)?;
        for &id in &res.emerged_ids {
            records[id as usize].emerged = true;
        }
        compute_relations(&mut records, &res.labels)?;
        if let Some(parent) = levels.last() {
            link_parents(&mut records, &res.labels, &parent.labels)?;
        }
        levels.push(LevelEntry {
            level: res.level,
            labels: res.labels.clone(),
            records,
            uncertain_count: res.uncertain_count,
            iterations_used: res.iterations_used,
        });
    }
    Ok(SegmentationResult {
        params: *params,
        base_width: pyr.base().width(),
        base_height: pyr.base().height(),
        levels,
    })
}

/// Fixed six-decimal rendering used for every real in exported documents.
pub fn fmt_real(x: f64) -> String {
    let s = format!("{x:.6}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Serializes the object list as canonical JSON.
///
/// Keys appear in a fixed order, levels top to base, regions by ascending id,
/// and every real with six decimals. One region per line.
pub fn export_registry(result: &SegmentationResult) -> Vec<u8> {
    let p = &result.params;
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(
        s,
        "  \"image\": {{\"width\": {}, \"height\": {}}},",
        result.base_width, result.base_height
    );
    let _ = writeln!(
        s,
        "  \"params\": {{\"top_area\": {}, \"tolerance\": {}, \"epsilon\": {}, \"max_iters\": {}, \"connectivity\": {}}},",
        p.top_area,
        fmt_real(p.tolerance),
        fmt_real(p.descent.epsilon),
        p.descent.max_iters,
        p.descent.connectivity.count()
    );
    s.push_str("  \"levels\": [");
    for (li, entry) in result.levels.iter().enumerate() {
        s.push_str(if li == 0 { "\n" } else { ",\n" });
        let _ = write!(
            s,
            "    {{\"level\": {}, \"width\": {}, \"height\": {}, \"region_count\": {}, \"regions\": [",
            entry.level,
            entry.width(),
            entry.height(),
            entry.records.len()
        );
        for (ri, r) in entry.records.iter().enumerate() {
            s.push_str(if ri == 0 { "\n" } else { ",\n" });
            let parent = r.parent_id.map_or_else(|| "null".to_string(), |id| id.to_string());
            let adjacent: Vec<String> = r.adjacent.iter().map(u32::to_string).collect();
            let relations: Vec<String> = r
                .relations
                .iter()
                .map(|rel| format!("{{\"kind\": \"{}\", \"other\": {}}}", rel.kind.as_str(), rel.other))
                .collect();
            let _ = write!(
                s,
                "      {{\"id\": {}, \"pixel_count\": {}, \"centroid\": [{}, {}], \"mean\": {}, \"bbox\": [{}, {}, {}, {}], \"parent\": {}, \"emerged\": {}, \"adjacent\": [{}], \"relations\": [{}]}}",
                r.id,
                r.pixel_count,
                fmt_real(r.centroid.0),
                fmt_real(r.centroid.1),
                fmt_real(r.mean_intensity),
                r.bbox[0],
                r.bbox[1],
                r.bbox[2],
                r.bbox[3],
                parent,
                r.emerged,
                adjacent.join(", "),
                relations.join(", ")
            );
        }
        if !entry.records.is_empty() {
            s.push_str("\n    ");
        }
        s.push_str("]}");
    }
    s.push_str("\n  ]\n}\n");
    s.into_bytes()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ImageDoc {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ParamsDoc {
    pub top_area: usize,
    pub tolerance: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub connectivity: u32,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RelationDoc {
    pub kind: String,
    pub other: u32,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RegionDoc {
    pub id: u32,
    pub pixel_count: u64,
    pub centroid: [f64; 2],
    pub mean: f64,
    pub bbox: [usize; 4],
    pub parent: Option<u32>,
    pub emerged: bool,
    pub adjacent: Vec<u32>,
    pub relations: Vec<RelationDoc>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LevelDoc {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    pub region_count: usize,
    pub regions: Vec<RegionDoc>,
}

/// A parsed `registry.json`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RegistryDoc {
    pub image: ImageDoc,
    pub params: ParamsDoc,
    pub levels: Vec<LevelDoc>,
}

impl RegistryDoc {
    pub fn parse(bytes: &[u8]) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn level(&self, level: usize) -> Option<&LevelDoc> {
        self.levels.iter().find(|l| l.level == level)
    }
}

impl LevelDoc {
    /// Converts the stored descriptions back into records.
    pub fn records(&self) -> Result<Vec<RegionRecord>> {
        self.regions
            .iter()
            .map(|r| {
                let relations = r
                    .relations
                    .iter()
                    .map(|rel| {
                        RelationKind::parse(&rel.kind)
                            .map(|kind| Relation {
                                kind,
                                other: rel.other,
                            })
                            .ok_or_else(|| Error::Consistency(format!("unknown relation kind {:?}", rel.kind)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(RegionRecord {
                    id: r.id,
                    level: self.level,
                    pixel_count: r.pixel_count,
                    centroid: (r.centroid[0], r.centroid[1]),
                    mean_intensity: r.mean,
                    bbox: r.bbox,
                    parent_id: r.parent,
                    emerged: r.emerged,
                    adjacent: r.adjacent.clone(),
                    relations,
                })
            })
            .collect()
    }
}
