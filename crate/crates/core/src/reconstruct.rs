//! Rebuilding generalized intensity maps from stored descriptions.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::labels::LabelMap;
use crate::pyramid::Pyramid;
use crate::registry::{fmt_real, RegionRecord, SegmentationResult};

/// Fills every pixel with the mean intensity of the region that owns it.
pub fn reconstruct_level(labels: &LabelMap, records: &[RegionRecord]) -> Result<GrayImage> {
    let by_id: HashMap<u32, f64> = records.iter().map(|r| (r.id, r.mean_intensity)).collect();
    let data = labels
        .as_slice()
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| Error::Consistency(format!("no record for region id {id}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    GrayImage::new(labels.width(), labels.height(), data)
}

/// Root mean squared per-pixel difference.
pub fn rmse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch {
            expected_w: a.width(),
            expected_h: a.height(),
            got_w: b.width(),
            got_h: b.height(),
        });
    }
    let sq: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sq / a.area() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    pub region_count: usize,
    pub rmse_vs_level_image: f64,
    pub uncertain_fraction: f64,
    pub iterations_used: usize,
}

/// One report per level, top first, comparing each reconstruction with the
/// pyramid image at that level.
pub fn level_report(result: &SegmentationResult, pyr: &Pyramid) -> Result<Vec<LevelReport>> {
    result
        .levels
        .iter()
        .map(|entry| {
            let img = pyr.level(entry.level);
            let rebuilt = reconstruct_level(&entry.labels, &entry.records)?;
            Ok(LevelReport {
                level: entry.level,
                region_count: entry.records.len(),
                rmse_vs_level_image: rmse(&rebuilt, img)?,
                uncertain_fraction: entry.uncertain_count as f64 / img.area() as f64,
                iterations_used: entry.iterations_used,
            })
        })
        .collect()
}

/// Serializes reports as `stats.json`: a list, fixed key order, six-decimal reals.
pub fn export_stats(reports: &[LevelReport]) -> Vec<u8> {
    let mut s = String::from("[");
    for (i, r) in reports.iter().enumerate() {
        s.push_str(if i == 0 { "\n" } else { ",\n" });
        let _ = write!(
            s,
            "  {{\"level\": {}, \"region_count\": {}, \"rmse_vs_level_image\": {}, \"uncertain_fraction\": {}, \"iterations_used\": {}}}",
            r.level,
            r.region_count,
            fmt_real(r.rmse_vs_level_image),
            fmt_real(r.uncertain_fraction),
            r.iterations_used
        );
    }
    s.push_str("\n]\n");
    s.into_bytes()
}
