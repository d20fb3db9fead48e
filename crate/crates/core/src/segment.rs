//! Seeded region growing for the pyramid top.

use std::collections::VecDeque;

use crate::image::GrayImage;
use crate::labels::{for_each_neighbor, Connectivity, LabelMap};

/// Default admission tolerance in gray levels.
pub const DEFAULT_TOLERANCE: f64 = 12.0;

/// Segments `img` by deterministic seeded region growing.
///
/// Seeds are taken in raster order from the first unlabeled pixel. Each region
/// grows breadth-first (FIFO queue, neighbors probed N, W, E, S) and admits a
/// 4-neighbor iff its intensity is within `tolerance` of the region's running
/// mean at probe time. Ids follow seed discovery order. Returns the label map
/// and each region's mean.
///
/// Running sums are plain `f64` additions: pyramid values are binary fractions
/// whose totals stay far below 2^53 ulps, so the sums are exact.
pub fn segment_top(img: &GrayImage, tolerance: f64) -> (LabelMap, Vec<f64>) {
    const UNSET: u32 = u32::MAX;
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let mut labels = vec![UNSET; px.len()];
    let mut means = Vec::new();
    let mut queue = VecDeque::new();

    for seed in 0..px.len() {
        if labels[seed] != UNSET {
            continue;
        }
        let id = means.len() as u32;
        labels[seed] = id;
        let mut sum = px[seed];
        let mut count = 1.0;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for_each_neighbor(w, h, p, Connectivity::Four, |q| {
                if labels[q] == UNSET && (px[q] - sum / count).abs() <= tolerance {
                    labels[q] = id;
                    sum += px[q];
                    count += 1.0;
                    queue.push_back(q);
                }
            });
        }
        means.push(sum / count);
    }

    let map = LabelMap::new(w, h, labels).expect("dimensions come from a valid image");
    (map, means)
}
