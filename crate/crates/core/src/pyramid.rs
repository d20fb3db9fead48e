//! Bottom-up averaging pyramid: four children to one parent, until the top
//! level fits within a pixel budget.

use crate::image::GrayImage;

/// Default pixel budget for the top level.
pub const DEFAULT_TOP_AREA: usize = 256;

/// Halves a dimension, rounding up.
#[inline]
pub fn half_ceil(n: usize) -> usize {
    n.div_ceil(2)
}

/// One 4-to-1 averaging step.
///
/// Parent `(i, j)` is the mean of the children `(2i, 2j)`, `(2i, 2j+1)`,
/// `(2i+1, 2j)`, `(2i+1, 2j+1)` that exist, summed NW, NE, SW, SE. On odd
/// edges a parent has 2 children, at an odd corner 1. Child counts are powers
/// of two, so every parent value is an exact binary fraction.
pub fn shrink_once(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let (pw, ph) = (half_ceil(w), half_ceil(h));
    let src = img.pixels();
    let mut out = Vec::with_capacity(pw * ph);
    for i in 0..ph {
        let r0 = 2 * i;
        let r1 = (r0 + 1 < h).then_some(r0 + 1);
        for j in 0..pw {
            let c0 = 2 * j;
            let c1 = (c0 + 1 < w).then_some(c0 + 1);
            let mut sum = src[r0 * w + c0];
            let mut n = 1.0;
            if let Some(c1) = c1 {
                sum += src[r0 * w + c1];
                n += 1.0;
            }
            if let Some(r1) = r1 {
                sum += src[r1 * w + c0];
                n += 1.0;
                if let Some(c1) = c1 {
                    sum += src[r1 * w + c1];
                    n += 1.0;
                }
            }
            out.push(sum / n);
        }
    }
    GrayImage::from_raw_unchecked(pw, ph, out)
}

/// The shrinking hierarchy. Index 0 is the input image; the last level is the top.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<GrayImage>,
    top_area_max: usize,
}

impl Pyramid {
    pub fn levels(&self) -> &[GrayImage] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &GrayImage {
        &self.levels[l]
    }

    /// Index of the top (smallest) level.
    pub fn top_index(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn top(&self) -> &GrayImage {
        &self.levels[self.top_index()]
    }

    pub fn base(&self) -> &GrayImage {
        &self.levels[0]
    }

    pub fn top_area_max(&self) -> usize {
        self.top_area_max
    }
}

/// Shrinks `img` until its area is at most `top_area_max`.
///
/// `top_area_max` is clamped to at least 1; a 1×1 image always satisfies it.
pub fn build_pyramid(img: &GrayImage, top_area_max: usize) -> Pyramid {
    let top_area_max = top_area_max.max(1);
    let mut levels = vec![img.clone()];
    while levels.last().is_some_and(|l| l.area() > top_area_max) {
        let next = shrink_once(levels.last().unwrap());
        levels.push(next);
    }
    Pyramid {
        levels,
        top_area_max,
    }
}

/// Level dimensions produced by repeated ceil-halving, base first.
pub fn level_dims(width: usize, height: usize, top_area_max: usize) -> Vec<(usize, usize)> {
    let mut dims = vec![(width, height)];
    while let Some(&(w, h)) = dims.last() {
        if w * h <= top_area_max.max(1) {
            break;
        }
        dims.push((half_ceil(w), half_ceil(h)));
    }
    dims
}
