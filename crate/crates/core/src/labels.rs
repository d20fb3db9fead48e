use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Neighborhood used when probing adjacent pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            4 => Some(Self::Four),
            8 => Some(Self::Eight),
            _ => None,
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Self::Four => 4,
            Self::Eight => 8,
        }
    }

    /// Row/column offsets in probe order. The 4-neighborhood is N, W, E, S.
    pub fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        match self {
            Self::Four => &FOUR,
            Self::Eight => &EIGHT,
        }
    }
}

/// Calls `f` with the flat index of every in-bounds neighbor of `idx`.
#[inline]
pub(crate) fn for_each_neighbor(
    width: usize,
    height: usize,
    idx: usize,
    conn: Connectivity,
    mut f: impl FnMut(usize),
) {
    let row = (idx / width) as isize;
    let col = (idx % width) as isize;
    for &(dr, dc) in conn.offsets() {
        let r = row + dr;
        let c = col + dc;
        if r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width {
            f(r as usize * width + c as usize);
        }
    }
}

/// A per-pixel region assignment for one pyramid level, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    /// Wraps raw ids. Density is not checked here; see [`LabelMap::is_dense`].
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "label map {width}x{height} with {} entries",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, id: u32) -> Self {
        Self {
            width,
            height,
            labels: vec![id; width * height],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn area(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    #[inline]
    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.labels
    }

    /// One past the largest id present.
    pub fn id_bound(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m as usize + 1)
    }

    /// Number of distinct ids that own at least one pixel.
    pub fn region_count(&self) -> usize {
        self.pixel_counts().iter().filter(|&&n| n > 0).count()
    }

    /// Pixel count per id, indexed by id up to [`LabelMap::id_bound`].
    pub fn pixel_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.id_bound()];
        for &id in &self.labels {
            counts[id as usize] += 1;
        }
        counts
    }

    /// True when the id set is exactly `0..n` with every id non-empty.
    pub fn is_dense(&self) -> bool {
        self.pixel_counts().iter().all(|&n| n > 0)
    }

    /// True when every id's pixel set forms a single component under `conn`.
    pub fn is_connected(&self, conn: Connectivity) -> bool {
        relabel_connected(self, conn).region_count() == self.region_count()
    }

    pub fn same_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch {
                expected_w: width,
                expected_h: height,
                got_w: self.width,
                got_h: self.height,
            });
        }
        Ok(())
    }
}

/// Gives every maximal connected same-id component its own id.
///
/// New ids are dense and assigned in raster order of each component's first
/// pixel, so the output is canonical for a given partition.
pub fn relabel_connected(labels: &LabelMap, conn: Connectivity) -> LabelMap {
    const UNSET: u32 = u32::MAX;
    let (w, h) = (labels.width, labels.height);
    let src = &labels.labels;
    let mut out = vec![UNSET; src.len()];
    let mut queue = VecDeque::new();
    let mut next = 0u32;

    for start in 0..src.len() {
        if out[start] != UNSET {
            continue;
        }
        let id = src[start];
        out[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for_each_neighbor(w, h, p, conn, |q| {
                if out[q] == UNSET && src[q] == id {
                    out[q] = next;
                    queue.push_back(q);
                }
            });
        }
        next += 1;
    }

    LabelMap {
        width: w,
        height: h,
        labels: out,
    }
}
