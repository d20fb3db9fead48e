//! End-to-end run: squeeze, segment the top, descend, register.

use crate::descent::{descend, top_result, DescentParams};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::pyramid::{build_pyramid, Pyramid, DEFAULT_TOP_AREA};
use crate::registry::{build_result, SegmentationResult};
use crate::segment::{segment_top, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    /// Pixel budget of the pyramid top.
    pub top_area: usize,
    /// Region growing admission tolerance at the top.
    pub tolerance: f64,
    pub descent: DescentParams,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            top_area: DEFAULT_TOP_AREA,
            tolerance: DEFAULT_TOLERANCE,
            descent: DescentParams::default(),
        }
    }
}

impl SegmentParams {
    pub fn validate(&self) -> Result<()> {
        if self.top_area == 0 {
            return Err(Error::InvalidParam("top_area must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "tolerance must be finite and non-negative, got {}",
                self.tolerance
            )));
        }
        self.descent.validate()
    }
}

/// Segments `img` and returns the pyramid alongside the registered hierarchy.
pub fn segment_image(img: &GrayImage, params: &SegmentParams) -> Result<(Pyramid, SegmentationResult)> {
    params.validate()?;
    let pyr = build_pyramid(img, params.top_area);
    let (labels, means) = segment_top(pyr.top(), params.tolerance);
    let top = top_result(pyr.top_index(), labels, means);
    let levels = descend(&pyr, top, &params.descent)?;
    let result = build_result(&pyr, &levels, params)?;
    Ok((pyr, result))
}
