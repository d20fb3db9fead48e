//! Netpbm codecs: P2/P5 graymaps in, P5 graymaps and P6 label visualizations out.
//!
//! Only 8-bit data (maxval ≤ 255) is accepted. Emitted headers are canonical:
//! magic, newline, `width height`, newline, `255`, newline, raster.

use crate::error::PnmError;
use crate::image::GrayImage;
use crate::labels::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Magic {
    P2,
    P5,
    P6,
}

struct Header {
    magic: Magic,
    width: usize,
    height: usize,
    maxval: u64,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Reads a decimal unsigned integer token. Returns the value and its start offset.
    fn number(&mut self, what: &str) -> Result<(u64, usize), PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(b - b'0')))
                .ok_or_else(|| PnmError::MalformedHeader {
                    offset: start,
                    reason: format!("{what} overflows"),
                })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(PnmError::MalformedHeader {
                offset: start,
                reason: format!("expected {what}"),
            });
        }
        Ok((value, start))
    }
}

fn parse_header(bytes: &[u8]) -> Result<(Header, Cursor<'_>), PnmError> {
    let magic = match bytes.get(..2) {
        Some(b"P2") => Magic::P2,
        Some(b"P5") => Magic::P5,
        Some(b"P6") => Magic::P6,
        _ => {
            return Err(PnmError::MalformedHeader {
                offset: 0,
                reason: "expected magic P2, P5 or P6".into(),
            })
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let (width, w_at) = cur.number("width")?;
    let (height, h_at) = cur.number("height")?;
    let (maxval, m_at) = cur.number("maxval")?;
    if width == 0 {
        return Err(PnmError::MalformedHeader {
            offset: w_at,
            reason: "width must be positive".into(),
        });
    }
    if height == 0 {
        return Err(PnmError::MalformedHeader {
            offset: h_at,
            reason: "height must be positive".into(),
        });
    }
    if maxval == 0 {
        return Err(PnmError::MalformedHeader {
            offset: m_at,
            reason: "maxval must be positive".into(),
        });
    }
    if maxval > 255 {
        return Err(PnmError::UnsupportedMaxval {
            offset: m_at,
            maxval,
        });
    }
    if (width as usize).checked_mul(height as usize).and_then(|a| a.checked_mul(3)).is_none() {
        return Err(PnmError::MalformedHeader {
            offset: w_at,
            reason: "image area overflows".into(),
        });
    }
    // Exactly one whitespace byte separates the header from a binary raster.
    if magic != Magic::P2 {
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => {
                return Err(PnmError::MalformedHeader {
                    offset: cur.pos,
                    reason: "expected whitespace after maxval".into(),
                })
            }
        }
    }
    Ok((
        Header {
            magic,
            width: width as usize,
            height: height as usize,
            maxval,
        },
        cur,
    ))
}

fn read_binary(cur: &Cursor<'_>, samples: usize, maxval: u64) -> Result<Vec<u8>, PnmError> {
    let raster = &cur.bytes[cur.pos..];
    if raster.len() < samples {
        return Err(PnmError::Truncated {
            offset: cur.bytes.len(),
            expected: samples,
            found: raster.len(),
        });
    }
    let raster = &raster[..samples];
    if let Some(i) = raster.iter().position(|&b| u64::from(b) > maxval) {
        return Err(PnmError::MalformedPixel {
            offset: cur.pos + i,
            reason: format!("sample {} exceeds maxval {maxval}", raster[i]),
        });
    }
    Ok(raster.to_vec())
}

/// Decodes a P5 (binary) or P2 (ASCII) graymap. Intensities are returned as
/// stored, without rescaling to 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, PnmError> {
    let (header, mut cur) = parse_header(bytes)?;
    let area = header.width * header.height;
    let data: Vec<f64> = match header.magic {
        Magic::P5 => read_binary(&cur, area, header.maxval)?
            .into_iter()
            .map(f64::from)
            .collect(),
        Magic::P2 => {
            let mut data = Vec::with_capacity(area);
            for found in 0..area {
                cur.skip_space_and_comments();
                if cur.pos >= bytes.len() {
                    return Err(PnmError::Truncated {
                        offset: cur.pos,
                        expected: area,
                        found,
                    });
                }
                let (v, at) = cur.number("sample").map_err(|_| PnmError::MalformedPixel {
                    offset: cur.pos,
                    reason: "expected decimal sample".into(),
                })?;
                if v > header.maxval {
                    return Err(PnmError::MalformedPixel {
                        offset: at,
                        reason: format!("sample {v} exceeds maxval {}", header.maxval),
                    });
                }
                data.push(v as f64);
            }
            data
        }
        Magic::P6 => {
            return Err(PnmError::MalformedHeader {
                offset: 0,
                reason: "expected a graymap (P2 or P5), found P6".into(),
            })
        }
    };
    Ok(GrayImage::from_raw_unchecked(header.width, header.height, data))
}

/// An 8-bit RGB raster decoded from P6.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[u8; 3]>,
}

/// Decodes a P6 pixmap with maxval 255 (the format written by [`save_label_ppm`]).
pub fn load_ppm(bytes: &[u8]) -> Result<RgbImage, PnmError> {
    let (header, cur) = parse_header(bytes)?;
    if header.magic != Magic::P6 {
        return Err(PnmError::MalformedHeader {
            offset: 0,
            reason: "expected a P6 pixmap".into(),
        });
    }
    let raw = read_binary(&cur, header.width * header.height * 3, header.maxval)?;
    Ok(RgbImage {
        width: header.width,
        height: header.height,
        data: raw.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
    })
}

/// Rounds half-up to the nearest byte. Inputs are already within `[0, 255]`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Encodes as binary P5 with maxval 255.
pub fn save_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&v| quantize(v)));
    out
}

/// Writes raw 8-bit samples as P5. Used for label dumps where values are ids.
pub fn save_pgm_bytes(width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    debug_assert_eq!(samples.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

const PALETTE_MASK: u64 = 0xFF_FFFF;
const PALETTE_GAMMA: u64 = 0x4A_7C15;
const PALETTE_MUL1: u64 = 0xE4_E5B9;
const PALETTE_MUL2: u64 = 0x31_11EB;

/// Deterministic 24-bit color for region id `k`.
///
/// A splitmix-style finalizer narrowed to 24 bits: add `0x4A7C15`, then
/// `x ^= x >> 12; x *= 0xE4E5B9; x ^= x >> 10; x *= 0x3111EB; x ^= x >> 13`,
/// all modulo 2^24. Each step is a bijection on 24-bit words, so distinct ids
/// below 2^24 always receive distinct colors. The result is packed as
/// `0xRRGGBB`.
pub fn label_color(k: u32) -> [u8; 3] {
    let mut x = (u64::from(k) + PALETTE_GAMMA) & PALETTE_MASK;
    x ^= x >> 12;
    x = (x * PALETTE_MUL1) & PALETTE_MASK;
    x ^= x >> 10;
    x = (x * PALETTE_MUL2) & PALETTE_MASK;
    x ^= x >> 13;
    [(x >> 16) as u8, (x >> 8) as u8, x as u8]
}

/// Colorizes a label map as binary P6, one [`label_color`] per id.
pub fn save_label_ppm(labels: &LabelMap) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", labels.width(), labels.height()).into_bytes();
    out.reserve(labels.area() * 3);
    for &id in labels.as_slice() {
        out.extend_from_slice(&label_color(id));
    }
    out
}
