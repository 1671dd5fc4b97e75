//! Burned-in text: rendering into pixel buffers, detection of surviving
//! text, and content digests for regions that must stay untouched.

pub mod font;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dicom::PixelBuffer;
use crate::tokenize::tokenize;

pub const DEFAULT_THRESHOLD: f64 = 0.60;
/// Glyph heights tried, largest first, when placing burned-in text.
pub const FONT_SIZES: [usize; 3] = [21, 14, 7];
/// Side of the square corner regions whose content is digested.
pub const CORNER: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PixelError {
    #[error("text {text:?} at font size {font_size} does not fit a {width}x{height} box")]
    TextOverflow {
        text: String,
        font_size: usize,
        width: usize,
        height: usize,
    },
    #[error("no glyph for {0:?}")]
    UnsupportedGlyph(char),
    #[error("region {x},{y} {width}x{height} outside a {columns}x{rows} image")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        columns: usize,
        rows: usize,
    },
    #[error("zero-area region")]
    ZeroArea,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurnInRecord {
    pub text: String,
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub font_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDigest {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    #[serde(serialize_with = "hex_ser", deserialize_with = "hex_de")]
    pub digest: u64,
}

fn hex_ser<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:016x}"))
}

fn hex_de<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    let s = String::deserialize(d)?;
    u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
}

fn check_region(buf: &PixelBuffer, x: usize, y: usize, width: usize, height: usize) -> Result<(), PixelError> {
    if width == 0 || height == 0 {
        return Err(PixelError::ZeroArea);
    }
    if x + width > buf.columns || y + height > buf.rows {
        return Err(PixelError::OutOfBounds {
            x,
            y,
            width,
            height,
            columns: buf.columns,
            rows: buf.rows,
        });
    }
    Ok(())
}

fn render_for(rec: &BurnInRecord) -> Result<font::Mask, PixelError> {
    let mask = font::render(&rec.text, rec.font_size).map_err(PixelError::UnsupportedGlyph)?;
    if mask.width > rec.width || mask.height > rec.height {
        return Err(PixelError::TextOverflow {
            text: rec.text.clone(),
            font_size: rec.font_size,
            width: rec.width,
            height: rec.height,
        });
    }
    Ok(mask)
}

/// Draws `rec.text` at the buffer's maximum intensity with its top-left
/// corner at the box origin. Samples not covered by a glyph stroke keep
/// their values.
pub fn burn_text(buf: &mut PixelBuffer, rec: &BurnInRecord) -> Result<(), PixelError> {
    if rec.text.is_empty() {
        return Ok(());
    }
    check_region(buf, rec.x, rec.y, rec.width, rec.height)?;
    let mask = render_for(rec)?;
    let max = buf.max_value();
    for my in 0..mask.height {
        for mx in 0..mask.width {
            if mask.at(mx, my) {
                buf.set(rec.x + mx, rec.y + my, max);
            }
        }
    }
    Ok(())
}

/// Zeroes the whole box.
pub fn black_out(buf: &mut PixelBuffer, x: usize, y: usize, width: usize, height: usize) -> Result<(), PixelError> {
    check_region(buf, x, y, width, height)?;
    let floor = buf.min_value().max(0);
    for yy in y..y + height {
        for xx in x..x + width {
            buf.set(xx, yy, floor);
        }
    }
    Ok(())
}

/// Normalized cross-correlation between the re-rendered text mask (padded
/// to the box) and the box samples, clamped to [0,1]. A constant region
/// scores 0.
pub fn detect_text(buf: &PixelBuffer, rec: &BurnInRecord) -> Result<f64, PixelError> {
    check_region(buf, rec.x, rec.y, rec.width, rec.height)?;
    if rec.text.is_empty() {
        return Ok(0.0);
    }
    let mask = render_for(rec)?;
    let n = (rec.width * rec.height) as f64;
    let template = |x: usize, y: usize| -> f64 {
        if x < mask.width && y < mask.height && mask.at(x, y) {
            1.0
        } else {
            0.0
        }
    };
    let (mut st, mut sr) = (0.0, 0.0);
    for y in 0..rec.height {
        for x in 0..rec.width {
            st += template(x, y);
            sr += f64::from(buf.get(rec.x + x, rec.y + y));
        }
    }
    let (mt, mr) = (st / n, sr / n);
    let (mut cov, mut vt, mut vr) = (0.0, 0.0, 0.0);
    for y in 0..rec.height {
        for x in 0..rec.width {
            let dt = template(x, y) - mt;
            let dr = f64::from(buf.get(rec.x + x, rec.y + y)) - mr;
            cov += dt * dr;
            vt += dt * dt;
            vr += dr * dr;
        }
    }
    if vt == 0.0 || vr == 0.0 {
        return Ok(0.0);
    }
    Ok((cov / (vt.sqrt() * vr.sqrt())).clamp(0.0, 1.0))
}

/// Source of a "text present" score for a burn-in box.
pub trait TextDetector: Send + Sync {
    fn score(&self, buf: &PixelBuffer, rec: &BurnInRecord) -> Result<f64, PixelError>;
}

/// The built-in template-correlation detector.
#[derive(Clone, Copy, Debug, Default)]
pub struct CorrelationDetector;

impl TextDetector for CorrelationDetector {
    fn score(&self, buf: &PixelBuffer, rec: &BurnInRecord) -> Result<f64, PixelError> {
        detect_text(buf, rec)
    }
}

/// External text recognizer returning the tokens it reads in a region.
pub trait OcrEngine: Send + Sync {
    fn recognize(&self, buf: &PixelBuffer, x: usize, y: usize, width: usize, height: usize) -> Vec<String>;
}

/// Scores 1 when the engine reads any token of the expected text, else 0.
pub struct OcrDetector<E: OcrEngine>(pub E);

impl<E: OcrEngine> TextDetector for OcrDetector<E> {
    fn score(&self, buf: &PixelBuffer, rec: &BurnInRecord) -> Result<f64, PixelError> {
        check_region(buf, rec.x, rec.y, rec.width, rec.height)?;
        let expected = tokenize(&rec.text);
        let read: Vec<String> = self
            .0
            .recognize(buf, rec.x, rec.y, rec.width, rec.height)
            .iter()
            .flat_map(|t| tokenize(t))
            .collect();
        Ok(if expected.iter().any(|t| read.contains(t)) { 1.0 } else { 0.0 })
    }
}

/// FNV-1a over each sample's little-endian i32 bytes, row-major.
pub fn digest_region(
    buf: &PixelBuffer,
    x: usize,
    y: usize,
    width: usize,
    height: usize,
) -> Result<RegionDigest, PixelError> {
    check_region(buf, x, y, width, height)?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for yy in y..y + height {
        for xx in x..x + width {
            for b in buf.get(xx, yy).to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    Ok(RegionDigest {
        x,
        y,
        width,
        height,
        digest: h,
    })
}

/// Whether the region's current content still hashes to the recorded value.
pub fn region_unchanged(buf: &PixelBuffer, rec: &RegionDigest) -> bool {
    digest_region(buf, rec.x, rec.y, rec.width, rec.height).is_ok_and(|d| d.digest == rec.digest)
}

/// Digests of the four corner squares, plus the whole image when
/// `include_global` is set.
pub fn retained_regions(buf: &PixelBuffer, include_global: bool) -> Vec<RegionDigest> {
    let side = CORNER.min(buf.columns / 2).min(buf.rows / 2);
    let mut out = Vec::new();
    if side > 0 {
        for (x, y) in [
            (0, 0),
            (buf.columns - side, 0),
            (0, buf.rows - side),
            (buf.columns - side, buf.rows - side),
        ] {
            out.push(digest_region(buf, x, y, side, side).expect("corner in bounds"));
        }
    }
    if include_global && buf.rows > 0 && buf.columns > 0 {
        out.push(digest_region(buf, 0, 0, buf.columns, buf.rows).expect("image in bounds"));
    }
    out
}

/// Chooses a font size and a box position clear of the corner squares.
pub fn place_text(
    columns: usize,
    rows: usize,
    text: &str,
    rng: &mut impl Rng,
) -> Result<BurnInRecord, PixelError> {
    if let Some(c) = text.chars().find(|c| font::glyph(*c).is_none()) {
        return Err(PixelError::UnsupportedGlyph(c));
    }
    for font_size in FONT_SIZES {
        let (w, h) = font::text_extent(text, font_size);
        if w + 2 * CORNER <= columns && h + 2 * CORNER <= rows {
            let x = rng.gen_range(CORNER..=columns - CORNER - w);
            let y = rng.gen_range(CORNER..=rows - CORNER - h);
            return Ok(BurnInRecord {
                text: text.to_string(),
                x,
                y,
                width: w,
                height: h,
                font_size,
            });
        }
    }
    Err(PixelError::TextOverflow {
        text: text.to_string(),
        font_size: *FONT_SIZES.last().unwrap(),
        width: columns.saturating_sub(2 * CORNER),
        height: rows.saturating_sub(2 * CORNER),
    })
}
