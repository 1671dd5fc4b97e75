use super::{tags, DataElement, DicomError, DicomFile, Value, Vr};

/// Single-frame, single-sample pixel matrix in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelBuffer {
    pub rows: usize,
    pub columns: usize,
    pub bits_allocated: u16,
    pub bits_stored: u16,
    pub signed: bool,
    pub samples: Vec<i32>,
}

impl PixelBuffer {
    pub fn new(rows: usize, columns: usize, bits_allocated: u16) -> Self {
        Self {
            rows,
            columns,
            bits_allocated,
            bits_stored: bits_allocated,
            signed: false,
            samples: vec![0; rows * columns],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.samples[y * self.columns + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: i32) {
        self.samples[y * self.columns + x] = v;
    }

    pub fn max_value(&self) -> i32 {
        if self.signed {
            (1i32 << (self.bits_stored - 1)) - 1
        } else {
            ((1i64 << self.bits_stored) - 1) as i32
        }
    }

    pub fn min_value(&self) -> i32 {
        if self.signed {
            -(1i32 << (self.bits_stored - 1))
        } else {
            0
        }
    }
}

fn attr(file: &DicomFile, tag: super::Tag, name: &str) -> Result<u16, DicomError> {
    file.dataset
        .get(tag)
        .and_then(DataElement::as_u16)
        .ok_or_else(|| DicomError::AbsentPixelModule(format!("{name} {tag} missing")))
}

/// Decodes native (uncompressed) 8- or 16-bit single-sample pixel data.
pub fn decode_pixels(file: &DicomFile) -> Result<PixelBuffer, DicomError> {
    let data = file
        .dataset
        .get(tags::PIXEL_DATA)
        .ok_or_else(|| DicomError::AbsentPixelModule("no pixel data".into()))?;
    let rows = attr(file, tags::ROWS, "Rows")? as usize;
    let columns = attr(file, tags::COLUMNS, "Columns")? as usize;
    let bits_allocated = attr(file, tags::BITS_ALLOCATED, "Bits Allocated")?;
    let bits_stored = file
        .dataset
        .get(tags::BITS_STORED)
        .and_then(DataElement::as_u16)
        .unwrap_or(bits_allocated);
    let signed = file
        .dataset
        .get(tags::PIXEL_REPRESENTATION)
        .and_then(DataElement::as_u16)
        .unwrap_or(0)
        == 1;
    let spp = file
        .dataset
        .get(tags::SAMPLES_PER_PIXEL)
        .and_then(DataElement::as_u16)
        .unwrap_or(1);
    if spp != 1 {
        return Err(DicomError::GeometryMismatch(format!("samples per pixel {spp} unsupported")));
    }
    if !matches!(bits_allocated, 8 | 16) || bits_stored == 0 || bits_stored > bits_allocated {
        return Err(DicomError::GeometryMismatch(format!(
            "bits allocated {bits_allocated} / stored {bits_stored} unsupported"
        )));
    }
    let bytes: &[u8] = match &data.value {
        Value::Binary(b) => b,
        Value::Empty => &[],
        _ => return Err(DicomError::CompressedPixelsUnsupported),
    };
    let per = usize::from(bits_allocated / 8);
    let expected = rows * columns * per;
    // An odd 8-bit payload carries one padding byte.
    if bytes.len() != expected && !(per == 1 && bytes.len() == expected + 1 && expected % 2 == 1) {
        return Err(DicomError::GeometryMismatch(format!(
            "{rows}x{columns}x{bits_allocated}bit needs {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mask: u32 = if bits_stored >= 32 { u32::MAX } else { (1u32 << bits_stored) - 1 };
    let samples = (0..rows * columns)
        .map(|i| {
            let raw = if per == 1 {
                u32::from(bytes[i])
            } else {
                u32::from(u16::from_le_bytes([bytes[2 * i], bytes[2 * i + 1]]))
            } & mask;
            if signed && raw & (1 << (bits_stored - 1)) != 0 {
                raw as i32 - (1i32 << bits_stored)
            } else {
                raw as i32
            }
        })
        .collect();
    Ok(PixelBuffer {
        rows,
        columns,
        bits_allocated,
        bits_stored,
        signed,
        samples,
    })
}

/// Writes `buf` back into the file's Pixel Data, keeping geometry attributes
/// in step.
pub fn encode_pixels(file: &mut DicomFile, buf: &PixelBuffer) -> Result<(), DicomError> {
    if buf.samples.len() != buf.rows * buf.columns {
        return Err(DicomError::GeometryMismatch(format!(
            "{} samples for {}x{}",
            buf.samples.len(),
            buf.rows,
            buf.columns
        )));
    }
    let (lo, hi) = (buf.min_value(), buf.max_value());
    if let Some(bad) = buf.samples.iter().find(|s| **s < lo || **s > hi) {
        return Err(DicomError::GeometryMismatch(format!("sample {bad} outside {lo}..={hi}")));
    }
    let mut bytes = Vec::with_capacity(buf.samples.len() * 2);
    match buf.bits_allocated {
        8 => bytes.extend(buf.samples.iter().map(|s| *s as u8)),
        16 => {
            for s in &buf.samples {
                bytes.extend_from_slice(&(*s as u16).to_le_bytes());
            }
        }
        other => return Err(DicomError::GeometryMismatch(format!("bits allocated {other}"))),
    }
    let vr = if buf.bits_allocated == 8 { Vr::OB } else { Vr::OW };
    let ds = &mut file.dataset;
    ds.put(DataElement::u16(tags::SAMPLES_PER_PIXEL, 1));
    ds.put(DataElement::u16(tags::ROWS, buf.rows as u16));
    ds.put(DataElement::u16(tags::COLUMNS, buf.columns as u16));
    ds.put(DataElement::u16(tags::BITS_ALLOCATED, buf.bits_allocated));
    ds.put(DataElement::u16(tags::BITS_STORED, buf.bits_stored));
    ds.put(DataElement::u16(super::Tag::new(0x0028, 0x0102), buf.bits_stored - 1));
    ds.put(DataElement::u16(tags::PIXEL_REPRESENTATION, u16::from(buf.signed)));
    ds.put(DataElement::binary(tags::PIXEL_DATA, vr, bytes));
    Ok(())
}
