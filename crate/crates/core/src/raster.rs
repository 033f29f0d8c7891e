//! RGB pixel grids, binary PPM decoding and the crop/resize primitives used
//! by the proposal and descriptor stages.

use crate::error::{Error, Result};

/// Row-major 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

/// Axis-aligned box in pixel units; `(x, y)` is the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// Exclusive right edge.
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    /// Exclusive bottom edge.
    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        BoundingBox {
            x,
            y,
            w: self.right().max(other.right()) - x,
            h: self.bottom().max(other.bottom()) - y,
        }
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.w >= 1
            && self.h >= 1
            && u64::from(self.x) + u64::from(self.w) <= u64::from(width)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(height)
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::argument(format!(
                "pixel buffer has {} bytes, expected {expected}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image filled with a single color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn full_box(&self) -> BoundingBox {
        BoundingBox::new(0, 0, self.width, self.height)
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Encodes as binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.pixels.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Decode {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| Error::Decode {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

/// Decodes a binary P6 PPM with maxval 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<RasterImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::Decode {
            offset: 0,
            message: "missing P6 magic".into(),
        });
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.read_uint("width")?;
    let height = cur.read_uint("height")?;
    cur.skip_whitespace_and_comments();
    let maxval_offset = cur.pos;
    let maxval = cur.read_uint("maxval")?;
    if maxval != 255 {
        return Err(Error::Decode {
            offset: maxval_offset,
            message: format!("unsupported maxval {maxval}, only 255 is accepted"),
        });
    }
    if width == 0 || height == 0 {
        return Err(cur.err(format!("zero image dimension {width}x{height}")));
    }
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected single whitespace after maxval")),
    }
    let expected = width as usize * height as usize * 3;
    let available = bytes.len() - cur.pos;
    if available < expected {
        return Err(Error::Decode {
            offset: bytes.len(),
            message: format!(
                "truncated pixel payload: expected {expected} bytes, found {available}"
            ),
        });
    }
    let pixels = bytes[cur.pos..cur.pos + expected].to_vec();
    RasterImage::new(width, height, pixels)
}

/// Copies the pixels under `bbox` into a new image.
pub fn crop(img: &RasterImage, bbox: &BoundingBox) -> Result<RasterImage> {
    if !bbox.fits_within(img.width, img.height) {
        return Err(Error::Bounds {
            x: bbox.x,
            y: bbox.y,
            w: bbox.w,
            h: bbox.h,
            width: img.width,
            height: img.height,
        });
    }
    let row_bytes = bbox.w as usize * 3;
    let mut pixels = Vec::with_capacity(row_bytes * bbox.h as usize);
    for row in bbox.y..bbox.bottom() {
        let start = (row as usize * img.width as usize + bbox.x as usize) * 3;
        pixels.extend_from_slice(&img.pixels[start..start + row_bytes]);
    }
    RasterImage::new(bbox.w, bbox.h, pixels)
}

/// Source sample positions for one axis: (lower index, upper index, weight of upper).
fn axis_taps(src_len: u32, dst_len: u32) -> Vec<(usize, usize, f64)> {
    let scale = f64::from(src_len) / f64::from(dst_len);
    let max = f64::from(src_len - 1);
    (0..dst_len)
        .map(|d| {
            let s = ((f64::from(d) + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = s.floor();
            let hi = (lo + 1.0).min(max);
            (lo as usize, hi as usize, s - lo)
        })
        .collect()
}

/// Bilinear resize, half-pixel-centre mapping with edge clamping, rounding half up.
pub fn resize_bilinear(img: &RasterImage, out_w: u32, out_h: u32) -> Result<RasterImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::argument(format!(
            "resize target must be positive, got {out_w}x{out_h}"
        )));
    }
    if out_w == img.width && out_h == img.height {
        return Ok(img.clone());
    }
    let xs = axis_taps(img.width, out_w);
    let ys = axis_taps(img.height, out_h);
    let stride = img.width as usize * 3;
    let src = &img.pixels;
    let mut pixels = Vec::with_capacity(out_w as usize * out_h as usize * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let p = |x: usize, y: usize| f64::from(src[y * stride + x * 3 + c]);
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(out_w, out_h, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ppm(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut v = header.as_bytes().to_vec();
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn decodes_two_pixel_image() {
        let img = decode_ppm(&ppm("P6\n2 1\n255\n", &[255, 0, 0, 0, 255, 0])).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.pixel(0, 0), [255, 0, 0]);
        assert_eq!(img.pixel(1, 0), [0, 255, 0]);
    }

    #[test]
    fn decodes_black_pixel_with_comments() {
        let img = decode_ppm(&ppm("P6 # a comment\n1 # more\n1\n255\n", &[0, 0, 0])).unwrap();
        assert_eq!(img.pixel(0, 0), [0, 0, 0]);
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let err = decode_ppm(&ppm("P6\n4 1\n255\n", &[1; 9])).unwrap_err();
        match err {
            Error::Decode { offset, message } => {
                assert_eq!(offset, 20);
                assert!(message.contains("truncated"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_other_maxval_and_magic() {
        assert!(matches!(
            decode_ppm(&ppm("P6\n1 1\n65535\n", &[0; 6])),
            Err(Error::Decode { offset: 7, .. })
        ));
        assert!(matches!(
            decode_ppm(b"P3\n1 1\n255\n0 0 0"),
            Err(Error::Decode { offset: 0, .. })
        ));
        assert!(decode_ppm(b"P6\n1\n").is_err());
    }

    #[test]
    fn ppm_roundtrip() {
        let img = RasterImage::new(2, 2, (0..12).collect()).unwrap();
        assert_eq!(decode_ppm(&img.to_ppm()).unwrap(), img);
    }

    #[test]
    fn crop_full_and_corner() {
        let img = RasterImage::new(2, 2, (0..12).collect()).unwrap();
        assert_eq!(crop(&img, &img.full_box()).unwrap(), img);
        let c = crop(&img, &BoundingBox::new(1, 1, 1, 1)).unwrap();
        assert_eq!((c.width(), c.height()), (1, 1));
        assert_eq!(c.pixel(0, 0), img.pixel(1, 1));
    }

    #[test]
    fn crop_out_of_bounds() {
        let img = RasterImage::filled(4, 4, [1, 2, 3]).unwrap();
        assert!(matches!(
            crop(&img, &BoundingBox::new(1, 0, 4, 1)),
            Err(Error::Bounds { .. })
        ));
        assert!(crop(&img, &BoundingBox::new(0, 0, 0, 1)).is_err());
    }

    #[test]
    fn crop_maps_pixels() {
        let pixels: Vec<u8> = (0..5 * 4 * 3).map(|v| v as u8).collect();
        let img = RasterImage::new(5, 4, pixels).unwrap();
        let b = BoundingBox::new(2, 1, 3, 2);
        let c = crop(&img, &b).unwrap();
        for j in 0..2 {
            for i in 0..3 {
                assert_eq!(c.pixel(i, j), img.pixel(2 + i, 1 + j));
            }
        }
    }

    #[test]
    fn resize_constant_and_identity() {
        let img = RasterImage::filled(7, 3, [10, 200, 33]).unwrap();
        for (w, h) in [(1, 1), (32, 32), (5, 9)] {
            let r = resize_bilinear(&img, w, h).unwrap();
            assert!(r.pixels().chunks(3).all(|p| p == [10, 200, 33]));
        }
        let noisy = RasterImage::new(
            3,
            2,
            vec![9, 250, 3, 0, 17, 88, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
        )
        .unwrap();
        assert_eq!(resize_bilinear(&noisy, 3, 2).unwrap(), noisy);
    }

    #[test]
    fn resize_upsample_midpoint_rounds_half_up() {
        // centre output maps to source x = 0.5: halfway between 0 and 255 -> 127.5 -> 128
        let img = RasterImage::new(2, 1, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let r = resize_bilinear(&img, 3, 1).unwrap();
        assert_eq!(r.pixel(1, 0), [128, 128, 128]);
        // outer samples: x = -1/6 clamps to 0, x = 7/6 clamps to 1
        assert_eq!(r.pixel(0, 0), [0, 0, 0]);
        assert_eq!(r.pixel(2, 0), [255, 255, 255]);
    }

    #[test]
    fn resize_rejects_zero_dimension() {
        let img = RasterImage::filled(2, 2, [0, 0, 0]).unwrap();
        assert!(matches!(
            resize_bilinear(&img, 0, 4),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn image_invariants_enforced() {
        assert!(RasterImage::new(0, 1, vec![]).is_err());
        assert!(RasterImage::new(2, 1, vec![0; 5]).is_err());
    }
}
