//! 1-bit portable bitmap rasters and correlated-subset labels.
//!
//! Correlated subsets can be drawn as images: each pixel maps to one
//! process in row-major order, white pixels to the correlated group and
//! black pixels to the uncorrelated remainder. Both the text (P1) and
//! packed binary (P4) bitmap variants are accepted; in both, a 1 bit is
//! a black pixel.

use crate::bits::BitVec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitImage {
    pub width: usize,
    pub height: usize,
    /// Row-major pixel bits; true = black.
    black: BitVec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageError {
    BadMagic,
    BadHeader,
    NonBinaryPixel { index: usize },
    Truncated,
    TrailingData,
}

impl std::fmt::Display for ImageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ImageError::BadMagic => write!(f, "not a portable bitmap (expected P1 or P4)"),
            ImageError::BadHeader => write!(f, "malformed bitmap header"),
            ImageError::NonBinaryPixel { index } => {
                write!(f, "non-binary pixel value at pixel {index}")
            }
            ImageError::Truncated => write!(f, "bitmap data ends early"),
            ImageError::TrailingData => write!(f, "unexpected data after the pixel raster"),
        }
    }
}

impl std::error::Error for ImageError {}

impl BitImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            black: BitVec::zeros(width * height),
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn set_black(&mut self, x: usize, y: usize, black: bool) {
        self.black.set(y * self.width + x, black);
    }

    pub fn is_white(&self, index: usize) -> bool {
        !self.black.get(index)
    }

    /// Row-major labels: white pixels become correlated processes.
    /// Returns the label vector and the correlated count.
    pub fn correlated_labels(&self) -> (Vec<bool>, usize) {
        let labels: Vec<bool> = (0..self.n_pixels()).map(|i| self.is_white(i)).collect();
        let count = labels.iter().filter(|&&b| b).count();
        (labels, count)
    }
}

/// Skip whitespace and `#` comments in a bitmap header.
fn skip_separators(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_number(bytes: &[u8], pos: usize) -> Result<(usize, usize), ImageError> {
    let start = skip_separators(bytes, pos);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(ImageError::BadHeader);
    }
    let text = std::str::from_utf8(&bytes[start..end]).map_err(|_| ImageError::BadHeader)?;
    let value: usize = text.parse().map_err(|_| ImageError::BadHeader)?;
    Ok((value, end))
}

/// Parse a P1 (text) or P4 (packed) portable bitmap.
pub fn read_pbm(bytes: &[u8]) -> Result<BitImage, ImageError> {
    if bytes.len() < 2 {
        return Err(ImageError::BadMagic);
    }
    let magic = &bytes[..2];
    let (width, pos) = read_number(bytes, 2)?;
    let (height, pos) = read_number(bytes, pos)?;
    if width == 0 || height == 0 {
        return Err(ImageError::BadHeader);
    }
    let mut img = BitImage::new(width, height);
    match magic {
        b"P1" => {
            let mut index = 0usize;
            let mut pos = pos;
            while index < width * height {
                pos = skip_separators(bytes, pos);
                match bytes.get(pos) {
                    Some(b'0') => index += 1,
                    Some(b'1') => {
                        img.black.set(index, true);
                        index += 1;
                    }
                    Some(_) => return Err(ImageError::NonBinaryPixel { index }),
                    None => return Err(ImageError::Truncated),
                }
                pos += 1;
            }
            if skip_separators(bytes, pos) != bytes.len() {
                return Err(ImageError::TrailingData);
            }
        }
        b"P4" => {
            // Single whitespace byte after the header, then packed rows,
            // each padded to a byte boundary, most-significant bit first.
            let mut pos = pos;
            if bytes.get(pos).is_none_or(|b| !b.is_ascii_whitespace()) {
                return Err(ImageError::BadHeader);
            }
            pos += 1;
            let row_bytes = width.div_ceil(8);
            if bytes.len() < pos + row_bytes * height {
                return Err(ImageError::Truncated);
            }
            if bytes.len() > pos + row_bytes * height {
                return Err(ImageError::TrailingData);
            }
            for y in 0..height {
                for x in 0..width {
                    let byte = bytes[pos + y * row_bytes + x / 8];
                    if byte >> (7 - x % 8) & 1 == 1 {
                        img.black.set(y * width + x, true);
                    }
                }
            }
        }
        _ => return Err(ImageError::BadMagic),
    }
    Ok(img)
}

/// Serialize as a text (P1) bitmap.
pub fn write_pbm_text(img: &BitImage) -> Vec<u8> {
    let mut out = format!("P1\n{} {}\n", img.width, img.height).into_bytes();
    for y in 0..img.height {
        let mut line = String::with_capacity(img.width * 2);
        for x in 0..img.width {
            if x > 0 {
                line.push(' ');
            }
            line.push(if img.black.get(y * img.width + x) { '1' } else { '0' });
        }
        line.push('\n');
        out.extend_from_slice(line.as_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_black_image_has_no_correlated_pixels() {
        let img = read_pbm(b"P1\n2 2\n1 1\n1 1\n").unwrap();
        let (labels, count) = img.correlated_labels();
        assert_eq!(count, 0);
        assert!(labels.iter().all(|&b| !b));
    }

    #[test]
    fn checkerboard_maps_row_major() {
        // white black / black white => correlated at 0 and 3.
        let img = read_pbm(b"P1\n2 2\n0 1\n1 0\n").unwrap();
        let (labels, count) = img.correlated_labels();
        assert_eq!(labels, vec![true, false, false, true]);
        assert_eq!(count, 2);
    }

    #[test]
    fn text_pixels_may_be_packed_without_spaces() {
        let img = read_pbm(b"P1\n# comment\n4 1\n0110\n").unwrap();
        let (labels, count) = img.correlated_labels();
        assert_eq!(labels, vec![true, false, false, true]);
        assert_eq!(count, 2);
    }

    #[test]
    fn non_binary_pixel_is_rejected() {
        assert_eq!(
            read_pbm(b"P1\n2 1\n0 2\n"),
            Err(ImageError::NonBinaryPixel { index: 1 })
        );
    }

    #[test]
    fn binary_variant_round_trips_through_text() {
        // 10 pixels wide to exercise row padding.
        let mut img = BitImage::new(10, 3);
        for (x, y) in [(0, 0), (9, 0), (3, 1), (9, 2)] {
            img.set_black(x, y, true);
        }
        let mut packed = b"P4\n10 3\n".to_vec();
        let row_bytes = 2;
        let mut raster = vec![0u8; row_bytes * 3];
        for y in 0..3 {
            for x in 0..10 {
                if img.black.get(y * 10 + x) {
                    raster[y * row_bytes + x / 8] |= 1 << (7 - x % 8);
                }
            }
        }
        packed.extend_from_slice(&raster);
        let parsed = read_pbm(&packed).unwrap();
        assert_eq!(parsed, img);

        let text = write_pbm_text(&img);
        assert_eq!(read_pbm(&text).unwrap(), img);
    }

    #[test]
    fn truncated_rasters_are_rejected() {
        assert_eq!(read_pbm(b"P1\n2 2\n0 1 0\n"), Err(ImageError::Truncated));
        assert_eq!(read_pbm(b"P4\n16 2\nab"), Err(ImageError::Truncated));
    }

    #[test]
    fn large_synthetic_raster_counts_exact_white_pixels() {
        // 1000 x 1000 with exactly 95,525 white pixels.
        let n_white = 95_525usize;
        let mut img = BitImage::new(1000, 1000);
        for i in n_white..1_000_000 {
            img.black.set(i, true);
        }
        let bytes = write_pbm_text(&img);
        let parsed = read_pbm(&bytes).unwrap();
        let (labels, count) = parsed.correlated_labels();
        assert_eq!(count, n_white);
        assert_eq!(labels.len(), 1_000_000);
        assert!(labels[n_white - 1] && !labels[n_white]);
    }
}
