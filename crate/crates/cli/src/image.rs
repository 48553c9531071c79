//! Binary Netpbm images: P5 (gray) and P6 (RGB), 8 or 16 bits per sample.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported maxval {0} (must be in 1..=65535)")]
    UnsupportedMaxval(u64),
    #[error("unsupported format {0:?}; only binary P5 and P6 are read")]
    UnsupportedFormat(String),
    #[error("images need 1 or 3 channels, got {0}")]
    Channels(usize),
}

/// Pixel-interleaved samples in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl ImageBuffer {
    /// Clamps every sample into `[0, 1]`; NaN becomes 0.
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<f64>) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        assert_eq!(values.len(), width * height * channels, "sample count");
        let values = values.into_iter().map(clamp_unit).collect();
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    /// Builds an image from channel planes of `width * height` samples each.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f64>]) -> Result<Self, ImageError> {
        let channels = planes.len();
        let n = width * height;
        let mut values = Vec::with_capacity(n * channels);
        for p in 0..n {
            for plane in planes {
                values.push(plane[p]);
            }
        }
        Self::new(width, height, channels, values)
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Samples of channel `c` in row-major order.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.channels).copied().collect()
    }

    pub fn planes(&self) -> Vec<Vec<f64>> {
        (0..self.channels).map(|c| self.plane(c)).collect()
    }
}

fn clamp_unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

pub fn load_image(path: &Path) -> Result<ImageBuffer, ImageError> {
    let bytes = fs::read(path).map_err(|source| ImageError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

/// Writes 8-bit P5 for one channel, P6 for three.
pub fn save_image(image: &ImageBuffer, path: &Path) -> Result<(), ImageError> {
    fs::write(path, encode(image)).map_err(|source| ImageError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn encode(image: &ImageBuffer) -> Vec<u8> {
    let magic = if image.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.values.iter().map(|&v| (clamp_unit(v) * 255.0).round() as u8));
    out
}

pub fn decode(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    let mut header = Header { bytes, pos: 0 };
    let magic = header.token()?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        _ => return Err(ImageError::UnsupportedFormat(magic)),
    };
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader("zero image dimension".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(header.pos) {
        Some(b) if b.is_ascii_whitespace() => header.pos += 1,
        _ => return Err(ImageError::MalformedHeader("missing whitespace after maxval".into())),
    }
    let samples = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| ImageError::MalformedHeader("image too large".into()))?;
    let wide = maxval > 255;
    let expected = if wide { 2 * samples } else { samples };
    let raster = &bytes[header.pos..];
    if raster.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: raster.len(),
        });
    }
    let scale = maxval as f64;
    let values = if wide {
        raster[..expected]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / scale)
            .collect()
    } else {
        raster[..expected].iter().map(|&b| b as f64 / scale).collect()
    };
    ImageBuffer::new(width as usize, height as usize, channels, values)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    /// Next whitespace-delimited token, skipping `#` comments.
    fn token(&mut self) -> Result<String, ImageError> {
        loop {
            match self.bytes.get(self.pos) {
                None => return Err(ImageError::MalformedHeader("unexpected end of header".into())),
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self, what: &str) -> Result<u64, ImageError> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| ImageError::MalformedHeader(format!("bad {what} {t:?}")))
    }
}
