//! RGB float images and binary PPM (P6, 8-bit) I/O.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub type Rgb = [f64; 3];

/// Row-major interleaved RGB image with channel values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        Image { width, height, data }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} RGB image needs {} values, got {}",
                width,
                height,
                width * height * 3,
                data.len()
            )));
        }
        Ok(Image { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    /// Sets the pixel if `(x, y)` lies on the canvas.
    pub fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.set(x as usize, y as usize, c);
        }
    }

    /// Planar CHW layout, as consumed by the in-painting network.
    pub fn to_chw(&self) -> Vec<f64> {
        let n = self.width * self.height;
        let mut out = vec![0.0; 3 * n];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * n + i] = px[c];
            }
        }
        out
    }

    pub fn from_chw(width: usize, height: usize, chw: &[f64]) -> Result<Self> {
        let n = width * height;
        if chw.len() != 3 * n {
            return Err(Error::ShapeMismatch(format!(
                "CHW buffer of {} values for {width}x{height}",
                chw.len()
            )));
        }
        let mut data = vec![0.0; 3 * n];
        for i in 0..n {
            for c in 0..3 {
                data[3 * i + c] = chw[c * n + i];
            }
        }
        Ok(Image { width, height, data })
    }

    /// Rounds every channel to the nearest 8-bit level, as a PPM round trip would.
    pub fn quantized(&self) -> Self {
        let data = self.data.iter().map(|&v| f64::from(to_u8(v)) / 255.0).collect();
        Image { data, ..*self }
    }

    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| to_u8(v)));
        out
    }

    pub fn from_ppm_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("truncated PPM header".into());
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?);
        }
        if fields[0] != "P6" {
            return Err(format!("unsupported magic {:?}", fields[0]));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|e| format!("bad header field {s:?}: {e}"));
        let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval != 255 {
            return Err(format!("only 8-bit PPM is supported, maxval {maxval}"));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let n = width * height * 3;
        let raster = bytes
            .get(pos..pos + n)
            .ok_or_else(|| "truncated PPM raster".to_string())?;
        let data = raster.iter().map(|&b| f64::from(b) / 255.0).collect();
        Ok(Image { width, height, data })
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_ppm_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_ppm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Image::from_ppm_bytes(&bytes).map_err(|msg| Error::parse(path, msg))
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
