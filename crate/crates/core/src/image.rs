//! Row-major raster containers shared by the renderer and the planners, plus
//! binary PGM/PPM encoders.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

/// Integer pixel coordinate. `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Pixel {
    pub x: i64,
    pub y: i64,
}

impl Pixel {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

/// A dense `width × height` grid stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: (width, height),
                found: (data.len(), 1),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
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
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn contains(&self, p: Pixel) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
    }

    #[inline]
    pub fn at(&self, p: Pixel) -> Option<&T> {
        self.contains(p).then(|| self.get(p.x as usize, p.y as usize))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Rotates the grid by 90° counter-clockwise as displayed (row 0 at the
    /// top). Pixel `(x, y)` moves to `(y, width - 1 - x)`.
    pub fn rotate90(&self) -> Grid<T>
    where
        T: Clone,
    {
        let (w, h) = (self.width, self.height);
        Grid::from_fn(h, w, |nx, ny| self.get(w - 1 - ny, nx).clone())
    }
}

impl Grid<f64> {
    /// Bilinear sample at a sub-pixel location. Coordinates are clamped to the
    /// grid, so callers are expected to bounds-check beforehand.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let xm = (self.width - 1) as f64;
        let ym = (self.height - 1) as f64;
        let x = x.clamp(0.0, xm);
        let y = y.clamp(0.0, ym);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = if fx == 0.0 {
            *self.get(x0, y0)
        } else {
            self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx
        };
        if fy == 0.0 {
            return top;
        }
        let bottom = if fx == 0.0 {
            *self.get(x0, y1)
        } else {
            self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx
        };
        top * (1.0 - fy) + bottom * fy
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Depth image in meters, measured from the overhead camera.
pub type DepthImage = Grid<f64>;
/// Linear RGB triples in `[0, 1]`.
pub type RgbImage = Grid<[f64; 3]>;
/// Object mask: `true` marks object pixels.
pub type BinaryMask = Grid<bool>;

impl Grid<bool> {
    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn set_pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.data.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| Pixel {
            x: (i % self.width) as i64,
            y: (i / self.width) as i64,
        })
    }
}

/// Writes a 16-bit binary PGM (`P5`, maxval 65535, big-endian samples).
pub fn write_pgm16<W: Write>(out: &mut W, img: &Grid<u16>) -> io::Result<()> {
    write!(out, "P5\n{} {}\n65535\n", img.width(), img.height())?;
    let mut buf = Vec::with_capacity(img.len() * 2);
    for v in img.data() {
        buf.extend_from_slice(&v.to_be_bytes());
    }
    out.write_all(&buf)
}

/// Writes an 8-bit binary PPM (`P6`).
pub fn write_ppm<W: Write>(out: &mut W, img: &Grid<[u8; 3]>) -> io::Result<()> {
    write!(out, "P6\n{} {}\n255\n", img.width(), img.height())?;
    let buf: Vec<u8> = img.data().iter().flat_map(|p| p.iter().copied()).collect();
    out.write_all(&buf)
}

fn read_header<R: Read>(input: &mut R, magic: &str) -> io::Result<(usize, usize, u32)> {
    let mut fields = Vec::new();
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    let mut in_comment = false;
    while fields.len() < 4 {
        input.read_exact(&mut byte)?;
        let c = byte[0];
        if in_comment {
            in_comment = c != b'\n';
            continue;
        }
        if c == b'#' {
            in_comment = true;
        } else if c.is_ascii_whitespace() {
            if !token.is_empty() {
                fields.push(String::from_utf8_lossy(&token).into_owned());
                token.clear();
            }
        } else {
            token.push(c);
        }
    }
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    if fields[0] != magic {
        return Err(bad("unexpected magic number"));
    }
    let w = fields[1].parse().map_err(|_| bad("bad width"))?;
    let h = fields[2].parse().map_err(|_| bad("bad height"))?;
    let maxval = fields[3].parse().map_err(|_| bad("bad maxval"))?;
    Ok((w, h, maxval))
}

pub fn read_pgm16<R: Read>(input: &mut R) -> io::Result<Grid<u16>> {
    let (w, h, maxval) = read_header(input, "P5")?;
    if maxval < 256 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "expected 16-bit PGM"));
    }
    let mut buf = vec![0u8; w * h * 2];
    input.read_exact(&mut buf)?;
    let data = buf.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok(Grid { width: w, height: h, data })
}

pub fn read_ppm<R: Read>(input: &mut R) -> io::Result<Grid<[u8; 3]>> {
    let (w, h, _) = read_header(input, "P6")?;
    let mut buf = vec![0u8; w * h * 3];
    input.read_exact(&mut buf)?;
    let data = buf.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(Grid { width: w, height: h, data })
}

/// Depth in meters to the 16-bit PGM encoding (×10 000, saturating).
pub fn depth_to_u16(depth: &DepthImage) -> Grid<u16> {
    depth.map(|&d| (d * 10_000.0).round().clamp(0.0, u16::MAX as f64) as u16)
}

pub fn rgb_to_u8(rgb: &RgbImage) -> Grid<[u8; 3]> {
    rgb.map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
}
