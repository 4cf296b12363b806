use std::io::{self, Read, Write};

/// Square grayscale image, row-major, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadedImage {
    resolution: usize,
    pixels: Vec<f64>,
}

impl ShadedImage {
    /// All-background (0) image.
    pub fn blank(resolution: usize) -> Self {
        Self {
            resolution,
            pixels: vec![0.0; resolution * resolution],
        }
    }

    /// Values are clamped into `[0, 1]`.
    pub fn from_pixels(resolution: usize, mut pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), resolution * resolution, "pixel count");
        for p in &mut pixels {
            *p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        }
        Self { resolution, pixels }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.resolution + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.resolution + col] = value.clamp(0.0, 1.0);
    }

    /// Count of non-background pixels.
    pub fn coverage(&self) -> usize {
        self.pixels.iter().filter(|&&p| p > 0.0).count()
    }

    /// Box-filter resampling to another resolution (area-weighted average).
    pub fn resampled(&self, resolution: usize) -> Self {
        if resolution == self.resolution {
            return self.clone();
        }
        let src = self.resolution as f64;
        let scale = src / resolution as f64;
        let mut out = vec![0.0; resolution * resolution];
        for r in 0..resolution {
            let (y0, y1) = (r as f64 * scale, (r + 1) as f64 * scale);
            for c in 0..resolution {
                let (x0, x1) = (c as f64 * scale, (c + 1) as f64 * scale);
                let mut acc = 0.0;
                let mut area = 0.0;
                let mut sy = y0.floor() as usize;
                while (sy as f64) < y1 && sy < self.resolution {
                    let wy = (y1.min(sy as f64 + 1.0) - y0.max(sy as f64)).max(0.0);
                    let mut sx = x0.floor() as usize;
                    while (sx as f64) < x1 && sx < self.resolution {
                        let wx = (x1.min(sx as f64 + 1.0) - x0.max(sx as f64)).max(0.0);
                        acc += wx * wy * self.get(sy, sx);
                        area += wx * wy;
                        sx += 1;
                    }
                    sy += 1;
                }
                out[r * resolution + c] = if area > 0.0 { acc / area } else { 0.0 };
            }
        }
        Self::from_pixels(resolution, out)
    }

    /// Binary PGM (P5, maxval 255).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.resolution, self.resolution)?;
        let bytes: Vec<u8> = self.pixels.iter().map(|&p| (p * 255.0).round() as u8).collect();
        w.write_all(&bytes)
    }

    pub fn read_pgm<R: Read>(mut r: R) -> io::Result<Self> {
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        // header: magic, width, height, maxval separated by whitespace, then one whitespace byte
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < data.len() && !data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated PGM header"));
            }
            fields.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
        }
        pos += 1;
        if fields[0] != "P5" {
            return Err(bad("not a binary PGM"));
        }
        let w: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
        let h: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
        let max: f64 = fields[3].parse().map_err(|_| bad("bad maxval"))?;
        if w != h {
            return Err(bad("image is not square"));
        }
        if max > 255.0 || max <= 0.0 {
            return Err(bad("only 8-bit PGM is supported"));
        }
        let body = data.get(pos..pos + w * h).ok_or_else(|| bad("truncated PGM data"))?;
        Ok(Self::from_pixels(w, body.iter().map(|&b| b as f64 / max).collect()))
    }
}

/// Lossless rotation by `quarter_turns * 90°` clockwise: pixel `(r, c)` moves
/// to `(c, H-1-r)` per quarter turn.
pub fn in_plane_rotate(img: &ShadedImage, quarter_turns: u8) -> ShadedImage {
    let n = img.resolution;
    let mut cur = img.clone();
    for _ in 0..quarter_turns % 4 {
        let mut next = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                next[c * n + (n - 1 - r)] = cur.pixels[r * n + c];
            }
        }
        cur.pixels = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pixel_rotation() {
        let mut img = ShadedImage::blank(5);
        img.set(1, 3, 1.0);
        let r = in_plane_rotate(&img, 1);
        assert_eq!(r.get(3, 5 - 1 - 1), 1.0);
        assert_eq!(r.coverage(), 1);
        assert_eq!(in_plane_rotate(&img, 0), img);
    }

    proptest! {
        #[test]
        fn four_turns_identity(pixels in proptest::collection::vec(0.0f64..1.0, 36)) {
            let img = ShadedImage::from_pixels(6, pixels);
            let mut r = img.clone();
            for _ in 0..4 {
                r = in_plane_rotate(&r, 1);
            }
            prop_assert_eq!(&r, &img);
            prop_assert_eq!(in_plane_rotate(&in_plane_rotate(&img, 1), 3), img);
        }
    }

    #[test]
    fn pgm_roundtrip() {
        let img = ShadedImage::from_pixels(2, vec![0.0, 1.0, 0.5, 0.25]);
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&buf[11..], &[0, 255, 128, 64]);
        let back = ShadedImage::read_pgm(&buf[..]).unwrap();
        assert!((back.get(1, 0) - 128.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn resample_averages_blocks() {
        let img = ShadedImage::from_pixels(4, (0..16).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect());
        let small = img.resampled(2);
        assert!(small.pixels().iter().all(|&p| (p - 0.5).abs() < 1e-12));
        let odd = ShadedImage::from_pixels(3, vec![0.3; 9]).resampled(2);
        assert!(odd.pixels().iter().all(|&p| (p - 0.3).abs() < 1e-12));
    }
}
