//! Toy image embedder for hermetic tests and the HTTP service.
//!
//! Decodes a binary PPM (P6), averages pixels onto a `g x g` RGB grid with
//! `g = floor(sqrt(d / 3))`, flattens row-major as `(row, col, channel)`,
//! zero-pads to `d` and L2-normalizes. Channel values are scaled to `[0, 1]`
//! by the file's maxval. An all-black image maps to the zero vector.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbedError {
    #[error("dimension {0} is not a positive multiple of 3")]
    Dimension(usize),
    #[error("not a binary PPM image: {0}")]
    Format(String),
}

struct Pixmap<'a> {
    width: usize,
    height: usize,
    maxval: u32,
    data: &'a [u8],
}

impl Pixmap<'_> {
    fn sample(&self, x: usize, y: usize, channel: usize) -> f64 {
        let i = (y * self.width + x) * 3 + channel;
        let raw = if self.maxval < 256 {
            self.data[i] as u32
        } else {
            u16::from_be_bytes([self.data[2 * i], self.data[2 * i + 1]]) as u32
        };
        raw as f64 / self.maxval as f64
    }
}

fn parse_ppm(bytes: &[u8]) -> Result<Pixmap<'_>, EmbedError> {
    let fail = |m: &str| EmbedError::Format(m.to_string());
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(fail("missing P6 magic"));
    }
    let mut pos = 2;
    let mut header = [0u32; 3];
    for field in header.iter_mut() {
        // whitespace and '#' comments may precede each header token
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(fail("expected a header number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail("header number out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(fail("missing whitespace after maxval"));
    }
    pos += 1;
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(fail("zero-sized image"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(fail("maxval must be in 1..=65535"));
    }
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let needed = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(3 * bytes_per_sample))
        .ok_or_else(|| fail("image too large"))?;
    let data = &bytes[pos..];
    if data.len() < needed {
        return Err(fail(&format!("pixel data truncated: need {needed} bytes, have {}", data.len())));
    }
    Ok(Pixmap { width: width as usize, height: height as usize, maxval, data: &data[..needed] })
}

pub fn toy_embed(image: &[u8], d: usize) -> Result<Vec<f32>, EmbedError> {
    if d == 0 || !d.is_multiple_of(3) {
        return Err(EmbedError::Dimension(d));
    }
    let pix = parse_ppm(image)?;
    let g = ((d / 3) as f64).sqrt().floor() as usize;
    let mut sums = vec![0.0f64; g * g * 3];
    let mut counts = vec![0u64; g * g];
    for y in 0..pix.height {
        let gy = y * g / pix.height;
        for x in 0..pix.width {
            let cell = gy * g + x * g / pix.width;
            counts[cell] += 1;
            for ch in 0..3 {
                sums[cell * 3 + ch] += pix.sample(x, y, ch);
            }
        }
    }
    let mut out = vec![0.0f64; d];
    for (cell, &n) in counts.iter().enumerate() {
        if n > 0 {
            for ch in 0..3 {
                out[cell * 3 + ch] = sums[cell * 3 + ch] / n as f64;
            }
        }
    }
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(out.into_iter().map(|x| x as f32).collect())
}
