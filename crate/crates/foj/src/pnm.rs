//! PNM (PGM/PPM) image codec.
//!
//! The portable anymap family is the crate's bit-exact interchange format:
//! plain headers, raster data, nothing else.  Reading accepts the ASCII
//! variants `P2`/`P3` and the binary variants `P5`/`P6`, any maxval up to
//! 65535 (two-byte samples are big-endian, per the format).  Writing always
//! produces the binary variants.  Sample values map linearly to `[0, 1]`
//! floats: `v / maxval` on read, `round(maxval · v)` clamped on write.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Image, ScalarField};

fn codec_err(reason: impl Into<String>) -> Error {
    Error::Codec {
        format: "pnm",
        reason: reason.into(),
    }
}

/// Pulls whitespace-separated header tokens, treating `#` comments as
/// running to end-of-line, and reports where the header ends.
struct HeaderLexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderLexer<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn token(&mut self) -> Result<&'a str> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(codec_err("unexpected end of header")),
            }
        }
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|c| !c.is_ascii_whitespace() && *c != b'#')
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| codec_err("non-ASCII bytes in header"))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| codec_err(format!("bad {what}: {t:?}")))
    }

    /// Consumes exactly the single whitespace byte that separates the
    /// header from binary raster data.
    fn into_raster(mut self) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(c) if c.is_ascii_whitespace() => self.pos += 1,
            _ => return Err(codec_err("missing whitespace before raster")),
        }
        Ok(&self.bytes[self.pos..])
    }
}

/// Decodes a PGM or PPM byte buffer into an image with samples in `[0, 1]`.
///
/// # Errors
///
/// [`Error::Codec`] on an unknown magic number, malformed header, sample
/// out of the declared range, or truncated raster.
pub fn decode(bytes: &[u8]) -> Result<Image> {
    let mut lex = HeaderLexer::new(bytes);
    let magic = lex.token()?;
    let (binary, channels) = match magic {
        "P2" => (false, 1),
        "P3" => (false, 3),
        "P5" => (true, 1),
        "P6" => (true, 3),
        other => return Err(codec_err(format!("unsupported magic {other:?}"))),
    };
    let width = lex.number("width")?;
    let height = lex.number("height")?;
    let maxval = lex.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(codec_err("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(codec_err(format!("maxval {maxval} out of range 1..=65535")));
    }
    let count = width * height * channels;
    let mut data = Vec::with_capacity(count);
    if binary {
        let raster = lex.into_raster()?;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        if raster.len() < need {
            return Err(codec_err(format!(
                "raster holds {} bytes, needs {need}",
                raster.len()
            )));
        }
        for i in 0..count {
            let v = if wide {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as usize
            } else {
                raster[i] as usize
            };
            if v > maxval {
                return Err(codec_err(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / maxval as f64);
        }
    } else {
        for _ in 0..count {
            let v = lex.number("sample")?;
            if v > maxval {
                return Err(codec_err(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / maxval as f64);
        }
    }
    Image::from_data(width, height, channels, data)
}

/// Reads a PGM/PPM file; see [`decode`].
///
/// # Errors
///
/// [`Error::Io`] if the file cannot be read, otherwise as [`decode`].
pub fn read(path: &Path) -> Result<Image> {
    decode(&fs::read(path)?)
}

fn quantize(v: f64, maxval: usize) -> usize {
    let q = (v * maxval as f64).round();
    (q.max(0.0) as usize).min(maxval)
}

/// Encodes a 1- or 3-channel image as binary PGM/PPM with 8-bit samples.
///
/// Samples are `round(255 · v)`, clamped to `0..=255`.
///
/// # Errors
///
/// [`Error::Image`] if the image has a channel count other than 1 or 3.
pub fn encode(image: &Image) -> Result<Vec<u8>> {
    let magic = match image.channels() {
        1 => "P5",
        3 => "P6",
        k => {
            return Err(Error::Image(format!(
                "PNM encodes 1 or 3 channels, image has {k}"
            )))
        }
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|&v| quantize(v, 255) as u8));
    Ok(out)
}

/// Encodes a scalar map as binary PGM with 16-bit big-endian samples.
///
/// Samples are `round(65535 · v)`, clamped to `0..=65535`; intended for
/// maps already scaled to `[0, 1]` such as the global boundary map.
pub fn encode_gray16(map: &ScalarField) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", map.width(), map.height()).into_bytes();
    for &v in map.data() {
        out.extend((quantize(v, 65535) as u16).to_be_bytes());
    }
    out
}

/// Writes an image as binary 8-bit PGM/PPM; see [`encode`].
///
/// # Errors
///
/// As [`encode`], plus [`Error::Io`] on write failure.
pub fn write(path: &Path, image: &Image) -> Result<()> {
    fs::write(path, encode(image)?)?;
    Ok(())
}

/// Writes a scalar map as binary 16-bit PGM; see [`encode_gray16`].
///
/// # Errors
///
/// [`Error::Io`] on write failure.
pub fn write_gray16(path: &Path, map: &ScalarField) -> Result<()> {
    fs::write(path, encode_gray16(map))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_plain_gray_with_comments() {
        let text = b"P2 # magic\n# a comment line\n3 2\n# another\n255\n0 128 255\n64 32 16\n";
        let img = decode(text).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (3, 2, 1));
        assert!((img.sample(1, 0, 0) - 128.0 / 255.0).abs() < 1e-12);
        assert!((img.sample(2, 0, 0) - 1.0).abs() < 1e-12);
        assert!((img.sample(0, 1, 0) - 64.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn decodes_plain_color() {
        let text = b"P3\n2 1\n7\n7 0 0  0 7 3\n";
        let img = decode(text).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.pixel(0, 0), &[1.0, 0.0, 0.0]);
        assert!((img.sample(1, 0, 2) - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn binary_gray_roundtrip_is_exact() {
        let img = Image::from_fn(5, 4, 1, |x, y, _| ((x * 7 + y * 13) % 256) as f64 / 255.0);
        let back = decode(&encode(&img).unwrap()).unwrap();
        assert_eq!(back.data(), img.data());
    }

    #[test]
    fn binary_color_roundtrip_is_exact() {
        let img = Image::from_fn(3, 3, 3, |x, y, c| ((x + 2 * y + 5 * c) % 256) as f64 / 255.0);
        let back = decode(&encode(&img).unwrap()).unwrap();
        assert_eq!(back.data(), img.data());
    }

    #[test]
    fn sixteen_bit_samples_are_big_endian() {
        let mut map = ScalarField::new(2, 1);
        map.set(0, 0, 1.0);
        map.set(1, 0, 0x0102 as f64 / 65535.0);
        let bytes = encode_gray16(&map);
        let header = b"P5\n2 1\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0xFF, 0xFF, 0x01, 0x02]);
        let back = decode(&bytes).unwrap();
        assert!((back.sample(0, 0, 0) - 1.0).abs() < 1e-12);
        assert!((back.sample(1, 0, 0) - 0x0102 as f64 / 65535.0).abs() < 1e-12);
    }

    #[test]
    fn sixteen_bit_roundtrip_preserves_all_values() {
        let mut map = ScalarField::new(64, 1);
        for x in 0..64 {
            map.set(x, 0, (x * 1031 % 65536) as f64 / 65535.0);
        }
        let back = decode(&encode_gray16(&map)).unwrap();
        for x in 0..64 {
            assert!(
                (back.sample(x, 0, 0) - map.get(x, 0)).abs() < 1e-12,
                "x={x}"
            );
        }
    }

    #[test]
    fn write_clamps_out_of_range_samples() {
        let img = Image::from_data(2, 1, 1, vec![-0.3, 1.7]).unwrap();
        let back = decode(&encode(&img).unwrap()).unwrap();
        assert_eq!(back.sample(0, 0, 0), 0.0);
        assert_eq!(back.sample(1, 0, 0), 1.0);
    }

    #[test]
    fn rejects_malformed_inputs() {
        let cases: &[&[u8]] = &[
            b"P7\n1 1\n255\n0",               // unknown magic
            b"P2\n0 1\n255\n",                // zero dimension
            b"P2\n1 1\n0\n0",                 // maxval 0
            b"P2\n1 1\n70000\n0",             // maxval too large
            b"P2\n2 1\n255\n10",              // truncated samples
            b"P2\n1 1\n10\n11",               // sample over maxval
            b"P5\n2 2\n255\nab",              // truncated raster
            b"P2\n1 1\n255\nxy",              // non-numeric sample
        ];
        for c in cases {
            assert!(decode(c).is_err(), "accepted {:?}", String::from_utf8_lossy(c));
        }
    }

    #[test]
    fn two_channel_images_are_not_encodable() {
        let img = Image::new(2, 2, 2);
        assert!(encode(&img).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let img = Image::from_fn(4, 4, 1, |x, y, _| ((x ^ y) % 2) as f64);
        write(&path, &img).unwrap();
        let back = read(&path).unwrap();
        assert_eq!(back.data(), img.data());
    }
}
