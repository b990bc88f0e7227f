//! Binary PGM (`P5`) and PPM (`P6`) with 8-bit samples.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::flow::{Image, Raster};

fn bad(msg: impl Into<String>) -> Error {
    Error::Format {
        kind: "pnm",
        msg: msg.into(),
    }
}

/// `round(255 v)` for `v` in `[0, 1]`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes one-channel images as `P5` and three-channel images as `P6`.
pub fn write_pnm<W: Write>(w: &mut W, image: &Image) -> Result<()> {
    let magic = match image.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(bad(format!("cannot encode {c} channels"))),
    };
    write!(w, "{magic}\n{} {}\n255\n", image.width(), image.height())?;
    let n = image.height() * image.width();
    let c = image.channels();
    let vals = image.values();
    let mut bytes = Vec::with_capacity(c * n);
    for i in 0..n {
        for ch in 0..c {
            bytes.push(quantize(vals[ch * n + i]));
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Header tokens are separated by whitespace; `#` starts a comment that runs
/// to the end of the line. Exactly one whitespace byte precedes the raster.
fn header_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|b| *b != b'\n') {
                    *pos += 1;
                }
            }
            Some(_) => break,
            None => return Err(bad("truncated header")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn read_pnm<R: Read>(r: &mut R) -> Result<Image> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let channels = match header_token(&bytes, &mut pos)?.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(bad(format!("unsupported magic `{other}`"))),
    };
    let mut number = |what: &str| -> Result<usize> {
        let tok = header_token(&bytes, &mut pos)?;
        tok.parse::<usize>().map_err(|_| bad(format!("bad {what} `{tok}`")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(bad(format!("maxval {maxval} must be in 1..=255")));
    }
    pos += 1;
    let n = width * height;
    let raster = bytes
        .get(pos..pos + channels * n)
        .ok_or_else(|| bad(format!("expected {} sample bytes", channels * n)))?;
    let mut data = vec![0.0; channels * n];
    for i in 0..n {
        for c in 0..channels {
            let b = raster[i * channels + c] as usize;
            if b > maxval {
                return Err(bad(format!("sample {b} exceeds maxval {maxval}")));
            }
            data[c * n + i] = b as f64 / maxval as f64;
        }
    }
    Image::new(channels, height, width, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let img = Image::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_pnm(&mut buf, &img).unwrap();
        assert_eq!(buf, b"P5\n2 1\n255\n\x00\xff");
    }

    #[test]
    fn ppm_interleaves_channels() {
        let img = Image::new(3, 1, 1, vec![1.0, 0.5, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_pnm(&mut buf, &img).unwrap();
        assert_eq!(&buf[buf.len() - 3..], &[255, 128, 0]);
    }

    #[test]
    fn reads_comments_and_small_maxval() {
        let data = b"P5\n# made by hand\n2 1\n# another\n15\n\x00\x0f";
        let img = read_pnm(&mut &data[..]).unwrap();
        assert_eq!(img.values(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_pnm(&mut &b"P3\n1 1\n255\n0"[..]).is_err());
        assert!(read_pnm(&mut &b"P5\n2 2\n255\n\x00"[..]).is_err());
        assert!(read_pnm(&mut &b"P5\n1 1\n65535\n\x00\x00"[..]).is_err());
    }
}
