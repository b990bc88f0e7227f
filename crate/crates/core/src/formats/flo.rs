//! Middlebury `.flo`: `202021.25f32`, `i32` width, `i32` height, then
//! interleaved `(u, v)` `f32` pairs in row-major order, all little-endian.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::flow::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;

fn bad(msg: impl Into<String>) -> Error {
    Error::Format {
        kind: "flo",
        msg: msg.into(),
    }
}

pub fn write_flo<W: Write>(w: &mut W, flow: &FlowField) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + 4 * flow.as_slice().len());
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    buf.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for v in flow.as_slice() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_flo<R: Read>(r: &mut R) -> Result<FlowField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let word = |i: usize| -> Result<[u8; 4]> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| [b[0], b[1], b[2], b[3]])
            .ok_or_else(|| bad("truncated file"))
    };
    let magic = f32::from_le_bytes(word(0)?);
    if magic != FLO_MAGIC {
        return Err(bad(format!("bad magic {magic}")));
    }
    let width = i32::from_le_bytes(word(1)?);
    let height = i32::from_le_bytes(word(2)?);
    if width < 0 || height < 0 {
        return Err(bad(format!("negative size {width}x{height}")));
    }
    let (width, height) = (width as usize, height as usize);
    let n = 2 * width * height;
    if bytes.len() != 12 + 4 * n {
        return Err(bad(format!("expected {} bytes, found {}", 12 + 4 * n, bytes.len())));
    }
    let data = (0..n)
        .map(|i| word(3 + i).map(|b| f32::from_le_bytes(b) as f64))
        .collect::<Result<Vec<_>>>()?;
    FlowField::new(height, width, data)
}
