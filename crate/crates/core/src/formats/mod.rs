//! On-disk formats: binary Netpbm rasters and Middlebury `.flo` flow files.

mod flo;
mod pnm;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

pub use flo::{read_flo, write_flo, FLO_MAGIC};
pub use pnm::{quantize, read_pnm, write_pnm};

use crate::error::{Error, Result};
use crate::flow::{FlowField, Image, Mask};

pub fn save_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pnm(&mut w, image)?;
    w.flush()?;
    Ok(())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    read_pnm(&mut BufReader::new(File::open(path)?))
}

pub fn save_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    save_image(path, &mask.to_image())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img = load_image(path)?;
    if img.channels() != 1 {
        return Err(Error::Format {
            kind: "pgm",
            msg: format!("masks must be single-channel, found {} channels", img.channels()),
        });
    }
    Ok(img.channel_mask(0))
}

pub fn save_flow(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_flo(&mut w, flow)?;
    w.flush()?;
    Ok(())
}

pub fn load_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    read_flo(&mut BufReader::new(File::open(path)?))
}
