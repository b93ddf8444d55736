//! PNG export for synthesized views and masks.

use crate::{Error, Result};
use std::path::Path;

pub fn write_rgb_png(
    path: impl AsRef<Path>,
    width: u32,
    height: u32,
    pixels: &[[u8; 3]],
) -> Result<()> {
    let expected = (width as usize) * (height as usize);
    if pixels.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "{} pixels for a {width} x {height} image",
            pixels.len()
        )));
    }
    let flat: Vec<u8> = pixels.iter().flatten().copied().collect();
    let img = image::RgbImage::from_raw(width, height, flat)
        .expect("buffer length checked above");
    img.save(path.as_ref())?;
    Ok(())
}

/// Writes a boolean mask as an 8-bit grayscale PNG (255 = set).
pub fn write_mask_png(
    path: impl AsRef<Path>,
    width: u32,
    height: u32,
    mask: &[bool],
) -> Result<()> {
    let expected = (width as usize) * (height as usize);
    if mask.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "{} mask entries for a {width} x {height} image",
            mask.len()
        )));
    }
    let flat: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    let img = image::GrayImage::from_raw(width, height, flat)
        .expect("buffer length checked above");
    img.save(path.as_ref())?;
    Ok(())
}
