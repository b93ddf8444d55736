//! Grayscale PFM depth maps.
//!
//! PFM stores rows bottom-to-top; the in-memory convention everywhere else
//! in this crate is row 0 at the top, so rows are flipped on write and read.
//! A negative scale marks little-endian payloads. Depth values are written
//! as `f32`; unfilled pixels carry positive infinity.

use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

pub fn write_pfm(path: impl AsRef<Path>, width: u32, height: u32, rows_top_down: &[f64]) -> Result<()> {
    let expected = (width as usize) * (height as usize);
    if rows_top_down.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "{} samples for a {width} x {height} depth map",
            rows_top_down.len()
        )));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    write!(w, "Pf\n{width} {height}\n-1.0\n")?;
    for row in (0..height as usize).rev() {
        for col in 0..width as usize {
            let v = rows_top_down[row * width as usize + col] as f32;
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<f64>)> {
    let path = path.as_ref();
    let data = std::fs::read(path)?;
    let err = |reason: &str| Error::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    // Header: three newline-terminated lines, then raw samples.
    let mut pos = 0usize;
    let mut line = || -> Result<String> {
        let start = pos;
        while pos < data.len() && data[pos] != b'\n' {
            pos += 1;
        }
        if pos >= data.len() {
            return Err(err("truncated header"));
        }
        let s = std::str::from_utf8(&data[start..pos])
            .map_err(|_| err("header is not valid utf-8"))?
            .to_string();
        pos += 1;
        Ok(s)
    };
    if line()?.trim() != "Pf" {
        return Err(err("not a grayscale pfm (missing Pf magic)"));
    }
    let dims = line()?;
    let mut it = dims.split_ascii_whitespace();
    let width: u32 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| err("bad width"))?;
    let height: u32 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| err("bad height"))?;
    let scale: f64 = line()?.trim().parse().map_err(|_| err("bad scale"))?;
    if scale >= 0.0 {
        return Err(err("big-endian pfm not supported"));
    }
    let n = (width as usize) * (height as usize);
    if data.len() - pos < n * 4 {
        return Err(err("truncated sample payload"));
    }
    let mut out = vec![0.0f64; n];
    for row in (0..height as usize).rev() {
        for col in 0..width as usize {
            let b = &data[pos..pos + 4];
            out[row * width as usize + col] = f32::from_le_bytes(b.try_into().unwrap()) as f64;
            pos += 4;
        }
    }
    Ok((width, height, out))
}
