//! PNG reading and writing. Pixels map to the unit scale as `v / 255` on load
//! and `round(v · 255)` on save.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use flarekit_core::{BinaryMask, Plane, RgbImage};
use image::{ExtendedColorType, ImageFormat};
use walkdir::WalkDir;

/// Mask pixels at or above this 8-bit value are set.
pub const MASK_THRESHOLD: u8 = 128;

pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path)
        .with_context(|| format!("cannot read image {}", path.display()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect();
    Ok(RgbImage::new(w, h, data)?)
}

pub fn rgb_bytes(img: &RgbImage) -> Vec<u8> {
    img.data().iter().map(|&v| to_u8(v)).collect()
}

pub fn save_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    ensure_parent(path)?;
    image::save_buffer_with_format(
        path,
        &rgb_bytes(img),
        img.width() as u32,
        img.height() as u32,
        ExtendedColorType::Rgb8,
        ImageFormat::Png,
    )
    .with_context(|| format!("cannot write {}", path.display()))
}

/// Loads a mask; any colour type is accepted and reduced to luma.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path)
        .with_context(|| format!("cannot read mask {}", path.display()))?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.into_raw().into_iter().map(|b| b >= MASK_THRESHOLD).collect();
    Ok(Plane::new(w, h, data)?)
}

/// Writes a single-channel PNG with 0 and 255.
pub fn save_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    ensure_parent(path)?;
    let bytes: Vec<u8> = mask.data().iter().map(|&m| if m { 255 } else { 0 }).collect();
    image::save_buffer_with_format(
        path,
        &bytes,
        mask.width() as u32,
        mask.height() as u32,
        ExtendedColorType::L8,
        ImageFormat::Png,
    )
    .with_context(|| format!("cannot write {}", path.display()))
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
    }
    Ok(())
}

pub fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Every `.png` below `root`, as paths relative to it, in sorted order.
pub fn find_pngs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.with_context(|| format!("cannot list {}", root.display()))?;
        if entry.file_type().is_file() && is_png(entry.path()) {
            out.push(entry.path().strip_prefix(root).expect("walkdir yields children").to_path_buf());
        }
    }
    Ok(out)
}

/// PNG files directly inside `dir`, sorted by name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_png(p))
        .collect();
    out.sort();
    Ok(out)
}

/// Relative paths in manifests always use `/`.
pub fn portable(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}
