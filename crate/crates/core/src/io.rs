//! PNG and raw tensor files for images.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, LumaA, Rgb, Rgba};

use crate::error::{Error, Result};
use crate::image::{is_missing, Image};
use crate::sync::latent::LatentTensor;
use crate::sync::protocol::{read_tensor_file, write_tensor_file};

fn format_err(e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::Format(other.to_string()),
    }
}

/// Loads an 8- or 16-bit PNG, mapping the full code range onto `[-1, 1]`.
pub fn read_png(path: impl AsRef<Path>) -> Result<Image> {
    let dynamic = image::open(path).map_err(format_err)?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let to_unit = |v: u16| v as f32 / 65535.0 * 2.0 - 1.0;
    let (channels, raw): (usize, Vec<u16>) = match dynamic {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_) => {
            (1, dynamic.into_luma16().into_raw())
        }
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            (2, dynamic.into_luma_alpha16().into_raw())
        }
        DynamicImage::ImageRgba8(_) | DynamicImage::ImageRgba16(_) => {
            (4, dynamic.into_rgba16().into_raw())
        }
        other => (3, other.into_rgb16().into_raw()),
    };
    Image::from_vec(w, h, channels, raw.into_iter().map(to_unit).collect())
}

/// Quantizes to PNG. Values are clamped to `[-1, 1]`; missing pixels are
/// written as -1.
pub fn write_png(path: impl AsRef<Path>, img: &Image, sixteen_bit: bool) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let unit = |v: f32| {
        if is_missing(v) {
            0.0
        } else {
            (v.clamp(-1.0, 1.0) + 1.0) / 2.0
        }
    };
    let dynamic = if sixteen_bit {
        let raw: Vec<u16> = img.data().iter().map(|v| (unit(*v) * 65535.0).round() as u16).collect();
        match img.channels() {
            1 => DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).unwrap()),
            2 => DynamicImage::ImageLumaA16(ImageBuffer::<LumaA<u16>, _>::from_raw(w, h, raw).unwrap()),
            3 => DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw).unwrap()),
            _ => DynamicImage::ImageRgba16(ImageBuffer::<Rgba<u16>, _>::from_raw(w, h, raw).unwrap()),
        }
    } else {
        let raw: Vec<u8> = img.data().iter().map(|v| (unit(*v) * 255.0).round() as u8).collect();
        match img.channels() {
            1 => DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).unwrap()),
            2 => DynamicImage::ImageLumaA8(ImageBuffer::<LumaA<u8>, _>::from_raw(w, h, raw).unwrap()),
            3 => DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).unwrap()),
            _ => DynamicImage::ImageRgba8(ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, raw).unwrap()),
        }
    };
    dynamic
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(format_err)
}

/// Writes the image losslessly as a planar tensor frame.
pub fn write_image_blob(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    write_tensor_file(path, &LatentTensor::from_image(img))
}

pub fn read_image_blob(path: impl AsRef<Path>) -> Result<Image> {
    read_tensor_file(path)?.to_image()
}

/// Reads a PNG, or a raw tensor blob when the extension is not `.png`.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    if is_png(path) {
        read_png(path)
    } else {
        read_image_blob(path)
    }
}

/// Writes 16-bit PNG for `.png` paths, a raw tensor blob otherwise.
pub fn write_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    if is_png(path) {
        write_png(path, img, true)
    } else {
        write_image_blob(path, img)
    }
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}
