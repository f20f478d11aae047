//! Image and mask containers, mask marker conventions and file I/O.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::color::rgb_to_gray;
use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Raster {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "width and height must be at least 1",
            });
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{} pixels supplied for a {width}x{height} raster",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.pixels.iter().map(|&p| rgb_to_gray(p)).collect(),
        }
    }

    pub fn flip_vertical(&self) -> Raster {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks(self.width).rev() {
            pixels.extend_from_slice(row);
        }
        Raster { pixels, ..*self }
    }

    pub fn flip_horizontal(&self) -> Raster {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks(self.width) {
            pixels.extend(row.iter().rev());
        }
        Raster { pixels, ..*self }
    }

    /// Bilinear resampling with pixel-center alignment; sample coordinates are clamped to the source.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Raster> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "target size must be non-zero",
            });
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let xs = axis_weights(self.width, width);
        let ys = axis_weights(self.height, height);
        let mut pixels = Vec::with_capacity(width * height);
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let p00 = self.get(x0, y0);
                let p10 = self.get(x1, y0);
                let p01 = self.get(x0, y1);
                let p11 = self.get(x1, y1);
                pixels.push(std::array::from_fn(|c| {
                    let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
                    let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                    (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
                }));
            }
        }
        Raster::new(width, height, pixels)
    }

    pub fn load(path: &Path) -> Result<Raster> {
        let img = image::open(path).map_err(|source| Error::ImageIo {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        let pixels = rgb.pixels().map(|p| p.0).collect();
        Raster::new(w as usize, h as usize, pixels)
    }

    /// Writes PNG or JPEG depending on the extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let buf: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer length matches dimensions");
        img.save(path).map_err(|source| Error::ImageIo {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// For each output index: the two source indices and the weight of the second.
fn axis_weights(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Real-valued single-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Binary sky labeling; `true` is sky.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SkyMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl SkyMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{} bits supplied for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn sky_fraction(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn is_subset_of(&self, other: &SkyMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn same_shape(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch {
                expected_w: width,
                expected_h: height,
                got_w: self.width,
                got_h: self.height,
            });
        }
        Ok(())
    }

    /// Nearest-neighbor resampling; keeps the mask binary.
    pub fn resize_nearest(&self, width: usize, height: usize) -> SkyMask {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        SkyMask::from_fn(width, height, |x, y| {
            let xs = (((x as f64 + 0.5) * sx) as usize).min(self.width - 1);
            let ys = (((y as f64 + 0.5) * sy) as usize).min(self.height - 1);
            self.get(xs, ys)
        })
    }

    /// White-on-black rendering, also the `WhiteMasked` file format.
    pub fn to_raster(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            pixels: self
                .bits
                .iter()
                .map(|&b| if b { [255; 3] } else { [0; 3] })
                .collect(),
        }
    }
}

pub fn sky_fraction(mask: &SkyMask) -> f64 {
    mask.sky_fraction()
}

/// How sky is marked in a ground-truth or output image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskConvention {
    /// Sky painted pure blue (0,0,255) over the photograph.
    #[serde(rename = "blue")]
    BlueMarked,
    /// Sky white (255,255,255) on a separate mask image.
    #[serde(rename = "white")]
    WhiteMasked,
}

impl MaskConvention {
    pub fn marker(self) -> Rgb {
        match self {
            MaskConvention::BlueMarked => [0, 0, 255],
            MaskConvention::WhiteMasked => [255, 255, 255],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MaskConvention::BlueMarked => "blue",
            MaskConvention::WhiteMasked => "white",
        }
    }
}

impl FromStr for MaskConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blue" => Ok(MaskConvention::BlueMarked),
            "white" => Ok(MaskConvention::WhiteMasked),
            other => Err(Error::InvalidInput(format!(
                "mask convention must be `blue` or `white`, got `{other}`"
            ))),
        }
    }
}

/// Exact-match decoding: a pixel is sky iff it equals the marker color.
pub fn decode_mask(img: &Raster, conv: MaskConvention) -> SkyMask {
    let marker = conv.marker();
    SkyMask {
        width: img.width,
        height: img.height,
        bits: img.pixels.iter().map(|&p| p == marker).collect(),
    }
}

pub fn encode_mask(img: &Raster, mask: &SkyMask, conv: MaskConvention) -> Result<Raster> {
    mask.same_shape(img.width, img.height)?;
    let marker = conv.marker();
    let pixels = img
        .pixels
        .iter()
        .zip(&mask.bits)
        .map(|(&p, &sky)| if sky { marker } else { p })
        .collect();
    Raster::new(img.width, img.height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(Raster::new(0, 3, vec![]).is_err());
        assert!(Raster::new(2, 2, vec![[0; 3]; 3]).is_err());
    }

    #[test]
    fn decode_marker_colors() {
        let blue = Raster::filled(4, 3, [0, 0, 255]).unwrap();
        assert!(decode_mask(&blue, MaskConvention::BlueMarked).bits().iter().all(|&b| b));
        let white = Raster::filled(4, 3, [255, 255, 255]).unwrap();
        assert!(decode_mask(&white, MaskConvention::WhiteMasked).bits().iter().all(|&b| b));
        let near = Raster::filled(4, 3, [254, 254, 254]).unwrap();
        assert_eq!(decode_mask(&near, MaskConvention::WhiteMasked).count(), 0);
        // blue is not white
        assert_eq!(decode_mask(&blue, MaskConvention::WhiteMasked).count(), 0);
    }

    #[test]
    fn encode_identity_and_fill() {
        let img = Raster::from_fn(5, 4, |x, y| [x as u8 * 10, y as u8 * 20, 7]).unwrap();
        let none = SkyMask::filled(5, 4, false);
        assert_eq!(encode_mask(&img, &none, MaskConvention::BlueMarked).unwrap(), img);
        let all = SkyMask::filled(5, 4, true);
        let out = encode_mask(&img, &all, MaskConvention::BlueMarked).unwrap();
        assert!(out.pixels().iter().all(|&p| p == [0, 0, 255]));
    }

    #[test]
    fn encode_dimension_mismatch() {
        let img = Raster::filled(5, 4, [1, 2, 3]).unwrap();
        let mask = SkyMask::filled(4, 5, true);
        assert!(matches!(
            encode_mask(&img, &mask, MaskConvention::WhiteMasked),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sky_fraction_counts() {
        assert_eq!(SkyMask::filled(3, 4, true).sky_fraction(), 1.0);
        assert_eq!(SkyMask::filled(3, 4, false).sky_fraction(), 0.0);
        let m = SkyMask::from_fn(4, 3, |x, _| x == 0);
        assert_eq!(m.count(), 3);
        assert_eq!(sky_fraction(&m), 0.25);
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = Raster::from_fn(7, 5, |x, y| [(x * 30) as u8, (y * 40) as u8, 99]).unwrap();
        assert_eq!(img.resize_bilinear(7, 5).unwrap(), img);
        let c = Raster::filled(16, 16, [12, 34, 56]).unwrap();
        let r = c.resize_bilinear(5, 9).unwrap();
        assert!(r.pixels().iter().all(|&p| p == [12, 34, 56]));
    }

    fn arb_mask() -> impl Strategy<Value = SkyMask> {
        (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), w * h)
                .prop_map(move |bits| SkyMask::new(w, h, bits).unwrap())
        })
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(mask in arb_mask(), shade in 0u8..=254, blue in any::<bool>()) {
            let conv = if blue { MaskConvention::BlueMarked } else { MaskConvention::WhiteMasked };
            // base colors never equal either marker
            let img = Raster::filled(mask.width(), mask.height(), [shade, shade, 0]).unwrap();
            let enc = encode_mask(&img, &mask, conv).unwrap();
            prop_assert_eq!(decode_mask(&enc, conv), mask);
        }

        #[test]
        fn sky_fraction_permutation_invariant(mask in arb_mask(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut bits = mask.bits().to_vec();
            bits.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled = SkyMask::new(mask.width(), mask.height(), bits).unwrap();
            prop_assert_eq!(shuffled.sky_fraction(), mask.sky_fraction());
        }
    }
}
