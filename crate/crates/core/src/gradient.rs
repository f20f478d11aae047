//! 3x3 Sobel derivatives with replicate padding.

use crate::error::{Error, Result};
use crate::raster::GrayImage;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientImage {
    pub width: usize,
    pub height: usize,
    pub mag: Vec<f64>,
}

impl GradientImage {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.mag[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.mag.iter().copied().fold(0.0, f64::max)
    }

    /// Minimum over each pixel's 3x3 neighborhood (replicate padding).
    ///
    /// Thin edges (at most two pixels wide, which is what a step produces under a 3x3 kernel) vanish,
    /// texture survives.
    pub fn eroded(&self) -> GradientImage {
        let (w, h) = (self.width, self.height);
        let mut mag = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let mut m = f64::INFINITY;
                for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        m = m.min(self.get(xx, yy));
                    }
                }
                mag.push(m);
            }
        }
        GradientImage {
            width: w,
            height: h,
            mag,
        }
    }
}

/// Horizontal and vertical Sobel responses.
pub fn sobel_components(gray: &GrayImage) -> Result<(Vec<f64>, Vec<f64>)> {
    let (w, h) = (gray.width, gray.height);
    if w < 3 || h < 3 {
        return Err(Error::InvalidDimensions {
            width: w,
            height: h,
            reason: "Sobel needs at least 3x3 pixels",
        });
    }
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        gray.data[yc * w + xc]
    };
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            gx.push(dx);
            gy.push(dy);
        }
    }
    Ok((gx, gy))
}

pub fn sobel_gradient(gray: &GrayImage) -> Result<GradientImage> {
    let (gx, gy) = sobel_components(gray)?;
    Ok(GradientImage {
        width: gray.width,
        height: gray.height,
        mag: gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect(),
    })
}
