//! Sobel operator / hybrid probability sky model.
//!
//! A gradient image seeds a per-column sky/ground boundary chosen by maximizing a covariance-based
//! energy over a schedule of gradient thresholds. The sky region under that boundary then
//! parameterizes three per-pixel probability factors (color, texture, height) whose geometric mean
//! is thresholded into the `Sobel_50` .. `Sobel_95` masks.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{sobel_gradient, GradientImage};
use crate::raster::{GrayImage, Raster, SkyMask};

/// Number of geometrically spaced gradient thresholds tried by the boundary search.
pub const THRESHOLD_SCHEDULE_LEN: usize = 64;
/// Weight of the sky terms in the energy denominator.
pub const ENERGY_GAMMA: f64 = 2.0;
/// Ridge added to the sky color covariance before inversion.
pub const COLOR_REGULARIZATION: f64 = 1e-3;
/// Floor on the mean sky gradient used to scale the texture factor.
pub const GRADIENT_SCALE_FLOOR: f64 = 1e-6;
/// Whole-image covariance determinant below which a boundary-less image counts as all sky.
pub const FALLBACK_DET_BOUND: f64 = 64.0;

/// Per-column sky/ground split: rows `0..rows[c]` of column `c` are the sky hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryFn {
    pub rows: Vec<usize>,
}

impl BoundaryFn {
    pub fn whole_image(width: usize, height: usize) -> Self {
        Self {
            rows: vec![height; width],
        }
    }

    pub fn mirrored(&self) -> Self {
        Self {
            rows: self.rows.iter().rev().copied().collect(),
        }
    }

    #[inline]
    pub fn is_sky(&self, x: usize, y: usize) -> bool {
        y < self.rows[x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkyProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub p: Vec<f64>,
}

impl SkyProbabilityMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.p[y * self.width + x]
    }

    pub fn threshold(&self, theta: f64) -> SkyMask {
        SkyMask::new(self.width, self.height, self.p.iter().map(|&p| p > theta).collect())
            .expect("map and mask share dimensions")
    }

    /// 8-bit grayscale rendering (p * 255, rounded), for inspection.
    pub fn to_raster(&self) -> Raster {
        let px = self
            .p
            .iter()
            .map(|&p| {
                let v = (p * 255.0).round() as u8;
                [v, v, v]
            })
            .collect();
        Raster::new(self.width, self.height, px).expect("non-empty map")
    }
}

/// One of the Table-style threshold variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobelVariant {
    pub threshold: f64,
}

impl SobelVariant {
    pub const fn new(threshold: f64) -> Self {
        Self { threshold }
    }
}

/// Mean and covariance of RGB values.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ColorStats {
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

impl ColorStats {
    pub fn from_pixels<'a>(pixels: impl Iterator<Item = &'a [u8; 3]> + Clone) -> Option<Self> {
        let mut sum = Vector3::zeros();
        let mut count = 0usize;
        for p in pixels.clone() {
            sum += rgb_vec(*p);
            count += 1;
        }
        if count == 0 {
            return None;
        }
        let mean = sum / count as f64;
        let mut cov = Matrix3::zeros();
        for p in pixels {
            let d = rgb_vec(*p) - mean;
            cov += d * d.transpose();
        }
        cov /= count as f64;
        Some(Self { mean, cov })
    }

    fn largest_eigenvalue(&self) -> f64 {
        self.cov.symmetric_eigenvalues().max()
    }
}

#[inline]
fn rgb_vec(p: [u8; 3]) -> Vector3<f64> {
    Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64)
}

/// Gradient thresholds geometrically spaced over `[min positive magnitude, max magnitude]`.
pub fn threshold_schedule(grad: &GradientImage) -> Vec<f64> {
    let lo = grad
        .mag
        .iter()
        .copied()
        .filter(|&m| m > 0.0)
        .fold(f64::INFINITY, f64::min);
    let hi = grad.max();
    if !lo.is_finite() || hi <= 0.0 {
        return Vec::new();
    }
    if hi <= lo {
        return vec![lo];
    }
    let ratio = hi / lo;
    let n = THRESHOLD_SCHEDULE_LEN;
    let mut out: Vec<f64> = (0..n)
        .map(|k| lo * ratio.powf(k as f64 / (n - 1) as f64))
        .collect();
    // the top of the schedule must actually reach the maximum despite rounding in powf
    out[n - 1] = hi;
    out
}

/// Boundary for one gradient threshold.
///
/// In each column the boundary sits at the first row (top-down) whose magnitude reaches `t`. A step
/// between rows `r-1` and `r` lights up both rows under the 3x3 kernel, so when the first crossing is
/// immediately followed by a second one the boundary is placed between them.
pub fn boundary_for_threshold(grad: &GradientImage, t: f64) -> BoundaryFn {
    let (w, h) = (grad.width, grad.height);
    let rows = (0..w)
        .map(|x| match (0..h).find(|&y| grad.get(x, y) >= t) {
            None => h,
            Some(a) if a + 1 < h && grad.get(x, a + 1) >= t => a + 1,
            Some(a) => a,
        })
        .collect();
    BoundaryFn { rows }
}

/// Energy of a partition; `None` when either region is empty.
pub fn boundary_energy(img: &Raster, boundary: &BoundaryFn) -> Option<f64> {
    let w = img.width();
    let pixels = img.pixels();
    let sky = pixels
        .iter()
        .enumerate()
        .filter(|(i, _)| boundary.is_sky(i % w, i / w))
        .map(|(_, p)| p);
    let ground = pixels
        .iter()
        .enumerate()
        .filter(|(i, _)| !boundary.is_sky(i % w, i / w))
        .map(|(_, p)| p);
    let s = ColorStats::from_pixels(sky)?;
    let g = ColorStats::from_pixels(ground)?;
    let denom = ENERGY_GAMMA * s.cov.determinant()
        + g.cov.determinant()
        + ENERGY_GAMMA * s.largest_eigenvalue()
        + g.largest_eigenvalue();
    Some(if denom > 0.0 {
        1.0 / denom
    } else {
        f64::INFINITY
    })
}

/// Searches the threshold schedule for the boundary of maximal energy. Ties keep the lowest threshold.
pub fn optimize_boundary(grad: &GradientImage, img: &Raster) -> Result<BoundaryFn> {
    if img.height() < 3 {
        return Err(Error::InvalidDimensions {
            width: img.width(),
            height: img.height(),
            reason: "boundary search needs at least 3 rows",
        });
    }
    let mut best: Option<(f64, BoundaryFn)> = None;
    let mut last: Option<BoundaryFn> = None;
    for t in threshold_schedule(grad) {
        let b = boundary_for_threshold(grad, t);
        if last.as_ref() == Some(&b) {
            continue;
        }
        if let Some(j) = boundary_energy(img, &b) {
            if best.as_ref().map_or(true, |(bj, _)| j > *bj) {
                best = Some((j, b.clone()));
            }
        }
        last = Some(b);
    }
    best.map(|(_, b)| b).ok_or(Error::NoBoundary)
}

/// Geometric mean of the color, texture and height factors under the sky region of `boundary`.
///
/// The texture factor uses the 3x3-eroded gradient, so the two rows straddling a clean horizon are
/// not penalized for the horizon itself, and it only penalizes texture in excess of the sky's mean.
pub fn build_probability_map(img: &Raster, grad: &GradientImage, boundary: &BoundaryFn) -> SkyProbabilityMap {
    let (w, h) = (img.width(), img.height());
    let in_sky = |i: usize| boundary.is_sky(i % w, i / w);
    let pixels = img.pixels();
    let stats = ColorStats::from_pixels(
        pixels
            .iter()
            .enumerate()
            .filter(|(i, _)| in_sky(*i))
            .map(|(_, p)| p),
    )
    .or_else(|| ColorStats::from_pixels(pixels.iter()))
    .expect("raster is non-empty");
    let precision = (stats.cov + Matrix3::identity() * COLOR_REGULARIZATION)
        .try_inverse()
        .unwrap_or_else(|| Matrix3::identity() / COLOR_REGULARIZATION);

    let texture = grad.eroded();
    let (sum, n) = texture
        .mag
        .iter()
        .enumerate()
        .filter(|(i, _)| in_sky(*i))
        .fold((0.0, 0usize), |(s, n), (_, m)| (s + m, n + 1));
    let scale = if n > 0 { sum / n as f64 } else { 0.0 }.max(GRADIENT_SCALE_FLOOR);

    let denom_row = (h - 1).max(1) as f64;
    let p = pixels
        .iter()
        .enumerate()
        .map(|(i, &px)| {
            let d = rgb_vec(px) - stats.mean;
            let d2 = (d.transpose() * precision * d)[(0, 0)].max(0.0);
            let p_color = (-0.5 * d2).exp();
            let excess = (texture.mag[i] - scale).max(0.0);
            let p_grad = (-excess / scale).exp();
            let p_pos = 1.0 - (i / w) as f64 / denom_row;
            let p = (p_color * p_grad * p_pos).cbrt();
            if p.is_finite() {
                p.clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    SkyProbabilityMap {
        width: w,
        height: h,
        p,
    }
}

/// Everything the technique computes, for inspection and debugging.
#[derive(Debug, Clone)]
pub struct SobelAnalysis {
    pub gradient: GradientImage,
    /// `None` when the boundary search failed and the homogeneity fallback applied.
    pub boundary: Option<BoundaryFn>,
    pub probability: Option<SkyProbabilityMap>,
    pub fallback_sky: bool,
}

impl SobelAnalysis {
    pub fn run(img: &Raster) -> Result<Self> {
        let gray: GrayImage = img.to_gray();
        let gradient = sobel_gradient(&gray)?;
        match optimize_boundary(&gradient, img) {
            Ok(boundary) => {
                let probability = build_probability_map(img, &gradient, &boundary);
                Ok(Self {
                    gradient,
                    boundary: Some(boundary),
                    probability: Some(probability),
                    fallback_sky: false,
                })
            }
            Err(Error::NoBoundary) => {
                let stats = ColorStats::from_pixels(img.pixels().iter()).expect("non-empty");
                Ok(Self {
                    gradient,
                    boundary: None,
                    probability: None,
                    fallback_sky: stats.cov.determinant() < FALLBACK_DET_BOUND,
                })
            }
            Err(e) => Err(e),
        }
    }

    pub fn mask(&self, v: SobelVariant) -> SkyMask {
        match &self.probability {
            Some(map) => map.threshold(v.threshold),
            None => SkyMask::filled(self.gradient.width, self.gradient.height, self.fallback_sky),
        }
    }
}

/// Thresholded probability mask; boundary failures fall back to all-sky or all-ground.
pub fn sobel_prob_mask(img: &Raster, v: SobelVariant) -> Result<SkyMask> {
    Ok(SobelAnalysis::run(img)?.mask(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SKY: [u8; 3] = [70, 130, 220];
    const GROUND: [u8; 3] = [40, 35, 30];

    fn step_image(w: usize, h: usize, r: usize) -> Raster {
        Raster::from_fn(w, h, |_, y| if y < r { SKY } else { GROUND }).unwrap()
    }

    fn grad_of(img: &Raster) -> GradientImage {
        sobel_gradient(&img.to_gray()).unwrap()
    }

    /// Every distinct boundary a per-column threshold rule can produce on this image, scored by brute force.
    fn brute_force_best(img: &Raster) -> BoundaryFn {
        let g = grad_of(img);
        let mut ts: Vec<f64> = g.mag.iter().copied().filter(|&m| m > 0.0).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let mut best: Option<(f64, BoundaryFn)> = None;
        for t in ts {
            let b = boundary_for_threshold(&g, t);
            if let Some(j) = boundary_energy(img, &b) {
                if best.as_ref().map_or(true, |(bj, _)| j > *bj) {
                    best = Some((j, b));
                }
            }
        }
        best.unwrap().1
    }

    #[test]
    fn step_image_boundary_is_the_horizon() {
        let img = step_image(12, 10, 4);
        let b = optimize_boundary(&grad_of(&img), &img).unwrap();
        assert_eq!(b.rows, vec![4; 12]);
        assert_eq!(b, brute_force_best(&img));
    }

    #[test]
    fn uniform_image_has_no_boundary() {
        let img = Raster::filled(8, 8, SKY).unwrap();
        assert!(matches!(optimize_boundary(&grad_of(&img), &img), Err(Error::NoBoundary)));
        // the fallback treats a flat frame as all sky
        assert!(sobel_prob_mask(&img, SobelVariant::new(0.7)).unwrap().bits().iter().all(|&b| b));
    }

    #[test]
    fn two_step_image_picks_lower_within_region_spread() {
        // horizon at row 4 (sky -> grey), then a stronger contrast line at row 8 (grey -> black)
        let img = Raster::from_fn(10, 12, |_, y| {
            if y < 4 {
                [120, 160, 230]
            } else if y < 8 {
                [90, 90, 90]
            } else {
                [0, 0, 0]
            }
        })
        .unwrap();
        let g = grad_of(&img);
        let chosen = optimize_boundary(&g, &img).unwrap();
        let at_horizon = BoundaryFn { rows: vec![4; 10] };
        let at_line = BoundaryFn { rows: vec![8; 10] };
        let j_h = boundary_energy(&img, &at_horizon).unwrap();
        let j_l = boundary_energy(&img, &at_line).unwrap();
        let want = if j_h >= j_l { at_horizon } else { at_line };
        assert_eq!(chosen, want);
        assert_eq!(chosen, brute_force_best(&img));
    }

    #[test]
    fn energy_is_mirror_invariant() {
        let img = Raster::from_fn(9, 8, |x, y| {
            if y < 2 + x / 3 {
                [100 + x as u8 * 5, 150, 220]
            } else {
                [30, 20 + y as u8 * 3, 10]
            }
        })
        .unwrap();
        let g = grad_of(&img);
        let b = optimize_boundary(&g, &img).unwrap();
        let m = img.flip_horizontal();
        let bm = optimize_boundary(&grad_of(&m), &m).unwrap();
        assert_eq!(bm, b.mirrored());
        let j = boundary_energy(&img, &b).unwrap();
        let jm = boundary_energy(&m, &b.mirrored()).unwrap();
        assert!((j - jm).abs() <= 1e-12 * j.abs().max(1.0));
    }

    #[test]
    fn probability_extremes() {
        let img = step_image(10, 10, 4);
        let g = grad_of(&img);
        let b = optimize_boundary(&g, &img).unwrap();
        let map = build_probability_map(&img, &g, &b);
        // row 0, sky mean color, zero gradient
        assert!((map.get(3, 0) - 1.0).abs() < 1e-12);
        for x in 0..10 {
            assert_eq!(map.get(x, 9), 0.0);
        }
        assert!(map.p.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn sky_beats_ground_on_every_row() {
        // noisy-free two-region image with a sloped horizon so both classes share rows
        let img = Raster::from_fn(16, 12, |x, y| if y < 3 + x / 3 { SKY } else { GROUND }).unwrap();
        let g = grad_of(&img);
        let b = optimize_boundary(&g, &img).unwrap();
        let map = build_probability_map(&img, &g, &b);
        for y in 0..12 {
            let sky: Vec<f64> = (0..16).filter(|&x| y < 3 + x / 3).map(|x| map.get(x, y)).collect();
            let ground: Vec<f64> = (0..16).filter(|&x| y >= 3 + x / 3).map(|x| map.get(x, y)).collect();
            for s in &sky {
                for gr in &ground {
                    assert!(s > gr, "row {y}: sky {s} <= ground {gr}");
                }
            }
        }
    }

    #[test]
    fn position_factor_is_monotone() {
        let img = step_image(6, 10, 6);
        let g = grad_of(&img);
        let map = build_probability_map(&img, &g, &BoundaryFn { rows: vec![6; 6] });
        for y in 1..6 {
            assert!(map.get(2, y) < map.get(2, y - 1));
        }
    }

    #[test]
    fn threshold_examples() {
        let map = SkyProbabilityMap {
            width: 3,
            height: 2,
            p: vec![0.75; 6],
        };
        assert!(map.threshold(0.70).bits().iter().all(|&b| b));
        assert!(map.threshold(0.80).bits().iter().all(|&b| !b));
    }

    #[test]
    fn sobel_70_recovers_clean_step() {
        let (w, h, r) = (20, 15, 6);
        let img = step_image(w, h, r);
        let mask = sobel_prob_mask(&img, SobelVariant::new(0.7)).unwrap();
        let truth = SkyMask::from_fn(w, h, |_, y| y < r);
        assert_eq!(mask, truth);
    }

    #[test]
    fn schedule_spans_range() {
        let img = step_image(6, 8, 3);
        let g = grad_of(&img);
        let s = threshold_schedule(&g);
        assert_eq!(s.len(), 1);
        let ramp = Raster::from_fn(8, 8, |x, y| [(x * y * 3) as u8, (x * 9) as u8, 40]).unwrap();
        let g = grad_of(&ramp);
        let s = threshold_schedule(&g);
        assert_eq!(s.len(), THRESHOLD_SCHEDULE_LEN);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*s.last().unwrap(), g.max());
    }
}
