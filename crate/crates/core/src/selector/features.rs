//! Fixed-length image descriptor used by the technique selector.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::color::{rgb_to_gray, rgb_to_hsl};
use crate::error::{Error, Result};
use crate::gradient::sobel_gradient;
use crate::raster::Raster;

pub const FEATURE_LEN: usize = 74;
/// Every image is rescaled to this square size before measurement.
pub const FEATURE_IMAGE_SIZE: usize = 299;
pub const HUE_BINS: usize = 16;
pub const LIGHTNESS_BINS: usize = 16;
pub const GRADIENT_BINS: usize = 16;
pub const BLUE_BANDS: usize = 8;
/// Largest possible Sobel magnitude on 8-bit gray (a full-swing corner).
pub const GRADIENT_MAX: f64 = 1442.5;
/// Gradient magnitude at or above which a pixel counts toward the edge density.
pub const EDGE_DENSITY_THRESHOLD: f64 = 64.0;

pub const THIRDS_OFFSET: usize = 0;
pub const HUE_OFFSET: usize = 12;
pub const LIGHTNESS_OFFSET: usize = HUE_OFFSET + HUE_BINS;
pub const GRADIENT_OFFSET: usize = LIGHTNESS_OFFSET + LIGHTNESS_BINS;
pub const BLUE_OFFSET: usize = GRADIENT_OFFSET + GRADIENT_BINS;
pub const GLOBAL_OFFSET: usize = BLUE_OFFSET + BLUE_BANDS;

const SPEC_DESCRIPTION: &str = "features/v1;size=299;thirds=rgb-mean(9)+luma-std(3);\
hue=16;lightness=16;gradient=16:bin0<1,log(1..1442.5);blue-dominance=8 row bands;\
globals=sat-mean,sat-std,frac(l>0.95),frac(s<0.2),frac(grad>=64),top-row-luma";

/// Hex SHA-256 of the feature layout description; models trained on another layout are refused.
pub fn feature_spec_hash() -> String {
    Sha256::digest(SPEC_DESCRIPTION.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_LEN {
            return Err(Error::InvalidInput(format!(
                "feature vector must have {FEATURE_LEN} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("feature {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn thirds(&self) -> &[f64] {
        &self.0[THIRDS_OFFSET..HUE_OFFSET]
    }

    pub fn hue_histogram(&self) -> &[f64] {
        &self.0[HUE_OFFSET..LIGHTNESS_OFFSET]
    }

    pub fn lightness_histogram(&self) -> &[f64] {
        &self.0[LIGHTNESS_OFFSET..GRADIENT_OFFSET]
    }

    pub fn gradient_histogram(&self) -> &[f64] {
        &self.0[GRADIENT_OFFSET..BLUE_OFFSET]
    }

    pub fn blue_profile(&self) -> &[f64] {
        &self.0[BLUE_OFFSET..GLOBAL_OFFSET]
    }

    pub fn globals(&self) -> &[f64] {
        &self.0[GLOBAL_OFFSET..]
    }
}

fn unit_bin(v: f64, bins: usize) -> usize {
    ((v * bins as f64) as usize).min(bins - 1)
}

/// Bin 0 holds magnitudes below 1; bins 1.. split [1, GRADIENT_MAX] evenly in log space.
pub fn gradient_bin(mag: f64) -> usize {
    if mag < 1.0 {
        return 0;
    }
    let t = mag.ln() / GRADIENT_MAX.ln();
    1 + unit_bin(t, GRADIENT_BINS - 1)
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn extract_features(img: &Raster) -> FeatureVector {
    let n = FEATURE_IMAGE_SIZE;
    let work = img.resize_bilinear(n, n).expect("feature size is valid");
    let total = (n * n) as f64;
    let mut f = Vec::with_capacity(FEATURE_LEN);

    // thirds: RGB means, then luminance std, each scaled to [0,1]
    let third_rows = |t: usize| (t * n / 3)..((t + 1) * n / 3);
    let mut stds = Vec::with_capacity(3);
    for t in 0..3 {
        let px: Vec<[u8; 3]> = third_rows(t)
            .flat_map(|y| (0..n).map(move |x| (x, y)))
            .map(|(x, y)| work.get(x, y))
            .collect();
        for c in 0..3 {
            f.push(mean_std(px.iter().map(|p| p[c] as f64)).0 / 255.0);
        }
        stds.push(mean_std(px.iter().map(|&p| rgb_to_gray(p))).1 / 255.0);
    }
    f.extend(stds);

    let hsl: Vec<_> = work.pixels().iter().map(|&p| rgb_to_hsl(p)).collect();
    let mut hue = [0.0; HUE_BINS];
    let mut light = [0.0; LIGHTNESS_BINS];
    for c in &hsl {
        hue[unit_bin(c.h, HUE_BINS)] += 1.0;
        light[unit_bin(c.l, LIGHTNESS_BINS)] += 1.0;
    }
    f.extend(hue.iter().map(|v| v / total));
    f.extend(light.iter().map(|v| v / total));

    let grad = sobel_gradient(&work.to_gray()).expect("feature image exceeds 3x3");
    let mut gh = [0.0; GRADIENT_BINS];
    for &m in &grad.mag {
        gh[gradient_bin(m)] += 1.0;
    }
    f.extend(gh.iter().map(|v| v / total));

    for band in 0..BLUE_BANDS {
        let rows = (band * n / BLUE_BANDS)..((band + 1) * n / BLUE_BANDS);
        let count = rows.len() * n;
        let blue = rows
            .flat_map(|y| (0..n).map(move |x| (x, y)))
            .filter(|&(x, y)| {
                let [r, g, b] = work.get(x, y);
                b > r && b > g
            })
            .count();
        f.push(blue as f64 / count as f64);
    }

    let (sat_mean, sat_std) = mean_std(hsl.iter().map(|c| c.s));
    f.push(sat_mean);
    f.push(sat_std);
    f.push(hsl.iter().filter(|c| c.l > 0.95).count() as f64 / total);
    f.push(hsl.iter().filter(|c| c.s < 0.2).count() as f64 / total);
    f.push(grad.mag.iter().filter(|&&m| m >= EDGE_DENSITY_THRESHOLD).count() as f64 / total);
    f.push(mean_std((0..n).map(|x| rgb_to_gray(work.get(x, 0)))).0 / 255.0);

    FeatureVector::new(f).expect("layout yields 74 finite values")
}
