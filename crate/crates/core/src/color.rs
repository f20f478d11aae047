//! Per-pixel color conversions: HSL (bi-hexcone), BT.601 luminance and CIE L*u*v* under D65.

use serde::{Deserialize, Serialize};

/// Hue, saturation and lightness, all in `[0, 1]`. Hue wraps and is stored as 0 for achromatic colors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HslColor {
    pub h: f64,
    pub s: f64,
    pub l: f64,
}

pub fn rgb_to_hsl(rgb: [u8; 3]) -> HslColor {
    rgb_f64_to_hsl([rgb[0] as f64, rgb[1] as f64, rgb[2] as f64])
}

/// HSL of a real-valued color with channels on the 0..=255 scale (cluster centroids are not integral).
pub fn rgb_f64_to_hsl(rgb: [f64; 3]) -> HslColor {
    let r = rgb[0] / 255.0;
    let g = rgb[1] / 255.0;
    let b = rgb[2] / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let l = (max + min) / 2.0;
    let d = max - min;
    if d <= 0.0 {
        return HslColor { h: 0.0, s: 0.0, l };
    }
    let s = if l > 0.5 {
        d / (2.0 - max - min)
    } else {
        d / (max + min)
    };
    let mut h = if max == r {
        (g - b) / d + if g < b { 6.0 } else { 0.0 }
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    h /= 6.0;
    if h >= 1.0 {
        h -= 1.0;
    }
    HslColor { h, s, l }
}

pub fn hsl_to_rgb(c: HslColor) -> [u8; 3] {
    let HslColor { h, s, l } = c;
    if s <= 0.0 {
        let v = (l * 255.0).round().clamp(0.0, 255.0) as u8;
        return [v, v, v];
    }
    let q = if l < 0.5 { l * (1.0 + s) } else { l + s - l * s };
    let p = 2.0 * l - q;
    let channel = |mut t: f64| {
        if t < 0.0 {
            t += 1.0;
        }
        if t > 1.0 {
            t -= 1.0;
        }
        let v = if t < 1.0 / 6.0 {
            p + (q - p) * 6.0 * t
        } else if t < 0.5 {
            q
        } else if t < 2.0 / 3.0 {
            p + (q - p) * (2.0 / 3.0 - t) * 6.0
        } else {
            p
        };
        (v * 255.0).round().clamp(0.0, 255.0) as u8
    };
    [channel(h + 1.0 / 3.0), channel(h), channel(h - 1.0 / 3.0)]
}

/// ITU-R BT.601 luma, unrounded.
#[inline]
pub fn rgb_to_gray(rgb: [u8; 3]) -> f64 {
    0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64
}

// sRGB (D65) to XYZ.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

// Reference white is the image of sRGB white under the matrix above, so white maps to u* = v* = 0.
const WHITE: [f64; 3] = [
    0.4124564 + 0.3575761 + 0.1804375,
    0.2126729 + 0.7151522 + 0.0721750,
    0.0193339 + 0.1191920 + 0.9503041,
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn uv_prime(x: f64, y: f64, z: f64) -> (f64, f64) {
    let den = x + 15.0 * y + 3.0 * z;
    if den <= 0.0 {
        (0.0, 0.0)
    } else {
        (4.0 * x / den, 9.0 * y / den)
    }
}

/// CIE 1976 L*u*v* of an sRGB pixel.
pub fn rgb_to_luv(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(|c| srgb_to_linear(c as f64 / 255.0));
    let xyz: [f64; 3] =
        std::array::from_fn(|i| RGB_TO_XYZ[i].iter().zip(lin).map(|(m, c)| m * c).sum());
    let yr = xyz[1] / WHITE[1];
    let l = if yr > EPSILON {
        116.0 * yr.cbrt() - 16.0
    } else {
        KAPPA * yr
    };
    if l <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    let (up, vp) = uv_prime(xyz[0], xyz[1], xyz[2]);
    let (un, vn) = uv_prime(WHITE[0], WHITE[1], WHITE[2]);
    [l, 13.0 * l * (up - un), 13.0 * l * (vp - vn)]
}

/// Inverse of [`rgb_to_luv`], clamped and rounded to 8 bits.
pub fn luv_to_rgb(luv: [f64; 3]) -> [u8; 3] {
    let [l, u, v] = luv;
    if l <= 0.0 {
        return [0, 0, 0];
    }
    let (un, vn) = uv_prime(WHITE[0], WHITE[1], WHITE[2]);
    let up = u / (13.0 * l) + un;
    let vp = v / (13.0 * l) + vn;
    let y = if l > KAPPA * EPSILON {
        ((l + 16.0) / 116.0).powi(3)
    } else {
        l / KAPPA
    } * WHITE[1];
    let (x, z) = if vp <= 0.0 {
        (0.0, 0.0)
    } else {
        (
            y * 9.0 * up / (4.0 * vp),
            y * (12.0 - 3.0 * up - 20.0 * vp) / (4.0 * vp),
        )
    };
    let xyz = [x, y, z];
    std::array::from_fn(|i| {
        let lin: f64 = XYZ_TO_RGB[i].iter().zip(xyz).map(|(m, c)| m * c).sum();
        (linear_to_srgb(lin.clamp(0.0, 1.0)) * 255.0)
            .round()
            .clamp(0.0, 255.0) as u8
    })
}
