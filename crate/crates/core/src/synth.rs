//! Parametric outdoor scenes with exact ground truth.
//!
//! A [`SceneSpec`] fully describes a scene: geometry, palette, clouds, buildings, canopy and the seed
//! for per-pixel noise. [`render`] paints the image and the truth mask in one pass from that spec.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{encode_mask, MaskConvention, Raster, Rgb, SkyMask};

pub const DEFAULT_WIDTH: usize = 80;
pub const DEFAULT_HEIGHT: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SceneClass {
    ClearGradient,
    PatchyClouds,
    Overcast,
    TreeOcclusion,
    SkylineBlocks,
}

impl SceneClass {
    pub const ALL: [SceneClass; 5] = [
        SceneClass::ClearGradient,
        SceneClass::PatchyClouds,
        SceneClass::Overcast,
        SceneClass::TreeOcclusion,
        SceneClass::SkylineBlocks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneClass::ClearGradient => "clear",
            SceneClass::PatchyClouds => "patchy",
            SceneClass::Overcast => "overcast",
            SceneClass::TreeOcclusion => "trees",
            SceneClass::SkylineBlocks => "skyline",
        }
    }
}

impl fmt::Display for SceneClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown scene class `{s}`")))
    }
}

/// Filled ellipse painted over the sky; cloud pixels remain sky.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cloud {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub color: Rgb,
}

impl Cloud {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let dx = (x as f64 - self.cx) / self.rx;
        let dy = (y as f64 - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }
}

/// Building occupying columns `x0..x1` from row `top` down to the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub x0: usize,
    pub x1: usize,
    pub top: usize,
    pub color: Rgb,
}

/// Foliage over rows `0..depth`; each pixel there is leaf unless it falls in a hole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Canopy {
    pub depth: usize,
    pub leaf: Rgb,
    pub hole_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub class: SceneClass,
    pub width: usize,
    pub height: usize,
    pub horizon_row: usize,
    pub sky_top: Rgb,
    pub sky_bottom: Rgb,
    /// When non-empty, the sky is painted as equal-height flat bands instead of the gradient.
    #[serde(default)]
    pub sky_bands: Vec<Rgb>,
    pub ground: Rgb,
    /// Peak amplitude of the uniform per-pixel ground texture.
    pub ground_texture: f64,
    /// Peak amplitude of the uniform per-pixel sky noise.
    pub noise: f64,
    #[serde(default)]
    pub clouds: Vec<Cloud>,
    #[serde(default)]
    pub blocks: Vec<Block>,
    #[serde(default)]
    pub canopy: Option<Canopy>,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidInput(format!("invalid scene spec: {reason}")));
        if self.width < 3 || self.height < 3 {
            return bad(format!("{}x{} is smaller than 3x3", self.width, self.height));
        }
        if self.horizon_row == 0 || self.horizon_row >= self.height {
            return bad(format!("horizon row {} outside 1..{}", self.horizon_row, self.height));
        }
        if !(self.noise >= 0.0 && self.ground_texture >= 0.0) {
            return bad("negative noise amplitude".into());
        }
        for b in &self.blocks {
            if b.x0 >= b.x1 || b.x1 > self.width || b.top >= self.horizon_row {
                return bad(format!("block {b:?} does not fit above the horizon"));
            }
        }
        for c in &self.clouds {
            if !(c.rx > 0.0 && c.ry > 0.0) {
                return bad(format!("cloud {c:?} has non-positive radius"));
            }
        }
        if let Some(c) = &self.canopy {
            if c.depth > self.horizon_row || !(0.0..=1.0).contains(&c.hole_fraction) {
                return bad(format!("canopy {c:?} is out of range"));
            }
        }
        Ok(())
    }

    fn sky_color(&self, y: usize) -> [f64; 3] {
        if !self.sky_bands.is_empty() {
            let band = (y * self.sky_bands.len() / self.horizon_row).min(self.sky_bands.len() - 1);
            return self.sky_bands[band].map(f64::from);
        }
        let t = if self.horizon_row > 1 {
            y as f64 / (self.horizon_row - 1) as f64
        } else {
            0.0
        };
        let mut c = [0.0; 3];
        for (i, v) in c.iter_mut().enumerate() {
            *v = self.sky_top[i] as f64 * (1.0 - t) + self.sky_bottom[i] as f64 * t;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScene {
    pub image: Raster,
    pub truth: SkyMask,
    pub spec: SceneSpec,
}

fn jitter(rng: &mut ChaCha8Rng, base: [f64; 3], amp: f64) -> Rgb {
    let mut out = [0u8; 3];
    for (o, b) in out.iter_mut().zip(base) {
        let n = if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 };
        *o = (b + n).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Paints the scene. The pure marker blue never appears in the output so blue-marked masks stay decodable.
pub fn render(spec: &SceneSpec) -> Result<LabeledScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // leaf layout first so the truth does not depend on how much noise was drawn
    let mut leaf = vec![false; w * h];
    if let Some(c) = &spec.canopy {
        for y in 0..c.depth {
            for x in 0..w {
                leaf[y * w + x] = rng.random::<f64>() >= c.hole_fraction;
            }
        }
    }

    let mut pixels = Vec::with_capacity(w * h);
    let mut truth = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let block = spec
                .blocks
                .iter()
                .rev()
                .find(|b| (b.x0..b.x1).contains(&x) && y >= b.top && y < spec.horizon_row);
            let sky = y < spec.horizon_row && block.is_none() && !leaf[y * w + x];
            let px = if leaf[y * w + x] {
                jitter(&mut rng, spec.canopy.as_ref().map(|c| c.leaf).unwrap_or_default().map(f64::from), spec.ground_texture)
            } else if let Some(b) = block {
                b.color
            } else if y < spec.horizon_row {
                let base = match spec.clouds.iter().rev().find(|c| c.contains(x, y)) {
                    Some(c) => c.color.map(f64::from),
                    None => spec.sky_color(y),
                };
                jitter(&mut rng, base, spec.noise)
            } else {
                jitter(&mut rng, spec.ground.map(f64::from), spec.ground_texture)
            };
            let px = if px == MaskConvention::BlueMarked.marker() { [0, 0, 254] } else { px };
            pixels.push(px);
            truth.push(sky);
        }
    }
    Ok(LabeledScene {
        image: Raster::new(w, h, pixels)?,
        truth: SkyMask::new(w, h, truth)?,
        spec: spec.clone(),
    })
}

fn lerp_rgb(rng: &mut ChaCha8Rng, a: Rgb, b: Rgb) -> Rgb {
    let t: f64 = rng.random();
    let mut out = [0u8; 3];
    for i in 0..3 {
        out[i] = (a[i] as f64 + (b[i] as f64 - a[i] as f64) * t).round() as u8;
    }
    out
}

fn ground_color(rng: &mut ChaCha8Rng) -> Rgb {
    lerp_rgb(rng, [52, 40, 28], [78, 62, 42])
}

/// Draws a spec of the given class with per-class parameter jitter.
pub fn random_spec(class: SceneClass, width: usize, height: usize, rng: &mut ChaCha8Rng) -> SceneSpec {
    let hf = height as f64;
    let wf = width as f64;
    let mut spec = SceneSpec {
        class,
        width,
        height,
        horizon_row: (hf * rng.random_range(0.55..0.72)).round() as usize,
        sky_top: lerp_rgb(rng, [40, 90, 200], [70, 120, 225]),
        sky_bottom: lerp_rgb(rng, [198, 178, 158], [215, 195, 175]),
        sky_bands: Vec::new(),
        ground: ground_color(rng),
        ground_texture: rng.random_range(14.0..22.0),
        noise: rng.random_range(1.0..2.5),
        clouds: Vec::new(),
        blocks: Vec::new(),
        canopy: None,
        seed: rng.random(),
    };
    match class {
        SceneClass::ClearGradient => {}
        SceneClass::PatchyClouds => {
            // clouds small enough to be absorbed by the largest minimum region size only
            // two clouds in separate halves, one high and one low, so they never touch and never
            // wall off the lower sky
            let slot = wf / 2.0;
            let area_scale = wf * hf / 4800.0;
            let r = spec.horizon_row as f64;
            let high_first = rng.random_bool(0.5);
            for i in 0..2 {
                let area = rng.random_range(160.0..280.0) * area_scale;
                let aspect: f64 = rng.random_range(1.3..1.7);
                let ry = (area / (std::f64::consts::PI * aspect)).sqrt();
                let rx = ry * aspect;
                let high = (i == 0) == high_first;
                let cy = if high {
                    rng.random_range(ry + 1.0..(0.4 * r).max(ry + 1.5))
                } else {
                    rng.random_range((0.6 * r).min(r - ry - 3.5)..r - ry - 3.0)
                };
                let lo = i as f64 * slot + rx + 3.0;
                let cx = rng.random_range(lo..(lo + (slot - 2.0 * rx - 6.0).max(0.0) + 1e-9));
                let color = lerp_rgb(rng, [236, 237, 240], [245, 245, 247]);
                spec.clouds.push(Cloud { cx, cy, rx, ry, color });
            }
        }
        SceneClass::Overcast => {
            let upper = lerp_rgb(rng, [232, 234, 238], [240, 241, 244]);
            let lower = lerp_rgb(rng, [192, 194, 200], [200, 202, 207]);
            spec.sky_bands = if rng.random_bool(0.5) { vec![upper, lower] } else { vec![lower, upper] };
            spec.noise = rng.random_range(0.5..1.5);
        }
        SceneClass::TreeOcclusion => {
            spec.sky_top = lerp_rgb(rng, [85, 140, 225], [100, 155, 232]);
            spec.sky_bottom = lerp_rgb(rng, [110, 165, 235], [125, 175, 240]);
            spec.canopy = Some(Canopy {
                depth: (hf * rng.random_range(0.25..0.4)).round() as usize,
                leaf: lerp_rgb(rng, [60, 80, 25], [85, 100, 35]),
                hole_fraction: rng.random_range(0.25..0.35),
            });
        }
        SceneClass::SkylineBlocks => {
            // tall flat facades so a building, not the sky, covers most of the top half
            let color = lerp_rgb(rng, [58, 58, 64], [72, 72, 80]);
            let n = rng.random_range(2..=3);
            let slot = width / n;
            for i in 0..n {
                let bw = (slot as f64 * rng.random_range(0.8..0.9)).round() as usize;
                let x0 = i * slot + rng.random_range(0..=slot - bw);
                let top = (spec.horizon_row as f64 * rng.random_range(0.05..0.15)).round() as usize;
                spec.blocks.push(Block { x0, x1: x0 + bw, top, color });
            }
        }
    }
    spec
}

/// Scenes in class order, `counts[i]` of `SceneClass::ALL[i]`, all drawn from one seeded stream.
pub fn make_corpus_specs(counts: [usize; 5], seed: u64, width: usize, height: usize) -> Vec<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::with_capacity(counts.iter().sum());
    for (class, &n) in SceneClass::ALL.iter().zip(&counts) {
        for _ in 0..n {
            specs.push(random_spec(*class, width, height, &mut rng));
        }
    }
    specs
}

pub fn make_corpus(counts: [usize; 5], seed: u64) -> Vec<LabeledScene> {
    make_corpus_specs(counts, seed, DEFAULT_WIDTH, DEFAULT_HEIGHT)
        .par_iter()
        .map(|s| render(s).expect("generated specs are valid"))
        .collect()
}

/// Paths written for one scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrittenScene {
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub spec_path: PathBuf,
}

/// Writes `<stem>.png`, `<stem>_mask.png` and `<stem>.json` into `dir`.
pub fn write_scene(scene: &LabeledScene, dir: &Path, stem: &str, conv: MaskConvention) -> Result<WrittenScene> {
    std::fs::create_dir_all(dir)?;
    let image_path = dir.join(format!("{stem}.png"));
    let mask_path = dir.join(format!("{stem}_mask.png"));
    let spec_path = dir.join(format!("{stem}.json"));
    scene.image.save(&image_path)?;
    let mask = match conv {
        MaskConvention::BlueMarked => encode_mask(&scene.image, &scene.truth, conv)?,
        MaskConvention::WhiteMasked => scene.truth.to_raster(),
    };
    mask.save(&mask_path)?;
    std::fs::write(&spec_path, serde_json::to_string_pretty(&scene.spec)?)?;
    Ok(WrittenScene {
        image_path,
        mask_path,
        spec_path,
    })
}
