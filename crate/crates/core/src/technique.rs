//! The thirteen selectable technique variants plus the Sobel/flood-fill benchmark.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::floodfill::floodfill_mask;
use crate::kmeans_hsl::{kmeans_hsl_mask, KMeansHslParams};
use crate::meanshift::{meanshift_mask, MeanShiftParams};
use crate::raster::{Raster, SkyMask};
use crate::sobel_prob::{SobelAnalysis, SobelVariant};

/// A selectable variant, in table listing order (which is also the tie-break order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TechniqueId {
    Sobel50,
    Sobel60,
    Sobel70,
    Sobel80,
    Sobel90,
    Sobel95,
    Mean7_8_300,
    Mean3_6_100,
    Mean5_7_210,
    Mean7_6_100,
    KMean12,
    KMean6,
    KMean14,
}

/// Parameters carried by a variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TechniqueParams {
    Sobel(SobelVariant),
    MeanShift(MeanShiftParams),
    KMeansHsl(KMeansHslParams),
}

const fn kmeans(clusters: usize, skyreq: f64, l_grey: f64) -> KMeansHslParams {
    KMeansHslParams {
        clusters,
        skyreq,
        h_high: 0.75,
        h_low: 0.3,
        l_lightness: 0.95,
        l_grey,
        s_grey: 0.2,
    }
}

const fn mean(spatial_radius: u32, range_radius: f64, min_density: usize) -> MeanShiftParams {
    MeanShiftParams {
        spatial_radius,
        range_radius,
        min_density,
    }
}

impl TechniqueId {
    pub const COUNT: usize = 13;

    pub const ALL: [TechniqueId; 13] = [
        TechniqueId::Sobel50,
        TechniqueId::Sobel60,
        TechniqueId::Sobel70,
        TechniqueId::Sobel80,
        TechniqueId::Sobel90,
        TechniqueId::Sobel95,
        TechniqueId::Mean7_8_300,
        TechniqueId::Mean3_6_100,
        TechniqueId::Mean5_7_210,
        TechniqueId::Mean7_6_100,
        TechniqueId::KMean12,
        TechniqueId::KMean6,
        TechniqueId::KMean14,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TechniqueId::Sobel50 => "Sobel_50",
            TechniqueId::Sobel60 => "Sobel_60",
            TechniqueId::Sobel70 => "Sobel_70",
            TechniqueId::Sobel80 => "Sobel_80",
            TechniqueId::Sobel90 => "Sobel_90",
            TechniqueId::Sobel95 => "Sobel_95",
            TechniqueId::Mean7_8_300 => "Mean_7_8_300",
            TechniqueId::Mean3_6_100 => "Mean_3_6_100",
            TechniqueId::Mean5_7_210 => "Mean_5_7_210",
            TechniqueId::Mean7_6_100 => "Mean_7_6_100",
            TechniqueId::KMean12 => "K-mean_12",
            TechniqueId::KMean6 => "K-mean_6",
            TechniqueId::KMean14 => "K-mean_14",
        }
    }

    pub fn params(self) -> TechniqueParams {
        use TechniqueParams::*;
        match self {
            TechniqueId::Sobel50 => Sobel(SobelVariant::new(0.50)),
            TechniqueId::Sobel60 => Sobel(SobelVariant::new(0.60)),
            TechniqueId::Sobel70 => Sobel(SobelVariant::new(0.70)),
            TechniqueId::Sobel80 => Sobel(SobelVariant::new(0.80)),
            TechniqueId::Sobel90 => Sobel(SobelVariant::new(0.90)),
            TechniqueId::Sobel95 => Sobel(SobelVariant::new(0.95)),
            TechniqueId::Mean7_8_300 => MeanShift(mean(7, 8.0, 300)),
            TechniqueId::Mean3_6_100 => MeanShift(mean(3, 6.0, 100)),
            TechniqueId::Mean5_7_210 => MeanShift(mean(5, 7.0, 210)),
            TechniqueId::Mean7_6_100 => MeanShift(mean(7, 6.0, 100)),
            TechniqueId::KMean12 => KMeansHsl(kmeans(12, 0.7, 0.75)),
            TechniqueId::KMean6 => KMeansHsl(kmeans(6, 0.6, 0.75)),
            TechniqueId::KMean14 => KMeansHsl(kmeans(14, 0.4, 0.65)),
        }
    }

    /// Runs this variant. `seed` only affects the K-means variants.
    pub fn apply(self, img: &Raster, seed: u64) -> Result<SkyMask> {
        match self.params() {
            TechniqueParams::Sobel(v) => Ok(SobelAnalysis::run(img)?.mask(v)),
            TechniqueParams::MeanShift(p) => Ok(meanshift_mask(img, &p)),
            TechniqueParams::KMeansHsl(p) => kmeans_hsl_mask(img, &p, seed),
        }
    }
}

/// All thirteen masks for one image, sharing the Sobel analysis across the six thresholds.
/// Entry `i` is the result of `TechniqueId::ALL[i]`.
pub fn apply_all(img: &Raster, seed: u64) -> Vec<Result<SkyMask>> {
    let sobel = SobelAnalysis::run(img);
    TechniqueId::ALL
        .iter()
        .map(|&id| match (id.params(), &sobel) {
            (TechniqueParams::Sobel(v), Ok(a)) => Ok(a.mask(v)),
            (TechniqueParams::Sobel(_), Err(e)) => Err(Error::InvalidInput(e.to_string())),
            _ => id.apply(img, seed),
        })
        .collect()
}

impl fmt::Display for TechniqueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TechniqueId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TechniqueId::ALL
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| unknown(s))
    }
}

impl Serialize for TechniqueId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for TechniqueId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Anything the batch runner can execute: a selectable variant or the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technique {
    Variant(TechniqueId),
    SobelFloodFill,
}

impl Technique {
    pub const BENCHMARK_NAME: &'static str = "sobel-floodfill";

    pub fn all() -> Vec<Technique> {
        TechniqueId::ALL
            .iter()
            .map(|&t| Technique::Variant(t))
            .chain(std::iter::once(Technique::SobelFloodFill))
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Technique::Variant(t) => t.name(),
            Technique::SobelFloodFill => Self::BENCHMARK_NAME,
        }
    }

    pub fn apply(self, img: &Raster, seed: u64) -> Result<SkyMask> {
        match self {
            Technique::Variant(t) => t.apply(img, seed),
            Technique::SobelFloodFill => Ok(floodfill_mask(img)),
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case(Self::BENCHMARK_NAME) || s.eq_ignore_ascii_case("Sobel/flood-fill") {
            return Ok(Technique::SobelFloodFill);
        }
        s.parse::<TechniqueId>()
            .map(Technique::Variant)
            .map_err(|_| unknown(s))
    }
}

fn unknown(name: &str) -> Error {
    Error::UnknownTechnique {
        name: name.to_string(),
        valid: Technique::all()
            .iter()
            .map(|t| t.name())
            .collect::<Vec<_>>()
            .join(", "),
    }
}
