//! K-means color clustering followed by HSL candidate filtering and relative cluster-size gating.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::rgb_f64_to_hsl;
use crate::error::{Error, Result};
use crate::raster::{Raster, Rgb, SkyMask};

pub const MAX_ITERATIONS: usize = 100;
pub const MOVEMENT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansHslParams {
    pub clusters: usize,
    /// Fraction of the largest candidate cluster a candidate must reach to be kept.
    pub skyreq: f64,
    pub h_high: f64,
    pub h_low: f64,
    pub l_lightness: f64,
    pub l_grey: f64,
    pub s_grey: f64,
}

impl KMeansHslParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.clusters < 2
            || !(self.skyreq > 0.0 && self.skyreq <= 1.0)
            || !(self.h_low < self.h_high)
            || ![self.h_low, self.h_high, self.l_lightness, self.l_grey, self.s_grey]
                .into_iter()
                .all(unit)
        {
            return Err(Error::InvalidInput(format!("invalid K-means/HSL parameters: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub centroids: Vec<[f64; 3]>,
    pub sizes: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_trace: Vec<f64>,
}

impl Clustering {
    /// Pixels replaced by their centroid color.
    pub fn to_raster(&self, width: usize, height: usize) -> Raster {
        let rgb: Vec<Rgb> = self
            .centroids
            .iter()
            .map(|c| c.map(|v| v.round().clamp(0.0, 255.0) as u8))
            .collect();
        Raster::new(width, height, self.labels.iter().map(|&l| rgb[l]).collect())
            .expect("labels cover the image")
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn nearest(p: &[f64; 3], centroids: &[[f64; 3]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Picks an index with probability proportional to `weights`.
fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Lloyd iterations on RGB with k-means++ seeding.
///
/// Identical pixel colors are clustered once with their multiplicity as weight, which yields the same
/// partition as clustering every pixel. `k` is reduced to the number of distinct colors.
pub fn kmeans_cluster(img: &Raster, k: usize, seed: u64) -> Result<Clustering> {
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut counts: HashMap<Rgb, usize> = HashMap::new();
    for &p in img.pixels() {
        *counts.entry(p).or_default() += 1;
    }
    let mut distinct: Vec<(Rgb, usize)> = counts.into_iter().collect();
    distinct.sort_unstable();
    let points: Vec<[f64; 3]> = distinct.iter().map(|(c, _)| c.map(|v| v as f64)).collect();
    let weights: Vec<f64> = distinct.iter().map(|&(_, n)| n as f64).collect();
    let k = k.min(points.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![points[weighted_pick(&mut rng, &weights)]];
    while centroids.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .zip(&weights)
            .map(|(p, w)| w * nearest(p, &centroids).1)
            .collect();
        centroids.push(points[weighted_pick(&mut rng, &d2)]);
    }

    let mut assign = vec![0usize; points.len()];
    let mut trace = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut objective = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, &centroids);
            assign[i] = j;
            objective += weights[i] * d;
        }
        trace.push(objective);

        let mut sums = vec![[0.0f64; 3]; k];
        let mut mass = vec![0.0f64; k];
        for (i, p) in points.iter().enumerate() {
            let j = assign[i];
            for c in 0..3 {
                sums[j][c] += weights[i] * p[c];
            }
            mass[j] += weights[i];
        }
        let mut movement = 0.0f64;
        for j in 0..k {
            if mass[j] > 0.0 {
                let next = sums[j].map(|s| s / mass[j]);
                movement = movement.max(dist2(&next, &centroids[j]).sqrt());
                centroids[j] = next;
            }
        }
        if movement < MOVEMENT_TOLERANCE {
            break;
        }
    }
    // labels consistent with the final centroids
    let mut objective = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (j, d) = nearest(p, &centroids);
        assign[i] = j;
        objective += weights[i] * d;
    }
    trace.push(objective);

    let index: HashMap<Rgb, usize> = distinct.iter().enumerate().map(|(i, (c, _))| (*c, i)).collect();
    let labels: Vec<usize> = img.pixels().iter().map(|p| assign[index[p]]).collect();
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    Ok(Clustering {
        labels,
        centroids,
        sizes,
        objective_trace: trace,
    })
}

/// Hue band, or very light, or light and grey.
pub fn hsl_is_candidate(centroid: [f64; 3], p: &KMeansHslParams) -> bool {
    let c = rgb_f64_to_hsl(centroid);
    (p.h_low < c.h && c.h < p.h_high) || c.l > p.l_lightness || (c.l > p.l_grey && c.s < p.s_grey)
}

/// Candidates whose size reaches `skyreq` times the largest candidate's size.
pub fn select_sky_clusters(sizes: &[usize], candidates: &[bool], skyreq: f64) -> Vec<usize> {
    let largest = sizes
        .iter()
        .zip(candidates)
        .filter(|(_, &c)| c)
        .map(|(&s, _)| s)
        .max();
    let Some(largest) = largest else {
        return Vec::new();
    };
    let bar = skyreq * largest as f64;
    (0..sizes.len())
        .filter(|&i| candidates[i] && sizes[i] as f64 >= bar)
        .collect()
}

pub fn kmeans_hsl_mask(img: &Raster, p: &KMeansHslParams, seed: u64) -> Result<SkyMask> {
    p.validate()?;
    let clustering = kmeans_cluster(img, p.clusters, seed)?;
    let candidates: Vec<bool> = clustering
        .centroids
        .iter()
        .map(|&c| hsl_is_candidate(c, p))
        .collect();
    let mut selected = vec![false; clustering.centroids.len()];
    for i in select_sky_clusters(&clustering.sizes, &candidates, p.skyreq) {
        selected[i] = true;
    }
    SkyMask::new(
        img.width(),
        img.height(),
        clustering.labels.iter().map(|&l| selected[l]).collect(),
    )
}
