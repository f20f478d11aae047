//! Best-technique labels, the linear softmax selector, and adaptive routing.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, feature_spec_hash, FeatureVector, FEATURE_LEN};
use crate::error::{Error, Result};
use crate::metrics::confusion;
use crate::raster::{Raster, SkyMask};
use crate::technique::{apply_all, TechniqueId};

pub const MODEL_VERSION: u32 = 1;
/// Used when the predicted technique fails on an image.
pub const FALLBACK_TECHNIQUE: TechniqueId = TechniqueId::Sobel70;
const CLASSES: usize = TechniqueId::COUNT;
const WIDTH: usize = FEATURE_LEN + 1;

/// Pixel accuracy of all thirteen variants on one image; a failing variant scores 0.
pub fn score_techniques(img: &Raster, truth: &SkyMask, seed: u64) -> Result<[f64; CLASSES]> {
    truth.same_shape(img.width(), img.height())?;
    let mut out = [0.0; CLASSES];
    for (o, mask) in out.iter_mut().zip(apply_all(img, seed)) {
        *o = match mask {
            Ok(m) => confusion(&m, truth)?.accuracy(),
            Err(_) => 0.0,
        };
    }
    Ok(out)
}

/// Highest score, ties going to the earliest designation.
pub fn best_technique(scores: &[f64; CLASSES]) -> TechniqueId {
    let mut best = 0;
    for i in 1..CLASSES {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    TechniqueId::ALL[best]
}

pub fn generate_labels(dataset: &[(Raster, SkyMask)], seed: u64) -> Result<Vec<(FeatureVector, TechniqueId)>> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("cannot label an empty dataset".into()));
    }
    dataset
        .par_iter()
        .map(|(img, truth)| {
            let scores = score_techniques(img, truth, seed)?;
            Ok((extract_features(img), best_technique(&scores)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Share of the data held out to pick the best epoch.
    pub holdout_fraction: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 200,
            l2: 1e-4,
            batch_size: 32,
            seed: 17,
            holdout_fraction: 0.1,
        }
    }
}

/// Per-dimension standardization; zero-variance dimensions are masked to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub active: Vec<bool>,
}

impl Normalization {
    pub fn fit(rows: &[&FeatureVector]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; FEATURE_LEN];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.as_slice()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; FEATURE_LEN];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_slice()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        let active = std.iter().map(|&s| s > 1e-12).collect();
        Self { mean, std, active }
    }

    pub fn apply(&self, f: &FeatureVector) -> Vec<f64> {
        f.as_slice()
            .iter()
            .enumerate()
            .map(|(i, v)| if self.active[i] { (v - self.mean[i]) / self.std[i] } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorModel {
    pub version: u32,
    pub seed: u64,
    pub feature_spec_hash: String,
    pub normalization: Normalization,
    /// One row per technique in designation order; the last column is the bias.
    pub weights: Vec<Vec<f64>>,
}

/// Loss per epoch and the epoch whose snapshot was returned (0 = before any update).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    pub best_epoch: usize,
    pub best_holdout_top1: f64,
    pub holdout_size: usize,
}

fn softmax(logits: &[f64; CLASSES]) -> [f64; CLASSES] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|l| (l - max).exp());
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

fn logits(w: &[Vec<f64>], x: &[f64]) -> [f64; CLASSES] {
    let mut out = [0.0; CLASSES];
    for (o, row) in out.iter_mut().zip(w) {
        *o = row[FEATURE_LEN] + row[..FEATURE_LEN].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    out
}

fn rank(scores: &[f64; CLASSES]) -> Vec<TechniqueId> {
    let mut idx: Vec<usize> = (0..CLASSES).collect();
    // stable sort keeps designation order among equal scores
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.into_iter().map(|i| TechniqueId::ALL[i]).collect()
}

fn mean_loss(w: &[Vec<f64>], xs: &[Vec<f64>], ys: &[usize], idx: &[usize], l2: f64) -> f64 {
    let ce: f64 = idx
        .iter()
        .map(|&i| -softmax(&logits(w, &xs[i]))[ys[i]].max(1e-300).ln())
        .sum::<f64>()
        / idx.len().max(1) as f64;
    let reg: f64 = w.iter().map(|r| r[..FEATURE_LEN].iter().map(|v| v * v).sum::<f64>()).sum();
    ce + 0.5 * l2 * reg
}

fn top1(w: &[Vec<f64>], xs: &[Vec<f64>], ys: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let hits = idx
        .iter()
        .filter(|&&i| rank(&logits(w, &xs[i]))[0].index() == ys[i])
        .count();
    hits as f64 / idx.len() as f64
}

impl SelectorModel {
    pub fn train(labeled: &[(FeatureVector, TechniqueId)], params: &TrainParams) -> Result<Self> {
        Self::train_with_report(labeled, params).map(|(m, _)| m)
    }

    /// Multinomial logistic regression by mini-batch gradient descent. The returned snapshot is the
    /// epoch with the best held-out top-1 accuracy, later epochs winning ties.
    pub fn train_with_report(labeled: &[(FeatureVector, TechniqueId)], params: &TrainParams) -> Result<(Self, TrainReport)> {
        if labeled.is_empty() {
            return Err(Error::InvalidInput("no training data".into()));
        }
        let first = labeled[0].1;
        if labeled.iter().all(|(_, t)| *t == first) {
            return Err(Error::SingleClass);
        }
        if params.batch_size == 0 || !(params.learning_rate > 0.0) || !(params.l2 >= 0.0) {
            return Err(Error::InvalidInput(format!("invalid training parameters: {params:?}")));
        }

        let normalization = Normalization::fit(&labeled.iter().map(|(f, _)| f).collect::<Vec<_>>());
        let xs: Vec<Vec<f64>> = labeled.iter().map(|(f, _)| normalization.apply(f)).collect();
        let ys: Vec<usize> = labeled.iter().map(|(_, t)| t.index()).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..labeled.len()).collect();
        order.shuffle(&mut rng);
        let n_hold = (labeled.len() as f64 * params.holdout_fraction).round() as usize;
        let (holdout, mut train): (Vec<usize>, Vec<usize>) = if n_hold == 0 || labeled.len() - n_hold < 2 {
            (Vec::new(), order.clone())
        } else {
            (order[..n_hold].to_vec(), order[n_hold..].to_vec())
        };
        // with no held-out data the snapshot is chosen on the training data
        let select: Vec<usize> = if holdout.is_empty() { train.clone() } else { holdout.clone() };

        let mut w = vec![vec![0.0; WIDTH]; CLASSES];
        let mut best_w = w.clone();
        let mut best_acc = top1(&w, &xs, &ys, &select);
        let mut best_epoch = 0;
        let mut history = Vec::with_capacity(params.epochs);

        for epoch in 1..=params.epochs {
            train.shuffle(&mut rng);
            for batch in train.chunks(params.batch_size) {
                let mut grad = vec![vec![0.0; WIDTH]; CLASSES];
                for &i in batch {
                    let p = softmax(&logits(&w, &xs[i]));
                    for (c, g) in grad.iter_mut().enumerate() {
                        let err = p[c] - if c == ys[i] { 1.0 } else { 0.0 };
                        for (gj, xj) in g[..FEATURE_LEN].iter_mut().zip(&xs[i]) {
                            *gj += err * xj;
                        }
                        g[FEATURE_LEN] += err;
                    }
                }
                let scale = 1.0 / batch.len() as f64;
                for (row, g) in w.iter_mut().zip(&grad) {
                    for j in 0..WIDTH {
                        let reg = if j < FEATURE_LEN { params.l2 * row[j] } else { 0.0 };
                        row[j] -= params.learning_rate * (g[j] * scale + reg);
                    }
                }
            }
            history.push(mean_loss(&w, &xs, &ys, &train, params.l2));
            let acc = top1(&w, &xs, &ys, &select);
            if acc >= best_acc {
                best_acc = acc;
                best_w = w.clone();
                best_epoch = epoch;
            }
        }

        let model = Self {
            version: MODEL_VERSION,
            seed: params.seed,
            feature_spec_hash: feature_spec_hash(),
            normalization,
            weights: best_w,
        };
        model.validate()?;
        Ok((
            model,
            TrainReport {
                loss_history: history,
                best_epoch,
                best_holdout_top1: best_acc,
                holdout_size: holdout.len(),
            },
        ))
    }

    /// Softmax probabilities in designation order.
    pub fn probabilities(&self, f: &FeatureVector) -> [f64; CLASSES] {
        softmax(&logits(&self.weights, &self.normalization.apply(f)))
    }

    /// All thirteen techniques, most probable first; equal scores keep designation order.
    pub fn predict_ranked(&self, f: &FeatureVector) -> Vec<TechniqueId> {
        rank(&logits(&self.weights, &self.normalization.apply(f)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::ModelMismatch(format!(
                "model version {} is not the supported version {MODEL_VERSION}",
                self.version
            )));
        }
        if self.feature_spec_hash != feature_spec_hash() {
            return Err(Error::ModelMismatch(
                "model was trained on a different feature layout".into(),
            ));
        }
        let norm = &self.normalization;
        let shapes_ok = self.weights.len() == CLASSES
            && self.weights.iter().all(|r| r.len() == WIDTH)
            && norm.mean.len() == FEATURE_LEN
            && norm.std.len() == FEATURE_LEN
            && norm.active.len() == FEATURE_LEN;
        if !shapes_ok {
            return Err(Error::ModelMismatch("model dimensions do not match the feature layout".into()));
        }
        let finite = self.weights.iter().flatten().chain(&norm.mean).chain(&norm.std).all(|v| v.is_finite());
        let stds_ok = norm.std.iter().zip(&norm.active).all(|(&s, &a)| !a || s > 0.0);
        if !finite || !stds_ok {
            return Err(Error::ModelMismatch("model contains non-finite weights or zero deviations".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(Error::file(path))?)
    }
}

/// Runs only the top-ranked technique. If it fails, the fallback technique is used instead.
pub fn adaptive_mask(img: &Raster, model: &SelectorModel, seed: u64) -> Result<(SkyMask, TechniqueId)> {
    let choice = model.predict_ranked(&extract_features(img))[0];
    match choice.apply(img, seed) {
        Ok(m) => Ok((m, choice)),
        Err(e) if choice != FALLBACK_TECHNIQUE => {
            log::warn!("{choice} failed ({e}); falling back to {FALLBACK_TECHNIQUE}");
            FALLBACK_TECHNIQUE.apply(img, seed).map(|m| (m, FALLBACK_TECHNIQUE))
        }
        Err(e) => Err(e),
    }
}
