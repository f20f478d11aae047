//! Batch runs over a manifest and the results CSV they produce.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::metrics::{confusion, Confusion};
use crate::raster::{MaskConvention, SkyMask};
use crate::selector::{adaptive_mask, best_technique, extract_features, score_techniques, FeatureVector, SelectorModel};
use crate::technique::{apply_all, Technique, TechniqueId};

pub const RESULTS_HEADER: &str = "image,technique,pred_frac,obs_frac,tp,fp,tn,fn,ms,error";
pub const ADAPTIVE_NAME: &str = "Adaptive";

/// One technique applied to one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub image: String,
    pub technique: String,
    pub pred_frac: f64,
    pub obs_frac: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub ms: u64,
    pub error: String,
}

impl ResultRow {
    pub fn scored(image: String, technique: &str, c: &Confusion, ms: u64) -> Self {
        Self {
            image,
            technique: technique.to_string(),
            pred_frac: c.predicted_fraction(),
            obs_frac: c.observed_fraction(),
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            ms,
            error: String::new(),
        }
    }

    pub fn failed(image: String, technique: &str, err: &Error) -> Self {
        Self {
            image,
            technique: technique.to_string(),
            pred_frac: 0.0,
            obs_frac: 0.0,
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
            ms: 0,
            error: err.to_string(),
        }
    }

    pub fn is_error(&self) -> bool {
        !self.error.is_empty()
    }

    pub fn confusion(&self) -> Confusion {
        Confusion {
            tp: self.tp,
            fp: self.fp,
            tn: self.tn,
            fn_: self.fn_,
        }
    }

    /// Part of the image id before the first `/`.
    pub fn source_tag(&self) -> &str {
        self.image.split('/').next().unwrap_or("")
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(RESULTS_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(std::fs::File::open(path).map_err(Error::file(path))?);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(Error::InvalidInput(format!(
            "{} does not have the results header `{RESULTS_HEADER}`",
            path.display()
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Knobs shared by every batch run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub workers: usize,
    /// Record wall-clock milliseconds; otherwise `ms` is 0 so reruns are byte-identical.
    pub timing: bool,
    pub mask_convention: Option<MaskConvention>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 17,
            workers: 1,
            timing: false,
            mask_convention: None,
        }
    }
}

/// Maps entries in parallel on `workers` threads, keeping manifest order.
fn for_each_entry<T: Send>(manifest: &Manifest, opts: &RunOptions, f: impl Fn(&ManifestEntry) -> T + Sync) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| manifest.entries.par_iter().map(&f).collect()))
}

fn timed<T>(timing: bool, f: impl FnOnce() -> T) -> (T, u64) {
    let start = Instant::now();
    let out = f();
    let ms = if timing { start.elapsed().as_millis() as u64 } else { 0 };
    (out, ms)
}

fn score(image: String, name: &str, mask: Result<SkyMask>, truth: &SkyMask, ms: u64) -> ResultRow {
    match mask.and_then(|m| confusion(&m, truth)) {
        Ok(c) => ResultRow::scored(image, name, &c, ms),
        Err(e) => ResultRow::failed(image, name, &e),
    }
}

/// One row per entry. Unreadable or mismatched files give a flagged row and the run continues.
pub fn run_technique(manifest: &Manifest, technique: Technique, opts: &RunOptions) -> Result<Vec<ResultRow>> {
    for_each_entry(manifest, opts, |e| {
        let id = e.image_id();
        match e.load_pair(opts.mask_convention) {
            Ok((img, truth)) => {
                let (mask, ms) = timed(opts.timing, || technique.apply(&img, opts.seed));
                score(id, technique.name(), mask, &truth, ms)
            }
            Err(err) => ResultRow::failed(id, technique.name(), &err),
        }
    })
}

/// Fourteen rows per entry: the thirteen variants in designation order, then the benchmark.
/// The six Sobel thresholds share one boundary analysis, so their `ms` is that of the shared run.
pub fn run_all(manifest: &Manifest, opts: &RunOptions) -> Result<Vec<ResultRow>> {
    let nested = for_each_entry(manifest, opts, |e| {
        let id = e.image_id();
        let techniques = Technique::all();
        match e.load_pair(opts.mask_convention) {
            Ok((img, truth)) => {
                let (masks, ms) = timed(opts.timing, || apply_all(&img, opts.seed));
                let per = ms / TechniqueId::COUNT as u64;
                let mut rows: Vec<ResultRow> = masks
                    .into_iter()
                    .zip(TechniqueId::ALL)
                    .map(|(m, t)| score(id.clone(), t.name(), m, &truth, per))
                    .collect();
                let (ff, ms) = timed(opts.timing, || Technique::SobelFloodFill.apply(&img, opts.seed));
                rows.push(score(id, Technique::SobelFloodFill.name(), ff, &truth, ms));
                rows
            }
            Err(err) => techniques.iter().map(|t| ResultRow::failed(id.clone(), t.name(), &err)).collect(),
        }
    })?;
    Ok(nested.into_iter().flatten().collect())
}

/// Technique chosen for one image by the selector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingRow {
    pub image: String,
    pub technique: String,
}

pub fn run_adaptive(manifest: &Manifest, model: &SelectorModel, opts: &RunOptions) -> Result<(Vec<ResultRow>, Vec<RoutingRow>)> {
    let pairs = for_each_entry(manifest, opts, |e| {
        let id = e.image_id();
        let (row, chosen) = match e.load_pair(opts.mask_convention) {
            Ok((img, truth)) => {
                let (out, ms) = timed(opts.timing, || adaptive_mask(&img, model, opts.seed));
                match out {
                    Ok((mask, t)) => (score(id.clone(), ADAPTIVE_NAME, Ok(mask), &truth, ms), t.name().to_string()),
                    Err(err) => (ResultRow::failed(id.clone(), ADAPTIVE_NAME, &err), String::new()),
                }
            }
            Err(err) => (ResultRow::failed(id.clone(), ADAPTIVE_NAME, &err), String::new()),
        };
        (row, RoutingRow { image: id, technique: chosen })
    })?;
    Ok(pairs.into_iter().unzip())
}

pub fn write_routing(path: &Path, rows: &[RoutingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["image", "technique"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One line of a labels file: features, per-technique accuracy and the winning technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub image: String,
    pub label: TechniqueId,
    pub scores: Vec<f64>,
    pub features: FeatureVector,
}

/// Labels every readable entry; unreadable ones are skipped with a warning.
pub fn label_manifest(manifest: &Manifest, opts: &RunOptions) -> Result<Vec<LabelRecord>> {
    let out = for_each_entry(manifest, opts, |e| -> Result<LabelRecord> {
        let (img, truth) = e.load_pair(opts.mask_convention)?;
        let scores = score_techniques(&img, &truth, opts.seed)?;
        Ok(LabelRecord {
            image: e.image_id(),
            label: best_technique(&scores),
            scores: scores.to_vec(),
            features: extract_features(&img),
        })
    })?;
    let mut records = Vec::with_capacity(out.len());
    for (r, e) in out.into_iter().zip(&manifest.entries) {
        match r {
            Ok(r) => records.push(r),
            Err(err) => log::warn!("skipping {}: {err}", e.image_id()),
        }
    }
    Ok(records)
}

pub fn write_labels(path: &Path, records: &[LabelRecord]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    std::fs::read_to_string(path)
        .map_err(Error::file(path))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
