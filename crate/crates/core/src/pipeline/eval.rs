//! Grouped metrics over results rows and their text/CSV rendering.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::results::ResultRow;
use crate::error::Result;
use crate::metrics::{macro_prf1, series_stats, Confusion, Prf1, SeriesStats};

/// Metrics for one technique on one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBlock {
    pub technique: String,
    pub source: String,
    pub images: usize,
    pub errors: usize,
    pub rmse: f64,
    pub r2: f64,
    pub d: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl EvalBlock {
    pub fn series(&self) -> SeriesStats {
        SeriesStats { rmse: self.rmse, r2: self.r2, d: self.d }
    }

    pub fn prf1(&self) -> Prf1 {
        Prf1 { precision: self.precision, recall: self.recall, f1: self.f1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub blocks: Vec<EvalBlock>,
}

fn first_seen(list: &mut Vec<String>, v: &str) -> usize {
    match list.iter().position(|x| x == v) {
        Some(i) => i,
        None => {
            list.push(v.to_string());
            list.len() - 1
        }
    }
}

/// Groups rows by technique and source tag (both in order of first appearance). Error rows are counted
/// but not scored; a group with no scorable rows is omitted with a warning.
pub fn evaluate(rows: &[ResultRow]) -> EvalReport {
    let mut techniques = Vec::new();
    let mut sources = Vec::new();
    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<&ResultRow>> = Default::default();
    for r in rows {
        let t = first_seen(&mut techniques, &r.technique);
        let s = first_seen(&mut sources, r.source_tag());
        groups.entry((t, s)).or_default().push(r);
    }
    let mut blocks = Vec::new();
    for ((t, s), members) in groups {
        let ok: Vec<&&ResultRow> = members.iter().filter(|r| !r.is_error()).collect();
        let errors = members.len() - ok.len();
        if ok.is_empty() {
            log::warn!("no scorable rows for {} on {}; group omitted", techniques[t], sources[s]);
            continue;
        }
        let pred: Vec<f64> = ok.iter().map(|r| r.pred_frac).collect();
        let obs: Vec<f64> = ok.iter().map(|r| r.obs_frac).collect();
        let series = series_stats(&pred, &obs).expect("equal non-empty series");
        let conf: Vec<Confusion> = ok.iter().map(|r| r.confusion()).collect();
        let prf = macro_prf1(&conf).expect("non-empty group");
        let accuracy = conf.iter().map(Confusion::accuracy).sum::<f64>() / conf.len() as f64;
        blocks.push(EvalBlock {
            technique: techniques[t].clone(),
            source: sources[s].clone(),
            images: ok.len(),
            errors,
            rmse: series.rmse,
            r2: series.r2,
            d: series.d,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            accuracy,
        });
    }
    EvalReport { blocks }
}

impl EvalReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for b in &self.blocks {
            w.serialize(b)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn block(&self, technique: &str, source: &str) -> Option<&EvalBlock> {
        self.blocks.iter().find(|b| b.technique == technique && b.source == source)
    }

    /// Two tables per source: sky-fraction agreement (RMSE, R², d) and pixel classification (P, R, F1).
    pub fn to_text(&self) -> String {
        let mut sources: Vec<&str> = Vec::new();
        for b in &self.blocks {
            if !sources.contains(&b.source.as_str()) {
                sources.push(&b.source);
            }
        }
        let mut out = String::new();
        for s in sources {
            let blocks: Vec<&EvalBlock> = self.blocks.iter().filter(|b| b.source == s).collect();
            let _ = writeln!(out, "Sky fraction agreement: {s}");
            let _ = writeln!(out, "{:<16} {:>6} {:>7} {:>7} {:>7}", "technique", "n", "RMSE", "R2", "d");
            for b in &blocks {
                let _ = writeln!(out, "{:<16} {:>6} {:>7.3} {:>7.3} {:>7.3}", b.technique, b.images, b.rmse, b.r2, b.d);
            }
            let _ = writeln!(out);
            let _ = writeln!(out, "Pixel classification: {s}");
            let _ = writeln!(out, "{:<16} {:>9} {:>7} {:>7} {:>8}", "technique", "precision", "recall", "F1", "accuracy");
            for b in &blocks {
                let _ = writeln!(
                    out,
                    "{:<16} {:>9.3} {:>7.3} {:>7.3} {:>8.3}",
                    b.technique, b.precision, b.recall, b.f1, b.accuracy
                );
            }
            let errors: usize = blocks.iter().map(|b| b.errors).sum();
            if errors > 0 {
                let _ = writeln!(out, "({errors} rows with errors were not scored)");
            }
            let _ = writeln!(out);
        }
        out
    }
}
