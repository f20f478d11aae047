//! Per-image confusion counts, precision/recall/F1, sky-fraction series statistics and top-k accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::SkyMask;

/// Pixel counts with sky as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 1.0;
        }
        (self.tp + self.tn) as f64 / n as f64
    }

    pub fn predicted_fraction(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        (self.tp + self.fp) as f64 / n as f64
    }

    pub fn observed_fraction(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        (self.tp + self.fn_) as f64 / n as f64
    }
}

pub fn confusion(pred: &SkyMask, truth: &SkyMask) -> Result<Confusion> {
    pred.same_shape(truth.width(), truth.height())?;
    let mut c = Confusion::default();
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1. An empty prediction is perfectly precise only when there was nothing to
/// find; an empty truth is always fully recalled.
pub fn prf1(c: &Confusion) -> Prf1 {
    let precision = if c.tp + c.fp == 0 {
        if c.tp + c.fn_ == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        1.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf1 {
        precision,
        recall,
        f1,
    }
}

/// Agreement between predicted and observed sky fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub rmse: f64,
    /// Squared Pearson correlation.
    pub r2: f64,
    /// Willmott's index of agreement.
    pub d: f64,
}

pub fn series_stats(pred: &[f64], obs: &[f64]) -> Result<SeriesStats> {
    if pred.len() != obs.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} predicted vs {} observed",
            pred.len(),
            obs.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    let n = pred.len() as f64;
    let mean_p = pred.iter().sum::<f64>() / n;
    let mean_o = obs.iter().sum::<f64>() / n;

    let sse: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).powi(2)).sum();
    let rmse = (sse / n).sqrt();

    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, o) in pred.iter().zip(obs) {
        let (dp, d_o) = (p - mean_p, o - mean_o);
        sxy += dp * d_o;
        sxx += dp * dp;
        syy += d_o * d_o;
    }
    let r2 = if sxx > 0.0 && syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let potential: f64 = pred
        .iter()
        .zip(obs)
        .map(|(p, o)| ((p - mean_o).abs() + (o - mean_o).abs()).powi(2))
        .sum();
    let d = if potential == 0.0 {
        if sse == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - sse / potential
    };
    Ok(SeriesStats { rmse, r2, d })
}

/// Fraction of items whose label is among the first `k` ranked entries.
pub fn topk_accuracy<T: PartialEq>(ranked: &[Vec<T>], labels: &[T], k: usize) -> f64 {
    if ranked.is_empty() {
        return 0.0;
    }
    let hits = ranked
        .iter()
        .zip(labels)
        .filter(|(r, l)| r.iter().take(k).any(|x| x == *l))
        .count();
    hits as f64 / ranked.len() as f64
}

/// Arithmetic mean of per-image precision, recall and F1.
pub fn macro_prf1(items: &[Confusion]) -> Option<Prf1> {
    if items.is_empty() {
        return None;
    }
    let n = items.len() as f64;
    let (p, r, f) = items.iter().map(prf1).fold((0.0, 0.0, 0.0), |(p, r, f), x| {
        (p + x.precision, r + x.recall, f + x.f1)
    });
    Some(Prf1 {
        precision: p / n,
        recall: r / n,
        f1: f / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_basics() {
        let t = SkyMask::from_fn(4, 3, |x, y| x > y);
        let c = confusion(&t, &t).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let all = SkyMask::filled(4, 3, true);
        let none = SkyMask::filled(4, 3, false);
        let c = confusion(&all, &none).unwrap();
        assert_eq!(c.fp, 12);
        assert_eq!(c.total(), 12);
        assert!(confusion(&all, &SkyMask::filled(3, 4, true)).is_err());
    }

    #[test]
    fn prf1_examples() {
        let perfect = Confusion { tp: 10, fp: 0, tn: 5, fn_: 0 };
        assert_eq!(prf1(&perfect), Prf1 { precision: 1.0, recall: 1.0, f1: 1.0 });
        let half = prf1(&Confusion { tp: 50, fp: 50, tn: 0, fn_: 0 });
        assert_eq!((half.precision, half.recall), (0.5, 1.0));
        assert!((half.f1 - 2.0 / 3.0).abs() < 1e-15);
        let empty = prf1(&Confusion { tp: 0, fp: 0, tn: 9, fn_: 0 });
        assert_eq!(empty, Prf1 { precision: 1.0, recall: 1.0, f1: 1.0 });
        let missed = prf1(&Confusion { tp: 0, fp: 0, tn: 3, fn_: 6 });
        assert_eq!(missed, Prf1 { precision: 0.0, recall: 0.0, f1: 0.0 });
    }

    #[test]
    fn series_identity() {
        let o = [0.1, 0.4, 0.35, 0.9];
        let s = series_stats(&o, &o).unwrap();
        assert_eq!(s.rmse, 0.0);
        assert!((s.r2 - 1.0).abs() < 1e-15);
        assert_eq!(s.d, 1.0);
    }

    #[test]
    fn constant_at_observed_mean_gives_zero_d() {
        let o = [0.1, 0.4, 0.35, 0.9, 0.05];
        let m = o.iter().sum::<f64>() / o.len() as f64;
        let p = vec![m; o.len()];
        let s = series_stats(&p, &o).unwrap();
        assert_eq!(s.d, 0.0);
        assert_eq!(s.r2, 0.0);
    }

    #[test]
    fn d_centres_on_observations() {
        let p = [0.2, 0.8, 0.5];
        let o = [0.1, 0.3, 0.2];
        let a = series_stats(&p, &o).unwrap();
        let b = series_stats(&o, &p).unwrap();
        assert!((a.rmse - b.rmse).abs() < 1e-15);
        assert!((a.d - b.d).abs() > 1e-3);
    }

    #[test]
    fn series_errors() {
        assert!(series_stats(&[], &[]).is_err());
        assert!(series_stats(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn topk() {
        let ranked = vec![vec![1, 2, 3], vec![2, 1, 3], vec![3, 2, 1]];
        assert_eq!(topk_accuracy(&ranked, &[1, 2, 3], 1), 1.0);
        assert_eq!(topk_accuracy(&ranked, &[3, 3, 2], 1), 0.0);
        let labels = [2, 3, 2];
        assert!(topk_accuracy(&ranked, &labels, 3) >= topk_accuracy(&ranked, &labels, 1));
        assert_eq!(topk_accuracy(&ranked, &labels, 2), 2.0 / 3.0);
    }
}
