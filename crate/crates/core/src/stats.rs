//! Confusion-matrix aggregation, per-subject rates and the statistical
//! comparisons used to contrast ITR definitions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::capacity::{blahut_arimoto, BaConfig};
use crate::channel::{conventional_itr, ChannelMatrix};
use crate::error::{Error, Result};

/// Classification counts: `counts[i][j]` test trials of class `i` decided
/// as class `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRecord {
    counts: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

impl ConfusionRecord {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let m = counts.len();
        if m < 2 {
            return Err(Error::ChannelTooSmall { rows: m, cols: counts.first().map_or(0, Vec::len) });
        }
        if let Some(r) = counts.iter().position(|r| r.len() != m) {
            return Err(Error::NotSquare { rows: m, cols: counts[r].len() });
        }
        if counts.iter().all(|r| r.iter().all(|&c| c == 0)) {
            return Err(Error::Degenerate("confusion matrix has no counts".into()));
        }
        Ok(Self { counts, subject: None, window_s: None, gaze_s: None, method: None })
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }

    pub fn with_window(mut self, window_s: f64) -> Self {
        self.window_s = Some(window_s);
        self
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Fraction of all trials on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.classes()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total() as f64
    }

    /// Re-validates after deserialization.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.counts.clone()).map(|_| ())
    }
}

/// Row-normalized confusion counts. A class without test trials is an
/// error.
pub fn normalize_confusion(c: &ConfusionRecord) -> Result<ChannelMatrix<f64>> {
    let rows = c
        .counts
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s: u64 = r.iter().sum();
            if s == 0 {
                return Err(Error::EmptyConfusionRow { class: i });
            }
            Ok(r.iter().map(|&x| x as f64 / s as f64).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ChannelMatrix::from_rows(rows)
}

/// Row normalization after adding `alpha` to every count.
pub fn normalize_confusion_smoothed(c: &ConfusionRecord, alpha: f64) -> Result<ChannelMatrix<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config { key: "alpha".into(), reason: format!("{alpha} is not a positive pseudo-count") });
    }
    let m = c.classes() as f64;
    let rows = c
        .counts
        .iter()
        .map(|r| {
            let s = r.iter().sum::<u64>() as f64 + alpha * m;
            r.iter().map(|&x| (x as f64 + alpha) / s).collect()
        })
        .collect();
    ChannelMatrix::from_rows(rows)
}

/// Element-wise sum. Window and method tags must agree where set; the
/// subject tag is dropped unless all records share it.
pub fn pool_confusions(records: &[ConfusionRecord]) -> Result<ConfusionRecord> {
    let first = records.first().ok_or_else(|| Error::Degenerate("nothing to pool".into()))?;
    let m = first.classes();
    let mut counts = vec![vec![0u64; m]; m];
    for r in records {
        if r.classes() != m {
            return Err(Error::DimensionMismatch { expected: m, found: r.classes() });
        }
        let clash = |a: &Option<String>, b: &Option<String>| matches!((a, b), (Some(x), Some(y)) if x != y);
        if matches!((first.window_s, r.window_s), (Some(a), Some(b)) if a != b) {
            return Err(Error::Config { key: "window_s".into(), reason: "records from different windows".into() });
        }
        if clash(&first.method, &r.method) {
            return Err(Error::Config { key: "method".into(), reason: "records from different methods".into() });
        }
        for (acc, row) in counts.iter_mut().zip(&r.counts) {
            for (a, &x) in acc.iter_mut().zip(row) {
                *a += x;
            }
        }
    }
    let same_subject = records.iter().all(|r| r.subject == first.subject);
    Ok(ConfusionRecord {
        counts,
        subject: if same_subject { first.subject.clone() } else { None },
        window_s: records.iter().find_map(|r| r.window_s),
        gaze_s: records.iter().find_map(|r| r.gaze_s),
        method: records.iter().find_map(|r| r.method.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItrMode {
    /// Symmetric-channel formula at the record's accuracy.
    Conventional,
    /// `(60/T)` times the capacity of the normalized confusion.
    Capacity,
}

/// One rate in bits/min per record, each over `period_s` seconds per
/// selection.
pub fn per_subject_itr(records: &[ConfusionRecord], mode: ItrMode, period_s: f64) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            let p = normalize_confusion(r)?;
            match mode {
                ItrMode::Conventional => {
                    let acc = p.diagonal().iter().sum::<f64>() / p.inputs() as f64;
                    Ok(conventional_itr(p.inputs(), acc, period_s)?.bits_per_min)
                }
                ItrMode::Capacity => {
                    if !(period_s > 0.0) {
                        return Err(Error::Domain(format!("period {period_s} s is not positive")));
                    }
                    Ok(60.0 / period_s * blahut_arimoto(&p, &BaConfig::default())?.capacity)
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Two,
    /// Alternative: `mean(a - b) > 0`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Rejection threshold for `|t|` (two-tailed) or `t` (right) at 5%.
    pub critical: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn students_t(df: f64) -> Result<StudentsT> {
    StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Domain(e.to_string()))
}

/// Paired t-test on `a - b` with `n - 1` degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64], tail: Tail) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientTrials { needed: 2, found: a.len() });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (md, vd) = mean_var(&d);
    if !(vd > 0.0) {
        return Err(Error::Degenerate("paired differences have zero variance".into()));
    }
    let n = d.len() as f64;
    let t = md / (vd / n).sqrt();
    let df = n - 1.0;
    let dist = students_t(df)?;
    let (p, critical) = match tail {
        Tail::Two => ((2.0 * dist.sf(t.abs())).min(1.0), dist.inverse_cdf(0.975)),
        Tail::Right => (dist.sf(t), dist.inverse_cdf(0.95)),
    };
    Ok(TTest { t, df, p, critical })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTest {
    pub f: f64,
    pub df1: f64,
    pub df2: f64,
    /// `2 min(P(F ≤ f), P(F ≥ f))`, capped at one.
    pub p_two: f64,
    /// `P(F ≥ f)`.
    pub p_upper: f64,
    /// `P(F ≤ f)`.
    pub p_lower: f64,
}

/// Variance-ratio test `F = var(a) / var(b)`.
pub fn variance_f_test(a: &[f64], b: &[f64]) -> Result<FTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientTrials { needed: 2, found: a.len().min(b.len()) });
    }
    let (_, va) = mean_var(a);
    let (_, vb) = mean_var(b);
    if !(vb > 0.0) {
        return Err(Error::Degenerate("denominator sample has zero variance".into()));
    }
    let f = va / vb;
    let (df1, df2) = ((a.len() - 1) as f64, (b.len() - 1) as f64);
    let dist = FisherSnedecor::new(df1, df2).map_err(|e| Error::Domain(e.to_string()))?;
    let p_lower = dist.cdf(f);
    let p_upper = dist.sf(f);
    Ok(FTest { f, df1, df2, p_two: (2.0 * p_lower.min(p_upper)).min(1.0), p_upper, p_lower })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionModel {
    /// `y = slope x + intercept`
    Linear,
    /// `y = slope ln x + intercept`
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub model: RegressionModel,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        let u = match self.model {
            RegressionModel::Linear => x,
            RegressionModel::Logarithmic => x.ln(),
        };
        self.slope * u + self.intercept
    }
}

/// Ordinary least squares on `(x, y)` or `(ln x, y)`.
pub fn fit_regression(x: &[f64], y: &[f64], model: RegressionModel) -> Result<RegressionFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::InsufficientTrials { needed: 3, found: x.len() });
    }
    let u: Vec<f64> = match model {
        RegressionModel::Linear => x.to_vec(),
        RegressionModel::Logarithmic => {
            if let Some(v) = x.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::Domain(format!("logarithmic model needs x > 0, got {v}")));
            }
            x.iter().map(|v| v.ln()).collect()
        }
    };
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let suu: f64 = u.iter().map(|v| (v - mu) * (v - mu)).sum();
    if !(suu > 0.0) {
        return Err(Error::Degenerate("regressor is constant".into()));
    }
    let suy: f64 = u.iter().zip(y).map(|(a, b)| (a - mu) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = suy / suu;
    let intercept = my - slope * mu;
    let r_squared = if syy > 0.0 { (suy * suy / (suu * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RegressionFit { model, slope, intercept, r_squared })
}

/// Ranks from 1 with ties sharing their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    crate::sim::pearson(&ranks(x), &ranks(y))
}
