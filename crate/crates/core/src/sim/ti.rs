//! Correlation-based target identification and leave-one-trial-out
//! evaluation.

use serde::{Deserialize, Serialize};

use super::dataset::TrialDataset;
use super::filterbank::{check_filter_bank, filter_bank_decompose, FilterBankSpec};
use super::spatial::{center, sscor_weights, template, trca_weights, Trial};
use crate::error::{Error, Result};
use crate::stats::ConfusionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Trca,
    Sscor,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Trca => "trca",
            Algorithm::Sscor => "sscor",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "trca" => Ok(Algorithm::Trca),
            "sscor" => Ok(Algorithm::Sscor),
            other => Err(Error::Config { key: "method".into(), reason: format!("unknown algorithm `{other}`") }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub algorithm: Algorithm,
    pub ensemble: bool,
    pub filter_bank: FilterBankSpec,
}

impl Method {
    pub fn new(algorithm: Algorithm, ensemble: bool) -> Self {
        Self { algorithm, ensemble, filter_bank: FilterBankSpec::passthrough() }
    }

    pub fn label(&self) -> String {
        let mut s = self.algorithm.to_string();
        if self.ensemble {
            s.insert(0, 'e');
        }
        if !self.filter_bank.is_passthrough() {
            s.push_str(&format!("-fb{}", self.filter_bank.n_bands()));
        }
        s
    }
}

/// Per-class spatial filters and templates for one band.
#[derive(Debug, Clone)]
pub struct SpatialFilters {
    pub weights: Vec<Vec<f64>>,
    pub templates: Vec<Trial>,
    /// Largest `|S w - λ Q w|` over classes; `None` for SSCOR.
    pub max_residual: Option<f64>,
    pub regularized: bool,
}

/// Trains one filter per class from `trials[class][trial]`.
pub fn train(trials: &[Vec<Trial>], algorithm: Algorithm) -> Result<SpatialFilters> {
    let mut weights = Vec::with_capacity(trials.len());
    let mut templates = Vec::with_capacity(trials.len());
    let mut max_residual: Option<f64> = None;
    let mut regularized = false;
    for class in trials {
        match algorithm {
            Algorithm::Trca => {
                let f = trca_weights(class)?;
                let r = f.residual();
                max_residual = Some(max_residual.map_or(r, |m| m.max(r)));
                regularized |= f.regularized;
                weights.push(f.w);
            }
            Algorithm::Sscor => {
                let f = sscor_weights(class)?;
                regularized |= f.regularized;
                weights.push(f.w_template);
            }
        }
        let centered: Vec<Trial> = class.iter().map(center).collect();
        templates.push(template(&centered));
    }
    Ok(SpatialFilters { weights, templates, max_residual, regularized })
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

fn project(x: &Trial, w: &[f64]) -> Vec<f64> {
    let ns = x[0].len();
    (0..ns).map(|t| x.iter().zip(w).map(|(ch, &wc)| wc * ch[t]).sum()).collect()
}

/// Correlation of the test trial with every class template. Ensemble mode
/// projects both through all class filters and correlates the stacked
/// projections.
pub fn correlations(test: &Trial, filters: &SpatialFilters, ensemble: bool) -> Result<Vec<Option<f64>>> {
    let nc = filters.weights.first().map_or(0, Vec::len);
    if test.len() != nc {
        return Err(Error::DimensionMismatch { expected: nc, found: test.len() });
    }
    let test = center(test);
    let stacked_test: Option<Vec<f64>> =
        ensemble.then(|| filters.weights.iter().flat_map(|w| project(&test, w)).collect());
    Ok(filters
        .templates
        .iter()
        .zip(&filters.weights)
        .map(|(tmpl, w)| match &stacked_test {
            Some(st) => {
                let stacked: Vec<f64> = filters.weights.iter().flat_map(|wk| project(tmpl, wk)).collect();
                pearson(st, &stacked)
            }
            None => pearson(&project(&test, w), &project(tmpl, w)),
        })
        .collect())
}

/// `Σ_b weight_b ρ_b²`.
pub fn combine_subbands(rho: &[f64], weights: &[f64]) -> Result<f64> {
    if rho.is_empty() {
        return Err(Error::Config { key: "bands".into(), reason: "no sub-band correlations".into() });
    }
    if rho.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), found: rho.len() });
    }
    Ok(rho.iter().zip(weights).map(|(r, w)| w * r * r).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: usize,
    /// Combined score per class; classes with an undefined correlation in
    /// any band score `-inf`.
    pub scores: Vec<f64>,
    /// Classes excluded for a zero-variance projection.
    pub excluded: Vec<usize>,
}

/// Argmax with ties to the lowest index.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Classifies one test trial given per-band filters and per-band copies of
/// the trial. With a single band the score is the correlation itself.
pub fn classify(test_bands: &[Trial], bands: &[SpatialFilters], weights: &[f64], ensemble: bool) -> Result<Classification> {
    if test_bands.len() != bands.len() || bands.is_empty() {
        return Err(Error::DimensionMismatch { expected: bands.len(), found: test_bands.len() });
    }
    let n_classes = bands[0].weights.len();
    let per_band: Vec<Vec<Option<f64>>> =
        test_bands.iter().zip(bands).map(|(t, f)| correlations(t, f, ensemble)).collect::<Result<_>>()?;
    let mut scores = Vec::with_capacity(n_classes);
    let mut excluded = Vec::new();
    for n in 0..n_classes {
        let rho: Option<Vec<f64>> = per_band.iter().map(|b| b[n]).collect();
        match rho {
            None => {
                excluded.push(n);
                scores.push(f64::NEG_INFINITY);
            }
            Some(r) if r.len() == 1 => scores.push(r[0]),
            Some(r) => scores.push(combine_subbands(&r, weights)?),
        }
    }
    Ok(Classification { class: argmax(&scores), scores, excluded })
}

#[derive(Debug, Clone)]
pub struct LotoOutcome {
    pub confusion: ConfusionRecord,
    /// Largest TRCA generalized-eigen residual over folds, bands and
    /// classes.
    pub max_residual: Option<f64>,
    /// Folds whose covariances needed the ridge.
    pub regularized_folds: usize,
    /// Test trials where at least one class was excluded.
    pub excluded_tests: usize,
}

/// `bands[b][class][trial]`, cropped to the post-latency window.
fn preprocess(ds: &TrialDataset, spec: &FilterBankSpec) -> Result<Vec<Vec<Vec<Trial>>>> {
    check_filter_bank(spec, ds.sample_rate)?;
    let skip = ds.latency_samples();
    let nb = spec.n_bands();
    let mut out = vec![vec![Vec::with_capacity(ds.n_trials); ds.n_classes]; nb];
    for c in 0..ds.n_classes {
        for h in 0..ds.n_trials {
            let split = filter_bank_decompose(&ds.trial(c, h), spec, ds.sample_rate)?;
            for (b, x) in split.into_iter().enumerate() {
                out[b][c].push(x.into_iter().map(|ch| ch[skip..].to_vec()).collect());
            }
        }
    }
    Ok(out)
}

/// Predictions, worst residual, ridge flag and excluded-test count of one fold.
type Fold = (Vec<usize>, Option<f64>, bool, usize);

/// Leave-one-trial-out: fold `h` trains on every trial except trial `h` of
/// each class and tests trial `h` of each class. Folds run in parallel.
pub fn evaluate_loto(ds: &TrialDataset, method: &Method) -> Result<LotoOutcome> {
    if ds.n_trials < 3 {
        return Err(Error::InsufficientTrials { needed: 3, found: ds.n_trials });
    }
    let bands = preprocess(ds, &method.filter_bank)?;
    let folds: Vec<Result<Fold>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..ds.n_trials)
            .map(|h| {
                let bands = &bands;
                s.spawn(move || -> Result<Fold> {
                    let mut models = Vec::with_capacity(bands.len());
                    for band in bands {
                        let train_set: Vec<Vec<Trial>> = band
                            .iter()
                            .map(|class| class.iter().enumerate().filter(|(k, _)| *k != h).map(|(_, t)| t.clone()).collect())
                            .collect();
                        models.push(train(&train_set, method.algorithm)?);
                    }
                    let residual = models.iter().filter_map(|m| m.max_residual).reduce(f64::max);
                    let regularized = models.iter().any(|m| m.regularized);
                    let mut preds = Vec::with_capacity(ds.n_classes);
                    let mut excluded = 0;
                    for c in 0..ds.n_classes {
                        let test: Vec<Trial> = bands.iter().map(|b| b[c][h].clone()).collect();
                        let r = classify(&test, &models, &method.filter_bank.weights, method.ensemble)?;
                        excluded += usize::from(!r.excluded.is_empty());
                        preds.push(r.class);
                    }
                    Ok((preds, residual, regularized, excluded))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("fold thread panicked")).collect()
    });

    let m = ds.n_classes;
    let mut counts = vec![vec![0u64; m]; m];
    let mut max_residual: Option<f64> = None;
    let mut regularized_folds = 0;
    let mut excluded_tests = 0;
    for fold in folds {
        let (preds, residual, regularized, excluded) = fold?;
        for (c, p) in preds.into_iter().enumerate() {
            counts[c][p] += 1;
        }
        if let Some(r) = residual {
            max_residual = Some(max_residual.map_or(r, |x| x.max(r)));
        }
        regularized_folds += usize::from(regularized);
        excluded_tests += excluded;
    }
    let mut confusion = ConfusionRecord::new(counts)?;
    confusion.window_s = Some(ds.window_s);
    confusion.method = Some(method.label());
    Ok(LotoOutcome { confusion, max_residual, regularized_folds, excluded_tests })
}
