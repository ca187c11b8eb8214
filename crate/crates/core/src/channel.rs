//! Probability vectors, channel transition matrices and the basic
//! information measures built on them.
//!
//! All logarithms are base 2 and `0 · log 0` is taken as 0, so every
//! quantity is reported in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{xlog2x, Real};

/// Probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution<T> {
    probs: Vec<T>,
}

impl<T: Real> Distribution<T> {
    /// Validates `probs`. Sums off by more than rounding but within
    /// [`Real::NORMALIZATION_TOLERANCE`] of one are renormalized; larger
    /// deviations are rejected.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for (index, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < T::zero() {
                return Err(Error::InvalidProbability { index, value: p.as_f64() });
            }
        }
        let sum: T = probs.iter().copied().sum();
        if (sum - T::one()).abs().as_f64() > T::NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized { sum: sum.as_f64() });
        }
        let rounding = T::epsilon() * T::lit(probs.len() as f64);
        let probs = if (sum - T::one()).abs() <= rounding { probs } else { probs.into_iter().map(|p| p / sum).collect() };
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDistribution);
        }
        Ok(Self { probs: vec![T::one() / T::lit(n as f64); n] })
    }

    /// Point mass on `index`.
    pub fn point(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::DimensionMismatch { expected: n, found: index + 1 });
        }
        let mut probs = vec![T::zero(); n];
        probs[index] = T::one();
        Ok(Self { probs })
    }

    /// Binary distribution `(p, 1 - p)`.
    pub fn binary(p: T) -> Result<Self> {
        Self::new(vec![p, T::one() - p])
    }

    /// Scales arbitrary nonnegative weights to sum to one.
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        let sum: T = weights.iter().copied().sum();
        if !(sum > T::zero()) || !sum.is_finite() {
            return Err(Error::Degenerate("weights do not have positive finite sum".into()));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    // Callers guarantee nonnegativity and unit sum up to rounding.
    pub(crate) fn from_normalized_unchecked(probs: Vec<T>) -> Self {
        Self { probs }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probs
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.probs.iter().zip(&other.probs).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

impl<T> std::ops::Index<usize> for Distribution<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.probs[i]
    }
}

/// Row-stochastic transition matrix `p[i][j] = P(y_j | x_i)`.
///
/// Inputs index rows (`M`), outputs index columns (`N`). `N` may exceed
/// `M`, e.g. by one when the outputs include an erasure symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMatrix<T> {
    inputs: usize,
    outputs: usize,
    entries: Vec<T>,
}

impl<T: Real> ChannelMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let inputs = rows.len();
        let outputs = rows.first().map_or(0, Vec::len);
        if inputs < 2 || outputs < 2 {
            return Err(Error::ChannelTooSmall { rows: inputs, cols: outputs });
        }
        let mut entries = Vec::with_capacity(inputs * outputs);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != outputs {
                return Err(Error::InvalidRow {
                    row,
                    reason: format!("expected {outputs} entries, found {}", r.len()),
                });
            }
            let d = Distribution::new(r).map_err(|e| Error::InvalidRow { row, reason: e.to_string() })?;
            entries.extend(d.into_vec());
        }
        Ok(Self { inputs, outputs, entries })
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::from_rows((0..m).map(|i| Distribution::point(m, i).map(Distribution::into_vec)).collect::<Result<_>>()?)
    }

    /// Binary channel with crossover probabilities `p12 = P(y2|x1)` and
    /// `p21 = P(y1|x2)`.
    pub fn binary(p12: T, p21: T) -> Result<Self> {
        Self::from_rows(vec![vec![T::one() - p12, p12], vec![p21, T::one() - p21]])
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: T) -> Result<Self> {
        Self::binary(p, p)
    }

    /// Binary erasure channel: each input is erased with probability `e`.
    pub fn bec(e: T) -> Result<Self> {
        Self::identity(2)?.with_erasures(&[e, e])
    }

    /// Extends the output alphabet with an erasure symbol. Row `i` keeps
    /// `1 - erasure[i]` of its mass; the remainder goes to the new last
    /// column.
    pub fn with_erasures(&self, erasure: &[T]) -> Result<Self> {
        if erasure.len() != self.inputs {
            return Err(Error::DimensionMismatch { expected: self.inputs, found: erasure.len() });
        }
        let rows = (0..self.inputs)
            .map(|i| {
                let e = erasure[i];
                if !(e >= T::zero() && e <= T::one()) {
                    return Err(Error::InvalidRow { row: i, reason: format!("erasure probability {e}") });
                }
                let mut r: Vec<T> = self.row(i).iter().map(|&p| p * (T::one() - e)).collect();
                r.push(e);
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    #[inline]
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.inputs == self.outputs
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.outputs + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.outputs..(i + 1) * self.outputs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.entries.chunks(self.outputs)
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(<[T]>::to_vec).collect()
    }

    /// Diagonal `p[i][i]` for `i < min(M, N)`.
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.inputs.min(self.outputs)).map(|i| self.get(i, i)).collect()
    }

    /// Error probability `1 - Σ px_i p_ii` under input `px`.
    pub fn error_probability(&self, px: &Distribution<T>) -> Result<T> {
        self.check_input(px)?;
        let acc: T = self.diagonal().iter().zip(px.as_slice()).map(|(&d, &p)| d * p).sum();
        Ok((T::one() - acc).max(T::zero()))
    }

    /// Applies `perm` to the input labels: row `i` of the result is row
    /// `perm[i]` of `self`.
    pub fn permute_inputs(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.inputs {
            return Err(Error::DimensionMismatch { expected: self.inputs, found: perm.len() });
        }
        Self::from_rows(perm.iter().map(|&p| self.row(p).to_vec()).collect())
    }

    /// Relabels a square channel consistently on both sides: entry
    /// `(i, j)` of the result is `p[perm[i]][perm[j]]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::NotSquare { rows: self.inputs, cols: self.outputs });
        }
        if perm.len() != self.inputs {
            return Err(Error::DimensionMismatch { expected: self.inputs, found: perm.len() });
        }
        Self::from_rows(perm.iter().map(|&i| perm.iter().map(|&j| self.get(i, j)).collect()).collect())
    }

    pub(crate) fn from_raw_unchecked(inputs: usize, outputs: usize, entries: Vec<T>) -> Self {
        debug_assert_eq!(entries.len(), inputs * outputs);
        Self { inputs, outputs, entries }
    }

    pub(crate) fn entries(&self) -> &[T] {
        &self.entries
    }

    fn check_input(&self, px: &Distribution<T>) -> Result<()> {
        if px.len() != self.inputs {
            return Err(Error::DimensionMismatch { expected: self.inputs, found: px.len() });
        }
        Ok(())
    }
}

/// Entropies and mutual information of a channel under a fixed input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoSummary<T> {
    pub input_entropy: T,
    pub output_entropy: T,
    pub conditional_entropy: T,
    pub mutual_information: T,
}

pub fn entropy<T: Real>(d: &Distribution<T>) -> T {
    let h = -d.as_slice().iter().map(|&p| xlog2x(p)).sum::<T>();
    h.max(T::zero())
}

/// `h(x) = -x log2 x - (1-x) log2 (1-x)`.
pub fn binary_entropy<T: Real>(x: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::Domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    Ok(binary_entropy_unchecked(x))
}

#[inline]
pub(crate) fn binary_entropy_unchecked<T: Real>(x: T) -> T {
    -(xlog2x(x) + xlog2x(T::one() - x))
}

/// Relative entropy `D(p || q)` in bits.
pub fn kl_divergence<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
    }
    let mut d = T::zero();
    for (index, (&pi, &qi)) in p.as_slice().iter().zip(q.as_slice()).enumerate() {
        if pi > T::zero() {
            if qi <= T::zero() {
                return Err(Error::SupportViolation { index });
            }
            d += pi * (pi / qi).log2();
        }
    }
    Ok(d.max(T::zero()))
}

/// Output marginal `P_Y(y_j) = Σ_i P_X(x_i) p[i][j]`.
pub fn output_distribution<T: Real>(channel: &ChannelMatrix<T>, px: &Distribution<T>) -> Result<Distribution<T>> {
    channel.check_input(px)?;
    Ok(Distribution::from_normalized_unchecked(output_marginal(channel, px.as_slice())))
}

pub(crate) fn output_marginal<T: Real>(channel: &ChannelMatrix<T>, px: &[T]) -> Vec<T> {
    let mut py = vec![T::zero(); channel.outputs()];
    for (row, &p) in channel.rows().zip(px) {
        if p == T::zero() {
            continue;
        }
        for (y, &pij) in py.iter_mut().zip(row) {
            *y += p * pij;
        }
    }
    py
}

pub fn info_summary<T: Real>(channel: &ChannelMatrix<T>, px: &Distribution<T>) -> Result<InfoSummary<T>> {
    let py = output_distribution(channel, px)?;
    let input_entropy = entropy(px);
    let output_entropy = entropy(&py);
    let conditional_entropy = conditional_entropy_raw(channel, px.as_slice());
    let mutual_information = mutual_information_raw(channel, px.as_slice(), py.as_slice());
    Ok(InfoSummary { input_entropy, output_entropy, conditional_entropy, mutual_information })
}

pub(crate) fn conditional_entropy_raw<T: Real>(channel: &ChannelMatrix<T>, px: &[T]) -> T {
    channel
        .rows()
        .zip(px)
        .map(|(row, &p)| p * -row.iter().map(|&x| xlog2x(x)).sum::<T>())
        .sum::<T>()
        .max(T::zero())
}

pub(crate) fn mutual_information_raw<T: Real>(channel: &ChannelMatrix<T>, px: &[T], py: &[T]) -> T {
    let mut mi = T::zero();
    for (row, &p) in channel.rows().zip(px) {
        if p == T::zero() {
            continue;
        }
        let mut d = T::zero();
        for (&pij, &qj) in row.iter().zip(py) {
            if pij > T::zero() && qj > T::zero() {
                d += pij * (pij / qj).log2();
            }
        }
        mi += p * d;
    }
    mi.max(T::zero())
}

/// Symmetric-channel information transfer rate from alphabet size and
/// accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionalItr<T> {
    pub bits_per_trial: T,
    pub bits_per_min: T,
    /// Accuracy is below chance (`1/M`).
    pub below_chance: bool,
}

pub fn conventional_itr<T: Real>(alphabet: usize, accuracy: T, window_s: T) -> Result<ConventionalItr<T>> {
    if alphabet < 2 {
        return Err(Error::Domain(format!("alphabet size {alphabet} < 2")));
    }
    if !(accuracy >= T::zero() && accuracy <= T::one()) {
        return Err(Error::Domain(format!("accuracy {accuracy} outside [0, 1]")));
    }
    if !(window_s > T::zero()) {
        return Err(Error::Domain(format!("window {window_s} s is not positive")));
    }
    let m = T::lit(alphabet as f64);
    let miss = T::one() - accuracy;
    let mut bits = m.log2() + xlog2x(accuracy);
    if miss > T::zero() {
        bits += miss * (miss / (m - T::one())).log2();
    }
    Ok(ConventionalItr {
        bits_per_trial: bits,
        bits_per_min: T::lit(60.0) / window_s * bits,
        below_chance: accuracy < T::one() / m,
    })
}
