//! Channel capacity: Blahut-Arimoto for arbitrary discrete memoryless
//! channels and the closed form for binary channels.

use serde::{Deserialize, Serialize};

use crate::channel::{
    binary_entropy_unchecked, info_summary, mutual_information_raw, output_marginal, ChannelMatrix, Distribution,
};
use crate::error::{Error, Result};
use crate::real::Real;

/// Blahut-Arimoto configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BaConfig<T> {
    /// Stopping threshold in bits on `max_i D_i - Σ_i px_i D_i`.
    pub gap_threshold: T,
    pub max_iter: usize,
    /// Starting input; uniform when `None`.
    pub initial_input: Option<Distribution<T>>,
}

impl<T: Real> Default for BaConfig<T> {
    fn default() -> Self {
        Self { gap_threshold: T::lit(T::DEFAULT_GAP), max_iter: 10_000, initial_input: None }
    }
}

impl<T: Real> BaConfig<T> {
    pub fn with_threshold(gap_threshold: T) -> Self {
        Self { gap_threshold, ..Self::default() }
    }

    fn validate(&self, inputs: usize) -> Result<()> {
        if !(self.gap_threshold > T::zero()) {
            return Err(Error::Config { key: "gap_threshold".into(), reason: "must be positive".into() });
        }
        if self.max_iter == 0 {
            return Err(Error::Config { key: "max_iter".into(), reason: "must be at least 1".into() });
        }
        if let Some(p0) = &self.initial_input {
            if p0.len() != inputs {
                return Err(Error::DimensionMismatch { expected: inputs, found: p0.len() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult<T> {
    /// Bits per channel use.
    pub capacity: T,
    pub optimal_input: Distribution<T>,
    pub iterations: usize,
    /// Final value of the stopping expression, in bits. It bounds the
    /// distance between `capacity` and the true capacity.
    pub gap: T,
    pub converged: bool,
}

/// One Blahut-Arimoto state: the current input, the per-input divergences
/// `D(p_i || P_Y)` in bits, and the derived bounds.
#[derive(Debug, Clone)]
pub struct BaStep<T> {
    pub input: Vec<T>,
    pub divergence: Vec<T>,
    /// `Σ px_i D_i`, the mutual information at `input`.
    pub lower: T,
    /// `max_i D_i`, an upper bound on capacity.
    pub upper: T,
}

impl<T: Real> BaStep<T> {
    pub fn gap(&self) -> T {
        (self.upper - self.lower).max(T::zero())
    }
}

/// Iterator over Blahut-Arimoto states, starting with the initial input.
///
/// Output symbols that occur with probability zero from every input are
/// dropped up front; they carry no information and would otherwise make the
/// divergence terms 0/0.
pub struct BlahutArimoto<T> {
    inputs: usize,
    outputs: usize,
    rows: Vec<T>,
    state: Option<BaStep<T>>,
}

impl<T: Real> BlahutArimoto<T> {
    pub fn new(channel: &ChannelMatrix<T>, initial: Option<&Distribution<T>>) -> Result<Self> {
        let m = channel.inputs();
        let live: Vec<usize> = (0..channel.outputs()).filter(|&j| (0..m).any(|i| channel.get(i, j) > T::zero())).collect();
        let n = live.len();
        let mut rows = Vec::with_capacity(m * n);
        for i in 0..m {
            rows.extend(live.iter().map(|&j| channel.get(i, j)));
        }
        let input = match initial {
            Some(p0) => {
                if p0.len() != m {
                    return Err(Error::DimensionMismatch { expected: m, found: p0.len() });
                }
                p0.as_slice().to_vec()
            }
            None => vec![T::one() / T::lit(m as f64); m],
        };
        let mut ba = Self { inputs: m, outputs: n, rows, state: None };
        ba.state = Some(ba.evaluate(input));
        Ok(ba)
    }

    pub fn current(&self) -> &BaStep<T> {
        self.state.as_ref().expect("state initialized in new")
    }

    fn evaluate(&self, input: Vec<T>) -> BaStep<T> {
        let (m, n) = (self.inputs, self.outputs);
        let mut py = vec![T::zero(); n];
        for i in 0..m {
            let p = input[i];
            if p == T::zero() {
                continue;
            }
            for j in 0..n {
                py[j] += p * self.rows[i * n + j];
            }
        }
        let divergence: Vec<T> = (0..m)
            .map(|i| {
                let row = &self.rows[i * n..(i + 1) * n];
                let mut d = T::zero();
                for (&pij, &q) in row.iter().zip(&py) {
                    // q > 0 whenever pij > 0 and input i has mass; with a zero
                    // input mass q can vanish only for columns this row never hits
                    if pij > T::zero() && q > T::zero() {
                        d += pij * (pij / q).log2();
                    }
                }
                d.max(T::zero())
            })
            .collect();
        let lower = input.iter().zip(&divergence).map(|(&p, &d)| p * d).sum::<T>().max(T::zero());
        let upper = divergence.iter().fold(T::zero(), |a, &d| a.max(d));
        BaStep { input, divergence, lower, upper }
    }

    /// Multiplicative update `p_i ← p_i 2^{D_i} / Σ_k p_k 2^{D_k}`.
    fn advance(&mut self) {
        let cur = self.current();
        let dmax = cur.upper;
        // shifting by max D keeps the exponentials in range
        let weights: Vec<T> =
            cur.input.iter().zip(&cur.divergence).map(|(&p, &d)| p * (d - dmax).exp2()).collect();
        let z: T = weights.iter().copied().sum();
        let next = weights.into_iter().map(|w| w / z).collect();
        self.state = Some(self.evaluate(next));
    }
}

impl<T: Real> Iterator for BlahutArimoto<T> {
    type Item = BaStep<T>;

    fn next(&mut self) -> Option<BaStep<T>> {
        self.advance();
        Some(self.current().clone())
    }
}

/// Capacity and capacity-achieving input of an arbitrary channel.
///
/// On hitting `max_iter` the best iterate is returned with
/// `converged == false`.
pub fn blahut_arimoto<T: Real>(channel: &ChannelMatrix<T>, cfg: &BaConfig<T>) -> Result<CapacityResult<T>> {
    cfg.validate(channel.inputs())?;
    let mut ba = BlahutArimoto::new(channel, cfg.initial_input.as_ref())?;
    let mut iterations = 0;
    while ba.current().gap() >= cfg.gap_threshold && iterations < cfg.max_iter {
        ba.advance();
        iterations += 1;
    }
    let step = ba.current();
    let gap = step.gap();
    Ok(CapacityResult {
        capacity: step.lower,
        optimal_input: Distribution::from_normalized_unchecked(step.input.clone()),
        iterations,
        gap,
        converged: gap < cfg.gap_threshold,
    })
}

/// Below this distance from `p12 + p21 = 1` the binary channel is treated
/// as useless.
const SINGULAR_EPS: f64 = 1e-12;

fn check_crossover<T: Real>(name: &str, p: T) -> Result<()> {
    if p >= T::zero() && p <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {p} outside [0, 1]")))
    }
}

/// `log2 z` for `1/(p_x δ + p21) - 1 = z` with `δ = 1 - p12 - p21`.
fn log2_ratio<T: Real>(p12: T, p21: T, delta: T) -> T {
    (binary_entropy_unchecked(p12) - binary_entropy_unchecked(p21)) / delta
}

/// `log2(1 + 2^x)` without overflow.
fn log2_one_plus_exp2<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp2().ln_1p() / T::lit(std::f64::consts::LN_2)
    } else {
        x.exp2().ln_1p() / T::lit(std::f64::consts::LN_2)
    }
}

/// Closed-form capacity of the binary channel `(p12, p21)` together with
/// `P_X(x1)` at the optimum.
pub fn binary_capacity<T: Real>(p12: T, p21: T) -> Result<(T, T)> {
    check_crossover("p12", p12)?;
    check_crossover("p21", p21)?;
    let delta = T::one() - p12 - p21;
    if delta.abs().as_f64() < SINGULAR_EPS {
        return Ok((T::zero(), T::lit(0.5)));
    }
    let h12 = binary_entropy_unchecked(p12);
    let h21 = binary_entropy_unchecked(p21);
    let c = log2_one_plus_exp2(log2_ratio(p12, p21, delta)) - ((T::one() - p21) * h12 - p12 * h21) / delta;
    let px = binary_optimal_input(p12, p21)?;
    Ok((c.max(T::zero()).min(T::one()), px))
}

/// Optimal `P_X(x1)` of the binary channel, from inverting the stationarity
/// condition algebraically and clamping to `[0, 1]`.
pub fn binary_optimal_input<T: Real>(p12: T, p21: T) -> Result<T> {
    check_crossover("p12", p12)?;
    check_crossover("p21", p21)?;
    let delta = T::one() - p12 - p21;
    if delta.abs().as_f64() < SINGULAR_EPS {
        return Ok(T::lit(0.5));
    }
    let x = log2_ratio(p12, p21, delta);
    // 1 / (1 + 2^x) computed as a logistic to avoid overflow
    let inv = if x > T::zero() {
        let e = (-x).exp2();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + x.exp2())
    };
    let px = (inv - p21) / delta;
    Ok(px.max(T::zero()).min(T::one()))
}

/// Mutual information of a channel at a fixed input.
pub fn mutual_information_fixed_input<T: Real>(channel: &ChannelMatrix<T>, px: &Distribution<T>) -> Result<T> {
    Ok(info_summary(channel, px)?.mutual_information)
}

/// Binary mutual information
/// `h(px(1-p12) + (1-px)p21) - px h(p12) - (1-px) h(p21)`.
pub fn binary_mutual_information<T: Real>(p12: T, p21: T, px: T) -> Result<T> {
    check_crossover("p12", p12)?;
    check_crossover("p21", p21)?;
    check_crossover("px", px)?;
    let q = px * (T::one() - p12) + (T::one() - px) * p21;
    let i = binary_entropy_unchecked(q)
        - px * binary_entropy_unchecked(p12)
        - (T::one() - px) * binary_entropy_unchecked(p21);
    Ok(i.max(T::zero()))
}

/// Capacity-based rate in bits per minute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityItr<T> {
    pub bits_per_min: T,
    pub capacity: T,
    pub converged: bool,
}

pub fn capacity_itr<T: Real>(channel: &ChannelMatrix<T>, window_s: T, cfg: &BaConfig<T>) -> Result<CapacityItr<T>> {
    if !(window_s > T::zero()) {
        return Err(Error::Domain(format!("window {window_s} s is not positive")));
    }
    let r = blahut_arimoto(channel, cfg)?;
    Ok(CapacityItr { bits_per_min: T::lit(60.0) / window_s * r.capacity, capacity: r.capacity, converged: r.converged })
}

// Used by the design loop: I at a raw input without reallocation of a
// Distribution.
pub(crate) fn mutual_information_at<T: Real>(channel: &ChannelMatrix<T>, px: &[T]) -> T {
    let py = output_marginal(channel, px);
    mutual_information_raw(channel, px, &py)
}
