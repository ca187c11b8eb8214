//! Channel construction and joint optimization of transition matrix and
//! input distribution under an average-accuracy target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{blahut_arimoto, mutual_information_at, BaConfig};
use crate::channel::{
    binary_entropy, binary_entropy_unchecked, conditional_entropy_raw, info_summary, ChannelMatrix, Distribution,
};
use crate::error::{Error, Result};
use crate::real::Real;

/// Channel whose row `i` keeps `p_i` on the diagonal and spreads `1 - p_i`
/// evenly over the other `M - 1` outputs. A single accuracy is broadcast.
pub fn balanced_matrix<T: Real>(per_class_accuracy: &[T], m: usize) -> Result<ChannelMatrix<T>> {
    if m < 2 {
        return Err(Error::ChannelTooSmall { rows: m, cols: m });
    }
    let acc: Vec<T> = match per_class_accuracy.len() {
        1 => vec![per_class_accuracy[0]; m],
        n if n == m => per_class_accuracy.to_vec(),
        n => return Err(Error::DimensionMismatch { expected: m, found: n }),
    };
    let mut entries = Vec::with_capacity(m * m);
    for (i, &p) in acc.iter().enumerate() {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::InvalidProbability { index: i, value: p.as_f64() });
        }
        let off = (T::one() - p) / T::lit((m - 1) as f64);
        entries.extend((0..m).map(|j| if j == i { p } else { off }));
    }
    Ok(ChannelMatrix::from_raw_unchecked(m, m, entries))
}

/// `h(ε) + ε log2(M - 1)`, the largest conditional entropy a square channel
/// can have at average error `ε`.
pub fn fano_conditional_entropy_bound<T: Real>(eps: T, m: usize) -> Result<T> {
    if m < 2 {
        return Err(Error::Domain(format!("alphabet size {m} < 2")));
    }
    let h = binary_entropy(eps)?;
    Ok(h + eps * T::lit(((m - 1) as f64).log2()))
}

fn fano_f<T: Real>(eps: T, m: usize) -> T {
    binary_entropy_unchecked(eps) + eps * T::lit(((m - 1) as f64).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FanoForm {
    /// Implicit bound solved by bisection.
    Tight,
    /// `(H(Y) - I(X;Y) - 1) / log2 M`.
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoLowerBound<T> {
    pub bound: T,
    /// Which form produced `bound`.
    pub form: FanoForm,
    /// False for binary channels, where the implicit form is undefined.
    pub tight_available: bool,
}

fn require_square<T: Real>(p: &ChannelMatrix<T>) -> Result<()> {
    if p.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare { rows: p.inputs(), cols: p.outputs() })
    }
}

/// Lower bound on the average error `1 - Σ px_i p_ii` implied by the
/// conditional entropy of the channel at `px`.
pub fn fano_error_lower_bound<T: Real>(p: &ChannelMatrix<T>, px: &Distribution<T>) -> Result<FanoLowerBound<T>> {
    require_square(p)?;
    let m = p.inputs();
    let s = info_summary(p, px)?;
    let hyx = s.conditional_entropy.as_f64();
    let log_m = (m as f64).log2();
    let weak = ((s.output_entropy - s.mutual_information).as_f64() - 1.0).max(0.0) / log_m;
    if m == 2 {
        return Ok(FanoLowerBound { bound: T::lit(weak), form: FanoForm::Weak, tight_available: false });
    }
    let top = (m - 1) as f64 / m as f64;
    let tight = if hyx <= 0.0 {
        0.0
    } else if fano_f(top, m) <= hyx {
        top
    } else {
        // f is increasing on [0, top]; keep the lower end so the result
        // never overshoots the true root
        let (mut lo, mut hi) = (0.0f64, top);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if fano_f(mid, m) >= hyx {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        lo
    };
    let (bound, form) = if tight >= weak { (tight, FanoForm::Tight) } else { (weak, FanoForm::Weak) };
    Ok(FanoLowerBound { bound: T::lit(bound), form, tight_available: true })
}

/// Result of checking `H(Y|X) <= h(ε) + ε log2(M - 1)` at a given input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoCheck<T> {
    pub error: T,
    pub conditional_entropy: T,
    pub bound: T,
    pub satisfied: bool,
}

pub fn fano_check<T: Real>(p: &ChannelMatrix<T>, px: &Distribution<T>) -> Result<FanoCheck<T>> {
    require_square(p)?;
    let error = p.error_probability(px)?;
    let hyx = conditional_entropy_raw(p, px.as_slice());
    let bound = fano_conditional_entropy_bound(error.max(T::zero()).min(T::one()), p.inputs())?;
    Ok(FanoCheck { error, conditional_entropy: hyx, bound, satisfied: hyx <= bound + T::lit(1e-12) })
}

/// Average accuracy `A`, equivalently target error `ε = 1 - A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTarget<T> {
    accuracy: T,
}

impl<T: Real> AccuracyTarget<T> {
    pub fn new(accuracy: T) -> Result<Self> {
        if accuracy > T::zero() && accuracy <= T::one() {
            Ok(Self { accuracy })
        } else {
            Err(Error::Domain(format!("accuracy {accuracy} outside (0, 1]")))
        }
    }

    pub fn from_error(eps: T) -> Result<Self> {
        Self::new(T::one() - eps)
    }

    pub fn accuracy(&self) -> T {
        self.accuracy
    }

    pub fn error(&self) -> T {
        T::one() - self.accuracy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig<T> {
    pub restarts: usize,
    pub seed: u64,
    pub max_outer: usize,
    /// Outer loop stops once capacity moves by less than this.
    pub tolerance: T,
    pub max_inner: usize,
    pub ba: BaConfig<T>,
}

impl<T: Real> Default for DesignConfig<T> {
    fn default() -> Self {
        Self { restarts: 16, seed: 0, max_outer: 500, tolerance: T::lit(1e-7), max_inner: 200, ba: BaConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult<T> {
    pub channel: ChannelMatrix<T>,
    pub input: Distribution<T>,
    pub capacity: T,
    /// `1 - Σ px_i p_ii` at the returned pair.
    pub achieved_error: T,
    /// `H(Y|X)` at the returned pair.
    pub conditional_entropy: T,
    /// `h(ε) + ε log2(M - 1)` at the target error.
    pub fano_bound: T,
    pub fano_satisfied: bool,
    pub restarts_used: usize,
    /// Number of outer iterations of the winning restart.
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection of `v` onto the probability simplex, in place.
pub(crate) fn project_simplex<T: Real>(v: &mut [T]) {
    let mut u: Vec<T> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - T::one()) / T::lit((k + 1) as f64);
        if uk - t > T::zero() {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(T::zero());
    }
}

/// Project a square row-major matrix onto row-stochastic matrices with
/// `Σ px_i p_ii = accuracy`, by bisection on the multiplier of the linear
/// constraint.
fn project_constrained<T: Real>(y: &[T], m: usize, px: &[T], accuracy: T, out: &mut [T]) {
    let eval = |mu: T, out: &mut [T]| -> T {
        out.copy_from_slice(y);
        let mut acc = T::zero();
        for i in 0..m {
            let row = &mut out[i * m..(i + 1) * m];
            row[i] += mu * px[i];
            project_simplex(row);
            acc += px[i] * row[i];
        }
        acc
    };
    let (mut lo, mut hi) = (-T::one(), T::one());
    while eval(lo, out) > accuracy && lo > T::lit(-1e12) {
        lo *= T::lit(2.0);
    }
    while eval(hi, out) < accuracy && hi < T::lit(1e12) {
        hi *= T::lit(2.0);
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        let g = eval(mid, out);
        if (g - accuracy).abs() < T::epsilon() * T::lit(4.0) {
            return;
        }
        if g < accuracy {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::epsilon() * (T::one() + hi.abs()) {
            break;
        }
    }
    eval((lo + hi) / T::lit(2.0), out);
}

/// Projected gradient ascent on `I(X;Y)` over `P` with `px` fixed. `p` is
/// first moved onto the constraint set for `px`.
fn ascend_channel<T: Real>(p: &mut [T], m: usize, px: &[T], accuracy: T, max_inner: usize) {
    let start = p.to_vec();
    project_constrained(&start, m, px, accuracy, p);
    let tiny = T::min_positive_value().sqrt();
    let mut cur = {
        let ch = ChannelMatrix::from_raw_unchecked(m, m, p.to_vec());
        mutual_information_at(&ch, px)
    };
    let mut step = T::one();
    let mut grad = vec![T::zero(); m * m];
    let mut trial = vec![T::zero(); m * m];
    let mut cand = vec![T::zero(); m * m];
    for _ in 0..max_inner {
        let mut q = vec![T::zero(); m];
        for i in 0..m {
            for j in 0..m {
                q[j] += px[i] * p[i * m + j];
            }
        }
        for i in 0..m {
            for j in 0..m {
                grad[i * m + j] = px[i] * (p[i * m + j].max(tiny) / q[j].max(tiny)).log2();
            }
        }
        let mut improved = false;
        while step > T::lit(1e-12) {
            for k in 0..m * m {
                trial[k] = p[k] + step * grad[k];
            }
            project_constrained(&trial, m, px, accuracy, &mut cand);
            let ch = ChannelMatrix::from_raw_unchecked(m, m, cand.clone());
            let val = mutual_information_at(&ch, px);
            if val > cur {
                let gain = val - cur;
                p.copy_from_slice(&cand);
                cur = val;
                step *= T::lit(2.0);
                improved = gain > T::lit(1e-14);
                break;
            }
            step /= T::lit(2.0);
        }
        if !improved {
            break;
        }
    }
}

struct RestartOutcome<T> {
    channel: Vec<T>,
    input: Vec<T>,
    capacity: T,
    iterations: usize,
    converged: bool,
}

fn run_restart<T: Real>(m: usize, accuracy: T, cfg: &DesignConfig<T>, seed: u64) -> Result<RestartOutcome<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut px = vec![T::one() / T::lit(m as f64); m];
    let mut raw = vec![T::zero(); m * m];
    for i in 0..m {
        // Dirichlet(1) row
        let row: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = row.iter().sum();
        for j in 0..m {
            raw[i * m + j] = T::lit(row[j] / s);
        }
    }
    let mut p = raw;

    let mut capacity = T::neg_infinity();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..cfg.max_outer {
        iterations = it + 1;
        ascend_channel(&mut p, m, &px, accuracy, cfg.max_inner);
        let ch = ChannelMatrix::from_raw_unchecked(m, m, p.clone());
        let r = blahut_arimoto(&ch, &cfg.ba)?;
        px = r.optimal_input.into_vec();
        let delta = (r.capacity - capacity).abs();
        capacity = r.capacity;
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }
    // the last BA step moved px; re-project so the constraint holds at the
    // returned input, then refresh px once more
    let mut fixed = vec![T::zero(); m * m];
    project_constrained(&p, m, &px, accuracy, &mut fixed);
    let ch = ChannelMatrix::from_raw_unchecked(m, m, fixed.clone());
    let r = blahut_arimoto(&ch, &cfg.ba)?;
    Ok(RestartOutcome { channel: fixed, input: r.optimal_input.into_vec(), capacity: r.capacity, iterations, converged })
}

/// Alternate between maximizing mutual information over the channel at a
/// fixed input and over the input (by Blahut-Arimoto) at a fixed channel,
/// with every channel constrained to average accuracy `A` at the current
/// input. Restarts from random channels run in parallel and the best
/// capacity wins, ties going to the lower restart index.
pub fn joint_optimize<T: Real>(m: usize, target: AccuracyTarget<T>, cfg: &DesignConfig<T>) -> Result<DesignResult<T>> {
    if m < 2 {
        return Err(Error::ChannelTooSmall { rows: m, cols: m });
    }
    let eps = target.error();
    let chance = T::one() - T::one() / T::lit(m as f64);
    if !(eps < chance) {
        return Err(Error::Infeasible(format!("error {eps} not below chance level {chance}")));
    }
    if cfg.restarts == 0 {
        return Err(Error::Config { key: "restarts".into(), reason: "must be at least 1".into() });
    }
    let accuracy = target.accuracy();
    if eps == T::zero() {
        let channel = ChannelMatrix::identity(m)?;
        let input = Distribution::uniform(m)?;
        return Ok(DesignResult {
            channel,
            input,
            capacity: T::lit((m as f64).log2()),
            achieved_error: T::zero(),
            conditional_entropy: T::zero(),
            fano_bound: T::zero(),
            fano_satisfied: true,
            restarts_used: cfg.restarts,
            iterations: 0,
            converged: true,
        });
    }

    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.restarts).map(|_| seeder.random()).collect();
    let outcomes: Vec<Result<RestartOutcome<T>>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds.iter().map(|&sd| s.spawn(move || run_restart(m, accuracy, cfg, sd))).collect();
        handles.into_iter().map(|h| h.join().expect("restart thread panicked")).collect()
    });
    let mut best: Option<RestartOutcome<T>> = None;
    for o in outcomes {
        let o = o?;
        if best.as_ref().is_none_or(|b| o.capacity > b.capacity) {
            best = Some(o);
        }
    }
    let best = best.expect("at least one restart");
    let channel = ChannelMatrix::from_raw_unchecked(m, m, best.channel);
    let input = Distribution::from_normalized_unchecked(best.input);
    let check = fano_check(&channel, &input)?;
    Ok(DesignResult {
        capacity: best.capacity,
        achieved_error: check.error,
        conditional_entropy: check.conditional_entropy,
        fano_bound: fano_conditional_entropy_bound(eps, m)?,
        fano_satisfied: check.satisfied,
        restarts_used: cfg.restarts,
        iterations: best.iterations,
        converged: best.converged,
        channel,
        input,
    })
}

/// The binary channels meeting average accuracy `A` under a uniform input
/// with the largest and the smallest capacity: `(2(1-A), 0)` and
/// `(1-A, 1-A)`.
pub fn binary_extremal_channels<T: Real>(accuracy: T) -> Result<(ChannelMatrix<T>, ChannelMatrix<T>)> {
    if !(accuracy > T::lit(0.5) && accuracy <= T::one()) {
        return Err(Error::Domain(format!("accuracy {accuracy} outside (0.5, 1]")));
    }
    let e = T::one() - accuracy;
    Ok((ChannelMatrix::binary(e + e, T::zero())?, ChannelMatrix::binary(e, e)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::binary_capacity;
    use crate::channel::conventional_itr;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn h(x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
        }
    }

    #[test]
    fn balanced_examples() {
        let p = balanced_matrix(&[1.0f64], 3).unwrap();
        assert_eq!(p, ChannelMatrix::identity(3).unwrap());
        let p = balanced_matrix(&[0.7f64], 3).unwrap();
        assert_abs_diff_eq!(p.get(0, 1), 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(2, 0), 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(1, 1), 0.7, epsilon = 1e-15);
        let p = balanced_matrix(&[0.9f64, 0.6], 2).unwrap();
        assert_abs_diff_eq!(p.get(1, 0), 0.4, epsilon = 1e-15);
        assert!(balanced_matrix(&[0.9f64, 0.6], 3).is_err());
        assert!(balanced_matrix(&[1.2f64], 3).is_err());
        assert!(balanced_matrix(&[0.5f64], 1).is_err());
    }

    #[test]
    fn balanced_capacity_matches_conventional() {
        let p = balanced_matrix(&[0.9f64], 40).unwrap();
        let r = blahut_arimoto(&p, &BaConfig::default()).unwrap();
        let c = conventional_itr(40, 0.9, 1.0).unwrap().bits_per_trial;
        assert_abs_diff_eq!(r.capacity, c, epsilon = 1e-9);
    }

    #[test]
    fn conditional_entropy_bound_examples() {
        assert_eq!(fano_conditional_entropy_bound(0.0f64, 7).unwrap(), 0.0);
        assert_abs_diff_eq!(fano_conditional_entropy_bound(0.01f64, 2).unwrap(), h(0.01), epsilon = 1e-15);
        assert_abs_diff_eq!(fano_conditional_entropy_bound(0.01f64, 2).unwrap(), 0.08079, epsilon = 5e-6);
        let oracle = h(0.05) + 0.05 * 39f64.log2();
        assert_abs_diff_eq!(fano_conditional_entropy_bound(0.05f64, 40).unwrap(), oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(oracle, 0.55064, epsilon = 5e-5);
        assert!(fano_conditional_entropy_bound(1.5f64, 3).is_err());
        assert!(fano_conditional_entropy_bound(0.1f64, 1).is_err());
    }

    #[test]
    fn error_lower_bound_examples() {
        let u4 = Distribution::<f64>::uniform(4).unwrap();
        let b = fano_error_lower_bound(&ChannelMatrix::identity(4).unwrap(), &u4).unwrap();
        assert_eq!(b.bound, 0.0);

        let p = balanced_matrix(&[0.9f64], 40).unwrap();
        let b = fano_error_lower_bound(&p, &Distribution::uniform(40).unwrap()).unwrap();
        assert!(b.bound <= 0.1);
        assert_eq!(b.form, FanoForm::Tight);
        // balanced rows attain the per-row maximum entropy, so the bound is tight
        assert_abs_diff_eq!(b.bound, 0.1, epsilon = 1e-9);

        let row = vec![0.25; 4];
        let useless = ChannelMatrix::from_rows(vec![row; 4]).unwrap();
        let b = fano_error_lower_bound(&useless, &u4).unwrap();
        assert!(b.bound >= 0.5);
        assert_abs_diff_eq!(b.bound, 0.75, epsilon = 1e-12);

        let bsc = ChannelMatrix::bsc(0.3).unwrap();
        let b = fano_error_lower_bound(&bsc, &Distribution::uniform(2).unwrap()).unwrap();
        assert!(!b.tight_available);
        assert_eq!(b.form, FanoForm::Weak);
        assert_eq!(b.bound, 0.0);

        let bec = ChannelMatrix::bec(0.3).unwrap();
        assert!(fano_error_lower_bound(&bec, &Distribution::uniform(2).unwrap()).is_err());
    }

    #[test]
    fn extremal_channels() {
        let (hi, lo) = binary_extremal_channels(1.0f64).unwrap();
        assert_eq!(hi, ChannelMatrix::identity(2).unwrap());
        assert_eq!(lo, ChannelMatrix::identity(2).unwrap());

        let (hi, lo) = binary_extremal_channels(0.99f64).unwrap();
        assert_abs_diff_eq!(hi.get(0, 1), 0.02, epsilon = 1e-15);
        let c_hi = binary_capacity(0.02, 0.0).unwrap().0;
        let c_lo = binary_capacity(0.01, 0.01).unwrap().0;
        assert_abs_diff_eq!(c_hi, 0.9297, epsilon = 1e-4);
        assert_abs_diff_eq!(c_lo, 0.9192, epsilon = 5e-5);
        assert!(c_hi >= c_lo);
        assert_abs_diff_eq!(lo.get(1, 0), 0.01, epsilon = 1e-15);

        let c_hi = binary_capacity(0.5, 0.0).unwrap().0;
        let c_lo = binary_capacity(0.25, 0.25).unwrap().0;
        assert_abs_diff_eq!(c_hi, 0.32193, epsilon = 5e-6);
        assert_abs_diff_eq!(c_lo, 1.0 - h(0.25), epsilon = 1e-12);
        assert_abs_diff_eq!(c_lo, 0.18872, epsilon = 5e-6);

        assert!(binary_extremal_channels(0.5f64).is_err());
        assert!(binary_extremal_channels(1.01f64).is_err());
    }

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5f64, 0.5, 0.5];
        project_simplex(&mut v);
        for x in &v {
            assert_abs_diff_eq!(*x, 1.0 / 3.0, epsilon = 1e-15);
        }
        let mut v = vec![2.0f64, 0.0, -1.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn constrained_projection_hits_target() {
        let y = vec![0.3f64, 0.7, 0.1, 0.9];
        let px = [0.4, 0.6];
        let mut out = vec![0.0; 4];
        project_constrained(&y, 2, &px, 0.8, &mut out);
        let acc = px[0] * out[0] + px[1] * out[3];
        assert_abs_diff_eq!(acc, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(out[0] + out[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[2] + out[3], 1.0, epsilon = 1e-12);
    }

    /// Grid oracle for the binary inner step: the best channel on the line
    /// `px a + (1-px) b = ε` inside the unit square.
    fn binary_line_oracle(px: f64, eps: f64, steps: usize) -> (f64, f64, f64) {
        let amax = (eps / px).min(1.0);
        let mut best = (f64::MIN, 0.0, 0.0);
        for k in 0..=steps {
            let a = amax * k as f64 / steps as f64;
            let b = (eps - px * a) / (1.0 - px);
            if !(-1e-12..=1.0).contains(&b) {
                continue;
            }
            let b = b.max(0.0);
            let q = px * (1.0 - a) + (1.0 - px) * b;
            let i = h(q) - px * h(a) - (1.0 - px) * h(b);
            if i > best.0 {
                best = (i, a, b);
            }
        }
        best
    }

    #[test]
    fn inner_step_matches_line_oracle() {
        for (px, eps) in [(0.5, 0.01), (0.45, 0.1), (0.6, 0.25)] {
            let mut p = vec![0.0f64; 4];
            project_constrained(&[0.6, 0.4, 0.3, 0.7], 2, &[px, 1.0 - px], 1.0 - eps, &mut p);
            ascend_channel(&mut p, 2, &[px, 1.0 - px], 1.0 - eps, 500);
            let got = mutual_information_at(&ChannelMatrix::from_raw_unchecked(2, 2, p.clone()), &[px, 1.0 - px]);
            let (oracle, _, _) = binary_line_oracle(px, eps, 200_000);
            // the objective is convex along the line, so a local ascent ends
            // at one of its two endpoints
            let mi = |a: f64, b: f64| {
                let q = px * (1.0 - a) + (1.0 - px) * b;
                h(q) - px * h(a) - (1.0 - px) * h(b)
            };
            let amax = (eps / px).min(1.0);
            let ends = [mi(amax, ((eps - px * amax) / (1.0 - px)).max(0.0)), mi(0.0, eps / (1.0 - px))];
            assert!(got <= oracle + 1e-9);
            assert!(ends.iter().any(|e| (got - e).abs() < 1e-6), "{got} not at an endpoint {ends:?}");
            assert_abs_diff_eq!(oracle, ends[0].max(ends[1]), epsilon = 1e-9);
        }
    }

    #[test]
    fn joint_binary_reproduces_table_point() {
        let cfg = DesignConfig::<f64> { restarts: 4, ..Default::default() };
        let r = joint_optimize(2, AccuracyTarget::new(0.8).unwrap(), &cfg).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.capacity, 0.321928, epsilon = 1e-4);
        assert_abs_diff_eq!(r.achieved_error, 0.2, epsilon = 1e-4);
        assert!(r.fano_satisfied);
        assert!(r.conditional_entropy <= r.fano_bound);
    }

    #[test]
    fn joint_binary_respects_extremal_bracket() {
        let cfg = DesignConfig::<f64> { restarts: 4, seed: 3, ..Default::default() };
        for a in [0.75, 0.8, 0.85, 0.9, 0.95, 0.99] {
            let r = joint_optimize(2, AccuracyTarget::new(a).unwrap(), &cfg).unwrap();
            let sym = binary_capacity(1.0 - a, 1.0 - a).unwrap().0;
            let ext = binary_capacity(2.0 * (1.0 - a), 0.0).unwrap().0;
            assert!(r.capacity >= sym, "A={a}: {} < symmetric {sym}", r.capacity);
            assert!(r.capacity <= ext + 1e-9, "A={a}: {} > extremal {ext}", r.capacity);
        }
    }

    #[test]
    fn joint_is_deterministic() {
        let cfg = DesignConfig::<f64> { restarts: 3, seed: 9, ..Default::default() };
        let t = AccuracyTarget::new(0.85).unwrap();
        let a = joint_optimize(3, t, &cfg).unwrap();
        let b = joint_optimize(3, t, &cfg).unwrap();
        assert_eq!(a, b);
        assert!((a.achieved_error - 0.15).abs() <= 1e-4);
        assert!(a.fano_satisfied);
    }

    #[test]
    fn joint_limits_and_errors() {
        let cfg = DesignConfig::<f64> { restarts: 2, ..Default::default() };
        let r = joint_optimize(2, AccuracyTarget::new(1.0).unwrap(), &cfg).unwrap();
        assert_eq!(r.capacity, 1.0);
        let r = joint_optimize(2, AccuracyTarget::new(0.9999).unwrap(), &cfg).unwrap();
        assert!(r.capacity > 0.99);
        assert!(r.channel.get(0, 0) > 0.99 && r.channel.get(1, 1) > 0.99);
        assert!(joint_optimize(2, AccuracyTarget::new(0.5).unwrap(), &cfg).is_err());
        assert!(joint_optimize(4, AccuracyTarget::new(0.2).unwrap(), &cfg).is_err());
        assert!(AccuracyTarget::new(0.0f64).is_err());
        assert!(joint_optimize(2, AccuracyTarget::new(0.9).unwrap(), &DesignConfig { restarts: 0, ..cfg }).is_err());
    }

    fn random_square(rows: Vec<Vec<f64>>) -> ChannelMatrix<f64> {
        let rows = rows.into_iter().map(|r| { let s: f64 = r.iter().sum(); r.into_iter().map(|x| x / s).collect() }).collect();
        ChannelMatrix::from_rows(rows).unwrap()
    }

    proptest! {
        #[test]
        fn fano_entropy_bound_holds(rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 4), w in prop::collection::vec(0.01f64..1.0, 4)) {
            prop_assume!(rows.iter().all(|r| r.iter().sum::<f64>() > 1e-3));
            let p = random_square(rows);
            let px = Distribution::from_weights(w).unwrap();
            prop_assert!(fano_check(&p, &px).unwrap().satisfied);
        }

        #[test]
        fn fano_error_bound_is_valid(rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 5), w in prop::collection::vec(0.01f64..1.0, 5)) {
            prop_assume!(rows.iter().all(|r| r.iter().sum::<f64>() > 1e-3));
            let p = random_square(rows);
            let px = Distribution::from_weights(w).unwrap();
            let b = fano_error_lower_bound(&p, &px).unwrap();
            prop_assert!(b.bound <= p.error_probability(&px).unwrap() + 1e-12);
        }

        #[test]
        fn balanced_has_uniform_optimum(m in 2usize..12, p in 0.0f64..1.0) {
            let ch = balanced_matrix(&[p], m).unwrap();
            let r = blahut_arimoto(&ch, &BaConfig::default()).unwrap();
            for &x in r.optimal_input.as_slice() {
                prop_assert!((x - 1.0 / m as f64).abs() < 1e-6);
            }
            let c = conventional_itr(m, p, 1.0).unwrap().bits_per_trial;
            prop_assert!((r.capacity - c).abs() < 1e-6);
        }
    }
}
