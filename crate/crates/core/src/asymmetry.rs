//! Channel asymmetry: the skewed-Laplacian score and the ITR gain ratio.

use serde::{Deserialize, Serialize};

use crate::capacity::{capacity_itr, BaConfig};
use crate::channel::{conventional_itr, ChannelMatrix, Distribution};
use crate::error::{Error, Result};
use crate::linalg::{solve, symmetric_eigen, Matrix};
use crate::real::Real;

/// Weight of the uniform matrix mixed in when smoothing.
pub const SMOOTHING_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Reducible or periodic chains are errors.
    Off,
    /// Mix in the uniform matrix only when the chain is not ergodic.
    #[default]
    Auto,
    Always,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stationary<T> {
    pub distribution: Distribution<T>,
    pub smoothed: bool,
    /// `max_j |(φP)_j - φ_j|`.
    pub residual: T,
}

fn residual_target<T: Real>() -> f64 {
    if T::epsilon().as_f64() < 1e-10 {
        1e-12
    } else {
        1e-5
    }
}

/// First state not reachable from state 0 or unable to reach it, if any.
fn unreachable_state<T: Real>(p: &ChannelMatrix<T>) -> Option<usize> {
    let m = p.inputs();
    let reach = |forward: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let w = if forward { p.get(i, j) } else { p.get(j, i) };
                if w > T::zero() && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let (fw, bw) = (reach(true), reach(false));
    (0..m).find(|&i| !(fw[i] && bw[i]))
}

/// Period of an irreducible chain: gcd of `level(i) + 1 - level(j)` over
/// edges, with BFS levels from state 0.
fn period<T: Real>(p: &ChannelMatrix<T>) -> usize {
    let m = p.inputs();
    let mut level = vec![usize::MAX; m];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for j in 0..m {
            if p.get(i, j) > T::zero() && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let gcd = |mut a: usize, mut b: usize| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let mut g = 0;
    for i in 0..m {
        for j in 0..m {
            if p.get(i, j) > T::zero() {
                g = gcd(g, (level[i] + 1).abs_diff(level[j]));
            }
        }
    }
    g
}

fn smooth<T: Real>(p: &ChannelMatrix<T>) -> ChannelMatrix<T> {
    let m = p.inputs();
    let w = T::lit(SMOOTHING_WEIGHT);
    let u = w / T::lit(m as f64);
    let entries = p.entries().iter().map(|&x| (T::one() - w) * x + u).collect();
    ChannelMatrix::from_raw_unchecked(m, m, entries)
}

fn ergodicity<T: Real>(p: &ChannelMatrix<T>) -> Result<()> {
    if let Some(state) = unreachable_state(p) {
        return Err(Error::Reducible { state });
    }
    match period(p) {
        1 => Ok(()),
        d => Err(Error::Periodic { period: d }),
    }
}

/// The chain actually analysed after applying `smoothing`.
pub fn ergodic_chain<T: Real>(p: &ChannelMatrix<T>, smoothing: Smoothing) -> Result<(ChannelMatrix<T>, bool)> {
    if !p.is_square() {
        return Err(Error::NotSquare { rows: p.inputs(), cols: p.outputs() });
    }
    match smoothing {
        Smoothing::Off => ergodicity(p).map(|_| (p.clone(), false)),
        Smoothing::Auto => match ergodicity(p) {
            Ok(()) => Ok((p.clone(), false)),
            Err(_) => Ok((smooth(p), true)),
        },
        Smoothing::Always => Ok((smooth(p), true)),
    }
}

fn stationary_of_ergodic<T: Real>(p: &ChannelMatrix<T>) -> Result<(Vec<T>, T)> {
    let m = p.inputs();
    // (P^T - I) φ = 0 with the last equation replaced by Σ φ = 1
    let mut a = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = p.get(j, i) - if i == j { T::one() } else { T::zero() };
        }
    }
    for j in 0..m {
        a[(m - 1, j)] = T::one();
    }
    let mut rhs = vec![T::zero(); m];
    rhs[m - 1] = T::one();
    let mut phi = solve(&a, &rhs)?;
    let step = |phi: &[T]| -> Vec<T> {
        let mut next = vec![T::zero(); m];
        for i in 0..m {
            for j in 0..m {
                next[j] += phi[i] * p.get(i, j);
            }
        }
        next
    };
    let mut residual = T::infinity();
    // a few power steps clean up rounding in the solve
    for _ in 0..64 {
        for x in phi.iter_mut() {
            *x = x.max(T::zero());
        }
        let s: T = phi.iter().copied().sum();
        phi.iter_mut().for_each(|x| *x /= s);
        let next = step(&phi);
        residual = next.iter().zip(&phi).fold(T::zero(), |r, (&a, &b)| r.max((a - b).abs()));
        if residual.as_f64() <= residual_target::<T>() {
            break;
        }
        phi = next;
    }
    if residual.as_f64() > residual_target::<T>() {
        return Err(Error::StationaryNotConverged { residual: residual.as_f64(), target: residual_target::<T>() });
    }
    Ok((phi, residual))
}

/// Stationary distribution `φ = φP` of the chain with transition matrix `p`.
pub fn stationary_distribution<T: Real>(p: &ChannelMatrix<T>, smoothing: Smoothing) -> Result<Stationary<T>> {
    let (chain, smoothed) = ergodic_chain(p, smoothing)?;
    let (phi, residual) = stationary_of_ergodic(&chain)?;
    Ok(Stationary { distribution: Distribution::from_normalized_unchecked(phi), smoothed, residual })
}

fn skew_sigma_max<T: Real>(p: &ChannelMatrix<T>, phi: &[T]) -> Result<T> {
    let m = p.inputs();
    let sq: Vec<T> = phi.iter().map(|x| x.sqrt()).collect();
    let gamma = |i: usize, j: usize| {
        let d = if i == j { T::one() } else { T::zero() };
        sq[i] * (d - p.get(i, j)) / sq[j]
    };
    let mut k = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            k[(i, j)] = (gamma(i, j) - gamma(j, i)) / T::lit(2.0);
        }
    }
    let ktk = k.transpose().matmul(&k)?;
    let eig = symmetric_eigen(&ktk)?;
    Ok(eig.values[0].max(T::zero()).sqrt())
}

/// Largest singular value of the antisymmetric part of
/// `Φ^{1/2} (I - P) Φ^{-1/2}`, with `Φ` the diagonal of the stationary
/// distribution. Non-ergodic chains are smoothed.
pub fn asymmetry_score<T: Real>(p: &ChannelMatrix<T>) -> Result<T> {
    let (chain, _) = ergodic_chain(p, Smoothing::Auto)?;
    let (phi, _) = stationary_of_ergodic(&chain)?;
    skew_sigma_max(&chain, &phi)
}

/// `(proposed - conventional) / conventional`.
pub fn delta_itr<T: Real>(itr_proposed: T, itr_conventional: T) -> Result<T> {
    if !(itr_conventional > T::zero()) {
        return Err(Error::Domain(format!("conventional ITR {itr_conventional} is not positive")));
    }
    Ok((itr_proposed - itr_conventional) / itr_conventional)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport<T> {
    pub delta_asm: T,
    pub stationary: Distribution<T>,
    pub smoothed: bool,
    pub conventional_bits_per_min: T,
    pub capacity_bits_per_min: T,
    /// Undefined when the conventional rate is zero.
    pub delta_itr: Option<T>,
    pub converged: bool,
}

/// Asymmetry score and the gain of capacity ITR over the conventional
/// formula evaluated at the channel's mean diagonal.
pub fn asymmetry_report<T: Real>(p: &ChannelMatrix<T>, window_s: T, ba: &BaConfig<T>) -> Result<AsymmetryReport<T>> {
    let (chain, smoothed) = ergodic_chain(p, Smoothing::Auto)?;
    let (phi, _) = stationary_of_ergodic(&chain)?;
    let delta_asm = skew_sigma_max(&chain, &phi)?;
    let m = p.inputs();
    let accuracy = p.diagonal().into_iter().sum::<T>() / T::lit(m as f64);
    let conv = conventional_itr(m, accuracy.min(T::one()), window_s)?;
    let cap = capacity_itr(p, window_s, ba)?;
    let delta = if conv.below_chance { None } else { delta_itr(cap.bits_per_min, conv.bits_per_min).ok() };
    Ok(AsymmetryReport {
        delta_asm,
        stationary: Distribution::from_normalized_unchecked(phi),
        smoothed,
        conventional_bits_per_min: conv.bits_per_min,
        capacity_bits_per_min: cap.bits_per_min,
        delta_itr: delta,
        converged: cap.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::balanced_matrix;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn stationary_examples() {
        let p = ChannelMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let s = stationary_distribution(&p, Smoothing::Off).unwrap();
        assert_abs_diff_eq!(s.distribution[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.distribution[1], 1.0 / 3.0, epsilon = 1e-12);
        assert!(!s.smoothed);
        assert!(s.residual <= 1e-12);

        let b = balanced_matrix(&[0.6f64], 5).unwrap();
        let s = stationary_distribution(&b, Smoothing::Off).unwrap();
        for &x in s.distribution.as_slice() {
            assert_abs_diff_eq!(x, 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn stationary_failures() {
        let id = ChannelMatrix::<f64>::identity(3).unwrap();
        assert!(matches!(stationary_distribution(&id, Smoothing::Off), Err(Error::Reducible { .. })));
        let s = stationary_distribution(&id, Smoothing::Auto).unwrap();
        assert!(s.smoothed);
        for &x in s.distribution.as_slice() {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-9);
        }

        let flip = ChannelMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(stationary_distribution(&flip, Smoothing::Off), Err(Error::Periodic { period: 2 })));

        let cycle = ChannelMatrix::from_rows(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(stationary_distribution(&cycle, Smoothing::Off), Err(Error::Periodic { period: 3 })));

        // absorbing state 1
        let absorbing = ChannelMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(stationary_distribution(&absorbing, Smoothing::Off), Err(Error::Reducible { .. })));

        assert!(stationary_distribution(&ChannelMatrix::<f64>::bec(0.2).unwrap(), Smoothing::Auto).is_err());
    }

    #[test]
    fn score_on_symmetric_is_zero() {
        assert!(asymmetry_score(&balanced_matrix(&[0.9f64], 40).unwrap()).unwrap() < 1e-10);
        assert!(asymmetry_score(&ChannelMatrix::<f64>::identity(4).unwrap()).unwrap() < 1e-10);
    }

    #[test]
    fn score_on_two_state_chain() {
        // oracle: 2x2 skew part is [[0, k], [-k, 0]] with σ = |k|
        let (a, b) = (0.1f64, 0.2f64);
        let phi = [b / (a + b), a / (a + b)];
        let g12 = -phi[0].sqrt() * a / phi[1].sqrt();
        let g21 = -phi[1].sqrt() * b / phi[0].sqrt();
        let k = (g12 - g21) / 2.0;
        let p = ChannelMatrix::binary(a, b).unwrap();
        assert_abs_diff_eq!(asymmetry_score(&p).unwrap(), k.abs(), epsilon = 1e-12);
        // two-state chains are reversible
        assert!(k.abs() < 1e-15);
    }

    #[test]
    fn score_on_cyclic_chain() {
        // uniform stationary distribution, so K = (P^T - P)/2 with entries ±t/2;
        // a 3x3 circulant skew matrix with that pattern has σ = t √3 / 2
        let t = 0.3;
        let p = ChannelMatrix::from_rows(vec![vec![0.7, t, 0.0], vec![0.0, 0.7, t], vec![t, 0.0, 0.7]]).unwrap();
        assert_abs_diff_eq!(asymmetry_score(&p).unwrap(), t * 3f64.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn delta_itr_examples() {
        assert_eq!(delta_itr(100.0f64, 100.0).unwrap(), 0.0);
        assert_abs_diff_eq!(delta_itr(150.0f64, 100.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(delta_itr(1.0f64, 0.0).is_err());
        assert!(delta_itr(1.0f64, -2.0).is_err());
    }

    #[test]
    fn report_on_balanced_channel() {
        let p = balanced_matrix(&[0.85f64], 8).unwrap();
        let r = asymmetry_report(&p, 1.0, &BaConfig::default()).unwrap();
        assert!(r.delta_asm < 1e-10);
        assert_abs_diff_eq!(r.delta_itr.unwrap(), 0.0, epsilon = 1e-9);
        assert!(!r.smoothed);

        let chance = balanced_matrix(&[0.25f64], 4).unwrap();
        assert_eq!(asymmetry_report(&chance, 1.0, &BaConfig::default()).unwrap().delta_itr, None);
    }

    fn symmetric_ds(raw: &[f64], m: usize) -> ChannelMatrix<f64> {
        // symmetrize, then Sinkhorn-balance; a symmetric positive matrix
        // stays symmetric under symmetric diagonal scaling
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                a[i * m + j] = raw[i * m + j] + raw[j * m + i] + 1e-3;
            }
        }
        let mut d = vec![1.0; m];
        for _ in 0..2000 {
            for i in 0..m {
                let s: f64 = (0..m).map(|j| a[i * m + j] * d[j]).sum();
                d[i] = (d[i] / s).sqrt();
            }
        }
        let rows = (0..m).map(|i| (0..m).map(|j| d[i] * a[i * m + j] * d[j]).collect::<Vec<_>>()).collect::<Vec<_>>();
        let rows = rows.into_iter().map(|r: Vec<f64>| { let s: f64 = r.iter().sum(); r.into_iter().map(|x| x / s).collect() }).collect();
        ChannelMatrix::from_rows(rows).unwrap()
    }

    proptest! {
        #[test]
        fn symmetric_doubly_stochastic_scores_zero(raw in prop::collection::vec(0.0f64..1.0, 25)) {
            let p = symmetric_ds(&raw, 5);
            prop_assert!(asymmetry_score(&p).unwrap() < 1e-10);
        }

        #[test]
        fn score_is_permutation_invariant(raw in prop::collection::vec(0.01f64..1.0, 16), seed in 0usize..24) {
            let rows: Vec<Vec<f64>> = raw.chunks(4).map(|r| { let s: f64 = r.iter().sum(); r.iter().map(|x| x / s).collect() }).collect();
            let p = ChannelMatrix::from_rows(rows).unwrap();
            let mut perm = vec![0, 1, 2, 3];
            let mut k = seed;
            for i in (1..4).rev() { perm.swap(i, k % (i + 1)); k /= i + 1; }
            let q = p.relabel(&perm).unwrap();
            prop_assert!((asymmetry_score(&p).unwrap() - asymmetry_score(&q).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn stationary_is_fixed_point(raw in prop::collection::vec(0.0f64..1.0, 36)) {
            let rows: Vec<Vec<f64>> = raw.chunks(6).map(|r| { let s: f64 = r.iter().sum::<f64>() + 1e-9; r.iter().map(|x| (x + 1e-9 / 6.0) / s).collect() }).collect();
            let p = ChannelMatrix::from_rows(rows).unwrap();
            let s = stationary_distribution(&p, Smoothing::Auto).unwrap();
            prop_assert!(s.residual <= 1e-12);
        }
    }
}
