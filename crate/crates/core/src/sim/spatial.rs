//! Spatial filters from generalized eigenproblems: TRCA and SSCOR.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, principal_generalized_eigen, solve, Matrix};

/// Relative ridge added to covariance diagonals: `1e-6 · trace / N_c`.
pub const RIDGE: f64 = 1e-6;

/// One trial as `channels × samples`.
pub type Trial = Vec<Vec<f64>>;

fn dims(trials: &[Trial]) -> Result<(usize, usize)> {
    if trials.len() < 2 {
        return Err(Error::InsufficientTrials { needed: 2, found: trials.len() });
    }
    let nc = trials[0].len();
    let ns = trials[0].first().map_or(0, Vec::len);
    if nc == 0 || ns < 2 {
        return Err(Error::Degenerate("trials need at least one channel and two samples".into()));
    }
    for t in trials {
        if t.len() != nc || t.iter().any(|c| c.len() != ns) {
            return Err(Error::Degenerate("trials differ in shape".into()));
        }
    }
    Ok((nc, ns))
}

/// Removes each channel's mean.
pub fn center(trial: &Trial) -> Trial {
    trial
        .iter()
        .map(|ch| {
            let m = ch.iter().sum::<f64>() / ch.len() as f64;
            ch.iter().map(|v| v - m).collect()
        })
        .collect()
}

/// `Cov(x, y)` between the channels of two centered trials.
fn cross_cov(x: &Trial, y: &Trial) -> Matrix<f64> {
    let ns = x[0].len();
    let mut c = Matrix::zeros(x.len(), y.len());
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            c[(i, j)] = dot(xi, yj) / (ns - 1) as f64;
        }
    }
    c
}

/// Adds the ridge; reports whether the unregularized matrix was already
/// positive definite.
fn regularize(mut q: Matrix<f64>) -> (Matrix<f64>, bool) {
    let was_pd = cholesky(&q).is_ok();
    let n = q.rows();
    let r = RIDGE * q.trace() / n as f64;
    q.add_diagonal(if r > 0.0 { r } else { RIDGE });
    (q, !was_pd)
}

/// Element-wise mean of trials.
pub fn template(trials: &[Trial]) -> Trial {
    let nc = trials[0].len();
    let ns = trials[0][0].len();
    let k = trials.len() as f64;
    (0..nc).map(|c| (0..ns).map(|t| trials.iter().map(|tr| tr[c][t]).sum::<f64>() / k).collect()).collect()
}

#[derive(Debug, Clone)]
pub struct TrcaFilter {
    pub w: Vec<f64>,
    pub eigenvalue: f64,
    /// Inter-trial covariance sum.
    pub s: Matrix<f64>,
    /// Regularized covariance of the concatenated trials.
    pub q: Matrix<f64>,
    /// True when `Q` needed the ridge to become positive definite.
    pub regularized: bool,
}

impl TrcaFilter {
    /// `max |S w - λ Q w|`.
    pub fn residual(&self) -> f64 {
        let sw = self.s.matvec(&self.w).expect("square");
        let qw = self.q.matvec(&self.w).expect("square");
        sw.iter().zip(&qw).fold(0.0f64, |r, (a, b)| r.max((a - self.eigenvalue * b).abs()))
    }
}

/// Task-related component analysis: the principal generalized eigenvector
/// of `(S, Q)`, with `S` the sum of covariances over ordered pairs of
/// distinct trials and `Q` the covariance of the concatenated trials.
/// Scaled so that `wᵀ Q w = 1`.
pub fn trca_weights(trials: &[Trial]) -> Result<TrcaFilter> {
    let (nc, ns) = dims(trials)?;
    let centered: Vec<Trial> = trials.iter().map(center).collect();
    // Σ_{h1≠h2} Cov(x_h1, x_h2) = Cov(Σ x_h) - Σ Cov(x_h)
    let sum: Trial = (0..nc).map(|c| (0..ns).map(|t| centered.iter().map(|x| x[c][t]).sum()).collect()).collect();
    let mut s = cross_cov(&sum, &sum);
    let mut q = Matrix::zeros(nc, nc);
    for x in &centered {
        let c = cross_cov(x, x);
        s = s.sub(&c)?;
        q = q.add(&c)?;
    }
    // concatenation: the per-trial means are already removed, so the pooled
    // covariance is the sample-weighted average of per-trial covariances
    let n_total = trials.len() * ns;
    let q = q.scale((ns - 1) as f64 / (n_total - 1) as f64);
    let (q, regularized) = regularize(q);
    let (eigenvalue, w) = principal_generalized_eigen(&s, &q)?;
    Ok(TrcaFilter { w, eigenvalue, s, q, regularized })
}

#[derive(Debug, Clone)]
pub struct SscorFilter {
    /// Template-space filter, `w_Xᵀ Σ_X w_X = 1`.
    pub w_template: Vec<f64>,
    /// Per-trial filters, `w_iᵀ Σ_i w_i = 1`.
    pub w_trials: Vec<Vec<f64>>,
    /// Objective `Σ_i (w_Xᵀ Cov(x_X, x_i) w_i)²` after each sweep, starting
    /// from the initial point.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub regularized: bool,
}

impl SscorFilter {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("objective has the initial value")
    }
}

pub const SSCOR_TOLERANCE: f64 = 1e-9;
pub const SSCOR_MAX_ITER: usize = 200;

/// Sum of squared correlations between the class template and each trial.
///
/// Alternating ascent: with `w_X` fixed each `w_i = Σ_i⁻¹ C_iᵀ w_X`
/// rescaled to the unit constraint; with the `w_i` fixed `w_X` is the
/// principal generalized eigenvector of `(Σ_i C_i w_i w_iᵀ C_iᵀ, Σ_X)`.
pub fn sscor_weights(trials: &[Trial]) -> Result<SscorFilter> {
    let (nc, _) = dims(trials)?;
    let centered: Vec<Trial> = trials.iter().map(center).collect();
    let tmpl = template(&centered);
    let (sigma_x, mut regularized) = regularize(cross_cov(&tmpl, &tmpl));
    let cross: Vec<Matrix<f64>> = centered.iter().map(|x| cross_cov(&tmpl, x)).collect();
    let sigmas: Vec<Matrix<f64>> = centered
        .iter()
        .map(|x| {
            let (s, r) = regularize(cross_cov(x, x));
            regularized |= r;
            s
        })
        .collect();

    let objective_of = |wx: &[f64], wi: &[Vec<f64>]| -> f64 {
        cross.iter().zip(wi).map(|(c, w)| dot(wx, &c.matvec(w).expect("square")).powi(2)).sum()
    };
    let update_trials = |wx: &[f64]| -> Result<Vec<Vec<f64>>> {
        cross
            .iter()
            .zip(&sigmas)
            .map(|(c, sig)| {
                let v = c.transpose().matvec(wx)?;
                let mut w = solve(sig, &v)?;
                let norm = dot(&w, &sig.matvec(&w)?).sqrt();
                if !(norm > 0.0) {
                    return Err(Error::Degenerate("trial filter has zero norm".into()));
                }
                w.iter_mut().for_each(|x| *x /= norm);
                Ok(w)
            })
            .collect()
    };

    let mut wx = vec![1.0; nc];
    let n0 = dot(&wx, &sigma_x.matvec(&wx)?).sqrt();
    wx.iter_mut().for_each(|x| *x /= n0);
    let mut wi = update_trials(&wx)?;
    let mut objective = vec![objective_of(&wx, &wi)];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..SSCOR_MAX_ITER {
        iterations += 1;
        let mut a = Matrix::zeros(nc, nc);
        for (c, w) in cross.iter().zip(&wi) {
            let u = c.matvec(w)?;
            for r in 0..nc {
                for k in 0..nc {
                    a[(r, k)] += u[r] * u[k];
                }
            }
        }
        wx = principal_generalized_eigen(&a, &sigma_x)?.1;
        wi = update_trials(&wx)?;
        let j = objective_of(&wx, &wi);
        let prev = *objective.last().expect("non-empty");
        objective.push(j);
        if (j - prev).abs() < SSCOR_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(SscorFilter { w_template: wx, w_trials: wi, objective, iterations, converged, regularized })
}
