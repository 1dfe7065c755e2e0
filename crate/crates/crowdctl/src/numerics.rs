//! Probability numerics shared by every other module: KL divergence,
//! stable log-expectation-of-exponentials, expectations, and forward
//! propagation of marginals through a kernel sequence. Everything is in nats.

use crate::error::{Error, Result};
use crate::model::{BehaviorSequence, Pmf, MASS_TOLERANCE, RENORM_THRESHOLD};

/// KL divergence `Σ_i p_i ln(p_i / q_i)` between two pmfs (or kernel rows),
/// with the convention `0 · ln(0/q) = 0`. Returns exactly 0 when `p == q`
/// elementwise. Errors where `p_i > 0` and `q_i = 0`: the divergence is
/// undefined there and the inputs break absolute continuity.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    assert_eq!(p.len(), q.len(), "kl_divergence: length mismatch");
    let mut sum = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::AbsoluteContinuity {
                index: i,
                p_mass: pi,
            });
        }
        sum += pi * (pi / qi).ln();
    }
    Ok(sum)
}

/// `ln Σ_i probs_i · exp(weights_i)` (equivalently `ln E_p[exp(w)]`),
/// computed with a max shift so no intermediate exponential overflows.
/// Entries with zero probability are skipped entirely.
pub fn log_sum_exp(weights: &[f64], probs: &[f64]) -> Result<f64> {
    assert_eq!(weights.len(), probs.len(), "log_sum_exp: length mismatch");
    let max = weights
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&w, _)| w)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptySupport);
    }
    let mut acc = 0.0;
    for (&w, &p) in weights.iter().zip(probs) {
        if p > 0.0 {
            acc += p * (w - max).exp();
        }
    }
    Ok(max + acc.ln())
}

/// `Σ_i p_i f_i`.
pub fn expectation(f: &[f64], p: &[f64]) -> f64 {
    assert_eq!(f.len(), p.len(), "expectation: length mismatch");
    f.iter().zip(p).map(|(&fi, &pi)| fi * pi).sum()
}

/// Pushes `initial` forward through the kernel sequence and returns the
/// marginals at times `0..=N` (entry 0 is `initial` itself). Drift of the
/// total mass beyond `1e-12` is renormalized away; beyond `1e-9` it is an
/// error, since the inputs were then not stochastic to begin with.
pub fn propagate_marginals(initial: &Pmf, behavior: &BehaviorSequence) -> Result<Vec<Pmf>> {
    let size = initial.len();
    let mut marginals = Vec::with_capacity(behavior.horizon() + 1);
    marginals.push(initial.clone());
    for (i, kernel) in behavior.kernels.iter().enumerate() {
        assert_eq!(
            kernel.size(),
            size,
            "propagate_marginals: kernel size mismatch"
        );
        let prev = &marginals[i].mass;
        let mut next = vec![0.0; size];
        for (x, row) in kernel.rows.iter().enumerate() {
            let px = prev[x];
            if px == 0.0 {
                continue;
            }
            for (y, &m) in row.iter().enumerate() {
                next[y] += px * m;
            }
        }
        let mass: f64 = next.iter().sum();
        let drift = (mass - 1.0).abs();
        if drift > MASS_TOLERANCE {
            return Err(Error::NumericalDrift { stage: i + 1, mass });
        }
        if drift > RENORM_THRESHOLD {
            for m in &mut next {
                *m /= mass;
            }
        }
        marginals.push(Pmf::new(next));
    }
    Ok(marginals)
}
