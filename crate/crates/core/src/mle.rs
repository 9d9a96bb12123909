//! Maximum-likelihood estimation over the state simplex via the RpR
//! fixed-point iteration, plus the stationarity and relative-entropy
//! diagnostics that connect the likelihood to its asymptotic decay rate.

use crate::error::{Result, TomoError};
use crate::hilbert::{hermitian_eigen, CMatrix, DensityMatrix};
use crate::likelihood::{log_likelihood, MeasurementRecord};

const BOUNDARY_EIGENVALUE: f64 = 1e-8;
const SPAN_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MleResult {
    pub estimate: DensityMatrix,
    pub log_likelihood_value: f64,
    pub iterations: usize,
    /// max_i |f_i - tr(E_i sigma)| over observed outcomes; the interior
    /// first-order optimality condition says this vanishes at the argmax.
    pub stationarity_residual: f64,
    /// Estimate has an eigenvalue below 1e-8: the optimum sits on (or hugs)
    /// the boundary of the state space, where the residual test is void.
    pub boundary_flag: bool,
    /// Log-likelihood gain fell below tolerance before max_iter.
    pub converged: bool,
    /// POVM span has dimension < d^2, so the argmax need not be unique and
    /// the returned iterate is just one maximizer.
    pub ambiguous: bool,
}

/// One RpR update step: sigma -> R sigma R / tr, with
/// R = sum_i (f_i / tr(E_i sigma)) E_i over observed outcomes.
fn rpr_step(record: &MeasurementRecord, sigma: &DensityMatrix) -> DensityMatrix {
    let d = sigma.dim();
    let probs = record
        .povm()
        .probabilities(sigma)
        .expect("iteration preserves dimension");
    let n = record.n() as f64;
    let mut r = CMatrix::zeros(d, d);
    for &i in record.canonical_order() {
        let f = record.counts()[i];
        if f == 0 {
            continue;
        }
        let w = (f as f64 / n) / probs[i].max(f64::MIN_POSITIVE);
        r += record.povm().element(i).scale(w);
    }
    let next = &r * sigma.matrix() * &r;
    let sym = (&next + next.adjoint()).scale(0.5);
    let tr = sym.trace().re;
    DensityMatrix::from_valid(sym.unscale(tr))
}

/// Dimension of the real span of the POVM elements inside the d^2-dimensional
/// space of Hermitian matrices, via the rank of their Gram matrix.
fn povm_span_rank(record: &MeasurementRecord) -> usize {
    let elems = record.povm().elements();
    let r = elems.len();
    let gram = CMatrix::from_fn(r, r, |i, j| {
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for a in 0..elems[i].nrows() {
            for b in 0..elems[i].ncols() {
                acc += elems[i][(a, b)].conj() * elems[j][(a, b)];
            }
        }
        acc
    });
    let (vals, _) = hermitian_eigen(&gram);
    let top = vals.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    vals.iter().filter(|&&v| v > SPAN_RANK_TOL * top).count()
}

/// Maximize the log-likelihood by RpR iteration from the maximally mixed
/// state, stopping when the per-step gain drops below `tol` (converged) or
/// after `max_iter` steps (converged = false, best iterate still returned).
pub fn mle_estimate(
    record: &MeasurementRecord,
    tol: f64,
    max_iter: usize,
) -> Result<MleResult> {
    if tol <= 0.0 {
        return Err(TomoError::parameter("tol", "tolerance must be positive"));
    }
    let d = record.dim();
    let mut sigma = DensityMatrix::maximally_mixed(d);
    let mut ll = log_likelihood(record, &sigma)?;
    if ll == f64::NEG_INFINITY {
        return Err(TomoError::Estimation(
            "an observed outcome has zero probability at the interior start; record is inconsistent"
                .into(),
        ));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = rpr_step(record, &sigma);
        let next_ll = log_likelihood(record, &next)?;
        iterations += 1;
        let gain = next_ll - ll;
        if next_ll > ll {
            sigma = next;
            ll = next_ll;
        }
        if gain < tol {
            converged = true;
            break;
        }
    }
    let residuals = stationarity_check(record, &sigma)?;
    let mut residual = 0.0f64;
    for (i, &rv) in residuals.iter().enumerate() {
        if record.counts()[i] > 0 {
            residual = residual.max(rv.abs());
        }
    }
    let boundary_flag = sigma.eigenvalues()[0] < BOUNDARY_EIGENVALUE;
    let ambiguous = povm_span_rank(record) < d * d;
    Ok(MleResult {
        estimate: sigma,
        log_likelihood_value: ll,
        iterations,
        stationarity_residual: residual,
        boundary_flag,
        converged,
        ambiguous,
    })
}

/// Frequency-matching residual vector (f_i - tr(E_i sigma))_i.
pub fn stationarity_check(
    record: &MeasurementRecord,
    sigma: &DensityMatrix,
) -> Result<Vec<f64>> {
    let probs = record.povm().probabilities(sigma)?;
    let n = record.n() as f64;
    Ok(record
        .counts()
        .iter()
        .zip(probs.iter())
        .map(|(&f, &p)| f as f64 / n - p)
        .collect())
}

/// Relative entropy D(f || E(sigma)) = sum_i f_i (ln f_i - ln tr(E_i sigma)),
/// natural log, zero-count outcomes contributing nothing. +inf when an
/// observed outcome has zero probability. This is the asymptotic decay
/// exponent of the likelihood ratio at sigma.
pub fn decay_exponent(record: &MeasurementRecord, sigma: &DensityMatrix) -> Result<f64> {
    let probs = record.povm().probabilities(sigma)?;
    let n = record.n() as f64;
    let mut total = 0.0;
    for &i in record.canonical_order() {
        let c = record.counts()[i];
        if c == 0 {
            continue;
        }
        let f = c as f64 / n;
        let p = probs[i];
        if p <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total += f * (f.ln() - p.ln());
    }
    Ok(total.max(0.0))
}

/// sqrt(2 D): by Pinsker's inequality an upper bound on the total variation
/// walk |f - E(sigma)|_1 compatible with the observed decay exponent.
pub fn pinsker_halfwidth(record: &MeasurementRecord, sigma: &DensityMatrix) -> Result<f64> {
    Ok((2.0 * decay_exponent(record, sigma)?).sqrt())
}
