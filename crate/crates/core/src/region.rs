//! Confidence regions: the highest-density likelihood level set whose
//! estimated mass clears the confidence threshold, enlarged by a purified
//! distance margin. Membership tests are witness-backed, so every "inside"
//! verdict is certified by an explicit state that satisfies the defining
//! inequalities.

use rayon::prelude::*;

use crate::combinatorics::{delta_radius, mass_threshold};
use crate::error::{Result, TomoError};
use crate::hilbert::{fidelity, povm_seminorm, DensityMatrix, Povm};
use crate::likelihood::{
    log_likelihood, mix, sample_likelihood_values, LikelihoodSummary, MeasurementRecord,
};
use crate::util::log_mean_exp;

const MIN_EFFECTIVE_SAMPLES: f64 = 100.0;
const EXTENT_SUBSAMPLE: usize = 512;
const BISECTION_STEPS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Outside,
    /// The best witness found sits within 5% of the enlargement radius:
    /// too close to call against Monte Carlo noise.
    BoundaryUncertain,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CutChoice {
    pub k: usize,
    pub mass: f64,
    pub stderr: f64,
    pub effective_samples: f64,
}

/// Choose the cut index into log-likelihood values sorted descending: the
/// smallest k (largest threshold) whose self-normalized weighted mass m(k)
/// satisfies m(k) >= threshold + 3 stderr(k), subject to the cut falling on a
/// strict level boundary so that the kept set is exactly {L >= lambda*} even
/// under ties. k = len is always admissible (mass 1, stderr 0). Returns None
/// only when every value is -inf.
pub(crate) fn select_cut(sorted_ll: &[f64], threshold: f64) -> Option<CutChoice> {
    let n = sorted_ll.len();
    let max = *sorted_ll.first()?;
    if !max.is_finite() {
        return None;
    }
    // Prefix sums of shifted weights and their squares.
    let mut s1 = vec![0.0f64; n + 1];
    let mut s2 = vec![0.0f64; n + 1];
    for (j, &v) in sorted_ll.iter().enumerate() {
        let w = (v - max).exp();
        s1[j + 1] = s1[j] + w;
        s2[j + 1] = s2[j] + w * w;
    }
    let total = s1[n];
    let total_sq = s2[n];
    for k in 1..=n {
        let boundary = k == n || sorted_ll[k - 1] > sorted_ll[k];
        if !boundary {
            continue;
        }
        let mass = s1[k] / total;
        let var = (1.0 - mass) * (1.0 - mass) * s2[k] + mass * mass * (total_sq - s2[k]);
        let stderr = var.sqrt() / total;
        if mass >= threshold + 3.0 * stderr {
            let effective_samples = if s2[k] > 0.0 { s1[k] * s1[k] / s2[k] } else { 0.0 };
            return Some(CutChoice { k, mass, stderr, effective_samples });
        }
    }
    unreachable!("k = len always satisfies mass 1 >= threshold + 0");
}

/// A built confidence region: level set Gamma = {L >= lambda*} represented by
/// its threshold and the Monte Carlo witnesses found inside, plus the
/// purified-distance enlargement radius delta.
#[derive(Debug, Clone)]
pub struct ConfidenceRegion {
    record: MeasurementRecord,
    epsilon: f64,
    log_lambda_star: f64,
    delta: f64,
    witnesses: Vec<DensityMatrix>,
    mass_estimate: f64,
    mass_stderr: f64,
    summary: LikelihoodSummary,
}

/// Build the region: Hilbert-Schmidt samples importance-weighted by the
/// likelihood, cut at the largest threshold whose estimated mass clears
/// mass_threshold(n, d, epsilon) by three standard errors.
pub fn build_region(
    record: &MeasurementRecord,
    epsilon: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<ConfidenceRegion> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(TomoError::parameter("epsilon", format!("must be in (0, 1), got {epsilon}")));
    }
    if mc_samples < 1000 {
        return Err(TomoError::parameter(
            "mc_samples",
            format!("need at least 1000 samples, got {mc_samples}"),
        ));
    }
    let n = record.n();
    let d = record.dim();
    let threshold = mass_threshold(n, d as u32, epsilon)?;
    let delta = delta_radius(n, d as u32, epsilon)?;

    let (values, states) = sample_likelihood_values(record, mc_samples, seed, true);
    let (log_c, log_c_se) = log_mean_exp(&values).ok_or_else(|| {
        TomoError::Estimation(
            "every Monte Carlo sample had zero likelihood; record is degenerate".into(),
        )
    })?;
    let summary = LikelihoodSummary::from_parts(log_c, log_c_se, mc_samples, seed, record);

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let sorted_ll: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let cut = select_cut(&sorted_ll, threshold)
        .ok_or_else(|| TomoError::Estimation("all sampled likelihoods vanish".into()))?;
    if cut.effective_samples < MIN_EFFECTIVE_SAMPLES {
        return Err(TomoError::Estimation(format!(
            "effective sample size above the threshold is {:.1} (< {}); increase mc_samples \
             (likelihood too concentrated for {} samples)",
            cut.effective_samples, MIN_EFFECTIVE_SAMPLES, mc_samples
        )));
    }
    let log_lambda_star = sorted_ll[cut.k - 1];
    let witnesses: Vec<DensityMatrix> =
        order[..cut.k].iter().map(|&i| states[i].clone()).collect();
    log::info!(
        "region: kept {} of {} samples, mass {:.6} +- {:.2e}, ess {:.0}, log lambda* {:.4}, delta {:.4}",
        cut.k, mc_samples, cut.mass, cut.stderr, cut.effective_samples, log_lambda_star, delta
    );
    Ok(ConfidenceRegion {
        record: record.clone(),
        epsilon,
        log_lambda_star,
        delta,
        witnesses,
        mass_estimate: cut.mass,
        mass_stderr: cut.stderr,
        summary,
    })
}

impl ConfidenceRegion {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> u64 {
        self.record.n()
    }

    pub fn dim(&self) -> usize {
        self.record.dim()
    }

    pub fn log_lambda_star(&self) -> f64 {
        self.log_lambda_star
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn witnesses(&self) -> &[DensityMatrix] {
        &self.witnesses
    }

    pub fn mass_estimate(&self) -> f64 {
        self.mass_estimate
    }

    pub fn mass_stderr(&self) -> f64 {
        self.mass_stderr
    }

    pub fn summary(&self) -> &LikelihoodSummary {
        &self.summary
    }

    pub fn record(&self) -> &MeasurementRecord {
        &self.record
    }

    /// Membership in the enlarged region. Inside verdicts are certified:
    /// either L(sigma) >= lambda* (sigma is in Gamma itself), or an explicit
    /// state with L >= lambda* lies within purified distance delta. The
    /// search refines the `probe_budget` nearest witnesses by bisecting
    /// toward sigma along straight lines, which stays feasible because L is
    /// concave on segments anchored in the level set.
    pub fn contains(&self, sigma: &DensityMatrix, probe_budget: usize) -> Result<Membership> {
        if sigma.dim() != self.dim() {
            return Err(TomoError::DimensionMismatch { expected: self.dim(), found: sigma.dim() });
        }
        if self.delta >= 1.0 {
            return Ok(Membership::Inside);
        }
        if log_likelihood(&self.record, sigma)? >= self.log_lambda_star {
            return Ok(Membership::Inside);
        }
        // Purified distance to every witness; P^2 = 1 - F^2, so rank by F.
        let mut by_fidelity: Vec<(f64, usize)> = self
            .witnesses
            .par_iter()
            .enumerate()
            .map(|(i, w)| (fidelity(sigma, w).expect("dims checked"), i))
            .collect();
        by_fidelity.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut best_p = f64::INFINITY;
        if let Some(&(f, _)) = by_fidelity.first() {
            let p = (1.0 - f * f).max(0.0).sqrt();
            if p <= self.delta {
                return Ok(Membership::Inside);
            }
            best_p = p;
        }
        // Refine from the most promising witnesses: walk each one toward
        // sigma as far as the level constraint allows.
        for &(_, wi) in by_fidelity.iter().take(probe_budget) {
            let w = &self.witnesses[wi];
            let mut t_lo = 0.0f64;
            let mut t_hi = 1.0f64;
            for _ in 0..BISECTION_STEPS {
                let t = 0.5 * (t_lo + t_hi);
                let candidate = mix(sigma, w, t);
                if log_likelihood(&self.record, &candidate)? >= self.log_lambda_star {
                    t_lo = t;
                } else {
                    t_hi = t;
                }
            }
            let candidate = mix(sigma, w, t_lo);
            // Re-check feasibility of the final point rather than trusting
            // the bisection bracket.
            if log_likelihood(&self.record, &candidate)? < self.log_lambda_star {
                continue;
            }
            let f = fidelity(sigma, &candidate)?;
            let p = (1.0 - f * f).max(0.0).sqrt();
            if p <= self.delta {
                return Ok(Membership::Inside);
            }
            best_p = best_p.min(p);
        }
        if best_p <= self.delta * 1.05 + 1e-9 {
            Ok(Membership::BoundaryUncertain)
        } else {
            Ok(Membership::Outside)
        }
    }

    /// Inner estimate of the region diameter in the measurement seminorm:
    /// max over witness pairs of povm_seminorm(E, w - w'). Witness sets
    /// larger than a fixed cap are strided down deterministically.
    pub fn extent(&self, povm: &Povm) -> Result<f64> {
        if povm.dim() != self.dim() {
            return Err(TomoError::DimensionMismatch { expected: self.dim(), found: povm.dim() });
        }
        if self.witnesses.len() < 2 {
            log::warn!("extent of a region with {} witness(es) is 0", self.witnesses.len());
            return Ok(0.0);
        }
        let k = self.witnesses.len();
        let picks: Vec<usize> = if k <= EXTENT_SUBSAMPLE {
            (0..k).collect()
        } else {
            let mut v: Vec<usize> = (0..EXTENT_SUBSAMPLE).map(|m| m * k / EXTENT_SUBSAMPLE).collect();
            v.dedup();
            v
        };
        let best = picks
            .par_iter()
            .enumerate()
            .map(|(a, &i)| {
                let mut local = 0.0f64;
                for &j in picks.iter().skip(a + 1) {
                    let diff = self.witnesses[i].matrix() - self.witnesses[j].matrix();
                    let s = povm_seminorm(povm, &diff).expect("dims checked");
                    local = local.max(s);
                }
                local
            })
            .reduce(|| 0.0, f64::max);
        Ok(best)
    }
}
