//! Monte Carlo check of the coverage guarantee: draw a true state, simulate
//! a record, build the region, and test whether the truth landed inside.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::hilbert::{sample_haar_pure, sample_hilbert_schmidt, DensityMatrix, Povm};
use crate::likelihood::MeasurementRecord;
use crate::region::{build_region, Membership};
use crate::util::{derive_rng, splitmix64};

/// 95% two-sided normal quantile for the Wilson interval.
const WILSON_Z: f64 = 1.959963984540054;

/// Probe budget handed to membership tests inside coverage trials.
const MEMBERSHIP_PROBES: usize = 64;

/// How the true state of each trial is drawn.
#[derive(Clone, Debug)]
pub enum TruthSource {
    /// Hilbert-Schmidt (Ginibre-induced) measure over density matrices.
    HilbertSchmidt,
    /// The same state every trial.
    Fixed(DensityMatrix),
    /// Haar-random pure states.
    PureHaar,
}

/// Everything a coverage experiment depends on. Two configs with equal
/// fields produce identical reports.
#[derive(Clone, Debug)]
pub struct CoverageConfig {
    pub dimension: usize,
    pub povm: Povm,
    pub n: u64,
    pub epsilon: f64,
    pub trials: usize,
    pub truth_source: TruthSource,
    pub seed: u64,
    pub mc_samples: usize,
    /// When set, trials whose region build fails are dropped from the
    /// denominator instead of counting as misses.
    pub exclude_failed_builds: bool,
}

/// Outcome of a single coverage trial. `delta` and `log_lambda_star` are
/// absent when the region build failed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialDiagnostic {
    pub trial: usize,
    pub delta: Option<f64>,
    pub log_lambda_star: Option<f64>,
    pub membership: Option<String>,
    pub hit: bool,
    pub build_error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct CoverageReport {
    pub config: CoverageConfig,
    pub trials: usize,
    pub hits: usize,
    pub excluded: usize,
    pub empirical_coverage: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub diagnostics: Vec<TrialDiagnostic>,
}

/// Wilson 95% score interval for hits out of trials.
pub fn wilson_interval(hits: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let center = (hits as f64 + 0.5 * z2) / (n + z2);
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Draw an n-sample i.i.d. record from tr(E_i sigma). Probabilities are
/// renormalized when their sum strays from 1 by at most 1e-9 (floating-point
/// slack); anything worse is rejected as an inconsistent measurement model.
pub fn simulate_record(
    sigma_true: &DensityMatrix,
    povm: &Povm,
    n: u64,
    rng: &mut impl Rng,
) -> Result<MeasurementRecord> {
    if n < 1 {
        return Err(TomoError::parameter("n", "need at least one sample"));
    }
    let mut probs = povm.probabilities(sigma_true)?;
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(TomoError::invalid(
            "povm",
            format!("outcome probabilities sum to {total}, not 1"),
        ));
    }
    for p in &mut probs {
        *p /= total;
    }
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = probs.len() - 1;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = i;
                break;
            }
        }
        counts[chosen] += 1;
    }
    MeasurementRecord::new(povm.clone(), counts)
}

fn draw_truth(source: &TruthSource, dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    match source {
        TruthSource::HilbertSchmidt => sample_hilbert_schmidt(dim, rng),
        TruthSource::Fixed(sigma) => sigma.clone(),
        TruthSource::PureHaar => DensityMatrix::from_pure(&sample_haar_pure(dim, rng)),
    }
}

/// Run the full experiment. Trials are independent and parallelized; each
/// trial derives its own RNG streams from (seed, trial index), so the report
/// does not depend on thread count or scheduling.
///
/// A trial is a hit only when the membership test certifies Inside;
/// boundary-uncertain verdicts and failed region builds count against
/// coverage (unless `exclude_failed_builds` drops the latter), keeping the
/// accounting pessimistic.
pub fn coverage_experiment(config: &CoverageConfig) -> Result<CoverageReport> {
    if config.trials < 1 {
        return Err(TomoError::parameter("trials", "need at least one trial"));
    }
    if config.povm.dim() != config.dimension {
        return Err(TomoError::DimensionMismatch {
            expected: config.dimension,
            found: config.povm.dim(),
        });
    }
    if let TruthSource::Fixed(sigma) = &config.truth_source {
        if sigma.dim() != config.dimension {
            return Err(TomoError::DimensionMismatch {
                expected: config.dimension,
                found: sigma.dim(),
            });
        }
    }
    if !(config.epsilon > 0.0 && config.epsilon < 1.0) {
        return Err(TomoError::parameter("epsilon", "must lie strictly between 0 and 1"));
    }

    let diagnostics: Vec<TrialDiagnostic> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = derive_rng(config.seed, trial as u64);
            let sigma = draw_truth(&config.truth_source, config.dimension, &mut rng);
            let record = match simulate_record(&sigma, &config.povm, config.n, &mut rng) {
                Ok(r) => r,
                Err(e) => {
                    return TrialDiagnostic {
                        trial,
                        delta: None,
                        log_lambda_star: None,
                        membership: None,
                        hit: false,
                        build_error: Some(e.to_string()),
                    }
                }
            };
            let region_seed = splitmix64(config.seed ^ (trial as u64).wrapping_mul(0x9E3779B97F4A7C15));
            match build_region(&record, config.epsilon, config.mc_samples, region_seed) {
                Ok(region) => {
                    let verdict = region.contains(&sigma, MEMBERSHIP_PROBES);
                    match verdict {
                        Ok(m) => TrialDiagnostic {
                            trial,
                            delta: Some(region.delta()),
                            log_lambda_star: Some(region.log_lambda_star()),
                            membership: Some(membership_label(m).to_string()),
                            hit: m == Membership::Inside,
                            build_error: None,
                        },
                        Err(e) => TrialDiagnostic {
                            trial,
                            delta: Some(region.delta()),
                            log_lambda_star: Some(region.log_lambda_star()),
                            membership: None,
                            hit: false,
                            build_error: Some(e.to_string()),
                        },
                    }
                }
                Err(e) => TrialDiagnostic {
                    trial,
                    delta: None,
                    log_lambda_star: None,
                    membership: None,
                    hit: false,
                    build_error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let excluded = if config.exclude_failed_builds {
        diagnostics.iter().filter(|d| d.build_error.is_some()).count()
    } else {
        0
    };
    let denominator = config.trials - excluded;
    if denominator == 0 {
        return Err(TomoError::Estimation(
            "every trial failed to build a region".into(),
        ));
    }
    let hits = diagnostics.iter().filter(|d| d.hit).count();
    let (lo, hi) = wilson_interval(hits, denominator);
    Ok(CoverageReport {
        config: config.clone(),
        trials: config.trials,
        hits,
        excluded,
        empirical_coverage: hits as f64 / denominator as f64,
        wilson_low: lo,
        wilson_high: hi,
        diagnostics,
    })
}

pub fn membership_label(m: Membership) -> &'static str {
    match m {
        Membership::Inside => "inside",
        Membership::Outside => "outside",
        Membership::BoundaryUncertain => "boundary-uncertain",
    }
}
