//! JSON shapes for everything that crosses a file boundary: measurement
//! records, region reports, moment vectors, coverage configs and reports.
//!
//! Complex matrices travel as nested arrays of [re, im] pairs, row-major.
//! The DTOs validate on the way in and hand back domain types; on the way
//! out they are plain serde structs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::hilbert::{CMatrix, DensityMatrix, Povm};
use crate::likelihood::{LikelihoodSummary, MeasurementRecord};
use crate::mle::MleResult;
use crate::moments::{MomentSource, MomentVector};
use crate::region::ConfidenceRegion;
use crate::simulator::{CoverageConfig, CoverageReport, TrialDiagnostic, TruthSource};

pub type MatrixDto = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_dto(m: &CMatrix) -> MatrixDto {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_dto(dto: &MatrixDto) -> Result<CMatrix> {
    let rows = dto.len();
    if rows == 0 {
        return Err(TomoError::invalid("matrix", "no rows"));
    }
    let cols = dto[0].len();
    if cols == 0 || dto.iter().any(|r| r.len() != cols) {
        return Err(TomoError::invalid("matrix", "rows have inconsistent lengths"));
    }
    let mut m = CMatrix::zeros(rows, cols);
    for (i, row) in dto.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(TomoError::invalid("matrix", "entries must be finite"));
            }
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Measurement records
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PovmElementDto {
    pub label: String,
    pub matrix: MatrixDto,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecordDto {
    pub dimension: usize,
    pub povm: Vec<PovmElementDto>,
    pub counts: Vec<u64>,
}

impl RecordDto {
    pub fn from_record(record: &MeasurementRecord) -> Self {
        let povm = record.povm();
        RecordDto {
            dimension: record.dim(),
            povm: povm
                .elements()
                .iter()
                .zip(povm.labels())
                .map(|(m, l)| PovmElementDto { label: l.clone(), matrix: matrix_to_dto(m) })
                .collect(),
            counts: record.counts().to_vec(),
        }
    }

    pub fn into_record(self) -> Result<MeasurementRecord> {
        let mut elements = Vec::with_capacity(self.povm.len());
        let mut labels = Vec::with_capacity(self.povm.len());
        for e in &self.povm {
            let m = matrix_from_dto(&e.matrix)?;
            if m.nrows() != self.dimension || m.ncols() != self.dimension {
                return Err(TomoError::invalid(
                    "dimension",
                    format!(
                        "declared dimension {} but element {:?} is {}x{}",
                        self.dimension,
                        e.label,
                        m.nrows(),
                        m.ncols()
                    ),
                ));
            }
            elements.push(m);
            labels.push(e.label.clone());
        }
        let povm = Povm::new(elements, Some(labels))?;
        MeasurementRecord::new(povm, self.counts)
    }
}

pub fn record_to_json(record: &MeasurementRecord) -> String {
    serde_json::to_string_pretty(&RecordDto::from_record(record)).expect("record serializes")
}

pub fn record_from_json(text: &str) -> Result<MeasurementRecord> {
    let dto: RecordDto =
        serde_json::from_str(text).map_err(|e| TomoError::invalid("record", e.to_string()))?;
    dto.into_record()
}

// ---------------------------------------------------------------------------
// Likelihood summary and MLE
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LikelihoodSummaryDto {
    pub log_c: f64,
    pub log_c_stderr: f64,
    pub sample_count: usize,
    pub seed: u64,
    /// Canonical-record fingerprint, hex; an opaque consistency token.
    pub record_fingerprint: String,
}

impl LikelihoodSummaryDto {
    pub fn from_summary(s: &LikelihoodSummary) -> Self {
        LikelihoodSummaryDto {
            log_c: s.log_c(),
            log_c_stderr: s.log_c_stderr(),
            sample_count: s.sample_count(),
            seed: s.seed(),
            record_fingerprint: format!("{:016x}", s.fingerprint()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MleDto {
    pub estimate: MatrixDto,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub stationarity_residual: f64,
    pub boundary: bool,
    pub converged: bool,
    pub ambiguous: bool,
}

impl MleDto {
    pub fn from_result(r: &MleResult) -> Self {
        MleDto {
            estimate: matrix_to_dto(r.estimate.matrix()),
            log_likelihood: r.log_likelihood_value,
            iterations: r.iterations,
            stationarity_residual: r.stationarity_residual,
            boundary: r.boundary_flag,
            converged: r.converged,
            ambiguous: r.ambiguous,
        }
    }
}

// ---------------------------------------------------------------------------
// Region reports
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionReportDto {
    pub epsilon: f64,
    pub n: u64,
    pub d: usize,
    pub log_lambda_star: f64,
    pub delta: f64,
    pub mass_estimate: f64,
    pub mass_stderr: f64,
    pub witness_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<MatrixDto>>,
}

impl RegionReportDto {
    pub fn from_region(region: &ConfidenceRegion, include_witnesses: bool) -> Self {
        RegionReportDto {
            epsilon: region.epsilon(),
            n: region.n(),
            d: region.dim(),
            log_lambda_star: region.log_lambda_star(),
            delta: region.delta(),
            mass_estimate: region.mass_estimate(),
            mass_stderr: region.mass_stderr(),
            witness_count: region.witnesses().len(),
            witnesses: include_witnesses.then(|| {
                region.witnesses().iter().map(|w| matrix_to_dto(w.matrix())).collect()
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Moment vectors
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentCoeffDto {
    pub l: usize,
    pub m: i64,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentVectorDto {
    pub l_max: usize,
    pub coeffs: Vec<MomentCoeffDto>,
}

impl MomentVectorDto {
    pub fn from_vector(mv: &MomentVector) -> Self {
        let mut coeffs = Vec::with_capacity((mv.l_max() + 1) * (mv.l_max() + 1));
        for l in 0..=mv.l_max() {
            for m in -(l as i64)..=(l as i64) {
                let c = mv.coeff(l, m);
                coeffs.push(MomentCoeffDto { l, m, re: c.re, im: c.im });
            }
        }
        MomentVectorDto { l_max: mv.l_max(), coeffs }
    }

    pub fn into_vector(self) -> Result<MomentVector> {
        let mut mv = MomentVector::zero(self.l_max);
        for c in &self.coeffs {
            if c.l > self.l_max || c.m.unsigned_abs() as usize > c.l {
                return Err(TomoError::invalid(
                    "coeffs",
                    format!("index (l={}, m={}) out of range for l_max {}", c.l, c.m, self.l_max),
                ));
            }
            mv.set_coeff(c.l, c.m, Complex64::new(c.re, c.im));
        }
        Ok(mv)
    }
}

/// Input accepted by moment expansion: either a covariant outcome
/// { "covariant": { "n", "theta", "phi" } } or a full record document.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MomentInputDto {
    Covariant { covariant: CovariantOutcomeDto },
    Record(RecordDto),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CovariantOutcomeDto {
    pub n: u64,
    pub theta: f64,
    pub phi: f64,
}

impl MomentInputDto {
    pub fn into_source(self) -> Result<MomentSource> {
        match self {
            MomentInputDto::Covariant { covariant } => Ok(MomentSource::Covariant {
                n: covariant.n,
                theta: covariant.theta,
                phi: covariant.phi,
            }),
            MomentInputDto::Record(dto) => Ok(MomentSource::Record(dto.into_record()?)),
        }
    }
}

pub fn moment_source_from_json(text: &str) -> Result<MomentSource> {
    let dto: MomentInputDto =
        serde_json::from_str(text).map_err(|e| TomoError::invalid("record", e.to_string()))?;
    dto.into_source()
}

// ---------------------------------------------------------------------------
// Coverage experiments
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TruthSourceDto {
    HilbertSchmidt,
    Fixed { state: MatrixDto },
    PureHaar,
}

impl TruthSourceDto {
    pub fn from_source(source: &TruthSource) -> Self {
        match source {
            TruthSource::HilbertSchmidt => TruthSourceDto::HilbertSchmidt,
            TruthSource::Fixed(s) => TruthSourceDto::Fixed { state: matrix_to_dto(s.matrix()) },
            TruthSource::PureHaar => TruthSourceDto::PureHaar,
        }
    }

    pub fn into_source(self) -> Result<TruthSource> {
        Ok(match self {
            TruthSourceDto::HilbertSchmidt => TruthSource::HilbertSchmidt,
            TruthSourceDto::Fixed { state } => {
                TruthSource::Fixed(DensityMatrix::new(matrix_from_dto(&state)?)?)
            }
            TruthSourceDto::PureHaar => TruthSource::PureHaar,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverageConfigDto {
    pub dimension: usize,
    pub povm: Vec<PovmElementDto>,
    pub n: u64,
    pub epsilon: f64,
    pub trials: usize,
    pub truth_source: TruthSourceDto,
    pub seed: u64,
    pub mc_samples: usize,
    #[serde(default)]
    pub exclude_failed_builds: bool,
}

impl CoverageConfigDto {
    pub fn from_config(config: &CoverageConfig) -> Self {
        CoverageConfigDto {
            dimension: config.dimension,
            povm: config
                .povm
                .elements()
                .iter()
                .zip(config.povm.labels())
                .map(|(m, l)| PovmElementDto { label: l.clone(), matrix: matrix_to_dto(m) })
                .collect(),
            n: config.n,
            epsilon: config.epsilon,
            trials: config.trials,
            truth_source: TruthSourceDto::from_source(&config.truth_source),
            seed: config.seed,
            mc_samples: config.mc_samples,
            exclude_failed_builds: config.exclude_failed_builds,
        }
    }

    pub fn into_config(self) -> Result<CoverageConfig> {
        let mut elements = Vec::with_capacity(self.povm.len());
        let mut labels = Vec::with_capacity(self.povm.len());
        for e in &self.povm {
            elements.push(matrix_from_dto(&e.matrix)?);
            labels.push(e.label.clone());
        }
        Ok(CoverageConfig {
            dimension: self.dimension,
            povm: Povm::new(elements, Some(labels))?,
            n: self.n,
            epsilon: self.epsilon,
            trials: self.trials,
            truth_source: self.truth_source.into_source()?,
            seed: self.seed,
            mc_samples: self.mc_samples,
            exclude_failed_builds: self.exclude_failed_builds,
        })
    }
}

pub fn coverage_config_from_json(text: &str) -> Result<CoverageConfig> {
    let dto: CoverageConfigDto =
        serde_json::from_str(text).map_err(|e| TomoError::invalid("config", e.to_string()))?;
    dto.into_config()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverageReportDto {
    pub config: CoverageConfigDto,
    pub trials: usize,
    pub hits: usize,
    pub excluded: usize,
    pub empirical_coverage: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub diagnostics: Vec<TrialDiagnostic>,
}

impl CoverageReportDto {
    pub fn from_report(report: &CoverageReport) -> Self {
        CoverageReportDto {
            config: CoverageConfigDto::from_config(&report.config),
            trials: report.trials,
            hits: report.hits,
            excluded: report.excluded,
            empirical_coverage: report.empirical_coverage,
            wilson_low: report.wilson_low,
            wilson_high: report.wilson_high,
            diagnostics: report.diagnostics.clone(),
        }
    }
}
