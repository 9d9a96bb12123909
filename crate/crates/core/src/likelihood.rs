//! Likelihood evaluation for product-form measurement records and the Monte
//! Carlo machinery around the induced density mu(sigma) = exp(L(sigma)) / c
//! relative to the Hilbert-Schmidt volume.

use rayon::prelude::*;

use crate::error::{Result, TomoError};
use crate::hilbert::{sample_hilbert_schmidt, CMatrix, DensityMatrix, Povm};
use crate::util::{derive_rng, fnv1a, log_mean_exp, MC_CHUNK};

/// A POVM together with observed outcome counts. The canonical index order
/// fixed at construction makes every summation over outcomes independent of
/// how the caller happened to order the elements: jointly permuting
/// (elements, counts) yields bit-identical results everywhere downstream.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    povm: Povm,
    counts: Vec<u64>,
    total: u64,
    canonical: Vec<usize>,
    fingerprint: u64,
}

fn matrix_key(m: &CMatrix) -> Vec<u64> {
    let mut key = Vec::with_capacity(2 * m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            key.push(m[(r, c)].re.to_bits());
            key.push(m[(r, c)].im.to_bits());
        }
    }
    key
}

impl MeasurementRecord {
    pub fn new(povm: Povm, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != povm.len() {
            return Err(TomoError::invalid(
                "counts",
                format!("{} counts for {} POVM elements", counts.len(), povm.len()),
            ));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(TomoError::invalid("counts", "total count must be at least 1"));
        }
        let mut canonical: Vec<usize> = (0..counts.len()).collect();
        let keys: Vec<(u64, Vec<u64>)> = (0..counts.len())
            .map(|i| (counts[i], matrix_key(povm.element(i))))
            .collect();
        canonical.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
        let mut hash_input: Vec<u8> = Vec::new();
        hash_input.extend_from_slice(&(povm.dim() as u64).to_le_bytes());
        for &i in &canonical {
            hash_input.extend_from_slice(&counts[i].to_le_bytes());
            for w in &keys[i].1 {
                hash_input.extend_from_slice(&w.to_le_bytes());
            }
        }
        let fingerprint = fnv1a(&hash_input);
        Ok(MeasurementRecord { povm, counts, total, canonical, fingerprint })
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total number of measured copies.
    pub fn n(&self) -> u64 {
        self.total
    }

    pub fn dim(&self) -> usize {
        self.povm.dim()
    }

    /// Relative frequencies f_i = counts_i / n.
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// Outcome indices in the canonical summation order.
    pub(crate) fn canonical_order(&self) -> &[usize] {
        &self.canonical
    }

    /// Order-independent identity of the record contents.
    pub(crate) fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// ln sum_i counts_i ln tr(E_i sigma); -inf when an observed outcome has zero
/// probability. Terms are accumulated in the record's canonical order.
pub fn log_likelihood(record: &MeasurementRecord, sigma: &DensityMatrix) -> Result<f64> {
    let probs = record.povm.probabilities(sigma)?;
    let mut total = 0.0;
    for &i in record.canonical_order() {
        let f = record.counts[i];
        if f == 0 {
            continue;
        }
        let p = probs[i];
        if p <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += f as f64 * p.ln();
    }
    Ok(total)
}

/// Monte Carlo estimate of ln c where c = E_HS[exp L(sigma)], with the seed
/// and sample count that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodSummary {
    log_c: f64,
    log_c_stderr: f64,
    sample_count: usize,
    seed: u64,
    fingerprint: u64,
}

impl LikelihoodSummary {
    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    pub fn log_c_stderr(&self) -> f64 {
        self.log_c_stderr
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn matches(&self, record: &MeasurementRecord) -> bool {
        self.fingerprint == record.fingerprint()
    }

    pub(crate) fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub(crate) fn from_parts(
        log_c: f64,
        log_c_stderr: f64,
        sample_count: usize,
        seed: u64,
        record: &MeasurementRecord,
    ) -> Self {
        LikelihoodSummary {
            log_c,
            log_c_stderr,
            sample_count,
            seed,
            fingerprint: record.fingerprint(),
        }
    }
}

/// Draw Hilbert-Schmidt samples and evaluate the log-likelihood at each.
/// Samples are partitioned into fixed-size chunks, one RNG substream per
/// chunk, so the output is identical for any worker count.
pub(crate) fn sample_likelihood_values(
    record: &MeasurementRecord,
    mc_samples: usize,
    seed: u64,
    keep_states: bool,
) -> (Vec<f64>, Vec<DensityMatrix>) {
    let d = record.dim();
    let chunks = mc_samples.div_ceil(MC_CHUNK);
    let per_chunk: Vec<(Vec<f64>, Vec<DensityMatrix>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = derive_rng(seed, c as u64);
            let lo = c * MC_CHUNK;
            let hi = ((c + 1) * MC_CHUNK).min(mc_samples);
            let mut vals = Vec::with_capacity(hi - lo);
            let mut states = Vec::with_capacity(if keep_states { hi - lo } else { 0 });
            for _ in lo..hi {
                let s = sample_hilbert_schmidt(d, &mut rng);
                let l = log_likelihood(record, &s).expect("sampled state has record dimension");
                vals.push(l);
                if keep_states {
                    states.push(s);
                }
            }
            (vals, states)
        })
        .collect();
    let mut values = Vec::with_capacity(mc_samples);
    let mut states = Vec::with_capacity(if keep_states { mc_samples } else { 0 });
    for (v, s) in per_chunk {
        values.extend(v);
        states.extend(s);
    }
    (values, states)
}

/// Estimate ln c = ln E_HS[exp L] by plain Monte Carlo over Hilbert-Schmidt
/// samples, max-shifted for stability.
pub fn normalization_constant(
    record: &MeasurementRecord,
    mc_samples: usize,
    seed: u64,
) -> Result<LikelihoodSummary> {
    if mc_samples < 1000 {
        return Err(TomoError::parameter(
            "mc_samples",
            format!("need at least 1000 samples, got {mc_samples}"),
        ));
    }
    let (values, _) = sample_likelihood_values(record, mc_samples, seed, false);
    let (log_c, se) = log_mean_exp(&values).ok_or_else(|| {
        TomoError::Estimation(
            "every Monte Carlo sample had zero likelihood; record is degenerate".into(),
        )
    })?;
    Ok(LikelihoodSummary::from_parts(log_c, se, mc_samples, seed, record))
}

/// Density of mu relative to the Hilbert-Schmidt volume: exp(L - ln c).
pub fn mu_density(
    record: &MeasurementRecord,
    sigma: &DensityMatrix,
    summary: &LikelihoodSummary,
) -> Result<f64> {
    if !summary.matches(record) {
        return Err(TomoError::SummaryMismatch(
            "normalization summary was built from a different record".into(),
        ));
    }
    let l = log_likelihood(record, sigma)?;
    if l == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    Ok((l - summary.log_c()).exp())
}

/// One evaluated grid point; `r = 1` on surface grids.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub theta: f64,
    pub phi: f64,
    pub r: f64,
    pub density: f64,
}

impl GridRow {
    /// Bloch coordinates r (sin t cos p, sin t sin p, cos t).
    pub fn bloch(&self) -> [f64; 3] {
        [
            self.r * self.theta.sin() * self.phi.cos(),
            self.r * self.theta.sin() * self.phi.sin(),
            self.r * self.theta.cos(),
        ]
    }
}

/// Density values over a regular Bloch-sphere grid (surface) or Bloch-ball
/// lattice. Rows are in scan order: r ascending (ball only), then theta, then
/// phi, each at cell centers.
#[derive(Debug, Clone)]
pub struct BlochGrid {
    surface: bool,
    resolution: usize,
    seed: u64,
    sample_count: usize,
    log_c: f64,
    log_c_stderr: f64,
    rows: Vec<GridRow>,
}

impl BlochGrid {
    pub fn rows(&self) -> &[GridRow] {
        &self.rows
    }

    pub fn is_surface(&self) -> bool {
        self.surface
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn argmax(&self) -> &GridRow {
        self.rows
            .iter()
            .max_by(|a, b| (a.density, a.theta, a.phi, a.r)
                .partial_cmp(&(b.density, b.theta, b.phi, b.r))
                .unwrap())
            .expect("grid is never empty")
    }

    /// Area fraction (surface) or volume fraction (ball) of cells whose
    /// density reaches `level_fraction` of the grid maximum. Cells are
    /// weighted by the spherical volume element.
    pub fn fraction_above(&self, level_fraction: f64) -> f64 {
        let max = self.argmax().density;
        if max <= 0.0 {
            return 1.0;
        }
        let cut = level_fraction * max;
        let mut hit = 0.0;
        let mut total = 0.0;
        for row in &self.rows {
            let w = row.theta.sin() * row.r * row.r;
            total += w;
            if row.density >= cut {
                hit += w;
            }
        }
        hit / total
    }

    /// CSV rendering: comment lines documenting the conventions, one header
    /// line naming the columns, one line per grid point. Deterministic bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# Bloch density grid: theta measured from the +z axis (z-basis '+' outcome at theta=0), phi from +x toward +y (y-basis '+' outcome at theta=pi/2, phi=pi/2).\n");
        out.push_str("# Grid state has Bloch vector r*(sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)); density is d(mu)/d(volume) relative to the Hilbert-Schmidt measure.\n");
        out.push_str(&format!(
            "# Normalization: ln c = {} (stderr {}) from {} Monte Carlo samples, seed {}.\n",
            self.log_c, self.log_c_stderr, self.sample_count, self.seed
        ));
        if self.surface {
            out.push_str("theta,phi,density\n");
            for row in &self.rows {
                out.push_str(&format!("{},{},{}\n", row.theta, row.phi, row.density));
            }
        } else {
            out.push_str("theta,phi,r,density\n");
            for row in &self.rows {
                out.push_str(&format!("{},{},{},{}\n", row.theta, row.phi, row.r, row.density));
            }
        }
        out
    }
}

/// Evaluate mu on a regular Bloch grid. `resolution` is the number of theta
/// rows; phi gets twice that. Surface grids evaluate pure states; ball grids
/// add resolution/2 radial shells. Qubit records only.
pub fn bloch_density_grid(
    record: &MeasurementRecord,
    resolution: usize,
    surface_only: bool,
    summary: &LikelihoodSummary,
) -> Result<BlochGrid> {
    if record.dim() != 2 {
        return Err(TomoError::invalid(
            "dimension",
            format!("Bloch grids need a qubit record, got dimension {}", record.dim()),
        ));
    }
    if resolution < 2 {
        return Err(TomoError::parameter("grid", "resolution must be at least 2"));
    }
    if !summary.matches(record) {
        return Err(TomoError::SummaryMismatch(
            "normalization summary was built from a different record".into(),
        ));
    }
    let n_theta = resolution;
    let n_phi = 2 * resolution;
    let radii: Vec<f64> = if surface_only {
        vec![1.0]
    } else {
        let shells = (resolution / 2).max(1);
        (0..shells).map(|k| (k as f64 + 0.5) / shells as f64).collect()
    };
    let mut rows = Vec::with_capacity(radii.len() * n_theta * n_phi);
    for &r in &radii {
        for i in 0..n_theta {
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / n_theta as f64;
            for j in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_phi as f64;
                let sigma = DensityMatrix::from_bloch(
                    r * theta.sin() * phi.cos(),
                    r * theta.sin() * phi.sin(),
                    r * theta.cos(),
                )?;
                let density = mu_density(record, &sigma, summary)?;
                rows.push(GridRow { theta, phi, r, density });
            }
        }
    }
    Ok(BlochGrid {
        surface: surface_only,
        resolution,
        seed: summary.seed(),
        sample_count: summary.sample_count(),
        log_c: summary.log_c(),
        log_c_stderr: summary.log_c_stderr(),
        rows,
    })
}

/// Convex mixture t a + (1-t) b; valid states form a convex set.
pub(crate) fn mix(a: &DensityMatrix, b: &DensityMatrix, t: f64) -> DensityMatrix {
    let m = a.matrix().scale(t) + b.matrix().scale(1.0 - t);
    DensityMatrix::from_valid(m)
}
