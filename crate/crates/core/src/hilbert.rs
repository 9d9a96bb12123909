//! Finite-dimensional state and measurement primitives: density matrices,
//! pure states, POVMs, fidelity-based distances, and the Hilbert-Schmidt
//! state sampler. All spectral computations in the crate funnel through
//! [`hermitian_eigen`] so there is exactly one tested eigendecomposition path.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Result, TomoError};
use crate::util::standard_normal;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const EIGENVALUE_TOL: f64 = 1e-10;
const COMPLETENESS_TOL: f64 = 1e-9;

/// Eigendecomposition of a Hermitian matrix. Returns eigenvalues ascending
/// with matching eigenvector columns. The input is symmetrized first so
/// callers may pass matrices with roundoff-level asymmetry.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.nrows();
    let vecs = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Rebuild sum_i f(lambda_i) |v_i><v_i| from the Hermitian eigensystem of `m`.
pub(crate) fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let n = m.nrows();
    let diag = CMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(f(vals[r]), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    &vecs * diag * vecs.adjoint()
}

pub(crate) fn sqrt_psd(m: &CMatrix) -> CMatrix {
    hermitian_map(m, |x| x.max(0.0).sqrt())
}

/// Real part of tr(a b); exact trace inner product for Hermitian pairs.
pub(crate) fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let p = a[(i, k)] * b[(k, i)];
            acc += p.re;
        }
    }
    acc
}

fn hermiticity_residual(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// A trace-one positive semidefinite matrix. Construction validates
/// Hermiticity, positivity (eigenvalues above -1e-10 are clipped to zero),
/// and unit trace; the stored matrix is the cleaned-up version.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(TomoError::invalid(
                "matrix",
                format!("expected square non-empty matrix, got {}x{}", mat.nrows(), mat.ncols()),
            ));
        }
        let herm = hermiticity_residual(&mat);
        if herm > HERMITICITY_TOL {
            return Err(TomoError::invalid(
                "matrix",
                format!("not Hermitian: worst residual {herm:.3e}"),
            ));
        }
        let tr: Complex64 = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(TomoError::invalid(
                "matrix",
                format!("trace must be 1, got {}+{}i", tr.re, tr.im),
            ));
        }
        let (vals, _) = hermitian_eigen(&mat);
        if vals[0] < -EIGENVALUE_TOL {
            return Err(TomoError::invalid(
                "matrix",
                format!("negative eigenvalue {:.3e}", vals[0]),
            ));
        }
        let cleaned = if vals[0] < 0.0 {
            let clipped = hermitian_map(&mat, |x| x.max(0.0));
            let tr = clipped.trace().re;
            clipped.unscale(tr)
        } else {
            (&mat + mat.adjoint()).scale(0.5)
        };
        Ok(DensityMatrix { mat: cleaned })
    }

    /// Internal constructor for matrices that are positive by construction.
    pub(crate) fn from_valid(mat: CMatrix) -> Self {
        DensityMatrix { mat }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let s = Complex64::new(1.0 / dim as f64, 0.0);
        DensityMatrix { mat: CMatrix::from_diagonal_element(dim, dim, s) }
    }

    pub fn from_pure(state: &PureState) -> Self {
        let v = state.vector();
        DensityMatrix { mat: v * v.adjoint() }
    }

    /// Qubit state from Bloch coordinates; requires |r| <= 1.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Result<Self> {
        let r2 = x * x + y * y + z * z;
        if r2 > 1.0 + 1e-12 {
            return Err(TomoError::invalid("bloch", format!("|r| = {} > 1", r2.sqrt())));
        }
        let mat = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.5 * (1.0 + z), 0.0),
            Complex64::new(0.5 * x, -0.5 * y),
            Complex64::new(0.5 * x, 0.5 * y),
            Complex64::new(0.5 * (1.0 - z), 0.0),
        ]);
        Ok(DensityMatrix { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn purity(&self) -> f64 {
        trace_product_re(&self.mat, &self.mat)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.mat).0
    }

    /// Bloch coordinates (x, y, z); qubits only.
    pub fn bloch_vector(&self) -> Result<[f64; 3]> {
        if self.dim() != 2 {
            return Err(TomoError::DimensionMismatch { expected: 2, found: self.dim() });
        }
        let m = &self.mat;
        Ok([
            2.0 * m[(0, 1)].re,
            -2.0 * m[(0, 1)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ])
    }
}

/// A unit vector in C^d.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    vec: CVector,
}

impl PureState {
    pub fn new(vec: CVector) -> Result<Self> {
        if vec.is_empty() {
            return Err(TomoError::invalid("state", "empty vector"));
        }
        let norm = vec.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(TomoError::invalid("state", format!("norm must be 1, got {norm}")));
        }
        Ok(PureState { vec: vec.unscale(norm) })
    }

    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(TomoError::invalid("state", format!("index {index} out of range for dim {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Ok(PureState { vec: v })
    }

    pub fn from_amplitudes(amps: &[Complex64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(amps))
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    pub fn vector(&self) -> &CVector {
        &self.vec
    }

    pub fn amplitude(&self, i: usize) -> Complex64 {
        self.vec[i]
    }
}

/// Report from validating a POVM candidate; `ok` summarizes all checks.
#[derive(Debug, Clone)]
pub struct PovmValidation {
    pub hermiticity_residuals: Vec<f64>,
    pub min_eigenvalues: Vec<f64>,
    pub completeness_residual: f64,
    pub worst_entry: (usize, usize),
    pub ok: bool,
}

/// Validate Hermiticity and positivity of each candidate element and
/// completeness of the sum. Never fails; returns the full diagnostic report.
pub fn povm_validate(elements: &[CMatrix]) -> PovmValidation {
    let mut herm = Vec::with_capacity(elements.len());
    let mut mins = Vec::with_capacity(elements.len());
    let dim = elements.first().map_or(0, |e| e.nrows());
    for e in elements {
        herm.push(hermiticity_residual(e));
        mins.push(if e.nrows() == e.ncols() && e.nrows() > 0 {
            hermitian_eigen(e).0[0]
        } else {
            f64::NEG_INFINITY
        });
    }
    let mut sum = CMatrix::zeros(dim, dim);
    let mut shape_ok = dim > 0;
    for e in elements {
        if e.nrows() != dim || e.ncols() != dim {
            shape_ok = false;
        } else {
            sum += e;
        }
    }
    let mut completeness = 0.0f64;
    let mut worst = (0usize, 0usize);
    if shape_ok {
        for r in 0..dim {
            for c in 0..dim {
                let target = if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                let dev = (sum[(r, c)] - target).norm();
                if dev > completeness {
                    completeness = dev;
                    worst = (r, c);
                }
            }
        }
    } else {
        completeness = f64::INFINITY;
    }
    let ok = shape_ok
        && herm.iter().all(|&h| h <= HERMITICITY_TOL)
        && mins.iter().all(|&m| m >= -EIGENVALUE_TOL)
        && completeness <= COMPLETENESS_TOL;
    PovmValidation {
        hermiticity_residuals: herm,
        min_eigenvalues: mins,
        completeness_residual: completeness,
        worst_entry: worst,
        ok,
    }
}

/// A finite POVM: positive elements summing to the identity, with labels for
/// reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<CMatrix>,
    labels: Vec<String>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>, labels: Option<Vec<String>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(TomoError::invalid("povm", "no elements"));
        }
        let report = povm_validate(&elements);
        if !report.ok {
            return Err(TomoError::invalid(
                "povm",
                format!(
                    "validation failed: completeness residual {:.3e} at entry {:?}, min eigenvalue {:.3e}",
                    report.completeness_residual,
                    report.worst_entry,
                    report.min_eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min),
                ),
            ));
        }
        let dim = elements[0].nrows();
        let labels = match labels {
            Some(l) => {
                if l.len() != elements.len() {
                    return Err(TomoError::invalid("labels", "label count differs from element count"));
                }
                l
            }
            None => (0..elements.len()).map(|i| format!("E{i}")).collect(),
        };
        Ok(Povm { dim, elements, labels })
    }

    /// Projective measurement of an orthonormal basis given as columns.
    pub fn from_basis(basis: &CMatrix, labels: Option<Vec<String>>) -> Result<Self> {
        let d = basis.nrows();
        let elements = (0..basis.ncols())
            .map(|k| {
                let col = basis.column(k).into_owned();
                &col * col.adjoint()
            })
            .collect::<Vec<_>>();
        let _ = d;
        Povm::new(elements, labels)
    }

    /// Computational (z) basis projectors for a qubit.
    pub fn z_basis() -> Self {
        let e0 = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0),
        ]);
        let e1 = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0),
        ]);
        Povm { dim: 2, elements: vec![e0, e1], labels: vec!["z+".into(), "z-".into()] }
    }

    /// Six-outcome Pauli measurement: each basis projector weighted by 1/3.
    pub fn pauli_six() -> Self {
        let h = |a: f64, b: Complex64| {
            // rank-one projector (1/2)(I + a sz + ...) assembled directly
            CMatrix::from_row_slice(2, 2, &[
                Complex64::new(0.5 * (1.0 + a), 0.0), b,
                b.conj(), Complex64::new(0.5 * (1.0 - a), 0.0),
            ])
        };
        let third = 1.0 / 3.0;
        let elems = vec![
            h(1.0, Complex64::new(0.0, 0.0)).scale(third),
            h(-1.0, Complex64::new(0.0, 0.0)).scale(third),
            h(0.0, Complex64::new(0.5, 0.0)).scale(third),
            h(0.0, Complex64::new(-0.5, 0.0)).scale(third),
            h(0.0, Complex64::new(0.0, -0.5)).scale(third),
            h(0.0, Complex64::new(0.0, 0.5)).scale(third),
        ];
        let labels = vec!["z+", "z-", "x+", "x-", "y+", "y-"]
            .into_iter().map(String::from).collect();
        Povm { dim: 2, elements: elems, labels }
    }

    /// Mixed z/y projective measurement with each projector halved; the
    /// record shape used for the two-bright-spot posterior plots.
    pub fn half_zy() -> Self {
        let half = 0.5;
        let z0 = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0),
        ]);
        let z1 = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0),
        ]);
        let yp = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.5, 0.0), Complex64::new(0.0, -0.5),
            Complex64::new(0.0, 0.5), Complex64::new(0.5, 0.0),
        ]);
        let ym = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.5),
            Complex64::new(0.0, -0.5), Complex64::new(0.5, 0.0),
        ]);
        Povm {
            dim: 2,
            elements: vec![z0.scale(half), z1.scale(half), yp.scale(half), ym.scale(half)],
            labels: vec!["z+/2", "z-/2", "y+/2", "y-/2"].into_iter().map(String::from).collect(),
        }
    }

    /// The trivial single-outcome POVM {I}.
    pub fn trivial(dim: usize) -> Self {
        Povm {
            dim,
            elements: vec![CMatrix::identity(dim, dim)],
            labels: vec!["I".into()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &CMatrix {
        &self.elements[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Outcome probabilities tr(E_i sigma), clipped at zero.
    pub fn probabilities(&self, sigma: &DensityMatrix) -> Result<Vec<f64>> {
        if sigma.dim() != self.dim {
            return Err(TomoError::DimensionMismatch { expected: self.dim, found: sigma.dim() });
        }
        Ok(self
            .elements
            .iter()
            .map(|e| trace_product_re(e, sigma.matrix()).max(0.0))
            .collect())
    }

    /// Conjugate every element by a unitary: E_i -> U E_i U^dag.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim || u.ncols() != self.dim {
            return Err(TomoError::DimensionMismatch { expected: self.dim, found: u.nrows() });
        }
        let elements = self.elements.iter().map(|e| u * e * u.adjoint()).collect();
        Ok(Povm { dim: self.dim, elements, labels: self.labels.clone() })
    }
}

/// Uhlmann fidelity tr sqrt(sqrt(a) b sqrt(a)), clamped into [0, 1].
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(TomoError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let ra = sqrt_psd(a.matrix());
    let inner = &ra * b.matrix() * &ra;
    let (vals, _) = hermitian_eigen(&inner);
    let f: f64 = vals.iter().map(|&v| v.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Purified distance sqrt(1 - F^2).
pub fn purified_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    let f = fidelity(a, b)?;
    Ok((1.0 - f * f).max(0.0).sqrt())
}

/// Measurement seminorm sum_i |tr(E_i x)| for a Hermitian matrix x. The sum
/// runs in a canonical element order so jointly permuting the POVM cannot
/// change the rounding.
pub fn povm_seminorm(povm: &Povm, x: &CMatrix) -> Result<f64> {
    if x.nrows() != povm.dim() || x.ncols() != povm.dim() {
        return Err(TomoError::DimensionMismatch { expected: povm.dim(), found: x.nrows() });
    }
    let mut terms: Vec<f64> = povm
        .elements()
        .iter()
        .map(|e| trace_product_re(e, x).abs())
        .collect();
    terms.sort_by(|a, b| a.total_cmp(b));
    Ok(terms.iter().sum())
}

/// Draw from the Hilbert-Schmidt measure: G G^dag / tr(G G^dag) with G a
/// square complex Gaussian matrix.
pub fn sample_hilbert_schmidt(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = ginibre(dim, rng);
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    DensityMatrix::from_valid(w.unscale(tr))
}

/// Haar-random pure state (normalized complex Gaussian vector).
pub fn sample_haar_pure(dim: usize, rng: &mut impl Rng) -> PureState {
    loop {
        let mut v = CVector::zeros(dim);
        for i in 0..dim {
            let (re, im) = standard_normal(rng);
            v[i] = Complex64::new(re, im);
        }
        let n = v.norm();
        if n > 1e-12 {
            return PureState { vec: v.unscale(n) };
        }
    }
}

/// Haar-random unitary via QR of a Ginibre matrix with phase fixing.
pub fn sample_haar_unitary(dim: usize, rng: &mut impl Rng) -> CMatrix {
    let g = ginibre(dim, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, k)] *= phase;
        }
    }
    q
}

fn ginibre(dim: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| {
        let (re, im) = standard_normal(rng);
        Complex64::new(re, im)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::derive_rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn density_matrix_validation() {
        // Valid qubit state.
        let ok = DensityMatrix::from_bloch(0.3, -0.2, 0.5).unwrap();
        assert!((ok.matrix().trace().re - 1.0).abs() < 1e-14);
        // Wrong trace rejected.
        let m = CMatrix::from_row_slice(2, 2, &[c(0.9, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.3, 0.0)]);
        assert!(DensityMatrix::new(m).is_err());
        // Non-Hermitian rejected.
        let m = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.3, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(m).is_err());
        // Bloch vector outside the ball rejected.
        assert!(DensityMatrix::from_bloch(0.9, 0.9, 0.9).is_err());
        // Negative eigenvalue beyond tolerance rejected.
        let m = CMatrix::from_row_slice(2, 2, &[c(1.1, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.1, 0.0)]);
        assert!(DensityMatrix::new(m).is_err());
        // Within-tolerance negative eigenvalue clipped to zero.
        let eps = 5e-11;
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0 + eps, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-eps, 0.0)]);
        let fixed = DensityMatrix::new(m).unwrap();
        assert!(fixed.eigenvalues()[0] >= 0.0);
        assert!((fixed.matrix().trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bloch_round_trip() {
        let s = DensityMatrix::from_bloch(0.1, 0.2, -0.3).unwrap();
        let [x, y, z] = s.bloch_vector().unwrap();
        assert!((x - 0.1).abs() < 1e-14 && (y - 0.2).abs() < 1e-14 && (z + 0.3).abs() < 1e-14);
    }

    #[test]
    fn fidelity_examples() {
        // F(sigma, sigma) = 1.
        let s = DensityMatrix::from_bloch(0.2, 0.1, 0.4).unwrap();
        assert!((fidelity(&s, &s).unwrap() - 1.0).abs() < 1e-10);
        // Orthogonal pure states: F = 0, P = 1.
        let p0 = DensityMatrix::from_pure(&PureState::basis_state(2, 0).unwrap());
        let p1 = DensityMatrix::from_pure(&PureState::basis_state(2, 1).unwrap());
        assert!(fidelity(&p0, &p1).unwrap() < 1e-10);
        assert!((purified_distance(&p0, &p1).unwrap() - 1.0).abs() < 1e-10);
        // F(I/2, |0><0|) = 1/sqrt(2).
        let mixed = DensityMatrix::maximally_mixed(2);
        let f = fidelity(&mixed, &p0).unwrap();
        assert!((f - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10, "F = {f}");
    }

    #[test]
    fn fidelity_is_symmetric_and_unitary_invariant() {
        let mut rng = derive_rng(42, 0);
        for _ in 0..10 {
            let a = sample_hilbert_schmidt(3, &mut rng);
            let b = sample_hilbert_schmidt(3, &mut rng);
            let u = sample_haar_unitary(3, &mut rng);
            let fab = fidelity(&a, &b).unwrap();
            let fba = fidelity(&b, &a).unwrap();
            assert!((fab - fba).abs() < 1e-10);
            let ua = DensityMatrix::new(&u * a.matrix() * u.adjoint()).unwrap();
            let ub = DensityMatrix::new(&u * b.matrix() * u.adjoint()).unwrap();
            let fu = fidelity(&ua, &ub).unwrap();
            assert!((fab - fu).abs() < 1e-10, "unitary invariance broke: {fab} vs {fu}");
        }
    }

    #[test]
    fn purified_distance_triangle_inequality() {
        let mut rng = derive_rng(43, 0);
        for _ in 0..25 {
            let a = sample_hilbert_schmidt(2, &mut rng);
            let b = sample_hilbert_schmidt(2, &mut rng);
            let cst = sample_hilbert_schmidt(2, &mut rng);
            let ab = purified_distance(&a, &b).unwrap();
            let ac = purified_distance(&a, &cst).unwrap();
            let cb = purified_distance(&cst, &b).unwrap();
            assert!(ab <= ac + cb + 1e-10);
        }
    }

    #[test]
    fn povm_validation_catches_defects() {
        assert!(Povm::new(vec![], None).is_err());
        // Incomplete set.
        let half = CMatrix::identity(2, 2).scale(0.5);
        assert!(Povm::new(vec![half.clone()], None).is_err());
        let report = povm_validate(&[half.clone()]);
        assert!(!report.ok);
        assert!((report.completeness_residual - 0.5).abs() < 1e-12);
        // Valid two-element split.
        assert!(Povm::new(vec![half.clone(), half], None).is_ok());
        // Standard constructions validate.
        for p in [Povm::z_basis(), Povm::pauli_six(), Povm::half_zy(), Povm::trivial(3)] {
            assert!(povm_validate(p.elements()).ok, "{:?} labels", p.labels());
        }
    }

    #[test]
    fn pauli_six_probabilities() {
        let povm = Povm::pauli_six();
        let s = DensityMatrix::from_bloch(0.3, -0.1, 0.6).unwrap();
        let p = povm.probabilities(&s).unwrap();
        let expect = [
            (1.0 + 0.6) / 6.0, (1.0 - 0.6) / 6.0,
            (1.0 + 0.3) / 6.0, (1.0 - 0.3) / 6.0,
            (1.0 - 0.1) / 6.0, (1.0 + 0.1) / 6.0,
        ];
        for (got, want) in p.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seminorm_brute_force_and_permutation() {
        let povm = Povm::pauli_six();
        let a = DensityMatrix::from_bloch(0.5, 0.0, -0.2).unwrap();
        let b = DensityMatrix::from_bloch(-0.1, 0.3, 0.4).unwrap();
        let x = a.matrix() - b.matrix();
        let direct: f64 = povm
            .elements()
            .iter()
            .map(|e| trace_product_re(e, &x).abs())
            .sum();
        let got = povm_seminorm(&povm, &x).unwrap();
        assert!((got - direct).abs() < 1e-12);
        // Jointly permuted POVM gives the identical result bit for bit.
        let perm: Vec<CMatrix> = [3usize, 0, 5, 1, 4, 2]
            .iter()
            .map(|&i| povm.element(i).clone())
            .collect();
        let permuted = Povm::new(perm, None).unwrap();
        assert_eq!(povm_seminorm(&permuted, &x).unwrap().to_bits(), got.to_bits());
        // Zero matrix maps to zero.
        let zero = CMatrix::zeros(2, 2);
        assert_eq!(povm_seminorm(&povm, &zero).unwrap(), 0.0);
    }

    #[test]
    fn hilbert_schmidt_sampler_statistics() {
        // Mean state I/2 componentwise and mean purity 4/5 (frozen from a
        // 10^7-sample reference run: 0.79992 +- 4e-5; exact value 0.8).
        let mut rng = derive_rng(2024, 0);
        let n = 100_000;
        let mut mean = CMatrix::zeros(2, 2);
        let mut purity_sum = 0.0;
        let mut purity_sq = 0.0;
        for _ in 0..n {
            let s = sample_hilbert_schmidt(2, &mut rng);
            mean += s.matrix();
            let p = s.purity();
            purity_sum += p;
            purity_sq += p * p;
        }
        mean = mean.unscale(n as f64);
        let m_purity = purity_sum / n as f64;
        let se = ((purity_sq / n as f64 - m_purity * m_purity) / n as f64).sqrt();
        assert!((m_purity - 0.8).abs() < 3.0 * se, "purity {m_purity} +- {se}");
        for r in 0..2 {
            for cidx in 0..2 {
                let target = if r == cidx { 0.5 } else { 0.0 };
                assert!((mean[(r, cidx)].re - target).abs() < 0.005);
                assert!(mean[(r, cidx)].im.abs() < 0.005);
            }
        }
        // Samples are always valid states.
        let s = sample_hilbert_schmidt(4, &mut rng);
        assert!(s.eigenvalues()[0] >= -1e-12);
        assert!((s.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = derive_rng(5, 0);
        let u = sample_haar_unitary(3, &mut rng);
        let id = &u * u.adjoint();
        for r in 0..3 {
            for c2 in 0..3 {
                let target = if r == c2 { 1.0 } else { 0.0 };
                assert!((id[(r, c2)].re - target).abs() < 1e-12);
                assert!(id[(r, c2)].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn haar_pure_state_mean_projector() {
        let mut rng = derive_rng(6, 0);
        let n = 50_000;
        let mut mean = CMatrix::zeros(2, 2);
        for _ in 0..n {
            let p = sample_haar_pure(2, &mut rng);
            mean += DensityMatrix::from_pure(&p).matrix();
        }
        mean = mean.unscale(n as f64);
        assert!((mean[(0, 0)].re - 0.5).abs() < 0.01);
        assert!(mean[(0, 1)].norm() < 0.01);
    }

    #[test]
    fn eigen_path_reconstructs() {
        let mut rng = derive_rng(7, 0);
        let s = sample_hilbert_schmidt(4, &mut rng);
        let (vals, vecs) = hermitian_eigen(s.matrix());
        let mut rebuilt = CMatrix::zeros(4, 4);
        for k in 0..4 {
            let col = vecs.column(k).into_owned();
            rebuilt += (&col * col.adjoint()).scale(vals[k]);
        }
        let diff = (s.matrix() - rebuilt).norm();
        assert!(diff < 1e-12, "eigen reconstruction error {diff}");
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }
}
