//! Harmonic expansion of qubit posterior densities and of operators on the
//! symmetric subspace.
//!
//! Everything here lives on the chart
//!
//!   |x(theta, phi)> = i e^{i phi/2} sin(theta/2) |0>  +  e^{-i phi/2} cos(theta/2) |1>
//!
//! so theta = 0 is the |1> pole. In Bloch coordinates the chart point
//! (theta, phi) sits at (-sin t sin p, -sin t cos p, -cos t); see
//! [`bloch_from_chart`]. The harmonics y_{l,m} used throughout are
//! orthonormal with respect to the normalized surface measure
//! dx = sin(theta) dtheta dphi / 4pi and satisfy
//! conj(y_{l,m}) = (-1)^m y_{l,-m}.

use num_bigint::{BigInt, Sign};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::combinatorics::{binomial, factorial, ln_biguint};
use crate::error::{Result, TomoError};
use crate::hilbert::{CMatrix, CVector, DensityMatrix, PureState};
use crate::likelihood::MeasurementRecord;
use crate::util::gauss_legendre;

/// Entrywise tolerance for deciding that a POVM element is a rank-1
/// projector, which is what single-basis moment expansion requires.
const PROJECTOR_TOL: f64 = 1e-9;

/// Below this polar angle the measurement axis is treated as the chart pole
/// itself and the rotation step is skipped.
const POLE_ANGLE_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Chart geometry
// ---------------------------------------------------------------------------

/// Bloch vector of the chart point (theta, phi).
pub fn bloch_from_chart(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = (theta.sin(), theta.cos());
    let (sp, cp) = (phi.sin(), phi.cos());
    [-st * sp, -st * cp, -ct]
}

/// Chart coordinates of a unit Bloch vector, with phi in [0, 2pi). At the
/// poles phi is arbitrary and comes back as 0.
pub fn chart_from_bloch(b: [f64; 3]) -> (f64, f64) {
    let theta = (-b[2]).clamp(-1.0, 1.0).acos();
    let mut phi = (-b[0]).atan2(-b[1]);
    if phi < 0.0 {
        phi += 2.0 * std::f64::consts::PI;
    }
    if phi.abs() < 1e-15 || !phi.is_finite() {
        phi = 0.0;
    }
    (theta, phi)
}

/// The pure state sitting at chart point (theta, phi).
pub fn chart_state(theta: f64, phi: f64) -> PureState {
    let half = 0.5 * theta;
    let a = Complex64::i() * Complex64::from_polar(half.sin(), 0.5 * phi);
    let b = Complex64::from_polar(half.cos(), -0.5 * phi);
    PureState::from_amplitudes(&[a, b]).expect("chart amplitudes are normalized")
}

// ---------------------------------------------------------------------------
// Associated Legendre and harmonics
// ---------------------------------------------------------------------------

/// Associated Legendre function P_l^m(x) with the Condon-Shortley phase, so
/// P_1^1(x) = -sqrt(1 - x^2). Negative m follows the reflection rule
/// P_l^{-m} = (-1)^m (l-m)!/(l+m)! P_l^m.
pub fn assoc_legendre(l: u64, m: i64, x: f64) -> Result<f64> {
    if m.unsigned_abs() > l {
        return Err(TomoError::parameter("m", format!("|m| = {} exceeds l = {l}", m.unsigned_abs())));
    }
    if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&x) {
        return Err(TomoError::parameter("x", format!("argument {x} outside [-1, 1]")));
    }
    let x = x.clamp(-1.0, 1.0);
    if m < 0 {
        let mm = (-m) as u64;
        // (l-m)!/(l+m)! with m = |m| here.
        let mut ratio = 1.0;
        for i in (l - mm + 1)..=(l + mm) {
            ratio /= i as f64;
        }
        let sign = if mm % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(sign * ratio * assoc_legendre(l, mm as i64, x)?);
    }
    let m = m as u64;
    let sine = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    for i in 1..=m {
        pmm *= -((2 * i - 1) as f64) * sine;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for ll in (m + 2)..=l {
        let next = ((2 * ll - 1) as f64 * x * cur - (ll + m - 1) as f64 * prev) / (ll - m) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// sqrt((2l+1) (l-m)!/(l+m)!) * P_l^m(x) for m >= 0, computed with the
/// normalized recurrence so no intermediate overflows even at large l.
fn normalized_assoc(l: u64, m: u64, x: f64) -> f64 {
    debug_assert!(m <= l);
    let x = x.clamp(-1.0, 1.0);
    let sine = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    // Seed: sqrt(2m+1) * prod_i sqrt((2i-1)/(2i)) * (-sine)^m, the normalized P_m^m.
    let mut seed = ((2 * m + 1) as f64).sqrt();
    for i in 1..=m {
        seed *= ((2 * i - 1) as f64 / (2 * i) as f64).sqrt() * -sine;
    }
    if l == m {
        return seed;
    }
    let mut prev = seed;
    let mut cur = x * ((2 * m + 3) as f64).sqrt() * seed;
    for ll in (m + 2)..=l {
        let ll2 = (ll * ll) as f64;
        let a = ((4.0 * ll2 - 1.0) / (ll2 - (m * m) as f64)).sqrt();
        let lm1 = ((ll - 1) * (ll - 1)) as f64;
        let b = ((lm1 - (m * m) as f64) / (4.0 * lm1 - 1.0)).sqrt();
        let next = a * (x * cur - b * prev);
        prev = cur;
        cur = next;
    }
    cur
}

/// Orthonormal chart harmonic y_{l,m}(theta, phi).
///
/// y_{l,m} = (-i)^m sqrt((2l+1)(l-m)!/(l+m)!) P_l^m(cos theta) e^{i m phi},
/// normalized so that the Gram matrix under dx = sin dtheta dphi / 4pi is the
/// identity.
pub fn harmonic(l: u64, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    if m.unsigned_abs() > l {
        return Err(TomoError::parameter("m", format!("|m| = {} exceeds l = {l}", m.unsigned_abs())));
    }
    if !theta.is_finite() || !phi.is_finite() {
        return Err(TomoError::parameter("theta", "angles must be finite"));
    }
    if m < 0 {
        // y_{l,-m} = (-1)^m conj(y_{l,m})
        let pos = harmonic(l, -m, theta, phi)?;
        let sign = if (-m) % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(sign * pos.conj());
    }
    let radial = normalized_assoc(l, m as u64, theta.cos());
    Ok(neg_i_pow(m) * radial * Complex64::from_polar(1.0, m as f64 * phi))
}

/// (-i)^p for any integer p.
fn neg_i_pow(p: i64) -> Complex64 {
    match p.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

// ---------------------------------------------------------------------------
// Exact coefficient tables
// ---------------------------------------------------------------------------

/// Convert an exact rational to f64, falling back to logarithms when the
/// parts are too large for direct conversion.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.numer().is_zero() {
        return 0.0;
    }
    let nf = r.numer().to_f64().unwrap_or(f64::INFINITY);
    let df = r.denom().to_f64().unwrap_or(f64::INFINITY);
    if nf.is_finite() && df.is_finite() && df != 0.0 {
        return nf / df;
    }
    let sign = if r.numer().sign() == Sign::Minus { -1.0 } else { 1.0 };
    let ln = ln_biguint(r.numer().magnitude()) - ln_biguint(r.denom().magnitude());
    sign * ln.exp()
}

fn big_ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Zonal attenuation of a single covariant outcome:
/// n! (n+1)! / ((n-l)! (n+l+1)!), exactly; zero for l > n.
///
/// Satisfies 1 - l(l+1)/(n+2) <= value <= 1.
pub fn covariant_coefficient(n: u64, l: u64) -> BigRational {
    if l > n {
        return BigRational::zero();
    }
    let mut acc = BigRational::one();
    for j in 0..l {
        acc *= big_ratio(n - j, n + 2 + j);
    }
    acc
}

/// l-th coefficient of the equatorial (great-circle) density:
/// (-1)^{l/2} 2^{-l} C(l, l/2) for even l, zero for odd l.
pub fn equator_coefficient(l: u64) -> BigRational {
    if l % 2 == 1 {
        return BigRational::zero();
    }
    let mut acc = BigRational::from(BigInt::from(binomial(l, l / 2)));
    for _ in 0..l {
        acc /= BigInt::from(2);
    }
    if (l / 2) % 2 == 1 {
        acc = -acc;
    }
    acc
}

/// Zonal coefficient of the balanced-count single-basis outcome (n even,
/// f = (n/2, n/2)):
///
///   (-1)^{l/2} ((n+l)/2)! l! (n+1)! / (((n-l)/2)! (l/2)!^2 (n+l+1)!)
///
/// for even l <= n, zero for odd l or l > n. Tends to the equator
/// coefficient as n grows at fixed l.
pub fn balanced_basis_coefficient(n: u64, l: u64) -> Result<BigRational> {
    if n % 2 == 1 {
        return Err(TomoError::parameter("n", "balanced counts need an even number of copies"));
    }
    if l % 2 == 1 || l > n {
        return Ok(BigRational::zero());
    }
    // Equator coefficient times prod_{i=0}^{l-1} (n+2-l+2i)/(n+2+i); the
    // product telescopes to the factorial form in the doc comment.
    let mut acc = equator_coefficient(l);
    for i in 0..l {
        acc *= big_ratio(n + 2 - l + 2 * i, n + 2 + i);
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// SU(2) Clebsch-Gordan
// ---------------------------------------------------------------------------

fn big_fact(k: i64) -> BigInt {
    debug_assert!(k >= 0);
    BigInt::from(factorial(k as u64))
}

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | j m> for SU(2).
///
/// All spins and projections are passed doubled (two_j1 = 2*j1 and so on) so
/// half-integers stay exact. Inconsistent arguments (negative spins,
/// projections out of range, j+m not an integer) are an error; combinations
/// that merely violate the selection rules return 0. The value is computed
/// from the Racah sum with exact rationals and only rounded at the end.
pub fn su2_clebsch_gordan(
    two_j1: i64,
    two_m1: i64,
    two_j2: i64,
    two_m2: i64,
    two_j: i64,
    two_m: i64,
) -> Result<f64> {
    for (two_j_arg, two_m_arg, name) in [
        (two_j1, two_m1, "j1"),
        (two_j2, two_m2, "j2"),
        (two_j, two_m, "j"),
    ] {
        if two_j_arg < 0 {
            return Err(TomoError::parameter(name, "spin must be non-negative"));
        }
        if two_m_arg.abs() > two_j_arg || (two_j_arg + two_m_arg) % 2 != 0 {
            return Err(TomoError::parameter(
                name,
                format!("projection 2m = {two_m_arg} invalid for 2j = {two_j_arg}"),
            ));
        }
    }
    // Selection rules: projection additivity, triangle, integer coupling.
    if two_m1 + two_m2 != two_m
        || two_j < (two_j1 - two_j2).abs()
        || two_j > two_j1 + two_j2
        || (two_j1 + two_j2 + two_j) % 2 != 0
    {
        return Ok(0.0);
    }

    let a = (two_j1 + two_j2 - two_j) / 2;
    let b = (two_j1 - two_j2 + two_j) / 2;
    let c = (-two_j1 + two_j2 + two_j) / 2;
    let jm1 = (two_j1 - two_m1) / 2;
    let jp1 = (two_j1 + two_m1) / 2;
    let jm2 = (two_j2 - two_m2) / 2;
    let jp2 = (two_j2 + two_m2) / 2;
    let jpm = (two_j + two_m) / 2;
    let jmm = (two_j - two_m) / 2;
    let d1 = (two_j - two_j2 + two_m1) / 2; // k-offset (J - j2 + m1)
    let d2 = (two_j - two_j1 - two_m2) / 2; // k-offset (J - j1 - m2)

    let mut pref_num = BigInt::from(two_j + 1);
    for f in [a, b, c, jpm, jmm, jm1, jp1, jm2, jp2] {
        pref_num *= big_fact(f);
    }
    let pref = BigRational::new(pref_num, big_fact((two_j1 + two_j2 + two_j) / 2 + 1));

    let k_min = 0.max(-d1).max(-d2);
    let k_max = a.min(jm1).min(jp2);
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let mut den = big_fact(k);
        for f in [a - k, jm1 - k, jp2 - k, d1 + k, d2 + k] {
            den *= big_fact(f);
        }
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return Ok(0.0);
    }
    let sign = if sum.is_negative() { -1.0 } else { 1.0 };
    let squared = pref * (&sum * &sum);
    Ok(sign * rational_to_f64(&squared).sqrt())
}

// ---------------------------------------------------------------------------
// Moment vectors
// ---------------------------------------------------------------------------

/// Coefficients of a function on the sphere in the chart harmonics,
/// flat-packed as index l^2 + (l + m) for 0 <= l <= l_max, |m| <= l.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    l_max: usize,
    coeffs: Vec<Complex64>,
}

impl MomentVector {
    pub fn zero(l_max: usize) -> Self {
        MomentVector {
            l_max,
            coeffs: vec![Complex64::new(0.0, 0.0); (l_max + 1) * (l_max + 1)],
        }
    }

    /// Wrap a flat coefficient slice; the length must be (l_max+1)^2.
    pub fn from_coeffs(l_max: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != (l_max + 1) * (l_max + 1) {
            return Err(TomoError::invalid(
                "coeffs",
                format!("expected {} entries for l_max {l_max}, got {}", (l_max + 1) * (l_max + 1), coeffs.len()),
            ));
        }
        Ok(MomentVector { l_max, coeffs })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn index(l: usize, m: i64) -> usize {
        l * l + (l as i64 + m) as usize
    }

    /// Coefficient of y_{l,m}; zero above l_max. Panics if |m| > l.
    pub fn coeff(&self, l: usize, m: i64) -> Complex64 {
        assert!(m.unsigned_abs() as usize <= l, "|m| > l");
        if l > self.l_max {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[Self::index(l, m)]
    }

    /// Panics if l > l_max or |m| > l.
    pub fn set_coeff(&mut self, l: usize, m: i64, value: Complex64) {
        assert!(l <= self.l_max, "l > l_max");
        assert!(m.unsigned_abs() as usize <= l, "|m| > l");
        self.coeffs[Self::index(l, m)] = value;
    }

    /// Evaluate the truncated expansion at a chart point.
    pub fn evaluate(&self, theta: f64, phi: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in 0..=self.l_max {
            for m in -(l as i64)..=(l as i64) {
                let c = self.coeffs[Self::index(l, m)];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                acc += c * harmonic(l as u64, m, theta, phi).expect("indices in range");
            }
        }
        acc
    }

    /// l2 norm of the degree-l band. Rotations preserve this.
    pub fn band_norm(&self, l: usize) -> f64 {
        if l > self.l_max {
            return 0.0;
        }
        let mut acc = 0.0;
        for m in -(l as i64)..=(l as i64) {
            acc += self.coeffs[Self::index(l, m)].norm_sqr();
        }
        acc.sqrt()
    }

    /// Whether the coefficients satisfy the reality condition
    /// c(l,-m) = (-1)^m conj(c(l,m)) within tol.
    pub fn represents_real_function(&self, tol: f64) -> bool {
        for l in 0..=self.l_max {
            for m in 0..=(l as i64) {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let want = sign * self.coeffs[Self::index(l, m)].conj();
                if (self.coeffs[Self::index(l, -m)] - want).norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

/// Wigner small-d matrix element d^l_{a,b}(beta) in the convention where
/// d^1_{1,1}(beta) = (1 + cos beta)/2 and d^1_{0,1}(beta) = sin(beta)/sqrt(2).
fn wigner_small_d(l: i64, a: i64, b: i64, beta: f64, ln_fact: &[f64]) -> f64 {
    let (c, s) = ((0.5 * beta).cos(), (0.5 * beta).sin());
    let lf = |k: i64| ln_fact[k as usize];
    let pref = 0.5 * (lf(l + b) + lf(l - b) + lf(l + a) + lf(l - a));
    let k_min = 0.max(b - a);
    let k_max = (l + b).min(l - a);
    let mut acc = 0.0;
    for k in k_min..=k_max {
        let ln_den = lf(l + b - k) + lf(k) + lf(l - a - k) + lf(a - b + k);
        let pc = 2 * l + b - a - 2 * k;
        let ps = a - b + 2 * k;
        // Powers can hit 0^0 at the interval ends; powi(0) = 1 handles it.
        let mag = (pref - ln_den).exp() * c.powi(pc as i32) * s.powi(ps as i32);
        acc += if (a - b + k) % 2 == 0 { mag } else { -mag };
    }
    acc
}

/// Rotate an expansion so the chart pole moves to (theta0, phi0): the result
/// holds the moments of the rotated function, band by band.
pub fn rotate_moments(mv: &MomentVector, theta0: f64, phi0: f64) -> MomentVector {
    let l_max = mv.l_max();
    let mut ln_fact = vec![0.0; 2 * l_max + 2];
    for k in 1..ln_fact.len() {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let mut out = MomentVector::zero(l_max);
    for l in 0..=l_max {
        if mv.band_norm(l) == 0.0 {
            continue;
        }
        let li = l as i64;
        for mp in -li..=li {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in -li..=li {
                let c = mv.coeff(l, m);
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                let d = wigner_small_d(li, m, mp, theta0, &ln_fact);
                acc += neg_i_pow(mp - m) * d * c;
            }
            acc *= Complex64::from_polar(1.0, -(mp as f64) * phi0);
            out.set_coeff(l, mp, acc);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Operators on the symmetric subspace
// ---------------------------------------------------------------------------

/// An operator on the n-copy symmetric subspace of a qubit, stored in the
/// Dicke basis |k> = symmetrized (n-k copies of |0>, k copies of |1>).
#[derive(Clone, Debug)]
pub struct SymOperator {
    n: u64,
    mat: CMatrix,
}

impl SymOperator {
    pub fn new(n: u64, mat: CMatrix) -> Result<Self> {
        let dim = n as usize + 1;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(TomoError::DimensionMismatch { expected: dim, found: mat.nrows() });
        }
        Ok(SymOperator { n, mat })
    }

    pub fn identity(n: u64) -> Self {
        SymOperator { n, mat: CMatrix::identity(n as usize + 1, n as usize + 1) }
    }

    /// Projector onto the Dicke state with k copies of |1>.
    pub fn dicke_projector(n: u64, k: u64) -> Result<Self> {
        if k > n {
            return Err(TomoError::parameter("k", format!("index {k} exceeds copy count {n}")));
        }
        let dim = n as usize + 1;
        let mut mat = CMatrix::zeros(dim, dim);
        mat[(k as usize, k as usize)] = Complex64::new(1.0, 0.0);
        Ok(SymOperator { n, mat })
    }

    pub fn copies(&self) -> u64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n as usize + 1
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let diff = &self.mat - self.mat.adjoint();
        diff.iter().all(|z| z.norm() <= tol)
    }
}

/// Dicke amplitudes of x^{tensor n}: v_k = sqrt(C(n,k)) x0^{n-k} x1^k.
fn dicke_amplitudes(n: u64, state: &PureState) -> CVector {
    let x0 = state.amplitude(0);
    let x1 = state.amplitude(1);
    let dim = n as usize + 1;
    let mut v = CVector::zeros(dim);
    for k in 0..=n {
        let c = binomial(n, k).to_f64().expect("binomial fits in f64");
        v[k as usize] = c.sqrt() * x0.powu((n - k) as u32) * x1.powu(k as u32);
    }
    v
}

/// Q-function of a symmetric-subspace operator at a pure state:
/// Q_B(x) = <x|^n B |x>^n. Real for Hermitian B; separates distinct
/// operators on the symmetric subspace.
pub fn q_representation(op: &SymOperator, state: &PureState) -> Result<Complex64> {
    if state.dim() != 2 {
        return Err(TomoError::DimensionMismatch { expected: 2, found: state.dim() });
    }
    let v = dicke_amplitudes(op.n, state);
    Ok((v.adjoint() * &op.mat * &v)[(0, 0)])
}

/// The band operator A_{l,m} = int conj(y_{l,m}(x)) |x><x|^n dx for m >= 0.
/// The phases e^{i phi (col - row)} of the coherences pair with e^{-im phi}
/// from the conjugated harmonic, so the only surviving entries sit on the
/// band column = row + m, and they are real. The Hilbert-Schmidt norms
/// satisfy (n+1) ||A||^2 = covariant_coefficient.
fn band_operator(n: u64, l: u64, m: u64) -> CMatrix {
    debug_assert!(m <= l);
    let dim = n as usize + 1;
    let mut mat = CMatrix::zeros(dim, dim);
    if l > n {
        return mat;
    }
    // Integrand is a polynomial of degree <= l + n in cos(theta).
    let (nodes, weights) = gauss_legendre(((l + n) / 2 + 2) as usize);
    let radial: Vec<f64> = nodes.iter().map(|&u| normalized_assoc(l, m, u)).collect();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    for col in m..=n {
        let row = col - m;
        let scale = (binomial(n, col).to_f64().unwrap() * binomial(n, row).to_f64().unwrap()).sqrt();
        let mut integral = 0.0;
        for (i, &u) in nodes.iter().enumerate() {
            let s2 = 0.5 * (1.0 - u);
            let c2 = 0.5 * (1.0 + u);
            // sin(theta/2)^{2n-2col+m} cos(theta/2)^{2col-m}; exponents are
            // even plus a shared odd part, so split into squares first.
            let ps = 2 * n - 2 * col + m;
            let pc = 2 * col - m;
            let mut f = s2.powi((ps / 2) as i32) * c2.powi((pc / 2) as i32);
            if ps % 2 == 1 {
                f *= s2.sqrt();
            }
            if pc % 2 == 1 {
                f *= c2.sqrt();
            }
            integral += weights[i] * radial[i] * f;
        }
        mat[(row as usize, col as usize)] = Complex64::new(sign * 0.5 * scale * integral, 0.0);
    }
    mat
}

/// Expansion coefficients of the P-representation of a symmetric-subspace
/// operator: B = int w(x) |x><x|^n dx with
/// w(x) = sum_{l<=n,m} p(l,m) sqrt(2l+1)/covariant_coefficient(n,l) conj(y_{l,m}(x)).
///
/// With this normalization the identity maps to the single coefficient
/// p(0,0) = n+1 and the balanced Dicke projector reproduces
/// balanced_basis_coefficient on its zonal part.
pub fn p_moments(op: &SymOperator) -> Result<MomentVector> {
    let n = op.n;
    let mut out = MomentVector::zero(n as usize);
    for l in 0..=n {
        let norm = ((2 * l + 1) as f64).sqrt();
        for m in 0..=l {
            let band = band_operator(n, l, m);
            // tr(A^dag B) over the band; A is real.
            let mut fwd = Complex64::new(0.0, 0.0);
            let mut rev = Complex64::new(0.0, 0.0);
            for col in m..=n {
                let row = col - m;
                let a = band[(row as usize, col as usize)].re;
                fwd += a * op.mat[(row as usize, col as usize)];
                rev += a * op.mat[(col as usize, row as usize)];
            }
            let scale = (n + 1) as f64 / norm;
            out.set_coeff(l as usize, m as i64, scale * fwd);
            if m > 0 {
                // A_{l,-m} = (-1)^m A_{l,m}^dag
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                out.set_coeff(l as usize, -(m as i64), sign * scale * rev);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Posterior moment expansion
// ---------------------------------------------------------------------------

/// What gets expanded: either a single covariant outcome |x><x|^n at a chart
/// point, or a counted record in one projective qubit basis.
#[derive(Clone, Debug)]
pub enum MomentSource {
    Covariant { n: u64, theta: f64, phi: f64 },
    Record(MeasurementRecord),
}

/// Moments of the pure-state posterior density for the given outcome, i.e.
/// the coefficients of g(x) proportional to <x|^n B |x>^n, normalized to
/// integrate to 1 against dx, in the chart harmonics.
///
/// Covariant outcomes give mu(l,m) = covariant_coefficient(n,l) *
/// conj(y_{l,m}(z)); single-basis records are zonal around the measurement
/// axis with exact Clebsch-Gordan coefficients, rotated into the global
/// chart. Anything else (multiple bases, non-projective elements, d > 2) is
/// unsupported here.
pub fn expand_record(source: &MomentSource, l_max: usize) -> Result<MomentVector> {
    match source {
        MomentSource::Covariant { n, theta, phi } => {
            if !theta.is_finite() || !phi.is_finite() {
                return Err(TomoError::parameter("theta", "angles must be finite"));
            }
            let mut out = MomentVector::zero(l_max);
            for l in 0..=l_max.min(*n as usize) {
                let coef = rational_to_f64(&covariant_coefficient(*n, l as u64));
                for m in -(l as i64)..=(l as i64) {
                    let y = harmonic(l as u64, m, *theta, *phi)?;
                    out.set_coeff(l, m, coef * y.conj());
                }
            }
            Ok(out)
        }
        MomentSource::Record(record) => expand_single_basis(record, l_max),
    }
}

fn expand_single_basis(record: &MeasurementRecord, l_max: usize) -> Result<MomentVector> {
    if record.dim() != 2 {
        return Err(TomoError::Unsupported(
            "moment expansion only covers qubit records".into(),
        ));
    }
    let povm = record.povm();
    if povm.elements().len() != 2 {
        return Err(TomoError::Unsupported(
            "moment expansion needs a single two-outcome projective basis".into(),
        ));
    }
    for e in povm.elements() {
        let idem = e * e - e;
        let off = idem.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tr = (e[(0, 0)] + e[(1, 1)]).re;
        if off > PROJECTOR_TOL || (tr - 1.0).abs() > PROJECTOR_TOL {
            return Err(TomoError::Unsupported(
                "moment expansion needs rank-1 projective outcomes".into(),
            ));
        }
    }

    let n = record.n();
    let f2 = record.counts()[1];
    let two_j = i64::try_from(n)
        .map_err(|_| TomoError::parameter("n", "copy count too large for moment expansion"))?;
    let two_mf = 2 * f2 as i64 - two_j;

    // Zonal moments around the outcome-1 axis. The edge-weight factor is the
    // same for every l; the count-dependent one carries the f2 parity sign.
    let mut zonal = MomentVector::zero(l_max);
    for l in 0..=l_max.min(n as usize) {
        let two_l = 2 * l as i64;
        let edge = su2_clebsch_gordan(two_j, -two_j, two_j, two_j, two_l, 0)?;
        let mid = su2_clebsch_gordan(two_j, two_mf, two_j, -two_mf, two_l, 0)?;
        let parity = if (f2 as usize + l) % 2 == 0 { 1.0 } else { -1.0 };
        let value = parity * (n + 1) as f64 / ((2 * l + 1) as f64).sqrt() * edge * mid;
        zonal.set_coeff(l, 0, Complex64::new(value, 0.0));
    }

    // Rotate the pole onto the measured axis (the outcome-1 projector).
    let axis = DensityMatrix::new(povm.elements()[1].clone())?;
    let (theta0, phi0) = chart_from_bloch(axis.bloch_vector()?);
    if theta0.abs() < POLE_ANGLE_TOL {
        return Ok(zonal);
    }
    Ok(rotate_moments(&zonal, theta0, phi0))
}
