//! Exact dimension counting for symmetric subspaces and the confidence-region
//! calibration constants derived from them. Binomials are computed with
//! arbitrary-precision integers and only converted to floating point at the
//! very end, so the region parameters stay exact for any practical `n`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Result, TomoError};

/// Exact binomial coefficient C(n, k).
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Exact factorial n!.
pub fn factorial(n: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 2..=n {
        acc *= BigUint::from(i);
    }
    acc
}

/// Dimension of the symmetric subspace of n copies of a d-dimensional
/// system: C(n + d - 1, n).
pub fn sym_dim(n: u64, d: u32) -> Result<BigUint> {
    if d < 1 {
        return Err(TomoError::parameter("d", "dimension must be at least 1"));
    }
    Ok(binomial(n + d as u64 - 1, n))
}

/// Number of type classes entering the region calibration:
/// C(n + d^2 - 1, d^2 - 1), i.e. the symmetric dimension at d^2.
pub fn definetti_constant(n: u64, d: u32) -> Result<BigUint> {
    if d < 1 {
        return Err(TomoError::parameter("d", "dimension must be at least 1"));
    }
    let dd = (d as u64) * (d as u64);
    Ok(binomial(n + dd - 1, dd - 1))
}

/// Natural log of a positive big integer, accurate to f64 precision even far
/// beyond the f64 range.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 63 {
        return (x.to_u64().expect("fits in u64") as f64).ln();
    }
    let shift = bits - 63;
    let top = (x >> shift).to_u64().expect("shifted to 63 bits");
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(TomoError::parameter(
            "epsilon",
            format!("must lie strictly between 0 and 1, got {epsilon}"),
        ));
    }
    Ok(())
}

/// Enlargement radius in purified distance for an n-sample region at
/// confidence 1 - epsilon:
/// min(1, sqrt((2/n) (ln(2/eps) + 2 ln C(2n + d^2 - 1, d^2 - 1)))).
pub fn delta_radius(n: u64, d: u32, epsilon: f64) -> Result<f64> {
    if n < 1 {
        return Err(TomoError::parameter("n", "need at least one sample"));
    }
    check_epsilon(epsilon)?;
    let ln_c = ln_biguint(&definetti_constant(2 * n, d)?);
    let sq = (2.0 / n as f64) * ((2.0 / epsilon).ln() + 2.0 * ln_c);
    Ok(sq.sqrt().min(1.0))
}

/// Target mass for the likelihood level set: 1 - (eps/2) / C(2n + d^2 - 1, d^2 - 1).
pub fn mass_threshold(n: u64, d: u32, epsilon: f64) -> Result<f64> {
    if n < 1 {
        return Err(TomoError::parameter("n", "need at least one sample"));
    }
    check_epsilon(epsilon)?;
    let ln_c = ln_biguint(&definetti_constant(2 * n, d)?);
    Ok(1.0 - 0.5 * epsilon * (-ln_c).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::One;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn binomial_edges() {
        assert_eq!(binomial(0, 0), big(1));
        assert_eq!(binomial(5, 0), big(1));
        assert_eq!(binomial(5, 5), big(1));
        assert_eq!(binomial(5, 6), big(0));
        assert_eq!(binomial(52, 5), big(2_598_960));
    }

    #[test]
    fn sym_dim_examples() {
        assert_eq!(sym_dim(0, 5).unwrap(), big(1));
        assert_eq!(sym_dim(3, 1).unwrap(), big(1));
        assert_eq!(sym_dim(2, 2).unwrap(), big(3));
        assert_eq!(sym_dim(4, 2).unwrap(), big(5));
        assert_eq!(sym_dim(3, 3).unwrap(), big(10));
        assert!(sym_dim(3, 0).is_err());
    }

    #[test]
    fn sym_dim_polynomial_bound() {
        // C(n+d-1, n) <= (n+1)^(d-1) for all tested ranges.
        for d in 1..=8u32 {
            for n in 0..=200u64 {
                let dim = sym_dim(n, d).unwrap();
                let bound = BigUint::from(n + 1).pow(d - 1);
                assert!(dim <= bound, "dim({n},{d}) exceeds (n+1)^(d-1)");
            }
        }
    }

    #[test]
    fn definetti_matches_sym_dim_at_d_squared() {
        for d in 1..=4u32 {
            for n in 0..=60u64 {
                assert_eq!(
                    definetti_constant(n, d).unwrap(),
                    sym_dim(n, d * d).unwrap()
                );
            }
        }
        assert_eq!(definetti_constant(200, 2).unwrap(), big(1_373_701));
    }

    #[test]
    fn ln_biguint_accuracy() {
        assert!((ln_biguint(&big(1)) - 0.0).abs() < 1e-15);
        assert!((ln_biguint(&big(1_000_000)) - 6.0 * 10f64.ln()).abs() < 1e-12);
        // Huge value: ln(2^1000) = 1000 ln 2.
        let huge = BigUint::one() << 1000;
        assert!((ln_biguint(&huge) - 1000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        // Factorial-sized: ln(100!) known to ~1e-10 relative.
        let expected = 363.73937555556349; // ln Gamma(101)
        assert!((ln_biguint(&factorial(100)) - expected).abs() < 1e-9);
    }

    #[test]
    fn factorial_small_values() {
        assert_eq!(factorial(0), big(1));
        assert_eq!(factorial(1), big(1));
        assert_eq!(factorial(5), big(120));
        assert_eq!(factorial(12), big(479_001_600));
        // n! = n * (n-1)!
        assert_eq!(factorial(30), factorial(29) * big(30));
    }

    #[test]
    fn delta_radius_examples() {
        // Large-deviation radius at n=100, d=2, eps=0.01.
        let d = delta_radius(100, 2, 0.01).unwrap();
        assert!((d - 0.8193).abs() < 5e-4, "delta {d}");
        // Small n clamps to 1 (unclamped square is ~10.8).
        assert_eq!(delta_radius(2, 2, 0.05).unwrap(), 1.0);
        let unclamped = (2.0 / 2.0) * ((2.0_f64 / 0.05).ln() + 2.0 * 35.0_f64.ln());
        assert!((unclamped - 10.8).abs() < 0.05);
    }

    #[test]
    fn delta_radius_monotone_in_epsilon_and_n() {
        // Shrinks as epsilon grows; shrinks in n once out of the clamp.
        let mut prev = f64::INFINITY;
        for &eps in &[0.01, 0.05, 0.1, 0.3, 0.9] {
            let v = delta_radius(5000, 2, eps).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = 1.0;
        for &n in &[100u64, 200, 400, 1000, 10_000] {
            let v = delta_radius(n, 2, 0.05).unwrap();
            assert!(v <= prev, "delta not shrinking at n={n}");
            prev = v;
        }
    }

    #[test]
    fn mass_threshold_examples() {
        let t = mass_threshold(2, 2, 0.05).unwrap();
        assert!((t - (1.0 - 0.025 / 35.0)).abs() < 1e-12);
        // Rational cross-check: 1 - (eps/2)/c with c = C(2n+3, 3) for d=2.
        let c = definetti_constant(200, 2).unwrap();
        let eps_num = BigRational::new(BigInt::from(1), BigInt::from(40)); // 0.025
        let exact = BigRational::one()
            - eps_num / BigRational::from_integer(BigInt::from(c.clone()));
        let exact_f = exact.to_f64().unwrap();
        assert!((mass_threshold(100, 2, 0.05).unwrap() - exact_f).abs() < 1e-15);
        // Always below 1 at desk scale.
        assert!(mass_threshold(30, 2, 0.2).unwrap() < 1.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(delta_radius(0, 2, 0.1).is_err());
        assert!(delta_radius(10, 2, 0.0).is_err());
        assert!(delta_radius(10, 2, 1.0).is_err());
        assert!(mass_threshold(10, 0, 0.1).is_err());
    }
}
