//! Probability that the utility-optimal ordering lands in the surrogate's top `M`.
//!
//! The surrogate ranking of `R` objects is taken to be uniform over all
//! rankings at Kendall distance exactly `delta` from the true ranking.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::perm::{max_pairs, MahonianTable};

fn check_args(r: usize, delta: u64, m: usize) -> Result<()> {
    if r < 2 {
        return Err(Error::invalid(format!("R must be at least 2, got {r}")));
    }
    let t = max_pairs(r);
    if delta > t {
        return Err(Error::invalid(format!("delta {delta} outside 0..={t} for R={r}")));
    }
    if m == 0 || m > r {
        return Err(Error::invalid(format!("M must be in 1..={r}, got {m}")));
    }
    Ok(())
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `sum_{m=1}^{M} N_{R-1, delta-m+1} / N_{R, delta}` as an exact fraction.
pub fn prob_optimal_in_top_m_exact(r: usize, delta: u64, m: usize) -> Result<BigRational> {
    check_args(r, delta, m)?;
    let table = MahonianTable::new(r, delta as usize);
    let den = table.exact(r, delta as i64)?;
    if den.is_zero() {
        return Err(Error::invalid(format!("no ranking of {r} objects is at distance {delta}")));
    }
    let mut num = BigUint::zero();
    for k in 1..=m as i64 {
        num += table.exact(r - 1, delta as i64 - k + 1)?;
    }
    Ok(ratio(num, den))
}

pub fn prob_optimal_in_top_m(r: usize, delta: u64, m: usize) -> Result<f64> {
    Ok(rational_to_f64(&prob_optimal_in_top_m_exact(r, delta, m)?))
}

/// The same probability through cumulative counts, valid for `delta <= R-1`.
///
/// On that range `N_{R,delta} = C_{R-1,delta}` and
/// `N_{R-1,d} = C_{R-2,d} - C_{R-2,d-1}` except at `d = R-1`, where the
/// cumulative count of row `R-2` already saturates and one ordering has to
/// be removed.
pub fn prob_corollary_exact(r: usize, delta: u64, m: usize) -> Result<BigRational> {
    check_args(r, delta, m)?;
    if delta > r as u64 - 1 {
        return Err(Error::invalid(format!("corollary needs delta <= R-1 = {}, got {delta}", r - 1)));
    }
    let table = MahonianTable::new(r, delta as usize);
    let mut num = BigUint::zero();
    for k in 1..=m as i64 {
        num += table.cumulative(r - 2, delta as i64 - k + 1)?;
    }
    if delta == r as u64 - 1 {
        num -= BigUint::one();
    }
    Ok(ratio(num, table.cumulative(r - 1, delta as i64)?))
}

pub fn prob_corollary(r: usize, delta: u64, m: usize) -> Result<f64> {
    Ok(rational_to_f64(&prob_corollary_exact(r, delta, m)?))
}

/// `(m, P)` rows for `m = 1..=m_max`.
pub fn probability_table(r: usize, delta: u64, m_max: usize) -> Result<Vec<(usize, f64)>> {
    check_args(r, delta, m_max.max(1))?;
    let table = MahonianTable::new(r, delta as usize);
    let den = table.exact(r, delta as i64)?;
    if den.is_zero() {
        return Err(Error::invalid(format!("no ranking of {r} objects is at distance {delta}")));
    }
    let mut num = BigUint::zero();
    let mut rows = Vec::with_capacity(m_max);
    for k in 1..=m_max {
        num += table.exact(r - 1, delta as i64 - k as i64 + 1)?;
        rows.push((k, rational_to_f64(&ratio(num.clone(), den.clone()))));
    }
    Ok(rows)
}

/// `tau = (T - 2 delta) / T`.
pub fn tau_from_delta(t: &BigUint, delta: &BigUint) -> Result<f64> {
    if t.is_zero() {
        return Err(Error::invalid("T must be positive"));
    }
    if delta > t {
        return Err(Error::invalid(format!("delta {delta} exceeds T = {t}")));
    }
    let t = BigInt::from(t.clone());
    let q = BigRational::new(&t - BigInt::from(delta.clone()) * 2, t);
    Ok(rational_to_f64(&q))
}

/// `delta = T (1 - tau) / 2`, rounded to the nearest integer (halves away from zero).
pub fn delta_from_tau(t: &BigUint, tau: f64) -> Result<BigUint> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau {tau} outside [-1, 1]")));
    }
    let tau = BigRational::from_float(tau).ok_or_else(|| Error::invalid("tau must be finite"))?;
    let t = BigRational::from_integer(BigInt::from(t.clone()));
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let d = (t * (BigRational::one() - tau) * &half).round();
    let d = d.to_integer();
    if d.is_negative() {
        return Err(Error::invalid("negative distance"));
    }
    Ok(d.to_biguint().expect("non-negative"))
}

/// Kendall tau above which `delta <= R - 1`: `1 - 2(R-1)/T = 1 - 4/R`.
pub fn corollary_tau_threshold(r: usize) -> Result<f64> {
    if r < 2 {
        return Err(Error::invalid(format!("R must be at least 2, got {r}")));
    }
    Ok(1.0 - 4.0 / r as f64)
}
