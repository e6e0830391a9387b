//! Rational enclosures of a few constants, used as independent checks.
//! Each function returns `(lo, hi)` with `lo < c < hi` and
//! `hi - lo <= 2^(-bits)` (for `pi`, `2^(-bits+1)`).

use crate::exact_core::Rational;

/// `ln 2 = sum 1/(k 2^k)`; the tail past `K` is below `1/((K+1) 2^K)`.
pub fn ln2(bits: u32) -> (Rational, Rational) {
    let k_max = u64::from(bits) + 1;
    let mut lo = Rational::zero();
    for k in 1..=k_max {
        lo += Rational::new(1, k) * Rational::pow2(-(k as i64));
    }
    let tail = Rational::new(1, k_max + 1) * Rational::pow2(-(k_max as i64));
    let hi = &lo + &tail;
    (lo, hi)
}

/// `e = sum 1/k!`; the tail past `K` is below `2/(K+1)!`.
pub fn e(bits: u32) -> (Rational, Rational) {
    let target = Rational::pow2(-i64::from(bits));
    let mut lo = Rational::one();
    let mut term = Rational::one();
    let mut k = 0u64;
    loop {
        k += 1;
        term = &term * &Rational::new(1, k);
        lo += &term;
        let tail = &term * &Rational::new(2, k + 1);
        if tail <= target {
            return (lo.clone(), lo + tail);
        }
    }
}

/// `atan(x)` for `0 < x < 1` via the alternating Taylor series.
fn atan(x: &Rational, target: &Rational) -> (Rational, Rational) {
    let x2 = x * x;
    let mut power = x.clone();
    let mut sum = Rational::zero();
    let mut k = 0u64;
    loop {
        let term = &power * &Rational::new(1, 2 * k + 1);
        if k.is_multiple_of(2) {
            sum += &term;
        } else {
            sum -= &term;
        }
        power = &power * &x2;
        k += 1;
        let next = &power * &Rational::new(1, 2 * k + 1);
        if &next <= target {
            // the next term has sign (-1)^k
            return if k % 2 == 1 {
                (&sum - &next, sum)
            } else {
                (sum.clone(), sum + next)
            };
        }
    }
}

/// Machin: `pi = 16 atan(1/5) - 4 atan(1/239)`.
pub fn pi(bits: u32) -> (Rational, Rational) {
    let target = Rational::pow2(-i64::from(bits) - 5);
    let (a_lo, a_hi) = atan(&Rational::new(1, 5), &target);
    let (b_lo, b_hi) = atan(&Rational::new(1, 239), &target);
    let sixteen = Rational::from(16);
    let four = Rational::from(4);
    (
        &sixteen * &a_lo - &four * &b_hi,
        &sixteen * &a_hi - &four * &b_lo,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(enc: (Rational, Rational), value: f64, bits: u32) {
        let (lo, hi) = enc;
        assert!(lo < hi);
        assert!(&hi - &lo <= Rational::pow2(1 - i64::from(bits)));
        assert!(lo.to_f64() <= value + 1e-15 && hi.to_f64() >= value - 1e-15);
    }

    #[test]
    fn enclosures_match_float_constants() {
        check(ln2(60), std::f64::consts::LN_2, 60);
        check(e(60), std::f64::consts::E, 60);
        check(pi(60), std::f64::consts::PI, 60);
    }

    #[test]
    fn enclosures_tighten() {
        let (lo, hi) = pi(200);
        let (lo2, hi2) = pi(20);
        assert!(lo2 <= lo && hi <= hi2);
        assert!(&hi - &lo < Rational::pow2(-190));
    }
}
