//! Demo series with hand-derived moduli and divergence certificates.

use crate::error::{Result, SeriesError};
use crate::exact_core::{
    coverage_index, CauchyModulus, ConvergentSeries, Permutation, Rational, TermStream,
};
use crate::rearrange::DivergenceCertificate;
use num_traits::ToPrimitive;

/// A convergent series whose positive and negative parts both diverge,
/// with the certificates saying how fast.
#[derive(Clone, Debug)]
pub struct ConditionalSeries {
    pub series: ConvergentSeries,
    pub cert_plus: DivergenceCertificate,
    pub cert_minus: DivergenceCertificate,
}

fn ceil_u64(q: &Rational, what: &'static str) -> Result<u64> {
    let c = q.ceil();
    if c.sign() == num_bigint::Sign::Minus {
        return Ok(0);
    }
    c.to_u64().ok_or(SeriesError::Overflow(what))
}

fn shl(bits: u64, what: &'static str) -> Result<u64> {
    if bits >= 63 {
        return Err(SeriesError::Overflow(what));
    }
    Ok(1u64 << bits)
}

/// `a_n = (-1)^(n+1) / n`.
pub fn alt_harmonic_terms() -> TermStream {
    TermStream::new(|n| {
        let sign = if n % 2 == 1 { 1 } else { -1 };
        Rational::new(sign, n)
    })
}

/// Alternating series bound: a window starting at `m` is at most `1/m`.
pub fn alt_harmonic() -> ConvergentSeries {
    ConvergentSeries::new(
        alt_harmonic_terms(),
        CauchyModulus::try_new(|eps| ceil_u64(&eps.recip(), "alt-harmonic modulus")),
    )
}

/// Odd terms over `[2^i, 2^(i+1))` contribute more than 1/4 each dyadic
/// range, even terms up to `2^(j+1)` give half of `H_(2^j) >= 1 + j/2`.
pub fn alt_harmonic_conditional() -> ConditionalSeries {
    let j_for = |c: &Rational| -> Result<u64> {
        Ok(ceil_u64(&(c * Rational::from(4)), "divergence certificate")?.saturating_sub(1))
    };
    ConditionalSeries {
        series: alt_harmonic(),
        cert_plus: DivergenceCertificate::try_new(move |c| {
            Ok(shl(j_for(c)? + 1, "divergence certificate")? - 1)
        }),
        cert_minus: DivergenceCertificate::try_new(move |c| {
            shl(j_for(c)? + 1, "divergence certificate")
        }),
    }
}

fn bitlen(n: u64) -> u64 {
    64 - u64::from(n.leading_zeros())
}

/// `a_n = (-1)^(n+1) / bitlen(n)`: alternating with slowly shrinking
/// magnitudes, so both sign parts diverge like `2^j / j`. Handy when a
/// rearrangement has to reach large levels in few terms.
pub fn alt_log_terms() -> TermStream {
    TermStream::new(|n| {
        let sign = if n % 2 == 1 { 1 } else { -1 };
        Rational::new(sign, bitlen(n))
    })
}

pub fn alt_log() -> ConditionalSeries {
    // |window from m| <= 1/bitlen(m) <= eps once bitlen(m) >= ceil(1/eps)
    let modulus = CauchyModulus::try_new(|eps| {
        let need = ceil_u64(&eps.recip(), "alt-log modulus")?;
        shl(need.saturating_sub(1), "alt-log modulus")
    });
    // Both parts gain 2^(i-1)/(i+1) on [2^i, 2^(i+1)); the odd part also has a_1 = 1.
    let dyadic = |start: Rational, c: &Rational| -> Result<u64> {
        let mut acc = start;
        let mut j = 0u64;
        while &acc <= c {
            j += 1;
            acc += Rational::new(shl(j - 1, "divergence certificate")?, j + 1);
        }
        Ok(shl(j + 1, "divergence certificate")? - 1)
    };
    ConditionalSeries {
        series: ConvergentSeries::new(alt_log_terms(), modulus),
        cert_plus: DivergenceCertificate::try_new(move |c| dyadic(Rational::one(), c)),
        cert_minus: DivergenceCertificate::try_new(move |c| dyadic(Rational::zero(), c)),
    }
}

/// Least `m >= 1` with `scale * q^m <= eps`, for `0 < q < 1`.
fn geometric_index(q: &Rational, scale: &Rational, eps: &Rational) -> u64 {
    let mut m = 1;
    let mut v = scale * q;
    while &v > eps {
        v = &v * q;
        m += 1;
    }
    m
}

/// `a_n = r^n`. Negative ratios give an alternating series whose windows
/// are bounded by their first term; positive ones by the geometric tail.
pub fn geometric(r: &Rational) -> Result<ConvergentSeries> {
    if r.abs() >= Rational::one() {
        return Err(SeriesError::InvalidArgument(format!(
            "geometric ratio must satisfy |r| < 1; got {r}"
        )));
    }
    let (p, q) = (r.numer().clone(), r.denom().clone());
    let terms = TermStream::new(move |n| {
        let e = n as usize;
        Rational::new(num_traits::pow(p.clone(), e), num_traits::pow(q.clone(), e))
    });
    let q = r.abs();
    let modulus = if r.is_zero() {
        CauchyModulus::trivial()
    } else if r.is_negative() {
        CauchyModulus::new(move |eps| geometric_index(&q, &Rational::one(), eps))
    } else {
        let scale = (Rational::one() - &q).recip();
        CauchyModulus::new(move |eps| geometric_index(&q, &scale, eps))
    };
    Ok(ConvergentSeries::new(terms, modulus))
}

/// Modulus of `sum |r|^n`, for rearranging geometric series.
pub fn geometric_abs_modulus(r: &Rational) -> CauchyModulus {
    let q = r.abs();
    if q.is_zero() {
        return CauchyModulus::trivial();
    }
    let scale = (Rational::one() - &q).recip();
    CauchyModulus::new(move |eps| geometric_index(&q, &scale, eps))
}

/// `r / (1 - r)`.
pub fn geometric_sum(r: &Rational) -> Rational {
    r / &(Rational::one() - r)
}

/// Finitely many terms, then zeros.
pub fn literal(terms: Vec<Rational>) -> ConvergentSeries {
    let len = terms.len() as u64;
    ConvergentSeries::new(TermStream::from_terms(terms), CauchyModulus::new(move |_| len + 1))
}

/// The alternating harmonic series rearranged by [`Permutation::two_pos_one_neg`].
///
/// In groups `g_j = 1/(4j-3) + 1/(4j-1) - 1/(2j)` we have
/// `0 < g_j <= 1/(j(4j-3)) <= 1/(2j^2)` for `j >= 2`. A window starting in
/// group `J >= 2` is a suffix of one group (in `[-1/(2J), 0]`), whole
/// groups (in `[0, 1/(2(J-1))]`) and a prefix of a group (in
/// `[0, 2/(4J-3)]`), so its size is at most `1/(J-1)`.
pub fn two_pos_one_neg_alt_harmonic() -> ConvergentSeries {
    let sigma = Permutation::two_pos_one_neg();
    let terms = crate::exact_core::apply_permutation(&alt_harmonic_terms(), &sigma);
    let modulus = CauchyModulus::try_new(|eps| {
        let j = ceil_u64(&eps.recip(), "grouped modulus")? + 1;
        Ok(3 * j - 2)
    });
    ConvergentSeries::new(terms, modulus)
}

/// Rearrangement of an absolutely convergent series. Past position
/// `coverage(N - 1)` every term has original index `>= N`, so windows are
/// bounded by tails of `sum |a_n|`.
pub fn rearranged_absolute(
    cs: &ConvergentSeries,
    abs_modulus: &CauchyModulus,
    sigma: &Permutation,
) -> ConvergentSeries {
    let terms = crate::exact_core::apply_permutation(&cs.terms, sigma);
    let abs = abs_modulus.clone();
    let sigma = sigma.clone();
    let modulus = CauchyModulus::try_new(move |eps| {
        let n = abs.index(eps)?;
        if n <= 1 {
            return Ok(1);
        }
        Ok(coverage_index(&sigma, n - 1)? + 1)
    });
    ConvergentSeries::new(terms, modulus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_core::{check_modulus_windows, limit_approx, partial_sum, rat};

    #[test]
    fn geometric_example() {
        let cs = geometric(&rat(-1, 2)).unwrap();
        assert_eq!(cs.modulus.index(&rat(1, 100)).unwrap(), 7);
        let r = limit_approx(&cs, &rat(1, 100)).unwrap();
        assert!((r - rat(-1, 3)).abs() <= rat(1, 100));
        assert_eq!(geometric_sum(&rat(-1, 2)), rat(-1, 3));
        assert!(geometric(&rat(1, 1)).is_err());
    }

    #[test]
    fn moduli_hold_on_windows() {
        let fine = vec![rat(1, 3), rat(1, 10), rat(1, 40)];
        // alt-log needs 2^(1/eps) terms, so keep its eps coarse
        let coarse = vec![rat(1, 2), rat(1, 5), rat(1, 10)];
        let cases = [
            (alt_harmonic(), &fine),
            (geometric(&rat(-1, 2)).unwrap(), &fine),
            (geometric(&rat(2, 3)).unwrap(), &fine),
            (alt_log().series, &coarse),
            (two_pos_one_neg_alt_harmonic(), &fine),
            (literal(vec![rat(1, 1), rat(-3, 1), rat(1, 2)]), &fine),
        ];
        for (cs, eps) in &cases {
            for e in eps.iter() {
                let horizon = cs.modulus.index(e).unwrap() + 150;
                assert_eq!(check_modulus_windows(cs, e, horizon).unwrap(), None, "{e}");
            }
        }
    }

    #[test]
    fn certificates_verify() {
        for cond in [alt_harmonic_conditional(), alt_log()] {
            let split = crate::rearrange::sign_split(&cond.series.terms);
            for c in [rat(-1, 1), rat(0, 1), rat(1, 2), rat(1, 1), rat(2, 1)] {
                cond.cert_plus.verify(&split.plus, &c).unwrap();
                cond.cert_minus.verify(&split.minus, &c).unwrap();
            }
        }
    }

    #[test]
    fn alt_harmonic_limit_near_ln2() {
        let (lo, hi) = crate::oracles::ln2(40);
        let r = limit_approx(&alt_harmonic(), &rat(1, 10)).unwrap();
        assert!(&r - &hi <= rat(1, 10) && &lo - &r <= rat(1, 10));
    }

    #[test]
    fn absolute_rearrangement_modulus() {
        let r = rat(-1, 2);
        let cs = geometric(&r).unwrap();
        let sigma = Permutation::block_shuffle(7, 6);
        let re = rearranged_absolute(&cs, &geometric_abs_modulus(&r), &sigma);
        let e = rat(1, 50);
        let horizon = re.modulus.index(&e).unwrap() + 60;
        assert_eq!(check_modulus_windows(&re, &e, horizon).unwrap(), None);
        let gap = limit_approx(&re, &e).unwrap() - partial_sum(&cs.terms, 40).unwrap();
        assert!(gap.abs() <= rat(2, 50));
    }
}
