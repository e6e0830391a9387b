use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use super::Rational;
use crate::error::{Result, SeriesError};

type TermRule = dyn Fn(u64) -> Result<Rational>;

struct StreamInner {
    rule: Box<TermRule>,
    cache: RefCell<Vec<Rational>>,
}

/// An infinite sequence of rationals `a_1, a_2, ...` given by an index rule.
///
/// Terms are memoized as a contiguous prefix: asking for `a_n` evaluates
/// every earlier term that has not been seen yet. Clones share the cache.
#[derive(Clone)]
pub struct TermStream {
    inner: Rc<StreamInner>,
}

impl fmt::Debug for TermStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TermStream")
            .field("cached", &self.inner.cache.borrow().len())
            .finish()
    }
}

impl TermStream {
    pub fn new(rule: impl Fn(u64) -> Rational + 'static) -> Self {
        Self::try_new(move |n| Ok(rule(n)))
    }

    /// A stream whose rule may fail, e.g. because it reads through a
    /// permutation that turns out not to be injective.
    pub fn try_new(rule: impl Fn(u64) -> Result<Rational> + 'static) -> Self {
        TermStream {
            inner: Rc::new(StreamInner {
                rule: Box::new(rule),
                cache: RefCell::new(Vec::new()),
            }),
        }
    }

    pub fn zero() -> Self {
        Self::new(|_| Rational::zero())
    }

    /// Finitely many terms followed by zeros.
    pub fn from_terms(terms: Vec<Rational>) -> Self {
        Self::new(move |n| {
            terms
                .get((n - 1) as usize)
                .cloned()
                .unwrap_or_else(Rational::zero)
        })
    }

    pub fn term(&self, n: u64) -> Result<Rational> {
        if n == 0 {
            return Err(SeriesError::ZeroIndex(0));
        }
        self.fill(n)?;
        Ok(self.inner.cache.borrow()[(n - 1) as usize].clone())
    }

    fn fill(&self, n: u64) -> Result<()> {
        let have = self.inner.cache.borrow().len() as u64;
        for i in have + 1..=n {
            let t = (self.inner.rule)(i)?;
            self.inner.cache.borrow_mut().push(t);
        }
        Ok(())
    }

    /// `a_1, ..., a_len`.
    pub fn prefix(&self, len: u64) -> Result<Vec<Rational>> {
        self.fill(len)?;
        Ok(self.inner.cache.borrow()[..len as usize].to_vec())
    }

    /// Runs `f` over the terms `a_from..=a_to` without cloning them.
    pub fn for_each_in(&self, from: u64, to: u64, mut f: impl FnMut(u64, &Rational)) -> Result<()> {
        if from == 0 {
            return Err(SeriesError::ZeroIndex(0));
        }
        if to < from {
            return Ok(());
        }
        self.fill(to)?;
        let cache = self.inner.cache.borrow();
        for i in from..=to {
            f(i, &cache[(i - 1) as usize]);
        }
        Ok(())
    }

    /// Termwise image under `g`.
    pub fn map(&self, g: impl Fn(&Rational) -> Rational + 'static) -> TermStream {
        let src = self.clone();
        TermStream::try_new(move |n| Ok(g(&src.term(n)?)))
    }

    pub fn abs(&self) -> TermStream {
        self.map(Rational::abs)
    }

    /// Lazy iterator over `(n, a_n, a_1 + ... + a_n)`.
    pub fn partial_sums(&self) -> PartialSums {
        PartialSums {
            stream: self.clone(),
            n: 0,
            sum: Rational::zero(),
        }
    }
}

pub struct PartialSums {
    stream: TermStream,
    n: u64,
    sum: Rational,
}

impl Iterator for PartialSums {
    type Item = Result<(u64, Rational, Rational)>;

    fn next(&mut self) -> Option<Self::Item> {
        self.n += 1;
        match self.stream.term(self.n) {
            Ok(t) => {
                self.sum += &t;
                Some(Ok((self.n, t, self.sum.clone())))
            }
            Err(e) => Some(Err(e)),
        }
    }
}

/// `a_1 + ... + a_n`; the empty sum for `n = 0` is zero.
pub fn partial_sum(s: &TermStream, n: u64) -> Result<Rational> {
    window_sum(s, 1, n)
}

/// `a_from + ... + a_to`; empty (zero) when `to < from`.
pub fn window_sum(s: &TermStream, from: u64, to: u64) -> Result<Rational> {
    let mut acc = Rational::zero();
    if to >= from {
        s.for_each_in(from.max(1), to, |_, t| acc += t)?;
    }
    Ok(acc)
}

type ModulusRule = dyn Fn(&Rational) -> Result<u64>;

/// A Cauchy modulus in window form: for every `m' >= m >= N(eps)`,
/// `|a_m + ... + a_m'| <= eps`.
///
/// Moduli are trusted certificates. Nothing here re-checks them; the test
/// suites sample windows against them instead.
#[derive(Clone)]
pub struct CauchyModulus {
    rule: Rc<ModulusRule>,
}

impl fmt::Debug for CauchyModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CauchyModulus")
    }
}

impl CauchyModulus {
    pub fn new(rule: impl Fn(&Rational) -> u64 + 'static) -> Self {
        Self::try_new(move |e| Ok(rule(e)))
    }

    pub fn try_new(rule: impl Fn(&Rational) -> Result<u64> + 'static) -> Self {
        CauchyModulus { rule: Rc::new(rule) }
    }

    /// Every window of the series is zero: `N(eps) = 1`.
    pub fn trivial() -> Self {
        Self::new(|_| 1)
    }

    /// `N(eps)`; rejects `eps <= 0`.
    pub fn index(&self, eps: &Rational) -> Result<u64> {
        if !eps.is_positive() {
            return Err(SeriesError::NonPositiveEpsilon(eps.clone()));
        }
        Ok((self.rule)(eps)?.max(1))
    }
}

/// A term stream together with its convergence certificate.
#[derive(Clone, Debug)]
pub struct ConvergentSeries {
    pub terms: TermStream,
    pub modulus: CauchyModulus,
}

impl ConvergentSeries {
    pub fn new(terms: TermStream, modulus: CauchyModulus) -> Self {
        ConvergentSeries { terms, modulus }
    }
}

/// The partial sum at `N(eps)`; under a valid modulus it lies within `eps`
/// of the limit, since the remaining tail is a limit of windows past `N`.
pub fn limit_approx(cs: &ConvergentSeries, eps: &Rational) -> Result<Rational> {
    let n = cs.modulus.index(eps)?;
    partial_sum(&cs.terms, n)
}

/// Checks the window contract `|a_m + ... + a_m'| <= eps` for every
/// `N(eps) <= m <= m' <= horizon`. Quadratic in the horizon; meant for tests
/// and CLI self-checks. Returns the first violating window.
pub fn check_modulus_windows(
    cs: &ConvergentSeries,
    eps: &Rational,
    horizon: u64,
) -> Result<Option<(u64, u64, Rational)>> {
    let start = cs.modulus.index(eps)?;
    if horizon < start {
        return Ok(None);
    }
    let terms = cs.terms.prefix(horizon)?;
    // Every window is a difference of two prefix sums, so it is enough to
    // track the extreme prefix sums seen so far.
    let mut prefix = Rational::zero();
    let mut lo = (Rational::zero(), start - 1);
    let mut hi = (Rational::zero(), start - 1);
    for m in start..=horizon {
        prefix += &terms[(m - 1) as usize];
        let up = &prefix - &lo.0;
        if &up > eps {
            return Ok(Some((lo.1 + 1, m, up)));
        }
        let down = &prefix - &hi.0;
        if &down.abs() > eps {
            return Ok(Some((hi.1 + 1, m, down)));
        }
        if prefix < lo.0 {
            lo = (prefix.clone(), m);
        }
        if prefix > hi.0 {
            hi = (prefix.clone(), m);
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_core::rat;

    fn alt_harmonic() -> TermStream {
        TermStream::new(|n| {
            let sign = if n % 2 == 1 { 1 } else { -1 };
            Rational::new(sign, n as i64)
        })
    }

    #[test]
    fn partial_sum_cases() {
        assert_eq!(partial_sum(&TermStream::zero(), 10).unwrap(), Rational::zero());
        assert_eq!(partial_sum(&alt_harmonic(), 0).unwrap(), Rational::zero());
        // 1 - 1/2 + 1/3 - 1/4, summed by hand over the common denominator 12
        let oracle = Rational::new(12 - 6 + 4 - 3, 12);
        assert_eq!(partial_sum(&alt_harmonic(), 4).unwrap(), oracle);
        assert_eq!(oracle, rat(7, 12));
    }

    #[test]
    fn term_zero_index_rejected() {
        assert_eq!(alt_harmonic().term(0), Err(SeriesError::ZeroIndex(0)));
    }

    #[test]
    fn memoized_terms_are_stable() {
        use std::cell::Cell;
        let calls = Rc::new(Cell::new(0u64));
        let c = calls.clone();
        let s = TermStream::new(move |n| {
            c.set(c.get() + 1);
            Rational::from(n)
        });
        assert_eq!(s.term(5).unwrap(), Rational::from(5u64));
        assert_eq!(s.term(3).unwrap(), Rational::from(3u64));
        let clone = s.clone();
        assert_eq!(clone.term(5).unwrap(), Rational::from(5u64));
        assert_eq!(calls.get(), 5);
    }

    #[test]
    fn window_sum_empty_and_single() {
        let s = alt_harmonic();
        assert_eq!(window_sum(&s, 5, 4).unwrap(), Rational::zero());
        assert_eq!(window_sum(&s, 3, 3).unwrap(), rat(1, 3));
    }

    #[test]
    fn modulus_rejects_nonpositive_eps() {
        let m = CauchyModulus::trivial();
        assert!(matches!(m.index(&Rational::zero()), Err(SeriesError::NonPositiveEpsilon(_))));
        assert_eq!(m.index(&rat(1, 2)).unwrap(), 1);
    }

    #[test]
    fn modulus_window_checker_finds_lies() {
        let s = alt_harmonic();
        let honest = ConvergentSeries::new(
            s.clone(),
            CauchyModulus::new(|e| e.recip().ceil().try_into().unwrap()),
        );
        assert_eq!(check_modulus_windows(&honest, &rat(1, 10), 60).unwrap(), None);
        let liar = ConvergentSeries::new(s, CauchyModulus::new(|_| 1));
        let (m, m2, sum) = check_modulus_windows(&liar, &rat(1, 10), 60).unwrap().unwrap();
        assert!(m <= m2 && sum.abs() > rat(1, 10));
    }

    #[test]
    fn partial_sums_iterator() {
        let rows: Vec<_> = alt_harmonic().partial_sums().take(4).map(|r| r.unwrap()).collect();
        assert_eq!(rows[3], (4, rat(-1, 4), rat(7, 12)));
    }
}
