//! Machinery that turns a bound on the positive tails of a rational series
//! into combinatorial data: the predicate `phi`, the set `S` of indices
//! with a heavy positive tail, the search `kappa`, the 0/1 sequence
//! `lambda`, its bad intervals, the permutation that pulls positive terms
//! to the front of each interval, and the rational shifts that make real
//! terms rational.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use crate::error::{Result, SeriesError};
use crate::exact_core::{Permutation, PermutationSource, Rational, TermStream};

/// `phi(m, n) = 0` iff `m > n` and `a_(n+1)^+ + ... + a_m^+ >= eps`.
///
/// Prefix sums of the positive parts are memoized, so every query is one
/// exact comparison once the prefix is known.
#[derive(Clone)]
pub struct PlusTailPredicate {
    series: TermStream,
    eps: Rational,
    plus: Rc<RefCell<Vec<Rational>>>,
}

impl fmt::Debug for PlusTailPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlusTailPredicate").field("eps", &self.eps).finish()
    }
}

impl PlusTailPredicate {
    pub fn new(series: &TermStream, eps: Rational) -> Result<Self> {
        if !eps.is_positive() {
            return Err(SeriesError::NonPositiveEpsilon(eps));
        }
        Ok(PlusTailPredicate {
            series: series.clone(),
            eps,
            plus: Rc::new(RefCell::new(vec![Rational::zero()])),
        })
    }

    /// The same predicate on `-a`, i.e. on the negative parts.
    pub fn minus(series: &TermStream, eps: Rational) -> Result<Self> {
        Self::new(&series.map(|t| -t), eps)
    }

    pub fn eps(&self) -> &Rational {
        &self.eps
    }

    pub fn series(&self) -> &TermStream {
        &self.series
    }

    /// `a_1^+ + ... + a_n^+`.
    pub fn plus_prefix(&self, n: u64) -> Result<Rational> {
        let have = self.plus.borrow().len() as u64 - 1;
        if n > have {
            let mut acc = self.plus.borrow().last().cloned().unwrap_or_else(Rational::zero);
            let mut fresh = Vec::with_capacity((n - have) as usize);
            self.series.for_each_in(have + 1, n, |_, t| {
                if t.is_positive() {
                    acc += t;
                }
                fresh.push(acc.clone());
            })?;
            self.plus.borrow_mut().extend(fresh);
        }
        Ok(self.plus.borrow()[n as usize].clone())
    }

    /// `a_(n+1)^+ + ... + a_m^+`.
    pub fn plus_mass(&self, n: u64, m: u64) -> Result<Rational> {
        if m <= n {
            return Ok(Rational::zero());
        }
        Ok(self.plus_prefix(m)? - self.plus_prefix(n)?)
    }

    fn heavy(&self, n: u64, m: u64) -> Result<bool> {
        Ok(m > n && self.plus_prefix(m)? >= self.plus_prefix(n)? + &self.eps)
    }

    pub fn phi(&self, m: u64, n: u64) -> Result<u8> {
        Ok(if self.heavy(n, m)? { 0 } else { 1 })
    }
}

/// The outcome of a bounded search for an `m` with `phi(m, n) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SMembership {
    Member(u64),
    Unknown { searched_up_to: u64 },
}

/// Least `m <= n + fuel` with `phi(m, n) = 0`. The positive prefix sums are
/// nondecreasing, so the endpoint decides whether one exists and a binary
/// search finds the least.
pub fn kappa(p: &PlusTailPredicate, n: u64, fuel: u64) -> Result<SMembership> {
    if n == 0 {
        return Err(SeriesError::ZeroIndex(0));
    }
    if fuel == 0 {
        return Err(SeriesError::InvalidArgument("kappa needs fuel >= 1".into()));
    }
    let top = n + fuel;
    if !p.heavy(n, top)? {
        return Ok(SMembership::Unknown { searched_up_to: top });
    }
    let (mut lo, mut hi) = (n, top);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if p.heavy(n, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if p.phi(hi, n)? != 0 || p.phi(hi - 1, n)? != 1 {
        return Err(SeriesError::Certificate(format!("kappa({n}) = {hi} is not minimal")));
    }
    Ok(SMembership::Member(hi))
}

/// A point `s` claimed to be in `S`, with the `m` that shows it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Certified {
    pub value: u64,
    pub witness: u64,
}

struct LambdaState {
    pred: PlusTailPredicate,
    seq: Box<dyn Fn(u64) -> Certified>,
    bits: Vec<bool>,
    /// `(n, m)`: `lambda_(n-1) = 0`, `lambda_n = 1`, and `phi(m, n) = 0`
    entries: Vec<(u64, u64)>,
    run_start: u64,
}

impl LambdaState {
    fn certified(&self, n: u64) -> Result<Certified> {
        let c = (self.seq)(n);
        if self.pred.phi(c.witness, c.value)? != 0 {
            return Err(SeriesError::Membership {
                value: c.value,
                witness: c.witness,
                mass: self.pred.plus_mass(c.value, c.witness)?,
            });
        }
        Ok(c)
    }

    fn extend_to(&mut self, len: u64) -> Result<()> {
        if self.bits.is_empty() {
            let first = self.certified(1)?;
            if first.value != 1 {
                return Err(SeriesError::InvalidArgument(format!(
                    "the sequence must start with s_1 = 1; got {}",
                    first.value
                )));
            }
            self.bits.push(false);
        }
        while (self.bits.len() as u64) < len {
            let n = self.bits.len() as u64;
            let next = if !self.bits[(n - 1) as usize] {
                let s = self.certified(n + 1)?;
                if s.value <= n + 1 {
                    false
                } else {
                    // n + 1 < s_(n+1), so the same witness covers n + 1
                    let w = s.witness;
                    if self.pred.phi(w, n + 1)? != 0 {
                        return Err(SeriesError::Membership {
                            value: n + 1,
                            witness: w,
                            mass: self.pred.plus_mass(n + 1, w)?,
                        });
                    }
                    self.entries.push((n + 1, w));
                    self.run_start = n + 1;
                    true
                }
            } else {
                // the run closes exactly at kappa(run_start)
                !self.pred.heavy(self.run_start, n)?
            };
            self.bits.push(next);
        }
        Ok(())
    }
}

/// The 0/1 sequence: it stays 0 while `s_(n+1) <= n + 1`, opens a run of 1s
/// when the sequence jumps ahead, and closes the run once the positive
/// tail from its start reaches `eps`.
#[derive(Clone)]
pub struct LambdaStream {
    state: Rc<RefCell<LambdaState>>,
}

impl fmt::Debug for LambdaStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LambdaStream")
            .field("evaluated", &self.state.borrow().bits.len())
            .finish()
    }
}

/// `seq(n)` must return `s_n` with a witness `m` such that `phi(m, s_n) = 0`;
/// witnesses are re-checked as the stream is evaluated.
pub fn lambda_stream(
    p: &PlusTailPredicate,
    seq: impl Fn(u64) -> Certified + 'static,
) -> Result<LambdaStream> {
    let stream = LambdaStream {
        state: Rc::new(RefCell::new(LambdaState {
            pred: p.clone(),
            seq: Box::new(seq),
            bits: Vec::new(),
            entries: Vec::new(),
            run_start: 0,
        })),
    };
    stream.state.borrow_mut().extend_to(1)?;
    Ok(stream)
}

impl LambdaStream {
    pub fn bit(&self, n: u64) -> Result<bool> {
        if n == 0 {
            return Err(SeriesError::ZeroIndex(0));
        }
        self.state.borrow_mut().extend_to(n)?;
        Ok(self.state.borrow().bits[(n - 1) as usize])
    }

    /// `lambda_1, ..., lambda_len`.
    pub fn prefix(&self, len: u64) -> Result<Vec<bool>> {
        self.state.borrow_mut().extend_to(len)?;
        Ok(self.state.borrow().bits[..len as usize].to_vec())
    }

    /// Witnesses for the starts of 1-runs seen so far.
    pub fn run_entries(&self) -> Vec<(u64, u64)> {
        self.state.borrow().entries.clone()
    }

    pub fn s(&self, n: u64) -> u64 {
        (self.state.borrow().seq)(n).value
    }

    /// Maximal 1-runs in `lambda_1..lambda_upto` whose closing 0 is inside.
    pub fn bad_intervals(&self, upto: u64) -> Result<Vec<BadInterval>> {
        Ok(bad_intervals(&self.prefix(upto)?))
    }
}

/// A maximal run `[lo, hi]` of 1s.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BadInterval {
    pub lo: u64,
    pub hi: u64,
}

impl BadInterval {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(SeriesError::InvalidInterval(lo, hi));
        }
        Ok(BadInterval { lo, hi })
    }

    pub fn contains(&self, n: u64) -> bool {
        self.lo <= n && n <= self.hi
    }
}

/// Closed 1-runs of `bits` (`bits[0]` is `lambda_1`).
pub fn bad_intervals(bits: &[bool]) -> Vec<BadInterval> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &b) in bits.iter().enumerate() {
        let n = i as u64 + 1;
        match (b, start) {
            (true, None) => start = Some(n),
            (false, Some(lo)) => {
                out.push(BadInterval { lo, hi: n - 1 });
                start = None;
            }
            _ => {}
        }
    }
    out
}

struct IntervalShuffle {
    intervals: Vec<BadInterval>,
    images: Vec<Vec<u64>>,
}

impl IntervalShuffle {
    fn find(&self, n: u64) -> Option<usize> {
        let i = self.intervals.partition_point(|iv| iv.hi < n);
        (i < self.intervals.len() && self.intervals[i].contains(n)).then_some(i)
    }
}

impl PermutationSource for IntervalShuffle {
    fn next_image(&mut self, n: u64) -> Result<u64> {
        Ok(match self.find(n) {
            Some(i) => self.images[i][(n - self.intervals[i].lo) as usize],
            None => n,
        })
    }

    fn coverage(&mut self, n: u64) -> Result<u64> {
        Ok(match self.find(n) {
            Some(i) => self.intervals[i].hi,
            None => n,
        })
    }
}

/// Identity off the intervals; inside each, positive terms first and then
/// the rest, both in increasing order.
pub fn sigma_from_lambda(a: &TermStream, intervals: &[BadInterval]) -> Result<Permutation> {
    let mut ivs = intervals.to_vec();
    ivs.sort();
    for w in ivs.windows(2) {
        if w[1].lo <= w[0].hi {
            return Err(SeriesError::Overlap(w[0].lo, w[0].hi, w[1].lo, w[1].hi));
        }
    }
    let mut images = Vec::with_capacity(ivs.len());
    for iv in &ivs {
        BadInterval::new(iv.lo, iv.hi)?;
        let mut pos = Vec::new();
        let mut rest = Vec::new();
        a.for_each_in(iv.lo, iv.hi, |i, t| {
            if t.is_positive() {
                pos.push(i);
            } else {
                rest.push(i);
            }
        })?;
        pos.extend(rest);
        images.push(pos);
    }
    Ok(Permutation::new(IntervalShuffle { intervals: ivs, images }))
}

/// For a run `[lo, hi]` closed by `kappa(lo) = hi`, the positions
/// `j = lo - 1 < k` holding the run's positive terms, with
/// `a_sigma(j+1) + ... + a_sigma(k) >= eps` checked exactly.
pub fn verify_sig1(
    a: &TermStream,
    sigma: &Permutation,
    iv: &BadInterval,
    eps: &Rational,
) -> Result<(u64, u64)> {
    if !eps.is_positive() {
        return Err(SeriesError::NonPositiveEpsilon(eps.clone()));
    }
    let mut positives = 0;
    a.for_each_in(iv.lo, iv.hi, |_, t| positives += u64::from(t.is_positive()))?;
    let j = iv.lo - 1;
    let k = j + positives.max(1);
    let mut sum = Rational::zero();
    for pos in j + 1..=k {
        sum += a.term(sigma.image(pos)?)?;
    }
    if &sum < eps {
        return Err(SeriesError::Sig1NotFound {
            lo: iv.lo,
            hi: iv.hi,
            best: sum,
        });
    }
    Ok((j, k))
}

/// Rational terms `r_i = a_i + b_i` with `0 < b_i < 2^-i`, and an exact
/// enclosure of each shift.
#[derive(Clone)]
pub struct Rationalized {
    pub terms: TermStream,
    oracle: Rc<dyn Fn(u64, &Rational) -> Rational>,
}

impl fmt::Debug for Rationalized {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Rationalized")
    }
}

fn rationalize_one(oracle: &dyn Fn(u64, &Rational) -> Rational, i: u64) -> (Rational, Rational, Rational) {
    let grid = Rational::pow2(-(i as i64) - 2);
    let q = oracle(i, &grid);
    let top = &q + &grid;
    // next grid point strictly above q + grid
    let steps = (&top / &grid).floor() + 1;
    let r = Rational::from(steps) * &grid;
    (r, q, grid)
}

impl Rationalized {
    /// `(lo, hi)` with `lo <= b_i <= hi`, `0 < lo` and `hi < 2^-i`.
    pub fn shift_bounds(&self, i: u64) -> Result<(Rational, Rational)> {
        if i == 0 {
            return Err(SeriesError::ZeroIndex(0));
        }
        let (r, q, grid) = rationalize_one(&*self.oracle, i);
        Ok((&r - &q - &grid, &r - &q + &grid))
    }
}

/// `oracle(i, e)` must return a rational within `e` of the real `a_i`. It
/// is queried at `e = 2^-(i+2)` and the answer is rounded up to the next
/// multiple of `2^-(i+2)` strictly above the approximation plus its error.
pub fn rationalize(oracle: impl Fn(u64, &Rational) -> Rational + 'static) -> Rationalized {
    let oracle: Rc<dyn Fn(u64, &Rational) -> Rational> = Rc::new(oracle);
    let o = oracle.clone();
    Rationalized {
        terms: TermStream::new(move |i| rationalize_one(&*o, i).0),
        oracle,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TailCheck {
    Pass,
    Fail { sum: Rational },
}

/// Whether `a_(n+1)^+ + ... + a_m^+ <= eps`, for `m > n >= big_n`.
pub fn tail_bound_check(p: &PlusTailPredicate, big_n: u64, n: u64, m: u64) -> Result<TailCheck> {
    if !(m > n && n >= big_n) {
        return Err(SeriesError::InvalidArgument(format!(
            "tail check needs m > n >= N; got N = {big_n}, n = {n}, m = {m}"
        )));
    }
    let sum = p.plus_mass(n, m)?;
    Ok(if &sum <= p.eps() {
        TailCheck::Pass
    } else {
        TailCheck::Fail { sum }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{alt_harmonic_terms, geometric};
    use crate::exact_core::rat;

    fn alt(eps: Rational) -> PlusTailPredicate {
        PlusTailPredicate::new(&alt_harmonic_terms(), eps).unwrap()
    }

    fn geo() -> PlusTailPredicate {
        PlusTailPredicate::new(&geometric(&rat(-1, 2)).unwrap().terms, rat(1, 10)).unwrap()
    }

    #[test]
    fn phi_examples() {
        let p = alt(rat(1, 2));
        assert_eq!(p.phi(5, 2).unwrap(), 0);
        assert_eq!(p.plus_mass(2, 5).unwrap(), rat(8, 15));
        assert_eq!(p.phi(4, 2).unwrap(), 1);
        assert_eq!(p.phi(7, 7).unwrap(), 1);
        assert!(PlusTailPredicate::new(&alt_harmonic_terms(), rat(0, 1)).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(&alt(rat(1, 2)), 2, 100).unwrap(), SMembership::Member(5));
        assert_eq!(
            kappa(&geo(), 2, 10_000).unwrap(),
            SMembership::Unknown { searched_up_to: 10_002 }
        );
        assert_eq!(kappa(&geo(), 1, 10).unwrap(), SMembership::Member(2));
    }

    #[test]
    fn kappa_matches_linear_scan() {
        let p = alt(rat(1, 3));
        for n in 1..40 {
            let lin = (n + 1..=n + 200).find(|&m| p.phi(m, n).unwrap() == 0);
            let got = kappa(&p, n, 200).unwrap();
            assert_eq!(got, lin.map_or(SMembership::Unknown { searched_up_to: n + 200 }, SMembership::Member));
        }
    }

    fn certify(p: &PlusTailPredicate, value: u64) -> Certified {
        match kappa(p, value, 3 * value + 10).unwrap() {
            SMembership::Member(m) => Certified { value, witness: m },
            SMembership::Unknown { .. } => panic!("{value} not certified"),
        }
    }

    #[test]
    fn constant_sequence_stays_zero() {
        let p = alt(rat(1, 2));
        let c = certify(&p, 1);
        let lam = lambda_stream(&p, move |_| c).unwrap();
        assert!(lam.prefix(200).unwrap().iter().all(|b| !b));
    }

    #[test]
    fn squares_open_and_close_runs() {
        let p = alt(rat(1, 2));
        let q = p.clone();
        let lam = lambda_stream(&p, move |n| certify(&q, n * n)).unwrap();
        let bits = lam.prefix(300).unwrap();
        // s_2 = 4 > 2, so the first run opens at 2 and closes at kappa(2) = 5
        assert_eq!(&bits[..6], &[false, true, true, true, true, false]);
        let ivs = bad_intervals(&bits);
        assert_eq!(ivs[0], BadInterval { lo: 2, hi: 5 });
        for iv in &ivs {
            assert_eq!(kappa(&p, iv.lo, 10_000).unwrap(), SMembership::Member(iv.hi));
            assert!(p.plus_mass(iv.lo, iv.hi).unwrap() >= rat(1, 2));
        }
    }

    #[test]
    fn bad_witness_rejected() {
        let p = alt(rat(1, 2));
        let err = lambda_stream(&p, |_| Certified { value: 1, witness: 2 }).unwrap_err();
        assert!(matches!(err, SeriesError::Membership { value: 1, witness: 2, .. }));
    }

    #[test]
    fn interval_examples() {
        assert!(bad_intervals(&[false; 100]).is_empty());
        let bits = [false, true, true, false, false, false, false, false, false, false];
        assert_eq!(bad_intervals(&bits), vec![BadInterval { lo: 2, hi: 3 }]);
        assert!(bad_intervals(&[false, true, true]).is_empty());
        assert_eq!(BadInterval::new(3, 2), Err(SeriesError::InvalidInterval(3, 2)));
    }

    #[test]
    fn sigma_examples() {
        let a = alt_harmonic_terms();
        let id = sigma_from_lambda(&a, &[]).unwrap();
        assert_eq!(id.prefix(5).unwrap(), vec![1, 2, 3, 4, 5]);
        let s = sigma_from_lambda(&a, &[BadInterval { lo: 2, hi: 5 }]).unwrap();
        assert_eq!(s.prefix(6).unwrap(), vec![1, 3, 5, 2, 4, 6]);
        let err = sigma_from_lambda(&a, &[BadInterval { lo: 2, hi: 5 }, BadInterval { lo: 5, hi: 8 }]);
        assert_eq!(err.unwrap_err(), SeriesError::Overlap(2, 5, 5, 8));
    }

    #[test]
    fn sig1_examples() {
        let a = alt_harmonic_terms();
        let iv = BadInterval { lo: 2, hi: 5 };
        let s = sigma_from_lambda(&a, &[iv]).unwrap();
        let (j, k) = verify_sig1(&a, &s, &iv, &rat(1, 2)).unwrap();
        assert_eq!((j, k), (1, 3));
        assert_eq!(a.term(3).unwrap() + a.term(5).unwrap(), rat(8, 15));
        let zero = TermStream::zero();
        let z = sigma_from_lambda(&zero, &[iv]).unwrap();
        assert!(matches!(verify_sig1(&zero, &z, &iv, &rat(1, 2)), Err(SeriesError::Sig1NotFound { .. })));
        assert!(matches!(verify_sig1(&a, &s, &iv, &rat(0, 1)), Err(SeriesError::NonPositiveEpsilon(_))));
    }

    #[test]
    fn rationalize_rational_terms() {
        let r = rationalize(|i, _| Rational::new(1, i + 2));
        for i in 1..=30u64 {
            let out = r.terms.term(i).unwrap();
            let b = &out - &Rational::new(1, i + 2);
            assert!(b.is_positive() && b < Rational::pow2(-(i as i64)));
            let (lo, hi) = r.shift_bounds(i).unwrap();
            assert!(lo <= b && b <= hi);
        }
    }

    #[test]
    fn tail_examples() {
        assert_eq!(tail_bound_check(&geo(), 2, 2, 10_000).unwrap(), TailCheck::Pass);
        assert_eq!(
            tail_bound_check(&alt(rat(1, 2)), 2, 2, 5).unwrap(),
            TailCheck::Fail { sum: rat(8, 15) }
        );
        // a_6 is negative, so its positive part adds nothing
        assert_eq!(tail_bound_check(&alt(rat(1, 100)), 5, 5, 6).unwrap(), TailCheck::Pass);
        assert!(tail_bound_check(&geo(), 3, 2, 10).is_err());
        let minus = PlusTailPredicate::minus(&alt_harmonic_terms(), rat(1, 2)).unwrap();
        assert_eq!(minus.plus_mass(1, 4).unwrap(), rat(3, 4));
    }
}
