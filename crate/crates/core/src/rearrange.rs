//! Riemann rearrangements: a greedy schedule that steers a conditionally
//! convergent series to any rational target, or off to plus or minus
//! infinity.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use crate::error::{Result, SeriesError};
use crate::exact_core::{
    partial_sum, CauchyModulus, Permutation, PermutationSource, Rational, TermStream,
};

/// `a_n = plus_n - minus_n` with both parts nonnegative.
#[derive(Clone, Debug)]
pub struct SignSplit {
    pub plus: TermStream,
    pub minus: TermStream,
}

pub fn sign_split(s: &TermStream) -> SignSplit {
    SignSplit {
        plus: s.map(Rational::positive_part),
        minus: s.map(Rational::negative_part),
    }
}

/// `C -> M` with `a_1 + ... + a_M > C` for the certified stream.
#[derive(Clone)]
pub struct DivergenceCertificate {
    rule: Rc<dyn Fn(&Rational) -> Result<u64>>,
}

impl fmt::Debug for DivergenceCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DivergenceCertificate")
    }
}

impl DivergenceCertificate {
    pub fn new(rule: impl Fn(&Rational) -> u64 + 'static) -> Self {
        Self::try_new(move |c| Ok(rule(c)))
    }

    pub fn try_new(rule: impl Fn(&Rational) -> Result<u64> + 'static) -> Self {
        DivergenceCertificate { rule: Rc::new(rule) }
    }

    pub fn exceed(&self, c: &Rational) -> Result<u64> {
        (self.rule)(c)
    }

    /// `exceed(c)`, checked by summing `stream` exactly.
    pub fn verify(&self, stream: &TermStream, c: &Rational) -> Result<u64> {
        let m = self.exceed(c)?;
        let sum = partial_sum(stream, m)?;
        if &sum <= c {
            return Err(SeriesError::Certificate(format!(
                "divergence certificate claims sum at {m} exceeds {c}, but it is {sum}"
            )));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RearrangementTarget {
    Finite(Rational),
    PlusInfinity,
    MinusInfinity,
}

impl FromStr for RearrangementTarget {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+inf" | "inf" => Ok(Self::PlusInfinity),
            "-inf" => Ok(Self::MinusInfinity),
            other => other
                .parse()
                .map(Self::Finite)
                .map_err(|e| SeriesError::InvalidArgument(format!("target {other:?}: {e}"))),
        }
    }
}

impl fmt::Display for RearrangementTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(x) => write!(f, "{x}"),
            Self::PlusInfinity => f.write_str("+inf"),
            Self::MinusInfinity => f.write_str("-inf"),
        }
    }
}

/// What one call to [`RiemannSchedule::step`] emitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub position: u64,
    pub index: u64,
    pub term: Rational,
    /// For finite targets: the side of the target changed at this position.
    pub switch: bool,
    /// For infinite targets: the sum just passed this level.
    pub level: Option<u64>,
}

/// Scans longer than this inside one phase trigger a certificate lookup.
const LAZY_BOUND_AFTER: u64 = 1024;

/// Index class of the next term: nonnegative (zeros included) or negative.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Class {
    NonNeg,
    Neg,
}

/// The greedy schedule, one emitted index at a time.
///
/// Finite `x`: while the running sum is `<= x` take the lowest unused
/// nonnegative term, otherwise the lowest unused negative one. At every
/// switch `p` this gives `|S_p - x| <= |a_{sigma(p)}|`, which `step`
/// re-checks exactly.
///
/// `+inf`: take nonnegative terms until the sum exceeds the level `k`,
/// then one negative term, then `k + 1`. `-inf` mirrors this.
pub struct RiemannSchedule {
    terms: TermStream,
    split: SignSplit,
    target: RearrangementTarget,
    cert_plus: DivergenceCertificate,
    cert_minus: DivergenceCertificate,
    term_decay: CauchyModulus,
    next_nonneg: u64,
    next_neg: u64,
    sum: Rational,
    level: u64,
    emitted: Vec<u64>,
    switches: Vec<u64>,
    boundaries: Vec<u64>,
    phase: Option<Class>,
    phase_work: u64,
    phase_bound: Option<u64>,
}

impl fmt::Debug for RiemannSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RiemannSchedule")
            .field("target", &self.target)
            .field("emitted", &self.emitted.len())
            .finish()
    }
}

impl RiemannSchedule {
    pub fn new(
        s: &TermStream,
        target: RearrangementTarget,
        cert_plus: DivergenceCertificate,
        cert_minus: DivergenceCertificate,
        term_decay: CauchyModulus,
    ) -> Self {
        RiemannSchedule {
            terms: s.clone(),
            split: sign_split(s),
            target,
            cert_plus,
            cert_minus,
            term_decay,
            next_nonneg: 1,
            next_neg: 1,
            sum: Rational::zero(),
            level: 1,
            emitted: Vec::new(),
            switches: Vec::new(),
            boundaries: Vec::new(),
            phase: None,
            phase_work: 0,
            phase_bound: None,
        }
    }

    pub fn target(&self) -> &RearrangementTarget {
        &self.target
    }

    /// Sum of the emitted terms so far.
    pub fn partial_sum(&self) -> &Rational {
        &self.sum
    }

    pub fn emitted(&self) -> &[u64] {
        &self.emitted
    }

    /// Positions where a finite-target run changed side.
    pub fn switches(&self) -> &[u64] {
        &self.switches
    }

    /// Positions where an infinite-target run passed levels `1, 2, ...`.
    pub fn level_boundaries(&self) -> &[u64] {
        &self.boundaries
    }

    fn below(&self, x: &Rational) -> bool {
        &self.sum <= x
    }

    fn class_now(&self) -> Class {
        match &self.target {
            RearrangementTarget::Finite(x) => {
                if self.below(x) {
                    Class::NonNeg
                } else {
                    Class::Neg
                }
            }
            RearrangementTarget::PlusInfinity => {
                if self.sum <= Rational::from(self.level) {
                    Class::NonNeg
                } else {
                    Class::Neg
                }
            }
            RearrangementTarget::MinusInfinity => {
                if self.sum >= -Rational::from(self.level) {
                    Class::Neg
                } else {
                    Class::NonNeg
                }
            }
        }
    }

    /// Mass the certified part must exceed for the current phase to end:
    /// what is already consumed plus the remaining gap. It does not change
    /// while the phase runs, so it can be computed at any point in it.
    fn phase_requirement(&self, class: Class) -> Result<Rational> {
        let consumed = match class {
            Class::NonNeg => partial_sum(&self.split.plus, self.next_nonneg - 1)?,
            Class::Neg => partial_sum(&self.split.minus, self.next_neg - 1)?,
        };
        let gap = match (&self.target, class) {
            (RearrangementTarget::Finite(x), Class::NonNeg) => x - &self.sum,
            (RearrangementTarget::Finite(x), Class::Neg) => &self.sum - x,
            (RearrangementTarget::PlusInfinity, Class::NonNeg) => Rational::from(self.level) - &self.sum,
            (RearrangementTarget::MinusInfinity, Class::Neg) => &self.sum + Rational::from(self.level),
            // a single step of the other sign: any further mass will do
            _ => Rational::zero(),
        };
        Ok(consumed + gap)
    }

    fn bound_check(&mut self, class: Class, idx: u64) -> Result<()> {
        self.phase_work += 1;
        if self.phase_bound.is_none() && self.phase_work > LAZY_BOUND_AFTER {
            let need = self.phase_requirement(class)?;
            let cert = match class {
                Class::NonNeg => &self.cert_plus,
                Class::Neg => &self.cert_minus,
            };
            self.phase_bound = Some(cert.exceed(&need)?);
        }
        if let Some(bound) = self.phase_bound {
            if idx > bound {
                return Err(SeriesError::Certificate(format!(
                    "divergence certificate promised the phase would end by index {bound}, \
                     but index {idx} is still needed (running sum {})",
                    self.sum
                )));
            }
        }
        Ok(())
    }

    fn take(&mut self, class: Class) -> Result<(u64, Rational)> {
        loop {
            let idx = match class {
                Class::NonNeg => self.next_nonneg,
                Class::Neg => self.next_neg,
            };
            self.bound_check(class, idx)?;
            let t = self.terms.term(idx)?;
            let fits = match class {
                Class::NonNeg => !t.is_negative(),
                Class::Neg => t.is_negative(),
            };
            match class {
                Class::NonNeg => self.next_nonneg += 1,
                Class::Neg => self.next_neg += 1,
            }
            if fits {
                return Ok((idx, t));
            }
        }
    }

    pub fn step(&mut self) -> Result<Step> {
        let class = self.class_now();
        if self.phase != Some(class) {
            self.phase = Some(class);
            self.phase_work = 0;
            self.phase_bound = None;
        }
        let (index, term) = self.take(class)?;
        let before = self.sum.clone();
        self.sum += &term;
        self.emitted.push(index);
        let position = self.emitted.len() as u64;
        let mut step = Step {
            position,
            index,
            term,
            switch: false,
            level: None,
        };
        match &self.target {
            RearrangementTarget::Finite(x) => {
                if (&before <= x) != self.below(x) {
                    step.switch = true;
                    self.switches.push(position);
                    let dev = (&self.sum - x).abs();
                    if dev > step.term.abs() {
                        return Err(SeriesError::Certificate(format!(
                            "switch at position {position}: |S - x| = {dev} exceeds |a| = {}",
                            step.term.abs()
                        )));
                    }
                }
            }
            RearrangementTarget::PlusInfinity => {
                if class == Class::Neg {
                    self.level += 1;
                    self.phase = None;
                } else if self.sum > Rational::from(self.level) {
                    step.level = Some(self.level);
                    self.boundaries.push(position);
                }
            }
            RearrangementTarget::MinusInfinity => {
                if class == Class::NonNeg {
                    self.level += 1;
                    self.phase = None;
                } else if self.sum < -Rational::from(self.level) {
                    step.level = Some(self.level);
                    self.boundaries.push(position);
                }
            }
        }
        Ok(step)
    }

    /// Runs until `len` indices have been emitted.
    pub fn run_to(&mut self, len: u64) -> Result<()> {
        while (self.emitted.len() as u64) < len {
            self.step()?;
        }
        Ok(())
    }

    /// A position by which `1..=n` have all been emitted.
    pub fn coverage(&mut self, n: u64) -> Result<u64> {
        while self.next_nonneg <= n || self.next_neg <= n {
            self.step()?;
        }
        // every index below both pointers is emitted or belongs to the
        // other class, whose pointer is past it too
        Ok(self.emitted.len() as u64)
    }

    /// A position past which every emitted term has `|a| <= delta`, from
    /// the term decay bound. After the first switch beyond it, a finite
    /// run stays within `delta` of its target.
    pub fn settle_position(&mut self, delta: &Rational) -> Result<u64> {
        let n = self.term_decay.index(delta)?;
        if n <= 1 {
            return Ok(0);
        }
        self.coverage(n - 1)
    }
}

struct ScheduleSource(Rc<RefCell<RiemannSchedule>>);

impl PermutationSource for ScheduleSource {
    fn next_image(&mut self, n: u64) -> Result<u64> {
        let mut sched = self.0.borrow_mut();
        sched.run_to(n)?;
        Ok(sched.emitted[(n - 1) as usize])
    }

    fn coverage(&mut self, n: u64) -> Result<u64> {
        self.0.borrow_mut().coverage(n)
    }
}

/// The schedule as a permutation.
pub fn riemann_permutation(
    s: &TermStream,
    target: RearrangementTarget,
    cert_plus: DivergenceCertificate,
    cert_minus: DivergenceCertificate,
    term_decay: CauchyModulus,
) -> Permutation {
    let sched = RiemannSchedule::new(s, target, cert_plus, cert_minus, term_decay);
    Permutation::new(ScheduleSource(Rc::new(RefCell::new(sched))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{alt_harmonic_conditional, alt_log, ConditionalSeries};
    use crate::exact_core::{apply_permutation, coverage_index, rat};

    fn schedule(cond: &ConditionalSeries, target: RearrangementTarget) -> RiemannSchedule {
        RiemannSchedule::new(
            &cond.series.terms,
            target,
            cond.cert_plus.clone(),
            cond.cert_minus.clone(),
            cond.series.modulus.clone(),
        )
    }

    /// Replays the greedy rule on plain index lists.
    fn greedy_oracle(len: usize, x: Rational) -> Vec<u64> {
        let (mut odd, mut even) = (1u64, 2u64);
        let mut sum = Rational::zero();
        let mut out = Vec::new();
        while out.len() < len {
            let n = if sum <= x {
                odd += 2;
                odd - 2
            } else {
                even += 2;
                even - 2
            };
            sum += Rational::new(if n % 2 == 1 { 1 } else { -1 }, n);
            out.push(n);
        }
        out
    }

    #[test]
    fn sign_split_examples() {
        let a = crate::demo::alt_harmonic_terms();
        let sp = sign_split(&a);
        assert_eq!(sp.plus.prefix(4).unwrap(), vec![rat(1, 1), rat(0, 1), rat(1, 3), rat(0, 1)]);
        assert_eq!(sp.minus.prefix(4).unwrap(), vec![rat(0, 1), rat(1, 2), rat(0, 1), rat(1, 4)]);
        let neg = TermStream::new(|n| Rational::new(-1, n));
        let sp = sign_split(&neg);
        assert_eq!(sp.plus.prefix(3).unwrap(), vec![Rational::zero(); 3]);
        assert_eq!(sp.minus.term(3).unwrap(), rat(1, 3));
        let z = sign_split(&TermStream::zero());
        assert!(z.plus.term(5).unwrap().is_zero() && z.minus.term(5).unwrap().is_zero());
    }

    #[test]
    fn target_zero_prefix() {
        let cond = alt_harmonic_conditional();
        let mut sched = schedule(&cond, RearrangementTarget::Finite(rat(0, 1)));
        sched.run_to(6).unwrap();
        assert_eq!(sched.emitted(), &[1, 2, 4, 6, 8, 3]);
        assert_eq!(sched.emitted(), &greedy_oracle(6, rat(0, 1))[..]);
    }

    #[test]
    fn switch_at_position_five() {
        let cond = alt_harmonic_conditional();
        let mut sched = schedule(&cond, RearrangementTarget::Finite(rat(0, 1)));
        let steps: Vec<Step> = (0..5).map(|_| sched.step().unwrap()).collect();
        assert!(steps[4].switch);
        // 1 - 1/2 - 1/4 - 1/6 - 1/8 = -1/24
        assert_eq!(sched.partial_sum(), &rat(-1, 24));
        assert_eq!(steps[4].term, rat(-1, 8));
    }

    #[test]
    fn matches_oracle_for_other_targets() {
        let cond = alt_harmonic_conditional();
        for x in [rat(1, 2), rat(-2, 1), rat(3, 1)] {
            let mut sched = schedule(&cond, RearrangementTarget::Finite(x.clone()));
            sched.run_to(300).unwrap();
            assert_eq!(sched.emitted(), &greedy_oracle(300, x)[..]);
        }
    }

    #[test]
    fn permutation_coverage_verifies() {
        let cond = alt_harmonic_conditional();
        let sigma = riemann_permutation(
            &cond.series.terms,
            RearrangementTarget::Finite(rat(1, 2)),
            cond.cert_plus.clone(),
            cond.cert_minus.clone(),
            cond.series.modulus.clone(),
        );
        for n in [1, 2, 10, 100, 400] {
            coverage_index(&sigma, n).unwrap();
        }
        let re = apply_permutation(&cond.series.terms, &sigma);
        assert_eq!(re.term(1).unwrap(), rat(1, 1));
    }

    #[test]
    fn plus_infinity_levels() {
        let cond = alt_harmonic_conditional();
        let mut sched = schedule(&cond, RearrangementTarget::PlusInfinity);
        let mut passed = Vec::new();
        while passed.len() < 3 {
            let st = sched.step().unwrap();
            if let Some(k) = st.level {
                assert!(sched.partial_sum() > &Rational::from(k));
                passed.push(k);
            }
        }
        assert_eq!(passed, vec![1, 2, 3]);
    }

    #[test]
    fn alt_log_reaches_ten_both_ways() {
        for (target, sign) in [(RearrangementTarget::PlusInfinity, 1), (RearrangementTarget::MinusInfinity, -1)] {
            let mut sched = schedule(&alt_log(), target);
            let mut k = 1;
            while k <= 10 {
                let st = sched.step().unwrap();
                if let Some(level) = st.level {
                    assert_eq!(level, k);
                    let lv = Rational::from(k) * Rational::from(sign);
                    if sign > 0 {
                        assert!(sched.partial_sum() > &lv);
                    } else {
                        assert!(sched.partial_sum() < &lv);
                    }
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn broken_certificate_is_reported() {
        let cond = alt_harmonic_conditional();
        let mut sched = RiemannSchedule::new(
            &cond.series.terms,
            // the first phase runs past the lazy bound lookup
            RearrangementTarget::Finite(rat(5, 1)),
            DivergenceCertificate::new(|_| 5),
            cond.cert_minus.clone(),
            cond.series.modulus.clone(),
        );
        let err = sched.run_to(5000).unwrap_err();
        assert!(matches!(err, SeriesError::Certificate(_)), "{err}");
    }

    #[test]
    fn settles_within_delta() {
        let cond = alt_harmonic_conditional();
        let x = rat(1, 2);
        let mut sched = schedule(&cond, RearrangementTarget::Finite(x.clone()));
        let delta = rat(1, 50);
        let p0 = sched.settle_position(&delta).unwrap();
        sched.run_to(p0).unwrap();
        let mut seen_switch = false;
        for _ in 0..500 {
            let st = sched.step().unwrap();
            seen_switch |= st.switch;
            if seen_switch {
                assert!((sched.partial_sum() - &x).abs() <= delta);
            }
        }
        assert!(seen_switch);
    }

    #[test]
    fn target_parsing() {
        assert_eq!("+inf".parse::<RearrangementTarget>().unwrap(), RearrangementTarget::PlusInfinity);
        assert_eq!("-inf".parse::<RearrangementTarget>().unwrap(), RearrangementTarget::MinusInfinity);
        assert_eq!("-2".parse::<RearrangementTarget>().unwrap(), RearrangementTarget::Finite(rat(-2, 1)));
        assert!("abc".parse::<RearrangementTarget>().is_err());
    }
}
