//! The alternating series attached to a countable set of positive
//! integers: it converges, every rearrangement has a convergent
//! bracketing as long as the set is pseudobounded, and if the series of
//! magnitudes converges the set is bounded.
//!
//! Index convention: with `lambda_k = [s_(2^(k+1)) > s_(2^k)]` on the
//! monotone closure, `a_n = lambda_k / n` for `2^k < n <= 2^(k+1)` and
//! `a_n = 0` for `n <= 2`. The signed series is `sum (-1)^n a_n`.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use crate::error::{Result, SeriesError};
use crate::exact_core::{
    apply_permutation, coverage_index, max_image, partial_sum, Bracketing, CauchyModulus,
    IndexMap, Permutation, Rational, TermStream,
};

/// A sequence in the set, as handed to the modulus oracle.
pub type Sequence<'a> = &'a dyn Fn(u64) -> Result<u64>;
type ModulusOracle = dyn Fn(Sequence<'_>) -> Result<u64>;

/// What is known about the enumeration's shape, so the running maximum
/// need not be materialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    General,
    /// Already nondecreasing.
    Monotone,
    /// Takes no new values after this index.
    SettledAfter(u64),
}

/// An enumerated set `{s_1, s_2, ...}` of positive integers with an oracle
/// that, given any sequence `u` in the set, answers `N` with `u(n) < n` for
/// all `n >= N`.
#[derive(Clone)]
pub struct PseudoboundedSet {
    enumerate: Rc<dyn Fn(u64) -> u64>,
    pb_modulus: Rc<ModulusOracle>,
    shape: Shape,
    closed: bool,
    memo: Rc<RefCell<Vec<u64>>>,
}

impl fmt::Debug for PseudoboundedSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PseudoboundedSet")
            .field("shape", &self.shape)
            .field("closed", &self.closed)
            .finish()
    }
}

fn sup_modulus(values: &[u64]) -> impl Fn(Sequence<'_>) -> Result<u64> {
    let bound = values.iter().copied().max().unwrap_or(0);
    move |_| Ok(bound + 1)
}

fn check_values(values: &[u64]) -> Result<()> {
    if values.is_empty() {
        return Err(SeriesError::InvalidArgument("a set needs at least one element".into()));
    }
    if values.contains(&0) {
        return Err(SeriesError::InvalidArgument("set elements must be positive".into()));
    }
    Ok(())
}

impl PseudoboundedSet {
    pub fn new(
        enumerate: impl Fn(u64) -> u64 + 'static,
        pb_modulus: impl Fn(Sequence<'_>) -> Result<u64> + 'static,
        shape: Shape,
    ) -> Self {
        PseudoboundedSet {
            enumerate: Rc::new(enumerate),
            pb_modulus: Rc::new(pb_modulus),
            shape,
            closed: false,
            memo: Rc::new(RefCell::new(Vec::new())),
        }
    }

    /// The listed values, repeated cyclically. Bounded, with the honest
    /// modulus `max + 1`.
    pub fn finite_sup(values: Vec<u64>) -> Result<Self> {
        check_values(&values)?;
        let len = values.len() as u64;
        let modulus = sup_modulus(&values);
        Ok(Self::new(
            move |n| values[((n - 1) % len) as usize],
            modulus,
            Shape::SettledAfter(len),
        ))
    }

    /// The listed values, then the last one forever.
    pub fn custom(prefix: Vec<u64>) -> Result<Self> {
        check_values(&prefix)?;
        let len = prefix.len() as u64;
        let modulus = sup_modulus(&prefix);
        Ok(Self::new(
            move |n| prefix[(n.min(len) - 1) as usize],
            modulus,
            Shape::SettledAfter(len),
        ))
    }

    /// `s_n = n`. Unbounded, so no honest modulus exists; this one always
    /// answers 2.
    pub fn identity() -> Self {
        Self::new(|n| n, |_| Ok(2), Shape::Monotone)
    }

    /// Same enumeration, different oracle.
    pub fn with_modulus(mut self, pb_modulus: impl Fn(Sequence<'_>) -> Result<u64> + 'static) -> Self {
        self.pb_modulus = Rc::new(pb_modulus);
        self
    }

    pub fn is_monotone_closed(&self) -> bool {
        self.closed
    }

    /// `s_n`; on a closed set, `max{s_k : k <= n}`.
    pub fn enumerate(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(SeriesError::ZeroIndex(0));
        }
        if !self.closed {
            return Ok((self.enumerate)(n));
        }
        let n = match self.shape {
            Shape::Monotone => return Ok((self.enumerate)(n)),
            Shape::SettledAfter(len) => n.min(len),
            Shape::General => n,
        };
        let mut memo = self.memo.borrow_mut();
        while (memo.len() as u64) < n {
            let k = memo.len() as u64 + 1;
            let v = (self.enumerate)(k).max(memo.last().copied().unwrap_or(0));
            memo.push(v);
        }
        Ok(memo[(n - 1) as usize])
    }

    pub fn pb_modulus(&self, seq: Sequence<'_>) -> Result<u64> {
        (self.pb_modulus)(seq)
    }

    /// Checks an oracle answer `N` on `N <= n <= upto`.
    pub fn verify_pb_answer(seq: Sequence<'_>, answer: u64, upto: u64) -> Result<()> {
        for n in answer.max(1)..=upto {
            let v = seq(n)?;
            if v >= n {
                return Err(SeriesError::Pseudoboundedness { claimed: answer, value: v });
            }
        }
        Ok(())
    }
}

/// Replaces each `s_n` by the running maximum.
pub fn monotone_closure(set: &PseudoboundedSet) -> PseudoboundedSet {
    let mut out = set.clone();
    out.closed = true;
    out.memo = Rc::new(RefCell::new(Vec::new()));
    out
}

fn pow2(k: u64) -> Result<u64> {
    if k >= 63 {
        return Err(SeriesError::Overflow("dyadic index"));
    }
    Ok(1 << k)
}

fn require_closed(set: &PseudoboundedSet) -> Result<()> {
    if !set.closed {
        return Err(SeriesError::InvalidArgument("set must be monotone-closed first".into()));
    }
    Ok(())
}

/// `[s_(2^(k+1)) > s_(2^k)]` on a monotone-closed set.
pub fn lambda_bit(set: &PseudoboundedSet, k: u64) -> Result<bool> {
    require_closed(set)?;
    if k == 0 {
        return Err(SeriesError::ZeroIndex(0));
    }
    if let Shape::SettledAfter(len) = set.shape {
        if pow2(k.min(62))? >= len {
            return Ok(false);
        }
    }
    Ok(set.enumerate(pow2(k + 1)?)? > set.enumerate(pow2(k)?)?)
}

/// The dyadic range holding `n`: `2^k < n <= 2^(k+1)`.
fn dyadic_block(n: u64) -> u64 {
    63 - u64::from((n - 1).leading_zeros())
}

/// Signed term `(-1)^n lambda_k / n`, zero for `n <= 2`.
pub fn bdn_term(set: &PseudoboundedSet, n: u64) -> Result<Rational> {
    require_closed(set)?;
    if n == 0 {
        return Err(SeriesError::ZeroIndex(0));
    }
    if n <= 2 {
        return Ok(Rational::zero());
    }
    if !lambda_bit(set, dyadic_block(n))? {
        return Ok(Rational::zero());
    }
    Ok(Rational::new(if n.is_multiple_of(2) { 1 } else { -1 }, n))
}

/// `2^-(k-1)`: any window of the signed series starting past `2^k` is at
/// most this large. A partial dyadic range contributes under `2^-k` (the
/// alternating bound), each later full range `nu` under `2^-nu`.
pub fn bdn_cauchy_bound(k: u64) -> Rational {
    Rational::pow2(1 - k as i64)
}

/// Largest `|window|` inside the dyadic range `(2^k, 2^(k+1)]`: every window
/// is a difference of two prefix sums taken at `2^k <= p < q <= 2^(k+1)`,
/// so it is the spread of those prefix sums.
pub fn max_block_window(series: &BdnSeries, k: u64) -> Result<Rational> {
    let lo = pow2(k)?;
    let hi = pow2(k + 1)?;
    let mut p = Rational::zero();
    let (mut min, mut max) = (Rational::zero(), Rational::zero());
    series.signed.for_each_in(lo + 1, hi, |_, t| {
        p += t;
        if p < min {
            min = p.clone();
        }
        if p > max {
            max = p.clone();
        }
    })?;
    Ok(max - min)
}

/// The series of a monotone-closed set.
#[derive(Clone, Debug)]
pub struct BdnSeries {
    pub set: PseudoboundedSet,
    pub magnitudes: TermStream,
    pub signed: TermStream,
    pub modulus: CauchyModulus,
}

pub fn bdn_series(set: &PseudoboundedSet) -> Result<BdnSeries> {
    require_closed(set)?;
    let s = set.clone();
    let signed = TermStream::try_new(move |n| bdn_term(&s, n));
    let magnitudes = signed.abs();
    let modulus = CauchyModulus::try_new(|eps| {
        // least k >= 1 with 2^-(k-1) <= eps, then start past 2^k
        let mut k = 1u64;
        while &bdn_cauchy_bound(k) > eps {
            k += 1;
        }
        Ok(pow2(k)? + 1)
    });
    Ok(BdnSeries {
        set: set.clone(),
        magnitudes,
        signed,
        modulus,
    })
}

/// The `j_k`, `n_k` sequences for one permutation:
/// `{1..2^(j_k)} ⊆ sigma(1..n_k) ⊆ {1..2^(j_(k+1))}` and
/// `2^(j_k) < n_k < 2^(j_(k+1))`.
struct Ladder {
    sigma: Permutation,
    js: Vec<u64>,
    ns: Vec<u64>,
}

impl Ladder {
    /// Makes `j_1..=j_count` available.
    fn ensure(&mut self, count: usize) -> Result<()> {
        if self.js.is_empty() {
            self.js.push(2);
        }
        while self.js.len() < count {
            let j = *self.js.last().unwrap();
            let top = pow2(j)?;
            let n = coverage_index(&self.sigma, top)?.max(top + 1);
            let reach = max_image(&self.sigma, n)?;
            let mut next = j + 1;
            while pow2(next)? <= n || pow2(next)? < reach {
                next += 1;
            }
            self.ns.push(n);
            self.js.push(next);
        }
        Ok(())
    }

    fn j(&mut self, k: u64) -> Result<u64> {
        self.ensure(k as usize)?;
        Ok(self.js[(k - 1) as usize])
    }

    fn n(&mut self, k: u64) -> Result<u64> {
        self.ensure(k as usize + 1)?;
        Ok(self.ns[(k - 1) as usize])
    }
}

struct WbState {
    set: PseudoboundedSet,
    ladder: RefCell<Ladder>,
    selected: RefCell<Vec<u64>>,
}

impl WbState {
    fn j(&self, k: u64) -> Result<u64> {
        self.ladder.borrow_mut().j(k)
    }

    fn n(&self, k: u64) -> Result<u64> {
        self.ladder.borrow_mut().n(k)
    }

    /// `lambda_i = 0` for `j_k <= i < j_(k+1)`: the signed terms vanish on
    /// `(2^(j_k), 2^(j_(k+1))]`.
    fn quiet(&self, k: u64) -> Result<bool> {
        let (lo, hi) = (self.j(k)?, self.j(k + 1)?);
        for i in lo..hi {
            if lambda_bit(&self.set, i)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn select_next(&self) -> Result<()> {
        let prev = self.selected.borrow().last().copied().unwrap_or(0);
        let u = |kappa: u64| -> Result<u64> {
            if kappa == 0 {
                return Err(SeriesError::ZeroIndex(0));
            }
            self.set.enumerate(pow2(self.j(prev + kappa + 1)?)?)
        };
        let bound = self.set.pb_modulus(&u)?;
        for kappa in 1..=bound {
            if self.quiet(prev + kappa)? {
                self.selected.borrow_mut().push(prev + kappa);
                return Ok(());
            }
        }
        // every window up to the bound has a jump, so the sequence has
        // climbed to at least the bound there
        let at = bound.max(1);
        Err(SeriesError::Pseudoboundedness {
            claimed: at,
            value: u(at)?,
        })
    }

    fn selected(&self, i: usize) -> Result<u64> {
        while self.selected.borrow().len() < i {
            self.select_next()?;
        }
        Ok(self.selected.borrow()[i - 1])
    }
}

/// A convergent bracketing of one rearrangement of the signed series.
///
/// Indices `k_1 < k_2 < ...` pick rungs of the ladder where the signed
/// terms vanish on `(2^(j_k), 2^(j_(k+1))]`. Between positions `n_(k_i)`
/// and `n_(k_(i+1))` the rearrangement then sums exactly the original terms
/// in `(2^(j_(k_i)), 2^(j_(k_(i+1)))]`, which stay below `2^-(k_i)`.
#[derive(Clone)]
pub struct WeakBracketing {
    state: Rc<WbState>,
    rearranged: TermStream,
}

impl fmt::Debug for WeakBracketing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeakBracketing")
            .field("selected", &self.state.selected.borrow())
            .finish()
    }
}

pub fn weak_bracketing(set: &PseudoboundedSet, sigma: &Permutation) -> Result<WeakBracketing> {
    let series = bdn_series(set)?;
    let state = Rc::new(WbState {
        set: set.clone(),
        ladder: RefCell::new(Ladder {
            sigma: sigma.clone(),
            js: Vec::new(),
            ns: Vec::new(),
        }),
        selected: RefCell::new(Vec::new()),
    });
    state.selected(1)?;
    Ok(WeakBracketing {
        state,
        rearranged: apply_permutation(&series.signed, sigma),
    })
}

impl WeakBracketing {
    pub fn j(&self, k: u64) -> Result<u64> {
        self.state.j(k)
    }

    pub fn n(&self, k: u64) -> Result<u64> {
        self.state.n(k)
    }

    /// `k_i`, 1-based.
    pub fn selected(&self, i: usize) -> Result<u64> {
        self.state.selected(i)
    }

    /// Sum of the rearranged terms at positions `n_(k_i) < p <= n_(k_(i+1))`,
    /// checked against `2^-(k_i)`.
    pub fn block_sum(&self, i: usize) -> Result<Rational> {
        let k = self.selected(i)?;
        let lo = self.n(k)?;
        let hi = self.n(self.selected(i + 1)?)?;
        let sum = crate::exact_core::window_sum(&self.rearranged, lo + 1, hi)?;
        let bound = Rational::pow2(-(k as i64));
        if sum.abs() >= bound {
            return Err(SeriesError::Certificate(format!(
                "block {i} (positions {}..={hi}) sums to {sum}, not below {bound}",
                lo + 1
            )));
        }
        Ok(sum)
    }

    /// The bracketing `f(1) = 1`, `f(i+1) = n_(k_i) + 1`.
    pub fn bracketing(&self) -> Result<Bracketing> {
        let state = self.state.clone();
        let f = IndexMap::try_new(move |i| {
            if i == 1 {
                return Ok(1);
            }
            Ok(state.n(state.selected((i - 1) as usize)?)? + 1)
        });
        crate::exact_core::bracket_series(&self.rearranged, f)
    }

    /// Modulus of the bracketed series: from bracket block `b >= 2` on, the
    /// blocks are bounded by `2^-(k_i)` with `k_i >= i`, so windows stay
    /// under `2^(2-b)`.
    pub fn modulus(&self) -> CauchyModulus {
        CauchyModulus::new(|eps| {
            let mut b = 2u64;
            while &Rational::pow2(2 - b as i64) > eps {
                b += 1;
            }
            b
        })
    }

    /// Checks (a), both inclusions of (b) and the window bound (c) at
    /// rung `k`, the last on windows ending up to `horizon`.
    pub fn check_rung(&self, k: u64, horizon: u64) -> Result<()> {
        let (j, j_next, n) = (self.j(k)?, self.j(k + 1)?, self.n(k)?);
        let (lo, hi) = (pow2(j)?, pow2(j_next)?);
        if !(lo < n && n < hi) {
            return Err(SeriesError::Certificate(format!(
                "rung {k}: need 2^{j} < n_k = {n} < 2^{j_next}"
            )));
        }
        let ladder = self.state.ladder.borrow();
        let images = ladder.sigma.prefix(n)?;
        let mut hit = vec![false; lo as usize];
        for &v in &images {
            if v > hi {
                return Err(SeriesError::Certificate(format!(
                    "rung {k}: sigma takes value {v} above 2^{j_next} before position {n}"
                )));
            }
            if v <= lo {
                hit[(v - 1) as usize] = true;
            }
        }
        if let Some(missing) = hit.iter().position(|h| !h) {
            return Err(SeriesError::CoverageViolation {
                n: lo,
                claimed: n,
                missing: missing as u64 + 1,
            });
        }
        drop(ladder);
        let series = bdn_series(&self.state.set)?;
        let bound = Rational::pow2(1 - k as i64);
        let mut sum = Rational::zero();
        let mut bad = None;
        series.signed.for_each_in(lo, horizon.max(lo), |i, t| {
            sum += t;
            if bad.is_none() && sum.abs() >= bound {
                bad = Some((i, sum.clone()));
            }
        })?;
        if let Some((i, s)) = bad {
            return Err(SeriesError::Certificate(format!(
                "rung {k}: window from 2^{j} to {i} sums to {s}, not below {bound}"
            )));
        }
        Ok(())
    }
}

/// If `a_n` over `n > 2^N` has tail below 1/2, no `lambda_k` with `k >= N`
/// can be 1, and `s_(2^N)` bounds the set. The tail hypothesis is checked
/// as `lambda_k = 0` for `N <= k <= range`; then the raw enumeration is
/// compared against the bound up to `2^(range+1)` (capped at `2^20`).
pub fn bounded_from_convergence(set: &PseudoboundedSet, n: u64, range: u64) -> Result<u64> {
    require_closed(set)?;
    if n == 0 {
        return Err(SeriesError::ZeroIndex(0));
    }
    for k in n..=range {
        if lambda_bit(set, k)? {
            return Err(SeriesError::TailViolation { n, k });
        }
    }
    let bound = set.enumerate(pow2(n)?)?;
    let raw = PseudoboundedSet { closed: false, ..set.clone() };
    let upto = pow2(range.max(n).saturating_add(1).min(20))?;
    for i in 1..=upto {
        let v = raw.enumerate(i)?;
        if v > bound {
            return Err(SeriesError::Certificate(format!(
                "s_{i} = {v} exceeds the bound s_(2^{n}) = {bound}"
            )));
        }
    }
    Ok(bound)
}

/// Partial sum of the magnitudes over the dyadic range of `k`.
pub fn block_mass(series: &BdnSeries, k: u64) -> Result<Rational> {
    let lo = pow2(k)?;
    let hi = pow2(k + 1)?;
    Ok(partial_sum(&series.magnitudes, hi)? - partial_sum(&series.magnitudes, lo)?)
}
