//! The oscillating permutation `tau`: it alternates between following the
//! identity (partial sums near `s = sum a_n`) and following `sigma` through
//! a convergent bracketing (partial sums near `t`), so the blocks between
//! consecutive switch points stay larger than `delta/3`. Summing their
//! sizes gives a divergence witness for `sum |a_n|`.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use crate::error::{Result, SeriesError};
use crate::exact_core::{
    coverage_index, limit_approx, partial_sum, Bracketing, CauchyModulus, ConvergentSeries,
    IndexMap, Permutation, PermutationSource, Rational, TermStream,
};

/// Which limit is the smaller one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    SBelowT,
    TBelowS,
}

impl FromStr for Side {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s-below-t" | "s<t" => Ok(Side::SBelowT),
            "t-below-s" | "t<s" => Ok(Side::TBelowS),
            other => Err(SeriesError::InvalidArgument(format!(
                "side must be s-below-t or t-below-s; got {other:?}"
            ))),
        }
    }
}

struct OscState {
    terms: TermStream,
    sigma: Permutation,
    f: IndexMap,
    delta: Rational,
    s_hat: Rational,
    t_hat: Rational,
    /// `N_a(delta/12)`
    n_a: u64,
    /// `N_b(delta/12)`, on block indices
    n_b: u64,
    /// `coverage_sigma(n_a - 1)`: later sigma positions point at indices `>= n_a`
    cov_na: u64,
    ks: Vec<u64>,
    images: Vec<u64>,
    used: Vec<bool>,
    max_used: u64,
    /// partial sum of `a o tau` at `f(k_i)`
    sums: Vec<Rational>,
}

impl OscState {
    fn mark(&mut self, v: u64) {
        let i = v as usize;
        if self.used.len() <= i {
            self.used.resize(i + 1, false);
        }
        self.used[i] = true;
        self.max_used = self.max_used.max(v);
    }

    fn is_used(&self, v: u64) -> bool {
        self.used.get(v as usize).copied().unwrap_or(false)
    }

    fn near_bound(&self, stage_is_sigma: bool) -> Rational {
        // |S - s| <= 2 rho and |S - t| <= 2 rho, plus the error of the estimate
        if stage_is_sigma {
            &self.delta / &Rational::from(4)
        } else {
            &self.delta / &Rational::from(6)
        }
    }

    /// Appends stage `i = ks.len() + 1`. Odd stages follow the identity,
    /// even ones follow `sigma`.
    fn grow(&mut self) -> Result<()> {
        let stage = self.ks.len() as u64 + 1;
        let k_prev = self.ks.last().copied().unwrap_or(0);
        let sigma_stage = stage.is_multiple_of(2);
        let mut k = k_prev + 1;
        let end = if sigma_stage {
            let need = coverage_index(&self.sigma, self.max_used)?;
            loop {
                let fk = self.f.checked_at(k)?;
                if fk >= need && k >= self.n_b && fk > self.cov_na {
                    break fk;
                }
                k += 1;
            }
        } else {
            loop {
                let fk = self.f.checked_at(k)?;
                if fk >= self.max_used && fk >= self.n_a {
                    break fk;
                }
                k += 1;
            }
        };
        let start = self.images.len() as u64;
        let mut sum = self.sums.last().cloned().unwrap_or_else(Rational::zero);
        let mut fresh = Vec::new();
        if sigma_stage {
            for v in self.sigma.prefix(end)? {
                if !self.is_used(v) {
                    fresh.push(v);
                }
            }
        } else {
            fresh.extend((1..=end).filter(|&v| !self.is_used(v)));
        }
        if start + fresh.len() as u64 != end {
            return Err(SeriesError::Certificate(format!(
                "stage {stage}: completion to f({k}) = {end} produced {} new images for {} slots",
                fresh.len(),
                end - start
            )));
        }
        for v in fresh {
            sum += self.terms.term(v)?;
            self.mark(v);
            self.images.push(v);
        }
        let target = if sigma_stage { &self.t_hat } else { &self.s_hat };
        let dev = (&sum - target).abs();
        let allowed = self.near_bound(sigma_stage);
        if dev > allowed {
            return Err(SeriesError::Modulus(format!(
                "partial sum at f({k}) = {end} is {dev} away from its estimate; the moduli allow {allowed}"
            )));
        }
        if let Some(prev) = self.sums.last() {
            let block = &sum - prev;
            let third = &self.delta / &Rational::from(3);
            if block.abs() <= third {
                return Err(SeriesError::Modulus(format!(
                    "block {} between positions {} and {end} sums to {block}, not beyond {third}",
                    self.ks.len(),
                    start
                )));
            }
        }
        self.ks.push(k);
        self.sums.push(sum);
        Ok(())
    }

    fn realize(&mut self, stages: usize) -> Result<()> {
        while self.ks.len() < stages {
            self.grow()?;
        }
        Ok(())
    }
}

struct TauSource(Rc<RefCell<OscState>>);

impl PermutationSource for TauSource {
    fn next_image(&mut self, n: u64) -> Result<u64> {
        let mut st = self.0.borrow_mut();
        while (st.images.len() as u64) < n {
            st.grow()?;
        }
        Ok(st.images[(n - 1) as usize])
    }

    /// Odd stages end on a full initial segment `{1..f(k_i)}`.
    fn coverage(&mut self, n: u64) -> Result<u64> {
        let mut st = self.0.borrow_mut();
        let mut i = 0;
        loop {
            st.realize(i + 1)?;
            let end = st.f.at(st.ks[i])?;
            if end >= n {
                return Ok(end);
            }
            i += 2;
        }
    }
}

/// `tau` together with its switch indices `k_1 < k_2 < ...` (built on
/// demand) and the separation `delta` it was certified against.
#[derive(Clone)]
pub struct OscillationWitness {
    pub tau: Permutation,
    pub delta: Rational,
    pub f: IndexMap,
    state: Rc<RefCell<OscState>>,
}

impl fmt::Debug for OscillationWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OscillationWitness")
            .field("delta", &self.delta)
            .field("k", &self.state.borrow().ks)
            .finish()
    }
}

impl OscillationWitness {
    /// `k_i`, 1-based.
    pub fn k(&self, i: usize) -> Result<u64> {
        let mut st = self.state.borrow_mut();
        st.realize(i)?;
        Ok(st.ks[i - 1])
    }

    /// `f(k_i)`.
    pub fn boundary(&self, i: usize) -> Result<u64> {
        self.f.at(self.k(i)?)
    }

    /// Partial sum of the `tau`-rearranged series at `f(k_i)`.
    pub fn boundary_sum(&self, i: usize) -> Result<Rational> {
        let mut st = self.state.borrow_mut();
        st.realize(i)?;
        Ok(st.sums[i - 1].clone())
    }

    /// Sum of `a_{tau(n)}` over `f(k_i) < n <= f(k_{i+1})`.
    pub fn block_sum(&self, i: usize) -> Result<Rational> {
        Ok(self.boundary_sum(i + 1)? - self.boundary_sum(i)?)
    }

    /// The estimates `(s~, t~)` the construction steers by.
    pub fn estimates(&self) -> (Rational, Rational) {
        let st = self.state.borrow();
        (st.s_hat.clone(), st.t_hat.clone())
    }
}

/// Builds `tau` for a series `a` with sum `s`, a permutation `sigma` and a
/// convergent bracketing `br` of `a o sigma` with sum `t`. `delta` must be a
/// lower bound for `|s - t|` and `side` must say which is smaller; both are
/// checked against the moduli with budget `delta/12`, and a mismatch beyond
/// that budget is reported as a separation violation.
pub fn build_oscillation(
    a: &ConvergentSeries,
    sigma: &Permutation,
    br: &Bracketing,
    br_modulus: &CauchyModulus,
    delta: &Rational,
    side: Side,
) -> Result<OscillationWitness> {
    if !delta.is_positive() {
        return Err(SeriesError::NonPositiveEpsilon(delta.clone()));
    }
    for n in 1..=16 {
        if br.series().term(n)? != a.terms.term(sigma.image(n)?)? {
            return Err(SeriesError::InvalidArgument(format!(
                "the bracketed series differs from the rearrangement at position {n}"
            )));
        }
    }
    let rho = delta / &Rational::from(12);
    let n_a = a.modulus.index(&rho)?;
    let s_hat = limit_approx(a, &rho)?;
    let n_b = br_modulus.index(&rho)?;
    let t_hat = partial_sum(br.blocks(), n_b)?;
    let gap = match side {
        Side::SBelowT => &t_hat - &s_hat,
        Side::TBelowS => &s_hat - &t_hat,
    };
    // |s~ - s| <= rho and |t~ - t| <= rho leave 5 delta / 6 of the gap
    let required = delta * &Rational::new(5, 6);
    if gap < required {
        return Err(SeriesError::Separation {
            s_approx: s_hat,
            t_approx: t_hat,
            required,
        });
    }
    let cov_na = if n_a > 1 { coverage_index(sigma, n_a - 1)? } else { 0 };
    let f = br.index_map().clone();
    let mut state = OscState {
        terms: a.terms.clone(),
        sigma: sigma.clone(),
        f: f.clone(),
        delta: delta.clone(),
        s_hat,
        t_hat,
        n_a,
        n_b,
        cov_na,
        ks: Vec::new(),
        images: Vec::new(),
        used: Vec::new(),
        max_used: 0,
        sums: Vec::new(),
    };
    state.realize(1)?;
    let state = Rc::new(RefCell::new(state));
    Ok(OscillationWitness {
        tau: Permutation::new(TauSource(state.clone())),
        delta: delta.clone(),
        f,
        state,
    })
}

/// An `M` with `|a_1| + ... + |a_M| > c`.
///
/// Each block moves the `tau`-partial sums by more than `delta/3`, so once
/// the first `j - 1` blocks have total size above `c`, every index in
/// `tau(1..f(k_j))` is at most `M = max tau(1..f(k_j))` and the triangle
/// inequality gives the bound. `j` is the first index where the realized
/// block sizes pass `c`; that is never later than the `j` with
/// `(j - 1) delta / 3 > c`.
pub fn divergence_witness(w: &OscillationWitness, a: &TermStream, c: &Rational) -> Result<u64> {
    let mut j = 1;
    let mut mass = Rational::zero();
    while &mass <= c {
        mass += w.block_sum(j)?.abs();
        j += 1;
    }
    let end = w.boundary(j)?;
    let m = w.tau.prefix(end)?.into_iter().max().unwrap_or(1);
    let total = partial_sum(&a.abs(), m)?;
    if &total <= c {
        return Err(SeriesError::Certificate(format!(
            "sum of |a_n| up to {m} is {total}, not above {c}"
        )));
    }
    Ok(m)
}
