use std::fmt;
use std::rc::Rc;

use super::{window_sum, CauchyModulus, Rational, TermStream};
use crate::error::{Result, SeriesError};

/// A strictly increasing index map `f` with `f(1) = 1`.
#[derive(Clone)]
pub struct IndexMap {
    rule: Rc<dyn Fn(u64) -> Result<u64>>,
}

impl fmt::Debug for IndexMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IndexMap")
    }
}

impl IndexMap {
    pub fn new(rule: impl Fn(u64) -> u64 + 'static) -> Self {
        Self::try_new(move |k| Ok(rule(k)))
    }

    /// For maps that are themselves computed lazily and may fail.
    pub fn try_new(rule: impl Fn(u64) -> Result<u64> + 'static) -> Self {
        IndexMap { rule: Rc::new(rule) }
    }

    pub fn identity() -> Self {
        Self::new(|k| k)
    }

    /// `f(k) = 2k - 1`: pairs of consecutive terms.
    pub fn odd() -> Self {
        Self::new(|k| 2 * k - 1)
    }

    /// `f(k) = 2^(k-1)`: dyadic groups.
    pub fn dyadic() -> Self {
        Self::new(|k| 1u64.checked_shl((k - 1) as u32).unwrap_or(u64::MAX))
    }

    /// From an explicit increasing list of boundaries; past the list, unit steps.
    pub fn from_boundaries(bounds: Vec<u64>) -> Self {
        Self::new(move |k| match bounds.get((k - 1) as usize) {
            Some(&b) => b,
            None => bounds.last().copied().unwrap_or(0) + (k - bounds.len() as u64),
        })
    }

    /// `f(k)`, unchecked.
    pub fn at(&self, k: u64) -> Result<u64> {
        (self.rule)(k)
    }

    /// `f(k)`, checking `f(k) > f(k-1)` along the way.
    pub fn checked_at(&self, k: u64) -> Result<u64> {
        if k == 0 {
            return Err(SeriesError::ZeroIndex(0));
        }
        let v = self.at(k)?;
        if k == 1 {
            if v != 1 {
                return Err(SeriesError::BracketStart(v));
            }
        } else {
            let prev = self.at(k - 1)?;
            if v <= prev {
                return Err(SeriesError::NotIncreasing {
                    k: k - 1,
                    at: prev,
                    next: v,
                });
            }
        }
        Ok(v)
    }

    /// Least `k` with `f(k) >= target`.
    pub fn first_reaching(&self, target: u64) -> Result<u64> {
        let mut k = 1;
        while self.checked_at(k)? < target {
            k += 1;
        }
        Ok(k)
    }
}

/// A bracketing `(f, b)` of a series: `b_k = a_{f(k)} + ... + a_{f(k+1)-1}`.
#[derive(Clone, Debug)]
pub struct Bracketing {
    series: TermStream,
    f: IndexMap,
    blocks: TermStream,
}

impl Bracketing {
    pub fn series(&self) -> &TermStream {
        &self.series
    }

    pub fn index_map(&self) -> &IndexMap {
        &self.f
    }

    pub fn blocks(&self) -> &TermStream {
        &self.blocks
    }

    pub fn boundary(&self, k: u64) -> Result<u64> {
        self.f.checked_at(k)
    }

    pub fn block(&self, k: u64) -> Result<Rational> {
        self.blocks.term(k)
    }

    /// Telescoping check for one `K`: returns both sides of
    /// `b_1 + ... + b_K = a_1 + ... + a_{f(K+1)-1}`.
    pub fn telescoping_sides(&self, k: u64) -> Result<(Rational, Rational)> {
        let blocks = super::partial_sum(&self.blocks, k)?;
        let end = self.f.checked_at(k + 1)? - 1;
        Ok((blocks, super::partial_sum(&self.series, end)?))
    }

    /// Modulus of the bracketed series derived from a modulus of the
    /// underlying one: block windows are term windows.
    pub fn modulus_from_series(&self, series_modulus: &CauchyModulus) -> CauchyModulus {
        let f = self.f.clone();
        let m = series_modulus.clone();
        CauchyModulus::try_new(move |eps| f.first_reaching(m.index(eps)?))
    }
}

/// Groups `s` by `f`. `f(1) = 1` is checked now; strict increase is checked
/// lazily as blocks are evaluated.
pub fn bracket_series(s: &TermStream, f: IndexMap) -> Result<Bracketing> {
    f.checked_at(1)?;
    let series = s.clone();
    let map = f.clone();
    let blocks = TermStream::try_new(move |k| {
        let lo = map.checked_at(k)?;
        let hi = map.checked_at(k + 1)?;
        window_sum(&series, lo, hi - 1)
    });
    Ok(Bracketing {
        series: s.clone(),
        f,
        blocks,
    })
}
