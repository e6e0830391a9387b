use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TermStream;
use crate::error::{Result, SeriesError};

/// Where a permutation's values come from.
///
/// `next_image` is called with `n = 1, 2, 3, ...` in order, exactly once
/// each, so generator-style sources may ignore `n`. `coverage(n)` is the
/// bijectivity certificate: a count `M` such that `{1..n}` is contained in
/// the first `M` images. Sources may run ahead internally to answer it.
pub trait PermutationSource {
    fn next_image(&mut self, n: u64) -> Result<u64>;
    fn coverage(&mut self, n: u64) -> Result<u64>;
}

struct PermState {
    source: Box<dyn PermutationSource>,
    images: Vec<u64>,
    seen: HashSet<u64>,
}

/// A permutation of the positive integers, evaluated lazily.
///
/// Injectivity is checked on every materialized image. Surjectivity rests
/// on the coverage certificate that every source must provide;
/// [`coverage_index`] verifies it against the prefix.
#[derive(Clone)]
pub struct Permutation {
    state: Rc<RefCell<PermState>>,
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Permutation")
            .field("materialized", &self.state.borrow().images.len())
            .finish()
    }
}

impl Permutation {
    pub fn new(source: impl PermutationSource + 'static) -> Self {
        Permutation {
            state: Rc::new(RefCell::new(PermState {
                source: Box::new(source),
                images: Vec::new(),
                seen: HashSet::new(),
            })),
        }
    }

    /// Closed-form permutation with a closed-form coverage bound.
    pub fn from_fn(
        image: impl Fn(u64) -> u64 + 'static,
        coverage: impl Fn(u64) -> u64 + 'static,
    ) -> Self {
        Self::new(FnSource { image, coverage })
    }

    pub fn identity() -> Self {
        Self::from_fn(|n| n, |n| n)
    }

    /// `1, 3, 2, 5, 7, 4, 9, 11, 6, ...`: two odd indices then one even.
    /// On the alternating harmonic series this takes two positive terms
    /// for every negative one.
    pub fn two_pos_one_neg() -> Self {
        Self::from_fn(
            |n| {
                let block = (n - 1) / 3 + 1;
                match (n - 1) % 3 {
                    0 => 4 * block - 3,
                    1 => 4 * block - 1,
                    _ => 2 * block,
                }
            },
            |n| {
                if n == 0 {
                    return 0;
                }
                // position of the largest even and largest odd value <= n
                let even_pos = 3 * (n / 2);
                let odd = if n % 2 == 1 { n } else { n - 1 };
                let odd_pos = if odd % 4 == 1 {
                    3 * odd.div_ceil(4) - 2
                } else {
                    3 * ((odd + 1) / 4) - 1
                };
                even_pos.max(odd_pos)
            },
        )
    }

    /// A finite rearrangement of `1..=L` followed by the identity.
    pub fn from_prefix(prefix: Vec<u64>) -> Result<Self> {
        let len = prefix.len() as u64;
        let mut sorted = prefix.clone();
        sorted.sort_unstable();
        if sorted.iter().copied().ne(1..=len) {
            return Err(SeriesError::InvalidArgument(format!(
                "explicit prefix is not a permutation of 1..={len}"
            )));
        }
        Ok(Self::from_fn(
            move |n| prefix.get((n - 1) as usize).copied().unwrap_or(n),
            move |n| n.max(len),
        ))
    }

    /// Pseudorandom permutation that shuffles consecutive blocks of
    /// random length in `1..=max_block`. Deterministic in `seed`.
    pub fn block_shuffle(seed: u64, max_block: u64) -> Self {
        Self::new(BlockShuffle {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_block: max_block.max(1),
            images: Vec::new(),
            block_ends: Vec::new(),
        })
    }

    /// `sigma(n)`, materializing the prefix up to `n`.
    pub fn image(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(SeriesError::ZeroIndex(0));
        }
        self.extend_to(n)?;
        Ok(self.state.borrow().images[(n - 1) as usize])
    }

    pub fn prefix(&self, len: u64) -> Result<Vec<u64>> {
        self.extend_to(len)?;
        Ok(self.state.borrow().images[..len as usize].to_vec())
    }

    fn extend_to(&self, n: u64) -> Result<()> {
        let mut st = self.state.borrow_mut();
        let PermState {
            source,
            images,
            seen,
        } = &mut *st;
        while (images.len() as u64) < n {
            let pos = images.len() as u64 + 1;
            let v = source.next_image(pos)?;
            if v == 0 {
                return Err(SeriesError::ZeroImage(pos));
            }
            if !seen.insert(v) {
                return Err(SeriesError::NotInjective {
                    position: pos,
                    value: v,
                });
            }
            images.push(v);
        }
        Ok(())
    }

    /// The raw certificate value, unverified.
    pub fn claimed_coverage(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Ok(0);
        }
        self.state.borrow_mut().source.coverage(n)
    }
}

/// `M = coverage(N)`, verified: `{1..N}` must occur among the first `M`
/// images.
pub fn coverage_index(sigma: &Permutation, n: u64) -> Result<u64> {
    if n == 0 {
        return Err(SeriesError::ZeroIndex(0));
    }
    let m = sigma.claimed_coverage(n)?;
    sigma.extend_to(m)?;
    let st = sigma.state.borrow();
    let mut hit = vec![false; n as usize];
    for &v in &st.images[..m as usize] {
        if v <= n {
            hit[(v - 1) as usize] = true;
        }
    }
    if let Some(missing) = hit.iter().position(|h| !h) {
        return Err(SeriesError::CoverageViolation {
            n,
            claimed: m,
            missing: missing as u64 + 1,
        });
    }
    Ok(m)
}

/// The rearranged stream `n -> a_{sigma(n)}`.
pub fn apply_permutation(s: &TermStream, sigma: &Permutation) -> TermStream {
    let s = s.clone();
    let sigma = sigma.clone();
    TermStream::try_new(move |n| s.term(sigma.image(n)?))
}

/// Smallest `M` with `{sigma(1), ..., sigma(len)} ⊆ {1..M}`.
pub fn max_image(sigma: &Permutation, len: u64) -> Result<u64> {
    Ok(sigma.prefix(len)?.into_iter().max().unwrap_or(0))
}

struct FnSource<I, C> {
    image: I,
    coverage: C,
}

impl<I: Fn(u64) -> u64, C: Fn(u64) -> u64> PermutationSource for FnSource<I, C> {
    fn next_image(&mut self, n: u64) -> Result<u64> {
        Ok((self.image)(n))
    }

    fn coverage(&mut self, n: u64) -> Result<u64> {
        Ok((self.coverage)(n))
    }
}

struct BlockShuffle {
    rng: ChaCha8Rng,
    max_block: u64,
    images: Vec<u64>,
    block_ends: Vec<u64>,
}

impl BlockShuffle {
    fn grow(&mut self) {
        let start = self.images.len() as u64 + 1;
        let len = self.rng.gen_range(1..=self.max_block);
        let mut block: Vec<u64> = (start..start + len).collect();
        block.shuffle(&mut self.rng);
        self.images.extend(block);
        self.block_ends.push(start + len - 1);
    }
}

impl PermutationSource for BlockShuffle {
    fn next_image(&mut self, n: u64) -> Result<u64> {
        while (self.images.len() as u64) < n {
            self.grow();
        }
        Ok(self.images[(n - 1) as usize])
    }

    fn coverage(&mut self, n: u64) -> Result<u64> {
        while self.block_ends.last().is_none_or(|&end| end < n) {
            self.grow();
        }
        let i = self.block_ends.partition_point(|&end| end < n);
        Ok(self.block_ends[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_core::{rat, Rational};

    fn alt_harmonic() -> TermStream {
        TermStream::new(|n| Rational::new(if n % 2 == 1 { 1 } else { -1 }, n as i64))
    }

    struct Lying;
    impl PermutationSource for Lying {
        fn next_image(&mut self, n: u64) -> Result<u64> {
            Ok(n)
        }
        fn coverage(&mut self, n: u64) -> Result<u64> {
            Ok(n - 1)
        }
    }

    struct Repeating;
    impl PermutationSource for Repeating {
        fn next_image(&mut self, n: u64) -> Result<u64> {
            Ok(if n == 3 { 1 } else { n })
        }
        fn coverage(&mut self, n: u64) -> Result<u64> {
            Ok(n)
        }
    }

    #[test]
    fn identity_coverage() {
        assert_eq!(coverage_index(&Permutation::identity(), 100).unwrap(), 100);
    }

    #[test]
    fn two_pos_one_neg_prefix_and_coverage() {
        let p = Permutation::two_pos_one_neg();
        assert_eq!(p.prefix(9).unwrap(), vec![1, 3, 2, 5, 7, 4, 9, 11, 6]);
        // oracle: scan for the first prefix containing 1..=4
        let scan = p.prefix(20).unwrap();
        let mut needed: HashSet<u64> = (1..=4).collect();
        let mut first = 0;
        for (i, v) in scan.iter().enumerate() {
            needed.remove(v);
            if needed.is_empty() {
                first = i + 1;
                break;
            }
        }
        assert_eq!(first, 6);
        assert_eq!(coverage_index(&p, 4).unwrap(), 6);
    }

    #[test]
    fn two_pos_one_neg_coverage_is_tight() {
        let p = Permutation::two_pos_one_neg();
        let prefix = p.prefix(4000).unwrap();
        for n in 1..=1000u64 {
            let m = coverage_index(&p, n).unwrap();
            let brute = (1..=n)
                .map(|v| prefix.iter().position(|&x| x == v).unwrap() as u64 + 1)
                .max()
                .unwrap();
            assert_eq!(m, brute, "n = {n}");
        }
    }

    #[test]
    fn broken_certificate_is_reported() {
        let p = Permutation::new(Lying);
        assert!(matches!(
            coverage_index(&p, 5),
            Err(SeriesError::CoverageViolation { n: 5, claimed: 4, missing: 5 })
        ));
    }

    #[test]
    fn repeated_image_is_reported() {
        let s = apply_permutation(&alt_harmonic(), &Permutation::new(Repeating));
        assert_eq!(s.term(2).unwrap(), rat(-1, 2));
        assert_eq!(
            s.term(3),
            Err(SeriesError::NotInjective { position: 3, value: 1 })
        );
    }

    #[test]
    fn apply_permutation_examples() {
        let a = alt_harmonic();
        let id = apply_permutation(&a, &Permutation::identity());
        assert_eq!(id.prefix(10).unwrap(), a.prefix(10).unwrap());

        let swap = Permutation::from_prefix(vec![2, 1]).unwrap();
        let s = apply_permutation(&a, &swap);
        assert_eq!(s.prefix(3).unwrap(), vec![rat(-1, 2), rat(1, 1), rat(1, 3)]);

        let s = apply_permutation(&a, &Permutation::two_pos_one_neg());
        assert_eq!(
            s.prefix(6).unwrap(),
            vec![rat(1, 1), rat(1, 3), rat(-1, 2), rat(1, 5), rat(1, 7), rat(-1, 4)]
        );
    }

    #[test]
    fn explicit_prefix_must_be_a_permutation() {
        assert!(Permutation::from_prefix(vec![1, 3]).is_err());
        assert!(Permutation::from_prefix(vec![2, 2]).is_err());
        let p = Permutation::from_prefix(vec![3, 1, 2]).unwrap();
        assert_eq!(coverage_index(&p, 1).unwrap(), 3);
        assert_eq!(coverage_index(&p, 7).unwrap(), 7);
    }

    #[test]
    fn block_shuffle_is_deterministic_and_covered() {
        let a = Permutation::block_shuffle(7, 9).prefix(300).unwrap();
        let b = Permutation::block_shuffle(7, 9).prefix(300).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, (1..=300).collect::<Vec<_>>());
        let p = Permutation::block_shuffle(11, 16);
        for n in 1..=500 {
            coverage_index(&p, n).unwrap();
        }
    }
}
