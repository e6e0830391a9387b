//! Exact rationals, memoized term streams, Cauchy moduli, permutations of
//! the positive integers and bracketings.

mod bracket;
mod permutation;
mod rational;
mod stream;

pub use bracket::{bracket_series, Bracketing, IndexMap};
pub use permutation::{
    apply_permutation, coverage_index, max_image, Permutation, PermutationSource,
};
pub use rational::{rat, ParseRationalError, Rational};
pub use stream::{
    check_modulus_windows, limit_approx, partial_sum, window_sum, CauchyModulus,
    ConvergentSeries, PartialSums, TermStream,
};
