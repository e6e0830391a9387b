use crate::exact_core::Rational;

pub type Result<T, E = SeriesError> = std::result::Result<T, E>;

/// Every failure the constructions can report. Most variants carry the
/// exact value that broke a certificate so callers can print it.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SeriesError {
    #[error("indices start at 1; got {0}")]
    ZeroIndex(u64),
    #[error("epsilon must be positive; got {0}")]
    NonPositiveEpsilon(Rational),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index arithmetic overflowed u64 ({0})")]
    Overflow(&'static str),

    #[error("bracketing must start with f(1) = 1; got f(1) = {0}")]
    BracketStart(u64),
    #[error("bracketing is not strictly increasing: f({k}) = {at}, f({next_k}) = {next}", next_k = .k + 1)]
    NotIncreasing { k: u64, at: u64, next: u64 },

    #[error("permutation repeats image {value} at position {position}")]
    NotInjective { position: u64, value: u64 },
    #[error("permutation produced image 0 at position {0}")]
    ZeroImage(u64),
    #[error("coverage certificate violated: claimed {{1..{n}}} within first {claimed} images, but {missing} is absent")]
    CoverageViolation { n: u64, claimed: u64, missing: u64 },

    #[error("certificate violation: {0}")]
    Certificate(String),
    #[error("modulus violation: {0}")]
    Modulus(String),
    #[error("separation violation: approximations s~{s_approx} and t~{t_approx} are not {required} apart on the declared side")]
    Separation {
        s_approx: Rational,
        t_approx: Rational,
        required: Rational,
    },

    #[error("pseudoboundedness violation: modulus answered {claimed}, but the sequence takes value {value} at index {claimed}")]
    Pseudoboundedness { claimed: u64, value: u64 },
    #[error("tail violation: lambda_{k} = 1 with k >= N = {n}")]
    TailViolation { n: u64, k: u64 },
    #[error("membership violation: witness m = {witness} does not certify {value} in S (plus mass {mass} over ({value}, {witness}])")]
    Membership {
        value: u64,
        witness: u64,
        mass: Rational,
    },

    #[error("bad intervals overlap or are unordered: [{0}, {1}] and [{2}, {3}]")]
    Overlap(u64, u64, u64, u64),
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(u64, u64),
    #[error("no block with sum >= eps inside bad interval [{lo}, {hi}] (best {best})")]
    Sig1NotFound { lo: u64, hi: u64, best: Rational },
}

impl SeriesError {
    /// True for broken certificates and invariants, false for bad inputs.
    pub fn is_violation(&self) -> bool {
        !matches!(
            self,
            SeriesError::ZeroIndex(_)
                | SeriesError::NonPositiveEpsilon(_)
                | SeriesError::InvalidArgument(_)
                | SeriesError::BracketStart(_)
                | SeriesError::InvalidInterval(..)
        )
    }
}
