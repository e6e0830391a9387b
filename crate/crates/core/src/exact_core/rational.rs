//! Exact rational numbers over arbitrary-precision integers.
//!
//! Values are always kept in lowest terms with a positive denominator.
//! Addition follows Henrici's scheme: the only gcds taken are against the
//! gcd of the two denominators, so adding a small-denominator term to a
//! huge partial sum costs a few linear passes instead of a big-by-big gcd.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rational {
    num: BigInt,
    den: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid integer {0:?} in rational literal")]
    InvalidInteger(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Nonnegative gcd; reduces through a machine word whenever either side fits.
fn gcd(a: &BigInt, b: &BigInt) -> BigInt {
    if let Some(small) = b.magnitude().to_u64() {
        if small == 0 {
            return a.abs();
        }
        let r = (a.magnitude() % small).to_u64().unwrap_or(0);
        return BigInt::from(gcd_u64(small, r));
    }
    if let Some(small) = a.magnitude().to_u64() {
        if small == 0 {
            return b.abs();
        }
        let r = (b.magnitude() % small).to_u64().unwrap_or(0);
        return BigInt::from(gcd_u64(small, r));
    }
    // strip common powers of two first; dyadic denominators then reduce
    // to a word-sized odd part
    let (za, zb) = (a.trailing_zeros(), b.trailing_zeros());
    if let (Some(za), Some(zb)) = (za, zb) {
        if za > 0 || zb > 0 {
            let (oa, ob) = (a.abs() >> za, b.abs() >> zb);
            return gcd(&oa, &ob) << za.min(zb);
        }
    }
    a.gcd(b)
}

impl Rational {
    /// Builds `num/den` and reduces it. Panics on a zero denominator.
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        Self::try_new(num, den).expect("rational with zero denominator")
    }

    pub fn try_new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Option<Self> {
        let num = num.into();
        let den = den.into();
        if den.is_zero() {
            return None;
        }
        Some(Self::reduce(num, den))
    }

    fn reduce(mut num: BigInt, mut den: BigInt) -> Self {
        if den.is_negative() {
            num = -num;
            den = -den;
        }
        if num.is_zero() {
            return Self::zero();
        }
        let g = gcd(&num, &den);
        if !g.is_one() {
            num /= &g;
            den /= &g;
        }
        Rational { num, den }
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Rational {
            num: n.into(),
            den: BigInt::one(),
        }
    }

    pub fn zero() -> Self {
        Rational {
            num: BigInt::zero(),
            den: BigInt::one(),
        }
    }

    pub fn one() -> Self {
        Self::from_integer(1)
    }

    /// `2^exp` for any integer exponent.
    pub fn pow2(exp: i64) -> Self {
        let mag = BigInt::one() << exp.unsigned_abs();
        if exp >= 0 {
            Self::from_integer(mag)
        } else {
            Rational {
                num: BigInt::one(),
                den: mag,
            }
        }
    }

    pub fn numer(&self) -> &BigInt {
        &self.num
    }

    pub fn denom(&self) -> &BigInt {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.num.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.den.is_one()
    }

    pub fn abs(&self) -> Self {
        Rational {
            num: self.num.abs(),
            den: self.den.clone(),
        }
    }

    /// Positive part `max(self, 0)`.
    pub fn positive_part(&self) -> Self {
        if self.is_positive() {
            self.clone()
        } else {
            Self::zero()
        }
    }

    /// Negative part `max(-self, 0)`.
    pub fn negative_part(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            Self::zero()
        }
    }

    /// Panics on zero, like integer division.
    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        if self.num.is_negative() {
            Rational {
                num: -self.den.clone(),
                den: -self.num.clone(),
            }
        } else {
            Rational {
                num: self.den.clone(),
                den: self.num.clone(),
            }
        }
    }

    pub fn floor(&self) -> BigInt {
        self.num.div_floor(&self.den)
    }

    pub fn ceil(&self) -> BigInt {
        -((-&self.num).div_floor(&self.den))
    }

    /// Nearest-ish `f64`; only for human-facing convenience output.
    pub fn to_f64(&self) -> f64 {
        let nb = self.num.bits() as i64;
        let db = self.den.bits() as i64;
        let excess = nb.max(db) - 900;
        if excess <= 0 {
            return self.num.to_f64().unwrap_or(f64::NAN) / self.den.to_f64().unwrap_or(f64::NAN);
        }
        let shift = excess as usize;
        let n = (&self.num >> shift).to_f64().unwrap_or(0.0);
        let d = (&self.den >> shift).to_f64().unwrap_or(0.0);
        if d == 0.0 {
            // denominator vanished under the shift: the value is huge
            return if self.num.is_negative() {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
        }
        n / d
    }

    fn combine(&self, other: &Rational, negate_other: bool) -> Rational {
        let c = if negate_other {
            -&other.num
        } else {
            other.num.clone()
        };
        if other.num.is_zero() {
            return self.clone();
        }
        if self.num.is_zero() {
            return Rational {
                num: c,
                den: other.den.clone(),
            };
        }
        let g = gcd(&self.den, &other.den);
        if g.is_one() {
            let num = &self.num * &other.den + c * &self.den;
            if num.is_zero() {
                return Self::zero();
            }
            return Rational {
                num,
                den: &self.den * &other.den,
            };
        }
        let b1 = &self.den / &g;
        let d1 = &other.den / &g;
        let t = &self.num * &d1 + c * &b1;
        if t.is_zero() {
            return Self::zero();
        }
        let g2 = gcd(&t, &g);
        if g2.is_one() {
            Rational {
                num: t,
                den: b1 * &other.den,
            }
        } else {
            Rational {
                num: t / &g2,
                den: b1 * (&other.den / &g2),
            }
        }
    }

    fn product(&self, other: &Rational) -> Rational {
        if self.num.is_zero() || other.num.is_zero() {
            return Self::zero();
        }
        let g1 = gcd(&self.num, &other.den);
        let g2 = gcd(&other.num, &self.den);
        let (a, d) = if g1.is_one() {
            (self.num.clone(), other.den.clone())
        } else {
            (&self.num / &g1, &other.den / &g1)
        };
        let (c, b) = if g2.is_one() {
            (other.num.clone(), self.den.clone())
        } else {
            (&other.num / &g2, &self.den / &g2)
        };
        Rational {
            num: a * c,
            den: b * d,
        }
    }
}

impl Default for Rational {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Self::from_integer(n)
    }
}

impl From<u64> for Rational {
    fn from(n: u64) -> Self {
        Self::from_integer(n)
    }
}

impl From<i32> for Rational {
    fn from(n: i32) -> Self {
        Self::from_integer(n)
    }
}

impl From<BigInt> for Rational {
    fn from(n: BigInt) -> Self {
        Self::from_integer(n)
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.num.sign(), other.num.sign());
        if sa != sb {
            let rank = |s: Sign| match s {
                Sign::Minus => 0,
                Sign::NoSign => 1,
                Sign::Plus => 2,
            };
            return rank(sa).cmp(&rank(sb));
        }
        if self.den == other.den {
            return self.num.cmp(&other.num);
        }
        (&self.num * &other.den).cmp(&(&other.num * &self.den))
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `"p"` or `"p/q"` with decimal integers.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        let parse_int = |part: &str| {
            let part = part.trim();
            let digits = part.strip_prefix(['-', '+']).unwrap_or(part);
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(ParseRationalError::InvalidInteger(part.to_string()));
            }
            part.parse::<BigInt>()
                .map_err(|_| ParseRationalError::InvalidInteger(part.to_string()))
        };
        match s.split_once('/') {
            None => Ok(Rational::from_integer(parse_int(s)?)),
            Some((p, q)) => {
                let p = parse_int(p)?;
                let q = parse_int(q)?;
                Rational::try_new(p, q).ok_or_else(|| ParseRationalError::ZeroDenominator(s.into()))
            }
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational {
            num: -self.num,
            den: self.den,
        }
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                let f: fn(&Rational, &Rational) -> Rational = $body;
                f(self, rhs)
            }
        }
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                (&self).$method(rhs)
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a.combine(b, false));
forward_binop!(Sub, sub, |a, b| a.combine(b, true));
forward_binop!(Mul, mul, |a, b| a.product(b));
forward_binop!(Div, div, |a, b| a.product(&b.recip()));

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        *self = self.combine(rhs, false);
    }
}

impl AddAssign<Rational> for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        *self = self.combine(&rhs, false);
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        *self = self.combine(rhs, true);
    }
}

impl SubAssign<Rational> for Rational {
    fn sub_assign(&mut self, rhs: Rational) {
        *self = self.combine(&rhs, true);
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

/// Shorthand for `Rational::new(p, q)` with machine integers.
pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_sign_and_terms() {
        let r = Rational::new(6, -8);
        assert_eq!(r.numer(), &BigInt::from(-3));
        assert_eq!(r.denom(), &BigInt::from(4));
        assert_eq!(Rational::new(0, -5), Rational::zero());
        assert!(Rational::try_new(1, 0).is_none());
    }

    #[test]
    fn parses_and_prints() {
        assert_eq!("-7/12".parse::<Rational>().unwrap(), rat(-7, 12));
        assert_eq!("14/-24".parse::<Rational>().unwrap(), rat(-7, 12));
        assert_eq!("5".parse::<Rational>().unwrap(), rat(5, 1));
        assert_eq!(rat(-7, 12).to_string(), "-7/12");
        assert_eq!(rat(10, 5).to_string(), "2");
        assert!(matches!(
            "1/0".parse::<Rational>(),
            Err(ParseRationalError::ZeroDenominator(_))
        ));
        assert!("1.5".parse::<Rational>().is_err());
        assert!("".parse::<Rational>().is_err());
        assert!("1/".parse::<Rational>().is_err());
    }

    #[test]
    fn arithmetic_small_cases() {
        assert_eq!(rat(1, 2) + rat(1, 3), rat(5, 6));
        assert_eq!(rat(1, 6) + rat(1, 3), rat(1, 2));
        assert_eq!(rat(1, 4) - rat(1, 4), Rational::zero());
        assert_eq!(rat(2, 3) * rat(9, 4), rat(3, 2));
        assert_eq!(rat(2, 3) / rat(-4, 9), rat(-3, 2));
        assert_eq!(-rat(1, 3), rat(-1, 3));
        assert_eq!(rat(-5, 3).abs(), rat(5, 3));
        assert_eq!(rat(-5, 3).floor(), BigInt::from(-2));
        assert_eq!(rat(-5, 3).ceil(), BigInt::from(-1));
        assert_eq!(rat(5, 3).ceil(), BigInt::from(2));
        assert_eq!(Rational::pow2(-3), rat(1, 8));
        assert_eq!(Rational::pow2(4), rat(16, 1));
    }

    #[test]
    fn ordering_across_signs() {
        let mut v = vec![rat(1, 3), rat(-1, 2), Rational::zero(), rat(1, 2), rat(-1, 3)];
        v.sort();
        assert_eq!(v, vec![rat(-1, 2), rat(-1, 3), Rational::zero(), rat(1, 3), rat(1, 2)]);
    }

    #[test]
    fn to_f64_handles_huge_parts() {
        let big = Rational::new(BigInt::from(1) << 3000usize, (BigInt::from(1) << 3001usize) + 1);
        assert!((big.to_f64() - 0.5).abs() < 1e-12);
        assert!((rat(1, 3).to_f64() - 1.0 / 3.0).abs() < 1e-15);
    }

    fn small_rat() -> impl Strategy<Value = Rational> {
        (-1000i64..1000, 1i64..1000).prop_map(|(p, q)| rat(p, q))
    }

    proptest! {
        // Henrici addition must agree with the schoolbook cross-multiplied form.
        #[test]
        fn add_matches_schoolbook(a in small_rat(), b in small_rat()) {
            let naive = Rational::new(
                a.numer() * b.denom() + b.numer() * a.denom(),
                a.denom() * b.denom(),
            );
            prop_assert_eq!(&a + &b, naive);
            prop_assert_eq!(&(&a + &b) - &b, a);
        }

        #[test]
        fn stays_reduced(a in small_rat(), b in small_rat()) {
            for r in [&a + &b, &a - &b, &a * &b] {
                prop_assert!(r.denom().is_positive());
                prop_assert!(r.numer().gcd(r.denom()).is_one());
            }
        }

        #[test]
        fn display_parse_roundtrip(a in small_rat()) {
            prop_assert_eq!(a.to_string().parse::<Rational>().unwrap(), a);
        }
    }
}
