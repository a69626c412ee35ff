//! Exact p-adic arithmetic on the rationals and ultrametric balls.
//!
//! Points of `Q_p` are represented by rationals. Every quantity computed in
//! this crate is locally constant, so a rational probe carries all of the
//! information a genuine p-adic number would.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// An exact rational, viewed as an element of `Q_p` for whatever prime the
/// surrounding object carries.
pub type Rational = BigRational;

/// Alias used where a rational is meant as a point of `Q_p`.
pub type PadicRational = Rational;

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn integer(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// The prime `p`. Every ball, set, function and group element carries one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Prime(u32);

pub type PadicContext = Prime;

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if p < 2 || p > u64::from(u32::MAX) || !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(Prime(p as u32))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// `p^e` as an exact rational; `e` may be negative.
    pub fn power(self, e: i64) -> Rational {
        let base = BigInt::from(self.0).pow(e.unsigned_abs() as u32);
        if e >= 0 {
            Rational::from_integer(base)
        } else {
            Rational::new(BigInt::one(), base)
        }
    }

    fn int_power(self, e: u64) -> BigInt {
        BigInt::from(self.0).pow(e as u32)
    }

    /// `v_p(x)`; `None` stands for `+infinity` (x = 0).
    pub fn valuation(self, x: &Rational) -> Option<i64> {
        if x.is_zero() {
            return None;
        }
        Some(int_valuation(x.numer(), self.0) as i64 - int_valuation(x.denom(), self.0) as i64)
    }

    /// `|x|_p = p^{-v_p(x)}`, with `|0|_p = 0`.
    pub fn abs(self, x: &Rational) -> Rational {
        match self.valuation(x) {
            None => Rational::zero(),
            Some(v) => self.power(-v),
        }
    }

    /// Canonical digits `d_lo, ..., d_hi` of the p-adic expansion of `x`.
    pub fn digits(self, x: &Rational, lo: i64, hi: i64) -> Result<Vec<u32>> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!("digit range {lo}..{hi} is empty")));
        }
        let len = (hi - lo + 1) as usize;
        let Some(v) = self.valuation(x) else {
            return Ok(vec![0; len]);
        };
        if hi < v {
            return Ok(vec![0; len]);
        }
        let count = (hi - v + 1) as u64;
        let mut t = self.unit_residue(x, v, count);
        let p = BigInt::from(self.0);
        let mut out = Vec::with_capacity(len);
        for i in lo..=hi {
            if i < v {
                out.push(0);
            } else {
                let (q, r) = t.div_rem(&p);
                out.push(r.to_u32().expect("digit below p"));
                t = q;
            }
        }
        Ok(out)
    }

    /// For `x = p^v u` with `u` a unit, returns `u mod p^count` in `[0, p^count)`.
    fn unit_residue(self, x: &Rational, v: i64, count: u64) -> BigInt {
        let (num, den) = strip(x, self.0, v);
        let modulus = self.int_power(count);
        let inv = den
            .mod_floor(&modulus)
            .modinv(&modulus)
            .expect("denominator coprime to p after stripping");
        (num * inv).mod_floor(&modulus)
    }

    /// The representative `sum_{i < j} d_i p^i` of `x` modulo `p^j Z_p`.
    pub fn fractional_part(self, x: &Rational, j: i64) -> Rational {
        let Some(v) = self.valuation(x) else {
            return Rational::zero();
        };
        if v >= j {
            return Rational::zero();
        }
        let t = self.unit_residue(x, v, (j - v) as u64);
        Rational::from_integer(t) * self.power(v)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 4 {
        return n >= 2;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Removes the power of p from numerator or denominator so both are units.
fn strip(x: &Rational, p: u32, v: i64) -> (BigInt, BigInt) {
    let pv = BigInt::from(p).pow(v.unsigned_abs() as u32);
    if v >= 0 {
        (x.numer() / pv, x.denom().clone())
    } else {
        (x.numer().clone(), x.denom() / pv)
    }
}

pub(crate) fn int_valuation(n: &BigInt, p: u32) -> u64 {
    if n.is_zero() {
        return u64::MAX;
    }
    if p == 2 {
        return n.trailing_zeros().unwrap_or(0);
    }
    if let Some(mut m) = n.abs().to_u128() {
        let p = u128::from(p);
        let mut v = 0;
        while m % p == 0 {
            m /= p;
            v += 1;
        }
        return v;
    }
    let pb = BigUint::from(p);
    let mut m = n.magnitude().clone();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(&pb);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

/// True iff `p^e` divides `n` (`e <= 0` is always true).
fn divisible_by_power(n: &BigInt, p: u32, e: i64) -> bool {
    if e <= 0 || n.is_zero() {
        return true;
    }
    if n.sign() == Sign::NoSign {
        return true;
    }
    int_valuation(n, p) >= e as u64
}

/// Position of two balls relative to each other. Partial overlap cannot occur
/// in an ultrametric space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BallRelation {
    Equal,
    FirstInsideSecond,
    SecondInsideFirst,
    Disjoint,
}

/// `B(c; k) = { x : |x - c|_p <= p^k }` with a canonical center.
///
/// The stored center is the truncated expansion `sum_{i < -k} d_i p^i` of any
/// point of the ball, so two balls are equal iff their fields are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ball {
    prime: Prime,
    radius_exp: i64,
    center: Rational,
}

impl Ball {
    pub fn new(prime: Prime, center: &Rational, radius_exp: i64) -> Self {
        Ball {
            prime,
            radius_exp,
            center: prime.fractional_part(center, -radius_exp),
        }
    }

    /// `B(0; 0) = Z_p`.
    pub fn unit(prime: Prime) -> Self {
        Self::zero_centered(prime, 0)
    }

    pub fn zero_centered(prime: Prime, radius_exp: i64) -> Self {
        Ball {
            prime,
            radius_exp,
            center: Rational::zero(),
        }
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn center(&self) -> &Rational {
        &self.center
    }

    pub fn radius_exp(&self) -> i64 {
        self.radius_exp
    }

    /// Haar measure `p^k`, normalized so that `m(Z_p) = 1`.
    pub fn measure(&self) -> Rational {
        self.prime.power(self.radius_exp)
    }

    pub fn contains(&self, x: &Rational) -> bool {
        // v(x - c) >= -k, evaluated without normalizing x - c.
        let (a, b) = (x.numer(), x.denom());
        let (n, d) = (self.center.numer(), self.center.denom());
        let diff = a * d - n * b;
        if diff.is_zero() {
            return true;
        }
        let p = self.prime.0;
        let need = -self.radius_exp + int_valuation(b, p) as i64 + int_valuation(d, p) as i64;
        divisible_by_power(&diff, p, need)
    }

    pub fn relation(&self, other: &Ball) -> BallRelation {
        assert_same_prime(self.prime, other.prime);
        use std::cmp::Ordering::*;
        match self.radius_exp.cmp(&other.radius_exp) {
            Equal => {
                if self.center == other.center {
                    BallRelation::Equal
                } else {
                    BallRelation::Disjoint
                }
            }
            Less => {
                if other.contains(&self.center) {
                    BallRelation::FirstInsideSecond
                } else {
                    BallRelation::Disjoint
                }
            }
            Greater => {
                if self.contains(&other.center) {
                    BallRelation::SecondInsideFirst
                } else {
                    BallRelation::Disjoint
                }
            }
        }
    }

    pub fn try_relation(&self, other: &Ball) -> Result<BallRelation> {
        check_same_prime(self.prime, other.prime)?;
        Ok(self.relation(other))
    }

    pub fn intersects(&self, other: &Ball) -> bool {
        self.relation(other) != BallRelation::Disjoint
    }

    /// `self ⊆ other`.
    pub fn is_within(&self, other: &Ball) -> bool {
        matches!(
            self.relation(other),
            BallRelation::Equal | BallRelation::FirstInsideSecond
        )
    }

    /// The smaller of two intersecting balls, i.e. their intersection.
    pub fn intersection(&self, other: &Ball) -> Option<Ball> {
        match self.relation(other) {
            BallRelation::Equal | BallRelation::FirstInsideSecond => Some(self.clone()),
            BallRelation::SecondInsideFirst => Some(other.clone()),
            BallRelation::Disjoint => None,
        }
    }

    /// The `p` sub-balls of radius `p^{k-1}`: centers `c + r p^{-k}`.
    pub fn split(&self) -> Vec<Ball> {
        let step = self.prime.power(-self.radius_exp);
        (0..self.prime.0)
            .map(|r| {
                Ball::new(
                    self.prime,
                    &(&self.center + &step * integer(i64::from(r))),
                    self.radius_exp - 1,
                )
            })
            .collect()
    }

    pub fn parent(&self) -> Ball {
        Ball::new(self.prime, &self.center, self.radius_exp + 1)
    }

    /// Smallest `R` with `self ⊆ B(0; R)`.
    pub fn enclosing_radius(&self) -> i64 {
        match self.prime.valuation(&self.center) {
            None => self.radius_exp,
            Some(v) => self.radius_exp.max(-v),
        }
    }

    pub fn translate(&self, h: &Rational) -> Ball {
        Ball::new(self.prime, &(&self.center + h), self.radius_exp)
    }

    /// Digit key of the center: digits from its valuation up to `-k - 1`.
    pub fn digit_key(&self) -> Vec<u32> {
        match self.prime.valuation(&self.center) {
            None => Vec::new(),
            Some(v) => self
                .prime
                .digits(&self.center, v, -self.radius_exp - 1)
                .expect("canonical center lies below the radius"),
        }
    }

    /// A Haar-uniform point at resolution `p^{k - depth}`:
    /// `c + p^{-k} sum_{i < depth} d_i p^i` with i.i.d. uniform digits.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, depth: u32, rng: &mut R) -> Rational {
        assert!(depth >= 1, "sampling depth must be positive");
        let p = u64::from(self.prime.0);
        // Draw base-p digits in blocks that fit in a u64.
        let mut block = 1u32;
        while p.checked_pow(block + 1).is_some() {
            block += 1;
        }
        let mut t = BigInt::zero();
        let mut remaining = depth;
        while remaining > 0 {
            let take = remaining.min(block);
            let span = p.pow(take);
            let chunk = rng.random_range(0..span);
            t = t * BigInt::from(span) + BigInt::from(chunk);
            remaining -= take;
        }
        &self.center + Rational::from_integer(t) * self.prime.power(-self.radius_exp)
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "B({}; {})",
            crate::literal::format_rational(&self.center),
            self.radius_exp
        )
    }
}

pub(crate) fn assert_same_prime(a: Prime, b: Prime) {
    assert!(a == b, "context mismatch: p = {} vs p = {}", a.0, b.0);
}

pub(crate) fn check_same_prime(a: Prime, b: Prime) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::ContextMismatch {
            left: a.0,
            right: b.0,
        })
    }
}

/// Exact power of a rational by a small nonnegative integer.
pub(crate) fn rational_pow(x: &Rational, e: u32) -> Rational {
    Pow::pow(x, e)
}

/// Lossy conversion used only at the outermost step of a float computation.
pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(n: u64) -> Prime {
        Prime::new(n).unwrap()
    }

    #[test]
    fn primality() {
        assert!(Prime::new(2).is_ok());
        assert!(Prime::new(97).is_ok());
        assert_eq!(Prime::new(1), Err(Error::NotPrime(1)));
        assert_eq!(Prime::new(9), Err(Error::NotPrime(9)));
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(p(3).valuation(&integer(18)), Some(2));
        assert_eq!(p(3).valuation(&integer(0)), None);
        assert_eq!(p(3).valuation(&rational(5, 9)), Some(-2));
        assert_eq!(p(2).valuation(&rational(-12, 35)), Some(2));
    }

    #[test]
    fn abs_examples() {
        assert_eq!(p(5).abs(&integer(1)), integer(1));
        assert_eq!(p(2).abs(&integer(12)), rational(1, 4));
        assert_eq!(p(3).abs(&rational(1, 2)), integer(1));
        assert_eq!(p(3).abs(&integer(0)), integer(0));
    }

    #[test]
    fn digit_examples() {
        assert_eq!(p(3).digits(&rational(1, 2), 0, 3).unwrap(), vec![2, 1, 1, 1]);
        assert_eq!(p(3).digits(&integer(0), -2, 2).unwrap(), vec![0; 5]);
        assert_eq!(p(5).digits(&integer(5), 0, 1).unwrap(), vec![0, 1]);
        assert_eq!(p(3).digits(&rational(1, 3), -2, 0).unwrap(), vec![0, 1, 0]);
        assert!(p(3).digits(&integer(1), 2, 1).is_err());
    }

    #[test]
    fn digits_reconstruct_modulo_power() {
        // 1/2 in Q_3: 2 + 1*3 + 1*9 + 1*27 = 41 and 2 * 41 = 82 = 1 mod 81.
        let d = p(3).digits(&rational(1, 2), 0, 3).unwrap();
        let t: u64 = d.iter().rev().fold(0, |acc, &x| acc * 3 + u64::from(x));
        assert_eq!((2 * t) % 81, 1);
    }

    #[test]
    fn ball_membership() {
        let z3 = Ball::unit(p(3));
        assert!(z3.contains(&integer(5)));
        assert!(Ball::new(p(3), &integer(0), -1).contains(&integer(0)));
        assert!(!z3.contains(&rational(1, 3)));
        assert!(z3.contains(&rational(7, 2)));
    }

    #[test]
    fn ball_canonical_centers() {
        let b = Ball::new(p(3), &rational(4, 3), 0);
        assert_eq!(b, Ball::new(p(3), &rational(1, 3), 0));
        assert_eq!(b.center(), &rational(1, 3));
        assert_eq!(Ball::new(p(3), &integer(1), 0), Ball::unit(p(3)));
        assert_eq!(Ball::new(p(3), &rational(1, 3), 1), Ball::zero_centered(p(3), 1));
    }

    #[test]
    fn relation_examples() {
        let q = p(3);
        let r = Ball::unit(q).relation(&Ball::new(q, &integer(1), 0));
        assert_eq!(r, BallRelation::Equal);
        let r = Ball::unit(q).relation(&Ball::new(q, &rational(1, 3), 0));
        assert_eq!(r, BallRelation::Disjoint);
        let r = Ball::new(q, &integer(0), -1).relation(&Ball::unit(q));
        assert_eq!(r, BallRelation::FirstInsideSecond);
        let r = Ball::unit(q).relation(&Ball::new(q, &integer(2), -1));
        assert_eq!(r, BallRelation::SecondInsideFirst);
    }

    #[test]
    fn try_relation_rejects_mixed_primes() {
        let err = Ball::unit(p(3)).try_relation(&Ball::unit(p(5))).unwrap_err();
        assert_eq!(err, Error::ContextMismatch { left: 3, right: 5 });
    }

    #[test]
    fn split_examples() {
        let kids = Ball::unit(p(3)).split();
        assert_eq!(
            kids,
            vec![
                Ball::new(p(3), &integer(0), -1),
                Ball::new(p(3), &integer(1), -1),
                Ball::new(p(3), &integer(2), -1),
            ]
        );
        for k in &kids {
            assert_eq!(k.measure(), rational(1, 3));
            assert_eq!(k.parent(), Ball::unit(p(3)));
        }
        assert_eq!(Ball::new(p(5), &rational(1, 25), 1).split().len(), 5);
    }

    #[test]
    fn measures() {
        assert_eq!(Ball::unit(p(7)).measure(), integer(1));
        assert_eq!(Ball::zero_centered(p(3), 1).measure(), integer(3));
        assert_eq!(Ball::new(p(5), &rational(2, 7), -2).measure(), rational(1, 25));
    }

    #[test]
    fn enclosing_radius() {
        assert_eq!(Ball::unit(p(3)).enclosing_radius(), 0);
        assert_eq!(Ball::new(p(3), &rational(1, 3), 0).enclosing_radius(), 1);
        assert_eq!(Ball::new(p(3), &rational(1, 9), -2).enclosing_radius(), 2);
        assert_eq!(Ball::new(p(3), &integer(2), -2).enclosing_radius(), 0);
        assert_eq!(Ball::new(p(3), &integer(9), -3).enclosing_radius(), -2);
    }

    #[test]
    fn samples_stay_in_ball_and_are_deterministic() {
        let b = Ball::new(p(5), &rational(3, 25), -1);
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        for depth in [1, 3, 40] {
            let x = b.sample_uniform(depth, &mut r1);
            assert!(b.contains(&x));
            assert_eq!(x, b.sample_uniform(depth, &mut r2));
        }
    }
}
