//! Random generators for test inputs. All sizes are kept small so exact
//! computations on them stay cheap.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::affine::{AffineElement, SectionPair};
use crate::clopen::ClopenSet;
use crate::measure::IntensityMeasure;
use crate::padic::{rational, Ball, Prime, Rational};
use crate::poisson::{CountPredicate, CylinderFunction};
use crate::stepfn::{StepFunction, ValueKind};

/// A nonzero `p^v u / w` with `v` in `lo..=hi` and small units `u`, `w`.
pub fn nonzero_with_valuation<R: Rng + ?Sized>(prime: Prime, lo: i64, hi: i64, rng: &mut R) -> Rational {
    let v = rng.random_range(lo..=hi);
    let u = random_unit_integer(prime, rng);
    let w = random_unit_integer(prime, rng).abs();
    prime.power(v) * Rational::new(u, w)
}

fn random_unit_integer<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> BigInt {
    let p = prime.get() as i64;
    loop {
        let n: i64 = rng.random_range(1..=3 * p + 2);
        if n % p != 0 {
            let sign = if rng.random_bool(0.5) { -1 } else { 1 };
            return BigInt::from(sign * n);
        }
    }
}

/// A p-adic number of valuation at least `lo` (zero with small probability).
pub fn padic<R: Rng + ?Sized>(prime: Prime, lo: i64, rng: &mut R) -> Rational {
    if rng.random_bool(0.1) {
        return Rational::zero();
    }
    nonzero_with_valuation(prime, lo, lo + 3, rng)
}

/// A point of the ball, drawn with a few extra digits.
pub fn point_in<R: Rng + ?Sized>(ball: &Ball, rng: &mut R) -> Rational {
    let depth = rng.random_range(1..=4);
    ball.sample_uniform(depth, rng)
}

pub fn ball<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> Ball {
    let k = rng.random_range(-3..=1);
    Ball::new(prime, &padic(prime, -2, rng), k)
}

/// A partition of `B(0; outer)` obtained by splitting random balls.
pub fn partition<R: Rng + ?Sized>(prime: Prime, outer: i64, max_pieces: usize, rng: &mut R) -> Vec<Ball> {
    let mut pieces = vec![Ball::zero_centered(prime, outer)];
    let p = prime.get() as usize;
    let splits = rng.random_range(0..=max_pieces.saturating_sub(1) / (p - 1));
    for _ in 0..splits {
        let i = rng.random_range(0..pieces.len());
        if pieces[i].radius_exp() <= outer - 3 {
            continue;
        }
        let b = pieces.swap_remove(i);
        pieces.extend(b.split());
    }
    pieces.sort();
    pieces
}

/// A bounded clopen set, possibly empty.
pub fn clopen<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> ClopenSet {
    let outer = rng.random_range(-1..=2);
    let parts = partition(prime, outer, 6, rng);
    let chosen = parts.into_iter().filter(|_| rng.random_bool(0.5)).collect();
    ClopenSet::new(prime, chosen).expect("partition pieces are disjoint")
}

pub fn nonempty_clopen<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> ClopenSet {
    loop {
        let s = clopen(prime, rng);
        if !s.is_empty() {
            return s;
        }
    }
}

fn small_value<R: Rng + ?Sized>(rng: &mut R) -> Rational {
    rational(rng.random_range(-4..=4), rng.random_range(1..=4))
}

/// A real test function with tail 0 and values in `[-1, 1]`.
pub fn test_function<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> StepFunction {
    let outer = rng.random_range(0..=2);
    let parts = partition(prime, outer, 6, rng)
        .into_iter()
        .map(|b| {
            let v = if rng.random_bool(0.3) {
                Rational::zero()
            } else {
                small_value(rng) / BigInt::from(4)
            };
            (b, v)
        })
        .collect();
    StepFunction::new(prime, ValueKind::Real, parts, Rational::zero()).expect("partition")
}

/// A random element: pieces of a partition carry arbitrary pairs or the
/// identity.
pub fn affine<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> AffineElement {
    let outer = rng.random_range(0..=2);
    let pieces = partition(prime, outer, 5, rng)
        .into_iter()
        .map(|b| {
            if rng.random_bool(0.25) {
                return (b, SectionPair::identity());
            }
            let a = if rng.random_bool(0.3) {
                Rational::one()
            } else {
                nonzero_with_valuation(prime, -1, 1, rng)
            };
            let shift = if rng.random_bool(0.3) {
                Rational::zero()
            } else {
                padic(prime, -2, rng)
            };
            (b, SectionPair::new(a, shift).expect("nonzero a"))
        })
        .collect();
    AffineElement::from_pieces(prime, pieces).expect("partition pieces")
}

/// A random unit `a` with `|a|_p = 1`.
pub fn unit<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> Rational {
    let u = random_unit_integer(prime, rng);
    let w = random_unit_integer(prime, rng).abs();
    Rational::new(u, w)
}

/// An element whose every piece maps its ball onto itself: unit `a_k` and
/// `b_k = c_k (a_k - 1) + β_k` with `|β_k|_p <= p^{k}`.
pub fn measure_preserving<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> AffineElement {
    let outer = rng.random_range(0..=2);
    let balls = partition(prime, outer, 5, rng);
    measure_preserving_on(prime, balls, rng)
}

/// A measure-preserving element acting only on the given disjoint balls.
pub fn measure_preserving_on<R: Rng + ?Sized>(prime: Prime, balls: Vec<Ball>, rng: &mut R) -> AffineElement {
    let pieces = balls
        .into_iter()
        .map(|b| {
            let a = unit(prime, rng);
            let steps = Rational::from_integer(BigInt::from(rng.random_range(-9..=9)));
            let beta = prime.power(-b.radius_exp()) * steps;
            let shift = b.center() * (&a - Rational::one()) + beta;
            (b, SectionPair::new(a, shift).expect("unit a"))
        })
        .collect();
    AffineElement::from_pieces(prime, pieces).expect("disjoint balls")
}

/// `(1, h 1_B)` with `B` a random ball and `h` an in-ball translation or not.
pub fn localized_shift<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> AffineElement {
    let b = Ball::zero_centered(prime, rng.random_range(0..=2));
    let h = padic(prime, -b.radius_exp(), rng);
    AffineElement::localized_shift(&b, h)
}

/// A count event on pairwise disjoint balls.
pub fn count_event<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> CylinderFunction {
    let outer = rng.random_range(0..=1);
    let parts = partition(prime, outer, 4, rng);
    let n = rng.random_range(1..=parts.len().min(3));
    let chosen: Vec<Ball> = parts.choose_multiple(rng, n).cloned().collect();
    let conditions = chosen
        .into_iter()
        .map(|b| {
            let k = rng.random_range(0..=2);
            let pred = match rng.random_range(0..3) {
                0 => CountPredicate::Exactly(k),
                1 => CountPredicate::AtMost(k),
                _ => CountPredicate::AtLeast(k),
            };
            (ClopenSet::from_ball(b), pred)
        })
        .collect();
    CylinderFunction::count_event(prime, conditions).expect("same prime")
}

/// A count event with Haar probability at least `min_probability`.
pub fn likely_count_event<R: Rng + ?Sized>(prime: Prime, min_probability: f64, rng: &mut R) -> CylinderFunction {
    let haar = IntensityMeasure::haar(prime);
    loop {
        let e = count_event(prime, rng);
        if crate::poisson::expect_exact(&e, &haar).is_ok_and(|v| v >= min_probability) {
            return e;
        }
    }
}

/// A nonnegative density with tail 1.
pub fn density<R: Rng + ?Sized>(prime: Prime, rng: &mut R) -> StepFunction {
    let outer = rng.random_range(0..=1);
    let parts = partition(prime, outer, 4, rng)
        .into_iter()
        .map(|b| (b, rational(rng.random_range(0..=8), rng.random_range(1..=4))))
        .collect();
    StepFunction::new(prime, ValueKind::Real, parts, Rational::one()).expect("partition")
}
