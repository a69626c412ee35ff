//! The group of pairs `g = (a, b)` of locally constant functions, acting on
//! points by `x -> (x + b(x)) / a(x)`.

use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::clopen::ClopenSet;
use crate::error::{Error, Result};
use crate::padic::{assert_same_prime, check_same_prime, Ball, BallRelation, Prime, Rational};
use crate::stepfn::{StepFunction, ValueKind};

/// A constant pair `(a, b)`, an element of the section group `G_x`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SectionPair {
    #[serde(serialize_with = "crate::literal::serialize_rational")]
    pub a: Rational,
    #[serde(serialize_with = "crate::literal::serialize_rational")]
    pub b: Rational,
}

impl SectionPair {
    pub fn new(a: Rational, b: Rational) -> Result<Self> {
        if a.is_zero() {
            return Err(Error::InvalidAffine("a-coefficient must be nonzero".into()));
        }
        Ok(SectionPair { a, b })
    }

    pub fn identity() -> Self {
        SectionPair {
            a: Rational::one(),
            b: Rational::zero(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.a.is_one() && self.b.is_zero()
    }

    /// `(a_2, b_2)(a_1, b_1) = (a_1 a_2, b_2 + a_2 b_1)` with `self = (a_2, b_2)`.
    /// The left factor acts first on points.
    pub fn product(&self, right: &SectionPair) -> SectionPair {
        SectionPair {
            a: &right.a * &self.a,
            b: &self.b + &self.a * &right.b,
        }
    }

    pub fn inverse(&self) -> SectionPair {
        SectionPair {
            a: self.a.recip(),
            b: -(&self.b / &self.a),
        }
    }

    /// `x -> (x + b) / a`.
    pub fn act(&self, x: &Rational) -> Rational {
        (x + &self.b) / &self.a
    }

    /// `y -> a y - b`, the inverse map of [`SectionPair::act`].
    pub fn pull(&self, y: &Rational) -> Rational {
        &self.a * y - &self.b
    }

    /// Image of a ball: `B((c + b)/a; k + v(a))`.
    pub fn image_ball(&self, ball: &Ball) -> Ball {
        let prime = ball.prime();
        let v = prime.valuation(&self.a).expect("nonzero a");
        Ball::new(prime, &self.act(ball.center()), ball.radius_exp() + v)
    }

    /// Preimage of a ball: `a B - b = B(a c - b; k - v(a))`.
    pub fn preimage_ball(&self, ball: &Ball) -> Ball {
        let prime = ball.prime();
        let v = prime.valuation(&self.a).expect("nonzero a");
        Ball::new(prime, &self.pull(ball.center()), ball.radius_exp() - v)
    }
}

/// An element `g = (a, b)` of the infinite-dimensional affine group.
///
/// `a` has tail 1 and never vanishes, `b` has tail 0; both are canonical, so
/// equality of elements is equality of the coefficient functions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineElement {
    a: StepFunction,
    b: StepFunction,
}

impl AffineElement {
    pub fn new(a: StepFunction, b: StepFunction) -> Result<Self> {
        check_same_prime(a.prime(), b.prime())?;
        let a = a.with_kind(ValueKind::Padic);
        let b = b.with_kind(ValueKind::Padic);
        if !a.tail().is_one() {
            return Err(Error::InvalidAffine("a must equal 1 outside a compact set".into()));
        }
        if !b.tail().is_zero() {
            return Err(Error::InvalidAffine("b must vanish outside a compact set".into()));
        }
        if let Some((ball, _)) = a.pieces().iter().find(|(_, v)| v.is_zero()) {
            return Err(Error::InvalidAffine(format!("a vanishes on {ball}")));
        }
        Ok(AffineElement { a, b })
    }

    pub fn identity(prime: Prime) -> Self {
        AffineElement {
            a: StepFunction::constant(prime, ValueKind::Padic, Rational::one()),
            b: StepFunction::constant(prime, ValueKind::Padic, Rational::zero()),
        }
    }

    /// `(1, h 1_B)`.
    pub fn localized_shift(ball: &Ball, h: Rational) -> Self {
        let prime = ball.prime();
        let b = StepFunction::new(prime, ValueKind::Padic, vec![(ball.clone(), h)], Rational::zero())
            .expect("single ball");
        Self::identity(prime).with_b(b)
    }

    fn with_b(mut self, b: StepFunction) -> Self {
        self.b = b;
        self
    }

    /// Builds `g` from constant pairs on disjoint balls.
    pub fn from_pieces(prime: Prime, pieces: Vec<(Ball, SectionPair)>) -> Result<Self> {
        let a_parts = pieces.iter().map(|(b, s)| (b.clone(), s.a.clone())).collect();
        let b_parts = pieces.into_iter().map(|(b, s)| (b, s.b)).collect();
        Self::new(
            StepFunction::new(prime, ValueKind::Padic, a_parts, Rational::one())?,
            StepFunction::new(prime, ValueKind::Padic, b_parts, Rational::zero())?,
        )
    }

    pub fn prime(&self) -> Prime {
        self.a.prime()
    }

    pub fn a(&self) -> &StepFunction {
        &self.a
    }

    pub fn b(&self) -> &StepFunction {
        &self.b
    }

    pub fn is_identity(&self) -> bool {
        self.a.is_constant() && self.b.is_constant()
    }

    /// `R` such that `g = (1, 0)` outside `B(0; R)`.
    pub fn radius(&self) -> Option<i64> {
        match (self.a.radius(), self.b.radius()) {
            (None, None) => None,
            (x, y) => x.max(y),
        }
    }

    /// The shared padded partition of `B(0; radius)`.
    pub fn pieces(&self) -> Vec<(Ball, SectionPair)> {
        match self.radius() {
            None => Vec::new(),
            Some(r) => self.pieces_over(r),
        }
    }

    /// The shared partition extended to `B(0; outer)`.
    pub fn pieces_over(&self, outer: i64) -> Vec<(Ball, SectionPair)> {
        let refinement = self.a.common_refinement(&self.b);
        match refinement.radius {
            None => vec![(Ball::zero_centered(self.prime(), outer), SectionPair::identity())],
            Some(r) => {
                let mut out: Vec<(Ball, SectionPair)> = refinement
                    .pieces
                    .into_iter()
                    .map(|(ball, a, b)| (ball, SectionPair { a, b }))
                    .collect();
                out.extend(
                    crate::clopen::shell_balls(self.prime(), r, outer)
                        .into_iter()
                        .map(|b| (b, SectionPair::identity())),
                );
                out
            }
        }
    }

    /// `left * right = (a_right a_left, b_left + a_left b_right)`.
    pub fn multiply(&self, right: &AffineElement) -> AffineElement {
        assert_same_prime(self.prime(), right.prime());
        let a = right.a.zip_with(&self.a, |x, y| x * y);
        let b = self.b.zip_with(&self.a.zip_with(&right.b, |x, y| x * y), |x, y| x + y);
        AffineElement { a, b }
    }

    /// `g^{-1} = (a^{-1}, -b a^{-1})`.
    pub fn inverse(&self) -> AffineElement {
        let a = self.a.map(|v| v.recip());
        let b = self.b.zip_with(&self.a, |b, a| -(b / a));
        AffineElement { a, b }
    }

    /// The section `g(x) = (a(x), b(x))`.
    pub fn section(&self, x: &Rational) -> SectionPair {
        SectionPair {
            a: self.a.evaluate(x).clone(),
            b: self.b.evaluate(x).clone(),
        }
    }

    /// `gx = (x + b(x)) / a(x)`.
    pub fn act_point(&self, x: &Rational) -> Rational {
        self.section(x).act(x)
    }

    /// `(gf)(x) = f(g(x) x)`, computed piece by piece.
    pub fn act_function(&self, f: &StepFunction) -> StepFunction {
        assert_same_prime(self.prime(), f.prime());
        let Some(outer) = [self.radius(), f.radius()].into_iter().flatten().max() else {
            return f.clone();
        };
        let pieces = self.pieces_over(outer);
        let images: Vec<Ball> = pieces.iter().map(|(b, s)| s.image_ball(b)).collect();
        let reach = images
            .iter()
            .map(Ball::enclosing_radius)
            .max()
            .unwrap_or(outer)
            .max(outer);
        let f_pieces = f.pieces_over(reach);
        let mut parts = Vec::new();
        for ((ball, pair), image) in pieces.iter().zip(&images) {
            for (c, v) in &f_pieces {
                match image.relation(c) {
                    BallRelation::Equal | BallRelation::FirstInsideSecond => {
                        parts.push((ball.clone(), v.clone()));
                        break;
                    }
                    BallRelation::SecondInsideFirst => {
                        parts.push((pair.preimage_ball(c), v.clone()));
                    }
                    BallRelation::Disjoint => {}
                }
            }
        }
        StepFunction::from_partition(f.prime(), f.kind(), outer, parts, f.tail().clone())
    }

    /// `{x : g(x) x ∈ S}`.
    pub fn preimage_clopen(&self, set: &ClopenSet) -> ClopenSet {
        self.act_function(&StepFunction::indicator(set, Rational::one()))
            .deviation_support()
    }

    /// Moves every point; the image may contain repeated points.
    pub fn act_configuration(&self, points: &[Rational]) -> (Vec<Rational>, bool) {
        let images: Vec<Rational> = points.iter().map(|x| self.act_point(x)).collect();
        let mut sorted = images.clone();
        sorted.sort();
        let collision = sorted.windows(2).any(|w| w[0] == w[1]);
        (images, collision)
    }

    /// `(h, B)` if `g = (1, h 1_B)`; `h = 0` and `B = None` for the identity.
    pub fn as_localized_shift(&self) -> Option<(Rational, Option<Ball>)> {
        if !self.a.is_constant() {
            return None;
        }
        let parts: Vec<&(Ball, Rational)> = self.b.parts().collect();
        let support = self.b.deviation_support();
        match parts.first() {
            None => Some((Rational::zero(), None)),
            Some((_, h)) => {
                if parts.iter().any(|(_, v)| v != h) || support.balls().len() != 1 {
                    return None;
                }
                Some((h.clone(), Some(support.balls()[0].clone())))
            }
        }
    }
}

/// Where `V_{g1} V_{g2} f` and `V_{g1 g2} f` disagree:
/// `{x : f(g2(g1 x)) != f((g1 g2)(x) x)}`.
pub fn composition_defect(g1: &AffineElement, g2: &AffineElement, f: &StepFunction) -> ClopenSet {
    let iterated = g1.act_function(&g2.act_function(f));
    let product = g1.multiply(g2).act_function(f);
    let r = iterated.common_refinement(&product);
    let balls = r
        .pieces
        .into_iter()
        .filter(|(_, x, y)| x != y)
        .map(|(b, _, _)| b)
        .collect();
    // Tails agree: both are f's tail.
    ClopenSet::canonical(f.prime(), balls)
}

impl fmt::Display for AffineElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "aff(a = {}, b = {})", self.a, self.b)
    }
}
