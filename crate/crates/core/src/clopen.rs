//! Finite disjoint unions of balls.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::padic::{assert_same_prime, Ball, BallRelation, Prime, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Subtract,
}

/// A compact open set stored as pairwise disjoint balls in canonical form:
/// complete sibling families are merged into their parent and the balls are
/// sorted by `(radius_exp, center)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClopenSet {
    prime: Prime,
    balls: Vec<Ball>,
}

impl ClopenSet {
    pub fn empty(prime: Prime) -> Self {
        ClopenSet {
            prime,
            balls: Vec::new(),
        }
    }

    pub fn from_ball(ball: Ball) -> Self {
        ClopenSet {
            prime: ball.prime(),
            balls: vec![ball],
        }
    }

    /// Builds a set from balls that must be pairwise disjoint.
    pub fn new(prime: Prime, balls: Vec<Ball>) -> Result<Self> {
        for b in &balls {
            crate::padic::check_same_prime(prime, b.prime())?;
        }
        check_disjoint(&balls)?;
        Ok(Self::canonical(prime, balls))
    }

    /// Union of arbitrary (possibly nested) balls.
    pub fn union_of(prime: Prime, balls: Vec<Ball>) -> Self {
        for b in &balls {
            assert_same_prime(prime, b.prime());
        }
        Self::canonical(prime, drop_nested(balls))
    }

    /// Canonicalizes pairwise disjoint balls.
    pub(crate) fn canonical(prime: Prime, balls: Vec<Ball>) -> Self {
        let mut set: BTreeSet<Ball> = balls.into_iter().collect();
        let p = prime.get() as usize;
        loop {
            let mut families: HashMap<Ball, usize> = HashMap::new();
            for b in &set {
                *families.entry(b.parent()).or_default() += 1;
            }
            let full: Vec<Ball> = families
                .into_iter()
                .filter(|(_, n)| *n == p)
                .map(|(parent, _)| parent)
                .collect();
            if full.is_empty() {
                break;
            }
            for parent in full {
                for child in parent.split() {
                    set.remove(&child);
                }
                set.insert(parent);
            }
        }
        ClopenSet {
            prime,
            balls: set.into_iter().collect(),
        }
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.balls.iter().any(|b| b.contains(x))
    }

    pub fn measure(&self) -> Rational {
        self.balls
            .iter()
            .fold(Rational::zero(), |acc, b| acc + b.measure())
    }

    /// Smallest `R` with `self ⊆ B(0; R)`, or `None` for the empty set.
    pub fn enclosing_radius(&self) -> Option<i64> {
        self.balls.iter().map(Ball::enclosing_radius).max()
    }

    pub fn combine(&self, other: &ClopenSet, op: SetOp) -> ClopenSet {
        match op {
            SetOp::Union => self.union(other),
            SetOp::Intersect => self.intersect(other),
            SetOp::Subtract => self.subtract(other),
        }
    }

    pub fn union(&self, other: &ClopenSet) -> ClopenSet {
        assert_same_prime(self.prime, other.prime);
        let all = self.balls.iter().chain(&other.balls).cloned().collect();
        ClopenSet::canonical(self.prime, drop_nested(all))
    }

    pub fn intersect(&self, other: &ClopenSet) -> ClopenSet {
        assert_same_prime(self.prime, other.prime);
        let mut out = Vec::new();
        for a in &self.balls {
            for b in &other.balls {
                if let Some(c) = a.intersection(b) {
                    out.push(c);
                }
            }
        }
        ClopenSet::canonical(self.prime, out)
    }

    pub fn subtract(&self, other: &ClopenSet) -> ClopenSet {
        assert_same_prime(self.prime, other.prime);
        let mut out = Vec::new();
        for a in &self.balls {
            ball_minus(a, &other.balls, &mut out);
        }
        ClopenSet::canonical(self.prime, out)
    }

    pub fn is_subset_of(&self, other: &ClopenSet) -> bool {
        self.subtract(other).is_empty()
    }

    pub fn is_disjoint_from(&self, other: &ClopenSet) -> bool {
        self.intersect(other).is_empty()
    }

    pub fn translate(&self, h: &Rational) -> ClopenSet {
        ClopenSet::canonical(self.prime, self.balls.iter().map(|b| b.translate(h)).collect())
    }

    /// The minimum radius exponent over the listed balls.
    pub fn finest_radius(&self) -> Option<i64> {
        self.balls.iter().map(Ball::radius_exp).min()
    }
}

impl fmt::Display for ClopenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.balls.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "}}")
    }
}

pub(crate) fn check_disjoint(balls: &[Ball]) -> Result<()> {
    for (i, a) in balls.iter().enumerate() {
        for b in &balls[i + 1..] {
            if a.relation(b) != BallRelation::Disjoint {
                return Err(Error::OverlappingParts(a.to_string(), b.to_string()));
            }
        }
    }
    Ok(())
}

/// Keeps only the maximal balls; the survivors are pairwise disjoint.
fn drop_nested(mut balls: Vec<Ball>) -> Vec<Ball> {
    balls.sort_by(|a, b| b.radius_exp().cmp(&a.radius_exp()));
    let mut kept: Vec<Ball> = Vec::new();
    for b in balls {
        if !kept.iter().any(|k| b.is_within(k)) {
            kept.push(b);
        }
    }
    kept
}

/// Appends the balls of `a \ ∪ holes`, splitting `a` until every piece is
/// either inside a hole or clear of all of them.
pub(crate) fn ball_minus(a: &Ball, holes: &[Ball], out: &mut Vec<Ball>) {
    let mut inside = Vec::new();
    for h in holes {
        match a.relation(h) {
            BallRelation::Equal | BallRelation::FirstInsideSecond => return,
            BallRelation::SecondInsideFirst => inside.push(h.clone()),
            BallRelation::Disjoint => {}
        }
    }
    if inside.is_empty() {
        out.push(a.clone());
        return;
    }
    for child in a.split() {
        ball_minus(&child, &inside, out);
    }
}

/// `B(0; outer) \ B(0; inner)` for `inner <= outer`, as balls.
pub fn shell_balls(prime: Prime, inner: i64, outer: i64) -> Vec<Ball> {
    let mut out = Vec::new();
    for j in inner + 1..=outer {
        let parent = Ball::zero_centered(prime, j);
        out.extend(parent.split().into_iter().skip(1));
    }
    out
}
