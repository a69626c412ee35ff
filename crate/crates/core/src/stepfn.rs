//! Locally constant functions with a prescribed value at infinity.
//!
//! A [`StepFunction`] is stored as an exact partition of the smallest
//! zero-centered ball `B(0; R)` outside of which it equals its tail value.
//! Adjacent sibling pieces with equal values are always merged, so the
//! representation is canonical and structural equality is function equality.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::clopen::{ball_minus, check_disjoint, shell_balls, ClopenSet};
use crate::error::{Error, Result};
use crate::padic::{assert_same_prime, check_same_prime, to_f64, Ball, BallRelation, Prime, Rational};

/// Whether values are p-adic coefficients or real weights. Both are stored as
/// exact rationals; the kind only guards against mixing them up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ValueKind {
    Padic,
    Real,
}

impl ValueKind {
    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Padic => "p-adic",
            ValueKind::Real => "real",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOp {
    Add,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    /// `v -> e^v - 1`
    Expm1,
    /// `v -> |v - 1|`
    AbsDev,
    /// `v -> 1 - v`
    OneMinus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TransformIntegral {
    Exact(Rational),
    Float(f64),
}

impl TransformIntegral {
    pub fn as_f64(&self) -> f64 {
        match self {
            TransformIntegral::Exact(q) => to_f64(q),
            TransformIntegral::Float(x) => *x,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StepFunction {
    prime: Prime,
    kind: ValueKind,
    /// `None` for constant functions, which carry no pieces.
    radius: Option<i64>,
    pieces: Vec<(Ball, Rational)>,
    tail: Rational,
}

/// Two functions on one shared partition of `B(0; radius)`.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub radius: Option<i64>,
    pub pieces: Vec<(Ball, Rational, Rational)>,
    pub tails: (Rational, Rational),
}

impl StepFunction {
    /// `make_step`: parts must be pairwise disjoint; everything else takes the
    /// tail value.
    pub fn new(
        prime: Prime,
        kind: ValueKind,
        parts: Vec<(Ball, Rational)>,
        tail: Rational,
    ) -> Result<Self> {
        for (b, _) in &parts {
            check_same_prime(prime, b.prime())?;
        }
        let balls: Vec<Ball> = parts.iter().map(|(b, _)| b.clone()).collect();
        check_disjoint(&balls)?;
        let parts: Vec<(Ball, Rational)> = parts.into_iter().filter(|(_, v)| *v != tail).collect();
        let Some(radius) = parts.iter().map(|(b, _)| b.enclosing_radius().max(0)).max() else {
            return Ok(Self::constant(prime, kind, tail));
        };
        let holes: Vec<Ball> = parts.iter().map(|(b, _)| b.clone()).collect();
        let mut pads = Vec::new();
        ball_minus(&Ball::zero_centered(prime, radius), &holes, &mut pads);
        let mut pieces = parts;
        pieces.extend(pads.into_iter().map(|b| (b, tail.clone())));
        Ok(Self::from_partition(prime, kind, radius, pieces, tail))
    }

    pub fn constant(prime: Prime, kind: ValueKind, value: Rational) -> Self {
        StepFunction {
            prime,
            kind,
            radius: None,
            pieces: Vec::new(),
            tail: value,
        }
    }

    /// Real-valued `value * 1_S`.
    pub fn indicator(set: &ClopenSet, value: Rational) -> Self {
        let parts = set.balls().iter().map(|b| (b.clone(), value.clone())).collect();
        Self::new(set.prime(), ValueKind::Real, parts, Rational::zero())
            .expect("clopen balls are disjoint")
    }

    /// Canonicalizes a partition of `B(0; radius)`, `radius >= 0`. The stored
    /// radius is the smallest `R >= 0` with every non-tail piece inside `B(0; R)`.
    pub(crate) fn from_partition(
        prime: Prime,
        kind: ValueKind,
        radius: i64,
        pieces: Vec<(Ball, Rational)>,
        tail: Rational,
    ) -> Self {
        let merged = merge_equal_siblings(prime, pieces);
        let deviating = merged
            .iter()
            .filter(|(_, v)| *v != tail)
            .map(|(b, _)| b.enclosing_radius().max(0))
            .max();
        let Some(r) = deviating else {
            return Self::constant(prime, kind, tail);
        };
        debug_assert!(r <= radius);
        let pieces = merged
            .into_iter()
            .filter(|(b, _)| b.enclosing_radius() <= r)
            .collect();
        StepFunction {
            prime,
            kind,
            radius: Some(r),
            pieces,
            tail,
        }
    }

    /// `tail + sum_i w_i 1_{B_i}` for arbitrary (possibly nested or repeated)
    /// balls `B_i`.
    pub fn from_weighted_balls(
        prime: Prime,
        kind: ValueKind,
        weighted: &[(Ball, Rational)],
        tail: Rational,
    ) -> Self {
        let distinct: BTreeSet<Ball> = weighted.iter().map(|(b, _)| b.clone()).collect();
        let Some(radius) = distinct.iter().map(|b| b.enclosing_radius().max(0)).max() else {
            return Self::constant(prime, kind, tail);
        };
        let distinct: Vec<Ball> = distinct.into_iter().collect();
        let mut atoms = Vec::new();
        for b in &distinct {
            let inner: Vec<Ball> = distinct
                .iter()
                .filter(|d| d.relation(b) == BallRelation::FirstInsideSecond)
                .cloned()
                .collect();
            ball_minus(b, &inner, &mut atoms);
        }
        let mut pieces: Vec<(Ball, Rational)> = atoms
            .into_iter()
            .map(|atom| {
                let v = weighted
                    .iter()
                    .filter(|(d, _)| d.contains(atom.center()))
                    .fold(tail.clone(), |acc, (_, w)| acc + w);
                (atom, v)
            })
            .collect();
        let mut pads = Vec::new();
        ball_minus(&Ball::zero_centered(prime, radius), &distinct, &mut pads);
        pieces.extend(pads.into_iter().map(|b| (b, tail.clone())));
        Self::from_partition(prime, kind, radius, pieces, tail)
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: ValueKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn tail(&self) -> &Rational {
        &self.tail
    }

    /// Radius exponent `R` of the padded partition, `None` if constant.
    pub fn radius(&self) -> Option<i64> {
        self.radius
    }

    /// The full padded partition, pad balls included.
    pub fn pieces(&self) -> &[(Ball, Rational)] {
        &self.pieces
    }

    /// Pieces whose value differs from the tail.
    pub fn parts(&self) -> impl Iterator<Item = &(Ball, Rational)> {
        self.pieces.iter().filter(move |(_, v)| *v != self.tail)
    }

    pub fn is_constant(&self) -> bool {
        self.radius.is_none()
    }

    pub fn evaluate(&self, x: &Rational) -> &Rational {
        if let Some(r) = self.radius {
            if Ball::zero_centered(self.prime, r).contains(x) {
                for (b, v) in &self.pieces {
                    if b.contains(x) {
                        return v;
                    }
                }
            }
        }
        &self.tail
    }

    /// Partition of `B(0; outer)` (for `outer >= radius`) with the shell
    /// beyond the stored partition carrying the tail.
    pub fn pieces_over(&self, outer: i64) -> Vec<(Ball, Rational)> {
        match self.radius {
            None => vec![(Ball::zero_centered(self.prime, outer), self.tail.clone())],
            Some(r) => {
                assert!(outer >= r, "cannot restrict a partition to a smaller ball");
                let mut out = self.pieces.clone();
                out.extend(
                    shell_balls(self.prime, r, outer)
                        .into_iter()
                        .map(|b| (b, self.tail.clone())),
                );
                out
            }
        }
    }

    pub fn finest_radius(&self) -> Option<i64> {
        self.pieces.iter().map(|(b, _)| b.radius_exp()).min()
    }

    pub fn common_refinement(&self, other: &StepFunction) -> Refinement {
        assert_same_prime(self.prime, other.prime);
        let tails = (self.tail.clone(), other.tail.clone());
        let radius = match (self.radius, other.radius) {
            (None, None) => None,
            (a, b) => a.max(b),
        };
        let Some(r) = radius else {
            return Refinement {
                radius,
                pieces: Vec::new(),
                tails,
            };
        };
        let left = self.pieces_over(r);
        let right = other.pieces_over(r);
        let mut pieces = Vec::with_capacity(left.len().max(right.len()));
        for (a, va) in &left {
            for (b, vb) in &right {
                if let Some(c) = a.intersection(b) {
                    pieces.push((c, va.clone(), vb.clone()));
                }
            }
        }
        Refinement {
            radius,
            pieces,
            tails,
        }
    }

    /// Pointwise `op` on the common refinement.
    pub fn combine(&self, other: &StepFunction, op: StepOp) -> Result<StepFunction> {
        check_same_prime(self.prime, other.prime)?;
        if self.kind != other.kind {
            return Err(Error::KindMismatch {
                expected: self.kind.name(),
                found: other.kind.name(),
            });
        }
        let apply = |x: &Rational, y: &Rational| match op {
            StepOp::Add => x + y,
            StepOp::Mul => x * y,
        };
        Ok(self.zip_with(other, apply))
    }

    /// Pointwise binary map on the common refinement (kinds are not checked).
    pub fn zip_with(
        &self,
        other: &StepFunction,
        f: impl Fn(&Rational, &Rational) -> Rational,
    ) -> StepFunction {
        let refinement = self.common_refinement(other);
        let tail = f(&refinement.tails.0, &refinement.tails.1);
        match refinement.radius {
            None => Self::constant(self.prime, self.kind, tail),
            Some(r) => {
                let pieces = refinement
                    .pieces
                    .iter()
                    .map(|(b, x, y)| (b.clone(), f(x, y)))
                    .collect();
                Self::from_partition(self.prime, self.kind, r, pieces, tail)
            }
        }
    }

    pub fn map(&self, f: impl Fn(&Rational) -> Rational) -> StepFunction {
        let tail = f(&self.tail);
        match self.radius {
            None => Self::constant(self.prime, self.kind, tail),
            Some(r) => {
                let pieces = self.pieces.iter().map(|(b, v)| (b.clone(), f(v))).collect();
                Self::from_partition(self.prime, self.kind, r, pieces, tail)
            }
        }
    }

    pub fn add(&self, other: &StepFunction) -> Result<StepFunction> {
        self.combine(other, StepOp::Add)
    }

    pub fn mul(&self, other: &StepFunction) -> Result<StepFunction> {
        self.combine(other, StepOp::Mul)
    }

    pub fn scale(&self, c: &Rational) -> StepFunction {
        self.map(|v| v * c)
    }

    /// `{x : F(x) != tail}`.
    pub fn deviation_support(&self) -> ClopenSet {
        ClopenSet::canonical(self.prime, self.parts().map(|(b, _)| b.clone()).collect())
    }

    /// `x -> F(x - h)`: every ball center moves by `h`.
    pub fn translate(&self, h: &Rational) -> StepFunction {
        let parts = self.parts().map(|(b, v)| (b.translate(h), v.clone())).collect();
        Self::new(self.prime, self.kind, parts, self.tail.clone()).expect("translation keeps disjointness")
    }

    fn require_real(&self) -> Result<()> {
        if self.kind == ValueKind::Real {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: ValueKind::Real.name(),
                found: self.kind.name(),
            })
        }
    }

    /// `(value, measure)` for every piece of `F` restricted to `S`, with the
    /// tail region included.
    pub fn restricted_pieces(&self, set: &ClopenSet) -> Vec<(Ball, Rational)> {
        assert_same_prime(self.prime, set.prime());
        let Some(outer) = [self.radius, set.enclosing_radius()].into_iter().flatten().max() else {
            return Vec::new();
        };
        let partition = self.pieces_over(outer);
        let mut out = Vec::new();
        for s in set.balls() {
            for (b, v) in &partition {
                if let Some(c) = s.intersection(b) {
                    out.push((c, v.clone()));
                }
            }
        }
        out
    }

    /// `∫_S F dm`, exact.
    pub fn integrate(&self, set: &ClopenSet) -> Result<Rational> {
        self.require_real()?;
        Ok(self
            .restricted_pieces(set)
            .iter()
            .fold(Rational::zero(), |acc, (b, v)| acc + v * b.measure()))
    }

    /// `∫_{Q_p} F dm`; only finite when the tail is 0.
    pub fn integrate_total(&self) -> Result<Rational> {
        self.require_real()?;
        if !self.tail.is_zero() {
            return Err(Error::UnboundedIntegral(crate::literal::format_rational(&self.tail)));
        }
        Ok(self
            .pieces
            .iter()
            .fold(Rational::zero(), |acc, (b, v)| acc + v * b.measure()))
    }

    /// Exact Haar weight of every value taken on `S`.
    pub fn value_weights(&self, set: &ClopenSet) -> BTreeMap<Rational, Rational> {
        let mut weights: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (b, v) in self.restricted_pieces(set) {
            *weights.entry(v).or_insert_with(Rational::zero) += b.measure();
        }
        weights
    }

    /// `∫_S t(F) dm`. Rational transforms are exact; `Expm1` evaluates one
    /// exponential per distinct value.
    pub fn integrate_transform(&self, set: &ClopenSet, t: Transform) -> Result<TransformIntegral> {
        self.require_real()?;
        let weights = self.value_weights(set);
        Ok(match t {
            Transform::Expm1 => TransformIntegral::Float(
                weights
                    .iter()
                    .map(|(v, w)| to_f64(v).exp_m1() * to_f64(w))
                    .sum(),
            ),
            Transform::AbsDev => TransformIntegral::Exact(
                weights
                    .iter()
                    .fold(Rational::zero(), |acc, (v, w)| acc + (v - Rational::one()).abs() * w),
            ),
            Transform::OneMinus => TransformIntegral::Exact(
                weights
                    .iter()
                    .fold(Rational::zero(), |acc, (v, w)| acc + (Rational::one() - v) * w),
            ),
        })
    }
}

/// Bottom-up merge of complete sibling families that share one value.
fn merge_equal_siblings(prime: Prime, pieces: Vec<(Ball, Rational)>) -> Vec<(Ball, Rational)> {
    let mut map: BTreeMap<Ball, Rational> = pieces.into_iter().collect();
    let p = prime.get() as usize;
    loop {
        let mut families: HashMap<Ball, (usize, Option<Rational>, bool)> = HashMap::new();
        for (b, v) in &map {
            let e = families.entry(b.parent()).or_insert((0, None, true));
            e.0 += 1;
            match &e.1 {
                None => e.1 = Some(v.clone()),
                Some(w) if w != v => e.2 = false,
                _ => {}
            }
        }
        let full: Vec<(Ball, Rational)> = families
            .into_iter()
            .filter(|(_, (n, _, same))| *n == p && *same)
            .map(|(parent, (_, v, _))| (parent, v.expect("nonempty family")))
            .collect();
        if full.is_empty() {
            break;
        }
        for (parent, v) in full {
            for child in parent.split() {
                map.remove(&child);
            }
            map.insert(parent, v);
        }
    }
    map.into_iter().collect()
}

impl fmt::Display for StepFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::literal::format_rational;
        write!(f, "{{")?;
        let mut first = true;
        for (b, v) in self.parts() {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{b}: {}", format_rational(v))?;
        }
        if !first {
            write!(f, " ")?;
        }
        write!(f, "| tail {}}}", format_rational(&self.tail))
    }
}
