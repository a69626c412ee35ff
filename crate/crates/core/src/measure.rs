//! Intensity measures `ρ·m` with step densities and their exact pushforwards.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::affine::{AffineElement, SectionPair};
use crate::clopen::ClopenSet;
use crate::error::{Error, Result};
use crate::padic::{assert_same_prime, Ball, Prime, Rational};
use crate::stepfn::{StepFunction, Transform, TransformIntegral, ValueKind};

/// `m(B(c; k)) = p^k`.
pub fn ball_measure(ball: &Ball) -> Rational {
    ball.measure()
}

/// `C = a^{-1}(B + b)`, the image of `B` under `x -> (x + b)/a`.
pub fn image_ball(ball: &Ball, pair: &SectionPair) -> Ball {
    pair.image_ball(ball)
}

/// A measure `ρ(x) m(dx)` whose density is nonnegative and equals 1 outside
/// a compact set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntensityMeasure {
    density: StepFunction,
}

impl IntensityMeasure {
    pub fn new(density: StepFunction) -> Result<Self> {
        if density.kind() != ValueKind::Real {
            return Err(Error::KindMismatch {
                expected: ValueKind::Real.name(),
                found: density.kind().name(),
            });
        }
        if !density.tail().is_one() {
            return Err(Error::InvalidMeasure("density must have tail 1".into()));
        }
        if let Some((b, _)) = density.pieces().iter().find(|(_, v)| v.is_negative()) {
            return Err(Error::InvalidMeasure(format!("negative density on {b}")));
        }
        Ok(IntensityMeasure { density })
    }

    /// Haar measure, normalized by `m(Z_p) = 1`.
    pub fn haar(prime: Prime) -> Self {
        IntensityMeasure {
            density: StepFunction::constant(prime, ValueKind::Real, Rational::one()),
        }
    }

    pub fn prime(&self) -> Prime {
        self.density.prime()
    }

    pub fn density(&self) -> &StepFunction {
        &self.density
    }

    pub fn is_haar(&self) -> bool {
        self.density.is_constant()
    }

    pub fn mass(&self, set: &ClopenSet) -> Rational {
        self.density.integrate(set).expect("real density")
    }

    /// The density of `g_*(ρ m)`, i.e. the measure with
    /// `∫ f d(g_* μ) = ∫ f(g(x) x) ρ(x) m(dx)`.
    ///
    /// Each piece `(B_k, a_k, b_k)` of `g` carries `ρ|_{B_k}` to
    /// `C_k = a_k^{-1}(B_k + b_k)` scaled by `|a_k|_p`; contributions of
    /// overlapping images add up.
    pub fn pushforward(&self, g: &AffineElement) -> IntensityMeasure {
        assert_same_prime(self.prime(), g.prime());
        let prime = self.prime();
        let Some(outer) = [g.radius(), self.density.radius()].into_iter().flatten().max() else {
            return self.clone();
        };
        let density_pieces = self.density.pieces_over(outer);
        let mut weighted = vec![(Ball::zero_centered(prime, outer), -Rational::one())];
        for (ball, pair) in g.pieces_over(outer) {
            let scale = prime.abs(&pair.a);
            for (piece, v) in &density_pieces {
                if let Some(part) = ball.intersection(piece) {
                    if !v.is_zero() {
                        weighted.push((pair.image_ball(&part), &scale * v));
                    }
                }
            }
        }
        let density =
            StepFunction::from_weighted_balls(prime, ValueKind::Real, &weighted, Rational::one());
        assert!(
            density.pieces().iter().all(|(_, v)| !v.is_negative()),
            "pushforward produced a negative density"
        );
        IntensityMeasure { density }
    }

    /// `∫ |ρ - 1| dm`, finite because `ρ = 1` off a compact set.
    pub fn l1_deviation(&self) -> Rational {
        match self
            .density
            .integrate_transform(&self.density.deviation_support(), Transform::AbsDev)
            .expect("real density")
        {
            TransformIntegral::Exact(q) => q,
            TransformIntegral::Float(_) => unreachable!("AbsDev is exact"),
        }
    }

    /// `∫ (ρ - 1) dm`.
    pub fn mass_defect(&self) -> Rational {
        let support = self.density.deviation_support();
        self.density.integrate(&support).expect("real density") - support.measure()
    }

    /// `∫ |ρ - σ| dm` between two intensity measures.
    pub fn l1_distance(&self, other: &IntensityMeasure) -> Rational {
        let r = self.density.common_refinement(&other.density);
        r.pieces
            .iter()
            .fold(Rational::zero(), |acc, (b, x, y)| acc + (x - y).abs() * b.measure())
    }
}

/// `‖m - g_*((g^{-1})_* m)‖_1`: zero iff pushing Haar through `g^{-1}` and
/// then `g` returns Haar.
pub fn roundtrip_defect(g: &AffineElement) -> Rational {
    let haar = IntensityMeasure::haar(g.prime());
    haar.pushforward(&g.inverse()).pushforward(g).l1_distance(&haar)
}

/// `‖(g_2 g_1)_* m - (g_1)_*((g_2)_* m)‖_1` with `g_2 g_1 = multiply(g2, g1)`.
pub fn composition_duality_defect(g2: &AffineElement, g1: &AffineElement) -> Rational {
    let haar = IntensityMeasure::haar(g1.prime());
    let product = haar.pushforward(&g2.multiply(g1));
    let iterated = haar.pushforward(g2).pushforward(g1);
    product.l1_distance(&iterated)
}

impl fmt::Display for IntensityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.density.fmt(f)
    }
}
