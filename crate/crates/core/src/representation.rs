//! Radon–Nikodym densities of Poisson measures, the operators `V_g` and
//! `U_g`, and checks of the identities they satisfy.
//!
//! Every check returns a [`CheckReport`]. Reports of kind [`CheckKind::Test`]
//! must pass; reports of kind [`CheckKind::Audit`] record exact defects of
//! identities that fail for some elements.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::affine::AffineElement;
use crate::clopen::ClopenSet;
use crate::error::{Error, Result};
use crate::literal::format_rational;
use crate::measure::IntensityMeasure;
use crate::padic::{assert_same_prime, check_same_prime, to_f64, Ball, Prime, Rational};
use crate::poisson::{
    expect_exact, expect_mc_product, mc_plan, monte_carlo, Configuration, CylinderFunction,
    CylinderShape, LaplaceExponent, McEstimate, Resolution, DEFAULT_DEPTH_MARGIN,
};
use crate::stepfn::StepFunction;

pub const EXACT_TOLERANCE: f64 = 1e-9;
pub const MC_SIGMAS: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CheckMode {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "monte-carlo")]
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Test,
    Audit,
}

/// Seed, sample size and tolerances shared by all checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckSettings {
    pub seed: u64,
    pub samples: usize,
    pub depth_margin: u32,
    pub exact_tolerance: f64,
    pub mc_sigmas: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            seed: 0,
            samples: 100_000,
            depth_margin: DEFAULT_DEPTH_MARGIN,
            exact_tolerance: EXACT_TOLERANCE,
            mc_sigmas: MC_SIGMAS,
        }
    }
}

impl CheckSettings {
    pub fn with_seed(self, seed: u64) -> Self {
        CheckSettings { seed, ..self }
    }
}

/// Outcome of one identity check.
///
/// Exact mode: `defect = |lhs - rhs| / max(|lhs|, |rhs|)`. Monte Carlo mode:
/// `defect` is the distance in standard errors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub mode: CheckMode,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// An expectation computed either in closed form or by sampling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Estimate {
    Exact(f64),
    Sampled(McEstimate),
}

impl Estimate {
    pub fn value(&self) -> f64 {
        match self {
            Estimate::Exact(v) => *v,
            Estimate::Sampled(e) => e.mean,
        }
    }

    fn stderr(&self) -> f64 {
        match self {
            Estimate::Exact(_) => 0.0,
            Estimate::Sampled(e) => e.stderr,
        }
    }

    fn sampled(&self) -> Option<&McEstimate> {
        match self {
            Estimate::Exact(_) => None,
            Estimate::Sampled(e) => Some(e),
        }
    }
}

pub fn relative_defect(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if lhs == rhs {
        0.0
    } else if scale == 0.0 || !scale.is_finite() {
        f64::INFINITY
    } else {
        (lhs - rhs).abs() / scale
    }
}

impl CheckReport {
    pub fn exact(name: &str, kind: CheckKind, lhs: f64, rhs: f64, settings: &CheckSettings) -> Self {
        let defect = relative_defect(lhs, rhs);
        CheckReport {
            name: name.to_string(),
            mode: CheckMode::Exact,
            kind,
            lhs,
            rhs,
            defect,
            pass: defect <= settings.exact_tolerance,
            seed: None,
            samples: None,
            depth: None,
            note: None,
        }
    }

    /// Exact rational comparison; passes only on equality.
    pub fn exact_rational(name: &str, kind: CheckKind, lhs: &Rational, rhs: &Rational) -> Self {
        CheckReport {
            name: name.to_string(),
            mode: CheckMode::Exact,
            kind,
            lhs: to_f64(lhs),
            rhs: to_f64(rhs),
            defect: to_f64(&(lhs - rhs).abs()),
            pass: lhs == rhs,
            seed: None,
            samples: None,
            depth: None,
            note: Some(format!("{} vs {}", format_rational(lhs), format_rational(rhs))),
        }
    }

    /// Compares two estimates; exact mode if neither was sampled.
    pub fn compare(
        name: &str,
        kind: CheckKind,
        lhs: Estimate,
        rhs: Estimate,
        settings: &CheckSettings,
    ) -> Self {
        let Some(mc) = lhs.sampled().or(rhs.sampled()).copied() else {
            return Self::exact(name, kind, lhs.value(), rhs.value(), settings);
        };
        let (l, r) = (lhs.value(), rhs.value());
        let sigma = lhs.stderr().hypot(rhs.stderr());
        let defect = if sigma > 0.0 {
            (l - r).abs() / sigma
        } else if relative_defect(l, r) <= settings.exact_tolerance {
            0.0
        } else {
            f64::INFINITY
        };
        CheckReport {
            name: name.to_string(),
            mode: CheckMode::MonteCarlo,
            kind,
            lhs: l,
            rhs: r,
            defect,
            pass: defect <= settings.mc_sigmas,
            seed: Some(mc.seed),
            samples: Some(mc.samples),
            depth: Some(mc.depth),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn as_kind(mut self, kind: CheckKind) -> Self {
        self.kind = kind;
        self
    }

    /// A failed hard test.
    pub fn is_failure(&self) -> bool {
        self.kind == CheckKind::Test && !self.pass
    }

    /// An audit that recorded a nonzero defect.
    pub fn is_finding(&self) -> bool {
        self.kind == CheckKind::Audit && !self.pass
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.kind, self.pass) {
            (_, true) => "ok",
            (CheckKind::Test, false) => "FAILED",
            (CheckKind::Audit, false) => "finding",
        };
        write!(
            f,
            "{:<32} {:<7} lhs={:.12e} rhs={:.12e} defect={:.3e}",
            self.name, status, self.lhs, self.rhs, self.defect
        )?;
        if let Some(n) = &self.note {
            write!(f, "  [{n}]")?;
        }
        Ok(())
    }
}

/// Closed form when available, otherwise Monte Carlo with the settings' seed.
pub fn estimate(f: &CylinderFunction, mu: &IntensityMeasure, settings: &CheckSettings) -> Result<Estimate> {
    match expect_exact(f, mu) {
        Ok(v) => Ok(Estimate::Exact(v)),
        Err(Error::UnsupportedShape(_)) => sampled(&[f], mu, settings, 0),
        Err(e) => Err(e),
    }
}

fn sampled(
    factors: &[&CylinderFunction],
    mu: &IntensityMeasure,
    settings: &CheckSettings,
    stream: u64,
) -> Result<Estimate> {
    Ok(Estimate::Sampled(expect_mc_product(
        factors,
        mu,
        settings.samples,
        settings.seed.wrapping_add(stream),
        settings.depth_margin,
    )?))
}

/// `R(g, γ) = Π_{x ∈ γ} ρ_g(x) · exp(∫ (1 - ρ_g) dm)`, both factors exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RnDensity {
    pub product: Rational,
    pub mass_exponent: Rational,
}

impl RnDensity {
    pub fn value(&self) -> f64 {
        to_f64(&self.product) * to_f64(&self.mass_exponent).exp()
    }
}

pub fn rn_density(g: &AffineElement, gamma: &Configuration) -> Result<RnDensity> {
    check_same_prime(g.prime(), gamma.window().prime())?;
    let rho = IntensityMeasure::haar(g.prime()).pushforward(g);
    let deviation = rho.density().deviation_support();
    if !deviation.is_subset_of(gamma.window()) {
        return Err(Error::WindowMismatch(format!(
            "window {} misses part of the density deviation {deviation}",
            gamma.window()
        )));
    }
    let product = gamma
        .points()
        .iter()
        .fold(Rational::one(), |acc, x| acc * rho.density().evaluate(x));
    Ok(RnDensity {
        product,
        mass_exponent: -rho.mass_defect(),
    })
}

fn exponential(f: &StepFunction) -> Result<CylinderFunction> {
    CylinderFunction::exponential(f.clone())
}

fn require_exponential(f: &CylinderFunction) -> Result<&StepFunction> {
    match f.shape() {
        CylinderShape::Exponential(g) => Ok(g),
        _ => Err(Error::UnsupportedShape("an exponential functional is required".into())),
    }
}

/// `∫ (ρ e^f - 1) dm + ∫ (1 - ρ) dm`, grouped by the values `v` of `f` as
/// `Σ_v (e^v W_v - M_v)` with exact weights `W_v = ∫_{f=v} ρ dm`, `M_v = m(f = v)`.
fn rn_lhs_exponent(rho: &IntensityMeasure, f: &StepFunction) -> f64 {
    let r = f.common_refinement(rho.density());
    let mut groups: BTreeMap<Rational, (Rational, Rational)> = BTreeMap::new();
    for (b, v, density) in r.pieces {
        let m = b.measure();
        let entry = groups.entry(v).or_insert_with(|| (Rational::zero(), Rational::zero()));
        entry.0 += density * &m;
        entry.1 += m;
    }
    let mut exact = -rho.mass_defect();
    let mut total = 0.0;
    for (v, (w, m)) in groups {
        if v.is_zero() {
            exact += w - m;
        } else {
            total += to_f64(&v).exp() * to_f64(&w) - to_f64(&m);
        }
    }
    total + to_f64(&exact)
}

/// `E_m[R(g, ·) e^{<f, ·>}]` against `E_{g_* m}[e^{<f, ·>}]`.
///
/// Exact mode evaluates `exp ∫ (ρ_g e^f - 1) dm` and `exp ∫ (e^f - 1) ρ_g dm`;
/// Monte Carlo mode samples under Haar with `R(g, γ)` as importance weight.
pub fn check_rn_identity(
    g: &AffineElement,
    f: &StepFunction,
    mode: CheckMode,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    assert_same_prime(g.prime(), f.prime());
    let haar = IntensityMeasure::haar(g.prime());
    let rho = haar.pushforward(g);
    let rhs = LaplaceExponent::of(f, &rho).laplace();
    let rhs_check = exponential(f)?;
    debug_assert!(rhs_check.prime() == g.prime());
    let lhs = match mode {
        CheckMode::Exact => Estimate::Exact(rn_lhs_exponent(&rho, f).exp()),
        CheckMode::MonteCarlo => {
            let deviation = rho.density().deviation_support();
            let support = f.deviation_support();
            let plan = mc_plan(
                &haar,
                &[&support, &deviation],
                &[f as &dyn Resolution, &rho],
                settings.depth_margin,
            );
            let mass = to_f64(&-rho.mass_defect()).exp();
            Estimate::Sampled(monte_carlo(&plan, settings.samples, settings.seed, |pts| {
                let mut weight = mass;
                let mut sum = 0.0;
                for x in pts {
                    weight *= to_f64(rho.density().evaluate(x));
                    sum += to_f64(f.evaluate(x));
                }
                weight * sum.exp()
            }))
        }
    };
    Ok(CheckReport::compare("rn-identity", CheckKind::Test, lhs, Estimate::Exact(rhs), settings))
}

/// `∫ V_g F dπ_m = ∫ F dπ_{g_* m}` for any functional with a closed form;
/// Monte Carlo mode samples the left side.
pub fn check_lemma_v(
    g: &AffineElement,
    f: &CylinderFunction,
    mode: CheckMode,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    check_same_prime(g.prime(), f.prime())?;
    let haar = IntensityMeasure::haar(g.prime());
    let pushed = haar.pushforward(g);
    let transformed = f.transform(g);
    let lhs = match mode {
        CheckMode::Exact => estimate(&transformed, &haar, settings)?,
        CheckMode::MonteCarlo => sampled(&[&transformed], &haar, settings, 0)?,
    };
    let rhs = estimate(f, &pushed, settings)?;
    let mut report = CheckReport::compare("laplace-transport", CheckKind::Test, lhs, rhs, settings);
    if let (CylinderShape::Exponential(tf), CylinderShape::Exponential(of)) =
        (transformed.shape(), f.shape())
    {
        let l = LaplaceExponent::of(tf, &haar);
        let r = LaplaceExponent::of(of, &pushed);
        let same = l.value() == r.value() || l == r;
        report = report.with_note(format!("exponents {l} vs {r}{}", if same { "" } else { " (regrouped)" }));
    }
    Ok(report)
}

/// `∫ V_g F · G dπ_m` against `∫ F · V_{g^{-1}} G dπ_{g_* m}` for exponential
/// `F`, `G`. An audit: the identity needs `V_{g^{-1}} V_g = id`.
pub fn check_lemma_dual(
    g: &AffineElement,
    f: &CylinderFunction,
    h: &CylinderFunction,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    check_same_prime(g.prime(), f.prime())?;
    check_same_prime(g.prime(), h.prime())?;
    let ff = require_exponential(f)?;
    let hh = require_exponential(h)?;
    let haar = IntensityMeasure::haar(g.prime());
    let left = exponential(&g.act_function(ff).add(hh)?)?;
    let right = exponential(&ff.add(&g.inverse().act_function(hh))?)?;
    let lhs = expect_exact(&left, &haar)?;
    let rhs = expect_exact(&right, &haar.pushforward(g))?;
    let witness = crate::affine::composition_defect(&g.inverse(), g, hh);
    let mut report = CheckReport::exact("lemma-dual", CheckKind::Audit, lhs, rhs, settings);
    if !report.pass {
        report = report.with_note(format!("G exponent {hh}; V_g V_g^-1 differs on {witness}"));
    }
    Ok(report)
}

/// Closed-form exponents of `‖U_g e^{<f,·>}‖²` and `‖e^{<f,·>}‖²`.
pub fn isometry_exponents(g: &AffineElement, f: &StepFunction) -> (LaplaceExponent, LaplaceExponent) {
    let haar = IntensityMeasure::haar(g.prime());
    let roundtrip = haar.pushforward(&g.inverse()).pushforward(g);
    let doubled = f.scale(&Rational::from_integer(2.into()));
    (LaplaceExponent::of(&doubled, &roundtrip), LaplaceExponent::of(&doubled, &haar))
}

/// Isometry of `U_g` on `e^{<f, ·>}`.
///
/// Exact mode is an audit comparing `exp ∫ (e^{2f} - 1) d(g_*(g^{-1})_* m)`
/// with `exp ∫ (e^{2f} - 1) dm`. Monte Carlo mode is a test of the left side
/// against `E_m[R(g^{-1}, γ) e^{2<gf, γ>}]`.
pub fn check_isometry(
    g: &AffineElement,
    f: &StepFunction,
    mode: CheckMode,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    assert_same_prime(g.prime(), f.prime());
    exponential(f)?;
    let (lhs_exp, rhs_exp) = isometry_exponents(g, f);
    let lhs = lhs_exp.laplace();
    match mode {
        CheckMode::Exact => {
            let report = CheckReport::exact(
                "isometry",
                CheckKind::Audit,
                lhs,
                rhs_exp.laplace(),
                settings,
            );
            Ok(report.with_note(format!("exponents {lhs_exp} vs {rhs_exp}")))
        }
        CheckMode::MonteCarlo => {
            let haar = IntensityMeasure::haar(g.prime());
            let rho = haar.pushforward(&g.inverse());
            let moved = g.act_function(f).scale(&Rational::from_integer(2.into()));
            let deviation = rho.density().deviation_support();
            let support = moved.deviation_support();
            let plan = mc_plan(
                &haar,
                &[&support, &deviation],
                &[&moved as &dyn Resolution, &rho],
                settings.depth_margin,
            );
            let mass = to_f64(&-rho.mass_defect()).exp();
            let est = monte_carlo(&plan, settings.samples, settings.seed, |pts| {
                let mut weight = mass;
                let mut sum = 0.0;
                for x in pts {
                    weight *= to_f64(rho.density().evaluate(x));
                    sum += to_f64(moved.evaluate(x));
                }
                weight * sum.exp()
            });
            Ok(CheckReport::compare(
                "isometry-norm",
                CheckKind::Test,
                Estimate::Sampled(est),
                Estimate::Exact(lhs),
                settings,
            ))
        }
    }
}

/// `g = (1, h 1_B)` with `B = B(0; M + 1)` and `h = p^{-(M+1)}`, where
/// `B(0; M)` is the smallest zero-centered ball containing `L1 ∪ L2`.
pub fn find_decoupler(l1: &ClopenSet, l2: &ClopenSet) -> AffineElement {
    assert_same_prime(l1.prime(), l2.prime());
    let prime = l1.prime();
    let m = l1.union(l2).enclosing_radius().unwrap_or(0);
    let ball = Ball::zero_centered(prime, m + 1);
    AffineElement::localized_shift(&ball, prime.power(-(m + 1)))
}

/// The exact postconditions of [`find_decoupler`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DecouplerFacts {
    pub second_inside_ball: bool,
    pub shifted_inside_ball: bool,
    pub shifted_disjoint_from_first: bool,
    pub preserves_haar: bool,
}

impl DecouplerFacts {
    pub fn all(&self) -> bool {
        self.second_inside_ball
            && self.shifted_inside_ball
            && self.shifted_disjoint_from_first
            && self.preserves_haar
    }
}

pub fn decoupler_facts(l1: &ClopenSet, l2: &ClopenSet, g: &AffineElement) -> Result<DecouplerFacts> {
    let (h, ball) = g
        .as_localized_shift()
        .ok_or_else(|| Error::ContractViolation(format!("{g} is not a localized shift")))?;
    let ball = match ball {
        Some(b) => ClopenSet::from_ball(b),
        None => ClopenSet::empty(g.prime()),
    };
    let shifted = l2.translate(&-h);
    Ok(DecouplerFacts {
        second_inside_ball: l2.is_subset_of(&ball),
        shifted_inside_ball: shifted.is_subset_of(&ball),
        shifted_disjoint_from_first: shifted.is_disjoint_from(l1),
        preserves_haar: IntensityMeasure::haar(g.prime()).pushforward(g).is_haar(),
    })
}

/// `E[F1 · V_g F2] = E[F1] E[F2]` with `g` the decoupler of the two windows.
/// Exact for exponential pairs, Monte Carlo otherwise.
pub fn check_factorization(
    f1: &CylinderFunction,
    f2: &CylinderFunction,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    check_same_prime(f1.prime(), f2.prime())?;
    let haar = IntensityMeasure::haar(f1.prime());
    let g = find_decoupler(f1.window(), f2.window());
    let moved = f2.transform(&g);
    let exact_pair = matches!(
        (f1.shape(), f2.shape()),
        (CylinderShape::Exponential(_), CylinderShape::Exponential(_))
    );
    let lhs = if exact_pair {
        let joint = f1.product(&moved).expect("exponentials multiply");
        Estimate::Exact(expect_exact(&joint, &haar)?)
    } else {
        sampled(&[f1, &moved], &haar, settings, 0)?
    };
    let rhs = product_estimate(f1, f2, &haar, settings)?;
    Ok(CheckReport::compare("factorization", CheckKind::Test, lhs, rhs, settings)
        .with_note(format!("decoupler {g}")))
}

/// `E[F1] E[F2]`, sampling any factor without a closed form on its own stream.
fn product_estimate(
    f1: &CylinderFunction,
    f2: &CylinderFunction,
    mu: &IntensityMeasure,
    settings: &CheckSettings,
) -> Result<Estimate> {
    let one = |f: &CylinderFunction, stream: u64| -> Result<Estimate> {
        match expect_exact(f, mu) {
            Ok(v) => Ok(Estimate::Exact(v)),
            Err(Error::UnsupportedShape(_)) => sampled(&[f], mu, settings, stream),
            Err(e) => Err(e),
        }
    };
    let (a, b) = (one(f1, 1)?, one(f2, 2)?);
    let value = a.value() * b.value();
    match a.sampled().or(b.sampled()).copied() {
        None => Ok(Estimate::Exact(value)),
        Some(mc) => {
            let stderr = (b.value() * a.stderr()).hypot(a.value() * b.stderr());
            Ok(Estimate::Sampled(McEstimate {
                mean: value,
                stderr,
                ..mc
            }))
        }
    }
}

/// Which decoupling condition a localized shift satisfies for a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ShiftContract {
    /// `Λ ⊆ B` and `Λ - h ⊆ B`.
    Repaired,
    /// `Λ ⊆ B` and `Λ ∩ (B + h) = ∅`.
    Literal,
}

/// `∫ V_g F dπ_m = ∫ F dπ_m` for a localized shift `g = (1, h 1_B)`.
///
/// Under the repaired contract this is a test. Under the literal contract
/// it is an audit that also reports whether `V_g F` degenerated to a
/// functional of the empty configuration.
pub fn check_invariance(
    f: &CylinderFunction,
    g: &AffineElement,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    check_same_prime(f.prime(), g.prime())?;
    let (h, ball) = g
        .as_localized_shift()
        .ok_or_else(|| Error::ContractViolation(format!("{g} is not of the form (1, h 1_B)")))?;
    let haar = IntensityMeasure::haar(f.prime());
    let window = f.window();
    let contract = match &ball {
        None => ShiftContract::Repaired,
        Some(b) => {
            let b = ClopenSet::from_ball(b.clone());
            if !window.is_subset_of(&b) {
                return Err(Error::ContractViolation(format!("window {window} is not inside {b}")));
            }
            if window.translate(&-&h).is_subset_of(&b) {
                ShiftContract::Repaired
            } else if window.is_disjoint_from(&b.translate(&h)) {
                ShiftContract::Literal
            } else {
                return Err(Error::ContractViolation(format!(
                    "window {window} meets both {b} and its shift"
                )));
            }
        }
    };
    let moved = f.transform(g);
    let lhs = estimate(&moved, &haar, settings)?;
    let rhs = estimate(f, &haar, settings)?;
    match contract {
        ShiftContract::Repaired => {
            Ok(CheckReport::compare("shift-invariance", CheckKind::Test, lhs, rhs, settings))
        }
        ShiftContract::Literal => {
            let degenerate = moved.window().is_empty();
            Ok(
                CheckReport::compare("shift-invariance-literal", CheckKind::Audit, lhs, rhs, settings)
                    .with_note(if degenerate {
                        "transformed functional is constant".to_string()
                    } else {
                        format!("transformed window {}", moved.window())
                    }),
            )
        }
    }
}

/// `E[1_{A1} · V_g 1_{A2}] = P(A1) P(A2)` for count events, hence at least
/// half the product.
pub fn check_ergodic_inequality(
    a1: &CylinderFunction,
    a2: &CylinderFunction,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    for a in [a1, a2] {
        if !matches!(a.shape(), CylinderShape::CountEvent(_)) {
            return Err(Error::UnsupportedShape("count events are required".into()));
        }
    }
    check_same_prime(a1.prime(), a2.prime())?;
    let haar = IntensityMeasure::haar(a1.prime());
    let g = find_decoupler(a1.window(), a2.window());
    let joint = a1.product(&a2.transform(&g)).expect("count events multiply");
    let lhs = match expect_exact(&joint, &haar) {
        Ok(v) => Estimate::Exact(v),
        Err(Error::UnsupportedShape(_)) => sampled(&[&joint], &haar, settings, 0)?,
        Err(e) => return Err(e),
    };
    let rhs = product_estimate(a1, a2, &haar, settings)?;
    let mut report = CheckReport::compare("ergodic-inequality", CheckKind::Test, lhs, rhs, settings);
    let half = 0.5 * rhs.value();
    let slack = settings.mc_sigmas * lhs.stderr().hypot(0.5 * rhs.stderr());
    let inequality = lhs.value() >= half - slack - settings.exact_tolerance * half.abs();
    report.pass &= inequality;
    Ok(report.with_note(format!(
        "half product {half:.12e}; inequality {}",
        if inequality { "holds" } else { "fails" }
    )))
}

/// `∫ (ρ_g - 1) dm = 0`.
pub fn check_mass_conservation(g: &AffineElement) -> CheckReport {
    let rho = IntensityMeasure::haar(g.prime()).pushforward(g);
    CheckReport::exact_rational("mass-conservation", CheckKind::Test, &rho.mass_defect(), &Rational::zero())
}

/// Region where `V_{g1} V_{g2} f` and `V_{g1 g2} f` differ, as an audit.
pub fn check_composition(
    g1: &AffineElement,
    g2: &AffineElement,
    f: &StepFunction,
) -> CheckReport {
    let region = crate::affine::composition_defect(g1, g2, f);
    let measure = region.measure();
    let mut report = CheckReport::exact_rational("composition", CheckKind::Audit, &measure, &Rational::zero());
    if !region.is_empty() {
        report.note = Some(format!("defect region {region}"));
    }
    report
}

/// `‖(g2 g1)_* m - (g1)_*((g2)_* m)‖_1`, as an audit.
pub fn check_composition_duality(g2: &AffineElement, g1: &AffineElement) -> CheckReport {
    CheckReport::exact_rational(
        "composition-duality",
        CheckKind::Audit,
        &crate::measure::composition_duality_defect(g2, g1),
        &Rational::zero(),
    )
}

/// The element `(a, 0)` with `a = value` on `Z_p`.
pub fn scaling_on_unit_ball(prime: Prime, value: Rational) -> AffineElement {
    use crate::affine::SectionPair;
    AffineElement::from_pieces(
        prime,
        vec![(Ball::unit(prime), SectionPair::new(value, Rational::zero()).expect("nonzero"))],
    )
    .expect("single piece")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{integer, rational};
    use crate::poisson::CountPredicate;

    fn p3() -> Prime {
        Prime::new(3).unwrap()
    }

    fn z3() -> ClopenSet {
        ClopenSet::from_ball(Ball::unit(p3()))
    }

    fn on_z3(c: Rational) -> StepFunction {
        StepFunction::indicator(&z3(), c)
    }

    fn settings() -> CheckSettings {
        CheckSettings {
            samples: 20_000,
            ..CheckSettings::default()
        }
    }

    #[test]
    fn rn_density_examples() {
        let g0 = scaling_on_unit_ball(p3(), integer(3));
        let window = ClopenSet::from_ball(Ball::zero_centered(p3(), 1));
        let gamma = Configuration::new(vec![integer(0)], window.clone()).unwrap();
        let r = rn_density(&g0, &gamma).unwrap();
        assert_eq!(r.product, rational(1, 3));
        assert_eq!(r.mass_exponent, integer(0));
        let shift = AffineElement::localized_shift(&Ball::unit(p3()), rational(1, 3));
        let gamma = Configuration::new(vec![integer(2), rational(1, 3)], window).unwrap();
        assert_eq!(rn_density(&shift, &gamma).unwrap().value(), 0.0);
        let narrow = Configuration::new(vec![integer(0)], z3()).unwrap();
        assert!(matches!(rn_density(&g0, &narrow), Err(Error::WindowMismatch(_))));
    }

    #[test]
    fn rn_identity_for_scaling() {
        let g0 = scaling_on_unit_ball(p3(), integer(3));
        let f = StepFunction::indicator(
            &ClopenSet::from_ball(Ball::zero_centered(p3(), 1)),
            integer(1),
        );
        let exact = check_rn_identity(&g0, &f, CheckMode::Exact, &settings()).unwrap();
        assert!(exact.pass, "{exact}");
        let zero = StepFunction::indicator(&z3(), integer(0));
        let trivial = check_rn_identity(&g0, &zero, CheckMode::Exact, &settings()).unwrap();
        assert_eq!((trivial.lhs, trivial.rhs), (1.0, 1.0));
        let mc = check_rn_identity(&g0, &f, CheckMode::MonteCarlo, &settings()).unwrap();
        assert!(mc.pass, "{mc}");
    }

    #[test]
    fn isometry_scaling_pair() {
        let g0 = scaling_on_unit_ball(p3(), integer(3));
        let g1 = g0.inverse();
        let f = on_z3(rational(1, 2));
        let r0 = check_isometry(&g0, &f, CheckMode::Exact, &settings()).unwrap();
        assert!(r0.pass && r0.defect == 0.0, "{r0}");
        let (l, r) = isometry_exponents(&g1, &f);
        assert_eq!(l.weights().iter().collect::<Vec<_>>(), vec![(&integer(1), &rational(1, 3))]);
        assert_eq!(r.weights().iter().collect::<Vec<_>>(), vec![(&integer(1), &integer(1))]);
        let r1 = check_isometry(&g1, &f, CheckMode::Exact, &settings()).unwrap();
        assert!(r1.is_finding());
        let mc = check_isometry(&g1, &f, CheckMode::MonteCarlo, &settings()).unwrap();
        assert!(mc.pass, "{mc}");
    }

    #[test]
    fn lemma_dual_audit() {
        let f = CylinderFunction::exponential(on_z3(integer(1))).unwrap();
        let h = CylinderFunction::exponential(on_z3(rational(1, 2))).unwrap();
        let id = AffineElement::identity(p3());
        assert!(check_lemma_dual(&id, &f, &h, &settings()).unwrap().pass);
        let g0 = scaling_on_unit_ball(p3(), integer(3));
        assert!(check_lemma_dual(&g0.inverse(), &f, &h, &settings()).unwrap().pass);
        assert!(check_lemma_dual(&g0, &f, &h, &settings()).unwrap().is_finding());
    }

    #[test]
    fn decoupler_example() {
        let g = find_decoupler(&z3(), &z3());
        assert_eq!(
            g,
            AffineElement::localized_shift(&Ball::zero_centered(p3(), 1), rational(1, 3))
        );
        assert!(decoupler_facts(&z3(), &z3(), &g).unwrap().all());
    }

    #[test]
    fn factorization_examples() {
        let c = rational(1, 2);
        let f = CylinderFunction::exponential(on_z3(c)).unwrap();
        let r = check_factorization(&f, &f, &settings()).unwrap();
        assert!(r.pass, "{r}");
        assert!((r.rhs - (2.0 * (0.5f64.exp() - 1.0)).exp()).abs() < 1e-12);
        let k = CylinderFunction::constant(p3(), integer(2));
        assert!(check_factorization(&f, &k, &settings()).unwrap().pass);
        let e = CylinderFunction::count_event(p3(), vec![(z3(), CountPredicate::AtLeast(1))]).unwrap();
        let r = check_factorization(&e, &e, &settings()).unwrap();
        assert_eq!(r.mode, CheckMode::MonteCarlo);
        assert!(r.pass, "{r}");
    }

    #[test]
    fn invariance_contracts() {
        let f = CylinderFunction::exponential(on_z3(integer(1))).unwrap();
        let g = find_decoupler(f.window(), f.window());
        let r = check_invariance(&f, &g, &settings()).unwrap();
        assert!(r.pass && r.kind == CheckKind::Test, "{r}");
        let id = AffineElement::identity(p3());
        assert!(check_invariance(&f, &id, &settings()).unwrap().pass);
        let literal = AffineElement::localized_shift(&Ball::unit(p3()), rational(1, 3));
        let r = check_invariance(&f, &literal, &settings()).unwrap();
        assert!(r.is_finding());
        assert_eq!(r.lhs, 1.0);
        assert_eq!(r.note.as_deref(), Some("transformed functional is constant"));
        let g0 = scaling_on_unit_ball(p3(), integer(3));
        assert!(matches!(check_invariance(&f, &g0, &settings()), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn ergodic_void_events() {
        let void = CylinderFunction::count_event(p3(), vec![(z3(), CountPredicate::Exactly(0))]).unwrap();
        let r = check_ergodic_inequality(&void, &void, &settings()).unwrap();
        assert!(r.pass && r.mode == CheckMode::Exact, "{r}");
        assert!((r.lhs - (-2f64).exp()).abs() < 1e-15);
        let never = CylinderFunction::count_event(
            p3(),
            vec![(z3(), CountPredicate::Exactly(1)), (z3(), CountPredicate::Exactly(2))],
        )
        .unwrap();
        let r = check_ergodic_inequality(&never, &void, &settings()).unwrap();
        assert!(r.pass, "{r}");
        assert_eq!(r.lhs, 0.0);
    }

    #[test]
    fn report_json_field_order() {
        let r = CheckReport::exact("x", CheckKind::Test, 1.0, 1.0, &settings());
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"name":"x","mode":"exact","kind":"test","lhs":1.0,"rhs":1.0,"defect":0.0,"pass":true}"#
        );
    }
}
