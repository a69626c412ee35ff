//! Poisson configurations on finite volumes, cylinder functionals, their
//! closed-form expectations and the seeded Monte Carlo engine.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::affine::AffineElement;
use crate::clopen::ClopenSet;
use crate::error::{Error, Result};
use crate::measure::IntensityMeasure;
use crate::padic::{assert_same_prime, check_same_prime, rational_pow, to_f64, Ball, Prime, Rational};
use crate::stepfn::{StepFunction, ValueKind};

/// Extra sampling digits beyond the resolution every object requires. Two
/// points of one atom coincide with probability `p^{-margin}` at most.
pub const DEFAULT_DEPTH_MARGIN: u32 = 20;

/// Samples per deterministic RNG stream.
pub const CHUNK_SIZE: usize = 2048;

pub const MIN_MC_SAMPLES: usize = 1000;

/// A finite point configuration inside a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    points: Vec<Rational>,
    window: ClopenSet,
}

impl Configuration {
    pub fn new(points: Vec<Rational>, window: ClopenSet) -> Result<Self> {
        let mut sorted = points.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("configuration points must be distinct".into()));
        }
        if let Some(x) = points.iter().find(|x| !window.contains(x)) {
            return Err(Error::WindowMismatch(format!(
                "point {}",
                crate::literal::format_rational(x)
            )));
        }
        Ok(Configuration { points, window })
    }

    pub fn empty(window: ClopenSet) -> Self {
        Configuration {
            points: Vec::new(),
            window,
        }
    }

    pub fn points(&self) -> &[Rational] {
        &self.points
    }

    pub fn window(&self) -> &ClopenSet {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `<f, γ> = Σ_{x ∈ γ} f(x)`, exact.
pub fn pair_sum(f: &StepFunction, gamma: &Configuration) -> Result<Rational> {
    check_same_prime(f.prime(), gamma.window.prime())?;
    if !f.tail().is_zero() {
        return Err(Error::WindowMismatch("a function with nonzero tail".into()));
    }
    if !f.deviation_support().is_subset_of(&gamma.window) {
        return Err(Error::WindowMismatch(format!("the support of {f}")));
    }
    Ok(raw_pair_sum(f, &gamma.points))
}

fn raw_pair_sum(f: &StepFunction, points: &[Rational]) -> Rational {
    points
        .iter()
        .fold(Rational::zero(), |acc, x| acc + f.evaluate(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CountPredicate {
    Exactly(u64),
    AtMost(u64),
    AtLeast(u64),
}

impl CountPredicate {
    pub fn holds(self, n: u64) -> bool {
        match self {
            CountPredicate::Exactly(k) => n == k,
            CountPredicate::AtMost(k) => n <= k,
            CountPredicate::AtLeast(k) => n >= k,
        }
    }

    /// Probability of the predicate for `N ~ Poisson(lambda)`.
    pub fn probability(self, lambda: f64) -> f64 {
        let cdf = |k: u64| -> f64 { (0..=k).map(|j| poisson_pmf(lambda, j)).sum::<f64>().min(1.0) };
        match self {
            CountPredicate::Exactly(k) => poisson_pmf(lambda, k),
            CountPredicate::AtMost(k) => cdf(k),
            CountPredicate::AtLeast(0) => 1.0,
            CountPredicate::AtLeast(k) => (1.0 - cdf(k - 1)).max(0.0),
        }
    }
}

fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let log = -lambda + k as f64 * lambda.ln() - ln_factorial(k);
    log.exp()
}

fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|j| (j as f64).ln()).sum()
}

/// The closed family of functionals `ψ(<f_1, γ>, ..., <f_n, γ>)` used here.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CylinderShape {
    /// `e^{<f, γ>}`
    Exponential(StepFunction),
    /// `c Π_j <f_j, γ>^{k_j}`
    Polynomial {
        coefficient: Rational,
        factors: Vec<(StepFunction, u32)>,
    },
    /// `Π_i 1{N_{S_i}(γ) ⋈ k_i}`
    CountEvent(Vec<(ClopenSet, CountPredicate)>),
}

/// A cylinder function together with its window, the union of the supports
/// of everything it reads.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CylinderFunction {
    prime: Prime,
    shape: CylinderShape,
    window: ClopenSet,
}

fn test_function_support(f: &StepFunction) -> Result<ClopenSet> {
    if f.kind() != ValueKind::Real {
        return Err(Error::KindMismatch {
            expected: ValueKind::Real.name(),
            found: f.kind().name(),
        });
    }
    if !f.tail().is_zero() {
        return Err(Error::InvalidArgument(format!(
            "test function {f} must vanish outside a compact set"
        )));
    }
    Ok(f.deviation_support())
}

impl CylinderFunction {
    pub fn exponential(f: StepFunction) -> Result<Self> {
        let window = test_function_support(&f)?;
        Ok(CylinderFunction {
            prime: f.prime(),
            shape: CylinderShape::Exponential(f),
            window,
        })
    }

    pub fn polynomial(
        prime: Prime,
        coefficient: Rational,
        factors: Vec<(StepFunction, u32)>,
    ) -> Result<Self> {
        let mut window = ClopenSet::empty(prime);
        for (f, _) in &factors {
            check_same_prime(prime, f.prime())?;
            window = window.union(&test_function_support(f)?);
        }
        Ok(CylinderFunction {
            prime,
            shape: CylinderShape::Polynomial {
                coefficient,
                factors,
            },
            window,
        })
    }

    pub fn constant(prime: Prime, value: Rational) -> Self {
        Self::polynomial(prime, value, Vec::new()).expect("no factors")
    }

    pub fn count_event(prime: Prime, conditions: Vec<(ClopenSet, CountPredicate)>) -> Result<Self> {
        let mut window = ClopenSet::empty(prime);
        for (s, _) in &conditions {
            check_same_prime(prime, s.prime())?;
            window = window.union(s);
        }
        Ok(CylinderFunction {
            prime,
            shape: CylinderShape::CountEvent(conditions),
            window,
        })
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn shape(&self) -> &CylinderShape {
        &self.shape
    }

    pub fn window(&self) -> &ClopenSet {
        &self.window
    }

    pub fn finest_radius(&self) -> Option<i64> {
        match &self.shape {
            CylinderShape::Exponential(f) => f.finest_radius(),
            CylinderShape::Polynomial { factors, .. } => {
                factors.iter().filter_map(|(f, _)| f.finest_radius()).min()
            }
            CylinderShape::CountEvent(c) => c.iter().filter_map(|(s, _)| s.finest_radius()).min(),
        }
    }

    /// `F(γ)` in floating point.
    pub fn evaluate(&self, points: &[Rational]) -> f64 {
        match &self.shape {
            CylinderShape::Exponential(f) => to_f64(&raw_pair_sum(f, points)).exp(),
            CylinderShape::Polynomial {
                coefficient,
                factors,
            } => {
                let exact = factors.iter().fold(coefficient.clone(), |acc, (f, k)| {
                    acc * rational_pow(&raw_pair_sum(f, points), *k)
                });
                to_f64(&exact)
            }
            CylinderShape::CountEvent(conditions) => {
                let ok = conditions.iter().all(|(s, pred)| {
                    let n = points.iter().filter(|x| s.contains(x)).count() as u64;
                    pred.holds(n)
                });
                if ok {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `(V_g F)(γ) = ψ(<g f_1, γ>, ...)`; count sets pull back to
    /// `{x : g(x) x ∈ S}`.
    pub fn transform(&self, g: &AffineElement) -> CylinderFunction {
        assert_same_prime(self.prime, g.prime());
        match &self.shape {
            CylinderShape::Exponential(f) => {
                Self::exponential(g.act_function(f)).expect("action keeps tail 0")
            }
            CylinderShape::Polynomial {
                coefficient,
                factors,
            } => Self::polynomial(
                self.prime,
                coefficient.clone(),
                factors.iter().map(|(f, k)| (g.act_function(f), *k)).collect(),
            )
            .expect("action keeps tail 0"),
            CylinderShape::CountEvent(conditions) => Self::count_event(
                self.prime,
                conditions
                    .iter()
                    .map(|(s, pred)| (g.preimage_clopen(s), *pred))
                    .collect(),
            )
            .expect("same prime"),
        }
    }

    /// Degree of a polynomial functional.
    pub fn degree(&self) -> Option<u32> {
        match &self.shape {
            CylinderShape::Polynomial { factors, .. } => Some(factors.iter().map(|(_, k)| k).sum()),
            _ => None,
        }
    }

    /// Product of two functionals when it stays inside the descriptor family.
    pub fn product(&self, other: &CylinderFunction) -> Option<CylinderFunction> {
        assert_same_prime(self.prime, other.prime);
        match (&self.shape, &other.shape) {
            (CylinderShape::Exponential(f), CylinderShape::Exponential(g)) => {
                Some(Self::exponential(f.add(g).ok()?).ok()?)
            }
            (CylinderShape::CountEvent(a), CylinderShape::CountEvent(b)) => {
                Some(Self::count_event(self.prime, [a.clone(), b.clone()].concat()).ok()?)
            }
            (
                CylinderShape::Polynomial {
                    coefficient: c1,
                    factors: f1,
                },
                CylinderShape::Polynomial {
                    coefficient: c2,
                    factors: f2,
                },
            ) => Some(
                Self::polynomial(self.prime, c1 * c2, [f1.clone(), f2.clone()].concat()).ok()?,
            ),
            _ => None,
        }
    }
}

/// Anything with a finite ball partition.
pub trait Resolution {
    fn finest_radius(&self) -> Option<i64>;
}

impl Resolution for StepFunction {
    fn finest_radius(&self) -> Option<i64> {
        StepFunction::finest_radius(self)
    }
}

impl Resolution for ClopenSet {
    fn finest_radius(&self) -> Option<i64> {
        ClopenSet::finest_radius(self)
    }
}

impl Resolution for CylinderFunction {
    fn finest_radius(&self) -> Option<i64> {
        CylinderFunction::finest_radius(self)
    }
}

impl Resolution for IntensityMeasure {
    fn finest_radius(&self) -> Option<i64> {
        self.density().finest_radius()
    }
}

impl Resolution for AffineElement {
    fn finest_radius(&self) -> Option<i64> {
        self.pieces().iter().map(|(b, _)| b.radius_exp()).min()
    }
}

/// Smallest `D >= 1` with `k - D <= r_min`: a point drawn from `ball` at depth
/// `D` determines the value of every listed object.
pub fn required_depth(objects: &[&dyn Resolution], ball: &Ball) -> u32 {
    let finest = objects.iter().filter_map(|o| o.finest_radius()).min();
    match finest {
        None => 1,
        Some(r) => (ball.radius_exp() - r).max(1) as u32,
    }
}

/// Smallest zero-centered ball containing all the sets (`Z_p` if all empty).
pub fn enclosing_window(prime: Prime, sets: &[&ClopenSet]) -> Ball {
    let r = sets.iter().filter_map(|s| s.enclosing_radius()).max().unwrap_or(0);
    Ball::zero_centered(prime, r)
}

/// Precomputed atoms of `ρ·m` restricted to a window.
#[derive(Clone, Debug)]
pub struct SamplingPlan {
    atoms: Vec<Ball>,
    cumulative: Vec<f64>,
    total: Rational,
    lambda: f64,
    depth: u32,
    window: ClopenSet,
}

impl SamplingPlan {
    pub fn new(mu: &IntensityMeasure, window: &ClopenSet, depth: u32) -> Self {
        assert_same_prime(mu.prime(), window.prime());
        assert!(depth >= 1, "sampling depth must be positive");
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        let mut total = Rational::zero();
        for (b, v) in mu.density().restricted_pieces(window) {
            assert!(v >= Rational::zero(), "negative intensity");
            if v.is_zero() {
                continue;
            }
            let w = &v * b.measure();
            total += &w;
            weights.push(w);
            atoms.push(b);
        }
        let mut running = Rational::zero();
        let cumulative = weights
            .iter()
            .map(|w| {
                running += w;
                to_f64(&(&running / &total))
            })
            .collect();
        SamplingPlan {
            atoms,
            cumulative,
            lambda: to_f64(&total),
            total,
            depth,
            window: window.clone(),
        }
    }

    pub fn total_mass(&self) -> &Rational {
        &self.total
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn window(&self) -> &ClopenSet {
        &self.window
    }

    pub fn sample_points<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Rational> {
        let n = poisson_variate(self.lambda, rng);
        let mut points: Vec<Rational> = Vec::with_capacity(n as usize);
        for _ in 0..n {
            // Collisions are drawn again with one more digit each time.
            let mut depth = self.depth;
            loop {
                let x = self.sample_location_at(depth, rng);
                if !points.contains(&x) {
                    points.push(x);
                    break;
                }
                depth += 1;
            }
        }
        points
    }

    /// One point from the normalized intensity.
    pub fn sample_location<R: Rng + ?Sized>(&self, rng: &mut R) -> Rational {
        self.sample_location_at(self.depth, rng)
    }

    fn sample_location_at<R: Rng + ?Sized>(&self, depth: u32, rng: &mut R) -> Rational {
        let u: f64 = rng.random();
        let i = self
            .cumulative
            .partition_point(|c| *c <= u)
            .min(self.atoms.len() - 1);
        self.atoms[i].sample_uniform(depth, rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        Configuration {
            points: self.sample_points(rng),
            window: self.window.clone(),
        }
    }
}

/// Draws a Poisson variate by inversion of one uniform. Very large means are
/// split into independent parts so `e^{-λ}` does not underflow.
pub fn poisson_variate<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    const SPLIT: f64 = 400.0;
    if lambda <= 0.0 {
        return 0;
    }
    if lambda > SPLIT {
        let parts = (lambda / SPLIT).ceil() as u64;
        return (0..parts).map(|_| poisson_variate(lambda / parts as f64, rng)).sum();
    }
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut prob = (-lambda).exp();
    let mut cdf = prob;
    while u > cdf {
        k += 1;
        prob *= lambda / k as f64;
        cdf += prob;
        if prob < f64::MIN_POSITIVE && k as f64 > lambda {
            break;
        }
    }
    k
}

/// `sample_config`: one Poisson configuration of `ρ·m` restricted to `window`.
pub fn sample_config<R: Rng + ?Sized>(
    mu: &IntensityMeasure,
    window: &ClopenSet,
    depth: u32,
    rng: &mut R,
) -> Configuration {
    SamplingPlan::new(mu, window, depth).sample(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    pub depth: u32,
}

/// Mean and standard error of `eval` over `n` configurations. Chunk `c` of
/// [`CHUNK_SIZE`] samples always uses ChaCha stream `c` of `seed`, and chunk
/// statistics merge in index order, so the result does not depend on the
/// number of worker threads.
pub fn monte_carlo<F>(plan: &SamplingPlan, n: usize, seed: u64, eval: F) -> McEstimate
where
    F: Fn(&[Rational]) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK_SIZE);
    let stats: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK_SIZE.min(n - c * CHUNK_SIZE);
            let (mut count, mut mean, mut m2) = (0.0, 0.0, 0.0);
            for _ in 0..len {
                let y = eval(&plan.sample_points(&mut rng));
                count += 1.0;
                let d = y - mean;
                mean += d / count;
                m2 += d * (y - mean);
            }
            (count, mean, m2)
        })
        .collect();
    let (mut count, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
    for (nb, mb, m2b) in stats {
        if nb == 0.0 {
            continue;
        }
        let total = count + nb;
        let d = mb - mean;
        mean += d * nb / total;
        m2 += m2b + d * d * count * nb / total;
        count = total;
    }
    let var = if count > 1.0 { m2 / (count - 1.0) } else { 0.0 };
    McEstimate {
        mean,
        stderr: (var / count).sqrt(),
        samples: n,
        seed,
        depth: plan.depth,
    }
}

/// Applies `f` to `n` sampled configurations, using the same chunked
/// streams as [`monte_carlo`]; the output order is the sample order.
pub fn sample_map<T, F>(plan: &SamplingPlan, n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[Rational]) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK_SIZE);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK_SIZE.min(n - c * CHUNK_SIZE);
            (0..len).map(|_| f(&plan.sample_points(&mut rng))).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// Window and depth that make Monte Carlo over the given objects exact in law.
pub fn mc_plan(
    mu: &IntensityMeasure,
    sets: &[&ClopenSet],
    objects: &[&dyn Resolution],
    depth_margin: u32,
) -> SamplingPlan {
    let deviation = mu.density().deviation_support();
    let mut all: Vec<&ClopenSet> = sets.to_vec();
    all.push(&deviation);
    let ball = enclosing_window(mu.prime(), &all);
    let mut objs: Vec<&dyn Resolution> = objects.to_vec();
    objs.push(mu);
    let depth = required_depth(&objs, &ball) + depth_margin;
    SamplingPlan::new(mu, &ClopenSet::from_ball(ball), depth)
}

/// Monte Carlo estimate of `E[Π_i F_i]` under the Poisson measure of `mu`.
pub fn expect_mc_product(
    factors: &[&CylinderFunction],
    mu: &IntensityMeasure,
    n: usize,
    seed: u64,
    depth_margin: u32,
) -> Result<McEstimate> {
    if n < MIN_MC_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_MC_SAMPLES} Monte Carlo samples required, got {n}"
        )));
    }
    for f in factors {
        check_same_prime(mu.prime(), f.prime())?;
    }
    let windows: Vec<&ClopenSet> = factors.iter().map(|f| f.window()).collect();
    let objects: Vec<&dyn Resolution> = factors.iter().map(|f| *f as &dyn Resolution).collect();
    let plan = mc_plan(mu, &windows, &objects, depth_margin);
    Ok(monte_carlo(&plan, n, seed, |pts| {
        factors.iter().map(|f| f.evaluate(pts)).product()
    }))
}

pub fn expect_mc(
    f: &CylinderFunction,
    mu: &IntensityMeasure,
    n: usize,
    seed: u64,
    depth_margin: u32,
) -> Result<McEstimate> {
    expect_mc_product(&[f], mu, n, seed, depth_margin)
}

/// `Σ_v (e^v - 1) W_v`: the exponent of a Laplace functional, kept as exact
/// rational weights `W_v` per distinct value `v` of the test function.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct LaplaceExponent {
    weights: BTreeMap<Rational, Rational>,
}

impl LaplaceExponent {
    /// `∫ (e^{f} - 1) ρ dm` for a test function `f` with tail 0.
    pub fn of(f: &StepFunction, mu: &IntensityMeasure) -> Self {
        assert_same_prime(f.prime(), mu.prime());
        let r = f.common_refinement(mu.density());
        let mut weights: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (b, v, rho) in r.pieces {
            if v.is_zero() || rho.is_zero() {
                continue;
            }
            *weights.entry(v).or_insert_with(Rational::zero) += rho * b.measure();
        }
        weights.retain(|_, w| !w.is_zero());
        LaplaceExponent { weights }
    }

    pub fn weights(&self) -> &BTreeMap<Rational, Rational> {
        &self.weights
    }

    pub fn value(&self) -> f64 {
        self.weights
            .iter()
            .map(|(v, w)| to_f64(v).exp_m1() * to_f64(w))
            .sum()
    }

    /// `exp` of the exponent, i.e. `E[e^{<f, γ>}]`.
    pub fn laplace(&self) -> f64 {
        self.value().exp()
    }
}

impl fmt::Display for LaplaceExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::literal::format_rational;
        if self.weights.is_empty() {
            return write!(f, "0");
        }
        for (i, (v, w)) in self.weights.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "(e^({}) - 1)*{}", format_rational(v), format_rational(w))?;
        }
        Ok(())
    }
}

/// `∫ f ρ dm` for a test function.
fn first_moment(f: &StepFunction, mu: &IntensityMeasure) -> Rational {
    f.zip_with(mu.density(), |v, r| v * r)
        .integrate_total()
        .expect("test functions vanish at infinity")
}

fn product_moment(f: &StepFunction, g: &StepFunction, mu: &IntensityMeasure) -> Rational {
    f.zip_with(g, |x, y| x * y)
        .zip_with(mu.density(), |v, r| v * r)
        .integrate_total()
        .expect("test functions vanish at infinity")
}

/// Exact rational expectation for polynomial functionals of degree <= 2
/// (Campbell's formula for the second moment).
pub fn expect_polynomial(f: &CylinderFunction, mu: &IntensityMeasure) -> Result<Rational> {
    let CylinderShape::Polynomial {
        coefficient,
        factors,
    } = f.shape()
    else {
        return Err(Error::UnsupportedShape("not a polynomial".into()));
    };
    let flat: Vec<&StepFunction> = factors
        .iter()
        .flat_map(|(g, k)| std::iter::repeat_n(g, *k as usize))
        .collect();
    let moment = match flat.as_slice() {
        [] => Rational::one(),
        [a] => first_moment(a, mu),
        [a, b] => product_moment(a, b, mu) + first_moment(a, mu) * first_moment(b, mu),
        _ => {
            return Err(Error::UnsupportedShape(format!(
                "polynomial of degree {} (closed form up to 2)",
                flat.len()
            )))
        }
    };
    Ok(coefficient * moment)
}

/// Exact rates `μ(S_i)` of a count event whose sets are pairwise disjoint.
pub fn count_event_rates(f: &CylinderFunction, mu: &IntensityMeasure) -> Result<Vec<(Rational, CountPredicate)>> {
    let CylinderShape::CountEvent(conditions) = f.shape() else {
        return Err(Error::UnsupportedShape("not a count event".into()));
    };
    for (i, (a, _)) in conditions.iter().enumerate() {
        for (b, _) in &conditions[i + 1..] {
            if !a.is_disjoint_from(b) {
                return Err(Error::UnsupportedShape(
                    "count sets overlap; use Monte Carlo".into(),
                ));
            }
        }
    }
    Ok(conditions
        .iter()
        .map(|(s, pred)| (mu.mass(s), *pred))
        .collect())
}

/// Closed-form `E[F]` under the Poisson measure with intensity `mu`.
pub fn expect_exact(f: &CylinderFunction, mu: &IntensityMeasure) -> Result<f64> {
    check_same_prime(f.prime(), mu.prime())?;
    match f.shape() {
        CylinderShape::Exponential(g) => Ok(LaplaceExponent::of(g, mu).laplace()),
        CylinderShape::Polynomial { .. } => Ok(to_f64(&expect_polynomial(f, mu)?)),
        CylinderShape::CountEvent(_) => Ok(count_event_rates(f, mu)?
            .iter()
            .map(|(rate, pred)| pred.probability(to_f64(rate)))
            .product()),
    }
}
