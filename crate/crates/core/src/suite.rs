//! The full verification suite and the randomized audit run.
//!
//! Checks run in parallel and the reports come back sorted by name, so the
//! output depends only on the prime and the settings.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::affine::{composition_defect, AffineElement, SectionPair};
use crate::clopen::{shell_balls, ClopenSet};
use crate::measure::{roundtrip_defect, IntensityMeasure};
use crate::padic::{integer, to_f64, Ball, Prime, Rational};
use crate::poisson::{
    expect_mc, mc_plan, sample_map, CountPredicate, CylinderFunction, Resolution,
};
use crate::random;
use crate::representation::{
    check_composition, check_composition_duality, check_ergodic_inequality, check_factorization,
    check_invariance, check_isometry, check_lemma_dual, check_lemma_v, check_rn_identity,
    decoupler_facts, find_decoupler, scaling_on_unit_ball, CheckKind, CheckMode, CheckReport,
    CheckSettings, Estimate,
};
use crate::stats;
use crate::stepfn::{StepFunction, ValueKind};

/// Random trials per aggregated check.
pub const DEFAULT_TRIALS: usize = 50;

/// A deterministic generator for the named check.
pub fn check_rng(seed: u64, name: &str) -> ChaCha8Rng {
    // FNV-1a keeps the stream stable across platforms and releases.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Collects pass/fail outcomes of repeated exact trials into one report.
struct Tally {
    trials: usize,
    failures: usize,
    max_defect: f64,
    first_failure: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            trials: 0,
            failures: 0,
            max_defect: 0.0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, defect: f64, describe: impl FnOnce() -> String) {
        self.trials += 1;
        if defect.is_nan() {
            self.max_defect = f64::NAN;
        } else {
            self.max_defect = self.max_defect.max(defect);
        }
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    fn report(self, name: &str) -> CheckReport {
        let mut note = format!("{} trials", self.trials);
        if let Some(f) = self.first_failure {
            note.push_str(&format!("; first failure: {f}"));
        }
        CheckReport {
            name: name.to_string(),
            mode: CheckMode::Exact,
            kind: CheckKind::Test,
            lhs: self.failures as f64,
            rhs: 0.0,
            defect: self.max_defect,
            pass: self.failures == 0,
            seed: None,
            samples: None,
            depth: None,
            note: Some(note),
        }
    }
}

fn tally_reports(name: &str, reports: impl IntoIterator<Item = CheckReport>) -> CheckReport {
    let mut t = Tally::new();
    for r in reports {
        let defect = r.defect;
        t.record(r.pass, defect, || r.to_string());
    }
    t.report(name)
}

/// `g0`: `a = p` on `Z_p`, the expanding scaling.
pub fn expanding_scaling(prime: Prime) -> AffineElement {
    scaling_on_unit_ball(prime, prime.power(1))
}

/// `g1`: `a = 1/p` on `Z_p`, the contracting scaling.
pub fn contracting_scaling(prime: Prime) -> AffineElement {
    scaling_on_unit_ball(prime, prime.power(-1))
}

/// The exact density of `g0_* m`: `1/p` on `Z_p`, `1 + 1/p` on the shell
/// `|x|_p = p`, 1 beyond.
pub fn expanding_scaling_density(prime: Prime) -> StepFunction {
    let inv = prime.power(-1);
    let mut parts = vec![(Ball::unit(prime), inv.clone())];
    for b in shell_balls(prime, 0, 1) {
        parts.push((b, Rational::one() + &inv));
    }
    StepFunction::new(prime, ValueKind::Real, parts, Rational::one()).expect("disjoint")
}

/// The pair `(1, p^{-1} 1_{Z_p})`, `(1, 1_{Z_p})` and a test function whose
/// iterated and product transforms differ on `Z_p`.
pub fn composition_counterexample(prime: Prime) -> (AffineElement, AffineElement, StepFunction) {
    let z = Ball::unit(prime);
    let shift = |h: Rational| {
        AffineElement::from_pieces(prime, vec![(z.clone(), SectionPair::new(Rational::one(), h).expect("a = 1"))])
            .expect("one piece")
    };
    let inv = prime.power(-1);
    let classes = prime.get().min(3) as i64;
    let parts = (0..classes)
        .map(|j| (Ball::new(prime, &(&inv + integer(j)), -1), integer(j + 1)))
        .collect();
    let f = StepFunction::new(prime, ValueKind::Real, parts, Rational::zero()).expect("disjoint");
    (shift(inv), shift(Rational::one()), f)
}

fn exponential(f: &StepFunction) -> CylinderFunction {
    CylinderFunction::exponential(f.clone()).expect("test function")
}

type Check<'a> = Box<dyn Fn() -> Vec<CheckReport> + Send + Sync + 'a>;

fn run(checks: Vec<(&'static str, Check<'_>)>) -> Vec<CheckReport> {
    let mut reports: Vec<CheckReport> = checks
        .par_iter()
        .map(|(name, check)| {
            let mut out = check();
            for r in &mut out {
                if r.name.is_empty() {
                    r.name = name.to_string();
                }
            }
            out
        })
        .flatten()
        .collect();
    reports.sort_by(|a, b| a.name.cmp(&b.name));
    reports
}

fn named(name: &str, r: CheckReport) -> CheckReport {
    r.renamed(name)
}

fn unwrap_report(name: &str, r: crate::error::Result<CheckReport>) -> CheckReport {
    match r {
        Ok(r) => named(name, r),
        Err(e) => CheckReport {
            name: name.to_string(),
            mode: CheckMode::Exact,
            kind: CheckKind::Test,
            lhs: f64::NAN,
            rhs: f64::NAN,
            defect: f64::INFINITY,
            pass: false,
            seed: None,
            samples: None,
            depth: None,
            note: Some(format!("error: {e}")),
        },
    }
}

/// Every hard test plus the documented audits for one prime.
pub fn verify_all(prime: Prime, settings: &CheckSettings) -> Vec<CheckReport> {
    verify_all_with(prime, settings, DEFAULT_TRIALS)
}

pub fn verify_all_with(prime: Prime, settings: &CheckSettings, trials: usize) -> Vec<CheckReport> {
    let s = *settings;
    let seed = s.seed;
    let g0 = expanding_scaling(prime);
    let g1 = contracting_scaling(prime);
    let z = ClopenSet::from_ball(Ball::unit(prime));
    let haar = IntensityMeasure::haar(prime);

    let mut checks: Vec<(&'static str, Check<'_>)> = Vec::new();

    checks.push((
        "group-axioms",
        Box::new(move || {
            let mut rng = check_rng(seed, "group-axioms");
            let mut t = Tally::new();
            let e = AffineElement::identity(prime);
            for _ in 0..trials {
                let (a, b, c) = (
                    random::affine(prime, &mut rng),
                    random::affine(prime, &mut rng),
                    random::affine(prime, &mut rng),
                );
                let assoc = a.multiply(&b).multiply(&c) == a.multiply(&b.multiply(&c));
                let unit = a.multiply(&e) == a && e.multiply(&a) == a;
                let inv = a.multiply(&a.inverse()) == e && a.inverse().multiply(&a) == e;
                t.record(assoc && unit && inv, 0.0, || format!("{a}, {b}, {c}"));
            }
            vec![t.report("group-axioms")]
        }),
    ));

    checks.push((
        "section-orientation",
        Box::new(move || {
            let mut rng = check_rng(seed, "section-orientation");
            let mut t = Tally::new();
            for _ in 0..trials {
                let a = random::affine(prime, &mut rng);
                let b = random::affine(prime, &mut rng);
                let x = random::padic(prime, -3, &mut rng);
                let product = a.multiply(&b).act_point(&x);
                let composed = b.section(&x).act(&a.section(&x).act(&x));
                t.record(product == composed, 0.0, || format!("{a}, {b}, x = {x}"));
            }
            vec![t.report("section-orientation")]
        }),
    ));

    checks.push((
        "mass-conservation",
        Box::new(move || {
            let mut rng = check_rng(seed, "mass-conservation");
            let mut t = Tally::new();
            for _ in 0..trials {
                let g = random::affine(prime, &mut rng);
                let rho = IntensityMeasure::haar(prime).pushforward(&g);
                let defect = rho.mass_defect();
                t.record(defect.is_zero(), to_f64(&defect).abs(), || g.to_string());
            }
            vec![t.report("mass-conservation")]
        }),
    ));

    {
        let g0 = g0.clone();
        checks.push((
            "pushforward-expanding-scaling",
            Box::new(move || {
                let rho = IntensityMeasure::haar(prime).pushforward(&g0);
                let want = expanding_scaling_density(prime);
                let ok = rho.density() == &want;
                let mut r = CheckReport::exact_rational(
                    "pushforward-expanding-scaling",
                    CheckKind::Test,
                    &rho.l1_deviation(),
                    &IntensityMeasure::new(want.clone()).expect("valid").l1_deviation(),
                );
                r.pass &= ok;
                vec![r.with_note(format!("density {}", rho.density()))]
            }),
        ));
    }

    checks.push((
        "laplace-transport",
        Box::new(move || {
            let mut rng = check_rng(seed, "laplace-transport");
            let reports = (0..trials).map(|_| {
                let g = random::affine(prime, &mut rng);
                let f = random::test_function(prime, &mut rng);
                unwrap_report("", check_lemma_v(&g, &exponential(&f), CheckMode::Exact, &s))
            });
            vec![tally_reports("laplace-transport", reports.collect::<Vec<_>>())]
        }),
    ));

    checks.push((
        "laplace-transport-moments",
        Box::new(move || {
            let mut rng = check_rng(seed, "laplace-transport-moments");
            let mut reports = Vec::new();
            for _ in 0..trials {
                let g = random::affine(prime, &mut rng);
                let f1 = random::test_function(prime, &mut rng);
                let f2 = random::test_function(prime, &mut rng);
                let poly = CylinderFunction::polynomial(prime, integer(2), vec![(f1, 1), (f2, 1)])
                    .expect("test functions");
                reports.push(unwrap_report("", check_lemma_v(&g, &poly, CheckMode::Exact, &s)));
                let event = random::count_event(prime, &mut rng);
                reports.push(unwrap_report("", check_lemma_v(&g, &event, CheckMode::Exact, &s)));
            }
            vec![tally_reports("laplace-transport-moments", reports)]
        }),
    ));

    {
        let g0 = g0.clone();
        checks.push((
            "laplace-transport-mc",
            Box::new(move || {
                let f = StepFunction::indicator(
                    &ClopenSet::from_ball(Ball::zero_centered(prime, 1)),
                    Rational::new(1.into(), 2.into()),
                );
                vec![unwrap_report(
                    "laplace-transport-mc",
                    check_lemma_v(&g0, &exponential(&f), CheckMode::MonteCarlo, &s),
                )]
            }),
        ));
    }

    checks.push((
        "rn-identity",
        Box::new(move || {
            let mut rng = check_rng(seed, "rn-identity");
            let reports = (0..trials)
                .map(|_| {
                    let g = random::affine(prime, &mut rng);
                    let f = random::test_function(prime, &mut rng);
                    unwrap_report("", check_rn_identity(&g, &f, CheckMode::Exact, &s))
                })
                .collect::<Vec<_>>();
            vec![tally_reports("rn-identity", reports)]
        }),
    ));

    {
        let g0 = g0.clone();
        checks.push((
            "rn-identity-mc",
            Box::new(move || {
                let f = StepFunction::indicator(
                    &ClopenSet::from_ball(Ball::zero_centered(prime, 0)),
                    Rational::new(1.into(), 2.into()),
                );
                vec![unwrap_report("rn-identity-mc", check_rn_identity(&g0, &f, CheckMode::MonteCarlo, &s))]
            }),
        ));
    }

    checks.push((
        "isometry-measure-preserving",
        Box::new(move || {
            let mut rng = check_rng(seed, "isometry-measure-preserving");
            let reports = (0..trials)
                .map(|_| {
                    let g = random::measure_preserving(prime, &mut rng);
                    let f = random::test_function(prime, &mut rng);
                    unwrap_report("", check_isometry(&g, &f, CheckMode::Exact, &s))
                })
                .collect::<Vec<_>>();
            vec![tally_reports("isometry-measure-preserving", reports)]
        }),
    ));

    {
        let (g0, g1, z) = (g0.clone(), g1.clone(), z.clone());
        checks.push((
            "isometry-scaling",
            Box::new(move || {
                let f = StepFunction::indicator(&z, Rational::new(1.into(), 2.into()));
                let expanding = unwrap_report(
                    "isometry-expanding-scaling",
                    check_isometry(&g0, &f, CheckMode::Exact, &s),
                )
                .as_kind(CheckKind::Test);
                let contracting = unwrap_report(
                    "isometry-contracting-scaling",
                    check_isometry(&g1, &f, CheckMode::Exact, &s),
                )
                .as_kind(CheckKind::Audit);
                let norm = unwrap_report(
                    "isometry-contracting-scaling-norm-mc",
                    check_isometry(&g1, &f, CheckMode::MonteCarlo, &s),
                );
                vec![expanding, contracting, norm]
            }),
        ));
    }

    {
        let (g0, g1, z) = (g0.clone(), g1.clone(), z.clone());
        checks.push((
            "lemma-dual",
            Box::new(move || {
                let f = exponential(&StepFunction::indicator(&z, Rational::one()));
                let h = exponential(&StepFunction::indicator(&z, Rational::new(1.into(), 2.into())));
                vec![
                    unwrap_report("lemma-dual-expanding-scaling", check_lemma_dual(&g0, &f, &h, &s)),
                    unwrap_report("lemma-dual-contracting-scaling", check_lemma_dual(&g1, &f, &h, &s)),
                ]
            }),
        ));
    }

    checks.push((
        "decoupler-postconditions",
        Box::new(move || {
            let mut rng = check_rng(seed, "decoupler-postconditions");
            let mut t = Tally::new();
            for _ in 0..trials {
                let l1 = random::clopen(prime, &mut rng);
                let l2 = random::clopen(prime, &mut rng);
                let g = find_decoupler(&l1, &l2);
                let ok = decoupler_facts(&l1, &l2, &g).map(|f| f.all()).unwrap_or(false);
                t.record(ok, 0.0, || format!("{l1}, {l2}"));
            }
            vec![t.report("decoupler-postconditions")]
        }),
    ));

    checks.push((
        "factorization-exponential",
        Box::new(move || {
            let mut rng = check_rng(seed, "factorization-exponential");
            let reports = (0..trials)
                .map(|_| {
                    let f1 = exponential(&random::test_function(prime, &mut rng));
                    let f2 = exponential(&random::test_function(prime, &mut rng));
                    unwrap_report("", check_factorization(&f1, &f2, &s))
                })
                .collect::<Vec<_>>();
            vec![tally_reports("factorization-exponential", reports)]
        }),
    ));

    checks.push((
        "factorization-count-event-mc",
        Box::new(move || {
            let mut rng = check_rng(seed, "factorization-count-event-mc");
            let a1 = random::likely_count_event(prime, 0.1, &mut rng);
            let a2 = random::likely_count_event(prime, 0.1, &mut rng);
            vec![unwrap_report("factorization-count-event-mc", check_factorization(&a1, &a2, &s))
                .with_note(format!("{a1} and {a2}"))]
        }),
    ));

    {
        let z = z.clone();
        checks.push((
            "ergodic-inequality",
            Box::new(move || {
                let void =
                    CylinderFunction::count_event(prime, vec![(z.clone(), CountPredicate::Exactly(0))])
                        .expect("same prime");
                let mut rng = check_rng(seed, "ergodic-inequality");
                let reports: Vec<CheckReport> = (0..trials)
                    .map(|_| {
                        let a1 = random::count_event(prime, &mut rng);
                        let a2 = random::count_event(prime, &mut rng);
                        unwrap_report("", check_ergodic_inequality(&a1, &a2, &s))
                    })
                    .collect();
                vec![
                    unwrap_report("ergodic-inequality-void", check_ergodic_inequality(&void, &void, &s)),
                    tally_reports("ergodic-inequality-random", reports),
                ]
            }),
        ));
    }

    {
        let z = z.clone();
        checks.push((
            "shift-invariance",
            Box::new(move || {
                let mut rng = check_rng(seed, "shift-invariance");
                let mut reports = Vec::new();
                for _ in 0..trials {
                    let f = random::test_function(prime, &mut rng);
                    let e = random::count_event(prime, &mut rng);
                    for functional in [exponential(&f), e] {
                        let g = find_decoupler(functional.window(), functional.window());
                        reports.push(unwrap_report("", check_invariance(&functional, &g, &s)));
                    }
                }
                let literal = AffineElement::localized_shift(&Ball::unit(prime), prime.power(-1));
                let f = exponential(&StepFunction::indicator(&z, Rational::one()));
                vec![
                    tally_reports("shift-invariance", reports),
                    unwrap_report("shift-invariance-literal-contract", check_invariance(&f, &literal, &s)),
                ]
            }),
        ));
    }

    checks.push((
        "support-shift",
        Box::new(move || {
            let mut rng = check_rng(seed, "support-shift");
            let mut t = Tally::new();
            for _ in 0..trials {
                let outer = rng.random_range(0..=2);
                let ball = Ball::zero_centered(prime, outer);
                let lambda = random::clopen(prime, &mut rng)
                    .intersect(&ClopenSet::from_ball(ball.clone()));
                let h = random::padic(prime, -outer - 1, &mut rng);
                let f = random::test_function(prime, &mut rng)
                    .mul(&StepFunction::indicator(&lambda, Rational::one()))
                    .expect("real");
                let g = AffineElement::localized_shift(&ball, h.clone());
                let moved = g.act_function(&f).deviation_support();
                let ok = moved.is_subset_of(&lambda.translate(&-h));
                t.record(ok, 0.0, || format!("{lambda}, {f}"));
            }
            vec![t.report("support-shift")]
        }),
    ));

    {
        let haar = haar.clone();
        let z = z.clone();
        checks.push((
            "sampler",
            Box::new(move || sampler_checks(prime, &haar, &z, &s)),
        ));
    }

    checks.push((
        "pair-sum-transport",
        Box::new(move || {
            let mut rng = check_rng(seed, "pair-sum-transport");
            let mut t = Tally::new();
            for _ in 0..trials {
                let g = random::affine(prime, &mut rng);
                let f = random::test_function(prime, &mut rng);
                let moved = g.act_function(&f);
                let window = ClopenSet::from_ball(Ball::zero_centered(prime, 3));
                let plan = crate::poisson::SamplingPlan::new(
                    &IntensityMeasure::haar(prime),
                    &window,
                    4,
                );
                let gamma = plan.sample(&mut rng);
                let lhs: Rational = gamma.points().iter().map(|x| moved.evaluate(x).clone()).sum();
                let rhs: Rational = gamma.points().iter().map(|x| f.evaluate(&g.act_point(x)).clone()).sum();
                t.record(lhs == rhs, 0.0, || format!("{g}, {f}"));
            }
            vec![t.report("pair-sum-transport")]
        }),
    ));

    checks.push((
        "composition",
        Box::new(move || {
            let (a, b, f) = composition_counterexample(prime);
            let counterexample = check_composition(&a, &b, &f).renamed("composition-counterexample");
            let mut rng = check_rng(seed, "composition");
            let mut t = Tally::new();
            for _ in 0..trials {
                let outer = rng.random_range(0..=2);
                let balls = random::partition(prime, outer, 6, &mut rng);
                let (left, right): (Vec<Ball>, Vec<Ball>) =
                    balls.into_iter().partition(|_| rng.random_bool(0.5));
                let g1 = random::measure_preserving_on(prime, left, &mut rng);
                let g2 = random::measure_preserving_on(prime, right, &mut rng);
                let f = random::test_function(prime, &mut rng);
                let region = composition_defect(&g1, &g2, &f);
                t.record(region.is_empty(), to_f64(&region.measure()), || format!("{g1}, {g2}, {f}"));
            }
            vec![counterexample, t.report("composition-disjoint-measure-preserving")]
        }),
    ));

    {
        let (g0, g1) = (g0.clone(), g1.clone());
        checks.push((
            "roundtrip",
            Box::new(move || {
                vec![
                    CheckReport::exact_rational(
                        "roundtrip-expanding-scaling",
                        CheckKind::Test,
                        &roundtrip_defect(&g0),
                        &Rational::zero(),
                    ),
                    CheckReport::exact_rational(
                        "roundtrip-contracting-scaling",
                        CheckKind::Audit,
                        &roundtrip_defect(&g1),
                        &Rational::zero(),
                    ),
                    check_composition_duality(&g0, &g1).renamed("composition-duality-scalings"),
                ]
            }),
        ));
    }

    run(checks)
}

fn sampler_checks(
    prime: Prime,
    haar: &IntensityMeasure,
    z: &ClopenSet,
    s: &CheckSettings,
) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let void = CylinderFunction::count_event(prime, vec![(z.clone(), CountPredicate::Exactly(0))])
        .expect("same prime");
    let est = expect_mc(&void, haar, s.samples, s.seed, s.depth_margin);
    out.push(match est {
        Ok(e) => CheckReport::compare(
            "sampler-void-probability",
            CheckKind::Test,
            Estimate::Sampled(e),
            Estimate::Exact((-1f64).exp()),
            s,
        ),
        Err(e) => unwrap_report("sampler-void-probability", Err(e)),
    });

    let r = count_statistics(prime, haar, s.samples, s.seed, s.depth_margin);
    let pass = r.fit.p_value > 1e-3 && r.max_covariance_z < 5.0;
    out.push(CheckReport {
        name: "sampler-counts".into(),
        mode: CheckMode::MonteCarlo,
        kind: CheckKind::Test,
        lhs: r.fit.p_value,
        rhs: 1e-3,
        defect: r.max_covariance_z,
        pass,
        seed: Some(s.seed),
        samples: Some(s.samples),
        depth: Some(r.depth),
        note: Some(format!(
            "chi-square {:.4} on {} dof; max covariance |z| {:.3}",
            r.fit.statistic, r.fit.dof, r.max_covariance_z
        )),
    });

    let f = CylinderFunction::exponential(StepFunction::indicator(
        &ClopenSet::from_ball(Ball::new(prime, &Rational::zero(), -2)),
        Rational::one(),
    ))
    .expect("test function");
    let shallow = expect_mc(&f, haar, s.samples, s.seed, 0);
    let deep = expect_mc(&f, haar, s.samples, s.seed.wrapping_add(1), 2);
    out.push(match (shallow, deep) {
        (Ok(a), Ok(b)) => CheckReport::compare(
            "sampler-depth-invariance",
            CheckKind::Test,
            Estimate::Sampled(a),
            Estimate::Sampled(b),
            s,
        ),
        (Err(e), _) | (_, Err(e)) => unwrap_report("sampler-depth-invariance", Err(e)),
    });
    out
}

/// Joint count statistics of the first four grandchildren of `B(0; 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountStatistics {
    pub fit: stats::ChiSquare,
    pub max_covariance_z: f64,
    pub depth: u32,
}

pub fn count_balls(prime: Prime) -> Vec<Ball> {
    Ball::zero_centered(prime, 1)
        .split()
        .iter()
        .flat_map(Ball::split)
        .take(4)
        .collect()
}

pub fn count_statistics(
    prime: Prime,
    mu: &IntensityMeasure,
    n: usize,
    seed: u64,
    depth_margin: u32,
) -> CountStatistics {
    let balls = count_balls(prime);
    let sets: Vec<ClopenSet> = balls.iter().cloned().map(ClopenSet::from_ball).collect();
    let refs: Vec<&ClopenSet> = sets.iter().collect();
    let objects: Vec<&dyn Resolution> = sets.iter().map(|s| s as &dyn Resolution).collect();
    let plan = mc_plan(mu, &refs, &objects, depth_margin);
    let counts: Vec<[u64; 4]> = sample_map(&plan, n, seed, |pts| {
        let mut c = [0u64; 4];
        for x in pts {
            if let Some(i) = balls.iter().position(|b| b.contains(x)) {
                c[i] += 1;
            }
        }
        c
    });
    let mut parts = Vec::new();
    for (i, s) in sets.iter().enumerate() {
        let lambda = to_f64(&mu.mass(s));
        let series: Vec<u64> = counts.iter().map(|c| c[i]).collect();
        let fit = stats::poisson_fit(&series, lambda);
        parts.push((fit.statistic, fit.dof));
    }
    let mut max_z = 0f64;
    for i in 0..4 {
        for j in i + 1..4 {
            let xs: Vec<f64> = counts.iter().map(|c| c[i] as f64).collect();
            let ys: Vec<f64> = counts.iter().map(|c| c[j] as f64).collect();
            max_z = max_z.max(stats::covariance_z(&xs, &ys).abs());
        }
    }
    CountStatistics {
        fit: stats::combine(&parts),
        max_covariance_z: max_z,
        depth: plan.depth(),
    }
}

/// Randomized composition, isometry and duality audits.
pub fn audit(prime: Prime, trials: usize, settings: &CheckSettings) -> Vec<CheckReport> {
    let mut reports: Vec<CheckReport> = (0..trials)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = check_rng(settings.seed, &format!("audit-{i}"));
            let g1 = random::affine(prime, &mut rng);
            let g2 = random::affine(prime, &mut rng);
            let f = random::test_function(prime, &mut rng);
            let composition = check_composition(&g1, &g2, &f)
                .renamed(format!("audit-{i:04}-composition"))
                .with_note(format!("g1 = {g1}; g2 = {g2}; f = {f}"));
            let isometry = unwrap_report(
                &format!("audit-{i:04}-isometry"),
                check_isometry(&g1, &f, CheckMode::Exact, settings),
            )
            .as_kind(CheckKind::Audit);
            let duality = check_composition_duality(&g2, &g1).renamed(format!("audit-{i:04}-duality"));
            [composition, isometry, duality]
        })
        .collect();
    reports.sort_by(|a, b| a.name.cmp(&b.name));
    reports
}

/// Counts of hard-test failures and audit findings.
pub fn summarize(reports: &[CheckReport]) -> (usize, usize) {
    (
        reports.iter().filter(|r| r.is_failure()).count(),
        reports.iter().filter(|r| r.is_finding()).count(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_region_is_unit_ball() {
        let p3 = Prime::new(3).unwrap();
        let (g1, g2, f) = composition_counterexample(p3);
        assert_eq!(composition_defect(&g1, &g2, &f).balls(), &[Ball::unit(p3)]);
    }

    #[test]
    fn expanding_density_matches_pushforward() {
        for p in [2u64, 3, 5] {
            let prime = Prime::new(p).unwrap();
            let rho = IntensityMeasure::haar(prime).pushforward(&expanding_scaling(prime));
            assert_eq!(rho.density(), &expanding_scaling_density(prime));
        }
    }

    #[test]
    fn small_suite_has_no_failures() {
        let prime = Prime::new(3).unwrap();
        let s = CheckSettings {
            samples: 4000,
            ..CheckSettings::default()
        };
        let reports = verify_all_with(prime, &s, 5);
        for r in &reports {
            assert!(!r.is_failure(), "{r}");
        }
        let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert!(reports.iter().any(|r| r.name == "isometry-contracting-scaling" && r.is_finding()));
    }

    #[test]
    fn audit_is_deterministic() {
        let prime = Prime::new(2).unwrap();
        let s = CheckSettings::default();
        assert_eq!(audit(prime, 4, &s), audit(prime, 4, &s));
    }
}
