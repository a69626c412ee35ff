//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use padic_affine::affine::{composition_defect, AffineElement, SectionPair};
use padic_affine::clopen::ClopenSet;
use padic_affine::literal;
use padic_affine::measure::IntensityMeasure;
use padic_affine::padic::{integer, rational, Ball, Prime, Rational};
use padic_affine::poisson::{expect_mc, CountPredicate, CylinderFunction, SamplingPlan};
use padic_affine::random;
use padic_affine::representation::{
    check_factorization, check_isometry, check_lemma_v, check_rn_identity, check_ergodic_inequality,
    decoupler_facts, find_decoupler, isometry_exponents, rn_density, CheckMode, CheckReport, CheckSettings,
};
use padic_affine::stepfn::{StepFunction, ValueKind};
use padic_affine::suite::{check_rng, count_statistics, expanding_scaling, contracting_scaling};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const BIN: &str = env!("CARGO_BIN_EXE_padic-affine");
const CORPUS: &str = include_str!("data/corpus.tsv");
const SEED: u64 = 42;
const PRIMES: [u64; 3] = [2, 3, 5];

type Outcome = Result<String, Vec<String>>;

struct Criterion {
    id: u32,
    title: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn prime(p: u64) -> Prime {
    Prime::new(p).expect("prime")
}

fn is_zero(x: &Rational) -> bool {
    *x == integer(0)
}

fn rng(label: &str) -> ChaCha8Rng {
    check_rng(SEED, label)
}

fn settings() -> CheckSettings {
    CheckSettings { seed: SEED, samples: 100_000, ..CheckSettings::default() }
}

fn exponential(f: &StepFunction) -> CylinderFunction {
    CylinderFunction::exponential(f.clone()).expect("test function")
}

fn verdict(errors: Vec<String>, summary: String) -> Outcome {
    if errors.is_empty() {
        Ok(summary)
    } else {
        Err(errors)
    }
}

fn require(report: CheckReport, errors: &mut Vec<String>) -> CheckReport {
    if !report.pass {
        errors.push(report.to_string());
    }
    report
}

fn group_algebra() -> Outcome {
    let mut errors = Vec::new();
    for p in PRIMES {
        let prime = prime(p);
        let e = AffineElement::identity(prime);
        let mut rng = rng(&format!("group-{p}"));
        for _ in 0..1000 {
            let a = random::affine(prime, &mut rng);
            let b = random::affine(prime, &mut rng);
            let c = random::affine(prime, &mut rng);
            if a.multiply(&b).multiply(&c) != a.multiply(&b.multiply(&c)) {
                errors.push(format!("associativity fails: {a}, {b}, {c}"));
            }
            if a.multiply(&e) != a || e.multiply(&a) != a {
                errors.push(format!("identity fails: {a}"));
            }
            let inv = a.inverse();
            if a.multiply(&inv) != e || inv.multiply(&a) != e {
                errors.push(format!("inverse fails: {a}"));
            }
        }
    }
    verdict(errors, "3000 triples".into())
}

fn section_orientation() -> Outcome {
    let mut errors = Vec::new();
    let prime = prime(3);
    let mut rng = rng("orientation");
    for _ in 0..1000 {
        let g1 = random::affine(prime, &mut rng);
        let g2 = random::affine(prime, &mut rng);
        let x = random::padic(prime, -3, &mut rng);
        let (s1, s2) = (g1.section(&x), g2.section(&x));
        let first_left = s2.act(&s1.act(&x));
        if g1.multiply(&g2).act_point(&x) != first_left {
            errors.push(format!("{g1}, {g2}, x = {x}"));
        }
        if g1.multiply(&g2).section(&x) != s1.product(&s2) {
            errors.push(format!("section product: {g1}, {g2}, x = {x}"));
        }
    }
    verdict(errors, "1000 triples".into())
}

/// Pushes Haar-uniform points of `B(0; 1)` through `g0` and compares the
/// atom counts with the stated density.
fn pushed_histogram(prime: Prime, n: usize, errors: &mut Vec<String>) {
    let p = prime.get() as i64;
    let g0 = expanding_scaling(prime);
    let window = Ball::zero_centered(prime, 1);
    let atoms: Vec<Ball> = window.split();
    let mut rng = rng(&format!("histogram-{p}"));
    let mut counts = vec![0u64; atoms.len()];
    for _ in 0..n {
        let x = window.sample_uniform(12, &mut rng);
        let y = g0.act_point(&x);
        match atoms.iter().position(|b| b.contains(&y)) {
            Some(i) => counts[i] += 1,
            None => errors.push(format!("pushed point {y} left {window}")),
        }
    }
    // Expected mass fractions: 1/p on Z_p, (1 + 1/p) on each shell ball,
    // over the window mass p.
    for (b, &c) in atoms.iter().zip(&counts) {
        let density = if b.contains(&integer(0)) {
            1.0 / p as f64
        } else {
            1.0 + 1.0 / p as f64
        };
        let pi = density / p as f64;
        let mean = n as f64 * pi;
        let se = (n as f64 * pi * (1.0 - pi)).sqrt();
        let z = (c as f64 - mean) / se;
        if z.abs() > 5.0 {
            errors.push(format!("atom {b}: count {c}, expected {mean:.1}, z = {z:.2}"));
        }
    }
}

fn mass_conservation() -> Outcome {
    let mut errors = Vec::new();
    let p3 = prime(3);
    let mut rng = rng("mass");
    for _ in 0..500 {
        let g = random::affine(p3, &mut rng);
        let rho = IntensityMeasure::haar(p3).pushforward(&g);
        if !is_zero(&rho.mass_defect()) {
            errors.push(format!("mass defect {} for {g}", rho.mass_defect()));
        }
    }
    let want = literal::parse_step("{B(0;0): 1/3, B(1/3;0): 4/3, B(2/3;0): 4/3 | tail 1}", p3)
        .expect("density literal");
    let rho = IntensityMeasure::haar(p3).pushforward(&expanding_scaling(p3));
    if rho.density() != &want {
        errors.push(format!("pushforward of g0 is {}", rho.density()));
    }
    pushed_histogram(p3, 200_000, &mut errors);
    verdict(errors, "500 elements, g0 density and 2e5-point histogram".into())
}

fn laplace_transport() -> Outcome {
    let mut errors = Vec::new();
    let s = settings();
    let mut worst = 0f64;
    for p in PRIMES {
        let prime = prime(p);
        let mut rng = rng(&format!("laplace-{p}"));
        let cases: Vec<(AffineElement, StepFunction)> = (0..200)
            .map(|_| (random::affine(prime, &mut rng), random::test_function(prime, &mut rng)))
            .collect();
        for (g, f) in &cases {
            match check_lemma_v(g, &exponential(f), CheckMode::Exact, &s) {
                Ok(r) => worst = worst.max(require(r, &mut errors).defect),
                Err(e) => errors.push(format!("{g}: {e}")),
            }
        }
        if p == 3 {
            let mc: Vec<_> = cases[..10]
                .par_iter()
                .enumerate()
                .map(|(i, (g, f))| check_lemma_v(g, &exponential(f), CheckMode::MonteCarlo, &s.with_seed(SEED + i as u64)))
                .collect();
            for r in mc {
                match r {
                    Ok(r) => {
                        require(r, &mut errors);
                    }
                    Err(e) => errors.push(e.to_string()),
                }
            }
        }
    }
    verdict(errors, format!("600 exact cases, worst relative defect {worst:.1e}; 10 MC cases"))
}

fn radon_nikodym() -> Outcome {
    let mut errors = Vec::new();
    let s = settings();
    let p3 = prime(3);
    let mut rng = rng("rn");
    for _ in 0..500 {
        let g = random::affine(p3, &mut rng);
        let rho = IntensityMeasure::haar(p3).pushforward(&g);
        if !is_zero(&rho.mass_defect()) {
            errors.push(format!("∫(1 - ρ) dm = {} for {g}", -rho.mass_defect()));
        }
    }
    let mut worst = 0f64;
    for _ in 0..100 {
        let g = random::affine(p3, &mut rng);
        let f = random::test_function(p3, &mut rng);
        match check_rn_identity(&g, &f, CheckMode::Exact, &s) {
            Ok(r) => worst = worst.max(require(r, &mut errors).defect),
            Err(e) => errors.push(e.to_string()),
        }
    }
    for p in PRIMES {
        let prime = prime(p);
        let g0 = expanding_scaling(prime);
        let half = StepFunction::indicator(&ClopenSet::from_ball(Ball::unit(prime)), rational(1, 2));
        match check_rn_identity(&g0, &half, CheckMode::MonteCarlo, &s) {
            Ok(r) => {
                require(r, &mut errors);
            }
            Err(e) => errors.push(e.to_string()),
        }
        // Product form: the mass factor vanishes and R is the product of densities.
        let window = ClopenSet::from_ball(Ball::zero_centered(prime, 1));
        let plan = SamplingPlan::new(&IntensityMeasure::haar(prime), &window, 8);
        let rho = IntensityMeasure::haar(prime).pushforward(&g0);
        for _ in 0..20 {
            let gamma = plan.sample(&mut rng);
            match rn_density(&g0, &gamma) {
                Ok(r) => {
                    let product = gamma
                        .points()
                        .iter()
                        .fold(integer(1), |acc, x| acc * rho.density().evaluate(x));
                    if !is_zero(&r.mass_exponent) || r.product != product {
                        errors.push(format!("R(g0, γ) = {:?}", r));
                    }
                }
                Err(e) => errors.push(e.to_string()),
            }
        }
    }
    verdict(errors, format!("500 masses, 100 exact cases (worst {worst:.1e}), MC replicas for p = 2, 3, 5"))
}

fn unitarity() -> Outcome {
    let mut errors = Vec::new();
    let s = settings();
    for p in PRIMES {
        let prime = prime(p);
        let mut rng = rng(&format!("isometry-{p}"));
        for _ in 0..200 {
            let g = random::measure_preserving(prime, &mut rng);
            let f = random::test_function(prime, &mut rng);
            match check_isometry(&g, &f, CheckMode::Exact, &s) {
                Ok(r) => {
                    require(r, &mut errors);
                }
                Err(e) => errors.push(e.to_string()),
            }
        }
        for c in [rational(1, 2), rational(-1, 3), integer(1)] {
            let f = StepFunction::indicator(&ClopenSet::from_ball(Ball::unit(prime)), c.clone());
            match check_isometry(&expanding_scaling(prime), &f, CheckMode::Exact, &s) {
                Ok(r) => {
                    require(r, &mut errors);
                }
                Err(e) => errors.push(e.to_string()),
            }
            let g1 = contracting_scaling(prime);
            let (lhs, rhs) = isometry_exponents(&g1, &f);
            let two_c = &c * integer(2);
            let want_lhs = [(two_c.clone(), rational(1, p as i64))];
            let want_rhs = [(two_c, integer(1))];
            let got_lhs: Vec<_> = lhs.weights().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            let got_rhs: Vec<_> = rhs.weights().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            if got_lhs != want_lhs || got_rhs != want_rhs {
                errors.push(format!("p = {p}, c = {c}: exponents {lhs} vs {rhs}"));
            }
            match check_isometry(&g1, &f, CheckMode::Exact, &s) {
                Ok(r) if r.is_finding() => {}
                Ok(r) => errors.push(format!("contracting scaling is not a finding: {r}")),
                Err(e) => errors.push(e.to_string()),
            }
        }
    }
    let out = Command::new(BIN)
        .args(["--p", "3", "unitarity", "--g", "aff(a = {B(0;0): 1/3 | tail 1}, b = {| tail 0})", "--f", "{B(0;0): 1/2 | tail 0}"])
        .output()
        .expect("binary runs");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or_default();
    if out.status.code() != Some(0) || report["findings"].as_u64().unwrap_or(0) == 0 {
        errors.push(format!("unitarity command exited {:?} with {report}", out.status.code()));
    }
    verdict(errors, "600 measure-preserving cases, g0 and g1 for p = 2, 3, 5".into())
}

fn decoupling() -> Outcome {
    let mut errors = Vec::new();
    let s = settings();
    let p3 = prime(3);
    let mut rng = rng("decoupling");
    for _ in 0..100 {
        let l1 = random::clopen(p3, &mut rng);
        let l2 = random::clopen(p3, &mut rng);
        let g = find_decoupler(&l1, &l2);
        match decoupler_facts(&l1, &l2, &g) {
            Ok(facts) if facts.all() => {}
            Ok(facts) => errors.push(format!("{l1}, {l2}: {facts:?}")),
            Err(e) => errors.push(e.to_string()),
        }
    }
    let mut worst = 0f64;
    for _ in 0..100 {
        let f1 = exponential(&random::test_function(p3, &mut rng));
        let f2 = exponential(&random::test_function(p3, &mut rng));
        match check_factorization(&f1, &f2, &s) {
            Ok(r) => worst = worst.max(require(r, &mut errors).defect),
            Err(e) => errors.push(e.to_string()),
        }
    }
    let pairs: Vec<(CylinderFunction, CylinderFunction)> = (0..10)
        .map(|_| {
            (
                random::likely_count_event(p3, 0.1, &mut rng),
                random::likely_count_event(p3, 0.1, &mut rng),
            )
        })
        .collect();
    let mc: Vec<_> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (a1, a2))| check_factorization(a1, a2, &s.with_seed(SEED + i as u64)))
        .collect();
    for r in mc {
        match r {
            Ok(r) => {
                if r.mode != CheckMode::MonteCarlo {
                    errors.push(format!("count events were not sampled: {r}"));
                }
                require(r, &mut errors);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let void = CylinderFunction::count_event(
        p3,
        vec![(ClopenSet::from_ball(Ball::unit(p3)), CountPredicate::Exactly(0))],
    )
    .expect("same prime");
    let mut exact_cases = 0;
    for _ in 0..50 {
        let a1 = random::count_event(p3, &mut rng);
        let a2 = random::count_event(p3, &mut rng);
        match check_ergodic_inequality(&a1, &a2, &s) {
            Ok(r) => {
                if r.mode == CheckMode::Exact {
                    exact_cases += 1;
                }
                require(r, &mut errors);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    match check_ergodic_inequality(&void, &void, &s) {
        Ok(r) => {
            let r = require(r, &mut errors);
            let want = (-2.0f64).exp();
            if (r.lhs - want).abs() > 1e-12 {
                errors.push(format!("void pair joint probability {} != e^-2", r.lhs));
            }
        }
        Err(e) => errors.push(e.to_string()),
    }
    verdict(
        errors,
        format!("100 decouplers, 100 exponential pairs (worst {worst:.1e}), 10 MC count-event pairs, {exact_cases} exact ergodic cases"),
    )
}

fn support_shift() -> Outcome {
    let mut errors = Vec::new();
    for p in PRIMES {
        let prime = prime(p);
        let mut rng = rng(&format!("support-{p}"));
        for _ in 0..200 {
            let outer = rng.random_range(0..=2);
            let ball = Ball::zero_centered(prime, outer);
            let lambda = random::clopen(prime, &mut rng).intersect(&ClopenSet::from_ball(ball.clone()));
            let h = random::padic(prime, -outer - 1, &mut rng);
            let f = random::test_function(prime, &mut rng)
                .mul(&StepFunction::indicator(&lambda, integer(1)))
                .expect("real");
            let g = AffineElement::localized_shift(&ball, h.clone());
            let support = g.act_function(&f).deviation_support();
            if !support.is_subset_of(&lambda.translate(&-h.clone())) {
                errors.push(format!("Λ = {lambda}, h = {h}, f = {f}: supp = {support}"));
            }
        }
    }
    verdict(errors, "600 cases".into())
}

fn sampler_statistics() -> Outcome {
    let mut errors = Vec::new();
    let s = settings();
    let p3 = prime(3);
    let haar = IntensityMeasure::haar(p3);
    let mut lines = Vec::new();
    for seed in [1u64, 2, 3] {
        let st = count_statistics(p3, &haar, 100_000, seed, s.depth_margin);
        lines.push(format!("seed {seed}: p = {:.3}, |z| = {:.2}", st.fit.p_value, st.max_covariance_z));
        if st.fit.p_value <= 1e-3 || st.max_covariance_z >= 5.0 {
            errors.push(format!("seed {seed}: {st:?}"));
        }
    }
    let void = CylinderFunction::count_event(
        p3,
        vec![(ClopenSet::from_ball(Ball::unit(p3)), CountPredicate::Exactly(0))],
    )
    .expect("same prime");
    match expect_mc(&void, &haar, 100_000, SEED, s.depth_margin) {
        Ok(est) => {
            let target = (-1.0f64).exp();
            let z = (est.mean - target) / est.stderr;
            lines.push(format!("void {:.4} (z = {z:.2})", est.mean));
            if z.abs() > 5.0 {
                errors.push(format!("void probability {} vs e^-1, z = {z:.2}", est.mean));
            }
        }
        Err(e) => errors.push(e.to_string()),
    }
    verdict(errors, lines.join("; "))
}

fn composition_audit() -> Outcome {
    let mut errors = Vec::new();
    let p3 = prime(3);
    let z3 = Ball::unit(p3);
    let shift = |h: Rational| {
        AffineElement::from_pieces(p3, vec![(z3.clone(), SectionPair::new(integer(1), h).expect("a = 1"))])
            .expect("one piece")
    };
    let (g1, g2) = (shift(rational(1, 3)), shift(integer(1)));
    let f = StepFunction::new(
        p3,
        ValueKind::Real,
        (0..3)
            .map(|j| (Ball::new(p3, &(rational(1, 3) + integer(j)), -1), integer(j + 1)))
            .collect(),
        integer(0),
    )
    .expect("disjoint");
    let region = composition_defect(&g1, &g2, &f);
    if region.is_empty() || !ClopenSet::from_ball(z3.clone()).is_subset_of(&region) {
        errors.push(format!("counterexample region {region}"));
    }
    let mut rng = rng("composition");
    for _ in 0..200 {
        let outer = rng.random_range(0..=2);
        let balls = random::partition(p3, outer, 6, &mut rng);
        let (left, right): (Vec<Ball>, Vec<Ball>) = balls.into_iter().partition(|_| rng.random_bool(0.5));
        let a = random::measure_preserving_on(p3, left, &mut rng);
        let b = random::measure_preserving_on(p3, right, &mut rng);
        let f = random::test_function(p3, &mut rng);
        let region = composition_defect(&a, &b, &f);
        if !region.is_empty() {
            errors.push(format!("{a}, {b}, {f}: region {region}"));
        }
    }
    verdict(errors, format!("counterexample region {region}; 200 disjoint pairs empty"))
}

fn cli() -> Outcome {
    let mut errors = Vec::new();
    let mut n = 0;
    for line in CORPUS.lines().filter(|l| !l.trim().is_empty()) {
        let (p, lit) = line.split_once('\t').expect("tab separated");
        let prime = prime(p.parse().expect("prime"));
        n += 1;
        match literal::parse(lit, prime) {
            Ok(v) if literal::print(&v) == lit => {}
            Ok(v) => errors.push(format!("{lit} printed as {}", literal::print(&v))),
            Err(e) => errors.push(format!("{lit}: {e}")),
        }
    }
    if n < 50 {
        errors.push(format!("corpus has only {n} literals"));
    }
    let run = |workers: &str| {
        Command::new(BIN)
            .args(["--workers", workers, "verify-all", "--p", "3", "--seed", "42"])
            .env_remove("PADIC_AFFINE_SAMPLES")
            .output()
            .expect("binary runs")
    };
    let first = run("1");
    let second = run("1");
    let parallel = run("4");
    if first.status.code() != Some(0) {
        errors.push(format!(
            "verify-all exited {:?}: {}",
            first.status.code(),
            String::from_utf8_lossy(&first.stderr)
        ));
    }
    if first.stdout != second.stdout || first.stdout != parallel.stdout {
        errors.push("verify-all reports differ between runs or worker counts".into());
    }
    verdict(errors, format!("{n} literals; verify-all deterministic and exits 0"))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "group algebra", limit: Duration::from_secs(5), run: group_algebra },
        Criterion { id: 2, title: "section orientation", limit: Duration::from_secs(2), run: section_orientation },
        Criterion { id: 3, title: "mass conservation and pushforward", limit: Duration::from_secs(60), run: mass_conservation },
        Criterion { id: 4, title: "Laplace transport", limit: Duration::from_secs(120), run: laplace_transport },
        Criterion { id: 5, title: "Radon-Nikodym density", limit: Duration::from_secs(120), run: radon_nikodym },
        Criterion { id: 6, title: "unitarity audit", limit: Duration::from_secs(60), run: unitarity },
        Criterion { id: 7, title: "decoupling", limit: Duration::from_secs(120), run: decoupling },
        Criterion { id: 8, title: "support shift", limit: Duration::from_secs(10), run: support_shift },
        Criterion { id: 9, title: "sampler statistics", limit: Duration::from_secs(60), run: sampler_statistics },
        Criterion { id: 10, title: "composition audit", limit: Duration::from_secs(10), run: composition_audit },
        Criterion { id: 11, title: "command line", limit: Duration::from_secs(120), run: cli },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let late = elapsed > c.limit;
        match (&outcome, late) {
            (Ok(summary), false) => {
                println!("PASS {:>2} {} ({:.2}s / {}s): {summary}", c.id, c.title, elapsed.as_secs_f64(), c.limit.as_secs());
            }
            _ => {
                failed += 1;
                println!("FAIL {:>2} {} ({:.2}s / {}s)", c.id, c.title, elapsed.as_secs_f64(), c.limit.as_secs());
                if late {
                    println!("     over the time limit");
                }
                if let Err(errors) = &outcome {
                    for e in errors.iter().take(10) {
                        println!("     {e}");
                    }
                    if errors.len() > 10 {
                        println!("     ... {} more", errors.len() - 10);
                    }
                }
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
