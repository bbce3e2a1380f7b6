//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! the raw stderr handle, which the test harness does not capture.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::{random_assemblage, random_density, random_distribution, random_product, rng};
use steerlab::filtering::{apply_filter, averaged_output, run_protocol_exact, run_protocol_sampled, KrausFilter};
use steerlab::lhs::oracle::oracle_robustness;
use steerlab::lhs::{lhs_membership, lhs_robustness, lhs_robustness_with, Flavor};
use steerlab::matcore::{uhlmann_fidelity, HermMat};
use steerlab::metrics::{assemblage_fidelity, assemblage_fidelity_dist, closed_forms, singlet_fraction};
use steerlab::tomosim::{default_grid, figure3_sweep, reconstruct, simulate_counts, Curve, Metric, Pauli, SweepConfig, SweepRow};
use steerlab::{alpha_assemblage, singlet_assemblage, Assemblage, Error};

/// Singlet LHS-restricted robustness as bracketed by the projection oracle.
const SINGLET_T_STAR: f64 = 0.207_106_781_2;

fn grid() -> Vec<f64> {
    (11..=19).map(|k| k as f64 * 0.05).collect()
}

struct Check {
    failures: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self { failures: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok && self.failures.len() < 5 {
            self.failures.push(what());
        }
    }
}

fn report(id: u32, title: &str, check: Check, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    let mut failures = check.failures;
    if elapsed > budget {
        failures.push(format!("took {elapsed:.1?}, budget {budget:?}"));
    }
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let line = format!(
        "acceptance {id} [{status}] {title} ({elapsed:.2?}){}\n",
        if failures.is_empty() { String::new() } else { format!(": {}", failures.join("; ")) }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(failures.is_empty(), "{line}");
}

#[test]
fn criterion_1_exact_distillation() {
    let started = Instant::now();
    let mut c = Check::new();
    let singlet = singlet_assemblage();
    for alpha2 in grid() {
        let filter = KrausFilter::amplitude_balancing(alpha2).unwrap();
        let (out, _) = apply_filter(&alpha_assemblage(alpha2).unwrap(), &filter, 0).unwrap();
        let diff = out.max_abs_diff(&singlet);
        c.require(diff <= 1e-12, || format!("α² = {alpha2}: deviation {diff:e}"));
    }
    report(1, "filter success maps the α-assemblage onto the singlet assemblage", c, started, Duration::from_secs(1));
}

#[test]
fn criterion_2_success_probability() {
    let started = Instant::now();
    let mut c = Check::new();
    let trials = 100_000u64;
    for (i, alpha2) in grid().into_iter().enumerate() {
        let expected = 2.0 * (1.0 - alpha2);
        let filter = KrausFilter::amplitude_balancing(alpha2).unwrap();
        let (_, p) = apply_filter(&alpha_assemblage(alpha2).unwrap(), &filter, 0).unwrap();
        c.require((p - expected).abs() <= 1e-12, || format!("α² = {alpha2}: exact {p}"));
        let branches = run_protocol_exact(alpha2, 2).unwrap();
        let success: f64 = branches
            .iter()
            .filter(|b| b.outcomes[0] == 0)
            .map(|b| b.branch_probability)
            .sum();
        c.require((success - expected).abs() <= 1e-12, || format!("α² = {alpha2}: branch {success}"));
        let sampled = run_protocol_sampled(alpha2, 2, trials, 1000 + i as u64).unwrap();
        let se = (expected * (1.0 - expected) / trials as f64).sqrt();
        let dev = (sampled.success_frequency - expected).abs();
        c.require(dev <= 5.0 * se, || format!("α² = {alpha2}: sampled deviation {:.2} SE", dev / se));
    }
    report(2, "success probability 2β², exact and sampled", c, started, Duration::from_secs(30));
}

#[test]
fn criterion_3_closed_form() {
    let started = Instant::now();
    let mut c = Check::new();
    for alpha2 in grid() {
        let (alpha, beta) = (alpha2.sqrt(), (1.0 - alpha2).sqrt());
        let delta = alpha2 - (1.0 - alpha2);
        for n in 2..=8 {
            let numeric = singlet_fraction(&averaged_output(alpha2, n).unwrap()).unwrap();
            let formula = (1.0 - 0.5 * (alpha - beta).powi(2) * delta.powi(n as i32 - 1)).sqrt();
            c.require((numeric - formula).abs() <= 1e-10, || format!("α² = {alpha2}, N = {n}: {numeric} vs {formula}"));
        }
    }
    let worked = singlet_fraction(&averaged_output(0.8, 2).unwrap()).unwrap();
    c.require((worked - 0.94f64.sqrt()).abs() <= 1e-10, || format!("worked point {worked}"));
    c.require((worked - 0.969536).abs() <= 1e-6, || format!("worked point {worked}"));
    report(3, "fraction of the averaged output matches the closed form", c, started, Duration::from_secs(30));
}

#[test]
fn criterion_4_fraction_inequality() {
    let started = Instant::now();
    let mut c = Check::new();
    for k in 0..100 {
        let alpha2 = 0.5 + 0.5 * (k as f64 + 0.5) / 100.0;
        let (alpha, beta) = (alpha2.sqrt(), (1.0 - alpha2).sqrt());
        // N = 1 is the equality case u = v, F0 = F1
        for n in 2..=9 {
            let r = closed_forms(alpha2, n).unwrap();
            c.require(r.f0 >= r.f1, || format!("α² = {alpha2}, N = {n}: F0 {} < F1 {}", r.f0, r.f1));
            c.require(r.u >= r.v && r.v >= 0.0, || format!("α² = {alpha2}, N = {n}: u {} v {}", r.u, r.v));
            // recomputed here from α and β rather than read from the report
            let d = (alpha2 - beta * beta).powi(n as i32 - 1);
            let u = (1.0 - (alpha2 - beta * beta).powi(2 * n as i32)).sqrt();
            let v = 1.0 - d * (alpha - beta).powi(2);
            let factored = 2.0 * d * (1.0 - 2.0 * alpha * beta) * (1.0 - d);
            c.require((u * u - v * v - factored).abs() <= 1e-12, || {
                format!("α² = {alpha2}, N = {n}: u²−v² off by {:e}", u * u - v * v - factored)
            });
            c.require((r.u - u).abs() <= 1e-12 && (r.v - v).abs() <= 1e-12, || format!("α² = {alpha2}, N = {n}: u/v mismatch"));
        }
    }
    report(4, "F0 ≥ F1 and u ≥ v ≥ 0 with factored u²−v²", c, started, Duration::from_secs(1));
}

fn with_states(probs: &[Vec<f64>], states: &[HermMat]) -> Assemblage {
    let (m, o) = (probs.len(), probs[0].len());
    let mut comps = Vec::new();
    for x in 0..m {
        for a in 0..o {
            comps.push(states[x * o + a].scale(probs[x][a]));
        }
    }
    Assemblage::new_validated(m, o, states[0].dim(), comps).unwrap()
}

#[test]
fn criterion_5_fidelity_axioms() {
    let started = Instant::now();
    let mut c = Check::new();
    let mut r = rng(5);
    for i in 0..500 {
        let (o, d) = [(2, 2), (3, 2), (2, 3)][i % 3];
        let a = random_assemblage(&mut r, 2, o, d);
        let b = random_assemblage(&mut r, 2, o, d);
        let ab = assemblage_fidelity(&a, &b).unwrap();
        let ba = assemblage_fidelity(&b, &a).unwrap();
        c.require((ab - ba).abs() <= 1e-10, || format!("pair {i}: asymmetric {ab} vs {ba}"));
        c.require((0.0..=1.0).contains(&ab), || format!("pair {i}: out of range {ab}"));
        let dist = assemblage_fidelity_dist(&a, &b).unwrap();
        c.require((dist - ab).abs() <= 1e-12, || format!("pair {i}: dist form {dist} vs {ab}"));
        let same = assemblage_fidelity(&a, &a).unwrap();
        c.require((same - 1.0).abs() <= 1e-12, || format!("pair {i}: self fidelity {same}"));
        let perturbed = Assemblage::mixture(&[(1.0 - 1e-3, &a), (1e-3, &b)]).unwrap();
        if perturbed.max_abs_diff(&a) > 1e-7 {
            let f = assemblage_fidelity(&a, &perturbed).unwrap();
            c.require(f < 1.0, || format!("pair {i}: perturbation left fidelity at {f}"));
        }
    }
    for i in 0..500 {
        // identical Bob states: classical fidelity of the outcome distributions
        let rho = random_density(&mut r, 2);
        let p: Vec<Vec<f64>> = (0..2).map(|_| random_distribution(&mut r, 2)).collect();
        let q: Vec<Vec<f64>> = (0..2).map(|_| random_distribution(&mut r, 2)).collect();
        let states = vec![rho; 4];
        let f = assemblage_fidelity(&with_states(&p, &states), &with_states(&q, &states)).unwrap();
        let classical = (0..2)
            .map(|x| (0..2).map(|a| (p[x][a] * q[x][a]).sqrt()).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        c.require((f - classical).abs() <= 1e-10, || format!("classical pair {i}: {f} vs {classical}"));

        // identical probabilities: average state fidelity, built around a
        // maximally mixed marginal so any conditional states are allowed
        let probs: Vec<Vec<f64>> = (0..2)
            .map(|_| {
                let w = 0.5 * random_distribution(&mut r, 2)[0];
                vec![w, 1.0 - w]
            })
            .collect();
        let conditionals = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<HermMat> {
            (0..2)
                .flat_map(|x| {
                    let tau = random_density(rng, 2);
                    let rest = (&HermMat::identity(2).scale(0.5) - &tau.scale(probs[x][0])).scale(1.0 / probs[x][1]);
                    [tau, rest]
                })
                .collect()
        };
        let s1 = conditionals(&mut r);
        let s2 = conditionals(&mut r);
        let f = assemblage_fidelity(&with_states(&probs, &s1), &with_states(&probs, &s2)).unwrap();
        let expected = (0..2)
            .map(|x| {
                (0..2)
                    .map(|a| probs[x][a] * uhlmann_fidelity(&s1[x * 2 + a], &s2[x * 2 + a]).unwrap())
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        c.require((f - expected).abs() <= 1e-10, || format!("equal-probability pair {i}: {f} vs {expected}"));
    }
    report(5, "assemblage fidelity axioms over 500 random pairs each", c, started, Duration::from_secs(30));
}

#[test]
fn criterion_6_lhs_and_robustness() {
    let started = Instant::now();
    let mut c = Check::new();
    for alpha2 in grid() {
        let filter = KrausFilter::amplitude_balancing(alpha2).unwrap();
        let (failed, _) = apply_filter(&alpha_assemblage(alpha2).unwrap(), &filter, 1).unwrap();
        let t = lhs_robustness(&failed).unwrap().t_star;
        c.require(t <= 1e-6, || format!("ω = 1 branch at α² = {alpha2}: t* = {t:e}"));
    }
    let mut r = rng(6);
    for i in 0..50 {
        let product = random_product(&mut r, 2, 2, 2);
        let t = lhs_robustness(&product).unwrap().t_star;
        c.require(t <= 1e-6, || format!("product {i}: t* = {t:e}"));
        c.require(lhs_membership(&product).unwrap().feasible, || format!("product {i}: no LHS model"));
    }
    let singlet = lhs_robustness(&singlet_assemblage()).unwrap().t_star;
    c.require(singlet > 0.01, || format!("singlet t* = {singlet}"));
    c.require((singlet - SINGLET_T_STAR).abs() <= 1e-6, || format!("singlet t* drifted to {singlet}"));
    let oracle = oracle_robustness(&singlet_assemblage(), Flavor::LhsRestricted).unwrap();
    c.require((oracle.t_star - SINGLET_T_STAR).abs() <= 1e-3, || format!("oracle singlet {}", oracle.t_star));
    for i in 0..50 {
        let asm = random_assemblage(&mut r, 2, 2, 2);
        let flavor = if i % 2 == 0 { Flavor::LhsRestricted } else { Flavor::Generalized };
        let ipm = lhs_robustness_with(&asm, flavor).unwrap().t_star;
        let reference = oracle_robustness(&asm, flavor).unwrap().t_star;
        c.require((ipm - reference).abs() <= 1e-3, || format!("random {i} ({flavor:?}): {ipm} vs {reference}"));
    }
    report(6, "LHS membership, robustness and oracle agreement", c, started, Duration::from_secs(120));
}

fn find(rows: &[SweepRow], delta: f64, curve: Curve, metric: Metric) -> &SweepRow {
    rows.iter()
        .find(|r| (r.delta - delta).abs() < 1e-12 && r.curve == curve && r.metric == metric)
        .expect("row present")
}

#[test]
fn criterion_7_imbalance_sweep() {
    let started = Instant::now();
    let mut c = Check::new();
    let grid = default_grid();
    let rows = figure3_sweep(&grid, &SweepConfig { shots: 100_000, seed: 7, replicas: 10 }).unwrap();
    for &alpha2 in &grid {
        let delta = 2.0 * alpha2 - 1.0;
        if delta > 0.81 + 1e-12 {
            continue;
        }
        let avg_f = find(&rows, delta, Curve::Averaged, Metric::Fraction).exact;
        let orig_f = find(&rows, delta, Curve::Original, Metric::Fraction).exact;
        let avg_t = find(&rows, delta, Curve::Averaged, Metric::Robustness).exact;
        let orig_t = find(&rows, delta, Curve::Original, Metric::Robustness).exact;
        c.require(avg_f > orig_f, || format!("Δ = {delta}: fraction {avg_f} ≤ {orig_f}"));
        c.require(avg_t >= orig_t, || format!("Δ = {delta}: robustness {avg_t} < {orig_t}"));
    }
    for &alpha2 in &grid {
        let delta = 2.0 * alpha2 - 1.0;
        let post = find(&rows, delta, Curve::PostSelected, Metric::Fraction).exact;
        c.require((post - 1.0).abs() <= 1e-9, || format!("Δ = {delta}: post-selected fraction {post}"));
    }
    // error bars shrink as 1/√shots: 100× the shots, about 10× smaller spread
    let coarse = figure3_sweep(&grid, &SweepConfig { shots: 1_000, seed: 7, replicas: 10 }).unwrap();
    let spread = |rows: &[SweepRow]| {
        rows.iter()
            .filter(|r| r.metric == Metric::Fraction && r.curve == Curve::Original)
            .map(|r| r.stddev_reconstructed)
            .sum::<f64>()
    };
    let ratio = spread(&coarse) / spread(&rows);
    c.require((5.0..=20.0).contains(&ratio), || format!("spread ratio {ratio} for 100× shots"));
    report(7, "imbalance sweep ordering, post-selection and error-bar scaling", c, started, Duration::from_secs(300));
}

#[test]
fn criterion_8_tomography_convergence() {
    let started = Instant::now();
    let mut c = Check::new();
    let targets = [alpha_assemblage(0.8).unwrap(), averaged_output(0.8, 2).unwrap(), singlet_assemblage()];
    let (mut runs, mut skipped) = (0, 0);
    for asm in &targets {
        let exact = singlet_fraction(asm).unwrap();
        for seed in 0..10 {
            let mut run = simulate_counts(asm, 1_000_000, seed).unwrap();
            let rec = reconstruct(&mut run).unwrap();
            runs += 1;
            c.require(rec.validate().is_empty(), || format!("seed {seed}: invalid reconstruction"));
            let f = singlet_fraction(&rec).unwrap();
            c.require((f - exact).abs() <= 0.005, || format!("seed {seed}: {f} vs {exact}"));
        }
    }
    let mut r = rng(8);
    for i in 0..200u64 {
        let asm = random_assemblage(&mut r, 2, 2, 2);
        let mut run = simulate_counts(&asm, 100 + 50 * (i % 20), i).unwrap();
        let starved = (0..2).any(|x| (0..2).any(|a| Pauli::ALL.iter().any(|&s| run.cell_total(a, x, s) == 0)));
        match (reconstruct(&mut run), starved) {
            (Ok(rec), false) => {
                runs += 1;
                c.require(rec.validate().is_empty(), || format!("random run {i}: invalid reconstruction"));
            }
            (Err(Error::InsufficientCounts(_)), true) => skipped += 1,
            (Ok(_), true) => c.require(false, || format!("random run {i}: empty cell accepted")),
            (Err(e), _) => c.require(false, || format!("random run {i}: {e}")),
        }
    }
    c.require(runs + skipped == 230 && runs >= 200, || format!("{runs} reconstructions, {skipped} rejected"));
    report(8, "tomography at 10⁶ shots and validity after repair", c, started, Duration::from_secs(120));
}
