mod common;

use common::{random_assemblage, random_density, random_distribution, rng};
use proptest::prelude::*;
use rand::Rng;
use steerlab::filtering::averaged_output;
use steerlab::matcore::{uhlmann_fidelity, HermMat};
use steerlab::metrics::{assemblage_fidelity, assemblage_fidelity_dist, closed_forms, singlet_fraction};
use steerlab::Assemblage;

fn with_states(probs: &[Vec<f64>], states: &[HermMat]) -> Assemblage {
    let (m, o) = (probs.len(), probs[0].len());
    let d = states[0].dim();
    let mut comps = Vec::new();
    for x in 0..m {
        for a in 0..o {
            comps.push(states[x * o + a].scale(probs[x][a]));
        }
    }
    Assemblage::new_validated(m, o, d, comps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn symmetric_and_bounded(seed in any::<u64>(), o in 2usize..=3, d in 2usize..=3) {
        let mut r = rng(seed);
        let a = random_assemblage(&mut r, 2, o, d);
        let b = random_assemblage(&mut r, 2, o, d);
        let ab = assemblage_fidelity(&a, &b).unwrap();
        let ba = assemblage_fidelity(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-10, "{ab} vs {ba}");
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ab));
        prop_assert!((assemblage_fidelity_dist(&a, &b).unwrap() - ab).abs() < 1e-12);
    }

    #[test]
    fn one_exactly_on_equal_pairs_and_below_after_perturbation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_assemblage(&mut r, 2, 2, 2);
        prop_assert!((assemblage_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let noise = random_assemblage(&mut r, 2, 2, 2);
        let perturbed = Assemblage::mixture(&[(1.0 - 1e-3, &a), (1e-3, &noise)]).unwrap();
        if perturbed.max_abs_diff(&a) > 1e-7 {
            prop_assert!(assemblage_fidelity(&a, &perturbed).unwrap() < 1.0);
        }
    }

    #[test]
    fn reduces_to_classical_fidelity_for_equal_states(seed in any::<u64>(), o in 2usize..=3) {
        let mut r = rng(seed);
        let rho = random_density(&mut r, 2);
        let p: Vec<Vec<f64>> = (0..2).map(|_| random_distribution(&mut r, o)).collect();
        let q: Vec<Vec<f64>> = (0..2).map(|_| random_distribution(&mut r, o)).collect();
        let states = vec![rho; 2 * o];
        let f = assemblage_fidelity(&with_states(&p, &states), &with_states(&q, &states)).unwrap();
        let expected = (0..2)
            .map(|x| (0..o).map(|a| (p[x][a] * q[x][a]).sqrt()).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((f - expected).abs() < 1e-10);
    }

    #[test]
    fn reduces_to_average_state_fidelity_for_equal_probabilities(seed in any::<u64>()) {
        let mut r = rng(seed);
        // σ_{0|x} = p_x τ_x and σ_{1|x} = 1/2 − p_x τ_x with p_x ≤ 1/2 keep
        // Bob's marginal maximally mixed for any qubit states τ_x
        let p: Vec<Vec<f64>> = (0..2)
            .map(|_| {
                let q = 0.5 * (r.random::<f64>() + 1e-3).min(1.0);
                vec![q, 1.0 - q]
            })
            .collect();
        let mut states = || -> Vec<HermMat> {
            (0..2)
                .flat_map(|x| {
                    let tau = random_density(&mut r, 2);
                    let rest = (&HermMat::identity(2).scale(0.5) - &tau.scale(p[x][0])).scale(1.0 / p[x][1]);
                    [tau, rest]
                })
                .collect()
        };
        let s1 = states();
        let s2 = states();
        let f = assemblage_fidelity(&with_states(&p, &s1), &with_states(&p, &s2)).unwrap();
        let expected = (0..2)
            .map(|x| {
                (0..2)
                    .map(|a| p[x][a] * uhlmann_fidelity(&s1[x * 2 + a], &s2[x * 2 + a]).unwrap())
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!((f - expected).abs() < 1e-10);
    }
}

#[test]
fn closed_form_matches_numerical_fraction() {
    for k in 0..9 {
        let alpha2 = 0.55 + 0.05 * k as f64;
        for n in 2..=8 {
            let numeric = singlet_fraction(&averaged_output(alpha2, n).unwrap()).unwrap();
            let closed = closed_forms(alpha2, n).unwrap().fraction;
            assert!((numeric - closed).abs() < 1e-10, "α² = {alpha2}, N = {n}");
        }
    }
}
