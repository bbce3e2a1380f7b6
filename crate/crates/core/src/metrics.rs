//! Assemblage fidelity, the singlet-assemblage fraction and the closed-form
//! fraction of the averaged protocol output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assemblage::{check_alpha2, singlet_assemblage, Assemblage};
use crate::error::{Error, Result};
use crate::matcore::{uhlmann_fidelity, HermMat};
use num_complex::Complex64;

/// Per-input sums `Σ_a F(σ_{a|x}, ξ_{a|x})`.
fn per_input_fidelities(first: &Assemblage, second: &Assemblage) -> Result<Vec<f64>> {
    first.ensure_same_shape(second)?;
    (0..first.n_inputs())
        .map(|x| {
            (0..first.n_outputs())
                .map(|a| uhlmann_fidelity(first.component(a, x), second.component(a, x)))
                .sum()
        })
        .collect()
}

/// `min_x Σ_a F(σ_{a|x}, ξ_{a|x})`.
pub fn assemblage_fidelity(first: &Assemblage, second: &Assemblage) -> Result<f64> {
    Ok(per_input_fidelities(first, second)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// Average fidelity when Alice draws her input from `p_x`, evaluated as
/// `Σ_{a,x} F(p_x σ_{a|x}, p_x ξ_{a|x})`.
pub fn average_fidelity(first: &Assemblage, second: &Assemblage, p_x: &[f64]) -> Result<f64> {
    first.ensure_same_shape(second)?;
    if p_x.len() != first.n_inputs() {
        return Err(Error::ShapeMismatch(format!(
            "input distribution has {} entries for m = {}",
            p_x.len(),
            first.n_inputs()
        )));
    }
    if p_x.iter().any(|&p| p < 0.0) || (p_x.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain("input distribution is not normalized".into()));
    }
    let mut total = 0.0;
    for (x, &p) in p_x.iter().enumerate() {
        for a in 0..first.n_outputs() {
            let f = uhlmann_fidelity(&first.component(a, x).scale(p), &second.component(a, x).scale(p))?;
            total += f;
        }
    }
    Ok(total)
}

/// Worst case of [`average_fidelity`] over input distributions. The
/// objective is linear in `p_x`, so the minimum sits on a vertex of the
/// simplex and only the `m` deterministic distributions are evaluated.
pub fn assemblage_fidelity_dist(first: &Assemblage, second: &Assemblage) -> Result<f64> {
    let m = first.n_inputs();
    let mut best = f64::INFINITY;
    for x in 0..m {
        let mut vertex = vec![0.0; m];
        vertex[x] = 1.0;
        best = best.min(average_fidelity(first, second, &vertex)?);
    }
    Ok(best)
}

fn ensure_qubit_pair(asm: &Assemblage) -> Result<()> {
    if (asm.n_inputs(), asm.n_outputs(), asm.dim()) != (2, 2, 2) {
        return Err(Error::ShapeMismatch(format!(
            "singlet fraction needs m = o = dim = 2, got m={}, o={}, dim={}",
            asm.n_inputs(),
            asm.n_outputs(),
            asm.dim()
        )));
    }
    Ok(())
}

/// Assemblage fidelity with the singlet assemblage.
pub fn singlet_fraction(asm: &Assemblage) -> Result<f64> {
    ensure_qubit_pair(asm)?;
    let value = assemblage_fidelity(asm, &singlet_assemblage())?;
    debug_assert!(
        (value - singlet_fraction_pure_target(asm)?).abs() < 1e-7,
        "fidelity and pure-target routes disagree"
    );
    Ok(value)
}

/// Pure-target route: every singlet component is `½|Φ_{a,x}⟩⟨Φ_{a,x}|`, so
/// the fraction is `(1/√2) min_x Σ_a √⟨Φ_{a,x}|σ_{a|x}|Φ_{a,x}⟩`.
pub fn singlet_fraction_pure_target(asm: &Assemblage) -> Result<f64> {
    ensure_qubit_pair(asm)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let targets = [[[1.0, 0.0], [0.0, 1.0]], [[s, s], [s, -s]]];
    let mut best = f64::INFINITY;
    for (x, kets) in targets.iter().enumerate() {
        let mut sum = 0.0;
        for (a, ket) in kets.iter().enumerate() {
            let c = asm.component(a, x);
            let mut expectation = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    expectation += ket[i] * ket[j] * c[(i, j)].re;
                }
            }
            sum += expectation.max(0.0).sqrt();
        }
        best = best.min(sum * s);
    }
    Ok(best)
}

/// Closed-form fraction of the averaged `N`-copy output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormReport {
    pub alpha2: f64,
    pub n_copies: usize,
    /// Imbalance `Δ = α² − β²`.
    pub delta: f64,
    /// Input-0 (Z) contribution.
    pub f0: f64,
    /// Input-1 (X) contribution.
    pub f1: f64,
    /// `2 F0² − 1 = √(1 − Δ^{2N})`.
    pub u: f64,
    /// `2 F1² − 1 = 1 − Δ^{N−1}(α − β)²`.
    pub v: f64,
    pub fraction: f64,
}

impl ClosedFormReport {
    /// `u² − v²` evaluated in factored form, `2Δ^{N−1}(1 − 2αβ)(1 − Δ^{N−1})`.
    pub fn u2_minus_v2_factored(&self) -> f64 {
        let (alpha, beta) = (self.alpha2.sqrt(), (1.0 - self.alpha2).sqrt());
        let p_fail = self.delta.powi(self.n_copies as i32 - 1);
        2.0 * p_fail * (1.0 - 2.0 * alpha * beta) * (1.0 - p_fail)
    }
}

/// Fraction `min{F0, F1}` of the averaged output, with
/// `P_fail = Δ^{N−1}`, `F0 = ½(√(1 + P_fail Δ) + √(1 − P_fail Δ))` and
/// `F1 = √(1 − ½ P_fail (α − β)²)`. `N = 1` gives the unprocessed assemblage.
pub fn closed_forms(alpha2: f64, n: usize) -> Result<ClosedFormReport> {
    let (alpha, beta) = check_alpha2(alpha2)?;
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let delta = 2.0 * alpha2 - 1.0;
    let p_fail = delta.powi(n as i32 - 1);
    let gap2 = (alpha - beta).powi(2);
    let f0 = 0.5 * ((1.0 + p_fail * delta).sqrt() + (1.0 - p_fail * delta).sqrt());
    let f1 = (1.0 - 0.5 * p_fail * gap2).sqrt();
    Ok(ClosedFormReport {
        alpha2,
        n_copies: n,
        delta,
        f0,
        f1,
        u: (1.0 - delta.powi(2 * n as i32)).sqrt(),
        v: 1.0 - p_fail * gap2,
        fraction: f0.min(f1),
    })
}

/// Diagnostic: best singlet fraction over `samples` random Bob-side
/// unitaries `U σ_{a|x} U†` (Haar-distributed, seeded), together with the
/// unrotated value. Not part of the fraction's definition.
pub fn singlet_fraction_unitary_scan(asm: &Assemblage, samples: usize, seed: u64) -> Result<(f64, f64)> {
    ensure_qubit_pair(asm)?;
    let plain = singlet_fraction(asm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = plain;
    for _ in 0..samples {
        let u = haar_qubit_unitary(&mut rng);
        let rotated = asm.map_components(|c| conjugate(c, &u));
        best = best.max(singlet_fraction(&rotated)?);
    }
    Ok((plain, best))
}

fn haar_qubit_unitary(rng: &mut impl Rng) -> [Complex64; 4] {
    // normalized Gaussian 4-vector ↦ SU(2) element [[a, -b*], [b, a*]]
    let g: Vec<f64> = (0..4).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let a = Complex64::new(g[0], g[1]) / norm;
    let b = Complex64::new(g[2], g[3]) / norm;
    [a, -b.conj(), b, a.conj()]
}

fn conjugate(c: &HermMat, u: &[Complex64; 4]) -> HermMat {
    HermMat::from_fn(2, |i, j| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..2 {
            for l in 0..2 {
                acc += u[i * 2 + k] * c[(k, l)] * u[j * 2 + l].conj();
            }
        }
        acc
    })
}
