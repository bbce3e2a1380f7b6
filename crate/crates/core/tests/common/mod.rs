#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use steerlab::matcore::{sqrtm_psd, HermMat};
use steerlab::Assemblage;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `G G†` for a complex Gaussian `d × r` matrix `G`.
pub fn random_psd(rng: &mut ChaCha8Rng, d: usize, rank: usize) -> HermMat {
    let g: Vec<Complex64> = (0..d * rank)
        .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
        .collect();
    HermMat::from_fn(d, |i, j| (0..rank).map(|k| g[i * rank + k] * g[j * rank + k].conj()).sum())
}

pub fn random_density(rng: &mut ChaCha8Rng, d: usize) -> HermMat {
    let rank = rng.random_range(1..=d);
    let p = random_psd(rng, d, rank);
    p.scale(1.0 / p.trace())
}

/// Full-rank variant, bounded away from the boundary.
pub fn random_full_rank_density(rng: &mut ChaCha8Rng, d: usize) -> HermMat {
    let p = &random_psd(rng, d, d) + &HermMat::identity(d).scale(0.05);
    p.scale(1.0 / p.trace())
}

/// `o`-outcome POVM `E_a = S^{-1/2} G_a S^{-1/2}` with `S = Σ_a G_a`.
pub fn random_povm(rng: &mut ChaCha8Rng, d: usize, o: usize) -> Vec<HermMat> {
    let mut ranks: Vec<usize> = (0..o).map(|_| rng.random_range(1..=d)).collect();
    if ranks.iter().sum::<usize>() < d {
        ranks[o - 1] = d;
    }
    let parts: Vec<HermMat> = ranks.iter().map(|&r| random_psd(rng, d, r)).collect();
    let total = parts.iter().fold(HermMat::zeros(d), |acc, p| &acc + p);
    let inv_sqrt = total.eigh().reconstruct(|l| 1.0 / l.sqrt());
    parts.iter().map(|p| p.sandwich(&inv_sqrt)).collect()
}

/// Every no-signalling assemblage has the form `√ρ E_{a|x} √ρ`.
pub fn random_assemblage(rng: &mut ChaCha8Rng, m: usize, o: usize, d: usize) -> Assemblage {
    let rho = random_density(rng, d);
    assemblage_over(rng, &rho, m, o)
}

pub fn random_full_rank_assemblage(rng: &mut ChaCha8Rng, m: usize, o: usize, d: usize) -> Assemblage {
    let rho = random_full_rank_density(rng, d);
    assemblage_over(rng, &rho, m, o)
}

fn assemblage_over(rng: &mut ChaCha8Rng, rho: &HermMat, m: usize, o: usize) -> Assemblage {
    let d = rho.dim();
    let root = sqrtm_psd(rho).unwrap();
    let mut comps = Vec::with_capacity(m * o);
    for _ in 0..m {
        for e in random_povm(rng, d, o) {
            comps.push(e.sandwich(&root));
        }
    }
    Assemblage::new_validated(m, o, d, comps).unwrap()
}

pub fn random_distribution(rng: &mut ChaCha8Rng, o: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..o).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// `σ_{a|x} = P(a|x) ρ` with one hidden state.
pub fn random_product(rng: &mut ChaCha8Rng, m: usize, o: usize, d: usize) -> Assemblage {
    let rho = random_density(rng, d);
    let mut comps = Vec::with_capacity(m * o);
    for _ in 0..m {
        for p in random_distribution(rng, o) {
            comps.push(rho.scale(p));
        }
    }
    Assemblage::new_validated(m, o, d, comps).unwrap()
}
