//! Simulated tomography of qubit assemblages and the imbalance sweep.
//!
//! Each input `x` is probed with the three Pauli settings. A setting receives
//! `shots` trials: Alice's outcome is multinomial with `P(a|x)`, Bob's ±1
//! outcome binomial given `a`. Reconstruction is linear inversion, PSD
//! clamping and a no-signalling repair.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assemblage::{alpha_assemblage, check_alpha2, Assemblage};
use crate::error::{Error, Result};
use crate::filtering::{averaged_output, post_selected_output, run_protocol_sampled};
use crate::lhs::lhs_robustness;
use crate::matcore::HermMat;
use crate::metrics::singlet_fraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> HermMat {
        match self {
            Pauli::X => HermMat::pauli_x(),
            Pauli::Y => HermMat::pauli_y(),
            Pauli::Z => HermMat::pauli_z(),
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CountKey {
    pub a: usize,
    pub x: usize,
    pub setting: Pauli,
    /// Bob's outcome, `+1` or `-1`.
    pub outcome: i8,
}

#[derive(Debug, Clone)]
pub struct TomographyRun {
    pub true_assemblage: Assemblage,
    pub shots_per_setting: u64,
    pub seed: u64,
    pub counts: BTreeMap<CountKey, u64>,
    pub reconstructed: Option<Assemblage>,
    pub reconstruction_residual: f64,
}

impl TomographyRun {
    pub fn count(&self, a: usize, x: usize, setting: Pauli, outcome: i8) -> u64 {
        self.counts
            .get(&CountKey { a, x, setting, outcome })
            .copied()
            .unwrap_or(0)
    }

    /// Shots that landed in cell `(a, x, s)`.
    pub fn cell_total(&self, a: usize, x: usize, setting: Pauli) -> u64 {
        self.count(a, x, setting, 1) + self.count(a, x, setting, -1)
    }
}

fn check_qubit(asm: &Assemblage) -> Result<()> {
    if asm.dim() != 2 {
        return Err(Error::Domain(format!(
            "tomography needs a qubit on Bob's side, got dimension {}",
            asm.dim()
        )));
    }
    asm.ensure_valid()
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 {
        return 0;
    }
    let p = p.clamp(0.0, 1.0);
    Binomial::new(n, p).expect("probability clamped to [0, 1]").sample(rng)
}

pub fn simulate_counts(asm: &Assemblage, shots: u64, seed: u64) -> Result<TomographyRun> {
    check_qubit(asm)?;
    if shots == 0 {
        return Err(Error::Domain("shots must be at least 1".into()));
    }
    let (m, o) = (asm.n_inputs(), asm.n_outputs());
    let mut counts = BTreeMap::new();
    for x in 0..m {
        for setting in Pauli::ALL {
            let mut rng = stream_rng(seed, x as u64 * 3 + setting.index());
            let sigma = setting.matrix();
            // multinomial over a as a chain of conditional binomials
            let mut remaining = shots;
            let mut mass = 1.0;
            for a in 0..o {
                let p = asm.probability(a, x);
                let n_a = if a + 1 == o {
                    remaining
                } else if mass > 0.0 {
                    binomial(&mut rng, remaining, p / mass)
                } else {
                    0
                };
                remaining -= n_a;
                mass -= p;
                let c = asm.component(a, x);
                let plus_prob = if p > 0.0 { 0.5 * (1.0 + c.inner(&sigma) / p) } else { 0.5 };
                let plus = binomial(&mut rng, n_a, plus_prob);
                counts.insert(CountKey { a, x, setting, outcome: 1 }, plus);
                counts.insert(CountKey { a, x, setting, outcome: -1 }, n_a - plus);
            }
        }
    }
    Ok(TomographyRun {
        true_assemblage: asm.clone(),
        shots_per_setting: shots,
        seed,
        counts,
        reconstructed: None,
        reconstruction_residual: 0.0,
    })
}

/// Reconstructs from counts and stores the result in `run`.
pub fn reconstruct(run: &mut TomographyRun) -> Result<Assemblage> {
    let asm = &run.true_assemblage;
    let (m, o) = (asm.n_inputs(), asm.n_outputs());
    let mut probabilities = vec![0.0; m * o];
    let mut bloch = vec![[0.0; 3]; m * o];
    for x in 0..m {
        let total: u64 = (0..o)
            .flat_map(|a| Pauli::ALL.map(|s| run.cell_total(a, x, s)))
            .sum();
        for a in 0..o {
            let mut hits = 0;
            for s in Pauli::ALL {
                let n = run.cell_total(a, x, s);
                if n == 0 {
                    return Err(Error::InsufficientCounts(format!(
                        "no shots in cell a={a}, x={x}, setting {s:?}"
                    )));
                }
                hits += n;
                bloch[x * o + a][s as usize] =
                    (run.count(a, x, s, 1) as f64 - run.count(a, x, s, -1) as f64) / n as f64;
            }
            probabilities[x * o + a] = hits as f64 / total as f64;
        }
    }
    let (out, residual) = assemble(m, o, &probabilities, &bloch)?;
    run.reconstructed = Some(out.clone());
    run.reconstruction_residual = residual;
    Ok(out)
}

/// Reconstruction from exact probabilities and Pauli expectations.
pub fn reconstruct_exact(asm: &Assemblage) -> Result<Assemblage> {
    check_qubit(asm)?;
    let (m, o) = (asm.n_inputs(), asm.n_outputs());
    let mut probabilities = vec![0.0; m * o];
    let mut bloch = vec![[0.0; 3]; m * o];
    for x in 0..m {
        for a in 0..o {
            let p = asm.probability(a, x);
            probabilities[x * o + a] = p;
            if p > 0.0 {
                for s in Pauli::ALL {
                    bloch[x * o + a][s as usize] = asm.component(a, x).inner(&s.matrix()) / p;
                }
            }
        }
    }
    Ok(assemble(m, o, &probabilities, &bloch)?.0)
}

fn assemble(m: usize, o: usize, probabilities: &[f64], bloch: &[[f64; 3]]) -> Result<(Assemblage, f64)> {
    let raw: Vec<HermMat> = probabilities
        .iter()
        .zip(bloch)
        .map(|(&p, r)| {
            let mut h = HermMat::identity(2);
            for s in Pauli::ALL {
                h = &h + &s.matrix().scale(r[s as usize]);
            }
            h.scale(0.5 * p)
        })
        .collect();

    let mut comps: Vec<HermMat> = raw.iter().map(HermMat::project_psd_preserving_trace).collect();

    // no-signalling: move every x-marginal to the average marginal,
    // sharing the correction in proportion to component traces
    let marginal = |comps: &[HermMat], x: usize| {
        (0..o).fold(HermMat::zeros(2), |acc, a| &acc + &comps[x * o + a])
    };
    let target = (0..m)
        .fold(HermMat::zeros(2), |acc, x| &acc + &marginal(&comps, x))
        .scale(1.0 / m as f64);
    for x in 0..m {
        let current = marginal(&comps, x);
        let total = current.trace();
        let delta = &target - &current;
        for a in 0..o {
            let share = if total > 0.0 { comps[x * o + a].trace() / total } else { 1.0 / o as f64 };
            comps[x * o + a] = &comps[x * o + a] + &delta.scale(share);
        }
    }

    // the repair can push a rank-deficient component slightly negative;
    // the smallest common white-noise admixture restores positivity
    let mut p_noise: f64 = 0.0;
    for c in &comps {
        let lmin = c.min_eigenvalue();
        if lmin < 0.0 {
            let floor = c.trace() / 2.0;
            p_noise = p_noise.max(-lmin / (floor - lmin));
        }
    }
    if p_noise > 0.0 {
        let p = (p_noise * (1.0 + 1e-9)).min(1.0);
        comps = comps
            .iter()
            .map(|c| &c.scale(1.0 - p) + &HermMat::identity(2).scale(p * c.trace() / 2.0))
            .collect();
    }

    let residual = raw
        .iter()
        .zip(&comps)
        .map(|(r, c)| r.max_abs_diff(c))
        .fold(0.0, f64::max);
    let out = Assemblage::new(m, o, 2, comps)?;
    out.ensure_valid()?;
    Ok((out, residual))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Curve {
    Original,
    PostSelected,
    Averaged,
}

impl Curve {
    pub const ALL: [Curve; 3] = [Curve::Original, Curve::PostSelected, Curve::Averaged];

    pub fn name(self) -> &'static str {
        match self {
            Curve::Original => "original",
            Curve::PostSelected => "post-selected",
            Curve::Averaged => "averaged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Fraction,
    Robustness,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Fraction, Metric::Robustness];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Fraction => "fraction",
            Metric::Robustness => "robustness",
        }
    }

    fn evaluate(self, asm: &Assemblage) -> Result<f64> {
        match self {
            Metric::Fraction => singlet_fraction(asm),
            Metric::Robustness => Ok(lhs_robustness(asm)?.t_star),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub curve: Curve,
    pub metric: Metric,
    pub exact: f64,
    pub mean_reconstructed: f64,
    pub stddev_reconstructed: f64,
    pub shots: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub shots: u64,
    pub seed: u64,
    pub replicas: usize,
}

/// α² values from 0.55 to 0.95 in steps of 0.05, plus 0.905 (imbalance 0.81).
pub fn default_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (11..=19).map(|k| k as f64 * 0.05).collect();
    grid.push(0.905);
    grid.sort_by(f64::total_cmp);
    grid
}

fn exact_assemblage(curve: Curve, alpha2: f64) -> Result<Assemblage> {
    match curve {
        Curve::Original => alpha_assemblage(alpha2),
        Curve::PostSelected => post_selected_output(alpha2),
        Curve::Averaged => averaged_output(alpha2, 2),
    }
}

/// Seed of replica `replica` of curve `curve` at grid point `point`.
fn replica_seed(seed: u64, point: usize, curve: Curve, replica: usize) -> u64 {
    let stream = ((point as u64) << 32) | ((curve as u64) << 16) | replica as u64;
    stream_rng(seed, stream).random()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Singlet fraction and robustness of the three curves along `grid`, exact
/// and tomographically reconstructed. The averaged curve's reconstructed
/// input mixes branches with frequencies sampled from `shots` protocol runs.
pub fn figure3_sweep(grid: &[f64], config: &SweepConfig) -> Result<Vec<SweepRow>> {
    for &a2 in grid {
        check_alpha2(a2)?;
    }
    if config.replicas == 0 {
        return Err(Error::Domain("at least one replica is required".into()));
    }
    let cells: Vec<(usize, Curve)> = (0..grid.len())
        .flat_map(|i| Curve::ALL.map(|c| (i, c)))
        .collect();
    let per_cell: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(point, curve)| {
            let alpha2 = grid[point];
            let exact = exact_assemblage(curve, alpha2)?;
            let reconstructed: Vec<Assemblage> = (0..config.replicas)
                .into_par_iter()
                .map(|r| {
                    let seed = replica_seed(config.seed, point, curve, r);
                    let truth = match curve {
                        Curve::Averaged => run_protocol_sampled(alpha2, 2, config.shots, seed)?.averaged,
                        _ => exact.clone(),
                    };
                    let mut run = simulate_counts(&truth, config.shots, seed)?;
                    reconstruct(&mut run)
                })
                .collect::<Result<_>>()?;
            Metric::ALL
                .iter()
                .map(|&metric| {
                    let values: Vec<f64> = reconstructed
                        .iter()
                        .map(|a| metric.evaluate(a))
                        .collect::<Result<_>>()?;
                    let (mean, std) = mean_std(&values);
                    Ok(SweepRow {
                        delta: 2.0 * alpha2 - 1.0,
                        curve,
                        metric,
                        exact: metric.evaluate(&exact)?,
                        mean_reconstructed: mean,
                        stddev_reconstructed: std,
                        shots: config.shots,
                        seed: config.seed,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Format(format!("csv: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn sweep_json(rows: &[SweepRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}
