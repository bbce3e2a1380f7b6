//! One-sided local filtering on Bob's qubit and the N-copy distillation
//! protocol built on it.
//!
//! Bob measures the dichotomic filter on copies `0..N-1` (copies are
//! indexed from 0 here). If every measured copy failed he keeps the last,
//! unmeasured copy; otherwise the last copy is discarded together with the
//! failed ones. The kept copies are the output.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assemblage::{alpha_assemblage, check_alpha2, tensor, Assemblage};
use crate::error::{Error, Result};
use crate::matcore::{sqrtm_psd, HermMat};

/// Branch probabilities below this are treated as impossible outcomes.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-12;

/// Largest `N` for exact branch enumeration (`2^(N-1)` branches).
pub const MAX_EXACT_COPIES: usize = 12;

/// Largest number of kept copies whose joint assemblage is materialized.
pub const MAX_MATERIALIZED_COPIES: usize = 4;

const COMPLETENESS_TOL: f64 = 1e-10;

/// Dichotomic (or general) filter given by Hermitian Kraus elements with
/// `Σ_ω K^(ω)† K^(ω) = 1`.
#[derive(Debug, Clone)]
pub struct KrausFilter {
    elements: Vec<HermMat>,
}

impl KrausFilter {
    pub fn new(elements: Vec<HermMat>) -> Result<Self> {
        let dim = elements
            .first()
            .ok_or_else(|| Error::InvalidFilter("no Kraus elements".into()))?
            .dim();
        let mut total = HermMat::zeros(dim);
        for k in &elements {
            if k.dim() != dim {
                return Err(Error::InvalidFilter("Kraus elements differ in dimension".into()));
            }
            total = &total + &HermMat::identity(dim).sandwich(k);
        }
        let dev = total.max_abs_diff(&HermMat::identity(dim));
        if dev > COMPLETENESS_TOL {
            return Err(Error::InvalidFilter(format!(
                "POVM elements sum to identity only within {dev:e}"
            )));
        }
        Ok(Self { elements })
    }

    /// `K^(0) = (β/α)|0⟩⟨0| + |1⟩⟨1|` equalizes the amplitudes of the
    /// α-state; `K^(1) = (√(α²−β²)/α)|0⟩⟨0|` is the failure branch.
    pub fn amplitude_balancing(alpha2: f64) -> Result<Self> {
        let (alpha, beta) = check_alpha2(alpha2)?;
        let delta = (2.0 * alpha2 - 1.0).max(0.0);
        Ok(Self {
            elements: vec![
                HermMat::diag(&[beta / alpha, 1.0]),
                HermMat::diag(&[delta.sqrt() / alpha, 0.0]),
            ],
        })
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn n_outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn kraus(&self, outcome: usize) -> &HermMat {
        &self.elements[outcome]
    }

    /// `M^(ω) = K^(ω)† K^(ω)`.
    pub fn povm_element(&self, outcome: usize) -> HermMat {
        HermMat::identity(self.dim()).sandwich(&self.elements[outcome])
    }

    /// The operator actually applied for outcome `ω`: `K^(ω)` itself when it
    /// is positive semidefinite (then `K = √M`), otherwise `√M^(ω)`.
    pub fn effective_kraus(&self, outcome: usize) -> Result<HermMat> {
        let k = &self.elements[outcome];
        if k.min_eigenvalue() >= -1e-12 {
            Ok(k.clone())
        } else {
            sqrtm_psd(&self.povm_element(outcome))
        }
    }
}

/// Applies filter outcome `ω`: `σ'_{a|x} = K σ_{a|x} K† / Tr[K ρ_B K†]`.
/// Returns the updated assemblage and the outcome probability.
pub fn apply_filter(asm: &Assemblage, filter: &KrausFilter, outcome: usize) -> Result<(Assemblage, f64)> {
    asm.ensure_valid()?;
    if filter.dim() != asm.dim() {
        return Err(Error::DimensionMismatch(format!(
            "filter of dimension {} on a dim={} assemblage",
            filter.dim(),
            asm.dim()
        )));
    }
    if outcome >= filter.n_outcomes() {
        return Err(Error::Domain(format!(
            "outcome {outcome} for a {}-outcome filter",
            filter.n_outcomes()
        )));
    }
    let k = filter.effective_kraus(outcome)?;
    let probability = asm.reduced_state().sandwich(&k).trace();
    if probability < MIN_BRANCH_PROBABILITY {
        return Err(Error::ZeroProbabilityBranch { outcome, probability });
    }
    let out = asm.map_components(|c| c.sandwich(&k).scale(1.0 / probability));
    Ok((out, probability))
}

/// What the parties hold at the end of one protocol branch.
#[derive(Debug, Clone)]
pub enum BranchOutput {
    /// `count ≥ 1` successfully filtered copies, each equal to `copy`.
    Filtered { copy: Assemblage, count: usize },
    /// Every measured copy failed; the untouched last copy is kept.
    Unfiltered(Assemblage),
}

impl BranchOutput {
    /// Single-assemblage marginal: the first kept copy.
    pub fn first_copy(&self) -> &Assemblage {
        match self {
            BranchOutput::Filtered { copy, .. } => copy,
            BranchOutput::Unfiltered(asm) => asm,
        }
    }

    pub fn kept_copies(&self) -> usize {
        match self {
            BranchOutput::Filtered { count, .. } => *count,
            BranchOutput::Unfiltered(_) => 1,
        }
    }

    /// Joint assemblage of all kept copies (tensor power).
    pub fn assemblage(&self) -> Result<Assemblage> {
        match self {
            BranchOutput::Unfiltered(asm) => Ok(asm.clone()),
            BranchOutput::Filtered { copy, count } => {
                if *count > MAX_MATERIALIZED_COPIES {
                    return Err(Error::Domain(format!(
                        "{count} kept copies exceed the materialization cap of {MAX_MATERIALIZED_COPIES}"
                    )));
                }
                let mut joint = copy.clone();
                for _ in 1..*count {
                    joint = tensor(&joint, copy);
                }
                Ok(joint)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub n_copies: usize,
    /// `ω_0 … ω_{N-1}`; the last entry is set by rule, not measured.
    pub outcomes: Vec<u8>,
    /// Indices `i` with `ω_i = 0`.
    pub kept_indices: Vec<usize>,
    pub output: BranchOutput,
    pub branch_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub n_copies: usize,
    pub p_success: f64,
    pub p_fail: f64,
    pub rate: f64,
    pub asymptotic_rate: f64,
}

fn check_copies(n: usize, max: Option<usize>) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("the protocol needs N >= 2 copies, got {n}")));
    }
    if let Some(max) = max {
        if n > max {
            return Err(Error::Domain(format!(
                "exact enumeration is capped at N = {max}, got {n}"
            )));
        }
    }
    Ok(())
}

/// The last-copy rule: `ω_N = 0` iff every measured outcome was 1.
fn complete_outcomes(measured: &[u8]) -> Vec<u8> {
    let mut outcomes = measured.to_vec();
    outcomes.push(if measured.iter().all(|&w| w == 1) { 0 } else { 1 });
    outcomes
}

struct Branches {
    original: Assemblage,
    filtered: Assemblage,
    p_success: f64,
    p_fail: f64,
}

impl Branches {
    fn new(alpha2: f64) -> Result<Self> {
        let original = alpha_assemblage(alpha2)?;
        let filter = KrausFilter::amplitude_balancing(alpha2)?;
        let (filtered, p_success) = apply_filter(&original, &filter, 0)?;
        // the failure branch has positive probability on the open domain
        let p_fail = original.reduced_state().sandwich(&filter.effective_kraus(1)?).trace();
        Ok(Self {
            original,
            filtered,
            p_success,
            p_fail,
        })
    }

    fn result(&self, measured: &[u8], probability: f64) -> ProtocolResult {
        let outcomes = complete_outcomes(measured);
        let kept_indices: Vec<usize> = outcomes
            .iter()
            .enumerate()
            .filter(|(_, &w)| w == 0)
            .map(|(i, _)| i)
            .collect();
        let successes = measured.iter().filter(|&&w| w == 0).count();
        let output = if successes == 0 {
            BranchOutput::Unfiltered(self.original.clone())
        } else {
            BranchOutput::Filtered {
                copy: self.filtered.clone(),
                count: successes,
            }
        };
        ProtocolResult {
            n_copies: outcomes.len(),
            outcomes,
            kept_indices,
            output,
            branch_probability: probability,
        }
    }
}

/// Enumerates all `2^(N-1)` outcome strings of the measured copies, in
/// lexicographic order with copy 0 most significant.
pub fn run_protocol_exact(alpha2: f64, n: usize) -> Result<Vec<ProtocolResult>> {
    check_copies(n, Some(MAX_EXACT_COPIES))?;
    let branches = Branches::new(alpha2)?;
    let measured = n - 1;
    let results = (0..1usize << measured)
        .map(|code| {
            let bits: Vec<u8> = (0..measured)
                .map(|i| ((code >> (measured - 1 - i)) & 1) as u8)
                .collect();
            let p = bits
                .iter()
                .map(|&w| if w == 0 { branches.p_success } else { branches.p_fail })
                .product();
            branches.result(&bits, p)
        })
        .collect();
    Ok(results)
}

/// Probability-weighted mixture of each branch's first kept copy.
pub fn averaged_output(alpha2: f64, n: usize) -> Result<Assemblage> {
    let results = run_protocol_exact(alpha2, n)?;
    let parts: Vec<(f64, &Assemblage)> = results
        .iter()
        .map(|r| (r.branch_probability, r.output.first_copy()))
        .collect();
    Assemblage::mixture(&parts)
}

/// Success and failure probabilities with `P_fail = (1 − 2β²)^(N−1)`, and the
/// rate `2β²(N−1)/N` of extracted filtered copies.
pub fn rate_report(alpha2: f64, n: usize) -> Result<RateReport> {
    check_alpha2(alpha2)?;
    check_copies(n, None)?;
    let p_one = 2.0 * (1.0 - alpha2);
    let p_fail = (1.0 - p_one).powi(n as i32 - 1);
    Ok(RateReport {
        n_copies: n,
        p_success: 1.0 - p_fail,
        p_fail,
        rate: p_one * (n - 1) as f64 / n as f64,
        asymptotic_rate: p_one,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchCount {
    pub outcomes: Vec<u8>,
    pub count: u64,
    pub frequency: f64,
}

#[derive(Debug, Clone)]
pub struct SampledProtocol {
    pub n_copies: usize,
    pub trials: u64,
    pub seed: u64,
    /// Observed branches in lexicographic order of the outcome string.
    pub branches: Vec<BranchCount>,
    /// Fraction of trials with at least one successful filter outcome.
    pub success_frequency: f64,
    /// Empirical mixture of first kept copies.
    pub averaged: Assemblage,
}

/// Monte-Carlo run of the protocol. Trial `t` draws from its own ChaCha
/// stream `(seed, t)`, so the result does not depend on scheduling.
pub fn run_protocol_sampled(alpha2: f64, n: usize, trials: u64, seed: u64) -> Result<SampledProtocol> {
    check_copies(n, None)?;
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let branches = Branches::new(alpha2)?;
    let p_success = branches.p_success;
    let measured = n - 1;
    let draws: Vec<Vec<u8>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            (0..measured)
                .map(|_| if rng.random::<f64>() < p_success { 0 } else { 1 })
                .collect()
        })
        .collect();

    let mut counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    for d in draws {
        *counts.entry(d).or_default() += 1;
    }
    let total = trials as f64;
    let fails = counts
        .iter()
        .filter(|(k, _)| k.iter().all(|&w| w == 1))
        .map(|(_, &c)| c)
        .sum::<u64>();
    let success_frequency = 1.0 - fails as f64 / total;
    let averaged = Assemblage::mixture(&[
        (success_frequency, &branches.filtered),
        (1.0 - success_frequency, &branches.original),
    ])?;
    let branches = counts
        .into_iter()
        .map(|(measured, count)| BranchCount {
            outcomes: complete_outcomes(&measured),
            count,
            frequency: count as f64 / total,
        })
        .collect();
    Ok(SampledProtocol {
        n_copies: n,
        trials,
        seed,
        branches,
        success_frequency,
        averaged,
    })
}

/// Explicit entries of the averaged assemblage, written out component by
/// component rather than as a mixture of branch outputs.
pub fn averaged_components(alpha2: f64, n: usize) -> Result<Assemblage> {
    let (alpha, beta) = check_alpha2(alpha2)?;
    let report = rate_report(alpha2, n)?;
    let (ps, pf) = (report.p_success, report.p_fail);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = HermMat::real_projector(&[s, s]);
    let minus = HermMat::real_projector(&[s, -s]);
    let ap = HermMat::real_projector(&[alpha, beta]);
    let am = HermMat::real_projector(&[alpha, -beta]);
    Assemblage::new(
        2,
        2,
        2,
        vec![
            HermMat::diag(&[0.5 * ps + alpha2 * pf, 0.0]),
            HermMat::diag(&[0.0, 0.5 * ps + (1.0 - alpha2) * pf]),
            (&plus.scale(ps) + &ap.scale(pf)).scale(0.5),
            (&minus.scale(ps) + &am.scale(pf)).scale(0.5),
        ],
    )
}

/// Shorthand for the filter-success output, which is the singlet
/// assemblage up to round-off.
pub fn post_selected_output(alpha2: f64) -> Result<Assemblage> {
    let filter = KrausFilter::amplitude_balancing(alpha2)?;
    Ok(apply_filter(&alpha_assemblage(alpha2)?, &filter, 0)?.0)
}
