//! Browser bindings. Each export returns a JSON string; the plain `*_json`
//! functions carry the logic so they can be tested natively.

use serde::Serialize;
use steerlab::filtering::{averaged_output, rate_report, run_protocol_exact, run_protocol_sampled};
use steerlab::lhs::lhs_robustness_with;
use steerlab::metrics::{closed_forms, singlet_fraction};
use steerlab::{alpha_assemblage, Flavor};
use wasm_bindgen::prelude::*;

/// Exact enumeration is cheap up to this many copies; beyond it only the
/// closed form is reported.
const MAX_ENUMERATED: usize = 12;
const MAX_TRIALS: u64 = 1_000_000;
const MAX_POINTS: usize = 40;

#[derive(Serialize)]
struct FractionPoint {
    n: usize,
    closed_form: f64,
    enumerated: Option<f64>,
    p_success: f64,
    rate: f64,
}

#[derive(Serialize)]
struct FractionCurve {
    alpha2: f64,
    original: f64,
    points: Vec<FractionPoint>,
}

pub fn fraction_curve_json(alpha2: f64, max_copies: usize) -> Result<String, String> {
    if !(2..=64).contains(&max_copies) {
        return Err("max copies must lie in 2..=64".into());
    }
    let original = singlet_fraction(&alpha_assemblage(alpha2).map_err(err)?).map_err(err)?;
    let points = (2..=max_copies)
        .map(|n| {
            let enumerated = if n <= MAX_ENUMERATED {
                Some(singlet_fraction(&averaged_output(alpha2, n).map_err(err)?).map_err(err)?)
            } else {
                None
            };
            let rates = rate_report(alpha2, n).map_err(err)?;
            Ok(FractionPoint {
                n,
                closed_form: closed_forms(alpha2, n).map_err(err)?.fraction,
                enumerated,
                p_success: rates.p_success,
                rate: rates.rate,
            })
        })
        .collect::<Result<_, String>>()?;
    to_json(&FractionCurve { alpha2, original, points })
}

#[derive(Serialize)]
struct Branch {
    outcomes: Vec<u8>,
    kept_indices: Vec<usize>,
    probability: f64,
    frequency: f64,
}

#[derive(Serialize)]
struct DistillReport {
    alpha2: f64,
    copies: usize,
    trials: u64,
    seed: u64,
    p_success: f64,
    success_frequency: f64,
    fraction_before: f64,
    fraction_exact: f64,
    fraction_sampled: f64,
    branches: Vec<Branch>,
}

pub fn distill_json(alpha2: f64, copies: usize, trials: u64, seed: u64) -> Result<String, String> {
    if copies > MAX_ENUMERATED {
        return Err(format!("at most {MAX_ENUMERATED} copies in the demo"));
    }
    if trials > MAX_TRIALS {
        return Err(format!("at most {MAX_TRIALS} trials in the demo"));
    }
    let exact = run_protocol_exact(alpha2, copies).map_err(err)?;
    let sampled = run_protocol_sampled(alpha2, copies, trials, seed).map_err(err)?;
    let branches = exact
        .iter()
        .map(|r| Branch {
            frequency: sampled
                .branches
                .iter()
                .find(|b| b.outcomes == r.outcomes)
                .map_or(0.0, |b| b.frequency),
            outcomes: r.outcomes.clone(),
            kept_indices: r.kept_indices.clone(),
            probability: r.branch_probability,
        })
        .collect();
    to_json(&DistillReport {
        alpha2,
        copies,
        trials,
        seed,
        p_success: rate_report(alpha2, copies).map_err(err)?.p_success,
        success_frequency: sampled.success_frequency,
        fraction_before: singlet_fraction(&alpha_assemblage(alpha2).map_err(err)?).map_err(err)?,
        fraction_exact: singlet_fraction(&averaged_output(alpha2, copies).map_err(err)?).map_err(err)?,
        fraction_sampled: singlet_fraction(&sampled.averaged).map_err(err)?,
        branches,
    })
}

#[derive(Serialize)]
struct RobustnessPoint {
    alpha2: f64,
    delta: f64,
    original: f64,
    averaged: f64,
}

/// Robustness of the original and the `copies`-copy averaged assemblage on
/// `points` evenly spaced α² values in `[lo, hi]`.
pub fn robustness_curve_json(lo: f64, hi: f64, points: usize, copies: usize, flavor: &str) -> Result<String, String> {
    let flavor: Flavor = flavor.parse().map_err(err)?;
    if !(2..=MAX_POINTS).contains(&points) || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(format!("need lo < hi and 2..={MAX_POINTS} points"));
    }
    let rows = (0..points)
        .map(|i| {
            let alpha2 = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let t = |asm| lhs_robustness_with(&asm, flavor).map(|r| r.t_star).map_err(err);
            Ok(RobustnessPoint {
                alpha2,
                delta: 2.0 * alpha2 - 1.0,
                original: t(alpha_assemblage(alpha2).map_err(err)?)?,
                averaged: t(averaged_output(alpha2, copies).map_err(err)?)?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    to_json(&rows)
}

fn err(e: steerlab::Error) -> String {
    e.to_string()
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn fraction_curve(alpha2: f64, max_copies: usize) -> Result<String, JsValue> {
    fraction_curve_json(alpha2, max_copies).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn distill(alpha2: f64, copies: usize, trials: u32, seed: u32) -> Result<String, JsValue> {
    distill_json(alpha2, copies, trials as u64, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn robustness_curve(lo: f64, hi: f64, points: usize, copies: usize, flavor: &str) -> Result<String, JsValue> {
    robustness_curve_json(lo, hi, points, copies, flavor).map_err(|e| JsValue::from_str(&e))
}
