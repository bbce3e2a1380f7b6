use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};
use steerlab::assemblage::from_state;
use steerlab::filtering::{apply_filter, averaged_output, rate_report, run_protocol_exact, run_protocol_sampled, KrausFilter};
use steerlab::lhs::lhs_robustness_with;
use steerlab::matcore::HermMat;
use steerlab::metrics::{assemblage_fidelity, singlet_fraction};
use steerlab::tomosim::{default_grid, figure3_sweep, sweep_csv, sweep_json, SweepConfig};
use steerlab::{alpha_assemblage, singlet_assemblage, Assemblage, MeasurementSet};

use crate::args::{DistillArgs, Fig3Args, FilterArgs, MakeArgs, MakeKind, MetricsArgs, Mode, RobustnessArgs};
use crate::error::CliError;
use crate::svg;

/// Largest deviation from the α-assemblage tolerated for `distill --input`.
const ALPHA_MATCH_TOL: f64 = 1e-9;

type Outcome = Result<(), CliError>;

/// Writes to `path` via a temporary file in the same directory, or to stdout.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(text.as_bytes())?;
            tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize")
}

pub fn read_assemblage(path: &Path) -> Result<Assemblage, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Assemblage::from_json(&text)?)
}

fn read_valid(path: &Path) -> Result<Assemblage, CliError> {
    let asm = read_assemblage(path)?;
    let violations = asm.validate();
    if violations.is_empty() {
        Ok(asm)
    } else {
        Err(CliError::Invalid(violations))
    }
}

/// State file: either a bare matrix (rows of `[re, im]`) or an object with
/// `state` and optional `measurements` (`[x][a]` matrices, Pauli Z/X otherwise).
fn read_state(path: &Path) -> Result<(HermMat, MeasurementSet), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let parse = |v: Value| serde_json::from_value::<HermMat>(v).map_err(|e| CliError::Config(format!("matrix: {e}")));
    match value {
        Value::Object(mut obj) => {
            let state = parse(obj.remove("state").ok_or_else(|| CliError::Config("missing \"state\"".into()))?)?;
            let meas = match obj.remove("measurements") {
                None => MeasurementSet::pauli_zx(),
                Some(Value::Array(povms)) => {
                    let povms = povms
                        .into_iter()
                        .map(|p| match p {
                            Value::Array(els) => els.into_iter().map(parse).collect(),
                            _ => Err(CliError::Config("each POVM must be an array of matrices".into())),
                        })
                        .collect::<Result<Vec<Vec<HermMat>>, _>>()?;
                    MeasurementSet::new(povms)?
                }
                Some(_) => return Err(CliError::Config("\"measurements\" must be an array".into())),
            };
            Ok((state, meas))
        }
        other => Ok((parse(other)?, MeasurementSet::pauli_zx())),
    }
}

pub fn make(args: &MakeArgs) -> Outcome {
    let asm = match args.kind {
        MakeKind::Singlet => singlet_assemblage(),
        MakeKind::Alpha => alpha_assemblage(args.alpha2.expect("required by clap"))?,
        MakeKind::FromState => {
            let (state, meas) = read_state(args.state.as_deref().expect("required by clap"))?;
            from_state(&state, &meas)?
        }
    };
    let violations = asm.validate();
    if !violations.is_empty() {
        return Err(CliError::Invalid(violations));
    }
    let text = asm.to_json();
    // the file must read back to the same assemblage
    if Assemblage::from_json(&text)? != asm {
        return Err(CliError::Config("assemblage does not survive a JSON round trip".into()));
    }
    emit(args.out.as_deref(), &text)
}

pub fn validate(input: &Path) -> Outcome {
    let asm = read_valid(input)?;
    let report = json!({
        "valid": true,
        "inputs": asm.n_inputs(),
        "outputs": asm.n_outputs(),
        "dim": asm.dim(),
    });
    emit(None, &pretty(&report))
}

pub fn filter(args: &FilterArgs) -> Outcome {
    let asm = read_valid(&args.input)?;
    let filter = KrausFilter::amplitude_balancing(args.alpha2)?;
    if args.outcome >= filter.n_outcomes() {
        return Err(CliError::Config(format!("outcome must be below {}", filter.n_outcomes())));
    }
    let (out, probability) = apply_filter(&asm, &filter, args.outcome)?;
    emit(Some(&args.out), &out.to_json())?;
    emit(None, &pretty(&json!({ "outcome": args.outcome, "probability": probability })))
}

/// α² of an α-assemblage file, read off the reduced state.
fn alpha2_of(asm: &Assemblage) -> Result<f64, CliError> {
    if asm.dim() != 2 || asm.n_inputs() != 2 || asm.n_outputs() != 2 {
        return Err(CliError::Config("distill input must be a two-input, two-outcome qubit assemblage".into()));
    }
    let alpha2 = asm.reduced_state()[(0, 0)].re;
    let reference = alpha_assemblage(alpha2)?;
    let gap = asm.max_abs_diff(&reference);
    if gap > ALPHA_MATCH_TOL {
        return Err(CliError::Config(format!(
            "input is not an α-assemblage (deviates by {gap:e} from α² = {alpha2})"
        )));
    }
    Ok(alpha2)
}

pub fn distill(args: &DistillArgs) -> Outcome {
    let alpha2 = match (&args.input, args.alpha2) {
        (Some(path), _) => alpha2_of(&read_valid(path)?)?,
        (None, Some(a)) => a,
        (None, None) => unreachable!("clap requires a source"),
    };
    let n = args.copies;
    let rates = rate_report(alpha2, n)?;
    let before = singlet_fraction(&alpha_assemblage(alpha2)?)?;
    let (branches, p_success, output, extra) = match args.mode {
        Mode::Exact => {
            let results = run_protocol_exact(alpha2, n)?;
            let table: Vec<Value> = results
                .iter()
                .map(|r| {
                    json!({
                        "outcomes": r.outcomes,
                        "kept_indices": r.kept_indices,
                        "kept_copies": r.output.kept_copies(),
                        "probability": r.branch_probability,
                    })
                })
                .collect();
            (table, rates.p_success, averaged_output(alpha2, n)?, json!({}))
        }
        Mode::Sampled => {
            let run = run_protocol_sampled(alpha2, n, args.trials, args.seed)?;
            let table = run.branches.iter().map(|b| serde_json::to_value(b).expect("serializable")).collect();
            let extra = json!({ "trials": run.trials, "seed": run.seed });
            (table, run.success_frequency, run.averaged, extra)
        }
    };
    let after = singlet_fraction(&output)?;
    let mut report = json!({
        "mode": match args.mode { Mode::Exact => "exact", Mode::Sampled => "sampled" },
        "alpha2": alpha2,
        "copies": n,
        "branches": branches,
        "p_success": p_success,
        "rate_report": rates,
        "fraction_before": before,
        "fraction_after": after,
    });
    if let (Value::Object(r), Value::Object(e)) = (&mut report, extra) {
        r.extend(e);
    }
    if let Some(path) = &args.assemblage_out {
        emit(Some(path), &output.to_json())?;
    }
    emit(args.out.as_deref(), &pretty(&report))
}

pub fn metrics(args: &MetricsArgs) -> Outcome {
    let report = match (&args.singlet_fraction, args.files.as_slice()) {
        (Some(path), []) => json!({ "fraction": singlet_fraction(&read_valid(path)?)? }),
        (None, [a, b]) => json!({ "fidelity": assemblage_fidelity(&read_valid(a)?, &read_valid(b)?)? }),
        _ => {
            return Err(CliError::Config(
                "give two assemblage files, or --singlet-fraction with one".into(),
            ))
        }
    };
    emit(args.out.as_deref(), &pretty(&report))
}

pub fn robustness(args: &RobustnessArgs) -> Outcome {
    let asm = read_valid(&args.input)?;
    let result = lhs_robustness_with(&asm, args.flavor)?;
    let text = serde_json::to_string_pretty(&result).expect("serializable");
    emit(args.out.as_deref(), &text)
}

pub fn fig3(args: &Fig3Args) -> Outcome {
    if args.shots == 0 {
        return Err(CliError::Config("--shots must be at least 1".into()));
    }
    let grid = args.grid.clone().unwrap_or_else(default_grid);
    if grid.is_empty() {
        return Err(CliError::Config("--grid is empty".into()));
    }
    let config = SweepConfig {
        shots: args.shots,
        seed: args.seed,
        replicas: args.seeds,
    };
    let rows = figure3_sweep(&grid, &config)?;
    let json_out = args
        .out
        .as_deref()
        .and_then(|p| p.extension())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let table = if json_out { sweep_json(&rows) } else { sweep_csv(&rows)? };
    if let Some(path) = &args.svg {
        emit(Some(path), &svg::render(&rows))?;
    }
    emit(args.out.as_deref(), &table)
}
