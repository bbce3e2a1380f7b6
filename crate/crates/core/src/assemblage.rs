//! Assemblages: families `{σ_{a|x}}` of subnormalized Bob-side operators,
//! with `Tr σ_{a|x} = P(a|x)`.
//!
//! Components are stored input-major (`x * o + a`). Only the subnormalized
//! operators are stored; probabilities and conditional states are derived.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::HermMat;

/// Tolerance for the PSD, no-signalling and normalization invariants.
pub const VALIDATION_TOL: f64 = 1e-9;

/// Components whose trace is below this are treated as the zero operator for
/// normalization queries.
pub const ZERO_TRACE: f64 = 1e-12;

pub const SCHEMA: &str = "assemblage/v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Assemblage {
    m: usize,
    o: usize,
    dim: usize,
    components: Vec<HermMat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Psd,
    Trace,
    NoSignalling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Offending output; `None` for constraints on the marginal `Σ_a σ_{a|x}`.
    pub a: Option<usize>,
    pub x: usize,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.a) {
            (ViolationKind::Psd, Some(a)) => write!(
                f,
                "component ({a}|{}) has eigenvalue {:e}",
                self.x, -self.magnitude
            ),
            (ViolationKind::Trace, _) => write!(
                f,
                "marginal for x={} has trace off by {:e}",
                self.x, self.magnitude
            ),
            _ => write!(
                f,
                "marginal for x={} differs from x=0 by {:e}",
                self.x, self.magnitude
            ),
        }
    }
}

impl Assemblage {
    /// Builds an assemblage from input-major components (`x * o + a`).
    /// Only shapes are checked; use [`Assemblage::validate`] for the
    /// physical constraints.
    pub fn new(m: usize, o: usize, dim: usize, components: Vec<HermMat>) -> Result<Self> {
        if m == 0 || o == 0 || dim == 0 {
            return Err(Error::ShapeMismatch("m, o and dim must be positive".into()));
        }
        if components.len() != m * o {
            return Err(Error::ShapeMismatch(format!(
                "expected {} components for m={m}, o={o}, got {}",
                m * o,
                components.len()
            )));
        }
        if let Some(bad) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "component of dimension {} in a dim={dim} assemblage",
                bad.dim()
            )));
        }
        Ok(Self {
            m,
            o,
            dim,
            components,
        })
    }

    /// Like [`Assemblage::new`] but also rejects assemblages with violations.
    pub fn new_validated(m: usize, o: usize, dim: usize, components: Vec<HermMat>) -> Result<Self> {
        let asm = Self::new(m, o, dim, components)?;
        asm.ensure_valid()?;
        Ok(asm)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidAssemblage(text.join("; ")))
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.m
    }

    pub fn n_outputs(&self) -> usize {
        self.o
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component(&self, a: usize, x: usize) -> &HermMat {
        &self.components[x * self.o + a]
    }

    /// Components in input-major order.
    pub fn components(&self) -> &[HermMat] {
        &self.components
    }

    pub fn probability(&self, a: usize, x: usize) -> f64 {
        self.component(a, x).trace()
    }

    /// Normalized `ρ_{a,x}`, or `None` when `P(a|x)` is numerically zero.
    pub fn conditional_state(&self, a: usize, x: usize) -> Option<HermMat> {
        let p = self.probability(a, x);
        (p >= ZERO_TRACE).then(|| self.component(a, x).scale(1.0 / p))
    }

    /// `Σ_a σ_{a|x}` for one input.
    pub fn marginal(&self, x: usize) -> HermMat {
        (0..self.o).fold(HermMat::zeros(self.dim), |acc, a| &acc + self.component(a, x))
    }

    /// Bob's reduced state, averaged over inputs (identical for every input
    /// when the assemblage is no-signalling).
    pub fn reduced_state(&self) -> HermMat {
        let sum = (0..self.m).fold(HermMat::zeros(self.dim), |acc, x| &acc + &self.marginal(x));
        sum.scale(1.0 / self.m as f64)
    }

    /// Lists every violated invariant: PSD components, unit-trace marginals
    /// and no-signalling (each marginal compared to that of `x = 0`).
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for x in 0..self.m {
            for a in 0..self.o {
                let min = self.component(a, x).min_eigenvalue();
                if min < -VALIDATION_TOL {
                    out.push(Violation {
                        kind: ViolationKind::Psd,
                        a: Some(a),
                        x,
                        magnitude: -min,
                    });
                }
            }
        }
        let reference = self.marginal(0);
        for x in 0..self.m {
            let marginal = self.marginal(x);
            let dev = (marginal.trace() - 1.0).abs();
            if dev > VALIDATION_TOL {
                out.push(Violation {
                    kind: ViolationKind::Trace,
                    a: None,
                    x,
                    magnitude: dev,
                });
            }
            if x > 0 {
                let diff = marginal.max_abs_diff(&reference);
                if diff > VALIDATION_TOL {
                    out.push(Violation {
                        kind: ViolationKind::NoSignalling,
                        a: None,
                        x,
                        magnitude: diff,
                    });
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "max_abs_diff: shape mismatch");
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.m == other.m && self.o == other.o && self.dim == other.dim
    }

    pub(crate) fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "(m={}, o={}, dim={}) vs (m={}, o={}, dim={})",
                self.m, self.o, self.dim, other.m, other.o, other.dim
            )))
        }
    }

    /// Applies `f` to every component, keeping the shape.
    pub fn map_components(&self, f: impl FnMut(&HermMat) -> HermMat) -> Self {
        Self {
            m: self.m,
            o: self.o,
            dim: self.dim,
            components: self.components.iter().map(f).collect(),
        }
    }

    /// Convex combination `Σ_i w_i A_i` of same-shaped assemblages.
    pub fn mixture(parts: &[(f64, &Assemblage)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty mixture".into()))?;
        let mut components = vec![HermMat::zeros(first.dim); first.m * first.o];
        for (w, asm) in parts {
            first.ensure_same_shape(asm)?;
            for (acc, c) in components.iter_mut().zip(&asm.components) {
                *acc = &*acc + &c.scale(*w);
            }
        }
        Self::new(first.m, first.o, first.dim, components)
    }
}

/// Alice's measurements: for each input, `o` POVM elements.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    dim: usize,
    povms: Vec<Vec<HermMat>>,
}

impl MeasurementSet {
    pub fn new(povms: Vec<Vec<HermMat>>) -> Result<Self> {
        let first = povms
            .first()
            .and_then(|p| p.first())
            .ok_or_else(|| Error::InvalidMeasurement("no POVM elements".into()))?;
        let dim = first.dim();
        let o = povms[0].len();
        for (x, povm) in povms.iter().enumerate() {
            if povm.len() != o {
                return Err(Error::InvalidMeasurement(format!(
                    "input {x} has {} outcomes, expected {o}",
                    povm.len()
                )));
            }
            let mut sum = HermMat::zeros(dim);
            for (a, el) in povm.iter().enumerate() {
                if el.dim() != dim {
                    return Err(Error::InvalidMeasurement(format!(
                        "element ({a}|{x}) has dimension {}",
                        el.dim()
                    )));
                }
                if !el.is_psd(VALIDATION_TOL) {
                    return Err(Error::InvalidMeasurement(format!(
                        "element ({a}|{x}) is not positive semidefinite"
                    )));
                }
                sum = &sum + el;
            }
            let dev = sum.max_abs_diff(&HermMat::identity(dim));
            if dev > VALIDATION_TOL {
                return Err(Error::InvalidMeasurement(format!(
                    "elements for input {x} sum to identity only within {dev:e}"
                )));
            }
        }
        Ok(Self { dim, povms })
    }

    /// Projective Pauli Z (input 0) and X (input 1) measurements on a qubit.
    pub fn pauli_zx() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            dim: 2,
            povms: vec![
                vec![HermMat::diag(&[1.0, 0.0]), HermMat::diag(&[0.0, 1.0])],
                vec![
                    HermMat::real_projector(&[s, s]),
                    HermMat::real_projector(&[s, -s]),
                ],
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_inputs(&self) -> usize {
        self.povms.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.povms[0].len()
    }

    pub fn element(&self, a: usize, x: usize) -> &HermMat {
        &self.povms[x][a]
    }
}

/// `σ_{0|0} = ½|0⟩⟨0|`, `σ_{1|0} = ½|1⟩⟨1|`, `σ_{0|1} = ½|+⟩⟨+|`, `σ_{1|1} = ½|−⟩⟨−|`.
pub fn singlet_assemblage() -> Assemblage {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Assemblage {
        m: 2,
        o: 2,
        dim: 2,
        components: vec![
            HermMat::diag(&[0.5, 0.0]),
            HermMat::diag(&[0.0, 0.5]),
            HermMat::real_projector(&[s, s]).scale(0.5),
            HermMat::real_projector(&[s, -s]).scale(0.5),
        ],
    }
}

pub(crate) fn check_alpha2(alpha2: f64) -> Result<(f64, f64)> {
    if !(alpha2 > 0.5 && alpha2 < 1.0) {
        return Err(Error::Domain(format!("alpha2 = {alpha2} is outside (1/2, 1)")));
    }
    Ok((alpha2.sqrt(), (1.0 - alpha2).sqrt()))
}

/// Assemblage of `α|00⟩ + β|11⟩` under Pauli Z and X measurements:
/// `σ_{0|0} = α²|0⟩⟨0|`, `σ_{1|0} = β²|1⟩⟨1|`, `σ_{a|1} = ½|α_±⟩⟨α_±|`.
pub fn alpha_assemblage(alpha2: f64) -> Result<Assemblage> {
    let (alpha, beta) = check_alpha2(alpha2)?;
    Ok(Assemblage {
        m: 2,
        o: 2,
        dim: 2,
        components: vec![
            HermMat::diag(&[alpha2, 0.0]),
            HermMat::diag(&[0.0, 1.0 - alpha2]),
            HermMat::real_projector(&[alpha, beta]).scale(0.5),
            HermMat::real_projector(&[alpha, -beta]).scale(0.5),
        ],
    })
}

/// `σ_{a|x} = Tr_A[(M_{a|x} ⊗ 1) ρ_AB]` for a bipartite state on
/// `dim_A ⊗ dim_B` with Alice's factor first.
pub fn from_state(state: &HermMat, meas: &MeasurementSet) -> Result<Assemblage> {
    let dim_a = meas.dim();
    if !state.dim().is_multiple_of(dim_a) {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} does not factor with Alice dimension {dim_a}",
            state.dim()
        )));
    }
    let dim_b = state.dim() / dim_a;
    if (state.trace() - 1.0).abs() > VALIDATION_TOL {
        return Err(Error::Domain(format!("state trace is {}", state.trace())));
    }
    if !state.is_psd(VALIDATION_TOL) {
        return Err(Error::NotPsd(state.min_eigenvalue()));
    }
    let id_b = HermMat::identity(dim_b);
    let mut components = Vec::with_capacity(meas.n_inputs() * meas.n_outputs());
    for x in 0..meas.n_inputs() {
        for a in 0..meas.n_outputs() {
            let op = meas.element(a, x).kron(&id_b);
            // (M ⊗ 1) ρ is not Hermitian; only its partial trace is.
            let product = mat_product(&op, state);
            components.push(partial_trace_first(&product, dim_a, dim_b));
        }
    }
    Assemblage::new(meas.n_inputs(), meas.n_outputs(), dim_b, components)
}

fn mat_product(a: &HermMat, b: &HermMat) -> Vec<Complex64> {
    let n = a.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[(i, k)];
            for j in 0..n {
                out[i * n + j] += aik * b[(k, j)];
            }
        }
    }
    out
}

fn partial_trace_first(data: &[Complex64], dim_a: usize, dim_b: usize) -> HermMat {
    let n = dim_a * dim_b;
    HermMat::from_fn(dim_b, |i, j| {
        (0..dim_a)
            .map(|k| data[(k * dim_b + i) * n + k * dim_b + j])
            .sum()
    })
}

/// Tensor product of two assemblages. Inputs and outputs are flattened
/// row-major: `x = x1 * m2 + x2`, `a = a1 * o2 + a2`.
pub fn tensor(first: &Assemblage, second: &Assemblage) -> Assemblage {
    let (m, o) = (first.m * second.m, first.o * second.o);
    let mut components = Vec::with_capacity(m * o);
    for x1 in 0..first.m {
        for x2 in 0..second.m {
            for a1 in 0..first.o {
                for a2 in 0..second.o {
                    components.push(first.component(a1, x1).kron(second.component(a2, x2)));
                }
            }
        }
    }
    Assemblage {
        m,
        o,
        dim: first.dim * second.dim,
        components,
    }
}

#[derive(Serialize, Deserialize)]
struct AssemblageFile {
    #[serde(default = "default_schema")]
    schema: String,
    m: usize,
    o: usize,
    dim: usize,
    components: Vec<ComponentFile>,
}

fn default_schema() -> String {
    SCHEMA.to_string()
}

#[derive(Serialize, Deserialize)]
struct ComponentFile {
    a: usize,
    x: usize,
    matrix: Vec<Vec<[f64; 2]>>,
}

impl Serialize for Assemblage {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut components = Vec::with_capacity(self.components.len());
        for x in 0..self.m {
            for a in 0..self.o {
                components.push(ComponentFile {
                    a,
                    x,
                    matrix: self.component(a, x).to_rows(),
                });
            }
        }
        AssemblageFile {
            schema: SCHEMA.to_string(),
            m: self.m,
            o: self.o,
            dim: self.dim,
            components,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Assemblage {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = AssemblageFile::deserialize(deserializer)?;
        file.into_assemblage().map_err(serde::de::Error::custom)
    }
}

impl AssemblageFile {
    fn into_assemblage(self) -> Result<Assemblage> {
        if self.schema != SCHEMA {
            return Err(Error::Format(format!("unsupported schema {:?}", self.schema)));
        }
        let mut slots: Vec<Option<HermMat>> = vec![None; self.m * self.o];
        for c in self.components {
            if c.a >= self.o || c.x >= self.m {
                return Err(Error::Format(format!("component ({}|{}) out of range", c.a, c.x)));
            }
            let slot = &mut slots[c.x * self.o + c.a];
            if slot.is_some() {
                return Err(Error::Format(format!("duplicate component ({}|{})", c.a, c.x)));
            }
            *slot = Some(HermMat::from_rows(&c.matrix)?);
        }
        let components = slots
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| Error::Format(format!("missing component ({}|{})", i % self.o, i / self.o)))
            })
            .collect::<Result<Vec<_>>>()?;
        Assemblage::new(self.m, self.o, self.dim, components)
    }
}

impl Assemblage {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("assemblage serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: AssemblageFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        file.into_assemblage()
    }
}
