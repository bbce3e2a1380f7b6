//! Local-hidden-state models and robustness of steering.
//!
//! General response functions `P(a|x,λ)` are reduced to the `o^m`
//! deterministic strategies `D_λ(a|x) ∈ {0, 1}`, with `P_Λ(λ) ρ_λ` absorbed
//! into a single subnormalized weight `σ_λ`. Membership and robustness then
//! become small SDPs over Hermitian blocks, solved by [`sdp`] after a real
//! embedding. [`oracle`] solves the same programs by alternating projections.

pub mod oracle;
pub mod sdp;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assemblage::Assemblage;
use crate::error::{Error, Result};
use crate::matcore::HermMat;

/// Largest number of deterministic strategies handled.
pub const MAX_STRATEGIES: usize = 64;
/// Optimal values at or below this count as zero.
pub const FEASIBILITY_GAP: f64 = 1e-7;
/// Bound on the independently re-evaluated certificate residual.
pub const CERTIFICATE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    /// The added noise must itself admit an LHS model.
    #[default]
    LhsRestricted,
    /// Any valid assemblage may be mixed in.
    Generalized,
}

impl std::str::FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lhs" | "lhs-restricted" => Ok(Self::LhsRestricted),
            "generalized" => Ok(Self::Generalized),
            other => Err(Error::Domain(format!("unknown robustness flavor {other:?}"))),
        }
    }
}

/// `σ_{a|x} = Σ_λ D_λ(a|x) σ_λ`.
#[derive(Debug, Clone, Serialize)]
pub struct LhsModel {
    /// `strategies[λ][x]` is the outcome strategy `λ` assigns to input `x`.
    pub strategies: Vec<Vec<usize>>,
    pub weights: Vec<HermMat>,
    #[serde(skip)]
    n_outputs: usize,
}

impl LhsModel {
    pub fn n_inputs(&self) -> usize {
        self.strategies.first().map_or(0, Vec::len)
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().map(HermMat::trace).sum()
    }

    /// The assemblage this model generates.
    pub fn assemblage(&self) -> Result<Assemblage> {
        let dim = self
            .weights
            .first()
            .map(HermMat::dim)
            .ok_or_else(|| Error::Domain("empty LHS model".into()))?;
        let (m, o) = (self.n_inputs(), self.n_outputs);
        let mut components = vec![HermMat::zeros(dim); m * o];
        for (strategy, w) in self.strategies.iter().zip(&self.weights) {
            for (x, &a) in strategy.iter().enumerate() {
                components[x * o + a] = &components[x * o + a] + w;
            }
        }
        Assemblage::new(m, o, dim, components)
    }

    /// Largest entrywise deviation from `target`.
    pub fn residual(&self, target: &Assemblage) -> Result<f64> {
        let generated = self.assemblage()?;
        generated.ensure_same_shape(target)?;
        Ok(generated.max_abs_diff(target))
    }

    pub fn min_weight_eigenvalue(&self) -> f64 {
        self.weights
            .iter()
            .map(HermMat::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessResult {
    pub flavor: Flavor,
    pub t_star: f64,
    /// LHS model of `(σ + t*ξ)/(1 + t*)`.
    pub certificate: LhsModel,
    pub noise: Assemblage,
    pub solver_iters: usize,
    pub residual: f64,
    /// Dual objective at termination, a lower bound on `t*` up to solver tolerance.
    pub dual_bound: f64,
}

impl RobustnessResult {
    pub fn mixed(&self, asm: &Assemblage) -> Result<Assemblage> {
        let t = self.t_star;
        Assemblage::mixture(&[(1.0 / (1.0 + t), asm), (t / (1.0 + t), &self.noise)])
    }
}

/// Outcome of a membership test.
#[derive(Debug, Clone, Serialize)]
pub struct Membership {
    pub feasible: bool,
    pub model: Option<LhsModel>,
    /// Optimal LHS-restricted robustness; positive values measure infeasibility.
    pub gap: f64,
    /// Dual objective; a value above the tolerance certifies steering.
    pub dual_bound: f64,
}

/// All `o^m` deterministic strategies, `x = 0` varying fastest.
pub fn deterministic_strategies(m: usize, o: usize) -> Vec<Vec<usize>> {
    let count = o.pow(m as u32);
    (0..count)
        .map(|lambda| {
            let mut rest = lambda;
            (0..m)
                .map(|_| {
                    let a = rest % o;
                    rest /= o;
                    a
                })
                .collect()
        })
        .collect()
}

fn check_size(asm: &Assemblage) -> Result<()> {
    asm.ensure_valid()?;
    let (m, o) = (asm.n_inputs(), asm.n_outputs());
    let count = (o as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if count > MAX_STRATEGIES as u128 {
        return Err(Error::Domain(format!(
            "{o}^{m} deterministic strategies exceed the limit of {MAX_STRATEGIES}"
        )));
    }
    Ok(())
}

/// Linear program over Hermitian blocks shared by both solvers:
/// minimize `Σ_{b ∈ objective} Tr H_b + offset` subject to
/// `Σ_b c_b H_b = rhs` for each equation and every `H_b ⪰ 0`.
#[derive(Debug, Clone)]
pub(crate) struct Formulation {
    pub n_blocks: usize,
    pub dim: usize,
    pub equations: Vec<(Vec<(usize, f64)>, HermMat)>,
    pub objective: Vec<usize>,
    pub offset: f64,
}

impl Formulation {
    /// Blocks `F_λ` (0..L) and `G_λ` (L..2L):
    /// `Σ_λ D_λ(a|x)(F_λ − G_λ) = σ_{a|x}`, objective `Σ Tr G_λ`.
    /// Rows implied by normalization and no-signalling are dropped.
    pub fn lhs_restricted(asm: &Assemblage, strategies: &[Vec<usize>]) -> Self {
        let (m, o) = (asm.n_inputs(), asm.n_outputs());
        let l = strategies.len();
        let mut equations = Vec::new();
        for x in 0..m {
            let outcomes = if x == 0 { o } else { o - 1 };
            for a in 0..outcomes {
                let mut terms = Vec::new();
                for (lambda, s) in strategies.iter().enumerate() {
                    if s[x] == a {
                        terms.push((lambda, 1.0));
                        terms.push((l + lambda, -1.0));
                    }
                }
                equations.push((terms, asm.component(a, x).clone()));
            }
        }
        Self {
            n_blocks: 2 * l,
            dim: asm.dim(),
            equations,
            objective: (l..2 * l).collect(),
            offset: 0.0,
        }
    }

    /// Blocks `F_λ` (0..L) and `S_{a|x}` (L + x·o + a):
    /// `Σ_λ D_λ(a|x) F_λ − S_{a|x} = σ_{a|x}`, objective `Σ Tr F_λ − 1`.
    pub fn generalized(asm: &Assemblage, strategies: &[Vec<usize>]) -> Self {
        let (m, o) = (asm.n_inputs(), asm.n_outputs());
        let l = strategies.len();
        let mut equations = Vec::new();
        for x in 0..m {
            for a in 0..o {
                let mut terms: Vec<(usize, f64)> = strategies
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s[x] == a)
                    .map(|(lambda, _)| (lambda, 1.0))
                    .collect();
                terms.push((l + x * o + a, -1.0));
                equations.push((terms, asm.component(a, x).clone()));
            }
        }
        Self {
            n_blocks: l + m * o,
            dim: asm.dim(),
            equations,
            objective: (0..l).collect(),
            offset: -1.0,
        }
    }

    pub fn build(asm: &Assemblage, strategies: &[Vec<usize>], flavor: Flavor) -> Self {
        match flavor {
            Flavor::LhsRestricted => Self::lhs_restricted(asm, strategies),
            Flavor::Generalized => Self::generalized(asm, strategies),
        }
    }
}

// Real embedding H ↦ [[Re H, −Im H], [Im H, Re H]]; ⟨W, X⟩ reads one real
// coordinate of the decoded Hermitian block.

type Functional = (DMatrix<f64>, Box<dyn Fn(&HermMat) -> f64>);

fn embed_functionals(d: usize) -> Vec<Functional> {
    let mut out: Vec<Functional> = Vec::new();
    for i in 0..d {
        let mut w = DMatrix::zeros(2 * d, 2 * d);
        w[(i, i)] = 0.5;
        w[(d + i, d + i)] = 0.5;
        out.push((w, Box::new(move |h: &HermMat| h[(i, i)].re)));
        for j in i + 1..d {
            let mut re = DMatrix::zeros(2 * d, 2 * d);
            re[(i, j)] = 0.25;
            re[(j, i)] = 0.25;
            re[(d + i, d + j)] = 0.25;
            re[(d + j, d + i)] = 0.25;
            out.push((re, Box::new(move |h: &HermMat| h[(i, j)].re)));
            let mut im = DMatrix::zeros(2 * d, 2 * d);
            im[(d + i, j)] = 0.25;
            im[(j, d + i)] = 0.25;
            im[(i, d + j)] = -0.25;
            im[(d + j, i)] = -0.25;
            out.push((im, Box::new(move |h: &HermMat| h[(i, j)].im)));
        }
    }
    out
}

fn decode(x: &DMatrix<f64>, d: usize) -> HermMat {
    HermMat::from_fn(d, |i, j| {
        Complex64::new(
            0.5 * (x[(i, j)] + x[(d + i, d + j)]),
            0.5 * (x[(d + i, j)] - x[(i, d + j)]),
        )
    })
}

pub(crate) struct BlockSolution {
    pub blocks: Vec<HermMat>,
    pub dual_bound: f64,
    pub iterations: usize,
}

pub(crate) fn solve_interior_point(f: &Formulation) -> Result<BlockSolution> {
    let d = f.dim;
    let functionals = embed_functionals(d);
    let mut constraints = Vec::new();
    let mut rhs = Vec::new();
    for (terms, target) in &f.equations {
        for (w, read) in &functionals {
            constraints.push(terms.iter().map(|&(b, c)| (b, w * c)).collect::<Vec<_>>());
            rhs.push(read(target));
        }
    }
    let mut cost = vec![DMatrix::zeros(2 * d, 2 * d); f.n_blocks];
    for &b in &f.objective {
        cost[b] = DMatrix::identity(2 * d, 2 * d) * 0.5;
    }
    let problem = sdp::BlockSdp {
        block_sizes: vec![2 * d; f.n_blocks],
        cost,
        constraints,
        rhs: DVector::from_vec(rhs),
    };
    let sol = sdp::solve(&problem, &sdp::SdpSettings::default())?;
    Ok(BlockSolution {
        blocks: sol.x.iter().map(|x| decode(x, d)).collect(),
        dual_bound: sol.dual_objective + f.offset,
        iterations: sol.iterations,
    })
}

fn uniform_noise(asm: &Assemblage) -> Assemblage {
    let (m, o, d) = (asm.n_inputs(), asm.n_outputs(), asm.dim());
    let c = HermMat::identity(d).scale(1.0 / (o * d) as f64);
    Assemblage::new(m, o, d, vec![c; m * o]).expect("shape is consistent")
}

pub fn lhs_robustness(asm: &Assemblage) -> Result<RobustnessResult> {
    lhs_robustness_with(asm, Flavor::LhsRestricted)
}

pub fn lhs_robustness_with(asm: &Assemblage, flavor: Flavor) -> Result<RobustnessResult> {
    check_size(asm)?;
    let (m, o, d) = (asm.n_inputs(), asm.n_outputs(), asm.dim());
    let strategies = deterministic_strategies(m, o);
    let l = strategies.len();
    let formulation = Formulation::build(asm, &strategies, flavor);
    let sol = solve_interior_point(&formulation)?;
    let model = |weights: Vec<HermMat>| LhsModel {
        strategies: strategies.clone(),
        weights,
        n_outputs: o,
    };

    // t and ξ are read off the blocks rather than the solver objective so
    // that ξ is exactly no-signalling with unit trace
    let (weights, t_star, noise) = match flavor {
        Flavor::LhsRestricted => {
            let g = model(sol.blocks[l..].to_vec());
            let t = g.total_weight().max(0.0);
            let noise = if t > FEASIBILITY_GAP {
                g.assemblage()?.map_components(|c| c.scale(1.0 / t))
            } else {
                uniform_noise(asm)
            };
            (sol.blocks[..l].to_vec(), t, noise)
        }
        Flavor::Generalized => {
            // S = Σ D F − σ may dip below zero by solver round-off; lifting
            // every F_λ by c·1 lifts every S_{a|x} by c·o^(m−1)·1
            let f = model(sol.blocks[..l].to_vec());
            let slack = |f: &LhsModel| -> Result<Vec<HermMat>> {
                let generated = f.assemblage()?;
                Ok(generated
                    .components()
                    .iter()
                    .zip(asm.components())
                    .map(|(g, s)| g - s)
                    .collect())
            };
            let lowest = slack(&f)?
                .iter()
                .map(HermMat::min_eigenvalue)
                .fold(0.0, f64::min);
            let lift = -lowest / (l / o) as f64;
            let lifted = model(
                f.weights
                    .iter()
                    .map(|w| w + &HermMat::identity(d).scale(lift))
                    .collect(),
            );
            let t = (lifted.total_weight() - 1.0).max(0.0);
            let noise = if t > FEASIBILITY_GAP {
                let s = slack(&lifted)?;
                Assemblage::new(m, o, d, s.iter().map(|c| c.scale(1.0 / t)).collect())?
            } else {
                uniform_noise(asm)
            };
            (lifted.weights, t, noise)
        }
    };
    let scale = 1.0 / (1.0 + t_star);
    let certificate = model(weights.iter().map(|w| w.scale(scale)).collect());
    let mut result = RobustnessResult {
        flavor,
        t_star,
        certificate,
        noise,
        solver_iters: sol.iterations,
        residual: 0.0,
        dual_bound: sol.dual_bound.max(0.0),
    };
    let mixed = result.mixed(asm)?;
    result.residual = result.certificate.residual(&mixed)?;
    if result.residual > CERTIFICATE_TOL {
        return Err(Error::SolverFailure(format!(
            "certificate residual {:.3e} exceeds {CERTIFICATE_TOL:e}",
            result.residual
        )));
    }
    Ok(result)
}

/// Decides whether `asm` admits an LHS model by solving the LHS-restricted
/// robustness program; the returned model reproduces `asm` itself.
pub fn lhs_membership(asm: &Assemblage) -> Result<Membership> {
    let r = lhs_robustness_with(asm, Flavor::LhsRestricted)?;
    let feasible = r.t_star <= FEASIBILITY_GAP;
    let model = feasible.then(|| {
        let mut model = r.certificate.clone();
        for w in &mut model.weights {
            *w = w.scale(1.0 + r.t_star);
        }
        model
    });
    Ok(Membership {
        feasible,
        model,
        gap: r.t_star,
        dual_bound: r.dual_bound,
    })
}
