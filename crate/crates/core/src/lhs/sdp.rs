//! Primal-dual interior-point method for small block-diagonal SDPs
//!
//! ```text
//!   minimize   Σ_b ⟨C_b, X_b⟩
//!   subject to Σ_b ⟨A_{k,b}, X_b⟩ = b_k     k = 0..p
//!              X_b ⪰ 0
//! ```
//!
//! with dual `maximize bᵀy  s.t.  Z_b = C_b − Σ_k y_k A_{k,b} ⪰ 0`.
//! Infeasible start, HKM search direction, Mehrotra predictor-corrector.
//! All blocks are dense real symmetric; sizes here never exceed a few dozen.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BlockSdp {
    pub block_sizes: Vec<usize>,
    pub cost: Vec<DMatrix<f64>>,
    /// Constraint `k` as a sparse list of `(block, A_{k,b})`.
    pub constraints: Vec<Vec<(usize, DMatrix<f64>)>>,
    pub rhs: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpSettings {
    pub max_iters: usize,
    /// Relative primal/dual infeasibility and duality gap at termination.
    pub tol: f64,
    /// Accepted instead when round-off stalls progress before `tol`.
    pub loose_tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-9,
            loose_tol: 1e-7,
            step_fraction: 0.98,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| p * q).sum()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

impl BlockSdp {
    fn check(&self) -> Result<()> {
        if self.cost.len() != self.block_sizes.len() {
            return Err(Error::SolverFailure("cost has the wrong number of blocks".into()));
        }
        if self.constraints.len() != self.rhs.len() {
            return Err(Error::SolverFailure("constraint count does not match rhs".into()));
        }
        for row in &self.constraints {
            for (b, m) in row {
                let n = *self.block_sizes.get(*b).ok_or_else(|| {
                    Error::SolverFailure(format!("constraint references block {b}"))
                })?;
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::SolverFailure("constraint block has the wrong size".into()));
                }
            }
        }
        Ok(())
    }

    fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints
                .iter()
                .map(|row| row.iter().map(|(b, m)| frob_dot(m, &x[*b])).sum::<f64>()),
        )
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> =
            self.block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (k, row) in self.constraints.iter().enumerate() {
            for (b, m) in row {
                out[*b] += m * y[k];
            }
        }
        out
    }

    fn objective(&self, x: &[DMatrix<f64>]) -> f64 {
        self.cost.iter().zip(x).map(|(c, xb)| frob_dot(c, xb)).sum()
    }
}

/// Largest `α ≤ 1` with `X + α dX ⪰ 0`, given the Cholesky factor of `X`.
fn max_step(chol: &Cholesky<f64, nalgebra::Dyn>, dx: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::identity(l.nrows(), l.ncols()));
    let w = sym(&linv * dx * linv.transpose());
    let min = SymmetricEigen::new(w).eigenvalues.min();
    if min < 0.0 {
        (-1.0 / min).min(1.0)
    } else {
        1.0
    }
}

/// Iterations without a 10% gain in the worst residual before a stalled
/// run settles for its loose-tolerance iterate.
const STALL_LIMIT: usize = 6;

fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::SolverFailure("iterate left the PSD cone".into()))
}

/// `X + α dX`, shortening `α` until every block has a Cholesky factor.
fn advance_with_length(x: &[DMatrix<f64>], dx: &[DMatrix<f64>], alpha: f64) -> Result<(Vec<DMatrix<f64>>, f64)> {
    let mut alpha = alpha;
    for _ in 0..30 {
        let next: Vec<DMatrix<f64>> = x.iter().zip(dx).map(|(a, d)| sym(a + d * alpha)).collect();
        if next.iter().all(|b| Cholesky::new(b.clone()).is_some()) {
            return Ok((next, alpha));
        }
        alpha *= 0.5;
    }
    Err(Error::SolverFailure("no positive definite step along the search direction".into()))
}

fn advance(x: &[DMatrix<f64>], dx: &[DMatrix<f64>], alpha: f64) -> Result<Vec<DMatrix<f64>>> {
    advance_with_length(x, dx, alpha).map(|(next, _)| next)
}

pub fn solve(problem: &BlockSdp, settings: &SdpSettings) -> Result<SdpSolution> {
    problem.check()?;
    let mut fallback = None;
    match iterate(problem, settings, &mut fallback) {
        Ok(sol) => Ok(sol),
        Err(e) => fallback.ok_or(e),
    }
}

fn iterate(problem: &BlockSdp, settings: &SdpSettings, fallback: &mut Option<SdpSolution>) -> Result<SdpSolution> {
    let p = problem.constraints.len();
    let n_total: usize = problem.block_sizes.iter().sum();
    let norm_b = problem.rhs.norm();
    let norm_c = problem.cost.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();

    // starting point scaled to the data
    let mut xi: f64 = 10.0f64.max((n_total as f64).sqrt());
    let mut eta: f64 = 10.0f64.max((n_total as f64).sqrt()).max(norm_c);
    for (k, row) in problem.constraints.iter().enumerate() {
        let a_norm = row.iter().map(|(_, m)| m.norm_squared()).sum::<f64>().sqrt();
        xi = xi.max(n_total as f64 * (1.0 + problem.rhs[k].abs()) / (1.0 + a_norm));
        eta = eta.max(a_norm);
    }
    let mut x: Vec<DMatrix<f64>> = problem
        .block_sizes
        .iter()
        .map(|&n| DMatrix::identity(n, n) * xi)
        .collect();
    let mut z: Vec<DMatrix<f64>> = problem
        .block_sizes
        .iter()
        .map(|&n| DMatrix::identity(n, n) * eta)
        .collect();
    let mut y = DVector::zeros(p);
    let mut best_merit = f64::INFINITY;
    let mut stalled = 0;

    for iter in 0..settings.max_iters {
        let rp = &problem.rhs - problem.apply(&x);
        let aty = problem.adjoint(&y);
        let rd: Vec<DMatrix<f64>> = (0..x.len())
            .map(|b| &problem.cost[b] - &z[b] - &aty[b])
            .collect();
        let pobj = problem.objective(&x);
        let dobj = problem.rhs.dot(&y);
        let gap: f64 = x.iter().zip(&z).map(|(a, b)| frob_dot(a, b)).sum();
        let mu = gap / n_total as f64;

        let pinf = rp.norm() / (1.0 + norm_b);
        let dinf = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + norm_c);
        let rel_gap = gap.abs().max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        let within = |tol: f64| pinf < tol && dinf < tol && rel_gap < tol;
        if within(settings.loose_tol) {
            let snapshot = SdpSolution {
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
                primal_objective: pobj,
                dual_objective: dobj,
                iterations: iter,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
            };
            if within(settings.tol) {
                return Ok(snapshot);
            }
            *fallback = Some(snapshot);
        }
        let merit = pinf.max(dinf).max(rel_gap);
        if merit < 0.9 * best_merit {
            best_merit = merit;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_LIMIT && fallback.is_some() {
                return Err(Error::SolverFailure("progress stalled".into()));
            }
        }

        let z_inv: Vec<DMatrix<f64>> = z
            .iter()
            .map(|zb| cholesky(zb).map(|c| sym(c.inverse())))
            .collect::<Result<_>>()?;

        // Schur complement M_ij = Σ_b ⟨A_ib, X_b A_jb Z_b⁻¹⟩
        let mut by_block: Vec<Vec<(usize, &DMatrix<f64>)>> = vec![Vec::new(); x.len()];
        for (k, row) in problem.constraints.iter().enumerate() {
            for (b, m) in row {
                by_block[*b].push((k, m));
            }
        }
        let mut schur = DMatrix::<f64>::zeros(p, p);
        for (b, entries) in by_block.iter().enumerate() {
            for &(j, aj) in entries {
                let g = &x[b] * aj * &z_inv[b];
                for &(i, ai) in entries {
                    schur[(i, j)] += frob_dot(ai, &g);
                }
            }
        }
        let schur = sym(schur);
        let schur_chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let shift = 1e-14 * schur.diagonal().amax().max(1.0);
                Cholesky::new(&schur + DMatrix::identity(p, p) * shift)
                    .ok_or_else(|| Error::SolverFailure("Schur complement is singular".into()))?
            }
        };

        let direction = |rc: &[DMatrix<f64>]| {
            // M dy = rp − A((R_c − X R_d) Z⁻¹)
            let tmp: Vec<DMatrix<f64>> = (0..x.len())
                .map(|b| (&rc[b] - &x[b] * &rd[b]) * &z_inv[b])
                .collect();
            let rhs = &rp - problem.apply(&tmp);
            let mut dy = schur_chol.solve(&rhs);
            // one step of iterative refinement against the unfactored matrix
            let correction = schur_chol.solve(&(&rhs - &schur * &dy));
            dy += correction;
            let atdy = problem.adjoint(&dy);
            let dz: Vec<DMatrix<f64>> = (0..x.len()).map(|b| &rd[b] - &atdy[b]).collect();
            let dx: Vec<DMatrix<f64>> = (0..x.len())
                .map(|b| sym((&rc[b] - &x[b] * &dz[b]) * &z_inv[b]))
                .collect();
            (dx, dy, dz)
        };

        let x_chol: Vec<_> = x.iter().map(cholesky).collect::<Result<_>>()?;
        let z_chol: Vec<_> = z.iter().map(cholesky).collect::<Result<_>>()?;
        let step = |dx: &[DMatrix<f64>], dz: &[DMatrix<f64>]| {
            let ap = x_chol.iter().zip(dx).map(|(c, d)| max_step(c, d)).fold(1.0, f64::min);
            let ad = z_chol.iter().zip(dz).map(|(c, d)| max_step(c, d)).fold(1.0, f64::min);
            (ap, ad)
        };

        // predictor
        let xz: Vec<DMatrix<f64>> = x.iter().zip(&z).map(|(a, b)| a * b).collect();
        let rc_aff: Vec<DMatrix<f64>> = xz.iter().map(|m| -m).collect();
        let (dx_a, _, dz_a) = direction(&rc_aff);
        let (ap_a, ad_a) = step(&dx_a, &dz_a);
        let gap_aff: f64 = (0..x.len())
            .map(|b| frob_dot(&(&x[b] + &dx_a[b] * ap_a), &(&z[b] + &dz_a[b] * ad_a)))
            .sum();
        let sigma = if gap > 0.0 {
            (gap_aff / gap).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // corrector
        let rc: Vec<DMatrix<f64>> = (0..x.len())
            .map(|b| {
                let n = x[b].nrows();
                DMatrix::identity(n, n) * (sigma * mu) - &xz[b] - &dx_a[b] * &dz_a[b]
            })
            .collect();
        let (dx, dy, dz) = direction(&rc);
        let (ap, ad) = step(&dx, &dz);
        let ap = (settings.step_fraction * ap).min(1.0);
        let ad = (settings.step_fraction * ad).min(1.0);

        x = advance(&x, &dx, ap)?;
        let (next_z, ad) = advance_with_length(&z, &dz, ad)?;
        z = next_z;
        y += dy * ad;
    }

    Err(Error::SolverFailure(format!(
        "no convergence within {} iterations",
        settings.max_iters
    )))
}
