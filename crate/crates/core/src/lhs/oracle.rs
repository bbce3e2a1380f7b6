//! Coarse reference solver for the robustness programs.
//!
//! For a fixed `t` the feasible set is the intersection of an affine subspace
//! (the linear equations plus `Σ Tr = t`) with a product of PSD cones.
//! Alternating projections decide feasibility; bisection on `t` brackets the
//! optimum. Slow and only accurate to about `1e-4`, but it shares no code with
//! the interior-point path beyond the problem statement and the eigensolver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{check_size, deterministic_strategies, Flavor, Formulation};
use crate::assemblage::Assemblage;
use crate::error::{Error, Result};
use crate::matcore::HermMat;

#[derive(Debug, Clone, Copy)]
pub struct OracleSettings {
    /// Width of the final bisection bracket.
    pub tol: f64,
    /// Distance to the affine set below which `t` counts as feasible.
    pub feasibility_tol: f64,
    pub max_sweeps: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            feasibility_tol: 1e-7,
            max_sweeps: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleResult {
    pub t_star: f64,
    /// Bracket `[lower, upper]` containing the optimum.
    pub lower: f64,
    pub upper: f64,
    pub sweeps: usize,
}

// Orthonormal real coordinates of a Hermitian d×d matrix:
// diagonal entries, then √2·Re and √2·Im of each upper off-diagonal entry.
fn to_coords(h: &HermMat, out: &mut [f64]) {
    let d = h.dim();
    let s = std::f64::consts::SQRT_2;
    let mut k = d;
    for i in 0..d {
        out[i] = h[(i, i)].re;
        for j in i + 1..d {
            out[k] = s * h[(i, j)].re;
            out[k + 1] = s * h[(i, j)].im;
            k += 2;
        }
    }
}

fn from_coords(c: &[f64], d: usize) -> HermMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut data = vec![Complex64::new(0.0, 0.0); d * d];
    let mut k = d;
    for i in 0..d {
        data[i * d + i] = Complex64::new(c[i], 0.0);
        for j in i + 1..d {
            let z = Complex64::new(s * c[k], s * c[k + 1]);
            data[i * d + j] = z;
            data[j * d + i] = z.conj();
            k += 2;
        }
    }
    HermMat::new(d, data).expect("coordinates define a Hermitian matrix")
}

struct Projector {
    d: usize,
    n_blocks: usize,
    a: DMatrix<f64>,
    /// `Aᵀ (A Aᵀ)⁺`
    pinv: DMatrix<f64>,
    base_rhs: DVector<f64>,
}

impl Projector {
    fn new(f: &Formulation) -> Result<Self> {
        let d = f.dim;
        let per = d * d;
        let n = f.n_blocks * per;
        let rows = f.equations.len() * per + 1;
        let mut a = DMatrix::zeros(rows, n);
        let mut rhs = DVector::zeros(rows);
        let mut buf = vec![0.0; per];
        for (e, (terms, target)) in f.equations.iter().enumerate() {
            to_coords(target, &mut buf);
            for k in 0..per {
                let r = e * per + k;
                for &(b, c) in terms {
                    a[(r, b * per + k)] += c;
                }
                rhs[r] = buf[k];
            }
        }
        for &b in &f.objective {
            for i in 0..d {
                a[(rows - 1, b * per + i)] = 1.0;
            }
        }
        let aat = &a * a.transpose();
        let inv = aat
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::SolverFailure(format!("oracle projection: {e}")))?;
        let pinv = a.transpose() * inv;
        Ok(Self {
            d,
            n_blocks: f.n_blocks,
            a,
            pinv,
            base_rhs: rhs,
        })
    }

    fn affine(&self, v: &DVector<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        v - &self.pinv * (&self.a * v - rhs)
    }

    fn cone(&self, v: &DVector<f64>) -> DVector<f64> {
        let per = self.d * self.d;
        let mut out = DVector::zeros(v.len());
        for b in 0..self.n_blocks {
            let h = from_coords(&v.as_slice()[b * per..(b + 1) * per], self.d);
            let clamped = h.eigh().reconstruct(|l| l.max(0.0));
            to_coords(&clamped, &mut out.as_mut_slice()[b * per..(b + 1) * per]);
        }
        out
    }

    /// Runs alternating projections at trace level `level`, starting from `v`.
    /// Returns whether the sets met, the last cone point and the sweeps used.
    fn feasible(&self, level: f64, v: DVector<f64>, s: &OracleSettings) -> (bool, DVector<f64>, usize) {
        let mut rhs = self.base_rhs.clone();
        let last = rhs.len() - 1;
        rhs[last] = level;
        let mut x = v;
        let mut previous = f64::INFINITY;
        for sweep in 1..=s.max_sweeps {
            let p = self.affine(&x, &rhs);
            x = self.cone(&p);
            let dist = (&x - &p).norm();
            if dist < s.feasibility_tol {
                return (true, x, sweep);
            }
            // stalled at a positive distance: the sets are apart
            if sweep % 200 == 0 {
                if previous - dist < 1e-4 * dist {
                    return (false, x, sweep);
                }
                previous = dist;
            }
        }
        (false, x, s.max_sweeps)
    }
}

pub fn oracle_robustness(asm: &Assemblage, flavor: Flavor) -> Result<OracleResult> {
    oracle_robustness_with(asm, flavor, &OracleSettings::default())
}

pub fn oracle_robustness_with(asm: &Assemblage, flavor: Flavor, settings: &OracleSettings) -> Result<OracleResult> {
    check_size(asm)?;
    let strategies = deterministic_strategies(asm.n_inputs(), asm.n_outputs());
    let f = Formulation::build(asm, &strategies, flavor);
    let proj = Projector::new(&f)?;
    let level = |t: f64| t - f.offset;

    let start = DVector::zeros(proj.a.ncols());
    let mut sweeps = 0;
    let (ok, mut point, used) = proj.feasible(level(0.0), start.clone(), settings);
    sweeps += used;
    if ok {
        return Ok(OracleResult {
            t_star: 0.0,
            lower: 0.0,
            upper: 0.0,
            sweeps,
        });
    }
    let (mut lo, mut hi) = (0.0, 0.25);
    loop {
        let (ok, p, used) = proj.feasible(level(hi), point.clone(), settings);
        sweeps += used;
        if ok {
            point = p;
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::SolverFailure("oracle found no feasible level".into()));
        }
    }
    while hi - lo > settings.tol {
        let mid = 0.5 * (lo + hi);
        let (ok, p, used) = proj.feasible(level(mid), point.clone(), settings);
        sweeps += used;
        if ok {
            hi = mid;
            point = p;
        } else {
            lo = mid;
        }
    }
    Ok(OracleResult {
        t_star: 0.5 * (lo + hi),
        lower: lo,
        upper: hi,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemblage::singlet_assemblage;

    #[test]
    fn coordinates_are_orthonormal() {
        let a = HermMat::from_fn(3, |i, j| Complex64::new((i * 3 + j) as f64, i as f64 - j as f64));
        let b = HermMat::from_fn(3, |i, j| Complex64::new(1.0 / (1 + i + j) as f64, (j as f64 - i as f64) * 0.5));
        let (mut ca, mut cb) = (vec![0.0; 9], vec![0.0; 9]);
        to_coords(&a, &mut ca);
        to_coords(&b, &mut cb);
        let dot: f64 = ca.iter().zip(&cb).map(|(p, q)| p * q).sum();
        assert!((dot - a.inner(&b)).abs() < 1e-12);
        assert!(from_coords(&ca, 3).max_abs_diff(&a) < 1e-14);
    }

    #[test]
    fn product_assemblage_has_zero_oracle_value() {
        let rho = HermMat::diag(&[0.6, 0.4]);
        let comps = [0.5, 0.5, 0.9, 0.1].iter().map(|&p| rho.scale(p)).collect();
        let asm = Assemblage::new_validated(2, 2, 2, comps).unwrap();
        assert_eq!(oracle_robustness(&asm, Flavor::LhsRestricted).unwrap().t_star, 0.0);
    }

    #[test]
    fn singlet_bracket_is_positive() {
        let r = oracle_robustness(&singlet_assemblage(), Flavor::LhsRestricted).unwrap();
        assert!(r.lower > 0.01 && r.upper - r.lower <= 1e-4);
    }
}
