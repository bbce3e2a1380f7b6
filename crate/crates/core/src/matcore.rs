//! Dense Hermitian matrices for the small Bob-side spaces used here
//! (dimension 2 up to 16).
//!
//! Everything is built on a cyclic complex Jacobi eigensolver: square roots,
//! Uhlmann fidelity and PSD projection are all spectral functions of a
//! Hermitian matrix.

use std::ops::{Add, Index, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues below `-PSD_TOL` mark a matrix as not positive semidefinite;
/// anything in `[-PSD_TOL, 0)` is clamped to zero.
pub const PSD_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 64;

/// Hermitian matrix stored row-major. Construction symmetrizes the input as
/// `(A + A†) / 2`, so the Hermitian invariant holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMat {
    dim: usize,
    data: Vec<Complex64>,
}

/// Spectral decomposition `A = V diag(values) V†`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Row-major unitary whose columns are the eigenvectors.
    pub vectors: Vec<Complex64>,
    dim: usize,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.vectors[i * self.dim + k]).collect()
    }

    /// `Σ_k f(λ_k) v_k v_k†`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> HermMat {
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for k in 0..n {
            let w = f(self.values[k]);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = self.vectors[i * n + k];
                for j in 0..n {
                    out[i * n + j] += vi * self.vectors[j * n + k].conj() * w;
                }
            }
        }
        HermMat::symmetrized(n, out)
    }
}

impl HermMat {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {dim}x{dim} entries, got {}",
                data.len()
            )));
        }
        Ok(Self::symmetrized(dim, data))
    }

    fn symmetrized(dim: usize, mut data: Vec<Complex64>) -> Self {
        for i in 0..dim {
            data[i * dim + i].im = 0.0;
            for j in (i + 1)..dim {
                let upper = data[i * dim + j];
                let lower = data[j * dim + i];
                let avg = (upper + lower.conj()) * 0.5;
                data[i * dim + j] = avg;
                data[j * dim + i] = avg.conj();
            }
        }
        Self { dim, data }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self::symmetrized(dim, data)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Rank-one operator `|ψ⟩⟨ψ|` (no normalization applied).
    pub fn projector(psi: &[Complex64]) -> Self {
        Self::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj())
    }

    /// Same as [`HermMat::projector`] for a real vector.
    pub fn real_projector(psi: &[f64]) -> Self {
        Self::from_fn(psi.len(), |i, j| Complex64::new(psi[i] * psi[j], 0.0))
    }

    pub fn pauli_x() -> Self {
        Self::from_fn(2, |i, j| Complex64::new(if i != j { 1.0 } else { 0.0 }, 0.0))
    }

    pub fn pauli_y() -> Self {
        Self::from_fn(2, |i, j| match (i, j) {
            (0, 1) => Complex64::new(0.0, -1.0),
            (1, 0) => Complex64::new(0.0, 1.0),
            _ => Complex64::new(0.0, 0.0),
        })
    }

    pub fn pauli_z() -> Self {
        Self::diag(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `Tr[A B]`, real for Hermitian arguments.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "inner: dimension mismatch");
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.data[i * n + j] * other.data[j * n + i]).re;
            }
        }
        acc
    }

    /// `K A K†` for a Hermitian `K` (so `K† = K`).
    pub fn sandwich(&self, k: &Self) -> Self {
        assert_eq!(self.dim, k.dim, "sandwich: dimension mismatch");
        let tmp = matmul(self.dim, &k.data, &self.data);
        Self::symmetrized(self.dim, matmul(self.dim, &tmp, &k.data))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff: dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Cyclic Jacobi eigendecomposition.
    pub fn eigh(&self) -> Eigen {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut v = Self::identity(n).data;
        let scale = self.frobenius_norm();

        for _ in 0..MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j].norm_sqr())
                .sum();
            if off.sqrt() <= 1e-17 * scale || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    let mag = apq.norm();
                    if mag <= 1e-300 || mag <= 1e-19 * scale {
                        continue;
                    }
                    let phase = apq / mag;
                    let theta = (a[q * n + q].re - a[p * n + p].re) / (2.0 * mag);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // J = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
                    let jpp = Complex64::new(c, 0.0);
                    let jpq = Complex64::new(s, 0.0);
                    let jqp = -phase.conj() * s;
                    let jqq = phase.conj() * c;

                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = akp * jpp + akq * jqp;
                        a[k * n + q] = akp * jpq + akq * jqq;
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * jpp + vkq * jqp;
                        v[k * n + q] = vkp * jpq + vkq * jqq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = jpp.conj() * apk + jqp.conj() * aqk;
                        a[q * n + k] = jpq.conj() * apk + jqq.conj() * aqk;
                    }
                    a[p * n + q] = Complex64::new(0.0, 0.0);
                    a[q * n + p] = Complex64::new(0.0, 0.0);
                    a[p * n + p].im = 0.0;
                    a[q * n + q].im = 0.0;
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
        let values = order.iter().map(|&k| a[k * n + k].re).collect();
        let mut vectors = vec![Complex64::new(0.0, 0.0); n * n];
        for (new_k, &old_k) in order.iter().enumerate() {
            for i in 0..n {
                vectors[i * n + new_k] = v[i * n + old_k];
            }
        }
        Eigen {
            values,
            vectors,
            dim: n,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigh().values[0]
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// Clamp negative eigenvalues to zero and rescale the remaining spectrum
    /// so the trace is unchanged. A matrix with non-positive trace maps to 0.
    pub fn project_psd_preserving_trace(&self) -> Self {
        let eig = self.eigh();
        let trace: f64 = eig.values.iter().sum();
        let clamped: f64 = eig.values.iter().map(|&l| l.max(0.0)).sum();
        if trace <= 0.0 || clamped <= 0.0 {
            return Self::zeros(self.dim);
        }
        let ratio = trace / clamped;
        eig.reconstruct(|l| l.max(0.0) * ratio)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n1, n2) = (self.dim, other.dim);
        let n = n1 * n2;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i1 in 0..n1 {
            for j1 in 0..n1 {
                let a = self.data[i1 * n1 + j1];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i2 in 0..n2 {
                    for j2 in 0..n2 {
                        data[(i1 * n2 + i2) * n + j1 * n2 + j2] = a * other.data[i2 * n2 + j2];
                    }
                }
            }
        }
        Self { dim: n, data }
    }

    /// Trace out subsystem `traced` of a tensor product space with factor
    /// dimensions `dims`.
    pub fn partial_trace(&self, dims: &[usize], traced: usize) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != self.dim || traced >= dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot trace factor {traced} of {dims:?} from a {}x{} matrix",
                self.dim, self.dim
            )));
        }
        let left: usize = dims[..traced].iter().product();
        let mid = dims[traced];
        let right: usize = dims[traced + 1..].iter().product();
        let out_dim = left * right;
        let mut out = vec![Complex64::new(0.0, 0.0); out_dim * out_dim];
        for li in 0..left {
            for ri in 0..right {
                for lj in 0..left {
                    for rj in 0..right {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for k in 0..mid {
                            let i = (li * mid + k) * right + ri;
                            let j = (lj * mid + k) * right + rj;
                            acc += self.data[i * self.dim + j];
                        }
                        out[(li * right + ri) * out_dim + lj * right + rj] = acc;
                    }
                }
            }
        }
        Ok(Self::symmetrized(out_dim, out))
    }

    /// Rows of `[re, im]` pairs, both triangles.
    pub fn to_rows(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| {
                        let z = self.data[i * self.dim + j];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("matrix rows are not square".into()));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)))
            .collect();
        Self::new(n, data)
    }
}

impl serde::Serialize for HermMat {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for HermMat {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        Self::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

fn matmul(n: usize, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

impl Index<(usize, usize)> for HermMat {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl Add for &HermMat {
    type Output = HermMat;

    fn add(self, rhs: &HermMat) -> HermMat {
        assert_eq!(self.dim, rhs.dim, "add: dimension mismatch");
        HermMat {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &HermMat {
    type Output = HermMat;

    fn sub(self, rhs: &HermMat) -> HermMat {
        assert_eq!(self.dim, rhs.dim, "sub: dimension mismatch");
        HermMat {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &HermMat {
    type Output = HermMat;

    fn mul(self, rhs: f64) -> HermMat {
        self.scale(rhs)
    }
}

fn check_psd(eig: &Eigen) -> Result<()> {
    let min = eig.values[0];
    if min < -PSD_TOL {
        return Err(Error::NotPsd(min));
    }
    Ok(())
}

/// Eigenvalues within this multiple of the spectral radius are round-off
/// and are treated as exact zeros before taking square roots; otherwise a
/// rank-deficient input picks up spurious `√ε`-sized contributions.
pub const SPECTRAL_CUTOFF: f64 = 64.0 * f64::EPSILON;

fn root_of(l: f64, radius: f64) -> f64 {
    if l <= SPECTRAL_CUTOFF * radius {
        0.0
    } else {
        l.sqrt()
    }
}

fn radius(eig: &Eigen) -> f64 {
    eig.values.iter().fold(0.0, |acc: f64, l| acc.max(l.abs()))
}

/// Principal square root of a positive semidefinite matrix.
pub fn sqrtm_psd(a: &HermMat) -> Result<HermMat> {
    let eig = a.eigh();
    check_psd(&eig)?;
    let r = radius(&eig);
    Ok(eig.reconstruct(|l| root_of(l, r)))
}

/// Uhlmann fidelity `Tr √(√A B √A)`. Unit trace is not required; for
/// subnormalized arguments the value scales as `√(Tr A · Tr B)`.
pub fn uhlmann_fidelity(a: &HermMat, b: &HermMat) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(format!(
            "fidelity between {}x{} and {}x{}",
            a.dim, a.dim, b.dim, b.dim
        )));
    }
    check_psd(&b.eigh())?;
    let root = sqrtm_psd(a)?;
    let eig = b.sandwich(&root).eigh();
    let r = radius(&eig);
    Ok(eig.values.iter().map(|&l| root_of(l, r)).sum())
}
