//! Exact complex linear algebra for small Hilbert spaces.
//!
//! States are plain amplitude vectors in the computational basis, observables
//! are dense Hermitian matrices that carry their spectral decomposition
//! (distinct eigenvalues plus orthogonal projectors). Everything is immutable
//! after construction.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Largest dimension accepted by the eigensolver.
pub const MAX_DIM: usize = 16;

/// Entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues closer than this fraction of the spectral radius share a projector.
pub const DEGENERACY_REL_GAP: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.amps.iter()).finish()
    }
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::rejected("state vector must have dimension >= 1"));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::rejected("state vector has non-finite amplitude"));
        }
        Ok(Self { amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Computational basis ket `|index>`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::rejected(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self::new(amps)
    }

    pub fn z_plus() -> Self {
        Self {
            amps: vec![ONE, ZERO],
        }
    }

    pub fn z_minus() -> Self {
        Self {
            amps: vec![ZERO, ONE],
        }
    }

    pub fn x_plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amps: vec![Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
        }
    }

    pub fn x_minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amps: vec![Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
        }
    }

    pub fn y_plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amps: vec![Complex64::new(h, 0.0), Complex64::new(0.0, h)],
        }
    }

    pub fn y_minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amps: vec![Complex64::new(h, 0.0), Complex64::new(0.0, -h)],
        }
    }

    /// Haar-random normalized state (normalized complex Gaussian vector).
    pub fn random(dim: usize, rng: &mut RngStream) -> Result<Self> {
        let amps = (0..dim)
            .map(|_| Complex64::new(rng.standard_normal(), rng.standard_normal()))
            .collect();
        Self::new(amps)?.normalize()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::rejected(
                "cannot normalize a zero or non-finite state",
            ));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// Global phase convention: the first non-negligible amplitude is made
    /// real and non-negative.
    pub fn phase_fixed(&self) -> Self {
        let max = self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
        match self.amps.iter().find(|a| a.norm() > 1e-12 * max) {
            Some(lead) => self.scale(lead.conj() / lead.norm()),
            None => self.clone(),
        }
    }

    pub fn inner(&self, ket: &StateVector) -> Result<Complex64> {
        inner(self, ket)
    }

    /// Largest entrywise modulus difference.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `<bra|ket> = sum conj(bra_i) ket_i`.
pub fn inner(bra: &StateVector, ket: &StateVector) -> Result<Complex64> {
    if bra.dim() != ket.dim() {
        return Err(Error::rejected(format!(
            "dimension mismatch in inner product: {} vs {}",
            bra.dim(),
            ket.dim()
        )));
    }
    Ok(bra
        .amps
        .iter()
        .zip(&ket.amps)
        .map(|(b, k)| b.conj() * k)
        .sum())
}

/// Spin-up state along `(cos a, 0, sin a)` in the xz-plane, `a` in degrees
/// measured from +x toward +z. The z-up amplitude is real and non-negative.
pub fn spin_state(alpha_deg: f64) -> Result<StateVector> {
    if !alpha_deg.is_finite() {
        return Err(Error::rejected("spin angle must be finite"));
    }
    // Polar angle from +z is 90° - alpha; the half-angle form covers both
    // azimuths (0 and pi) through the sign of the sine.
    let half = (90.0 - alpha_deg).to_radians() / 2.0;
    let (mut up, mut down) = (half.cos(), half.sin());
    if up < 0.0 {
        up = -up;
        down = -down;
    }
    StateVector::from_real(&[up, down])
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[Complex64]> = self.data.chunks(self.dim).collect();
        f.debug_list().entries(rows).finish()
    }
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::rejected("matrix must be square and non-empty"));
        }
        let data: Vec<Complex64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::rejected("matrix has non-finite entries"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// `|ket><bra|`.
    pub fn outer(ket: &StateVector, bra: &StateVector) -> Self {
        let dim = ket.dim();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = ket.amps[i] * bra.amps[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, self.get(j, i).conj());
            }
        }
        m
    }

    pub fn add(&self, other: &Matrix) -> Self {
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        m
    }

    pub fn apply(&self, ket: &StateVector) -> Result<StateVector> {
        if ket.dim() != self.dim {
            return Err(Error::rejected(format!(
                "dimension mismatch: operator {} vs state {}",
                self.dim,
                ket.dim()
            )));
        }
        let amps = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * ket.amps[j]).sum())
            .collect();
        StateVector::new(amps)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }
}

/// Hermitian observable with its spectral decomposition.
///
/// `eigenvalues` are distinct and sorted descending; `projectors[i]` is the
/// orthogonal projector onto the eigenspace of `eigenvalues[i]`.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    matrix: Matrix,
    eigenvalues: Vec<f64>,
    projectors: Vec<Matrix>,
}

impl HermitianOperator {
    /// Validates Hermiticity and diagonalizes with cyclic Jacobi rotations.
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.dim() > MAX_DIM {
            return Err(Error::rejected(format!(
                "dimension {} exceeds eigensolver limit {MAX_DIM}",
                matrix.dim()
            )));
        }
        if !matrix.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::rejected("matrix is not Hermitian"));
        }
        let (values, vectors) = jacobi_eigen(&matrix);
        let (eigenvalues, projectors) = group_spectrum(&values, &vectors);
        Ok(Self {
            matrix,
            eigenvalues,
            projectors,
        })
    }

    /// Builds `sum_i eigenvalue_i * projector_i` from a known spectral
    /// decomposition. Entries are re-sorted descending; zero-rank projectors
    /// are dropped.
    pub fn from_spectrum(eigenvalues: Vec<f64>, projectors: Vec<Matrix>) -> Result<Self> {
        if eigenvalues.len() != projectors.len() || eigenvalues.is_empty() {
            return Err(Error::rejected("need one projector per eigenvalue"));
        }
        let dim = projectors[0].dim();
        if projectors.iter().any(|p| p.dim() != dim) {
            return Err(Error::rejected("projectors of differing dimension"));
        }
        let mut parts: Vec<(f64, Matrix)> = eigenvalues
            .into_iter()
            .zip(projectors)
            .filter(|(_, p)| p.trace().re > 0.5)
            .collect();
        parts.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut sum = Matrix::zeros(dim);
        let mut matrix = Matrix::zeros(dim);
        for (value, p) in &parts {
            sum = sum.add(p);
            matrix = matrix.add(&p.scale(Complex64::new(*value, 0.0)));
        }
        if sum.max_abs_diff(&Matrix::identity(dim)) > 1e-10 {
            return Err(Error::rejected("projectors do not resolve the identity"));
        }
        let (eigenvalues, projectors) = parts.into_iter().unzip();
        Ok(Self {
            matrix,
            eigenvalues,
            projectors,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: Matrix::identity(dim),
            eigenvalues: vec![1.0],
            projectors: vec![Matrix::identity(dim)],
        }
    }

    /// Random Hermitian matrix with complex Gaussian entries.
    pub fn random(dim: usize, rng: &mut RngStream) -> Result<Self> {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(rng.standard_normal(), 0.0));
            for j in (i + 1)..dim {
                let z = Complex64::new(rng.standard_normal(), rng.standard_normal())
                    * std::f64::consts::FRAC_1_SQRT_2;
                m.set(i, j, z);
                m.set(j, i, z.conj());
            }
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projectors(&self) -> &[Matrix] {
        &self.projectors
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn apply(&self, ket: &StateVector) -> Result<StateVector> {
        self.matrix.apply(ket)
    }

    /// `<psi|A|psi> / <psi|psi>`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        let a_psi = self.apply(psi)?;
        Ok(inner(psi, &a_psi)?.re / psi.norm_sqr())
    }

    /// Normalized, phase-fixed vector spanning the `index`-th eigenspace when
    /// that eigenspace is one-dimensional.
    pub fn eigenvector(&self, index: usize) -> Result<StateVector> {
        let p = self
            .projectors
            .get(index)
            .ok_or_else(|| Error::rejected("eigen index out of range"))?;
        if (p.trace().re - 1.0).abs() > 1e-9 {
            return Err(Error::rejected("eigenspace is degenerate"));
        }
        let dim = p.dim();
        let best = (0..dim)
            .max_by(|&a, &b| p.get(a, a).re.total_cmp(&p.get(b, b).re))
            .unwrap_or(0);
        let column = (0..dim).map(|i| p.get(i, best)).collect();
        Ok(StateVector::new(column)?.normalize()?.phase_fixed())
    }
}

/// Returns `(eigenvalues, projectors)` of `op`.
pub fn eigendecompose(op: &HermitianOperator) -> (Vec<f64>, Vec<Matrix>) {
    (op.eigenvalues.clone(), op.projectors.clone())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Axis {
    X,
    Y,
    Z,
    Vector([f64; 3]),
}

impl Axis {
    pub fn unit_vector(&self) -> [f64; 3] {
        match *self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
            Axis::Vector(v) => v,
        }
    }
}

/// Pauli operator `n . sigma` for a unit vector `n`.
pub fn pauli(axis: Axis) -> Result<HermitianOperator> {
    let [nx, ny, nz] = axis.unit_vector();
    if ![nx, ny, nz].iter().all(|c| c.is_finite()) {
        return Err(Error::rejected("axis has non-finite components"));
    }
    let len = (nx * nx + ny * ny + nz * nz).sqrt();
    if (len - 1.0).abs() > 1e-9 {
        return Err(Error::rejected(format!(
            "axis must be a unit vector, |n| = {len}"
        )));
    }
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let sigma = Matrix::from_rows(&[vec![c(nz, 0.0), c(nx, -ny)], vec![c(nx, ny), c(-nz, 0.0)]])?;
    let identity = Matrix::identity(2);
    let half = c(0.5, 0.0);
    let up = identity.add(&sigma).scale(half);
    let down = identity.add(&sigma.scale(c(-1.0, 0.0))).scale(half);
    Ok(HermitianOperator {
        matrix: sigma,
        eigenvalues: vec![1.0, -1.0],
        projectors: vec![up, down],
    })
}

/// Cyclic complex Jacobi diagonalization of a Hermitian matrix.
///
/// Returns unsorted eigenvalues and the matching orthonormal eigenvectors.
fn jacobi_eigen(input: &Matrix) -> (Vec<f64>, Vec<StateVector>) {
    const MAX_SWEEPS: usize = 100;
    let n = input.dim();
    let mut a = input.clone();
    // Symmetrize away the sub-tolerance anti-Hermitian part.
    for i in 0..n {
        a.set(i, i, Complex64::new(a.get(i, i).re, 0.0));
        for j in (i + 1)..n {
            let avg = (a.get(i, j) + a.get(j, i).conj()) * 0.5;
            a.set(i, j, avg);
            a.set(j, i, avg.conj());
        }
    }
    let mut v = Matrix::identity(n);
    let scale = a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r; // e^{i phi}
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotation U: f_p = c e_p - s e^{-i phi} e_q, f_q = s e_p + c e^{-i phi} e_q.
                let down = phase.conj();
                // A <- A U (columns p, q)
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * c - akq * down * s);
                    a.set(k, q, akp * s + akq * down * c);
                }
                // A <- U^dagger A (rows p, q)
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * c - aqk * phase * s);
                    a.set(q, k, apk * s + aqk * phase * c);
                }
                a.set(p, q, ZERO);
                a.set(q, p, ZERO);
                a.set(p, p, Complex64::new(a.get(p, p).re, 0.0));
                a.set(q, q, Complex64::new(a.get(q, q).re, 0.0));
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c - vkq * down * s);
                    v.set(k, q, vkp * s + vkq * down * c);
                }
            }
        }
    }

    let values = (0..n).map(|i| a.get(i, i).re).collect();
    let vectors = (0..n)
        .map(|j| StateVector {
            amps: (0..n).map(|i| v.get(i, j)).collect(),
        })
        .collect();
    (values, vectors)
}

/// Sorts descending and merges near-degenerate eigenvalues into one projector.
fn group_spectrum(values: &[f64], vectors: &[StateVector]) -> (Vec<f64>, Vec<Matrix>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let radius = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let gap = DEGENERACY_REL_GAP * radius;

    let mut eigenvalues = Vec::new();
    let mut projectors: Vec<Matrix> = Vec::new();
    let mut group: Vec<usize> = Vec::new();
    let flush =
        |group: &mut Vec<usize>, eigenvalues: &mut Vec<f64>, projectors: &mut Vec<Matrix>| {
            if group.is_empty() {
                return;
            }
            let mean = group.iter().map(|&i| values[i]).sum::<f64>() / group.len() as f64;
            let mut p = Matrix::zeros(n);
            for &i in group.iter() {
                p = p.add(&Matrix::outer(&vectors[i], &vectors[i]));
            }
            eigenvalues.push(mean);
            projectors.push(p);
            group.clear();
        };
    for &i in &order {
        if let Some(&last) = group.last() {
            if values[last] - values[i] > gap {
                flush(&mut group, &mut eigenvalues, &mut projectors);
            }
        }
        group.push(i);
    }
    flush(&mut group, &mut eigenvalues, &mut projectors);
    (eigenvalues, projectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn check_spectral_invariants(op: &HermitianOperator, tol: f64) {
        let n = op.dim();
        let mut sum = Matrix::zeros(n);
        let mut recon = Matrix::zeros(n);
        for (value, p) in op.eigenvalues().iter().zip(op.projectors()) {
            sum = sum.add(p);
            recon = recon.add(&p.scale(c(*value, 0.0)));
            assert!(p.matmul(p).max_abs_diff(p) <= tol, "idempotent");
        }
        for (i, p) in op.projectors().iter().enumerate() {
            for q in &op.projectors()[i + 1..] {
                assert!(
                    p.matmul(q).max_abs_diff(&Matrix::zeros(n)) <= tol,
                    "orthogonal"
                );
            }
        }
        assert!(sum.max_abs_diff(&Matrix::identity(n)) <= tol, "complete");
        assert!(recon.max_abs_diff(op.matrix()) <= tol, "reconstruction");
        assert!(op.eigenvalues().windows(2).all(|w| w[0] > w[1]), "sorted");
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn inner_examples() {
        let z = StateVector::z_plus();
        assert_eq!(inner(&z, &z).unwrap(), c(1.0, 0.0));
        assert_eq!(inner(&z, &StateVector::z_minus()).unwrap(), c(0.0, 0.0));
        let xz = inner(&StateVector::x_plus(), &z).unwrap();
        assert!((xz - c(0.707_106_78, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn inner_rejects_dimension_mismatch() {
        let a = StateVector::basis(3, 0).unwrap();
        assert!(matches!(
            inner(&a, &StateVector::z_plus()),
            Err(Error::RejectedInput(_))
        ));
    }

    #[test]
    fn spin_state_examples() {
        assert!(
            spin_state(90.0)
                .unwrap()
                .max_abs_diff(&StateVector::z_plus())
                < 1e-15
        );
        assert!(
            spin_state(0.0)
                .unwrap()
                .max_abs_diff(&StateVector::x_plus())
                < 1e-15
        );
        // +1 eigenvector of [[sin a, cos a], [cos a, -sin a]] at a = 135°, found
        // by brute force: scan the unit circle for the vector with smallest residual.
        let (s, co) = (135f64.to_radians().sin(), 135f64.to_radians().cos());
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..2_000_000 {
            let t = k as f64 * std::f64::consts::PI / 2_000_000.0 - std::f64::consts::FRAC_PI_2;
            let (u, d) = (t.cos(), t.sin());
            let r = (s * u + co * d - u).powi(2) + (co * u - s * d - d).powi(2);
            if r < best.0 {
                best = (r, t);
            }
        }
        let oracle = [best.1.cos(), best.1.sin()];
        let state = spin_state(135.0).unwrap();
        assert!((state.amplitudes()[0].re - oracle[0]).abs() < 1e-5);
        assert!((state.amplitudes()[1].re - oracle[1]).abs() < 1e-5);
        assert!((state.amplitudes()[0].re - 0.92388).abs() < 1e-5);
        assert!((state.amplitudes()[1].re + 0.38268).abs() < 1e-5);
    }

    #[test]
    fn spin_state_rejects_non_finite() {
        assert!(spin_state(f64::NAN).is_err());
        assert!(spin_state(f64::INFINITY).is_err());
    }

    #[test]
    fn spin_state_is_eigenvector_on_degree_grid() {
        for deg in 0..360 {
            let a = (deg as f64).to_radians();
            let op = pauli(Axis::Vector([a.cos(), 0.0, a.sin()])).unwrap();
            let psi = spin_state(deg as f64).unwrap();
            let residual = op.apply(&psi).unwrap().max_abs_diff(&psi);
            assert!(residual <= 1e-10, "deg {deg}: residual {residual}");
            assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
            assert!(psi.amplitudes()[0].re >= 0.0);
        }
    }

    #[test]
    fn pauli_examples() {
        let z = pauli(Axis::Z).unwrap();
        let expect_z = Matrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(z.matrix(), &expect_z);
        assert_eq!(z.eigenvalues(), &[1.0, -1.0]);
        let x = pauli(Axis::X).unwrap();
        let expect_x = Matrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(x.matrix(), &expect_x);

        let a = 135f64.to_radians();
        let n = pauli(Axis::Vector([a.cos(), 0.0, a.sin()])).unwrap();
        let v = n.eigenvector(0).unwrap();
        assert!(v.max_abs_diff(&spin_state(135.0).unwrap()) < 1e-12);
        for op in [&z, &x, &n, &pauli(Axis::Y).unwrap()] {
            check_spectral_invariants(op, 1e-12);
        }
    }

    #[test]
    fn pauli_rejects_non_unit_axis() {
        assert!(matches!(
            pauli(Axis::Vector([1.0, 1.0, 0.0])),
            Err(Error::RejectedInput(_))
        ));
        assert!(pauli(Axis::Vector([1.0 + 5e-10, 0.0, 0.0])).is_ok());
    }

    #[test]
    fn eigendecompose_examples() {
        let z = HermitianOperator::new(pauli(Axis::Z).unwrap().matrix().clone()).unwrap();
        let (vals, projs) = eigendecompose(&z);
        assert_eq!(vals, vec![1.0, -1.0]);
        let up = Matrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let down = Matrix::from_real_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(projs[0].max_abs_diff(&up) < 1e-15);
        assert!(projs[1].max_abs_diff(&down) < 1e-15);

        let id = HermitianOperator::new(Matrix::identity(2)).unwrap();
        let (vals, projs) = eigendecompose(&id);
        assert_eq!(vals.len(), 1);
        assert!((vals[0] - 1.0).abs() < 1e-15);
        assert!(projs[0].max_abs_diff(&Matrix::identity(2)) < 1e-15);

        let x = HermitianOperator::new(pauli(Axis::X).unwrap().matrix().clone()).unwrap();
        let (vals, projs) = eigendecompose(&x);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] + 1.0).abs() < 1e-14);
        let plus = Matrix::from_real_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let minus = Matrix::from_real_rows(&[vec![0.5, -0.5], vec![-0.5, 0.5]]).unwrap();
        assert!(projs[0].max_abs_diff(&plus) < 1e-14);
        assert!(projs[1].max_abs_diff(&minus) < 1e-14);
        check_spectral_invariants(&x, 1e-12);
    }

    #[test]
    fn eigendecompose_rejects_non_hermitian() {
        let m = Matrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, 1.0), c(1.0, 0.0)],
        ])
        .unwrap();
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::RejectedInput(_))
        ));
        assert!(HermitianOperator::new(Matrix::identity(17)).is_err());
    }

    #[test]
    fn degenerate_eigenvalues_merge() {
        // diag(2, 2, -1) rotated by a random unitary built from eigenvectors of a random matrix.
        let mut rng = RngStream::derive(5, 0);
        let basis = HermitianOperator::random(3, &mut rng).unwrap();
        let vecs: Vec<StateVector> = (0..3).map(|i| basis.eigenvector(i).unwrap()).collect();
        let m = Matrix::outer(&vecs[0], &vecs[0])
            .add(&Matrix::outer(&vecs[1], &vecs[1]))
            .scale(c(2.0, 0.0))
            .add(&Matrix::outer(&vecs[2], &vecs[2]).scale(c(-1.0, 0.0)));
        let op = HermitianOperator::new(m).unwrap();
        assert_eq!(op.eigenvalues().len(), 2);
        assert!((op.eigenvalues()[0] - 2.0).abs() < 1e-12);
        assert!((op.projectors()[0].trace().re - 2.0).abs() < 1e-12);
        check_spectral_invariants(&op, 1e-10);
    }

    #[test]
    fn random_hermitian_spectra() {
        for seed in 0..100u64 {
            let mut rng = RngStream::derive(seed, 1);
            let dim = 1 + (seed as usize % 8);
            let op = HermitianOperator::random(dim, &mut rng).unwrap();
            check_spectral_invariants(&op, 1e-10);
        }
        let mut rng = RngStream::derive(77, 1);
        let op = HermitianOperator::random(16, &mut rng).unwrap();
        check_spectral_invariants(&op, 1e-10);
    }

    #[test]
    fn inner_symmetry_and_linearity() {
        for seed in 0..100u64 {
            let mut rng = RngStream::derive(seed, 2);
            let dim = 1 + (seed as usize % 6);
            let x = StateVector::random(dim, &mut rng).unwrap();
            let y = StateVector::random(dim, &mut rng).unwrap();
            let z = StateVector::random(dim, &mut rng).unwrap();
            let xy = inner(&x, &y).unwrap();
            assert!((xy - inner(&y, &x).unwrap().conj()).norm() < 1e-12);
            let (a, b) = (c(0.3, -1.2), c(-0.7, 0.4));
            let combo = StateVector::new(
                y.amplitudes()
                    .iter()
                    .zip(z.amplitudes())
                    .map(|(p, q)| a * p + b * q)
                    .collect(),
            )
            .unwrap();
            let lhs = inner(&x, &combo).unwrap();
            let rhs = a * xy + b * inner(&x, &z).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_fixing() {
        let psi = StateVector::x_plus().scale(c(0.0, 1.0)).phase_fixed();
        assert!(psi.max_abs_diff(&StateVector::x_plus()) < 1e-15);
        let z = StateVector::z_minus().scale(c(-H, H)).phase_fixed();
        assert!(z.max_abs_diff(&StateVector::z_minus()) < 1e-15);
    }

    #[test]
    fn normalize_rejects_zero() {
        let zero = StateVector::from_real(&[0.0, 0.0]).unwrap();
        assert!(zero.normalize().is_err());
        let psi = StateVector::from_real(&[3.0, 4.0])
            .unwrap()
            .normalize()
            .unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() <= 1e-12);
    }
}
