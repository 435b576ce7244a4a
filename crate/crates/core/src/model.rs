//! Rotor ⊗ Fock basis, the operators acting on it, and the field-free
//! cavity–molecule Hamiltonian.
//!
//! Only the M = 0 sublevel is kept: a linearly polarised drive starting from
//! J = 0 never leaves it. The quadratic self-energy and self-dipole terms are
//! not included.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::units;

/// Largest accepted g/ω_c. The reference parameters sit at 0.100002, so the
/// bound carries a small slack.
pub const MAX_COUPLING_RATIO: f64 = 0.1 * (1.0 + 1e-3);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Rotational constant B (hartree).
    pub rotational_constant: f64,
    /// Permanent dipole μ (e·a₀).
    pub dipole: f64,
    /// Cavity angular frequency ω_c (a.u.).
    pub omega_c: f64,
    /// Jaynes–Cummings coupling g (a.u.).
    pub coupling: f64,
    pub j_max: usize,
    pub n_max: usize,
}

/// Lower/upper n = 0 polariton frequencies quoted for OCS in the cavity.
pub const REFERENCE_OMEGA_MINUS: f64 = 1.66379e-6;
pub const REFERENCE_OMEGA_PLUS: f64 = 2.03353e-6;

impl ModelParams {
    /// OCS (B = 0.20286 cm⁻¹, μ = 0.715 D) in a cavity whose n = 0 polaritons
    /// sit at 1.66379e-6 and 2.03353e-6 a.u. ω_c and g are the half-sum and
    /// half-difference of those two frequencies. Basis J ≤ 4, n ≤ 3.
    pub fn reference() -> Self {
        ModelParams {
            rotational_constant: units::wavenumber(0.20286),
            dipole: units::debye(0.715),
            omega_c: 0.5 * (REFERENCE_OMEGA_PLUS + REFERENCE_OMEGA_MINUS),
            coupling: 0.5 * (REFERENCE_OMEGA_PLUS - REFERENCE_OMEGA_MINUS),
            j_max: 4,
            n_max: 3,
        }
    }

    pub fn with_basis(self, j_max: usize, n_max: usize) -> Self {
        ModelParams { j_max, n_max, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rotational_constant", self.rotational_constant),
            ("dipole", self.dipole),
            ("omega_c", self.omega_c),
            ("coupling", self.coupling),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let ratio = self.coupling / self.omega_c;
        if ratio > MAX_COUPLING_RATIO {
            return Err(invalid("coupling", format!("g/omega_c = {ratio} exceeds the supported regime (<= 0.1)")));
        }
        if self.j_max < 1 {
            return Err(invalid("j_max", "must be >= 1"));
        }
        Ok(())
    }

    /// μ₀₁ = ⟨00|μ cosθ|10⟩ = μ/√3.
    pub fn mu01(&self) -> f64 {
        self.dipole * cos_theta_element(0)
    }

    pub fn basis(&self) -> CompositeBasis {
        CompositeBasis { j_max: self.j_max, n_max: self.n_max }
    }
}

/// Product states |J, n⟩, ordered lexicographically in (n, J):
/// index = n·(J_max + 1) + J.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CompositeBasis {
    j_max: usize,
    n_max: usize,
}

impl CompositeBasis {
    pub fn new(j_max: usize, n_max: usize) -> Result<Self> {
        if j_max < 1 {
            return Err(invalid("j_max", format!("must be >= 1, got {j_max}")));
        }
        Ok(CompositeBasis { j_max, n_max })
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        (self.j_max + 1) * (self.n_max + 1)
    }

    pub fn index(&self, j: usize, n: usize) -> Option<usize> {
        (j <= self.j_max && n <= self.n_max).then(|| n * (self.j_max + 1) + j)
    }

    /// (J, n) of a basis index.
    pub fn label(&self, index: usize) -> (usize, usize) {
        assert!(index < self.dim(), "basis index {index} out of range");
        (index % (self.j_max + 1), index / (self.j_max + 1))
    }

    pub fn labels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.dim()).map(move |i| self.label(i))
    }
}

/// Build the composite basis for J ≤ `j_max`, n ≤ `n_max`.
pub fn build_basis(j_max: usize, n_max: usize) -> Result<CompositeBasis> {
    CompositeBasis::new(j_max, n_max)
}

/// A real operator over a [`CompositeBasis`]. Every operator in this model is
/// real, so Hermitian here means symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<f64>,
    pub hermitian: bool,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[(row, col)]
    }

    /// max |A − Aᵀ| relative to max |A|.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.matrix.amax();
        if scale == 0.0 {
            return 0.0;
        }
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub fn check_hermitian(&self) -> bool {
        self.asymmetry() < 1e-14
    }
}

/// ⟨J|cosθ|J+1⟩ for M = 0.
pub fn cos_theta_element(j: usize) -> f64 {
    let j = j as f64;
    (j + 1.0) / ((2.0 * j + 1.0) * (2.0 * j + 3.0)).sqrt()
}

/// cosθ ⊗ 1: couples |J, n⟩ ↔ |J ± 1, n⟩.
pub fn cos_theta_matrix(basis: &CompositeBasis) -> OperatorMatrix {
    let dim = basis.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for n in 0..=basis.n_max {
        for j in 0..basis.j_max {
            let a = basis.index(j, n).unwrap();
            let b = basis.index(j + 1, n).unwrap();
            let v = cos_theta_element(j);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    OperatorMatrix { matrix: m, hermitian: true }
}

/// 1 ⊗ a†a
pub fn photon_number_matrix(basis: &CompositeBasis) -> OperatorMatrix {
    let dim = basis.dim();
    let diag = nalgebra::DVector::from_iterator(dim, basis.labels().map(|(_, n)| n as f64));
    OperatorMatrix { matrix: DMatrix::from_diagonal(&diag), hermitian: true }
}

/// J² ⊗ 1
pub fn j_squared_matrix(basis: &CompositeBasis) -> OperatorMatrix {
    let dim = basis.dim();
    let diag = nalgebra::DVector::from_iterator(dim, basis.labels().map(|(j, _)| (j * (j + 1)) as f64));
    OperatorMatrix { matrix: DMatrix::from_diagonal(&diag), hermitian: true }
}

/// 1 ⊗ (a + a†), truncated at n_max.
pub fn field_quadrature_matrix(basis: &CompositeBasis) -> OperatorMatrix {
    let dim = basis.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..=basis.j_max {
        for n in 0..basis.n_max {
            let a = basis.index(j, n).unwrap();
            let b = basis.index(j, n + 1).unwrap();
            let v = ((n + 1) as f64).sqrt();
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    OperatorMatrix { matrix: m, hermitian: true }
}

/// H₀ = B J² + ω_c a†a − √3 g cosθ (a + a†).
///
/// The cavity prefactor √(ω_c/2ε₀V)·μ is never needed on its own: g is defined
/// through the μ/√3 matrix element, so the prefactor is √3·g.
pub fn build_h0(params: &ModelParams, basis: &CompositeBasis) -> OperatorMatrix {
    let cos = cos_theta_matrix(basis);
    let x = field_quadrature_matrix(basis);
    let j2 = j_squared_matrix(basis);
    let num = photon_number_matrix(basis);
    let coupling = 3f64.sqrt() * params.coupling;
    let m = j2.matrix * params.rotational_constant + num.matrix * params.omega_c - (&cos.matrix * &x.matrix) * coupling;
    OperatorMatrix { matrix: m, hermitian: true }
}

/// μ cosθ ⊗ 1, the operator the external field couples to.
pub fn dipole_matrix(params: &ModelParams, basis: &CompositeBasis) -> OperatorMatrix {
    let cos = cos_theta_matrix(basis);
    OperatorMatrix { matrix: cos.matrix * params.dipole, hermitian: true }
}

/// Photon parity (−1)^n as a diagonal sign per basis index.
pub fn photon_parity(basis: &CompositeBasis) -> Vec<f64> {
    basis.labels().map(|(_, n)| if n % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(build_basis(4, 3).unwrap().dim(), 20);
        assert_eq!(build_basis(1, 0).unwrap().dim(), 2);
        assert_eq!(build_basis(2, 1).unwrap().dim(), 6);
        assert!(build_basis(0, 3).is_err());
    }

    #[test]
    fn basis_labels_invert_indices() {
        let b = build_basis(4, 3).unwrap();
        for (i, (j, n)) in b.labels().enumerate() {
            assert_eq!(b.index(j, n), Some(i));
        }
        // lexicographic in (n, J)
        assert_eq!(b.label(0), (0, 0));
        assert_eq!(b.label(1), (1, 0));
        assert_eq!(b.label(5), (0, 1));
        assert_eq!(b.index(5, 0), None);
    }

    #[test]
    fn cos_theta_elements() {
        assert!((cos_theta_element(0) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((cos_theta_element(1) - 2.0 / 15f64.sqrt()).abs() < 1e-15);
        assert!((cos_theta_element(2) - 3.0 / 35f64.sqrt()).abs() < 1e-15);
        let b = build_basis(4, 3).unwrap();
        let c = cos_theta_matrix(&b);
        assert!(c.check_hermitian());
        for i in 0..b.dim() {
            assert_eq!(c.get(i, i), 0.0);
        }
        // block diagonal in n
        for r in 0..b.dim() {
            for s in 0..b.dim() {
                if b.label(r).1 != b.label(s).1 {
                    assert_eq!(c.get(r, s), 0.0);
                }
            }
        }
    }

    /// ∫ P̃_J(x) x P̃_{J+1}(x) dx over [−1, 1] with orthonormal Legendre
    /// polynomials, by composite Simpson.
    fn cos_element_by_quadrature(j: usize) -> f64 {
        fn legendre(l: usize, x: f64) -> f64 {
            let (mut p0, mut p1) = (1.0, x);
            if l == 0 {
                return p0;
            }
            for k in 1..l {
                let k = k as f64;
                let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
        let norm = |l: usize| ((2 * l + 1) as f64 / 2.0).sqrt();
        let n = 20_000;
        let h = 2.0 / n as f64;
        let f = |x: f64| norm(j) * legendre(j, x) * x * norm(j + 1) * legendre(j + 1, x);
        let mut s = f(-1.0) + f(1.0);
        for i in 1..n {
            let x = -1.0 + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn cos_elements_match_angular_integral() {
        for j in 0..4 {
            assert!((cos_element_by_quadrature(j) - cos_theta_element(j)).abs() < 1e-10, "J = {j}");
        }
    }

    #[test]
    fn h0_entries() {
        let p = ModelParams::reference();
        let b = p.basis();
        let h = build_h0(&p, &b);
        assert!(h.check_hermitian());
        let i10 = b.index(1, 0).unwrap();
        assert!((h.get(i10, i10) - 2.0 * p.rotational_constant).abs() < 1e-22);
        assert!((h.get(i10, i10) - 1.848596e-6).abs() < 1e-12);
        let i00 = b.index(0, 0).unwrap();
        let i11 = b.index(1, 1).unwrap();
        assert!((h.get(i00, i11) + p.coupling).abs() < 1e-20);
        let i01 = b.index(0, 1).unwrap();
        assert!((h.get(i01, i10) + p.coupling).abs() < 1e-20);
    }

    #[test]
    fn decoupled_h0_is_diagonal() {
        let p = ModelParams { coupling: 0.0, ..ModelParams::reference() };
        let b = p.basis();
        let h = build_h0(&p, &b);
        for r in 0..b.dim() {
            for s in 0..b.dim() {
                if r != s {
                    assert_eq!(h.get(r, s), 0.0);
                }
            }
        }
    }

    #[test]
    fn reference_parameters() {
        let p = ModelParams::reference();
        p.validate().unwrap();
        assert!((p.coupling - 1.8487e-7).abs() < 1e-18);
        assert!((p.omega_c - 1.84866e-6).abs() < 1e-17);
        assert!(((p.omega_c - 2.0 * p.rotational_constant) / p.omega_c).abs() < 1e-4);
    }

    #[test]
    fn validation_rejects_bad_params() {
        let p = ModelParams::reference();
        assert!(ModelParams { coupling: 0.2 * p.omega_c, ..p }.validate().is_err());
        assert!(ModelParams { dipole: -1.0, ..p }.validate().is_err());
        assert!(ModelParams { j_max: 0, ..p }.validate().is_err());
        assert!(ModelParams { omega_c: f64::NAN, ..p }.validate().is_err());
    }
}
