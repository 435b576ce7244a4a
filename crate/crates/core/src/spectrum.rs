//! Polariton spectra: the closed-form Jaynes–Cummings doublets and the exact
//! eigenstates of the full H₀.
//!
//! Sign convention. The JC matrix carries +g on its off-diagonal, while the
//! full H₀ (dipole coupling −√3 g cosθ (a + a†)) carries −g. The two are
//! related by photon parity P = (−1)^{a†a}, which commutes with cosθ and maps
//! |00⟩|0⟩ to itself. Closed-form vectors are reported in the JC convention;
//! [`DressedFrame`] maps them (or labels the exact eigenvectors) in the H₀
//! convention so that the transition moments keep the signs μ̃_± = ±μ₀₁/√2.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::model::{build_h0, cos_theta_element, cos_theta_matrix, CompositeBasis, ModelParams, OperatorMatrix};

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Which member of a polariton doublet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        }
    }
}

/// One JC doublet |±;n⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Doublet {
    pub n: usize,
    pub omega_minus: f64,
    pub omega_plus: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DressedSpectrum {
    pub omega_ground: f64,
    /// Doublets n = 0, 1, …, n_max − 1.
    pub doublets: Vec<Doublet>,
    /// Basis the eigenvectors live in (J ≤ 1).
    pub basis: CompositeBasis,
    /// M_{±,0} = ⟨0;0|cosθ|±;0⟩
    pub m_minus: f64,
    pub m_plus: f64,
    /// μ̃_{±,0} = ⟨±;0|μ cosθ|0;0⟩
    pub mu_tilde_minus: f64,
    pub mu_tilde_plus: f64,
    pub coupling: f64,
}

impl DressedSpectrum {
    pub fn omega(&self, branch: Branch, n: usize) -> f64 {
        let d = &self.doublets[n];
        match branch {
            Branch::Minus => d.omega_minus,
            Branch::Plus => d.omega_plus,
        }
    }

    /// |±;n⟩ = (|00⟩|n+1⟩ ± |10⟩|n⟩)/√2 over [`DressedSpectrum::basis`].
    pub fn eigenvector(&self, branch: Branch, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.basis.dim()];
        v[self.basis.index(0, n + 1).unwrap()] = FRAC_1_SQRT_2;
        v[self.basis.index(1, n).unwrap()] = branch.sign() * FRAC_1_SQRT_2;
        v
    }

    pub fn ground_vector(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.basis.dim()];
        v[self.basis.index(0, 0).unwrap()] = 1.0;
        v
    }
}

/// The resonant JC Hamiltonian ω₀₁|10⟩⟨10| + ω_c a†a + g(a|10⟩⟨00| + h.c.)
/// with ω₀₁ = ω_c, over J ≤ 1 and n ≤ n_max.
pub fn jc_matrix(params: &ModelParams) -> OperatorMatrix {
    let basis = CompositeBasis::new(1, params.n_max).unwrap();
    let dim = basis.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for (i, (j, n)) in basis.labels().enumerate() {
        m[(i, i)] = params.omega_c * (n as f64 + j as f64);
    }
    for n in 0..params.n_max {
        let a = basis.index(1, n).unwrap();
        let b = basis.index(0, n + 1).unwrap();
        let v = params.coupling * ((n + 1) as f64).sqrt();
        m[(a, b)] = v;
        m[(b, a)] = v;
    }
    OperatorMatrix { matrix: m, hermitian: true }
}

/// Closed-form JC polaritons: ω_{0,0} = 0, ω_{±,n} = ω_c(n+1) ± g√(n+1).
pub fn jc_dressed_spectrum(params: &ModelParams) -> Result<DressedSpectrum> {
    if params.n_max < 1 {
        return Err(invalid("n_max", "the n = 0 doublet needs n_max >= 1"));
    }
    let doublets = (0..params.n_max)
        .map(|n| {
            let k = (n + 1) as f64;
            Doublet {
                n,
                omega_minus: params.omega_c * k - params.coupling * k.sqrt(),
                omega_plus: params.omega_c * k + params.coupling * k.sqrt(),
            }
        })
        .collect();
    let m = FRAC_1_SQRT_2 * cos_theta_element(0);
    let mu = FRAC_1_SQRT_2 * params.mu01();
    Ok(DressedSpectrum {
        omega_ground: 0.0,
        doublets,
        basis: CompositeBasis::new(1, params.n_max)?,
        m_minus: -m,
        m_plus: m,
        mu_tilde_minus: -mu,
        mu_tilde_plus: mu,
        coupling: params.coupling,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumCheck {
    /// max |numeric − closed form| over all closed-form eigenvalues (a.u.).
    pub max_eigenvalue_deviation: f64,
    /// max ‖Hv − ωv‖ over the closed-form eigenvectors (a.u.).
    pub max_residual: f64,
}

/// Diagonalises the JC matrix numerically and compares with the closed form.
pub fn verify_spectrum_numerically(params: &ModelParams) -> Result<SpectrumCheck> {
    let spectrum = jc_dressed_spectrum(params)?;
    let h = jc_matrix(params);
    let eig = h.matrix.clone().symmetric_eigen();
    let numeric: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let nearest = |w: f64| numeric.iter().map(|e| (e - w).abs()).fold(f64::INFINITY, f64::min);

    let mut dev = nearest(spectrum.omega_ground);
    let mut residual = residual_norm(&h, &spectrum.ground_vector(), spectrum.omega_ground);
    for d in &spectrum.doublets {
        for b in [Branch::Minus, Branch::Plus] {
            let w = spectrum.omega(b, d.n);
            dev = dev.max(nearest(w));
            residual = residual.max(residual_norm(&h, &spectrum.eigenvector(b, d.n), w));
        }
    }
    Ok(SpectrumCheck { max_eigenvalue_deviation: dev, max_residual: residual })
}

fn residual_norm(h: &OperatorMatrix, v: &[f64], w: f64) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut hv = 0.0;
        for (j, vj) in v.iter().enumerate() {
            hv += h.matrix[(i, j)] * vj;
        }
        acc += (hv - w * v[i]).powi(2);
    }
    acc.sqrt()
}

/// Orthonormal eigen-decomposition of the full H₀, energies ascending.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub energies: Vec<f64>,
    /// Column k is the k-th eigenvector over the composite basis.
    pub vectors: DMatrix<f64>,
}

impl Eigensystem {
    pub fn of(h: &OperatorMatrix) -> Self {
        let eig = h.matrix.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let dim = order.len();
        let mut vectors = DMatrix::zeros(dim, dim);
        let mut energies = Vec::with_capacity(dim);
        for (k, &src) in order.iter().enumerate() {
            energies.push(eig.eigenvalues[src]);
            let mut col = eig.eigenvectors.column(src).into_owned();
            // deterministic sign: largest component positive
            let imax = col.iamax();
            if col[imax] < 0.0 {
                col = -col;
            }
            vectors.set_column(k, &col);
        }
        Eigensystem { energies, vectors }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Vᵀ A V
    pub fn transform(&self, op: &OperatorMatrix) -> DMatrix<f64> {
        self.vectors.transpose() * &op.matrix * &self.vectors
    }

    pub fn flip_sign(&mut self, k: usize) {
        let col = -self.vectors.column(k).into_owned();
        self.vectors.set_column(k, &col);
    }
}

/// The three states |0;0⟩, |−;0⟩, |+;0⟩ expressed in some frame of the full
/// model, with their energies and the moments linking them.
#[derive(Clone, Debug, PartialEq)]
pub struct DressedFrame {
    /// Ground, minus, plus, as real vectors over the composite basis.
    pub vectors: [Vec<f64>; 3],
    pub energies: [f64; 3],
}

impl DressedFrame {
    /// Closed-form JC states, mapped into the H₀ sign convention and embedded
    /// in `basis`.
    pub fn closed_form(spectrum: &DressedSpectrum, basis: &CompositeBasis) -> Self {
        let embed = |v: Vec<f64>| {
            let mut out = vec![0.0; basis.dim()];
            for (i, (j, n)) in spectrum.basis.labels().enumerate() {
                if let Some(k) = basis.index(j, n) {
                    let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
                    out[k] = parity * v[i];
                }
            }
            out
        };
        DressedFrame {
            vectors: [
                embed(spectrum.ground_vector()),
                embed(spectrum.eigenvector(Branch::Minus, 0)),
                embed(spectrum.eigenvector(Branch::Plus, 0)),
            ],
            energies: [spectrum.omega_ground, spectrum.omega(Branch::Minus, 0), spectrum.omega(Branch::Plus, 0)],
        }
    }
}

/// Exact eigenstates of H₀ that continue the JC states |0;0⟩, |±;0⟩.
#[derive(Clone, Debug)]
pub struct ExactDressed {
    pub eigensystem: Eigensystem,
    /// Eigensystem indices of |0;0⟩, |−;0⟩, |+;0⟩.
    pub indices: [usize; 3],
    /// |⟨closed form|exact⟩| for each of the three.
    pub overlaps: [f64; 3],
}

impl ExactDressed {
    /// Diagonalises H₀ and labels the states by maximal overlap with the
    /// closed-form polaritons, fixing each sign so that overlap is positive.
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let basis = params.basis();
        if basis.n_max() < 1 {
            return Err(invalid("n_max", "the n = 0 doublet needs n_max >= 1"));
        }
        let mut eigensystem = Eigensystem::of(&build_h0(params, &basis));
        let reference = DressedFrame::closed_form(&jc_dressed_spectrum(params)?, &basis);
        let mut indices = [0; 3];
        let mut overlaps = [0.0; 3];
        for (slot, target) in reference.vectors.iter().enumerate() {
            let (k, ov) = (0..eigensystem.dim())
                .map(|k| {
                    let col = eigensystem.vectors.column(k);
                    (k, target.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>())
                })
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .unwrap();
            if ov < 0.0 {
                eigensystem.flip_sign(k);
            }
            indices[slot] = k;
            overlaps[slot] = ov.abs();
        }
        Ok(ExactDressed { eigensystem, indices, overlaps })
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigensystem.energies[self.indices[0]]
    }

    /// E_{±} − E_0 of the exact states: the frequencies a resonant pulse must carry.
    pub fn transition_frequencies(&self) -> (f64, f64) {
        let e = &self.eigensystem.energies;
        let g = e[self.indices[0]];
        (e[self.indices[1]] - g, e[self.indices[2]] - g)
    }

    fn element(&self, op: &OperatorMatrix, a: usize, b: usize) -> f64 {
        let va = self.eigensystem.vectors.column(self.indices[a]);
        let vb = self.eigensystem.vectors.column(self.indices[b]);
        (va.transpose() * &op.matrix * vb)[(0, 0)]
    }

    /// (M_{−,0}, M_{+,0}) = ⟨0;0|cosθ|±;0⟩ of the exact states.
    pub fn orientation_moments(&self, basis: &CompositeBasis) -> (f64, f64) {
        let cos = cos_theta_matrix(basis);
        (self.element(&cos, 0, 1), self.element(&cos, 0, 2))
    }

    /// (μ̃_{−,0}, μ̃_{+,0}) = μ·⟨±;0|cosθ|0;0⟩ of the exact states.
    pub fn transition_moments(&self, params: &ModelParams) -> (f64, f64) {
        let (m_minus, m_plus) = self.orientation_moments(&params.basis());
        (params.dipole * m_minus, params.dipole * m_plus)
    }

    pub fn frame(&self) -> DressedFrame {
        let col = |slot: usize| self.eigensystem.vectors.column(self.indices[slot]).iter().copied().collect();
        let e = &self.eigensystem.energies;
        DressedFrame {
            vectors: [col(0), col(1), col(2)],
            energies: [e[self.indices[0]], e[self.indices[1]], e[self.indices[2]]],
        }
    }
}
