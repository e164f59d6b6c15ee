//! Dense complex linear algebra for exact mixers and spectral analysis.
//!
//! The decompositions themselves come from nalgebra; this module pins the
//! conventions (ascending eigenvalues, principal branch of the logarithm)
//! and the tolerances the rest of the crate relies on.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::C64;

pub type CMatrix = DMatrix<C64>;

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Eigenphases within this distance of `±pi` are reported as branch-ambiguous.
pub const BRANCH_TOL: f64 = 1e-12;

const UNITARY_TOL: f64 = 1e-10;

/// A Hermitian matrix; symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Ok(Self(sym))
    }

    pub fn from_real(dim: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: row_major.len() });
        }
        Self::new(CMatrix::from_row_iterator(dim, dim, row_major.iter().map(|&x| C64::new(x, 0.0))))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// A unitary matrix; `U^dagger U` is within `1e-10` of the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let dim = m.nrows();
        let defect = spectral_norm(&(m.adjoint() * &m - CMatrix::identity(dim, dim)));
        if defect >= UNITARY_TOL {
            return Err(Error::InvalidParams(format!("matrix is not unitary (defect {defect:e})")));
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Eigenpairs with eigenvalues ascending; column `i` of `vectors` belongs to
/// `values[i]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    /// Index ranges of eigenvalue clusters separated by more than `gap`.
    pub fn clusters(&self, gap: f64) -> Vec<Range<usize>> {
        clusters(&self.values, gap)
    }
}

/// Splits sorted values into runs whose neighbours differ by at most `gap`.
pub fn clusters(sorted: &[f64], gap: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[i - 1] > gap {
            out.push(start..i);
            start = i;
        }
    }
    out
}

pub fn eigh(h: &HermitianMatrix) -> Result<Eigen> {
    let dim = h.dim();
    if dim == 0 {
        return Ok(Eigen { values: vec![], vectors: CMatrix::zeros(0, 0) });
    }
    if dim == 1 {
        return Ok(Eigen { values: vec![h.0[(0, 0)].re], vectors: CMatrix::identity(1, 1) });
    }
    let cap = 1000 * dim;
    let dec = SymmetricEigen::try_new(h.0.clone(), f64::EPSILON, cap).ok_or(Error::NoConvergence(cap))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[a].total_cmp(&dec.eigenvalues[b]));
    let values = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(dim, dim, |r, c| dec.eigenvectors[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

/// `V diag(f(lambda)) V^dagger` for a column-orthonormal `V`.
fn recompose(vectors: &CMatrix, diag: impl Iterator<Item = C64>) -> CMatrix {
    let mut scaled = vectors.clone();
    for (mut col, d) in scaled.column_iter_mut().zip(diag) {
        col *= d;
    }
    scaled * vectors.adjoint()
}

/// `exp(-i t H)`.
pub fn expm_i(h: &HermitianMatrix, t: f64) -> Result<UnitaryMatrix> {
    let eig = eigh(h)?;
    Ok(expm_i_from_eigen(&eig, t))
}

/// `exp(-i t H)` from a precomputed decomposition of `H`.
pub fn expm_i_from_eigen(eig: &Eigen, t: f64) -> UnitaryMatrix {
    let phases = eig.values.iter().map(|&l| {
        let (s, c) = (t * l).sin_cos();
        C64::new(c, -s)
    });
    UnitaryMatrix(recompose(&eig.vectors, phases))
}

/// Principal logarithm of a unitary, returned as `H = i log U`.
#[derive(Debug, Clone)]
pub struct UnitaryLog {
    pub hamiltonian: HermitianMatrix,
    /// Eigenphases of `H` in `(-pi, pi]`, in the order of `eigenvectors`.
    pub phases: Vec<f64>,
    pub eigenvectors: CMatrix,
    /// Set when some eigenphase lies within [`BRANCH_TOL`] of `±pi`, where
    /// the principal branch is ambiguous.
    pub near_branch_cut: bool,
}

impl UnitaryLog {
    pub fn branch_check(&self) -> Result<()> {
        match self.phases.iter().find(|p| PI - p.abs() < BRANCH_TOL) {
            Some(&phase) => Err(Error::BranchAmbiguity { phase, tol: BRANCH_TOL }),
            None => Ok(()),
        }
    }
}

/// `H = i log U` on the principal branch, so that `expm_i(H, 1) == U`.
///
/// The eigenvectors of `U` are found by joint diagonalization of two commuting
/// Hermitian parts, `K1 = Re(e^{i phi} U)` and `K2 = Im(e^{i phi} U)`, with
/// a fixed generic rotation `phi`: `K1` is diagonalized first, then `K2`
/// inside every cluster of nearly equal `K1` eigenvalues. The eigenphases
/// are Rayleigh quotients of `U` on the resulting vectors.
pub fn logm_unitary(u: &UnitaryMatrix) -> Result<UnitaryLog> {
    const ROTATION: f64 = 0.618_033_988_749_894_8;
    const CLUSTER_TOL: f64 = 1e-7;
    let dim = u.dim();
    let rot = C64::new(ROTATION.cos(), ROTATION.sin());
    let ru = &u.0 * rot;
    let ru_adj = ru.adjoint();
    let k1 = HermitianMatrix::new((&ru + &ru_adj) * C64::new(0.5, 0.0))?;
    let k2 = HermitianMatrix::new((&ru - &ru_adj) * C64::new(0.0, -0.5))?;

    let first = eigh(&k1)?;
    let mut vectors = CMatrix::zeros(dim, dim);
    for range in first.clusters(CLUSTER_TOL) {
        let block = first.vectors.columns(range.start, range.len()).into_owned();
        if range.len() == 1 {
            vectors.set_column(range.start, &block.column(0));
            continue;
        }
        let inner = HermitianMatrix::new(block.adjoint() * k2.matrix() * &block)?;
        let second = eigh(&inner)?;
        let rotated = &block * &second.vectors;
        for c in 0..range.len() {
            vectors.set_column(range.start + c, &rotated.column(c));
        }
    }

    let uv = &u.0 * &vectors;
    let phases: Vec<f64> = (0..dim)
        .map(|c| {
            let rayleigh = vectors.column(c).dotc(&uv.column(c));
            // eigenvalue exp(-i theta) => theta = -arg
            let theta = -rayleigh.arg();
            if theta <= -PI {
                theta + 2.0 * PI
            } else {
                theta
            }
        })
        .collect();
    let near_branch_cut = phases.iter().any(|p| PI - p.abs() < BRANCH_TOL);
    if near_branch_cut {
        log::warn!("unitary logarithm: eigenphase on the branch cut, principal value returned");
    }
    let h = recompose(&vectors, phases.iter().map(|&p| C64::new(p, 0.0)));
    Ok(UnitaryLog {
        hamiltonian: HermitianMatrix::new(h)?,
        phases,
        eigenvectors: vectors,
        near_branch_cut,
    })
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values_unordered().iter().fold(0.0, |m, &s| m.max(s))
}
