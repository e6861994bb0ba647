//! Spectra of the two Laplacians `L⁻ = BᵀB/d` (on `ℝ^U`) and `L⁺ = BBᵀ/d`
//! (on `ℝ^V`), the projection onto the row space `H` of `B`, the near-one
//! eigenspace `H_I`, and `(ε, δ)`-structured right vertices.
//!
//! Both operators share their positive eigenvalues. [`decompose`] works on
//! `L⁻` directly and is limited to a few thousand right vertices;
//! [`decompose_dual`] diagonalises the `|V| × |V|` operator `L⁺` instead and
//! recovers everything needed on the `U` side through `ψ = Bᵀφ / √(dμ)`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dpp::IncidenceKernel;
use crate::error::{Error, Result};
use crate::incidence::SignedBipartiteIncidence;

/// Relative threshold under which an eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct SpectralConfig {
    /// Largest operator dimension [`decompose_with`] accepts.
    pub max_dim: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { max_dim: 5000 }
    }
}

/// Default `(ε, δ) = (d^{-1/2}, d^{-5/4})`.
pub fn default_eps_delta(d: usize) -> (f64, f64) {
    let d = d as f64;
    (d.powf(-0.5), d.powf(-1.25))
}

/// An orthonormal basis (stored as rows) of a subspace of `ℝ^m`.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wrap rows that are already orthonormal (checked to `1e-9`).
    pub fn from_orthonormal_rows(basis: DMatrix<f64>) -> Result<Self> {
        let gram = &basis * basis.transpose();
        let err = (gram - DMatrix::identity(basis.nrows(), basis.nrows())).amax();
        if err > 1e-9 {
            return Err(Error::Dpp(format!("basis rows are not orthonormal (error {err:.3e})")));
        }
        Ok(Self { basis })
    }

    /// Orthonormal basis of the span of arbitrary rows.
    pub fn span_of_rows(rows: &DMatrix<f64>) -> Self {
        let m = rows.ncols();
        if rows.nrows() == 0 {
            return Self { basis: DMatrix::zeros(0, m) };
        }
        let gram = rows.transpose() * rows;
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.amax();
        let keep: Vec<usize> =
            (0..m).filter(|&i| top > 0.0 && eig.eigenvalues[i] > RANK_TOL * top).collect();
        let mut basis = DMatrix::zeros(keep.len(), m);
        for (r, &i) in keep.iter().enumerate() {
            basis.row_mut(r).copy_from(&eig.eigenvectors.column(i).transpose());
        }
        Self { basis }
    }

    /// The whole ambient space `ℝ^m`.
    pub fn full(m: usize) -> Self {
        Self { basis: DMatrix::identity(m, m) }
    }

    /// Span of the coordinate vectors `e_i`, `i ∈ coords`.
    pub fn coordinate(m: usize, coords: &[usize]) -> Self {
        let mut basis = DMatrix::zeros(coords.len(), m);
        for (r, &c) in coords.iter().enumerate() {
            basis[(r, c)] = 1.0;
        }
        Self { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn ambient(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `P_H = basisᵀ · basis`.
    pub fn projection(&self) -> DMatrix<f64> {
        self.basis.transpose() * &self.basis
    }

    /// Orthogonal projection of `x` onto the subspace.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * (&self.basis * x)
    }
}

/// Eigenpairs of `L⁻`, sorted by decreasing eigenvalue.
#[derive(Clone, Debug)]
pub struct SpectralData {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    rank: usize,
    rank_tol: f64,
    d: usize,
    k: usize,
}

impl SpectralData {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `i` is `ψ_i`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn subspace_of(&self, idx: impl Iterator<Item = usize>) -> Subspace {
        let idx: Vec<usize> = idx.collect();
        let m = self.eigenvectors.nrows();
        let mut basis = DMatrix::zeros(idx.len(), m);
        for (r, &i) in idx.iter().enumerate() {
            basis.row_mut(r).copy_from(&self.eigenvectors.column(i).transpose());
        }
        Subspace { basis }
    }
}

fn sorted_eigen(mat: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = mat.nrows();
    let eig = SymmetricEigen::try_new(mat, f64::EPSILON, 0)
        .ok_or(Error::Decomposition { residual: f64::NAN })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (c, &i) in order.iter().enumerate() {
        vectors.column_mut(c).copy_from(&eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

fn check_residuals(op: &DMatrix<f64>, values: &[f64], vectors: &DMatrix<f64>) -> Result<()> {
    let applied = op * vectors;
    let mut worst = 0.0f64;
    for (i, &lambda) in values.iter().enumerate() {
        let r = (applied.column(i) - vectors.column(i) * lambda).norm();
        worst = worst.max(r / lambda.abs().max(1.0));
    }
    if !(worst <= 1e-8) {
        return Err(Error::Decomposition { residual: worst });
    }
    Ok(())
}

fn rank_of(values: &[f64]) -> (usize, f64) {
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let tol = RANK_TOL * top;
    (values.iter().filter(|&&l| l > tol).count(), tol)
}

/// Dense `L⁻ = BᵀB/d`.
pub fn lower_laplacian(g: &SignedBipartiteIncidence) -> DMatrix<f64> {
    let b = g.signed_matrix();
    (b.transpose() * b) / g.d() as f64
}

/// Dense `L⁺ = BBᵀ/d`.
pub fn upper_laplacian(g: &SignedBipartiteIncidence) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for u in 0..g.m() {
        let col = g.column(u);
        for &(a, sa) in col {
            for &(b, sb) in col {
                l[(a, b)] += (sa * sb) as f64;
            }
        }
    }
    l / g.d() as f64
}

pub fn decompose(g: &SignedBipartiteIncidence) -> Result<SpectralData> {
    decompose_with(g, &SpectralConfig::default())
}

/// Full eigendecomposition of `L⁻`.
pub fn decompose_with(g: &SignedBipartiteIncidence, cfg: &SpectralConfig) -> Result<SpectralData> {
    if g.m() > cfg.max_dim {
        return Err(Error::TooLarge { dim: g.m(), max: cfg.max_dim });
    }
    let op = lower_laplacian(g);
    let (values, vectors) = sorted_eigen(op.clone())?;
    check_residuals(&op, &values, &vectors)?;
    let (rank, rank_tol) = rank_of(&values);
    Ok(SpectralData {
        eigenvalues: values,
        eigenvectors: vectors,
        rank,
        rank_tol,
        d: g.d(),
        k: g.k(),
    })
}

/// `H` as a [`Subspace`]: the span of the top-`r` eigenvectors.
pub fn projection_subspace(s: &SpectralData) -> Subspace {
    s.subspace_of(0..s.rank)
}

/// `H_I`: eigenvectors with `(λ - 1)² ≤ eps` among the top `r`.
pub fn near_one_subspace(s: &SpectralData, eps: f64) -> Subspace {
    s.subspace_of((0..s.rank).filter(|&i| (s.eigenvalues[i] - 1.0).powi(2) <= eps))
}

/// Right vertices `u` with `Σ_{i ≤ r, (λ_i-1)² > eps} ψ_i(u)² > delta`.
pub fn structured_vertices(s: &SpectralData, eps: f64, delta: f64) -> Vec<usize> {
    let far: Vec<usize> = (0..s.rank).filter(|&i| (s.eigenvalues[i] - 1.0).powi(2) > eps).collect();
    let m = s.eigenvectors.nrows();
    (0..m)
        .filter(|&u| far.iter().map(|&i| s.eigenvectors[(u, i)].powi(2)).sum::<f64>() > delta)
        .collect()
}

/// `|Tr((L⁺ - I)²) - kn/d|`, evaluated from the sparse entries of `BBᵀ/d`.
pub fn trace_identity_gap(g: &SignedBipartiteIncidence) -> f64 {
    let d = g.d() as f64;
    let mut off: HashMap<(usize, usize), f64> = HashMap::new();
    for u in 0..g.m() {
        let col = g.column(u);
        for (i, &(a, sa)) in col.iter().enumerate() {
            for &(b, sb) in &col[i + 1..] {
                let key = if a < b { (a, b) } else { (b, a) };
                *off.entry(key).or_insert(0.0) += (sa * sb) as f64;
            }
        }
    }
    let diag: f64 = (0..g.n()).map(|v| (g.v_neighbors(v).len() as f64 / d - 1.0).powi(2)).sum();
    let offdiag: f64 = off.values().map(|x| 2.0 * (x / d).powi(2)).sum();
    let target = g.k() as f64 * g.n() as f64 / d;
    (diag + offdiag - target).abs()
}

/// Eigenpairs of `L⁺`, sorted by decreasing eigenvalue.
#[derive(Clone, Debug)]
pub struct VertexSpectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    rank: usize,
    d: usize,
}

/// Eigendecomposition of the `|V| × |V|` operator `L⁺`; usable when `|U|` is
/// far beyond what [`decompose`] can hold.
pub fn decompose_dual(g: &SignedBipartiteIncidence) -> Result<VertexSpectrum> {
    decompose_dual_with(g, &SpectralConfig::default())
}

pub fn decompose_dual_with(
    g: &SignedBipartiteIncidence,
    cfg: &SpectralConfig,
) -> Result<VertexSpectrum> {
    if g.n() > cfg.max_dim {
        return Err(Error::TooLarge { dim: g.n(), max: cfg.max_dim });
    }
    let op = upper_laplacian(g);
    let (values, vectors) = sorted_eigen(op.clone())?;
    check_residuals(&op, &values, &vectors)?;
    let (rank, _) = rank_of(&values);
    Ok(VertexSpectrum { eigenvalues: values, eigenvectors: vectors, rank, d: g.d() })
}

impl VertexSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `Σ_{i ∈ idx} φ_i φ_iᵀ / (d μ_i)`, the `V`-side form of the projection
    /// onto `span{ψ_i : i ∈ idx}`.
    fn weighted_gram(&self, idx: &[usize]) -> DMatrix<f64> {
        let n = self.eigenvectors.nrows();
        let mut scaled = DMatrix::zeros(n, idx.len());
        for (c, &i) in idx.iter().enumerate() {
            let w = 1.0 / (self.d as f64 * self.eigenvalues[i]).sqrt();
            scaled.column_mut(c).copy_from(&(self.eigenvectors.column(i) * w));
        }
        &scaled * scaled.transpose()
    }

    fn near_one(&self, eps: f64) -> Vec<usize> {
        (0..self.rank).filter(|&i| (self.eigenvalues[i] - 1.0).powi(2) <= eps).collect()
    }

    /// Kernel of the determinantal measure on the row space `H`.
    pub fn kernel(&self, g: &SignedBipartiteIncidence) -> IncidenceKernel {
        let idx: Vec<usize> = (0..self.rank).collect();
        IncidenceKernel::new(g, self.weighted_gram(&idx), self.rank)
    }

    /// Kernel of the determinantal measure on `H_I`.
    pub fn near_one_kernel(&self, g: &SignedBipartiteIncidence, eps: f64) -> IncidenceKernel {
        let idx = self.near_one(eps);
        let r = idx.len();
        IncidenceKernel::new(g, self.weighted_gram(&idx), r)
    }

    /// Same set as [`structured_vertices`], computed from `L⁺`.
    pub fn structured_vertices(
        &self,
        g: &SignedBipartiteIncidence,
        eps: f64,
        delta: f64,
    ) -> Vec<usize> {
        let far: Vec<usize> =
            (0..self.rank).filter(|&i| (self.eigenvalues[i] - 1.0).powi(2) > eps).collect();
        if far.is_empty() {
            return Vec::new();
        }
        let gram = self.weighted_gram(&far);
        (0..g.m())
            .filter(|&u| {
                let col = g.column(u);
                let mut s = 0.0;
                for &(a, sa) in col {
                    for &(b, sb) in col {
                        s += (sa * sb) as f64 * gram[(a, b)];
                    }
                }
                s > delta
            })
            .collect()
    }
}
