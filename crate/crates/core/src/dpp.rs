//! Projection determinantal measures `P^H(T) = det(P_H↾T)` on subsets of a
//! finite ground set: exact sampling, masses, marginals, conditioning,
//! brute-force enumeration and Nash-Williams type lower bounds.
//!
//! Two samplers are provided. [`sample`] is the index-order sampler on an
//! explicit orthonormal basis in `ℝ^m`. [`IncidenceKernel`] samples the
//! measures whose subspace lives inside the row space of an incidence matrix
//! using only `|V| × |V|` data, which is what makes graphs with hundreds of
//! thousands of right vertices tractable.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::incidence::SignedBipartiteIncidence;
use crate::spectral::Subspace;

/// Band outside `[0, 1]` that is attributed to roundoff.
pub const PROB_SLACK: f64 = 1e-8;
const REORTHO_EVERY: usize = 64;
const ENUMERATION_MAX: u128 = 1_000_000;
const FEASIBILITY_MIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub members: Vec<usize>,
    pub source_dim: usize,
}

/// Anything that draws exact samples of a projection determinantal measure.
pub trait DeterminantalSampler {
    /// Size of every sample.
    fn rank(&self) -> usize;
    fn ground_size(&self) -> usize;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SampleSet>;
}

fn clamp_prob(p: f64) -> Result<f64> {
    if !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Working copy of an orthonormal basis, rows of length `m`.
struct Basis {
    rows: Vec<Vec<f64>>,
}

impl Basis {
    fn new(h: &Subspace) -> Self {
        let b = h.basis();
        let rows = (0..b.nrows()).map(|i| b.row(i).iter().copied().collect()).collect();
        Self { rows }
    }

    fn weight(&self, u: usize) -> f64 {
        self.rows.iter().map(|v| v[u] * v[u]).sum()
    }

    /// Rotate the basis so that only row 0 is nonzero at `u`. Coordinates
    /// below `from` are assumed zero in every row and left untouched.
    fn rotate_onto(&mut self, u: usize, from: usize) {
        let c: Vec<f64> = self.rows.iter().map(|v| v[u]).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return;
        }
        let alpha = if c[0] > 0.0 { -norm } else { norm };
        let mut h = c;
        h[0] -= alpha;
        let hh: f64 = h.iter().map(|x| x * x).sum();
        if hh == 0.0 {
            return;
        }
        let m = self.rows[0].len();
        let mut s = vec![0.0; m - from];
        for (hj, v) in h.iter().zip(&self.rows) {
            if *hj != 0.0 {
                for (sx, vx) in s.iter_mut().zip(&v[from..]) {
                    *sx += hj * vx;
                }
            }
        }
        for (hi, v) in h.iter().zip(self.rows.iter_mut()) {
            let f = 2.0 * hi / hh;
            if f != 0.0 {
                for (vx, sx) in v[from..].iter_mut().zip(&s) {
                    *vx -= f * sx;
                }
            }
        }
        for v in self.rows.iter_mut().skip(1) {
            v[u] = 0.0;
        }
    }

    /// Condition on `u` being in (`include`) or out of the sample, given the
    /// current weight `p` at `u`.
    fn decide(&mut self, u: usize, from: usize, p: f64, include: bool) {
        if p == 0.0 {
            return;
        }
        self.rotate_onto(u, from);
        if include || 1.0 - p <= f64::MIN_POSITIVE {
            self.rows.swap_remove(0);
        } else {
            let v = &mut self.rows[0];
            v[u] = 0.0;
            let scale = 1.0 / (1.0 - p).sqrt();
            for x in &mut v[from..] {
                *x *= scale;
            }
        }
    }

    fn reorthonormalize(&mut self, from: usize) {
        let r = self.rows.len();
        for i in 0..r {
            let (done, rest) = self.rows.split_at_mut(i);
            let v = &mut rest[0];
            for w in done.iter() {
                let dot: f64 = v[from..].iter().zip(&w[from..]).map(|(a, b)| a * b).sum();
                for (a, b) in v[from..].iter_mut().zip(&w[from..]) {
                    *a -= dot * b;
                }
            }
            let norm = v[from..].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in &mut v[from..] {
                    *x /= norm;
                }
            }
        }
    }
}

/// Exact sample of `P^H` by visiting coordinates in index order.
pub fn sample<R: Rng + ?Sized>(h: &Subspace, rng: &mut R) -> Result<SampleSet> {
    let r = h.dim();
    let mut basis = Basis::new(h);
    let mut members = Vec::with_capacity(r);
    for u in 0..h.ambient() {
        if basis.rows.is_empty() {
            break;
        }
        let p = clamp_prob(basis.weight(u))?;
        let include = rng.random::<f64>() < p;
        basis.decide(u, u, p, include);
        if include {
            members.push(u);
        }
        if (u + 1) % REORTHO_EVERY == 0 {
            basis.reorthonormalize(u + 1);
        }
    }
    if members.len() != r {
        return Err(Error::Dpp(format!("sample has {} members, expected {r}", members.len())));
    }
    Ok(SampleSet { members, source_dim: r })
}

impl DeterminantalSampler for Subspace {
    fn rank(&self) -> usize {
        self.dim()
    }

    fn ground_size(&self) -> usize {
        self.ambient()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SampleSet> {
        sample(self, rng)
    }
}

fn columns(h: &Subspace, t: &[usize]) -> Result<DMatrix<f64>> {
    let b = h.basis();
    if let Some(&bad) = t.iter().find(|&&u| u >= b.ncols()) {
        return Err(Error::Dpp(format!("index {bad} outside ground set of size {}", b.ncols())));
    }
    Ok(DMatrix::from_fn(b.nrows(), t.len(), |i, j| b[(i, t[j])]))
}

/// `P^H(T) = det(P_H↾T) = det(Y_T)²`.
pub fn mass(h: &Subspace, t: &[usize]) -> Result<f64> {
    if t.len() != h.dim() {
        return Err(Error::Dpp(format!(
            "set of size {} but subspace has dim {}",
            t.len(),
            h.dim()
        )));
    }
    if t.is_empty() {
        return Ok(1.0);
    }
    let y = columns(h, t)?;
    Ok(y.lu().determinant().powi(2))
}

/// `P(e ⊆ T) = det(P_H↾e)`.
pub fn marginal(h: &Subspace, e: &[usize]) -> Result<f64> {
    if e.is_empty() {
        return Ok(1.0);
    }
    let y = columns(h, e)?;
    let gram = y.transpose() * y;
    Ok(gram.lu().determinant())
}

/// The subspace of the measure conditioned on `include ⊆ T` and
/// `exclude ∩ T = ∅`.
pub fn condition(h: &Subspace, include: &[usize], exclude: &[usize]) -> Result<Subspace> {
    let m = h.ambient();
    if let Some(&bad) = include.iter().chain(exclude).find(|&&u| u >= m) {
        return Err(Error::Dpp(format!("index {bad} outside ground set of size {m}")));
    }
    if include.iter().any(|a| exclude.contains(a)) {
        return Err(Error::Dpp("include and exclude sets intersect".into()));
    }
    let mut basis = Basis::new(h);
    let mut prob = 1.0;
    for (&u, inc) in include.iter().map(|u| (u, true)).chain(exclude.iter().map(|u| (u, false))) {
        let p = clamp_prob(basis.weight(u))?;
        prob *= if inc { p } else { 1.0 - p };
        if prob <= FEASIBILITY_MIN {
            return Err(Error::InfeasibleConditioning(prob));
        }
        basis.decide(u, 0, p, inc);
    }
    basis.reorthonormalize(0);
    let mut mat = DMatrix::zeros(basis.rows.len() + include.len(), m);
    for (i, v) in basis.rows.iter().enumerate() {
        mat.row_mut(i).copy_from_slice(v);
    }
    for (i, &a) in include.iter().enumerate() {
        mat[(basis.rows.len() + i, a)] = 1.0;
    }
    Subspace::from_orthonormal_rows(mat)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return c;
        }
    }
    c
}

/// Every `dim`-subset with mass above `1e-12`, by brute force.
pub fn enumerate_all(h: &Subspace) -> Result<Vec<(SampleSet, f64)>> {
    let (m, r) = (h.ambient(), h.dim());
    let count = binomial(m, r);
    if count > ENUMERATION_MAX {
        return Err(Error::EnumerationGuard(count));
    }
    let mut out = Vec::new();
    for t in (0..m).combinations(r) {
        let w = mass(h, &t)?;
        if w > 1e-12 {
            out.push((SampleSet { members: t, source_dim: r }, w));
        }
    }
    Ok(out)
}

fn check_xis(h: &Subspace, u: usize, xis: &[DVector<f64>]) -> Result<()> {
    if xis.is_empty() {
        return Err(Error::Dpp("no vectors given".into()));
    }
    for (i, xi) in xis.iter().enumerate() {
        if xi.len() != h.ambient() || u >= xi.len() {
            return Err(Error::Dpp(format!("vector {i} has the wrong length")));
        }
        let off = (xi - h.project(xi)).amax();
        if off > 1e-8 {
            return Err(Error::Dpp(format!(
                "vector {i} is not in the subspace (off by {off:.3e})"
            )));
        }
        if (xi[u].abs() - 1.0).abs() > 1e-8 {
            return Err(Error::Dpp(format!("vector {i} has |xi(u)| = {} != 1", xi[u].abs())));
        }
    }
    Ok(())
}

fn signed_gram(u: usize, xis: &[DVector<f64>]) -> DMatrix<f64> {
    let signs: Vec<f64> = xis.iter().map(|x| x[u].signum()).collect();
    DMatrix::from_fn(xis.len(), xis.len(), |i, j| signs[i] * signs[j] * xis[i].dot(&xis[j]))
}

/// `Σ_{ij} (M⁻¹)_{ij}` for the Gram matrix `M` of the `ξ_i`, each flipped so
/// that `ξ_i(u) = 1`. A lower bound on `P(u ∈ T)`.
pub fn nw_lower_bound(h: &Subspace, u: usize, xis: &[DVector<f64>]) -> Result<f64> {
    check_xis(h, u, xis)?;
    let gram = signed_gram(u, xis);
    let sv = gram.clone().svd(false, false).singular_values;
    let (hi, lo) = (sv.max(), sv.min());
    if !(lo > 0.0) || hi / lo > 1e10 {
        return Err(Error::Dpp("Gram matrix is singular".into()));
    }
    let ones = DVector::from_element(xis.len(), 1.0);
    let sol = gram.lu().solve(&ones).ok_or_else(|| Error::Dpp("Gram matrix is singular".into()))?;
    Ok(ones.dot(&sol))
}

/// `(1 - γk/(1-γk)) Σ 1/‖ξ_i‖²` for an almost orthogonal family.
pub fn nw_corollary_bound(h: &Subspace, u: usize, xis: &[DVector<f64>], gamma: f64) -> Result<f64> {
    check_xis(h, u, xis)?;
    let k = xis.len() as f64;
    if !(gamma > 0.0 && gamma * k < 1.0) {
        return Err(Error::Dpp(format!("gamma = {gamma} outside (0, 1/{k})")));
    }
    let norms: Vec<f64> = xis.iter().map(|x| x.norm_squared()).collect();
    for i in 0..xis.len() {
        for j in i + 1..xis.len() {
            if xis[i].dot(&xis[j]).abs() > gamma * norms[i].min(norms[j]) + 1e-12 {
                return Err(Error::Dpp(format!("vectors {i} and {j} are not gamma-orthogonal")));
            }
        }
    }
    Ok((1.0 - gamma * k / (1.0 - gamma * k)) * norms.iter().map(|x| 1.0 / x).sum::<f64>())
}

/// A projection determinantal measure on the right vertices `U` whose
/// subspace lies in the row space of `B`, represented by an `n × n` matrix
/// `G` with kernel `K(u, w) = b_uᵀ G b_w` (`b_u` the column of `B` at `u`).
///
/// Sampling uses the chain rule with rejection: a candidate is proposed with
/// probability proportional to its initial diagonal `K(u, u)` and accepted
/// with probability `K_t(u, u) / K(u, u)`, where `K_t` is the kernel after
/// conditioning on the points accepted so far.
#[derive(Clone, Debug)]
pub struct IncidenceKernel {
    cols: Vec<Vec<(usize, f64)>>,
    gram: DMatrix<f64>,
    rank: usize,
    diag: Vec<f64>,
    cumulative: Vec<f64>,
}

impl IncidenceKernel {
    pub fn new(g: &SignedBipartiteIncidence, gram: DMatrix<f64>, rank: usize) -> Self {
        let cols: Vec<Vec<(usize, f64)>> =
            (0..g.m()).map(|u| g.column(u).iter().map(|&(v, s)| (v, s as f64)).collect()).collect();
        let diag: Vec<f64> = cols.iter().map(|c| quad(&gram, c, c).max(0.0)).collect();
        let cumulative = diag
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        Self { cols, gram, rank, diag, cumulative }
    }

    /// `K(u, w)`.
    pub fn entry(&self, u: usize, w: usize) -> f64 {
        quad(&self.gram, &self.cols[u], &self.cols[w])
    }

    /// `P(u ∈ T) = K(u, u)`.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `det(K↾e)`.
    pub fn marginal(&self, e: &[usize]) -> f64 {
        let k = DMatrix::from_fn(e.len(), e.len(), |i, j| self.entry(e[i], e[j]));
        if e.is_empty() {
            1.0
        } else {
            k.lu().determinant()
        }
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let x = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.cols.len() - 1)
    }
}

fn quad(gram: &DMatrix<f64>, a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let mut s = 0.0;
    for &(x, sx) in a {
        for &(y, sy) in b {
            s += sx * sy * gram[(x, y)];
        }
    }
    s
}

impl DeterminantalSampler for IncidenceKernel {
    fn rank(&self) -> usize {
        self.rank
    }

    fn ground_size(&self) -> usize {
        self.cols.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SampleSet> {
        let n = self.gram.nrows();
        let r = self.rank;
        let max_tries = 1000 * self.cols.len().max(1) + 1_000_000;
        // h[v * r + j] is coordinate v of the j-th conditioning vector
        let mut h = vec![0.0; n * r];
        let mut coef = vec![0.0; r];
        let mut g = vec![0.0; n];
        let mut members = Vec::with_capacity(r);
        for t in 0..r {
            let mut tries = 0usize;
            let u = loop {
                tries += 1;
                if tries > max_tries {
                    return Err(Error::Dpp(format!("rejection sampler stalled at step {t}")));
                }
                let u = self.propose(rng);
                let k0 = self.diag[u];
                if k0 <= 0.0 || members.contains(&u) {
                    continue;
                }
                coef[..t].fill(0.0);
                for &(v, s) in &self.cols[u] {
                    let row = &h[v * r..v * r + t];
                    for (c, x) in coef[..t].iter_mut().zip(row) {
                        *c += s * x;
                    }
                }
                let kt = k0 - coef[..t].iter().map(|c| c * c).sum::<f64>();
                let ratio = clamp_prob(kt / k0)?;
                if rng.random::<f64>() < ratio {
                    break u;
                }
            };
            g.fill(0.0);
            for &(v, s) in &self.cols[u] {
                for (gw, x) in g.iter_mut().zip(self.gram.column(v).iter()) {
                    *gw += s * x;
                }
            }
            for (w, gw) in g.iter_mut().enumerate() {
                let row = &h[w * r..w * r + t];
                *gw -= row.iter().zip(&coef[..t]).map(|(a, b)| a * b).sum::<f64>();
            }
            let c: f64 = self.cols[u].iter().map(|&(v, s)| s * g[v]).sum();
            if !(c > 1e-12) {
                return Err(Error::Dpp(format!("degenerate pivot {c:.3e} at step {t}")));
            }
            let scale = 1.0 / c.sqrt();
            for (w, gw) in g.iter().enumerate() {
                h[w * r + t] = gw * scale;
            }
            members.push(u);
        }
        members.sort_unstable();
        Ok(SampleSet { members, source_dim: r })
    }
}
