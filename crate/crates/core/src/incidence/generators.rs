use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;

use super::field::{gaussian_binomial, FiniteField};
use super::{Edge, Family, SignedBipartiteIncidence};
use crate::error::{Error, Result};

const MAX_RIGHT_SIZE: u64 = 2_000_000;

fn params(pairs: &[(&str, usize)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v as u64)).collect()
}

fn subset_label(s: &[usize]) -> String {
    format!("{{{}}}", s.iter().map(|x| (x + 1).to_string()).join(","))
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

fn guard(m: u64) -> Result<()> {
    if m > MAX_RIGHT_SIZE {
        return Err(Error::Incidence(format!("|U|={m} exceeds the size guard {MAX_RIGHT_SIZE}")));
    }
    Ok(())
}

/// Simplicial boundary between `faces` (size `s`) and `cofaces` (size `s+1`):
/// the face missing position `i` of a coface gets sign `(-1)^i`, or `+1`
/// everywhere when `signed` is false.
fn simplicial_incidence(
    family: Family,
    params: BTreeMap<String, u64>,
    faces: Vec<Vec<usize>>,
    cofaces: Vec<Vec<usize>>,
    signed: bool,
) -> Result<SignedBipartiteIncidence> {
    let index: HashMap<&[usize], usize> =
        faces.iter().enumerate().map(|(i, f)| (f.as_slice(), i)).collect();
    let mut edges = Vec::with_capacity(cofaces.len() * cofaces.first().map_or(0, Vec::len));
    for (u, tau) in cofaces.iter().enumerate() {
        for i in 0..tau.len() {
            let sigma: Vec<usize> =
                tau.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
            let v = index[sigma.as_slice()];
            let sign = if signed && i % 2 == 1 { -1 } else { 1 };
            edges.push(Edge { v, u, sign });
        }
    }
    edges.sort_by_key(|e| (e.u, e.v));
    let v_labels = faces.iter().map(|f| subset_label(f)).collect();
    let u_labels = cofaces.iter().map(|f| subset_label(f)).collect();
    SignedBipartiteIncidence::from_parts(family, params, v_labels, u_labels, edges)
}

/// Vertex/edge incidence of `K_n` with the oriented-incidence signs: every
/// edge `{a, b}`, `a < b`, is oriented `a → b`, so `a` gets `-1` and `b`
/// gets `+1`.
pub fn build_complete_graph_ust(n_vertices: usize) -> Result<SignedBipartiteIncidence> {
    if n_vertices < 3 {
        return Err(Error::Incidence(format!("complete graph needs n ≥ 3, got {n_vertices}")));
    }
    guard(binomial(n_vertices, 2))?;
    let mut edges = Vec::new();
    let mut u_labels = Vec::new();
    for (u, (a, b)) in (0..n_vertices).tuple_combinations().enumerate() {
        edges.push(Edge { v: a, u, sign: -1 });
        edges.push(Edge { v: b, u, sign: 1 });
        u_labels.push(subset_label(&[a, b]));
    }
    let v_labels = (1..=n_vertices).map(|i| i.to_string()).collect();
    SignedBipartiteIncidence::from_parts(
        Family::Ust,
        params(&[("n", n_vertices)]),
        v_labels,
        u_labels,
        edges,
    )
}

/// Top boundary operator of the complete `k`-dimensional complex on `n`
/// vertices: `V` = `k`-subsets, `U` = `(k+1)`-subsets.
pub fn build_kalai_complex(n_vertices: usize, k: usize) -> Result<SignedBipartiteIncidence> {
    if k < 1 {
        return Err(Error::Incidence("kalai complex needs k ≥ 1".into()));
    }
    if n_vertices < k + 2 {
        return Err(Error::Incidence(format!(
            "kalai complex needs n ≥ k+2, got n={n_vertices}, k={k}"
        )));
    }
    guard(binomial(n_vertices, k + 1))?;
    let faces = (0..n_vertices).combinations(k).collect();
    let cofaces = (0..n_vertices).combinations(k + 1).collect();
    simplicial_incidence(
        Family::Kalai,
        params(&[("n", n_vertices), ("k", k)]),
        faces,
        cofaces,
        true,
    )
}

/// Unsigned incidence between `l`-subsets and `(l+1)`-subsets of `[n]`.
pub fn build_subset_incidence(n_ground: usize, l: usize) -> Result<SignedBipartiteIncidence> {
    if l < 1 || l + 1 > n_ground {
        return Err(Error::Incidence(format!(
            "subset incidence needs 1 ≤ l ≤ n-1, got n={n_ground}, l={l}"
        )));
    }
    guard(binomial(n_ground, l + 1))?;
    let faces = (0..n_ground).combinations(l).collect();
    let cofaces = (0..n_ground).combinations(l + 1).collect();
    simplicial_incidence(
        Family::Subset,
        params(&[("n", n_ground), ("l", l)]),
        faces,
        cofaces,
        false,
    )
}

/// Rainbow faces of the complete balanced `parts`-partite complex.
/// Vertex `p * part_size + i` is the `i`-th vertex of part `p`.
pub fn build_colorful_complex(
    parts: usize,
    part_size: usize,
    ell: usize,
) -> Result<SignedBipartiteIncidence> {
    if ell < 1 || part_size < 1 || parts <= ell {
        return Err(Error::Incidence(format!(
            "colorful complex needs l ≥ 1, part_size ≥ 1 and parts > l (got parts={parts}, \
             part_size={part_size}, l={ell})"
        )));
    }
    guard(binomial(parts, ell + 1) * (part_size as u64).pow(ell as u32 + 1))?;
    let rainbow = |size: usize| -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = (0..parts)
            .combinations(size)
            .flat_map(|ps| {
                ps.iter()
                    .map(|&p| (0..part_size).map(move |i| p * part_size + i))
                    .multi_cartesian_product()
                    .collect::<Vec<_>>()
            })
            .collect();
        if size == 0 {
            out = vec![Vec::new()];
        }
        out.sort();
        out
    };
    simplicial_incidence(
        Family::Colorful,
        params(&[("parts", parts), ("size", part_size), ("l", ell)]),
        rainbow(ell),
        rainbow(ell + 1),
        true,
    )
}

/// Cells of `Q_n` are words over `{0, 1, *}`; `*` marks a free coordinate.
const FREE: u8 = 2;

fn cube_cells(n: usize, free: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for stars in (0..n).combinations(free) {
        let fixed: Vec<usize> = (0..n).filter(|i| !stars.contains(i)).collect();
        for bits in 0u64..(1u64 << fixed.len()) {
            let mut cell = vec![FREE; n];
            for (j, &c) in fixed.iter().enumerate() {
                cell[c] = ((bits >> (fixed.len() - 1 - j)) & 1) as u8;
            }
            out.push(cell);
        }
    }
    out.sort();
    out
}

fn cube_label(cell: &[u8]) -> String {
    cell.iter()
        .map(|&c| match c {
            0 => '0',
            1 => '1',
            _ => '*',
        })
        .collect()
}

/// `(ℓ-1)`-cells versus `ℓ`-cells of the `n`-cube with cubical boundary
/// signs: for the `j`-th free coordinate (ascending), the 0-face gets
/// `(-1)^j` and the 1-face `-(-1)^j`.
pub fn build_hypercube_skeleton(n_dim: usize, ell: usize) -> Result<SignedBipartiteIncidence> {
    if ell < 1 || ell > n_dim {
        return Err(Error::Incidence(format!(
            "hypercube skeleton needs 1 ≤ l ≤ n, got n={n_dim}, l={ell}"
        )));
    }
    if n_dim > 20 {
        return Err(Error::Incidence(format!("hypercube dimension {n_dim} too large")));
    }
    guard(binomial(n_dim, ell) << (n_dim - ell))?;
    let faces = cube_cells(n_dim, ell - 1);
    let cells = cube_cells(n_dim, ell);
    let index: HashMap<&[u8], usize> =
        faces.iter().enumerate().map(|(i, f)| (f.as_slice(), i)).collect();
    let mut edges = Vec::new();
    for (u, cell) in cells.iter().enumerate() {
        let free: Vec<usize> = (0..n_dim).filter(|&i| cell[i] == FREE).collect();
        for (j, &pos) in free.iter().enumerate() {
            let parity: i8 = if j % 2 == 0 { 1 } else { -1 };
            for (bit, sign) in [(0u8, parity), (1u8, -parity)] {
                let mut face = cell.clone();
                face[pos] = bit;
                edges.push(Edge { v: index[face.as_slice()], u, sign });
            }
        }
    }
    SignedBipartiteIncidence::from_parts(
        Family::Cube,
        params(&[("n", n_dim), ("l", ell)]),
        faces.iter().map(|c| cube_label(c)).collect(),
        cells.iter().map(|c| cube_label(c)).collect(),
        edges,
    )
}

fn rref_label(m: &[u8], n: usize) -> String {
    let rows: Vec<String> =
        m.chunks(n).map(|r| format!("[{}]", r.iter().map(u8::to_string).join(","))).collect();
    format!("[{}]", rows.join(","))
}

/// `ℓ`-dimensional versus `(ℓ+1)`-dimensional subspaces of `F_q^n` under
/// inclusion, all signs `+1`. Requires `ℓ + 1 < n/2`, under which `B` has
/// full row rank; see [`build_grassmannian_relaxed`] to skip that check.
pub fn build_grassmannian(q: u32, n_dim: usize, ell: usize) -> Result<SignedBipartiteIncidence> {
    if 2 * (ell + 1) >= n_dim {
        return Err(Error::GrassmannianRankMayDrop { l_plus_one: ell + 1, n: n_dim });
    }
    build_grassmannian_relaxed(q, n_dim, ell)
}

/// Same as [`build_grassmannian`] without the `ℓ + 1 < n/2` rank condition;
/// a warning is logged when it is violated.
pub fn build_grassmannian_relaxed(
    q: u32,
    n_dim: usize,
    ell: usize,
) -> Result<SignedBipartiteIncidence> {
    let field = FiniteField::new(q)?;
    if ell < 1 || ell + 1 > n_dim {
        return Err(Error::Incidence(format!(
            "grassmannian needs 1 ≤ l and l+1 ≤ n, got n={n_dim}, l={ell}"
        )));
    }
    if 2 * (ell + 1) >= n_dim {
        log::warn!("grassmannian q={q} n={n_dim} l={ell}: l+1 < n/2 fails, B may lose row rank");
    }
    guard(gaussian_binomial(q as u64, n_dim as u64, ell as u64 + 1))?;
    guard(gaussian_binomial(q as u64, n_dim as u64, ell as u64))?;

    let lower = field.subspaces(n_dim, ell);
    let upper = field.subspaces(n_dim, ell + 1);
    let index: HashMap<&[u8], usize> =
        lower.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    // hyperplanes of F_q^{ℓ+1}, pushed forward through each upper basis
    let coeffs = field.subspaces(ell + 1, ell);

    let mut edges = Vec::new();
    for (u, basis) in upper.iter().enumerate() {
        for c in &coeffs {
            let mut span = vec![0u8; ell * n_dim];
            for i in 0..ell {
                for t in 0..=ell {
                    let a = c[i * (ell + 1) + t];
                    if a == 0 {
                        continue;
                    }
                    for j in 0..n_dim {
                        let prod = field.mul(a, basis[t * n_dim + j]);
                        span[i * n_dim + j] = field.add(span[i * n_dim + j], prod);
                    }
                }
            }
            let key = field.rref(&span, ell, n_dim);
            edges.push(Edge { v: index[key.as_slice()], u, sign: 1 });
        }
    }
    SignedBipartiteIncidence::from_parts(
        Family::Grassmannian,
        params(&[("q", q as usize), ("n", n_dim), ("l", ell)]),
        lower.iter().map(|s| rref_label(s, n_dim)).collect(),
        upper.iter().map(|s| rref_label(s, n_dim)).collect(),
        edges,
    )
}
