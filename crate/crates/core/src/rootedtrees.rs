//! Finite rooted trees with alternating even/odd layers: canonical codes,
//! automorphism counts, saturating matching counts `m(K, T)`, enumeration of
//! valid trees, and the transversal vectors built from the `V(T) × U(T)`
//! incidence matrix `D`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dpp;
use crate::error::{Error, Result};
use crate::spectral::Subspace;

const COUNT_LIMIT: u128 = 1 << 63;
const ENUMERATION_LIMIT: usize = 2_000_000;

/// A finite rooted tree. Vertex parity is the parity of its depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootedBipTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    root: usize,
}

#[derive(Serialize, Deserialize)]
struct TreeDocument {
    parent: Vec<Option<usize>>,
}

impl RootedBipTree {
    /// Build from a parent array; exactly one entry must be `None`.
    pub fn from_parents(parent: Vec<Option<usize>>) -> Result<Self> {
        let n = parent.len();
        let roots: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Tree(format!("expected one root, found {}", roots.len())));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n || p == v {
                    return Err(Error::Tree(format!("bad parent {p} for vertex {v}")));
                }
                children[p].push(v);
            }
        }
        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        let mut stack = vec![root];
        let mut seen = 1;
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                seen += 1;
                stack.push(c);
            }
        }
        if seen != n {
            return Err(Error::Tree("parent array contains a cycle".into()));
        }
        Ok(Self { parent, children, depth, root })
    }

    /// The single-vertex tree.
    pub fn singleton() -> Self {
        Self::from_parents(vec![None]).expect("valid")
    }

    /// Parse a nested-parenthesis code; vertices are numbered in preorder.
    pub fn from_code(code: &str) -> Result<Self> {
        let mut parent = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        let mut closed = false;
        for ch in code.chars() {
            if closed {
                return Err(Error::Tree(format!("trailing input in code {code:?}")));
            }
            match ch {
                '(' => {
                    parent.push(stack.last().copied());
                    stack.push(parent.len() - 1);
                }
                ')' => {
                    stack.pop().ok_or_else(|| Error::Tree(format!("unbalanced code {code:?}")))?;
                    closed = stack.is_empty();
                }
                c if c.is_whitespace() => {}
                c => return Err(Error::Tree(format!("unexpected character {c:?} in code"))),
            }
        }
        if !closed {
            return Err(Error::Tree(format!("unbalanced code {code:?}")));
        }
        Self::from_parents(parent)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TreeDocument { parent: self.parent.clone() }).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TreeDocument =
            serde_json::from_str(s).map_err(|e| Error::Tree(format!("bad tree json: {e}")))?;
        Self::from_parents(doc.parent)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn is_even(&self, v: usize) -> bool {
        self.depth[v].is_multiple_of(2)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.children[v].len() + usize::from(self.parent[v].is_some())
    }

    /// Vertices ordered so that every child comes after its parent.
    fn preorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(self.children[v].iter().rev());
        }
        order
    }

    /// Canonical codes of every subtree, indexed by vertex.
    fn subtree_codes(&self) -> Vec<String> {
        let mut codes = vec![String::new(); self.len()];
        for &v in self.preorder().iter().rev() {
            let mut kids: Vec<&str> = self.children[v].iter().map(|&c| codes[c].as_str()).collect();
            kids.sort_unstable();
            let mut s = String::with_capacity(2 + kids.iter().map(|k| k.len()).sum::<usize>());
            s.push('(');
            for k in kids {
                s.push_str(k);
            }
            s.push(')');
            codes[v] = s;
        }
        codes
    }
}

/// AHU code: a leaf is `()`, an internal vertex is `(` + sorted child codes + `)`.
pub fn canonical_code(t: &RootedBipTree) -> Vec<u8> {
    canonical_string(t).into_bytes()
}

pub fn canonical_string(t: &RootedBipTree) -> String {
    t.subtree_codes().swap_remove(t.root)
}

fn factorial_u128(c: usize) -> Result<u128> {
    (1..=c as u128).try_fold(1u128, |acc, x| acc.checked_mul(x)).ok_or(Error::Overflow("aut_size"))
}

/// Number of root-preserving automorphisms.
pub fn aut_size(t: &RootedBipTree) -> Result<u128> {
    let codes = t.subtree_codes();
    let mut aut = vec![1u128; t.len()];
    for &v in t.preorder().iter().rev() {
        let mut groups: HashMap<&str, usize> = HashMap::new();
        let mut a = 1u128;
        for &c in &t.children[v] {
            *groups.entry(codes[c].as_str()).or_insert(0) += 1;
            a = a.checked_mul(aut[c]).ok_or(Error::Overflow("aut_size"))?;
        }
        for &mult in groups.values() {
            a = a.checked_mul(factorial_u128(mult)?).ok_or(Error::Overflow("aut_size"))?;
        }
        aut[v] = a;
    }
    Ok(aut[t.root])
}

/// `ln |Aut(T, o)|`, for trees whose automorphism count overflows `u128`.
pub fn log_aut_size(t: &RootedBipTree) -> f64 {
    let codes = t.subtree_codes();
    let mut log_aut = vec![0.0f64; t.len()];
    for &v in t.preorder().iter().rev() {
        let mut groups: HashMap<&str, usize> = HashMap::new();
        let mut a = 0.0;
        for &c in &t.children[v] {
            *groups.entry(codes[c].as_str()).or_insert(0) += 1;
            a += log_aut[c];
        }
        for &mult in groups.values() {
            a += (2..=mult).map(|i| (i as f64).ln()).sum::<f64>();
        }
        log_aut[v] = a;
    }
    log_aut[t.root]
}

/// Height even and every odd vertex of degree `k + 1`.
pub fn is_valid(t: &RootedBipTree, k: usize) -> bool {
    t.height().is_multiple_of(2) && (0..t.len()).all(|v| t.is_even(v) || t.degree(v) == k + 1)
}

/// `(V(T), U(T), I(T))`, each sorted by vertex id.
pub fn parts(t: &RootedBipTree) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let h = t.height();
    let even: Vec<usize> = (0..t.len()).filter(|&v| t.is_even(v)).collect();
    let odd = (0..t.len()).filter(|&v| !t.is_even(v)).collect();
    let inner = even.iter().copied().filter(|&v| t.depth(v) < h).collect();
    (even, odd, inner)
}

/// `m(K, T)`: matchings of `T` saturating `K ∪ U(T)`.
pub fn matching_count(t: &RootedBipTree, k_set: &[usize]) -> Result<u128> {
    let mut required: Vec<bool> = (0..t.len()).map(|v| !t.is_even(v)).collect();
    for &v in k_set {
        if v >= t.len() || !t.is_even(v) {
            return Err(Error::Tree(format!("vertex {v} is not in V(T)")));
        }
        required[v] = true;
    }
    let over = |x: Option<u128>| match x {
        Some(v) if v <= COUNT_LIMIT => Ok(v),
        _ => Err(Error::Overflow("matching_count")),
    };
    // free[v]: v left unmatched inside its subtree; taken[v]: v matched to a child
    let mut free = vec![0u128; t.len()];
    let mut taken = vec![0u128; t.len()];
    for &v in t.preorder().iter().rev() {
        let (mut p0, mut p1) = (1u128, 0u128);
        for &c in &t.children[v] {
            let alone = if required[c] { taken[c] } else { over(taken[c].checked_add(free[c]))? };
            p1 = over(
                p1.checked_mul(alone)
                    .and_then(|x| p0.checked_mul(free[c]).and_then(|y| x.checked_add(y))),
            )?;
            p0 = over(p0.checked_mul(alone))?;
        }
        free[v] = p0;
        taken[v] = p1;
    }
    let r = t.root;
    if required[r] {
        Ok(taken[r])
    } else {
        over(taken[r].checked_add(free[r]))
    }
}

/// The `V(T) × U(T)` incidence matrix, rows and columns ordered as in
/// [`parts`]. `signs[c]` is the sign of the edge between `c` and its parent;
/// `None` means all `+1`.
pub fn incidence_matrix(t: &RootedBipTree, signs: Option<&[f64]>) -> DMatrix<f64> {
    let (even, odd, _) = parts(t);
    let row: HashMap<usize, usize> = even.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let col: HashMap<usize, usize> = odd.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut d = DMatrix::zeros(even.len(), odd.len());
    for c in 0..t.len() {
        if let Some(p) = t.parent[c] {
            let s = signs.map_or(1.0, |s| s[c]);
            let (v, u) = if t.is_even(c) { (c, p) } else { (p, c) };
            d[(row[&v], col[&u])] = s;
        }
    }
    d
}

/// Orthonormal basis (columns) of the null space of the symmetric PSD `a`.
fn null_space(a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a);
    let scale = eig.eigenvalues.amax().max(1.0);
    let idx: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i].abs() <= 1e-9 * scale).collect();
    DMatrix::from_fn(n, idx.len(), |r, c| eig.eigenvectors[(r, idx[c])])
}

/// A vector `φ` on `V(T)` (ordered as in [`parts`]) with `φᵀD = 0`,
/// `φ(v0) = 1` and minimal `Σ_{v ∉ K} φ(v)²`, which then equals
/// `m(K) / (m(K) - m(K ∪ {v0}))`.
pub fn transversal_vector(
    t: &RootedBipTree,
    k_set: &[usize],
    v0: usize,
    signs: Option<&[f64]>,
) -> Result<DVector<f64>> {
    let (even, _, _) = parts(t);
    let pos = |v: usize| {
        even.binary_search(&v).map_err(|_| Error::Tree(format!("vertex {v} is not in V(T)")))
    };
    let k_pos = k_set.iter().map(|&v| pos(v)).collect::<Result<Vec<_>>>()?;
    let p0 = pos(v0)?;
    if k_pos.contains(&p0) {
        return Err(Error::Tree("v0 must lie outside K".into()));
    }
    if matching_count(t, k_set)? == 0 {
        return Err(Error::Tree("m(K, T) = 0".into()));
    }
    let d = incidence_matrix(t, signs);
    let kernel = null_space(&d * d.transpose());
    let mut on_j = kernel.clone();
    for &i in &k_pos {
        on_j.row_mut(i).fill(0.0);
    }
    // W = P_J(ker Dᵀ); P_W e_{v0} = on_j c with c = (on_jᵀ on_j)⁺ on_jᵀ e_{v0}
    let gram = SymmetricEigen::new(on_j.transpose() * &on_j);
    let cutoff = 1e-10 * gram.eigenvalues.amax().max(1e-300);
    let rhs = gram.eigenvectors.transpose() * on_j.row(p0).transpose();
    let scaled = DVector::from_fn(rhs.len(), |i, _| {
        let l = gram.eigenvalues[i];
        if l > cutoff {
            rhs[i] / l
        } else {
            0.0
        }
    });
    let coef = &gram.eigenvectors * scaled;
    let pw = &on_j * &coef;
    let alpha = pw.norm_squared();
    if !(alpha > 1e-12) {
        return Err(Error::Tree("v0 row is not spanned by the other rows".into()));
    }
    let phi = (&kernel * coef) / alpha;
    Ok(phi)
}

/// A nonzero `φ` supported on `K` with `φᵀD = 0`, for `m(K, T) = 0`.
/// Indexed like [`parts`]'s `V(T)`.
pub fn dependent_vector(
    t: &RootedBipTree,
    k_set: &[usize],
    signs: Option<&[f64]>,
) -> Result<DVector<f64>> {
    let (even, _, _) = parts(t);
    let mut k_pos = k_set
        .iter()
        .map(|&v| {
            even.binary_search(&v).map_err(|_| Error::Tree(format!("vertex {v} is not in V(T)")))
        })
        .collect::<Result<Vec<_>>>()?;
    k_pos.sort_unstable();
    k_pos.dedup();
    let d = incidence_matrix(t, signs);
    let dk = DMatrix::from_fn(k_pos.len(), d.ncols(), |i, j| d[(k_pos[i], j)]);
    let kernel = null_space(&dk * dk.transpose());
    if kernel.ncols() == 0 {
        return Err(Error::Tree("rows of K are independent".into()));
    }
    let mut phi = DVector::zeros(even.len());
    for (i, &p) in k_pos.iter().enumerate() {
        phi[p] = kernel[(i, 0)];
    }
    Ok(phi)
}

/// A uniformly random transversal, drawn from the determinantal measure of
/// the column space of `D`. Returned as sorted vertex ids.
pub fn uniform_transversal<R: Rng + ?Sized>(t: &RootedBipTree, rng: &mut R) -> Result<Vec<usize>> {
    if matching_count(t, &[])? == 0 {
        return Err(Error::Tree("tree has no transversal".into()));
    }
    let (even, _, _) = parts(t);
    let d = incidence_matrix(t, None);
    let h = Subspace::span_of_rows(&d.transpose());
    let s = dpp::sample(&h, rng)?;
    Ok(s.members.into_iter().map(|i| even[i]).collect())
}

#[derive(Clone, Debug)]
struct Shape {
    code: String,
    size: usize,
    height: usize,
}

/// Non-decreasing index selections from `items` (sorted by size) whose sizes
/// fit in `budget`; `count` fixes the number of picks when given.
fn multisets(
    items: &[Shape],
    budget: usize,
    count: Option<usize>,
    out: &mut Vec<Vec<usize>>,
    limit: usize,
) -> Result<()> {
    fn rec(
        items: &[Shape],
        start: usize,
        budget: usize,
        left: Option<usize>,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) -> Result<()> {
        if left.is_none_or(|l| l == 0) {
            out.push(cur.clone());
            if out.len() > limit {
                return Err(Error::Tree(format!(
                    "more than {limit} trees; lower the vertex budget"
                )));
            }
            if left == Some(0) {
                return Ok(());
            }
        }
        for i in start..items.len() {
            if items[i].size > budget {
                break;
            }
            cur.push(i);
            rec(items, i, budget - items[i].size, left.map(|l| l - 1), cur, out, limit)?;
            cur.pop();
        }
        Ok(())
    }
    rec(items, 0, budget, count, &mut Vec::new(), out, limit)
}

fn assemble(items: &[Shape], pick: &[usize]) -> Shape {
    let mut kids: Vec<&str> = pick.iter().map(|&i| items[i].code.as_str()).collect();
    kids.sort_unstable();
    let mut code = String::from("(");
    for k in kids {
        code.push_str(k);
    }
    code.push(')');
    Shape {
        code,
        size: 1 + pick.iter().map(|&i| items[i].size).sum::<usize>(),
        height: pick.iter().map(|&i| items[i].height + 1).max().unwrap_or(0),
    }
}

/// All valid trees of height exactly `r` (even) with at most `max_vertices`
/// vertices and `m(I(T), T) > 0`, i.e. every finite shape that a radius-`r`
/// ball of the limit tree can take. Sorted by code.
pub fn enumerate_valid_trees(
    k: usize,
    r: usize,
    max_vertices: usize,
) -> Result<Vec<RootedBipTree>> {
    if !r.is_multiple_of(2) {
        return Err(Error::Tree(format!("radius {r} must be even")));
    }
    if k == 0 {
        return Err(Error::Tree("k must be at least 1".into()));
    }
    if max_vertices == 0 {
        return Ok(Vec::new());
    }
    let leaf = Shape { code: "()".into(), size: 1, height: 0 };
    // even[h]: even-rooted shapes of height ≤ h (h even)
    let mut even = vec![leaf];
    for _ in (2..=r).step_by(2) {
        let mut picks = Vec::new();
        multisets(&even, max_vertices.saturating_sub(2), Some(k), &mut picks, ENUMERATION_LIMIT)?;
        let mut odd: Vec<Shape> = picks.iter().map(|p| assemble(&even, p)).collect();
        odd.sort_by(|a, b| a.size.cmp(&b.size).then_with(|| a.code.cmp(&b.code)));
        let mut picks = Vec::new();
        multisets(&odd, max_vertices - 1, None, &mut picks, ENUMERATION_LIMIT)?;
        even = picks.iter().map(|p| assemble(&odd, p)).collect();
        even.sort_by(|a, b| a.size.cmp(&b.size).then_with(|| a.code.cmp(&b.code)));
    }
    let mut out = Vec::new();
    let mut shapes: Vec<Shape> = even.into_iter().filter(|s| s.height == r).collect();
    shapes.sort_by(|a, b| a.code.cmp(&b.code));
    for s in shapes {
        let t = RootedBipTree::from_code(&s.code)?;
        let (_, _, inner) = parts(&t);
        if matching_count(&t, &inner)? > 0 {
            out.push(t);
        }
    }
    Ok(out)
}

/// Count of each canonical code in a list of trees.
pub fn code_histogram<'a>(
    trees: impl IntoIterator<Item = &'a RootedBipTree>,
) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for t in trees {
        *h.entry(canonical_string(t)).or_insert(0) += 1;
    }
    h
}
