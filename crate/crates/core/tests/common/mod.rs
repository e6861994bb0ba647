//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use dpplocal::incidence::SignedBipartiteIncidence;
use dpplocal::rootedtrees::{
    canonical_string, incidence_matrix, matching_count, parts, transversal_vector, RootedBipTree,
};
use rand::Rng;

/// Subsets of right vertices whose edges form a spanning tree of a graph
/// given as a UST incidence (each column has two endpoints).
pub fn spanning_trees(g: &SignedBipartiteIncidence) -> Vec<Vec<usize>> {
    let n = g.n();
    let edges: Vec<(usize, usize)> = (0..g.m())
        .map(|u| {
            let c = g.column(u);
            (c[0].0, c[1].0)
        })
        .collect();
    let mut out = Vec::new();
    let mut pick = Vec::new();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut x = x;
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    fn rec(
        edges: &[(usize, usize)],
        n: usize,
        start: usize,
        pick: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if pick.len() == n - 1 {
            let mut p: Vec<usize> = (0..n).collect();
            for &e in pick.iter() {
                let (a, b) = edges[e];
                let (ra, rb) = (find(&mut p, a), find(&mut p, b));
                if ra == rb {
                    return;
                }
                p[ra] = rb;
            }
            out.push(pick.clone());
            return;
        }
        for e in start..edges.len() {
            pick.push(e);
            rec(edges, n, e + 1, pick, out);
            pick.pop();
        }
    }
    rec(&edges, n, 0, &mut pick, &mut out);
    out
}

/// Exact integer determinant by fraction-free elimination.
pub fn bareiss_det(mut a: Vec<Vec<i128>>) -> i128 {
    let n = a.len();
    if n == 0 {
        return 1;
    }
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// `det(B[R, T])²` for every `|R|`-subset `T` of right vertices, where `R`
/// are the left faces avoiding the first ground element.
pub fn kalai_squared_minors(g: &SignedBipartiteIncidence) -> BTreeMap<Vec<usize>, i128> {
    let rows: Vec<usize> = (0..g.n())
        .filter(|&v| {
            let label = &g.v_labels()[v];
            !label.trim_matches(|c| c == '{' || c == '}').split(',').any(|x| x == "1")
        })
        .collect();
    let b = g.signed_matrix();
    let r = rows.len();
    let mut out = BTreeMap::new();
    let mut pick = Vec::new();
    fn rec(m: usize, r: usize, start: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if pick.len() == r {
            f(pick);
            return;
        }
        for u in start..m {
            pick.push(u);
            rec(m, r, u + 1, pick, f);
            pick.pop();
        }
    }
    rec(g.m(), r, 0, &mut pick, &mut |t: &[usize]| {
        let mat: Vec<Vec<i128>> =
            rows.iter().map(|&v| t.iter().map(|&u| b[(v, u)] as i128).collect()).collect();
        let d = bareiss_det(mat);
        if d != 0 {
            out.insert(t.to_vec(), d * d);
        }
    });
    out
}

/// Number of isomorphisms from the subtree of `a` at `x` onto the subtree of
/// `b` at `y`, by backtracking over child bijections.
pub fn count_isomorphisms(a: &RootedBipTree, x: usize, b: &RootedBipTree, y: usize) -> u128 {
    let ca = a.children(x);
    let cb = b.children(y);
    if ca.len() != cb.len() {
        return 0;
    }
    fn rec(
        a: &RootedBipTree,
        b: &RootedBipTree,
        ca: &[usize],
        cb: &[usize],
        i: usize,
        used: &mut Vec<bool>,
    ) -> u128 {
        if i == ca.len() {
            return 1;
        }
        let mut total = 0;
        for j in 0..cb.len() {
            if used[j] {
                continue;
            }
            let w = count_isomorphisms(a, ca[i], b, cb[j]);
            if w == 0 {
                continue;
            }
            used[j] = true;
            total += w * rec(a, b, ca, cb, i + 1, used);
            used[j] = false;
        }
        total
    }
    rec(a, b, ca, cb, 0, &mut vec![false; cb.len()])
}

pub fn isomorphic(a: &RootedBipTree, b: &RootedBipTree) -> bool {
    a.len() == b.len() && count_isomorphisms(a, a.root(), b, b.root()) > 0
}

pub fn automorphisms(t: &RootedBipTree) -> u128 {
    count_isomorphisms(t, t.root(), t, t.root())
}

/// One representative of every rooted tree with `n` vertices, built by
/// attaching a leaf everywhere and deduplicating with [`isomorphic`].
pub fn all_rooted_trees(max_n: usize) -> Vec<Vec<RootedBipTree>> {
    let mut levels = vec![Vec::new(), vec![RootedBipTree::singleton()]];
    for n in 2..=max_n {
        let mut next: Vec<RootedBipTree> = Vec::new();
        for t in &levels[n - 1] {
            for v in 0..t.len() {
                let mut parent = t.parents().to_vec();
                parent.push(Some(v));
                let cand = RootedBipTree::from_parents(parent).unwrap();
                if !next.iter().any(|s| isomorphic(s, &cand)) {
                    next.push(cand);
                }
            }
        }
        levels.push(next);
    }
    levels
}

/// Rooted trees per vertex count (OEIS A000081).
pub const ROOTED_TREE_COUNTS: [usize; 14] =
    [0, 1, 1, 2, 4, 9, 20, 48, 115, 286, 719, 1842, 4766, 12486];

/// Edges of a tree as (child, parent).
fn tree_edges(t: &RootedBipTree) -> Vec<(usize, usize)> {
    (0..t.len()).filter_map(|c| t.parent(c).map(|p| (c, p))).collect()
}

/// Matchings saturating `K` and every odd vertex, by listing edge subsets.
pub fn brute_matching_count(t: &RootedBipTree, k_set: &[usize]) -> u128 {
    let edges = tree_edges(t);
    assert!(edges.len() <= 16);
    let mut count = 0;
    'subsets: for mask in 0u32..(1 << edges.len()) {
        let mut covered = vec![false; t.len()];
        for (i, &(a, b)) in edges.iter().enumerate() {
            if mask >> i & 1 == 1 {
                if covered[a] || covered[b] {
                    continue 'subsets;
                }
                covered[a] = true;
                covered[b] = true;
            }
        }
        let odd_ok = (0..t.len()).all(|v| t.depth(v) % 2 == 0 || covered[v]);
        if odd_ok && k_set.iter().all(|&v| covered[v]) {
            count += 1;
        }
    }
    count
}

/// A random rooted tree on `n` vertices (uniform random parent among the
/// earlier vertices), returned with a random relabeling of it.
pub fn random_tree_pair<R: Rng>(n: usize, rng: &mut R) -> (RootedBipTree, RootedBipTree) {
    use rand::seq::SliceRandom;
    let parent: Vec<Option<usize>> =
        (0..n).map(|v| if v == 0 { None } else { Some(rng.random_range(0..v)) }).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut relabeled = vec![None; n];
    for v in 0..n {
        relabeled[perm[v]] = parent[v].map(|p| perm[p]);
    }
    (RootedBipTree::from_parents(parent).unwrap(), RootedBipTree::from_parents(relabeled).unwrap())
}

/// A random valid tree for `k`: even vertices get a random number of odd
/// children (the root at least one), every odd vertex gets exactly `k`
/// children. Height at most `2 * levels`.
pub fn random_valid_tree<R: Rng>(
    k: usize,
    levels: usize,
    max_branch: usize,
    rng: &mut R,
) -> RootedBipTree {
    let mut parent = vec![None];
    let mut frontier = vec![0usize];
    for level in 0..levels {
        let mut next = Vec::new();
        for &v in &frontier {
            let lo = usize::from(level == 0);
            let c = rng.random_range(lo..=max_branch);
            for _ in 0..c {
                let u = parent.len();
                parent.push(Some(v));
                for _ in 0..k {
                    next.push(parent.len());
                    parent.push(Some(u));
                }
            }
        }
        frontier = next;
    }
    RootedBipTree::from_parents(parent).unwrap()
}

/// Total variation between two finite laws.
pub fn tv<K: Ord + Clone>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<K> = a.keys().cloned().collect();
    keys.extend(b.keys().cloned());
    keys.sort();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Empirical frequencies of a list of keys.
pub fn frequencies<K: Ord + Clone>(draws: &[K]) -> BTreeMap<K, f64> {
    let mut m = BTreeMap::new();
    for d in draws {
        *m.entry(d.clone()).or_insert(0.0) += 1.0;
    }
    let n = draws.len() as f64;
    m.values_mut().for_each(|x| *x /= n);
    m
}

/// Root-degree law of a uniform spanning tree of `K_n`: one plus a
/// Binomial(n-2, 1/n) count of appearances in the Prüfer sequence.
pub fn ust_root_degree_law(n: usize) -> BTreeMap<usize, f64> {
    let p = 1.0 / n as f64;
    let trials = n - 2;
    let mut out = BTreeMap::new();
    let mut choose = 1.0f64;
    for j in 0..=trials {
        if j > 0 {
            choose *= (trials - j + 1) as f64 / j as f64;
        }
        let w = choose * p.powi(j as i32) * (1.0 - p).powi((trials - j) as i32);
        if w > 1e-300 {
            out.insert(j + 1, w);
        }
    }
    out
}

/// Canonical code of the `c`-branch star of height 2 for `k`.
pub fn star_code(c: usize, k: usize) -> String {
    let branch = format!("({})", "()".repeat(k));
    format!("({})", branch.repeat(c))
}

/// Every rooted tree with at most `max_n` vertices, deduplicated by code.
/// Only completeness matters where this is used; the counts are checked
/// against [`ROOTED_TREE_COUNTS`].
pub fn trees_up_to(max_n: usize) -> Vec<Vec<RootedBipTree>> {
    let mut levels = vec![Vec::new(), vec![RootedBipTree::singleton()]];
    for n in 2..=max_n {
        let mut seen = BTreeMap::new();
        for t in &levels[n - 1] {
            let t: &RootedBipTree = t;
            for v in 0..t.len() {
                let mut parent = t.parents().to_vec();
                parent.push(Some(v));
                let c = RootedBipTree::from_parents(parent).unwrap();
                seen.entry(canonical_string(&c)).or_insert(c);
            }
        }
        levels.push(seen.into_values().collect());
    }
    levels
}

/// Checks the strict drop `m(K + v0) < m(K)` and the transversal vector
/// identities on `count` random (tree, K, v0) instances. Returns the worst
/// relative error of the norm identity.
pub fn transversal_identity_errors(seed: u64, count: usize) -> Result<f64, String> {
    let mut g = dpplocal::rng::master(seed);
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < count {
        let k = g.random_range(1..=2);
        let t = random_valid_tree(k, g.random_range(1..=2), 2, &mut g);
        let (even, _, _) = parts(&t);
        let k_set: Vec<usize> = even.iter().copied().filter(|_| g.random_bool(0.3)).collect();
        let j: Vec<usize> = even.iter().copied().filter(|v| !k_set.contains(v)).collect();
        if j.is_empty() {
            continue;
        }
        let mk = matching_count(&t, &k_set).map_err(|e| e.to_string())?;
        if mk == 0 {
            continue;
        }
        let v0 = j[g.random_range(0..j.len())];
        let mut k_plus = k_set.clone();
        k_plus.push(v0);
        let mk0 = matching_count(&t, &k_plus).map_err(|e| e.to_string())?;
        if mk0 >= mk {
            return Err(format!("m(K + v0) = {mk0} >= m(K) = {mk} on {:?}", t.parents()));
        }
        let phi = transversal_vector(&t, &k_set, v0, None).map_err(|e| e.to_string())?;
        let pos = |v: usize| even.binary_search(&v).unwrap();
        let residual = (phi.transpose() * incidence_matrix(&t, None)).amax();
        if (phi[pos(v0)] - 1.0).abs() > 1e-9 || residual > 1e-9 {
            return Err(format!("bad vector on {:?}, K = {k_set:?}, v0 = {v0}", t.parents()));
        }
        let norm: f64 = j.iter().map(|&v| phi[pos(v)].powi(2)).sum();
        let want = mk as f64 / (mk - mk0) as f64;
        worst = worst.max((norm - want).abs() / want);
        checked += 1;
    }
    Ok(worst)
}
