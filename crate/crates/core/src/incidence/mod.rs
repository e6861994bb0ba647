//! Signed bi-regular bipartite incidence structures `G = (V, U, E)`.
//!
//! Left vertices `V` have degree `d`, right vertices `U` have degree `k + 1`,
//! and every edge carries a sign. The generators in [`generators`] produce the
//! example families; [`SignedBipartiteIncidence::validate`] checks the
//! structural hypotheses (simple, bi-regular, C4-free) exhaustively.

pub mod field;
pub mod generators;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generators::{
    build_colorful_complex, build_complete_graph_ust, build_grassmannian,
    build_grassmannian_relaxed, build_hypercube_skeleton, build_kalai_complex,
    build_subset_incidence,
};

/// Which generator produced a structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ust,
    Kalai,
    Cube,
    Colorful,
    Grassmannian,
    Subset,
    Raw,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Ust => "ust",
            Family::Kalai => "kalai",
            Family::Cube => "cube",
            Family::Colorful => "colorful",
            Family::Grassmannian => "grassmannian",
            Family::Subset => "subset",
            Family::Raw => "raw",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ust" => Family::Ust,
            "kalai" => Family::Kalai,
            "cube" => Family::Cube,
            "colorful" => Family::Colorful,
            "grassmannian" => Family::Grassmannian,
            "subset" => Family::Subset,
            "raw" => Family::Raw,
            other => return Err(Error::Incidence(format!("unknown family {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub v: usize,
    pub u: usize,
    pub sign: i8,
}

/// A signed bipartite graph with adjacency lists on both sides.
#[derive(Clone, Debug)]
pub struct SignedBipartiteIncidence {
    family: Family,
    params: BTreeMap<String, u64>,
    v_labels: Vec<String>,
    u_labels: Vec<String>,
    edges: Vec<Edge>,
    d: usize,
    k: usize,
    v_adj: Vec<Vec<(usize, i8)>>,
    u_adj: Vec<Vec<(usize, i8)>>,
}

/// Result of [`SignedBipartiteIncidence::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub simple: bool,
    pub left_regular: bool,
    pub right_regular: bool,
    pub c4_free: bool,
    /// Distinct left degrees, ascending.
    pub left_degrees: Vec<usize>,
    /// Distinct right degrees, ascending.
    pub right_degrees: Vec<usize>,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.simple && self.left_regular && self.right_regular && self.c4_free
    }
}

/// JSON interchange form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphDocument {
    pub family: Family,
    pub params: BTreeMap<String, u64>,
    pub v_labels: Vec<String>,
    pub u_labels: Vec<String>,
    pub edges: Vec<[i64; 3]>,
}

impl SignedBipartiteIncidence {
    /// Assemble a structure from raw parts. Only index ranges and signs are
    /// checked here; structural properties are the job of [`Self::validate`].
    /// `d` and `k` are read off vertex `0` of each side.
    pub fn from_parts(
        family: Family,
        params: BTreeMap<String, u64>,
        v_labels: Vec<String>,
        u_labels: Vec<String>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let n = v_labels.len();
        let m = u_labels.len();
        let mut v_adj = vec![Vec::new(); n];
        let mut u_adj = vec![Vec::new(); m];
        for e in &edges {
            if e.v >= n || e.u >= m {
                return Err(Error::Incidence(format!(
                    "edge ({}, {}) out of range for |V|={n}, |U|={m}",
                    e.v, e.u
                )));
            }
            if e.sign != 1 && e.sign != -1 {
                return Err(Error::Incidence(format!("edge sign {} is not ±1", e.sign)));
            }
            v_adj[e.v].push((e.u, e.sign));
            u_adj[e.u].push((e.v, e.sign));
        }
        for list in v_adj.iter_mut().chain(u_adj.iter_mut()) {
            list.sort_unstable();
        }
        let d = v_adj.first().map_or(0, Vec::len);
        let k = u_adj.first().map_or(0, |a| a.len().saturating_sub(1));
        Ok(Self { family, params, v_labels, u_labels, edges, d, k, v_adj, u_adj })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &BTreeMap<String, u64> {
        &self.params
    }

    /// `n = |V|`.
    pub fn n(&self) -> usize {
        self.v_labels.len()
    }

    /// `m = |U|`.
    pub fn m(&self) -> usize {
        self.u_labels.len()
    }

    /// Left degree.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Right degree minus one.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn v_labels(&self) -> &[String] {
        &self.v_labels
    }

    pub fn u_labels(&self) -> &[String] {
        &self.u_labels
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `(u, sign)` pairs incident to left vertex `v`, sorted by `u`.
    pub fn v_neighbors(&self, v: usize) -> &[(usize, i8)] {
        &self.v_adj[v]
    }

    /// `(v, sign)` pairs incident to right vertex `u`: the support of column
    /// `u` of `B`.
    pub fn column(&self, u: usize) -> &[(usize, i8)] {
        &self.u_adj[u]
    }

    pub fn validate(&self) -> ValidationReport {
        let simple = self.u_adj.iter().all(|list| list.windows(2).all(|w| w[0].0 != w[1].0));

        let mut left: Vec<usize> = self.v_adj.iter().map(Vec::len).collect();
        left.sort_unstable();
        left.dedup();
        let mut right: Vec<usize> = self.u_adj.iter().map(Vec::len).collect();
        right.sort_unstable();
        right.dedup();

        // Two left vertices with two common right neighbours close a 4-cycle.
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut c4_free = true;
        'outer: for list in &self.u_adj {
            let mut vs: Vec<usize> = list.iter().map(|&(v, _)| v).collect();
            vs.dedup();
            for i in 0..vs.len() {
                for j in i + 1..vs.len() {
                    let c = seen.entry((vs[i], vs[j])).or_insert(0);
                    *c += 1;
                    if *c > 1 {
                        c4_free = false;
                        break 'outer;
                    }
                }
            }
        }

        ValidationReport {
            simple,
            left_regular: left.len() <= 1,
            right_regular: right.len() <= 1,
            c4_free,
            left_degrees: left,
            right_degrees: right,
        }
    }

    /// Dense `|V| × |U|` signed matrix `B`.
    pub fn signed_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n(), self.m());
        for e in &self.edges {
            b[(e.v, e.u)] = e.sign as f64;
        }
        b
    }

    /// `B` as CSV, one row per left vertex.
    pub fn matrix_csv(&self) -> String {
        let mut out = String::new();
        for v in 0..self.n() {
            let mut row = vec![0i8; self.m()];
            for &(u, s) in &self.v_adj[v] {
                row[u] = s;
            }
            let line: Vec<String> = row.iter().map(i8::to_string).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            family: self.family,
            params: self.params.clone(),
            v_labels: self.v_labels.clone(),
            u_labels: self.u_labels.clone(),
            edges: self.edges.iter().map(|e| [e.v as i64, e.u as i64, e.sign as i64]).collect(),
        }
    }

    pub fn from_document(doc: GraphDocument) -> Result<Self> {
        let edges = doc
            .edges
            .iter()
            .map(|&[v, u, s]| {
                if v < 0 || u < 0 || !(s == 1 || s == -1) {
                    return Err(Error::Incidence(format!("malformed edge [{v},{u},{s}]")));
                }
                Ok(Edge { v: v as usize, u: u as usize, sign: s as i8 })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(doc.family, doc.params, doc.v_labels, doc.u_labels, edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("graph documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text)
            .map_err(|e| Error::Incidence(format!("bad graph json: {e}")))?;
        Self::from_document(doc)
    }
}
