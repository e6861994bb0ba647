//! Balls of `G[T]` around sampled roots, their empirical laws, convergence
//! tables against the limit law, quenched root fractions, and numerical
//! spot checks of the tree determinant identity.

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dpp::{DeterminantalSampler, SampleSet};
use crate::error::{Error, Result};
use crate::incidence::{self, Family, SignedBipartiteIncidence};
use crate::limit::{tk_distribution, BallDistribution};
use crate::rng;
use crate::rootedtrees::{canonical_string, matching_count, RootedBipTree};
use crate::spectral::{decompose_dual, default_eps_delta};

pub use crate::limit::tv_distance;

/// Shape of a ball: a rooted tree (root is vertex 0) or the marker for a
/// ball containing a cycle.
#[derive(Clone, Debug, PartialEq)]
pub enum BallShape {
    Tree(RootedBipTree),
    NonTree,
}

/// A ball of `G[T]` with the host vertices it covers.
#[derive(Clone, Debug)]
pub struct Ball {
    pub v_nodes: Vec<usize>,
    pub u_nodes: Vec<usize>,
    pub shape: BallShape,
}

impl Ball {
    pub fn is_tree(&self) -> bool {
        matches!(self.shape, BallShape::Tree(_))
    }

    /// Canonical code when the ball is a tree of height exactly `r`.
    pub fn code_at_height(&self, r: usize) -> Option<String> {
        match &self.shape {
            BallShape::Tree(t) if t.height() == r => Some(canonical_string(t)),
            _ => None,
        }
    }
}

/// `G[T]` seen from the left side: for each `v`, its neighbors in `T`.
#[derive(Clone, Debug)]
pub struct InducedGraph<'a> {
    g: &'a SignedBipartiteIncidence,
    t_adj: Vec<Vec<usize>>,
}

impl<'a> InducedGraph<'a> {
    pub fn new(g: &'a SignedBipartiteIncidence, t: &SampleSet) -> Self {
        let mut t_adj = vec![Vec::new(); g.n()];
        for &u in &t.members {
            for &(v, _) in g.column(u) {
                t_adj[v].push(u);
            }
        }
        Self { g, t_adj }
    }

    /// Breadth-first ball of radius `r` around the left vertex `o`.
    pub fn ball(&self, o: usize, r: usize) -> Ball {
        // node ids: 2v for left vertices, 2u + 1 for right ones
        let mut index: HashMap<usize, usize> = HashMap::new();
        let mut parent: Vec<Option<usize>> = vec![None];
        let mut v_nodes = vec![o];
        let mut u_nodes = Vec::new();
        let mut tree = true;
        index.insert(2 * o, 0);
        let mut queue = VecDeque::from([(2 * o, 0usize, 0usize)]);
        while let Some((key, id, depth)) = queue.pop_front() {
            if depth == r {
                continue;
            }
            let from_parent = parent[id];
            let neighbors: Vec<usize> = if key % 2 == 0 {
                self.t_adj[key / 2].iter().map(|&u| 2 * u + 1).collect()
            } else {
                self.g.column(key / 2).iter().map(|&(v, _)| 2 * v).collect()
            };
            for nb in neighbors {
                match index.get(&nb) {
                    Some(&j) => {
                        if Some(j) != from_parent {
                            tree = false;
                        }
                    }
                    None => {
                        let j = parent.len();
                        parent.push(Some(id));
                        index.insert(nb, j);
                        if nb % 2 == 0 {
                            v_nodes.push(nb / 2);
                        } else {
                            u_nodes.push(nb / 2);
                        }
                        queue.push_back((nb, j, depth + 1));
                    }
                }
            }
        }
        let shape = if tree {
            BallShape::Tree(RootedBipTree::from_parents(parent).expect("bfs tree"))
        } else {
            BallShape::NonTree
        };
        Ball { v_nodes, u_nodes, shape }
    }
}

/// `B_{G[T]}(o, r)`.
pub fn extract_ball(g: &SignedBipartiteIncidence, t: &SampleSet, o: usize, r: usize) -> Ball {
    InducedGraph::new(g, t).ball(o, r)
}

/// Tallies of ball codes over many roots.
#[derive(Clone, Debug, Default)]
struct Tally {
    counts: BTreeMap<String, u64>,
    residual: u64,
    non_tree: u64,
    short: u64,
    structured_hits: u64,
    total: u64,
}

impl Tally {
    fn add(&mut self, ball: &Ball, r: usize, structured: &[bool]) {
        self.total += 1;
        if ball.u_nodes.iter().any(|&u| structured.get(u).copied().unwrap_or(false)) {
            self.structured_hits += 1;
        }
        match ball.code_at_height(r) {
            Some(code) => *self.counts.entry(code).or_insert(0) += 1,
            None => {
                self.residual += 1;
                if ball.is_tree() {
                    self.short += 1;
                } else {
                    self.non_tree += 1;
                }
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (c, n) in other.counts {
            *self.counts.entry(c).or_insert(0) += n;
        }
        self.residual += other.residual;
        self.non_tree += other.non_tree;
        self.short += other.short;
        self.structured_hits += other.structured_hits;
        self.total += other.total;
        self
    }
}

/// Result of an empirical ball-law estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmpiricalBalls {
    pub distribution: BallDistribution,
    pub samples: usize,
    pub root_samples: u64,
    pub non_tree_fraction: f64,
    pub short_fraction: f64,
    pub structured_hit_fraction: f64,
}

/// Options for [`empirical_ball_distribution`].
#[derive(Clone, Debug)]
pub struct EmpiricalConfig {
    pub radius: usize,
    pub samples: usize,
    /// Uniform roots drawn per sample, with replacement; `0` scans every
    /// left vertex of each sample once instead.
    pub roots_per_sample: usize,
    pub seed: u64,
    /// Right vertices counted as structured; may be empty.
    pub structured: Vec<usize>,
}

/// Draw `samples` independent sets `T`, then `roots_per_sample` uniform roots
/// for each (or every root), and bucket the radius-`r` balls by canonical code. Balls with a
/// cycle or of height below `r` go to the residual. Sample `i` uses stream
/// `i` of the seed, so the result does not depend on the thread count.
pub fn empirical_ball_distribution<S: DeterminantalSampler + Sync>(
    g: &SignedBipartiteIncidence,
    sampler: &S,
    cfg: &EmpiricalConfig,
) -> Result<EmpiricalBalls> {
    if cfg.samples == 0 {
        return Err(Error::Experiment("need at least one sample".into()));
    }
    let mut structured = vec![false; g.m()];
    for &u in &cfg.structured {
        structured[u] = true;
    }
    let tallies: Vec<Result<Tally>> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::substream(cfg.seed, i as u64);
            let t = sampler.sample(&mut rng)?;
            let induced = InducedGraph::new(g, &t);
            let mut tally = Tally::default();
            if cfg.roots_per_sample == 0 {
                for o in 0..g.n() {
                    tally.add(&induced.ball(o, cfg.radius), cfg.radius, &structured);
                }
            } else {
                for _ in 0..cfg.roots_per_sample {
                    let o = rng.random_range(0..g.n());
                    tally.add(&induced.ball(o, cfg.radius), cfg.radius, &structured);
                }
            }
            Ok(tally)
        })
        .collect();
    let mut total = Tally::default();
    for t in tallies {
        total = total.merge(t?);
    }
    Ok(finish(total, cfg.samples, cfg.radius, g.k()))
}

fn finish(t: Tally, samples: usize, r: usize, k: usize) -> EmpiricalBalls {
    let z = t.total.max(1) as f64;
    EmpiricalBalls {
        distribution: BallDistribution::from_counts(&t.counts, t.residual, r, k),
        samples,
        root_samples: t.total,
        non_tree_fraction: t.non_tree as f64 / z,
        short_fraction: t.short as f64 / z,
        structured_hit_fraction: t.structured_hits as f64 / z,
    }
}

/// Exact ball law of a uniformly rooted `G[T]` when `T` ranges over a
/// weighted list (e.g. the output of `enumerate_all`).
pub fn weighted_ball_distribution(
    g: &SignedBipartiteIncidence,
    weighted: &[(SampleSet, f64)],
    r: usize,
) -> BallDistribution {
    let mut entries: BTreeMap<String, f64> = BTreeMap::new();
    let mut residual = 0.0;
    let per_root = 1.0 / g.n() as f64;
    for (t, w) in weighted {
        let induced = InducedGraph::new(g, t);
        for o in 0..g.n() {
            match induced.ball(o, r).code_at_height(r) {
                Some(c) => *entries.entry(c).or_insert(0.0) += w * per_root,
                None => residual += w * per_root,
            }
        }
    }
    BallDistribution { entries, residual, radius: r, k: g.k() }
}

/// Fraction of `balls` meeting the structured set.
pub fn structured_hit_fraction(structured: &[usize], balls: &[Ball]) -> f64 {
    if balls.is_empty() {
        return 0.0;
    }
    let hits = balls.iter().filter(|b| b.u_nodes.iter().any(|u| structured.contains(u))).count();
    hits as f64 / balls.len() as f64
}

/// For each of `samples` draws of `T`, the fraction of left vertices whose
/// radius-`r` ball is isomorphic to `t0`.
pub fn quenched_fractions<S: DeterminantalSampler + Sync>(
    g: &SignedBipartiteIncidence,
    sampler: &S,
    t0: &RootedBipTree,
    r: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let target = canonical_string(t0);
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::substream(seed, i as u64);
            let t = sampler.sample(&mut rng)?;
            let induced = InducedGraph::new(g, &t);
            let hits = (0..g.n())
                .filter(|&o| match induced.ball(o, r).shape {
                    BallShape::Tree(ref b) => canonical_string(b) == target,
                    BallShape::NonTree => false,
                })
                .count();
            Ok(hits as f64 / g.n() as f64)
        })
        .collect()
}

/// `|det(L⁻↾S) - d^{-|S|} m(∅, T)|` where `T = G[S]` must be a tree.
pub fn tree_determinant_identity_gap(g: &SignedBipartiteIncidence, u_set: &[usize]) -> Result<f64> {
    let mut s = u_set.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.is_empty() {
        return Ok(0.0);
    }
    if let Some(&bad) = s.iter().find(|&&u| u >= g.m()) {
        return Err(Error::Experiment(format!("right vertex {bad} out of range")));
    }
    let fake = SampleSet { members: s.clone(), source_dim: s.len() };
    let o = g.column(s[0])[0].0;
    let ball = extract_ball(g, &fake, o, 2 * s.len() + 1);
    let tree = match ball.shape {
        BallShape::Tree(t) if ball.u_nodes.len() == s.len() => t,
        BallShape::Tree(_) => return Err(Error::Experiment("G[S] is not connected".into())),
        BallShape::NonTree => return Err(Error::Experiment("G[S] contains a cycle".into())),
    };
    let count = matching_count(&tree, &[])? as f64;
    let d = g.d() as f64;
    let pos: HashMap<usize, usize> = s.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut l = DMatrix::zeros(s.len(), s.len());
    for &u in &s {
        for &(v, sv) in g.column(u) {
            for &(w, sw) in g.v_neighbors(v) {
                if let Some(&j) = pos.get(&w) {
                    l[(pos[&u], j)] += (sv * sw) as f64 / d;
                }
            }
        }
    }
    let det: f64 = l.lu().determinant();
    Ok((det - count * d.powi(-(s.len() as i32))).abs())
}

/// A generator family with fixed parameters and one size parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub params: BTreeMap<String, u64>,
}

impl FamilySpec {
    pub fn new(family: Family, params: BTreeMap<String, u64>) -> Self {
        Self { family, params }
    }

    /// Name of the parameter that `sizes` sets.
    pub fn size_key(&self) -> &'static str {
        match self.family {
            Family::Colorful => "size",
            _ => "n",
        }
    }

    pub fn build(&self, size: Option<u64>) -> Result<SignedBipartiteIncidence> {
        let mut p = self.params.clone();
        if let Some(s) = size {
            p.insert(self.size_key().into(), s);
        }
        build_family(self.family, &p)
    }
}

fn param(p: &BTreeMap<String, u64>, key: &str) -> Result<usize> {
    p.get(key)
        .map(|&x| x as usize)
        .ok_or_else(|| Error::Incidence(format!("missing parameter {key}")))
}

/// Build any generator family from named parameters
/// (`ust: n`, `kalai: n,k`, `cube: n,l`, `colorful: parts,size,l`,
/// `grassmannian: q,n,l`, `subset: n,l`).
pub fn build_family(family: Family, p: &BTreeMap<String, u64>) -> Result<SignedBipartiteIncidence> {
    match family {
        Family::Ust => incidence::build_complete_graph_ust(param(p, "n")?),
        Family::Kalai => incidence::build_kalai_complex(param(p, "n")?, param(p, "k")?),
        Family::Cube => incidence::build_hypercube_skeleton(param(p, "n")?, param(p, "l")?),
        Family::Colorful => {
            incidence::build_colorful_complex(param(p, "parts")?, param(p, "size")?, param(p, "l")?)
        }
        Family::Grassmannian => incidence::build_grassmannian_relaxed(
            param(p, "q")? as u32,
            param(p, "n")?,
            param(p, "l")?,
        ),
        Family::Subset => incidence::build_subset_incidence(param(p, "n")?, param(p, "l")?),
        Family::Raw => Err(Error::Incidence("raw graphs have no generator".into())),
    }
}

/// Settings shared by every size of a convergence run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub k: usize,
    pub radius: usize,
    pub samples: usize,
    /// `0` means every root of each sample.
    pub roots_per_sample: usize,
    /// Vertex budget for the exact limit law.
    pub max_vertices: usize,
    pub seed: u64,
    /// `(ε, δ)`; the `d`-dependent defaults when absent.
    pub eps_delta: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub size: u64,
    pub n_left: usize,
    pub m_right: usize,
    pub d: usize,
    pub rank: usize,
    pub samples: usize,
    pub root_samples: u64,
    pub tv_to_limit: f64,
    pub non_tree_fraction: f64,
    pub short_fraction: f64,
    pub eps: f64,
    pub delta: f64,
    pub structured_count: usize,
    pub structured_hit_fraction: f64,
    pub distribution: BallDistribution,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub family: FamilySpec,
    pub k: usize,
    pub radius: usize,
    pub seed: u64,
    pub limit_residual: f64,
    pub rows: Vec<ConvergenceRow>,
}

/// For each size: build the graph, sample `T` from the row space of its
/// incidence matrix, and compare the empirical ball law with `𝕋_k`.
/// Size `i` uses seed `seed + i`.
pub fn convergence_experiment(
    spec: &FamilySpec,
    sizes: &[u64],
    cfg: &ExperimentConfig,
) -> Result<ConvergenceReport> {
    let limit = tk_distribution(cfg.k, cfg.radius, cfg.max_vertices)?;
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    let mut rows = Vec::new();
    for (i, &size) in sorted.iter().enumerate() {
        let g = spec.build(Some(size))?;
        if g.k() != cfg.k {
            return Err(Error::Experiment(format!(
                "size {size} gives right degree k + 1 = {}, expected k = {}",
                g.k() + 1,
                cfg.k
            )));
        }
        let spectrum = decompose_dual(&g)?;
        let (eps, delta) = cfg.eps_delta.unwrap_or_else(|| default_eps_delta(g.d()));
        let structured = spectrum.structured_vertices(&g, eps, delta);
        let kernel = spectrum.kernel(&g);
        let seed = cfg.seed.wrapping_add(i as u64);
        let emp = empirical_ball_distribution(
            &g,
            &kernel,
            &EmpiricalConfig {
                radius: cfg.radius,
                samples: cfg.samples,
                roots_per_sample: cfg.roots_per_sample,
                seed,
                structured: structured.clone(),
            },
        )?;
        log::info!(
            "{} size {size}: n={} m={} tv={:.5}",
            spec.family.name(),
            g.n(),
            g.m(),
            tv_distance(&emp.distribution, &limit)?
        );
        rows.push(ConvergenceRow {
            size,
            n_left: g.n(),
            m_right: g.m(),
            d: g.d(),
            rank: spectrum.rank(),
            samples: emp.samples,
            root_samples: emp.root_samples,
            tv_to_limit: tv_distance(&emp.distribution, &limit)?,
            non_tree_fraction: emp.non_tree_fraction,
            short_fraction: emp.short_fraction,
            eps,
            delta,
            structured_count: structured.len(),
            structured_hit_fraction: emp.structured_hit_fraction,
            distribution: emp.distribution,
        });
    }
    Ok(ConvergenceReport {
        family: spec.clone(),
        k: cfg.k,
        radius: cfg.radius,
        seed: cfg.seed,
        limit_residual: limit.residual,
        rows,
    })
}
