//! The limit law `𝕋_k`: exact radius-`r` ball masses, a truncated sampler of
//! the four-type branching process, and the finite-`d` 1-out process that
//! converges to it.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rootedtrees::{
    canonical_string, enumerate_valid_trees, is_valid, log_aut_size, matching_count, parts,
    RootedBipTree,
};

const MAX_BALL_VERTICES: usize = 1_000_000;

/// A law on radius-`r` ball shapes keyed by canonical code. `residual` holds
/// whatever is not attributed to a code (enumeration tail, or non-tree and
/// short balls for empirical laws).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallDistribution {
    pub entries: BTreeMap<String, f64>,
    pub residual: f64,
    pub radius: usize,
    pub k: usize,
}

impl BallDistribution {
    /// Empirical law from code counts plus a count of unattributed draws.
    pub fn from_counts(
        counts: &BTreeMap<String, u64>,
        residual_count: u64,
        radius: usize,
        k: usize,
    ) -> Self {
        let total = counts.values().sum::<u64>() + residual_count;
        let z = total.max(1) as f64;
        let entries = counts.iter().map(|(c, &n)| (c.clone(), n as f64 / z)).collect();
        let residual = if total == 0 { 1.0 } else { residual_count as f64 / z };
        Self { entries, residual, radius, k }
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum::<f64>() + self.residual
    }

    pub fn get(&self, code: &str) -> f64 {
        self.entries.get(code).copied().unwrap_or(0.0)
    }
}

/// `½(Σ_codes |p - q| + |residual_p - residual_q|)`.
pub fn tv_distance(a: &BallDistribution, b: &BallDistribution) -> Result<f64> {
    if a.radius != b.radius {
        return Err(Error::Limit(format!("radius mismatch: {} vs {}", a.radius, b.radius)));
    }
    let mut s: f64 = a.entries.iter().map(|(c, &p)| (p - b.get(c)).abs()).sum();
    s +=
        b.entries.iter().filter(|(c, _)| !a.entries.contains_key(*c)).map(|(_, &q)| q).sum::<f64>();
    s += (a.residual - b.residual).abs();
    Ok(0.5 * s)
}

/// `e^{-k|I(T)|} (k!)^{|U(T)|} m(I(T), T) / |Aut(T, o)|`.
pub fn tk_ball_mass(t: &RootedBipTree, k: usize) -> Result<f64> {
    if !is_valid(t, k) {
        return Err(Error::Limit("tree is not valid for this k".into()));
    }
    let (_, odd, inner) = parts(t);
    let m = matching_count(t, &inner)?;
    if m == 0 {
        return Ok(0.0);
    }
    let kf = k as f64;
    let log_kfact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    let log =
        -kf * inner.len() as f64 + odd.len() as f64 * log_kfact + (m as f64).ln() - log_aut_size(t);
    Ok(log.exp())
}

/// Exact radius-`r` ball law of `𝕋_k` over all valid trees with at most
/// `max_vertices` vertices; the rest of the mass goes to `residual`.
pub fn tk_distribution(k: usize, r: usize, max_vertices: usize) -> Result<BallDistribution> {
    let trees = enumerate_valid_trees(k, r, max_vertices)?;
    let mut entries = BTreeMap::new();
    for t in &trees {
        let w = tk_ball_mass(t, k)?;
        if w > 0.0 {
            entries.insert(canonical_string(t), w);
        }
    }
    let residual = (1.0 - entries.values().sum::<f64>()).max(0.0);
    Ok(BallDistribution { entries, residual, radius: r, k })
}

/// Poisson(`lambda`) by sequential inversion.
pub fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut x = 0usize;
    while u >= cdf {
        x += 1;
        p *= lambda / x as f64;
        cdf += p;
        if p == 0.0 && cdf < u {
            break;
        }
    }
    x
}

fn check_radius(k: usize, r: usize) -> Result<()> {
    if !r.is_multiple_of(2) {
        return Err(Error::Limit(format!("radius {r} must be even")));
    }
    if k == 0 || k > 100 {
        return Err(Error::Limit(format!("k = {k} outside 1..=100")));
    }
    Ok(())
}

/// Grow a tree breadth-first to depth `r`; `offspring` maps a particle type
/// to its children's types.
fn grow<T: Copy, R: Rng + ?Sized>(
    root: T,
    r: usize,
    rng: &mut R,
    mut offspring: impl FnMut(T, &mut R, &mut Vec<T>),
) -> Result<RootedBipTree> {
    let mut parent = vec![None];
    let mut queue = VecDeque::from([(0usize, root, 0usize)]);
    let mut kids = Vec::new();
    while let Some((id, ty, depth)) = queue.pop_front() {
        if depth == r {
            continue;
        }
        kids.clear();
        offspring(ty, rng, &mut kids);
        for &c in &kids {
            parent.push(Some(id));
            if parent.len() > MAX_BALL_VERTICES {
                return Err(Error::Limit(format!("ball exceeds {MAX_BALL_VERTICES} vertices")));
            }
            queue.push_back((parent.len() - 1, c, depth + 1));
        }
    }
    RootedBipTree::from_parents(parent)
}

#[derive(Clone, Copy)]
enum TkType {
    AEven,
    BEven,
    AOdd,
    BOdd,
}

/// Radius-`r` ball of `𝕋_k` at its root.
pub fn sample_tk_ball<R: Rng + ?Sized>(k: usize, r: usize, rng: &mut R) -> Result<RootedBipTree> {
    check_radius(k, r)?;
    let lambda = k as f64;
    grow(TkType::AEven, r, rng, |ty, rng, out| match ty {
        TkType::AEven => {
            out.push(TkType::AOdd);
            out.extend(std::iter::repeat_n(TkType::BOdd, poisson(lambda, rng)));
        }
        TkType::BEven => out.extend(std::iter::repeat_n(TkType::BOdd, poisson(lambda, rng))),
        TkType::AOdd => out.extend(std::iter::repeat_n(TkType::AEven, k)),
        TkType::BOdd => {
            out.extend(std::iter::repeat_n(TkType::AEven, k - 1));
            out.push(TkType::BEven);
        }
    })
}

#[derive(Clone, Copy)]
enum OneOutType {
    AEven,
    BEven,
    /// Drawn by this many of its children.
    Odd(usize),
}

/// Multinomial counts of `trials` independent `Binomial(k, p)` marks,
/// returned for mark values `1..=k` (index 0 unused).
fn mark_counts<R: Rng + ?Sized>(trials: u64, pmf: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; pmf.len()];
    let mut left = trials;
    let mut mass = 1.0;
    for j in (1..pmf.len()).rev() {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let p = (pmf[j] / mass).clamp(0.0, 1.0);
        let x = Binomial::new(left, p).expect("valid binomial").sample(rng);
        counts[j] = x;
        left -= x;
        mass -= pmf[j];
    }
    counts
}

/// Radius-`r` ball at the root of the 1-out subgraph of the infinite
/// `(d, k)`-regular tree, grown as a multi-type branching process.
pub fn sample_one_out_ball<R: Rng + ?Sized>(
    k: usize,
    d: usize,
    r: usize,
    rng: &mut R,
) -> Result<RootedBipTree> {
    check_radius(k, r)?;
    if d < k + 1 {
        return Err(Error::Limit(format!("d = {d} must be at least k + 1 = {}", k + 1)));
    }
    let p = 1.0 / (d as f64 + 1.0);
    let first = Binomial::new(k as u64, p).expect("valid binomial");
    let pmf: Vec<f64> = (0..=k)
        .map(|j| {
            let log_choose: f64 = (0..j).map(|i| ((k - i) as f64 / (i + 1) as f64).ln()).sum();
            (log_choose + j as f64 * p.ln() + (k - j) as f64 * (-p).ln_1p()).exp()
        })
        .collect();
    let push_counts = |counts: &[u64], out: &mut Vec<OneOutType>| {
        for (j, &c) in counts.iter().enumerate().skip(1) {
            out.extend(std::iter::repeat_n(OneOutType::Odd(j), c as usize));
        }
    };
    grow(OneOutType::AEven, r, rng, |ty, rng, out| match ty {
        OneOutType::AEven => {
            out.push(OneOutType::Odd(first.sample(rng) as usize));
            push_counts(&mark_counts(d as u64 - 1, &pmf, rng), out);
        }
        OneOutType::BEven => push_counts(&mark_counts(d as u64, &pmf, rng), out),
        OneOutType::Odd(j) => {
            out.extend(std::iter::repeat_n(OneOutType::BEven, j));
            out.extend(std::iter::repeat_n(OneOutType::AEven, k - j));
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn star(c: usize, k: usize) -> RootedBipTree {
        let mut parent = vec![None];
        for _ in 0..c {
            let u = parent.len();
            parent.push(Some(0));
            for _ in 0..k {
                parent.push(Some(u));
            }
        }
        RootedBipTree::from_parents(parent).unwrap()
    }

    fn fact(c: usize) -> f64 {
        (1..=c).map(|i| i as f64).product()
    }

    #[test]
    fn ball_mass_examples() {
        assert_eq!(tk_ball_mass(&RootedBipTree::singleton(), 3).unwrap(), 1.0);
        for c in 1..8 {
            let e1 = (-1.0f64).exp() * c as f64 / fact(c);
            assert!((tk_ball_mass(&star(c, 1), 1).unwrap() - e1).abs() < 1e-14);
            let e2 = (-2.0f64).exp() * c as f64 * 2f64.powi(c as i32 - 1) / fact(c);
            assert!((tk_ball_mass(&star(c, 2), 2).unwrap() - e2).abs() < 1e-14);
        }
        assert!(tk_ball_mass(&star(2, 1), 2).is_err());
    }

    #[test]
    fn distribution_normalization() {
        let d0 = tk_distribution(2, 0, 5).unwrap();
        assert_eq!(d0.entries.len(), 1);
        assert!(d0.residual.abs() < 1e-15);
        let d = tk_distribution(1, 2, 41).unwrap();
        assert_eq!(d.entries.len(), 20);
        assert!(d.residual < 1e-6);
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_examples() {
        let mk = |pairs: &[(&str, f64)]| BallDistribution {
            entries: pairs.iter().map(|(c, p)| (c.to_string(), *p)).collect(),
            residual: 0.0,
            radius: 2,
            k: 1,
        };
        let a = mk(&[("A", 0.5), ("B", 0.5)]);
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        assert!((tv_distance(&a, &mk(&[("A", 1.0)])).unwrap() - 0.5).abs() < 1e-15);
        assert!((tv_distance(&a, &mk(&[("C", 1.0)])).unwrap() - 1.0).abs() < 1e-15);
        let mut other = a.clone();
        other.radius = 4;
        assert!(tv_distance(&a, &other).is_err());
    }

    #[test]
    fn samplers_respect_radius_and_validity() {
        let mut g = rng::master(3);
        for _ in 0..200 {
            let t = sample_tk_ball(2, 4, &mut g).unwrap();
            assert!(is_valid(&t, 2));
            assert_eq!(t.height(), 4);
            let t = sample_one_out_ball(2, 50, 4, &mut g).unwrap();
            assert!(is_valid(&t, 2));
            assert!(t.height() <= 4);
        }
        assert_eq!(sample_tk_ball(1, 0, &mut g).unwrap().len(), 1);
        assert_eq!(sample_one_out_ball(1, 10, 0, &mut g).unwrap().len(), 1);
        assert!(sample_tk_ball(1, 3, &mut g).is_err());
        assert!(sample_one_out_ball(2, 2, 2, &mut g).is_err());
    }

    #[test]
    fn poisson_mean() {
        let mut g = rng::master(5);
        let n = 20_000;
        let mean = (0..n).map(|_| poisson(3.0, &mut g) as f64).sum::<f64>() / n as f64;
        assert!((mean - 3.0).abs() < 0.05);
    }
}
