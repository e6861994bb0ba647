//! Arithmetic in small finite fields `F_q`, `q = p^e ≤ 256`, plus reduced row
//! echelon forms over them.
//!
//! Elements are encoded as integers `0..q` whose base-`p` digits are the
//! coefficients of a polynomial reduced modulo a fixed irreducible of degree
//! `e`. Everything is table driven.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct FiniteField {
    q: usize,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
}

fn prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q.is_multiple_of(*d))?;
    let mut rest = q;
    let mut e = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        e += 1;
    }
    (rest == 1).then_some((p, e))
}

/// Coefficient vectors (lowest degree first) over `F_p`.
fn poly_mod(mut a: Vec<u32>, m: &[u32], p: u32) -> Vec<u32> {
    let dm = m.len() - 1;
    let lead_inv = mod_inv(m[dm], p);
    while a.len() > dm {
        let top = *a.last().unwrap();
        if top != 0 {
            let f = top * lead_inv % p;
            let shift = a.len() - 1 - dm;
            for (i, &c) in m.iter().enumerate() {
                a[shift + i] = (a[shift + i] + p * p - f * c % p) % p;
            }
        }
        a.pop();
    }
    a
}

fn mod_inv(a: u32, p: u32) -> u32 {
    (1..p).find(|x| a * x % p == 1).expect("nonzero element of a prime field")
}

fn digits(mut x: u32, p: u32, len: usize) -> Vec<u32> {
    (0..len)
        .map(|_| {
            let d = x % p;
            x /= p;
            d
        })
        .collect()
}

fn is_irreducible(f: &[u32], p: u32) -> bool {
    let deg = f.len() - 1;
    for dg in 1..=deg / 2 {
        // every monic polynomial of degree dg
        for low in 0..p.pow(dg as u32) {
            let mut g = digits(low, p, dg);
            g.push(1);
            if poly_mod(f.to_vec(), &g, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

impl FiniteField {
    pub fn new(q: u32) -> Result<Self> {
        let (p, e) = prime_power(q).ok_or(Error::NotPrimePower(q))?;
        if q > 256 {
            return Err(Error::Incidence(format!("field order {q} exceeds 256")));
        }
        let modulus: Vec<u32> = if e == 1 {
            vec![0, 1]
        } else {
            (0..p.pow(e))
                .map(|low| {
                    let mut f = digits(low, p, e as usize);
                    f.push(1);
                    f
                })
                .find(|f| is_irreducible(f, p))
                .expect("an irreducible polynomial exists in every degree")
        };
        let qs = q as usize;
        let e = e as usize;
        let encode = |c: &[u32]| c.iter().rev().fold(0u32, |acc, &d| acc * p + d) as u8;
        let mut add = vec![0u8; qs * qs];
        let mut mul = vec![0u8; qs * qs];
        for a in 0..q {
            let da = digits(a, p, e);
            for b in 0..q {
                let db = digits(b, p, e);
                let s: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[a as usize * qs + b as usize] = encode(&s);
                let mut prod = vec![0u32; 2 * e - 1];
                for (i, x) in da.iter().enumerate() {
                    for (j, y) in db.iter().enumerate() {
                        prod[i + j] = (prod[i + j] + x * y) % p;
                    }
                }
                let mut r = if e == 1 { vec![prod[0] % p] } else { poly_mod(prod, &modulus, p) };
                r.resize(e, 0);
                mul[a as usize * qs + b as usize] = encode(&r);
            }
        }
        let neg = (0..qs).map(|a| (0..qs).find(|&b| add[a * qs + b] == 0).unwrap() as u8).collect();
        let inv =
            (0..qs)
                .map(|a| {
                    if a == 0 {
                        0
                    } else {
                        (1..qs).find(|&b| mul[a * qs + b] == 1).unwrap() as u8
                    }
                })
                .collect();
        Ok(Self { q: qs, add, mul, neg, inv })
    }

    pub fn order(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn add(&self, a: u8, b: u8) -> u8 {
        self.add[a as usize * self.q + b as usize]
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        self.mul[a as usize * self.q + b as usize]
    }

    #[inline]
    pub fn sub(&self, a: u8, b: u8) -> u8 {
        self.add(a, self.neg[b as usize])
    }

    #[inline]
    pub fn inv(&self, a: u8) -> u8 {
        debug_assert!(a != 0);
        self.inv[a as usize]
    }

    /// Reduced row echelon form of a row-major `rows × cols` matrix with the
    /// zero rows dropped. The row count of the result is the rank.
    pub fn rref(&self, mat: &[u8], rows: usize, cols: usize) -> Vec<u8> {
        let mut a = mat.to_vec();
        let mut rank = 0;
        for c in 0..cols {
            let Some(piv) = (rank..rows).find(|&r| a[r * cols + c] != 0) else {
                continue;
            };
            for j in 0..cols {
                a.swap(rank * cols + j, piv * cols + j);
            }
            let s = self.inv(a[rank * cols + c]);
            for j in 0..cols {
                a[rank * cols + j] = self.mul(a[rank * cols + j], s);
            }
            for r in 0..rows {
                if r != rank && a[r * cols + c] != 0 {
                    let f = a[r * cols + c];
                    for j in 0..cols {
                        let t = self.mul(f, a[rank * cols + j]);
                        a[r * cols + j] = self.sub(a[r * cols + j], t);
                    }
                }
            }
            rank += 1;
            if rank == rows {
                break;
            }
        }
        a.truncate(rank * cols);
        a
    }

    /// All `dim`-dimensional subspaces of `F_q^n` as flattened RREF matrices,
    /// sorted lexicographically by entries.
    pub fn subspaces(&self, n: usize, dim: usize) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        for pivots in itertools::Itertools::combinations(0..n, dim) {
            let free: Vec<(usize, usize)> = (0..dim)
                .flat_map(|i| {
                    let pivots = &pivots;
                    (pivots[i] + 1..n).filter(move |j| !pivots.contains(j)).map(move |j| (i, j))
                })
                .collect();
            let mut counter = vec![0u8; free.len()];
            loop {
                let mut m = vec![0u8; dim * n];
                for (i, &p) in pivots.iter().enumerate() {
                    m[i * n + p] = 1;
                }
                for (&(i, j), &val) in free.iter().zip(&counter) {
                    m[i * n + j] = val;
                }
                out.push(m);
                // odometer increment
                let mut pos = 0;
                loop {
                    if pos == counter.len() {
                        break;
                    }
                    counter[pos] += 1;
                    if (counter[pos] as usize) < self.q {
                        break;
                    }
                    counter[pos] = 0;
                    pos += 1;
                }
                if pos == counter.len() {
                    break;
                }
            }
        }
        out.sort();
        out
    }
}

/// Gaussian binomial coefficient `[n choose k]_q`.
pub fn gaussian_binomial(q: u64, n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..k {
        num *= (q as u128).pow((n - i) as u32) - 1;
        den *= (q as u128).pow((i + 1) as u32) - 1;
    }
    (num / den) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_prime_powers() {
        for q in [0, 1, 6, 10, 12] {
            assert!(FiniteField::new(q).is_err(), "q={q}");
        }
    }

    #[test]
    fn field_axioms_hold_for_small_orders() {
        for q in [2u32, 3, 4, 5, 7, 8, 9] {
            let f = FiniteField::new(q).unwrap();
            let q = q as u8;
            for a in 0..q {
                assert_eq!(f.add(a, 0), a);
                assert_eq!(f.mul(a, 1), a);
                if a != 0 {
                    assert_eq!(f.mul(a, f.inv(a)), 1);
                }
                for b in 0..q {
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for c in 0..q {
                        let lhs = f.mul(a, f.add(b, c));
                        let rhs = f.add(f.mul(a, b), f.mul(a, c));
                        assert_eq!(lhs, rhs, "q={q} distributivity");
                    }
                }
            }
        }
    }

    #[test]
    fn subspace_counts_match_gaussian_binomials() {
        for (q, n, k) in [(2u32, 4usize, 1usize), (2, 4, 2), (3, 4, 2), (4, 3, 1), (2, 5, 2)] {
            let f = FiniteField::new(q).unwrap();
            let count = f.subspaces(n, k).len() as u64;
            assert_eq!(count, gaussian_binomial(q as u64, n as u64, k as u64));
        }
        assert_eq!(gaussian_binomial(2, 4, 1), 15);
        assert_eq!(gaussian_binomial(2, 4, 2), 35);
    }

    #[test]
    fn rref_is_idempotent_and_reports_rank() {
        let f = FiniteField::new(3).unwrap();
        let m = [1, 2, 0, 2, 1, 0, 0, 0, 1];
        let r = f.rref(&m, 3, 3);
        assert_eq!(r.len() / 3, 2);
        assert_eq!(f.rref(&r, 2, 3), r);
    }
}
