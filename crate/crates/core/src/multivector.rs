//! Multi-indices, weights and sparse m-vectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exprcore::Scalar;
use crate::linalg::{self, Mat};

/// Strictly increasing frame indices, stored 0-based.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(idx: Vec<usize>) -> Result<MultiIndex> {
        if idx.is_empty() {
            return Err(Error::Invalid("multi-index must be nonempty".into()));
        }
        if idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!("multi-index {:?} is not strictly increasing", idx)));
        }
        Ok(MultiIndex(idx))
    }

    /// Build from 1-based indices as written in the literature.
    pub fn one_based(idx: &[usize]) -> Result<MultiIndex> {
        if idx.contains(&0) {
            return Err(Error::Invalid("1-based multi-index contains 0".into()));
        }
        MultiIndex::new(idx.iter().map(|i| i - 1).collect())
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Serialized 1-based.
impl Serialize for MultiIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_one_based().serialize(s)
    }
}

/// All m-subsets of `0..n` in lexicographic order.
pub fn all_indices(n: usize, m: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    if m == 0 || m > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..m).collect();
    loop {
        out.push(MultiIndex(cur.clone()));
        let mut i = m;
        while i > 0 && cur[i - 1] == n - m + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..m {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Degree of each frame field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightVector(pub Vec<u32>);

impl WeightVector {
    pub fn new(w: Vec<u32>) -> Result<WeightVector> {
        if w.is_empty() || w[0] != 1 {
            return Err(Error::Invalid("weights must start at degree 1".into()));
        }
        for p in w.windows(2) {
            if p[1] < p[0] || p[1] > p[0] + 1 {
                return Err(Error::Invalid(format!("weights {:?} must be nondecreasing without gaps", w)));
            }
        }
        Ok(WeightVector(w))
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn step(&self) -> u32 {
        *self.0.last().unwrap()
    }

    pub fn growth(&self) -> GrowthVector {
        let s = self.step();
        GrowthVector((1..=s).map(|i| self.0.iter().filter(|&&w| w <= i).count()).collect())
    }
}

/// Dimensions `(n_1, …, n_s)` of the flag.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthVector(pub Vec<usize>);

impl GrowthVector {
    pub fn new(g: Vec<usize>) -> Result<GrowthVector> {
        if g.is_empty() || g[0] == 0 || g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!("growth vector {:?} must be strictly increasing", g)));
        }
        Ok(GrowthVector(g))
    }

    pub fn n(&self) -> usize {
        *self.0.last().unwrap()
    }

    pub fn step(&self) -> usize {
        self.0.len()
    }

    /// `n_i` with `n_0 = 0`, 1-based layer index.
    pub fn n_at(&self, i: usize) -> usize {
        if i == 0 {
            0
        } else {
            self.0[(i - 1).min(self.0.len() - 1)]
        }
    }

    /// Homogeneous dimension `Σ i (n_i − n_{i−1})`.
    pub fn q(&self) -> usize {
        (1..=self.step()).map(|i| i * (self.n_at(i) - self.n_at(i - 1))).sum()
    }

    pub fn weights(&self) -> WeightVector {
        let mut w = Vec::new();
        for i in 1..=self.step() {
            for _ in 0..self.n_at(i) - self.n_at(i - 1) {
                w.push(i as u32);
            }
        }
        WeightVector(w)
    }
}

pub fn degree_of_index(j: &MultiIndex, w: &WeightVector) -> u32 {
    j.0.iter().map(|&i| w.0[i]).sum()
}

/// Largest degree of an m-vector: the m largest weights summed.
pub fn d_max(m: usize, w: &WeightVector) -> u32 {
    let mut v = w.0.clone();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v.iter().take(m).sum()
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

fn dim_split(g: &GrowthVector, m: usize, d: usize) -> (u128, u128) {
    let layers: Vec<usize> = (1..=g.step()).map(|i| g.n_at(i) - g.n_at(i - 1)).collect();
    let mut leq = 0u128;
    let mut gt = 0u128;
    // enumerate (k_1, …, k_s) with Σ k_i = m and k_i ≤ layer size
    fn rec(layers: &[usize], i: usize, left: usize, deg: usize, prod: u128, d: usize, leq: &mut u128, gt: &mut u128) {
        if i == layers.len() {
            if left == 0 {
                if deg <= d {
                    *leq += prod;
                } else {
                    *gt += prod;
                }
            }
            return;
        }
        for k in 0..=left.min(layers[i]) {
            rec(layers, i + 1, left - k, deg + (i + 1) * k, prod * binom(layers[i], k), d, leq, gt);
        }
    }
    rec(&layers, 0, m, 0, 1, d, &mut leq, &mut gt);
    (leq, gt)
}

/// Dimension of the span of m-vectors of degree at most `d`.
pub fn dim_leq(g: &GrowthVector, m: usize, d: usize) -> u128 {
    dim_split(g, m, d).0
}

/// Dimension of the span of m-vectors of degree larger than `d`.
pub fn dim_gt(g: &GrowthVector, m: usize, d: usize) -> u128 {
    dim_split(g, m, d).1
}

/// Sparse m-vector `Σ λ_J X_J`.
#[derive(Clone, Debug, PartialEq)]
pub struct MVector {
    pub m: usize,
    pub terms: BTreeMap<MultiIndex, f64>,
}

/// Coefficients below this magnitude are not stored.
pub const SPARSE_EPS: f64 = 1e-300;

impl MVector {
    pub fn zero(m: usize) -> MVector {
        MVector { m, terms: BTreeMap::new() }
    }

    pub fn from_terms(m: usize, terms: impl IntoIterator<Item = (MultiIndex, f64)>) -> Result<MVector> {
        let mut out = MVector::zero(m);
        for (j, c) in terms {
            if j.len() != m {
                return Err(Error::Dimension(format!("index {:?} has order {} not {}", j.to_one_based(), j.len(), m)));
            }
            out.add_term(j, c);
        }
        Ok(out)
    }

    pub fn add_term(&mut self, j: MultiIndex, c: f64) {
        let e = self.terms.entry(j.clone()).or_insert(0.0);
        *e += c;
        if e.abs() <= SPARSE_EPS {
            self.terms.remove(&j);
        }
    }

    pub fn coeff(&self, j: &MultiIndex) -> f64 {
        self.terms.get(j).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, a: f64) -> MVector {
        let mut out = MVector::zero(self.m);
        for (j, c) in &self.terms {
            out.add_term(j.clone(), a * c);
        }
        out
    }

    pub fn add(&self, other: &MVector) -> MVector {
        let mut out = self.clone();
        for (j, c) in &other.terms {
            out.add_term(j.clone(), *c);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Euclidean norm of the coefficients (the norm for an orthonormal frame).
    pub fn norm(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|(j, c)| serde_json::json!({"J": j.to_one_based(), "c": c}))
            .collect();
        serde_json::json!({"m": self.m, "terms": terms})
    }

    pub fn from_json(v: &serde_json::Value) -> Result<MVector> {
        #[derive(Deserialize)]
        struct Term {
            #[serde(rename = "J")]
            j: Vec<usize>,
            c: f64,
        }
        #[derive(Deserialize)]
        struct Raw {
            m: usize,
            terms: Vec<Term>,
        }
        let raw: Raw = serde_json::from_value(v.clone())
            .map_err(|e| Error::Spec { field: "mvector".into(), msg: e.to_string() })?;
        let mut terms = Vec::new();
        for t in raw.terms {
            terms.push((MultiIndex::one_based(&t.j)?, t.c));
        }
        MVector::from_terms(raw.m, terms)
    }
}

/// Degree of a nonzero m-vector, ignoring coefficients below `eps · max|λ|`.
pub fn mvector_degree(x: &MVector, w: &WeightVector, eps: f64) -> Result<u32> {
    let mx = x.max_abs();
    if mx == 0.0 {
        return Err(Error::ZeroMVector);
    }
    Ok(x.terms
        .iter()
        .filter(|(_, c)| c.abs() > eps * mx)
        .map(|(j, _)| degree_of_index(j, w))
        .max()
        .unwrap())
}

pub fn project_degree_eq(x: &MVector, d: u32, w: &WeightVector) -> MVector {
    MVector {
        m: x.m,
        terms: x.terms.iter().filter(|(j, _)| degree_of_index(j, w) == d).map(|(j, c)| (j.clone(), *c)).collect(),
    }
}

pub fn project_degree_gt(x: &MVector, d: u32, w: &WeightVector) -> MVector {
    MVector {
        m: x.m,
        terms: x.terms.iter().filter(|(j, _)| degree_of_index(j, w) > d).map(|(j, c)| (j.clone(), *c)).collect(),
    }
}

pub fn project_degree_lt(x: &MVector, d: u32, w: &WeightVector) -> MVector {
    MVector {
        m: x.m,
        terms: x.terms.iter().filter(|(j, _)| degree_of_index(j, w) < d).map(|(j, c)| (j.clone(), *c)).collect(),
    }
}

/// Determinant of the rows `j` of an n×m matrix.
pub fn minor<T: Scalar>(cols_by_row: &Mat<T>, j: &MultiIndex) -> T {
    let sub: Mat<T> = j.0.iter().map(|&r| cols_by_row[r].clone()).collect();
    linalg::det(&sub)
}

/// Wedge of the m columns of an n×m coefficient matrix (rows = frame index).
pub fn wedge_from_columns(mat: &Mat<f64>) -> Result<MVector> {
    let n = mat.len();
    let m = if n == 0 { 0 } else { mat[0].len() };
    if m == 0 || m > n {
        return Err(Error::Dimension(format!("{}×{} coefficient matrix", n, m)));
    }
    if linalg::rank_rel(mat, linalg::RANK_RTOL) < m {
        return Err(Error::RankDeficient(format!("columns of the {}×{} matrix are dependent", n, m)));
    }
    let mut out = MVector::zero(m);
    for j in all_indices(n, m) {
        let c = minor(mat, &j);
        out.add_term(j, c);
    }
    Ok(out)
}

/// `⟨X, Y⟩` induced on m-vectors by the vector Gram matrix `g` of the frame.
pub fn gram_inner(x: &MVector, y: &MVector, g: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for (j, a) in &x.terms {
        for (k, b) in &y.terms {
            let sub: Mat<f64> = j.0.iter().map(|&r| k.0.iter().map(|&c| g[r][c]).collect()).collect();
            s += a * b * linalg::det(&sub);
        }
    }
    s
}
