//! Tensor-product Gauss–Legendre quadrature.

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Tensor Gauss–Legendre grid over a box.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub domain: Vec<(f64, f64)>,
    pub orders: Vec<usize>,
    nodes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

impl QuadratureGrid {
    pub fn new(domain: &[(f64, f64)], orders: &[usize]) -> Result<QuadratureGrid> {
        if domain.len() != orders.len() {
            return Err(Error::Dimension("one quadrature order per axis".into()));
        }
        if orders.iter().any(|&o| o < 2) {
            return Err(Error::Invalid("quadrature order must be at least 2".into()));
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (&(a, b), &o) in domain.iter().zip(orders) {
            let (x, w) = gauss_legendre(o);
            let h = 0.5 * (b - a);
            nodes.push(x.iter().map(|t| a + h * (t + 1.0)).collect());
            weights.push(w.iter().map(|t| t * h).collect());
        }
        Ok(QuadratureGrid { domain: domain.to_vec(), orders: orders.to_vec(), nodes, weights })
    }

    /// Same order on every axis.
    pub fn uniform(domain: &[(f64, f64)], order: usize) -> Result<QuadratureGrid> {
        QuadratureGrid::new(domain, &vec![order; domain.len()])
    }

    pub fn len(&self) -> usize {
        self.orders.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node and weight of the flat index `i` (last axis fastest).
    pub fn node(&self, mut i: usize) -> (Vec<f64>, f64) {
        let d = self.orders.len();
        let mut p = vec![0.0; d];
        let mut w = 1.0;
        for ax in (0..d).rev() {
            let k = i % self.orders[ax];
            i /= self.orders[ax];
            p[ax] = self.nodes[ax][k];
            w *= self.weights[ax][k];
        }
        (p, w)
    }

    pub fn nodes(&self) -> Vec<(Vec<f64>, f64)> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// `∫ f` with a fixed pairwise summation order.
    pub fn integrate<F: FnMut(&[f64]) -> Result<f64>>(&self, mut f: F) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (p, w) = self.node(i);
            terms.push(w * f(&p)?);
        }
        Ok(pairwise_sum(&terms))
    }

    /// Integrate several integrands that share the per-node work.
    pub fn integrate_many<F: FnMut(&[f64]) -> Result<Vec<f64>>>(&self, k: usize, mut f: F) -> Result<Vec<f64>> {
        let mut terms = vec![Vec::with_capacity(self.len()); k];
        for i in 0..self.len() {
            let (p, w) = self.node(i);
            let v = f(&p)?;
            for (t, x) in terms.iter_mut().zip(v) {
                t.push(w * x);
            }
        }
        Ok(terms.iter().map(|t| pairwise_sum(t)).collect())
    }
}

pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Adaptive Simpson rule on `[a, b]`, used for one-dimensional reference integrals.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials() {
        for n in [2, 3, 8, 32, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            // exact up to degree 2n-1
            let deg = 2 * n - 2;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((s - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={}", n);
        }
    }

    #[test]
    fn tensor_grid_volume_and_simpson() {
        let q = QuadratureGrid::uniform(&[(0.0, 2.0), (-1.0, 0.5)], 5).unwrap();
        let v = q.integrate(|_| Ok(1.0)).unwrap();
        assert!((v - 3.0).abs() < 1e-14);
        let s = adaptive_simpson(&|x: f64| (1.0 + x.cos().powi(2)).sqrt(), 0.0, 1.0, 1e-13);
        let q1 = QuadratureGrid::uniform(&[(0.0, 1.0)], 64).unwrap();
        let g = q1.integrate(|p| Ok((1.0 + p[0].cos().powi(2)).sqrt())).unwrap();
        assert!((s - g).abs() < 1e-12);
    }
}
