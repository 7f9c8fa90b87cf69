//! Truncated multivariate Taylor series.
//!
//! A [`Jet`] holds the Taylor coefficients `c[α] = ∂^α f / α!` of a function of
//! `nvars` variables up to a total order. Coefficients are stored in graded
//! order (constant term first). Arithmetic and the elementary functions act on
//! the whole series, so pushing jets through an [`crate::exprcore::Tape`] gives
//! exact derivatives up to the truncation order.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::exprcore::Scalar;

#[derive(Debug)]
pub struct JetLayout {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    degree_start: Vec<usize>,
    // (i, j, k) with exps[i] + exps[j] = exps[k], grouped by total degree of k
    mul: Vec<(u32, u32, u32)>,
    mul_end: Vec<usize>,
    // per variable: (src, dst, factor)
    partials: Vec<Vec<(usize, usize, f64)>>,
}

impl JetLayout {
    fn build(nvars: usize, order: usize) -> JetLayout {
        let mut exps: Vec<Vec<u8>> = vec![vec![0; nvars]];
        let mut degree_start = vec![0usize];
        let mut prev: Vec<Vec<u8>> = vec![vec![0; nvars]];
        for _deg in 1..=order {
            degree_start.push(exps.len());
            let mut next: Vec<Vec<u8>> = Vec::new();
            for e in &prev {
                // extend only at or after the last nonzero slot to avoid duplicates
                let last = e.iter().rposition(|&x| x > 0).unwrap_or(0);
                for v in last..nvars {
                    let mut f = e.clone();
                    f[v] += 1;
                    next.push(f);
                }
            }
            next.sort_by(|a, b| b.cmp(a));
            exps.extend(next.iter().cloned());
            prev = next;
        }
        degree_start.push(exps.len());
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let deg = |e: &Vec<u8>| e.iter().map(|&x| x as usize).sum::<usize>();

        let mut mul_by_deg: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); order + 1];
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                let d = deg(a) + deg(b);
                if d > order {
                    continue;
                }
                let s: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul_by_deg[d].push((i as u32, j as u32, index[&s] as u32));
            }
        }
        let mut mul = Vec::new();
        let mut mul_end = Vec::new();
        for group in mul_by_deg {
            mul.extend(group);
            mul_end.push(mul.len());
        }

        let mut partials = vec![Vec::new(); nvars];
        for (v, list) in partials.iter_mut().enumerate() {
            for (i, e) in exps.iter().enumerate() {
                if e[v] > 0 {
                    let mut f = e.clone();
                    f[v] -= 1;
                    list.push((i, index[&f], e[v] as f64));
                }
            }
        }
        JetLayout { nvars, order, exps, index, degree_start, mul, mul_end, partials }
    }

    /// Shared layout for the given shape; layouts are cached process-wide.
    pub fn shared(nvars: usize, order: usize) -> Arc<JetLayout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetLayout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetLayout::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Index of the monomial with the given exponents.
    pub fn monomial(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    fn n_upto(&self, ord: usize) -> usize {
        self.degree_start[ord + 1]
    }
}

/// Truncated Taylor series. `ord` is the highest order still trustworthy.
#[derive(Clone, Debug)]
pub struct Jet {
    layout: Arc<JetLayout>,
    c: Vec<f64>,
    ord: usize,
}

impl Jet {
    pub fn constant(layout: &Arc<JetLayout>, v: f64) -> Jet {
        let mut c = vec![0.0; layout.len()];
        c[0] = v;
        Jet { layout: layout.clone(), c, ord: layout.order }
    }

    /// The coordinate function `x_var` shifted to take `value` at the expansion point.
    pub fn variable(layout: &Arc<JetLayout>, var: usize, value: f64) -> Jet {
        let mut j = Jet::constant(layout, value);
        if layout.order > 0 {
            let mut e = vec![0u8; layout.nvars];
            e[var] = 1;
            j.c[layout.index[&e]] = 1.0;
        }
        j
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn order(&self) -> usize {
        self.ord
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Partial derivative `∂^α f` at the expansion point.
    pub fn derivative(&self, alpha: &[u8]) -> f64 {
        let total: usize = alpha.iter().map(|&a| a as usize).sum();
        assert!(total <= self.ord, "derivative of order {} from a jet of order {}", total, self.ord);
        let fact: f64 = alpha.iter().map(|&a| (1..=a as u64).product::<u64>() as f64).product();
        self.c[self.layout.index[alpha]] * fact
    }

    /// First partial `∂_v f` at the expansion point.
    pub fn d1(&self, v: usize) -> f64 {
        let mut e = vec![0u8; self.layout.nvars];
        e[v] = 1;
        self.derivative(&e)
    }

    /// Series of `∂_v f`; valid to one order less.
    pub fn partial(&self, v: usize) -> Jet {
        assert!(self.ord > 0, "cannot differentiate an order-0 jet");
        let mut c = vec![0.0; self.c.len()];
        for &(src, dst, f) in &self.layout.partials[v] {
            c[dst] += f * self.c[src];
        }
        let ord = self.ord - 1;
        let keep = self.layout.n_upto(ord);
        for x in c.iter_mut().skip(keep) {
            *x = 0.0;
        }
        Jet { layout: self.layout.clone(), c, ord }
    }

    /// Lower the trusted order and clear the coefficients above it.
    pub fn truncate(&self, ord: usize) -> Jet {
        let ord = ord.min(self.ord);
        let mut c = self.c.clone();
        let keep = self.layout.n_upto(ord);
        for x in c.iter_mut().skip(keep) {
            *x = 0.0;
        }
        Jet { layout: self.layout.clone(), c, ord }
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.layout, &other.layout));
        let ord = self.ord.min(other.ord);
        let n = self.layout.n_upto(ord);
        let mut c = vec![0.0; self.c.len()];
        for i in 0..n {
            c[i] = f(self.c[i], other.c[i]);
        }
        Jet { layout: self.layout.clone(), c, ord }
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        let ord = self.ord.min(other.ord);
        let mut c = vec![0.0; self.c.len()];
        let end = self.layout.mul_end[ord];
        for &(i, j, k) in &self.layout.mul[..end] {
            c[k as usize] += self.c[i as usize] * other.c[j as usize];
        }
        Jet { layout: self.layout.clone(), c, ord }
    }

    /// `Σ_k coeffs[k] h^k` where `h = self − self(0)`.
    fn compose(&self, coeffs: &[f64]) -> Jet {
        let ord = self.ord;
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut r = Jet::constant(&self.layout, coeffs[ord]);
        r.ord = ord;
        for k in (0..ord).rev() {
            r = r.mul_jet(&h);
            r.c[0] += coeffs[k];
        }
        r
    }
}

fn binom_half(k: usize) -> f64 {
    // binomial(1/2, k)
    let mut b = 1.0;
    for i in 0..k {
        b *= (0.5 - i as f64) / (i as f64 + 1.0);
    }
    b
}

impl Scalar for Jet {
    fn constant_like(&self, c: f64) -> Self {
        Jet::constant(&self.layout, c)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn scale(&self, s: f64) -> Self {
        let mut j = self.clone();
        for x in j.c.iter_mut() {
            *x *= s;
        }
        j
    }
    fn sin(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [s, c, -s, -c];
        let co: Vec<f64> = (0..=self.ord).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&co)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [c, -s, -c, s];
        let co: Vec<f64> = (0..=self.ord).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&co)
    }
    fn tan(&self) -> Self {
        self.sin() / self.cos()
    }
    fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let co: Vec<f64> = (0..=self.ord).map(|k| e / factorial(k)).collect();
        self.compose(&co)
    }
    fn ln(&self) -> Self {
        let x0 = self.c[0];
        let mut co = vec![x0.ln()];
        for k in 1..=self.ord {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            co.push(sign / (k as f64 * x0.powi(k as i32)));
        }
        self.compose(&co)
    }
    fn sqrt(&self) -> Self {
        let x0 = self.c[0];
        let s = x0.sqrt();
        let co: Vec<f64> = (0..=self.ord).map(|k| s * binom_half(k) / x0.powi(k as i32)).collect();
        self.compose(&co)
    }
    fn atan(&self) -> Self {
        // d/dx atan = 1/(1+x^2); expand 1/q(h) with q = q0 + q1 h + q2 h^2
        let x0 = self.c[0];
        let (q0, q1, q2) = (1.0 + x0 * x0, 2.0 * x0, 1.0);
        let mut r = vec![0.0; self.ord.max(1)];
        for k in 0..r.len() {
            let mut v = if k == 0 { 1.0 } else { 0.0 };
            if k >= 1 {
                v -= q1 * r[k - 1];
            }
            if k >= 2 {
                v -= q2 * r[k - 2];
            }
            r[k] = v / q0;
        }
        let mut co = vec![x0.atan()];
        for k in 1..=self.ord {
            co.push(r[k - 1] / k as f64);
        }
        self.compose(&co)
    }
    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.recip().powi(-n);
        }
        let mut out = Jet::constant(&self.layout, 1.0);
        out.ord = self.ord;
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                out = out.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        out
    }
    fn recip(&self) -> Self {
        let x0 = self.c[0];
        let co: Vec<f64> = (0..=self.ord)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / x0.powi(k as i32 + 1))
            .collect();
        self.compose(&co)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k as u64).product::<u64>() as f64
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        self.zip(&o, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self.zip(&o, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        self.mul_jet(&o)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self.mul_jet(&o.recip())
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a + b)
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a - b)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        self.mul_jet(o)
    }
}
