//! Small dense linear algebra over any [`Scalar`], plus numeric rank via SVD.

use nalgebra::DMatrix;

use crate::exprcore::Scalar;

/// Row-major square or rectangular matrix of scalars.
pub type Mat<T> = Vec<Vec<T>>;

/// Relative singular-value threshold used for every numeric rank decision.
pub const RANK_RTOL: f64 = 1e-8;

pub fn det<T: Scalar>(m: &Mat<T>) -> T {
    let n = m.len();
    if n == 0 {
        panic!("determinant of an empty matrix needs a prototype; use det_or");
    }
    let mut a = m.clone();
    let mut sign = 1.0;
    let mut out = a[0][0].constant_like(1.0);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].value().abs().partial_cmp(&a[j][col].value().abs()).unwrap())
            .unwrap();
        if a[piv][col].value() == 0.0 {
            return a[0][0].constant_like(0.0);
        }
        if piv != col {
            a.swap(piv, col);
            sign = -sign;
        }
        let p = a[col][col].clone();
        out = out * p.clone();
        let pinv = p.recip();
        for r in col + 1..n {
            let f = a[r][col].clone() * pinv.clone();
            for c in col + 1..n {
                let t = a[r][c].clone() - f.clone() * a[col][c].clone();
                a[r][c] = t;
            }
        }
    }
    out.scale(sign)
}

/// Solve `m x = b` for several right-hand sides (columns of `b`).
pub fn solve<T: Scalar>(m: &Mat<T>, b: &Mat<T>) -> Option<Mat<T>> {
    let n = m.len();
    let k = b.first().map(|r| r.len()).unwrap_or(0);
    let mut a: Mat<T> = m.clone();
    let mut x: Mat<T> = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].value().abs().partial_cmp(&a[j][col].value().abs()).unwrap())
            .unwrap();
        if a[piv][col].value().abs() < 1e-300 {
            return None;
        }
        a.swap(piv, col);
        x.swap(piv, col);
        let pinv = a[col][col].recip();
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col].clone() * pinv.clone();
            for c in col..n {
                let t = a[r][c].clone() - f.clone() * a[col][c].clone();
                a[r][c] = t;
            }
            for c in 0..k {
                let t = x[r][c].clone() - f.clone() * x[col][c].clone();
                x[r][c] = t;
            }
        }
    }
    for (r, row) in x.iter_mut().enumerate() {
        let pinv = a[r][r].recip();
        for v in row.iter_mut() {
            *v = v.clone() * pinv.clone();
        }
    }
    Some(x)
}

pub fn inverse<T: Scalar>(m: &Mat<T>) -> Option<Mat<T>> {
    let n = m.len();
    let one = m[0][0].constant_like(1.0);
    let zero = m[0][0].constant_like(0.0);
    let id: Mat<T> =
        (0..n).map(|i| (0..n).map(|j| if i == j { one.clone() } else { zero.clone() }).collect()).collect();
    solve(m, &id)
}

pub fn transpose<T: Clone>(m: &Mat<T>) -> Mat<T> {
    if m.is_empty() {
        return vec![];
    }
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn matmul<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    let inner = b.len();
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| {
                    let mut s = row[0].clone() * b[0][j].clone();
                    for k in 1..inner {
                        s = s + row[k].clone() * b[k][j].clone();
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = a[0].clone() * b[0].clone();
    for i in 1..a.len() {
        s = s + a[i].clone() * b[i].clone();
    }
    s
}

pub fn to_dmatrix(m: &Mat<f64>) -> DMatrix<f64> {
    let r = m.len();
    let c = if r == 0 { 0 } else { m[0].len() };
    DMatrix::from_fn(r, c, |i, j| m[i][j])
}

pub fn singular_values(m: &Mat<f64>) -> Vec<f64> {
    if m.is_empty() || m[0].is_empty() {
        return vec![];
    }
    let mut s: Vec<f64> = to_dmatrix(m).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Numeric rank with threshold `σ > rtol·σ_max`.
pub fn rank_rel(m: &Mat<f64>, rtol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        None => 0,
        Some(&smax) if smax == 0.0 => 0,
        Some(&smax) => s.iter().filter(|&&x| x > rtol * smax).count(),
    }
}

/// Numeric rank with an absolute threshold, for matrices with O(1) entries.
pub fn rank_abs(m: &Mat<f64>, atol: f64) -> usize {
    singular_values(m).iter().filter(|&&x| x > atol).count()
}

/// Least-squares residual norm of `b` against the column span of `cols`.
pub fn lsq_residual(cols: &[Vec<f64>], b: &[f64]) -> f64 {
    if cols.is_empty() {
        return b.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let n = b.len();
    let a = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&rhs, 1e-12).expect("svd solve");
    (a * x - rhs).norm()
}
