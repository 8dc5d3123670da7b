//! Dense vector helpers over `&[f64]`.

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn is_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Orthonormal basis of the null space of the `rows` (each of length `dim`),
/// by Gaussian elimination with partial pivoting.
pub fn null_space(rows: &[Vec<f64>], dim: usize, tol: f64) -> Vec<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for col in 0..dim {
        if r == a.len() {
            break;
        }
        let (best, best_val) = (r..a.len())
            .map(|i| (i, a[i][col].abs()))
            .fold((r, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best_val <= tol {
            continue;
        }
        a.swap(r, best);
        let p = a[r][col];
        for v in a[r].iter_mut() {
            *v /= p;
        }
        let pivot = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            let f = row[col];
            if i != r && f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot) {
                    *v -= f * p;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    let free: Vec<usize> = (0..dim).filter(|c| !pivots.contains(c)).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(free.len());
    for &fc in &free {
        let mut v = vec![0.0; dim];
        v[fc] = 1.0;
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[row][fc];
        }
        // Gram-Schmidt against earlier basis vectors.
        for b in &basis {
            let proj = dot(&v, b);
            axpy(-proj, b, &mut v);
        }
        let n = norm(&v);
        if n > tol {
            basis.push(scale(1.0 / n, &v));
        }
    }
    basis
}
