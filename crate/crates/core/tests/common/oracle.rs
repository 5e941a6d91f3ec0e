//! Reference implementations used only to check the library. They work on
//! plain row-major `Vec<Vec<f64>>` and share no code with the crate.
#![allow(dead_code)]

pub type Mat = Vec<Vec<f64>>;

pub fn transpose(a: &Mat) -> Mat {
    let (r, c) = (a.len(), a.first().map_or(0, Vec::len));
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn matvec(a: &Mat, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Cyclic two-sided Jacobi on a symmetric matrix. Returns eigenvalues sorted
/// descending and the matching eigenvectors as columns of the second result.
pub fn symmetric_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut a = a.clone();
    let mut v: Mat = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n).map(|r| order.iter().map(|&i| v[r][i]).collect()).collect();
    (vals, vecs)
}

/// Singular values (descending) and right singular vectors (columns) from the
/// eigen-decomposition of `AᵀA`.
pub fn svd(a: &Mat) -> (Vec<f64>, Mat) {
    let ata = matmul(&transpose(a), a);
    let (vals, v) = symmetric_eigen(&ata);
    (vals.iter().map(|x| x.max(0.0).sqrt()).collect(), v)
}

/// Same, but with `AAᵀ` so that both factors are available for wide and tall inputs.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let (mut s, _) = if rows >= cols { svd(a) } else { svd(&transpose(a)) };
    s.truncate(rows.min(cols));
    s
}

/// Leading left singular vector.
pub fn top_left_vector(a: &Mat) -> Vec<f64> {
    let aat = matmul(a, &transpose(a));
    let (_, u) = symmetric_eigen(&aat);
    u.iter().map(|row| row[0]).collect()
}

/// Pseudo-inverse solve via the spectral decomposition of `AᵀA`.
pub fn pinv_solve(a: &Mat, y: &[f64]) -> Vec<f64> {
    let (sv, v) = svd(a);
    let n = sv.len();
    let tol = sv.first().copied().unwrap_or(0.0) * 1e-12 * (a.len().max(n) as f64);
    let mut x = vec![0.0; n];
    for k in 0..n {
        if sv[k] <= tol {
            continue;
        }
        let vk: Vec<f64> = (0..n).map(|r| v[r][k]).collect();
        let avk = matvec(a, &vk);
        let coef: f64 = avk.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / (sv[k] * sv[k]);
        for r in 0..n {
            x[r] += coef * vk[r];
        }
    }
    x
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut aug: Mat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs())).unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        assert!(p.abs() > 1e-300, "singular matrix in oracle inverse");
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        aug[r][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// `(AᵀA + μI)⁻¹ Aᵀy`
pub fn normal_equations_solve(a: &Mat, y: &[f64], mu: f64) -> Vec<f64> {
    let at = transpose(a);
    let mut g = matmul(&at, a);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += mu;
    }
    matvec(&inverse(&g), &matvec(&at, y))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Support of size `k` minimizing the least-squares residual, by enumeration.
/// `atoms` are the dictionary columns.
pub fn best_support(atoms: &[Vec<f64>], y: &[f64], k: usize) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::INFINITY);
    for s in subsets(atoms.len(), k) {
        let sub = transpose(&s.iter().map(|&i| atoms[i].clone()).collect::<Mat>());
        let x = pinv_solve(&sub, y);
        let r: f64 = matvec(&sub, &x).iter().zip(y).map(|(p, q)| (q - p).powi(2)).sum();
        if r < best.1 {
            best = (s, r);
        }
    }
    best
}

/// `Σ_ij (Y − DX)_ij²` with explicit loops.
pub fn residual_energy(d: &Mat, x: &Mat, y: &Mat) -> f64 {
    let mut total = 0.0;
    for i in 0..y.len() {
        for j in 0..y[0].len() {
            let mut acc = 0.0;
            for k in 0..x.len() {
                acc += d[i][k] * x[k][j];
            }
            total += (y[i][j] - acc).powi(2);
        }
    }
    total
}

/// `10·log10(255² / MSE)` with explicit loops.
pub fn psnr(a: &Mat, b: &Mat) -> f64 {
    let mut se = 0.0;
    let mut count = 0usize;
    for (ra, rb) in a.iter().zip(b) {
        for (p, q) in ra.iter().zip(rb) {
            se += (p - q).powi(2);
            count += 1;
        }
    }
    10.0 * (255.0f64 * 255.0 / (se / count as f64)).log10()
}
