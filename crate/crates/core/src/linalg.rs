//! Small dense helpers: 2×2 matrices, cyclic tridiagonal solves and
//! Gauss–Legendre nodes.

pub type Mat2 = [[f64; 2]; 2];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn det2(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Moore–Penrose pseudo-inverse of a 2×2 matrix via its singular values;
/// singular values below `rcond · σ_max` are dropped.
pub fn pinv2(a: &Mat2, rcond: f64) -> Mat2 {
    // A^T A = V diag(s²) V^T
    let ata = [
        [a[0][0] * a[0][0] + a[1][0] * a[1][0], a[0][0] * a[0][1] + a[1][0] * a[1][1]],
        [0.0, a[0][1] * a[0][1] + a[1][1] * a[1][1]],
    ];
    let (p, q, r) = (ata[0][0], ata[0][1], ata[1][1]);
    let mean = 0.5 * (p + r);
    let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
    let l1 = mean + rad;
    let l2 = (mean - rad).max(0.0);
    let v1 = if q != 0.0 {
        let (x, y) = (l1 - r, q);
        let n = (x * x + y * y).sqrt();
        [x / n, y / n]
    } else if p >= r {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let v2 = [-v1[1], v1[0]];
    let s1 = l1.sqrt();
    let s2 = l2.sqrt();
    let mut out = [[0.0; 2]; 2];
    for (s, v) in [(s1, v1), (s2, v2)] {
        if s <= rcond * s1 || s == 0.0 {
            continue;
        }
        // u = A v / s ; A⁺ += v u^T / s
        let u = [(a[0][0] * v[0] + a[0][1] * v[1]) / s, (a[1][0] * v[0] + a[1][1] * v[1]) / s];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += v[i] * u[j] / s;
            }
        }
    }
    out
}

/// Solves the cyclic tridiagonal system with constant coefficients per row:
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` with indices
/// mod n. Sherman–Morrison on top of the Thomas algorithm.
pub fn solve_cyclic_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 3);
    let alpha = upper[n - 1]; // A[n-1][0]
    let beta = lower[0]; // A[0][n-1]
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = thomas(lower, &b, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(lower, &b, upper, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on [a, b].
pub fn composite_gl(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for k in 0..order {
            out.push((mid + 0.5 * h * x[k], 0.5 * h * w[k]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cyclic_solver_matches_dense() {
        let n = 7;
        let lower: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.7 + 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.5 + 0.1 * i as f64).collect();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| lower[i] * xs[(i + n - 1) % n] + diag[i] * xs[i] + upper[i] * xs[(i + 1) % n])
            .collect();
        let sol = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs);
        for i in 0..n {
            assert!((sol[i] - xs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pinv_inverts_regular_and_handles_rank_one() {
        let a = [[2.0, 1.0], [0.5, 3.0]];
        let p = pinv2(&a, 1e-12);
        let id = mat2_mul(&a, &p);
        assert!((id[0][0] - 1.0).abs() < 1e-12 && id[0][1].abs() < 1e-12);
        let r = [[1.0, 2.0], [2.0, 4.0]];
        let p = pinv2(&r, 1e-9);
        // A A⁺ A = A
        let back = mat2_mul(&mat2_mul(&r, &p), &r);
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[i][j] - r[i][j]).abs() < 1e-10);
            }
        }
    }
}
