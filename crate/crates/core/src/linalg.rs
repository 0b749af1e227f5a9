//! Small direct solvers: tridiagonal and banded LU with partial pivoting,
//! and bisection plus inverse iteration for symmetric tridiagonal spectra.

use crate::error::{Error, Result};

/// Solves a general tridiagonal system with partial pivoting.
///
/// `sub[i]` couples row `i + 1` to column `i`, `sup[i]` couples row `i` to
/// column `i + 1`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert!(sub.len() + 1 == n && sup.len() + 1 == n && rhs.len() == n);
    if n == 1 {
        return if diag[0] != 0.0 {
            Ok(vec![rhs[0] / diag[0]])
        } else {
            Err(Error::SolveFailure("singular 1x1 system".into()))
        };
    }
    // Row i of the factor holds (d[i], du[i], du2[i]) after elimination.
    let mut d = diag.to_vec();
    let mut du = sup.to_vec();
    let mut dl = sub.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut b = rhs.to_vec();
    let scale = diag.iter().chain(sub).chain(sup).fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);

    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return Err(Error::SolveFailure("singular tridiagonal system".into()));
            }
            let l = dl[i] / d[i];
            dl[i] = l;
            d[i + 1] -= l * du[i];
            b[i + 1] -= l * b[i];
            if i + 2 < n {
                du2[i] = 0.0;
            }
        } else {
            // Swap rows i and i + 1.
            let l = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = l;
            let t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - l * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -l;
            }
            b.swap(i, i + 1);
            b[i + 1] -= l * b[i];
        }
    }
    if d[n - 1].abs() <= f64::EPSILON * 1e-3 * scale {
        return Err(Error::SolveFailure("singular tridiagonal system".into()));
    }
    let mut x = vec![0.0; n];
    x[n - 1] = b[n - 1] / d[n - 1];
    x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolveFailure("tridiagonal solve produced non-finite values".into()));
    }
    Ok(x)
}

/// Symmetric tridiagonal matrix given by its diagonal and off-diagonal.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        debug_assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn pivot_floor(&self) -> f64 {
        let m = self.off.iter().fold(f64::MIN_POSITIVE, |a, e| a.max(e * e));
        m * f64::MIN_POSITIVE.sqrt()
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let floor = self.pivot_floor();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.len() {
            if i > 0 {
                let e = self.off[i - 1];
                q = self.diag[i] - x - e * e / q;
            }
            if q.abs() < floor {
                q = -floor;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection to full precision.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        debug_assert!(k < self.len());
        let (mut lo, mut hi) = self.gershgorin();
        let pad = f64::EPSILON * (lo.abs().max(hi.abs())) + self.pivot_floor();
        lo -= pad;
        hi += pad;
        for _ in 0..256 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        self.eigenvalue(self.len() - 1)
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigenvalue(0)
    }

    /// `y = T x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Eigenvector for an eigenvalue estimate `lambda` by inverse iteration,
    /// normalised to unit Euclidean length.
    pub fn eigenvector(&self, lambda: f64, start: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let (lo, hi) = self.gershgorin();
        let norm = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        // Perturb the shift slightly so the shifted matrix is not exactly singular.
        let shift = lambda + 4.0 * f64::EPSILON * norm;
        let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let mut x = start.to_vec();
        normalize(&mut x);
        let mut last_change = f64::INFINITY;
        for _ in 0..8 {
            let mut y = solve_tridiagonal(&self.off, &diag, &self.off, &x).or_else(|_| {
                let diag: Vec<f64> = diag.iter().map(|d| d - 1e3 * f64::EPSILON * norm).collect();
                solve_tridiagonal(&self.off, &diag, &self.off, &x)
            })?;
            normalize(&mut y);
            if y.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                y.iter_mut().for_each(|v| *v = -*v);
            }
            let change = y.iter().zip(&x).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
            x = y;
            if change < 1e-15 * (n as f64).sqrt() || change >= last_change && change < 1e-10 {
                break;
            }
            last_change = change;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigFailure("inverse iteration diverged".into()));
        }
        Ok(x)
    }
}

fn normalize(x: &mut [f64]) {
    let s = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
}

/// General band matrix with `kl` sub- and `ku` super-diagonals, factorised
/// in place by Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        // Room for the fill-in that row swaps introduce above the diagonal.
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// `y = A x`, valid before factorisation.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Factorises and solves `A x = b`, consuming the matrix.
    pub fn solve(self, b: &[f64]) -> Result<Vec<f64>> {
        self.factorize()?.solve(b)
    }

    /// LU factorisation with partial pivoting.
    pub fn factorize(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let scale = self.data.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut piv = vec![0usize; n];
        for i in 0..n {
            let last_row = (i + kl).min(n - 1);
            let last_col = (i + kl + ku).min(n - 1);
            let mut p = i;
            let mut best = self.get(i, i).abs();
            for r in i + 1..=last_row {
                let v = self.get(r, i).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= f64::EPSILON * 1e-6 * scale {
                return Err(Error::SolveFailure(format!("band matrix singular at column {i}")));
            }
            piv[i] = p;
            if p != i {
                for j in i..=last_col {
                    let (a, c) = (self.idx(i, j), self.idx(p, j));
                    self.data.swap(a, c);
                }
            }
            let pivot = self.data[self.idx(i, i)];
            for r in i + 1..=last_row {
                let k = self.idx(r, i);
                let l = self.data[k] / pivot;
                self.data[k] = l;
                if l != 0.0 {
                    for j in i + 1..=last_col {
                        let a = self.data[self.idx(i, j)];
                        let t = self.idx(r, j);
                        self.data[t] -= l * a;
                    }
                }
            }
        }
        Ok(BandLu { lu: self, piv })
    }
}

/// Factorised band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let a = &self.lu;
        let n = a.n;
        let (kl, ku) = (a.kl, a.ku);
        let mut x = b.to_vec();
        for i in 0..n {
            let p = self.piv[i];
            if p != i {
                x.swap(i, p);
            }
            let xi = x[i];
            for r in i + 1..=(i + kl).min(n - 1) {
                x[r] -= a.data[a.idx(r, i)] * xi;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= a.data[a.idx(i, j)] * x[j];
            }
            x[i] = s / a.data[a.idx(i, i)];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolveFailure("band solve produced non-finite values".into()));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tridiagonal_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 10, 57] {
            let sub: Vec<f64> = (0..n.saturating_sub(1)).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sup: Vec<f64> = (0..n.saturating_sub(1)).map(|_| rng.random_range(-2.0..2.0)).collect();
            // Small diagonal forces pivoting.
            let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                a[(i, i)] = diag[i];
                if i + 1 < n {
                    a[(i + 1, i)] = sub[i];
                    a[(i, i + 1)] = sup[i];
                }
            }
            let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
            let r = &a * DVector::from_vec(x) - DVector::from_vec(rhs);
            assert!(r.amax() < 1e-10, "n={n} residual {}", r.amax());
        }
    }

    #[test]
    fn sturm_bisection_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let off: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = SymTridiagonal::new(diag.clone(), off.clone());
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = diag[i];
            if i + 1 < n {
                a[(i + 1, i)] = off[i];
                a[(i, i + 1)] = off[i];
            }
        }
        let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for k in [0, 1, n / 2, n - 1] {
            assert!((t.eigenvalue(k) - ev[k]).abs() < 1e-12, "k={k}");
        }
        let lam = t.largest_eigenvalue();
        let v = t.eigenvector(lam, &vec![1.0; n]).unwrap();
        let tv = t.apply(&v);
        let res = tv.iter().zip(&v).fold(0.0f64, |a, (p, q)| a.max((p - lam * q).abs()));
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn band_solver_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let (kl, ku) = (2, 2);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = rng.random_range(-1.0..1.0);
                band.add(i, j, v);
                a[(i, j)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = band.solve(&b).unwrap();
        let r = &a * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.amax() < 1e-9, "residual {}", r.amax());
    }

    #[test]
    fn singular_systems_are_reported() {
        assert!(solve_tridiagonal(&[0.0], &[0.0, 1.0], &[0.0], &[1.0, 1.0]).is_err());
        let band = BandMatrix::zeros(4, 1, 1);
        assert!(band.solve(&[1.0; 4]).is_err());
    }
}
