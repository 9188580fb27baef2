//! Banded matrices: LU with partial pivoting, inertia by unpivoted
//! elimination, and a few helpers for symmetric eigenvalues.

use num_complex::{Complex64, ComplexFloat};

/// Square matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct Band<T> {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    w: usize,
    data: Vec<T>,
}

impl<T: ComplexFloat<Real = f64>> Band<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let w = kl + ku + 1;
        Band { n, kl, ku, w, data: vec![T::zero(); n * w] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize;
        (off >= -(self.kl as isize) && off <= self.ku as isize).then(|| i * self.w + (off + self.kl as isize) as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.idx(i, j).map_or(T::zero(), |k| self.data[k])
    }

    /// Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j).expect("entry outside band");
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j).expect("entry outside band");
        self.data[k] = self.data[k] + v;
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n).map(|i| self.row_range(i).fold(T::zero(), |s, j| s + self.get(i, j) * x[j])).collect()
    }

    /// `A − σI`.
    pub fn shifted(&self, sigma: T) -> Self {
        let mut b = self.clone();
        for i in 0..self.n {
            b.add(i, i, -sigma);
        }
        b
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Largest `|A_ij − conj(A_ji)|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for j in self.row_range(i) {
                m = m.max((self.get(i, j) - self.get(j, i).conj()).abs());
            }
        }
        m
    }

    pub fn lu(&self) -> BandLu<T> {
        BandLu::new(self)
    }
}

/// `PA = LU` with fill-in stored in `kl` extra super-diagonals.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    data: Vec<T>,
    piv: Vec<usize>,
    pub singular: bool,
    swaps: usize,
}

impl<T: ComplexFloat<Real = f64>> BandLu<T> {
    fn new(a: &Band<T>) -> Self {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let uw = kl + ku;
        let w = kl + uw + 1;
        let mut data = vec![T::zero(); n * w];
        for i in 0..n {
            for j in a.row_range(i) {
                data[i * w + (j + kl - i)] = a.get(i, j);
            }
        }
        let at = |i: usize, j: usize| i * w + (j + kl - i);
        let mut piv = vec![0; n];
        let mut singular = false;
        let mut swaps = 0;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = data[at(k, k)].abs();
            for i in k + 1..=last {
                let v = data[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            let jend = (k + uw).min(n - 1);
            if p != k {
                swaps += 1;
                for j in k..=jend {
                    data.swap(at(k, j), at(p, j));
                }
            }
            let d = data[at(k, k)];
            if d == T::zero() {
                singular = true;
                continue;
            }
            for i in k + 1..=last {
                let l = data[at(i, k)] / d;
                data[at(i, k)] = l;
                if l != T::zero() {
                    for j in k + 1..=jend {
                        let u = data[at(k, j)];
                        data[at(i, j)] = data[at(i, j)] - l * u;
                    }
                }
            }
        }
        BandLu { n, kl, ku, w, data, piv, singular, swaps }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.w + (j + self.kl - i)]
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] = x[i] - self.at(i, k) * xk;
            }
        }
        let uw = self.kl + self.ku;
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + uw).min(n - 1) {
                s = s - self.at(k, j) * x[j];
            }
            x[k] = s / self.at(k, k);
        }
        x
    }

    /// `(sign or phase, ln|det|)`.
    pub fn log_det(&self) -> (T, f64) {
        let mut phase = if self.swaps % 2 == 0 { T::one() } else { -T::one() };
        let mut l = 0.0;
        for k in 0..self.n {
            let d = self.at(k, k);
            let a = d.abs();
            l += a.ln();
            phase = phase * (d / T::from(a).unwrap());
        }
        (phase, l)
    }
}

/// Number of eigenvalues of the real symmetric band matrix `a` below `sigma`.
pub fn count_below(a: &Band<f64>, sigma: f64) -> usize {
    // pivots of unpivoted elimination have the inertia of A − σI
    let n = a.n;
    let bw = a.kl.max(a.ku);
    let w = 2 * bw + 1;
    let mut d = vec![0.0; n * w];
    let at = |i: usize, j: usize| i * w + (j + bw - i);
    for i in 0..n {
        for j in a.row_range(i) {
            d[at(i, j)] = a.get(i, j);
        }
        d[at(i, i)] -= sigma;
    }
    let tiny = f64::EPSILON * (0..n).map(|i| a.get(i, i).abs()).fold(1.0, f64::max);
    let mut count = 0;
    for k in 0..n {
        let mut p = d[at(k, k)];
        if p.abs() < tiny {
            p = -tiny;
            d[at(k, k)] = p;
        }
        if p < 0.0 {
            count += 1;
        }
        let last = (k + bw).min(n - 1);
        for i in k + 1..=last {
            let l = d[at(i, k)] / p;
            if l != 0.0 {
                for j in k + 1..=last {
                    d[at(i, j)] -= l * d[at(k, j)];
                }
            }
        }
    }
    count
}

/// Gershgorin bounds of a real band matrix.
pub fn gershgorin(a: &Band<f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..a.n {
        let r: f64 = a.row_range(i).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum();
        lo = lo.min(a.get(i, i) - r);
        hi = hi.max(a.get(i, i) + r);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based) of a real symmetric band matrix
/// by bisection on inertia counts.
pub fn kth_eigenvalue(a: &Band<f64>, k: usize, tol: f64) -> f64 {
    let (mut lo, mut hi) = gershgorin(a);
    while hi - lo > tol * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if count_below(a, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvector of the real symmetric band matrix for the eigenvalue near
/// `lambda`, by inverse iteration. Unit Euclidean norm.
pub fn eigenvector(a: &Band<f64>, lambda: f64) -> Vec<f64> {
    let n = a.n;
    let scale = 1e-12 * gershgorin(a).1.abs().max(1.0);
    let lu = a.shifted(lambda + scale).lu();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    for _ in 0..4 {
        let y = lu.solve(&x);
        let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.iter().map(|v| v / nrm).collect();
    }
    x
}

/// Promote a real band matrix.
pub fn complexify(a: &Band<f64>) -> Band<Complex64> {
    let mut b = Band::zeros(a.n, a.kl, a.ku);
    for i in 0..a.n {
        for j in a.row_range(i) {
            b.set(i, j, Complex64::new(a.get(i, j), 0.0));
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian(n: usize) -> Band<f64> {
        let mut a = Band::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
                a.set(i + 1, i, -1.0);
            }
        }
        a
    }

    #[test]
    fn laplacian_eigenvalues() {
        let n = 50;
        let a = laplacian(n);
        for k in [0, 3, 49] {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((kth_eigenvalue(&a, k, 1e-14) - exact).abs() < 1e-12);
        }
        let v = eigenvector(&a, kth_eigenvalue(&a, 0, 1e-14));
        let av = a.matvec(&v);
        let lam = 2.0 - 2.0 * (std::f64::consts::PI / 51.0).cos();
        let r: f64 = av.iter().zip(&v).map(|(p, q)| (p - lam * q).powi(2)).sum::<f64>().sqrt();
        assert!(r < 1e-10);
    }

    #[test]
    fn determinant_sign() {
        let a = laplacian(6).shifted(1.0);
        // eigenvalues 1 − 2cos(kπ/7): two negative
        let (s, l) = a.lu().log_det();
        assert_eq!(s, 1.0);
        let exact: f64 = (1..=6).map(|k| (1.0 - 2.0 * (k as f64 * std::f64::consts::PI / 7.0).cos()).abs().ln()).sum();
        assert!((l - exact).abs() < 1e-12);
        assert_eq!(count_below(&laplacian(6), 1.0), 2);
    }

    proptest! {
        #[test]
        fn lu_solves(vals in prop::collection::vec(-1.0f64..1.0, 7 * 40), kl in 0usize..3, ku in 0usize..4) {
            let n = 40;
            let mut a = Band::<f64>::zeros(n, kl, ku);
            for i in 0..n {
                for j in a.row_range(i) {
                    a.set(i, j, vals[(i * 7 + j + 3 - i) % vals.len()]);
                }
                a.add(i, i, 0.05);
            }
            let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let b = a.matvec(&x);
            let lu = a.lu();
            prop_assume!(!lu.singular);
            let y = lu.solve(&b);
            let r: f64 = a.matvec(&y).iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            prop_assume!(y.iter().all(|v| v.is_finite()));
            prop_assert!(r < 1e-7 * (1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max)));
        }

        #[test]
        fn complex_lu_solves(re in prop::collection::vec(-1.0f64..1.0, 30), im in prop::collection::vec(-1.0f64..1.0, 30)) {
            let n = 30;
            let mut a = Band::<Complex64>::zeros(n, 2, 2);
            for i in 0..n {
                for j in a.row_range(i) {
                    a.set(i, j, Complex64::new(re[(i + 2 * j) % n], im[(3 * i + j) % n]));
                }
                a.add(i, i, Complex64::new(4.0, 0.0));
            }
            let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
            let b = a.matvec(&x);
            let y = a.lu().solve(&b);
            let e = y.iter().zip(&x).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            prop_assert!(e < 1e-9);
        }

        #[test]
        fn inertia_matches_bisection(n in 5usize..30, s in -1.0f64..5.0) {
            let a = laplacian(n);
            let exact = (1..=n).filter(|k| 2.0 - 2.0 * (*k as f64 * std::f64::consts::PI / (n + 1) as f64).cos() < s).count();
            prop_assert_eq!(count_below(&a, s), exact);
        }
    }
}
