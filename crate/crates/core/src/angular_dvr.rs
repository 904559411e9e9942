//! Product grid on the sphere (Gauss–Legendre in `cos(theta)`, uniform in
//! `phi`) and the transforms to the spectral basis `P_l^m(cos theta) e^{i m phi}`
//! in which `L^2` and `-d^2/dphi^2` are diagonal.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like first guess for the i-th largest root
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = z;
        x[i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// `P_l^m(x)` for `l = m..=l_top`, normalized so that `int_{-1}^{1} P^2 dx = 1`
/// (no Condon–Shortley phase).
pub fn normalized_assoc_legendre(m: u32, l_top: u32, x: f64) -> Vec<f64> {
    if l_top < m {
        return Vec::new();
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = (0.5f64).sqrt();
    for k in 1..=m {
        pmm *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
    }
    let mut out = Vec::with_capacity((l_top - m + 1) as usize);
    out.push(pmm);
    if l_top == m {
        return out;
    }
    let mut prev = pmm;
    let mut cur = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
    out.push(cur);
    let mf = m as f64;
    let a = |l: f64| ((4.0 * l * l - 1.0) / (l * l - mf * mf)).sqrt();
    for l in m + 2..=l_top {
        let lf = l as f64;
        let next = a(lf) * (x * cur - prev / a(lf - 1.0));
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Real orthogonal transform between the `theta` nodes and one `m` sector,
/// `T[l][i] = sqrt(w_i) P_l^m(x_i)`, with its parity halves.
#[derive(Clone, Debug)]
pub struct LegendreBlock {
    pub m: i32,
    /// `l` label of each spectral row.
    pub ls: Vec<u32>,
    n: usize,
    t: Vec<f64>,
    even: Vec<f64>,
    odd: Vec<f64>,
    even_rows: Vec<usize>,
    odd_rows: Vec<usize>,
}

impl LegendreBlock {
    /// `n` nodes carrying `l = |m|, ..., |m| + n - 1`. Rows beyond what the
    /// quadrature integrates exactly are re-orthonormalized (Gram–Schmidt in
    /// increasing `l`), which leaves the exact rows untouched.
    pub fn new(m: i32, x: &[f64], w: &[f64]) -> Self {
        let n = x.len();
        let am = m.unsigned_abs();
        let l_top = am + n as u32 - 1;
        let mut t = vec![0.0; n * n];
        for (i, (&xi, &wi)) in x.iter().zip(w).enumerate() {
            let p = normalized_assoc_legendre(am, l_top, xi);
            let sw = wi.sqrt();
            for (row, pl) in p.iter().enumerate() {
                t[row * n + i] = sw * pl;
            }
        }
        for row in 0..n {
            for _pass in 0..2 {
                for prev in 0..row {
                    let dot: f64 = (0..n).map(|i| t[prev * n + i] * t[row * n + i]).sum();
                    for i in 0..n {
                        t[row * n + i] -= dot * t[prev * n + i];
                    }
                }
            }
            let norm = (0..n).map(|i| t[row * n + i].powi(2)).sum::<f64>().sqrt();
            for i in 0..n {
                t[row * n + i] /= norm;
            }
        }
        let ls: Vec<u32> = (0..n as u32).map(|k| am + k).collect();
        let even_rows: Vec<usize> = (0..n).filter(|&r| (ls[r] + am) % 2 == 0).collect();
        let odd_rows: Vec<usize> = (0..n).filter(|&r| (ls[r] + am) % 2 == 1).collect();
        let he = (n + 1) / 2;
        let ho = n / 2;
        let mut even = vec![0.0; even_rows.len() * he];
        for (k, &r) in even_rows.iter().enumerate() {
            even[k * he..(k + 1) * he].copy_from_slice(&t[r * n..r * n + he]);
        }
        let mut odd = vec![0.0; odd_rows.len() * ho];
        for (k, &r) in odd_rows.iter().enumerate() {
            odd[k * ho..(k + 1) * ho].copy_from_slice(&t[r * n..r * n + ho]);
        }
        Self { m, ls, n, t, even, odd, even_rows, odd_rows }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Entry `T[row][node]`.
    pub fn entry(&self, row: usize, node: usize) -> f64 {
        self.t[row * self.n + node]
    }

    /// `out[row][c] = sum_i T[row][i] data[i][c]` for `ncol` columns, using
    /// the node reflection symmetry to halve the work.
    pub fn forward_batch(&self, data: &[f64], ncol: usize, out: &mut [f64]) {
        let n = self.n;
        assert_eq!(data.len(), n * ncol);
        assert_eq!(out.len(), n * ncol);
        let he = (n + 1) / 2;
        let ho = n / 2;
        let mut sum = vec![0.0; he * ncol];
        let mut diff = vec![0.0; ho * ncol];
        for i in 0..ho {
            let a = &data[i * ncol..(i + 1) * ncol];
            let b = &data[(n - 1 - i) * ncol..(n - i) * ncol];
            for c in 0..ncol {
                sum[i * ncol + c] = a[c] + b[c];
                diff[i * ncol + c] = a[c] - b[c];
            }
        }
        if n % 2 == 1 {
            sum[ho * ncol..he * ncol].copy_from_slice(&data[ho * ncol..(ho + 1) * ncol]);
        }
        let ne = self.even_rows.len();
        let no = self.odd_rows.len();
        let mut ce = vec![0.0; ne * ncol];
        let mut co = vec![0.0; no * ncol];
        gemm(ne, he, ncol, &self.even, &sum, &mut ce, false);
        gemm(no, ho, ncol, &self.odd, &diff, &mut co, false);
        for (k, &r) in self.even_rows.iter().enumerate() {
            out[r * ncol..(r + 1) * ncol].copy_from_slice(&ce[k * ncol..(k + 1) * ncol]);
        }
        for (k, &r) in self.odd_rows.iter().enumerate() {
            out[r * ncol..(r + 1) * ncol].copy_from_slice(&co[k * ncol..(k + 1) * ncol]);
        }
    }

    /// Transpose of [`forward_batch`](Self::forward_batch).
    pub fn inverse_batch(&self, coeffs: &[f64], ncol: usize, out: &mut [f64]) {
        let n = self.n;
        assert_eq!(coeffs.len(), n * ncol);
        assert_eq!(out.len(), n * ncol);
        let he = (n + 1) / 2;
        let ho = n / 2;
        let ne = self.even_rows.len();
        let no = self.odd_rows.len();
        let mut ce = vec![0.0; ne * ncol];
        let mut co = vec![0.0; no * ncol];
        for (k, &r) in self.even_rows.iter().enumerate() {
            ce[k * ncol..(k + 1) * ncol].copy_from_slice(&coeffs[r * ncol..(r + 1) * ncol]);
        }
        for (k, &r) in self.odd_rows.iter().enumerate() {
            co[k * ncol..(k + 1) * ncol].copy_from_slice(&coeffs[r * ncol..(r + 1) * ncol]);
        }
        let mut ae = vec![0.0; he * ncol];
        let mut ao = vec![0.0; ho * ncol];
        gemm(he, ne, ncol, &self.even, &ce, &mut ae, true);
        gemm(ho, no, ncol, &self.odd, &co, &mut ao, true);
        for i in 0..ho {
            for c in 0..ncol {
                let (e, o) = (ae[i * ncol + c], ao[i * ncol + c]);
                out[i * ncol + c] = e + o;
                out[(n - 1 - i) * ncol + c] = e - o;
            }
        }
        if n % 2 == 1 {
            out[ho * ncol..he * ncol].copy_from_slice(&ae[ho * ncol..he * ncol]);
        }
    }
}

/// `c = A b` (or `A^T b`) for row-major `A` of shape `rows x inner`
/// (`inner x rows` when transposed) and `b` of shape `inner x ncol`.
fn gemm(rows: usize, inner: usize, ncol: usize, a: &[f64], b: &[f64], c: &mut [f64], transpose: bool) {
    if rows == 0 || ncol == 0 {
        return;
    }
    if inner == 0 {
        c.fill(0.0);
        return;
    }
    let (rsa, csa) = if transpose { (1, rows as isize) } else { (inner as isize, 1) };
    // SAFETY: the slices hold exactly the extents described by the strides.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            inner,
            ncol,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            ncol as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            ncol as isize,
            1,
        );
    }
}

#[derive(Clone, Debug)]
pub struct AngularGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub theta_nodes: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub theta_weights: Vec<f64>,
    pub phi_nodes: Vec<f64>,
    /// Product weights, `theta` major; they sum to `4 pi`.
    pub weights: Vec<f64>,
}

impl AngularGrid {
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of node `(i_theta, j_phi)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_phi + j
    }

    /// Weighted inner product `sum w conj(f) g`.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| a.conj() * b * w).sum()
    }
}

#[derive(Clone, Debug)]
pub struct SpectralTransform {
    pub l_max: u32,
    pub m_max: u32,
    /// One block per `m = -m_max..=m_max`.
    pub blocks: Vec<LegendreBlock>,
    /// `(l, m)` of each spectral coefficient, `m` major then `l`.
    pub lm_index: Vec<(u32, i32)>,
    n_theta: usize,
    n_phi: usize,
    sqrt_w: Vec<f64>,
}

/// Builds the product grid with `l_max + 1` nodes in `theta` and
/// `2 m_max + 1` nodes in `phi`.
pub fn build_basis(l_max: u32, m_max: u32) -> Result<(AngularGrid, SpectralTransform)> {
    if m_max > l_max {
        return domain(format!("m_max = {m_max} exceeds l_max = {l_max}"));
    }
    if l_max > 4096 {
        return domain(format!("l_max = {l_max} is unreasonably large"));
    }
    let n_theta = l_max as usize + 1;
    let n_phi = 2 * m_max as usize + 1;
    let (x, w) = gauss_legendre(n_theta);
    let phi_nodes: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
    let dphi = 2.0 * PI / n_phi as f64;
    let weights = w.iter().flat_map(|&wi| std::iter::repeat(wi * dphi).take(n_phi)).collect();
    let grid = AngularGrid {
        n_theta,
        n_phi,
        theta_nodes: x.iter().map(|c| c.acos()).collect(),
        cos_theta: x.clone(),
        theta_weights: w.clone(),
        phi_nodes,
        weights,
    };
    let mm = m_max as i32;
    let blocks: Vec<LegendreBlock> = (-mm..=mm).map(|m| LegendreBlock::new(m, &x, &w)).collect();
    let lm_index = blocks.iter().flat_map(|b| b.ls.iter().map(move |&l| (l, b.m))).collect();
    let sqrt_w = w.iter().map(|v| v.sqrt()).collect();
    Ok((grid, SpectralTransform { l_max, m_max, blocks, lm_index, n_theta, n_phi, sqrt_w }))
}

impl SpectralTransform {
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, values: &[Complex64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Shape { expected: self.len(), got: values.len() });
        }
        Ok(())
    }

    /// Grid values to spectral coefficients (orthonormal basis on the sphere).
    pub fn forward(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(values)?;
        let (nt, np) = (self.n_theta, self.n_phi);
        let mm = self.m_max as i32;
        let scale = (2.0 * PI).sqrt() / np as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for (bi, block) in self.blocks.iter().enumerate() {
            let m = bi as i32 - mm;
            // g_m(theta_i) scaled by sqrt(w_i)
            let g: Vec<Complex64> = (0..nt)
                .map(|i| {
                    let s: Complex64 = (0..np)
                        .map(|j| {
                            values[i * np + j]
                                * Complex64::from_polar(1.0, -(m as f64) * 2.0 * PI * j as f64 / np as f64)
                        })
                        .sum();
                    s * scale * self.sqrt_w[i]
                })
                .collect();
            for row in 0..nt {
                out[bi * nt + row] = (0..nt).map(|i| g[i] * block.entry(row, i)).sum();
            }
        }
        Ok(out)
    }

    /// Spectral coefficients to grid values.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(coeffs)?;
        let (nt, np) = (self.n_theta, self.n_phi);
        let mm = self.m_max as i32;
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        let norm = 1.0 / (2.0 * PI).sqrt();
        for (bi, block) in self.blocks.iter().enumerate() {
            let m = bi as i32 - mm;
            for i in 0..nt {
                let g: Complex64 = (0..nt).map(|row| coeffs[bi * nt + row] * block.entry(row, i)).sum::<Complex64>()
                    / self.sqrt_w[i]
                    * norm;
                for j in 0..np {
                    out[i * np + j] += g * Complex64::from_polar(1.0, m as f64 * 2.0 * PI * j as f64 / np as f64);
                }
            }
        }
        Ok(out)
    }

    /// Dense grid-to-spectral matrix, row per coefficient.
    pub fn forward_matrix(&self) -> Vec<Vec<Complex64>> {
        let n = self.len();
        let mut cols = Vec::with_capacity(n);
        for k in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[k] = Complex64::new(1.0, 0.0);
            cols.push(self.forward(&e).expect("shape"));
        }
        (0..n).map(|r| (0..n).map(|c| cols[c][r]).collect()).collect()
    }

    /// Dense spectral-to-grid matrix, row per grid node.
    pub fn inverse_matrix(&self) -> Vec<Vec<Complex64>> {
        let n = self.len();
        let mut cols = Vec::with_capacity(n);
        for k in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[k] = Complex64::new(1.0, 0.0);
            cols.push(self.inverse(&e).expect("shape"));
        }
        (0..n).map(|r| (0..n).map(|c| cols[c][r]).collect()).collect()
    }

    fn apply_diagonal<F: Fn(u32, i32) -> f64>(&self, values: &[Complex64], f: F) -> Result<Vec<Complex64>> {
        let mut c = self.forward(values)?;
        for (ci, &(l, m)) in c.iter_mut().zip(&self.lm_index) {
            *ci *= f(l, m);
        }
        self.inverse(&c)
    }

    /// `L^2` via the spectral multiplier `l (l + 1)`.
    pub fn apply_l2(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        self.apply_diagonal(values, |l, _| (l * (l + 1)) as f64)
    }

    /// `-d^2/dphi^2` via the spectral multiplier `m^2`.
    pub fn apply_dphi2(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        self.apply_diagonal(values, |_, m| (m * m) as f64)
    }
}

pub fn apply_l2(transform: &SpectralTransform, values: &[Complex64]) -> Result<Vec<Complex64>> {
    transform.apply_l2(values)
}

pub fn apply_dphi2(transform: &SpectralTransform, values: &[Complex64]) -> Result<Vec<Complex64>> {
    transform.apply_dphi2(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn sample(grid: &AngularGrid, f: impl Fn(f64, f64) -> Complex64) -> Vec<Complex64> {
        let mut v = Vec::with_capacity(grid.len());
        for i in 0..grid.n_theta {
            for j in 0..grid.n_phi {
                v.push(f(grid.theta_nodes[i], grid.phi_nodes[j]));
            }
        }
        v
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 12, 40, 161] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn legendre_normalization() {
        let (x, w) = gauss_legendre(40);
        for m in 0..4u32 {
            let rows: Vec<Vec<f64>> = x.iter().map(|&xi| normalized_assoc_legendre(m, m + 10, xi)).collect();
            for a in 0..=10usize {
                for b in 0..=10usize {
                    let s: f64 = rows.iter().zip(&w).map(|(r, wi)| wi * r[a] * r[b]).sum();
                    let e = if a == b { 1.0 } else { 0.0 };
                    assert!((s - e).abs() < 1e-12, "m={m} {a} {b} {s}");
                }
            }
        }
        // P_1^0 = sqrt(3/2) x
        let p = normalized_assoc_legendre(0, 1, 0.3);
        assert!((p[1] - 1.5f64.sqrt() * 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_node_basis() {
        let (grid, tr) = build_basis(0, 0).unwrap();
        assert_eq!(grid.len(), 1);
        assert!((grid.weights[0] - 4.0 * PI).abs() < 1e-12);
        let c = tr.forward(&[Complex64::new(1.0, 0.0)]).unwrap();
        // a constant 1 has coefficient sqrt(4 pi) on Y_00 = 1/sqrt(4 pi)
        assert!((c[0].re - (4.0 * PI).sqrt()).abs() < 1e-12);
        assert_eq!(tr.lm_index, vec![(0, 0)]);
    }

    #[test]
    fn weights_cover_sphere() {
        for (l, m) in [(0, 0), (4, 0), (8, 8), (30, 3)] {
            let (grid, tr) = build_basis(l, m).unwrap();
            assert!((grid.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
            assert!(grid.weights.iter().all(|&w| w > 0.0));
            assert_eq!(tr.lm_index.len(), grid.len());
        }
        assert!(build_basis(2, 3).is_err());
    }

    #[test]
    fn round_trip() {
        let (grid, tr) = build_basis(8, 8).unwrap();
        let v = random_grid(grid.len(), 7);
        let back = tr.inverse(&tr.forward(&v).unwrap()).unwrap();
        assert!(max_diff(&v, &back) < 1e-12);
        let c = random_grid(grid.len(), 8);
        let again = tr.forward(&tr.inverse(&c).unwrap()).unwrap();
        assert!(max_diff(&c, &again) < 1e-12);
    }

    #[test]
    fn dense_matrices_are_mutual_inverses() {
        let (_, tr) = build_basis(3, 2).unwrap();
        let f = tr.forward_matrix();
        let g = tr.inverse_matrix();
        let n = f.len();
        for i in 0..n {
            for j in 0..n {
                let s: Complex64 = (0..n).map(|k| f[i][k] * g[k][j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s - e).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenfunctions() {
        let (grid, tr) = build_basis(6, 3).unwrap();
        let constant = vec![Complex64::new(1.0, 0.0); grid.len()];
        assert!(tr.apply_l2(&constant).unwrap().iter().all(|z| z.norm() < 1e-12));
        assert!(tr.apply_dphi2(&constant).unwrap().iter().all(|z| z.norm() < 1e-12));

        let y10 = sample(&grid, |t, _| Complex64::new(t.cos(), 0.0));
        let l2 = tr.apply_l2(&y10).unwrap();
        let twice: Vec<_> = y10.iter().map(|z| 2.0 * z).collect();
        assert!(max_diff(&l2, &twice) < 1e-12);

        let e1 = sample(&grid, |t, p| Complex64::from_polar(t.sin(), p));
        assert!(max_diff(&tr.apply_dphi2(&e1).unwrap(), &e1) < 1e-12);

        // every basis function with l <= l_max
        for (k, &(l, m)) in tr.lm_index.iter().enumerate() {
            if l > tr.l_max {
                continue;
            }
            let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
            c[k] = Complex64::new(1.0, 0.0);
            let f = tr.inverse(&c).unwrap();
            let want: Vec<_> = f.iter().map(|z| z * (l * (l + 1)) as f64).collect();
            assert!(max_diff(&tr.apply_l2(&f).unwrap(), &want) < 1e-10 * (l * (l + 1)).max(1) as f64);
            let want: Vec<_> = f.iter().map(|z| z * (m * m) as f64).collect();
            assert!(max_diff(&tr.apply_dphi2(&f).unwrap(), &want) < 1e-11);
        }
    }

    #[test]
    fn composition_and_hermiticity() {
        let (grid, tr) = build_basis(5, 2).unwrap();
        let f = random_grid(grid.len(), 1);
        let g = random_grid(grid.len(), 2);
        let twice = tr.apply_l2(&tr.apply_l2(&f).unwrap()).unwrap();
        let direct = tr.apply_diagonal(&f, |l, _| ((l * (l + 1)) as f64).powi(2)).unwrap();
        assert!(max_diff(&twice, &direct) < 1e-9);
        let lhs = grid.inner(&f, &tr.apply_l2(&g).unwrap());
        let rhs = grid.inner(&tr.apply_l2(&f).unwrap(), &g);
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
        let lhs = grid.inner(&f, &tr.apply_dphi2(&g).unwrap());
        let rhs = grid.inner(&tr.apply_dphi2(&f).unwrap(), &g);
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn real_even_input_stays_real() {
        let (grid, tr) = build_basis(4, 3).unwrap();
        let f = sample(&grid, |t, p| Complex64::new(t.cos() * (2.0 * p).cos() + (p).cos(), 0.0));
        assert!(tr.apply_dphi2(&f).unwrap().iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn shape_mismatch() {
        let (_, tr) = build_basis(2, 1).unwrap();
        assert!(matches!(tr.apply_l2(&[Complex64::new(0.0, 0.0); 3]), Err(Error::Shape { .. })));
    }

    #[test]
    fn batch_matches_dense_block() {
        let (x, w) = gauss_legendre(9);
        for m in [0, 1, -2] {
            let b = LegendreBlock::new(m, &x, &w);
            let ncol = 3;
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let data: Vec<f64> = (0..9 * ncol).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut out = vec![0.0; data.len()];
            b.forward_batch(&data, ncol, &mut out);
            for r in 0..9 {
                for c in 0..ncol {
                    let s: f64 = (0..9).map(|i| b.entry(r, i) * data[i * ncol + c]).sum();
                    assert!((s - out[r * ncol + c]).abs() < 1e-13);
                }
            }
            let mut back = vec![0.0; data.len()];
            b.inverse_batch(&out, ncol, &mut back);
            assert!(data.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-13));
        }
    }
}
