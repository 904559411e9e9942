//! One-dimensional radial grids and the implicit (Cayley) sub-propagators
//! acting along them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Graded grid on `(0, r_max)`: spacing `h_min + slope r` near the origin,
/// saturating smoothly at `h_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGridSpec {
    pub r_max: f64,
    pub h_min: f64,
    pub slope: f64,
    pub h_max: f64,
}

impl Default for RadialGridSpec {
    fn default() -> Self {
        Self { r_max: 540.0, h_min: 0.01, slope: 0.04, h_max: 1.5 }
    }
}

impl RadialGridSpec {
    pub fn uniform(r_max: f64, h: f64) -> Self {
        Self { r_max, h_min: h, slope: 0.0, h_max: f64::INFINITY }
    }

    fn spacing(&self, r: f64) -> f64 {
        let x = self.h_min + self.slope * r;
        if self.h_max.is_finite() {
            self.h_max * (x / self.h_max).tanh()
        } else {
            x
        }
    }

    pub fn build(&self) -> Result<RadialGrid> {
        if !(self.h_min > 0.0 && self.h_max >= 2.0 * self.h_min && self.slope >= 0.0) {
            return domain(format!("invalid radial grid spacings {self:?}"));
        }
        if !(self.r_max > 8.0 * self.spacing(self.r_max)) {
            return domain(format!("radial extent {} too small for its spacing", self.r_max));
        }
        let mut raw = vec![0.0];
        let mut r = 0.0;
        while r < self.r_max {
            let h = self.spacing(r + 0.5 * self.spacing(r));
            r += h;
            raw.push(r);
        }
        // stretch so that the last point lands on r_max
        let scale = self.r_max / r;
        let n = raw.len() - 2;
        let nodes: Vec<f64> = raw[1..=n].iter().map(|x| x * scale).collect();
        Ok(RadialGrid::from_nodes(nodes, self.r_max))
    }
}

/// Interior nodes of a vertex-centred grid with Dirichlet ends at `0` and
/// `r_max`. `weights` are the dual cell widths.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub r_max: f64,
}

impl RadialGrid {
    pub fn from_nodes(nodes: Vec<f64>, r_max: f64) -> Self {
        let n = nodes.len();
        let at = |i: isize| -> f64 {
            if i < 0 {
                0.0
            } else if i as usize >= n {
                r_max
            } else {
                nodes[i as usize]
            }
        };
        let weights = (0..n as isize).map(|i| 0.5 * (at(i + 1) - at(i - 1))).collect();
        Self { nodes, weights, r_max }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn gap(&self, i: usize) -> f64 {
        // distance from node i-1 to node i, with the origin as node -1
        let lo = if i == 0 { 0.0 } else { self.nodes[i - 1] };
        let hi = if i == self.nodes.len() { self.r_max } else { self.nodes[i] };
        hi - lo
    }

    /// `-d^2/dr^2` symmetrised with the cell widths: returns (diagonal, upper).
    pub fn laplacian(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let w = &self.weights;
        let diag = (0..n).map(|i| (1.0 / self.gap(i) + 1.0 / self.gap(i + 1)) / w[i]).collect();
        let upper = (0..n.saturating_sub(1)).map(|i| -1.0 / (self.gap(i + 1) * (w[i] * w[i + 1]).sqrt())).collect();
        (diag, upper)
    }
}

/// Cell-centred grid `(p + 1/2) h` on `(0, extent)` for the transverse
/// centre-of-mass radius, weights `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmGridSpec {
    pub n: usize,
    pub extent: f64,
}

impl CmGridSpec {
    pub fn h(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n).map(|p| (p as f64 + 0.5) * h).collect()
    }

    /// `-(1/rho) d/drho (rho d/drho)` in finite-volume form, symmetrised with
    /// the cell areas `rho_p h`. Acting on `sqrt(rho) psi` this is
    /// `-(d^2 + 1/(4 rho^2))`.
    pub fn laplacian(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.h();
        let rho = self.nodes();
        let n = self.n;
        let face = |p: usize| (p as f64 + 1.0) * h; // between cells p and p+1
        let diag = (0..n)
            .map(|p| {
                let inner = if p == 0 { 0.0 } else { face(p - 1) };
                (face(p) + inner) / (h * h * rho[p])
            })
            .collect();
        let upper = (0..n.saturating_sub(1)).map(|p| -face(p) / (h * h * (rho[p] * rho[p + 1]).sqrt())).collect();
        (diag, upper)
    }
}

/// Crank–Nicolson (Cayley) map `(1 + i dt/2 A)^{-1} (1 - i dt/2 A)` for a
/// complex-symmetric tridiagonal `A`, with the left factor pre-eliminated.
#[derive(Clone, Debug)]
pub struct Cayley {
    /// RHS diagonal `1 - i dt/2 a_ii`.
    rhs_diag: Vec<Complex64>,
    /// `-i dt/2 a_{i,i+1}`, shared by both sides up to sign.
    rhs_off: Vec<Complex64>,
    lhs_off: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
    c_prime: Vec<Complex64>,
}

impl Cayley {
    /// `diag` may carry a negative imaginary part (absorption).
    pub fn new(diag: &[Complex64], upper: &[f64], dt: f64) -> Self {
        let n = diag.len();
        let half = Complex64::new(0.0, 0.5 * dt);
        let lhs_diag: Vec<Complex64> = diag.iter().map(|&d| 1.0 + half * d).collect();
        let rhs_diag = diag.iter().map(|&d| 1.0 - half * d).collect();
        let lhs_off: Vec<Complex64> = upper.iter().map(|&e| half * e).collect();
        let rhs_off = upper.iter().map(|&e| -half * e).collect();
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); n];
        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        let mut prev_c = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let pivot = if i == 0 { lhs_diag[0] } else { lhs_diag[i] - lhs_off[i - 1] * prev_c };
            inv_pivot[i] = pivot.inv();
            c_prime[i] = if i + 1 < n { lhs_off[i] * inv_pivot[i] } else { Complex64::new(0.0, 0.0) };
            prev_c = c_prime[i];
        }
        Self { rhs_diag, rhs_off, lhs_off, inv_pivot, c_prime }
    }

    pub fn len(&self) -> usize {
        self.rhs_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs_diag.is_empty()
    }

    /// Applies the map to a contiguous vector in place.
    pub fn apply(&self, v: &mut [Complex64]) {
        let n = v.len();
        debug_assert_eq!(n, self.len());
        if n == 0 {
            return;
        }
        // forward sweep fused with the right-hand side
        let mut prev_orig = Complex64::new(0.0, 0.0);
        let mut prev_y = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let cur = v[i];
            let mut b = self.rhs_diag[i] * cur;
            if i > 0 {
                b += self.rhs_off[i - 1] * prev_orig;
            }
            if i + 1 < n {
                b += self.rhs_off[i] * v[i + 1];
            }
            let y = if i == 0 { b * self.inv_pivot[0] } else { (b - self.lhs_off[i - 1] * prev_y) * self.inv_pivot[i] };
            prev_orig = cur;
            v[i] = y;
            prev_y = y;
        }
        for i in (0..n - 1).rev() {
            let next = v[i + 1];
            v[i] -= self.c_prime[i] * next;
        }
    }

    /// Applies the map along a strided axis: element `k` of line `j` lives at
    /// `data[k * stride + j]`, for `j in 0..stride`. All lines are advanced
    /// together so the inner loop runs over contiguous memory.
    pub fn apply_strided(&self, data: &mut [Complex64], stride: usize, scratch: &mut Vec<Complex64>) {
        let n = self.len();
        debug_assert_eq!(data.len(), n * stride);
        if n == 0 {
            return;
        }
        scratch.clear();
        scratch.extend_from_slice(&data[..stride]);
        // scratch holds the original previous row
        for i in 0..n {
            let (head, tail) = data.split_at_mut(i * stride);
            let (row, rest) = tail.split_at_mut(stride);
            let next = if i + 1 < n { Some(&rest[..stride]) } else { None };
            let prev_y = if i > 0 { Some(&head[(i - 1) * stride..]) } else { None };
            let rd = self.rhs_diag[i];
            let ip = self.inv_pivot[i];
            for j in 0..stride {
                let cur = row[j];
                let mut b = rd * cur;
                if i > 0 {
                    b += self.rhs_off[i - 1] * scratch[j];
                }
                if let Some(nx) = next {
                    b += self.rhs_off[i] * nx[j];
                }
                let y = match prev_y {
                    Some(py) => (b - self.lhs_off[i - 1] * py[j]) * ip,
                    None => b * ip,
                };
                scratch[j] = cur;
                row[j] = y;
            }
        }
        for i in (0..n - 1).rev() {
            let (head, tail) = data.split_at_mut((i + 1) * stride);
            let row = &mut head[i * stride..];
            let next = &tail[..stride];
            let c = self.c_prime[i];
            for j in 0..stride {
                row[j] -= c * next[j];
            }
        }
    }
}
