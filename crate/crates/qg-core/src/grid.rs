//! Periodic grids: the 2D torus `[0, 2π)²` and the slab `[0, z_max] × torus²`.

use crate::scalar::Real;
use crate::{QgError, Result};
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Doubly periodic grid on `[0, 2π)²` with `n1 × n2` nodes.
///
/// Storage convention everywhere: index `ix * n2 + iy` for the node
/// `(x1, x2) = (2π ix / n1, 2π iy / n2)`. Spectral layout mirrors the
/// physical one, with wavenumbers in FFT order.
#[derive(Clone)]
pub struct TorusGrid2<T: Real> {
    pub n1: usize,
    pub n2: usize,
    fwd1: Arc<dyn Fft<T>>,
    inv1: Arc<dyn Fft<T>>,
    fwd2: Arc<dyn Fft<T>>,
    inv2: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for TorusGrid2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TorusGrid2({}x{})", self.n1, self.n2)
    }
}

impl<T: Real> PartialEq for TorusGrid2<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2
    }
}

/// Signed integer wavenumber for FFT bin `i` of an `n`-point axis.
/// Even `n` maps the Nyquist bin to `-n/2`.
#[inline]
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl<T: Real> TorusGrid2<T> {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 8 || n2 < 8 || n1 % 2 != 0 || n2 % 2 != 0 {
            return Err(QgError::InvalidParameter(format!(
                "torus grid must have even sizes >= 8, got {n1}x{n2}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n1,
            n2,
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
            fwd2: planner.plan_fft_forward(n2),
            inv2: planner.plan_fft_inverse(n2),
        })
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacings `(2π/n1, 2π/n2)`.
    pub fn spacing(&self) -> (T, T) {
        let tau = T::from_f64_(2.0) * T::PI();
        (tau / T::from_usize_(self.n1), tau / T::from_usize_(self.n2))
    }

    /// Physical coordinates of node `(ix, iy)`.
    pub fn node(&self, ix: usize, iy: usize) -> (T, T) {
        let (h1, h2) = self.spacing();
        (h1 * T::from_usize_(ix), h2 * T::from_usize_(iy))
    }

    /// Integer wavenumber pair of spectral bin `(ix, iy)`.
    #[inline]
    pub fn k(&self, ix: usize, iy: usize) -> (i64, i64) {
        (wavenumber(ix, self.n1), wavenumber(iy, self.n2))
    }

    /// `|k|` of spectral bin `(ix, iy)`.
    #[inline]
    pub fn k_abs(&self, ix: usize, iy: usize) -> T {
        let (k1, k2) = self.k(ix, iy);
        T::from_f64_(((k1 * k1 + k2 * k2) as f64).sqrt())
    }

    /// In-place unnormalized 2D FFT along both axes.
    fn fft2(&self, data: &mut [Complex<T>], forward: bool) {
        debug_assert_eq!(data.len(), self.len());
        let (p1, p2) = if forward {
            (&self.fwd1, &self.fwd2)
        } else {
            (&self.inv1, &self.inv2)
        };
        // rows: contiguous length-n2 transforms
        for row in data.chunks_exact_mut(self.n2) {
            p2.process(row);
        }
        // columns: transpose so they are contiguous, transform, transpose back
        let mut t = vec![Complex::new(T::zero(), T::zero()); self.len()];
        for ix in 0..self.n1 {
            for iy in 0..self.n2 {
                t[iy * self.n1 + ix] = data[ix * self.n2 + iy];
            }
        }
        for col in t.chunks_exact_mut(self.n1) {
            p1.process(col);
        }
        for iy in 0..self.n2 {
            for ix in 0..self.n1 {
                data[ix * self.n2 + iy] = t[iy * self.n1 + ix];
            }
        }
    }

    /// Physical values -> Fourier coefficients under the convention
    /// `f̂(k) = (2π)⁻² ∫ f e^{−ik·x} dx` (i.e. DFT / (n1·n2)).
    pub fn forward(&self, values: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> =
            values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft2(&mut buf, true);
        let scale = T::one() / T::from_usize_(self.len());
        for c in &mut buf {
            *c = *c * scale;
        }
        buf
    }

    /// Fourier coefficients -> physical values, `f(x) = Σ_k f̂(k) e^{ik·x}`.
    /// Returns the real part; the imaginary part is discarded.
    pub fn inverse(&self, coeffs: &[Complex<T>]) -> Vec<T> {
        let mut buf = coeffs.to_vec();
        self.fft2(&mut buf, false);
        buf.into_iter().map(|c| c.re).collect()
    }
}

/// Slab grid `[0, z_max] × torus²` with `nz` z-levels.
///
/// The z-nodes are the cosine-series collocation points
/// `z_i = z_max · i/(nz−1)`, on which the basis `cos(mπz/z_max)` admits an
/// exact discrete transform (the forward matrix is precomputed once).
#[derive(Clone)]
pub struct SlabGrid3<T: Real> {
    pub torus: TorusGrid2<T>,
    pub nz: usize,
    pub z_max: T,
    z_nodes: Vec<T>,
    /// Row-major `nz × nz`: values-at-nodes -> cosine coefficients.
    cos_fwd: Vec<T>,
    /// Row-major `nz × nz`: cosine coefficients -> values-at-nodes.
    cos_inv: Vec<T>,
}

impl<T: Real> std::fmt::Debug for SlabGrid3<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "SlabGrid3({}x{}x{}, z_max={})",
            self.torus.n1, self.torus.n2, self.nz, self.z_max
        )
    }
}

impl<T: Real> PartialEq for SlabGrid3<T> {
    fn eq(&self, other: &Self) -> bool {
        self.torus == other.torus && self.nz == other.nz && self.z_max == other.z_max
    }
}

impl<T: Real> SlabGrid3<T> {
    pub fn new(torus: TorusGrid2<T>, nz: usize, z_max: T) -> Result<Self> {
        if nz < 8 {
            return Err(QgError::InvalidParameter(format!(
                "slab grid needs nz >= 8, got {nz}"
            )));
        }
        if z_max <= T::zero() {
            return Err(QgError::InvalidParameter("z_max must be positive".into()));
        }
        let m = nz;
        let z_nodes: Vec<T> = (0..m)
            .map(|i| z_max * T::from_usize_(i) / T::from_usize_(m - 1))
            .collect();
        // Synthesis matrix B[i][j] = cos(jπ i/(m−1)); invert it once for
        // the analysis direction.
        let mut synth = vec![T::zero(); m * m];
        for i in 0..m {
            for j in 0..m {
                let arg = T::PI() * T::from_usize_(i) * T::from_usize_(j) / T::from_usize_(m - 1);
                synth[i * m + j] = arg.cos();
            }
        }
        let cos_fwd = invert_dense(&synth, m)
            .ok_or_else(|| QgError::InvalidParameter("singular cosine basis".into()))?;
        Ok(Self {
            torus,
            nz,
            z_max,
            z_nodes,
            cos_fwd,
            cos_inv: synth,
        })
    }

    pub fn z_nodes(&self) -> &[T] {
        &self.z_nodes
    }

    /// z spacing between consecutive nodes.
    pub fn dz(&self) -> T {
        self.z_max / T::from_usize_(self.nz - 1)
    }

    /// Values at z-nodes -> cosine coefficients `a_m` of
    /// `f(z) = Σ_m a_m cos(mπ z / z_max)`.
    pub fn cosine_forward_col(&self, values: &[T], out: &mut [T]) {
        matvec(&self.cos_fwd, values, out, self.nz);
    }

    /// Cosine coefficients -> values at z-nodes.
    pub fn cosine_inverse_col(&self, coeffs: &[T], out: &mut [T]) {
        matvec(&self.cos_inv, coeffs, out, self.nz);
    }

    /// Raw row-major `nz × nz` transform matrices `(analysis, synthesis)`,
    /// for batched whole-plane application.
    pub fn cosine_matrices(&self) -> (&[T], &[T]) {
        (&self.cos_fwd, &self.cos_inv)
    }
}

fn matvec<T: Real>(mat: &[T], x: &[T], out: &mut [T], n: usize) {
    for i in 0..n {
        let row = &mat[i * n..(i + 1) * n];
        let mut acc = T::zero();
        for j in 0..n {
            acc += row[j] * x[j];
        }
        out[i] = acc;
    }
}

/// Dense inverse by Gauss-Jordan with partial pivoting; `None` if singular.
fn invert_dense<T: Real>(mat: &[T], n: usize) -> Option<Vec<T>> {
    let mut a = mat.to_vec();
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = T::one();
    }
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < T::from_f64_(1e-300) {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
        }
        let d = a[col * n + col];
        for j in 0..n {
            a[col * n + j] = a[col * n + j] / d;
            inv[col * n + j] = inv[col * n + j] / d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                let ac = a[col * n + j];
                let ic = inv[col * n + j];
                a[r * n + j] = a[r * n + j] - f * ac;
                inv[r * n + j] = inv[r * n + j] - f * ic;
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_roundtrip_is_identity() {
        let g: TorusGrid2<f64> = TorusGrid2::new(16, 16).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|i| {
                let (x, y) = g.node(i / 16, i % 16);
                (2.0 * x).cos() + 0.3 * (x + 3.0 * y).sin()
            })
            .collect();
        let back = g.inverse(&g.forward(&vals));
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn single_mode_coefficients() {
        let g: TorusGrid2<f64> = TorusGrid2::new(16, 8).unwrap();
        // cos(x1) has coefficients 1/2 at k=(±1,0)
        let vals: Vec<f64> = (0..16)
            .flat_map(|ix| {
                let x = 2.0 * std::f64::consts::PI * ix as f64 / 16.0;
                std::iter::repeat(x.cos()).take(8)
            })
            .collect();
        let c = g.forward(&vals);
        assert!((c[1 * 8 + 0].re - 0.5).abs() < 1e-13);
        assert!((c[15 * 8 + 0].re - 0.5).abs() < 1e-13);
        let leak: f64 = c
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 8 && *i != 15 * 8)
            .map(|(_, v)| v.norm())
            .sum();
        assert!(leak < 1e-12);
    }

    #[test]
    fn rejects_odd_or_small_grids() {
        assert!(TorusGrid2::<f64>::new(7, 16).is_err());
        assert!(TorusGrid2::<f64>::new(16, 4).is_err());
    }

    #[test]
    fn cosine_transform_roundtrip() {
        let torus: TorusGrid2<f64> = TorusGrid2::new(8, 8).unwrap();
        let slab = SlabGrid3::new(torus, 12, 2.0).unwrap();
        let vals: Vec<f64> = slab.z_nodes().iter().map(|&z| (z * 1.3).exp()).collect();
        let mut coeffs = vec![0.0; 12];
        let mut back = vec![0.0; 12];
        slab.cosine_forward_col(&vals, &mut coeffs);
        slab.cosine_inverse_col(&coeffs, &mut back);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cosine_transform_resolves_pure_mode() {
        let torus: TorusGrid2<f64> = TorusGrid2::new(8, 8).unwrap();
        let zmax = 3.0;
        let slab = SlabGrid3::new(torus, 10, zmax).unwrap();
        let vals: Vec<f64> = slab
            .z_nodes()
            .iter()
            .map(|&z| (3.0 * std::f64::consts::PI * z / zmax).cos())
            .collect();
        let mut coeffs = vec![0.0; 10];
        slab.cosine_forward_col(&vals, &mut coeffs);
        for (m, &c) in coeffs.iter().enumerate() {
            let want = if m == 3 { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-10, "m={m} c={c}");
        }
    }

    #[test]
    fn z_nodes_start_at_zero_and_increase() {
        let torus: TorusGrid2<f64> = TorusGrid2::new(8, 8).unwrap();
        let slab = SlabGrid3::new(torus, 9, 1.5).unwrap();
        assert_eq!(slab.z_nodes()[0], 0.0);
        assert!(slab.z_nodes().windows(2).all(|w| w[1] > w[0]));
        assert!((slab.z_nodes()[8] - 1.5).abs() < 1e-15);
    }
}
