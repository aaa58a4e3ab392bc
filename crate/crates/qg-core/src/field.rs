//! Scalar fields on the torus and on the slab, held in dual
//! physical/spectral form.

use crate::grid::{SlabGrid3, TorusGrid2};
use crate::scalar::Real;
use crate::{QgError, Result};
use num_complex::Complex;

/// Real scalar field on [`TorusGrid2`], synchronized physical values and
/// Fourier coefficients.
#[derive(Clone, Debug)]
pub struct BoundaryField<T: Real> {
    grid: TorusGrid2<T>,
    values: Vec<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> BoundaryField<T> {
    pub fn zeros(grid: &TorusGrid2<T>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![T::zero(); grid.len()],
            coeffs: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        }
    }

    pub fn from_values(grid: &TorusGrid2<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(QgError::GridMismatch("value buffer length"));
        }
        let coeffs = grid.forward(&values);
        Ok(Self {
            grid: grid.clone(),
            values,
            coeffs,
        })
    }

    /// Builds a field from spectral coefficients. The coefficients are
    /// assumed Hermitian-symmetric (real field); the physical values are
    /// the real part of the inverse transform.
    pub fn from_coeffs(grid: &TorusGrid2<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(QgError::GridMismatch("coefficient buffer length"));
        }
        let values = grid.inverse(&coeffs);
        Ok(Self {
            grid: grid.clone(),
            values,
            coeffs,
        })
    }

    /// Samples `f(x1, x2)` on the grid nodes.
    pub fn from_fn(grid: &TorusGrid2<T>, f: impl Fn(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for ix in 0..grid.n1 {
            for iy in 0..grid.n2 {
                let (x, y) = grid.node(ix, iy);
                values.push(f(x, y));
            }
        }
        Self::from_values(grid, values).expect("length matches by construction")
    }

    pub fn grid(&self) -> &TorusGrid2<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// Value at node `(ix, iy)`.
    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> T {
        self.values[ix * self.grid.n2 + iy]
    }

    /// Mean value (the k = 0 coefficient).
    pub fn mean(&self) -> T {
        self.coeffs[0].re
    }

    pub fn is_mean_zero(&self, tol: T) -> bool {
        self.mean().abs() <= tol
    }

    /// Applies a spectral multiplier `m(k1, k2)`; the k = 0 bin is passed
    /// through like any other (call with `m(0,0)` as needed).
    pub fn map_spectrum(&self, m: impl Fn(i64, i64) -> Complex<T>) -> Self {
        let g = &self.grid;
        let mut coeffs = self.coeffs.clone();
        for ix in 0..g.n1 {
            for iy in 0..g.n2 {
                let (k1, k2) = g.k(ix, iy);
                let f = m(k1, k2);
                coeffs[ix * g.n2 + iy] = coeffs[ix * g.n2 + iy] * f;
            }
        }
        Self::from_coeffs(g, coeffs).expect("same grid")
    }

    /// Pointwise combination in physical space.
    pub fn zip_values(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.grid != other.grid {
            return Err(QgError::GridMismatch("zip_values"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(&self.grid, values)
    }

    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::from_values(&self.grid, values).expect("same grid")
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_values(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_values(other, |a, b| a - b)
    }

    /// Sup norm over grid nodes.
    pub fn linf(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// `L^p` norm by grid quadrature over the torus, `p >= 1`.
    pub fn lp(&self, p: T) -> T {
        let (h1, h2) = self.grid.spacing();
        let cell = h1 * h2;
        let s: T = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * cell).powf(T::one() / p)
    }

    /// `L²` norm by grid quadrature (Parseval-exact on band-limited data).
    pub fn l2(&self) -> T {
        self.lp(T::from_f64_(2.0))
    }

    /// Discrete inner product `∫ f g dx`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        if self.grid != other.grid {
            return Err(QgError::GridMismatch("inner"));
        }
        let (h1, h2) = self.grid.spacing();
        let cell = h1 * h2;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum::<T>()
            * cell)
    }

    /// Homogeneous Sobolev norm `(2π)² Σ_{k≠0} |k|^{2s} |f̂(k)|²`, rooted.
    pub fn sobolev_h(&self, s: T) -> T {
        let g = &self.grid;
        let tau2 = (T::from_f64_(2.0) * T::PI()).powi(2);
        let mut acc = T::zero();
        for ix in 0..g.n1 {
            for iy in 0..g.n2 {
                if ix == 0 && iy == 0 {
                    continue;
                }
                let ka = g.k_abs(ix, iy);
                acc += ka.powf(T::from_f64_(2.0) * s) * self.coeffs[ix * g.n2 + iy].norm_sqr();
            }
        }
        (tau2 * acc).sqrt()
    }

    /// Zeroes the k = 0 coefficient.
    pub fn without_mean(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] = Complex::new(T::zero(), T::zero());
        Self::from_coeffs(&self.grid, coeffs).expect("same grid")
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Bilinear interpolation at physical coordinates, periodic wrap.
    pub fn sample(&self, x: T, y: T) -> T {
        let g = &self.grid;
        let tau = T::from_f64_(2.0) * T::PI();
        let fx = (x / tau * T::from_usize_(g.n1)).rem_euclid(&T::from_usize_(g.n1));
        let fy = (y / tau * T::from_usize_(g.n2)).rem_euclid(&T::from_usize_(g.n2));
        let ix = fx.floor().to_usize().unwrap_or(0) % g.n1;
        let iy = fy.floor().to_usize().unwrap_or(0) % g.n2;
        let tx = fx - fx.floor();
        let ty = fy - fy.floor();
        let ix1 = (ix + 1) % g.n1;
        let iy1 = (iy + 1) % g.n2;
        let f00 = self.at(ix, iy);
        let f10 = self.at(ix1, iy);
        let f01 = self.at(ix, iy1);
        let f11 = self.at(ix1, iy1);
        f00 * (T::one() - tx) * (T::one() - ty)
            + f10 * tx * (T::one() - ty)
            + f01 * (T::one() - tx) * ty
            + f11 * tx * ty
    }
}

// rem_euclid is not on Float; small shim.
trait RemEuclid<T> {
    fn rem_euclid(&self, m: &T) -> T;
}
impl<T: Real> RemEuclid<T> for T {
    fn rem_euclid(&self, m: &T) -> T {
        let r = *self % *m;
        if r < T::zero() {
            r + *m
        } else {
            r
        }
    }
}

/// Real scalar field on [`SlabGrid3`]; values stored per z-level,
/// `iz * n1 * n2 + ix * n2 + iy`.
#[derive(Clone, Debug)]
pub struct SlabField<T: Real> {
    grid: SlabGrid3<T>,
    values: Vec<T>,
}

impl<T: Real> SlabField<T> {
    pub fn zeros(grid: &SlabGrid3<T>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![T::zero(); grid.torus.len() * grid.nz],
        }
    }

    pub fn from_values(grid: &SlabGrid3<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.torus.len() * grid.nz {
            return Err(QgError::GridMismatch("slab value buffer length"));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &SlabGrid3<T>, f: impl Fn(T, T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.torus.len() * grid.nz);
        for iz in 0..grid.nz {
            let z = grid.z_nodes()[iz];
            for ix in 0..grid.torus.n1 {
                for iy in 0..grid.torus.n2 {
                    let (x, y) = grid.torus.node(ix, iy);
                    values.push(f(z, x, y));
                }
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &SlabGrid3<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn slice_values(&self, iz: usize) -> &[T] {
        let n = self.grid.torus.len();
        &self.values[iz * n..(iz + 1) * n]
    }

    /// Exact restriction at a z-node.
    pub fn slice_at_node(&self, iz: usize) -> BoundaryField<T> {
        BoundaryField::from_values(&self.grid.torus, self.slice_values(iz).to_vec())
            .expect("torus slice")
    }

    /// z-slice at arbitrary height: exact at nodes, cubic Hermite
    /// (finite-difference slopes) between them.
    pub fn trace_slice(&self, z0: T) -> Result<BoundaryField<T>> {
        let zm = self.grid.z_max;
        if z0 < T::zero() || z0 > zm {
            return Err(QgError::HeightOutOfRange {
                z: z0.to_f64().unwrap_or(f64::NAN),
                z_max: zm.to_f64().unwrap_or(f64::NAN),
            });
        }
        let dz = self.grid.dz();
        let pos = z0 / dz;
        let i = pos
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.grid.nz - 1);
        let t = pos - T::from_usize_(i);
        if t.abs() < T::from_f64_(1e-14) {
            return Ok(self.slice_at_node(i));
        }
        let n = self.grid.torus.len();
        let nz = self.grid.nz;
        let get = |iz: usize, j: usize| self.values[iz * n + j];
        let mut out = vec![T::zero(); n];
        let half = T::from_f64_(0.5);
        for (j, o) in out.iter_mut().enumerate() {
            let f0 = get(i, j);
            let f1 = get(i + 1, j);
            // one-sided slopes at the slab caps
            let d0 = if i == 0 {
                f1 - f0
            } else {
                (f1 - get(i - 1, j)) * half
            };
            let d1 = if i + 2 >= nz {
                f1 - f0
            } else {
                (get(i + 2, j) - f0) * half
            };
            let t2 = t * t;
            let t3 = t2 * t;
            let two = T::from_f64_(2.0);
            let three = T::from_f64_(3.0);
            *o = (two * t3 - three * t2 + T::one()) * f0
                + (t3 - two * t2 + t) * d0
                + (three * t2 - two * t3) * f1
                + (t3 - t2) * d1;
        }
        BoundaryField::from_values(&self.grid.torus, out)
    }

    pub fn linf(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// `L^p` norm over the slab: torus quadrature in x, trapezoid in z.
    pub fn lp(&self, p: T) -> T {
        let (h1, h2) = self.grid.torus.spacing();
        let cell = h1 * h2;
        let dz = self.grid.dz();
        let mut acc = T::zero();
        for iz in 0..self.grid.nz {
            let w = if iz == 0 || iz == self.grid.nz - 1 {
                T::from_f64_(0.5)
            } else {
                T::one()
            };
            let s: T = self.slice_values(iz).iter().map(|v| v.abs().powf(p)).sum();
            acc += w * s;
        }
        (acc * cell * dz).powf(T::one() / p)
    }

    pub fn l2(&self) -> T {
        self.lp(T::from_f64_(2.0))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(QgError::GridMismatch("slab add"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a + b)
            .collect();
        Self::from_values(&self.grid, values)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v * s).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid2;

    fn grid16() -> TorusGrid2<f64> {
        TorusGrid2::new(16, 16).unwrap()
    }

    #[test]
    fn hermitian_roundtrip_bandlimited() {
        let g = grid16();
        let f = BoundaryField::from_fn(&g, |x, y| (3.0 * x).cos() * (2.0 * y).sin() + 0.7);
        let back = BoundaryField::from_coeffs(&g, f.coeffs().to_vec()).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_is_k0_coefficient() {
        let g = grid16();
        let f = BoundaryField::from_fn(&g, |x, _| 2.5 + x.cos());
        assert!((f.mean() - 2.5).abs() < 1e-13);
        assert!(f.without_mean().mean().abs() < 1e-15);
    }

    #[test]
    fn l2_matches_parseval() {
        let g = grid16();
        let f = BoundaryField::from_fn(&g, |x, y| x.cos() + (2.0 * y).sin());
        // ∫cos² + ∫sin² over (2π)² = 2π²+2π² = (2π)²
        let want = (2.0 * std::f64::consts::PI.powi(2) * 2.0).sqrt();
        assert!((f.l2() - want).abs() < 1e-12);
    }

    #[test]
    fn sobolev_h_half_convention() {
        let g = grid16();
        let f = BoundaryField::from_fn(&g, |x, _| x.cos());
        let want = (2.0 * std::f64::consts::PI).powi(2) / 2.0;
        assert!((f.sobolev_h(0.5).powi(2) - want).abs() < 1e-10);
    }

    #[test]
    fn trace_slice_endpoints_exact() {
        let g = grid16();
        let slab = crate::grid::SlabGrid3::new(g, 9, 2.0).unwrap();
        let u = SlabField::from_fn(&slab, |z, x, _| (-z).exp() * x.cos());
        let bot = u.trace_slice(0.0).unwrap();
        let expect = BoundaryField::from_fn(&slab.torus, |x, _| x.cos());
        for (a, b) in bot.values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(u.trace_slice(-0.1).is_err());
        assert!(u.trace_slice(2.1).is_err());
    }

    #[test]
    fn trace_slice_offnode_matches_profile() {
        let g = grid16();
        let slab = crate::grid::SlabGrid3::new(g, 33, 2.0).unwrap();
        let u = SlabField::from_fn(&slab, |z, x, _| (-z).exp() * x.cos());
        let s = u.trace_slice(0.731).unwrap();
        let expect = BoundaryField::from_fn(&slab.torus, |x, _| (-0.731f64).exp() * x.cos());
        let err: f64 = s
            .values()
            .iter()
            .zip(expect.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        // cubic interpolation at dz = 1/16
        assert!(err < 5e-6, "interpolation error {err}");
    }

    #[test]
    fn bilinear_sample_at_nodes() {
        let g = grid16();
        let f = BoundaryField::from_fn(&g, |x, y| x.cos() * y.sin());
        let (x, y) = g.node(3, 7);
        assert!((f.sample(x, y) - f.at(3, 7)).abs() < 1e-13);
        // periodic wrap
        assert!((f.sample(x + 2.0 * std::f64::consts::PI, y) - f.at(3, 7)).abs() < 1e-12);
    }
}
