//! Fourier multipliers on the torus: fractional Laplacian, Riesz
//! transforms, Poisson extension, and flat derivatives.

use crate::field::BoundaryField;
use crate::scalar::Real;
use crate::{QgError, Result};
use num_complex::Complex;

/// `(−Δ̄)^α f`: coefficient at `k` multiplied by `|k|^{2α}`; the `k = 0`
/// coefficient is set to zero. `α < 0` requires a mean-free input.
pub fn fractional_laplacian<T: Real>(f: &BoundaryField<T>, alpha: T) -> Result<BoundaryField<T>> {
    if alpha < T::from_f64_(-1.0) || alpha > T::from_f64_(2.0) {
        return Err(QgError::InvalidParameter(format!(
            "fractional exponent out of [-1, 2]: {alpha}"
        )));
    }
    if alpha < T::zero() && f.mean().abs() > T::from_f64_(1e-12) {
        return Err(QgError::MeanModeSingularity(
            "negative fractional power requires a mean-free field",
        ));
    }
    let two = T::from_f64_(2.0);
    Ok(f.map_spectrum(|k1, k2| {
        if k1 == 0 && k2 == 0 {
            Complex::new(T::zero(), T::zero())
        } else {
            let ka = T::from_f64_(((k1 * k1 + k2 * k2) as f64).sqrt());
            Complex::new(ka.powf(two * alpha), T::zero())
        }
    }))
}

/// Riesz transform `R_axis f`, multiplier `i k_axis / |k|`; the mean mode
/// and the unpaired Nyquist modes are zeroed so the output stays real.
pub fn riesz_transform<T: Real>(f: &BoundaryField<T>, axis: u8) -> Result<BoundaryField<T>> {
    if axis != 1 && axis != 2 {
        return Err(QgError::InvalidParameter(format!(
            "riesz axis must be 1 or 2, got {axis}"
        )));
    }
    let g = f.grid().clone();
    let (ny1, ny2) = (g.n1 as i64 / 2, g.n2 as i64 / 2);
    Ok(f.map_spectrum(move |k1, k2| {
        if (k1 == 0 && k2 == 0) || k1 == -ny1 || k2 == -ny2 {
            return Complex::new(T::zero(), T::zero());
        }
        let ka = T::from_f64_(((k1 * k1 + k2 * k2) as f64).sqrt());
        let kc = if axis == 1 { k1 } else { k2 };
        Complex::new(T::zero(), T::from_f64_(kc as f64) / ka)
    }))
}

/// Poisson extension `P_z ∗ f`: coefficient at `k` multiplied by
/// `e^{−z|k|}`.
pub fn poisson_extend<T: Real>(f: &BoundaryField<T>, z: T) -> Result<BoundaryField<T>> {
    if z < T::zero() {
        return Err(QgError::NegativeHeight(z.to_f64().unwrap_or(f64::NAN)));
    }
    if z == T::zero() {
        return Ok(f.clone());
    }
    Ok(f.map_spectrum(move |k1, k2| {
        let ka = T::from_f64_(((k1 * k1 + k2 * k2) as f64).sqrt());
        Complex::new((-z * ka).exp(), T::zero())
    }))
}

/// Flat partial derivative `∂_axis f`, multiplier `i k_axis` with the
/// unpaired Nyquist mode zeroed.
pub fn partial<T: Real>(f: &BoundaryField<T>, axis: u8) -> BoundaryField<T> {
    let g = f.grid().clone();
    let (ny1, ny2) = (g.n1 as i64 / 2, g.n2 as i64 / 2);
    f.map_spectrum(move |k1, k2| {
        if k1 == -ny1 || k2 == -ny2 {
            return Complex::new(T::zero(), T::zero());
        }
        let kc = if axis == 1 { k1 } else { k2 };
        Complex::new(T::zero(), T::from_f64_(kc as f64))
    })
}

/// Flat gradient `∇̄f = (∂₁f, ∂₂f)`.
pub fn gradient<T: Real>(f: &BoundaryField<T>) -> (BoundaryField<T>, BoundaryField<T>) {
    (partial(f, 1), partial(f, 2))
}

/// Perpendicular flat gradient `∇̄⊥f = (−∂₂f, ∂₁f)`, the divergence-free
/// velocity of a stream function.
pub fn perp_gradient<T: Real>(f: &BoundaryField<T>) -> (BoundaryField<T>, BoundaryField<T>) {
    (partial(f, 2).scale(-T::one()), partial(f, 1))
}

/// Flat Laplacian `Δ̄f`, multiplier `−|k|²`.
pub fn flat_laplacian<T: Real>(f: &BoundaryField<T>) -> BoundaryField<T> {
    f.map_spectrum(|k1, k2| Complex::new(-T::from_f64_((k1 * k1 + k2 * k2) as f64), T::zero()))
}

/// Mixed flat derivative `∂^a_1 ∂^b_2 f` of total order `a + b`.
pub fn mixed_partial<T: Real>(f: &BoundaryField<T>, a: u32, b: u32) -> BoundaryField<T> {
    let mut out = f.clone();
    for _ in 0..a {
        out = partial(&out, 1);
    }
    for _ in 0..b {
        out = partial(&out, 2);
    }
    out
}

/// Zeroes every coefficient with `|k_i| > n_i/3` (the 2/3 rule), used on
/// quadratic products to prevent aliasing.
pub fn dealias_two_thirds<T: Real>(f: &BoundaryField<T>) -> BoundaryField<T> {
    let g = f.grid().clone();
    let c1 = g.n1 as i64 / 3;
    let c2 = g.n2 as i64 / 3;
    f.map_spectrum(move |k1, k2| {
        if k1.abs() > c1 || k2.abs() > c2 {
            Complex::new(T::zero(), T::zero())
        } else {
            Complex::new(T::one(), T::zero())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid2;

    fn g() -> TorusGrid2<f64> {
        TorusGrid2::new(32, 32).unwrap()
    }

    fn close(a: &BoundaryField<f64>, b: &BoundaryField<f64>, tol: f64) {
        let err = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < tol, "max deviation {err}");
    }

    #[test]
    fn half_laplacian_fixes_unit_mode() {
        let g = g();
        let f = BoundaryField::from_fn(&g, |x, _| x.cos());
        let out = fractional_laplacian(&f, 0.5).unwrap();
        close(&out, &f, 1e-12);
    }

    #[test]
    fn full_laplacian_scales_by_k_squared() {
        let g = g();
        let f = BoundaryField::from_fn(&g, |x, y| (2.0 * x + y).cos());
        let out = fractional_laplacian(&f, 1.0).unwrap();
        close(&out, &f.scale(5.0), 1e-11);
    }

    #[test]
    fn nonneg_power_kills_constants() {
        let g = g();
        let f = BoundaryField::from_fn(&g, |_, _| 3.0);
        for &a in &[0.25, 0.5, 1.0] {
            assert!(fractional_laplacian(&f, a).unwrap().linf() < 1e-13);
        }
    }

    #[test]
    fn negative_power_rejects_nonzero_mean() {
        let g = g();
        let f = BoundaryField::from_fn(&g, |x, _| 1.0 + x.cos());
        assert!(matches!(
            fractional_laplacian(&f, -0.25),
            Err(QgError::MeanModeSingularity(_))
        ));
    }

    #[test]
    fn riesz_on_single_modes() {
        let g = g();
        let sinx = BoundaryField::from_fn(&g, |x, _| x.sin());
        let cosx = BoundaryField::from_fn(&g, |x, _| x.cos());
        close(&riesz_transform(&sinx, 1).unwrap(), &cosx, 1e-12);
        assert!(riesz_transform(&sinx, 2).unwrap().linf() < 1e-13);
        // the multiplier applied to both conjugate modes of cos x2
        let cosy = BoundaryField::from_fn(&g, |_, y| y.cos());
        let siny = BoundaryField::from_fn(&g, |_, y| y.sin());
        close(&riesz_transform(&cosy, 2).unwrap(), &siny.scale(-1.0), 1e-12);
    }

    #[test]
    fn riesz_skew_symmetry() {
        let g = g();
        let f = BoundaryField::from_fn(&g, |x, y| (2.0 * x).cos() + (3.0 * y + x).sin());
        let h = BoundaryField::from_fn(&g, |x, y| (x + y).sin() - (4.0 * y).cos());
        let f = f.without_mean();
        let h = h.without_mean();
        for axis in [1u8, 2] {
            let lhs = riesz_transform(&f, axis).unwrap().inner(&h).unwrap();
            let rhs = f.inner(&riesz_transform(&h, axis).unwrap()).unwrap();
            assert!((lhs + rhs).abs() < 1e-10, "axis {axis}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn poisson_extension_damps_and_composes() {
        let g = g();
        let f = BoundaryField::from_fn(&g, |x, _| x.cos());
        let out = poisson_extend(&f, 1.0).unwrap();
        close(&out, &f.scale((-1.0f64).exp()), 1e-12);
        // identity at z = 0
        let multi = BoundaryField::from_fn(&g, |x, y| (3.0 * x).cos() + (x - 2.0 * y).sin());
        close(&poisson_extend(&multi, 0.0).unwrap(), &multi, 1e-15);
        // semigroup composition
        let ab = poisson_extend(&poisson_extend(&multi, 0.4).unwrap(), 0.9).unwrap();
        let once = poisson_extend(&multi, 1.3).unwrap();
        close(&ab, &once, 1e-12);
        assert!(poisson_extend(&f, -0.1).is_err());
    }

    #[test]
    fn poisson_is_an_linf_contraction() {
        let g = g();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let c: f64 = rng.gen_range(-1.0..1.0);
            let f = BoundaryField::from_fn(&g, |x, y| {
                a * (3.0 * x).cos() + b * (x + 2.0 * y).sin() + c * (5.0 * y - x).cos()
            });
            let z = rng.gen_range(0.0..3.0);
            assert!(poisson_extend(&f, z).unwrap().linf() <= f.linf() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn perp_gradient_is_divergence_free() {
        let g = g();
        let psi = BoundaryField::from_fn(&g, |x, y| (3.0 * x).cos() * (2.0 * y).sin());
        let (u1, u2) = perp_gradient(&psi);
        let div = partial(&u1, 1).add(&partial(&u2, 2)).unwrap();
        assert!(div.linf() < 1e-11);
    }

    #[test]
    fn flat_laplacian_matches_gradient_composition() {
        let g = g();
        let f = BoundaryField::from_fn(&g, |x, y| (2.0 * x + 3.0 * y).sin());
        let lap = flat_laplacian(&f);
        close(&lap, &f.scale(-13.0), 1e-10);
    }

    #[test]
    fn dealias_keeps_low_modes_untouched() {
        let g = g();
        let f = BoundaryField::from_fn(&g, |x, y| (5.0 * x).cos() + (12.0 * y).sin());
        let d = dealias_two_thirds(&f);
        // |k| = 5 survives (cutoff 10), |k| = 12 removed
        let keep = BoundaryField::from_fn(&g, |x, _| (5.0 * x).cos());
        close(&d, &keep, 1e-12);
    }
}
