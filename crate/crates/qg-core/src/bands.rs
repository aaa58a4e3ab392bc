//! Littlewood-Paley decomposition into sharp dyadic annuli.

use crate::field::BoundaryField;
use crate::scalar::Real;
use num_complex::Complex;

/// Sharp dyadic bands of a torus field: band `j` holds the modes with
/// `2^{j−1} < |k| ≤ 2^j`. Band 0 therefore holds `|k| = 1` modes only
/// in the lower half of its annulus sense (`1/2 < |k| ≤ 1`). The mean
/// mode belongs to no band.
#[derive(Clone, Debug)]
pub struct DyadicBandSet<T: Real> {
    pub j_min: i32,
    pub j_max: i32,
    bands: Vec<BoundaryField<T>>,
}

/// Band index of a nonzero integer frequency: the unique `j ≥ 0` with
/// `2^{j−1} < |k| ≤ 2^j`.
pub fn band_index(k_abs: f64) -> i32 {
    debug_assert!(k_abs > 0.0);
    k_abs.log2().ceil() as i32
}

/// Splits `f` into its sharp dyadic bands. Every `k ≠ 0` mode lands in
/// exactly one band, so the bands plus the mean reconstruct `f` exactly.
pub fn lp_decompose<T: Real>(f: &BoundaryField<T>) -> DyadicBandSet<T> {
    let g = f.grid();
    let mut j_max = 0;
    for ix in 0..g.n1 {
        for iy in 0..g.n2 {
            if ix == 0 && iy == 0 {
                continue;
            }
            j_max = j_max.max(band_index(g.k_abs(ix, iy).to_f64().unwrap()));
        }
    }
    let mut bands = Vec::with_capacity((j_max + 1) as usize);
    for j in 0..=j_max {
        let band = f.map_spectrum(|k1, k2| {
            if k1 == 0 && k2 == 0 {
                return Complex::new(T::zero(), T::zero());
            }
            let ka = ((k1 * k1 + k2 * k2) as f64).sqrt();
            if band_index(ka) == j {
                Complex::new(T::one(), T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        });
        bands.push(band);
    }
    DyadicBandSet {
        j_min: 0,
        j_max,
        bands,
    }
}

impl<T: Real> DyadicBandSet<T> {
    pub fn band(&self, j: i32) -> Option<&BoundaryField<T>> {
        if j < self.j_min || j > self.j_max {
            None
        } else {
            Some(&self.bands[(j - self.j_min) as usize])
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &BoundaryField<T>)> {
        self.bands
            .iter()
            .enumerate()
            .map(move |(i, b)| (self.j_min + i as i32, b))
    }

    /// Σ_j Δ_j f (mean mode excluded).
    pub fn reconstruct(&self) -> BoundaryField<T> {
        let mut acc = self.bands[0].clone();
        for b in &self.bands[1..] {
            acc = acc.add(b).expect("bands share one grid");
        }
        acc
    }
}
