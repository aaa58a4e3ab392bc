//! Poisson-semigroup space-time machinery: Duhamel convolutions against
//! the boundary semigroup `e^{−t(−Δ̄)^{1/2}}`, additive-regularity
//! probes for products of Hölder data, the Besov forcing bound, and the
//! trace-to-velocity regularity transfer through the harmonic extension.
//!
//! All quadrature is exact per mode against piecewise-linear-in-time
//! sources, so fitted constants measure the analysis, not the
//! integrator.

use crate::calibration;
use crate::degiorgi::{TimedField, TimedVelocity};
use crate::field::BoundaryField as GenBoundaryField;
use crate::norms::{besov_norm_bands, holder_norm, InequalityVerdict, NormReport};
use crate::spectral::{partial, poisson_extend, riesz_transform};
use crate::{BoundaryField, QgError, Result};
use num_complex::Complex;
use std::f64::consts::PI;

type C = Complex<f64>;

const MEAN_TOL: f64 = 1e-10;

/// Spectral divergence of a boundary vector field.
pub fn divergence(x: &BoundaryField, y: &BoundaryField) -> Result<BoundaryField> {
    let dx = partial(x, 1);
    let dy = partial(y, 2);
    dx.add(&dy)
}

/// A time-sampled Duhamel source with exact per-mode convolution
/// against the boundary semigroup.
#[derive(Clone, Debug)]
pub struct DuhamelSeries {
    pub nodes: Vec<TimedField>,
}

impl DuhamelSeries {
    /// Validates ordering and mean-freeness of the source samples.
    pub fn new(nodes: Vec<TimedField>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(QgError::WindowMismatch(
                "Duhamel series needs at least two samples".into(),
            ));
        }
        for w in nodes.windows(2) {
            if w[1].t <= w[0].t {
                return Err(QgError::InvalidParameter(
                    "Duhamel series times must be strictly increasing".into(),
                ));
            }
        }
        for n in &nodes {
            if n.field.mean().abs() > MEAN_TOL {
                return Err(QgError::MeanModeSingularity(
                    "Duhamel source must be mean-free",
                ));
            }
        }
        Ok(Self { nodes })
    }

    pub fn convolve(&self, t: f64) -> Result<BoundaryField> {
        duhamel_convolve(&self.nodes, t)
    }
}

/// `ĝ(t, k) = ∫_{t_0}^{t} e^{−(t−s)|k|} ŝ(s, k) ds` with the source
/// interpolated linearly in time between its samples and each
/// subinterval integrated in closed form; the mean mode is pinned to
/// zero. `t` must lie inside the sampled span.
pub fn duhamel_convolve(series: &[TimedField], t: f64) -> Result<BoundaryField> {
    if series.len() < 2 {
        return Err(QgError::WindowMismatch(
            "Duhamel source needs at least two samples".into(),
        ));
    }
    let lo = series[0].t;
    let hi = series[series.len() - 1].t;
    let tol = 1e-12 * (1.0 + hi.abs() + lo.abs());
    if t < lo - tol || t > hi + tol {
        return Err(QgError::TimeOutOfSpan { t, lo, hi });
    }
    for s in series {
        if s.field.mean().abs() > MEAN_TOL {
            return Err(QgError::MeanModeSingularity(
                "Duhamel source must be mean-free",
            ));
        }
    }
    let grid = series[0].field.grid().clone();
    let n = grid.len();
    let mut kabs = vec![0.0f64; n];
    for ix in 0..grid.n1 {
        for iy in 0..grid.n2 {
            let (k1, k2) = grid.k(ix, iy);
            kabs[ix * grid.n2 + iy] = ((k1 * k1 + k2 * k2) as f64).sqrt();
        }
    }
    let mut acc = vec![C::new(0.0, 0.0); n];
    for w in series.windows(2) {
        let a = w[0].t;
        if a >= t {
            break;
        }
        let b = w[1].t.min(t);
        if b <= a {
            continue;
        }
        let span = w[1].t - w[0].t;
        let ca = w[0].field.coeffs();
        let cb = w[1].field.coeffs();
        for idx in 0..n {
            let kap = kabs[idx];
            if kap == 0.0 {
                continue;
            }
            let value = ca[idx];
            let slope = (cb[idx] - ca[idx]) / span;
            // ∫_a^b e^{−κ(t−s)} ds and ∫_a^b (s−a) e^{−κ(t−s)} ds
            let ea = (-kap * (t - a)).exp();
            let eb = (-kap * (t - b)).exp();
            let i0 = (eb - ea) / kap;
            let i1 = ((b - a) * eb - i0) / kap;
            acc[idx] += value * i0 + slope * i1;
        }
    }
    acc[0] = C::new(0.0, 0.0);
    GenBoundaryField::from_coeffs(&grid, acc)
}

/// The homogeneous semigroup term `P_t ∗ θ₀` (time plays the role of
/// the extension height).
pub fn semigroup_decay(theta0: &BoundaryField, t: f64) -> Result<BoundaryField> {
    poisson_extend(theta0, t)
}

// ---------------------------------------------------------------------
// Additive regularity probe
// ---------------------------------------------------------------------

/// One bootstrap rung: the measured difference quotient of the Duhamel
/// output at the additive exponent `α = α₁ + α₂` and its fitted
/// constant relative to `‖f‖_{C^{α₁}} ‖h‖_{L^∞(C^{α₂})}`.
#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub probe: String,
    pub alpha: f64,
    pub quotient: f64,
    pub const_fit: f64,
    /// Set when anchoring annihilated the data (constant fields).
    pub degenerate: bool,
}

impl ProbeReport {
    pub fn csv_header() -> &'static str {
        "probe,alpha,quotient,const_fit"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.probe, self.alpha, self.quotient, self.const_fit
        )
    }
}

fn wrap(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t >= PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// First-difference Hölder quotient of `g` anchored at the origin:
/// `sup_x |g(x) − g(0)| / dist(x, 0)^α` over grid nodes.
pub fn first_difference_quotient(g: &BoundaryField, alpha: f64) -> f64 {
    let grid = g.grid();
    let g0 = g.at(0, 0);
    let mut sup = 0.0f64;
    for ix in 0..grid.n1 {
        for iy in 0..grid.n2 {
            if ix == 0 && iy == 0 {
                continue;
            }
            let (x, y) = grid.node(ix, iy);
            let d = wrap(x).hypot(wrap(y));
            sup = sup.max((g.at(ix, iy) - g0).abs() / d.powf(alpha));
        }
    }
    sup
}

/// Second-difference quotient `sup_x |g(x) − 2g(0) + g(−x)| / |x|^α`,
/// the right object for exponents `1 ≤ α < 2`.
pub fn second_difference_quotient(g: &BoundaryField, alpha: f64) -> f64 {
    let grid = g.grid();
    let g0 = g.at(0, 0);
    let mut sup = 0.0f64;
    for ix in 0..grid.n1 {
        for iy in 0..grid.n2 {
            if ix == 0 && iy == 0 {
                continue;
            }
            let (x, y) = grid.node(ix, iy);
            let d = wrap(x).hypot(wrap(y));
            let mirror = g.at((grid.n1 - ix) % grid.n1, (grid.n2 - iy) % grid.n2);
            sup = sup.max((g.at(ix, iy) - 2.0 * g0 + mirror).abs() / d.powf(alpha));
        }
    }
    sup
}

/// Builds `g = ∫ P_{t−s} ∗ div(h f) ds` from anchored Hölder data and
/// measures its difference quotient at the additive exponent
/// `α = α₁ + α₂` (first differences below 1, second differences in
/// `[1, 2)`). Anchoring subtracts `f(t₀, 0)` from `f` and `h(t, 0)`
/// from each `h` sample.
pub fn additive_regularity_probe(
    f_series: &[TimedField],
    h_series: &[TimedVelocity],
    alpha1: f64,
    alpha2: f64,
    t0: f64,
) -> Result<ProbeReport> {
    if !(alpha1 > 0.0 && alpha2 > 0.0 && alpha1 + alpha2 < 2.0) {
        return Err(QgError::InvalidParameter(format!(
            "probe exponents must be positive with α₁+α₂ < 2, got ({alpha1}, {alpha2})"
        )));
    }
    if f_series.len() != h_series.len() || f_series.len() < 2 {
        return Err(QgError::WindowMismatch(
            "probe needs matching f and h series with at least two samples".into(),
        ));
    }
    let alpha = alpha1 + alpha2;
    // anchoring
    let f_anchor = {
        // value of f at the origin at the sample nearest t0
        let nearest = f_series
            .iter()
            .min_by(|a, b| {
                (a.t - t0).abs().partial_cmp(&(b.t - t0).abs()).unwrap()
            })
            .unwrap();
        nearest.field.at(0, 0)
    };
    let mut source = Vec::with_capacity(f_series.len());
    let mut f_norm = 0.0f64;
    let mut h_norm = 0.0f64;
    for (fs, hs) in f_series.iter().zip(h_series) {
        let f = fs.field.map_values(|v| v - f_anchor);
        let h1 = hs.u1.map_values({
            let a = hs.u1.at(0, 0);
            move |v| v - a
        });
        let h2 = hs.u2.map_values({
            let a = hs.u2.at(0, 0);
            move |v| v - a
        });
        if fs.t <= t0 + 1e-12 {
            f_norm = f_norm.max(holder_norm(&f, alpha1).value);
            h_norm = h_norm
                .max(holder_norm(&h1, alpha2).value)
                .max(holder_norm(&h2, alpha2).value);
        }
        let p1 = f.zip_values(&h1, |a, b| a * b)?;
        let p2 = f.zip_values(&h2, |a, b| a * b)?;
        source.push(TimedField {
            t: fs.t,
            field: divergence(&p1, &p2)?,
        });
    }
    let denom = f_norm * h_norm;
    if denom == 0.0 {
        return Ok(ProbeReport {
            probe: format!("additive_{alpha1}+{alpha2}"),
            alpha,
            quotient: 0.0,
            const_fit: 0.0,
            degenerate: true,
        });
    }
    let g = duhamel_convolve(&source, t0)?;
    let quotient = if alpha < 1.0 {
        first_difference_quotient(&g, alpha)
    } else {
        second_difference_quotient(&g, alpha)
    };
    Ok(ProbeReport {
        probe: format!("additive_{alpha1}+{alpha2}"),
        alpha,
        quotient,
        const_fit: quotient / denom,
        degenerate: false,
    })
}

// ---------------------------------------------------------------------
// Besov forcing bound and velocity transfer
// ---------------------------------------------------------------------

/// Audits `sup_t ‖g(t)‖_{B¹_{∞,∞}} ≤ C · sup_t ‖ω(t)‖_{B¹_{∞,∞}}`
/// for `g = ∫ P_{t−s} ∗ div ω ds`, at the frozen calibration constant.
pub fn besov_forcing_bound(omega_series: &[TimedVelocity]) -> Result<InequalityVerdict> {
    if omega_series.len() < 2 {
        return Err(QgError::WindowMismatch(
            "need at least two vector samples".into(),
        ));
    }
    let mut source = Vec::with_capacity(omega_series.len());
    let mut rhs = 0.0f64;
    for s in omega_series {
        rhs = rhs
            .max(besov_norm_bands(&s.u1, 1.0).value)
            .max(besov_norm_bands(&s.u2, 1.0).value);
        source.push(TimedField {
            t: s.t,
            field: divergence(&s.u1, &s.u2)?,
        });
    }
    let mut lhs = 0.0f64;
    for s in source.iter().skip(1) {
        let g = duhamel_convolve(&source, s.t)?;
        lhs = lhs.max(besov_norm_bands(&g, 1.0).value);
    }
    Ok(InequalityVerdict::at_constant(
        "besov_forcing",
        lhs,
        rhs,
        calibration::BESOV_FORCING_C,
    ))
}

/// Heights scanned by [`velocity_regularity_transfer`].
pub fn height_ladder() -> Vec<f64> {
    let mut z = vec![0.0];
    let mut v = 1.0 / 64.0;
    while v <= 8.0 {
        z.push(v);
        v *= 2.0;
    }
    z
}

/// Transfers trace regularity to the harmonic velocity: over a ladder
/// of heights, evaluates the three components
/// `(P_z ∗ θ, R₁ P_z ∗ θ, R₂ P_z ∗ θ)` and reports the supremum of
/// their `B¹_{∞,∞}` norms. Poisson damping makes `z = 0` dominant.
pub fn velocity_regularity_transfer(theta: &BoundaryField) -> Result<NormReport> {
    if theta.mean().abs() > MEAN_TOL {
        return Err(QgError::MeanModeSingularity(
            "trace must be mean-free for the Riesz components",
        ));
    }
    let grid = theta.grid();
    let mut sup = 0.0f64;
    for z in height_ladder() {
        let p = poisson_extend(theta, z)?;
        let r1 = riesz_transform(&p, 1)?;
        let r2 = riesz_transform(&p, 2)?;
        for comp in [&p, &r1, &r2] {
            sup = sup.max(besov_norm_bands(comp, 1.0).value);
        }
    }
    Ok(NormReport {
        name: "grad_psi1_b1_sup_z".into(),
        s: Some(1.0),
        p: Some(f64::INFINITY),
        q: Some(f64::INFINITY),
        value: sup,
        resolution: format!("{}x{}", grid.n1, grid.n2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BoundaryField as BF;
    use crate::TorusGrid2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> TorusGrid2 {
        TorusGrid2::new(n, n).unwrap()
    }

    fn steady_series(g: &TorusGrid2, f: impl Fn(f64, f64) -> f64, times: &[f64]) -> Vec<TimedField> {
        let field = BF::from_fn(g, f);
        times
            .iter()
            .map(|&t| TimedField {
                t,
                field: field.clone(),
            })
            .collect()
    }

    fn random_band_field(g: &TorusGrid2, seed: u64, k_max: f64) -> BF<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = BF::zeros(g);
        // sum of a few random low modes, mean-free by construction
        for _ in 0..12 {
            let k1 = rng.gen_range(-(k_max as i64)..=(k_max as i64));
            let k2 = rng.gen_range(-(k_max as i64)..=(k_max as i64));
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let amp: f64 = rng.gen_range(-1.0..1.0);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let add = BF::from_fn(g, |x, y| amp * (k1 as f64 * x + k2 as f64 * y + phase).cos());
            f = f.add(&add).unwrap();
        }
        f
    }

    #[test]
    fn duhamel_steady_single_mode_closed_form() {
        let g = grid(16);
        let series = steady_series(&g, |x, _| -(x.sin()), &[0.0, 0.5, 1.0]);
        let t = 1.0;
        let out = duhamel_convolve(&series, t).unwrap();
        let want = BF::from_fn(&g, |x, _| -(1.0 - (-t).exp()) * x.sin());
        let err = out
            .values()
            .iter()
            .zip(want.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-14, "closed-form error {err}");
    }

    #[test]
    fn duhamel_zero_source() {
        let g = grid(16);
        let series = steady_series(&g, |_, _| 0.0, &[0.0, 1.0]);
        let out = duhamel_convolve(&series, 1.0).unwrap();
        assert!(out.linf() == 0.0);
    }

    #[test]
    fn duhamel_time_out_of_span_rejected() {
        let g = grid(8);
        let series = steady_series(&g, |x, _| x.cos(), &[0.0, 1.0]);
        assert!(matches!(
            duhamel_convolve(&series, 2.0),
            Err(QgError::TimeOutOfSpan { .. })
        ));
    }

    #[test]
    fn duhamel_oscillatory_mode_matches_analytic_integral() {
        // source cos(ωs)·cos x on |k| = 1:
        // g(t) = (cos ωt + ω sin ωt − e^{−t}) / (1 + ω²) · cos x
        let g = grid(8);
        let omega = 3.0;
        let t = 1.0;
        let nsamp = 20_000usize;
        let series: Vec<TimedField> = (0..=nsamp)
            .map(|i| {
                let s = t * i as f64 / nsamp as f64;
                TimedField {
                    t: s,
                    field: BF::from_fn(&g, |x, _| (omega * s).cos() * x.cos()),
                }
            })
            .collect();
        let out = duhamel_convolve(&series, t).unwrap();
        let amp = ((omega * t).cos() + omega * (omega * t).sin() - (-t).exp())
            / (1.0 + omega * omega);
        let want = BF::from_fn(&g, |x, _| amp * x.cos());
        let err = out
            .values()
            .iter()
            .zip(want.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "quadrature error {err}");
    }

    #[test]
    fn duhamel_refinement_is_second_order() {
        let g = grid(8);
        let omega = 2.0;
        let t = 1.0;
        let run = |nsamp: usize| {
            let series: Vec<TimedField> = (0..=nsamp)
                .map(|i| {
                    let s = t * i as f64 / nsamp as f64;
                    TimedField {
                        t: s,
                        field: BF::from_fn(&g, |x, _| (omega * s).cos() * x.cos()),
                    }
                })
                .collect();
            let out = duhamel_convolve(&series, t).unwrap();
            let amp = ((omega * t).cos() + omega * (omega * t).sin() - (-t).exp())
                / (1.0 + omega * omega);
            let want = BF::from_fn(&g, |x, _| amp * x.cos());
            out.values()
                .iter()
                .zip(want.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (run(32), run(64));
        let ratio = e1 / e2;
        assert!(ratio > 3.5, "refinement ratio {ratio} (e1={e1}, e2={e2})");
    }

    #[test]
    fn duhamel_series_validation() {
        let g = grid(8);
        // non-mean-free source rejected
        let bad = steady_series(&g, |_, _| 1.0, &[0.0, 1.0]);
        assert!(matches!(
            DuhamelSeries::new(bad),
            Err(QgError::MeanModeSingularity(_))
        ));
        let good = steady_series(&g, |x, _| x.cos(), &[0.0, 1.0]);
        assert!(DuhamelSeries::new(good).is_ok());
    }

    #[test]
    fn semigroup_term_matches_exponential_decay() {
        let g = grid(16);
        let theta = BF::from_fn(&g, |x, y| (2.0 * x).cos() + (x + y).sin());
        let t = 0.7;
        let decayed = semigroup_decay(&theta, t).unwrap();
        let want = BF::from_fn(&g, |x, y| {
            (-2.0 * t).exp() * (2.0 * x).cos() + (-(2.0f64).sqrt() * t).exp() * (x + y).sin()
        });
        let err = decayed
            .values()
            .iter()
            .zip(want.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-13, "semigroup error {err}");
    }

    #[test]
    fn splitting_identity_along_a_solver_run() {
        // θ(t) = P_t θ₀ + ∫ P_{t−s}(−u·∇̄θ) + ∫ P_{t−s} Δ̄Ψ₂|₀,
        // to time-integrator order
        use crate::dynamics::{advance_with, QGState};
        use crate::field::SlabField as SF;
        use crate::spectral;
        use crate::SlabGrid3;
        let slab_grid = SlabGrid3::new(grid(16), 8, 2.0).unwrap();
        let theta0 = BF::from_fn(&slab_grid.torus, |x, y| {
            0.3 * x.cos() + 0.2 * (x + y).sin()
        });
        let pv0 = SF::from_fn(&slab_grid, |z, x, y| {
            0.2 * (PI * z / 2.0).cos() * ((2.0 * x).cos() + y.sin())
        });
        let state = QGState::new(theta0.clone(), pv0, 0.002).unwrap();
        let t_end = 0.2;
        let mut thetas: Vec<TimedField> = Vec::new();
        let mut advect: Vec<TimedField> = Vec::new();
        let mut force: Vec<TimedField> = Vec::new();
        let mut collect = |st: &QGState| {
            let psi0 = st.psi1.slice_at_node(0).add(&st.psi2.slice_at_node(0)).unwrap();
            let (u1, u2) = {
                let gp = spectral::perp_gradient(&psi0);
                (gp.0, gp.1)
            };
            let tx = spectral::partial(&st.theta, 1);
            let ty = spectral::partial(&st.theta, 2);
            let adv = u1
                .zip_values(&tx, |a, b| a * b)
                .unwrap()
                .add(&u2.zip_values(&ty, |a, b| a * b).unwrap())
                .unwrap()
                .scale(-1.0)
                .without_mean();
            let f0 = spectral::flat_laplacian(&st.psi2.slice_at_node(0));
            thetas.push(TimedField {
                t: st.t,
                field: st.theta.clone(),
            });
            advect.push(TimedField { t: st.t, field: adv });
            force.push(TimedField { t: st.t, field: f0 });
        };
        advance_with(&state, t_end, 1, 2.0 / 3.0, true, &mut collect).unwrap();
        let g0 = semigroup_decay(&theta0, t_end).unwrap();
        let g1 = duhamel_convolve(&advect, t_end).unwrap();
        let g2 = duhamel_convolve(&force, t_end).unwrap();
        let rebuilt = g0.add(&g1).unwrap().add(&g2).unwrap();
        let theta_t = &thetas.last().unwrap().field;
        let err = rebuilt
            .values()
            .iter()
            .zip(theta_t.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = theta_t.linf();
        assert!(err < 5e-3 * scale, "splitting residual {err} vs scale {scale}");
    }

    #[test]
    fn band_damping_under_poisson_extension() {
        let g = grid(64);
        let theta = random_band_field(&g, 7, 12.0).without_mean();
        let bands_0 = crate::bands::lp_decompose(&theta);
        for &z in &[0.1, 0.5, 1.5] {
            let damped = poisson_extend(&theta, z).unwrap();
            let bands_z = crate::bands::lp_decompose(&damped);
            for (j, b0) in bands_0.iter() {
                let lhs = bands_z.band(j).map(|b| b.linf()).unwrap_or(0.0);
                let cap = (-z * 2.0f64.powi(j - 1)).exp() * b0.linf();
                assert!(
                    lhs <= cap * (1.0 + 1e-10) + 1e-300,
                    "band {j} at z={z}: {lhs} > {cap}"
                );
            }
        }
    }

    #[test]
    fn riesz_band_boundedness() {
        let g = grid(64);
        let theta = random_band_field(&g, 9, 12.0).without_mean();
        let bands_0 = crate::bands::lp_decompose(&theta);
        for axis in [1u8, 2] {
            let r = riesz_transform(&theta, axis).unwrap();
            let bands_r = crate::bands::lp_decompose(&r);
            for (j, b0) in bands_0.iter() {
                let lhs = bands_r.band(j).map(|b| b.linf()).unwrap_or(0.0);
                let rhs = b0.linf();
                assert!(lhs <= rhs * (1.0 + 1e-10), "axis {axis} band {j}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn probe_zero_data_degenerate() {
        let g = grid(32);
        let f = steady_series(&g, |_, _| 0.0, &[0.0, 0.5, 1.0]);
        let h: Vec<TimedVelocity> = f
            .iter()
            .map(|s| TimedVelocity {
                t: s.t,
                u1: BF::zeros(&g),
                u2: BF::zeros(&g),
            })
            .collect();
        let r = additive_regularity_probe(&f, &h, 0.5, 0.5, 1.0).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.quotient, 0.0);
    }

    #[test]
    fn probe_anchored_modes_finite_constant() {
        // α₁ = α₂ = 1/2: additive exponent 1, second differences
        let g = grid(32);
        let times = [0.0, 0.25, 0.5, 0.75, 1.0];
        let f: Vec<TimedField> = times
            .iter()
            .map(|&t| TimedField {
                t,
                field: BF::from_fn(&g, |x, _| x.sin()), // anchored: sin 0 = 0
            })
            .collect();
        let h: Vec<TimedVelocity> = times
            .iter()
            .map(|&t| TimedVelocity {
                t,
                u1: BF::from_fn(&g, |_, y| y.sin()),
                u2: BF::zeros(&g),
            })
            .collect();
        let r = additive_regularity_probe(&f, &h, 0.5, 0.5, 1.0).unwrap();
        assert!(!r.degenerate);
        assert!((r.alpha - 1.0).abs() < 1e-15);
        assert!(r.quotient.is_finite() && r.quotient > 0.0);
        assert!(r.const_fit.is_finite() && r.const_fit > 0.0);
    }

    #[test]
    fn probe_cusp_regularity_is_additive() {
        // f ~ |x|^{0.4}, h ~ (|x|^{0.4}, 0): g must be at least C^{0.8}
        let g = grid(128);
        let sigma = 2.0 * PI / 128.0; // mollify at grid scale
        let cusp_field = || {
            BF::from_fn(&g, |x: f64, y: f64| wrap(x).hypot(wrap(y)).powf(0.4)).map_spectrum(
                |k1, k2| {
                    let ka2 = (k1 * k1 + k2 * k2) as f64;
                    Complex::new((-ka2 * sigma * sigma / 4.0).exp(), 0.0)
                },
            )
        };
        let times = [0.0, 0.5, 1.0];
        let f: Vec<TimedField> = times
            .iter()
            .map(|&t| TimedField {
                t,
                field: cusp_field(),
            })
            .collect();
        let h: Vec<TimedVelocity> = times
            .iter()
            .map(|&t| TimedVelocity {
                t,
                u1: cusp_field(),
                u2: BF::zeros(&g),
            })
            .collect();
        let r = additive_regularity_probe(&f, &h, 0.4, 0.4, 1.0).unwrap();
        assert!(!r.degenerate);
        // exponent estimate from dyadic band decay: ||Δ_j g||_∞ ~ 2^{-jα}.
        // Pointwise annulus fits converge far too slowly here: the Riesz-type
        // composite reaches its homogeneous local behaviour only at tiny radii.
        let source: Vec<TimedField> = times
            .iter()
            .map(|&t| {
                let ff = cusp_field();
                let p1 = ff.zip_values(&ff, |a, b| a * b).unwrap();
                TimedField {
                    t,
                    field: divergence(&p1, &BF::zeros(&g)).unwrap(),
                }
            })
            .collect();
        let gg = duhamel_convolve(&source, 1.0).unwrap();
        let bands = crate::bands::lp_decompose(&gg);
        // skip the lowest bands (dominated by the bounded global shape) and
        // the top two (mollifier roll-off)
        let mut logs = Vec::new();
        for (j, b) in bands.iter() {
            let v = b.linf();
            if j >= 2 && j <= bands.j_max - 2 && v > 0.0 {
                logs.push((j as f64, v.ln()));
            }
        }
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let alpha = -(sxy / sxx) / std::f64::consts::LN_2;
        assert!(
            alpha >= 0.8 - 0.05,
            "measured exponent {alpha} below additive 0.8"
        );
    }

    #[test]
    fn besov_forcing_steady_mode() {
        let g = grid(32);
        let times = [0.0, 0.5, 1.0];
        let omega: Vec<TimedVelocity> = times
            .iter()
            .map(|&t| TimedVelocity {
                t,
                u1: BF::from_fn(&g, |x, _| x.cos()),
                u2: BF::zeros(&g),
            })
            .collect();
        let v = besov_forcing_bound(&omega).unwrap();
        assert!(v.satisfied);
        assert!(v.lhs <= v.rhs + 1e-12, "C_fit = {}", v.lhs / v.rhs);
    }

    #[test]
    fn besov_forcing_zero_field() {
        let g = grid(16);
        let omega: Vec<TimedVelocity> = [0.0, 1.0]
            .iter()
            .map(|&t| TimedVelocity {
                t,
                u1: BF::zeros(&g),
                u2: BF::zeros(&g),
            })
            .collect();
        let v = besov_forcing_bound(&omega).unwrap();
        assert!(v.satisfied);
        assert_eq!(v.lhs, 0.0);
    }

    #[test]
    fn besov_forcing_constant_stable_under_resolution() {
        let fit = |n: usize| {
            let g = grid(n);
            let times = [0.0, 0.25, 0.5, 0.75, 1.0];
            let omega: Vec<TimedVelocity> = times
                .iter()
                .map(|&t| TimedVelocity {
                    t,
                    u1: random_band_field(&g, 21, 6.0).without_mean().scale(1.0 + t),
                    u2: random_band_field(&g, 22, 6.0).without_mean().scale(1.0 - 0.3 * t),
                })
                .collect();
            let v = besov_forcing_bound(&omega).unwrap();
            v.lhs / v.rhs
        };
        let (c32, c64) = (fit(32), fit(64));
        let ratio = c32 / c64;
        assert!(
            (0.8..=1.25).contains(&ratio),
            "C_fit resolution drift: {c32} vs {c64}"
        );
    }

    #[test]
    fn velocity_transfer_single_mode_dominated_by_boundary() {
        let g = grid(32);
        let theta = BF::from_fn(&g, |x, _| x.cos());
        let report = velocity_regularity_transfer(&theta).unwrap();
        let base = besov_norm_bands(&theta, 1.0).value;
        assert!((report.value - base).abs() < 1e-10, "sup_z = {}", report.value);
    }

    #[test]
    fn velocity_transfer_zero_and_random() {
        let g = grid(64);
        assert_eq!(
            velocity_regularity_transfer(&BF::zeros(&g)).unwrap().value,
            0.0
        );
        let theta = random_band_field(&g, 33, 10.0).without_mean();
        let report = velocity_regularity_transfer(&theta).unwrap();
        // Poisson damping: the ladder supremum is attained at z = 0,
        // and the Riesz components never enlarge a band
        let z0 = {
            let r1 = riesz_transform(&theta, 1).unwrap();
            let r2 = riesz_transform(&theta, 2).unwrap();
            besov_norm_bands(&theta, 1.0)
                .value
                .max(besov_norm_bands(&r1, 1.0).value)
                .max(besov_norm_bands(&r2, 1.0).value)
        };
        assert!(report.value <= z0 + 1e-10);
        assert!(report.value <= besov_norm_bands(&theta, 1.0).value * (1.0 + 1e-10));
    }
}
