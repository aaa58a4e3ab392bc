//! Norm estimators and functional-inequality checkers on boundary
//! fields: Besov, Hölder, Gagliardo, BMO, log-Lipschitz, negative
//! Sobolev, log-interpolation and commutator inequalities.

use crate::bands::lp_decompose;
use crate::calibration;
use crate::spectral::{mixed_partial, partial};
use crate::BoundaryField;

/// A named scalar norm evaluation with its parameters and the grid it
/// was computed on. Serializes as `name,s,p,q,value,resolution`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormReport {
    pub name: String,
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub value: f64,
    pub resolution: String,
}

impl NormReport {
    pub fn new(name: &str, value: f64, f: &BoundaryField) -> Self {
        Self {
            name: name.to_string(),
            s: None,
            p: None,
            q: None,
            value,
            resolution: resolution_of(f),
        }
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }

    pub fn csv_header() -> &'static str {
        "name,s,p,q,value,resolution"
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.name,
            opt(self.s),
            opt(self.p),
            opt(self.q),
            self.value,
            self.resolution
        )
    }
}

/// Outcome of a two-sided inequality check `lhs ≤ constant · rhs`.
/// Serializes as `name,lhs,rhs,constant,satisfied`.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityVerdict {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub satisfied: bool,
}

impl InequalityVerdict {
    /// Verdict at a given constant; `satisfied ⇔ lhs ≤ constant·rhs`.
    pub fn at_constant(name: &str, lhs: f64, rhs: f64, constant: f64) -> Self {
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            constant,
            satisfied: lhs <= constant * rhs || (lhs == 0.0 && rhs == 0.0),
        }
    }

    pub fn csv_header() -> &'static str {
        "name,lhs,rhs,constant,satisfied"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.name, self.lhs, self.rhs, self.constant, self.satisfied
        )
    }
}

fn resolution_of(f: &BoundaryField) -> String {
    format!("{}x{}", f.grid().n1, f.grid().n2)
}

/// Directions sampled by the difference-quotient estimators: both axes
/// and both diagonals.
const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

fn offset_distance(f: &BoundaryField, ox: i64, oy: i64) -> f64 {
    let (h1, h2) = f.grid().spacing();
    (ox as f64 * h1).hypot(oy as f64 * h2)
}

fn shifted_at(f: &BoundaryField, ix: usize, iy: usize, ox: i64, oy: i64) -> f64 {
    let n1 = f.grid().n1 as i64;
    let n2 = f.grid().n2 as i64;
    let jx = (ix as i64 + ox).rem_euclid(n1) as usize;
    let jy = (iy as i64 + oy).rem_euclid(n2) as usize;
    f.at(jx, jy)
}

/// Besov `B^s_{∞,∞}` norm through sharp bands: `sup_j 2^{js} ||Δ_j f||_∞`.
pub fn besov_norm_bands(f: &BoundaryField, s: f64) -> NormReport {
    let set = lp_decompose(f);
    let mut value: f64 = 0.0;
    for (j, band) in set.iter() {
        value = value.max((2f64).powi(j).powf(s) * band.linf());
    }
    NormReport::new("besov_bands", value, f).with_s(s)
}

/// Zygmund-class estimator: max over grid points and dyadic offsets
/// (axis and diagonal, one grid spacing up to π) of
/// `|f(x+y) + f(x−y) − 2f(x)| / |y|`.
pub fn besov1_second_difference(f: &BoundaryField) -> NormReport {
    let n = f.grid().n1.min(f.grid().n2) as i64;
    let mut value: f64 = 0.0;
    let mut d = 1i64;
    while d <= n / 2 {
        for (dx, dy) in DIRECTIONS {
            let (ox, oy) = (dx * d, dy * d);
            let dist = offset_distance(f, ox, oy);
            if dist > std::f64::consts::PI {
                continue;
            }
            for ix in 0..f.grid().n1 {
                for iy in 0..f.grid().n2 {
                    let num = (shifted_at(f, ix, iy, ox, oy) + shifted_at(f, ix, iy, -ox, -oy)
                        - 2.0 * f.at(ix, iy))
                    .abs();
                    value = value.max(num / dist);
                }
            }
        }
        d *= 2;
    }
    NormReport::new("besov1_second_difference", value, f).with_s(1.0)
}

/// Hölder seminorm over axis/diagonal offsets at every separation up to
/// half the period (the exhaustive sup is attained on these offsets for
/// separable fields; validated against a full pair scan in tests).
pub fn holder_seminorm(f: &BoundaryField, alpha: f64) -> f64 {
    let n = f.grid().n1.min(f.grid().n2) as i64;
    let mut value: f64 = 0.0;
    for d in 1..=n / 2 {
        for (dx, dy) in DIRECTIONS {
            let (ox, oy) = (dx * d, dy * d);
            let dist = offset_distance(f, ox, oy);
            let denom = dist.powf(alpha);
            for ix in 0..f.grid().n1 {
                for iy in 0..f.grid().n2 {
                    let num = (shifted_at(f, ix, iy, ox, oy) - f.at(ix, iy)).abs();
                    value = value.max(num / denom);
                }
            }
        }
    }
    value
}

/// `C^α` norm: `||f||_∞` plus the maximal first-difference quotient.
pub fn holder_norm(f: &BoundaryField, alpha: f64) -> NormReport {
    assert!(alpha > 0.0 && alpha < 1.0, "holder exponent in (0,1)");
    let value = f.linf() + holder_seminorm(f, alpha);
    NormReport::new("holder", value, f).with_s(alpha)
}

/// Exhaustive all-pairs Hölder seminorm with periodic distance; the
/// O(N²) oracle used to validate [`holder_seminorm`] at small sizes.
pub fn holder_seminorm_exhaustive(f: &BoundaryField, alpha: f64) -> f64 {
    let n1 = f.grid().n1 as i64;
    let n2 = f.grid().n2 as i64;
    let mut value: f64 = 0.0;
    for ox in -(n1 / 2 - 1)..=n1 / 2 {
        for oy in -(n2 / 2 - 1)..=n2 / 2 {
            if ox == 0 && oy == 0 {
                continue;
            }
            let denom = offset_distance(f, ox, oy).powf(alpha);
            for ix in 0..f.grid().n1 {
                for iy in 0..f.grid().n2 {
                    let num = (shifted_at(f, ix, iy, ox, oy) - f.at(ix, iy)).abs();
                    value = value.max(num / denom);
                }
            }
        }
    }
    value
}

/// Canonical `Ḣ^{1/2}` seminorm from the Fourier side:
/// `((2π)² Σ_{k≠0} |k| |f̂(k)|²)^{1/2}`.
pub fn gagliardo_h_half(f: &BoundaryField) -> NormReport {
    NormReport::new("gagliardo_h_half", f.sobolev_h(0.5), f).with_s(0.5)
}

/// Double-integral Gagliardo quadrature with periodic distance,
/// truncated at separation π:
/// `(1/(4π)) ∬_{d ≤ π} (f(x) − f(y))² / d³`, rooted. The kernel
/// normalization uses `∫₀^∞ (1 − J₀(r))/r² dr = 1`, so for modes well
/// inside the truncation radius this approaches the Fourier value.
pub fn gagliardo_quadrature(f: &BoundaryField) -> f64 {
    let g = f.grid();
    let (h1, h2) = g.spacing();
    let cell = h1 * h2;
    let n1 = g.n1 as i64;
    let n2 = g.n2 as i64;
    let mut acc = 0.0;
    for ox in -(n1 / 2 - 1)..=n1 / 2 {
        for oy in -(n2 / 2 - 1)..=n2 / 2 {
            if ox == 0 && oy == 0 {
                continue;
            }
            let d = offset_distance(f, ox, oy);
            if d > std::f64::consts::PI {
                continue;
            }
            let w = 1.0 / (d * d * d);
            let mut inner = 0.0;
            for ix in 0..g.n1 {
                for iy in 0..g.n2 {
                    let diff = shifted_at(f, ix, iy, ox, oy) - f.at(ix, iy);
                    inner += diff * diff;
                }
            }
            acc += w * inner;
        }
    }
    (acc * cell * cell / (4.0 * std::f64::consts::PI)).sqrt()
}

/// BMO norm over dyadic squares: side lengths `2π/2^m`, all grid-aligned
/// translates at stride half the side, mean oscillation
/// `(1/|Q|) ∫_Q |f − avg_Q f|`.
pub fn bmo_norm(f: &BoundaryField) -> NormReport {
    let n = f.grid().n1.min(f.grid().n2);
    let mut value: f64 = 0.0;
    let mut side = n;
    while side >= 1 {
        let stride = (side / 2).max(1);
        let mut ox = 0;
        while ox < f.grid().n1 {
            let mut oy = 0;
            while oy < f.grid().n2 {
                value = value.max(square_oscillation(f, ox, oy, side));
                oy += stride;
            }
            ox += stride;
        }
        if side == 1 {
            break;
        }
        side /= 2;
    }
    NormReport::new("bmo", value, f)
}

fn square_oscillation(f: &BoundaryField, ox: usize, oy: usize, side: usize) -> f64 {
    let cells = (side * side) as f64;
    let mut avg = 0.0;
    for i in 0..side {
        for j in 0..side {
            avg += shifted_at(f, ox, oy, i as i64, j as i64);
        }
    }
    avg /= cells;
    let mut osc = 0.0;
    for i in 0..side {
        for j in 0..side {
            osc += (shifted_at(f, ox, oy, i as i64, j as i64) - avg).abs();
        }
    }
    osc / cells
}

/// Exhaustive BMO oracle: every grid-aligned translate (stride 1) of
/// every dyadic square side.
pub fn bmo_norm_exhaustive(f: &BoundaryField) -> f64 {
    let n = f.grid().n1.min(f.grid().n2);
    let mut value: f64 = 0.0;
    let mut side = n;
    while side >= 1 {
        for ox in 0..f.grid().n1 {
            for oy in 0..f.grid().n2 {
                value = value.max(square_oscillation(f, ox, oy, side));
            }
        }
        if side == 1 {
            break;
        }
        side /= 2;
    }
    value
}

/// Inhomogeneous `H^{−2}` stand-in: `((2π)² Σ_k (1+|k|²)^{−2} |f̂(k)|²)^{1/2}`,
/// mean mode included with weight 1.
pub fn negative_h2_norm(f: &BoundaryField) -> NormReport {
    let g = f.grid();
    let tau2 = (2.0 * std::f64::consts::PI).powi(2);
    let mut acc = 0.0;
    for ix in 0..g.n1 {
        for iy in 0..g.n2 {
            let (k1, k2) = g.k(ix, iy);
            let w = (1.0 + (k1 * k1 + k2 * k2) as f64).powi(-2);
            acc += w * f.coeffs()[ix * g.n2 + iy].norm_sqr();
        }
    }
    NormReport::new("negative_h2", (tau2 * acc).sqrt(), f).with_s(-2.0)
}

fn log_plus(x: f64) -> f64 {
    x.ln().max(0.0)
}

/// Log-interpolation check for `h = ∇̄H`:
/// `||h||_∞ ≤ C (||H||_∞ + ||h||_{B⁰}(1 + log₊(||h||_{Ḣ^{3/2}}/||h||_{B⁰})))`
/// at the frozen calibration constant.
pub fn check_log_interpolation(bigh: &BoundaryField) -> InequalityVerdict {
    let h1 = partial(bigh, 1);
    let h2 = partial(bigh, 2);
    let lhs = h1
        .values()
        .iter()
        .zip(h2.values())
        .map(|(a, b)| a.hypot(*b))
        .fold(0.0, f64::max);
    let b0 = besov_norm_bands(&h1, 0.0)
        .value
        .max(besov_norm_bands(&h2, 0.0).value);
    if b0 == 0.0 {
        return InequalityVerdict::at_constant("log_interpolation", 0.0, 0.0, 0.0);
    }
    let h32 = (h1.sobolev_h(1.5).powi(2) + h2.sobolev_h(1.5).powi(2)).sqrt();
    let rhs = bigh.linf() + b0 * (1.0 + log_plus(h32 / b0));
    InequalityVerdict::at_constant(
        "log_interpolation",
        lhs,
        rhs,
        calibration::LOG_INTERPOLATION_C,
    )
}

/// Commutator inequality check:
/// `max_{|α|=order} ||D^α(fg) − f D^α g||_{L²} ≤ C (||∇̄f||_∞ ||∇̄^{order−1}g||_{L²} + ||g||_∞ ||∇̄^{order}f||_{L²})`.
/// Inputs must be band-limited well inside the grid so the pointwise
/// product is alias-free.
pub fn commutator_residual(f: &BoundaryField, g: &BoundaryField, order: u32) -> InequalityVerdict {
    assert!(order == 2 || order == 3, "commutator order in {{2,3}}");
    let fg = f.zip_values(g, |a, b| a * b).expect("shared grid");
    let mut lhs: f64 = 0.0;
    for a in 0..=order {
        let b = order - a;
        let dfg = mixed_partial(&fg, a, b);
        let dg = mixed_partial(g, a, b);
        let fdg = f.zip_values(&dg, |x, y| x * y).expect("shared grid");
        lhs = lhs.max(dfg.sub(&fdg).expect("shared grid").l2());
    }
    let (f1, f2) = (partial(f, 1), partial(f, 2));
    let grad_f_inf = f1
        .values()
        .iter()
        .zip(f2.values())
        .map(|(a, b)| a.hypot(*b))
        .fold(0.0, f64::max);
    let rhs = grad_f_inf * g.sobolev_h((order - 1) as f64) + g.linf() * f.sobolev_h(order as f64);
    InequalityVerdict::at_constant("commutator", lhs, rhs, calibration::COMMUTATOR_C)
}

/// `H^{−2}` duality estimate check on a random pair `(w, ζ)`:
/// `||wζ||_{H^{−2}} ≤ C ||(−Δ̄)^{−1/4}w||_{L²} (||ζ||_{L^∞} + ||∇̄ζ||_{L^∞})`.
pub fn check_h2_duality(w: &BoundaryField, zeta: &BoundaryField) -> InequalityVerdict {
    let prod = w.zip_values(zeta, |a, b| a * b).expect("shared grid");
    let lhs = negative_h2_norm(&prod).value;
    let w_quarter = crate::spectral::fractional_laplacian(&w.without_mean(), -0.25)
        .expect("mean-free by construction");
    let (z1, z2) = (partial(zeta, 1), partial(zeta, 2));
    let grad_inf = z1
        .values()
        .iter()
        .zip(z2.values())
        .map(|(a, b)| a.hypot(*b))
        .fold(0.0, f64::max);
    let rhs = w_quarter.l2() * (zeta.linf() + grad_inf);
    InequalityVerdict::at_constant("h2_duality", lhs, rhs, calibration::H2_DUALITY_C)
}

/// Log-Lipschitz modulus: sup over sampled pairs with separation below 1
/// of `|f(x)−f(y)| / (|x−y|(1 − log|x−y|))`, plus `||f||_∞`.
pub fn log_lipschitz_modulus(f: &BoundaryField) -> NormReport {
    let n = f.grid().n1.min(f.grid().n2) as i64;
    let mut semi: f64 = 0.0;
    for d in 1..=n / 2 {
        for (dx, dy) in DIRECTIONS {
            let (ox, oy) = (dx * d, dy * d);
            let dist = offset_distance(f, ox, oy);
            if dist >= 1.0 {
                continue;
            }
            let denom = dist * (1.0 - dist.ln());
            for ix in 0..f.grid().n1 {
                for iy in 0..f.grid().n2 {
                    let num = (shifted_at(f, ix, iy, ox, oy) - f.at(ix, iy)).abs();
                    semi = semi.max(num / denom);
                }
            }
        }
    }
    NormReport::new("log_lipschitz", f.linf() + semi, f)
}
