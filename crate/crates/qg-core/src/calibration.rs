//! Frozen calibration constants.
//!
//! The functional inequalities checked by this crate hold with constants
//! that are known to exist but carry no published values. Each constant
//! below was fitted once on a seeded calibration corpus (see the ignored
//! `calibrate` tests) with headroom added, then frozen; verdicts compare
//! against these values as regression bounds.

/// Equivalence window between the second-difference and band estimators
/// of the Zygmund `B¹_{∞,∞}` norm: their ratio on the calibration corpus
/// stays in `[LO, HI]`.
pub const BESOV1_WINDOW_LO: f64 = 0.30;
pub const BESOV1_WINDOW_HI: f64 = 2.20;

/// Log-interpolation inequality
/// `||h||_∞ ≤ C(||H||_∞ + ||h||_{B⁰}(1 + log₊(||h||_{Ḣ^{3/2}}/||h||_{B⁰})))`.
pub const LOG_INTERPOLATION_C: f64 = 2.0;

/// Commutator estimate
/// `||D^α(fg) − fD^αg||_{L²} ≤ C(||∇̄f||_∞||∇̄^{|α|−1}g||_{L²} + ||g||_∞||∇̄^{|α|}f||_{L²})`.
pub const COMMUTATOR_C: f64 = 3.0;

/// `H^{−2}` duality estimate
/// `||wζ||_{H^{−2}} ≤ C||(−Δ̄)^{−1/4}w||_{L²}(||ζ||_∞ + ||∇̄ζ||_∞)`.
pub const H2_DUALITY_C: f64 = 1.0;

/// Trace-growth bound `||θ(t)||_{L²} ≤ C ||∇Ψ₀||_{L²} (1 + t)` along
/// audited runs (fitted per run; this is the regression ceiling).
pub const TRACE_GROWTH_C_MAX: f64 = 2.6;

/// Ceiling for the forcing monitor `M = sup_t ||(−Δ̄)^{−1/4}f||_{C^{1/2}}`
/// along the reference run.
pub const FORCING_MONITOR_M_MAX: f64 = 10.0;

/// Ceilings for the a priori slice bounds on `∇̄Ψ₂|_{z=0}`:
/// Besov `B¹_{∞,∞}` and `L^p` values along the reference run.
pub const APRIORI_PSI2_BESOV_C: f64 = 10.0;
pub const APRIORI_PSI2_LP_C: f64 = 10.0;

/// Duhamel forcing bound `sup_j 2^j||Δ_j g||_∞ ≤ C sup_t ||ω||_{B¹}`
/// (Besov bound of the forced semigroup).
pub const BESOV_FORCING_C: f64 = 2.0;
