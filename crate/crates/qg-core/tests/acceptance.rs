//! Acceptance gate: one test per criterion, each ending in a single
//! PASS line. The reference nonlinear run (128²×32, t ∈ [0,1], dt = 2e−3,
//! seeded band-limited data) is computed once and shared.

use qg_core::bands::lp_decompose;
use qg_core::calibration;
use qg_core::degiorgi::{
    cascade, truncation_energy, truncation_energy_oracle, verify_recurrence, TimedField,
    TimedVelocity, TruncationLadder,
};
use qg_core::duhamel::{besov_forcing_bound, divergence, duhamel_convolve};
use qg_core::dynamics::{
    advance_with, audit_apriori, sobolev_growth_monitor, trace_growth_constant, FieldSpec, PvSpec,
    QGState, RunConfig,
};
use qg_core::norms::{check_log_interpolation, commutator_residual};
use qg_core::spectral::{flat_laplacian, fractional_laplacian, perp_gradient, poisson_extend, riesz_transform};
use qg_core::{BoundaryField, TorusGrid2};
use num_complex::Complex;
use std::f64::consts::PI;
use std::sync::LazyLock;
use std::time::Instant;

// -------------------------------------------------------------------
// Shared reference run
// -------------------------------------------------------------------

struct Reference {
    budgets: Vec<qg_core::dynamics::EnergyBudget>,
    states: Vec<QGState>,
    thetas: Vec<TimedField>,
    vels: Vec<TimedVelocity>,
    forcings: Vec<TimedField>,
}

fn reference_config(dt: f64, cadence: usize) -> RunConfig {
    RunConfig {
        n1: 128,
        n2: 128,
        nz: 32,
        z_max: 2.0 * PI,
        dt,
        t_end: 1.0,
        dealias_frac: 2.0 / 3.0,
        cadence,
        seed: 7,
        theta_init: FieldSpec::RandomBand {
            k_min: 2.0,
            k_max: 6.0,
            amplitude: 1.0,
        },
        pv_init: PvSpec::RandomBand {
            k_min: 2.0,
            k_max: 6.0,
            m_max: 2,
            amplitude: 0.5,
        },
        forcing: true,
    }
}

fn execute(config: &RunConfig, keep_states: bool) -> Reference {
    let initial = config.initial_state().unwrap();
    let mut states = Vec::new();
    let mut thetas = Vec::new();
    let mut vels = Vec::new();
    let mut forcings = Vec::new();
    let out = advance_with(
        &initial,
        config.t_end,
        config.cadence,
        config.dealias_frac,
        config.forcing,
        &mut |state| {
            let psi2_0 = state.psi2.slice_at_node(0);
            let psi0 = state.psi1.slice_at_node(0).add(&psi2_0).unwrap();
            let (u1, u2) = perp_gradient(&psi0);
            thetas.push(TimedField {
                t: state.t,
                field: state.theta.clone(),
            });
            vels.push(TimedVelocity { t: state.t, u1, u2 });
            forcings.push(TimedField {
                t: state.t,
                field: flat_laplacian(&psi2_0),
            });
            if keep_states {
                states.push(state.clone());
            }
        },
    )
    .unwrap();
    assert!(out.aborted.is_none(), "reference run aborted: {:?}", out.aborted);
    Reference {
        budgets: out.budgets,
        states,
        thetas,
        vels,
        forcings,
    }
}

static REFERENCE: LazyLock<Reference> = LazyLock::new(|| execute(&reference_config(2e-3, 25), true));
static REFERENCE_HALF: LazyLock<Reference> =
    LazyLock::new(|| execute(&reference_config(1e-3, 50), false));

fn random_theta(n: usize, seed: u64, k_min: f64, k_max: f64) -> BoundaryField {
    let config = RunConfig {
        n1: n,
        n2: n,
        nz: 8,
        z_max: 2.0 * PI,
        dt: 1e-3,
        t_end: 0.0,
        dealias_frac: 2.0 / 3.0,
        cadence: 1,
        seed,
        theta_init: FieldSpec::RandomBand {
            k_min,
            k_max,
            amplitude: 1.0,
        },
        pv_init: PvSpec::Zero,
        forcing: true,
    };
    config.initial_state().unwrap().theta
}

// -------------------------------------------------------------------
// Criteria
// -------------------------------------------------------------------

#[test]
fn criterion_01_spectral_identities() {
    let grid = TorusGrid2::new(256, 256).unwrap();
    let start = Instant::now();
    for (k1, k2) in [(3i64, 0i64), (0, 5), (4, -7), (-2, 9)] {
        let f = BoundaryField::from_fn(&grid, |x, y| (k1 as f64 * x + k2 as f64 * y).cos());
        let kabs = ((k1 * k1 + k2 * k2) as f64).sqrt();
        let r1 = riesz_transform(&f, 1).unwrap();
        let want =
            BoundaryField::from_fn(&grid, |x, y| -(k1 as f64 / kabs) * (k1 as f64 * x + k2 as f64 * y).sin());
        assert!(r1.sub(&want).unwrap().linf() < 1e-12, "riesz off on ({k1},{k2})");

        let half = fractional_laplacian(&f, 0.5).unwrap();
        assert!(half.sub(&f.scale(kabs)).unwrap().linf() < 1e-12);

        let p = poisson_extend(&f, 0.7).unwrap();
        assert!(p.sub(&f.scale((-0.7 * kabs).exp())).unwrap().linf() < 1e-12);

        // semigroup composition P_a ∘ P_b = P_{a+b}
        let ab = poisson_extend(&poisson_extend(&f, 0.3).unwrap(), 0.4).unwrap();
        assert!(ab.sub(&p).unwrap().linf() < 1e-12);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("criterion 01 spectral identities: PASS ({elapsed:?} at 256^2)");
}

#[test]
fn criterion_02_bernstein_suite() {
    let start = Instant::now();
    for trial in 0..100u64 {
        let f = random_theta(64, 1000 + trial, 1.0, 24.0);
        let bands = lp_decompose(&f);
        for (j, b) in bands.iter() {
            if j < 0 || b.linf() == 0.0 {
                continue;
            }
            for alpha in [0.25, 0.5, 1.0] {
                let lap = fractional_laplacian(b, alpha).unwrap();
                let scale = (2f64).powf(2.0 * alpha * j as f64);
                for p in [2.0, f64::INFINITY] {
                    let (num, den) = if p.is_infinite() {
                        (lap.linf(), b.linf())
                    } else {
                        (lap.l2(), b.l2())
                    };
                    let ratio = num / (scale * den);
                    let lo = (2f64).powf(-2.0 * alpha);
                    let hi = (2f64).powf(2.0 * alpha);
                    assert!(
                        ratio >= lo * (1.0 - 1e-9) && ratio <= hi * (1.0 + 1e-9),
                        "trial {trial} band {j} alpha {alpha} p {p}: ratio {ratio}"
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("criterion 02 Bernstein suite: PASS ({elapsed:?} for 100 fields)");
}

fn balance_residual(budgets: &[qg_core::dynamics::EnergyBudget]) -> f64 {
    let initial = budgets[0].kinetic / 2.0;
    let last = budgets.last().unwrap();
    (last.kinetic / 2.0 + last.boundary_dissipation - initial).abs()
}

#[test]
fn criterion_03_energy_balance() {
    let start = Instant::now();
    let budgets = &REFERENCE.budgets;
    let initial = budgets[0].kinetic / 2.0;
    for b in budgets {
        assert!(
            b.kinetic / 2.0 + b.boundary_dissipation <= initial * 1.02,
            "balance violated at t={}",
            b.t
        );
    }
    let res = balance_residual(budgets);
    let res_half = balance_residual(&REFERENCE_HALF.budgets);
    let ratio = res / res_half;
    assert!(
        ratio >= 3.0,
        "residual did not shrink ~x4 under dt halving: {res:.3e} -> {res_half:.3e} (ratio {ratio:.2})"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "criterion 03 energy balance: PASS (residual {res:.3e} -> {res_half:.3e}, ratio {ratio:.2}, {elapsed:?})"
    );
}

#[test]
fn criterion_04_lp_conservation() {
    let verdicts = audit_apriori(&REFERENCE.budgets, &REFERENCE.budgets[0]);
    for name in ["pv_l2_conservation", "pv_l4_conservation", "pv_linf_conservation"] {
        let v = verdicts.iter().find(|v| v.name == name).unwrap();
        assert!(v.satisfied, "{name}: drift {} exceeds 2%", v.lhs);
        assert!(v.lhs < 0.02);
    }
    println!("criterion 04 Lp conservation: PASS (drift < 2% in L2, L4, Linf)");
}

#[test]
fn criterion_05_trace_growth_stability() {
    let mut constants = Vec::new();
    for seed in [11u64, 12, 13, 14, 15] {
        let config = RunConfig {
            n1: 64,
            n2: 64,
            nz: 8,
            seed,
            t_end: 0.5,
            cadence: 10,
            ..reference_config(2e-3, 10)
        };
        let r = execute(&config, false);
        constants.push(trace_growth_constant(&r.budgets, &r.budgets[0]));
    }
    let mean = constants.iter().sum::<f64>() / constants.len() as f64;
    for c in &constants {
        assert!(
            (c - mean).abs() <= 0.1 * mean,
            "trace-growth constant unstable: {constants:?}"
        );
        assert!(
            *c <= calibration::TRACE_GROWTH_C_MAX,
            "trace-growth constant {c} exceeds frozen ceiling {}",
            calibration::TRACE_GROWTH_C_MAX
        );
    }
    println!("criterion 05 trace growth: PASS (C in {constants:?}, spread <= 10%)");
}

#[test]
fn criterion_06_maximum_principle() {
    for seed in 20..30u64 {
        let config = RunConfig {
            n1: 32,
            n2: 32,
            nz: 8,
            seed,
            t_end: 0.25,
            cadence: 5,
            forcing: false,
            pv_init: PvSpec::Zero,
            ..reference_config(4e-3, 5)
        };
        let r = execute(&config, false);
        let linfs: Vec<(f64, f64)> = r.thetas.iter().map(|f| (f.t, f.field.linf())).collect();
        for w in linfs.windows(2) {
            let allowed = 1e-6 * (w[1].0 - w[0].0);
            assert!(
                w[1].1 <= w[0].1 + allowed,
                "seed {seed}: |theta|_inf grew {} -> {} over [{}, {}]",
                w[0].1,
                w[1].1,
                w[0].0,
                w[1].0
            );
        }
    }
    println!("criterion 06 maximum principle: PASS (10 unforced seeds non-increasing)");
}

#[test]
fn criterion_07_degiorgi_recurrence() {
    let thetas = &REFERENCE.thetas;
    let sup = thetas.iter().map(|f| f.field.linf()).fold(0.0, f64::max);
    let window = (thetas[0].t, thetas.last().unwrap().t);
    let l = 2.0 * sup;
    let ladder = TruncationLadder::new(l, 8, window).unwrap();
    let energies = truncation_energy(thetas, &ladder).unwrap();
    let verdict = verify_recurrence(&energies, l);
    assert!(verdict.constant.is_finite());
    assert!(verdict.satisfied, "recurrence not satisfied: {verdict:?}");
    assert!(
        *energies.e.last().unwrap() < 1e-8,
        "E_8 = {} not < 1e-8",
        energies.e.last().unwrap()
    );
    let oracle = truncation_energy_oracle(thetas, &ladder).unwrap();
    let scale = energies.e[0].max(1.0);
    for (a, b) in energies.e.iter().zip(&oracle.e) {
        assert!(
            (a - b).abs() <= 1e-10 * scale,
            "oracle mismatch: {a} vs {b}"
        );
    }
    println!(
        "criterion 07 De Giorgi recurrence: PASS (C = {:.3}, E_8 = {:.3e}, oracle to 1e-10)",
        verdict.constant,
        energies.e.last().unwrap()
    );
}

#[test]
fn criterion_08_oscillation_cascade() {
    let full = cascade(&REFERENCE.thetas, &REFERENCE.vels, &REFERENCE.forcings, 0.6, 4).unwrap();
    assert!(full.r_estimate > 0.0, "non-positive r: {}", full.r_estimate);
    let half = cascade(
        &REFERENCE_HALF.thetas,
        &REFERENCE_HALF.vels,
        &REFERENCE_HALF.forcings,
        0.6,
        4,
    )
    .unwrap();
    assert!(
        (full.r_estimate - half.r_estimate).abs() <= 0.02,
        "r not reproducible under dt halving: {} vs {}",
        full.r_estimate,
        half.r_estimate
    );

    // synthetic cusp: |x|^{1/3} must measure 1/3
    let grid = TorusGrid2::new(256, 256).unwrap();
    let wrap = |a: f64| {
        let t = a.rem_euclid(2.0 * PI);
        if t >= PI {
            t - 2.0 * PI
        } else {
            t
        }
    };
    let cusp = BoundaryField::from_fn(&grid, |x, y| wrap(x).hypot(wrap(y)).powf(1.0 / 3.0));
    let series: Vec<TimedField> = [0.0, 1.0]
        .iter()
        .map(|&t| TimedField {
            t,
            field: cusp.clone(),
        })
        .collect();
    let trace = cascade(&series, &[], &[], 0.6, 4).unwrap();
    assert!(
        (trace.r_estimate - 1.0 / 3.0).abs() <= 0.05,
        "cusp exponent {} not within 0.05 of 1/3",
        trace.r_estimate
    );
    println!(
        "criterion 08 oscillation cascade: PASS (r = {:.3} vs {:.3} halved; cusp {:.3})",
        full.r_estimate, half.r_estimate, trace.r_estimate
    );
}

#[test]
fn criterion_09_bootstrap_bounds() {
    // single-mode closed form: for steady source s = cos(k·x),
    // g(t) = (1 − e^{−|k|t})/|k| · s exactly
    let grid = TorusGrid2::new(64, 64).unwrap();
    let s = BoundaryField::from_fn(&grid, |x, y| (3.0 * x + 4.0 * y).cos());
    let series: Vec<TimedField> = [0.0, 1.0]
        .iter()
        .map(|&t| TimedField { t, field: s.clone() })
        .collect();
    let g = duhamel_convolve(&series, 1.0).unwrap();
    let want = s.scale((1.0 - (-5.0f64).exp()) / 5.0);
    assert!(g.sub(&want).unwrap().linf() < 1e-12);

    // multiscale C_fit stable (±20%) under resolution doubling
    let mut fits = Vec::new();
    for n in [64usize, 128] {
        let grid = TorusGrid2::new(n, n).unwrap();
        let multiscale = |x: f64, y: f64| {
            (2.0 * x).cos() + 0.5 * (5.0 * x + 3.0 * y).sin() + 0.25 * (11.0 * y - 7.0 * x).cos()
        };
        let w1 = BoundaryField::from_fn(&grid, multiscale);
        let w2 = BoundaryField::from_fn(&grid, |x, y| multiscale(y, x));
        let omega: Vec<TimedVelocity> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&t| TimedVelocity {
                t,
                u1: w1.clone(),
                u2: w2.clone(),
            })
            .collect();
        let v = besov_forcing_bound(&omega).unwrap();
        assert!(v.satisfied, "besov forcing bound failed at {n}: {v:?}");
        fits.push(v.lhs / v.rhs);
    }
    assert!(
        (fits[0] - fits[1]).abs() <= 0.2 * fits[0].max(fits[1]),
        "C_fit unstable under doubling: {fits:?}"
    );

    // additive-regularity probe on anchored cusp data: band-decay
    // exponent of g at least alpha1 + alpha2 - 0.05
    let n = 128usize;
    let grid = TorusGrid2::new(n, n).unwrap();
    let sigma = 2.0 * PI / n as f64;
    let wrap = |a: f64| {
        let t = a.rem_euclid(2.0 * PI);
        if t >= PI {
            t - 2.0 * PI
        } else {
            t
        }
    };
    let cusp = BoundaryField::from_fn(&grid, |x, y| wrap(x).hypot(wrap(y)).powf(0.4)).map_spectrum(
        |k1, k2| {
            let ka2 = (k1 * k1 + k2 * k2) as f64;
            Complex::new((-ka2 * sigma * sigma / 4.0).exp(), 0.0)
        },
    );
    let prod = cusp.zip_values(&cusp, |a, b| a * b).unwrap();
    let src = divergence(&prod, &BoundaryField::zeros(&grid)).unwrap();
    let series: Vec<TimedField> = [0.0, 1.0]
        .iter()
        .map(|&t| TimedField {
            t,
            field: src.clone(),
        })
        .collect();
    let g = duhamel_convolve(&series, 1.0).unwrap();
    let bands = lp_decompose(&g);
    let pts: Vec<(f64, f64)> = bands
        .iter()
        .filter(|(j, b)| *j >= 2 && *j <= bands.j_max - 2 && b.linf() > 0.0)
        .map(|(j, b)| (j as f64, b.linf().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let alpha = -(sxy / sxx) / std::f64::consts::LN_2;
    assert!(alpha >= 0.8 - 0.05, "probe exponent {alpha} below 0.75");
    println!(
        "criterion 09 bootstrap bounds: PASS (C_fit {:?}, probe exponent {alpha:.3})",
        fits
    );
}

#[test]
fn criterion_10_sobolev_growth_monitor() {
    let growth = sobolev_growth_monitor(&REFERENCE.states, 3).unwrap();
    assert!(
        !growth.super_exponential,
        "super-exponential flag raised (rate {})",
        growth.growth_rate
    );
    assert!(
        growth.envelope_r2 >= 0.9,
        "envelope fit R^2 = {} < 0.9",
        growth.envelope_r2
    );
    println!(
        "criterion 10 Sobolev growth monitor: PASS (rate {:.3}, envelope R^2 {:.3})",
        growth.growth_rate, growth.envelope_r2
    );
}

// Criterion 11 (manifest determinism) lives in the CLI crate's
// acceptance test, next to the binary it exercises.

#[test]
fn criterion_12_interpolation_and_commutator() {
    for seed in 40..50u64 {
        let f = random_theta(64, seed, 1.0, 12.0);
        let g = random_theta(64, seed + 100, 1.0, 12.0);
        let li = check_log_interpolation(&f);
        assert!(li.satisfied, "seed {seed}: log-interpolation {li:?}");
        for order in [2, 3] {
            let cm = commutator_residual(&f, &g, order);
            assert!(cm.satisfied, "seed {seed}: commutator order {order} {cm:?}");
        }
    }
    println!("criterion 12 log-interpolation + commutator: PASS (10 seeds at frozen constants)");
}
