//! Run orchestration: execute a scenario, fan the selected diagnostics out
//! over the collected snapshots, and persist CSVs, snapshots, verdicts and
//! the manifest.

use crate::manifest::{artifact_of, RunManifest, TIMING_FILE};
use crate::scenario::{build_version, Diagnostic, Scenario};
use qg_core::calibration;
use qg_core::degiorgi::{
    cascade, forcing_monitor, forcing_monitor_max, truncation_energy, verify_recurrence,
    TimedField, TimedVelocity, TruncationLadder,
};
use qg_core::duhamel::{additive_regularity_probe, besov_forcing_bound, velocity_regularity_transfer, ProbeReport};
use qg_core::dynamics::{advance_with, audit_apriori, audit_psi2_slice, sobolev_growth_monitor, EnergyBudget, QGState};
use qg_core::norms::{
    besov1_second_difference, besov_norm_bands, bmo_norm, check_log_interpolation,
    gagliardo_h_half, holder_norm, log_lipschitz_modulus, negative_h2_norm, InequalityVerdict,
    NormReport,
};
use qg_core::snapshot;
use qg_core::spectral::{flat_laplacian, perp_gradient};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

pub const STATE_FILE: &str = "state.txt";
pub const THETA_SNAPSHOT: &str = "theta.qgf";
pub const PV_SNAPSHOT: &str = "pv.qgf";

const CASCADE_K: f64 = 0.6;
const CASCADE_DEPTH: usize = 4;
const LADDER_RUNGS: usize = 8;

fn io_err<E: std::fmt::Display>(e: E) -> String {
    format!("{e}")
}

/// Boundary-trace series collected at the recording cadence.
struct Collected {
    thetas: Vec<TimedField>,
    vels: Vec<TimedVelocity>,
    forcings: Vec<TimedField>,
    states: Vec<QGState>,
}

fn collect_snapshot(c: &mut Collected, state: &QGState, keep_state: bool) -> Result<(), String> {
    let psi0 = state
        .psi1
        .slice_at_node(0)
        .add(&state.psi2.slice_at_node(0))
        .map_err(io_err)?;
    let (u1, u2) = perp_gradient(&psi0);
    let f = flat_laplacian(&state.psi2.slice_at_node(0));
    c.thetas.push(TimedField {
        t: state.t,
        field: state.theta.clone(),
    });
    c.vels.push(TimedVelocity {
        t: state.t,
        u1,
        u2,
    });
    c.forcings.push(TimedField { t: state.t, field: f });
    if keep_state {
        c.states.push(state.clone());
    }
    Ok(())
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<(), String> {
    let mut text = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(dir.join(name), text).map_err(io_err)
}

fn load_resume_state(dir: &Path, fallback_dt: f64) -> Result<Option<QGState>, String> {
    let state_path = dir.join(STATE_FILE);
    if !state_path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&state_path).map_err(io_err)?;
    let mut t = None;
    let mut dt = fallback_dt;
    for line in text.lines() {
        if let Some(v) = line.strip_prefix("t = ") {
            t = v.parse::<f64>().ok();
        } else if let Some(v) = line.strip_prefix("dt = ") {
            dt = v.parse::<f64>().map_err(io_err)?;
        }
    }
    let Some(t) = t else {
        return Err(format!("{}: missing `t =` line", state_path.display()));
    };
    let theta = snapshot::read_boundary(&dir.join(THETA_SNAPSHOT)).map_err(io_err)?;
    let pv = snapshot::read_slab(&dir.join(PV_SNAPSHOT)).map_err(io_err)?;
    let mut state = QGState::new(theta, pv, dt).map_err(io_err)?;
    state.t = t;
    Ok(Some(state))
}

/// Executes a scenario end to end. With `resume` set and a prior state
/// snapshot present in the output directory, the run continues from that
/// snapshot instead of the seeded initial data.
pub fn run_scenario(s: &Scenario, resume: bool) -> Result<(RunManifest, PathBuf), String> {
    let dir = s.resolved_output_dir();
    std::fs::create_dir_all(&dir).map_err(io_err)?;
    let wall_start = SystemTime::now();

    // Crash durability: a parseable partial manifest exists from the start.
    let mut manifest = RunManifest {
        scenario_name: s.name.clone(),
        scenario_digest: s.digest(),
        build: build_version(),
        status: "running".into(),
        artifacts: Vec::new(),
        verdicts: Vec::new(),
    };
    manifest.write(&dir)?;

    let initial = match load_resume_state(&dir, s.config.dt)? {
        Some(state) if resume => state,
        _ => s.config.initial_state().map_err(io_err)?,
    };

    let keep_states = s.diagnostics.contains(&Diagnostic::Norms);
    let mut collected = Collected {
        thetas: Vec::new(),
        vels: Vec::new(),
        forcings: Vec::new(),
        states: Vec::new(),
    };
    let mut collect_err: Option<String> = None;
    let out = advance_with(
        &initial,
        s.config.t_end.max(initial.t),
        s.config.cadence,
        s.config.dealias_frac,
        s.config.forcing,
        &mut |state| {
            if collect_err.is_none() {
                if let Err(e) = collect_snapshot(&mut collected, state, keep_states) {
                    collect_err = Some(e);
                }
            }
        },
    )
    .map_err(io_err)?;
    if let Some(e) = collect_err {
        return Err(e);
    }

    let mut artifact_names: Vec<String> = Vec::new();
    let rows: Vec<String> = out.budgets.iter().map(EnergyBudget::csv_row).collect();
    write_csv(&dir, "budgets.csv", EnergyBudget::csv_header(), &rows)?;
    artifact_names.push("budgets.csv".into());

    // Last valid state snapshot (the abort pointer when the run failed).
    snapshot::write_boundary(&dir.join(THETA_SNAPSHOT), &out.state.theta).map_err(io_err)?;
    snapshot::write_slab(&dir.join(PV_SNAPSHOT), &out.state.pv).map_err(io_err)?;
    std::fs::write(
        dir.join(STATE_FILE),
        format!("t = {:?}\ndt = {:?}\n", out.state.t, out.state.dt),
    )
    .map_err(io_err)?;
    artifact_names.extend([
        THETA_SNAPSHOT.to_string(),
        PV_SNAPSHOT.to_string(),
        STATE_FILE.to_string(),
    ]);

    let mut verdicts: Vec<InequalityVerdict> = Vec::new();
    if out.aborted.is_none() {
        run_diagnostics(s, &out.budgets, &out.state, &collected, &dir, &mut artifact_names, &mut verdicts)?;
    }

    write_verdict_summary(&dir, &verdicts)?;
    artifact_names.push("verdicts.txt".into());

    manifest.status = match &out.aborted {
        None => "complete".into(),
        Some(reason) => format!("aborted: {reason} @ t={:?}", out.state.t),
    };
    for name in &artifact_names {
        manifest.artifacts.push(artifact_of(&dir, name)?);
    }
    manifest.verdicts = verdicts;
    manifest.write(&dir)?;

    // Wall times live outside the manifest so two runs of the same
    // scenario produce byte-identical manifests.
    let stamp = |t: SystemTime| {
        t.duration_since(SystemTime::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    };
    std::fs::write(
        dir.join(TIMING_FILE),
        format!(
            "wall_start_unix = {:.3}\nwall_end_unix = {:.3}\n",
            stamp(wall_start),
            stamp(SystemTime::now())
        ),
    )
    .map_err(io_err)?;

    Ok((manifest, dir))
}

#[allow(clippy::too_many_arguments)]
fn run_diagnostics(
    s: &Scenario,
    budgets: &[EnergyBudget],
    final_state: &QGState,
    collected: &Collected,
    dir: &Path,
    artifact_names: &mut Vec<String>,
    verdicts: &mut Vec<InequalityVerdict>,
) -> Result<(), String> {
    if s.diagnostics.contains(&Diagnostic::Apriori) {
        let mut vs = audit_apriori(budgets, &budgets[0]);
        vs.extend(audit_psi2_slice(final_state));
        let rows: Vec<String> = vs.iter().map(|v| v.csv_row()).collect();
        write_csv(dir, "apriori.csv", InequalityVerdict::csv_header(), &rows)?;
        artifact_names.push("apriori.csv".into());
        verdicts.extend(vs);
    }

    if s.diagnostics.contains(&Diagnostic::Degiorgi) {
        let sup = collected
            .thetas
            .iter()
            .map(|f| f.field.linf())
            .fold(0.0, f64::max);
        let window = (
            collected.thetas.first().map(|f| f.t).unwrap_or(0.0),
            collected.thetas.last().map(|f| f.t).unwrap_or(0.0),
        );
        let l = if sup > 0.0 { 2.0 * sup } else { 1.0 };
        let ladder = TruncationLadder::new(l, LADDER_RUNGS, window).map_err(io_err)?;
        let energies = truncation_energy(&collected.thetas, &ladder).map_err(io_err)?;
        let recurrence = verify_recurrence(&energies, l);
        let trace = if sup > 0.0 && collected.thetas.len() >= 2 {
            Some(
                cascade(
                    &collected.thetas,
                    &collected.vels,
                    &collected.forcings,
                    CASCADE_K,
                    CASCADE_DEPTH,
                )
                .map_err(io_err)?,
            )
        } else {
            None
        };
        let r_estimate = trace.as_ref().map(|t| t.r_estimate).unwrap_or(0.0);
        let rows: Vec<String> = energies
            .e
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let osc = trace
                    .as_ref()
                    .and_then(|t| t.levels.get(k))
                    .map(|lv| format!("{}", lv.osc))
                    .unwrap_or_default();
                format!("{k},{e},{osc},{},{r_estimate}", recurrence.constant)
            })
            .collect();
        write_csv(dir, "degiorgi.csv", "k,E_k,osc_k,fitC,r_estimate", &rows)?;
        artifact_names.push("degiorgi.csv".into());
        verdicts.push(recurrence);

        let monitor = forcing_monitor(&collected.forcings).map_err(io_err)?;
        let rows: Vec<String> = monitor.iter().map(|r| r.csv_row()).collect();
        write_csv(dir, "forcing.csv", NormReport::csv_header(), &rows)?;
        artifact_names.push("forcing.csv".into());
        verdicts.push(InequalityVerdict::at_constant(
            "forcing_monitor",
            forcing_monitor_max(&monitor),
            1.0,
            calibration::FORCING_MONITOR_M_MAX,
        ));
    }

    if s.diagnostics.contains(&Diagnostic::Bootstrap) {
        let t_last = collected.thetas.last().map(|f| f.t).unwrap_or(0.0);
        let probe = additive_regularity_probe(&collected.thetas, &collected.vels, 0.5, 0.5, t_last)
            .map_err(io_err)?;
        write_csv(dir, "bootstrap.csv", ProbeReport::csv_header(), &[probe.csv_row()])?;
        artifact_names.push("bootstrap.csv".into());

        // ω = u·θ is the transported quantity of the forced semigroup bound
        let omega: Vec<TimedVelocity> = collected
            .thetas
            .iter()
            .zip(&collected.vels)
            .map(|(th, v)| {
                Ok(TimedVelocity {
                    t: th.t,
                    u1: v.u1.zip_values(&th.field, |a, b| a * b).map_err(io_err)?,
                    u2: v.u2.zip_values(&th.field, |a, b| a * b).map_err(io_err)?,
                })
            })
            .collect::<Result<_, String>>()?;
        verdicts.push(besov_forcing_bound(&omega).map_err(io_err)?);

        let transfer = velocity_regularity_transfer(&final_state.theta).map_err(io_err)?;
        write_csv(
            dir,
            "velocity_transfer.csv",
            NormReport::csv_header(),
            &[transfer.csv_row()],
        )?;
        artifact_names.push("velocity_transfer.csv".into());
    }

    if s.diagnostics.contains(&Diagnostic::Norms) {
        let th = &final_state.theta;
        let mut reports = vec![
            besov1_second_difference(th),
            besov_norm_bands(th, 1.0),
            holder_norm(th, 0.5),
            bmo_norm(th),
            gagliardo_h_half(th),
            negative_h2_norm(th),
            log_lipschitz_modulus(th),
        ];
        if collected.states.len() >= 3 {
            let growth = sobolev_growth_monitor(&collected.states, 3).map_err(io_err)?;
            reports.extend(growth.reports());
            verdicts.push(InequalityVerdict {
                name: "sobolev_growth_envelope".into(),
                lhs: growth.growth_rate,
                rhs: growth.envelope_r2,
                constant: 0.9,
                satisfied: !growth.super_exponential && growth.envelope_r2 >= 0.9,
            });
        }
        let rows: Vec<String> = reports.iter().map(|r| r.csv_row()).collect();
        write_csv(dir, "norms.csv", NormReport::csv_header(), &rows)?;
        artifact_names.push("norms.csv".into());
        verdicts.push(check_log_interpolation(th));
    }

    Ok(())
}

fn write_verdict_summary(dir: &Path, verdicts: &[InequalityVerdict]) -> Result<(), String> {
    let mut text = String::new();
    if verdicts.is_empty() {
        text.push_str("no verdicts recorded\n");
    }
    for v in verdicts {
        let _ = writeln!(
            text,
            "{} {:40} lhs = {:.6e}  rhs = {:.6e}  constant = {:.6e}",
            if v.satisfied { "PASS" } else { "FAIL" },
            v.name,
            v.lhs,
            v.rhs,
            v.constant
        );
    }
    std::fs::write(dir.join("verdicts.txt"), text).map_err(io_err)
}

/// Consolidated report over a manifest: every verdict plus every norm
/// series row found in the listed CSV artifacts. Verifies the manifest
/// self-digest and every artifact digest first.
pub fn emit_report(manifest_path: &Path, format: &str) -> Result<(String, bool), String> {
    let manifest = RunManifest::read(manifest_path)?;
    let dir = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    manifest.verify_artifacts(&dir)?;

    let mut norm_rows: Vec<String> = Vec::new();
    for a in &manifest.artifacts {
        if matches!(a.name.as_str(), "norms.csv" | "forcing.csv" | "velocity_transfer.csv") {
            let text = std::fs::read_to_string(dir.join(&a.name)).map_err(io_err)?;
            norm_rows.extend(text.lines().skip(1).map(str::to_string));
        }
    }

    let mut out = String::new();
    let all_pass = manifest.all_pass();
    match format {
        "csv" => {
            out.push_str("kind,name,status,lhs,rhs,constant\n");
            for v in &manifest.verdicts {
                let _ = writeln!(
                    out,
                    "verdict,{},{},{},{},{}",
                    v.name,
                    if v.satisfied { "PASS" } else { "FAIL" },
                    v.lhs,
                    v.rhs,
                    v.constant
                );
            }
            for r in &norm_rows {
                // name,s,p,q,value,resolution → kind,name,value in the value slot
                let name = r.split(',').next().unwrap_or("");
                let value = r.split(',').nth(4).unwrap_or("");
                let _ = writeln!(out, "norm,{name},,{value},,");
            }
        }
        "text" => {
            let _ = writeln!(out, "scenario {}  [{}]", manifest.scenario_name, manifest.status);
            let _ = writeln!(out, "build    {}", manifest.build);
            let _ = writeln!(out, "digest   {}", manifest.scenario_digest);
            for v in &manifest.verdicts {
                let _ = writeln!(
                    out,
                    "{} {:40} lhs = {:.6e}  rhs = {:.6e}  constant = {:.6e}",
                    if v.satisfied { "PASS" } else { "FAIL" },
                    v.name,
                    v.lhs,
                    v.rhs,
                    v.constant
                );
            }
            for r in &norm_rows {
                let _ = writeln!(out, "norm {r}");
            }
            let _ = writeln!(
                out,
                "overall: {}",
                if all_pass { "PASS" } else { "FAIL" }
            );
        }
        other => return Err(format!("unknown report format `{other}` (expected csv|text)")),
    }
    Ok((out, all_pass))
}
