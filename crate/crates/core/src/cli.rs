//! Subcommand dispatch, result persistence (JSON summaries and RFC-4180 CSV
//! tables), and exit-code policy: 0 on pass, 2 on statistical-test failure,
//! 1 on error.

use crate::config::{parse_config_file, to_json_17, Validated};
use crate::error::{Result, RuinError};
use crate::estimator::{
    crude_conditional_sample, crude_frequency, estimate_ruin, map_paths, path_functional,
    tv_diagnostic_curve, PathFunctional,
};
use crate::kernel::StopCause;
use crate::limits::{limit_law_tests, HazardTable};
use crate::lyapunov::{drift_check, kappa_level};
use crate::rng::{path_rng, purpose};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Estimate,
    TvCurve,
    VerifyLyapunov,
    LimitLaws,
    CrudeOracle,
    SimulatePaths,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub paths: Option<u64>,
}

/// Run a subcommand against a config file. Returns whether every statistical
/// pass flag held (true also when a command has no pass/fail semantics).
pub fn run(cmd: Subcommand, config_path: &Path, overrides: &Overrides) -> Result<bool> {
    let mut v = parse_config_file(config_path)?;
    if let Some(seed) = overrides.seed {
        v.seed = seed;
        v.effective.sim.seed = Some(seed);
    }
    if let Some(workers) = overrides.workers {
        v.workers = workers;
        v.effective.sim.workers = Some(workers);
    }
    if let Some(paths) = overrides.paths {
        v.n_paths = paths;
        v.effective.sim.n_paths = Some(paths);
    }
    if let Some(out) = &overrides.out {
        v.output_dir = out.display().to_string();
        v.effective.sim.output_dir = Some(v.output_dir.clone());
    }
    let out_dir = PathBuf::from(&v.output_dir);
    std::fs::create_dir_all(&out_dir)?;
    write_text(&out_dir.join("effective_config.json"), &to_json_17(&v.effective)?)?;

    match cmd {
        Subcommand::Estimate => run_estimate(&v, &out_dir),
        Subcommand::TvCurve => run_tv_curve(&v, &out_dir),
        Subcommand::VerifyLyapunov => run_verify_lyapunov(&v, &out_dir),
        Subcommand::LimitLaws => run_limit_laws(&v, &out_dir),
        Subcommand::CrudeOracle => run_crude_oracle(&v, &out_dir),
        Subcommand::SimulatePaths => run_simulate_paths(&v, &out_dir),
    }
}

fn require_b(v: &Validated) -> Result<f64> {
    v.b.ok_or_else(|| RuinError::Validation("sim.b is required for this subcommand".into()))
}

fn run_estimate(v: &Validated, out_dir: &Path) -> Result<bool> {
    let b = require_b(v)?;
    let est = estimate_ruin(&v.sim, b, v.n_paths, v.seed, v.workers)?;
    write_text(&out_dir.join("estimate.json"), &to_json_17(&est)?)?;
    if v.dump_paths {
        let rows = map_paths(&v.sim, b, v.n_paths, v.seed, v.workers, |idx, rec| {
            (
                idx,
                rec.log_weight.exp()
                    * if rec.stop_cause == StopCause::HitA { 1.0 } else { 0.0 },
                rec.steps(),
                cause_str(rec.stop_cause),
                rec.n_jump,
            )
        })?;
        let mut w = csv_writer(&out_dir.join("paths_summary.csv"))?;
        w.write_record(["path_id", "weight", "steps", "stop_cause", "n_jump"])
            .map_err(csv_err)?;
        for (idx, weight, steps, cause, n_jump) in rows {
            w.write_record([
                idx.to_string(),
                fmt_f64(weight),
                steps.to_string(),
                cause.to_string(),
                n_jump.map(|n| n.to_string()).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(true)
}

fn run_tv_curve(v: &Validated, out_dir: &Path) -> Result<bool> {
    let b_list = v
        .b_list
        .clone()
        .or_else(|| v.b.map(|b| vec![b]))
        .ok_or_else(|| RuinError::Validation("sim.b_list (or sim.b) is required for tv-curve".into()))?;
    let points = tv_diagnostic_curve(&v.sim, &b_list, v.n_paths, v.seed, v.workers)?;
    let mut w = csv_writer(&out_dir.join("tv_curve.csv"))?;
    w.write_record(["b", "p_hat", "rel_err", "m2_ratio", "m2_se", "tv_bound"]).map_err(csv_err)?;
    for p in &points {
        w.write_record([
            fmt_f64(p.b),
            fmt_f64(p.p_hat),
            fmt_f64(p.rel_err),
            fmt_f64(p.m2_ratio),
            fmt_f64(p.m2_se),
            fmt_f64(p.tv_bound),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    write_text(&out_dir.join("tv_curve.json"), &to_json_17(&points)?)?;
    Ok(true)
}

#[derive(Serialize)]
struct LyapunovSummary {
    b: f64,
    theta: f64,
    c1: f64,
    epsilon: f64,
    kappa_level: f64,
    n_states: usize,
    n_pass: usize,
    all_pass: bool,
}

fn run_verify_lyapunov(v: &Validated, out_dir: &Path) -> Result<bool> {
    let b = require_b(v)?;
    let sim = v.sim.with_theta(v.drift_theta);
    let states = lyapunov_states(v, b)?;
    let mut w = csv_writer(&out_dir.join("lyapunov.csv"))?;
    let d = sim.model.dim;
    let mut header: Vec<String> = (0..d).map(|i| format!("s{i}")).collect();
    header.extend(["j1", "j2_scaled", "sum", "std_error", "p_b", "g_s", "pass"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    let mut n_pass = 0usize;
    for (i, s) in states.iter().enumerate() {
        let mut rng = path_rng(v.seed, purpose::CHECKS, i as u64);
        let rep = drift_check(&sim, b, &v.moll, s, v.lyapunov_n_mc, &mut rng)?;
        let pass = rep.sum <= 1.0 + 3.0 * rep.std_error;
        n_pass += pass as usize;
        let mut row: Vec<String> = s.iter().map(|&x| fmt_f64(x)).collect();
        row.extend([
            fmt_f64(rep.j1),
            fmt_f64(rep.j2_scaled),
            fmt_f64(rep.sum),
            fmt_f64(rep.std_error),
            fmt_f64(rep.p_b),
            fmt_f64(rep.g_s),
            pass.to_string(),
        ]);
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    let summary = LyapunovSummary {
        b,
        theta: v.drift_theta,
        c1: v.moll.c1,
        epsilon: v.epsilon,
        kappa_level: kappa_level(&sim, b, &v.moll)?,
        n_states: states.len(),
        n_pass,
        all_pass: n_pass == states.len(),
    };
    write_text(&out_dir.join("lyapunov.json"), &to_json_17(&summary)?)?;
    Ok(summary.all_pass)
}

/// Grid states for the drift verification: explicit states (in units of b)
/// when configured, otherwise a deterministic lattice filtered to the region
/// R where the check is defined.
fn lyapunov_states(v: &Validated, b: f64) -> Result<Vec<Vec<f64>>> {
    if let Some(zs) = &v.lyapunov_states_z {
        return Ok(zs.iter().map(|z| z.iter().map(|x| x * b).collect()).collect());
    }
    let sim = &v.sim;
    let d = sim.model.dim;
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for scale in [0.2, 0.4, 0.6, 0.8, 1.0] {
        candidates.push(vec![-scale; d]);
        for i in 0..d {
            for lateral in [0.5 * scale, -0.5 * scale] {
                let mut z = vec![-scale; d];
                z[i] += lateral;
                candidates.push(z);
            }
        }
        for i in 0..d {
            let mut z = vec![-0.3 * scale; d];
            z[i] = 0.45 * scale;
            candidates.push(z);
        }
    }
    let mut states = Vec::new();
    for z in candidates {
        let s: Vec<f64> = z.iter().map(|x| x * b).collect();
        let in_region = sim.system.r(b, &s) <= -sim.params.delta2 * b
            && !sim.target.gamma_exit(b, &s);
        if in_region {
            states.push(s);
            if states.len() == v.lyapunov_n_states {
                break;
            }
        }
    }
    if states.is_empty() {
        return Err(RuinError::PreconditionViolation(
            "no drift-check states lie in the region R".into(),
        ));
    }
    Ok(states)
}

fn run_limit_laws(v: &Validated, out_dir: &Path) -> Result<bool> {
    let b = require_b(v)?;
    let rows = map_paths(&v.sim, b, v.limits_n_paths, v.seed, v.workers, |_, rec| {
        (rec.clone(), rec.log_weight.exp())
    })?;
    let paths: Vec<_> = rows.iter().map(|(p, _)| p.clone()).collect();
    let weights: Vec<f64> = rows.iter().map(|&(_, w)| w).collect();
    let report = limit_law_tests(&v.sim, b, &paths, Some(&weights), v.seed)?;
    write_text(&out_dir.join("limit_laws.json"), &to_json_17(&report)?)?;
    let zstar =
        HazardTable::build(&v.sim.model, &v.sim.target.vstar, &v.sim.target.astar, 1.0, 1.0)?;
    let zatheta = HazardTable::build(
        &v.sim.model,
        &v.sim.system.vs,
        &v.sim.system.offs,
        v.sim.params.a,
        v.sim.params.theta.max(1e-12),
    )?;
    write_survival_csv(&out_dir.join("survival_zstar.csv"), &zstar)?;
    write_survival_csv(&out_dir.join("survival_zatheta.csv"), &zatheta)?;
    let pass = report.pass_t_zstar
        && report.pass_n_zatheta
        && report.pass_overshoot
        && (v.sim.model.alpha <= 2.0 || report.pass_clt)
        && report.lln_within_band.map_or(true, |f| f >= 0.9);
    Ok(pass)
}

fn write_survival_csv(path: &Path, table: &HazardTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "kappa", "tail_integral", "hazard", "survival"]).map_err(csv_err)?;
    for i in 0..table.grid.len() {
        w.write_record([
            fmt_f64(table.grid[i]),
            fmt_f64(table.kappa[i]),
            fmt_f64(table.tail[i]),
            fmt_f64(table.hazard[i]),
            fmt_f64(table.survival[i]),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn run_crude_oracle(v: &Validated, out_dir: &Path) -> Result<bool> {
    let b = require_b(v)?;
    let crude = crude_frequency(&v.sim, b, v.n_paths, v.seed, v.workers)?;
    write_text(&out_dir.join("crude.json"), &to_json_17(&crude)?)?;
    if v.crude_hits > 0 {
        let paths = crude_conditional_sample(&v.sim, b, v.crude_hits, v.seed, v.workers)?;
        let mut w = csv_writer(&out_dir.join("crude_functionals.csv"))?;
        w.write_record(["path_id", "steps", "t_over_b", "overshoot_over_b"]).map_err(csv_err)?;
        for (i, p) in paths.iter().enumerate() {
            w.write_record([
                i.to_string(),
                p.steps().to_string(),
                fmt_f64(path_functional(&v.sim, b, p, PathFunctional::TimeOverB)),
                fmt_f64(path_functional(&v.sim, b, p, PathFunctional::OvershootOverB)),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(true)
}

fn run_simulate_paths(v: &Validated, out_dir: &Path) -> Result<bool> {
    let b = require_b(v)?;
    let n = v.n_paths.min(10_000);
    let mut w = csv_writer(&out_dir.join("paths.csv"))?;
    let d = v.sim.model.dim;
    let mut header = vec!["path_id".to_string(), "n".to_string()];
    header.extend((0..d).map(|i| format!("s{i}")));
    header.push("jumped".into());
    header.push("log_khat".into());
    w.write_record(&header).map_err(csv_err)?;
    for idx in 0..n {
        let mut rng = path_rng(v.seed, purpose::PATHS, idx);
        let mut s = vec![0.0; d];
        let cap = v.sim.horizon(b);
        let record = |n_step: usize, s: &[f64], jumped: &str, lk: &str, w: &mut csv::Writer<std::fs::File>| -> Result<()> {
            let mut row = vec![idx.to_string(), n_step.to_string()];
            row.extend(s.iter().map(|&x| fmt_f64(x)));
            row.push(jumped.to_string());
            row.push(lk.to_string());
            w.write_record(&row).map_err(csv_err)
        };
        record(0, &s, "", "", &mut w)?;
        let mut steps = 0usize;
        while v.sim.system.r(b, &s) <= 0.0
            && !v.sim.target.gamma_exit(b, &s)
            && steps < cap
        {
            let out = v.sim.step(b, &s, &mut rng)?;
            steps += 1;
            s = out.s1;
            record(steps, &s, &out.jumped.to_string(), &fmt_f64(out.log_khat), &mut w)?;
        }
    }
    w.flush()?;
    Ok(true)
}

fn cause_str(c: StopCause) -> &'static str {
    match c {
        StopCause::HitA => "hit_a",
        StopCause::HitGamma => "hit_gamma",
        StopCause::HorizonOverflow => "horizon_overflow",
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else {
        x.to_string()
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path)?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

fn csv_err(e: csv::Error) -> RuinError {
    RuinError::Io(std::io::Error::other(e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
