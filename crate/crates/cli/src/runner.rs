//! Op dispatcher: runs one configured operation, persists a summary, data
//! CSVs and a plot manifest. Data files are byte-stable across reruns and
//! thread counts; wall-clock information goes to `metadata.json` only.

use crate::config::ExperimentConfig;
use pssmp_core::fluctuation::{decompose, ladder_unit, renewal_vhat};
use pssmp_core::ladder::{build_from_triple, exit_formula_check, sample_triple, ExitFunctional};
use pssmp_core::lamperti::to_pssmp;
use pssmp_core::levy_model::sample_skeleton;
use pssmp_core::parallel::par_map;
use pssmp_core::resolvent::{bertoin_yor, entrance_law_x, resolvent_direct, resolvent_via_ladder, BoundedFn};
use pssmp_core::stats::mc_mean;
use pssmp_core::{Error, Result, Seed};
use serde_json::json;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Simulate,
    Decompose,
    Ladder,
    Occupation,
    ExitCheck,
    Resolvent,
    Entrance,
    StatsCalibrate,
}

impl OpKind {
    pub fn id(&self) -> &'static str {
        match self {
            OpKind::Simulate => "simulate",
            OpKind::Decompose => "decompose",
            OpKind::Ladder => "ladder",
            OpKind::Occupation => "occupation",
            OpKind::ExitCheck => "exit-check",
            OpKind::Resolvent => "resolvent",
            OpKind::Entrance => "entrance",
            OpKind::StatsCalibrate => "stats-calibrate",
        }
    }
}

pub struct RunOutcome {
    /// False when an op-level acceptance gate failed.
    pub gates_ok: bool,
}

fn write_outputs(
    out: &Path,
    summary: serde_json::Value,
    files: Vec<(String, String)>,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary).unwrap())?;
    let mut plots = Vec::new();
    for (name, payload) in &files {
        std::fs::write(out.join(name), payload)?;
        if name.ends_with(".csv") {
            plots.push(json!({"file": name, "x": "first column", "y": "remaining columns"}));
        }
    }
    std::fs::write(
        out.join("plots.json"),
        serde_json::to_string_pretty(&json!({ "plots": plots })).unwrap(),
    )?;
    std::fs::write(
        out.join("metadata.json"),
        serde_json::to_string_pretty(&json!({
            "written_at_unix_ms": std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            "toolkit_version": env!("CARGO_PKG_VERSION"),
        }))
        .unwrap(),
    )?;
    Ok(())
}

pub fn run(op: OpKind, cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    if let Some(cfg_op) = &cfg.op {
        if cfg_op != op.id() {
            return Err(Error::ConfigError(format!(
                "config op `{cfg_op}` does not match subcommand `{}`",
                op.id()
            )));
        }
    }
    let seed = Seed::new(cfg.seed);
    let spec = &cfg.levy;
    let alpha = cfg.alpha;
    match op {
        OpKind::Simulate => {
            let terminals: Vec<f64> = par_map(cfg.n_paths, |i| -> Result<f64> {
                let p = sample_skeleton(spec, cfg.horizon, cfg.dt, seed.for_path(i))?;
                Ok(*p.values.last().unwrap())
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let (m, se) = mc_mean(&terminals, None);
            let p0 = sample_skeleton(spec, cfg.horizon, cfg.dt, seed.for_path(0))?;
            let mut path_csv = Vec::new();
            p0.to_csv(&mut path_csv)?;
            let xp = to_pssmp(&p0, alpha, cfg.x0)?;
            let mut x_csv = Vec::new();
            xp.to_csv(&mut x_csv)?;
            write_outputs(
                out,
                json!({
                    "op": op.id(), "model": spec.label, "n_paths": cfg.n_paths,
                    "seed": cfg.seed, "mean_terminal": m, "stderr": se,
                    "expected_mean": spec.mean() * cfg.horizon,
                }),
                vec![
                    ("levy_path0.csv".into(), String::from_utf8(path_csv).unwrap()),
                    ("x_path0.csv".into(), String::from_utf8(x_csv).unwrap()),
                ],
            )?;
            Ok(RunOutcome { gates_ok: true })
        }
        OpKind::Decompose => {
            let a = ladder_unit(spec, cfg.dt);
            let decomps = par_map(cfg.n_paths, |i| -> Result<_> {
                let p = sample_skeleton(spec, cfg.horizon, cfg.dt, seed.for_path(i))?;
                decompose(&p, alpha, a)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
            let vhat = renewal_vhat(&decomps, &grid);
            let mut vhat_csv = Vec::new();
            vhat.to_csv(&mut vhat_csv)?;
            let mut epochs_csv = String::from("ell,linv,h,y\n");
            for row in &decomps[0].epochs {
                let _ = writeln!(epochs_csv, "{},{},{},{}", row.ell, row.linv, row.h, row.y);
            }
            let ey1: Vec<f64> = decomps.iter().map(|d| d.y_end() / d.l_end.max(1e-300)).collect();
            let (ey1_m, ey1_se) = mc_mean(&ey1, None);
            write_outputs(
                out,
                json!({
                    "op": op.id(), "model": spec.label, "n_paths": cfg.n_paths,
                    "seed": cfg.seed, "a_hat": a,
                    "mean_local_time": decomps.iter().map(|d| d.l_end).sum::<f64>() / cfg.n_paths as f64,
                    "ey1_estimate": ey1_m, "ey1_stderr": ey1_se,
                }),
                vec![
                    ("vhat.csv".into(), String::from_utf8(vhat_csv).unwrap()),
                    ("epochs_path0.csv".into(), epochs_csv),
                ],
            )?;
            Ok(RunOutcome { gates_ok: true })
        }
        OpKind::Ladder => {
            let t_list = cfg.params.t_list.clone().unwrap_or_else(|| vec![0.5, 1.0]);
            let beta = cfg.params.beta.unwrap_or(alpha);
            let t_need = t_list.iter().cloned().fold(0.0f64, f64::max) * 1.2;
            let samples: Vec<Vec<(f64, f64, f64)>> = par_map(cfg.n_paths, |i| -> Result<_> {
                let tri = sample_triple(spec, alpha, beta, cfg.x0, t_need, cfg.dt, seed.for_path(i), pssmp_core::ladder::TRIPLE_STEP_BUDGET)?;
                Ok(t_list
                    .iter()
                    .map(|&t| tri.eval(t).unwrap_or((f64::NAN, f64::NAN, f64::NAN)))
                    .collect())
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let mut rh_csv = String::from("t,k,r,h\n");
            for row in &samples {
                for (ti, (k, r, h)) in row.iter().enumerate() {
                    let _ = writeln!(rh_csv, "{},{},{},{}", t_list[ti], k, r, h);
                }
            }
            let a = ladder_unit(spec, cfg.dt);
            let p0 = sample_skeleton(spec, cfg.horizon, cfg.dt, seed.for_path(0))?;
            let d0 = decompose(&p0, alpha, a)?;
            let tri0 = build_from_triple(&d0, cfg.x0, beta)?;
            let mut tri_csv = Vec::new();
            tri0.to_csv(&mut tri_csv)?;
            write_outputs(
                out,
                json!({
                    "op": op.id(), "model": spec.label, "n_paths": cfg.n_paths,
                    "seed": cfg.seed, "beta": beta, "t_list": t_list,
                }),
                vec![
                    ("rh_samples.csv".into(), rh_csv),
                    ("triple_path0.csv".into(), String::from_utf8(tri_csv).unwrap()),
                ],
            )?;
            Ok(RunOutcome { gates_ok: true })
        }
        OpKind::Occupation => {
            let a = ladder_unit(spec, cfg.dt);
            let eps = cfg.eps_ladder_or_default();
            let ncp = 4usize;
            let checkpoints: Vec<f64> =
                (1..=ncp).map(|k| cfg.horizon * k as f64 / (ncp as f64 + 0.5)).collect();
            let data = par_map(cfg.n_paths, |i| -> Result<_> {
                let xi = sample_skeleton(spec, cfg.horizon, cfg.dt, seed.for_path(i))?;
                let d = decompose(&xi, alpha, a)?;
                let xp = to_pssmp(&xi, alpha, cfg.x0)?;
                let oc = pssmp_core::ladder::occupation_ltheta(spec, &xp, &d, &eps, &checkpoints)?;
                Ok((d, oc))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let decomps: Vec<_> = data.iter().map(|d| d.0.clone()).collect();
            let mut csv = String::from("eps,vhat,rel_sup_error\n");
            for (ei, &e) in eps.iter().enumerate() {
                let vh = pssmp_core::fluctuation::vhat_interval(&decomps, e.ln_1p());
                let mut err_sum = 0.0;
                for (_, oc) in &data {
                    let mut sup_err = 0.0f64;
                    for k in 0..checkpoints.len() {
                        sup_err = sup_err.max((oc.raw[ei][k] / vh - oc.ltheta[k]).abs());
                    }
                    err_sum += sup_err / oc.ltheta.last().unwrap().max(1e-12);
                }
                let _ = writeln!(csv, "{e},{vh},{}", err_sum / data.len() as f64);
            }
            write_outputs(
                out,
                json!({
                    "op": op.id(), "model": spec.label, "n_paths": cfg.n_paths,
                    "seed": cfg.seed, "eps_ladder": eps,
                }),
                vec![("occupation_ladder.csv".into(), csv)],
            )?;
            Ok(RunOutcome { gates_ok: true })
        }
        OpKind::ExitCheck => {
            let fid = cfg.params.functional.clone().unwrap_or_else(|| "one".into());
            let f: ExitFunctional = fid.parse()?;
            let t = cfg.params.t.unwrap_or(1.0);
            let rep = exit_formula_check(spec, alpha, cfg.x0, f, t, cfg.n_paths, cfg.dt, seed)?;
            let ok = rep.gap_sigmas <= 3.0;
            write_outputs(
                out,
                json!({
                    "op": op.id(), "model": spec.label, "n_paths": cfg.n_paths,
                    "seed": cfg.seed, "functional": fid, "t": t,
                    "lhs": rep.lhs, "lhs_se": rep.lhs_se,
                    "rhs": rep.rhs, "rhs_se": rep.rhs_se,
                    "gap_sigmas": rep.gap_sigmas, "pass": ok,
                }),
                vec![],
            )?;
            Ok(RunOutcome { gates_ok: ok })
        }
        OpKind::Resolvent => {
            let q = cfg.params.q.unwrap_or(1.0);
            let f: BoundedFn = cfg.params.f.clone().unwrap_or_else(|| "one".into()).parse()?;
            let lad = resolvent_via_ladder(spec, alpha, cfg.x0, q, f, cfg.n_paths, cfg.dt, seed.subspace(1))?;
            let dir = resolvent_direct(spec, alpha, cfg.x0, q, f, cfg.n_paths, cfg.dt, seed.subspace(2))?;
            let gap = (lad.value - dir.value).abs();
            let se = pssmp_core::stats::pooled_se(lad.stderr, dir.stderr);
            let ok = gap <= 3.0 * se;
            write_outputs(
                out,
                json!({
                    "op": op.id(), "model": spec.label, "n_paths": cfg.n_paths,
                    "seed": cfg.seed, "q": q,
                    "ladder": {"estimate": lad.value, "stderr": lad.stderr, "truncation": lad.truncation_bound},
                    "direct": {"estimate": dir.value, "stderr": dir.stderr, "truncation": dir.truncation_bound},
                    "gap_sigmas": gap / se.max(1e-300), "pass": ok,
                }),
                vec![],
            )?;
            Ok(RunOutcome { gates_ok: ok })
        }
        OpKind::Entrance => {
            let t = cfg.params.t.unwrap_or(1.0);
            let f: BoundedFn = cfg.params.f.clone().unwrap_or_else(|| "exp-neg".into()).parse()?;
            let eta = entrance_law_x(spec, alpha, t, f, cfg.n_paths, cfg.dt, seed.subspace(1))?;
            let mut eta_csv = String::from("value,weight\n");
            for (v, w) in &eta.measure.eta_samples {
                let _ = writeln!(eta_csv, "{v},{w}");
            }
            let by = if spec.mean() > 0.0 {
                let e = bertoin_yor(spec, alpha, t, f, cfg.n_paths, cfg.dt, seed.subspace(2))?;
                json!({"estimate": e.value, "stderr": e.stderr})
            } else {
                json!(null)
            };
            let norm_gap = (eta.measure.normalization_check - 1.0).abs();
            let ok = norm_gap <= 4.0 * eta.measure.normalization_se + 0.02;
            write_outputs(
                out,
                json!({
                    "op": op.id(), "model": spec.label, "n_paths": cfg.n_paths,
                    "seed": cfg.seed, "t": t,
                    "estimate": eta.estimate, "stderr": eta.stderr,
                    "normalization_check": eta.measure.normalization_check,
                    "normalization_se": eta.measure.normalization_se,
                    "window_defect": eta.measure.window_defect,
                    "mu_plus": eta.measure.mu_plus,
                    "bertoin_yor": by, "pass": ok,
                }),
                vec![("eta_samples.csv".into(), eta_csv)],
            )?;
            Ok(RunOutcome { gates_ok: ok })
        }
        OpKind::StatsCalibrate => {
            let repeats = cfg.params.repeats.unwrap_or(500);
            let (rate, ok) = crate::verify::ks_null_calibration(repeats, 300, seed)?;
            write_outputs(
                out,
                json!({
                    "op": op.id(), "repeats": repeats, "seed": cfg.seed,
                    "rejection_rate_at_0p01": rate, "pass": ok,
                }),
                vec![],
            )?;
            Ok(RunOutcome { gates_ok: ok })
        }
    }
}

