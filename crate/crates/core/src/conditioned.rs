//! The process conditioned to stay positive, built pathwise by pasting
//! time-reversed reflected excursions at the running-supremum level, the
//! accumulation process `W` with terminal value Ĩ, and truncated exponential
//! functionals with drift-based tail bounds.

use crate::error::{Error, Result};
use crate::fluctuation::{LadderDecomposition, Piece};
use crate::levy_model::{classify, LevySpec};
use crate::parallel::Kahan;
use crate::pathkit::PathSkeleton;
use crate::seed::Seed;
use serde::Serialize;
use std::io::Write;

/// A conditioned-to-stay-positive sample path with its future infimum.
#[derive(Debug, Clone)]
pub struct ConditionedPath {
    /// ξ↑ values ≥ 0 on its own grid.
    pub path: PathSkeleton,
    pub horizon: f64,
    /// inf over [t, horizon], nondecreasing.
    pub future_inf: PathSkeleton,
    /// The future infimum is horizon-truncated; beyond the horizon the true
    /// infimum can dip before drifting up.
    pub tail_truncated: bool,
}

/// Pathwise construction of ξ↑: at-supremum stretches are kept at the
/// supremum level, and each excursion is pasted back reflected and
/// time-reversed on top of the post-excursion maximum.
pub fn doney_tanaka(xi: &PathSkeleton, alpha: f64) -> Result<ConditionedPath> {
    if xi.len() < 2 {
        return Err(Error::EmptyPath);
    }
    let d = crate::fluctuation::decompose(xi, alpha, 1.0)?;
    let mut times: Vec<f64> = Vec::with_capacity(xi.len());
    let mut values: Vec<f64> = Vec::with_capacity(xi.len());
    let mut t = 0.0f64;
    // breakpoints carry the value from their time onward
    let push = |times: &mut Vec<f64>, values: &mut Vec<f64>, t: f64, v: f64| {
        if times.last().map_or(true, |&lt| lt < t) {
            times.push(t);
            values.push(v);
        }
    };
    let mut last_max = xi.values[0];
    let mut censored_stop = false;
    for piece in &d.pieces {
        match piece {
            Piece::Sup { dl, v } => {
                // unit sup-time scale: dl is the real stretch length
                push(&mut times, &mut values, t, *v);
                t += dl;
                last_max = *v;
            }
            Piece::Exc { idx } => {
                let e = &d.excursions[*idx as usize];
                if e.censored {
                    censored_stop = true;
                    break;
                }
                let new_max = e.sup_level - e.terminal;
                // reversed excursion: depths in reverse order on top of the
                // post-excursion maximum
                let n = e.path.values.len().saturating_sub(1);
                for k in (0..n).rev() {
                    let depth = e.path.values[k];
                    let dlen = e.path.times[k + 1] - e.path.times[k];
                    push(&mut times, &mut values, t, new_max + depth);
                    t += dlen;
                }
                last_max = new_max;
            }
        }
    }
    if !censored_stop {
        // the closing grid point may itself be a new maximum
        last_max = xi.breakpoints().fold(last_max, |m, (_, v)| m.max(v));
    }
    push(&mut times, &mut values, t, last_max);
    if times.is_empty() {
        return Err(Error::EmptyPath);
    }
    let horizon = t;
    let up = PathSkeleton {
        times,
        values,
        events: Vec::new(),
        lifetime: f64::INFINITY,
        origin_seed: xi.origin_seed,
    };
    let mut inf_vals = up.values.clone();
    for i in (0..inf_vals.len().saturating_sub(1)).rev() {
        inf_vals[i] = inf_vals[i].min(inf_vals[i + 1]);
    }
    let future_inf = PathSkeleton {
        times: up.times.clone(),
        values: inf_vals,
        events: Vec::new(),
        lifetime: f64::INFINITY,
        origin_seed: xi.origin_seed,
    };
    Ok(ConditionedPath { path: up, horizon, future_inf, tail_truncated: true })
}

/// The accumulation `W_t = ∫ e^{−α h_{r−}} dY_r + Σ (e^{−αΔh}−1)e^{−αh_−}ΔY`
/// on the local-time grid of a decomposition, with its terminal estimate.
#[derive(Debug, Clone, Serialize)]
pub struct WCurve {
    /// Local-time abscissae (piece boundaries).
    pub t_grid: Vec<f64>,
    pub w: Vec<f64>,
    /// Terminal estimate Ĩ with its truncation bound.
    pub terminal: f64,
    pub truncation_bound: f64,
    pub converged: bool,
}

impl WCurve {
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "local_time,w")?;
        for (t, v) in self.t_grid.iter().zip(self.w.iter()) {
            writeln!(w, "{},{}", t, v)?;
        }
        Ok(())
    }

    /// Value at a local time. W is piecewise linear in local time across
    /// at-supremum stretches (jumps sit at repeated abscissae), so linear
    /// interpolation inside a stretch is exact.
    pub fn at(&self, t_loc: f64) -> f64 {
        let idx = self.t_grid.partition_point(|&t| t <= t_loc);
        let i = idx.saturating_sub(1);
        if idx < self.t_grid.len() && self.t_grid[idx] > self.t_grid[i] {
            let frac = (t_loc - self.t_grid[i]) / (self.t_grid[idx] - self.t_grid[i]);
            self.w[i] + frac * (self.w[idx] - self.w[i])
        } else {
            self.w[i]
        }
    }
}

/// Relative tail tolerance: the terminal is flagged converged when the last
/// unit of local time added less than this fraction of the value.
pub const W_TAIL_TOL: f64 = 1e-6;

/// Build the W curve from a decomposition. Requires α > 0 and a ladder
/// height with finite mean (checked through the spec's classification).
pub fn w_process(spec: &LevySpec, decomp: &LadderDecomposition) -> Result<WCurve> {
    let alpha = decomp.alpha;
    if !(alpha > 0.0) {
        return Err(Error::InconsistentInputs("w_process needs alpha > 0".into()));
    }
    let reg = classify(spec)?;
    if !reg.ladder_height_mean_finite {
        return Err(Error::InconsistentInputs("E(h_1) must be finite".into()));
    }
    let mut t_grid = Vec::with_capacity(decomp.pieces.len() + 1);
    let mut w = Vec::with_capacity(decomp.pieces.len() + 1);
    let mut acc = Kahan::new();
    let mut ell = 0.0f64;
    t_grid.push(0.0);
    w.push(0.0);
    let mut unit_marks: Vec<f64> = vec![0.0];
    let mut next_unit = 1.0f64;
    for piece in &decomp.pieces {
        match piece {
            Piece::Sup { dl, v } => {
                acc.add((-alpha * v).exp() * decomp.a_hat * dl);
                ell += dl;
            }
            Piece::Exc { idx } => {
                let e = &decomp.excursions[*idx as usize];
                if e.censored {
                    break;
                }
                let h_post = e.sup_level - e.terminal;
                acc.add((-alpha * h_post).exp() * e.j_exp);
            }
        }
        t_grid.push(ell);
        w.push(acc.value());
        while ell >= next_unit {
            unit_marks.push(acc.value());
            next_unit += 1.0;
        }
    }
    let terminal = acc.value();
    let incs: Vec<f64> = unit_marks.windows(2).map(|p| p[1] - p[0]).collect();
    if incs.len() >= 3 {
        let k = incs.len();
        if incs[k - 1] > incs[k - 2] && incs[k - 2] > incs[k - 3] && incs[k - 1] > 0.05 * terminal {
            return Err(Error::DivergenceDetected(format!(
                "unit increments growing: {:.3e} then {:.3e}",
                incs[k - 2],
                incs[k - 1]
            )));
        }
    }
    let last_inc = incs.last().copied().unwrap_or(terminal);
    let converged = last_inc < W_TAIL_TOL * terminal.max(f64::MIN_POSITIVE);
    Ok(WCurve { t_grid, w, terminal, truncation_bound: last_inc, converged })
}

/// Truncation mode for the exponential functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpFunctionalMode {
    /// ∫₀^∞ e^{α ξ_s} ds, requiring α·E(ξ₁) < 0.
    WholePath,
    /// ∫₀^ζ e^{α ξ_s} ds up to the lifetime (or horizon if alive).
    UntilHitZero,
}

/// Horizon-truncated exponential functional with a drift-based tail bound.
/// Returns `(value, bound)`.
pub fn exp_functional(
    xi: &PathSkeleton,
    alpha: f64,
    mode: ExpFunctionalMode,
    mean_drift: f64,
) -> Result<(f64, f64)> {
    let end = xi.end_time();
    let value = xi.exp_integral(alpha, end)?;
    match mode {
        ExpFunctionalMode::UntilHitZero => Ok((value, 0.0)),
        ExpFunctionalMode::WholePath => {
            if !(alpha * mean_drift < 0.0) {
                return Err(Error::NonConvergent(
                    "whole-path functional needs α·E(ξ₁) < 0".into(),
                ));
            }
            let v_end = *xi.values.last().unwrap();
            // beyond the horizon e^{αξ} decays at mean rate |α·mean|;
            // doubled against fluctuations
            let bound = 2.0 * (alpha * v_end).exp() / (alpha * mean_drift).abs();
            Ok((value, bound))
        }
    }
}

/// Samples of Ĩ with export metadata.
#[derive(Debug, Clone, Serialize)]
pub struct ItildeSamples {
    pub values: Vec<f64>,
    pub seed: Seed,
    pub horizon_local_time: f64,
    pub tolerance: f64,
}

impl ItildeSamples {
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "itilde")?;
        for v in &self.values {
            writeln!(w, "{}", v)?;
        }
        Ok(())
    }
}
