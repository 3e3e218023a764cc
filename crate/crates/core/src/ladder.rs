//! The ladder objects of the positive self-similar process: the local time
//! `L^Θ` of the supremum set, its right inverse `R`, the height `H = X∘R`,
//! the clock `K = ∫ X^{−α}` up to `R`, and the exit-system check.
//!
//! Two constructions are implemented independently. The direct one scans
//! the X path's own breakpoints; the other assembles the triple from the
//! `(L⁻¹, h, Y)` decomposition of the underlying Lévy path and time-changes
//! it by the inverse of `x^β ∫ e^{β h}`. At the discrete level both are
//! rearrangements of the same sums, so their sample laws agree exactly;
//! the tests exercise that both pathwise (coupled seeds) and in law
//! (independent seeds).

use crate::error::{Error, Result};
use crate::fluctuation::{decompose, ladder_unit, LadderDecomposition, Piece};
use crate::lamperti::PssmpPath;
use crate::levy_model::{classify, sample_until_clock, sample_until_clock_capped, LevySpec};
use crate::parallel::{par_map, Kahan};
use crate::pathkit::IncreasingFn;
use crate::seed::Seed;
use crate::stats::mc_mean;
use serde::Serialize;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    Direct,
    LevyTriple,
}

/// A realization of `(K, R, H)` as piecewise data on the `L^{Θ,β}` axis.
/// Within a piece `R` and `K` grow linearly and `H` is constant; excursions
/// sit between pieces and contribute jumps of `R` and `K`.
#[derive(Debug, Clone)]
pub struct LadderTriple {
    pub alpha: f64,
    pub beta: f64,
    pub x: f64,
    pub construction: Construction,
    /// Sup-time unit the local time was built with.
    pub a_hat: f64,
    t_start: Vec<f64>,
    r_start: Vec<f64>,
    k_start: Vec<f64>,
    h: Vec<f64>,
    t_end: f64,
    r_end: f64,
    k_end: f64,
}

impl LadderTriple {
    /// Total `L^{Θ,β}` covered by the realization.
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn r_end(&self) -> f64 {
        self.r_end
    }

    pub fn k_end(&self) -> f64 {
        self.k_end
    }

    pub fn n_pieces(&self) -> usize {
        self.h.len()
    }

    /// Evaluate `(K_t, R_t, H_t)`; None when `t` is beyond the simulated
    /// ladder horizon.
    pub fn eval(&self, t: f64) -> Option<(f64, f64, f64)> {
        if t < 0.0 || t >= self.t_end || self.t_start.is_empty() {
            return None;
        }
        let i = match self.t_start.partition_point(|&v| v <= t) {
            0 => 0,
            k => k - 1,
        };
        let dt = t - self.t_start[i];
        let hv = self.h[i];
        let r_slope = self.a_hat * hv.powf(self.alpha - self.beta);
        let k_slope = self.a_hat * hv.powf(-self.beta);
        Some((self.k_start[i] + k_slope * dt, self.r_start[i] + r_slope * dt, hv))
    }

    /// The curve `t_X ↦ L^{Θ,β}(t_X)` as an increasing function.
    pub fn ltheta_curve(&self) -> LThetaCurve {
        let mut knots = Vec::with_capacity(2 * self.t_start.len() + 1);
        for i in 0..self.t_start.len() {
            knots.push((self.r_start[i], self.t_start[i]));
            let t_next = if i + 1 < self.t_start.len() { self.t_start[i + 1] } else { self.t_end };
            let hv = self.h[i];
            let r_len = self.a_hat * hv.powf(self.alpha - self.beta) * (t_next - self.t_start[i]);
            knots.push((self.r_start[i] + r_len, t_next));
        }
        knots.push((self.r_end, self.t_end));
        knots.dedup();
        LThetaCurve { curve: IncreasingFn { knots }, terminal: self.t_end }
    }

    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,k,r,h")?;
        for i in 0..self.t_start.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.t_start[i], self.k_start[i], self.r_start[i], self.h[i]
            )?;
        }
        Ok(())
    }
}

/// The local-time curve of the supremum set in X time.
#[derive(Debug, Clone)]
pub struct LThetaCurve {
    pub curve: IncreasingFn,
    /// Value accumulated up to the end of the realization.
    pub terminal: f64,
}

/// `L^{Θ,β}` of the path, default `beta = alpha`. The decomposition must
/// come from `to_levy` of the same path.
pub fn ltheta(xp: &PssmpPath, decomp: &LadderDecomposition, beta: f64) -> Result<LThetaCurve> {
    check_consistency(xp, decomp)?;
    let triple = build_from_triple(decomp, xp.x, beta)?;
    Ok(triple.ltheta_curve())
}

fn check_consistency(xp: &PssmpPath, decomp: &LadderDecomposition) -> Result<()> {
    if decomp.alpha != xp.alpha {
        return Err(Error::InconsistentInputs(format!(
            "decomposition alpha {} vs path alpha {}",
            decomp.alpha, xp.alpha
        )));
    }
    let linv_end = decomp.epochs.last().map_or(0.0, |r| r.linv);
    let xi_end = *xp.xi_times.last().unwrap_or(&0.0);
    if (linv_end - xi_end).abs() > 1e-6 * xi_end.max(1.0) {
        return Err(Error::InconsistentInputs(
            "decomposition does not cover the path's Lévy time".into(),
        ));
    }
    Ok(())
}

/// Assemble the triple from a Lévy-path decomposition started at `x`.
pub fn build_from_triple(decomp: &LadderDecomposition, x: f64, beta: f64) -> Result<LadderTriple> {
    if !(x > 0.0) {
        return Err(Error::NonPositiveValue(format!("starting point {x}")));
    }
    if beta == 0.0 {
        return Err(Error::InconsistentInputs("beta must be nonzero".into()));
    }
    let alpha = decomp.alpha;
    let s0 = decomp.a_hat;
    let xb = x.powf(beta);
    let xa = x.powf(alpha);
    let n_sup = decomp.pieces.iter().filter(|p| matches!(p, Piece::Sup { .. })).count();
    let mut t_start = Vec::with_capacity(n_sup);
    let mut r_start = Vec::with_capacity(n_sup);
    let mut k_start = Vec::with_capacity(n_sup);
    let mut h = Vec::with_capacity(n_sup);
    let mut t_acc = Kahan::new();
    let mut r_acc = Kahan::new();
    let mut k_acc = Kahan::new();
    for piece in &decomp.pieces {
        match piece {
            Piece::Sup { dl, v } => {
                t_start.push(t_acc.value());
                r_start.push(r_acc.value());
                k_start.push(k_acc.value());
                h.push(x * v.exp());
                t_acc.add(xb * (beta * v).exp() * dl);
                r_acc.add(xa * (alpha * v).exp() * s0 * dl);
                k_acc.add(s0 * dl);
            }
            Piece::Exc { idx } => {
                let e = &decomp.excursions[*idx as usize];
                if e.censored {
                    break;
                }
                r_acc.add(xa * (alpha * e.sup_level).exp() * e.j_exp);
                k_acc.add(e.duration);
            }
        }
    }
    Ok(LadderTriple {
        alpha,
        beta,
        x,
        construction: Construction::LevyTriple,
        a_hat: s0,
        t_start,
        r_start,
        k_start,
        h,
        t_end: t_acc.value(),
        r_end: r_acc.value(),
        k_end: k_acc.value(),
    })
}

/// Build the triple by scanning the X path directly: running maximum in X
/// coordinates, `L^{Θ,β}` accumulated on at-supremum stretches, `K` by
/// left-endpoint quadrature of `X^{−α}` over all time.
pub fn build_direct(xp: &PssmpPath, a_hat: f64, beta: f64) -> Result<LadderTriple> {
    if xp.path.len() < 2 {
        return Err(Error::DeadPath("need at least one X segment".into()));
    }
    if beta == 0.0 {
        return Err(Error::InconsistentInputs("beta must be nonzero".into()));
    }
    let alpha = xp.alpha;
    let mut t_start = Vec::new();
    let mut r_start = Vec::new();
    let mut k_start = Vec::new();
    let mut h = Vec::new();
    let mut t_acc = Kahan::new();
    let mut r_acc = Kahan::new();
    let mut k_acc = Kahan::new();
    // trailing-open-excursion bookkeeping: the triple is truncated at the
    // last completed ladder stretch
    let mut t_final = 0.0f64;
    let mut r_final = 0.0f64;
    let mut k_final = 0.0f64;
    let mut bps = xp.path.breakpoints();
    let (mut t_prev, mut v_prev) = bps.next().ok_or(Error::EmptyPath)?;
    let mut m = v_prev;
    let mut in_exc = false;
    for (t, v) in bps {
        let du = t - t_prev;
        if du > 0.0 {
            if !in_exc {
                t_start.push(t_acc.value());
                r_start.push(r_acc.value());
                k_start.push(k_acc.value());
                h.push(v_prev);
                t_acc.add(v_prev.powf(beta - alpha) / a_hat * du);
                t_final = t_acc.value();
            }
            r_acc.add(du);
            k_acc.add(v_prev.powf(-alpha) * du);
            if !in_exc {
                r_final = r_acc.value();
                k_final = k_acc.value();
            }
        }
        if v > m {
            m = v;
            if in_exc {
                in_exc = false;
                r_final = r_acc.value();
                k_final = k_acc.value();
            }
        } else if v < m && !in_exc {
            in_exc = true;
        }
        t_prev = t;
        v_prev = v;
    }
    Ok(LadderTriple {
        alpha,
        beta,
        x: xp.x,
        construction: Construction::Direct,
        a_hat,
        t_start,
        r_start,
        k_start,
        h,
        t_end: t_final,
        r_end: r_final,
        k_end: k_final,
    })
}

/// Occupation approximants of `L^Θ` on the X side: raw occupation of
/// `M/X ∈ [1, 1+ε)` at X-time checkpoints, next to the constructed curve.
#[derive(Debug, Clone)]
pub struct LThetaOccupation {
    pub checkpoints: Vec<f64>,
    pub eps: Vec<f64>,
    pub raw: Vec<Vec<f64>>,
    pub ltheta: Vec<f64>,
}

pub fn occupation_ltheta(
    spec: &LevySpec,
    xp: &PssmpPath,
    decomp: &LadderDecomposition,
    eps_list: &[f64],
    checkpoints: &[f64],
) -> Result<LThetaOccupation> {
    let reg = classify(spec)?;
    if !reg.reg_up {
        return Err(Error::RegularityViolation(
            "occupation local time needs 0 regular for (0,∞)".into(),
        ));
    }
    check_consistency(xp, decomp)?;
    let alpha = xp.alpha;
    let xa = xp.x.powf(alpha);
    let s0 = decomp.a_hat;
    let log_eps: Vec<f64> = eps_list.iter().map(|e| e.ln_1p()).collect();
    let ne = eps_list.len();
    let mut occ = vec![0.0f64; ne];
    let mut lt = 0.0f64;
    let mut t_x = 0.0f64;
    let mut next_cp = 0usize;
    let mut raw = vec![Vec::with_capacity(checkpoints.len()); ne];
    let mut lt_out = Vec::with_capacity(checkpoints.len());
    // one X-time segment with constant membership and L^Θ rate
    let mut push_segment = |len: f64, member: &[bool], lt_rate: f64| {
        let t_new = t_x + len;
        while next_cp < checkpoints.len() && checkpoints[next_cp] <= t_new {
            let frac = checkpoints[next_cp] - t_x;
            for i in 0..ne {
                raw[i].push(occ[i] + if member[i] { frac } else { 0.0 });
            }
            lt_out.push(lt + lt_rate * frac);
            next_cp += 1;
        }
        for i in 0..ne {
            if member[i] {
                occ[i] += len;
            }
        }
        lt += lt_rate * len;
        t_x = t_new;
    };
    let all = vec![true; ne];
    let mut member = vec![false; ne];
    for piece in &decomp.pieces {
        match piece {
            Piece::Sup { dl, v } => {
                let seg = xa * (alpha * v).exp() * s0 * dl;
                if seg > 0.0 {
                    // dL^Θ/dt_X = 1/a on the supremum set
                    push_segment(seg, &all, 1.0 / s0);
                }
            }
            Piece::Exc { idx } => {
                let e = &decomp.excursions[*idx as usize];
                let scale = xa * (alpha * e.sup_level).exp();
                for (k, &depth) in e.path.values.iter().enumerate() {
                    if k + 1 >= e.path.times.len() {
                        break;
                    }
                    let dlen = e.path.times[k + 1] - e.path.times[k];
                    let seg = scale * (-alpha * depth).exp() * dlen;
                    for i in 0..ne {
                        member[i] = depth < log_eps[i];
                    }
                    push_segment(seg, &member, 0.0);
                }
            }
        }
    }
    drop(push_segment);
    while lt_out.len() < checkpoints.len() {
        for i in 0..ne {
            raw[i].push(occ[i]);
        }
        lt_out.push(lt);
    }
    Ok(LThetaOccupation {
        checkpoints: checkpoints.to_vec(),
        eps: eps_list.to_vec(),
        raw,
        ltheta: lt_out,
    })
}

/// Default per-path step budget for ladder-time coverage. The real time a
/// path needs to accumulate ladder time has a heavy tail for oscillating
/// models, so coverage is capped and the rare shortfalls surface as
/// truncated triples (`eval` returns None past `t_end`).
pub const TRIPLE_STEP_BUDGET: usize = 16_000_000;

/// Simulate a ladder triple aiming to cover `L^{Θ,β}` time `t_need` from
/// start `x`, extending the Lévy horizon geometrically within the step
/// budget. The returned triple may fall short of `t_need` when the budget
/// runs out; the caller decides how to treat censored realizations.
pub fn sample_triple(
    spec: &LevySpec,
    alpha: f64,
    beta: f64,
    x: f64,
    t_need: f64,
    dt: f64,
    seed: Seed,
    max_steps: usize,
) -> Result<LadderTriple> {
    let a_hat = ladder_unit(spec, dt);
    let mut a_need = (t_need / x.powf(beta)).max(1.0) * 4.0;
    loop {
        let (xi, covered) =
            sample_until_clock_capped(spec, dt, seed, alpha, a_need, true, max_steps)?;
        let d = decompose(&xi, alpha, a_hat)?;
        let triple = build_from_triple(&d, x, beta)?;
        if triple.t_end > t_need || !covered {
            return Ok(triple);
        }
        a_need *= 4.0;
    }
}

/// Same contract as [`sample_triple`] but through the direct X-path scan.
/// Uses the identical horizon rule, so censoring hits both constructions
/// with the same law.
pub fn sample_direct_triple(
    spec: &LevySpec,
    alpha: f64,
    beta: f64,
    x: f64,
    t_need: f64,
    dt: f64,
    seed: Seed,
    max_steps: usize,
) -> Result<LadderTriple> {
    let a_hat = ladder_unit(spec, dt);
    let mut a_need = (t_need / x.powf(beta)).max(1.0) * 4.0;
    loop {
        let (xi, covered) =
            sample_until_clock_capped(spec, dt, seed, alpha, a_need, true, max_steps)?;
        let xp = crate::lamperti::to_pssmp(&xi, alpha, x)?;
        let triple = build_direct(&xp, a_hat, beta)?;
        if triple.t_end > t_need || !covered {
            return Ok(triple);
        }
        a_need *= 4.0;
    }
}

/// Sentinel pair used as the common image of censored `(R, H)` samples in
/// law comparisons; both constructions censor under the identical rule, so
/// the sentinel atoms match in law.
pub const CENSORED_RH: (f64, f64) = (1e18, 1e18);

/// `(R_t, H_t)` of a triple, or the sentinel when the realization was
/// censored before ladder time `t`.
pub fn rh_or_sentinel(tri: &LadderTriple, t: f64) -> (f64, f64) {
    match tri.eval(t) {
        Some((_, r, h)) => (r, h),
        None => CENSORED_RH,
    }
}

/// Laws of the discrete triple can carry atoms (deterministic drift
/// stretches). Two constructions reach the same atom through different
/// summation orders and land a few ulp apart, which a KS distance reads as
/// a fully split atom. Snap values of both samples that agree to relative
/// 1e-9 onto a common representative, coordinate-wise; continuous parts are
/// only perturbed at tie level.
pub fn snap_common_atoms(a: &mut [(f64, f64)], b: &mut [(f64, f64)]) {
    for coord in 0..2 {
        let get = |p: &(f64, f64)| if coord == 0 { p.0 } else { p.1 };
        let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() + b.len());
        for (i, p) in a.iter().enumerate() {
            all.push((get(p), 0, i));
        }
        for (i, p) in b.iter().enumerate() {
            all.push((get(p), 1, i));
        }
        all.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut k = 0usize;
        while k < all.len() {
            let mut j = k;
            let rep = all[k].0;
            while j + 1 < all.len() {
                let next = all[j + 1].0;
                if (next - all[j].0).abs() <= 1e-9 * next.abs().max(1e-300) {
                    j += 1;
                } else {
                    break;
                }
            }
            for item in all.iter().take(j + 1).skip(k) {
                let (_, which, idx) = *item;
                let target = if which == 0 { &mut a[idx] } else { &mut b[idx] };
                if coord == 0 {
                    target.0 = rep;
                } else {
                    target.1 = rep;
                }
            }
            k = j + 1;
        }
    }
}

/// Scaling check for `(R, H)`: `(c^α R_{t c^{−β}}, c H_{t c^{−β}})` from `x`
/// against `(R_t, H_t)` from `c x`, as bivariate samples per evaluation
/// time.
pub fn check_scaling_rh(
    spec: &LevySpec,
    alpha: f64,
    beta: f64,
    x: f64,
    c: f64,
    t_list: &[f64],
    n: u64,
    dt: f64,
    seed: Seed,
) -> Result<Vec<crate::stats::TestReport>> {
    use crate::stats::{bivariate_test, EmpiricalLaw2};
    let seed_a = seed.subspace(21);
    let seed_b = seed.subspace(22);
    let mut reports = Vec::new();
    for &t in t_list {
        let ta = t * c.powf(-beta);
        let mut scaled: Vec<(f64, f64)> = par_map(n, |i| {
            let tr = sample_triple(spec, alpha, beta, x, ta, dt, seed_a.for_path(i), TRIPLE_STEP_BUDGET)?;
            let (r, hv) = rh_or_sentinel(&tr, ta);
            Ok::<(f64, f64), Error>(if r >= CENSORED_RH.0 {
                CENSORED_RH
            } else {
                (c.powf(alpha) * r, c * hv)
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut direct: Vec<(f64, f64)> = par_map(n, |i| {
            let tr = sample_triple(spec, alpha, beta, c * x, t, dt, seed_b.for_path(i), TRIPLE_STEP_BUDGET)?;
            Ok::<(f64, f64), Error>(rh_or_sentinel(&tr, t))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        snap_common_atoms(&mut scaled, &mut direct);
        let la = EmpiricalLaw2::new(scaled, seed_a, "scaled");
        let lb = EmpiricalLaw2::new(direct, seed_b, "direct");
        reports.push(bivariate_test(&la, &lb, 0.01)?);
    }
    Ok(reports)
}

/// Bounded test functionals of `(M_G, M_{D_G}, excursion)` for the exit
/// formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ExitFunctional {
    /// F ≡ 1.
    One,
    /// M_G / M_{D_G} = e^{−overshoot} ∈ (0, 1].
    EndStartRatio,
    /// 1 { sup M/X during the excursion > r }.
    Deep { r: f64 },
    /// 1 { M_{D_G} > y0 } (level-dependent, exercises the kernel's scaling).
    EndAbove { y0: f64 },
}

impl FromStr for ExitFunctional {
    type Err = Error;

    fn from_str(s: &str) -> Result<ExitFunctional> {
        match s {
            "one" => Ok(ExitFunctional::One),
            "end-start-ratio" => Ok(ExitFunctional::EndStartRatio),
            "deep" => Ok(ExitFunctional::Deep { r: 1.5 }),
            "end-above" => Ok(ExitFunctional::EndAbove { y0: 1.5 }),
            other => Err(Error::UnknownFunctional(other.into())),
        }
    }
}

impl ExitFunctional {
    /// Evaluate on one excursion at supremum level `z` (so `M_G = z`,
    /// `M_{D_G} = z e^{overshoot}`).
    fn eval(&self, z: f64, overshoot: f64, sup_depth: f64) -> f64 {
        match *self {
            ExitFunctional::One => 1.0,
            ExitFunctional::EndStartRatio => (-overshoot).exp(),
            ExitFunctional::Deep { r } => {
                if sup_depth > r.ln() {
                    1.0
                } else {
                    0.0
                }
            }
            ExitFunctional::EndAbove { y0 } => {
                if z * overshoot.exp() > y0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Harvested excursion marks for the Itô point-process estimator, with
/// overshoots sorted for level queries.
pub struct ExitPool {
    /// (overshoot, sup_depth) sorted by overshoot.
    marks: Vec<(f64, f64)>,
    /// Total e^{−overshoot} over all marks.
    ratio_total: f64,
    pub local_time: f64,
    pub n_excursions: usize,
}

impl ExitPool {
    pub fn harvest(
        spec: &LevySpec,
        alpha: f64,
        a_hat: f64,
        runs: u64,
        horizon: f64,
        dt: f64,
        seed: Seed,
    ) -> Result<ExitPool> {
        let decomps: Vec<LadderDecomposition> = par_map(runs, |i| {
            let p = crate::levy_model::sample_skeleton(spec, horizon, dt, seed.for_path(i))?;
            decompose(&p, alpha, a_hat)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut marks = Vec::new();
        let mut ell = 0.0;
        for d in &decomps {
            ell += d.l_end;
            for e in &d.excursions {
                if !e.censored {
                    marks.push((-e.terminal, e.sup_depth));
                }
            }
        }
        marks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ratio_total = marks.iter().map(|m| (-m.0).exp()).sum();
        let n_excursions = marks.len();
        Ok(ExitPool { marks, ratio_total, local_time: ell, n_excursions })
    }

    /// n̄-average of the functional at supremum level `z`, per unit local
    /// time.
    pub fn nbar(&self, f: ExitFunctional, z: f64) -> f64 {
        if self.local_time <= 0.0 {
            return 0.0;
        }
        let total = match f {
            ExitFunctional::One => self.marks.len() as f64,
            ExitFunctional::EndStartRatio => self.ratio_total,
            ExitFunctional::Deep { r } => {
                let c = r.ln();
                self.marks.iter().filter(|m| m.1 > c).count() as f64
            }
            ExitFunctional::EndAbove { y0 } => {
                let cut = (y0 / z).ln();
                let i = self.marks.partition_point(|m| m.0 <= cut);
                (self.marks.len() - i) as f64
            }
        };
        total / self.local_time
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitCheckReport {
    pub functional: ExitFunctional,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// |lhs − rhs| in units of the pooled standard error.
    pub gap_sigmas: f64,
    pub n_paths: u64,
    pub pool_excursions: usize,
    pub seed: Seed,
}

/// Exit-formula check with `V_s = 1{s ≤ t}`: direct excursion enumeration
/// against the `dL^Θ`-integral of the kernel, the kernel estimated from an
/// independent excursion pool. The pool is split into subpools rotated over
/// paths so the path-level spread sees the pool noise.
pub fn exit_formula_check(
    spec: &LevySpec,
    alpha: f64,
    x: f64,
    functional: ExitFunctional,
    t: f64,
    n: u64,
    dt: f64,
    seed: Seed,
) -> Result<ExitCheckReport> {
    let a_hat = ladder_unit(spec, dt);
    let n_subpools = 8u64;
    let pools: Vec<ExitPool> = (0..n_subpools)
        .map(|k| ExitPool::harvest(spec, alpha, a_hat, 6, 40.0, dt, seed.subspace(0x900 + k)))
        .collect::<Result<Vec<_>>>()?;
    let a_cover = t / x.powf(alpha) * 2.0 + 1.0;
    let per_path: Vec<Result<(f64, f64)>> = par_map(n, |i| {
        let xi = sample_until_clock(
            spec,
            dt,
            seed.subspace(7).for_path(i),
            alpha,
            a_cover,
            true,
            40_000_000,
        )?;
        let d = decompose(&xi, alpha, a_hat)?;
        let xa = x.powf(alpha);
        let pool = &pools[(i % n_subpools) as usize];
        let mut lhs = 0.0f64;
        let mut rhs = Kahan::new();
        let mut t_x = 0.0f64;
        for piece in &d.pieces {
            match piece {
                Piece::Sup { dl, v } => {
                    let seg = xa * (alpha * v).exp() * a_hat * dl;
                    if t_x < t {
                        let covered = if seg > 0.0 { ((t - t_x) / seg).min(1.0) } else { 1.0 };
                        let z = x * v.exp();
                        rhs.add(dl * covered * pool.nbar(functional, z));
                    }
                    t_x += seg;
                }
                Piece::Exc { idx } => {
                    let e = &d.excursions[*idx as usize];
                    if e.censored {
                        break;
                    }
                    if t_x <= t {
                        let z = x * e.sup_level.exp();
                        lhs += functional.eval(z, -e.terminal, e.sup_depth);
                    }
                    t_x += xa * (alpha * e.sup_level).exp() * e.j_exp;
                }
            }
        }
        Ok((lhs, rhs.value()))
    });
    let mut lhs_vals = Vec::with_capacity(n as usize);
    let mut rhs_vals = Vec::with_capacity(n as usize);
    for r in per_path {
        let (l, rr) = r?;
        lhs_vals.push(l);
        rhs_vals.push(rr);
    }
    let (lhs, lhs_se) = mc_mean(&lhs_vals, None);
    let (rhs, rhs_se) = mc_mean(&rhs_vals, None);
    let pooled = crate::stats::pooled_se(lhs_se, rhs_se);
    Ok(ExitCheckReport {
        functional,
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        gap_sigmas: (lhs - rhs).abs() / pooled.max(1e-300),
        n_paths: n,
        pool_excursions: pools.iter().map(|p| p.n_excursions).sum(),
        seed,
    })
}
