//! Fluctuation theory of the Lévy path: supremum set, local time,
//! excursions, the triple `(L⁻¹, h, Y)`, renewal measures and Wiener–Hopf
//! diagnostics.
//!
//! Under the step-function convention a discrete path is at its supremum on
//! the segments whose left value equals the running maximum. Local time is
//! defined as time-at-supremum divided by a fixed per-model unit `a_hat`
//! (the sup-time constant in those units), so the occupation identity
//! `time at sup = a_hat · L` holds exactly by construction, and the clock
//! identity `A∘L⁻¹ = ∫ e^{α h_{s-}} dY_s` becomes an exact rearrangement of
//! the left-endpoint quadrature. Every estimator in this crate is covariant
//! under the unit choice; comparisons just have to share it. The
//! `normalization` field carries the estimated rescale to the φ(1)=1
//! convention when a caller asks for it.

use crate::error::{Error, Result};
use crate::levy_model::{classify, sample_skeleton, JumpLaw, JumpSpec, LevySpec};
use crate::parallel::{par_map, Kahan};
use crate::pathkit::PathSkeleton;
use crate::seed::Seed;
use serde::Serialize;

/// Callbacks for one pass over a path's ladder structure, in time order.
/// Segment lengths are real-time lengths; depths are measured downward from
/// the running maximum and are strictly positive inside excursions.
pub(crate) trait LadderSink {
    fn sup_segment(&mut self, du: f64, v: f64);
    fn excursion_start(&mut self, _t: f64, _m: f64) {}
    fn excursion_segment(&mut self, du: f64, depth: f64);
    /// The excursion closed with a new maximum `m + overshoot`.
    fn excursion_end(&mut self, overshoot: f64);
    /// Path ended inside an excursion (censored; no new maximum).
    fn excursion_censored(&mut self) {}
    /// Return false to stop the walk early.
    fn want_more(&self) -> bool {
        true
    }
}

/// Drive a sink over the path's breakpoints.
pub(crate) fn walk_ladder(path: &PathSkeleton, sink: &mut impl LadderSink) -> Result<()> {
    let mut bps = path.breakpoints();
    let (_, v0) = bps.next().ok_or(Error::EmptyPath)?;
    let mut m = v0;
    let mut in_exc = false;
    let mut t_prev = 0.0f64;
    let mut v_prev = v0;
    for (t, v) in bps {
        let du = t - t_prev;
        if du > 0.0 {
            if in_exc {
                sink.excursion_segment(du, m - v_prev);
            } else {
                sink.sup_segment(du, v_prev);
            }
            if !sink.want_more() {
                return Ok(());
            }
        }
        if v > m {
            if in_exc {
                sink.excursion_end(v - m);
                in_exc = false;
            }
            m = v;
        } else if v < m && !in_exc {
            sink.excursion_start(t, m);
            in_exc = true;
        }
        t_prev = t;
        v_prev = v;
    }
    if in_exc {
        sink.excursion_censored();
    }
    Ok(())
}

/// One building block of the decomposition, in local-time order: either an
/// at-supremum stretch (positive local time, height `v`) or an excursion
/// (zero local time, indexing into the excursion list).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Sup { dl: f64, v: f64 },
    Exc { idx: u32 },
}

/// One excursion of the path below its running supremum.
#[derive(Debug, Clone)]
pub struct ExcursionRecord {
    pub start_local_time: f64,
    pub start_time: f64,
    /// Running supremum at the excursion start (the level depths are
    /// measured from; includes intra-cell peaks).
    pub sup_level: f64,
    /// Real-time length ζ of the excursion interval.
    pub duration: f64,
    /// Depth profile ε(s) ≥ 0 as a step function; the final breakpoint
    /// carries ε(ζ) = −overshoot.
    pub path: PathSkeleton,
    /// ε(ζ) ≤ 0; zero when the excursion creeps back to the old maximum.
    pub terminal: f64,
    /// ∫₀^ζ e^{−α ε(u)} du, left endpoint.
    pub j_exp: f64,
    pub sup_depth: f64,
    pub censored: bool,
}

/// Cumulative values of the ladder triple after each piece.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochRow {
    /// Local time.
    pub ell: f64,
    /// Inverse local time (real time consumed).
    pub linv: f64,
    /// Ladder height (running maximum).
    pub h: f64,
    /// The clock subordinator Y.
    pub y: f64,
}

/// The extracted `(L⁻¹, h, Y)` structure of one path.
#[derive(Debug, Clone)]
pub struct LadderDecomposition {
    pub alpha: f64,
    /// Sup-time unit: real seconds at the supremum per unit of local time.
    pub a_hat: f64,
    /// Estimated rescale factor to the φ(1)=1 convention; 1 until calibrated.
    pub normalization: f64,
    pub pieces: Vec<Piece>,
    pub excursions: Vec<ExcursionRecord>,
    /// Row after each piece; starts with the implicit origin row (0,0,ξ₀,0).
    pub epochs: Vec<EpochRow>,
    /// Total local time accumulated on the grid.
    pub l_end: f64,
    pub at_sup_time: f64,
    /// Real time spent in a final unfinished excursion, if any.
    pub censored_tail: f64,
}

impl LadderDecomposition {
    /// ∫₀^{L_end} e^{−α h_s} ds (the exponential functional of the ladder
    /// height over the simulated window).
    pub fn i_h(&self) -> f64 {
        let mut acc = Kahan::new();
        for p in &self.pieces {
            if let Piece::Sup { dl, v } = p {
                acc.add((-self.alpha * v).exp() * dl);
            }
        }
        acc.value()
    }

    /// Terminal value of `W`: ∫ e^{−α h} dY with the post-jump height at
    /// simultaneous jumps. Converges when α·h drifts up.
    pub fn w_terminal(&self) -> f64 {
        let mut acc = Kahan::new();
        for p in &self.pieces {
            match p {
                Piece::Sup { dl, v } => {
                    acc.add((-self.alpha * v).exp() * self.a_hat * dl);
                }
                Piece::Exc { idx } => {
                    let e = &self.excursions[*idx as usize];
                    if !e.censored {
                        let h_post = e.sup_level - e.terminal; // terminal = −overshoot
                        acc.add((-self.alpha * h_post).exp() * e.j_exp);
                    }
                }
            }
        }
        acc.value()
    }

    /// Final height and local time, for ratio estimates of E(h₁).
    pub fn h_end(&self) -> f64 {
        self.epochs.last().map_or(0.0, |r| r.h)
    }

    pub fn y_end(&self) -> f64 {
        self.epochs.last().map_or(0.0, |r| r.y)
    }
}

struct DecompSink {
    alpha: f64,
    s0: f64,
    pieces: Vec<Piece>,
    excursions: Vec<ExcursionRecord>,
    epochs: Vec<EpochRow>,
    ell: Kahan,
    linv: Kahan,
    y: Kahan,
    h: f64,
    at_sup: Kahan,
    // in-flight excursion state
    exc_depths: Vec<f64>,
    exc_lens: Vec<f64>,
    exc_start_t: f64,
    exc_start_m: f64,
    censored_tail: f64,
    seed: Seed,
}

impl DecompSink {
    fn close_excursion(&mut self, overshoot: f64, censored: bool) {
        let alpha = self.alpha;
        let mut j = Kahan::new();
        let mut dur = Kahan::new();
        let mut sup_depth = 0.0f64;
        let mut times = Vec::with_capacity(self.exc_depths.len() + 1);
        let mut values = Vec::with_capacity(self.exc_depths.len() + 1);
        let mut t = 0.0;
        for (&d, &len) in self.exc_depths.iter().zip(self.exc_lens.iter()) {
            times.push(t);
            values.push(d);
            j.add((-alpha * d).exp() * len);
            dur.add(len);
            sup_depth = sup_depth.max(d);
            t += len;
        }
        times.push(t);
        values.push(-overshoot);
        let rec = ExcursionRecord {
            start_local_time: self.ell.value(),
            start_time: self.exc_start_t,
            sup_level: self.exc_start_m,
            duration: dur.value(),
            path: PathSkeleton::new(times, values, self.seed),
            terminal: -overshoot,
            j_exp: j.value(),
            sup_depth,
            censored,
        };
        self.linv.add(rec.duration);
        if !censored {
            self.y.add(rec.j_exp);
            self.h = self.exc_start_m + overshoot;
        } else {
            self.censored_tail = rec.duration;
        }
        let idx = self.excursions.len() as u32;
        self.excursions.push(rec);
        self.pieces.push(Piece::Exc { idx });
        self.epochs.push(EpochRow {
            ell: self.ell.value(),
            linv: self.linv.value(),
            h: self.h,
            y: self.y.value(),
        });
        self.exc_depths.clear();
        self.exc_lens.clear();
    }
}

impl LadderSink for DecompSink {
    fn sup_segment(&mut self, du: f64, v: f64) {
        let dl = du / self.s0;
        self.pieces.push(Piece::Sup { dl, v });
        self.ell.add(dl);
        self.linv.add(du);
        self.at_sup.add(du);
        self.y.add(du);
        self.h = v;
        self.epochs.push(EpochRow {
            ell: self.ell.value(),
            linv: self.linv.value(),
            h: self.h,
            y: self.y.value(),
        });
    }

    fn excursion_start(&mut self, t: f64, m: f64) {
        self.exc_start_t = t;
        self.exc_start_m = m;
    }

    fn excursion_segment(&mut self, du: f64, depth: f64) {
        self.exc_depths.push(depth);
        self.exc_lens.push(du);
    }

    fn excursion_end(&mut self, overshoot: f64) {
        self.close_excursion(overshoot, false);
    }

    fn excursion_censored(&mut self) {
        self.close_excursion(0.0, true);
    }
}

/// The per-model local-time unit used by the verification suite: for models
/// with a Gaussian part the discrete time-at-supremum scales like √dt; for
/// drift-up finite-activity models the exact sup-time constant in the
/// φ(1)=1 convention is available in closed form; a drift-down model only
/// holds its supremum for a grid cell after each record.
pub fn ladder_unit(spec: &LevySpec, dt: f64) -> f64 {
    if spec.sigma > 0.0 {
        dt.sqrt()
    } else if spec.drift < 0.0 {
        dt
    } else {
        cp_oracle::sup_time_constant(spec).unwrap_or(1.0)
    }
}

/// Extract the ladder decomposition of a path. `a_hat` is the sup-time unit
/// (use [`ladder_unit`] for the catalogue convention, or 1 to measure local
/// time in at-supremum seconds).
pub fn decompose(xi: &PathSkeleton, alpha: f64, a_hat: f64) -> Result<LadderDecomposition> {
    if xi.len() < 2 {
        return Err(Error::EmptyPath);
    }
    if !(a_hat > 0.0) {
        return Err(Error::InconsistentInputs("sup-time unit must be positive".into()));
    }
    let v0 = xi.values[0];
    let mut sink = DecompSink {
        alpha,
        s0: a_hat,
        pieces: Vec::new(),
        excursions: Vec::new(),
        epochs: vec![EpochRow { ell: 0.0, linv: 0.0, h: v0, y: 0.0 }],
        ell: Kahan::new(),
        linv: Kahan::new(),
        y: Kahan::new(),
        h: v0,
        at_sup: Kahan::new(),
        exc_depths: Vec::new(),
        exc_lens: Vec::new(),
        exc_start_t: 0.0,
        exc_start_m: v0,
        censored_tail: 0.0,
        seed: xi.origin_seed,
    };
    walk_ladder(xi, &mut sink)?;
    Ok(LadderDecomposition {
        alpha,
        a_hat,
        normalization: 1.0,
        pieces: sink.pieces,
        excursions: sink.excursions,
        epochs: sink.epochs,
        l_end: sink.ell.value(),
        at_sup_time: sink.at_sup.value(),
        censored_tail: sink.censored_tail,
    })
}

/// A renewal-measure estimate on a grid of level cells.
#[derive(Debug, Clone, Serialize)]
pub struct RenewalMeasureEstimate {
    /// Cell edges; mass[i] covers [grid[i], grid[i+1]).
    pub grid: Vec<f64>,
    pub mass: Vec<f64>,
    pub stderr: Vec<f64>,
    pub atom_at_0: f64,
    pub source: RenewalSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenewalSource {
    ExcursionOccupation,
    DualLadderRenewal,
}

impl RenewalMeasureEstimate {
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "level,mass,stderr")?;
        for i in 0..self.mass.len() {
            writeln!(w, "{},{},{}", self.grid[i], self.mass[i], self.stderr[i])?;
        }
        Ok(())
    }
}

fn cell_index(grid: &[f64], x: f64) -> Option<usize> {
    if grid.len() < 2 || x < grid[0] || x >= *grid.last().unwrap() {
        return None;
    }
    let mut lo = 0usize;
    let mut hi = grid.len() - 1;
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if grid[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Estimate the renewal measure of the *downward* ladder height from
/// excursion occupation: mass over `dy` is the time excursions spend at
/// depth y per unit local time, plus the atom `a_hat` at zero.
pub fn renewal_vhat(decomps: &[LadderDecomposition], grid: &[f64]) -> RenewalMeasureEstimate {
    let ncell = grid.len().saturating_sub(1);
    let mut per_path: Vec<Vec<f64>> = Vec::with_capacity(decomps.len());
    let mut ells: Vec<f64> = Vec::with_capacity(decomps.len());
    for d in decomps {
        let mut occ = vec![0.0f64; ncell];
        for e in &d.excursions {
            if e.censored {
                continue;
            }
            for (i, &depth) in e.path.values.iter().enumerate() {
                if i + 1 >= e.path.times.len() {
                    break;
                }
                let len = e.path.times[i + 1] - e.path.times[i];
                if let Some(c) = cell_index(grid, depth) {
                    occ[c] += len;
                }
            }
        }
        per_path.push(occ);
        ells.push(d.l_end);
    }
    let ell_tot: f64 = ells.iter().sum();
    let mut mass = vec![0.0f64; ncell];
    let mut stderr = vec![0.0f64; ncell];
    for c in 0..ncell {
        let tot: f64 = per_path.iter().map(|o| o[c]).sum();
        let r = if ell_tot > 0.0 { tot / ell_tot } else { 0.0 };
        // ratio-estimator standard error over paths
        let mut v = Kahan::new();
        for (o, &l) in per_path.iter().zip(ells.iter()) {
            let d = o[c] - r * l;
            v.add(d * d);
        }
        mass[c] = r;
        stderr[c] = if ell_tot > 0.0 { v.value().sqrt() / ell_tot } else { f64::NAN };
    }
    let atom = decomps.first().map_or(0.0, |d| d.a_hat);
    RenewalMeasureEstimate {
        grid: grid.to_vec(),
        mass,
        stderr,
        atom_at_0: atom,
        source: RenewalSource::ExcursionOccupation,
    }
}

/// V̂ evaluated on an interval `[0, x)`, including the atom.
pub fn vhat_interval(decomps: &[LadderDecomposition], x: f64) -> f64 {
    let mut occ = Kahan::new();
    let mut ell = 0.0;
    for d in decomps {
        ell += d.l_end;
        for e in &d.excursions {
            if e.censored {
                continue;
            }
            for (i, &depth) in e.path.values.iter().enumerate() {
                if i + 1 >= e.path.times.len() {
                    break;
                }
                if depth < x && depth >= 0.0 {
                    occ.add(e.path.times[i + 1] - e.path.times[i]);
                }
            }
        }
    }
    let a = decomps.first().map_or(0.0, |d| d.a_hat);
    a + if ell > 0.0 { occ.value() / ell } else { 0.0 }
}

/// Renewal measure of the *upward* ladder height: occupation of levels by
/// `h` over local time, averaged over paths. For upward-drifting models the
/// measure of a bounded window is complete once every path's height has
/// cleared it; the caller chooses the window accordingly.
pub fn renewal_v(decomps: &[LadderDecomposition], grid: &[f64]) -> RenewalMeasureEstimate {
    let ncell = grid.len().saturating_sub(1);
    let n = decomps.len().max(1);
    let mut per_path: Vec<Vec<f64>> = Vec::with_capacity(decomps.len());
    for d in decomps {
        let mut occ = vec![0.0f64; ncell];
        for p in &d.pieces {
            if let Piece::Sup { dl, v } = p {
                if let Some(c) = cell_index(grid, *v) {
                    occ[c] += dl;
                }
            }
        }
        per_path.push(occ);
    }
    let mut mass = vec![0.0f64; ncell];
    let mut stderr = vec![0.0f64; ncell];
    for c in 0..ncell {
        let xs: Vec<f64> = per_path.iter().map(|o| o[c]).collect();
        let (m, se) = crate::stats::mc_mean(&xs, None);
        mass[c] = m;
        stderr[c] = se;
    }
    let _ = n;
    RenewalMeasureEstimate {
        grid: grid.to_vec(),
        mass,
        stderr,
        atom_at_0: 0.0,
        source: RenewalSource::DualLadderRenewal,
    }
}

/// Occupation approximants of the local time: for each ε the raw occupation
/// `O_ε(t) = ∫₀ᵗ 1{sup−ξ < ε} ds` at the checkpoint times, next to the
/// constructed local time.
#[derive(Debug, Clone)]
pub struct OccupationCurves {
    pub checkpoints: Vec<f64>,
    pub eps: Vec<f64>,
    /// `raw[i][k]` = O_{eps[i]} at checkpoint k.
    pub raw: Vec<Vec<f64>>,
    /// Constructed local time at the checkpoints (time at sup / a_hat).
    pub local_time: Vec<f64>,
}

/// Raw occupation curves of the reflected path; pair with pooled V̂ values
/// to normalize. Requires a model for which 0 is regular upward.
pub fn occupation_localtime(
    spec: &LevySpec,
    xi: &PathSkeleton,
    a_hat: f64,
    eps_list: &[f64],
    checkpoints: &[f64],
) -> Result<OccupationCurves> {
    let reg = classify(spec)?;
    if !reg.reg_up {
        return Err(Error::RegularityViolation(
            "occupation local time needs 0 regular for (0,∞)".into(),
        ));
    }
    struct OccSink<'a> {
        eps: &'a [f64],
        checkpoints: &'a [f64],
        t: f64,
        next_cp: usize,
        occ: Vec<f64>,
        at_sup: f64,
        raw: Vec<Vec<f64>>,
        lt: Vec<f64>,
        a_hat: f64,
    }
    impl<'a> OccSink<'a> {
        fn advance(&mut self, du: f64, depth: f64) {
            let mut remaining = du;
            while self.next_cp < self.checkpoints.len()
                && self.t + remaining >= self.checkpoints[self.next_cp]
            {
                let step = self.checkpoints[self.next_cp] - self.t;
                self.consume(step, depth);
                remaining -= step;
                for (i, &e) in self.eps.iter().enumerate() {
                    let _ = e;
                    self.raw[i].push(self.occ[i]);
                }
                self.lt.push(self.at_sup / self.a_hat);
                self.next_cp += 1;
            }
            self.consume(remaining, depth);
        }
        fn consume(&mut self, du: f64, depth: f64) {
            if du <= 0.0 {
                return;
            }
            self.t += du;
            for (i, &e) in self.eps.iter().enumerate() {
                if depth < e {
                    self.occ[i] += du;
                }
            }
            if depth == 0.0 {
                self.at_sup += du;
            }
        }
    }
    impl<'a> LadderSink for OccSink<'a> {
        fn sup_segment(&mut self, du: f64, _v: f64) {
            self.advance(du, 0.0);
        }
        fn excursion_segment(&mut self, du: f64, depth: f64) {
            self.advance(du, depth);
        }
        fn excursion_end(&mut self, _overshoot: f64) {}
    }
    let mut sink = OccSink {
        eps: eps_list,
        checkpoints,
        t: 0.0,
        next_cp: 0,
        occ: vec![0.0; eps_list.len()],
        at_sup: 0.0,
        raw: vec![Vec::with_capacity(checkpoints.len()); eps_list.len()],
        lt: Vec::with_capacity(checkpoints.len()),
        a_hat,
    };
    walk_ladder(xi, &mut sink)?;
    while sink.lt.len() < checkpoints.len() {
        // horizon shorter than a checkpoint: carry the final values forward
        for i in 0..eps_list.len() {
            let last = *sink.occ.get(i).unwrap();
            sink.raw[i].push(last);
        }
        sink.lt.push(sink.at_sup / a_hat);
    }
    Ok(OccupationCurves {
        checkpoints: checkpoints.to_vec(),
        eps: eps_list.to_vec(),
        raw: sink.raw,
        local_time: sink.lt,
    })
}

/// First real time at which the local time (unit `a_hat`) exceeds `t_loc`,
/// or None when the horizon is hit first.
pub fn inverse_local_time(xi: &PathSkeleton, a_hat: f64, t_loc: f64) -> Result<Option<f64>> {
    struct InvSink {
        need: f64,
        have: f64,
        t: f64,
        hit: Option<f64>,
    }
    impl LadderSink for InvSink {
        fn sup_segment(&mut self, du: f64, _v: f64) {
            if self.hit.is_none() {
                if self.have + du >= self.need {
                    self.hit = Some(self.t + (self.need - self.have));
                }
                self.have += du;
            }
            self.t += du;
        }
        fn excursion_segment(&mut self, du: f64, _depth: f64) {
            self.t += du;
        }
        fn excursion_end(&mut self, _o: f64) {}
        fn want_more(&self) -> bool {
            self.hit.is_none()
        }
    }
    let mut sink = InvSink { need: t_loc * a_hat, have: 0.0, t: 0.0, hit: None };
    walk_ladder(xi, &mut sink)?;
    Ok(sink.hit)
}

/// Result of the Wiener–Hopf product diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct WienerHopfReport {
    pub lambdas: Vec<f64>,
    /// φ(λ) after the φ(1)=1 rescale.
    pub phi: Vec<f64>,
    pub phi_hat: Vec<f64>,
    /// φ(λ)·φ̂(λ)/λ; 1 at λ=1 by calibration.
    pub product_over_lambda: Vec<f64>,
    pub normalization: (f64, f64),
    pub n_paths: u64,
    pub dt: f64,
    pub seed: Seed,
}

fn phi_raw(
    spec: &LevySpec,
    lambdas_with_one: &[f64],
    n: u64,
    dt: f64,
    horizon: f64,
    t_loc: f64,
    seed: Seed,
) -> Result<Vec<f64>> {
    // model units keep t_loc reachable within the horizon for every dt;
    // the φ(1)=1 rescale divides the unit out of the product
    let a_hat = ladder_unit(spec, dt);
    let linvs = par_map(n, |i| -> Result<Option<f64>> {
        let p = sample_skeleton(spec, horizon, dt, seed.for_path(i))?;
        inverse_local_time(&p, a_hat, t_loc)
    });
    let mut out = Vec::with_capacity(lambdas_with_one.len());
    for &lam in lambdas_with_one {
        let mut acc = Kahan::new();
        for r in &linvs {
            match r {
                Ok(Some(linv)) => acc.add((-lam * linv).exp()),
                // censored paths: L⁻¹ beyond the horizon, contribution ≈ 0
                Ok(None) => {}
                Err(e) => return Err(e.clone()),
            }
        }
        let mean = acc.value() / n as f64;
        if mean <= 0.0 {
            return Err(Error::NonConvergent("all paths censored in φ estimation".into()));
        }
        out.push(-mean.ln() / t_loc);
    }
    Ok(out)
}

/// Estimate φ and φ̂ from small-local-time Laplace transforms of the inverse
/// local times, rescale each so that φ(1)=1=φ̂(1), and report the product
/// against λ.
pub fn wiener_hopf_check(
    spec: &LevySpec,
    lambdas: &[f64],
    n: u64,
    dt: f64,
    horizon: f64,
    t_loc_at_sup: f64,
    seed: Seed,
) -> Result<WienerHopfReport> {
    let mut lam_all = vec![1.0];
    lam_all.extend_from_slice(lambdas);
    let up = phi_raw(spec, &lam_all, n, dt, horizon, t_loc_at_sup, seed.subspace(0x77))?;
    let dual = spec.dual();
    let down = phi_raw(&dual, &lam_all, n, dt, horizon, t_loc_at_sup, seed.subspace(0x78))?;
    let (c_up, c_down) = (up[0], down[0]);
    let mut phi = Vec::new();
    let mut phi_hat = Vec::new();
    let mut ratio = Vec::new();
    for (i, &lam) in lambdas.iter().enumerate() {
        let f = up[i + 1] / c_up;
        let g = down[i + 1] / c_down;
        phi.push(f);
        phi_hat.push(g);
        ratio.push(f * g / lam);
    }
    Ok(WienerHopfReport {
        lambdas: lambdas.to_vec(),
        phi,
        phi_hat,
        product_over_lambda: ratio,
        normalization: (c_up, c_down),
        n_paths: n,
        dt,
        seed,
    })
}

/// Closed-form ladder constants for the finite-activity catalogue, from the
/// rational factorization of drift-plus-two-sided-exponential models.
pub mod cp_oracle {
    use super::*;

    /// Laplace exponent ψ(z) with E e^{zξ₁} = e^{ψ(z)}.
    pub fn psi(spec: &LevySpec, z: f64) -> f64 {
        let mut v = spec.drift * z;
        if let JumpSpec::CompoundPoisson { rate, law } = &spec.jumps {
            match law {
                JumpLaw::TwoSidedExponential { p_up, rate_up, rate_down } => {
                    let (lp, lm) = (rate * p_up, rate * (1.0 - p_up));
                    v += lp * z / (rate_up - z) - lm * z / (rate_down + z);
                }
                JumpLaw::Deterministic { size } => {
                    v += rate * ((size * z).exp() - 1.0);
                }
                JumpLaw::Discrete { atoms } => {
                    let m: f64 = atoms.iter().map(|(x, p)| p * ((x * z).exp() - 1.0)).sum();
                    v += rate * m;
                }
            }
        }
        v
    }

    fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            return Some(lo);
        }
        if fhi == 0.0 {
            return Some(hi);
        }
        if flo * fhi > 0.0 {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                return Some(mid);
            }
            if flo * fm < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Ladder constants of a positive-drift two-sided-exponential model in
    /// the φ(1)=1 normalization.
    #[derive(Debug, Clone, Copy)]
    pub struct CpLadderConstants {
        /// Sup-time constant a.
        pub a: f64,
        /// Drift of the upward ladder height per unit local time.
        pub height_drift: f64,
        /// Negative root −r₀ of ψ: decay rate of the downward renewal
        /// density.
        pub r0: f64,
        /// Descending ladder height exponent at θ: (b/δ)(θ+r₀)/(η₋+θ).
        pub eta_down: f64,
    }

    impl CpLadderConstants {
        pub fn phi_hat_height(&self, theta: f64) -> f64 {
            let b_over_delta = 1.0 / self.a;
            b_over_delta * (theta + self.r0) / (self.eta_down + theta)
        }
    }

    /// Exact sup-time constant (φ(1)=1 units) for drift-up two-sided
    /// exponential compound Poisson; 1 for a pure-drift subordinator.
    pub fn sup_time_constant(spec: &LevySpec) -> Option<f64> {
        ladder_constants(spec).map(|c| c.a)
    }

    pub fn ladder_constants(spec: &LevySpec) -> Option<CpLadderConstants> {
        if spec.sigma != 0.0 || spec.drift <= 0.0 {
            return None;
        }
        let b = spec.drift;
        let (rate, law) = match &spec.jumps {
            JumpSpec::None => {
                return Some(CpLadderConstants {
                    a: 1.0,
                    height_drift: b,
                    r0: f64::INFINITY,
                    eta_down: f64::INFINITY,
                });
            }
            JumpSpec::CompoundPoisson { rate, law } => (*rate, law),
        };
        if rate == 0.0 {
            return Some(CpLadderConstants {
                a: 1.0,
                height_drift: b,
                r0: f64::INFINITY,
                eta_down: f64::INFINITY,
            });
        }
        let (eta_up, eta_down) = match law {
            JumpLaw::TwoSidedExponential { rate_up, rate_down, .. } => (*rate_up, *rate_down),
            _ => return None,
        };
        let f = |z: f64| psi(spec, z) - 1.0;
        let eps = 1e-9;
        // root in (0, η₊)
        let beta1 = bisect(eps, eta_up - eps, f)?;
        // root in (η₊, ∞): expand the bracket until the sign flips
        let mut hi = eta_up + 1.0;
        while psi(spec, hi) - 1.0 < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return None;
            }
        }
        let beta2 = bisect(eta_up + eps, hi, f)?;
        // negative root of ψ itself (q = 0)
        let g = |z: f64| psi(spec, z);
        let r0 = if spec.mean() > 0.0 {
            -bisect(-eta_down + eps, -eps, g)?
        } else {
            0.0
        };
        let delta = eta_up / (beta1 * beta2);
        Some(CpLadderConstants { a: delta / b, height_drift: delta, r0, eta_down })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::stats::mc_mean;

    fn drift_path(n: usize, dt: f64, b: f64) -> PathSkeleton {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let values: Vec<f64> = times.iter().map(|t| b * t).collect();
        PathSkeleton::new(times, values, Seed::new(0))
    }

    #[test]
    fn increasing_path_has_no_excursions_and_linear_y() {
        let p = drift_path(100, 0.1, 1.0);
        let d = decompose(&p, 1.0, 1.0).unwrap();
        assert!(d.excursions.is_empty());
        // Y_t = a·t with a_hat = 1: y_end equals total local time
        assert!((d.y_end() - d.l_end).abs() < 1e-12);
        assert!((d.at_sup_time - 10.0).abs() < 1e-12);
    }

    #[test]
    fn decreasing_path_is_one_censored_excursion() {
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| -t).collect();
        let p = PathSkeleton::new(times, values, Seed::new(0));
        let d = decompose(&p, 1.0, 1.0).unwrap();
        assert_eq!(d.excursions.len(), 1);
        assert!(d.excursions[0].censored);
        // only the first grid cell counts as at-sup time
        assert!((d.at_sup_time - 0.1).abs() < 1e-12);
    }

    #[test]
    fn empty_path_rejected() {
        let p = PathSkeleton::new(vec![0.0], vec![0.0], Seed::new(0));
        assert!(matches!(decompose(&p, 1.0, 1.0), Err(Error::EmptyPath)));
    }

    #[test]
    fn simultaneous_jumps_of_the_triple() {
        // jumps of L⁻¹, h and Y happen at the same pieces (the excursions)
        let p = sample_skeleton(&models::cp_two_sided(), 30.0, 1e-3, Seed::new(3)).unwrap();
        let d = decompose(&p, 1.0, 1.0).unwrap();
        assert!(!d.excursions.is_empty());
        let mut prev = d.epochs[0];
        let mut piece_iter = d.pieces.iter();
        for row in d.epochs.iter().skip(1) {
            let piece = piece_iter.next().unwrap();
            let d_linv = row.linv - prev.linv;
            let d_h = row.h - prev.h;
            let d_y = row.y - prev.y;
            match piece {
                Piece::Exc { idx } => {
                    let e = &d.excursions[*idx as usize];
                    if !e.censored {
                        assert!(d_linv > 0.0 && d_y > 0.0);
                        assert!(d_h >= 0.0);
                        assert!((d_linv - e.duration).abs() < 1e-9);
                        assert!((d_y - e.j_exp).abs() < 1e-9);
                    }
                }
                Piece::Sup { dl, .. } => {
                    assert!((d_linv - dl * d.a_hat).abs() < 1e-9);
                    assert!((d_y - dl * d.a_hat).abs() < 1e-9);
                }
            }
            prev = *row;
        }
    }

    #[test]
    fn occupation_identity_exact_at_sup_time() {
        // time at supremum equals a_hat × local time, by construction exact
        let spec = models::cp_two_sided();
        let a = ladder_unit(&spec, 1e-3);
        let p = sample_skeleton(&spec, 20.0, 1e-3, Seed::new(8)).unwrap();
        let d = decompose(&p, 1.0, a).unwrap();
        assert!((d.at_sup_time - d.a_hat * d.l_end).abs() <= 1e-12 * d.at_sup_time.max(1.0));
    }

    #[test]
    fn keylemma_exact_on_cp_and_bm_paths() {
        // A(L⁻¹_t) = ∫ e^{α h_{s-}} dY_s at every epoch: exact rearrangement
        for (spec, dt) in [(models::cp_two_sided(), 1e-3), (models::bm(), 1e-3)] {
            let a = ladder_unit(&spec, dt);
            let alpha = 1.0;
            let p = sample_skeleton(&spec, 10.0, dt, Seed::new(5)).unwrap();
            let d = decompose(&p, alpha, a).unwrap();
            let clock = p.exp_clock(alpha);
            // ladder side: Σ e^{α h_{s-}} dY over pieces
            let mut lhs = Kahan::new();
            let mut checked = 0;
            for (i, piece) in d.pieces.iter().enumerate() {
                match piece {
                    Piece::Sup { dl, v } => {
                        lhs.add((alpha * v).exp() * d.a_hat * dl);
                    }
                    Piece::Exc { idx } => {
                        let e = &d.excursions[*idx as usize];
                        if e.censored {
                            continue;
                        }
                        lhs.add((alpha * e.sup_level).exp() * e.j_exp);
                    }
                }
                let row = d.epochs[i + 1];
                let a_side = clock.eval(row.linv).unwrap();
                let gap = (a_side - lhs.value()).abs();
                assert!(
                    gap <= 1e-10 * a_side.abs().max(1.0),
                    "epoch {i}: A={} ladder={} rel gap {}",
                    a_side,
                    lhs.value(),
                    gap / a_side.abs().max(1.0)
                );
                checked += 1;
            }
            assert!(checked > 10);
        }
    }

    #[test]
    fn subordinator_has_vhat_atom_only() {
        let spec = models::drift_subordinator(1.0);
        let p = sample_skeleton(&spec, 5.0, 0.01, Seed::new(2)).unwrap();
        let d = decompose(&p, 1.0, ladder_unit(&spec, 0.01)).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let est = renewal_vhat(&[d], &grid);
        assert!(est.mass.iter().all(|&m| m == 0.0));
        assert!(est.atom_at_0 > 0.0);
    }

    #[test]
    fn vhat_matches_rational_density_oracle() {
        // the downward renewal density of the drift-up two-sided-exp model
        // is a(η₋−r₀)e^{−r₀ y} (atom a at 0) in φ(1)=1 units
        let spec = models::cp_two_sided();
        let dt = 1e-3;
        let a = ladder_unit(&spec, dt);
        let c = cp_oracle::ladder_constants(&spec).unwrap();
        let horizon = 60.0;
        let seed = Seed::new(404);
        let decomps: Vec<LadderDecomposition> = par_map(128, |i| {
            let p = sample_skeleton(&spec, horizon, dt, seed.for_path(i)).unwrap();
            decompose(&p, 1.0, a).unwrap()
        });
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
        let primary = renewal_vhat(&decomps, &grid);
        assert!((primary.atom_at_0 - c.a).abs() < 1e-12);
        for cell in 0..primary.mass.len() {
            let (lo, hi) = (grid[cell], grid[cell + 1]);
            let oracle = c.a * (c.eta_down - c.r0) / c.r0
                * ((-c.r0 * lo).exp() - (-c.r0 * hi).exp());
            let tol = (4.0 * primary.stderr[cell]).max(0.05 * oracle);
            assert!(
                (primary.mass[cell] - oracle).abs() < tol,
                "cell {cell}: estimate {} ± {} vs oracle {oracle}",
                primary.mass[cell],
                primary.stderr[cell]
            );
        }
    }

    #[test]
    fn vhat_two_estimators_agree_cp_model() {
        // excursion-occupation V̂ against the dual-path ladder-height
        // occupation (record levels, one exponential-mean unit of dual local
        // time each), bridged to the paired normalization through the
        // product rule at λ = 1.
        let spec = models::cp_two_sided();
        let dt = 1e-3;
        let a = ladder_unit(&spec, dt);
        let horizon = 50.0;
        let seed = Seed::new(405);
        let n_primary = 192u64;
        let paths: Vec<PathSkeleton> = par_map(n_primary, |i| {
            sample_skeleton(&spec, horizon, dt, seed.for_path(i)).unwrap()
        });
        let decomps: Vec<LadderDecomposition> =
            paths.iter().map(|p| decompose(p, 1.0, a).unwrap()).collect();
        let grid: Vec<f64> = (0..=6).map(|i| i as f64 * 0.3).collect();
        let primary = renewal_vhat(&decomps, &grid);

        // dual side: records of −ξ; each completed record level occupies one
        // unit of dual local time in expectation
        let dual = spec.dual();
        let n_dual = 4096u64;
        let recs: Vec<Vec<(f64, f64)>> = par_map(n_dual, |i| {
            let p = sample_skeleton(&dual, 30.0, dt, seed.subspace(9).for_path(i)).unwrap();
            let mut m = p.values[0];
            let mut records = Vec::new();
            for (t, v) in p.breakpoints().skip(1) {
                if v > m {
                    m = v;
                    records.push((t, v));
                }
            }
            records
        });
        let ncell = grid.len() - 1;
        let per_path_counts: Vec<Vec<f64>> = recs
            .iter()
            .map(|records| {
                let mut occ = vec![0.0f64; ncell];
                for &(_, lv) in records {
                    if let Some(cidx) = cell_index(&grid, lv) {
                        occ[cidx] += 1.0;
                    }
                }
                occ
            })
            .collect();

        // bridge factor: φ̂_exp(1)·φ_up(1) with φ̂_exp(1) = 1 − E[e^{−T̂}; T̂<∞];
        // inter-record gaps are iid copies of T̂ by the strong Markov
        // property at records, and each path ends with one T̂ = ∞ gap
        let mut g1 = Kahan::new();
        let mut n_gaps = 0u64;
        for records in &recs {
            let mut prev = 0.0;
            for &(t, _) in records {
                g1.add((-(t - prev)).exp());
                prev = t;
                n_gaps += 1;
            }
        }
        let n_total = n_gaps + n_dual;
        let phi_hat_exp1 = 1.0 - g1.value() / n_total as f64;
        let t_loc = 1.0;
        let mut acc_up = Kahan::new();
        for p in &paths {
            if let Some(linv) = inverse_local_time(p, a, t_loc).unwrap() {
                acc_up.add((-linv).exp());
            }
        }
        let phi_up1 = -(acc_up.value() / n_primary as f64).ln() / t_loc;
        let bridge = phi_hat_exp1 * phi_up1;
        for cidx in 0..ncell {
            let counts: Vec<f64> = per_path_counts.iter().map(|o| o[cidx]).collect();
            let (u_mean, u_se) = mc_mean(&counts, None);
            let dual_est = u_mean * bridge;
            let gap = (dual_est - primary.mass[cidx]).abs();
            // combined MC error plus a few percent for the bridge estimate
            // and the leading discretization bias
            let se = (bridge * u_se).hypot(primary.stderr[cidx]);
            let tol = 4.0 * se + 0.08 * primary.mass[cidx].max(0.02);
            assert!(
                gap <= tol,
                "cell {cidx}: dual {dual_est} vs primary {} ± {se}",
                primary.mass[cidx]
            );
        }
    }

    #[test]
    fn ey1_matches_rational_oracle_cp_model() {
        // E(Y₁) = ∫ e^{−α y} V̂(dy) = a/φ_ĥ(α) in canonical units
        let spec = models::cp_two_sided();
        let c = cp_oracle::ladder_constants(&spec).unwrap();
        let alpha = 1.0;
        let dt = 1e-3;
        let horizon = 60.0;
        let seed = Seed::new(2024);
        let ys = par_map(256, |i| {
            let p = sample_skeleton(&spec, horizon, dt, seed.for_path(i)).unwrap();
            let d = decompose(&p, alpha, c.a).unwrap();
            d.y_end() / d.l_end
        });
        let (m, se) = mc_mean(&ys, None);
        let oracle = 1.0 / c.phi_hat_height(alpha);
        assert!(
            (m - oracle).abs() < (4.0 * se).max(0.05 * oracle),
            "E(Y1) {m} ± {se} vs oracle {oracle}"
        );
    }

    #[test]
    fn cp_oracle_degenerates_to_pure_drift() {
        let spec = models::drift_subordinator(2.0);
        let c = cp_oracle::ladder_constants(&spec).unwrap();
        assert!((c.a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cp_sup_constant_matches_path_estimate() {
        // a in φ(1)=1 units equals 1/φ_raw(1) with raw unit local time
        let spec = models::cp_two_sided();
        let oracle = cp_oracle::sup_time_constant(&spec).unwrap();
        let dt = 1e-3;
        let horizon = 120.0;
        let n = 600u64;
        let seed = Seed::new(31337);
        let t_loc = 3.0;
        let vals = par_map(n, |i| {
            let p = sample_skeleton(&spec, horizon, dt, seed.for_path(i)).unwrap();
            inverse_local_time(&p, 1.0, t_loc).unwrap()
        });
        let mut acc = Kahan::new();
        for v in &vals {
            if let Some(linv) = v {
                acc.add((-linv).exp());
            }
        }
        let phi1 = -(acc.value() / n as f64).ln() / t_loc;
        let a_est = 1.0 / phi1;
        assert!(
            (a_est - oracle).abs() < 0.05 * oracle,
            "a estimate {a_est} vs rational oracle {oracle}"
        );
    }

    #[test]
    fn occupation_curves_monotone_and_bounded() {
        let spec = models::bm();
        let dt = 1e-3;
        let p = sample_skeleton(&spec, 4.0, dt, Seed::new(6)).unwrap();
        let a = ladder_unit(&spec, dt);
        let eps = [0.125, 0.0625, 0.03125];
        let cps = [1.0, 2.0, 3.0, 4.0];
        let oc = occupation_localtime(&spec, &p, a, &eps, &cps).unwrap();
        for i in 0..eps.len() {
            for k in 1..cps.len() {
                assert!(oc.raw[i][k] >= oc.raw[i][k - 1]);
            }
            // smaller ε occupies less
            if i > 0 {
                for k in 0..cps.len() {
                    assert!(oc.raw[i][k] <= oc.raw[i - 1][k] + 1e-15);
                }
            }
        }
    }

    #[test]
    fn occupation_requires_upward_regularity() {
        let spec = LevySpec {
            drift: -1.0,
            sigma: 0.0,
            jumps: JumpSpec::CompoundPoisson {
                rate: 0.5,
                law: JumpLaw::Deterministic { size: 1.0 },
            },
            kill_rate: 0.0,
            label: String::new(),
        };
        let p = sample_skeleton(&spec, 2.0, 0.01, Seed::new(1)).unwrap();
        let r = occupation_localtime(&spec, &p, 1.0, &[0.1], &[1.0]);
        assert!(matches!(r, Err(Error::RegularityViolation(_))));
    }

    #[test]
    fn eps_larger_than_range_gives_degenerate_bound() {
        // everything counts: O_ε(t) = t
        let spec = models::bm();
        let p = sample_skeleton(&spec, 2.0, 0.01, Seed::new(7)).unwrap();
        let range =
            p.values.iter().cloned().fold(f64::MIN, f64::max) - p.values.iter().cloned().fold(f64::MAX, f64::min);
        let oc = occupation_localtime(&spec, &p, 1.0, &[range + 1.0], &[2.0]).unwrap();
        assert!((oc.raw[0][0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn wiener_hopf_bm_product_near_lambda() {
        let rep = wiener_hopf_check(
            &models::bm(),
            &[0.5, 2.0],
            800,
            2e-3,
            25.0,
            0.5,
            Seed::new(99),
        )
        .unwrap();
        for (i, &r) in rep.product_over_lambda.iter().enumerate() {
            assert!(
                (r - 1.0).abs() < 0.15,
                "λ={} product ratio {r}",
                rep.lambdas[i]
            );
        }
        // and φ ≈ √λ for the symmetric model
        for (i, &lam) in rep.lambdas.iter().enumerate() {
            assert!((rep.phi[i] - lam.sqrt()).abs() < 0.12 * lam.sqrt().max(1.0));
        }
    }
}
