//! Parametric Lévy process specifications and exact-in-distribution grid
//! samplers.
//!
//! The catalogue is deliberately small — Brownian motion with drift and
//! compound Poisson with drift — so that every downstream quantity (ladder
//! exponents, the sup-time constant, renewal measures) has a closed-form or
//! brute-force oracle. Increments are exact per grid cell: the Gaussian part
//! is sampled exactly, jump counts are Poisson-exact, and jump times are
//! placed uniformly inside the cell and recorded as events so that supremum
//! extraction sees jump peaks.

use crate::error::{Error, Result};
use crate::pathkit::{JumpEvent, PathSkeleton};
use crate::seed::Seed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw {
    TwoSidedExponential { p_up: f64, rate_up: f64, rate_down: f64 },
    Deterministic { size: f64 },
    Discrete { atoms: Vec<(f64, f64)> },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::TwoSidedExponential { p_up, rate_up, rate_down } => {
                if !(0.0..=1.0).contains(p_up) {
                    return Err(Error::UnsupportedSpec(format!("p_up={p_up} outside [0,1]")));
                }
                if *rate_up <= 0.0 || *rate_down <= 0.0 {
                    return Err(Error::UnsupportedSpec("exponential rates must be positive".into()));
                }
            }
            JumpLaw::Deterministic { size } => {
                if !size.is_finite() {
                    return Err(Error::UnsupportedSpec("jump size must be finite".into()));
                }
            }
            JumpLaw::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::UnsupportedSpec("discrete law needs atoms".into()));
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if atoms.iter().any(|a| a.1 < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::UnsupportedSpec("atom probabilities must sum to 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::TwoSidedExponential { p_up, rate_up, rate_down } => {
                p_up / rate_up - (1.0 - p_up) / rate_down
            }
            JumpLaw::Deterministic { size } => *size,
            JumpLaw::Discrete { atoms } => atoms.iter().map(|(v, p)| v * p).sum(),
        }
    }

    /// Can a single jump be positive / negative?
    pub fn has_up(&self) -> bool {
        match self {
            JumpLaw::TwoSidedExponential { p_up, .. } => *p_up > 0.0,
            JumpLaw::Deterministic { size } => *size > 0.0,
            JumpLaw::Discrete { atoms } => atoms.iter().any(|(v, p)| *v > 0.0 && *p > 0.0),
        }
    }

    pub fn has_down(&self) -> bool {
        match self {
            JumpLaw::TwoSidedExponential { p_up, .. } => *p_up < 1.0,
            JumpLaw::Deterministic { size } => *size < 0.0,
            JumpLaw::Discrete { atoms } => atoms.iter().any(|(v, p)| *v < 0.0 && *p > 0.0),
        }
    }

    pub fn mirror(&self) -> JumpLaw {
        match self {
            JumpLaw::TwoSidedExponential { p_up, rate_up, rate_down } => {
                JumpLaw::TwoSidedExponential {
                    p_up: 1.0 - p_up,
                    rate_up: *rate_down,
                    rate_down: *rate_up,
                }
            }
            JumpLaw::Deterministic { size } => JumpLaw::Deterministic { size: -size },
            JumpLaw::Discrete { atoms } => {
                JumpLaw::Discrete { atoms: atoms.iter().map(|(v, p)| (-v, *p)).collect() }
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            JumpLaw::TwoSidedExponential { p_up, rate_up, rate_down } => {
                let u: f64 = rng.random();
                if u < *p_up {
                    Exp::new(*rate_up).unwrap().sample(rng)
                } else {
                    -Exp::new(*rate_down).unwrap().sample(rng)
                }
            }
            JumpLaw::Deterministic { size } => *size,
            JumpLaw::Discrete { atoms } => {
                let mut u: f64 = rng.random();
                for (v, p) in atoms {
                    if u < *p {
                        return *v;
                    }
                    u -= p;
                }
                atoms.last().unwrap().0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpSpec {
    None,
    CompoundPoisson { rate: f64, law: JumpLaw },
}

impl JumpSpec {
    pub fn rate(&self) -> f64 {
        match self {
            JumpSpec::None => 0.0,
            JumpSpec::CompoundPoisson { rate, .. } => *rate,
        }
    }
}

/// Declarative description of a Lévy process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevySpec {
    /// Drift per unit time.
    pub drift: f64,
    /// Volatility per √time; 0 disables the Gaussian part.
    pub sigma: f64,
    #[serde(default = "default_jumps")]
    pub jumps: JumpSpec,
    /// Killing rate; 0 means infinite lifetime.
    #[serde(default)]
    pub kill_rate: f64,
    #[serde(default)]
    pub label: String,
}

fn default_jumps() -> JumpSpec {
    JumpSpec::None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftDirection {
    PlusInfinity,
    MinusInfinity,
    Oscillates,
}

/// Closed-form regularity classification for the supported families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// 0 regular for (0, ∞).
    pub reg_up: bool,
    /// 0 regular for (−∞, 0).
    pub reg_down: bool,
    pub drifts_to: DriftDirection,
    /// Positive sup-time constant, equivalent to `!reg_down`.
    pub a_positive: bool,
    /// Finite mean of the upward ladder height (true for the whole
    /// finite-mean-jump catalogue).
    pub ladder_height_mean_finite: bool,
}

impl LevySpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(Error::UnsupportedSpec("sigma must be nonnegative".into()));
        }
        if self.kill_rate < 0.0 {
            return Err(Error::UnsupportedSpec("kill_rate must be nonnegative".into()));
        }
        match &self.jumps {
            JumpSpec::None => {}
            JumpSpec::CompoundPoisson { rate, law } => {
                if *rate < 0.0 {
                    return Err(Error::UnsupportedSpec("jump rate must be nonnegative".into()));
                }
                law.validate()?;
            }
        }
        let active = self.sigma > 0.0 || self.drift != 0.0 || self.jumps.rate() > 0.0;
        if !active {
            return Err(Error::UnsupportedSpec("degenerate specification (no motion)".into()));
        }
        Ok(())
    }

    /// Mean of ξ₁: drift plus jump-rate times mean jump.
    pub fn mean(&self) -> f64 {
        let jm = match &self.jumps {
            JumpSpec::None => 0.0,
            JumpSpec::CompoundPoisson { rate, law } => rate * law.mean(),
        };
        self.drift + jm
    }

    /// The dual process −ξ: negated drift, mirrored jumps.
    pub fn dual(&self) -> LevySpec {
        let jumps = match &self.jumps {
            JumpSpec::None => JumpSpec::None,
            JumpSpec::CompoundPoisson { rate, law } => {
                JumpSpec::CompoundPoisson { rate: *rate, law: law.mirror() }
            }
        };
        LevySpec {
            drift: -self.drift,
            sigma: self.sigma,
            jumps,
            kill_rate: self.kill_rate,
            label: format!("dual({})", self.label),
        }
    }

    /// True when the ladder height process lives on a lattice: no diffusion,
    /// no drift, and all jump atoms commensurate.
    pub fn is_arithmetic(&self) -> bool {
        if self.sigma > 0.0 || self.drift != 0.0 {
            return false;
        }
        match &self.jumps {
            JumpSpec::None => false,
            JumpSpec::CompoundPoisson { law, .. } => match law {
                JumpLaw::TwoSidedExponential { .. } => false,
                JumpLaw::Deterministic { .. } => true,
                JumpLaw::Discrete { atoms } => {
                    let nonzero: Vec<f64> =
                        atoms.iter().filter(|(v, p)| *p > 0.0 && *v != 0.0).map(|a| a.0).collect();
                    if nonzero.is_empty() {
                        return false;
                    }
                    let base = nonzero[0].abs();
                    nonzero.iter().all(|v| {
                        let r = v.abs() / base;
                        (r - r.round()).abs() < 1e-9 || {
                            let inv = base / v.abs();
                            (inv - inv.round()).abs() < 1e-9
                        }
                    })
                }
            },
        }
    }
}

/// Regularity of 0 for the two half-lines plus the long-run direction,
/// computed from closed-form criteria for the parametric families.
pub fn classify(spec: &LevySpec) -> Result<RegularityReport> {
    spec.validate()?;
    let (reg_up, reg_down) = if spec.sigma > 0.0 {
        (true, true)
    } else if spec.drift > 0.0 {
        (true, false)
    } else if spec.drift < 0.0 {
        (false, true)
    } else {
        // pure compound Poisson: irregular on both sides
        (false, false)
    };
    let m = spec.mean();
    let drifts_to = if m > 0.0 {
        DriftDirection::PlusInfinity
    } else if m < 0.0 {
        DriftDirection::MinusInfinity
    } else {
        DriftDirection::Oscillates
    };
    Ok(RegularityReport {
        reg_up,
        reg_down,
        drifts_to,
        a_positive: !reg_down,
        ladder_height_mean_finite: true,
    })
}

/// Hard per-path cap on raw simulation steps.
pub const DEFAULT_STEP_BUDGET: usize = 80_000_000;

/// Incremental cell-by-cell sampler. One instance owns one path's stream.
pub struct PathSampler {
    spec: LevySpec,
    dt: f64,
    rng: ChaCha8Rng,
    sqrt_dt: f64,
    poisson: Option<Poisson<f64>>,
    lifetime: f64,
    steps: usize,
    budget: usize,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub events: Vec<JumpEvent>,
    seed: Seed,
}

impl PathSampler {
    pub fn new(spec: &LevySpec, dt: f64, seed: Seed) -> Result<PathSampler> {
        spec.validate()?;
        if !(dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt={dt} must be positive")));
        }
        let lam = spec.jumps.rate();
        if lam * dt > 0.1 {
            return Err(Error::InvalidGrid(format!(
                "jump rate {lam} times dt {dt} exceeds 0.1; refine the grid"
            )));
        }
        let mut rng = seed.rng();
        let lifetime = if spec.kill_rate > 0.0 {
            Exp::new(spec.kill_rate).unwrap().sample(&mut rng)
        } else {
            f64::INFINITY
        };
        let poisson = if lam > 0.0 { Some(Poisson::new(lam * dt).unwrap()) } else { None };
        Ok(PathSampler {
            spec: spec.clone(),
            dt,
            sqrt_dt: dt.sqrt(),
            rng,
            poisson,
            lifetime,
            steps: 0,
            budget: DEFAULT_STEP_BUDGET,
            times: vec![0.0],
            values: vec![0.0],
            events: Vec::new(),
            seed,
        })
    }

    pub fn with_budget(mut self, budget: usize) -> PathSampler {
        self.budget = budget;
        self
    }

    pub fn current_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn alive(&self) -> bool {
        self.current_time() + self.dt <= self.lifetime
    }

    /// Advance one grid cell. Returns false when the path is dead (killed)
    /// or the budget is exhausted.
    pub fn step(&mut self) -> Result<bool> {
        if !self.alive() {
            return Ok(false);
        }
        if self.steps >= self.budget {
            return Err(Error::BudgetExceeded(format!("{} steps", self.steps)));
        }
        self.steps += 1;
        let t0 = self.current_time();
        let v0 = *self.values.last().unwrap();
        let gauss: f64 = if self.spec.sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.spec.sigma * self.sqrt_dt * z
        } else {
            0.0
        };
        let cont = self.spec.drift * self.dt + gauss;
        let mut cell_jumps: Vec<(f64, f64)> = Vec::new();
        if let Some(p) = &self.poisson {
            let k = p.sample(&mut self.rng) as usize;
            if k > 0 {
                let law = match &self.spec.jumps {
                    JumpSpec::CompoundPoisson { law, .. } => law.clone(),
                    JumpSpec::None => unreachable!(),
                };
                for _ in 0..k {
                    let u: f64 = self.rng.random();
                    let jt = t0 + u * self.dt;
                    let js = law.sample(&mut self.rng);
                    cell_jumps.push((jt, js));
                }
                cell_jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
        }
        // continuous part spread linearly across the cell; jumps inserted at
        // their times so suprema and quadrature see them
        let mut applied = 0.0;
        for (jt, js) in &cell_jumps {
            let frac = (jt - t0) / self.dt;
            let pre = v0 + frac * cont + applied;
            applied += js;
            let post = pre + js;
            self.events.push(JumpEvent { time: *jt, pre, post });
        }
        self.times.push(t0 + self.dt);
        self.values.push(v0 + cont + applied);
        Ok(true)
    }

    pub fn finish(self) -> PathSkeleton {
        PathSkeleton {
            times: self.times,
            values: self.values,
            events: self.events,
            lifetime: self.lifetime,
            origin_seed: self.seed,
        }
    }
}

/// Sample on the grid `{0, dt, …}` up to `horizon`.
pub fn sample_skeleton(spec: &LevySpec, horizon: f64, dt: f64, seed: Seed) -> Result<PathSkeleton> {
    if !(dt <= horizon) {
        return Err(Error::InvalidGrid(format!("dt={dt} exceeds horizon={horizon}")));
    }
    let n = (horizon / dt).round().max(1.0) as usize;
    let mut s = PathSampler::new(spec, dt, seed)?;
    for _ in 0..n {
        if !s.step()? {
            break;
        }
    }
    Ok(s.finish())
}

/// Sample in blocks until `stop` returns true or the budget runs out;
/// the returned flag reports whether the condition was met. A killed path
/// returns early with the flag set (there is nothing more to wait for).
pub fn sample_until_capped(
    spec: &LevySpec,
    dt: f64,
    seed: Seed,
    max_steps: usize,
    mut stop: impl FnMut(&PathSampler) -> bool,
) -> Result<(PathSkeleton, bool)> {
    let block = 2048usize;
    let mut s = PathSampler::new(spec, dt, seed)?.with_budget(max_steps + 2 * block);
    let mut done = 0usize;
    loop {
        for _ in 0..block {
            if !s.step()? {
                return Ok((s.finish(), true));
            }
        }
        done += block;
        if stop(&s) {
            return Ok((s.finish(), true));
        }
        if done >= max_steps {
            return Ok((s.finish(), false));
        }
    }
}

/// Sample in blocks until `stop` returns true. The predicate receives the
/// sampler state after each block and may keep its own incremental state.
/// Errors with `HorizonTooShort` if the budget is exhausted first.
pub fn sample_until(
    spec: &LevySpec,
    dt: f64,
    seed: Seed,
    max_steps: usize,
    stop: impl FnMut(&PathSampler) -> bool,
) -> Result<PathSkeleton> {
    let (path, met) = sample_until_capped(spec, dt, seed, max_steps, stop)?;
    if met {
        Ok(path)
    } else {
        Err(Error::HorizonTooShort(format!(
            "stopping condition unmet after {} steps",
            path.len().saturating_sub(1)
        )))
    }
}

/// Sample until the exponential clock `∫ e^{α ξ} ds` covers `a_need`
/// (coarse cell-level accounting plus a safety margin), optionally
/// continuing until the path is back at a running maximum so that no
/// excursion is left open. Incremental, so the cost is linear.
pub fn sample_until_clock(
    spec: &LevySpec,
    dt: f64,
    seed: Seed,
    alpha: f64,
    a_need: f64,
    require_at_max: bool,
    max_steps: usize,
) -> Result<PathSkeleton> {
    let (path, met) =
        sample_until_clock_capped(spec, dt, seed, alpha, a_need, require_at_max, max_steps)?;
    if met {
        Ok(path)
    } else {
        Err(Error::HorizonTooShort(format!("clock coverage {a_need} unmet within {max_steps} steps")))
    }
}

/// Capped variant of [`sample_until_clock`]: on budget exhaustion the
/// partial path comes back with the flag unset instead of an error.
pub fn sample_until_clock_capped(
    spec: &LevySpec,
    dt: f64,
    seed: Seed,
    alpha: f64,
    a_need: f64,
    require_at_max: bool,
    max_steps: usize,
) -> Result<(PathSkeleton, bool)> {
    let mut idx = 0usize;
    let mut a_cum = 0.0f64;
    let mut vmax = f64::NEG_INFINITY;
    let mut record_after_cover = false;
    // intra-cell events are ignored here, so jump cells are misestimated by
    // a bounded fraction; the margin absorbs that
    let target = a_need * 1.05 + 1e-12;
    sample_until_capped(spec, dt, seed, max_steps, move |s| {
        let vals = &s.values;
        if vmax == f64::NEG_INFINITY {
            vmax = vals[0];
        }
        while idx + 1 < vals.len() {
            a_cum += (alpha * vals[idx]).exp() * dt;
            idx += 1;
            if vals[idx] > vmax {
                vmax = vals[idx];
                if a_cum >= target {
                    record_after_cover = true;
                }
            }
        }
        a_cum >= target && (!require_at_max || record_after_cover)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::parallel::par_map;
    use crate::stats::mc_mean;

    #[test]
    fn classify_standard_bm() {
        let r = classify(&models::bm()).unwrap();
        assert!(r.reg_up && r.reg_down);
        assert_eq!(r.drifts_to, DriftDirection::Oscillates);
        assert!(!r.a_positive);
    }

    #[test]
    fn classify_cp_positive_drift() {
        let spec = LevySpec {
            drift: 1.0,
            sigma: 0.0,
            jumps: JumpSpec::CompoundPoisson {
                rate: 1.0,
                law: JumpLaw::Deterministic { size: -0.5 },
            },
            kill_rate: 0.0,
            label: "cp".into(),
        };
        let r = classify(&spec).unwrap();
        assert!(r.reg_up && !r.reg_down && r.a_positive);
        assert_eq!(r.drifts_to, DriftDirection::PlusInfinity);
    }

    #[test]
    fn classify_negative_drift_bm() {
        let spec = LevySpec { drift: -1.0, sigma: 1.0, jumps: JumpSpec::None, kill_rate: 0.0, label: String::new() };
        assert_eq!(classify(&spec).unwrap().drifts_to, DriftDirection::MinusInfinity);
    }

    #[test]
    fn classify_dual_swaps_regularity_and_direction() {
        for spec in [models::cp_two_sided(), models::bm_drift(0.5)] {
            let r = classify(&spec).unwrap();
            let rd = classify(&spec.dual()).unwrap();
            assert_eq!(r.reg_up, rd.reg_down);
            assert_eq!(r.reg_down, rd.reg_up);
            match r.drifts_to {
                DriftDirection::PlusInfinity => {
                    assert_eq!(rd.drifts_to, DriftDirection::MinusInfinity)
                }
                DriftDirection::MinusInfinity => {
                    assert_eq!(rd.drifts_to, DriftDirection::PlusInfinity)
                }
                DriftDirection::Oscillates => assert_eq!(rd.drifts_to, DriftDirection::Oscillates),
            }
        }
    }

    #[test]
    fn dual_is_involution() {
        let s = models::cp_two_sided();
        let dd = s.dual().dual();
        assert_eq!(dd.drift, s.drift);
        if let (
            JumpSpec::CompoundPoisson { law: JumpLaw::TwoSidedExponential { p_up: p1, .. }, .. },
            JumpSpec::CompoundPoisson { law: JumpLaw::TwoSidedExponential { p_up: p2, .. }, .. },
        ) = (&dd.jumps, &s.jumps)
        {
            assert!((p1 - p2).abs() < 1e-15);
        } else {
            panic!("expected two-sided laws");
        }
        let t = models::bm_drift(1.0);
        assert_eq!(t.dual().drift, -1.0);
        if let JumpSpec::CompoundPoisson { law: JumpLaw::TwoSidedExponential { p_up, .. }, .. } =
            s.dual().jumps
        {
            assert!((p_up - 0.7).abs() < 1e-15);
        } else {
            panic!("expected mirrored two-sided law");
        }
    }

    #[test]
    fn degenerate_spec_rejected() {
        let spec = LevySpec { drift: 0.0, sigma: 0.0, jumps: JumpSpec::None, kill_rate: 0.0, label: String::new() };
        assert!(matches!(spec.validate(), Err(Error::UnsupportedSpec(_))));
    }

    #[test]
    fn zero_path_for_null_dynamics_via_zero_rate() {
        // rate-0 compound Poisson with drift: pure drift path
        let spec = LevySpec {
            drift: 1.0,
            sigma: 0.0,
            jumps: JumpSpec::CompoundPoisson { rate: 0.0, law: JumpLaw::Deterministic { size: 1.0 } },
            kill_rate: 0.0,
            label: String::new(),
        };
        let p = sample_skeleton(&spec, 2.0, 0.5, Seed::new(1)).unwrap();
        assert_eq!(p.times, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(p.events.is_empty());
    }

    #[test]
    fn pure_drift_grid_values() {
        let spec = LevySpec { drift: 1.0, sigma: 0.0, jumps: JumpSpec::None, kill_rate: 0.0, label: String::new() };
        let p = sample_skeleton(&spec, 2.0, 0.5, Seed::new(1)).unwrap();
        let expect = [0.0, 0.5, 1.0, 1.5, 2.0];
        for (v, e) in p.values.iter().zip(expect.iter()) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let spec = models::cp_two_sided();
        let a = sample_skeleton(&spec, 5.0, 0.01, Seed::new(9).for_path(3)).unwrap();
        let b = sample_skeleton(&spec, 5.0, 0.01, Seed::new(9).for_path(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_grid_rejected() {
        let spec = models::cp_two_sided();
        assert!(matches!(sample_skeleton(&spec, 1.0, 0.5, Seed::new(0)), Err(Error::InvalidGrid(_))));
        assert!(matches!(sample_skeleton(&spec, 0.5, 1.0, Seed::new(0)), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn moment_check_mean_within_clt_gate() {
        // sample mean of ξ_T / T matches drift + rate·E(jump) within 4 se
        for spec in [models::bm_drift(0.5), models::cp_two_sided()] {
            let t = 4.0;
            let xs = par_map(800, |i| {
                let p = sample_skeleton(&spec, t, 0.01, Seed::new(31).for_path(i)).unwrap();
                p.values.last().unwrap() / t
            });
            let (m, se) = mc_mean(&xs, None);
            assert!(
                (m - spec.mean()).abs() < 4.0 * se,
                "model {} mean {m} expected {} se {se}",
                spec.label,
                spec.mean()
            );
        }
    }

    #[test]
    fn killed_path_truncated_at_lifetime() {
        let spec = LevySpec {
            drift: 1.0,
            sigma: 0.0,
            jumps: JumpSpec::None,
            kill_rate: 2.0,
            label: "killed".into(),
        };
        let p = sample_skeleton(&spec, 50.0, 0.01, Seed::new(4)).unwrap();
        assert!(p.lifetime.is_finite());
        assert!(p.end_time() <= p.lifetime);
        assert!(p.end_time() + 0.01 > p.lifetime || p.end_time() == 50.0);
    }

    #[test]
    fn events_consistent_with_grid_values() {
        let p = sample_skeleton(&models::cp_two_sided(), 20.0, 0.01, Seed::new(12)).unwrap();
        p.validate().unwrap();
        // each event's jump size must be reflected in the grid increment
        for e in &p.events {
            assert!((e.post - e.pre).abs() > 0.0);
        }
        // step convention: breakpoints are time-ordered
        let mut last = -1.0;
        for (t, _) in p.breakpoints() {
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn sample_until_stops_on_condition() {
        let spec = models::bm_drift(0.5);
        let p = sample_until(&spec, 0.01, Seed::new(2), 1_000_000, |s| {
            *s.values.last().unwrap() > 3.0
        })
        .unwrap();
        assert!(*p.values.last().unwrap() > 3.0);
    }

    #[test]
    fn sample_until_budget_error() {
        let spec = models::bm_drift(0.5);
        let r = sample_until(&spec, 0.01, Seed::new(2), 4096, |s| *s.values.last().unwrap() > 1e9);
        assert!(matches!(r, Err(Error::HorizonTooShort(_))));
    }

    #[test]
    fn arithmetic_detection() {
        let det = LevySpec {
            drift: 0.0,
            sigma: 0.0,
            jumps: JumpSpec::CompoundPoisson {
                rate: 1.0,
                law: JumpLaw::Discrete { atoms: vec![(0.5, 0.5), (-1.0, 0.5)] },
            },
            kill_rate: 0.0,
            label: String::new(),
        };
        assert!(det.is_arithmetic());
        assert!(!models::cp_two_sided().is_arithmetic());
        assert!(!models::bm().is_arithmetic());
    }
}
