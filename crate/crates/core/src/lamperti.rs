//! The Lamperti transformation in both directions.
//!
//! `to_pssmp` maps a Lévy path ξ to the positive self-similar path
//! `X_t = x · exp(ξ_{τ(t x^{−α})})` where τ is the inverse of the
//! exponential clock `A`. The output grid is the image of the input grid
//! under the clock, so no interpolation is involved and `to_levy` inverts
//! the construction exactly on the grid.

use crate::error::{Error, Result};
use crate::levy_model::{classify, sample_until_clock, DriftDirection, LevySpec};
use crate::parallel::{par_map, Kahan};
use crate::pathkit::{IncreasingFn, JumpEvent, PathSkeleton};
use crate::seed::Seed;
use crate::stats::{ks_two_sample, EmpiricalLaw, TestReport};
use std::io::Write;

/// A pssMp path together with the clock that produced it.
#[derive(Debug, Clone)]
pub struct PssmpPath {
    /// Self-similarity parameter (index of self-similarity is 1/α).
    pub alpha: f64,
    /// Starting point.
    pub x: f64,
    /// X values on the image grid (non-uniform).
    pub path: PathSkeleton,
    /// First hitting time of 0: `Some(bound)` when α·ξ drifts down and the
    /// clock saturates within the horizon, `None` when censored.
    pub t0: Option<f64>,
    /// ξ-time of each X grid point (the clock, stored losslessly).
    pub xi_times: Vec<f64>,
    /// ξ-time of each X event.
    pub xi_event_times: Vec<f64>,
}

impl PssmpPath {
    /// The clock `s ↦ x^α A_s` as an increasing function.
    pub fn clock(&self) -> IncreasingFn {
        IncreasingFn {
            knots: self.xi_times.iter().cloned().zip(self.path.times.iter().cloned()).collect(),
        }
    }

    /// Step-convention evaluation at an X-time within the grid.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        if t > self.path.end_time() + 1e-9 {
            return Err(Error::OutOfRange(format!("t={t} beyond simulated clock")));
        }
        let times = &self.path.times;
        let mut lo = 0usize;
        let mut hi = times.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if times[mid] <= t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let mut idx = lo.saturating_sub(1);
        let mut val = self.path.values[idx];
        // events inside the current cell, at or before t
        for e in &self.path.events {
            if e.time <= t && e.time >= times[idx] {
                val = e.post;
            }
            if e.time > t {
                break;
            }
        }
        let _ = &mut idx;
        Ok(val)
    }

    /// Running supremum values M_t on the grid.
    pub fn sup_path(&self) -> PathSkeleton {
        self.path.running_sup()
    }

    /// CSV export with columns `t,x,m,m_over_x`.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let sup = self.sup_path();
        writeln!(w, "t,x,m,m_over_x")?;
        for i in 0..self.path.len() {
            let (t, x, m) = (self.path.times[i], self.path.values[i], sup.values[i]);
            writeln!(w, "{},{},{},{}", t, x, m, m / x)?;
        }
        Ok(())
    }
}

/// Build the pssMp path from a Lévy path. The output grid is the image of
/// the input grid under the clock `t = x^α A_s`.
pub fn to_pssmp(xi: &PathSkeleton, alpha: f64, x: f64) -> Result<PssmpPath> {
    if !(x > 0.0) {
        return Err(Error::NonPositiveValue(format!("starting point {x}")));
    }
    if alpha == 0.0 {
        return Err(Error::InconsistentInputs("alpha must be nonzero".into()));
    }
    if xi.is_empty() {
        return Err(Error::EmptyPath);
    }
    let xa = x.powf(alpha);
    let mut times = Vec::with_capacity(xi.times.len());
    let mut values = Vec::with_capacity(xi.times.len());
    let mut events = Vec::with_capacity(xi.events.len());
    let mut xi_event_times = Vec::with_capacity(xi.events.len());
    let mut a = Kahan::new();
    let mut prev: Option<(f64, f64)> = None;
    let mut ev = xi.events.iter().peekable();
    for (i, (&s, &v)) in xi.times.iter().zip(xi.values.iter()).enumerate() {
        // events strictly inside the previous cell
        while let Some(e) = ev.peek() {
            if e.time < s || (e.time == s && i > 0) {
                if let Some((s0, v0)) = prev {
                    a.add((alpha * v0).exp() * (e.time - s0));
                }
                let t_ev = xa * a.value();
                events.push(JumpEvent { time: t_ev, pre: x * e.pre.exp(), post: x * e.post.exp() });
                xi_event_times.push(e.time);
                prev = Some((e.time, e.post));
                ev.next();
            } else {
                break;
            }
        }
        if let Some((s0, v0)) = prev {
            a.add((alpha * v0).exp() * (s - s0));
        }
        times.push(xa * a.value());
        values.push(x * v.exp());
        prev = Some((s, v));
    }
    let path = PathSkeleton {
        times,
        values,
        events,
        lifetime: if xi.lifetime.is_finite() { xa * a.value() } else { f64::INFINITY },
        origin_seed: xi.origin_seed,
    };
    Ok(PssmpPath { alpha, x, path, t0: None, xi_times: xi.times.clone(), xi_event_times })
}

/// Estimate T₀ for a path whose log drifts to −∞ under α: the simulated
/// clock mass plus a drift-based tail bound. `mean_alpha_xi` is the per-time
/// drift of α·ξ (must be negative).
pub fn estimate_t0(xp: &PssmpPath, mean_alpha_xi: f64) -> Result<(f64, f64)> {
    if mean_alpha_xi >= 0.0 {
        return Err(Error::NonConvergent("α·ξ does not drift to −∞".into()));
    }
    let xa = xp.x.powf(xp.alpha);
    let a_end = xp.path.end_time() / xa;
    let v_end = (xp.path.values.last().unwrap() / xp.x).ln() * xp.alpha;
    // tail ≤ e^{v_end} / |drift| up to fluctuations; doubled for safety
    let tail = 2.0 * v_end.exp() / (-mean_alpha_xi);
    Ok((xa * (a_end + tail), xa * tail))
}

/// Invert the Lamperti construction on the grid.
pub fn to_levy(xp: &PssmpPath) -> Result<PathSkeleton> {
    if xp.path.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveValue("pssMp path touches 0".into()));
    }
    let values = xp.path.values.iter().map(|&v| (v / xp.x).ln()).collect();
    let events = xp
        .path
        .events
        .iter()
        .zip(xp.xi_event_times.iter())
        .map(|(e, &s)| JumpEvent { time: s, pre: (e.pre / xp.x).ln(), post: (e.post / xp.x).ln() })
        .collect();
    Ok(PathSkeleton {
        times: xp.xi_times.clone(),
        values,
        events,
        lifetime: if xp.path.lifetime.is_finite() {
            *xp.xi_times.last().unwrap()
        } else {
            f64::INFINITY
        },
        origin_seed: xp.path.origin_seed,
    })
}

/// Simulate X from `x` far enough that the clock covers `t_max`, then return
/// the path. The ξ horizon adapts in blocks.
pub fn sample_pssmp(
    spec: &LevySpec,
    alpha: f64,
    x: f64,
    t_max: f64,
    dt: f64,
    seed: Seed,
    max_steps: usize,
) -> Result<PssmpPath> {
    let need_a = t_max / x.powf(alpha);
    let xi = sample_until_clock(spec, dt, seed, alpha, need_a, false, max_steps)?;
    to_pssmp(&xi, alpha, x)
}

/// Two-sample scaling check: `c·X_{t c^{−α}}` from `x` against `X_t` from
/// `c·x`, per evaluation time.
pub fn check_scaling(
    spec: &LevySpec,
    alpha: f64,
    x: f64,
    c: f64,
    t_list: &[f64],
    n: u64,
    dt: f64,
    seed: Seed,
) -> Result<Vec<TestReport>> {
    let t_max = t_list.iter().cloned().fold(0.0f64, f64::max);
    let reg = classify(spec)?;
    if alpha > 0.0 && reg.drifts_to == DriftDirection::MinusInfinity {
        return Err(Error::NonConvergent(
            "scaling check expects a process that does not die before the horizon".into(),
        ));
    }
    let max_steps = 40_000_000 / (n as usize).max(1) + 4_000_000;
    let seed_a = seed.subspace(1);
    let seed_b = seed.subspace(2);
    let sample_at = |start: f64, tq: f64, sd: Seed, i: u64| -> Result<f64> {
        let xp = sample_pssmp(spec, alpha, start, tq, dt, sd.for_path(i), max_steps)?;
        xp.value_at(tq)
    };
    let mut reports = Vec::new();
    for &t in t_list {
        let scaled: Vec<f64> = par_map(n, |i| sample_at(x, t * c.powf(-alpha), seed_a, i))
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(|v| c * v)
            .collect();
        let direct: Vec<f64> = par_map(n, |i| sample_at(c * x, t, seed_b, i))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let la = EmpiricalLaw::unweighted(scaled, seed_a, "scaled");
        let lb = EmpiricalLaw::unweighted(direct, seed_b, "direct");
        reports.push(ks_two_sample(&la, &lb, 0.01)?);
        let _ = t_max;
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::sample_skeleton;
    use crate::models;

    #[test]
    fn constant_xi_gives_constant_x_and_identity_clock() {
        let xi = PathSkeleton::constant(0.0, 3.0, 0.5, Seed::new(0));
        let xp = to_pssmp(&xi, 1.0, 2.0).unwrap();
        assert!(xp.path.values.iter().all(|&v| (v - 2.0).abs() < 1e-15));
        // A_t = t, grid scaled by x^α = 2
        for (i, &t) in xp.path.times.iter().enumerate() {
            assert!((t - 2.0 * xi.times[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_identity_on_grid() {
        for spec in models::catalogue() {
            let xi = sample_skeleton(&spec, 5.0, 1e-3, Seed::new(17)).unwrap();
            let xp = to_pssmp(&xi, 1.0, 1.7).unwrap();
            let back = to_levy(&xp).unwrap();
            assert_eq!(back.times.len(), xi.times.len());
            let mut worst = 0.0f64;
            for i in 0..xi.len() {
                worst = worst.max((back.values[i] - xi.values[i]).abs());
                assert_eq!(back.times[i], xi.times[i]);
            }
            for (e1, e2) in back.events.iter().zip(xi.events.iter()) {
                worst = worst.max((e1.pre - e2.pre).abs()).max((e1.post - e2.post).abs());
                assert_eq!(e1.time, e2.time);
            }
            assert!(worst <= 1e-12, "model {} worst {worst}", spec.label);
        }
    }

    #[test]
    fn constant_x_inverts_to_zero_xi() {
        let xi = PathSkeleton::constant(0.0, 2.0, 0.25, Seed::new(0));
        let xp = to_pssmp(&xi, 2.0, 3.0).unwrap();
        let back = to_levy(&xp).unwrap();
        assert!(back.values.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn monotone_clock_while_alive() {
        let xi = sample_skeleton(&models::bm(), 2.0, 1e-3, Seed::new(3)).unwrap();
        let xp = to_pssmp(&xi, 1.0, 1.0).unwrap();
        for w in xp.path.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn drift_refinement_converges() {
        // X from pure drift ξ, compared across dt and dt/2: half-grid
        // refinement changes values within first-order bounds
        let spec = models::drift_subordinator(1.0);
        let coarse = sample_skeleton(&spec, 2.0, 0.01, Seed::new(1)).unwrap();
        let fine = sample_skeleton(&spec, 2.0, 0.005, Seed::new(1)).unwrap();
        let xc = to_pssmp(&coarse, 1.0, 1.0).unwrap();
        let xf = to_pssmp(&fine, 1.0, 1.0).unwrap();
        // compare at a common clock time
        let t = xc.path.end_time().min(xf.path.end_time()) * 0.9;
        let vc = xc.value_at(t).unwrap();
        let vf = xf.value_at(t).unwrap();
        assert!((vc - vf).abs() < 0.02 * vc.abs(), "coarse {vc} fine {vf}");
    }

    #[test]
    fn nonpositive_rejected() {
        let xi = PathSkeleton::constant(0.0, 1.0, 0.5, Seed::new(0));
        assert!(matches!(to_pssmp(&xi, 1.0, 0.0), Err(Error::NonPositiveValue(_))));
        assert!(matches!(to_pssmp(&xi, 0.0, 1.0), Err(Error::InconsistentInputs(_))));
    }

    #[test]
    fn t0_censoring_cauchy_tail() {
        // α>0 and ξ drifting down: x^α A_T increases to a finite limit
        let spec = models::drift_subordinator(-1.0);
        let mut prev = 0.0;
        let mut gaps = Vec::new();
        for (i, t) in [4.0, 8.0, 16.0, 32.0].iter().enumerate() {
            let xi = sample_skeleton(&spec, *t, 0.01, Seed::new(5)).unwrap();
            let xp = to_pssmp(&xi, 1.0, 1.5).unwrap();
            let a_end = xp.path.end_time();
            if i > 0 {
                gaps.push(a_end - prev);
            }
            prev = a_end;
        }
        assert!(gaps.iter().all(|&g| g >= 0.0));
        assert!(gaps.last().unwrap() < &1e-2, "tail gap {:?}", gaps);
        let xi = sample_skeleton(&spec, 32.0, 0.01, Seed::new(5)).unwrap();
        let xp = to_pssmp(&xi, 1.0, 1.5).unwrap();
        let (t0, bound) = estimate_t0(&xp, -1.0).unwrap();
        assert!(t0 > xp.path.end_time());
        assert!(bound < 1e-4);
    }

    #[test]
    fn scaling_check_c1_is_exact() {
        // c = 1 compares the same law with different seeds
        let reports =
            check_scaling(&models::bm(), 1.0, 1.0, 1.0, &[0.5], 120, 2e-3, Seed::new(77)).unwrap();
        assert!(reports[0].p_value > 1e-4);
    }

    #[test]
    fn scaling_check_brownian() {
        let reports =
            check_scaling(&models::bm(), 1.0, 1.0, 2.0, &[0.5], 300, 2e-3, Seed::new(78)).unwrap();
        assert!(reports[0].pass, "scaling KS failed: {:?}", reports[0]);
    }

    #[test]
    fn deterministic_drift_scaling_exact_atoms() {
        // drift-only ξ: X deterministic; both samplers produce one atom
        let spec = models::drift_subordinator(1.0);
        let a = sample_pssmp(&spec, 1.0, 1.0, 1.0, 1e-3, Seed::new(1), 1 << 22).unwrap();
        let b = sample_pssmp(&spec, 1.0, 2.0, 2.0, 1e-3, Seed::new(2), 1 << 22).unwrap();
        let va = 2.0 * a.value_at(2.0 * 2.0f64.powf(-1.0)).unwrap();
        let vb = b.value_at(2.0).unwrap();
        assert!((va - vb).abs() < 6e-3, "atoms {va} vs {vb}");
    }
}
