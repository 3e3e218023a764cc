//! Discrete path container and path algebra.
//!
//! A path is stored as grid samples plus intra-cell jump events. For all
//! path functionals it is read through its *breakpoint sequence*: grid
//! points interleaved with (pre, post) pairs at event times. Between
//! breakpoints the path is treated as constant at the left value (càdlàg
//! step convention), which makes left-endpoint quadrature and the ladder
//! decompositions exact rearrangements of one another at the discrete level.

use crate::error::{Error, Result};
use crate::parallel::Kahan;
use crate::seed::Seed;
use std::io::{BufRead, Write};

/// An intra-cell jump: the path moves from `pre` to `post` at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub pre: f64,
    pub post: f64,
}

/// A grid realization of a process with lifetime marker.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSkeleton {
    /// Strictly increasing, starting at 0.
    pub times: Vec<f64>,
    /// Same length as `times`.
    pub values: Vec<f64>,
    /// Sorted by time; each event lies strictly inside a grid cell.
    pub events: Vec<JumpEvent>,
    /// Lifetime; `f64::INFINITY` when the path is alive over the whole grid.
    pub lifetime: f64,
    pub origin_seed: Seed,
}

/// One breakpoint of the step-function view: `(time, value)`.
/// Jump events contribute two breakpoints with equal time (pre then post).
pub type Breakpoint = (f64, f64);

impl PathSkeleton {
    pub fn new(times: Vec<f64>, values: Vec<f64>, seed: Seed) -> Self {
        PathSkeleton { times, values, events: Vec::new(), lifetime: f64::INFINITY, origin_seed: seed }
    }

    /// Constant path at `v` on a uniform grid.
    pub fn constant(v: f64, horizon: f64, dt: f64, seed: Seed) -> Self {
        let n = (horizon / dt).round() as usize;
        let times = (0..=n).map(|i| i as f64 * dt).collect();
        let values = vec![v; n + 1];
        PathSkeleton::new(times, values, seed)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Breakpoints in time order. Events split their cell into two
    /// breakpoints at the same instant.
    pub fn breakpoints(&self) -> BreakpointIter<'_> {
        BreakpointIter { path: self, gi: 0, ei: 0, pending_post: None }
    }

    /// Structural validation used by tests and the binary reader.
    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::EmptyPath);
        }
        if self.times.len() != self.values.len() {
            return Err(Error::InconsistentInputs("times/values length mismatch".into()));
        }
        if self.times[0] != 0.0 {
            return Err(Error::InconsistentInputs("grid must start at 0".into()));
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InconsistentInputs("times must be strictly increasing".into()));
            }
        }
        for w in self.events.windows(2) {
            if w[1].time < w[0].time {
                return Err(Error::InconsistentInputs("events must be sorted".into()));
            }
        }
        for e in &self.events {
            if e.time <= 0.0 || e.time >= self.end_time() {
                return Err(Error::InconsistentInputs("event outside the grid".into()));
            }
        }
        Ok(())
    }

    /// Running supremum over breakpoints (grid values and jump peaks).
    pub fn running_sup(&self) -> PathSkeleton {
        let mut out_times = Vec::with_capacity(self.times.len());
        let mut out_values = Vec::with_capacity(self.times.len());
        let mut out_events = Vec::with_capacity(self.events.len());
        let mut m = f64::NEG_INFINITY;
        let mut ev = self.events.iter().peekable();
        for (i, (&t, &v)) in self.times.iter().zip(self.values.iter()).enumerate() {
            // fold in events that occurred strictly before this grid point
            while let Some(e) = ev.peek() {
                if e.time < t || (e.time == t && i > 0) {
                    let pre_m = m.max(e.pre);
                    let post_m = pre_m.max(e.post);
                    out_events.push(JumpEvent { time: e.time, pre: pre_m, post: post_m });
                    m = post_m;
                    ev.next();
                } else {
                    break;
                }
            }
            m = m.max(v);
            out_times.push(t);
            out_values.push(m);
        }
        PathSkeleton {
            times: out_times,
            values: out_values,
            events: out_events,
            lifetime: self.lifetime,
            origin_seed: self.origin_seed,
        }
    }

    /// The reflected path `sup − path`, pointwise over breakpoints.
    pub fn reflect_at_sup(&self) -> PathSkeleton {
        let sup = self.running_sup();
        let values = sup.values.iter().zip(self.values.iter()).map(|(m, v)| m - v).collect();
        let events = sup
            .events
            .iter()
            .zip(self.events.iter())
            .map(|(me, e)| JumpEvent { time: e.time, pre: me.pre - e.pre, post: me.post - e.post })
            .collect();
        PathSkeleton {
            times: self.times.clone(),
            values,
            events,
            lifetime: self.lifetime,
            origin_seed: self.origin_seed,
        }
    }

    /// Left-endpoint quadrature of `∫₀ᵗ exp(α · path(s)) ds`, with jump
    /// events splitting their cell.
    pub fn exp_integral(&self, alpha: f64, upto: f64) -> Result<f64> {
        if upto > self.end_time() + 1e-12 {
            return Err(Error::OutOfRange(format!(
                "t={} beyond grid end {}",
                upto,
                self.end_time()
            )));
        }
        let mut acc = Kahan::new();
        let mut prev: Option<Breakpoint> = None;
        for (t, v) in self.breakpoints() {
            if let Some((t0, v0)) = prev {
                if t0 >= upto {
                    break;
                }
                let t1 = t.min(upto);
                if t1 > t0 {
                    acc.add((alpha * v0).exp() * (t1 - t0));
                }
            }
            prev = Some((t, v));
        }
        Ok(acc.value())
    }

    /// The full clock `t ↦ ∫₀ᵗ exp(α ξ_s) ds` as an increasing function with
    /// knots at every breakpoint.
    pub fn exp_clock(&self, alpha: f64) -> IncreasingFn {
        let mut knots = Vec::with_capacity(self.times.len() + 2 * self.events.len());
        let mut acc = Kahan::new();
        let mut prev: Option<Breakpoint> = None;
        for (t, v) in self.breakpoints() {
            if let Some((t0, v0)) = prev {
                if t > t0 {
                    acc.add((alpha * v0).exp() * (t - t0));
                }
            }
            knots.push((t, acc.value()));
            prev = Some((t, v));
        }
        knots.dedup();
        IncreasingFn { knots }
    }

    /// Time reversal about `at` (a grid time): `s ↦ path(at) − path((at−s)−)`,
    /// grid points mirrored in place and jump events mirrored with their
    /// pre/post values swapped.
    pub fn time_reverse(&self, at: f64) -> Result<PathSkeleton> {
        if at > self.end_time() + 1e-12 {
            return Err(Error::OutOfRange("reversal point beyond grid".into()));
        }
        let cut = self.times.partition_point(|&t| t <= at + 1e-15);
        if cut == 0 {
            return Err(Error::EmptyPath);
        }
        let anchor = self.times[cut - 1];
        let top = self.values[cut - 1];
        let mut times = Vec::with_capacity(cut);
        let mut values = Vec::with_capacity(cut);
        for k in (0..cut).rev() {
            times.push(anchor - self.times[k]);
            values.push(top - self.values[k]);
        }
        let mut events: Vec<JumpEvent> = self
            .events
            .iter()
            .filter(|e| e.time < anchor)
            .map(|e| JumpEvent { time: anchor - e.time, pre: top - e.post, post: top - e.pre })
            .collect();
        events.reverse();
        Ok(PathSkeleton {
            times,
            values,
            events,
            lifetime: self.lifetime,
            origin_seed: self.origin_seed,
        })
    }

    /// CSV export: `t,value,is_event` rows, events contributing two rows.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,value,is_event")?;
        let mut ev = self.events.iter().peekable();
        for (&t, &v) in self.times.iter().zip(self.values.iter()) {
            while let Some(e) = ev.peek() {
                if e.time < t {
                    writeln!(w, "{},{},1", e.time, e.pre)?;
                    writeln!(w, "{},{},1", e.time, e.post)?;
                    ev.next();
                } else {
                    break;
                }
            }
            writeln!(w, "{},{},0", t, v)?;
        }
        Ok(())
    }

    /// Versioned binary round trip. Layout: magic, version, counts, then
    /// little-endian f64 payloads.
    pub fn to_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.times.len() as u64).to_le_bytes())?;
        w.write_all(&(self.events.len() as u64).to_le_bytes())?;
        w.write_all(&self.lifetime.to_le_bytes())?;
        w.write_all(&self.origin_seed.master.to_le_bytes())?;
        w.write_all(&self.origin_seed.stream.to_le_bytes())?;
        for &t in &self.times {
            w.write_all(&t.to_le_bytes())?;
        }
        for &v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        for e in &self.events {
            w.write_all(&e.time.to_le_bytes())?;
            w.write_all(&e.pre.to_le_bytes())?;
            w.write_all(&e.post.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn from_binary<R: BufRead>(mut r: R) -> Result<PathSkeleton> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Io("bad magic header".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != 1 {
            return Err(Error::Io("unsupported format version".into()));
        }
        let mut b8 = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n = read_u64(&mut r)? as usize;
        let ne = read_u64(&mut r)? as usize;
        let mut bf = [0u8; 8];
        let mut read_f64 = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut bf)?;
            Ok(f64::from_le_bytes(bf))
        };
        let lifetime = read_f64(&mut r)?;
        let master = {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            u64::from_le_bytes(b)
        };
        let stream = {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            u64::from_le_bytes(b)
        };
        let mut times = Vec::with_capacity(n);
        for _ in 0..n {
            times.push(read_f64(&mut r)?);
        }
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(read_f64(&mut r)?);
        }
        let mut events = Vec::with_capacity(ne);
        for _ in 0..ne {
            let time = read_f64(&mut r)?;
            let pre = read_f64(&mut r)?;
            let post = read_f64(&mut r)?;
            events.push(JumpEvent { time, pre, post });
        }
        let p = PathSkeleton {
            times,
            values,
            events,
            lifetime,
            origin_seed: Seed { master, stream },
        };
        p.validate()?;
        Ok(p)
    }
}

const MAGIC: &[u8; 4] = b"PSK1";

pub struct BreakpointIter<'a> {
    path: &'a PathSkeleton,
    gi: usize,
    ei: usize,
    pending_post: Option<Breakpoint>,
}

impl<'a> Iterator for BreakpointIter<'a> {
    type Item = Breakpoint;

    fn next(&mut self) -> Option<Breakpoint> {
        if let Some(bp) = self.pending_post.take() {
            return Some(bp);
        }
        let g = self.path.times.get(self.gi).copied();
        let e = self.path.events.get(self.ei);
        match (g, e) {
            (Some(t), Some(ev)) if ev.time < t => {
                self.ei += 1;
                self.pending_post = Some((ev.time, ev.post));
                Some((ev.time, ev.pre))
            }
            (Some(t), _) => {
                let v = self.path.values[self.gi];
                self.gi += 1;
                Some((t, v))
            }
            (None, Some(ev)) => {
                self.ei += 1;
                self.pending_post = Some((ev.time, ev.post));
                Some((ev.time, ev.pre))
            }
            (None, None) => None,
        }
    }
}

/// Right-continuous nondecreasing function given by knots.
///
/// Consecutive knots with increasing abscissae are joined linearly; repeated
/// abscissae encode jumps (the last knot at an abscissa is the
/// right-continuous value).
#[derive(Debug, Clone, PartialEq)]
pub struct IncreasingFn {
    pub knots: Vec<(f64, f64)>,
}

impl IncreasingFn {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        for w in knots.windows(2) {
            if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
                return Err(Error::InconsistentInputs(
                    "knots must be nondecreasing in both coordinates".into(),
                ));
            }
        }
        Ok(IncreasingFn { knots })
    }

    pub fn start(&self) -> f64 {
        self.knots.first().map_or(0.0, |k| k.0)
    }

    pub fn end(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.0)
    }

    pub fn sup_value(&self) -> f64 {
        self.knots.last().map_or(f64::NEG_INFINITY, |k| k.1)
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if self.knots.is_empty() || t < self.start() - 1e-12 || t > self.end() + 1e-12 {
            return Err(Error::OutOfRange(format!("t={t} outside knot range")));
        }
        // last knot with abscissa <= t
        let mut lo = 0usize;
        let mut hi = self.knots.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.knots[mid].0 <= t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let i = lo.saturating_sub(1);
        let (t0, v0) = self.knots[i];
        if i + 1 < self.knots.len() {
            let (t1, v1) = self.knots[i + 1];
            if t1 > t0 && t > t0 {
                return Ok(v0 + (v1 - v0) * ((t.min(t1) - t0) / (t1 - t0)));
            }
        }
        Ok(v0)
    }

    /// `inf { s : f(s) > y }`, or `+∞` (None) if the level is never exceeded.
    pub fn right_inverse(&self, y: f64) -> Option<f64> {
        if self.knots.is_empty() || self.sup_value() <= y {
            return None;
        }
        // first knot with ordinate > y
        let mut lo = 0usize;
        let mut hi = self.knots.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.knots[mid].1 > y {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let (t1, v1) = self.knots[lo];
        if lo == 0 {
            return Some(t1);
        }
        let (t0, v0) = self.knots[lo - 1];
        if t1 > t0 && v1 > v0 {
            // linear segment crossing the level
            Some(t0 + (t1 - t0) * ((y - v0) / (v1 - v0)))
        } else {
            // jump through the level (or flat run ending here)
            Some(t1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(vals: &[f64]) -> PathSkeleton {
        let times = (0..vals.len()).map(|i| i as f64).collect();
        PathSkeleton::new(times, vals.to_vec(), Seed::new(0))
    }

    #[test]
    fn running_sup_increasing_path_is_itself() {
        let p = path(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(p.running_sup().values, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn running_sup_example() {
        let p = path(&[0.0, 1.0, 0.5, 2.0]);
        assert_eq!(p.running_sup().values, vec![0.0, 1.0, 1.0, 2.0]);
    }

    #[test]
    fn running_sup_matches_prefix_scan_oracle() {
        let mut rng = Seed::new(77).rng();
        use rand::Rng;
        let vals: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let p = path(&vals);
        let sup = p.running_sup();
        for i in 0..vals.len() {
            // O(n²) prefix max oracle
            let m = vals[..=i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(sup.values[i], m);
        }
    }

    #[test]
    fn running_sup_sees_jump_peaks() {
        // drift down with an up-jump spike inside a cell
        let mut p = path(&[0.0, -0.1, -0.2]);
        p.events.push(JumpEvent { time: 0.5, pre: 3.0, post: -0.05 });
        let sup = p.running_sup();
        assert_eq!(sup.values, vec![0.0, 3.0, 3.0]);
        assert_eq!(sup.events[0].post, 3.0);
    }

    #[test]
    fn reflect_examples() {
        let inc = path(&[0.0, 1.0, 2.0]);
        assert!(inc.reflect_at_sup().values.iter().all(|&v| v == 0.0));
        let cst = path(&[1.0, 1.0, 1.0]);
        assert!(cst.reflect_at_sup().values.iter().all(|&v| v == 0.0));
        let mut rng = Seed::new(5).rng();
        use rand::Rng;
        let vals: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let p = path(&vals);
        let r = p.reflect_at_sup();
        let sup = p.running_sup();
        for i in 0..vals.len() {
            assert_eq!(r.values[i], sup.values[i] - vals[i]);
            assert!(r.values[i] >= 0.0);
        }
    }

    #[test]
    fn exp_integral_flat_path() {
        let p = PathSkeleton::constant(0.0, 5.0, 0.5, Seed::new(0));
        assert!((p.exp_integral(2.0, 3.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exp_integral_piecewise_constant() {
        // ξ=0 on [0,1), log 2 on [1,2), α=1, t=2 → 1 + 2 = 3
        let p = PathSkeleton::new(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 2.0f64.ln(), 2.0f64.ln()],
            Seed::new(0),
        );
        assert!((p.exp_integral(1.0, 2.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exp_integral_out_of_range() {
        let p = path(&[0.0, 1.0]);
        assert!(matches!(p.exp_integral(1.0, 5.0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn exp_integral_additive_over_adjacent_intervals() {
        let mut rng = Seed::new(3).rng();
        use rand::Rng;
        let vals: Vec<f64> = (0..400).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.01).collect();
        let p = PathSkeleton::new(times, vals, Seed::new(3));
        let whole = p.exp_integral(1.0, 3.99).unwrap();
        let a = p.exp_integral(1.0, 1.37).unwrap();
        let b = {
            // integral over [1.37, 3.99] via clock differences
            let clock = p.exp_clock(1.0);
            clock.eval(3.99).unwrap() - clock.eval(1.37).unwrap()
        };
        assert!((whole - (a + b)).abs() <= 1e-12 * whole.abs().max(1.0));
    }

    #[test]
    fn right_inverse_identity_fn() {
        let f = IncreasingFn::new(vec![(0.0, 0.0), (10.0, 10.0)]).unwrap();
        assert!((f.right_inverse(2.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn right_inverse_step_fn() {
        // 0 until a jump to 5 at t=1
        let f = IncreasingFn::new(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 5.0), (2.0, 5.0)]).unwrap();
        assert!((f.right_inverse(3.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(f.right_inverse(5.0).is_none());
    }

    #[test]
    fn right_inverse_galois_on_knots() {
        let mut rng = Seed::new(13).rng();
        use rand::Rng;
        let mut knots = vec![(0.0, 0.0)];
        let (mut t, mut v) = (0.0, 0.0);
        for _ in 0..100 {
            t += rng.random::<f64>();
            if rng.random::<f64>() < 0.3 {
                knots.push((t, v));
            }
            v += rng.random::<f64>();
            knots.push((t, v));
        }
        let f = IncreasingFn::new(knots.clone()).unwrap();
        for k in 0..40 {
            let y = f.sup_value() * (k as f64) / 40.0;
            if let Some(s) = f.right_inverse(y) {
                assert!(f.eval(s).unwrap() >= y - 1e-9, "f(inv(y)) >= y failed");
                // strictly before s the function stays <= y (checked on knots)
                for &(kt, kv) in &knots {
                    if kt < s - 1e-12 {
                        assert!(kv <= y + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn time_reverse_drift_path_is_itself() {
        let p = path(&[0.0, 1.0, 2.0, 3.0]);
        let r = p.time_reverse(3.0).unwrap();
        assert_eq!(r.times, p.times);
        assert_eq!(r.values, p.values);
    }

    #[test]
    fn time_reverse_is_involution_on_grid() {
        let mut rng = Seed::new(21).rng();
        use rand::Rng;
        let mut vals: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        vals[0] = 0.0;
        let p = path(&vals);
        let rr = p.time_reverse(49.0).unwrap().time_reverse(49.0).unwrap();
        assert_eq!(rr.times.len(), p.times.len());
        for i in 0..p.len() {
            assert!((rr.values[i] - p.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn time_reverse_preserves_increment_multiset() {
        let mut rng = Seed::new(22).rng();
        use rand::Rng;
        let vals: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let p = path(&vals);
        let r = p.time_reverse(63.0).unwrap();
        let incs = |q: &PathSkeleton| -> Vec<f64> {
            let mut v: Vec<f64> = q.values.windows(2).map(|w| w[1] - w[0]).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let (a, b) = (incs(&p), incs(&r));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_round_trip() {
        let mut p = path(&[0.0, 0.5, 0.25]);
        p.events.push(JumpEvent { time: 0.25, pre: 0.1, post: 0.9 });
        let mut buf = Vec::new();
        p.to_binary(&mut buf).unwrap();
        let q = PathSkeleton::from_binary(&buf[..]).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let p = path(&[0.0, 1.0]);
        let mut buf = Vec::new();
        p.to_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,value,is_event"));
        assert_eq!(s.lines().count(), 3);
    }
}
