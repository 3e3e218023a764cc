//! Empirical-law containers, two-sample tests and Monte Carlo error
//! accounting.
//!
//! Everything downstream of the simulators funnels through here: identities
//! are asserted either as moment checks (`mc_mean` with standard errors) or
//! as distributional checks (two-sample KS, optionally Cramér–von Mises, and
//! a projected bivariate KS with Bonferroni correction).

use crate::error::{Error, Result};
use crate::parallel::Kahan;
use crate::seed::Seed;
use serde::{Deserialize, Serialize};

/// A weighted sample set with seed provenance.
#[derive(Debug, Clone)]
pub struct EmpiricalLaw {
    pub samples: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub seed_provenance: Vec<Seed>,
    pub label: String,
}

impl EmpiricalLaw {
    pub fn unweighted(samples: Vec<f64>, seed: Seed, label: &str) -> Self {
        EmpiricalLaw { samples, weights: None, seed_provenance: vec![seed], label: label.to_string() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Effective sample size: n for unweighted laws, (Σw)²/Σw² otherwise.
    pub fn effective_n(&self) -> f64 {
        match &self.weights {
            None => self.samples.len() as f64,
            Some(w) => {
                let s: f64 = w.iter().sum();
                let s2: f64 = w.iter().map(|x| x * x).sum();
                if s2 > 0.0 {
                    s * s / s2
                } else {
                    0.0
                }
            }
        }
    }
}

/// Bivariate sample set (pairs), used for joint laws like `(R_t, H_t)`.
#[derive(Debug, Clone)]
pub struct EmpiricalLaw2 {
    pub samples: Vec<(f64, f64)>,
    pub seed_provenance: Vec<Seed>,
    pub label: String,
}

impl EmpiricalLaw2 {
    pub fn new(samples: Vec<(f64, f64)>, seed: Seed, label: &str) -> Self {
        EmpiricalLaw2 { samples, seed_provenance: vec![seed], label: label.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    Ks,
    Cvm,
    BivariateKsRotations,
}

/// Outcome of a two-sample test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub method: TestMethod,
    pub level: f64,
    pub pass: bool,
}

const MIN_SAMPLES: usize = 50;

/// Asymptotic Kolmogorov survival function Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS distance between two sorted samples; ties advance both CDFs together.
fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        let diff = (i as f64 / n1 - j as f64 / n2).abs();
        d = d.max(diff);
    }
    d
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
///
/// The weighted variant uses the effective sample size in the p-value; the
/// statistic itself is the distance between weighted empirical CDFs.
pub fn ks_two_sample(a: &EmpiricalLaw, b: &EmpiricalLaw, level: f64) -> Result<TestReport> {
    if a.len() < MIN_SAMPLES || b.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { need: MIN_SAMPLES, got: a.len().min(b.len()) });
    }
    let d = match (&a.weights, &b.weights) {
        (None, None) => {
            let mut xs = a.samples.clone();
            let mut ys = b.samples.clone();
            xs.sort_by(f64::total_cmp);
            ys.sort_by(f64::total_cmp);
            ks_distance(&xs, &ys)
        }
        _ => weighted_ks_distance(a, b),
    };
    let ne = a.effective_n() * b.effective_n() / (a.effective_n() + b.effective_n());
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    let p = kolmogorov_q(lambda);
    Ok(TestReport {
        statistic: d,
        p_value: p,
        n1: a.len(),
        n2: b.len(),
        method: TestMethod::Ks,
        level,
        pass: p > level,
    })
}

fn weighted_ks_distance(a: &EmpiricalLaw, b: &EmpiricalLaw) -> f64 {
    let sorted = |law: &EmpiricalLaw| -> Vec<(f64, f64)> {
        let w_total: f64 = match &law.weights {
            Some(w) => w.iter().sum(),
            None => law.samples.len() as f64,
        };
        let mut v: Vec<(f64, f64)> = law
            .samples
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, law.weights.as_ref().map_or(1.0, |w| w[i]) / w_total))
            .collect();
        v.sort_by(|p, q| p.0.total_cmp(&q.0));
        v
    };
    let xs = sorted(a);
    let ys = sorted(b);
    let (mut i, mut j) = (0usize, 0usize);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].0.min(ys[j].0);
        while i < xs.len() && xs[i].0 == v {
            fa += xs[i].1;
            i += 1;
        }
        while j < ys.len() && ys[j].0 == v {
            fb += ys[j].1;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    d
}

/// Two-sample Cramér–von Mises test.
///
/// The p-value interpolates the upper tail of the limiting distribution of
/// the normalized statistic; adequate for pass/fail gating at the usual
/// levels, not for fine p-value resolution.
pub fn cvm_two_sample(a: &EmpiricalLaw, b: &EmpiricalLaw, level: f64) -> Result<TestReport> {
    if a.len() < MIN_SAMPLES || b.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { need: MIN_SAMPLES, got: a.len().min(b.len()) });
    }
    let n = a.len();
    let m = b.len();
    let mut all: Vec<(f64, u8)> = a
        .samples
        .iter()
        .map(|&x| (x, 0u8))
        .chain(b.samples.iter().map(|&y| (y, 1u8)))
        .collect();
    all.sort_by(|p, q| p.0.total_cmp(&q.0));
    // T = n·m/(n+m)² Σ (F_n - G_m)² over the pooled sample.
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut acc = Kahan::new();
    for (_, tag) in &all {
        if *tag == 0 {
            fa += 1.0 / n as f64;
        } else {
            fb += 1.0 / m as f64;
        }
        acc.add((fa - fb) * (fa - fb));
    }
    let t = (n * m) as f64 / ((n + m) as f64 * (n + m) as f64) * acc.value();
    // Limiting-distribution quantiles of the two-sample CvM statistic
    // (Anderson 1962): (upper-tail probability, critical value).
    const TABLE: [(f64, f64); 9] = [
        (0.90, 0.0463),
        (0.75, 0.0737),
        (0.50, 0.1189),
        (0.25, 0.2090),
        (0.10, 0.3473),
        (0.05, 0.4614),
        (0.025, 0.5806),
        (0.01, 0.7435),
        (0.001, 1.1679),
    ];
    let p = if t <= TABLE[0].1 {
        1.0
    } else if t >= TABLE[TABLE.len() - 1].1 {
        TABLE[TABLE.len() - 1].0 / 2.0
    } else {
        // log-linear interpolation in the tail probability
        let mut p = TABLE[TABLE.len() - 1].0;
        for w in TABLE.windows(2) {
            let ((p0, t0), (p1, t1)) = (w[0], w[1]);
            if t >= t0 && t <= t1 {
                let frac = (t - t0) / (t1 - t0);
                p = (p0.ln() + frac * (p1.ln() - p0.ln())).exp();
                break;
            }
        }
        p
    };
    Ok(TestReport {
        statistic: t,
        p_value: p,
        n1: n,
        n2: m,
        method: TestMethod::Cvm,
        level,
        pass: p > level,
    })
}

/// Bivariate two-sample test: KS on 8 fixed projection directions with
/// Bonferroni correction. Conservative by construction.
pub fn bivariate_test(a: &EmpiricalLaw2, b: &EmpiricalLaw2, level: f64) -> Result<TestReport> {
    if a.samples.len() < MIN_SAMPLES || b.samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            need: MIN_SAMPLES,
            got: a.samples.len().min(b.samples.len()),
        });
    }
    let n_dirs = 8usize;
    let mut min_p = 1.0f64;
    let mut max_stat = 0.0f64;
    for k in 0..n_dirs {
        let theta = std::f64::consts::PI * k as f64 / n_dirs as f64;
        let (c, s) = (theta.cos(), theta.sin());
        let proj = |v: &[(f64, f64)]| -> Vec<f64> { v.iter().map(|&(x, y)| c * x + s * y).collect() };
        let pa = EmpiricalLaw::unweighted(proj(&a.samples), Seed::new(0), "proj");
        let pb = EmpiricalLaw::unweighted(proj(&b.samples), Seed::new(0), "proj");
        let rep = ks_two_sample(&pa, &pb, level)?;
        min_p = min_p.min(rep.p_value);
        max_stat = max_stat.max(rep.statistic);
    }
    let p = (min_p * n_dirs as f64).min(1.0);
    Ok(TestReport {
        statistic: max_stat,
        p_value: p,
        n1: a.samples.len(),
        n2: b.samples.len(),
        method: TestMethod::BivariateKsRotations,
        level,
        pass: p > level,
    })
}

/// Weighted mean with standard error, compensated summation throughout.
pub fn mc_mean(samples: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    match weights {
        None => {
            let mut s = Kahan::new();
            for &x in samples {
                s.add(x);
            }
            let mean = s.value() / n as f64;
            let mut v = Kahan::new();
            for &x in samples {
                v.add((x - mean) * (x - mean));
            }
            let var = if n > 1 { v.value() / (n as f64 - 1.0) } else { 0.0 };
            (mean, (var / n as f64).sqrt())
        }
        Some(w) => {
            assert_eq!(w.len(), n);
            let mut sw = Kahan::new();
            let mut swx = Kahan::new();
            for i in 0..n {
                sw.add(w[i]);
                swx.add(w[i] * samples[i]);
            }
            let wsum = sw.value();
            let mean = swx.value() / wsum;
            let mut v = Kahan::new();
            for i in 0..n {
                let d = samples[i] - mean;
                v.add(w[i] * w[i] * d * d);
            }
            (mean, v.value().sqrt() / wsum)
        }
    }
}

/// Pooled standard error of a difference of independent estimates.
pub fn pooled_se(se1: f64, se2: f64) -> f64 {
    (se1 * se1 + se2 * se2).sqrt()
}

/// Null rejection rate of the two-sample KS test at `level`: repeated
/// same-law draws from independent streams.
pub fn ks_null_rejection_rate(repeats: u64, n: usize, level: f64, seed: Seed) -> f64 {
    use rand::Rng;
    let rejects = crate::parallel::par_map(repeats, |r| {
        let draw = |sd: Seed| -> Vec<f64> {
            let mut rng = sd.rng();
            (0..n).map(|_| rng.random::<f64>()).collect()
        };
        let a = EmpiricalLaw::unweighted(draw(seed.subspace(2 * r)), seed, "a");
        let b = EmpiricalLaw::unweighted(draw(seed.subspace(2 * r + 1)), seed, "b");
        if ks_two_sample(&a, &b, level).unwrap().pass {
            0.0
        } else {
            1.0
        }
    });
    rejects.iter().sum::<f64>() / repeats as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ks_identical_samples() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let a = EmpiricalLaw::unweighted(xs.clone(), Seed::new(1), "a");
        let b = EmpiricalLaw::unweighted(xs, Seed::new(1), "b");
        let rep = ks_two_sample(&a, &b, 0.01).unwrap();
        assert_eq!(rep.statistic, 0.0);
        assert!((rep.p_value - 1.0).abs() < 1e-12);
        assert!(rep.pass);
    }

    #[test]
    fn ks_disjoint_supports() {
        let a = EmpiricalLaw::unweighted((0..200).map(|i| i as f64).collect(), Seed::new(1), "a");
        let b =
            EmpiricalLaw::unweighted((0..200).map(|i| 1000.0 + i as f64).collect(), Seed::new(2), "b");
        let rep = ks_two_sample(&a, &b, 0.01).unwrap();
        assert!((rep.statistic - 1.0).abs() < 1e-12);
        assert!(rep.p_value < 1e-6);
        assert!(!rep.pass);
    }

    #[test]
    fn ks_too_few_samples() {
        let a = EmpiricalLaw::unweighted(vec![1.0; 10], Seed::new(1), "a");
        let b = EmpiricalLaw::unweighted(vec![1.0; 10], Seed::new(2), "b");
        assert!(matches!(ks_two_sample(&a, &b, 0.01), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn ks_null_calibration_median() {
        // Two seeds of the same sampler: p-values should spread out; the
        // median over repeats must not collapse toward 0.
        let mut ps = Vec::new();
        for rep in 0..20u64 {
            let draw = |seed: u64| -> Vec<f64> {
                let mut rng = Seed::new(seed).rng();
                (0..300).map(|_| rng.random::<f64>()).collect()
            };
            let a = EmpiricalLaw::unweighted(draw(2 * rep), Seed::new(2 * rep), "a");
            let b = EmpiricalLaw::unweighted(draw(2 * rep + 1), Seed::new(2 * rep + 1), "b");
            ps.push(ks_two_sample(&a, &b, 0.01).unwrap().p_value);
        }
        ps.sort_by(f64::total_cmp);
        assert!(ps[10] > 0.2, "median null p-value {}", ps[10]);
    }

    #[test]
    fn cvm_sanity() {
        let mut rng = Seed::new(5).rng();
        let a: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let la = EmpiricalLaw::unweighted(a, Seed::new(5), "a");
        let lb = EmpiricalLaw::unweighted(b, Seed::new(5), "b");
        let rep = cvm_two_sample(&la, &lb, 0.01).unwrap();
        assert!(rep.pass, "null CvM rejected: {:?}", rep);
        let c: Vec<f64> = (0..400).map(|_| rng.random::<f64>() + 0.8).collect();
        let lc = EmpiricalLaw::unweighted(c, Seed::new(6), "c");
        let rep2 = cvm_two_sample(&la, &lc, 0.01).unwrap();
        assert!(!rep2.pass);
    }

    #[test]
    fn bivariate_identical_passes_and_shifted_fails() {
        let mut rng = Seed::new(9).rng();
        let mk = |rng: &mut rand_chacha::ChaCha8Rng, rho: f64| -> Vec<(f64, f64)> {
            (0..1500)
                .map(|_| {
                    let x: f64 = rand_distr::StandardNormal.sample(rng);
                    let z: f64 = rand_distr::StandardNormal.sample(rng);
                    (x, rho * x + (1.0 - rho * rho).sqrt() * z)
                })
                .collect()
        };
        use rand_distr::Distribution;
        let a = EmpiricalLaw2::new(mk(&mut rng, 0.0), Seed::new(9), "indep");
        let b = EmpiricalLaw2::new(mk(&mut rng, 0.0), Seed::new(9), "indep2");
        let c = EmpiricalLaw2::new(mk(&mut rng, 0.9), Seed::new(9), "corr");
        assert!(bivariate_test(&a, &b, 0.01).unwrap().pass);
        assert!(!bivariate_test(&a, &c, 0.01).unwrap().pass);
    }

    #[test]
    fn bivariate_rotation_invariance_on_isotropic_input() {
        // Rotating isotropic input must not change the verdict.
        use rand_distr::Distribution;
        let mut rng = Seed::new(11).rng();
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<(f64, f64)> {
            (0..1000)
                .map(|_| {
                    let x: f64 = rand_distr::StandardNormal.sample(rng);
                    let y: f64 = rand_distr::StandardNormal.sample(rng);
                    (x, y)
                })
                .collect()
        };
        let base = mk(&mut rng);
        let other = mk(&mut rng);
        let rot = |v: &[(f64, f64)], th: f64| -> Vec<(f64, f64)> {
            v.iter()
                .map(|&(x, y)| (th.cos() * x - th.sin() * y, th.sin() * x + th.cos() * y))
                .collect()
        };
        let a = EmpiricalLaw2::new(base.clone(), Seed::new(11), "a");
        let b = EmpiricalLaw2::new(other.clone(), Seed::new(11), "b");
        let ar = EmpiricalLaw2::new(rot(&base, 0.7), Seed::new(11), "ar");
        let br = EmpiricalLaw2::new(rot(&other, 0.7), Seed::new(11), "br");
        let p0 = bivariate_test(&a, &b, 0.01).unwrap();
        let p1 = bivariate_test(&ar, &br, 0.01).unwrap();
        assert_eq!(p0.pass, p1.pass);
    }

    #[test]
    fn mc_mean_constants_have_zero_stderr() {
        let (m, se) = mc_mean(&[3.0; 100], None);
        assert_eq!(m, 3.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn mc_mean_bernoulli_within_four_stderr() {
        let mut rng = Seed::new(123).rng();
        let xs: Vec<f64> =
            (0..20000).map(|_| if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 }).collect();
        let (m, se) = mc_mean(&xs, None);
        assert!((m - 0.5).abs() < 4.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn mc_mean_weighted_matches_replication() {
        // weight 2 == sample appearing twice (for the mean)
        let xs = vec![1.0, 2.0, 3.0];
        let (m, _) = mc_mean(&xs, Some(&[1.0, 2.0, 1.0]));
        let (m2, _) = mc_mean(&[1.0, 2.0, 2.0, 3.0], None);
        assert!((m - m2).abs() < 1e-14);
    }
}
