//! Seeded Monte Carlo for the threshold policy and the prophet benchmark.
//!
//! Draws are made in quantile space: each trial takes uniforms `u_i` and
//! maps them through `f(u) = F^{-1}(1 - u)`, so a value clears the threshold
//! `f(q)` exactly when `u_i <= q` (after tie-breaking), and the `k` largest
//! values are the images of the `k` smallest uniforms.
//!
//! Trial `t` uses its own ChaCha8 stream `t` under the configured seed and
//! trials are reduced chunk by chunk in index order, so results do not
//! depend on the thread count.

use std::collections::BinaryHeap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binom::SelectionInstance;
use crate::distribution::DistributionSpec;
use crate::error::{domain, Error, Result};

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Compare values: every draw equal to the threshold value is accepted.
    None,
    /// Compare the underlying uniforms: an independent perturbation ranks
    /// threshold-equal draws, reproducing the continuous quantile model.
    #[default]
    UniformNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub tie_break: TieBreak,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            tie_break: TieBreak::default(),
            threads: None,
        }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return domain("need at least two trials for a standard error");
        }
        if self.threads == Some(0) {
            return domain("thread count must be positive");
        }
        Ok(())
    }

    fn run<R: Send>(&self, job: impl FnOnce() -> R + Send) -> Result<R> {
        match self.threads {
            None => Ok(job()),
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::Internal(e.to_string()))?;
                Ok(pool.install(job))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl McEstimate {
    /// `(mean - reference) / stderr`; zero when both coincide exactly.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = self.mean - reference;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub q: f64,
    pub ratio: f64,
    pub stderr: f64,
}

/// All estimates from one common-random-numbers run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEstimate {
    pub quantiles: Vec<f64>,
    pub alg: Vec<McEstimate>,
    pub opt: McEstimate,
    pub ratio: Vec<RatioPoint>,
}

#[derive(Clone)]
struct Moments {
    alg: Vec<f64>,
    alg_sq: Vec<f64>,
    alg_opt: Vec<f64>,
    opt: f64,
    opt_sq: f64,
}

impl Moments {
    fn zero(nq: usize) -> Self {
        Self {
            alg: vec![0.0; nq],
            alg_sq: vec![0.0; nq],
            alg_opt: vec![0.0; nq],
            opt: 0.0,
            opt_sq: 0.0,
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        for j in 0..self.alg.len() {
            self.alg[j] += other.alg[j];
            self.alg_sq[j] += other.alg_sq[j];
            self.alg_opt[j] += other.alg_opt[j];
        }
        self.opt += other.opt;
        self.opt_sq += other.opt_sq;
        self
    }
}

fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    // (0, 1): never maps to an infinite quantile
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

struct Sampler<'a> {
    dist: &'a DistributionSpec<f64>,
    m: usize,
    n: usize,
    k: usize,
    quantiles: &'a [f64],
    thresholds: Vec<f64>,
    tie_break: TieBreak,
    with_opt: bool,
}

impl Sampler<'_> {
    fn accepts(&self, u: f64, value: f64, j: usize) -> bool {
        match self.tie_break {
            TieBreak::UniformNoise => u <= self.quantiles[j],
            TieBreak::None => value >= self.thresholds[j],
        }
    }

    fn chunk(&self, seed: u64, chunk: u64, total: u64, nq: usize) -> Moments {
        let mut acc = Moments::zero(nq);
        let mut us = vec![0.0; self.m.max(self.n)];
        let mut taken = vec![0usize; nq];
        let mut alg = vec![0.0; nq];
        let mut heap: BinaryHeap<OrdF64> = BinaryHeap::with_capacity(self.k + 1);
        let start = chunk * CHUNK;
        let end = (start + CHUNK).min(total);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for trial in start..end {
            rng.set_stream(trial);
            rng.set_word_pos(0);
            for u in us.iter_mut() {
                *u = open_uniform(&mut rng);
            }
            taken.iter_mut().for_each(|t| *t = 0);
            alg.iter_mut().for_each(|a| *a = 0.0);
            for &u in &us[..self.m] {
                let value = self.dist.upper_quantile(u);
                for j in 0..nq {
                    if taken[j] < self.k && self.accepts(u, value, j) {
                        taken[j] += 1;
                        alg[j] += value;
                    }
                }
            }
            let mut opt = 0.0;
            if self.with_opt {
                heap.clear();
                // keep the k smallest uniforms in a max-heap
                for &u in &us[..self.n] {
                    if heap.len() < self.k {
                        heap.push(OrdF64(u));
                    } else if u < heap.peek().expect("nonempty").0 {
                        heap.pop();
                        heap.push(OrdF64(u));
                    }
                }
                opt = heap.iter().map(|u| self.dist.upper_quantile(u.0)).sum();
            }
            for (j, &a) in alg.iter().enumerate() {
                acc.alg[j] += a;
                acc.alg_sq[j] += a * a;
                acc.alg_opt[j] += a * opt;
            }
            acc.opt += opt;
            acc.opt_sq += opt * opt;
        }
        acc
    }
}

#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn estimate(sum: f64, sum_sq: f64, trials: u64) -> McEstimate {
    let n = trials as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    McEstimate {
        mean,
        stderr: (var / n).sqrt(),
        trials,
    }
}

fn run_joint(
    dist: &DistributionSpec<f64>,
    m: u64,
    n: u64,
    k: u64,
    quantiles: &[f64],
    cfg: &McConfig,
    with_opt: bool,
) -> Result<JointEstimate> {
    cfg.validate()?;
    dist.validate()?;
    if k < 1 || m < k || n < k {
        return domain(format!("need m, n >= k >= 1, got m = {m}, n = {n}, k = {k}"));
    }
    if let Some(q) = quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return domain(format!("quantile must lie in [0, 1], got {q}"));
    }
    let sampler = Sampler {
        dist,
        m: m as usize,
        n: if with_opt { n as usize } else { 0 },
        k: k as usize,
        quantiles,
        thresholds: quantiles.iter().map(|&q| dist.upper_quantile(q)).collect(),
        tie_break: cfg.tie_break,
        with_opt,
    };
    let nq = quantiles.len();
    let chunks = cfg.trials.div_ceil(CHUNK);
    let parts: Vec<Moments> = cfg.run(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| sampler.chunk(cfg.seed, c, cfg.trials, nq))
            .collect()
    })?;
    let total = parts.iter().fold(Moments::zero(nq), |acc, p| acc.merge(p));
    let t = cfg.trials;
    let tf = t as f64;
    let opt = estimate(total.opt, total.opt_sq, t);
    let alg: Vec<McEstimate> = (0..nq)
        .map(|j| estimate(total.alg[j], total.alg_sq[j], t))
        .collect();
    let ratio = (0..nq)
        .map(|j| {
            let (ma, mo) = (alg[j].mean, opt.mean);
            let var_a = alg[j].stderr * alg[j].stderr * tf;
            let var_o = opt.stderr * opt.stderr * tf;
            let cov = (total.alg_opt[j] - tf * ma * mo) / (tf - 1.0);
            let var = (var_a / (mo * mo) - 2.0 * ma * cov / mo.powi(3) + ma * ma * var_o / mo.powi(4)) / tf;
            RatioPoint {
                q: quantiles[j],
                ratio: ma / mo,
                stderr: var.max(0.0).sqrt(),
            }
        })
        .collect();
    Ok(JointEstimate {
        quantiles: quantiles.to_vec(),
        alg,
        opt,
        ratio,
    })
}

/// Expected reward of accepting, in arrival order, the first `k` of `m`
/// draws that clear the threshold `f(q)`.
pub fn simulate_threshold(
    dist: &DistributionSpec<f64>,
    m: u64,
    k: u64,
    q: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    Ok(run_joint(dist, m, k, k, &[q], cfg, false)?.alg[0])
}

/// Expected sum of the `k` largest of `n` draws.
pub fn simulate_prophet(dist: &DistributionSpec<f64>, n: u64, k: u64, cfg: &McConfig) -> Result<McEstimate> {
    Ok(run_joint(dist, k, n, k, &[], cfg, true)?.opt)
}

/// Threshold rewards at several quantiles and the prophet value from one set
/// of draws: ALG uses the first `m` uniforms of a trial, OPT the first `n`.
pub fn simulate_joint(
    dist: &DistributionSpec<f64>,
    inst: &SelectionInstance,
    quantiles: &[f64],
    cfg: &McConfig,
) -> Result<JointEstimate> {
    run_joint(dist, inst.m(), inst.n(), inst.k(), quantiles, cfg, true)
}

/// ALG/OPT on the grid `i / (q_grid - 1)`, with common random numbers.
pub fn empirical_ratio_scan(
    dist: &DistributionSpec<f64>,
    inst: &SelectionInstance,
    q_grid: usize,
    cfg: &McConfig,
) -> Result<Vec<RatioPoint>> {
    if q_grid < 2 {
        return domain("quantile grid needs at least two points");
    }
    let last = (q_grid - 1) as f64;
    let qs: Vec<f64> = (0..q_grid).map(|i| i as f64 / last).collect();
    Ok(simulate_joint(dist, inst, &qs, cfg)?.ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binom::Quantile;
    use crate::ratio::{alg_value, opt_value};

    #[test]
    fn threshold_examples() {
        let u = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let cfg = McConfig::new(200_000, 3);
        let e = simulate_threshold(&u, 1, 1, 1.0, &cfg).unwrap();
        assert!(e.z_score(0.5).abs() < 4.0);
        let e = simulate_threshold(&u, 10, 1, 0.1, &cfg).unwrap();
        let closed = (1.0 - 0.9f64.powi(10)) * 0.95;
        assert!(e.z_score(closed).abs() < 4.0, "{e:?} vs {closed}");
        let atom = DistributionSpec::atom_worst_case(0.2, 0.5, 0.05).unwrap();
        let q = 0.25;
        let reference = alg_value(&atom, 8, 2, Quantile::new(q).unwrap()).unwrap();
        let e = simulate_threshold(&atom, 8, 2, q, &cfg).unwrap();
        assert!(e.z_score(reference).abs() < 4.0);
    }

    #[test]
    fn prophet_examples() {
        let cfg = McConfig::new(200_000, 5);
        let u = DistributionSpec::uniform(0.0, 1.0).unwrap();
        assert!(simulate_prophet(&u, 2, 1, &cfg).unwrap().z_score(2.0 / 3.0).abs() < 4.0);
        let e = DistributionSpec::exponential(1.0).unwrap();
        let oracle = (1.0 + 0.5 + 1.0 / 3.0) + (0.5 + 1.0 / 3.0);
        assert!(simulate_prophet(&e, 3, 2, &cfg).unwrap().z_score(oracle).abs() < 4.0);
        let r = simulate_prophet(&e, 4, 4, &cfg).unwrap();
        assert!(r.z_score(opt_value(&e, 4, 4).unwrap()).abs() < 4.0);
    }

    #[test]
    fn deterministic_across_threads() {
        let d = DistributionSpec::pareto(3.0, 1.0).unwrap();
        let inst = SelectionInstance::new(6, 5, 2).unwrap();
        let a = simulate_joint(&d, &inst, &[0.2, 0.4], &McConfig::new(20_000, 9).with_threads(1)).unwrap();
        let b = simulate_joint(&d, &inst, &[0.2, 0.4], &McConfig::new(20_000, 9).with_threads(3)).unwrap();
        assert_eq!(a, b);
        let c = simulate_joint(&d, &inst, &[0.2, 0.4], &McConfig::new(20_000, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn accept_all_is_exact() {
        // m = k = n with q = 1: ALG takes everything, as does OPT
        let u = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let inst = SelectionInstance::new(3, 3, 3).unwrap();
        let j = simulate_joint(&u, &inst, &[1.0], &McConfig::new(10_000, 1)).unwrap();
        assert!((j.ratio[0].ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn atom_tie_breaking() {
        // threshold at the atom's upper end: noise keeps the quantile model,
        // value comparison accepts the whole atom
        let atom = DistributionSpec::atom_worst_case(0.0, 1.0, 0.5).unwrap();
        let cfg = McConfig::new(100_000, 2);
        let noisy = simulate_threshold(&atom, 1, 1, 0.3, &cfg).unwrap();
        assert!(noisy.z_score(0.3).abs() < 4.0);
        let plain = simulate_threshold(&atom, 1, 1, 0.3, &cfg.with_tie_break(TieBreak::None)).unwrap();
        assert_eq!(plain.mean, 1.0);
    }

    #[test]
    fn invalid_inputs() {
        let u = DistributionSpec::uniform(0.0, 1.0).unwrap();
        assert!(simulate_threshold(&u, 3, 1, 1.5, &McConfig::new(10, 1)).is_err());
        assert!(simulate_threshold(&u, 3, 1, 0.5, &McConfig::new(1, 1)).is_err());
        assert!(simulate_prophet(&u, 1, 2, &McConfig::new(10, 1)).is_err());
        let inst = SelectionInstance::new(3, 3, 1).unwrap();
        assert!(empirical_ratio_scan(&u, &inst, 1, &McConfig::new(10, 1)).is_err());
    }
}
