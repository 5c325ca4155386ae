//! Aggregation of path weights into the importance-sampling ruin estimate,
//! efficiency and total-variation diagnostics, the crude Monte Carlo oracle,
//! and weighted-vs-crude conditional-law comparisons.
//!
//! Parallel execution contract: the master seed plus the global path index
//! determines each path's random stream, chunks are folded in index order,
//! and results are bit-identical for any worker count.

use crate::error::{Result, RuinError};
use crate::kernel::{PathRecord, Simulator, StopCause};
use crate::rng::{path_rng, purpose};
use crate::stats::{ks_two_sample, weighted_resample_indices};
use crate::vecops::dot;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK: u64 = 4096;
const OVERFLOW_ABORT: f64 = 1e-3;

/// Point estimate of the ruin probability with efficiency diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuinEstimate {
    pub b: f64,
    pub n_paths: u64,
    pub seed: u64,
    /// Mean of W = exp(log_weight) I(HitA): unbiased for P_0(T_bA <= T_bGamma).
    pub p_hat: f64,
    /// Same weights restricted to paths whose terminal state lies in bA*;
    /// biased-low proxy for the unenlarged ruin probability.
    pub p_hat_star: f64,
    pub var_hat: f64,
    pub rel_err: f64,
    /// mean(W^2)/mean(W)^2; the Lyapunov second-moment ratio.
    pub m2_ratio: f64,
    /// Delta-method standard error of m2_ratio.
    pub m2_se: f64,
    /// sqrt(max(0, m2_ratio - 1)): total-variation bound on the distance
    /// between the sampling law and the conditional law.
    pub tv_bound: f64,
    pub overflow_frac: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    n_hit: u64,
    n_overflow: u64,
    w1: f64,
    w2: f64,
    w3: f64,
    w4: f64,
    w1_star: f64,
}

impl Moments {
    fn absorb(&mut self, o: &Moments) {
        self.n += o.n;
        self.n_hit += o.n_hit;
        self.n_overflow += o.n_overflow;
        self.w1 += o.w1;
        self.w2 += o.w2;
        self.w3 += o.w3;
        self.w4 += o.w4;
        self.w1_star += o.w1_star;
    }
}

fn run_pool<R: Send>(workers: usize, job: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        job()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool")
            .install(job)
    }
}

/// Apply `f` to every simulated path, in deterministic path-index order.
pub fn map_paths<T, F>(
    sim: &Simulator,
    b: f64,
    n_paths: u64,
    seed: u64,
    workers: usize,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &PathRecord) -> T + Sync,
{
    let n_chunks = n_paths.div_ceil(CHUNK);
    run_pool(workers, || {
        let chunks: Vec<Result<Vec<T>>> = (0..n_chunks)
            .into_par_iter()
            .map(|ci| {
                let lo = ci * CHUNK;
                let hi = ((ci + 1) * CHUNK).min(n_paths);
                let mut out = Vec::with_capacity((hi - lo) as usize);
                for idx in lo..hi {
                    let mut rng = path_rng(seed, purpose::PATHS, idx);
                    let rec = sim.simulate_path(b, &mut rng)?;
                    out.push(f(idx, &rec));
                }
                Ok(out)
            })
            .collect();
        let mut all = Vec::with_capacity(n_paths as usize);
        for c in chunks {
            all.extend(c?);
        }
        Ok(all)
    })
}

/// Importance-sampling estimate of the ruin probability from n_paths
/// trajectories of the mixture kernel.
pub fn estimate_ruin(
    sim: &Simulator,
    b: f64,
    n_paths: u64,
    seed: u64,
    workers: usize,
) -> Result<RuinEstimate> {
    if n_paths < 2 {
        return Err(RuinError::PreconditionViolation("need n_paths >= 2".into()));
    }
    let start = std::time::Instant::now();
    let n_chunks = n_paths.div_ceil(CHUNK);
    let total = run_pool(workers, || -> Result<Moments> {
        let partials: Vec<Result<Moments>> = (0..n_chunks)
            .into_par_iter()
            .map(|ci| {
                let lo = ci * CHUNK;
                let hi = ((ci + 1) * CHUNK).min(n_paths);
                let mut m = Moments::default();
                for idx in lo..hi {
                    let mut rng = path_rng(seed, purpose::PATHS, idx);
                    let rec = sim.simulate_path(b, &mut rng)?;
                    m.n += 1;
                    match rec.stop_cause {
                        StopCause::HitA => {
                            m.n_hit += 1;
                            let w = rec.log_weight.exp();
                            m.w1 += w;
                            m.w2 += w * w;
                            m.w3 += w * w * w;
                            m.w4 += w * w * w * w;
                            if rec.hit_astar {
                                m.w1_star += w;
                            }
                        }
                        StopCause::HorizonOverflow => m.n_overflow += 1,
                        StopCause::HitGamma => {}
                    }
                }
                Ok(m)
            })
            .collect();
        let mut total = Moments::default();
        for p in partials {
            total.absorb(&p?);
        }
        Ok(total)
    })?;

    let n = total.n as f64;
    let overflow_frac = total.n_overflow as f64 / n;
    if overflow_frac > OVERFLOW_ABORT {
        return Err(RuinError::AbortOverflow { frac: overflow_frac });
    }
    let mu1 = total.w1 / n;
    let mu2 = total.w2 / n;
    let mu3 = total.w3 / n;
    let mu4 = total.w4 / n;
    let var_hat = (total.w2 - n * mu1 * mu1) / (n - 1.0);
    let rel_err = if mu1 > 0.0 { (var_hat / n).sqrt() / mu1 } else { f64::INFINITY };
    let (m2_ratio, m2_se) = if mu1 > 0.0 {
        let m2 = mu2 / (mu1 * mu1);
        // delta method for g(mu1, mu2) = mu2 / mu1^2
        let var_w = mu2 - mu1 * mu1;
        let var_w2 = mu4 - mu2 * mu2;
        let cov = mu3 - mu1 * mu2;
        let var_m2 = (4.0 * mu2 * mu2 * var_w / mu1.powi(6)
            - 4.0 * mu2 * cov / mu1.powi(5)
            + var_w2 / mu1.powi(4))
            / n;
        (m2, var_m2.max(0.0).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(RuinEstimate {
        b,
        n_paths,
        seed,
        p_hat: mu1,
        p_hat_star: total.w1_star / n,
        var_hat,
        rel_err,
        m2_ratio,
        m2_se,
        tv_bound: (m2_ratio - 1.0).max(0.0).sqrt(),
        overflow_frac,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Crude Monte Carlo frequency of {T_bA <= T_bGamma} under the nominal walk
/// (the theta = 0 pipeline shares the path sampler bit for bit).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrudeEstimate {
    pub b: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub p_hat: f64,
    pub std_err: f64,
    pub overflow_frac: f64,
}

pub fn crude_frequency(
    sim: &Simulator,
    b: f64,
    n_paths: u64,
    seed: u64,
    workers: usize,
) -> Result<CrudeEstimate> {
    let crude = sim.with_theta(0.0);
    let est = estimate_ruin(&crude, b, n_paths, seed, workers)?;
    Ok(CrudeEstimate {
        b,
        n_paths,
        seed,
        p_hat: est.p_hat,
        std_err: (est.var_hat / n_paths as f64).sqrt(),
        overflow_frac: est.overflow_frac,
    })
}

/// Nominal-walk paths conditioned on hitting bA* before bGamma, by rejection.
/// A pilot run guards against infeasibly small hit frequencies.
pub fn crude_conditional_sample(
    sim: &Simulator,
    b: f64,
    n_hits_wanted: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<PathRecord>> {
    const FREQ_FLOOR: f64 = 1e-6;
    const PILOT: u64 = 200_000;
    if n_hits_wanted == 0 {
        return Ok(Vec::new());
    }
    let nominal = sim.with_theta(0.0);
    // Analytic screen before burning simulation time: v*_b(0) = E r*_b(X)^+
    // approximates the hit probability from above at large b, so a value an
    // order of magnitude below the floor is a sure reject.
    let v_star0 = {
        let dots = sim.model.dot_matrix(&sim.target.vstar);
        let j = sim.target.m();
        let base: Vec<f64> = sim
            .target
            .vstar
            .iter()
            .zip(&sim.target.astar)
            .map(|(v, a)| dot(&sim.model.shift, v) - a * b)
            .collect();
        let mut lines: Vec<crate::numerics::Line> =
            (0..j).map(|jj| crate::numerics::Line::new(dots[jj], base[jj])).collect();
        lines.push(crate::numerics::Line::new(0.0, 0.0));
        crate::numerics::pareto_expect_envelope(
            sim.model.alpha,
            sim.model.xm,
            &crate::numerics::upper_envelope(&lines),
        )
    };
    if sim.model.is_pure_radial() && v_star0 < 0.1 * FREQ_FLOOR {
        return Err(RuinError::InfeasibleOracle { pilot_freq: v_star0, floor: FREQ_FLOOR });
    }
    let star_path = |idx: u64, purpose_tag: u64| -> Result<Option<PathRecord>> {
        let mut rng = path_rng(seed, purpose_tag, idx);
        let d = nominal.model.dim;
        let cap = nominal.horizon(b);
        let mut s = vec![0.0; d];
        let mut states = Vec::with_capacity(32 * d);
        states.extend_from_slice(&s);
        let mut steps = 0usize;
        loop {
            if nominal.target.r_star(b, &s) > 0.0 {
                return Ok(Some(PathRecord {
                    dim: d,
                    states,
                    stop_cause: StopCause::HitA,
                    n_jump: None,
                    log_weight: 0.0,
                    hit_astar: true,
                }));
            }
            if nominal.target.gamma_exit(b, &s) || steps >= cap {
                return Ok(None);
            }
            let x = nominal.model.sample(&mut rng);
            for (si, xi) in s.iter_mut().zip(&x) {
                *si += xi;
            }
            steps += 1;
            states.extend_from_slice(&s);
        }
    };

    // pilot estimate of the hit frequency
    let pilot_hits = run_pool(workers, || -> Result<u64> {
        let counts: Vec<Result<u64>> = (0..PILOT.div_ceil(CHUNK))
            .into_par_iter()
            .map(|ci| {
                let lo = ci * CHUNK;
                let hi = ((ci + 1) * CHUNK).min(PILOT);
                let mut hits = 0;
                for idx in lo..hi {
                    if star_path(idx, purpose::PILOT)?.is_some() {
                        hits += 1;
                    }
                }
                Ok(hits)
            })
            .collect();
        let mut total = 0;
        for c in counts {
            total += c?;
        }
        Ok(total)
    })?;
    let pilot_freq = pilot_hits as f64 / PILOT as f64;
    if pilot_freq < FREQ_FLOOR {
        return Err(RuinError::InfeasibleOracle { pilot_freq, floor: FREQ_FLOOR });
    }

    let mut accepted = Vec::with_capacity(n_hits_wanted);
    let mut next_index = 0u64;
    while accepted.len() < n_hits_wanted {
        let deficit = (n_hits_wanted - accepted.len()) as f64;
        let batch = ((2.0 * deficit / pilot_freq) as u64).clamp(CHUNK, 50_000_000);
        let lo_batch = next_index;
        next_index += batch;
        let found = run_pool(workers, || -> Result<Vec<(u64, PathRecord)>> {
            let chunks: Vec<Result<Vec<(u64, PathRecord)>>> = (0..batch.div_ceil(CHUNK))
                .into_par_iter()
                .map(|ci| {
                    let lo = lo_batch + ci * CHUNK;
                    let hi = (lo + CHUNK).min(lo_batch + batch);
                    let mut out = Vec::new();
                    for idx in lo..hi {
                        if let Some(rec) = star_path(idx, purpose::ORACLE)? {
                            out.push((idx, rec));
                        }
                    }
                    Ok(out)
                })
                .collect();
            let mut all = Vec::new();
            for c in chunks {
                all.extend(c?);
            }
            Ok(all)
        })?;
        for (_, rec) in found {
            if accepted.len() < n_hits_wanted {
                accepted.push(rec);
            }
        }
        if next_index > 4_000_000_000 {
            return Err(RuinError::InfeasibleOracle { pilot_freq, floor: FREQ_FLOOR });
        }
    }
    Ok(accepted)
}

/// One row of the total-variation diagnostic curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TvPoint {
    pub b: f64,
    pub p_hat: f64,
    pub rel_err: f64,
    pub m2_ratio: f64,
    pub m2_se: f64,
    pub tv_bound: f64,
}

/// Second-moment ratio and TV bound across a list of scales; each scale gets
/// an independent derived seed.
pub fn tv_diagnostic_curve(
    sim: &Simulator,
    b_list: &[f64],
    n_paths: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<TvPoint>> {
    b_list
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let seed_b = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let est = estimate_ruin(sim, b, n_paths, seed_b, workers)?;
            Ok(TvPoint {
                b,
                p_hat: est.p_hat,
                rel_err: est.rel_err,
                m2_ratio: est.m2_ratio,
                m2_se: est.m2_se,
                tv_bound: est.tv_bound,
            })
        })
        .collect()
}

/// Scalar functionals of a stopped path used in conditional-law comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathFunctional {
    /// T / b
    TimeOverB,
    /// max_j (S_T' v_j* - a_j* b) / b, the terminal overshoot of the original
    /// system.
    OvershootOverB,
    /// N_b / b (first jump index; NaN when no jump occurred).
    JumpIndexOverB,
}

pub fn path_functional(sim: &Simulator, b: f64, rec: &PathRecord, which: PathFunctional) -> f64 {
    match which {
        PathFunctional::TimeOverB => rec.steps() as f64 / b,
        PathFunctional::OvershootOverB => {
            let s = rec.terminal();
            let m = sim
                .target
                .vstar
                .iter()
                .zip(&sim.target.astar)
                .map(|(v, a)| dot(s, v) - a * b)
                .fold(f64::NEG_INFINITY, f64::max);
            m / b
        }
        PathFunctional::JumpIndexOverB => {
            rec.n_jump.map(|n| n as f64 / b).unwrap_or(f64::NAN)
        }
    }
}

/// Two-sample KS distance between the weighted IS sample (converted to an
/// unweighted sample by multinomial resampling proportional to W) and the
/// crude conditional sample.
pub fn conditional_law_distance(
    is_values: &[f64],
    is_weights: &[f64],
    crude_values: &[f64],
    resample_n: usize,
    seed: u64,
) -> Result<f64> {
    if is_values.is_empty() || crude_values.is_empty() {
        return Err(RuinError::InsufficientSample {
            got: is_values.len().min(crude_values.len()),
            need: 1,
        });
    }
    let mut rng = path_rng(seed, purpose::RESAMPLE, 0);
    let idx = weighted_resample_indices(is_weights, resample_n, &mut rng);
    let resampled: Vec<f64> = idx.into_iter().map(|i| is_values[i]).collect();
    Ok(ks_two_sample(&resampled, crude_values))
}
