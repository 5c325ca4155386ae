//! Mollified Lyapunov machinery: the log-sum-exp smoothing of the boundary
//! functional, the C^1 positive-part mollifier, the smoothed value function
//! H_b and its gradient, and the numerical one-step drift verification
//! J1 + J2 <= 1 that underpins the total-variation guarantee.

use crate::error::{Result, RuinError};
use crate::geometry::EnlargedSystem;
use crate::kernel::Simulator;
use crate::numerics::{adaptive_simpson, log_sum_exp, pareto_partial_affine, Line};
use crate::vecops::dot;
use rand::Rng;

/// Mollification constants. The smoothing scale c0 depends on b through
/// c0(b) = max(b^((3-alpha)/2), c0_tilde).
#[derive(Debug, Clone, Copy)]
pub struct MollifierParams {
    pub c0_tilde: f64,
    pub delta0: f64,
    pub c1: f64,
}

impl MollifierParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0_tilde > 0.0) {
            return Err(RuinError::Validation("c0_tilde must be positive".into()));
        }
        if !(self.delta0 > 0.0) {
            return Err(RuinError::Validation("delta0 must be positive".into()));
        }
        if !(self.c1 > 1.0) {
            return Err(RuinError::Validation("c1 must exceed 1".into()));
        }
        Ok(())
    }

    pub fn c0(&self, b: f64, alpha: f64) -> f64 {
        b.powf(0.5 * (3.0 - alpha)).max(self.c0_tilde)
    }
}

/// rho_b(s) = c0 log sum_j exp((s'v_j - a_j b)/c0), the smooth max.
pub fn rho_b(system: &EnlargedSystem, b: f64, c0: f64, s: &[f64]) -> f64 {
    debug_assert!(c0 > 0.0);
    let terms: Vec<f64> =
        system.vs.iter().zip(&system.offs).map(|(v, a)| (dot(s, v) - a * b) / c0).collect();
    c0 * log_sum_exp(&terms)
}

/// Softmax weights w_j(s) of the smooth max; they sum to one.
pub fn softmax_weights(system: &EnlargedSystem, b: f64, c0: f64, s: &[f64]) -> Vec<f64> {
    let terms: Vec<f64> =
        system.vs.iter().zip(&system.offs).map(|(v, a)| (dot(s, v) - a * b) / c0).collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = terms.iter().map(|&t| (t - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// grad rho_b(s) = sum_j v_j w_j(s).
pub fn rho_grad(system: &EnlargedSystem, b: f64, c0: f64, s: &[f64]) -> Vec<f64> {
    let w = softmax_weights(system, b, c0, s);
    let d = system.dim;
    let mut g = vec![0.0; d];
    for (vj, wj) in system.vs.iter().zip(&w) {
        for (gi, vi) in g.iter_mut().zip(vj) {
            *gi += wj * vi;
        }
    }
    g
}

/// Hessian of rho_b (row-major d x d):
/// (sum_j w_j v_j v_j' - m m') / c0 with m = sum_j w_j v_j.
pub fn rho_hessian(system: &EnlargedSystem, b: f64, c0: f64, s: &[f64]) -> Vec<f64> {
    let w = softmax_weights(system, b, c0, s);
    let d = system.dim;
    let mut m = vec![0.0; d];
    for (vj, wj) in system.vs.iter().zip(&w) {
        for (mi, vi) in m.iter_mut().zip(vj) {
            *mi += wj * vi;
        }
    }
    let mut h = vec![0.0; d * d];
    for (vj, wj) in system.vs.iter().zip(&w) {
        for i in 0..d {
            for l in 0..d {
                h[i * d + l] += wj * vj[i] * vj[l];
            }
        }
    }
    for i in 0..d {
        for l in 0..d {
            h[i * d + l] = (h[i * d + l] - m[i] * m[l]) / c0;
        }
    }
    h
}

/// The C^1 positive-part mollifier: 0 below -delta0, quadratic blend on
/// [-delta0, delta0], identity above.
pub fn d_mollify(delta0: f64, x: f64) -> f64 {
    if x <= -delta0 {
        0.0
    } else if x >= delta0 {
        x
    } else {
        (x + delta0) * (x + delta0) / (4.0 * delta0)
    }
}

pub fn d_prime(delta0: f64, x: f64) -> f64 {
    if x < -delta0 {
        0.0
    } else if x > delta0 {
        1.0
    } else {
        (x + delta0) / (2.0 * delta0)
    }
}

/// Monte Carlo estimate of H_b(s) = E d(rho_b(s + X)) with standard error.
pub fn h_mc<R: Rng>(
    sim: &Simulator,
    b: f64,
    moll: &MollifierParams,
    s: &[f64],
    n_mc: usize,
    rng: &mut R,
) -> (f64, f64) {
    let c0 = moll.c0(b, sim.model.alpha);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut sx = vec![0.0; sim.model.dim];
    for _ in 0..n_mc {
        let x = sim.model.sample(rng);
        for ((t, si), xi) in sx.iter_mut().zip(s).zip(&x) {
            *t = si + xi;
        }
        let val = d_mollify(moll.delta0, rho_b(&sim.system, b, c0, &sx));
        sum += val;
        sumsq += val * val;
    }
    let n = n_mc as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// Deterministic H_b(s) for the pure-radial model: per atom, the integrand
/// d(rho_b(s + c + r theta)) is integrated adaptively against the Pareto
/// density up to a cut beyond which the dominant affine term is exact (the
/// smooth max collapses and the mollifier is the identity), then in closed
/// form. Relative accuracy ~1e-8.
pub fn h_quadrature(sim: &Simulator, b: f64, moll: &MollifierParams, s: &[f64]) -> Result<f64> {
    if !sim.model.is_pure_radial() {
        return Err(RuinError::PreconditionViolation(
            "deterministic H_b needs the pure-radial model; use h_mc".into(),
        ));
    }
    let model = &sim.model;
    let system = &sim.system;
    let alpha = model.alpha;
    let xm = model.xm;
    let c0 = moll.c0(b, alpha);
    let d0 = moll.delta0;
    let mut total = 0.0f64;
    for k in 0..model.spectral.len() {
        let th = model.spectral.dir(k);
        // affine summands of rho along the atom ray, merged by equal slope
        // (LSE of equal-slope lines is one line with a blended intercept)
        let mut raw: Vec<(f64, f64)> = system
            .vs
            .iter()
            .zip(&system.offs)
            .map(|(v, a)| (dot(th, v), dot(s, v) + dot(&model.shift, v) - a * b))
            .collect();
        raw.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        let mut lines: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        let mut i = 0;
        while i < raw.len() {
            let slope = raw[i].0;
            let mut group = Vec::new();
            while i < raw.len() && raw[i].0 == slope {
                group.push(raw[i].1 / c0);
                i += 1;
            }
            lines.push((slope, c0 * log_sum_exp(&group)));
        }
        let nlines = lines.len() as f64;
        let rho = |r: f64| -> f64 {
            let terms: Vec<f64> = lines.iter().map(|&(dj, gj)| (gj + dj * r) / c0).collect();
            c0 * log_sum_exp(&terms)
        };
        let integrand = |r: f64| d_mollify(d0, rho(r)) * alpha * xm.powf(alpha) * r.powf(-alpha - 1.0);
        let margin = 40.0 * c0 + c0 * nlines.ln();
        let &(dstar, gstar) = lines.last().unwrap();
        let (head_end, tail) = if dstar > 0.0 {
            // cut where the top line dominates all others by `margin` and
            // clears the mollifier blend zone
            let mut rcut = xm.max((d0 + margin - gstar) / dstar);
            for &(dj, gj) in &lines[..lines.len() - 1] {
                rcut = rcut.max((margin + gj - gstar) / (dstar - dj));
            }
            let tail = pareto_partial_affine(alpha, xm, Line::new(dstar, gstar), rcut.max(xm), f64::INFINITY);
            (rcut.max(xm), tail)
        } else {
            // rho is non-increasing in r; expand until the tail bound is
            // negligible or exactly zero
            let mut rcut = (2.0 * xm).max(b);
            let mut bound;
            loop {
                bound = d_mollify(d0, rho(rcut)) * (xm / rcut).powf(alpha);
                if bound <= 1e-14 * (total.abs() + 1e-12) || rcut > 1e12 {
                    break;
                }
                rcut *= 2.0;
            }
            (rcut, 0.5 * bound)
        };
        let head = if head_end > xm {
            let probe: f64 = (0..16)
                .map(|q| {
                    let r = xm * (head_end / xm).powf((q as f64 + 0.5) / 16.0);
                    integrand(r) * r
                })
                .sum::<f64>()
                * (head_end / xm).ln()
                / 16.0;
            let tol = probe.abs().max(tail.abs()).max(1e-12) * 1e-9;
            adaptive_simpson(&integrand, xm, head_end, tol)
        } else {
            0.0
        };
        total += model.spectral.weight(k) * (head + tail);
    }
    Ok(total)
}

/// Monte Carlo gradient of H_b: E(d'(rho_b(s+X)) grad rho_b(s+X)), with
/// per-component standard errors.
pub fn grad_h_mc<R: Rng>(
    sim: &Simulator,
    b: f64,
    moll: &MollifierParams,
    s: &[f64],
    n_mc: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let d = sim.model.dim;
    let c0 = moll.c0(b, sim.model.alpha);
    let mut sum = vec![0.0; d];
    let mut sumsq = vec![0.0; d];
    let mut sx = vec![0.0; d];
    for _ in 0..n_mc {
        let x = sim.model.sample(rng);
        for ((t, si), xi) in sx.iter_mut().zip(s).zip(&x) {
            *t = si + xi;
        }
        let dp = d_prime(moll.delta0, rho_b(&sim.system, b, c0, &sx));
        let g = rho_grad(&sim.system, b, c0, &sx);
        for i in 0..d {
            let val = dp * g[i];
            sum[i] += val;
            sumsq[i] += val * val;
        }
    }
    let n = n_mc as f64;
    let mean: Vec<f64> = sum.iter().map(|v| v / n).collect();
    let se: Vec<f64> = sumsq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| ((sq / n - m * m).max(0.0) / n).sqrt())
        .collect();
    (mean, se)
}

/// g_b(s) = min(c1 H_b(s)^2, 1) with H_b by quadrature.
pub fn g_b(sim: &Simulator, b: f64, moll: &MollifierParams, s: &[f64]) -> Result<f64> {
    let h = h_quadrature(sim, b, moll, s)?;
    Ok((moll.c1 * h * h).min(1.0))
}

/// One-state drift verification report.
#[derive(Debug, Clone)]
pub struct DriftReport {
    pub j1: f64,
    /// (1 - p_b(s)) * J2, the directly estimated quantity.
    pub j2_scaled: f64,
    /// J1 + J2.
    pub sum: f64,
    pub std_error: f64,
    pub p_b: f64,
    pub g_s: f64,
}

/// Monte Carlo estimate of J1 and (1-p_b) J2 at a state s in the region
/// R = {r_b(s) <= -delta2 b, s not in b Gamma} with g_b(s) < 1. The in-region
/// expectation uses the exact conditional-jump sampler; the complementary
/// expectation uses nominal draws.
pub fn drift_check<R: Rng>(
    sim: &Simulator,
    b: f64,
    moll: &MollifierParams,
    s: &[f64],
    n_mc: usize,
    rng: &mut R,
) -> Result<DriftReport> {
    let r = sim.system.r(b, s);
    if r > -sim.params.delta2 * b {
        return Err(RuinError::PreconditionViolation(format!(
            "state outside region R: r_b(s) = {r} > -delta2 b = {}",
            -sim.params.delta2 * b
        )));
    }
    if sim.target.gamma_exit(b, s) {
        return Err(RuinError::PreconditionViolation("state lies in the drift-exit set".into()));
    }
    let g_s = g_b(sim, b, moll, s)?;
    if g_s >= 1.0 {
        return Err(RuinError::PreconditionViolation(
            "g_b(s) = 1: state is beyond the Lyapunov cut level".into(),
        ));
    }
    let q = sim.step_quantities(b, s)?;
    let region = sim.system.jump_region(b, sim.params.a, s);
    let d = sim.model.dim;
    let mut sx = vec![0.0; d];

    // E(g(s+X)/g(s) | s+X in region) from exact conditional jumps
    let n_in = n_mc;
    let (mut sum_in, mut sumsq_in) = (0.0, 0.0);
    for _ in 0..n_in {
        let x = sim.model.conditional_jump(&sim.system.vs, &region.thresholds, rng)?;
        for ((t, si), xi) in sx.iter_mut().zip(s).zip(&x) {
            *t = si + xi;
        }
        let val = g_b(sim, b, moll, &sx)? / g_s;
        sum_in += val;
        sumsq_in += val * val;
    }
    let mean_in = sum_in / n_in as f64;
    let se_in = (((sumsq_in / n_in as f64 - mean_in * mean_in).max(0.0)) / n_in as f64).sqrt();
    let denom = q.p_b + (1.0 - q.p_b) * q.region_prob;
    let j1_factor = q.region_prob * q.region_prob / denom;
    let j1 = mean_in * j1_factor;
    let j1_se = se_in * j1_factor;

    // E(g(s+X)/g(s); s+X not in region) from nominal draws
    let n_out = n_mc;
    let (mut sum_out, mut sumsq_out) = (0.0, 0.0);
    for _ in 0..n_out {
        let x = sim.model.sample(rng);
        let val = if region.contains(&sim.system, &x) {
            0.0
        } else {
            for ((t, si), xi) in sx.iter_mut().zip(s).zip(&x) {
                *t = si + xi;
            }
            g_b(sim, b, moll, &sx)? / g_s
        };
        sum_out += val;
        sumsq_out += val * val;
    }
    let j2_scaled = sum_out / n_out as f64;
    let j2_scaled_se =
        (((sumsq_out / n_out as f64 - j2_scaled * j2_scaled).max(0.0)) / n_out as f64).sqrt();

    let j2 = j2_scaled / (1.0 - q.p_b);
    let j2_se = j2_scaled_se / (1.0 - q.p_b);
    Ok(DriftReport {
        j1,
        j2_scaled,
        sum: j1 + j2,
        std_error: j1_se.hypot(j2_se),
        p_b: q.p_b,
        g_s,
    })
}

/// The smallest boundary level kappa such that r_b(s) >= kappa forces
/// g_b(s) = 1, located by bisection along the ray through the first target
/// direction. Makes the g = 1 guard reproducible.
pub fn kappa_level(sim: &Simulator, b: f64, moll: &MollifierParams) -> Result<f64> {
    let v = &sim.target.vstar[0];
    let unit: Vec<f64> = {
        let n = dot(v, v).sqrt();
        v.iter().map(|x| x / n).collect()
    };
    let state = |tau: f64| -> Vec<f64> { unit.iter().map(|u| u * tau).collect() };
    let g_at = |tau: f64| -> Result<f64> { g_b(sim, b, moll, &state(tau)) };
    // bracket: expand tau until g = 1
    let mut lo = 0.0;
    let mut hi = b;
    let mut expand = 0;
    while g_at(hi)? < 1.0 {
        lo = hi;
        hi *= 2.0;
        expand += 1;
        if expand > 60 {
            return Err(RuinError::PreconditionViolation(
                "no g = 1 level found along the target ray".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g_at(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * b.max(1.0) {
            break;
        }
    }
    Ok(sim.system.r(b, &state(hi)))
}
