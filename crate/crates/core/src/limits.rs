//! Asymptotic conditional limit laws: the time-to-ruin law (hazard built from
//! the limiting measure), the jump-time law of the mixture chain, the
//! overshoot law, and the statistical comparisons of simulated conditional
//! paths against all of them.

use crate::error::{Result, RuinError};
use crate::increments::IncrementModel;
use crate::kernel::{PathRecord, Simulator, StopCause};
use crate::numerics::{hyperbola_envelope, hyperbola_envelope_eval, hyperbola_envelope_tail, HyperbolaPiece};
use crate::rng::{path_rng, purpose};
use crate::stats::{
    chi2_critical, chi2_statistic, ks_one_sample, ks_one_sample_critical, normal_cdf,
    weighted_resample_indices,
};
use crate::vecops::dot;
use rand::Rng;
use serde::Serialize;

/// Hazard representation of a scaled first-passage law: survival
/// P(Z > t) = exp{ -theta Int_0^t kappa_scaled(s) / Int_s^inf kappa(u) du ds }.
/// Because the limiting measure is homogeneous, the contracted numerator
/// kappa_{a a}(a s) equals a^(-alpha) kappa_a(s), so the survival collapses to
/// (I(t)/I(0))^(theta a^-alpha) with I the exact tail integral. The table
/// still carries the trapezoid-integrated grid survival as a self-validating
/// quadrature cross-check.
#[derive(Debug, Clone)]
pub struct HazardTable {
    pub alpha: f64,
    pub theta: f64,
    pub a_contraction: f64,
    /// theta * a^(-alpha): the exponent applied to I(t)/I(0).
    pub exponent: f64,
    pub grid: Vec<f64>,
    pub kappa: Vec<f64>,
    pub tail: Vec<f64>,
    pub hazard: Vec<f64>,
    /// Survival on the grid by trapezoid integration of the hazard.
    pub survival: Vec<f64>,
    /// Max absolute survival change under the final grid doubling.
    pub refinement_gap: f64,
    /// Per-atom winner decompositions of max_j (d_kj / (a_j + t))^alpha.
    atom_pieces: Vec<(f64, Vec<HyperbolaPiece>)>,
    i0: f64,
}

impl HazardTable {
    /// Build the law for a half-space system (v_j, a_j) at z = 0 with
    /// contraction `a_contraction` and mixture aggressiveness `theta`
    /// (a = theta = 1 gives the plain conditional time-to-ruin law).
    pub fn build(
        model: &IncrementModel,
        directions: &[Vec<f64>],
        offsets: &[f64],
        a_contraction: f64,
        theta: f64,
    ) -> Result<Self> {
        if !(model.alpha > 1.0) {
            return Err(RuinError::Validation("hazard table needs alpha > 1".into()));
        }
        if !(a_contraction > 0.0 && a_contraction <= 1.0) || !(theta > 0.0 && theta <= 1.0) {
            return Err(RuinError::Validation(
                "hazard table needs a in (0,1] and theta in (0,1]".into(),
            ));
        }
        let alpha = model.alpha;
        let scale = model.xm.powf(alpha);
        let mut atom_pieces = Vec::with_capacity(model.spectral.len());
        for k in 0..model.spectral.len() {
            let th = model.spectral.dir(k);
            let terms: Vec<(f64, f64)> = directions
                .iter()
                .zip(offsets)
                .map(|(v, a)| (dot(th, v).max(0.0), *a))
                .collect();
            atom_pieces.push((model.spectral.weight(k) * scale, hyperbola_envelope(&terms)));
        }
        let eval_kappa = |t: f64| -> f64 {
            atom_pieces
                .iter()
                .map(|(w, p)| w * hyperbola_envelope_eval(p, alpha, t))
                .sum()
        };
        let eval_tail = |t: f64| -> f64 {
            atom_pieces
                .iter()
                .map(|(w, p)| w * hyperbola_envelope_tail(p, alpha, t))
                .sum()
        };
        let i0 = eval_tail(0.0);
        if !(i0 > 0.0) {
            return Err(RuinError::Validation(
                "target has zero limit measure: hazard undefined".into(),
            ));
        }
        let exponent = theta * a_contraction.powf(-alpha);

        // log-spaced grid, refined until survival is stable to 1e-6
        let build_grid = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|i| 1e-3 * (1e6f64).powf(i as f64 / (n - 1) as f64))
                .collect()
        };
        let survival_on = |grid: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(grid.len());
            // head piece [0, t_0] plus trapezoids between grid points
            let h = |t: f64| eval_kappa(t) / eval_tail(t);
            let mut acc = 0.5 * (h(0.0) + h(grid[0])) * grid[0];
            out.push((-exponent * acc).exp());
            for i in 1..grid.len() {
                acc += 0.5 * (h(grid[i - 1]) + h(grid[i])) * (grid[i] - grid[i - 1]);
                out.push((-exponent * acc).exp());
            }
            out
        };
        let mut n = 2000usize;
        let mut grid = build_grid(n);
        let mut survival = survival_on(&grid);
        let mut refinement_gap = f64::INFINITY;
        for _ in 0..6 {
            // doubling inserts log-space midpoints, so every coarse abscissa
            // is shared exactly by the fine grid at index 2i
            let n2 = 2 * n - 1;
            let grid2 = build_grid(n2);
            let survival2 = survival_on(&grid2);
            let gap = survival
                .iter()
                .enumerate()
                .map(|(i, s)| (s - survival2[2 * i]).abs())
                .fold(0.0f64, f64::max);
            refinement_gap = gap;
            if gap < 1e-6 {
                break;
            }
            n = n2;
            grid = grid2;
            survival = survival2;
        }
        let kappa: Vec<f64> = grid.iter().map(|&t| eval_kappa(t)).collect();
        let tail: Vec<f64> = grid.iter().map(|&t| eval_tail(t)).collect();
        let hazard: Vec<f64> = kappa.iter().zip(&tail).map(|(k, i)| k / i).collect();
        Ok(HazardTable {
            alpha,
            theta,
            a_contraction,
            exponent,
            grid,
            kappa,
            tail,
            hazard,
            survival,
            refinement_gap,
            atom_pieces,
            i0,
        })
    }

    pub fn kappa_at(&self, t: f64) -> f64 {
        self.atom_pieces
            .iter()
            .map(|(w, p)| w * hyperbola_envelope_eval(p, self.alpha, t))
            .sum()
    }

    pub fn tail_at(&self, t: f64) -> f64 {
        self.atom_pieces
            .iter()
            .map(|(w, p)| w * hyperbola_envelope_tail(p, self.alpha, t))
            .sum()
    }

    /// Exact survival (I(t)/I(0))^exponent.
    pub fn survival_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (self.tail_at(t) / self.i0).powf(self.exponent)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival_at(t)
    }

    /// Inverse-CDF draw by bisection on the survival function, accurate to
    /// 1e-8 in probability.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let v: f64 = 1.0 - rng.gen::<f64>(); // target survival in (0, 1]
        let mut hi = 1.0;
        while self.survival_at(hi) > v {
            hi *= 2.0;
            if hi > 1e300 {
                return hi;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s = self.survival_at(mid);
            if s > v {
                lo = mid;
            } else {
                hi = mid;
            }
            if (self.survival_at(lo) - self.survival_at(hi)).abs() < 1e-8 {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// The overshoot law Y*(z): the limiting measure restricted to
/// {y : max_j (y'v_j - a_j) >= z}, normalized. For a discrete spectral
/// measure this is an atom mixture with per-atom truncation radii.
#[derive(Debug, Clone)]
pub struct OvershootLaw {
    pub z: f64,
    pub rho: Vec<f64>,
    pub weights: Vec<f64>,
    alpha: f64,
}

impl OvershootLaw {
    pub fn build(
        model: &IncrementModel,
        directions: &[Vec<f64>],
        offsets: &[f64],
        z: f64,
    ) -> Result<Self> {
        if !(z >= 0.0) {
            return Err(RuinError::Validation("overshoot level must be nonnegative".into()));
        }
        let mut rho = Vec::with_capacity(model.spectral.len());
        let mut weights = Vec::with_capacity(model.spectral.len());
        for k in 0..model.spectral.len() {
            let th = model.spectral.dir(k);
            let r = directions
                .iter()
                .zip(offsets)
                .filter_map(|(v, a)| {
                    let d = dot(th, v);
                    if d > 0.0 {
                        Some((a + z) / d)
                    } else {
                        None
                    }
                })
                .fold(f64::INFINITY, f64::min);
            rho.push(r);
            weights.push(if r.is_finite() { model.spectral.weight(k) * r.powf(-model.alpha) } else { 0.0 });
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(RuinError::Validation("overshoot law has zero mass".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(OvershootLaw { z, rho, weights, alpha: model.alpha })
    }

    /// Draw y = r * theta_k: atom by weight, radius Pareto(alpha) truncated
    /// above rho_k(z).
    pub fn sample<R: Rng>(&self, model: &IncrementModel, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = self.weights.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = k;
                break;
            }
        }
        let v: f64 = 1.0 - rng.gen::<f64>();
        let r = self.rho[pick] * v.powf(-1.0 / self.alpha);
        model.spectral.dir(pick).iter().map(|d| r * d).collect()
    }
}

/// Statistics of the limit-law comparison battery.
#[derive(Debug, Clone, Serialize)]
pub struct LimitLawReport {
    pub n_conditioned: usize,
    pub n_jumped: usize,
    /// KS of T/b (conditioned, A*-hitting) against the Z* law truncated at
    /// the drift-exit scale.
    pub ks_t_zstar: f64,
    /// KS of T/b against the Z_{a,theta} law (same truncation).
    pub ks_t_zatheta: f64,
    /// KS of N_b/b (first jump index, unweighted mixture paths) against
    /// Z_{a,theta}.
    pub ks_n_zatheta: f64,
    pub ks_critical: f64,
    /// Per-component KS of the mid-path CLT marginal against
    /// Normal(0, Var(X)) after (S_m - m eta)/sqrt(u T) normalization
    /// (alpha > 2 only).
    pub ks_clt: Vec<f64>,
    pub ks_clt_critical: f64,
    /// alpha <= 2: fraction of paths with sup_u |S_{uT}/T - u eta| <= 0.5.
    pub lln_within_band: Option<f64>,
    /// Overshoot radius probability-integral-transform KS against the exact
    /// per-path truncated-Pareto boundary.
    pub ks_overshoot_pit: f64,
    /// Mean relative gap between the exact per-path truncation radius and the
    /// limit law's rho(z) at z = T/b (finite-b convergence indicator).
    pub rho_gap_mean: f64,
    /// Atom-frequency chi-square against the z-averaged limit weights
    /// (models with at least two atoms).
    pub chi2_overshoot: Option<f64>,
    pub chi2_critical: Option<f64>,
    pub pass_t_zstar: bool,
    pub pass_n_zatheta: bool,
    pub pass_clt: bool,
    pub pass_overshoot: bool,
}

/// Run every applicable limit-law comparison on a conditioned path sample.
/// `weights` (importance weights aligned with `paths`) trigger multinomial
/// resampling so the sample approximates the conditional law; crude
/// conditional samples pass `None`.
pub fn limit_law_tests(
    sim: &Simulator,
    b: f64,
    paths: &[PathRecord],
    weights: Option<&[f64]>,
    seed: u64,
) -> Result<LimitLawReport> {
    let star_hits: Vec<usize> = (0..paths.len())
        .filter(|&i| paths[i].stop_cause == StopCause::HitA && paths[i].hit_astar)
        .collect();
    if star_hits.len() < 1000 {
        return Err(RuinError::InsufficientSample { got: star_hits.len(), need: 1000 });
    }
    // resample by weight to approximate the conditional law
    let cond: Vec<usize> = match weights {
        Some(w) => {
            let ws: Vec<f64> = star_hits.iter().map(|&i| w[i]).collect();
            let mut rng = path_rng(seed, purpose::RESAMPLE, 0);
            weighted_resample_indices(&ws, star_hits.len(), &mut rng)
                .into_iter()
                .map(|j| star_hits[j])
                .collect()
        }
        None => star_hits.clone(),
    };

    let zstar = HazardTable::build(&sim.model, &sim.target.vstar, &sim.target.astar, 1.0, 1.0)?;
    let zatheta = HazardTable::build(
        &sim.model,
        &sim.system.vs,
        &sim.system.offs,
        sim.params.a,
        sim.params.theta.max(1e-12),
    )?;
    // observation window: paths are stopped at the drift exit
    let q_trunc = sim.target.gamma / sim.model.dim as f64;
    let trunc_cdf = |table: &HazardTable, t: f64| -> f64 {
        (table.cdf(t.min(q_trunc)) / table.cdf(q_trunc)).min(1.0)
    };

    let t_sample: Vec<f64> = cond.iter().map(|&i| paths[i].steps() as f64 / b).collect();
    let ks_t_zstar = ks_one_sample(&t_sample, |t| trunc_cdf(&zstar, t));
    let ks_t_zatheta = ks_one_sample(&t_sample, |t| trunc_cdf(&zatheta, t));

    // jump-time law: raw mixture paths, no reweighting
    let n_sample: Vec<f64> = paths
        .iter()
        .filter_map(|p| p.n_jump.map(|n| n as f64 / b))
        .collect();
    let ks_n_zatheta = if n_sample.is_empty() {
        f64::NAN
    } else {
        ks_one_sample(&n_sample, |t| trunc_cdf(&zatheta, t))
    };
    let ks_critical = ks_one_sample_critical(t_sample.len(), 0.01);

    // CLT marginal at u = 1/2 (alpha > 2), LLN band otherwise
    let u = 0.5;
    let mut ks_clt = Vec::new();
    let mut lln_within_band = None;
    if sim.model.alpha > 2.0 {
        let cov = sim.model.covariance()?;
        let d = sim.model.dim;
        for comp in 0..d {
            let sd = cov[comp * d + comp].max(0.0).sqrt();
            let vals: Vec<f64> = cond
                .iter()
                .filter_map(|&i| {
                    let p = &paths[i];
                    let t = p.steps();
                    let m = (u * t as f64).floor() as usize;
                    if m == 0 {
                        return None;
                    }
                    let s_m = p.state(m)[comp];
                    Some((s_m - m as f64 * -1.0) / (u * t as f64).sqrt())
                })
                .collect();
            if sd > 0.0 {
                ks_clt.push(ks_one_sample(&vals, |x| normal_cdf(x, 0.0, sd)));
            } else {
                // degenerate component: the marginal is a point mass at zero
                let worst = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                ks_clt.push(if worst < 1e-9 { 0.0 } else { 1.0 });
            }
        }
    } else {
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let mut within = 0usize;
        let mut counted = 0usize;
        for &i in &cond {
            let p = &paths[i];
            let t = p.steps();
            if t < 2 {
                continue;
            }
            counted += 1;
            let mut worst = 0.0f64;
            for &uu in &grid {
                let m = ((uu * t as f64).floor() as usize).min(t);
                let s = p.state(m);
                let dev: f64 = s
                    .iter()
                    .map(|&si| (si / t as f64 - uu * -1.0).powi(2))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(dev);
            }
            if worst <= 0.5 {
                within += 1;
            }
        }
        lln_within_band = Some(if counted == 0 { 0.0 } else { within as f64 / counted as f64 });
    }
    let ks_clt_critical = ks_one_sample_critical(cond.len(), 0.01);

    // overshoot: final increment, exact per-path truncated-Pareto transform
    let mut pit = Vec::with_capacity(cond.len());
    let mut rho_gap_sum = 0.0;
    let mut atom_counts = vec![0u64; sim.model.spectral.len()];
    let mut atom_probs = vec![0.0f64; sim.model.spectral.len()];
    let mut n_over = 0usize;
    for &i in &cond {
        let p = &paths[i];
        let t = p.steps();
        if t == 0 {
            continue;
        }
        let prev = p.state(t - 1);
        let term = p.terminal();
        let w: Vec<f64> = term
            .iter()
            .zip(prev)
            .zip(&sim.model.shift)
            .map(|((a, b2), c)| a - b2 - c)
            .collect();
        // atom assignment by direction
        let wn = dot(&w, &w).sqrt();
        if !(wn > 0.0) {
            continue;
        }
        let (k_star, _) = (0..sim.model.spectral.len())
            .map(|k| (k, dot(&w, sim.model.spectral.dir(k)) / wn))
            .max_by(|a2, b2| a2.1.partial_cmp(&b2.1).unwrap())
            .unwrap();
        let r = dot(&w, sim.model.spectral.dir(k_star));
        // exact truncation: the smallest radius that enters bA* from prev
        let rho_exact = sim
            .target
            .vstar
            .iter()
            .zip(&sim.target.astar)
            .filter_map(|(v, a)| {
                let dkj = dot(sim.model.spectral.dir(k_star), v);
                if dkj > 0.0 {
                    Some((a * b - dot(prev, v) - dot(&sim.model.shift, v)) / dkj)
                } else {
                    None
                }
            })
            .fold(f64::INFINITY, f64::min);
        if !rho_exact.is_finite() || r < rho_exact {
            continue;
        }
        pit.push((rho_exact / r).powf(sim.model.alpha));
        let z = t as f64 / b;
        let limit = OvershootLaw::build(&sim.model, &sim.target.vstar, &sim.target.astar, z)?;
        rho_gap_sum += (rho_exact / (b * limit.rho[k_star]) - 1.0).abs();
        atom_counts[k_star] += 1;
        for (ap, lw) in atom_probs.iter_mut().zip(&limit.weights) {
            *ap += lw;
        }
        n_over += 1;
    }
    let ks_overshoot_pit = ks_one_sample(&pit, |x| x.clamp(0.0, 1.0));
    let rho_gap_mean = if n_over > 0 { rho_gap_sum / n_over as f64 } else { f64::NAN };
    let (chi2_overshoot, chi2_crit) = if sim.model.spectral.len() >= 2 && n_over > 0 {
        let probs: Vec<f64> = atom_probs.iter().map(|p| p / n_over as f64).collect();
        (
            Some(chi2_statistic(&atom_counts, &probs)),
            Some(chi2_critical(sim.model.spectral.len() - 1, 0.01)),
        )
    } else {
        (None, None)
    };

    let ks_pit_critical = ks_one_sample_critical(pit.len().max(1), 0.01);
    Ok(LimitLawReport {
        n_conditioned: cond.len(),
        n_jumped: n_sample.len(),
        ks_t_zstar,
        ks_t_zatheta,
        ks_n_zatheta,
        ks_critical,
        pass_t_zstar: ks_t_zstar < ks_critical,
        pass_n_zatheta: ks_n_zatheta < ks_one_sample_critical(n_sample.len().max(1), 0.01),
        ks_clt_critical,
        pass_clt: ks_clt.iter().all(|&k| k < ks_clt_critical),
        ks_clt,
        lln_within_band,
        ks_overshoot_pit,
        pass_overshoot: ks_overshoot_pit < ks_pit_critical,
        rho_gap_mean,
        chi2_overshoot,
        chi2_critical: chi2_crit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TargetSpec;
    use crate::increments::SpectralMeasure;
    use crate::kernel::{KernelParams, ValueStrategy};
    use crate::stats::dkw_band;
    use approx::assert_relative_eq;

    fn canonical_model() -> IncrementModel {
        let sm = SpectralMeasure::new(vec![(vec![1.0, 0.0], 1.0)]).unwrap();
        IncrementModel::new(2.5, 1.0, sm, 0.0).unwrap()
    }

    fn canonical_sim(theta: f64) -> Simulator {
        let target =
            TargetSpec::normalize(vec![vec![1.0, 0.0]], vec![1.0], 0.05, 10.0, 20.0).unwrap();
        let params = KernelParams { theta, a: 0.99, delta2: 0.1, max_step_factor: 10.0 };
        Simulator::new(canonical_model(), target, params, ValueStrategy::ExactRadial).unwrap()
    }

    #[test]
    fn one_dimensional_reduction_is_pareto() {
        // single atom, single direction: P(Z* > t) = (a/(a+t))^(alpha-1)
        let model = canonical_model();
        let table =
            HazardTable::build(&model, &[vec![1.0, 0.0]], &[1.0], 1.0, 1.0).unwrap();
        assert!(table.refinement_gap < 1e-6, "gap {}", table.refinement_gap);
        for (i, &t) in table.grid.iter().enumerate() {
            let closed = (1.0f64 / (1.0 + t)).powf(1.5);
            assert!(
                (table.survival[i] - closed).abs() < 1e-6,
                "grid survival off by {} at t = {t}",
                (table.survival[i] - closed).abs()
            );
            assert_relative_eq!(table.survival_at(t), closed, max_relative = 1e-12);
        }
        assert_relative_eq!(table.survival_at(1.0), 2.0f64.powf(-1.5), max_relative = 1e-12);
        assert_relative_eq!(table.survival_at(1.0), 0.353553, max_relative = 1e-5);
        assert_eq!(table.survival_at(0.0), 1.0);
    }

    #[test]
    fn survival_monotone_with_tail_index_alpha_minus_one() {
        let model = canonical_model();
        let table =
            HazardTable::build(&model, &[vec![1.0, 0.0]], &[1.0], 1.0, 1.0).unwrap();
        for w in table.survival.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        // log-log slope over the last decade of the grid
        let t1 = 100.0;
        let t2 = 1000.0;
        let slope = (table.survival_at(t2).ln() - table.survival_at(t1).ln())
            / (t2.ln() - t1.ln());
        assert!((slope + (model.alpha - 1.0)).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn two_direction_law_is_not_pure_pareto() {
        // distinct offsets in two directions give a genuinely mixed hazard
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sm = SpectralMeasure::new(vec![
            (vec![1.0, 0.0], 0.5),
            (vec![0.0, 1.0], 0.5),
        ])
        .unwrap();
        let model = IncrementModel::new(2.5, 1.0, sm, 0.0).unwrap();
        let dirs = vec![vec![1.0, 0.0], vec![s, s]];
        let offs = vec![1.0, 3.0];
        let table = HazardTable::build(&model, &dirs, &offs, 1.0, 1.0).unwrap();
        // best-fit Pareto on the log-log grid
        let pts: Vec<(f64, f64)> = table
            .grid
            .iter()
            .map(|&t| ((1.0 + t).ln(), table.survival_at(t).ln()))
            .collect();
        let n = pts.len() as f64;
        let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let max_dev = table
            .grid
            .iter()
            .map(|&t| {
                let fit = (intercept + slope * (1.0 + t).ln()).exp();
                (table.survival_at(t) - fit).abs()
            })
            .fold(0.0f64, f64::max);
        assert!(max_dev > 1e-4, "deviation from Pareto fit only {max_dev}");
    }

    #[test]
    fn sampler_matches_survival_within_dkw() {
        let model = canonical_model();
        let table =
            HazardTable::build(&model, &[vec![1.0, 0.0]], &[1.0], 0.99, 0.99).unwrap();
        let n = 100_000;
        let mut rng = path_rng(41, purpose::CHECKS, 0);
        let draws: Vec<f64> = (0..n).map(|_| table.sample(&mut rng)).collect();
        let band = dkw_band(n, 0.01);
        for i in (0..table.grid.len()).step_by(table.grid.len() / 20) {
            let t = table.grid[i];
            let emp = draws.iter().filter(|&&x| x > t).count() as f64 / n as f64;
            assert!(
                (emp - table.survival_at(t)).abs() < band,
                "survival mismatch at t = {t}"
            );
        }
    }

    #[test]
    fn contracted_law_dominance_and_convergence() {
        // Z_{a,theta} vs the a = theta = 1 law on the same system: the
        // survivals never cross, and the sup gap shrinks as a, theta -> 1.
        let sim = canonical_sim(0.99);
        let base =
            HazardTable::build(&sim.model, &sim.system.vs, &sim.system.offs, 1.0, 1.0).unwrap();
        let mut prev_gap = f64::INFINITY;
        for q in [0.9, 0.99, 0.999] {
            let t =
                HazardTable::build(&sim.model, &sim.system.vs, &sim.system.offs, q, q).unwrap();
            let mut gap = 0.0f64;
            let mut sign = 0i8;
            for &x in base.grid.iter().step_by(7) {
                let d = t.survival_at(x) - base.survival_at(x);
                if d.abs() > 1e-12 {
                    let s = if d > 0.0 { 1 } else { -1 };
                    if sign == 0 {
                        sign = s;
                    }
                    assert_eq!(s, sign, "survivals cross at t = {x}");
                }
                gap = gap.max(d.abs());
            }
            assert!(gap < prev_gap, "gap not shrinking at q = {q}");
            prev_gap = gap;
        }
        assert!(prev_gap < 5e-3, "gap at q = 0.999 is {prev_gap}");
        // star-system law agrees with the enlarged one up to the enlargement
        let star =
            HazardTable::build(&sim.model, &sim.target.vstar, &sim.target.astar, 1.0, 1.0).unwrap();
        let max_dev = base
            .grid
            .iter()
            .step_by(13)
            .map(|&x| (star.survival_at(x) - base.survival_at(x)).abs())
            .fold(0.0f64, f64::max);
        assert!(max_dev < 0.02, "enlargement gap {max_dev}");
    }

    #[test]
    fn overshoot_law_support_and_radius() {
        let model = canonical_model();
        let dirs = vec![vec![1.0, 0.0]];
        let offs = vec![1.0];
        let z = 0.7;
        let law = OvershootLaw::build(&model, &dirs, &offs, z).unwrap();
        assert_relative_eq!(law.rho[0], 1.7);
        let mut rng = path_rng(42, purpose::CHECKS, 0);
        let mut radii = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let y = law.sample(&model, &mut rng);
            let over = dot(&y, &dirs[0]) - offs[0];
            assert!(over >= z - 1e-12, "support violated: {over}");
            radii.push(dot(&y, &dirs[0]));
        }
        let rho = law.rho[0];
        let alpha = model.alpha;
        let d = ks_one_sample(&radii, |r| {
            if r <= rho {
                0.0
            } else {
                1.0 - (rho / r).powf(alpha)
            }
        });
        assert!(d < 0.01, "KS {d}");
        // rho grows with z
        let law2 = OvershootLaw::build(&model, &dirs, &offs, 2.0 * z).unwrap();
        assert!(law2.rho[0] > law.rho[0]);
    }

    #[test]
    fn overshoot_atom_frequencies_chi2() {
        let sm = SpectralMeasure::new(vec![
            (vec![1.0, 0.0], 0.6),
            (vec![0.0, 1.0], 0.4),
        ])
        .unwrap();
        let model = IncrementModel::new(2.5, 1.0, sm, 0.0).unwrap();
        let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let offs = vec![1.0, 2.0];
        let law = OvershootLaw::build(&model, &dirs, &offs, 0.5).unwrap();
        let mut rng = path_rng(43, purpose::CHECKS, 0);
        let n = 50_000;
        let mut counts = vec![0u64; 2];
        for _ in 0..n {
            let y = law.sample(&model, &mut rng);
            let k = if y[0].abs() > y[1].abs() { 0 } else { 1 };
            counts[k] += 1;
        }
        let stat = chi2_statistic(&counts, &law.weights);
        assert!(stat < chi2_critical(1, 0.01), "chi2 {stat}");
    }

    #[test]
    fn limit_report_smoke_and_sample_floor() {
        let sim = canonical_sim(0.99);
        let b = 50.0;
        let rows = crate::estimator::map_paths(&sim, b, 4000, 51, 0, |_, rec| {
            (rec.clone(), rec.log_weight.exp())
        })
        .unwrap();
        let paths: Vec<PathRecord> = rows.iter().map(|(p, _)| p.clone()).collect();
        let weights: Vec<f64> = rows.iter().map(|&(_, w)| w).collect();
        let report = limit_law_tests(&sim, b, &paths, Some(&weights), 7).unwrap();
        assert!(report.n_conditioned >= 1000);
        assert!(report.ks_t_zstar.is_finite());
        assert!(report.ks_overshoot_pit.is_finite());
        assert!(report.rho_gap_mean.is_finite());
        // too-small sample errors
        let few: Vec<PathRecord> = paths.iter().take(50).cloned().collect();
        assert!(matches!(
            limit_law_tests(&sim, b, &few, None, 7),
            Err(RuinError::InsufficientSample { .. })
        ));
    }
}
