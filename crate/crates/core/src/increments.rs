//! The regularly varying increment law and everything computed directly from
//! it: exact tail probabilities over unions of half-spaces, exact conditional
//! jump sampling, and the polar-coordinate evaluation of the limiting measure.
//!
//! Canonical model: X = R*Theta + eps*U + c with R ~ Pareto(alpha, xm), Theta
//! drawn from a discrete spectral measure on the unit sphere, U uniform on the
//! unit ball (eps = 0 by default), and c the centering shift that enforces
//! E X = eta = (-1, ..., -1).

use crate::error::{Result, RuinError};
use crate::numerics::{gauss_legendre, Line};
use crate::vecops::dot;
use rand::Rng;

/// Discrete angular measure: unit directions with strictly positive weights
/// summing to one.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    dirs: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(RuinError::Validation("spectral measure needs at least one atom".into()));
        }
        let dim = atoms[0].0.len();
        let mut weight_sum = 0.0;
        for (i, (dir, w)) in atoms.iter().enumerate() {
            if dir.len() != dim {
                return Err(RuinError::Validation(format!("atom {i} has inconsistent dimension")));
            }
            let norm = dot(dir, dir).sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(RuinError::Validation(format!(
                    "atom {i} direction norm {norm} is not 1 within 1e-12"
                )));
            }
            if !(*w > 0.0) {
                return Err(RuinError::Validation(format!("atom {i} weight must be positive")));
            }
            weight_sum += w;
        }
        if (weight_sum - 1.0).abs() > 1e-12 {
            return Err(RuinError::Validation(format!(
                "spectral weights sum to {weight_sum}, not 1 within 1e-12"
            )));
        }
        let (dirs, weights) = atoms.into_iter().unzip();
        Ok(SpectralMeasure { dirs, weights })
    }

    /// Normalizes raw directions to unit length and weights to sum one, then
    /// validates. Used when loading configs.
    pub fn normalized(raw: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let total: f64 = raw.iter().map(|(_, w)| *w).sum();
        if !(total > 0.0) {
            return Err(RuinError::Validation("spectral weights must have positive sum".into()));
        }
        let atoms = raw
            .into_iter()
            .map(|(dir, w)| {
                let norm = dot(&dir, &dir).sqrt();
                if !(norm > 0.0) {
                    return Err(RuinError::Validation("spectral direction must be nonzero".into()));
                }
                Ok((dir.iter().map(|x| x / norm).collect(), w / total))
            })
            .collect::<Result<Vec<_>>>()?;
        SpectralMeasure::new(atoms)
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn dir(&self, k: usize) -> &[f64] {
        &self.dirs[k]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// Weighted mean direction sum_k phi_k theta_k.
    pub fn mean_direction(&self) -> Vec<f64> {
        let d = self.dirs[0].len();
        let mut m = vec![0.0; d];
        for (dir, w) in self.dirs.iter().zip(&self.weights) {
            for (mi, di) in m.iter_mut().zip(dir) {
                *mi += w * di;
            }
        }
        m
    }
}

/// The increment distribution. `shift` is always the computed centering
/// constant, never user-supplied.
#[derive(Debug, Clone)]
pub struct IncrementModel {
    pub dim: usize,
    pub alpha: f64,
    pub xm: f64,
    pub spectral: SpectralMeasure,
    pub body_radius: f64,
    pub shift: Vec<f64>,
}

impl IncrementModel {
    pub fn new(alpha: f64, xm: f64, spectral: SpectralMeasure, body_radius: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(RuinError::Validation(format!("tail index alpha = {alpha} must exceed 1")));
        }
        if !(xm > 0.0) {
            return Err(RuinError::Validation("Pareto scale xm must be positive".into()));
        }
        if !(body_radius >= 0.0) {
            return Err(RuinError::Validation("body noise radius must be nonnegative".into()));
        }
        let dim = spectral.dir(0).len();
        // E X = E[R] * mean_dir + shift must equal eta = -1; the ball noise has
        // mean zero.
        let mean_r = alpha * xm / (alpha - 1.0);
        let mean_dir = spectral.mean_direction();
        let shift: Vec<f64> = mean_dir.iter().map(|m| -1.0 - mean_r * m).collect();
        Ok(IncrementModel { dim, alpha, xm, spectral, body_radius, shift })
    }

    pub fn is_pure_radial(&self) -> bool {
        self.body_radius == 0.0
    }

    /// Draw R ~ Pareto(alpha, xm) by inverse CDF; V in (0, 1] keeps R finite.
    pub fn sample_radius<R: Rng>(&self, rng: &mut R) -> f64 {
        let v: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
        self.xm * v.powf(-1.0 / self.alpha)
    }

    /// One draw of the increment X.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.sample_atom(rng);
        let r = self.sample_radius(rng);
        let mut x: Vec<f64> = self.spectral.dir(k).iter().map(|d| r * d).collect();
        if self.body_radius > 0.0 {
            let u = sample_unit_ball(self.dim, rng);
            for (xi, ui) in x.iter_mut().zip(&u) {
                *xi += self.body_radius * ui;
            }
        }
        for (xi, ci) in x.iter_mut().zip(&self.shift) {
            *xi += ci;
        }
        x
    }

    fn sample_atom<R: Rng>(&self, rng: &mut R) -> usize {
        if self.spectral.len() == 1 {
            return 0;
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for k in 0..self.spectral.len() {
            acc += self.spectral.weight(k);
            if u < acc {
                return k;
            }
        }
        self.spectral.len() - 1
    }

    /// Covariance matrix of X (requires alpha > 2), row-major d x d.
    pub fn covariance(&self) -> Result<Vec<f64>> {
        if self.alpha <= 2.0 {
            return Err(RuinError::PreconditionViolation(
                "covariance requires tail index alpha > 2".into(),
            ));
        }
        let d = self.dim;
        let er = self.alpha * self.xm / (self.alpha - 1.0);
        let er2 = self.alpha * self.xm * self.xm / (self.alpha - 2.0);
        let mean_dir = self.spectral.mean_direction();
        let mut cov = vec![0.0; d * d];
        for k in 0..self.spectral.len() {
            let w = self.spectral.weight(k);
            let th = self.spectral.dir(k);
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += er2 * w * th[i] * th[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] -= er * er * mean_dir[i] * mean_dir[j];
            }
        }
        if self.body_radius > 0.0 {
            // E[U U'] = I / (d + 2) for U uniform on the unit ball.
            let v = self.body_radius * self.body_radius / (d as f64 + 2.0);
            for i in 0..d {
                cov[i * d + i] += v;
            }
        }
        Ok(cov)
    }

    /// P(exists j: X'v_j > u_j). Exact for the pure-radial model; one ball
    /// quadrature layer for bounded body noise.
    pub fn tail_union_prob(&self, directions: &[Vec<f64>], thresholds: &[f64]) -> Result<f64> {
        validate_thresholds(thresholds)?;
        let dots = self.dot_matrix(directions);
        let w = self.centered_thresholds(directions, thresholds);
        if self.is_pure_radial() {
            Ok(self.radial_union_prob(&dots, &w))
        } else {
            let quad = BallQuadrature::adaptive(self.dim, |u| {
                let wu: Vec<f64> = w
                    .iter()
                    .zip(directions)
                    .map(|(wj, vj)| wj - self.body_radius * dot(u, vj))
                    .collect();
                self.radial_union_prob(&dots, &wu)
            })?;
            Ok(quad.clamp(0.0, 1.0))
        }
    }

    /// Exact draw of X given  exists j: X'v_j > u_j. The jump-region
    /// precondition (positive mass) is checked, not assumed.
    pub fn conditional_jump<R: Rng>(
        &self,
        directions: &[Vec<f64>],
        thresholds: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        validate_thresholds(thresholds)?;
        let dots = self.dot_matrix(directions);
        let w = self.centered_thresholds(directions, thresholds);
        if self.is_pure_radial() {
            let (k, r) = self.radial_conditional(&dots, &w, rng)?;
            let x: Vec<f64> =
                self.spectral.dir(k).iter().zip(&self.shift).map(|(d, c)| r * d + c).collect();
            return Ok(x);
        }
        // Bounded body noise: exact rejection on U. The proposal bound shifts
        // every threshold to its ball-wide minimum, which dominates the union
        // probability for every u (monotonicity in each threshold).
        let w_min: Vec<f64> = w
            .iter()
            .zip(directions)
            .map(|(wj, vj)| wj - self.body_radius * dot(vj, vj).sqrt())
            .collect();
        let bound = self.radial_union_prob(&dots, &w_min);
        if bound <= 0.0 {
            return Err(RuinError::ZeroMassRegion);
        }
        loop {
            let u = sample_unit_ball(self.dim, rng);
            let wu: Vec<f64> = w
                .iter()
                .zip(directions)
                .map(|(wj, vj)| wj - self.body_radius * dot(&u, vj))
                .collect();
            let q = self.radial_union_prob(&dots, &wu);
            if q > 0.0 && rng.gen::<f64>() * bound < q {
                let (k, r) = self.radial_conditional(&dots, &wu, rng)?;
                let x: Vec<f64> = self
                    .spectral
                    .dir(k)
                    .iter()
                    .zip(&self.shift)
                    .zip(&u)
                    .map(|((d, c), ui)| r * d + self.body_radius * ui + c)
                    .collect();
                return Ok(x);
            }
        }
    }

    /// Limiting-measure value kappa(t, z) in the polar representation:
    ///   kappa = xm^alpha * sum_k phi_k max_j ((theta_k'v_j)^+ / (a_j - z'v_j + t))^alpha,
    /// the convention being P(X in b*B) ~ b^{-alpha} * kappa(B), i.e. the
    /// constant tail factor L = xm^alpha is absorbed into kappa.
    pub fn kappa_polar(
        &self,
        directions: &[Vec<f64>],
        offsets: &[f64],
        t: f64,
        z: &[f64],
    ) -> Result<f64> {
        let mut dens = Vec::with_capacity(offsets.len());
        for (j, (vj, aj)) in directions.iter().zip(offsets).enumerate() {
            let den = aj - dot(z, vj) + t;
            if !(den > 0.0) {
                return Err(RuinError::DomainViolation(format!(
                    "kappa denominator for direction {j} is {den} <= 0"
                )));
            }
            dens.push(den);
        }
        let mut total = 0.0;
        for k in 0..self.spectral.len() {
            let th = self.spectral.dir(k);
            let best = directions
                .iter()
                .zip(&dens)
                .map(|(vj, den)| (dot(th, vj).max(0.0)) / den)
                .fold(0.0f64, f64::max);
            total += self.spectral.weight(k) * best.powf(self.alpha);
        }
        Ok(self.xm.powf(self.alpha) * total)
    }

    /// theta_k'v_j for every atom k and direction j (row-major K x J).
    pub fn dot_matrix(&self, directions: &[Vec<f64>]) -> Vec<f64> {
        let j = directions.len();
        let mut m = vec![0.0; self.spectral.len() * j];
        for k in 0..self.spectral.len() {
            for (jj, v) in directions.iter().enumerate() {
                m[k * j + jj] = dot(self.spectral.dir(k), v);
            }
        }
        m
    }

    /// Thresholds re-centered by the shift: w_j = u_j - c'v_j.
    pub fn centered_thresholds(&self, directions: &[Vec<f64>], thresholds: &[f64]) -> Vec<f64> {
        thresholds
            .iter()
            .zip(directions)
            .map(|(u, v)| u - dot(&self.shift, v))
            .collect()
    }

    /// Union probability for the radial part only: P(exists j: R*d_kj > w_j)
    /// mixed over atoms. `dots` is the K x J matrix from `dot_matrix`.
    pub fn radial_union_prob(&self, dots: &[f64], w: &[f64]) -> f64 {
        let j = w.len();
        let mut total = 0.0;
        for k in 0..self.spectral.len() {
            let ev = RadialEvent::from_constraints(&dots[k * j..(k + 1) * j], w);
            total += self.spectral.weight(k) * ev.prob(self.alpha, self.xm);
        }
        total.clamp(0.0, 1.0)
    }

    /// Two-stage conditional radial draw: atom by conditional mass, then R
    /// from the Pareto law restricted to the atom's event set.
    fn radial_conditional<R: Rng>(
        &self,
        dots: &[f64],
        w: &[f64],
        rng: &mut R,
    ) -> Result<(usize, f64)> {
        let j = w.len();
        let events: Vec<RadialEvent> = (0..self.spectral.len())
            .map(|k| RadialEvent::from_constraints(&dots[k * j..(k + 1) * j], w))
            .collect();
        let masses: Vec<f64> = events
            .iter()
            .enumerate()
            .map(|(k, ev)| self.spectral.weight(k) * ev.prob(self.alpha, self.xm))
            .collect();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(RuinError::ZeroMassRegion);
        }
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = masses.len() - 1;
        for (k, m) in masses.iter().enumerate() {
            acc += m;
            if u < acc {
                pick = k;
                break;
            }
        }
        let r = events[pick].sample_r(self.alpha, self.xm, rng)?;
        Ok((pick, r))
    }
}

fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    for (j, u) in thresholds.iter().enumerate() {
        if u.is_nan() || *u == f64::NEG_INFINITY {
            return Err(RuinError::Validation(format!("threshold {j} is {u}; must not be NaN or -inf")));
        }
    }
    Ok(())
}

/// The event {exists j: r * d_j > w_j} as a subset of the radial axis: a
/// union of a lower ray (from slopes d_j < 0), an upper ray (d_j > 0), and
/// possibly everything (d_j = 0 with w_j < 0).
#[derive(Debug, Clone, Copy)]
pub struct RadialEvent {
    pub up_lo: f64,
    pub down_hi: f64,
    pub all: bool,
}

impl RadialEvent {
    pub fn from_constraints(dots: &[f64], w: &[f64]) -> Self {
        let mut up_lo = f64::INFINITY;
        let mut down_hi = f64::NEG_INFINITY;
        let mut all = false;
        for (&d, &wj) in dots.iter().zip(w) {
            if d > 0.0 {
                up_lo = up_lo.min(wj / d);
            } else if d < 0.0 {
                if wj < 0.0 {
                    down_hi = down_hi.max(wj / d);
                }
            } else if wj < 0.0 {
                all = true;
            }
        }
        if down_hi >= up_lo {
            all = true;
        }
        RadialEvent { up_lo, down_hi, all }
    }

    /// P(R in event) for R ~ Pareto(alpha, xm).
    pub fn prob(&self, alpha: f64, xm: f64) -> f64 {
        if self.all {
            return 1.0;
        }
        let p_up = if self.up_lo <= xm {
            1.0
        } else if self.up_lo.is_finite() {
            (xm / self.up_lo).powf(alpha)
        } else {
            0.0
        };
        if p_up >= 1.0 {
            return 1.0;
        }
        let p_down =
            if self.down_hi > xm { 1.0 - (xm / self.down_hi).powf(alpha) } else { 0.0 };
        (p_up + p_down).min(1.0)
    }

    /// Exact draw of R ~ Pareto(alpha, xm) conditioned on the event, by
    /// survival-function inversion restricted to the event set.
    pub fn sample_r<R: Rng>(&self, alpha: f64, xm: f64, rng: &mut R) -> Result<f64> {
        let surv = |r: f64| if r <= xm { 1.0 } else { (xm / r).powf(alpha) };
        let inv = |s: f64| xm * s.powf(-1.0 / alpha);
        let draw_between = |s_hi: f64, s_lo: f64, rng: &mut R| {
            // survival values: s_lo < s_hi; uniform in survival space
            let v: f64 = rng.gen();
            inv(s_lo + v * (s_hi - s_lo))
        };
        if self.all {
            return Ok(draw_between(1.0, 0.0, rng));
        }
        let lower_mass = if self.down_hi > xm { 1.0 - surv(self.down_hi) } else { 0.0 };
        let upper_start = self.up_lo.max(xm);
        let upper_mass = if self.up_lo.is_finite() { surv(upper_start) } else { 0.0 };
        let total = lower_mass + upper_mass;
        if !(total > 0.0) {
            return Err(RuinError::ZeroMassRegion);
        }
        if rng.gen::<f64>() * total < lower_mass {
            Ok(draw_between(1.0, surv(self.down_hi), rng))
        } else {
            Ok(draw_between(surv(upper_start), 0.0, rng))
        }
    }
}

/// Uniform draw from the unit ball by rejection from the cube.
pub fn sample_unit_ball<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..dim).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
        if dot(&u, &u) <= 1.0 {
            return u;
        }
    }
}

/// Deterministic quadrature of a smooth function averaged over the unit ball
/// (dimensions 1..3), refined until two consecutive levels agree to 1e-8
/// relative.
pub struct BallQuadrature;

impl BallQuadrature {
    pub fn adaptive<F: Fn(&[f64]) -> f64>(dim: usize, f: F) -> Result<f64> {
        let mut prev = Self::level(dim, 0, &f)?;
        for level in 1..=5 {
            let next = Self::level(dim, level, &f)?;
            let scale = prev.abs().max(next.abs()).max(1e-300);
            if (next - prev).abs() / scale < 1e-8 {
                return Ok(next);
            }
            prev = next;
        }
        Ok(prev)
    }

    fn level<F: Fn(&[f64]) -> f64>(dim: usize, level: u32, f: &F) -> Result<f64> {
        let n = 8usize << level;
        match dim {
            1 => {
                let nodes = gauss_legendre(n);
                Ok(nodes.iter().map(|&(x, w)| 0.5 * w * f(&[x])).sum())
            }
            2 => {
                // area average: t = r^2 uniform, angle uniform
                let radial = gauss_legendre(n);
                let m = 2 * n;
                let mut acc = 0.0;
                for &(xt, wt) in &radial {
                    let t = 0.5 * (xt + 1.0);
                    let r = t.sqrt();
                    for i in 0..m {
                        let phi = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / m as f64;
                        acc += 0.5 * wt / m as f64 * f(&[r * phi.cos(), r * phi.sin()]);
                    }
                }
                Ok(acc)
            }
            3 => {
                // volume average: t = r^3 uniform, cos(theta) GL, angle uniform
                let radial = gauss_legendre(n);
                let polar = gauss_legendre(n);
                let m = 2 * n;
                let mut acc = 0.0;
                for &(xt, wt) in &radial {
                    let r = (0.5 * (xt + 1.0)).powf(1.0 / 3.0);
                    for &(xc, wc) in &polar {
                        let sin_t = (1.0 - xc * xc).max(0.0).sqrt();
                        for i in 0..m {
                            let phi = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / m as f64;
                            acc += 0.25 * wt * wc / m as f64
                                * f(&[r * sin_t * phi.cos(), r * sin_t * phi.sin(), r * xc]);
                        }
                    }
                }
                Ok(acc)
            }
            _ => Err(RuinError::PreconditionViolation(format!(
                "ball quadrature supports dimensions 1..3, got {dim} (use the asymptotic value strategy)"
            ))),
        }
    }
}

// Re-exported so the kernel can build value-function envelopes without
// duplicating Pareto integration.
pub(crate) fn atom_value_lines(
    dots_row: &[f64],
    base: &[f64], // (s + c)'v_j - a_j b per direction
) -> Vec<Line> {
    let mut lines: Vec<Line> = dots_row
        .iter()
        .zip(base)
        .map(|(&d, &g)| Line::new(d, g))
        .collect();
    lines.push(Line::new(0.0, 0.0)); // encode the positive part
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{path_rng, purpose};
    use crate::stats::{ks_one_sample, mean_se};
    use approx::assert_relative_eq;

    pub(crate) fn canonical_model() -> IncrementModel {
        let sm = SpectralMeasure::new(vec![(vec![1.0, 0.0], 1.0)]).unwrap();
        IncrementModel::new(2.5, 1.0, sm, 0.0).unwrap()
    }

    fn two_atom_model() -> IncrementModel {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sm = SpectralMeasure::new(vec![
            (vec![1.0, 0.0], 0.7),
            (vec![s, s], 0.3),
        ])
        .unwrap();
        IncrementModel::new(2.5, 1.0, sm, 0.0).unwrap()
    }

    #[test]
    fn spectral_measure_rejects_bad_atoms() {
        assert!(SpectralMeasure::new(vec![(vec![1.0, 1.0], 1.0)]).is_err());
        assert!(SpectralMeasure::new(vec![(vec![1.0, 0.0], 0.5)]).is_err());
        let fixed = SpectralMeasure::normalized(vec![(vec![2.0, 0.0], 2.0)]).unwrap();
        assert_relative_eq!(fixed.weight(0), 1.0);
        assert_relative_eq!(fixed.dir(0)[0], 1.0);
    }

    #[test]
    fn single_atom_draws_lie_on_the_ray() {
        let model = canonical_model();
        let mut rng = path_rng(1, purpose::CHECKS, 0);
        for _ in 0..1000 {
            let x = model.sample(&mut rng);
            // x = (r + c1, c2) with r >= xm
            assert!(x[0] - model.shift[0] >= model.xm - 1e-12);
            assert_relative_eq!(x[1], model.shift[1]);
        }
    }

    #[test]
    fn empirical_mean_matches_drift() {
        let model = two_atom_model();
        let mut rng = path_rng(2, purpose::CHECKS, 0);
        let n = 1_000_000usize;
        let mut comp0 = Vec::with_capacity(n);
        let mut comp1 = Vec::with_capacity(n);
        for _ in 0..n {
            let x = model.sample(&mut rng);
            comp0.push(x[0]);
            comp1.push(x[1]);
        }
        for comp in [&comp0, &comp1] {
            let (mean, se) = mean_se(comp);
            assert!(
                (mean + 1.0).abs() < 5.0 * se,
                "mean {mean} not within 5 s.e. ({se}) of -1"
            );
        }
    }

    #[test]
    fn marginal_tail_matches_closed_form() {
        // P(X_1 > 10) = (xm / (10 + 8/3))^2.5 for the canonical model.
        let model = canonical_model();
        assert_relative_eq!(model.shift[0], -8.0 / 3.0, max_relative = 1e-15);
        let p_exact = (1.0f64 / (10.0 + 8.0 / 3.0)).powf(2.5);
        assert_relative_eq!(p_exact, 1.751e-3, max_relative = 1e-3);
        let mut rng = path_rng(3, purpose::CHECKS, 0);
        let n = 10_000_000usize;
        let mut hits = 0u64;
        for _ in 0..n {
            if model.sample(&mut rng)[0] > 10.0 {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / n as f64;
        let se = (p_exact * (1.0 - p_exact) / n as f64).sqrt();
        assert!(
            (p_hat - p_exact).abs() < 3.0 * se,
            "p_hat {p_hat} vs {p_exact}, se {se}"
        );
    }

    #[test]
    fn tail_union_prob_trivial_cases() {
        let model = canonical_model();
        let v = vec![vec![1.0, 0.0]];
        // threshold below the support floor: probability 1
        let low = model.shift[0] + 0.5 * model.xm;
        assert_relative_eq!(model.tail_union_prob(&v, &[low]).unwrap(), 1.0);
        // +inf threshold in every feasible direction: probability 0
        assert_relative_eq!(model.tail_union_prob(&v, &[f64::INFINITY]).unwrap(), 0.0);
        // NaN rejected
        assert!(model.tail_union_prob(&v, &[f64::NAN]).is_err());
        assert!(model.tail_union_prob(&v, &[f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn tail_union_prob_matches_brute_force() {
        let model = two_atom_model();
        let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let thresholds = vec![4.0, 2.5];
        let p = model.tail_union_prob(&dirs, &thresholds).unwrap();
        let mut rng = path_rng(4, purpose::CHECKS, 0);
        let n = 10_000_000usize;
        let mut hits = 0u64;
        for _ in 0..n {
            let x = model.sample(&mut rng);
            if x[0] > thresholds[0] || x[1] > thresholds[1] {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_hat - p).abs() < 4.0 * se, "p_hat {p_hat} vs exact {p}, se {se}");
    }

    #[test]
    fn tail_union_prob_monotone_in_thresholds() {
        let model = two_atom_model();
        let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let mut prev = 1.0;
        for step in 0..20 {
            let u = -2.0 + step as f64 * 0.7;
            let p = model.tail_union_prob(&dirs, &[u, u + 0.3]).unwrap();
            assert!(p <= prev + 1e-15, "not monotone at step {step}");
            prev = p;
        }
    }

    #[test]
    fn conditional_jump_always_lands_in_region() {
        let model = canonical_model();
        let dirs = vec![vec![1.0, 0.0]];
        let thresholds = vec![7.0];
        let mut rng = path_rng(5, purpose::CHECKS, 0);
        for _ in 0..100_000 {
            let x = model.conditional_jump(&dirs, &thresholds, &mut rng).unwrap();
            assert!(x[0] > thresholds[0]);
        }
    }

    #[test]
    fn conditional_jump_radius_is_truncated_pareto() {
        let model = canonical_model();
        let dirs = vec![vec![1.0, 0.0]];
        let thresholds = vec![7.0];
        let rho = thresholds[0] - model.shift[0]; // truncation radius
        let mut rng = path_rng(6, purpose::CHECKS, 0);
        let radii: Vec<f64> = (0..100_000)
            .map(|_| model.conditional_jump(&dirs, &thresholds, &mut rng).unwrap()[0] - model.shift[0])
            .collect();
        let alpha = model.alpha;
        let cdf = |r: f64| if r <= rho { 0.0 } else { 1.0 - (rho / r).powf(alpha) };
        let d = ks_one_sample(&radii, cdf);
        assert!(d < 0.01, "KS distance {d}");
    }

    #[test]
    fn conditional_jump_atom_selection_frequencies() {
        // two atoms arranged so both have the same truncation radius
        let sm = SpectralMeasure::new(vec![
            (vec![1.0, 0.0], 0.6),
            (vec![0.0, 1.0], 0.4),
        ])
        .unwrap();
        let model = IncrementModel::new(2.5, 1.0, sm, 0.0).unwrap();
        let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        // equalize the post-shift radii: u_j = rho + c'v_j
        let rho = 9.0;
        let thresholds = vec![rho + model.shift[0], rho + model.shift[1]];
        let mut rng = path_rng(7, purpose::CHECKS, 0);
        let n = 100_000usize;
        let mut first = 0u64;
        for _ in 0..n {
            let x = model.conditional_jump(&dirs, &thresholds, &mut rng).unwrap();
            if x[0] - model.shift[0] > x[1] - model.shift[1] {
                first += 1;
            }
        }
        let frac = first as f64 / n as f64;
        let se = (0.6f64 * 0.4 / n as f64).sqrt();
        assert!((frac - 0.6).abs() < 3.0 * se, "frac {frac}");
    }

    #[test]
    fn conditional_jump_zero_mass_region_errors() {
        let model = canonical_model();
        // direction the single atom cannot reach
        let dirs = vec![vec![0.0, 1.0]];
        let thresholds = vec![5.0];
        let mut rng = path_rng(8, purpose::CHECKS, 0);
        assert!(matches!(
            model.conditional_jump(&dirs, &thresholds, &mut rng),
            Err(RuinError::ZeroMassRegion)
        ));
    }

    #[test]
    fn kappa_single_atom_closed_form() {
        let model = canonical_model();
        let dirs = vec![vec![1.0, 0.0]];
        for t in [0.0, 0.5, 1.0, 4.0] {
            let k = model.kappa_polar(&dirs, &[1.0], t, &[0.0, 0.0]).unwrap();
            assert_relative_eq!(k, (1.0 + t).powf(-2.5), max_relative = 1e-14);
        }
    }

    #[test]
    fn kappa_monotone_and_domain_checked() {
        let model = two_atom_model();
        let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let offs = vec![1.0, 2.0];
        let z = vec![0.1, -0.2];
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let t = i as f64 * 0.5;
            let k = model.kappa_polar(&dirs, &offs, t, &z).unwrap();
            assert!(k <= prev + 1e-15);
            prev = k;
        }
        let bad_z = vec![2.0, 0.0]; // a_1 - z'v_1 = -1 < 0
        assert!(matches!(
            model.kappa_polar(&dirs, &offs, 0.0, &bad_z),
            Err(RuinError::DomainViolation(_))
        ));
    }

    #[test]
    fn body_noise_tail_prob_matches_monte_carlo() {
        let sm = SpectralMeasure::new(vec![(vec![1.0, 0.0], 1.0)]).unwrap();
        let model = IncrementModel::new(2.5, 1.0, sm, 0.5).unwrap();
        let dirs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let thresholds = vec![5.0, 0.2];
        let p = model.tail_union_prob(&dirs, &thresholds).unwrap();
        let mut rng = path_rng(9, purpose::CHECKS, 0);
        let n = 4_000_000usize;
        let mut hits = 0u64;
        for _ in 0..n {
            let x = model.sample(&mut rng);
            if x[0] > thresholds[0] || x[1] > thresholds[1] {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_hat - p).abs() < 4.0 * se, "p_hat {p_hat} vs quadrature {p}, se {se}");
    }

    #[test]
    fn body_noise_conditional_jump_membership_and_law() {
        let sm = SpectralMeasure::new(vec![(vec![1.0, 0.0], 1.0)]).unwrap();
        let model = IncrementModel::new(2.5, 1.0, sm, 0.5).unwrap();
        let dirs = vec![vec![1.0, 0.0]];
        let thresholds = vec![6.0];
        let mut rng = path_rng(10, purpose::CHECKS, 0);
        let draws: Vec<f64> =
            (0..40_000).map(|_| model.conditional_jump(&dirs, &thresholds, &mut rng).unwrap()[0]).collect();
        assert!(draws.iter().all(|&x| x > thresholds[0]));
        // cross-check against brute-force conditional draws
        let mut brute = Vec::with_capacity(40_000);
        while brute.len() < 40_000 {
            let x = model.sample(&mut rng);
            if x[0] > thresholds[0] {
                brute.push(x[0]);
            }
        }
        let d = crate::stats::ks_two_sample(&draws, &brute);
        let crit = crate::stats::ks_two_sample_critical(draws.len(), brute.len(), 0.01);
        assert!(d < crit, "KS {d} vs critical {crit}");
    }
}
