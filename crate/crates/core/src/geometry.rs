//! Target-set geometry: the ruin set as a union of half-spaces, its
//! enlargement (tilted directions plus coordinate caps), the boundary
//! functional r_b, per-state jump regions, and the drift-exit set.

use crate::error::{Result, RuinError};
use crate::vecops::{component_sum, dot};

/// The user-facing target: m half-spaces {y: y'v_j* > a_j*} normalized so
/// that eta'v_j* = -1, plus the enlargement and drift-exit parameters.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    pub vstar: Vec<Vec<f64>>,
    pub astar: Vec<f64>,
    pub delta: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl TargetSpec {
    /// Scales each raw (v, a) pair by 1/(-eta'v) so eta'v_j* = -1 exactly.
    /// Directions with eta'v >= 0 are the degenerate situations ruled out by
    /// the drift geometry.
    pub fn normalize(
        raw_dirs: Vec<Vec<f64>>,
        raw_offsets: Vec<f64>,
        delta: f64,
        beta: f64,
        gamma: f64,
    ) -> Result<Self> {
        if raw_dirs.is_empty() || raw_dirs.len() != raw_offsets.len() {
            return Err(RuinError::Validation(
                "target needs matching, nonempty direction and offset lists".into(),
            ));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(RuinError::Validation(format!("delta = {delta} must lie in (0,1)")));
        }
        if !(beta > 0.0) {
            return Err(RuinError::Validation("beta must be positive".into()));
        }
        if !(gamma > 0.0) {
            return Err(RuinError::Validation("gamma must be positive".into()));
        }
        let mut vstar = Vec::with_capacity(raw_dirs.len());
        let mut astar = Vec::with_capacity(raw_dirs.len());
        for (index, (v, a)) in raw_dirs.into_iter().zip(raw_offsets).enumerate() {
            // eta = -1, so eta'v = -sum(v)
            let eta_dot = -component_sum(&v);
            if eta_dot >= 0.0 {
                return Err(RuinError::DegenerateDirection { index, eta_dot });
            }
            let scale = -1.0 / eta_dot;
            if !(a > 0.0) {
                return Err(RuinError::Validation(format!("offset {index} must be positive")));
            }
            vstar.push(v.iter().map(|x| x * scale).collect());
            astar.push(a * scale);
        }
        Ok(TargetSpec { vstar, astar, delta, beta, gamma })
    }

    pub fn dim(&self) -> usize {
        self.vstar[0].len()
    }

    pub fn m(&self) -> usize {
        self.vstar.len()
    }

    /// r_b*(s) = max_j (s'v_j* - a_j* b); s is in b A* iff this is positive.
    pub fn r_star(&self, b: f64, s: &[f64]) -> f64 {
        r_of_pairs(&self.vstar, &self.astar, b, s)
    }

    /// True iff s is in the scaled drift-exit set b Gamma = {s'eta >= gamma b}
    /// (boundary inclusive).
    pub fn gamma_exit(&self, b: f64, s: &[f64]) -> bool {
        -component_sum(s) >= self.gamma * b
    }

    /// The 2m+d half-space system defining the enlarged set A: the original
    /// pairs, the delta-tilted pairs, and the d coordinate caps at level beta.
    pub fn enlarge(&self) -> EnlargedSystem {
        let d = self.dim();
        let m = self.m();
        let eta_norm2 = d as f64; // ||eta||_2^2 with eta = -1
        let mut vs = Vec::with_capacity(2 * m + d);
        let mut offs = Vec::with_capacity(2 * m + d);
        for v in &self.vstar {
            vs.push(v.clone());
        }
        offs.extend_from_slice(&self.astar);
        for v in &self.vstar {
            let tilted: Vec<f64> =
                v.iter().map(|x| (x - self.delta / eta_norm2) / (1.0 - self.delta)).collect();
            vs.push(tilted);
        }
        offs.extend_from_slice(&self.astar);
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            vs.push(e);
            offs.push(self.beta);
        }
        EnlargedSystem { vs, offs, m, dim: d }
    }
}

/// The enlarged half-space system (2m + d pairs).
#[derive(Debug, Clone)]
pub struct EnlargedSystem {
    pub vs: Vec<Vec<f64>>,
    pub offs: Vec<f64>,
    pub m: usize,
    pub dim: usize,
}

impl EnlargedSystem {
    pub fn len(&self) -> usize {
        self.vs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vs.is_empty()
    }

    /// r_b(s) = max_j (s'v_j - a_j b); s is in b A iff this is positive.
    pub fn r(&self, b: f64, s: &[f64]) -> f64 {
        r_of_pairs(&self.vs, &self.offs, b, s)
    }

    pub fn min_offset(&self) -> f64 {
        self.offs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The per-state jump region A_{b,a}(s0) expressed as thresholds on the
    /// increment: x is a member iff x'v_j > a (a_j b - s0'v_j) for some j.
    pub fn jump_region(&self, b: f64, a: f64, s0: &[f64]) -> JumpRegion {
        debug_assert!(a > 0.0 && a < 1.0);
        let thresholds: Vec<f64> =
            self.vs.iter().zip(&self.offs).map(|(v, aj)| a * (aj * b - dot(s0, v))).collect();
        JumpRegion { thresholds }
    }
}

fn r_of_pairs(vs: &[Vec<f64>], offs: &[f64], b: f64, s: &[f64]) -> f64 {
    vs.iter()
        .zip(offs)
        .map(|(v, a)| dot(s, v) - a * b)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Jump region thresholds on the increment, derived from (system, b, a, s0).
#[derive(Debug, Clone)]
pub struct JumpRegion {
    pub thresholds: Vec<f64>,
}

impl JumpRegion {
    /// Membership of the increment x: s0 + x lies in A_{b,a}(s0).
    pub fn contains(&self, system: &EnlargedSystem, x: &[f64]) -> bool {
        self.thresholds
            .iter()
            .zip(&system.vs)
            .any(|(u, v)| dot(x, v) > *u)
    }
}
