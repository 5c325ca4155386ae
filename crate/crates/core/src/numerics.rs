//! Shared numerical kernels: upper envelopes of affine lines, exact Pareto
//! partial moments, piecewise-hyperbola envelopes for the limiting measure,
//! adaptive Simpson quadrature, and a stable log-sum-exp.

/// An affine function r -> intercept + slope * r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    pub fn new(slope: f64, intercept: f64) -> Self {
        Line { slope, intercept }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        self.intercept + self.slope * r
    }
}

/// One piece of an upper envelope: the line active on [start, end).
#[derive(Debug, Clone, Copy)]
pub struct EnvelopePiece {
    pub start: f64,
    pub end: f64,
    pub line: Line,
}

/// Upper envelope of a set of lines (convex, piecewise linear). Pieces are
/// returned in increasing order of r and tile (-inf, +inf).
pub fn upper_envelope(lines: &[Line]) -> Vec<EnvelopePiece> {
    assert!(!lines.is_empty());
    let mut sorted: Vec<Line> = lines.to_vec();
    sorted.sort_by(|a, b| {
        a.slope
            .partial_cmp(&b.slope)
            .unwrap()
            .then(a.intercept.partial_cmp(&b.intercept).unwrap())
    });
    // Keep only the highest intercept among equal slopes.
    let mut dedup: Vec<Line> = Vec::with_capacity(sorted.len());
    for l in sorted {
        if let Some(last) = dedup.last() {
            if last.slope == l.slope {
                *dedup.last_mut().unwrap() = l;
                continue;
            }
        }
        dedup.push(l);
    }
    // Intersection abscissa of two lines with distinct slopes.
    let cross = |a: &Line, b: &Line| (a.intercept - b.intercept) / (b.slope - a.slope);
    let mut hull: Vec<Line> = Vec::with_capacity(dedup.len());
    let mut starts: Vec<f64> = Vec::with_capacity(dedup.len());
    for l in dedup {
        loop {
            match hull.len() {
                0 => {
                    hull.push(l);
                    starts.push(f64::NEG_INFINITY);
                    break;
                }
                _ => {
                    let x = cross(hull.last().unwrap(), &l);
                    if x <= *starts.last().unwrap() {
                        hull.pop();
                        starts.pop();
                    } else {
                        hull.push(l);
                        starts.push(x);
                        break;
                    }
                }
            }
        }
    }
    let mut pieces = Vec::with_capacity(hull.len());
    for (i, line) in hull.iter().enumerate() {
        let end = if i + 1 < hull.len() { starts[i + 1] } else { f64::INFINITY };
        pieces.push(EnvelopePiece { start: starts[i], end, line: *line });
    }
    pieces
}

/// Exact integral of (intercept + slope*r) against the Pareto(alpha, xm)
/// density over [lo, hi] (with lo >= xm; hi may be infinite). Requires
/// alpha > 1 when slope != 0 and hi = inf.
pub fn pareto_partial_affine(alpha: f64, xm: f64, line: Line, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo >= xm && hi >= lo);
    if lo >= hi {
        return 0.0;
    }
    let pow = |r: f64, e: f64| if r.is_infinite() { 0.0 } else { r.powf(e) };
    let scale = xm.powf(alpha);
    let const_term = line.intercept * scale * (pow(lo, -alpha) - pow(hi, -alpha));
    let linear_term =
        line.slope * alpha / (alpha - 1.0) * scale * (pow(lo, 1.0 - alpha) - pow(hi, 1.0 - alpha));
    const_term + linear_term
}

/// E[envelope(R)] for R ~ Pareto(alpha, xm): exact sum of per-piece closed
/// forms over [xm, inf).
pub fn pareto_expect_envelope(alpha: f64, xm: f64, pieces: &[EnvelopePiece]) -> f64 {
    let mut total = 0.0;
    for p in pieces {
        let lo = p.start.max(xm);
        let hi = p.end;
        if hi > lo {
            total += pareto_partial_affine(alpha, xm, p.line, lo, hi);
        }
    }
    total
}

/// One decaying-power term of a hyperbola envelope: (num / (off + t))^alpha
/// active on [start, end).
#[derive(Debug, Clone, Copy)]
pub struct HyperbolaPiece {
    pub start: f64,
    pub end: f64,
    pub num: f64,
    pub off: f64,
}

/// Envelope of t -> max_j (num_j / (off_j + t))^alpha on [0, inf) for
/// num_j > 0, off_j > 0. Any pair of such curves crosses at most once, so the
/// winner is resolved piecewise from the pairwise crossing abscissae.
pub fn hyperbola_envelope(terms: &[(f64, f64)]) -> Vec<HyperbolaPiece> {
    let active: Vec<(f64, f64)> = terms.iter().copied().filter(|&(n, _)| n > 0.0).collect();
    if active.is_empty() {
        return Vec::new();
    }
    let mut cuts = vec![0.0f64];
    for (i, &(ni, ci)) in active.iter().enumerate() {
        for &(nj, cj) in active.iter().skip(i + 1) {
            if ni != nj {
                let t = (nj * ci - ni * cj) / (ni - nj);
                if t > 0.0 && t.is_finite() {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut pieces = Vec::with_capacity(cuts.len());
    for (i, &start) in cuts.iter().enumerate() {
        let end = if i + 1 < cuts.len() { cuts[i + 1] } else { f64::INFINITY };
        let probe = if end.is_finite() { 0.5 * (start + end) } else { start + 1.0 };
        let (num, off) = active
            .iter()
            .copied()
            .max_by(|&(n1, c1), &(n2, c2)| {
                (n1 / (c1 + probe)).partial_cmp(&(n2 / (c2 + probe))).unwrap()
            })
            .unwrap();
        pieces.push(HyperbolaPiece { start, end, num, off });
    }
    pieces
}

/// Evaluate the hyperbola envelope at t >= 0 raised to alpha.
pub fn hyperbola_envelope_eval(pieces: &[HyperbolaPiece], alpha: f64, t: f64) -> f64 {
    if pieces.is_empty() {
        return 0.0;
    }
    let idx = match pieces.binary_search_by(|p| p.start.partial_cmp(&t).unwrap()) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) => i - 1,
    };
    let p = &pieces[idx];
    (p.num / (p.off + t)).powf(alpha)
}

/// Exact tail integral int_t^inf envelope(u)^alpha du (alpha > 1).
pub fn hyperbola_envelope_tail(pieces: &[HyperbolaPiece], alpha: f64, t: f64) -> f64 {
    let seg = |num: f64, off: f64, lo: f64, hi: f64| -> f64 {
        let pow = |x: f64| if x.is_infinite() { 0.0 } else { (off + x).powf(1.0 - alpha) };
        num.powf(alpha) / (alpha - 1.0) * (pow(lo) - pow(hi))
    };
    let mut total = 0.0;
    for p in pieces {
        let lo = p.start.max(t);
        if p.end > lo {
            total += seg(p.num, p.off, lo, p.end);
        }
    }
    total
}

/// Adaptive Simpson quadrature with absolute tolerance budget `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let mut nodes = Vec::with_capacity(n);
    let m = n.div_ceil(2);
    for i in 1..=m {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        nodes.push((x, w));
        if x.abs() > 1e-14 {
            nodes.push((-x, w));
        }
    }
    nodes.truncate(n);
    nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    nodes
}

/// log(sum_j exp(x_j)) with max subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn envelope_of_two_lines() {
        let pieces = upper_envelope(&[Line::new(0.0, 0.0), Line::new(1.0, -2.0)]);
        assert_eq!(pieces.len(), 2);
        assert_relative_eq!(pieces[1].start, 2.0);
        assert_eq!(pieces[0].line, Line::new(0.0, 0.0));
    }

    #[test]
    fn envelope_drops_dominated_lines() {
        // middle line is everywhere below the other two
        let pieces = upper_envelope(&[
            Line::new(-1.0, 0.0),
            Line::new(0.0, -10.0),
            Line::new(1.0, 0.0),
        ]);
        assert_eq!(pieces.len(), 2);
    }

    #[test]
    fn pareto_positive_part_matches_closed_form() {
        // E (R - u)^+ = xm^a u^(1-a) / (a-1) for u >= xm
        let alpha = 2.5;
        let xm = 1.0;
        let u = 3.0;
        let pieces = upper_envelope(&[Line::new(0.0, 0.0), Line::new(1.0, -u)]);
        let got = pareto_expect_envelope(alpha, xm, &pieces);
        let want = xm.powf(alpha) * u.powf(1.0 - alpha) / (alpha - 1.0);
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn pareto_mean_via_envelope() {
        // envelope of the single line r gives E R = alpha xm / (alpha - 1)
        let alpha = 2.5;
        let xm = 2.0;
        let got = pareto_expect_envelope(
            alpha,
            xm,
            &upper_envelope(&[Line::new(1.0, 0.0)]),
        );
        assert_relative_eq!(got, alpha * xm / (alpha - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn hyperbola_tail_single_term() {
        // int_t^inf (1/(1+u))^a du = (1+t)^(1-a)/(a-1)
        let pieces = hyperbola_envelope(&[(1.0, 1.0)]);
        let alpha = 2.5;
        let got = hyperbola_envelope_tail(&pieces, alpha, 1.0);
        assert_relative_eq!(got, 2.0f64.powf(-1.5) / 1.5, max_relative = 1e-12);
    }

    #[test]
    fn hyperbola_envelope_picks_winner() {
        // (2/(4+t)) vs (1/(1+t)): cross at t = 2, the steeper one wins late
        let pieces = hyperbola_envelope(&[(2.0, 4.0), (1.0, 1.0)]);
        assert_eq!(pieces.len(), 2);
        let alpha = 2.0;
        assert_relative_eq!(
            hyperbola_envelope_eval(&pieces, alpha, 0.0),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            hyperbola_envelope_eval(&pieces, alpha, 10.0),
            (2.0f64 / 14.0).powi(2),
            max_relative = 1e-12
        );
    }

    #[test]
    fn simpson_integrates_pareto_tail() {
        let alpha = 2.5;
        let f = |r: f64| alpha * r.powf(-alpha - 1.0);
        let got = adaptive_simpson(&f, 1.0, 200.0, 1e-12);
        assert_relative_eq!(got, 1.0 - 200.0f64.powf(-alpha), epsilon = 1e-9);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // n-point rule is exact through degree 2n-1
        for n in [2usize, 5, 8, 16] {
            let nodes = gauss_legendre(n);
            assert_eq!(nodes.len(), n);
            let total: f64 = nodes.iter().map(|&(_, w)| w).sum();
            assert_relative_eq!(total, 2.0, epsilon = 1e-12);
            let quartic: f64 = nodes.iter().map(|&(x, w)| w * x.powi(4)).sum();
            if 2 * n - 1 >= 4 {
                assert_relative_eq!(quartic, 2.0 / 5.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn log_sum_exp_handles_large_values() {
        let v = [1000.0, 1000.0 + (2.0f64).ln()];
        assert_relative_eq!(log_sum_exp(&v), 1000.0 + 3.0f64.ln(), epsilon = 1e-12);
    }
}
