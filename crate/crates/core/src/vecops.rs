//! Tiny dense-vector helpers for the low-dimensional state space (d is 2..8
//! in practice; nothing here is worth a linear-algebra dependency).

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

#[inline]
pub fn scaled_add_assign(a: &mut [f64], c: f64, b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += c * y;
    }
}

/// Sum of all components (used for the drift functional s'eta with eta = -1).
#[inline]
pub fn component_sum(a: &[f64]) -> f64 {
    a.iter().sum()
}
