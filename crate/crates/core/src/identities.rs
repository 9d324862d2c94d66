//! Exact identities of the discrete calculus: product rules and summation
//! by parts. Each check returns both sides together with the magnitude of
//! the terms involved, so callers can judge roundoff.

use crate::grid::{diff_quotient, fbar_second, Field, ScalarFn};

/// Both sides of an identity and the sum of the absolute values of all
/// terms entering it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

impl IdentityCheck {
    pub fn abs_error(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    /// `|lhs - rhs| / scale` (or the absolute error when all terms vanish).
    pub fn rel_error(&self) -> f64 {
        if self.scale > 0.0 {
            self.abs_error() / self.scale
        } else {
            self.abs_error()
        }
    }
}

#[derive(Default)]
struct Side {
    value: f64,
    scale: f64,
}

impl Side {
    fn add(&mut self, v: f64) {
        self.value += v;
        self.scale += v.abs();
    }
}

fn check(lhs: Side, rhs: Side) -> IdentityCheck {
    IdentityCheck {
        lhs: lhs.value,
        rhs: rhs.value,
        scale: lhs.scale + rhs.scale,
    }
}

fn dp(f: &Field, k: isize, dx: f64) -> f64 {
    (f.at(k + 1) - f.at(k)) / dx
}

fn dm(f: &Field, k: isize, dx: f64) -> f64 {
    (f.at(k) - f.at(k - 1)) / dx
}

fn w(k: isize, last: isize) -> f64 {
    if k == 0 || k == last {
        0.5
    } else {
        1.0
    }
}

fn last(f: &Field) -> isize {
    f.k() as isize
}

/// `d+(f g) = (d+f)(m+g) + (m+f)(d+g)` at node `k`.
pub fn product_rule_plus(f: &Field, g: &Field, k: isize, dx: f64) -> IdentityCheck {
    let mut l = Side::default();
    l.add(f.at(k + 1) * g.at(k + 1) / dx);
    l.add(-f.at(k) * g.at(k) / dx);
    let mut r = Side::default();
    r.add(dp(f, k, dx) * 0.5 * (g.at(k) + g.at(k + 1)));
    r.add(0.5 * (f.at(k) + f.at(k + 1)) * dp(g, k, dx));
    check(l, r)
}

/// `d-(f g) = (d-f)(m-g) + (m-f)(d-g)` at node `k`.
pub fn product_rule_minus(f: &Field, g: &Field, k: isize, dx: f64) -> IdentityCheck {
    let mut l = Side::default();
    l.add(f.at(k) * g.at(k) / dx);
    l.add(-f.at(k - 1) * g.at(k - 1) / dx);
    let mut r = Side::default();
    r.add(dm(f, k, dx) * 0.5 * (g.at(k) + g.at(k - 1)));
    r.add(0.5 * (f.at(k) + f.at(k - 1)) * dm(g, k, dx));
    check(l, r)
}

/// `S'' f (d+g) dx + S'' (d-f) g dx = [(f_k g_{k+1} + f_{k-1} g_k)/2]_0^K`.
pub fn sbp1(f: &Field, g: &Field, dx: f64) -> IdentityCheck {
    let n = last(f);
    let mut l = Side::default();
    for k in 0..=n {
        l.add(w(k, n) * f.at(k) * dp(g, k, dx) * dx);
        l.add(w(k, n) * dm(f, k, dx) * g.at(k) * dx);
    }
    let bracket = |k: isize| 0.5 * (f.at(k) * g.at(k + 1) + f.at(k - 1) * g.at(k));
    let mut r = Side::default();
    r.add(bracket(n));
    r.add(-bracket(0));
    check(l, r)
}

/// `sum_{k<K} f (d+g) dx + S'' (d-f) g dx = [(m-f) g]_0^K`.
pub fn sbp2_forward(f: &Field, g: &Field, dx: f64) -> IdentityCheck {
    let n = last(f);
    let mut l = Side::default();
    for k in 0..n {
        l.add(f.at(k) * dp(g, k, dx) * dx);
    }
    for k in 0..=n {
        l.add(w(k, n) * dm(f, k, dx) * g.at(k) * dx);
    }
    let bracket = |k: isize| 0.5 * (f.at(k) + f.at(k - 1)) * g.at(k);
    let mut r = Side::default();
    r.add(bracket(n));
    r.add(-bracket(0));
    check(l, r)
}

/// `sum_{k=1..K} f (d-g) dx + S'' (d+f) g dx = [(m+f) g]_0^K`.
pub fn sbp2_backward(f: &Field, g: &Field, dx: f64) -> IdentityCheck {
    let n = last(f);
    let mut l = Side::default();
    for k in 1..=n {
        l.add(f.at(k) * dm(g, k, dx) * dx);
    }
    for k in 0..=n {
        l.add(w(k, n) * dp(f, k, dx) * g.at(k) * dx);
    }
    let bracket = |k: isize| 0.5 * (f.at(k) + f.at(k + 1)) * g.at(k);
    let mut r = Side::default();
    r.add(bracket(n));
    r.add(-bracket(0));
    check(l, r)
}

/// `sum_{k<K} (d+f)(d+g) dx = -S'' (d2 f) g dx + [(d1 f) g]_0^K`.
pub fn sbp5(f: &Field, g: &Field, dx: f64) -> IdentityCheck {
    let n = last(f);
    let mut l = Side::default();
    for k in 0..n {
        l.add(dp(f, k, dx) * dp(g, k, dx) * dx);
    }
    let mut r = Side::default();
    for k in 0..=n {
        let d2 = (f.at(k + 1) - 2.0 * f.at(k) + f.at(k - 1)) / (dx * dx);
        r.add(-w(k, n) * d2 * g.at(k) * dx);
    }
    let bracket = |k: isize| (f.at(k + 1) - f.at(k - 1)) / (2.0 * dx) * g.at(k);
    r.add(bracket(n));
    r.add(-bracket(0));
    check(l, r)
}

/// For folded `f`: `S'' (|d+f|^2 + |d-f|^2)/2 dx = sum_{k<K} |d+f|^2 dx`.
pub fn folded_gradient_identity(f: &Field, dx: f64) -> IdentityCheck {
    let n = last(f);
    let mut l = Side::default();
    for k in 0..=n {
        let (a, b) = (dp(f, k, dx), dm(f, k, dx));
        l.add(w(k, n) * 0.5 * (a * a + b * b) * dx);
    }
    let mut r = Side::default();
    for k in 0..n {
        let a = dp(f, k, dx);
        r.add(a * a * dx);
    }
    check(l, r)
}

/// `dF/d(xi, eta) - dF/d(xi~, eta~)
///    = Fbar''(xi, xi~; eta, eta~)(xi - xi~)/2 + Fbar''(eta, eta~; xi, xi~)(eta - eta~)/2`.
pub fn quotient_decomposition<F: ScalarFn + ?Sized>(f: &F, xi: f64, xi_t: f64, eta: f64, eta_t: f64) -> IdentityCheck {
    let mut l = Side::default();
    l.add(diff_quotient(f, xi, eta));
    l.add(-diff_quotient(f, xi_t, eta_t));
    let mut r = Side::default();
    r.add(0.5 * fbar_second(f, xi, xi_t, eta, eta_t) * (xi - xi_t));
    r.add(0.5 * fbar_second(f, eta, eta_t, xi, xi_t) * (eta - eta_t));
    check(l, r)
}
