//! Uniform 1D grid on (0, 1) with one ghost node on each side, and the
//! discrete calculus used by the scheme: average and difference operators,
//! the trapezoidal summation, discrete norms, and difference quotients.
//!
//! Node values are stored for `k = -1..=K+1`. The ghost nodes encode the
//! homogeneous Neumann condition through an even fold
//! (`f[-1] = f[1]`, `f[K+1] = f[K-1]`), which makes the central first
//! difference vanish at both boundary nodes.

use crate::error::{Error, Result};

/// Space/time discretization of `Q = (0, T) x (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    k: usize,
    dx: f64,
    dt: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(k: usize, dt: f64, n: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidGrid(format!("K = {k}, need K >= 2")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt = {dt}, need dt > 0")));
        }
        if n == 0 {
            return Err(Error::InvalidGrid("N = 0, need N >= 1".into()));
        }
        Ok(Self {
            k,
            dx: 1.0 / k as f64,
            dt,
            n,
        })
    }

    /// Number of cells; nodes are `0..=K`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.dt
    }

    /// Node coordinate `k / K`.
    pub fn x(&self, k: isize) -> f64 {
        k as f64 / self.k as f64
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.k, dt, self.n)
    }

    pub fn with_steps(&self, n: usize) -> Result<Self> {
        Self::new(self.k, self.dt, n)
    }

    fn check(&self, f: &Field, k: isize, lo: isize, hi: isize) -> Result<()> {
        if f.k() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k + 3,
                actual: f.values.len(),
            });
        }
        if k < lo || k > hi {
            return Err(Error::IndexOutOfRange {
                index: k,
                upper: self.k as isize + 1,
            });
        }
        Ok(())
    }

    /// Forward difference `(f[k+1] - f[k]) / dx`, valid for `k = -1..=K`.
    pub fn diff_plus(&self, f: &Field, k: isize) -> Result<f64> {
        self.check(f, k, -1, self.k as isize)?;
        Ok((f.at(k + 1) - f.at(k)) / self.dx)
    }

    /// Backward difference `(f[k] - f[k-1]) / dx`, valid for `k = 0..=K+1`.
    pub fn diff_minus(&self, f: &Field, k: isize) -> Result<f64> {
        self.check(f, k, 0, self.k as isize + 1)?;
        Ok((f.at(k) - f.at(k - 1)) / self.dx)
    }

    /// Central difference `(f[k+1] - f[k-1]) / (2 dx)`, valid for `k = 0..=K`.
    pub fn diff_c1(&self, f: &Field, k: isize) -> Result<f64> {
        self.check(f, k, 0, self.k as isize)?;
        Ok((f.at(k + 1) - f.at(k - 1)) / (2.0 * self.dx))
    }

    /// Second difference `(f[k+1] - 2 f[k] + f[k-1]) / dx^2`, valid for `k = 0..=K`.
    pub fn diff_c2(&self, f: &Field, k: isize) -> Result<f64> {
        self.check(f, k, 0, self.k as isize)?;
        Ok((f.at(k + 1) - 2.0 * f.at(k) + f.at(k - 1)) / (self.dx * self.dx))
    }

    pub fn avg_plus(&self, f: &Field, k: isize) -> Result<f64> {
        self.check(f, k, -1, self.k as isize)?;
        Ok(0.5 * (f.at(k) + f.at(k + 1)))
    }

    pub fn avg_minus(&self, f: &Field, k: isize) -> Result<f64> {
        self.check(f, k, 0, self.k as isize + 1)?;
        Ok(0.5 * (f.at(k) + f.at(k - 1)))
    }

    /// Discrete L2 norm `sqrt(trap_sum(|f|^2) dx)` over nodes `0..=K`.
    pub fn norm_l2d(&self, f: &Field) -> f64 {
        norm_l2d(f.interior(), self.dx)
    }

    pub fn norm_linfd(&self, f: &Field) -> f64 {
        norm_linfd(f.interior())
    }

    /// `sqrt(sum_{k=0}^{K-1} |delta^+ f_k|^2 dx)`.
    pub fn dirichlet_seminorm(&self, f: &Field) -> f64 {
        dirichlet_seminorm(f.interior(), self.dx)
    }
}

/// Node values `f[-1..=K+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    /// Builds a field from the interior nodes `0..=K` and folds the ghosts.
    pub fn from_interior(interior: &[f64]) -> Result<Self> {
        if interior.len() < 3 {
            return Err(Error::InvalidGrid(format!(
                "{} interior nodes, need at least 3",
                interior.len()
            )));
        }
        let mut values = Vec::with_capacity(interior.len() + 2);
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(0.0);
        Self::from_raw(values)?.folded()
    }

    /// Wraps `K+3` raw values, ghosts included, without folding.
    pub fn from_raw(values: Vec<f64>) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::InvalidGrid(format!(
                "{} values, need K + 3 >= 5",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn constant(k: usize, value: f64) -> Self {
        Self {
            values: vec![value; k + 3],
        }
    }

    /// Evaluates `f(x_k)` at `k = 0..=K` and folds.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        let interior: Vec<f64> = (0..=grid.k() as isize).map(|k| f(grid.x(k))).collect();
        Self::from_interior(&interior)
    }

    pub fn k(&self) -> usize {
        self.values.len() - 3
    }

    /// Value at node `k` in `-1..=K+1`. Panics outside the window.
    #[inline]
    pub fn at(&self, k: isize) -> f64 {
        self.values[(k + 1) as usize]
    }

    pub fn get(&self, k: isize) -> Result<f64> {
        let upper = self.k() as isize + 1;
        if k < -1 || k > upper {
            return Err(Error::IndexOutOfRange { index: k, upper });
        }
        Ok(self.at(k))
    }

    /// Nodes `0..=K`.
    pub fn interior(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    pub fn interior_mut(&mut self) -> &mut [f64] {
        let n = self.values.len();
        &mut self.values[1..n - 1]
    }

    /// All `K+3` values, ghosts included.
    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    /// Overwrites the ghosts so that the central difference vanishes at
    /// `k = 0` and `k = K`. Rejects non-finite entries.
    pub fn folded(mut self) -> Result<Self> {
        self.fold()?;
        Ok(self)
    }

    pub fn fold(&mut self) -> Result<()> {
        let n = self.values.len();
        if let Some(i) = self.values[1..n - 1].iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i as isize });
        }
        self.values[0] = self.values[2];
        self.values[n - 1] = self.values[n - 3];
        Ok(())
    }

    pub fn is_folded(&self) -> bool {
        let n = self.values.len();
        self.values[0] == self.values[2] && self.values[n - 1] == self.values[n - 3]
    }

    pub fn min(&self) -> f64 {
        self.interior().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.interior().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        norm_linfd(self.interior())
    }
}

/// Free-function form of [`Field::folded`].
pub fn fold_ghosts(f: Field) -> Result<Field> {
    f.folded()
}

/// Trapezoidal weight of node `k` among `0..=K` (1/2 at both ends).
#[inline]
pub fn trap_weight(k: usize, last: usize) -> f64 {
    if k == 0 || k == last {
        0.5
    } else {
        1.0
    }
}

/// `g_0/2 + g_1 + ... + g_{K-1} + g_K/2`, without the `dx` factor.
pub fn trap_sum(g: &[f64]) -> f64 {
    match g.len() {
        0 => 0.0,
        1 => 0.5 * g[0],
        n => 0.5 * (g[0] + g[n - 1]) + g[1..n - 1].iter().sum::<f64>(),
    }
}

pub fn norm_l2d(interior: &[f64], dx: f64) -> f64 {
    let sq: Vec<f64> = interior.iter().map(|v| v * v).collect();
    (trap_sum(&sq) * dx).sqrt()
}

pub fn norm_linfd(interior: &[f64]) -> f64 {
    interior.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn dirichlet_seminorm(interior: &[f64], dx: f64) -> f64 {
    interior
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]) / dx;
            d * d * dx
        })
        .sum::<f64>()
        .sqrt()
}

/// A scalar function with its first two derivatives.
pub trait ScalarFn {
    fn value(&self, x: f64) -> f64;
    fn deriv(&self, x: f64) -> f64;
    fn second(&self, x: f64) -> f64;
}

/// Closure triple `(F, F', F'')`.
pub struct FnTriple<F, G, H>(pub F, pub G, pub H);

impl<F, G, H> ScalarFn for FnTriple<F, G, H>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    fn value(&self, x: f64) -> f64 {
        (self.0)(x)
    }
    fn deriv(&self, x: f64) -> f64 {
        (self.1)(x)
    }
    fn second(&self, x: f64) -> f64 {
        (self.2)(x)
    }
}

const QUOTIENT_REL_TOL: f64 = 1e-12;

#[inline]
fn coincident(u: f64, v: f64) -> bool {
    (u - v).abs() <= QUOTIENT_REL_TOL * 1.0_f64.max(u.abs()).max(v.abs())
}

/// Difference quotient `dF/d(u, v)`: the secant slope, or `F'(v)` when the
/// arguments coincide.
pub fn diff_quotient<F: ScalarFn + ?Sized>(f: &F, u: f64, v: f64) -> f64 {
    if coincident(u, v) {
        f.deriv(v)
    } else {
        (f.value(u) - f.value(v)) / (u - v)
    }
}

/// `d/du [dF/d(u, v)]`.
fn diff_quotient_du<F: ScalarFn + ?Sized>(f: &F, u: f64, v: f64) -> f64 {
    if coincident(u, v) {
        0.5 * f.second(v)
    } else {
        let h = u - v;
        (f.deriv(u) * h - (f.value(u) - f.value(v))) / (h * h)
    }
}

/// Four-point second difference quotient
/// `Fbar''(xi, xi_t; eta, eta_t)`.
pub fn fbar_second<F: ScalarFn + ?Sized>(f: &F, xi: f64, xi_t: f64, eta: f64, eta_t: f64) -> f64 {
    if coincident(xi, xi_t) {
        diff_quotient_du(f, xi_t, eta) + diff_quotient_du(f, xi_t, eta_t)
    } else {
        let at_xi = diff_quotient(f, xi, eta) + diff_quotient(f, xi, eta_t);
        let at_xi_t = diff_quotient(f, xi_t, eta) + diff_quotient(f, xi_t, eta_t);
        (at_xi - at_xi_t) / (xi - xi_t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(k: usize) -> GridSpec {
        GridSpec::new(k, 0.1, 1).unwrap()
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        assert!(GridSpec::new(1, 0.1, 1).is_err());
        assert!(GridSpec::new(4, 0.0, 1).is_err());
        assert!(GridSpec::new(4, f64::NAN, 1).is_err());
        assert!(GridSpec::new(4, 0.1, 0).is_err());
        let g = grid(7);
        assert!((g.dx() * 7.0 - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn fold_small_field() {
        let f = Field::from_interior(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.at(-1), 2.0);
        assert_eq!(f.at(3), 2.0);
        assert_eq!(f.interior(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn fold_constant_is_identity() {
        let f = Field::constant(5, 0.7);
        assert_eq!(f.clone().folded().unwrap(), f);
    }

    #[test]
    fn fold_zeroes_central_difference() {
        let g = grid(6);
        let f = Field::from_interior(&[0.3, -1.2, 4.0, 2.2, 0.1, 9.0, -3.3]).unwrap();
        assert_eq!(g.diff_c1(&f, 0).unwrap(), 0.0);
        assert_eq!(g.diff_c1(&f, 6).unwrap(), 0.0);
    }

    #[test]
    fn fold_rejects_non_finite() {
        assert!(matches!(
            Field::from_interior(&[0.0, f64::NAN, 1.0]),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn differences_of_linear_and_quadratic() {
        let g = grid(5);
        let raw: Vec<f64> = (-1..=6).map(|k| k as f64 * g.dx()).collect();
        let lin = Field::from_raw(raw).unwrap();
        for k in 0..5 {
            assert_relative_eq!(g.diff_plus(&lin, k).unwrap(), 1.0, epsilon = 1e-14);
        }
        for k in 1..5 {
            assert!(g.diff_c2(&lin, k).unwrap().abs() < 1e-12);
        }
        let raw: Vec<f64> = (-1..=6).map(|k| (k as f64 * g.dx()).powi(2)).collect();
        let quad = Field::from_raw(raw).unwrap();
        for k in 1..5 {
            assert_relative_eq!(g.diff_c2(&quad, k).unwrap(), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn index_window_is_enforced() {
        let g = grid(4);
        let f = Field::constant(4, 1.0);
        assert!(g.diff_plus(&f, 5).is_err());
        assert!(g.diff_minus(&f, -1).is_err());
        assert!(g.diff_c2(&f, 5).is_err());
        assert!(g.avg_plus(&f, -2).is_err());
        assert!(f.get(6).is_err());
        assert!(g.diff_plus(&Field::constant(3, 1.0), 0).is_err());
    }

    #[test]
    fn averages() {
        let g = grid(2);
        let f = Field::from_raw(vec![0.0, 0.0, 2.0, 4.0, 2.0]).unwrap();
        assert_eq!(g.avg_plus(&f, 0).unwrap(), 1.0);
        assert_eq!(g.avg_minus(&f, 1).unwrap(), 1.0);
        let c = Field::constant(2, 3.5);
        assert_eq!(g.avg_plus(&c, 1).unwrap(), 3.5);
    }

    #[test]
    fn trapezoidal_sum() {
        assert_eq!(trap_sum(&[1.0; 5]), 4.0);
        assert_eq!(trap_sum(&[0.0, 1.0, 2.0, 3.0, 4.0]), 8.0);
        assert_eq!(trap_sum(&[1.0, 1.0, 1.0]), 2.0);
        let k = 17;
        assert_relative_eq!(trap_sum(&vec![1.0; k + 1]) / k as f64, 1.0);
    }

    #[test]
    fn norms() {
        let g = grid(8);
        let c = Field::constant(8, -1.5);
        assert_relative_eq!(g.norm_l2d(&c), 1.5, epsilon = 1e-14);
        assert_eq!(g.norm_linfd(&c), 1.5);
        assert_eq!(g.dirichlet_seminorm(&c), 0.0);
        let z = Field::constant(8, 0.0);
        assert_eq!(g.norm_l2d(&z) + g.norm_linfd(&z) + g.dirichlet_seminorm(&z), 0.0);
        let lin = Field::from_fn(&g, |x| x).unwrap();
        assert_relative_eq!(g.dirichlet_seminorm(&lin), 1.0, epsilon = 1e-14);
    }

    fn gamma1() -> FnTriple<impl Fn(f64) -> f64, impl Fn(f64) -> f64, impl Fn(f64) -> f64> {
        FnTriple(
            |v: f64| (1.0 + v * v).sqrt(),
            |v: f64| v / (1.0 + v * v).sqrt(),
            |v: f64| 1.0 / (1.0 + v * v).powf(1.5),
        )
    }

    #[test]
    fn difference_quotient_branches() {
        let f = gamma1();
        assert_relative_eq!(diff_quotient(&f, 3.0, 3.0), 3.0 / 10f64.sqrt());
        assert_relative_eq!(diff_quotient(&f, 1.0, 0.0), 2f64.sqrt() - 1.0, epsilon = 1e-15);
        assert_relative_eq!(diff_quotient(&f, 0.2, 0.2 + 1e-9), f.deriv(0.2), epsilon = 1e-6);
        assert_eq!(diff_quotient(&f, 0.3, -2.0), diff_quotient(&f, -2.0, 0.3));
    }

    #[test]
    fn fbar_of_quadratic_is_two() {
        let q = FnTriple(|x: f64| x * x, |x: f64| 2.0 * x, |_x: f64| 2.0);
        for &(a, b, c, d) in &[(0.1, 0.7, -0.3, 2.0), (0.5, 0.5, 1.0, -1.0), (1.0, 1.0, 1.0, 1.0)] {
            assert_relative_eq!(fbar_second(&q, a, b, c, d), 2.0, epsilon = 1e-12);
        }
    }
}
