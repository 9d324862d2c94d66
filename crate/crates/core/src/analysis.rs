//! Error analysis: even reflection of smooth data past the boundary, the
//! consistency residuals `xi1..xi6` of the scheme against a smooth pair
//! `(eta, theta)`, discrete error norms between nested runs, and
//! refinement studies that measure the observed convergence order.

use std::sync::Arc;

use log::info;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{diff_quotient, norm_l2d, Field, GridSpec};
use crate::model::{Mobility, ModelParams};
use crate::presets::Preset;
use crate::stepper::{Scheme, SimState, Simulation, ThetaSolveConfig};

/// A real function of `(t, x)`.
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// A real function of `x`.
pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Even extension of `f` from `[0, 1]` to `[-dx, 1 + dx]`.
#[derive(Clone)]
pub struct Reflected<F> {
    f: F,
    dx: f64,
}

impl<F: Fn(f64) -> f64> Reflected<F> {
    pub fn domain(&self) -> (f64, f64) {
        (-self.dx, 1.0 + self.dx)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        let slack = 4.0 * f64::EPSILON * (1.0 + self.dx);
        if !(x >= lo - slack && x <= hi + slack) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        let y = if x < 0.0 {
            -x
        } else if x > 1.0 {
            2.0 - x
        } else {
            x
        };
        Ok((self.f)(y))
    }
}

/// `f~(-x) = f(x)`, `f~(1 + x) = f(1 - x)` for `0 < x <= dx`.
pub fn reflect_extend<F: Fn(f64) -> f64>(f: F, dx: f64) -> Result<Reflected<F>> {
    if !(dx.is_finite() && dx > 0.0 && dx <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "dx",
            value: dx,
            reason: "must lie in (0, 1]",
        });
    }
    Ok(Reflected { f, dx })
}

/// Samples `f` at the nodes `-1..=K+1` of `grid` through the even extension.
/// At grid nodes the extension is the ghost fold, which is applied exactly.
pub fn sample_extended(grid: &GridSpec, f: impl Fn(f64) -> f64) -> Result<Field> {
    let ext = reflect_extend(f, grid.dx())?;
    let interior = (0..=grid.k() as isize)
        .map(|k| ext.eval(grid.x(k)))
        .collect::<Result<Vec<f64>>>()?;
    Field::from_interior(&interior)
}

/// A smooth function of `(t, x)` with closed-form partial derivatives.
#[derive(Clone)]
pub struct SmoothFn {
    value: SpaceTimeFn,
    d_t: SpaceTimeFn,
    d_x: SpaceTimeFn,
    d_xx: SpaceTimeFn,
}

impl SmoothFn {
    pub fn new<F, Ft, Fx, Fxx>(value: F, d_t: Ft, d_x: Fx, d_xx: Fxx) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Ft: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Fx: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Fxx: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            d_t: Arc::new(d_t),
            d_x: Arc::new(d_x),
            d_xx: Arc::new(d_xx),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0)
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        (self.value)(t, x)
    }

    pub fn d_t(&self, t: f64, x: f64) -> f64 {
        (self.d_t)(t, x)
    }

    pub fn d_x(&self, t: f64, x: f64) -> f64 {
        (self.d_x)(t, x)
    }

    pub fn d_xx(&self, t: f64, x: f64) -> f64 {
        (self.d_xx)(t, x)
    }

    /// Largest mismatch between the supplied derivatives and central
    /// differences of the value, relative to `max(1, |f|, |derivative|)`.
    pub fn consistency_error(&self, points: &[(f64, f64)]) -> f64 {
        let h1 = 1e-5;
        let h2 = 1e-3;
        let mut worst = 0.0_f64;
        for &(t, x) in points {
            let f = self.value(t, x);
            let ft = (self.value(t + h1, x) - self.value(t - h1, x)) / (2.0 * h1);
            let fx = (self.value(t, x + h1) - self.value(t, x - h1)) / (2.0 * h1);
            let fxx = (self.value(t, x + h2) - 2.0 * f + self.value(t, x - h2)) / (h2 * h2);
            for (fd, exact) in [(ft, self.d_t(t, x)), (fx, self.d_x(t, x)), (fxx, self.d_xx(t, x))] {
                let scale = 1.0_f64.max(f.abs()).max(exact.abs());
                worst = worst.max((fd - exact).abs() / scale);
            }
        }
        worst
    }
}

/// Smooth `(eta, theta)` used to evaluate consistency residuals.
#[derive(Clone)]
pub struct SmoothFieldPair {
    pub eta: SmoothFn,
    pub theta: SmoothFn,
}

/// Relative tolerance of [`SmoothFieldPair::check_consistency`].
pub const CONSISTENCY_TOL: f64 = 1e-5;

impl SmoothFieldPair {
    pub fn new(eta: SmoothFn, theta: SmoothFn) -> Self {
        Self { eta, theta }
    }

    /// Deterministic low-discrepancy points in `[0, t_max] x [0.02, 0.98]`.
    pub fn sample_points(count: usize, t_max: f64) -> Vec<(f64, f64)> {
        const G1: f64 = 0.618_033_988_749_894_8;
        const G2: f64 = 0.754_877_666_246_692_7;
        (0..count)
            .map(|i| {
                let i = i as f64;
                let t = t_max * (0.3 + i * G2).fract();
                let x = 0.02 + 0.96 * (0.5 + i * G1).fract();
                (t, x)
            })
            .collect()
    }

    /// Spot-checks the derivative closures against finite differences.
    pub fn check_consistency(&self, samples: usize, t_max: f64) -> Result<()> {
        let pts = Self::sample_points(samples, t_max);
        for (name, f) in [("eta", &self.eta), ("theta", &self.theta)] {
            let err = f.consistency_error(&pts);
            if !(err <= CONSISTENCY_TOL) {
                return Err(Error::Study(format!(
                    "{name}: derivatives inconsistent with values (relative error {err:e})"
                )));
            }
        }
        Ok(())
    }

    /// Residuals of the continuous system at `(t, x)`:
    /// `eta_t - k0^2 eta_xx + c (eta - 1) + kappa eta gamma(theta_x)` and
    /// `a0 theta_t - kappa (alpha(eta) gamma'(theta_x))_x - nu^2 theta_xx`.
    pub fn pde_residual(&self, params: &ModelParams, mobility: &Mobility, t: f64, x: f64) -> (f64, f64) {
        let p = params;
        let eta = self.eta.value(t, x);
        let eta_x = self.eta.d_x(t, x);
        let th_x = self.theta.d_x(t, x);
        let th_xx = self.theta.d_xx(t, x);
        let r_eta = self.eta.d_t(t, x) - p.kappa0 * p.kappa0 * self.eta.d_xx(t, x)
            + p.c * (eta - 1.0)
            + p.kappa * eta * p.gamma(th_x);
        let flux_x = eta * eta_x * p.gamma_prime(th_x) + p.alpha(eta) * p.gamma_second(th_x) * th_xx;
        let r_theta = mobility.eval(t, x) * self.theta.d_t(t, x) - p.kappa * flux_x - p.nu * p.nu * th_xx;
        (r_eta, r_theta)
    }
}

/// The six consistency residuals at time level `j+1`, nodes `0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub j: usize,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub xi3: Vec<f64>,
    pub xi4: Vec<f64>,
    pub xi5: Vec<f64>,
    pub xi6: Vec<f64>,
    /// `xi1 + xi2 + xi3`
    pub xi13: Vec<f64>,
    /// `xi4 + xi5 + xi6`
    pub xi46: Vec<f64>,
}

fn sample_at(grid: &GridSpec, f: &SmoothFn, t: f64) -> Field {
    sample_extended(grid, |x| f.value(t, x)).expect("nodes lie in the extended domain")
}

fn d_plus(f: &Field, k: isize, dx: f64) -> f64 {
    (f.at(k + 1) - f.at(k)) / dx
}

fn d_minus(f: &Field, k: isize, dx: f64) -> f64 {
    (f.at(k) - f.at(k - 1)) / dx
}

fn d_second(f: &Field, k: isize, dx: f64) -> f64 {
    (f.at(k + 1) - 2.0 * f.at(k) + f.at(k - 1)) / (dx * dx)
}

/// Evaluates `xi1..xi6` for the step `j -> j+1` of `scheme` against `pair`.
/// Stencils reaching past the boundary use the even extension.
pub fn residual_xi(scheme: &Scheme, pair: &SmoothFieldPair, j: usize) -> ResidualSet {
    let p = &scheme.params;
    let grid = &scheme.grid;
    let dx = grid.dx();
    let dt = grid.dt();
    let t0 = j as f64 * dt;
    let t1 = (j + 1) as f64 * dt;
    let eta1 = sample_at(grid, &pair.eta, t1);
    let th0 = sample_at(grid, &pair.theta, t0);
    let th1 = sample_at(grid, &pair.theta, t1);
    let n = grid.k() + 1;
    let mut set = ResidualSet {
        j,
        xi1: Vec::with_capacity(n),
        xi2: Vec::with_capacity(n),
        xi3: Vec::with_capacity(n),
        xi4: Vec::with_capacity(n),
        xi5: Vec::with_capacity(n),
        xi6: Vec::with_capacity(n),
        xi13: Vec::with_capacity(n),
        xi46: Vec::with_capacity(n),
    };
    let k02 = p.kappa0 * p.kappa0;
    let nu2 = p.nu * p.nu;
    for k in 0..n as isize {
        let x = grid.x(k);
        let eta = pair.eta.value(t1, x);
        let th_x = pair.theta.d_x(t1, x);
        let th_xx = pair.theta.d_xx(t1, x);

        let xi1 = pair.eta.d_t(t1, x) - (eta - pair.eta.value(t0, x)) / dt;
        let xi2 = k02 * (d_second(&eta1, k, dx) - pair.eta.d_xx(t1, x));
        let avg = 0.5 * (p.gamma(d_plus(&th0, k, dx)) + p.gamma(d_minus(&th0, k, dx)));
        let xi3 = -p.kappa * eta * (avg - p.gamma(th_x));

        let xi4 = -scheme.mobility.eval(t1, x)
            * ((pair.theta.value(t1, x) - pair.theta.value(t0, x)) / dt - pair.theta.d_t(t1, x));
        let xi5 = nu2 * (d_second(&th1, k, dx) - th_xx);
        let left = |i: isize| p.alpha(eta1.at(i)) * p.gamma_prime(d_minus(&th1, i, dx));
        let right = |i: isize| p.alpha(eta1.at(i)) * p.gamma_prime(d_plus(&th1, i, dx));
        let discrete = 0.5 * p.kappa * ((left(k + 1) - left(k)) / dx + (right(k) - right(k - 1)) / dx);
        let eta_x = pair.eta.d_x(t1, x);
        let exact = p.kappa * (eta * eta_x * p.gamma_prime(th_x) + p.alpha(eta) * p.gamma_second(th_x) * th_xx);
        let xi6 = discrete - exact;

        set.xi1.push(xi1);
        set.xi2.push(xi2);
        set.xi3.push(xi3);
        set.xi4.push(xi4);
        set.xi5.push(xi5);
        set.xi6.push(xi6);
        set.xi13.push(xi1 + xi2 + xi3);
        set.xi46.push(xi4 + xi5 + xi6);
    }
    set
}

/// Left side minus right side of the two error equations for one step,
/// nodes `0..=K`. The errors are `e = (H, Theta) - (eta~, theta~)` sampled
/// from `pair`. When `pair` solves the continuous system both defects
/// vanish; in general they equal minus the pair's [`SmoothFieldPair::pde_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEquationDefect {
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
}

pub fn error_equation_defect(
    scheme: &Scheme,
    pair: &SmoothFieldPair,
    before: &SimState,
    after: &SimState,
) -> Result<ErrorEquationDefect> {
    if after.j != before.j + 1 {
        return Err(Error::Study(format!(
            "states {} and {} are not consecutive",
            before.j, after.j
        )));
    }
    let p = &scheme.params;
    let grid = &scheme.grid;
    let dx = grid.dx();
    let dt = grid.dt();
    let j = before.j;
    let t0 = j as f64 * dt;
    let t1 = (j + 1) as f64 * dt;
    let xi = residual_xi(scheme, pair, j);

    let eta0 = sample_at(grid, &pair.eta, t0);
    let eta1 = sample_at(grid, &pair.eta, t1);
    let th0 = sample_at(grid, &pair.theta, t0);
    let th1 = sample_at(grid, &pair.theta, t1);
    let diff = |a: &Field, b: &Field| -> Result<Field> {
        Field::from_raw(a.raw().iter().zip(b.raw()).map(|(u, v)| u - v).collect())
    };
    let e_eta0 = diff(&before.h, &eta0)?;
    let e_eta1 = diff(&after.h, &eta1)?;
    let e_th0 = diff(&before.theta, &th0)?;
    let e_th1 = diff(&after.theta, &th1)?;
    let h1 = &after.h;
    let theta_j = &before.theta;
    let theta_n = &after.theta;

    let gamma = p.gamma_fn();
    let gamma_p = p.gamma_prime_fn();
    let k02 = p.kappa0 * p.kappa0;
    let nu2 = p.nu * p.nu;
    let n = grid.k() + 1;
    let mut out = ErrorEquationDefect {
        eta: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
    };
    // coefficient of the angle error in the flux terms, node i
    let flux_minus = |i: isize| {
        0.5 * (h1.at(i) + eta1.at(i)) * p.gamma_prime(d_minus(theta_n, i, dx)) * e_eta1.at(i)
            + p.alpha(eta1.at(i))
                * diff_quotient(&gamma_p, d_minus(theta_n, i, dx), d_minus(&th1, i, dx))
                * d_minus(&e_th1, i, dx)
    };
    let flux_plus = |i: isize| {
        0.5 * (h1.at(i) + eta1.at(i)) * p.gamma_prime(d_plus(theta_n, i, dx)) * e_eta1.at(i)
            + p.alpha(eta1.at(i))
                * diff_quotient(&gamma_p, d_plus(theta_n, i, dx), d_plus(&th1, i, dx))
                * d_plus(&e_th1, i, dx)
    };
    for k in 0..n as isize {
        let x = grid.x(k);
        let ki = k as usize;

        let lhs = (e_eta1.at(k) - e_eta0.at(k)) / dt;
        let coupling = diff_quotient(&gamma, d_plus(theta_j, k, dx), d_plus(&th0, k, dx)) * d_plus(&e_th0, k, dx)
            + diff_quotient(&gamma, d_minus(theta_j, k, dx), d_minus(&th0, k, dx)) * d_minus(&e_th0, k, dx);
        let avg = 0.5 * (p.gamma(d_plus(&th0, k, dx)) + p.gamma(d_minus(&th0, k, dx)));
        let rhs = k02 * d_second(&e_eta1, k, dx) - p.c * e_eta1.at(k) - 0.5 * p.kappa * h1.at(k) * coupling
            - p.kappa * e_eta1.at(k) * avg
            + xi.xi13[ki];
        out.eta.push(lhs - rhs);

        let a0 = scheme.mobility.eval(t1, x);
        let lhs = a0 * (e_th1.at(k) - e_th0.at(k)) / dt;
        let rhs = 0.5 * p.kappa * ((flux_minus(k + 1) - flux_minus(k)) / dx + (flux_plus(k) - flux_plus(k - 1)) / dx)
            + nu2 * d_second(&e_th1, k, dx)
            + xi.xi46[ki];
        out.theta.push(lhs - rhs);
    }
    Ok(out)
}

/// One recorded state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub j: usize,
    pub t: f64,
    pub h: Field,
    pub theta: Field,
}

/// States of a run recorded every `stride` steps, starting at `j = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    k: usize,
    dt: f64,
    stride: usize,
    snapshots: Vec<Snapshot>,
}

impl History {
    pub fn new(grid: &GridSpec, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidParameter {
                name: "stride",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        Ok(Self {
            k: grid.k(),
            dt: grid.dt(),
            stride,
            snapshots: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn find(&self, j: usize) -> Option<&Snapshot> {
        self.snapshots
            .binary_search_by_key(&j, |s| s.j)
            .ok()
            .map(|i| &self.snapshots[i])
    }

    /// Stores `state` if its step index is a multiple of the stride.
    pub fn record(&mut self, state: &SimState) -> Result<()> {
        if !state.j.is_multiple_of(self.stride) {
            return Ok(());
        }
        self.push(Snapshot {
            j: state.j,
            t: state.t,
            h: state.h.clone(),
            theta: state.theta.clone(),
        })
    }

    /// Appends a snapshot; step indices must increase.
    pub fn push(&mut self, snap: Snapshot) -> Result<()> {
        for f in [&snap.h, &snap.theta] {
            if f.k() != self.k {
                return Err(Error::LengthMismatch {
                    expected: self.k + 3,
                    actual: f.raw().len(),
                });
            }
        }
        if let Some(last) = self.snapshots.last() {
            if snap.j <= last.j {
                return Err(Error::Study(format!("snapshot {} recorded after {}", snap.j, last.j)));
            }
        }
        self.snapshots.push(snap);
        Ok(())
    }
}

/// Runs `sim` to the end of its grid horizon, recording every `stride` steps.
pub fn simulate(mut sim: Simulation, stride: usize) -> Result<History> {
    let mut hist = History::new(&sim.scheme.grid, stride)?;
    hist.record(&sim.state)?;
    for _ in 0..sim.scheme.grid.steps() {
        sim.step()?;
        hist.record(&sim.state)?;
    }
    Ok(hist)
}

/// Discrete `L2` errors between two nested runs at their shared nodes and
/// times.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Node count `K` of the comparison grid.
    pub k: usize,
    pub times: Vec<f64>,
    pub e_eta_l2: Vec<f64>,
    pub e_theta_l2: Vec<f64>,
    pub sup_e_eta: f64,
    pub sup_e_theta: f64,
}

fn matching_step(t: f64, fine: &History) -> Option<&Snapshot> {
    let j = (t / fine.dt).round();
    if j < 0.0 {
        return None;
    }
    let tol = 1e-9 * t.max(fine.dt);
    if (j * fine.dt - t).abs() > tol {
        return None;
    }
    fine.find(j as usize)
}

/// Compares two runs on the coarser grid's nodes at the coarser run's
/// snapshot times. The argument order does not matter.
pub fn error_norms(a: &History, b: &History) -> Result<ErrorReport> {
    let a_coarse = (a.k, -a.dt, a.snapshots.len()) <= (b.k, -b.dt, b.snapshots.len());
    let (coarse, fine) = if a_coarse { (a, b) } else { (b, a) };
    if fine.k % coarse.k != 0 {
        return Err(Error::NotNested(format!("K = {} does not divide K = {}", coarse.k, fine.k)));
    }
    if coarse.snapshots.is_empty() {
        return Err(Error::Study("no snapshots to compare".into()));
    }
    let ratio = (fine.k / coarse.k) as isize;
    let dx = 1.0 / coarse.k as f64;
    let mut report = ErrorReport {
        k: coarse.k,
        times: Vec::with_capacity(coarse.snapshots.len()),
        e_eta_l2: Vec::with_capacity(coarse.snapshots.len()),
        e_theta_l2: Vec::with_capacity(coarse.snapshots.len()),
        sup_e_eta: 0.0,
        sup_e_theta: 0.0,
    };
    for snap in &coarse.snapshots {
        let t = snap.j as f64 * coarse.dt;
        let other = matching_step(t, fine)
            .ok_or_else(|| Error::NotNested(format!("time {t} of the coarser run is not recorded in the finer one")))?;
        let restrict = |c: &Field, f: &Field| -> Vec<f64> {
            (0..=coarse.k as isize).map(|k| c.at(k) - f.at(k * ratio)).collect()
        };
        let e_eta = norm_l2d(&restrict(&snap.h, &other.h), dx);
        let e_theta = norm_l2d(&restrict(&snap.theta, &other.theta), dx);
        report.times.push(t);
        report.e_eta_l2.push(e_eta);
        report.e_theta_l2.push(e_theta);
        report.sup_e_eta = report.sup_e_eta.max(e_eta);
        report.sup_e_theta = report.sup_e_theta.max(e_theta);
    }
    Ok(report)
}

/// Initial profiles `eta0(x)`, `theta0(x)`.
#[derive(Clone)]
pub struct InitialData {
    eta0: ProfileFn,
    theta0: ProfileFn,
}

impl InitialData {
    pub fn new<F, G>(eta0: F, theta0: G) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            eta0: Arc::new(eta0),
            theta0: Arc::new(theta0),
        }
    }

    pub fn from_preset(preset: Preset) -> Self {
        Self::new(move |x| preset.eta0(x), move |x| preset.theta0(x))
    }

    pub fn eta0(&self, x: f64) -> f64 {
        (self.eta0)(x)
    }

    pub fn theta0(&self, x: f64) -> f64 {
        (self.theta0)(x)
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<(Field, Field)> {
        Ok((
            Field::from_fn(grid, |x| self.eta0(x))?,
            Field::from_fn(grid, |x| self.theta0(x))?,
        ))
    }
}

/// Setup of a refinement study: `dt = dt_per_dx * dx` on every level.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub levels: Vec<usize>,
    pub dt_per_dx: f64,
    pub horizon: f64,
    /// The reference grid has `reference_factor` times the finest `K`.
    pub reference_factor: usize,
    pub solver: ThetaSolveConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            levels: vec![25, 50, 100, 200],
            dt_per_dx: 0.1,
            horizon: 0.5,
            reference_factor: 4,
            solver: ThetaSolveConfig::default(),
        }
    }
}

/// Minimum number of levels a study fits through.
pub const MIN_LEVELS: usize = 3;
/// Errors at or below this are treated as exact and skip the order fit.
pub const ZERO_ERROR: f64 = 1e-13;

impl StudyConfig {
    pub fn reference_k(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(0) * self.reference_factor
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.len() < MIN_LEVELS {
            return Err(Error::Study(format!(
                "{} level(s) given, need at least {MIN_LEVELS} to fit an order",
                self.levels.len()
            )));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) || self.levels[0] < 2 {
            return Err(Error::Study("levels must be increasing node counts >= 2".into()));
        }
        if self.reference_factor < 2 {
            return Err(Error::Study("reference factor must be >= 2".into()));
        }
        if !(self.dt_per_dx.is_finite() && self.dt_per_dx > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt_per_dx",
                value: self.dt_per_dx,
                reason: "must be positive",
            });
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                value: self.horizon,
                reason: "must be positive",
            });
        }
        let finest = *self.levels.last().unwrap();
        if let Some(k) = self.levels.iter().find(|&&k| !finest.is_multiple_of(k)) {
            return Err(Error::NotNested(format!("level K = {k} does not divide K = {finest}")));
        }
        for &k in self.levels.iter().chain(std::iter::once(&self.reference_k())) {
            self.grid(k)?;
        }
        self.solver.validate()
    }

    /// Grid of the level with `k` cells, reaching exactly the horizon.
    pub fn grid(&self, k: usize) -> Result<GridSpec> {
        let dt = self.dt_per_dx / k as f64;
        let n = (self.horizon / dt).round();
        if n < 1.0 || (n * dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::Study(format!(
                "horizon {} is not a whole number of steps dt = {dt} at K = {k}",
                self.horizon
            )));
        }
        GridSpec::new(k, dt, n as usize)
    }
}

/// Sup-over-steps errors of one level against the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelError {
    pub level: usize,
    pub k: usize,
    pub dt: f64,
    pub e_eta: f64,
    pub e_theta: f64,
}

/// Least-squares slope of `log e` against `log h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub order: f64,
    /// Root-mean-square residual of the fit in `log e`.
    pub residual: f64,
}

/// Fits `e ~ C h^order`; `None` when fewer than two points or any error
/// is not strictly positive.
pub fn fit_order(h: &[f64], e: &[f64]) -> Option<OrderFit> {
    if h.len() != e.len() || h.len() < 2 || e.iter().any(|&v| !(v > ZERO_ERROR)) || h.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let order = sxy / sxx;
    let icpt = my - order * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - order * x).powi(2)).sum();
    Some(OrderFit {
        order,
        residual: (ss / n).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelError>,
    pub eta_fit: Option<OrderFit>,
    pub theta_fit: Option<OrderFit>,
    /// Slope between the two finest levels.
    pub pairwise_eta: Option<f64>,
    pub pairwise_theta: Option<f64>,
    pub reference_k: usize,
}

impl ConvergenceReport {
    /// The smaller of the two fitted orders, if both were fitted.
    pub fn fitted_order(&self) -> Option<f64> {
        match (self.eta_fit, self.theta_fit) {
            (Some(a), Some(b)) => Some(a.order.min(b.order)),
            _ => None,
        }
    }

    pub fn meets(&self, floor: f64) -> bool {
        self.fitted_order().is_some_and(|o| o >= floor)
    }

    /// True when every level matched the reference to roundoff.
    pub fn exact(&self) -> bool {
        self.levels.iter().all(|l| l.e_eta <= ZERO_ERROR && l.e_theta <= ZERO_ERROR)
    }
}

fn run_level(
    params: &ModelParams,
    mobility: &Mobility,
    ic: &InitialData,
    grid: GridSpec,
    solver: ThetaSolveConfig,
    stride: usize,
) -> Result<History> {
    let scheme = Scheme::new(*params, grid, mobility.clone())?;
    let (h0, th0) = ic.sample(&grid)?;
    simulate(Simulation::new(scheme, h0, th0, solver)?, stride)
}

/// Runs every level and a reference at `reference_factor` times the
/// finest `K` (in parallel), then fits the sup-over-steps errors against
/// `dx` in log-log scale.
pub fn convergence_study(
    params: &ModelParams,
    mobility: &Mobility,
    ic: &InitialData,
    cfg: &StudyConfig,
) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let ref_k = cfg.reference_k();
    // every level's time grid is a multiple of the finest level's
    let ref_stride = cfg.reference_factor;
    let mut jobs: Vec<(usize, usize, usize)> = cfg.levels.iter().enumerate().map(|(i, &k)| (i, k, 1)).collect();
    jobs.push((cfg.levels.len(), ref_k, ref_stride));
    let runs: Vec<Result<History>> = jobs
        .par_iter()
        .map(|&(level, k, stride)| {
            let grid = cfg.grid(k)?;
            info!("level {level}: K = {k}, dt = {:e}, N = {}", grid.dt(), grid.steps());
            run_level(params, mobility, ic, grid, cfg.solver, stride).map_err(|e| Error::LevelFailed {
                level,
                k,
                source: Box::new(e),
            })
        })
        .collect();
    let mut hists = runs.into_iter().collect::<Result<Vec<History>>>()?;
    let reference = hists.pop().expect("reference run present");

    let mut levels = Vec::with_capacity(hists.len());
    for (i, h) in hists.iter().enumerate() {
        let rep = error_norms(h, &reference)?;
        levels.push(LevelError {
            level: i,
            k: h.k(),
            dt: h.dt(),
            e_eta: rep.sup_e_eta,
            e_theta: rep.sup_e_theta,
        });
    }
    let dxs: Vec<f64> = levels.iter().map(|l| 1.0 / l.k as f64).collect();
    let e_eta: Vec<f64> = levels.iter().map(|l| l.e_eta).collect();
    let e_theta: Vec<f64> = levels.iter().map(|l| l.e_theta).collect();
    let n = levels.len();
    let pair = |e: &[f64]| fit_order(&dxs[n - 2..], &e[n - 2..]).map(|f| f.order);
    Ok(ConvergenceReport {
        eta_fit: fit_order(&dxs, &e_eta),
        theta_fit: fit_order(&dxs, &e_theta),
        pairwise_eta: pair(&e_eta),
        pairwise_theta: pair(&e_theta),
        levels,
        reference_k: ref_k,
    })
}
