//! One time step of the scheme: a linear implicit update of the orientation
//! order `H`, then a nonlinear implicit update of the angle `Theta` using
//! the new `H`. Also the discrete energy and the per-step verifiers for range
//! preservation and energy dissipation.
//!
//! The angle update at step `j+1` is the stationarity condition of the
//! strictly convex functional
//!
//! ```text
//! E(T) = S''[ a0_k (T_k - T^j_k)^2 / (2 dt) ] dx
//!      + sum_{k<K} [ nu^2/2 |d+T_k|^2 + kappa m_k gamma(d+T_k) ] dx,
//! m_k = (alpha(H_k) + alpha(H_{k+1})) / 2,
//! ```
//!
//! with the residual equal to the gradient divided by the trapezoidal
//! weights, so the update has exactly one solution for every `dt > 0`.
//! The default solver is a primal-dual Newton method that carries the edge
//! flux as an extra unknown; it stays robust when `eps` is small and `gamma`
//! is close to `|.|`.

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::grid::{trap_sum, Field, GridSpec};
use crate::linalg::Tridiagonal;
use crate::model::{dt_existence_bound, Mobility, ModelParams};

/// Slack allowed on the range bounds of `H` and `Theta`.
pub const RANGE_TOL: f64 = 1e-10;
/// Relative slack on the dissipation inequality, scaled by `max(1, F^0) / dt`.
pub const DISSIPATION_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaMethod {
    Newton,
    Picard,
}

impl std::str::FromStr for ThetaMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "newton" => Ok(Self::Newton),
            "picard" => Ok(Self::Picard),
            other => Err(format!("unknown theta solver `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSolveConfig {
    pub method: ThetaMethod,
    /// Absolute tolerance on the residual max-norm.
    pub tol_abs: f64,
    pub max_iter: usize,
    /// Only warn (instead of failing) when `dt` exceeds the sufficient
    /// existence bound.
    pub warn_only_on_exist_cond: bool,
}

impl Default for ThetaSolveConfig {
    fn default() -> Self {
        Self {
            method: ThetaMethod::Newton,
            tol_abs: 1e-12,
            max_iter: 50,
            warn_only_on_exist_cond: true,
        }
    }
}

impl ThetaSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_abs.is_finite() && self.tol_abs > 0.0) {
            return Err(Error::InvalidParameter {
                name: "solver.tol_abs",
                value: self.tol_abs,
                reason: "must be positive",
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "solver.max_iter",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    pub iterations: usize,
    pub residual: f64,
    /// Residual max-norm at each iterate, initial guess first.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub j: usize,
    pub t: f64,
    pub h: Field,
    pub theta: Field,
    pub energy: f64,
    pub last_solver: SolverStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub j: usize,
    pub range_ok: bool,
    /// Largest amount by which a bound was exceeded (0 when none was).
    pub range_violation: f64,
    pub dissipation_ok: bool,
    /// LHS - RHS of the dissipation inequality; nonpositive when it holds exactly.
    pub dissipation_slack: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    pub theta_iters: usize,
    pub theta_residual: f64,
}

impl StepReport {
    pub fn passed(&self) -> bool {
        self.range_ok && self.dissipation_ok
    }
}

/// Bounds fixed by the initial data of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunBounds {
    /// `max_k |Theta^0_k|`
    pub xi0: f64,
    /// `max(1, F^0)`
    pub energy_scale: f64,
}

impl RunBounds {
    pub fn from_initial(state: &SimState) -> Self {
        Self {
            xi0: state.theta.max_abs(),
            energy_scale: state.energy.max(1.0),
        }
    }

    pub fn dissipation_tol(&self, dt: f64) -> f64 {
        DISSIPATION_REL_TOL * self.energy_scale / dt
    }
}

/// Parameters, grid and mobility of one discretized problem.
#[derive(Debug, Clone)]
pub struct Scheme {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub mobility: Mobility,
}

impl Scheme {
    pub fn new(params: ModelParams, grid: GridSpec, mobility: Mobility) -> Result<Self> {
        params.validate()?;
        mobility.check_against(&params)?;
        Ok(Self {
            params,
            grid,
            mobility,
        })
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        if f.k() != self.grid.k() {
            return Err(Error::LengthMismatch {
                expected: self.grid.k() + 3,
                actual: f.raw().len(),
            });
        }
        Ok(())
    }

    pub fn initial_state(&self, h0: Field, theta0: Field) -> Result<SimState> {
        self.check_field(&h0)?;
        self.check_field(&theta0)?;
        let h = h0.folded()?;
        let theta = theta0.folded()?;
        let energy = self.energy(&h, &theta);
        Ok(SimState {
            j: 0,
            t: 0.0,
            h,
            theta,
            energy,
            last_solver: SolverStats::default(),
        })
    }

    /// `alpha0(t, x_k)` for `k = 0..=K`.
    pub fn mobility_at(&self, t: f64) -> Vec<f64> {
        (0..=self.grid.k() as isize)
            .map(|k| self.mobility.eval(t, self.grid.x(k)))
            .collect()
    }

    pub fn dt_exist(&self) -> f64 {
        dt_existence_bound(&self.params, self.grid.dx())
    }

    /// Matrix form of the `H` update: `A H^{j+1} = H^j + c dt 1` with
    /// `A = I + dt (-kappa0^2 D2 + c I + kappa V)`.
    pub fn assemble_eta_system(&self, h_prev: &Field, theta_prev: &Field) -> (Tridiagonal, Vec<f64>) {
        let p = &self.params;
        let k_max = self.grid.k();
        let dx = self.grid.dx();
        let dt = self.grid.dt();
        let n = k_max + 1;
        let diff = p.kappa0 * p.kappa0 / (dx * dx);
        let mut a = Tridiagonal::zeros(n);
        let mut rhs = Vec::with_capacity(n);
        for k in 0..n {
            let ki = k as isize;
            let sp = (theta_prev.at(ki + 1) - theta_prev.at(ki)) / dx;
            let sm = (theta_prev.at(ki) - theta_prev.at(ki - 1)) / dx;
            let v = 0.5 * (p.gamma(sp) + p.gamma(sm));
            a.diag[k] = 1.0 + dt * (2.0 * diff + p.c + p.kappa * v);
            rhs.push(h_prev.at(ki) + p.c * dt);
        }
        for k in 0..n - 1 {
            a.upper[k] = -dt * diff;
            a.lower[k] = -dt * diff;
        }
        // ghost fold doubles the inward coupling at both ends
        a.upper[0] *= 2.0;
        a.lower[n - 2] *= 2.0;
        (a, rhs)
    }

    pub fn step_eta(&self, h_prev: &Field, theta_prev: &Field) -> Result<Field> {
        let (a, rhs) = self.assemble_eta_system(h_prev, theta_prev);
        a.check_diagonally_dominant()?;
        let h = a.solve(&rhs)?;
        Field::from_interior(&h)
    }

    /// `m_k = (alpha(H_k) + alpha(H_{k+1})) / 2` for `k = -1..=K`, offset by one.
    fn edge_coefficients(&self, h_next: &Field) -> Vec<f64> {
        let k_max = self.grid.k() as isize;
        (-1..=k_max)
            .map(|k| 0.5 * (self.params.alpha(h_next.at(k)) + self.params.alpha(h_next.at(k + 1))))
            .collect()
    }

    /// `kappa/2 { d+(alpha(H) g(d-T)) + d-(alpha(H) g(d+T)) }` at `k = 0..=K`.
    fn flux_divergence(&self, m: &[f64], theta: &Field) -> Vec<f64> {
        let p = &self.params;
        let k_max = self.grid.k() as isize;
        let dx = self.grid.dx();
        // flux on edge (k, k+1), k = -1..=K
        let flux: Vec<f64> = (-1..=k_max)
            .map(|k| {
                let s = (theta.at(k + 1) - theta.at(k)) / dx;
                m[(k + 1) as usize] * p.gamma_prime(s)
            })
            .collect();
        (0..=k_max as usize)
            .map(|k| p.kappa * (flux[k + 1] - flux[k]) / dx)
            .collect()
    }

    fn laplacian(&self, theta: &Field) -> Vec<f64> {
        let dx2 = self.grid.dx() * self.grid.dx();
        (0..=self.grid.k() as isize)
            .map(|k| (theta.at(k + 1) - 2.0 * theta.at(k) + theta.at(k - 1)) / dx2)
            .collect()
    }

    /// Residual of the angle update at `guess`, nodes `0..=K`.
    /// `t_next` is the time level `(j+1) dt` at which `alpha0` is sampled.
    pub fn theta_residual(
        &self,
        t_next: f64,
        h_next: &Field,
        theta_prev: &Field,
        guess: &Field,
    ) -> Vec<f64> {
        let a0 = self.mobility_at(t_next);
        let m = self.edge_coefficients(h_next);
        self.residual_with(&a0, &m, theta_prev, guess)
    }

    fn residual_with(&self, a0: &[f64], m: &[f64], theta_prev: &Field, guess: &Field) -> Vec<f64> {
        let nu2 = self.params.nu * self.params.nu;
        let dt = self.grid.dt();
        let div = self.flux_divergence(m, guess);
        let lap = self.laplacian(guess);
        (0..a0.len())
            .map(|k| {
                let ki = k as isize;
                a0[k] * (guess.at(ki) - theta_prev.at(ki)) / dt - div[k] - nu2 * lap[k]
            })
            .collect()
    }

    /// Analytic Jacobian of [`Self::theta_residual`] with respect to the
    /// nodal unknowns `0..=K`; ghost columns are folded onto `1` and `K-1`.
    pub fn theta_jacobian(&self, t_next: f64, h_next: &Field, guess: &Field) -> Tridiagonal {
        let a0 = self.mobility_at(t_next);
        let m = self.edge_coefficients(h_next);
        self.jacobian_with(&a0, &m, guess)
    }

    fn jacobian_with(&self, a0: &[f64], m: &[f64], guess: &Field) -> Tridiagonal {
        let p = &self.params;
        let dx = self.grid.dx();
        let curvature: Vec<f64> = (-1..=self.grid.k() as isize)
            .map(|k| p.gamma_second((guess.at(k + 1) - guess.at(k)) / dx))
            .collect();
        self.linearization(a0, m, &curvature)
    }

    /// Tridiagonal operator `a0/dt - d(kappa m curv + nu^2) d` with one
    /// curvature coefficient per edge `k = -1..=K`, ghost columns folded.
    fn linearization(&self, a0: &[f64], m: &[f64], curvature: &[f64]) -> Tridiagonal {
        let p = &self.params;
        let k_max = self.grid.k();
        let dx2 = self.grid.dx() * self.grid.dx();
        let dt = self.grid.dt();
        let nu2 = p.nu * p.nu;
        let cond: Vec<f64> = m
            .iter()
            .zip(curvature)
            .map(|(mk, ck)| (p.kappa * mk * ck + nu2) / dx2)
            .collect();
        let n = k_max + 1;
        let mut jac = Tridiagonal::zeros(n);
        for k in 0..n {
            let left = cond[k];
            let right = cond[k + 1];
            jac.diag[k] = a0[k] / dt + left + right;
            if k + 1 < n {
                jac.upper[k] = -right;
            }
            if k > 0 {
                jac.lower[k - 1] = -left;
            }
        }
        jac.upper[0] -= cond[0];
        jac.lower[n - 2] -= cond[n];
        jac
    }

    /// The convex functional `E` whose gradient, divided by the trapezoidal
    /// weights times `dx`, is [`Self::theta_residual`].
    pub fn theta_functional(&self, t_next: f64, h_next: &Field, theta_prev: &Field, guess: &Field) -> f64 {
        let a0 = self.mobility_at(t_next);
        let m = self.edge_coefficients(h_next);
        self.functional_with(&a0, &m, theta_prev, guess)
    }

    fn functional_with(&self, a0: &[f64], m: &[f64], theta_prev: &Field, guess: &Field) -> f64 {
        let p = &self.params;
        let dx = self.grid.dx();
        let dt = self.grid.dt();
        let nu2 = p.nu * p.nu;
        let k_max = self.grid.k();
        let inertia: Vec<f64> = (0..=k_max)
            .map(|k| {
                let d = guess.at(k as isize) - theta_prev.at(k as isize);
                a0[k] * d * d / (2.0 * dt)
            })
            .collect();
        let grad: f64 = (0..k_max as isize)
            .map(|k| {
                let s = (guess.at(k + 1) - guess.at(k)) / dx;
                0.5 * nu2 * s * s + p.kappa * m[(k + 1) as usize] * p.gamma(s)
            })
            .sum();
        (trap_sum(&inertia) + grad) * dx
    }

    /// One application of the fixed-point map: solves
    /// `B T~ = a0 . T^j + dt kappa/2 (flux terms at T)` with
    /// `B = diag(a0) - dt nu^2 D2`.
    pub fn picard_map(&self, t_next: f64, h_next: &Field, theta_prev: &Field, iterate: &Field) -> Result<Field> {
        let a0 = self.mobility_at(t_next);
        let m = self.edge_coefficients(h_next);
        self.picard_with(&a0, &m, theta_prev, iterate)
    }

    /// The matrix `B` of the fixed-point map.
    pub fn picard_matrix(&self, t_next: f64) -> Tridiagonal {
        let a0 = self.mobility_at(t_next);
        self.picard_matrix_with(&a0)
    }

    fn picard_matrix_with(&self, a0: &[f64]) -> Tridiagonal {
        let n = a0.len();
        let dx = self.grid.dx();
        let r = self.grid.dt() * self.params.nu * self.params.nu / (dx * dx);
        let mut b = Tridiagonal::zeros(n);
        for (d, &a) in b.diag.iter_mut().zip(a0.iter()) {
            *d = a + 2.0 * r;
        }
        for k in 0..n - 1 {
            b.upper[k] = -r;
            b.lower[k] = -r;
        }
        b.upper[0] *= 2.0;
        b.lower[n - 2] *= 2.0;
        b
    }

    fn picard_with(&self, a0: &[f64], m: &[f64], theta_prev: &Field, iterate: &Field) -> Result<Field> {
        let b = self.picard_matrix_with(a0);
        b.check_diagonally_dominant()?;
        let dt = self.grid.dt();
        let div = self.flux_divergence(m, iterate);
        let rhs: Vec<f64> = (0..a0.len())
            .map(|k| a0[k] * theta_prev.at(k as isize) + dt * div[k])
            .collect();
        Field::from_interior(&b.solve(&rhs)?)
    }

    /// Solves the angle update for `Theta^{j+1}` starting from `Theta^j`.
    pub fn step_theta(
        &self,
        t_next: f64,
        h_next: &Field,
        theta_prev: &Field,
        cfg: &ThetaSolveConfig,
    ) -> Result<(Field, SolverStats)> {
        cfg.validate()?;
        let a0 = self.mobility_at(t_next);
        let m = self.edge_coefficients(h_next);
        match cfg.method {
            ThetaMethod::Newton => self.newton(&a0, &m, theta_prev, cfg),
            ThetaMethod::Picard => self.picard(&a0, &m, theta_prev, cfg),
        }
    }

    /// Primal-dual Newton: the edge flux `w ~ gamma'(d+T)` is carried as a
    /// separate unknown with its own Newton update, kept inside `|w| <= 1`.
    /// At `w = gamma'(d+T)` the linear system is exactly the Jacobian of the
    /// residual.
    fn newton(
        &self,
        a0: &[f64],
        m: &[f64],
        theta_prev: &Field,
        cfg: &ThetaSolveConfig,
    ) -> Result<(Field, SolverStats)> {
        let p = &self.params;
        let dx = self.grid.dx();
        let edges = self.grid.k() as isize;
        let slopes = |f: &Field| -> Vec<f64> { (-1..=edges).map(|k| (f.at(k + 1) - f.at(k)) / dx).collect() };

        let mut theta = theta_prev.clone();
        let mut w: Vec<f64> = slopes(&theta).iter().map(|&s| p.gamma_prime(s)).collect();
        let mut stats = SolverStats::default();
        for it in 1..=cfg.max_iter {
            let res = self.residual_with(a0, m, theta_prev, &theta);
            let rnorm = max_norm(&res);
            stats.history.push(rnorm);
            stats.iterations = it;
            stats.residual = rnorm;
            if rnorm <= cfg.tol_abs {
                return Ok((theta, stats));
            }
            let s = slopes(&theta);
            let curvature: Vec<f64> = s
                .iter()
                .zip(&w)
                .map(|(&sk, &wk)| {
                    let g = p.gamma(sk);
                    (1.0 - wk * sk / g) / g
                })
                .collect();
            let jac = self.linearization(a0, m, &curvature);
            jac.check_diagonally_dominant()?;
            let neg: Vec<f64> = res.iter().map(|r| -r).collect();
            let step = jac.solve(&neg)?;
            // correction at roundoff level: the residual cannot drop further
            let scale = 1.0_f64.max(theta.max_abs());
            if max_norm(&step) <= 4.0 * f64::EPSILON * scale {
                debug!("newton stagnated at residual {rnorm:e} after {it} iterations");
                return Ok((theta, stats));
            }
            for (v, d) in theta.interior_mut().iter_mut().zip(&step) {
                *v += d;
            }
            theta.fold()?;
            let step = Field::from_interior(&step)?;
            let ds = slopes(&step);
            let dw: Vec<f64> = (0..w.len())
                .map(|e| p.gamma_prime(s[e]) + curvature[e] * ds[e] - w[e])
                .collect();
            let mut beta = 1.0_f64;
            for (wk, dk) in w.iter().zip(&dw) {
                if *dk > 0.0 && wk + dk > 1.0 {
                    beta = beta.min(0.99 * (1.0 - wk) / dk);
                } else if *dk < 0.0 && wk + dk < -1.0 {
                    beta = beta.min(0.99 * (-1.0 - wk) / dk);
                }
            }
            for (wk, dk) in w.iter_mut().zip(&dw) {
                *wk += beta * dk;
            }
        }
        Err(Error::NonConvergence {
            iterations: cfg.max_iter,
            residual: stats.residual,
        })
    }

    fn picard(
        &self,
        a0: &[f64],
        m: &[f64],
        theta_prev: &Field,
        cfg: &ThetaSolveConfig,
    ) -> Result<(Field, SolverStats)> {
        let mut theta = theta_prev.clone();
        let mut stats = SolverStats::default();
        for it in 1..=cfg.max_iter {
            let rnorm = max_norm(&self.residual_with(a0, m, theta_prev, &theta));
            stats.history.push(rnorm);
            stats.iterations = it;
            stats.residual = rnorm;
            if rnorm <= cfg.tol_abs {
                return Ok((theta, stats));
            }
            let next = self.picard_with(a0, m, theta_prev, &theta)?;
            let change = next
                .interior()
                .iter()
                .zip(theta.interior())
                .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
            theta = next;
            if change <= 4.0 * f64::EPSILON * 1.0_f64.max(theta.max_abs()) {
                stats.residual = max_norm(&self.residual_with(a0, m, theta_prev, &theta));
                return Ok((theta, stats));
            }
        }
        Err(Error::NonConvergence {
            iterations: cfg.max_iter,
            residual: stats.residual,
        })
    }

    /// The discrete global energy `F_{1,d}(H, Theta)`.
    pub fn energy(&self, h: &Field, theta: &Field) -> f64 {
        let p = &self.params;
        let dx = self.grid.dx();
        let terms: Vec<f64> = (0..=self.grid.k() as isize)
            .map(|k| {
                let hp = (h.at(k + 1) - h.at(k)) / dx;
                let hm = (h.at(k) - h.at(k - 1)) / dx;
                let tp = (theta.at(k + 1) - theta.at(k)) / dx;
                let tm = (theta.at(k) - theta.at(k - 1)) / dx;
                let hk = h.at(k);
                0.5 * p.kappa0 * p.kappa0 * 0.5 * (hp * hp + hm * hm)
                    + 0.5 * p.c * (hk - 1.0) * (hk - 1.0)
                    + 0.5 * p.nu * p.nu * 0.5 * (tp * tp + tm * tm)
                    + p.kappa * p.alpha(hk) * 0.5 * (p.gamma(tp) + p.gamma(tm))
            })
            .collect();
        trap_sum(&terms) * dx
    }

    /// Signed slack of the dissipation inequality between consecutive
    /// states: `(F1 - F0)/dt + S''|dH/dt|^2 dx + S'' a0 |dT/dt|^2 dx`.
    pub fn dissipation_slack(&self, before: &SimState, after: &SimState) -> f64 {
        let dt = self.grid.dt();
        let dx = self.grid.dx();
        let a0 = self.mobility_at(after.t);
        let n = self.grid.k() + 1;
        let dh: Vec<f64> = (0..n)
            .map(|k| {
                let v = (after.h.interior()[k] - before.h.interior()[k]) / dt;
                v * v
            })
            .collect();
        let dth: Vec<f64> = (0..n)
            .map(|k| {
                let v = (after.theta.interior()[k] - before.theta.interior()[k]) / dt;
                a0[k] * v * v
            })
            .collect();
        let e0 = self.energy(&before.h, &before.theta);
        let e1 = self.energy(&after.h, &after.theta);
        (e1 - e0) / dt + trap_sum(&dh) * dx + trap_sum(&dth) * dx
    }

    /// `(ok, slack)` with `ok <=> slack <= tol`.
    pub fn dissipation_check(&self, before: &SimState, after: &SimState, tol: f64) -> (bool, f64) {
        let slack = self.dissipation_slack(before, after);
        (slack <= tol, slack)
    }

    /// Largest excursion of `H` outside `[0, 1]` or of `|Theta|` above `xi0`.
    pub fn range_violation(&self, state: &SimState, xi0: f64) -> f64 {
        let below = -state.h.min();
        let above = state.h.max() - 1.0;
        let theta = state.theta.max_abs() - xi0;
        below.max(above).max(theta).max(0.0)
    }

    /// `H^{j+1}` from `(H^j, Theta^j)`, then `Theta^{j+1}` from
    /// `(H^{j+1}, Theta^j)`; reports the range and dissipation checks.
    pub fn advance(
        &self,
        state: &SimState,
        cfg: &ThetaSolveConfig,
        bounds: &RunBounds,
    ) -> Result<(SimState, StepReport)> {
        let dt = self.grid.dt();
        if !cfg.warn_only_on_exist_cond && dt >= self.dt_exist() {
            return Err(Error::InvalidParameter {
                name: "grid.dt",
                value: dt,
                reason: "exceeds the sufficient existence bound",
            });
        }
        let j = state.j + 1;
        let t_next = j as f64 * dt;
        let h = self.step_eta(&state.h, &state.theta)?;
        let (theta, stats) = self.step_theta(t_next, &h, &state.theta, cfg)?;
        let energy = self.energy(&h, &theta);
        let next = SimState {
            j,
            t: t_next,
            h,
            theta,
            energy,
            last_solver: stats,
        };
        let violation = self.range_violation(&next, bounds.xi0);
        let (dissipation_ok, slack) = self.dissipation_check(state, &next, bounds.dissipation_tol(dt));
        let report = StepReport {
            j,
            range_ok: violation <= RANGE_TOL,
            range_violation: violation,
            dissipation_ok,
            dissipation_slack: slack,
            energy_before: state.energy,
            energy_after: next.energy,
            theta_iters: next.last_solver.iterations,
            theta_residual: next.last_solver.residual,
        };
        if !report.range_ok {
            warn!("step {j}: range violated by {violation:e}");
        }
        if !report.dissipation_ok {
            warn!("step {j}: dissipation slack {slack:e}");
        }
        Ok((next, report))
    }
}

/// A run in progress: the current state plus the bounds fixed at `j = 0`.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub scheme: Scheme,
    pub cfg: ThetaSolveConfig,
    pub bounds: RunBounds,
    pub state: SimState,
}

impl Simulation {
    pub fn new(scheme: Scheme, h0: Field, theta0: Field, cfg: ThetaSolveConfig) -> Result<Self> {
        cfg.validate()?;
        let state = scheme.initial_state(h0, theta0)?;
        let bounds = RunBounds::from_initial(&state);
        let dt = scheme.grid.dt();
        let bound = scheme.dt_exist();
        if dt >= bound {
            if cfg.warn_only_on_exist_cond {
                warn!("dt = {dt} exceeds the sufficient existence bound {bound:e}; continuing");
            } else {
                return Err(Error::InvalidParameter {
                    name: "grid.dt",
                    value: dt,
                    reason: "exceeds the sufficient existence bound",
                });
            }
        }
        Ok(Self {
            scheme,
            cfg,
            bounds,
            state,
        })
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let (next, report) = self.scheme.advance(&self.state, &self.cfg, &self.bounds)?;
        self.state = next;
        Ok(report)
    }
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
