//! Physical constants, the regularized total-variation density `gamma_eps`,
//! the coupling `alpha`, the mobility `alpha0(t, x)`, and the two step-size
//! bounds of the scheme.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::ScalarFn;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub eps: f64,
    pub delta0: f64,
    pub c: f64,
    pub kappa0: f64,
    pub kappa: f64,
    pub nu: f64,
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}

impl ModelParams {
    pub fn new(eps: f64, delta0: f64, c: f64, kappa0: f64, kappa: f64, nu: f64) -> Result<Self> {
        let p = Self {
            eps,
            delta0,
            c,
            kappa0,
            kappa,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    /// The parameter set used by the three bundled example presets:
    /// `eps = delta0 = nu = kappa0 = 0.01`, `c = 1`, `kappa = 0.1`.
    pub fn standard() -> Self {
        Self {
            eps: 0.01,
            delta0: 0.01,
            c: 1.0,
            kappa0: 0.01,
            kappa: 0.1,
            nu: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check("eps", self.eps, self.eps > 0.0 && self.eps < 1.0, "must lie in (0, 1)")?;
        check(
            "delta0",
            self.delta0,
            self.delta0 > 0.0 && self.delta0 < 1.0,
            "must lie in (0, 1)",
        )?;
        check("c", self.c, self.c > 0.0, "must be positive")?;
        check("kappa0", self.kappa0, self.kappa0 > 0.0, "must be positive")?;
        check("kappa", self.kappa, self.kappa > 0.0, "must be positive")?;
        check("nu", self.nu, self.nu > 0.0, "must be positive")
    }

    /// `sqrt(eps^2 + v^2)`
    #[inline]
    pub fn gamma(&self, v: f64) -> f64 {
        self.eps.hypot(v)
    }

    /// `v / sqrt(eps^2 + v^2)`
    #[inline]
    pub fn gamma_prime(&self, v: f64) -> f64 {
        v / self.eps.hypot(v)
    }

    /// `eps^2 / (eps^2 + v^2)^(3/2)`
    #[inline]
    pub fn gamma_second(&self, v: f64) -> f64 {
        let g = self.eps.hypot(v);
        self.eps * self.eps / (g * g * g)
    }

    /// `-3 eps^2 v / (eps^2 + v^2)^(5/2)`
    #[inline]
    pub fn gamma_third(&self, v: f64) -> f64 {
        let g = self.eps.hypot(v);
        -3.0 * self.eps * self.eps * v / g.powi(5)
    }

    /// `h^2 / 2 + delta0`
    #[inline]
    pub fn alpha(&self, h: f64) -> f64 {
        0.5 * h * h + self.delta0
    }

    pub fn gamma_fn(&self) -> Gamma {
        Gamma { eps: self.eps }
    }

    pub fn gamma_prime_fn(&self) -> GammaPrime {
        GammaPrime { eps: self.eps }
    }
}

/// `gamma_eps` as a [`ScalarFn`].
#[derive(Debug, Clone, Copy)]
pub struct Gamma {
    pub eps: f64,
}

impl ScalarFn for Gamma {
    fn value(&self, x: f64) -> f64 {
        self.eps.hypot(x)
    }
    fn deriv(&self, x: f64) -> f64 {
        x / self.eps.hypot(x)
    }
    fn second(&self, x: f64) -> f64 {
        let g = self.eps.hypot(x);
        self.eps * self.eps / (g * g * g)
    }
}

/// `gamma_eps'` as a [`ScalarFn`].
#[derive(Debug, Clone, Copy)]
pub struct GammaPrime {
    pub eps: f64,
}

impl ScalarFn for GammaPrime {
    fn value(&self, x: f64) -> f64 {
        x / self.eps.hypot(x)
    }
    fn deriv(&self, x: f64) -> f64 {
        let g = self.eps.hypot(x);
        self.eps * self.eps / (g * g * g)
    }
    fn second(&self, x: f64) -> f64 {
        let g = self.eps.hypot(x);
        -3.0 * self.eps * self.eps * x / g.powi(5)
    }
}

type MobilityFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// The angle mobility `alpha0(t, x)` with its Lipschitz constant and infimum.
#[derive(Clone)]
pub struct Mobility {
    f: Arc<MobilityFn>,
    lipschitz: f64,
    inf_value: f64,
    constant: Option<f64>,
}

impl fmt::Debug for Mobility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mobility")
            .field("lipschitz", &self.lipschitz)
            .field("inf_value", &self.inf_value)
            .field("constant", &self.constant)
            .finish()
    }
}

const LATTICE: usize = 101;
const LIPSCHITZ_SAFETY: f64 = 1.05;

impl Mobility {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidMobility(format!(
                "constant mobility {value} must be positive"
            )));
        }
        Ok(Self {
            f: Arc::new(move |_, _| value),
            lipschitz: 0.0,
            inf_value: value,
            constant: Some(value),
        })
    }

    /// The default `alpha0 = delta0`.
    pub fn default_for(params: &ModelParams) -> Self {
        Self::constant(params.delta0).expect("delta0 validated positive")
    }

    /// Wraps a space-time mobility. The infimum is sampled on a 101 x 101
    /// lattice over `[0, t_max] x [0, 1]`; the Lipschitz constant is sampled
    /// there too unless supplied.
    pub fn from_fn<F>(f: F, lipschitz: Option<f64>, t_max: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let t_max = if t_max > 0.0 { t_max } else { 1.0 };
        let mut inf_value = f64::INFINITY;
        for i in 0..LATTICE {
            for l in 0..LATTICE {
                let (t, x) = lattice_point(i, l, t_max);
                let v = f(t, x);
                if !v.is_finite() {
                    return Err(Error::InvalidMobility(format!(
                        "alpha0({t}, {x}) is not finite"
                    )));
                }
                inf_value = inf_value.min(v);
            }
        }
        if inf_value <= 0.0 {
            return Err(Error::InvalidMobility(format!(
                "sampled infimum {inf_value} is not positive"
            )));
        }
        let lipschitz = match lipschitz {
            Some(l) if l.is_finite() && l >= 0.0 => l,
            Some(l) => {
                return Err(Error::InvalidMobility(format!(
                    "Lipschitz constant {l} must be finite and nonnegative"
                )))
            }
            None => estimate_lipschitz(&f, t_max),
        };
        Ok(Self {
            f: Arc::new(f),
            lipschitz,
            inf_value,
            constant: None,
        })
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self.constant {
            Some(c) => c,
            None => (self.f)(t, x),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn inf_value(&self) -> f64 {
        self.inf_value
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    /// Checks `inf alpha0 >= delta0`. Returns `false` when the infimum sits
    /// strictly above `delta0`, which is allowed but loosens the bounds.
    pub fn check_against(&self, params: &ModelParams) -> Result<bool> {
        let tol = 1e-12 * params.delta0;
        if self.inf_value < params.delta0 - tol {
            return Err(Error::InvalidMobility(format!(
                "inf alpha0 = {} is below delta0 = {}",
                self.inf_value, params.delta0
            )));
        }
        Ok((self.inf_value - params.delta0).abs() <= tol)
    }
}

fn lattice_point(i: usize, l: usize, t_max: f64) -> (f64, f64) {
    let step = 1.0 / (LATTICE - 1) as f64;
    (i as f64 * step * t_max, l as f64 * step)
}

/// `1.05 *` the largest neighbour ratio `|df| / (|dt| + |dx|)` on a
/// 101 x 101 lattice over `[0, t_max] x [0, 1]`.
pub fn estimate_lipschitz<F: Fn(f64, f64) -> f64>(f: &F, t_max: f64) -> f64 {
    let mut vals = vec![0.0; LATTICE * LATTICE];
    for i in 0..LATTICE {
        for l in 0..LATTICE {
            let (t, x) = lattice_point(i, l, t_max);
            vals[i * LATTICE + l] = f(t, x);
        }
    }
    let step = 1.0 / (LATTICE - 1) as f64;
    let (ht, hx) = (step * t_max, step);
    let mut best = 0.0_f64;
    for i in 0..LATTICE {
        for l in 0..LATTICE {
            let v = vals[i * LATTICE + l];
            if i + 1 < LATTICE {
                best = best.max((vals[(i + 1) * LATTICE + l] - v).abs() / ht);
            }
            if l + 1 < LATTICE {
                best = best.max((vals[i * LATTICE + l + 1] - v).abs() / hx);
            }
            if i + 1 < LATTICE && l + 1 < LATTICE {
                best = best.max((vals[(i + 1) * LATTICE + l + 1] - v).abs() / (ht + hx));
            }
        }
    }
    LIPSCHITZ_SAFETY * best
}

/// Sufficient step size for the fixed-point solve of the angle update:
/// `nu^2 eps^2 / (4 kappa^2 delta0 (delta0 + 1/2)^2) * dx^2`.
pub fn dt_existence_bound(params: &ModelParams, dx: f64) -> f64 {
    let top = params.nu * params.nu * params.eps * params.eps;
    let s = params.delta0 + 0.5;
    let bottom = 4.0 * params.kappa * params.kappa * params.delta0 * s * s;
    top / bottom * dx * dx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityBounds {
    /// Present when a mesh width was supplied.
    pub dt_exist: Option<f64>,
    /// `1 / (3a)`, or infinity when `a <= 0`.
    pub dt_error: f64,
    pub a_const: f64,
    pub c1: f64,
    /// `L_alpha0 + 1`
    pub l_tilde: f64,
}

impl StabilityBounds {
    pub fn exist_ok(&self, dt: f64) -> Option<bool> {
        self.dt_exist.map(|b| dt < b)
    }

    pub fn error_ok(&self, dt: f64) -> bool {
        dt < self.dt_error
    }
}

/// Step-size bound of the error estimate:
/// `a = max(2 (kappa C1 / nu)^2 - (2 kappa eps + c), (L + 1) / delta0)`,
/// `dt < 1 / (3a)`.
pub fn dt_error_bound(params: &ModelParams, mobility: &Mobility, c1: f64) -> Result<StabilityBounds> {
    if !(c1.is_finite() && c1 >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "c1",
            value: c1,
            reason: "must be >= 1",
        });
    }
    let l_tilde = mobility.lipschitz() + 1.0;
    let r = params.kappa * c1 / params.nu;
    let first = 2.0 * r * r - (2.0 * params.kappa * params.eps + params.c);
    let second = l_tilde / params.delta0;
    let a = first.max(second);
    let dt_error = if a > 0.0 { 1.0 / (3.0 * a) } else { f64::INFINITY };
    Ok(StabilityBounds {
        dt_exist: None,
        dt_error,
        a_const: a,
        c1,
        l_tilde,
    })
}

/// Both bounds at once.
pub fn stability_bounds(
    params: &ModelParams,
    mobility: &Mobility,
    c1: f64,
    dx: f64,
) -> Result<StabilityBounds> {
    let mut b = dt_error_bound(params, mobility, c1)?;
    b.dt_exist = Some(dt_existence_bound(params, dx));
    Ok(b)
}

/// Default `C1 = max(1, max |H0|)`.
pub fn default_c1(h0: &[f64]) -> f64 {
    h0.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}
