//! Randomized checks of the discrete calculus and of the bounds on the
//! regularized density `gamma_eps`, driven by a seeded ChaCha generator so
//! every run sees the same samples.

use std::fmt;

use kwc_core::grid::{diff_quotient, fbar_second, ScalarFn};
use kwc_core::identities::{self, IdentityCheck};
use kwc_core::model::{Gamma, GammaPrime};
use kwc_core::Field;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x6b77_6321;
pub const IDENTITY_TOL: f64 = 1e-13;
pub const BOUND_TOL: f64 = 1e-12;
pub const IDENTITY_KS: [usize; 3] = [3, 7, 16];
pub const BOUND_EPS: [f64; 3] = [0.01, 0.1, 1.0];

/// Outcome of one named check over many random samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub samples: usize,
    /// Largest relative error, or largest relative bound excess (negative
    /// when every sample sits strictly inside the bound).
    pub worst: f64,
    pub tol: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst <= self.tol
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<34} samples={:<6} worst={:+.3e} tol={:.0e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.samples,
            self.worst,
            self.tol
        )
    }
}

struct Tally {
    name: String,
    samples: usize,
    worst: f64,
    tol: f64,
}

impl Tally {
    fn new(name: String, tol: f64) -> Self {
        Self {
            name,
            samples: 0,
            worst: f64::NEG_INFINITY,
            tol,
        }
    }

    fn add(&mut self, v: f64) {
        self.samples += 1;
        // NaN must fail the check
        self.worst = if v.is_nan() { f64::INFINITY } else { self.worst.max(v) };
    }

    fn identity(&mut self, c: IdentityCheck) {
        self.add(c.rel_error());
    }

    /// Excess of `v` over `[lo, hi]`, relative to the larger bound.
    fn within(&mut self, v: f64, lo: f64, hi: f64) {
        let scale = lo.abs().max(hi.abs());
        self.add((lo - v).max(v - hi) / scale);
    }

    /// Excess of `v` over `hi > 0`, relative to `hi`.
    fn below(&mut self, v: f64, hi: f64) {
        self.add((v - hi) / hi);
    }

    fn done(self) -> CheckResult {
        CheckResult {
            name: self.name,
            samples: self.samples,
            worst: self.worst,
            tol: self.tol,
        }
    }
}

/// Nodal values spanning several orders of magnitude.
fn random_field(rng: &mut impl Rng, k: usize) -> Field {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    let v: Vec<f64> = (0..=k).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    Field::from_interior(&v).expect("finite values")
}

/// Product rules and summation-by-parts formulas on `pairs` random folded
/// field pairs for each `K`.
pub fn identity_suite(seed: u64, pairs: usize, ks: &[usize]) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &k in ks {
        let names = ["product_rule_plus", "product_rule_minus", "sbp1", "sbp2_forward", "sbp2_backward", "sbp5", "folded_gradient"];
        let mut t: Vec<Tally> = names.iter().map(|n| Tally::new(format!("{n} K={k}"), IDENTITY_TOL)).collect();
        let dx = 1.0 / k as f64;
        for _ in 0..pairs {
            let f = random_field(&mut rng, k);
            let g = random_field(&mut rng, k);
            let (mut plus, mut minus) = (0.0_f64, 0.0_f64);
            for node in 0..=k as isize {
                plus = plus.max(identities::product_rule_plus(&f, &g, node, dx).rel_error());
                minus = minus.max(identities::product_rule_minus(&f, &g, node, dx).rel_error());
            }
            t[0].add(plus);
            t[1].add(minus);
            t[2].identity(identities::sbp1(&f, &g, dx));
            t[3].identity(identities::sbp2_forward(&f, &g, dx));
            t[4].identity(identities::sbp2_backward(&f, &g, dx));
            t[5].identity(identities::sbp5(&f, &g, dx));
            t[6].identity(identities::folded_gradient_identity(&f, dx));
        }
        out.extend(t.into_iter().map(Tally::done));
    }
    out
}

/// Arguments around the scale `eps`, where `gamma_eps` bends, mixed with
/// order-one values.
fn random_arg(rng: &mut impl Rng, eps: f64) -> f64 {
    if rng.gen_bool(0.5) {
        eps * rng.gen_range(-20.0..20.0)
    } else {
        rng.gen_range(-2.0..2.0)
    }
}

/// Bounds on `gamma_eps` and its difference quotients, plus the two
/// four-point quotient lemmas, over `samples` draws for each `eps`.
pub fn bound_suite(seed: u64, samples: usize, eps_values: &[f64]) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &eps in eps_values {
        let g = Gamma { eps };
        let gp = GammaPrime { eps };
        let name = |n: &str| format!("{n} eps={eps}");
        let mut secant = Tally::new(name("gamma_secant_le_1"), BOUND_TOL);
        let mut slope = Tally::new(name("gamma_prime_secant_in_0_3/2eps"), BOUND_TOL);
        let mut third = Tally::new(name("gamma_third_le_3/eps2"), BOUND_TOL);
        let mut second = Tally::new(name("gamma_second_le_1/eps"), BOUND_TOL);
        let mut fbar_g = Tally::new(name("fbar_gamma_le_sup_second"), BOUND_TOL);
        let mut fbar_gp = Tally::new(name("fbar_gamma_prime_le_sup_third"), BOUND_TOL);
        let mut dec_g = Tally::new(name("quotient_decomposition_gamma"), BOUND_TOL);
        let mut dec_gp = Tally::new(name("quotient_decomposition_gamma_prime"), BOUND_TOL);
        for _ in 0..samples {
            let [a, b, c, d] = [(); 4].map(|_| random_arg(&mut rng, eps));
            secant.below(diff_quotient(&g, a, b).abs(), 1.0);
            slope.within(diff_quotient(&gp, a, b), 0.0, 1.5 / eps);
            third.below(gp.second(a).abs(), 3.0 / (eps * eps));
            second.below(g.second(a), 1.0 / eps);
            fbar_g.below(fbar_second(&g, a, b, c, d).abs(), 1.0 / eps);
            fbar_gp.below(fbar_second(&gp, a, b, c, d).abs(), 3.0 / (eps * eps));
            dec_g.identity(identities::quotient_decomposition(&g, a, b, c, d));
            dec_gp.identity(identities::quotient_decomposition(&gp, a, b, c, d));
        }
        out.extend([secant, slope, third, second, fbar_g, fbar_gp, dec_g, dec_gp].map(Tally::done));
    }
    out
}
