//! Acceptance criteria 1-9, one PASS/FAIL line each. Runs without the
//! libtest harness so the criteria execute sequentially and their wall
//! times are not distorted by each other.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use kwc_cli::verify::{bound_suite, identity_suite, BOUND_EPS, DEFAULT_SEED, IDENTITY_KS};
use kwc_core::analysis::{convergence_study, InitialData, StudyConfig};
use kwc_core::linalg::Tridiagonal;
use kwc_core::{Field, GridSpec, Mobility, ModelParams, Preset, Scheme, Simulation, ThetaSolveConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);

/// Values at `k = -1..=K+1` with even ghosts.
fn folded(interior: &[f64]) -> Vec<f64> {
    let k = interior.len() - 1;
    let mut v = Vec::with_capacity(k + 3);
    v.push(interior[1]);
    v.extend_from_slice(interior);
    v.push(interior[k - 1]);
    v
}

fn weight(k: usize, last: usize) -> f64 {
    if k == 0 || k == last {
        0.5
    } else {
        1.0
    }
}

/// The discrete energy from its definition, on plain arrays.
fn energy_oracle(p: &ModelParams, dx: f64, h: &[f64], th: &[f64]) -> f64 {
    let (hf, tf) = (folded(h), folded(th));
    let last = h.len() - 1;
    let gamma = |v: f64| (p.eps * p.eps + v * v).sqrt();
    let mut sum = 0.0;
    for k in 0..=last {
        let i = k + 1;
        let (hp, hm) = ((hf[i + 1] - hf[i]) / dx, (hf[i] - hf[i - 1]) / dx);
        let (tp, tm) = ((tf[i + 1] - tf[i]) / dx, (tf[i] - tf[i - 1]) / dx);
        let alpha = hf[i] * hf[i] / 2.0 + p.delta0;
        let density = p.kappa0 * p.kappa0 / 2.0 * (hp * hp + hm * hm) / 2.0
            + p.c / 2.0 * (hf[i] - 1.0).powi(2)
            + p.nu * p.nu / 2.0 * (tp * tp + tm * tm) / 2.0
            + p.kappa * alpha * (gamma(tp) + gamma(tm)) / 2.0;
        sum += weight(k, last) * density * dx;
    }
    sum
}

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c] / a[c][c];
            let pivot = a[c].clone();
            for (x, p) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                *x -= m * p;
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// `D2` on nodes `0..=K` with the even fold substituted for the ghosts.
fn d2_dense(n: usize, dx: f64) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for (k, row) in d.iter_mut().enumerate() {
        row[k] = -2.0 / (dx * dx);
        let left = if k == 0 { 1 } else { k - 1 };
        let right = if k == n - 1 { n - 2 } else { k + 1 };
        row[left] += 1.0 / (dx * dx);
        row[right] += 1.0 / (dx * dx);
    }
    d
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn c1_identities() -> Verdict {
    let checks = identity_suite(DEFAULT_SEED, 1000, &IDENTITY_KS);
    let worst = checks.iter().map(|c| c.worst).fold(f64::NEG_INFINITY, f64::max);
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.clone()).collect();
    (
        failed.is_empty() && checks.iter().all(|c| c.samples == 1000),
        format!("{} checks x 1000 pairs, worst rel error {worst:.2e} (tol 1e-13), failed {failed:?}", checks.len()),
    )
}

fn c2_bounds() -> Verdict {
    let checks = bound_suite(DEFAULT_SEED, 10_000, &BOUND_EPS);
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.clone()).collect();
    let worst = checks.iter().map(|c| c.worst).fold(f64::NEG_INFINITY, f64::max);
    (
        failed.is_empty() && checks.iter().all(|c| c.samples == 10_000),
        format!("{} checks x 1e4 samples, worst excess {worst:+.2e} (tol 1e-12), failed {failed:?}", checks.len()),
    )
}

/// Per-step measurements of one example run.
struct ExampleRun {
    preset: Preset,
    min_h: f64,
    max_h: f64,
    max_theta: f64,
    /// Largest `slack / tol` of the full dissipation inequality.
    worst_slack_ratio: f64,
    /// Largest `F^{j+1} - F^j`.
    worst_increase: f64,
    /// Largest gap between the library energy and the oracle.
    energy_gap: f64,
    steps: usize,
}

fn run_example(preset: Preset) -> ExampleRun {
    let p = ModelParams::standard();
    let grid = preset.grid();
    let (dt, dx) = (grid.dt(), grid.dx());
    let scheme = Scheme::new(p, grid, Mobility::default_for(&p)).unwrap();
    let (h0, th0) = preset.initial(&grid).unwrap();
    let mut sim = Simulation::new(scheme, h0, th0, ThetaSolveConfig::default()).unwrap();
    let mut r = ExampleRun {
        preset,
        min_h: f64::INFINITY,
        max_h: f64::NEG_INFINITY,
        max_theta: 0.0,
        worst_slack_ratio: f64::NEG_INFINITY,
        worst_increase: f64::NEG_INFINITY,
        energy_gap: 0.0,
        steps: 0,
    };
    let e0 = energy_oracle(&p, dx, sim.state.h.interior(), sim.state.theta.interior());
    let tol = 1e-8 * e0.max(1.0) / dt;
    for _ in 0..grid.steps() {
        let (h_prev, th_prev) = (sim.state.h.interior().to_vec(), sim.state.theta.interior().to_vec());
        let f_prev = energy_oracle(&p, dx, &h_prev, &th_prev);
        sim.step().unwrap();
        let (h, th) = (sim.state.h.interior(), sim.state.theta.interior());
        let f = energy_oracle(&p, dx, h, th);
        let last = h.len() - 1;
        let mut dissipated = 0.0;
        for k in 0..=last {
            let vh = (h[k] - h_prev[k]) / dt;
            let vt = (th[k] - th_prev[k]) / dt;
            dissipated += weight(k, last) * (vh * vh + p.delta0 * vt * vt) * dx;
        }
        let slack = (f - f_prev) / dt + dissipated;
        r.worst_slack_ratio = r.worst_slack_ratio.max(slack / tol);
        r.worst_increase = r.worst_increase.max(f - f_prev);
        r.energy_gap = r.energy_gap.max((f - sim.state.energy).abs());
        r.min_h = r.min_h.min(sim.state.h.min());
        r.max_h = r.max_h.max(sim.state.h.max());
        r.max_theta = r.max_theta.max(sim.state.theta.max_abs());
        r.steps += 1;
    }
    r
}

fn c3_range(runs: &[ExampleRun]) -> Verdict {
    let bound = 0.25 * PI + 1e-10;
    let ok = runs
        .iter()
        .all(|r| r.steps == r.preset.steps() && r.min_h >= -1e-10 && r.max_h <= 1.0 + 1e-10 && r.max_theta <= bound);
    let detail = runs
        .iter()
        .map(|r| {
            format!(
                "{} ({} steps): H in [{:.4}, {:.4}], max|Theta| - pi/4 = {:+.1e}",
                r.preset,
                r.steps,
                r.min_h,
                r.max_h,
                r.max_theta - 0.25 * PI
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    (ok, detail)
}

fn c4_dissipation(runs: &[ExampleRun]) -> Verdict {
    let ok = runs
        .iter()
        .all(|r| r.worst_slack_ratio <= 1.0 && r.worst_increase <= 1e-8 && r.energy_gap <= 1e-12);
    let detail = runs
        .iter()
        .map(|r| {
            format!(
                "{}: max slack/tol {:+.1e}, max dF {:+.2e}",
                r.preset, r.worst_slack_ratio, r.worst_increase
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    (ok, detail)
}

fn c5_solvers() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = ModelParams::standard();
    let k = 10;
    let n = k + 1;
    let grid = GridSpec::new(k, 0.06, 1).unwrap();
    let dx = grid.dx();
    let dt = grid.dt();
    let mobility = Mobility::from_fn(move |t, x| 0.01 + 0.02 * x * x + 0.005 * t, None, 1.0).unwrap();
    let scheme = Scheme::new(p, grid, mobility.clone()).unwrap();
    let d2 = d2_dense(n, dx);
    let gamma = |v: f64| (p.eps * p.eps + v * v).sqrt();
    let gamma_p = |v: f64| v / (p.eps * p.eps + v * v).sqrt();

    let (mut worst_h, mut worst_b) = (0.0_f64, 0.0_f64);
    for _ in 0..100 {
        let h = uniform(&mut rng, n, 0.0, 1.0);
        let th = uniform(&mut rng, n, -0.25 * PI, 0.25 * PI);
        let tf = folded(&th);
        // H update: (I + dt(-kappa0^2 D2 + c + kappa V)) H' = H + c dt
        let mut a = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let g = (gamma((tf[i + 2] - tf[i + 1]) / dx) + gamma((tf[i + 1] - tf[i]) / dx)) / 2.0;
            for j in 0..n {
                a[i][j] = -dt * p.kappa0 * p.kappa0 * d2[i][j];
            }
            a[i][i] += 1.0 + dt * (p.c + p.kappa * g);
            rhs[i] = h[i] + p.c * dt;
        }
        let expect = dense_solve(a, rhs);
        let got = scheme
            .step_eta(&Field::from_interior(&h).unwrap(), &Field::from_interior(&th).unwrap())
            .unwrap();
        worst_h = worst_h.max(rel_diff(got.interior(), &expect));

        // fixed-point map: (W - dt nu^2 D2) T~ = W T^j + dt kappa/2 {d+(a g'(d-T)) + d-(a g'(d+T))}
        let prev = uniform(&mut rng, n, -0.25 * PI, 0.25 * PI);
        let t_next = rng.gen_range(0.0..1.0);
        let alpha: Vec<f64> = folded(&h).iter().map(|v| v * v / 2.0 + p.delta0).collect();
        let w: Vec<f64> = (0..n).map(|i| mobility.eval(t_next, i as f64 * dx)).collect();
        let mut b = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                b[i][j] = -dt * p.nu * p.nu * d2[i][j];
            }
            b[i][i] += w[i];
            let c = i + 1;
            let fwd = (alpha[c + 1] * gamma_p((tf[c + 1] - tf[c]) / dx) - alpha[c] * gamma_p((tf[c] - tf[c - 1]) / dx)) / dx;
            let bwd = (alpha[c] * gamma_p((tf[c + 1] - tf[c]) / dx) - alpha[c - 1] * gamma_p((tf[c] - tf[c - 1]) / dx)) / dx;
            rhs[i] = w[i] * prev[i] + dt * p.kappa / 2.0 * (fwd + bwd);
        }
        let expect = dense_solve(b, rhs);
        let got = scheme
            .picard_map(
                t_next,
                &Field::from_interior(&h).unwrap(),
                &Field::from_interior(&prev).unwrap(),
                &Field::from_interior(&th).unwrap(),
            )
            .unwrap();
        worst_b = worst_b.max(rel_diff(got.interior(), &expect));

        // Thomas on a random diagonally dominant system
        let diag = uniform(&mut rng, n, 3.0, 6.0);
        let off = uniform(&mut rng, 2 * (n - 1), -1.4, 1.4);
        let m = Tridiagonal {
            lower: off[..n - 1].to_vec(),
            diag,
            upper: off[n - 1..].to_vec(),
        };
        let r = uniform(&mut rng, n, -10.0, 10.0);
        worst_h = worst_h.max(rel_diff(&m.solve(&r).unwrap(), &dense_solve(m.to_dense(), r)));
    }

    let jgrid = GridSpec::new(8, 0.06, 1).unwrap();
    let jscheme = Scheme::new(p, jgrid, Mobility::default_for(&p)).unwrap();
    let mut worst_j = 0.0_f64;
    let step = 1e-6;
    for _ in 0..100 {
        let h = Field::from_interior(&uniform(&mut rng, 9, 0.0, 1.0)).unwrap();
        let prev = Field::from_interior(&uniform(&mut rng, 9, -0.25 * PI, 0.25 * PI)).unwrap();
        let guess = uniform(&mut rng, 9, -0.25 * PI, 0.25 * PI);
        let jac = jscheme.theta_jacobian(0.06, &h, &Field::from_interior(&guess).unwrap());
        for col in 0..9 {
            let (mut up, mut dn) = (guess.clone(), guess.clone());
            up[col] += step;
            dn[col] -= step;
            let ru = jscheme.theta_residual(0.06, &h, &prev, &Field::from_interior(&up).unwrap());
            let rd = jscheme.theta_residual(0.06, &h, &prev, &Field::from_interior(&dn).unwrap());
            for row in 0..9 {
                let fd = (ru[row] - rd[row]) / (2.0 * step);
                let exact = jac.get(row, col);
                worst_j = worst_j.max((fd - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    (
        worst_h <= 1e-12 && worst_b <= 1e-12 && worst_j <= 1e-6,
        format!("H/Thomas vs dense {worst_h:.1e}, Picard vs dense {worst_b:.1e} (tol 1e-12); Jacobian vs FD {worst_j:.1e} (tol 1e-6)"),
    )
}

fn c6_contraction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = ModelParams::standard();
    let k = 10;
    let n = k + 1;
    let probe = GridSpec::new(k, 1.0, 1).unwrap();
    let dt = 0.5 * kwc_core::model::dt_existence_bound(&p, probe.dx());
    let grid = GridSpec::new(k, dt, 1).unwrap();
    let scheme = Scheme::new(p, grid, Mobility::default_for(&p)).unwrap();
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let h = Field::from_interior(&uniform(&mut rng, n, 0.0, 1.0)).unwrap();
        let prev = Field::from_interior(&uniform(&mut rng, n, -0.25 * PI, 0.25 * PI)).unwrap();
        let radius = 2f64.sqrt() * grid.norm_l2d(&prev);
        let mut in_ball = || {
            let f = Field::from_interior(&uniform(&mut rng, n, -1.0, 1.0)).unwrap();
            let s = rng.gen_range(0.0..1.0) * radius / grid.norm_l2d(&f);
            let v: Vec<f64> = f.interior().iter().map(|x| x * s).collect();
            Field::from_interior(&v).unwrap()
        };
        let (a, b) = (in_ball(), in_ball());
        assert!(grid.norm_l2d(&a) <= radius * (1.0 + 1e-12) && grid.norm_l2d(&b) <= radius * (1.0 + 1e-12));
        let pa = scheme.picard_map(dt, &h, &prev, &a).unwrap();
        let pb = scheme.picard_map(dt, &h, &prev, &b).unwrap();
        let diff = |x: &Field, y: &Field| {
            let d: Vec<f64> = x.interior().iter().zip(y.interior()).map(|(u, v)| u - v).collect();
            grid.norm_l2d(&Field::from_interior(&d).unwrap())
        };
        worst = worst.max(diff(&pa, &pb) / diff(&a, &b));
    }
    (worst < 1.0, format!("dt = {dt:.4e}, max ratio {worst:.3e} over 50 pairs"))
}

fn c7_stationary() -> Verdict {
    let p = ModelParams::standard();
    let grid = GridSpec::new(50, 0.06, 100).unwrap();
    let hstar = p.c / (p.c + p.kappa * p.eps);
    let scheme = Scheme::new(p, grid, Mobility::default_for(&p)).unwrap();
    let mut sim = Simulation::new(
        scheme,
        Field::constant(50, hstar),
        Field::constant(50, 0.3),
        ThetaSolveConfig::default(),
    )
    .unwrap();
    let mut drift = 0.0_f64;
    for _ in 0..100 {
        sim.step().unwrap();
        let dh = sim.state.h.interior().iter().fold(0.0_f64, |m, v| m.max((v - hstar).abs()));
        let dt = sim.state.theta.interior().iter().fold(0.0_f64, |m, v| m.max((v - 0.3).abs()));
        drift = drift.max(dh).max(dt);
    }
    (drift <= 1e-12, format!("H* = {hstar:.10}, max drift {drift:.1e} over 100 steps"))
}

fn c8_convergence() -> Verdict {
    let p = ModelParams::standard();
    let cfg = StudyConfig::default();
    let rep = convergence_study(&p, &Mobility::default_for(&p), &InitialData::from_preset(Preset::Smooth), &cfg).unwrap();
    // slope refit here, independent of the library's fit
    let fit = |e: Vec<f64>| {
        let xs: Vec<f64> = rep.levels.iter().map(|l| (1.0 / l.k as f64).ln()).collect();
        let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    };
    let oe = fit(rep.levels.iter().map(|l| l.e_eta).collect());
    let ot = fit(rep.levels.iter().map(|l| l.e_theta).collect());
    let ks: Vec<usize> = rep.levels.iter().map(|l| l.k).collect();
    let lib = rep.fitted_order().unwrap_or(f64::NAN);
    (
        ks == [25, 50, 100, 200] && rep.reference_k == 800 && oe >= 0.9 && ot >= 0.9 && (lib - oe.min(ot)).abs() < 1e-12,
        format!("K = {ks:?} vs 800: order eta {oe:.4}, theta {ot:.4} (floor 0.9)"),
    )
}

fn c9_bound_arithmetic() -> Verdict {
    let out = Command::new(env!("CARGO_BIN_EXE_kwc"))
        .args(["bounds", "--preset", "example1"])
        .output()
        .expect("kwc runs");
    let text = String::from_utf8_lossy(&out.stdout);
    let read = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .and_then(|rest| rest.split_whitespace().next())
            .and_then(|v| v.parse().ok())
            .unwrap_or(f64::NAN)
    };
    let (exist, error) = (read("dt_exist "), read("dt_error "));
    // by hand: nu = eps = delta0 = 0.01, kappa = 0.1, c = 1, dx = 0.02, C1 = 1, L = 0
    let hand_exist = 0.01f64.powi(2) * 0.01f64.powi(2) / (4.0 * 0.01 * 0.01 * 0.51 * 0.51) * 0.02 * 0.02;
    let a = f64::max(2.0 * (0.1 / 0.01f64).powi(2) - (2.0 * 0.1 * 0.01 + 1.0), 1.0 / 0.01);
    let hand_error = 1.0 / (3.0 * a);
    let sig4 = |x: f64, y: f64| (x - y).abs() <= 5e-4 * y;
    (
        out.status.success()
            && sig4(exist, hand_exist)
            && sig4(error, hand_error)
            && sig4(exist, 3.846e-8)
            && sig4(error, 1.675e-3)
            && (a - 198.998).abs() < 1e-9,
        format!("dt_exist {exist:.6e} (hand {hand_exist:.6e}), a {a:.3}, dt_error {error:.6e} (hand {hand_error:.6e})"),
    )
}

fn report(n: usize, limit: Option<Duration>, elapsed: Duration, verdict: std::thread::Result<Verdict>) -> bool {
    let (ok, detail) = match verdict {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let in_time = limit.is_none_or(|l| elapsed < l);
    let pass = ok && in_time;
    let limit = limit.map_or(String::new(), |l| format!(" < {}s", l.as_secs_f64()));
    println!(
        "criterion {n}: {} [{:.3}s{limit}] {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (std::thread::Result<T>, Duration) {
    let t = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(f));
    (r, t.elapsed())
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut all = true;

    let (r, e) = timed(c1_identities);
    all &= report(1, Some(secs(1)), e, r);
    let (r, e) = timed(c2_bounds);
    all &= report(2, Some(secs(1)), e, r);

    let (runs, e) = timed(|| Preset::EXAMPLES.map(run_example));
    match runs {
        Ok(runs) => {
            all &= report(3, Some(secs(10)), e, Ok(c3_range(&runs)));
            all &= report(4, Some(secs(10)), e, Ok(c4_dissipation(&runs)));
        }
        Err(p) => {
            all &= report(3, Some(secs(10)), e, Err(p));
            all &= report(4, None, e, Ok((false, "example runs failed".into())));
        }
    }

    let (r, e) = timed(c5_solvers);
    all &= report(5, Some(secs(2)), e, r);
    let (r, e) = timed(c6_contraction);
    all &= report(6, Some(secs(2)), e, r);
    let (r, e) = timed(c7_stationary);
    all &= report(7, None, e, r);
    let (r, e) = timed(c8_convergence);
    all &= report(8, Some(secs(60)), e, r);
    let (r, e) = timed(c9_bound_arithmetic);
    all &= report(9, None, e, r);

    if all {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
