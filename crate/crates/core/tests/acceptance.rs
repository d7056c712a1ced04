//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! The reference values come from independent code in this file: the power
//! and queueing formulas are re-derived here from the physical parameters,
//! optima are located by derivative bisection or golden-section search, and
//! nothing below calls the library's closed-form solvers to check
//! themselves.

use std::f64::consts::{E, LN_2};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vbs_edt::harness::{cmd_compare, DelayPolicy, ScenarioFile};
use vbs_edt::lambert::{lambert_w0, BRANCH_POINT};
use vbs_edt::optimizer::{
    asymptotic_power, energy_optimal_exists, energy_optimal_rate, joint_optimize, solve_optimal_rate, tradeoff_curve,
    unconstrained_cost, CoreSelection,
};
use vbs_edt::power::{bbu_power_from_load, cpu_load};
use vbs_edt::radio::{pout_for_rate, rate_for_pout};
use vbs_edt::sim::{compare_with_analytic, simulate_many, SimConfig, SizeDistribution, VALIDATION_CONFIDENCE};
use vbs_edt::{ComputeParams, Error, Execution, LinkBudget, RadioParams, Scenario, TrafficParams, BITS_PER_MB};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

// ---- reference model, written out from the physical parameters ----

const W: f64 = 20e6;

/// 1 / (PL F N0 W) at 500 m, 2 GHz, 9 dB noise figure, -174 dBm/Hz.
fn ref_gain() -> f64 {
    let pl_db = 128.1 + 37.6 * 0.5f64.log10();
    let n0 = 10f64.powf((-174.0 - 30.0) / 10.0);
    1.0 / (10f64.powf(pl_db / 10.0) * 10f64.powf(0.9) * n0 * W)
}

/// Busy power `a + b r + (2^(r/W) - 1) / G` with its sleep draw and switch energy.
#[derive(Clone, Copy)]
struct RefProfile {
    a: f64,
    b: f64,
    g: f64,
    sleep: f64,
    e_sw: f64,
}

impl RefProfile {
    /// VBS with `n` cores and the reference hardware.
    fn vbs(n: u32, p_rf: f64, e_sw: f64) -> Self {
        let delta = (20.0 - 5.0) / (2e9f64).powi(2);
        RefProfile {
            a: f64::from(n) * 5.0 + delta * 2e9 * 7e8 + p_rf,
            b: delta * 2e9 * 35.0,
            g: ref_gain() * 0.311,
            sleep: 6.45,
            e_sw,
        }
    }

    /// EARTH-model conventional BS.
    fn cbs() -> Self {
        RefProfile {
            a: 84.0,
            b: 0.0,
            g: ref_gain() / 2.8,
            sleep: 56.0,
            e_sw: 5.0,
        }
    }

    fn busy(&self, r: f64) -> f64 {
        self.a + self.b * r + (r / W * LN_2).exp_m1() / self.g
    }

    fn power(&self, lambda: f64, l: f64, r: f64) -> f64 {
        let rho = lambda * l / r;
        rho * self.busy(r) + (1.0 - rho) * self.sleep + 2.0 * self.e_sw * lambda * (1.0 - rho)
    }

    fn d_power(&self, lambda: f64, l: f64, r: f64) -> f64 {
        let rho = lambda * l / r;
        let busy_slope = self.b + LN_2 / W * (r / W * LN_2).exp() / self.g;
        -rho / r * (self.busy(r) - self.sleep - 2.0 * self.e_sw * lambda) + rho * busy_slope
    }
}

fn ref_delay(lambda: f64, l: f64, r: f64) -> f64 {
    1.0 / (r / l - lambda)
}

/// Zero of `f` on `[lo, hi]` with `f(lo) < 0 < f(hi)`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section minimum of a unimodal `f` on `[a, b]`.
fn golden(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-15 * b.abs() {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `n` rates in `(lo, hi]`, log-spaced in their distance from `lo`.
fn offset_log_grid(lo: f64, hi: f64, first_offset: f64, n: usize) -> Vec<f64> {
    let (a, b) = (first_offset.ln(), (hi - lo).ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Grid search plus golden refinement of `f` over `(lo, hi]`.
fn grid_min(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let grid = offset_log_grid(lo, hi, lo * 1e-9, n);
    let vals: Vec<f64> = grid.iter().map(|&r| f(r)).collect();
    let (i, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is not empty");
    let a = if i == 0 { grid[0] } else { grid[i - 1] };
    let b = grid[(i + 1).min(grid.len() - 1)];
    let (x, fx) = golden(a, b, &f);
    if fx < vals[i] {
        (x, fx)
    } else {
        (grid[i], vals[i])
    }
}

fn reference_scenario(lambda: f64, l: f64, alpha: f64) -> Scenario {
    Scenario::new(
        ComputeParams::default(),
        RadioParams::default(),
        LinkBudget::default(),
        TrafficParams::new(lambda, l).unwrap(),
        alpha,
    )
    .unwrap()
}

fn r_max(n: u32) -> f64 {
    (f64::from(n) * 2e9 - 7e8) / 35.0
}

// ---- criteria ----

fn savings_reproduction() -> Outcome {
    let cfg = ScenarioFile::default().resolve().unwrap();
    let rows = match cmd_compare(&cfg, DelayPolicy::CbsOptimal, Execution::Sequential) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("compare failed: {e}")),
    };
    let row = &rows[0];
    let (Some(vbs), Some(d), Some(savings)) = (row.vbs, row.cbs_delay_s, row.savings()) else {
        return outcome(false, format!("incomplete row: {}", row.status));
    };

    let (lambda, l) = (1.0, 2.0 * BITS_PER_MB);
    let cbs = RefProfile::cbs();
    let r_c = bisect(lambda * l * (1.0 + 1e-9), 50.0 * W, |r| cbs.d_power(lambda, l, r));
    let d_ref = ref_delay(lambda, l, r_c);
    let n = (1..).find(|&n| r_max(n) >= r_c).unwrap();
    let s_ref = 1.0 - RefProfile::vbs(n, 12.9, 5.0).power(lambda, l, r_c) / cbs.power(lambda, l, r_c);

    let agree = rel(d, d_ref) < 1e-6 && (savings - s_ref).abs() < 1e-6 && vbs.n_cores == n;
    let in_band = (d - 0.26).abs() <= 0.15 * 0.26 && (savings - 0.64).abs() <= 0.05;
    outcome(
        agree && in_band,
        format!(
            "D = {d:.4} s (ref {d_ref:.4}), savings = {:.2}% (ref {:.2}%), VBS on {} core(s)",
            100.0 * savings,
            100.0 * s_ref,
            vbs.n_cores
        ),
    )
}

fn savings_inequality() -> Outcome {
    let l = 2.0 * BITS_PER_MB;
    let mut passed = true;
    let mut parts = Vec::new();
    for lambda in [0.5, 1.0, 1.5] {
        let mut file = ScenarioFile::default();
        file.set("traffic", "lambda", &lambda.to_string()).unwrap();
        let cfg = file.resolve().unwrap();
        let row = match cmd_compare(&cfg, DelayPolicy::MinPower, Execution::Sequential) {
            Ok(r) => r.into_iter().next().unwrap(),
            Err(e) => return outcome(false, format!("lambda={lambda}: {e}")),
        };
        let Some(savings) = row.savings() else {
            return outcome(false, format!("lambda={lambda}: {}", row.status));
        };

        let lo = lambda * l * (1.0 + 1e-9);
        let vbs_min = (1..=8)
            .filter(|&n| r_max(n) > lo)
            .map(|n| {
                let p = RefProfile::vbs(n, 12.9, 5.0);
                grid_min(lambda * l, r_max(n), 4000, |r| p.power(lambda, l, r)).1
            })
            .fold(f64::INFINITY, f64::min);
        let cbs = RefProfile::cbs();
        let cbs_min = grid_min(lambda * l, 50.0 * W, 4000, |r| cbs.power(lambda, l, r)).1;
        let s_ref = 1.0 - vbs_min / cbs_min;

        let ok = savings > 0.60 && (savings - s_ref).abs() < 1e-6;
        passed &= ok;
        parts.push(format!(
            "lambda={lambda}: {:.2}% (ref {:.2}%)",
            100.0 * savings,
            100.0 * s_ref
        ));
    }
    outcome(passed, parts.join(", "))
}

fn existence_suite() -> Outcome {
    let n = 4;
    let mut notes = Vec::new();
    let mut passed = true;

    // (a) conditions hold: one interior minimum at the closed-form rate
    let (lambda, l) = (1.0, 2.0 * BITS_PER_MB);
    let sc = reference_scenario(lambda, l, 0.0);
    let d_min = ref_delay(lambda, l, r_max(n));
    let delays: Vec<f64> = (0..4000)
        .map(|i| d_min * (100.0 / d_min).powf(i as f64 / 3999.0))
        .collect();
    let curve: Vec<_> = tradeoff_curve(&sc, CoreSelection::Fixed(n), &delays, Execution::default())
        .into_iter()
        .collect::<Result<_, _>>()
        .unwrap();
    let minima: Vec<usize> = (1..curve.len() - 1)
        .filter(|&i| curve[i].avg_power < curve[i - 1].avg_power && curve[i].avg_power < curve[i + 1].avg_power)
        .collect();
    let exists = energy_optimal_exists(&sc, n).exists();
    let p = RefProfile::vbs(n, 12.9, 5.0);
    let r_ref = bisect(curve[curve.len() - 1].rate, curve[0].rate, |r| p.d_power(lambda, l, r));
    let r_e = energy_optimal_rate(&sc, n);
    let a_ok = exists
        && minima.len() == 1
        && r_e.as_ref().is_ok_and(|&r| rel(r, r_ref) <= 1e-6)
        && rel(curve[minima[0]].rate, r_ref) < 1e-2;
    passed &= a_ok;
    notes.push(format!(
        "(a) {} interior minimum, r_e* = {:.6e} vs ref {r_ref:.6e}",
        minima.len(),
        r_e.unwrap_or(f64::NAN)
    ));

    // (b) conditions violated: power keeps falling as delay grows
    let bound = energy_optimal_exists(&sc, n).file_size_bound.unwrap();
    let violated = [(lambda, 1.5 * bound), (4.0, 1e6)];
    for (lam, size) in violated {
        let sc_b = reference_scenario(lam, size, 0.0);
        let d0 = ref_delay(lam, size, r_max(n));
        let delays: Vec<f64> = (0..2000).map(|i| d0 * (1e4f64).powf(i as f64 / 1999.0)).collect();
        let pts: Vec<_> = tradeoff_curve(&sc_b, CoreSelection::Fixed(n), &delays, Execution::default())
            .into_iter()
            .collect::<Result<_, _>>()
            .unwrap();
        let monotone = pts.windows(2).all(|w| w[1].avg_power < w[0].avg_power);
        let flagged = !energy_optimal_exists(&sc_b, n).exists();
        passed &= monotone && flagged;
        notes.push(format!(
            "(b) lambda={lam}, L={size:.3e}: decreasing={monotone}, existence rejected={flagged}"
        ));
    }

    // (c) heavy-load limit
    for (lam, size) in [(lambda, l), violated[0], violated[1]] {
        let sc_c = reference_scenario(lam, size, 0.0);
        let r = lam * size * (1.0 + 1e-6);
        let p_lib = unconstrained_cost(&sc_c, n, r).unwrap();
        let prof = RefProfile::vbs(n, 12.9, 5.0);
        let asym_ref = prof.a + prof.b * lam * size + (lam * size / W * LN_2).exp_m1() / prof.g;
        let asym = asymptotic_power(&sc_c, n);
        let ok = rel(p_lib, asym) <= 1e-3 && rel(asym, asym_ref) < 1e-12;
        passed &= ok;
        notes.push(format!("(c) lambda={lam}: P = {p_lib:.5} W, limit {asym:.5} W"));
    }
    outcome(passed, notes.join("; "))
}

struct RandomScenario {
    sc: Scenario,
    n_max: u32,
}

fn random_scenarios(count: usize, seed: u64) -> Vec<RandomScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.random_range(lo.ln()..hi.ln())).exp();
    while out.len() < count {
        let lambda = log_uniform(&mut rng, 0.1, 5.0);
        let l = log_uniform(&mut rng, 1e5, 5e7);
        let alpha = log_uniform(&mut rng, 0.01, 100.0);
        let n_max = rng.random_range(1..=8u32);
        let radio = RadioParams {
            p_rf: rng.random_range(2.0..20.0),
            e_switch: rng.random_range(0.0..10.0),
            ..RadioParams::default()
        };
        if lambda * l * (1.0 + 1e-6) >= r_max(n_max) {
            continue;
        }
        let sc = Scenario::new(
            ComputeParams::default(),
            radio,
            LinkBudget::default(),
            TrafficParams::new(lambda, l).unwrap(),
            alpha,
        )
        .unwrap();
        out.push(RandomScenario { sc, n_max });
    }
    out
}

fn solver_vs_oracle() -> Outcome {
    let scenarios = random_scenarios(200, 0x5eed);
    let results = Execution::default().map(&scenarios, |rs| {
        let sc = &rs.sc;
        let offered = sc.traffic.offered_load();

        // unconstrained optimum against a dense grid
        let r_star = match solve_optimal_rate(sc, rs.n_max) {
            Ok(r) => r,
            Err(Error::NoInteriorStationaryPoint { rate }) => rate,
            Err(e) => return Err(format!("solve: {e}")),
        };
        let z_star = unconstrained_cost(sc, rs.n_max, r_star).map_err(|e| e.to_string())?;
        let grid = offset_log_grid(offered, 55.0 * W, offered * 1e-9, 100_000);
        let z_grid = grid
            .iter()
            .map(|&r| unconstrained_cost(sc, rs.n_max, r).unwrap_or(f64::INFINITY))
            .fold(f64::INFINITY, f64::min);
        if z_star > z_grid * (1.0 + 1e-8) {
            return Err(format!("z(r*) = {z_star} above grid minimum {z_grid}"));
        }

        // joint search against every core count
        let joint = joint_optimize(sc, rs.n_max).map_err(|e| format!("joint: {e}"))?.best;
        let mut best = (f64::INFINITY, 0u32);
        for n in 1..=rs.n_max {
            if r_max(n) <= offered * (1.0 + 1e-9) {
                continue;
            }
            let (_, z) = grid_min(offered, r_max(n), 4000, |r| {
                unconstrained_cost(sc, n, r).unwrap_or(f64::INFINITY)
            });
            if z < best.0 * (1.0 - 1e-9) {
                best = (z, n);
            }
        }
        let z_ok = joint.cost <= best.0 * (1.0 + 1e-9) && best.0 <= joint.cost * (1.0 + 1e-9);
        let tie = (joint.cost - best.0).abs() <= 1e-9 * best.0;
        if !z_ok || (joint.n_cores != best.1 && !tie) {
            return Err(format!(
                "joint ({}, {} cores) vs exhaustive ({}, {} cores)",
                joint.cost, joint.n_cores, best.0, best.1
            ));
        }
        Ok(())
    });
    let failures: Vec<String> = results
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.err().map(|e| format!("#{i}: {e}")))
        .collect();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "200/200 scenarios match".to_string()
        } else {
            format!("{} mismatches: {}", failures.len(), failures.join("; "))
        },
    )
}

fn simulation_vs_analytic() -> Outcome {
    let (lambda, l) = (1.0, 2.0 * BITS_PER_MB);
    let t = TrafficParams::new(lambda, l).unwrap();
    let sc = reference_scenario(lambda, l, 0.0);
    let mut passed = true;
    let mut notes = Vec::new();
    for dist in [SizeDistribution::Exponential, SizeDistribution::Deterministic] {
        let cfgs: Vec<SimConfig> = (0..10)
            .map(|i| {
                let rho = 0.1 + 0.8 * i as f64 / 9.0;
                let r = lambda * l / rho;
                let n = (1..).find(|&n| r_max(n) >= r).unwrap();
                let mut c = SimConfig::new(t, r, sc.profile(n));
                c.size_distribution = dist;
                c.n_arrivals = SimConfig::arrivals_for_post_warmup(100_000, c.warmup_fraction);
                c.rng_seed = 1000 + i as u64;
                c
            })
            .collect();
        let stats = simulate_many(&cfgs, Execution::default());
        let mut misses = Vec::new();
        for (cfg, s) in cfgs.iter().zip(stats) {
            let report = compare_with_analytic(cfg, s.unwrap(), VALIDATION_CONFIDENCE).unwrap();
            for c in report.flagged() {
                misses.push(format!(
                    "rho={:.3} {}: analytic {:.5} vs {:.5} +- {:.5}",
                    lambda * l / cfg.rate,
                    c.name,
                    c.analytic,
                    c.simulated,
                    c.halfwidth
                ));
            }
        }
        passed &= misses.is_empty();
        notes.push(if misses.is_empty() {
            format!("{dist:?}: 50/50 inside")
        } else {
            format!("{dist:?}: {} outside [{}]", misses.len(), misses.join("; "))
        });
    }
    outcome(passed, notes.join(", "))
}

fn lambert_kernel() -> Outcome {
    let mut xs: Vec<f64> = Vec::with_capacity(10_000);
    xs.extend((0..2000).map(|i| BRANCH_POINT + 10f64.powf(-16.0 + 16.0 * i as f64 / 1999.0)));
    xs.extend((0..3000).map(|i| BRANCH_POINT + (1.0 - BRANCH_POINT) * i as f64 / 2999.0));
    xs.extend((0..5000).map(|i| 10f64.powf(10.0 * i as f64 / 4999.0)));
    let mut worst = 0.0f64;
    for &x in &xs {
        let Ok(w) = lambert_w0(x) else {
            return outcome(false, format!("no value at x = {x}"));
        };
        worst = worst.max((w * w.exp() - x).abs() / x.abs().max(1.0));
    }
    let branch = lambert_w0(-1.0 / E).unwrap();
    let omega = lambert_w0(E).unwrap();
    let ok = worst <= 1e-12 && (branch + 1.0).abs() <= 1e-12 && (omega - 1.0).abs() <= 1e-12;
    outcome(
        ok,
        format!(
            "{} points, worst scaled residual {worst:.2e}, W(-1/e)+1 = {:.1e}, W(e)-1 = {:.1e}",
            xs.len(),
            branch + 1.0,
            omega - 1.0
        ),
    )
}

fn structural_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = [0.0f64; 4];
    for _ in 0..2000 {
        let lambda = rng.random_range(0.1..2.0);
        let l = rng.random_range(1e6..3e7);
        let n = rng.random_range(1..=8u32);
        let kappa = rng.random_range(1.0..100.0);
        let compute = ComputeParams {
            kappa,
            beta: rng.random_range(1.0..3.0),
            c0: rng.random_range(0.0..1.5e9),
            ..ComputeParams::default()
        };
        let sc = Scenario::new(
            compute.clone(),
            RadioParams::default(),
            LinkBudget::default(),
            TrafficParams::new(lambda, l).unwrap(),
            rng.random_range(0.0..10.0),
        )
        .unwrap();

        if let Ok(r) = energy_optimal_rate(&sc, n) {
            let mut other = sc.clone();
            other.compute.kappa = rng.random_range(1.0..100.0);
            worst[0] = worst[0].max(rel(energy_optimal_rate(&other, n).unwrap(), r));
        }

        let r = lambda * l * rng.random_range(1.01..15.0);
        let z1 = unconstrained_cost(&sc, n, r).unwrap();
        let z2 = unconstrained_cost(&sc, n + 1, r).unwrap();
        let rho = lambda * l / r;
        worst[1] = worst[1].max((z2 - z1 - rho * 5.0).abs() / z2);

        let c = compute.with_cores(n);
        let delta = (c.p_core_max - c.p_core_min) / c.ref_speed.powf(c.beta);
        let direct = f64::from(n) * c.p_core_min + delta * c.cpu_speed.powf(c.beta - 1.0) * (c.c0 + c.kappa * r);
        worst[2] = worst[2].max(rel(bbu_power_from_load(&c, cpu_load(&c, r).value()), direct));

        let g = ref_gain();
        let rate = rng.random_range(1e3..1e9);
        let back = rate_for_pout(g, W, pout_for_rate(g, W, rate).unwrap());
        let p = rng.random_range(1e-3..1e3);
        let p_back = pout_for_rate(g, W, rate_for_pout(g, W, p)).unwrap();
        worst[3] = worst[3].max(rel(back, rate)).max(rel(p_back, p));
    }
    let ok = worst.iter().all(|&w| w <= 1e-12);
    outcome(
        ok,
        format!(
            "2000 draws; kappa {:.1e}, core step {:.1e}, load identity {:.1e}, round-trip {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("savings reproduction", Duration::from_secs(1), savings_reproduction),
        ("savings inequality", Duration::from_secs(5), savings_inequality),
        ("energy-optimum existence", Duration::from_secs(10), existence_suite),
        ("solver vs oracle", Duration::from_secs(120), solver_vs_oracle),
        (
            "simulation vs analytic",
            Duration::from_secs(300),
            simulation_vs_analytic,
        ),
        ("lambert w kernel", Duration::from_secs(60), lambert_kernel),
        ("structural invariants", Duration::from_secs(60), structural_invariants),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = o.passed && in_time;
        failed += usize::from(!pass);
        println!(
            "{} [{}] {name}: {} ({:.2?}{})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed,
            if in_time {
                String::new()
            } else {
                format!(", limit {limit:?}")
            }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
