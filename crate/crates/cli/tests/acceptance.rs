//! Acceptance gate: ten end-to-end checks of the laboratory.  Each test
//! prints one `ACCEPTANCE NN <name>: PASS/FAIL` line carrying the measured
//! numbers it was judged on, then asserts.  Run
//!
//! ```text
//! cargo test --test acceptance -- --test-threads=1 --nocapture
//! ```
//!
//! to see the lines in order (captured output still surfaces on failure).

use std::f64::consts::TAU;
use std::process::Command;
use std::sync::LazyLock;
use std::time::Instant;

use kglab_core::conditions::{check_m1, check_m3, check_relation, check_sup};
use kglab_core::gauge::{build_gauge, riccati_residual, verify_series_bounds, StartTime};
use kglab_core::modes::{
    check_gmec, check_initial_segment, e_kg, e_mod, simulate_mode, sweep_modes, ModeResult,
    ZoneConfig, GMEC_SLOPE_TOL,
};
use kglab_core::potential::PotentialSpec;
use kglab_core::tails::{build_tail_table, oracle_simpson, TailTable, TimeGrid};
use kglab_core::{a_eta_diagnostic, ConditionParams, GaugeSeries};
use num_complex::Complex64;

// ---------------------------------------------------------------------------
// Shared fixtures and helpers
// ---------------------------------------------------------------------------

struct Lab {
    spec: PotentialSpec,
    table: TailTable,
    series: GaugeSeries,
}

fn build_lab(spec: PotentialSpec, nodes: usize, start: StartTime) -> Lab {
    let grid = TimeGrid::log_spaced(0.0, 1e4, nodes).expect("grid");
    let table = build_tail_table(&spec, &grid, 1e-11).expect("tail table");
    let series = build_gauge(&spec, &table, &grid, 1e-9, 40, start).expect("gauge series");
    Lab { spec, table, series }
}

/// Oscillatory example with (β, κ) = (0.5, 2): the flagship potential.
static EXAMPLE: LazyLock<Lab> = LazyLock::new(|| {
    build_lab(PotentialSpec::oscillatory_example(0.5, 2.0).unwrap(), 200, StartTime::Auto)
});

/// Borderline power potential μ²(1+t)^{-2}, μ = 0.4, pinned start.
static SCALE_INV: LazyLock<Lab> = LazyLock::new(|| {
    build_lab(PotentialSpec::scale_invariant(0.4, 1.0).unwrap(), 200, StartTime::Fixed(0.0))
});

/// 33-mode sweep of the example to t = 10³ (reused by criteria 5 and 8).
static SWEEP_1E3: LazyLock<Vec<ModeResult>> = LazyLock::new(|| {
    let lab = &*EXAMPLE;
    let zone = ZoneConfig::from_series(-2.0, &lab.series).unwrap();
    sweep_modes(&lab.spec, &lab.series, &zone, &log_grid(1e-2, 1e2, 33), one(), 1e3, 1e-10)
        .into_iter()
        .collect::<Result<_, _>>()
        .expect("sweep to 10^3")
});

fn one() -> (Complex64, Complex64) {
    (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Log-spaced probes in [lo, hi] in the shifted variable 1 + t.
fn shifted_probes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (1.0 + lo) * ((1.0 + hi) / (1.0 + lo)).powf(i as f64 / (n - 1) as f64) - 1.0)
        .collect()
}

fn verdict(number: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {number:02} {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number:02} ({name}) failed: {detail}");
}

/// Two-sided constant, worst |slope|, and verdict across a sweep.
fn gmec_aggregate(results: &[ModeResult], anchor: f64) -> (f64, f64, bool) {
    let mut c = 1.0_f64;
    let mut worst = 0.0_f64;
    let mut all = true;
    for r in results {
        let g = check_gmec(r, anchor).expect("gmec stats");
        c = c.max(g.ratio.max).max(1.0 / g.ratio.min);
        worst = worst.max(g.ratio.slope.abs());
        all &= g.pass;
    }
    (c, worst, all)
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// Gauge certification: residual sup over [T, 10³] below 10⁻⁶ with adaptive
/// order selection, within the runtime budget, for both flagship potentials.
#[test]
fn criterion_01_riccati_certification() {
    let mut detail = String::new();
    let mut pass = true;
    let cases = [
        ("oscillatory(0.5,2)", PotentialSpec::oscillatory_example(0.5, 2.0).unwrap(), StartTime::Auto),
        ("scale-invariant(0.4,1)", PotentialSpec::scale_invariant(0.4, 1.0).unwrap(), StartTime::Fixed(0.0)),
    ];
    for (label, spec, start) in cases {
        let clock = Instant::now();
        let lab = build_lab(spec, 200, start);
        let mut sup = 0.0_f64;
        for t in shifted_probes(lab.series.t_start, 1e3, 500) {
            sup = sup.max(riccati_residual(&lab.series, t).abs());
        }
        let secs = clock.elapsed().as_secs_f64();
        pass &= sup <= 1e-6 && secs <= 60.0;
        detail.push_str(&format!(
            "{label}: residual sup {sup:.3e} (K = {}), {secs:.1} s; ",
            lab.series.k_used
        ));
    }
    verdict(1, "riccati-certification", pass, detail.trim_end_matches("; "));
}

/// Closed-form gauge: the summed series for μ = 0.4 equals 0.2/(1+t).
/// Oracle pair: the quadratic root S² + S + μ² = 0 and a backward RK4
/// integration of the Riccati equation (in u = ln(1+t)) seeded with it.
#[test]
fn criterion_02_closed_form_gauge() {
    let lab = &*SCALE_INV;
    let closed = |t: f64| 0.2 / (1.0 + t);
    let mut probes = shifted_probes(0.0, 1e3, 50);
    probes.sort_by(|a, b| b.partial_cmp(a).unwrap());

    // Backward RK4 from t = 10⁴ down through the probes.
    let f = |u: f64, b: f64| {
        let t = u.exp() - 1.0;
        -(1.0 + t) * (b * b + lab.spec.eval_m(t))
    };
    let mut u = (1.0 + 1e4_f64).ln();
    let mut b = closed(1e4);
    let h_base = 1e-4;
    let mut rk4_worst = 0.0_f64;
    let mut series_worst = 0.0_f64;
    for &tp in &probes {
        let u_p = (1.0 + tp).ln();
        let n = ((u - u_p) / h_base).ceil().max(1.0) as usize;
        let h = (u_p - u) / n as f64;
        for _ in 0..n {
            let k1 = f(u, b);
            let k2 = f(u + 0.5 * h, b + 0.5 * h * k1);
            let k3 = f(u + 0.5 * h, b + 0.5 * h * k2);
            let k4 = f(u + h, b + h * k3);
            b += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            u += h;
        }
        let truth = closed(tp);
        rk4_worst = rk4_worst.max((b - truth).abs() / truth);
        series_worst = series_worst.max((lab.series.eval_b(tp) - truth).abs() / truth);
    }
    let pass = series_worst <= 1e-8 && rk4_worst <= 1e-8;
    verdict(
        2,
        "closed-form-gauge",
        pass,
        &format!(
            "series vs 0.2/(1+t): max rel {series_worst:.3e} at 50 probes; backward-RK4 oracle max rel {rk4_worst:.3e}"
        ),
    );
}

/// Series bounds: per-order majorant, the 1.5|Q₂| sum bound, and finite
/// measured decay constants b₀, b₁, b₂.
#[test]
fn criterion_03_lemma_suite() {
    let lab = &*EXAMPLE;
    let bounds = verify_series_bounds(&lab.series);
    let majorant_max = bounds.majorant_ratios.iter().cloned().fold(0.0_f64, f64::max);
    let b0 = bounds.b0;
    let pass = bounds.majorant_pass
        && bounds.sum_pass == Some(true)
        && b0.is_some_and(f64::is_finite)
        && bounds.b1.is_finite()
        && bounds.b2.is_finite();
    verdict(
        3,
        "lemma-suite",
        pass,
        &format!(
            "majorant sup ratio {majorant_max:.3} over k = 2..={}, sum ratio {:.3} (cap 1), b0 = {:.3e}, b1 = {:.4}, b2 = {:.4}",
            bounds.k_used,
            bounds.sum_ratio,
            b0.unwrap_or(f64::NAN),
            bounds.b1,
            bounds.b2
        ),
    );
}

/// M ≡ 0 reduces to the exact rotation: relative energy drift ≤ 10⁻⁸ over
/// [0, 10³] for slow, unit, and fast modes.
#[test]
fn criterion_04_wave_case_conservation() {
    let spec = PotentialSpec::zero();
    let grid = TimeGrid::log_spaced(0.0, 1e3, 50).unwrap();
    let table = build_tail_table(&spec, &grid, 1e-11).unwrap();
    let series = build_gauge(&spec, &table, &grid, 1e-9, 40, StartTime::Fixed(0.0)).unwrap();
    let zone = ZoneConfig::new(-1.0, 1.0, 0.0).unwrap();
    let mut detail = String::new();
    let mut pass = true;
    for xi in [0.01, 1.0, 100.0] {
        let r = simulate_mode(&spec, &series, &zone, xi, one(), 1e3, 1e-10).unwrap();
        let e0 = e_kg(&r.samples[0].state, 0.0);
        let drift = r
            .samples
            .iter()
            .map(|s| (e_kg(&s.state, 0.0) - e0).abs() / e0)
            .fold(0.0_f64, f64::max);
        pass &= drift <= 1e-8;
        detail.push_str(&format!("xi = {xi}: drift {drift:.2e}; "));
    }
    verdict(4, "wave-case-conservation", pass, detail.trim_end_matches("; "));
}

/// Two-sided modified-energy conservation at desk scale: 33 modes, ratios
/// within [1/C, C] with C ≤ 10, per-mode log-log slope ≤ 0.02, and C stable
/// under doubling the horizon.
#[test]
fn criterion_05_mgec_desk_scale() {
    let lab = &*EXAMPLE;
    let anchor = lab.series.t_start;
    let (c1, worst1, all1) = gmec_aggregate(&SWEEP_1E3, anchor);

    let zone = ZoneConfig::from_series(-2.0, &lab.series).unwrap();
    let doubled: Vec<ModeResult> =
        sweep_modes(&lab.spec, &lab.series, &zone, &log_grid(1e-2, 1e2, 33), one(), 2e3, 1e-10)
            .into_iter()
            .collect::<Result<_, _>>()
            .expect("sweep to 2*10^3");
    let (c2, worst2, all2) = gmec_aggregate(&doubled, anchor);

    let change = (c2 - c1).abs() / c1;
    let pass = all1 && all2 && c1 <= 10.0 && change < 0.05;
    verdict(
        5,
        "mgec-desk-scale",
        pass,
        &format!(
            "33 modes: C = {c1:.4} at t_end 10^3 (cap 10), C = {c2:.4} doubled ({:.2}% change, cap 5%), worst |slope| {:.4} (cap {GMEC_SLOPE_TOL})",
            100.0 * change,
            worst1.max(worst2)
        ),
    );
}

/// Fitted condition exponents match the example family's closed relations:
/// γ = 2β + κ − 1 within ±0.1 and the stabilization tail exponent
/// α = −2β − 2κ + 3 within ±0.15, with the relation and weighted-sup checks
/// reporting satisfied.
#[test]
fn criterion_06_condition_exponents() {
    let mut detail = String::new();
    let mut pass = true;
    for (beta, kappa) in [(0.5, 2.0), (0.25, 1.6)] {
        let gamma_t = 2.0 * beta + kappa - 1.0;
        let alpha_t = -2.0 * beta - 2.0 * kappa + 3.0;
        let owned;
        let table = if (beta, kappa) == (0.5, 2.0) {
            &EXAMPLE.table
        } else {
            owned = build_tail_table(
                &PotentialSpec::oscillatory_example(beta, kappa).unwrap(),
                &TimeGrid::log_spaced(0.0, 1e4, 200).unwrap(),
                1e-11,
            )
            .unwrap();
            &owned
        };
        let alpha_fit = check_m1(table, alpha_t).fitted_exponent;
        let gamma_fit = -check_m3(table, gamma_t).fitted_exponent;
        let relation = check_relation(&ConditionParams::new(alpha_t, beta, gamma_t).unwrap());
        let sup = check_sup(table, alpha_t);
        pass &= (alpha_fit - alpha_t).abs() <= 0.15
            && (gamma_fit - gamma_t).abs() <= 0.1
            && relation.verdict.is_satisfied()
            && sup.verdict.is_satisfied();
        detail.push_str(&format!(
            "(β,κ) = ({beta},{kappa}): alpha fit {alpha_fit:.3} vs {alpha_t:.2} (±0.15), gamma fit {gamma_fit:.3} vs {gamma_t:.2} (±0.1), relation {}, sup {}; ",
            relation.verdict, sup.verdict
        ));
    }
    verdict(6, "condition-exponents", pass, detail.trim_end_matches("; "));
}

/// Negative controls through the binary: a tabulated (1+t)⁻¹ potential and
/// the borderline power potential must both fail `verify` with a verdict
/// exit code and name their mathematical reason.
#[test]
fn criterion_07_negative_controls() {
    let bin = env!("CARGO_BIN_EXE_kglab");
    let dir = tempfile::tempdir().unwrap();

    // Control A: tabulated samples of (1+t)^{-1}; the fitted envelope shows
    // the true first tail diverges despite the finite sampled support.
    let mut samples: Vec<(f64, f64)> =
        log_grid(1e-2, 1e3, 48).into_iter().map(|t| (t, 1.0 / (1.0 + t))).collect();
    samples.insert(0, (0.0, 1.0));
    let rows: Vec<String> = samples.iter().map(|(t, m)| format!("[{t}, {m}]")).collect();
    let config = format!(
        "[potential]\nkind = \"tabulated\"\nsamples = [{}]\n\n[grid]\nt_max = 1e3\npoints = 100\n",
        rows.join(", ")
    );
    let config_path = dir.path().join("tabulated.toml");
    std::fs::write(&config_path, config).unwrap();
    let out_a = Command::new(bin)
        .args(["verify", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path().join("a"))
        .output()
        .unwrap();
    let stdout_a = String::from_utf8_lossy(&out_a.stdout);
    let code_a = out_a.status.code();
    let m3_failed = stdout_a
        .lines()
        .any(|l| l.contains("m3") && l.ends_with("FAIL") && l.contains("diverg"));

    // Control B: μ²(1+t)^{-2} has a divergent φ, so the automatic start-time
    // scan must fail.
    let out_b = Command::new(bin)
        .args([
            "verify",
            "--out",
        ])
        .arg(dir.path().join("b"))
        .args([
            "--override",
            "potential.kind=scale_invariant",
            "--override",
            "potential.params=[0.4, 1.0]",
        ])
        .output()
        .unwrap();
    let stdout_b = String::from_utf8_lossy(&out_b.stdout);
    let code_b = out_b.status.code();
    let start_failed = stdout_b.contains("no valid start time");

    let pass = code_a == Some(2) && m3_failed && code_b == Some(2) && start_failed;
    verdict(
        7,
        "negative-controls",
        pass,
        &format!(
            "tabulated (1+t)^-1: exit {code_a:?}, m3 divergence flagged = {m3_failed}; scale-invariant(0.4,1): exit {code_b:?}, start-time failure flagged = {start_failed}"
        ),
    );
}

/// Compact-interval growth: K₀ on [0, T] within the Grönwall bound
/// exp(T·sup|1−M|) (1% slack), and a finite modified-vs-initial constant C′.
#[test]
fn criterion_08_initial_segment() {
    let lab = &*EXAMPLE;
    let anchor = lab.series.t_start;
    let mut k0_max = 0.0_f64;
    let mut bound = f64::NAN;
    let mut all = true;
    let mut c_prime = 0.0_f64;
    for r in SWEEP_1E3.iter() {
        let seg = check_initial_segment(r, &lab.spec, anchor).unwrap();
        k0_max = k0_max.max(seg.k0);
        bound = seg.bound;
        all &= seg.pass;
        let e_kg1_0 = e_kg(&r.samples[0].state, 1.0);
        let sup = r.samples.iter().map(|s| s.e_mod).fold(0.0_f64, f64::max);
        c_prime = c_prime.max(sup / e_kg1_0);
    }
    let pass = all && c_prime.is_finite();
    verdict(
        8,
        "initial-segment",
        pass,
        &format!(
            "K0 max {k0_max:.3} vs bound {bound:.3e} across 33 modes; C' = {c_prime:.4} (finite)"
        ),
    );
}

/// Clock-change comparison: the θ-weighted tail mass of |a − η|, scaled by
/// (1+t)², stays bounded over [T, 10³] (fitted log-log slope ≤ 0.05).
#[test]
fn criterion_09_a_eta_gap() {
    let lab = &*EXAMPLE;
    let t_lo = lab.series.t_start;
    let horizon = a_eta_diagnostic(&lab.series, 1e3).unwrap();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sup = 0.0_f64;
    for t in shifted_probes(t_lo, 900.0, 24) {
        let d = a_eta_diagnostic(&lab.series, t).unwrap();
        let gap = match d.gap_tail {
            Some(g) => g,
            None => (horizon.gap_head - d.gap_head).max(0.0),
        };
        let weighted = gap * (1.0 + t) * (1.0 + t);
        sup = sup.max(weighted);
        xs.push((1.0 + t).ln());
        ys.push(weighted.max(1e-300).ln());
    }
    let fit = kglab_core::math::fit_line(&xs, &ys).unwrap();
    let pass = sup.is_finite() && fit.slope <= 0.05;
    verdict(
        9,
        "a-eta-gap",
        pass,
        &format!("weighted gap sup {sup:.4e}, fitted slope {:.4} (cap 0.05)", fit.slope),
    );
}

/// Dual-route equivalence: the adaptive tail quadrature against composite
/// Simpson with 10⁶ panels on P1, P2, Φ2, and the adaptive mode integrator
/// against fixed-step RK4 at one tenth of its step ceiling.
#[test]
fn criterion_10_oracle_equivalence() {
    // --- Tail quadrature vs Simpson on a compactly sampled potential.
    let samples: Vec<(f64, f64)> =
        (0..=24).map(|k| (k as f64, (1.0 + k as f64).powi(-3))).collect();
    let spec = PotentialSpec::tabulated(&samples).unwrap();
    let support_end = 24.0;
    // Uniform step 0.05: the table assembles P2 and Φ2 by integrating an
    // interpolant of the previous column, so the grid must be fine enough
    // that interpolation error sits below the 1e-7 comparison cap, and the
    // sampling edge t = 24 must land on a node.
    let grid =
        TimeGrid::from_nodes((0..=600).map(|i| i as f64 * 0.05).collect()).unwrap();
    let table = build_tail_table(&spec, &grid, 1e-11).unwrap();
    let nodes = grid.nodes();
    let in_support: Vec<usize> =
        (0..nodes.len()).filter(|&i| nodes[i] <= 20.0).collect();
    let probes: Vec<usize> =
        (0..10).map(|j| in_support[j * (in_support.len() - 1) / 9]).collect();

    let panels = 1_000_000_usize;
    let (mut d1, mut d2, mut dphi) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &i in &probes {
        let tp = nodes[i];
        let p1_s = oracle_simpson(|s| spec.eval_m(s), tp, support_end, panels);
        // Fubini collapse of the iterated tail: P2(t) = ∫_t^S (σ−t) M(σ) dσ.
        let p2_s = oracle_simpson(|s| (s - tp) * spec.eval_m(s), tp, support_end, panels);
        // Φ2 needs P1 along the way: cumulative composite Simpson from the
        // right on the panel half-grid, then Simpson of the square.
        let hh = (support_end - tp) / (2 * panels) as f64;
        let f: Vec<f64> = (0..=2 * panels).map(|j| spec.eval_m(tp + j as f64 * hh)).collect();
        let mut cum = vec![0.0_f64; 2 * panels + 1];
        cum[2 * panels - 1] = oracle_simpson(
            |s| spec.eval_m(s),
            tp + (2 * panels - 1) as f64 * hh,
            support_end,
            64,
        );
        for j in (0..=2 * panels - 2).rev() {
            cum[j] = cum[j + 2] + hh / 3.0 * (f[j] + 4.0 * f[j + 1] + f[j + 2]);
        }
        let mut phi_s = 0.0_f64;
        for p in 0..panels {
            let j = 2 * p;
            phi_s += hh / 3.0
                * (cum[j] * cum[j] + 4.0 * cum[j + 1] * cum[j + 1] + cum[j + 2] * cum[j + 2]);
        }
        d1 = d1.max((table.p1.values().unwrap()[i] - p1_s).abs());
        d2 = d2.max((table.p2.values().unwrap()[i] - p2_s).abs());
        dphi = dphi.max((table.phi2.values().unwrap()[i] - phi_s).abs());
    }
    let tails_pass = d1 <= 1e-7 && d2 <= 1e-7 && dphi <= 1e-7;

    // --- Adaptive mode integration vs fixed-step RK4 at one-tenth step.
    let lab = &*EXAMPLE;
    let zone = ZoneConfig::from_series(-2.0, &lab.series).unwrap();
    let t_end = 40.0;
    let xi = 1.0;
    let r = simulate_mode(&lab.spec, &lab.series, &zone, xi, one(), t_end, 1e-10).unwrap();
    let h10 = TAU / (200.0 * lab.spec.max_rate(t_end).max(xi));
    let rhs = |t: f64, y: [Complex64; 2]| {
        [y[1], -(xi * xi + lab.spec.eval_m(t)) * y[0]]
    };
    let mut y = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let mut t = 0.0_f64;
    let mut ode_worst = 0.0_f64;
    for s in &r.samples {
        let n = ((s.t - t) / h10).ceil().max(1.0) as usize;
        let h = (s.t - t) / n as f64;
        for _ in 0..n {
            let k1 = rhs(t, y);
            let k2 = rhs(t + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = rhs(t + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = rhs(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            y = [
                y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            t += h;
        }
        t = s.t;
        let state = kglab_core::ModeState { xi, u: y[0], ut: y[1] };
        let reference = e_mod(&state, lab.series.eval_b_extended(s.t));
        ode_worst = ode_worst.max((s.e_mod - reference).abs() / reference);
    }
    let ode_pass = ode_worst <= 1e-6;

    verdict(
        10,
        "oracle-equivalence",
        tails_pass && ode_pass,
        &format!(
            "Simpson 10^6 panels: |ΔP1| {d1:.2e}, |ΔP2| {d2:.2e}, |ΔΦ2| {dphi:.2e} (cap 1e-7); RK4 one-tenth step: max e_mod rel diff {ode_worst:.2e} (cap 1e-6)"
        ),
    );
}
