//! Subcommand pipelines: build the requested objects, emit CSV artifacts and
//! a verdict log, and report pass/fail.
//!
//! Exit-code contract (enforced in `main`): 0 when every requested verdict
//! passes, 2 when a verdict fails (including mathematical verdicts such as
//! "no valid start time" or a divergent prerequisite), 1 for operational
//! errors (bad config, unreadable files).  Every asserted pass/fail line
//! carries the measured number it was decided on, and the same lines go to
//! stdout and to `verdict.txt`.
//!
//! All numeric CSV fields are printed with `{:.16e}`, which round-trips f64
//! exactly: re-running a subcommand with the same configuration reproduces
//! byte-identical artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use kglab_core::gauge::{build_gauge, riccati_residual, verify_series_bounds, BoundReport};
use kglab_core::math::fit_line;
use kglab_core::modes::{
    check_gmec, check_initial_segment, e_kg, sweep_modes, total_energy, ModeResult, ZoneConfig,
    GMEC_SLOPE_TOL,
};
use kglab_core::potential::PotentialSpec;
use kglab_core::tails::{build_tail_table, TailTable, TimeGrid};
use kglab_core::{a_eta_diagnostic, full_report, Error, GaugeSeries, Overall};
use num_complex::Complex64;

use crate::config::Scenario;

/// Tail tolerance for the shared iterated-tail table.
const TABLE_TOL: f64 = 1e-11;

/// Residual ceiling certifying the gauge solves its Riccati equation.
const RESIDUAL_SUP_MAX: f64 = 1e-6;

/// Ceiling on the aggregate two-sided conservation constant.
const GMEC_C_MAX: f64 = 10.0;

/// Probe count for the a–η gap diagnostic.
const AETA_PROBES: usize = 20;

/// Ceiling on the fitted slope of the weighted a–η gap.
const AETA_SLOPE_MAX: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Conditions,
    Gauge,
    Simulate,
    Verify,
    Report,
}

/// Accumulates verdict lines; every pass/fail records its measured numbers.
struct VerdictLog {
    lines: Vec<String>,
    all_pass: bool,
}

impl VerdictLog {
    fn new() -> Self {
        VerdictLog { lines: Vec::new(), all_pass: true }
    }

    fn info(&mut self, section: &str, detail: String) {
        let line = format!("[{section}] {detail}");
        println!("{line}");
        self.lines.push(line);
    }

    fn check(&mut self, section: &str, detail: String, pass: bool) {
        let line = format!("[{section}] {detail} -> {}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push(line);
        self.all_pass &= pass;
    }

    fn finish(mut self, out: &Path) -> Result<bool> {
        let overall = format!("overall: {}", if self.all_pass { "PASS" } else { "FAIL" });
        println!("{overall}");
        self.lines.push(overall);
        let mut text = self.lines.join("\n");
        text.push('\n');
        fs::write(out.join("verdict.txt"), text)
            .with_context(|| format!("cannot write {}", out.join("verdict.txt").display()))?;
        Ok(self.all_pass)
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv<I: IntoIterator<Item = String>>(path: &Path, header: &str, rows: I) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Run one subcommand end to end; `Ok(true)` means all verdicts passed.
pub fn run(cmd: Subcommand, scenario: &Scenario, out_dir: &Path) -> Result<bool> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let spec = scenario.build_potential()?;
    let grid = TimeGrid::log_spaced(scenario.grid.t_min, scenario.grid.t_max, scenario.grid.points)?;
    let table = build_tail_table(&spec, &grid, TABLE_TOL)?;
    let mut log = VerdictLog::new();
    log.info(
        "scenario",
        format!(
            "potential {}({}), grid [{}, {}] x {}",
            scenario.potential.kind,
            scenario
                .potential
                .params
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(", "),
            scenario.grid.t_min,
            scenario.grid.t_max,
            scenario.grid.points
        ),
    );

    let want_conditions = matches!(cmd, Subcommand::Conditions | Subcommand::Verify | Subcommand::Report);
    let want_gauge = matches!(
        cmd,
        Subcommand::Gauge | Subcommand::Simulate | Subcommand::Verify | Subcommand::Report
    );
    let want_sweep = matches!(cmd, Subcommand::Simulate | Subcommand::Verify | Subcommand::Report);

    if want_conditions {
        run_conditions(scenario, &spec, &table, out_dir, &mut log)?;
    }

    let mut series: Option<GaugeSeries> = None;
    if want_gauge {
        series = run_gauge(scenario, &spec, &table, &grid, out_dir, &mut log)?;
    }

    if want_sweep {
        if let Some(series) = series.as_ref() {
            run_sweep(scenario, &spec, series, out_dir, &mut log)?;
            if matches!(cmd, Subcommand::Verify | Subcommand::Report) {
                run_aeta(scenario, series, out_dir, &mut log)?;
            }
        } else {
            log.check("sweep", "skipped: no gauge series available".into(), false);
        }
    }

    let pass = log.finish(out_dir)?;
    if matches!(cmd, Subcommand::Report) {
        write_report(scenario, out_dir, pass)?;
    }
    Ok(pass)
}

fn run_conditions(
    scenario: &Scenario,
    spec: &PotentialSpec,
    table: &TailTable,
    out: &Path,
    log: &mut VerdictLog,
) -> Result<()> {
    let params = scenario.condition_params()?;
    let report = full_report(spec, table, &params);

    write_tails_csv(table, &out.join("tails.csv"))?;
    write_csv(
        &out.join("conditions.csv"),
        "condition,exponent_demanded,exponent_fitted,r2,bound_constant,verdict",
        report.entries.iter().map(|e| {
            format!(
                "{},{},{},{},{},{}",
                e.name,
                fmt_f(e.demanded_exponent),
                fmt_f(e.fitted_exponent),
                fmt_f(e.fit_r2),
                fmt_f(e.bound_constant),
                e.verdict
            )
        }),
    )?;

    for e in &report.entries {
        log.check(
            "conditions",
            format!(
                "{}: demanded {:.3}, fitted {:.3} (r2 {:.3}, bound {:.3e}) {} — {}",
                e.name, e.demanded_exponent, e.fitted_exponent, e.fit_r2, e.bound_constant,
                e.verdict, e.detail
            ),
            e.verdict.is_satisfied(),
        );
    }
    log.check(
        "conditions",
        format!("overall: {}", report.overall),
        matches!(report.overall, Overall::Admissible),
    );
    Ok(())
}

fn write_tails_csv(table: &TailTable, path: &Path) -> Result<()> {
    let nodes = table.grid.nodes();
    let col = |c: &kglab_core::Column, i: usize| -> (f64, f64) {
        match (c.values(), c.errs()) {
            (Some(v), Some(e)) => (v[i], e[i]),
            _ => (f64::NAN, f64::NAN),
        }
    };
    write_csv(
        path,
        "t,p1,p2,phi2,psi3,abs_p2_head,abs_p2_tail,err_p1,err_p2,err_phi2,err_psi3",
        (0..nodes.len()).map(|i| {
            let (p1, e1) = col(&table.p1, i);
            let (p2, e2) = col(&table.p2, i);
            let (phi2, e3) = col(&table.phi2, i);
            let (psi3, e4) = col(&table.psi3, i);
            let (h, _) = col(&table.abs_p2_head, i);
            let (tl, _) = col(&table.abs_p2_tail, i);
            format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                fmt_f(nodes[i]),
                fmt_f(p1),
                fmt_f(p2),
                fmt_f(phi2),
                fmt_f(psi3),
                fmt_f(h),
                fmt_f(tl),
                fmt_f(e1),
                fmt_f(e2),
                fmt_f(e3),
                fmt_f(e4)
            )
        }),
    )
}

fn run_gauge(
    scenario: &Scenario,
    spec: &PotentialSpec,
    table: &TailTable,
    grid: &TimeGrid,
    out: &Path,
    log: &mut VerdictLog,
) -> Result<Option<GaugeSeries>> {
    let start = scenario.start_time()?;
    let series = match build_gauge(spec, table, grid, scenario.gauge.tol, scenario.gauge.k_max, start)
    {
        Ok(s) => s,
        Err(e) if e.is_verdict() => {
            // A determinate negative result: report it verbatim as a failed
            // verdict rather than an operational error.
            log.check("gauge", format!("construction: {e}"), false);
            return Ok(None);
        }
        Err(e) => return Err(e.into()),
    };

    let bounds = verify_series_bounds(&series);
    write_gauge_csvs(&series, out)?;
    write_bound_report(&bounds, &series, &out.join("gauge_report.txt"))?;

    log.info(
        "gauge",
        format!(
            "chain {}, T = {:.6e}, K = {}, tail estimate {:.3e}, error budget {:.3e}",
            series.chain_name(),
            series.t_start,
            series.k_used,
            series.tail_estimate,
            series.err_budget
        ),
    );
    log.check(
        "gauge",
        format!("start-time thresholds at T = {:.6e}: valid_start = {}", series.t_start, bounds.valid_start),
        bounds.valid_start,
    );
    log.check(
        "gauge",
        format!(
            "residual sup |b' + b^2 + M| = {:.3e} (ceiling {RESIDUAL_SUP_MAX:.1e})",
            series.residual_sup
        ),
        series.residual_sup <= RESIDUAL_SUP_MAX,
    );
    let majorant_max = bounds.majorant_ratios.iter().cloned().fold(0.0_f64, f64::max);
    log.check(
        "lemma",
        format!(
            "per-order majorant |Q_k| <= 4^(k-1)(-Q_2) phi^((k-2)/2): max sup ratio {majorant_max:.3} over k = 2..={}",
            series.k_used
        ),
        bounds.majorant_pass,
    );
    log.check(
        "lemma",
        format!("series sum bound sum|Q_k| <= 1.5|Q_2|: sup ratio {:.3}", bounds.sum_ratio),
        bounds.sum_pass.unwrap_or(false),
    );
    log.check(
        "lemma",
        format!("gauge split |b| <= |Q_1| + 1.5|Q_2|: sup ratio {:.3}", bounds.split_ratio),
        bounds.split_pass.unwrap_or(false),
    );
    log.check(
        "lemma",
        format!("-Q_2 >= 0 across the grid: {}", bounds.q2_nonpositive),
        bounds.q2_nonpositive,
    );
    let decay = format!(
        "decay sups: b0 = {}, b1 = {:.6e} (weight gamma = {}), b2 = {:.6e} (weight 2 beta = {})",
        bounds.b0.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "unavailable".into()),
        series.b1,
        series.weights.0,
        series.b2,
        series.weights.1
    );
    log.check("lemma", decay, series.b1.is_finite() && series.b2.is_finite());
    Ok(Some(series))
}

fn write_gauge_csvs(series: &GaugeSeries, out: &Path) -> Result<()> {
    let nodes = series.grid.nodes();
    let q2 = (series.k_used >= 2).then(|| &series.q_cap_tables[1]);
    let phi = series.phi.values();
    write_csv(
        &out.join("gauge.csv"),
        "t,b,b_prime,residual,Q2,phi",
        (0..nodes.len()).map(|i| {
            let t = nodes[i];
            let b = series.b[i];
            // b' from the equation the series solves; the residual column
            // reports how far a finite-difference b' deviates from it.
            let b_prime = -b * b - series.spec().eval_m(t);
            let res = riccati_residual(series, t);
            format!(
                "{},{},{},{},{},{}",
                fmt_f(t),
                fmt_f(b),
                fmt_f(b_prime),
                fmt_f(res),
                fmt_f(q2.map_or(f64::NAN, |q| q[i])),
                fmt_f(phi.map_or(f64::NAN, |p| p[i]))
            )
        }),
    )?;
    let mut rows = Vec::with_capacity(series.k_used * nodes.len());
    for k in 1..=series.k_used {
        let qk = &series.q_tables[k - 1];
        let capk = &series.q_cap_tables[k - 1];
        for i in 0..nodes.len() {
            rows.push(format!("{},{},{},{}", k, fmt_f(nodes[i]), fmt_f(qk[i]), fmt_f(capk[i])));
        }
    }
    write_csv(&out.join("gauge_qk.csv"), "k,t,q_k,Q_k", rows)
}

fn write_bound_report(bounds: &BoundReport, series: &GaugeSeries, path: &Path) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "start time T          = {:.16e}", bounds.t_start);
    let _ = writeln!(text, "orders kept K         = {}", bounds.k_used);
    let _ = writeln!(text, "valid start           = {}", bounds.valid_start);
    let _ = writeln!(text, "error budget eps      = {:.16e}", bounds.eps_budget);
    let _ = writeln!(text, "residual sup          = {:.16e}", series.residual_sup);
    let _ = writeln!(text, "tail estimate         = {:.16e}", series.tail_estimate);
    let _ = writeln!(text, "Q2 nonpositive        = {}", bounds.q2_nonpositive);
    let _ = writeln!(text, "phi monotone          = {:?}", bounds.phi_monotone);
    let _ = writeln!(text, "majorant pass         = {}", bounds.majorant_pass);
    for (k, r) in bounds.majorant_ratios.iter().enumerate() {
        let _ = writeln!(text, "  sup ratio k={:<2}      = {:.16e}", k + 2, r);
    }
    let _ = writeln!(text, "sum ratio             = {:.16e}", bounds.sum_ratio);
    let _ = writeln!(text, "sum pass              = {:?}", bounds.sum_pass);
    let _ = writeln!(text, "higher-order ratio    = {:?}", bounds.higher_order_ratio);
    let _ = writeln!(text, "split ratio           = {:.16e}", bounds.split_ratio);
    let _ = writeln!(text, "split pass            = {:?}", bounds.split_pass);
    let _ = writeln!(text, "sup |Q1|              = {:.16e}", bounds.q1_sup);
    let _ = writeln!(text, "sup |Q2|              = {:.16e}", bounds.q2_sup);
    let _ = writeln!(text, "b0 (sup |int b|)      = {:?}", bounds.b0);
    let _ = writeln!(text, "b1 (sup |b| weight)   = {:.16e}", series.b1);
    let _ = writeln!(text, "b2 (sup |b'| weight)  = {:.16e}", series.b2);
    let _ = writeln!(text, "decay weights (g, 2b) = {:?}", series.weights);
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn run_sweep(
    scenario: &Scenario,
    spec: &PotentialSpec,
    series: &GaugeSeries,
    out: &Path,
    log: &mut VerdictLog,
) -> Result<()> {
    let alpha = scenario.conditions.alpha;
    let zone = match scenario.zone.n_policy.as_str() {
        "auto" => ZoneConfig::from_series(alpha, series)?,
        _ => ZoneConfig::new(alpha, scenario.zone.n, series.t_start)?,
    };
    log.info(
        "zone",
        format!("weight (1+t)^{} |xi| against N = {:.6e}, from T = {:.6e}", zone.alpha, zone.n, zone.t),
    );

    let xi_grid = scenario.xi_grid()?;
    let ic = (
        Complex64::new(scenario.sweep.ic[0], 0.0),
        Complex64::new(scenario.sweep.ic[1], 0.0),
    );
    let outcomes = sweep_modes(
        spec,
        series,
        &zone,
        &xi_grid,
        ic,
        scenario.sweep.t_end,
        scenario.sweep.ode_tol,
    );

    let mut results: Vec<ModeResult> = Vec::with_capacity(outcomes.len());
    for (xi, outcome) in xi_grid.iter().zip(outcomes) {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) if e.is_verdict() || matches!(e, Error::StepUnderflow { .. }) => {
                log.check("sweep", format!("xi = {xi:.6e}: {e}"), false);
            }
            Err(e) => return Err(e.into()),
        }
    }

    write_modes_csv(&results, &out.join("modes.csv"))?;

    let t_anchor = series.t_start;
    let mut summary_rows = Vec::with_capacity(results.len());
    let mut aggregate_c = 0.0_f64;
    let mut worst_slope = 0.0_f64;
    let mut all_gmec = !results.is_empty();
    let mut k0_max: f64 = 0.0;
    let mut k0_bound = f64::INFINITY;
    let mut all_k0 = true;
    let mut c_prime = 0.0_f64;
    for r in &results {
        let gmec = match check_gmec(r, t_anchor) {
            Ok(g) => g,
            Err(e) => {
                log.check("gmec", format!("xi = {:.6e}: {e}", r.xi), false);
                all_gmec = false;
                summary_rows.push(format!(
                    "{},{},{},{},fail",
                    fmt_f(r.xi),
                    fmt_f(f64::NAN),
                    fmt_f(f64::NAN),
                    fmt_f(f64::NAN)
                ));
                continue;
            }
        };
        summary_rows.push(format!(
            "{},{},{},{},{}",
            fmt_f(r.xi),
            fmt_f(gmec.ratio.min),
            fmt_f(gmec.ratio.max),
            fmt_f(gmec.ratio.slope),
            if gmec.pass { "pass" } else { "fail" }
        ));
        all_gmec &= gmec.pass;
        aggregate_c = aggregate_c.max(gmec.constant).max(1.0 / gmec.ratio.min);
        worst_slope = worst_slope.max(gmec.ratio.slope.abs());

        let seg = check_initial_segment(r, spec, t_anchor)?;
        k0_max = k0_max.max(seg.k0);
        k0_bound = seg.bound;
        all_k0 &= seg.pass;

        let e_kg1_0 = e_kg(&r.samples[0].state, 1.0);
        let e_mod_sup = r.samples.iter().map(|s| s.e_mod).fold(0.0_f64, f64::max);
        c_prime = c_prime.max(e_mod_sup / e_kg1_0);
    }
    write_csv(
        &out.join("sweep_summary.csv"),
        "xi,ratio_min,ratio_max,slope,verdict",
        summary_rows,
    )?;

    log.check(
        "gmec",
        format!(
            "{} modes: per-mode |log-log slope| max {worst_slope:.4} (ceiling {GMEC_SLOPE_TOL})",
            results.len()
        ),
        all_gmec,
    );
    log.check(
        "gmec",
        format!("aggregate two-sided constant C = {aggregate_c:.4} (ceiling {GMEC_C_MAX})"),
        aggregate_c.is_finite() && aggregate_c <= GMEC_C_MAX,
    );
    log.check(
        "initial-segment",
        format!(
            "K0 max {k0_max:.6} <= exp(T sup|1-M|) = {k0_bound:.6} with slack {}",
            kglab_core::modes::INITIAL_SEGMENT_SLACK
        ),
        all_k0,
    );
    log.check(
        "eq-thm",
        format!("modified energy vs initial data: C' = {c_prime:.6e}"),
        c_prime.is_finite(),
    );

    // Aggregate weighted energy at the anchor and at the end (trapezoid in xi).
    if results.len() == xi_grid.len() && !results.is_empty() {
        let weights: Vec<f64> =
            results.iter().map(|r| scenario.weight_of(r.xi)).collect::<Result<_>>()?;
        let at_anchor = total_energy(&results, &weights, t_anchor)?;
        let at_end = total_energy(&results, &weights, scenario.sweep.t_end)?;
        log.info(
            "aggregate",
            format!(
                "weighted total energy: {:.6e} at T, {:.6e} at t_end (ratio {:.4})",
                at_anchor,
                at_end,
                at_end / at_anchor
            ),
        );
    }
    Ok(())
}

fn write_modes_csv(results: &[ModeResult], path: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for r in results {
        for s in &r.samples {
            rows.push(format!(
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_f(r.xi),
                fmt_f(s.t),
                fmt_f(s.state.u.re),
                fmt_f(s.state.u.im),
                fmt_f(s.state.ut.re),
                fmt_f(s.state.ut.im),
                fmt_f(s.e_kg1),
                fmt_f(s.e_mod),
                fmt_f(s.w_amp2),
                s.zone
            ));
        }
    }
    write_csv(path, "xi,t,re_u,im_u,re_ut,im_ut,e_kg1,e_mod,w_amp2,zone", rows)
}

fn run_aeta(
    scenario: &Scenario,
    series: &GaugeSeries,
    out: &Path,
    log: &mut VerdictLog,
) -> Result<()> {
    let t_lo = series.t_start;
    let t_hi = scenario.sweep.t_end.min(series.grid.last());
    if !(t_hi > t_lo) {
        log.info("a-eta", "skipped: no range beyond the start time".into());
        return Ok(());
    }
    // Weight (1+t)^{-alpha} mirrors the zone weight: for decaying weights
    // (alpha < 0) the gap must shrink at least that fast.
    let wexp = -scenario.conditions.alpha;
    let horizon = match a_eta_diagnostic(series, t_hi) {
        Ok(a) => a,
        Err(e) if e.is_verdict() => {
            log.check("a-eta", format!("diagnostic: {e}"), false);
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    let mut rows = Vec::with_capacity(AETA_PROBES);
    let mut ts = Vec::new();
    let mut weighted = Vec::new();
    for i in 0..AETA_PROBES {
        let t = (1.0 + t_lo)
            * ((1.0 + t_hi) / (1.0 + t_lo)).powf(i as f64 / (AETA_PROBES - 1) as f64)
            - 1.0;
        let d = match a_eta_diagnostic(series, t) {
            Ok(d) => d,
            Err(e) if e.is_verdict() => {
                log.check("a-eta", format!("diagnostic at t = {t:.3e}: {e}"), false);
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        // Remaining gap mass from theta(t) on: analytic tail when certified,
        // otherwise the horizon difference of the head integrals.
        let gap = d.gap_tail.unwrap_or_else(|| (horizon.gap_head - d.gap_head).max(0.0));
        let w = gap * (1.0 + t).powf(wexp);
        rows.push(format!(
            "{},{},{},{},{}",
            fmt_f(t),
            fmt_f(d.a),
            fmt_f(d.eta),
            fmt_f(gap),
            fmt_f(w)
        ));
        ts.push(t);
        weighted.push(w);
    }
    write_csv(&out.join("aeta.csv"), "t,a,eta,gap,weighted_gap", rows)?;

    let w_max = weighted.iter().cloned().fold(0.0_f64, f64::max);
    if w_max <= 1e-12 {
        log.check(
            "a-eta",
            format!("weighted gap identically negligible (max {w_max:.3e})"),
            true,
        );
        return Ok(());
    }
    let xs: Vec<f64> = ts.iter().map(|&t| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = weighted.iter().map(|&w| w.max(1e-300).ln()).collect();
    let fit = fit_line(&xs, &ys)?;
    log.check(
        "a-eta",
        format!(
            "weighted gap (1+t)^{wexp} sup {w_max:.6e}, fitted slope {:.4} (ceiling {AETA_SLOPE_MAX})",
            fit.slope
        ),
        w_max.is_finite() && fit.slope <= AETA_SLOPE_MAX,
    );
    Ok(())
}

fn write_report(scenario: &Scenario, out: &Path, pass: bool) -> Result<()> {
    let verdicts = fs::read_to_string(out.join("verdict.txt")).unwrap_or_default();
    let mut text = String::new();
    let _ = writeln!(text, "# Mode laboratory report");
    let _ = writeln!(text);
    let _ = writeln!(
        text,
        "Potential: {} ({:?})",
        scenario.potential.kind, scenario.potential.params
    );
    let _ = writeln!(
        text,
        "Grid: [{}, {}] with {} nodes; condition exponents (alpha, beta, gamma) = ({}, {}, {})",
        scenario.grid.t_min,
        scenario.grid.t_max,
        scenario.grid.points,
        scenario.conditions.alpha,
        scenario.conditions.beta,
        scenario.conditions.gamma
    );
    let _ = writeln!(
        text,
        "Sweep: {} modes, xi in [{}, {}], t_end = {}, ode_tol = {}",
        scenario.sweep.xi_points,
        scenario.sweep.xi_min,
        scenario.sweep.xi_max,
        scenario.sweep.t_end,
        scenario.sweep.ode_tol
    );
    let _ = writeln!(text);
    let _ = writeln!(text, "Outcome: {}", if pass { "all verdicts pass" } else { "verdict failure" });
    let _ = writeln!(text);
    let _ = writeln!(text, "## Verdicts");
    let _ = writeln!(text);
    text.push_str(&verdicts);
    let _ = writeln!(text);
    let _ = writeln!(text, "## Artifacts");
    let _ = writeln!(text);
    for name in [
        "tails.csv",
        "conditions.csv",
        "gauge.csv",
        "gauge_qk.csv",
        "gauge_report.txt",
        "modes.csv",
        "sweep_summary.csv",
        "aeta.csv",
        "verdict.txt",
    ] {
        if out.join(name).exists() {
            let _ = writeln!(text, "- {name}");
        }
    }
    fs::write(out.join("report.txt"), text)
        .with_context(|| format!("cannot write {}", out.join("report.txt").display()))?;
    Ok(())
}
