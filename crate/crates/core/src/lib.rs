//! Numerical laboratory for the Klein-Gordon mode equation
//! û″ + (|ξ|² + M(t))û = 0 with a decaying, possibly sign-indefinite
//! time-dependent potential M(t).
//!
//! The library is organised around the gauge transformation b(t) that turns
//! the mode equation into a damped first-order system: b solves the Riccati
//! equation b′ + b² + M = 0 and is constructed as a series of iterated tail
//! integrals of M.  Everything else — decay-condition verdicts, start-time
//! selection, mode integration, and the energy comparisons between the
//! Klein-Gordon energy and its gauged counterpart — is built on top of that
//! series.
//!
//! Module map:
//!
//! * [`potential`] — potential families M(t) and their closed-form tails;
//! * [`oscillate`] — exact calculus for sums of trig-power terms, the
//!   oscillatory tail integral J, and absolute-value tail profiles;
//! * [`tails`] — time grids, the generic tail integrator, and the table of
//!   iterated tails (P1, P2, Φ2, Ψ3, |P2| profiles);
//! * [`conditions`] — decay/admissibility condition verdicts with fitted
//!   exponents;
//! * [`gauge`] — the Riccati series b, its bounds, start-time selection,
//!   residual certification, and the clock-change diagnostics;
//! * [`modes`] — mode integration, energies, zone classification, and
//!   frequency sweeps;
//! * [`math`] — shared numerics (quadrature, interpolation, fits);
//! * [`error`] — the crate-wide error type.

pub mod conditions;
pub mod error;
pub mod gauge;
pub mod math;
pub mod modes;
pub mod oscillate;
pub mod potential;
pub mod tails;

pub use conditions::{
    check_m1, check_m2, check_m3, check_relation, check_sup, fit_exponent, full_report,
    ConditionEntry, ConditionParams, ConditionReport, Overall, Verdict,
};
pub use error::{Error, Result};
pub use gauge::{
    a_eta_diagnostic, build_gauge, eval_gauge, riccati_residual, select_start_time, theta_map,
    verify_series_bounds, AEta, BoundReport, GaugeSeries, StartTime, PHI_THRESHOLD, SIGMA,
};
pub use modes::{
    check_gmec, check_initial_segment, e_kg, e_mod, simulate_mode, sweep_modes, total_energy,
    w_amplitude, zone_boundary, zone_of, GmecCheck, InitialSegmentCheck, ModeResult, ModeSample,
    ModeState, RatioStats, Zone, ZoneConfig, GMEC_SLOPE_TOL, INITIAL_SEGMENT_SLACK,
};
pub use potential::{PotentialSpec, TabulatedPotential};
pub use tails::{build_tail_table, tail_integral, Column, TailTable, TimeGrid};
