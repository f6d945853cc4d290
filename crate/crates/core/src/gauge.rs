//! Construction of the decaying gauge b(t) solving the scalar Riccati
//! equation b′ + b² + M = 0 as a series of iterated tail integrals, plus the
//! diagnostics that certify it: a finite-difference residual, geometric
//! series bounds, the clock change θ, and the (a, η) comparison functions.
//!
//! # Series construction
//!
//! With q₁ = M and
//!
//! ```text
//!   q_k(t) = Σ_{j=1}^{k−1} Q_j(t) Q_{k−j}(t),      Q_k(t) = −∫_t^∞ q_k(s) ds,
//! ```
//!
//! term-by-term differentiation gives (Σ Q_k)′ = q₁ + Σ_{k≥2} q_k =
//! M + (Σ Q_k)², so B = Σ_k Q_k solves B′ = M + B² and b = σ·B with σ = −1
//! solves b′ + b² + M = 0.  The sign is fixed once ([`SIGMA`]); the
//! finite-difference residual [`riccati_residual`] would expose a wrong
//! choice immediately, and the tests rely on exactly that.
//!
//! Writing P1(t) = ∫_t^∞ M for the first tail, the leading orders are
//! Q₁ = −P1 and Q₂ = −∫_t^∞ P1² ≤ 0, and φ(t) = −∫_t^∞ Q₂ is exactly the
//! doubly iterated tail Ψ3 of the tails module.
//!
//! # Start time and majorant
//!
//! The start time T is the smallest grid node with
//!
//! ```text
//!   |∫_t^∞ Q₁(s) ds| = |P2(t)| ≤ 1     and     φ(t) ≤ 1/6⁴,
//! ```
//!
//! see [`PHI_THRESHOLD`].  Under these thresholds the orders obey the
//! geometric majorant |Q_k(t)| ≤ 4^{k−1}·(−Q₂(t))·φ(t)^{(k−2)/2} for k ≥ 2,
//! so the truncation error is controlled by the first omitted majorant term:
//! construction stops at the first K with 4^{K−1}|Q₂(T)|φ(T)^{(K−2)/2} < tol
//! (ratio between consecutive majorant terms: 4√φ(T) ≤ 4/36).  When φ is not
//! available — it can diverge even when every Q_k exists, as for the
//! borderline power potential μ²(1+t)^{−2} — an empirical geometric stop on
//! the measured sup|Q_k| is used instead.
//!
//! # Evaluation chains
//!
//! Three interchangeable strategies sit behind one interface, picked per
//! potential:
//!
//! * **symbolic oscillatory** — every q_k and Q_k is an explicit trig-power
//!   sum; tails are integrated by parts symbolically
//!   ([`OscSum::tail_expansion`]) with rigorously tracked remainder
//!   envelopes.  Chosen when the potential has a single trig-power phase
//!   family and the phase at T is fast enough for the expansions to dig
//!   below the pruning floor.
//! * **power series** — for pure-power potentials the recursion stays inside
//!   closed-form power sums (tails via [`OscSum::tail_fn`]), exact to
//!   rounding.
//! * **numeric** — products are formed on a 2× refined grid, tails by
//!   node-to-node quadrature of the interpolated products, and b is a
//!   monotone-cubic interpolant.  Used for tabulated data.
//!
//! In every chain b′ is evaluated through the Riccati identity
//! b′ = −b² − M, never by differentiating an interpolant; the residual check
//! deliberately does the opposite (Richardson-extrapolated centered
//! differences of b) so the two derivative routes are independent.
//!
//! # Clock change and comparison functions
//!
//! θ(t) = ∫_T^t exp(−2∫_T^s b) ds is strictly increasing and satisfies
//! e^{−2b₀}(t−T) ≤ θ(t) ≤ e^{2b₀}(t−T) whenever |∫ b| stays within b₀ on the
//! range.  The comparison functions at τ = θ(t) are
//!
//! ```text
//!   a = exp(2 ∫_T^t b),        η = a · exp(2 P2(t)),
//! ```
//!
//! η collects the order-one tail mass 2∫_T^∞ Q₁ plus the higher-order part
//! of 2∫_T^t b, which is what the product form above amounts to.  The
//! θ-weighted gap between them reduces, by the change of variables θ′ = 1/a,
//! to a plain time integral:
//!
//! ```text
//!   ∫_{θ(t₁)}^{θ(t₂)} |a − η| dτ  =  ∫_{t₁}^{t₂} |expm1(2 P2(s))| ds,
//! ```
//!
//! which is how [`a_eta_diagnostic`] computes its head and tail gaps.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::math::{adaptive_integral, fast_pow, fit_power_law, gk15, MonotoneCubic, SplitMix64};
use crate::oscillate::{integrate_abs_smooth, Oscillation, OscSum};
use crate::potential::PotentialSpec;
use crate::tails::{p2_far_field, Column, TailTable, TimeGrid};

/// Sign convention in b = σ·Σ_k Q_k.  Direct substitution shows Σ Q_k solves
/// B′ = M + B², so σ = −1 is the choice that solves b′ + b² + M = 0.
pub const SIGMA: f64 = -1.0;

/// Start-time threshold on φ: 1/6⁴.
pub const PHI_THRESHOLD: f64 = 1.0 / 1296.0;

/// Phase at T below which the symbolic-oscillatory chain is not attempted
/// (the by-parts expansions would stop before reaching the pruning floor).
const MIN_PHASE_EXACT: f64 = 40.0;

/// Residual sups are measured on [T, min(grid end, this)].
const RESIDUAL_PROBE_END: f64 = 1.0e3;

/// How the start time is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartTime {
    /// Scan the tail table for the smallest admissible grid node.
    Auto,
    /// Force the given start time (used to study series that fail the
    /// admissibility thresholds, e.g. closed-form borderline potentials).
    Fixed(f64),
}

// ---------------------------------------------------------------------------
// Error envelopes
// ---------------------------------------------------------------------------

/// Decaying error envelope |e(t)| ≤ coef·(1+t)^pow, valid on t ≥ T for the
/// build it belongs to.  Combination anchors mixed exponents at a base time,
/// which is exact there and conservative beyond it.
#[derive(Debug, Clone, Copy)]
struct Env {
    coef: f64,
    pow: f64,
}

impl Env {
    const ZERO: Env = Env { coef: 0.0, pow: f64::NEG_INFINITY };

    fn new(coef: f64, pow: f64) -> Env {
        Env { coef, pow }
    }

    /// Envelope of terms dropped at `t_ref`: prune reports their mass at
    /// `t_ref` and slowest exponent, i.e. mass·((1+t)/(1+t_ref))^pow.
    fn from_dropped(mass: f64, pow: f64, t_ref: f64) -> Env {
        if mass == 0.0 {
            return Env::ZERO;
        }
        Env { coef: mass * fast_pow(1.0 + t_ref, -pow), pow }
    }

    fn at(self, t: f64) -> f64 {
        if self.coef == 0.0 {
            0.0
        } else {
            self.coef * fast_pow(1.0 + t, self.pow)
        }
    }

    /// Sum of envelopes, re-anchored at `base` on the slower exponent.
    fn add(self, other: Env, base: f64) -> Env {
        if self.coef == 0.0 {
            return other;
        }
        if other.coef == 0.0 {
            return self;
        }
        let pow = self.pow.max(other.pow);
        Env {
            coef: self.coef * fast_pow(1.0 + base, self.pow - pow)
                + other.coef * fast_pow(1.0 + base, other.pow - pow),
            pow,
        }
    }

    fn mul(self, other: Env) -> Env {
        if self.coef == 0.0 || other.coef == 0.0 {
            return Env::ZERO;
        }
        Env { coef: self.coef * other.coef, pow: self.pow + other.pow }
    }

    /// Envelope of ∫_t^∞ of this envelope; infinite when it does not decay
    /// fast enough to integrate.
    fn tail(self) -> Env {
        if self.coef == 0.0 {
            return Env::ZERO;
        }
        if self.pow >= -1.0 {
            return Env { coef: f64::INFINITY, pow: 0.0 };
        }
        Env { coef: self.coef / (-self.pow - 1.0), pow: self.pow + 1.0 }
    }
}

fn env_of(sum: &OscSum) -> Env {
    let (coef, pow) = sum.envelope();
    Env { coef, pow }
}

// ---------------------------------------------------------------------------
// Evaluation chains
// ---------------------------------------------------------------------------

type ValFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Chain-specific machinery for evaluating b, ∫ b over ranges, and ∫_t^∞ b.
#[derive(Clone)]
enum ChainEval {
    /// Fully symbolic trig-power sums (single phase family).
    Exact {
        b_sum: OscSum,
        /// Pure-power part of `b_sum` (closed head integrals).
        b_pow: OscSum,
        /// Symbolic ∫_t^∞ of the oscillatory part of `b_sum`.
        b_osc_tail: OscSum,
        /// Symbolic ∫_t^∞ of the power part, when it converges.
        b_pow_tail: Option<OscSum>,
    },
    /// Closed-form pure-power sums.
    PurePower {
        b_sum: OscSum,
        b_tail: Option<OscSum>,
    },
    /// Interpolated columns on the refined grid.
    Numeric {
        b: MonotoneCubic,
        /// ∫_T^s b at refined nodes (monotone-cubic in s).
        cum_b: MonotoneCubic,
        /// ∫_s^∞ b at refined nodes, when certifiable.
        int_b: Option<MonotoneCubic>,
    },
}

impl ChainEval {
    fn name(&self) -> &'static str {
        match self {
            ChainEval::Exact { .. } => "symbolic-oscillatory",
            ChainEval::PurePower { .. } => "power-series",
            ChainEval::Numeric { .. } => "numeric",
        }
    }

    fn eval_b(&self, t: f64) -> f64 {
        match self {
            ChainEval::Exact { b_sum, .. } => b_sum.eval(t),
            ChainEval::PurePower { b_sum, .. } => b_sum.eval(t),
            ChainEval::Numeric { b, .. } => b.eval(t),
        }
    }

    /// ∫_T^s b (the cumulative from the series start; exact chains use
    /// closed forms, the numeric chain its precomputed cumulative column).
    fn cum_from_start(&self, t_start: f64, s: f64) -> f64 {
        match self {
            ChainEval::Exact { b_pow, b_osc_tail, .. } => {
                let osc = b_osc_tail.eval(t_start) - b_osc_tail.eval(s);
                let pow = b_pow.head_integral(s).unwrap_or(0.0)
                    - b_pow.head_integral(t_start).unwrap_or(0.0);
                osc + pow
            }
            ChainEval::PurePower { b_sum, .. } => {
                b_sum.head_integral(s).unwrap_or(0.0)
                    - b_sum.head_integral(t_start).unwrap_or(0.0)
            }
            ChainEval::Numeric { cum_b, .. } => cum_b.eval(s),
        }
    }

    /// ∫_t^∞ b when it converges and is certifiable.
    fn tail_from(&self, t: f64) -> Result<f64> {
        match self {
            ChainEval::Exact { b_osc_tail, b_pow_tail, .. } => match b_pow_tail {
                Some(pt) => Ok(b_osc_tail.eval(t) + pt.eval(t)),
                None => Err(Error::Unavailable(
                    "tail integral of b does not converge (power part decays like (1+t)^{-1} \
                     or slower)"
                        .into(),
                )),
            },
            ChainEval::PurePower { b_tail, .. } => match b_tail {
                Some(bt) => Ok(bt.eval(t)),
                None => Err(Error::Unavailable(
                    "tail integral of b does not converge (power part decays like (1+t)^{-1} \
                     or slower)"
                        .into(),
                )),
            },
            ChainEval::Numeric { int_b, .. } => match int_b {
                Some(interp) => Ok(interp.eval(t)),
                None => Err(Error::Unavailable(
                    "tail integral of b beyond the grid end could not be certified".into(),
                )),
            },
        }
    }
}

/// Precomputed split of the clock-change integrand for the symbolic chain.
///
/// With c(s) = ∫_T^s b = [I(T) − I(s)] + [H(s) − H(T)] (I the oscillatory
/// tail of b, H the head integral of its power part),
///
/// ```text
///   exp(−2c(s)) = a0 · F(s) · exp(2 I(s)),    a0 = exp(−2 I(T)),
///   F(s) = exp(−2(H(s) − H(T))),
/// ```
///
/// F is smooth and cheap to integrate adaptively, while F·(exp(2I) − 1) is a
/// fast oscillation with a tiny decaying envelope whose cumulative integral
/// C(s) is precomputed once at half-wave boundaries.  Then
/// θ(t) = a0·(∫_T^t F + C(t)).
#[derive(Clone, Debug)]
struct ThetaSplit {
    a0: f64,
    corr: MonotoneCubic,
}

fn build_theta_split(
    eval: &ChainEval,
    spec: &PotentialSpec,
    t_start: f64,
) -> Option<ThetaSplit> {
    let (b_pow, b_osc_tail) = match eval {
        ChainEval::Exact { b_pow, b_osc_tail, .. } => (b_pow, b_osc_tail),
        _ => return None,
    };
    let osc = spec.oscillation()?;
    let a0 = (-2.0 * b_osc_tail.eval(t_start)).exp();
    let h_t = b_pow.head_integral(t_start).unwrap_or(0.0);
    let g = |s: f64| {
        let smooth = (-2.0 * (b_pow.head_integral(s).unwrap_or(0.0) - h_t)).exp();
        smooth * (2.0 * b_osc_tail.eval(s)).exp_m1()
    };
    let pi = std::f64::consts::PI;
    let mut nodes = vec![t_start];
    let mut vals = vec![0.0];
    let mut acc = 0.0;
    let mut lo = t_start;
    let mut k = (osc.phase(t_start) / pi).floor() + 1.0;
    let mut tiny_run = 0usize;
    for _ in 0..20_000 {
        let hi = osc.time_at_phase(k * pi);
        k += 1.0;
        if !(hi > lo) {
            continue;
        }
        let (v, _e) = gk15(g, lo, hi);
        acc += v;
        nodes.push(hi);
        vals.push(acc);
        lo = hi;
        if v.abs() < 1e-14 {
            tiny_run += 1;
            if tiny_run >= 4 {
                break;
            }
        } else {
            tiny_run = 0;
        }
    }
    // Beyond the last boundary the interpolant clamps to the settled C(∞).
    MonotoneCubic::new(nodes, vals).ok().map(|corr| ThetaSplit { a0, corr })
}

// ---------------------------------------------------------------------------
// Gap evaluation for the (a, η) diagnostic
// ---------------------------------------------------------------------------

/// Precomputed machinery for ∫ |expm1(2 P2)| head/tail columns.
#[derive(Clone)]
enum GapEval {
    /// P2 ≡ 0 on the range: both gaps vanish.
    Zero,
    /// Oscillatory profile with a certified far-field model (head and tail
    /// columns interpolated between grid nodes).
    Profile { head: MonotoneCubic, tail: MonotoneCubic },
    /// Cumulative head column; the total includes any contribution beyond
    /// the grid end when that is certifiable (`tail_ok`).
    Cumulative { head: MonotoneCubic, total: f64, tail_ok: bool },
    /// No certified evaluation strategy for this potential.
    Unavailable,
}

// ---------------------------------------------------------------------------
// The series object
// ---------------------------------------------------------------------------

/// A built Riccati-series gauge with its tables, measured constants, and the
/// private evaluation chain.
#[derive(Clone)]
pub struct GaugeSeries {
    /// Grid restricted to [T, grid end]; all tables below live on its nodes.
    pub grid: TimeGrid,
    /// Series start time T.
    pub t_start: f64,
    /// Sign convention in b = σ·Σ Q_k (always [`SIGMA`]).
    pub sigma: f64,
    /// Number of series orders kept (K).
    pub k_used: usize,
    /// q_k at the grid nodes, k = 1..=K (units 1/time²).
    pub q_tables: Vec<Vec<f64>>,
    /// Q_k at the grid nodes, k = 1..=K (units 1/time).
    pub q_cap_tables: Vec<Vec<f64>>,
    /// φ(t) = −∫_t^∞ Q₂ at the grid nodes (dimensionless), when available.
    pub phi: Column,
    /// Gauge values b = σ·Σ Q_k at the grid nodes (units 1/time).
    pub b: Vec<f64>,
    /// Bound on the dropped series tail Σ_{k>K} sup|Q_k|.
    pub tail_estimate: f64,
    /// Accumulated numerical error allowance on b (quadrature, pruning,
    /// by-parts remainders); the ε used by the bound checks.
    pub err_budget: f64,
    /// Measured sup of |b̃′ + b² + M| over [T, min(grid end, 10³)] with b̃′ a
    /// Richardson-extrapolated centered difference of b.
    pub residual_sup: f64,
    /// Measured sup |∫_t^∞ b| over the grid, when the tail converges.
    pub b0: Option<f64>,
    /// Measured sup |b(t)|·(1+t)^γ over the grid nodes.
    pub b1: f64,
    /// Measured sup |b′(t)|·(1+t)^{2β} over the grid nodes.
    pub b2: f64,
    /// The decay weights (γ, 2β) used for `b1`/`b2`.
    pub weights: (f64, f64),
    spec: PotentialSpec,
    eval: ChainEval,
    gap: GapEval,
    theta: Option<ThetaSplit>,
    p2_fn: Option<ValFn>,
    p2_at_start: Option<f64>,
}

impl std::fmt::Debug for GaugeSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaugeSeries")
            .field("t_start", &self.t_start)
            .field("k_used", &self.k_used)
            .field("sigma", &self.sigma)
            .field("chain", &self.eval.name())
            .field("tail_estimate", &self.tail_estimate)
            .field("err_budget", &self.err_budget)
            .field("residual_sup", &self.residual_sup)
            .field("b0", &self.b0)
            .field("b1", &self.b1)
            .field("b2", &self.b2)
            .field("nodes", &self.grid.len())
            .finish()
    }
}

impl GaugeSeries {
    /// The potential this gauge was built for.
    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    /// Which evaluation chain was selected
    /// (`"symbolic-oscillatory" | "power-series" | "numeric"`).
    pub fn chain_name(&self) -> &'static str {
        self.eval.name()
    }

    /// Gauge value at t (intended for t ≥ T; see [`eval_gauge`] for the
    /// domain-checked variant).
    pub fn eval_b(&self, t: f64) -> f64 {
        self.eval.eval_b(t)
    }

    /// Gauge value with the constant continuation b(t) = b(T) below the
    /// start time, which keeps b continuous with |b| non-increasing there.
    pub fn eval_b_extended(&self, t: f64) -> f64 {
        self.eval.eval_b(t.max(self.t_start))
    }

    /// ∫_lo^hi b for T ≤ lo ≤ hi.
    pub fn int_b_range(&self, lo: f64, hi: f64) -> Result<f64> {
        if lo < self.t_start || hi < lo {
            return Err(Error::Domain(format!(
                "b integral range [{lo:.6e}, {hi:.6e}] must sit inside [T, ∞) with T = {:.6e}",
                self.t_start
            )));
        }
        Ok(self.eval.cum_from_start(self.t_start, hi)
            - self.eval.cum_from_start(self.t_start, lo))
    }

    /// ∫_t^∞ b for t ≥ T, when the tail converges and is certifiable.
    pub fn int_b_tail(&self, t: f64) -> Result<f64> {
        if t < self.t_start {
            return Err(Error::Domain(format!(
                "tail integral requested at t = {t:.6e} below the start time {:.6e}",
                self.t_start
            )));
        }
        self.eval.tail_from(t)
    }
}

// ---------------------------------------------------------------------------
// Start-time selection
// ---------------------------------------------------------------------------

/// Smallest grid node t of the tail table with |P2(t)| ≤ 1 (the first-order
/// tail mass bound, since ∫_t^∞ Q₁ = −P2) and φ(t) ≤ 1/6⁴.
pub fn select_start_time(table: &TailTable) -> Result<f64> {
    let (p2, phi) = match (table.p2.values(), table.psi3.values()) {
        (Some(p2), Some(phi)) => (p2, phi),
        _ => {
            return Err(Error::NoValidStartTime(format!(
                "start-time thresholds need both iterated tails: ∫_t^∞ Q₁ is {}, φ is {}",
                table.p2.status(),
                table.psi3.status()
            )));
        }
    };
    let nodes = table.grid.nodes();
    for i in 0..nodes.len() {
        if p2[i].abs() <= 1.0 && phi[i] <= PHI_THRESHOLD {
            return Ok(nodes[i]);
        }
    }
    let (best_i, best_phi) = phi
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, v)| (i, *v))
        .unwrap_or((0, f64::INFINITY));
    Err(Error::NoValidStartTime(format!(
        "no grid node satisfies |∫_t^∞ Q₁| ≤ 1 and φ ≤ 1/6⁴ (best φ = {best_phi:.6e} at \
         t = {:.6e})",
        nodes[best_i]
    )))
}

// ---------------------------------------------------------------------------
// Stop rule
// ---------------------------------------------------------------------------

enum StopVerdict {
    Continue,
    Stop { tail_estimate: f64 },
}

/// Decide whether the series can stop after order k.  `sups[j-1]` holds the
/// measured sup|Q_j| (j = 1..=k).  With a finite φ(T) the geometric majorant
/// 4^{k−1}|Q₂(T)|φ(T)^{(k−2)/2} is the certificate; otherwise an empirical
/// geometric estimate on the measured sups is used.
fn stop_check(phi_t: Option<f64>, tol: f64, k: usize, sups: &[f64]) -> StopVerdict {
    if k < 2 {
        return StopVerdict::Continue;
    }
    if let Some(phi) = phi_t {
        if phi.is_finite() && phi >= 0.0 {
            let rho = 4.0 * phi.sqrt();
            if rho < 0.9 {
                let q2 = sups[1];
                let maj = fast_pow(4.0, (k - 1) as f64) * q2 * fast_pow(phi, (k as f64 - 2.0) / 2.0);
                if maj < tol {
                    return StopVerdict::Stop { tail_estimate: maj * rho / (1.0 - rho) };
                }
                return StopVerdict::Continue;
            }
        }
    }
    if k >= 3 {
        let (prev, last) = (sups[k - 2], sups[k - 1]);
        if last < tol && (prev == 0.0 || last <= 0.95 * prev) {
            let r = if prev > 0.0 { (last / prev).min(0.95) } else { 0.0 };
            return StopVerdict::Stop { tail_estimate: 2.0 * last * r / (1.0 - r) };
        }
    }
    StopVerdict::Continue
}

/// Sup of |sum| over [t_ref, ∞) for a decaying trig-power sum, taken as the
/// absolute-amplitude envelope evaluated at t_ref.
fn sup_at(sum: &OscSum, t_ref: f64) -> f64 {
    sum.terms()
        .iter()
        .map(|tm| tm.amp.abs() * fast_pow(1.0 + t_ref, tm.power))
        .sum()
}

// ---------------------------------------------------------------------------
// Chain builders
// ---------------------------------------------------------------------------

struct ChainOut {
    k_used: usize,
    stopped: bool,
    tail_estimate: f64,
    err_budget: f64,
    eval: ChainEval,
    /// Symbolic orders (exact chains) for tabulation.
    sums: Option<(Vec<OscSum>, Vec<OscSum>)>,
    /// Tabulated orders at the restricted grid nodes (numeric chain).
    tables: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
    /// b at the restricted grid nodes (numeric chain; exact chains evaluate).
    b_nodes: Option<Vec<f64>>,
}

/// Closed-form recursion for pure-power potentials: every q_k and Q_k stays
/// a finite power sum, tails via the exact antiderivative.
fn build_pure_power(
    m_sum: &OscSum,
    p1_sum: &OscSum,
    t_start: f64,
    tol: f64,
    k_max: usize,
    phi_t: Option<f64>,
) -> Result<ChainOut> {
    let mut qs: Vec<OscSum> = vec![m_sum.clone()];
    let mut qcaps: Vec<OscSum> = vec![p1_sum.scaled(-1.0)];
    let mut sups: Vec<f64> = vec![sup_at(&qcaps[0], t_start)];
    let mut stopped = false;
    let mut tail_estimate = f64::NAN;

    for k in 2..=k_max {
        let mut qk = OscSum::default();
        for j in 1..=(k - 1) {
            let prod = qcaps[j - 1].mul(&qcaps[k - j - 1]).ok_or_else(|| {
                Error::InvalidParameter(
                    "pure-power recursion produced a non-power product".into(),
                )
            })?;
            qk = qk.plus(&prod);
        }
        let qcap_k = match qk.tail_fn() {
            Some(tail) => tail.scaled(-1.0),
            None => {
                return Err(Error::DivergenceSuspected {
                    reason: format!(
                        "order-{k} tail integral diverges: q_{k} decays like (1+t)^p with \
                         p ≥ -1, so Q_{k} does not exist"
                    ),
                    partial: sup_at(&qk, t_start),
                });
            }
        };
        sups.push(sup_at(&qcap_k, t_start));
        qs.push(qk);
        qcaps.push(qcap_k);
        if let StopVerdict::Stop { tail_estimate: est } = stop_check(phi_t, tol, k, &sups) {
            stopped = true;
            tail_estimate = est;
            break;
        }
    }
    if !stopped {
        tail_estimate = *sups.last().unwrap_or(&f64::NAN);
    }

    let mut b_sum = OscSum::default();
    for qc in &qcaps {
        b_sum = b_sum.plus(qc);
    }
    let b_sum = b_sum.scaled(SIGMA);
    let b_tail = b_sum.tail_fn();
    Ok(ChainOut {
        k_used: qcaps.len(),
        stopped,
        tail_estimate,
        err_budget: 1e-15 * (1.0 + sups.iter().sum::<f64>()),
        eval: ChainEval::PurePower { b_sum, b_tail },
        sums: Some((qs, qcaps)),
        tables: None,
        b_nodes: None,
    })
}

/// Symbolic recursion for single-phase-family oscillatory potentials: tails
/// by repeated integration by parts, with pruning and a rigorously tracked
/// error envelope per order.  Returns Ok(None) when the family is not closed
/// under the required products/tails, in which case the caller falls back to
/// the numeric chain.
fn build_exact_osc(
    m_sum: &OscSum,
    p1_sum: &OscSum,
    t_start: f64,
    tol: f64,
    k_max: usize,
    phi_t: Option<f64>,
) -> Result<Option<ChainOut>> {
    let floor = tol * 1e-4;
    let base = t_start;
    let mut qs: Vec<OscSum> = vec![m_sum.clone()];
    let mut qcaps: Vec<OscSum> = vec![p1_sum.scaled(-1.0)];
    let mut errs: Vec<Env> = vec![Env::ZERO];
    let mut sups: Vec<f64> = vec![sup_at(&qcaps[0], t_start)];
    let mut stopped = false;
    let mut tail_estimate = f64::NAN;

    for k in 2..=k_max {
        let mut qk = OscSum::default();
        let mut qk_err = Env::ZERO;
        for j in 1..=(k - 1) {
            let prod = match qcaps[j - 1].mul(&qcaps[k - j - 1]) {
                Some(p) => p,
                None => return Ok(None),
            };
            qk = qk.plus(&prod);
            let (ej, ekj) = (env_of(&qcaps[j - 1]), env_of(&qcaps[k - j - 1]));
            qk_err = qk_err
                .add(ej.mul(errs[k - j - 1]), base)
                .add(errs[j - 1].mul(ekj), base)
                .add(errs[j - 1].mul(errs[k - j - 1]), base);
        }
        let (dropped_q, dpow_q) = qk.prune(t_start, floor);
        qk_err = qk_err.add(Env::from_dropped(dropped_q, dpow_q, t_start), base);

        let (qcap_raw, rem) = match qk.tail_expansion(t_start, floor) {
            Some(x) => x,
            None => return Ok(None),
        };
        let mut qcap_k = qcap_raw.scaled(-1.0);
        let (dropped_cap, dpow_cap) = qcap_k.prune(t_start, floor);
        let err_k = qk_err
            .tail()
            .add(Env::new(rem.0, rem.1), base)
            .add(Env::from_dropped(dropped_cap, dpow_cap, t_start), base);

        sups.push(sup_at(&qcap_k, t_start));
        qs.push(qk);
        qcaps.push(qcap_k);
        errs.push(err_k);
        if let StopVerdict::Stop { tail_estimate: est } = stop_check(phi_t, tol, k, &sups) {
            stopped = true;
            tail_estimate = est;
            break;
        }
    }
    if !stopped {
        tail_estimate = *sups.last().unwrap_or(&f64::NAN);
    }

    let mut b_sum = OscSum::default();
    let mut b_err = Env::ZERO;
    for (qc, e) in qcaps.iter().zip(&errs) {
        b_sum = b_sum.plus(qc);
        b_err = b_err.add(*e, base);
    }
    let b_sum = b_sum.scaled(SIGMA);
    // The dropped series tail decays at least like the orders themselves; a
    // (1+t)^{-1} profile anchored at T is a conservative stand-in.
    if stopped && tail_estimate > 0.0 {
        b_err = b_err.add(Env::from_dropped(tail_estimate, -1.0, t_start), base);
    }

    // Split b into power and oscillatory parts for exact range integrals.
    let mut b_pow = OscSum::default();
    let mut b_osc = OscSum::default();
    for tm in b_sum.terms() {
        if tm.scale == 0.0 {
            b_pow.push(*tm);
        } else {
            b_osc.push(*tm);
        }
    }
    let (b_osc_tail, _osc_rem) = match b_osc.tail_expansion(t_start, floor) {
        Some(x) => x,
        None => return Ok(None),
    };
    let b_pow_tail = b_pow.tail_fn();

    Ok(Some(ChainOut {
        k_used: qcaps.len(),
        stopped,
        tail_estimate,
        err_budget: b_err.at(t_start),
        eval: ChainEval::Exact { b_sum, b_pow, b_osc_tail, b_pow_tail },
        sums: Some((qs, qcaps)),
        tables: None,
        b_nodes: None,
    }))
}

/// Numeric recursion: products on a 2× refined grid, tails by node-to-node
/// quadrature of the interpolated products, b interpolated monotone-cubic.
fn build_numeric(
    spec: &PotentialSpec,
    p1_fn: &ValFn,
    rgrid: &TimeGrid,
    tol: f64,
    k_max: usize,
    phi_t: Option<f64>,
) -> Result<ChainOut> {
    let work = rgrid.refine_2x();
    let wn: Vec<f64> = work.nodes().to_vec();
    let n = wn.len();
    let t_start = wn[0];
    let t_end = wn[n - 1];
    let support_end = spec.support_end();
    let closed_beyond_grid = support_end.map_or(false, |s| s <= t_end);

    // Backward tail integral of an interpolated column, with the beyond-grid
    // remainder certified (zero on truncated support) or folded into `err`.
    let tail_of_column = |vals: &[f64], what: &str, err: &mut f64| -> Result<Vec<f64>> {
        let interp = MonotoneCubic::new(wn.clone(), vals.to_vec())?;
        let mut beyond = 0.0;
        if !closed_beyond_grid {
            let m = 25.min(n / 2);
            let ts = &wn[n - m..];
            let vs: Vec<f64> = vals[n - m..].iter().map(|v| v.abs().max(1e-300)).collect();
            if let Ok(fit) = fit_power_law(ts, &vs) {
                if fit.slope >= -1.02 && vals[n - 1].abs() > tol {
                    return Err(Error::DivergenceSuspected {
                        reason: format!(
                            "{what} decays like (1+t)^{:.3} at the grid end; its tail integral \
                             cannot be certified",
                            fit.slope
                        ),
                        partial: vals[n - 1].abs(),
                    });
                }
                if fit.slope < -1.02 {
                    beyond = vals[n - 1].abs() * (1.0 + t_end) / (-fit.slope - 1.0);
                } else {
                    beyond = vals[n - 1].abs() * (1.0 + t_end);
                }
            }
            *err += beyond;
        }
        let mut out = vec![0.0; n];
        let mut acc = 0.0;
        for i in (0..n - 1).rev() {
            let (v, e) = gk15(|s| interp.eval(s), wn[i], wn[i + 1]);
            acc += v;
            *err += e;
            out[i] = acc;
        }
        Ok(out)
    };

    let q1: Vec<f64> = wn.iter().map(|&t| spec.eval_m(t)).collect();
    let qcap1: Vec<f64> = wn.iter().map(|&t| -p1_fn(t)).collect();

    let mut q_cols: Vec<Vec<f64>> = vec![q1];
    let mut qcap_cols: Vec<Vec<f64>> = vec![qcap1];
    let mut sups: Vec<f64> = vec![qcap_cols[0].iter().fold(0.0, |a: f64, &v| a.max(v.abs()))];
    let mut err_budget = 0.0;
    let mut stopped = false;
    let mut tail_estimate = f64::NAN;

    for k in 2..=k_max {
        let mut qk = vec![0.0; n];
        for j in 1..=(k - 1) {
            let (a, b) = (&qcap_cols[j - 1], &qcap_cols[k - j - 1]);
            for i in 0..n {
                qk[i] += a[i] * b[i];
            }
        }
        let tail = tail_of_column(&qk, &format!("q_{k}"), &mut err_budget)?;
        let qcap_k: Vec<f64> = tail.iter().map(|v| -v).collect();
        sups.push(qcap_k.iter().fold(0.0, |a: f64, &v| a.max(v.abs())));
        q_cols.push(qk);
        qcap_cols.push(qcap_k);
        if let StopVerdict::Stop { tail_estimate: est } = stop_check(phi_t, tol, k, &sups) {
            stopped = true;
            tail_estimate = est;
            break;
        }
    }
    if !stopped {
        tail_estimate = *sups.last().unwrap_or(&f64::NAN);
    }

    let k_used = qcap_cols.len();
    let mut b_w = vec![0.0; n];
    for col in &qcap_cols {
        for i in 0..n {
            b_w[i] += col[i];
        }
    }
    for v in &mut b_w {
        *v *= SIGMA;
    }

    let b_interp = MonotoneCubic::new(wn.clone(), b_w.clone())?;
    let mut cum = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n - 1 {
        acc += gk15(|s| b_interp.eval(s), wn[i], wn[i + 1]).0;
        cum[i + 1] = acc;
    }
    let cum_b = MonotoneCubic::new(wn.clone(), cum)?;

    let mut int_b_err = 0.0;
    let int_b = match tail_of_column(&b_w, "b", &mut int_b_err) {
        Ok(col) => Some(MonotoneCubic::new(wn.clone(), col)?),
        Err(_) => None,
    };
    let _ = int_b_err;

    // Down-sample the refined columns to the restricted grid (even indices).
    let pick = |col: &[f64]| -> Vec<f64> { col.iter().step_by(2).copied().collect() };
    let q_tables: Vec<Vec<f64>> = q_cols.iter().map(|c| pick(c)).collect();
    let qcap_tables: Vec<Vec<f64>> = qcap_cols.iter().map(|c| pick(c)).collect();
    let b_nodes = pick(&b_w);
    debug_assert_eq!(b_nodes.len(), rgrid.len());
    let _ = t_start;

    Ok(ChainOut {
        k_used,
        stopped,
        tail_estimate,
        err_budget,
        eval: ChainEval::Numeric { b: b_interp, cum_b, int_b },
        sums: None,
        tables: Some((q_tables, qcap_tables)),
        b_nodes: Some(b_nodes),
    })
}

// ---------------------------------------------------------------------------
// Gap-column construction
// ---------------------------------------------------------------------------

/// ∫_lo^hi |expm1(2 P2)| with half-wave chunking when an oscillation is
/// present.  Returns (value, error bound).
fn abs_expm1_range(
    p2: &ValFn,
    osc: Option<Oscillation>,
    lo: f64,
    hi: f64,
) -> (f64, f64) {
    let mut w = |s: f64| (2.0 * p2(s)).exp_m1();
    let pi = std::f64::consts::PI;
    let mut total = 0.0;
    let mut err = 0.0;
    match osc {
        Some(o) => {
            let mut a = lo;
            let mut m = (o.phase(lo) / pi).floor() + 1.0;
            let mut chunks = 0usize;
            while a < hi {
                let b = o.time_at_phase(m * pi).min(hi).max(a + 1e-12 * (1.0 + a));
                let (v, e) = integrate_abs_smooth(&mut w, a, b);
                total += v;
                err += e;
                a = b;
                m += 1.0;
                chunks += 1;
                if chunks > 100_000 {
                    // Give up on exact chunking; bound the rest by the
                    // integrand's local size times the remaining span.
                    let worst = w(a).abs().max(w(hi).abs()) * (hi - a);
                    total += worst;
                    err += worst;
                    break;
                }
            }
        }
        None => {
            let (v, e) = integrate_abs_smooth(&mut w, lo, hi);
            total += v;
            err += e;
        }
    }
    (total, err)
}

fn build_gap_eval(
    spec: &PotentialSpec,
    rgrid: &TimeGrid,
    p2_fn: &Option<ValFn>,
    p1_sum: &Option<OscSum>,
) -> GapEval {
    let p2 = match p2_fn {
        Some(f) => f.clone(),
        None => return GapEval::Unavailable,
    };
    let nodes = rgrid.nodes();
    let sup = nodes.iter().map(|&t| p2(t).abs()).fold(0.0, f64::max);
    if sup == 0.0 {
        return GapEval::Zero;
    }

    // Oscillatory profile with a certified far field.
    if let (Some(osc), Some(p1s)) = (spec.oscillation(), p1_sum.as_ref()) {
        if let Some(far) = p2_far_field(p1s) {
            let g = p2.clone();
            if let Ok(prof) =
                crate::oscillate::abs_profile(move |s| g(s), osc, far, Some(2.0), nodes)
            {
                let head = MonotoneCubic::new(nodes.to_vec(), prof.head);
                let tail = MonotoneCubic::new(nodes.to_vec(), prof.tail);
                if let (Ok(head), Ok(tail)) = (head, tail) {
                    return GapEval::Profile { head, tail };
                }
            }
        }
        // Oscillatory without a certified far field: the cumulative route
        // below would need unbounded chunking; decline.
        if spec.support_end().is_none() {
            return GapEval::Unavailable;
        }
    }

    // Cumulative route: head column on the refined grid; total certified on
    // truncated support or via a closed power tail.
    let work = rgrid.refine_2x();
    let wn = work.nodes();
    let osc = spec.oscillation();
    let mut head = vec![0.0; wn.len()];
    let mut acc = 0.0;
    for i in 0..wn.len() - 1 {
        let (v, _e) = abs_expm1_range(&p2, osc, wn[i], wn[i + 1]);
        acc += v;
        head[i + 1] = acc;
    }
    let t_end = *wn.last().unwrap();
    let mut total = acc;
    let mut tail_ok = spec.support_end().map_or(false, |s| s <= t_end);
    if !tail_ok {
        // Pure-power P2: |expm1(2 P2)| ≈ 2|P2| beyond the grid, with the
        // quadratic correction bounded by the small end value.
        if let Some(p2_sum) = p1_sum.as_ref().and_then(|p| p.tail_fn()) {
            if let Some(p2_tail) = p2_sum.tail_fn() {
                let end_val = p2(t_end).abs();
                let beyond = 2.0 * p2_tail.eval(t_end).abs() * (1.0 + 2.0 * end_val).exp();
                total += beyond;
                tail_ok = true;
            }
        }
    }
    match MonotoneCubic::new(wn.to_vec(), head) {
        Ok(head) => GapEval::Cumulative { head, total, tail_ok },
        Err(_) => GapEval::Unavailable,
    }
}

// ---------------------------------------------------------------------------
// Build
// ---------------------------------------------------------------------------

/// Reporting decay weights (γ, 2β) for the b₁/b₂ sups, derived from the
/// potential's intrinsic exponents; (1, 1.2) when nothing sharper is known.
fn decay_weights(spec: &PotentialSpec) -> (f64, f64) {
    match spec {
        PotentialSpec::Zero => (0.0, 0.0),
        PotentialSpec::OscillatoryExample { beta, kappa } => {
            (2.0 * beta + kappa - 1.0, 2.0 * beta)
        }
        PotentialSpec::ScaleInvariant { nu, .. } => {
            let gamma = (2.0 * nu - 1.0).max(0.0);
            let two_beta = (2.0 * nu).min(4.0 * nu - 2.0).max(0.0);
            (gamma, two_beta)
        }
        _ => {
            let (coef, p) = spec.envelope();
            if coef > 0.0 && p < -1.0 {
                ((-p - 1.0).min(4.0), (-p).min(-2.0 * p - 2.0).min(4.0))
            } else {
                (1.0, 1.2)
            }
        }
    }
}

fn column_fn(grid: &TimeGrid, col: &Column, exact: Option<&ValFn>) -> Option<ValFn> {
    if let Some(f) = exact {
        return Some(f.clone());
    }
    let vals = col.values()?;
    let interp = MonotoneCubic::new(grid.nodes().to_vec(), vals.to_vec()).ok()?;
    Some(Arc::new(move |t| interp.eval(t)))
}

/// Build the gauge series for `spec` on `grid`.
///
/// * `table` supplies the iterated tails (start-time thresholds, φ, P2).
/// * `tol` is the series tail tolerance: construction stops at the first K
///   whose majorant (or empirical geometric estimate) falls below it.
/// * `k_max` caps the order; reaching it without certification returns a
///   truncation error that still carries the fully assembled partial series.
/// * `start` selects the start time automatically (threshold scan) or pins
///   it, which is how borderline closed-form series are studied.
pub fn build_gauge(
    spec: &PotentialSpec,
    table: &TailTable,
    grid: &TimeGrid,
    tol: f64,
    k_max: usize,
    start: StartTime,
) -> Result<GaugeSeries> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "series tolerance must be positive (got {tol})"
        )));
    }
    if k_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "order cap must be at least 2 (got {k_max})"
        )));
    }

    let t_start = match start {
        StartTime::Auto => select_start_time(table)?,
        StartTime::Fixed(t) => {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "fixed start time must be finite and non-negative (got {t})"
                )));
            }
            t
        }
    };

    // Restrict the output grid to [T, end], inserting T itself if needed.
    let mut rnodes: Vec<f64> = grid.nodes().iter().copied().filter(|&t| t >= t_start).collect();
    if rnodes.first().map_or(true, |&f| f > t_start) {
        rnodes.insert(0, t_start);
    }
    let rgrid = TimeGrid::from_nodes(rnodes)?;

    let m_sum = spec.m_structure();
    let p1_sum = spec.p1_structure();
    let psi3_fn = column_fn(&table.grid, &table.psi3, table.evaluators.psi3.as_ref());
    let p2_fn = column_fn(&table.grid, &table.p2, table.evaluators.p2.as_ref());
    let phi_t = psi3_fn.as_ref().map(|f| f(t_start));

    // Chain selection: closed power recursion when P1 is a pure power sum,
    // symbolic oscillatory when the phase at T is fast enough, numeric
    // otherwise or on any structural fallback.
    let mut out: Option<ChainOut> = None;
    if let (Some(m), Some(p1)) = (&m_sum, &p1_sum) {
        if p1.is_pure_power() {
            out = Some(build_pure_power(m, p1, t_start, tol, k_max, phi_t)?);
        } else if spec.oscillation().map_or(false, |o| o.phase(t_start) >= MIN_PHASE_EXACT) {
            out = build_exact_osc(m, p1, t_start, tol, k_max, phi_t)?;
        }
    }
    let out = match out {
        Some(o) => o,
        None => {
            let p1_fn = column_fn(&table.grid, &table.p1, table.evaluators.p1.as_ref())
                .ok_or_else(|| {
                    Error::Unavailable(format!(
                        "gauge construction needs the first tail: P1 is {}",
                        table.p1.status()
                    ))
                })?;
            build_numeric(spec, &p1_fn, &rgrid, tol, k_max, phi_t)?
        }
    };

    // Tabulate the orders and b on the restricted grid.
    let nodes = rgrid.nodes().to_vec();
    let (q_tables, q_cap_tables, b_nodes) = match (&out.sums, &out.tables, &out.b_nodes) {
        (Some((qs, qcaps)), _, _) => {
            let tab = |sums: &Vec<OscSum>| -> Vec<Vec<f64>> {
                sums.iter()
                    .map(|s| nodes.iter().map(|&t| s.eval(t)).collect())
                    .collect()
            };
            let b: Vec<f64> = nodes.iter().map(|&t| out.eval.eval_b(t)).collect();
            (tab(qs), tab(qcaps), b)
        }
        (None, Some((q, qc)), Some(b)) => (q.clone(), qc.clone(), b.clone()),
        _ => unreachable!("every chain produces either sums or tables"),
    };

    let phi = match (&table.psi3, &psi3_fn) {
        (Column::Available { .. }, Some(f)) => {
            let values: Vec<f64> = nodes.iter().map(|&t| f(t)).collect();
            let errs = vec![0.0; values.len()];
            Column::Available { values, errs }
        }
        (other, _) => other.clone(),
    };

    let gap = build_gap_eval(spec, &rgrid, &p2_fn, &p1_sum);
    let theta = build_theta_split(&out.eval, spec, t_start);
    let p2_at_start = p2_fn.as_ref().map(|f| f(t_start));
    let weights = decay_weights(spec);

    let mut series = GaugeSeries {
        grid: rgrid,
        t_start,
        sigma: SIGMA,
        k_used: out.k_used,
        q_tables,
        q_cap_tables,
        phi,
        b: b_nodes,
        tail_estimate: out.tail_estimate,
        err_budget: out.err_budget,
        residual_sup: f64::NAN,
        b0: None,
        b1: f64::NAN,
        b2: f64::NAN,
        weights,
        spec: spec.clone(),
        eval: out.eval,
        gap,
        theta,
        p2_fn,
        p2_at_start,
    };

    // Measured constants.
    let (gamma, two_beta) = series.weights;
    let mut b1 = 0.0_f64;
    let mut b2 = 0.0_f64;
    let mut b0: Option<f64> = Some(0.0);
    for (&t, &bv) in series.grid.nodes().iter().zip(&series.b) {
        b1 = b1.max(bv.abs() * fast_pow(1.0 + t, gamma));
        let bp = -bv * bv - spec.eval_m(t);
        b2 = b2.max(bp.abs() * fast_pow(1.0 + t, two_beta));
        b0 = match (b0, series.int_b_tail(t)) {
            (Some(acc), Ok(v)) => Some(acc.max(v.abs())),
            _ => None,
        };
    }
    series.b1 = b1;
    series.b2 = b2;
    series.b0 = b0;
    series.residual_sup = measure_residual_sup(&series);

    if out.stopped {
        Ok(series)
    } else {
        Err(Error::Truncation {
            k_used: series.k_used,
            tail_estimate: series.tail_estimate,
            tol,
            partial: Box::new(series),
        })
    }
}

// ---------------------------------------------------------------------------
// Evaluation and residual
// ---------------------------------------------------------------------------

/// Gauge value and derivative at t ≥ T.  b comes from the series' evaluation
/// chain; b′ from the Riccati identity b′ = −b² − M (exact up to the
/// residual), never from differentiating an interpolant.
pub fn eval_gauge(series: &GaugeSeries, t: f64) -> Result<(f64, f64)> {
    if t < series.t_start {
        return Err(Error::Domain(format!(
            "gauge evaluation at t = {t:.6e} below the start time T = {:.6e}",
            series.t_start
        )));
    }
    let b = series.eval_b(t);
    Ok((b, -b * b - series.spec.eval_m(t)))
}

/// Finite-difference Riccati residual b̃′(t) + b(t)² + M(t), where b̃′ is a
/// Richardson-extrapolated centered difference of the evaluated b.  This is
/// deliberately independent of [`eval_gauge`]'s algebraic derivative: a wrong
/// sign convention or a broken series shows up here immediately.
pub fn riccati_residual(series: &GaugeSeries, t: f64) -> f64 {
    let rate = series.spec.max_rate(t).max(1e-12);
    // With b oscillating at rate ω the extrapolated stencil's truncation
    // error is ≈ h⁴ω⁵·amp/480; h = 0.02/ω keeps that near 10⁻¹⁰ while the
    // rounding error h⁻¹·ε·|b| stays far below it.
    let mut h = (1e-3 * (1.0 + t)).min(0.02 / rate);
    if matches!(series.eval, ChainEval::Numeric { .. }) {
        // Interpolated b is only piecewise smooth; a smaller step keeps the
        // stencil's crossing error below the interpolation error itself.
        h = h.min(1e-4 * (1.0 + t));
    }
    h = h.max(1e-9 * (1.0 + t));
    let tc = t.max(series.t_start + h);
    let b = |s: f64| series.eval_b(s);
    let d_h = (b(tc + h) - b(tc - h)) / (2.0 * h);
    let d_h2 = (b(tc + 0.5 * h) - b(tc - 0.5 * h)) / h;
    let d = (4.0 * d_h2 - d_h) / 3.0;
    let bc = b(tc);
    d + bc * bc + series.spec.eval_m(tc)
}

/// Sup of |riccati_residual| over grid nodes and jittered interior probes on
/// [T, min(grid end, 10³)].
fn measure_residual_sup(series: &GaugeSeries) -> f64 {
    let lo = series.t_start;
    let hi = series.grid.last().min(RESIDUAL_PROBE_END.max(lo + 1.0));
    let mut rng = SplitMix64::new(0x5851_f42d_4c95_7f2d);
    let mut sup = 0.0_f64;
    let nodes = series.grid.nodes();
    for i in 0..nodes.len() {
        let t = nodes[i];
        if t > hi {
            break;
        }
        sup = sup.max(riccati_residual(series, t).abs());
        if i + 1 < nodes.len() {
            let (a, b) = (nodes[i], nodes[i + 1].min(hi));
            if b > a {
                for _ in 0..2 {
                    let t = rng.uniform(a, b);
                    sup = sup.max(riccati_residual(series, t).abs());
                }
            }
        }
    }
    sup
}

// ---------------------------------------------------------------------------
// Series bounds
// ---------------------------------------------------------------------------

/// Result of checking the geometric series bounds on a built gauge.
///
/// The per-order majorant and the sum/split bounds are the quantitative
/// content of the series' convergence analysis; the sum and split bounds
/// additionally assume the start-time thresholds (|P2(T)| ≤ 1, φ(T) ≤ 1/6⁴),
/// so their pass verdicts are `None` when the series was forced to start at
/// an inadmissible time.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub t_start: f64,
    pub k_used: usize,
    /// Whether the start time satisfies both admissibility thresholds.
    pub valid_start: bool,
    /// ε: the series' accumulated numerical error allowance.
    pub eps_budget: f64,
    /// Q₂ ≤ 0 across the grid (up to ε).
    pub q2_nonpositive: bool,
    /// φ non-negative and non-increasing across the grid (when available).
    pub phi_monotone: Option<bool>,
    /// Per-order sup ratios |Q_k| / (4^{k−1}(−Q₂)φ^{(k−2)/2} + ε), k ≥ 2;
    /// only the k = 2 tautology when φ is unavailable.
    pub majorant_ratios: Vec<f64>,
    pub majorant_pass: bool,
    /// Sup ratio Σ_{k≥2}|Q_k| / ((3/2)|Q₂| + ε).
    pub sum_ratio: f64,
    /// Pass verdict for the sum bound; `None` off the admissible start set.
    pub sum_pass: Option<bool>,
    /// Sup ratio Σ_{k≥3}|Q_k| / (|Q₂| + ε); ≤ 1/2 in the admissible regime.
    pub higher_order_ratio: Option<f64>,
    /// Sup ratio |b| / (|Q₁| + (3/2)|Q₂| + ε).
    pub split_ratio: f64,
    /// Pass verdict for the split bound; `None` off the admissible start set.
    pub split_pass: Option<bool>,
    /// Sup |Q₁| over the grid.
    pub q1_sup: f64,
    /// Sup |Q₂| over the grid.
    pub q2_sup: f64,
    pub b0: Option<f64>,
    pub b1: f64,
    pub b2: f64,
    /// Conjunction of every applicable pass verdict above.
    pub all_pass: bool,
}

/// Check the geometric majorant, the sum bound Σ_{k≥2}|Q_k| ≤ (3/2)|Q₂|, and
/// the split bound |b| ≤ |Q₁| + (3/2)|Q₂| on the series tables, with the
/// series' error budget as slack.
pub fn verify_series_bounds(series: &GaugeSeries) -> BoundReport {
    let nodes = series.grid.nodes();
    let n = nodes.len();
    let k = series.k_used;
    let eps = series.err_budget.max(1e-15);
    let phi_vals = series.phi.values();

    let valid_start = match (phi_vals, series.p2_at_start) {
        (Some(phi), Some(p2)) => {
            phi.first().map_or(false, |&p| p <= PHI_THRESHOLD * (1.0 + 1e-9))
                && p2.abs() <= 1.0 + 1e-9
        }
        _ => false,
    };

    let q2 = series.q_cap_tables.get(1);
    let q2_nonpositive = q2.map_or(true, |col| col.iter().all(|&v| v <= eps));
    let phi_monotone = phi_vals.map(|phi| {
        phi.iter().all(|&p| p >= -eps)
            && phi.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15)
    });

    // Per-order majorant.
    let mut majorant_ratios = Vec::new();
    let mut majorant_pass = true;
    for order in 2..=k {
        if order > 2 && phi_vals.is_none() {
            break;
        }
        let col = &series.q_cap_tables[order - 1];
        let mut ratio = 0.0_f64;
        for i in 0..n {
            let neg_q2 = q2.map_or(0.0, |c| (-c[i]).max(0.0));
            let phi_i = phi_vals.map_or(1.0, |p| p[i].max(0.0));
            let bound = fast_pow(4.0, (order - 1) as f64)
                * neg_q2
                * fast_pow(phi_i, (order as f64 - 2.0) / 2.0);
            ratio = ratio.max(col[i].abs() / (bound + eps));
        }
        majorant_pass &= ratio <= 1.0 + 1e-9;
        majorant_ratios.push(ratio);
    }

    // Sum, higher-order, and split bounds.
    let mut sum_ratio = 0.0_f64;
    let mut higher_ratio = 0.0_f64;
    let mut split_ratio = 0.0_f64;
    let mut q1_sup = 0.0_f64;
    let mut q2_sup = 0.0_f64;
    for i in 0..n {
        let q1 = series.q_cap_tables[0][i].abs();
        let q2a = q2.map_or(0.0, |c| c[i].abs());
        q1_sup = q1_sup.max(q1);
        q2_sup = q2_sup.max(q2a);
        let sum_hi: f64 = (2..=k).map(|o| series.q_cap_tables[o - 1][i].abs()).sum();
        let sum_3up: f64 = (3..=k).map(|o| series.q_cap_tables[o - 1][i].abs()).sum();
        sum_ratio = sum_ratio.max(sum_hi / (1.5 * q2a + eps));
        higher_ratio = higher_ratio.max(sum_3up / (q2a + eps));
        split_ratio = split_ratio.max(series.b[i].abs() / (q1 + 1.5 * q2a + eps));
    }
    let sum_pass = valid_start.then(|| sum_ratio <= 1.0 + 1e-9);
    let split_pass = valid_start.then(|| split_ratio <= 1.0 + 1e-9);
    let higher_order_ratio = (k >= 3).then_some(higher_ratio);

    let all_pass = q2_nonpositive
        && phi_monotone.unwrap_or(true)
        && majorant_pass
        && sum_pass.unwrap_or(true)
        && split_pass.unwrap_or(true);

    BoundReport {
        t_start: series.t_start,
        k_used: k,
        valid_start,
        eps_budget: eps,
        q2_nonpositive,
        phi_monotone,
        majorant_ratios,
        majorant_pass,
        sum_ratio,
        sum_pass,
        higher_order_ratio,
        split_ratio,
        split_pass,
        q1_sup,
        q2_sup,
        b0: series.b0,
        b1: series.b1,
        b2: series.b2,
        all_pass,
    }
}

// ---------------------------------------------------------------------------
// Clock change and comparison functions
// ---------------------------------------------------------------------------

/// θ(t) = ∫_T^t exp(−2∫_T^s b) ds: the strictly increasing clock change
/// flattening the gauge out of the mode equation.
pub fn theta_map(series: &GaugeSeries, t: f64) -> Result<f64> {
    if t < series.t_start {
        return Err(Error::Domain(format!(
            "clock change requested at t = {t:.6e} below the start time {:.6e}",
            series.t_start
        )));
    }
    if t == series.t_start {
        return Ok(0.0);
    }
    let t0 = series.t_start;
    if let Some(split) = &series.theta {
        // Symbolic chain: smooth factor integrated adaptively, oscillatory
        // correction from the precomputed cumulative.
        let (b_pow, h_t) = match &series.eval {
            ChainEval::Exact { b_pow, .. } => {
                (b_pow, b_pow.head_integral(t0).unwrap_or(0.0))
            }
            _ => unreachable!("theta split exists only for the symbolic chain"),
        };
        let smooth =
            |s: f64| (-2.0 * (b_pow.head_integral(s).unwrap_or(0.0) - h_t)).exp();
        let tol = 1e-12 * (1.0 + t - t0);
        let (v, _e) = adaptive_integral(smooth, t0, t, tol, 4000)?;
        return Ok(split.a0 * (v + split.corr.eval(t)));
    }
    let integrand = |s: f64| (-2.0 * series.eval.cum_from_start(t0, s)).exp();
    let tol = 1e-10 * (1.0 + t - t0);
    let (v, _e) = adaptive_integral(integrand, t0, t, tol, 20_000)?;
    Ok(v)
}

/// The comparison functions a, η at τ = θ(t) and the θ-weighted gap
/// integrals between them.
#[derive(Debug, Clone, Copy)]
pub struct AEta {
    /// a = exp(2∫_T^t b).
    pub a: f64,
    /// η = a·exp(2 P2(t)): the first-order tail mass moved to t = T.
    pub eta: f64,
    /// ∫_{θ(T)}^{θ(t)} |a − η| dτ = ∫_T^t |expm1(2 P2)| ds.
    pub gap_head: f64,
    /// ∫_{θ(t)}^∞ |a − η| dτ, when the tail integral is certified
    /// convergent (it requires the cumulative first-order mass to decay).
    pub gap_tail: Option<f64>,
}

/// Evaluate the comparison functions and their gap integrals at time t ≥ T.
pub fn a_eta_diagnostic(series: &GaugeSeries, t: f64) -> Result<AEta> {
    if t < series.t_start {
        return Err(Error::Domain(format!(
            "comparison functions requested at t = {t:.6e} below the start time {:.6e}",
            series.t_start
        )));
    }
    let a = (2.0 * series.eval.cum_from_start(series.t_start, t)).exp();
    let p2_t = match &series.p2_fn {
        Some(f) => f(t),
        None => {
            return Err(Error::Unavailable(
                "comparison functions need the second iterated tail P2".into(),
            ));
        }
    };
    let eta = a * (2.0 * p2_t).exp();
    let (gap_head, gap_tail) = match &series.gap {
        GapEval::Zero => (0.0, Some(0.0)),
        GapEval::Profile { head, tail } => (head.eval(t), Some(tail.eval(t))),
        GapEval::Cumulative { head, total, tail_ok } => {
            let h = head.eval(t);
            let tail = tail_ok.then(|| (total - h).max(0.0));
            (h, tail)
        }
        GapEval::Unavailable => {
            return Err(Error::Unavailable(
                "no certified evaluation of the comparison gap for this potential".into(),
            ));
        }
    };
    Ok(AEta { a, eta, gap_head, gap_tail })
}

// ---------------------------------------------------------------------------
