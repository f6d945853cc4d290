//! Exact tail calculus for chirped-oscillatory integrands.
//!
//! The decaying potentials studied here, and everything derived from them by
//! repeated tail integration, are finite sums of terms
//!
//! ```text
//!     A · trig(c (1+s)^κ) · (1+s)^q        (trig ∈ {cos, sin}, c ≥ 0, κ > 0)
//! ```
//!
//! with `c = 0` degenerating to a pure power.  This family is closed under
//! products (product-to-sum identities, same κ) and — up to one special
//! function — under tail integration: substituting `u = c(1+s)^κ` turns
//!
//! ```text
//!     ∫_t^∞ A trig(c(1+s)^κ)(1+s)^q ds  =  (A/κ) c^{-(r+1)} · J(x, r),
//!     x = c(1+t)^κ,   r = (q+1)/κ − 1,
//! ```
//!
//! where `J(x, r) = ∫_x^∞ trig(u) u^r du` converges for every `r < 0`.
//! `J` is evaluated by the integration-by-parts recursion
//!
//! ```text
//!     J_sin(x, r) =  cos(x) x^r + r J_cos(x, r−1)
//!     J_cos(x, r) = −sin(x) x^r − r J_sin(x, r−1)
//! ```
//!
//! whose unrolled form is an asymptotic series with term magnitudes
//! `|r(r−1)⋯| x^{r−j}`; for `x ≳ 40` it reaches f64 precision before the
//! smallest term.  Below that threshold the range `[x, 40]` is integrated by
//! Gauss–Kronrod panels over half-wave chunks and the series anchors the
//! remainder.  Everything downstream (tail tables, gauge series, mode
//! stepping) gets machine-precision tails from these few dozen flops.
//!
//! The module also provides absolute-value integrals `∫ |g|` for oscillatory
//! `g` (needed for stabilization-condition columns and gap integrals):
//! near range by sign-splitting at bisected zeros, far range by the
//! mean-|cos| model `∫|g| ≈ (2/π)∫ env(g)` with its relative error reported
//! honestly.

use crate::error::{Error, Result};
use crate::math::{adaptive_integral, bisect_root, fast_pow, gk15};

/// Phase threshold above which the integration-by-parts series for `J`
/// reaches f64 precision.
const X_ASYM: f64 = 40.0;

/// Phase threshold beyond which absolute-value integrals switch to the
/// mean-|cos| far-field model.
pub const X_FAR: f64 = 3500.0;

/// Which trigonometric factor a term carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Trig::Cos => x.cos(),
            Trig::Sin => x.sin(),
        }
    }
}

// ---------------------------------------------------------------------------
// J(x, r) = ∫_x^∞ trig(u) u^r du,  r < 0, x > 0
// ---------------------------------------------------------------------------

/// Asymptotic evaluation of `J`; accurate once `x ≳ |r| + 30`.
fn j_trig_asymptotic(trig: Trig, x: f64, r: f64) -> (f64, f64) {
    let (sin_x, cos_x) = x.sin_cos();
    let inv_x = 1.0 / x;
    let mut kind = trig;
    let mut mult = 1.0_f64;
    let mut rho = r;
    let mut xr = x.powf(r);
    let mut total = 0.0_f64;
    let mut prev_mag = f64::INFINITY;

    for _ in 0..300 {
        let mag = mult.abs() * xr;
        if mag > prev_mag {
            // The asymptotic series started diverging; truncate at its
            // smallest term and report that magnitude as the error.
            return (total, 2.0 * prev_mag);
        }
        let term = match kind {
            Trig::Sin => mult * cos_x * xr,
            Trig::Cos => -mult * sin_x * xr,
        };
        total += term;
        if mag < 1e-17 * (1.0 + total.abs()) {
            return (total, mag);
        }
        prev_mag = mag;
        (kind, mult) = match kind {
            Trig::Sin => (Trig::Cos, mult * rho),
            Trig::Cos => (Trig::Sin, -mult * rho),
        };
        rho -= 1.0;
        xr *= inv_x;
    }
    (total, prev_mag)
}

/// Full evaluation of `J(x, r)` for `x > 0`, `r < 0`.
///
/// Returns `(value, error_estimate)`.
pub fn j_trig(trig: Trig, x: f64, r: f64) -> (f64, f64) {
    debug_assert!(x > 0.0, "phase must be positive (got {x})");
    debug_assert!(r < 0.0, "J converges only for r < 0 (got {r})");
    if x >= X_ASYM {
        return j_trig_asymptotic(trig, x, r);
    }
    let (anchor, anchor_err) = j_trig_asymptotic(trig, X_ASYM, r);

    let mut value = anchor;
    let mut err = anchor_err;

    // First (possibly partial) half-wave chunk, adaptively: for small x and
    // r ≤ −1 the integrand is steep near the left end.
    let pi = std::f64::consts::PI;
    let first_hi = (pi * (x / pi).floor() + pi).min(X_ASYM);
    let scale = if r < -1.0 {
        fast_pow(x, r + 1.0) / (-r - 1.0).max(0.25)
    } else {
        fast_pow(first_hi, r + 1.0).max(1.0)
    };
    let (v, e) = adaptive_integral(
        |u| trig.apply(u) * fast_pow(u, r),
        x,
        first_hi,
        1e-15 * scale.abs() + 1e-300,
        4000,
    )
    .unwrap_or_else(|_| gk15(|u| trig.apply(u) * fast_pow(u, r), x, first_hi));
    value += v;
    err += e;

    // Remaining whole half-wave chunks up to the asymptotic threshold.
    let mut lo = first_hi;
    while lo < X_ASYM - 1e-12 {
        let hi = (lo + pi).min(X_ASYM);
        let (v, e) = gk15(|u| trig.apply(u) * fast_pow(u, r), lo, hi);
        value += v;
        err += e;
        lo = hi;
    }
    (value, err)
}

// ---------------------------------------------------------------------------
// Terms and sums
// ---------------------------------------------------------------------------

/// One term `amp · trig(scale·(1+t)^kappa) · (1+t)^power`.
///
/// Normal form (maintained by [`OscSum`]): `scale ≥ 0`; `scale == 0` only
/// with `trig == Cos` (a pure power) and `kappa == 1`.
#[derive(Debug, Clone, Copy)]
pub struct TrigPowerTerm {
    pub trig: Trig,
    pub amp: f64,
    pub scale: f64,
    pub kappa: f64,
    pub power: f64,
}

impl TrigPowerTerm {
    /// Pure power term `amp (1+t)^power`.
    pub fn power_term(amp: f64, power: f64) -> Self {
        Self { trig: Trig::Cos, amp, scale: 0.0, kappa: 1.0, power }
    }

    /// Oscillatory term; `kappa` must be positive when `scale ≠ 0`.
    pub fn oscillating(trig: Trig, amp: f64, scale: f64, kappa: f64, power: f64) -> Self {
        Self { trig, amp, scale, kappa, power }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let base = 1.0 + t;
        if self.scale == 0.0 {
            match self.trig {
                Trig::Cos => self.amp * fast_pow(base, self.power),
                Trig::Sin => 0.0,
            }
        } else {
            let phase = self.scale * fast_pow(base, self.kappa);
            self.amp * self.trig.apply(phase) * fast_pow(base, self.power)
        }
    }

    /// `∫_t^∞` of the term.  Fails with `DivergenceSuspected` when the
    /// exponents rule out convergence (`power ≥ −1` for pure powers,
    /// `power + 1 ≥ kappa` for oscillatory terms).
    pub fn tail(&self, t: f64) -> Result<(f64, f64)> {
        let base = 1.0 + t;
        if self.amp == 0.0 {
            return Ok((0.0, 0.0));
        }
        if self.scale == 0.0 {
            if self.trig == Trig::Sin {
                return Ok((0.0, 0.0));
            }
            if self.power >= -1.0 {
                return Err(Error::DivergenceSuspected {
                    reason: format!(
                        "tail of a pure power with exponent {} ≥ -1 diverges",
                        self.power
                    ),
                    partial: self.amp.signum() * f64::INFINITY,
                });
            }
            let v = self.amp * fast_pow(base, self.power + 1.0) / (-self.power - 1.0);
            return Ok((v, 1e-16 * v.abs()));
        }
        let r = (self.power + 1.0) / self.kappa - 1.0;
        if r >= 0.0 {
            return Err(Error::DivergenceSuspected {
                reason: format!(
                    "oscillatory tail with power {} and phase exponent {} does not decay \
                     (reduced exponent r = {r} ≥ 0)",
                    self.power, self.kappa
                ),
                partial: f64::NAN,
            });
        }
        let x = self.scale * fast_pow(base, self.kappa);
        let coef = self.amp * fast_pow(self.scale, -(r + 1.0)) / self.kappa;
        let (j, j_err) = j_trig(self.trig, x, r);
        Ok((coef * j, coef.abs() * j_err + 1e-16 * (coef * j).abs()))
    }

    /// Same term with the power exponent shifted by `dq`.
    fn with_power(&self, power: f64) -> Self {
        Self { power, ..*self }
    }

    /// `∫_t^∞ ∫_s^∞` of the term, using the exact rewrite
    /// `∫∫ f = ∫ (1+σ) f − (1+t) ∫ f` (all tails from `t`).
    pub fn nested_tail(&self, t: f64) -> Result<(f64, f64)> {
        let (outer, e1) = self.with_power(self.power + 1.0).tail(t)?;
        let (inner, e2) = self.tail(t)?;
        let scaled = (1.0 + t) * inner;
        let v = outer - scaled;
        // The two pieces share their leading asymptotics, so cancellation is
        // expected; account for it in the error estimate.
        let cancel = 1e-16 * (outer.abs() + scaled.abs());
        Ok((v, e1 + (1.0 + t) * e2 + cancel))
    }

    /// Oscillation rate `d/dt [scale (1+t)^kappa]`; zero for pure powers.
    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.scale * self.kappa * fast_pow(1.0 + t, self.kappa - 1.0)
        }
    }
}

/// Phase model of an oscillatory family: `phase(t) = scale (1+t)^kappa`.
#[derive(Debug, Clone, Copy)]
pub struct Oscillation {
    pub scale: f64,
    pub kappa: f64,
}

impl Oscillation {
    #[inline]
    pub fn phase(&self, t: f64) -> f64 {
        self.scale * fast_pow(1.0 + t, self.kappa)
    }

    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        self.scale * self.kappa * fast_pow(1.0 + t, self.kappa - 1.0)
    }

    /// Time at which the phase reaches `x` (inverse of [`phase`](Self::phase)).
    #[inline]
    pub fn time_at_phase(&self, x: f64) -> f64 {
        fast_pow(x / self.scale, 1.0 / self.kappa) - 1.0
    }
}

/// Finite sum of [`TrigPowerTerm`]s in normal form.
#[derive(Debug, Clone, Default)]
pub struct OscSum {
    terms: Vec<TrigPowerTerm>,
}

impl OscSum {
    pub fn new(terms: impl IntoIterator<Item = TrigPowerTerm>) -> Self {
        let mut s = Self::default();
        for t in terms {
            s.push(t);
        }
        s
    }

    pub fn terms(&self) -> &[TrigPowerTerm] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_pure_power(&self) -> bool {
        self.terms.iter().all(|t| t.scale == 0.0)
    }

    /// Insert a term, normalizing sign conventions and merging exact
    /// duplicates of the (trig, scale, kappa, power) key.
    pub fn push(&mut self, mut term: TrigPowerTerm) {
        if term.scale < 0.0 {
            term.scale = -term.scale;
            if term.trig == Trig::Sin {
                term.amp = -term.amp;
            }
        }
        if term.scale == 0.0 {
            if term.trig == Trig::Sin {
                return; // sin(0) ≡ 0
            }
            term.kappa = 1.0;
        }
        if term.amp == 0.0 {
            return;
        }
        for existing in &mut self.terms {
            if existing.trig == term.trig
                && existing.scale == term.scale
                && existing.kappa == term.kappa
                && existing.power == term.power
            {
                existing.amp += term.amp;
                return;
            }
        }
        self.terms.push(term);
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(t)).sum()
    }

    /// `∫_t^∞` of the sum; `Err` if any term's tail diverges.
    pub fn tail(&self, t: f64) -> Result<(f64, f64)> {
        let mut v = 0.0;
        let mut e = 0.0;
        for term in &self.terms {
            let (tv, te) = term.tail(t)?;
            v += tv;
            e += te;
        }
        Ok((v, e))
    }

    /// `∫_t^∞ ∫_s^∞` of the sum.
    pub fn nested_tail(&self, t: f64) -> Result<(f64, f64)> {
        let mut v = 0.0;
        let mut e = 0.0;
        for term in &self.terms {
            let (tv, te) = term.nested_tail(t)?;
            v += tv;
            e += te;
        }
        Ok((v, e))
    }

    /// Cheap divergence screen: `Ok` iff every term tail converges.
    pub fn check_tail_convergence(&self) -> Result<()> {
        for term in &self.terms {
            if term.amp == 0.0 {
                continue;
            }
            if term.scale == 0.0 {
                if term.trig == Trig::Cos && term.power >= -1.0 {
                    return Err(Error::DivergenceSuspected {
                        reason: format!(
                            "pure power exponent {} ≥ -1: tail integral diverges",
                            term.power
                        ),
                        partial: term.amp.signum() * f64::INFINITY,
                    });
                }
            } else if (term.power + 1.0) / term.kappa - 1.0 >= 0.0 {
                return Err(Error::DivergenceSuspected {
                    reason: format!(
                        "oscillatory term (power {}, phase exponent {}) does not decay after \
                         integration",
                        term.power, term.kappa
                    ),
                    partial: f64::NAN,
                });
            }
        }
        Ok(())
    }

    /// Symbolic tail: available only for pure-power sums with all exponents
    /// < −1, where `∫_t^∞` stays inside the family.
    pub fn tail_fn(&self) -> Option<OscSum> {
        if !self.is_pure_power() {
            return None;
        }
        let mut out = OscSum::default();
        for term in &self.terms {
            if term.power >= -1.0 {
                return None;
            }
            out.push(TrigPowerTerm::power_term(
                term.amp / (-term.power - 1.0),
                term.power + 1.0,
            ));
        }
        Some(out)
    }

    /// `∫_0^t` for pure-power sums (closed form); `None` otherwise.
    pub fn head_integral(&self, t: f64) -> Option<f64> {
        if !self.is_pure_power() {
            return None;
        }
        let mut v = 0.0;
        for term in &self.terms {
            let q = term.power;
            v += if q == -1.0 {
                term.amp * (1.0 + t).ln()
            } else {
                term.amp * (fast_pow(1.0 + t, q + 1.0) - 1.0) / (q + 1.0)
            };
        }
        Some(v)
    }

    /// Product of two sums; `None` when terms with different phase
    /// exponents would have to multiply (the family is not closed there).
    pub fn mul(&self, other: &OscSum) -> Option<OscSum> {
        let mut out = OscSum::default();
        for a in &self.terms {
            for b in &other.terms {
                if a.scale == 0.0 {
                    out.push(TrigPowerTerm {
                        trig: b.trig,
                        amp: a.amp * b.amp,
                        scale: b.scale,
                        kappa: b.kappa,
                        power: a.power + b.power,
                    });
                } else if b.scale == 0.0 {
                    out.push(TrigPowerTerm {
                        trig: a.trig,
                        amp: a.amp * b.amp,
                        scale: a.scale,
                        kappa: a.kappa,
                        power: a.power + b.power,
                    });
                } else {
                    if a.kappa != b.kappa {
                        return None;
                    }
                    let amp = 0.5 * a.amp * b.amp;
                    let power = a.power + b.power;
                    let diff = a.scale - b.scale;
                    let sum = a.scale + b.scale;
                    let kappa = a.kappa;
                    // Product-to-sum identities.
                    let (t1, s1, t2, s2, sign2) = match (a.trig, b.trig) {
                        (Trig::Cos, Trig::Cos) => (Trig::Cos, diff, Trig::Cos, sum, 1.0),
                        (Trig::Sin, Trig::Sin) => (Trig::Cos, diff, Trig::Cos, sum, -1.0),
                        (Trig::Sin, Trig::Cos) => (Trig::Sin, sum, Trig::Sin, diff, 1.0),
                        (Trig::Cos, Trig::Sin) => (Trig::Sin, sum, Trig::Sin, diff, -1.0),
                    };
                    out.push(TrigPowerTerm { trig: t1, amp, scale: s1, kappa, power });
                    out.push(TrigPowerTerm { trig: t2, amp: sign2 * amp, scale: s2, kappa, power });
                }
            }
        }
        Some(out)
    }

    pub fn square(&self) -> Option<OscSum> {
        self.mul(self)
    }

    pub fn plus(&self, other: &OscSum) -> OscSum {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(*t);
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> OscSum {
        let mut out = OscSum::default();
        for t in &self.terms {
            out.push(TrigPowerTerm { amp: factor * t.amp, ..*t });
        }
        out
    }

    /// Symbolic `∫_t^∞` of the sum by repeated integration by parts, valid
    /// for t ≥ `t_min`, as a new sum plus a remainder envelope `(coef, power)`
    /// bounding everything dropped: |dropped(t)| ≤ coef·(1+t)^power for all
    /// t ≥ t_min.
    ///
    /// Pure powers integrate exactly.  Each oscillatory term trig(c(1+s)^κ)
    /// (1+s)^q obeys ∫_t^∞ sin = [cos·(1+t)^p + p ∫_t^∞ cos·(1+s)^{p−1}]/(cκ)
    /// with p = q−κ+1 (and the analogous cosine rule); the expansion stops
    /// once the continuation's remainder bound at `t_min` is below `floor` or
    /// the asymptotic terms stop contracting.  The bound on a remaining
    /// integral is 2|amp|(1+t)^{q+1−κ}/(cκ), which one further integration by
    /// parts shows to hold whenever q+1 < κ.  Returns `None` only when some
    /// term's tail diverges (pure power ≥ −1, or q+1 ≥ κ).
    pub fn tail_expansion(&self, t_min: f64, floor: f64) -> Option<(OscSum, (f64, f64))> {
        let base_min = 1.0 + t_min;
        let mut out = OscSum::default();
        let mut rem: Option<(f64, f64)> = None;
        let fold_rem = |coef: f64, power: f64, rem: &mut Option<(f64, f64)>| {
            if coef == 0.0 {
                return;
            }
            *rem = Some(match *rem {
                None => (coef, power),
                Some((c0, p0)) => {
                    let p = p0.max(power);
                    (
                        c0 * fast_pow(base_min, p0 - p) + coef * fast_pow(base_min, power - p),
                        p,
                    )
                }
            });
        };
        for term in &self.terms {
            if term.amp == 0.0 {
                continue;
            }
            if term.scale == 0.0 {
                if term.power >= -1.0 {
                    return None;
                }
                out.push(TrigPowerTerm::power_term(
                    term.amp / (-term.power - 1.0),
                    term.power + 1.0,
                ));
                continue;
            }
            if term.power + 1.0 >= term.kappa {
                return None;
            }
            let ck = term.scale * term.kappa;
            let mut trig = term.trig;
            let mut amp = term.amp;
            let mut q = term.power;
            let mut best_bound = f64::INFINITY;
            for _ in 0..48 {
                let p = q - term.kappa + 1.0;
                let bound_here = 2.0 * amp.abs() / ck * fast_pow(base_min, p);
                // Asymptotic divergence onset: stop before the terms grow.
                if bound_here > best_bound {
                    break;
                }
                best_bound = bound_here;
                if amp == 0.0 || bound_here <= floor {
                    break;
                }
                match trig {
                    Trig::Sin => {
                        out.push(TrigPowerTerm::oscillating(
                            Trig::Cos,
                            amp / ck,
                            term.scale,
                            term.kappa,
                            p,
                        ));
                        amp = amp * p / ck;
                        trig = Trig::Cos;
                    }
                    Trig::Cos => {
                        out.push(TrigPowerTerm::oscillating(
                            Trig::Sin,
                            -amp / ck,
                            term.scale,
                            term.kappa,
                            p,
                        ));
                        amp = -amp * p / ck;
                        trig = Trig::Sin;
                    }
                }
                q -= term.kappa;
            }
            fold_rem(
                2.0 * amp.abs() / ck,
                q - term.kappa + 1.0,
                &mut rem,
            );
        }
        Some((out, rem.unwrap_or((0.0, f64::NEG_INFINITY))))
    }

    /// Drop terms whose envelope at `t_ref` is below `floor`.  Returns
    /// `(mass, power)` with the dropped part bounded by
    /// `mass·((1+t)/(1+t_ref))^power` for t ≥ t_ref, where `power` is the
    /// slowest-decaying dropped exponent (`−∞` when nothing was dropped).
    pub fn prune(&mut self, t_ref: f64, floor: f64) -> (f64, f64) {
        let base = 1.0 + t_ref;
        let mut dropped = 0.0;
        let mut max_pow = f64::NEG_INFINITY;
        self.terms.retain(|t| {
            let size = t.amp.abs() * fast_pow(base, t.power);
            if size < floor {
                dropped += size;
                max_pow = max_pow.max(t.power);
                false
            } else {
                true
            }
        });
        (dropped, max_pow)
    }

    /// Envelope `(coef, exponent)` with `|f(t)| ≤ coef (1+t)^exponent` for
    /// all `t ≥ 0`.
    pub fn envelope(&self) -> (f64, f64) {
        if self.terms.is_empty() {
            return (0.0, 0.0);
        }
        let coef = self.terms.iter().map(|t| t.amp.abs()).sum();
        let exponent = self
            .terms
            .iter()
            .map(|t| t.power)
            .fold(f64::NEG_INFINITY, f64::max);
        (coef, exponent)
    }

    /// Fastest oscillation present (largest phase exponent, then largest
    /// scale); `None` for pure-power sums.
    pub fn dominant_oscillation(&self) -> Option<Oscillation> {
        self.terms
            .iter()
            .filter(|t| t.scale > 0.0)
            .max_by(|a, b| {
                (a.kappa, a.scale)
                    .partial_cmp(&(b.kappa, b.scale))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|t| Oscillation { scale: t.scale, kappa: t.kappa })
    }

    /// Largest instantaneous phase rate among the terms at time `t`.
    pub fn max_rate(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.rate(t)).fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Absolute-value integrals of oscillatory functions
// ---------------------------------------------------------------------------

/// `∫_lo^hi |w|` for a smooth `w` with at most a few sign changes:
/// scan for brackets, bisect the zeros, and add the absolute values of the
/// signed integrals of each single-signed piece.
pub fn integrate_abs_smooth<F: FnMut(f64) -> f64>(mut w: F, lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (0.0, 0.0);
    }
    const SCAN: usize = 13;
    let mut cuts = vec![lo];
    let mut prev_x = lo;
    let mut prev_v = w(lo);
    for i in 1..SCAN {
        let x = lo + (hi - lo) * i as f64 / (SCAN - 1) as f64;
        let v = w(x);
        if prev_v == 0.0 {
            // Exact zero on a sample: already a valid cut point.
            if *cuts.last().unwrap() != prev_x {
                cuts.push(prev_x);
            }
        } else if v != 0.0 && (prev_v > 0.0) != (v > 0.0) {
            cuts.push(bisect_root(&mut w, prev_x, x));
        }
        prev_x = x;
        prev_v = v;
    }
    cuts.push(hi);
    let mut total = 0.0;
    let mut err = 0.0;
    for pair in cuts.windows(2) {
        if pair[1] <= pair[0] {
            continue;
        }
        let (v, e) = gk15(&mut w, pair[0], pair[1]);
        total += v.abs();
        err += e;
    }
    (total, err)
}

/// Far-field envelope model `|g(s)| ≈ amp (1+s)^power |cos(phase + const)|`,
/// valid once the phase passes [`X_FAR`]; `rel_err` is the caller's bound on
/// the model's relative accuracy there.
#[derive(Debug, Clone, Copy)]
pub struct FarField {
    pub amp: f64,
    pub power: f64,
    pub rel_err: f64,
}

/// Head/tail columns of an absolute-value integral:
/// `head[i] = ∫_{nodes[0]}^{nodes[i]}` and `tail[i] = ∫_{nodes[i]}^∞` of
/// `|g|` (or `|expm1(a·g)|` when `expm1_factor = Some(a)`).
#[derive(Debug, Clone)]
pub struct AbsProfile {
    pub head: Vec<f64>,
    pub head_err: Vec<f64>,
    pub tail: Vec<f64>,
    pub tail_err: Vec<f64>,
}

/// Build an [`AbsProfile`] for oscillatory `g` on the given (ascending)
/// nodes.
///
/// Near range (phase below [`X_FAR`]): half-wave chunks with bisected sign
/// splits.  Far range: the mean-|cos| model `∫_t^∞ |g| ≈ (2/π) amp
/// (1+t)^{power+1}/(−power−1)`, with the model error folded into the error
/// columns.  Fails with `DivergenceSuspected` when `power ≥ −1`.
pub fn abs_profile<F: FnMut(f64) -> f64>(
    mut g: F,
    osc: Oscillation,
    far: FarField,
    expm1_factor: Option<f64>,
    nodes: &[f64],
) -> Result<AbsProfile> {
    assert!(!nodes.is_empty(), "abs_profile needs at least one node");
    assert!(
        nodes.windows(2).all(|w| w[0] < w[1]),
        "abs_profile nodes must be strictly increasing"
    );
    let amp_eff = far.amp * expm1_factor.map_or(1.0, f64::abs);
    let p = far.power;
    if p >= -1.0 && amp_eff != 0.0 {
        return Err(Error::DivergenceSuspected {
            reason: format!(
                "absolute tail of an envelope with exponent {p} ≥ -1 diverges"
            ),
            partial: f64::INFINITY,
        });
    }
    let two_over_pi = std::f64::consts::FRAC_2_PI;
    let far_tail = |t: f64| two_over_pi * amp_eff.abs() * fast_pow(1.0 + t, p + 1.0) / (-p - 1.0);
    let far_err = |t: f64| {
        let base = far_tail(t) * far.rel_err;
        // For |expm1(a g)| the linearization drops an O((a g)²/2) term.
        let quad = match expm1_factor {
            Some(a) if 2.0 * p + 1.0 < 0.0 => {
                0.25 * (a * far.amp) * (a * far.amp) * fast_pow(1.0 + t, 2.0 * p + 1.0)
                    / (-2.0 * p - 1.0)
            }
            _ => 0.0,
        };
        base + quad
    };

    let mut w = |s: f64| match expm1_factor {
        None => g(s),
        Some(a) => (a * g(s)).exp_m1(),
    };

    let t0 = nodes[0];
    let s_far = if osc.phase(t0) >= X_FAR {
        t0
    } else {
        osc.time_at_phase(X_FAR)
    };

    // Boundaries: half-wave chunk edges up to s_far, merged with the nodes
    // that fall in the near range.
    let pi = std::f64::consts::PI;
    let mut bounds: Vec<f64> = vec![t0];
    if s_far > t0 {
        let mut m = (osc.phase(t0) / pi).floor() + 1.0;
        loop {
            let x = m * pi;
            if x >= X_FAR {
                break;
            }
            let s = osc.time_at_phase(x);
            if s > t0 && s < s_far {
                bounds.push(s);
            }
            m += 1.0;
        }
        bounds.extend(nodes.iter().copied().filter(|&t| t > t0 && t < s_far));
        bounds.push(s_far);
        bounds.sort_by(f64::total_cmp);
        bounds.dedup_by(|a, b| *a <= *b + 1e-14 * (1.0 + b.abs()));
    }

    // Sweep once, accumulating the running integral and capturing it at
    // every node in the near range.
    let mut cum = 0.0_f64;
    let mut cum_err = 0.0_f64;
    let mut head = vec![0.0; nodes.len()];
    let mut head_err = vec![0.0; nodes.len()];
    let mut node_idx = 0;
    while node_idx < nodes.len() && nodes[node_idx] <= t0 {
        node_idx += 1; // head at the first node(s) ≤ t0 is zero
    }
    for pair in bounds.windows(2) {
        let (v, e) = integrate_abs_smooth(&mut w, pair[0], pair[1]);
        cum += v;
        cum_err += e;
        while node_idx < nodes.len()
            && nodes[node_idx] <= pair[1] + 1e-14 * (1.0 + pair[1].abs())
        {
            head[node_idx] = cum;
            head_err[node_idx] = cum_err;
            node_idx += 1;
        }
    }
    let total = cum + far_tail(s_far.max(t0));
    let total_far_err = far_err(s_far.max(t0));

    // Nodes beyond the far switch use the model directly.
    for i in node_idx..nodes.len() {
        let t = nodes[i];
        head[i] = cum + (far_tail(s_far) - far_tail(t));
        head_err[i] = cum_err + far_err(s_far) + far_err(t);
    }

    let mut tail = vec![0.0; nodes.len()];
    let mut tail_err = vec![0.0; nodes.len()];
    for i in 0..nodes.len() {
        let t = nodes[i];
        if t >= s_far {
            tail[i] = far_tail(t);
            tail_err[i] = far_err(t);
        } else {
            tail[i] = (total - head[i]).max(0.0);
            tail_err[i] = (cum_err - head_err[i]).max(0.0) + total_far_err;
        }
    }
    Ok(AbsProfile { head, head_err, tail, tail_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::composite_simpson;
    use approx::assert_relative_eq;

    /// d/dx J(x, r) = −trig(x) x^r: finite-difference check of the J engine
    /// across both evaluation regimes.
    #[test]
    fn j_derivative_identity() {
        for &trig in &[Trig::Sin, Trig::Cos] {
            for &r in &[-0.4, -1.0, -1.5, -2.5, -4.0] {
                for &x in &[0.7_f64, 3.0, 12.0, 35.0, 55.0, 300.0] {
                    let h = 1e-5 * x.max(1.0);
                    let (jp, _) = j_trig(trig, x + h, r);
                    let (jm, _) = j_trig(trig, x - h, r);
                    let fd = (jp - jm) / (2.0 * h);
                    let exact = -trig.apply(x) * x.powf(r);
                    assert!(
                        (fd - exact).abs() < 2e-7 * (1.0 + exact.abs()),
                        "trig {trig:?}, x {x}, r {r}: fd {fd} vs {exact}"
                    );
                }
            }
        }
    }

    /// J_sin(π, −1) = π/2 − Si(π): the Dirichlet integral ∫_0^∞ sin(u)/u = π/2
    /// is exact, and Si(π) comes from an independent adaptive rule on the
    /// compact (smooth, non-oscillatory) piece.
    #[test]
    fn j_matches_sine_integral_constant() {
        let (si_pi, _) = adaptive_integral(
            |u| if u == 0.0 { 1.0 } else { u.sin() / u },
            0.0,
            std::f64::consts::PI,
            1e-13,
            4000,
        )
        .unwrap();
        let (v, e) = j_trig(Trig::Sin, std::f64::consts::PI, -1.0);
        assert!(
            (v - (std::f64::consts::FRAC_PI_2 - si_pi)).abs() < 1e-12,
            "value {v}, err {e}, Si(pi) {si_pi}"
        );
    }

    /// Continuity of J across the asymptotic/chunked threshold: the two
    /// probes differ by the genuine increment |J′|·Δx = |trig·x^r|·Δx plus
    /// the reported evaluation errors, nothing more.
    #[test]
    fn j_is_continuous_across_regime_switch() {
        for &r in &[-0.5, -1.5, -3.0] {
            let (below, e1) = j_trig(Trig::Cos, X_ASYM - 1e-9, r);
            let (above, e2) = j_trig(Trig::Cos, X_ASYM + 1e-9, r);
            let slope_term = 2e-9 * X_ASYM.powf(r);
            assert!(
                (below - above).abs() < 1e-11 + 10.0 * (e1 + e2) + 2.0 * slope_term,
                "r {r}: {below} vs {above}"
            );
        }
    }

    #[test]
    fn pure_power_tail_closed_form() {
        let term = TrigPowerTerm::power_term(3.0, -2.5);
        let (v, _) = term.tail(4.0).unwrap();
        assert_relative_eq!(v, 3.0 * 5.0_f64.powf(-1.5) / 1.5, max_relative = 1e-14);
        // Non-convergent exponent is rejected.
        assert!(TrigPowerTerm::power_term(1.0, -1.0).tail(0.0).is_err());
    }

    /// d/dt tail(t) = −term(t): the fundamental theorem of calculus as an
    /// oracle for the oscillatory tail transform.
    #[test]
    fn tail_derivative_identity() {
        let term = TrigPowerTerm::oscillating(Trig::Cos, 2.0, 1.0, 2.0, -1.0);
        for &t in &[0.0, 0.5, 2.0, 7.0, 30.0, 200.0] {
            let h = 1e-5 / (1.0 + t);
            let (p, _) = term.tail(t + h).unwrap();
            let (m, _) = term.tail(t - h).unwrap();
            let fd = (p - m) / (2.0 * h);
            let exact = -term.eval(t);
            assert!(
                (fd - exact).abs() < 1e-6 * (1.0 + exact.abs()),
                "t {t}: fd {fd} vs {exact}"
            );
        }
    }

    #[test]
    fn nested_tail_matches_pure_power_closed_form() {
        // ∫_t^∞ ∫_s^∞ C (1+σ)^q dσ ds = C (1+t)^{q+2} / ((q+1)(q+2)).
        let term = TrigPowerTerm::power_term(5.0, -3.5);
        let (v, _) = term.nested_tail(2.0).unwrap();
        let exact = 5.0 * 3.0_f64.powf(-1.5) / (2.5 * 1.5);
        assert_relative_eq!(v, exact, max_relative = 1e-13);
    }

    #[test]
    fn product_to_sum_preserves_pointwise_values() {
        let a = OscSum::new([
            TrigPowerTerm::oscillating(Trig::Cos, 1.3, 1.0, 2.0, -0.5),
            TrigPowerTerm::oscillating(Trig::Sin, -0.4, 1.0, 2.0, -1.5),
            TrigPowerTerm::power_term(0.7, -2.0),
        ]);
        let b = OscSum::new([
            TrigPowerTerm::oscillating(Trig::Sin, 0.9, 1.0, 2.0, -1.0),
            TrigPowerTerm::power_term(-0.2, -0.5),
        ]);
        let prod = a.mul(&b).expect("same phase exponent");
        for &t in &[0.0, 0.3, 1.7, 9.0, 42.0] {
            assert_relative_eq!(
                prod.eval(t),
                a.eval(t) * b.eval(t),
                max_relative = 1e-12,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn product_with_mismatched_phase_exponent_is_rejected() {
        let a = OscSum::new([TrigPowerTerm::oscillating(Trig::Cos, 1.0, 1.0, 2.0, 0.0)]);
        let b = OscSum::new([TrigPowerTerm::oscillating(Trig::Cos, 1.0, 1.0, 1.5, 0.0)]);
        assert!(a.mul(&b).is_none());
    }

    #[test]
    fn symbolic_tail_of_pure_powers() {
        let s = OscSum::new([TrigPowerTerm::power_term(4.0, -3.0)]);
        let tail = s.tail_fn().unwrap();
        for &t in &[0.0, 1.0, 10.0] {
            let (direct, _) = s.tail(t).unwrap();
            assert_relative_eq!(tail.eval(t), direct, max_relative = 1e-14);
        }
        // Oscillatory sums have no symbolic tail.
        let o = OscSum::new([TrigPowerTerm::oscillating(Trig::Cos, 1.0, 1.0, 2.0, -1.0)]);
        assert!(o.tail_fn().is_none());
    }

    #[test]
    fn integrate_abs_handles_sign_changes() {
        // ∫_0^{2π} |sin| = 4.
        let (v, e) = integrate_abs_smooth(f64::sin, 0.0, 2.0 * std::f64::consts::PI);
        assert_relative_eq!(v, 4.0, max_relative = 1e-10);
        assert!(e < 1e-8);
    }

    #[test]
    fn abs_profile_matches_brute_force_simpson() {
        // g(s) = cos((1+s)²) (1+s)^{-2}: head values against a dense Simpson
        // rule on |g| (independent of the chunked machinery).
        let g = |s: f64| ((1.0 + s) * (1.0 + s)).cos() / ((1.0 + s) * (1.0 + s));
        let osc = Oscillation { scale: 1.0, kappa: 2.0 };
        let far = FarField { amp: 1.0, power: -2.0, rel_err: 1e-3 };
        let nodes = [0.0, 1.0, 3.0, 8.0];
        let prof = abs_profile(g, osc, far, None, &nodes).unwrap();
        for (i, &t) in nodes.iter().enumerate().skip(1) {
            let brute = composite_simpson(|s| g(s).abs(), 0.0, t, 200_000);
            assert!(
                (prof.head[i] - brute).abs() < 5e-7,
                "head at {t}: {} vs {brute}",
                prof.head[i]
            );
        }
        // Head + tail is consistent: tail(0) − tail(3) = head(3).
        assert!(
            ((prof.tail[0] - prof.tail[2]) - prof.head[2]).abs()
                < prof.tail_err[0] + prof.tail_err[2] + prof.head_err[2] + 1e-12
        );
    }

    #[test]
    fn abs_profile_far_model_tracks_envelope_decay() {
        // For |cos((1+s)²)|·(1+s)^{-3}: ∫_t^∞ ≈ (2/π)(1+t)^{-2}/2 once the
        // phase is large; check the far columns against that law.
        let g = |s: f64| ((1.0 + s) * (1.0 + s)).cos() * (1.0 + s).powi(-3);
        let osc = Oscillation { scale: 1.0, kappa: 2.0 };
        let far = FarField { amp: 1.0, power: -3.0, rel_err: 2e-3 };
        let nodes = [0.0, 100.0, 400.0];
        let prof = abs_profile(g, osc, far, None, &nodes).unwrap();
        for (i, &t) in nodes.iter().enumerate().skip(1) {
            let model = std::f64::consts::FRAC_2_PI * (1.0 + t).powf(-2.0) / 2.0;
            assert_relative_eq!(prof.tail[i], model, max_relative = 1e-6);
        }
    }

    #[test]
    fn abs_profile_rejects_non_decaying_envelopes() {
        let r = abs_profile(
            |s: f64| (1.0 + s).recip() * ((1.0 + s) * (1.0 + s)).cos(),
            Oscillation { scale: 1.0, kappa: 2.0 },
            FarField { amp: 1.0, power: -1.0, rel_err: 1e-3 },
            None,
            &[0.0, 1.0],
        );
        assert!(matches!(r, Err(Error::DivergenceSuspected { .. })));
    }
}
