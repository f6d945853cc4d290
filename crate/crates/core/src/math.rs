//! Shared numerical kernels: Gauss–Kronrod panel quadrature, a global
//! adaptive integrator, composite Simpson (kept separate as an oracle),
//! monotone cubic interpolation, log–log regression, alternating-series
//! acceleration, and a tiny deterministic generator for probe points.
//!
//! Everything here is potential-agnostic; the domain modules build their
//! oscillation-aware strategies on top of these primitives.

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Gauss–Kronrod 15-point rule
// ---------------------------------------------------------------------------

/// Kronrod abscissae for the 15-point rule on [-1, 1] (positive half).
const XGK15: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// Weights of the embedded 7-point Gauss rule.
const WG7: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Weights of the 15-point Kronrod rule.
const WGK15: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Conservative rescaling of the raw Gauss-vs-Kronrod difference into an
/// error estimate, following the classic QUADPACK heuristic.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// 15-point Gauss–Kronrod estimate of `∫_a^b f` with an error estimate.
///
/// Exact (up to roundoff) for polynomials of degree ≤ 22; cost is 15
/// evaluations of `f`.
pub fn gk15<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_gauss = 0.0;
    let mut res_kronrod = f_center * WGK15[7];
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [0.0_f64; 7];
    let mut fv2 = [0.0_f64; 7];

    for (j, wg) in WG7.iter().enumerate().take(3) {
        let jtw = 2 * j + 1;
        let x = half * XGK15[jtw];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_gauss += wg * (f1 + f2);
        res_kronrod += WGK15[jtw] * (f1 + f2);
        res_abs += WGK15[jtw] * (f1.abs() + f2.abs());
    }
    res_gauss += WG7[3] * f_center;

    for j in 0..4 {
        let jtw = 2 * j;
        let x = half * XGK15[jtw];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_kronrod += WGK15[jtw] * (f1 + f2);
        res_abs += WGK15[jtw] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK15[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK15[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let raw_err = (res_kronrod - res_gauss) * half;
    (
        res_kronrod * half,
        rescale_error(raw_err, res_abs * half.abs(), res_asc * half.abs()),
    )
}

/// Worst-panel-first adaptive integration of `∫_a^b f` to absolute
/// tolerance `abs_tol`.
///
/// Returns `(value, error_estimate)`.  Fails with `QuadratureBudget` if more
/// than `max_panels` subdivisions are needed.
pub fn adaptive_integral<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    struct Panel {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (val, err) = gk15(&mut f, a, b);
    if !val.is_finite() {
        return Err(Error::Domain(format!(
            "integrand produced a non-finite value on [{a:.6e}, {b:.6e}]"
        )));
    }
    let mut panels = vec![Panel { a, b, val, err }];
    let mut total_err: f64 = err;
    let mut n_splits = 0usize;

    while total_err > abs_tol {
        // Find the current worst panel.
        let (worst_idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| p.err.total_cmp(&q.err))
            .expect("panel list is never empty");
        let worst = panels.swap_remove(worst_idx);
        total_err -= worst.err;

        let width = worst.b - worst.a;
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // Panel narrower than f64 resolution: keep its estimate as is.
            total_err += worst.err;
            panels.push(worst);
            break;
        }
        n_splits += 1;
        if n_splits > max_panels {
            return Err(Error::QuadratureBudget(format!(
                "more than {max_panels} panels needed on [{a:.6e}, {b:.6e}] \
                 for tolerance {abs_tol:.3e} (width {width:.3e} still failing)"
            )));
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = gk15(&mut f, lo, hi);
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "integrand produced a non-finite value on [{lo:.6e}, {hi:.6e}]"
                )));
            }
            total_err += e;
            panels.push(Panel { a: lo, b: hi, val: v, err: e });
        }
    }

    // Compensated summation: panel counts can reach tens of thousands.
    let mut sum = 0.0;
    let mut comp = 0.0;
    for p in &panels {
        let y = p.val - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok((sum, total_err))
}

/// Composite Simpson rule with `panels` subintervals (must be even and ≥ 2).
///
/// Deliberately naive: this is the independent oracle the adaptive
/// machinery is checked against, so it shares no code with it.
pub fn composite_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 2 && panels % 2 == 0, "Simpson needs an even panel count");
    let h = (b - a) / panels as f64;
    let mut odd = 0.0;
    let mut comp_odd = 0.0;
    let mut even = 0.0;
    let mut comp_even = 0.0;
    for i in 1..panels {
        let v = f(a + h * i as f64);
        if i % 2 == 1 {
            let y = v - comp_odd;
            let t = odd + y;
            comp_odd = (t - odd) - y;
            odd = t;
        } else {
            let y = v - comp_even;
            let t = even + y;
            comp_even = (t - even) - y;
            even = t;
        }
    }
    (f(a) + f(b) + 4.0 * odd + 2.0 * even) * h / 3.0
}

// ---------------------------------------------------------------------------
// Monotone cubic (Fritsch–Carlson) interpolation
// ---------------------------------------------------------------------------

/// Shape-preserving piecewise-cubic interpolant.
///
/// Slopes follow the Fritsch–Carlson limiter, so the interpolant never
/// overshoots the data: monotone data produce a monotone curve.  Evaluation
/// clamps to the endpoint values outside the knot range.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    /// Build from strictly increasing `xs` (checked) and same-length `ys`.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch(format!(
                "interpolation knots: {} abscissae vs {} ordinates",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidParameter(
                "interpolation needs at least two knots".into(),
            ));
        }
        for w in xs.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "interpolation abscissae must be strictly increasing (got {} then {})",
                    w[0], w[1]
                )));
            }
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "interpolation knots must be finite".into(),
            ));
        }

        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        let mut ds = vec![0.0; n];
        if n == 2 {
            ds[0] = delta[0];
            ds[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    ds[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    ds[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            ds[0] = Self::edge_slope(h[0], h[1], delta[0], delta[1]);
            ds[n - 1] = Self::edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { xs, ys, ds })
    }

    /// One-sided three-point slope with the standard monotonicity clamps.
    fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 < 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    }

    /// Evaluate at `x`; clamps to the end knots outside the data range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.ys[i] + h * h10 * self.ds[i] + h01 * self.ys[i + 1] + h * h11 * self.ds[i + 1]
    }

    /// Knot abscissae.
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// Knot ordinates.
    pub fn ys(&self) -> &[f64] {
        &self.ys
    }
}

// ---------------------------------------------------------------------------
// Least squares on (x, y) pairs
// ---------------------------------------------------------------------------

/// Ordinary least-squares line fit summary.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, with the convention r² = 1 for a fit
    /// whose residuals vanish (including the degenerate all-equal-y case).
    pub r2: f64,
    pub max_abs_residual: f64,
}

/// Least-squares straight line through `(xs, ys)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(format!(
            "fit data: {} abscissae vs {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "line fit needs at least two points".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "line fit abscissae are all identical".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut max_res = 0.0_f64;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        ss_res += r * r;
        max_res = max_res.max(r.abs());
    }
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).max(0.0) };
    Ok(LineFit { slope, intercept, r2, max_abs_residual: max_res })
}

/// Fit `|v| ≈ C (1+t)^p` by regressing `ln |v|` on `ln(1+t)`.
///
/// Points with `|v|` = 0 or non-finite are skipped; at least two usable
/// points are required.  Returns the fit in log–log coordinates: `slope` is
/// the exponent `p` and `exp(intercept)` the prefactor `C`.
pub fn fit_power_law(ts: &[f64], vals: &[f64]) -> Result<LineFit> {
    if ts.len() != vals.len() {
        return Err(Error::LengthMismatch(format!(
            "power-law fit: {} times vs {} values",
            ts.len(),
            vals.len()
        )));
    }
    let mut xs = Vec::with_capacity(ts.len());
    let mut ys = Vec::with_capacity(ts.len());
    for (&t, &v) in ts.iter().zip(vals) {
        let a = v.abs();
        if a.is_finite() && a > 0.0 && t > -1.0 {
            xs.push((1.0 + t).ln());
            ys.push(a.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "power-law fit needs at least two nonzero finite values".into(),
        ));
    }
    fit_line(&xs, &ys)
}

// ---------------------------------------------------------------------------
// Alternating-series acceleration
// ---------------------------------------------------------------------------

/// Repeated-averaging (Euler-transform style) extrapolation of a sequence of
/// partial sums of an alternating series.
///
/// Returns `(estimate, error_estimate)`; needs at least 4 partial sums.
pub fn euler_average(partials: &[f64]) -> Option<(f64, f64)> {
    if partials.len() < 4 {
        return None;
    }
    let take = partials.len().min(14);
    let mut row: Vec<f64> = partials[partials.len() - take..].to_vec();
    let mut prev_last = *row.last().unwrap();
    while row.len() > 1 {
        for i in 0..row.len() - 1 {
            row[i] = 0.5 * (row[i] + row[i + 1]);
        }
        row.pop();
        if row.len() == 1 {
            let est = row[0];
            return Some((est, (est - prev_last).abs() * 2.0 + f64::EPSILON * est.abs()));
        }
        prev_last = *row.last().unwrap();
    }
    None
}

// ---------------------------------------------------------------------------
// Grids and probe generators
// ---------------------------------------------------------------------------

/// `n` points with `1 + t` geometrically spaced between `1 + a` and `1 + b`,
/// endpoints exact.
pub fn log1p_spaced(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if !(a >= 0.0) || !(b > a) || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "log-spaced grid needs 0 ≤ a < b and n ≥ 2 (got a={a}, b={b}, n={n})"
        )));
    }
    let la = (1.0 + a).ln();
    let lb = (1.0 + b).ln();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = i as f64 / (n - 1) as f64;
        out.push((la + f * (lb - la)).exp() - 1.0);
    }
    out[0] = a;
    let last = out.last_mut().unwrap();
    *last = b;
    Ok(out)
}

/// Deterministic 64-bit generator (SplitMix64) for reproducible probe points
/// in diagnostics and tests.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Fast power for the exponents that appear in hot loops; falls back to
/// `powf` for the general case.
#[inline]
pub fn fast_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 1.0 {
        x
    } else if p == 0.0 {
        1.0
    } else if p == -1.0 {
        1.0 / x
    } else if p == -2.0 {
        1.0 / (x * x)
    } else if p == -3.0 {
        1.0 / (x * x * x)
    } else if p == 3.0 {
        x * x * x
    } else if p == -4.0 {
        let x2 = x * x;
        1.0 / (x2 * x2)
    } else if p == 0.5 {
        x.sqrt()
    } else {
        x.powf(p)
    }
}

/// Bisection for a root of `f` in `[lo, hi]`, assuming a sign change.
///
/// Runs a fixed 60 iterations, enough to reach f64 resolution on any
/// bracketing interval arising here.
pub fn bisect_root<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return mid;
        }
        if (flo > 0.0) == (fmid > 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gk15_is_exact_on_high_degree_polynomials() {
        // Degree 22 is the highest the 15-point Kronrod rule integrates exactly.
        let (v, e) = gk15(|x: f64| x.powi(7), 0.0, 1.0);
        assert_relative_eq!(v, 0.125, max_relative = 1e-14);
        assert!(e < 1e-12);
        let (v, _) = gk15(|x: f64| 23.0 * x.powi(22), -1.0, 1.0);
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn gk15_integrates_sine_half_wave() {
        let (v, e) = gk15(f64::sin, 0.0, std::f64::consts::PI);
        assert_relative_eq!(v, 2.0, max_relative = 1e-13);
        assert!(e < 1e-10);
    }

    #[test]
    fn adaptive_integral_handles_end_point_steepness() {
        // ∫_0^1 1/√x = 2; integrand is steep but finite at all sample points.
        let (v, e) = adaptive_integral(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-9, 20_000).unwrap();
        assert!((v - 2.0).abs() < 5e-9, "value {v}, err {e}");
    }

    #[test]
    fn adaptive_integral_reports_budget_exhaustion() {
        let r = adaptive_integral(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-13, 8);
        assert!(matches!(r, Err(Error::QuadratureBudget(_))));
    }

    #[test]
    fn simpson_is_exact_on_cubics_with_two_panels() {
        let v = composite_simpson(|x| x * x, 0.0, 1.0, 2);
        assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-15);
        let v = composite_simpson(|x| x * x * x, 0.0, 2.0, 2);
        assert_relative_eq!(v, 4.0, max_relative = 1e-15);
    }

    #[test]
    fn simpson_converges_on_sine() {
        let v = composite_simpson(f64::sin, 0.0, std::f64::consts::PI, 1000);
        assert_relative_eq!(v, 2.0, max_relative = 1e-11);
    }

    #[test]
    fn monotone_cubic_reproduces_knots_and_preserves_monotonicity() {
        let xs = vec![0.0, 1.0, 2.0, 4.0, 8.0];
        let ys = vec![0.0, 0.5, 0.6, 2.0, 2.1];
        let m = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_relative_eq!(m.eval(*x), *y, max_relative = 1e-14);
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=800 {
            let x = 8.0 * i as f64 / 800.0;
            let v = m.eval(x);
            assert!(v >= prev - 1e-12, "not monotone at x={x}: {v} < {prev}");
            prev = v;
        }
    }

    #[test]
    fn monotone_cubic_is_exact_on_linear_data() {
        let xs = vec![0.0, 0.3, 1.1, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let m = MonotoneCubic::new(xs, ys).unwrap();
        assert_relative_eq!(m.eval(0.7), 1.1, max_relative = 1e-13);
        // Clamping outside the knot range.
        assert_relative_eq!(m.eval(-5.0), -1.0, max_relative = 1e-13);
        assert_relative_eq!(m.eval(99.0), 5.0, max_relative = 1e-13);
    }

    #[test]
    fn monotone_cubic_rejects_bad_knots() {
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0], vec![1.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn fit_line_recovers_exact_line_with_unit_r2() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -2.0 * x + 0.75).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert_relative_eq!(f.slope, -2.0, max_relative = 1e-12);
        assert_relative_eq!(f.intercept, 0.75, max_relative = 1e-12);
        assert_eq!(f.r2, 1.0);
        assert!(f.max_abs_residual < 1e-12);
    }

    #[test]
    fn fit_power_law_recovers_exponent() {
        let ts: Vec<f64> = (0..40).map(|i| (i as f64 * 0.2).exp() - 1.0).collect();
        let vals: Vec<f64> = ts.iter().map(|t| 3.5 * (1.0 + t).powf(-1.75)).collect();
        let f = fit_power_law(&ts, &vals).unwrap();
        assert_relative_eq!(f.slope, -1.75, max_relative = 1e-10);
        assert_relative_eq!(f.intercept.exp(), 3.5, max_relative = 1e-10);
    }

    #[test]
    fn euler_average_accelerates_alternating_series() {
        // ln 2 = Σ (-1)^{k+1}/k; raw partial sums converge like 1/n.
        let mut partials = Vec::new();
        let mut s = 0.0;
        for k in 1..=20 {
            s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            partials.push(s);
        }
        let (est, err) = euler_average(&partials).unwrap();
        assert!((est - std::f64::consts::LN_2).abs() < 1e-9, "est {est}, err {err}");
    }

    #[test]
    fn log1p_grid_hits_endpoints_exactly() {
        let g = log1p_spaced(0.0, 1.0e4, 200).unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[199], 1.0e4);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn splitmix_is_deterministic_and_in_range() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            let x = a.next_f64();
            assert_eq!(x, b.next_f64());
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn fast_pow_matches_powf() {
        for &p in &[2.0, 1.0, 0.0, -1.0, -2.0, -3.0, 3.0, -4.0, 0.5, 1.7, -2.3] {
            for &x in &[0.5, 1.0, 3.7, 104.2] {
                assert_relative_eq!(fast_pow(x, p), x.powf(p), max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn bisect_root_finds_sign_change() {
        let r = bisect_root(|x| x * x - 2.0, 0.0, 2.0);
        assert_relative_eq!(r, std::f64::consts::SQRT_2, max_relative = 1e-14);
    }
}
