//! Adaptive Gauss-Kronrod (7/15) integration for smooth, positive,
//! single-peaked integrands, with a doubling-trapezoid fallback.
//!
//! Integrals are vector valued so the normaliser and the first moments of a
//! posterior share one set of function evaluations.

use std::fmt;

// 15-point Kronrod abscissae (non-negative half) and weights; the odd-indexed
// abscissae are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Equal panels each breakpoint segment starts with.
    pub initial_panels: usize,
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// Log-integrand drop (from the peak) where the support is truncated.
    pub log_cutoff: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            initial_panels: 8,
            rel_tol: 1e-8,
            max_intervals: 4000,
            log_cutoff: 745.0,
        }
    }
}

impl QuadConfig {
    /// Same tolerances with twice the starting nodes.
    pub fn doubled(&self) -> Self {
        QuadConfig {
            initial_panels: self.initial_panels * 2,
            ..*self
        }
    }
}

/// Diagnostics for an integral that missed its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadError {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    pub error: f64,
    pub evaluations: usize,
    pub reason: &'static str,
}

impl fmt::Display for QuadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} on [{:e}, {:e}]: estimate {:e}, error {:e} after {} evaluations",
            self.reason, self.lo, self.hi, self.estimate, self.error, self.evaluations
        )
    }
}

impl std::error::Error for QuadError {}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadOutput<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
}

fn gk15<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, a: f64, b: f64) -> Panel<N> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    for c in 0..N {
        kron[c] = fc[c] * WGK[7];
        gauss[c] = fc[c] * WG[3];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for c in 0..N {
            let s = f1[c] + f2[c];
            kron[c] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[c] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for c in 0..N {
        value[c] = kron[c] * half;
        error[c] = ((kron[c] - gauss[c]) * half).abs();
    }
    Panel { a, b, value, error }
}

fn totals<const N: usize>(panels: &[Panel<N>]) -> ([f64; N], [f64; N]) {
    let mut v = [0.0; N];
    let mut e = [0.0; N];
    for p in panels {
        for c in 0..N {
            v[c] += p.value[c];
            e[c] += p.error[c];
        }
    }
    (v, e)
}

fn converged<const N: usize>(v: &[f64; N], e: &[f64; N], rel_tol: f64) -> bool {
    (0..N).all(|c| e[c] <= rel_tol * v[c].abs() || e[c] <= f64::MIN_POSITIVE)
}

/// Integrate `f` over the segments delimited by sorted `breakpoints`.
pub fn integrate<const N: usize, F>(
    f: F,
    breakpoints: &[f64],
    cfg: &QuadConfig,
) -> Result<QuadOutput<N>, QuadError>
where
    F: Fn(f64) -> [f64; N],
{
    assert!(breakpoints.len() >= 2, "need at least one segment");
    let lo = breakpoints[0];
    let hi = *breakpoints.last().unwrap();
    let panels_per = cfg.initial_panels.max(1);
    let mut panels: Vec<Panel<N>> = Vec::new();
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let step = (b - a) / panels_per as f64;
        for k in 0..panels_per {
            let pa = a + step * k as f64;
            let pb = if k + 1 == panels_per { b } else { pa + step };
            panels.push(gk15(&f, pa, pb));
        }
    }
    if panels.is_empty() {
        return Ok(QuadOutput {
            value: [0.0; N],
            error: [0.0; N],
            evaluations: 0,
        });
    }
    let mut evaluations = 15 * panels.len();
    loop {
        let (v, e) = totals(&panels);
        if converged(&v, &e, cfg.rel_tol) {
            return Ok(QuadOutput {
                value: v,
                error: e,
                evaluations,
            });
        }
        if panels.len() >= cfg.max_intervals {
            break;
        }
        // Bisect the panel contributing the largest relative error.
        let score = |p: &Panel<N>| {
            (0..N)
                .map(|c| p.error[c] / v[c].abs().max(f64::MIN_POSITIVE))
                .fold(0.0f64, f64::max)
        };
        let (worst, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| (i, score(p)))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            panels.push(p);
            break;
        }
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
        evaluations += 30;
    }
    trapezoid_fallback(&f, lo, hi, cfg, evaluations)
}

fn trapezoid_fallback<const N: usize, F>(
    f: &F,
    lo: f64,
    hi: f64,
    cfg: &QuadConfig,
    mut evaluations: usize,
) -> Result<QuadOutput<N>, QuadError>
where
    F: Fn(f64) -> [f64; N],
{
    let mut n = 1024usize;
    let mut prev: Option<[f64; N]> = None;
    while n <= 1 << 22 {
        let h = (hi - lo) / n as f64;
        let mut sum = [0.0; N];
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            let fx = f(lo + h * k as f64);
            for c in 0..N {
                if fx[c].is_finite() {
                    sum[c] += w * fx[c];
                }
            }
        }
        evaluations += n + 1;
        for s in sum.iter_mut() {
            *s *= h;
        }
        if let Some(p) = prev {
            let mut err = [0.0; N];
            for c in 0..N {
                err[c] = (sum[c] - p[c]).abs();
            }
            if converged(&sum, &err, cfg.rel_tol) {
                return Ok(QuadOutput {
                    value: sum,
                    error: err,
                    evaluations,
                });
            }
            if n == 1 << 22 {
                return Err(QuadError {
                    lo,
                    hi,
                    estimate: sum[0],
                    error: err[0],
                    evaluations,
                    reason: "trapezoid refinement exhausted",
                });
            }
        }
        prev = Some(sum);
        n *= 2;
    }
    unreachable!("loop returns at the final refinement")
}

/// Where a unimodal log-density on `(0, inf)` carries its mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lo: f64,
    pub mode: f64,
    pub hi: f64,
    /// Log-density at the mode.
    pub peak: f64,
    /// Curvature-based width estimate at the mode.
    pub width: f64,
}

impl Support {
    /// Breakpoints that bracket the peak so initial panels always resolve it.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![self.lo];
        for x in [
            self.mode - self.width,
            self.mode,
            self.mode + self.width,
        ] {
            if x > *pts.last().unwrap() && x < self.hi {
                pts.push(x);
            }
        }
        pts.push(self.hi);
        pts
    }
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Locate the mode of `log_f` on `(0, inf)` and the interval outside of
/// which it has dropped more than `cutoff` below its peak.
///
/// A log-spaced scan over `[1e-12, 1e12]` brackets the mode, golden-section
/// search refines it, and the tails are found by doubling steps.
pub fn locate_support<F: Fn(f64) -> f64>(log_f: F, cutoff: f64) -> Result<Support, QuadError> {
    let lf = |x: f64| finite_or_neg_inf(log_f(x));
    const GRID: usize = 481;
    let (g_lo, g_hi) = (-12.0f64, 12.0f64);
    let xs: Vec<f64> = (0..GRID)
        .map(|k| 10f64.powf(g_lo + (g_hi - g_lo) * k as f64 / (GRID - 1) as f64))
        .collect();
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (k, &x) in xs.iter().enumerate() {
        let v = lf(x);
        if v > best_v {
            best_v = v;
            best = k;
        }
    }
    if !best_v.is_finite() {
        return Err(QuadError {
            lo: xs[0],
            hi: xs[GRID - 1],
            estimate: f64::NAN,
            error: f64::NAN,
            evaluations: GRID,
            reason: "log-density not finite anywhere on the scan grid",
        });
    }
    let mut a = if best == 0 { 0.0 } else { xs[best - 1] };
    let mut b = xs[(best + 1).min(GRID - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (lf(c), lf(d));
    for _ in 0..200 {
        if (b - a) <= 1e-14 * (a.abs() + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = lf(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = lf(d);
        }
    }
    let mut mode = 0.5 * (a + b);
    let mut peak = lf(mode);
    if best_v > peak {
        mode = xs[best];
        peak = best_v;
    }

    let h = 1e-4 * mode;
    let curv = (lf(mode + h) - 2.0 * peak + lf(mode - h)) / (h * h);
    let width = if curv.is_finite() && curv < 0.0 {
        (1.0 / (-curv).sqrt()).clamp(1e-9 * mode, 1e3 * mode.max(1.0))
    } else {
        0.1 * mode
    };

    let floor = peak - cutoff;
    let mut hi = f64::NAN;
    for k in 0..1100 {
        let x = mode + width * 2f64.powi(k);
        if !x.is_finite() {
            break;
        }
        if lf(x) < floor {
            hi = x;
            break;
        }
    }
    if hi.is_nan() {
        return Err(QuadError {
            lo: mode,
            hi: f64::INFINITY,
            estimate: peak,
            error: f64::NAN,
            evaluations: 0,
            reason: "right tail does not decay",
        });
    }
    let mut lo = 0.0;
    let mut found = false;
    for k in 0..64 {
        let x = mode - width * 2f64.powi(k);
        if x <= 0.0 {
            break;
        }
        if lf(x) < floor {
            lo = x;
            found = true;
            break;
        }
    }
    if !found {
        for j in 1..1075 {
            let x = mode * 2f64.powi(-j);
            if x <= 0.0 {
                break;
            }
            if lf(x) < floor {
                lo = x;
                break;
            }
        }
    }
    Ok(Support {
        lo,
        mode,
        hi,
        peak,
        width,
    })
}
