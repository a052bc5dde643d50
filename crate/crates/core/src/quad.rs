//! Adaptive Gauss-Kronrod (7/15) quadrature on a union of intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_depth: 40,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = h * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adapt<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
    opts: &QuadOptions,
    whole: (f64, f64),
) -> QuadResult {
    let (value, error) = whole;
    if error <= tol || depth >= opts.max_depth || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
        return QuadResult { value, error };
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m);
    let right = gk15(f, m, b);
    let l = adapt(f, a, m, 0.5 * tol, depth + 1, opts, left);
    let r = adapt(f, m, b, 0.5 * tol, depth + 1, opts, right);
    QuadResult {
        value: l.value + r.value,
        error: l.error + r.error,
    }
}

/// Integrates `f` over `[points[0], points[last]]`, splitting at every
/// intermediate point. Breakpoints should sit on discontinuities and kinks.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    opts: &QuadOptions,
) -> QuadResult {
    let mut pts: Vec<f64> = points.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    if pts.len() < 2 {
        return QuadResult {
            value: 0.0,
            error: 0.0,
        };
    }
    let first: Vec<(f64, f64)> = pts.windows(2).map(|w| gk15(&mut f, w[0], w[1])).collect();
    let rough: f64 = first.iter().map(|r| r.0).sum();
    let tol = opts.abs_tol.max(opts.rel_tol * rough.abs());
    let span = pts[pts.len() - 1] - pts[0];
    let mut total = QuadResult {
        value: 0.0,
        error: 0.0,
    };
    for (w, seg) in pts.windows(2).zip(first) {
        let share = tol * (w[1] - w[0]) / span;
        let r = adapt(&mut f, w[0], w[1], share, 0, opts, seg);
        total.value += r.value;
        total.error += r.error;
    }
    total
}

/// Like [`integrate_with_breaks`] but fails when the error estimate misses the
/// requested tolerance.
pub fn integrate_checked<F: FnMut(f64) -> f64>(
    f: F,
    points: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let r = integrate_with_breaks(f, points, opts);
    let target = opts.abs_tol.max(opts.rel_tol * r.value.abs());
    if !r.value.is_finite() || r.error > 10.0 * target {
        return Err(Error::Quadrature {
            achieved: r.error,
            target,
        });
    }
    Ok(r)
}
