//! Small numerical helpers: gamma function, Gauss--Legendre panels, bisection.

/// Lanczos approximation of the gamma function (g = 7, n = 9 coefficients).
///
/// Accurate to ~1e-13 relative on the real line away from the poles, which is
/// plenty for the stable-kernel constants it feeds.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection formula
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = COEF[0];
        for (i, c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// 16-point Gauss--Legendre nodes on (-1, 1).
const GL16_X: [f64; 16] = [
    -0.989_400_934_991_649_9,
    -0.944_575_023_073_232_6,
    -0.865_631_202_387_831_7,
    -0.755_404_408_355_003,
    -0.617_876_244_402_643_7,
    -0.458_016_777_657_227_1,
    -0.281_603_550_779_258_9,
    -0.095_012_509_837_637_44,
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_1,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];

const GL16_W: [f64; 16] = [
    0.027_152_459_411_754_095,
    0.062_253_523_938_647_89,
    0.095_158_511_682_492_78,
    0.124_628_971_255_533_87,
    0.149_595_988_816_576_73,
    0.169_156_519_395_002_54,
    0.182_603_415_044_923_59,
    0.189_450_610_455_068_5,
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_59,
    0.169_156_519_395_002_54,
    0.149_595_988_816_576_73,
    0.124_628_971_255_533_87,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_095,
];

/// Integrate `f` over [a, b] with a single 16-point Gauss--Legendre rule.
pub fn gl16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL16_X.iter().zip(GL16_W.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Integrate `f` over [a, b] (0 < a < b) on geometrically spaced panels,
/// doubling the panel count until two refinements agree within `tol`.
///
/// Geometric spacing keeps the rule accurate for integrands with an
/// algebraic singularity at the left endpoint (stable kernels).
pub fn integrate_geometric<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_doublings: u32,
) -> Option<f64> {
    assert!(a > 0.0 && b > a, "integrate_geometric needs 0 < a < b");
    let mut panels = 8usize;
    let mut prev = panels_value(f, a, b, panels);
    for _ in 0..max_doublings {
        panels *= 2;
        let cur = panels_value(f, a, b, panels);
        if (cur - prev).abs() <= tol.max(1e-15 * cur.abs()) {
            return Some(cur);
        }
        prev = cur;
    }
    None
}

fn panels_value<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let ratio = (b / a).powf(1.0 / panels as f64);
    let mut acc = 0.0;
    let mut lo = a;
    for _ in 0..panels {
        let hi = (lo * ratio).min(b);
        acc += gl16(f, lo, hi);
        lo = hi;
    }
    acc
}

/// Find the smallest `x` in [lo, hi] with `f(x) <= target`, assuming `f` is
/// nonincreasing; bisection on a log scale. Returns `hi` if even `f(hi)`
/// exceeds the target and `lo` if `f(lo)` already meets it.
pub fn monotone_threshold<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, target: f64) -> f64 {
    if f(lo) <= target {
        return lo;
    }
    if f(hi) > target {
        return hi;
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if f(mid.exp()) <= target {
            b = mid;
        } else {
            a = mid;
        }
        if b - a < 1e-3 {
            break;
        }
    }
    b.exp()
}
