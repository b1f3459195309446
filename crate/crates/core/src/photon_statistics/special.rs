//! Saddle-point evaluation of Poisson and binomial probabilities.
//!
//! Terms are written as `exp(-stirlerr(n) - bd0(x, np))` so that the
//! large cancelling pieces of `x ln(x/np) + np - x` and of Stirling's series
//! never meet in floating point. Relative accuracy is a few ulps of the
//! exponent, which is as good as any `f64` result can be.

use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(n!) - ((n + 1/2) ln n - n + ln sqrt(2 pi))` for n = 1..=15.
#[allow(clippy::excessive_precision)]
const STIRLERR_TABLE: [f64; 15] = [
    0.081_061_466_795_327_258_22,
    0.041_340_695_955_409_294_09,
    0.027_677_925_684_998_339_15,
    0.020_790_672_103_765_093_11,
    0.016_644_691_189_821_192_16,
    0.013_876_128_823_070_747_99,
    0.011_896_709_945_891_770_10,
    0.010_411_265_261_972_096_50,
    0.009_255_462_182_712_732_918,
    0.008_330_563_433_362_871_256,
    0.007_573_675_487_951_840_795,
    0.006_942_840_107_209_529_866,
    0.006_408_994_188_004_207_068,
    0.005_951_370_112_758_847_736,
    0.005_554_733_551_962_801_371,
];

/// Error of Stirling's approximation to `ln(n!)`, for integer `n >= 1`.
pub(crate) fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;

    debug_assert!(n >= 1.0 && n.fract() == 0.0);
    if n <= 15.0 {
        return STIRLERR_TABLE[n as usize - 1];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np - x`, evaluated without cancellation
/// when `x` is close to `np`.
pub(crate) fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln(n!)`.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    if n <= 20 {
        return (1..=n).map(|k| k as f64).product::<f64>().ln();
    }
    let x = n as f64;
    (x + 0.5) * x.ln() - x + LN_SQRT_2PI + stirlerr(x)
}

/// Poisson probability `e^-mu mu^x / x!` for integer `x`, `mu >= 0`.
pub(crate) fn dpois_raw(x: usize, mu: f64) -> f64 {
    if mu == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if x == 0 {
        return (-mu).exp();
    }
    let xf = x as f64;
    (-stirlerr(xf) - bd0(xf, mu)).exp() / (2.0 * PI * xf).sqrt()
}

/// Binomial probability of `x` successes in `n` trials with success
/// probability `p` (`q = 1 - p` passed separately to keep it exact).
pub(crate) fn dbinom_raw(x: usize, n: usize, p: f64, q: f64) -> f64 {
    if x > n {
        return 0.0;
    }
    if p == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if x == 0 {
        if n == 0 {
            return 1.0;
        }
        let lc = if p < 0.1 { -bd0(nf, nf * q) - nf * p } else { nf * q.ln() };
        return lc.exp();
    }
    if x == n {
        let lc = if q < 0.1 { -bd0(nf, nf * p) - nf * q } else { nf * p.ln() };
        return lc.exp();
    }
    let xf = x as f64;
    let lc = stirlerr(nf) - stirlerr(xf) - stirlerr(nf - xf) - bd0(xf, nf * p) - bd0(nf - xf, nf * q);
    let lf = (2.0 * PI).ln() + xf.ln() + (-xf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}
