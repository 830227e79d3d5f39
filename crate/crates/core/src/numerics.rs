//! Numerically stable primitives shared by the accounting and mechanism
//! layers: log-space binomial tails, LogSumExp, Brent root finding, noise
//! samplers and trimmed statistics.
//!
//! The binomial tails must stay accurate far into the extreme-tail regime
//! (survival probabilities like 1e-400 appear in amplification sums with a
//! tuple bound up to 2^20), so everything is computed in log space. Small n
//! uses exact integer binomial coefficients; large n goes through the
//! regularized incomplete beta function evaluated as a log-space continued
//! fraction.

use crate::error::{Error, Result};
use crate::rng::{NoiseMode, RngStream};

/// ln(e^a + e^b) without overflow; -inf acts as the identity element.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Fold of `log_sum_exp` over a sequence of log-values.
pub fn log_sum_exp_all(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(f64::NEG_INFINITY, |acc, v| log_sum_exp(acc, v))
}

/// ln(1 - e^x) for x <= 0, stable near both endpoints.
fn ln_one_minus_exp(x: f64) -> f64 {
    debug_assert!(x <= 0.0);
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x > -std::f64::consts::LN_2 {
        // 1 - e^x is small: go through expm1.
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

// Lanczos approximation, g = 7, 9 coefficients. Relative accuracy ~1e-14 on
// ln Gamma, independent of argument magnitude.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
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

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// ln C(n, k); exact for n <= 64 via integer arithmetic.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if n <= 64 {
        return (choose_u128(n, k) as f64).ln();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn choose_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// ln Pr[Bin(n, p) = k].
pub fn binom_logpmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::POutOfRange(p));
    }
    Ok(())
}

/// ln Pr[Bin(n, p) <= k]. k >= n gives 0, k < 0 gives -inf.
pub fn binom_logcdf(k: i64, n: u64, p: f64) -> Result<f64> {
    check_p(p)?;
    if k < 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let k = k as u64;
    if k >= n {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if n <= 64 {
        return Ok(log_sum_exp_all((0..=k).map(|i| binom_logpmf(i, n, p))));
    }
    // Pr[Bin(n,p) <= k] = I_{1-p}(n-k, k+1).
    Ok(ln_beta_reg((n - k) as f64, k as f64 + 1.0, 1.0 - p))
}

/// ln Pr[Bin(n, p) > k]. k >= n gives -inf, k < 0 gives 0.
pub fn binom_logsf(k: i64, n: u64, p: f64) -> Result<f64> {
    check_p(p)?;
    if k < 0 {
        return Ok(0.0);
    }
    let k = k as u64;
    if k >= n {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    if n <= 64 {
        return Ok(log_sum_exp_all((k + 1..=n).map(|i| binom_logpmf(i, n, p))));
    }
    // Pr[Bin(n,p) > k] = I_p(k+1, n-k).
    Ok(ln_beta_reg(k as f64 + 1.0, (n - k) as f64, p))
}

/// ln I_x(a, b), the log of the regularized incomplete beta function.
///
/// Evaluated via the Lentz continued fraction in the orientation where it
/// converges; the complementary orientation goes through ln(1 - e^y), which is
/// safe because the complement is then at most ~1/2.
fn ln_beta_reg(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x >= 1.0 {
        return 0.0;
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_beta_reg_direct(a, b, x)
    } else {
        ln_one_minus_exp(ln_beta_reg_direct(b, a, 1.0 - x))
    }
}

fn ln_beta_reg_direct(a: f64, b: f64, x: f64) -> f64 {
    let ln_prefix = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln()
        + b * (1.0 - x).ln()
        - a.ln();
    ln_prefix + beta_cf(a, b, x).ln()
}

// Continued fraction for the incomplete beta (Lentz's algorithm).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Brent's method on [lo, hi]. Requires a sign change; returns t with
/// |f(t)| <= ftol. The calibration roots downstream need machine-level
/// accuracy, so keep ftol tight (1e-12 is the conventional default here).
pub fn brentq(f: impl Fn(f64) -> f64, lo: f64, hi: f64, ftol: f64) -> Result<f64> {
    const MAX_ITER: usize = 200;
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5e-15;
        let xm = 0.5 * (c - b);
        if fb.abs() <= ftol || xm.abs() <= tol1 {
            if fb.abs() <= ftol {
                return Ok(b);
            }
            // Bracket collapsed to machine resolution; accept the best point.
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Attempt inverse quadratic interpolation / secant.
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = f(b);
    }
    Err(Error::MaxIterations(MAX_ITER))
}

/// Laplace(0, scale) via the inverse CDF of a uniform draw.
/// Returns exactly 0 in noise-disabled mode (non-private test mode).
pub fn sample_laplace(scale: f64, mode: NoiseMode, rng: &mut RngStream) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::NonPositiveScale(scale));
    }
    if mode.is_disabled() {
        return Ok(0.0);
    }
    let v = rng.uniform_open() - 0.5;
    // u - 0.5 can round to exactly +-0.5 for subnormal u; the floor keeps the
    // logarithm finite.
    let tail = (1.0 - 2.0 * v.abs()).max(f64::MIN_POSITIVE);
    Ok(-scale * v.signum() * tail.ln())
}

/// N(0, sigma^2) via Box-Muller. Exactly 0 in noise-disabled mode.
pub fn sample_gaussian(sigma: f64, mode: NoiseMode, rng: &mut RngStream) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveScale(sigma));
    }
    if mode.is_disabled() {
        return Ok(0.0);
    }
    Ok(sigma * standard_normal(rng))
}

/// Independent N(0, sigma^2) draws for each of d coordinates.
pub fn sample_gaussian_vec(
    sigma: f64,
    d: usize,
    mode: NoiseMode,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveScale(sigma));
    }
    if mode.is_disabled() {
        return Ok(vec![0.0; d]);
    }
    Ok((0..d).map(|_| sigma * standard_normal(rng)).collect())
}

pub(crate) fn standard_normal(rng: &mut RngStream) -> f64 {
    let u1 = rng.uniform_open();
    let u2 = rng.uniform();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Standard Cauchy draw via the tangent transform.
pub(crate) fn standard_cauchy(rng: &mut RngStream) -> f64 {
    let u = rng.uniform_open();
    (std::f64::consts::PI * (u - 0.5)).tan()
}

/// Mean after removing the `drop` largest and `drop` smallest values.
pub fn trimmed_mean(values: &[f64], drop: usize) -> Result<f64> {
    if values.len() <= 2 * drop {
        return Err(Error::TooFewValues {
            got: values.len(),
            drop,
            needed: 2 * drop + 1,
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let kept = &sorted[drop..sorted.len() - drop];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}
