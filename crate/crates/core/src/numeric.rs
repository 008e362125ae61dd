//! Scalar helpers: normal distribution functions, exact combinatorics,
//! log-space accumulation.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF, `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail `1 − Φ(x)`, evaluated without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// Derangement number `D_j = Σ_{ℓ=0}^{j} (−1)^ℓ j!/ℓ!`.
pub fn derangement(j: u64) -> BigUint {
    let jf = BigInt::from(factorial(j));
    let mut sum = BigInt::zero();
    let mut lf = BigInt::one();
    for l in 0..=j {
        if l > 0 {
            lf *= l;
        }
        let term = &jf / &lf;
        if l % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum.to_biguint().expect("derangement numbers are nonnegative")
}

/// `ln` of a big integer, exact to f64 rounding even beyond the f64 range.
pub fn big_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 900;
    let top = (x >> shift).to_f64().expect("fits in f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `a / b` as f64 for arbitrarily large operands.
pub fn big_ratio(a: &BigUint, b: &BigUint) -> f64 {
    assert!(!b.is_zero(), "division by zero");
    if a.is_zero() {
        return 0.0;
    }
    if a.bits() <= 1000 && b.bits() <= 1000 {
        return a.to_f64().unwrap() / b.to_f64().unwrap();
    }
    (big_ln(a) - big_ln(b)).exp()
}

pub fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    let mut acc = NeumaierSum::default();
    for x in xs {
        acc.add((x - m).exp());
    }
    m + acc.value().ln()
}

/// Compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// A positive quantity carried as its natural log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogValue {
    pub ln: f64,
}

impl LogValue {
    pub fn from_ln(ln: f64) -> Self {
        LogValue { ln }
    }

    pub fn from_value(v: f64) -> Self {
        LogValue { ln: v.ln() }
    }

    /// Linear-space value when it is representable as a finite f64.
    pub fn value(&self) -> Option<f64> {
        let v = self.ln.exp();
        if v.is_finite() && (v > 0.0 || self.ln == f64::NEG_INFINITY) {
            Some(v)
        } else {
            None
        }
    }
}

/// Relative difference `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Format to a fixed number of significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&mag) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    format!("{:.*}", decimals, x)
}
