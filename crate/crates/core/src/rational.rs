//! Helpers around [`BigRational`]: exact decimal parsing, rendering and powers.

use num::bigint::Sign;
use num::{BigInt, BigRational, Integer, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn half() -> BigRational {
    ratio(1, 2)
}

/// Parses a plain decimal such as `"0.01"`, `"1"`, `"-2.5"` or `"1e-3"` exactly.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let err = || Error::Parse(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = t[pos + 1..].parse().map_err(|_| err())?;
            (&t[..pos], e)
        }
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (whole, frac) = match digits.split_once('.') {
        Some((w, f)) => (w, f),
        None => (digits, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let all: String = format!("{whole}{frac}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| err())? };
    let scale = exp - frac.len() as i32;
    let mut v = BigRational::from_integer(numer);
    let ten = BigInt::from(10);
    if scale >= 0 {
        v *= BigRational::from_integer(num::pow(ten, scale as usize));
    } else {
        v /= BigRational::from_integer(num::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -v } else { v })
}

/// `base^exp` for a signed exponent. `0^0 = 1`; negative powers of zero panic.
pub fn pow(base: &BigRational, exp: i64) -> BigRational {
    if exp >= 0 {
        num::pow(base.clone(), exp as usize)
    } else {
        assert!(!base.is_zero(), "negative power of zero");
        num::pow(base.recip(), (-exp) as usize)
    }
}

/// Exact rational value of a finite `f64`.
pub fn from_f64(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite float")
}

pub fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// `floor(p * 2^64)`, saturated to `u64::MAX` for `p >= 1`. A uniform `u64`
/// below this threshold is an event of probability `p` up to `2^-64`.
pub fn u64_threshold(p: &BigRational) -> u64 {
    if p <= &BigRational::zero() {
        return 0;
    }
    if p >= &BigRational::one() {
        return u64::MAX;
    }
    let scaled = p * BigRational::from_integer(BigInt::one() << 64);
    scaled.floor().to_integer().to_u64().unwrap_or(u64::MAX)
}

/// Decimal rendering with `sig` significant digits, rounding half away from zero.
///
/// Fixed notation is used for magnitudes in `[1e-6, 1e12)`, scientific otherwise.
pub fn to_decimal_string(v: &BigRational, sig: usize) -> String {
    assert!(sig > 0);
    if v.is_zero() {
        return "0".to_string();
    }
    let neg = v.is_negative();
    let a = v.abs();
    let ten = BigRational::from_integer(BigInt::from(10));

    // exponent e with 10^e <= a < 10^(e+1)
    let mut e = estimate_log10(&a);
    while pow(&ten, e) > a {
        e -= 1;
    }
    while pow(&ten, e + 1) <= a {
        e += 1;
    }
    // digits = round(a / 10^(e - sig + 1))
    let mut shift = e - sig as i64 + 1;
    let scaled = &a / pow(&ten, shift);
    let (q, r) = scaled.numer().div_rem(scaled.denom());
    let mut digits = q;
    if BigInt::from(2) * r >= *scaled.denom() {
        digits += 1;
    }
    if digits.to_string().len() > sig {
        // rounding carried into a new digit, e.g. 9.99.. -> 10.0
        digits /= 10;
        e += 1;
        shift += 1;
    }
    let ds = digits.to_string();
    let sign = if neg { "-" } else { "" };
    if (-6..12).contains(&e) {
        let body = if shift >= 0 {
            format!("{ds}{}", "0".repeat(shift as usize))
        } else {
            let point = ds.len() as i64 + shift;
            if point > 0 {
                format!("{}.{}", &ds[..point as usize], &ds[point as usize..])
            } else {
                format!("0.{}{}", "0".repeat((-point) as usize), ds)
            }
        };
        format!("{sign}{body}")
    } else {
        let (head, tail) = ds.split_at(1);
        if tail.is_empty() {
            format!("{sign}{head}e{e}")
        } else {
            format!("{sign}{head}.{tail}e{e}")
        }
    }
}

fn estimate_log10(a: &BigRational) -> i64 {
    let bits = |x: &BigInt| if x.sign() == Sign::NoSign { 0 } else { x.bits() as i64 };
    let lg2 = bits(a.numer()) - bits(a.denom());
    (lg2 as f64 * std::f64::consts::LOG10_2).floor() as i64
}
