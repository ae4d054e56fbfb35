//! Fixed-precision number formatting for exported files.

use num_complex::Complex64;

/// Significant digits written for every float.
pub const SIG_DIGITS: usize = 9;

/// Formats `x` with nine significant digits. Plain decimal notation is used
/// for magnitudes in `[1e-5, 1e15)`, scientific notation otherwise. Negative
/// zero is written as zero.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let exp: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let out = if (-5..15).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        sci
    };
    match out.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| matches!(b, b'0' | b'.' | b'e')) => rest.to_string(),
        _ => out,
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `a+bj` notation accepted by [`parse_complex`].
pub fn complex(z: Complex64) -> String {
    format!("{}{:+}j", z.re, z.im)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {0:?} as a complex number (expected forms like 2.0+0.5j, 1, -0.3j)")]
pub struct ComplexParseError(pub String);

/// Parses `re`, `re+imj`, `re-imj` or `imj`. `i` is accepted for `j` and
/// whitespace is ignored.
pub fn parse_complex(s: &str) -> Result<Complex64, ComplexParseError> {
    let err = || ComplexParseError(s.to_string());
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(err());
    }
    let Some(body) = t.strip_suffix(['j', 'i', 'J', 'I']) else {
        let re: f64 = t.parse().map_err(|_| err())?;
        return finite(Complex64::new(re, 0.0)).ok_or_else(err);
    };
    let split = body
        .char_indices()
        .skip(1)
        .filter(|&(k, c)| {
            (c == '+' || c == '-') && !matches!(body.as_bytes()[k - 1], b'e' | b'E')
        })
        .map(|(k, _)| k)
        .last();
    let imag = |s: &str| -> Result<f64, ComplexParseError> {
        match s {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => s.parse().map_err(|_| err()),
        }
    };
    let z = match split {
        Some(k) => Complex64::new(body[..k].parse().map_err(|_| err())?, imag(&body[k..])?),
        None => Complex64::new(0.0, imag(body)?),
    };
    finite(z).ok_or_else(err)
}

fn finite(z: Complex64) -> Option<Complex64> {
    (z.re.is_finite() && z.im.is_finite()).then_some(z)
}
