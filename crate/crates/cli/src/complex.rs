//! Complex literal grammar.
//!
//! ```text
//! complex := real | real sign imag "i" | [sign] [imag] "i"
//! real    := [sign] decimal
//! imag    := decimal
//! sign    := "+" | "-"
//! decimal := digits ["." [digits]] [exponent] | "." digits [exponent]
//! exponent:= ("e" | "E") [sign] digits
//! vector  := complex ("," complex)*
//! ```
//!
//! Whitespace is not allowed anywhere. An omitted imaginary magnitude means 1,
//! so `i`, `-i` and `2-i` are accepted. Values are formatted back with
//! 17 significant digits, which round-trips every `f64` exactly.

use std::sync::LazyLock;

use num_complex::Complex64;
use regex::Regex;

const DECIMAL: &str = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?";

static COMPLEX: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"^(?:(?P<re>[+-]?{DECIMAL})(?:(?P<sign>[+-])(?P<im>{DECIMAL})?i)?|(?P<psign>[+-]?)(?P<pim>{DECIMAL})?i)$"
    ))
    .expect("complex grammar")
});

pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let caps = COMPLEX
        .captures(s)
        .ok_or_else(|| format!("malformed complex literal {s:?} (expected a+bi, a-bi, a or bi)"))?;
    let num = |m: Option<regex::Match>| -> Result<f64, String> {
        m.map_or(Ok(1.0), |m| m.as_str().parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
    };
    if let Some(re) = caps.name("re") {
        let re: f64 = re.as_str().parse().map_err(|e| format!("{s:?}: {e}"))?;
        let Some(sign) = caps.name("sign") else { return Ok(Complex64::new(re, 0.0)) };
        let im = num(caps.name("im"))?;
        return Ok(Complex64::new(re, if sign.as_str() == "-" { -im } else { im }));
    }
    let im = num(caps.name("pim"))?;
    let neg = caps.name("psign").is_some_and(|m| m.as_str() == "-");
    Ok(Complex64::new(0.0, if neg { -im } else { im }))
}

pub fn parse_cvec(s: &str) -> Result<Vec<Complex64>, String> {
    if s.is_empty() {
        return Err("empty complex vector".into());
    }
    s.split(',').map(parse_complex).collect()
}

pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:.16e}{sign}{:.16e}i", z.re, z.im.abs())
}

pub fn format_cvec(v: &[Complex64]) -> String {
    v.iter().map(|&z| format_complex(z)).collect::<Vec<_>>().join(",")
}
