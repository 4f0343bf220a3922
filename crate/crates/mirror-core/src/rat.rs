//! Small helpers for exact rationals with `i64` parts.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use std::fmt;

pub type Rat = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseRatError(pub String);

impl fmt::Display for ParseRatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "not a rational number: {:?}", self.0)
    }
}

impl std::error::Error for ParseRatError {}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(n, d)
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(n)
}

/// Parses `"3"`, `"-2/3"` or a finite decimal such as `"0.25"`.
pub fn parse_rat(s: &str) -> Result<Rat, ParseRatError> {
    let t = s.trim();
    let err = || ParseRatError(s.to_string());
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| err())?;
        let d: i64 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 17 {
            return Err(err());
        }
        let neg = whole.starts_with('-');
        let w: i64 = if whole == "-" || whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| err())?
        };
        let den = 10i64.checked_pow(frac.len() as u32).ok_or_else(err)?;
        let f: i64 = frac.parse().map_err(|_| err())?;
        let num = w
            .checked_mul(den)
            .and_then(|x| if neg { x.checked_sub(f) } else { x.checked_add(f) })
            .ok_or_else(err)?;
        return Ok(Rat::new(num, den));
    }
    t.parse::<i64>().map(Rat::from_integer).map_err(|_| err())
}

pub fn fmt_rat(r: &Rat) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn lcm(a: i64, b: i64) -> i64 {
    a.lcm(&b)
}

/// True when `r` lies on the lattice `(1/d)Z`.
pub fn on_lattice(r: &Rat, d: i64) -> bool {
    d % r.denom() == 0
}

pub fn dot(a: &[Rat], b: &[i64]) -> Rat {
    a.iter()
        .zip(b)
        .fold(Rat::zero(), |acc, (x, &y)| acc + x * Rat::from_integer(y))
}

pub fn dot_rr(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).fold(Rat::zero(), |acc, (x, y)| acc + x * y)
}

/// Representative of `r` modulo 1 in the half-open interval (-1/2, 1/2].
pub fn shortest_mod1(r: &Rat) -> Rat {
    let half = Rat::new(1, 2);
    let mut x = r - r.floor();
    if x > half {
        x -= Rat::one();
    }
    x
}

pub fn min_opt(a: Option<Rat>, b: Option<Rat>) -> Option<Rat> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if x < y { x } else { y }),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

pub fn abs(r: &Rat) -> Rat {
    r.abs()
}

/// Serde adaptor storing a rational as a decimal string such as `"2/3"`.
pub mod as_str {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::String(s) => parse_rat(&s).map_err(D::Error::custom),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(Rat::from_integer)
                .ok_or_else(|| D::Error::custom(format!("non-integer number {n}; use a string"))),
            other => Err(D::Error::custom(format!("expected rational string, got {other}"))),
        }
    }
}

pub mod vec_str {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "super::as_str")] Rat);

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        let w: Vec<W> = v.iter().map(|r| W(*r)).collect();
        w.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let w: Vec<W> = Vec::deserialize(d)?;
        Ok(w.into_iter().map(|x| x.0).collect())
    }
}

pub mod opt_str {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "super::as_str")] Rat);

    pub fn serialize<S: Serializer>(v: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
        v.map(W).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rat>, D::Error> {
        let w: Option<W> = Option::deserialize(d)?;
        Ok(w.map(|x| x.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rat("2/3").unwrap(), rat(2, 3));
        assert_eq!(parse_rat("-4").unwrap(), int(-4));
        assert_eq!(parse_rat("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_rat("-0.5").unwrap(), rat(-1, 2));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn shortest_lift() {
        assert_eq!(shortest_mod1(&rat(2, 3)), rat(-1, 3));
        assert_eq!(shortest_mod1(&rat(1, 2)), rat(1, 2));
        assert_eq!(shortest_mod1(&rat(-1, 2)), rat(1, 2));
        assert_eq!(shortest_mod1(&rat(-1, 3)), rat(-1, 3));
    }
}
