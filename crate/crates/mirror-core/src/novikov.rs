//! Truncated Novikov series over a base field.
//!
//! A [`NovikovScalar`] is a finite sum `Σ c_i T^{λ_i}` with rational exponents,
//! strictly increasing, together with a precision: every term at or above the
//! precision is unknown and dropped.

use crate::rat::{fmt_rat, min_opt, parse_rat, Rat};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NovikovError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("cannot invert zero")]
    InvertZero,
    #[error("field mismatch: {0} vs {1}")]
    FieldMismatch(BaseField, BaseField),
    #[error("malformed scalar {0:?}")]
    Parse(String),
    #[error("exponent {exp} is off the lattice (1/{denominator})Z")]
    OffLattice { exp: String, denominator: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BaseField {
    #[default]
    Rationals,
    Prime(u64),
}

impl fmt::Display for BaseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseField::Rationals => write!(f, "Q"),
            BaseField::Prime(p) => write!(f, "F_{p}"),
        }
    }
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl BaseField {
    pub fn prime(p: u64) -> Result<Self, NovikovError> {
        if is_prime(p) && p < (1 << 31) {
            Ok(BaseField::Prime(p))
        } else {
            Err(NovikovError::NotPrime(p))
        }
    }

    /// Parses `"Q"`, `"rationals"` or `"F_p"` / `"p"` for a prime `p`.
    pub fn parse(s: &str) -> Result<Self, NovikovError> {
        let t = s.trim().to_ascii_lowercase();
        if t == "q" || t == "rationals" || t.is_empty() {
            return Ok(BaseField::Rationals);
        }
        let digits = t.trim_start_matches("f_").trim_start_matches("gf").trim_start_matches('f');
        let p: u64 = digits
            .parse()
            .map_err(|_| NovikovError::Parse(s.to_string()))?;
        BaseField::prime(p)
    }

    pub fn zero(&self) -> Coeff {
        self.from_i64(0)
    }

    pub fn one(&self) -> Coeff {
        self.from_i64(1)
    }

    pub fn from_i64(&self, n: i64) -> Coeff {
        match *self {
            BaseField::Rationals => Coeff::Q(BigRational::from_integer(BigInt::from(n))),
            BaseField::Prime(p) => Coeff::Fp(n.rem_euclid(p as i64) as u64, p),
        }
    }

    pub fn from_rat(&self, r: &Rat) -> Coeff {
        match *self {
            BaseField::Rationals => Coeff::Q(BigRational::new(
                BigInt::from(*r.numer()),
                BigInt::from(*r.denom()),
            )),
            BaseField::Prime(_) => {
                let n = self.from_i64(*r.numer());
                let d = self.from_i64(*r.denom());
                n.mul(&d.inv().expect("denominator divisible by the characteristic"))
            }
        }
    }

    /// `(-1)^k`.
    pub fn sign(&self, k: i64) -> Coeff {
        if k.rem_euclid(2) == 0 {
            self.one()
        } else {
            self.from_i64(-1)
        }
    }

    /// Parses a coefficient: an exact rational over Q, an integer (or
    /// rational with invertible denominator) mod p.
    pub fn parse_coeff(&self, s: &str) -> Result<Coeff, NovikovError> {
        let t = s.trim();
        match *self {
            BaseField::Rationals => {
                if let Ok(r) = t.parse::<BigRational>() {
                    return Ok(Coeff::Q(r));
                }
                parse_rat(t)
                    .map(|r| self.from_rat(&r))
                    .map_err(|_| NovikovError::Parse(s.to_string()))
            }
            BaseField::Prime(p) => {
                let r = parse_rat(t).map_err(|_| NovikovError::Parse(s.to_string()))?;
                if *r.denom() % (p as i64) == 0 {
                    return Err(NovikovError::Parse(s.to_string()));
                }
                Ok(self.from_rat(&r))
            }
        }
    }
}

/// An element of the base field.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Coeff {
    Q(BigRational),
    /// value, characteristic
    Fp(u64, u64),
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

impl Coeff {
    pub fn field(&self) -> BaseField {
        match self {
            Coeff::Q(_) => BaseField::Rationals,
            Coeff::Fp(_, p) => BaseField::Prime(*p),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Q(r) => r.is_zero(),
            Coeff::Fp(v, _) => *v == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Coeff::Q(r) => r.is_one(),
            Coeff::Fp(v, _) => *v == 1,
        }
    }

    pub fn add(&self, o: &Coeff) -> Coeff {
        match (self, o) {
            (Coeff::Q(a), Coeff::Q(b)) => Coeff::Q(a + b),
            (Coeff::Fp(a, p), Coeff::Fp(b, q)) if p == q => Coeff::Fp((a + b) % p, *p),
            _ => panic!("coefficient field mismatch"),
        }
    }

    pub fn neg(&self) -> Coeff {
        match self {
            Coeff::Q(a) => Coeff::Q(-a),
            Coeff::Fp(a, p) => Coeff::Fp((p - a) % p, *p),
        }
    }

    pub fn sub(&self, o: &Coeff) -> Coeff {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Coeff) -> Coeff {
        match (self, o) {
            (Coeff::Q(a), Coeff::Q(b)) => Coeff::Q(a * b),
            (Coeff::Fp(a, p), Coeff::Fp(b, q)) if p == q => Coeff::Fp(a * b % p, *p),
            _ => panic!("coefficient field mismatch"),
        }
    }

    pub fn inv(&self) -> Option<Coeff> {
        if self.is_zero() {
            return None;
        }
        Some(match self {
            Coeff::Q(a) => Coeff::Q(a.recip()),
            Coeff::Fp(a, p) => Coeff::Fp(pow_mod(*a, p - 2, *p), *p),
        })
    }

    pub fn div(&self, o: &Coeff) -> Option<Coeff> {
        o.inv().map(|i| self.mul(&i))
    }

    /// Lossy conversion for display heuristics only.
    pub fn to_f64(&self) -> f64 {
        match self {
            Coeff::Q(a) => a.to_f64().unwrap_or(f64::NAN),
            Coeff::Fp(a, _) => *a as f64,
        }
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, Coeff::Q(a) if a.is_negative())
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Q(a) => {
                if a.is_integer() {
                    write!(f, "{}", a.numer())
                } else {
                    write!(f, "{}/{}", a.numer(), a.denom())
                }
            }
            Coeff::Fp(a, _) => write!(f, "{a}"),
        }
    }
}

/// A truncated Novikov series. `precision == None` means exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NovikovScalar {
    field: BaseField,
    terms: Vec<(Rat, Coeff)>,
    precision: Option<Rat>,
}

impl NovikovScalar {
    pub fn zero(field: BaseField) -> Self {
        NovikovScalar { field, terms: Vec::new(), precision: None }
    }

    pub fn one(field: BaseField) -> Self {
        Self::monomial(field.one(), Rat::zero())
    }

    pub fn monomial(c: Coeff, exp: Rat) -> Self {
        let field = c.field();
        Self::from_terms(field, vec![(exp, c)], None)
    }

    pub fn constant(c: Coeff) -> Self {
        Self::monomial(c, Rat::zero())
    }

    /// `T^e` with coefficient one.
    pub fn t_pow(field: BaseField, e: Rat) -> Self {
        Self::monomial(field.one(), e)
    }

    /// Builds a scalar from arbitrary terms: like exponents are merged,
    /// zeros and terms at or beyond `precision` removed.
    pub fn from_terms(
        field: BaseField,
        terms: impl IntoIterator<Item = (Rat, Coeff)>,
        precision: Option<Rat>,
    ) -> Self {
        let mut map: BTreeMap<Rat, Coeff> = BTreeMap::new();
        for (e, c) in terms {
            if let Some(p) = precision {
                if e >= p {
                    continue;
                }
            }
            match map.get_mut(&e) {
                Some(x) => *x = x.add(&c),
                None => {
                    map.insert(e, c);
                }
            }
        }
        let terms = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        NovikovScalar { field, terms, precision }
    }

    pub fn field(&self) -> BaseField {
        self.field
    }

    pub fn terms(&self) -> &[(Rat, Coeff)] {
        &self.terms
    }

    pub fn precision(&self) -> Option<Rat> {
        self.precision
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Smallest exponent, `None` standing for +∞ (the zero scalar).
    pub fn val(&self) -> Option<Rat> {
        self.terms.first().map(|t| t.0)
    }

    pub fn leading(&self) -> Option<&(Rat, Coeff)> {
        self.terms.first()
    }

    pub fn with_precision(&self, p: Option<Rat>) -> Self {
        Self::from_terms(self.field, self.terms.clone(), min_opt(self.precision, p))
    }

    /// Drops terms at or above `p` without recording a precision.
    pub fn truncated_below(&self, p: Rat) -> Self {
        let terms = self.terms.iter().filter(|t| t.0 < p).cloned().collect();
        NovikovScalar { field: self.field, terms, precision: self.precision }
    }

    fn check(&self, o: &Self) {
        assert_eq!(self.field, o.field, "Novikov scalars over different fields");
    }

    pub fn add(&self, o: &Self) -> Self {
        self.check(o);
        Self::from_terms(
            self.field,
            self.terms.iter().chain(o.terms.iter()).cloned(),
            min_opt(self.precision, o.precision),
        )
    }

    pub fn neg(&self) -> Self {
        NovikovScalar {
            field: self.field,
            terms: self.terms.iter().map(|(e, c)| (*e, c.neg())).collect(),
            precision: self.precision,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &Coeff) -> Self {
        Self::from_terms(
            self.field,
            self.terms.iter().map(|(e, x)| (*e, x.mul(c))),
            self.precision,
        )
    }

    /// Multiplies by `T^e`; the precision moves with the series.
    pub fn shift(&self, e: Rat) -> Self {
        NovikovScalar {
            field: self.field,
            terms: self.terms.iter().map(|(x, c)| (x + e, c.clone())).collect(),
            precision: self.precision.map(|p| p + e),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.check(o);
        let contract = |p: Option<Rat>, v: Option<Rat>| -> Option<Rat> {
            p.map(|p| match v {
                Some(v) if v < Rat::zero() => p + v,
                _ => p,
            })
        };
        let prec = min_opt(contract(self.precision, o.val()), contract(o.precision, self.val()));
        let mut out = Vec::with_capacity(self.terms.len() * o.terms.len());
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                out.push((e1 + e2, c1.mul(c2)));
            }
        }
        Self::from_terms(self.field, out, prec)
    }

    /// Inverse by leading-term factorization and a geometric series.
    ///
    /// For an exact input the series is cut at `cutoff` (relative to the
    /// leading exponent); for a truncated input the cutoff is forced by the
    /// precision and the result carries precision `p - 2 val(a)`.
    pub fn invert_with(&self, cutoff: Option<Rat>) -> Result<Self, NovikovError> {
        let (v, c) = self.leading().cloned().ok_or(NovikovError::InvertZero)?;
        let cinv = c.inv().ok_or(NovikovError::InvertZero)?;
        // self = c T^v (1 + u), val(u) > 0
        let u = NovikovScalar::from_terms(
            self.field,
            self.terms[1..].iter().map(|(e, x)| (e - v, x.mul(&cinv))),
            self.precision.map(|p| p - v),
        );
        let rel = match (u.precision, cutoff) {
            (Some(p), _) => Some(p),
            (None, Some(c)) => Some(c),
            (None, None) => None,
        };
        if u.is_zero() {
            let out = NovikovScalar::monomial(cinv, -v);
            let prec = self.precision.map(|p| p - v - v);
            return Ok(out.with_precision(prec));
        }
        let rel = match rel {
            Some(r) => r,
            None => return Err(NovikovError::Parse("exact non-monomial inverse needs a cutoff".into())),
        };
        let neg_u = u.neg().with_precision(Some(rel));
        let mut sum = NovikovScalar::one(self.field).with_precision(Some(rel));
        let mut power = NovikovScalar::one(self.field).with_precision(Some(rel));
        loop {
            power = power.mul(&neg_u);
            if power.is_zero() {
                break;
            }
            sum = sum.add(&power);
        }
        Ok(sum.scale(&cinv).shift(-v))
    }

    pub fn invert(&self) -> Result<Self, NovikovError> {
        self.invert_with(None)
    }

    /// Verifies every exponent lies on `(1/d)Z`.
    pub fn check_lattice(&self, d: i64) -> Result<(), NovikovError> {
        for (e, _) in &self.terms {
            if !crate::rat::on_lattice(e, d) {
                return Err(NovikovError::OffLattice { exp: fmt_rat(e), denominator: d });
            }
        }
        Ok(())
    }

    /// Parses the text form `"c1*T^{l1} + c2*T^{l2}"`.
    pub fn parse(field: BaseField, s: &str, precision: Option<Rat>) -> Result<Self, NovikovError> {
        let bad = || NovikovError::Parse(s.to_string());
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() || compact == "0" {
            return Ok(Self::zero(field).with_precision(precision));
        }
        let mut pieces: Vec<String> = Vec::new();
        let mut depth = 0i32;
        let mut cur = String::new();
        for ch in compact.chars() {
            match ch {
                '{' => depth += 1,
                '}' => depth -= 1,
                _ => {}
            }
            if (ch == '+' || ch == '-') && depth == 0 && !cur.is_empty() && cur != "+" && cur != "-" && !cur.ends_with('^') {
                pieces.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
        }
        pieces.push(cur);
        let mut terms = Vec::new();
        for piece in pieces {
            let body = piece.strip_prefix('+').unwrap_or(&piece);
            let (coef_str, t_part) = match body.find('T') {
                Some(i) => (&body[..i], Some(&body[i + 1..])),
                None => (body, None),
            };
            let coef_str = coef_str.strip_suffix('*').unwrap_or(coef_str);
            let coef = match coef_str {
                "" => field.one(),
                "-" => field.from_i64(-1),
                c => field.parse_coeff(c).map_err(|_| bad())?,
            };
            let exp = match t_part {
                None => Rat::zero(),
                Some("") => Rat::one(),
                Some(t) => {
                    let t = t.strip_prefix('^').ok_or_else(bad)?;
                    let t = t.trim_start_matches('{').trim_end_matches('}');
                    parse_rat(t).map_err(|_| bad())?
                }
            };
            terms.push((exp, coef));
        }
        Ok(Self::from_terms(field, terms, precision))
    }

    pub fn to_json(&self) -> ScalarJson {
        ScalarJson {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermJson { t: *e, c: c.to_string() })
                .collect(),
            precision: self.precision,
        }
    }

    pub fn from_json(field: BaseField, j: &ScalarJson) -> Result<Self, NovikovError> {
        let mut terms = Vec::new();
        for t in &j.terms {
            terms.push((t.t, field.parse_coeff(&t.c)?));
        }
        Ok(Self::from_terms(field, terms, j.precision))
    }
}

impl fmt::Display for NovikovScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        for (k, (e, c)) in self.terms.iter().enumerate() {
            let c = if k > 0 && c.is_negative() {
                write!(f, " - ")?;
                c.neg()
            } else {
                if k > 0 {
                    write!(f, " + ")?;
                }
                c.clone()
            };
            write!(f, "{}*T^{{{}}}", c, fmt_rat(e))?;
        }
        if let Some(p) = self.precision {
            write!(f, " + O(T^{{{}}})", fmt_rat(&p))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    #[serde(with = "crate::rat::as_str")]
    pub t: Rat,
    pub c: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarJson {
    pub terms: Vec<TermJson>,
    #[serde(with = "crate::rat::opt_str", default)]
    pub precision: Option<Rat>,
}
