//! Outward-rounded interval arithmetic on MPFR floats.
//!
//! Every [`CertifiedValue`] carries a closed enclosure `[lo, hi]` and, while
//! the value stays representable at modest size, the exact rational it
//! encloses. Operations on two exact operands produce exact results; as soon
//! as either side is inexact (or the rational grows past
//! [`EXACT_CAP_BITS`]) the computation continues with directed rounding.

use std::cmp::Ordering;
use std::fmt;

use rug::float::{Constant, Round};
use rug::ops::AssignRound;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest combined numerator + denominator size kept as an exact shadow.
pub const EXACT_CAP_BITS: u32 = 16384;

pub const DEFAULT_INITIAL_BITS: u32 = 128;
pub const DEFAULT_MAX_BITS: u32 = 16384;

/// Environment variable that overrides the precision ceiling.
pub const MAX_BITS_ENV: &str = "MDYN_MAX_BITS";

pub(crate) fn rd<T>(prec: u32, v: T) -> Float
where
    Float: AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, v, Round::Down).0
}

pub(crate) fn ru<T>(prec: u32, v: T) -> Float
where
    Float: AssignRound<T, Round = Round, Ordering = Ordering>,
{
    Float::with_val_round(prec, v, Round::Up).0
}

fn small(r: &Rational) -> bool {
    r.numer().significant_bits() + r.denom().significant_bits() <= EXACT_CAP_BITS
}

fn fmin(a: Float, b: Float) -> Float {
    if b < a {
        b
    } else {
        a
    }
}

fn fmax(a: Float, b: Float) -> Float {
    if b > a {
        b
    } else {
        a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CertificationMode {
    #[default]
    Interval,
    /// Same enclosures, reported as midpoint and radius.
    Ball,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub initial_bits: u32,
    pub max_bits: u32,
    #[serde(default = "default_factor")]
    pub escalation_factor: u32,
    #[serde(default)]
    pub certification_mode: CertificationMode,
}

fn default_factor() -> u32 {
    2
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        PrecisionConfig {
            initial_bits: DEFAULT_INITIAL_BITS,
            max_bits: DEFAULT_MAX_BITS,
            escalation_factor: 2,
            certification_mode: CertificationMode::Interval,
        }
    }
}

impl PrecisionConfig {
    pub fn new(initial_bits: u32, max_bits: u32) -> Result<Self> {
        let cfg = PrecisionConfig {
            initial_bits,
            max_bits,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_bits < 64 {
            return Err(Error::Config(format!(
                "initial_bits must be at least 64, got {}",
                self.initial_bits
            )));
        }
        if self.max_bits < self.initial_bits {
            return Err(Error::Config(format!(
                "max_bits {} below initial_bits {}",
                self.max_bits, self.initial_bits
            )));
        }
        if self.escalation_factor < 2 {
            return Err(Error::Config("escalation_factor must be at least 2".into()));
        }
        Ok(())
    }

    /// Applies the `MDYN_MAX_BITS` override, if set and parseable.
    pub fn with_env_override(mut self) -> Self {
        if let Some(bits) = std::env::var(MAX_BITS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u32>().ok())
        {
            self.max_bits = bits.max(self.initial_bits);
        }
        self
    }

    /// Precision levels tried in order: initial, initial·f, … capped at max.
    pub fn ladder(&self) -> Vec<u32> {
        self.ladder_from(self.initial_bits)
    }

    pub fn ladder_from(&self, start: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut b = start.clamp(self.initial_bits, self.max_bits);
        loop {
            out.push(b);
            if b >= self.max_bits {
                break;
            }
            b = b.saturating_mul(self.escalation_factor).min(self.max_bits);
        }
        out
    }
}

/// A rigorous enclosure `[lo, hi]`, optionally with the exact rational value.
#[derive(Clone, Debug)]
pub struct CertifiedValue {
    lo: Float,
    hi: Float,
    exact: Option<Rational>,
}

impl PartialEq for CertifiedValue {
    fn eq(&self, other: &Self) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.exact == other.exact
    }
}

impl CertifiedValue {
    pub fn exact(r: Rational, prec: u32) -> Self {
        let lo = rd(prec, &r);
        let hi = ru(prec, &r);
        CertifiedValue { lo, hi, exact: Some(r) }
    }

    pub fn from_rational(r: &Rational, prec: u32) -> Self {
        Self::exact(r.clone(), prec)
    }

    pub fn from_int(v: i64, prec: u32) -> Self {
        Self::exact(Rational::from(v), prec)
    }

    /// The exact binary value of `v`.
    pub fn from_f64(v: f64, prec: u32) -> Self {
        let r = Rational::from_f64(v).expect("finite f64");
        Self::exact(r, prec)
    }

    /// A point enclosure of `v` that does not carry an exact shadow.
    pub fn point(v: Float) -> Self {
        CertifiedValue {
            lo: v.clone(),
            hi: v,
            exact: None,
        }
    }

    pub fn interval(lo: Float, hi: Float) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        CertifiedValue { lo, hi, exact: None }
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn exact_value(&self) -> Option<&Rational> {
        self.exact.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Drops the exact shadow, keeping the enclosure.
    pub fn forget_exact(mut self) -> Self {
        self.exact = None;
        self
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    /// Re-expresses the enclosure at `prec` bits, rounding outward.
    pub fn to_prec(&self, prec: u32) -> Self {
        match &self.exact {
            Some(r) => Self::exact(r.clone(), prec),
            None => CertifiedValue {
                lo: rd(prec, &self.lo),
                hi: ru(prec, &self.hi),
                exact: None,
            },
        }
    }

    pub fn mid(&self, prec: u32) -> Float {
        if let Some(r) = &self.exact {
            return Float::with_val(prec, r);
        }
        let s = Float::with_val(prec.max(self.prec()) + 1, &self.lo + &self.hi);
        Float::with_val(prec, s / 2u32)
    }

    pub fn mid_f64(&self) -> f64 {
        match &self.exact {
            Some(r) => r.to_f64(),
            None => self.mid(64).to_f64(),
        }
    }

    /// Upper bound on `hi - lo`.
    pub fn width(&self) -> Float {
        if self.exact.is_some() && self.lo == self.hi {
            return Float::new(self.prec());
        }
        ru(self.prec().max(64), &self.hi - &self.lo)
    }

    pub fn width_f64(&self) -> f64 {
        self.width().to_f64_round(Round::Up)
    }

    pub fn contains_rational(&self, r: &Rational) -> bool {
        if let Some(e) = &self.exact {
            return e == r;
        }
        self.lo <= *r && self.hi >= *r
    }

    /// `other` ⊆ `self`.
    pub fn contains(&self, other: &CertifiedValue) -> bool {
        if let Some(r) = &other.exact {
            return self.contains_rational(r);
        }
        self.lo <= other.lo && self.hi >= other.hi
    }

    pub fn overlaps(&self, other: &CertifiedValue) -> bool {
        if let (Some(a), Some(b)) = (&self.exact, &other.exact) {
            return a == b;
        }
        !(self.hi < other.lo || other.hi < self.lo)
    }

    /// Certified comparison; `None` when the enclosures cannot be separated.
    pub fn cmp_certain(&self, other: &CertifiedValue) -> Option<Ordering> {
        if let (Some(a), Some(b)) = (&self.exact, &other.exact) {
            return Some(a.cmp(b));
        }
        if let Some(b) = &other.exact {
            if self.hi < *b {
                return Some(Ordering::Less);
            }
            if self.lo > *b {
                return Some(Ordering::Greater);
            }
            return None;
        }
        if let Some(a) = &self.exact {
            if *a < other.lo {
                return Some(Ordering::Less);
            }
            if *a > other.hi {
                return Some(Ordering::Greater);
            }
            return None;
        }
        if self.hi < other.lo {
            Some(Ordering::Less)
        } else if self.lo > other.hi {
            Some(Ordering::Greater)
        } else {
            None
        }
    }

    pub fn certainly_positive(&self) -> bool {
        match &self.exact {
            Some(r) => *r > 0,
            None => self.lo > 0,
        }
    }

    pub fn certainly_negative(&self) -> bool {
        match &self.exact {
            Some(r) => *r < 0,
            None => self.hi < 0,
        }
    }

    pub fn contains_zero(&self) -> bool {
        !self.certainly_positive() && !self.certainly_negative()
    }

    fn exact_op(
        &self,
        other: &CertifiedValue,
        prec: u32,
        f: impl FnOnce(&Rational, &Rational) -> Option<Rational>,
    ) -> Option<CertifiedValue> {
        let (a, b) = (self.exact.as_ref()?, other.exact.as_ref()?);
        let r = f(a, b)?;
        if small(&r) {
            Some(Self::exact(r, prec))
        } else {
            None
        }
    }

    pub fn add(&self, other: &CertifiedValue, prec: u32) -> CertifiedValue {
        if let Some(v) = self.exact_op(other, prec, |a, b| Some(Rational::from(a + b))) {
            return v;
        }
        CertifiedValue::interval(rd(prec, &self.lo + &other.lo), ru(prec, &self.hi + &other.hi))
    }

    pub fn sub(&self, other: &CertifiedValue, prec: u32) -> CertifiedValue {
        if let Some(v) = self.exact_op(other, prec, |a, b| Some(Rational::from(a - b))) {
            return v;
        }
        CertifiedValue::interval(rd(prec, &self.lo - &other.hi), ru(prec, &self.hi - &other.lo))
    }

    pub fn neg(&self) -> CertifiedValue {
        CertifiedValue {
            lo: Float::with_val(self.hi.prec(), -&self.hi),
            hi: Float::with_val(self.lo.prec(), -&self.lo),
            exact: self.exact.as_ref().map(|r| Rational::from(-r)),
        }
    }

    pub fn mul(&self, other: &CertifiedValue, prec: u32) -> CertifiedValue {
        if let Some(v) = self.exact_op(other, prec, |a, b| Some(Rational::from(a * b))) {
            return v;
        }
        let (a, b, c, d) = (&self.lo, &self.hi, &other.lo, &other.hi);
        if *a >= 0 && *c >= 0 {
            return CertifiedValue::interval(rd(prec, a * c), ru(prec, b * d));
        }
        let lo = fmin(
            fmin(rd(prec, a * c), rd(prec, a * d)),
            fmin(rd(prec, b * c), rd(prec, b * d)),
        );
        let hi = fmax(
            fmax(ru(prec, a * c), ru(prec, a * d)),
            fmax(ru(prec, b * c), ru(prec, b * d)),
        );
        CertifiedValue::interval(lo, hi)
    }

    pub fn mul_rational(&self, r: &Rational, prec: u32) -> CertifiedValue {
        self.mul(&CertifiedValue::exact(r.clone(), prec), prec)
    }

    pub fn div(&self, other: &CertifiedValue, prec: u32) -> Result<CertifiedValue> {
        if other.contains_zero() {
            return Err(Error::DivisionByZero);
        }
        if let Some(v) = self.exact_op(other, prec, |a, b| Some(Rational::from(a / b))) {
            return Ok(v);
        }
        let (a, b, c, d) = (&self.lo, &self.hi, &other.lo, &other.hi);
        let lo = fmin(
            fmin(rd(prec, a / c), rd(prec, a / d)),
            fmin(rd(prec, b / c), rd(prec, b / d)),
        );
        let hi = fmax(
            fmax(ru(prec, a / c), ru(prec, a / d)),
            fmax(ru(prec, b / c), ru(prec, b / d)),
        );
        Ok(CertifiedValue::interval(lo, hi))
    }

    pub fn abs(&self) -> CertifiedValue {
        if self.certainly_negative() || (self.hi <= 0 && self.exact.is_none()) {
            return self.neg();
        }
        if self.lo >= 0 {
            return self.clone();
        }
        let hi = fmax(Float::with_val(self.lo.prec(), -&self.lo), self.hi.clone());
        CertifiedValue::interval(Float::new(hi.prec()), hi)
    }

    pub fn sqr(&self, prec: u32) -> CertifiedValue {
        if let Some(r) = &self.exact {
            let s = Rational::from(r * r);
            if small(&s) {
                return Self::exact(s, prec);
            }
        }
        let a = self.abs();
        CertifiedValue::interval(rd(prec, &a.lo * &a.lo), ru(prec, &a.hi * &a.hi))
    }

    pub fn sqrt(&self, prec: u32) -> Result<CertifiedValue> {
        if self.certainly_negative() {
            return Err(Error::Domain("sqrt of negative value".into()));
        }
        if let Some(r) = &self.exact {
            if r.numer().is_perfect_square() && r.denom().is_perfect_square() {
                let n = Integer::from(r.numer().sqrt_ref());
                let d = Integer::from(r.denom().sqrt_ref());
                return Ok(Self::exact(Rational::from((n, d)), prec));
            }
        }
        let mut lo = rd(prec, &self.lo);
        if lo < 0 {
            lo = Float::new(prec);
        }
        lo.sqrt_round(Round::Down);
        let mut hi = ru(prec, &self.hi);
        hi.sqrt_round(Round::Up);
        Ok(CertifiedValue::interval(lo, hi))
    }

    pub fn ln(&self, prec: u32) -> Result<CertifiedValue> {
        if !self.certainly_positive() {
            return Err(Error::Domain("log of non-positive value".into()));
        }
        if self.exact.as_ref().is_some_and(|r| *r == 1) {
            return Ok(Self::from_int(0, prec));
        }
        let mut lo = rd(prec, &self.lo);
        if lo <= 0 {
            // exact positive value below float resolution at this precision
            lo = Float::with_val(prec, self.exact.as_ref().unwrap());
            lo.next_down();
        }
        lo.ln_round(Round::Down);
        let mut hi = ru(prec, &self.hi);
        hi.ln_round(Round::Up);
        Ok(CertifiedValue::interval(lo, hi))
    }

    pub fn exp(&self, prec: u32) -> CertifiedValue {
        let mut lo = rd(prec, &self.lo);
        lo.exp_round(Round::Down);
        let mut hi = ru(prec, &self.hi);
        hi.exp_round(Round::Up);
        CertifiedValue::interval(lo, hi)
    }

    pub fn pi(prec: u32) -> CertifiedValue {
        CertifiedValue::interval(rd(prec, Constant::Pi), ru(prec, Constant::Pi))
    }

    pub fn hull(&self, other: &CertifiedValue) -> CertifiedValue {
        if let (Some(a), Some(b)) = (&self.exact, &other.exact) {
            if a == b {
                return self.clone();
            }
        }
        let lo = if other.lo < self.lo {
            other.lo.clone()
        } else {
            self.lo.clone()
        };
        let hi = if other.hi > self.hi {
            other.hi.clone()
        } else {
            self.hi.clone()
        };
        CertifiedValue::interval(lo, hi)
    }

    /// Intersects with `[0, 1]`; sound whenever the true value is known to
    /// lie in the unit interval.
    pub fn clamp_unit(mut self) -> CertifiedValue {
        if self.exact.is_some() {
            return self;
        }
        if self.lo < 0 {
            self.lo = Float::new(self.lo.prec());
        }
        if self.hi > 1 {
            self.hi = Float::with_val(self.hi.prec(), 1);
        }
        if self.lo > self.hi {
            // rounding pushed the whole enclosure outside; collapse to the bound
            let v = if self.lo > 0 { self.lo.clone() } else { self.hi.clone() };
            self.lo = v.clone();
            self.hi = v;
        }
        self
    }

    /// Decimal string of the midpoint with `digits` significant digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        if let Some(r) = &self.exact {
            if *r.denom() == 1 {
                return r.numer().to_string();
            }
        }
        let prec = self.prec().max(64);
        let m = self.mid(prec);
        if m.is_zero() {
            return "0".into();
        }
        let s = m.to_string_radix(10, Some(digits));
        tidy_decimal(&s)
    }
}

fn tidy_decimal(s: &str) -> String {
    // MPFR emits e.g. "1.2500000e-1"; strip trailing zeros of the mantissa
    let (mant, exp) = match s.find('e') {
        Some(i) => (&s[..i], Some(&s[i..])),
        None => (s, None),
    };
    let mant = if mant.contains('.') {
        mant.trim_end_matches('0').trim_end_matches('.')
    } else {
        mant
    };
    match exp {
        Some(e) => format!("{mant}{e}"),
        None => mant.to_string(),
    }
}

impl fmt::Display for CertifiedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(r) => write!(f, "{r}"),
            None => write!(
                f,
                "[{}, {}]",
                tidy_decimal(&self.lo.to_string_radix(10, Some(20))),
                tidy_decimal(&self.hi.to_string_radix(10, Some(20)))
            ),
        }
    }
}

impl Serialize for CertifiedValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("CertifiedValue", 4)?;
        st.serialize_field("lo", &tidy_decimal(&self.lo.to_string_radix(10, Some(30))))?;
        st.serialize_field("hi", &tidy_decimal(&self.hi.to_string_radix(10, Some(30))))?;
        st.serialize_field("exact", &self.exact.as_ref().map(|r| r.to_string()))?;
        st.serialize_field("bits", &self.prec())?;
        st.end()
    }
}

/// Parses "p/q", "p", or a finite decimal such as "0.3" into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: Integer = p.trim().parse().map_err(|_| Error::Parse(t.into()))?;
        let q: Integer = q.trim().parse().map_err(|_| Error::Parse(t.into()))?;
        if q == 0 {
            return Err(Error::Parse(t.into()));
        }
        return Ok(Rational::from((p, q)));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, t),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Parse(t.into()));
    }
    let digits = format!("{int_part}{frac_part}");
    let n: Integer = if digits.is_empty() {
        Integer::new()
    } else {
        digits.parse().map_err(|_| Error::Parse(t.into()))?
    };
    let d = Integer::from(Integer::u_pow_u(10, frac_part.len() as u32));
    let r = Rational::from((n, d));
    Ok(if neg { -r } else { r })
}

pub fn rational_string(r: &Rational) -> String {
    r.to_string()
}
