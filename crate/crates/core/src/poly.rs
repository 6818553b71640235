//! Dense polynomials with exact rational coefficients.

use std::cmp::Ordering;

use rug::float::Round;
use rug::ops::{AddAssignRound, MulAssignRound};
use rug::{Float, Integer, Rational};

use crate::arith::{rd, ru, CertifiedValue};

#[derive(Clone, Debug)]
pub struct Polynomial {
    /// Ascending order: `coeffs[k]` multiplies `x^k`.
    coeffs: Vec<Rational>,
    approx: Vec<f64>,
    /// Outward Float enclosures of the coefficients (exact when dyadic).
    bounds: Vec<(Float, Float)>,
}

const COEFF_BITS: u32 = crate::arith::EXACT_CAP_BITS + 128;

fn coeff_bounds(c: &Rational) -> (Float, Float) {
    if c.denom().is_power_of_two() {
        let bits = c.numer().significant_bits().max(1);
        let v = Float::with_val(bits, c);
        return (v.clone(), v);
    }
    (rd(COEFF_BITS, c), ru(COEFF_BITS, c))
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl Eq for Polynomial {}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| *c == 0) {
            coeffs.pop();
        }
        let approx = coeffs.iter().map(|c| c.to_f64()).collect();
        let bounds = coeffs.iter().map(coeff_bounds).collect();
        Polynomial { coeffs, approx, bounds }
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Self::new(c.iter().map(|&v| Rational::from(v)).collect())
    }

    pub fn zero() -> Self {
        Self::new(vec![])
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c])
    }

    pub fn x() -> Self {
        Self::new(vec![Rational::new(), Rational::from(1)])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn leading(&self) -> Rational {
        self.coeffs.last().cloned().unwrap_or_default()
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| Rational::from(c * k as u32))
                .collect(),
        )
    }

    pub fn eval_rational(&self, x: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn sign_at(&self, x: &Rational) -> Ordering {
        self.eval_rational(x).cmp0()
    }

    /// Horner evaluation; exact when `x` is exact and the result is small.
    pub fn eval(&self, x: &CertifiedValue, prec: u32) -> CertifiedValue {
        if let Some(r) = x.exact_value() {
            let v = self.eval_rational(r);
            if v.numer().significant_bits() + v.denom().significant_bits() <= crate::arith::EXACT_CAP_BITS {
                return CertifiedValue::exact(v, prec);
            }
        }
        let mut acc = CertifiedValue::exact(self.leading(), prec);
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul(x, prec).add(&CertifiedValue::exact(c.clone(), prec), prec);
        }
        if self.coeffs.is_empty() {
            return CertifiedValue::from_int(0, prec);
        }
        acc
    }

    /// Round-to-nearest evaluation, for approximate root finding only.
    pub fn eval_float(&self, x: &Float) -> Float {
        let prec = x.prec();
        let mut acc = Float::new(prec);
        for (c, _) in self.bounds.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    /// Directed-rounding bounds of p at a single float.
    pub fn eval_point_bounds(&self, x: &Float, prec: u32) -> (Float, Float) {
        let mut lo = Float::new(prec);
        let mut hi = Float::new(prec);
        let neg = x.is_sign_negative();
        for (cl, ch) in self.bounds.iter().rev() {
            if neg {
                std::mem::swap(&mut lo, &mut hi);
            }
            lo.mul_assign_round(x, Round::Down);
            hi.mul_assign_round(x, Round::Up);
            lo.add_assign_round(cl, Round::Down);
            hi.add_assign_round(ch, Round::Up);
        }
        (lo, hi)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.approx.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![Rational::new(); n];
        for (k, c) in self.coeffs.iter().enumerate() {
            out[k] += c;
        }
        for (k, c) in other.coeffs.iter().enumerate() {
            out[k] += c;
        }
        Self::new(out)
    }

    pub fn scale(&self, s: &Rational) -> Self {
        Self::new(self.coeffs.iter().map(|c| Rational::from(c * s)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&Rational::from(-1)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Rational::new(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += Rational::from(a * b);
            }
        }
        Self::new(out)
    }

    /// `self(inner(x))`.
    pub fn compose(&self, inner: &Self) -> Self {
        let mut acc = Self::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(inner).add(&Self::constant(c.clone()));
        }
        acc
    }

    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let mut rem = self.coeffs.clone();
        let dd = d.degree();
        let lead = d.leading();
        if self.coeffs.len() < d.coeffs.len() {
            return (Self::zero(), self.clone());
        }
        let mut quot = vec![Rational::new(); self.coeffs.len() - dd];
        for k in (0..quot.len()).rev() {
            let q = Rational::from(&rem[k + dd] / &lead);
            if q != 0 {
                for (j, c) in d.coeffs.iter().enumerate() {
                    rem[k + j] -= Rational::from(&q * c);
                }
            }
            quot[k] = q;
        }
        rem.truncate(dd);
        (Self::new(quot), Self::new(rem))
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let l = self.leading();
        self.scale(&Rational::from(l.recip_ref()))
    }

    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// `self / gcd(self, self')`: same roots, all simple.
    pub fn squarefree(&self) -> Self {
        let g = self.gcd(&self.derivative());
        if g.degree() == 0 {
            return self.clone();
        }
        self.div_rem(&g).0
    }

    pub fn sturm_sequence(&self) -> Vec<Self> {
        let mut seq = vec![self.clone(), self.derivative()];
        loop {
            let n = seq.len();
            if seq[n - 1].is_zero() {
                seq.pop();
                break;
            }
            let (_, r) = seq[n - 2].div_rem(&seq[n - 1]);
            if r.is_zero() {
                break;
            }
            seq.push(r.scale(&Rational::from(-1)));
        }
        seq
    }

    /// Distinct real roots of `self` in the open interval `(a, b)`, isolated
    /// and refined until each bracket is narrower than `2^-bits`. Exact
    /// rational roots are reported exactly.
    pub fn real_roots(&self, a: &Rational, b: &Rational, bits: u32) -> Vec<RootBracket> {
        if self.degree() == 0 {
            return vec![];
        }
        let mut p = self.squarefree();
        for e in [a, b] {
            if p.sign_at(e) == Ordering::Equal {
                let lin = Polynomial::new(vec![Rational::from(-e), Rational::from(1)]);
                p = p.div_rem(&lin).0;
            }
        }
        let sturm = p.sturm_sequence();
        let mut out = Vec::new();
        let mut stack = vec![(a.clone(), b.clone())];
        while let Some((lo, hi)) = stack.pop() {
            let count = variations(&sturm, &lo) as i64 - variations(&sturm, &hi) as i64;
            if count <= 0 {
                continue;
            }
            if count == 1 {
                out.push(refine(&p, lo, hi, bits));
                continue;
            }
            let mid = Rational::from(&lo + &hi) / 2u32;
            if p.sign_at(&mid) == Ordering::Equal {
                let mut d = Rational::from(&hi - &lo) / 4u32;
                loop {
                    let l = Rational::from(&mid - &d);
                    let h = Rational::from(&mid + &d);
                    if p.sign_at(&l) != Ordering::Equal
                        && p.sign_at(&h) != Ordering::Equal
                        && variations(&sturm, &l) as i64 - variations(&sturm, &h) as i64 == 1
                    {
                        out.push(RootBracket {
                            lo: mid.clone(),
                            hi: mid.clone(),
                            exact: Some(mid.clone()),
                        });
                        stack.push((lo.clone(), l));
                        stack.push((h, hi.clone()));
                        break;
                    }
                    d /= 2u32;
                }
            } else {
                stack.push((lo, mid.clone()));
                stack.push((mid, hi));
            }
        }
        out.sort_by(|x, y| x.lo.cmp(&y.lo));
        out
    }
}

fn variations(seq: &[Polynomial], x: &Rational) -> usize {
    let mut last = Ordering::Equal;
    let mut n = 0;
    for p in seq {
        let s = p.sign_at(x);
        if s == Ordering::Equal {
            continue;
        }
        if last != Ordering::Equal && s != last {
            n += 1;
        }
        last = s;
    }
    n
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootBracket {
    pub lo: Rational,
    pub hi: Rational,
    pub exact: Option<Rational>,
}

fn refine(p: &Polynomial, mut lo: Rational, mut hi: Rational, bits: u32) -> RootBracket {
    let s_lo = p.sign_at(&lo);
    let target = Rational::from((Integer::from(1), Integer::from(1) << bits));
    let mut iter = 0u32;
    while Rational::from(&hi - &lo) > target {
        if iter % 16 == 8 {
            let cand = simplest_between(&lo, &hi);
            if p.sign_at(&cand) == Ordering::Equal {
                return RootBracket {
                    lo: cand.clone(),
                    hi: cand.clone(),
                    exact: Some(cand),
                };
            }
        }
        let mid = Rational::from(&lo + &hi) / 2u32;
        match p.sign_at(&mid) {
            Ordering::Equal => {
                return RootBracket {
                    lo: mid.clone(),
                    hi: mid.clone(),
                    exact: Some(mid),
                }
            }
            s if s == s_lo => lo = mid,
            _ => hi = mid,
        }
        iter += 1;
    }
    RootBracket { lo, hi, exact: None }
}

/// The rational with smallest denominator in the closed interval `[lo, hi]`
/// (Stern–Brocot descent), for `0 <= lo <= hi`.
pub fn simplest_between(lo: &Rational, hi: &Rational) -> Rational {
    let fl = lo.clone().floor();
    let lo_frac = Rational::from(lo - &fl);
    if lo_frac == 0 {
        return fl;
    }
    let next = Rational::from(&fl + 1u32);
    if *hi >= next {
        return next;
    }
    // both in (fl, fl+1): recurse on reciprocals of the fractional parts
    let hi_frac = Rational::from(hi - &fl);
    let inner = simplest_between(
        &Rational::from(hi_frac.recip_ref()),
        &Rational::from(lo_frac.recip_ref()),
    );
    fl + Rational::from(inner.recip_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn derivative_and_eval() {
        let p = Polynomial::from_ints(&[0, 4, -4]);
        assert_eq!(p.derivative(), Polynomial::from_ints(&[4, -8]));
        assert_eq!(p.eval_rational(&q(3, 10)), q(21, 25));
    }

    #[test]
    fn division_identity() {
        let a = Polynomial::from_ints(&[1, -3, 0, 2, 5]);
        let b = Polynomial::from_ints(&[2, 1, 3]);
        let (qt, r) = a.div_rem(&b);
        assert_eq!(qt.mul(&b).add(&r), a);
        assert!(r.degree() < b.degree());
    }

    #[test]
    fn squarefree_removes_repeated_roots() {
        // (x - 1/2)^2 (x - 1/4)
        let a = Polynomial::new(vec![q(-1, 2), q(1, 1)]);
        let b = Polynomial::new(vec![q(-1, 4), q(1, 1)]);
        let p = a.mul(&a).mul(&b);
        assert_eq!(p.squarefree().monic(), a.mul(&b).monic());
    }

    #[test]
    fn exact_dyadic_roots() {
        let p = Polynomial::from_ints(&[3, -16, 16]); // (4x-1)(4x-3)
        let roots = p.real_roots(&q(0, 1), &q(1, 1), 64);
        let ex: Vec<_> = roots.iter().map(|r| r.exact.clone()).collect();
        assert_eq!(ex, vec![Some(q(1, 4)), Some(q(3, 4))]);
    }

    #[test]
    fn non_dyadic_rational_root_found_exactly() {
        let p = Polynomial::new(vec![q(-1, 3), q(1, 1)]);
        let roots = p.real_roots(&q(0, 1), &q(1, 1), 64);
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].exact, Some(q(1, 3)));
    }

    #[test]
    fn irrational_root_bracket() {
        let p = Polynomial::from_ints(&[-1, 0, 2]); // 2x^2 - 1
        let roots = p.real_roots(&q(0, 1), &q(1, 1), 80);
        assert_eq!(roots.len(), 1);
        let r = &roots[0];
        assert!(r.exact.is_none());
        let s = Float::with_val(200, 0.5f64).sqrt();
        assert!(s >= r.lo && s <= r.hi);
        assert!(Rational::from(&r.hi - &r.lo) < q(1, 1 << 40));
    }

    #[test]
    fn roots_at_interval_ends_are_excluded() {
        let p = Polynomial::from_ints(&[0, 1, -1]); // x(1-x)
        assert!(p.real_roots(&q(0, 1), &q(1, 1), 64).is_empty());
    }

    #[test]
    fn simplest_rational() {
        assert_eq!(simplest_between(&q(3, 10), &q(4, 10)), q(1, 3));
        assert_eq!(simplest_between(&q(1, 2), &q(1, 2)), q(1, 2));
        assert_eq!(simplest_between(&q(5, 4), &q(7, 4)), q(3, 2));
    }

    #[test]
    fn compose_chebyshev() {
        // T2(1-2x) = 2(1-2x)^2 - 1
        let t2 = Polynomial::from_ints(&[-1, 0, 2]);
        let inner = Polynomial::from_ints(&[1, -2]);
        assert_eq!(t2.compose(&inner), Polynomial::from_ints(&[1, -8, 8]));
    }
}
