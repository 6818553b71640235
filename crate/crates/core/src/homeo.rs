//! Increasing homeomorphisms of [0, 1] used to build conjugate maps.

use rug::float::{Constant, Round};
use rug::{Float, Rational};

use crate::arith::{rd, ru, CertifiedValue};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HomeoSpec {
    Identity,
    /// x ↦ x²
    Square,
    /// x ↦ √x
    Sqrt,
    /// x ↦ sin²(πx/2), the conjugacy between the tent and Ulam maps.
    SinSquared,
    /// y ↦ (2/π)·asin(√y), inverse of `SinSquared`.
    ArcsinSqrt,
    /// Monotone piecewise-linear map through the given knots.
    PiecewiseLinear(Vec<(Rational, Rational)>),
}

const GUARD: u32 = 16;

fn sin2_table() -> Vec<(Rational, Rational)> {
    [(0, 1, 0, 1), (1, 3, 1, 4), (1, 2, 1, 2), (2, 3, 3, 4), (1, 1, 1, 1)]
        .iter()
        .map(|&(a, b, c, d)| (Rational::from((a, b)), Rational::from((c, d))))
        .collect()
}

impl HomeoSpec {
    pub fn form(&self) -> &'static str {
        match self {
            HomeoSpec::Identity => "identity",
            HomeoSpec::Square => "square",
            HomeoSpec::Sqrt => "sqrt",
            HomeoSpec::SinSquared => "sin_squared",
            HomeoSpec::ArcsinSqrt => "arcsin_sqrt",
            HomeoSpec::PiecewiseLinear(_) => "piecewise_linear",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let HomeoSpec::PiecewiseLinear(knots) = self {
            if knots.len() < 2 {
                return Err(Error::InvalidHomeo("need at least two knots".into()));
            }
            let (f, l) = (&knots[0], &knots[knots.len() - 1]);
            if f.0 != 0 || f.1 != 0 || l.0 != 1 || l.1 != 1 {
                return Err(Error::InvalidHomeo("knots must start at (0,0) and end at (1,1)".into()));
            }
            for w in knots.windows(2) {
                if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                    return Err(Error::InvalidHomeo("knots must be strictly increasing".into()));
                }
            }
        }
        Ok(())
    }

    pub fn inverse(&self) -> HomeoSpec {
        match self {
            HomeoSpec::Identity => HomeoSpec::Identity,
            HomeoSpec::Square => HomeoSpec::Sqrt,
            HomeoSpec::Sqrt => HomeoSpec::Square,
            HomeoSpec::SinSquared => HomeoSpec::ArcsinSqrt,
            HomeoSpec::ArcsinSqrt => HomeoSpec::SinSquared,
            HomeoSpec::PiecewiseLinear(k) => {
                HomeoSpec::PiecewiseLinear(k.iter().map(|(a, b)| (b.clone(), a.clone())).collect())
            }
        }
    }

    fn exact_image(&self, r: &Rational) -> Option<Rational> {
        match self {
            HomeoSpec::Identity => Some(r.clone()),
            HomeoSpec::Square => Some(Rational::from(r * r)),
            HomeoSpec::Sqrt => {
                let v = CertifiedValue::exact(r.clone(), 64).sqrt(64).ok()?;
                v.exact_value().cloned()
            }
            HomeoSpec::SinSquared => sin2_table().into_iter().find(|(a, _)| a == r).map(|(_, b)| b),
            HomeoSpec::ArcsinSqrt => sin2_table().into_iter().find(|(_, b)| b == r).map(|(a, _)| a),
            HomeoSpec::PiecewiseLinear(k) => Some(pl_eval(k, r)),
        }
    }

    /// Enclosure of h(x) for x ⊆ [0, 1].
    pub fn apply(&self, x: &CertifiedValue, prec: u32) -> CertifiedValue {
        if let Some(r) = x.exact_value() {
            if let Some(v) = self.exact_image(r) {
                return CertifiedValue::exact(v, prec);
            }
        }
        let lo = self.bound(x.lo(), prec, false);
        let hi = self.bound(x.hi(), prec, true);
        CertifiedValue::interval(lo, hi)
    }

    pub fn apply_inverse(&self, y: &CertifiedValue, prec: u32) -> CertifiedValue {
        self.inverse().apply(y, prec)
    }

    /// Directed-rounding bound of h at a single float, clamped to [0, 1].
    fn bound(&self, a: &Float, prec: u32, up: bool) -> Float {
        let dir = if up { Round::Up } else { Round::Down };
        if *a <= 0 {
            return Float::new(prec);
        }
        if *a >= 1 {
            return Float::with_val(prec, 1);
        }
        let wp = prec + GUARD;
        let v = match self {
            HomeoSpec::Identity => Float::with_val_round(prec, a, dir).0,
            HomeoSpec::Square => Float::with_val_round(prec, a * a, dir).0,
            HomeoSpec::Sqrt => {
                let mut s = Float::with_val_round(wp, a, dir).0;
                s.sqrt_round(dir);
                s
            }
            HomeoSpec::SinSquared => {
                let pi = Float::with_val_round(wp, Constant::Pi, dir).0;
                let mut arg = Float::with_val_round(wp, &pi * a, dir).0;
                arg /= 2u32;
                if up {
                    let half_pi_lo = rd(wp, Constant::Pi) / 2u32;
                    if arg >= half_pi_lo {
                        return Float::with_val(prec, 1);
                    }
                }
                arg.sin_round(dir);
                if arg < 0 {
                    arg = Float::new(wp);
                }
                arg.square_round(dir);
                arg
            }
            HomeoSpec::ArcsinSqrt => {
                let mut s = Float::with_val_round(wp, a, dir).0;
                s.sqrt_round(dir);
                if s > 1 {
                    s = Float::with_val(wp, 1);
                }
                s.asin_round(dir);
                s *= 2u32;
                let pi = if up { rd(wp, Constant::Pi) } else { ru(wp, Constant::Pi) };
                Float::with_val_round(wp, &s / &pi, dir).0
            }
            HomeoSpec::PiecewiseLinear(k) => {
                let r = a.to_rational().expect("finite");
                return Float::with_val_round(prec, &pl_eval(k, &r), dir).0;
            }
        };
        let v = Float::with_val_round(prec, &v, dir).0;
        if v > 1 {
            Float::with_val(prec, 1)
        } else if v < 0 {
            Float::new(prec)
        } else {
            v
        }
    }

    /// Enclosure of h'(x).
    pub fn derivative(&self, x: &CertifiedValue, prec: u32) -> Result<CertifiedValue> {
        match self {
            HomeoSpec::Identity => Ok(CertifiedValue::from_int(1, prec)),
            HomeoSpec::Square => Ok(x.mul(&CertifiedValue::from_int(2, prec), prec)),
            HomeoSpec::Sqrt => {
                let s = x.sqrt(prec)?.mul(&CertifiedValue::from_int(2, prec), prec);
                CertifiedValue::from_int(1, prec)
                    .div(&s, prec)
                    .map_err(|_| Error::NotDifferentiable)
            }
            HomeoSpec::SinSquared => {
                // h' = π·sin(πx/2)·cos(πx/2) = π·√(h(1-h))
                let h = self.apply(x, prec);
                let one = CertifiedValue::from_int(1, prec);
                let p = h.mul(&one.sub(&h, prec), prec);
                let p = if p.lo() < &0 {
                    CertifiedValue::interval(Float::new(prec), p.hi().clone())
                } else {
                    p
                };
                Ok(p.sqrt(prec)?.mul(&CertifiedValue::pi(prec), prec))
            }
            HomeoSpec::ArcsinSqrt => {
                let one = CertifiedValue::from_int(1, prec);
                let p = x.mul(&one.sub(x, prec), prec);
                if !p.certainly_positive() {
                    return Err(Error::NotDifferentiable);
                }
                let d = p.sqrt(prec)?.mul(&CertifiedValue::pi(prec), prec);
                one.div(&d, prec).map_err(|_| Error::NotDifferentiable)
            }
            HomeoSpec::PiecewiseLinear(k) => {
                for w in k.windows(2) {
                    let (a, b) = (
                        CertifiedValue::exact(w[0].0.clone(), prec),
                        CertifiedValue::exact(w[1].0.clone(), prec),
                    );
                    let inside = matches!(x.cmp_certain(&a), Some(std::cmp::Ordering::Greater))
                        && matches!(x.cmp_certain(&b), Some(std::cmp::Ordering::Less));
                    if inside {
                        let slope = Rational::from(&w[1].1 - &w[0].1) / Rational::from(&w[1].0 - &w[0].0);
                        return Ok(CertifiedValue::exact(slope, prec));
                    }
                }
                Err(Error::NotDifferentiable)
            }
        }
    }
}

fn pl_eval(knots: &[(Rational, Rational)], x: &Rational) -> Rational {
    if *x <= knots[0].0 {
        return knots[0].1.clone();
    }
    for w in knots.windows(2) {
        if *x <= w[1].0 {
            let t = Rational::from(x - &w[0].0) / Rational::from(&w[1].0 - &w[0].0);
            return Rational::from(&w[1].1 - &w[0].1) * t + &w[0].1;
        }
    }
    knots[knots.len() - 1].1.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: f64) -> CertifiedValue {
        CertifiedValue::from_f64(v, 128).forget_exact()
    }

    #[test]
    fn sin_squared_matches_f64_oracle() {
        for k in 1..20 {
            let x = k as f64 / 20.0;
            let want = (std::f64::consts::PI * x / 2.0).sin().powi(2);
            let got = HomeoSpec::SinSquared.apply(&pt(x), 128);
            assert!(got.lo().to_f64() <= want + 1e-15 && got.hi().to_f64() >= want - 1e-15);
            assert!(got.width_f64() < 1e-30);
        }
    }

    #[test]
    fn round_trips_enclose_the_input() {
        for h in [
            HomeoSpec::Square,
            HomeoSpec::Sqrt,
            HomeoSpec::SinSquared,
            HomeoSpec::ArcsinSqrt,
        ] {
            for k in 1..10 {
                let x = pt(k as f64 / 10.0 + 0.013);
                let back = h.apply_inverse(&h.apply(&x, 128), 128);
                assert!(back.contains(&x), "{h:?} at {k}");
            }
        }
    }

    #[test]
    fn exact_special_values() {
        let half = CertifiedValue::exact(Rational::from((1, 2)), 64);
        assert_eq!(
            HomeoSpec::SinSquared.apply(&half, 64).exact_value(),
            Some(&Rational::from((1, 2)))
        );
        let q = CertifiedValue::exact(Rational::from((1, 4)), 64);
        assert_eq!(
            HomeoSpec::Sqrt.apply(&q, 64).exact_value(),
            Some(&Rational::from((1, 2)))
        );
        assert_eq!(
            HomeoSpec::ArcsinSqrt.apply(&q, 64).exact_value(),
            Some(&Rational::from((1, 3)))
        );
    }

    #[test]
    fn piecewise_linear_validation_and_eval() {
        let k = vec![
            (Rational::from(0), Rational::from(0)),
            (Rational::from((1, 2)), Rational::from((1, 3))),
            (Rational::from(1), Rational::from(1)),
        ];
        let h = HomeoSpec::PiecewiseLinear(k.clone());
        h.validate().unwrap();
        let x = CertifiedValue::exact(Rational::from((3, 4)), 64);
        assert_eq!(h.apply(&x, 64).exact_value(), Some(&Rational::from((2, 3))));
        let bad = HomeoSpec::PiecewiseLinear(vec![k[0].clone(), k[2].clone(), k[1].clone()]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn derivative_of_sin_squared() {
        let x = pt(0.3);
        let d = HomeoSpec::SinSquared.derivative(&x, 128).unwrap();
        let want = std::f64::consts::PI / 2.0 * (std::f64::consts::PI * 0.3).sin();
        assert!((d.mid_f64() - want).abs() < 1e-12);
    }
}
