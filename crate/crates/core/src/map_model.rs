//! Piecewise-monotone maps of [0, 1]: construction, validation, certified
//! evaluation, inverse branches, and critical-point data.

use std::cmp::Ordering;

use rug::float::Round;
use rug::{Float, Rational};
use serde::Serialize;

use crate::arith::{rd, ru, CertifiedValue, PrecisionConfig};
use crate::error::{Error, Result};
use crate::homeo::HomeoSpec;
use crate::poly::Polynomial;

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPoint {
    pub location: CertifiedValue,
    /// Non-flatness order ℓ; absent for corners of piecewise-linear maps.
    pub order: Option<f64>,
    pub nonflat_constant: Option<f64>,
    pub neighborhood_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryBehavior {
    /// f({0, 1}) ⊆ {0, 1}.
    Invariant,
    /// Critical orbits were checked to stay in the open interval.
    CriticalOrbitsInterior,
}

#[derive(Clone, Debug)]
pub enum MapKind {
    Polynomial(Polynomial),
    /// Full-branched piecewise-linear map with the given interior turning
    /// points; values alternate 0, 1, 0, … at the knots starting from f(0) = 0.
    FoldedLinear(Vec<Rational>),
    /// g = h ∘ f ∘ h⁻¹.
    Pushforward {
        base: Box<MapSpec>,
        homeo: HomeoSpec,
    },
}

/// Where a point sits relative to the critical set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointClass {
    Branch(u16),
    Critical(usize),
    Uncertain,
}

#[derive(Clone, Debug)]
pub enum OrbitSeed {
    Value(CertifiedValue),
    Critical(usize),
}

#[derive(Clone, Debug)]
pub struct OrbitPoint {
    pub value: CertifiedValue,
    pub class: PointClass,
}

#[derive(Clone, Debug)]
pub enum PullbackTarget {
    Critical(usize),
    /// 0 or 1.
    Boundary(u8),
}

#[derive(Clone, Debug, Serialize)]
pub struct NonflatRecord {
    pub critical_index: usize,
    pub fitted_order: f64,
    pub order_used: f64,
    pub constant: f64,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct MapSpec {
    name: String,
    kind: MapKind,
    critical: Vec<CriticalPoint>,
    boundary: BoundaryBehavior,
    negative_schwarzian: bool,
    precision: PrecisionConfig,
    /// f', f'', f''' for polynomial maps.
    derivs: Vec<Polynomial>,
    increasing: Vec<bool>,
}

fn crit_prec(p: &PrecisionConfig) -> u32 {
    p.max_bits + 64
}

impl MapSpec {
    pub fn polynomial(name: &str, coefficients: Vec<Rational>, precision: PrecisionConfig) -> Result<Self> {
        precision.validate()?;
        let p = Polynomial::new(coefficients);
        if p.degree() < 2 {
            return Err(Error::InvalidMap("polynomial must have degree at least 2".into()));
        }
        let d1 = p.derivative();
        let derivs = vec![d1.clone(), d1.derivative(), d1.derivative().derivative()];
        let mut m = MapSpec {
            name: name.into(),
            kind: MapKind::Polynomial(p),
            critical: vec![],
            boundary: BoundaryBehavior::Invariant,
            negative_schwarzian: false,
            precision,
            derivs,
            increasing: vec![],
        };
        m.critical = m.find_critical_points()?;
        m.finish()?;
        for i in 0..m.critical.len() {
            let rec = m.nonflat_fit(i, 200)?;
            m.critical[i].order = Some(rec.order_used);
            m.critical[i].nonflat_constant = Some(rec.constant);
        }
        m.negative_schwarzian = m.check_negative_schwarzian(10_000)?;
        Ok(m)
    }

    pub fn folded_linear(name: &str, breakpoints: Vec<Rational>, precision: PrecisionConfig) -> Result<Self> {
        precision.validate()?;
        if breakpoints.is_empty() {
            return Err(Error::InvalidMap("need at least one turning point".into()));
        }
        let mut prev = Rational::new();
        for b in &breakpoints {
            if *b <= prev || *b >= 1 {
                return Err(Error::InvalidMap(
                    "breakpoints must increase strictly inside (0, 1)".into(),
                ));
            }
            prev = b.clone();
        }
        let mut m = MapSpec {
            name: name.into(),
            kind: MapKind::FoldedLinear(breakpoints),
            critical: vec![],
            boundary: BoundaryBehavior::Invariant,
            negative_schwarzian: false,
            precision,
            derivs: vec![],
            increasing: vec![],
        };
        m.critical = m.find_critical_points()?;
        m.finish()?;
        Ok(m)
    }

    pub fn pushforward(name: &str, base: MapSpec, homeo: HomeoSpec) -> Result<Self> {
        homeo.validate()?;
        let cp = crit_prec(&base.precision);
        let critical = base
            .critical
            .iter()
            .map(|c| CriticalPoint {
                location: homeo.apply(&c.location, cp),
                order: c.order,
                nonflat_constant: None,
                neighborhood_radius: 0.0,
            })
            .collect();
        let mut m = MapSpec {
            name: name.into(),
            precision: base.precision.clone(),
            boundary: base.boundary,
            increasing: base.increasing.clone(),
            kind: MapKind::Pushforward {
                base: Box::new(base),
                homeo,
            },
            critical,
            negative_schwarzian: false,
            derivs: vec![],
        };
        m.set_radii();
        Ok(m)
    }

    pub fn ulam() -> Self {
        Self::logistic(Rational::from(4)).expect("valid preset")
    }

    /// x ↦ a·x(1 − x), 2 < a ≤ 4.
    pub fn logistic(a: Rational) -> Result<Self> {
        if a <= 2 || a > 4 {
            return Err(Error::InvalidMap("logistic parameter must lie in (2, 4]".into()));
        }
        let name = if a == 4 {
            "ulam".to_string()
        } else {
            format!("logistic({a})")
        };
        Self::polynomial(&name, vec![Rational::new(), a.clone(), -a], PrecisionConfig::default())
    }

    /// F_d(x) = (1 − T_d(1 − 2x))/2 with T_d the Chebyshev polynomial.
    pub fn chebyshev_fold(d: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidMap("Chebyshev degree must be at least 2".into()));
        }
        let mut t0 = Polynomial::from_ints(&[1]);
        let mut t1 = Polynomial::x();
        for _ in 1..d {
            let t2 = Polynomial::from_ints(&[0, 2]).mul(&t1).sub(&t0);
            t0 = t1;
            t1 = t2;
        }
        let inner = Polynomial::from_ints(&[1, -2]);
        let f = Polynomial::from_ints(&[1])
            .sub(&t1.compose(&inner))
            .scale(&Rational::from((1, 2)));
        Self::polynomial(
            &format!("chebyshev{d}"),
            f.coeffs().to_vec(),
            PrecisionConfig::default(),
        )
    }

    pub fn tent() -> Self {
        Self::uniform_fold(2).expect("valid preset")
    }

    /// Piecewise-linear map with `branches` full branches of equal length.
    pub fn uniform_fold(branches: u32) -> Result<Self> {
        if branches < 2 {
            return Err(Error::InvalidMap("need at least two branches".into()));
        }
        let bps = (1..branches).map(|k| Rational::from((k, branches))).collect();
        let name = if branches == 2 {
            "tent".to_string()
        } else {
            format!("fold{branches}")
        };
        Self::folded_linear(&name, bps, PrecisionConfig::default())
    }

    pub fn with_precision(mut self, precision: PrecisionConfig) -> Result<Self> {
        precision.validate()?;
        let same_crit = crit_prec(&precision) == crit_prec(&self.precision);
        if let MapKind::Pushforward { base, homeo } = &self.kind {
            let base = (**base).clone().with_precision(precision.clone())?;
            let homeo = homeo.clone();
            return MapSpec::pushforward(&self.name, base, homeo);
        }
        self.precision = precision;
        if !same_crit {
            let old = std::mem::take(&mut self.critical);
            let mut fresh = self.find_critical_points()?;
            for (c, o) in fresh.iter_mut().zip(old) {
                c.order = o.order;
                c.nonflat_constant = o.nonflat_constant;
            }
            self.critical = fresh;
        }
        Ok(self)
    }

    /// Overrides the stored non-flatness data of critical point `i`.
    pub fn set_nonflat_data(&mut self, i: usize, order: Option<f64>, constant: Option<f64>) {
        if let Some(o) = order {
            self.critical[i].order = Some(o);
        }
        if let Some(c) = constant {
            self.critical[i].nonflat_constant = Some(c);
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn critical_points(&self) -> &[CriticalPoint] {
        &self.critical
    }

    pub fn num_critical(&self) -> usize {
        self.critical.len()
    }

    pub fn num_branches(&self) -> usize {
        self.critical.len() + 1
    }

    pub fn boundary(&self) -> BoundaryBehavior {
        self.boundary
    }

    pub fn negative_schwarzian(&self) -> bool {
        self.negative_schwarzian
    }

    pub fn precision(&self) -> &PrecisionConfig {
        &self.precision
    }

    pub fn is_increasing(&self, branch: usize) -> bool {
        self.increasing[branch]
    }

    /// f(c_i) at the precision used for critical-point enclosures.
    pub fn critical_value(&self, i: usize) -> CertifiedValue {
        let cp = crit_prec(&self.precision);
        self.orbit(&OrbitSeed::Critical(i), 1, cp, false)[1].value.clone()
    }

    pub fn homeo(&self) -> Option<&HomeoSpec> {
        match &self.kind {
            MapKind::Pushforward { homeo, .. } => Some(homeo),
            _ => None,
        }
    }

    /// Innermost non-pushforward map.
    pub fn root_map(&self) -> &MapSpec {
        match &self.kind {
            MapKind::Pushforward { base, .. } => base.root_map(),
            _ => self,
        }
    }

    fn finish(&mut self) -> Result<()> {
        let prec = self.precision.initial_bits;
        // orientation of each branch from the sign of f(right) − f(left)
        let mut ends = vec![CertifiedValue::from_int(0, prec)];
        ends.extend(self.critical.iter().map(|c| c.location.clone()));
        ends.push(CertifiedValue::from_int(1, prec));
        let vals: Vec<CertifiedValue> = ends
            .iter()
            .map(|e| self.evaluate_raw(e, crit_prec(&self.precision)))
            .collect();
        for v in &vals {
            if v.certainly_negative() || v.lo() > &1 {
                return Err(Error::InvalidMap(format!(
                    "{} does not map [0,1] into itself",
                    self.name
                )));
            }
        }
        self.increasing = vals
            .windows(2)
            .map(|w| match w[1].cmp_certain(&w[0]) {
                Some(Ordering::Greater) => Ok(true),
                Some(Ordering::Less) => Ok(false),
                _ => Err(Error::InvalidMap("cannot orient a branch".into())),
            })
            .collect::<Result<_>>()?;
        for w in self.increasing.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidMap("critical point is not a turning point".into()));
            }
        }
        let at_boundary = |v: &CertifiedValue| v.exact_value().is_some_and(|r| *r == 0 || *r == 1);
        let last = vals.len() - 1;
        self.boundary = if at_boundary(&vals[0]) && at_boundary(&vals[last]) {
            BoundaryBehavior::Invariant
        } else {
            for i in 0..self.critical.len() {
                let orb = self.orbit(&OrbitSeed::Critical(i), 64, prec, false);
                for p in &orb {
                    let v = &p.value;
                    if !(v.lo() > &0 && v.hi() < &1) {
                        return Err(Error::InvalidMap(
                            "boundary is not invariant and a critical orbit approaches it".into(),
                        ));
                    }
                }
            }
            BoundaryBehavior::CriticalOrbitsInterior
        };
        self.set_radii();
        Ok(())
    }

    fn set_radii(&mut self) {
        let locs: Vec<f64> = self.critical.iter().map(|c| c.location.mid_f64()).collect();
        for (i, c) in self.critical.iter_mut().enumerate() {
            let left = if i == 0 { locs[0] } else { locs[i] - locs[i - 1] };
            let right = if i + 1 == locs.len() {
                1.0 - locs[i]
            } else {
                locs[i + 1] - locs[i]
            };
            c.neighborhood_radius = left.min(right) / 2.0;
        }
    }

    /// Critical points in increasing order. Polynomial critical points are
    /// the sign changes of f' in (0, 1), isolated with Sturm sequences.
    pub fn find_critical_points(&self) -> Result<Vec<CriticalPoint>> {
        let cp = crit_prec(&self.precision);
        match &self.kind {
            MapKind::Polynomial(_) => {
                let d = &self.derivs[0];
                let (zero, one) = (Rational::new(), Rational::from(1));
                if d.sign_at(&zero) == Ordering::Equal || d.sign_at(&one) == Ordering::Equal {
                    return Err(Error::InvalidMap("critical point on the boundary".into()));
                }
                let roots = d.real_roots(&zero, &one, cp);
                if roots.is_empty() {
                    return Err(Error::InvalidMap("map has no interior critical point".into()));
                }
                let mut out = Vec::new();
                for r in roots {
                    let location = match &r.exact {
                        Some(e) => {
                            // turning point iff f' changes sign across it
                            let eps = Rational::from((1, 1u64 << 40));
                            let mut lo = Rational::from(e - &eps);
                            let mut hi = Rational::from(e + &eps);
                            let sq = d.squarefree();
                            while sq.real_roots(&lo, &hi, 8).len() > 1 {
                                lo = Rational::from(&lo + e) / 2u32;
                                hi = Rational::from(&hi + e) / 2u32;
                            }
                            if d.sign_at(&lo) == d.sign_at(&hi) {
                                return Err(Error::InvalidMap(format!("critical point {e} is not a turning point")));
                            }
                            CertifiedValue::exact(e.clone(), cp)
                        }
                        None => {
                            if d.sign_at(&r.lo) == d.sign_at(&r.hi) {
                                return Err(Error::InvalidMap("critical point is not a turning point".into()));
                            }
                            CertifiedValue::interval(rd(cp, &r.lo), ru(cp, &r.hi))
                        }
                    };
                    out.push(CriticalPoint {
                        location,
                        order: None,
                        nonflat_constant: None,
                        neighborhood_radius: 0.0,
                    });
                }
                Ok(out)
            }
            MapKind::FoldedLinear(bps) => Ok(bps
                .iter()
                .map(|b| CriticalPoint {
                    location: CertifiedValue::exact(b.clone(), cp),
                    order: None,
                    nonflat_constant: None,
                    neighborhood_radius: 0.0,
                })
                .collect()),
            MapKind::Pushforward { .. } => Ok(self.critical.clone()),
        }
    }

    /// Symbol of `y`: the index of the open partition element containing it,
    /// a critical point hit, or uncertain.
    pub fn classify(&self, y: &CertifiedValue) -> PointClass {
        for (i, c) in self.critical.iter().enumerate() {
            match y.cmp_certain(&c.location) {
                Some(Ordering::Less) => return PointClass::Branch(i as u16),
                Some(Ordering::Equal) => return PointClass::Critical(i),
                Some(Ordering::Greater) => continue,
                None => return PointClass::Uncertain,
            }
        }
        PointClass::Branch(self.critical.len() as u16)
    }

    /// Certified enclosure of f(x).
    pub fn evaluate(&self, x: &CertifiedValue, prec: u32) -> CertifiedValue {
        match &self.kind {
            MapKind::Pushforward { base, homeo } => {
                let u = homeo.apply_inverse(x, prec);
                homeo.apply(&base.evaluate(&u, prec), prec).clamp_unit()
            }
            _ => self.evaluate_raw(x, prec).clamp_unit(),
        }
    }

    fn evaluate_raw(&self, x: &CertifiedValue, prec: u32) -> CertifiedValue {
        match &self.kind {
            MapKind::Polynomial(p) => {
                if x.is_exact() || x.lo() == x.hi() {
                    return p.eval(x, prec);
                }
                if matches!(self.classify(x), PointClass::Branch(_)) {
                    let a = p.eval(&CertifiedValue::point(x.lo().clone()), prec);
                    let b = p.eval(&CertifiedValue::point(x.hi().clone()), prec);
                    return a.hull(&b);
                }
                p.eval(x, prec)
            }
            MapKind::FoldedLinear(bps) => {
                if let Some(r) = x.exact_value() {
                    return CertifiedValue::exact(fold_eval(bps, r), prec);
                }
                let a = x.lo().to_rational().expect("finite");
                let b = x.hi().to_rational().expect("finite");
                let mut lo = fold_eval(bps, &a);
                let mut hi = lo.clone();
                let mut consider = |v: Rational| {
                    if v < lo {
                        lo = v;
                    } else if v > hi {
                        hi = v;
                    }
                };
                consider(fold_eval(bps, &b));
                for (k, bp) in bps.iter().enumerate() {
                    if *bp > a && *bp < b {
                        consider(Rational::from(((k + 1) % 2) as u32));
                    }
                }
                CertifiedValue::interval(rd(prec, &lo), ru(prec, &hi))
            }
            MapKind::Pushforward { .. } => self.evaluate(x, prec),
        }
    }

    /// Certified enclosure of f'(x).
    pub fn derivative(&self, x: &CertifiedValue, prec: u32) -> Result<CertifiedValue> {
        match &self.kind {
            MapKind::Polynomial(_) => Ok(self.derivs[0].eval(x, prec)),
            MapKind::FoldedLinear(bps) => match self.classify(x) {
                PointClass::Branch(k) => Ok(CertifiedValue::exact(fold_slope(bps, k as usize), prec)),
                _ => Err(Error::NotDifferentiable),
            },
            MapKind::Pushforward { base, homeo } => {
                let u = homeo.apply_inverse(x, prec);
                let fu = base.evaluate(&u, prec);
                let num = homeo.derivative(&fu, prec)?.mul(&base.derivative(&u, prec)?, prec);
                let den = homeo.derivative(&u, prec)?;
                num.div(&den, prec).map_err(|_| Error::NotDifferentiable)
            }
        }
    }

    /// Schwarzian derivative f'''/f' − (3/2)(f''/f')².
    pub fn schwarzian(&self, x: &CertifiedValue, prec: u32) -> Result<CertifiedValue> {
        if !matches!(self.kind, MapKind::Polynomial(_)) {
            return Err(Error::NotSmooth);
        }
        let d1 = self.derivs[0].eval(x, prec);
        if d1.contains_zero() {
            return Err(Error::AtCriticalPoint);
        }
        let d2 = self.derivs[1].eval(x, prec);
        let d3 = self.derivs[2].eval(x, prec);
        let a = d3.div(&d1, prec)?;
        let b = d2.div(&d1, prec)?;
        Ok(a.sub(&b.sqr(prec).mul_rational(&Rational::from((3, 2)), prec), prec))
    }

    /// Checks S(f) < 0 at `grid` points off the critical set.
    pub fn check_negative_schwarzian(&self, grid: usize) -> Result<bool> {
        if !matches!(self.kind, MapKind::Polynomial(_)) {
            return Err(Error::NotSmooth);
        }
        for k in 0..grid {
            let x = CertifiedValue::exact(Rational::from((2 * k as u64 + 1, 2 * grid as u64)), 128);
            match self.schwarzian(&x, 128) {
                Ok(s) if s.certainly_negative() => {}
                Err(Error::AtCriticalPoint) => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }

    fn branch_ends(&self, k: usize) -> (CertifiedValue, CertifiedValue) {
        let cp = crit_prec(&self.precision);
        let a = if k == 0 {
            CertifiedValue::from_int(0, cp)
        } else {
            self.critical[k - 1].location.clone()
        };
        let b = if k == self.critical.len() {
            CertifiedValue::from_int(1, cp)
        } else {
            self.critical[k].location.clone()
        };
        (a, b)
    }

    /// Enclosure of the preimage of `y` on monotone branch `k`.
    pub fn inverse_branch(&self, k: usize, y: &CertifiedValue, prec: u32) -> Result<CertifiedValue> {
        if k >= self.num_branches() {
            return Err(Error::BadBranch(k));
        }
        match &self.kind {
            MapKind::FoldedLinear(bps) => {
                let start = if k == 0 { Rational::new() } else { bps[k - 1].clone() };
                let v0 = Rational::from((k % 2) as u32);
                let slope = fold_slope(bps, k);
                let t = y
                    .sub(&CertifiedValue::exact(v0, prec), prec)
                    .div(&CertifiedValue::exact(slope, prec), prec)?
                    .add(&CertifiedValue::exact(start, prec), prec);
                Ok(t)
            }
            MapKind::Pushforward { base, homeo } => {
                let u = homeo.apply_inverse(y, prec);
                Ok(homeo.apply(&base.inverse_branch(k, &u, prec)?, prec))
            }
            MapKind::Polynomial(p) => {
                let (a, b) = self.branch_ends(k);
                let inc = self.increasing[k];
                if let Some(r) = y.exact_value() {
                    for e in [&a, &b] {
                        if let Some(er) = e.exact_value() {
                            if p.eval_rational(er) == *r {
                                return Ok(CertifiedValue::exact(er.clone(), prec));
                            }
                        }
                    }
                }
                if p.degree() == 2 {
                    return self.quadratic_inverse(p, k, y, prec);
                }
                let (ylo, yhi) = if inc { (y.lo(), y.hi()) } else { (y.hi(), y.lo()) };
                let wp = prec + 32;
                let tlo = approx_root(p, &self.derivs, ylo, &a, &b, inc, wp);
                let thi = if ylo == yhi {
                    tlo.clone()
                } else {
                    approx_root(p, &self.derivs, yhi, &a, &b, inc, wp)
                };
                let lo = self.root_bound(p, k, ylo, &tlo, &a, &b, prec, false)?;
                let hi = self.root_bound(p, k, yhi, &thi, &a, &b, prec, true)?;
                Ok(CertifiedValue::interval(lo, hi))
            }
        }
    }

    /// p(t) = p(c) + α(t − c)², so the branch inverses are c ∓ √((y − p(c))/α).
    fn quadratic_inverse(&self, p: &Polynomial, k: usize, y: &CertifiedValue, prec: u32) -> Result<CertifiedValue> {
        let c = self.critical[0]
            .location
            .exact_value()
            .cloned()
            .ok_or_else(|| Error::RootIsolation("quadratic critical point is not rational".into()))?;
        let vc = p.eval_rational(&c);
        let alpha = Rational::from(p.leading().recip_ref());
        let u = y.sub(&CertifiedValue::exact(vc, prec), prec).mul_rational(&alpha, prec);
        let u = if u.lo() < &0 {
            if u.hi() < &0 {
                return Err(Error::Domain("value outside the branch image".into()));
            }
            match u.exact_value() {
                Some(_) => u,
                None => CertifiedValue::interval(Float::new(prec), u.hi().clone()),
            }
        } else {
            u
        };
        let s = u.sqrt(prec)?;
        let c = CertifiedValue::exact(c, prec);
        let t = if k == 0 { c.sub(&s, prec) } else { c.add(&s, prec) };
        Ok(t.clamp_unit())
    }

    /// Certified lower (`upper = false`) or upper bound of the root of
    /// p(t) = v on branch `k`, bracketed by [a, b].
    #[allow(clippy::too_many_arguments)]
    fn root_bound(
        &self,
        p: &Polynomial,
        k: usize,
        v: &Float,
        t: &Float,
        a: &CertifiedValue,
        b: &CertifiedValue,
        prec: u32,
        upper: bool,
    ) -> Result<Float> {
        let inc = self.increasing[k];
        let wp = prec + 32;
        // t is certified on the requested side when p(t) lies strictly on the
        // matching side of v (monotonicity of the branch)
        let below = |t: &Float| -> bool {
            let (lo, hi) = p.eval_point_bounds(t, wp);
            if inc {
                hi <= *v
            } else {
                lo >= *v
            }
        };
        let above = |t: &Float| -> bool {
            let (lo, hi) = p.eval_point_bounds(t, wp);
            if inc {
                lo >= *v
            } else {
                hi <= *v
            }
        };
        // first guess: a few ulps of t plus the evaluation error over |p'(t)|
        let ulp = t.get_exp().unwrap_or(0).max(-(wp as i32)) - wp as i32 + 2;
        let dv = Float::with_val(53, self.derivs[0].eval_float(t)).abs();
        let mut scale = ulp;
        if dv > 0 {
            let e = dv.get_exp().unwrap_or(0);
            scale = scale.max(-(wp as i32) + 4 - e);
        }
        let mut delta = Float::with_val(wp, 1) << scale;
        for _ in 0..(wp / 2 + 64) {
            if upper {
                let cand = Float::with_val_round(wp, t + &delta, Round::Up).0;
                if cand >= *b.hi() {
                    return Ok(ru(prec, b.hi()));
                }
                if above(&cand) {
                    return Ok(ru(prec, &cand));
                }
            } else {
                let cand = Float::with_val_round(wp, t - &delta, Round::Down).0;
                if cand <= *a.lo() {
                    return Ok(rd(prec, a.lo()));
                }
                if below(&cand) {
                    return Ok(rd(prec, &cand));
                }
            }
            delta <<= 4;
        }
        Err(Error::PrecisionExhausted { bits: prec })
    }

    /// Orbit of `seed` for `steps` iterates (so `steps + 1` points). With
    /// `stop_early`, iteration halts after the first point that is not
    /// certified inside a branch.
    pub fn orbit(&self, seed: &OrbitSeed, steps: usize, prec: u32, stop_early: bool) -> Vec<OrbitPoint> {
        if let MapKind::Pushforward { base, homeo } = &self.kind {
            let bseed = match seed {
                OrbitSeed::Value(v) => OrbitSeed::Value(homeo.apply_inverse(v, prec)),
                OrbitSeed::Critical(i) => OrbitSeed::Critical(*i),
            };
            return base
                .orbit(&bseed, steps, prec, stop_early)
                .into_iter()
                .map(|p| OrbitPoint {
                    value: homeo.apply(&p.value, prec),
                    class: p.class,
                })
                .collect();
        }
        let (mut x, class) = match seed {
            OrbitSeed::Value(v) => (v.clone(), self.classify(v)),
            OrbitSeed::Critical(i) => (self.critical[*i].location.to_prec(prec), PointClass::Critical(*i)),
        };
        let mut out = Vec::with_capacity(steps + 1);
        out.push(OrbitPoint {
            value: x.clone(),
            class,
        });
        if stop_early && !matches!(class, PointClass::Branch(_)) && !matches!(seed, OrbitSeed::Critical(_)) {
            return out;
        }
        for _ in 0..steps {
            x = self.evaluate(&x, prec);
            let class = self.classify(&x);
            out.push(OrbitPoint {
                value: x.clone(),
                class,
            });
            if stop_early && !matches!(class, PointClass::Branch(_)) {
                break;
            }
        }
        out
    }

    /// g_{a_0} ∘ … ∘ g_{a_{n−1}}(target): the point of the cylinder with
    /// the given branch word that lands on `target` after n steps.
    /// `precs[j]` is the working precision for step j.
    pub fn pullback(&self, target: &PullbackTarget, branches: &[u16], precs: &[u32]) -> Result<CertifiedValue> {
        if let MapKind::Pushforward { base, homeo } = &self.kind {
            let v = base.pullback(target, branches, precs)?;
            let p = precs.first().copied().unwrap_or(self.precision.initial_bits);
            return Ok(homeo.apply(&v, p));
        }
        let top = precs.last().copied().unwrap_or(self.precision.initial_bits);
        let mut y = match target {
            PullbackTarget::Critical(i) => self.critical[*i].location.to_prec(top),
            PullbackTarget::Boundary(b) => CertifiedValue::from_int(*b as i64, top),
        };
        for j in (0..branches.len()).rev() {
            y = self.inverse_branch(branches[j] as usize, &y, precs[j])?;
        }
        Ok(y)
    }

    /// Fits ℓ from the log-log slope of |f'| near c and measures the
    /// tightest non-flatness constant L over `samples` points of V(c).
    pub fn verify_nonflat(&self, i: usize, samples: usize) -> Result<NonflatRecord> {
        let rec = self.nonflat_fit(i, samples)?;
        let stored_order = self.critical[i].order;
        let stored_l = self.critical[i].nonflat_constant;
        let order_ok = stored_order.is_none_or(|o| (o - rec.fitted_order).abs() <= 1e-3);
        let l_ok = stored_l.is_none_or(|l| rec.constant <= l * (1.0 + 1e-9));
        Ok(NonflatRecord {
            pass: order_ok && l_ok && rec.constant.is_finite(),
            ..rec
        })
    }

    fn nonflat_fit(&self, i: usize, samples: usize) -> Result<NonflatRecord> {
        if !matches!(self.kind, MapKind::Polynomial(_)) {
            return Err(Error::NotSmooth);
        }
        if i >= self.critical.len() {
            return Err(Error::BadBranch(i));
        }
        let prec = 256;
        let c = self.critical[i].location.mid(prec);
        let d = &self.derivs[0];
        let logabs = |x: &Float| -> f64 { d.eval_float(x).abs().ln().to_f64() };
        let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..9 {
            let r: Float = Float::with_val(prec, 1) >> (8 + 4 * k as u32);
            let y = 0.5 * (logabs(&Float::with_val(prec, &c + &r)) + logabs(&Float::with_val(prec, &c - &r)));
            let x = r.ln().to_f64();
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            n += 1.0;
        }
        let fitted = 1.0 + (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let order = if (fitted - fitted.round()).abs() <= 1e-3 {
            fitted.round()
        } else {
            fitted
        };
        let radius = self.critical[i].neighborhood_radius;
        let half = samples.max(2) / 2;
        let mut l: f64 = 1.0;
        for k in 1..=half {
            let r = radius * k as f64 / half as f64;
            for s in [-1.0, 1.0] {
                let x = Float::with_val(prec, &c + r * s);
                let df = d.eval_float(&x).abs().to_f64();
                let ratio = df / r.powf(order - 1.0);
                l = l.max(ratio).max(1.0 / ratio);
            }
        }
        Ok(NonflatRecord {
            critical_index: i,
            fitted_order: fitted,
            order_used: order,
            constant: l,
            samples: 2 * half,
            pass: l.is_finite(),
        })
    }
}

fn fold_slope(bps: &[Rational], k: usize) -> Rational {
    let start = if k == 0 { Rational::new() } else { bps[k - 1].clone() };
    let end = if k == bps.len() {
        Rational::from(1)
    } else {
        bps[k].clone()
    };
    let len = Rational::from(&end - &start);
    let s = Rational::from(len.recip_ref());
    if k.is_multiple_of(2) {
        s
    } else {
        -s
    }
}

fn fold_eval(bps: &[Rational], x: &Rational) -> Rational {
    let k = bps.iter().take_while(|b| *b < x).count();
    let start = if k == 0 { Rational::new() } else { bps[k - 1].clone() };
    let v0 = Rational::from((k % 2) as u32);
    v0 + fold_slope(bps, k) * Rational::from(x - &start)
}

/// Approximate solution of p(t) = v on a monotone bracket [a, b]: f64
/// bisection for a start, then safeguarded Newton at `wp` bits.
fn approx_root(
    p: &Polynomial,
    derivs: &[Polynomial],
    v: &Float,
    a: &CertifiedValue,
    b: &CertifiedValue,
    inc: bool,
    wp: u32,
) -> Float {
    let dp = &derivs[0];
    let vf = v.to_f64();
    let (mut lo, mut hi) = (a.mid_f64(), b.mid_f64());
    for _ in 0..60 {
        let m = 0.5 * (lo + hi);
        let below = (p.eval_f64(m) < vf) == inc;
        if below {
            lo = m;
        } else {
            hi = m;
        }
    }
    let guess = 0.5 * (lo + hi);
    let mut blo = Float::with_val(wp, a.lo());
    let mut bhi = Float::with_val(wp, b.hi());
    let mut t = Float::with_val(wp, guess);
    // near a fold the root is ~ c ± √(2(v − p(c))/p''(c)); Newton from the
    // f64 guess would only halve the distance per step there
    for (end, sign) in [(a, 1), (b, -1)] {
        let critical_end = end.hi() > &0 && end.lo() < &1;
        if critical_end && (guess - end.mid_f64()).abs() < 1e-6 {
            let c = end.mid(wp);
            let r = Float::with_val(wp, v - p.eval_float(&c)) * 2u32 / derivs[1].eval_float(&c);
            if r > 0 {
                let s = r.sqrt();
                t = if sign > 0 {
                    Float::with_val(wp, &c + &s)
                } else {
                    Float::with_val(wp, &c - &s)
                };
            }
        }
    }
    if t < blo || t > bhi {
        t = Float::with_val(wp, &blo + &bhi) / 2u32;
    }
    let (a0, b0) = (blo.clone(), bhi.clone());
    let mut work = 53u32;
    for _ in 0..(4 * wp + 200) {
        work = (work * 2).min(wp);
        let full = work == wp;
        let tw = Float::with_val(work, &t);
        let fv = Float::with_val(work, p.eval_float(&tw) - v);
        if full {
            if fv.is_zero() {
                return t;
            }
            // signs below full precision are not trusted for bracketing
            if fv.is_sign_negative() == inc {
                blo = t.clone();
            } else {
                bhi = t.clone();
            }
        }
        let dv = dp.eval_float(&tw);
        let mut next = if dv.is_zero() {
            Float::with_val(wp, &blo + &bhi) / 2u32
        } else {
            Float::with_val(wp, &t - Float::with_val(work, &fv / &dv))
        };
        let (lo, hi) = if full { (&blo, &bhi) } else { (&a0, &b0) };
        if next < *lo || next > *hi {
            next = Float::with_val(wp, lo + hi) / 2u32;
        }
        let step = Float::with_val(wp, &next - &t).abs();
        t = next;
        if full {
            let tol = match t.get_exp() {
                Some(e) => Float::with_val(wp, 1) << (e - wp as i32 + 3),
                None => Float::with_val(wp, 1) >> wp,
            };
            if step <= tol || Float::with_val(wp, &bhi - &blo) <= tol {
                break;
            }
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn ex(n: i64, d: i64) -> CertifiedValue {
        CertifiedValue::exact(q(n, d), 128)
    }

    #[test]
    fn ulam_point_value() {
        let f = MapSpec::ulam();
        assert_eq!(f.evaluate(&ex(3, 10), 128).exact_value(), Some(&q(21, 25)));
    }

    #[test]
    fn ulam_critical_data() {
        let f = MapSpec::ulam();
        assert_eq!(f.num_critical(), 1);
        let c = &f.critical_points()[0];
        assert_eq!(c.location.exact_value(), Some(&q(1, 2)));
        assert_eq!(c.order, Some(2.0));
        let rec = f.verify_nonflat(0, 400).unwrap();
        assert!(rec.pass);
        assert!((rec.constant - 8.0).abs() < 1e-9);
        assert_eq!(f.boundary(), BoundaryBehavior::Invariant);
        assert!(f.negative_schwarzian());
    }

    #[test]
    fn ulam_schwarzian_values() {
        // S(4x - 4x^2) = -6 / (1 - 2x)^2
        let f = MapSpec::ulam();
        assert_eq!(f.schwarzian(&ex(0, 1), 128).unwrap().exact_value(), Some(&q(-6, 1)));
        assert_eq!(f.schwarzian(&ex(1, 4), 128).unwrap().exact_value(), Some(&q(-24, 1)));
        assert!(matches!(f.schwarzian(&ex(1, 2), 128), Err(Error::AtCriticalPoint)));
    }

    #[test]
    fn chebyshev3_critical_points() {
        let f = MapSpec::chebyshev_fold(3).unwrap();
        let locs: Vec<_> = f
            .critical_points()
            .iter()
            .map(|c| c.location.exact_value().cloned())
            .collect();
        assert_eq!(locs, vec![Some(q(1, 4)), Some(q(3, 4))]);
        assert_eq!(f.evaluate(&ex(1, 4), 128).exact_value(), Some(&q(1, 1)));
        assert_eq!(f.evaluate(&ex(3, 4), 128).exact_value(), Some(&q(0, 1)));
        assert!(f.is_increasing(0) && !f.is_increasing(1) && f.is_increasing(2));
    }

    #[test]
    fn tent_and_fold3() {
        let t = MapSpec::tent();
        assert_eq!(t.evaluate(&ex(3, 10), 128).exact_value(), Some(&q(3, 5)));
        assert_eq!(t.evaluate(&ex(7, 10), 128).exact_value(), Some(&q(3, 5)));
        let l3 = MapSpec::uniform_fold(3).unwrap();
        assert_eq!(l3.evaluate(&ex(1, 2), 128).exact_value(), Some(&q(1, 2)));
        assert_eq!(l3.evaluate(&ex(1, 3), 128).exact_value(), Some(&q(1, 1)));
        assert!(matches!(t.verify_nonflat(0, 10), Err(Error::NotSmooth)));
    }

    #[test]
    fn interval_evaluation_contains_point_values() {
        let f = MapSpec::logistic(q(39, 10)).unwrap();
        let lo = Float::with_val(128, 0.2);
        let hi = Float::with_val(128, 0.21);
        let x = CertifiedValue::interval(lo, hi);
        let y = f.evaluate(&x, 128);
        for k in 0..=10 {
            let t = q(20, 100) + q(k, 1000);
            let v = 3.9 * t.to_f64() * (1.0 - t.to_f64());
            assert!(y.lo().to_f64() <= v + 1e-12 && y.hi().to_f64() >= v - 1e-12);
        }
    }

    #[test]
    fn inverse_branches_round_trip() {
        let f = MapSpec::ulam();
        let y = CertifiedValue::from_f64(0.37, 256).forget_exact();
        for k in 0..2 {
            let t = f.inverse_branch(k, &y, 256).unwrap();
            assert!(t.width_f64() < 1e-60);
            let back = f.evaluate(&t, 256);
            assert!(back.contains(&y) || back.overlaps(&y));
            let tm = t.mid_f64();
            assert!((4.0 * tm * (1.0 - tm) - 0.37).abs() < 1e-14);
        }
        // boundary preimages are exact
        assert_eq!(
            f.inverse_branch(1, &ex(0, 1), 128).unwrap().exact_value(),
            Some(&q(1, 1))
        );
    }

    #[test]
    fn pushforward_of_tent_is_ulam() {
        let g = MapSpec::pushforward("ulam_via_tent", MapSpec::tent(), HomeoSpec::SinSquared).unwrap();
        let f = MapSpec::ulam();
        for k in 1..20 {
            let x = CertifiedValue::from_f64(k as f64 / 20.0 + 0.001, 128).forget_exact();
            assert!(g.evaluate(&x, 128).overlaps(&f.evaluate(&x, 128)));
        }
        assert_eq!(g.critical_points()[0].location.exact_value(), Some(&q(1, 2)));
    }

    #[test]
    fn rejects_maps_leaving_the_interval() {
        assert!(MapSpec::polynomial("bad", vec![q(0, 1), q(5, 1), q(-5, 1)], PrecisionConfig::default()).is_err());
        assert!(MapSpec::folded_linear("bad", vec![q(2, 3), q(1, 3)], PrecisionConfig::default()).is_err());
    }

    #[test]
    fn classify_by_partition() {
        let f = MapSpec::chebyshev_fold(3).unwrap();
        assert_eq!(f.classify(&ex(1, 10)), PointClass::Branch(0));
        assert_eq!(f.classify(&ex(1, 2)), PointClass::Branch(1));
        assert_eq!(f.classify(&ex(9, 10)), PointClass::Branch(2));
        assert_eq!(f.classify(&ex(3, 4)), PointClass::Critical(1));
        let fuzzy = CertifiedValue::interval(Float::with_val(64, 0.24), Float::with_val(64, 0.26));
        assert_eq!(f.classify(&fuzzy), PointClass::Uncertain);
    }
}
