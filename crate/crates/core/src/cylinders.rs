//! One-sided cylinder chains Î⁽ⁿ⁾_±(x), their shadowing (cut) times, and the
//! independent checks that audit them.
//!
//! Cuts are found combinatorially: each side carries a marker point P whose
//! image at time n is the endpoint of f^n(Î⁽ⁿ⁻¹⁾). The side is cut at n when
//! the symbol of Pⁿ differs from that of xⁿ; the new endpoint is then the
//! n-th preimage of the critical point bounding I_{a_n(x)} towards Pⁿ.
//! Metric endpoints are obtained by pulling that critical point back
//! through the inverse branches along x's itinerary.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::float::Round;
use rug::{Float, Rational};
use serde::Serialize;

use crate::arith::CertifiedValue;
use crate::error::{Error, Result};
use crate::map_model::{MapSpec, OrbitSeed, PointClass, PullbackTarget};
use crate::symbolic::{
    certified_orbit, kneading_sequences, separation_against, CertifiedOrbit, KneadingData, Separation, SymbolSeq,
    Truncation,
};

/// Relative enclosure width accepted for a metric endpoint.
const ENDPOINT_REL_WIDTH_LOG2: i32 = -40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Base {
    Point(CertifiedValue),
    /// Two one-sided chains, one per side of the critical point.
    Critical(usize),
}

/// The point whose orbit bounds a side of the cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marker {
    /// The endpoint is an `start`-th preimage of critical point `critical`.
    Critical { critical: usize, start: usize },
    /// The endpoint is the boundary point 0 or 1.
    Boundary { point: u8 },
}

impl Marker {
    fn start(&self) -> usize {
        match self {
            Marker::Critical { start, .. } => *start,
            Marker::Boundary { .. } => 0,
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, Marker::Boundary { .. })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Endpoint {
    pub depth: usize,
    pub marker: Marker,
    pub value: Option<CertifiedValue>,
    pub bits: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct SideChain {
    /// False when x is the boundary point on this side, so the side is empty.
    pub present: bool,
    #[serde(skip)]
    pub symbols: Vec<u16>,
    pub cuts: Vec<usize>,
    pub endpoints: Vec<Endpoint>,
    /// Marker changes, including hand-offs when a marker orbit lands on a
    /// critical point that bounds the current partition element.
    pub markers: Vec<(usize, Marker)>,
    pub depth: usize,
    pub metric_depth: usize,
}

impl SideChain {
    pub fn endpoint_at(&self, n: usize) -> &Endpoint {
        let idx = self.endpoints.partition_point(|e| e.depth <= n);
        &self.endpoints[idx - 1]
    }

    pub fn marker_at(&self, n: usize) -> Marker {
        let idx = self.markers.partition_point(|(d, _)| *d <= n);
        self.markers[idx - 1].1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ChainTruncation {
    /// x^depth is a critical point.
    HitCritical { depth: usize },
    /// An itinerary symbol could not be certified.
    PrecisionExhausted { depth: usize },
    /// A marker orbit was not known far enough.
    MarkerUnresolved { depth: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct CylinderChain {
    pub base_value: CertifiedValue,
    pub base_critical: Option<usize>,
    pub depth: usize,
    pub metric_depth: usize,
    pub left: SideChain,
    pub right: SideChain,
    pub truncation: Option<ChainTruncation>,
    /// x⁰, x¹, …
    #[serde(skip)]
    pub orbit: Vec<CertifiedValue>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutSide {
    Left,
    Right,
    Both,
}

#[derive(Clone, Debug, Serialize)]
pub struct CutEvent {
    pub depth: usize,
    pub side: CutSide,
}

impl CylinderChain {
    pub fn side(&self, s: Side) -> &SideChain {
        match s {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn present_sides(&self) -> Vec<Side> {
        Side::BOTH.into_iter().filter(|s| self.side(*s).present).collect()
    }

    pub fn endpoint_value(&self, s: Side, n: usize) -> Option<CertifiedValue> {
        let sc = self.side(s);
        if !sc.present {
            return Some(self.base_value.clone());
        }
        if n > sc.metric_depth || n > self.depth {
            return None;
        }
        sc.endpoint_at(n).value.clone()
    }

    /// |Î⁽ⁿ⁾_σ(x)|; zero for an empty side.
    pub fn side_length(&self, s: Side, n: usize) -> Option<CertifiedValue> {
        let e = self.endpoint_value(s, n)?;
        let prec = e.prec().max(self.base_value.prec());
        Some(e.sub(&self.base_value, prec).abs())
    }

    /// Endpoints (left, right) of Î⁽ⁿ⁾(x).
    pub fn interval_at(&self, n: usize) -> Option<(CertifiedValue, CertifiedValue)> {
        Some((
            self.endpoint_value(Side::Left, n)?,
            self.endpoint_value(Side::Right, n)?,
        ))
    }

    pub fn cut_events(&self) -> Vec<CutEvent> {
        let mut out: Vec<CutEvent> = Vec::new();
        let (l, r) = (&self.left.cuts, &self.right.cuts);
        let (mut i, mut j) = (0, 0);
        while i < l.len() || j < r.len() {
            let (a, b) = (l.get(i).copied(), r.get(j).copied());
            match (a, b) {
                (Some(x), Some(y)) if x == y => {
                    out.push(CutEvent {
                        depth: x,
                        side: CutSide::Both,
                    });
                    i += 1;
                    j += 1;
                }
                (Some(x), Some(y)) if x < y => {
                    out.push(CutEvent {
                        depth: x,
                        side: CutSide::Left,
                    });
                    i += 1;
                }
                (Some(x), None) => {
                    out.push(CutEvent {
                        depth: x,
                        side: CutSide::Left,
                    });
                    i += 1;
                }
                (_, Some(y)) => {
                    out.push(CutEvent {
                        depth: y,
                        side: CutSide::Right,
                    });
                    j += 1;
                }
                (None, None) => break,
            }
        }
        out
    }

    /// |fⁿ(Î⁽ⁿ⁾_σ)| = |Pⁿ − xⁿ| with P the marker of the side.
    pub fn image_length(&self, data: &CriticalData, map: &MapSpec, s: Side, n: usize) -> Option<CertifiedValue> {
        let sc = self.side(s);
        if !sc.present || n > self.depth {
            return None;
        }
        let m = sc.marker_at(n);
        let p = data.marker_point(map, &m, n - m.start())?;
        let x = self.orbit.get(n)?;
        let prec = p.prec().max(x.prec());
        Some(p.sub(x, prec).abs())
    }

    /// Fails with `TruncatedByCriticalHit` when the chain stopped because
    /// x is a preimage of a critical point.
    pub fn require_full(&self) -> Result<()> {
        match self.truncation {
            Some(ChainTruncation::HitCritical { depth }) => Err(Error::TruncatedByCriticalHit { depth }),
            _ => Ok(()),
        }
    }
}

/// Kneading data plus the itineraries of the boundary points, computed once
/// and shared by every chain of a map.
#[derive(Clone, Debug)]
pub struct CriticalData {
    pub kneading: KneadingData,
    /// Orbits of 0 and 1.
    pub boundary: Vec<CertifiedOrbit>,
    pub length: usize,
}

impl CriticalData {
    pub fn compute(map: &MapSpec, length: usize) -> Result<Self> {
        let kneading = kneading_sequences(map, length)?;
        let cfg = map.precision();
        let boundary = [0, 1]
            .iter()
            .map(|&p| {
                certified_orbit(
                    map,
                    &OrbitSeed::Value(CertifiedValue::from_int(p, cfg.initial_bits)),
                    length,
                    cfg,
                    cfg.initial_bits,
                    false,
                )
            })
            .collect();
        Ok(CriticalData {
            kneading,
            boundary,
            length,
        })
    }

    fn marker_seq(&self, m: &Marker) -> &SymbolSeq {
        match m {
            Marker::Critical { critical, .. } => &self.kneading.sequences[*critical].left,
            Marker::Boundary { point } => &self.boundary[*point as usize].seq,
        }
    }

    /// Class of the marker's orbit k steps after it became active.
    pub fn marker_class(&self, m: &Marker, k: usize) -> Option<PointClass> {
        if k == 0 {
            if let Marker::Critical { critical, .. } = m {
                return Some(PointClass::Critical(*critical));
            }
        }
        let seq = self.marker_seq(m);
        if k < seq.certified {
            return Some(PointClass::Branch(seq.symbols[k]));
        }
        match seq.truncation {
            Truncation::HitCritical { index, critical } if index == k => Some(PointClass::Critical(critical)),
            _ => None,
        }
    }

    pub fn marker_point(&self, map: &MapSpec, m: &Marker, k: usize) -> Option<CertifiedValue> {
        match m {
            Marker::Critical { critical, .. } => {
                if k == 0 {
                    Some(map.critical_points()[*critical].location.clone())
                } else {
                    self.kneading.orbits[*critical].points.get(k - 1).cloned()
                }
            }
            Marker::Boundary { point } => self.boundary[*point as usize].points.get(k).cloned(),
        }
    }
}

/// Cylinder chain of `base` to `depth` with metric endpoints through
/// `depth`.
pub fn refine(map: &MapSpec, base: &Base, depth: usize) -> Result<CylinderChain> {
    let data = CriticalData::compute(map, depth + 2)?;
    refine_with(map, &data, base, depth, depth)
}

pub fn refine_with(
    map: &MapSpec,
    data: &CriticalData,
    base: &Base,
    depth: usize,
    metric_depth: usize,
) -> Result<CylinderChain> {
    let cfg = map.precision();
    let q = map.num_critical();
    let mut truncation = None;
    let (base_value, base_critical, orbit, syms, present, init, avail) = match base {
        Base::Point(x) => {
            let orb = certified_orbit(
                map,
                &OrbitSeed::Value(x.clone()),
                depth + 1,
                cfg,
                cfg.initial_bits,
                false,
            );
            let cert = orb.seq.certified;
            match orb.seq.truncation {
                Truncation::HitCritical { index, .. } => {
                    if index == 0 {
                        return Err(Error::TruncatedByCriticalHit { depth: 0 });
                    }
                    truncation = Some(ChainTruncation::HitCritical { depth: index });
                }
                Truncation::PrecisionExhausted { index, bits } => {
                    if index == 0 {
                        return Err(Error::PrecisionExhausted { bits });
                    }
                    truncation = Some(ChainTruncation::PrecisionExhausted { depth: index });
                }
                Truncation::Horizon => {}
            }
            let k = orb.seq.symbols[0] as usize;
            let at = |v: i64| x.exact_value().is_some_and(|r| *r == v);
            let s = orb.seq.certified_prefix().to_vec();
            let init_l = if k == 0 {
                Marker::Boundary { point: 0 }
            } else {
                Marker::Critical {
                    critical: k - 1,
                    start: 0,
                }
            };
            let init_r = if k == q {
                Marker::Boundary { point: 1 }
            } else {
                Marker::Critical { critical: k, start: 0 }
            };
            (
                x.clone(),
                None,
                orb.points,
                [s.clone(), s],
                [!at(0), !at(1)],
                [init_l, init_r],
                cert - 1,
            )
        }
        Base::Critical(i) => {
            let i = *i;
            let sk = &data.kneading.sequences[i];
            let cert = sk.left.certified;
            if let Truncation::HitCritical { index, .. } = sk.left.truncation {
                truncation = Some(ChainTruncation::HitCritical { depth: index });
            }
            let loc = map.critical_points()[i].location.clone();
            let mut orbit = vec![loc.clone()];
            orbit.extend(data.kneading.orbits[i].points.iter().cloned());
            let init_l = if i == 0 {
                Marker::Boundary { point: 0 }
            } else {
                Marker::Critical {
                    critical: i - 1,
                    start: 0,
                }
            };
            let init_r = if i + 1 == q {
                Marker::Boundary { point: 1 }
            } else {
                Marker::Critical {
                    critical: i + 1,
                    start: 0,
                }
            };
            (
                loc,
                Some(i),
                orbit,
                [
                    sk.left.certified_prefix().to_vec(),
                    sk.right.certified_prefix().to_vec(),
                ],
                [true, true],
                [init_l, init_r],
                cert - 1,
            )
        }
    };
    if avail < depth && truncation.is_none() {
        truncation = Some(ChainTruncation::PrecisionExhausted { depth: avail + 1 });
    }
    let target = depth.min(avail);
    let mut sides = Vec::new();
    for k in 0..2 {
        let mut sc = combinatorial_side(&syms[k], init[k], target, data);
        sc.present = present[k];
        if !sc.present {
            sc.cuts.clear();
            sc.endpoints.truncate(1);
            sc.depth = target;
        }
        sides.push(sc);
    }
    let reached = sides
        .iter()
        .filter(|s| s.present)
        .map(|s| s.depth)
        .min()
        .unwrap_or(target);
    if reached < target {
        truncation = Some(ChainTruncation::MarkerUnresolved { depth: reached + 1 });
    }
    for sc in sides.iter_mut() {
        sc.depth = reached;
        sc.cuts.retain(|&c| c <= reached);
        sc.endpoints.retain(|e| e.depth <= reached);
        let limit = metric_depth.min(reached);
        if sc.present {
            fill_metric(map, sc, &base_value, limit);
        } else {
            sc.endpoints[0].value = Some(base_value.clone());
            sc.metric_depth = limit;
        }
    }
    let right = sides.pop().expect("two sides");
    let left = sides.pop().expect("two sides");
    let metric = left.metric_depth.min(right.metric_depth);
    Ok(CylinderChain {
        base_value,
        base_critical,
        depth: reached,
        metric_depth: metric,
        left,
        right,
        truncation,
        orbit,
    })
}

fn combinatorial_side(symbols: &[u16], init: Marker, target: usize, data: &CriticalData) -> SideChain {
    let mut marker = init;
    let mut markers = vec![(0, init)];
    let mut cuts = Vec::new();
    let mut endpoints = vec![Endpoint {
        depth: 0,
        marker: init,
        value: None,
        bits: 0,
    }];
    let mut reached = target;
    for n in 1..=target {
        let sx = symbols[n] as i64;
        let k = n - marker.start();
        let new_crit = match data.marker_class(&marker, k) {
            Some(PointClass::Branch(sm)) => {
                let sm = sm as i64;
                match sm.cmp(&sx) {
                    Ordering::Equal => None,
                    Ordering::Less => Some(sx - 1),
                    Ordering::Greater => Some(sx),
                }
            }
            Some(PointClass::Critical(j)) => {
                let j = j as i64;
                if j < sx - 1 {
                    Some(sx - 1)
                } else if j > sx {
                    Some(sx)
                } else {
                    // the marker sits on a critical point bounding I_{a_n}:
                    // no cut, the critical point takes over as marker
                    marker = Marker::Critical {
                        critical: j as usize,
                        start: n,
                    };
                    markers.push((n, marker));
                    continue;
                }
            }
            _ => {
                reached = n - 1;
                break;
            }
        };
        if let Some(c) = new_crit {
            marker = Marker::Critical {
                critical: c as usize,
                start: n,
            };
            markers.push((n, marker));
            cuts.push(n);
            endpoints.push(Endpoint {
                depth: n,
                marker,
                value: None,
                bits: 0,
            });
        }
    }
    SideChain {
        present: true,
        symbols: symbols.to_vec(),
        cuts,
        endpoints,
        markers,
        depth: reached,
        metric_depth: 0,
    }
}

fn log2_of(v: &Float) -> f64 {
    if v.is_zero() {
        return f64::NEG_INFINITY;
    }
    match v.get_exp() {
        Some(e) => {
            let m = Float::with_val(53, v >> e);
            e as f64 + m.to_f64().abs().log2()
        }
        None => 0.0,
    }
}

fn accurate_enough(len: &CertifiedValue) -> bool {
    if len.is_exact() {
        return len.certainly_positive();
    }
    if !len.certainly_positive() {
        return false;
    }
    let w = len.width();
    if w.is_zero() {
        return true;
    }
    log2_of(&w) - log2_of(len.lo()) <= ENDPOINT_REL_WIDTH_LOG2 as f64
}

/// Working precision per pullback step: the last inverse steps act on
/// O(1) intervals, the first ones must resolve the final length.
fn ramp(bits: u32, n: usize) -> Vec<u32> {
    (0..n)
        .map(|j| {
            let b = 96 + (bits.saturating_sub(96) as u64 * (n - j) as u64 / n as u64) as u32;
            b.div_ceil(64) * 64
        })
        .collect()
}

fn fill_metric(map: &MapSpec, sc: &mut SideChain, x: &CertifiedValue, limit: usize) {
    let cfg = map.precision();
    let mut prev_log2 = 0.0f64;
    sc.metric_depth = limit;
    for idx in 0..sc.endpoints.len() {
        let (depth, marker) = (sc.endpoints[idx].depth, sc.endpoints[idx].marker);
        if depth > limit {
            break;
        }
        let mut done = None;
        let est = 128.0 + (-prev_log2).max(0.0);
        let mut bits = (((est / 64.0).ceil() as u32) * 64).clamp(cfg.initial_bits, cfg.max_bits);
        loop {
            let v = match (depth, marker) {
                (_, Marker::Boundary { point }) => Some(CertifiedValue::from_int(point as i64, bits)),
                (0, Marker::Critical { critical, .. }) => Some(map.critical_points()[critical].location.clone()),
                (n, Marker::Critical { critical, .. }) => map
                    .pullback(&PullbackTarget::Critical(critical), &sc.symbols[..n], &ramp(bits, n))
                    .ok(),
            };
            if let Some(v) = v {
                let p = v.prec().max(x.prec());
                let len = v.sub(x, p).abs();
                if accurate_enough(&len) {
                    prev_log2 = match len.exact_value() {
                        Some(r) => r.numer().significant_bits() as f64 - r.denom().significant_bits() as f64,
                        None => log2_of(len.lo()),
                    };
                    done = Some(v);
                    break;
                }
            }
            if bits >= cfg.max_bits {
                break;
            }
            bits = (bits * 2).min(cfg.max_bits);
        }
        match done {
            Some(v) => {
                sc.endpoints[idx].value = Some(v);
                sc.endpoints[idx].bits = bits;
            }
            None => {
                sc.metric_depth = depth.saturating_sub(1);
                break;
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowingTimes {
    /// N₋ and N₊ without the initial time 0.
    pub minus: Vec<usize>,
    pub plus: Vec<usize>,
    /// Set when one side is empty (x ∈ {0, 1}) and its times mirror the
    /// other side's.
    pub mirrored_from: Option<Side>,
    pub depth: usize,
}

impl ShadowingTimes {
    pub fn side(&self, s: Side) -> &[usize] {
        match s {
            Side::Left => &self.minus,
            Side::Right => &self.plus,
        }
    }
}

pub fn shadowing_times(chain: &CylinderChain) -> ShadowingTimes {
    let (mut minus, mut plus) = (chain.left.cuts.clone(), chain.right.cuts.clone());
    let mut mirrored_from = None;
    if !chain.left.present {
        minus = plus.clone();
        mirrored_from = Some(Side::Right);
    } else if !chain.right.present {
        plus = minus.clone();
        mirrored_from = Some(Side::Left);
    }
    ShadowingTimes {
        minus,
        plus,
        mirrored_from,
        depth: chain.depth,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCylinder {
    pub depth: usize,
    pub lo: f64,
    pub hi: f64,
    pub matched: usize,
    pub excluded: usize,
}

/// Brute-force cylinders: iterate every grid point i/grid and take the hull
/// of those whose first depth+1 symbols match x's. Returns one entry per
/// depth 0..=max_depth.
pub fn oracle_cylinders(map: &MapSpec, x: &CertifiedValue, max_depth: usize, grid: usize) -> Vec<OracleCylinder> {
    let cfg = crate::arith::PrecisionConfig {
        max_bits: 512.max(map.precision().initial_bits),
        ..map.precision().clone()
    };
    let reference = certified_orbit(
        map,
        &OrbitSeed::Value(x.clone()),
        max_depth + 1,
        map.precision(),
        cfg.initial_bits,
        false,
    )
    .seq;
    let mut out: Vec<OracleCylinder> = (0..=max_depth)
        .map(|d| OracleCylinder {
            depth: d,
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
            matched: 0,
            excluded: 0,
        })
        .collect();
    let rows: Vec<(f64, SymbolSeq)> = {
        use rayon::prelude::*;
        (0..=grid)
            .into_par_iter()
            .map(|i| {
                let r = Rational::from((i as u64, grid as u64));
                let v = CertifiedValue::exact(r, cfg.initial_bits).forget_exact();
                let seq = certified_orbit(map, &OrbitSeed::Value(v), max_depth + 1, &cfg, cfg.initial_bits, false).seq;
                (i as f64 / grid as f64, seq)
            })
            .collect()
    };
    for (t, seq) in rows {
        for d in 0..=max_depth {
            let need = d + 1;
            if seq.certified < need || reference.certified < need {
                out[d].excluded += 1;
                continue;
            }
            if seq.symbols[..need] == reference.symbols[..need] {
                let o = &mut out[d];
                o.lo = o.lo.min(t);
                o.hi = o.hi.max(t);
                o.matched += 1;
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckFailure {
    pub side: Side,
    pub depth: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct CheckReport {
    pub checked: usize,
    pub passed: usize,
    pub skipped: usize,
    pub failures: Vec<CheckFailure>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.checked > 0 && self.passed == self.checked
    }

    fn fail(&mut self, side: Side, depth: usize, reason: impl Into<String>) {
        self.checked += 1;
        if self.failures.len() < 50 {
            self.failures.push(CheckFailure {
                side,
                depth,
                reason: reason.into(),
            });
        }
    }

    fn pass(&mut self) {
        self.checked += 1;
        self.passed += 1;
    }
}

fn class_fits(class: PointClass, a: u16) -> bool {
    match class {
        PointClass::Branch(k) => k == a,
        PointClass::Critical(j) => j + 1 == a as usize || j == a as usize,
        PointClass::Uncertain => false,
    }
}

/// For consecutive cut times n_i < n_{i+1} of each side, checks that every
/// image f^j(Î⁽ⁿⁱ⁾_σ), j < n_{i+1}, stays in the closed partition element
/// of x's itinerary (so f^{n_{i+1}} is monotone there), and audits the
/// endpoint provenance: f^{n_i}(endpoint) must contain the marker's
/// critical point. `perturb` shifts each endpoint outward by that absolute
/// amount, as a negative control.
pub fn verify_monotone(
    map: &MapSpec,
    chain: &CylinderChain,
    data: &CriticalData,
    pieces: usize,
    perturb: Option<f64>,
) -> CheckReport {
    let mut rep = CheckReport::default();
    let pieces = pieces.max(1);
    for side in chain.present_sides() {
        let sc = chain.side(side);
        let mut times = vec![0usize];
        times.extend(sc.cuts.iter().copied());
        for w in times.windows(2) {
            let (ni, nn) = (w[0], w[1]);
            if ni > chain.metric_depth || nn > chain.depth {
                rep.skipped += 1;
                continue;
            }
            let ep = sc.endpoint_at(ni);
            let Some(e0) = ep.value.clone() else {
                rep.skipped += 1;
                continue;
            };
            let bits = ep.bits.max(map.precision().initial_bits) + 64;
            let x = &chain.base_value;
            let mut e = e0.to_prec(bits);
            if let Some(d) = perturb {
                let shift = CertifiedValue::from_f64(if side == Side::Left { -d } else { d }, bits);
                e = e.add(&shift, bits).clamp_unit();
            }
            // node 0 is the endpoint, node `pieces` is x
            let mut nodes = vec![e.clone()];
            for k in 1..pieces {
                let t = Rational::from((k as u64, pieces as u64));
                let em = e.mid(bits);
                let xm = x.mid(bits);
                let v = Float::with_val(bits, &xm - &em) * Float::with_val(bits, &t) + &em;
                nodes.push(CertifiedValue::point(v));
            }
            let node_orbits: Vec<Vec<PointClass>> = nodes
                .iter()
                .map(|v| {
                    map.orbit(&OrbitSeed::Value(v.clone()), nn.saturating_sub(1), bits, false)
                        .into_iter()
                        .map(|p| p.class)
                        .collect()
                })
                .collect();
            let e_orbit = map.orbit(&OrbitSeed::Value(e.clone()), ni, bits, false);
            let mut ok = true;
            let mut reason = String::new();
            if let Marker::Critical { critical, .. } = ep.marker {
                if ni > 0 {
                    let img = &e_orbit[ni].value;
                    let c = &map.critical_points()[critical].location;
                    let hit = match c.exact_value() {
                        Some(r) => img.contains_rational(r),
                        None => img.overlaps(c),
                    };
                    if !hit {
                        ok = false;
                        reason = format!("provenance: f^{ni}(endpoint) misses the critical point");
                    }
                }
            }
            if ok {
                'time: for j in 0..nn {
                    let a = sc.symbols[j];
                    let e_class = if j < ni {
                        e_orbit[j].class
                    } else {
                        let m = sc.marker_at(ni);
                        data.marker_class(&m, j - ni).unwrap_or(PointClass::Uncertain)
                    };
                    let mut classes = vec![e_class];
                    for o in &node_orbits[1..] {
                        classes.push(o[j]);
                    }
                    let x_class = match chain.base_critical {
                        // the critical base point bounds the side's element
                        Some(c) if j == 0 => PointClass::Critical(c),
                        _ => PointClass::Branch(a),
                    };
                    classes.push(x_class);
                    for (idx, c) in classes.iter().enumerate() {
                        if !class_fits(*c, a) {
                            ok = false;
                            reason = format!("node {idx} leaves partition element {a} at time {j}");
                            break 'time;
                        }
                    }
                }
            }
            if ok {
                rep.pass();
            } else {
                rep.fail(side, ni, reason);
            }
        }
    }
    rep
}

/// Compares chain endpoints with brute-force oracle hulls; both ends must
/// agree within `2/grid`. `shift` moves the chain endpoints outward, as a
/// negative control.
pub fn compare_with_oracle(
    chain: &CylinderChain,
    oracle: &[OracleCylinder],
    grid: usize,
    shift: Option<f64>,
) -> CheckReport {
    let mut rep = CheckReport::default();
    let tol = 2.0 / grid as f64;
    let d = shift.unwrap_or(0.0);
    for o in oracle {
        let Some((l, r)) = chain.interval_at(o.depth) else {
            rep.skipped += 1;
            continue;
        };
        if o.matched == 0 {
            rep.skipped += 1;
            continue;
        }
        let (l, r) = (l.mid_f64() - d, r.mid_f64() + d);
        let (el, er) = ((l - o.lo).abs(), (r - o.hi).abs());
        if el <= tol && er <= tol {
            rep.pass();
        } else {
            let side = if el > tol { Side::Left } else { Side::Right };
            rep.fail(
                side,
                o.depth,
                format!("chain [{l}, {r}] vs oracle [{}, {}]", o.lo, o.hi),
            );
        }
    }
    rep
}

/// First index where the itinerary of y departs from `reference`, using
/// precision `bits` and escalating while a symbol is uncertain.
fn departure(map: &MapSpec, y: &CertifiedValue, reference: &[u16], bits: u32) -> Option<Separation> {
    let cfg = map.precision();
    let mut b = bits.max(cfg.initial_bits);
    loop {
        let mut v = y.clone();
        let mut uncertain = false;
        for (j, &a) in reference.iter().enumerate() {
            if j > 0 {
                v = map.evaluate(&v, b);
            }
            match map.classify(&v) {
                PointClass::Branch(k) if k == a => continue,
                PointClass::Branch(_) => return Some(Separation::At(j)),
                PointClass::Critical(_) => return None,
                PointClass::Uncertain => {
                    uncertain = true;
                    break;
                }
            }
        }
        if !uncertain {
            return Some(Separation::AtLeast(reference.len()));
        }
        if b >= cfg.max_bits {
            return None;
        }
        b = (b * 2).min(cfg.max_bits);
    }
}

/// Samples y = x ± u·|Î⁽ᵏ⁾_σ| and checks |Î⁽ˢ⁻¹⁾_σ| ≥ |y − x| ≥ |Î⁽ˢ⁾_σ| with
/// s = s(y, x) computed from an independent itinerary of y.
pub fn verify_distance_sandwich(map: &MapSpec, chain: &CylinderChain, samples: usize, seed: u64) -> CheckReport {
    let mut rep = CheckReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sides: Vec<Side> = chain.present_sides();
    if sides.is_empty() || chain.metric_depth == 0 {
        return rep;
    }
    let x = &chain.base_value;
    for _ in 0..samples {
        let side = sides[rng.gen_range(0..sides.len())];
        let k = rng.gen_range(0..chain.metric_depth);
        let u: f64 = rng.gen_range(0.0..1.0);
        let sc = chain.side(side);
        if sc.endpoint_at(k).marker.is_boundary() {
            rep.skipped += 1;
            continue;
        }
        let Some(len) = chain.side_length(side, k) else {
            rep.skipped += 1;
            continue;
        };
        let bits = ((128.0 - log2_of(len.lo())).max(0.0) as u32 + 64).max(map.precision().initial_bits);
        let offset = Float::with_val(bits, len.mid(bits) * u);
        let xm = x.mid(bits);
        let yv = if side == Side::Left {
            Float::with_val(bits, &xm - &offset)
        } else {
            Float::with_val(bits, &xm + &offset)
        };
        let y = CertifiedValue::point(yv);
        let reference = &sc.symbols[..(chain.metric_depth + 1).min(sc.symbols.len())];
        let s = match departure(map, &y, reference, bits) {
            Some(Separation::At(s)) if s >= 1 && s <= chain.metric_depth => s,
            _ => {
                rep.skipped += 1;
                continue;
            }
        };
        if sc.endpoint_at(s - 1).marker.is_boundary() || sc.endpoint_at(s).marker.is_boundary() {
            rep.skipped += 1;
            continue;
        }
        let (outer, inner) = match (chain.side_length(side, s - 1), chain.side_length(side, s)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                rep.skipped += 1;
                continue;
            }
        };
        let p = bits.max(x.prec());
        let d = y.sub(x, p).abs();
        let upper = !matches!(outer.cmp_certain(&d), Some(Ordering::Less) | None) || outer.lo() >= d.hi();
        let lower = !matches!(d.cmp_certain(&inner), Some(Ordering::Less) | None) || d.lo() >= inner.hi();
        if upper && lower {
            rep.pass();
        } else {
            rep.fail(
                side,
                k,
                format!("s = {s}: |Î^(s-1)| ≥ d: {upper}, d ≥ |Î^(s)|: {lower}"),
            );
        }
    }
    rep
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct SeptimeReport {
    pub report: CheckReport,
    /// Pairs for which the off-by-one claim s(x^{n_i}) = gap + 1 was
    /// (wrongly) accepted; should be zero.
    pub negative_control_accepted: usize,
}

/// For consecutive cut times with gap n_{i+1} − n_i ≥ N₀ checks
/// s(x^{n_i}) = n_{i+1} − n_i against the kneading sequences.
pub fn verify_septime(chain: &CylinderChain, kneading: &KneadingData, n0: usize) -> SeptimeReport {
    let mut out = SeptimeReport::default();
    for side in chain.present_sides() {
        let sc = chain.side(side);
        for w in sc.cuts.windows(2) {
            let (ni, nn) = (w[0], w[1]);
            let gap = nn - ni;
            if gap < n0 {
                continue;
            }
            let tail = SymbolSeq {
                symbols: sc.symbols[ni..=chain.depth.min(sc.symbols.len() - 1)].to_vec(),
                certified: chain.depth.min(sc.symbols.len() - 1) - ni + 1,
                truncation: Truncation::Horizon,
                bits: 0,
            };
            match separation_against(&tail, kneading) {
                Ok(Separation::At(v)) => {
                    if v == gap {
                        out.report.pass();
                    } else {
                        out.report.fail(side, ni, format!("s(x^{ni}) = {v}, gap = {gap}"));
                    }
                    if v == gap + 1 {
                        out.negative_control_accepted += 1;
                    }
                }
                Ok(Separation::AtLeast(v)) if v > gap => {
                    out.report.fail(side, ni, format!("s(x^{ni}) ≥ {v} > gap = {gap}"));
                }
                _ => out.report.skipped += 1,
            }
        }
    }
    out
}

/// Rounds a certified value towards zero into f64, for reporting.
pub fn to_f64_down(v: &CertifiedValue) -> f64 {
    v.lo().to_f64_round(Round::Down)
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

    fn ends(ch: &CylinderChain, n: usize) -> (Rational, Rational) {
        let (l, r) = ch.interval_at(n).unwrap();
        (l.exact_value().unwrap().clone(), r.exact_value().unwrap().clone())
    }

    #[test]
    fn tent_chain_of_three_tenths() {
        let ch = refine(&MapSpec::tent(), &Base::Point(ex(3, 10)), 2).unwrap();
        assert_eq!(ends(&ch, 0), (q(0, 1), q(1, 2)));
        assert_eq!(ends(&ch, 1), (q(1, 4), q(1, 2)));
        assert_eq!(ends(&ch, 2), (q(1, 4), q(3, 8)));
    }

    #[test]
    fn tent_chain_at_critical_value_is_one_sided() {
        let ch = refine(&MapSpec::tent(), &Base::Point(ex(1, 1)), 3).unwrap();
        assert!(!ch.right.present);
        assert_eq!(ends(&ch, 0), (q(1, 2), q(1, 1)));
        assert_eq!(ends(&ch, 1), (q(3, 4), q(1, 1)));
        assert_eq!(ends(&ch, 2), (q(7, 8), q(1, 1)));
        assert_eq!(ends(&ch, 3), (q(15, 16), q(1, 1)));
        let t = shadowing_times(&ch);
        assert_eq!(t.minus, vec![1, 2, 3]);
        assert_eq!(t.plus, t.minus);
        assert_eq!(t.mirrored_from, Some(Side::Left));
    }

    #[test]
    fn ulam_critical_value_chain_ratios_tend_to_a_quarter() {
        let f = MapSpec::ulam();
        let ch = refine(&f, &Base::Point(ex(1, 1)), 30).unwrap();
        let len = |n| ch.side_length(Side::Left, n).unwrap().mid_f64();
        let r = len(30) / len(29);
        assert!((r - 0.25).abs() < 1e-6, "ratio {r}");
    }

    #[test]
    fn critical_point_chains_nest() {
        let f = MapSpec::chebyshev_fold(3).unwrap();
        let ch = refine(&f, &Base::Critical(0), 15).unwrap();
        for n in 1..=15 {
            let (l0, r0) = ch.interval_at(n - 1).unwrap();
            let (l1, r1) = ch.interval_at(n).unwrap();
            assert!(l1.cmp_certain(&l0) != Some(Ordering::Less));
            assert!(r1.cmp_certain(&r0) != Some(Ordering::Greater));
        }
    }

    #[test]
    fn chain_matches_oracle_on_ulam() {
        let f = MapSpec::ulam();
        let x = ex(3, 10);
        let ch = refine(&f, &Base::Point(x.clone()), 8).unwrap();
        let grid = 20_000;
        for o in oracle_cylinders(&f, &x, 8, grid) {
            let (l, r) = ch.interval_at(o.depth).unwrap();
            assert!((l.mid_f64() - o.lo).abs() <= 1.0 / grid as f64, "depth {}", o.depth);
            assert!((r.mid_f64() - o.hi).abs() <= 1.0 / grid as f64, "depth {}", o.depth);
        }
    }

    #[test]
    fn monotone_and_septime_on_logistic() {
        let f = MapSpec::logistic(q(39, 10)).unwrap();
        let data = CriticalData::compute(&f, 120).unwrap();
        let ch = refine_with(&f, &data, &Base::Point(f.critical_value(0)), 100, 60).unwrap();
        let mono = verify_monotone(&f, &ch, &data, 4, None);
        assert!(mono.all_passed(), "{:?}", mono.failures);
        let neg = verify_monotone(&f, &ch, &data, 4, Some(1e-3));
        assert!(neg.passed < neg.checked);
        let sep = verify_septime(&ch, &data.kneading, 3);
        assert_eq!(sep.report.passed, sep.report.checked, "{:?}", sep.report.failures);
        assert_eq!(sep.negative_control_accepted, 0);
        let dist = verify_distance_sandwich(&f, &ch, 200, 7);
        assert!(dist.all_passed(), "{:?}", dist.failures);
    }
}
