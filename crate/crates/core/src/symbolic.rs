//! Certified itineraries, kneading sequences, separation times and the
//! (δ₀, N₀) calibration.

use std::cmp::Ordering;

use rug::Rational;
use serde::Serialize;

use crate::arith::{CertifiedValue, PrecisionConfig};
use crate::cylinders::{self, Base, Side};
use crate::error::{Error, Result};
use crate::map_model::{MapSpec, OrbitSeed, PointClass};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Truncation {
    /// The orbit landed exactly on critical point `critical` at `index`.
    HitCritical {
        index: usize,
        critical: usize,
    },
    /// The symbol at `index` could not be certified within the bit budget.
    PrecisionExhausted {
        index: usize,
        bits: u32,
    },
    Horizon,
}

/// A symbol sequence whose first `certified` entries are rigorous. At most
/// one trailing uncertain symbol (a midpoint guess) may follow.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SymbolSeq {
    pub symbols: Vec<u16>,
    pub certified: usize,
    pub truncation: Truncation,
    pub bits: u32,
}

impl SymbolSeq {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_certified(&self, i: usize) -> bool {
        i < self.certified
    }

    pub fn get(&self, i: usize) -> Option<u16> {
        if i < self.certified {
            Some(self.symbols[i])
        } else {
            None
        }
    }

    pub fn certified_prefix(&self) -> &[u16] {
        &self.symbols[..self.certified]
    }

    /// The sequence with its first `j` symbols removed.
    pub fn tail(&self, j: usize) -> SymbolSeq {
        let shift = |t: &Truncation| match t {
            Truncation::HitCritical { index, critical } => Truncation::HitCritical {
                index: index.saturating_sub(j),
                critical: *critical,
            },
            Truncation::PrecisionExhausted { index, bits } => Truncation::PrecisionExhausted {
                index: index.saturating_sub(j),
                bits: *bits,
            },
            Truncation::Horizon => Truncation::Horizon,
        };
        SymbolSeq {
            symbols: self.symbols.get(j..).map(|s| s.to_vec()).unwrap_or_default(),
            certified: self.certified.saturating_sub(j),
            truncation: shift(&self.truncation),
            bits: self.bits,
        }
    }

    fn prepend(&self, s: u16) -> SymbolSeq {
        let mut out = self.tail(0);
        out.symbols.insert(0, s);
        out.certified += 1;
        out.truncation = match out.truncation {
            Truncation::HitCritical { index, critical } => Truncation::HitCritical {
                index: index + 1,
                critical,
            },
            Truncation::PrecisionExhausted { index, bits } => Truncation::PrecisionExhausted { index: index + 1, bits },
            Truncation::Horizon => Truncation::Horizon,
        };
        out
    }
}

/// Orbit enclosures together with the certified itinerary.
#[derive(Clone, Debug)]
pub struct CertifiedOrbit {
    pub points: Vec<CertifiedValue>,
    pub seq: SymbolSeq,
}

/// Iterates `seed` and returns `len` symbols, escalating precision from
/// `start_bits` whenever a symbol cannot be certified. The whole orbit is
/// recomputed at each level. With `skip_first`, the seed itself (a
/// critical point) is dropped and the sequence starts at its image.
pub fn certified_orbit(
    map: &MapSpec,
    seed: &OrbitSeed,
    len: usize,
    cfg: &PrecisionConfig,
    start_bits: u32,
    skip_first: bool,
) -> CertifiedOrbit {
    let off = usize::from(skip_first);
    let ladder = cfg.ladder_from(start_bits);
    let mut last = None;
    for &bits in &ladder {
        let mut orbit = map.orbit(seed, (len + off).saturating_sub(1), bits, true);
        if skip_first {
            orbit.remove(0);
        }
        let mut symbols = Vec::with_capacity(len);
        let mut truncation = Truncation::Horizon;
        let mut uncertain_at = None;
        for (idx, p) in orbit.iter().enumerate() {
            match p.class {
                PointClass::Branch(k) => symbols.push(k),
                PointClass::Critical(c) => {
                    truncation = Truncation::HitCritical {
                        index: idx,
                        critical: c,
                    };
                    break;
                }
                PointClass::Uncertain => {
                    uncertain_at = Some(idx);
                    break;
                }
            }
        }
        let certified = symbols.len();
        let points: Vec<CertifiedValue> = orbit.into_iter().map(|p| p.value).collect();
        if let Some(idx) = uncertain_at {
            if bits < cfg.max_bits {
                continue;
            }
            let mid = CertifiedValue::point(points[idx].mid(bits));
            if let PointClass::Branch(k) = map.classify(&mid) {
                symbols.push(k);
            }
            truncation = Truncation::PrecisionExhausted { index: idx, bits };
        }
        last = Some(CertifiedOrbit {
            points,
            seq: SymbolSeq {
                symbols,
                certified,
                truncation,
                bits,
            },
        });
        break;
    }
    last.expect("precision ladder is never empty")
}

/// Itinerary of `x` with `horizon` symbols.
pub fn itinerary(map: &MapSpec, x: &CertifiedValue, horizon: usize) -> SymbolSeq {
    let cfg = map.precision();
    certified_orbit(map, &OrbitSeed::Value(x.clone()), horizon, cfg, cfg.initial_bits, false).seq
}

#[derive(Clone, Debug, Serialize)]
pub struct SidedKneading {
    pub left: SymbolSeq,
    pub right: SymbolSeq,
}

/// Sided kneading sequences of every critical point, plus the critical
/// orbits they were read from (`orbits[i].points[j]` encloses c_i^{j+1}).
#[derive(Clone, Debug)]
pub struct KneadingData {
    pub sequences: Vec<SidedKneading>,
    pub orbits: Vec<CertifiedOrbit>,
}

impl KneadingData {
    pub fn len(&self) -> usize {
        self.sequences.first().map_or(0, |s| s.left.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All 2q sided sequences.
    pub fn all(&self) -> impl Iterator<Item = &SymbolSeq> {
        self.sequences.iter().flat_map(|s| [&s.left, &s.right])
    }

    pub fn side(&self, critical: usize, side: Side) -> &SymbolSeq {
        match side {
            Side::Left => &self.sequences[critical].left,
            Side::Right => &self.sequences[critical].right,
        }
    }
}

/// Sided kneading sequences of length `horizon`: index 0 is the side of
/// c_i, the rest is the itinerary of the critical value.
pub fn kneading_sequences(map: &MapSpec, horizon: usize) -> Result<KneadingData> {
    let cfg = map.precision();
    let mut sequences = Vec::new();
    let mut orbits = Vec::new();
    for i in 0..map.num_critical() {
        let orb = certified_orbit(
            map,
            &OrbitSeed::Critical(i),
            horizon.saturating_sub(1),
            cfg,
            cfg.initial_bits,
            true,
        );
        sequences.push(SidedKneading {
            left: orb.seq.prepend(i as u16),
            right: orb.seq.prepend(i as u16 + 1),
        });
        orbits.push(orb);
    }
    Ok(KneadingData { sequences, orbits })
}

/// s(a, b) in the sense of the first disagreeing index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Separation {
    At(usize),
    /// No certified disagreement within this many symbols.
    AtLeast(usize),
}

impl Separation {
    pub fn value(&self) -> Option<usize> {
        match self {
            Separation::At(k) => Some(*k),
            Separation::AtLeast(_) => None,
        }
    }

    pub fn lower_bound(&self) -> usize {
        match self {
            Separation::At(k) | Separation::AtLeast(k) => *k,
        }
    }
}

pub fn separation_time(a: &SymbolSeq, b: &SymbolSeq) -> Result<Separation> {
    let n = a.len().min(b.len());
    let cert = a.certified.min(b.certified);
    for i in 0..n {
        if a.symbols[i] != b.symbols[i] {
            if i < cert {
                return Ok(Separation::At(i));
            }
            return Err(Error::UncertainPrefix { index: cert });
        }
    }
    Ok(Separation::AtLeast(cert))
}

/// s(x) = max over critical points and sides of s(x, c_i^±), given the
/// itinerary of x.
pub fn separation_against(seq: &SymbolSeq, kneading: &KneadingData) -> Result<Separation> {
    let mut at = 0usize;
    let mut open: Option<usize> = None;
    for k in kneading.all() {
        match separation_time(seq, k)? {
            Separation::At(v) => at = at.max(v),
            Separation::AtLeast(v) => open = Some(open.map_or(v, |o: usize| o.max(v))),
        }
    }
    Ok(match open {
        Some(v) => Separation::AtLeast(v.max(at)),
        None => Separation::At(at),
    })
}

pub fn separation_from_critical(map: &MapSpec, x: &CertifiedValue, horizon: usize) -> Result<Separation> {
    let kneading = kneading_sequences(map, horizon)?;
    separation_against(&itinerary(map, x, horizon), &kneading)
}

/// C_N = { x : s(x) ≥ N }.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TopologicalNeighborhood {
    pub level: usize,
}

impl TopologicalNeighborhood {
    /// `None` when the separation is only bounded below by less than the level.
    pub fn contains(&self, s: &Separation) -> Option<bool> {
        match s {
            Separation::At(k) => Some(*k >= self.level),
            Separation::AtLeast(k) if *k >= self.level => Some(true),
            Separation::AtLeast(_) => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub delta0: f64,
    /// δ₀ as an exact rational when the critical points are rational.
    pub delta0_exact: Option<String>,
    pub n0: usize,
    /// Largest precision used by the pullback endpoints.
    #[serde(skip)]
    pub bits: u32,
}

/// Half the smallest gap among {0, c_1, …, c_q, 1}.
pub fn delta0(map: &MapSpec) -> CertifiedValue {
    let prec = map.precision().max_bits + 64;
    let mut pts = vec![CertifiedValue::from_int(0, prec)];
    pts.extend(map.critical_points().iter().map(|c| c.location.clone()));
    pts.push(CertifiedValue::from_int(1, prec));
    let gaps: Vec<CertifiedValue> = pts.windows(2).map(|w| w[1].sub(&w[0], prec)).collect();
    let mut delta = gaps[0].clone();
    for g in &gaps[1..] {
        if g.cmp_certain(&delta) == Some(Ordering::Less) || (g.cmp_certain(&delta).is_none() && g.lo() < delta.lo()) {
            delta = g.clone();
        }
    }
    delta.mul_rational(&Rational::from((1, 2)), prec)
}

/// δ₀ is half the smallest gap among {0, c_1, …, c_q, 1}. N₀ is the least
/// N ≥ 1 such that every one-sided critical cylinder of depth N − 1 lies in
/// the closed δ₀-neighbourhood of its critical point and cylinders of
/// distinct critical points are disjoint.
pub fn calibrate(map: &MapSpec, horizon: usize) -> Result<Calibration> {
    let delta = delta0(map);
    let delta0 = delta.lo().to_f64();

    let data = cylinders::CriticalData::compute(map, horizon + 2)?;
    let chains: Vec<_> = (0..map.num_critical())
        .map(|i| cylinders::refine_with(map, &data, &Base::Critical(i), horizon, horizon))
        .collect::<Result<_>>()?;
    for n in 1..=horizon {
        let depth = n - 1;
        let mut ok = true;
        for ch in &chains {
            if ch.metric_depth < depth {
                return Err(Error::Calibration(format!(
                    "critical cylinders only resolved to depth {}",
                    ch.metric_depth
                )));
            }
            for side in [Side::Left, Side::Right] {
                let len = ch.side_length(side, depth).expect("metric depth checked");
                // closed containment: |side| ≤ δ₀
                let inside = match (len.exact_value(), delta.exact_value()) {
                    (Some(a), Some(b)) => a <= b,
                    _ => len.hi() <= delta.lo(),
                };
                ok &= inside;
            }
        }
        for w in chains.windows(2) {
            let (_, r) = w[0].interval_at(depth).expect("metric depth checked");
            let (l, _) = w[1].interval_at(depth).expect("metric depth checked");
            ok &= r.cmp_certain(&l) == Some(Ordering::Less);
        }
        if ok {
            return Ok(Calibration {
                delta0,
                delta0_exact: delta.exact_value().map(|r| r.to_string()),
                n0: n,
                bits: chains
                    .iter()
                    .flat_map(|c| [&c.left, &c.right])
                    .flat_map(|s| s.endpoints.iter().map(|e| e.bits))
                    .max()
                    .unwrap_or(0),
            });
        }
    }
    Err(Error::Calibration(format!("no N0 found up to depth {horizon}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(n: i64, d: i64) -> CertifiedValue {
        CertifiedValue::exact(Rational::from((n, d)), 128)
    }

    #[test]
    fn ulam_itinerary_of_three_tenths() {
        // 0.3 → 0.84 → 0.5376 → 0.99434496 → 0.0224922...
        let s = itinerary(&MapSpec::ulam(), &ex(3, 10), 5);
        assert_eq!(s.symbols, vec![0, 1, 1, 1, 0]);
        assert_eq!(s.certified, 5);
    }

    #[test]
    fn tent_itinerary_of_three_tenths() {
        // 0.3 → 0.6 → 0.8 → 0.4 → 0.8 → 0.4 → …
        let s = itinerary(&MapSpec::tent(), &ex(3, 10), 7);
        assert_eq!(s.symbols, vec![0, 1, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn critical_point_truncates_immediately() {
        let s = itinerary(&MapSpec::ulam(), &ex(1, 2), 10);
        assert_eq!(s.certified, 0);
        assert_eq!(s.truncation, Truncation::HitCritical { index: 0, critical: 0 });
    }

    #[test]
    fn fold3_kneading() {
        let k = kneading_sequences(&MapSpec::uniform_fold(3).unwrap(), 6).unwrap();
        assert_eq!(k.sequences[0].left.symbols, vec![0, 2, 2, 2, 2, 2]);
        assert_eq!(k.sequences[0].right.symbols, vec![1, 2, 2, 2, 2, 2]);
        assert_eq!(k.sequences[1].left.symbols, vec![1, 0, 0, 0, 0, 0]);
        assert_eq!(k.sequences[1].right.symbols, vec![2, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn separation_cases() {
        let mk = |v: &[u16], c| SymbolSeq {
            symbols: v.to_vec(),
            certified: c,
            truncation: Truncation::Horizon,
            bits: 128,
        };
        assert_eq!(
            separation_time(&mk(&[0, 1, 1], 3), &mk(&[0, 1, 0], 3)).unwrap(),
            Separation::At(2)
        );
        assert_eq!(
            separation_time(&mk(&[0, 1], 2), &mk(&[0, 1, 0], 3)).unwrap(),
            Separation::AtLeast(2)
        );
        assert!(matches!(
            separation_time(&mk(&[0, 1, 1], 2), &mk(&[0, 1, 0], 3)),
            Err(Error::UncertainPrefix { index: 2 })
        ));
    }

    #[test]
    fn ulam_separation_of_a_point() {
        // itinerary of 0.2 is 0,1,1,0,…; left kneading of 1/2 is 0,1,0,…
        let s = separation_from_critical(&MapSpec::ulam(), &ex(1, 5), 20).unwrap();
        assert_eq!(s, Separation::At(2));
    }

    #[test]
    fn calibration_tent_and_fold3() {
        let c = calibrate(&MapSpec::tent(), 20).unwrap();
        assert_eq!(c.delta0_exact.as_deref(), Some("1/4"));
        assert_eq!(c.n0, 2);
        let c3 = calibrate(&MapSpec::uniform_fold(3).unwrap(), 20).unwrap();
        assert_eq!(c3.delta0_exact.as_deref(), Some("1/6"));
        assert_eq!(c3.n0, 2);
    }

    #[test]
    fn calibration_ulam_respects_the_neighbourhood_invariant() {
        let c = calibrate(&MapSpec::ulam(), 20).unwrap();
        assert_eq!(c.delta0_exact.as_deref(), Some("1/4"));
        // depth-1 sides have length √2/4 > 1/4; depth-2 sides fit
        assert_eq!(c.n0, 3);
    }
}
