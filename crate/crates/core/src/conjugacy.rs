//! Conjugate map pairs h∘f = g∘h and the comparison of their combinatorial
//! and metric data.

use rayon::prelude::*;
use rug::Rational;
use serde::Serialize;

use crate::arith::CertifiedValue;
use crate::conditions::{ce_series_from, tsr_sum_from, CEReport, TSRReport, KNEADING_SLACK};
use crate::cylinders::{refine_with, shadowing_times, Base, CriticalData, CylinderChain, ShadowingTimes};
use crate::error::{Error, Result};
use crate::homeo::HomeoSpec;
use crate::map_model::MapSpec;
use crate::symbolic::SymbolSeq;

#[derive(Clone, Debug)]
pub struct ConjugacyPair {
    pub f: MapSpec,
    pub g: MapSpec,
    pub h: HomeoSpec,
}

impl ConjugacyPair {
    pub fn new(f: MapSpec, g: MapSpec, h: HomeoSpec) -> Result<Self> {
        h.validate()?;
        Ok(ConjugacyPair { f, g, h })
    }

    /// The pair (f, h∘f∘h⁻¹, h).
    pub fn pushforward(f: MapSpec, h: HomeoSpec) -> Result<Self> {
        let g = push_forward(&f, &h)?;
        Ok(ConjugacyPair { f, g, h })
    }
}

/// g = h∘f∘h⁻¹, with critical points h(c_i).
pub fn push_forward(f: &MapSpec, h: &HomeoSpec) -> Result<MapSpec> {
    h.validate()?;
    let name = format!("{}^{}", f.name(), h.form());
    MapSpec::pushforward(&name, f.clone(), h.clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub grid: usize,
    /// Largest distance between the enclosures of h(f(x)) and g(h(x)).
    pub max_gap: f64,
    pub max_midpoint_difference: f64,
    pub max_width: f64,
    pub failures: usize,
    pub first_failure: Option<f64>,
    pub pass: bool,
}

/// Evaluates h(f(x)) and g(h(x)) on x = k/grid, k = 0..=grid; passes iff
/// the enclosures overlap at every grid point.
pub fn verify_conjugacy(pair: &ConjugacyPair, grid: usize) -> Result<ResidualReport> {
    if grid < 100 {
        return Err(Error::Config("conjugacy grid must have at least 100 points".into()));
    }
    let prec = 128;
    let rows: Vec<(f64, f64, f64, f64)> = (0..=grid)
        .into_par_iter()
        .map(|k| {
            let x = CertifiedValue::exact(Rational::from((k as u64, grid as u64)), prec);
            let a = pair.h.apply(&pair.f.evaluate(&x, prec), prec);
            let b = pair.g.evaluate(&pair.h.apply(&x, prec), prec);
            let gap = if a.overlaps(&b) {
                0.0
            } else if a.hi() < b.lo() {
                (b.lo().clone() - a.hi()).to_f64()
            } else {
                (a.lo().clone() - b.hi()).to_f64()
            };
            let mid = (a.mid_f64() - b.mid_f64()).abs();
            let width = a.width_f64().max(b.width_f64());
            (k as f64 / grid as f64, gap, mid, width)
        })
        .collect();
    let failing: Vec<f64> = rows.iter().filter(|r| r.1 > 0.0).map(|r| r.0).collect();
    Ok(ResidualReport {
        grid,
        max_gap: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        max_midpoint_difference: rows.iter().map(|r| r.2).fold(0.0, f64::max),
        max_width: rows.iter().map(|r| r.3).fold(0.0, f64::max),
        failures: failing.len(),
        first_failure: failing.first().copied(),
        pass: failing.is_empty(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KneadingMatch {
    pub critical: usize,
    pub matches: bool,
    /// Length of the common certified prefix that was compared.
    pub compared: usize,
    pub first_difference: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowingMatch {
    pub critical: usize,
    pub matches: bool,
    pub depth: usize,
    pub cuts: [usize; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct CEExponents {
    pub critical: usize,
    /// Tail means of λ_n for f and g.
    pub f: Option<f64>,
    pub g: Option<f64>,
    pub f_truncation: Option<String>,
    pub g_truncation: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub f: String,
    pub g: String,
    pub homeo: &'static str,
    pub critical_points: [usize; 2],
    pub kneading_match: Vec<KneadingMatch>,
    pub shadowing_match: Vec<ShadowingMatch>,
    pub tsr_delta: Option<f64>,
    pub ce_exponents: Vec<CEExponents>,
    /// Same number of critical points, kneading and shadowing data agree
    /// and the TSR matrices coincide.
    pub invariant: bool,
    #[serde(skip)]
    pub tsr: (TSRReport, TSRReport),
    #[serde(skip)]
    pub ce: (CEReport, CEReport),
}

#[derive(Clone, Debug)]
pub struct ComparisonConfig {
    /// Length of the compared kneading sequences.
    pub kneading_length: usize,
    /// Depth of the cylinder chains and horizon of the TSR and CE series.
    pub horizon: usize,
    pub m_grid: Vec<usize>,
    pub ce_bits: u32,
}

struct Side {
    data: CriticalData,
    times: Vec<ShadowingTimes>,
    chains: Vec<CylinderChain>,
    tsr: TSRReport,
    ce: CEReport,
}

fn analyze(map: &MapSpec, cfg: &ComparisonConfig) -> Result<Side> {
    let len = cfg.kneading_length.max(cfg.horizon + KNEADING_SLACK);
    let data = CriticalData::compute(map, len)?;
    let chains: Vec<CylinderChain> = (0..map.num_critical())
        .map(|i| refine_with(map, &data, &Base::Point(map.critical_value(i)), cfg.horizon, 0))
        .collect::<Result<_>>()?;
    let times = chains.iter().map(shadowing_times).collect();
    let tsr = tsr_sum_from(&data.kneading, &cfg.m_grid, cfg.horizon);
    let ce = ce_series_from(map, &data.kneading, cfg.horizon, cfg.ce_bits);
    Ok(Side {
        data,
        times,
        chains,
        tsr,
        ce,
    })
}

fn compare_seq(a: &SymbolSeq, b: &SymbolSeq, limit: usize) -> (bool, usize, Option<usize>) {
    let n = a.certified.min(b.certified).min(limit);
    match (0..n).find(|&i| a.symbols[i] != b.symbols[i]) {
        Some(i) => (false, n, Some(i)),
        None => (true, n, None),
    }
}

/// Symbol-for-symbol comparison of kneading data, shadowing times and TSR
/// matrices, with the CE exponents of both maps side by side.
pub fn compare_combinatorics(pair: &ConjugacyPair, cfg: &ComparisonConfig) -> Result<InvarianceReport> {
    let (a, b) = rayon::join(|| analyze(&pair.f, cfg), || analyze(&pair.g, cfg));
    let (a, b) = (a?, b?);
    let q = pair.f.num_critical().min(pair.g.num_critical());
    let same_count = pair.f.num_critical() == pair.g.num_critical();
    let kneading_match: Vec<KneadingMatch> = (0..q)
        .map(|i| {
            let (ka, kb) = (&a.data.kneading.sequences[i], &b.data.kneading.sequences[i]);
            let l = compare_seq(&ka.left, &kb.left, cfg.kneading_length);
            let r = compare_seq(&ka.right, &kb.right, cfg.kneading_length);
            KneadingMatch {
                critical: i,
                matches: l.0 && r.0,
                compared: l.1.min(r.1),
                first_difference: l.2.into_iter().chain(r.2).min(),
            }
        })
        .collect();
    let shadowing_match: Vec<ShadowingMatch> = (0..q)
        .map(|i| {
            let (ta, tb) = (&a.times[i], &b.times[i]);
            let same_events = a.chains[i]
                .cut_events()
                .iter()
                .map(|e| (e.depth, e.side))
                .eq(b.chains[i].cut_events().iter().map(|e| (e.depth, e.side)));
            ShadowingMatch {
                critical: i,
                matches: ta.minus == tb.minus && ta.plus == tb.plus && same_events,
                depth: ta.depth.min(tb.depth),
                cuts: [ta.minus.len(), ta.plus.len()],
            }
        })
        .collect();
    let tsr_delta = a.tsr.max_delta(&b.tsr);
    let ce_exponents =
        a.ce.series
            .iter()
            .zip(&b.ce.series)
            .map(|(x, y)| CEExponents {
                critical: x.critical,
                f: x.tail.as_ref().map(|t| t.mean),
                g: y.tail.as_ref().map(|t| t.mean),
                f_truncation: x.truncation.clone(),
                g_truncation: y.truncation.clone(),
            })
            .collect();
    let invariant = same_count
        && kneading_match.iter().all(|k| k.matches)
        && shadowing_match.iter().all(|s| s.matches)
        && tsr_delta == Some(0.0);
    Ok(InvarianceReport {
        f: pair.f.name().to_string(),
        g: pair.g.name().to_string(),
        homeo: pair.h.form(),
        critical_points: [pair.f.num_critical(), pair.g.num_critical()],
        kneading_match,
        shadowing_match,
        tsr_delta,
        ce_exponents,
        invariant,
        tsr: (a.tsr, b.tsr),
        ce: (a.ce, b.ce),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ComparisonConfig {
        ComparisonConfig {
            kneading_length: 400,
            horizon: 100,
            m_grid: vec![1, 2, 3],
            ce_bits: 128,
        }
    }

    #[test]
    fn tent_pushes_forward_to_ulam() {
        let pair = ConjugacyPair::new(MapSpec::tent(), MapSpec::ulam(), HomeoSpec::SinSquared).unwrap();
        let r = verify_conjugacy(&pair, 1000).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.max_midpoint_difference < 1e-30);

        let pf = ConjugacyPair::pushforward(MapSpec::tent(), HomeoSpec::SinSquared).unwrap();
        for k in 1..50 {
            let y = CertifiedValue::exact(Rational::from((k, 50)), 128);
            let a = pf.g.evaluate(&y, 128);
            let b = MapSpec::ulam().evaluate(&y, 128);
            assert!(a.overlaps(&b), "{k}");
        }
    }

    #[test]
    fn identity_pushforward_is_the_same_map() {
        let f = MapSpec::logistic(Rational::from((39, 10))).unwrap();
        let pair = ConjugacyPair::pushforward(f.clone(), HomeoSpec::Identity).unwrap();
        assert!(verify_conjugacy(&pair, 200).unwrap().pass);
        let rep =
            compare_combinatorics(&ConjugacyPair::new(f.clone(), f, HomeoSpec::Identity).unwrap(), &cfg()).unwrap();
        assert!(rep.invariant);
        assert_eq!(rep.ce_exponents[0].f, rep.ce_exponents[0].g);
    }

    #[test]
    fn mismatched_pair_fails() {
        let pair = ConjugacyPair {
            f: MapSpec::tent(),
            g: MapSpec::uniform_fold(3).unwrap(),
            h: HomeoSpec::SinSquared,
        };
        let r = verify_conjugacy(&pair, 100).unwrap();
        assert!(!r.pass);
        assert!(r.failures > 90);
        let rep = compare_combinatorics(&pair, &cfg()).unwrap();
        assert!(!rep.invariant);
    }

    #[test]
    fn tent_and_ulam_share_combinatorics_not_exponents() {
        let pair = ConjugacyPair::new(MapSpec::tent(), MapSpec::ulam(), HomeoSpec::SinSquared).unwrap();
        let rep = compare_combinatorics(&pair, &cfg()).unwrap();
        assert!(rep.invariant, "{rep:?}");
        assert_eq!(rep.tsr_delta, Some(0.0));
        let e = &rep.ce_exponents[0];
        assert!((e.f.unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((e.g.unwrap() - 4f64.ln()).abs() < 1e-12);
    }
}
