//! Finite-horizon diagnostics for CE, SR and TSR along the critical orbits,
//! the gap and contraction statistics behind the equivalence proof, and
//! envelope fits of the lemma constants.
//!
//! Every limit is reported as a finite series. liminf and limsup are
//! approximated by the min and max over the last 20% of a series.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::arith::CertifiedValue;
use crate::cylinders::{
    refine_with, shadowing_times, Base, CheckReport, CriticalData, CylinderChain, ShadowingTimes, Side,
};
use crate::error::{Error, Result};
use crate::map_model::MapSpec;
use crate::symbolic::{delta0, separation_against, KneadingData, Separation, SymbolSeq, Truncation};

pub const TAIL_FRACTION: f64 = 0.2;
pub const PROXY_CONVENTION: &str = "liminf ~ min and limsup ~ max over the last 20% of each series";
/// Extra kneading symbols beyond the horizon so that s(c^j) is decided
/// for j close to the horizon.
pub const KNEADING_SLACK: usize = 256;
/// TSR reports with more undetermined terms than this fraction fail validation.
pub const MAX_UNDETERMINED_FRACTION: f64 = 0.01;
const MIN_SAMPLES: usize = 10;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TailStats {
    /// First index (0-based) of the tail.
    pub start: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn tail_start(len: usize) -> usize {
    let k = ((len as f64) * TAIL_FRACTION).ceil() as usize;
    len - k.clamp(1.min(len), len)
}

pub fn tail_stats(series: &[f64]) -> Option<TailStats> {
    if series.is_empty() {
        return None;
    }
    let start = tail_start(series.len());
    let t = &series[start..];
    let min = t.iter().copied().fold(f64::INFINITY, f64::min);
    let max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    Some(TailStats { start, min, max, mean })
}

/// Envelope fit of a quantity Q_n against e^{rate·n}.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct EnvelopeFit {
    pub rate: f64,
    pub log_constant: f64,
    pub samples: usize,
}

impl EnvelopeFit {
    pub fn constant(&self) -> f64 {
        self.log_constant.exp()
    }
}

/// Q_n ≥ C e^{λn}: λ is the tail minimum of log(Q_n)/n and C the largest
/// constant making the bound hold at every sample. Samples are (n, log Q_n)
/// sorted by n, n ≥ 1.
pub fn lower_envelope(samples: &[(usize, f64)]) -> Option<EnvelopeFit> {
    if samples.is_empty() {
        return None;
    }
    let rates: Vec<f64> = samples.iter().map(|&(n, l)| l / n as f64).collect();
    let rate = tail_stats(&rates)?.min;
    let log_constant = samples
        .iter()
        .map(|&(n, l)| l - rate * n as f64)
        .fold(f64::INFINITY, f64::min);
    Some(EnvelopeFit {
        rate,
        log_constant,
        samples: samples.len(),
    })
}

/// Q_s ≤ C e^{−ξ s}: ξ is the tail minimum of −log(Q_s)/s and C the
/// smallest constant making the bound hold at every sample.
pub fn upper_decay_envelope(samples: &[(usize, f64)]) -> Option<EnvelopeFit> {
    if samples.is_empty() {
        return None;
    }
    let rates: Vec<f64> = samples.iter().map(|&(s, l)| -l / s as f64).collect();
    let rate = tail_stats(&rates)?.min;
    let log_constant = samples
        .iter()
        .map(|&(s, l)| l + rate * s as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(EnvelopeFit {
        rate,
        log_constant,
        samples: samples.len(),
    })
}

/// Q_n ≥ C e^{−ξ n}: ξ is the tail maximum of −log(Q_n)/n.
pub fn lower_decay_envelope(samples: &[(usize, f64)]) -> Option<EnvelopeFit> {
    if samples.is_empty() {
        return None;
    }
    let rates: Vec<f64> = samples.iter().map(|&(n, l)| -l / n as f64).collect();
    let rate = tail_stats(&rates)?.max;
    let log_constant = samples
        .iter()
        .map(|&(n, l)| l + rate * n as f64)
        .fold(f64::INFINITY, f64::min);
    Some(EnvelopeFit {
        rate,
        log_constant,
        samples: samples.len(),
    })
}

fn log_f64(v: &CertifiedValue) -> Option<f64> {
    v.ln(128).ok().map(|l| l.mid_f64())
}

/// d(x) = min_k |x − c_k|.
pub fn critical_distance(map: &MapSpec, x: &CertifiedValue, prec: u32) -> CertifiedValue {
    let mut best: Option<CertifiedValue> = None;
    for c in map.critical_points() {
        let d = x.sub(&c.location, prec).abs();
        best = Some(match best {
            None => d,
            Some(b) => match b.cmp_certain(&d) {
                Some(Ordering::Less | Ordering::Equal) => b,
                Some(Ordering::Greater) => d,
                None => {
                    let lo = if b.lo() < d.lo() {
                        b.lo().clone()
                    } else {
                        d.lo().clone()
                    };
                    let hi = if b.hi() < d.hi() {
                        b.hi().clone()
                    } else {
                        d.hi().clone()
                    };
                    CertifiedValue::interval(lo, hi)
                }
            },
        });
    }
    best.expect("at least one critical point")
}

// ---------------------------------------------------------------- CE

#[derive(Clone, Debug, Serialize)]
pub struct CESeries {
    pub critical: usize,
    /// λ_n for n = 1..=reached.
    pub lambda: Vec<f64>,
    pub reached: usize,
    pub truncation: Option<String>,
    pub tail: Option<TailStats>,
    /// |Df^n(c¹)| ≥ C e^{λn}.
    pub fit: Option<EnvelopeFit>,
    /// Enclosures of log|Df^n(c¹)|, n = 1..=reached.
    #[serde(skip)]
    pub log_derivative: Vec<CertifiedValue>,
}

impl CESeries {
    pub fn lambda_enclosure(&self, n: usize, prec: u32) -> Option<CertifiedValue> {
        let l = self.log_derivative.get(n.checked_sub(1)?)?;
        l.div(&CertifiedValue::from_int(n as i64, prec), prec).ok()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CEReport {
    pub convention: &'static str,
    pub horizon: usize,
    pub bits: u32,
    pub series: Vec<CESeries>,
}

pub fn ce_series(map: &MapSpec, horizon: usize, bits: u32) -> Result<CEReport> {
    let kneading = crate::symbolic::kneading_sequences(map, horizon + 2)?;
    Ok(ce_series_from(map, &kneading, horizon, bits))
}

/// λ_n = (1/n)·log|Df^n(c¹)| from derivative enclosures at the certified
/// orbit points c¹, …, cⁿ.
pub fn ce_series_from(map: &MapSpec, kneading: &KneadingData, horizon: usize, bits: u32) -> CEReport {
    let series = (0..map.num_critical())
        .into_par_iter()
        .map(|i| {
            let pts = &kneading.orbits[i].points;
            let mut acc = CertifiedValue::from_int(0, bits);
            let mut log_derivative = Vec::new();
            let mut lambda = Vec::new();
            let mut truncation = None;
            for n in 1..=horizon {
                let Some(x) = pts.get(n - 1) else {
                    truncation = Some(format!("orbit certified only to n = {}", n - 1));
                    break;
                };
                let d = match map.derivative(x, bits) {
                    Ok(d) => d.abs(),
                    Err(e) => {
                        truncation = Some(format!("derivative at c^{n}: {e}"));
                        break;
                    }
                };
                let l = match d.ln(bits) {
                    Ok(l) => l,
                    Err(_) => {
                        truncation = Some(format!("derivative at c^{n} not bounded away from 0"));
                        break;
                    }
                };
                acc = acc.add(&l, bits);
                let lam = acc.div(&CertifiedValue::from_int(n as i64, bits), bits).expect("n > 0");
                lambda.push(lam.mid_f64());
                log_derivative.push(acc.clone());
            }
            let samples: Vec<(usize, f64)> = log_derivative
                .iter()
                .enumerate()
                .map(|(k, l)| (k + 1, l.mid_f64()))
                .collect();
            CESeries {
                critical: i,
                reached: lambda.len(),
                tail: tail_stats(&lambda),
                fit: lower_envelope(&samples),
                lambda,
                truncation,
                log_derivative,
            }
        })
        .collect();
    CEReport {
        convention: PROXY_CONVENTION,
        horizon,
        bits,
        series,
    }
}

// ---------------------------------------------------------------- SR

#[derive(Clone, Debug, Serialize)]
pub struct SRSeries {
    pub delta: f64,
    /// (1/n)·Σ_{i≤n, d(c^i) ≤ δ} log d(c^i)⁻¹ for n = 1..=horizon.
    pub values: Vec<f64>,
    pub visits: usize,
    /// Orbit points whose distance enclosure straddles δ; left out of the sum.
    pub ambiguous: usize,
    pub tail: Option<TailStats>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SRCritical {
    pub critical: usize,
    pub reached: usize,
    pub series: Vec<SRSeries>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SRReport {
    pub convention: &'static str,
    pub horizon: usize,
    pub deltas: Vec<f64>,
    pub critical: Vec<SRCritical>,
}

pub fn sr_sum(map: &MapSpec, deltas: &[f64], horizon: usize) -> Result<SRReport> {
    let kneading = crate::symbolic::kneading_sequences(map, horizon + 2)?;
    Ok(sr_sum_from(map, &kneading, deltas, horizon))
}

pub fn sr_sum_from(map: &MapSpec, kneading: &KneadingData, deltas: &[f64], horizon: usize) -> SRReport {
    let prec = 128;
    let critical = (0..map.num_critical())
        .into_par_iter()
        .map(|i| {
            let pts = &kneading.orbits[i].points;
            let reached = horizon.min(pts.len());
            let dists: Vec<(CertifiedValue, Option<f64>)> = pts[..reached]
                .iter()
                .map(|x| {
                    let d = critical_distance(map, x, prec.max(x.prec()));
                    let l = if d.certainly_positive() {
                        log_f64(&d).map(|v| -v)
                    } else {
                        None
                    };
                    (d, l)
                })
                .collect();
            let series = deltas
                .iter()
                .map(|&delta| {
                    let dv = CertifiedValue::from_f64(delta, prec);
                    let (mut sum, mut visits, mut ambiguous) = (0.0f64, 0, 0);
                    let mut values = Vec::with_capacity(reached);
                    for (n, (d, l)) in dists.iter().enumerate() {
                        let inside = match (d.exact_value(), dv.exact_value()) {
                            (Some(a), Some(b)) => Some(a <= b),
                            _ if d.hi() <= dv.lo() => Some(true),
                            _ if d.lo() > dv.hi() => Some(false),
                            _ => None,
                        };
                        match (inside, l) {
                            (Some(true), Some(l)) => {
                                sum += l;
                                visits += 1;
                            }
                            (Some(false), _) => {}
                            _ => ambiguous += 1,
                        }
                        values.push(sum / (n + 1) as f64);
                    }
                    SRSeries {
                        delta,
                        tail: tail_stats(&values),
                        values,
                        visits,
                        ambiguous,
                    }
                })
                .collect();
            SRCritical {
                critical: i,
                reached,
                series,
            }
        })
        .collect();
    SRReport {
        convention: PROXY_CONVENTION,
        horizon,
        deltas: deltas.to_vec(),
        critical,
    }
}

// ---------------------------------------------------------------- TSR

/// s(c^j) for j = 1..=horizon; `None` when undetermined.
pub fn critical_separations(kneading: &KneadingData, critical: usize, horizon: usize) -> Vec<Option<usize>> {
    let seq = &kneading.sequences[critical].left;
    (1..=horizon)
        .map(|j| {
            if j >= seq.len() {
                return None;
            }
            match separation_against(&seq.tail(j), kneading) {
                Ok(Separation::At(v)) => Some(v),
                _ => None,
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TSRSeries {
    pub m: usize,
    /// Σ_{j≤n, s(c^j) ≥ m} s(c^j) for n = 1..=horizon.
    pub sums: Vec<u64>,
    pub values: Vec<f64>,
    pub tail: Option<TailStats>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TSRCritical {
    pub critical: usize,
    pub series: Vec<TSRSeries>,
    pub undetermined: usize,
    pub terms: usize,
    pub valid: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TSRReport {
    pub convention: &'static str,
    pub horizon: usize,
    pub m_grid: Vec<usize>,
    pub critical: Vec<TSRCritical>,
}

impl TSRReport {
    pub fn valid(&self) -> bool {
        self.critical.iter().all(|c| c.valid)
    }

    /// Largest absolute difference between matching cells, or `None` when
    /// the grids differ in shape.
    pub fn max_delta(&self, other: &TSRReport) -> Option<f64> {
        if self.m_grid != other.m_grid || self.critical.len() != other.critical.len() {
            return None;
        }
        let mut worst = 0.0f64;
        for (a, b) in self.critical.iter().zip(&other.critical) {
            for (sa, sb) in a.series.iter().zip(&b.series) {
                if sa.values.len() != sb.values.len() {
                    return None;
                }
                for (x, y) in sa.values.iter().zip(&sb.values) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        Some(worst)
    }
}

pub fn tsr_sum(map: &MapSpec, m_grid: &[usize], horizon: usize) -> Result<TSRReport> {
    let kneading = crate::symbolic::kneading_sequences(map, horizon + KNEADING_SLACK)?;
    Ok(tsr_sum_from(&kneading, m_grid, horizon))
}

/// Purely symbolic: depends on the kneading sequences only.
pub fn tsr_sum_from(kneading: &KneadingData, m_grid: &[usize], horizon: usize) -> TSRReport {
    let critical = (0..kneading.sequences.len())
        .into_par_iter()
        .map(|i| {
            let s = critical_separations(kneading, i, horizon);
            let undetermined = s.iter().filter(|v| v.is_none()).count();
            let series = m_grid
                .iter()
                .map(|&m| {
                    let mut acc = 0u64;
                    let mut sums = Vec::with_capacity(horizon);
                    let mut values = Vec::with_capacity(horizon);
                    for (k, v) in s.iter().enumerate() {
                        if let Some(v) = v {
                            if *v >= m {
                                acc += *v as u64;
                            }
                        }
                        sums.push(acc);
                        values.push(acc as f64 / (k + 1) as f64);
                    }
                    TSRSeries {
                        m,
                        tail: tail_stats(&values),
                        sums,
                        values,
                    }
                })
                .collect();
            TSRCritical {
                critical: i,
                series,
                undetermined,
                terms: horizon,
                valid: (undetermined as f64) <= MAX_UNDETERMINED_FRACTION * horizon as f64,
            }
        })
        .collect();
    TSRReport {
        convention: PROXY_CONVENTION,
        horizon,
        m_grid: m_grid.to_vec(),
        critical,
    }
}

// ---------------------------------------------------------------- chains at critical values

/// Kneading data plus the cylinder chain and shadowing times of every
/// critical value, shared by the gap, contraction and growth analyses.
pub struct CriticalValueData {
    pub data: CriticalData,
    pub chains: Vec<CylinderChain>,
    pub times: Vec<ShadowingTimes>,
    pub horizon: usize,
}

impl CriticalValueData {
    pub fn compute(map: &MapSpec, horizon: usize, metric_depth: usize) -> Result<Self> {
        let data = CriticalData::compute(map, horizon + KNEADING_SLACK)?;
        Self::with_data(map, data, horizon, metric_depth)
    }

    pub fn with_data(map: &MapSpec, data: CriticalData, horizon: usize, metric_depth: usize) -> Result<Self> {
        let chains: Vec<CylinderChain> = (0..map.num_critical())
            .into_par_iter()
            .map(|i| {
                let base = Base::Point(map.critical_value(i));
                let ch = refine_with(map, &data, &base, horizon, metric_depth.min(horizon))?;
                ch.require_full()?;
                Ok(ch)
            })
            .collect::<Result<_>>()?;
        let times = chains.iter().map(shadowing_times).collect();
        Ok(CriticalValueData {
            data,
            chains,
            times,
            horizon,
        })
    }
}

// ---------------------------------------------------------------- gaps

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
pub struct GapWindow {
    pub t1: usize,
    pub t2: usize,
    /// The left short gap [n_{i−1}⁻, n_i⁻] and right short gap inside the window.
    pub left: (usize, usize),
    pub right: (usize, usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub critical: usize,
    pub threshold: usize,
    pub n: usize,
    /// Smallest ε with Σ_{gap ≥ T} gap ≤ εn on both sides.
    pub epsilon: f64,
    pub eta: f64,
    pub long_gap_mass: [usize; 2],
    pub gaps: [usize; 2],
    pub windows: Vec<GapWindow>,
    pub count: usize,
    pub bound: f64,
    pub passes: bool,
    pub flags: Vec<String>,
}

fn side_gaps(times: &[usize]) -> Vec<(usize, usize)> {
    let mut t = vec![0usize];
    t.extend_from_slice(times);
    t.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Greedy construction of disjoint windows [t₁, t₂], t₂ − t₁ < T, each
/// containing a left and a right short gap; windows are chosen by earliest
/// right end, which maximises their number.
pub fn gap_analysis(times: &ShadowingTimes, critical: usize, threshold: usize) -> Result<GapReport> {
    let n = times.depth;
    let left = side_gaps(&times.minus);
    let right = side_gaps(&times.plus);
    let gaps = [left.len(), right.len()];
    if gaps[0].min(gaps[1]) < MIN_SAMPLES {
        return Err(Error::InsufficientHorizon {
            gaps: gaps[0].min(gaps[1]),
        });
    }
    let mass = |g: &[(usize, usize)], last: usize| -> usize {
        let mut m: usize = g.iter().map(|(a, b)| b - a).filter(|&d| d >= threshold).sum();
        // the gap still open at the horizon is at least this long
        if n - last >= threshold {
            m += n - last;
        }
        m
    };
    let long_gap_mass = [
        mass(&left, left.last().map_or(0, |g| g.1)),
        mass(&right, right.last().map_or(0, |g| g.1)),
    ];
    let epsilon = long_gap_mass[0].max(long_gap_mass[1]) as f64 / n as f64;
    let eta = (1.0 - 2.0 * epsilon) / (2.0 * threshold as f64);

    let short = |g: &[(usize, usize)]| -> Vec<(usize, usize)> {
        g.iter()
            .copied()
            .filter(|(a, b)| b - a < threshold && *b <= n)
            .collect()
    };
    let (ls, rs) = (short(&left), short(&right));
    let mut candidates: Vec<GapWindow> = Vec::new();
    for &l in &ls {
        let lo = rs.partition_point(|r| r.1 + threshold <= l.1);
        for &r in &rs[lo..] {
            if r.0 >= l.0 + threshold {
                break;
            }
            let (t1, t2) = (l.0.min(r.0), l.1.max(r.1));
            if t2 - t1 < threshold {
                candidates.push(GapWindow {
                    t1,
                    t2,
                    left: l,
                    right: r,
                });
            }
        }
    }
    candidates.sort_by_key(|w| (w.t2, std::cmp::Reverse(w.t1)));
    let mut windows: Vec<GapWindow> = Vec::new();
    for w in candidates {
        if windows.last().is_none_or(|p| w.t1 > p.t2) {
            windows.push(w);
        }
    }
    let count = windows.len();
    let bound = eta * n as f64;
    let mut flags = Vec::new();
    if epsilon >= 0.5 {
        flags.push("epsilon >= 1/2: density bound is vacuous".to_string());
    }
    if times.mirrored_from.is_some() {
        flags.push("one side is empty; its shadowing times mirror the other side".to_string());
    }
    Ok(GapReport {
        critical,
        threshold,
        n,
        epsilon,
        eta,
        long_gap_mass,
        gaps,
        windows,
        count,
        bound,
        passes: count as f64 >= bound,
        flags,
    })
}

/// Checks Σ_{gap > T} gap = Σ_{1 ≤ n_i, s(x^{n_i}) > T} s(x^{n_i}) on each
/// present side, over gaps that close before the horizon.
#[derive(Clone, Debug, Serialize)]
pub struct SmallGapIdentity {
    pub side: Side,
    pub gap_mass: usize,
    pub separation_mass: usize,
    pub undetermined: usize,
    pub holds: bool,
}

pub fn small_gap_identity(chain: &CylinderChain, kneading: &KneadingData, threshold: usize) -> Vec<SmallGapIdentity> {
    let mut out = Vec::new();
    for side in chain.present_sides() {
        let sc = chain.side(side);
        let last = chain.depth.min(sc.symbols.len().saturating_sub(1));
        let (mut gap_mass, mut separation_mass, mut undetermined) = (0, 0, 0);
        for w in sc.cuts.windows(2) {
            let (ni, nn) = (w[0], w[1]);
            if nn - ni > threshold {
                gap_mass += nn - ni;
            }
            let tail = SymbolSeq {
                symbols: sc.symbols[ni..=last].to_vec(),
                certified: last - ni + 1,
                truncation: Truncation::Horizon,
                bits: 0,
            };
            match separation_against(&tail, kneading) {
                Ok(Separation::At(v)) if v > threshold => separation_mass += v,
                Ok(Separation::At(_)) => {}
                _ => undetermined += 1,
            }
        }
        out.push(SmallGapIdentity {
            side,
            gap_mass,
            separation_mass,
            undetermined,
            holds: undetermined == 0 && gap_mass == separation_mass,
        });
    }
    out
}

// ---------------------------------------------------------------- contraction

#[derive(Clone, Debug, Serialize)]
pub struct ShrinkRatio {
    pub side: Side,
    pub from: usize,
    pub to: usize,
    pub ratio: f64,
    pub below_one: bool,
    pub exact: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShrinkReport {
    pub critical: usize,
    pub threshold: usize,
    pub ratios: Vec<ShrinkRatio>,
    /// Largest observed ratio.
    pub gamma: Option<f64>,
    pub all_below_one: bool,
    /// Ratios that could not be formed because a length was unavailable.
    pub skipped: usize,
}

/// |Î_σ^(n_i)| / |Î_σ^(n_{i−1})| for the short gaps of every simultaneous
/// window.
pub fn shrink_ratios(chain: &CylinderChain, gaps: &GapReport) -> ShrinkReport {
    let mut ratios = Vec::new();
    let mut skipped = 0;
    for w in &gaps.windows {
        for side in chain.present_sides() {
            let (from, to) = if side == Side::Left { w.left } else { w.right };
            if to - from >= gaps.threshold {
                continue;
            }
            let (Some(a), Some(b)) = (chain.side_length(side, from), chain.side_length(side, to)) else {
                skipped += 1;
                continue;
            };
            let prec = a.prec().max(b.prec()).max(64);
            let Ok(r) = b.div(&a, prec) else {
                skipped += 1;
                continue;
            };
            let one = CertifiedValue::from_int(1, prec);
            ratios.push(ShrinkRatio {
                side,
                from,
                to,
                ratio: r.mid_f64(),
                below_one: r.cmp_certain(&one) == Some(Ordering::Less),
                exact: r.exact_value().map(|q| q.to_string()),
            });
        }
    }
    let gamma = ratios
        .iter()
        .map(|r| r.ratio)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    ShrinkReport {
        critical: gaps.critical,
        threshold: gaps.threshold,
        all_below_one: !ratios.is_empty() && ratios.iter().all(|r| r.below_one),
        ratios,
        gamma,
        skipped,
    }
}

/// Exponential decay of |Î^(n)| at a critical value against the rate
/// η·log(1/γ) implied by the contraction windows.
#[derive(Clone, Debug, Serialize)]
pub struct ShrinkConsequence {
    pub critical: usize,
    pub decay_rate: f64,
    pub implied_rate: f64,
    pub holds: bool,
}

pub fn shrink_consequence(chain: &CylinderChain, gaps: &GapReport, shrink: &ShrinkReport) -> Option<ShrinkConsequence> {
    let gamma = shrink.gamma?;
    let mut rates = Vec::new();
    for n in 1..=chain.metric_depth {
        let mut worst = f64::INFINITY;
        for side in chain.present_sides() {
            let l = chain.side_length(side, n).and_then(|l| log_f64(&l))?;
            worst = worst.min(-l / n as f64);
        }
        rates.push(worst);
    }
    let decay_rate = tail_stats(&rates)?.min;
    let implied_rate = gaps.eta.max(0.0) * (1.0 / gamma).ln();
    Some(ShrinkConsequence {
        critical: gaps.critical,
        decay_rate,
        implied_rate,
        holds: decay_rate >= implied_rate,
    })
}

// ---------------------------------------------------------------- growth

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GrowthStatus {
    Holds,
    Violated,
    Undecided,
    /// f^n not certified monotone on Î⁽ⁿ⁾, or the Schwarzian gate is off.
    NotAsserted,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthPoint {
    pub n: usize,
    pub log_r: f64,
    pub log_derivative: Option<f64>,
    pub status: GrowthStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub critical: usize,
    pub negative_schwarzian: bool,
    pub points: Vec<GrowthPoint>,
    pub checked: usize,
    pub violations: usize,
    pub undecided: usize,
    pub skipped: usize,
    /// r_n ≥ K e^{λn}.
    pub fit: Option<EnvelopeFit>,
}

/// For each n ≤ metric depth: true when every present side's cut pair
/// containing n was checked by `verify_monotone` without failure.
pub fn monotone_certified(chain: &CylinderChain, report: &CheckReport) -> Vec<bool> {
    let depth = chain.metric_depth;
    let mut out = vec![true; depth + 1];
    if report.failures.len() < report.checked - report.passed {
        return vec![false; depth + 1];
    }
    for side in chain.present_sides() {
        let sc = chain.side(side);
        let mut times = vec![0usize];
        times.extend(sc.cuts.iter().copied());
        let mut covered = vec![false; depth + 1];
        for w in times.windows(2) {
            let (ni, nn) = (w[0], w[1]);
            let checked = ni <= chain.metric_depth && nn <= chain.depth && sc.endpoint_at(ni).value.is_some();
            let failed = report.failures.iter().any(|f| f.side == side && f.depth == ni);
            if checked && !failed {
                for c in covered.iter_mut().take((nn + 1).min(depth + 1)).skip(ni) {
                    *c = true;
                }
            }
        }
        for (o, c) in out.iter_mut().zip(covered) {
            *o &= c;
        }
    }
    out
}

/// r_n = min over present sides of |fⁿ(Î_σ⁽ⁿ⁾)| / |Î_σ⁽ⁿ⁾|, compared with
/// |Dfⁿ(c¹)| wherever fⁿ is certified monotone on Î⁽ⁿ⁾. `inflate`
/// multiplies every r_n, as a negative control.
pub fn growth_lower_bound(
    map: &MapSpec,
    cv: &CriticalValueData,
    critical: usize,
    ce: &CESeries,
    monotone: &[bool],
    inflate: Option<f64>,
) -> GrowthReport {
    let chain = &cv.chains[critical];
    let gate = map.negative_schwarzian();
    let mut points = Vec::new();
    let (mut checked, mut violations, mut undecided, mut skipped) = (0, 0, 0, 0);
    let prec = 128;
    for n in 1..=chain.metric_depth {
        let mut log_r: Option<CertifiedValue> = None;
        for side in chain.present_sides() {
            let (Some(img), Some(len)) = (chain.image_length(&cv.data, map, side, n), chain.side_length(side, n))
            else {
                log_r = None;
                break;
            };
            let (Ok(li), Ok(ll)) = (img.ln(prec), len.ln(prec)) else {
                log_r = None;
                break;
            };
            let v = li.sub(&ll, prec);
            log_r = Some(match log_r {
                None => v,
                Some(o) => {
                    if v.hi() < o.lo() {
                        v
                    } else if o.hi() < v.lo() {
                        o
                    } else {
                        let lo = if v.lo() < o.lo() {
                            v.lo().clone()
                        } else {
                            o.lo().clone()
                        };
                        let hi = if v.hi() < o.hi() {
                            v.hi().clone()
                        } else {
                            o.hi().clone()
                        };
                        CertifiedValue::interval(lo, hi)
                    }
                }
            });
        }
        let Some(mut log_r) = log_r else {
            skipped += 1;
            continue;
        };
        if let Some(f) = inflate {
            log_r = log_r.add(
                &CertifiedValue::from_f64(f, prec).ln(prec).expect("positive factor"),
                prec,
            );
        }
        let ld = ce.log_derivative.get(n - 1);
        let status = match ld {
            Some(ld) if gate && monotone.get(n).copied().unwrap_or(false) => {
                checked += 1;
                if log_r.hi() <= ld.lo() {
                    GrowthStatus::Holds
                } else if log_r.lo() > ld.hi() {
                    violations += 1;
                    GrowthStatus::Violated
                } else {
                    undecided += 1;
                    GrowthStatus::Undecided
                }
            }
            _ => {
                skipped += 1;
                GrowthStatus::NotAsserted
            }
        };
        points.push(GrowthPoint {
            n,
            log_r: log_r.mid_f64(),
            log_derivative: ld.map(|l| l.mid_f64()),
            status,
        });
    }
    let samples: Vec<(usize, f64)> = points.iter().map(|p| (p.n, p.log_r)).collect();
    GrowthReport {
        critical,
        negative_schwarzian: gate,
        fit: lower_envelope(&samples),
        points,
        checked,
        violations,
        undecided,
        skipped,
    }
}

// ---------------------------------------------------------------- lemma constants

#[derive(Clone, Debug, Serialize)]
pub struct KappaPair {
    pub critical: usize,
    pub j: usize,
    pub s: usize,
    pub log_inv_d: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaFit {
    pub pairs: Vec<KappaPair>,
    /// max s / log d⁻¹
    pub kappa_bar: Option<f64>,
    /// min s / log d⁻¹
    pub kappa_lower: Option<f64>,
    pub insufficient: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapRatioSeries {
    pub critical: usize,
    pub side: Side,
    /// (n_i, (n_{i+1} − n_i)/n_i)
    pub ratios: Vec<(usize, f64)>,
    pub tail_max: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaFits {
    pub convention: &'static str,
    pub delta0: f64,
    pub kappa: KappaFit,
    /// |J| ≤ C e^{−s ξ̄} over monotone branches J of f^s.
    pub xi_bar: Option<EnvelopeFit>,
    /// |J| ≥ C e^{−n ξ} over one-sided critical neighbourhoods returning to
    /// the same critical point at time n.
    pub xi_lower: Option<EnvelopeFit>,
    pub gamma: Option<f64>,
    pub epsilon_series: Vec<GapRatioSeries>,
    pub gaps: Vec<GapReport>,
    pub shrink: Vec<ShrinkReport>,
    pub shrink_consequence: Vec<ShrinkConsequence>,
    pub growth: Vec<GrowthReport>,
    pub flags: Vec<String>,
}

/// (s(c^j), log d(c^j)⁻¹) over certified pairs with d(c^j) < δ₀.
pub fn kappa_fit(map: &MapSpec, kneading: &KneadingData, horizon: usize) -> KappaFit {
    let d0 = delta0(map);
    let mut pairs = Vec::new();
    for i in 0..map.num_critical() {
        let s = critical_separations(kneading, i, horizon);
        let pts = &kneading.orbits[i].points;
        for (k, sv) in s.iter().enumerate() {
            let j = k + 1;
            let (Some(sv), Some(x)) = (sv, pts.get(j - 1)) else {
                continue;
            };
            let d = critical_distance(map, x, 128.max(x.prec()));
            if d.cmp_certain(&d0) != Some(Ordering::Less) || !d.certainly_positive() {
                continue;
            }
            let Some(l) = log_f64(&d) else { continue };
            pairs.push(KappaPair {
                critical: i,
                j,
                s: *sv,
                log_inv_d: -l,
            });
        }
    }
    if pairs.len() < MIN_SAMPLES {
        return KappaFit {
            insufficient: Some(Error::InsufficientData { pairs: pairs.len() }.to_string()),
            pairs,
            kappa_bar: None,
            kappa_lower: None,
        };
    }
    let r: Vec<f64> = pairs.iter().map(|p| p.s as f64 / p.log_inv_d).collect();
    KappaFit {
        kappa_bar: r.iter().copied().reduce(f64::max),
        kappa_lower: r.iter().copied().reduce(f64::min),
        insufficient: None,
        pairs,
    }
}

/// (n_{i+1} − n_i)/n_i along N± of each critical value.
pub fn gap_ratio_series(cv: &CriticalValueData) -> Vec<GapRatioSeries> {
    let mut out = Vec::new();
    for (i, t) in cv.times.iter().enumerate() {
        for side in Side::BOTH {
            if t.mirrored_from.is_some() && t.mirrored_from != Some(side) {
                continue;
            }
            let ratios: Vec<(usize, f64)> = t
                .side(side)
                .windows(2)
                .map(|w| (w[0], (w[1] - w[0]) as f64 / w[0] as f64))
                .collect();
            let vals: Vec<f64> = ratios.iter().map(|r| r.1).collect();
            out.push(GapRatioSeries {
                critical: i,
                side,
                tail_max: tail_stats(&vals).map(|t| t.max),
                ratios,
            });
        }
    }
    out
}

/// (s, log|J|) with J = Î_σ⁽ⁿ⁾ and s the first cut time after n, so that
/// f^s is monotone on J.
pub fn monotone_branch_samples(chain: &CylinderChain) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for side in chain.present_sides() {
        let cuts = &chain.side(side).cuts;
        for n in 0..=chain.metric_depth {
            let k = cuts.partition_point(|&c| c <= n);
            let Some(&s) = cuts.get(k) else { break };
            if let Some(l) = chain.side_length(side, n).and_then(|l| log_f64(&l)) {
                out.push((s, l));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}

/// (n, log|Î_σ⁽ⁿ⁾(c)|) at the cut times whose new marker is c itself.
pub fn critical_return_samples(map: &MapSpec, data: &CriticalData, depth: usize) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for i in 0..map.num_critical() {
        let ch = refine_with(map, data, &Base::Critical(i), depth, depth)?;
        for side in ch.present_sides() {
            let sc = ch.side(side);
            for &n in &sc.cuts {
                if n > ch.metric_depth {
                    break;
                }
                let same =
                    matches!(sc.marker_at(n), crate::cylinders::Marker::Critical { critical, .. } if critical == i);
                if !same {
                    continue;
                }
                if let Some(l) = ch.side_length(side, n).and_then(|l| log_f64(&l)) {
                    out.push((n, l));
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub thresholds: Vec<usize>,
    /// Depth of the critical-point chains used for ξ.
    pub xi_depth: usize,
}

/// Fits κ̄, κ, ξ̄, ξ, γ and the gap-ratio series. `monotone[i]` gives the
/// certified-monotone depths of critical value i (see
/// [`monotone_certified`]); missing entries leave the growth check
/// unasserted.
pub fn fit_lemma_constants(
    map: &MapSpec,
    cv: &CriticalValueData,
    ce: &CEReport,
    monotone: &[Vec<bool>],
    cfg: &FitConfig,
) -> Result<LemmaFits> {
    let kneading = &cv.data.kneading;
    let kappa = kappa_fit(map, kneading, cv.horizon);
    let mut flags = Vec::new();
    if let Some(msg) = &kappa.insufficient {
        flags.push(format!("kappa: {msg}"));
    }

    let branch: Vec<(usize, f64)> = {
        let mut v: Vec<(usize, f64)> = cv.chains.iter().flat_map(monotone_branch_samples).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    };
    let xi_bar = upper_decay_envelope(&branch);
    let returns = critical_return_samples(map, &cv.data, cfg.xi_depth.min(cv.horizon))?;
    let xi_lower = if returns.len() >= MIN_SAMPLES {
        lower_decay_envelope(&returns)
    } else {
        flags.push(format!("xi: only {} critical return samples", returns.len()));
        None
    };

    let mut gaps = Vec::new();
    let mut shrink = Vec::new();
    let mut consequence = Vec::new();
    for &t in &cfg.thresholds {
        for (i, times) in cv.times.iter().enumerate() {
            match gap_analysis(times, i, t) {
                Ok(g) => {
                    let s = shrink_ratios(&cv.chains[i], &g);
                    if let Some(c) = shrink_consequence(&cv.chains[i], &g, &s) {
                        consequence.push(c);
                    }
                    shrink.push(s);
                    gaps.push(g);
                }
                Err(e) => flags.push(format!("gaps at T = {t}, critical value {i}: {e}")),
            }
        }
    }
    let gamma = shrink.iter().filter_map(|s| s.gamma).reduce(f64::max);

    let growth = (0..map.num_critical())
        .map(|i| {
            let empty = Vec::new();
            let m = monotone.get(i).unwrap_or(&empty);
            growth_lower_bound(map, cv, i, &ce.series[i], m, None)
        })
        .collect();

    Ok(LemmaFits {
        convention: PROXY_CONVENTION,
        delta0: delta0(map).lo().to_f64(),
        kappa,
        xi_bar,
        xi_lower,
        gamma,
        epsilon_series: gap_ratio_series(cv),
        gaps,
        shrink,
        shrink_consequence: consequence,
        growth,
        flags,
    })
}

// ---------------------------------------------------------------- Birkhoff

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffSeed {
    pub index: usize,
    pub start: f64,
    /// (n, (1/n)Σ_{i<n} log|Df(x^i)|) at evenly spaced checkpoints.
    pub checkpoints: Vec<(usize, f64)>,
    pub estimate: Option<f64>,
    pub reached: usize,
    pub restarts: usize,
    pub truncation: Option<String>,
    pub atypical: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffReport {
    pub label: &'static str,
    pub horizon: usize,
    pub rng_seed: u64,
    pub seeds: Vec<BirkhoffSeed>,
    pub mean: Option<f64>,
    pub spread: Option<f64>,
}

const BIRKHOFF_BITS: u32 = 128;
const CHECKPOINTS: usize = 100;

/// Time averages of log|Df| from `seeds` uniformly random starting points.
/// Orbits are interval pseudo-orbits restarted at the midpoint whenever the
/// enclosure gets wide, so the result is an estimate.
pub fn birkhoff_lyapunov(map: &MapSpec, seeds: usize, horizon: usize, rng_seed: u64) -> BirkhoffReport {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let starts: Vec<CertifiedValue> = (0..seeds)
        .map(|_| CertifiedValue::from_f64(rng.gen_range(f64::EPSILON..1.0), BIRKHOFF_BITS).forget_exact())
        .collect();
    birkhoff_from_points(map, &starts, horizon, rng_seed)
}

pub fn birkhoff_from_points(map: &MapSpec, starts: &[CertifiedValue], horizon: usize, rng_seed: u64) -> BirkhoffReport {
    let seeds: Vec<BirkhoffSeed> = starts
        .par_iter()
        .enumerate()
        .map(|(index, x0)| birkhoff_orbit(map, index, x0, horizon))
        .collect();
    let est: Vec<f64> = seeds
        .iter()
        .filter(|s| !s.atypical)
        .filter_map(|s| s.estimate)
        .collect();
    let mean = (!est.is_empty()).then(|| est.iter().sum::<f64>() / est.len() as f64);
    let spread = mean.map(|m| (est.iter().map(|e| (e - m).powi(2)).sum::<f64>() / est.len() as f64).sqrt());
    BirkhoffReport {
        label: "ESTIMATE",
        horizon,
        rng_seed,
        seeds,
        mean,
        spread,
    }
}

fn birkhoff_orbit(map: &MapSpec, index: usize, x0: &CertifiedValue, horizon: usize) -> BirkhoffSeed {
    let p = BIRKHOFF_BITS;
    let stride = (horizon / CHECKPOINTS).max(1);
    let limit = Float::with_val(p, Float::i_exp(1, -(p as i32) / 2));
    let mut x = x0.to_prec(p);
    let mut sum = Float::new(p);
    let mut checkpoints = Vec::new();
    let (mut restarts, mut reached) = (0, 0);
    let mut truncation = None;
    for n in 1..=horizon {
        let l = map.derivative(&x, p).map(|d| d.abs()).and_then(|d| d.ln(p));
        match l {
            Ok(l) => sum += l.mid(p),
            Err(e) => {
                truncation = Some(format!("step {n}: {e}"));
                break;
            }
        }
        reached = n;
        if n % stride == 0 || n == horizon {
            checkpoints.push((n, Float::with_val(p, &sum / n as u64).to_f64()));
        }
        x = map.evaluate(&x, p);
        if !x.is_exact() && x.width() > limit {
            x = CertifiedValue::point(x.mid(p));
            restarts += 1;
        }
    }
    let estimate = (reached > 0).then(|| Float::with_val(p, &sum / reached as u64).to_f64());
    BirkhoffSeed {
        index,
        start: x0.mid_f64(),
        checkpoints,
        estimate,
        reached,
        restarts,
        truncation,
        // an orbit that never leaves the exact rationals is eventually periodic
        atypical: x.is_exact(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln(v: f64) -> f64 {
        v.ln()
    }

    #[test]
    fn tail_window_is_last_fifth() {
        assert_eq!(tail_start(10), 8);
        assert_eq!(tail_start(1), 0);
        assert_eq!(tail_start(11), 8);
        let t = tail_stats(&[5.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((t.start, t.min, t.max), (4, 4.0, 4.0));
    }

    #[test]
    fn ce_closed_forms() {
        let r = ce_series(&MapSpec::ulam(), 200, 256).unwrap();
        let s = &r.series[0];
        assert_eq!(s.reached, 200);
        let want = CertifiedValue::from_int(4, 256).ln(256).unwrap();
        for n in [1, 7, 200] {
            let l = s.lambda_enclosure(n, 256).unwrap();
            assert!(l.sub(&want, 256).abs().hi().to_f64() < 1e-30);
        }
        assert!((s.fit.as_ref().unwrap().rate - ln(4.0)).abs() < 1e-12);

        let r = ce_series(&MapSpec::uniform_fold(3).unwrap(), 50, 256).unwrap();
        for s in &r.series {
            assert!(s.lambda.iter().all(|l| (l - ln(3.0)).abs() < 1e-14));
        }
    }

    #[test]
    fn sr_on_ulam() {
        let r = sr_sum(&MapSpec::ulam(), &[0.25, 0.5], 100).unwrap();
        let c = &r.critical[0];
        assert!(c.series[0].values.iter().all(|v| *v == 0.0));
        assert!(c.series[1].values.iter().all(|v| (v - ln(2.0)).abs() < 1e-12));
        assert_eq!(c.series[1].visits, 100);
    }

    #[test]
    fn tsr_on_ulam_and_tent_agree() {
        let a = tsr_sum(&MapSpec::ulam(), &[1, 2, 3], 300).unwrap();
        let b = tsr_sum(&MapSpec::tent(), &[1, 2, 3], 300).unwrap();
        let c = &a.critical[0];
        assert!(c.series[0].values.iter().all(|v| *v == 1.0));
        assert!(c.series[1].sums.iter().all(|v| *v == 0));
        assert_eq!(c.undetermined, 0);
        assert_eq!(a.max_delta(&b), Some(0.0));
        assert_eq!(a, b);
    }

    #[test]
    fn tent_gaps_and_ratios() {
        let map = MapSpec::tent();
        let cv = CriticalValueData::compute(&map, 200, 200).unwrap();
        let g = gap_analysis(&cv.times[0], 0, 2).unwrap();
        assert_eq!(g.epsilon, 0.0);
        assert_eq!(g.eta, 0.25);
        assert_eq!(g.count, 100);
        assert!(g.passes);
        for w in g.windows.windows(2) {
            assert!(w[0].t2 < w[1].t1);
        }
        let s = shrink_ratios(&cv.chains[0], &g);
        assert!(!s.ratios.is_empty());
        assert!(s
            .ratios
            .iter()
            .all(|r| r.side == Side::Left && r.exact.as_deref() == Some("1/2")));
        let big = gap_analysis(&cv.times[0], 0, 1000).unwrap();
        assert!(big.passes);
    }

    #[test]
    fn too_few_gaps() {
        let cv = CriticalValueData::compute(&MapSpec::tent(), 5, 5).unwrap();
        assert!(matches!(
            gap_analysis(&cv.times[0], 0, 2),
            Err(Error::InsufficientHorizon { .. })
        ));
    }

    #[test]
    fn ulam_growth_and_fits() {
        let map = MapSpec::ulam();
        let cv = CriticalValueData::compute(&map, 60, 60).unwrap();
        let ce = ce_series_from(&map, &cv.data.kneading, 60, 256);
        let rep = crate::cylinders::verify_monotone(&map, &cv.chains[0], &cv.data, 4, None);
        let mono = monotone_certified(&cv.chains[0], &rep);
        assert!(mono[1..].iter().all(|m| *m));
        let g = growth_lower_bound(&map, &cv, 0, &ce.series[0], &mono, None);
        assert!(g.checked > 50);
        assert_eq!(g.violations, 0);
        let bad = growth_lower_bound(&map, &cv, 0, &ce.series[0], &mono, Some(4.0));
        assert!(bad.violations > 0);

        let fits = fit_lemma_constants(
            &map,
            &cv,
            &ce,
            &[mono],
            &FitConfig {
                thresholds: vec![2],
                xi_depth: 30,
            },
        )
        .unwrap();
        assert!(fits.kappa.insufficient.is_some());
        assert!(fits.kappa.pairs.is_empty());
        assert!(fits.xi_bar.as_ref().unwrap().rate > 0.0);
    }

    #[test]
    fn tent_xi_bar_is_log_two() {
        let map = MapSpec::tent();
        let cv = CriticalValueData::compute(&map, 100, 100).unwrap();
        let s = monotone_branch_samples(&cv.chains[0]);
        assert!(s.iter().all(|&(k, l)| (l + k as f64 * ln(2.0)).abs() < 1e-9));
        let fit = upper_decay_envelope(&s).unwrap();
        assert!((fit.rate - ln(2.0)).abs() < 1e-9);
    }

    #[test]
    fn folded_growth_is_not_asserted() {
        let map = MapSpec::uniform_fold(3).unwrap();
        let cv = CriticalValueData::compute(&map, 40, 40).unwrap();
        let ce = ce_series_from(&map, &cv.data.kneading, 40, 128);
        let mono = vec![true; 41];
        let g = growth_lower_bound(&map, &cv, 0, &ce.series[0], &mono, None);
        assert_eq!(g.checked, 0);
        assert!(g.points.iter().all(|p| p.status == GrowthStatus::NotAsserted));
    }

    #[test]
    fn birkhoff_constant_slope_and_fixed_point() {
        let r = birkhoff_lyapunov(&MapSpec::uniform_fold(3).unwrap(), 2, 500, 7);
        for s in &r.seeds {
            assert!(s.checkpoints.iter().all(|(_, v)| (v - ln(3.0)).abs() < 1e-12));
        }
        let zero = CertifiedValue::from_int(0, 128);
        let r = birkhoff_from_points(&MapSpec::ulam(), &[zero], 100, 0);
        assert!(r.seeds[0].atypical);
        assert!((r.seeds[0].estimate.unwrap() - ln(4.0)).abs() < 1e-12);
        assert!(r.mean.is_none());
    }
}
