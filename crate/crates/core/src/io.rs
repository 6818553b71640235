//! Map and pair definition files, and the report files written by the
//! command-line front end.
//!
//! Rationals are written as strings: "p/q", "p", or a finite decimal.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::{parse_rational, rational_string, PrecisionConfig};
use crate::cylinders::{CylinderChain, Side};
use crate::error::{Error, Result};
use crate::homeo::HomeoSpec;
use crate::map_model::MapSpec;
use crate::symbolic::{KneadingData, SymbolSeq};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapDef {
    Ulam,
    Tent,
    Logistic {
        a: String,
    },
    ChebyshevFold {
        degree: u32,
    },
    UniformFold {
        branches: u32,
    },
    /// Coefficients in increasing degree.
    Polynomial {
        coefficients: Vec<String>,
    },
    /// Turning points of a piecewise-linear map with full branches.
    FoldedLinear {
        breakpoints: Vec<String>,
    },
    Pushforward {
        base: Box<MapDef>,
        homeo: HomeoDef,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct HomeoDef {
    pub form: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<HomeoParameters>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct HomeoParameters {
    /// (x, h(x)) pairs for the piecewise-linear form.
    pub knots: Vec<[String; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct MapFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub map: MapDef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<PrecisionConfig>,
}

fn rationals(v: &[String]) -> Result<Vec<rug::Rational>> {
    v.iter().map(|s| parse_rational(s)).collect()
}

impl HomeoDef {
    pub fn build(&self) -> Result<HomeoSpec> {
        let h = match self.form.as_str() {
            "identity" => HomeoSpec::Identity,
            "square" => HomeoSpec::Square,
            "sqrt" => HomeoSpec::Sqrt,
            "sin_squared" => HomeoSpec::SinSquared,
            "arcsin_sqrt" => HomeoSpec::ArcsinSqrt,
            "piecewise_linear" => {
                let p = self
                    .parameters
                    .as_ref()
                    .ok_or_else(|| Error::InvalidHomeo("piecewise_linear needs knots".into()))?;
                let knots = p
                    .knots
                    .iter()
                    .map(|[a, b]| Ok((parse_rational(a)?, parse_rational(b)?)))
                    .collect::<Result<Vec<_>>>()?;
                HomeoSpec::PiecewiseLinear(knots)
            }
            other => return Err(Error::InvalidHomeo(format!("unknown form {other:?}"))),
        };
        h.validate()?;
        Ok(h)
    }
}

impl MapDef {
    pub fn build(&self, precision: &PrecisionConfig) -> Result<MapSpec> {
        let m = match self {
            MapDef::Ulam => MapSpec::ulam(),
            MapDef::Tent => MapSpec::tent(),
            MapDef::Logistic { a } => MapSpec::logistic(parse_rational(a)?)?,
            MapDef::ChebyshevFold { degree } => MapSpec::chebyshev_fold(*degree)?,
            MapDef::UniformFold { branches } => MapSpec::uniform_fold(*branches)?,
            MapDef::Polynomial { coefficients } => {
                return MapSpec::polynomial("polynomial", rationals(coefficients)?, precision.clone())
            }
            MapDef::FoldedLinear { breakpoints } => {
                return MapSpec::folded_linear("folded_linear", rationals(breakpoints)?, precision.clone())
            }
            MapDef::Pushforward { base, homeo } => {
                let b = base.build(precision)?;
                let name = format!("{}^{}", b.name(), homeo.form);
                return MapSpec::pushforward(&name, b, homeo.build()?);
            }
        };
        if m.precision() == precision {
            Ok(m)
        } else {
            m.with_precision(precision.clone())
        }
    }
}

impl MapFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("map file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Builds the map; `initial_bits` and `max_bits` override the file's
    /// precision settings.
    pub fn build(&self, initial_bits: Option<u32>, max_bits: Option<u32>) -> Result<MapSpec> {
        let mut p = self.precision.clone().unwrap_or_default();
        if let Some(b) = initial_bits {
            p.initial_bits = b;
        }
        if let Some(b) = max_bits {
            p.max_bits = b;
        }
        let p = p.with_env_override();
        p.validate()?;
        let m = self.map.build(&p)?;
        Ok(match &self.name {
            Some(n) => m.renamed(n),
            None => m,
        })
    }
}

/// `g` is either an inline map, a path to a map file, or "pushforward".
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapRef {
    Inline(MapFile),
    Path(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairFile {
    pub f: MapRef,
    pub g: MapRef,
    pub h: HomeoDef,
}

pub enum ResolvedG {
    Map(MapFile),
    Pushforward,
}

impl PairFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("pair file: {e}")))
    }

    fn resolve(r: &MapRef, dir: &Path) -> Result<MapFile> {
        match r {
            MapRef::Inline(m) => Ok(m.clone()),
            MapRef::Path(p) => MapFile::load(&dir.join(p)),
        }
    }

    pub fn resolve_f(&self, dir: &Path) -> Result<MapFile> {
        Self::resolve(&self.f, dir)
    }

    pub fn resolve_g(&self, dir: &Path) -> Result<ResolvedG> {
        match &self.g {
            MapRef::Path(p) if p == "pushforward" => Ok(ResolvedG::Pushforward),
            r => Ok(ResolvedG::Map(Self::resolve(r, dir)?)),
        }
    }
}

pub fn config_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

pub fn symbol_string(seq: &[u16]) -> String {
    if seq.iter().all(|&s| s < 10) {
        seq.iter().map(|&s| char::from(b'0' + s as u8)).collect()
    } else {
        seq.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Serialize)]
struct SeqDump<'a> {
    symbols: String,
    certified: usize,
    truncation: &'a crate::symbolic::Truncation,
    bits: u32,
}

fn seq_dump(s: &SymbolSeq) -> SeqDump<'_> {
    SeqDump {
        symbols: symbol_string(&s.symbols),
        certified: s.certified,
        truncation: &s.truncation,
        bits: s.bits,
    }
}

pub fn kneading_json(k: &KneadingData) -> serde_json::Value {
    let seqs: Vec<serde_json::Value> = k
        .sequences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            serde_json::json!({
                "critical": i,
                "left": seq_dump(&s.left),
                "right": seq_dump(&s.right),
            })
        })
        .collect();
    serde_json::Value::Array(seqs)
}

fn csv_value(v: Option<crate::arith::CertifiedValue>) -> (String, String) {
    match v {
        None => (String::new(), String::new()),
        Some(v) => {
            let s = match v.exact_value() {
                Some(r) if r.denom().significant_bits() <= 64 => rational_string(r),
                _ => v.to_decimal(20),
            };
            (s, v.prec().to_string())
        }
    }
}

/// One row per depth: endpoints and lengths of both sides with their
/// precision, plus the cut side.
pub fn chain_csv(chain: &CylinderChain) -> String {
    let mut out =
        String::from("n,symbol,left_endpoint,left_bits,right_endpoint,right_bits,left_length,right_length,cut\n");
    let cuts = chain.cut_events();
    let mut ci = 0;
    for n in 0..=chain.depth {
        let (le, lb) = csv_value(chain.endpoint_value(Side::Left, n));
        let (re, rb) = csv_value(chain.endpoint_value(Side::Right, n));
        let ll = chain
            .side_length(Side::Left, n)
            .map(|v| v.to_decimal(12))
            .unwrap_or_default();
        let rl = chain
            .side_length(Side::Right, n)
            .map(|v| v.to_decimal(12))
            .unwrap_or_default();
        let mut cut = "";
        while ci < cuts.len() && cuts[ci].depth < n {
            ci += 1;
        }
        if ci < cuts.len() && cuts[ci].depth == n {
            cut = match cuts[ci].side {
                crate::cylinders::CutSide::Left => "left",
                crate::cylinders::CutSide::Right => "right",
                crate::cylinders::CutSide::Both => "both",
            };
        }
        let sym = chain
            .left
            .symbols
            .get(n)
            .or(chain.right.symbols.get(n))
            .map(|s| s.to_string())
            .unwrap_or_default();
        let _ = writeln!(out, "{n},{sym},{le},{lb},{re},{rb},{ll},{rl},{cut}");
    }
    out
}

/// Matrix CSV: one row per n, one column per parameter value.
pub fn matrix_csv(param: &str, params: &[String], columns: &[&[f64]]) -> String {
    let mut out = format!(
        "n,{}\n",
        params
            .iter()
            .map(|p| format!("{param}={p}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    let rows = columns.iter().map(|c| c.len()).max().unwrap_or(0);
    for n in 0..rows {
        let cells: Vec<String> = columns
            .iter()
            .map(|c| c.get(n).map(|v| format_f64(*v)).unwrap_or_default())
            .collect();
        let _ = writeln!(out, "{},{}", n + 1, cells.join(","));
    }
    out
}

/// Two-column TSV for external plotting.
pub fn plot_tsv(points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = String::new();
    for (x, y) in points {
        let _ = writeln!(out, "{}\t{}", format_f64(x), format_f64(y));
    }
    out
}

/// Shortest round-trip representation; locale independent.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        v.to_string()
    }
}

/// Writes files into an output directory and records them for the manifest.
pub struct OutputDir {
    pub root: PathBuf,
    pub files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::Config(format!("{}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.root.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::Config(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&p, contents).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("{name}: {e}")))?;
        s.push('\n');
        self.write(name, &s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_map_files() {
        let m = MapFile::parse(r#"{"kind": "logistic", "a": "39/10"}"#).unwrap();
        assert_eq!(m.map, MapDef::Logistic { a: "39/10".into() });
        let f = m.build(None, None).unwrap();
        assert_eq!(f.num_critical(), 1);

        let m =
            MapFile::parse(r#"{"name": "f3", "kind": "polynomial", "coefficients": ["0", "9", "-24", "16"]}"#).unwrap();
        let f = m.build(None, None).unwrap();
        assert_eq!(f.name(), "f3");
        assert_eq!(f.num_critical(), 2);

        let m =
            MapFile::parse(r#"{"kind": "pushforward", "base": {"kind": "tent"}, "homeo": {"form": "sin_squared"}}"#)
                .unwrap();
        assert_eq!(m.build(None, None).unwrap().num_critical(), 1);

        assert!(MapFile::parse(r#"{"kind": "logistic"}"#).is_err());
        assert!(
            MapFile::parse(r#"{"kind": "folded_linear", "breakpoints": ["2/3", "1/3"]}"#)
                .unwrap()
                .build(None, None)
                .is_err()
        );
    }

    #[test]
    fn piecewise_linear_homeo_needs_knots() {
        let h = HomeoDef {
            form: "piecewise_linear".into(),
            parameters: None,
        };
        assert!(h.build().is_err());
        let h = HomeoDef {
            form: "piecewise_linear".into(),
            parameters: Some(HomeoParameters {
                knots: vec![
                    ["0".into(), "0".into()],
                    ["1/2".into(), "1/3".into()],
                    ["1".into(), "1".into()],
                ],
            }),
        };
        assert!(h.build().is_ok());
    }

    #[test]
    fn symbol_strings() {
        assert_eq!(symbol_string(&[1, 0, 2]), "102");
        assert_eq!(symbol_string(&[1, 12]), "1,12");
    }

    #[test]
    fn hash_separates_parts() {
        assert_ne!(config_hash(&[b"ab", b"c"]), config_hash(&[b"a", b"bc"]));
    }
}
