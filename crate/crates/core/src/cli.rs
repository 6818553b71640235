//! Batch front end: `analyze`, `conjugacy`, `oracle` and `calibrate`.
//!
//! Exit codes: 0 success, 1 usage, configuration or I/O error, 2 failed
//! check. Outputs are deterministic for a fixed configuration.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::arith::parse_rational;
use crate::conditions::{
    birkhoff_lyapunov, ce_series_from, fit_lemma_constants, monotone_certified, sr_sum_from, tsr_sum_from,
    CriticalValueData, FitConfig,
};
use crate::conjugacy::{compare_combinatorics, verify_conjugacy, ComparisonConfig, ConjugacyPair};
use crate::cylinders::{
    compare_with_oracle, oracle_cylinders, refine_with, verify_distance_sandwich, verify_monotone, verify_septime,
    Base, ChainTruncation, CheckReport, CylinderChain,
};
use crate::error::{Error, Result};
use crate::io::{
    chain_csv, config_hash, format_f64, kneading_json, matrix_csv, plot_tsv, MapFile, OutputDir, PairFile, ResolvedG,
};
use crate::map_model::MapSpec;
use crate::symbolic::calibrate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "mdyn",
    version,
    about = "Combinatorial and metric diagnostics for multimodal interval maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Kneading data, cylinder chains and CE/SR/TSR reports for one map.
    Analyze(AnalyzeArgs),
    /// Conjugacy residuals and combinatorial invariance for a map pair.
    Conjugacy(ConjugacyArgs),
    /// Cylinder chains against brute-force oracles and structural identities.
    Oracle(OracleArgs),
    /// δ₀ and N₀ of a map.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PrecisionArgs {
    /// Initial working precision in bits.
    #[arg(long)]
    pub bits: Option<u32>,
    /// Precision ceiling in bits (MDYN_MAX_BITS overrides it).
    #[arg(long)]
    pub max_bits: Option<u32>,
}

#[derive(Args, Debug, Serialize)]
pub struct AnalyzeArgs {
    #[serde(skip)]
    pub map: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub horizon: usize,
    /// Depth of metric cylinder endpoints; defaults to the horizon.
    #[arg(long)]
    pub metric_depth: Option<usize>,
    /// Depth up to which monotonicity of the chains is verified.
    #[arg(long, default_value_t = 500)]
    pub monotone_depth: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1/8,1/16,1/32,1/64,1/128,1/256,1/512,1/1024"
    )]
    pub delta_grid: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10,11,12")]
    pub m_grid: Vec<usize>,
    #[arg(long = "gap-T", value_delimiter = ',', default_value = "10,25,50,100")]
    pub gap_t: Vec<usize>,
    /// Number of random starting points for the Lyapunov estimate; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub birkhoff_horizon: usize,
    #[command(flatten)]
    pub precision: PrecisionArgs,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ConjugacyArgs {
    #[serde(skip)]
    pub pair: PathBuf,
    /// Depth of the compared chains and horizon of the TSR and CE series.
    #[arg(long, default_value_t = 1000)]
    pub horizon: usize,
    #[arg(long, default_value_t = 10_000)]
    pub kneading_length: usize,
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10,11,12")]
    pub m_grid: Vec<usize>,
    #[command(flatten)]
    pub precision: PrecisionArgs,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct OracleArgs {
    #[serde(skip)]
    pub map: PathBuf,
    /// Deepest cylinder compared with the brute-force oracle.
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, default_value_t = 100_000)]
    pub grid: usize,
    /// Horizon of the septime check.
    #[arg(long, default_value_t = 2000)]
    pub horizon: usize,
    /// Depth of metric endpoints used by the distance and monotone checks.
    #[arg(long, default_value_t = 500)]
    pub metric_depth: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base points (rationals); defaults to the critical values.
    #[arg(long, value_delimiter = ',')]
    pub point: Vec<String>,
    /// Moves chain endpoints outward by this amount (negative control).
    #[arg(long)]
    pub perturb: Option<f64>,
    #[command(flatten)]
    pub precision: PrecisionArgs,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CalibrateArgs {
    #[serde(skip)]
    pub map: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub horizon: usize,
    #[command(flatten)]
    pub precision: PrecisionArgs,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub command: &'static str,
    pub map: String,
    pub config_hash: String,
    pub seed: u64,
    pub max_bits_used: u32,
    pub truncations: Vec<String>,
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    header: &'a Header,
    report: &'a T,
}

#[derive(Serialize)]
struct Manifest<'a> {
    header: &'a Header,
    status: &'static str,
    partial: bool,
    errors: Vec<String>,
    checks: &'a [CheckOutcome],
    files: Vec<String>,
}

struct Run {
    out: OutputDir,
    header: Header,
    checks: Vec<CheckOutcome>,
    errors: Vec<String>,
}

impl Run {
    fn report<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.out.write_json(
            name,
            &Wrapped {
                header: &self.header,
                report: value,
            },
        )
    }

    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckOutcome {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    fn stage<T>(&mut self, name: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{name}: {e}"));
                None
            }
        }
    }

    fn finish(mut self) -> Result<i32> {
        let failed = !self.errors.is_empty() || self.checks.iter().any(|c| !c.pass);
        let mut files = self.out.files.clone();
        files.push("manifest.json".into());
        let manifest = Manifest {
            header: &self.header,
            status: if failed { "check_failed" } else { "ok" },
            partial: !self.errors.is_empty(),
            errors: self.errors.clone(),
            checks: &self.checks,
            files,
        };
        self.out.write_json("manifest.json", &manifest)?;
        Ok(if failed { EXIT_CHECK_FAILED } else { EXIT_OK })
    }
}

fn load_map(path: &Path, p: &PrecisionArgs) -> Result<(MapFile, MapSpec, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let file = MapFile::parse(&text)?;
    let map = file.build(p.bits, p.max_bits)?;
    Ok((file, map, text))
}

fn hash_config<T: Serialize>(args: &T, inputs: &[&str]) -> String {
    let a = serde_json::to_vec(args).expect("serializable arguments");
    let mut parts: Vec<&[u8]> = vec![&a];
    parts.extend(inputs.iter().map(|s| s.as_bytes()));
    parts.push(crate::arith::MAX_BITS_ENV.as_bytes());
    let env = std::env::var(crate::arith::MAX_BITS_ENV).unwrap_or_default();
    parts.push(env.as_bytes());
    config_hash(&parts)
}

fn chain_bits(chains: &[CylinderChain]) -> u32 {
    chains
        .iter()
        .flat_map(|c| [&c.left, &c.right])
        .flat_map(|s| s.endpoints.iter().map(|e| e.bits))
        .max()
        .unwrap_or(0)
}

fn chain_truncations(chains: &[CylinderChain]) -> Vec<String> {
    chains
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let t = c.truncation.clone()?;
            Some(match t {
                ChainTruncation::HitCritical { depth } => {
                    format!("critical value {i}: hits a critical point at depth {depth}")
                }
                ChainTruncation::PrecisionExhausted { depth } => {
                    format!("critical value {i}: precision exhausted at depth {depth}")
                }
                ChainTruncation::MarkerUnresolved { depth } => {
                    format!("critical value {i}: marker unresolved at depth {depth}")
                }
            })
        })
        .collect()
}

fn parse_deltas(v: &[String]) -> Result<Vec<f64>> {
    v.iter()
        .map(|s| {
            let r = parse_rational(s)?;
            let f = r.to_f64();
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("delta {s} outside (0, 1]")));
            }
            Ok(f)
        })
        .collect()
}

pub fn analyze(args: &AnalyzeArgs) -> Result<i32> {
    if args.horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if args.m_grid.contains(&0) || args.gap_t.contains(&0) {
        return Err(Error::Config("grid values must be positive".into()));
    }
    let deltas = parse_deltas(&args.delta_grid)?;
    let (_, map, text) = load_map(&args.map, &args.precision)?;
    let metric_depth = args.metric_depth.unwrap_or(args.horizon).min(args.horizon);
    let header = Header {
        command: "analyze",
        map: map.name().to_string(),
        config_hash: hash_config(args, &[&text]),
        seed: args.seed,
        max_bits_used: 0,
        truncations: Vec::new(),
    };
    let mut run = Run {
        out: OutputDir::create(&args.out)?,
        header,
        checks: Vec::new(),
        errors: Vec::new(),
    };

    let Some(cv) = run.stage(
        "cylinder chains",
        CriticalValueData::compute(&map, args.horizon, metric_depth),
    ) else {
        return run.finish();
    };
    let kneading = &cv.data.kneading;
    run.header.max_bits_used = kneading
        .all()
        .map(|s| s.bits)
        .chain(cv.data.boundary.iter().map(|o| o.seq.bits))
        .max()
        .unwrap_or(0)
        .max(chain_bits(&cv.chains));
    run.header.truncations = chain_truncations(&cv.chains);

    run.out.write_json("kneading.json", &kneading_json(kneading))?;
    for (i, ch) in cv.chains.iter().enumerate() {
        run.out.write(&format!("chain_{i}.csv"), &chain_csv(ch))?;
    }
    run.report("shadowing_times.json", &cv.times)?;

    let calibration = run.stage("calibration", calibrate(&map, args.horizon.min(64)));
    if let Some(c) = &calibration {
        run.report("calibration.json", c)?;
    }

    let ce = ce_series_from(&map, kneading, args.horizon, 256);
    run.report("ce.json", &ce)?;
    let cols: Vec<&[f64]> = ce.series.iter().map(|s| s.lambda.as_slice()).collect();
    let names: Vec<String> = ce.series.iter().map(|s| s.critical.to_string()).collect();
    run.out.write("ce.csv", &matrix_csv("critical", &names, &cols))?;
    for s in &ce.series {
        run.out.write(
            &format!("plots/ce_{}.tsv", s.critical),
            &plot_tsv(s.lambda.iter().enumerate().map(|(k, v)| ((k + 1) as f64, *v))),
        )?;
    }

    let sr = sr_sum_from(&map, kneading, &deltas, args.horizon);
    run.report("sr.json", &sr)?;
    for c in &sr.critical {
        let cols: Vec<&[f64]> = c.series.iter().map(|s| s.values.as_slice()).collect();
        let names: Vec<String> = c.series.iter().map(|s| format_f64(s.delta)).collect();
        run.out
            .write(&format!("sr_{}.csv", c.critical), &matrix_csv("delta", &names, &cols))?;
    }
    let mut sr_monotone = true;
    for c in &sr.critical {
        let mut order: Vec<&crate::conditions::SRSeries> = c.series.iter().collect();
        order.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        for w in order.windows(2) {
            sr_monotone &= w[0].values.iter().zip(&w[1].values).all(|(a, b)| a <= b);
        }
    }
    run.check(
        "sr_monotone_in_delta",
        sr_monotone,
        "SR magnitude non-increasing as delta decreases",
    );

    let tsr = tsr_sum_from(kneading, &args.m_grid, args.horizon);
    run.report("tsr.json", &tsr)?;
    for c in &tsr.critical {
        let cols: Vec<&[f64]> = c.series.iter().map(|s| s.values.as_slice()).collect();
        let names: Vec<String> = c.series.iter().map(|s| s.m.to_string()).collect();
        run.out
            .write(&format!("tsr_{}.csv", c.critical), &matrix_csv("m", &names, &cols))?;
    }
    let undetermined: usize = tsr.critical.iter().map(|c| c.undetermined).sum();
    run.check(
        "tsr_undetermined",
        tsr.valid(),
        format!("{undetermined} undetermined separation times"),
    );
    let mut tsr_monotone = true;
    for c in &tsr.critical {
        let mut order: Vec<&crate::conditions::TSRSeries> = c.series.iter().collect();
        order.sort_by_key(|s| s.m);
        for w in order.windows(2) {
            tsr_monotone &= w[0].sums.iter().zip(&w[1].sums).all(|(a, b)| a >= b);
        }
    }
    run.check("tsr_monotone_in_m", tsr_monotone, "TSR sums non-increasing in m");

    let monotone: Vec<Vec<bool>> = cv
        .chains
        .iter()
        .map(|ch| {
            let limit = args.monotone_depth.min(ch.metric_depth);
            let mut short = ch.clone();
            short.depth = limit;
            short.metric_depth = limit;
            let rep = verify_monotone(&map, &short, &cv.data, 4, None);
            monotone_certified(&short, &rep)
        })
        .collect();
    let fit_cfg = FitConfig {
        thresholds: args.gap_t.clone(),
        xi_depth: metric_depth.min(500),
    };
    if let Some(fits) = run.stage("lemma fits", fit_lemma_constants(&map, &cv, &ce, &monotone, &fit_cfg)) {
        run.report("gaps.json", &fits.gaps)?;
        run.report("lemma_fits.json", &fits)?;
        let violations: usize = fits.growth.iter().map(|g| g.violations).sum();
        run.check(
            "minimum_principle",
            violations == 0,
            format!("{violations} violations of |Df^n(c1)| >= r_n"),
        );
        let bad: usize = fits
            .shrink
            .iter()
            .map(|s| s.ratios.iter().filter(|r| !r.below_one).count())
            .sum();
        run.check(
            "contraction_ratios",
            bad == 0,
            format!("{bad} window ratios not certified below 1"),
        );
        if let (Some(hi), Some(lo)) = (fits.kappa.kappa_bar, fits.kappa.kappa_lower) {
            run.check(
                "kappa_order",
                lo > 0.0 && lo <= hi && hi.is_finite(),
                format!("kappa = {lo}, kappa_bar = {hi}"),
            );
        }
        for g in &fits.growth {
            run.out.write(
                &format!("plots/r_n_{}.tsv", g.critical),
                &plot_tsv(g.points.iter().map(|p| (p.n as f64, p.log_r))),
            )?;
        }
        run.out.write(
            "plots/kappa_scatter.tsv",
            &plot_tsv(fits.kappa.pairs.iter().map(|p| (p.log_inv_d, p.s as f64))),
        )?;
    }

    if args.seeds > 0 {
        let b = birkhoff_lyapunov(&map, args.seeds, args.birkhoff_horizon, args.seed);
        run.report("birkhoff.json", &b)?;
    }
    run.finish()
}

pub fn conjugacy(args: &ConjugacyArgs) -> Result<i32> {
    if args.horizon == 0 || args.kneading_length == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let pf = PairFile::load(&args.pair)?;
    let dir = args.pair.parent().unwrap_or(Path::new("."));
    let f_file = pf.resolve_f(dir)?;
    let f = f_file.build(args.precision.bits, args.precision.max_bits)?;
    let h = pf.h.build()?;
    let pair = match pf.resolve_g(dir)? {
        ResolvedG::Pushforward => ConjugacyPair::pushforward(f, h)?,
        ResolvedG::Map(g) => ConjugacyPair::new(f, g.build(args.precision.bits, args.precision.max_bits)?, h)?,
    };
    let text = std::fs::read_to_string(&args.pair).map_err(|e| Error::Config(e.to_string()))?;
    let header = Header {
        command: "conjugacy",
        map: format!("{} ~ {}", pair.f.name(), pair.g.name()),
        config_hash: hash_config(args, &[&text, &serde_json::to_string(&f_file).unwrap_or_default()]),
        seed: 0,
        max_bits_used: 0,
        truncations: Vec::new(),
    };
    let mut run = Run {
        out: OutputDir::create(&args.out)?,
        header,
        checks: Vec::new(),
        errors: Vec::new(),
    };
    if let Some(res) = run.stage("conjugacy residual", verify_conjugacy(&pair, args.grid)) {
        run.check(
            "conjugacy_relation",
            res.pass,
            format!("{} grid points fail", res.failures),
        );
        run.report("residual.json", &res)?;
    }
    let cfg = ComparisonConfig {
        kneading_length: args.kneading_length,
        horizon: args.horizon,
        m_grid: args.m_grid.clone(),
        ce_bits: 256,
    };
    if let Some(inv) = run.stage("combinatorics", compare_combinatorics(&pair, &cfg)) {
        run.check(
            "critical_count",
            inv.critical_points[0] == inv.critical_points[1],
            format!("{} vs {}", inv.critical_points[0], inv.critical_points[1]),
        );
        run.check("kneading_match", inv.kneading_match.iter().all(|k| k.matches), "");
        run.check("shadowing_match", inv.shadowing_match.iter().all(|k| k.matches), "");
        run.check(
            "tsr_delta",
            inv.tsr_delta == Some(0.0),
            inv.tsr_delta.map_or("grids differ".to_string(), format_f64),
        );
        run.report("invariance.json", &inv)?;
        let mut cols: Vec<&[f64]> = Vec::new();
        let mut names = Vec::new();
        for (a, b) in inv.ce.0.series.iter().zip(&inv.ce.1.series) {
            cols.push(&a.lambda);
            cols.push(&b.lambda);
            names.push(format!("f{}", a.critical));
            names.push(format!("g{}", b.critical));
        }
        run.out
            .write("ce_side_by_side.csv", &matrix_csv("lambda", &names, &cols))?;
    }
    run.finish()
}

#[derive(Serialize)]
struct OracleEntry {
    base: String,
    oracle: CheckReport,
    septime: crate::cylinders::SeptimeReport,
    distance: CheckReport,
    monotone: CheckReport,
}

pub fn oracle(args: &OracleArgs) -> Result<i32> {
    if args.horizon == 0 || args.grid < 2 {
        return Err(Error::Config("horizon and grid must be positive".into()));
    }
    let (_, map, text) = load_map(&args.map, &args.precision)?;
    let header = Header {
        command: "oracle",
        map: map.name().to_string(),
        config_hash: hash_config(args, &[&text]),
        seed: args.seed,
        max_bits_used: 0,
        truncations: Vec::new(),
    };
    let mut run = Run {
        out: OutputDir::create(&args.out)?,
        header,
        checks: Vec::new(),
        errors: Vec::new(),
    };
    let mut bases: Vec<(String, crate::arith::CertifiedValue)> = Vec::new();
    if args.point.is_empty() {
        for i in 0..map.num_critical() {
            bases.push((format!("critical value {i}"), map.critical_value(i)));
        }
    } else {
        for p in &args.point {
            let r = parse_rational(p)?;
            if !(0..=1).contains(&r) {
                return Err(Error::Config(format!("point {p} outside [0, 1]")));
            }
            bases.push((
                p.clone(),
                crate::arith::CertifiedValue::exact(r, map.precision().initial_bits),
            ));
        }
    }
    let Some(n0) = run.stage("calibration", calibrate(&map, 64)).map(|c| c.n0) else {
        return run.finish();
    };
    let Some(data) = run.stage(
        "kneading",
        crate::cylinders::CriticalData::compute(&map, args.horizon + 258),
    ) else {
        return run.finish();
    };
    let mut entries = Vec::new();
    let mut chains = Vec::new();
    for (name, x) in bases {
        let metric = args.metric_depth.min(args.horizon).max(args.depth);
        let Some(ch) = run.stage(
            &name,
            refine_with(&map, &data, &Base::Point(x.clone()), args.horizon, metric),
        ) else {
            continue;
        };
        let oracle = oracle_cylinders(&map, &x, args.depth, args.grid);
        let oracle_rep = compare_with_oracle(&ch, &oracle, args.grid, args.perturb);
        let septime = verify_septime(&ch, &data.kneading, n0);
        let distance = verify_distance_sandwich(&map, &ch, args.samples, args.seed);
        let monotone = verify_monotone(&map, &ch, &data, 4, args.perturb);
        for (check, rep) in [
            ("oracle", &oracle_rep),
            ("septime", &septime.report),
            ("distance", &distance),
            ("monotone", &monotone),
        ] {
            let pass = rep.passed == rep.checked && (check != "oracle" || rep.checked > 0);
            run.check(
                format!("{check} ({name})"),
                pass,
                format!("{}/{} passed, {} skipped", rep.passed, rep.checked, rep.skipped),
            );
        }
        entries.push(OracleEntry {
            base: name,
            oracle: oracle_rep,
            septime,
            distance,
            monotone,
        });
        chains.push(ch);
    }
    run.header.max_bits_used = chain_bits(&chains);
    run.header.truncations = chain_truncations(&chains);
    run.report("oracle.json", &entries)?;
    run.finish()
}

pub fn calibrate_cmd(args: &CalibrateArgs) -> Result<i32> {
    let (_, map, text) = load_map(&args.map, &args.precision)?;
    let c = calibrate(&map, args.horizon)?;
    let header = Header {
        command: "calibrate",
        map: map.name().to_string(),
        config_hash: hash_config(args, &[&text]),
        seed: 0,
        max_bits_used: c.bits,
        truncations: Vec::new(),
    };
    let mut run = Run {
        out: OutputDir::create(&args.out)?,
        header,
        checks: Vec::new(),
        errors: Vec::new(),
    };
    println!(
        "delta0 = {}  N0 = {}",
        c.delta0_exact.clone().unwrap_or_else(|| format_f64(c.delta0)),
        c.n0
    );
    run.report("calibration.json", &c)?;
    run.finish()
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
        }
    };
    let r = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Conjugacy(a) => conjugacy(a),
        Command::Oracle(a) => oracle(a),
        Command::Calibrate(a) => calibrate_cmd(a),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
