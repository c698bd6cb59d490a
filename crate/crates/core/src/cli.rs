//! Command-line front end. Parameters come from flags, then from an optional
//! flat `key=value` config file, then from defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::convex::{c1_convergence_probe, check_splice_convexity, grid, smooth_at, Expr, PiecewiseExpr};
use crate::error::{Error, Result};
use crate::frame::{structure_from_complex, ComplexStructure};
use crate::profiles::{EpsilonParams, GProfile, HProfile, ProfileDocument, ProfileSet, VProfile, WarpProfile};
use crate::verify::{
    verify_aregularity, verify_chn_suite, verify_negative_curvature, ARegularityGridSpec, ChnGridSpec, ScanGridSpec,
    ScanRow,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_PARAMETER: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "WARPCURV_THREADS";

pub const CSV_HEADER: &str = "r,v,h,k21,k32_c0,k32_cmax,kr1,kr2,mixed_cmax,supK";

#[derive(Debug, Parser)]
#[command(name = "warpcurv", version, about = "Build warping profiles and verify curvature bounds")]
pub struct Cli {
    /// Flat key=value file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving reports.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identity and pinching suite on the complex hyperbolic reference metric.
    VerifyChn(ChnArgs),
    /// Build v and h and scan the sectional curvature over all six intervals.
    Scan(ScanArgs),
    /// Covariant-derivative closure, tail identities and negativity for v and g.
    Aregular(ARegularArgs),
    /// Smooth a user-supplied convex splice and certify the result.
    SmoothDemo(SmoothArgs),
    /// Write a profile as JSON (and optionally sampled as CSV).
    ExportProfile(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ChnArgs {
    #[arg(long)]
    pub rmin: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub grid: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub pairs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Clone)]
pub struct ProfileArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    /// Window half-width; defaults to the practical value for `eps`.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Mollifier half-width; defaults to the practical value for `eps`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Enforce the asymptotic window sizes.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Pass iff the global max stays below this (capped at 0).
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Points per interval.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub grid: Option<u64>,
    #[arg(long)]
    pub window_points: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ARegularArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub grid: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// Slope of the left piece at the corner.
    #[arg(long, allow_hyphen_values = true)]
    pub left_slope: Option<f64>,
    /// Slope of the right piece at the corner.
    #[arg(long, allow_hyphen_values = true)]
    pub right_slope: Option<f64>,
    /// Common second derivative of both pieces.
    #[arg(long)]
    pub curvature: Option<f64>,
    /// Lower bound certified for the smoothed second derivative; below `curvature`.
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub corner: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub points: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// One of v, h, g.
    #[arg(long)]
    pub name: Option<String>,
    /// Also sample the profile at this many points between its outer breakpoints.
    #[arg(long)]
    pub csv_points: Option<u64>,
}

/// Flat `key=value` settings; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", n + 1)))?;
            entries.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `flag`, else the file entry `key`, else `default`.
    pub fn resolve<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.lookup(key, flag)?.unwrap_or(default))
    }

    pub fn lookup<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.entries
            .get(key)
            .map(|s| s.parse::<T>().map_err(|e| Error::Parse(format!("config key {key} = {s:?}: {e}"))))
            .transpose()
    }

    pub fn flag(&self, key: &str, flag: bool) -> Result<bool> {
        Ok(flag || self.lookup::<bool>(key, None)?.unwrap_or(false))
    }
}

/// Fully resolved parameters of one run, echoed into its report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub out_dir: PathBuf,
    pub settings: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a RunConfig,
    report: &'a T,
}

/// Writes `contents` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path.file_name().ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 200);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cols = [r.r, r.v, r.h, r.k21, r.k32_c0, r.k32_cmax, r.kr1, r.kr2, r.mixed_cmax, r.sup_k];
        out.push_str(&cols.map(fmt17).join(","));
        out.push('\n');
    }
    out
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_PARAMETER,
    }
}

/// Caps the global thread pool from [`THREADS_ENV`] when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Parameter(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // a pool that is already initialized keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

struct Session {
    config: ConfigFile,
    run: RunConfig,
}

impl Session {
    fn record(&mut self, key: &str, value: impl Display) {
        self.run.settings.insert(key.to_string(), value.to_string());
    }

    fn get<T: FromStr + Display + Clone>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let v = self.config.resolve(key, flag, default)?;
        self.record(key, &v);
        Ok(v)
    }

    fn path(&self, file: &str) -> PathBuf {
        self.run.out_dir.join(file)
    }

    fn write_json<T: Serialize>(&self, file: &str, report: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(&Envelope { config: &self.run, report })
            .map_err(|e| Error::Parse(format!("serializing {file}: {e}")))?;
        let path = self.path(file);
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    fn params(&mut self, args: &ProfileArgs) -> Result<EpsilonParams> {
        let eps = self.get("eps", args.eps, 0.1)?;
        let strict = self.config.flag("strict", args.strict)?;
        self.record("strict", strict);
        let base = if strict { EpsilonParams::strict(eps)? } else { EpsilonParams::practical(eps)? };
        let sigma = self.get("sigma", args.sigma, base.sigma)?;
        let delta = self.get("delta", args.delta, base.delta.min(sigma / 50.0))?;
        EpsilonParams::new(eps, sigma, delta, strict)
    }
}

fn verdict(pass: bool) -> i32 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    configure_threads()?;
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let out_dir = config.resolve("out-dir", cli.out_dir.clone(), PathBuf::from("."))?;
    let name = match &cli.command {
        Command::VerifyChn(_) => "verify-chn",
        Command::Scan(_) => "scan",
        Command::Aregular(_) => "aregular",
        Command::SmoothDemo(_) => "smooth-demo",
        Command::ExportProfile(_) => "export-profile",
    };
    let mut s = Session { config, run: RunConfig { command: name.into(), out_dir, settings: BTreeMap::new() } };
    match &cli.command {
        Command::VerifyChn(a) => cmd_verify_chn(&mut s, a),
        Command::Scan(a) => cmd_scan(&mut s, a),
        Command::Aregular(a) => cmd_aregular(&mut s, a),
        Command::SmoothDemo(a) => cmd_smooth_demo(&mut s, a),
        Command::ExportProfile(a) => cmd_export_profile(&mut s, a),
    }
}

fn positive(key: &str, n: u64) -> Result<usize> {
    if n == 0 {
        return Err(Error::Parameter(format!("{key} must be positive")));
    }
    usize::try_from(n).map_err(|_| Error::Parameter(format!("{key} = {n} is too large")))
}

fn cmd_verify_chn(s: &mut Session, a: &ChnArgs) -> Result<i32> {
    let d = ChnGridSpec::default();
    let spec = ChnGridSpec {
        rmin: s.get("rmin", a.rmin, d.rmin)?,
        rmax: s.get("rmax", a.rmax, d.rmax)?,
        points: positive("grid", s.get("grid", a.grid, d.points as u64)?)?,
        pairs: positive("pairs", s.get("pairs", a.pairs, d.pairs as u64)?)?,
        seed: s.get("seed", a.seed, d.seed)?,
        ..d
    };
    let report = verify_chn_suite(&spec)?;
    let path = s.write_json("chn_report.json", &report)?;
    println!(
        "pinching [{}, {}] over {} r-values; {}",
        report.pinching.min,
        report.pinching.max,
        spec.points,
        if report.pass { "PASS" } else { "FAIL" }
    );
    for c in report.checks.iter().filter(|c| !c.pass) {
        println!("  failed: {} (margin {:e})", c.name, c.margin);
    }
    println!("report: {}", path.display());
    Ok(verdict(report.pass))
}

fn cmd_scan(s: &mut Session, a: &ScanArgs) -> Result<i32> {
    let params = s.params(&a.profile)?;
    let threshold = s.config.lookup("threshold", a.threshold)?;
    if let Some(t) = threshold {
        s.record("threshold", t);
    }
    let d = ScanGridSpec::default();
    let spec = ScanGridSpec {
        points: positive("grid", s.get("grid", a.grid, d.points as u64)?)?,
        window_points: s.get("window-points", a.window_points, d.window_points as u64)? as usize,
        ..d
    };
    let v = VProfile::build(&params)?;
    let h = HProfile::build(&params, &v)?;
    let report = verify_negative_curvature(&v, &h, threshold, &spec)?;
    for p in [&v as &dyn WarpProfile, &h] {
        let doc = ProfileDocument::from_profile(p).to_json()?;
        write_atomic(&s.path(&format!("profile_{}.json", p.name())), doc.as_bytes())?;
    }
    write_atomic(&s.path("scan.csv"), scan_csv(&report.rows).as_bytes())?;
    let path = s.write_json("scan_report.json", &report)?;
    for iv in &report.intervals {
        println!(
            "step {} [{:.6}, {:.6}]: max K {:e} at r = {} (c23 = {})",
            iv.step, iv.lo, iv.hi, iv.max_k, iv.argmax_r, iv.argmax_c23
        );
    }
    for c in report.inequalities.iter().filter(|c| !c.check.pass) {
        println!("  step {} inequality failed: {} (margin {:e})", c.step, c.check.name, c.check.margin);
    }
    println!("global max K = {:e}; {}", report.global_max, if report.pass { "PASS" } else { "FAIL" });
    println!("report: {}", path.display());
    Ok(verdict(report.pass))
}

fn cmd_aregular(s: &mut Session, a: &ARegularArgs) -> Result<i32> {
    let kmax = s.get("kmax", a.kmax, 3)?;
    if kmax > crate::symbolic::MAX_CLOSURE_ORDER {
        return Err(Error::Guard(format!("kmax = {kmax} exceeds {}", crate::symbolic::MAX_CLOSURE_ORDER)));
    }
    let params = s.params(&a.profile)?;
    let d = ARegularityGridSpec::default();
    let points = positive("grid", s.get("grid", a.grid, d.tail_points as u64)?)?;
    let spec = ARegularityGridSpec { tail_points: points, step_points: points, ..d };
    let set = ProfileSet::build(&params)?;
    let sc = structure_from_complex(&ComplexStructure::standard(2)?)?;
    let report = verify_aregularity(&set.v, &set.g, &sc, kmax, &spec)?;
    let table = crate::symbolic::covariant_derivative_closure(kmax, &sc)?;
    let mut text = String::from("# order-0 components\n");
    for (name, p) in crate::symbolic::TailComponents::new().named() {
        text.push_str(&format!("k=0 {name}: {p}\n"));
    }
    for k in 0..=kmax {
        text.push_str(&format!("# order {k}: frame indices 0 = dr, 1..3 = Y1..Y3\n"));
        for (idx, p) in table.nonzero(k) {
            text.push_str(&format!("k={k} {idx:?}: {p}\n"));
        }
    }
    write_atomic(&s.path("closure_table.txt"), text.as_bytes())?;
    let path = s.write_json("aregular_report.json", &report)?;
    for l in &report.closure {
        println!("k={}: {} components, bound {:e}", l.k, l.nonzero_components, l.coefficient_bound);
    }
    for n in &report.negativity {
        println!("step {} [{:.6}, {:.6}]: max K {:e}", n.step, n.lo, n.hi, n.max_k);
    }
    println!("A-regularity {}", if report.pass { "PASS" } else { "FAIL" });
    println!("report: {}", path.display());
    Ok(verdict(report.pass))
}

#[derive(Serialize)]
struct SmoothReport {
    splice_convex: bool,
    window: (f64, f64),
    second_derivative_margin: f64,
    exact_outside_window: bool,
    c1_probe: Vec<crate::convex::ProbeRow>,
    c1_monotone: bool,
    pass: bool,
}

fn cmd_smooth_demo(s: &mut Session, a: &SmoothArgs) -> Result<i32> {
    let left = s.get("left-slope", a.left_slope, -1.0)?;
    let right = s.get("right-slope", a.right_slope, 1.0)?;
    let curvature = s.get("curvature", a.curvature, 0.5)?;
    let k = s.get("bound", a.bound, 0.25)?;
    let c = s.get("corner", a.corner, 0.0)?;
    let sigma = s.get("sigma", a.sigma, 0.1)?;
    let delta = s.get("delta", a.delta, sigma / 100.0)?;
    let points = positive("points", s.get("points", a.points, 1000)?)?;
    if !(left < right) {
        return Err(Error::SlopeOrder { left, right });
    }
    if !(0.0 <= k && k < curvature && sigma > 0.0 && delta > 0.0 && delta < sigma / 4.0) {
        return Err(Error::Parameter("need 0 <= bound < curvature and 0 < delta < sigma/4".into()));
    }
    let piece = |slope: f64| Expr::Quadratic { coeff: curvature / 2.0, center: c }.plus(Expr::line(slope, c, 0.0));
    let f1 = PiecewiseExpr::single(piece(left));
    let f2 = PiecewiseExpr::single(piece(right));
    let base = f1.splice(c, &f2)?;
    let sf = smooth_at(&base, c, delta, sigma)?;
    let margin = sf.second_derivative_margin(c - sigma, c + sigma, points, k);
    let span = 4.0 * sigma;
    let rows: Vec<[f64; 5]> = grid(c - span, c + span, points)
        .map(|r| {
            let b = base.eval(r);
            let m = sf.eval(r);
            [r, b[0], m[0], m[1], m[2]]
        })
        .collect();
    let exact = rows.iter().filter(|x| (x[0] - c).abs() >= sigma).all(|x| x[1] == x[2]);
    let deltas: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|d| d * sigma).collect();
    let probe = c1_convergence_probe(&base, c, sigma, &deltas)?;
    let monotone = probe.windows(2).all(|w| {
        w[1].sup_value <= w[0].sup_value + 1e-12 && w[1].sup_slope <= w[0].sup_slope + 1e-12
    });
    let report = SmoothReport {
        splice_convex: check_splice_convexity(&f1, &f2, c),
        window: (c - sigma, c + sigma),
        second_derivative_margin: margin,
        exact_outside_window: exact,
        c1_probe: probe,
        c1_monotone: monotone,
        pass: false,
    };
    let pass = report.splice_convex && margin > 0.0 && exact && monotone;
    let report = SmoothReport { pass, ..report };
    let mut csv = String::from("r,base,smoothed,d1,d2\n");
    for row in &rows {
        csv.push_str(&row.map(fmt17).join(","));
        csv.push('\n');
    }
    write_atomic(&s.path("smooth.csv"), csv.as_bytes())?;
    let path = s.write_json("smooth_report.json", &report)?;
    println!(
        "min f'' - k on window: {:e}; exact outside: {exact}; C1 monotone: {monotone}; {}",
        margin,
        if pass { "PASS" } else { "FAIL" }
    );
    println!("report: {}", path.display());
    Ok(verdict(pass))
}

fn cmd_export_profile(s: &mut Session, a: &ExportArgs) -> Result<i32> {
    let params = s.params(&a.profile)?;
    let name = s.get("name", a.name.clone(), "v".to_string())?;
    let v = VProfile::build(&params)?;
    let h = HProfile::build(&params, &v)?;
    let g;
    let profile: &dyn WarpProfile = match name.as_str() {
        "v" => &v,
        "h" => &h,
        "g" => {
            g = GProfile::build(&params, &h)?;
            &g
        }
        other => return Err(Error::Parameter(format!("unknown profile {other:?}; expected v, h or g"))),
    };
    let doc = ProfileDocument::from_profile(profile);
    let path = s.path(&format!("profile_{name}.json"));
    write_atomic(&path, doc.to_json()?.as_bytes())?;
    if let Some(n) = s.config.lookup::<u64>("csv-points", a.csv_points)? {
        let n = positive("csv-points", n)?;
        let bps: Vec<f64> = profile.breakpoints().values().copied().filter(|x| x.is_finite()).collect();
        let lo = bps.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
        let hi = bps.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
        let mut csv = String::from("r,log,dlog,d2log\n");
        for r in grid(lo, hi, n) {
            let j = profile.log_function().eval(r);
            csv.push_str(&[r, j[0], j[1], j[2]].map(fmt17).join(","));
            csv.push('\n');
        }
        write_atomic(&s.path(&format!("profile_{name}.csv")), csv.as_bytes())?;
    }
    println!("profile {name} written to {}", path.display());
    Ok(EXIT_PASS)
}
