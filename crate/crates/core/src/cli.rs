//! Command-line front end: `gen`, `prolong`, `discover` and `converge`.
//!
//! Parameters come from three layers, later ones winning: the defaults of
//! the selected benchmark, a flat `key = value` config file, and flags.
//! Exit codes: 0 on success, 2 when discovery finds an empty nullspace,
//! 1 on any error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::ansatz::{render_generator, GeneratorCoefficients};
use crate::error::{Error, Result};
use crate::experiments::{convergence_sweep, discover, Benchmark, BenchmarkKind, Discovery, Pipeline};
use crate::invariance::{display_basis, NullityPolicy, NullspaceMethod};
use crate::pointcloud::{format_float, load_csv, sample, save_csv, FamilySpec, PointCloud, SamplingMode, System};
use crate::prolong::{prolongate, ProlongParams, ProlongedCloud};

/// Generator coefficients below this magnitude are shown as zero.
pub const DISPLAY_TOL: f64 = 1e-4;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_SYMMETRY: i32 = 2;

/// Fully resolved parameters of one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub benchmark: Option<BenchmarkKind>,
    pub system: Option<System>,
    /// Per-axis sample counts; `None` means the benchmark default.
    pub sizes: Option<Vec<usize>>,
    pub fix_c: Option<f64>,
    pub limit_cycle: bool,
    pub iid_rows: Option<usize>,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub pipeline: Pipeline,
    pub trials: usize,
    /// Sizes of a convergence sweep, one factor list per entry.
    pub sweep: Option<Vec<Vec<usize>>>,
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_benchmark(None)
    }
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

fn parse_list(v: &str) -> std::result::Result<Vec<usize>, String> {
    v.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| format!("bad size `{s}`")))
        .collect()
}

fn parse_sweep(v: &str) -> std::result::Result<Vec<Vec<usize>>, String> {
    v.split(',')
        .map(|entry| {
            entry
                .split('x')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| format!("bad sweep entry `{entry}`"))
                })
                .collect()
        })
        .collect()
}

fn parse_policy(v: &str) -> std::result::Result<NullityPolicy, String> {
    let (kind, arg) = v
        .split_once(':')
        .ok_or("policy must be threshold:<x>, gap:<x> or fixed:<r>")?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number `{s}`"));
    match kind.trim() {
        "threshold" => Ok(NullityPolicy::Threshold(num(arg)?)),
        "gap" => Ok(NullityPolicy::Gap { floor: num(arg)? }),
        "fixed" => arg
            .trim()
            .parse::<usize>()
            .map(NullityPolicy::Fixed)
            .map_err(|_| format!("bad nullity `{arg}`")),
        other => Err(format!("unknown policy `{other}`")),
    }
}

fn policy_text(p: &NullityPolicy) -> String {
    match p {
        NullityPolicy::Threshold(t) => format!("threshold:{}", format_float(*t)),
        NullityPolicy::Gap { floor } => format!("gap:{}", format_float(*floor)),
        NullityPolicy::Fixed(r) => format!("fixed:{r}"),
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse `{v}`"))
}

impl RunConfig {
    /// Defaults of `kind`, or of the linear ODE family when no benchmark is chosen.
    pub fn for_benchmark(kind: Option<BenchmarkKind>) -> Self {
        Self {
            benchmark: kind,
            system: None,
            sizes: None,
            fix_c: None,
            limit_cycle: false,
            iid_rows: None,
            seed: 0,
            input: None,
            output: None,
            pipeline: Pipeline::for_benchmark(kind.unwrap_or(BenchmarkKind::LinearOde)),
            trials: 20,
            sweep: None,
            timings: false,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        let pipe = &mut self.pipeline;
        match key {
            "benchmark" => self.benchmark = Some(BenchmarkKind::from_name(v).map_err(|e| e.to_string())?),
            "system" => self.system = Some(System::from_name(v).ok_or_else(|| format!("unknown system `{v}`"))?),
            "sizes" => self.sizes = Some(parse_list(v)?),
            "fix_c" => self.fix_c = Some(parse_num(v)?),
            "limit_cycle" => self.limit_cycle = parse_bool(v)?,
            "iid_rows" => self.iid_rows = Some(parse_num(v)?),
            "seed" => self.seed = parse_num(v)?,
            "input" => self.input = Some(PathBuf::from(v)),
            "output" => self.output = Some(PathBuf::from(v)),
            "p" => pipe.p = parse_num(v)?,
            "prolong_k" => pipe.prolong.k = parse_num(v)?,
            "prolong_l" => pipe.prolong.degree = parse_num(v)?,
            "prolong_stop_tol" => pipe.prolong.stop_tol = parse_num(v)?,
            "prolong_max_iter" => pipe.prolong.max_iter = parse_num(v)?,
            "normal_k" => pipe.normal.k = parse_num(v)?,
            "normal_l" => pipe.normal.degree = parse_num(v)?,
            "normal_stop_tol" => pipe.normal.stop_tol = parse_num(v)?,
            "normal_max_iter" => pipe.normal.max_iter = parse_num(v)?,
            "degree" => pipe.degree = parse_num(v)?,
            "policy" => pipe.policy = parse_policy(v)?,
            "method" => {
                pipe.method = match v {
                    "direct" => NullspaceMethod::Direct,
                    "gram" => NullspaceMethod::Gram,
                    _ => return Err(format!("unknown method `{v}`")),
                }
            }
            "normalize_blocks" => pipe.normalize_blocks = parse_bool(v)?,
            "max_degenerate_fraction" => pipe.max_degenerate_fraction = parse_num(v)?,
            "unisolvence_limit" => pipe.unisolvence_limit = parse_num(v)?,
            "trials" => self.trials = parse_num(v)?,
            "sweep" => self.sweep = Some(parse_sweep(v)?),
            "timings" => self.timings = parse_bool(v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. A `benchmark` key
    /// (or `benchmark_override`) selects the defaults the other keys modify.
    pub fn from_text(text: &str, benchmark_override: Option<BenchmarkKind>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: idx + 1,
                message: "expected `key = value`".into(),
            })?;
            pairs.push((idx + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let mut kind = benchmark_override;
        if kind.is_none() {
            if let Some((line, _, v)) = pairs.iter().rev().find(|(_, k, _)| k == "benchmark") {
                kind = Some(BenchmarkKind::from_name(v).map_err(|e| Error::Config {
                    line: *line,
                    message: e.to_string(),
                })?);
            }
        }
        let mut cfg = Self::for_benchmark(kind);
        for (line, k, v) in &pairs {
            if k == "benchmark" && benchmark_override.is_some() {
                continue;
            }
            cfg.set(k, v)
                .map_err(|message| Error::Config { line: *line, message })?;
        }
        Ok(cfg)
    }

    /// Every key, so that `from_text(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# liesym run configuration\n");
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        let pipe = &self.pipeline;
        if let Some(b) = self.benchmark {
            put("benchmark", b.name().into());
        }
        if let Some(s) = self.system {
            put("system", s.name().into());
        }
        if let Some(s) = &self.sizes {
            put("sizes", join(s, ","));
        }
        if let Some(c) = self.fix_c {
            put("fix_c", format_float(c));
        }
        put("limit_cycle", self.limit_cycle.to_string());
        if let Some(r) = self.iid_rows {
            put("iid_rows", r.to_string());
        }
        put("seed", self.seed.to_string());
        if let Some(p) = &self.input {
            put("input", p.display().to_string());
        }
        if let Some(p) = &self.output {
            put("output", p.display().to_string());
        }
        put("p", pipe.p.to_string());
        put("prolong_k", pipe.prolong.k.to_string());
        put("prolong_l", pipe.prolong.degree.to_string());
        put("prolong_stop_tol", format_float(pipe.prolong.stop_tol));
        put("prolong_max_iter", pipe.prolong.max_iter.to_string());
        put("normal_k", pipe.normal.k.to_string());
        put("normal_l", pipe.normal.degree.to_string());
        put("normal_stop_tol", format_float(pipe.normal.stop_tol));
        put("normal_max_iter", pipe.normal.max_iter.to_string());
        put("degree", pipe.degree.to_string());
        put("policy", policy_text(&pipe.policy));
        put(
            "method",
            match pipe.method {
                NullspaceMethod::Direct => "direct".into(),
                NullspaceMethod::Gram => "gram".into(),
            },
        );
        put("normalize_blocks", pipe.normalize_blocks.to_string());
        put("max_degenerate_fraction", format_float(pipe.max_degenerate_fraction));
        put("unisolvence_limit", format_float(pipe.unisolvence_limit));
        put("trials", self.trials.to_string());
        if let Some(s) = &self.sweep {
            let entries: Vec<String> = s.iter().map(|f| join(f, "x")).collect();
            put("sweep", entries.join(","));
        }
        put("timings", self.timings.to_string());
        out
    }

    /// Benchmark whose sampler `gen` uses, from `system` and its modifiers.
    fn sampled_kind(&self) -> Result<BenchmarkKind> {
        let Some(system) = self.system else {
            return self
                .benchmark
                .ok_or_else(|| Error::InvalidParameter("missing --system (or --benchmark)".into()));
        };
        Ok(match system {
            System::LinearOde if self.fix_c.is_some() => BenchmarkKind::LinearOdeFixed,
            System::LinearOde => BenchmarkKind::LinearOde,
            System::StuartLandau if self.limit_cycle => BenchmarkKind::StuartLandauFixed,
            System::StuartLandau => BenchmarkKind::StuartLandau,
            System::Transport => BenchmarkKind::Transport,
            System::Heat => BenchmarkKind::Heat,
        })
    }

    pub fn family_spec(&self) -> Result<FamilySpec> {
        let kind = self.sampled_kind()?;
        let factors = self.sizes.clone().unwrap_or_else(|| kind.default_factors());
        let mut spec = match (kind, self.fix_c) {
            (BenchmarkKind::LinearOdeFixed, Some(c)) => {
                let n = match factors.as_slice() {
                    [n] => *n,
                    _ => return Err(Error::InvalidParameter("fixed-C sampling takes one size".into())),
                };
                FamilySpec::linear_ode_fixed(n, c, self.seed)
            }
            _ => kind.family(&factors, self.seed)?,
        };
        if let Some(rows) = self.iid_rows {
            spec.mode = SamplingMode::Iid { rows };
        }
        Ok(spec)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "liesym",
    version,
    about = "Discover Lie point symmetries from scattered solution samples"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "LIESYM_THREADS")]
    pub threads: Option<usize>,
    /// Flat `key = value` config file applied before flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the resolved configuration here before running.
    #[arg(long, global = true)]
    pub save_config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a benchmark solution family and write it as CSV.
    Gen(GenArgs),
    /// Lift a cloud to jet level p.
    Prolong(ProlongArgs),
    /// Build the invariance system and report its nullspace.
    Discover(DiscoverArgs),
    /// Mean principal-angle error over trials for a range of sizes.
    Converge(ConvergeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// linear_ode, stuart_landau, transport or heat.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Sample count for every sampled axis.
    #[arg(long)]
    pub n: Option<usize>,
    /// Per-axis counts, comma separated.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Hold the linear ODE constant at this value.
    #[arg(long)]
    pub fix_c: Option<f64>,
    /// Stuart-Landau limit cycle (C1 = 0, C2 = 1).
    #[arg(long)]
    pub limit_cycle: bool,
    /// Draw this many independent rows instead of a tensor grid.
    #[arg(long)]
    pub iid: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct StageArgs {
    /// Target jet level.
    #[arg(short)]
    pub p: Option<usize>,
    /// Stencil size of the prolongation stage.
    #[arg(short)]
    pub k: Option<usize>,
    /// Chart degree of the prolongation stage.
    #[arg(short)]
    pub l: Option<usize>,
    #[arg(long)]
    pub max_degenerate: Option<f64>,
    #[arg(long)]
    pub unisolvence: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProlongArgs {
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub stage: StageArgs,
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Output CSV; a `.diagnostics.csv` sidecar is written next to it.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    /// Cloud CSV at any level up to p; without it the benchmark is sampled.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub benchmark: Option<String>,
    #[command(flatten)]
    pub stage: StageArgs,
    #[arg(long)]
    pub normal_k: Option<usize>,
    #[arg(long)]
    pub normal_l: Option<usize>,
    /// Ansatz degree.
    #[arg(long)]
    pub degree: Option<usize>,
    /// threshold:<theta>, gap:<floor> or fixed:<r>.
    #[arg(long)]
    pub policy: Option<String>,
    /// direct or gram.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub normalize: bool,
    /// Directory for spectrum.csv and generators.txt.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Sizes, comma separated; multi-factor sizes joined by `x` (`15x10x10`).
    #[arg(long)]
    pub sizes: Option<String>,
    /// Add the wall-clock runtime_s column.
    #[arg(long)]
    pub timings: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn usage(e: String) -> Error {
    Error::InvalidParameter(e)
}

fn benchmark_flag(name: &Option<String>) -> Result<Option<BenchmarkKind>> {
    name.as_deref().map(BenchmarkKind::from_name).transpose()
}

fn apply_stage(cfg: &mut RunConfig, stage: &StageArgs) {
    let pipe = &mut cfg.pipeline;
    if let Some(p) = stage.p {
        pipe.p = p;
    }
    if let Some(k) = stage.k {
        pipe.prolong.k = k;
    }
    if let Some(l) = stage.l {
        pipe.prolong.degree = l;
    }
    if let Some(f) = stage.max_degenerate {
        pipe.max_degenerate_fraction = f;
    }
    if let Some(u) = stage.unisolvence {
        pipe.unisolvence_limit = u;
    }
}

/// Resolves defaults, the config file and flags into one config.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let flag_kind = match &cli.command {
        Command::Gen(a) => benchmark_flag(&a.benchmark)?,
        Command::Prolong(a) => benchmark_flag(&a.benchmark)?,
        Command::Discover(a) => benchmark_flag(&a.benchmark)?,
        Command::Converge(a) => benchmark_flag(&a.benchmark)?,
    };
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut cfg = RunConfig::from_text(&text, flag_kind)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Gen(a) => {
            if let Some(s) = &a.system {
                cfg.set("system", s).map_err(usage)?;
            }
            if let Some(s) = &a.sizes {
                cfg.set("sizes", s).map_err(usage)?;
            }
            if a.fix_c.is_some() {
                cfg.fix_c = a.fix_c;
            }
            cfg.limit_cycle |= a.limit_cycle;
            if let Some(n) = a.n {
                let kind = cfg.sampled_kind()?;
                cfg.sizes = Some(vec![n; kind.factor_count()]);
            }
            if a.iid.is_some() {
                cfg.iid_rows = a.iid;
            }
            if a.output.is_some() {
                cfg.output = a.output.clone();
            }
        }
        Command::Prolong(a) => {
            apply_stage(&mut cfg, &a.stage);
            if a.input.is_some() {
                cfg.input = a.input.clone();
            }
            if a.output.is_some() {
                cfg.output = a.output.clone();
            }
        }
        Command::Discover(a) => {
            apply_stage(&mut cfg, &a.stage);
            if let Some(k) = a.normal_k {
                cfg.pipeline.normal.k = k;
            }
            if let Some(l) = a.normal_l {
                cfg.pipeline.normal.degree = l;
            }
            if let Some(d) = a.degree {
                cfg.pipeline.degree = d;
            }
            if let Some(p) = &a.policy {
                cfg.set("policy", p).map_err(usage)?;
            }
            if let Some(m) = &a.method {
                cfg.set("method", m).map_err(usage)?;
            }
            cfg.pipeline.normalize_blocks |= a.normalize;
            if a.input.is_some() {
                cfg.input = a.input.clone();
            }
            if a.output.is_some() {
                cfg.output = a.output.clone();
            }
        }
        Command::Converge(a) => {
            if let Some(t) = a.trials {
                cfg.trials = t;
            }
            if let Some(s) = &a.sizes {
                cfg.set("sweep", s).map_err(usage)?;
            }
            cfg.timings |= a.timings;
            if a.output.is_some() {
                cfg.output = a.output.clone();
            }
        }
    }
    Ok(cfg)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cloud_csv(cloud: &PointCloud) -> Result<String> {
    let mut buf = Vec::new();
    cloud.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV is ASCII"))
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<i32> {
    let cloud = sample(&cfg.family_spec()?)?;
    match &cfg.output {
        Some(path) => {
            save_csv(&cloud, path)?;
            eprintln!(
                "wrote {} rows x {} columns (d = {}) to {}",
                cloud.n_points(),
                cloud.dim(),
                cloud.layout().d(),
                path.display()
            );
        }
        None => write_output(None, &cloud_csv(&cloud)?)?,
    }
    Ok(EXIT_OK)
}

/// `level,row,status,condition,iterations,converged`, one line per input row
/// of every lifted level; `row` indexes that level's input.
pub fn diagnostics_csv(prolonged: &ProlongedCloud) -> String {
    let mut out = String::from("level,row,status,condition,iterations,converged\n");
    for level in &prolonged.diagnostics {
        let n = level.points.len() + level.dropped.len();
        let mut kept = level.points.iter();
        for row in 0..n {
            if level.dropped.binary_search(&row).is_ok() {
                writeln!(out, "{},{row},dropped,,,", level.from_level).unwrap();
            } else {
                let d = kept.next().expect("kept rows match diagnostics");
                writeln!(
                    out,
                    "{},{row},kept,{},{},{}",
                    level.from_level,
                    format_float(d.condition),
                    d.iterations,
                    d.converged
                )
                .unwrap();
            }
        }
    }
    out
}

fn sidecar(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.diagnostics.csv"))
}

fn load_input(cfg: &RunConfig) -> Result<PointCloud> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("missing --input".into()))?;
    load_csv(path)
}

pub fn cmd_prolong(cfg: &RunConfig) -> Result<i32> {
    let cloud = load_input(cfg)?;
    let mut params = ProlongParams::new(cfg.pipeline.prolong);
    params.max_degenerate_fraction = cfg.pipeline.max_degenerate_fraction;
    params.unisolvence_limit = cfg.pipeline.unisolvence_limit;
    if cloud.level() < cfg.pipeline.p {
        params.gmls.validate(cloud.layout().d())?;
    }
    let prolonged = prolongate(&cloud, cfg.pipeline.p, &params)?;
    match &cfg.output {
        Some(path) => {
            save_csv(&prolonged.cloud, path)?;
            fs::write(sidecar(path), diagnostics_csv(&prolonged))?;
        }
        None => write_output(None, &cloud_csv(&prolonged.cloud)?)?,
    }
    for level in &prolonged.diagnostics {
        eprintln!(
            "level {} -> {}: kept {}, dropped {}, unconverged {}, max condition {:.3e}",
            level.from_level,
            level.from_level + 1,
            level.points.len(),
            level.dropped.len(),
            level.unconverged(),
            level.max_condition()
        );
    }
    Ok(EXIT_OK)
}

/// Sparse display form of the detected nullspace, one generator per line.
/// Basis columns are orthonormal, so an absolute pivot tolerance is safe.
pub fn render_nullspace(found: &Discovery) -> Vec<String> {
    display_basis(&found.report.basis(), DISPLAY_TOL)
        .into_iter()
        .map(|row| render_generator(&GeneratorCoefficients::new(DVector::from_vec(row)), &found.basis))
        .collect()
}

pub fn cmd_discover(cfg: &RunConfig) -> Result<i32> {
    let cloud = match (&cfg.input, cfg.benchmark) {
        (Some(path), _) => load_csv(path)?,
        (None, Some(_)) => sample(&cfg.family_spec()?)?,
        (None, None) => return Err(Error::InvalidParameter("missing --input or --benchmark".into())),
    };
    let found = discover(&cloud, &cfg.pipeline)?;
    let generators = render_nullspace(&found);
    let relative = found.report.relative();
    let mut summary = format!("nullity {}", found.report.nullity);
    if let Some(g) = found.report.gap_ratio {
        write!(summary, ", gap ratio {g:.3e}").unwrap();
    }
    write!(
        summary,
        ", smallest relative singular value {:.3e}, dropped {:.1}% of {} points",
        relative.last().copied().unwrap_or(f64::NAN),
        100.0 * found.dropped_fraction(),
        found.n_points
    )
    .unwrap();
    eprintln!("{summary}");
    let mut text = String::new();
    for g in &generators {
        writeln!(text, "{g}").unwrap();
    }
    print!("{text}");
    if let Some(dir) = &cfg.output {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("spectrum.csv"), found.report.to_csv())?;
        fs::write(dir.join("generators.txt"), &text)?;
    }
    Ok(if found.report.nullity == 0 {
        EXIT_NO_SYMMETRY
    } else {
        EXIT_OK
    })
}

pub fn cmd_converge(cfg: &RunConfig) -> Result<i32> {
    let kind = cfg
        .benchmark
        .ok_or_else(|| Error::InvalidParameter("missing --benchmark".into()))?;
    let mut template = Benchmark::new(kind, cfg.seed);
    template.pipeline = cfg.pipeline.clone();
    if let Some(rows) = cfg.iid_rows {
        template.spec.mode = SamplingMode::Iid { rows };
    }
    let sizes = cfg.sweep.clone().unwrap_or_else(|| kind.sweep_sizes());
    let sweep = convergence_sweep(&template, &sizes, cfg.trials, cfg.seed)?;
    write_output(cfg.output.as_deref(), &sweep.to_csv(cfg.timings))?;
    if let Some(s) = sweep.slope {
        eprintln!("log-log slope {s:.3}");
    }
    Ok(EXIT_OK)
}

pub fn run(cli: &Cli) -> Result<i32> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, in which case that one is used.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let cfg = resolve(cli)?;
    if let Some(path) = &cli.save_config {
        fs::write(path, cfg.to_text())?;
    }
    match &cli.command {
        Command::Gen(_) => cmd_gen(&cfg),
        Command::Prolong(_) => cmd_prolong(&cfg),
        Command::Discover(_) => cmd_discover(&cfg),
        Command::Converge(_) => cmd_converge(&cfg),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
