//! Benchmark pipelines, reference nullspaces and convergence sweeps.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::ansatz::{monomial_ansatz, prolong_ansatz, AnsatzBasis};
use crate::error::{Error, Result};
use crate::invariance::{
    build_system, nullspace, observable_jets, orthonormalize, principal_angles, theoretical_rate, NullityPolicy,
    NullspaceMethod, SpectralReport, SubspaceAngle,
};
use crate::jetspace::JetLayout;
use crate::pointcloud::{format_float, sample, FamilySpec, PointCloud, SamplingMode};
use crate::prolong::{prolongate, LevelDiagnostics, ProlongParams};
use crate::tangent::{GmlsParams, UNISOLVENCE_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchmarkKind {
    LinearOde,
    LinearOdeFixed,
    StuartLandau,
    StuartLandauFixed,
    Transport,
    Heat,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 6] = [
        Self::LinearOde,
        Self::LinearOdeFixed,
        Self::StuartLandau,
        Self::StuartLandauFixed,
        Self::Transport,
        Self::Heat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::LinearOde => "linear_ode",
            Self::LinearOdeFixed => "linear_ode_fixed",
            Self::StuartLandau => "stuart_landau",
            Self::StuartLandauFixed => "stuart_landau_fixed",
            Self::Transport => "transport",
            Self::Heat => "heat",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownBenchmark(s.to_string()))
    }

    /// Sampling spec for a size given as per-axis factors.
    pub fn family(self, factors: &[usize], seed: u64) -> Result<FamilySpec> {
        let bad = || {
            Error::InvalidParameter(format!(
                "{} takes {} size factor(s), got {factors:?}",
                self.name(),
                self.factor_count()
            ))
        };
        if factors.len() != self.factor_count() || factors.contains(&0) {
            return Err(bad());
        }
        Ok(match self {
            Self::LinearOde => FamilySpec::linear_ode(factors[0], factors[1], seed),
            Self::LinearOdeFixed => FamilySpec::linear_ode_fixed(factors[0], 1.0, seed),
            Self::StuartLandau => {
                // A three-axis tensor grid leaves almost no stencil unisolvent
                // for a quartic chart, so rows are drawn independently.
                let mut spec = FamilySpec::stuart_landau(factors[0], factors[1], factors[2], seed);
                spec.mode = SamplingMode::Iid {
                    rows: factors.iter().product(),
                };
                spec
            }
            Self::StuartLandauFixed => FamilySpec::stuart_landau_fixed(factors[0], seed),
            Self::Transport => FamilySpec::transport(factors[0], seed),
            Self::Heat => FamilySpec::heat(factors[0], seed),
        })
    }

    pub fn factor_count(self) -> usize {
        match self {
            Self::LinearOde => 2,
            Self::StuartLandau => 3,
            _ => 1,
        }
    }

    /// Desk-scale default size.
    pub fn default_factors(self) -> Vec<usize> {
        match self {
            Self::LinearOde => vec![100, 100],
            Self::LinearOdeFixed | Self::StuartLandauFixed => vec![1280],
            Self::StuartLandau => vec![40, 28, 26],
            Self::Transport | Self::Heat => vec![160],
        }
    }

    /// Default sizes for convergence sweeps.
    pub fn sweep_sizes(self) -> Vec<Vec<usize>> {
        match self {
            Self::LinearOde => vec![vec![25, 25], vec![50, 50], vec![100, 100]],
            Self::LinearOdeFixed | Self::StuartLandauFixed => (0..8).map(|q| vec![80 << q]).collect(),
            Self::StuartLandau => vec![vec![15, 10, 10], vec![20, 14, 13], vec![30, 20, 19], vec![40, 28, 26]],
            Self::Transport | Self::Heat => vec![vec![56], vec![80], vec![113], vec![160]],
        }
    }
}

/// Closed-form symmetry subspace of a benchmark in the shared monomial
/// ansatz of degree 1, orthonormalized (`K x r`).
pub fn reference_nullspace(kind: BenchmarkKind) -> DMatrix<f64> {
    let (k, vectors): (usize, Vec<Vec<(usize, f64)>>) = match kind {
        // d/dx and u d/du.
        BenchmarkKind::LinearOde => (6, vec![vec![(0, 1.0)], vec![(5, 1.0)]]),
        // Only their sum preserves u = e^x.
        BenchmarkKind::LinearOdeFixed => (6, vec![vec![(0, 1.0), (5, 1.0)]]),
        // Time translation and the rotation y d/dx - x d/dy.
        BenchmarkKind::StuartLandau => (12, vec![vec![(0, 1.0)], vec![(7, 1.0), (10, -1.0)]]),
        BenchmarkKind::StuartLandauFixed => (12, vec![vec![(0, 1.0), (7, 1.0), (10, -1.0)]]),
        // f (d/dt - d/dx) for f in {1, t, x, u}.
        BenchmarkKind::Transport => (12, (0..4).map(|j| vec![(j, 1.0), (4 + j, -1.0)]).collect()),
        // 2t d/dt + x d/dx - u d/du.
        BenchmarkKind::Heat => (12, vec![vec![(1, 2.0), (6, 1.0), (11, -1.0)]]),
    };
    let mut m = DMatrix::zeros(k, vectors.len());
    for (c, v) in vectors.iter().enumerate() {
        for &(i, x) in v {
            m[(i, c)] = x;
        }
    }
    orthonormalize(&m)
}

/// Everything after sampling: prolongation, ansatz, normals and nullspace.
#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    pub prolong: GmlsParams,
    pub normal: GmlsParams,
    pub degree: usize,
    pub p: usize,
    pub policy: NullityPolicy,
    pub method: NullspaceMethod,
    pub normalize_blocks: bool,
    pub max_degenerate_fraction: f64,
    pub unisolvence_limit: f64,
}

impl Pipeline {
    /// Stage parameters used for `kind` in the experiments.
    pub fn for_benchmark(kind: BenchmarkKind) -> Self {
        let (prolong, normal, p) = match kind {
            BenchmarkKind::LinearOde => (GmlsParams::new(15, 4), GmlsParams::new(25, 3), 1),
            BenchmarkKind::LinearOdeFixed | BenchmarkKind::StuartLandauFixed => {
                (GmlsParams::new(10, 3), GmlsParams::new(10, 3), 1)
            }
            BenchmarkKind::StuartLandau => (GmlsParams::new(40, 4), GmlsParams::new(40, 4), 1),
            BenchmarkKind::Transport => (GmlsParams::new(20, 3), GmlsParams::new(20, 3), 1),
            BenchmarkKind::Heat => (GmlsParams::new(40, 4), GmlsParams::new(40, 4), 2),
        };
        Self {
            prolong,
            normal,
            degree: 1,
            p,
            policy: NullityPolicy::default(),
            method: NullspaceMethod::default(),
            normalize_blocks: false,
            // With K = Y every chart is an interpolation, and on a tensor grid
            // most stencils are degenerate; the survivors still carry the answer.
            max_degenerate_fraction: if kind == BenchmarkKind::LinearOde { 1.0 } else { 0.25 },
            unisolvence_limit: UNISOLVENCE_LIMIT,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Discovery {
    pub report: SpectralReport,
    pub basis: AnsatzBasis,
    /// Rows of the input cloud.
    pub n_points: usize,
    pub prolong_diagnostics: Vec<LevelDiagnostics>,
    pub normal_dropped: usize,
}

impl Discovery {
    /// Fraction of input rows that did not reach the stacked system.
    pub fn dropped_fraction(&self) -> f64 {
        let prolong: usize = self.prolong_diagnostics.iter().map(|d| d.dropped.len()).sum();
        (prolong + self.normal_dropped) as f64 / self.n_points as f64
    }
}

/// Runs the pipeline on a cloud of any level up to `pipe.p`.
pub fn discover(cloud: &PointCloud, pipe: &Pipeline) -> Result<Discovery> {
    let mut params = ProlongParams::new(pipe.prolong);
    params.max_degenerate_fraction = pipe.max_degenerate_fraction;
    params.unisolvence_limit = pipe.unisolvence_limit;
    let prolonged = prolongate(cloud, pipe.p, &params)?;
    let jets = observable_jets(&prolonged.cloud)?;
    let base = JetLayout::new(jets.layout.d(), jets.layout.m(), 0)?;
    let basis = monomial_ansatz(&base, pipe.degree);
    let ansatz = prolong_ansatz(&basis, pipe.p)?;
    let (system, bundle) = build_system(
        &jets,
        &ansatz,
        &pipe.normal,
        pipe.max_degenerate_fraction,
        pipe.unisolvence_limit,
        pipe.normalize_blocks,
    )?;
    Ok(Discovery {
        report: nullspace(&system, pipe.policy, pipe.method)?,
        basis,
        n_points: cloud.n_points(),
        prolong_diagnostics: prolonged.diagnostics,
        normal_dropped: bundle.dropped.len(),
    })
}

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub kind: BenchmarkKind,
    pub spec: FamilySpec,
    pub pipeline: Pipeline,
}

impl Benchmark {
    pub fn new(kind: BenchmarkKind, seed: u64) -> Self {
        Self::with_factors(kind, &kind.default_factors(), seed).expect("default factors are valid")
    }

    pub fn with_factors(kind: BenchmarkKind, factors: &[usize], seed: u64) -> Result<Self> {
        Ok(Self {
            kind,
            spec: kind.family(factors, seed)?,
            pipeline: Pipeline::for_benchmark(kind),
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.spec.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: SamplingMode) -> Self {
        self.spec.mode = mode;
        self
    }

    /// Dimension of the solution manifold.
    pub fn manifold_dim(&self) -> usize {
        self.spec.axes.iter().filter(|a| a.fixed.is_none()).count()
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkRun {
    pub discovery: Discovery,
    /// Angles between the reference and the same number of smallest right singular vectors.
    pub angle: SubspaceAngle,
    pub reference: DMatrix<f64>,
    pub runtime_s: f64,
}

/// Sample, prolong, build the invariance system and compare against the reference.
pub fn run_benchmark(b: &Benchmark) -> Result<BenchmarkRun> {
    let start = Instant::now();
    let cloud = sample(&b.spec)?;
    let discovery = discover(&cloud, &b.pipeline)?;
    let reference = reference_nullspace(b.kind);
    if reference.nrows() != discovery.report.k() {
        return Err(Error::DimensionMismatch {
            what: "reference nullspace",
            expected: discovery.report.k(),
            found: reference.nrows(),
        });
    }
    let angle = principal_angles(&reference, &discovery.report.smallest(reference.ncols()))?;
    Ok(BenchmarkRun {
        discovery,
        angle,
        reference,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub factors: Vec<usize>,
    pub n_points: usize,
    pub trials: usize,
    /// Trials that finished without error.
    pub completed: usize,
    pub mean_sin_theta: f64,
    pub std: f64,
    pub theory_rescaled: f64,
    pub runtime_s: f64,
}

impl ConvergenceRow {
    pub fn partial(&self) -> bool {
        self.completed < self.trials
    }
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub kind: BenchmarkKind,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log mean` against `log N`.
    pub slope: Option<f64>,
}

impl Sweep {
    /// One row per size. Wall-clock times make output irreproducible, so the
    /// `runtime_s` column is only written when `timings` is set.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = String::from("N,trials,mean_sin_theta,std,theory_rescaled,");
        out.push_str(if timings {
            "runtime_s,completed\n"
        } else {
            "completed\n"
        });
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{},{},",
                r.n_points,
                r.trials,
                format_float(r.mean_sin_theta),
                format_float(r.std),
                format_float(r.theory_rescaled),
            )
            .unwrap();
            if timings {
                write!(out, "{},", format_float(r.runtime_s)).unwrap();
            }
            writeln!(out, "{}", r.completed).unwrap();
        }
        out
    }
}

/// Seed of trial `t` in a sweep started from `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add(trial as u64)
}

pub fn convergence_sweep(template: &Benchmark, sizes: &[Vec<usize>], trials: usize, seed: u64) -> Result<Sweep> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for factors in sizes {
        let mut bench = template.clone();
        bench.spec = template.kind.family(factors, seed)?;
        if let SamplingMode::Iid { .. } = template.spec.mode {
            bench.spec.mode = SamplingMode::Iid {
                rows: factors.iter().product(),
            };
        }
        let results: Vec<Result<BenchmarkRun>> = (0..trials)
            .into_par_iter()
            .map(|t| run_benchmark(&bench.clone().with_seed(trial_seed(seed, t))))
            .collect();
        let ok: Vec<&BenchmarkRun> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        let n_points = match bench.spec.mode {
            SamplingMode::Grid => bench
                .spec
                .axes
                .iter()
                .map(|a| if a.fixed.is_some() { 1 } else { a.count })
                .product(),
            SamplingMode::Iid { rows } => rows,
        };
        let errs: Vec<f64> = ok.iter().map(|r| r.angle.max_sine()).collect();
        let mean = if errs.is_empty() {
            f64::NAN
        } else {
            errs.iter().sum::<f64>() / errs.len() as f64
        };
        let std = if errs.len() > 1 {
            (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let runtime = if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| r.runtime_s).sum::<f64>() / ok.len() as f64
        };
        rows.push(ConvergenceRow {
            factors: factors.clone(),
            n_points,
            trials,
            completed: ok.len(),
            mean_sin_theta: mean,
            std,
            theory_rescaled: 0.0,
            runtime_s: runtime,
        });
    }
    let (degree, dim) = (template.pipeline.prolong.degree, template.manifold_dim());
    if let Some(first) = rows.first().cloned() {
        let scale = first.mean_sin_theta / theoretical_rate(first.n_points as f64, degree, dim);
        for r in &mut rows {
            r.theory_rescaled = scale * theoretical_rate(r.n_points as f64, degree, dim);
        }
    }
    let slope = loglog_slope(
        &rows
            .iter()
            .map(|r| (r.n_points as f64, r.mean_sin_theta))
            .collect::<Vec<_>>(),
    );
    Ok(Sweep {
        kind: template.kind,
        rows,
        slope,
    })
}

/// Least-squares slope of `log y` against `log x` over finite positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
