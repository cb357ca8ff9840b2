//! Scattered samples on solution manifolds: column roles, synthetic
//! generators for the benchmark systems and CSV persistence.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::jetspace::{Coordinate, JetLayout, MultiIndex};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ColumnRole {
    Independent(usize),
    FreeConstant(usize),
    Dependent(usize),
    Jet(usize, MultiIndex),
}

impl ColumnRole {
    pub fn token(&self) -> String {
        match self {
            ColumnRole::Independent(i) => format!("x{}", i + 1),
            ColumnRole::FreeConstant(i) => format!("C{}", i + 1),
            ColumnRole::Dependent(b) => format!("u{}", b + 1),
            ColumnRole::Jet(b, j) => format!("u{}_J{}", b + 1, j),
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        let bad = || Error::UnknownRole(token.to_string());
        let number = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(bad()),
            }
        };
        let t = token.trim();
        if let Some(rest) = t.strip_prefix('x') {
            return Ok(ColumnRole::Independent(number(rest)?));
        }
        if let Some(rest) = t.strip_prefix('C') {
            return Ok(ColumnRole::FreeConstant(number(rest)?));
        }
        if let Some(rest) = t.strip_prefix('u') {
            return match rest.split_once("_J") {
                None => Ok(ColumnRole::Dependent(number(rest)?)),
                Some((b, j)) => {
                    let inner = j.strip_prefix('(').and_then(|s| s.strip_suffix(')')).ok_or_else(bad)?;
                    let entries = inner
                        .split(',')
                        .map(|e| e.trim().parse::<u32>().map_err(|_| bad()))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(ColumnRole::Jet(number(b)?, MultiIndex::new(entries)))
                }
            };
        }
        Err(bad())
    }
}

impl fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

/// Roles of the first `layout.d()` columns decide which augmented
/// independents are free constants; the rest follow from the layout.
pub fn roles_for_level(layout: &JetLayout, level: usize, independent: &[ColumnRole]) -> Result<Vec<ColumnRole>> {
    if independent.len() != layout.d() {
        return Err(Error::DimensionMismatch {
            what: "independent roles",
            expected: layout.d(),
            found: independent.len(),
        });
    }
    let mut roles = independent.to_vec();
    for c in layout.coordinates(level)?.into_iter().skip(layout.d()) {
        if let Coordinate::Dependent { index, derivative } = c {
            roles.push(if derivative.order() == 0 {
                ColumnRole::Dependent(index)
            } else {
                ColumnRole::Jet(index, derivative)
            });
        }
    }
    Ok(roles)
}

#[derive(Clone, Debug)]
pub struct PointCloud {
    data: DMatrix<f64>,
    roles: Vec<ColumnRole>,
    layout: JetLayout,
    level: usize,
    pub seed: Option<u64>,
}

impl PointCloud {
    pub fn new(data: DMatrix<f64>, roles: Vec<ColumnRole>, layout: JetLayout, level: usize) -> Result<Self> {
        let cloud = Self::new_unchecked_rows(data, roles, layout, level)?;
        let dups = duplicate_rows(&cloud.data);
        if !dups.is_empty() {
            return Err(Error::DuplicateRows(dups));
        }
        Ok(cloud)
    }

    /// Validates shape and roles but not row distinctness.
    fn new_unchecked_rows(data: DMatrix<f64>, roles: Vec<ColumnRole>, layout: JetLayout, level: usize) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::EmptyCloud);
        }
        let dim = layout.dimension(level)?;
        if data.ncols() != dim || roles.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "point cloud columns",
                expected: dim,
                found: data.ncols().max(roles.len()),
            });
        }
        let expected = roles_for_level(&layout, level, &roles[..layout.d()])?;
        let mut seen_x = 0;
        let mut seen_c = 0;
        for (i, r) in roles[..layout.d()].iter().enumerate() {
            match r {
                ColumnRole::Independent(k) if *k == seen_x => seen_x += 1,
                ColumnRole::FreeConstant(k) if *k == seen_c => seen_c += 1,
                other => {
                    return Err(Error::MalformedHeader(format!(
                        "column {} has role {other}, expected an independent or free constant",
                        i + 1
                    )))
                }
            }
        }
        if seen_x == 0 {
            return Err(Error::MalformedHeader("no independent variable column".into()));
        }
        if expected != roles {
            return Err(Error::MalformedHeader(
                "role tokens do not match the declared layout".into(),
            ));
        }
        Ok(Self {
            data,
            roles,
            layout,
            level,
            seed: None,
        })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn roles(&self) -> &[ColumnRole] {
        &self.roles
    }

    pub fn layout(&self) -> &JetLayout {
        &self.layout
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n_points(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }

    /// Number of true independent variables (free constants excluded).
    pub fn n_independent(&self) -> usize {
        self.roles[..self.layout.d()]
            .iter()
            .filter(|r| matches!(r, ColumnRole::Independent(_)))
            .count()
    }

    pub fn n_free(&self) -> usize {
        self.layout.d() - self.n_independent()
    }

    /// Cloud with extra columns appended at the next level. Only used by
    /// prolongation, which guarantees the new columns follow the layout.
    pub(crate) fn with_level(data: DMatrix<f64>, base: &PointCloud, level: usize) -> Result<Self> {
        let roles = roles_for_level(&base.layout, level, &base.roles[..base.layout.d()])?;
        let mut out = Self::new_unchecked_rows(data, roles, base.layout.clone(), level)?;
        out.seed = base.seed;
        Ok(out)
    }

    /// Same data under a layout of prolongation order `p`.
    pub fn with_layout_order(&self, p: usize) -> Result<Self> {
        if p < self.level {
            return Err(Error::LevelOutOfRange {
                level: self.level,
                max: p,
            });
        }
        let mut out = self.clone();
        out.layout = self.layout.with_order(p);
        Ok(out)
    }

    /// Keeps only the listed rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let data = self.data.select_rows(rows);
        let mut out = Self::new_unchecked_rows(data, self.roles.clone(), self.layout.clone(), self.level)?;
        out.seed = self.seed;
        Ok(out)
    }

    pub fn header(&self) -> String {
        format!(
            "# liesym v1; d={}; m={}; p={}; level={}",
            self.layout.d(),
            self.layout.m(),
            self.layout.p(),
            self.level
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header())?;
        let tokens: Vec<String> = self.roles.iter().map(|r| r.token()).collect();
        writeln!(w, "{}", tokens.join(","))?;
        let mut line = String::new();
        for i in 0..self.n_points() {
            line.clear();
            for j in 0..self.dim() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format_float(self.data[(i, j)]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::MalformedHeader("empty file".into()))?;
        let (d, m, p, level) = parse_header(header)?;
        let (_, role_line) = lines
            .next()
            .ok_or_else(|| Error::MalformedHeader("missing role line".into()))?;
        let roles = role_line
            .split(',')
            .map(ColumnRole::parse)
            .collect::<Result<Vec<_>>>()?;
        let layout = JetLayout::new(d, m, p)?;
        let width = roles.len();
        let mut values = Vec::new();
        let mut rows = 0;
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(Error::RaggedRow {
                    line: idx + 1,
                    expected: width,
                    found: fields.len(),
                });
            }
            for f in fields {
                let v = f.trim().parse::<f64>().map_err(|_| Error::BadNumber {
                    line: idx + 1,
                    token: f.to_string(),
                })?;
                values.push(v);
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::EmptyCloud);
        }
        let data = DMatrix::from_row_slice(rows, width, &values);
        Self::new(data, roles, layout, level)
    }
}

/// Shortest representation that round-trips (at most 17 significant digits).
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn parse_header(line: &str) -> Result<(usize, usize, usize, usize)> {
    let bad = |msg: &str| Error::MalformedHeader(format!("{msg}: `{line}`"));
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| bad("header must start with `#`"))?;
    let mut parts = body.split(';').map(str::trim);
    if parts.next() != Some("liesym v1") {
        return Err(bad("expected `liesym v1` tag"));
    }
    let mut fields = [None; 4];
    for part in parts {
        let (k, v) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let v: usize = v.trim().parse().map_err(|_| bad("non-integer value"))?;
        let slot = match k.trim() {
            "d" => 0,
            "m" => 1,
            "p" => 2,
            "level" => 3,
            _ => return Err(bad("unknown key")),
        };
        fields[slot] = Some(v);
    }
    match fields {
        [Some(d), Some(m), Some(p), Some(level)] if level <= p => Ok((d, m, p, level)),
        _ => Err(bad("need d, m, p and level <= p")),
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<PointCloud> {
    PointCloud::parse_csv(&fs::read_to_string(path)?)
}

pub fn save_csv(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    cloud.write_csv(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Pairs `(first, later)` of bit-identical rows.
pub fn duplicate_rows(data: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = data.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let cmp = |a: usize, b: usize| {
        for j in 0..data.ncols() {
            let o = data[(a, j)].total_cmp(&data[(b, j)]);
            if o.is_ne() {
                return o;
            }
        }
        std::cmp::Ordering::Equal
    };
    order.sort_by(|&a, &b| cmp(a, b).then(a.cmp(&b)));
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || cmp(order[start], order[k]).is_ne() {
            for &later in &order[start + 1..k] {
                out.push((order[start], later));
            }
            start = k;
        }
    }
    out.sort_unstable();
    out
}

/// Uniform draw in `[0, 1)` addressed by `(seed, axis, index)`.
pub fn uniform(seed: u64, axis: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(axis);
    rng.set_word_pos(index as u128 * 2);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum System {
    LinearOde,
    StuartLandau,
    Transport,
    Heat,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::LinearOde => "linear_ode",
            System::StuartLandau => "stuart_landau",
            System::Transport => "transport",
            System::Heat => "heat",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "linear_ode" => Some(System::LinearOde),
            "stuart_landau" => Some(System::StuartLandau),
            "transport" => Some(System::Transport),
            "heat" => Some(System::Heat),
            _ => None,
        }
    }
}

/// One sampled parameter: either drawn uniformly on `[lo, hi]` or held fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    /// Number of grid values (ignored in i.i.d. mode and for fixed axes).
    pub count: usize,
    pub fixed: Option<f64>,
    pub free_constant: bool,
}

impl Axis {
    pub fn sampled(name: &str, lo: f64, hi: f64, count: usize) -> Self {
        Self {
            name: name.to_string(),
            lo,
            hi,
            count,
            fixed: None,
            free_constant: false,
        }
    }

    pub fn constant(name: &str, lo: f64, hi: f64, count: usize) -> Self {
        Self {
            free_constant: true,
            ..Self::sampled(name, lo, hi, count)
        }
    }

    pub fn fixed(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            lo: value,
            hi: value,
            count: 1,
            fixed: Some(value),
            free_constant: true,
        }
    }

    fn value(&self, seed: u64, axis: usize, index: usize) -> f64 {
        match self.fixed {
            Some(v) => v,
            None => self.lo + (self.hi - self.lo) * uniform(seed, axis as u64, index as u64),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    /// Independent draws per axis combined as a tensor product.
    Grid,
    /// Every row draws all axes independently.
    Iid { rows: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    pub system: System,
    pub axes: Vec<Axis>,
    pub mode: SamplingMode,
    pub seed: u64,
}

impl FamilySpec {
    /// `u = C e^x` with `x` on `[-1, 1]` and `C` on `[1, 2]`.
    pub fn linear_ode(nx: usize, nc: usize, seed: u64) -> Self {
        Self {
            system: System::LinearOde,
            axes: vec![Axis::sampled("x", -1.0, 1.0, nx), Axis::constant("C", 1.0, 2.0, nc)],
            mode: SamplingMode::Grid,
            seed,
        }
    }

    /// `u = C e^x` with `C` held fixed and `x` on `[-2, 1]`.
    pub fn linear_ode_fixed(n: usize, c: f64, seed: u64) -> Self {
        Self {
            system: System::LinearOde,
            axes: vec![Axis::sampled("x", -2.0, 1.0, n), Axis::fixed("C", c)],
            mode: SamplingMode::Grid,
            seed,
        }
    }

    /// Stuart-Landau family with `t` on `[0, pi]`, `C1` on `[0, 2 pi]`, `C2` on `[1, 1.3]`.
    pub fn stuart_landau(nt: usize, n1: usize, n2: usize, seed: u64) -> Self {
        Self {
            system: System::StuartLandau,
            axes: vec![
                Axis::sampled("t", 0.0, PI, nt),
                Axis::constant("C1", 0.0, 2.0 * PI, n1),
                Axis::constant("C2", 1.0, 1.3, n2),
            ],
            mode: SamplingMode::Grid,
            seed,
        }
    }

    /// Limit cycle `C1 = 0, C2 = 1`, with `t` covering one period.
    pub fn stuart_landau_fixed(n: usize, seed: u64) -> Self {
        Self {
            system: System::StuartLandau,
            axes: vec![
                Axis::sampled("t", 0.0, 2.0 * PI, n),
                Axis::fixed("C1", 0.0),
                Axis::fixed("C2", 1.0),
            ],
            mode: SamplingMode::Grid,
            seed,
        }
    }

    /// `u = sin(t + x)` on an `n x n` grid over `[-1/2, 1/2]^2`.
    pub fn transport(n: usize, seed: u64) -> Self {
        Self {
            system: System::Transport,
            axes: vec![Axis::sampled("t", -0.5, 0.5, n), Axis::sampled("x", -0.5, 0.5, n)],
            mode: SamplingMode::Grid,
            seed,
        }
    }

    /// Heat kernel on an `n x n` grid over `[1, 2]^2`.
    pub fn heat(n: usize, seed: u64) -> Self {
        Self {
            system: System::Heat,
            axes: vec![Axis::sampled("t", 1.0, 2.0, n), Axis::sampled("x", 1.0, 2.0, n)],
            mode: SamplingMode::Grid,
            seed,
        }
    }

    pub fn with_mode(mut self, mode: SamplingMode) -> Self {
        self.mode = mode;
        self
    }

    fn expected_axes(&self) -> &'static [&'static str] {
        match self.system {
            System::LinearOde => &["x", "C"],
            System::StuartLandau => &["t", "C1", "C2"],
            System::Transport | System::Heat => &["t", "x"],
        }
    }

    fn validate(&self) -> Result<()> {
        let names = self.expected_axes();
        if self.axes.len() != names.len() {
            return Err(Error::InvalidSpec(format!(
                "{} expects axes {names:?}",
                self.system.name()
            )));
        }
        for (axis, name) in self.axes.iter().zip(names) {
            if axis.fixed.is_some() {
                if !axis.free_constant {
                    return Err(Error::InvalidSpec(format!("axis {name} cannot be fixed")));
                }
                continue;
            }
            if !(axis.lo.is_finite() && axis.hi.is_finite()) || axis.hi <= axis.lo {
                return Err(Error::InvalidSpec(format!(
                    "empty range [{}, {}] for axis {name}",
                    axis.lo, axis.hi
                )));
            }
            if matches!(self.mode, SamplingMode::Grid) && axis.count == 0 {
                return Err(Error::InvalidSpec(format!("axis {name} has zero count")));
            }
        }
        if let SamplingMode::Iid { rows: 0 } = self.mode {
            return Err(Error::InvalidSpec("i.i.d. mode needs at least one row".into()));
        }
        Ok(())
    }

    /// Sampled parameter tuples in row order.
    fn parameter_rows(&self) -> Vec<Vec<f64>> {
        let k = self.axes.len();
        match self.mode {
            SamplingMode::Grid => {
                let values: Vec<Vec<f64>> = self
                    .axes
                    .iter()
                    .enumerate()
                    .map(|(a, axis)| {
                        let n = if axis.fixed.is_some() { 1 } else { axis.count };
                        (0..n).map(|i| axis.value(self.seed, a, i)).collect()
                    })
                    .collect();
                let total: usize = values.iter().map(Vec::len).product();
                let mut rows = Vec::with_capacity(total);
                let mut idx = vec![0usize; k];
                for _ in 0..total {
                    rows.push((0..k).map(|a| values[a][idx[a]]).collect());
                    for a in (0..k).rev() {
                        idx[a] += 1;
                        if idx[a] < values[a].len() {
                            break;
                        }
                        idx[a] = 0;
                    }
                }
                rows
            }
            SamplingMode::Iid { rows } => (0..rows)
                .map(|r| {
                    self.axes
                        .iter()
                        .enumerate()
                        .map(|(a, axis)| axis.value(self.seed, a, r))
                        .collect()
                })
                .collect(),
        }
    }

    /// Roles for the sampled (not fixed) axes, in order.
    fn independent_roles(&self) -> Vec<ColumnRole> {
        let mut x = 0;
        let mut c = 0;
        let mut roles = Vec::new();
        for axis in &self.axes {
            if axis.fixed.is_some() {
                continue;
            }
            if axis.free_constant {
                roles.push(ColumnRole::FreeConstant(c));
                c += 1;
            } else {
                roles.push(ColumnRole::Independent(x));
                x += 1;
            }
        }
        roles
    }
}

pub fn linear_ode_solution(x: f64, c: f64) -> f64 {
    c * x.exp()
}

/// Closed-form Stuart-Landau trajectory.
pub fn stuart_landau_solution(t: f64, c1: f64, c2: f64) -> Result<(f64, f64)> {
    if c2 == 0.0 {
        return Err(Error::InvalidSpec("C2 = 0 in Stuart-Landau solution".into()));
    }
    let radicand = 1.0 - (1.0 - 1.0 / (c2 * c2)) * (-2.0 * t).exp();
    if radicand <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "non-positive radicand {radicand} at t={t}, C2={c2}"
        )));
    }
    let r = radicand.sqrt();
    let phase = -t + c1;
    Ok((phase.cos() / r, phase.sin() / r))
}

pub fn transport_solution(t: f64, x: f64) -> f64 {
    (t + x).sin()
}

pub fn heat_solution(t: f64, x: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::InvalidSpec(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok((4.0 * PI * t).powf(-0.5) * (-x * x / (4.0 * t)).exp())
}

fn build(spec: &FamilySpec, m: usize, eval: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<PointCloud> {
    spec.validate()?;
    let roles_x = spec.independent_roles();
    let d = roles_x.len();
    let layout = JetLayout::new(d, m, 0)?;
    let sampled: Vec<usize> = (0..spec.axes.len()).filter(|&a| spec.axes[a].fixed.is_none()).collect();
    let rows = spec.parameter_rows();
    let mut values = Vec::with_capacity(rows.len() * (d + m));
    for row in &rows {
        values.extend(sampled.iter().map(|&a| row[a]));
        values.extend(eval(row)?);
    }
    let data = DMatrix::from_row_slice(rows.len(), d + m, &values);
    let roles = roles_for_level(&layout, 0, &roles_x)?;
    let mut cloud = PointCloud::new(data, roles, layout, 0)?;
    cloud.seed = Some(spec.seed);
    Ok(cloud)
}

fn expect_system(spec: &FamilySpec, system: System) -> Result<()> {
    if spec.system != system {
        return Err(Error::InvalidSpec(format!(
            "expected a {} spec, got {}",
            system.name(),
            spec.system.name()
        )));
    }
    Ok(())
}

pub fn sample_linear_ode(spec: &FamilySpec) -> Result<PointCloud> {
    expect_system(spec, System::LinearOde)?;
    build(spec, 1, |r| Ok(vec![linear_ode_solution(r[0], r[1])]))
}

pub fn sample_stuart_landau(spec: &FamilySpec) -> Result<PointCloud> {
    expect_system(spec, System::StuartLandau)?;
    build(spec, 2, |r| {
        let (x, y) = stuart_landau_solution(r[0], r[1], r[2])?;
        Ok(vec![x, y])
    })
}

pub fn sample_transport(spec: &FamilySpec) -> Result<PointCloud> {
    expect_system(spec, System::Transport)?;
    build(spec, 1, |r| Ok(vec![transport_solution(r[0], r[1])]))
}

pub fn sample_heat(spec: &FamilySpec) -> Result<PointCloud> {
    expect_system(spec, System::Heat)?;
    build(spec, 1, |r| Ok(vec![heat_solution(r[0], r[1])?]))
}

pub fn sample(spec: &FamilySpec) -> Result<PointCloud> {
    match spec.system {
        System::LinearOde => sample_linear_ode(spec),
        System::StuartLandau => sample_stuart_landau(spec),
        System::Transport => sample_transport(spec),
        System::Heat => sample_heat(spec),
    }
}
