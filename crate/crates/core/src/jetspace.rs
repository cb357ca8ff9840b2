//! Multi-index algebra and the coordinate layout of jet spaces.
//!
//! Coordinates of a level-`k` jet point are laid out as
//! `x_1..x_d, u_1..u_m`, followed by one block per derivative order
//! `r = 1..=k`. Inside a block the dependent index varies slowest and the
//! multi-indices of order `r` follow in graded-lexicographic order, so for
//! `d = 2, m = 1` the level-2 layout reads `t, x, u, u_t, u_x, u_tt, u_tx, u_xx`.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Exponent vector `J = (j_1, .., j_d)` of a partial derivative.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn unit(d: usize, axis: usize) -> Self {
        let mut e = vec![0; d];
        e[axis] = 1;
        Self(e)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn plus_unit(&self, axis: usize) -> Self {
        let mut e = self.0.clone();
        e[axis] += 1;
        Self(e)
    }

    pub fn minus_unit(&self, axis: usize) -> Option<Self> {
        let mut e = self.0.clone();
        if e[axis] == 0 {
            return None;
        }
        e[axis] -= 1;
        Some(Self(e))
    }

    /// Last axis carrying a nonzero exponent.
    pub fn last_axis(&self) -> Option<usize> {
        self.0.iter().rposition(|&e| e > 0)
    }

    /// Graded-lexicographic comparison: lower order first, then larger
    /// leading exponents first.
    pub fn graded_cmp(&self, other: &Self) -> Ordering {
        self.order().cmp(&other.order()).then_with(|| other.0.cmp(&self.0))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All multi-indices over `d` variables of order exactly `r`, graded-lex.
pub fn multi_indices(d: usize, r: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(binomial(d + r - 1, r));
    let mut buf = vec![0u32; d];
    fill(&mut buf, 0, r as u32, &mut out);
    out
}

fn fill(buf: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == buf.len() {
        buf[pos] = remaining;
        out.push(MultiIndex(buf.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        buf[pos] = e;
        fill(buf, pos + 1, remaining - e, out);
    }
    buf[pos] = 0;
}

/// All multi-indices of order `0..=max_order`, graded-lex.
pub fn multi_indices_up_to(d: usize, max_order: usize) -> Vec<MultiIndex> {
    (0..=max_order).flat_map(|r| multi_indices(d, r)).collect()
}

/// A single coordinate of a jet point.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Coordinate {
    Independent(usize),
    /// `u_{index, derivative}`; a zero multi-index is the dependent variable itself.
    Dependent {
        index: usize,
        derivative: MultiIndex,
    },
}

impl Coordinate {
    pub fn order(&self) -> usize {
        match self {
            Coordinate::Independent(_) => 0,
            Coordinate::Dependent { derivative, .. } => derivative.order(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetLayout {
    d: usize,
    m: usize,
    p: usize,
    levels: Vec<Vec<MultiIndex>>,
}

impl JetLayout {
    pub fn new(d: usize, m: usize, p: usize) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(Error::InvalidLayout(format!(
                "need at least one independent and one dependent variable (d={d}, m={m})"
            )));
        }
        let levels = (0..=p).map(|r| multi_indices(d, r)).collect();
        Ok(Self { d, m, p, levels })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Same variables, different prolongation order.
    pub fn with_order(&self, p: usize) -> Self {
        Self::new(self.d, self.m, p).expect("dimensions already validated")
    }

    pub fn indices_of_order(&self, r: usize) -> &[MultiIndex] {
        &self.levels[r]
    }

    /// `D_k = d + m + sum_{r=1..k} C(d+r-1, r) m`.
    pub fn dimension(&self, k: usize) -> Result<usize> {
        if k > self.p {
            return Err(Error::LevelOutOfRange { level: k, max: self.p });
        }
        Ok(self.d + self.m + (1..=k).map(|r| binomial(self.d + r - 1, r) * self.m).sum::<usize>())
    }

    /// Dimension at the top level `p`.
    pub fn ambient_dim(&self) -> usize {
        self.dimension(self.p).expect("p is in range")
    }

    /// First offset of the block holding derivatives of order `r`
    /// (`r = 0` addresses the dependent variables).
    pub fn block_start(&self, r: usize) -> usize {
        if r == 0 {
            self.d
        } else {
            self.dimension(r - 1).expect("order checked by caller")
        }
    }

    pub fn offset(&self, dependent: usize, j: &MultiIndex) -> Result<usize> {
        let r = j.order();
        if dependent >= self.m || j.dim() != self.d || r > self.p {
            return Err(Error::UnknownCoordinate(format!("u{}_J{}", dependent + 1, j)));
        }
        let level = &self.levels[r];
        let pos = level
            .binary_search_by(|probe| probe.graded_cmp(j))
            .map_err(|_| Error::UnknownCoordinate(format!("u{}_J{}", dependent + 1, j)))?;
        Ok(self.block_start(r) + dependent * level.len() + pos)
    }

    pub fn independent_offset(&self, axis: usize) -> Result<usize> {
        if axis >= self.d {
            return Err(Error::UnknownCoordinate(format!("x{}", axis + 1)));
        }
        Ok(axis)
    }

    /// Inverse of [`JetLayout::offset`] over the full level-`p` layout.
    pub fn coordinate(&self, offset: usize) -> Result<Coordinate> {
        if offset < self.d {
            return Ok(Coordinate::Independent(offset));
        }
        for r in 0..=self.p {
            let start = self.block_start(r);
            let per = self.levels[r].len();
            let end = start + per * self.m;
            if offset < end {
                let rel = offset - start;
                return Ok(Coordinate::Dependent {
                    index: rel / per,
                    derivative: self.levels[r][rel % per].clone(),
                });
            }
        }
        Err(Error::UnknownCoordinate(format!("offset {offset}")))
    }

    /// Enumerates the level-`k` ordering.
    pub fn coordinates(&self, k: usize) -> Result<Vec<Coordinate>> {
        let n = self.dimension(k)?;
        (0..n).map(|o| self.coordinate(o)).collect()
    }
}

pub fn jet_dimension(layout: &JetLayout, k: usize) -> Result<usize> {
    layout.dimension(k)
}

pub fn coordinate_offset(layout: &JetLayout, dependent: usize, j: &MultiIndex) -> Result<usize> {
    layout.offset(dependent, j)
}

/// Display names for independent and dependent variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableNames {
    pub independent: Vec<String>,
    pub dependent: Vec<String>,
}

impl VariableNames {
    /// Conventional names: `(x, u)`, `(t, x; u)`, `(t; x, y)`, otherwise numbered.
    pub fn conventional(n: usize, m: usize) -> Self {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let (independent, dependent) = match (n, m) {
            (1, 1) => (own(&["x"]), own(&["u"])),
            (2, 1) => (own(&["t", "x"]), own(&["u"])),
            (1, 2) => (own(&["t"]), own(&["x", "y"])),
            _ => (
                (1..=n).map(|i| format!("x{i}")).collect(),
                (1..=m).map(|i| format!("u{i}")).collect(),
            ),
        };
        Self { independent, dependent }
    }

    /// Name of a coordinate, e.g. `u_tx` for `(u, (1,1))` with independents `t, x`.
    pub fn coordinate_name(&self, c: &Coordinate) -> String {
        match c {
            Coordinate::Independent(i) => self.independent[*i].clone(),
            Coordinate::Dependent { index, derivative } => {
                let base = &self.dependent[*index];
                if derivative.order() == 0 {
                    return base.clone();
                }
                let mut s = format!("{base}_");
                for (axis, &e) in derivative.entries().iter().enumerate() {
                    for _ in 0..e {
                        s.push_str(&self.independent[axis]);
                    }
                }
                s
            }
        }
    }
}
