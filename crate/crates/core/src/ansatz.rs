//! Polynomial ansatz for generators and an exact symbolic engine over
//! jet-coordinate polynomials (total derivatives and vector-field
//! prolongation).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::jetspace::{multi_indices_up_to, Coordinate, JetLayout, MultiIndex, VariableNames};

/// Sparse polynomial with exact rational coefficients in the coordinates of
/// a jet layout (variable `i` is the coordinate at offset `i`).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct JetPolynomial {
    terms: BTreeMap<Vec<u32>, Rational64>,
}

impl JetPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational64) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn var(offset: usize) -> Self {
        let mut e = vec![0; offset + 1];
        e[offset] = 1;
        let mut p = Self::zero();
        p.add_term(e, Rational64::one());
        p
    }

    /// `x^gamma` over the first `gamma.dim()` variables.
    pub fn monomial(gamma: &MultiIndex) -> Self {
        let mut p = Self::zero();
        p.add_term(gamma.entries().to_vec(), Rational64::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Rational64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    /// Canonical form drops trailing zero exponents.
    fn add_term(&mut self, mut exps: Vec<u32>, c: Rational64) {
        while exps.last() == Some(&0) {
            exps.pop();
        }
        if c.is_zero() {
            return;
        }
        let sum = self.terms.get(&exps).copied().unwrap_or_else(Rational64::zero) + c;
        if sum.is_zero() {
            self.terms.remove(&exps);
        } else {
            self.terms.insert(exps, sum);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-Rational64::one()))
    }

    pub fn scale(&self, c: Rational64) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            out.add_term(e.clone(), *v * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let n = ea.len().max(eb.len());
                let e: Vec<u32> = (0..n)
                    .map(|i| ea.get(i).copied().unwrap_or(0) + eb.get(i).copied().unwrap_or(0))
                    .collect();
                out.add_term(e, *ca * *cb);
            }
        }
        out
    }

    /// Partial derivative with respect to variable `v`.
    pub fn partial(&self, v: usize) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            let k = e.get(v).copied().unwrap_or(0);
            if k == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[v] -= 1;
            out.add_term(e2, *c * Rational64::from_integer(k as i64));
        }
        out
    }

    /// Variables with a nonzero exponent somewhere.
    pub fn variables(&self) -> Vec<usize> {
        let n = self.terms.keys().map(Vec::len).max().unwrap_or(0);
        (0..n)
            .filter(|&v| self.terms.keys().any(|e| e.get(v).copied().unwrap_or(0) > 0))
            .collect()
    }

    /// Largest variable offset present, plus one.
    pub fn support_len(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut t = c.to_f64().expect("finite rational");
                for (v, &k) in e.iter().enumerate() {
                    if k > 0 {
                        t *= z[v].powi(k as i32);
                    }
                }
                t
            })
            .sum()
    }

    /// Human-readable form, e.g. `1 + -1 * u_x^1 + -1 * x^1 u_xx^1`.
    pub fn render(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                out.push_str(" + ");
            }
            write!(out, "{c}").unwrap();
            let factors: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(v, k)| format!("{}^{k}", names[v]))
                .collect();
            if !factors.is_empty() {
                write!(out, " * {}", factors.join(" ")).unwrap();
            }
        }
        out
    }
}

/// `D_i f = df/dx_i + sum_{b,J} u_{b,J+e_i} df/du_{b,J}` with variables
/// addressed by offsets of `ring`.
pub fn total_derivative(f: &JetPolynomial, axis: usize, ring: &JetLayout) -> Result<JetPolynomial> {
    let mut out = JetPolynomial::zero();
    for v in f.variables() {
        let df = f.partial(v);
        match ring.coordinate(v)? {
            Coordinate::Independent(i) => {
                if i == axis {
                    out = out.add(&df);
                }
            }
            Coordinate::Dependent { index, derivative } => {
                if derivative.order() + 1 > ring.p() {
                    return Err(Error::OrderOverflow(ring.p()));
                }
                let target = ring.offset(index, &derivative.plus_unit(axis))?;
                out = out.add(&df.mul(&JetPolynomial::var(target)));
            }
        }
    }
    Ok(out)
}

/// Monomial basis `psi` shared by every component of the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzBasis {
    /// Independent variables of the ansatz (free constants included only on request).
    pub n: usize,
    pub m: usize,
    pub degree: usize,
    /// Exponents over `(x_1..x_n, u_1..u_m)`, graded-lex.
    pub monomials: Vec<MultiIndex>,
    pub names: VariableNames,
}

impl AnsatzBasis {
    pub fn kappa(&self) -> usize {
        self.monomials.len()
    }

    /// Number of unknown coefficients `K = kappa (n + m)`.
    pub fn size(&self) -> usize {
        self.kappa() * (self.n + self.m)
    }

    /// Column of coefficient `(slot, j)`; slots are `x_1..x_n, u_1..u_m`.
    pub fn column(&self, slot: usize, j: usize) -> usize {
        slot * self.kappa() + j
    }

    pub fn slot_name(&self, slot: usize) -> &str {
        if slot < self.n {
            &self.names.independent[slot]
        } else {
            &self.names.dependent[slot - self.n]
        }
    }

    pub fn monomial_name(&self, j: usize) -> String {
        let mut parts = Vec::new();
        for (v, &e) in self.monomials[j].entries().iter().enumerate() {
            let name = self.slot_name(v);
            match e {
                0 => {}
                1 => parts.push(name.to_string()),
                _ => parts.push(format!("{name}^{e}")),
            }
        }
        parts.join(" ")
    }
}

/// All monomials of total degree `<= degree` in the zeroth-level
/// coordinates of `layout`, with conventional variable names.
pub fn monomial_ansatz(layout: &JetLayout, degree: usize) -> AnsatzBasis {
    let names = VariableNames::conventional(layout.d(), layout.m());
    monomial_ansatz_named(layout, degree, names)
}

pub fn monomial_ansatz_named(layout: &JetLayout, degree: usize, names: VariableNames) -> AnsatzBasis {
    AnsatzBasis {
        n: layout.d(),
        m: layout.m(),
        degree,
        monomials: multi_indices_up_to(layout.d() + layout.m(), degree),
        names,
    }
}

#[derive(Clone, Copy, Debug)]
struct CompiledTerm {
    coef: f64,
    first: usize,
    count: usize,
}

/// Entries of the prolonged ansatz matrix, `D_p x K`.
#[derive(Clone, Debug)]
pub struct ProlongedAnsatz {
    pub layout: JetLayout,
    pub basis: AnsatzBasis,
    entries: Vec<JetPolynomial>,
    terms: Vec<Vec<CompiledTerm>>,
    factors: Vec<(usize, i32)>,
}

impl ProlongedAnsatz {
    pub fn rows(&self) -> usize {
        self.layout.ambient_dim()
    }

    pub fn cols(&self) -> usize {
        self.basis.size()
    }

    pub fn entry(&self, row: usize, col: usize) -> &JetPolynomial {
        &self.entries[row * self.cols() + col]
    }

    /// Row of the coordinate `u_{dep, j}`.
    pub fn row_of(&self, dep: usize, j: &MultiIndex) -> Result<usize> {
        self.layout.offset(dep, j)
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        self.layout
            .coordinates(self.layout.p())
            .expect("p in range")
            .iter()
            .map(|c| self.basis.names.coordinate_name(c))
            .collect()
    }

    /// Sum over columns weighted by `c`, i.e. one prolonged component of `X_c`.
    pub fn combine(&self, row: usize, c: &[Rational64]) -> JetPolynomial {
        let mut out = JetPolynomial::zero();
        for (col, w) in c.iter().enumerate() {
            if !w.is_zero() {
                out = out.add(&self.entry(row, col).scale(*w));
            }
        }
        out
    }

    pub fn evaluate_into(&self, z: &[f64], out: &mut DMatrix<f64>) {
        let cols = self.cols();
        for (idx, terms) in self.terms.iter().enumerate() {
            let mut acc = 0.0;
            for t in terms {
                let mut v = t.coef;
                for &(var, e) in &self.factors[t.first..t.first + t.count] {
                    v *= if e == 1 { z[var] } else { z[var].powi(e) };
                }
                acc += v;
            }
            out[(idx / cols, idx % cols)] = acc;
        }
    }

    /// One line per nonzero entry: `<coordinate> <column>: <polynomial>`.
    pub fn dump(&self) -> String {
        let names = self.coordinate_names();
        let mut out = String::new();
        for row in 0..self.rows() {
            for col in 0..self.cols() {
                let e = self.entry(row, col);
                if !e.is_zero() {
                    writeln!(out, "{} c{col}: {}", names[row], e.render(&names)).unwrap();
                }
            }
        }
        out
    }
}

/// Prolongs every basis vector field to order `p`. Each component
/// `u_{b,J}` is `D_J(eta_b - sum_k xi_k u_{b,e_k}) + sum_k xi_k u_{b,J+e_k}`,
/// formed in a ring one order higher; the order-`p + 1` terms must cancel.
pub fn prolong_ansatz(basis: &AnsatzBasis, p: usize) -> Result<ProlongedAnsatz> {
    let layout = JetLayout::new(basis.n, basis.m, p)?;
    let ring = layout.with_order(p + 1);
    let dim = layout.ambient_dim();
    let kappa = basis.kappa();
    let k_total = basis.size();
    let (n, m) = (basis.n, basis.m);
    let mut entries = vec![JetPolynomial::zero(); dim * k_total];

    let first_order: Vec<Vec<usize>> = (0..m)
        .map(|b| {
            (0..n)
                .map(|k| ring.offset(b, &MultiIndex::unit(n, k)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    for slot in 0..n + m {
        for j in 0..kappa {
            let col = slot * kappa + j;
            let psi = JetPolynomial::monomial(&basis.monomials[j]);
            let xi: Vec<JetPolynomial> = (0..n)
                .map(|k| if k == slot { psi.clone() } else { JetPolynomial::zero() })
                .collect();
            let eta: Vec<JetPolynomial> = (0..m)
                .map(|b| {
                    if n + b == slot {
                        psi.clone()
                    } else {
                        JetPolynomial::zero()
                    }
                })
                .collect();
            for (a, x) in xi.iter().enumerate() {
                entries[a * k_total + col] = x.clone();
            }
            for b in 0..m {
                entries[(n + b) * k_total + col] = eta[b].clone();
                // Characteristic Q_b = eta_b - sum_k xi_k u_{b,k}.
                let mut q = eta[b].clone();
                for (k, x) in xi.iter().enumerate() {
                    if !x.is_zero() {
                        q = q.sub(&x.mul(&JetPolynomial::var(first_order[b][k])));
                    }
                }
                let mut derived: HashMap<MultiIndex, JetPolynomial> = HashMap::new();
                derived.insert(MultiIndex::zero(n), q);
                for r in 1..=p {
                    for jj in layout.indices_of_order(r) {
                        let axis = jj.last_axis().expect("order >= 1");
                        let prev = &derived[&jj.minus_unit(axis).expect("positive entry")];
                        let dj = total_derivative(prev, axis, &ring)?;
                        let mut comp = dj.clone();
                        for (k, x) in xi.iter().enumerate() {
                            if !x.is_zero() {
                                let top = ring.offset(b, &jj.plus_unit(k))?;
                                comp = comp.add(&x.mul(&JetPolynomial::var(top)));
                            }
                        }
                        assert!(
                            comp.support_len() <= dim,
                            "order-{} terms failed to cancel in component u{}_J{}",
                            p + 1,
                            b + 1,
                            jj
                        );
                        let row = layout.offset(b, jj)?;
                        entries[row * k_total + col] = comp;
                        derived.insert(jj.clone(), dj);
                    }
                }
            }
        }
    }

    let mut terms = Vec::with_capacity(entries.len());
    let mut factors = Vec::new();
    for e in &entries {
        let mut list = Vec::new();
        for (exps, c) in e.terms() {
            let first = factors.len();
            for (v, &k) in exps.iter().enumerate() {
                if k > 0 {
                    factors.push((v, k as i32));
                }
            }
            list.push(CompiledTerm {
                coef: c.to_f64().expect("finite rational"),
                first,
                count: factors.len() - first,
            });
        }
        terms.push(list);
    }
    Ok(ProlongedAnsatz {
        layout,
        basis: basis.clone(),
        entries,
        terms,
        factors,
    })
}

/// Numeric `D_p x K` matrix of the prolonged ansatz at a jet point.
pub fn evaluate_prolonged(ansatz: &ProlongedAnsatz, z: &[f64]) -> Result<DMatrix<f64>> {
    if z.len() != ansatz.rows() {
        return Err(Error::DimensionMismatch {
            what: "jet point",
            expected: ansatz.rows(),
            found: z.len(),
        });
    }
    let mut out = DMatrix::zeros(ansatz.rows(), ansatz.cols());
    ansatz.evaluate_into(z, &mut out);
    Ok(out)
}

/// Coefficient vector of a generator, stored with unit 2-norm.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorCoefficients {
    c: DVector<f64>,
}

impl GeneratorCoefficients {
    pub fn new(c: DVector<f64>) -> Self {
        let norm = c.norm();
        Self {
            c: if norm > 0.0 { c / norm } else { c },
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        self.c.as_slice()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.c
    }
}

/// Coefficients below this magnitude are omitted when rendering.
pub const PRINT_THRESHOLD: f64 = 1e-8;

/// Renders `X = sum xi_i d_{x_i} + sum eta_b d_{u_b}`, e.g. `0.7071 ∂x + 0.7071 u ∂u`.
pub fn render_generator(c: &GeneratorCoefficients, basis: &AnsatzBasis) -> String {
    let mut out = String::new();
    for slot in 0..basis.n + basis.m {
        for j in 0..basis.kappa() {
            let v = c.as_slice()[basis.column(slot, j)];
            if v.abs() < PRINT_THRESHOLD {
                continue;
            }
            let magnitude = v.abs();
            let mut term = String::new();
            if (magnitude - 1.0).abs() >= 5e-5 {
                write!(term, "{magnitude:.4} ").unwrap();
            }
            let mono = basis.monomial_name(j);
            if !mono.is_empty() {
                write!(term, "{mono} ").unwrap();
            }
            write!(term, "∂{}", basis.slot_name(slot)).unwrap();
            if out.is_empty() {
                if v < 0.0 {
                    out.push('-');
                }
            } else {
                out.push_str(if v < 0.0 { " - " } else { " + " });
            }
            out.push_str(&term);
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: i64) -> Rational64 {
        Rational64::from_integer(v)
    }

    fn layout(n: usize, m: usize, p: usize) -> JetLayout {
        JetLayout::new(n, m, p).unwrap()
    }

    #[test]
    fn ansatz_sizes() {
        let b = monomial_ansatz(&layout(1, 1, 0), 1);
        assert_eq!(b.kappa(), 3);
        assert_eq!(b.size(), 6);
        let names: Vec<String> = (0..3).map(|j| b.monomial_name(j)).collect();
        assert_eq!(names, ["", "x", "u"]);
        assert_eq!(monomial_ansatz(&layout(2, 1, 0), 1).size(), 12);
        let b = monomial_ansatz(&layout(1, 1, 0), 0);
        assert_eq!((b.kappa(), b.size()), (1, 2));
        // C(degree + n + m, n + m)
        assert_eq!(monomial_ansatz(&layout(2, 2, 0), 3).kappa(), 35);
    }

    #[test]
    fn total_derivative_examples() {
        let ring = layout(1, 1, 2);
        let (x, u, ux) = (JetPolynomial::var(0), JetPolynomial::var(1), JetPolynomial::var(2));
        assert_eq!(total_derivative(&u, 0, &ring).unwrap(), ux);
        let xu = x.mul(&u);
        assert_eq!(total_derivative(&xu, 0, &ring).unwrap(), u.add(&x.mul(&ux)));
        let u2 = u.mul(&u);
        assert_eq!(total_derivative(&u2, 0, &ring).unwrap(), u.mul(&ux).scale(r(2)));
        let uxx = JetPolynomial::var(3);
        assert!(matches!(total_derivative(&uxx, 0, &ring), Err(Error::OrderOverflow(2))));
    }

    #[test]
    fn evaluation_at_a_point() {
        let pa = prolong_ansatz(&monomial_ansatz(&layout(1, 1, 0), 1), 1).unwrap();
        let m = evaluate_prolonged(&pa, &[0.0, 1.0, 1.0]).unwrap();
        let expect = DMatrix::from_row_slice(
            3,
            6,
            &[1., 0., 1., 0., 0., 0., 0., 0., 0., 1., 0., 1., 0., -1., -1., 0., 1., 1.],
        );
        assert_eq!(m, expect);
        assert!(evaluate_prolonged(&pa, &[0.0, 1.0]).is_err());
        let origin = evaluate_prolonged(&pa, &[0.0; 3]).unwrap();
        for row in 0..3 {
            for col in 0..6 {
                let constant = pa.entry(row, col).terms().find(|(e, _)| e.is_empty());
                let want = constant.map(|(_, c)| c.to_f64().unwrap()).unwrap_or(0.0);
                assert_eq!(origin[(row, col)], want);
            }
        }
    }

    #[test]
    fn rendering() {
        let b = monomial_ansatz(&layout(1, 1, 0), 1);
        let e = |i: usize| {
            let mut v = DVector::zeros(6);
            v[i] = 1.0;
            v
        };
        assert_eq!(render_generator(&GeneratorCoefficients::new(e(0)), &b), "∂x");
        assert_eq!(render_generator(&GeneratorCoefficients::new(e(5)), &b), "u ∂u");
        let mixed = GeneratorCoefficients::new(e(0) + e(5));
        assert_eq!(render_generator(&mixed, &b), "0.7071 ∂x + 0.7071 u ∂u");
        let mut v = DVector::zeros(6);
        v[0] = 1.0;
        v[5] = -1.0;
        v[3] = 1e-10;
        assert_eq!(
            render_generator(&GeneratorCoefficients::new(v), &b),
            "0.7071 ∂x - 0.7071 u ∂u"
        );
    }

    #[test]
    fn dump_format() {
        let pa = prolong_ansatz(&monomial_ansatz(&layout(1, 1, 0), 1), 1).unwrap();
        let text = pa.dump();
        assert!(text.contains("u_x c2: -1 * u_x^2"), "{text}");
        assert!(text.contains("x c1: 1 * x^1"), "{text}");
        assert!(text.contains("u_x c4: 1\n"), "{text}");
    }
}
