//! Unitary connections and loop holonomies.
//!
//! A connection assigns to each directed edge a Hermitian `d × d` generator
//! `A_xy = -A_yx`, with unitary `U_xy = exp(iβA_xy)`. For a soup of intensity
//! `λ`, the expectation of `∏_γ (1/d) Tr U_γ` is
//! `(det(I - (P⊗J)⊙U_β) / det(I - P⊗I))^{-λ/d}`: the block log-determinant
//! sums `μ(γ) Tr U_γ` over loops, whereas the observable carries `1/d`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SoupError};
use crate::graph::{GreensFunction, OneForm, TransitionMatrix, WeightedGraph};
use crate::linalg::ComplexSquareMatrix;
use crate::loops::{check_intensity, visit_loops, DEFAULT_ENUMERATION_CAP};

/// Largest `‖A - A†‖` accepted (and then symmetrized away).
pub const HERMITIAN_TOL: f64 = 1e-10;

type CMatrix = DMatrix<Complex64>;

fn hermitian_residual(a: &CMatrix) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn symmetrized(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(SoupError::InvalidArgument(format!("generator is {}×{}, not square", a.nrows(), a.ncols())));
    }
    let r = hermitian_residual(a);
    if r > HERMITIAN_TOL {
        return Err(SoupError::NotHermitian(r));
    }
    Ok((a + a.adjoint()).scale(0.5))
}

/// `exp(iβA)` for Hermitian `A`, via its eigendecomposition.
pub fn matrix_exp_hermitian(a: &CMatrix, beta: f64) -> Result<CMatrix> {
    let h = symmetrized(a)?;
    let d = h.nrows();
    if beta == 0.0 {
        return Ok(CMatrix::identity(d, d));
    }
    let eig = SymmetricEigen::new(h);
    let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(0.0, beta * l).exp()));
    Ok(&eig.eigenvectors * phases * eig.eigenvectors.adjoint())
}

/// Generator input for one edge: either `d²` row-major `[re, im]` pairs or
/// `d` rows of `d` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorSpec {
    Flat(Vec<[f64; 2]>),
    Nested(Vec<Vec<[f64; 2]>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeGeneratorSpec {
    pub u: usize,
    pub v: usize,
    #[serde(rename = "A")]
    pub a: GeneratorSpec,
}

/// Connection input; the `(v, u)` generator is the negative of `(u, v)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionSpec {
    pub d: usize,
    pub edges: Vec<EdgeGeneratorSpec>,
}

impl GeneratorSpec {
    fn to_matrix(&self, d: usize) -> Result<CMatrix> {
        let bad = |what: String| SoupError::InvalidArgument(format!("generator for d = {d}: {what}"));
        match self {
            GeneratorSpec::Flat(v) => {
                if v.len() != d * d {
                    return Err(bad(format!("expected {} entries, got {}", d * d, v.len())));
                }
                Ok(CMatrix::from_fn(d, d, |i, j| Complex64::new(v[i * d + j][0], v[i * d + j][1])))
            }
            GeneratorSpec::Nested(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(bad("expected d rows of d entries".into()));
                }
                Ok(CMatrix::from_fn(d, d, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
            }
        }
    }
}

/// Hermitian generators on the directed edges of a graph; edges not given
/// carry the zero generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Connection {
    n: usize,
    d: usize,
    gens: Vec<Option<CMatrix>>,
}

impl Connection {
    pub fn zero(graph: &WeightedGraph, d: usize) -> Result<Self> {
        Self::new(graph, d, Vec::new())
    }

    /// Generators `A_uv` for the listed `(u, v)`; `A_vu = -A_uv` is implied.
    pub fn new(graph: &WeightedGraph, d: usize, edges: Vec<(usize, usize, CMatrix)>) -> Result<Self> {
        if d == 0 {
            return Err(SoupError::InvalidArgument("fiber dimension must be at least 1".into()));
        }
        let n = graph.vertex_count();
        let mut gens = vec![None; n * n];
        for (u, v, a) in edges {
            if u >= n || v >= n || !graph.adjacent(u, v) {
                return Err(SoupError::NotAdjacent(u, v));
            }
            if a.nrows() != d || a.ncols() != d {
                return Err(SoupError::DimensionMismatch { expected: d, found: a.nrows() });
            }
            if gens[u * n + v].is_some() {
                return Err(SoupError::InvalidArgument(format!("edge ({u},{v}) given twice")));
            }
            let a = symmetrized(&a)?;
            gens[v * n + u] = Some(-a.clone());
            gens[u * n + v] = Some(a);
        }
        Ok(Self { n, d, gens })
    }

    pub fn from_spec(graph: &WeightedGraph, spec: &ConnectionSpec) -> Result<Self> {
        let edges = spec
            .edges
            .iter()
            .map(|e| Ok((e.u, e.v, e.a.to_matrix(spec.d)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(graph, spec.d, edges)
    }

    pub fn from_json(graph: &WeightedGraph, s: &str) -> Result<Self> {
        Self::from_spec(graph, &serde_json::from_str(s)?)
    }

    /// `A_xy = diag(a_1(x,y), …, a_d(x,y))`.
    pub fn diagonal(graph: &WeightedGraph, forms: &[OneForm]) -> Result<Self> {
        let d = forms.len();
        let mut edges = Vec::new();
        for &(x, y) in graph.edges() {
            let diag: Vec<Complex64> = forms.iter().map(|a| Complex64::from(a.get(x, y))).collect();
            edges.push((x, y, CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))));
        }
        Self::new(graph, d, edges)
    }

    /// The `d = 1` connection of a one-form.
    pub fn from_one_form(graph: &WeightedGraph, a: &OneForm) -> Result<Self> {
        Self::diagonal(graph, std::slice::from_ref(a))
    }

    /// `A_xy ↦ V A_xy V†` for a fixed unitary `V`.
    pub fn conjugated(&self, v: &CMatrix) -> Result<Self> {
        if v.nrows() != self.d || v.ncols() != self.d {
            return Err(SoupError::DimensionMismatch { expected: self.d, found: v.nrows() });
        }
        let gens = self.gens.iter().map(|g| g.as_ref().map(|a| v * a * v.adjoint())).collect();
        Ok(Self { n: self.n, d: self.d, gens })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// `A_xy`, zero if none was given.
    pub fn generator(&self, x: usize, y: usize) -> CMatrix {
        self.gens[x * self.n + y].clone().unwrap_or_else(|| CMatrix::zeros(self.d, self.d))
    }

    pub fn unitary(&self, x: usize, y: usize, beta: f64) -> CMatrix {
        match &self.gens[x * self.n + y] {
            Some(a) => matrix_exp_hermitian(a, beta).expect("generators are Hermitian"),
            None => CMatrix::identity(self.d, self.d),
        }
    }
}

/// `(1/d) Tr(U_{x0x1} ⋯ U_{x_{k-1}x0})` for the closed walk `verts`.
pub fn holonomy_trace(verts: &[usize], conn: &Connection, beta: f64) -> Complex64 {
    let d = conn.dim();
    let k = verts.len();
    let mut prod = CMatrix::identity(d, d);
    for i in 0..k {
        prod *= conn.unitary(verts[i], verts[(i + 1) % k], beta);
    }
    prod.trace() / d as f64
}

/// `nd × nd` matrix addressed by `d × d` vertex blocks, flat index `x·d + α`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    n: usize,
    d: usize,
    m: ComplexSquareMatrix,
}

impl BlockMatrix {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self { n, d, m: ComplexSquareMatrix::zeros(n * d) }
    }

    /// `P ⊗ I_d`.
    pub fn kron_identity(p: &DMatrix<f64>, d: usize) -> Self {
        let n = p.nrows();
        let mut b = Self::zeros(n, d);
        for x in 0..n {
            for y in 0..n {
                if p[(x, y)] != 0.0 {
                    b.set_block(x, y, &CMatrix::identity(d, d).scale(p[(x, y)]));
                }
            }
        }
        b
    }

    /// `(P ⊗ J_d) ⊙ U_β`: blocks `P_xy U_xy`.
    pub fn transfer(p: &TransitionMatrix, conn: &Connection, beta: f64) -> Self {
        Self::from_edge_blocks(p, conn, |x, y| conn.unitary(x, y, beta))
    }

    /// Blocks `P_xy A_xy`.
    pub fn generator_blocks(p: &TransitionMatrix, conn: &Connection) -> Self {
        Self::from_edge_blocks(p, conn, |x, y| conn.generator(x, y))
    }

    fn from_edge_blocks(p: &TransitionMatrix, conn: &Connection, block: impl Fn(usize, usize) -> CMatrix) -> Self {
        let n = p.dim();
        let mut b = Self::zeros(n, conn.dim());
        for x in 0..n {
            for &y in p.graph().neighbors(x) {
                b.set_block(x, y, &block(x, y).scale(p.get(x, y)));
            }
        }
        b
    }

    pub fn vertices(&self) -> usize {
        self.n
    }

    pub fn fiber(&self) -> usize {
        self.d
    }

    pub fn get(&self, x: usize, alpha: usize, y: usize, beta: usize) -> Complex64 {
        self.m[(x * self.d + alpha, y * self.d + beta)]
    }

    pub fn block(&self, x: usize, y: usize) -> CMatrix {
        self.m.as_matrix().view((x * self.d, y * self.d), (self.d, self.d)).into_owned()
    }

    pub fn set_block(&mut self, x: usize, y: usize, b: &CMatrix) {
        for i in 0..self.d {
            for j in 0..self.d {
                self.m[(x * self.d + i, y * self.d + j)] = b[(i, j)];
            }
        }
    }

    pub fn matrix(&self) -> &ComplexSquareMatrix {
        &self.m
    }
}

fn check_connection(p: &TransitionMatrix, conn: &Connection) -> Result<()> {
    p.require_symmetric()?;
    if conn.vertex_count() != p.dim() {
        return Err(SoupError::DimensionMismatch { expected: p.dim(), found: conn.vertex_count() });
    }
    Ok(())
}

/// `log det(I - (P⊗J)⊙U_β) - log det(I - P⊗I)`.
pub fn holonomy_log_det_ratio(p: &TransitionMatrix, conn: &Connection, beta: f64) -> Result<Complex64> {
    check_connection(p, conn)?;
    let num = BlockMatrix::transfer(p, conn, beta).matrix().identity_minus().log_det()?;
    let den = BlockMatrix::kron_identity(p.matrix(), conn.dim()).matrix().identity_minus().log_det()?;
    Ok(num.ratio(den))
}

/// `E[∏_γ (1/d) Tr_γ(e^{iβA})]` for the soup of intensity `λ`.
pub fn exact_holonomy_expectation(p: &TransitionMatrix, conn: &Connection, beta: f64, lambda: f64) -> Result<Complex64> {
    check_intensity(lambda)?;
    let ratio = holonomy_log_det_ratio(p, conn, beta)?;
    Ok((-lambda / conn.dim() as f64 * ratio).exp())
}

/// `λ → ∞` limit of the expectation at `β = λ^{-1/2}`:
/// `exp(-(S1 + S2) / 2d)` with `S1 = Σ_{x~y} G_yx P_xy Tr(A_xy²)` and
/// `S2 = Tr(M (G⊗I) M (G⊗I))`, `M` having blocks `P_xy A_xy`.
pub fn holonomy_limit(p: &TransitionMatrix, g: &GreensFunction, conn: &Connection) -> Result<f64> {
    check_connection(p, conn)?;
    let (s1, s2) = holonomy_limit_terms(p, g, conn);
    Ok((-(s1 + s2) / (2.0 * conn.dim() as f64)).exp())
}

/// `(S1, S2)` of [`holonomy_limit`].
pub fn holonomy_limit_terms(p: &TransitionMatrix, g: &GreensFunction, conn: &Connection) -> (f64, f64) {
    let n = p.dim();
    let mut s1 = 0.0;
    for x in 0..n {
        for &y in p.graph().neighbors(x) {
            let a = conn.generator(x, y);
            s1 += g.get(y, x) * p.get(x, y) * (&a * &a).trace().re;
        }
    }
    let m = BlockMatrix::generator_blocks(p, conn);
    let gi = BlockMatrix::kron_identity(g.matrix(), conn.dim());
    let mg = m.matrix().matmul(gi.matrix());
    let s2 = mg.matmul(&mg).trace().re;
    (s1, s2)
}

/// Truncated Campbell sum `Σ_{|γ| ≤ k_max} μ(γ)((1/d) Tr_γ(e^{iβA}) - 1)`.
pub fn oracle_holonomy_log(p: &TransitionMatrix, conn: &Connection, beta: f64, k_max: usize) -> Result<Complex64> {
    check_connection(p, conn)?;
    let n = p.dim();
    let unitaries: Vec<Option<CMatrix>> =
        (0..n * n).map(|i| p.graph().adjacent(i / n, i % n).then(|| conn.unitary(i / n, i % n, beta))).collect();
    let d = conn.dim();
    let mut sum = Complex64::new(0.0, 0.0);
    visit_loops(p, k_max, DEFAULT_ENUMERATION_CAP, |verts, _, w| {
        let k = verts.len();
        let mut prod = CMatrix::identity(d, d);
        for i in 0..k {
            prod *= unitaries[verts[i] * n + verts[(i + 1) % k]].as_ref().expect("walk edge");
        }
        sum += w * (prod.trace() / d as f64 - 1.0);
    })?;
    Ok(sum)
}
