//! Finite graphs with killing, their transition matrices, Green's functions
//! and one-forms.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SoupError};
use crate::linalg::ComplexSquareMatrix;

/// Finite connected simple graph with a killing function.
///
/// Vertices are `0..n` and keep the order given at construction; edges keep
/// their insertion order and are addressed by index in planar rotations.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    incident: Vec<Vec<usize>>,
    kappa: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: &[(usize, usize)], kappa: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(SoupError::InvalidGraph("graph needs at least one vertex".into()));
        }
        if kappa.len() != n {
            return Err(SoupError::DimensionMismatch { expected: n, found: kappa.len() });
        }
        if let Some((x, k)) = kappa.iter().enumerate().find(|(_, k)| !(k.is_finite() && **k >= 0.0)) {
            return Err(SoupError::InvalidGraph(format!("kappa[{x}] = {k} must be finite and nonnegative")));
        }
        if kappa.iter().all(|&k| k == 0.0) {
            return Err(SoupError::ZeroKilling);
        }
        let mut neighbors = vec![Vec::new(); n];
        let mut incident = vec![Vec::new(); n];
        for (e, &(u, v)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(SoupError::InvalidGraph(format!("edge {e} = ({u},{v}) out of range")));
            }
            if u == v {
                return Err(SoupError::InvalidGraph(format!("self-loop at vertex {u}")));
            }
            if neighbors[u].contains(&v) {
                return Err(SoupError::InvalidGraph(format!("duplicate edge ({u},{v})")));
            }
            neighbors[u].push(v);
            neighbors[v].push(u);
            incident[u].push(e);
            incident[v].push(e);
        }
        let g = Self { n, edges: edges.to_vec(), neighbors, incident, kappa };
        if !g.is_connected() {
            return Err(SoupError::InvalidGraph("graph is not connected".into()));
        }
        Ok(g)
    }

    /// `width × height` grid of vertices, vertex `(x, y)` at index `y * width + x`.
    pub fn grid(width: usize, height: usize, kappa: f64) -> Result<Self> {
        let (edges, n) = grid_edges(width, height)?;
        Self::new(n, &edges, vec![kappa; n])
    }

    /// Grid carved out of the square lattice with constant killing `kappa`:
    /// steps that would leave the grid count as killing, so every vertex has
    /// `κ_x + d_x = kappa + 4` and `P` is symmetric.
    pub fn lattice_grid(width: usize, height: usize, kappa: f64) -> Result<Self> {
        let (edges, n) = grid_edges(width, height)?;
        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let kappas = degree.iter().map(|&d| kappa + 4.0 - d as f64).collect();
        Self::new(n, &edges, kappas)
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        match spec {
            GraphSpec::Explicit { vertices, edges, kappa } => {
                let edges: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                Self::new(*vertices, &edges, kappa.clone())
            }
            GraphSpec::Grid { grid, kappa_const } => Self::grid(grid.width, grid.height, *kappa_const),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_spec(&serde_json::from_str(s)?)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.neighbors[x]
    }

    /// Edge indices incident to `x`, in insertion order.
    pub fn incident_edges(&self, x: usize) -> &[usize] {
        &self.incident[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.neighbors[x].len()
    }

    pub fn kappa(&self, x: usize) -> f64 {
        self.kappa[x]
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappa
    }

    pub fn adjacent(&self, x: usize, y: usize) -> bool {
        x < self.n && self.neighbors[x].contains(&y)
    }

    pub fn edge_between(&self, x: usize, y: usize) -> Option<usize> {
        self.incident
            .get(x)?
            .iter()
            .copied()
            .find(|&e| self.edges[e] == (x, y) || self.edges[e] == (y, x))
    }

    /// `κ_x + d_x`, the total jump rate at `x`.
    pub fn total_rate(&self, x: usize) -> f64 {
        self.kappa[x] + self.degree(x) as f64
    }

    /// Graph distances by breadth-first search, row-major `n × n`.
    pub fn distances(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|s| {
                let mut dist = vec![usize::MAX; self.n];
                dist[s] = 0;
                let mut queue = VecDeque::from([s]);
                while let Some(x) = queue.pop_front() {
                    for &y in &self.neighbors[x] {
                        if dist[y] == usize::MAX {
                            dist[y] = dist[x] + 1;
                            queue.push_back(y);
                        }
                    }
                }
                dist
            })
            .collect()
    }

    fn is_connected(&self) -> bool {
        self.distances()[0].iter().all(|&d| d != usize::MAX)
    }

    pub fn transition(&self) -> TransitionMatrix {
        TransitionMatrix::new(self)
    }
}

fn grid_edges(width: usize, height: usize) -> Result<(Vec<(usize, usize)>, usize)> {
    if width == 0 || height == 0 {
        return Err(SoupError::InvalidGraph("grid dimensions must be positive".into()));
    }
    let idx = |x: usize, y: usize| y * width + x;
    let mut edges = Vec::new();
    for y in 0..height {
        for x in 0..width {
            if x + 1 < width {
                edges.push((idx(x, y), idx(x + 1, y)));
            }
            if y + 1 < height {
                edges.push((idx(x, y), idx(x, y + 1)));
            }
        }
    }
    Ok((edges, width * height))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSize {
    pub width: usize,
    pub height: usize,
}

/// Graph input, either explicit or grid shorthand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Explicit { vertices: usize, edges: Vec<[usize; 2]>, kappa: Vec<f64> },
    Grid { grid: GridSize, kappa_const: f64 },
}

/// `P_xy = 1/(κ_x + d_x)` on adjacent pairs.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    graph: WeightedGraph,
    p: DMatrix<f64>,
}

impl TransitionMatrix {
    fn new(graph: &WeightedGraph) -> Self {
        let n = graph.vertex_count();
        let mut p = DMatrix::zeros(n, n);
        for x in 0..n {
            let w = 1.0 / graph.total_rate(x);
            for &y in graph.neighbors(x) {
                p[(x, y)] = w;
            }
        }
        Self { graph: graph.clone(), p }
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.p[(x, y)]
    }

    pub fn row_sum(&self, x: usize) -> f64 {
        self.p.row(x).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for x in 0..n {
            for y in 0..x {
                worst = worst.max((self.p[(x, y)] - self.p[(y, x)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        self.max_asymmetry() <= 1e-14
    }

    pub fn require_symmetric(&self) -> Result<()> {
        match self.max_asymmetry() {
            a if a <= 1e-14 => Ok(()),
            a => Err(SoupError::NotSymmetric(a)),
        }
    }

    /// Spectral radius of `P` by power iteration on the symmetrization
    /// `D^{1/2} P D^{-1/2}` (with `D = diag(κ+d)`), 200 steps, no safety factor.
    pub fn spectral_radius_estimate(&self) -> f64 {
        let n = self.dim();
        let sqrt_rate: Vec<f64> = (0..n).map(|x| self.graph.total_rate(x).sqrt()).collect();
        let mut v = vec![1.0; n];
        let mut ratio = 0.0;
        for _ in 0..200 {
            let norm_v = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let w: Vec<f64> = (0..n)
                .map(|x| {
                    self.graph
                        .neighbors(x)
                        .iter()
                        .map(|&y| v[y] / (sqrt_rate[x] * sqrt_rate[y]))
                        .sum()
                })
                .collect();
            let norm_w = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm_w == 0.0 {
                return 0.0;
            }
            ratio = norm_w / norm_v;
            v = w.into_iter().map(|a| a / norm_w).collect();
        }
        ratio
    }
}

/// Green's function `G = (I - P)^{-1}`.
#[derive(Clone, Debug)]
pub struct GreensFunction {
    g: DMatrix<f64>,
}

impl GreensFunction {
    pub fn new(p: &TransitionMatrix) -> Result<Self> {
        let n = p.dim();
        let a = DMatrix::<f64>::identity(n, n) - p.matrix();
        let g = a.lu().try_inverse().ok_or(SoupError::Singular)?;
        if g.iter().any(|x| !x.is_finite()) {
            return Err(SoupError::Singular);
        }
        Ok(Self { g })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.g[(x, y)]
    }

    /// Max entry of `|(I - P) G - I|`.
    pub fn residual(&self, p: &TransitionMatrix) -> f64 {
        let n = p.dim();
        let r = (DMatrix::<f64>::identity(n, n) - p.matrix()) * &self.g - DMatrix::<f64>::identity(n, n);
        r.amax()
    }
}

pub fn greens_function(p: &TransitionMatrix) -> Result<GreensFunction> {
    GreensFunction::new(p)
}

/// Skew-symmetric edge labelling `A_xy = -A_yx`, zero off the edges.
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm {
    a: DMatrix<f64>,
}

impl OneForm {
    pub fn zero(n: usize) -> Self {
        Self { a: DMatrix::zeros(n, n) }
    }

    /// Builds a form from `(x, y, value)` triples; repeated pairs accumulate
    /// and `(y, x)` receives the negated value.
    pub fn from_edges(graph: &WeightedGraph, values: &[(usize, usize, f64)]) -> Result<Self> {
        let mut a = DMatrix::zeros(graph.vertex_count(), graph.vertex_count());
        for &(x, y, v) in values {
            if !graph.adjacent(x, y) {
                return Err(SoupError::NotAdjacent(x, y));
            }
            a[(x, y)] += v;
            a[(y, x)] -= v;
        }
        Ok(Self { a })
    }

    /// Checks skew-symmetry and support on the edges of `graph`.
    pub fn from_matrix(graph: &WeightedGraph, a: DMatrix<f64>) -> Result<Self> {
        let n = graph.vertex_count();
        if a.nrows() != n || a.ncols() != n {
            return Err(SoupError::DimensionMismatch { expected: n, found: a.nrows() });
        }
        for x in 0..n {
            for y in 0..n {
                if a[(x, y)] != 0.0 && !graph.adjacent(x, y) {
                    return Err(SoupError::NotAdjacent(x, y));
                }
                if (a[(x, y)] + a[(y, x)]).abs() > 1e-12 * (1.0 + a[(x, y)].abs()) {
                    return Err(SoupError::InvalidArgument(format!("one-form is not skew at ({x},{y})")));
                }
            }
        }
        Ok(Self { a })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.a[(x, y)]
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|&v| v == 0.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { a: &self.a * c }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { a: &self.a + &other.a }
    }

    /// `∫_γ A` over a cyclic vertex sequence.
    pub fn integrate(&self, verts: &[usize]) -> f64 {
        let k = verts.len();
        (0..k).map(|i| self.a[(verts[i], verts[(i + 1) % k])]).sum()
    }
}

/// `P^β_xy = e^{iβA_xy}/(κ_x + d_x)` on adjacent pairs.
pub fn perturbed_transition(p: &TransitionMatrix, a: &OneForm, beta: f64) -> Result<ComplexSquareMatrix> {
    let n = p.dim();
    if a.dim() != n {
        return Err(SoupError::DimensionMismatch { expected: n, found: a.dim() });
    }
    let mut out = ComplexSquareMatrix::from_real(p.matrix());
    if beta == 0.0 {
        return Ok(out);
    }
    for x in 0..n {
        for &y in p.graph().neighbors(x) {
            out[(x, y)] = Complex64::from_polar(p.get(x, y), beta * a.get(x, y));
        }
    }
    Ok(out)
}
