//! Planar maps, cuts to the infinite face, winding numbers and the winding
//! field of a loop soup.
//!
//! A map is a graph with a rotation system: for each vertex, its incident
//! edges in counterclockwise order. Directed edges ("darts") are numbered
//! `2e` for `edges[e] = (u, v)` read as `u → v` and `2e + 1` for `v → u`.
//! Faces are orbits of `u → v ↦ v → w`, `w` being the neighbour preceding `u`
//! in the rotation at `v`; each face lies to the left of its darts.
//!
//! The cut of a finite face `f` is read off a dual path `f = f_0, …, f_n = ∞`:
//! for each step it stores the dart with `f_i` on its left and `f_{i+1}` on
//! its right. Its unit one-form puts `+1` on those darts, so a loop going once
//! counterclockwise around `f` has winding number `+1`.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SoupError};
use crate::graph::{perturbed_transition, GraphSpec, GreensFunction, OneForm, TransitionMatrix, WeightedGraph};
use crate::linalg::{wrap_phase, ComplexSquareMatrix};
use crate::loops::{check_intensity, clt_covariance, exact_charfn, UnrootedLoop};
use crate::sampler::LoopSoupSample;

/// Graph with a rotation system and its derived faces.
#[derive(Clone, Debug)]
pub struct PlanarMap {
    graph: WeightedGraph,
    rotation: Vec<Vec<usize>>,
    dart_face: Vec<usize>,
    faces: Vec<Vec<usize>>,
    infinite: usize,
    // per face: (neighbouring face, dart with this face on the left and the neighbour on the right)
    dual: Vec<Vec<(usize, usize)>>,
}

/// Planar map input: explicit rotation system or grid shorthand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    Explicit { graph: GraphSpec, rotation: Vec<Vec<usize>>, infinite_face_edge: [usize; 2] },
    Grid {
        grid: crate::graph::GridSize,
        kappa_const: f64,
        /// Killing `κ + 4 - d_x`, i.e. the window carved out of the lattice.
        #[serde(default)]
        lattice: bool,
    },
}

impl PlanarMap {
    /// `rotation[v]` lists the indices of the edges at `v` counterclockwise;
    /// the infinite face is the one to the left of the dart `outer.0 → outer.1`.
    pub fn new(graph: WeightedGraph, rotation: Vec<Vec<usize>>, outer: (usize, usize)) -> Result<Self> {
        let n = graph.vertex_count();
        if rotation.len() != n {
            return Err(SoupError::InvalidEmbedding(format!("rotation has {} vertices, graph has {n}", rotation.len())));
        }
        for (v, rot) in rotation.iter().enumerate() {
            let mut got = rot.clone();
            got.sort_unstable();
            let mut want = graph.incident_edges(v).to_vec();
            want.sort_unstable();
            if got != want {
                return Err(SoupError::InvalidEmbedding(format!(
                    "rotation at vertex {v} must list its incident edges {want:?} once each, got {rot:?}"
                )));
            }
        }
        let darts = 2 * graph.edge_count();
        let mut map = Self { graph, rotation, dart_face: vec![usize::MAX; darts], faces: Vec::new(), infinite: 0, dual: Vec::new() };
        for start in 0..darts {
            if map.dart_face[start] != usize::MAX {
                continue;
            }
            let id = map.faces.len();
            let mut boundary = Vec::new();
            let mut d = start;
            while map.dart_face[d] == usize::MAX {
                map.dart_face[d] = id;
                boundary.push(d);
                d = map.next_dart(d);
            }
            if d != start {
                return Err(SoupError::InvalidEmbedding("face traversal does not close up".into()));
            }
            map.faces.push(boundary);
        }
        let (v, e, f) = (n as i64, map.graph.edge_count() as i64, map.faces.len() as i64);
        if v - e + f != 2 {
            return Err(SoupError::InvalidEmbedding(format!("Euler check failed: V - E + F = {v} - {e} + {f} != 2")));
        }
        let od = map
            .dart(outer.0, outer.1)
            .ok_or_else(|| SoupError::InvalidEmbedding(format!("outer edge ({}, {}) is not an edge", outer.0, outer.1)))?;
        map.infinite = map.dart_face[od];
        let mut dual = vec![Vec::new(); map.faces.len()];
        for d in 0..darts {
            let (l, r) = (map.dart_face[d], map.dart_face[d ^ 1]);
            if l != r {
                dual[l].push((r, d));
            }
        }
        for adj in &mut dual {
            adj.sort_unstable();
        }
        map.dual = dual;
        Ok(map)
    }

    /// Grid graph built by [`WeightedGraph::grid`] or [`WeightedGraph::lattice_grid`]
    /// with its straight-line embedding; the outer face is below the bottom row.
    pub fn grid_embedding(graph: WeightedGraph, width: usize, height: usize) -> Result<Self> {
        if graph.vertex_count() != width * height {
            return Err(SoupError::DimensionMismatch { expected: width * height, found: graph.vertex_count() });
        }
        let mut rotation = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = y * width + x;
                let mut rot = Vec::with_capacity(4);
                // east, north, west, south
                let around = [
                    (x + 1 < width).then(|| v + 1),
                    (y + 1 < height).then(|| v + width),
                    (x > 0).then(|| v - 1),
                    (y > 0).then(|| v - width),
                ];
                for w in around.into_iter().flatten() {
                    let e = graph
                        .edge_between(v, w)
                        .ok_or_else(|| SoupError::InvalidEmbedding(format!("grid edge ({v},{w}) missing")))?;
                    rot.push(e);
                }
                rotation.push(rot);
            }
        }
        if width < 2 {
            return Err(SoupError::InvalidEmbedding("grid needs width at least 2".into()));
        }
        Self::new(graph, rotation, (1, 0))
    }

    pub fn grid(width: usize, height: usize, kappa: f64) -> Result<Self> {
        Self::grid_embedding(WeightedGraph::grid(width, height, kappa)?, width, height)
    }

    /// Grid with lattice killing `κ + 4 - d_x`, so that `P` is symmetric.
    pub fn lattice_grid(width: usize, height: usize, kappa: f64) -> Result<Self> {
        Self::grid_embedding(WeightedGraph::lattice_grid(width, height, kappa)?, width, height)
    }

    pub fn from_spec(spec: &MapSpec) -> Result<Self> {
        match spec {
            MapSpec::Explicit { graph, rotation, infinite_face_edge } => Self::new(
                WeightedGraph::from_spec(graph)?,
                rotation.clone(),
                (infinite_face_edge[0], infinite_face_edge[1]),
            ),
            MapSpec::Grid { grid, kappa_const, lattice: false } => Self::grid(grid.width, grid.height, *kappa_const),
            MapSpec::Grid { grid, kappa_const, lattice: true } => {
                Self::lattice_grid(grid.width, grid.height, *kappa_const)
            }
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_spec(&serde_json::from_str(s)?)
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn rotation(&self, v: usize) -> &[usize] {
        &self.rotation[v]
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn infinite_face(&self) -> usize {
        self.infinite
    }

    /// All faces but the infinite one, in increasing order.
    pub fn finite_faces(&self) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| f != self.infinite).collect()
    }

    /// Boundary darts of face `f`, as `(tail, head)` pairs in traversal order.
    pub fn face_boundary(&self, f: usize) -> Vec<(usize, usize)> {
        self.faces[f].iter().map(|&d| self.dart_ends(d)).collect()
    }

    /// Face to the left of `u → v`.
    pub fn face_left_of(&self, u: usize, v: usize) -> Option<usize> {
        self.dart(u, v).map(|d| self.dart_face[d])
    }

    /// Faces sharing an edge with `f`, sorted and deduplicated.
    pub fn dual_neighbors(&self, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.dual[f].iter().map(|&(g, _)| g).collect();
        out.dedup();
        out
    }

    fn dart(&self, u: usize, v: usize) -> Option<usize> {
        let e = self.graph.edge_between(u, v)?;
        Some(if self.graph.edges()[e].0 == u { 2 * e } else { 2 * e + 1 })
    }

    fn dart_ends(&self, d: usize) -> (usize, usize) {
        let (a, b) = self.graph.edges()[d / 2];
        if d.is_multiple_of(2) { (a, b) } else { (b, a) }
    }

    fn next_dart(&self, d: usize) -> usize {
        let (_, v) = self.dart_ends(d);
        let e = d / 2;
        let rot = &self.rotation[v];
        let pos = rot.iter().position(|&x| x == e).expect("validated rotation");
        let prev = rot[(pos + rot.len() - 1) % rot.len()];
        if self.graph.edges()[prev].0 == v { 2 * prev } else { 2 * prev + 1 }
    }

    fn check_finite(&self, f: usize) -> Result<()> {
        if f >= self.faces.len() {
            return Err(SoupError::InvalidArgument(format!("face {f} out of range (map has {})", self.faces.len())));
        }
        if f == self.infinite {
            return Err(SoupError::InfiniteFace(f));
        }
        Ok(())
    }

    fn shared_darts(&self, f: usize, g: usize) -> Vec<usize> {
        self.dual[f].iter().filter(|&&(h, _)| h == g).map(|&(_, d)| d).collect()
    }

    /// Cut of `f` along a breadth-first dual path to the infinite face, ties
    /// broken by face index and then by dart index; or along `hint`, a face
    /// path `f, …, ∞`.
    pub fn build_cut(&self, f: usize, hint: Option<&[usize]>) -> Result<Cut> {
        self.check_finite(f)?;
        let path = match hint {
            Some(h) => h.to_vec(),
            None => self.bfs_dual_path(f),
        };
        self.cut_from_path(f, &path, |darts| darts[0])
    }

    /// Cut along a loop-erased random walk in the dual, crossing a uniformly
    /// chosen shared edge at each step.
    pub fn random_cut<R: Rng + ?Sized>(&self, f: usize, rng: &mut R) -> Result<Cut> {
        self.check_finite(f)?;
        let mut path = vec![f];
        while *path.last().expect("nonempty") != self.infinite {
            let here = *path.last().expect("nonempty");
            let next = *self.dual_neighbors(here).choose(rng).expect("connected dual");
            if let Some(pos) = path.iter().position(|&g| g == next) {
                path.truncate(pos + 1);
            } else {
                path.push(next);
            }
        }
        let choices: Vec<f64> = (0..path.len()).map(|_| rng.random::<f64>()).collect();
        let mut step = 0;
        self.cut_from_path(f, &path, |darts| {
            let d = darts[(choices[step] * darts.len() as f64) as usize % darts.len()];
            step += 1;
            d
        })
    }

    fn bfs_dual_path(&self, f: usize) -> Vec<usize> {
        let mut prev = vec![usize::MAX; self.faces.len()];
        prev[f] = f;
        let mut queue = VecDeque::from([f]);
        while let Some(h) = queue.pop_front() {
            if h == self.infinite {
                break;
            }
            for g in self.dual_neighbors(h) {
                if prev[g] == usize::MAX {
                    prev[g] = h;
                    queue.push_back(g);
                }
            }
        }
        let mut path = vec![self.infinite];
        while *path.last().expect("nonempty") != f {
            path.push(prev[*path.last().expect("nonempty")]);
        }
        path.reverse();
        path
    }

    fn cut_from_path(&self, f: usize, path: &[usize], mut pick: impl FnMut(&[usize]) -> usize) -> Result<Cut> {
        if path.first() != Some(&f) || path.last() != Some(&self.infinite) {
            return Err(SoupError::InvalidArgument(format!(
                "dual path must run from face {f} to the infinite face {}",
                self.infinite
            )));
        }
        for (i, a) in path.iter().enumerate() {
            if path[..i].contains(a) {
                return Err(SoupError::InvalidArgument(format!("dual path visits face {a} twice")));
            }
        }
        let mut darts = Vec::with_capacity(path.len() - 1);
        for w in path.windows(2) {
            let shared = self.shared_darts(w[0], w[1]);
            if shared.is_empty() {
                return Err(SoupError::InvalidArgument(format!("faces {} and {} are not adjacent", w[0], w[1])));
            }
            darts.push(self.dart_ends(pick(&shared)));
        }
        Ok(Cut { face: f, dual_path: path.to_vec(), darts })
    }
}

/// Oriented edges `(e⁻, e⁺)` crossed by a dual path from a face to the
/// infinite face; the face of the path is on the left of each of them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cut {
    pub face: usize,
    pub dual_path: Vec<usize>,
    pub darts: Vec<(usize, usize)>,
}

impl Cut {
    /// Unit one-form of the cut: `+1` on each `e⁻ → e⁺`.
    pub fn one_form(&self, graph: &WeightedGraph) -> Result<OneForm> {
        cut_one_form(graph, &[(self, 1.0)])
    }
}

/// `A^t = Σ t_i A_{f_i}`, overlapping cuts accumulating entrywise.
pub fn cut_one_form(graph: &WeightedGraph, cuts: &[(&Cut, f64)]) -> Result<OneForm> {
    let triples: Vec<(usize, usize, f64)> =
        cuts.iter().flat_map(|&(c, t)| c.darts.iter().map(move |&(a, b)| (a, b, t))).collect();
    OneForm::from_edges(graph, &triples)
}

/// Signed number of crossings of `cut` by the closed walk `verts`.
pub fn winding_of_walk(verts: &[usize], cut: &Cut) -> i64 {
    let k = verts.len();
    let mut w = 0;
    for i in 0..k {
        let (x, y) = (verts[i], verts[(i + 1) % k]);
        for &(a, b) in &cut.darts {
            if (x, y) == (a, b) {
                w += 1;
            } else if (x, y) == (b, a) {
                w -= 1;
            }
        }
    }
    w
}

pub fn winding_number(lp: &UnrootedLoop, cut: &Cut) -> i64 {
    winding_of_walk(lp.vertices(), cut)
}

/// Winding field values, one per cut, in cut order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindingFieldSample {
    pub faces: Vec<usize>,
    pub values: Vec<i64>,
}

pub fn field_sample(soup: &LoopSoupSample, cuts: &[Cut]) -> WindingFieldSample {
    let table = WindingTable::new(cuts);
    let mut values = vec![0; cuts.len()];
    for lp in &soup.loops {
        table.accumulate(lp.vertices(), &mut values);
    }
    WindingFieldSample { faces: cuts.iter().map(|c| c.face).collect(), values }
}

/// Per-dart winding contributions of a fixed list of cuts, for fast
/// accumulation over many loops.
#[derive(Clone, Debug)]
pub struct WindingTable {
    // by tail vertex: (head, cut index, sign)
    by_tail: Vec<Vec<(usize, usize, i64)>>,
}

impl WindingTable {
    pub fn new(cuts: &[Cut]) -> Self {
        let n = cuts.iter().flat_map(|c| c.darts.iter().map(|&(a, b)| a.max(b) + 1)).max().unwrap_or(0);
        let mut by_tail = vec![Vec::new(); n];
        for (i, c) in cuts.iter().enumerate() {
            for &(a, b) in &c.darts {
                by_tail[a].push((b, i, 1));
                by_tail[b].push((a, i, -1));
            }
        }
        Self { by_tail }
    }

    /// Adds the windings of the closed walk `verts` into `out`.
    pub fn accumulate(&self, verts: &[usize], out: &mut [i64]) {
        let k = verts.len();
        for i in 0..k {
            let x = verts[i];
            if x >= self.by_tail.len() {
                continue;
            }
            let y = verts[(i + 1) % k];
            for &(h, c, s) in &self.by_tail[x] {
                if h == y {
                    out[c] += s;
                }
            }
        }
    }
}

/// Exact and asymptotic winding-field quantities on a planar map.
#[derive(Clone, Debug)]
pub struct WindingModel {
    map: PlanarMap,
    p: TransitionMatrix,
    g: GreensFunction,
    cuts: Vec<Option<Cut>>,
}

impl WindingModel {
    /// Model with the default breadth-first cut for every finite face.
    pub fn new(map: PlanarMap) -> Result<Self> {
        let p = map.graph().transition();
        let g = GreensFunction::new(&p)?;
        let cuts = (0..map.face_count())
            .map(|f| if f == map.infinite_face() { Ok(None) } else { map.build_cut(f, None).map(Some) })
            .collect::<Result<_>>()?;
        Ok(Self { map, p, g, cuts })
    }

    pub fn map(&self) -> &PlanarMap {
        &self.map
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.p
    }

    pub fn greens(&self) -> &GreensFunction {
        &self.g
    }

    pub fn cut(&self, f: usize) -> Result<&Cut> {
        self.map.check_finite(f)?;
        Ok(self.cuts[f].as_ref().expect("finite face has a cut"))
    }

    pub fn cuts(&self, faces: &[usize]) -> Result<Vec<Cut>> {
        faces.iter().map(|&f| self.cut(f).cloned()).collect()
    }

    /// `A^t` for `(face, t)` pairs with the default cuts.
    pub fn form(&self, faces_t: &[(usize, f64)]) -> Result<OneForm> {
        let cuts: Vec<(&Cut, f64)> = faces_t.iter().map(|&(f, t)| Ok((self.cut(f)?, t))).collect::<Result<_>>()?;
        cut_one_form(self.map.graph(), &cuts)
    }

    /// `E[exp(i Σ t_j W_λ(f_j))] = (det(I - P^t)/det(I - P))^{-λ}`.
    pub fn winding_charfn_exact(&self, faces_t: &[(usize, f64)], lambda: f64) -> Result<Complex64> {
        exact_charfn(&self.p, &self.form(faces_t)?, 1.0, lambda)
    }

    /// Same quantity with explicitly chosen cuts.
    pub fn winding_charfn_with_cuts(&self, cuts_t: &[(&Cut, f64)], lambda: f64) -> Result<Complex64> {
        exact_charfn(&self.p, &cut_one_form(self.map.graph(), cuts_t)?, 1.0, lambda)
    }

    /// `(Z_GFF^t / Z_GFF)^{2λ}` with
    /// `Z^t = Π_x (2π/(κ_x + d_x))^{1/2} det(I - P^t)^{-1/2}`.
    pub fn gff_partition_ratio(&self, faces_t: &[(usize, f64)], lambda: f64) -> Result<Complex64> {
        check_intensity(lambda)?;
        let a = self.form(faces_t)?;
        let graph = self.map.graph();
        let prefactor: f64 =
            (0..graph.vertex_count()).map(|x| 0.5 * (2.0 * std::f64::consts::PI / graph.total_rate(x)).ln()).sum();
        let log_z = |m: ComplexSquareMatrix| -> Result<Complex64> {
            Ok(Complex64::from(prefactor) - 0.5 * m.identity_minus().log_det()?.to_complex())
        };
        let log_zt = log_z(perturbed_transition(&self.p, &a, 1.0)?)?;
        let log_z0 = log_z(ComplexSquareMatrix::from_real(self.p.matrix()))?;
        let mut diff = log_zt - log_z0;
        diff.im = wrap_phase(diff.im);
        Ok((2.0 * lambda * diff).exp())
    }

    /// Limit covariance of `W_λ(f)/√λ` and `W_λ(g)/√λ`, the polarization of
    /// the quadratic form on the unit cut forms.
    pub fn covariance_kernel(&self, f: usize, g: usize) -> Result<f64> {
        self.covariance_with_cuts(self.cut(f)?, self.cut(g)?)
    }

    pub fn covariance_with_cuts(&self, cut_f: &Cut, cut_g: &Cut) -> Result<f64> {
        let graph = self.map.graph();
        clt_covariance(&self.p, &self.g, &cut_f.one_form(graph)?, &cut_g.one_form(graph)?)
    }

    /// Kernel over the finite faces, in [`PlanarMap::finite_faces`] order.
    pub fn kernel_matrix(&self) -> Result<DMatrix<f64>> {
        let faces = self.map.finite_faces();
        let m = faces.len();
        let mut k = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = self.covariance_kernel(faces[i], faces[j])?;
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// Two-point function from crossing counts,
    /// `2 Σ_{e1 ∈ cut f, e2 ∈ cut g} P_{e1} P_{e2} (G_{e1⁺e2⁻} G_{e2⁺e1⁻} - G_{e1⁺e2⁺} G_{e2⁻e1⁻})`,
    /// plus `±2 P_e G_{e⁺e⁻}` for every edge the two cuts share (sign by
    /// relative orientation), which covers `f = g`. Requires symmetric `P`.
    pub fn two_point_direct(&self, cut_f: &Cut, cut_g: &Cut) -> Result<f64> {
        self.p.require_symmetric()?;
        let p = |a: usize, b: usize| self.p.get(a, b);
        let g = |a: usize, b: usize| self.g.get(a, b);
        let mut total = 0.0;
        for &(m1, p1) in &cut_f.darts {
            for &(m2, p2) in &cut_g.darts {
                total += 2.0 * p(m1, p1) * p(m2, p2) * (g(p1, m2) * g(p2, m1) - g(p1, p2) * g(m2, m1));
                if (m1, p1) == (m2, p2) {
                    total += 2.0 * p(m1, p1) * g(p1, m1);
                } else if (m1, p1) == (p2, m2) {
                    total -= 2.0 * p(m1, p1) * g(p1, m1);
                }
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::loops::oracle_covariance;
    use crate::sampler::{stream_rng, SoupConfig, SoupSampler};

    fn c4_map() -> PlanarMap {
        // square 0=(0,0), 1=(1,0), 2=(1,1), 3=(0,1); edges 0:(0,1) 1:(1,2) 2:(2,3) 3:(3,0)
        corpus::c4_map()
    }

    #[test]
    fn c4_faces() {
        let m = c4_map();
        assert_eq!(m.face_count(), 2);
        let inner = m.face_left_of(0, 1).unwrap();
        assert_ne!(inner, m.infinite_face());
        assert_eq!(m.finite_faces(), vec![inner]);
        assert_eq!(m.face_boundary(inner), vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
    }

    #[test]
    fn grid_faces_satisfy_euler() {
        for (w, h) in [(2, 2), (3, 3), (4, 3), (5, 5)] {
            let m = PlanarMap::grid(w, h, 1.0).unwrap();
            assert_eq!(m.face_count(), (w - 1) * (h - 1) + 1);
            let outer = m.infinite_face();
            assert_eq!(m.face_boundary(outer).len(), 2 * (w - 1) + 2 * (h - 1));
            for f in m.finite_faces() {
                assert_eq!(m.face_boundary(f).len(), 4);
            }
        }
    }

    #[test]
    fn inconsistent_rotation_rejected() {
        let g = corpus::grid(3, 3);
        let good = PlanarMap::grid_embedding(g.clone(), 3, 3).unwrap();
        let mut rot: Vec<Vec<usize>> = (0..9).map(|v| good.rotation(v).to_vec()).collect();
        rot[4].swap(0, 1);
        assert!(matches!(PlanarMap::new(g.clone(), rot.clone(), (1, 0)), Err(SoupError::InvalidEmbedding(_))));
        rot[4].pop();
        assert!(PlanarMap::new(g, rot, (1, 0)).is_err());
    }

    #[test]
    fn map_json() {
        let explicit = r#"{"graph": {"vertices": 4, "edges": [[0,1],[1,2],[2,3],[3,0]], "kappa": [1,1,1,1]},
            "rotation": [[0,3],[1,0],[2,1],[3,2]], "infinite_face_edge": [1,0]}"#;
        assert_eq!(PlanarMap::from_json(explicit).unwrap().face_count(), 2);
        let grid = r#"{"grid": {"width": 3, "height": 3}, "kappa_const": 1.0}"#;
        assert_eq!(PlanarMap::from_json(grid).unwrap().face_count(), 5);
        let lattice = r#"{"grid": {"width": 3, "height": 3}, "kappa_const": 1.0, "lattice": true}"#;
        assert!(PlanarMap::from_json(lattice).unwrap().graph().transition().is_symmetric());
        let bad_outer = explicit.replace("[1,0]}", "[0,2]}");
        assert!(PlanarMap::from_json(&bad_outer).is_err());
    }

    #[test]
    fn c4_cut_and_windings() {
        let m = c4_map();
        let f = m.finite_faces()[0];
        let cut = m.build_cut(f, None).unwrap();
        assert_eq!(cut.darts.len(), 1);
        assert!(matches!(m.build_cut(m.infinite_face(), None), Err(SoupError::InfiniteFace(_))));
        let g = corpus::c4();
        let square = UnrootedLoop::new(&g, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(winding_number(&square, &cut), 1);
        assert_eq!(winding_number(&square.reversed(), &cut), -1);
        let back = UnrootedLoop::new(&g, vec![0, 1]).unwrap();
        assert_eq!(winding_number(&back, &cut), 0);
        let twice = UnrootedLoop::new(&g, vec![0, 1, 2, 3, 0, 1, 2, 3]).unwrap();
        assert_eq!(winding_number(&twice, &cut), 2);
    }

    #[test]
    fn grid_cuts_and_hints() {
        // 4×3 vertices: faces in a 3×2 block
        let m = PlanarMap::grid(4, 3, 1.0).unwrap();
        let f = m.face_left_of(1, 2).unwrap(); // bottom middle square
        let up = m.face_left_of(5, 6).unwrap(); // the square above it
        assert_eq!(m.build_cut(f, None).unwrap().darts.len(), 1);
        let left = m.face_left_of(0, 1).unwrap();
        let hint_a = [f, left, m.infinite_face()];
        let hint_b = [f, up, m.infinite_face()];
        let a = m.build_cut(f, Some(&hint_a)).unwrap();
        let b = m.build_cut(f, Some(&hint_b)).unwrap();
        assert_ne!(a, b);
        // horizontal dual path crosses a vertical edge
        assert_eq!(a.darts[0], (5, 1));
        assert!(m.build_cut(f, Some(&[f, m.infinite_face(), f])).is_err());
        let far = m.face_left_of(6, 7).unwrap();
        assert!(m.build_cut(f, Some(&[f, far, m.infinite_face()])).is_err());
    }

    #[test]
    fn windings_do_not_depend_on_cut() {
        let map = PlanarMap::grid(4, 4, 1.0).unwrap();
        let p = map.graph().transition();
        let s = SoupSampler::new(&p, SoupConfig::new(1.0, 0)).unwrap();
        let mut rng = stream_rng(17, 0);
        let loops: Vec<Vec<usize>> = (0..100)
            .map(|_| {
                let k = s.sample_length(&mut rng);
                s.sample_rooted_loop(k, &mut rng).unwrap().vertices().to_vec()
            })
            .collect();
        for f in map.finite_faces() {
            let base = map.build_cut(f, None).unwrap();
            let other = map.random_cut(f, &mut rng).unwrap();
            for lp in &loops {
                assert_eq!(winding_of_walk(lp, &base), winding_of_walk(lp, &other));
            }
        }
    }

    #[test]
    fn field_sample_basics() {
        let m = c4_map();
        let cut = m.build_cut(m.finite_faces()[0], None).unwrap();
        let cuts = vec![cut];
        assert_eq!(field_sample(&LoopSoupSample::default(), &cuts).values, vec![0]);
        let g = corpus::c4();
        let soup = LoopSoupSample::from_json_lines(&g, "{\"len\":4,\"verts\":[0,1,2,3]}\n").unwrap();
        assert_eq!(field_sample(&soup, &cuts).values, vec![1]);
    }

    #[test]
    fn c4_charfn_and_gff() {
        let model = WindingModel::new(c4_map()).unwrap();
        let f = model.map().finite_faces()[0];
        let pi = std::f64::consts::PI;
        let (p, a) = corpus::c4_with_form();
        let direct = exact_charfn(&p, &a, pi, 1.0).unwrap();
        let w = model.winding_charfn_exact(&[(f, pi)], 1.0).unwrap();
        assert!((w - direct).norm() < 1e-14);
        assert!((model.winding_charfn_exact(&[(f, 0.0)], 2.0).unwrap() - 1.0).norm() < 1e-15);
        let z = model.gff_partition_ratio(&[(f, pi)], 1.0).unwrap();
        assert!((z - w).norm() <= 1e-10 * w.norm());
        let half = model.gff_partition_ratio(&[(f, pi)], 0.5).unwrap();
        assert!((half * half - z).norm() < 1e-13);
    }

    #[test]
    fn c4_kernel() {
        let model = WindingModel::new(c4_map()).unwrap();
        let f = model.map().finite_faces()[0];
        assert!((model.covariance_kernel(f, f).unwrap() - 2.0 / 45.0).abs() < 1e-14);
        let cut = model.cut(f).unwrap();
        assert!((model.two_point_direct(cut, cut).unwrap() - 2.0 / 45.0).abs() < 1e-14);
    }

    #[test]
    fn two_point_matches_kernel_on_lattice_window() {
        let model = WindingModel::new(PlanarMap::lattice_grid(4, 4, 1.0).unwrap()).unwrap();
        let faces = model.map().finite_faces();
        for &f in &faces {
            for &g in &faces {
                let (cf, cg) = (model.cut(f).unwrap(), model.cut(g).unwrap());
                let k = model.covariance_kernel(f, g).unwrap();
                let d = model.two_point_direct(cf, cg).unwrap();
                assert!((k - d).abs() < 1e-12, "{f} {g}: {k} vs {d}");
            }
        }
    }

    #[test]
    fn two_point_rejects_asymmetric() {
        let model = WindingModel::new(PlanarMap::grid(3, 3, 1.0).unwrap()).unwrap();
        let f = model.map().finite_faces()[0];
        let c = model.cut(f).unwrap();
        assert!(matches!(model.two_point_direct(c, c), Err(SoupError::NotSymmetric(_))));
    }

    #[test]
    fn kernel_is_cut_invariant_psd_and_matches_enumeration() {
        let model = WindingModel::new(PlanarMap::grid(3, 3, 1.0).unwrap()).unwrap();
        let k = model.kernel_matrix().unwrap();
        assert!((&k - k.transpose()).amax() < 1e-15);
        assert!(k.clone().symmetric_eigenvalues().iter().all(|&e| e > -1e-8));
        let mut rng = stream_rng(3, 1);
        let faces = model.map().finite_faces();
        for &f in &faces {
            let alt = model.map().random_cut(f, &mut rng).unwrap();
            let base = model.covariance_kernel(f, faces[0]).unwrap();
            let other = model.covariance_with_cuts(&alt, model.cut(faces[0]).unwrap()).unwrap();
            assert!((base - other).abs() < 1e-13);
        }
        let a = model.form(&[(faces[0], 1.0)]).unwrap();
        let b = model.form(&[(faces[1], 1.0)]).unwrap();
        let oracle = oracle_covariance(model.transition(), &a, &b, 14).unwrap();
        let exact = model.covariance_kernel(faces[0], faces[1]).unwrap();
        assert!((oracle - exact).abs() < 1e-3, "{oracle} vs {exact}");
    }

    #[test]
    fn kernel_decays_along_a_row() {
        let model = WindingModel::new(PlanarMap::lattice_grid(9, 3, 1.0).unwrap()).unwrap();
        let m = model.map();
        let row: Vec<usize> = (0..8).map(|x| m.face_left_of(x, x + 1).unwrap()).collect();
        let vals: Vec<f64> = row.iter().map(|&g| model.covariance_kernel(row[0], g).unwrap().abs()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    }

    #[test]
    fn overlapping_cuts_accumulate() {
        let m = PlanarMap::grid(4, 3, 1.0).unwrap();
        let f = m.face_left_of(5, 6).unwrap();
        let c = m.build_cut(f, None).unwrap();
        let g = m.graph();
        let twice = cut_one_form(g, &[(&c, 1.0), (&c, 2.0)]).unwrap();
        assert_eq!(twice, c.one_form(g).unwrap().scale(3.0));
    }
}
