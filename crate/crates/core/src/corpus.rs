//! Small reference graphs used throughout the tests and the oracle suite.

use crate::graph::{OneForm, TransitionMatrix, WeightedGraph};
use crate::planar::PlanarMap;

/// Triangle with unit killing.
pub fn k3() -> WeightedGraph {
    WeightedGraph::new(3, &[(0, 1), (1, 2), (0, 2)], vec![1.0; 3]).expect("valid K3")
}

/// Four-cycle with unit killing.
pub fn c4() -> WeightedGraph {
    WeightedGraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], vec![1.0; 4]).expect("valid C4")
}

/// `width × height` vertex grid with unit killing.
pub fn grid(width: usize, height: usize) -> WeightedGraph {
    WeightedGraph::grid(width, height, 1.0).expect("valid grid")
}

/// `P` on K3 with the one-form `A_01 = 1`.
pub fn k3_with_form() -> (TransitionMatrix, OneForm) {
    let g = k3();
    let a = OneForm::from_edges(&g, &[(0, 1, 1.0)]).expect("edge");
    (g.transition(), a)
}

/// `P` on C4 with the one-form `A_01 = 1`.
pub fn c4_with_form() -> (TransitionMatrix, OneForm) {
    let g = c4();
    let a = OneForm::from_edges(&g, &[(0, 1, 1.0)]).expect("edge");
    (g.transition(), a)
}

/// The named graphs of the verification corpus: K3, C4 and the grids with
/// 2×2 and 2×3 faces, all with unit killing.
pub fn named() -> Vec<(&'static str, WeightedGraph)> {
    vec![("K3", k3()), ("C4", c4()), ("grid3x3", grid(3, 3)), ("grid4x3", grid(4, 3))]
}

/// Deterministic one-form on every edge with values in `[-1, 1]`.
pub fn sample_form(g: &WeightedGraph, salt: u64) -> OneForm {
    let mut state = salt ^ 0x9e37_79b9_7f4a_7c15;
    let triples: Vec<_> = g
        .edges()
        .iter()
        .map(|&(x, y)| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            (x, y, 2.0 * u - 1.0)
        })
        .collect();
    OneForm::from_edges(g, &triples).expect("edges of g")
}

/// K3 embedded as a triangle; the face left of `1 → 0` is infinite.
pub fn k3_map() -> PlanarMap {
    PlanarMap::new(k3(), vec![vec![0, 2], vec![1, 0], vec![2, 1]], (1, 0)).expect("valid K3 map")
}

/// C4 embedded as a square; the face left of `1 → 0` is infinite.
pub fn c4_map() -> PlanarMap {
    PlanarMap::new(c4(), vec![vec![0, 3], vec![1, 0], vec![2, 1], vec![3, 2]], (1, 0)).expect("valid C4 map")
}

/// Planar embeddings of the [`named`] graphs, in the same order.
pub fn named_maps() -> Vec<(&'static str, PlanarMap)> {
    vec![
        ("K3", k3_map()),
        ("C4", c4_map()),
        ("grid3x3", PlanarMap::grid(3, 3, 1.0).expect("valid grid")),
        ("grid4x3", PlanarMap::grid(4, 3, 1.0).expect("valid grid")),
    ]
}
