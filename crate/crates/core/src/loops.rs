//! Discrete loops, the loop measure and its determinant functionals.
//!
//! A rooted loop of length `k` is a cyclic vertex sequence `(x_0, …, x_{k-1})`
//! with an implicit closing step back to `x_0`. Its weight is
//! `(1/k) ∏ P` over the `k` steps. An unrooted loop is a rotation class; its
//! mass is the sum of the weights of its *distinct* rooted representatives,
//! which is `∏ P / m` where `m` is the number of rotations fixing the sequence.
//! With this convention the loops of length `k` carry total mass
//! `Tr(P^k) / k`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SoupError};
use crate::graph::{perturbed_transition, GreensFunction, OneForm, TransitionMatrix, WeightedGraph};
use crate::linalg::{real_matrix_power, ComplexSquareMatrix};

/// Default cap on enumerated loop classes.
pub const DEFAULT_ENUMERATION_CAP: usize = 50_000_000;

/// Safety factor applied to the power-iteration spectral radius in tail bounds.
pub const RHO_SAFETY: f64 = 1.01;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RootedLoop {
    verts: Vec<usize>,
}

impl RootedLoop {
    pub fn new(graph: &WeightedGraph, verts: Vec<usize>) -> Result<Self> {
        validate_cycle(graph, &verts)?;
        Ok(Self { verts })
    }

    /// Skips validation; the caller guarantees cyclic adjacency.
    pub(crate) fn new_unchecked(verts: Vec<usize>) -> Self {
        Self { verts }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.verts
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn root(&self) -> usize {
        self.verts[0]
    }

    pub fn rotated(&self, shift: usize) -> Self {
        let mut verts = self.verts.clone();
        verts.rotate_left(shift % self.verts.len());
        Self { verts }
    }

    pub fn reversed(&self) -> Self {
        Self { verts: self.verts.iter().rev().copied().collect() }
    }

    pub fn to_unrooted(&self) -> UnrootedLoop {
        UnrootedLoop::from_sequence(self.verts.clone())
    }
}

fn validate_cycle(graph: &WeightedGraph, verts: &[usize]) -> Result<()> {
    let k = verts.len();
    if k < 2 {
        return Err(SoupError::InvalidLoop(format!("length {k} < 2")));
    }
    for i in 0..k {
        let (x, y) = (verts[i], verts[(i + 1) % k]);
        if !graph.adjacent(x, y) {
            return Err(SoupError::NotAdjacent(x, y));
        }
    }
    Ok(())
}

/// Rotation class of rooted loops, stored as its lexicographically least rotation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnrootedLoop {
    verts: Vec<usize>,
    multiplicity: usize,
}

impl UnrootedLoop {
    pub fn new(graph: &WeightedGraph, verts: Vec<usize>) -> Result<Self> {
        validate_cycle(graph, &verts)?;
        Ok(Self::from_sequence(verts))
    }

    pub(crate) fn from_sequence(mut verts: Vec<usize>) -> Self {
        let shift = least_rotation(&verts);
        verts.rotate_left(shift);
        let multiplicity = verts.len() / minimal_period(&verts);
        Self { verts, multiplicity }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.verts
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    /// Number of rotations fixing the sequence (divides the length).
    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    /// Number of distinct rooted representatives, `len / multiplicity`.
    pub fn distinct_rotations(&self) -> usize {
        self.verts.len() / self.multiplicity
    }

    pub fn reversed(&self) -> Self {
        Self::from_sequence(self.verts.iter().rev().copied().collect())
    }

    pub fn integral(&self, a: &OneForm) -> f64 {
        a.integrate(&self.verts)
    }
}

/// Start index of the lexicographically least rotation.
pub fn least_rotation(s: &[usize]) -> usize {
    let n = s.len();
    if n < 2 {
        return 0;
    }
    let (mut i, mut j, mut k) = (0usize, 1usize, 0usize);
    while i < n && j < n && k < n {
        let a = s[(i + k) % n];
        let b = s[(j + k) % n];
        if a == b {
            k += 1;
            continue;
        }
        if a > b {
            i += k + 1;
        } else {
            j += k + 1;
        }
        if i == j {
            j += 1;
        }
        k = 0;
    }
    i.min(j)
}

/// Smallest `p` dividing `len` with `s` invariant under rotation by `p`.
pub fn minimal_period(s: &[usize]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let mut pi = vec![0usize; n];
    for q in 1..n {
        let mut k = pi[q - 1];
        while k > 0 && s[q] != s[k] {
            k = pi[k - 1];
        }
        if s[q] == s[k] {
            k += 1;
        }
        pi[q] = k;
    }
    let p = n - pi[n - 1];
    if n.is_multiple_of(p) {
        p
    } else {
        n
    }
}

fn transition_product(p: &TransitionMatrix, verts: &[usize]) -> Result<f64> {
    let k = verts.len();
    let mut prod = 1.0;
    for i in 0..k {
        let (x, y) = (verts[i], verts[(i + 1) % k]);
        if x >= p.dim() || y >= p.dim() || !p.graph().adjacent(x, y) {
            return Err(SoupError::NotAdjacent(x, y));
        }
        prod *= p.get(x, y);
    }
    Ok(prod)
}

/// `w_r = (1/k) ∏ P`.
pub fn rooted_weight(lp: &RootedLoop, p: &TransitionMatrix) -> Result<f64> {
    Ok(transition_product(p, lp.vertices())? / lp.len() as f64)
}

/// `μ(γ) = ∏ P / m`.
pub fn mu_of_unrooted(lp: &UnrootedLoop, p: &TransitionMatrix) -> Result<f64> {
    Ok(transition_product(p, lp.vertices())? / lp.multiplicity() as f64)
}

/// Mass of all loops of length `k`, `Tr(P^k)/k`.
pub fn length_mass(p: &TransitionMatrix, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(SoupError::InvalidArgument(format!("loop length {k} < 2")));
    }
    Ok(real_matrix_power(p.matrix(), k).trace() / k as f64)
}

/// Total loop mass `-log det(I - P)`.
pub fn total_mass(p: &TransitionMatrix) -> Result<f64> {
    let ld = ComplexSquareMatrix::from_real(p.matrix()).identity_minus().log_det()?;
    Ok(-ld.log_abs)
}

/// `log det(I - P^β) - log det(I - P)`.
///
/// Both determinants are positive reals (`diag(κ+d)(I - P^β)` is Hermitian
/// positive definite), so the wrapped phase is round-off only.
pub fn log_det_ratio(p: &TransitionMatrix, a: &OneForm, beta: f64) -> Result<Complex64> {
    let num = perturbed_transition(p, a, beta)?.identity_minus().log_det()?;
    let den = ComplexSquareMatrix::from_real(p.matrix()).identity_minus().log_det()?;
    Ok(num.ratio(den))
}

/// `E[exp(iβ ∫_{L^λ} A)] = (det(I - P^β)/det(I - P))^{-λ}`.
pub fn exact_charfn(p: &TransitionMatrix, a: &OneForm, beta: f64, lambda: f64) -> Result<Complex64> {
    check_intensity(lambda)?;
    Ok((-lambda * log_det_ratio(p, a, beta)?).exp())
}

pub(crate) fn check_intensity(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(SoupError::InvalidArgument(format!("intensity {lambda} must be positive")))
    }
}

fn check_form(p: &TransitionMatrix, a: &OneForm) -> Result<()> {
    if a.dim() != p.dim() {
        return Err(SoupError::DimensionMismatch { expected: p.dim(), found: a.dim() });
    }
    Ok(())
}

/// The two trace terms of the Gaussian limit covariance of `(A, B)`:
/// `Tr((P⊙A⊙B)G)` and `Tr((P⊙A)G(P⊙B)G)`.
pub fn clt_trace_terms(p: &TransitionMatrix, g: &GreensFunction, a: &OneForm, b: &OneForm) -> Result<(f64, f64)> {
    check_form(p, a)?;
    check_form(p, b)?;
    let pm = p.matrix();
    let gm = g.matrix();
    let pa = pm.component_mul(a.matrix());
    let pb = pm.component_mul(b.matrix());
    let first = (pa.component_mul(b.matrix()) * gm).trace();
    let second = (&pa * gm * &pb * gm).trace();
    Ok((first, second))
}

/// Bilinear limit covariance `Tr((P⊙A⊙B)G) + Tr((P⊙A)G(P⊙B)G)`.
pub fn clt_covariance(p: &TransitionMatrix, g: &GreensFunction, a: &OneForm, b: &OneForm) -> Result<f64> {
    let (first, second) = clt_trace_terms(p, g, a, b)?;
    Ok(first + second)
}

/// Limit variance `σ²(A)` of `λ^{-1/2} ∫_{L^λ} A`; equals `∫(∫_γ A)² dμ(γ)`.
pub fn clt_variance(p: &TransitionMatrix, g: &GreensFunction, a: &OneForm) -> Result<f64> {
    clt_covariance(p, g, a, a)
}

/// `exp(-s² σ²(A) / 2)`.
pub fn clt_limit_charfn(p: &TransitionMatrix, g: &GreensFunction, a: &OneForm, s: f64) -> Result<f64> {
    Ok((-0.5 * s * s * clt_variance(p, g, a)?).exp())
}

/// Central second difference of `-log` of the `λ = 1` characteristic function at 0.
pub fn variance_by_finite_difference(p: &TransitionMatrix, a: &OneForm, h: f64) -> Result<f64> {
    let fp = log_det_ratio(p, a, h)?.re;
    let fm = log_det_ratio(p, a, -h)?.re;
    let f0 = log_det_ratio(p, a, 0.0)?.re;
    Ok((fp + fm - 2.0 * f0) / (h * h))
}

/// `|½ Σ P P A B [G G - G G] - Tr((P⊙A)G(P⊙B)G)|` for symmetric `P`.
pub fn trace_identity_residual(p: &TransitionMatrix, g: &GreensFunction, a: &OneForm, b: &OneForm) -> Result<f64> {
    p.require_symmetric()?;
    let (_, rhs) = clt_trace_terms(p, g, a, b)?;
    Ok((four_point_sum(p, g, a, b) - rhs).abs())
}

/// `½ Σ_{x0~x1, x2~x3} P P A_{x0x1} B_{x2x3} [G_{x0x3}G_{x1x2} - G_{x0x2}G_{x1x3}]`.
pub fn four_point_sum(p: &TransitionMatrix, g: &GreensFunction, a: &OneForm, b: &OneForm) -> f64 {
    let graph = p.graph();
    let n = p.dim();
    let mut total = 0.0;
    for x0 in 0..n {
        for &x1 in graph.neighbors(x0) {
            let left = p.get(x0, x1) * a.get(x0, x1);
            if left == 0.0 {
                continue;
            }
            for x2 in 0..n {
                for &x3 in graph.neighbors(x2) {
                    let right = p.get(x2, x3) * b.get(x2, x3);
                    if right == 0.0 {
                        continue;
                    }
                    let gg = g.get(x0, x3) * g.get(x1, x2) - g.get(x0, x2) * g.get(x1, x3);
                    total += left * right * gg;
                }
            }
        }
    }
    0.5 * total
}

/// Geometric tail `Σ_{k > k_max} n ρ^k / k` with `ρ` the power-iteration
/// estimate times [`RHO_SAFETY`]. Infinite when the inflated `ρ` reaches 1.
pub fn tail_bound(p: &TransitionMatrix, k_max: usize) -> f64 {
    let rho = RHO_SAFETY * p.spectral_radius_estimate();
    geometric_tail(p.dim(), rho, k_max)
}

/// Tail of `Σ μ(γ)(∫_γ A)²` beyond `k_max`: [`tail_bound`]'s terms times
/// `(k·max|A|)²`, since `|∫_γ A| ≤ |γ|·max|A|`.
pub fn second_moment_tail_bound(p: &TransitionMatrix, a: &OneForm, k_max: usize) -> f64 {
    let rho = RHO_SAFETY * p.spectral_radius_estimate();
    let amax = a.matrix().amax();
    if amax == 0.0 {
        return 0.0;
    }
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    let mut k = k_max + 1;
    let mut term_pow = rho.powi(k as i32);
    loop {
        let term = term_pow * k as f64;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        k += 1;
        term_pow *= rho;
    }
    p.dim() as f64 * amax * amax * sum
}

pub(crate) fn geometric_tail(n: usize, rho: f64, k_max: usize) -> f64 {
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    if rho <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut k = k_max + 1;
    let mut term_pow = rho.powi(k as i32);
    loop {
        let term = term_pow / k as f64;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        k += 1;
        term_pow *= rho;
    }
    n as f64 * sum
}

/// One enumerated loop class with its mass.
#[derive(Clone, Debug, PartialEq)]
pub struct EnumeratedLoop {
    pub lp: UnrootedLoop,
    pub weight: f64,
}

/// Every unrooted loop of length `2..=k_max`, each exactly once, with `μ(γ)`.
///
/// Fails with [`SoupError::EnumerationCap`] once more than `cap` classes are found.
pub fn enumerate_loops(p: &TransitionMatrix, k_max: usize, cap: usize) -> Result<Vec<EnumeratedLoop>> {
    let mut out = Vec::new();
    visit_loops(p, k_max, cap, |verts, m, weight| {
        out.push(EnumeratedLoop {
            lp: UnrootedLoop { verts: verts.to_vec(), multiplicity: m },
            weight,
        });
    })?;
    Ok(out)
}

/// Streaming form of [`enumerate_loops`]: calls `visit(canonical vertices,
/// multiplicity, μ-weight)` per class and returns the number of classes.
///
/// Closed walks are extended depth-first from each root `r`, restricted to
/// vertices `≥ r` (a least rotation starts at its minimum), and kept only if
/// they equal their least rotation.
pub fn visit_loops<F>(p: &TransitionMatrix, k_max: usize, cap: usize, mut visit: F) -> Result<usize>
where
    F: FnMut(&[usize], usize, f64),
{
    if k_max < 2 {
        return Err(SoupError::InvalidArgument(format!("k_max {k_max} < 2")));
    }
    let graph = p.graph();
    let dist = graph.distances();
    let mut count = 0usize;
    let mut seq: Vec<usize> = Vec::with_capacity(k_max);
    let mut prods: Vec<f64> = Vec::with_capacity(k_max);
    #[allow(clippy::needless_range_loop)]
    for root in 0..graph.vertex_count() {
        seq.clear();
        prods.clear();
        seq.push(root);
        prods.push(1.0);
        // iterative DFS over neighbour cursors
        let mut cursor: Vec<usize> = vec![0];
        while let Some(&c) = cursor.last() {
            let depth = seq.len();
            let x = *seq.last().unwrap();
            let nbrs = graph.neighbors(x);
            if c >= nbrs.len() {
                cursor.pop();
                seq.pop();
                prods.pop();
                continue;
            }
            *cursor.last_mut().unwrap() += 1;
            let y = nbrs[c];
            if y < root {
                continue;
            }
            if y == root {
                if depth >= 2 {
                    let shift = least_rotation(&seq);
                    if shift == 0 || is_rotation_equal(&seq, shift) {
                        count += 1;
                        if count > cap {
                            return Err(SoupError::EnumerationCap(cap));
                        }
                        let m = depth / minimal_period(&seq);
                        let w = prods[depth - 1] * p.get(x, root) / m as f64;
                        visit(&seq, m, w);
                    }
                }
                // walks may also pass through the root and continue
                if depth + 2 > k_max {
                    continue;
                }
            } else if depth + dist[y][root] > k_max {
                // a walk through y needs at least dist(y, root) more steps to close
                continue;
            }
            let w = prods[depth - 1] * p.get(x, y);
            seq.push(y);
            prods.push(w);
            cursor.push(0);
        }
    }
    Ok(count)
}

fn is_rotation_equal(s: &[usize], shift: usize) -> bool {
    let n = s.len();
    (0..n).all(|i| s[i] == s[(i + shift) % n])
}

/// Truncated Campbell sum `Σ_{|γ| ≤ k_max} μ(γ)(e^{iβ∫_γ A} - 1)`.
pub fn oracle_log_charfn(p: &TransitionMatrix, a: &OneForm, beta: f64, k_max: usize) -> Result<Complex64> {
    let mut sum = Complex64::new(0.0, 0.0);
    visit_loops(p, k_max, DEFAULT_ENUMERATION_CAP, |verts, _, w| {
        sum += w * (Complex64::new(0.0, beta * a.integrate(verts)).exp() - 1.0);
    })?;
    Ok(sum)
}

/// Truncated second moment `Σ_{|γ| ≤ k_max} μ(γ) (∫_γ A)(∫_γ B)`.
pub fn oracle_covariance(p: &TransitionMatrix, a: &OneForm, b: &OneForm, k_max: usize) -> Result<f64> {
    let mut sum = 0.0;
    visit_loops(p, k_max, DEFAULT_ENUMERATION_CAP, |verts, _, w| {
        sum += w * a.integrate(verts) * b.integrate(verts);
    })?;
    Ok(sum)
}

/// Real matrix `P ⊙ A`.
pub fn hadamard_form(p: &TransitionMatrix, a: &OneForm) -> DMatrix<f64> {
    p.matrix().component_mul(a.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use proptest::prelude::*;

    #[test]
    fn rotation_helpers() {
        assert_eq!(least_rotation(&[2, 0, 1]), 1);
        assert_eq!(least_rotation(&[1, 0, 1, 0]), 1);
        assert_eq!(minimal_period(&[0, 1, 0, 1]), 2);
        assert_eq!(minimal_period(&[0, 1, 0, 2]), 4);
        assert_eq!(minimal_period(&[3, 3, 3]), 1);
    }

    #[test]
    fn rooted_weights() {
        let g = corpus::k3();
        let p = g.transition();
        let two = RootedLoop::new(&g, vec![0, 1]).unwrap();
        assert!((rooted_weight(&two, &p).unwrap() - 1.0 / 18.0).abs() < 1e-15);
        let three = RootedLoop::new(&g, vec![0, 1, 2]).unwrap();
        assert!((rooted_weight(&three, &p).unwrap() - 1.0 / 81.0).abs() < 1e-15);
        for s in 0..3 {
            let r = three.rotated(s);
            assert_eq!(rooted_weight(&r, &p).unwrap(), rooted_weight(&three, &p).unwrap());
        }
    }

    #[test]
    fn invalid_loops() {
        let g = corpus::c4();
        assert!(matches!(RootedLoop::new(&g, vec![0, 2]), Err(SoupError::NotAdjacent(0, 2))));
        assert!(RootedLoop::new(&g, vec![0]).is_err());
        // a K3 loop evaluated against C4's transition matrix
        let k3 = corpus::k3();
        let lp = RootedLoop::new(&k3, vec![0, 1, 2]).unwrap();
        assert!(rooted_weight(&lp, &g.transition()).is_err());
    }

    #[test]
    fn unrooted_masses() {
        let k3 = corpus::k3();
        let p = k3.transition();
        let two = UnrootedLoop::new(&k3, vec![1, 0]).unwrap();
        assert_eq!(two.vertices(), &[0, 1]);
        assert_eq!(two.multiplicity(), 1);
        assert!((mu_of_unrooted(&two, &p).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        let tri = UnrootedLoop::new(&k3, vec![2, 0, 1]).unwrap();
        assert!((mu_of_unrooted(&tri, &p).unwrap() - 1.0 / 27.0).abs() < 1e-15);

        let c4 = corpus::c4();
        let pc = c4.transition();
        let periodic = UnrootedLoop::new(&c4, vec![1, 0, 1, 0]).unwrap();
        assert_eq!(periodic.vertices(), &[0, 1, 0, 1]);
        assert_eq!(periodic.multiplicity(), 2);
        assert_eq!(periodic.distinct_rotations(), 2);
        assert!((mu_of_unrooted(&periodic, &pc).unwrap() - 1.0 / 162.0).abs() < 1e-15);
    }

    #[test]
    fn length_masses_k3() {
        let p = corpus::k3().transition();
        assert!((length_mass(&p, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((length_mass(&p, 3).unwrap() - 2.0 / 27.0).abs() < 1e-15);
        assert!(length_mass(&p, 1).is_err());
    }

    #[test]
    fn length_mass_matches_enumeration() {
        for g in [corpus::k3(), corpus::c4(), corpus::grid(3, 2)] {
            let p = g.transition();
            let loops = enumerate_loops(&p, 10, DEFAULT_ENUMERATION_CAP).unwrap();
            for k in 2..=10 {
                let by_enum: f64 = loops.iter().filter(|l| l.lp.len() == k).map(|l| l.weight).sum();
                let by_trace = length_mass(&p, k).unwrap();
                assert!((by_enum - by_trace).abs() < 1e-12, "k={k}: {by_enum} vs {by_trace}");
            }
        }
    }

    #[test]
    fn total_mass_values() {
        let p = corpus::k3().transition();
        let tm = total_mass(&p).unwrap();
        assert!((tm - (27.0f64 / 16.0).ln()).abs() < 1e-14);
        let partial: f64 = (2..=20).map(|k| length_mass(&p, k).unwrap()).sum();
        assert!((tm - partial).abs() <= 10.0 * (2.0f64 / 3.0).powi(21));
        let edge = crate::graph::WeightedGraph::new(2, &[(0, 1)], vec![1.0, 1.0]).unwrap();
        assert!((total_mass(&edge.transition()).unwrap() - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn exact_charfn_k3_values() {
        let (p, a) = corpus::k3_with_form();
        let pi = std::f64::consts::PI;
        let v1 = exact_charfn(&p, &a, pi, 1.0).unwrap();
        assert!((v1 - Complex64::new(0.8, 0.0)).norm() < 1e-12);
        let v2 = exact_charfn(&p, &a, pi, 2.0).unwrap();
        assert!((v2 - Complex64::new(0.64, 0.0)).norm() < 1e-12);
        assert_eq!(exact_charfn(&p, &a, 0.0, 3.0).unwrap(), Complex64::new(1.0, 0.0));
        assert!(exact_charfn(&p, &a, 1.0, 0.0).is_err());
    }

    #[test]
    fn det_oracle_k3() {
        // det(I - P^π) by cofactor expansion; entries (0,1),(1,0) flip sign
        let t: f64 = 1.0 / 3.0;
        let m = [[1.0, t, -t], [t, 1.0, -t], [-t, -t, 1.0]];
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        assert!((det - 20.0 / 27.0).abs() < 1e-15);
        let (p, a) = corpus::k3_with_form();
        let num = perturbed_transition(&p, &a, std::f64::consts::PI).unwrap().identity_minus().det();
        assert!((num - Complex64::new(det, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn clt_variance_values() {
        let (p, a) = corpus::k3_with_form();
        let g = GreensFunction::new(&p).unwrap();
        let (t1, t2) = clt_trace_terms(&p, &g, &a, &a).unwrap();
        assert!((t1 - 0.5).abs() < 1e-14);
        assert!((t2 + 3.0 / 8.0).abs() < 1e-14);
        assert!((clt_variance(&p, &g, &a).unwrap() - 0.125).abs() < 1e-14);

        let (pc, ac) = corpus::c4_with_form();
        let gc = GreensFunction::new(&pc).unwrap();
        let (t1, t2) = clt_trace_terms(&pc, &gc, &ac, &ac).unwrap();
        assert!((t1 - 0.4).abs() < 1e-14);
        assert!((t2 + 16.0 / 45.0).abs() < 1e-14);
        assert_eq!(clt_variance(&pc, &gc, &OneForm::zero(4)).unwrap(), 0.0);
    }

    #[test]
    fn clt_limit_values() {
        let (p, a) = corpus::k3_with_form();
        let g = GreensFunction::new(&p).unwrap();
        assert!((clt_limit_charfn(&p, &g, &a, 1.0).unwrap() - (-1.0f64 / 16.0).exp()).abs() < 1e-14);
        assert_eq!(clt_limit_charfn(&p, &g, &a, 0.0).unwrap(), 1.0);
        let (pc, ac) = corpus::c4_with_form();
        let gc = GreensFunction::new(&pc).unwrap();
        assert!((clt_limit_charfn(&pc, &gc, &ac, 3.0).unwrap() - (-0.2f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn variance_matches_enumeration_partial_sums() {
        let (p, a) = corpus::k3_with_form();
        let s9 = oracle_covariance(&p, &a, &a, 9).unwrap();
        assert!((s9 - 0.1194).abs() < 5e-4, "{s9}");
        let (pc, ac) = corpus::c4_with_form();
        let s16 = oracle_covariance(&pc, &ac, &ac, 16).unwrap();
        assert!((s16 - 0.04429).abs() < 5e-5, "{s16}");
    }

    #[test]
    fn finite_difference_variance() {
        for (p, a) in [corpus::k3_with_form(), corpus::c4_with_form()] {
            let g = GreensFunction::new(&p).unwrap();
            let exact = clt_variance(&p, &g, &a).unwrap();
            let fd = variance_by_finite_difference(&p, &a, 1e-3).unwrap();
            assert!((fd - exact).abs() <= 1e-5 * exact, "{fd} vs {exact}");
        }
    }

    #[test]
    fn trace_identity_examples() {
        let (p, a) = corpus::k3_with_form();
        let g = GreensFunction::new(&p).unwrap();
        assert!((four_point_sum(&p, &g, &a, &a) + 3.0 / 8.0).abs() < 1e-14);
        assert!(trace_identity_residual(&p, &g, &a, &a).unwrap() < 1e-10);
        let (pc, ac) = corpus::c4_with_form();
        let gc = GreensFunction::new(&pc).unwrap();
        assert!((four_point_sum(&pc, &gc, &ac, &ac) + 16.0 / 45.0).abs() < 1e-14);
        let z = OneForm::zero(4);
        assert_eq!(trace_identity_residual(&pc, &gc, &z, &z).unwrap(), 0.0);
    }

    #[test]
    fn trace_identity_rejects_nonsymmetric() {
        let g = crate::graph::WeightedGraph::new(3, &[(0, 1), (1, 2)], vec![1.0; 3]).unwrap();
        let p = g.transition();
        let gr = GreensFunction::new(&p).unwrap();
        let a = OneForm::from_edges(&g, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(trace_identity_residual(&p, &gr, &a, &a), Err(SoupError::NotSymmetric(_))));
    }

    #[test]
    fn enumeration_small_cases() {
        let p = corpus::k3().transition();
        let loops = enumerate_loops(&p, 3, 1000).unwrap();
        let twos: Vec<_> = loops.iter().filter(|l| l.lp.len() == 2).collect();
        let threes: Vec<_> = loops.iter().filter(|l| l.lp.len() == 3).collect();
        assert_eq!(twos.len(), 3);
        assert_eq!(threes.len(), 2);
        assert!(twos.iter().all(|l| (l.weight - 1.0 / 9.0).abs() < 1e-15));
        assert!(threes.iter().all(|l| (l.weight - 1.0 / 27.0).abs() < 1e-15));
        let total: f64 = loops.iter().map(|l| l.weight).sum();
        assert!((total - (1.0 / 3.0 + 2.0 / 27.0)).abs() < 1e-14);

        let pc = corpus::c4().transition();
        let loops = enumerate_loops(&pc, 3, 1000).unwrap();
        assert_eq!(loops.len(), 4);
        assert!(loops.iter().all(|l| l.lp.len() == 2));
    }

    #[test]
    fn enumeration_cap() {
        let p = corpus::k3().transition();
        assert!(matches!(enumerate_loops(&p, 8, 10), Err(SoupError::EnumerationCap(10))));
    }

    #[test]
    fn enumeration_is_canonical_and_unique() {
        let p = corpus::grid(3, 2).transition();
        let loops = enumerate_loops(&p, 8, DEFAULT_ENUMERATION_CAP).unwrap();
        let mut seen = std::collections::HashSet::new();
        for l in &loops {
            let canon = UnrootedLoop::from_sequence(l.lp.vertices().to_vec());
            assert_eq!(&canon, &l.lp);
            assert!(seen.insert(canon));
        }
    }

    #[test]
    fn oracle_matches_determinant_within_tail() {
        let (p, a) = corpus::k3_with_form();
        for beta in [0.3, 1.0, 2.5] {
            let det = log_det_ratio(&p, &a, beta).unwrap();
            let enumerated = oracle_log_charfn(&p, &a, beta, 14).unwrap();
            assert!((enumerated + det).norm() <= tail_bound(&p, 14), "beta={beta}");
        }
    }

    fn arb_form() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (prop::collection::vec(-2.0..2.0f64, 7), prop::collection::vec(-2.0..2.0f64, 7))
    }

    fn form_on(g: &WeightedGraph, vals: &[f64]) -> OneForm {
        let triples: Vec<_> = g.edges().iter().zip(vals).map(|(&(x, y), &v)| (x, y, v)).collect();
        OneForm::from_edges(g, &triples).unwrap()
    }

    proptest! {
        #[test]
        fn charfn_modulus_and_conjugation(vals in prop::collection::vec(-2.0..2.0f64, 7), beta in -3.2..3.2f64, lambda in 0.1..3.0f64) {
            let g = corpus::grid(3, 2);
            let p = g.transition();
            let a = form_on(&g, &vals);
            let plus = exact_charfn(&p, &a, beta, lambda).unwrap();
            let minus = exact_charfn(&p, &a, -beta, lambda).unwrap();
            prop_assert!(plus.norm() <= 1.0 + 1e-12);
            prop_assert!((plus.conj() - minus).norm() < 1e-12);
        }

        #[test]
        fn log_det_consistent_with_det(vals in prop::collection::vec(-2.0..2.0f64, 7), beta in -3.15..3.15f64) {
            let g = corpus::grid(3, 2);
            let p = g.transition();
            let a = form_on(&g, &vals);
            let m = perturbed_transition(&p, &a, beta).unwrap().identity_minus();
            let ld = m.log_det().unwrap();
            let d = m.det();
            prop_assert!((ld.log_abs - d.norm().ln()).abs() <= 1e-10 * (1.0 + ld.log_abs.abs()));
        }

        #[test]
        fn variance_is_a_quadratic_form((av, bv) in arb_form(), c in -3.0..3.0f64) {
            let g = corpus::grid(3, 2);
            let p = g.transition();
            let gr = GreensFunction::new(&p).unwrap();
            let a = form_on(&g, &av);
            let b = form_on(&g, &bv);
            let sa = clt_variance(&p, &gr, &a).unwrap();
            let sb = clt_variance(&p, &gr, &b).unwrap();
            prop_assert!(sa >= -1e-10);
            let ab = clt_variance(&p, &gr, &a.add(&b)).unwrap() - sa - sb;
            let ba = clt_variance(&p, &gr, &b.add(&a)).unwrap() - sb - sa;
            prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
            let scaled = clt_variance(&p, &gr, &a.scale(c)).unwrap();
            prop_assert!((scaled - c * c * sa).abs() <= 1e-12 * (1.0 + (c * c * sa).abs()));
            let cross = 2.0 * clt_covariance(&p, &gr, &a, &b).unwrap();
            prop_assert!((cross - ab).abs() <= 1e-12 * (1.0 + ab.abs()));
        }

        #[test]
        fn trace_identity_holds_for_symmetric_p((av, bv) in arb_form(), kappa in 0.05..5.0f64) {
            let g = WeightedGraph::lattice_grid(3, 2, kappa).unwrap();
            prop_assert!(g.transition().is_symmetric());
            let p = g.transition();
            let gr = GreensFunction::new(&p).unwrap();
            let a = form_on(&g, &av);
            let b = form_on(&g, &bv);
            prop_assert!(trace_identity_residual(&p, &gr, &a, &b).unwrap() <= 1e-10);
        }
    }
}
