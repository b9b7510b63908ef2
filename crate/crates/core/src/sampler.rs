//! Exact Monte Carlo sampling of random walk loop soups.
//!
//! A soup of intensity `λ` is drawn as a Poisson number of loops with mean
//! `λ · (-log det(I - P))`; each loop gets a length `k` with probability
//! proportional to `Tr(P^k)/k`, a root `x_0` with probability
//! `(P^k)_{x0x0} / Tr(P^k)`, and then its steps from the Markov bridge
//! `P_vw (P^{r-1})_{w x0} / (P^r)_{v x0}`, `r` being the number of steps left.
//! The rooted sequence has probability `∏P / Tr(P^k)`, so forgetting the root
//! gives the loop measure restricted to length `k`, normalized.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SoupError};
use crate::graph::{OneForm, TransitionMatrix, WeightedGraph};
use crate::linalg::ComplexSquareMatrix;
use crate::loops::{check_intensity, geometric_tail, total_mass, RootedLoop, UnrootedLoop, RHO_SAFETY};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoupConfig {
    pub intensity: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_k_cap")]
    pub k_cap: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_streams")]
    pub streams: usize,
}

fn default_epsilon() -> f64 {
    1e-12
}

fn default_k_cap() -> usize {
    4096
}

fn default_streams() -> usize {
    1
}

impl SoupConfig {
    pub fn new(intensity: f64, seed: u64) -> Self {
        Self { intensity, epsilon: default_epsilon(), k_cap: default_k_cap(), seed, streams: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        check_intensity(self.intensity)?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(SoupError::InvalidArgument(format!("epsilon {} must lie in (0, 1)", self.epsilon)));
        }
        if self.k_cap < 2 {
            return Err(SoupError::InvalidArgument("k_cap must be at least 2".into()));
        }
        if self.streams == 0 {
            return Err(SoupError::InvalidArgument("streams must be at least 1".into()));
        }
        Ok(())
    }
}

/// Generator behind every sampling stream.
pub type StreamRng = ChaCha8Rng;

/// RNG for sub-stream `stream` of the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Powers `P^0 … P^K` with the cumulative length masses.
#[derive(Clone, Debug)]
pub struct PowerCache {
    powers: Vec<DMatrix<f64>>,
    traces: Vec<f64>,
    // cumulative[k] = Σ_{j=2..=k} Tr(P^j)/j
    cumulative: Vec<f64>,
    total_mass: f64,
    tail: f64,
}

impl PowerCache {
    /// Extends the cache until `Σ_{k>K} n ρ^k / k ≤ ε · total_mass` or `K = k_cap`.
    pub fn build(p: &TransitionMatrix, epsilon: f64, k_cap: usize) -> Result<Self> {
        let n = p.dim();
        let total = total_mass(p)?;
        let rho = RHO_SAFETY * p.spectral_radius_estimate();
        let mut powers = vec![DMatrix::identity(n, n), p.matrix().clone()];
        let mut traces = vec![n as f64, p.matrix().trace()];
        let mut cumulative = vec![0.0, 0.0];
        loop {
            let k = powers.len();
            let next = &powers[k - 1] * p.matrix();
            let tr = next.trace();
            traces.push(tr);
            cumulative.push(cumulative[k - 1] + tr / k as f64);
            powers.push(next);
            let tail = geometric_tail(n, rho, k);
            if tail <= epsilon * total || k >= k_cap {
                return Ok(Self { powers, traces, cumulative, total_mass: total, tail });
            }
        }
    }

    /// Largest cached power `K`.
    pub fn max_length(&self) -> usize {
        self.powers.len() - 1
    }

    pub fn power(&self, k: usize) -> &DMatrix<f64> {
        &self.powers[k]
    }

    pub fn trace(&self, k: usize) -> f64 {
        self.traces[k]
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Geometric bound on the mass of loops longer than `K`.
    pub fn tail_bound(&self) -> f64 {
        self.tail
    }

    /// Probability of length `k` under the truncated length law.
    pub fn length_probability(&self, k: usize) -> f64 {
        if k < 2 || k > self.max_length() {
            return 0.0;
        }
        (self.traces[k] / k as f64) / self.cumulative[self.max_length()]
    }
}

/// Multiset of unrooted loops drawn from one soup.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoopSoupSample {
    pub loops: Vec<UnrootedLoop>,
    pub seed: Option<u64>,
    pub counts_by_length: BTreeMap<usize, usize>,
}

#[derive(Serialize, Deserialize)]
struct DumpLine {
    len: usize,
    verts: Vec<usize>,
}

impl LoopSoupSample {
    fn push(&mut self, lp: UnrootedLoop) {
        *self.counts_by_length.entry(lp.len()).or_default() += 1;
        self.loops.push(lp);
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// `Σ_{γ} ∫_γ A`.
    pub fn integral(&self, a: &OneForm) -> f64 {
        self.loops.iter().map(|l| l.integral(a)).sum()
    }

    /// JSON lines, one `{"len": k, "verts": [...]}` per loop.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for l in &self.loops {
            let line = DumpLine { len: l.len(), verts: l.vertices().to_vec() };
            out.push_str(&serde_json::to_string(&line).expect("plain struct"));
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(graph: &WeightedGraph, text: &str) -> Result<Self> {
        let mut sample = Self::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let d: DumpLine = serde_json::from_str(line)?;
            if d.len != d.verts.len() {
                return Err(SoupError::InvalidLoop(format!("declared length {} but {} vertices", d.len, d.verts.len())));
            }
            sample.push(UnrootedLoop::new(graph, d.verts)?);
        }
        Ok(sample)
    }
}

/// Loop-soup sampler over a fixed transition matrix.
#[derive(Clone, Debug)]
pub struct SoupSampler {
    config: SoupConfig,
    cache: PowerCache,
    p: TransitionMatrix,
}

impl SoupSampler {
    pub fn new(p: &TransitionMatrix, config: SoupConfig) -> Result<Self> {
        config.validate()?;
        let cache = PowerCache::build(p, config.epsilon, config.k_cap)?;
        Ok(Self { config, cache, p: p.clone() })
    }

    pub fn config(&self) -> &SoupConfig {
        &self.config
    }

    pub fn cache(&self) -> &PowerCache {
        &self.cache
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.p
    }

    /// Expected number of loops, `λ · total mass`.
    pub fn mean_count(&self) -> f64 {
        self.config.intensity * self.cache.total_mass
    }

    pub fn sample_loop_count<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        poisson(self.mean_count(), rng)
    }

    /// Length `k ∈ [2, K]` with probability `∝ Tr(P^k)/k`.
    ///
    /// The uniform draw is scaled by the untruncated total mass and draws
    /// landing in the tail beyond `K` are redrawn, so a draw that lands below
    /// `K` is the same whatever the cache size.
    pub fn sample_length<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let kmax = self.cache.max_length();
        let cum = &self.cache.cumulative;
        loop {
            let target = rng.random::<f64>() * self.cache.total_mass;
            if target >= cum[kmax] {
                continue;
            }
            // first k with cum[k] > target
            let k = cum.partition_point(|&c| c <= target);
            if (2..=kmax).contains(&k) {
                return k;
            }
        }
    }

    /// Rooted loop of length `k` drawn with probability `∏P / Tr(P^k)`.
    pub fn sample_rooted_loop<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<RootedLoop> {
        if k < 2 || k > self.cache.max_length() {
            return Err(SoupError::InvalidArgument(format!(
                "loop length {k} outside [2, {}]",
                self.cache.max_length()
            )));
        }
        let mut verts = Vec::with_capacity(k);
        self.fill_rooted_loop(k, rng, &mut verts);
        Ok(RootedLoop::new_unchecked(verts))
    }

    fn fill_rooted_loop<R: Rng + ?Sized>(&self, k: usize, rng: &mut R, verts: &mut Vec<usize>) {
        verts.clear();
        let pk = self.cache.power(k);
        let n = pk.nrows();
        let target = rng.random::<f64>() * self.cache.trace(k);
        let mut acc = 0.0;
        let mut root = n - 1;
        for x in 0..n {
            acc += pk[(x, x)];
            if target < acc {
                root = x;
                break;
            }
        }
        // guard against round-off selecting a root with no loops of length k
        while pk[(root, root)] <= 0.0 {
            root -= 1;
        }
        verts.push(root);
        let graph = self.p.graph();
        let mut v = root;
        for r in (2..=k).rev() {
            let prev = self.cache.power(r - 1);
            let total: f64 = graph.neighbors(v).iter().map(|&w| self.p.get(v, w) * prev[(w, root)]).sum();
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            let mut last_positive = v;
            for &w in graph.neighbors(v) {
                let weight = self.p.get(v, w) * prev[(w, root)];
                if weight > 0.0 {
                    last_positive = w;
                    acc += weight;
                    if target < acc {
                        chosen = Some(w);
                        break;
                    }
                }
            }
            v = chosen.unwrap_or(last_positive);
            verts.push(v);
        }
        // the final step returns to the root deterministically
    }

    /// One soup at the configured intensity.
    pub fn sample_soup<R: Rng + ?Sized>(&self, rng: &mut R) -> LoopSoupSample {
        let mut sample = LoopSoupSample::default();
        self.for_each_loop(self.config.intensity, rng, |verts| {
            sample.push(UnrootedLoop::from_sequence(verts.to_vec()));
        });
        sample
    }

    /// Superposition of `config.streams` independent soups of intensity
    /// `λ / streams`, stream `j` driven by `stream_rng(seed, j)` and merged in
    /// stream order. Bit-identical for a fixed `(seed, streams)`.
    pub fn sample_soup_seeded(&self, seed: u64) -> LoopSoupSample {
        let streams = self.config.streams;
        let lambda = self.config.intensity / streams as f64;
        let parts: Vec<Vec<Vec<usize>>> = (0..streams as u64)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(seed, j);
                let mut loops = Vec::new();
                self.for_each_loop(lambda, &mut rng, |verts| loops.push(verts.to_vec()));
                loops
            })
            .collect();
        let mut sample = LoopSoupSample { seed: Some(seed), ..Default::default() };
        for verts in parts.into_iter().flatten() {
            sample.push(UnrootedLoop::from_sequence(verts));
        }
        sample
    }

    /// Draws a soup of intensity `lambda` and hands each loop's rooted vertex
    /// sequence to `visit` without materializing the soup.
    pub fn for_each_loop<R, F>(&self, lambda: f64, rng: &mut R, mut visit: F) -> u64
    where
        R: Rng + ?Sized,
        F: FnMut(&[usize]),
    {
        let count = poisson(lambda * self.cache.total_mass, rng);
        let mut buf = Vec::new();
        for _ in 0..count {
            let k = self.sample_length(rng);
            self.fill_rooted_loop(k, rng, &mut buf);
            visit(&buf);
        }
        count
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as u64
}

/// Upper bound `(λκ/4)(1 + κ/4)^{-2(a+b)}` on the expected number of loops of
/// the square-lattice soup visiting both `(-a, 0)` and `(b, 0)`.
pub fn z2_truncation_bound(kappa: f64, lambda: f64, a: u32, b: u32) -> Result<f64> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(SoupError::InvalidArgument(format!("kappa {kappa} must be positive; the bound is vacuous at 0")));
    }
    check_intensity(lambda)?;
    if a == 0 || b == 0 {
        return Err(SoupError::InvalidArgument("a and b must be at least 1".into()));
    }
    Ok(lambda * kappa / 4.0 * (1.0 + kappa / 4.0).powi(-2 * (a + b) as i32))
}

/// `[-n, n]²` window of the square lattice with constant killing.
///
/// Vertex `(i, j)` sits at index `(j + n)(2n + 1) + (i + n)`; see [`window_vertex`].
pub fn grid_window(n: usize, kappa: f64) -> Result<WeightedGraph> {
    if n == 0 {
        return Err(SoupError::InvalidArgument("window half-width must be at least 1".into()));
    }
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(SoupError::InvalidArgument(format!("kappa {kappa} must be positive")));
    }
    WeightedGraph::grid(2 * n + 1, 2 * n + 1, kappa)
}

/// `[-n, n]²` window whose walk is the lattice walk killed on leaving the
/// window: `κ_x = κ + 4 - d_x`, so `P` is symmetric with entries `1/(κ + 4)`.
pub fn lattice_window(n: usize, kappa: f64) -> Result<WeightedGraph> {
    if n == 0 {
        return Err(SoupError::InvalidArgument("window half-width must be at least 1".into()));
    }
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(SoupError::InvalidArgument(format!("kappa {kappa} must be positive")));
    }
    WeightedGraph::lattice_grid(2 * n + 1, 2 * n + 1, kappa)
}

/// `μ(loops visiting both x and y)`, by inclusion–exclusion over loops
/// avoiding vertex sets: `μ(avoid S) = -log det(I - P)|_{V∖S}`.
pub fn two_point_loop_mass(p: &TransitionMatrix, x: usize, y: usize) -> Result<f64> {
    let n = p.dim();
    if x >= n || y >= n || x == y {
        return Err(SoupError::InvalidArgument(format!("need distinct vertices below {n}, got {x} and {y}")));
    }
    let avoid = |skip: &[usize]| -> Result<f64> {
        let keep: Vec<usize> = (0..n).filter(|v| !skip.contains(v)).collect();
        let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| p.matrix()[(keep[i], keep[j])]);
        Ok(-ComplexSquareMatrix::from_real(&sub).identity_minus().log_det()?.log_abs)
    };
    Ok(avoid(&[])? - avoid(&[x])? - avoid(&[y])? + avoid(&[x, y])?)
}

/// Index of lattice point `(i, j)` in the window of half-width `n`.
pub fn window_vertex(n: usize, i: i64, j: i64) -> Option<usize> {
    let side = 2 * n as i64 + 1;
    let (x, y) = (i + n as i64, j + n as i64);
    ((0..side).contains(&x) && (0..side).contains(&y)).then(|| (y * side + x) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::loops::{enumerate_loops, length_mass, DEFAULT_ENUMERATION_CAP};

    #[test]
    fn config_validation() {
        assert!(SoupConfig::new(1.0, 0).validate().is_ok());
        assert!(SoupConfig::new(0.0, 0).validate().is_err());
        let mut c = SoupConfig::new(1.0, 0);
        c.epsilon = 1.0;
        assert!(c.validate().is_err());
        c.epsilon = 1e-12;
        c.streams = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn cache_traces_match_fresh_products() {
        let p = corpus::grid(3, 3).transition();
        let cache = PowerCache::build(&p, 1e-12, 4096).unwrap();
        assert!(cache.tail_bound() <= 1e-12 * cache.total_mass());
        for k in [2, 5, 17, cache.max_length()] {
            let fresh = length_mass(&p, k).unwrap() * k as f64;
            assert!((cache.trace(k) - fresh).abs() <= 1e-12 * fresh.abs().max(1e-300));
        }
    }

    #[test]
    fn length_probabilities() {
        let p = corpus::k3().transition();
        let cache = PowerCache::build(&p, 1e-12, 4096).unwrap();
        let p2 = (1.0 / 3.0) / (27.0f64 / 16.0).ln();
        assert!((cache.length_probability(2) - p2).abs() < 1e-10);
        let pc = corpus::c4().transition();
        let cc = PowerCache::build(&pc, 1e-12, 4096).unwrap();
        assert_eq!(cc.length_probability(3), 0.0);
        assert_eq!(cc.length_probability(7), 0.0);
    }

    #[test]
    fn sampled_lengths_stay_in_range_and_bipartite_parity() {
        let p = corpus::c4().transition();
        let s = SoupSampler::new(&p, SoupConfig::new(1.0, 1)).unwrap();
        let mut rng = stream_rng(1, 0);
        for _ in 0..2000 {
            let k = s.sample_length(&mut rng);
            assert!(k >= 2 && k <= s.cache().max_length());
            assert_eq!(k % 2, 0);
        }
    }

    #[test]
    fn k2_bridge_on_k3_is_uniform_from_root() {
        let p = corpus::k3().transition();
        let s = SoupSampler::new(&p, SoupConfig::new(1.0, 0)).unwrap();
        let mut rng = stream_rng(5, 0);
        let mut counts = [[0usize; 3]; 3];
        for _ in 0..30_000 {
            let lp = s.sample_rooted_loop(2, &mut rng).unwrap();
            counts[lp.vertices()[0]][lp.vertices()[1]] += 1;
        }
        for (root, row) in counts.iter().enumerate() {
            assert_eq!(row[root], 0);
            let total: usize = row.iter().sum();
            let other: Vec<usize> = (0..3).filter(|&v| v != root).map(|v| row[v]).collect();
            let frac = other[0] as f64 / total as f64;
            assert!((frac - 0.5).abs() < 4.0 * (0.25 / total as f64).sqrt());
        }
    }

    #[test]
    fn sampled_loops_are_valid_walks() {
        let g = corpus::grid(4, 3);
        let p = g.transition();
        let s = SoupSampler::new(&p, SoupConfig::new(3.0, 0)).unwrap();
        let mut rng = stream_rng(9, 0);
        for _ in 0..200 {
            let k = s.sample_length(&mut rng);
            let lp = s.sample_rooted_loop(k, &mut rng).unwrap();
            assert_eq!(lp.len(), k);
            RootedLoop::new(&g, lp.vertices().to_vec()).unwrap();
        }
        assert!(s.sample_rooted_loop(1, &mut rng).is_err());
        assert!(s.sample_rooted_loop(s.cache().max_length() + 1, &mut rng).is_err());
    }

    #[test]
    fn k3_triangles_are_uniform() {
        let p = corpus::k3().transition();
        let s = SoupSampler::new(&p, SoupConfig::new(1.0, 0)).unwrap();
        let mut rng = stream_rng(11, 0);
        let mut counts = std::collections::HashMap::new();
        let n = 60_000;
        for _ in 0..n {
            let lp = s.sample_rooted_loop(3, &mut rng).unwrap();
            *counts.entry(lp.vertices().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let se = ((1.0 / 6.0) * (5.0 / 6.0) / n as f64).sqrt();
        for c in counts.values() {
            assert!((*c as f64 / n as f64 - 1.0 / 6.0).abs() < 4.0 * se);
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let p = corpus::grid(3, 3).transition();
        let mut cfg = SoupConfig::new(2.0, 3);
        cfg.streams = 4;
        let s = SoupSampler::new(&p, cfg).unwrap();
        assert_eq!(s.sample_soup_seeded(42), s.sample_soup_seeded(42));
        assert_ne!(s.sample_soup_seeded(42), s.sample_soup_seeded(43));
        let mut r1 = stream_rng(7, 0);
        let mut r2 = stream_rng(7, 0);
        let counts1: Vec<u64> = (0..50).map(|_| s.sample_loop_count(&mut r1)).collect();
        let counts2: Vec<u64> = (0..50).map(|_| s.sample_loop_count(&mut r2)).collect();
        assert_eq!(counts1, counts2);
    }

    #[test]
    fn larger_cache_keeps_short_draws() {
        let p = corpus::k3().transition();
        let mut small_cfg = SoupConfig::new(1.0, 0);
        small_cfg.k_cap = 12;
        let small = SoupSampler::new(&p, small_cfg).unwrap();
        let large = SoupSampler::new(&p, SoupConfig::new(1.0, 0)).unwrap();
        assert!(large.cache().max_length() > 12);
        for seed in 0..200u64 {
            let a = small.sample_soup(&mut stream_rng(seed, 0));
            let b_sample = large.sample_soup(&mut stream_rng(seed, 0));
            let b_short = b_sample.loops.iter().all(|l| l.len() <= 12);
            if b_short {
                assert_eq!(a, b_sample, "seed {seed}");
            }
        }
    }

    #[test]
    fn zero_form_gives_zero_integral() {
        let p = corpus::k3().transition();
        let s = SoupSampler::new(&p, SoupConfig::new(5.0, 0)).unwrap();
        let soup = s.sample_soup(&mut stream_rng(2, 0));
        assert!(!soup.is_empty());
        assert_eq!(soup.integral(&OneForm::zero(3)), 0.0);
    }

    #[test]
    fn dump_roundtrip() {
        let g = corpus::grid(3, 2);
        let s = SoupSampler::new(&g.transition(), SoupConfig::new(4.0, 0)).unwrap();
        let soup = s.sample_soup(&mut stream_rng(8, 0));
        let text = soup.to_json_lines();
        let back = LoopSoupSample::from_json_lines(&g, &text).unwrap();
        assert_eq!(back.loops, soup.loops);
        assert_eq!(back.counts_by_length, soup.counts_by_length);
        assert!(LoopSoupSample::from_json_lines(&g, r#"{"len":3,"verts":[0,1]}"#).is_err());
    }

    #[test]
    fn truncation_bound_values() {
        assert!((z2_truncation_bound(4.0, 1.0, 1, 1).unwrap() - 1.0 / 16.0).abs() < 1e-16);
        let b1 = z2_truncation_bound(2.0, 1.0, 2, 3).unwrap();
        let b3 = z2_truncation_bound(2.0, 3.0, 2, 3).unwrap();
        assert!((b3 - 3.0 * b1).abs() < 1e-16);
        // Σ_{a,b≥1} 2^{-2(a+b)} = (1/3)² for κ = 4, λ = 1
        let mut sum = 0.0;
        for a in 1..60 {
            for b in 1..60 {
                sum += z2_truncation_bound(4.0, 1.0, a, b).unwrap();
            }
        }
        assert!((sum - 1.0 / 9.0).abs() < 1e-14);
        assert!(z2_truncation_bound(0.0, 1.0, 1, 1).is_err());
        assert!(z2_truncation_bound(-1.0, 1.0, 1, 1).is_err());
    }

    #[test]
    fn window_shape() {
        let g = grid_window(1, 1.0).unwrap();
        assert_eq!(g.vertex_count(), 9);
        assert_eq!(g.edge_count(), 12);
        assert_eq!(g.degree(window_vertex(1, -1, -1).unwrap()), 2);
        assert_eq!(g.degree(window_vertex(1, 0, -1).unwrap()), 3);
        assert_eq!(g.degree(window_vertex(1, 0, 0).unwrap()), 4);
        assert_eq!(window_vertex(1, 2, 0), None);
        let p = grid_window(2, 1.0).unwrap().transition();
        assert!((0..25).all(|x| p.row_sum(x) < 1.0));
        assert!(grid_window(0, 1.0).is_err());
        assert!(grid_window(1, 0.0).is_err());
    }

    #[test]
    fn enumeration_and_sampler_share_mass() {
        let p = corpus::k3().transition();
        let cache = PowerCache::build(&p, 1e-12, 4096).unwrap();
        let loops = enumerate_loops(&p, 6, DEFAULT_ENUMERATION_CAP).unwrap();
        let enumerated: f64 = loops.iter().map(|l| l.weight).sum();
        let cached: f64 = (2..=6).map(|k| cache.trace(k) / k as f64).sum();
        assert!((enumerated - cached).abs() < 1e-13);
    }

    #[test]
    fn two_point_mass_against_enumeration_and_bound() {
        let p = lattice_window(2, 1.0).unwrap().transition();
        let (x, y) = (window_vertex(2, -1, 0).unwrap(), window_vertex(2, 1, 0).unwrap());
        let exact = two_point_loop_mass(&p, x, y).unwrap();
        let mut enumerated = 0.0;
        crate::loops::visit_loops(&p, 12, DEFAULT_ENUMERATION_CAP, |v, _, w| {
            if v.contains(&x) && v.contains(&y) {
                enumerated += w;
            }
        })
        .unwrap();
        assert!(enumerated <= exact && exact - enumerated <= crate::loops::tail_bound(&p, 12), "{enumerated} vs {exact}");
        assert!(exact <= z2_truncation_bound(1.0, 1.0, 1, 1).unwrap());
        assert!(two_point_loop_mass(&p, x, x).is_err());
    }
}
