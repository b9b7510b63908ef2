//! Experiment configuration files.

use std::fmt;

use loopsoup::holonomy::{Connection, ConnectionSpec};
use loopsoup::graph::GraphSpec;
use loopsoup::planar::{MapSpec, PlanarMap};
use loopsoup::{OneForm, SoupError, WeightedGraph};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Charfn,
    Clt,
    WindingCov,
    Holonomy,
    Spitzer,
    Oracle,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Charfn => "charfn",
            Self::Clt => "clt",
            Self::WindingCov => "winding-cov",
            Self::Holonomy => "holonomy",
            Self::Spitzer => "spitzer",
            Self::Oracle => "oracle",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Monte Carlo check of the holonomy expectation at one `(λ, β)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolonomyMc {
    pub lambda: f64,
    pub beta: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpitzerSection {
    pub lambda: f64,
    #[serde(default = "one")]
    pub d_z: f64,
    #[serde(default = "five")]
    pub s_max: f64,
    #[serde(default = "forty_one")]
    pub s_points: usize,
    /// Defaults to `10^{-2} … 10^{-12}`.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}
fn five() -> f64 {
    5.0
}
fn forty_one() -> usize {
    41
}
fn hundred() -> usize {
    100
}
fn epsilon() -> f64 {
    1e-12
}
fn k_cap() -> usize {
    4096
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    /// One-form values `[u, v, A_uv]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<Vec<(usize, usize, f64)>>,
    /// Faces for the winding field; all finite faces when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionSpec>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// β grid for characteristic functions; 21 points on `[-π, π]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default = "hundred")]
    pub batches: usize,
    #[serde(default = "epsilon")]
    pub epsilon: f64,
    #[serde(default = "k_cap")]
    pub k_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<HolonomyMc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spitzer: Option<SpitzerSection>,
    #[serde(default = "yes")]
    pub histogram: bool,
}

/// Validation failure at a JSON field path such as `lambdas[2]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

type Check<T> = std::result::Result<T, ConfigError>;

fn soup_err(path: &str) -> impl Fn(SoupError) -> ConfigError + '_ {
    move |e| ConfigError::new(path, e.to_string())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Check<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::new("$", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical (field-ordered, compact) JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Check<()> {
        if self.batches < 2 {
            return Err(ConfigError::new("batches", "must be at least 2"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ConfigError::new("epsilon", "must lie in (0, 1)"));
        }
        if self.k_cap < 2 {
            return Err(ConfigError::new("k_cap", "must be at least 2"));
        }
        if let Some(k) = self.k_max {
            if k < 2 {
                return Err(ConfigError::new("k_max", "must be at least 2"));
            }
        }
        for (i, &l) in self.lambdas.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(ConfigError::new(format!("lambdas[{i}]"), format!("{l} is not a positive intensity")));
            }
        }
        if let Some(betas) = &self.betas {
            if betas.is_empty() {
                return Err(ConfigError::new("betas", "must not be empty"));
            }
            if let Some(i) = betas.iter().position(|b| !b.is_finite()) {
                return Err(ConfigError::new(format!("betas[{i}]"), "must be finite"));
            }
        }
        match self.kind {
            ExperimentKind::Charfn | ExperimentKind::Clt => {
                self.require_mc()?;
                let g = self.graph()?;
                self.one_form(&g)?;
            }
            ExperimentKind::WindingCov => {
                self.require_mc()?;
                let map = self.planar_map()?;
                self.face_list(&map)?;
            }
            ExperimentKind::Holonomy => {
                let g = self.graph()?;
                if !g.transition().is_symmetric() {
                    return Err(ConfigError::new(
                        if self.graph.is_some() { "graph" } else { "map" },
                        "holonomy needs a symmetric transition matrix (constant κ + degree)",
                    ));
                }
                self.connection(&g)?;
                if let Some(mc) = &self.mc {
                    if mc.samples == 0 {
                        return Err(ConfigError::new("mc.samples", "must be at least 1"));
                    }
                    if mc.samples < self.batches {
                        return Err(ConfigError::new("mc.samples", format!("must be at least batches = {}", self.batches)));
                    }
                    if !(mc.lambda > 0.0 && mc.lambda.is_finite()) {
                        return Err(ConfigError::new("mc.lambda", "must be positive"));
                    }
                    if !mc.beta.is_finite() {
                        return Err(ConfigError::new("mc.beta", "must be finite"));
                    }
                }
            }
            ExperimentKind::Spitzer => {
                let s = self.spitzer.as_ref().ok_or_else(|| ConfigError::new("spitzer", "section is required"))?;
                if !(s.lambda > 0.0 && s.lambda.is_finite()) {
                    return Err(ConfigError::new("spitzer.lambda", "must be positive"));
                }
                if !(s.d_z > 0.0 && s.d_z.is_finite()) {
                    return Err(ConfigError::new("spitzer.d_z", "must be positive"));
                }
                if !(s.s_max >= 0.0 && s.s_max.is_finite()) {
                    return Err(ConfigError::new("spitzer.s_max", "must be finite and nonnegative"));
                }
                if s.s_points == 0 {
                    return Err(ConfigError::new("spitzer.s_points", "must be at least 1"));
                }
                for (i, &d) in self.deltas().iter().enumerate() {
                    if !(d > 0.0 && d < 1.0 && d < s.d_z) {
                        return Err(ConfigError::new(format!("spitzer.deltas[{i}]"), format!("{d} must lie in (0, min(1, d_z))")));
                    }
                }
            }
            ExperimentKind::Oracle => {}
        }
        Ok(())
    }

    fn require_mc(&self) -> Check<()> {
        if self.samples == 0 {
            return Err(ConfigError::new("samples", "must be at least 1"));
        }
        if self.samples < self.batches {
            return Err(ConfigError::new("samples", format!("must be at least batches = {}", self.batches)));
        }
        if self.lambdas.is_empty() {
            return Err(ConfigError::new("lambdas", "must list at least one intensity"));
        }
        Ok(())
    }

    /// The graph, from `graph` or from the graph of `map`.
    pub fn graph(&self) -> Check<WeightedGraph> {
        match (&self.graph, &self.map) {
            (Some(g), None) => WeightedGraph::from_spec(g).map_err(soup_err("graph")),
            (None, Some(_)) => Ok(self.planar_map()?.graph().clone()),
            (Some(_), Some(_)) => Err(ConfigError::new("graph", "give either graph or map, not both")),
            (None, None) => Err(ConfigError::new("graph", "a graph or map is required")),
        }
    }

    pub fn planar_map(&self) -> Check<PlanarMap> {
        let spec = self.map.as_ref().ok_or_else(|| ConfigError::new("map", "a planar map is required"))?;
        if self.graph.is_some() {
            return Err(ConfigError::new("graph", "give either graph or map, not both"));
        }
        PlanarMap::from_spec(spec).map_err(soup_err("map"))
    }

    pub fn one_form(&self, g: &WeightedGraph) -> Check<OneForm> {
        let entries = self.form.as_ref().ok_or_else(|| ConfigError::new("form", "a one-form is required"))?;
        for (i, &(u, v, a)) in entries.iter().enumerate() {
            if u >= g.vertex_count() || v >= g.vertex_count() || !g.adjacent(u, v) {
                return Err(ConfigError::new(format!("form[{i}]"), format!("({u}, {v}) is not an edge")));
            }
            if !a.is_finite() {
                return Err(ConfigError::new(format!("form[{i}]"), "value must be finite"));
            }
        }
        OneForm::from_edges(g, entries).map_err(soup_err("form"))
    }

    pub fn face_list(&self, map: &PlanarMap) -> Check<Vec<usize>> {
        match &self.faces {
            None => Ok(map.finite_faces()),
            Some(faces) => {
                if faces.is_empty() {
                    return Err(ConfigError::new("faces", "must not be empty"));
                }
                for (i, &f) in faces.iter().enumerate() {
                    if f >= map.face_count() {
                        return Err(ConfigError::new(format!("faces[{i}]"), format!("face {f} does not exist")));
                    }
                    if f == map.infinite_face() {
                        return Err(ConfigError::new(format!("faces[{i}]"), format!("face {f} is the infinite face")));
                    }
                }
                Ok(faces.clone())
            }
        }
    }

    pub fn connection(&self, g: &WeightedGraph) -> Check<Connection> {
        let spec = self.connection.as_ref().ok_or_else(|| ConfigError::new("connection", "a connection is required"))?;
        for (i, e) in spec.edges.iter().enumerate() {
            if e.u >= g.vertex_count() || e.v >= g.vertex_count() || !g.adjacent(e.u, e.v) {
                return Err(ConfigError::new(format!("connection.edges[{i}]"), format!("({}, {}) is not an edge", e.u, e.v)));
            }
        }
        Connection::from_spec(g, spec).map_err(soup_err("connection"))
    }

    pub fn beta_grid(&self) -> Vec<f64> {
        self.betas.clone().unwrap_or_else(|| loopsoup::spitzer::symmetric_grid(std::f64::consts::PI, 21))
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.spitzer
            .as_ref()
            .and_then(|s| s.deltas.clone())
            .unwrap_or_else(loopsoup::spitzer::default_delta_grid)
    }
}
