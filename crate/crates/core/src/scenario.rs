//! JSON scenario files.
//!
//! ```json
//! {
//!   "name": "constant-segment",
//!   "kind": "inclusion",
//!   "horizon": 1.0,
//!   "bound": 1.0,
//!   "domain": { "min": [-3.0], "max": [3.0] },
//!   "seed_set": { "min": [-0.5], "max": [0.5] },
//!   "vertices": [["-1"], ["1"]],
//!   "base": { "weights": ["0.5", "0.5"] },
//!   "params": { "eps0": 0.1, "levels": 8 }
//! }
//! ```
//!
//! A `control` scenario replaces `vertices` and `base` by `system`
//! (`dynamics` in `t`, `x1..xn`, `u1..um` and the list of `controls`) and
//! `feedback` (`components` indexing `controls`, `weights` in `t`, `x`).
//! Unknown fields are rejected.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{ChatteringFeedback, ControlSystem, RelaxedField};
use crate::expr::{Vars, VectorExpr};
use crate::flow::integrate::IntegrateOptions;
use crate::flow::iteration::BuildOptions;
use crate::flow::stability::start_grid;
use crate::multimap::{LipschitzBound, SeedSet, StateBox, VertexMultiMap};
use crate::selection::Selection;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Inclusion,
    Control,
}

/// Weights over vertex maps (inclusions) or over control points (control).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    /// Defaults to `0, 1, ..., len(weights) − 1`.
    #[serde(default)]
    pub components: Option<Vec<usize>>,
    pub weights: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub dynamics: Vec<String>,
    pub controls: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub eps0: f64,
    pub levels: usize,
    pub paths: usize,
    pub h_paths: usize,
    pub seed: u64,
    /// Start times and seed points of the closeness grid.
    pub grid_times: usize,
    pub grid_states: usize,
    /// Integrator step cap; `T/512` when absent.
    pub max_step: Option<f64>,
    pub h_target: Option<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            eps0: 0.1,
            levels: 8,
            paths: 50,
            h_paths: 20,
            seed: 0,
            grid_times: 5,
            grid_states: 5,
            max_step: None,
            h_target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Start {
    pub t0: f64,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HQuery {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub horizon: f64,
    pub bound: f64,
    pub domain: StateBox,
    pub seed_set: SeedSet,
    #[serde(default)]
    pub vertices: Option<Vec<Vec<String>>>,
    /// Per vertex map (or per control point) `{ "time": L_t, "state": L_x }`.
    #[serde(default)]
    pub lipschitz: Option<Vec<LipschitzBound>>,
    #[serde(default)]
    pub base: Option<WeightSpec>,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    #[serde(default)]
    pub feedback: Option<WeightSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub simulate: Option<Start>,
    #[serde(default)]
    pub h_eval: Option<HQuery>,
    #[serde(skip)]
    source: String,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let pat = format!("\"{key}\"");
    text.find(&pat).map(|at| text[..at].matches('\n').count() + 1)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let mut s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.source = text.to_string();
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn fail(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        match line_of(&self.source, key) {
            Some(l) => Error::Parse(format!("{msg} (field `{key}`, line {l})")),
            None => Error::Parse(format!("{msg} (field `{key}`)")),
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.domain.min.len() != self.domain.max.len() || n == 0 {
            return Err(self.fail("domain", "min and max must have the same positive length"));
        }
        if self.seed_set.dim() != n {
            return Err(self.fail("seed_set", format!("expected dimension {n}")));
        }
        if !(self.horizon > 0.0) || !(self.bound >= 0.0) {
            return Err(self.fail("horizon", "horizon must be positive and bound nonnegative"));
        }
        if !(self.params.eps0 > 0.0) || self.params.levels == 0 {
            return Err(self.fail("params", "eps0 must be positive and levels at least 1"));
        }
        match self.kind {
            Kind::Inclusion => {
                let v = self.vertices.as_ref().ok_or_else(|| self.fail("kind", "inclusion needs `vertices`"))?;
                if v.is_empty() || v.iter().any(|m| m.len() != n) {
                    return Err(self.fail("vertices", format!("need vertex maps with {n} components")));
                }
                if self.system.is_some() || self.feedback.is_some() {
                    return Err(self.fail("kind", "inclusion takes `vertices` and `base`, not `system`"));
                }
            }
            Kind::Control => {
                let s = self.system.as_ref().ok_or_else(|| self.fail("kind", "control needs `system`"))?;
                if s.dynamics.len() != n {
                    return Err(self.fail("dynamics", format!("need {n} components")));
                }
                let m = s.controls.first().map_or(0, Vec::len);
                if s.controls.is_empty() || s.controls.iter().any(|u| u.len() != m) {
                    return Err(self.fail("controls", "need control points of one common length"));
                }
                if self.vertices.is_some() || self.base.is_some() {
                    return Err(self.fail("kind", "control takes `system` and `feedback`, not `vertices`"));
                }
            }
        }
        if let Some(q) = &self.h_eval {
            if q.x.len() != n || q.y.len() != n {
                return Err(self.fail("h_eval", format!("x and y need {n} components")));
            }
        }
        if let Some(s) = &self.simulate {
            if s.x0.len() != n {
                return Err(self.fail("simulate", format!("x0 needs {n} components")));
            }
        }
        Ok(())
    }

    fn state_vars(&self) -> Vars {
        Vars {
            states: self.dim(),
            controls: 0,
        }
    }

    fn parse_exprs(&self, key: &str, src: &[String], vars: Vars) -> Result<VectorExpr> {
        VectorExpr::parse(src, vars).map_err(|e| self.fail(key, e))
    }

    pub fn control_system(&self) -> Result<ControlSystem> {
        let s = self
            .system
            .as_ref()
            .ok_or_else(|| self.fail("kind", "not a control scenario"))?;
        let vars = Vars {
            states: self.dim(),
            controls: s.controls[0].len(),
        };
        Ok(ControlSystem {
            dynamics: self.parse_exprs("dynamics", &s.dynamics, vars)?,
            controls: s.controls.clone(),
            horizon: self.horizon,
            bound: self.bound,
            domain: self.domain.clone(),
            seed_set: self.seed_set.clone(),
            lipschitz: self.lipschitz.clone(),
        })
    }

    pub fn feedback(&self) -> Result<ChatteringFeedback> {
        let f = self
            .feedback
            .as_ref()
            .ok_or_else(|| self.fail("kind", "control scenario needs `feedback`"))?;
        Ok(ChatteringFeedback {
            components: f.components.clone().unwrap_or_else(|| (0..f.weights.len()).collect()),
            weights: self.parse_exprs("feedback", &f.weights, self.state_vars())?,
        })
    }

    pub fn multimap(&self) -> Result<Arc<VertexMultiMap>> {
        let map = match self.kind {
            Kind::Inclusion => {
                let maps = self
                    .vertices
                    .as_ref()
                    .expect("validated")
                    .iter()
                    .map(|v| self.parse_exprs("vertices", v, self.state_vars()))
                    .collect::<Result<Vec<_>>>()?;
                VertexMultiMap::new(
                    self.horizon,
                    self.bound,
                    self.domain.clone(),
                    self.seed_set.clone(),
                    maps,
                    self.lipschitz.clone(),
                )
                .map_err(|e| self.fail("vertices", e))?
            }
            Kind::Control => self.control_system()?.to_multimap().map_err(|e| self.fail("system", e))?,
        };
        Ok(Arc::new(map))
    }

    /// The relaxed field `f₀`.
    pub fn base(&self, map: &VertexMultiMap) -> Result<Arc<dyn Selection>> {
        let f = match self.kind {
            Kind::Inclusion => {
                let spec = match &self.base {
                    Some(b) => b.clone(),
                    None => {
                        let m = map.map_count();
                        WeightSpec {
                            components: None,
                            weights: vec![format!("{}", 1.0 / m as f64); m],
                        }
                    }
                };
                let idx = spec.components.clone().unwrap_or_else(|| (0..spec.weights.len()).collect());
                let fields = idx
                    .iter()
                    .map(|&i| {
                        map.maps()
                            .get(i)
                            .cloned()
                            .ok_or_else(|| self.fail("base", format!("vertex index {i} out of range")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let weights = self.parse_exprs("base", &spec.weights, self.state_vars())?;
                RelaxedField::new(fields, weights, self.horizon, &map.reachable_box())?
            }
            Kind::Control => crate::control::relax(&self.control_system()?, &self.feedback()?)?,
        };
        Ok(Arc::new(f))
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            levels: self.params.levels,
            paths: self.params.paths,
            h_paths: self.params.h_paths,
            seed: self.params.seed,
            h_target: self.params.h_target,
        }
    }

    pub fn integrate_options(&self) -> IntegrateOptions {
        IntegrateOptions::with_step(self.params.max_step.unwrap_or(self.horizon / 512.0))
    }

    /// `(t0, x0)` for single runs: `simulate` or the center of `D` at `t = 0`.
    pub fn start(&self) -> (f64, Vec<f64>) {
        match &self.simulate {
            Some(s) => (s.t0, s.x0.clone()),
            None => (0.0, self.seed_set.bounding_box().center()),
        }
    }

    pub fn start_grid(&self, map: &VertexMultiMap) -> Vec<(f64, Vec<f64>)> {
        start_grid(map, self.params.grid_times, self.params.grid_states)
    }
}
