//! TOML scenario configs, gains files and γ-grid strings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Digraph, Edge};
use crate::imodel::{build_internal_model, Exosystem, InternalModel};
use crate::matcore::Matrix;
use crate::simulator::{FollowerUncertainty, InitPolicy, InitialState, Scenario};
use crate::synthesis::{Certificate, DelaySpec, GainSet, Mode, NominalPlant, SynthesisParams};

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: PlantSection,
    pub exosystem: ExosystemSection,
    pub graph: GraphSection,
    pub delays: DelaySpec,
    pub synthesis: SynthesisSection,
    pub simulation: SimulationSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
    /// Shared nominal `E`; zero when absent and no agent overrides it.
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Rows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExosystemSection {
    #[serde(rename = "S")]
    pub s: Rows,
    #[serde(rename = "F")]
    pub f: Rows,
    pub v0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub followers: usize,
    #[serde(default)]
    pub edges: Vec<EdgeSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSection {
    pub from: usize,
    pub to: usize,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub mode: Mode,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer_r: Option<usize>,
    #[serde(default)]
    pub auto_tune: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_override: Option<BetaOverride>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaOverride {
    pub beta: Rows,
    pub sigma: Rows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "unit_weight")]
    pub init_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x: Rows,
    pub z: Rows,
    #[serde(default)]
    pub xi: Rows,
}

/// Per-follower overrides, listed in follower order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Rows>,
    #[serde(rename = "dA", default, skip_serializing_if = "Option::is_none")]
    pub da: Option<Rows>,
    #[serde(rename = "dB", default, skip_serializing_if = "Option::is_none")]
    pub db: Option<Rows>,
    #[serde(rename = "dE", default, skip_serializing_if = "Option::is_none")]
    pub de: Option<Rows>,
    #[serde(rename = "dC", default, skip_serializing_if = "Option::is_none")]
    pub dc: Option<Rows>,
}

/// A validated config, ready for synthesis and simulation.
#[derive(Clone, Debug)]
pub struct Problem {
    pub plant: NominalPlant,
    pub per_agent_e: Option<Vec<Matrix>>,
    pub uncertainties: Vec<FollowerUncertainty>,
    pub exo: Exosystem,
    pub graph: Digraph,
    pub delays: DelaySpec,
    pub im: InternalModel,
    pub params: SynthesisParams,
    pub horizon: usize,
    pub init: InitPolicy,
}

impl Problem {
    pub fn scenario(&self, gains: GainSet) -> Scenario {
        Scenario {
            plant: self.plant.clone(),
            per_agent_e: self.per_agent_e.clone(),
            uncertainties: self.uncertainties.clone(),
            exo: self.exo.clone(),
            graph: self.graph.clone(),
            delays: self.delays,
            im: self.im.clone(),
            gains,
            horizon: self.horizon,
            init: self.init.clone(),
        }
    }
}

fn matrix(rows: &Rows, path: &str) -> Result<Matrix> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::config(path, "matrix must have at least one row and one column"));
    }
    let width = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::config(
                format!("{path}[{i}]"),
                format!("row has {} entries, expected {width}", row.len()),
            ));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("{path}[{i}][{j}]"), "entry is not finite"));
        }
    }
    Matrix::from_rows(rows).map_err(|e| Error::config(path, e.to_string()))
}

fn shaped(rows: &Rows, path: &str, shape: (usize, usize)) -> Result<Matrix> {
    let m = matrix(rows, path)?;
    if m.shape() != shape {
        return Err(Error::config(
            path,
            format!("expected a {}x{} matrix, got {}x{}", shape.0, shape.1, m.rows(), m.cols()),
        ));
    }
    Ok(m)
}

fn vector(values: &[f64], path: &str, len: usize) -> Result<Vec<f64>> {
    if values.len() != len {
        return Err(Error::config(path, format!("expected {len} entries, got {}", values.len())));
    }
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::config(format!("{path}[{j}]"), "entry is not finite"));
    }
    Ok(values.to_vec())
}

fn with_path(path: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::config(path, other.to_string()),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("<document>", e.message().to_string() + &span_note(text, e.span())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("<document>", e.to_string()))
    }

    /// Checks every dimension and builds the typed problem.
    pub fn build(&self) -> Result<Problem> {
        let a = matrix(&self.plant.a, "plant.A")?;
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::config("plant.A", format!("must be square, got {}x{}", n, a.cols())));
        }
        let b = matrix(&self.plant.b, "plant.B")?;
        if b.rows() != n {
            return Err(Error::config("plant.B", format!("expected {n} rows, got {}", b.rows())));
        }
        let c = matrix(&self.plant.c, "plant.C")?;
        if c.cols() != n {
            return Err(Error::config("plant.C", format!("expected {n} columns, got {}", c.cols())));
        }
        let s = matrix(&self.exosystem.s, "exosystem.S")?;
        let q = s.rows();
        if !s.is_square() {
            return Err(Error::config("exosystem.S", format!("must be square, got {}x{}", q, s.cols())));
        }
        let (m, p) = (b.cols(), c.rows());
        let f = shaped(&self.exosystem.f, "exosystem.F", (p, q))?;
        let v0 = vector(&self.exosystem.v0, "exosystem.v0", q)?;
        let e = match &self.plant.e {
            Some(rows) => shaped(rows, "plant.E", (n, q))?,
            None => Matrix::zeros(n, q),
        };
        let plant = NominalPlant::new(a, b, c, e).map_err(|e| with_path("plant", e))?;
        let exo = Exosystem::new(s, f, v0).map_err(|e| with_path("exosystem", e))?;

        let edges = self
            .graph
            .edges
            .iter()
            .map(|e| Edge {
                from: e.from,
                to: e.to,
                weight: e.weight,
            })
            .collect();
        let n_agents = self.graph.followers;
        if n_agents == 0 {
            return Err(Error::config("graph.followers", "at least one follower is required"));
        }
        let graph = Digraph::new(n_agents, edges).map_err(|e| with_path("graph", e))?;

        if self.agents.len() > n_agents {
            return Err(Error::config(
                "agents",
                format!("{} agent sections for {n_agents} followers", self.agents.len()),
            ));
        }
        let any_e = self.agents.iter().any(|a| a.e.is_some());
        let mut per_agent_e = Vec::with_capacity(n_agents);
        let mut uncertainties = Vec::with_capacity(n_agents);
        for i in 0..n_agents {
            let agent = self.agents.get(i).cloned().unwrap_or_default();
            let base = format!("agents[{i}]");
            let pick = |rows: &Option<Rows>, name: &str, shape: (usize, usize)| -> Result<Matrix> {
                match rows {
                    Some(r) => shaped(r, &format!("{base}.{name}"), shape),
                    None => Ok(Matrix::zeros(shape.0, shape.1)),
                }
            };
            per_agent_e.push(match &agent.e {
                Some(r) => shaped(r, &format!("{base}.E"), (n, q))?,
                None => plant.e.clone(),
            });
            uncertainties.push(FollowerUncertainty {
                da: pick(&agent.da, "dA", (n, n))?,
                db: pick(&agent.db, "dB", (n, m))?,
                de: pick(&agent.de, "dE", (n, q))?,
                dc: pick(&agent.dc, "dC", (p, n))?,
            });
        }

        let syn = &self.synthesis;
        let beta_override = match &syn.beta_override {
            Some(o) => Some((
                matrix(&o.beta, "synthesis.beta_override.beta")?,
                matrix(&o.sigma, "synthesis.beta_override.sigma")?,
            )),
            None => None,
        };
        let im = build_internal_model(&exo.s, p, beta_override)?;

        for (name, value) in [("gamma", Some(syn.gamma)), ("gamma_l", syn.gamma_l)] {
            if let Some(g) = value {
                if !(g > 0.0 && g < 1.0) {
                    return Err(Error::config(format!("synthesis.{name}"), format!("must lie in (0, 1), got {g}")));
                }
            }
        }
        for (name, value) in [("nu", syn.nu), ("nu_l", syn.nu_l)] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(format!("synthesis.{name}"), format!("must be positive, got {v}")));
                }
            }
        }
        if syn.mode == Mode::Output && syn.gamma_l.is_none() {
            return Err(Error::config("synthesis.gamma_l", "output feedback requires gamma_l"));
        }
        let mut params = SynthesisParams::new(syn.mode, syn.gamma);
        params.gamma_l = syn.gamma_l;
        params.nu = syn.nu;
        params.nu_l = syn.nu_l;
        params.observer_r = syn.observer_r;
        params.auto_tune = syn.auto_tune;

        let delays = self.delays;
        let sim = &self.simulation;
        if sim.horizon > 0 && sim.horizon < delays.r() {
            return Err(Error::config(
                "simulation.horizon",
                format!("horizon {} is shorter than the loop delay r = {}", sim.horizon, delays.r()),
            ));
        }
        let init = match &sim.initial {
            Some(init) => {
                let nz = im.nz();
                let xi = if init.xi.is_empty() { vec![vec![0.0; n]; n_agents] } else { init.xi.clone() };
                for (name, vecs, len) in [("x", &init.x, n), ("z", &init.z, nz), ("xi", &xi, n)] {
                    if vecs.len() != n_agents {
                        return Err(Error::config(
                            format!("simulation.initial.{name}"),
                            format!("expected {n_agents} vectors, got {}", vecs.len()),
                        ));
                    }
                    for (i, v) in vecs.iter().enumerate() {
                        vector(v, &format!("simulation.initial.{name}[{i}]"), len)?;
                    }
                }
                InitPolicy::Explicit(InitialState {
                    x: init.x.clone(),
                    z: init.z.clone(),
                    xi,
                })
            }
            None => {
                if !(sim.init_bound >= 0.0 && sim.init_bound.is_finite()) {
                    return Err(Error::config(
                        "simulation.init_bound",
                        format!("must be finite and non-negative, got {}", sim.init_bound),
                    ));
                }
                InitPolicy::Random {
                    seed: sim.seed,
                    bound: sim.init_bound,
                }
            }
        };

        Ok(Problem {
            per_agent_e: any_e.then_some(per_agent_e),
            plant,
            uncertainties,
            exo,
            graph,
            delays,
            im,
            params,
            horizon: sim.horizon,
            init,
        })
    }
}

fn span_note(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

/// On-disk form of a [`GainSet`] plus its certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    pub mode: Mode,
    pub gamma: f64,
    pub nu: f64,
    pub r_used: usize,
    #[serde(rename = "K_x")]
    pub k_x: Rows,
    #[serde(rename = "K_z")]
    pub k_z: Rows,
    #[serde(rename = "K_1")]
    pub k_1: Rows,
    #[serde(rename = "K_2")]
    pub k_2: Rows,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer_r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    pub stable: bool,
    pub spectral_radius: f64,
}

impl GainsFile {
    pub fn new(mode: Mode, gains: &GainSet, cert: Option<&Certificate>) -> Self {
        GainsFile {
            mode,
            gamma: gains.gamma,
            nu: gains.nu,
            r_used: gains.r_used,
            k_x: gains.k_x.to_rows(),
            k_z: gains.k_z.to_rows(),
            k_1: gains.k_1.to_rows(),
            k_2: gains.k_2.to_rows(),
            l: gains.l_obs.as_ref().map(Matrix::to_rows),
            gamma_l: gains.gamma_l,
            nu_l: gains.nu_l,
            observer_r: gains.observer_r,
            certificate: cert.map(|c| CertificateSection {
                stable: c.stable,
                spectral_radius: c.spectral_radius,
            }),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("<gains>", e.message().to_string() + &span_note(text, e.span())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("<gains>", e.to_string()))
    }

    pub fn to_gain_set(&self) -> Result<GainSet> {
        let k_x = matrix(&self.k_x, "K_x")?;
        let m = k_x.rows();
        let k_z = matrix(&self.k_z, "K_z")?;
        let k_1 = matrix(&self.k_1, "K_1")?;
        let k_2 = matrix(&self.k_2, "K_2")?;
        for (name, k) in [("K_z", &k_z), ("K_1", &k_1), ("K_2", &k_2)] {
            if k.rows() != m {
                return Err(Error::config(name, format!("expected {m} rows, got {}", k.rows())));
            }
        }
        let l_obs = self.l.as_ref().map(|l| matrix(l, "L")).transpose()?;
        if self.mode == Mode::Output && l_obs.is_none() {
            return Err(Error::config("L", "output-feedback gains need an observer gain"));
        }
        Ok(GainSet {
            k_x,
            k_z,
            k_1,
            k_2,
            l_obs,
            gamma: self.gamma,
            nu: self.nu,
            gamma_l: self.gamma_l,
            nu_l: self.nu_l,
            r_used: self.r_used,
            observer_r: self.observer_r,
        })
    }
}

/// Parses a comma-separated list of γ values, each in `(0, 1)`.
pub fn parse_gamma_grid(text: &str) -> Result<Vec<f64>> {
    let items: Vec<&str> = text.split(',').map(str::trim).collect();
    if items.iter().all(|s| s.is_empty()) {
        return Err(Error::config("gamma-grid", "empty grid"));
    }
    items
        .iter()
        .enumerate()
        .map(|(k, item)| {
            let path = format!("gamma-grid[{k}]");
            let g: f64 = item
                .parse()
                .map_err(|_| Error::config(path.clone(), format!("`{item}` is not a number")))?;
            if g > 0.0 && g < 1.0 {
                Ok(g)
            } else {
                Err(Error::config(path, format!("{g} is outside (0, 1)")))
            }
        })
        .collect()
}
