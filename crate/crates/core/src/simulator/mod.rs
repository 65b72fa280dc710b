//! Deterministic simulation of the uncertain, delayed closed loop.
//!
//! Two independent paths produce the same [`SimulationTrace`]: an agent-by-agent
//! simulator that runs each follower's control law with ring-buffer delay
//! lines, and a compact Kronecker-form recurrence over the stacked state.

mod agentwise;
mod compact;
mod delay;
mod trace;

pub use agentwise::{simulate, simulate_output_feedback, simulate_state_feedback, LawForm};
pub use compact::{simulate_compact_oracle, CompactSystem};
pub use delay::DelayLine;
pub use trace::{max_relative_deviation, SimulationTrace, TraceDims, TraceStep};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::imodel::{Exosystem, InternalModel};
use crate::matcore::Matrix;
use crate::synthesis::{DelaySpec, GainSet, Mode, NominalPlant};

/// Any state norm above this aborts a run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Per-follower perturbation `(δA, δB, δE, δC)` of the nominal plant.
#[derive(Clone, Debug, PartialEq)]
pub struct FollowerUncertainty {
    pub da: Matrix,
    pub db: Matrix,
    pub de: Matrix,
    pub dc: Matrix,
}

impl FollowerUncertainty {
    pub fn zero(plant: &NominalPlant) -> Self {
        let (n, m, p, q) = (plant.n(), plant.m(), plant.p(), plant.q());
        FollowerUncertainty {
            da: Matrix::zeros(n, n),
            db: Matrix::zeros(n, m),
            de: Matrix::zeros(n, q),
            dc: Matrix::zeros(p, n),
        }
    }
}

/// Initial states of every follower and controller.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialState {
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitPolicy {
    /// Every entry of `x_i`, `z_i`, `ξ_i` drawn uniformly from `[-bound, bound]`
    /// (in that order, agent by agent) with a ChaCha8 stream seeded by `seed`.
    Random { seed: u64, bound: f64 },
    Explicit(InitialState),
}

/// One complete problem instance.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub plant: NominalPlant,
    /// Nominal `E_i` per follower; `plant.e` is used when absent.
    pub per_agent_e: Option<Vec<Matrix>>,
    pub uncertainties: Vec<FollowerUncertainty>,
    pub exo: Exosystem,
    pub graph: Digraph,
    pub delays: DelaySpec,
    pub im: InternalModel,
    pub gains: GainSet,
    pub horizon: usize,
    pub init: InitPolicy,
}

/// Uncertain matrices `(Ā_i, B̄_i, C̄_i, Ē_i)` of one follower.
#[derive(Clone, Debug)]
pub(crate) struct AgentPlant {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub e: Matrix,
}

impl Scenario {
    pub fn n_agents(&self) -> usize {
        self.graph.n_followers()
    }

    pub fn validate(&self) -> Result<()> {
        let n_agents = self.n_agents();
        let (n, m, p, q) = (self.plant.n(), self.plant.m(), self.plant.p(), self.plant.q());
        if self.exo.q() != q {
            return Err(Error::dim("exosystem dimension vs plant E columns", q, self.exo.q()));
        }
        if self.exo.p() != p {
            return Err(Error::dim("exosystem F rows vs plant outputs", p, self.exo.p()));
        }
        if self.uncertainties.len() != n_agents {
            return Err(Error::dim("uncertainty list length", n_agents, self.uncertainties.len()));
        }
        for (i, u) in self.uncertainties.iter().enumerate() {
            for (name, mat, shape) in [
                ("dA", &u.da, (n, n)),
                ("dB", &u.db, (n, m)),
                ("dE", &u.de, (n, q)),
                ("dC", &u.dc, (p, n)),
            ] {
                if mat.shape() != shape {
                    return Err(Error::dim(
                        format!("agent {} {name}", i + 1),
                        format!("{shape:?}"),
                        format!("{:?}", mat.shape()),
                    ));
                }
            }
        }
        if let Some(es) = &self.per_agent_e {
            if es.len() != n_agents {
                return Err(Error::dim("per-agent E list length", n_agents, es.len()));
            }
            for (i, e) in es.iter().enumerate() {
                if e.shape() != (n, q) {
                    return Err(Error::dim(format!("agent {} E", i + 1), format!("{:?}", (n, q)), format!("{:?}", e.shape())));
                }
            }
        }
        if self.im.g2.cols() != p {
            return Err(Error::dim("internal model copies", p, self.im.g2.cols()));
        }
        let nz = self.im.nz();
        for (name, mat, shape) in [("K_x", &self.gains.k_x, (m, n)), ("K_z", &self.gains.k_z, (m, nz))] {
            if mat.shape() != shape {
                return Err(Error::dim(format!("gain {name}"), format!("{shape:?}"), format!("{:?}", mat.shape())));
            }
        }
        if self.horizon > 0 && self.horizon < self.delays.r() {
            return Err(Error::config(
                "simulation.horizon",
                format!("horizon {} is shorter than the loop delay r = {}", self.horizon, self.delays.r()),
            ));
        }
        if let InitPolicy::Explicit(init) = &self.init {
            check_init(init, n_agents, n, nz)?;
        }
        Ok(())
    }

    pub(crate) fn agent_plants(&self) -> Vec<AgentPlant> {
        self.uncertainties
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let e_nom = self.per_agent_e.as_ref().map_or(&self.plant.e, |es| &es[i]);
                AgentPlant {
                    a: &self.plant.a + &u.da,
                    b: &self.plant.b + &u.db,
                    c: &self.plant.c + &u.dc,
                    e: e_nom + &u.de,
                }
            })
            .collect()
    }

    /// Resolves the initial-state policy. Deterministic in the seed.
    pub fn initial_state(&self) -> InitialState {
        let (n_agents, n, nz) = (self.n_agents(), self.plant.n(), self.im.nz());
        match &self.init {
            InitPolicy::Explicit(init) => init.clone(),
            InitPolicy::Random { seed, bound } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut draw = |len: usize| -> Vec<Vec<f64>> {
                    (0..n_agents)
                        .map(|_| (0..len).map(|_| rng.random_range(-1.0..=1.0) * bound).collect())
                        .collect()
                };
                let x = draw(n);
                let z = draw(nz);
                let xi = draw(n);
                InitialState { x, z, xi }
            }
        }
    }
}

fn check_init(init: &InitialState, n_agents: usize, n: usize, nz: usize) -> Result<()> {
    for (name, vecs, len) in [("x", &init.x, n), ("z", &init.z, nz), ("xi", &init.xi, n)] {
        if vecs.len() != n_agents {
            return Err(Error::config(
                format!("simulation.initial.{name}"),
                format!("expected {n_agents} vectors, got {}", vecs.len()),
            ));
        }
        if let Some((i, v)) = vecs.iter().enumerate().find(|(_, v)| v.len() != len) {
            return Err(Error::config(
                format!("simulation.initial.{name}[{i}]"),
                format!("expected length {len}, got {}", v.len()),
            ));
        }
    }
    Ok(())
}

pub(crate) fn mode_requires_observer(mode: Mode, gains: &GainSet) -> Result<()> {
    if mode == Mode::Output {
        gains.observer()?;
    }
    Ok(())
}
