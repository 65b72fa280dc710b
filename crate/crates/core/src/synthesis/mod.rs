//! Gain synthesis for the delayed multi-agent regulation problem: assumption
//! checks, the parametric Riccati equation, low-gain state feedback and
//! observer gains, and delay-lifted stability certificates.

mod assumptions;
mod certify;
mod dare;
mod gains;

pub use assumptions::{
    check_assumptions, is_detectable, is_stabilizable, AssumptionCheck, AssumptionReport,
    UNIT_CIRCLE_TOL,
};
pub use certify::{
    auto_tune_gamma, certify_closed_loop, closed_loop_matrices, compute_gains, default_nu, lift_delay,
    synthesize, Certificate, SynthesisParams, DEFAULT_SCHUR_MARGIN, MAX_HALVINGS,
};
pub use dare::{dare_residual, solve_parametric_dare, DareOptions};
pub use gains::{build_augmented, observer_gain, state_feedback_gain};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::Matrix;

/// Nominal follower plant `x⁺ = A x + B u + E v`, `y = C x`.
#[derive(Clone, Debug, PartialEq)]
pub struct NominalPlant {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub e: Matrix,
}

impl NominalPlant {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, e: Matrix) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || n == 0 {
            return Err(Error::dim("plant A", "non-empty square matrix", format!("{:?}", a.shape())));
        }
        if b.rows() != n || b.cols() == 0 {
            return Err(Error::dim("plant B", format!("{n}xm with m >= 1"), format!("{:?}", b.shape())));
        }
        if c.cols() != n || c.rows() == 0 {
            return Err(Error::dim("plant C", format!("px{n} with p >= 1"), format!("{:?}", c.shape())));
        }
        if e.rows() != n {
            return Err(Error::dim("plant E rows", n, e.rows()));
        }
        Ok(NominalPlant { a, b, c, e })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn p(&self) -> usize {
        self.c.rows()
    }

    pub fn q(&self) -> usize {
        self.e.cols()
    }
}

/// Input delay `r_con` and communication delay `r_com`, in steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub r_con: usize,
    pub r_com: usize,
}

impl DelaySpec {
    pub fn new(r_con: usize, r_com: usize) -> Self {
        DelaySpec { r_con, r_com }
    }

    /// Total loop delay `r_con + r_com`.
    pub fn r(&self) -> usize {
        self.r_con + self.r_com
    }
}

/// Which distributed control law is in use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    State,
    Output,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::State => "state",
            Mode::Output => "output",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "state" => Ok(Mode::State),
            "output" => Ok(Mode::Output),
            other => Err(Error::config("mode", format!("expected `state` or `output`, got `{other}`"))),
        }
    }
}

/// Synthesized gains and the parameters that produced them.
///
/// `k_1`/`k_2` are the output-feedback gains; when synthesized jointly they
/// equal `(k_z, k_x)`. `l_obs` and the `_l` parameters are present only for
/// output feedback.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSet {
    pub k_x: Matrix,
    pub k_z: Matrix,
    pub k_1: Matrix,
    pub k_2: Matrix,
    pub l_obs: Option<Matrix>,
    pub gamma: f64,
    pub nu: f64,
    pub gamma_l: Option<f64>,
    pub nu_l: Option<f64>,
    pub r_used: usize,
    pub observer_r: Option<usize>,
}

impl GainSet {
    /// Splits a joint augmented gain `K = (K_x, K_z)` at column `n`.
    pub fn from_joint(k: &Matrix, n: usize, gamma: f64, nu: f64, r_used: usize) -> Self {
        let k_x = k.sub_block(0, 0, k.rows(), n);
        let k_z = k.sub_block(0, n, k.rows(), k.cols() - n);
        GainSet {
            k_1: k_z.clone(),
            k_2: k_x.clone(),
            k_x,
            k_z,
            l_obs: None,
            gamma,
            nu,
            gamma_l: None,
            nu_l: None,
            r_used,
            observer_r: None,
        }
    }

    /// Zero gains with the given dimensions (open loop).
    pub fn zeros(m: usize, n: usize, nz: usize, p: usize, with_observer: bool) -> Self {
        let mut g = Self::from_joint(&Matrix::zeros(m, n + nz), n, 0.0, 0.0, 0);
        if with_observer {
            g.l_obs = Some(Matrix::zeros(n, p));
        }
        g
    }

    /// The joint row `(K_x, K_z)`.
    pub fn joint(&self) -> Matrix {
        Matrix::hstack(&[&self.k_x, &self.k_z]).expect("gains share a row count")
    }

    pub fn observer(&self) -> Result<&Matrix> {
        self.l_obs
            .as_ref()
            .ok_or_else(|| Error::Synthesis("output feedback requires an observer gain L".into()))
    }
}
