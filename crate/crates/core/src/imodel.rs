//! Exosystem data and the minimal p-copy internal model `(G1, G2) = (I_p ⊗ β, I_p ⊗ σ)`.

use crate::error::{Error, Result};
use crate::matcore::{
    characteristic_polynomial, companion_pair, controllability_matrix, eigenvalues, kron,
    minimal_polynomial, numeric_rank, Matrix, MonicPolynomial, MINPOLY_TOL, RANK_TOL,
};

/// Coefficient tolerance when matching `char(β)` against `minpoly(S)`.
pub const CHARPOLY_TOL: f64 = 1e-8;

/// Leader dynamics `v(t+1) = S v(t)` with reference output `y_0 = -F v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Exosystem {
    pub s: Matrix,
    pub f: Matrix,
    pub v0: Vec<f64>,
}

impl Exosystem {
    pub fn new(s: Matrix, f: Matrix, v0: Vec<f64>) -> Result<Self> {
        if !s.is_square() || s.rows() == 0 {
            return Err(Error::dim("exosystem S", "non-empty square matrix", format!("{:?}", s.shape())));
        }
        if f.cols() != s.rows() {
            return Err(Error::dim("exosystem F columns", s.rows(), f.cols()));
        }
        if v0.len() != s.rows() {
            return Err(Error::dim("exosystem v0 length", s.rows(), v0.len()));
        }
        if let Some(v) = v0.iter().find(|v| !v.is_finite()) {
            return Err(Error::numerical("exosystem v0", format!("non-finite entry {v}")));
        }
        Ok(Exosystem { s, f, v0 })
    }

    pub fn q(&self) -> usize {
        self.s.rows()
    }

    pub fn p(&self) -> usize {
        self.f.rows()
    }

    /// `S v`.
    pub fn step(&self, v: &[f64]) -> Vec<f64> {
        self.s.mul_vec(v)
    }

    /// True iff every eigenvalue of `S` has modulus 1 within `tol`.
    pub fn spectrum_on_unit_circle(&self, tol: f64) -> Result<bool> {
        Ok(eigenvalues(&self.s)?.moduli().all(|m| (m - 1.0).abs() <= tol))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InternalModel {
    pub g1: Matrix,
    pub g2: Matrix,
    pub beta: Matrix,
    pub sigma: Matrix,
    pub p: usize,
}

impl InternalModel {
    /// Degree of the minimal polynomial (size of `β`).
    pub fn d(&self) -> usize {
        self.beta.rows()
    }

    /// Internal-model state dimension `n_z = p·d`.
    pub fn nz(&self) -> usize {
        self.p * self.d()
    }
}

/// Builds the minimal `p`-copy internal model of `s`. With no override `β` is
/// the companion matrix of the minimal polynomial and `σ = e_d`; an override
/// must have the right characteristic polynomial and be controllable.
pub fn build_internal_model(
    s: &Matrix,
    p: usize,
    beta_override: Option<(Matrix, Matrix)>,
) -> Result<InternalModel> {
    if p == 0 {
        return Err(Error::config("internal_model.p", "output dimension must be at least 1"));
    }
    let minpoly = minimal_polynomial(s, MINPOLY_TOL)?;
    let (beta, sigma) = match beta_override {
        None => companion_pair(&minpoly)?,
        Some((beta, sigma)) => {
            validate_override(&minpoly, &beta, &sigma)?;
            (beta, sigma)
        }
    };
    let ip = Matrix::identity(p);
    Ok(InternalModel {
        g1: kron(&ip, &beta),
        g2: kron(&ip, &sigma),
        beta,
        sigma,
        p,
    })
}

fn validate_override(minpoly: &MonicPolynomial, beta: &Matrix, sigma: &Matrix) -> Result<()> {
    const PATH: &str = "synthesis.beta_override";
    let d = minpoly.degree();
    if beta.shape() != (d, d) {
        return Err(Error::config(
            PATH,
            format!("beta must be {d}x{d} (degree of minpoly(S)), got {:?}", beta.shape()),
        ));
    }
    if sigma.shape() != (d, 1) {
        return Err(Error::config(
            PATH,
            format!("sigma must be a {d}x1 column, got {:?}", sigma.shape()),
        ));
    }
    let charpoly = characteristic_polynomial(beta)?;
    let mismatch = charpoly
        .coefficients()
        .iter()
        .zip(minpoly.coefficients())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if mismatch > CHARPOLY_TOL {
        return Err(Error::config(
            PATH,
            format!("char-poly check failed: char(beta) = {charpoly} but minpoly(S) = {minpoly}"),
        ));
    }
    let rank = numeric_rank(&controllability_matrix(beta, sigma), RANK_TOL);
    if rank != d {
        return Err(Error::config(
            PATH,
            format!("controllability check failed: rank {rank} < {d}"),
        ));
    }
    Ok(())
}
