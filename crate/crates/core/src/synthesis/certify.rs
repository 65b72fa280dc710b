use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::imodel::InternalModel;
use crate::matcore::{eigenvalues, kron, Matrix};

use super::assumptions::UNIT_CIRCLE_TOL;
use super::dare::DareOptions;
use super::gains::{build_augmented, observer_gain, state_feedback_gain};
use super::{DelaySpec, GainSet, Mode, NominalPlant};

/// Closed loop counts as Schur when its spectral radius is below `1 − margin`.
pub const DEFAULT_SCHUR_MARGIN: f64 = 1e-9;

pub const MAX_HALVINGS: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub mode: Mode,
    pub stable: bool,
    pub spectral_radius: f64,
    /// Dimension of the delay-lifted matrix whose spectrum was computed.
    pub lifted_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisParams {
    pub mode: Mode,
    pub gamma: f64,
    pub gamma_l: Option<f64>,
    /// Defaults to `min Re σ(H)`.
    pub nu: Option<f64>,
    /// Defaults to `min Re σ(H)`.
    pub nu_l: Option<f64>,
    /// Exponent `r` in `(Aᵀ)^{r+1}` for the observer; defaults to `r_con + r_com`.
    pub observer_r: Option<usize>,
    pub auto_tune: bool,
    pub dare: DareOptions,
    pub margin: f64,
}

impl SynthesisParams {
    pub fn new(mode: Mode, gamma: f64) -> Self {
        SynthesisParams {
            mode,
            gamma,
            gamma_l: None,
            nu: None,
            nu_l: None,
            observer_r: None,
            auto_tune: false,
            dare: DareOptions::default(),
            margin: DEFAULT_SCHUR_MARGIN,
        }
    }
}

/// `min Re λ` over `σ(H)`; must be positive.
pub fn default_nu(g: &Digraph) -> Result<f64> {
    let (h, _) = g.h_matrix();
    let nu = eigenvalues(&h)?
        .values
        .iter()
        .map(|&(re, _)| re)
        .fold(f64::INFINITY, f64::min);
    if nu <= 0.0 {
        return Err(Error::Synthesis(format!(
            "min Re σ(H) = {nu:.3e} is not positive; the graph has no leader-rooted spanning tree"
        )));
    }
    Ok(nu)
}

/// Nominal closed loop `x_c(t+1) = A₀ x_c(t) + A₁ x_c(t − r)` for `v = 0`.
///
/// State feedback, `x_c = col(x, z̄)`:
/// `A₀ = [[I⊗A, 0], [H⊗G₂C, I⊗G₁]]`, `A₁ = [[H⊗BK_x, I⊗BK_z], [0, 0]]`.
///
/// Output feedback, `x_c = col(x, z̄, ξ̄)`:
/// `A₀ = [[I⊗A, 0, 0], [H⊗G₂C, I⊗G₁, 0], [H⊗LC, 0, I⊗A − H⊗LC]]`,
/// `A₁ = [[0, I⊗BK₁, H⊗BK₂], [0, 0, 0], [0, I⊗BK₁, H⊗BK₂]]`.
pub fn closed_loop_matrices(
    plant: &NominalPlant,
    h: &Matrix,
    im: &InternalModel,
    gains: &GainSet,
    mode: Mode,
) -> Result<(Matrix, Matrix)> {
    let n_agents = h.rows();
    let eye = Matrix::identity(n_agents);
    let (n, m, nz) = (plant.n(), plant.m(), im.nz());
    check_shape("K_x", &gains.k_x, (m, n))?;
    check_shape("K_z", &gains.k_z, (m, nz))?;
    check_shape("G1", &im.g1, (nz, nz))?;
    check_shape("G2", &im.g2, (nz, plant.p()))?;

    let ia = kron(&eye, &plant.a);
    let hg2c = kron(h, &(&im.g2 * &plant.c));
    let ig1 = kron(&eye, &im.g1);
    match mode {
        Mode::State => {
            let a0 = Matrix::block(&[vec![Some(&ia), None], vec![Some(&hg2c), Some(&ig1)]])?;
            let hbkx = kron(h, &(&plant.b * &gains.k_x));
            let ibkz = kron(&eye, &(&plant.b * &gains.k_z));
            let zero = Matrix::zeros(n_agents * nz, n_agents * (n + nz));
            let top = Matrix::hstack(&[&hbkx, &ibkz])?;
            let a1 = Matrix::vstack(&[&top, &zero])?;
            Ok((a0, a1))
        }
        Mode::Output => {
            check_shape("K_1", &gains.k_1, (m, nz))?;
            check_shape("K_2", &gains.k_2, (m, n))?;
            let l = gains.observer()?;
            check_shape("L", l, (n, plant.p()))?;
            let lc = l * &plant.c;
            let hlc = kron(h, &lc);
            let s1 = &ia - &hlc;
            let a0 = Matrix::block(&[
                vec![Some(&ia), None, None],
                vec![Some(&hg2c), Some(&ig1), None],
                vec![Some(&hlc), None, Some(&s1)],
            ])?;
            let ibk1 = kron(&eye, &(&plant.b * &gains.k_1));
            let hbk2 = kron(h, &(&plant.b * &gains.k_2));
            let xn = Matrix::zeros(n_agents * n, n_agents * n);
            let row = Matrix::hstack(&[&xn, &ibk1, &hbk2])?;
            let zero = Matrix::zeros(n_agents * nz, n_agents * (2 * n + nz));
            let a1 = Matrix::vstack(&[&row, &zero, &row])?;
            Ok((a0, a1))
        }
    }
}

fn check_shape(name: &str, m: &Matrix, shape: (usize, usize)) -> Result<()> {
    if m.shape() != shape {
        return Err(Error::dim(format!("closed-loop assembly ({name})"), format!("{shape:?}"), format!("{:?}", m.shape())));
    }
    Ok(())
}

/// Block-companion form of `x(t+1) = A₀x(t) + A₁x(t−r)` over the stacked
/// state `(x(t), x(t−1), …, x(t−r))`. For `r = 0` this is `A₀ + A₁`.
pub fn lift_delay(a0: &Matrix, a1: &Matrix, r: usize) -> Result<Matrix> {
    if !a0.is_square() || a0.shape() != a1.shape() {
        return Err(Error::dim("delay lift", format!("{:?}", a0.shape()), format!("{:?}", a1.shape())));
    }
    if r == 0 {
        return Ok(a0 + a1);
    }
    let n = a0.rows();
    let eye = Matrix::identity(n);
    let blocks: Vec<Vec<Option<&Matrix>>> = (0..=r)
        .map(|bi| {
            (0..=r)
                .map(|bj| match (bi, bj) {
                    (0, 0) => Some(a0),
                    (0, j) if j == r => Some(a1),
                    (i, j) if i == j + 1 => Some(&eye),
                    _ => None,
                })
                .collect()
        })
        .collect();
    Matrix::block(&blocks)
}

pub fn certify_closed_loop(
    plant: &NominalPlant,
    g: &Digraph,
    im: &InternalModel,
    gains: &GainSet,
    delays: DelaySpec,
    mode: Mode,
    margin: f64,
) -> Result<Certificate> {
    let (h, _) = g.h_matrix();
    let (a0, a1) = closed_loop_matrices(plant, &h, im, gains, mode)?;
    let lifted = lift_delay(&a0, &a1, delays.r())?;
    let rho = eigenvalues(&lifted)?.spectral_radius();
    Ok(Certificate {
        mode,
        stable: rho < 1.0 - margin,
        spectral_radius: rho,
        lifted_dim: lifted.rows(),
    })
}

/// Gains for fixed parameters, without certification.
pub fn compute_gains(
    plant: &NominalPlant,
    g: &Digraph,
    im: &InternalModel,
    delays: DelaySpec,
    params: &SynthesisParams,
) -> Result<GainSet> {
    let r = delays.r();
    let nu = match params.nu {
        Some(nu) => nu,
        None => default_nu(g)?,
    };
    let (a_c, b_c) = build_augmented(plant, im)?;
    let k = state_feedback_gain(&a_c, &b_c, params.gamma, nu, r, params.dare)?;
    let mut gains = GainSet::from_joint(&k, plant.n(), params.gamma, nu, r);
    if params.mode == Mode::Output {
        let gamma_l = params.gamma_l.ok_or_else(|| {
            Error::config("synthesis.gamma_l", "output feedback requires gamma_l")
        })?;
        let nu_l = match params.nu_l {
            Some(nu) => nu,
            None => default_nu(g)?,
        };
        let observer_r = params.observer_r.unwrap_or(r);
        gains.l_obs = Some(observer_gain(&plant.a, &plant.c, gamma_l, nu_l, observer_r, params.dare)?);
        gains.gamma_l = Some(gamma_l);
        gains.nu_l = Some(nu_l);
        gains.observer_r = Some(observer_r);
    }
    Ok(gains)
}

/// Halves `γ` (and `γ_l`) from `params.gamma` until the lifted closed loop is
/// Schur, trying at most [`MAX_HALVINGS`] halvings.
pub fn auto_tune_gamma(
    plant: &NominalPlant,
    g: &Digraph,
    im: &InternalModel,
    delays: DelaySpec,
    params: &SynthesisParams,
) -> Result<(GainSet, Certificate)> {
    if !(params.gamma > 0.0 && params.gamma < 1.0) {
        return Err(Error::config("synthesis.gamma", format!("gamma0 must lie in (0, 1), got {}", params.gamma)));
    }
    let rho_a = eigenvalues(&plant.a)?.spectral_radius();
    if rho_a > 1.0 + UNIT_CIRCLE_TOL {
        return Err(Error::Synthesis(format!(
            "A has spectral radius {rho_a:.6} > 1 (Assumption 6); low-gain design does not apply"
        )));
    }
    if !g.has_leader_spanning_tree() {
        return Err(Error::Synthesis(
            "graph has no leader-rooted spanning tree (Assumption 4)".into(),
        ));
    }
    let mut last = String::from("no candidate evaluated");
    for k in 0..=MAX_HALVINGS {
        let scale = 0.5_f64.powi(k as i32);
        let candidate = SynthesisParams {
            gamma: params.gamma * scale,
            gamma_l: params.gamma_l.map(|gl| gl * scale),
            ..params.clone()
        };
        match compute_gains(plant, g, im, delays, &candidate)
            .and_then(|gains| {
                certify_closed_loop(plant, g, im, &gains, delays, params.mode, params.margin)
                    .map(|cert| (gains, cert))
            }) {
            Ok((gains, cert)) if cert.stable => return Ok((gains, cert)),
            Ok((_, cert)) => {
                last = format!("gamma = {:.3e}: spectral radius {:.6}", candidate.gamma, cert.spectral_radius)
            }
            Err(e) => last = format!("gamma = {:.3e}: {e}", candidate.gamma),
        }
    }
    Err(Error::Synthesis(format!(
        "no stabilizing gamma found after {MAX_HALVINGS} halvings from {} (last: {last}); \
         check the assumptions or reduce the delay",
        params.gamma
    )))
}

/// Full synthesis: either fixed parameters (certified but not required to be
/// stable) or the halving search.
pub fn synthesize(
    plant: &NominalPlant,
    g: &Digraph,
    im: &InternalModel,
    delays: DelaySpec,
    params: &SynthesisParams,
) -> Result<(GainSet, Certificate)> {
    if params.auto_tune {
        return auto_tune_gamma(plant, g, im, delays, params);
    }
    let gains = compute_gains(plant, g, im, delays, params)?;
    let cert = certify_closed_loop(plant, g, im, &gains, delays, params.mode, params.margin)?;
    Ok((gains, cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_with_zero_delay_is_sum() {
        let a0 = Matrix::from_rows(&[vec![0.5, 0.1], vec![0.0, 0.2]]).unwrap();
        let a1 = Matrix::from_rows(&[vec![0.1, 0.0], vec![0.3, 0.1]]).unwrap();
        assert_eq!(lift_delay(&a0, &a1, 0).unwrap(), &a0 + &a1);
    }

    #[test]
    fn lift_structure() {
        let a0 = Matrix::from_rows(&[vec![2.0]]).unwrap();
        let a1 = Matrix::from_rows(&[vec![3.0]]).unwrap();
        let l = lift_delay(&a0, &a1, 2).unwrap();
        assert_eq!(
            l.to_rows(),
            vec![vec![2.0, 0.0, 3.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]
        );
    }

    #[test]
    fn default_nu_rejects_leaderless_graph() {
        let g = Digraph::from_pairs(2, &[(1, 2), (2, 1)]).unwrap();
        assert!(default_nu(&g).is_err());
        let g = Digraph::from_pairs(2, &[(0, 1), (1, 2)]).unwrap();
        assert!((default_nu(&g).unwrap() - 1.0).abs() < 1e-12);
    }
}
