use crate::error::{Error, Result};
use crate::imodel::InternalModel;
use crate::matcore::{eigenvalues, Matrix};

use super::assumptions::{stabilizability_failure, transmission_zero_failure};
use super::dare::{solve_parametric_dare, DareOptions};
use super::NominalPlant;

/// Low-gain state feedback `K = −ν⁻¹(I + BᵀPB)⁻¹BᵀP A^{r+1}` with `P` the
/// solution of the parametric DARE for `γ`.
pub fn state_feedback_gain(
    a: &Matrix,
    b: &Matrix,
    gamma: f64,
    nu: f64,
    r: usize,
    opts: DareOptions,
) -> Result<Matrix> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::numerical("state feedback gain", format!("nu must be positive, got {nu}")));
    }
    let p = solve_parametric_dare(a, b, gamma, opts)?;
    let bt = b.transpose();
    let r_mat = &Matrix::identity(b.cols()) + &(&(&bt * &p) * b);
    let rhs = &(&bt * &p) * &a.pow(exponent(r)?);
    Ok(r_mat.solve(&rhs)?.scale(-1.0 / nu))
}

/// Observer gain `L = −K_lᵀ` with `K_l = −ν_l⁻¹(I + C P_l Cᵀ)⁻¹ C P_l (Aᵀ)^{r+1}`
/// and `P_l` solving the dual parametric DARE on `(Aᵀ, Cᵀ)`.
pub fn observer_gain(
    a: &Matrix,
    c: &Matrix,
    gamma_l: f64,
    nu_l: f64,
    r: usize,
    opts: DareOptions,
) -> Result<Matrix> {
    if !(nu_l > 0.0 && nu_l.is_finite()) {
        return Err(Error::numerical("observer gain", format!("nu_l must be positive, got {nu_l}")));
    }
    let at = a.transpose();
    let ct = c.transpose();
    let p_l = solve_parametric_dare(&at, &ct, gamma_l, opts)?;
    let r_l = &Matrix::identity(c.rows()) + &(&(c * &p_l) * &ct);
    let k_l = r_l
        .solve(&(&(c * &p_l) * &at.pow(exponent(r)?)))?
        .scale(-1.0 / nu_l);
    Ok(-&k_l.transpose())
}

fn exponent(r: usize) -> Result<u32> {
    u32::try_from(r + 1).map_err(|_| Error::numerical("gain", format!("delay {r} too large")))
}

/// Internal-model augmented pair `A_c = [[A, 0], [G2·C, G1]]`, `B_c = [B; 0]`,
/// checked for stabilizability.
pub fn build_augmented(plant: &NominalPlant, im: &InternalModel) -> Result<(Matrix, Matrix)> {
    if im.g2.cols() != plant.p() {
        return Err(Error::dim("internal model G2 columns", plant.p(), im.g2.cols()));
    }
    let g2c = &im.g2 * &plant.c;
    let a_c = Matrix::block(&[vec![Some(&plant.a), None], vec![Some(&g2c), Some(&im.g1)]])?;
    let b_c = Matrix::vstack(&[&plant.b, &Matrix::zeros(im.nz(), plant.m())])?;

    if let Some(lambda) = stabilizability_failure(&a_c, &b_c)? {
        let culprit = if stabilizability_failure(&plant.a, &plant.b)?.is_some() {
            "Assumption 1: (A, B) is not stabilizable".to_string()
        } else {
            let roots = eigenvalues(&im.beta)?.values;
            match transmission_zero_failure(plant, &roots)? {
                Some((l, rank)) => format!(
                    "Assumption 3: rank [A - λI, B; C, 0] = {rank} < n + p at λ = {:.6}{:+.6}i",
                    l.0, l.1
                ),
                None => "internal-model modes are unreachable from the input".to_string(),
            }
        };
        return Err(Error::Synthesis(format!(
            "augmented pair (A_c, B_c) is not stabilizable at λ = {:.6}{:+.6}i ({culprit})",
            lambda.0, lambda.1
        )));
    }
    Ok((a_c, b_c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imodel::build_internal_model;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_rows(&[vec![v]]).unwrap()
    }

    #[test]
    fn scalar_state_feedback() {
        let k = state_feedback_gain(&scalar(1.0), &scalar(1.0), 0.5, 1.0, 0, DareOptions::default()).unwrap();
        assert!((k.get(0, 0) + 0.5).abs() < 1e-12);
        assert!((1.0 + k.get(0, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scalar_observer() {
        let l = observer_gain(&scalar(1.0), &scalar(1.0), 0.5, 1.0, 0, DareOptions::default()).unwrap();
        assert!((l.get(0, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_nu() {
        assert!(state_feedback_gain(&scalar(1.0), &scalar(1.0), 0.5, 0.0, 0, DareOptions::default()).is_err());
        assert!(observer_gain(&scalar(1.0), &scalar(1.0), 0.5, -1.0, 0, DareOptions::default()).is_err());
    }

    #[test]
    fn degenerate_constant_exosystem_dims() {
        let plant = NominalPlant::new(
            Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(),
            Matrix::column(&[0.0, 1.0]).unwrap(),
            Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            Matrix::zeros(2, 1),
        )
        .unwrap();
        let im = build_internal_model(&Matrix::identity(1), 1, None).unwrap();
        let (a_c, b_c) = build_augmented(&plant, &im).unwrap();
        assert_eq!(a_c.shape(), (3, 3));
        assert_eq!(b_c.shape(), (3, 1));
        assert_eq!(a_c.get(2, 0), 1.0);
        assert_eq!(a_c.get(2, 2), 1.0);
    }

    #[test]
    fn zero_output_breaks_stabilizability() {
        let plant = NominalPlant::new(
            Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(),
            Matrix::column(&[1.0, 1.0]).unwrap(),
            Matrix::zeros(1, 2),
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let (c, s) = (1f64.cos(), 1f64.sin());
        let rot = Matrix::from_rows(&[vec![c, s], vec![-s, c]]).unwrap();
        let im = build_internal_model(&rot, 1, None).unwrap();
        let err = build_augmented(&plant, &im).unwrap_err();
        assert!(err.to_string().contains("Assumption 3"), "{err}");
    }
}
