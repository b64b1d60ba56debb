//! Starting values: fixed-effects-only GLM fits for the two components and
//! small random loadings.

use rand::Rng;

use super::mstep::{active_mask, maximize_psi, newton_maximize, Augmented, GammaProblem, LogisticProblem};
use super::FitConfig;
use crate::error::{Error, Result};
use crate::likelihood::{LatentState, ModelData, ParameterSet};
use crate::rng::{stream, Purpose};

fn hard_draws(data: &ModelData) -> Vec<Vec<Augmented>> {
    let draw = (0..data.n())
        .map(|k| Augmented {
            latent: [0.0; 3],
            weight: if data.observed_claim[k] { 1.0 } else { 0.0 },
            gap: if data.observed_claim[k] { data.observed_gap[k] } else { 1.0 },
        })
        .collect();
    vec![draw]
}

/// Fixed-effect logistic fit of the observed claim flags, ignoring truncation.
pub fn logistic_glm(data: &ModelData, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let draws = hard_draws(data);
    let problem = LogisticProblem {
        design: &data.design,
        draws: &draws,
        penalty: 0.0,
    };
    let mask = active_mask(&data.design, false);
    let res = newton_maximize(
        |c| problem.objective(c),
        |c| problem.gradient_hessian(c),
        &vec![0.0; data.p() + 3],
        &mask,
        tol,
        max_iter,
    )?;
    if res.capped {
        log::warn!("logistic start hit the coefficient bound; the claim flags look separable");
    }
    Ok(res.coef[..data.p()].to_vec())
}

/// Fixed-effect gamma fit of the reported gaps: `(gamma, psi)`.
pub fn gamma_glm(data: &ModelData, tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
    let reported: Vec<f64> = (0..data.n())
        .filter(|&k| data.observed_claim[k])
        .map(|k| data.observed_gap[k])
        .collect();
    if reported.is_empty() {
        return Err(Error::Initialization(
            "no reported claims; the gap model cannot be initialized".into(),
        ));
    }
    let draws = hard_draws(data);
    let problem = GammaProblem {
        design: &data.design,
        draws: &draws,
        penalty: 0.0,
    };
    let mask = active_mask(&data.design, false);
    let mut start = vec![0.0; data.p() + 3];
    let mean = reported.iter().sum::<f64>() / reported.len() as f64;
    if (0..data.n()).all(|k| data.design.row(k)[0] == 1.0) {
        start[0] = mean.ln();
    }
    // the coefficient maximizer does not depend on psi
    let res = newton_maximize(
        |c| problem.objective(c, 1.0),
        |c| problem.gradient_hessian(c, 1.0),
        &start,
        &mask,
        tol,
        max_iter,
    )?;
    if res.capped {
        log::warn!("gamma start hit the coefficient bound");
    }
    let psi = maximize_psi(&problem.sums(&res.coef), 1, 1.0)?;
    Ok((res.coef[..data.p()].to_vec(), psi))
}

/// `Psi^(0)` and zero latents.
pub fn initialize(data: &ModelData, config: &FitConfig) -> Result<(ParameterSet, LatentState)> {
    let (gamma, psi) = gamma_glm(data, config.irls_tol, config.irls_max_iter)?;
    let alpha = logistic_glm(data, config.irls_tol, config.irls_max_iter)?;
    let mut theta = ParameterSet {
        alpha,
        beta: [0.0; 3],
        gamma,
        nu: [0.0; 3],
        psi,
        rho: 0.0,
    };
    if config.latent_effects {
        let mut r = stream(config.seed, Purpose::Init, &[]);
        for b in theta.beta.iter_mut() {
            // (0, 0.01], so the first buyer loading starts strictly positive
            *b = 0.01 * (1.0 - r.random::<f64>());
        }
        for v in theta.nu.iter_mut() {
            *v = 0.01 * r.random::<f64>();
        }
        theta.rho = r.random_range(-0.01..0.01);
    }
    theta.validate()?;
    Ok((theta, LatentState::zeros(data.n_entities, data.n_policies)))
}
