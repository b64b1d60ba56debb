//! Model distributions and likelihoods: the logistic claim component, the
//! mean-parameterized gamma gap component, the bivariate-normal latent
//! prior, and the truncation-adjusted observed likelihood.

use serde::{Deserialize, Serialize};

use crate::centrality::DesignMatrix;
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::special::{ln_logistic, ln_one_minus_logistic, logistic, GammaShape, ETA_BOUND};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Full parameterization `(alpha, beta, gamma, nu, psi, rho)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    /// Fixed effects of the claim (logistic) component, intercept first.
    pub alpha: Vec<f64>,
    /// Buyer, seller and policy loadings of the claim component.
    pub beta: [f64; 3],
    /// Fixed effects of the gap (gamma) component, same layout as `alpha`.
    pub gamma: Vec<f64>,
    pub nu: [f64; 3],
    /// Gamma dispersion: shape `1/psi`, variance `psi * mu^2`.
    pub psi: f64,
    /// Correlation of the buyer and seller effects of one entity.
    pub rho: f64,
}

impl ParameterSet {
    /// All coefficients zero, `psi = 1`, `rho = 0`.
    pub fn zeros(p: usize) -> Self {
        Self {
            alpha: vec![0.0; p],
            beta: [0.0; 3],
            gamma: vec![0.0; p],
            nu: [0.0; 3],
            psi: 1.0,
            rho: 0.0,
        }
    }

    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.gamma.len() {
            return Err(Error::Contract(format!(
                "alpha has {} entries but gamma has {}",
                self.alpha.len(),
                self.gamma.len()
            )));
        }
        if !(self.psi > 0.0 && self.psi.is_finite()) {
            return Err(Error::Domain(format!("dispersion must be positive, got {}", self.psi)));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::Domain(format!("correlation must lie in (-1, 1), got {}", self.rho)));
        }
        let all = self.alpha.iter().chain(&self.beta).chain(&self.gamma).chain(&self.nu);
        if let Some((i, v)) = all.enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!("coefficient {i} is not finite ({v})")));
        }
        Ok(())
    }

    /// Whether the model has no latent loadings (the GLM reduction).
    pub fn is_glm(&self) -> bool {
        self.beta == [0.0; 3] && self.nu == [0.0; 3]
    }

    /// Coefficients stacked as `(alpha, beta, gamma, nu)`.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut v = self.alpha.clone();
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.gamma);
        v.extend_from_slice(&self.nu);
        v
    }

    /// Inverse of [`coefficients`](Self::coefficients), keeping `psi` and `rho`.
    pub fn with_coefficients(&self, v: &[f64]) -> Self {
        let p = self.p();
        let mut out = self.clone();
        out.alpha.copy_from_slice(&v[..p]);
        out.beta.copy_from_slice(&v[p..p + 3]);
        out.gamma.copy_from_slice(&v[p + 3..2 * p + 3]);
        out.nu.copy_from_slice(&v[2 * p + 3..2 * p + 6]);
        out
    }

    /// Sign flip of latent family `f` (0 buyer, 1 seller, 2 policy) under
    /// which the likelihood is invariant when applied together with
    /// [`LatentState::negate`]. The entity families also flip `rho`.
    pub fn flipped(&self, f: usize) -> Self {
        let mut out = self.clone();
        out.beta[f] = -out.beta[f];
        out.nu[f] = -out.nu[f];
        if f < 2 {
            out.rho = -out.rho;
        }
        out
    }
}

/// One joint draw of all latent effects, indexed densely (entities and
/// policies in ascending id order of the owning graph).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub buyer: Vec<f64>,
    pub seller: Vec<f64>,
    pub policy: Vec<f64>,
}

impl LatentState {
    pub fn zeros(n_entities: usize, n_policies: usize) -> Self {
        Self {
            buyer: vec![0.0; n_entities],
            seller: vec![0.0; n_entities],
            policy: vec![0.0; n_policies],
        }
    }

    /// Negates every effect of family `f` (0 buyer, 1 seller, 2 policy).
    pub fn negate(&mut self, f: usize) {
        let v = match f {
            0 => &mut self.buyer,
            1 => &mut self.seller,
            _ => &mut self.policy,
        };
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Connection-level data prepared for the estimator: standardized design,
/// latent index of each endpoint and policy, truncation windows and
/// observed outcomes, plus the inverted indexes of the samplers.
#[derive(Debug, Clone)]
pub struct ModelData {
    pub design: DesignMatrix,
    pub buyer: Vec<usize>,
    pub seller: Vec<usize>,
    pub policy: Vec<usize>,
    pub window: Vec<f64>,
    pub observed_claim: Vec<bool>,
    pub observed_gap: Vec<f64>,
    pub n_entities: usize,
    pub n_policies: usize,
    /// Entity and policy ids, used to key random streams.
    pub entity_ids: Vec<u64>,
    pub policy_ids: Vec<u64>,
    pub connection_ids: Vec<u64>,
    pub by_buyer: Vec<Vec<usize>>,
    pub by_seller: Vec<Vec<usize>>,
    pub by_policy: Vec<Vec<usize>>,
}

impl ModelData {
    pub fn new(g: &NetworkGraph, design: DesignMatrix) -> Result<Self> {
        let n = g.connections().len();
        if design.n != n {
            return Err(Error::Contract(format!(
                "design has {} rows for {} connections",
                design.n, n
            )));
        }
        let window: Vec<f64> = (0..n).map(|k| g.window(k)).collect();
        if let Some(k) = window.iter().position(|&c| !(c > 0.0)) {
            return Err(Error::Domain(format!(
                "connection {} has a non-positive truncation window",
                g.connections()[k].id
            )));
        }
        Ok(Self {
            design,
            buyer: (0..n).map(|k| g.buyer_of(k)).collect(),
            seller: (0..n).map(|k| g.seller_of(k)).collect(),
            policy: (0..n).map(|k| g.policy_of(k)).collect(),
            window,
            observed_claim: g.connections().iter().map(|c| c.observed_claim).collect(),
            observed_gap: g.connections().iter().map(|c| c.observed_gap).collect(),
            n_entities: g.entities().len(),
            n_policies: g.policies().len(),
            entity_ids: g.entities().iter().map(|e| e.id.0).collect(),
            policy_ids: g.policies().iter().map(|p| p.id.0).collect(),
            connection_ids: g.connections().iter().map(|c| c.id.0).collect(),
            by_buyer: (0..g.entities().len()).map(|i| g.connections_as_buyer(i).to_vec()).collect(),
            by_seller: (0..g.entities().len()).map(|i| g.connections_as_seller(i).to_vec()).collect(),
            by_policy: (0..g.policies().len()).map(|j| g.connections_of_policy(j).to_vec()).collect(),
        })
    }

    /// Assembles data that does not come from a graph, such as tiny
    /// verification instances. Ids are the dense indexes.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        design: DesignMatrix,
        buyer: Vec<usize>,
        seller: Vec<usize>,
        policy: Vec<usize>,
        window: Vec<f64>,
        observed_claim: Vec<bool>,
        observed_gap: Vec<f64>,
        n_entities: usize,
        n_policies: usize,
    ) -> Result<Self> {
        let n = design.n;
        for (name, len) in [
            ("buyer", buyer.len()),
            ("seller", seller.len()),
            ("policy", policy.len()),
            ("window", window.len()),
            ("observed_claim", observed_claim.len()),
            ("observed_gap", observed_gap.len()),
        ] {
            if len != n {
                return Err(Error::Contract(format!("{name} has {len} entries for {n} rows")));
            }
        }
        for k in 0..n {
            if buyer[k] >= n_entities || seller[k] >= n_entities || policy[k] >= n_policies {
                return Err(Error::Contract(format!("row {k} refers to an unknown unit")));
            }
            if buyer[k] == seller[k] {
                return Err(Error::Contract(format!("row {k} is a self-loop")));
            }
            if !(window[k] > 0.0) {
                return Err(Error::Domain(format!("row {k} has a non-positive truncation window")));
            }
            if observed_claim[k] && !(observed_gap[k] > 0.0 && observed_gap[k] <= window[k]) {
                return Err(Error::Domain(format!("row {k} has a reported gap outside its window")));
            }
        }
        let mut by_buyer = vec![Vec::new(); n_entities];
        let mut by_seller = vec![Vec::new(); n_entities];
        let mut by_policy = vec![Vec::new(); n_policies];
        for k in 0..n {
            by_buyer[buyer[k]].push(k);
            by_seller[seller[k]].push(k);
            by_policy[policy[k]].push(k);
        }
        Ok(Self {
            design,
            buyer,
            seller,
            policy,
            window,
            observed_claim,
            observed_gap,
            n_entities,
            n_policies,
            entity_ids: (0..n_entities as u64).collect(),
            policy_ids: (0..n_policies as u64).collect(),
            connection_ids: (0..n as u64).collect(),
            by_buyer,
            by_seller,
            by_policy,
        })
    }

    pub fn n(&self) -> usize {
        self.buyer.len()
    }

    pub fn p(&self) -> usize {
        self.design.p
    }

    /// `(B, S, P)` of connection `k` under `latents`.
    #[inline]
    pub fn latent_row(&self, latents: &LatentState, k: usize) -> [f64; 3] {
        [
            latents.buyer[self.buyer[k]],
            latents.seller[self.seller[k]],
            latents.policy[self.policy[k]],
        ]
    }

    /// Fixed part `coef . x_k` of a linear predictor for every connection.
    pub fn fixed_predictor(&self, coef: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|k| dot(self.design.row(k), coef)).collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Claim probability of a design row with latent values `(B, S, P)`.
pub fn claim_prob(row: &[f64], latent: [f64; 3], alpha: &[f64], beta: &[f64; 3]) -> Result<f64> {
    if row.len() != alpha.len() {
        return Err(Error::Contract(format!("row has {} columns, alpha {}", row.len(), alpha.len())));
    }
    let eta = dot(row, alpha) + dot3(&latent, beta);
    if !eta.is_finite() {
        let bad = row
            .iter()
            .zip(alpha)
            .position(|(x, a)| !(x * a).is_finite())
            .map(|i| format!("alpha[{i}]"))
            .or_else(|| {
                latent
                    .iter()
                    .zip(beta)
                    .position(|(x, b)| !(x * b).is_finite())
                    .map(|i| format!("beta[{i}]"))
            })
            .unwrap_or_else(|| "sum".into());
        return Err(Error::Numerical(format!("non-finite claim predictor at {bad}")));
    }
    Ok(logistic(eta))
}

fn check_gap_args(t: f64, mu: f64, psi: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("gap must be positive, got {t}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("gap mean must be positive, got {mu}")));
    }
    if !(psi > 0.0 && psi.is_finite()) {
        return Err(Error::Domain(format!("dispersion must be positive, got {psi}")));
    }
    Ok(())
}

/// `ln f(t; mu, psi)` with a precomputed shape `1/psi`.
#[inline]
pub fn ln_gap_density_with(t: f64, mu: f64, psi: f64, shape: &GammaShape) -> f64 {
    let scale = psi * mu;
    shape.ln_density(t / scale) - scale.ln()
}

/// Gamma gap density with mean `mu` and dispersion `psi`.
pub fn gap_density(t: f64, mu: f64, psi: f64) -> Result<f64> {
    check_gap_args(t, mu, psi)?;
    Ok(ln_gap_density_with(t, mu, psi, &GammaShape::new(1.0 / psi)).exp())
}

/// Gamma gap distribution function `F(t; mu, psi)`.
pub fn gap_cdf(t: f64, mu: f64, psi: f64) -> Result<f64> {
    if t.is_infinite() && t > 0.0 {
        return Ok(1.0);
    }
    check_gap_args(t, mu, psi)?;
    Ok(GammaShape::new(1.0 / psi).regularized(t / (psi * mu)).0)
}

/// `ln (1 - F(t; mu, psi))`.
#[inline]
pub fn ln_gap_survival_with(t: f64, mu: f64, psi: f64, shape: &GammaShape) -> f64 {
    shape.ln_upper(t / (psi * mu))
}

/// Probability of a claim that is also reported by the window end: `p F(c)`.
pub fn truncated_claim_prob(p: f64, mu: f64, psi: f64, c: f64) -> Result<f64> {
    if c <= 0.0 {
        return Ok(0.0);
    }
    Ok(p * gap_cdf(c, mu, psi)?)
}

/// Right-truncated gap density `f(t) / F(c)` on `(0, c]`.
pub fn truncated_gap_density(t: f64, mu: f64, psi: f64, c: f64) -> Result<f64> {
    if t > c {
        return Err(Error::Domain(format!("gap {t} exceeds the truncation point {c}")));
    }
    check_gap_args(t, mu, psi)?;
    let shape = GammaShape::new(1.0 / psi);
    let ln_f = ln_gap_density_with(t, mu, psi, &shape);
    let ln_fc = shape.regularized(c / (psi * mu)).0.ln();
    Ok((ln_f - ln_fc).exp())
}

#[inline]
fn ln_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Observed-data log-likelihood of one connection given its linear predictors.
///
/// A reported claim contributes `ln p + ln f(T)` (the `F(c)` of the truncated
/// probability and density cancel); an unreported one `ln(1 - p F(c))`.
#[inline]
pub fn conn_obs_loglik(
    claim: bool,
    gap: f64,
    window: f64,
    eta_z: f64,
    eta_t: f64,
    psi: f64,
    shape: &GammaShape,
) -> f64 {
    let mu = eta_t.clamp(-ETA_BOUND, ETA_BOUND).exp();
    if claim {
        ln_logistic(eta_z) + ln_gap_density_with(gap, mu, psi, shape)
    } else {
        ln_add_exp(
            ln_one_minus_logistic(eta_z),
            ln_logistic(eta_z) + ln_gap_survival_with(window, mu, psi, shape),
        )
    }
}

/// Derivatives of [`conn_obs_loglik`] with respect to `(eta_z, eta_t)`.
pub fn conn_obs_score(
    claim: bool,
    gap: f64,
    window: f64,
    eta_z: f64,
    eta_t: f64,
    psi: f64,
    shape: &GammaShape,
) -> (f64, f64) {
    let p = logistic(eta_z);
    let mu = eta_t.clamp(-ETA_BOUND, ETA_BOUND).exp();
    if claim {
        (1.0 - p, (gap / mu - 1.0) / psi)
    } else {
        let ln_den = conn_obs_loglik(false, gap, window, eta_z, eta_t, psi, shape);
        let (f_c, _) = shape.regularized(window / (psi * mu));
        let dz = -(ln_logistic(eta_z) + ln_one_minus_logistic(eta_z) - ln_den).exp() * f_c;
        let dt = (ln_logistic(eta_z) + window.ln() + ln_gap_density_with(window, mu, psi, shape) - ln_den).exp();
        (dz, dt)
    }
}

/// Linear predictors `(eta_z, eta_t)` of connection `k`.
#[inline]
pub fn predictors(data: &ModelData, theta: &ParameterSet, latents: &LatentState, k: usize) -> (f64, f64) {
    let row = data.design.row(k);
    let l = data.latent_row(latents, k);
    (
        dot(row, &theta.alpha) + dot3(&l, &theta.beta),
        dot(row, &theta.gamma) + dot3(&l, &theta.nu),
    )
}

/// Observed-data log-likelihood of all connections given the latent effects.
pub fn obs_loglik_conditional(data: &ModelData, theta: &ParameterSet, latents: &LatentState) -> Result<f64> {
    theta.validate()?;
    let shape = GammaShape::new(1.0 / theta.psi);
    let mut total = 0.0;
    for k in 0..data.n() {
        let (ez, et) = predictors(data, theta, latents, k);
        total += conn_obs_loglik(
            data.observed_claim[k],
            data.observed_gap[k],
            data.window[k],
            ez,
            et,
            theta.psi,
            &shape,
        );
    }
    Ok(total)
}

/// Gradient of [`obs_loglik_conditional`] over `(alpha, beta, gamma, nu)`.
pub fn obs_score(data: &ModelData, theta: &ParameterSet, latents: &LatentState) -> Result<Vec<f64>> {
    theta.validate()?;
    let p = data.p();
    let shape = GammaShape::new(1.0 / theta.psi);
    let mut grad = vec![0.0; 2 * p + 6];
    for k in 0..data.n() {
        let (ez, et) = predictors(data, theta, latents, k);
        let (dz, dt) = conn_obs_score(
            data.observed_claim[k],
            data.observed_gap[k],
            data.window[k],
            ez,
            et,
            theta.psi,
            &shape,
        );
        accumulate(&mut grad, data.design.row(k), data.latent_row(latents, k), dz, dt);
    }
    Ok(grad)
}

fn accumulate(grad: &mut [f64], row: &[f64], l: [f64; 3], dz: f64, dt: f64) {
    let p = row.len();
    for j in 0..p {
        grad[j] += dz * row[j];
        grad[p + 3 + j] += dt * row[j];
    }
    for j in 0..3 {
        grad[p + j] += dz * l[j];
        grad[2 * p + 3 + j] += dt * l[j];
    }
}

/// `ln` of the bivariate standard normal density with correlation `rho`.
#[inline]
pub fn ln_bivariate_normal(b: f64, s: f64, rho: f64) -> f64 {
    let one_m = 1.0 - rho * rho;
    -LN_2PI - 0.5 * one_m.ln() - (b * b - 2.0 * rho * b * s + s * s) / (2.0 * one_m)
}

#[inline]
pub fn ln_normal(x: f64) -> f64 {
    -0.5 * LN_2PI - 0.5 * x * x
}

/// Log prior density of a full latent state.
pub fn ln_prior(latents: &LatentState, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("correlation must lie in (-1, 1), got {rho}")));
    }
    let pairs: f64 = latents
        .buyer
        .iter()
        .zip(&latents.seller)
        .map(|(&b, &s)| ln_bivariate_normal(b, s, rho))
        .sum();
    let pol: f64 = latents.policy.iter().map(|&x| ln_normal(x)).sum();
    Ok(pairs + pol)
}

/// Complete-data log-likelihood given actual claims `z` and gaps `t`
/// (gaps are read only where `z` is true), including the latent prior.
pub fn complete_loglik(
    data: &ModelData,
    theta: &ParameterSet,
    latents: &LatentState,
    z: &[bool],
    t: &[f64],
) -> Result<f64> {
    theta.validate()?;
    let shape = GammaShape::new(1.0 / theta.psi);
    let mut total = 0.0;
    for k in 0..data.n() {
        let (ez, et) = predictors(data, theta, latents, k);
        if z[k] {
            let mu = et.clamp(-ETA_BOUND, ETA_BOUND).exp();
            if !(t[k] > 0.0) {
                return Err(Error::Domain(format!("gap of connection {k} must be positive")));
            }
            total += ln_logistic(ez) + ln_gap_density_with(t[k], mu, theta.psi, &shape);
        } else {
            total += ln_one_minus_logistic(ez);
        }
    }
    Ok(total + ln_prior(latents, theta.rho)?)
}

/// Gradient of [`complete_loglik`] over `(alpha, beta, gamma, nu)`.
pub fn complete_score(
    data: &ModelData,
    theta: &ParameterSet,
    latents: &LatentState,
    z: &[bool],
    t: &[f64],
) -> Result<Vec<f64>> {
    theta.validate()?;
    let p = data.p();
    let mut grad = vec![0.0; 2 * p + 6];
    for k in 0..data.n() {
        let (ez, et) = predictors(data, theta, latents, k);
        let pk = logistic(ez);
        let zk = f64::from(u8::from(z[k]));
        let dt = if z[k] {
            (t[k] / et.clamp(-ETA_BOUND, ETA_BOUND).exp() - 1.0) / theta.psi
        } else {
            0.0
        };
        accumulate(&mut grad, data.design.row(k), data.latent_row(latents, k), zk - pk, dt);
    }
    Ok(grad)
}

#[cfg(test)]
pub(crate) mod testdata {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    /// A small random instance detached from any graph.
    pub fn random_instance(n: usize, p: usize, n_ent: usize, n_pol: usize, seed: u64) -> (ModelData, ParameterSet, LatentState) {
        let mut r = stream(seed, Purpose::Generate, &[]);
        let mut values = Vec::with_capacity(n * p);
        for _ in 0..n {
            values.push(1.0);
            for _ in 1..p {
                values.push(r.random_range(-1.0..1.0));
            }
        }
        let design = DesignMatrix {
            names: (0..p).map(|j| format!("x{j}")).collect(),
            n,
            p,
            values,
        };
        let buyer: Vec<usize> = (0..n).map(|_| r.random_range(0..n_ent)).collect();
        let seller: Vec<usize> = buyer.iter().map(|&b| (b + 1 + r.random_range(0..n_ent - 1)) % n_ent).collect();
        let policy: Vec<usize> = (0..n).map(|_| r.random_range(0..n_pol)).collect();
        let window: Vec<f64> = (0..n).map(|_| r.random_range(0.2..4.0)).collect();
        let observed_claim: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
        let observed_gap: Vec<f64> = (0..n)
            .map(|k| {
                if observed_claim[k] {
                    r.random_range(0.01..window[k])
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let data =
            ModelData::from_parts(design, buyer, seller, policy, window, observed_claim, observed_gap, n_ent, n_pol)
                .expect("valid random instance");
        let mut coef = |_: usize| r.random_range(-0.8..0.8);
        let theta = ParameterSet {
            alpha: (0..p).map(&mut coef).collect(),
            beta: [coef(0).abs(), coef(0), coef(0)],
            gamma: (0..p).map(&mut coef).collect(),
            nu: [coef(0), coef(0), coef(0)],
            psi: r.random_range(0.2..2.0),
            rho: r.random_range(-0.9..0.9),
        };
        let mut latent = |m: usize| (0..m).map(|_| r.random_range(-1.5..1.5)).collect::<Vec<_>>();
        let latents = LatentState {
            buyer: latent(n_ent),
            seller: latent(n_ent),
            policy: latent(n_pol),
        };
        (data, theta, latents)
    }
}

#[cfg(test)]
mod tests {
    use super::testdata::random_instance;
    use super::*;
    use crate::oracle::{integrate, integrate_half_line};
    use proptest::prelude::*;

    #[test]
    fn claim_prob_examples() {
        assert_eq!(claim_prob(&[1.0, 2.0], [0.3, 0.1, 0.2], &[0.0, 0.0], &[0.0; 3]).unwrap(), 0.5);
        let p = claim_prob(&[1.0, 0.0], [0.0; 3], &[-1.725, 0.7], &[0.4, 0.4, 0.4]).unwrap();
        assert!((p - 1.0 / (1.0 + 1.725f64.exp())).abs() < 1e-15);
        assert!((p - 0.1512).abs() < 5e-5, "{p}");
        let err = claim_prob(&[1.0, 1.0], [0.0; 3], &[0.0, f64::NAN], &[0.0; 3]).unwrap_err();
        assert!(err.to_string().contains("alpha[1]"));
    }

    #[test]
    fn exponential_special_case() {
        let mu = 1.7;
        let d = gap_density(mu, mu, 1.0).unwrap();
        assert!((d - (-1.0f64).exp() / mu).abs() < 1e-14);
        assert!(gap_density(0.0, 1.0, 1.0).is_err());
        assert!(gap_density(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        for &mu in &[0.2, 1.0, 3.5] {
            for &psi in &[0.2, 0.7, 1.0, 2.5] {
                // t = x^4 removes the integrable singularity at 0 for shapes below 1
                let total = integrate_half_line(
                    |x| if x > 0.0 { 4.0 * x.powi(3) * gap_density(x.powi(4), mu, psi).unwrap() } else { 0.0 },
                    1e-13,
                );
                assert!((total - 1.0).abs() < 1e-10, "mu={mu} psi={psi} total={total}");
            }
        }
    }

    #[test]
    fn cdf_matches_quadrature() {
        let (p, mu, psi, c) = (0.3, 1.0, 0.5, 2.0);
        let f = integrate(|t| if t > 0.0 { gap_density(t, mu, psi).unwrap() } else { 0.0 }, 0.0, c, 1e-14);
        let ps = truncated_claim_prob(p, mu, psi, c).unwrap();
        assert!((ps - p * f).abs() < 1e-12);
        assert_eq!(truncated_claim_prob(p, mu, psi, f64::INFINITY).unwrap(), p);
        assert!(truncated_claim_prob(p, mu, psi, 1e-12).unwrap() < 1e-20);
    }

    #[test]
    fn truncated_density_integrates_to_one() {
        for &mu in &[0.3, 1.0, 2.0] {
            for &psi in &[0.3, 1.0, 1.8] {
                for &c in &[0.1, 1.0, 5.0] {
                    let total = integrate(
                        |t| if t > 0.0 { truncated_gap_density(t, mu, psi, c).unwrap() } else { 0.0 },
                        0.0,
                        c,
                        1e-13,
                    );
                    assert!((total - 1.0).abs() < 1e-8, "mu={mu} psi={psi} c={c} total={total}");
                }
            }
        }
        assert!(truncated_gap_density(2.0, 1.0, 1.0, 1.0).is_err());
        let far = truncated_gap_density(1.0, 1.0, 0.5, 200.0).unwrap();
        assert!((far - gap_density(1.0, 1.0, 0.5).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn gap_score_matches_closed_form() {
        // d/d eta ln f at mu = e^eta equals (1/psi)(T/mu - 1)
        for &(t, eta, psi) in &[(0.5, 0.1, 0.4), (2.0, -0.3, 1.3), (0.05, 0.7, 2.0)] {
            let shape = GammaShape::new(1.0 / psi);
            let lf = |e: f64| ln_gap_density_with(t, f64::exp(e), psi, &shape);
            let h = 1e-5;
            let fd = (lf(eta + h) - lf(eta - h)) / (2.0 * h);
            let analytic = (t / eta.exp() - 1.0) / psi;
            assert!((fd - analytic).abs() <= 1e-6 * analytic.abs().max(1.0));
        }
    }

    #[test]
    fn singletons_add_up() {
        let (data, theta, latents) = random_instance(5, 3, 4, 2, 11);
        let total = obs_loglik_conditional(&data, &theta, &latents).unwrap();
        let mut sum = 0.0;
        for k in 0..5 {
            let (ez, et) = predictors(&data, &theta, &latents, k);
            let p = logistic(ez);
            let mu = et.exp();
            let c = data.window[k];
            sum += if data.observed_claim[k] {
                let t = data.observed_gap[k];
                (truncated_claim_prob(p, mu, theta.psi, c).unwrap()).ln()
                    + truncated_gap_density(t, mu, theta.psi, c).unwrap().ln()
            } else {
                (1.0 - truncated_claim_prob(p, mu, theta.psi, c).unwrap()).ln()
            };
        }
        assert!((total - sum).abs() < 1e-10 * sum.abs(), "{total} vs {sum}");
    }

    #[test]
    fn prior_at_zero() {
        let l = LatentState::zeros(4, 3);
        let v = ln_prior(&l, 0.0).unwrap();
        assert!((v + (2.0 * 4.0 + 3.0) * 0.5 * LN_2PI).abs() < 1e-12);
        assert!(ln_prior(&l, 1.0).is_err());
        // separation at rho = 0
        let (b, s) = (0.7, -1.2);
        assert!((ln_bivariate_normal(b, s, 0.0) - ln_normal(b) - ln_normal(s)).abs() < 1e-12);
    }

    fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let h = 1e-5 * x[i].abs().max(1.0);
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn assert_close(a: &[f64], b: &[f64]) {
        let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            assert!((x - y).abs() <= 1e-5 * scale, "index {i}: {x} vs {y}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn observed_score_matches_finite_differences(seed in 0u64..10_000) {
            let (data, theta, latents) = random_instance(30, 4, 6, 5, seed);
            let grad = obs_score(&data, &theta, &latents).unwrap();
            let fd = finite_difference(
                |v| obs_loglik_conditional(&data, &theta.with_coefficients(v), &latents).unwrap(),
                &theta.coefficients(),
            );
            assert_close(&grad, &fd);
        }

        #[test]
        fn complete_score_matches_finite_differences(seed in 0u64..10_000) {
            let (data, theta, latents) = random_instance(30, 4, 6, 5, seed);
            let z: Vec<bool> = (0..30).map(|k| k % 3 == 0).collect();
            let t: Vec<f64> = (0..30).map(|k| 0.1 + k as f64 * 0.07).collect();
            let grad = complete_score(&data, &theta, &latents, &z, &t).unwrap();
            let fd = finite_difference(
                |v| complete_loglik(&data, &theta.with_coefficients(v), &latents, &z, &t).unwrap(),
                &theta.coefficients(),
            );
            assert_close(&grad, &fd);
        }

        #[test]
        fn flip_invariance(seed in 0u64..10_000) {
            let (data, theta, latents) = random_instance(20, 3, 5, 4, seed);
            let z: Vec<bool> = (0..20).map(|k| k % 2 == 0).collect();
            let t = vec![0.8; 20];
            for f in 0..3 {
                let mut flipped = latents.clone();
                flipped.negate(f);
                let a = obs_loglik_conditional(&data, &theta, &latents).unwrap();
                let b = obs_loglik_conditional(&data, &theta.flipped(f), &flipped).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
                let a = complete_loglik(&data, &theta, &latents, &z, &t).unwrap();
                let b = complete_loglik(&data, &theta.flipped(f), &flipped, &z, &t).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn glm_reduction_ignores_latents(seed in 0u64..10_000) {
            let (data, mut theta, latents) = random_instance(20, 3, 5, 4, seed);
            theta.beta = [0.0; 3];
            theta.nu = [0.0; 3];
            let zero = LatentState::zeros(5, 4);
            let a = obs_loglik_conditional(&data, &theta, &latents).unwrap();
            let b = obs_loglik_conditional(&data, &theta, &zero).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn truncated_prob_monotone(p in 0.0f64..1.0, mu in 0.1f64..5.0, psi in 0.1f64..3.0, c in 0.01f64..10.0, dc in 0.0f64..3.0) {
            let a = truncated_claim_prob(p, mu, psi, c).unwrap();
            let b = truncated_claim_prob(p, mu, psi, c + dc).unwrap();
            prop_assert!(b >= a - 1e-15);
            prop_assert!(truncated_claim_prob((p + 0.1).min(1.0), mu, psi, c).unwrap() >= a - 1e-15);
        }
    }
}
